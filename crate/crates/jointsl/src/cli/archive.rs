//! Versioned binary posterior archive.
//!
//! Layout: magic `JSLA`, format version (u32 LE), header length (u64 LE),
//! a JSON header, then the sections listed in the header's directory, each
//! as a u64 LE byte length followed by raw little-endian f64 data. The
//! header carries the tool version, the model spec and priors, the full
//! MCMC configuration and seed, chain metadata (burn-in/thin/resolved
//! bases), and per-block acceptance rates.

use crate::error::{Error, Result};
use crate::jointmodel::{ChainMeta, JointModelSpec, McmcConfig, PosteriorDraws, PriorSpec};
use crate::jointmodel::ThetaDraw;
use serde::{Deserialize, Serialize};
use std::path::Path;

pub const ARCHIVE_MAGIC: [u8; 4] = *b"JSLA";
pub const ARCHIVE_VERSION: u32 = 1;

/// Everything a fit archive stores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArchive {
    pub tool_version: String,
    pub spec: JointModelSpec,
    pub priors: PriorSpec,
    /// Covariate labels of the dataset the model was fitted to.
    pub covariate_names: Vec<String>,
    pub mcmc: McmcConfig,
    pub fit: PosteriorDraws,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SectionInfo {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ArchiveHeader {
    tool_version: String,
    spec: JointModelSpec,
    priors: PriorSpec,
    covariate_names: Vec<String>,
    mcmc: McmcConfig,
    meta: ChainMeta,
    acceptance: Vec<(String, f64)>,
    n_draws: usize,
    sections: Vec<SectionInfo>,
}

struct Dims {
    p: usize,
    k: usize,
    g: usize,
    a: usize,
    d: usize,
}

fn dims_of(draws: &PosteriorDraws) -> Result<Dims> {
    let first = draws
        .thetas
        .first()
        .ok_or_else(|| Error::invalid("cannot archive an empty chain"))?;
    let dims = Dims {
        p: first.beta.len(),
        k: first.gamma_h0.len(),
        g: first.gamma.len(),
        a: first.alpha.len(),
        d: first.d.len(),
    };
    for (i, t) in draws.thetas.iter().enumerate() {
        if t.beta.len() != dims.p
            || t.gamma_h0.len() != dims.k
            || t.gamma.len() != dims.g
            || t.alpha.len() != dims.a
            || t.d.len() != dims.d
        {
            return Err(Error::invalid(format!(
                "draw {i} has inconsistent parameter dimensions"
            )));
        }
    }
    Ok(dims)
}

fn push_section(
    sections: &mut Vec<SectionInfo>,
    payloads: &mut Vec<Vec<f64>>,
    name: &str,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
) {
    debug_assert_eq!(data.len(), rows * cols);
    sections.push(SectionInfo {
        name: name.to_string(),
        rows,
        cols,
    });
    payloads.push(data);
}

/// Serializes an archive to bytes. Deterministic: identical input produces
/// identical bytes.
pub fn archive_to_bytes(archive: &FitArchive) -> Result<Vec<u8>> {
    archive.fit.validate()?;
    let dims = dims_of(&archive.fit)?;
    let n = archive.fit.len();
    let thetas = &archive.fit.thetas;

    let mut sections = Vec::new();
    let mut payloads: Vec<Vec<f64>> = Vec::new();
    let flat = |f: &dyn Fn(&ThetaDraw) -> Vec<f64>| -> Vec<f64> {
        thetas.iter().flat_map(|t| f(t)).collect()
    };
    push_section(&mut sections, &mut payloads, "beta", n, dims.p, flat(&|t| t.beta.clone()));
    push_section(&mut sections, &mut payloads, "sigma", n, 1, flat(&|t| vec![t.sigma]));
    push_section(
        &mut sections,
        &mut payloads,
        "gamma_h0",
        n,
        dims.k,
        flat(&|t| t.gamma_h0.clone()),
    );
    push_section(&mut sections, &mut payloads, "gamma", n, dims.g, flat(&|t| t.gamma.clone()));
    push_section(&mut sections, &mut payloads, "alpha", n, dims.a, flat(&|t| t.alpha.clone()));
    push_section(&mut sections, &mut payloads, "d", n, dims.d, flat(&|t| t.d.clone()));
    push_section(&mut sections, &mut payloads, "tau", n, 1, flat(&|t| vec![t.tau]));
    if let Some(re) = &archive.fit.random_effects {
        let cols = re.first().map_or(0, |row| row.len());
        if re.iter().any(|row| row.len() != cols) {
            return Err(Error::invalid(
                "random-effect draws have inconsistent lengths",
            ));
        }
        push_section(
            &mut sections,
            &mut payloads,
            "random_effects",
            n,
            cols,
            re.iter().flatten().copied().collect(),
        );
    }

    let header = ArchiveHeader {
        tool_version: archive.tool_version.clone(),
        spec: archive.spec.clone(),
        priors: archive.priors.clone(),
        covariate_names: archive.covariate_names.clone(),
        mcmc: archive.mcmc.clone(),
        meta: archive.fit.meta.clone(),
        acceptance: archive.fit.acceptance.clone(),
        n_draws: n,
        sections,
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let mut out = Vec::with_capacity(
        16 + header_bytes.len() + payloads.iter().map(|p| 8 + p.len() * 8).sum::<usize>(),
    );
    out.extend_from_slice(&ARCHIVE_MAGIC);
    out.extend_from_slice(&ARCHIVE_VERSION.to_le_bytes());
    out.extend_from_slice(&(header_bytes.len() as u64).to_le_bytes());
    out.extend_from_slice(&header_bytes);
    for payload in &payloads {
        out.extend_from_slice(&((payload.len() * 8) as u64).to_le_bytes());
        for &x in payload {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::invalid(format!(
                "archive truncated while reading {what} (need {n} bytes at offset {})",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn take_u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn take_u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Parses an archive from bytes, validating magic, version, and the section
/// directory.
pub fn archive_from_bytes(bytes: &[u8]) -> Result<FitArchive> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != ARCHIVE_MAGIC {
        return Err(Error::invalid(format!(
            "not a posterior archive: bad magic {magic:?}"
        )));
    }
    let version = cur.take_u32("version")?;
    if version != ARCHIVE_VERSION {
        return Err(Error::invalid(format!(
            "unsupported archive version {version} (this tool reads version {ARCHIVE_VERSION})"
        )));
    }
    let header_len = cur.take_u64("header length")? as usize;
    let header_bytes = cur.take(header_len, "header")?;
    let header: ArchiveHeader = serde_json::from_slice(header_bytes)
        .map_err(|e| Error::invalid(format!("archive header is not valid JSON: {e}")))?;

    let mut data: Vec<Vec<f64>> = Vec::with_capacity(header.sections.len());
    for s in &header.sections {
        let want = s.rows * s.cols * 8;
        let got = cur.take_u64(&format!("section {} length", s.name))? as usize;
        if got != want {
            return Err(Error::invalid(format!(
                "section {} is {got} bytes but the directory promises {want}",
                s.name
            )));
        }
        let raw = cur.take(want, &s.name)?;
        data.push(
            raw.chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        );
    }
    if cur.pos != bytes.len() {
        return Err(Error::invalid(format!(
            "{} trailing bytes after the last section",
            bytes.len() - cur.pos
        )));
    }

    let find = |name: &str| -> Result<(usize, &SectionInfo)> {
        header
            .sections
            .iter()
            .enumerate()
            .find(|(_, s)| s.name == name)
            .map(|(i, s)| (i, s))
            .ok_or_else(|| Error::invalid(format!("archive is missing section {name}")))
    };
    let n = header.n_draws;
    let grab = |name: &str| -> Result<(Vec<Vec<f64>>, usize)> {
        let (i, info) = find(name)?;
        if info.rows != n {
            return Err(Error::invalid(format!(
                "section {name} has {} rows for {n} draws",
                info.rows
            )));
        }
        Ok((
            data[i].chunks(info.cols.max(1)).map(|c| c.to_vec()).collect(),
            info.cols,
        ))
    };

    let (beta, _) = grab("beta")?;
    let (sigma, _) = grab("sigma")?;
    let (gamma_h0, _) = grab("gamma_h0")?;
    let (gamma, g_cols) = grab("gamma")?;
    let (alpha, a_cols) = grab("alpha")?;
    let (d, _) = grab("d")?;
    let (tau, _) = grab("tau")?;

    let mut thetas = Vec::with_capacity(n);
    for i in 0..n {
        thetas.push(ThetaDraw {
            beta: beta[i].clone(),
            sigma: sigma[i][0],
            gamma_h0: gamma_h0[i].clone(),
            gamma: if g_cols == 0 { vec![] } else { gamma[i].clone() },
            alpha: if a_cols == 0 { vec![] } else { alpha[i].clone() },
            d: d[i].clone(),
            tau: tau[i][0],
        });
    }
    let random_effects = match header.sections.iter().position(|s| s.name == "random_effects")
    {
        Some(i) => {
            let info = &header.sections[i];
            Some(
                data[i]
                    .chunks(info.cols.max(1))
                    .map(|c| c.to_vec())
                    .take(n)
                    .collect(),
            )
        }
        None => None,
    };

    let archive = FitArchive {
        tool_version: header.tool_version,
        spec: header.spec,
        priors: header.priors,
        covariate_names: header.covariate_names,
        mcmc: header.mcmc,
        fit: PosteriorDraws {
            thetas,
            random_effects,
            acceptance: header.acceptance,
            meta: header.meta,
        },
    };
    archive.fit.validate()?;
    Ok(archive)
}

pub fn save_archive(archive: &FitArchive, path: &Path) -> Result<()> {
    std::fs::write(path, archive_to_bytes(archive)?)?;
    Ok(())
}

pub fn load_archive(path: &Path) -> Result<FitArchive> {
    let bytes = std::fs::read(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    archive_from_bytes(&bytes)
}
