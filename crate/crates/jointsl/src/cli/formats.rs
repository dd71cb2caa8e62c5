//! On-disk data formats: the long-format dataset CSV, the truth sidecar,
//! and the model-library JSON.
//!
//! Dataset CSV schema (bit-exact): header `id,time,value,obs_time,event,
//! w1..wK`, one row per measurement, `obs_time`/`event`/covariates repeated
//! per subject, UTF-8, LF line endings, '.' decimal separator, and floats
//! written with full round-trip precision so `parse(emit(d)) = d` exactly.

use crate::data::{Dataset, SubjectRecord};
use crate::error::{Error, Result};
use crate::jointmodel::{
    BaselineConfig, FunctionalForm, JointModelSpec, PriorSpec, TrajectoryBasis,
};
use crate::simulate::SubjectTruth;
use crate::superlearn::{LibraryMember, ModelLibrary};
use serde_json::Value;
use std::path::Path;

/// Formats a float so that parsing the string returns the exact same bits
/// (Rust's shortest round-trip representation).
pub fn fmt_float(v: f64) -> String {
    format!("{v}")
}

const FIXED_COLUMNS: [&str; 5] = ["id", "time", "value", "obs_time", "event"];

/// Serializes a dataset to the long-format CSV schema.
pub fn dataset_to_csv(data: &Dataset) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(data.covariate_names.iter().cloned());
    w.write_record(&header)?;
    for s in &data.subjects {
        for (t, v) in s.times.iter().zip(&s.values) {
            let mut row = vec![
                s.id.clone(),
                fmt_float(*t),
                fmt_float(*v),
                fmt_float(s.obs_time),
                if s.event { "1".into() } else { "0".into() },
            ];
            row.extend(s.covariates.iter().map(|c| fmt_float(*c)));
            w.write_record(&row)?;
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::invalid(format!("csv buffer error: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(format!("non-utf8 csv output: {e}")))
}

pub fn write_dataset_csv(data: &Dataset, path: &Path) -> Result<()> {
    std::fs::write(path, dataset_to_csv(data)?)?;
    Ok(())
}

fn parse_float(field: &str, what: &str, line: usize) -> Result<f64> {
    field.parse::<f64>().map_err(|_| {
        Error::invalid(format!(
            "csv line {line}: {what} is not a number: {field:?}"
        ))
    })
}

/// Parses the long-format CSV back into a dataset. Rows belonging to one
/// subject must be contiguous and must repeat identical outcome/covariate
/// fields.
pub fn dataset_from_csv(text: &str) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    if headers.len() < FIXED_COLUMNS.len() {
        return Err(Error::invalid(format!(
            "csv header has {} columns; expected at least {} ({})",
            headers.len(),
            FIXED_COLUMNS.len(),
            FIXED_COLUMNS.join(",")
        )));
    }
    for (k, want) in FIXED_COLUMNS.iter().enumerate() {
        if &headers[k] != *want {
            return Err(Error::invalid(format!(
                "csv column {} must be named {:?}, found {:?}",
                k + 1,
                want,
                &headers[k]
            )));
        }
    }
    let covariate_names: Vec<String> = headers
        .iter()
        .skip(FIXED_COLUMNS.len())
        .map(|s| s.to_string())
        .collect();
    let k_cov = covariate_names.len();

    let mut subjects: Vec<SubjectRecord> = Vec::new();
    let mut seen: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for (idx, rec) in r.records().enumerate() {
        let line = idx + 2; // header is line 1
        let rec = rec?;
        if rec.len() != FIXED_COLUMNS.len() + k_cov {
            return Err(Error::invalid(format!(
                "csv line {line}: {} fields, expected {}",
                rec.len(),
                FIXED_COLUMNS.len() + k_cov
            )));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(Error::invalid(format!("csv line {line}: empty id")));
        }
        let time = parse_float(&rec[1], "time", line)?;
        let value = parse_float(&rec[2], "value", line)?;
        let obs_time = parse_float(&rec[3], "obs_time", line)?;
        let event = match &rec[4] {
            "1" => true,
            "0" => false,
            other => {
                return Err(Error::invalid(format!(
                    "csv line {line}: event must be 0 or 1, found {other:?}"
                )))
            }
        };
        let mut covariates = Vec::with_capacity(k_cov);
        for (k, name) in covariate_names.iter().enumerate() {
            covariates.push(parse_float(&rec[FIXED_COLUMNS.len() + k], name, line)?);
        }
        match subjects.last_mut() {
            Some(last) if last.id == id => {
                if last.obs_time.to_bits() != obs_time.to_bits()
                    || last.event != event
                    || last.covariates.len() != covariates.len()
                    || last
                        .covariates
                        .iter()
                        .zip(&covariates)
                        .any(|(a, b)| a.to_bits() != b.to_bits())
                {
                    return Err(Error::invalid(format!(
                        "csv line {line}: subject {id:?} repeats with a different \
                         outcome or covariates"
                    )));
                }
                last.times.push(time);
                last.values.push(value);
            }
            _ => {
                if !seen.insert(id.clone()) {
                    return Err(Error::invalid(format!(
                        "csv line {line}: rows for subject {id:?} are not contiguous"
                    )));
                }
                subjects.push(SubjectRecord {
                    id,
                    covariates,
                    times: vec![time],
                    values: vec![value],
                    obs_time,
                    event,
                });
            }
        }
    }
    Dataset::new(subjects, covariate_names)
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    dataset_from_csv(&text)
}

/// Writes the per-subject truth sidecar: `id,cell,true_event_time,
/// censoring_time` (empty event time when the latent event never occurs).
pub fn truth_to_csv(truth: &[SubjectTruth]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["id", "cell", "true_event_time", "censoring_time"])?;
    for t in truth {
        w.write_record([
            t.id.as_str(),
            t.cell.as_str(),
            &t.true_event_time.map(fmt_float).unwrap_or_default(),
            &fmt_float(t.censoring_time),
        ])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::invalid(format!("csv buffer error: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(format!("non-utf8 csv output: {e}")))
}

pub fn write_truth_csv(truth: &[SubjectTruth], path: &Path) -> Result<()> {
    std::fs::write(path, truth_to_csv(truth)?)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Model-library JSON.
// ---------------------------------------------------------------------------

/// A library member as read from JSON; the spline-trajectory boundary is
/// resolved against a dataset's follow-up range before fitting.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedMember {
    pub name: String,
    pub trajectory: ParsedTrajectory,
    pub form: Option<ParsedForm>,
    pub covariates: Vec<String>,
    pub baseline: BaselineConfig,
    pub priors: PriorSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedTrajectory {
    Linear,
    Spline { degree: usize, knots: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParsedForm {
    Value,
    Slope,
    /// `v = None` encodes `area_v: "t"` — the running average over (0, t].
    Area { v: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLibrary {
    pub members: Vec<ParsedMember>,
}

impl ParsedLibrary {
    /// Resolves spline boundaries against the follow-up range and builds the
    /// validated library.
    pub fn resolve(&self, follow_up: f64) -> Result<ModelLibrary> {
        if !(follow_up > 0.0) {
            return Err(Error::invalid(
                "library resolution needs a positive follow-up range",
            ));
        }
        let members = self
            .members
            .iter()
            .map(|m| m.resolve(follow_up))
            .collect::<Result<Vec<_>>>()?;
        ModelLibrary::new(members)
    }
}

impl ParsedMember {
    pub fn resolve(&self, follow_up: f64) -> Result<LibraryMember> {
        let trajectory = match &self.trajectory {
            ParsedTrajectory::Linear => TrajectoryBasis::Linear,
            ParsedTrajectory::Spline { degree, knots } => {
                for &k in knots {
                    if !(k > 0.0 && k < follow_up) {
                        return Err(Error::invalid(format!(
                            "model '{}': trajectory knot {k} outside (0, {follow_up})",
                            self.name
                        )));
                    }
                }
                TrajectoryBasis::Spline {
                    degree: *degree,
                    interior_knots: knots.clone(),
                    boundary: (0.0, follow_up),
                }
            }
        };
        let forms = match &self.form {
            None => vec![],
            Some(ParsedForm::Value) => vec![FunctionalForm::Value],
            Some(ParsedForm::Slope) => vec![FunctionalForm::Slope],
            Some(ParsedForm::Area { v }) => vec![FunctionalForm::Area { v: *v }],
        };
        let spec = JointModelSpec {
            name: self.name.clone(),
            trajectory,
            long_covariates: vec![],
            forms,
            hazard_covariates: self.covariates.clone(),
            baseline: self.baseline.clone(),
        };
        spec.validate()?;
        Ok(LibraryMember {
            spec,
            priors: self.priors.clone(),
        })
    }
}

fn schema_err(pointer: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

fn as_object<'v>(
    v: &'v Value,
    ptr: &str,
) -> Result<&'v serde_json::Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| schema_err(ptr, "expected a JSON object"))
}

fn get_string(obj: &serde_json::Map<String, Value>, ptr: &str, key: &str) -> Result<String> {
    match obj.get(key) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(schema_err(&format!("{ptr}/{key}"), "expected a string")),
        None => Err(schema_err(ptr, format!("missing required field '{key}'"))),
    }
}

fn get_uint(v: &Value, ptr: &str) -> Result<usize> {
    v.as_u64()
        .map(|u| u as usize)
        .ok_or_else(|| schema_err(ptr, "expected a non-negative integer"))
}

fn get_number(v: &Value, ptr: &str) -> Result<f64> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| schema_err(ptr, "expected a finite number"))
}

const MEMBER_KEYS: [&str; 7] = [
    "name",
    "trajectory",
    "spline",
    "functional_form",
    "area_v",
    "covariates",
    "baseline",
];

fn parse_member(v: &Value, ptr: &str) -> Result<ParsedMember> {
    let obj = as_object(v, ptr)?;
    for key in obj.keys() {
        if key != "priors" && !MEMBER_KEYS.contains(&key.as_str()) {
            return Err(schema_err(
                &format!("{ptr}/{key}"),
                format!(
                    "unknown field '{key}'; expected one of {}, priors",
                    MEMBER_KEYS.join(", ")
                ),
            ));
        }
    }
    let name = get_string(obj, ptr, "name")?;
    if name.is_empty() {
        return Err(schema_err(&format!("{ptr}/name"), "name must be non-empty"));
    }

    let trajectory = match get_string(obj, ptr, "trajectory")?.as_str() {
        "linear" => {
            if obj.contains_key("spline") {
                return Err(schema_err(
                    &format!("{ptr}/spline"),
                    "spline settings given for a linear trajectory",
                ));
            }
            ParsedTrajectory::Linear
        }
        "spline" => {
            let sptr = format!("{ptr}/spline");
            let sp = obj
                .get("spline")
                .ok_or_else(|| schema_err(ptr, "spline trajectory needs a 'spline' object"))?;
            let sp = as_object(sp, &sptr)?;
            for key in sp.keys() {
                if key != "degree" && key != "knots" {
                    return Err(schema_err(
                        &format!("{sptr}/{key}"),
                        format!("unknown field '{key}'; expected degree, knots"),
                    ));
                }
            }
            let degree = get_uint(
                sp.get("degree")
                    .ok_or_else(|| schema_err(&sptr, "missing required field 'degree'"))?,
                &format!("{sptr}/degree"),
            )?;
            let knots_v = sp
                .get("knots")
                .ok_or_else(|| schema_err(&sptr, "missing required field 'knots'"))?;
            let arr = knots_v
                .as_array()
                .ok_or_else(|| schema_err(&format!("{sptr}/knots"), "expected an array"))?;
            let mut knots = Vec::with_capacity(arr.len());
            for (k, item) in arr.iter().enumerate() {
                knots.push(get_number(item, &format!("{sptr}/knots/{k}"))?);
            }
            if knots.windows(2).any(|w| w[0] >= w[1]) {
                return Err(schema_err(
                    &format!("{sptr}/knots"),
                    "knots must be strictly increasing",
                ));
            }
            ParsedTrajectory::Spline { degree, knots }
        }
        other => {
            return Err(schema_err(
                &format!("{ptr}/trajectory"),
                format!("expected \"linear\" or \"spline\", found {other:?}"),
            ))
        }
    };

    let form = match obj.get("functional_form") {
        None => None,
        Some(Value::String(s)) => match s.as_str() {
            "none" => None,
            "value" => Some(ParsedForm::Value),
            "slope" => Some(ParsedForm::Slope),
            "area" => {
                let v = match obj.get("area_v") {
                    None => None,
                    Some(Value::String(t)) if t == "t" => None,
                    Some(Value::Number(_)) => {
                        let x = get_number(
                            obj.get("area_v").unwrap(),
                            &format!("{ptr}/area_v"),
                        )?;
                        if !(x > 0.0) {
                            return Err(schema_err(
                                &format!("{ptr}/area_v"),
                                "window length must be positive",
                            ));
                        }
                        Some(x)
                    }
                    Some(_) => {
                        return Err(schema_err(
                            &format!("{ptr}/area_v"),
                            "expected a number or \"t\"",
                        ))
                    }
                };
                Some(ParsedForm::Area { v })
            }
            other => {
                return Err(schema_err(
                    &format!("{ptr}/functional_form"),
                    format!(
                        "expected \"value\", \"slope\", \"area\", or \"none\", found {other:?}"
                    ),
                ))
            }
        },
        Some(_) => {
            return Err(schema_err(
                &format!("{ptr}/functional_form"),
                "expected a string",
            ))
        }
    };
    if obj.contains_key("area_v") && !matches!(form, Some(ParsedForm::Area { .. })) {
        return Err(schema_err(
            &format!("{ptr}/area_v"),
            "area_v is only meaningful for functional_form \"area\"",
        ));
    }

    let covariates = match obj.get("covariates") {
        None => vec![],
        Some(Value::Array(arr)) => {
            let mut out = Vec::with_capacity(arr.len());
            for (k, item) in arr.iter().enumerate() {
                match item {
                    Value::String(s) => out.push(s.clone()),
                    _ => {
                        return Err(schema_err(
                            &format!("{ptr}/covariates/{k}"),
                            "expected a string label",
                        ))
                    }
                }
            }
            out
        }
        Some(_) => {
            return Err(schema_err(
                &format!("{ptr}/covariates"),
                "expected an array of labels",
            ))
        }
    };

    let baseline = match obj.get("baseline") {
        None => BaselineConfig::default(),
        Some(b) => {
            let bptr = format!("{ptr}/baseline");
            let bo = as_object(b, &bptr)?;
            let mut cfg = BaselineConfig::default();
            for (key, val) in bo {
                match key.as_str() {
                    "degree" => cfg.degree = get_uint(val, &format!("{bptr}/degree"))?,
                    "interior_knots" => {
                        cfg.interior_knots = get_uint(val, &format!("{bptr}/interior_knots"))?
                    }
                    "penalty_order" => {
                        cfg.penalty_order = get_uint(val, &format!("{bptr}/penalty_order"))?
                    }
                    other => {
                        return Err(schema_err(
                            &format!("{bptr}/{other}"),
                            format!(
                                "unknown field '{other}'; expected degree, interior_knots, \
                                 penalty_order"
                            ),
                        ))
                    }
                }
            }
            cfg
        }
    };

    let priors = match obj.get("priors") {
        None => PriorSpec::default(),
        Some(p) => serde_json::from_value::<PriorSpec>(p.clone()).map_err(|e| {
            schema_err(&format!("{ptr}/priors"), format!("invalid priors: {e}"))
        })?,
    };

    Ok(ParsedMember {
        name,
        trajectory,
        form,
        covariates,
        baseline,
        priors,
    })
}

/// Parses the model-library JSON: an array of member objects, or a single
/// member object (accepted for `fit`'s one-model spec files).
pub fn parse_library_json(text: &str) -> Result<ParsedLibrary> {
    let v: Value = serde_json::from_str(text)
        .map_err(|e| schema_err("", format!("invalid JSON: {e}")))?;
    let members = match &v {
        Value::Array(items) => {
            if items.is_empty() {
                return Err(schema_err("", "the model library is empty"));
            }
            items
                .iter()
                .enumerate()
                .map(|(i, item)| parse_member(item, &format!("/{i}")))
                .collect::<Result<Vec<_>>>()?
        }
        Value::Object(_) => vec![parse_member(&v, "")?],
        _ => {
            return Err(schema_err(
                "",
                "expected an array of model objects or a single model object",
            ))
        }
    };
    let mut seen = std::collections::BTreeSet::new();
    for (i, m) in members.iter().enumerate() {
        if !seen.insert(m.name.clone()) {
            return Err(schema_err(
                &format!("/{i}/name"),
                format!("duplicate model name '{}'", m.name),
            ));
        }
    }
    Ok(ParsedLibrary { members })
}

pub fn read_library_json(path: &Path) -> Result<ParsedLibrary> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    parse_library_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subject(id: &str, times: &[f64], obs: f64, event: bool, cov: &[f64]) -> SubjectRecord {
        SubjectRecord {
            id: id.into(),
            covariates: cov.to_vec(),
            times: times.to_vec(),
            values: times.iter().map(|t| 1.0 + 0.3 * t).collect(),
            obs_time: obs,
            event,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        // Awkward floats: subnormal-ish, negative zero, long decimals.
        let mut s1 = subject("a 1", &[0.0, 0.5000000000000001, 1.9], 2.75, true, &[0.1]);
        s1.values = vec![-0.0, 1e-300, 0.1 + 0.2];
        let s2 = subject("b,2", &[0.0], 7.25, false, &[-3.5]);
        let data = Dataset::new(vec![s1, s2], vec!["w1".into()]).unwrap();
        let text = dataset_to_csv(&data).unwrap();
        let back = dataset_from_csv(&text).unwrap();
        assert_eq!(back, data);
        // Emission is idempotent byte-for-byte.
        assert_eq!(dataset_to_csv(&back).unwrap(), text);
        // Header matches the pinned schema.
        assert!(text.starts_with("id,time,value,obs_time,event,w1\n"));
        assert!(!text.contains('\r'));
    }

    #[test]
    fn csv_rejects_malformed_inputs() {
        // Non-contiguous subject rows.
        let text = "id,time,value,obs_time,event\na,0,1,2,1\nb,0,1,2,0\na,1,1,2,1\n";
        let err = dataset_from_csv(text).unwrap_err().to_string();
        assert!(err.contains("not contiguous"), "{err}");
        // Inconsistent repeated outcome.
        let text = "id,time,value,obs_time,event\na,0,1,2,1\na,1,1,3,1\n";
        let err = dataset_from_csv(text).unwrap_err().to_string();
        assert!(err.contains("different"), "{err}");
        // Bad event flag.
        let text = "id,time,value,obs_time,event\na,0,1,2,yes\n";
        let err = dataset_from_csv(text).unwrap_err().to_string();
        assert!(err.contains("event"), "{err}");
        // Wrong header.
        let text = "id,t,value,obs_time,event\na,0,1,2,1\n";
        assert!(dataset_from_csv(text).is_err());
    }

    #[test]
    fn truth_sidecar_has_one_row_per_subject() {
        let truth = vec![
            SubjectTruth {
                id: "s1".into(),
                cell: "linear-value".into(),
                b: vec![0.1, 0.2],
                true_event_time: Some(3.25),
                censoring_time: 10.0,
            },
            SubjectTruth {
                id: "s2".into(),
                cell: "nonlinear-slope".into(),
                b: vec![],
                true_event_time: None,
                censoring_time: 4.5,
            },
        ];
        let text = truth_to_csv(&truth).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "id,cell,true_event_time,censoring_time");
        assert_eq!(lines[1], "s1,linear-value,3.25,10");
        assert_eq!(lines[2], "s2,nonlinear-slope,,4.5");
    }

    #[test]
    fn library_json_parses_and_resolves() {
        let text = r#"[
            {"name": "lin-value", "trajectory": "linear", "functional_form": "value"},
            {"name": "nl-area", "trajectory": "spline",
             "spline": {"degree": 2, "knots": [8.0, 16.0]},
             "functional_form": "area", "area_v": "t",
             "covariates": ["w1"],
             "baseline": {"degree": 2, "interior_knots": 3, "penalty_order": 1},
             "priors": {"beta_sd": 5.0}},
            {"name": "windowed", "trajectory": "linear",
             "functional_form": "area", "area_v": 2.5}
        ]"#;
        let parsed = parse_library_json(text).unwrap();
        assert_eq!(parsed.members.len(), 3);
        assert_eq!(parsed.members[1].priors.beta_sd, 5.0);
        assert_eq!(
            parsed.members[2].form,
            Some(ParsedForm::Area { v: Some(2.5) })
        );
        let lib = parsed.resolve(25.0).unwrap();
        assert_eq!(lib.names(), vec!["lin-value", "nl-area", "windowed"]);
        match &lib.members[1].spec.trajectory {
            TrajectoryBasis::Spline {
                degree,
                interior_knots,
                boundary,
            } => {
                assert_eq!(*degree, 2);
                assert_eq!(interior_knots, &vec![8.0, 16.0]);
                assert_eq!(*boundary, (0.0, 25.0));
            }
            other => panic!("expected a spline trajectory, got {other:?}"),
        }
        assert_eq!(
            lib.members[1].spec.hazard_covariates,
            vec!["w1".to_string()]
        );
        // Knot outside the follow-up range fails at resolution.
        assert!(parsed.resolve(10.0).is_err());
    }

    #[test]
    fn library_json_schema_errors_carry_pointers() {
        let cases: Vec<(&str, &str)> = vec![
            (r#"[{"trajectory": "linear"}]"#, "/0"),
            (r#"[{"name": "m", "trajectory": "wiggly"}]"#, "/0/trajectory"),
            (
                r#"[{"name": "m", "trajectory": "spline", "spline": {"degree": 2, "knots": [3, 1]}}]"#,
                "/0/spline/knots",
            ),
            (
                r#"[{"name": "m", "trajectory": "linear", "functional_form": "banana"}]"#,
                "/0/functional_form",
            ),
            (
                r#"[{"name": "m", "trajectory": "linear", "area_v": 2}]"#,
                "/0/area_v",
            ),
            (
                r#"[{"name": "m", "trajectory": "linear", "baseline": {"degree": -1}}]"#,
                "/0/baseline/degree",
            ),
            (
                r#"[{"name": "m", "trajectory": "linear", "extra": 1}]"#,
                "/0/extra",
            ),
            (
                r#"[{"name": "m", "trajectory": "linear", "priors": {"beta_sd": "big"}}]"#,
                "/0/priors",
            ),
            (
                r#"[{"name": "m", "trajectory": "linear"}, {"name": "m", "trajectory": "linear"}]"#,
                "/1/name",
            ),
        ];
        for (text, want_ptr) in cases {
            match parse_library_json(text) {
                Err(Error::Schema { pointer, .. }) => {
                    assert_eq!(pointer, want_ptr, "for {text}");
                }
                other => panic!("expected a schema error for {text}, got {other:?}"),
            }
        }
    }

    #[test]
    fn single_object_spec_is_a_one_member_library() {
        let text = r#"{"name": "solo", "trajectory": "linear", "functional_form": "slope"}"#;
        let parsed = parse_library_json(text).unwrap();
        assert_eq!(parsed.members.len(), 1);
        assert_eq!(parsed.members[0].form, Some(ParsedForm::Slope));
    }
}
