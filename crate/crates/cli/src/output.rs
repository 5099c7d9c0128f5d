//! CSV series and JSON summaries.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use kgscatter::experiments::{Criterion, ExperimentReport, Value};
use kgscatter::observables::ObservableSeries;
use serde_json::{json, Map, Value as Json};

pub const CSV_HEADER: &str = "t,energy,mass,momentum,linf,h1,s6_cum,v_r,x_r";

/// 17 significant digits in scientific notation.
pub fn fmt_sci(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn series_csv(s: &ObservableSeries) -> String {
    let mut out = String::with_capacity(200 * (s.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for i in 0..s.len() {
        let row = [
            s.times[i],
            s.energy[i],
            s.mass[i],
            s.momentum[i],
            s.linf[i],
            s.h1[i],
            s.s6_cumulative[i],
            s.v_r[i],
            s.x_r[i],
        ];
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", fmt_sci(*v));
        }
        out.push('\n');
    }
    out
}

/// JSON number, or a string for non-finite values.
pub fn json_number(v: f64) -> Json {
    serde_json::Number::from_f64(v)
        .map(Json::Number)
        .unwrap_or_else(|| Json::String(crate::config::fmt_f64(v)))
}

fn json_value(v: &Value) -> Json {
    match v {
        Value::Number(x) => json_number(*x),
        Value::List(xs) => Json::Array(xs.iter().map(|x| json_number(*x)).collect()),
        Value::Bool(b) => Json::Bool(*b),
        Value::Text(s) => Json::String(s.clone()),
    }
}

fn json_criterion(c: &Criterion) -> Json {
    match *c {
        Criterion::AtMost(t) => json!({"rule": "at_most", "tolerance": json_number(t)}),
        Criterion::Below(t) => json!({"rule": "below", "tolerance": json_number(t)}),
        Criterion::AtLeast(t) => json!({"rule": "at_least", "tolerance": json_number(t)}),
        Criterion::Between(a, b) => {
            json!({"rule": "between", "lower": json_number(a), "upper": json_number(b)})
        }
        Criterion::Holds => json!({"rule": "holds"}),
    }
}

/// File name for a series of `report`.
pub fn series_file_name(report: &ExperimentReport, key: &str) -> String {
    if key == "series" {
        format!("{}.csv", report.name)
    } else {
        format!("{}_{}.csv", report.name, key.trim_end_matches("_series"))
    }
}

pub fn summary_json(
    report: &ExperimentReport,
    inputs: &[(String, String)],
    series_files: &[PathBuf],
) -> Json {
    let mut input_map = Map::new();
    for (k, v) in inputs {
        input_map.insert(k.clone(), Json::String(v.clone()));
    }
    let mut resolved = Map::new();
    for (k, v) in &report.inputs {
        resolved.insert(k.clone(), json_value(v));
    }
    let mut results = Map::new();
    for (k, v) in &report.results {
        results.insert(k.clone(), json_value(v));
    }
    let flags: Vec<Json> = report
        .flags
        .iter()
        .map(|f| {
            json!({
                "name": f.name,
                "passed": f.passed,
                "measured": json_number(f.measured),
                "criterion": json_criterion(&f.criterion),
            })
        })
        .collect();
    let mut tolerances = Map::new();
    for (k, c) in report.tolerances() {
        tolerances.insert(k, json_criterion(&c));
    }
    json!({
        "experiment": report.name,
        "all_passed": report.all_passed(),
        "inputs": input_map,
        "resolved_inputs": resolved,
        "results": results,
        "flags": flags,
        "tolerances": tolerances,
        "notes": report.notes,
        "series": series_files
            .iter()
            .map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
            .collect::<Vec<_>>(),
        "versions": {
            "kgscatter": kgscatter::VERSION,
            "kgscatter-cli": env!("CARGO_PKG_VERSION"),
            "summary_format": 1,
        },
    })
}

/// Write every series and the summary under `dir`, creating it if needed.
pub fn write_outputs(
    dir: &Path,
    report: &ExperimentReport,
    inputs: &[(String, String)],
) -> std::io::Result<(Vec<PathBuf>, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (key, s) in &report.series {
        let path = dir.join(series_file_name(report, key));
        std::fs::write(&path, series_csv(s))?;
        files.push(path);
    }
    let summary = dir.join(format!("{}.json", report.name));
    let mut text = serde_json::to_string_pretty(&summary_json(report, inputs, &files))
        .expect("summary serializes");
    text.push('\n');
    std::fs::write(&summary, text)?;
    Ok((files, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        assert_eq!(fmt_sci(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_sci(-2.5), "-2.5000000000000000e0");
        let x = std::f64::consts::PI;
        assert_eq!(fmt_sci(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let s = ObservableSeries {
            times: vec![0.0, 1.0],
            energy: vec![1.0, 1.0],
            mass: vec![2.0, 2.0],
            momentum: vec![0.0, 0.0],
            linf: vec![1.0, 0.5],
            h1: vec![1.0, 1.0],
            s6_cumulative: vec![0.0, 0.1],
            v_r: vec![0.0, 0.0],
            x_r: vec![0.0, 0.0],
        };
        let text = series_csv(&s);
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2].split(',').count(), 9);
    }

    #[test]
    fn non_finite_numbers_are_strings() {
        assert_eq!(json_number(f64::INFINITY), Json::String("inf".into()));
        assert_eq!(json_number(1.5), json!(1.5));
    }
}
