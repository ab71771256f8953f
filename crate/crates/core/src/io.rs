//! File formats: data set and weight tables as CSV, experiment reports.
//!
//! Numbers are written in Rust's shortest round-trip form, so a written
//! data set reads back bit-identical.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pipeline::{ExperimentOutcome, RepetitionFailure};
use crate::survival::SurvivalDataset;
use crate::weights::WeightMatrix;

const FIXED_COLUMNS: [&str; 4] = ["id", "time", "status", "subgroup"];

fn parse_error(source: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line: line as usize,
        message: message.into(),
    }
}

/// Reads `id,time,status,subgroup,<features...>`. Subgroup labels are
/// numbered in order of first appearance. `source` names the input in errors.
pub fn read_dataset_from<R: Read>(reader: R, source: &str) -> Result<SurvivalDataset> {
    let mut csv = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = csv
        .headers()
        .map_err(|e| parse_error(source, 1, e.to_string()))?
        .clone();
    if header.len() < FIXED_COLUMNS.len() || header.iter().zip(FIXED_COLUMNS).any(|(h, want)| h.trim() != want) {
        return Err(parse_error(source, 1, "header must start with id,time,status,subgroup"));
    }
    let feature_names: Vec<String> = header.iter().skip(4).map(|h| h.trim().to_string()).collect();
    let p = feature_names.len();
    let mut ids = Vec::new();
    let mut times = Vec::new();
    let mut events = Vec::new();
    let mut subgroups = Vec::new();
    let mut labels: Vec<String> = Vec::new();
    let mut values = Vec::new();
    for record in csv.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(source, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let row = ids.len() + 1;
        let at = |msg: String| parse_error(source, line, format!("row {row}: {msg}"));
        let time: f64 = record[1]
            .trim()
            .parse()
            .map_err(|_| at(format!("time '{}' is not a number", &record[1])))?;
        if !(time.is_finite() && time > 0.0) {
            return Err(at(format!("time {time} is not positive")));
        }
        let event = match record[2].trim() {
            "0" => false,
            "1" => true,
            other => return Err(at(format!("status '{other}' must be 0 or 1"))),
        };
        let label = record[3].trim();
        if label.is_empty() {
            return Err(at("empty subgroup label".into()));
        }
        let s = match labels.iter().position(|l| l == label) {
            Some(s) => s,
            None => {
                labels.push(label.to_string());
                labels.len() - 1
            }
        };
        for (j, field) in record.iter().skip(4).enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| at(format!("feature {} value '{field}' is not a number", feature_names[j])))?;
            if !v.is_finite() {
                return Err(at(format!("feature {} is not finite", feature_names[j])));
            }
            values.push(v);
        }
        ids.push(record[0].trim().to_string());
        times.push(time);
        events.push(event);
        subgroups.push(s);
    }
    if ids.is_empty() {
        return Err(parse_error(source, 1, "no observations"));
    }
    let covariates = Array2::from_shape_vec((ids.len(), p), values).map_err(|e| Error::Dimension(e.to_string()))?;
    SurvivalDataset::new(ids, times, events, subgroups, labels, covariates, feature_names)
}

pub fn read_dataset(path: &Path) -> Result<SurvivalDataset> {
    let file = File::open(path).map_err(|e| parse_error(&path.display().to_string(), 0, e.to_string()))?;
    read_dataset_from(file, &path.display().to_string())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("{other:?}")),
    }
}

pub fn write_dataset_to<W: Write>(writer: W, data: &SurvivalDataset) -> Result<()> {
    let mut csv = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let header: Vec<&str> = FIXED_COLUMNS
        .iter()
        .copied()
        .chain(data.feature_names().iter().map(String::as_str))
        .collect();
    csv.write_record(&header).map_err(csv_error)?;
    let x = data.covariates();
    for i in 0..data.len() {
        let mut row = vec![
            data.ids()[i].clone(),
            data.times()[i].to_string(),
            u8::from(data.events()[i]).to_string(),
            data.subgroup_labels()[data.subgroups()[i]].clone(),
        ];
        row.extend(x.row(i).iter().map(f64::to_string));
        csv.write_record(&row).map_err(csv_error)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_dataset(path: &Path, data: &SurvivalDataset) -> Result<()> {
    write_dataset_to(BufWriter::new(File::create(path)?), data)
}

/// `id,w_1..w_S`, one row per observation.
pub fn write_weights_to<W: Write>(writer: W, ids: &[String], weights: &WeightMatrix) -> Result<()> {
    if ids.len() != weights.weights.nrows() {
        return Err(Error::Dimension(format!(
            "{} ids for {} weight rows",
            ids.len(),
            weights.weights.nrows()
        )));
    }
    let mut csv = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header = vec!["id".to_string()];
    header.extend((1..=weights.weights.ncols()).map(|s| format!("w_{s}")));
    csv.write_record(&header).map_err(csv_error)?;
    for (id, row) in ids.iter().zip(weights.weights.rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(f64::to_string));
        csv.write_record(&rec).map_err(csv_error)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_weights(path: &Path, ids: &[String], weights: &WeightMatrix) -> Result<()> {
    write_weights_to(BufWriter::new(File::create(path)?), ids, weights)
}

fn optional(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

#[derive(Serialize)]
struct Software {
    name: &'static str,
    version: &'static str,
}

#[derive(Serialize)]
struct ReportFile<'a, C: Serialize> {
    software: Software,
    /// Seconds since the Unix epoch; the only field that varies between reruns.
    timestamp: u64,
    config: &'a C,
    failures: &'a [RepetitionFailure],
    report: &'a crate::pipeline::ExperimentReport,
}

/// Writes `repetitions.csv`, `mif.csv`, `mean_coefficients.csv` and
/// `report.json` into `dir`, creating it if needed.
pub fn write_report<C: Serialize>(dir: &Path, outcome: &ExperimentOutcome, config: &C) -> Result<()> {
    fs::create_dir_all(dir)?;
    let labels = &outcome.report.subgroups;
    let features = &outcome.report.features;

    let mut reps = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(File::create(dir.join("repetitions.csv"))?));
    reps.write_record([
        "repetition",
        "seed",
        "model",
        "subgroup",
        "lambda",
        "c_index",
        "selected",
    ])
    .map_err(csv_error)?;
    for r in &outcome.results {
        for f in &r.fits {
            let selected = f.coefficients.iter().filter(|b| **b != 0.0).count();
            reps.write_record([
                r.index.to_string(),
                r.seed.to_string(),
                f.model.clone(),
                labels[f.subgroup].clone(),
                f.lambda.to_string(),
                optional(f.c_index),
                selected.to_string(),
            ])
            .map_err(csv_error)?;
        }
    }
    reps.flush()?;

    for (file, pick) in [
        (
            "mif.csv",
            (|s| &s.mif) as fn(&crate::pipeline::ModelSummary) -> &Vec<f64>,
        ),
        ("mean_coefficients.csv", |s| &s.mean_coefficients),
    ] {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(BufWriter::new(File::create(dir.join(file))?));
        let value = if file == "mif.csv" { "mif" } else { "mean_coefficient" };
        out.write_record(["model", "subgroup", "feature", value])
            .map_err(csv_error)?;
        for s in &outcome.report.summaries {
            for (name, v) in features.iter().zip(pick(s)) {
                out.write_record([s.model.as_str(), &s.subgroup, name, &v.to_string()])
                    .map_err(csv_error)?;
            }
        }
        out.flush()?;
    }

    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let file = ReportFile {
        software: Software {
            name: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
        },
        timestamp,
        config,
        failures: &outcome.failures,
        report: &outcome.report,
    };
    let mut json = serde_json::to_string_pretty(&file).map_err(|e| Error::InvalidInput(e.to_string()))?;
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;
    Ok(())
}
