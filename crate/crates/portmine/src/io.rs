//! Readers and writers for the on-disk formats.
//!
//! Three input formats feed the pipeline:
//!
//! * `evaluations.csv` — header `task_id,config_id,fold,loss`; an empty or
//!   non-finite loss field marks a failed fold.
//! * `metafeatures.csv` — header `task_id,n_instances,n_features,n_classes,pct_numeric`.
//! * `configs.json` — array of configuration objects with opaque payloads.
//!
//! All reals are written in round-trip-exact form (shortest representation
//! that parses back to the same 64-bit value), so read∘write is the identity.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::{ConfigRecord, ConfigTable, EvaluationRecord, TaskRecord, TaskTable};

const EVALUATIONS_HEADER: [&str; 4] = ["task_id", "config_id", "fold", "loss"];
const METAFEATURES_HEADER: [&str; 5] = [
    "task_id",
    "n_instances",
    "n_features",
    "n_classes",
    "pct_numeric",
];

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile {
            path: path.display().to_string(),
        },
        _ => Error::Io(e),
    })
}

fn check_header(record: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = record.iter().collect();
    if got != expected {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("expected header {:?}, got {:?}", expected.join(","), got.join(",")),
        });
    }
    Ok(())
}

fn row_line(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_field<T: FromStr>(record: &csv::StringRecord, idx: usize, name: &str) -> Result<T> {
    let raw = record.get(idx).ok_or_else(|| Error::MalformedRow {
        line: row_line(record),
        reason: format!("missing field {name}"),
    })?;
    raw.trim().parse().map_err(|_| Error::MalformedRow {
        line: row_line(record),
        reason: format!("cannot parse {name} from {raw:?}"),
    })
}

/// Read an `evaluations.csv` file. Records keep file order; failed folds
/// (empty or non-finite loss) come back with `loss: None`.
pub fn read_evaluations(path: impl AsRef<Path>) -> Result<Vec<EvaluationRecord>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_reader(BufReader::new(open(path)?));
    check_header(reader.headers().map_err(csv_error)?, &EVALUATIONS_HEADER)?;

    let mut records = Vec::new();
    let mut seen: HashSet<(String, String, u32)> = HashSet::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        if row.len() != EVALUATIONS_HEADER.len() {
            return Err(Error::MalformedRow {
                line: row_line(&row),
                reason: format!("expected 4 fields, got {}", row.len()),
            });
        }
        let task_id: String = parse_field(&row, 0, "task_id")?;
        let config_id: String = parse_field(&row, 1, "config_id")?;
        let fold: u32 = parse_field(&row, 2, "fold")?;
        let loss_raw = row.get(3).unwrap_or("").trim();
        let loss = if loss_raw.is_empty() {
            None
        } else {
            let v: f64 = loss_raw.parse().map_err(|_| Error::MalformedRow {
                line: row_line(&row),
                reason: format!("cannot parse loss from {loss_raw:?}"),
            })?;
            v.is_finite().then_some(v)
        };
        if !seen.insert((task_id.clone(), config_id.clone(), fold)) {
            return Err(Error::DuplicateKey {
                task_id,
                config_id,
                fold,
            });
        }
        records.push(EvaluationRecord {
            task_id,
            config_id,
            fold,
            loss,
        });
    }
    Ok(records)
}

/// Write evaluation records in the `evaluations.csv` format; failed folds
/// are written with an empty loss field.
pub fn write_evaluations(path: impl AsRef<Path>, records: &[EvaluationRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path.as_ref())?));
    writer.write_record(EVALUATIONS_HEADER).map_err(csv_error)?;
    for r in records {
        let loss = r.loss.map(|v| v.to_string()).unwrap_or_default();
        writer
            .write_record([r.task_id.as_str(), r.config_id.as_str(), &r.fold.to_string(), &loss])
            .map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

/// Read a `metafeatures.csv` file into an ordered task table.
pub fn read_metafeatures(path: impl AsRef<Path>) -> Result<TaskTable> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_reader(BufReader::new(open(path)?));
    check_header(reader.headers().map_err(csv_error)?, &METAFEATURES_HEADER)?;

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(csv_error)?;
        if row.len() != METAFEATURES_HEADER.len() {
            return Err(Error::MalformedRow {
                line: row_line(&row),
                reason: format!("expected 5 fields, got {}", row.len()),
            });
        }
        records.push(TaskRecord {
            task_id: parse_field(&row, 0, "task_id")?,
            n_instances: parse_field(&row, 1, "n_instances")?,
            n_features: parse_field(&row, 2, "n_features")?,
            n_classes: parse_field(&row, 3, "n_classes")?,
            pct_numeric: parse_field(&row, 4, "pct_numeric")?,
        });
    }
    TaskTable::new(records)
}

/// Write a task table in the `metafeatures.csv` format.
pub fn write_metafeatures(path: impl AsRef<Path>, tasks: &TaskTable) -> Result<()> {
    let mut writer = csv::Writer::from_writer(BufWriter::new(File::create(path.as_ref())?));
    writer.write_record(METAFEATURES_HEADER).map_err(csv_error)?;
    for t in tasks.iter() {
        writer
            .write_record([
                t.task_id.as_str(),
                &t.n_instances.to_string(),
                &t.n_features.to_string(),
                &t.n_classes.to_string(),
                &t.pct_numeric.to_string(),
            ])
            .map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFileRecord {
    config_id: String,
    learner: String,
    payload: serde_json::Map<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source_task_id: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    is_library_default: bool,
}

/// Read a `configs.json` file into an ordered configuration table.
pub fn read_configs(path: impl AsRef<Path>) -> Result<ConfigTable> {
    let file = open(path.as_ref())?;
    let raw: Vec<ConfigFileRecord> =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::SchemaViolation {
            reason: format!("configs.json: {e}"),
        })?;
    ConfigTable::new(
        raw.into_iter()
            .map(|r| ConfigRecord {
                config_id: r.config_id,
                learner: r.learner,
                payload: r.payload,
                source_task_id: r.source_task_id,
                is_library_default: r.is_library_default,
            })
            .collect(),
    )
}

/// Write a configuration table in the `configs.json` format.
pub fn write_configs(path: impl AsRef<Path>, configs: &ConfigTable) -> Result<()> {
    let raw: Vec<ConfigFileRecord> = configs
        .iter()
        .map(|r| ConfigFileRecord {
            config_id: r.config_id.clone(),
            learner: r.learner.clone(),
            payload: r.payload.clone(),
            source_task_id: r.source_task_id.clone(),
            is_library_default: r.is_library_default,
        })
        .collect();
    let mut file = BufWriter::new(File::create(path.as_ref())?);
    serde_json::to_writer_pretty(&mut file, &raw)?;
    file.write_all(b"\n")?;
    file.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::MalformedRow {
        line,
        reason: e.to_string(),
    }
}
