//! Delimited-file ingestion.
//!
//! The file must have a header row. Columns are selected by name; the
//! delimiter is detected from the header (comma, tab or semicolon) unless
//! given explicitly. Stratum labels are arbitrary strings mapped to indices
//! in order of first appearance, or in the order of an explicit `--strata`
//! list.

use std::io::{Read, Write};
use std::path::Path;

use swlrt::{Arm, SubjectRecord};

use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct ColumnMap {
    pub time: String,
    pub event: String,
    pub arm: String,
    /// `None` treats the whole file as one stratum.
    pub stratum: Option<String>,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            time: "time".into(),
            event: "event".into(),
            arm: "arm".into(),
            stratum: None,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ReadOptions {
    pub columns: ColumnMap,
    pub delimiter: Option<u8>,
    /// Arm label coded as experimental (1); every other label becomes
    /// control. Without it the arm column must hold 0/1.
    pub experimental: Option<String>,
    /// Declared stratum labels; any other label is rejected.
    pub strata: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<SubjectRecord>,
    /// Label of each stratum index.
    pub strata: Vec<String>,
    /// Original arm label per arm index, when a label mapping was used.
    pub arm_labels: [String; 2],
}

impl Dataset {
    pub fn n_strata(&self) -> usize {
        self.strata.len()
    }
}

pub fn detect_delimiter(header: &str) -> u8 {
    let mut best = (0, b',');
    for d in *b",\t;" {
        let n = header.bytes().filter(|&b| b == d).count();
        if n > best.0 {
            best = (n, d);
        }
    }
    best.1
}

pub fn read_path(path: &Path, opts: &ReadOptions) -> Result<Dataset, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    read_str(&text, opts)
}

pub fn read_from<R: Read>(mut reader: R, opts: &ReadOptions) -> Result<Dataset, CliError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    read_str(&text, opts)
}

pub fn read_str(text: &str, opts: &ReadOptions) -> Result<Dataset, CliError> {
    let header_line = text.lines().next().unwrap_or("");
    if header_line.trim().is_empty() {
        return Err(CliError::input("input is empty (a header row is required)"));
    }
    let delimiter = opts.delimiter.unwrap_or_else(|| detect_delimiter(header_line));
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let headers = rdr.headers()?.clone();
    let column = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::input(format!(
                "line 1: missing column '{name}' (found: {})",
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })
    };
    let c = &opts.columns;
    let (time_col, event_col, arm_col) = (column(&c.time)?, column(&c.event)?, column(&c.arm)?);
    let stratum_col = c.stratum.as_deref().map(column).transpose()?;

    let mut strata: Vec<String> = opts.strata.clone().unwrap_or_default();
    let declared = opts.strata.is_some();
    let mut control_label: Option<String> = None;
    let mut records = Vec::new();

    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let err = |msg: String| CliError::input(format!("line {line}: {msg}"));
        let field = |i: usize| row.get(i).unwrap_or("");

        let time: f64 = field(time_col)
            .parse()
            .map_err(|_| err(format!("time '{}' is not a number", field(time_col))))?;
        if !time.is_finite() || time < 0.0 {
            return Err(err(format!("time must be finite and >= 0, got {time}")));
        }
        let event = match field(event_col) {
            "0" => false,
            "1" => true,
            other => return Err(err(format!("event must be 0 or 1, got '{other}'"))),
        };
        let raw_arm = field(arm_col);
        let arm = match &opts.experimental {
            Some(exp) if raw_arm == exp => Arm::Experimental,
            Some(_) => {
                match &control_label {
                    None => control_label = Some(raw_arm.to_string()),
                    Some(l) if l != raw_arm => {
                        return Err(err(format!(
                            "arm column has more than two labels ('{l}', '{raw_arm}' and the experimental label)"
                        )))
                    }
                    Some(_) => {}
                }
                Arm::Control
            }
            None => match raw_arm {
                "0" => Arm::Control,
                "1" => Arm::Experimental,
                other => {
                    return Err(err(format!(
                        "arm must be 0 or 1 (or pass --experimental LABEL), got '{other}'"
                    )))
                }
            },
        };
        let stratum = match stratum_col {
            None => {
                if strata.is_empty() {
                    strata.push("all".into());
                }
                0
            }
            Some(col) => {
                let label = field(col);
                if label.is_empty() {
                    return Err(err("empty stratum label".into()));
                }
                match strata.iter().position(|s| s == label) {
                    Some(i) => i,
                    None if declared => {
                        return Err(err(format!(
                            "unknown stratum label '{label}' (declared: {})",
                            strata.join(", ")
                        )))
                    }
                    None => {
                        strata.push(label.to_string());
                        strata.len() - 1
                    }
                }
            }
        };
        records.push(SubjectRecord::new(time, event, arm, stratum));
    }
    if records.is_empty() {
        return Err(CliError::input("input has a header but no data rows"));
    }
    let arm_labels = match &opts.experimental {
        Some(exp) => [control_label.unwrap_or_default(), exp.clone()],
        None => ["0".into(), "1".into()],
    };
    Ok(Dataset {
        records,
        strata,
        arm_labels,
    })
}

/// Writes records back as `time,event,arm,stratum` using the original arm and
/// stratum labels.
pub fn write_records<W: Write>(data: &Dataset, out: W) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time", "event", "arm", "stratum"])?;
    for r in &data.records {
        w.write_record([
            r.time.to_string(),
            u8::from(r.event).to_string(),
            data.arm_labels[r.arm.index()].clone(),
            data.strata[r.stratum].clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
