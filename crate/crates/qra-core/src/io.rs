//! File formats and report rendering: line-delimited JSON readers for events
//! and repository seeds, CSV writers for verdicts and comparisons, the run
//! summary, and the write-temp-then-rename discipline all outputs go through.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baseline::{ComparisonRow, Scenario, TruthLabel};
use crate::config::RunConfig;
use crate::model::{validate_event, EventError, RatingEvent, RatingScale, UserVerdict};
use crate::pipeline::{attack_type, Engine};
use crate::render::{fmt_score, fmt_threshold, fmt_trunc};
use crate::repository::Direction;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{} line {line}: {detail}", path.display())]
    Parse { path: PathBuf, line: usize, detail: String },
}

impl IoError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io { path: path.to_path_buf(), source }
    }

    fn parse(path: &Path, line: usize, detail: impl Into<String>) -> Self {
        IoError::Parse { path: path.to_path_buf(), line, detail: detail.into() }
    }
}

/// The message of an event validation error without its line prefix (the
/// surrounding parse error supplies path and line).
fn event_error_detail(error: &EventError) -> String {
    match error {
        EventError::OutOfScaleRating { rating, .. } => {
            format!("rating {rating} is not on the scale")
        }
        EventError::MissingField { field, .. } => format!("missing required field `{field}`"),
        EventError::NegativeTimestamp { ts, .. } => format!("timestamp {ts} is negative"),
    }
}

/// Lines that carry data: blank lines and `#` comments are skipped, and the
/// 1-based line number is preserved for error reporting.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Read and validate a rating stream. Events come back in file order.
pub fn read_events(path: &Path, scale: &RatingScale) -> Result<Vec<RatingEvent>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let mut events = Vec::new();
    for (line, raw) in data_lines(&text) {
        let event: RatingEvent =
            serde_json::from_str(raw).map_err(|e| IoError::parse(path, line, e.to_string()))?;
        let event = validate_event(event, scale, line)
            .map_err(|e| IoError::parse(path, line, event_error_detail(&e)))?;
        events.push(event);
    }
    Ok(events)
}

/// One manufacturer (or imported) repository document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedDoc {
    pub product_id: String,
    pub direction: Direction,
    pub text: String,
    #[serde(default)]
    pub timestamp: i64,
}

/// Read repository seed documents, same line format rules as events.
pub fn read_seeds(path: &Path) -> Result<Vec<SeedDoc>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let mut seeds = Vec::new();
    for (line, raw) in data_lines(&text) {
        let seed: SeedDoc =
            serde_json::from_str(raw).map_err(|e| IoError::parse(path, line, e.to_string()))?;
        if seed.product_id.is_empty() {
            return Err(IoError::parse(path, line, "missing required field `product_id`"));
        }
        if seed.text.trim().is_empty() {
            return Err(IoError::parse(path, line, "seed document has no text"));
        }
        seeds.push(seed);
    }
    Ok(seeds)
}

/// Write through a temp file in the target directory, then rename into
/// place, so readers never observe a half-written file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let file_name = path
        .file_name()
        .ok_or_else(|| {
            IoError::io(path, std::io::Error::new(std::io::ErrorKind::InvalidInput, "not a file path"))
        })?
        .to_string_lossy()
        .into_owned();
    let tmp = parent.join(format!(".{file_name}.tmp{}", std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        Ok(())
    };
    write().map_err(|e| IoError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        IoError::io(path, e)
    })
}

/// Render the verdict log as CSV. Thresholds print at 3 decimals, the score
/// at 2, similarity at 4; absent values print as empty fields.
pub fn verdicts_csv(verdicts: &[UserVerdict]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "uid",
            "rating",
            "up_threshold",
            "down_threshold",
            "final_rating",
            "status",
            "alarm",
            "similarity",
        ])
        .expect("writing to memory cannot fail");
    for v in verdicts {
        writer
            .write_record([
                v.user_id.clone(),
                v.rating.to_string(),
                fmt_threshold(v.upgrading_threshold),
                fmt_threshold(v.downgrading_threshold),
                v.score_after.map(fmt_score).unwrap_or_default(),
                v.status.as_str().to_string(),
                v.alarm.as_str().to_string(),
                v.similarity.map(|s| fmt_trunc(s, 4)).unwrap_or_default(),
            ])
            .expect("writing to memory cannot fail");
    }
    String::from_utf8(writer.into_inner().expect("memory writer")).expect("csv is utf-8")
}

pub fn write_verdicts_csv(path: &Path, verdicts: &[UserVerdict]) -> Result<(), IoError> {
    atomic_write(path, verdicts_csv(verdicts).as_bytes())
}

/// Render comparison rows as CSV, rates at 2 decimals.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["n_users", "qra_far", "cusum_far", "qra_detection", "cusum_detection", "seeds"])
        .expect("writing to memory cannot fail");
    for row in rows {
        writer
            .write_record([
                row.n_users.to_string(),
                fmt_trunc(row.qra_far, 2),
                fmt_trunc(row.cusum_far, 2),
                fmt_trunc(row.qra_detection, 2),
                fmt_trunc(row.cusum_detection, 2),
                row.seeds.to_string(),
            ])
            .expect("writing to memory cannot fail");
    }
    String::from_utf8(writer.into_inner().expect("memory writer")).expect("csv is utf-8")
}

pub fn write_comparison_csv(path: &Path, rows: &[ComparisonRow]) -> Result<(), IoError> {
    atomic_write(path, comparison_csv(rows).as_bytes())
}

/// Write events as line-delimited JSON, one event per line, in order.
pub fn write_events_jsonl(path: &Path, events: &[RatingEvent]) -> Result<(), IoError> {
    let mut out = String::new();
    for event in events {
        out.push_str(&serde_json::to_string(event).expect("events serialize"));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TruthRow {
    user_id: String,
    label: TruthLabel,
}

/// Write a scenario's ground truth, one user per line, sorted by user id.
pub fn write_truth_jsonl(path: &Path, scenario: &Scenario) -> Result<(), IoError> {
    let mut out = String::new();
    for (user_id, label) in &scenario.truth {
        let row = TruthRow { user_id: user_id.clone(), label: *label };
        out.push_str(&serde_json::to_string(&row).expect("truth serializes"));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())
}

/// Read a ground-truth file back into a label map. Duplicate user ids keep
/// the last row, matching the key-collision rule used everywhere else.
pub fn read_truth_jsonl(path: &Path) -> Result<BTreeMap<String, TruthLabel>, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut truth = BTreeMap::new();
    for (line, raw) in data_lines(&text) {
        let row: TruthRow = serde_json::from_str(raw).map_err(|err| IoError::Parse {
            path: path.to_path_buf(),
            line,
            detail: err.to_string(),
        })?;
        truth.insert(row.user_id, row.label);
    }
    Ok(truth)
}

/// Human-readable run summary: the echoed config, then per-product event
/// counts, flagged users, both aggregates as reports print them, and the
/// inferred attack type.
pub fn detect_summary(config: &RunConfig, engine: &Engine, total_events: usize) -> String {
    let mut out = String::new();
    out.push_str("== run summary ==\n");
    out.push_str(&format!("events = {total_events}\n"));
    if total_events == 0 {
        out.push_str("no events\n");
    }
    out.push_str("\n[config]\n");
    out.push_str(&config.echo());
    for product in engine.products() {
        out.push_str(&format!("\n[product {}]\n", product.product_id()));
        out.push_str(&format!("events = {}\n", product.event_count()));
        out.push_str(&format!("accepted = {}\n", product.detector().accepted().len()));
        let mut malicious: Vec<&str> = Vec::new();
        for verdict in product.verdicts() {
            if verdict.status == crate::model::UserStatus::MaliciousUser
                && !malicious.contains(&verdict.user_id.as_str())
            {
                malicious.push(&verdict.user_id);
            }
        }
        out.push_str(&format!("malicious_users = {}\n", malicious.join(",")));
        match (product.score_pair(), product.reported_score_pair()) {
            (Ok(_), Ok(reported)) => {
                out.push_str(&format!(
                    "score_including_all = {}\n",
                    fmt_trunc(reported.including_all, 4)
                ));
                out.push_str(&format!(
                    "score_excluding_malicious = {}\n",
                    fmt_trunc(reported.excluding_malicious, 4)
                ));
                out.push_str(&format!("score_difference = {}\n", fmt_trunc(reported.difference, 4)));
                let full = product.score_pair().expect("checked above");
                let attack = attack_type(&full, config.attack_epsilon);
                out.push_str(&format!("attack_type = {}\n", attack.kind.as_str()));
                out.push_str(&format!("attack_magnitude = {}\n", fmt_trunc(attack.magnitude, 4)));
            }
            _ => {
                out.push_str("no accepted ratings\n");
            }
        }
    }
    out
}
