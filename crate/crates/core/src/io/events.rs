use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::{read_to_string, write_atomic};
use crate::model::{Event, EventRecord};

/// An event record together with the label of every type id.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecord {
    pub record: EventRecord,
    pub labels: Vec<String>,
}

/// Horizon placed just past the last event, so that it lies inside `[0, T)`.
pub fn default_horizon(last_time: f64) -> f64 {
    if last_time > 0.0 {
        let t = last_time * (1.0 + 1e-9);
        if t > last_time {
            t
        } else {
            last_time + f64::EPSILON * last_time.max(1.0)
        }
    } else {
        1.0
    }
}

/// Reads a `type,time` CSV. Type labels map to ids in order of first
/// appearance. Two optional comment lines are honoured: `# horizon=T` and
/// `# types=["a","b"]` (fixing the id order and declaring types without events).
pub fn load_events_csv(path: &Path, horizon: Option<f64>) -> Result<LabeledRecord> {
    let text = read_to_string(path)?;
    parse_events_csv(&text, path, horizon)
}

pub fn parse_events_csv(text: &str, path: &Path, horizon: Option<f64>) -> Result<LabeledRecord> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut declared_horizon = None;
    let mut labels: Vec<String> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let Some(directive) = line.trim().strip_prefix('#') else {
            continue;
        };
        let directive = directive.trim();
        if let Some(v) = directive.strip_prefix("horizon=") {
            let t: f64 = v
                .trim()
                .parse()
                .map_err(|_| parse_err(i as u64 + 1, format!("bad horizon `{v}`")))?;
            declared_horizon = Some(t);
        } else if let Some(v) = directive.strip_prefix("types=") {
            labels =
                serde_json::from_str(v.trim()).map_err(|e| parse_err(i as u64 + 1, format!("bad type list: {e}")))?;
        }
    }
    let mut ids: HashMap<String, usize> = labels.iter().cloned().enumerate().map(|(i, l)| (l, i)).collect();
    if ids.len() != labels.len() {
        return Err(parse_err(1, "duplicate label in type list".into()));
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let mut events = Vec::new();
    if !text
        .trim()
        .lines()
        .all(|l| l.trim().is_empty() || l.trim().starts_with('#'))
    {
        let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        if headers.len() != 2 || &headers[0] != "type" || &headers[1] != "time" {
            return Err(parse_err(1, "expected header `type,time`".into()));
        }
    }
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let label = &row[0];
        let time: f64 = row[1]
            .parse()
            .map_err(|_| parse_err(line, format!("cannot parse time `{}`", &row[1])))?;
        if !time.is_finite() || time < 0.0 {
            return Err(parse_err(
                line,
                format!("time must be finite and nonnegative, got {time}"),
            ));
        }
        let kind = match ids.get(label) {
            Some(&k) => k,
            None => {
                labels.push(label.to_string());
                ids.insert(label.to_string(), labels.len() - 1);
                labels.len() - 1
            }
        };
        events.push(Event { kind, time });
    }
    let last = events.iter().map(|e| e.time).fold(0.0, f64::max);
    let horizon = horizon.or(declared_horizon).unwrap_or_else(|| default_horizon(last));
    let record = EventRecord::new(events, labels.len(), horizon)?;
    Ok(LabeledRecord { record, labels })
}

/// Writes a record in the format read by [`load_events_csv`], including the
/// horizon and type list, so that reading it back reproduces it exactly.
pub fn write_events_csv(path: &Path, data: &LabeledRecord) -> Result<()> {
    write_atomic(path, format_events_csv(data)?.as_bytes())
}

fn format_events_csv(data: &LabeledRecord) -> Result<String> {
    if data.labels.len() != data.record.n_types() {
        return Err(Error::Shape("label count differs from declared types".into()));
    }
    let mut out = format!(
        "# horizon={}\n# types={}\n",
        data.record.horizon(),
        serde_json::to_string(&data.labels).map_err(|e| Error::Schema(e.to_string()))?
    );
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["type", "time"])
        .map_err(|e| Error::Schema(e.to_string()))?;
    for e in data.record.events() {
        writer
            .write_record([data.labels[e.kind].as_str(), &e.time.to_string()])
            .map_err(|e| Error::Schema(e.to_string()))?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Schema(e.to_string()))?;
    out.push_str(std::str::from_utf8(&bytes).expect("csv output is utf-8"));
    Ok(out)
}
