use std::path::Path;

use crate::em::FitNotes;
use crate::error::{Error, Result};
use crate::io::events::{default_horizon, LabeledRecord};
use crate::io::read_to_string;
use crate::model::{Event, EventRecord};

/// Count step that triggers one event.
pub const DEFAULT_THRESHOLD: u64 = 10;

/// Cumulative daily tallies of one location.
#[derive(Debug, Clone, PartialEq)]
pub struct CountSeries {
    pub location: String,
    /// `(day, cumulative count)` pairs in increasing day order.
    pub points: Vec<(f64, u64)>,
}

/// Reads a `location,day,cumulative` CSV. Locations keep their order of first
/// appearance; rows of a location are sorted by day.
pub fn load_counts_csv(path: &Path) -> Result<Vec<CountSeries>> {
    let text = read_to_string(path)?;
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if headers.len() != 3 || &headers[0] != "location" || &headers[1] != "day" || &headers[2] != "cumulative" {
        return Err(parse_err(1, "expected header `location,day,cumulative`".into()));
    }
    let mut series: Vec<CountSeries> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        let day: f64 = row[1]
            .parse()
            .ok()
            .filter(|d: &f64| d.is_finite())
            .ok_or_else(|| parse_err(line, format!("cannot parse day `{}`", &row[1])))?;
        let count: u64 = row[2]
            .parse()
            .map_err(|_| parse_err(line, format!("cannot parse count `{}`", &row[2])))?;
        match series.iter_mut().find(|s| s.location == row[0]) {
            Some(s) => s.points.push((day, count)),
            None => series.push(CountSeries {
                location: row[0].to_string(),
                points: vec![(day, count)],
            }),
        }
    }
    for s in &mut series {
        s.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok(series)
}

/// Crossing times of the levels `threshold, 2 threshold, ...` by one series,
/// interpolating log counts linearly between days (counts linearly while the
/// earlier tally is zero).
fn crossings(series: &CountSeries, threshold: u64, notes: &mut FitNotes) -> Result<Vec<f64>> {
    let pts = &series.points;
    for w in pts.windows(2) {
        if w[1].0 == w[0].0 {
            return Err(Error::Parse {
                path: series.location.clone().into(),
                line: 0,
                message: format!("day {} listed twice", w[1].0),
            });
        }
        if w[1].1 < w[0].1 {
            return Err(Error::NonMonotone {
                location: series.location.clone(),
                day: w[1].0,
            });
        }
    }
    let mut times = Vec::new();
    let Some(&(first_day, first_count)) = pts.first() else {
        return Ok(times);
    };
    if first_count >= threshold {
        notes.warn(format!(
            "location `{}` starts above the threshold; earlier crossings placed at day {first_day}",
            series.location
        ));
        times.extend(std::iter::repeat_n(first_day, (first_count / threshold) as usize));
    }
    for w in pts.windows(2) {
        let ((d0, c0), (d1, c1)) = (w[0], w[1]);
        let mut level = (c0 / threshold + 1) * threshold;
        while level <= c1 {
            let t = if level == c1 {
                d1
            } else if c0 == 0 {
                d0 + (level - c0) as f64 / (c1 - c0) as f64 * (d1 - d0)
            } else {
                let (l0, l1) = ((c0 as f64).ln(), (c1 as f64).ln());
                d0 + ((level as f64).ln() - l0) / (l1 - l0) * (d1 - d0)
            };
            times.push(t);
            level += threshold;
        }
    }
    if times.is_empty() {
        notes.warn(format!("location `{}` never reaches the threshold", series.location));
    }
    Ok(times)
}

/// Turns cumulative counts into an event record with one event each time a
/// location's count passes another multiple of `threshold`; the event type is
/// the location.
pub fn discretize_counts(series: &[CountSeries], threshold: u64, notes: &mut FitNotes) -> Result<LabeledRecord> {
    if threshold == 0 {
        return Err(Error::domain("threshold must be at least 1"));
    }
    let mut events = Vec::new();
    let mut last_day: f64 = 0.0;
    for (kind, s) in series.iter().enumerate() {
        for time in crossings(s, threshold, notes)? {
            if time < 0.0 {
                return Err(Error::domain(format!("location `{}` has negative days", s.location)));
            }
            events.push(Event { kind, time });
        }
        if let Some(&(d, _)) = s.points.last() {
            last_day = last_day.max(d);
        }
    }
    let last_event = events.iter().map(|e| e.time).fold(0.0, f64::max);
    let horizon = if last_day > last_event {
        last_day
    } else {
        default_horizon(last_event)
    };
    Ok(LabeledRecord {
        record: EventRecord::new(events, series.len(), horizon)?,
        labels: series.iter().map(|s| s.location.clone()).collect(),
    })
}
