use crate::error::{Error, Result};

/// One marked occurrence: an event of type `kind` at time `time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub kind: usize,
    pub time: f64,
}

/// A half-open observation window `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || start < 0.0 || start > end {
            return Err(Error::domain(format!("invalid window [{start}, {end})")));
        }
        Ok(Window { start, end })
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start && t < self.end
    }

    pub fn width(&self) -> f64 {
        self.end - self.start
    }
}

/// Time-ordered record of marked events on `[0, horizon)` with `n_types`
/// declared types.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    events: Vec<Event>,
    n_types: usize,
    horizon: f64,
}

impl EventRecord {
    /// Builds a record, sorting events stably by time so that simultaneous
    /// events keep their input order.
    pub fn new(mut events: Vec<Event>, n_types: usize, horizon: f64) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
        }
        for (idx, e) in events.iter().enumerate() {
            if e.kind >= n_types {
                return Err(Error::domain(format!(
                    "event {idx} has type {} but only {n_types} types are declared",
                    e.kind
                )));
            }
            if !e.time.is_finite() || e.time < 0.0 {
                return Err(Error::domain(format!("event {idx} has invalid time {}", e.time)));
            }
            if e.time >= horizon {
                return Err(Error::domain(format!(
                    "event {idx} at t = {} is not before the horizon {horizon}",
                    e.time
                )));
            }
        }
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(EventRecord {
            events,
            n_types,
            horizon,
        })
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn n_types(&self) -> usize {
        self.n_types
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn full_window(&self) -> Window {
        Window {
            start: 0.0,
            end: self.horizon,
        }
    }

    /// Number of occurrences of each type.
    pub fn type_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_types];
        for e in &self.events {
            counts[e.kind] += 1;
        }
        counts
    }

    /// Events strictly before `end`, re-horizoned at `end`.
    pub fn truncated(&self, end: f64) -> Result<EventRecord> {
        let events = self.events.iter().copied().take_while(|e| e.time < end).collect();
        EventRecord::new(events, self.n_types, end)
    }

    /// Index range of the events falling inside `window`.
    pub fn window_range(&self, window: Window) -> std::ops::Range<usize> {
        let lo = self.events.partition_point(|e| e.time < window.start);
        let hi = self.events.partition_point(|e| e.time < window.end);
        lo..hi.max(lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(kind: usize, time: f64) -> Event {
        Event { kind, time }
    }

    #[test]
    fn sorts_stably_by_time() {
        let rec = EventRecord::new(vec![ev(1, 2.0), ev(0, 1.0), ev(2, 1.0)], 3, 5.0).unwrap();
        let kinds: Vec<_> = rec.events().iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![0, 2, 1]);
    }

    #[test]
    fn rejects_events_at_or_after_horizon() {
        assert!(EventRecord::new(vec![ev(0, 5.0)], 1, 5.0).is_err());
        assert!(EventRecord::new(vec![ev(1, 1.0)], 1, 5.0).is_err());
        assert!(EventRecord::new(vec![ev(0, -1.0)], 1, 5.0).is_err());
    }

    #[test]
    fn window_range_is_half_open() {
        let rec = EventRecord::new(vec![ev(0, 1.0), ev(0, 2.0), ev(0, 3.0)], 1, 4.0).unwrap();
        assert_eq!(rec.window_range(Window::new(1.0, 3.0).unwrap()), 0..2);
        assert_eq!(rec.window_range(Window::new(2.5, 2.5).unwrap()), 2..2);
    }

    #[test]
    fn empty_record_is_allowed() {
        let rec = EventRecord::new(vec![], 0, 1.0).unwrap();
        assert!(rec.is_empty());
        assert_eq!(rec.type_counts(), Vec::<usize>::new());
    }
}
