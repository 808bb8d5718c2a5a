use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::Method;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Ingest,
    Compute,
    Send,
    Receive,
    Estimate,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Ingest => "ingest",
            EventKind::Compute => "compute",
            EventKind::Send => "send",
            EventKind::Receive => "receive",
            EventKind::Estimate => "estimate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time_ms: f64,
    pub agent: usize,
    pub kind: EventKind,
    pub peer: Option<usize>,
    /// Number of messages (GBP) or feature rows (GNN) carried.
    pub payload: usize,
}

/// Timing outcome of one simulated frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub tau: usize,
    pub method: Method,
    pub iterations: usize,
    /// Neighborhood gather rounds before GNN inference; 0 for GBP.
    pub gather_rounds: usize,
    pub ingest_ms: f64,
    /// Time from the frame instant until every agent holds its estimate.
    pub completion_ms: f64,
    pub deadline_met: bool,
    pub normalized_wrss: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompletionReport {
    pub records: Vec<CompletionRecord>,
    /// Event log; times count from the frame instant of τ = 1.
    pub events: Vec<Event>,
}

impl CompletionReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends one frame, shifting its events by `(τ - 1)` report periods.
    pub fn push(&mut self, record: CompletionRecord, mut events: Vec<Event>, period_ms: f64) {
        let offset = (record.tau - 1) as f64 * period_ms;
        for e in &mut events {
            e.time_ms += offset;
        }
        self.records.push(record);
        self.events.extend(events);
    }

    pub fn events_csv(&self) -> String {
        let mut out = String::from("time_ms,agent,event_kind,peer,payload_size_messages\n");
        for e in &self.events {
            let peer = e.peer.map(|p| p.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{}", e.time_ms, e.agent, e.kind.as_str(), peer, e.payload);
        }
        out
    }

    pub fn records_csv(&self) -> String {
        let mut out = String::from("tau,method,iterations,gather_rounds,ingest_ms,completion_ms,deadline_met,normalized_wrss\n");
        for r in &self.records {
            let ratio = r.normalized_wrss.map(|v| format!("{v:e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.tau, r.method, r.iterations, r.gather_rounds, r.ingest_ms, r.completion_ms, r.deadline_met, ratio
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeadlineSummary {
    pub period_ms: f64,
    /// `(τ, method, met)` per record.
    pub flags: Vec<(usize, Method, bool)>,
    pub met: usize,
    pub fraction_met: f64,
}

/// Flags every frame whose estimate is ready before the next report arrives.
pub fn check_deadline(report: &CompletionReport, period_ms: f64) -> Result<DeadlineSummary> {
    if !(period_ms > 0.0) {
        return Err(Error::Config(format!("deadline period must be positive, got {period_ms}")));
    }
    let flags: Vec<_> = report
        .records
        .iter()
        .map(|r| (r.tau, r.method, r.completion_ms <= period_ms))
        .collect();
    let met = flags.iter().filter(|f| f.2).count();
    let fraction_met = if flags.is_empty() { 0.0 } else { met as f64 / flags.len() as f64 };
    Ok(DeadlineSummary {
        period_ms,
        flags,
        met,
        fraction_met,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(tau: usize, completion_ms: f64) -> CompletionRecord {
        CompletionRecord {
            tau,
            method: Method::Gbp,
            iterations: 10,
            gather_rounds: 0,
            ingest_ms: 3.5,
            completion_ms,
            deadline_met: false,
            normalized_wrss: None,
        }
    }

    #[test]
    fn deadline_comparisons() {
        let mut report = CompletionReport::new();
        report.push(record(1, 9.9), vec![], 10.0);
        report.push(record(2, 20.01), vec![], 10.0);
        let at10 = check_deadline(&report, 10.0).unwrap();
        assert_eq!(at10.flags, vec![(1, Method::Gbp, true), (2, Method::Gbp, false)]);
        assert_eq!(at10.fraction_met, 0.5);
        let at20 = check_deadline(&report, 20.0).unwrap();
        assert!(!at20.flags[1].2);
        assert!(check_deadline(&report, 0.0).is_err());
    }

    #[test]
    fn event_times_are_shifted_per_frame() {
        let mut report = CompletionReport::new();
        let ev = Event {
            time_ms: 1.5,
            agent: 2,
            kind: EventKind::Send,
            peer: Some(0),
            payload: 12,
        };
        report.push(record(3, 5.0), vec![ev], 20.0);
        assert_eq!(report.events[0].time_ms, 41.5);
        assert_eq!(report.events_csv().lines().nth(1), Some("41.5,2,send,0,12"));
    }
}
