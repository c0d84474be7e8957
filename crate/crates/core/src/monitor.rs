//! Conflict resolution across models, consistency-score tracking, and the
//! initial/stable monitoring state machine with anomaly flagging.
//!
//! The consistency score follows a sigmoid update: a positive verdict applies
//! rate `lambda_r > 0`, a negative one `lambda_f < 0`, through
//! `S' = S e^L / (1 + S (e^L - 1))`, clamped to [0.01, 0.99]. Composing n
//! updates with a constant rate equals one update with rate n*L
//! (logit-additivity), which makes rise/fall times exact.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ingest::Dataset;
use crate::oneclass::{DeviceModel, ModelVerdict};
use crate::{Error, Mac, Result};

pub const SCORE_CAP_LOW: f64 = 0.01;
pub const SCORE_CAP_HIGH: f64 = 0.99;
pub const SCORE_INITIAL: f64 = 0.01;

/// Derives a per-minute rate from a policy: the time `minutes` to move from
/// the mid-level score 0.50 to the target score. Targets of 0, 0.5, or 1 are
/// rejected (zero or unbounded rate).
pub fn lambda_from_policy(target: f64, minutes: f64) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) || target == 0.5 {
        return Err(Error::invalid(format!(
            "target score must be in (0,1) and != 0.5, got {target}"
        )));
    }
    if minutes <= 0.0 {
        return Err(Error::invalid(format!("policy time must be > 0, got {minutes}")));
    }
    Ok((target / (1.0 - target)).ln() / minutes)
}

/// One model's consistency score with its rise/fall rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreTracker {
    pub score: f64,
    pub lambda_rise: f64,
    pub lambda_fall: f64,
}

impl ScoreTracker {
    pub fn new(lambda_rise: f64, lambda_fall: f64) -> Result<ScoreTracker> {
        if lambda_rise <= 0.0 || lambda_fall >= 0.0 {
            return Err(Error::invalid(format!(
                "need lambda_rise > 0 and lambda_fall < 0, got {lambda_rise}/{lambda_fall}"
            )));
        }
        Ok(ScoreTracker {
            score: SCORE_INITIAL,
            lambda_rise,
            lambda_fall,
        })
    }

    /// Applies one sigmoid update and clamps to the caps.
    pub fn update(&mut self, positive: bool) -> f64 {
        let lambda = if positive {
            self.lambda_rise
        } else {
            self.lambda_fall
        };
        let e = lambda.exp();
        let s = self.score;
        self.score = (s * e / (1.0 + s * (e - 1.0))).clamp(SCORE_CAP_LOW, SCORE_CAP_HIGH);
        self.score
    }
}

/// Picks the winner among per-class verdicts: positive, confidence at or
/// above the floor, highest confidence; ties break lexicographically by
/// class name. `None` means no model claims the instance.
pub fn resolve_conflict(
    verdicts: &BTreeMap<String, ModelVerdict>,
    confidence_floor: f64,
) -> Option<&str> {
    let mut winner: Option<(&str, f64)> = None;
    for (class, v) in verdicts {
        if !v.positive || v.confidence < confidence_floor {
            continue;
        }
        // strict comparison keeps the lexicographically first class on ties
        if winner.map_or(true, |(_, c)| v.confidence > c) {
            winner = Some((class.as_str(), v.confidence));
        }
    }
    winner.map(|(class, _)| class)
}

/// Monitoring policy knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorPolicy {
    pub lambda_rise: f64,
    pub lambda_fall: f64,
    /// Score at which the initial phase accepts an identity.
    pub accept_threshold: f64,
    /// Minimum confidence for a positive verdict to count in resolution.
    pub confidence_floor: f64,
    /// Stable-phase score below which an anomaly is raised.
    pub alarm_level: f64,
}

impl Default for MonitorPolicy {
    fn default() -> Self {
        MonitorPolicy {
            // 12 h from 0.50 to 0.99 on successive positives,
            // 1.5 h from 0.50 down to 0.01 on successive negatives
            lambda_rise: lambda_from_policy(0.99, 720.0).unwrap(),
            lambda_fall: lambda_from_policy(0.01, 90.0).unwrap(),
            accept_threshold: 0.90,
            confidence_floor: 0.025,
            alarm_level: 0.50,
        }
    }
}

/// Which phase a monitored device is in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DevicePhase {
    /// All models consulted; per-model trackers racing to the threshold.
    Initial,
    /// Identity accepted; only the intended model is consulted.
    Stable { intended_model: String },
}

/// Anomaly raised when a stable device's score crosses below the alarm level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyEvent {
    pub minute: i64,
    pub device: Mac,
    pub intended_model: String,
    pub score: f64,
}

/// One monitoring-log row, as written to `.monitor.tsv`.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorRow {
    pub minute: i64,
    pub device: Mac,
    pub phase: &'static str,
    pub winner: Option<String>,
    pub confidence: f64,
    pub score: f64,
    pub alarm: bool,
}

/// Per-device monitoring state machine.
#[derive(Debug, Clone)]
pub struct DeviceMonitor {
    device: Mac,
    policy: MonitorPolicy,
    phase: DevicePhase,
    trackers: BTreeMap<String, ScoreTracker>,
}

impl DeviceMonitor {
    pub fn new(device: Mac, classes: impl IntoIterator<Item = String>, policy: MonitorPolicy) -> Result<DeviceMonitor> {
        let tracker = ScoreTracker::new(policy.lambda_rise, policy.lambda_fall)?;
        let trackers: BTreeMap<String, ScoreTracker> =
            classes.into_iter().map(|c| (c, tracker)).collect();
        if trackers.is_empty() {
            return Err(Error::invalid("model registry is empty"));
        }
        Ok(DeviceMonitor {
            device,
            policy,
            phase: DevicePhase::Initial,
            trackers,
        })
    }

    pub fn phase(&self) -> &DevicePhase {
        &self.phase
    }

    pub fn score(&self, class: &str) -> Option<f64> {
        self.trackers.get(class).map(|t| t.score)
    }

    /// Feeds one instance through the phase machine.
    ///
    /// INITIAL: every model is consulted, the conflict winner's tracker gets
    /// a positive update and every other tracker a negative one (so stale
    /// candidates decay). When a tracker reaches the accept threshold the
    /// device transitions to STABLE with that class.
    ///
    /// STABLE: only the intended model runs; its verdict drives the tracker;
    /// crossing below the alarm level emits an [`AnomalyEvent`].
    pub fn step(
        &mut self,
        minute: i64,
        models: &BTreeMap<String, DeviceModel>,
        attributes: &[String],
        raw: &[f64],
    ) -> Result<(MonitorRow, Option<AnomalyEvent>)> {
        match self.phase.clone() {
            DevicePhase::Initial => {
                let mut verdicts = BTreeMap::new();
                for (class, model) in models {
                    verdicts.insert(class.clone(), model.test_instance(attributes, raw)?);
                }
                let winner = resolve_conflict(&verdicts, self.policy.confidence_floor)
                    .map(str::to_string);
                for (class, tracker) in self.trackers.iter_mut() {
                    tracker.update(winner.as_deref() == Some(class));
                }
                let (score, confidence) = match &winner {
                    Some(class) => (
                        self.trackers[class].score,
                        verdicts[class].confidence,
                    ),
                    None => (
                        self.trackers
                            .values()
                            .map(|t| t.score)
                            .fold(f64::NEG_INFINITY, f64::max),
                        0.0,
                    ),
                };
                if let Some((class, _)) = self
                    .trackers
                    .iter()
                    .find(|(_, t)| t.score >= self.policy.accept_threshold)
                {
                    self.phase = DevicePhase::Stable {
                        intended_model: class.clone(),
                    };
                }
                Ok((
                    MonitorRow {
                        minute,
                        device: self.device,
                        phase: "initial",
                        winner,
                        confidence,
                        score,
                        alarm: false,
                    },
                    None,
                ))
            }
            DevicePhase::Stable { intended_model } => {
                let model = models.get(&intended_model).ok_or_else(|| {
                    Error::invalid(format!("intended model {intended_model} missing from registry"))
                })?;
                let verdict = model.test_instance(attributes, raw)?;
                let tracker = self
                    .trackers
                    .get_mut(&intended_model)
                    .expect("tracker exists for every class");
                let before = tracker.score;
                let score = tracker.update(verdict.positive);
                let alarm = before >= self.policy.alarm_level && score < self.policy.alarm_level;
                let event = alarm.then(|| AnomalyEvent {
                    minute,
                    device: self.device,
                    intended_model: intended_model.clone(),
                    score,
                });
                Ok((
                    MonitorRow {
                        minute,
                        device: self.device,
                        phase: "stable",
                        winner: verdict.positive.then(|| intended_model.clone()),
                        confidence: verdict.confidence,
                        score,
                        alarm,
                    },
                    event,
                ))
            }
        }
    }
}

/// Runs the full monitoring loop over a dataset: one state machine per
/// device, instances fed in window order. Rows come back in replay order.
pub fn run_monitor(
    dataset: &Dataset,
    models: &BTreeMap<String, DeviceModel>,
    policy: MonitorPolicy,
) -> Result<(Vec<MonitorRow>, Vec<AnomalyEvent>)> {
    let mut monitors: BTreeMap<Mac, DeviceMonitor> = BTreeMap::new();
    let mut order: Vec<usize> = (0..dataset.rows.len()).collect();
    order.sort_by(|&a, &b| {
        dataset.rows[a]
            .window_start
            .total_cmp(&dataset.rows[b].window_start)
            .then_with(|| dataset.rows[a].device.cmp(&dataset.rows[b].device))
    });
    let mut rows = Vec::with_capacity(dataset.rows.len());
    let mut events = Vec::new();
    for idx in order {
        let row = &dataset.rows[idx];
        let monitor = match monitors.get_mut(&row.device) {
            Some(m) => m,
            None => monitors.entry(row.device).or_insert(DeviceMonitor::new(
                row.device,
                models.keys().cloned(),
                policy,
            )?),
        };
        let minute = (row.window_start / 60.0).floor() as i64;
        let (log_row, event) = monitor.step(minute, models, &dataset.attributes, &row.values)?;
        rows.push(log_row);
        events.extend(event);
    }
    Ok((rows, events))
}

/// Writes the monitoring log as `.monitor.tsv`:
/// `minute device phase winner confidence score alarm`.
pub fn write_monitor_log(rows: &[MonitorRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "minute\tdevice\tphase\twinner\tconfidence\tscore\talarm")
        .map_err(|e| Error::io(path, e))?;
    for r in rows {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.minute,
            r.device,
            r.phase,
            r.winner.as_deref().unwrap_or("-"),
            r.confidence,
            r.score,
            if r.alarm { 1 } else { 0 }
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
