//! Communication layer: measure-point readings in, evidence snapshots out.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::kb::{KnowledgeBase, StateId, StateLiteral, VarId, Variable};

pub type Tick = i64;

#[derive(Debug, Clone, PartialEq)]
pub struct Reading {
    pub tick: Tick,
    pub measure_point: String,
    pub value: f64,
}

impl Reading {
    pub fn new(tick: Tick, measure_point: impl Into<String>, value: f64) -> Self {
        Self { tick, measure_point: measure_point.into(), value }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("{measure_point}: value {value} lies outside every state interval of variable {var}")]
    OutOfRange { var: VarId, measure_point: String, value: f64 },
    #[error("variable {0} has no state intervals")]
    NoIntervals(VarId),
    #[error("unknown measure point {0:?}")]
    UnknownMeasurePoint(String),
    #[error("readings for ticks {0} and {1} submitted as one tick")]
    MixedTicks(Tick, Tick),
    #[error("tick {got} arrived after tick {after}")]
    NonMonotonicTick { after: Tick, got: Tick },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed signal record (column {column}): {message}")]
pub struct SignalParseError {
    /// 1-based column of the offending field.
    pub column: usize,
    pub message: String,
}

/// Observed state of every mapped variable at one tick, split into abnormal
/// (`E′`) and normal (`E″`) parts.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EvidenceSnapshot {
    pub tick: Tick,
    pub assignments: BTreeMap<VarId, StateId>,
    pub abnormal: BTreeSet<VarId>,
    pub normal: BTreeSet<VarId>,
}

impl EvidenceSnapshot {
    pub fn empty(tick: Tick) -> Self {
        Self { tick, ..Self::default() }
    }

    /// Builds a snapshot from explicit assignments, classifying each by the
    /// severity of its state.
    pub fn from_assignments(
        tick: Tick,
        kb: &KnowledgeBase,
        assignments: impl IntoIterator<Item = (VarId, StateId)>,
    ) -> Self {
        let mut snap = Self::empty(tick);
        for (var, state) in assignments {
            snap.assign(kb, var, state);
        }
        snap
    }

    fn assign(&mut self, kb: &KnowledgeBase, var: VarId, state: StateId) {
        self.assignments.insert(var, state);
        let abnormal = kb.variable(var).is_some_and(|v| v.is_abnormal(state));
        if abnormal {
            self.normal.remove(&var);
            self.abnormal.insert(var);
        } else {
            self.abnormal.remove(&var);
            self.normal.insert(var);
        }
    }

    pub fn state_of(&self, var: VarId) -> Option<StateId> {
        self.assignments.get(&var).copied()
    }

    pub fn has_abnormal(&self) -> bool {
        !self.abnormal.is_empty()
    }

    pub fn abnormal_literals(&self) -> Vec<StateLiteral> {
        self.abnormal
            .iter()
            .map(|v| StateLiteral::new(*v, self.assignments[v]))
            .collect()
    }

    pub fn normal_literals(&self) -> Vec<StateLiteral> {
        self.normal
            .iter()
            .map(|v| StateLiteral::new(*v, self.assignments[v]))
            .collect()
    }

    fn abnormal_assignment(&self) -> BTreeMap<VarId, StateId> {
        self.abnormal.iter().map(|v| (*v, self.assignments[v])).collect()
    }
}

/// Evidence literal as it appears in reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EvidenceLiteral {
    pub var: u32,
    pub state: StateId,
}

impl From<StateLiteral> for EvidenceLiteral {
    fn from(l: StateLiteral) -> Self {
        Self { var: l.var.0, state: l.state }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GatewayConfig {
    /// Re-run inference when an abnormal variable returns to normal.
    pub trigger_on_recovery: bool,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self { trigger_on_recovery: true }
    }
}

/// Maps a raw value to the state whose `(lower, upper]` interval contains it.
pub fn map_reading(var: &Variable, value: f64) -> Result<StateId, GatewayError> {
    if !var.has_intervals() {
        return Err(GatewayError::NoIntervals(var.id));
    }
    var.states
        .iter()
        .find(|s| s.interval.is_some_and(|i| i.contains(value)))
        .map(|s| s.id)
        .ok_or_else(|| GatewayError::OutOfRange {
            var: var.id,
            measure_point: var.measure_point.clone().unwrap_or_default(),
            value,
        })
}

/// Folds one tick of readings into the previous snapshot.
///
/// Unread variables keep their previous state; within the tick the last
/// reading per channel wins. The trigger fires when the abnormal assignment
/// changed: a new abnormal variable, a changed abnormal state, or (when
/// configured) a recovery to normal.
pub fn ingest_tick(
    prev: Option<&EvidenceSnapshot>,
    readings: &[Reading],
    kb: &KnowledgeBase,
    config: GatewayConfig,
) -> Result<(EvidenceSnapshot, bool), GatewayError> {
    let tick = match readings.first() {
        Some(r) => r.tick,
        None => prev.map_or(0, |p| p.tick),
    };
    if let Some(other) = readings.iter().find(|r| r.tick != tick) {
        return Err(GatewayError::MixedTicks(tick, other.tick));
    }
    if let Some(p) = prev {
        if tick < p.tick {
            return Err(GatewayError::NonMonotonicTick { after: p.tick, got: tick });
        }
    }

    let mut snap = prev.cloned().unwrap_or_default();
    snap.tick = tick;
    for r in readings {
        let var = kb
            .by_measure_point(&r.measure_point)
            .ok_or_else(|| GatewayError::UnknownMeasurePoint(r.measure_point.clone()))?;
        let state = map_reading(var, r.value)?;
        snap.assign(kb, var.id, state);
    }

    let before = prev.map(EvidenceSnapshot::abnormal_assignment).unwrap_or_default();
    let after = snap.abnormal_assignment();
    let escalated = after.iter().any(|(v, s)| before.get(v) != Some(s));
    let recovered = before.keys().any(|v| !after.contains_key(v));
    let trigger = escalated || (config.trigger_on_recovery && recovered);
    Ok((snap, trigger))
}

/// Parses `tick,measure_point,value`.
pub fn parse_signal_record(line: &str) -> Result<Reading, SignalParseError> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    let err = |column, message: String| SignalParseError { column, message };
    if fields.len() != 3 {
        return Err(err(
            fields.len().min(3) + 1,
            format!("expected 3 fields, found {}", fields.len()),
        ));
    }
    let tick = fields[0]
        .parse::<Tick>()
        .map_err(|e| err(1, format!("tick {:?}: {e}", fields[0])))?;
    if fields[1].is_empty() {
        return Err(err(2, "empty measure point".into()));
    }
    let value = fields[2]
        .parse::<f64>()
        .map_err(|e| err(3, format!("value {:?}: {e}", fields[2])))?;
    if !value.is_finite() {
        return Err(err(3, format!("value {:?} is not finite", fields[2])));
    }
    Ok(Reading::new(tick, fields[1], value))
}

/// What a raw input line turned out to be.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalLine {
    Blank,
    Header,
    Record(Reading),
}

/// Classifies a line of the signal stream: blank lines, `#` comments and the
/// optional header are skipped.
pub fn classify_signal_line(line: &str) -> Result<SignalLine, SignalParseError> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(SignalLine::Blank);
    }
    let normalized: Vec<&str> = trimmed.split(',').map(str::trim).collect();
    if normalized == ["tick", "measure_point", "value"] {
        return Ok(SignalLine::Header);
    }
    parse_signal_record(trimmed).map(SignalLine::Record)
}

/// Groups a tick-ordered reading sequence into per-tick batches.
#[derive(Debug, Default)]
pub struct TickBatcher {
    current: Vec<Reading>,
}

impl TickBatcher {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a reading; returns the previous tick's batch once a later tick
    /// starts.
    pub fn push(&mut self, reading: Reading) -> Result<Option<Vec<Reading>>, GatewayError> {
        match self.current.last() {
            Some(last) if reading.tick < last.tick => Err(GatewayError::NonMonotonicTick {
                after: last.tick,
                got: reading.tick,
            }),
            Some(last) if reading.tick > last.tick => {
                let done = std::mem::replace(&mut self.current, vec![reading]);
                Ok(Some(done))
            }
            _ => {
                self.current.push(reading);
                Ok(None)
            }
        }
    }

    pub fn finish(self) -> Option<Vec<Reading>> {
        (!self.current.is_empty()).then_some(self.current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{StateDef, VarKind};

    fn cex202mp() -> Variable {
        Variable::new(
            185,
            VarKind::X,
            "CEX202MP",
            vec![
                StateDef::new(0, "Normal").with_interval(2.25, 2.4),
                StateDef::new(1, "Low").with_interval(-1.0, 2.25),
                StateDef::new(2, "High").with_interval(2.4, 10.0),
            ],
        )
        .with_measure_point("CEX202MP")
    }

    fn kb() -> KnowledgeBase {
        let b = Variable::new(1, VarKind::B, "pump", vec![StateDef::new(0, "ok"), StateDef::new(1, "closed")])
            .with_prior([(1, 0.1)]);
        let abp = Variable::new(
            71,
            VarKind::X,
            "ABP004MP",
            vec![
                StateDef::new(0, "Normal").with_interval(1.9, 2.6),
                StateDef::new(1, "High").with_interval(2.6, 10.0),
                StateDef::new(2, "Low").with_interval(-1.0, 1.9),
            ],
        )
        .with_measure_point("ABP004MP");
        KnowledgeBase::new(vec![b, abp, cex202mp()], vec![], vec![]).unwrap()
    }

    #[test]
    fn maps_by_upper_inclusive_interval() {
        let v = cex202mp();
        assert_eq!(map_reading(&v, 2.5), Ok(2));
        assert_eq!(map_reading(&v, 2.3), Ok(0));
        assert_eq!(map_reading(&v, 2.4), Ok(0));
        assert_eq!(map_reading(&v, 2.25), Ok(1));
        assert_eq!(map_reading(&v, 10.0), Ok(2));
        assert!(matches!(map_reading(&v, 10.5), Err(GatewayError::OutOfRange { .. })));
        assert!(matches!(map_reading(&v, -1.0), Err(GatewayError::OutOfRange { .. })));
    }

    #[test]
    fn new_abnormal_triggers_and_repeat_does_not() {
        let kb = kb();
        let all_normal = [Reading::new(13, "ABP004MP", 2.2), Reading::new(13, "CEX202MP", 2.3)];
        let (s0, t0) = ingest_tick(None, &all_normal, &kb, GatewayConfig::default()).unwrap();
        assert!(!t0);
        assert_eq!(s0.normal.len(), 2);

        let low = [Reading::new(14, "ABP004MP", 1.8)];
        let (s1, t1) = ingest_tick(Some(&s0), &low, &kb, GatewayConfig::default()).unwrap();
        assert!(t1);
        assert_eq!(s1.state_of(VarId(71)), Some(2));
        assert_eq!(s1.state_of(VarId(185)), Some(0));

        let again = [Reading::new(15, "ABP004MP", 1.7)];
        let (s2, t2) = ingest_tick(Some(&s1), &again, &kb, GatewayConfig::default()).unwrap();
        assert!(!t2);
        assert_eq!(s2.tick, 15);
    }

    #[test]
    fn recovery_trigger_is_configurable() {
        let kb = kb();
        let (s1, _) = ingest_tick(None, &[Reading::new(1, "ABP004MP", 1.0)], &kb, GatewayConfig::default()).unwrap();
        let back = [Reading::new(2, "ABP004MP", 2.0)];
        let (_, on) = ingest_tick(Some(&s1), &back, &kb, GatewayConfig::default()).unwrap();
        let off_cfg = GatewayConfig { trigger_on_recovery: false };
        let (s2, off) = ingest_tick(Some(&s1), &back, &kb, off_cfg).unwrap();
        assert!(on);
        assert!(!off);
        assert!(s2.abnormal.is_empty());
    }

    #[test]
    fn abnormal_state_change_triggers() {
        let kb = kb();
        let (s1, _) = ingest_tick(None, &[Reading::new(1, "ABP004MP", 1.0)], &kb, GatewayConfig::default()).unwrap();
        let (_, t) = ingest_tick(Some(&s1), &[Reading::new(2, "ABP004MP", 3.0)], &kb, GatewayConfig::default()).unwrap();
        assert!(t);
    }

    #[test]
    fn empty_input_gives_empty_snapshot() {
        let (s, t) = ingest_tick(None, &[], &kb(), GatewayConfig::default()).unwrap();
        assert!(!t);
        assert!(s.assignments.is_empty());
    }

    #[test]
    fn errors_name_the_channel() {
        let kb = kb();
        assert_eq!(
            ingest_tick(None, &[Reading::new(1, "NOPE", 1.0)], &kb, GatewayConfig::default()).unwrap_err(),
            GatewayError::UnknownMeasurePoint("NOPE".into())
        );
        match ingest_tick(None, &[Reading::new(1, "CEX202MP", 99.0)], &kb, GatewayConfig::default()) {
            Err(GatewayError::OutOfRange { measure_point, .. }) => assert_eq!(measure_point, "CEX202MP"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            ingest_tick(None, &[Reading::new(1, "CEX202MP", 2.3), Reading::new(2, "CEX202MP", 2.3)], &kb, GatewayConfig::default()),
            Err(GatewayError::MixedTicks(1, 2))
        ));
    }

    #[test]
    fn last_reading_in_a_tick_wins() {
        let kb = kb();
        let burst = [Reading::new(1, "CEX202MP", 1.0), Reading::new(1, "CEX202MP", 2.3)];
        let (s, t) = ingest_tick(None, &burst, &kb, GatewayConfig::default()).unwrap();
        assert_eq!(s.state_of(VarId(185)), Some(0));
        assert!(!t);
    }

    #[test]
    fn parses_records() {
        assert_eq!(parse_signal_record("14,ABP004MP,1.8"), Ok(Reading::new(14, "ABP004MP", 1.8)));
        assert_eq!(parse_signal_record("13,CEX202MP,2.45"), Ok(Reading::new(13, "CEX202MP", 2.45)));
        assert_eq!(parse_signal_record("14,ABP004MP,").unwrap_err().column, 3);
        assert_eq!(parse_signal_record("x,ABP004MP,1").unwrap_err().column, 1);
        assert_eq!(parse_signal_record("14,,1").unwrap_err().column, 2);
        assert_eq!(parse_signal_record("14,ABP004MP").unwrap_err().column, 3);
    }

    #[test]
    fn classifies_lines() {
        assert_eq!(classify_signal_line("# comment"), Ok(SignalLine::Blank));
        assert_eq!(classify_signal_line("  "), Ok(SignalLine::Blank));
        assert_eq!(classify_signal_line("tick,measure_point,value"), Ok(SignalLine::Header));
        assert!(matches!(classify_signal_line("1,A,2"), Ok(SignalLine::Record(_))));
    }

    #[test]
    fn batcher_groups_ticks() {
        let mut b = TickBatcher::new();
        assert_eq!(b.push(Reading::new(1, "A", 1.0)), Ok(None));
        assert_eq!(b.push(Reading::new(1, "B", 1.0)), Ok(None));
        let done = b.push(Reading::new(3, "A", 1.0)).unwrap().unwrap();
        assert_eq!(done.len(), 2);
        assert!(b.push(Reading::new(2, "A", 1.0)).is_err());
        assert_eq!(b.finish().unwrap().len(), 1);
    }
}
