//! Runs of a byzantine message-passing system.
//!
//! A [`Run`] is stored as its round log: the initial faulty set plus, for every
//! round `t+½`, the ground-truth occurrences of each agent and the messages the
//! environment put in flight without any local record. Global states, local
//! histories and the environment state at any time are derived from that log
//! by replay, so a run can never disagree with itself.

use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

/// Dense agent index in `[0, n)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AgentId(pub u16);

impl AgentId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl From<usize> for AgentId {
    fn from(i: usize) -> Self {
        AgentId(i as u16)
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index into a protocol's message alphabet.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MessageId(pub u8);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OccurrenceKind {
    Event,
    Action,
}

/// What happened. `BecomeFaulty` only ever appears in ground truth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Label {
    Start,
    Fire,
    Send { msg: MessageId, to: AgentId },
    Receive { msg: MessageId, from: AgentId },
    BecomeFaulty,
}

impl Label {
    pub fn kind(self) -> OccurrenceKind {
        match self {
            Label::Fire | Label::Send { .. } => OccurrenceKind::Action,
            Label::Start | Label::Receive { .. } | Label::BecomeFaulty => OccurrenceKind::Event,
        }
    }

    /// Whether the label can be part of a local history.
    pub fn is_observable(self) -> bool {
        !matches!(self, Label::BecomeFaulty)
    }
}

/// Ground-truth occurrence. `genuine == false` marks a record that did not
/// happen as recorded (a fake event or a false memory of an action).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Occurrence {
    pub label: Label,
    pub genuine: bool,
}

impl Occurrence {
    pub fn genuine(label: Label) -> Self {
        Occurrence { label, genuine: true }
    }

    pub fn fake(label: Label) -> Self {
        Occurrence { label, genuine: false }
    }
}

/// A message travelling from `from` to `to`, sent in round `sent`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Envelope {
    pub sent: u32,
    pub from: AgentId,
    pub to: AgentId,
    pub msg: MessageId,
}

/// One local round record: the set of labels an agent recorded in a round.
/// Kept sorted and duplicate free.
pub type RoundRecord = Vec<Label>;

/// Perfect-recall local state in canonical form: rounds in which nothing was
/// recorded are dropped, so two histories are equal iff the agent cannot tell
/// the corresponding nodes apart.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LocalHistory {
    pub rounds: Vec<RoundRecord>,
}

impl LocalHistory {
    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// Appends a round; empty rounds leave the history unchanged.
    pub fn push_round(&mut self, mut record: RoundRecord) {
        record.retain(|l| l.is_observable());
        record.sort_unstable();
        record.dedup();
        if !record.is_empty() {
            self.rounds.push(record);
        }
    }

    pub fn records(&self) -> impl Iterator<Item = &Label> + '_ {
        self.rounds.iter().flatten()
    }

    pub fn contains(&self, label: Label) -> bool {
        self.records().any(|l| *l == label)
    }

    pub fn is_prefix_of(&self, other: &LocalHistory) -> bool {
        other.rounds.starts_with(&self.rounds)
    }
}

/// Everything that happens in one round `t+½`.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RoundOutcome {
    /// `(agent, occurrence)` pairs, sorted.
    pub occurrences: Vec<(AgentId, Occurrence)>,
    /// Messages put in flight by faulty agents without a local record.
    pub injected: Vec<Envelope>,
}

impl RoundOutcome {
    pub fn is_empty(&self) -> bool {
        self.occurrences.is_empty() && self.injected.is_empty()
    }

    pub fn push(&mut self, agent: AgentId, occ: Occurrence) {
        self.occurrences.push((agent, occ));
    }

    pub fn normalize(&mut self) {
        self.occurrences.sort_unstable();
        self.occurrences.dedup();
        self.injected.sort_unstable();
    }

    pub fn of(&self, agent: AgentId) -> impl Iterator<Item = Occurrence> + '_ {
        self.occurrences.iter().filter(move |(a, _)| *a == agent).map(|(_, o)| *o)
    }

    /// The round record `agent` observes, `genuine` stripped.
    pub fn record_of(&self, agent: AgentId) -> RoundRecord {
        self.of(agent)
            .map(|o| o.label)
            .filter(|l| l.is_observable())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnvironmentState {
    pub clock: u32,
    /// `(agent, t)`: the agent is faulty at every time `>= t`.
    pub faulty: Vec<(AgentId, u32)>,
    pub ground_truth: Vec<RoundOutcome>,
    pub in_flight: Vec<Envelope>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalState {
    pub env: EnvironmentState,
    pub locals: Vec<LocalHistory>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum RunError {
    #[error("fault budget exceeded: {faulty} faulty agents with f = {f}")]
    FaultBudgetExceeded { faulty: usize, f: usize },
    #[error("agent {to} receives message {msg:?} from {from} in round {round} that is not in flight")]
    UnmatchedReceive {
        round: u32,
        to: AgentId,
        from: AgentId,
        msg: MessageId,
    },
    #[error("agent {agent} is correct in round {round} but has a non-genuine record")]
    FakeRecordAtCorrectAgent { round: u32, agent: AgentId },
    #[error("agent {agent} injects a message in round {round} while correct")]
    InjectionByCorrectAgent { round: u32, agent: AgentId },
    #[error("agent {agent} becomes faulty twice")]
    AlreadyFaulty { agent: AgentId },
    #[error("agent index {agent} out of range for n = {n}")]
    UnknownAgent { agent: AgentId, n: usize },
    #[error("run already reached its horizon {horizon}")]
    HorizonReached { horizon: u32 },
    #[error("time {t} is beyond horizon {horizon}")]
    OutOfRange { t: u32, horizon: u32 },
    #[error("malformed round outcome: {0}")]
    Malformed(&'static str),
}

/// A run: initial faulty set plus the round log up to the current length.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Run {
    pub n: u16,
    pub f: u16,
    pub horizon: u32,
    /// Agents faulty already at time 0, sorted.
    pub initially_faulty: Vec<AgentId>,
    pub rounds: Vec<RoundOutcome>,
}

impl Run {
    pub fn new(n: usize, f: usize, horizon: u32, initially_faulty: &[AgentId]) -> Result<Run, RunError> {
        let mut faulty = initially_faulty.to_vec();
        faulty.sort_unstable();
        faulty.dedup();
        if let Some(&a) = faulty.iter().find(|a| a.index() >= n) {
            return Err(RunError::UnknownAgent { agent: a, n });
        }
        if faulty.len() > f {
            return Err(RunError::FaultBudgetExceeded { faulty: faulty.len(), f });
        }
        Ok(Run {
            n: n as u16,
            f: f as u16,
            horizon,
            initially_faulty: faulty,
            rounds: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn f(&self) -> usize {
        self.f as usize
    }

    /// Number of rounds appended so far; the last global state is at this time.
    pub fn len(&self) -> u32 {
        self.rounds.len() as u32
    }

    pub fn is_complete(&self) -> bool {
        self.len() == self.horizon
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (0..self.n).map(AgentId)
    }

    /// First time at which `agent` is faulty, if ever.
    ///
    /// `BecomeFaulty` in round `t+½` makes the agent faulty from `t+1` on.
    pub fn faulty_from(&self, agent: AgentId) -> Option<u32> {
        if self.initially_faulty.contains(&agent) {
            return Some(0);
        }
        self.rounds.iter().enumerate().find_map(|(k, r)| {
            r.of(agent)
                .any(|o| o.label == Label::BecomeFaulty)
                .then_some(k as u32 + 1)
        })
    }

    /// Whether `agent` may deviate from its protocol in round `round`: it is
    /// faulty at `round + 1` at the latest.
    pub fn acts_faulty(&self, agent: AgentId, round: u32) -> bool {
        self.faulty_from(agent).is_some_and(|t| t <= round + 1)
    }

    /// Extends the run by one round after checking the model invariants.
    pub fn append_round(mut self, mut outcome: RoundOutcome) -> Result<Run, RunError> {
        if self.is_complete() {
            return Err(RunError::HorizonReached { horizon: self.horizon });
        }
        outcome.normalize();
        let round = self.len();
        let n = self.n();

        for &(a, o) in &outcome.occurrences {
            if a.index() >= n {
                return Err(RunError::UnknownAgent { agent: a, n });
            }
            match o.label {
                Label::Send { to, .. } if to.index() >= n => {
                    return Err(RunError::UnknownAgent { agent: to, n })
                }
                Label::Receive { from, .. } if from.index() >= n => {
                    return Err(RunError::UnknownAgent { agent: from, n })
                }
                Label::BecomeFaulty if !o.genuine => {
                    return Err(RunError::Malformed("BecomeFaulty must be genuine"))
                }
                _ => {}
            }
        }

        // Fault onsets.
        let mut faulty_count = self.initially_faulty.len()
            + self
                .rounds
                .iter()
                .flat_map(|r| r.occurrences.iter())
                .filter(|(_, o)| o.label == Label::BecomeFaulty)
                .count();
        for &(a, o) in &outcome.occurrences {
            if o.label == Label::BecomeFaulty {
                if self.faulty_from(a).is_some() {
                    return Err(RunError::AlreadyFaulty { agent: a });
                }
                faulty_count += 1;
            }
        }
        if faulty_count > self.f() {
            return Err(RunError::FaultBudgetExceeded { faulty: faulty_count, f: self.f() });
        }
        let acts_faulty = |run: &Run, a: AgentId| {
            run.acts_faulty(a, round)
                || outcome.of(a).any(|o| o.label == Label::BecomeFaulty)
        };

        for &(a, o) in &outcome.occurrences {
            if !o.genuine && !acts_faulty(&self, a) {
                return Err(RunError::FakeRecordAtCorrectAgent { round, agent: a });
            }
        }
        for e in &outcome.injected {
            if e.sent != round {
                return Err(RunError::Malformed("injected envelope must be sent in the current round"));
            }
            if e.from.index() >= n || e.to.index() >= n {
                return Err(RunError::UnknownAgent { agent: e.from.max(e.to), n });
            }
            if !acts_faulty(&self, e.from) {
                return Err(RunError::InjectionByCorrectAgent { round, agent: e.from });
            }
        }

        // Genuine receipts must consume an envelope sent in an earlier round.
        let mut in_flight = self.in_flight_at(round);
        for &(to, o) in &outcome.occurrences {
            if let (Label::Receive { msg, from }, true) = (o.label, o.genuine) {
                let pos = in_flight
                    .iter()
                    .position(|e| e.to == to && e.from == from && e.msg == msg);
                match pos {
                    Some(p) => {
                        in_flight.remove(p);
                    }
                    None => return Err(RunError::UnmatchedReceive { round, to, from, msg }),
                }
            }
        }

        self.rounds.push(outcome);
        Ok(self)
    }

    /// Messages in flight at time `t` (sent before `t`, not yet received),
    /// sorted by send round.
    pub fn in_flight_at(&self, t: u32) -> Vec<Envelope> {
        let mut in_flight: Vec<Envelope> = Vec::new();
        for (k, r) in self.rounds.iter().enumerate().take(t as usize) {
            let k = k as u32;
            for &(to, o) in &r.occurrences {
                if let (Label::Receive { msg, from }, true) = (o.label, o.genuine) {
                    if let Some(p) = in_flight
                        .iter()
                        .position(|e| e.to == to && e.from == from && e.msg == msg)
                    {
                        in_flight.remove(p);
                    }
                }
            }
            for &(from, o) in &r.occurrences {
                if let (Label::Send { msg, to }, true) = (o.label, o.genuine) {
                    in_flight.push(Envelope { sent: k, from, to, msg });
                }
            }
            in_flight.extend(r.injected.iter().copied());
        }
        in_flight.sort();
        in_flight
    }

    fn check_time(&self, t: u32) -> Result<(), RunError> {
        if t > self.len() {
            Err(RunError::OutOfRange { t, horizon: self.len() })
        } else {
            Ok(())
        }
    }

    /// Canonical local history of `agent` at time `t`.
    pub fn local_state_at(&self, agent: AgentId, t: u32) -> Result<LocalHistory, RunError> {
        self.check_time(t)?;
        let mut h = LocalHistory::default();
        for r in &self.rounds[..t as usize] {
            h.push_round(r.record_of(agent));
        }
        Ok(h)
    }

    pub fn is_correct(&self, agent: AgentId, t: u32) -> bool {
        self.faulty_from(agent).is_none_or(|ft| t < ft)
    }

    /// Whether the ground truth of `agent` holds a genuine `label` record
    /// before time `t`.
    pub fn occurred(&self, agent: AgentId, label: Label, t: u32) -> bool {
        self.rounds
            .iter()
            .take(t as usize)
            .any(|r| r.of(agent).any(|o| o.genuine && o.label == label))
    }

    pub fn state(&self, t: u32) -> Result<GlobalState, RunError> {
        self.check_time(t)?;
        let mut faulty: Vec<(AgentId, u32)> = self
            .agents()
            .filter_map(|a| self.faulty_from(a).filter(|&ft| ft <= t).map(|ft| (a, ft)))
            .collect();
        faulty.sort();
        let locals = self
            .agents()
            .map(|a| self.local_state_at(a, t))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(GlobalState {
            env: EnvironmentState {
                clock: t,
                faulty,
                ground_truth: self.rounds[..t as usize].to_vec(),
                in_flight: self.in_flight_at(t),
            },
            locals,
        })
    }

    /// Same run with one extra round in which nothing happens, inserted before
    /// round `at`. Envelope send rounds after the insertion point shift by one.
    pub fn with_stutter(&self, at: u32) -> Run {
        let mut out = self.clone();
        out.horizon += 1;
        let at = at.min(out.len()) as usize;
        for r in &mut out.rounds[at..] {
            for e in &mut r.injected {
                e.sent += 1;
            }
        }
        out.rounds.insert(at, RoundOutcome::default());
        out
    }
}

pub fn append_round(run: Run, outcome: RoundOutcome) -> Result<Run, RunError> {
    run.append_round(outcome)
}

pub fn local_state_at(run: &Run, agent: AgentId, t: u32) -> Result<LocalHistory, RunError> {
    run.local_state_at(agent, t)
}

pub fn is_correct(run: &Run, agent: AgentId, t: u32) -> bool {
    run.is_correct(agent, t)
}
