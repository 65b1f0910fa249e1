//! Protocols map a canonical local history to the action sets an agent may
//! perform in the next round.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::model::{AgentId, Envelope, Label, LocalHistory, MessageId, Occurrence, RoundOutcome, Run};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    Fire,
    Send { msg: MessageId, to: AgentId },
}

impl Action {
    pub fn label(self) -> Label {
        match self {
            Action::Fire => Label::Fire,
            Action::Send { msg, to } => Label::Send { msg, to },
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DecisionContext {
    pub agent: AgentId,
    pub n: usize,
    pub f: usize,
}

impl DecisionContext {
    fn others(&self) -> impl Iterator<Item = AgentId> + '_ {
        (0..self.n).map(AgentId::from).filter(move |&j| j != self.agent)
    }

    fn broadcast(&self, msg: MessageId) -> impl Iterator<Item = Action> + '_ {
        self.others().map(move |to| Action::Send { msg, to })
    }
}

/// Alternative action sets; a deterministic protocol returns exactly one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProtocolDecision {
    pub alternatives: Vec<Vec<Action>>,
}

impl ProtocolDecision {
    pub fn noop() -> Self {
        ProtocolDecision { alternatives: vec![Vec::new()] }
    }

    pub fn single(mut actions: Vec<Action>) -> Self {
        actions.sort_unstable();
        actions.dedup();
        ProtocolDecision { alternatives: vec![actions] }
    }

    pub fn is_noop(&self) -> bool {
        self.alternatives.iter().all(Vec::is_empty)
    }
}

pub trait Protocol: Send + Sync {
    fn name(&self) -> &str;

    /// Message names; `MessageId(k)` refers to the `k`-th entry.
    fn alphabet(&self) -> &[&'static str];

    fn decide(&self, ctx: &DecisionContext, history: &LocalHistory) -> ProtocolDecision;
}

pub type ProtocolSpec = Box<dyn Protocol>;

pub const NOTIFY: MessageId = MessageId(0);
pub const ECHO: MessageId = MessageId(0);

fn fired(h: &LocalHistory) -> bool {
    h.contains(Label::Fire)
}

fn sent(h: &LocalHistory, msg: MessageId) -> bool {
    h.records().any(|l| matches!(l, Label::Send { msg: m, .. } if *m == msg))
}

fn senders(h: &LocalHistory, msg: MessageId) -> Vec<AgentId> {
    let mut out: Vec<AgentId> = h
        .records()
        .filter_map(|l| match l {
            Label::Receive { msg: m, from } if *m == msg => Some(*from),
            _ => None,
        })
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

/// Fires and notifies everybody on the first START or notification.
#[derive(Clone, Copy, Debug, Default)]
pub struct NaiveRelay;

impl Protocol for NaiveRelay {
    fn name(&self) -> &str {
        "naive-relay"
    }

    fn alphabet(&self) -> &[&'static str] {
        &["NOTIFY"]
    }

    fn decide(&self, ctx: &DecisionContext, h: &LocalHistory) -> ProtocolDecision {
        if fired(h) || !(h.contains(Label::Start) || !senders(h, NOTIFY).is_empty()) {
            return ProtocolDecision::noop();
        }
        let mut acts = vec![Action::Fire];
        acts.extend(ctx.broadcast(NOTIFY));
        ProtocolDecision::single(acts)
    }
}

/// Echo amplification: relay at `f+1` distinct sources, fire at `2f+1`.
/// The agent itself is a source once it has observed START or sent ECHO.
#[derive(Clone, Copy, Debug)]
pub struct EchoFrr {
    pub f: usize,
}

impl Protocol for EchoFrr {
    fn name(&self) -> &str {
        "echo-frr"
    }

    fn alphabet(&self) -> &[&'static str] {
        &["ECHO"]
    }

    fn decide(&self, ctx: &DecisionContext, h: &LocalHistory) -> ProtocolDecision {
        let mut sources = senders(h, ECHO);
        sources.retain(|&j| j != ctx.agent);
        let started = h.contains(Label::Start);
        let echoed = sent(h, ECHO);
        let mut acts = Vec::new();
        let relay = !echoed && (started || sources.len() > self.f);
        if relay {
            acts.extend(ctx.broadcast(ECHO));
        }
        let own = usize::from(started || echoed || relay);
        if !fired(h) && sources.len() + own > 2 * self.f {
            acts.push(Action::Fire);
        }
        ProtocolDecision::single(acts)
    }
}

/// Broadcasts NOTIFY on START and fires once NOTIFYs arrived from two
/// distinct agents.
#[derive(Clone, Copy, Debug, Default)]
pub struct MutualHopeTrigger;

impl Protocol for MutualHopeTrigger {
    fn name(&self) -> &str {
        "mutual-hope-trigger"
    }

    fn alphabet(&self) -> &[&'static str] {
        &["NOTIFY"]
    }

    fn decide(&self, ctx: &DecisionContext, h: &LocalHistory) -> ProtocolDecision {
        let mut acts = Vec::new();
        if h.contains(Label::Start) && !sent(h, NOTIFY) {
            acts.extend(ctx.broadcast(NOTIFY));
        }
        if !fired(h) && senders(h, NOTIFY).len() >= 2 {
            acts.push(Action::Fire);
        }
        ProtocolDecision::single(acts)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Silent;

impl Protocol for Silent {
    fn name(&self) -> &str {
        "silent"
    }

    fn alphabet(&self) -> &[&'static str] {
        &[]
    }

    fn decide(&self, _: &DecisionContext, _: &LocalHistory) -> ProtocolDecision {
        ProtocolDecision::noop()
    }
}

pub fn naive_relay() -> ProtocolSpec {
    Box::new(NaiveRelay)
}

pub fn echo_frr(f: usize) -> ProtocolSpec {
    Box::new(EchoFrr { f })
}

pub fn mutual_hope_trigger() -> ProtocolSpec {
    Box::new(MutualHopeTrigger)
}

pub fn silent() -> ProtocolSpec {
    Box::new(Silent)
}

pub const PROTOCOL_NAMES: [&str; 4] = ["naive-relay", "echo-frr", "mutual-hope-trigger", "silent"];

/// Looks a protocol up by its [`Protocol::name`]. `f` parameterizes
/// threshold protocols.
pub fn by_name(name: &str, f: usize) -> Option<ProtocolSpec> {
    match name {
        "naive-relay" => Some(naive_relay()),
        "echo-frr" => Some(echo_frr(f)),
        "mutual-hope-trigger" => Some(mutual_hope_trigger()),
        "silent" => Some(silent()),
        _ => None,
    }
}

/// Agents of the three-agent counterexample run.
pub const C1: AgentId = AgentId(0);
pub const B: AgentId = AgentId(1);
pub const C2: AgentId = AgentId(2);

/// The three-agent run in which `b` is byzantine from the start and falsely
/// notifies `c2` only: `c2` fires after round 3, `c1` never does.
pub fn remark12_scenario(horizon: u32) -> Run {
    assert!(horizon >= 5, "the scenario needs five rounds");
    let g = Occurrence::genuine;
    let send = |from: AgentId, to: AgentId| (from, g(Label::Send { msg: NOTIFY, to }));
    let recv = |at: AgentId, from: AgentId| (at, g(Label::Receive { msg: NOTIFY, from }));
    let rounds = [
        RoundOutcome {
            occurrences: vec![(C1, g(Label::Start)), (C2, g(Label::Start))],
            injected: vec![],
        },
        RoundOutcome {
            occurrences: vec![send(C1, B), send(C1, C2), send(C2, C1), send(C2, B)],
            injected: vec![Envelope { sent: 1, from: B, to: C2, msg: NOTIFY }],
        },
        RoundOutcome {
            occurrences: vec![recv(C1, C2), recv(B, C1), recv(B, C2), recv(C2, C1), recv(C2, B)],
            injected: vec![],
        },
        RoundOutcome { occurrences: vec![(B, g(Label::Fire)), (C2, g(Label::Fire))], injected: vec![] },
    ];
    let mut run = Run::new(3, 1, horizon, &[B]).expect("valid parameters");
    for r in rounds {
        run = run.append_round(r).expect("scripted round is well formed");
    }
    while !run.is_complete() {
        run = run.append_round(RoundOutcome::default()).expect("empty round");
    }
    run
}
