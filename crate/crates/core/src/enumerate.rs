//! The environment: exhaustive and sampled generation of run sets.
//!
//! A single run generator asks a [`Chooser`] for every nondeterministic
//! decision (fault plan, START plan, protocol alternative, byzantine menu
//! item, delivery). Exhaustive enumeration is a depth-first walk over those
//! choices by replay; sampling picks them at random; [`replay`] follows a
//! recorded [`ChoiceLog`].

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::hash::BuildHasher;

use hashbrown::hash_table::HashTable;
use hashbrown::DefaultHashBuilder;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::formula::{Atom, Formula};
use crate::model::{AgentId, Envelope, Label, LocalHistory, MessageId, Occurrence, RoundOutcome, Run};
use crate::protocol::{Action, DecisionContext, Protocol};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Onset {
    /// Faulty from time 0.
    Initial,
    /// `BecomeFaulty` in round `k`: faulty from time `k+1`, byzantine already
    /// in round `k`.
    Round(u32),
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct StartConfig {
    /// Candidate agents; empty means all.
    pub agents: Vec<AgentId>,
    pub rounds: Vec<u32>,
    pub min_starts: usize,
    /// `None` means no upper bound.
    pub max_starts: Option<usize>,
}

impl Default for StartConfig {
    fn default() -> Self {
        StartConfig { agents: Vec::new(), rounds: vec![0], min_starts: 0, max_starts: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct FaultConfig {
    /// Candidate agents; empty means all.
    pub agents: Vec<AgentId>,
    pub onsets: Vec<Onset>,
    /// At most `f` agents are ever faulty; at least this many are.
    pub min_faulty: usize,
}

impl Default for FaultConfig {
    fn default() -> Self {
        FaultConfig { agents: Vec::new(), onsets: vec![Onset::Initial], min_faulty: 0 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct ByzantineMenu {
    /// A faulty agent may record a START that did not happen, once, at one
    /// of the START rounds.
    pub fake_start_record: bool,
    /// A faulty agent may put a message in flight without recording it,
    /// once per (message, receiver); it arrives in the next round.
    pub fake_send: bool,
    /// A faulty agent may record a send that never leaves.
    pub omit_send: bool,
    /// A faulty agent may record a receipt that did not happen, once per
    /// (message, sender).
    pub fake_receive: bool,
}

impl ByzantineMenu {
    pub fn items(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.fake_start_record {
            v.push("fake_start_record");
        }
        if self.fake_send {
            v.push("fake_send");
        }
        if self.omit_send {
            v.push("omit_send");
        }
        if self.fake_receive {
            v.push("fake_receive");
        }
        v
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum DeliveryMode {
    /// Messages from correct senders reach correct receivers by the
    /// horizon, and correct agents are quiescent at the horizon.
    #[default]
    DeliverByHorizon,
    /// Any message may be lost at its deadline.
    AllowLoss,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct DeliveryConfig {
    pub mode: DeliveryMode,
    /// A message sent in round `k` arrives in round `k+1 ..= k+max_delay`
    /// (and never after round `horizon-1`).
    pub max_delay: u32,
}

impl Default for DeliveryConfig {
    fn default() -> Self {
        DeliveryConfig { mode: DeliveryMode::DeliverByHorizon, max_delay: 2 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct Caps {
    pub max_runs: usize,
    pub max_in_flight: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps { max_runs: 200_000, max_in_flight: 64 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct AdversaryConfig {
    pub n: usize,
    pub f: usize,
    pub horizon: u32,
    #[cfg_attr(feature = "serde", serde(default))]
    pub start: StartConfig,
    #[cfg_attr(feature = "serde", serde(default))]
    pub faults: FaultConfig,
    #[cfg_attr(feature = "serde", serde(default))]
    pub byzantine: ByzantineMenu,
    #[cfg_attr(feature = "serde", serde(default))]
    pub delivery: DeliveryConfig,
    /// Add brain-in-a-vat twins.
    #[cfg_attr(feature = "serde", serde(default = "yes"))]
    pub twins: bool,
    #[cfg_attr(feature = "serde", serde(default))]
    pub caps: Caps,
}

#[cfg(feature = "serde")]
fn yes() -> bool {
    true
}

impl AdversaryConfig {
    pub fn new(n: usize, f: usize, horizon: u32) -> Self {
        AdversaryConfig {
            n,
            f,
            horizon,
            start: StartConfig::default(),
            faults: FaultConfig::default(),
            byzantine: ByzantineMenu::default(),
            delivery: DeliveryConfig::default(),
            twins: true,
            caps: Caps::default(),
        }
    }

    fn start_agents(&self) -> Vec<AgentId> {
        if self.start.agents.is_empty() {
            (0..self.n).map(AgentId::from).collect()
        } else {
            self.start.agents.clone()
        }
    }

    fn fault_agents(&self) -> Vec<AgentId> {
        if self.faults.agents.is_empty() {
            (0..self.n).map(AgentId::from).collect()
        } else {
            self.faults.agents.clone()
        }
    }

    pub fn validate(&self) -> Result<(), EnumError> {
        let bad = |m: &str| Err(EnumError::ConfigInvalid(String::from(m)));
        if self.n == 0 {
            return bad("n must be at least 1");
        }
        if self.f >= self.n {
            return bad("f must be smaller than n");
        }
        if self.n > u16::MAX as usize {
            return bad("too many agents");
        }
        let in_range = |v: &[AgentId]| v.iter().all(|a| a.index() < self.n);
        if !in_range(&self.start.agents) || !in_range(&self.faults.agents) {
            return bad("agent index out of range");
        }
        if self.start.rounds.iter().any(|&r| r >= self.horizon) {
            return bad("START round must be before the horizon");
        }
        if self.faults.onsets.iter().any(|o| matches!(o, Onset::Round(k) if *k >= self.horizon)) {
            return bad("fault onset round must be before the horizon");
        }
        if self.faults.onsets.is_empty() && self.faults.min_faulty > 0 {
            return bad("min_faulty needs at least one onset");
        }
        if self.faults.min_faulty > self.f {
            return bad("min_faulty exceeds f");
        }
        if self.start.max_starts.is_some_and(|m| m < self.start.min_starts) {
            return bad("max_starts below min_starts");
        }
        if self.delivery.max_delay == 0 {
            return bad("max_delay must be at least 1");
        }
        if self.caps.max_runs == 0 {
            return bad("max_runs must be at least 1");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ChoiceKind {
    FaultPlan,
    StartPlan,
    ProtocolAlt,
    Omit,
    FakeStart,
    FakeSend,
    FakeReceive,
    Deliver,
}

impl ChoiceKind {
    pub const ALL: [ChoiceKind; 8] = [
        ChoiceKind::FaultPlan,
        ChoiceKind::StartPlan,
        ChoiceKind::ProtocolAlt,
        ChoiceKind::Omit,
        ChoiceKind::FakeStart,
        ChoiceKind::FakeSend,
        ChoiceKind::FakeReceive,
        ChoiceKind::Deliver,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ChoiceKind::FaultPlan => "F",
            ChoiceKind::StartPlan => "S",
            ChoiceKind::ProtocolAlt => "P",
            ChoiceKind::Omit => "O",
            ChoiceKind::FakeStart => "A",
            ChoiceKind::FakeSend => "X",
            ChoiceKind::FakeReceive => "R",
            ChoiceKind::Deliver => "D",
        }
    }

    pub fn from_tag(s: &str) -> Option<ChoiceKind> {
        ChoiceKind::ALL.into_iter().find(|k| k.tag() == s)
    }
}

/// One decision with more than one option.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Choice {
    pub kind: ChoiceKind,
    pub index: u32,
    pub arity: u32,
}

/// The nontrivial decisions that produced a run, in the order they were made.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ChoiceLog(pub Vec<Choice>);

/// Where a run in a [`RunSet`] came from.
#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum RunOrigin {
    Choices(ChoiceLog),
    /// Brain-in-a-vat twin of run `of` for `agent`.
    Twin { of: u32, agent: AgentId },
    /// Supplied from outside, e.g. a scripted scenario.
    Pinned,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnumStats {
    /// Complete choice paths visited.
    pub leaves: usize,
    /// Paths discarded by the liveness filter.
    pub pruned: usize,
    pub duplicates: usize,
    pub twins: usize,
}

#[derive(Clone, Debug, Default)]
pub struct RunSet {
    pub runs: Vec<Run>,
    pub origins: Vec<RunOrigin>,
    /// Enumeration stopped at `caps.max_runs`.
    pub truncated: bool,
    pub stats: EnumStats,
    dedup: Dedup,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CapKind {
    MaxRuns,
    MaxInFlight,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EnumError {
    #[error("invalid adversary configuration: {0}")]
    ConfigInvalid(String),
    #[error("cap {cap:?} = {limit} exceeded after {partial} runs")]
    CapExceeded { cap: CapKind, limit: usize, partial: usize },
    #[error("potential persistence closure only supports correct(i) & !start")]
    UnsupportedFormula,
    #[error("choice log does not match the generator at choice {at}")]
    ReplayMismatch { at: usize },
}

#[derive(Clone, Default)]
struct Dedup {
    table: HashTable<u32>,
    hasher: DefaultHashBuilder,
}

impl core::fmt::Debug for Dedup {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str("Dedup")
    }
}

impl RunSet {
    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    /// Adds `run` unless an equal run is present. Returns its index and
    /// whether it was new.
    pub fn insert(&mut self, run: Run, origin: RunOrigin) -> (u32, bool) {
        let hash = self.dedup.hasher.hash_one(&run);
        let runs = &self.runs;
        if let Some(&i) = self.dedup.table.find(hash, |&i| runs[i as usize] == run) {
            return (i, false);
        }
        let i = self.runs.len() as u32;
        self.runs.push(run);
        self.origins.push(origin);
        let (runs, hasher) = (&self.runs, &self.dedup.hasher);
        self.dedup.table.insert_unique(hash, i, |&i| hasher.hash_one(&runs[i as usize]));
        (i, true)
    }

    pub fn contains(&self, run: &Run) -> Option<u32> {
        let hash = self.dedup.hasher.hash_one(run);
        self.dedup.table.find(hash, |&i| self.runs[i as usize] == *run).copied()
    }

    /// Moves `run` to index 0, adding it first if absent. With `twins`, its
    /// brain-in-a-vat twins are added too.
    pub fn pin_front(&mut self, run: Run, twins: bool) {
        let existing = self.contains(&run);
        let mut runs = core::mem::take(&mut self.runs);
        let mut origins = core::mem::take(&mut self.origins);
        let origin = match existing {
            Some(i) => {
                runs.remove(i as usize);
                origins.remove(i as usize)
            }
            None => RunOrigin::Pinned,
        };
        let remap = |j: u32| match existing {
            Some(i) if j > i => j,
            Some(i) if j == i => 0,
            _ => j + 1,
        };
        for o in &mut origins {
            if let RunOrigin::Twin { of, .. } = o {
                *of = remap(*of);
            }
        }
        runs.insert(0, run);
        origins.insert(0, origin);
        self.dedup = Dedup::default();
        let stats = self.stats;
        for (r, o) in runs.into_iter().zip(origins) {
            self.insert(r, o);
        }
        self.stats = stats;
        if twins {
            self.add_twins_of(0);
        }
    }

    fn add_twins_of(&mut self, k: u32) {
        let run = self.runs[k as usize].clone();
        for agent in run.agents() {
            if let Some(twin) = vat_twin(&run, agent) {
                if self.insert(twin, RunOrigin::Twin { of: k, agent }).1 {
                    self.stats.twins += 1;
                }
            }
        }
    }

    fn add_twins(&mut self) {
        let originals = self.runs.len() as u32;
        for k in 0..originals {
            self.add_twins_of(k);
        }
    }
}

/// The run in which `agent` is faulty from the start, holds exactly the
/// records it has in `run` (none of them accurate), and nobody else does
/// anything. `None` when the fault budget is zero.
pub fn vat_twin(run: &Run, agent: AgentId) -> Option<Run> {
    if run.f() == 0 {
        return None;
    }
    let mut twin = Run::new(run.n(), run.f(), run.horizon, &[agent]).ok()?;
    for r in &run.rounds {
        let occurrences = r.record_of(agent).into_iter().map(|l| (agent, Occurrence::fake(l))).collect();
        twin = twin.append_round(RoundOutcome { occurrences, injected: Vec::new() }).ok()?;
    }
    Some(twin)
}

/// Source of nondeterministic decisions.
pub trait Chooser {
    /// Picks an index in `0..arity`; `arity >= 2`.
    fn choose(&mut self, kind: ChoiceKind, arity: usize) -> Result<usize, Stop>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stop {
    Pruned,
    InFlightCap,
    Replay(usize),
}

#[derive(Clone, Copy)]
struct Frame {
    kind: ChoiceKind,
    index: usize,
    arity: usize,
}

#[derive(Default)]
struct DfsChooser {
    stack: Vec<Frame>,
    depth: usize,
}

impl Chooser for DfsChooser {
    fn choose(&mut self, kind: ChoiceKind, arity: usize) -> Result<usize, Stop> {
        let d = self.depth;
        self.depth += 1;
        if let Some(fr) = self.stack.get(d) {
            debug_assert!(fr.kind == kind && fr.arity == arity, "generator is not deterministic");
            return Ok(fr.index);
        }
        self.stack.push(Frame { kind, index: 0, arity });
        Ok(0)
    }
}

impl DfsChooser {
    fn log(&self) -> ChoiceLog {
        ChoiceLog(
            self.stack[..self.depth]
                .iter()
                .map(|f| Choice { kind: f.kind, index: f.index as u32, arity: f.arity as u32 })
                .collect(),
        )
    }

    /// Moves to the next leaf without touching the first `floor` frames;
    /// false when that subtree is exhausted.
    fn advance(&mut self, floor: usize) -> bool {
        self.stack.truncate(self.depth);
        self.depth = 0;
        while self.stack.len() > floor {
            let top = self.stack.last_mut().expect("above floor");
            if top.index + 1 < top.arity {
                top.index += 1;
                return true;
            }
            self.stack.pop();
        }
        false
    }
}

struct ReplayChooser<'a> {
    log: &'a ChoiceLog,
    pos: usize,
}

impl Chooser for ReplayChooser<'_> {
    fn choose(&mut self, kind: ChoiceKind, arity: usize) -> Result<usize, Stop> {
        let c = self.log.0.get(self.pos).ok_or(Stop::Replay(self.pos))?;
        if c.kind != kind || c.arity as usize != arity || c.index as usize >= arity {
            return Err(Stop::Replay(self.pos));
        }
        self.pos += 1;
        Ok(c.index as usize)
    }
}

struct RandomChooser {
    rng: ChaCha8Rng,
    log: Vec<Choice>,
}

impl Chooser for RandomChooser {
    fn choose(&mut self, kind: ChoiceKind, arity: usize) -> Result<usize, Stop> {
        let index = self.rng.gen_range(0..arity);
        self.log.push(Choice { kind, index: index as u32, arity: arity as u32 });
        Ok(index)
    }
}

fn pick(ch: &mut dyn Chooser, kind: ChoiceKind, arity: usize) -> Result<usize, Stop> {
    match arity {
        0 => unreachable!("empty choice"),
        1 => Ok(0),
        _ => ch.choose(kind, arity),
    }
}

type FaultPlan = Vec<(AgentId, Onset)>;
type StartPlan = Vec<(AgentId, u32)>;

fn subsets<T: Clone>(items: &[T], min: usize, max: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    for size in min..=max.min(items.len()) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            out.push(idx.iter().map(|&i| items[i].clone()).collect());
            let Some(pos) = (0..size).rev().find(|&p| idx[p] < items.len() - size + p) else {
                break;
            };
            idx[pos] += 1;
            for q in pos + 1..size {
                idx[q] = idx[q - 1] + 1;
            }
        }
    }
    out
}

/// Every assignment of one option to each item, options varying fastest at
/// the last item.
fn assignments<T: Clone, O: Clone>(items: &[T], options: &[O]) -> Vec<Vec<(T, O)>> {
    let mut out: Vec<Vec<(T, O)>> = vec![Vec::new()];
    for it in items {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |o| {
                    let mut p = prefix.clone();
                    p.push((it.clone(), o.clone()));
                    p
                })
            })
            .collect();
    }
    out
}

fn fault_plans(cfg: &AdversaryConfig) -> Vec<FaultPlan> {
    let mut onsets = cfg.faults.onsets.clone();
    onsets.sort();
    onsets.dedup();
    let max = if onsets.is_empty() { 0 } else { cfg.f };
    subsets(&cfg.fault_agents(), cfg.faults.min_faulty, max)
        .into_iter()
        .flat_map(|s| assignments(&s, &onsets))
        .collect()
}

fn start_plans(cfg: &AdversaryConfig) -> Vec<StartPlan> {
    let mut rounds = cfg.start.rounds.clone();
    rounds.sort();
    rounds.dedup();
    let max = if rounds.is_empty() { 0 } else { cfg.start.max_starts.unwrap_or(usize::MAX) };
    let mut agents = cfg.start_agents();
    agents.sort();
    agents.dedup();
    subsets(&agents, cfg.start.min_starts, max)
        .into_iter()
        .flat_map(|s| assignments(&s, &rounds))
        .collect()
}

struct Generator<'a> {
    proto: &'a dyn Protocol,
    cfg: &'a AdversaryConfig,
    fault_plans: Vec<FaultPlan>,
    start_plans: Vec<StartPlan>,
    alphabet: usize,
}

#[derive(Clone, Copy)]
struct Flight {
    env: Envelope,
    deadline: u32,
    /// Sender was correct when sending.
    reliable: bool,
    /// May vanish at the deadline although the receiver is correct.
    losable: bool,
}

impl<'a> Generator<'a> {
    fn new(proto: &'a dyn Protocol, cfg: &'a AdversaryConfig) -> Result<Self, EnumError> {
        cfg.validate()?;
        let fault_plans = fault_plans(cfg);
        let start_plans = start_plans(cfg);
        if fault_plans.is_empty() || start_plans.is_empty() {
            return Err(EnumError::ConfigInvalid(String::from(
                "no fault plan or START plan satisfies the bounds",
            )));
        }
        Ok(Generator { proto, cfg, fault_plans, start_plans, alphabet: proto.alphabet().len() })
    }

    fn generate(&self, ch: &mut dyn Chooser) -> Result<Run, Stop> {
        let cfg = self.cfg;
        let n = cfg.n;
        let horizon = cfg.horizon;
        let faults = &self.fault_plans[pick(ch, ChoiceKind::FaultPlan, self.fault_plans.len())?];
        let starts = &self.start_plans[pick(ch, ChoiceKind::StartPlan, self.start_plans.len())?];

        // First faulty time per agent.
        let mut faulty_from = vec![u32::MAX; n];
        let mut initial = Vec::new();
        for &(a, o) in faults {
            faulty_from[a.index()] = match o {
                Onset::Initial => {
                    initial.push(a);
                    0
                }
                Onset::Round(k) => k + 1,
            };
        }
        let acts_faulty = |a: AgentId, k: u32| faulty_from[a.index()] <= k + 1;

        let mut run = Run::new(n, cfg.f, horizon, &initial).expect("plans respect the budget");
        let mut histories = vec![LocalHistory::default(); n];
        let mut flights: Vec<Flight> = Vec::new();
        let mut fake_sent = vec![false; n * n * self.alphabet.max(1)];
        let mut fake_recv = vec![false; n * n * self.alphabet.max(1)];
        let mut fake_started = vec![false; n];
        let slot = |a: AgentId, m: usize, b: AgentId| (a.index() * n + b.index()) * self.alphabet + m;

        for k in 0..horizon {
            let mut out = RoundOutcome::default();
            for &(a, o) in faults {
                if o == Onset::Round(k) {
                    out.push(a, Occurrence::genuine(Label::BecomeFaulty));
                }
            }
            for &(a, r) in starts {
                if r == k && faulty_from[a.index()] > k {
                    out.push(a, Occurrence::genuine(Label::Start));
                }
            }

            // Deliveries.
            let mut kept = Vec::with_capacity(flights.len());
            for fl in core::mem::take(&mut flights) {
                if fl.env.sent >= k {
                    kept.push(fl);
                    continue;
                }
                let receiver_faulty = faulty_from[fl.env.to.index()] <= horizon;
                let deliver = if k < fl.deadline {
                    pick(ch, ChoiceKind::Deliver, 2)? == 0
                } else {
                    let may_lose = match cfg.delivery.mode {
                        DeliveryMode::AllowLoss => true,
                        DeliveryMode::DeliverByHorizon => receiver_faulty || fl.losable,
                    };
                    !may_lose || pick(ch, ChoiceKind::Deliver, 2)? == 0
                };
                let lost = k >= fl.deadline && !deliver;
                if deliver {
                    let e = fl.env;
                    out.push(e.to, Occurrence::genuine(Label::Receive { msg: e.msg, from: e.from }));
                } else if !lost {
                    kept.push(fl);
                }
            }
            flights = kept;

            // Actions.
            for ai in 0..n {
                let a = AgentId::from(ai);
                let ctx = DecisionContext { agent: a, n, f: cfg.f };
                let h = &histories[ai];
                let d = self.proto.decide(&ctx, h);
                let alt = pick(ch, ChoiceKind::ProtocolAlt, d.alternatives.len())?;
                let faulty = acts_faulty(a, k);
                for &act in &d.alternatives[alt] {
                    let omit = faulty
                        && cfg.byzantine.omit_send
                        && matches!(act, Action::Send { .. })
                        && pick(ch, ChoiceKind::Omit, 2)? == 1;
                    if omit {
                        out.push(a, Occurrence::fake(act.label()));
                        continue;
                    }
                    out.push(a, Occurrence::genuine(act.label()));
                    if let Action::Send { msg, to } = act {
                        flights.push(Flight {
                            env: Envelope { sent: k, from: a, to, msg },
                            deadline: (k + cfg.delivery.max_delay).min(horizon.saturating_sub(1)),
                            reliable: !faulty,
                            // With omission on, losing it would only repeat an omitted send.
                            losable: faulty && !cfg.byzantine.omit_send,
                        });
                    }
                }
                if !faulty {
                    continue;
                }
                if cfg.byzantine.fake_start_record
                    && !fake_started[ai]
                    && cfg.start.rounds.contains(&k)
                    && !h.contains(Label::Start)
                    && !out.of(a).any(|o| o.label == Label::Start)
                    && pick(ch, ChoiceKind::FakeStart, 2)? == 1
                {
                    fake_started[ai] = true;
                    out.push(a, Occurrence::fake(Label::Start));
                }
                if cfg.byzantine.fake_send && k + 2 <= horizon {
                    for m in 0..self.alphabet {
                        for b in (0..n).map(AgentId::from).filter(|&b| b != a) {
                            if !fake_sent[slot(a, m, b)] && pick(ch, ChoiceKind::FakeSend, 2)? == 1 {
                                fake_sent[slot(a, m, b)] = true;
                                let env = Envelope { sent: k, from: a, to: b, msg: MessageId(m as u8) };
                                out.injected.push(env);
                                flights.push(Flight { env, deadline: k + 1, reliable: false, losable: false });
                            }
                        }
                    }
                }
                if cfg.byzantine.fake_receive {
                    for m in 0..self.alphabet {
                        for b in (0..n).map(AgentId::from).filter(|&b| b != a) {
                            if !fake_recv[slot(a, m, b)] && pick(ch, ChoiceKind::FakeReceive, 2)? == 1 {
                                fake_recv[slot(a, m, b)] = true;
                                let l = Label::Receive { msg: MessageId(m as u8), from: b };
                                out.push(a, Occurrence::fake(l));
                            }
                        }
                    }
                }
            }
            if flights.len() > cfg.caps.max_in_flight {
                return Err(Stop::InFlightCap);
            }

            out.normalize();
            for (ai, h) in histories.iter_mut().enumerate() {
                h.push_round(out.record_of(AgentId::from(ai)));
            }
            run = run.append_round(out).expect("generator respects the run invariants");
        }

        if cfg.delivery.mode == DeliveryMode::DeliverByHorizon {
            let correct_at_end = |a: AgentId| faulty_from[a.index()] > horizon;
            if flights.iter().any(|fl| fl.reliable && correct_at_end(fl.env.to)) {
                return Err(Stop::Pruned);
            }
            for ai in 0..n {
                let a = AgentId::from(ai);
                let ctx = DecisionContext { agent: a, n, f: cfg.f };
                if correct_at_end(a) && !self.proto.decide(&ctx, &histories[ai]).is_noop() {
                    return Err(Stop::Pruned);
                }
            }
        }
        Ok(run)
    }

    fn twins_allowed(&self) -> bool {
        self.cfg.twins
            && self.cfg.f >= 1
            && (0..self.cfg.n).all(|i| {
                let ctx = DecisionContext { agent: AgentId::from(i), n: self.cfg.n, f: self.cfg.f };
                self.proto.decide(&ctx, &LocalHistory::default()).is_noop()
            })
    }
}

/// Whether twins would be added for this protocol and configuration.
pub fn twins_supported(proto: &dyn Protocol, cfg: &AdversaryConfig) -> bool {
    Generator::new(proto, cfg).is_ok_and(|g| g.twins_allowed())
}

/// Enumerates every run; fails with [`EnumError::CapExceeded`] when the
/// distinct run count would exceed `caps.max_runs`.
pub fn enumerate_runs(proto: &dyn Protocol, cfg: &AdversaryConfig) -> Result<RunSet, EnumError> {
    let set = enumerate_runs_partial(proto, cfg)?;
    if set.truncated {
        return Err(EnumError::CapExceeded {
            cap: CapKind::MaxRuns,
            limit: cfg.caps.max_runs,
            partial: set.len(),
        });
    }
    Ok(set)
}

/// Like [`enumerate_runs`], but returns the runs found up to the cap with
/// `truncated` set instead of failing.
pub fn enumerate_runs_partial(proto: &dyn Protocol, cfg: &AdversaryConfig) -> Result<RunSet, EnumError> {
    let mut parts = Vec::new();
    for k in 0..subtree_count(proto, cfg)? {
        let part = enumerate_subtree(proto, cfg, k)?;
        let full = part.truncated;
        parts.push(part);
        if full {
            break;
        }
    }
    merge_subtrees(proto, cfg, parts)
}

/// The choice tree splits at the root into one subtree per (fault plan,
/// START plan) pair. Subtrees can be enumerated independently and merged in
/// index order with the same result as a single walk.
pub fn subtree_count(proto: &dyn Protocol, cfg: &AdversaryConfig) -> Result<usize, EnumError> {
    let gen = Generator::new(proto, cfg)?;
    Ok(gen.fault_plans.len() * gen.start_plans.len())
}

/// Distinct runs of one root subtree, capped at `caps.max_runs`. No twins.
pub fn enumerate_subtree(proto: &dyn Protocol, cfg: &AdversaryConfig, index: usize) -> Result<RunSet, EnumError> {
    let gen = Generator::new(proto, cfg)?;
    let (fp, sp) = (index / gen.start_plans.len(), index % gen.start_plans.len());
    if fp >= gen.fault_plans.len() {
        return Err(EnumError::ConfigInvalid(String::from("subtree index out of range")));
    }
    let mut dfs = DfsChooser::default();
    for (kind, i, arity) in [
        (ChoiceKind::FaultPlan, fp, gen.fault_plans.len()),
        (ChoiceKind::StartPlan, sp, gen.start_plans.len()),
    ] {
        if arity > 1 {
            dfs.stack.push(Frame { kind, index: i, arity });
        }
    }
    let floor = dfs.stack.len();
    let mut set = RunSet::default();
    loop {
        dfs.depth = 0;
        let res = gen.generate(&mut dfs);
        set.stats.leaves += 1;
        match res {
            Ok(run) => {
                if set.contains(&run).is_some() {
                    set.stats.duplicates += 1;
                } else if set.len() == cfg.caps.max_runs {
                    set.truncated = true;
                    break;
                } else {
                    set.insert(run, RunOrigin::Choices(dfs.log()));
                }
            }
            Err(Stop::Pruned) => set.stats.pruned += 1,
            Err(Stop::InFlightCap) => {
                return Err(EnumError::CapExceeded {
                    cap: CapKind::MaxInFlight,
                    limit: cfg.caps.max_in_flight,
                    partial: set.len(),
                })
            }
            Err(Stop::Replay(at)) => return Err(EnumError::ReplayMismatch { at }),
        }
        if !dfs.advance(floor) {
            break;
        }
    }
    Ok(set)
}

/// Concatenates subtrees in order, dropping duplicates, applying the run cap
/// and adding twins.
pub fn merge_subtrees(
    proto: &dyn Protocol,
    cfg: &AdversaryConfig,
    parts: impl IntoIterator<Item = RunSet>,
) -> Result<RunSet, EnumError> {
    let gen = Generator::new(proto, cfg)?;
    let mut set = RunSet::default();
    'parts: for part in parts {
        set.stats.leaves += part.stats.leaves;
        set.stats.pruned += part.stats.pruned;
        set.stats.duplicates += part.stats.duplicates;
        set.truncated |= part.truncated;
        for (run, origin) in part.runs.into_iter().zip(part.origins) {
            if set.contains(&run).is_some() {
                set.stats.duplicates += 1;
            } else if set.len() == cfg.caps.max_runs {
                set.truncated = true;
                break 'parts;
            } else {
                set.insert(run, origin);
            }
        }
    }
    if gen.twins_allowed() && !set.truncated {
        set.add_twins();
    }
    Ok(set)
}

/// Draws up to `count` distinct runs with seeded random choices.
pub fn sample_runs(
    proto: &dyn Protocol,
    cfg: &AdversaryConfig,
    seed: u64,
    count: usize,
) -> Result<RunSet, EnumError> {
    let gen = Generator::new(proto, cfg)?;
    let mut rc = RandomChooser { rng: ChaCha8Rng::seed_from_u64(seed), log: Vec::new() };
    let mut set = RunSet::default();
    let budget = count.max(1).saturating_mul(64);
    for _ in 0..budget {
        if set.len() >= count {
            break;
        }
        rc.log.clear();
        set.stats.leaves += 1;
        match gen.generate(&mut rc) {
            Ok(run) => {
                let (_, new) = set.insert(run, RunOrigin::Choices(ChoiceLog(rc.log.clone())));
                if !new {
                    set.stats.duplicates += 1;
                }
            }
            Err(Stop::Pruned) => set.stats.pruned += 1,
            Err(Stop::InFlightCap) => {
                return Err(EnumError::CapExceeded {
                    cap: CapKind::MaxInFlight,
                    limit: cfg.caps.max_in_flight,
                    partial: set.len(),
                })
            }
            Err(Stop::Replay(at)) => return Err(EnumError::ReplayMismatch { at }),
        }
    }
    if gen.twins_allowed() {
        set.add_twins();
    }
    Ok(set)
}

/// Regenerates the run a choice log describes.
pub fn replay(proto: &dyn Protocol, cfg: &AdversaryConfig, log: &ChoiceLog) -> Result<Run, EnumError> {
    let gen = Generator::new(proto, cfg)?;
    let mut ch = ReplayChooser { log, pos: 0 };
    match gen.generate(&mut ch) {
        Ok(run) if ch.pos == log.0.len() => Ok(run),
        Ok(_) => Err(EnumError::ReplayMismatch { at: ch.pos }),
        Err(Stop::Replay(at)) => Err(EnumError::ReplayMismatch { at }),
        Err(_) => Err(EnumError::ReplayMismatch { at: ch.pos }),
    }
}

/// Regenerates run `k` of a run set from its origin.
pub fn replay_origin(
    proto: &dyn Protocol,
    cfg: &AdversaryConfig,
    set: &RunSet,
    k: usize,
) -> Result<Run, EnumError> {
    match &set.origins[k] {
        RunOrigin::Choices(log) => replay(proto, cfg, log),
        RunOrigin::Twin { of, agent } => {
            let base = replay_origin(proto, cfg, set, *of as usize)?;
            vat_twin(&base, *agent).ok_or(EnumError::ReplayMismatch { at: 0 })
        }
        RunOrigin::Pinned => Ok(set.runs[k].clone()),
    }
}

/// Returns the agent `i` if `phi` is `correct(i) & !start` (either order).
pub fn persistence_subject(phi: &Formula) -> Option<AgentId> {
    let Formula::And(a, b) = phi else { return None };
    let not_start = |f: &Formula| matches!(f, Formula::Not(x) if **x == Formula::Atom(Atom::StartAny));
    match (&**a, &**b) {
        (Formula::Atom(Atom::Correct(i)), other) | (other, Formula::Atom(Atom::Correct(i)))
            if not_start(other) =>
        {
            Some(*i)
        }
        _ => None,
    }
}

/// Adjusts `cfg` so that `correct(i) & !start` becomes potentially
/// persistent in the generated system.
///
/// `start` becomes true at the step a START is recorded, so the only
/// continuation that keeps it false forever makes the recipient faulty in
/// the START round itself. The closure therefore never gives START to `i`,
/// allows START-free runs, lets every START recipient fail in each START
/// round, and keeps the START count within the fault budget. No other fault
/// onsets remain, so the budget is always available.
pub fn potential_persistence_closure(
    cfg: &AdversaryConfig,
    phi: &Formula,
) -> Result<AdversaryConfig, EnumError> {
    let i = persistence_subject(phi).ok_or(EnumError::UnsupportedFormula)?;
    let mut out = cfg.clone();
    let mut agents = cfg.start_agents();
    agents.retain(|&a| a != i);
    out.start.agents = agents.clone();
    out.start.min_starts = 0;
    out.start.max_starts = Some(cfg.start.max_starts.unwrap_or(cfg.f).min(cfg.f));
    let mut onsets: Vec<Onset> = cfg
        .start
        .rounds
        .iter()
        .filter(|&&r| r < cfg.horizon)
        .map(|&r| Onset::Round(r))
        .collect();
    onsets.sort();
    onsets.dedup();
    out.faults.agents = agents;
    out.faults.onsets = onsets;
    out.faults.min_faulty = 0;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{echo_frr, mutual_hope_trigger, naive_relay, silent};

    #[test]
    fn subsets_in_order() {
        let s = subsets(&[1, 2, 3], 1, 2);
        assert_eq!(s, vec![vec![1], vec![2], vec![3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(subsets(&[1, 2], 0, 0), vec![Vec::<i32>::new()]);
    }

    #[test]
    fn single_agent_stutter() {
        let mut cfg = AdversaryConfig::new(1, 0, 2);
        cfg.start.rounds.clear();
        let set = enumerate_runs(&*echo_frr(0), &cfg).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set.runs[0].rounds.iter().all(RoundOutcome::is_empty));
    }

    #[test]
    fn delivery_choices_multiply() {
        // Agent 0 starts and notifies 1 and 2; each message may arrive in
        // round 2 or 3. Nobody else acts because two notifications are needed.
        let mut cfg = AdversaryConfig::new(3, 1, 5);
        cfg.start = StartConfig { agents: vec![AgentId(0)], rounds: vec![0], min_starts: 1, max_starts: Some(1) };
        cfg.faults.onsets.clear();
        cfg.twins = false;
        let set = enumerate_runs(&*mutual_hope_trigger(), &cfg).unwrap();
        assert_eq!(set.len(), 4);
        assert_eq!(set.stats.pruned, 0);
    }

    #[test]
    fn replay_reproduces_every_run() {
        let mut cfg = AdversaryConfig::new(3, 1, 3);
        cfg.byzantine = ByzantineMenu { fake_send: true, omit_send: true, fake_start_record: true, fake_receive: true };
        let proto = naive_relay();
        let set = enumerate_runs(&*proto, &cfg).unwrap();
        assert!(set.len() > 10);
        for k in 0..set.len() {
            assert_eq!(replay_origin(&*proto, &cfg, &set, k).unwrap(), set.runs[k]);
        }
        let mut log = match &set.origins[3] {
            RunOrigin::Choices(l) => l.clone(),
            _ => unreachable!(),
        };
        log.0.push(Choice { kind: ChoiceKind::Deliver, index: 0, arity: 2 });
        assert!(matches!(replay(&*proto, &cfg, &log), Err(EnumError::ReplayMismatch { .. })));
    }

    #[test]
    fn budget_and_liveness_hold() {
        let mut cfg = AdversaryConfig::new(3, 1, 5);
        cfg.faults.onsets = vec![Onset::Initial, Onset::Round(1)];
        cfg.byzantine.fake_send = true;
        let set = enumerate_runs(&*echo_frr(1), &cfg).unwrap();
        for r in &set.runs {
            let faulty = r.agents().filter(|&a| r.faulty_from(a).is_some()).count();
            assert!(faulty <= 1);
            for e in r.in_flight_at(r.horizon) {
                let sender_ok = r.is_correct(e.from, e.sent + 1);
                assert!(!sender_ok || !r.is_correct(e.to, r.horizon), "undelivered {e:?}");
            }
        }
    }

    #[test]
    fn run_cap() {
        let mut cfg = AdversaryConfig::new(3, 1, 5);
        cfg.caps.max_runs = 3;
        let err = enumerate_runs(&*echo_frr(1), &cfg).unwrap_err();
        assert_eq!(err, EnumError::CapExceeded { cap: CapKind::MaxRuns, limit: 3, partial: 3 });
        let part = enumerate_runs_partial(&*echo_frr(1), &cfg).unwrap();
        assert!(part.truncated);
    }

    #[test]
    fn sampling_is_a_deterministic_subset() {
        let mut cfg = AdversaryConfig::new(3, 1, 4);
        cfg.byzantine.fake_send = true;
        let proto = naive_relay();
        let all = enumerate_runs(&*proto, &cfg).unwrap();
        let a = sample_runs(&*proto, &cfg, 7, 20).unwrap();
        let b = sample_runs(&*proto, &cfg, 7, 20).unwrap();
        assert_eq!(a.runs, b.runs);
        for r in &a.runs {
            assert!(all.contains(r).is_some());
        }
    }

    #[test]
    fn twins_need_a_silent_protocol_start() {
        let cfg = AdversaryConfig::new(2, 1, 3);
        assert!(twins_supported(&*silent(), &cfg));
        let mut no_f = cfg.clone();
        no_f.f = 0;
        assert!(!twins_supported(&*silent(), &no_f));
    }

    #[test]
    fn closure_is_idempotent_and_rejects_other_formulas() {
        use crate::formula::{and, correct, not, start};
        let mut cfg = AdversaryConfig::new(3, 1, 4);
        cfg.start.min_starts = 1;
        let phi = and(correct(AgentId(0)), not(start()));
        let once = potential_persistence_closure(&cfg, &phi).unwrap();
        assert_eq!(once.start.min_starts, 0);
        assert_eq!(potential_persistence_closure(&once, &phi).unwrap(), once);
        assert_eq!(
            potential_persistence_closure(&cfg, &start()),
            Err(EnumError::UnsupportedFormula)
        );
    }

    #[test]
    fn pin_front_moves_existing_run() {
        let cfg = AdversaryConfig::new(2, 1, 3);
        let mut set = enumerate_runs(&*naive_relay(), &cfg).unwrap();
        let before = set.len();
        let target = set.runs[2].clone();
        set.pin_front(target.clone(), true);
        assert_eq!(set.len(), before);
        assert_eq!(set.runs[0], target);
        for (k, o) in set.origins.iter().enumerate() {
            if let RunOrigin::Twin { of, agent } = o {
                assert_eq!(vat_twin(&set.runs[*of as usize], *agent).as_ref(), Some(&set.runs[k]));
            }
        }
    }
}
