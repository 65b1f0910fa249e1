//! Frozen interpreted systems: a run set plus the per-agent
//! indistinguishability index.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::hash::BuildHasher;

use hashbrown::hash_table::{Entry, HashTable};
use hashbrown::DefaultHashBuilder;
use thiserror::Error;

use crate::formula::Event;
use crate::model::{AgentId, Label, LocalHistory, RoundRecord, Run};
use crate::pointset::PointSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Point {
    pub run: u32,
    pub t: u32,
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(r{}, {})", self.run, self.t)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum SystemError {
    #[error("run {run} has parameters (n={n}, f={f}, horizon={horizon}) that differ from the system")]
    HeterogeneousRuns { run: usize, n: usize, f: usize, horizon: u32 },
    #[error("run {run} stops at time {len} before the horizon {horizon}")]
    IncompleteRun { run: usize, len: u32, horizon: u32 },
    #[error("a system needs at least one agent")]
    NoAgents,
}

const NO_PARENT: u32 = u32::MAX;

/// Per-agent trie of canonical histories. Node 0 is the empty history.
#[derive(Clone, Debug)]
struct HistoryIndex {
    nodes: Vec<(u32, RoundRecord)>,
    table: HashTable<u32>,
    /// Node id of every point.
    of_point: Vec<u32>,
    /// CSR: members of node `b` are `members[offsets[b]..offsets[b+1]]`.
    offsets: Vec<u32>,
    members: Vec<u32>,
}

impl HistoryIndex {
    fn new(points: usize) -> Self {
        HistoryIndex {
            nodes: vec![(NO_PARENT, Vec::new())],
            table: HashTable::new(),
            of_point: vec![0; points],
            offsets: Vec::new(),
            members: Vec::new(),
        }
    }

    fn child(&mut self, hasher: &DefaultHashBuilder, parent: u32, record: RoundRecord) -> u32 {
        if record.is_empty() {
            return parent;
        }
        let hash = hasher.hash_one((parent, &record));
        let nodes = &mut self.nodes;
        let entry = self.table.entry(
            hash,
            |&id| nodes[id as usize].0 == parent && nodes[id as usize].1 == record,
            |&id| hasher.hash_one((nodes[id as usize].0, &nodes[id as usize].1)),
        );
        match entry {
            Entry::Occupied(e) => *e.get(),
            Entry::Vacant(e) => {
                let id = nodes.len() as u32;
                nodes.push((parent, record));
                e.insert(id);
                id
            }
        }
    }

    fn finish(&mut self) {
        let buckets = self.nodes.len();
        let mut counts = vec![0u32; buckets + 1];
        for &b in &self.of_point {
            counts[b as usize + 1] += 1;
        }
        for i in 1..=buckets {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        self.members = vec![0; self.of_point.len()];
        for (p, &b) in self.of_point.iter().enumerate() {
            let slot = &mut fill[b as usize];
            self.members[*slot as usize] = p as u32;
            *slot += 1;
        }
        self.offsets = counts;
        self.table = HashTable::new();
    }

    fn decode(&self, mut node: u32) -> LocalHistory {
        let mut rounds = Vec::new();
        while node != 0 {
            let (parent, record) = &self.nodes[node as usize];
            rounds.push(record.clone());
            node = *parent;
        }
        rounds.reverse();
        LocalHistory { rounds }
    }
}

/// Interned global-state prefixes: two points share an id iff their global
/// states coincide. Nodes point back into the run set instead of copying.
struct PrefixInterner<'a> {
    runs: &'a [Run],
    nodes: Vec<(u32, u32, u32)>,
    table: HashTable<u32>,
    hasher: DefaultHashBuilder,
}

impl PrefixInterner<'_> {
    fn key_hash(&self, parent: u32, run: u32, round: u32) -> u64 {
        let r = &self.runs[run as usize];
        if parent == NO_PARENT {
            self.hasher.hash_one(&r.initially_faulty)
        } else {
            self.hasher.hash_one((parent, &r.rounds[round as usize]))
        }
    }

    fn same(&self, a: (u32, u32, u32), b: (u32, u32, u32)) -> bool {
        let (ra, rb) = (&self.runs[a.1 as usize], &self.runs[b.1 as usize]);
        a.0 == b.0
            && if a.0 == NO_PARENT {
                ra.initially_faulty == rb.initially_faulty
            } else {
                ra.rounds[a.2 as usize] == rb.rounds[b.2 as usize]
            }
    }

    fn intern(&mut self, parent: u32, run: u32, round: u32) -> u32 {
        let key = (parent, run, round);
        let hash = self.key_hash(parent, run, round);
        if let Some(&id) = self.table.find(hash, |&id| self.same(self.nodes[id as usize], key)) {
            return id;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(key);
        let (runs, hasher, nodes) = (self.runs, &self.hasher, &self.nodes);
        self.table.insert_unique(hash, id, |&id| {
            let (p, r, k) = nodes[id as usize];
            let run = &runs[r as usize];
            if p == NO_PARENT {
                hasher.hash_one(&run.initially_faulty)
            } else {
                hasher.hash_one((p, &run.rounds[k as usize]))
            }
        });
        id
    }
}

#[derive(Clone, Debug)]
pub struct InterpretedSystem {
    runs: Vec<Run>,
    n: usize,
    f: usize,
    horizon: u32,
    index: Vec<HistoryIndex>,
    correct: Vec<PointSet>,
    occurred_start: Vec<PointSet>,
    occurred_fire: Vec<PointSet>,
    prefix: Vec<u32>,
}

pub fn build_system(
    runs: Vec<Run>,
    n: usize,
    f: usize,
    horizon: u32,
) -> Result<InterpretedSystem, SystemError> {
    InterpretedSystem::build(runs, n, f, horizon)
}

impl InterpretedSystem {
    pub fn build(runs: Vec<Run>, n: usize, f: usize, horizon: u32) -> Result<Self, SystemError> {
        if n == 0 {
            return Err(SystemError::NoAgents);
        }
        for (k, r) in runs.iter().enumerate() {
            if r.n() != n || r.f() != f || r.horizon != horizon {
                return Err(SystemError::HeterogeneousRuns {
                    run: k,
                    n: r.n(),
                    f: r.f(),
                    horizon: r.horizon,
                });
            }
            if !r.is_complete() {
                return Err(SystemError::IncompleteRun { run: k, len: r.len(), horizon });
            }
        }

        let per_run = horizon as usize + 1;
        let points = runs.len() * per_run;
        let hasher = DefaultHashBuilder::default();
        let mut index: Vec<HistoryIndex> = (0..n).map(|_| HistoryIndex::new(points)).collect();
        let mut correct = vec![PointSet::empty(points); n];
        let mut occurred_start = vec![PointSet::empty(points); n];
        let mut occurred_fire = vec![PointSet::empty(points); n];

        for (ri, run) in runs.iter().enumerate() {
            let base = ri * per_run;
            for (ai, idx) in index.iter_mut().enumerate() {
                let a = AgentId::from(ai);
                let faulty_from = run.faulty_from(a);
                let mut node = 0u32;
                let mut started = false;
                let mut fired = false;
                for t in 0..=horizon {
                    let p = base + t as usize;
                    if t > 0 {
                        let round = &run.rounds[t as usize - 1];
                        node = idx.child(&hasher, node, round.record_of(a));
                        for o in round.of(a).filter(|o| o.genuine) {
                            started |= o.label == Label::Start;
                            fired |= o.label == Label::Fire;
                        }
                    }
                    idx.of_point[p] = node;
                    correct[ai].set(p, faulty_from.is_none_or(|ft| t < ft));
                    occurred_start[ai].set(p, started);
                    occurred_fire[ai].set(p, fired);
                }
            }
        }
        for idx in &mut index {
            idx.finish();
        }

        let mut prefix = vec![0u32; points];
        {
            let mut interner = PrefixInterner {
                runs: &runs,
                nodes: Vec::new(),
                table: HashTable::new(),
                hasher,
            };
            for ri in 0..runs.len() {
                let mut id = interner.intern(NO_PARENT, ri as u32, 0);
                prefix[ri * per_run] = id;
                for t in 1..=horizon {
                    id = interner.intern(id, ri as u32, t - 1);
                    prefix[ri * per_run + t as usize] = id;
                }
            }
        }

        Ok(InterpretedSystem {
            runs,
            n,
            f,
            horizon,
            index,
            correct,
            occurred_start,
            occurred_fire,
            prefix,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn run(&self, k: u32) -> &Run {
        &self.runs[k as usize]
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> {
        (0..self.n).map(AgentId::from)
    }

    pub fn num_points(&self) -> usize {
        self.runs.len() * (self.horizon as usize + 1)
    }

    pub fn point_index(&self, p: Point) -> usize {
        p.run as usize * (self.horizon as usize + 1) + p.t as usize
    }

    pub fn point(&self, idx: usize) -> Point {
        let per = self.horizon as usize + 1;
        Point { run: (idx / per) as u32, t: (idx % per) as u32 }
    }

    pub fn is_valid_point(&self, p: Point) -> bool {
        (p.run as usize) < self.runs.len() && p.t <= self.horizon
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.num_points()).map(|i| self.point(i))
    }

    /// Bucket id of `agent`'s canonical history at point `idx`.
    pub fn bucket(&self, agent: AgentId, idx: usize) -> u32 {
        self.index[agent.index()].of_point[idx]
    }

    pub fn num_buckets(&self, agent: AgentId) -> usize {
        self.index[agent.index()].nodes.len()
    }

    /// All points sharing bucket `b`, ascending. Empty for tree nodes no
    /// point reaches.
    pub fn bucket_members(&self, agent: AgentId, b: u32) -> &[u32] {
        let idx = &self.index[agent.index()];
        &idx.members[idx.offsets[b as usize] as usize..idx.offsets[b as usize + 1] as usize]
    }

    /// Points indistinguishable from `idx` for `agent`.
    pub fn indistinguishable(&self, agent: AgentId, idx: usize) -> &[u32] {
        self.bucket_members(agent, self.bucket(agent, idx))
    }

    pub fn history(&self, agent: AgentId, b: u32) -> LocalHistory {
        self.index[agent.index()].decode(b)
    }

    pub fn history_at(&self, agent: AgentId, idx: usize) -> LocalHistory {
        self.history(agent, self.bucket(agent, idx))
    }

    pub fn correct_set(&self, agent: AgentId) -> &PointSet {
        &self.correct[agent.index()]
    }

    pub fn occurred_set(&self, agent: AgentId, e: Event) -> &PointSet {
        match e {
            Event::Start => &self.occurred_start[agent.index()],
            Event::Fire => &self.occurred_fire[agent.index()],
        }
    }

    /// Interned id of the global state at point `idx`.
    pub fn global_state_id(&self, idx: usize) -> u32 {
        self.prefix[idx]
    }
}
