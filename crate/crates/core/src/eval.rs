//! Model checking over a frozen [`InterpretedSystem`].
//!
//! [`Evaluator`] computes whole extensions bottom-up on bitsets and memoizes
//! them by formula. [`eval`] is a separate pointwise implementation that
//! follows the truth clauses literally; the two are cross-checked in tests.

use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::formula::{Atom, Event, Formula};
use crate::model::AgentId;
use crate::pointset::PointSet;
use crate::system::{InterpretedSystem, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Validity {
    Valid,
    /// First failing point in `(run, t)` order.
    Counterexample(Point),
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }
}

/// Result of a greatest-fixpoint computation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fixpoint {
    pub set: PointSet,
    /// Number of sweeps that strictly shrank the candidate set.
    pub iterations: usize,
}

pub struct Evaluator<'s> {
    sys: &'s InterpretedSystem,
    memo: HashMap<Formula, PointSet>,
    iterations: HashMap<Formula, usize>,
}

impl<'s> Evaluator<'s> {
    pub fn new(sys: &'s InterpretedSystem) -> Self {
        Evaluator { sys, memo: HashMap::new(), iterations: HashMap::new() }
    }

    pub fn system(&self) -> &'s InterpretedSystem {
        self.sys
    }

    fn len(&self) -> usize {
        self.sys.num_points()
    }

    pub fn holds(&mut self, p: Point, f: &Formula) -> bool {
        assert!(self.sys.is_valid_point(p), "point {p} outside the system");
        let idx = self.sys.point_index(p);
        self.extension(f).contains(idx)
    }

    pub fn check_valid(&mut self, f: &Formula) -> Validity {
        match self.extension(f).complement().first() {
            None => Validity::Valid,
            Some(i) => Validity::Counterexample(self.sys.point(i)),
        }
    }

    /// Set of points satisfying `f`.
    pub fn extension(&mut self, f: &Formula) -> PointSet {
        if let Some(s) = self.memo.get(f) {
            return s.clone();
        }
        if let Some(i) = f.max_agent() {
            assert!(i.index() < self.sys.n(), "formula mentions agent {i} but n = {}", self.sys.n());
        }
        let s = self.compute(f);
        self.memo.insert(f.clone(), s.clone());
        s
    }

    fn compute(&mut self, f: &Formula) -> PointSet {
        use Formula as X;
        let len = self.len();
        match f {
            X::True => PointSet::full(len),
            X::False => PointSet::empty(len),
            X::Atom(a) => self.atom(*a),
            X::Not(a) => self.extension(a).complement(),
            X::And(a, b) => self.extension(a).and(&self.extension(b)),
            X::Or(a, b) => self.extension(a).or(&self.extension(b)),
            X::Implies(a, b) => self.extension(a).implies(&self.extension(b)),
            X::K(i, a) => {
                let s = self.extension(a);
                self.knows_set(*i, &s)
            }
            X::Y(a) => {
                let s = self.extension(a);
                self.yesterday_set(&s)
            }
            X::Eventually(a) => {
                let s = self.extension(a);
                self.eventually_set(&s)
            }
            X::Always(a) => {
                let s = self.extension(a);
                self.always_set(&s)
            }
            X::B(i, a) => {
                let s = self.extension(a);
                self.believes_set(*i, &s)
            }
            X::H(i, a) => {
                let s = self.extension(a);
                self.hopes_set(*i, &s)
            }
            X::MutualB(a) => {
                let s = self.extension(a);
                self.all_agents(|ev, j| ev.believes_set(j, &s))
            }
            X::MutualH(a) => {
                let s = self.extension(a);
                self.all_agents(|ev, j| ev.hopes_set(j, &s))
            }
            X::EventualMutualB(a) => {
                let s = self.extension(a);
                self.all_agents(|ev, j| ev.eventually_set(&ev.believes_set(j, &s)))
            }
            X::EventualMutualH(a) => {
                let s = self.extension(a);
                self.eventual_mutual_hope_set(&s)
            }
            X::EventualCommonHope(a) => {
                let fp = self.gfp(a);
                self.iterations.insert((**a).clone(), fp.iterations);
                fp.set
            }
        }
    }

    fn atom(&self, a: Atom) -> PointSet {
        let sys = self.sys;
        // The record appears one step after the round it happened in, which
        // cancels the yesterday operator: start(i) holds once it is recorded.
        let start = |i: AgentId| sys.occurred_set(i, Event::Start).and(sys.correct_set(i));
        let fire = |i: AgentId| sys.occurred_set(i, Event::Fire).and(sys.correct_set(i));
        match a {
            Atom::Correct(i) => sys.correct_set(i).clone(),
            Atom::Occurred(i, e) => sys.occurred_set(i, e).clone(),
            Atom::OccurredAny(e) => self.any_agent(|j| sys.occurred_set(j, e).clone()),
            Atom::Start(i) => start(i),
            Atom::StartAny => self.any_agent(start),
            Atom::Fire(i) => fire(i),
            Atom::FireAny => self.any_agent(fire),
        }
    }

    fn any_agent(&self, mut f: impl FnMut(AgentId) -> PointSet) -> PointSet {
        self.sys
            .agents()
            .fold(PointSet::empty(self.len()), |acc, j| acc.or(&f(j)))
    }

    fn all_agents(&self, mut f: impl FnMut(&Self, AgentId) -> PointSet) -> PointSet {
        self.sys
            .agents()
            .fold(PointSet::full(self.len()), |acc, j| acc.and(&f(self, j)))
    }

    /// `K_i S`: points whose whole `i`-bucket lies in `s`.
    pub fn knows_set(&self, i: AgentId, s: &PointSet) -> PointSet {
        let sys = self.sys;
        let mut out = PointSet::empty(self.len());
        let mut seen = vec![false; sys.num_buckets(i)];
        for p in 0..self.len() {
            let b = sys.bucket(i, p);
            if seen[b as usize] {
                continue;
            }
            seen[b as usize] = true;
            let members = sys.bucket_members(i, b);
            if members.iter().all(|&q| s.contains(q as usize)) {
                for &q in members {
                    out.insert(q as usize);
                }
            }
        }
        out
    }

    /// `B_i S = K_i(correct(i) -> S)`
    pub fn believes_set(&self, i: AgentId, s: &PointSet) -> PointSet {
        self.knows_set(i, &self.sys.correct_set(i).implies(s))
    }

    /// `H_i S = correct(i) -> B_i S`
    pub fn hopes_set(&self, i: AgentId, s: &PointSet) -> PointSet {
        self.sys.correct_set(i).implies(&self.believes_set(i, s))
    }

    pub fn yesterday_set(&self, s: &PointSet) -> PointSet {
        let per = self.sys.horizon() as usize + 1;
        PointSet::from_fn(self.len(), |p| p % per != 0 && s.contains(p - 1))
    }

    /// Bounded `<>`: some time in `[t, horizon]`.
    pub fn eventually_set(&self, s: &PointSet) -> PointSet {
        self.sweep_back(s, false)
    }

    /// Bounded `[]`: every time in `[t, horizon]`.
    pub fn always_set(&self, s: &PointSet) -> PointSet {
        self.sweep_back(s, true)
    }

    fn sweep_back(&self, s: &PointSet, conj: bool) -> PointSet {
        let per = self.sys.horizon() as usize + 1;
        let mut out = PointSet::empty(self.len());
        for base in (0..self.len()).step_by(per) {
            let mut acc = conj;
            for p in (base..base + per).rev() {
                acc = if conj { acc && s.contains(p) } else { acc || s.contains(p) };
                out.set(p, acc);
            }
        }
        out
    }

    /// `E^<>H S`: every agent eventually hopes `S`.
    pub fn eventual_mutual_hope_set(&self, s: &PointSet) -> PointSet {
        self.all_agents(|ev, j| ev.eventually_set(&ev.hopes_set(j, s)))
    }

    fn gfp(&mut self, phi: &Formula) -> Fixpoint {
        let base = self.extension(phi);
        let mut x = PointSet::full(self.len());
        let mut iterations = 0;
        loop {
            let next = self.eventual_mutual_hope_set(&base.and(&x));
            debug_assert!(next.is_subset(&x));
            if next == x {
                return Fixpoint { set: x, iterations };
            }
            x = next;
            iterations += 1;
        }
    }

    /// Greatest fixpoint of `X = E^<>H(phi & X)`, computed downward from the
    /// full point set.
    pub fn eventual_common_hope(&mut self, phi: &Formula) -> Fixpoint {
        let key = Formula::EventualCommonHope(alloc::boxed::Box::new(phi.clone()));
        let set = self.extension(&key);
        let iterations = self.iterations.get(phi).copied().unwrap_or(0);
        Fixpoint { set, iterations }
    }

    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }
}

/// Pointwise truth following the semantic clauses directly, with no
/// memoization except for eventual common hope.
pub fn eval(sys: &InterpretedSystem, p: Point, f: &Formula) -> bool {
    assert!(sys.is_valid_point(p), "point {p} outside the system");
    let desugared = f.desugar(sys.n());
    let mut pe = PointEvaluator { sys, cdh: Vec::new() };
    pe.holds(sys.point_index(p), &desugared)
}

pub fn check_valid(sys: &InterpretedSystem, f: &Formula) -> Validity {
    Evaluator::new(sys).check_valid(f)
}

struct PointEvaluator<'s> {
    sys: &'s InterpretedSystem,
    cdh: Vec<(Formula, Vec<bool>)>,
}

impl PointEvaluator<'_> {
    fn holds(&mut self, p: usize, f: &Formula) -> bool {
        use Formula as X;
        let sys = self.sys;
        let pt = sys.point(p);
        match f {
            X::True => true,
            X::False => false,
            X::Atom(Atom::Correct(i)) => sys.correct_set(*i).contains(p),
            X::Atom(Atom::Occurred(i, e)) => sys.occurred_set(*i, *e).contains(p),
            X::Atom(_) => unreachable!("derived atoms are desugared"),
            X::Not(a) => !self.holds(p, a),
            X::And(a, b) => self.holds(p, a) && self.holds(p, b),
            X::Or(a, b) => self.holds(p, a) || self.holds(p, b),
            X::Implies(a, b) => !self.holds(p, a) || self.holds(p, b),
            X::K(i, a) => {
                let members = sys.indistinguishable(*i, p);
                members.iter().all(|&q| self.holds(q as usize, a))
            }
            X::Y(a) => pt.t > 0 && self.holds(p - 1, a),
            X::Eventually(a) => (pt.t..=sys.horizon()).any(|t| self.holds(p - pt.t as usize + t as usize, a)),
            X::Always(a) => (pt.t..=sys.horizon()).all(|t| self.holds(p - pt.t as usize + t as usize, a)),
            X::EventualCommonHope(a) => self.common_hope(a)[p],
            _ => unreachable!("abbreviations are desugared"),
        }
    }

    fn common_hope(&mut self, phi: &Formula) -> &[bool] {
        if let Some(k) = self.cdh.iter().position(|(g, _)| g == phi) {
            return &self.cdh[k].1;
        }
        let sys = self.sys;
        let len = sys.num_points();
        let per = sys.horizon() as usize + 1;
        let base: Vec<bool> = (0..len).map(|p| self.holds(p, phi)).collect();
        let mut x = vec![true; len];
        loop {
            let target: Vec<bool> = (0..len).map(|q| base[q] && x[q]).collect();
            let hope = |j: AgentId, q: usize| {
                let cj = sys.correct_set(j);
                !cj.contains(q)
                    || sys
                        .indistinguishable(j, q)
                        .iter()
                        .all(|&q2| !cj.contains(q2 as usize) || target[q2 as usize])
            };
            let next: Vec<bool> = (0..len)
                .map(|p| {
                    let start = p - p % per;
                    sys.agents().all(|j| (p..start + per).any(|q| hope(j, q)))
                })
                .collect();
            if next == x {
                break;
            }
            x = next;
        }
        self.cdh.push((phi.clone(), x));
        &self.cdh.last().unwrap().1
    }
}
