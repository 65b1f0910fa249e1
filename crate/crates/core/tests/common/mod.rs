//! Shared helpers: random small systems and a slow reference semantics that
//! reads everything straight off the run log.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rebelfire_core::enumerate::{sample_runs, ByzantineMenu, DeliveryMode, Onset};
use rebelfire_core::formula::*;
use rebelfire_core::protocol::{by_name, PROTOCOL_NAMES};
use rebelfire_core::*;

pub struct Sys {
    pub protocol: &'static str,
    pub cfg: AdversaryConfig,
    pub set: RunSet,
    pub sys: InterpretedSystem,
}

/// A small random configuration and a sample of its runs, twins included.
pub fn random_system(seed: u64) -> Sys {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let protocol = PROTOCOL_NAMES[rng.gen_range(0..PROTOCOL_NAMES.len())];
    let n = rng.gen_range(1..=3);
    let f = if n == 1 { 0 } else { rng.gen_range(0..=1) };
    let horizon = rng.gen_range(2..=4);
    let mut cfg = AdversaryConfig::new(n, f, horizon);
    cfg.start.rounds = if rng.gen_bool(0.5) { vec![0] } else { vec![0, 1] };
    cfg.faults.onsets = if rng.gen_bool(0.5) { vec![Onset::Initial] } else { vec![Onset::Initial, Onset::Round(1)] };
    cfg.byzantine = ByzantineMenu {
        fake_start_record: rng.gen_bool(0.5),
        fake_send: rng.gen_bool(0.5),
        omit_send: rng.gen_bool(0.5),
        fake_receive: rng.gen_bool(0.3),
    };
    cfg.delivery.max_delay = rng.gen_range(1..=2);
    if rng.gen_bool(0.3) {
        cfg.delivery.mode = DeliveryMode::AllowLoss;
    }
    let proto = by_name(protocol, f).unwrap();
    let set = sample_runs(&*proto, &cfg, rng.gen(), 10).unwrap();
    let sys = build_system(set.runs.clone(), n, f, horizon).unwrap();
    Sys { protocol, cfg, set, sys }
}

pub fn random_formula(rng: &mut ChaCha8Rng, n: usize, depth: u32) -> Formula {
    let agent = |rng: &mut ChaCha8Rng| AgentId::from(rng.gen_range(0..n));
    if depth == 0 || rng.gen_bool(0.25) {
        return match rng.gen_range(0..9) {
            0 => Formula::True,
            1 => correct(agent(rng)),
            2 => occurred(agent(rng), Event::Start),
            3 => occurred(agent(rng), Event::Fire),
            4 => start(),
            5 => start_of(agent(rng)),
            6 => fire(),
            7 => fire_of(agent(rng)),
            _ => Formula::False,
        };
    }
    let d = depth - 1;
    match rng.gen_range(0..16) {
        0 => not(random_formula(rng, n, d)),
        1 => and(random_formula(rng, n, d), random_formula(rng, n, d)),
        2 => or(random_formula(rng, n, d), random_formula(rng, n, d)),
        3 => implies(random_formula(rng, n, d), random_formula(rng, n, d)),
        4 => k(agent(rng), random_formula(rng, n, d)),
        5 => b(agent(rng), random_formula(rng, n, d)),
        6 => h(agent(rng), random_formula(rng, n, d)),
        7 => y(random_formula(rng, n, d)),
        8 => eventually(random_formula(rng, n, d)),
        9 => always(random_formula(rng, n, d)),
        10 => mutual_b(random_formula(rng, n, d)),
        11 => mutual_h(random_formula(rng, n, d)),
        12 => eventual_mutual_b(random_formula(rng, n, d)),
        13 => eventual_mutual_h(random_formula(rng, n, d)),
        14 => eventual_common_hope(random_formula(rng, n, d)),
        _ => iff(random_formula(rng, n, d), random_formula(rng, n, d)),
    }
}

/// Reference semantics over raw runs. Extensions are indexed like
/// [`InterpretedSystem::point_index`].
pub struct Oracle<'a> {
    pub runs: &'a [Run],
    pub n: usize,
    pub horizon: u32,
    histories: Vec<Vec<Vec<Vec<Label>>>>,
}

impl<'a> Oracle<'a> {
    pub fn new(runs: &'a [Run], n: usize, horizon: u32) -> Self {
        let mut histories = vec![Vec::new(); n];
        for (i, hs) in histories.iter_mut().enumerate() {
            for r in runs {
                for t in 0..=horizon {
                    hs.push(raw_history(r, AgentId::from(i), t));
                }
            }
        }
        Oracle { runs, n, horizon, histories }
    }

    pub fn len(&self) -> usize {
        self.runs.len() * (self.horizon as usize + 1)
    }

    fn at(&self, p: usize) -> (&Run, u32) {
        let w = self.horizon as usize + 1;
        (&self.runs[p / w], (p % w) as u32)
    }

    pub fn correct(&self, i: AgentId, p: usize) -> bool {
        let (r, t) = self.at(p);
        !r.initially_faulty.contains(&i)
            && !r.rounds[..t as usize]
                .iter()
                .any(|ro| ro.occurrences.iter().any(|&(a, o)| a == i && o.label == Label::BecomeFaulty))
    }

    fn genuine(&self, i: AgentId, label: Label, p: usize) -> bool {
        let (r, t) = self.at(p);
        r.rounds[..t as usize]
            .iter()
            .any(|ro| ro.occurrences.iter().any(|&(a, o)| a == i && o.label == label && o.genuine))
    }

    pub fn same_history(&self, i: AgentId, p: usize, q: usize) -> bool {
        self.histories[i.index()][p] == self.histories[i.index()][q]
    }

    pub fn extension(&self, f: &Formula) -> Vec<bool> {
        let len = self.len();
        let w = self.horizon as usize + 1;
        let pts = 0..len;
        let agents = || (0..self.n).map(AgentId::from);
        use Formula as X;
        match f {
            X::True => vec![true; len],
            X::False => vec![false; len],
            X::Atom(a) => match *a {
                Atom::Correct(i) => pts.map(|p| self.correct(i, p)).collect(),
                Atom::Occurred(i, e) => pts.map(|p| self.genuine(i, label(e), p)).collect(),
                Atom::OccurredAny(e) => pts.map(|p| agents().any(|i| self.genuine(i, label(e), p))).collect(),
                Atom::Start(i) => pts
                    .map(|p| self.genuine(i, Label::Start, p) && self.correct(i, p))
                    .collect(),
                Atom::StartAny => self.extension(&any(agents().map(start_of))),
                Atom::Fire(i) => pts.map(|p| self.genuine(i, Label::Fire, p) && self.correct(i, p)).collect(),
                Atom::FireAny => self.extension(&any(agents().map(fire_of))),
            },
            X::Not(a) => self.extension(a).into_iter().map(|v| !v).collect(),
            X::And(a, c) => zip(self.extension(a), self.extension(c), |x, y| x && y),
            X::Or(a, c) => zip(self.extension(a), self.extension(c), |x, y| x || y),
            X::Implies(a, c) => zip(self.extension(a), self.extension(c), |x, y| !x || y),
            X::K(i, a) => {
                let e = self.extension(a);
                pts.map(|p| (0..len).all(|q| !self.same_history(*i, p, q) || e[q])).collect()
            }
            X::Y(a) => {
                let e = self.extension(a);
                pts.map(|p| p % w > 0 && e[p - 1]).collect()
            }
            X::Eventually(a) => {
                let e = self.extension(a);
                pts.map(|p| (p..(p / w + 1) * w).any(|q| e[q])).collect()
            }
            X::Always(a) => {
                let e = self.extension(a);
                pts.map(|p| (p..(p / w + 1) * w).all(|q| e[q])).collect()
            }
            X::B(i, a) => self.extension(&k(*i, implies(correct(*i), (**a).clone()))),
            X::H(i, a) => self.extension(&implies(correct(*i), b(*i, (**a).clone()))),
            X::MutualB(a) => self.extension(&all(agents().map(|j| b(j, (**a).clone())))),
            X::MutualH(a) => self.extension(&all(agents().map(|j| h(j, (**a).clone())))),
            X::EventualMutualB(a) => self.extension(&all(agents().map(|j| eventually(b(j, (**a).clone()))))),
            X::EventualMutualH(a) => self.extension(&all(agents().map(|j| eventually(h(j, (**a).clone()))))),
            X::EventualCommonHope(a) => self.common_hope(a).0,
        }
    }

    /// Greatest fixpoint by Kleene iteration from the full set, with the
    /// number of strictly shrinking steps.
    pub fn common_hope(&self, phi: &Formula) -> (Vec<bool>, usize) {
        let len = self.len();
        let w = self.horizon as usize + 1;
        let base = self.extension(phi);
        let mut x = vec![true; len];
        let mut steps = 0;
        loop {
            let inner: Vec<bool> = (0..len).map(|p| base[p] && x[p]).collect();
            let next: Vec<bool> = (0..len)
                .map(|p| {
                    (0..self.n).map(AgentId::from).all(|i| {
                        (p..(p / w + 1) * w).any(|q| {
                            
                            !self.correct(i, q)
                                || (0..len).all(|s| !self.same_history(i, q, s) || !self.correct(i, s) || inner[s])
                        })
                    })
                })
                .collect();
            if next == x {
                return (x, steps);
            }
            x = next;
            steps += 1;
        }
    }
}

fn label(e: Event) -> Label {
    match e {
        Event::Start => Label::Start,
        Event::Fire => Label::Fire,
    }
}

fn zip(a: Vec<bool>, b: Vec<bool>, op: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect()
}

fn raw_history(r: &Run, i: AgentId, t: u32) -> Vec<Vec<Label>> {
    let mut out = Vec::new();
    for ro in &r.rounds[..t as usize] {
        let mut rec: Vec<Label> = ro
            .occurrences
            .iter()
            .filter(|&&(a, o)| a == i && o.label != Label::BecomeFaulty)
            .map(|&(_, o)| o.label)
            .collect();
        rec.sort();
        rec.dedup();
        if !rec.is_empty() {
            out.push(rec);
        }
    }
    out
}

pub fn to_bits(s: &PointSet) -> Vec<bool> {
    (0..s.universe()).map(|i| s.contains(i)).collect()
}
