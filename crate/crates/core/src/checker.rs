//! The FRR conditions and the knowledge results around them as checks over
//! one interpreted system.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::eval::{Evaluator, Validity};
use crate::formula::{
    all, and, any, b, correct, eventual_common_hope, eventual_mutual_b, eventual_mutual_h, eventually,
    fire, fire_of, h, iff, implies, k, not, occurred, start, start_of, y, Event, Formula,
};
use crate::model::{AgentId, LocalHistory};
use crate::system::{InterpretedSystem, Point};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PropertyId {
    C,
    U,
    R,
    Lemma6,
    Lemma7Eq5,
    Lemma9Eq6,
    Thm10,
    Thm14Eq7,
    Thm16_1,
    Thm16_2Eq8,
    Lemma18,
    Lemma19,
    Lemma21,
    Cor22,
    Lemma23,
    Cor24Eq9_10,
    Lemma26Eq10,
    FixpointAxiomEq1,
    BrainInVat,
    Remark12,
}

impl PropertyId {
    pub const ALL: [PropertyId; 20] = [
        PropertyId::C,
        PropertyId::U,
        PropertyId::R,
        PropertyId::Lemma6,
        PropertyId::Lemma7Eq5,
        PropertyId::Lemma9Eq6,
        PropertyId::Thm10,
        PropertyId::Thm14Eq7,
        PropertyId::Thm16_1,
        PropertyId::Thm16_2Eq8,
        PropertyId::Lemma18,
        PropertyId::Lemma19,
        PropertyId::Lemma21,
        PropertyId::Cor22,
        PropertyId::Lemma23,
        PropertyId::Cor24Eq9_10,
        PropertyId::Lemma26Eq10,
        PropertyId::FixpointAxiomEq1,
        PropertyId::BrainInVat,
        PropertyId::Remark12,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PropertyId::C => "C",
            PropertyId::U => "U",
            PropertyId::R => "R",
            PropertyId::Lemma6 => "Lemma6",
            PropertyId::Lemma7Eq5 => "Lemma7_Eq5",
            PropertyId::Lemma9Eq6 => "Lemma9_Eq6",
            PropertyId::Thm10 => "Thm10",
            PropertyId::Thm14Eq7 => "Thm14_Eq7",
            PropertyId::Thm16_1 => "Thm16_1",
            PropertyId::Thm16_2Eq8 => "Thm16_2_Eq8",
            PropertyId::Lemma18 => "Lemma18",
            PropertyId::Lemma19 => "Lemma19",
            PropertyId::Lemma21 => "Lemma21",
            PropertyId::Cor22 => "Cor22",
            PropertyId::Lemma23 => "Lemma23",
            PropertyId::Cor24Eq9_10 => "Cor24_Eq9_10",
            PropertyId::Lemma26Eq10 => "Lemma26_Eq10",
            PropertyId::FixpointAxiomEq1 => "FixpointAxiom_Eq1",
            PropertyId::BrainInVat => "BrainInVat",
            PropertyId::Remark12 => "Remark12",
        }
    }

    /// Case-insensitive lookup; an unambiguous prefix ending at a `_` also
    /// matches, so `Lemma7` and `Thm16_2` work.
    pub fn from_name(s: &str) -> Option<PropertyId> {
        let s = s.trim();
        if let Some(p) = PropertyId::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(s)) {
            return Some(p);
        }
        let mut heads = PropertyId::ALL
            .into_iter()
            .filter(|p| {
                let name = p.name();
                name.len() > s.len()
                    && name.as_bytes()[s.len()] == b'_'
                    && name[..s.len()].eq_ignore_ascii_case(s)
            });
        match (heads.next(), heads.next()) {
            (Some(p), None) => Some(p),
            _ => None,
        }
    }

    /// Properties whose `holds` verdict this one presupposes.
    pub fn prerequisites(self) -> &'static [PropertyId] {
        match self {
            PropertyId::Lemma7Eq5 => &[PropertyId::U],
            PropertyId::Lemma9Eq6 => &[PropertyId::R],
            PropertyId::Thm10 | PropertyId::Thm14Eq7 => &[PropertyId::U, PropertyId::R],
            PropertyId::Lemma26Eq10 => &[PropertyId::C],
            _ => &[],
        }
    }
}

impl fmt::Display for PropertyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Verdict {
    Holds,
    Violated,
    NotApplicable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::NotApplicable => "not-applicable",
        })
    }
}

/// Enough to tell which system a report is about.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Fingerprint {
    pub n: usize,
    pub f: usize,
    pub horizon: u32,
    pub protocol: String,
    pub menu: Vec<String>,
    pub run_count: usize,
    pub twins: bool,
    pub delivery: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BucketView {
    pub agent: AgentId,
    /// Up to [`BUCKET_LIMIT`] members, ascending.
    pub points: Vec<Point>,
    pub total: usize,
}

pub const BUCKET_LIMIT: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Witness {
    pub point: Point,
    /// The instance that fails (or, for witnesses of existence, holds) here.
    pub formula: String,
    pub histories: Vec<LocalHistory>,
    pub correct: Vec<bool>,
    /// Indistinguishability bucket of the outermost knowledge operator.
    pub bucket: Option<BucketView>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CheckReport {
    pub property: PropertyId,
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    pub notes: Vec<String>,
    pub fingerprint: Fingerprint,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum CheckError {
    #[error("{property} needs {missing} to be checked first")]
    HypothesisNotVerified { property: PropertyId, missing: PropertyId },
}

/// Agent of the outermost `K`, `B` or `H` in pre-order.
fn outer_knower(f: &Formula) -> Option<AgentId> {
    match f {
        Formula::K(i, _) | Formula::B(i, _) | Formula::H(i, _) => Some(*i),
        _ => f.children().into_iter().find_map(outer_knower),
    }
}

/// Holds where every correct agent eventually fires: `/\_i <>(correct(i) -> fire(i))`.
pub fn all_eventually_fire(n: usize) -> Formula {
    all((0..n).map(|i| {
        let i = AgentId::from(i);
        eventually(implies(correct(i), fire_of(i)))
    }))
}

/// `start & CdH start`
pub fn common_guard() -> Formula {
    and(start(), eventual_common_hope(start()))
}

/// `start & EdH start`
pub fn mutual_guard() -> Formula {
    and(start(), eventual_mutual_h(start()))
}

fn groups(n: usize, size: usize) -> Vec<Vec<AgentId>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(n: usize, size: usize, from: usize, cur: &mut Vec<AgentId>, out: &mut Vec<Vec<AgentId>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in from..n {
            cur.push(AgentId::from(i));
            rec(n, size, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(n, size, 0, &mut cur, &mut out);
    out
}

/// Antecedent of (C): some group of `2f+1` agents believes `start`.
pub fn correctness_antecedent(n: usize, f: usize) -> Formula {
    any(groups(n, 2 * f + 1)
        .into_iter()
        .map(|g| all(g.into_iter().map(|j| k(j, implies(correct(j), start()))))))
}

pub struct Checker<'s> {
    ev: Evaluator<'s>,
    fingerprint: Fingerprint,
    results: BTreeMap<PropertyId, Verdict>,
}

impl<'s> Checker<'s> {
    pub fn new(sys: &'s InterpretedSystem, fingerprint: Fingerprint) -> Self {
        Checker { ev: Evaluator::new(sys), fingerprint, results: BTreeMap::new() }
    }

    pub fn evaluator(&mut self) -> &mut Evaluator<'s> {
        &mut self.ev
    }

    fn sys(&self) -> &'s InterpretedSystem {
        self.ev.system()
    }

    fn agents(&self) -> Vec<AgentId> {
        self.sys().agents().collect()
    }

    pub fn verdict_of(&self, p: PropertyId) -> Option<Verdict> {
        self.results.get(&p).copied()
    }

    pub fn witness(&self, p: Point, formula: &Formula) -> Witness {
        let sys = self.sys();
        let idx = sys.point_index(p);
        let bucket = outer_knower(formula).map(|agent| {
            let members = sys.indistinguishable(agent, idx);
            BucketView {
                agent,
                points: members.iter().take(BUCKET_LIMIT).map(|&q| sys.point(q as usize)).collect(),
                total: members.len(),
            }
        });
        Witness {
            point: p,
            formula: formula.to_string(),
            histories: sys.agents().map(|a| sys.history_at(a, idx)).collect(),
            correct: sys.agents().map(|a| sys.correct_set(a).contains(idx)).collect(),
            bucket,
        }
    }

    fn report(&mut self, property: PropertyId, verdict: Verdict, witnesses: Vec<Witness>, notes: Vec<String>) -> CheckReport {
        debug_assert!(verdict != Verdict::Violated || !witnesses.is_empty());
        self.results.insert(property, verdict);
        CheckReport { property, verdict, witnesses, notes, fingerprint: self.fingerprint.clone() }
    }

    /// Checks every instance; one witness per failing instance.
    fn failures(&mut self, instances: &[Formula]) -> Vec<Witness> {
        let mut out = Vec::new();
        for f in instances {
            if let Validity::Counterexample(p) = self.ev.check_valid(f) {
                out.push(self.witness(p, f));
            }
        }
        out
    }

    fn validity(&mut self, property: PropertyId, instances: Vec<Formula>, notes: Vec<String>) -> CheckReport {
        let w = self.failures(&instances);
        let verdict = if w.is_empty() { Verdict::Holds } else { Verdict::Violated };
        self.report(property, verdict, w, notes)
    }

    fn formula_u(&self) -> Formula {
        implies(fire(), start())
    }

    fn formula_r(&self) -> Formula {
        implies(fire(), all_eventually_fire(self.sys().n()))
    }

    pub fn check_u(&mut self) -> CheckReport {
        let f = self.formula_u();
        self.validity(PropertyId::U, vec![f], Vec::new())
    }

    pub fn check_r(&mut self) -> CheckReport {
        let f = self.formula_r();
        let sys = self.sys();
        let joint = implies(
            fire(),
            eventually(all(sys.agents().map(|i| implies(correct(i), fire_of(i))))),
        );
        let mut notes = Vec::new();
        let per_agent = self.ev.check_valid(&f).is_valid();
        if self.ev.check_valid(&joint).is_valid() != per_agent {
            notes.push("joint form <>(/\\_i (correct(i) -> fire(i))) disagrees with the per-agent form".to_string());
        }
        self.validity(PropertyId::R, vec![f], notes)
    }

    pub fn check_c(&mut self) -> CheckReport {
        let (n, f) = (self.sys().n(), self.sys().f());
        if n < 2 * f + 1 {
            let note = format!("no group of {} agents among {n}", 2 * f + 1);
            return self.report(PropertyId::C, Verdict::NotApplicable, Vec::new(), vec![note]);
        }
        let ante = correctness_antecedent(n, f);
        let mut notes = Vec::new();
        if self.ev.extension(&ante).is_empty() {
            notes.push("antecedent never holds; (C) holds vacuously".to_string());
        }
        self.validity(PropertyId::C, vec![implies(ante, all_eventually_fire(n))], notes)
    }

    fn missing_prerequisite(&self, p: PropertyId) -> Option<PropertyId> {
        p.prerequisites().iter().copied().find(|q| !self.results.contains_key(q))
    }

    /// Runs `p`, failing if one of its prerequisites was not checked yet.
    pub fn check_theorem(&mut self, p: PropertyId) -> Result<CheckReport, CheckError> {
        if let Some(missing) = self.missing_prerequisite(p) {
            return Err(CheckError::HypothesisNotVerified { property: p, missing });
        }
        let failed: Vec<PropertyId> = p
            .prerequisites()
            .iter()
            .copied()
            .filter(|q| self.results[q] != Verdict::Holds)
            .collect();
        if !failed.is_empty() {
            let names: Vec<&str> = failed.iter().map(|q| q.name()).collect();
            let note = format!("hypothesis not satisfied: {}", names.join(", "));
            return Ok(self.report(p, Verdict::NotApplicable, Vec::new(), vec![note]));
        }
        Ok(self.dispatch(p))
    }

    /// Runs `p`, checking missing prerequisites first.
    pub fn check(&mut self, p: PropertyId) -> CheckReport {
        while let Some(missing) = self.missing_prerequisite(p) {
            self.check(missing);
        }
        self.check_theorem(p).expect("prerequisites were just checked")
    }

    /// Checks `props` in dependency order; prerequisites that were not asked
    /// for are run but not reported.
    pub fn run_suite(&mut self, props: &[PropertyId]) -> Vec<CheckReport> {
        let mut wanted: Vec<PropertyId> = props.to_vec();
        wanted.sort();
        wanted.dedup();
        wanted.into_iter().map(|p| self.check(p)).collect()
    }

    fn dispatch(&mut self, p: PropertyId) -> CheckReport {
        let agents = self.agents();
        match p {
            PropertyId::C => self.check_c(),
            PropertyId::U => self.check_u(),
            PropertyId::R => self.check_r(),
            PropertyId::Lemma6 => {
                let inst = agents
                    .iter()
                    .flat_map(|&i| {
                        [
                            implies(fire_of(i), b(i, fire_of(i))),
                            implies(fire_of(i), b(i, fire())),
                            implies(start_of(i), b(i, start_of(i))),
                            implies(start_of(i), b(i, start())),
                        ]
                    })
                    .collect();
                self.validity(p, inst, Vec::new())
            }
            PropertyId::Lemma7Eq5 => {
                let inst = agents.iter().map(|&i| implies(fire_of(i), b(i, start()))).collect();
                self.validity(p, inst, Vec::new())
            }
            PropertyId::Lemma9Eq6 => {
                let n = agents.len();
                let inst = agents.iter().map(|&i| implies(fire_of(i), b(i, all_eventually_fire(n)))).collect();
                self.validity(p, inst, Vec::new())
            }
            PropertyId::Thm10 => {
                let inst = agents.iter().map(|&i| implies(fire_of(i), b(i, mutual_guard()))).collect();
                self.validity(p, inst, Vec::new())
            }
            PropertyId::Thm14Eq7 => {
                let inst = agents.iter().map(|&i| implies(fire_of(i), b(i, common_guard()))).collect();
                self.validity(p, inst, Vec::new())
            }
            PropertyId::Thm16_1 => self.check_thm16_1(),
            PropertyId::Thm16_2Eq8 => self.check_sufficiency(),
            PropertyId::Lemma18 => {
                let inst = agents
                    .iter()
                    .map(|&i| implies(not(correct(i)), crate::formula::always(not(correct(i)))))
                    .collect();
                self.validity(p, inst, Vec::new())
            }
            PropertyId::Lemma19 => self.check_lemma19(),
            PropertyId::Lemma21 => {
                let mut inst = Vec::new();
                for &i in &agents {
                    let mut phis = vec![start(), fire(), eventual_mutual_h(start())];
                    phis.extend(agents.iter().map(|&j| fire_of(j)));
                    for phi in phis {
                        let body = eventually(implies(correct(i), phi));
                        inst.push(iff(b(i, body.clone()), k(i, body)));
                    }
                }
                self.validity(p, inst, Vec::new())
            }
            PropertyId::Cor22 => {
                let mut inst = Vec::new();
                for &i in &agents {
                    for phi in [start(), fire(), mutual_guard()] {
                        let body = eventually(h(i, phi));
                        inst.push(iff(b(i, body.clone()), k(i, body)));
                    }
                }
                self.validity(p, inst, Vec::new())
            }
            PropertyId::Lemma23 => self.persistence_family(p),
            PropertyId::Cor24Eq9_10 => self.persistence_family(p),
            PropertyId::Lemma26Eq10 => self.check_lifting(),
            PropertyId::FixpointAxiomEq1 => self.check_fixpoint_axiom(),
            PropertyId::BrainInVat => self.check_brain_in_vat(),
            PropertyId::Remark12 => self.check_remark12(),
        }
    }

    fn check_thm16_1(&mut self) -> CheckReport {
        let premise = all(self.agents().into_iter().map(|i| implies(not(b(i, start())), not(fire_of(i)))));
        if let Validity::Counterexample(pt) = self.ev.check_valid(&premise) {
            let w = self.witness(pt, &premise);
            let note = "premise /\\_i (!B_i start -> !fire(i)) is not valid".to_string();
            return self.report(PropertyId::Thm16_1, Verdict::NotApplicable, vec![w], vec![note]);
        }
        let u = self.formula_u();
        let w = self.failures(&[u]);
        let verdict = if w.is_empty() { Verdict::Holds } else { Verdict::Violated };
        self.report(PropertyId::Thm16_1, verdict, w, vec!["premise valid; (U) re-verified".to_string()])
    }

    /// Both conjuncts of the sufficient condition, then (U) and (R).
    pub fn check_sufficiency(&mut self) -> CheckReport {
        let agents = self.agents();
        let guard = |i| b(i, common_guard());
        let a: Vec<Formula> = agents.iter().map(|&i| implies(not(guard(i)), not(fire_of(i)))).collect();
        let bb: Vec<Formula> = agents
            .iter()
            .map(|&i| implies(guard(i), eventually(implies(correct(i), fire_of(i)))))
            .collect();
        let shifted: Vec<Formula> = agents
            .iter()
            .map(|&i| {
                let fresh = and(fire_of(i), not(y(occurred(i, Event::Fire))));
                implies(fresh, y(guard(i)))
            })
            .collect();

        let mut notes = Vec::new();
        let mut wa = Vec::new();
        let mut gaps = Vec::new();
        for (&i, f) in agents.iter().zip(&a) {
            if let Validity::Counterexample(p) = self.ev.check_valid(f) {
                wa.push(self.witness(p, f));
                gaps.push((i, p));
            }
        }
        let wb = self.failures(&bb);
        let shifted_ok = self.failures(&shifted).is_empty();
        notes.push(format!(
            "(a) {}, (b) {}, guard one step before each new FIRE {}",
            if wa.is_empty() { "holds" } else { "fails" },
            if wb.is_empty() { "holds" } else { "fails" },
            if shifted_ok { "holds" } else { "fails" },
        ));
        for (i, p) in gaps {
            let idx = self.sys().point_index(p);
            let mutual = self.ev.extension(&b(i, mutual_guard())).contains(idx);
            notes.push(format!(
                "at {p} agent {i} fires without B_{i}(start & CdH start); B_{i}(start & EdH start) {}",
                if mutual { "holds there" } else { "fails there too" }
            ));
        }
        if !wa.is_empty() || !wb.is_empty() {
            let mut w = wa;
            w.extend(wb);
            return self.report(PropertyId::Thm16_2Eq8, Verdict::NotApplicable, w, notes);
        }
        let u = self.formula_u();
        let r = self.formula_r();
        let w = self.failures(&[u, r]);
        notes.push("premise valid; (U) and (R) re-verified".to_string());
        let verdict = if w.is_empty() { Verdict::Holds } else { Verdict::Violated };
        self.report(PropertyId::Thm16_2Eq8, verdict, w, notes)
    }

    /// Whether every point satisfying `phi` has a continuation of its global
    /// state along which `phi` holds at every later time. Returns the first
    /// point without one.
    pub fn persistence_counterexample(&mut self, phi: &Formula) -> Option<Point> {
        let sys = self.sys();
        let holds = self.ev.extension(phi);
        let forever = self.ev.always_set(&holds);
        let mut good: hashbrown::HashSet<u32> = hashbrown::HashSet::new();
        for p in forever.iter() {
            good.insert(sys.global_state_id(p));
        }
        let first = holds.iter().find(|&p| !good.contains(&sys.global_state_id(p)));
        first.map(|p| sys.point(p))
    }

    pub fn check_potentially_persistent(&mut self, phi: &Formula) -> bool {
        self.persistence_counterexample(phi).is_none()
    }

    fn persistent_agents(&mut self) -> (Vec<AgentId>, Vec<String>) {
        let mut yes = Vec::new();
        let mut notes = Vec::new();
        for i in self.agents() {
            let phi = and(correct(i), not(start()));
            match self.persistence_counterexample(&phi) {
                None => yes.push(i),
                Some(p) => notes.push(format!("correct({i}) & !start is not potentially persistent (first failure at {p})")),
            }
        }
        (yes, notes)
    }

    fn lemma23_instances(i: AgentId) -> Vec<Formula> {
        vec![implies(b(i, eventually(h(i, start()))), b(i, start()))]
    }

    fn cor24_instances(i: AgentId) -> Vec<Formula> {
        vec![
            implies(b(i, eventual_mutual_h(start())), b(i, start())),
            implies(b(i, eventual_common_hope(start())), b(i, start())),
        ]
    }

    fn persistence_family(&mut self, p: PropertyId) -> CheckReport {
        let (agents, mut notes) = self.persistent_agents();
        if agents.is_empty() {
            return self.report(p, Verdict::NotApplicable, Vec::new(), notes);
        }
        let inst: Vec<Formula> = agents
            .iter()
            .flat_map(|&i| if p == PropertyId::Lemma23 { Self::lemma23_instances(i) } else { Self::cor24_instances(i) })
            .collect();
        let names: Vec<String> = agents.iter().map(|a| a.to_string()).collect();
        notes.push(format!("checked for agents {}", names.join(", ")));
        self.validity(p, inst, notes)
    }

    /// Early local belief for one agent.
    pub fn check_early_local_belief(&mut self, i: AgentId) -> CheckReport {
        let phi = and(correct(i), not(start()));
        if let Some(pt) = self.persistence_counterexample(&phi) {
            let note = format!("correct({i}) & !start is not potentially persistent (first failure at {pt})");
            return self.report(PropertyId::Lemma23, Verdict::NotApplicable, Vec::new(), vec![note]);
        }
        let mut inst = Self::lemma23_instances(i);
        inst.extend(Self::cor24_instances(i));
        self.validity(PropertyId::Lemma23, inst, vec![format!("checked for agent {i}")])
    }

    fn check_lemma19(&mut self) -> CheckReport {
        let agents = self.agents();
        let mut phis: Vec<Formula> = agents.iter().map(|&i| not(correct(i))).collect();
        let mut notes = Vec::new();
        for &i in &agents {
            let phi = and(correct(i), not(start()));
            if self.check_potentially_persistent(&phi) {
                phis.push(phi);
            } else {
                notes.push(format!("correct({i}) & !start skipped: not potentially persistent"));
            }
        }
        for phi in &phis {
            if !self.check_potentially_persistent(phi) {
                let pt = self.persistence_counterexample(phi).unwrap();
                let w = self.witness(pt, phi);
                notes.push(format!("{phi} is not potentially persistent"));
                return self.report(PropertyId::Lemma19, Verdict::Violated, vec![w], notes);
            }
        }
        let inst = phis
            .iter()
            .flat_map(|phi| {
                agents.iter().map(move |&j| implies(k(j, eventually(not(phi.clone()))), k(j, not(phi.clone()))))
            })
            .collect();
        self.validity(PropertyId::Lemma19, inst, notes)
    }

    /// `EdH start -> CdH start` under its hypotheses.
    pub fn check_lifting(&mut self) -> CheckReport {
        let (n, f) = (self.sys().n(), self.sys().f());
        let ext_e = self.ev.extension(&eventual_mutual_h(start()));
        let ext_c = self.ev.extension(&eventual_common_hope(start()));
        let mut notes = vec![format!(
            "|EdH start| = {}, |CdH start| = {}, equal: {}",
            ext_e.count(),
            ext_c.count(),
            ext_e == ext_c
        )];
        if n < 3 * f + 1 {
            notes.push(format!("needs n >= 3f+1, have n = {n}, f = {f}"));
            return self.report(PropertyId::Lemma26Eq10, Verdict::NotApplicable, Vec::new(), notes);
        }
        if self.results.get(&PropertyId::C) != Some(&Verdict::Holds) {
            let c = self.check_c();
            if c.verdict != Verdict::Holds {
                notes.push("needs (C)".to_string());
                return self.report(PropertyId::Lemma26Eq10, Verdict::NotApplicable, Vec::new(), notes);
            }
        }
        let premise: Vec<Formula> =
            self.agents().into_iter().map(|i| implies(fire_of(i), b(i, mutual_guard()))).collect();
        if !self.failures(&premise).is_empty() {
            notes.push("needs fire(i) -> B_i(start & EdH start) for every agent".to_string());
            return self.report(PropertyId::Lemma26Eq10, Verdict::NotApplicable, Vec::new(), notes);
        }
        let f = implies(eventual_mutual_h(start()), eventual_common_hope(start()));
        self.validity(PropertyId::Lemma26Eq10, vec![f], notes)
    }

    fn check_fixpoint_axiom(&mut self) -> CheckReport {
        let mut w = Vec::new();
        let mut notes = Vec::new();
        let points = self.sys().num_points();
        for phi in [start(), fire(), Formula::True] {
            let fp = self.ev.eventual_common_hope(&phi);
            let rhs = self.ev.extension(&eventual_mutual_h(and(phi.clone(), eventual_common_hope(phi.clone()))));
            let mutual = self.ev.extension(&eventual_mutual_h(phi.clone()));
            notes.push(format!("CdH {phi}: {} points after {} iterations", fp.set.count(), fp.iterations));
            let eq = iff(
                eventual_common_hope(phi.clone()),
                eventual_mutual_h(and(phi.clone(), eventual_common_hope(phi.clone()))),
            );
            if let Some(p) = fp.set.or(&rhs).minus(&fp.set.and(&rhs)).first() {
                w.push(self.witness(self.sys().point(p), &eq));
            }
            if let Some(p) = fp.set.minus(&mutual).first() {
                let inc = implies(eventual_common_hope(phi.clone()), eventual_mutual_h(phi.clone()));
                w.push(self.witness(self.sys().point(p), &inc));
            }
            if fp.iterations > points {
                notes.push(format!("iteration count {} exceeds {points} points", fp.iterations));
                let dummy = self.sys().point(0);
                w.push(self.witness(dummy, &eventual_common_hope(phi)));
            }
        }
        let verdict = if w.is_empty() { Verdict::Holds } else { Verdict::Violated };
        self.report(PropertyId::FixpointAxiomEq1, verdict, w, notes)
    }

    pub fn check_brain_in_vat(&mut self) -> CheckReport {
        if self.sys().f() == 0 {
            let note = "f = 0: agents may know they are correct".to_string();
            return self.report(PropertyId::BrainInVat, Verdict::NotApplicable, Vec::new(), vec![note]);
        }
        let mut notes = Vec::new();
        if !self.fingerprint.twins {
            notes.push("twins disabled: the adversary is incomplete and violations are expected".to_string());
        }
        let inst = self.agents().into_iter().map(|i| not(and(correct(i), k(i, correct(i))))).collect();
        self.validity(PropertyId::BrainInVat, inst, notes)
    }

    /// Looks for a firing point where belief in eventual mutual hope holds but
    /// belief in eventual common hope does not.
    pub fn check_remark12(&mut self) -> CheckReport {
        let mut best: Option<(usize, AgentId)> = None;
        for i in self.agents() {
            let gap = and(fire_of(i), and(b(i, mutual_guard()), not(b(i, common_guard()))));
            if let Some(p) = self.ev.extension(&gap).first() {
                if best.is_none_or(|(q, _)| p < q) {
                    best = Some((p, i));
                }
            }
        }
        let Some((p, i)) = best else {
            let note = "no firing point separates mutual from common hope".to_string();
            return self.report(PropertyId::Remark12, Verdict::NotApplicable, Vec::new(), vec![note]);
        };
        let gap = and(fire_of(i), and(b(i, mutual_guard()), not(b(i, common_guard()))));
        let pt = self.sys().point(p);
        let w = self.witness(pt, &gap);
        let mut notes = vec![format!("agent {i} fires at {pt} with B(start & EdH start) but not B(start & CdH start)")];
        let eb = self.ev.extension(&b(i, eventual_mutual_b(start()))).contains(p);
        notes.push(format!("B_{i} EdB start {} at that point", if eb { "holds" } else { "fails" }));
        self.report(PropertyId::Remark12, Verdict::Holds, vec![w], notes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::persistence_subject;

    #[test]
    fn property_names_round_trip() {
        for p in PropertyId::ALL {
            assert_eq!(PropertyId::from_name(p.name()), Some(p));
        }
        assert_eq!(PropertyId::from_name("lemma18"), Some(PropertyId::Lemma18));
        assert_eq!(PropertyId::from_name("Thm14"), Some(PropertyId::Thm14Eq7));
        assert_eq!(PropertyId::from_name("Thm16"), None);
        assert_eq!(PropertyId::from_name("nope"), None);
    }

    #[test]
    fn groups_of_size() {
        assert_eq!(groups(4, 3).len(), 4);
        assert_eq!(groups(2, 3).len(), 0);
        assert_eq!(groups(3, 0), vec![Vec::<AgentId>::new()]);
    }

    #[test]
    fn persistence_subject_shape() {
        let i = AgentId(2);
        assert_eq!(persistence_subject(&and(correct(i), not(start()))), Some(i));
        assert_eq!(persistence_subject(&and(not(start()), correct(i))), Some(i));
        assert_eq!(persistence_subject(&correct(i)), None);
    }
}
