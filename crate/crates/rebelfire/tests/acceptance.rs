//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rebelfire::config::JobConfig;
use rebelfire::job;
use rebelfire_core::checker::{common_guard, Fingerprint};
use rebelfire_core::enumerate::{potential_persistence_closure, sample_runs, twins_supported, ByzantineMenu, Onset};
use rebelfire_core::formula::*;
use rebelfire_core::protocol::{by_name, C2, PROTOCOL_NAMES};
use rebelfire_core::*;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

struct Built {
    job: JobConfig,
    sys: InterpretedSystem,
    twins: bool,
    truncated: bool,
    elapsed: Duration,
}

fn build(job: JobConfig) -> Built {
    let t = Instant::now();
    let set = job::build_runs(&job).expect("enumeration");
    let sys = job::system(&job, &set).expect("system");
    let twins = twins_supported(&*job.protocol(), &job.adversary);
    Built { job, sys, twins, truncated: set.truncated, elapsed: t.elapsed() }
}

fn preset(name: &str) -> Built {
    build(JobConfig::preset(name).unwrap())
}

fn checker(b: &Built) -> Checker<'_> {
    Checker::new(&b.sys, job::fingerprint(&b.job, b.sys.runs().len()))
}

fn verdict(b: &Built, p: PropertyId) -> Verdict {
    checker(b).check(p).verdict
}

fn exhaustive(protocol: &str, cfg: &AdversaryConfig) -> (InterpretedSystem, bool) {
    let proto = by_name(protocol, cfg.f).unwrap();
    let set = enumerate_runs(&*proto, cfg).unwrap();
    let sys = build_system(set.runs.clone(), cfg.n, cfg.f, cfg.horizon).unwrap();
    (sys, twins_supported(&*proto, cfg))
}

/// Small complete systems for every protocol.
fn grid() -> Vec<(String, InterpretedSystem, bool)> {
    let mut out = Vec::new();
    for name in PROTOCOL_NAMES {
        for (n, f, horizon, onsets) in [
            (1, 0, 3, vec![Onset::Initial]),
            (2, 1, 3, vec![Onset::Initial, Onset::Round(1)]),
            (3, 1, 3, vec![Onset::Initial]),
        ] {
            let mut cfg = AdversaryConfig::new(n, f, horizon);
            cfg.faults.onsets = onsets;
            cfg.start.rounds = vec![0, 1];
            cfg.byzantine = ByzantineMenu { fake_send: true, fake_start_record: true, ..ByzantineMenu::default() };
            let (sys, twins) = exhaustive(name, &cfg);
            out.push((format!("{name} n={n} f={f}"), sys, twins));
        }
    }
    out
}

/// Random small configurations, sampled with twins.
fn random_system(seed: u64) -> (InterpretedSystem, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let name = PROTOCOL_NAMES[rng.gen_range(0..PROTOCOL_NAMES.len())];
    let n = rng.gen_range(1..=3);
    let f = if n == 1 { 0 } else { rng.gen_range(0..=1) };
    let mut cfg = AdversaryConfig::new(n, f, rng.gen_range(2..=4));
    cfg.start.rounds = if rng.gen_bool(0.5) { vec![0] } else { vec![0, 1] };
    cfg.faults.onsets = if rng.gen_bool(0.5) { vec![Onset::Initial] } else { vec![Onset::Initial, Onset::Round(1)] };
    cfg.byzantine = ByzantineMenu {
        fake_start_record: rng.gen_bool(0.5),
        fake_send: rng.gen_bool(0.5),
        omit_send: rng.gen_bool(0.5),
        fake_receive: rng.gen_bool(0.3),
    };
    let proto = by_name(name, f).unwrap();
    let set = sample_runs(&*proto, &cfg, rng.gen(), 12).unwrap();
    let sys = build_system(set.runs.clone(), n, f, cfg.horizon).unwrap();
    (sys, twins_supported(&*proto, &cfg))
}

fn formula_bank(n: usize) -> Vec<Formula> {
    let mut v = vec![start(), fire(), eventual_mutual_h(start()), eventual_common_hope(start()), not(fire())];
    for j in (0..n).map(AgentId::from) {
        v.push(start_of(j));
        v.push(fire_of(j));
        v.push(correct(j));
        v.push(k(j, start()));
    }
    v
}

fn valid(ev: &mut Evaluator<'_>, f: &Formula) -> Result<(), String> {
    match ev.check_valid(f) {
        Validity::Valid => Ok(()),
        Validity::Counterexample(p) => Err(format!("{f} fails at {p}")),
    }
}

fn crit1(echo: &Built) -> Outcome {
    ensure(!echo.truncated, "enumeration hit the run cap")?;
    let runs = echo.sys.runs().len();
    ensure(runs <= 200_000, format!("{runs} runs"))?;
    let t = Instant::now();
    let mut ch = checker(echo);
    for p in [PropertyId::U, PropertyId::R, PropertyId::C] {
        let v = ch.check(p).verdict;
        ensure(v == Verdict::Holds, format!("{p} is {v}"))?;
    }
    let secs = (echo.elapsed + t.elapsed()).as_secs_f64();
    ensure(secs < 600.0, format!("took {secs:.1}s"))?;
    Ok(format!("{runs} runs, enumerated and checked in {secs:.1}s"))
}

fn crit2(echo: &Built) -> Outcome {
    for p in [PropertyId::Thm10, PropertyId::Thm14Eq7] {
        let v = verdict(echo, p);
        ensure(v == Verdict::Holds, format!("{p} is {v}"))?;
    }
    let mut ev = Evaluator::new(&echo.sys);
    let mut firing = 0;
    for i in echo.sys.agents() {
        let fires = ev.extension(&fire_of(i));
        let guard = ev.extension(&b(i, common_guard()));
        ensure(fires.is_subset(&guard), format!("agent {i} fires without the common-hope guard"))?;
        firing += fires.count();
    }
    ensure(firing > 0, "no firing points")?;
    Ok(format!("guard holds at all {firing} firing points"))
}

fn crit3(echo: &Built) -> Outcome {
    let mut ev = Evaluator::new(&echo.sys);
    let e = ev.extension(&eventual_mutual_h(start()));
    let c = ev.extension(&eventual_common_hope(start()));
    ensure(e == c, format!("|EdH start| = {}, |CdH start| = {}", e.count(), c.count()))?;
    Ok(format!("both extensions have {} points", e.count()))
}

fn crit4() -> Outcome {
    let r12 = preset("remark12");
    let report = checker(&r12).check(PropertyId::R);
    ensure(report.verdict == Verdict::Violated, format!("R is {}", report.verdict))?;
    ensure(report.witnesses.iter().any(|w| w.point.run == 0), "the scripted run is not the witness")?;
    let mut ev = Evaluator::new(&r12.sys);
    let t = (0..=r12.sys.horizon())
        .find(|&t| ev.holds(Point { run: 0, t }, &fire_of(C2)))
        .ok_or("c2 never fires in the scripted run")?;
    let p = Point { run: 0, t };
    let mutual = parse("B[2](start & EdH(start))").unwrap();
    let common = parse("B[2](start & CdH(start))").unwrap();
    let belief = parse("B[2] EdB start").unwrap();
    ensure(ev.holds(p, &mutual), "B_c2(start & EdH start) fails")?;
    ensure(!ev.holds(p, &common), "B_c2(start & CdH start) holds")?;
    ensure(!ev.holds(p, &belief), "B_c2 EdB start holds")?;
    Ok(format!("c2 fires at {p}"))
}

fn crit5() -> Outcome {
    let nb = preset("naive-byz");
    let r = checker(&nb).check(PropertyId::U);
    ensure(r.verdict == Verdict::Violated, format!("U is {}", r.verdict))?;
    Ok(format!("U violated at {}", r.witnesses[0].point))
}

fn fixpoint_ok(sys: &InterpretedSystem) -> Result<(), String> {
    let mut ev = Evaluator::new(sys);
    for phi in [start(), fire(), Formula::True] {
        let fp = ev.eventual_common_hope(&phi);
        let inner = ev.extension(&phi).and(&fp.set);
        ensure(ev.eventual_mutual_hope_set(&inner) == fp.set, format!("{phi}: not a fixpoint"))?;
        ensure(fp.iterations <= sys.num_points(), format!("{phi}: {} iterations", fp.iterations))?;
        ensure(fp.set.is_subset(&ev.extension(&eventual_mutual_h(phi.clone()))), format!("{phi}: not inside EdH"))?;
    }
    Ok(())
}

fn crit6(systems: &[(String, &InterpretedSystem)]) -> Outcome {
    for (name, sys) in systems {
        fixpoint_ok(sys).map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(format!("{} systems", systems.len()))
}

fn invariants(sys: &InterpretedSystem) -> Result<(), String> {
    let mut ev = Evaluator::new(sys);
    let bank = formula_bank(sys.n());
    for i in sys.agents() {
        for phi in &bank {
            valid(&mut ev, &implies(k(i, phi.clone()), phi.clone()))?;
            let kp = ev.extension(&k(i, phi.clone()));
            for p in 0..sys.num_points() {
                for &q in sys.indistinguishable(i, p) {
                    ensure(kp.contains(p) == kp.contains(q as usize), format!("K[{i}] {phi} splits a bucket"))?;
                }
            }
            valid(&mut ev, &implies(not(correct(i)), h(i, phi.clone())))?;
            for psi in &bank[..5] {
                let normal = implies(h(i, implies(phi.clone(), psi.clone())), implies(h(i, phi.clone()), h(i, psi.clone())));
                valid(&mut ev, &normal)?;
            }
            let body = eventually(implies(correct(i), phi.clone()));
            valid(&mut ev, &iff(b(i, body.clone()), k(i, body)))?;
        }
        for (own, believed, any) in [
            (fire_of(i), b(i, fire_of(i)), b(i, fire())),
            (start_of(i), b(i, start_of(i)), b(i, start())),
        ] {
            valid(&mut ev, &implies(own, believed.clone()))?;
            valid(&mut ev, &implies(believed, any))?;
        }
        valid(&mut ev, &implies(not(correct(i)), always(not(correct(i)))))?;
    }
    Ok(())
}

fn crit7() -> Outcome {
    let seeds = 100;
    for seed in 0..seeds {
        let (sys, _) = random_system(seed);
        invariants(&sys).map_err(|e| format!("seed {seed}: {e}"))?;
    }
    Ok(format!("{seeds} seeds, no violations"))
}

fn crit8(systems: &[(String, &InterpretedSystem, bool)]) -> Outcome {
    let mut count = 0;
    for (name, sys, twins) in systems {
        if !twins || sys.f() == 0 {
            continue;
        }
        count += 1;
        let mut ev = Evaluator::new(sys);
        for i in sys.agents() {
            let s = ev.extension(&and(correct(i), k(i, correct(i))));
            ensure(s.is_empty(), format!("{name}: agent {i} knows it is correct"))?;
        }
    }
    ensure(count > 0, "no twin-covered systems")?;
    Ok(format!("{count} twin-covered systems"))
}

fn crit9(echo: &Built) -> Outcome {
    let mut closed = AdversaryConfig::new(4, 1, 4);
    closed.byzantine.fake_send = true;
    closed.start.rounds = vec![0, 1];
    let phi = and(correct(AgentId(0)), not(start()));
    let closed = potential_persistence_closure(&closed, &phi).map_err(|e| e.to_string())?;
    let (sys, twins) = exhaustive("echo-frr", &closed);
    let fp = Fingerprint { n: 4, f: 1, horizon: 4, twins, ..Fingerprint::default() };
    let mut ch = Checker::new(&sys, fp);
    ensure(ch.check_potentially_persistent(&phi), "closure is not persistence-closed")?;
    let mut echo_ch = checker(echo);
    for p in [PropertyId::Lemma23, PropertyId::Cor24Eq9_10] {
        let v = ch.check(p).verdict;
        ensure(v == Verdict::Holds, format!("closure system: {p} is {v}"))?;
        let v = echo_ch.check(p).verdict;
        ensure(v == Verdict::Holds, format!("echo-n4f1: {p} is {v}"))?;
    }

    let mut mandatory = AdversaryConfig::new(3, 1, 3);
    mandatory.start.min_starts = 3;
    mandatory.twins = false;
    let (sys, twins) = exhaustive("echo-frr", &mandatory);
    let fp = Fingerprint { n: 3, f: 1, horizon: 3, twins, ..Fingerprint::default() };
    let mut ch = Checker::new(&sys, fp);
    for i in sys.agents() {
        ensure(!ch.check_potentially_persistent(&and(correct(i), not(start()))), format!("agent {i} persistent"))?;
    }
    let v = ch.check(PropertyId::Lemma23).verdict;
    ensure(v == Verdict::NotApplicable, format!("mandatory START: Lemma23 is {v}"))?;
    Ok("closed system holds, mandatory START is not applicable".into())
}

fn run_cli(args: &[&str], dir: &Path) -> Result<(Vec<u8>, i32), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_rebelfire"))
        .args(args)
        .current_dir(dir)
        .env("REBELFIRE_THREADS", "2")
        .output()
        .map_err(|e| e.to_string())?;
    Ok((out.stdout, out.status.code().unwrap_or(-1)))
}

fn crit10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut artifacts = 0;
    for preset in ["remark12", "naive-byz", "silent"] {
        let mut seen: Vec<Vec<Vec<u8>>> = Vec::new();
        for round in 0..2 {
            let trace = format!("{preset}-{round}.json");
            let report = format!("{preset}-{round}.report.json");
            run_cli(&["enumerate", "--preset", preset, "--seed", "7", "--out", &trace], dir.path())?;
            run_cli(&["check", &trace, "--format", "json", "--out", &report], dir.path())?;
            let (text, _) = run_cli(&["check", "--preset", preset, "--seed", "7"], dir.path())?;
            let read = |f: &str| std::fs::read(dir.path().join(f)).map_err(|e| e.to_string());
            seen.push(vec![read(&trace)?, read(&report)?, text]);
        }
        ensure(seen[0] == seen[1], format!("{preset}: outputs differ between invocations"))?;
        ensure(seen[0].iter().all(|b| !b.is_empty()), format!("{preset}: empty output"))?;
        artifacts += seen[0].len();
    }
    Ok(format!("{artifacts} artifacts byte-identical"))
}

fn main() {
    let echo = preset("echo-n4f1");
    let grid = grid();
    let r12 = preset("remark12");
    let nb = preset("naive-byz");
    let silent = preset("silent");

    let mut fix: Vec<(String, &InterpretedSystem)> = grid.iter().map(|(n, s, _)| (n.clone(), s)).collect();
    let mut twin: Vec<(String, &InterpretedSystem, bool)> = grid.iter().map(|(n, s, t)| (n.clone(), s, *t)).collect();
    for b in [&echo, &r12, &nb, &silent] {
        fix.push((b.job.protocol.clone(), &b.sys));
        twin.push((b.job.protocol.clone(), &b.sys, b.twins));
    }
    let randoms: Vec<(InterpretedSystem, bool)> = (1000..1100).map(random_system).collect();
    for (k, (s, t)) in randoms.iter().enumerate() {
        fix.push((format!("random #{k}"), s));
        twin.push((format!("random #{k}"), s, *t));
    }

    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "echo-n4f1 satisfies U, R and C", crit1(&echo)),
        (2, "Thm10 and Thm14 hold; the common-hope guard holds at every firing point", crit2(&echo)),
        (3, "EdH start and CdH start coincide on echo-n4f1", crit3(&echo)),
        (4, "remark12: R violated by the scripted run; mutual but not common hope at c2's firing", crit4()),
        (5, "naive-byz violates U", crit5()),
        (6, "CdH is an exact fixpoint, converges in time and lies inside EdH", crit6(&fix)),
        (7, "epistemic invariants on 100 seeds", crit7()),
        (8, "no correct agent knows it is correct on twin-covered systems", crit8(&twin)),
        (9, "persistence: closed system holds, mandatory START is not applicable", crit9(&echo)),
        (10, "identical inputs give byte-identical artifacts", crit10()),
    ];
    let mut failed = 0;
    for (n, what, r) in &results {
        match r {
            Ok(detail) => println!("PASS criterion {n}: {what} ({detail})"),
            Err(e) => {
                failed += 1;
                println!("FAIL criterion {n}: {what}: {e}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
