//! Enumeration and checking driven by a [`JobConfig`].

use rayon::prelude::*;
use rebelfire_core::checker::{Checker, Fingerprint};
use rebelfire_core::enumerate::{
    enumerate_subtree, merge_subtrees, sample_runs, subtree_count, twins_supported, DeliveryMode, EnumError, RunSet,
};
use rebelfire_core::protocol::remark12_scenario;
use rebelfire_core::system::{build_system, InterpretedSystem, SystemError};

use crate::config::{JobConfig, Scenario};
use crate::report::ReportFile;
use crate::trace::TraceFile;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "REBELFIRE_THREADS";

pub fn fingerprint(job: &JobConfig, run_count: usize) -> Fingerprint {
    let a = &job.adversary;
    let proto = job.protocol();
    let delivery = match a.delivery.mode {
        DeliveryMode::DeliverByHorizon => "deliver-by-horizon",
        DeliveryMode::AllowLoss => "allow-loss",
    };
    Fingerprint {
        n: a.n,
        f: a.f,
        horizon: a.horizon,
        protocol: proto.name().to_string(),
        menu: a.byzantine.items().into_iter().map(String::from).collect(),
        run_count,
        twins: twins_supported(&*proto, a),
        delivery: format!("{delivery}, max delay {}", a.delivery.max_delay),
    }
}

pub fn alphabet(job: &JobConfig) -> Vec<String> {
    job.protocol().alphabet().iter().map(|s| s.to_string()).collect()
}

/// Runs the worker pool sized by `REBELFIRE_THREADS`, if set.
pub fn with_pool<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = std::env::var(THREADS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok());
    match threads {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        _ => f(),
    }
}

/// All runs of the job, or a seeded sample, plus any pinned scenario. A
/// truncated set comes back with `truncated` set.
pub fn build_runs(job: &JobConfig) -> Result<RunSet, EnumError> {
    let proto = job.protocol();
    let cfg = &job.adversary;
    let mut set = match job.sample {
        Some(count) => sample_runs(&*proto, cfg, job.seed, count)?,
        None => {
            let parts = with_pool(|| {
                (0..subtree_count(&*proto, cfg)?)
                    .into_par_iter()
                    .map(|k| enumerate_subtree(&*proto, cfg, k))
                    .collect::<Result<Vec<_>, _>>()
            })?;
            merge_subtrees(&*proto, cfg, parts)?
        }
    };
    if job.scenario == Some(Scenario::Remark12) {
        let twins = twins_supported(&*proto, cfg);
        set.pin_front(remark12_scenario(cfg.horizon), twins);
    }
    Ok(set)
}

pub fn system(job: &JobConfig, set: &RunSet) -> Result<InterpretedSystem, SystemError> {
    let a = &job.adversary;
    build_system(set.runs.clone(), a.n, a.f, a.horizon)
}

pub fn trace(job: &JobConfig, set: &RunSet) -> TraceFile {
    TraceFile::new(job, alphabet(job), fingerprint(job, set.len()), set)
}

/// Checks the job's properties on a built system.
pub fn check(job: &JobConfig, sys: &InterpretedSystem, truncated: bool) -> ReportFile {
    let fp = fingerprint(job, sys.runs().len());
    let props = job.property_ids().expect("validated properties");
    let mut checker = Checker::new(sys, fp.clone());
    let reports = checker.run_suite(&props);
    ReportFile::new(fp, truncated, &alphabet(job), &reports)
}
