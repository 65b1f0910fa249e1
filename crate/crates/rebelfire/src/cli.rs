use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rebelfire_core::enumerate::{replay, replay_origin, RunOrigin};
use rebelfire_core::eval::{Evaluator, Validity};
use rebelfire_core::formula::{parse, Formula};
use rebelfire_core::protocol::remark12_scenario;
use rebelfire_core::system::{InterpretedSystem, Point};
use rebelfire_core::Run;

use crate::config::{parse_properties, Format, JobConfig, Scenario, PRESETS};
use crate::job;
use crate::trace::{parse_choice_log, Codec, TraceFile};

pub const EXIT_VIOLATED: u8 = 1;
pub const EXIT_ERROR: u8 = 2;
pub const EXIT_TRUNCATED: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "rebelfire", version, about = "Bounded-model epistemic verifier for Firing Rebels with Relay")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Enumerate all runs of a job and write the trace artifact.
    Enumerate {
        #[command(flatten)]
        job: JobArgs,
        /// Trace file to write; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check properties on a trace artifact, or enumerate and check in one go.
    Check {
        /// Trace artifact; omit to enumerate from --config or --preset.
        artifact: Option<PathBuf>,
        #[command(flatten)]
        job: JobArgs,
        /// Comma-separated property names, e.g. `U,R,Thm14`.
        #[arg(long, value_delimiter = ',')]
        properties: Vec<String>,
        #[arg(long, value_enum)]
        format: Option<Format>,
        /// Report file to write; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a formula on a trace artifact.
    Eval {
        artifact: PathBuf,
        formula: String,
        /// Single point as `run,t`; prints the truth table otherwise.
        #[arg(long)]
        point: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Regenerate a run from its recorded origin, or from a choice log.
    Replay {
        /// Trace artifact holding the run.
        artifact: Option<PathBuf>,
        /// Run index in the artifact.
        run: Option<usize>,
        #[command(flatten)]
        job: JobArgs,
        /// Choice log such as `F1/5 S0/16 D1/2`, replayed against the job.
        #[arg(long)]
        choices: Option<String>,
    },
    /// List the bundled presets.
    Presets,
}

#[derive(Args, Debug, Default, Clone)]
pub struct JobArgs {
    /// Job configuration file (TOML).
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Bundled configuration: echo-n4f1, remark12, naive-byz, silent.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<u32>,
    #[arg(long)]
    pub max_runs: Option<usize>,
}

impl JobArgs {
    fn given(&self) -> bool {
        self.config.is_some() || self.preset.is_some()
    }

    fn has_overrides(&self) -> bool {
        self.seed.is_some() || self.horizon.is_some() || self.max_runs.is_some()
    }

    pub fn load(&self) -> Result<JobConfig> {
        let mut job = match (&self.config, &self.preset) {
            (Some(p), _) => JobConfig::load(p)?,
            (None, Some(name)) => JobConfig::preset(name)?,
            (None, None) => bail!("give --config or --preset"),
        };
        if let Some(s) = self.seed {
            job.seed = s;
        }
        if let Some(h) = self.horizon {
            job.adversary.horizon = h;
        }
        if let Some(m) = self.max_runs {
            job.adversary.caps.max_runs = m;
        }
        job.validate()?;
        Ok(job)
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn read_trace(path: &Path) -> Result<TraceFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    TraceFile::from_json(&text).with_context(|| format!("cannot load {}", path.display()))
}

fn parse_formula(text: &str, sys: &InterpretedSystem) -> Result<Formula> {
    let f = parse(text).map_err(|e| {
        let caret = format!("{}^", " ".repeat(e.position));
        anyhow!("{e}\n  {text}\n  {caret}")
    })?;
    if let Some(a) = f.max_agent() {
        if a.index() >= sys.n() {
            bail!("formula mentions agent {a} but the system has {} agents", sys.n());
        }
    }
    Ok(f)
}

fn parse_point(s: &str, sys: &InterpretedSystem) -> Result<Point> {
    let cleaned: String = s.chars().filter(|c| !"()r ".contains(*c)).collect();
    let (r, t) = cleaned.split_once(',').ok_or_else(|| anyhow!("point must look like `run,t`"))?;
    let p = Point { run: r.parse().context("bad run index")?, t: t.parse().context("bad time")? };
    if !sys.is_valid_point(p) {
        bail!("point {p} is outside the system");
    }
    Ok(p)
}

fn cmd_enumerate(args: &JobArgs, out: Option<PathBuf>) -> Result<u8> {
    let mut job = args.load()?;
    let set = job::build_runs(&job)?;
    let out = out.or_else(|| job.output.trace.clone());
    job.output = Default::default();
    write_out(out.as_deref(), &job::trace(&job, &set).to_json())?;
    if set.truncated {
        eprintln!("run cap {} reached; the artifact is partial", job.adversary.caps.max_runs);
        return Ok(EXIT_TRUNCATED);
    }
    Ok(0)
}

fn cmd_check(
    artifact: Option<PathBuf>,
    args: &JobArgs,
    properties: Vec<String>,
    format: Option<Format>,
    out: Option<PathBuf>,
) -> Result<u8> {
    let (mut job, set) = match artifact {
        Some(path) => {
            if args.given() || args.has_overrides() {
                bail!("an artifact carries its own job; drop --config, --preset and overrides");
            }
            let t = read_trace(&path)?;
            let set = t.run_set()?;
            (t.job, set)
        }
        None => {
            let job = args.load()?;
            let set = job::build_runs(&job)?;
            (job, set)
        }
    };
    if !properties.is_empty() {
        parse_properties(&properties)?;
        job.properties = properties;
    }
    let sys = job::system(&job, &set)?;
    let report = job::check(&job, &sys, set.truncated);
    let text = match format.unwrap_or(job.format) {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    write_out(out.or_else(|| job.output.report.clone()).as_deref(), &text)?;
    Ok(if report.any_violated() {
        EXIT_VIOLATED
    } else if set.truncated {
        EXIT_TRUNCATED
    } else {
        0
    })
}

fn cmd_eval(artifact: &Path, formula: &str, point: Option<String>, format: Format) -> Result<u8> {
    let t = read_trace(artifact)?;
    let set = t.run_set()?;
    let sys = job::system(&t.job, &set)?;
    let f = parse_formula(formula, &sys)?;
    let mut ev = Evaluator::new(&sys);
    let mut s = String::new();
    if let Some(p) = point {
        let p = parse_point(&p, &sys)?;
        let v = ev.holds(p, &f);
        match format {
            Format::Text => writeln!(s, "{v}")?,
            Format::Json => {
                let doc = serde_json::json!({ "formula": f.to_string(), "point": p, "value": v });
                writeln!(s, "{}", serde_json::to_string_pretty(&doc)?)?
            }
        }
    } else {
        let ext = ev.extension(&f);
        let horizon = sys.horizon();
        let rows: Vec<String> = (0..sys.runs().len() as u32)
            .map(|r| {
                (0..=horizon)
                    .map(|t| if ext.contains(sys.point_index(Point { run: r, t })) { 'T' } else { 'F' })
                    .collect()
            })
            .collect();
        let validity = ev.check_valid(&f);
        match format {
            Format::Text => {
                writeln!(s, "{f}")?;
                writeln!(s, "{:<8} t=0..{horizon}", "run")?;
                for (r, row) in rows.iter().enumerate() {
                    writeln!(s, "{:<8} {row}", format!("r{r}"))?;
                }
                match validity {
                    Validity::Valid => writeln!(s, "valid")?,
                    Validity::Counterexample(p) => writeln!(s, "not valid: false at {p}")?,
                }
            }
            Format::Json => {
                let first = match validity {
                    Validity::Valid => None,
                    Validity::Counterexample(p) => Some(p),
                };
                let doc = serde_json::json!({
                    "formula": f.to_string(),
                    "valid": first.is_none(),
                    "counterexample": first,
                    "rows": rows,
                });
                writeln!(s, "{}", serde_json::to_string_pretty(&doc)?)?
            }
        }
    }
    write_out(None, &s)?;
    Ok(0)
}

fn render_run(codec: &Codec<'_>, run: &Run) -> String {
    let mut s = String::new();
    let faulty: Vec<String> = run.initially_faulty.iter().map(|a| a.to_string()).collect();
    let _ = writeln!(s, "initially faulty: {}", if faulty.is_empty() { "-".into() } else { faulty.join(", ") });
    for (k, r) in run.rounds.iter().enumerate() {
        let recs: Vec<String> = r.occurrences.iter().map(|&(a, o)| codec.record(a, o)).collect();
        let _ = write!(s, "round {k}: {}", if recs.is_empty() { "-".into() } else { recs.join("; ") });
        for e in &r.injected {
            let _ = write!(s, "; injected {} {} -> {}", codec.label(rebelfire_core::Label::Send { msg: e.msg, to: e.to }), e.from, e.to);
        }
        s.push('\n');
    }
    s
}

fn cmd_replay(artifact: Option<PathBuf>, run: Option<usize>, args: &JobArgs, choices: Option<String>) -> Result<u8> {
    match (artifact, run, choices) {
        (Some(path), Some(k), None) => {
            if args.given() {
                bail!("an artifact carries its own job; drop --config and --preset");
            }
            let t = read_trace(&path)?;
            let set = t.run_set()?;
            if k >= set.len() {
                bail!("run {k} out of range; the artifact has {} runs", set.len());
            }
            let proto = t.job.protocol();
            let again = match &set.origins[k] {
                RunOrigin::Pinned => match t.job.scenario {
                    Some(Scenario::Remark12) => remark12_scenario(t.job.adversary.horizon),
                    None => bail!("run {k} is pinned but the job has no scenario"),
                },
                _ => replay_origin(&*proto, &t.job.adversary, &set, k)?,
            };
            let codec = Codec { alphabet: &t.alphabet };
            let mut s = render_run(&codec, &again);
            if again != set.runs[k] {
                s.push_str("MISMATCH: the regenerated run differs from the stored one\n");
                write_out(None, &s)?;
                return Ok(EXIT_ERROR);
            }
            s.push_str("matches the stored run\n");
            write_out(None, &s)?;
            Ok(0)
        }
        (None, None, Some(log)) => {
            let job = args.load()?;
            let log = parse_choice_log(&log)?;
            let r = replay(&*job.protocol(), &job.adversary, &log)?;
            let alphabet = job::alphabet(&job);
            write_out(None, &render_run(&Codec { alphabet: &alphabet }, &r))?;
            Ok(0)
        }
        _ => bail!("give either an artifact and a run index, or --choices with --config or --preset"),
    }
}

fn cmd_presets() -> Result<u8> {
    let mut s = String::new();
    for (name, text) in PRESETS {
        let first = text.lines().next().unwrap_or("").trim_start_matches('#').trim();
        writeln!(s, "{name:<12} {first}")?;
    }
    write_out(None, &s)?;
    Ok(0)
}

pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Enumerate { job, out } => cmd_enumerate(&job, out),
        Command::Check { artifact, job, properties, format, out } => cmd_check(artifact, &job, properties, format, out),
        Command::Eval { artifact, formula, point, format } => cmd_eval(&artifact, &formula, point, format),
        Command::Replay { artifact, run, job, choices } => cmd_replay(artifact, run, &job, choices),
        Command::Presets => cmd_presets(),
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
