//! The run-set artifact: every run of an enumerated system, how it was
//! produced, and the job that produced it.

use std::fmt::Write as _;

use rebelfire_core::checker::Fingerprint;
use rebelfire_core::enumerate::{Choice, ChoiceKind, ChoiceLog, EnumStats, RunOrigin, RunSet};
use rebelfire_core::model::{AgentId, Envelope, Label, MessageId, Occurrence, RoundOutcome, Run};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::JobConfig;

pub const TRACE_FORMAT: &str = "rebelfire-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("artifact is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("artifact corrupt: {0}")]
    Corrupt(String),
}

fn corrupt<T>(m: impl Into<String>) -> Result<T, ArtifactError> {
    Err(ArtifactError::Corrupt(m.into()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRound {
    /// `"<agent> <label>"`, fake records prefixed with `~`.
    pub records: Vec<String>,
    /// `"<msg> <from> -> <to>"` for messages in flight without a send record.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub injected: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRun {
    pub origin: String,
    pub initially_faulty: Vec<u16>,
    pub rounds: Vec<TraceRound>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceFile {
    pub format: String,
    pub version: u32,
    pub job: JobConfig,
    pub alphabet: Vec<String>,
    pub fingerprint: Fingerprint,
    pub truncated: bool,
    pub stats: EnumStats,
    pub runs: Vec<TraceRun>,
}

pub struct Codec<'a> {
    pub alphabet: &'a [String],
}

impl Codec<'_> {
    fn msg_name(&self, m: MessageId) -> String {
        self.alphabet.get(m.0 as usize).cloned().unwrap_or_else(|| format!("m{}", m.0))
    }

    fn msg(&self, s: &str) -> Result<MessageId, ArtifactError> {
        if let Some(i) = self.alphabet.iter().position(|a| a == s) {
            return Ok(MessageId(i as u8));
        }
        match s.strip_prefix('m').and_then(|d| d.parse::<u8>().ok()) {
            Some(i) => Ok(MessageId(i)),
            None => corrupt(format!("unknown message `{s}`")),
        }
    }

    pub fn label(&self, l: Label) -> String {
        match l {
            Label::Start => "START".into(),
            Label::Fire => "FIRE".into(),
            Label::Send { msg, to } => format!("send {} {}", self.msg_name(msg), to),
            Label::Receive { msg, from } => format!("recv {} {}", self.msg_name(msg), from),
            Label::BecomeFaulty => "become-faulty".into(),
        }
    }

    pub fn parse_label(&self, s: &str) -> Result<Label, ArtifactError> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        Ok(match parts.as_slice() {
            ["START"] => Label::Start,
            ["FIRE"] => Label::Fire,
            ["become-faulty"] => Label::BecomeFaulty,
            ["send", m, to] => Label::Send { msg: self.msg(m)?, to: agent(to)? },
            ["recv", m, from] => Label::Receive { msg: self.msg(m)?, from: agent(from)? },
            _ => return corrupt(format!("unknown label `{s}`")),
        })
    }

    pub fn record(&self, a: AgentId, o: Occurrence) -> String {
        format!("{a} {}{}", if o.genuine { "" } else { "~" }, self.label(o.label))
    }

    fn parse_record(&self, s: &str) -> Result<(AgentId, Occurrence), ArtifactError> {
        let Some((a, rest)) = s.split_once(' ') else {
            return corrupt(format!("malformed record `{s}`"));
        };
        let (genuine, rest) = match rest.strip_prefix('~') {
            Some(r) => (false, r),
            None => (true, rest),
        };
        Ok((agent(a)?, Occurrence { label: self.parse_label(rest)?, genuine }))
    }

    fn envelope(&self, e: &Envelope) -> String {
        format!("{} {} -> {}", self.msg_name(e.msg), e.from, e.to)
    }

    fn parse_envelope(&self, s: &str, sent: u32) -> Result<Envelope, ArtifactError> {
        match s.split_whitespace().collect::<Vec<_>>().as_slice() {
            [m, from, "->", to] => Ok(Envelope { sent, from: agent(from)?, to: agent(to)?, msg: self.msg(m)? }),
            _ => corrupt(format!("malformed injected message `{s}`")),
        }
    }

    pub fn run(&self, run: &Run, origin: &RunOrigin) -> TraceRun {
        TraceRun {
            origin: origin_text(origin),
            initially_faulty: run.initially_faulty.iter().map(|a| a.0).collect(),
            rounds: run
                .rounds
                .iter()
                .map(|r| TraceRound {
                    records: r.occurrences.iter().map(|&(a, o)| self.record(a, o)).collect(),
                    injected: r.injected.iter().map(|e| self.envelope(e)).collect(),
                })
                .collect(),
        }
    }

    /// Rebuilds a run, re-checking every model invariant.
    pub fn parse_run(&self, t: &TraceRun, n: usize, f: usize, horizon: u32) -> Result<(Run, RunOrigin), ArtifactError> {
        let origin = parse_origin(&t.origin)?;
        let faulty: Vec<AgentId> = t.initially_faulty.iter().map(|&a| AgentId(a)).collect();
        let mut run = Run::new(n, f, horizon, &faulty).or_else(|e| corrupt(e.to_string()))?;
        for (k, r) in t.rounds.iter().enumerate() {
            let mut out = RoundOutcome::default();
            for rec in &r.records {
                let (a, o) = self.parse_record(rec)?;
                out.push(a, o);
            }
            for e in &r.injected {
                out.injected.push(self.parse_envelope(e, k as u32)?);
            }
            run = run.append_round(out).or_else(|e| corrupt(format!("round {k}: {e}")))?;
        }
        if !run.is_complete() {
            return corrupt("run ends before the horizon");
        }
        Ok((run, origin))
    }
}

fn agent(s: &str) -> Result<AgentId, ArtifactError> {
    s.parse::<u16>().map(AgentId).or_else(|_| corrupt(format!("bad agent `{s}`")))
}

/// `F1/5 S0/16 D1/2` for choice logs, `twin 3 1` for the twin of run 3 for
/// agent 1, `pinned` for scripted runs. An empty log prints as `-`.
pub fn origin_text(o: &RunOrigin) -> String {
    match o {
        RunOrigin::Choices(log) => choice_log_text(log),
        RunOrigin::Twin { of, agent } => format!("twin {of} {agent}"),
        RunOrigin::Pinned => "pinned".into(),
    }
}

pub fn choice_log_text(log: &ChoiceLog) -> String {
    if log.0.is_empty() {
        return "-".into();
    }
    let mut s = String::new();
    for (i, c) in log.0.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{}{}/{}", c.kind.tag(), c.index, c.arity);
    }
    s
}

pub fn parse_choice_log(s: &str) -> Result<ChoiceLog, ArtifactError> {
    let s = s.trim();
    if s == "-" {
        return Ok(ChoiceLog::default());
    }
    let mut out = Vec::new();
    for tok in s.split_whitespace() {
        let (tag, rest) = tok.split_at(tok.chars().next().map_or(0, char::len_utf8));
        let kind = ChoiceKind::from_tag(tag).ok_or_else(|| ArtifactError::Corrupt(format!("bad choice `{tok}`")))?;
        let (i, a) = rest.split_once('/').ok_or_else(|| ArtifactError::Corrupt(format!("bad choice `{tok}`")))?;
        let (Ok(index), Ok(arity)) = (i.parse::<u32>(), a.parse::<u32>()) else {
            return corrupt(format!("bad choice `{tok}`"));
        };
        if index >= arity {
            return corrupt(format!("choice index out of range in `{tok}`"));
        }
        out.push(Choice { kind, index, arity });
    }
    Ok(ChoiceLog(out))
}

pub fn parse_origin(s: &str) -> Result<RunOrigin, ArtifactError> {
    if s == "pinned" {
        return Ok(RunOrigin::Pinned);
    }
    if let Some(rest) = s.strip_prefix("twin ") {
        let mut it = rest.split_whitespace();
        let (Some(Ok(of)), Some(a), None) = (it.next().map(str::parse::<u32>), it.next(), it.next()) else {
            return corrupt(format!("bad origin `{s}`"));
        };
        return Ok(RunOrigin::Twin { of, agent: agent(a)? });
    }
    parse_choice_log(s).map(RunOrigin::Choices)
}

impl TraceFile {
    pub fn new(job: &JobConfig, alphabet: Vec<String>, fingerprint: Fingerprint, set: &RunSet) -> TraceFile {
        let codec = Codec { alphabet: &alphabet };
        let runs = set.runs.iter().zip(&set.origins).map(|(r, o)| codec.run(r, o)).collect();
        TraceFile {
            format: TRACE_FORMAT.into(),
            version: TRACE_VERSION,
            job: job.clone(),
            alphabet: alphabet.clone(),
            fingerprint,
            truncated: set.truncated,
            stats: set.stats,
            runs,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("trace serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<TraceFile, ArtifactError> {
        let t: TraceFile = serde_json::from_str(text)?;
        if t.format != TRACE_FORMAT {
            return corrupt(format!("format is `{}`, expected `{TRACE_FORMAT}`", t.format));
        }
        if t.version != TRACE_VERSION {
            return corrupt(format!("unsupported trace version {}", t.version));
        }
        if t.fingerprint.run_count != t.runs.len() {
            return corrupt(format!(
                "fingerprint announces {} runs, file holds {}",
                t.fingerprint.run_count,
                t.runs.len()
            ));
        }
        t.job.validate().or_else(|e| corrupt(e.to_string()))?;
        Ok(t)
    }

    /// Decodes and re-validates every run.
    pub fn run_set(&self) -> Result<RunSet, ArtifactError> {
        let a = &self.job.adversary;
        let codec = Codec { alphabet: &self.alphabet };
        let mut set = RunSet::default();
        for (k, t) in self.runs.iter().enumerate() {
            let (run, origin) = codec.parse_run(t, a.n, a.f, a.horizon)?;
            if let RunOrigin::Twin { of, .. } = origin {
                if of as usize >= self.runs.len() {
                    return corrupt(format!("run {k} is a twin of missing run {of}"));
                }
            }
            if !set.insert(run, origin).1 {
                return corrupt(format!("run {k} is a duplicate"));
            }
        }
        set.truncated = self.truncated;
        set.stats = self.stats;
        Ok(set)
    }
}
