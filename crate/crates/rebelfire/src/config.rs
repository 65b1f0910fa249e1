//! Job configuration files and the presets shipped with the tool.

use std::path::{Path, PathBuf};

use rebelfire_core::checker::PropertyId;
use rebelfire_core::enumerate::AdversaryConfig;
use rebelfire_core::protocol::{self, ProtocolSpec};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unknown preset `{0}` (available: echo-n4f1, remark12, naive-byz, silent)")]
    UnknownPreset(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Text,
    Json,
}

/// Runs added verbatim to the enumerated set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Three agents, `b` byzantine from the start, pinned as run 0.
    Remark12,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    pub trace: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

impl Output {
    fn is_empty(&self) -> bool {
        self.trace.is_none() && self.report.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub protocol: String,
    pub adversary: AdversaryConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    /// Draw this many runs at random instead of enumerating all of them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Property names; empty means the full suite.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub properties: Vec<String>,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Output::is_empty")]
    pub output: Output,
}

pub const PRESETS: [(&str, &str); 4] = [
    ("echo-n4f1", include_str!("../presets/echo-n4f1.toml")),
    ("remark12", include_str!("../presets/remark12.toml")),
    ("naive-byz", include_str!("../presets/naive-byz.toml")),
    ("silent", include_str!("../presets/silent.toml")),
];

impl JobConfig {
    pub fn parse(text: &str) -> Result<JobConfig, ConfigError> {
        let job: JobConfig = toml::from_str(text).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        job.validate()?;
        Ok(job)
    }

    pub fn load(path: &Path) -> Result<JobConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        JobConfig::parse(&text)
    }

    pub fn preset(name: &str) -> Result<JobConfig, ConfigError> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ConfigError::UnknownPreset(name.to_string()))?;
        JobConfig::parse(text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !protocol::PROTOCOL_NAMES.contains(&self.protocol.as_str()) {
            return bad(format!(
                "unknown protocol `{}` (available: {})",
                self.protocol,
                protocol::PROTOCOL_NAMES.join(", ")
            ));
        }
        self.adversary.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.property_ids()?;
        if self.sample == Some(0) {
            return bad("sample must be at least 1".into());
        }
        if self.scenario == Some(Scenario::Remark12) {
            let a = &self.adversary;
            if a.n != 3 || a.f != 1 || a.horizon < 5 {
                return bad("scenario remark12 needs n = 3, f = 1 and horizon >= 5".into());
            }
        }
        Ok(())
    }

    pub fn protocol(&self) -> ProtocolSpec {
        protocol::by_name(&self.protocol, self.adversary.f).expect("validated protocol name")
    }

    /// Requested properties in suite order; the full suite when none are named.
    pub fn property_ids(&self) -> Result<Vec<PropertyId>, ConfigError> {
        parse_properties(&self.properties)
    }
}

pub fn parse_properties<S: AsRef<str>>(names: &[S]) -> Result<Vec<PropertyId>, ConfigError> {
    if names.is_empty() {
        return Ok(PropertyId::ALL.to_vec());
    }
    let mut out = Vec::new();
    for n in names {
        let n = n.as_ref();
        let p = PropertyId::from_name(n).ok_or_else(|| ConfigError::Invalid(format!("unknown property `{n}`")))?;
        out.push(p);
    }
    out.sort();
    out.dedup();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for (name, _) in PRESETS {
            let job = JobConfig::preset(name).unwrap();
            assert!(job.properties.is_empty());
        }
        assert!(matches!(JobConfig::preset("nope"), Err(ConfigError::UnknownPreset(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "protocol = \"silent\"\ncolour = 1\n[adversary]\nn = 1\nf = 0\nhorizon = 1\n";
        assert!(matches!(JobConfig::parse(text), Err(ConfigError::Invalid(_))));
        let nested = "protocol = \"silent\"\n[adversary]\nn = 1\nf = 0\nhorizon = 1\n[adversary.start]\nwhen = 2\n";
        assert!(JobConfig::parse(nested).is_err());
    }

    #[test]
    fn semantic_errors() {
        let base = |extra: &str| format!("protocol = \"silent\"\n{extra}\n[adversary]\nn = 2\nf = 1\nhorizon = 3\n");
        assert!(JobConfig::parse(&base("")).is_ok());
        assert!(JobConfig::parse(&base("properties = [\"Lemma99\"]")).is_err());
        assert!(JobConfig::parse(&base("scenario = \"remark12\"")).is_err());
        assert!(JobConfig::parse(&base("sample = 0")).is_err());
        let proto = "protocol = \"paxos\"\n[adversary]\nn = 2\nf = 1\nhorizon = 3\n";
        assert!(JobConfig::parse(proto).is_err());
        let budget = "protocol = \"silent\"\n[adversary]\nn = 2\nf = 2\nhorizon = 3\n";
        assert!(JobConfig::parse(budget).is_err());
    }

    #[test]
    fn property_lists() {
        assert_eq!(parse_properties::<&str>(&[]).unwrap().len(), 20);
        assert_eq!(parse_properties(&["R", "u", "R"]).unwrap(), vec![PropertyId::U, PropertyId::R]);
    }
}
