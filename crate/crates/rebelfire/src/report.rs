//! Versioned machine-readable check report and the text summary derived
//! from it.

use std::fmt::Write as _;

use rebelfire_core::checker::{CheckReport, Fingerprint, PropertyId, Verdict, Witness};
use rebelfire_core::system::Point;
use serde::{Deserialize, Serialize};

use crate::trace::Codec;

pub const REPORT_FORMAT: &str = "rebelfire-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentView {
    pub agent: u16,
    pub correct: bool,
    /// One entry per nonempty round record, labels joined with `, `.
    pub history: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BucketOut {
    pub agent: u16,
    pub total: usize,
    pub points: Vec<Point>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessOut {
    pub point: Point,
    pub formula: String,
    pub agents: Vec<AgentView>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bucket: Option<BucketOut>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entry {
    pub property: PropertyId,
    pub verdict: Verdict,
    pub notes: Vec<String>,
    pub witnesses: Vec<WitnessOut>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub holds: usize,
    pub violated: usize,
    pub not_applicable: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub format: String,
    pub version: u32,
    pub fingerprint: Fingerprint,
    pub truncated: bool,
    pub summary: Summary,
    pub entries: Vec<Entry>,
}

fn witness_out(codec: &Codec<'_>, w: &Witness) -> WitnessOut {
    let agents = w
        .histories
        .iter()
        .zip(&w.correct)
        .enumerate()
        .map(|(i, (h, &correct))| AgentView {
            agent: i as u16,
            correct,
            history: h
                .rounds
                .iter()
                .map(|r| r.iter().map(|&l| codec.label(l)).collect::<Vec<_>>().join(", "))
                .collect(),
        })
        .collect();
    WitnessOut {
        point: w.point,
        formula: w.formula.clone(),
        agents,
        bucket: w.bucket.as_ref().map(|b| BucketOut { agent: b.agent.0, total: b.total, points: b.points.clone() }),
    }
}

impl ReportFile {
    pub fn new(fingerprint: Fingerprint, truncated: bool, alphabet: &[String], reports: &[CheckReport]) -> ReportFile {
        let codec = Codec { alphabet };
        let mut summary = Summary::default();
        let entries = reports
            .iter()
            .map(|r| {
                match r.verdict {
                    Verdict::Holds => summary.holds += 1,
                    Verdict::Violated => summary.violated += 1,
                    Verdict::NotApplicable => summary.not_applicable += 1,
                }
                Entry {
                    property: r.property,
                    verdict: r.verdict,
                    notes: r.notes.clone(),
                    witnesses: r.witnesses.iter().map(|w| witness_out(&codec, w)).collect(),
                }
            })
            .collect();
        ReportFile { format: REPORT_FORMAT.into(), version: REPORT_VERSION, fingerprint, truncated, summary, entries }
    }

    pub fn any_violated(&self) -> bool {
        self.summary.violated > 0
    }

    pub fn entry(&self, p: PropertyId) -> Option<&Entry> {
        self.entries.iter().find(|e| e.property == p)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<ReportFile, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_text(&self) -> String {
        let fp = &self.fingerprint;
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} n={} f={} horizon={}: {} runs{}, twins {}, {}",
            fp.protocol,
            fp.n,
            fp.f,
            fp.horizon,
            fp.run_count,
            if self.truncated { " (truncated)" } else { "" },
            if fp.twins { "on" } else { "off" },
            fp.delivery,
        );
        if !fp.menu.is_empty() {
            let _ = writeln!(s, "byzantine menu: {}", fp.menu.join(", "));
        }
        let _ = writeln!(s, "eventualities are bounded by the horizon");
        s.push('\n');
        for e in &self.entries {
            let v = match e.verdict {
                Verdict::Violated => "VIOLATED".to_string(),
                v => v.to_string(),
            };
            let _ = writeln!(s, "{:<20} {v}", e.property.name());
            for n in &e.notes {
                let _ = writeln!(s, "    {n}");
            }
            for w in &e.witnesses {
                let _ = writeln!(s, "    at {}: {}", w.point, w.formula);
                for a in &w.agents {
                    let h = if a.history.is_empty() { "-".to_string() } else { a.history.join(" | ") };
                    let _ = writeln!(s, "      {} {}: {h}", a.agent, if a.correct { "correct" } else { "faulty " });
                }
                if let Some(b) = &w.bucket {
                    let pts: Vec<String> = b.points.iter().take(8).map(Point::to_string).collect();
                    let more = if b.total > pts.len() { ", ..." } else { "" };
                    let _ = writeln!(s, "      agent {} cannot tell apart {} points: {}{more}", b.agent, b.total, pts.join(", "));
                }
            }
        }
        let _ = writeln!(
            s,
            "\n{} holds, {} violated, {} not applicable",
            self.summary.holds, self.summary.violated, self.summary.not_applicable
        );
        s
    }
}
