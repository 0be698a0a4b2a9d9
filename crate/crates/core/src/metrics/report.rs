//! Report assembly and reference-table comparison.
//!
//! Reference CSV: `machine,mode,auc_source,auc_target,pauc` in percent, with
//! optional `auc_source_std,auc_target_std,pauc_std` columns. `mode` is
//! `mse` or `mahala`.
//!
//! Report CSV (long format, one row per value):
//! `machine,section,metric,value_pct,reference_pct,delta_pct`, where
//! `metric` is `auc_source`, `auc_target`, `pauc` or `omega` (machine `all`).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{auc_domain, official_score, pauc_section, OfficialScore, ScoredTestSet};
use crate::dataset::Domain;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::scoring::ScoreMode;

const DEV_BASELINE_CSV: &str = include_str!("../../data/dev_baseline_reference.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub machine: String,
    pub mode: ScoreMode,
    pub auc_source: f64,
    pub auc_target: f64,
    pub pauc: f64,
    #[serde(default)]
    pub auc_source_std: Option<f64>,
    #[serde(default)]
    pub auc_target_std: Option<f64>,
    #[serde(default)]
    pub pauc_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReferenceTable {
    pub rows: Vec<ReferenceRow>,
}

impl ReferenceTable {
    /// Published development-set baseline, averaged over five trials.
    pub fn dev_baseline() -> Self {
        Self::from_csv_reader(DEV_BASELINE_CSV.as_bytes()).expect("bundled reference parses")
    }

    pub fn from_csv_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let rows = r.deserialize().collect::<std::result::Result<Vec<ReferenceRow>, _>>()?;
        Ok(ReferenceTable { rows })
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(f)
    }

    pub fn lookup(&self, machine: &str, mode: ScoreMode) -> Option<&ReferenceRow> {
        self.rows.iter().find(|r| r.machine == machine && r.mode == mode)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionMetrics {
    pub machine: String,
    pub section: String,
    pub auc_source: f64,
    pub auc_target: f64,
    pub pauc: f64,
}

impl SectionMetrics {
    pub fn values(&self) -> [f64; 3] {
        [self.auc_source, self.auc_target, self.pauc]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionFailure {
    pub machine: String,
    pub section: String,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MacsFigure {
    pub per_vector: u64,
    /// Vectors per clip, when a clip length is known.
    pub vectors_per_clip: Option<u64>,
}

impl MacsFigure {
    pub fn per_clip(&self) -> Option<u64> {
        self.vectors_per_clip.map(|k| k * self.per_vector)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Sorted by machine, then section.
    pub sections: Vec<SectionMetrics>,
    pub failures: Vec<SectionFailure>,
    pub omega: Option<OfficialScore>,
    /// Some section failed or no section was evaluated.
    pub incomplete: bool,
    pub p: f64,
    pub macs: Option<MacsFigure>,
    pub reference: Option<(ScoreMode, ReferenceTable)>,
}

fn pct(v: f64) -> String {
    format!("{:.2}", 100.0 * v)
}

/// Computes every section's metrics; a section whose metrics are undefined
/// is recorded as a failure and marks the report incomplete.
pub fn build_report(
    set: &ScoredTestSet,
    p: f64,
    macs: Option<MacsFigure>,
    reference: Option<(ScoreMode, ReferenceTable)>,
) -> MetricsReport {
    let mut sections = Vec::new();
    let mut failures = Vec::new();
    for (m, n) in set.sections() {
        let res = (|| {
            Ok::<_, Error>(SectionMetrics {
                auc_source: auc_domain(set, &m, &n, Domain::Source)?,
                auc_target: auc_domain(set, &m, &n, Domain::Target)?,
                pauc: pauc_section(set, &m, &n, p)?,
                machine: m.clone(),
                section: n.clone(),
            })
        })();
        match res {
            Ok(s) => sections.push(s),
            Err(e) => failures.push(SectionFailure {
                machine: m,
                section: n,
                reason: e.to_string(),
            }),
        }
    }
    let values: Vec<f64> = sections.iter().flat_map(SectionMetrics::values).collect();
    let omega = official_score(&values).ok();
    MetricsReport {
        incomplete: !failures.is_empty() || sections.is_empty(),
        sections,
        failures,
        omega,
        p,
        macs,
        reference,
    }
}

impl MetricsReport {
    fn reference_row(&self, machine: &str) -> Option<&ReferenceRow> {
        self.reference.as_ref().and_then(|(mode, t)| t.lookup(machine, *mode))
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["machine", "section", "metric", "value_pct", "reference_pct", "delta_pct"])?;
        for s in &self.sections {
            let r = self.reference_row(&s.machine);
            let refs = r.map(|r| [r.auc_source, r.auc_target, r.pauc]);
            for (i, (name, v)) in ["auc_source", "auc_target", "pauc"]
                .iter()
                .zip(s.values())
                .enumerate()
            {
                let (rp, dp) = match refs {
                    Some(rv) => (format!("{:.2}", rv[i]), format!("{:.2}", 100.0 * v - rv[i])),
                    None => (String::new(), String::new()),
                };
                w.write_record([s.machine.as_str(), &s.section, name, &pct(v), &rp, &dp])?;
            }
        }
        if let Some(o) = &self.omega {
            w.write_record(["all", "", "omega", &pct(o.value), "", ""])?;
        }
        w.into_inner()
            .map_err(|e| Error::Manifest(format!("report csv buffer: {e}")))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_csv_bytes()?)
    }

    /// Fixed-width table with percentages to two decimals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let with_ref = self.reference.is_some();
        let _ = write!(
            out,
            "{:<12} {:<7} {:>12} {:>12} {:>10}",
            "machine", "section", "AUC src [%]", "AUC tgt [%]", "pAUC [%]"
        );
        if with_ref {
            let _ = write!(out, "   {:>9} {:>9} {:>9}", "d src", "d tgt", "d pAUC");
        }
        out.push('\n');
        for s in &self.sections {
            let _ = write!(
                out,
                "{:<12} {:<7} {:>12} {:>12} {:>10}",
                s.machine,
                s.section,
                pct(s.auc_source),
                pct(s.auc_target),
                pct(s.pauc)
            );
            if let Some(r) = self.reference_row(&s.machine) {
                let d = |v: f64, r: f64| format!("{:+.2}", 100.0 * v - r);
                let _ = write!(
                    out,
                    "   {:>9} {:>9} {:>9}",
                    d(s.auc_source, r.auc_source),
                    d(s.auc_target, r.auc_target),
                    d(s.pauc, r.pauc)
                );
            }
            out.push('\n');
        }
        for f in &self.failures {
            let _ = writeln!(out, "{:<12} {:<7} failed: {}", f.machine, f.section, f.reason);
        }
        match &self.omega {
            Some(o) if o.zero_flag => {
                let _ = writeln!(out, "Omega: 0.00 % (a constituent value is 0; {} values)", o.count);
            }
            Some(o) => {
                let _ = writeln!(out, "Omega: {} % over {} values", pct(o.value), o.count);
            }
            None => out.push_str("Omega: undefined\n"),
        }
        if let Some(m) = &self.macs {
            let _ = write!(out, "MACs per vector: {}", m.per_vector);
            if let (Some(k), Some(c)) = (m.vectors_per_clip, m.per_clip()) {
                let _ = write!(out, "; per clip ({k} vectors): {c}");
            }
            out.push('\n');
        }
        if self.incomplete {
            out.push_str("report incomplete\n");
        }
        out
    }
}
