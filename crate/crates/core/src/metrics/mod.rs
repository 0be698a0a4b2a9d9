//! Evaluation: per-domain AUC, per-section pAUC and the harmonic-mean
//! official score, plus report assembly against a reference table.
//!
//! The AUC for domain `d` pairs the normals of `d` with every anomaly of the
//! section, whichever domain it came from. The pAUC pools normals from both
//! domains and keeps the `floor(p * N)` highest-scoring ones.

pub mod auc;
pub mod report;

use std::collections::BTreeSet;

use crate::dataset::{Condition, DatasetManifest, Domain, Split};
use crate::error::{Error, Result};
use crate::scoring::ScoreRow;

pub use auc::{auc, pauc, pauc_cutoff};
pub use report::{
    build_report, MacsFigure, MetricsReport, ReferenceRow, ReferenceTable, SectionFailure,
    SectionMetrics,
};

pub const DEFAULT_PAUC_P: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredClip {
    pub path: String,
    pub machine: String,
    pub section: String,
    pub domain: Domain,
    pub condition: Condition,
    pub score: f64,
}

/// Labeled, scored test clips. Scores are finite and every clip carries a
/// known domain and condition.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoredTestSet {
    clips: Vec<ScoredClip>,
}

/// Result of joining a score CSV with a ground-truth manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinOutcome {
    pub set: ScoredTestSet,
    /// Scored paths with no manifest entry.
    pub unmatched: Vec<String>,
    /// Rows that carry an error instead of a score.
    pub errored: Vec<String>,
    /// Labeled test clips of the scored machines that received no score.
    pub unscored: Vec<String>,
}

fn normalize_path(p: &str) -> String {
    let p = p.replace('\\', "/");
    p.strip_prefix("./").unwrap_or(&p).to_string()
}

impl ScoredTestSet {
    pub fn new(clips: Vec<ScoredClip>) -> Result<Self> {
        for c in &clips {
            if !c.score.is_finite() {
                return Err(Error::UndefinedMetric(format!("{}: non-finite score", c.path)));
            }
            if c.domain == Domain::Unknown || c.condition == Condition::Unknown {
                return Err(Error::Manifest(format!(
                    "{}: ground truth needs a known domain and condition",
                    c.path
                )));
            }
        }
        Ok(ScoredTestSet { clips })
    }

    pub fn clips(&self) -> &[ScoredClip] {
        &self.clips
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    /// `(machine, section)` pairs present, sorted.
    pub fn sections(&self) -> Vec<(String, String)> {
        self.clips
            .iter()
            .map(|c| (c.machine.clone(), c.section.clone()))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    fn select<'a>(&'a self, m: &'a str, n: &'a str) -> impl Iterator<Item = &'a ScoredClip> + 'a {
        self.clips
            .iter()
            .filter(move |c| c.machine == m && c.section == n)
    }

    fn anomalies(&self, m: &str, n: &str) -> Vec<f64> {
        self.select(m, n)
            .filter(|c| c.condition == Condition::Anomaly)
            .map(|c| c.score)
            .collect()
    }

    /// Joins score rows to manifest records by relative path. Error rows are
    /// set aside; ground truth must be labeled.
    pub fn join(rows: &[ScoreRow], manifest: &DatasetManifest) -> Result<JoinOutcome> {
        let mut clips = Vec::new();
        let mut unmatched = Vec::new();
        let mut errored = Vec::new();
        let mut seen = BTreeSet::new();
        for row in rows {
            let path = normalize_path(&row.clip_path);
            let score = match (row.score, &row.error) {
                (Some(s), None) => s,
                _ => {
                    errored.push(path);
                    continue;
                }
            };
            let Some(rec) = manifest.get(&path) else {
                unmatched.push(path);
                continue;
            };
            if !seen.insert(path.clone()) {
                return Err(Error::DuplicatePath(path.into()));
            }
            clips.push(ScoredClip {
                path,
                machine: rec.machine_type.clone(),
                section: rec.section.clone(),
                domain: rec.domain,
                condition: rec.condition,
                score,
            });
        }
        let machines: BTreeSet<&str> = clips.iter().map(|c| c.machine.as_str()).collect();
        let unscored = manifest
            .records
            .iter()
            .filter(|r| {
                r.split == Split::Test
                    && machines.contains(r.machine_type.as_str())
                    && !seen.contains(&r.path)
                    && !errored.contains(&r.path)
            })
            .map(|r| r.path.clone())
            .collect();
        Ok(JoinOutcome {
            set: ScoredTestSet::new(clips)?,
            unmatched,
            errored,
            unscored,
        })
    }
}

/// AUC of domain `d` in section `(m, n)`: normals of `d` against all
/// anomalies of the section.
pub fn auc_domain(set: &ScoredTestSet, m: &str, n: &str, d: Domain) -> Result<f64> {
    let normals: Vec<f64> = set
        .select(m, n)
        .filter(|c| c.condition == Condition::Normal && c.domain == d)
        .map(|c| c.score)
        .collect();
    auc(&normals, &set.anomalies(m, n))
        .map_err(|e| Error::UndefinedMetric(format!("AUC {m}/{n}/{d}: {e}")))
}

/// pAUC of section `(m, n)` over the `floor(p * N)` top-scoring normals of
/// both domains. Normals are ranked by score descending, then path.
pub fn pauc_section(set: &ScoredTestSet, m: &str, n: &str, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::Config(format!("pAUC rate must be in (0, 1], got {p}")));
    }
    let mut normals: Vec<&ScoredClip> = set
        .select(m, n)
        .filter(|c| c.condition == Condition::Normal)
        .collect();
    let keep = pauc_cutoff(normals.len(), p);
    if keep == 0 {
        return Err(Error::UndefinedMetric(format!(
            "pAUC {m}/{n}: floor({p} * {}) = 0 normal clips in range",
            normals.len()
        )));
    }
    normals.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.path.cmp(&b.path)));
    let top: Vec<f64> = normals[..keep].iter().map(|c| c.score).collect();
    auc(&top, &set.anomalies(m, n)).map_err(|e| Error::UndefinedMetric(format!("pAUC {m}/{n}: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfficialScore {
    pub value: f64,
    /// Some constituent was 0, so the harmonic mean collapsed to 0.
    pub zero_flag: bool,
    pub count: usize,
}

/// Harmonic mean of all per-section AUC and pAUC values.
pub fn official_score(values: &[f64]) -> Result<OfficialScore> {
    if values.is_empty() {
        return Err(Error::UndefinedMetric("official score over no values".into()));
    }
    if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::UndefinedMetric(format!("metric value {v} outside [0, 1]")));
    }
    let count = values.len();
    if values.iter().any(|&v| v == 0.0) {
        return Ok(OfficialScore {
            value: 0.0,
            zero_flag: true,
            count,
        });
    }
    let inv: f64 = values.iter().map(|v| 1.0 / v).sum();
    Ok(OfficialScore {
        value: count as f64 / inv,
        zero_flag: false,
        count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ClipRecord, DatasetRole};
    use crate::scoring::Decision;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn clip(path: &str, d: Domain, c: Condition, score: f64) -> ScoredClip {
        ScoredClip {
            path: path.into(),
            machine: "fan".into(),
            section: "00".into(),
            domain: d,
            condition: c,
            score,
        }
    }

    fn set_from(src_n: &[f64], tgt_n: &[f64], anom: &[f64]) -> ScoredTestSet {
        let mut v = Vec::new();
        for (i, &s) in src_n.iter().enumerate() {
            v.push(clip(&format!("s{i:03}"), Domain::Source, Condition::Normal, s));
        }
        for (i, &s) in tgt_n.iter().enumerate() {
            v.push(clip(&format!("t{i:03}"), Domain::Target, Condition::Normal, s));
        }
        for (i, &s) in anom.iter().enumerate() {
            let d = if i % 2 == 0 { Domain::Source } else { Domain::Target };
            v.push(clip(&format!("a{i:03}"), d, Condition::Anomaly, s));
        }
        ScoredTestSet::new(v).unwrap()
    }

    fn brute(n: &[f64], a: &[f64]) -> f64 {
        let hits: usize = n.iter().map(|x| a.iter().filter(|y| *y > x).count()).sum();
        hits as f64 / (n.len() * a.len()) as f64
    }

    #[test]
    fn worked_examples() {
        let s = set_from(&[0.1, 0.4], &[0.2], &[0.3, 0.5]);
        assert_eq!(auc_domain(&s, "fan", "00", Domain::Source).unwrap(), 0.75);
        assert_eq!(auc_domain(&s, "fan", "00", Domain::Target).unwrap(), 1.0);
        let normals: Vec<f64> = (1..=10).map(|i| i as f64 / 10.0).collect();
        let s = set_from(&normals, &[], &[0.95, 1.05]);
        assert_eq!(pauc_section(&s, "fan", "00", 0.1).unwrap(), 0.5);
        assert!(auc_domain(&s, "fan", "00", Domain::Target).is_err());
        assert!(pauc_section(&set_from(&[0.1; 9], &[], &[1.0]), "fan", "00", 0.1).is_err());
    }

    #[test]
    fn harmonic_mean_cases() {
        assert_eq!(official_score(&[0.5, 0.5]).unwrap().value, 0.5);
        assert_eq!(official_score(&[1.0, 0.5]).unwrap().value, 2.0 / 3.0);
        let z = official_score(&[0.9, 0.0, 0.8]).unwrap();
        assert_eq!((z.value, z.zero_flag, z.count), (0.0, true, 3));
        assert!(official_score(&[]).is_err());
        assert!(official_score(&[1.2]).is_err());
    }

    #[test]
    fn join_reports_unmatched_errors_and_unscored() {
        let rec = |p: &str, d, c| ClipRecord {
            path: p.into(),
            machine_type: "fan".into(),
            section: "00".into(),
            domain: d,
            split: Split::Test,
            condition: c,
            attributes: BTreeMap::new(),
        };
        let m = DatasetManifest::new(
            DatasetRole::Development,
            vec![
                rec("fan/test/a.wav", Domain::Source, Condition::Normal),
                rec("fan/test/b.wav", Domain::Source, Condition::Anomaly),
                rec("fan/test/c.wav", Domain::Target, Condition::Normal),
            ],
        )
        .unwrap();
        let rows = vec![
            ScoreRow::scored("./fan/test/a.wav", 0.1, Decision::Normal),
            ScoreRow::scored("fan/test/zzz.wav", 0.1, Decision::Normal),
            ScoreRow::failed("fan/test/b.wav", "unreadable"),
        ];
        let j = ScoredTestSet::join(&rows, &m).unwrap();
        assert_eq!(j.set.clips().len(), 1);
        assert_eq!(j.unmatched, vec!["fan/test/zzz.wav"]);
        assert_eq!(j.errored, vec!["fan/test/b.wav"]);
        assert_eq!(j.unscored, vec!["fan/test/c.wav"]);
    }

    fn scores() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec((0u8..12).prop_map(|v| v as f64 / 4.0), 1..=50)
    }

    proptest! {
        #[test]
        fn section_metrics_match_pairwise_oracle(
            src in scores(), tgt in scores(), anom in scores(), p in 0.05f64..=1.0
        ) {
            let s = set_from(&src, &tgt, &anom);
            prop_assert_eq!(auc_domain(&s, "fan", "00", Domain::Source).unwrap(), brute(&src, &anom));
            prop_assert_eq!(auc_domain(&s, "fan", "00", Domain::Target).unwrap(), brute(&tgt, &anom));
            let mut pooled: Vec<f64> = src.iter().chain(&tgt).copied().collect();
            pooled.sort_by(|a, b| b.total_cmp(a));
            let keep = (p * pooled.len() as f64).floor() as usize;
            match pauc_section(&s, "fan", "00", p) {
                Ok(v) => prop_assert_eq!(v, brute(&pooled[..keep], &anom)),
                Err(_) => prop_assert_eq!(keep, 0),
            }
        }

        #[test]
        fn harmonic_mean_bounds(vals in prop::collection::vec(0.01f64..=1.0, 1..20)) {
            let o = official_score(&vals).unwrap().value;
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            prop_assert!(o >= min * (1.0 - 1e-12) && o <= mean * (1.0 + 1e-12));
        }
    }
}
