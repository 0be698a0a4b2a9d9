use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Source,
    Target,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    Supplementary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Normal,
    Anomaly,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetRole {
    #[default]
    Development,
    AdditionalTraining,
    Evaluation,
}

macro_rules! display_via_serde_name {
    ($t:ty { $($v:ident => $s:literal),* $(,)? }) => {
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $(<$t>::$v => $s),* })
            }
        }
    };
}

display_via_serde_name!(Domain { Source => "source", Target => "target", Unknown => "unknown" });
display_via_serde_name!(Split { Train => "train", Test => "test", Supplementary => "supplementary" });
display_via_serde_name!(Condition { Normal => "normal", Anomaly => "anomaly", Unknown => "unknown" });
display_via_serde_name!(DatasetRole {
    Development => "development",
    AdditionalTraining => "additional_training",
    Evaluation => "evaluation",
});

/// Attribute key marking a supplementary clip as `clean` or `noise`.
pub const SUPPLEMENTARY_KIND_KEY: &str = "supplementary";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClipRecord {
    /// Path relative to the dataset root, `/`-separated.
    pub path: String,
    pub machine_type: String,
    pub section: String,
    pub domain: Domain,
    pub split: Split,
    pub condition: Condition,
    pub attributes: BTreeMap<String, String>,
}

impl ClipRecord {
    pub fn file_name(&self) -> &str {
        self.path.rsplit('/').next().unwrap_or(&self.path)
    }

    pub fn supplementary_kind(&self) -> Option<&str> {
        self.attributes.get(SUPPLEMENTARY_KIND_KEY).map(String::as_str)
    }

    pub fn validate(&self) -> Result<()> {
        if self.split == Split::Train && self.condition != Condition::Normal {
            return Err(Error::Manifest(format!(
                "{}: training clips must be normal, found {}",
                self.path, self.condition
            )));
        }
        if self.split == Split::Supplementary
            && !matches!(self.supplementary_kind(), Some("clean") | Some("noise"))
        {
            return Err(Error::Manifest(format!(
                "{}: supplementary clip must be tagged clean or noise",
                self.path
            )));
        }
        Ok(())
    }
}

/// Flat CSV representation; attributes are `key=value` pairs joined by `;`.
#[derive(Debug, Serialize, Deserialize)]
struct RecordRow {
    path: String,
    machine_type: String,
    section: String,
    domain: Domain,
    split: Split,
    condition: Condition,
    attributes: String,
}

fn encode_attributes(attrs: &BTreeMap<String, String>) -> String {
    attrs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn decode_attributes(s: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for pair in s.split(';').filter(|p| !p.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::Manifest(format!("malformed attribute pair {pair:?}")))?;
        out.insert(k.to_string(), v.to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub role: DatasetRole,
    pub records: Vec<ClipRecord>,
}

/// Clip counts of one machine type, by split/domain/condition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SectionCounts {
    pub source_train: usize,
    pub target_train: usize,
    pub test_normal_source: usize,
    pub test_normal_target: usize,
    pub test_anomaly: usize,
    pub test_unlabeled: usize,
    pub supplementary: usize,
}

impl SectionCounts {
    pub fn test_total(&self) -> usize {
        self.test_normal_source + self.test_normal_target + self.test_anomaly + self.test_unlabeled
    }
}

impl DatasetManifest {
    pub fn new(role: DatasetRole, mut records: Vec<ClipRecord>) -> Result<Self> {
        records.sort();
        for w in records.windows(2) {
            if w[0].path == w[1].path {
                return Err(Error::DuplicatePath(w[0].path.clone().into()));
            }
        }
        for r in &records {
            r.validate()?;
        }
        Ok(DatasetManifest { role, records })
    }

    pub fn machine_types(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.machine_type.as_str()).collect()
    }

    pub fn for_machine<'a>(&'a self, machine: &'a str) -> impl Iterator<Item = &'a ClipRecord> + 'a {
        self.records.iter().filter(move |r| r.machine_type == machine)
    }

    pub fn get(&self, path: &str) -> Option<&ClipRecord> {
        self.records
            .binary_search_by(|r| r.path.as_str().cmp(path))
            .ok()
            .map(|i| &self.records[i])
    }

    pub fn counts(&self, machine: &str) -> SectionCounts {
        let mut c = SectionCounts::default();
        for r in self.for_machine(machine) {
            match (r.split, r.domain, r.condition) {
                (Split::Train, Domain::Source, _) => c.source_train += 1,
                (Split::Train, Domain::Target, _) => c.target_train += 1,
                (Split::Train, Domain::Unknown, _) => {}
                (Split::Test, Domain::Source, Condition::Normal) => c.test_normal_source += 1,
                (Split::Test, Domain::Target, Condition::Normal) => c.test_normal_target += 1,
                (Split::Test, _, Condition::Anomaly) => c.test_anomaly += 1,
                (Split::Test, _, _) => c.test_unlabeled += 1,
                (Split::Supplementary, _, _) => c.supplementary += 1,
            }
        }
        c
    }

    /// Each machine type must carry exactly one section.
    pub fn check_single_section(&self) -> Result<()> {
        let mut sections: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for r in &self.records {
            sections
                .entry(r.machine_type.as_str())
                .or_default()
                .insert(r.section.as_str());
        }
        for (m, s) in sections {
            if s.len() != 1 {
                return Err(Error::Manifest(format!(
                    "machine type {m} has {} sections {:?}; exactly one is allowed",
                    s.len(),
                    s
                )));
            }
        }
        Ok(())
    }

    /// Deviations from the official per-section layout: 990 source + 10
    /// target training clips, and (outside the evaluation role, where labels
    /// are withheld) 100 normal + 100 anomalous test clips.
    pub fn official_layout_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for m in self.machine_types() {
            let c = self.counts(m);
            if self.role != DatasetRole::Evaluation {
                if c.source_train != 990 || c.target_train != 10 {
                    out.push(format!(
                        "{m}: {} source + {} target training clips (expected 990 + 10)",
                        c.source_train, c.target_train
                    ));
                }
            }
            if self.role == DatasetRole::Development {
                let normals = c.test_normal_source + c.test_normal_target;
                if normals != 100 || c.test_anomaly != 100 {
                    out.push(format!(
                        "{m}: {normals} normal + {} anomalous test clips (expected 100 + 100)",
                        c.test_anomaly
                    ));
                }
            }
            if self.role == DatasetRole::Evaluation && c.test_total() != 200 {
                out.push(format!("{m}: {} test clips (expected 200)", c.test_total()));
            }
        }
        out
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(RecordRow {
                path: r.path.clone(),
                machine_type: r.machine_type.clone(),
                section: r.section.clone(),
                domain: r.domain,
                split: r.split,
                condition: r.condition,
                attributes: encode_attributes(&r.attributes),
            })?;
        }
        if self.records.is_empty() {
            w.write_record([
                "path",
                "machine_type",
                "section",
                "domain",
                "split",
                "condition",
                "attributes",
            ])?;
        }
        w.into_inner()
            .map_err(|e| Error::Manifest(format!("manifest buffer: {e}")))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_atomic(path.as_ref(), &self.to_csv_bytes()?)
    }

    pub fn load_csv(path: impl AsRef<Path>, role: DatasetRole) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv_reader(file, role)
    }

    pub fn from_csv_reader(reader: impl std::io::Read, role: DatasetRole) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let mut records = Vec::new();
        for row in r.deserialize() {
            let row: RecordRow = row?;
            records.push(ClipRecord {
                attributes: decode_attributes(&row.attributes)?,
                path: row.path,
                machine_type: row.machine_type,
                section: row.section,
                domain: row.domain,
                split: row.split,
                condition: row.condition,
            });
        }
        Self::new(role, records)
    }
}

/// Rejects development/evaluation manifests that share a machine type.
pub fn check_first_shot(development: &DatasetManifest, evaluation: &DatasetManifest) -> Result<()> {
    let dev = development.machine_types();
    let shared: Vec<&str> = evaluation
        .machine_types()
        .into_iter()
        .filter(|m| dev.contains(m))
        .collect();
    if !shared.is_empty() {
        return Err(Error::Manifest(format!(
            "development and evaluation share machine types {shared:?}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn rec(path: &str, machine: &str, split: Split, domain: Domain, cond: Condition) -> ClipRecord {
        ClipRecord {
            path: path.into(),
            machine_type: machine.into(),
            section: "00".into(),
            domain,
            split,
            condition: cond,
            attributes: BTreeMap::new(),
        }
    }

    #[test]
    fn training_anomaly_rejected() {
        let r = rec("a.wav", "fan", Split::Train, Domain::Source, Condition::Anomaly);
        assert!(DatasetManifest::new(DatasetRole::Development, vec![r]).is_err());
    }

    #[test]
    fn duplicate_path_rejected() {
        let r = rec("a.wav", "fan", Split::Train, Domain::Source, Condition::Normal);
        assert!(matches!(
            DatasetManifest::new(DatasetRole::Development, vec![r.clone(), r]),
            Err(Error::DuplicatePath(_))
        ));
    }

    #[test]
    fn supplementary_needs_kind() {
        let mut r = rec("s.wav", "fan", Split::Supplementary, Domain::Source, Condition::Unknown);
        assert!(r.validate().is_err());
        r.attributes.insert(SUPPLEMENTARY_KIND_KEY.into(), "noise".into());
        assert!(r.validate().is_ok());
    }

    #[test]
    fn first_shot_and_single_section() {
        let dev = DatasetManifest::new(
            DatasetRole::Development,
            vec![rec("fan/a.wav", "fan", Split::Train, Domain::Source, Condition::Normal)],
        )
        .unwrap();
        let eval_ok = DatasetManifest::new(
            DatasetRole::Evaluation,
            vec![rec("pump/a.wav", "pump", Split::Test, Domain::Unknown, Condition::Unknown)],
        )
        .unwrap();
        let eval_bad = DatasetManifest::new(
            DatasetRole::Evaluation,
            vec![rec("fan/b.wav", "fan", Split::Test, Domain::Unknown, Condition::Unknown)],
        )
        .unwrap();
        assert!(check_first_shot(&dev, &eval_ok).is_ok());
        assert!(check_first_shot(&dev, &eval_bad).is_err());

        let mut r2 = rec("fan/c.wav", "fan", Split::Train, Domain::Source, Condition::Normal);
        r2.section = "01".into();
        let two = DatasetManifest::new(DatasetRole::Development, vec![dev.records[0].clone(), r2]).unwrap();
        assert!(dev.check_single_section().is_ok());
        assert!(two.check_single_section().is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut r = rec("fan/train/x.wav", "fan", Split::Train, Domain::Target, Condition::Normal);
        r.attributes.insert("spd".into(), "28V".into());
        r.attributes.insert("mic".into(), "1".into());
        let m = DatasetManifest::new(DatasetRole::Development, vec![r]).unwrap();
        let bytes = m.to_csv_bytes().unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains("fan/train/x.wav,fan,00,target,train,normal,mic=1;spd=28V"));
        let back = DatasetManifest::from_csv_reader(&bytes[..], DatasetRole::Development).unwrap();
        assert_eq!(back, m);
    }
}
