use std::collections::BTreeMap;
use std::path::Path;

use super::record::DatasetManifest;
use crate::error::{Error, Result};

/// One row of an attribute CSV: a clip name and its key/value pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeRow {
    pub file_name: String,
    pub attributes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeReport {
    pub merged: usize,
    pub warnings: Vec<String>,
}

/// Reads a CSV whose first column names a clip and whose remaining columns
/// alternate key, value (`file_name,d1p,d1v,d2p,d2v,...`). Empty cells are
/// ignored, so concealed machines yield empty maps.
pub fn load_attributes_csv(path: impl AsRef<Path>) -> Result<Vec<AttributeRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_attributes(file)
}

pub fn parse_attributes(reader: impl std::io::Read) -> Result<Vec<AttributeRow>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut fields = rec.iter().map(str::trim);
        let Some(file_name) = fields.next().filter(|f| !f.is_empty()) else {
            continue;
        };
        let rest: Vec<&str> = fields.collect();
        let mut attributes = BTreeMap::new();
        for pair in rest.chunks(2) {
            match pair {
                [k, v] if !k.is_empty() && !v.is_empty() && *k != "noAttribute" => {
                    attributes.insert(k.to_string(), v.to_string());
                }
                [k] if !k.is_empty() && *k != "noAttribute" => {
                    return Err(Error::Manifest(format!(
                        "attribute row for {file_name} has key {k:?} without a value"
                    )))
                }
                _ => {}
            }
        }
        rows.push(AttributeRow {
            file_name: file_name.to_string(),
            attributes,
        });
    }
    Ok(rows)
}

/// Merges attribute rows into matching records. A row name containing `/`
/// must match the end of a record's relative path; a bare name matches the
/// record's file name. Rows matching no clip produce a warning.
pub fn merge_attributes(manifest: &mut DatasetManifest, rows: &[AttributeRow]) -> MergeReport {
    let mut report = MergeReport::default();
    for row in rows {
        let name = row.file_name.as_str();
        let mut hit = false;
        for rec in manifest.records.iter_mut() {
            let matches = if name.contains('/') {
                rec.path == name || rec.path.ends_with(&format!("/{name}"))
            } else {
                rec.file_name() == name
            };
            if matches {
                hit = true;
                for (k, v) in &row.attributes {
                    rec.attributes.insert(k.clone(), v.clone());
                }
            }
        }
        if hit {
            report.merged += 1;
        } else {
            report
                .warnings
                .push(format!("attribute row references unknown clip {name}"));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::record::{ClipRecord, Condition, DatasetRole, Domain, Split};

    fn manifest() -> DatasetManifest {
        DatasetManifest::new(
            DatasetRole::Development,
            vec![ClipRecord {
                path: "fan/train/clip_0001.wav".into(),
                machine_type: "fan".into(),
                section: "00".into(),
                domain: Domain::Source,
                split: Split::Train,
                condition: Condition::Normal,
                attributes: BTreeMap::new(),
            }],
        )
        .unwrap()
    }

    #[test]
    fn simple_row_merges() {
        let rows = parse_attributes(&b"file_name,d1p,d1v\nclip_0001.wav,spd,28V\n"[..]).unwrap();
        assert_eq!(rows[0].attributes.get("spd").unwrap(), "28V");
        let mut m = manifest();
        let rep = merge_attributes(&mut m, &rows);
        assert_eq!(rep.merged, 1);
        assert!(rep.warnings.is_empty());
        assert_eq!(m.records[0].attributes.get("spd").unwrap(), "28V");
    }

    #[test]
    fn empty_csv_changes_nothing() {
        let rows = parse_attributes(&b"file_name,d1p,d1v\n"[..]).unwrap();
        let mut m = manifest();
        let before = m.clone();
        let rep = merge_attributes(&mut m, &rows);
        assert_eq!(rep, MergeReport::default());
        assert_eq!(m, before);
    }

    #[test]
    fn unknown_clip_warns_without_merging() {
        let rows = parse_attributes(&b"file_name,d1p,d1v\nmissing.wav,spd,28V\n"[..]).unwrap();
        let mut m = manifest();
        let rep = merge_attributes(&mut m, &rows);
        assert_eq!(rep.merged, 0);
        assert_eq!(rep.warnings.len(), 1);
        assert!(m.records[0].attributes.is_empty());
    }

    #[test]
    fn path_qualified_names_and_concealed_rows() {
        let csv = b"file_name,d1p,d1v\nfan/train/clip_0001.wav,noAttribute,\n";
        let rows = parse_attributes(&csv[..]).unwrap();
        assert!(rows[0].attributes.is_empty());
        let mut m = manifest();
        assert_eq!(merge_attributes(&mut m, &rows).merged, 1);
        assert!(m.records[0].attributes.is_empty());
    }
}
