//! File-name convention:
//!
//! ```text
//! section_<NN>[_<domain>][_<split>][_<condition|supp kind>]_<idx>[_<key>_<value>]*.wav
//! ```
//!
//! e.g. `section_00_source_train_normal_0001_spd_28V.wav`. Missing domain or
//! condition tokens mean "unknown"; a missing split token falls back to the
//! name of the containing directory. All token vocabularies are data, so
//! trees with variant spellings can be ingested by editing the config.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::record::{Condition, Domain, Split, SUPPLEMENTARY_KIND_KEY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NamingConfig {
    pub separator: String,
    pub section_prefix: String,
    pub extension: String,
    pub domain_tokens: BTreeMap<String, Domain>,
    pub split_tokens: BTreeMap<String, Split>,
    pub condition_tokens: BTreeMap<String, Condition>,
    pub supplementary_kinds: Vec<String>,
    /// Single trailing tokens that stand for "no attributes".
    pub empty_attribute_tokens: Vec<String>,
    /// Training clips without a condition token are taken as normal.
    pub train_defaults_to_normal: bool,
}

impl Default for NamingConfig {
    fn default() -> Self {
        NamingConfig {
            separator: "_".into(),
            section_prefix: "section".into(),
            extension: "wav".into(),
            domain_tokens: map(&[("source", Domain::Source), ("target", Domain::Target)]),
            split_tokens: map(&[
                ("train", Split::Train),
                ("test", Split::Test),
                ("supplemental", Split::Supplementary),
                ("supplementary", Split::Supplementary),
            ]),
            condition_tokens: map(&[
                ("normal", Condition::Normal),
                ("anomaly", Condition::Anomaly),
            ]),
            supplementary_kinds: vec!["clean".into(), "noise".into()],
            empty_attribute_tokens: vec!["noAttribute".into(), "noattribute".into()],
            train_defaults_to_normal: true,
        }
    }
}

/// Fields recovered from one file name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedName {
    pub section: String,
    pub domain: Domain,
    pub split: Split,
    pub condition: Condition,
    pub index: String,
    pub attributes: BTreeMap<String, String>,
}

impl NamingConfig {
    /// Parses a bare file name. `dir_split` is the split implied by the
    /// containing directory, used when the name carries none.
    pub fn parse(&self, file_name: &str, dir_split: Option<Split>) -> Result<ParsedName, String> {
        let ext = format!(".{}", self.extension);
        let stem = file_name
            .strip_suffix(&ext)
            .ok_or_else(|| format!("extension is not {ext}"))?;
        let tokens: Vec<&str> = stem.split(self.separator.as_str()).collect();
        let mut it = tokens.into_iter().peekable();
        if it.next() != Some(self.section_prefix.as_str()) {
            return Err(format!("name does not start with {:?}", self.section_prefix));
        }
        let section = it
            .next()
            .filter(|s| !s.is_empty() && s.chars().all(|c| c.is_ascii_digit()))
            .ok_or("missing numeric section id")?
            .to_string();

        let mut domain = Domain::Unknown;
        if let Some(d) = it.peek().and_then(|t| self.domain_tokens.get(*t)) {
            domain = *d;
            it.next();
        }
        let split = match it.peek().and_then(|t| self.split_tokens.get(*t)) {
            Some(s) => {
                let s = *s;
                it.next();
                s
            }
            None => dir_split.ok_or("no split token in name or directory")?,
        };

        let mut attributes = BTreeMap::new();
        let mut condition = Condition::Unknown;
        if let Some(tok) = it.peek().copied() {
            if split == Split::Supplementary && self.supplementary_kinds.iter().any(|k| k == tok) {
                attributes.insert(SUPPLEMENTARY_KIND_KEY.to_string(), tok.to_string());
                it.next();
            } else if let Some(c) = self.condition_tokens.get(tok) {
                condition = *c;
                it.next();
            }
        }
        if split == Split::Train && condition == Condition::Unknown && self.train_defaults_to_normal {
            condition = Condition::Normal;
        }

        let index = it
            .next()
            .filter(|s| !s.is_empty() && s.chars().all(|c| c.is_ascii_digit()))
            .ok_or("missing numeric clip index")?
            .to_string();

        let rest: Vec<&str> = it.collect();
        let attr_tokens: &[&str] = match rest.as_slice() {
            [single] if self.empty_attribute_tokens.iter().any(|e| e == single) => &[],
            other => other,
        };
        if attr_tokens.len() % 2 != 0 {
            return Err(format!(
                "attribute tokens {attr_tokens:?} do not form key/value pairs"
            ));
        }
        for pair in attr_tokens.chunks(2) {
            if pair[0] == SUPPLEMENTARY_KIND_KEY {
                return Err(format!("reserved attribute key {SUPPLEMENTARY_KIND_KEY:?}"));
            }
            attributes.insert(pair[0].to_string(), pair[1].to_string());
        }
        Ok(ParsedName {
            section,
            domain,
            split,
            condition,
            index,
            attributes,
        })
    }

    /// Inverse of [`parse`](Self::parse) for names this config can emit.
    pub fn format(&self, name: &ParsedName) -> String {
        let mut parts: Vec<String> = vec![self.section_prefix.clone(), name.section.clone()];
        if name.domain != Domain::Unknown {
            if let Some(t) = key_for(&self.domain_tokens, &name.domain) {
                parts.push(t.clone());
            }
        }
        parts.push(
            key_for(&self.split_tokens, &name.split)
                .cloned()
                .unwrap_or_else(|| name.split.to_string()),
        );
        if let Some(kind) = name.attributes.get(SUPPLEMENTARY_KIND_KEY) {
            parts.push(kind.clone());
        } else if name.condition != Condition::Unknown {
            if let Some(t) = key_for(&self.condition_tokens, &name.condition) {
                parts.push(t.clone());
            }
        }
        parts.push(name.index.clone());
        for (k, v) in &name.attributes {
            if k != SUPPLEMENTARY_KIND_KEY {
                parts.push(k.clone());
                parts.push(v.clone());
            }
        }
        format!("{}.{}", parts.join(&self.separator), self.extension)
    }
}

fn map<V: Copy>(pairs: &[(&str, V)]) -> BTreeMap<String, V> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn key_for<'a, V: PartialEq>(map: &'a BTreeMap<String, V>, value: &V) -> Option<&'a String> {
    map.iter().find(|(_, v)| *v == value).map(|(k, _)| k)
}
