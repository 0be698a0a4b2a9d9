//! On-disk dataset layout: clip records, file-name parsing, directory scans,
//! attribute tables and a deterministic synthetic generator.

pub mod attributes;
pub mod naming;
pub mod record;
pub mod scan;
pub mod synth;

pub use attributes::{load_attributes_csv, merge_attributes, parse_attributes, AttributeRow, MergeReport};
pub use naming::{NamingConfig, ParsedName};
pub use record::{
    check_first_shot, ClipRecord, Condition, DatasetManifest, DatasetRole, Domain, SectionCounts, Split,
    SUPPLEMENTARY_KIND_KEY,
};
pub use scan::{scan_dataset, ScanOutcome, SkippedFile};
pub use synth::{synth_generate, AnomalyKind, SynthOutcome, SynthSpec, MANIFEST_FILE};
