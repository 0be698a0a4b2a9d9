use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use asd_core::config::{RunConfig, RUN_CONFIG_FILE};
use asd_core::dataset::{
    load_attributes_csv, merge_attributes, scan_dataset, synth_generate, DatasetManifest,
    DatasetRole, NamingConfig, SynthSpec, MANIFEST_FILE,
};
use asd_core::dsp::{read_wav, FeatureConfig, FeatureExtractor};
use asd_core::fsutil::write_atomic;
use asd_core::metrics::{build_report, MacsFigure, ReferenceTable, ScoredTestSet};
use asd_core::model::{load_model, save_model, AeModel};
use asd_core::pipeline::{score_records, test_records, train_machine};
use asd_core::scoring::{
    load_covariances, read_score_rows, save_covariances, write_score_rows, ScoreMode, Threshold,
    ThresholdSet,
};
use serde::Serialize;

use crate::exit::{Code, Failure, OrExit};
use crate::{EvaluateArgs, MacsArgs, ScanArgs, ScoreArgs, SynthArgs, TrainArgs};

pub const MODEL_FILE: &str = "model.bin";
pub const COVARIANCE_FILE: &str = "covariances.bin";
pub const THRESHOLD_FILE: &str = "thresholds.toml";
pub const LOSS_FILE: &str = "loss_history.csv";
pub const SYNTH_SPEC_ECHO: &str = "synth_spec.toml";

type CmdResult = Result<(), Failure>;

fn read_text(path: &Path, what: &str) -> Result<String, Failure> {
    if !path.exists() {
        return Err(Failure::new(Code::Config, format!("{what} not found: {}", path.display())));
    }
    std::fs::read_to_string(path)
        .map_err(|e| Failure::new(Code::Config, format!("reading {what} {}: {e}", path.display())))
}

fn to_toml<T: Serialize>(v: &T) -> Result<String, Failure> {
    toml::to_string(v).map_err(|e| Failure::new(Code::Config, format!("serializing TOML: {e}")))
}

fn parse_role(s: &str) -> Result<DatasetRole, Failure> {
    match s {
        "development" => Ok(DatasetRole::Development),
        "additional_training" => Ok(DatasetRole::AdditionalTraining),
        "evaluation" => Ok(DatasetRole::Evaluation),
        other => Err(Failure::new(Code::Config, format!("unknown dataset role {other:?}"))),
    }
}

/// Explicit manifest, else `<root>/manifest.csv`, else a scan of `root`.
fn resolve_manifest(root: Option<&Path>, manifest: Option<&Path>) -> Result<DatasetManifest, Failure> {
    if let Some(p) = manifest {
        return DatasetManifest::load_csv(p, DatasetRole::Development).context("loading manifest");
    }
    let root = root.ok_or_else(|| Failure::new(Code::Config, "need --data-root or --manifest"))?;
    let default = root.join(MANIFEST_FILE);
    if default.is_file() {
        return DatasetManifest::load_csv(&default, DatasetRole::Development).context("loading manifest");
    }
    let out = scan_dataset(root, &NamingConfig::default(), DatasetRole::Development).context("scanning dataset")?;
    for s in &out.skipped {
        eprintln!("warning: skipped {}: {}", s.path.display(), s.reason);
    }
    Ok(out.manifest)
}

/// `(model file, artifact directory)` from either form of `--model`.
fn model_paths(model: &Path) -> (PathBuf, PathBuf) {
    if model.is_dir() {
        (model.join(MODEL_FILE), model.to_path_buf())
    } else {
        let dir = model
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        (model.to_path_buf(), dir)
    }
}

/// Run config echoed beside a model, or defaults when there is none.
fn artifact_config(dir: &Path) -> Result<RunConfig, Failure> {
    let p = dir.join(RUN_CONFIG_FILE);
    if p.is_file() {
        RunConfig::load(&p).or_exit(Code::Artifact, "loading echoed run config")
    } else {
        Ok(RunConfig::default())
    }
}

fn check_model_matches(model: &AeModel<f32>, feature: &FeatureConfig) -> CmdResult {
    if model.input_dim() != feature.input_dim() {
        return Err(Failure::new(
            Code::Mismatch,
            format!(
                "model input dimension {} does not match feature dimension {}",
                model.input_dim(),
                feature.input_dim()
            ),
        ));
    }
    Ok(())
}

pub fn synth(a: SynthArgs) -> CmdResult {
    let text = read_text(&a.config, "spec")?;
    let spec = SynthSpec::from_toml_str(&text).context("synth spec")?;
    let out = synth_generate(&spec, a.seed, &a.out).context("generating dataset")?;
    #[derive(Serialize)]
    struct Echo<'a> {
        seed: u64,
        spec: &'a SynthSpec,
    }
    let echo = to_toml(&Echo { seed: a.seed, spec: &spec })?;
    write_atomic(&a.out.join(SYNTH_SPEC_ECHO), echo.as_bytes()).context("writing spec echo")?;
    println!(
        "wrote {} clips for {} machine(s) to {}",
        out.manifest.records.len(),
        spec.machines.len(),
        a.out.display()
    );
    Ok(())
}

pub fn scan(a: ScanArgs) -> CmdResult {
    let naming = match &a.naming {
        Some(p) => toml::from_str::<NamingConfig>(&read_text(p, "naming config")?)
            .map_err(|e| Failure::new(Code::Config, format!("naming config: {e}")))?,
        None => NamingConfig::default(),
    };
    let role = parse_role(&a.role)?;
    let mut outcome = scan_dataset(&a.data_root, &naming, role).context("scanning dataset")?;
    for s in &outcome.skipped {
        eprintln!("warning: skipped {}: {}", s.path.display(), s.reason);
    }
    for p in &a.attributes {
        let rows = load_attributes_csv(p).context("reading attributes")?;
        let rep = merge_attributes(&mut outcome.manifest, &rows);
        for w in &rep.warnings {
            eprintln!("warning: {w}");
        }
    }
    let out = a.out.unwrap_or_else(|| a.data_root.join(MANIFEST_FILE));
    outcome.manifest.save_csv(&out).context("writing manifest")?;
    println!(
        "{} clips, {} skipped, manifest {}",
        outcome.manifest.records.len(),
        outcome.skipped.len(),
        out.display()
    );
    Ok(())
}

pub fn train(a: TrainArgs) -> CmdResult {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::from_toml_str(&read_text(p, "config")?).context("run config")?,
        None => RunConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if let Some(root) = &a.data_root {
        cfg.paths.data_root = Some(root.clone());
    }
    if let Some(out) = &a.out {
        cfg.paths.out = Some(out.clone());
    }
    let cfg = cfg.resolved().context("run config")?;
    let root = cfg
        .paths
        .data_root
        .clone()
        .ok_or_else(|| Failure::new(Code::Config, "no data root (use --data-root)"))?;
    let out = cfg
        .paths
        .out
        .clone()
        .ok_or_else(|| Failure::new(Code::Config, "no output directory (use --out)"))?;

    let manifest = resolve_manifest(Some(&root), a.manifest.as_deref())?;
    if !manifest.machine_types().contains(a.machine.as_str()) {
        return Err(Failure::new(
            Code::Data,
            format!("machine {:?} not in manifest", a.machine),
        ));
    }
    let art = train_machine(&cfg, &root, &manifest, &a.machine).context("training")?;
    for w in &art.warnings {
        eprintln!("warning: {w}");
    }

    save_model(&art.model, out.join(MODEL_FILE)).context("writing model")?;
    if let Some(c) = &art.covariances {
        save_covariances(c, out.join(COVARIANCE_FILE)).context("writing covariances")?;
    }
    write_atomic(&out.join(THRESHOLD_FILE), to_toml(&art.thresholds)?.as_bytes()).context("writing thresholds")?;
    let mut loss = String::from("epoch,loss\n");
    for (i, l) in art.report.loss_history.iter().enumerate() {
        let _ = writeln!(loss, "{},{l}", i + 1);
    }
    write_atomic(&out.join(LOSS_FILE), loss.as_bytes()).context("writing loss history")?;
    cfg.echo_into(&out).context("echoing config")?;

    println!(
        "trained {} on {} clips ({} vectors), final loss {:.6}, artifacts in {}",
        a.machine,
        art.num_clips,
        art.num_vectors,
        art.report.loss_history.last().copied().unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ScoreMeta<'a> {
    machine: &'a str,
    mode: ScoreMode,
    model: String,
    threshold: &'a Threshold,
    scored: usize,
    failed: usize,
    config: &'a RunConfig,
}

pub fn score(a: ScoreArgs) -> CmdResult {
    let (model_file, dir) = model_paths(&a.model);
    let model = load_model(&model_file).or_exit(Code::Artifact, "loading model")?;
    let cfg = artifact_config(&dir)?;
    check_model_matches(&model, &cfg.feature)?;
    let mode = match &a.mode {
        Some(m) => m.parse::<ScoreMode>().context("--mode")?,
        None => cfg.scoring.mode,
    };

    let covariances = match mode {
        ScoreMode::Mse => None,
        ScoreMode::Mahalanobis => {
            let p = dir.join(COVARIANCE_FILE);
            if !p.is_file() {
                return Err(Failure::new(
                    Code::Artifact,
                    format!("mahalanobis mode needs {}", p.display()),
                ));
            }
            let c = load_covariances(&p).or_exit(Code::Artifact, "loading covariances")?;
            if c.dim() != model.input_dim() {
                return Err(Failure::new(
                    Code::Mismatch,
                    format!("covariance dimension {} does not match model {}", c.dim(), model.input_dim()),
                ));
            }
            Some(c)
        }
    };

    let threshold = match a.threshold {
        Some(phi) => Threshold::fixed(phi).context("--threshold")?,
        None => {
            let p = dir.join(THRESHOLD_FILE);
            let text = std::fs::read_to_string(&p)
                .map_err(|e| Failure::new(Code::Artifact, format!("reading {}: {e}", p.display())))?;
            let set: ThresholdSet = toml::from_str(&text)
                .map_err(|e| Failure::new(Code::Artifact, format!("parsing {}: {e}", p.display())))?;
            match mode {
                ScoreMode::Mse => set.mse,
                ScoreMode::Mahalanobis => set.mahalanobis,
            }
            .ok_or_else(|| Failure::new(Code::Artifact, format!("no {mode} threshold in {}", p.display())))?
        }
    };

    let manifest = resolve_manifest(Some(&a.data_root), a.manifest.as_deref())?;
    let records = test_records(&manifest, &a.machine);
    if records.is_empty() {
        return Err(Failure::new(
            Code::Data,
            format!("no test clips for machine {:?}", a.machine),
        ));
    }
    let extractor = FeatureExtractor::new(cfg.feature.clone()).context("feature config")?;
    let rows = score_records(
        &extractor,
        &model,
        mode,
        covariances.as_ref(),
        &threshold,
        &a.data_root,
        &records,
    )
    .context("scoring")?;
    write_score_rows(&rows, &a.out).context("writing scores")?;

    let failed = rows.iter().filter(|r| r.is_error()).count();
    let meta = ScoreMeta {
        machine: &a.machine,
        mode,
        model: model_file.display().to_string(),
        threshold: &threshold,
        scored: rows.len() - failed,
        failed,
        config: &cfg,
    };
    write_atomic(&a.out.with_extension("meta.toml"), to_toml(&meta)?.as_bytes()).context("writing score metadata")?;
    if failed > 0 {
        eprintln!("warning: {failed} clip(s) could not be scored; see the error column");
    }
    println!(
        "scored {} clips ({mode}), {failed} warning(s), threshold {}",
        rows.len(),
        threshold.phi
    );
    Ok(())
}

fn load_reference(spec: &str) -> Result<ReferenceTable, Failure> {
    if spec == "dev" {
        return Ok(ReferenceTable::dev_baseline());
    }
    ReferenceTable::load_csv(spec).context("loading reference table")
}

pub fn evaluate(a: EvaluateArgs) -> CmdResult {
    let rows = read_score_rows(&a.scores).context("reading scores")?;
    let manifest = resolve_manifest(a.data_root.as_deref(), a.manifest.as_deref())?;
    let joined = ScoredTestSet::join(&rows, &manifest).context("joining scores")?;
    if !joined.unmatched.is_empty() {
        let list = joined.unmatched.join("\n  ");
        return Err(Failure::new(
            Code::Mismatch,
            format!("{} scored clip(s) missing from the manifest:\n  {list}", joined.unmatched.len()),
        ));
    }
    if !joined.errored.is_empty() {
        eprintln!("warning: {} clip(s) carry scoring errors and are excluded", joined.errored.len());
    }
    if !joined.unscored.is_empty() {
        eprintln!("warning: {} labeled test clip(s) have no score", joined.unscored.len());
    }

    let mode: ScoreMode = a.mode.parse().context("--mode")?;
    let reference = a.reference.as_deref().map(load_reference).transpose()?.map(|t| (mode, t));
    let macs = match &a.model {
        Some(m) => Some(macs_figure(m, None, None)?),
        None => None,
    };
    let report = build_report(&joined.set, a.pauc_p, macs, reference);
    let table = report.to_table();
    print!("{table}");
    if let Some(out) = &a.out {
        report.save_csv(out.join("report.csv")).context("writing report")?;
        write_atomic(&out.join("report.txt"), table.as_bytes()).context("writing report")?;
    }
    match report.omega {
        Some(o) if o.zero_flag => println!("Omega = 0 (flagged: a constituent metric is 0)"),
        Some(o) => println!("Omega = {:.6}", o.value),
        None => println!("Omega undefined"),
    }
    Ok(())
}

fn macs_figure(model: &Path, config: Option<&Path>, samples: Option<usize>) -> Result<MacsFigure, Failure> {
    let (file, dir) = model_paths(model);
    let model = load_model(&file).or_exit(Code::Artifact, "loading model")?;
    let cfg = match config {
        Some(p) => RunConfig::from_toml_str(&read_text(p, "config")?).context("run config")?,
        None => artifact_config(&dir)?,
    };
    check_model_matches(&model, &cfg.feature)?;
    let samples = samples.unwrap_or((10.0 * cfg.feature.sample_rate as f64) as usize);
    Ok(MacsFigure {
        per_vector: model.count_macs(),
        vectors_per_clip: cfg.feature.vectors_per_clip(samples).map(|k| k as u64),
    })
}

pub fn macs(a: MacsArgs) -> CmdResult {
    let (file, dir) = model_paths(&a.model);
    let cfg = match &a.config {
        Some(p) => RunConfig::from_toml_str(&read_text(p, "config")?).context("run config")?,
        None => artifact_config(&dir)?,
    };
    let sr = cfg.feature.sample_rate;
    let (samples, source) = if a.data_root.is_some() || a.manifest.is_some() {
        let manifest = resolve_manifest(a.data_root.as_deref(), a.manifest.as_deref())?;
        let root = a
            .data_root
            .clone()
            .ok_or_else(|| Failure::new(Code::Config, "--data-root is needed to read clips"))?;
        let rec = manifest
            .records
            .iter()
            .find(|r| a.machine.as_deref().map_or(true, |m| r.machine_type == m) && r.split == asd_core::dataset::Split::Test)
            .ok_or_else(|| Failure::new(Code::Data, "no test clip to measure"))?;
        let clip = read_wav(root.join(&rec.path)).context("reading clip")?;
        (clip.len(), rec.path.clone())
    } else {
        if !(a.clip_seconds > 0.0) {
            return Err(Failure::new(Code::Config, "--clip-seconds must be positive"));
        }
        ((a.clip_seconds * sr as f64).round() as usize, format!("{} s", a.clip_seconds))
    };
    let fig = macs_figure(&file, a.config.as_deref(), Some(samples))?;
    println!("MACs per vector: {}", fig.per_vector);
    match (fig.vectors_per_clip, fig.per_clip()) {
        (Some(k), Some(c)) => {
            println!("vectors per clip: {k} ({samples} samples at {sr} Hz, {source})");
            println!("MACs per clip: {c}");
        }
        _ => println!("clip of {samples} samples is shorter than one stacked vector"),
    }
    Ok(())
}
