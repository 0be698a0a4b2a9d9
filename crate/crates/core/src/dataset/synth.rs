//! Deterministic synthetic machine-sound datasets.
//!
//! Each machine is a harmonic stack with slow amplitude modulation over a
//! pink-ish noise bed. The target domain raises the noise floor and shifts
//! the fundamental; anomalies inject decaying broadband clicks or detune one
//! harmonic. Output follows the same directory and file-name layout that
//! [`scan_dataset`](super::scan_dataset) reads, so a generated tree
//! round-trips through the scanner.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::naming::{NamingConfig, ParsedName};
use super::record::{
    ClipRecord, Condition, DatasetManifest, DatasetRole, Domain, Split, SUPPLEMENTARY_KIND_KEY,
};
use crate::dsp::{write_wav, AudioClip, WavEncoding};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnomalyKind {
    Click,
    Detune,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthEncoding {
    Pcm16,
    Float32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClipCounts {
    pub source_train: usize,
    pub target_train: usize,
    pub test_normal_source: usize,
    pub test_normal_target: usize,
    pub test_anomaly_source: usize,
    pub test_anomaly_target: usize,
    pub supplementary_clean: usize,
    pub supplementary_noise: usize,
}

impl Default for ClipCounts {
    fn default() -> Self {
        ClipCounts {
            source_train: 20,
            target_train: 2,
            test_normal_source: 5,
            test_normal_target: 5,
            test_anomaly_source: 5,
            test_anomaly_target: 5,
            supplementary_clean: 0,
            supplementary_noise: 0,
        }
    }
}

impl ClipCounts {
    pub fn total(&self) -> usize {
        self.source_train
            + self.target_train
            + self.test_normal_source
            + self.test_normal_target
            + self.test_anomaly_source
            + self.test_anomaly_target
            + self.supplementary_clean
            + self.supplementary_noise
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Archetype {
    pub harmonics_min: usize,
    pub harmonics_max: usize,
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    pub am_min_hz: f64,
    pub am_max_hz: f64,
    pub am_depth: f64,
    /// Peak amplitude of the harmonic stack before modulation.
    pub level: f64,
    /// RMS of the source-domain noise bed.
    pub noise_rms: f64,
    /// Per-clip relative spread of the fundamental.
    pub f0_jitter: f64,
}

impl Default for Archetype {
    fn default() -> Self {
        Archetype {
            harmonics_min: 3,
            harmonics_max: 5,
            f0_min_hz: 100.0,
            f0_max_hz: 400.0,
            am_min_hz: 2.0,
            am_max_hz: 8.0,
            am_depth: 0.3,
            level: 0.3,
            noise_rms: 0.01,
            f0_jitter: 0.005,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainShift {
    pub target_noise_gain_db: f64,
    /// Relative fundamental shift; the sign is drawn per machine.
    pub target_f0_shift: f64,
}

impl Default for DomainShift {
    fn default() -> Self {
        DomainShift {
            target_noise_gain_db: 6.0,
            target_f0_shift: 0.03,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnomalySpec {
    /// Anomalous clips cycle through these kinds by index.
    pub kinds: Vec<AnomalyKind>,
    pub clicks_min: usize,
    pub clicks_max: usize,
    pub click_amplitude: f64,
    pub click_decay_ms: f64,
    pub detune_fraction: f64,
}

impl Default for AnomalySpec {
    fn default() -> Self {
        AnomalySpec {
            kinds: vec![AnomalyKind::Click, AnomalyKind::Detune],
            clicks_min: 3,
            clicks_max: 8,
            click_amplitude: 0.5,
            click_decay_ms: 2.0,
            detune_fraction: 0.08,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub role: DatasetRole,
    pub sample_rate: u32,
    pub duration_s: f64,
    pub machines: Vec<String>,
    pub section: String,
    pub encoding: SynthEncoding,
    pub counts: ClipCounts,
    pub archetype: Archetype,
    pub shift: DomainShift,
    pub anomaly: AnomalySpec,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            role: DatasetRole::Development,
            sample_rate: 16_000,
            duration_s: 2.0,
            machines: vec!["synthfan".into()],
            section: "00".into(),
            encoding: SynthEncoding::Pcm16,
            counts: ClipCounts::default(),
            archetype: Archetype::default(),
            shift: DomainShift::default(),
            anomaly: AnomalySpec::default(),
        }
    }
}

impl SynthSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: SynthSpec =
            toml::from_str(s).map_err(|e| Error::Config(format!("synth spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.counts.total() == 0 {
            return bad("synth spec requests zero clips".into());
        }
        if self.machines.is_empty() {
            return bad("synth spec lists no machines".into());
        }
        let mut names = self.machines.clone();
        names.sort();
        names.dedup();
        if names.len() != self.machines.len() {
            return bad("machine names must be unique".into());
        }
        for m in &self.machines {
            if m.is_empty() || m.contains(['/', '\\']) || m.starts_with('.') {
                return bad(format!("invalid machine name {m:?}"));
            }
        }
        if self.section.is_empty() || !self.section.chars().all(|c| c.is_ascii_digit()) {
            return bad(format!("section id must be numeric, got {:?}", self.section));
        }
        if self.sample_rate == 0 || !(self.duration_s > 0.0) {
            return bad("sample_rate and duration_s must be positive".into());
        }
        let a = &self.archetype;
        if a.harmonics_min == 0 || a.harmonics_min > a.harmonics_max {
            return bad("need 1 <= harmonics_min <= harmonics_max".into());
        }
        if !(a.f0_min_hz > 0.0 && a.f0_min_hz <= a.f0_max_hz) {
            return bad("need 0 < f0_min_hz <= f0_max_hz".into());
        }
        let top = a.f0_max_hz * a.harmonics_max as f64 * (1.0 + self.shift.target_f0_shift.abs())
            * (1.0 + self.anomaly.detune_fraction.abs());
        if top >= self.sample_rate as f64 / 2.0 {
            return bad(format!("highest harmonic {top:.0} Hz exceeds Nyquist"));
        }
        if !(a.am_min_hz > 0.0 && a.am_min_hz <= a.am_max_hz) {
            return bad("need 0 < am_min_hz <= am_max_hz".into());
        }
        let an = &self.anomaly;
        let anomalies = self.counts.test_anomaly_source + self.counts.test_anomaly_target;
        if anomalies > 0 && an.kinds.is_empty() {
            return bad("anomalous clips requested but no anomaly kinds given".into());
        }
        if an.clicks_min == 0 || an.clicks_min > an.clicks_max {
            return bad("need 1 <= clicks_min <= clicks_max".into());
        }
        Ok(())
    }

    fn num_samples(&self) -> usize {
        (self.duration_s * self.sample_rate as f64).round() as usize
    }
}

/// Fixed per-machine character drawn once from the seed.
#[derive(Debug, Clone)]
struct MachineVoice {
    f0: f64,
    amplitudes: Vec<f64>,
    am_hz: f64,
    target_shift_sign: f64,
}

impl MachineVoice {
    fn draw(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Self {
        let a = &spec.archetype;
        let f0 = rng.gen_range(a.f0_min_hz..=a.f0_max_hz);
        let n = rng.gen_range(a.harmonics_min..=a.harmonics_max);
        let mut amplitudes: Vec<f64> = (1..=n)
            .map(|h| rng.gen_range(0.8..1.2) / h as f64)
            .collect();
        let sum: f64 = amplitudes.iter().sum();
        amplitudes.iter_mut().for_each(|v| *v /= sum);
        let am_hz = rng.gen_range(a.am_min_hz..=a.am_max_hz);
        let target_shift_sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        MachineVoice {
            f0,
            amplitudes,
            am_hz,
            target_shift_sign,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ClipKind {
    Train,
    TestNormal,
    TestAnomaly,
    SuppClean,
    SuppNoise,
}

/// SplitMix64 finalizer, used to derive independent per-clip seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn clip_seed(seed: u64, machine: usize, stream: u64, index: usize) -> u64 {
    mix(mix(mix(seed) ^ machine as u64) ^ stream) ^ mix(index as u64)
}

/// Pink-ish noise: white noise through a three-pole lowpass cascade
/// (Paul Kellet's economy filter), rescaled to the requested RMS.
fn pink_noise(rng: &mut ChaCha8Rng, n: usize, rms: f64) -> Vec<f64> {
    let (mut b0, mut b1, mut b2) = (0.0f64, 0.0f64, 0.0f64);
    let mut out: Vec<f64> = (0..n)
        .map(|_| {
            let w: f64 = rng.gen_range(-1.0..1.0);
            b0 = 0.99765 * b0 + w * 0.0990460;
            b1 = 0.96300 * b1 + w * 0.2965164;
            b2 = 0.57000 * b2 + w * 1.0526913;
            b0 + b1 + b2 + w * 0.1848
        })
        .collect();
    let cur = (out.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64).sqrt();
    if cur > 0.0 {
        out.iter_mut().for_each(|v| *v *= rms / cur);
    }
    out
}

struct ClipPlan {
    domain: Domain,
    kind: ClipKind,
    anomaly_index: usize,
}

fn render_clip(spec: &SynthSpec, voice: &MachineVoice, plan: &ClipPlan, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = spec.num_samples();
    let sr = spec.sample_rate as f64;
    let a = &spec.archetype;
    let target = plan.domain == Domain::Target;

    let noise_gain = if target {
        10f64.powf(spec.shift.target_noise_gain_db / 20.0)
    } else {
        1.0
    };
    let noise = pink_noise(rng, n, a.noise_rms * noise_gain);
    if plan.kind == ClipKind::SuppNoise {
        return noise;
    }

    let mut f0 = voice.f0 * (1.0 + rng.gen_range(-a.f0_jitter..=a.f0_jitter));
    if target {
        f0 *= 1.0 + voice.target_shift_sign * spec.shift.target_f0_shift;
    }
    let mut freqs: Vec<f64> = (1..=voice.amplitudes.len()).map(|h| f0 * h as f64).collect();
    let anomaly_kind = (plan.kind == ClipKind::TestAnomaly)
        .then(|| spec.anomaly.kinds[plan.anomaly_index % spec.anomaly.kinds.len()]);
    if anomaly_kind == Some(AnomalyKind::Detune) {
        let h = rng.gen_range(0..freqs.len());
        freqs[h] *= 1.0 + spec.anomaly.detune_fraction;
    }
    let phases: Vec<f64> = freqs.iter().map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    let am_phase = rng.gen_range(0.0..2.0 * PI);

    let mut x: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let env = 1.0 + a.am_depth * (2.0 * PI * voice.am_hz * t + am_phase).sin();
            let tone: f64 = freqs
                .iter()
                .zip(&voice.amplitudes)
                .zip(&phases)
                .map(|((f, amp), ph)| amp * (2.0 * PI * f * t + ph).sin())
                .sum();
            a.level * env * tone
        })
        .collect();
    if plan.kind != ClipKind::SuppClean {
        x.iter_mut().zip(&noise).for_each(|(s, w)| *s += w);
    }

    if anomaly_kind == Some(AnomalyKind::Click) {
        let an = &spec.anomaly;
        let clicks = rng.gen_range(an.clicks_min..=an.clicks_max);
        let tau = (an.click_decay_ms * 1e-3 * sr).max(1.0);
        let len = ((5.0 * tau) as usize).max(1);
        for _ in 0..clicks {
            let start = rng.gen_range(0..n);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            for j in 0..len.min(n - start) {
                let burst = if j == 0 { sign } else { rng.gen_range(-1.0..1.0) };
                x[start + j] += an.click_amplitude * burst * (-(j as f64) / tau).exp();
            }
        }
    }
    x.iter_mut().for_each(|v| *v = v.clamp(-1.0, 1.0));
    x
}

fn source_attributes(domain: Domain, voice: &MachineVoice, spec: &SynthSpec) -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    let (pitch, noise) = match domain {
        Domain::Target => (
            100.0 + 100.0 * voice.target_shift_sign * spec.shift.target_f0_shift,
            spec.shift.target_noise_gain_db,
        ),
        _ => (100.0, 0.0),
    };
    m.insert("pitch".into(), format!("{pitch:.0}"));
    m.insert("noise".into(), format!("{noise:.0}dB"));
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutcome {
    pub manifest: DatasetManifest,
}

/// Writes the dataset under `out_dir` (one directory per machine with
/// `train/`, `test/` and `supplemental/` below it) plus `manifest.csv`.
/// Output bytes depend only on `spec` and `seed`.
pub fn synth_generate(spec: &SynthSpec, seed: u64, out_dir: impl AsRef<Path>) -> Result<SynthOutcome> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    let naming = NamingConfig::default();
    let c = &spec.counts;
    let encoding = match spec.encoding {
        SynthEncoding::Pcm16 => WavEncoding::Pcm16,
        SynthEncoding::Float32 => WavEncoding::Float32,
    };

    let mut records = Vec::new();
    for (mi, machine) in spec.machines.iter().enumerate() {
        let mut mrng = ChaCha8Rng::seed_from_u64(clip_seed(seed, mi, u64::MAX, 0));
        let voice = MachineVoice::draw(spec, &mut mrng);

        let groups: [(Split, Domain, Condition, ClipKind, usize, u64); 8] = [
            (Split::Train, Domain::Source, Condition::Normal, ClipKind::Train, c.source_train, 1),
            (Split::Train, Domain::Target, Condition::Normal, ClipKind::Train, c.target_train, 2),
            (Split::Test, Domain::Source, Condition::Normal, ClipKind::TestNormal, c.test_normal_source, 3),
            (Split::Test, Domain::Target, Condition::Normal, ClipKind::TestNormal, c.test_normal_target, 4),
            (Split::Test, Domain::Source, Condition::Anomaly, ClipKind::TestAnomaly, c.test_anomaly_source, 5),
            (Split::Test, Domain::Target, Condition::Anomaly, ClipKind::TestAnomaly, c.test_anomaly_target, 6),
            (Split::Supplementary, Domain::Source, Condition::Unknown, ClipKind::SuppClean, c.supplementary_clean, 7),
            (Split::Supplementary, Domain::Source, Condition::Unknown, ClipKind::SuppNoise, c.supplementary_noise, 8),
        ];
        let mut anomaly_counter = 0usize;
        for (split, domain, condition, kind, count, stream) in groups {
            let split_dir = match split {
                Split::Train => "train",
                Split::Test => "test",
                Split::Supplementary => "supplemental",
            };
            for idx in 0..count {
                let plan = ClipPlan {
                    domain,
                    kind,
                    anomaly_index: anomaly_counter,
                };
                if kind == ClipKind::TestAnomaly {
                    anomaly_counter += 1;
                }
                let mut rng = ChaCha8Rng::seed_from_u64(clip_seed(seed, mi, stream, idx));
                let samples = render_clip(spec, &voice, &plan, &mut rng);
                let mut attributes = source_attributes(domain, &voice, spec);
                match kind {
                    ClipKind::SuppClean => {
                        attributes.insert(SUPPLEMENTARY_KIND_KEY.into(), "clean".into());
                    }
                    ClipKind::SuppNoise => {
                        attributes.insert(SUPPLEMENTARY_KIND_KEY.into(), "noise".into());
                    }
                    _ => {}
                }
                let parsed = ParsedName {
                    section: spec.section.clone(),
                    domain,
                    split,
                    condition,
                    index: format!("{:04}", idx + 1),
                    attributes,
                };
                let file_name = naming.format(&parsed);
                let rel = format!("{machine}/{split_dir}/{file_name}");
                let clip = AudioClip::new(samples.iter().map(|&v| v as f32).collect(), spec.sample_rate)?;
                write_wav(&clip, out_dir.join(&rel), encoding)?;
                records.push(ClipRecord {
                    path: rel,
                    machine_type: machine.clone(),
                    section: parsed.section,
                    domain,
                    split,
                    condition,
                    attributes: parsed.attributes,
                });
            }
        }
    }
    let manifest = DatasetManifest::new(spec.role, records)?;
    manifest.save_csv(out_dir.join(MANIFEST_FILE))?;
    Ok(SynthOutcome { manifest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::scan::scan_dataset;
    use crate::dsp::read_wav;

    fn tiny() -> SynthSpec {
        SynthSpec {
            duration_s: 0.5,
            counts: ClipCounts {
                source_train: 3,
                target_train: 1,
                test_normal_source: 2,
                test_normal_target: 1,
                test_anomaly_source: 2,
                test_anomaly_target: 1,
                supplementary_clean: 1,
                supplementary_noise: 1,
            },
            ..SynthSpec::default()
        }
    }

    #[test]
    fn zero_clips_rejected() {
        let spec = SynthSpec {
            counts: ClipCounts {
                source_train: 0,
                target_train: 0,
                test_normal_source: 0,
                test_normal_target: 0,
                test_anomaly_source: 0,
                test_anomaly_target: 0,
                supplementary_clean: 0,
                supplementary_noise: 0,
            },
            ..SynthSpec::default()
        };
        assert!(matches!(spec.validate(), Err(Error::Config(_))));
        let dir = tempfile::tempdir().unwrap();
        assert!(synth_generate(&spec, 1, dir.path()).is_err());
    }

    #[test]
    fn scan_reproduces_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let spec = tiny();
        let out = synth_generate(&spec, 3, dir.path()).unwrap();
        assert_eq!(out.manifest.records.len(), spec.counts.total());
        let scanned = scan_dataset(dir.path(), &NamingConfig::default(), spec.role).unwrap();
        assert!(scanned.skipped.is_empty());
        assert_eq!(scanned.manifest, out.manifest);
        let on_disk =
            DatasetManifest::load_csv(dir.path().join(MANIFEST_FILE), spec.role).unwrap();
        assert_eq!(on_disk, out.manifest);
        for r in &out.manifest.records {
            let clip = read_wav(dir.path().join(&r.path)).unwrap();
            assert_eq!(clip.len(), 8000);
        }
    }

    #[test]
    fn spec_parses_from_toml() {
        let spec = SynthSpec::from_toml_str(
            "machines = [\"a\", \"b\"]\nduration_s = 1.0\n[counts]\nsource_train = 4\n[anomaly]\nkinds = [\"click\"]\n",
        )
        .unwrap();
        assert_eq!(spec.machines, vec!["a", "b"]);
        assert_eq!(spec.counts.source_train, 4);
        assert_eq!(spec.counts.target_train, 2);
        assert_eq!(spec.anomaly.kinds, vec![AnomalyKind::Click]);
        assert!(SynthSpec::from_toml_str("bogus = 1").is_err());
    }
}
