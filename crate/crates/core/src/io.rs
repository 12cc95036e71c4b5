//! On-disk formats and configuration.
//!
//! Three binary containers, all little-endian with 4-byte ASCII magics:
//! "MMWC" raw cube sequences, "DRAI" range-angle image sequences, "DIGM"
//! model checkpoints. Sidecar data (manifests, event logs) is JSON; the
//! application config is TOML with one section per parameter struct.
//! Unknown keys are rejected everywhere.

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use crate::augment::{AugmentPolicy, DraiSequence};
use crate::config::RadarConfig;
use crate::error::{Error, Result};
use crate::model::train::TrainParams;
use crate::model::{Model, ModelConfig};
use crate::pipeline::{DraiFrame, PipelineParams};
use crate::segment::{CleanParams, RoiGate, SegmenterParams};
use crate::synth::{AdcCube, GestureKind};

pub const MMWC_MAGIC: &[u8; 4] = b"MMWC";
pub const DRAI_MAGIC: &[u8; 4] = b"DRAI";
pub const DIGM_MAGIC: &[u8; 4] = b"DIGM";
pub const FORMAT_VERSION: u16 = 1;
/// Label byte for sequences without a class.
pub const UNLABELED_BYTE: u8 = 255;

/// Frame period assumed when a file carries no timing (20 fps device rate).
const DEFAULT_FRAME_PERIOD: f64 = 0.05;

/// Upper bound on element counts read from headers, against absurd allocs.
const MAX_ELEMENTS: u64 = 1 << 27;

fn format_err(what: impl Into<String>) -> Error {
    Error::Format(what.into())
}

fn check_magic(r: &mut impl Read, expect: &[u8; 4], kind: &str) -> Result<()> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != expect {
        return Err(format_err(format!("not a {kind} file (bad magic)")));
    }
    let version = r.read_u16::<LE>()?;
    if version != FORMAT_VERSION {
        return Err(format_err(format!("unsupported {kind} version {version}")));
    }
    Ok(())
}

fn expect_eof(r: &mut impl Read, kind: &str) -> Result<()> {
    let mut probe = [0u8; 1];
    match r.read(&mut probe)? {
        0 => Ok(()),
        _ => Err(format_err(format!("{kind} file has trailing bytes"))),
    }
}

/// Writes a cube sequence: header (chirps, samples, channels, frame count)
/// then per frame interleaved (re, im) f32 in chirp-major order.
pub fn save_cubes(path: &Path, cubes: &[AdcCube]) -> Result<()> {
    let first = cubes
        .first()
        .ok_or_else(|| Error::Validation("refusing to write an empty cube file".into()))?;
    let (l, s, n) = (first.chirps, first.samples_per_chirp, first.channels);
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MMWC_MAGIC)?;
    w.write_u16::<LE>(FORMAT_VERSION)?;
    w.write_u32::<LE>(l as u32)?;
    w.write_u32::<LE>(s as u32)?;
    w.write_u32::<LE>(n as u32)?;
    w.write_u32::<LE>(cubes.len() as u32)?;
    for cube in cubes {
        if cube.chirps != l || cube.samples_per_chirp != s || cube.channels != n {
            return Err(Error::ShapeMismatch {
                expected: format!("{l}x{s}x{n} cube"),
                got: format!(
                    "{}x{}x{} cube",
                    cube.chirps, cube.samples_per_chirp, cube.channels
                ),
            });
        }
        for v in &cube.data {
            w.write_f32::<LE>(v.re)?;
            w.write_f32::<LE>(v.im)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_cubes(path: &Path) -> Result<Vec<AdcCube>> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, MMWC_MAGIC, "cube")?;
    let l = r.read_u32::<LE>()? as usize;
    let s = r.read_u32::<LE>()? as usize;
    let n = r.read_u32::<LE>()? as usize;
    let frames = r.read_u32::<LE>()? as usize;
    let per_frame = (l as u64) * (s as u64) * (n as u64);
    if per_frame == 0 || per_frame.saturating_mul(frames as u64) > MAX_ELEMENTS {
        return Err(format_err(format!("implausible cube dims {l}x{s}x{n} x{frames}")));
    }
    let mut out = Vec::with_capacity(frames);
    for t in 0..frames {
        let mut cube = AdcCube {
            data: vec![num_complex::Complex32::new(0.0, 0.0); l * s * n],
            chirps: l,
            samples_per_chirp: s,
            channels: n,
            frame_index: t as u32,
        };
        for v in &mut cube.data {
            v.re = r.read_f32::<LE>()?;
            v.im = r.read_f32::<LE>()?;
        }
        out.push(cube);
    }
    expect_eof(&mut r, "cube")?;
    Ok(out)
}

fn label_to_byte(label: Option<GestureKind>) -> u8 {
    label.map_or(UNLABELED_BYTE, |k| k.label())
}

fn byte_to_label(byte: u8) -> Result<Option<GestureKind>> {
    if byte == UNLABELED_BYTE {
        return Ok(None);
    }
    GestureKind::from_label(byte)
        .map(Some)
        .ok_or_else(|| Error::InvalidLabel(format!("label byte {byte}")))
}

/// Writes a DRAI sequence: dims (K, I, T), one label byte, then T frames of
/// row-major f32 pixels.
pub fn save_drai_sequence(path: &Path, seq: &DraiSequence) -> Result<()> {
    seq.validate()?;
    let (k, i) = (seq.frames[0].range_bins, seq.frames[0].angle_bins);
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DRAI_MAGIC)?;
    w.write_u16::<LE>(FORMAT_VERSION)?;
    w.write_u32::<LE>(k as u32)?;
    w.write_u32::<LE>(i as u32)?;
    w.write_u32::<LE>(seq.frames.len() as u32)?;
    w.write_u8(label_to_byte(seq.label))?;
    for frame in &seq.frames {
        for v in &frame.values {
            w.write_f32::<LE>(*v)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads a DRAI sequence. Files carry no timing, so frames are re-indexed
/// 0..T at the 20 fps default period; pixel values round-trip bit-exactly.
pub fn load_drai_sequence(path: &Path) -> Result<DraiSequence> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, DRAI_MAGIC, "DRAI")?;
    let k = r.read_u32::<LE>()? as usize;
    let i = r.read_u32::<LE>()? as usize;
    let t = r.read_u32::<LE>()? as usize;
    if k == 0 || i == 0 || t == 0 || (k as u64) * (i as u64) * (t as u64) > MAX_ELEMENTS {
        return Err(format_err(format!("implausible DRAI dims {k}x{i} x{t}")));
    }
    let label = byte_to_label(r.read_u8()?)?;
    let mut frames = Vec::with_capacity(t);
    for idx in 0..t {
        let mut values = vec![0.0f32; k * i];
        for v in &mut values {
            *v = r.read_f32::<LE>()?;
        }
        frames.push(
            DraiFrame::new(values, k, i)
                .with_meta(idx as u32, idx as f64 * DEFAULT_FRAME_PERIOD),
        );
    }
    expect_eof(&mut r, "DRAI")?;
    let seq = DraiSequence::new(frames, label);
    seq.validate()?;
    Ok(seq)
}

/// Writes a checkpoint: config as a JSON block, declared parameter count,
/// then parameter and batchnorm-statistic tensors in visit order as f32.
pub fn save_model(path: &Path, model: &Model) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(DIGM_MAGIC)?;
    w.write_u16::<LE>(FORMAT_VERSION)?;
    let config = serde_json::to_vec(&model.config)
        .map_err(|e| format_err(format!("config encode: {e}")))?;
    w.write_u32::<LE>(config.len() as u32)?;
    w.write_all(&config)?;
    w.write_u64::<LE>(model.parameter_count() as u64)?;
    let mut io_err = None;
    model.visit_params(|_, tensor| {
        if io_err.is_some() {
            return;
        }
        for &v in tensor {
            if let Err(e) = w.write_f32::<LE>(v as f32) {
                io_err = Some(e);
                return;
            }
        }
    });
    model.visit_buffers(|_, tensor| {
        if io_err.is_some() {
            return;
        }
        for &v in tensor {
            if let Err(e) = w.write_f32::<LE>(v as f32) {
                io_err = Some(e);
                return;
            }
        }
    });
    if let Some(e) = io_err {
        return Err(e.into());
    }
    w.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, DIGM_MAGIC, "checkpoint")?;
    let config_len = r.read_u32::<LE>()? as usize;
    if config_len > 1 << 20 {
        return Err(format_err("implausible checkpoint config size"));
    }
    let mut config_bytes = vec![0u8; config_len];
    r.read_exact(&mut config_bytes)?;
    let config: ModelConfig = serde_json::from_slice(&config_bytes)
        .map_err(|e| format_err(format!("checkpoint config: {e}")))?;
    let declared = r.read_u64::<LE>()? as usize;
    let mut model = Model::new(config, 0)?;
    if declared != model.parameter_count() {
        return Err(format_err(format!(
            "checkpoint declares {declared} parameters, config implies {}",
            model.parameter_count()
        )));
    }
    let mut io_err: Option<std::io::Error> = None;
    let mut fill = |tensor: &mut Vec<f64>, r: &mut BufReader<File>| {
        if io_err.is_some() {
            return;
        }
        for v in tensor.iter_mut() {
            match r.read_f32::<LE>() {
                Ok(x) => *v = x as f64,
                Err(e) => {
                    io_err = Some(e);
                    return;
                }
            }
        }
    };
    model.visit_params_mut(|p, _| fill(p, &mut r));
    model.visit_buffers_mut(|b| fill(b, &mut r));
    if let Some(e) = io_err {
        return Err(e.into());
    }
    expect_eof(&mut r, "checkpoint")?;
    Ok(model)
}

/// One dataset file plus its collection coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub path: String,
    pub user: u32,
    pub room: u32,
    pub location: u32,
    /// Gesture code: PH, PL, LS, RS, CT, AT, NG.
    pub label: String,
    pub format: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::ManifestParse(e.to_string()))
}

pub fn save_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::ManifestParse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Result of dataset ingestion. Bad entries are skipped, not fatal; each
/// failure is described in `issues`.
#[derive(Debug, Default)]
pub struct LoadedDataset {
    pub sequences: Vec<DraiSequence>,
    /// (user, room, location) -> loaded sequence count.
    pub domains: BTreeMap<(u32, u32, u32), usize>,
    pub issues: Vec<String>,
}

/// Loads every manifest entry, resolving paths relative to the manifest.
/// Entry labels override unlabeled files and must agree with labeled ones.
pub fn load_dataset(manifest_path: &Path) -> Result<LoadedDataset> {
    let manifest = load_manifest(manifest_path)?;
    let base = manifest_path.parent().map(PathBuf::from).unwrap_or_default();
    let mut out = LoadedDataset::default();
    for entry in &manifest.entries {
        let mut fail = |why: String| out.issues.push(format!("{}: {why}", entry.path));
        if entry.format != "drai" {
            fail(format!("unsupported format {:?}", entry.format));
            continue;
        }
        let Some(label) = GestureKind::from_code(&entry.label) else {
            fail(format!("unknown label {:?}", entry.label));
            continue;
        };
        let full = base.join(&entry.path);
        let mut seq = match load_drai_sequence(&full) {
            Ok(s) => s,
            Err(e) => {
                fail(e.to_string());
                continue;
            }
        };
        if let Some(file_label) = seq.label {
            if file_label != label {
                fail(format!(
                    "label mismatch: manifest {} vs file {}",
                    label.code(),
                    file_label.code()
                ));
                continue;
            }
        }
        seq.label = Some(label);
        out.sequences.push(seq);
        *out.domains.entry((entry.user, entry.room, entry.location)).or_insert(0) += 1;
    }
    Ok(out)
}

/// Whole-application configuration, one TOML section per parameter struct.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub radar: RadarConfig,
    pub pipeline: PipelineParams,
    pub segmenter: SegmenterParams,
    pub clean: CleanParams,
    pub roi: RoiGate,
    pub model: ModelConfig,
    pub train: TrainParams,
    pub augment: AugmentPolicy,
}

impl AppConfig {
    pub fn validate(&self) -> Result<()> {
        self.radar.validate()?;
        self.pipeline.validate(&self.radar)?;
        self.segmenter.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        self.augment.validate()?;
        Ok(())
    }
}

pub fn load_config(path: &Path) -> Result<AppConfig> {
    let text = std::fs::read_to_string(path)?;
    let config: AppConfig =
        toml::from_str(&text).map_err(|e| Error::ConfigParse(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

pub fn save_config(path: &Path, config: &AppConfig) -> Result<()> {
    let text =
        toml::to_string_pretty(config).map_err(|e| Error::ConfigParse(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Augmentation policy file: JSON object or TOML, mirroring AugmentPolicy.
pub fn load_policy(path: &Path) -> Result<AugmentPolicy> {
    let text = std::fs::read_to_string(path)?;
    let policy: AugmentPolicy = match serde_json::from_str(&text) {
        Ok(p) => p,
        Err(json_err) => toml::from_str(&text).map_err(|toml_err| {
            Error::ConfigParse(format!(
                "policy parses as neither JSON ({json_err}) nor TOML ({toml_err})"
            ))
        })?,
    };
    policy.validate()?;
    Ok(policy)
}

/// Offline segmentation event, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentEvent {
    pub stream_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
    pub t_start_s: f64,
    pub t_end_s: f64,
}

/// Live-stream recognition event, one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamEvent {
    pub t_start_s: f64,
    pub t_end_s: f64,
    pub class: String,
    pub confidence: f64,
    pub latency_ms: f64,
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        let line =
            serde_json::to_string(r).map_err(|e| format_err(format!("jsonl encode: {e}")))?;
        writeln!(w, "{line}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| format_err(format!("jsonl line {}: {e}", n + 1)))?,
        );
    }
    Ok(out)
}
