//! Round-trip and corruption tests for the on-disk formats: raw cube files,
//! image sequences, checkpoints, the TOML config, and JSONL event logs.

use std::fs;
use std::path::PathBuf;

use num_complex::Complex32;
use proptest::prelude::*;
use tempfile::TempDir;

use mmgesture_core::augment::{AugmentPolicy, DraiSequence};
use mmgesture_core::config::default_config;
use mmgesture_core::io::{
    load_config, load_cubes, load_drai_sequence, load_model, read_jsonl, save_config, save_cubes,
    save_drai_sequence, save_model, write_jsonl, AppConfig, SegmentEvent, StreamEvent,
};
use mmgesture_core::model::train::TrainParams;
use mmgesture_core::model::{Model, ModelConfig};
use mmgesture_core::pipeline::{DraiFrame, PipelineParams};
use mmgesture_core::segment::{CleanParams, RoiGate, SegmenterParams};
use mmgesture_core::synth::{AdcCube, GestureKind};

fn tmp(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn tiny_model_config() -> ModelConfig {
    ModelConfig {
        input_range_bins: 8,
        input_angle_bins: 8,
        conv_filters: vec![2, 3],
        kernel_size: 3,
        embedding_dim: 5,
        lstm_hidden: 4,
        classes: 7,
        dropout: 0.25,
        input_scale: 12.5,
    }
}

fn app_config() -> AppConfig {
    AppConfig {
        radar: default_config(),
        pipeline: PipelineParams::default(),
        segmenter: SegmenterParams::default(),
        clean: CleanParams::default(),
        roi: RoiGate::default(),
        model: ModelConfig::lite(),
        train: TrainParams::default(),
        augment: AugmentPolicy::default(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn cube_files_round_trip(
        chirps in 1usize..6,
        samples in 1usize..6,
        channels in 1usize..4,
        frames in 1usize..4,
        seed_values in prop::collection::vec(-1e6f32..1e6, 2 * 5 * 5 * 3 * 3),
    ) {
        let per = chirps * samples * channels;
        let cubes: Vec<AdcCube> = (0..frames)
            .map(|t| AdcCube {
                data: (0..per)
                    .map(|i| {
                        let at = (t * per + i) % (seed_values.len() / 2);
                        Complex32::new(seed_values[2 * at], seed_values[2 * at + 1])
                    })
                    .collect(),
                chirps,
                samples_per_chirp: samples,
                channels,
                frame_index: t as u32,
            })
            .collect();
        let dir = TempDir::new().unwrap();
        let path = tmp(&dir, "cubes.mmwc");
        save_cubes(&path, &cubes).unwrap();
        let loaded = load_cubes(&path).unwrap();
        prop_assert_eq!(loaded.len(), cubes.len());
        for (a, b) in loaded.iter().zip(&cubes) {
            prop_assert_eq!(a.chirps, b.chirps);
            prop_assert_eq!(a.samples_per_chirp, b.samples_per_chirp);
            prop_assert_eq!(a.channels, b.channels);
            prop_assert_eq!(a.data.len(), b.data.len());
            for (x, y) in a.data.iter().zip(&b.data) {
                prop_assert_eq!(x.re.to_bits(), y.re.to_bits());
                prop_assert_eq!(x.im.to_bits(), y.im.to_bits());
            }
        }
    }

    #[test]
    fn image_sequences_round_trip(
        k in 1usize..9,
        i in 1usize..9,
        t in 1usize..5,
        label_code in 0u8..8,
        pixels in prop::collection::vec(0.0f32..1e5, 8 * 8 * 4),
    ) {
        let label = if label_code == 7 { None } else { GestureKind::from_label(label_code) };
        let frames: Vec<DraiFrame> = (0..t)
            .map(|f| {
                let values: Vec<f32> = (0..k * i)
                    .map(|p| pixels[(f * k * i + p) % pixels.len()])
                    .collect();
                DraiFrame::new(values, k, i).with_meta(f as u32, f as f64 * 0.05)
            })
            .collect();
        let seq = DraiSequence::new(frames, label);
        let dir = TempDir::new().unwrap();
        let path = tmp(&dir, "seq.drai");
        save_drai_sequence(&path, &seq).unwrap();
        let loaded = load_drai_sequence(&path).unwrap();
        prop_assert_eq!(loaded.label, seq.label);
        prop_assert_eq!(loaded.len(), seq.len());
        for (a, b) in loaded.frames.iter().zip(&seq.frames) {
            prop_assert_eq!(a.range_bins, b.range_bins);
            prop_assert_eq!(a.angle_bins, b.angle_bins);
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn event_logs_round_trip(
        n in 0usize..6,
        base in 0.0f64..100.0,
        conf in 0.0f64..1.0,
    ) {
        let events: Vec<StreamEvent> = (0..n)
            .map(|i| StreamEvent {
                t_start_s: base + i as f64,
                t_end_s: base + i as f64 + 0.8,
                class: GestureKind::ALL[i % 7].code().to_string(),
                confidence: conf,
                latency_ms: 3.25 + i as f64,
            })
            .collect();
        let segments: Vec<SegmentEvent> = (0..n)
            .map(|i| SegmentEvent {
                stream_id: format!("s{i}"),
                start_frame: 10 * i,
                end_frame: 10 * i + 8,
                t_start_s: base + i as f64,
                t_end_s: base + i as f64 + 0.4,
            })
            .collect();
        let dir = TempDir::new().unwrap();
        let ep = tmp(&dir, "events.jsonl");
        let sp = tmp(&dir, "segments.jsonl");
        write_jsonl(&ep, &events).unwrap();
        write_jsonl(&sp, &segments).unwrap();
        let e2: Vec<StreamEvent> = read_jsonl(&ep).unwrap();
        let s2: Vec<SegmentEvent> = read_jsonl(&sp).unwrap();
        prop_assert_eq!(e2, events);
        prop_assert_eq!(s2, segments);
    }
}

#[test]
fn checkpoints_restore_parameters_and_buffers() {
    let mut model = Model::new(tiny_model_config(), 123).unwrap();
    // Perturb the buffers away from their init so restoration is visible.
    model.visit_buffers_mut(|b| {
        for (i, v) in b.iter_mut().enumerate() {
            *v = 0.125 * (i as f64 + 1.0);
        }
    });
    let dir = TempDir::new().unwrap();
    let path = tmp(&dir, "model.digm");
    save_model(&path, &model).unwrap();
    let loaded = load_model(&path).unwrap();

    assert_eq!(loaded.config, model.config);
    assert_eq!(loaded.parameter_count(), model.parameter_count());
    let mut original = Vec::new();
    model.visit_params(|name, t| original.push((name.to_string(), t.to_vec())));
    let mut restored = Vec::new();
    loaded.visit_params(|name, t| restored.push((name.to_string(), t.to_vec())));
    assert_eq!(original.len(), restored.len());
    for ((an, at), (bn, bt)) in original.iter().zip(&restored) {
        assert_eq!(an, bn);
        assert_eq!(at.len(), bt.len());
        for (x, y) in at.iter().zip(bt) {
            // Checkpoints store f32; the loaded value is the f32 image.
            assert_eq!((*x as f32).to_bits(), (*y as f32).to_bits());
            assert_eq!(*y, (*x as f32) as f64);
        }
    }
    let mut obuf = Vec::new();
    model.visit_buffers(|_, t| obuf.extend_from_slice(t));
    let mut rbuf = Vec::new();
    loaded.visit_buffers(|_, t| rbuf.extend_from_slice(t));
    assert_eq!(obuf.len(), rbuf.len());
    for (x, y) in obuf.iter().zip(&rbuf) {
        assert_eq!(*y, (*x as f32) as f64);
    }
}

#[test]
fn corrupted_files_are_rejected() {
    let dir = TempDir::new().unwrap();

    let cube = AdcCube {
        data: vec![Complex32::new(1.0, -2.0); 8],
        chirps: 2,
        samples_per_chirp: 2,
        channels: 2,
        frame_index: 0,
    };
    let path = tmp(&dir, "cubes.mmwc");
    save_cubes(&path, &[cube]).unwrap();

    // Bad magic.
    let mut bytes = fs::read(&path).unwrap();
    bytes[0] ^= 0xFF;
    let bad = tmp(&dir, "bad_magic.mmwc");
    fs::write(&bad, &bytes).unwrap();
    assert!(load_cubes(&bad).is_err());

    // Unsupported version.
    let mut bytes = fs::read(&path).unwrap();
    bytes[4] = 9;
    let bad = tmp(&dir, "bad_version.mmwc");
    fs::write(&bad, &bytes).unwrap();
    assert!(load_cubes(&bad).is_err());

    // Truncated payload.
    let bytes = fs::read(&path).unwrap();
    let bad = tmp(&dir, "truncated.mmwc");
    fs::write(&bad, &bytes[..bytes.len() - 3]).unwrap();
    assert!(load_cubes(&bad).is_err());

    // Trailing garbage.
    let mut bytes = fs::read(&path).unwrap();
    bytes.push(0);
    let bad = tmp(&dir, "trailing.mmwc");
    fs::write(&bad, &bytes).unwrap();
    assert!(load_cubes(&bad).is_err());

    // Out-of-range label byte in a DRAI file (offset: 4 magic + 2 version
    // + 12 dims).
    let seq = DraiSequence::new(
        vec![DraiFrame::new(vec![1.0; 4], 2, 2)],
        Some(GestureKind::Push),
    );
    let dpath = tmp(&dir, "seq.drai");
    save_drai_sequence(&dpath, &seq).unwrap();
    let mut bytes = fs::read(&dpath).unwrap();
    bytes[18] = 77;
    let bad = tmp(&dir, "bad_label.drai");
    fs::write(&bad, &bytes).unwrap();
    assert!(load_drai_sequence(&bad).is_err());

    // Checkpoint whose declared parameter count disagrees with its config
    // (the count sits right after the config JSON block).
    let model = Model::new(tiny_model_config(), 5).unwrap();
    let mpath = tmp(&dir, "model.digm");
    save_model(&mpath, &model).unwrap();
    let mut bytes = fs::read(&mpath).unwrap();
    let config_len =
        u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]) as usize;
    let count_at = 10 + config_len;
    bytes[count_at] ^= 0x01;
    let bad = tmp(&dir, "bad_count.digm");
    fs::write(&bad, &bytes).unwrap();
    assert!(load_model(&bad).is_err());
}

#[test]
fn config_files_round_trip_and_reject_unknown_keys() {
    let dir = TempDir::new().unwrap();
    let config = app_config();
    let path = tmp(&dir, "lab.toml");
    save_config(&path, &config).unwrap();
    let loaded = load_config(&path).unwrap();
    let path2 = tmp(&dir, "lab2.toml");
    save_config(&path2, &loaded).unwrap();
    assert_eq!(
        fs::read_to_string(&path).unwrap(),
        fs::read_to_string(&path2).unwrap(),
        "config text must be stable across a save/load/save cycle"
    );

    // Top-level unknown key.
    let mut text = fs::read_to_string(&path).unwrap();
    text.insert_str(0, "mystery = 3\n");
    let bad = tmp(&dir, "unknown_top.toml");
    fs::write(&bad, &text).unwrap();
    assert!(load_config(&bad).is_err());

    // Unknown key nested inside a known section.
    let text = fs::read_to_string(&path).unwrap();
    let nested = text.replacen("[radar]", "[radar]\nmystery = 3", 1);
    assert_ne!(nested, text);
    let bad = tmp(&dir, "unknown_nested.toml");
    fs::write(&bad, &nested).unwrap();
    assert!(load_config(&bad).is_err());

    // A syntactically valid config with an invalid value fails validation.
    let text = fs::read_to_string(&path).unwrap();
    let broken = text.replacen("chirps_per_frame = 128", "chirps_per_frame = 0", 1);
    assert_ne!(broken, text);
    let bad = tmp(&dir, "invalid_value.toml");
    fs::write(&bad, &broken).unwrap();
    assert!(load_config(&bad).is_err());
}
