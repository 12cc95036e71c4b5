//! End-to-end streaming: raw cubes in, recognition events out, with
//! per-stage latency accounting.
//!
//! Each frame runs range-Doppler reduction, static-image target detection
//! for the user region of interest, noise elimination, the motion
//! indicator with the dynamic window, and (when a window closes) the
//! classifier. Pacing sleeps between frames to mimic the sensor rate; it
//! changes wall-clock behavior only, never the emitted events.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::augment::{extract_trajectory_profile, DraiSequence};
use crate::config::RadarConfig;
use crate::dtw::{dtw_nearest_neighbor, DtwTemplate};
use crate::error::{Error, Result};
use crate::eval::{compute_cra_mpr, match_events, EvalCounters, GestureBurst, PredictionRecord};
use crate::io::{SegmentEvent, StreamEvent};
use crate::model::Model;
use crate::pipeline::{
    angle_fft, noise_eliminate, range_doppler, static_rai, DraiFrame, PipelineParams,
};
use crate::segment::{
    detect_static_targets, mask_to_roi, select_user_roi, CleanParams, RoiGate, SegmenterParams,
    SegmentWindow, StreamSegmenter,
};
use crate::synth::{
    gesture_trajectory, motion_span, synthesize_frame, AdcCube, GestureKind, GestureScript,
    Scatterer,
};

/// How windows are classified at close.
pub enum StreamClassifier<'a> {
    /// The trained network.
    Network(&'a Model),
    /// Trajectory-profile nearest neighbor, the training-free route.
    Oracle(&'a [DtwTemplate]),
}

pub struct StreamSetup<'a> {
    pub radar: &'a RadarConfig,
    pub pipeline: &'a PipelineParams,
    pub segmenter: &'a SegmenterParams,
    pub clean: &'a CleanParams,
    pub gate: &'a RoiGate,
    pub classifier: Option<StreamClassifier<'a>>,
    /// Sleep to the sensor frame period between frames.
    pub pace: bool,
    pub stream_id: String,
    /// CLEAN detection cap on the static image.
    pub max_targets: usize,
}

impl<'a> StreamSetup<'a> {
    pub fn new(
        radar: &'a RadarConfig,
        pipeline: &'a PipelineParams,
        segmenter: &'a SegmenterParams,
        clean: &'a CleanParams,
        gate: &'a RoiGate,
    ) -> StreamSetup<'a> {
        StreamSetup {
            radar,
            pipeline,
            segmenter,
            clean,
            gate,
            classifier: None,
            pace: false,
            stream_id: "stream".into(),
            max_targets: 5,
        }
    }
}

/// Latency summary of one pipeline stage, milliseconds.
#[derive(Debug, Clone, Default, Serialize)]
pub struct LatencyStats {
    pub samples: usize,
    pub mean_ms: f64,
    pub p99_ms: f64,
    pub max_ms: f64,
}

pub fn summarize_latency(samples_ms: &[f64]) -> LatencyStats {
    if samples_ms.is_empty() {
        return LatencyStats::default();
    }
    let mut sorted = samples_ms.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let p99_idx = ((0.99 * n as f64).ceil() as usize).clamp(1, n) - 1;
    LatencyStats {
        samples: n,
        mean_ms: sorted.iter().sum::<f64>() / n as f64,
        p99_ms: sorted[p99_idx],
        max_ms: sorted[n - 1],
    }
}

#[derive(Debug, Default)]
pub struct StreamReport {
    pub frames: usize,
    /// Recognitions, negative class suppressed.
    pub events: Vec<StreamEvent>,
    /// Every closed window, including suppressed ones.
    pub segments: Vec<SegmentEvent>,
    /// Frame-coordinate predictions backing `events`.
    pub predictions: Vec<PredictionRecord>,
    /// Stage name -> latency summary.
    pub stages: Vec<(String, LatencyStats)>,
    /// Whole-frame processing latency (pacing sleeps excluded).
    pub total: LatencyStats,
    pub counters: Option<EvalCounters>,
    pub cra: Option<f64>,
    pub mpr: Option<f64>,
}

fn classify_window(
    window: &SegmentWindow,
    classifier: &StreamClassifier,
) -> Result<(GestureKind, f64)> {
    match classifier {
        StreamClassifier::Network(model) => {
            let seq = DraiSequence::new(window.frames.clone(), None);
            let (idx, probs) = model.predict(&seq)?;
            let kind = GestureKind::from_label(idx as u8)
                .ok_or_else(|| Error::InvalidLabel(format!("class index {idx}")))?;
            Ok((kind, probs[idx]))
        }
        StreamClassifier::Oracle(templates) => {
            // Static frames inside the window may be all-zero; the profile
            // is built from the informative frames only.
            let frames: Vec<DraiFrame> = window
                .frames
                .iter()
                .filter(|f| f.max_value() > 0.0)
                .cloned()
                .collect();
            if frames.is_empty() {
                return Ok((GestureKind::Negative, 0.0));
            }
            let seq = DraiSequence::new(frames, None);
            let profile = extract_trajectory_profile(&seq)?;
            let (label, _, dist) = dtw_nearest_neighbor(&profile, templates)?;
            Ok((label, 1.0 / (1.0 + dist)))
        }
    }
}

/// Runs the full pipeline over a cube stream. When ground truth is given,
/// the report carries matched counters and CRA/MPR (when defined).
pub fn run_stream<I>(
    cubes: I,
    setup: &StreamSetup,
    truth: Option<&[GestureBurst]>,
) -> Result<StreamReport>
where
    I: IntoIterator<Item = AdcCube>,
{
    setup.radar.validate()?;
    setup.pipeline.validate(setup.radar)?;
    let mut segmenter = StreamSegmenter::new(setup.segmenter.clone())?;
    let period = setup.radar.frame_period();

    let mut report = StreamReport::default();
    let mut t_rd = Vec::new();
    let mut t_roi = Vec::new();
    let mut t_ne = Vec::new();
    let mut t_seg = Vec::new();
    let mut t_inf = Vec::new();
    let mut t_total = Vec::new();

    let stream_start = Instant::now();
    let handle_window = |window: SegmentWindow,
                             report: &mut StreamReport,
                             t_inf: &mut Vec<f64>|
     -> Result<f64> {
        report.segments.push(SegmentEvent {
            stream_id: setup.stream_id.clone(),
            start_frame: window.start_frame,
            end_frame: window.end_frame,
            t_start_s: window.start_frame as f64 * period,
            t_end_s: (window.end_frame + 1) as f64 * period,
        });
        let mut spent = 0.0;
        if let Some(classifier) = &setup.classifier {
            let start = Instant::now();
            let (kind, confidence) = classify_window(&window, classifier)?;
            spent = start.elapsed().as_secs_f64() * 1e3;
            t_inf.push(spent);
            if !kind.is_negative() {
                report.predictions.push(PredictionRecord {
                    start_frame: window.start_frame,
                    end_frame: window.end_frame,
                    label: kind,
                });
                report.events.push(StreamEvent {
                    t_start_s: window.start_frame as f64 * period,
                    t_end_s: (window.end_frame + 1) as f64 * period,
                    class: kind.code().into(),
                    confidence,
                    latency_ms: spent,
                });
            }
        }
        Ok(spent)
    };

    let mut frame_count = 0usize;
    for cube in cubes {
        let frame_idx = cube.frame_index;
        let t0 = Instant::now();

        let rdis = range_doppler(&cube, setup.radar, setup.pipeline)?;
        let rd_ms = t0.elapsed().as_secs_f64() * 1e3;
        t_rd.push(rd_ms);

        let t1 = Instant::now();
        let srai = static_rai(&rdis, setup.radar)?;
        let targets = detect_static_targets(&srai, setup.max_targets, setup.clean);
        let roi = select_user_roi(
            &targets,
            setup.gate,
            setup.radar.range_bins,
            setup.radar.angle_bins,
        );
        let roi_ms = t1.elapsed().as_secs_f64() * 1e3;
        t_roi.push(roi_ms);

        let t2 = Instant::now();
        let elim = noise_eliminate(&rdis, setup.pipeline, setup.radar)?;
        let ne_ms = t2.elapsed().as_secs_f64() * 1e3;
        t_ne.push(ne_ms);

        let t3 = Instant::now();
        let drai = elim
            .drai
            .with_meta(frame_idx, frame_idx as f64 * period);
        let masked = match &roi {
            Some(r) => mask_to_roi(&drai, r),
            None => drai,
        };
        let emitted = segmenter.push(masked);
        let seg_ms = t3.elapsed().as_secs_f64() * 1e3;
        t_seg.push(seg_ms);

        let mut inf_ms = 0.0;
        if let Some(window) = emitted {
            inf_ms = handle_window(window, &mut report, &mut t_inf)?;
        }
        t_total.push(rd_ms + roi_ms + ne_ms + seg_ms + inf_ms);
        frame_count += 1;

        if setup.pace {
            let deadline =
                stream_start + std::time::Duration::from_secs_f64(period * frame_count as f64);
            if let Some(wait) = deadline.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
    }
    if let Some(window) = segmenter.finish() {
        handle_window(window, &mut report, &mut t_inf)?;
    }

    report.frames = frame_count;
    report.stages = vec![
        ("range_doppler".into(), summarize_latency(&t_rd)),
        ("roi".into(), summarize_latency(&t_roi)),
        ("noise_elimination".into(), summarize_latency(&t_ne)),
        ("segmentation".into(), summarize_latency(&t_seg)),
        ("inference".into(), summarize_latency(&t_inf)),
    ];
    report.total = summarize_latency(&t_total);

    if let Some(bursts) = truth {
        let counters = match_events(bursts, &report.predictions)?;
        report.counters = Some(counters);
        if let Ok((cra, mpr)) = compute_cra_mpr(&counters) {
            report.cra = Some(cra);
            report.mpr = Some(mpr);
        }
    }
    Ok(report)
}

/// A scripted continuous recording: static gaps interleaved with gestures.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub scripts: Vec<GestureScript>,
    /// gaps[i] static frames precede script i; gaps[len] trails the last.
    pub gaps: Vec<usize>,
    /// Reflectors present in every frame (the user's body, furniture).
    #[serde(default)]
    pub clutter: Vec<Scatterer>,
    #[serde(default)]
    pub noise_snr_db: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl StreamSpec {
    pub fn validate(&self) -> Result<()> {
        if self.gaps.len() != self.scripts.len() + 1 {
            return Err(Error::Validation(format!(
                "need {} gap entries for {} scripts, got {}",
                self.scripts.len() + 1,
                self.scripts.len(),
                self.gaps.len()
            )));
        }
        Ok(())
    }
}

/// Lazily synthesized cube stream; one cube materializes per `next` call.
pub struct SyntheticStream {
    scenes: Vec<Vec<Scatterer>>,
    config: RadarConfig,
    noise_snr_db: Option<f64>,
    rng: ChaCha8Rng,
    cursor: usize,
}

impl Iterator for SyntheticStream {
    type Item = AdcCube;

    fn next(&mut self) -> Option<AdcCube> {
        if self.cursor >= self.scenes.len() {
            return None;
        }
        let cube = synthesize_frame(
            &self.scenes[self.cursor],
            &self.config,
            self.noise_snr_db,
            self.cursor as u32,
            &mut self.rng,
        );
        self.cursor += 1;
        Some(cube)
    }
}

impl SyntheticStream {
    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }
}

/// Expands a `StreamSpec` into a lazy stream plus ground-truth bursts
/// (kinematic motion spans in stream coordinates). Script-level clutter
/// and noise fields are ignored; the stream-level ones apply throughout.
pub fn plan_stream(
    spec: &StreamSpec,
    config: &RadarConfig,
) -> Result<(SyntheticStream, Vec<GestureBurst>)> {
    spec.validate()?;
    config.validate()?;
    for c in &spec.clutter {
        c.check(config, "stream clutter")?;
    }
    let mut scenes: Vec<Vec<Scatterer>> = Vec::new();
    let mut bursts = Vec::new();
    for (i, script) in spec.scripts.iter().enumerate() {
        for _ in 0..spec.gaps[i] {
            scenes.push(spec.clutter.clone());
        }
        let bare = GestureScript { clutter: Vec::new(), noise_snr_db: None, ..script.clone() };
        let trajectory = gesture_trajectory(&bare, config)?;
        let (m0, m1) = motion_span(&bare, config);
        let base = scenes.len();
        bursts.push(GestureBurst {
            start_frame: base + m0,
            end_frame: base + m1,
            label: script.kind,
        });
        for mut set in trajectory {
            set.extend_from_slice(&spec.clutter);
            scenes.push(set);
        }
    }
    for _ in 0..spec.gaps[spec.scripts.len()] {
        scenes.push(spec.clutter.clone());
    }
    Ok((
        SyntheticStream {
            scenes,
            config: config.clone(),
            noise_snr_db: spec.noise_snr_db,
            rng: ChaCha8Rng::seed_from_u64(spec.seed),
            cursor: 0,
        },
        bursts,
    ))
}

/// Times each processing stage over repeated runs on one representative
/// frame, plus model inference on a 20-frame sequence per provided model.
pub fn bench_pipeline(
    radar: &RadarConfig,
    pipeline: &PipelineParams,
    models: &[(&str, &Model)],
    trials: usize,
) -> Result<Vec<(String, LatencyStats)>> {
    if trials < 100 {
        return Err(Error::Validation(format!("bench needs at least 100 trials, got {trials}")));
    }
    radar.validate()?;
    pipeline.validate(radar)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xbe9c);
    let scene = [
        Scatterer::fixed(0.8, 0.1, 1.5),
        Scatterer { range: 0.6, azimuth: -0.3, radial_velocity: 0.5, reflectivity: 1.0 },
        Scatterer { range: 1.1, azimuth: 0.4, radial_velocity: -0.9, reflectivity: 0.7 },
    ];
    let cube = synthesize_frame(&scene, radar, Some(20.0), 0, &mut rng);

    let mut t_rd = Vec::with_capacity(trials);
    let mut t_angle = Vec::with_capacity(trials);
    let mut t_ne = Vec::with_capacity(trials);
    for _ in 0..trials {
        let t0 = Instant::now();
        let rdis = range_doppler(&cube, radar, pipeline)?;
        t_rd.push(t0.elapsed().as_secs_f64() * 1e3);
        let t1 = Instant::now();
        let tensor = angle_fft(&rdis, radar)?;
        t_angle.push(t1.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(&tensor);
        let t2 = Instant::now();
        let elim = noise_eliminate(&rdis, pipeline, radar)?;
        t_ne.push(t2.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(&elim);
    }
    let mut out = vec![
        ("range_doppler".to_string(), summarize_latency(&t_rd)),
        ("angle_transform".to_string(), summarize_latency(&t_angle)),
        ("noise_elimination".to_string(), summarize_latency(&t_ne)),
    ];

    for (name, model) in models {
        let kb = model.config.input_range_bins;
        let ib = model.config.input_angle_bins;
        let mut mk_rng = ChaCha8Rng::seed_from_u64(7);
        let frames: Vec<DraiFrame> = (0..20)
            .map(|t| {
                let values = (0..kb * ib)
                    .map(|_| rand::Rng::gen::<f32>(&mut mk_rng) * 100.0)
                    .collect();
                DraiFrame::new(values, kb, ib).with_meta(t, t as f64 * 0.05)
            })
            .collect();
        let seq = DraiSequence::new(frames, None);
        let mut t_model = Vec::with_capacity(trials);
        for _ in 0..trials {
            let t0 = Instant::now();
            let pred = model.predict(&seq)?;
            t_model.push(t0.elapsed().as_secs_f64() * 1e3);
            std::hint::black_box(&pred);
        }
        out.push((format!("inference_{name}"), summarize_latency(&t_model)));
    }
    Ok(out)
}
