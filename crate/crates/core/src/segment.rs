//! Continuous-stream segmentation.
//!
//! A per-frame motion indicator (peak-to-background energy ratio on the
//! DRAI) drives a dynamic window: detection fires after W consecutive motion
//! frames, the window grows until W consecutive static frames, and the
//! emitted span runs from the first motion frame of the triggering window to
//! the last motion frame before the closing one. A CLEAN-style loop on the
//! static range-angle image finds persistent bodies so the stream can be
//! gated to the intended user's neighborhood.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::pipeline::DraiFrame;

/// Logarithm used by the motion indicator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Base10,
}

impl LogBase {
    fn log(self, v: f64) -> f64 {
        match self {
            LogBase::Natural => v.ln(),
            LogBase::Base10 => v.log10(),
        }
    }
}

/// Dynamic-window segmentation knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmenterParams {
    /// A frame is "motion" when the indicator strictly exceeds this.
    pub motion_threshold: f64,
    /// W: consecutive agreeing frames needed to open or close a window.
    pub detection_window: usize,
    /// Windows shorter than this many frames are dropped.
    pub min_segment: usize,
    /// Windows are clamped to this many frames and emitted.
    pub max_segment: usize,
    pub log_base: LogBase,
}

impl Default for SegmenterParams {
    fn default() -> Self {
        SegmenterParams {
            motion_threshold: 1.8,
            detection_window: 3,
            min_segment: 6,
            max_segment: 50,
            log_base: LogBase::Natural,
        }
    }
}

impl SegmenterParams {
    pub fn validate(&self) -> Result<()> {
        if !self.motion_threshold.is_finite() {
            return Err(Error::Validation("motion_threshold must be finite".into()));
        }
        if self.detection_window < 2 {
            return Err(Error::Validation("detection_window must be at least 2".into()));
        }
        if self.min_segment == 0 || self.min_segment >= self.max_segment {
            return Err(Error::Validation(format!(
                "segment bounds out of order: [{}, {}]",
                self.min_segment, self.max_segment
            )));
        }
        if self.max_segment < self.detection_window {
            return Err(Error::Validation(
                "max_segment must be at least the detection window".into(),
            ));
        }
        Ok(())
    }
}

/// Peak-to-background energy ratio of one frame.
///
/// The background excludes a cross-shaped guard around the peak: cells
/// within 2 range bins or 4 angle bins of the peak do not count as noise.
/// Exact-zero cells (gated or masked away) are excluded from the noise
/// average too; otherwise a small region mask would deflate the estimate
/// and trip the threshold on noise-only frames. Silent frames yield 0;
/// frames with a peak but no nonzero background yield +infinity.
pub fn motion_indicator(frame: &DraiFrame, params: &SegmenterParams) -> f64 {
    let (kp, ip) = frame.argmax();
    let peak = frame.at(kp, ip) as f64;
    if peak == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for k in 0..frame.range_bins {
        if k.abs_diff(kp) <= 2 {
            continue;
        }
        for i in 0..frame.angle_bins {
            if i.abs_diff(ip) <= 4 {
                continue;
            }
            let v = frame.at(k, i) as f64;
            // Exact zeros carry no measurement: the gate or the region mask
            // removed those cells. Counting them would deflate the noise
            // estimate and inflate the indicator on masked frames.
            if v > 0.0 {
                sum += v;
                count += 1;
            }
        }
    }
    if count == 0 {
        return f64::INFINITY;
    }
    let noise = sum / count as f64;
    params.log_base.log((peak + noise) / noise)
}

/// True when the indicator classifies the frame as motion.
pub fn is_motion(indicator: f64, params: &SegmenterParams) -> bool {
    indicator > params.motion_threshold
}

/// Per-frame indicator values and motion labels seen so far.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MotionIndicatorTrace {
    pub values: Vec<f64>,
    pub labels: Vec<bool>,
}

/// One detected gesture window.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentWindow {
    /// Index of the first frame inside the window (stream coordinates).
    pub start_frame: usize,
    /// Index of the last frame inside the window, inclusive.
    pub end_frame: usize,
    /// The DRAI frames spanning [start_frame, end_frame].
    pub frames: Vec<DraiFrame>,
}

impl SegmentWindow {
    pub fn len(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

enum SegmenterState {
    Idle,
    Active { start: usize, last_motion: usize, frames: Vec<DraiFrame> },
}

/// Incremental dynamic-window segmenter. Feed frames in stream order with
/// `push`; call `finish` at end of stream to flush an open window.
pub struct StreamSegmenter {
    params: SegmenterParams,
    state: SegmenterState,
    /// Labels of the most recent `detection_window` frames.
    recent_labels: VecDeque<bool>,
    /// The most recent `detection_window` frames, for window back-fill.
    recent_frames: VecDeque<DraiFrame>,
    next_index: usize,
    trace: MotionIndicatorTrace,
}

impl StreamSegmenter {
    pub fn new(params: SegmenterParams) -> Result<StreamSegmenter> {
        params.validate()?;
        Ok(StreamSegmenter {
            params,
            state: SegmenterState::Idle,
            recent_labels: VecDeque::new(),
            recent_frames: VecDeque::new(),
            next_index: 0,
            trace: MotionIndicatorTrace::default(),
        })
    }

    pub fn trace(&self) -> &MotionIndicatorTrace {
        &self.trace
    }

    /// Consumes the next frame; returns a window the moment it is decided.
    /// Decisions depend only on frames seen so far.
    pub fn push(&mut self, frame: DraiFrame) -> Option<SegmentWindow> {
        let idx = self.next_index;
        self.next_index += 1;
        let w = self.params.detection_window;

        let eta = motion_indicator(&frame, &self.params);
        let moving = is_motion(eta, &self.params);
        self.trace.values.push(eta);
        self.trace.labels.push(moving);

        self.recent_labels.push_back(moving);
        if self.recent_labels.len() > w {
            self.recent_labels.pop_front();
        }
        self.recent_frames.push_back(frame);
        if self.recent_frames.len() > w {
            self.recent_frames.pop_front();
        }

        match &mut self.state {
            SegmenterState::Idle => {
                if self.recent_labels.len() == w && self.recent_labels.iter().all(|&m| m) {
                    // All of the last w frames are motion; the window starts
                    // at the first of them.
                    let start = idx + 1 - w;
                    let frames: Vec<DraiFrame> = self.recent_frames.iter().cloned().collect();
                    self.state =
                        SegmenterState::Active { start, last_motion: idx, frames };
                    // A pathological max_segment == w clamps immediately.
                    if w >= self.params.max_segment {
                        return self.clamp(idx);
                    }
                }
                None
            }
            SegmenterState::Active { start, last_motion, frames } => {
                frames.push(self.recent_frames.back().unwrap().clone());
                if moving {
                    *last_motion = idx;
                }
                let all_static =
                    self.recent_labels.len() == w && self.recent_labels.iter().all(|&m| !m);
                if all_static {
                    let (start, end) = (*start, *last_motion);
                    let frames = std::mem::take(frames);
                    self.state = SegmenterState::Idle;
                    let len = end + 1 - start;
                    if len >= self.params.min_segment {
                        let keep = frames.into_iter().take(len).collect();
                        return Some(SegmentWindow { start_frame: start, end_frame: end, frames: keep });
                    }
                    return None;
                }
                if idx + 1 - *start >= self.params.max_segment {
                    return self.clamp(idx);
                }
                None
            }
        }
    }

    fn clamp(&mut self, _idx: usize) -> Option<SegmentWindow> {
        if let SegmenterState::Active { start, frames, .. } =
            std::mem::replace(&mut self.state, SegmenterState::Idle)
        {
            let end = start + self.params.max_segment - 1;
            let keep: Vec<DraiFrame> =
                frames.into_iter().take(self.params.max_segment).collect();
            // Re-arming requires fresh evidence: a new window needs
            // detection_window new motion frames.
            self.recent_labels.clear();
            self.recent_frames.clear();
            return Some(SegmentWindow { start_frame: start, end_frame: end, frames: keep });
        }
        None
    }

    /// Flushes a still-open window at end of stream.
    pub fn finish(&mut self) -> Option<SegmentWindow> {
        if let SegmenterState::Active { start, last_motion, frames } =
            std::mem::replace(&mut self.state, SegmenterState::Idle)
        {
            let len = last_motion + 1 - start;
            if len >= self.params.min_segment {
                let keep = frames.into_iter().take(len).collect();
                return Some(SegmentWindow {
                    start_frame: start,
                    end_frame: last_motion,
                    frames: keep,
                });
            }
        }
        None
    }
}

/// Segments a complete recording in one call.
pub fn segment_stream<I>(
    frames: I,
    params: &SegmenterParams,
) -> Result<(Vec<SegmentWindow>, MotionIndicatorTrace)>
where
    I: IntoIterator<Item = DraiFrame>,
{
    let mut seg = StreamSegmenter::new(params.clone())?;
    let mut out = Vec::new();
    for f in frames {
        if let Some(win) = seg.push(f) {
            out.push(win);
        }
    }
    if let Some(win) = seg.finish() {
        out.push(win);
    }
    Ok((out, seg.trace.clone()))
}

/// Iterative peak detection knobs for the static image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CleanParams {
    /// Detection stops once the candidate's power falls below this fraction
    /// of the first (strongest) detection's power.
    pub stop_fraction: f64,
    /// Absolute power floor; candidates below it never count.
    pub noise_floor: f64,
    /// Range half-width of the cancellation rectangle.
    pub cancel_range: usize,
    /// Angle half-width of the cancellation rectangle.
    pub cancel_angle: usize,
}

impl Default for CleanParams {
    fn default() -> Self {
        CleanParams {
            stop_fraction: 0.1,
            noise_floor: 1e-12,
            cancel_range: 2,
            cancel_angle: 4,
        }
    }
}

/// One persistent reflector found in the static image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetDetection {
    pub range_bin: usize,
    pub angle_bin: usize,
    /// Squared peak magnitude.
    pub power: f64,
}

/// Detect-and-cancel loop over the static range-angle image: repeatedly take
/// the strongest cell, record it, and zero its neighborhood, until the next
/// candidate is too weak or `max_targets` are found.
pub fn detect_static_targets(
    srai: &DraiFrame,
    max_targets: usize,
    params: &CleanParams,
) -> Vec<TargetDetection> {
    let mut work = srai.clone();
    let mut out = Vec::new();
    let mut first_power = None;
    while out.len() < max_targets {
        let (k, i) = work.argmax();
        let power = (work.at(k, i) as f64).powi(2);
        if power <= 0.0 || power < params.noise_floor {
            break;
        }
        if let Some(fp) = first_power {
            if power < params.stop_fraction * fp {
                break;
            }
        } else {
            first_power = Some(power);
        }
        out.push(TargetDetection { range_bin: k, angle_bin: i, power });
        let k_lo = k.saturating_sub(params.cancel_range);
        let k_hi = (k + params.cancel_range).min(work.range_bins - 1);
        let i_lo = i.saturating_sub(params.cancel_angle);
        let i_hi = (i + params.cancel_angle).min(work.angle_bins - 1);
        for kk in k_lo..=k_hi {
            for ii in i_lo..=i_hi {
                *work.at_mut(kk, ii) = 0.0;
            }
        }
    }
    out
}

/// Half-widths of the user-centered region of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoiGate {
    pub range_halfwidth: usize,
    pub angle_halfwidth: usize,
}

impl Default for RoiGate {
    fn default() -> Self {
        RoiGate { range_halfwidth: 8, angle_halfwidth: 10 }
    }
}

/// Inclusive bin rectangle the stream is gated to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionOfInterest {
    pub range_lo: usize,
    pub range_hi: usize,
    pub angle_lo: usize,
    pub angle_hi: usize,
}

impl RegionOfInterest {
    pub fn contains(&self, range_bin: usize, angle_bin: usize) -> bool {
        (self.range_lo..=self.range_hi).contains(&range_bin)
            && (self.angle_lo..=self.angle_hi).contains(&angle_bin)
    }
}

/// Centers the gate on the closest detected body (the intended user) and
/// clips it to the image. Returns None when nothing was detected.
pub fn select_user_roi(
    targets: &[TargetDetection],
    gate: &RoiGate,
    range_bins: usize,
    angle_bins: usize,
) -> Option<RegionOfInterest> {
    let user = targets
        .iter()
        .min_by_key(|t| (t.range_bin, t.angle_bin))?;
    Some(RegionOfInterest {
        range_lo: user.range_bin.saturating_sub(gate.range_halfwidth),
        range_hi: (user.range_bin + gate.range_halfwidth).min(range_bins - 1),
        angle_lo: user.angle_bin.saturating_sub(gate.angle_halfwidth),
        angle_hi: (user.angle_bin + gate.angle_halfwidth).min(angle_bins - 1),
    })
}

/// Zeroes everything outside the region of interest.
pub fn mask_to_roi(frame: &DraiFrame, roi: &RegionOfInterest) -> DraiFrame {
    let mut out = DraiFrame::zeroed(frame.range_bins, frame.angle_bins)
        .with_meta(frame.frame_index, frame.timestamp);
    let k_hi = roi.range_hi.min(frame.range_bins - 1);
    let i_hi = roi.angle_hi.min(frame.angle_bins - 1);
    for k in roi.range_lo..=k_hi {
        for i in roi.angle_lo..=i_hi {
            *out.at_mut(k, i) = frame.at(k, i);
        }
    }
    out
}
