//! DRAI sequence augmentation.
//!
//! Seven transforms: range/angle translation, speed resampling by frame
//! insertion or removal, time reversal (with label pairing), virtual-array
//! reduction, power scaling, and a rotation+scaling pair that acts on the
//! per-frame peak trajectory and is realized as per-frame integer offsets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RadarConfig;
use crate::error::{Error, Result};
use crate::pipeline::{noise_eliminate_subset, DraiFrame, PipelineParams, RangeDopplerImage};
use crate::synth::GestureKind;

/// A gesture recording after DRAI reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct DraiSequence {
    pub frames: Vec<DraiFrame>,
    pub label: Option<GestureKind>,
    /// Nominal collection azimuth in degrees; power-scaled variants carry
    /// the azimuth they imitate.
    pub angle_tag: f64,
}

impl DraiSequence {
    pub fn new(frames: Vec<DraiFrame>, label: Option<GestureKind>) -> DraiSequence {
        DraiSequence { frames, label, angle_tag: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::Validation("sequence has no frames".into()));
        }
        let (k, i) = (self.frames[0].range_bins, self.frames[0].angle_bins);
        for (t, f) in self.frames.iter().enumerate() {
            if f.range_bins != k || f.angle_bins != i || f.values.len() != k * i {
                return Err(Error::ShapeMismatch {
                    expected: format!("{k}x{i}"),
                    got: format!("frame {t}: {}x{}", f.range_bins, f.angle_bins),
                });
            }
            if f.values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::Validation(format!(
                    "frame {t} contains negative or non-finite pixels"
                )));
            }
        }
        Ok(())
    }

    fn renumber(mut self) -> DraiSequence {
        for (t, f) in self.frames.iter_mut().enumerate() {
            f.frame_index = t as u32;
        }
        self
    }
}

/// Shifts every frame by whole bins; pixels moved outside the image are
/// dropped and vacated cells become zero. Positive shifts move content
/// toward larger bins.
pub fn translate(seq: &DraiSequence, delta_range: i32, delta_angle: i32) -> Result<DraiSequence> {
    seq.validate()?;
    let frames = seq
        .frames
        .iter()
        .map(|f| translate_frame(f, delta_range, delta_angle))
        .collect();
    Ok(DraiSequence { frames, label: seq.label, angle_tag: seq.angle_tag })
}

fn translate_frame(frame: &DraiFrame, delta_range: i32, delta_angle: i32) -> DraiFrame {
    let (kb, ib) = (frame.range_bins, frame.angle_bins);
    let mut out = DraiFrame::zeroed(kb, ib).with_meta(frame.frame_index, frame.timestamp);
    for k in 0..kb as i64 {
        let src_k = k - delta_range as i64;
        if src_k < 0 || src_k >= kb as i64 {
            continue;
        }
        for i in 0..ib as i64 {
            let src_i = i - delta_angle as i64;
            if src_i < 0 || src_i >= ib as i64 {
                continue;
            }
            *out.at_mut(k as usize, i as usize) = frame.at(src_k as usize, src_i as usize);
        }
    }
    out
}

/// Direction of speed resampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleMode {
    /// Slow the gesture down: after every `interval`-th frame, insert the
    /// arithmetic mean of the two frames around the boundary.
    /// New length: T + floor((T-1)/interval).
    Insert,
    /// Speed the gesture up: delete every `interval`-th frame.
    /// New length: T - floor(T/interval).
    Remove,
}

/// Changes the apparent gesture speed by inserting interpolated frames or
/// deleting frames at a fixed cadence.
pub fn resample_speed(
    seq: &DraiSequence,
    interval: u32,
    mode: ResampleMode,
) -> Result<DraiSequence> {
    seq.validate()?;
    if interval < 2 {
        return Err(Error::Validation(format!(
            "resample interval must be at least 2, got {interval}"
        )));
    }
    let t = seq.len();
    if t <= interval as usize {
        return Err(Error::Validation(format!(
            "sequence of {t} frames is too short for interval {interval}"
        )));
    }
    let interval = interval as usize;
    let mut frames: Vec<DraiFrame> = Vec::new();
    match mode {
        ResampleMode::Insert => {
            for (idx, f) in seq.frames.iter().enumerate() {
                frames.push(f.clone());
                let one_based = idx + 1;
                if one_based % interval == 0 && one_based < t {
                    frames.push(mean_frame(f, &seq.frames[idx + 1]));
                }
            }
        }
        ResampleMode::Remove => {
            for (idx, f) in seq.frames.iter().enumerate() {
                if (idx + 1) % interval != 0 {
                    frames.push(f.clone());
                }
            }
        }
    }
    Ok(DraiSequence { frames, label: seq.label, angle_tag: seq.angle_tag }.renumber())
}

fn mean_frame(a: &DraiFrame, b: &DraiFrame) -> DraiFrame {
    let values = a
        .values
        .iter()
        .zip(b.values.iter())
        .map(|(x, y)| 0.5 * (x + y))
        .collect();
    DraiFrame::new(values, a.range_bins, a.angle_bins)
        .with_meta(a.frame_index, 0.5 * (a.timestamp + b.timestamp))
}

/// Plays the recording backwards and maps the label to its motion-reversed
/// partner. Rejects the negative class, whose reversal is undefined.
pub fn reverse_sequence(seq: &DraiSequence) -> Result<DraiSequence> {
    seq.validate()?;
    let label = match seq.label {
        Some(kind) => Some(kind.reversed().ok_or_else(|| {
            Error::InvalidLabel(format!("{} has no reversed counterpart", kind.code()))
        })?),
        None => None,
    };
    // Pixel contents reverse over the original time grid.
    let mut frames: Vec<DraiFrame> = seq.frames.iter().rev().cloned().collect();
    for (t, f) in frames.iter_mut().enumerate() {
        f.timestamp = seq.frames[t].timestamp;
    }
    Ok(DraiSequence { frames, label, angle_tag: seq.angle_tag }.renumber())
}

/// Recomputes DRAI frames using only the first `keep` virtual channels,
/// imitating a sensor with a smaller aperture. `channel_frames` holds the
/// per-frame channel maps in array order. `keep` equal to the full array
/// reproduces the standard reduction exactly.
pub fn reduce_antennas(
    channel_frames: &[Vec<RangeDopplerImage>],
    keep: usize,
    config: &RadarConfig,
    params: &PipelineParams,
) -> Result<Vec<DraiFrame>> {
    config.validate()?;
    params.validate(config)?;
    if keep < 2 || keep > config.virtual_channels() {
        return Err(Error::Validation(format!(
            "keep must lie in [2, {}], got {keep}",
            config.virtual_channels()
        )));
    }
    let mut out = Vec::with_capacity(channel_frames.len());
    for (t, rdis) in channel_frames.iter().enumerate() {
        if rdis.len() < keep {
            return Err(Error::ShapeMismatch {
                expected: format!("at least {keep} channels"),
                got: format!("frame {t}: {}", rdis.len()),
            });
        }
        for (n, rdi) in rdis[..keep].iter().enumerate() {
            if rdi.channel != n {
                return Err(Error::Validation(format!(
                    "frame {t}: channel maps out of array order at slot {n}"
                )));
            }
        }
        let elim = noise_eliminate_subset(&rdis[..keep], params, config)?;
        out.push(
            elim.drai
                .with_meta(t as u32, t as f64 * config.frame_period()),
        );
    }
    Ok(out)
}

/// Multiplies every pixel by `alpha`, imitating the weaker returns of
/// gestures performed at extreme azimuths.
pub fn scale_power(seq: &DraiSequence, alpha: f32) -> Result<DraiSequence> {
    seq.validate()?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Validation(format!("alpha must be positive, got {alpha}")));
    }
    let frames = seq
        .frames
        .iter()
        .map(|f| {
            DraiFrame::new(
                f.values.iter().map(|v| v * alpha).collect(),
                f.range_bins,
                f.angle_bins,
            )
            .with_meta(f.frame_index, f.timestamp)
        })
        .collect();
    Ok(DraiSequence { frames, label: seq.label, angle_tag: seq.angle_tag })
}

/// Per-frame peak track of a sequence, in 1-based bin coordinates:
/// x is the angle coordinate, y the range coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryProfile {
    pub points: Vec<(f64, f64)>,
}

impl TrajectoryProfile {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Reads the per-frame peak positions. Ties resolve to the smallest range
/// bin, then the smallest angle bin. Fails on a frame with no nonzero pixel.
pub fn extract_trajectory_profile(seq: &DraiSequence) -> Result<TrajectoryProfile> {
    seq.validate()?;
    let mut points = Vec::with_capacity(seq.len());
    for (t, f) in seq.frames.iter().enumerate() {
        if f.values.iter().all(|&v| v == 0.0) {
            return Err(Error::Validation(format!(
                "frame {t} is all-zero; the peak track is undefined"
            )));
        }
        let (k, i) = f.argmax();
        points.push(((i + 1) as f64, (k + 1) as f64));
    }
    Ok(TrajectoryProfile { points })
}

/// Rotation by `beta` about `center`, in homogeneous form: the translation
/// part is c_x(1-cos) + c_y sin and c_y(1-cos) - c_x sin.
pub fn rotate_about(p: (f64, f64), beta: f64, center: (f64, f64)) -> (f64, f64) {
    let (c, s) = (beta.cos(), beta.sin());
    (
        c * p.0 - s * p.1 + center.0 * (1.0 - c) + center.1 * s,
        s * p.0 + c * p.1 + center.1 * (1.0 - c) - center.0 * s,
    )
}

/// Anisotropic scaling about `center`: gamma * p + c(1 - gamma) per axis.
pub fn scale_about(p: (f64, f64), gamma_x: f64, gamma_y: f64, center: (f64, f64)) -> (f64, f64) {
    (
        gamma_x * p.0 + center.0 * (1.0 - gamma_x),
        gamma_y * p.1 + center.1 * (1.0 - gamma_y),
    )
}

/// Rotates the profile about its farthest-from-origin point, then scales the
/// rotated profile about its centroid.
pub fn transform_profile(
    profile: &TrajectoryProfile,
    beta: f64,
    gamma_x: f64,
    gamma_y: f64,
) -> Result<TrajectoryProfile> {
    if profile.is_empty() {
        return Err(Error::Validation("profile has no points".into()));
    }
    if !(gamma_x.is_finite() && gamma_y.is_finite() && gamma_x > 0.0 && gamma_y > 0.0) {
        return Err(Error::Validation("scale factors must be positive".into()));
    }
    // Rotating center: the point with the largest x^2 + y^2 (earliest wins ties).
    let mut center = profile.points[0];
    let mut best = center.0 * center.0 + center.1 * center.1;
    for &p in &profile.points[1..] {
        let d = p.0 * p.0 + p.1 * p.1;
        if d > best {
            best = d;
            center = p;
        }
    }
    let rotated: Vec<(f64, f64)> = profile
        .points
        .iter()
        .map(|&p| rotate_about(p, beta, center))
        .collect();
    let n = rotated.len() as f64;
    let centroid = rotated
        .iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let centroid = (centroid.0 / n, centroid.1 / n);
    let points = rotated
        .iter()
        .map(|&p| scale_about(p, gamma_x, gamma_y, centroid))
        .collect();
    Ok(TrajectoryProfile { points })
}

/// Moves each frame by the rounded per-frame displacement between an
/// original profile and its transformed version (half-cells round away from
/// zero). This realizes geometric profile transforms on the images.
pub fn apply_profile_offsets(
    seq: &DraiSequence,
    original: &TrajectoryProfile,
    transformed: &TrajectoryProfile,
) -> Result<DraiSequence> {
    seq.validate()?;
    if original.len() != seq.len() || transformed.len() != seq.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} profile points", seq.len()),
            got: format!("{} original / {} transformed", original.len(), transformed.len()),
        });
    }
    let frames = seq
        .frames
        .iter()
        .enumerate()
        .map(|(t, f)| {
            let dx = (transformed.points[t].0 - original.points[t].0).round() as i32;
            let dy = (transformed.points[t].1 - original.points[t].1).round() as i32;
            translate_frame(f, dy, dx)
        })
        .collect();
    Ok(DraiSequence { frames, label: seq.label, angle_tag: seq.angle_tag })
}

/// Which extreme-azimuth power band variants imitate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PowerTarget {
    /// No power scaling.
    #[default]
    Off,
    /// Imitate collections at +/-45 degrees.
    Deg45,
    /// Imitate collections at +/-60 degrees.
    Deg60,
}

/// Sampling distributions for randomized augmentation. Defaults follow the
/// reference recipe: translations U(-6,6) and U(-20,20) bins, frame interval
/// U{3..5}, rotation U(-pi/12, pi/12), scaling U(0.8, 1.2), power bands
/// U(0.4, 1.0) at 45 degrees and U(0.2, 0.8) at 60 degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentPolicy {
    /// First translation draw, bins.
    pub delta_x: (i32, i32),
    /// Second translation draw, bins.
    pub delta_y: (i32, i32),
    /// When false (default) delta_x shifts the range axis and delta_y the
    /// angle axis; true swaps the binding.
    pub swap_translation_axes: bool,
    /// Inclusive bounds of the resampling interval draw.
    pub frame_interval: (u32, u32),
    /// Rotation angle bounds, rad.
    pub rotation: (f64, f64),
    /// Per-axis scale factor bounds.
    pub scale: (f64, f64),
    /// Power band for 45-degree imitation.
    pub power_scale_45: (f64, f64),
    /// Power band for 60-degree imitation.
    pub power_scale_60: (f64, f64),
    pub power_target: PowerTarget,
    /// Whether variants may flip time (and the label pair) with
    /// probability one half.
    pub include_reversal: bool,
    pub variants_per_input: u32,
}

impl Default for AugmentPolicy {
    fn default() -> Self {
        AugmentPolicy {
            delta_x: (-6, 6),
            delta_y: (-20, 20),
            swap_translation_axes: false,
            frame_interval: (3, 5),
            rotation: (-std::f64::consts::PI / 12.0, std::f64::consts::PI / 12.0),
            scale: (0.8, 1.2),
            power_scale_45: (0.4, 1.0),
            power_scale_60: (0.2, 0.8),
            power_target: PowerTarget::Off,
            include_reversal: true,
            variants_per_input: 4,
        }
    }
}

impl AugmentPolicy {
    pub fn validate(&self) -> Result<()> {
        fn ordered<T: PartialOrd + std::fmt::Debug>(name: &str, b: (T, T)) -> Result<()> {
            if b.0 <= b.1 {
                Ok(())
            } else {
                Err(Error::Validation(format!("{name} bounds out of order: {b:?}")))
            }
        }
        ordered("delta_x", self.delta_x)?;
        ordered("delta_y", self.delta_y)?;
        ordered("frame_interval", self.frame_interval)?;
        ordered("rotation", self.rotation)?;
        ordered("scale", self.scale)?;
        ordered("power_scale_45", self.power_scale_45)?;
        ordered("power_scale_60", self.power_scale_60)?;
        if self.frame_interval.0 < 2 {
            return Err(Error::Validation("frame_interval draws must be >= 2".into()));
        }
        if self.scale.0 <= 0.0 || self.power_scale_45.0 <= 0.0 || self.power_scale_60.0 <= 0.0 {
            return Err(Error::Validation("scale draws must stay positive".into()));
        }
        if self.variants_per_input == 0 {
            return Err(Error::Validation("variants_per_input must be positive".into()));
        }
        Ok(())
    }
}

fn sample_f64<R: Rng + ?Sized>(rng: &mut R, bounds: (f64, f64)) -> f64 {
    if bounds.0 == bounds.1 {
        bounds.0
    } else {
        rng.gen_range(bounds.0..bounds.1)
    }
}

/// Emits `variants_per_input` randomized variants of every input sequence.
/// Each input draws from its own deterministic RNG stream, so outputs do not
/// depend on dataset order or batch splitting.
pub fn augment_batch(
    inputs: &[DraiSequence],
    policy: &AugmentPolicy,
    seed: u64,
) -> Result<Vec<DraiSequence>> {
    policy.validate()?;
    let mut out = Vec::with_capacity(inputs.len() * policy.variants_per_input as usize);
    for (idx, seq) in inputs.iter().enumerate() {
        seq.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(idx as u64);
        for _ in 0..policy.variants_per_input {
            out.push(augment_one(seq, policy, &mut rng)?);
        }
    }
    Ok(out)
}

fn augment_one<R: Rng + ?Sized>(
    seq: &DraiSequence,
    policy: &AugmentPolicy,
    rng: &mut R,
) -> Result<DraiSequence> {
    // Fixed draw order keeps batches reproducible.
    let dx = rng.gen_range(policy.delta_x.0..=policy.delta_x.1);
    let dy = rng.gen_range(policy.delta_y.0..=policy.delta_y.1);
    let interval = rng.gen_range(policy.frame_interval.0..=policy.frame_interval.1);
    let insert = rng.gen_bool(0.5);
    let flip = policy.include_reversal && rng.gen_bool(0.5);
    let beta = sample_f64(rng, policy.rotation);
    let gamma_x = sample_f64(rng, policy.scale);
    let gamma_y = sample_f64(rng, policy.scale);

    let (d_range, d_angle) = if policy.swap_translation_axes { (dy, dx) } else { (dx, dy) };
    let mut cur = translate(seq, d_range, d_angle)?;
    if cur.len() > interval as usize {
        cur = resample_speed(
            &cur,
            interval,
            if insert { ResampleMode::Insert } else { ResampleMode::Remove },
        )?;
    }
    if flip && cur.label.map_or(false, |l| l.reversed().is_some()) {
        cur = reverse_sequence(&cur)?;
    }
    // The peak track is undefined when translation pushed everything out of
    // the image; skip the geometric step in that case.
    if let Ok(profile) = extract_trajectory_profile(&cur) {
        let transformed = transform_profile(&profile, beta, gamma_x, gamma_y)?;
        cur = apply_profile_offsets(&cur, &profile, &transformed)?;
    }
    match policy.power_target {
        PowerTarget::Off => {}
        PowerTarget::Deg45 => {
            let alpha = sample_f64(rng, policy.power_scale_45);
            cur = scale_power(&cur, alpha as f32)?;
            cur.angle_tag = 45.0;
        }
        PowerTarget::Deg60 => {
            let alpha = sample_f64(rng, policy.power_scale_60);
            cur = scale_power(&cur, alpha as f32)?;
            cur.angle_tag = 60.0;
        }
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn peak_frame(kb: usize, ib: usize, k: usize, i: usize, v: f32) -> DraiFrame {
        let mut f = DraiFrame::zeroed(kb, ib);
        *f.at_mut(k, i) = v;
        f
    }

    fn peak_seq(peaks: &[(usize, usize)]) -> DraiSequence {
        let frames = peaks
            .iter()
            .enumerate()
            .map(|(t, &(k, i))| peak_frame(32, 32, k, i, 5.0).with_meta(t as u32, t as f64 * 0.05))
            .collect();
        DraiSequence::new(frames, Some(GestureKind::Push))
    }

    fn ramp_seq(t: usize) -> DraiSequence {
        let frames = (0..t)
            .map(|n| {
                let values = (0..32 * 32).map(|c| (n * 1024 + c) as f32).collect();
                DraiFrame::new(values, 32, 32).with_meta(n as u32, n as f64 * 0.05)
            })
            .collect();
        DraiSequence::new(frames, Some(GestureKind::Push))
    }

    #[test]
    fn translate_zero_is_identity() {
        let seq = ramp_seq(5);
        let out = translate(&seq, 0, 0).unwrap();
        assert_eq!(out.frames, seq.frames);
    }

    #[test]
    fn translate_moves_the_peak() {
        let seq = peak_seq(&[(15, 16)]);
        let out = translate(&seq, 3, -4).unwrap();
        assert_eq!(out.frames[0].argmax(), (18, 12));
        assert_eq!(out.frames[0].at(18, 12), 5.0);
        assert_eq!(out.frames[0].at(15, 16), 0.0);
    }

    #[test]
    fn translate_never_gains_energy_and_huge_shifts_empty_the_frame() {
        let seq = ramp_seq(3);
        for (dr, da) in [(5, -7), (-31, 2), (0, 31), (40, 0), (0, -40)] {
            let out = translate(&seq, dr, da).unwrap();
            for (a, b) in out.frames.iter().zip(seq.frames.iter()) {
                assert!(a.total_energy() <= b.total_energy() + 1e-6);
            }
        }
        let gone = translate(&seq, 40, 0).unwrap();
        assert!(gone.frames.iter().all(|f| f.values.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn resample_lengths_match_the_cadence_formulas() {
        for t in 5..40usize {
            for interval in 2..8u32 {
                if t <= interval as usize {
                    continue;
                }
                let seq = ramp_seq(t);
                let ins = resample_speed(&seq, interval, ResampleMode::Insert).unwrap();
                let rem = resample_speed(&seq, interval, ResampleMode::Remove).unwrap();
                assert_eq!(ins.len(), t + (t - 1) / interval as usize, "insert t={t} k={interval}");
                assert_eq!(rem.len(), t - t / interval as usize, "remove t={t} k={interval}");
            }
        }
        // The worked pair: 20 frames at interval 4.
        let seq = ramp_seq(20);
        assert_eq!(resample_speed(&seq, 4, ResampleMode::Insert).unwrap().len(), 24);
        assert_eq!(resample_speed(&seq, 4, ResampleMode::Remove).unwrap().len(), 15);
    }

    #[test]
    fn inserted_frames_are_neighbor_means() {
        let seq = ramp_seq(9);
        let out = resample_speed(&seq, 4, ResampleMode::Insert).unwrap();
        assert_eq!(out.len(), 11);
        // Insertions land after source frames 4 and 8 (1-based).
        for (pos, left) in [(4usize, 3usize), (9, 7)] {
            for c in 0..32 * 32 {
                let expect = 0.5 * (seq.frames[left].values[c] + seq.frames[left + 1].values[c]);
                assert_eq!(out.frames[pos].values[c], expect);
            }
        }
    }

    #[test]
    fn inserting_into_a_constant_sequence_changes_nothing_but_length() {
        let frames = (0..8)
            .map(|t| {
                DraiFrame::new(vec![3.0; 32 * 32], 32, 32).with_meta(t as u32, t as f64 * 0.05)
            })
            .collect();
        let seq = DraiSequence::new(frames, None);
        let out = resample_speed(&seq, 3, ResampleMode::Insert).unwrap();
        assert_eq!(out.len(), 8 + 7 / 3);
        assert!(out
            .frames
            .iter()
            .all(|f| f.values.iter().all(|&v| v == 3.0)));
    }

    #[test]
    fn resample_preconditions_are_enforced() {
        let seq = ramp_seq(6);
        assert!(resample_speed(&seq, 1, ResampleMode::Insert).is_err());
        assert!(resample_speed(&seq, 6, ResampleMode::Remove).is_err());
        assert!(resample_speed(&seq, 7, ResampleMode::Remove).is_err());
    }

    #[test]
    fn reversal_is_an_involution_and_maps_labels() {
        let mut seq = ramp_seq(7);
        seq.label = Some(GestureKind::SwipeLeft);
        let rev = reverse_sequence(&seq).unwrap();
        assert_eq!(rev.label, Some(GestureKind::SwipeRight));
        for t in 0..7 {
            assert_eq!(rev.frames[t].values, seq.frames[6 - t].values);
            // Time grid is preserved.
            assert_eq!(rev.frames[t].timestamp, seq.frames[t].timestamp);
        }
        let back = reverse_sequence(&rev).unwrap();
        assert_eq!(back.label, Some(GestureKind::SwipeLeft));
        for t in 0..7 {
            assert_eq!(back.frames[t].values, seq.frames[t].values);
        }
    }

    #[test]
    fn reversing_the_negative_class_is_rejected() {
        let mut seq = ramp_seq(5);
        seq.label = Some(GestureKind::Negative);
        assert!(reverse_sequence(&seq).is_err());
    }

    #[test]
    fn power_scaling_preserves_shape_and_normalized_pattern() {
        let seq = ramp_seq(4);
        let same = scale_power(&seq, 1.0).unwrap();
        assert_eq!(same.frames, seq.frames);
        let scaled = scale_power(&seq, 0.5).unwrap();
        for (a, b) in scaled.frames.iter().zip(seq.frames.iter()) {
            assert_eq!(a.argmax(), b.argmax());
            // Halving is exact in binary floating point.
            let na: f32 = a.values.iter().map(|v| v * v).sum::<f32>().sqrt();
            let nb: f32 = b.values.iter().map(|v| v * v).sum::<f32>().sqrt();
            for (x, y) in a.values.iter().zip(b.values.iter()) {
                assert_eq!(x / na, y / nb);
            }
        }
        assert!(scale_power(&seq, 0.0).is_err());
        assert!(scale_power(&seq, -1.0).is_err());
    }

    #[test]
    fn profile_extraction_reads_one_based_peaks() {
        let seq = peak_seq(&[(4, 9), (5, 10), (6, 11)]);
        let p = extract_trajectory_profile(&seq).unwrap();
        assert_eq!(p.points, vec![(10.0, 5.0), (11.0, 6.0), (12.0, 7.0)]);
    }

    #[test]
    fn profile_ties_prefer_small_range_then_small_angle() {
        let mut f = DraiFrame::zeroed(32, 32);
        *f.at_mut(10, 20) = 7.0;
        *f.at_mut(10, 4) = 7.0;
        *f.at_mut(3, 25) = 7.0;
        let seq = DraiSequence::new(vec![f], None);
        let p = extract_trajectory_profile(&seq).unwrap();
        assert_eq!(p.points[0], (26.0, 4.0));
    }

    #[test]
    fn profile_extraction_rejects_silent_frames() {
        let mut seq = peak_seq(&[(4, 9), (5, 10)]);
        seq.frames[1] = DraiFrame::zeroed(32, 32);
        assert!(extract_trajectory_profile(&seq).is_err());
    }

    #[test]
    fn quarter_turn_about_the_origin() {
        let (x, y) = rotate_about((1.0, 0.0), std::f64::consts::FRAC_PI_2, (0.0, 0.0));
        assert!(x.abs() < 1e-12);
        assert!((y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_transform_returns_the_profile() {
        let p = TrajectoryProfile { points: vec![(3.0, 4.0), (5.0, 6.0), (9.0, 2.0)] };
        let q = transform_profile(&p, 0.0, 1.0, 1.0).unwrap();
        for (a, b) in p.points.iter().zip(q.points.iter()) {
            assert!((a.0 - b.0).abs() < 1e-12);
            assert!((a.1 - b.1).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_fixes_its_center_and_preserves_distances() {
        let p = TrajectoryProfile {
            points: vec![(2.0, 3.0), (10.0, 14.0), (6.0, 7.5), (1.0, 12.0)],
        };
        // Farthest point from the origin is (10, 14).
        let beta = 0.37;
        let q = transform_profile(&p, beta, 1.0, 1.0).unwrap();
        assert!((q.points[1].0 - 10.0).abs() < 1e-12);
        assert!((q.points[1].1 - 14.0).abs() < 1e-12);
        let center = (10.0, 14.0);
        for (a, b) in p.points.iter().zip(q.points.iter()) {
            let da = ((a.0 - center.0).powi(2) + (a.1 - center.1).powi(2)).sqrt();
            let db = ((b.0 - center.0).powi(2) + (b.1 - center.1).powi(2)).sqrt();
            assert!((da - db).abs() < 1e-9, "rotation must preserve radii");
        }
    }

    #[test]
    fn scaling_fixes_the_centroid() {
        let p = TrajectoryProfile {
            points: vec![(2.0, 2.0), (4.0, 6.0), (9.0, 4.0)],
        };
        let q = transform_profile(&p, 0.0, 1.7, 0.6).unwrap();
        let c0 = (
            p.points.iter().map(|p| p.0).sum::<f64>() / 3.0,
            p.points.iter().map(|p| p.1).sum::<f64>() / 3.0,
        );
        let c1 = (
            q.points.iter().map(|p| p.0).sum::<f64>() / 3.0,
            q.points.iter().map(|p| p.1).sum::<f64>() / 3.0,
        );
        assert!((c0.0 - c1.0).abs() < 1e-9);
        assert!((c0.1 - c1.1).abs() < 1e-9);
    }

    #[test]
    fn offsets_round_half_away_from_zero_and_move_peaks() {
        let seq = peak_seq(&[(10, 10), (11, 11)]);
        let original = extract_trajectory_profile(&seq).unwrap();
        let transformed = TrajectoryProfile {
            points: vec![
                (original.points[0].0 + 2.6, original.points[0].1 - 1.4),
                (original.points[1].0 - 0.5, original.points[1].1 + 0.5),
            ],
        };
        let out = apply_profile_offsets(&seq, &original, &transformed).unwrap();
        // Frame 0: dx = round(2.6) = 3 angle bins, dy = round(-1.4) = -1 range bin.
        assert_eq!(out.frames[0].argmax(), (9, 13));
        // Frame 1: dx = round(-0.5) = -1, dy = round(0.5) = 1.
        assert_eq!(out.frames[1].argmax(), (12, 10));
    }

    #[test]
    fn identity_offsets_change_nothing() {
        let seq = peak_seq(&[(10, 10), (11, 11), (12, 13)]);
        let p = extract_trajectory_profile(&seq).unwrap();
        let out = apply_profile_offsets(&seq, &p, &p).unwrap();
        assert_eq!(out.frames, seq.frames);
    }

    #[test]
    fn default_policy_matches_the_reference_recipe() {
        let p = AugmentPolicy::default();
        assert_eq!(p.delta_x, (-6, 6));
        assert_eq!(p.delta_y, (-20, 20));
        assert_eq!(p.frame_interval, (3, 5));
        assert!((p.rotation.0 + std::f64::consts::PI / 12.0).abs() < 1e-15);
        assert!((p.rotation.1 - std::f64::consts::PI / 12.0).abs() < 1e-15);
        assert_eq!(p.scale, (0.8, 1.2));
        assert_eq!(p.power_scale_45, (0.4, 1.0));
        assert_eq!(p.power_scale_60, (0.2, 0.8));
        assert_eq!(p.variants_per_input, 4);
        p.validate().unwrap();
    }

    #[test]
    fn augment_batch_is_deterministic_and_sized() {
        let inputs = vec![peak_seq(&[(10, 12), (11, 13), (12, 14), (13, 15), (14, 16)]), ramp_seq(8)];
        let policy = AugmentPolicy::default();
        let a = augment_batch(&inputs, &policy, 42).unwrap();
        let b = augment_batch(&inputs, &policy, 42).unwrap();
        assert_eq!(a.len(), 8);
        for (x, y) in a.iter().zip(b.iter()) {
            assert_eq!(x.frames, y.frames);
            assert_eq!(x.label, y.label);
        }
        let c = augment_batch(&inputs, &policy, 43).unwrap();
        assert!(a.iter().zip(c.iter()).any(|(x, y)| x.frames != y.frames));
    }

    #[test]
    fn augment_batch_outputs_satisfy_sequence_invariants() {
        let inputs = vec![peak_seq(&[(8, 8), (9, 9), (10, 10), (11, 11), (12, 12), (13, 13)])];
        let mut policy = AugmentPolicy::default();
        policy.variants_per_input = 64;
        let out = augment_batch(&inputs, &policy, 7).unwrap();
        assert_eq!(out.len(), 64);
        for seq in &out {
            seq.validate().unwrap();
            let label = seq.label.unwrap();
            assert!(label == GestureKind::Push || label == GestureKind::Pull);
        }
    }

    #[test]
    fn power_target_tags_and_dims_variants() {
        let inputs = vec![ramp_seq(6)];
        let mut policy = AugmentPolicy::default();
        policy.power_target = PowerTarget::Deg60;
        policy.variants_per_input = 8;
        let out = augment_batch(&inputs, &policy, 3).unwrap();
        for seq in &out {
            assert_eq!(seq.angle_tag, 60.0);
        }
    }

    #[test]
    fn per_input_rng_streams_ignore_batch_composition() {
        let a = peak_seq(&[(10, 12), (11, 13), (12, 14), (13, 15), (14, 16)]);
        let b = ramp_seq(9);
        let policy = AugmentPolicy::default();
        let joint = augment_batch(&[a.clone(), b.clone()], &policy, 11).unwrap();
        let solo_a = augment_batch(&[a], &policy, 11).unwrap();
        for (x, y) in solo_a.iter().zip(joint.iter().take(4)) {
            assert_eq!(x.frames, y.frames);
        }
    }
}
