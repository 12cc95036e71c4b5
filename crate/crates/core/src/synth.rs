//! Scripted hand trajectories and raw FMCW returns.
//!
//! A gesture script is turned into per-frame point-scatterer sets
//! (`gesture_trajectory`), and each set into a complex ADC cube
//! (`synthesize_frame`). Every scatterer contributes a separable tone:
//! per-sample frequency 2*S*d/c, chirp-to-chirp phase step 4*pi*v*Tc/lambda,
//! channel-to-channel phase step 2*pi*l*sin(theta)/lambda.

use num_complex::{Complex32, Complex64};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::RadarConfig;
use crate::error::{Error, Result};

/// Gesture vocabulary: six commands plus a catch-all negative class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GestureKind {
    /// PH: hand moves straight toward the sensor.
    Push,
    /// PL: hand moves straight away from the sensor.
    Pull,
    /// LS: hand sweeps across the field of view toward negative azimuth.
    SwipeLeft,
    /// RS: hand sweeps across the field of view toward positive azimuth.
    SwipeRight,
    /// CT: hand traces a circle clockwise in the range/cross-range plane.
    TurnClockwise,
    /// AT: same circle traced anticlockwise.
    TurnAnticlockwise,
    /// NG: non-gesture motion (modeled as hand waving).
    Negative,
}

pub const GESTURE_CLASS_COUNT: usize = 7;

impl GestureKind {
    pub const ALL: [GestureKind; 7] = [
        GestureKind::Push,
        GestureKind::Pull,
        GestureKind::SwipeLeft,
        GestureKind::SwipeRight,
        GestureKind::TurnClockwise,
        GestureKind::TurnAnticlockwise,
        GestureKind::Negative,
    ];

    /// Stable class id: gestures 0..=5, negative 6.
    pub fn label(self) -> u8 {
        match self {
            GestureKind::Push => 0,
            GestureKind::Pull => 1,
            GestureKind::SwipeLeft => 2,
            GestureKind::SwipeRight => 3,
            GestureKind::TurnClockwise => 4,
            GestureKind::TurnAnticlockwise => 5,
            GestureKind::Negative => 6,
        }
    }

    pub fn from_label(label: u8) -> Option<GestureKind> {
        GestureKind::ALL.get(label as usize).copied()
    }

    /// Two-letter code used in manifests and reports.
    pub fn code(self) -> &'static str {
        match self {
            GestureKind::Push => "PH",
            GestureKind::Pull => "PL",
            GestureKind::SwipeLeft => "LS",
            GestureKind::SwipeRight => "RS",
            GestureKind::TurnClockwise => "CT",
            GestureKind::TurnAnticlockwise => "AT",
            GestureKind::Negative => "NG",
        }
    }

    pub fn from_code(code: &str) -> Option<GestureKind> {
        GestureKind::ALL.iter().copied().find(|k| k.code() == code)
    }

    /// The class a time-reversed recording belongs to. Undefined for the
    /// negative class.
    pub fn reversed(self) -> Option<GestureKind> {
        match self {
            GestureKind::Push => Some(GestureKind::Pull),
            GestureKind::Pull => Some(GestureKind::Push),
            GestureKind::SwipeLeft => Some(GestureKind::SwipeRight),
            GestureKind::SwipeRight => Some(GestureKind::SwipeLeft),
            GestureKind::TurnClockwise => Some(GestureKind::TurnAnticlockwise),
            GestureKind::TurnAnticlockwise => Some(GestureKind::TurnClockwise),
            GestureKind::Negative => None,
        }
    }

    pub fn is_negative(self) -> bool {
        self == GestureKind::Negative
    }
}

/// One point reflector at an instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    /// Distance from the sensor, m. Must lie inside the kept range gate.
    pub range: f64,
    /// Azimuth from boresight, rad, |azimuth| < pi/2.
    pub azimuth: f64,
    /// Radial velocity, m/s, positive receding. |v| must stay below the
    /// unambiguous limit.
    pub radial_velocity: f64,
    /// Relative amplitude of the return (1.0 = palm-sized reference).
    pub reflectivity: f64,
}

impl Scatterer {
    /// Static reflector helper (clutter, furniture, torso).
    pub fn fixed(range: f64, azimuth: f64, reflectivity: f64) -> Scatterer {
        Scatterer { range, azimuth, radial_velocity: 0.0, reflectivity }
    }

    pub(crate) fn check(&self, config: &RadarConfig, context: &str) -> Result<()> {
        let max_range = config.max_range();
        if !(self.range > 0.0 && self.range <= max_range) {
            return Err(Error::Validation(format!(
                "{context}: range {:.3} m outside (0, {max_range:.3}]",
                self.range
            )));
        }
        if self.azimuth.abs() >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::Validation(format!(
                "{context}: azimuth {:.3} rad outside the +/-pi/2 field of view",
                self.azimuth
            )));
        }
        let vmax = config.max_unambiguous_velocity();
        if self.radial_velocity.abs() >= vmax {
            return Err(Error::Validation(format!(
                "{context}: radial velocity {:.3} m/s aliases (limit {vmax:.3})",
                self.radial_velocity
            )));
        }
        if !(self.reflectivity > 0.0 && self.reflectivity.is_finite()) {
            return Err(Error::Validation(format!(
                "{context}: reflectivity must be positive"
            )));
        }
        Ok(())
    }
}

fn default_unit() -> f64 {
    1.0
}

/// A scripted gesture performance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GestureScript {
    pub kind: GestureKind,
    /// Hand rest distance from the sensor, m.
    pub anchor_distance: f64,
    /// Hand rest azimuth, rad.
    pub anchor_angle: f64,
    /// Speed multiplier: 2.0 performs the same displacement in half the
    /// frames, the hand then holds still for the remainder of the script.
    #[serde(default = "default_unit")]
    pub speed_scale: f64,
    /// Script length, s. Must cover at least four frames.
    #[serde(default = "default_unit")]
    pub duration: f64,
    /// Static reflectors present throughout the script.
    #[serde(default)]
    pub clutter: Vec<Scatterer>,
    /// Receiver SNR in dB relative to a unit-reflectivity return.
    /// `None` synthesizes noise-free cubes.
    #[serde(default)]
    pub noise_snr_db: Option<f64>,
}

impl GestureScript {
    pub fn new(kind: GestureKind, anchor_distance: f64, anchor_angle: f64) -> GestureScript {
        GestureScript {
            kind,
            anchor_distance,
            anchor_angle,
            speed_scale: 1.0,
            duration: 1.0,
            clutter: Vec::new(),
            noise_snr_db: None,
        }
    }

    /// Number of frames the script spans.
    pub fn frame_count(&self, config: &RadarConfig) -> usize {
        (self.duration * config.frame_rate).round() as usize
    }

    fn validate(&self, config: &RadarConfig) -> Result<()> {
        if !(self.speed_scale.is_finite() && self.speed_scale > 0.0) {
            return Err(Error::Validation("speed_scale must be positive".into()));
        }
        if self.frame_count(config) < 4 {
            return Err(Error::Validation(format!(
                "script spans {} frames; at least 4 required",
                self.frame_count(config)
            )));
        }
        for (i, c) in self.clutter.iter().enumerate() {
            c.check(config, &format!("clutter[{i}]"))?;
        }
        Ok(())
    }
}

/// One frame of raw IF samples, laid out chirp-major:
/// index = chirp * (samples * channels) + sample * channels + channel.
#[derive(Debug, Clone, PartialEq)]
pub struct AdcCube {
    pub data: Vec<Complex32>,
    pub chirps: usize,
    pub samples_per_chirp: usize,
    pub channels: usize,
    pub frame_index: u32,
}

impl AdcCube {
    pub fn zeroed(config: &RadarConfig, frame_index: u32) -> AdcCube {
        let n = config.chirps_per_frame * config.samples_per_chirp * config.virtual_channels();
        AdcCube {
            data: vec![Complex32::new(0.0, 0.0); n],
            chirps: config.chirps_per_frame,
            samples_per_chirp: config.samples_per_chirp,
            channels: config.virtual_channels(),
            frame_index,
        }
    }

    #[inline]
    pub fn at(&self, chirp: usize, sample: usize, channel: usize) -> Complex32 {
        self.data[(chirp * self.samples_per_chirp + sample) * self.channels + channel]
    }

    pub fn matches(&self, config: &RadarConfig) -> bool {
        self.chirps == config.chirps_per_frame
            && self.samples_per_chirp == config.samples_per_chirp
            && self.channels == config.virtual_channels()
            && self.data.len() == self.chirps * self.samples_per_chirp * self.channels
    }
}

// Gesture path geometry, in a ground plane with x = cross-range and
// y = down-range so that azimuth = atan2(x, y).

const PUSH_REACH: f64 = 0.25;
const SWIPE_WIDTH: f64 = 0.35;
const SWIPE_BOW: f64 = 0.05;
const TURN_RADIUS: f64 = 0.12;
const WAVE_SWAY: f64 = 0.15;
const WAVE_BOB: f64 = 0.03;

#[derive(Clone, Copy)]
struct Vec2 {
    x: f64,
    y: f64,
}

impl Vec2 {
    fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
    fn add(self, o: Vec2, k: f64) -> Vec2 {
        Vec2 { x: self.x + k * o.x, y: self.y + k * o.y }
    }
    fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }
}

/// Hand center position and its derivative with respect to the path
/// parameter u in [0, 1].
fn hand_path(kind: GestureKind, d0: f64, theta0: f64, u: f64) -> (Vec2, Vec2) {
    let radial = Vec2 { x: theta0.sin(), y: theta0.cos() };
    let lateral = Vec2 { x: theta0.cos(), y: -theta0.sin() };
    let origin = Vec2 { x: 0.0, y: 0.0 };
    match kind {
        GestureKind::Push => (
            origin.add(radial, d0 - PUSH_REACH * u),
            origin.add(radial, -PUSH_REACH),
        ),
        GestureKind::Pull => (
            origin.add(radial, d0 - PUSH_REACH * (1.0 - u)),
            origin.add(radial, PUSH_REACH),
        ),
        GestureKind::SwipeLeft | GestureKind::SwipeRight => {
            let sign = if kind == GestureKind::SwipeLeft { -1.0 } else { 1.0 };
            let w = sign * (u - 0.5) * SWIPE_WIDTH;
            let bow = -SWIPE_BOW * (std::f64::consts::PI * u).sin();
            let dw = sign * SWIPE_WIDTH;
            let dbow = -SWIPE_BOW * std::f64::consts::PI * (std::f64::consts::PI * u).cos();
            (
                origin.add(radial, d0 + bow).add(lateral, w),
                origin.add(radial, dbow).add(lateral, dw),
            )
        }
        GestureKind::TurnClockwise | GestureKind::TurnAnticlockwise => {
            let sign = if kind == GestureKind::TurnClockwise { -1.0 } else { 1.0 };
            let phi = sign * std::f64::consts::TAU * u;
            let dphi = sign * std::f64::consts::TAU;
            (
                origin.add(radial, d0 + TURN_RADIUS * phi.sin()).add(lateral, TURN_RADIUS * phi.cos()),
                origin
                    .add(radial, TURN_RADIUS * phi.cos() * dphi)
                    .add(lateral, -TURN_RADIUS * phi.sin() * dphi),
            )
        }
        GestureKind::Negative => {
            let w = std::f64::consts::TAU * 2.0 * u;
            (
                origin
                    .add(radial, d0 - WAVE_BOB * (w + 0.5).sin())
                    .add(lateral, WAVE_SWAY * w.sin()),
                origin
                    .add(radial, -WAVE_BOB * (w + 0.5).cos() * std::f64::consts::TAU * 2.0)
                    .add(lateral, WAVE_SWAY * w.cos() * std::f64::consts::TAU * 2.0),
            )
        }
    }
}

/// Rigid offsets that make the hand a small scatterer cluster instead of a
/// single point: palm center, a knuckle offset cross-range, a fingertip
/// offset toward the sensor.
const HAND_PARTS: [(f64, f64, f64); 3] = [
    // (lateral offset m, radial offset m, reflectivity)
    (0.0, 0.0, 1.0),
    (0.02, 0.0, 0.5),
    (0.0, -0.015, 0.35),
];

/// Expands a script into per-frame scatterer sets.
///
/// Frame f is sampled at t = (f + 0.5) / frame_rate. The hand moves along
/// the kind-specific path for duration / speed_scale seconds and then holds
/// still. Clutter is appended to every frame unchanged. Fails if any
/// scatterer of any frame leaves the range gate, the field of view, or the
/// unambiguous velocity interval.
pub fn gesture_trajectory(
    script: &GestureScript,
    config: &RadarConfig,
) -> Result<Vec<Vec<Scatterer>>> {
    config.validate()?;
    script.validate(config)?;
    let frames = script.frame_count(config);
    let motion_duration = script.duration / script.speed_scale;
    let mut out = Vec::with_capacity(frames);
    for f in 0..frames {
        let t = (f as f64 + 0.5) * config.frame_period();
        let (u, du_dt) = if t < motion_duration {
            (t / motion_duration, 1.0 / motion_duration)
        } else {
            (1.0, 0.0)
        };
        let (center, dpath) = hand_path(script.kind, script.anchor_distance, script.anchor_angle, u);
        let velocity = Vec2 { x: dpath.x * du_dt, y: dpath.y * du_dt };
        let bearing = center.x.atan2(center.y);
        let radial = Vec2 { x: bearing.sin(), y: bearing.cos() };
        let lateral = Vec2 { x: bearing.cos(), y: -bearing.sin() };
        let mut set = Vec::with_capacity(HAND_PARTS.len() + script.clutter.len());
        for &(lat, rad, refl) in &HAND_PARTS {
            let p = center.add(lateral, lat).add(radial, rad);
            let range = p.norm();
            let s = Scatterer {
                range,
                azimuth: p.x.atan2(p.y),
                radial_velocity: p.dot(velocity) / range,
                reflectivity: refl,
            };
            s.check(config, &format!("frame {f}"))?;
            set.push(s);
        }
        set.extend_from_slice(&script.clutter);
        out.push(set);
    }
    Ok(out)
}

/// First and last frame index in which the scripted hand is moving.
pub fn motion_span(script: &GestureScript, config: &RadarConfig) -> (usize, usize) {
    let frames = script.frame_count(config);
    let motion_duration = script.duration / script.speed_scale;
    let mut last = 0;
    for f in 0..frames {
        let t = (f as f64 + 0.5) * config.frame_period();
        if t < motion_duration {
            last = f;
        }
    }
    (0, last)
}

/// Superposes the scatterers' IF tones into one raw frame, optionally adding
/// circularly symmetric Gaussian noise whose variance is 10^(-snr/10) per
/// complex sample (unit-reflectivity reference).
pub fn synthesize_frame<R: Rng + ?Sized>(
    scatterers: &[Scatterer],
    config: &RadarConfig,
    noise_snr_db: Option<f64>,
    frame_index: u32,
    rng: &mut R,
) -> AdcCube {
    debug_assert!(config.validate().is_ok());
    let chirps = config.chirps_per_frame;
    let samples = config.samples_per_chirp;
    let channels = config.virtual_channels();
    let mut acc = vec![Complex64::new(0.0, 0.0); chirps * samples * channels];

    let mut chirp_ph = vec![Complex64::new(0.0, 0.0); chirps];
    let mut sample_ph = vec![Complex64::new(0.0, 0.0); samples];
    let mut chan_ph = vec![Complex64::new(0.0, 0.0); channels];
    for sc in scatterers {
        // Separable phase steps of the ideal IF tone.
        let beat = std::f64::consts::TAU * 2.0 * config.chirp_slope * sc.range
            / (crate::config::SPEED_OF_LIGHT * config.sample_rate);
        let doppler = 2.0 * std::f64::consts::TAU * sc.radial_velocity * config.chirp_interval
            / config.wavelength;
        let angle = std::f64::consts::TAU * config.element_spacing * sc.azimuth.sin()
            / config.wavelength;
        let carrier = 2.0 * std::f64::consts::TAU * sc.range / config.wavelength;

        fill_phasors(&mut sample_ph, beat);
        fill_phasors(&mut chirp_ph, doppler);
        fill_phasors(&mut chan_ph, angle);
        let base = Complex64::from_polar(sc.reflectivity, carrier);

        let mut idx = 0;
        for m in 0..chirps {
            let per_chirp = base * chirp_ph[m];
            for s in 0..samples {
                let per_sample = per_chirp * sample_ph[s];
                for ph in &chan_ph {
                    acc[idx] += per_sample * ph;
                    idx += 1;
                }
            }
        }
    }

    let mut cube = AdcCube {
        data: Vec::with_capacity(acc.len()),
        chirps,
        samples_per_chirp: samples,
        channels,
        frame_index,
    };
    match noise_snr_db {
        Some(snr) => {
            // Split the complex noise power evenly between components.
            let sigma = (10f64.powf(-snr / 10.0) / 2.0).sqrt();
            for v in &acc {
                let nr: f64 = rng.sample(StandardNormal);
                let ni: f64 = rng.sample(StandardNormal);
                cube.data.push(Complex32::new(
                    (v.re + sigma * nr) as f32,
                    (v.im + sigma * ni) as f32,
                ));
            }
        }
        None => {
            for v in &acc {
                cube.data.push(Complex32::new(v.re as f32, v.im as f32));
            }
        }
    }
    cube
}

/// exp(i * step * k) for k = 0..len, computed once per scatterer.
fn fill_phasors(dst: &mut [Complex64], step: f64) {
    let rot = Complex64::from_polar(1.0, step);
    let mut cur = Complex64::new(1.0, 0.0);
    for v in dst.iter_mut() {
        *v = cur;
        cur *= rot;
    }
}

/// Runs a whole script: trajectory expansion plus per-frame synthesis.
pub fn synthesize_script<R: Rng + ?Sized>(
    script: &GestureScript,
    config: &RadarConfig,
    rng: &mut R,
) -> Result<Vec<AdcCube>> {
    let frames = gesture_trajectory(script, config)?;
    Ok(frames
        .iter()
        .enumerate()
        .map(|(f, set)| synthesize_frame(set, config, script.noise_snr_db, f as u32, rng))
        .collect())
}
