use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// FMCW radar front-end description.
///
/// The default models a 77 GHz TDM-MIMO sensor with two transmit and four
/// receive antennas forming an eight-element virtual array at half-wavelength
/// spacing. The chirp slope is chosen so the sampled bandwidth yields a
/// 0.047 m range cell, and the chirp repetition interval so 128 chirps give
/// a 0.039 m/s velocity cell at a 20 Hz frame rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarConfig {
    /// Carrier wavelength, m.
    pub wavelength: f64,
    /// Chirp frequency slope, Hz/s.
    pub chirp_slope: f64,
    /// ADC samples collected per chirp.
    pub samples_per_chirp: usize,
    /// Chirps transmitted per frame (slow-time length).
    pub chirps_per_frame: usize,
    /// ADC sample rate, Hz.
    pub sample_rate: f64,
    /// Chirp repetition interval, s (start-to-start, including idle time).
    pub chirp_interval: f64,
    /// Transmit antenna count.
    pub tx_antennas: usize,
    /// Receive antenna count.
    pub rx_antennas: usize,
    /// Virtual array element spacing, m.
    pub element_spacing: f64,
    /// Frames per second.
    pub frame_rate: f64,
    /// Range bins kept after the fast-time FFT.
    pub range_bins: usize,
    /// Angle FFT size (virtual channels are zero-padded to this length).
    pub angle_bins: usize,
}

impl Default for RadarConfig {
    fn default() -> Self {
        let wavelength = 0.0039;
        let samples_per_chirp = 128;
        let chirps_per_frame = 128;
        let sample_rate = 2.0e6;
        let frame_rate = 20.0;
        // Sampled bandwidth that produces a 0.047 m range cell.
        let bandwidth = SPEED_OF_LIGHT / (2.0 * 0.047);
        // Chirps exactly fill the frame period.
        let chirp_interval = 1.0 / frame_rate / chirps_per_frame as f64;
        RadarConfig {
            wavelength,
            chirp_slope: bandwidth * sample_rate / samples_per_chirp as f64,
            samples_per_chirp,
            chirps_per_frame,
            sample_rate,
            chirp_interval,
            tx_antennas: 2,
            rx_antennas: 4,
            element_spacing: wavelength / 2.0,
            frame_rate,
            range_bins: 32,
            angle_bins: 32,
        }
    }
}

/// Returns the reference front-end configuration described above.
pub fn default_config() -> RadarConfig {
    RadarConfig::default()
}

impl RadarConfig {
    /// Virtual array size (TDM-MIMO: every TX/RX pair is one element).
    pub fn virtual_channels(&self) -> usize {
        self.tx_antennas * self.rx_antennas
    }

    /// Range cell size, m: c / (2 * sampled bandwidth).
    pub fn range_resolution(&self) -> f64 {
        let sampled_bandwidth =
            self.chirp_slope * self.samples_per_chirp as f64 / self.sample_rate;
        SPEED_OF_LIGHT / (2.0 * sampled_bandwidth)
    }

    /// Velocity cell size, m/s: wavelength / (2 * L * Tc).
    pub fn velocity_resolution(&self) -> f64 {
        self.wavelength / (2.0 * self.chirps_per_frame as f64 * self.chirp_interval)
    }

    /// Largest range still inside the kept range gate, m.
    pub fn max_range(&self) -> f64 {
        self.range_bins as f64 * self.range_resolution()
    }

    /// Largest speed measured without Doppler aliasing, m/s.
    pub fn max_unambiguous_velocity(&self) -> f64 {
        self.wavelength / (4.0 * self.chirp_interval)
    }

    /// Angular resolution in radians for an `n`-element aperture steered to
    /// `theta`: wavelength / (n * spacing * cos theta).
    pub fn angle_resolution(&self, n: usize, theta: f64) -> f64 {
        self.wavelength / (n as f64 * self.element_spacing * theta.cos())
    }

    /// Frame period, s.
    pub fn frame_period(&self) -> f64 {
        1.0 / self.frame_rate
    }

    /// Checks internal consistency. Every processing entry point calls this
    /// before trusting derived quantities.
    pub fn validate(&self) -> Result<()> {
        fn positive(name: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Validation(format!("{name} must be positive, got {v}")))
            }
        }
        positive("wavelength", self.wavelength)?;
        positive("chirp_slope", self.chirp_slope)?;
        positive("sample_rate", self.sample_rate)?;
        positive("chirp_interval", self.chirp_interval)?;
        positive("frame_rate", self.frame_rate)?;
        positive("element_spacing", self.element_spacing)?;
        if self.samples_per_chirp == 0 || self.chirps_per_frame == 0 {
            return Err(Error::Validation("chirp dimensions must be nonzero".into()));
        }
        if self.tx_antennas == 0 || self.rx_antennas == 0 {
            return Err(Error::Validation("antenna counts must be nonzero".into()));
        }
        if self.range_bins == 0 || self.range_bins > self.samples_per_chirp {
            return Err(Error::Validation(format!(
                "range_bins must lie in [1, {}]",
                self.samples_per_chirp
            )));
        }
        if self.angle_bins < self.virtual_channels() {
            return Err(Error::Validation(
                "angle_bins must be at least the virtual channel count".into(),
            ));
        }
        // Faster-than-half-wavelength spacing aliases angles inside the field
        // of view (grating lobes), which breaks the angle-bin contract.
        if self.element_spacing > self.wavelength / 2.0 + 1e-12 {
            return Err(Error::Validation(
                "element_spacing must not exceed half the wavelength".into(),
            ));
        }
        let sampling_window = self.samples_per_chirp as f64 / self.sample_rate;
        if sampling_window > self.chirp_interval + 1e-12 {
            return Err(Error::Validation(
                "samples_per_chirp / sample_rate must fit inside chirp_interval".into(),
            ));
        }
        let frame_occupancy = self.chirps_per_frame as f64 * self.chirp_interval;
        if frame_occupancy > self.frame_period() + 1e-12 {
            return Err(Error::Validation(
                "chirps_per_frame * chirp_interval must fit inside the frame period".into(),
            ));
        }
        Ok(())
    }
}
