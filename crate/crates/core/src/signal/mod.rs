//! Excitation sweeps, calibrated noise injection, and waveform energy metrics.

pub mod wav;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fixed-rate sampled waveform: an excitation signal or a microphone recording.
///
/// Samples are dimensionless amplitudes with a nominal range of [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    /// Validates that the clip is non-empty, finite everywhere, and has a
    /// positive sample rate.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidParameter("sample_rate must be > 0".into()));
        }
        if samples.is_empty() {
            return Err(Error::InvalidParameter(
                "clip must contain at least one sample".into(),
            ));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidParameter(
                "clip contains non-finite samples".into(),
            ));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    /// Widens 32-bit storage samples (the on-disk dataset format) to f64.
    pub fn from_f32(samples: &[f32], sample_rate: u32) -> Result<Self> {
        Self::new(samples.iter().map(|&s| f64::from(s)).collect(), sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    /// Quantizes to the 32-bit storage format.
    pub fn to_f32(&self) -> Vec<f32> {
        self.samples.iter().map(|&s| s as f32).collect()
    }
}

/// Parameters of a logarithmic excitation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Sweep length in seconds.
    pub duration: f64,
    /// Start frequency in Hz.
    pub f_start: f64,
    /// End frequency in Hz.
    pub f_end: f64,
    /// Constant amplitude in (0, 1].
    pub amplitude: f64,
}

impl Default for SweepSpec {
    /// One-second 20 Hz - 20 kHz sweep at 0.8 amplitude, leaving headroom
    /// before clipping after convolution with a cavity response.
    fn default() -> Self {
        Self {
            duration: 1.0,
            f_start: 20.0,
            f_end: 20_000.0,
            amplitude: 0.8,
        }
    }
}

impl SweepSpec {
    /// Checks 0 < f_start <= f_end < Nyquist and duration > 0.
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        let nyquist = f64::from(sample_rate) / 2.0;
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::InvalidParameter("sweep duration must be > 0".into()));
        }
        if !(self.f_start.is_finite() && self.f_start > 0.0) {
            return Err(Error::InvalidParameter("sweep f_start must be > 0".into()));
        }
        if self.f_end < self.f_start {
            return Err(Error::InvalidParameter(
                "sweep f_end must be >= f_start".into(),
            ));
        }
        if self.f_end >= nyquist {
            return Err(Error::InvalidParameter(format!(
                "sweep f_end {} Hz must be below Nyquist {} Hz",
                self.f_end, nyquist
            )));
        }
        if !(self.amplitude > 0.0 && self.amplitude <= 1.0) {
            return Err(Error::InvalidParameter(
                "sweep amplitude must be in (0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// Generates an exponential (logarithmic) frequency sweep.
///
/// Instantaneous frequency follows f(t) = f_start * (f_end/f_start)^(t/T),
/// realized through the phase closed form
/// phi(t) = 2*pi*f_start*T/ln(f_end/f_start) * ((f_end/f_start)^(t/T) - 1).
/// When f_start == f_end the sweep degenerates to a pure tone.
pub fn generate_log_sweep(spec: &SweepSpec, sample_rate: u32) -> Result<AudioClip> {
    spec.validate(sample_rate)?;
    let n_samples = (spec.duration * f64::from(sample_rate)).round() as usize;
    let dt = 1.0 / f64::from(sample_rate);
    let ratio = spec.f_end / spec.f_start;
    let log_ratio = ratio.ln();

    let samples: Vec<f64> = (0..n_samples)
        .map(|n| {
            let t = n as f64 * dt;
            let phase = if log_ratio.abs() < 1e-12 {
                2.0 * std::f64::consts::PI * spec.f_start * t
            } else {
                2.0 * std::f64::consts::PI * spec.f_start * spec.duration / log_ratio
                    * (ratio.powf(t / spec.duration) - 1.0)
            };
            spec.amplitude * phase.sin()
        })
        .collect();

    AudioClip::new(samples, sample_rate)
}

/// Relative noise-level mapping anchored at a configurable ambient floor.
///
/// The level scale is a relative dBA-equivalent: +20 dB means a 10x amplitude
/// increase. Absolute SPL calibration is not modeled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Ambient floor level in dBA-equivalent units.
    pub floor_dba: f64,
    /// Gaussian noise standard deviation at the floor level.
    pub sigma_at_floor: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            floor_dba: 45.0,
            sigma_at_floor: 0.001,
        }
    }
}

impl NoiseModel {
    /// Noise standard deviation at `level_dba`:
    /// sigma(L) = sigma_floor * 10^((L - floor)/20).
    pub fn sigma(&self, level_dba: f64) -> f64 {
        self.sigma_at_floor * 10f64.powf((level_dba - self.floor_dba) / 20.0)
    }

    /// Scales the floor amplitude, e.g. for membrane attenuation.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            floor_dba: self.floor_dba,
            sigma_at_floor: self.sigma_at_floor * gain,
        }
    }
}

/// Adds white Gaussian noise at the given level. Deterministic per seed.
pub fn add_noise(
    clip: &AudioClip,
    model: &NoiseModel,
    noise_level_dba: f64,
    seed: u64,
) -> Result<AudioClip> {
    if noise_level_dba < model.floor_dba {
        return Err(Error::InvalidParameter(format!(
            "noise level {} dBA is below the ambient floor {} dBA",
            noise_level_dba, model.floor_dba
        )));
    }
    let sigma = model.sigma(noise_level_dba);
    if sigma == 0.0 {
        return Ok(clip.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = clip
        .samples
        .iter()
        .map(|&s| s + sigma * standard_normal(&mut rng))
        .collect();
    AudioClip::new(samples, clip.sample_rate)
}

/// Box-Muller draw; two uniforms per normal keeps the stream layout simple
/// and reproducible.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Total energy: sum of squared samples.
pub fn signal_energy(clip: &AudioClip) -> f64 {
    clip.samples.iter().map(|&s| s * s).sum()
}

/// Energy of `clip` relative to `reference`.
pub fn relative_reflected_energy(clip: &AudioClip, reference: &AudioClip) -> Result<f64> {
    let ref_energy = signal_energy(reference);
    if ref_energy == 0.0 {
        return Err(Error::DegenerateReference);
    }
    Ok(signal_energy(clip) / ref_energy)
}
