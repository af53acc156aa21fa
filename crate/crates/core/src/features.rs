//! Spectral feature extraction: windowed STFT magnitudes summed over time
//! into a normalized feature vector (window/2 + 1 bins).

use ndarray::Array2;
use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::AudioClip;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowFunction {
    Hann,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    L2,
    Max,
    Sum,
}

/// STFT analysis parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Analysis window length in samples; must be a power of two.
    pub window_size: usize,
    /// Hop between frame starts, in (0, window_size].
    pub hop_size: usize,
    pub window_function: WindowFunction,
    pub normalization: Normalization,
}

impl Default for FeatureConfig {
    /// Window 2048 (1025 bins), 50% overlap, Hann window, per-vector L2 norm.
    fn default() -> Self {
        Self {
            window_size: 2048,
            hop_size: 1024,
            window_function: WindowFunction::Hann,
            normalization: Normalization::L2,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.window_size.is_power_of_two() {
            return Err(Error::InvalidParameter(
                "window_size must be a power of two".into(),
            ));
        }
        if self.hop_size == 0 || self.hop_size > self.window_size {
            return Err(Error::InvalidParameter(
                "hop_size must be in (0, window_size]".into(),
            ));
        }
        Ok(())
    }

    /// Number of frequency bins (window/2 + 1).
    pub fn n_bins(&self) -> usize {
        self.window_size / 2 + 1
    }
}

/// Time-summed normalized spectral representation of one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    norm: Normalization,
    degenerate: bool,
}

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> Normalization {
        self.norm
    }

    /// True for the all-zero input, which cannot be normalized.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn window_coefficients(config: &FeatureConfig) -> Vec<f64> {
    let n = config.window_size;
    match config.window_function {
        WindowFunction::Rectangular => vec![1.0; n],
        // Periodic Hann.
        WindowFunction::Hann => (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            .collect(),
    }
}

/// Magnitude spectrogram: one row per frame, window/2 + 1 bins per row.
///
/// Frame count is floor((len - window)/hop) + 1; the tail that does not fill
/// a full window is dropped.
pub fn stft_magnitudes(clip: &AudioClip, config: &FeatureConfig) -> Result<Array2<f64>> {
    config.validate()?;
    let samples = clip.samples();
    let win = config.window_size;
    if samples.len() < win {
        return Err(Error::InputTooShort {
            len: samples.len(),
            window: win,
        });
    }
    let hop = config.hop_size;
    let n_frames = (samples.len() - win) / hop + 1;
    let n_bins = config.n_bins();
    let coeffs = window_coefficients(config);

    let fft = FftPlanner::new().plan_fft_forward(win);
    let mut out = Array2::zeros((n_frames, n_bins));
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); win];
    for (frame, mut row) in out.outer_iter_mut().enumerate() {
        let start = frame * hop;
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = Complex::new(samples[start + i] * coeffs[i], 0.0);
        }
        fft.process(&mut buf);
        for (bin, value) in row.iter_mut().enumerate() {
            *value = buf[bin].norm();
        }
    }
    Ok(out)
}

/// Sums STFT magnitudes over time and normalizes per the config.
///
/// An all-zero clip yields an all-zero vector flagged degenerate.
pub fn features_from_clip(clip: &AudioClip, config: &FeatureConfig) -> Result<FeatureVector> {
    let spectrogram = stft_magnitudes(clip, config)?;
    let mut values: Vec<f64> = spectrogram.sum_axis(ndarray::Axis(0)).to_vec();

    let scale = match config.normalization {
        Normalization::L2 => values.iter().map(|v| v * v).sum::<f64>().sqrt(),
        Normalization::Max => values.iter().cloned().fold(0.0, f64::max),
        Normalization::Sum => values.iter().sum::<f64>(),
    };
    let degenerate = scale == 0.0;
    if !degenerate {
        for v in &mut values {
            *v /= scale;
        }
    }
    Ok(FeatureVector {
        values,
        norm: config.normalization,
        degenerate,
    })
}

/// Feature extraction straight from 32-bit storage samples.
pub fn features_from_samples(
    samples: &[f32],
    sample_rate: u32,
    config: &FeatureConfig,
) -> Result<FeatureVector> {
    let clip = AudioClip::from_f32(samples, sample_rate)?;
    features_from_clip(&clip, config)
}

/// Batch extraction over recordings; rows follow input order.
pub fn extract_feature_matrix(
    recordings: &[Vec<f32>],
    sample_rate: u32,
    config: &FeatureConfig,
) -> Result<Array2<f64>> {
    config.validate()?;
    let rows: Vec<Vec<f64>> = recordings
        .par_iter()
        .map(|rec| {
            features_from_samples(rec, sample_rate, config).map(|f| f.values().to_vec())
        })
        .collect::<Result<_>>()?;
    let n_bins = config.n_bins();
    let mut out = Array2::zeros((rows.len(), n_bins));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            out[[i, j]] = v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{generate_log_sweep, SweepSpec};
    use proptest::prelude::*;

    /// Naive O(n^2) DFT magnitude of one windowed frame; the independent
    /// oracle for the FFT-backed implementation.
    fn naive_frame_magnitudes(frame: &[f64], coeffs: &[f64]) -> Vec<f64> {
        let n = frame.len();
        let n_bins = n / 2 + 1;
        let mut mags = Vec::with_capacity(n_bins);
        for k in 0..n_bins {
            let mut re = 0.0;
            let mut im = 0.0;
            for (i, (&x, &w)) in frame.iter().zip(coeffs).enumerate() {
                let angle = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                re += x * w * angle.cos();
                im += x * w * angle.sin();
            }
            mags.push((re * re + im * im).sqrt());
        }
        mags
    }

    fn naive_stft(clip: &AudioClip, config: &FeatureConfig) -> Vec<Vec<f64>> {
        let coeffs = window_coefficients(config);
        let samples = clip.samples();
        let n_frames = (samples.len() - config.window_size) / config.hop_size + 1;
        (0..n_frames)
            .map(|f| {
                let start = f * config.hop_size;
                naive_frame_magnitudes(&samples[start..start + config.window_size], &coeffs)
            })
            .collect()
    }

    fn tone(freq: f64, duration: f64, rate: u32) -> AudioClip {
        generate_log_sweep(
            &SweepSpec {
                duration,
                f_start: freq,
                f_end: freq,
                amplitude: 1.0,
            },
            rate,
        )
        .unwrap()
    }

    #[test]
    fn one_second_clip_yields_42_frames_of_1025_bins() {
        let clip = generate_log_sweep(&SweepSpec::default(), 44_100).unwrap();
        let spec = stft_magnitudes(&clip, &FeatureConfig::default()).unwrap();
        assert_eq!(spec.dim(), (42, 1025));
    }

    #[test]
    fn zero_clip_yields_zero_spectrogram_and_degenerate_features() {
        let clip = AudioClip::new(vec![0.0; 44_100], 44_100).unwrap();
        let config = FeatureConfig::default();
        let spec = stft_magnitudes(&clip, &config).unwrap();
        assert!(spec.iter().all(|&v| v == 0.0));
        let features = features_from_clip(&clip, &config).unwrap();
        assert!(features.is_degenerate());
        assert!(features.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn short_clip_is_rejected() {
        let clip = AudioClip::new(vec![0.1; 1000], 44_100).unwrap();
        assert!(matches!(
            stft_magnitudes(&clip, &FeatureConfig::default()),
            Err(Error::InputTooShort { .. })
        ));
    }

    #[test]
    fn pure_tone_peaks_at_expected_bin() {
        // 1 kHz at window 2048 / 44.1 kHz: bin round(1000 * 2048 / 44100) = 46.
        let clip = tone(1000.0, 0.2, 44_100);
        let config = FeatureConfig {
            window_function: WindowFunction::Rectangular,
            ..FeatureConfig::default()
        };
        let spec = stft_magnitudes(&clip, &config).unwrap();
        for row in spec.outer_iter() {
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert_eq!(argmax, 46);
        }
        let features = features_from_clip(&clip, &config).unwrap();
        let argmax = features
            .values()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax, 46);
    }

    #[test]
    fn stft_matches_naive_dft_oracle() {
        // Both window choices, deterministic random-ish clip of 4096 samples.
        let samples: Vec<f64> = (0..4096)
            .map(|i| {
                let t = i as f64;
                (0.013 * t).sin() * 0.4 + (0.19 * t).sin() * 0.3 + (1.7 * t).sin() * 0.2
            })
            .collect();
        let clip = AudioClip::new(samples, 44_100).unwrap();
        for window_function in [WindowFunction::Hann, WindowFunction::Rectangular] {
            let config = FeatureConfig {
                window_function,
                ..FeatureConfig::default()
            };
            let fast = stft_magnitudes(&clip, &config).unwrap();
            let slow = naive_stft(&clip, &config);
            assert_eq!(fast.nrows(), slow.len());
            for (f, s) in fast.outer_iter().zip(&slow) {
                for (&a, &b) in f.iter().zip(s) {
                    assert!(
                        (a - b).abs() <= 1e-6 * (1.0 + b.abs()),
                        "fft {a} vs naive {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn feature_vector_has_1025_entries_and_unit_norm() {
        let clip = generate_log_sweep(&SweepSpec::default(), 44_100).unwrap();
        let features = features_from_clip(&clip, &FeatureConfig::default()).unwrap();
        assert_eq!(features.len(), 1025);
        let norm: f64 = features.values().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn doubling_amplitude_leaves_l2_features_bitwise_identical() {
        let clip = generate_log_sweep(&SweepSpec::default(), 44_100).unwrap();
        let doubled = AudioClip::new(
            clip.samples().iter().map(|s| 2.0 * s).collect(),
            clip.sample_rate(),
        )
        .unwrap();
        let config = FeatureConfig::default();
        let a = features_from_clip(&clip, &config).unwrap();
        let b = features_from_clip(&doubled, &config).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn hop_shift_changes_features_less_than_five_percent() {
        // Broadband recording stand-in: seeded white noise.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let samples: Vec<f64> = (0..44_100).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let clip = AudioClip::new(samples, 44_100).unwrap();
        let shifted: Vec<f64> = {
            let s = clip.samples();
            let hop = 1024;
            s[hop..].iter().chain(&s[..hop]).cloned().collect()
        };
        let shifted = AudioClip::new(shifted, clip.sample_rate()).unwrap();
        let config = FeatureConfig::default();
        let a = features_from_clip(&clip, &config).unwrap();
        let b = features_from_clip(&shifted, &config).unwrap();
        let change: f64 = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        assert!(change < 0.05, "feature change {change}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn scale_invariance_of_l2_features(
            scale in 0.05f64..20.0,
            seed in 0u64..1000,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<f64> = (0..4096).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let clip = AudioClip::new(samples.clone(), 44_100).unwrap();
            let scaled = AudioClip::new(
                samples.iter().map(|s| s * scale).collect(),
                44_100,
            ).unwrap();
            let config = FeatureConfig::default();
            let a = features_from_clip(&clip, &config).unwrap();
            let b = features_from_clip(&scaled, &config).unwrap();
            for (x, y) in a.values().iter().zip(b.values()) {
                prop_assert!((x - y).abs() <= 1e-9);
            }
        }
    }
}
