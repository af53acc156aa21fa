//! Synthetic acoustic-cavity oracle.
//!
//! Maps object and gripper state to microphone recordings through a modal
//! (damped-sinusoid) impulse-response model. Object properties enter the
//! response through explicit, inspectable couplings: size shifts mode
//! frequencies multiplicatively and tilts the spectral envelope, material
//! reshapes mode dampings in proportion to the contact area, orientation
//! modulates mode amplitudes with a 180-degree period, and pose jitter
//! perturbs everything by a bounded hash-seeded amount.

pub mod dataset;
pub mod scenario;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{add_noise, AudioClip, NoiseModel, SweepSpec};

pub use dataset::{load_dataset, save_dataset, Dataset, Manifest, SampleLabel};
pub use scenario::{
    draw_pose, generate_dataset, rerender_sample, sample_noise_seed, state_for_label, Scenario,
    ScenarioKind, ShapeCategory,
};

/// Object material classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    Metal,
    Wood,
    Plastic,
    Styrofoam,
}

impl Material {
    pub const ALL: [Material; 4] = [
        Material::Metal,
        Material::Wood,
        Material::Plastic,
        Material::Styrofoam,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Material::Metal => "metal",
            Material::Wood => "wood",
            Material::Plastic => "plastic",
            Material::Styrofoam => "styrofoam",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown material '{s}'")))
    }

    pub fn index(&self) -> usize {
        Self::ALL.iter().position(|m| m == self).unwrap()
    }
}

/// Granular filling of the gripper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Medium {
    Empty,
    PlasticBb,
    MetalBb,
    Coffee,
}

impl Medium {
    pub const ALL: [Medium; 4] = [
        Medium::Empty,
        Medium::PlasticBb,
        Medium::MetalBb,
        Medium::Coffee,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Medium::Empty => "empty",
            Medium::PlasticBb => "plastic_bb",
            Medium::MetalBb => "metal_bb",
            Medium::Coffee => "coffee",
        }
    }

    fn index(&self) -> usize {
        Self::ALL.iter().position(|m| m == self).unwrap()
    }
}

/// Contact geometry used to derive the characteristic size and contact patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Sphere { diameter_mm: f64 },
    Cube { edge_mm: f64 },
    Plate { width_mm: f64, length_mm: f64 },
    Cylinder { diameter_mm: f64, length_mm: f64 },
    Bar { length_mm: f64, width_mm: f64, height_mm: f64 },
}

impl Shape {
    /// Characteristic dimension driving the frequency coupling.
    pub fn characteristic_size_mm(&self) -> f64 {
        match *self {
            Shape::Sphere { diameter_mm } => diameter_mm,
            Shape::Cube { edge_mm } => edge_mm,
            Shape::Plate { width_mm, length_mm } => 0.5 * (width_mm + length_mm) * 0.5,
            Shape::Cylinder { diameter_mm, length_mm } => {
                0.5 * (diameter_mm + 0.3 * length_mm)
            }
            Shape::Bar { height_mm, .. } => height_mm,
        }
    }

    /// Membrane contact patch in mm^2. A sphere of diameter d presses a patch
    /// of radius d/4 into the medium; flat faces contact fully; a cylinder
    /// contacts along a strip of half its diameter.
    pub fn contact_area_mm2(&self) -> f64 {
        match *self {
            Shape::Sphere { diameter_mm } => {
                std::f64::consts::PI * (diameter_mm / 4.0).powi(2)
            }
            Shape::Cube { edge_mm } => edge_mm * edge_mm,
            Shape::Plate { width_mm, length_mm } => width_mm * length_mm,
            Shape::Cylinder { diameter_mm, length_mm } => 0.5 * diameter_mm * length_mm,
            Shape::Bar { length_mm, width_mm, .. } => length_mm * width_mm,
        }
    }
}

/// Per-class mode-amplitude signature. Neutral (all zero) for parametric
/// scenarios where only the explicit couplings should carry information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignatureSpec {
    pub class_seed: u64,
    pub class_strength: f64,
    pub category_seed: u64,
    pub category_strength: f64,
}

impl SignatureSpec {
    pub fn neutral() -> Self {
        Self {
            class_seed: 0,
            class_strength: 0.0,
            category_seed: 0,
            category_strength: 0.0,
        }
    }
}

/// Ground-truth generative factors of one gripped object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub object_class: String,
    pub size_mm: f64,
    pub material: Material,
    /// Degrees, normalized into [0, 180); the response has a 180-degree period.
    pub orientation_theta: f64,
    pub contact_area_mm2: f64,
    pub signature: SignatureSpec,
}

impl ObjectState {
    pub fn new(
        object_class: impl Into<String>,
        shape: Shape,
        material: Material,
        orientation_theta: f64,
    ) -> Result<Self> {
        let size_mm = shape.characteristic_size_mm();
        let contact_area_mm2 = shape.contact_area_mm2();
        if !(size_mm.is_finite() && size_mm > 0.0) {
            return Err(Error::InvalidParameter("object size must be > 0".into()));
        }
        if !(contact_area_mm2.is_finite() && contact_area_mm2 > 0.0) {
            return Err(Error::InvalidParameter(
                "contact area must be > 0".into(),
            ));
        }
        if !orientation_theta.is_finite() {
            return Err(Error::InvalidParameter(
                "orientation must be finite".into(),
            ));
        }
        Ok(Self {
            object_class: object_class.into(),
            size_mm,
            material,
            orientation_theta: orientation_theta.rem_euclid(180.0),
            contact_area_mm2,
            signature: SignatureSpec::neutral(),
        })
    }

    pub fn with_signature(mut self, signature: SignatureSpec) -> Self {
        self.signature = signature;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.orientation_theta = theta.rem_euclid(180.0);
        self
    }
}

/// Gripper pose perturbation applied when re-placing an object.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseJitter {
    /// Degrees in [-90, +90].
    pub z_rotation_deg: f64,
    /// Centimeters in [-1, +1].
    pub translation_x_cm: f64,
    /// Centimeters in [-1, +1].
    pub translation_y_cm: f64,
    pub pose_id: u32,
}

impl PoseJitter {
    pub fn zero() -> Self {
        Self {
            z_rotation_deg: 0.0,
            translation_x_cm: 0.0,
            translation_y_cm: 0.0,
            pose_id: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.z_rotation_deg.abs() > 90.0 + 1e-9 {
            return Err(Error::InvalidParameter(
                "z rotation must be within +/-90 degrees".into(),
            ));
        }
        if self.translation_x_cm.abs() > 1.0 + 1e-9 || self.translation_y_cm.abs() > 1.0 + 1e-9
        {
            return Err(Error::InvalidParameter(
                "translation must be within +/-1 cm".into(),
            ));
        }
        Ok(())
    }

    /// RMS displacement over the normalized pose axes, in [0, 1]. Zero jitter
    /// leaves the modal map untouched.
    pub fn magnitude(&self) -> f64 {
        let z = self.z_rotation_deg / 90.0;
        let x = self.translation_x_cm;
        let y = self.translation_y_cm;
        ((z * z + x * x + y * y) / 3.0).sqrt()
    }
}

/// Cavity and coupling parameters of the simulated gripper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GripperConfig {
    pub medium: Medium,
    /// Sound absorption per medium, indexed in [`Medium::ALL`] order.
    pub absorption: [f64; 4],
    pub n_modes: usize,
    /// Hz, strictly increasing, below Nyquist.
    pub base_frequencies: Vec<f64>,
    /// 1/s, positive.
    pub base_dampings: Vec<f64>,
    pub base_amplitudes: Vec<f64>,
    /// Fraction of external noise amplitude blocked by the membrane.
    pub membrane_noise_attenuation: f64,
    pub sample_rate: u32,
    /// Impulse-response render length in seconds.
    pub ir_duration: f64,
    pub sweep: SweepSpec,
    pub noise: NoiseModel,
    /// Output scale applied after convolution.
    pub output_gain: f64,
    /// Reference size for the multiplicative frequency coupling.
    pub size_ref_mm: f64,
    /// Frequency shift per unit relative size: f = f0 * (1 + alpha * s).
    pub size_freq_alpha: f64,
    /// Spectral-tilt strength of the size coupling.
    pub size_amp_tilt: f64,
    /// Damping growth with size.
    pub size_damping_gain: f64,
    /// Orientation amplitude modulation depth.
    pub orientation_beta: f64,
    /// Contact patch at which material coupling saturates (80 mm sphere).
    pub contact_area_ref_mm2: f64,
    /// Bounded pose-jitter strengths.
    pub jitter_amplitude: f64,
    pub jitter_frequency: f64,
    pub jitter_damping: f64,
}

impl Default for GripperConfig {
    fn default() -> Self {
        let n_modes = 12;
        let base_frequencies = log_spaced(200.0, 8_000.0, n_modes);
        let base_dampings = base_frequencies
            .iter()
            .map(|f| 40.0 * (f / 200.0).powf(0.35))
            .collect();
        let base_amplitudes = (0..n_modes).map(|k| 1.0 / (1.0 + 0.08 * k as f64)).collect();
        Self {
            medium: Medium::PlasticBb,
            absorption: [0.0, 0.3, 0.45, 0.85],
            n_modes,
            base_frequencies,
            base_dampings,
            base_amplitudes,
            membrane_noise_attenuation: 0.85,
            sample_rate: 44_100,
            ir_duration: 0.5,
            sweep: SweepSpec::default(),
            noise: NoiseModel::default(),
            output_gain: 20.0,
            size_ref_mm: 20.0,
            size_freq_alpha: 0.15,
            size_amp_tilt: 0.45,
            size_damping_gain: 0.5,
            orientation_beta: 0.35,
            contact_area_ref_mm2: std::f64::consts::PI * 400.0,
            jitter_amplitude: 0.30,
            jitter_frequency: 0.003,
            jitter_damping: 0.22,
        }
    }
}

impl GripperConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_modes < 4 {
            return Err(Error::InvalidParameter("n_modes must be >= 4".into()));
        }
        if self.base_frequencies.len() != self.n_modes
            || self.base_dampings.len() != self.n_modes
            || self.base_amplitudes.len() != self.n_modes
        {
            return Err(Error::InvalidParameter(
                "mode parameter lists must have n_modes entries".into(),
            ));
        }
        let nyquist = f64::from(self.sample_rate) / 2.0;
        if !self
            .base_frequencies
            .windows(2)
            .all(|w| w[0] < w[1])
        {
            return Err(Error::InvalidParameter(
                "base frequencies must be strictly increasing".into(),
            ));
        }
        if self.base_frequencies.iter().any(|&f| f <= 0.0 || f >= nyquist) {
            return Err(Error::InvalidParameter(
                "base frequencies must lie in (0, Nyquist)".into(),
            ));
        }
        if self.base_dampings.iter().any(|&d| d <= 0.0) {
            return Err(Error::InvalidParameter("dampings must be > 0".into()));
        }
        if !(0.0..=1.0).contains(&self.membrane_noise_attenuation) {
            return Err(Error::InvalidParameter(
                "membrane attenuation must be in [0, 1]".into(),
            ));
        }
        if self.absorption.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidParameter(
                "absorption fractions must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }

    pub fn absorption_of(&self, medium: Medium) -> f64 {
        self.absorption[medium.index()]
    }

    /// Material coupling weight: saturates once the contact patch reaches the
    /// reference area. Small patches transfer little energy into the object,
    /// suppressing the material cue.
    pub fn material_coupling(&self, contact_area_mm2: f64) -> f64 {
        (contact_area_mm2 / self.contact_area_ref_mm2).min(1.0)
    }
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let ratio = (hi / lo).ln();
    (0..n)
        .map(|k| lo * (ratio * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// One resonant mode of the cavity response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub frequency_hz: f64,
    pub damping: f64,
    pub amplitude: f64,
    pub phase: f64,
}

/// The full set of modes describing one cavity state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    pub modes: Vec<Mode>,
}

impl ModeSet {
    pub fn empty() -> Self {
        Self { modes: Vec::new() }
    }
}

/// splitmix64 step; the fixed seed-splitting rule used everywhere.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds the parts into a single deterministic seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut state = 0x6A09_E667_F3BC_C908; // sqrt(2) fractional bits
    let mut out = 0;
    for &p in parts {
        state ^= p;
        out = splitmix64(&mut state);
    }
    out
}

/// Stable 64-bit hash of a class name (std hashers are not stable across
/// releases).
pub fn hash_name(name: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(name.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

/// Golden-angle phase offsets decorrelate the orientation response across
/// modes.
fn orientation_phase(k: usize) -> f64 {
    (k as f64 * 2.399_963_229_728_653).rem_euclid(2.0 * std::f64::consts::PI)
}

/// Normalized index in [-1, 1]; the axis for spectral tilts.
fn mode_axis(k: usize, n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        2.0 * k as f64 / (n - 1) as f64 - 1.0
    }
}

fn material_damping_multiplier(material: Material, k: usize, n: usize) -> f64 {
    let x = mode_axis(k, n);
    match material {
        // Metal rings: low damping, slightly more so for high modes.
        Material::Metal => 0.45 * (1.0 - 0.15 * x),
        // Wood damps mid modes most.
        Material::Wood => 1.5 * (1.0 + 0.3 * (1.0 - x.abs())),
        Material::Plastic => 0.85,
        // Styrofoam swallows high modes.
        Material::Styrofoam => 2.6 * (1.0 + 0.4 * x),
    }
}

fn material_amp_tilt(material: Material, k: usize, n: usize) -> f64 {
    let x = mode_axis(k, n);
    match material {
        Material::Metal => 0.35 * x,
        Material::Wood => 0.30 * (1.0 - x.abs()) - 0.10,
        Material::Plastic => 0.0,
        Material::Styrofoam => -0.45 * x - 0.10,
    }
}

fn signature_factors(seed: u64, strength: f64, n: usize) -> Vec<f64> {
    if strength == 0.0 {
        return vec![1.0; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| 1.0 + strength * rng.gen_range(-1.0..1.0))
        .collect()
}

/// Deterministic map from object and pose to the cavity's resonant modes.
///
/// Couplings, in order: size shifts every frequency by
/// f = f0 * (1 + alpha * (size - ref)/ref) and tilts amplitudes/dampings
/// through a bounded tanh of the same relative size; material reshapes
/// dampings and amplitudes with a weight that saturates at the reference
/// contact area; orientation modulates amplitudes as
/// a = a0 * (1 + beta * cos(2*theta + psi_k)); pose jitter applies bounded
/// perturbations drawn from a hash of (object class, pose id, pose fields),
/// scaled by the jitter magnitude so the zero pose is exact.
pub fn object_modes(
    state: &ObjectState,
    jitter: &PoseJitter,
    config: &GripperConfig,
) -> Result<ModeSet> {
    config.validate()?;
    jitter.validate()?;

    let n = config.n_modes;
    let nyquist = f64::from(config.sample_rate) / 2.0;
    let s_rel = (state.size_mm - config.size_ref_mm) / config.size_ref_mm;
    let s_bounded = s_rel.tanh();
    let coupling = config.material_coupling(state.contact_area_mm2);
    let theta_rad = 2.0 * state.orientation_theta * std::f64::consts::PI / 180.0;

    let class_sig = signature_factors(
        state.signature.class_seed,
        state.signature.class_strength,
        n,
    );
    let category_sig = signature_factors(
        state.signature.category_seed,
        state.signature.category_strength,
        n,
    );

    let magnitude = jitter.magnitude();
    let jitter_seed = derive_seed(&[
        hash_name(&state.object_class),
        u64::from(jitter.pose_id),
        jitter.z_rotation_deg.to_bits(),
        jitter.translation_x_cm.to_bits(),
        jitter.translation_y_cm.to_bits(),
    ]);
    let mut jitter_rng = ChaCha8Rng::seed_from_u64(jitter_seed);

    let mut modes = Vec::with_capacity(n);
    for k in 0..n {
        let axis = mode_axis(k, n);
        let u: f64 = jitter_rng.gen_range(-1.0..1.0);
        let v: f64 = jitter_rng.gen_range(-1.0..1.0);
        let q: f64 = jitter_rng.gen_range(-1.0..1.0);

        let frequency_hz = config.base_frequencies[k]
            * (1.0 + config.size_freq_alpha * s_rel)
            * (1.0 + config.jitter_frequency * magnitude * v);
        if frequency_hz <= 0.0 || frequency_hz >= nyquist {
            return Err(Error::InvalidParameter(format!(
                "mode {k} frequency {frequency_hz:.1} Hz outside (0, Nyquist)"
            )));
        }

        let damping = config.base_dampings[k]
            * (1.0 + config.size_damping_gain * s_bounded)
            * material_damping_multiplier(state.material, k, n).powf(coupling)
            * (1.0 + config.jitter_damping * magnitude * q);

        let amplitude = (config.base_amplitudes[k]
            * (1.0 + config.orientation_beta * (theta_rad + orientation_phase(k)).cos())
            * (1.0 + coupling * material_amp_tilt(state.material, k, n))
            * (1.0 + config.size_amp_tilt * s_bounded * axis)
            * category_sig[k]
            * class_sig[k]
            * (1.0 + config.jitter_amplitude * magnitude * u))
            .max(0.0);

        modes.push(Mode {
            frequency_hz,
            damping,
            amplitude,
            phase: 0.0,
        });
    }
    Ok(ModeSet { modes })
}

/// Renders the modal impulse response
/// h(t) = sum_k a_k * exp(-d_k t) * sin(2 pi f_k t + psi_k).
pub fn render_impulse_response(
    modes: &ModeSet,
    duration: f64,
    sample_rate: u32,
) -> Result<AudioClip> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::InvalidParameter("duration must be > 0".into()));
    }
    let n_samples = ((duration * f64::from(sample_rate)).round() as usize).max(1);
    let dt = 1.0 / f64::from(sample_rate);
    let mut samples = vec![0.0; n_samples];
    for mode in &modes.modes {
        let omega = 2.0 * std::f64::consts::PI * mode.frequency_hz;
        for (i, slot) in samples.iter_mut().enumerate() {
            let t = i as f64 * dt;
            *slot += mode.amplitude * (-mode.damping * t).exp() * (omega * t + mode.phase).sin();
        }
    }
    AudioClip::new(samples, sample_rate)
}

/// Linear convolution via FFT, exact to rounding. Output length a + b - 1.
fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let out_len = a.len() + b.len() - 1;
    let fft_len = out_len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(fft_len);
    let inverse = planner.plan_fft_inverse(fft_len);

    let mut fa: Vec<Complex<f64>> = a
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(fft_len)
        .collect();
    let mut fb: Vec<Complex<f64>> = b
        .iter()
        .map(|&x| Complex::new(x, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(fft_len)
        .collect();
    forward.process(&mut fa);
    forward.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= *y;
    }
    inverse.process(&mut fa);
    let scale = 1.0 / fft_len as f64;
    fa[..out_len].iter().map(|c| c.re * scale).collect()
}

/// Full recording model: excitation convolved with the cavity response,
/// scaled by the medium's reflectivity, plus membrane-attenuated measurement
/// noise. Deterministic given the seed.
pub fn simulate_recording(
    sweep: &AudioClip,
    state: &ObjectState,
    jitter: &PoseJitter,
    config: &GripperConfig,
    noise_level_dba: f64,
    seed: u64,
) -> Result<AudioClip> {
    let modes = object_modes(state, jitter, config)?;
    let ir = render_impulse_response(&modes, config.ir_duration, config.sample_rate)?;
    let scale = (1.0 - config.absorption_of(config.medium)) * config.output_gain;
    let convolved = fft_convolve(sweep.samples(), ir.samples());
    let samples: Vec<f64> = convolved[..sweep.len()].iter().map(|&x| x * scale).collect();
    let dry = AudioClip::new(samples, config.sample_rate)?;
    let mic_noise = config
        .noise
        .scaled(1.0 - config.membrane_noise_attenuation);
    add_noise(&dry, &mic_noise, noise_level_dba, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere_state(diameter: f64, material: Material) -> ObjectState {
        ObjectState::new(
            format!("sphere_{}", material.name()),
            Shape::Sphere {
                diameter_mm: diameter,
            },
            material,
            0.0,
        )
        .unwrap()
    }

    fn cube_state(edge: f64) -> ObjectState {
        ObjectState::new("cube", Shape::Cube { edge_mm: edge }, Material::Plastic, 0.0).unwrap()
    }

    fn some_jitter(pose_id: u32) -> PoseJitter {
        PoseJitter {
            z_rotation_deg: 30.0,
            translation_x_cm: 0.4,
            translation_y_cm: -0.2,
            pose_id,
        }
    }

    #[test]
    fn object_modes_is_deterministic() {
        let config = GripperConfig::default();
        let state = cube_state(20.0);
        let a = object_modes(&state, &PoseJitter::zero(), &config).unwrap();
        let b = object_modes(&state, &PoseJitter::zero(), &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn larger_objects_have_strictly_higher_mode_frequencies() {
        let config = GripperConfig::default();
        let small = object_modes(&cube_state(10.0), &PoseJitter::zero(), &config).unwrap();
        let large = object_modes(&cube_state(30.0), &PoseJitter::zero(), &config).unwrap();
        for (s, l) in small.modes.iter().zip(&large.modes) {
            assert!(l.frequency_hz > s.frequency_hz);
        }
    }

    #[test]
    fn orientation_modulates_amplitudes_with_180_degree_period() {
        let config = GripperConfig::default();
        let at = |theta: f64| {
            let state = cube_state(20.0).with_theta(theta);
            object_modes(&state, &PoseJitter::zero(), &config).unwrap()
        };
        let t0 = at(0.0);
        let t90 = at(90.0);
        let t180 = at(180.0);
        assert_ne!(
            t0.modes.iter().map(|m| m.amplitude).collect::<Vec<_>>(),
            t90.modes.iter().map(|m| m.amplitude).collect::<Vec<_>>()
        );
        assert_eq!(t0, t180);
    }

    #[test]
    fn jitter_perturbs_but_zero_jitter_does_not() {
        let config = GripperConfig::default();
        let state = cube_state(20.0);
        let base = object_modes(&state, &PoseJitter::zero(), &config).unwrap();
        let moved = object_modes(&state, &some_jitter(3), &config).unwrap();
        assert_ne!(base, moved);
        // A different pose id gives a different perturbation.
        let moved2 = object_modes(&state, &some_jitter(4), &config).unwrap();
        assert_ne!(moved, moved2);
    }

    #[test]
    fn empty_mode_set_renders_silence() {
        let clip = render_impulse_response(&ModeSet::empty(), 0.1, 44_100).unwrap();
        assert!(clip.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn single_mode_energy_matches_quadrature_oracle() {
        let modes = ModeSet {
            modes: vec![Mode {
                frequency_hz: 1000.0,
                damping: 50.0,
                amplitude: 1.0,
                phase: 0.0,
            }],
        };
        let rate = 44_100u32;
        let clip = render_impulse_response(&modes, 1.0, rate).unwrap();
        let energy = crate::signal::signal_energy(&clip);

        // Fine-grid quadrature of rate * integral exp(-2*50*t) sin^2(2 pi 1000 t) dt.
        let steps = 4_000_000usize;
        let dt = 1.0 / steps as f64;
        let mut integral = 0.0;
        for i in 0..steps {
            let t = (i as f64 + 0.5) * dt;
            let v = (-100.0 * t).exp()
                * (2.0 * std::f64::consts::PI * 1000.0 * t).sin().powi(2);
            integral += v * dt;
        }
        let expected = integral * f64::from(rate);
        assert!(
            (energy - expected).abs() / expected < 0.01,
            "energy {energy:.4} vs quadrature {expected:.4}"
        );
    }

    #[test]
    fn overdamped_mode_has_negligible_energy() {
        let mode = |damping| ModeSet {
            modes: vec![Mode {
                frequency_hz: 1000.0,
                damping,
                amplitude: 1.0,
                phase: 0.0,
            }],
        };
        let energy = |d| {
            crate::signal::signal_energy(
                &render_impulse_response(&mode(d), 1.0, 44_100).unwrap(),
            )
        };
        assert!(energy(1e5) < 1e-4 * energy(50.0));
    }

    #[test]
    fn perfect_absorber_with_zero_noise_is_silent() {
        let mut config = GripperConfig::default();
        config.medium = Medium::Coffee;
        config.absorption = [0.0, 0.3, 0.45, 1.0];
        config.noise.sigma_at_floor = 0.0;
        let sweep = crate::signal::generate_log_sweep(&config.sweep, config.sample_rate).unwrap();
        let rec = simulate_recording(
            &sweep,
            &cube_state(20.0),
            &PoseJitter::zero(),
            &config,
            45.0,
            9,
        )
        .unwrap();
        assert!(rec.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn recordings_are_seed_deterministic() {
        let config = GripperConfig::default();
        let sweep = crate::signal::generate_log_sweep(&config.sweep, config.sample_rate).unwrap();
        let state = sphere_state(60.0, Material::Plastic);
        let jitter = some_jitter(5);
        let a = simulate_recording(&sweep, &state, &jitter, &config, 45.0, 77).unwrap();
        let b = simulate_recording(&sweep, &state, &jitter, &config, 45.0, 77).unwrap();
        assert_eq!(a.samples(), b.samples());
    }

    #[test]
    fn media_energy_ordering_matches_reflectivity() {
        // plastic > metal > coffee, and coffee keeps less than 20% of the
        // empty-gripper energy.
        let base = GripperConfig {
            noise: NoiseModel {
                floor_dba: 45.0,
                sigma_at_floor: 0.0,
            },
            ..GripperConfig::default()
        };
        let sweep = crate::signal::generate_log_sweep(&base.sweep, base.sample_rate).unwrap();
        let state = sphere_state(60.0, Material::Plastic);
        let record = |medium| {
            let config = GripperConfig {
                medium,
                ..base.clone()
            };
            simulate_recording(&sweep, &state, &PoseJitter::zero(), &config, 45.0, 1).unwrap()
        };
        let empty = record(Medium::Empty);
        let ratio = |medium| {
            crate::signal::relative_reflected_energy(&record(medium), &empty).unwrap()
        };
        let plastic = ratio(Medium::PlasticBb);
        let metal = ratio(Medium::MetalBb);
        let coffee = ratio(Medium::Coffee);
        assert!(plastic > metal && metal > coffee, "{plastic} {metal} {coffee}");
        assert!(coffee < 0.2, "coffee ratio {coffee}");
    }

    #[test]
    fn material_coupling_saturates_at_reference_area() {
        let config = GripperConfig::default();
        assert!((config.material_coupling(2.0 * config.contact_area_ref_mm2) - 1.0).abs() < 1e-12);
        let small = sphere_state(30.0, Material::Metal);
        let w = config.material_coupling(small.contact_area_mm2);
        assert!(w < 0.25, "30 mm sphere coupling {w}");
    }
}
