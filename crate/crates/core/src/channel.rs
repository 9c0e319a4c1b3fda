//! Sparse massive-MIMO channel generation and pilot observation.
//!
//! Channels follow a far-field multipath model: each user sees a handful of
//! scatterers inside an angular sector, each contributing a half-wavelength
//! ULA steering vector scaled by a complex Gaussian gain with free-space
//! amplitude. The channel matrix is then rescaled so that `‖H‖²_F = MK`,
//! which fixes the per-entry channel energy at one and makes the SNR a pure
//! function of the noise variance, `σ² = 10^(−SNR/10)`.
//!
//! All vectorizations are column-major.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ComplexMatrix, DictionaryKron};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// `M×K` channel matrix `H = [h_1, …, h_K]`.
pub type ChannelMatrix = ComplexMatrix;

/// Full generative description of one experimental scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelScenario {
    /// Base-station antennas `M`.
    #[serde(rename = "M")]
    pub num_antennas: usize,
    /// Single-antenna users `K`.
    #[serde(rename = "K")]
    pub num_users: usize,
    /// Pilot length `N`.
    #[serde(rename = "N")]
    pub pilot_length: usize,
    /// Transform size `Q`; defaults to `M`.
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub transform_size: Option<usize>,
    pub snr_db: f64,
    #[serde(rename = "scatterers", default = "ChannelScenario::default_scatterers")]
    pub num_scatterers: usize,
    /// Hz.
    #[serde(default = "ChannelScenario::default_carrier")]
    pub carrier_freq: f64,
    /// Meters.
    #[serde(default = "ChannelScenario::default_range_min")]
    pub range_min: f64,
    /// Meters.
    #[serde(default = "ChannelScenario::default_range_max")]
    pub range_max: f64,
    /// Full width of each user's sector, radians.
    #[serde(default = "ChannelScenario::default_spread")]
    pub angular_spread: f64,
    #[serde(default)]
    pub seed: u64,
}

impl ChannelScenario {
    fn default_scatterers() -> usize {
        3
    }
    fn default_carrier() -> f64 {
        30e9
    }
    fn default_range_min() -> f64 {
        100.0
    }
    fn default_range_max() -> f64 {
        500.0
    }
    fn default_spread() -> f64 {
        PI / 6.0
    }

    /// A scenario with the standard geometry (30 GHz, 100–500 m, π/6 sector).
    pub fn new(num_antennas: usize, pilot_length: usize, num_users: usize, snr_db: f64) -> Self {
        Self {
            num_antennas,
            num_users,
            pilot_length,
            transform_size: None,
            snr_db,
            num_scatterers: Self::default_scatterers(),
            carrier_freq: Self::default_carrier(),
            range_min: Self::default_range_min(),
            range_max: Self::default_range_max(),
            angular_spread: Self::default_spread(),
            seed: 0,
        }
    }

    pub fn q(&self) -> usize {
        self.transform_size.unwrap_or(self.num_antennas)
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq
    }

    /// `σ² = 10^(−SNR/10)`; zero for an infinite SNR.
    pub fn noise_variance(&self) -> f64 {
        noise_variance_from_snr(self.snr_db)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Scenario(msg));
        if self.num_antennas == 0 || self.num_users == 0 || self.pilot_length == 0 {
            return bad("M, N and K must all be at least 1".into());
        }
        if self.num_users > self.pilot_length {
            return bad(format!(
                "pilot rows exceed pilot length (K = {} > N = {})",
                self.num_users, self.pilot_length
            ));
        }
        if self.q() != self.num_antennas {
            return bad(format!(
                "transform size Q = {} must equal M = {} for the DFT transform",
                self.q(),
                self.num_antennas
            ));
        }
        if self.num_scatterers == 0 {
            return bad("scatterers must be at least 1".into());
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return bad(format!("snr_db must be a number or +inf, got {}", self.snr_db));
        }
        if !(self.carrier_freq > 0.0 && self.carrier_freq.is_finite()) {
            return bad(format!("carrier_freq must be positive, got {}", self.carrier_freq));
        }
        if !(self.range_min > 0.0 && self.range_min < self.range_max && self.range_max.is_finite()) {
            return bad(format!(
                "ranges must satisfy 0 < range_min < range_max, got {} and {}",
                self.range_min, self.range_max
            ));
        }
        if !(self.angular_spread >= 0.0 && self.angular_spread < PI) {
            return bad(format!("angular_spread must be in [0, π), got {}", self.angular_spread));
        }
        Ok(())
    }

    /// DFT pilot and DFT transform for this scenario.
    pub fn dictionary(&self) -> Result<DictionaryKron> {
        self.validate()?;
        DictionaryKron::new(
            dft_pilot(self.num_users, self.pilot_length)?,
            dft_transform(self.num_antennas),
        )
    }
}

pub fn noise_variance_from_snr(snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        10f64.powf(-snr_db / 10.0)
    }
}

/// Deterministic RNG for one independent stream (e.g. one Monte Carlo trial)
/// derived from a base seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn unit_phase(numerator: usize, denominator: usize) -> Complex64 {
    // Reduce the exponent modulo the period before converting to radians.
    let k = (numerator % denominator) as f64;
    Complex64::from_polar(1.0, -2.0 * PI * k / denominator as f64)
}

/// First `K` rows of the `N×N` DFT matrix: `P[k, n] = exp(−2πi·kn/N)`.
pub fn dft_pilot(num_users: usize, pilot_length: usize) -> Result<ComplexMatrix> {
    if num_users == 0 || pilot_length == 0 {
        return Err(Error::Scenario("pilot dimensions must be at least 1".into()));
    }
    if num_users > pilot_length {
        return Err(Error::Scenario(format!(
            "pilot rows exceed pilot length (K = {num_users} > N = {pilot_length})"
        )));
    }
    Ok(ComplexMatrix::from_fn(num_users, pilot_length, |k, n| {
        unit_phase(k * n, pilot_length)
    }))
}

/// `M×M` DFT matrix (unnormalized, `FᴴF = M·I`).
pub fn dft_transform(m: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(m, m, |r, c| unit_phase(r * c, m))
}

/// Half-wavelength ULA response `a_m = exp(iπ·m·sin θ)`, `m = 0..M`.
pub fn array_response(m: usize, angle: f64) -> Vec<Complex64> {
    let s = angle.sin();
    (0..m)
        .map(|i| Complex64::from_polar(1.0, PI * i as f64 * s))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterPath {
    /// Meters.
    pub range: f64,
    /// Radians from broadside.
    pub angle: f64,
    pub gain: Complex64,
}

/// Scatterer geometry and gains, one list per user.
#[derive(Debug, Clone, PartialEq)]
pub struct ScattererSet {
    pub per_user: Vec<Vec<ScatterPath>>,
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * s, im * s)
}

/// Draws scatterers for every user.
///
/// Each user gets a sector center uniform in `(−π/2 + s/2, π/2 − s/2)` so the
/// whole sector of width `s` stays inside the visible half-plane; path angles
/// are uniform within the sector, ranges uniform in `[range_min, range_max]`,
/// gains `CN(0, 1)` times the free-space amplitude `λ/(4πr)`.
pub fn draw_scatterers<R: Rng + ?Sized>(scenario: &ChannelScenario, rng: &mut R) -> ScattererSet {
    let half = scenario.angular_spread / 2.0;
    let center_limit = PI / 2.0 - half;
    let lambda = scenario.wavelength();
    let per_user = (0..scenario.num_users)
        .map(|_| {
            let center = rng.random_range(-center_limit..center_limit);
            (0..scenario.num_scatterers)
                .map(|_| {
                    let offset = if half > 0.0 { rng.random_range(-half..=half) } else { 0.0 };
                    let range = rng.random_range(scenario.range_min..=scenario.range_max);
                    let amplitude = lambda / (4.0 * PI * range);
                    ScatterPath {
                        range,
                        angle: center + offset,
                        gain: complex_normal(rng, 1.0) * amplitude,
                    }
                })
                .collect()
        })
        .collect();
    ScattererSet { per_user }
}

/// Sums the paths of each user, `h_k = Σ g·a(θ)`, without normalization.
pub fn channel_from_scatterers(num_antennas: usize, scatterers: &ScattererSet) -> ChannelMatrix {
    let k = scatterers.per_user.len();
    let mut h = ComplexMatrix::zeros(num_antennas, k);
    for (user, paths) in scatterers.per_user.iter().enumerate() {
        for path in paths {
            for (m, a) in array_response(num_antennas, path.angle).into_iter().enumerate() {
                h[(m, user)] += path.gain * a;
            }
        }
    }
    h
}

/// Rescales `H` so that `‖H‖²_F = MK`. A zero channel is returned unchanged.
pub fn normalize_channel(h: &ChannelMatrix) -> ChannelMatrix {
    let energy = h.frobenius_norm_sqr();
    if energy == 0.0 {
        return h.clone();
    }
    let target = (h.rows() * h.cols()) as f64;
    h.scale((target / energy).sqrt())
}

pub fn generate_channel<R: Rng + ?Sized>(
    scenario: &ChannelScenario,
    rng: &mut R,
) -> Result<(ChannelMatrix, ScattererSet)> {
    scenario.validate()?;
    let scatterers = draw_scatterers(scenario, rng);
    let h = normalize_channel(&channel_from_scatterers(scenario.num_antennas, &scatterers));
    Ok((h, scatterers))
}

/// Received pilot block `Z = HP + E` and its vectorization.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// `M×N`.
    pub received: ComplexMatrix,
    /// `vec(Z)`, column-major.
    pub z: Vec<Complex64>,
    pub noise_variance: f64,
}

/// `Z = HP + E` with `E` i.i.d. `CN(0, σ²)`, `σ² = 10^(−SNR/10)`.
/// An SNR of `+∞` produces a noiseless observation.
pub fn observe<R: Rng + ?Sized>(
    h: &ChannelMatrix,
    pilot: &ComplexMatrix,
    snr_db: f64,
    rng: &mut R,
) -> Result<Observation> {
    let sigma2 = noise_variance_from_snr(snr_db);
    let mut received = h.matmul(pilot)?;
    if sigma2 > 0.0 {
        let (m, n) = received.shape();
        for c in 0..n {
            for r in 0..m {
                received[(r, c)] += complex_normal(rng, sigma2);
            }
        }
    }
    let z = received.as_slice().to_vec();
    Ok(Observation {
        received,
        z,
        noise_variance: sigma2,
    })
}

/// `H = F·U` with `U` the `Q×K` reshape of `u_hat`.
pub fn reconstruct_channel(
    u_hat: &[Complex64],
    transform: &ComplexMatrix,
    num_antennas: usize,
    num_users: usize,
) -> Result<ChannelMatrix> {
    if transform.rows() != num_antennas {
        return Err(Error::shape("reconstruct_channel transform rows", num_antennas, transform.rows()));
    }
    let q = transform.cols();
    if u_hat.len() != q * num_users {
        return Err(Error::shape("reconstruct_channel u_hat", q * num_users, u_hat.len()));
    }
    let u = ComplexMatrix::from_col_major(q, num_users, u_hat.to_vec())?;
    transform.matmul(&u)
}

/// `vec(F⁻¹H)` for a square, orthogonal-up-to-scale transform (`F⁻¹ = Fᴴ/M`).
pub fn transform_coefficients(h: &ChannelMatrix, transform: &ComplexMatrix) -> Result<Vec<Complex64>> {
    let m = transform.rows();
    Ok(transform
        .conj_transpose()
        .matmul(h)?
        .scale(1.0 / m as f64)
        .into_vec())
}
