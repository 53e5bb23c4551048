//! Forward model of a uniform linear array with mutual coupling.
//!
//! Angles are radians. The coupling matrix is the symmetric (not
//! Hermitian) Toeplitz matrix built from `c = [1, c₁, …, c_{N−1}]`, and
//! [`q_matrix`] rearranges `C·a(θ)` into `Q(θ)·c` so that the unknown
//! coupling enters linearly.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rand_distr::{Distribution, StandardNormal, Uniform};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::ModelError;
use crate::linalg::CMatrix;

/// Uniform linear array. `spacing` is the element spacing in wavelengths.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArrayGeometry {
    num_antennas: usize,
    spacing: f64,
}

impl ArrayGeometry {
    pub fn new(num_antennas: usize, spacing: f64) -> Result<Self, ModelError> {
        if num_antennas < 2 {
            return Err(ModelError::TooFewAntennas(num_antennas));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(ModelError::InvalidSpacing(spacing));
        }
        Ok(ArrayGeometry { num_antennas, spacing })
    }

    /// Half-wavelength array.
    pub fn half_wavelength(num_antennas: usize) -> Result<Self, ModelError> {
        Self::new(num_antennas, 0.5)
    }

    #[inline]
    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Per-element phase progression `2π·(d/λ)·sin θ`.
    #[inline]
    fn phase_step(&self, theta: f64) -> f64 {
        2.0 * PI * self.spacing * theta.sin()
    }
}

fn check_finite(theta: f64) -> Result<(), ModelError> {
    if theta.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonFiniteAngle(theta))
    }
}

/// `a_n(θ) = exp(j·2π·n·(d/λ)·sin θ)`.
pub fn steering_vector(theta: f64, geometry: &ArrayGeometry) -> Result<Vec<Complex64>, ModelError> {
    check_finite(theta)?;
    let w = geometry.phase_step(theta);
    Ok((0..geometry.num_antennas())
        .map(|n| Complex64::from_polar(1.0, w * n as f64))
        .collect())
}

/// Entrywise θ-derivative of [`steering_vector`]:
/// `j·2π·n·(d/λ)·cos θ · a_n(θ)`.
pub fn steering_derivative(theta: f64, geometry: &ArrayGeometry) -> Result<Vec<Complex64>, ModelError> {
    check_finite(theta)?;
    let w = geometry.phase_step(theta);
    let dw = 2.0 * PI * geometry.spacing() * theta.cos();
    Ok((0..geometry.num_antennas())
        .map(|n| {
            let n = n as f64;
            Complex64::new(0.0, dw * n) * Complex64::from_polar(1.0, w * n)
        })
        .collect())
}

/// Mutual coupling coefficients `c₀ … c_{N−1}`.
///
/// Generated vectors have `c₀ = 1`; estimated ones may not (the
/// amplitude of `c` and of the signals trade off freely).
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingVector {
    coeffs: Vec<Complex64>,
}

impl CouplingVector {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        CouplingVector { coeffs }
    }

    /// `e₀`: no coupling.
    pub fn uncoupled(num_antennas: usize) -> Self {
        let mut coeffs = alloc::vec![Complex64::new(0.0, 0.0); num_antennas];
        coeffs[0] = Complex64::new(1.0, 0.0);
        CouplingVector { coeffs }
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `c / c₀`, used to compare estimates with the unit-diagonal truth.
    pub fn normalized(&self) -> CouplingVector {
        let c0 = self.coeffs[0];
        CouplingVector {
            coeffs: self.coeffs.iter().map(|&c| c / c0).collect(),
        }
    }
}

/// `C = Toeplitz{c}` with `C[i][j] = c_{|i−j|}`.
pub fn coupling_matrix(c: &CouplingVector) -> CMatrix {
    let n = c.len();
    let k = c.coeffs();
    CMatrix::from_fn(n, n, |i, j| k[i.abs_diff(j)])
}

/// The rearrangement matrix for an arbitrary response vector `v`:
/// the unique `Q[v]` with `Toeplitz{c}·v = Q[v]·c` for every `c`.
///
/// `Q[v] = Q₁ + Q₂` with `Q₁[i][n] = v_{i+n}` (for `i+n ≤ N−1`) and
/// `Q₂[i][n] = v_{i−n}` (for `1 ≤ n ≤ i`). It is linear in `v`.
pub fn rearrangement_matrix(v: &[Complex64]) -> CMatrix {
    let n = v.len();
    CMatrix::from_fn(n, n, |i, col| {
        let mut q = Complex64::new(0.0, 0.0);
        if i + col < n {
            q += v[i + col];
        }
        if col >= 1 && col <= i {
            q += v[i - col];
        }
        q
    })
}

/// `Q(θ) = Q₁(θ) + Q₂(θ)`, satisfying `Q(θ)·c = Toeplitz{c}·a(θ)`.
pub fn q_matrix(theta: f64, geometry: &ArrayGeometry) -> Result<CMatrix, ModelError> {
    Ok(rearrangement_matrix(&steering_vector(theta, geometry)?))
}

/// Draws `c` with `c₀ = 1` and, for `1 ≤ n < taps`,
/// `c_n = (1+ξ)·e^{jφ}·10^{α(1+0.5n)/20}` with `ξ ~ U[−0.05, 0.05]` and
/// `φ ~ U[0, 2π]`; the remaining entries are zero.
pub fn generate_coupling_vector<R: RngCore + ?Sized>(
    alpha_db: f64,
    taps: usize,
    num_antennas: usize,
    rng: &mut R,
) -> Result<CouplingVector, ModelError> {
    if !alpha_db.is_finite() {
        return Err(ModelError::NonFinite {
            what: "coupling strength",
            value: alpha_db,
        });
    }
    if taps == 0 || taps > num_antennas {
        return Err(ModelError::InvalidTaps {
            taps,
            antennas: num_antennas,
        });
    }
    let jitter = Uniform::new_inclusive(-0.05, 0.05).expect("valid range");
    let phase = Uniform::new(0.0, 2.0 * PI).expect("valid range");
    let mut c = CouplingVector::uncoupled(num_antennas);
    for n in 1..taps {
        let xi: f64 = jitter.sample(rng);
        let phi: f64 = phase.sample(rng);
        let mag = (1.0 + xi) * 10f64.powf(alpha_db * (1.0 + 0.5 * n as f64) / 20.0);
        c.coeffs[n] = Complex64::from_polar(mag, phi);
    }
    Ok(c)
}

/// The `K` far-field sources and their signal statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct SourceSet {
    directions: Vec<f64>,
    signal_mean: Complex64,
    signal_variance: f64,
}

impl SourceSet {
    /// Sources with the default signal law `CN(√2·e^{jπ/2}, 1)`.
    pub fn new(directions: Vec<f64>) -> Result<Self, ModelError> {
        Self::with_signal(directions, Complex64::from_polar(2f64.sqrt(), FRAC_PI_2), 1.0)
    }

    pub fn with_signal(directions: Vec<f64>, signal_mean: Complex64, signal_variance: f64) -> Result<Self, ModelError> {
        if directions.is_empty() {
            return Err(ModelError::NoSources);
        }
        for &d in &directions {
            check_finite(d)?;
            if d.abs() >= FRAC_PI_2 {
                return Err(ModelError::AngleOutOfRange(d));
            }
        }
        if directions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::UnsortedSources);
        }
        if !(signal_variance > 0.0) || !signal_variance.is_finite() {
            return Err(ModelError::InvalidSignalVariance(signal_variance));
        }
        if !(signal_mean.re.is_finite() && signal_mean.im.is_finite()) {
            return Err(ModelError::NonFinite {
                what: "signal mean",
                value: signal_mean.norm(),
            });
        }
        Ok(SourceSet {
            directions,
            signal_mean,
            signal_variance,
        })
    }

    pub fn directions(&self) -> &[f64] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn signal_mean(&self) -> Complex64 {
        self.signal_mean
    }

    pub fn signal_variance(&self) -> f64 {
        self.signal_variance
    }

    /// `E{|s|²} = |mean|² + variance`.
    pub fn signal_power(&self) -> f64 {
        self.signal_mean.norm_sqr() + self.signal_variance
    }
}

/// Everything that determines one simulated dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    pub sources: SourceSet,
    pub snapshots: usize,
    pub snr_db: f64,
    /// Adjacent-element coupling strength `α_c` in dB.
    pub coupling_alpha_db: f64,
    /// Number of nonzero coupling coefficients including `c₀`.
    pub coupling_taps: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.geometry.num_antennas();
        if self.snapshots == 0 {
            return Err(ModelError::NoSnapshots);
        }
        if self.coupling_taps == 0 || self.coupling_taps > n {
            return Err(ModelError::InvalidTaps {
                taps: self.coupling_taps,
                antennas: n,
            });
        }
        if self.sources.len() >= n {
            return Err(ModelError::TooManySources {
                sources: self.sources.len(),
                antennas: n,
            });
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(ModelError::NonFinite {
                what: "SNR",
                value: self.snr_db,
            });
        }
        if !self.coupling_alpha_db.is_finite() {
            return Err(ModelError::NonFinite {
                what: "coupling strength",
                value: self.coupling_alpha_db,
            });
        }
        Ok(())
    }

    /// `σ_n² = P_s·10^{−SNR/10}` with `P_s` the per-source signal power.
    /// An SNR of `+∞` gives noise-free data.
    pub fn noise_variance(&self) -> f64 {
        self.sources.signal_power() * 10f64.powf(-self.snr_db / 10.0)
    }

    /// Draws coupling, signals and noise from the sub-streams of `seed`.
    pub fn simulate(&self) -> Result<SimulatedTrial, ModelError> {
        self.validate()?;
        let streams = TrialStreams::new(self.seed);
        let coupling = generate_coupling_vector(
            self.coupling_alpha_db,
            self.coupling_taps,
            self.geometry.num_antennas(),
            &mut streams.coupling(),
        )?;
        let sim = simulate_snapshots(self, &coupling, &mut streams.signal(), &mut streams.noise())?;
        Ok(SimulatedTrial { coupling, ..sim })
    }
}

/// Received data `Y` (N×M).
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrix {
    data: CMatrix,
}

impl SnapshotMatrix {
    pub fn new(data: CMatrix) -> Self {
        SnapshotMatrix { data }
    }

    pub fn data(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_inner(self) -> CMatrix {
        self.data
    }

    pub fn num_antennas(&self) -> usize {
        self.data.rows()
    }

    pub fn num_snapshots(&self) -> usize {
        self.data.cols()
    }

    pub fn snapshot(&self, m: usize) -> &[Complex64] {
        self.data.col(m)
    }
}

/// Output of the forward simulation.
#[derive(Clone, Debug)]
pub struct SimulatedTrial {
    pub snapshots: SnapshotMatrix,
    /// Source signals `S` (K×M).
    pub signals: CMatrix,
    pub coupling: CouplingVector,
    pub noise_variance: f64,
}

fn complex_gaussian<R: RngCore + ?Sized>(rng: &mut R, mean: Complex64, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    mean + Complex64::new(re * s, im * s)
}

/// `Y = C·A·S + noise`, with `S` i.i.d. `CN(mean, variance)` from
/// `signal_rng` and circular white noise of variance
/// [`Scenario::noise_variance`] from `noise_rng`.
pub fn simulate_snapshots<R: RngCore + ?Sized>(
    scenario: &Scenario,
    coupling: &CouplingVector,
    signal_rng: &mut R,
    noise_rng: &mut R,
) -> Result<SimulatedTrial, ModelError> {
    scenario.validate()?;
    let n = scenario.geometry.num_antennas();
    if coupling.len() != n {
        return Err(ModelError::CouplingLength {
            expected: n,
            got: coupling.len(),
        });
    }
    let k = scenario.sources.len();
    let m = scenario.snapshots;

    let steering: Vec<Vec<Complex64>> = scenario
        .sources
        .directions()
        .iter()
        .map(|&t| steering_vector(t, &scenario.geometry))
        .collect::<Result<_, _>>()?;
    let a = CMatrix::from_columns(&steering);
    let ca = coupling_matrix(coupling).matmul(&a);

    let mean = scenario.sources.signal_mean();
    let var = scenario.sources.signal_variance();
    let signals = CMatrix::from_fn(k, m, |_, _| complex_gaussian(signal_rng, mean, var));

    let noise_variance = scenario.noise_variance();
    let mut y = ca.matmul(&signals);
    if noise_variance > 0.0 {
        for v in y.as_mut_slice() {
            *v += complex_gaussian(noise_rng, Complex64::new(0.0, 0.0), noise_variance);
        }
    }
    Ok(SimulatedTrial {
        snapshots: SnapshotMatrix::new(y),
        signals,
        coupling: coupling.clone(),
        noise_variance,
    })
}

/// Independent random sub-streams of one trial seed.
///
/// Each component draws from its own ChaCha stream so it can be
/// regenerated without replaying the others.
#[derive(Clone, Copy, Debug)]
pub struct TrialStreams {
    seed: u64,
}

impl TrialStreams {
    const SIGNAL: u64 = 1;
    const NOISE: u64 = 2;
    const COUPLING: u64 = 3;
    const DIRECTIONS: u64 = 4;

    pub fn new(seed: u64) -> Self {
        TrialStreams { seed }
    }

    fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }

    pub fn signal(&self) -> ChaCha8Rng {
        self.stream(Self::SIGNAL)
    }

    pub fn noise(&self) -> ChaCha8Rng {
        self.stream(Self::NOISE)
    }

    pub fn coupling(&self) -> ChaCha8Rng {
        self.stream(Self::COUPLING)
    }

    pub fn directions(&self) -> ChaCha8Rng {
        self.stream(Self::DIRECTIONS)
    }
}

#[inline]
pub fn deg_to_rad(deg: f64) -> f64 {
    deg * PI / 180.0
}

#[inline]
pub fn rad_to_deg(rad: f64) -> f64 {
    rad * 180.0 / PI
}
