#![allow(dead_code)]

use dfsmc_core::dictionary::{psi_blocks, t_matrix};
use dfsmc_core::engine::posterior;
use dfsmc_core::linalg::CMatrix;
use dfsmc_core::{
    build_dictionary, build_grid, deg_to_rad, ArrayGeometry, CouplingVector, DictionaryBlocks, OffGridVector,
    PosteriorState, SnapshotMatrix,
};
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal, Uniform};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn cvec(rng: &mut ChaCha8Rng, len: usize) -> Vec<Complex64> {
    (0..len).map(|_| cgauss(rng)).collect()
}

pub fn cmat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| cgauss(rng))
}

/// Small random problem: dictionary, data, and a posterior state with
/// random coupling, offsets and precisions whose mean and covariance
/// come from a genuine E-step.
pub struct Instance {
    pub dict: DictionaryBlocks,
    pub y: SnapshotMatrix,
    pub state: PosteriorState,
}

pub fn instance(seed: u64, n: usize, u_half: usize, m: usize) -> Instance {
    let mut r = rng(seed);
    let geom = ArrayGeometry::half_wavelength(n).unwrap();
    let step = deg_to_rad(5.0);
    let grid = build_grid(-step * u_half as f64, step * u_half as f64, step).unwrap();
    let dict = build_dictionary(&grid, &geom).unwrap();
    let u = dict.num_grid();

    let half = Uniform::new_inclusive(-0.5 * step, 0.5 * step).unwrap();
    let nu = OffGridVector::new((0..u).map(|_| half.sample(&mut r)).collect(), step).unwrap();
    let mut coeffs = cvec(&mut r, n);
    coeffs[0] = Complex64::new(1.0, 0.0);
    for c in coeffs.iter_mut().skip(1) {
        *c *= 0.3;
    }
    let c = CouplingVector::new(coeffs);
    let prec = Uniform::new(0.5, 4.0).unwrap();
    let iota: Vec<f64> = (0..u).map(|_| prec.sample(&mut r)).collect();
    let alpha_n = 20.0;
    let y = SnapshotMatrix::new(cmat(&mut r, n, m));

    let t = t_matrix(&dict, &nu, &c).unwrap();
    let post = posterior(&t, y.data(), alpha_n, &iota).unwrap();
    let vartheta: Vec<f64> = (0..n).map(|_| prec.sample(&mut r)).collect();
    let state = PosteriorState {
        mu: post.mu,
        sigma_x: post.sigma_x,
        alpha_n,
        iota,
        vartheta,
        c,
        nu,
    };
    Instance { dict, y, state }
}

/// Explicit `Ψ(ν) = [Ψ_0, …, Ψ_{U−1}]` (N×NU).
pub fn psi_wide(dict: &DictionaryBlocks, nu: &OffGridVector) -> CMatrix {
    let blocks = psi_blocks(dict, nu).unwrap();
    let n = dict.num_antennas();
    CMatrix::from_fn(n, n * blocks.len(), |i, j| blocks[j / n][(i, j % n)])
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn column(v: &[Complex64]) -> CMatrix {
    CMatrix::from_columns(&[v.to_vec()])
}

pub fn rel_err(a: &CMatrix, b: &CMatrix) -> f64 {
    (a - b).frobenius_norm() / b.frobenius_norm().max(f64::MIN_POSITIVE)
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
