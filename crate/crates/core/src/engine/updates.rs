//! The individual EM steps: posterior of the sparse matrix, likelihood
//! terms, and the closed-form maximizations of every other parameter.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use super::{Hyperparams, PosteriorState};
use crate::array::{CouplingVector, SnapshotMatrix};
use crate::dictionary::{p_matrix, psi_blocks, t_matrix, DictionaryBlocks, OffGridVector};
use crate::error::{EstimatorError, LinalgError};
use crate::linalg::{dot_conj, solve_psd_with_ridge, CMatrix, Cholesky, RMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Expected-likelihood terms of the current posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct LikelihoodTerms {
    /// `Tr{𝔗ᴴ𝔗 Σ_X}`.
    pub g1: f64,
    /// `‖y_m − 𝔗 μ_m‖²` per snapshot.
    pub g2: Vec<f64>,
    /// `Σ ϑ_n |c_n|²`.
    pub g3: f64,
}

impl LikelihoodTerms {
    pub fn g2_sum(&self) -> f64 {
        self.g2.iter().sum()
    }
}

/// Posterior of the sparse matrix for a fixed `𝔗`.
#[derive(Clone, Debug)]
pub struct Posterior {
    /// Means `μ_m` as columns (U×M).
    pub mu: CMatrix,
    /// Shared covariance `Σ_X` (U×U).
    pub sigma_x: CMatrix,
}

/// `Σ_X = [α 𝔗ᴴ𝔗 + diag ι]⁻¹`, `μ_m = α Σ_X 𝔗ᴴ y_m`.
///
/// Evaluated through the equivalent N×N system
/// `Σ_X = Γ − Γ𝔗ᴴ K⁻¹ 𝔗Γ`, `μ = Γ𝔗ᴴ K⁻¹ Y` with `Γ = diag ι⁻¹` and
/// `K = α⁻¹ I + 𝔗Γ𝔗ᴴ`.
pub fn posterior(t: &CMatrix, y: &CMatrix, alpha_n: f64, iota: &[f64]) -> Result<Posterior, LinalgError> {
    let (n, u) = t.shape();
    assert_eq!(iota.len(), u);
    assert_eq!(y.rows(), n);
    let gamma: Vec<f64> = iota.iter().map(|&v| 1.0 / v).collect();

    let mut b = t.clone();
    for (j, &g) in gamma.iter().enumerate() {
        for x in b.col_mut(j) {
            *x = x.scale(g);
        }
    }
    let mut k = b.matmul_adjoint(t);
    k.add_diag(&vec![Complex64::new(1.0 / alpha_n, 0.0); n]);
    k.symmetrize();
    let chol = Cholesky::new(&k)?;

    let w = chol.forward_substitute_matrix(&b);
    let z = chol.forward_substitute_matrix(y);
    let mu = w.adjoint_matmul(&z);

    let mut sigma = CMatrix::zeros(u, u);
    for j in 0..u {
        let wj = w.col(j);
        for i in j..u {
            let v = -dot_conj(w.col(i), wj);
            sigma[(i, j)] = v;
            sigma[(j, i)] = v.conj();
        }
        let d = gamma[j] + sigma[(j, j)].re;
        sigma[(j, j)] = Complex64::new(d, 0.0);
    }
    if !mu.is_finite() || !sigma.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    Ok(Posterior { mu, sigma_x: sigma })
}

/// E-step for the current coupling, offsets and precisions of `state`.
pub fn e_step(
    y: &SnapshotMatrix,
    dict: &DictionaryBlocks,
    state: &PosteriorState,
) -> Result<(CMatrix, CMatrix), EstimatorError> {
    let t = t_matrix(dict, &state.nu, &state.c)?;
    let p = posterior(&t, y.data(), state.alpha_n, &state.iota).map_err(|source| EstimatorError::Solver {
        stage: "posterior",
        iteration: 0,
        source,
    })?;
    Ok((p.mu, p.sigma_x))
}

/// `𝒢₁`, `𝒢₂,ₘ` for an explicit `𝔗`.
pub(crate) fn likelihood_terms_for(t: &CMatrix, y: &CMatrix, mu: &CMatrix, sigma_x: &CMatrix) -> (f64, Vec<f64>) {
    // Tr{𝔗ᴴ𝔗Σ} = Tr{𝔗Σ𝔗ᴴ}
    let ts = t.matmul(sigma_x);
    let g1 = ts
        .as_slice()
        .iter()
        .zip(t.as_slice())
        .map(|(a, b)| (a * b.conj()).re)
        .sum::<f64>()
        .max(0.0);
    let fit = t.matmul(mu);
    let g2 = (0..y.cols())
        .map(|m| y.col(m).iter().zip(fit.col(m)).map(|(a, b)| (a - b).norm_sqr()).sum())
        .collect();
    (g1, g2)
}

pub fn compute_likelihood_terms(
    y: &SnapshotMatrix,
    dict: &DictionaryBlocks,
    state: &PosteriorState,
) -> Result<LikelihoodTerms, EstimatorError> {
    let t = t_matrix(dict, &state.nu, &state.c)?;
    let (g1, g2) = likelihood_terms_for(&t, y.data(), &state.mu, &state.sigma_x);
    let g3 = state
        .vartheta
        .iter()
        .zip(state.c.coeffs())
        .map(|(v, c)| v * c.norm_sqr())
        .sum();
    Ok(LikelihoodTerms { g1, g2, g3 })
}

/// Noise precision: the iterative form
/// `(MN − 1 − α·Σ𝒢₂)/(M𝒢₁ + b)` when it is positive, otherwise the
/// closed form `(MN + a − 1)/(M𝒢₁ + Σ𝒢₂ + b)`.
pub fn update_noise_precision(
    terms: &LikelihoodTerms,
    num_snapshots: usize,
    num_antennas: usize,
    hyper: &Hyperparams,
    previous_alpha: f64,
) -> f64 {
    let m = num_snapshots as f64;
    let mn = m * num_antennas as f64;
    let g2 = terms.g2_sum();
    let iterative = (mn - 1.0 - previous_alpha * g2) / (m * terms.g1 + hyper.noise_rate);
    if iterative > 0.0 && iterative.is_finite() {
        iterative
    } else {
        (mn + hyper.noise_shape - 1.0) / (m * terms.g1 + g2 + hyper.noise_rate)
    }
}

/// Signal precisions, per entry: the iterative form
/// `(M − 1 − ι_u Σ_m|μ_{u,m}|²)/(d + MΣ_{u,u})` when positive, otherwise
/// `(M + c − 1)/(d + MΣ_{u,u} + Σ_m|μ_{u,m}|²)`. The previous precisions
/// are `state.iota`.
pub fn update_signal_precision(state: &PosteriorState, hyper: &Hyperparams) -> Vec<f64> {
    let (u_len, m_len) = state.mu.shape();
    let m = m_len as f64;
    let mut energy = vec![0.0; u_len];
    for j in 0..m_len {
        for (e, x) in energy.iter_mut().zip(state.mu.col(j)) {
            *e += x.norm_sqr();
        }
    }
    (0..u_len)
        .map(|u| {
            let s = state.sigma_x[(u, u)].re;
            let denom = hyper.signal_rate + m * s;
            let iterative = (m - 1.0 - state.iota[u] * energy[u]) / denom;
            if iterative > 0.0 && iterative.is_finite() {
                iterative
            } else {
                (m + hyper.signal_shape - 1.0) / (denom + energy[u])
            }
        })
        .collect()
}

/// `ϑ_n = 1/(f + |c_n|²)`.
pub fn update_coupling_precision(state: &PosteriorState, hyper: &Hyperparams) -> Vec<f64> {
    state
        .c
        .coeffs()
        .iter()
        .map(|c| 1.0 / (hyper.coupling_rate + c.norm_sqr()))
        .collect()
}

/// Normal equations `H c = z` of the coupling update.
#[derive(Clone, Debug)]
pub struct CouplingSystem {
    pub h: CMatrix,
    pub z: Vec<Complex64>,
}

/// Index pairs `l` with `Q[v]_{i,n}` containing `v_l`.
#[inline]
fn lemma_support(i: usize, n: usize, len: usize) -> impl Iterator<Item = usize> {
    let first = (i + n < len).then_some(i + n);
    let second = (n >= 1 && n <= i).then(|| i - n);
    first.into_iter().chain(second)
}

/// `Σ Q[v]ᴴ Q[v]` from the second moments `k[l][l'] = Σ conj(v_l)·v_l'`.
fn lemma_gram(k: &CMatrix) -> CMatrix {
    let n = k.rows();
    let mut out = CMatrix::zeros(n, n);
    for col in 0..n {
        for row in 0..n {
            let mut s = ZERO;
            for i in 0..n {
                for l in lemma_support(i, row, n) {
                    for lp in lemma_support(i, col, n) {
                        s += k[(l, lp)];
                    }
                }
            }
            out[(row, col)] = s;
        }
    }
    out
}

impl CouplingSystem {
    /// Assembles `H` and `z` through the rearrangement structure
    /// `Ψ_u(ν) = Q[f_u]` and `𝔓(ν,μ_m) = Q[F μ_m]`, which reduces the
    /// block double sum `Σ_p Σ_k Ψ_pᴴΨ_k Σ_{X,k,p}` to the N×N second
    /// moment `F Σ_X Fᴴ`.
    pub fn assemble(
        y: &SnapshotMatrix,
        dict: &DictionaryBlocks,
        state: &PosteriorState,
    ) -> Result<Self, EstimatorError> {
        let n = dict.num_antennas();
        let m = y.num_snapshots() as f64;
        let f = dict.responses(&state.nu);
        let g = f.matmul(&state.mu);
        let snap_moment = g.matmul_adjoint(&g);
        let cov_moment = f.matmul(&state.sigma_x).matmul_adjoint(&f);
        // k[l][l'] = Σ conj(v_l) v_l' is the transpose of V Vᴴ.
        let k = CMatrix::from_fn(n, n, |l, lp| snap_moment[(lp, l)] + cov_moment[(lp, l)].scale(m));
        let mut h = lemma_gram(&k).scaled(state.alpha_n);
        h.add_diag(
            &state
                .vartheta
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect::<Vec<_>>(),
        );
        h.symmetrize();

        let yg = y.data().matmul_adjoint(&g);
        let z = (0..n)
            .map(|col| {
                let mut s = ZERO;
                for i in 0..n {
                    for l in lemma_support(i, col, n) {
                        s += yg[(i, l)];
                    }
                }
                s.scale(state.alpha_n)
            })
            .collect();
        Ok(CouplingSystem { h, z })
    }

    /// Reference assembly straight from the block definitions:
    /// `H = α Σ_m 𝔓ᴴ𝔓 + αM (Σ_p Σ_k Ψ_pᴴΨ_k Σ_{X,k,p})ᴴ + diag ϑ`,
    /// `z = α Σ_m 𝔓ᴴ y_m`.
    pub fn assemble_blockwise(
        y: &SnapshotMatrix,
        dict: &DictionaryBlocks,
        state: &PosteriorState,
    ) -> Result<Self, EstimatorError> {
        let n = dict.num_antennas();
        let u_len = dict.num_grid();
        let m_len = y.num_snapshots();
        let alpha = state.alpha_n;
        let psi = psi_blocks(dict, &state.nu)?;

        let mut h = CMatrix::zeros(n, n);
        let mut z = vec![ZERO; n];
        for mm in 0..m_len {
            let mu_m: Vec<Complex64> = (0..u_len).map(|u| state.mu[(u, mm)]).collect();
            let p = p_matrix(dict, &state.nu, &mu_m)?;
            h = &h + &p.adjoint_matmul(&p).scaled(alpha);
            for (zi, v) in z.iter_mut().zip(p.adjoint_matvec(y.snapshot(mm))) {
                *zi += v.scale(alpha);
            }
        }
        // W_p = Σ_k Σ_{k,p} Ψ_k, then Σ_p Ψ_pᴴ W_p.
        let mut double_sum = CMatrix::zeros(n, n);
        for p in 0..u_len {
            let mut w = CMatrix::zeros(n, n);
            for (k, block) in psi.iter().enumerate() {
                let s = state.sigma_x[(k, p)];
                for (dst, &b) in w.as_mut_slice().iter_mut().zip(block.as_slice()) {
                    *dst += b * s;
                }
            }
            double_sum = &double_sum + &psi[p].adjoint_matmul(&w);
        }
        h = &h + &double_sum.adjoint().scaled(alpha * m_len as f64);
        h.add_diag(
            &state
                .vartheta
                .iter()
                .map(|&v| Complex64::new(v, 0.0))
                .collect::<Vec<_>>(),
        );
        Ok(CouplingSystem { h, z })
    }
}

/// Result of a ridge-guarded linear update.
#[derive(Clone, Debug)]
pub struct SolveReport {
    /// Ridge added to the diagonal, zero when none was needed.
    pub ridge: f64,
    /// Relative residual of the system actually solved.
    pub relative_residual: f64,
}

/// `ĉ = H⁻¹ z`. No renormalization of `ĉ₀` is applied.
pub fn update_coupling_vector(
    y: &SnapshotMatrix,
    dict: &DictionaryBlocks,
    state: &PosteriorState,
) -> Result<(CouplingVector, SolveReport), EstimatorError> {
    let sys = CouplingSystem::assemble(y, dict, state)?;
    let sol = solve_psd_with_ridge(&sys.h, &sys.z).map_err(|source| EstimatorError::Solver {
        stage: "coupling update",
        iteration: 0,
        source,
    })?;
    Ok((
        CouplingVector::new(sol.x),
        SolveReport {
            ridge: sol.ridge,
            relative_residual: sol.relative_residual,
        },
    ))
}

/// Real normal equations `G ν = z` of the off-grid update.
#[derive(Clone, Debug)]
pub struct OffGridSystem {
    pub g: RMatrix,
    pub z: Vec<f64>,
}

impl OffGridSystem {
    /// With `d_u = D_u c` and `ξ_u = Ξ_u c`:
    /// `G[u][k] = Re{ξ_uᴴξ_k (M Σ_{k,u} + Σ_m conj(μ_{u,m}) μ_{k,m})}` and
    /// `z_u = Re{ξ_uᴴ Σ_m conj(μ_{u,m})(y_m − Σ_k μ_{k,m} d_k)} − M Re{ξ_uᴴ Σ_k d_k Σ_{k,u}}`.
    pub fn assemble(
        y: &SnapshotMatrix,
        dict: &DictionaryBlocks,
        state: &PosteriorState,
    ) -> Result<Self, EstimatorError> {
        let u_len = dict.num_grid();
        let m = y.num_snapshots() as f64;
        let on_grid = t_matrix(dict, &OffGridVector::zeros(u_len), &state.c)?;
        let mut xi = CMatrix::zeros(dict.num_antennas(), u_len);
        for (u, block) in dict.xi_blocks().iter().enumerate() {
            xi.col_mut(u).copy_from_slice(&block.matvec(state.c.coeffs()));
        }

        let e = xi.adjoint_matmul(&xi);
        let mm = state.mu.matmul_adjoint(&state.mu);
        let g = RMatrix::from_fn(u_len, u_len, |u, k| {
            let phi = state.sigma_x[(k, u)].scale(m) + mm[(u, k)].conj();
            (e[(u, k)] * phi).re
        });

        let residual = y.data() - &on_grid.matmul(&state.mu);
        let p1 = residual.matmul_adjoint(&state.mu);
        let ds = on_grid.matmul(&state.sigma_x);
        let z = (0..u_len)
            .map(|u| dot_conj(xi.col(u), p1.col(u)).re - m * dot_conj(xi.col(u), ds.col(u)).re)
            .collect();
        Ok(OffGridSystem { g, z })
    }
}

/// Outcome of the off-grid update.
#[derive(Clone, Debug)]
pub struct OffGridUpdate {
    pub nu: OffGridVector,
    /// Solution before projection onto `[−δ/2, δ/2]`.
    pub unclamped: Vec<f64>,
    pub report: SolveReport,
}

/// `ν̂ = G⁻¹ z`, projected onto `[−δ/2, δ/2]`.
pub fn update_offgrid(
    y: &SnapshotMatrix,
    dict: &DictionaryBlocks,
    state: &PosteriorState,
) -> Result<OffGridUpdate, EstimatorError> {
    let sys = OffGridSystem::assemble(y, dict, state)?;
    let sol = solve_psd_with_ridge(&sys.g, &sys.z).map_err(|source| EstimatorError::Solver {
        stage: "off-grid update",
        iteration: 0,
        source,
    })?;
    Ok(OffGridUpdate {
        nu: OffGridVector::clamped(&sol.x, dict.grid().step()),
        unclamped: sol.x,
        report: SolveReport {
            ridge: sol.ridge,
            relative_residual: sol.relative_residual,
        },
    })
}

/// `P_X,u = 1/ι_u`.
pub fn spectrum(iota: &[f64]) -> Vec<f64> {
    iota.iter().map(|&v| 1.0 / v).collect()
}
