//! Direction grid and the block-structured off-grid dictionary.
//!
//! The dictionary is kept as `U` blocks of size `N×N`: `D_u = Q(ζ_u)` and
//! its θ-derivative `Ξ_u`. The flat `N×UN` matrix and the Kronecker
//! products `x ⊗ c`, `I_U ⊗ c`, `μ ⊗ I_N` are never formed; every product
//! with them is evaluated block by block.

use alloc::vec::Vec;

use num_complex::Complex64;

#[allow(unused_imports)]
use num_traits::Float;

use crate::array::{rearrangement_matrix, steering_derivative, steering_vector, ArrayGeometry, CouplingVector};
use crate::error::ModelError;
use crate::linalg::CMatrix;

/// Uniform direction grid `ζ` (radians).
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    step: f64,
}

impl Grid {
    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of the grid point closest to `theta`.
    pub fn nearest(&self, theta: f64) -> usize {
        let u = ((theta - self.points[0]) / self.step).round();
        (u.max(0.0) as usize).min(self.points.len() - 1)
    }
}

/// Inclusive lattice `lo, lo+δ, …` with `U = ⌊(hi−lo)/δ⌋ + 1` points.
pub fn build_grid(range_lo: f64, range_hi: f64, step: f64) -> Result<Grid, ModelError> {
    for (what, v) in [("grid start", range_lo), ("grid end", range_hi), ("grid step", step)] {
        if !v.is_finite() {
            return Err(ModelError::NonFinite { what, value: v });
        }
    }
    if range_lo > range_hi {
        return Err(ModelError::EmptyRange {
            lo: range_lo,
            hi: range_hi,
        });
    }
    let width = range_hi - range_lo;
    if !(step > 0.0) || (width > 0.0 && step > width) {
        return Err(ModelError::InvalidStep { step, width });
    }
    // Tolerate round-off when hi sits on the lattice.
    let count = (width / step + 1e-9).floor() as usize + 1;
    let points = (0..count).map(|u| range_lo + step * u as f64).collect();
    Ok(Grid { points, step })
}

/// Per-grid dictionary blocks `D_u = Q(ζ_u)` and `Ξ_u = ∂Q/∂θ |_{ζ_u}`.
#[derive(Clone, Debug)]
pub struct DictionaryBlocks {
    grid: Grid,
    geometry: ArrayGeometry,
    d_blocks: Vec<CMatrix>,
    xi_blocks: Vec<CMatrix>,
    // First columns of the blocks: a(ζ_u) and a'(ζ_u), one per column.
    steering: CMatrix,
    steering_deriv: CMatrix,
}

pub fn build_dictionary(grid: &Grid, geometry: &ArrayGeometry) -> Result<DictionaryBlocks, ModelError> {
    let mut d_blocks = Vec::with_capacity(grid.len());
    let mut xi_blocks = Vec::with_capacity(grid.len());
    let mut a_cols = Vec::with_capacity(grid.len());
    let mut da_cols = Vec::with_capacity(grid.len());
    for &z in grid.points() {
        let a = steering_vector(z, geometry)?;
        let da = steering_derivative(z, geometry)?;
        // Q is linear in the response vector, so Ω(ζ) = Q[a'(ζ)].
        d_blocks.push(rearrangement_matrix(&a));
        xi_blocks.push(rearrangement_matrix(&da));
        a_cols.push(a);
        da_cols.push(da);
    }
    Ok(DictionaryBlocks {
        grid: grid.clone(),
        geometry: *geometry,
        d_blocks,
        xi_blocks,
        steering: CMatrix::from_columns(&a_cols),
        steering_deriv: CMatrix::from_columns(&da_cols),
    })
}

impl DictionaryBlocks {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn d_blocks(&self) -> &[CMatrix] {
        &self.d_blocks
    }

    pub fn xi_blocks(&self) -> &[CMatrix] {
        &self.xi_blocks
    }

    /// Number of grid points `U`.
    pub fn num_grid(&self) -> usize {
        self.d_blocks.len()
    }

    /// Number of antennas `N`.
    pub fn num_antennas(&self) -> usize {
        self.geometry.num_antennas()
    }

    /// `[a(ζ_0), …, a(ζ_{U−1})]`, the classic steering dictionary.
    pub fn steering(&self) -> &CMatrix {
        &self.steering
    }

    /// `[a'(ζ_0), …, a'(ζ_{U−1})]`.
    pub fn steering_derivative(&self) -> &CMatrix {
        &self.steering_deriv
    }

    /// Off-grid response columns `f_u = a(ζ_u) + ν_u·a'(ζ_u)`, so that
    /// `Ψ_u(ν) = Q[f_u]`.
    pub fn responses(&self, nu: &OffGridVector) -> CMatrix {
        let mut f = self.steering.clone();
        for (u, &v) in nu.offsets().iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let d = self.steering_deriv.col(u);
            for (x, &dx) in f.col_mut(u).iter_mut().zip(d) {
                *x += dx * v;
            }
        }
        f
    }

    fn check_len(&self, len: usize) -> Result<(), ModelError> {
        if len == self.num_grid() {
            Ok(())
        } else {
            Err(ModelError::LengthMismatch {
                expected: self.num_grid(),
                got: len,
            })
        }
    }

    fn check_coupling(&self, c: &CouplingVector) -> Result<(), ModelError> {
        if c.len() == self.num_antennas() {
            Ok(())
        } else {
            Err(ModelError::CouplingLength {
                expected: self.num_antennas(),
                got: c.len(),
            })
        }
    }
}

/// Off-grid offsets `ν` (radians), each within `[−δ/2, δ/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OffGridVector {
    offsets: Vec<f64>,
}

impl OffGridVector {
    pub fn zeros(len: usize) -> Self {
        OffGridVector {
            offsets: alloc::vec![0.0; len],
        }
    }

    /// Checked construction; rejects entries outside `[−δ/2, δ/2]`.
    pub fn new(offsets: Vec<f64>, step: f64) -> Result<Self, ModelError> {
        let half = 0.5 * step;
        for &v in &offsets {
            if !v.is_finite() || v.abs() > half * (1.0 + 1e-12) {
                return Err(ModelError::NonFinite {
                    what: "off-grid offset within half a grid step",
                    value: v,
                });
            }
        }
        Ok(OffGridVector { offsets })
    }

    /// Projects each entry onto `[−δ/2, δ/2]`.
    pub fn clamped(raw: &[f64], step: f64) -> Self {
        let half = 0.5 * step;
        OffGridVector {
            offsets: raw
                .iter()
                .map(|&v| if v.is_nan() { 0.0 } else { v.clamp(-half, half) })
                .collect(),
        }
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// `Ψ_u(ν) = D_u + ν_u·Ξ_u` for every grid point.
pub fn psi_blocks(dict: &DictionaryBlocks, nu: &OffGridVector) -> Result<Vec<CMatrix>, ModelError> {
    dict.check_len(nu.len())?;
    Ok(dict
        .d_blocks
        .iter()
        .zip(&dict.xi_blocks)
        .zip(nu.offsets())
        .map(|((d, xi), &v)| if v == 0.0 { d.clone() } else { d + &xi.scaled(v) })
        .collect())
}

/// `𝔗(ν,c) = Ψ(ν)(I_U ⊗ c)`; column `u` is `Ψ_u(ν)·c`.
pub fn t_matrix(dict: &DictionaryBlocks, nu: &OffGridVector, c: &CouplingVector) -> Result<CMatrix, ModelError> {
    dict.check_len(nu.len())?;
    dict.check_coupling(c)?;
    let n = dict.num_antennas();
    let mut t = CMatrix::zeros(n, dict.num_grid());
    for (u, &v) in nu.offsets().iter().enumerate() {
        let mut col = dict.d_blocks[u].matvec(c.coeffs());
        if v != 0.0 {
            let dx = dict.xi_blocks[u].matvec(c.coeffs());
            for (x, d) in col.iter_mut().zip(dx) {
                *x += d * v;
            }
        }
        t.col_mut(u).copy_from_slice(&col);
    }
    Ok(t)
}

/// `𝔓(ν,μ_m) = Ψ(ν)(μ_m ⊗ I_N) = Σ_u μ_{u,m}·Ψ_u(ν)`.
pub fn p_matrix(dict: &DictionaryBlocks, nu: &OffGridVector, mu_m: &[Complex64]) -> Result<CMatrix, ModelError> {
    dict.check_len(nu.len())?;
    dict.check_len(mu_m.len())?;
    let n = dict.num_antennas();
    let mut p = CMatrix::zeros(n, n);
    for (u, (&w, &v)) in mu_m.iter().zip(nu.offsets()).enumerate() {
        if w == Complex64::new(0.0, 0.0) {
            continue;
        }
        let wx = w * v;
        let d = dict.d_blocks[u].as_slice();
        let xi = dict.xi_blocks[u].as_slice();
        for ((dst, &a), &b) in p.as_mut_slice().iter_mut().zip(d).zip(xi) {
            *dst += w * a + wx * b;
        }
    }
    Ok(p)
}
