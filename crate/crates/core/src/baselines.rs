//! Reference estimators: grid-search MUSIC and the two reduced SBL modes.

use alloc::vec::Vec;

use crate::array::{ArrayGeometry, SnapshotMatrix};
use crate::dictionary::{build_dictionary, DictionaryBlocks, Grid};
use crate::engine::{run_dfsmc, Hyperparams, Mode, RunOptions, RunOutput, Schedule};
use crate::error::{EstimatorError, ModelError};
use crate::linalg::{hermitian_eigen, CMatrix};
use crate::metrics::peak_indices;

/// Hermitian sample covariance `(1/M)·Y·Yᴴ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CovarianceEstimate {
    matrix: CMatrix,
}

impl CovarianceEstimate {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn scaled(&self, k: f64) -> Self {
        CovarianceEstimate {
            matrix: self.matrix.scaled(k),
        }
    }
}

pub fn sample_covariance(y: &SnapshotMatrix) -> CovarianceEstimate {
    let m = y.num_snapshots().max(1) as f64;
    let mut matrix = y.data().matmul_adjoint(y.data()).scaled(1.0 / m);
    matrix.symmetrize();
    CovarianceEstimate { matrix }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MusicResult {
    /// Pseudospectrum over the grid.
    pub spectrum: Vec<f64>,
    /// Picked directions in radians, ascending.
    pub picked: Vec<f64>,
}

/// MUSIC pseudospectrum `1/‖E_nᴴ a(ζ_u)‖²` on the dictionary grid.
pub fn music_spectrum(
    r: &CovarianceEstimate,
    grid: &Grid,
    geometry: &ArrayGeometry,
    num_sources: usize,
) -> Result<MusicResult, EstimatorError> {
    let n = geometry.num_antennas();
    if r.matrix.shape() != (n, n) {
        return Err(ModelError::LengthMismatch {
            expected: n,
            got: r.matrix.rows(),
        }
        .into());
    }
    if num_sources >= n {
        return Err(EstimatorError::MusicOrder {
            sources: num_sources,
            antennas: n,
        });
    }
    let eig = hermitian_eigen(&r.matrix)?;
    // Eigenvalues ascend, so the noise subspace is the leading columns.
    let noise_dim = n - num_sources;
    let noise = CMatrix::from_fn(n, noise_dim, |i, j| eig.vectors[(i, j)]);

    let dict = build_dictionary(grid, geometry)?;
    let proj = noise.adjoint_matmul(dict.steering());
    let spectrum: Vec<f64> = (0..grid.len())
        .map(|u| {
            let energy: f64 = proj.col(u).iter().map(|v| v.norm_sqr()).sum();
            1.0 / energy.max(f64::MIN_POSITIVE)
        })
        .collect();

    let mut picked: Vec<f64> = peak_indices(&spectrum, num_sources)?
        .into_iter()
        .map(|u| grid.points()[u])
        .collect();
    picked.sort_by(f64::total_cmp);
    Ok(MusicResult { spectrum, picked })
}

fn reduced_run(
    y: &SnapshotMatrix,
    dict: &DictionaryBlocks,
    hyper: &Hyperparams,
    schedule: &Schedule,
    num_sources: usize,
    mode: Mode,
) -> Result<RunOutput, EstimatorError> {
    let opts = RunOptions {
        hyper: *hyper,
        schedule: *schedule,
        mode,
        num_sources,
        stop_on_convergence: false,
    };
    run_dfsmc(y, dict, &opts)
}

/// Classic on-grid SBL: the engine with coupling and offsets frozen.
pub fn run_sbl_on_grid(
    y: &SnapshotMatrix,
    dict: &DictionaryBlocks,
    hyper: &Hyperparams,
    schedule: &Schedule,
    num_sources: usize,
) -> Result<RunOutput, EstimatorError> {
    reduced_run(y, dict, hyper, schedule, num_sources, Mode::OnGrid)
}

/// Off-grid SBL that assumes an uncoupled array.
pub fn run_sbl_off_grid(
    y: &SnapshotMatrix,
    dict: &DictionaryBlocks,
    hyper: &Hyperparams,
    schedule: &Schedule,
    num_sources: usize,
) -> Result<RunOutput, EstimatorError> {
    reduced_run(y, dict, hyper, schedule, num_sources, Mode::OffGridNoCoupling)
}
