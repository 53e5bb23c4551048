//! Direction-of-arrival estimation for a uniform linear array whose
//! antennas are mutually coupled through an unknown symmetric Toeplitz
//! matrix, with sources that fall between the points of the search grid.
//!
//! The estimator is sparse Bayesian learning solved by expectation
//! maximization. It jointly refines the sparse signal posterior, the
//! coupling vector and a first-order off-grid correction per grid point.
//! MUSIC and two reduced SBL modes are provided as baselines.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod array;
pub mod baselines;
pub mod dictionary;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod metrics;

pub use array::{
    coupling_matrix, deg_to_rad, generate_coupling_vector, q_matrix, rad_to_deg, rearrangement_matrix,
    simulate_snapshots, steering_derivative, steering_vector, ArrayGeometry, CouplingVector, Scenario, SimulatedTrial,
    SnapshotMatrix, SourceSet, TrialStreams,
};
pub use baselines::{
    music_spectrum, run_sbl_off_grid, run_sbl_on_grid, sample_covariance, CovarianceEstimate, MusicResult,
};
pub use dictionary::{build_dictionary, build_grid, DictionaryBlocks, Grid, OffGridVector};
pub use engine::{run_dfsmc, run_dfsmc_observed, Hyperparams, Mode, PosteriorState, RunOptions, RunOutput, Schedule};
pub use error::{EstimatorError, LinalgError, ModelError};
pub use metrics::{error_e1, error_e2, pick_peaks, SpectrumResult};
