//! Expectation-maximization engine for sparse Bayesian direction finding
//! with unknown mutual coupling and off-grid directions.
//!
//! Each iteration recomputes the posterior of the sparse signal matrix
//! and the noise and signal precisions. After a warm-up the engine
//! alternates fixed-length phases that re-estimate the coupling vector
//! (with its precisions) and the off-grid offsets. The phase counters
//! deliberately keep an off-by-one: every phase performs
//! `phase_length − 1` updates, and the iteration that closes an off-grid
//! phase also opens the next coupling phase.

mod updates;

use alloc::vec;
use alloc::vec::Vec;

use crate::array::{CouplingVector, SnapshotMatrix};
use crate::dictionary::{t_matrix, DictionaryBlocks, OffGridVector};
use crate::error::{EstimatorError, ModelError};
use crate::linalg::CMatrix;
use crate::metrics::{pick_peaks, SpectrumResult};

pub use updates::{
    compute_likelihood_terms, e_step, posterior, spectrum, update_coupling_precision, update_coupling_vector,
    update_noise_precision, update_offgrid, update_signal_precision, CouplingSystem, LikelihoodTerms, OffGridSystem,
    OffGridUpdate, Posterior, SolveReport,
};

/// Gamma shape/rate pairs for the noise, signal and coupling precisions.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Hyperparams {
    pub noise_shape: f64,
    pub noise_rate: f64,
    pub signal_shape: f64,
    pub signal_rate: f64,
    pub coupling_shape: f64,
    pub coupling_rate: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        let rate = 1e-3;
        Hyperparams {
            noise_shape: 1.0 + rate,
            noise_rate: rate,
            signal_shape: 1.0 + rate,
            signal_rate: rate,
            coupling_shape: 1.0 + rate,
            coupling_rate: rate,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        for (name, value) in [
            ("noise_shape", self.noise_shape),
            ("noise_rate", self.noise_rate),
            ("signal_shape", self.signal_shape),
            ("signal_rate", self.signal_rate),
            ("coupling_shape", self.coupling_shape),
            ("coupling_rate", self.coupling_rate),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(EstimatorError::InvalidHyperparameter { name, value });
            }
        }
        Ok(())
    }
}

/// Iteration budget: `total` iterations, the first `warmup − 1` of which
/// only refine the signal posterior, then alternating phases.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Schedule {
    pub total: usize,
    pub warmup: usize,
    pub phase_length: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            total: 1000,
            warmup: 300,
            phase_length: 50,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<(), EstimatorError> {
        if self.total == 0 || self.warmup == 0 {
            return Err(EstimatorError::InvalidSchedule("iteration counts must be positive"));
        }
        if self.warmup >= self.total {
            return Err(EstimatorError::InvalidSchedule("warm-up must be shorter than the run"));
        }
        if self.phase_length < 2 {
            return Err(EstimatorError::InvalidSchedule("phase length must be at least 2"));
        }
        Ok(())
    }
}

/// Which parameters the engine re-estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Coupling and off-grid offsets.
    Full,
    /// Classic on-grid SBL: `c = e₀`, `ν = 0` throughout.
    OnGrid,
    /// Off-grid SBL that ignores coupling: `c = e₀` throughout.
    OffGridNoCoupling,
}

/// Complete mutable state of one EM run.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorState {
    /// Posterior means `μ_m` as columns (U×M).
    pub mu: CMatrix,
    /// Posterior covariance `Σ_X` (U×U).
    pub sigma_x: CMatrix,
    /// Noise precision `α_n`.
    pub alpha_n: f64,
    /// Signal precisions `ι`.
    pub iota: Vec<f64>,
    /// Coupling precisions `ϑ`.
    pub vartheta: Vec<f64>,
    pub c: CouplingVector,
    pub nu: OffGridVector,
}

/// Assumed SNR behind the initial noise precision.
const INITIAL_SNR: f64 = 100.0;

impl PosteriorState {
    /// `c = ϑ = e₀`, `ν = 0`, `ι = 1` and `α_n = NM/(0.01·‖Y‖²_F)`.
    pub fn initial(y: &SnapshotMatrix, dict: &DictionaryBlocks) -> Self {
        let n = dict.num_antennas();
        let u = dict.num_grid();
        let m = y.num_snapshots();
        let energy: f64 = y.data().as_slice().iter().map(|v| v.norm_sqr()).sum();
        let alpha_n = if energy > 0.0 {
            INITIAL_SNR * (n * m) as f64 / energy
        } else {
            1.0
        };
        let mut vartheta = vec![0.0; n];
        vartheta[0] = 1.0;
        PosteriorState {
            mu: CMatrix::zeros(u, m),
            sigma_x: CMatrix::zeros(u, u),
            alpha_n,
            iota: vec![1.0; u],
            vartheta,
            c: CouplingVector::uncoupled(n),
            nu: OffGridVector::zeros(u),
        }
    }
}

/// Parameters re-estimated in one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Posterior, noise and signal precisions only.
    Signal,
    Coupling,
    OffGrid,
    /// Off-grid update closing its phase, then the first coupling update.
    OffGridThenCoupling,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Signal => "signal",
            Phase::Coupling => "coupling",
            Phase::OffGrid => "offgrid",
            Phase::OffGridThenCoupling => "offgrid+coupling",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    /// One-based iteration counter.
    pub iteration: usize,
    pub phase: Phase,
    pub alpha_n: f64,
    /// `max_u |P_X,u − P_X,u^{prev}|`.
    pub spectrum_change: f64,
    pub coupling_residual: Option<f64>,
    pub offgrid_residual: Option<f64>,
}

/// A ridge had to be added to keep a normal-equation solve stable.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeEvent {
    pub iteration: usize,
    pub system: &'static str,
    pub ridge: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trace {
    pub records: Vec<IterationRecord>,
    pub ridge_events: Vec<RidgeEvent>,
    pub initial_alpha_n: f64,
    /// Iteration at which the optional convergence stop fired.
    pub stopped_early_at: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    pub hyper: Hyperparams,
    pub schedule: Schedule,
    pub mode: Mode,
    /// Number of sources `K` to pick from the spectrum.
    pub num_sources: usize,
    /// Stop once the spectrum changes by less than `1e-8` for 10
    /// consecutive iterations. Off by default.
    pub stop_on_convergence: bool,
}

impl RunOptions {
    pub fn new(mode: Mode, num_sources: usize) -> Self {
        RunOptions {
            hyper: Hyperparams::default(),
            schedule: Schedule::default(),
            mode,
            num_sources,
            stop_on_convergence: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub spectrum: SpectrumResult,
    pub state: PosteriorState,
    pub trace: Trace,
}

/// What an observer sees after each iteration.
pub struct IterationView<'a> {
    pub iteration: usize,
    pub phase: Phase,
    /// `𝔗` used by this iteration's posterior.
    pub t: &'a CMatrix,
    /// Noise precision used by this iteration's posterior.
    pub alpha_used: f64,
    /// Signal precisions used by this iteration's posterior.
    pub iota_used: &'a [f64],
    /// State after every update of the iteration.
    pub state: &'a PosteriorState,
    pub coupling_report: Option<&'a SolveReport>,
    pub offgrid: Option<&'a OffGridUpdate>,
}

const CONVERGENCE_TOL: f64 = 1e-8;
const CONVERGENCE_WINDOW: usize = 10;

/// Runs the estimator on `y` for the configured number of iterations.
pub fn run_dfsmc(y: &SnapshotMatrix, dict: &DictionaryBlocks, opts: &RunOptions) -> Result<RunOutput, EstimatorError> {
    run_dfsmc_observed(y, dict, opts, |_| {})
}

/// [`run_dfsmc`] with a callback after every iteration.
pub fn run_dfsmc_observed<F>(
    y: &SnapshotMatrix,
    dict: &DictionaryBlocks,
    opts: &RunOptions,
    mut observe: F,
) -> Result<RunOutput, EstimatorError>
where
    F: FnMut(&IterationView<'_>),
{
    opts.hyper.validate()?;
    opts.schedule.validate()?;
    if y.num_antennas() != dict.num_antennas() {
        return Err(ModelError::LengthMismatch {
            expected: dict.num_antennas(),
            got: y.num_antennas(),
        }
        .into());
    }
    if y.num_snapshots() == 0 {
        return Err(ModelError::NoSnapshots.into());
    }
    if opts.num_sources > dict.num_grid() {
        return Err(EstimatorError::TooManyPeaks {
            requested: opts.num_sources,
            available: dict.num_grid(),
        });
    }

    let hyper = &opts.hyper;
    let schedule = &opts.schedule;
    let n = dict.num_antennas();
    let m = y.num_snapshots();
    let update_offsets = opts.mode != Mode::OnGrid;
    let update_coupling = opts.mode == Mode::Full;

    let mut state = PosteriorState::initial(y, dict);
    let mut trace = Trace {
        initial_alpha_n: state.alpha_n,
        ..Trace::default()
    };
    let mut t = t_matrix(dict, &state.nu, &state.c)?;
    let mut power = spectrum(&state.iota);
    let mut quiet_iterations = 0;

    // Phase flags: `coupling_next` plays s_method = 0, `phase_counter`
    // plays i_method.
    let mut coupling_next = true;
    let mut phase_counter = 1usize;

    for iteration in 1..=schedule.total {
        let solver_err = |stage: &'static str| {
            move |source| EstimatorError::Solver {
                stage,
                iteration,
                source,
            }
        };
        let alpha_used = state.alpha_n;
        let iota_used = state.iota.clone();

        let post = posterior(&t, y.data(), state.alpha_n, &state.iota).map_err(solver_err("posterior"))?;
        state.mu = post.mu;
        state.sigma_x = post.sigma_x;

        let (g1, g2) = updates::likelihood_terms_for(&t, y.data(), &state.mu, &state.sigma_x);
        let terms = LikelihoodTerms { g1, g2, g3: 0.0 };
        state.alpha_n = update_noise_precision(&terms, m, n, hyper, state.alpha_n);
        state.iota = update_signal_precision(&state, hyper);

        let new_power = spectrum(&state.iota);
        let change = new_power
            .iter()
            .zip(&power)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        power = new_power;

        let mut ran_offgrid = false;
        let mut ran_coupling = false;
        let mut offgrid = None;
        let mut coupling_report = None;

        if iteration >= schedule.warmup && !coupling_next {
            phase_counter += 1;
            if phase_counter == schedule.phase_length {
                phase_counter = 1;
                coupling_next = true;
            }
            if update_offsets {
                let upd = update_offgrid(y, dict, &state).map_err(|e| with_iteration(e, iteration))?;
                if upd.report.ridge > 0.0 {
                    trace.ridge_events.push(RidgeEvent {
                        iteration,
                        system: "offgrid",
                        ridge: upd.report.ridge,
                    });
                }
                state.nu = upd.nu.clone();
                offgrid = Some(upd);
                ran_offgrid = true;
            }
        }

        if iteration >= schedule.warmup && coupling_next {
            phase_counter += 1;
            if phase_counter == schedule.phase_length {
                phase_counter = 1;
                coupling_next = false;
            }
            if update_coupling {
                state.vartheta = update_coupling_precision(&state, hyper);
                let (c, report) = update_coupling_vector(y, dict, &state).map_err(|e| with_iteration(e, iteration))?;
                if report.ridge > 0.0 {
                    trace.ridge_events.push(RidgeEvent {
                        iteration,
                        system: "coupling",
                        ridge: report.ridge,
                    });
                }
                state.c = c;
                coupling_report = Some(report);
                ran_coupling = true;
            }
        }

        let phase = match (ran_offgrid, ran_coupling) {
            (false, false) => Phase::Signal,
            (false, true) => Phase::Coupling,
            (true, false) => Phase::OffGrid,
            (true, true) => Phase::OffGridThenCoupling,
        };

        observe(&IterationView {
            iteration,
            phase,
            t: &t,
            alpha_used,
            iota_used: &iota_used,
            state: &state,
            coupling_report: coupling_report.as_ref(),
            offgrid: offgrid.as_ref(),
        });

        trace.records.push(IterationRecord {
            iteration,
            phase,
            alpha_n: state.alpha_n,
            spectrum_change: change,
            coupling_residual: coupling_report.map(|r| r.relative_residual),
            offgrid_residual: offgrid.as_ref().map(|o| o.report.relative_residual),
        });

        if ran_offgrid || ran_coupling {
            t = t_matrix(dict, &state.nu, &state.c)?;
        }

        if opts.stop_on_convergence {
            quiet_iterations = if change < CONVERGENCE_TOL {
                quiet_iterations + 1
            } else {
                0
            };
            if quiet_iterations >= CONVERGENCE_WINDOW {
                trace.stopped_early_at = Some(iteration);
                break;
            }
        }
    }

    let spectrum = pick_peaks(&power, state.nu.offsets(), dict.grid(), opts.num_sources)?;
    Ok(RunOutput { spectrum, state, trace })
}

fn with_iteration(err: EstimatorError, iteration: usize) -> EstimatorError {
    match err {
        EstimatorError::Solver { stage, source, .. } => EstimatorError::Solver {
            stage,
            iteration,
            source,
        },
        other => other,
    }
}
