//! Monte Carlo driver: simulates every (sweep point, trial) pair and runs
//! each configured estimator on the same data.

use std::time::Instant;

use dfsmc_core::engine::Trace;
use dfsmc_core::{
    build_dictionary, deg_to_rad, error_e1, error_e2, metrics::median, music_spectrum, rad_to_deg, run_dfsmc,
    sample_covariance, DictionaryBlocks, EstimatorError, Grid, Mode, ModelError, RunOptions, Scenario, SnapshotMatrix,
    SourceSet, SpectrumResult, TrialStreams,
};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{separation_steps, ConfigError, ExperimentConfig, Method, SweepAxis};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("trial {trial}{}: simulation failed: {source}", point_label(*.point))]
    Simulation {
        point: Option<f64>,
        trial: usize,
        #[source]
        source: ModelError,
    },
    #[error("trial {trial}{}, method {method}: {source}", point_label(*.point))]
    Estimator {
        point: Option<f64>,
        trial: usize,
        method: Method,
        #[source]
        source: EstimatorError,
    },
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn point_label(point: Option<f64>) -> String {
    point.map(|v| format!(" at sweep value {v}")).unwrap_or_default()
}

/// Outcome of one method on one trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialReport {
    /// Index into the sweep values (0 without a sweep).
    pub point: usize,
    pub sweep_value: Option<f64>,
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub truth_deg: Vec<f64>,
    pub picked_deg: Vec<f64>,
    pub e1_deg: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct TrialOutcome {
    pub report: TrialReport,
    pub spectrum: SpectrumResult,
    /// EM trace, kept only when the configuration asks for traces.
    pub trace: Option<Trace>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: Method,
    pub label: &'static str,
    /// Pooled RMSE over all trials, per sweep point.
    pub e2_deg: Vec<f64>,
    pub median_e1_deg: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub axis: Option<SweepAxis>,
    pub values: Vec<f64>,
    pub trials: usize,
    pub methods: Vec<MethodSummary>,
}

impl SweepReport {
    pub fn method(&self, method: Method) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == method)
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    /// Ordered by sweep point, then trial, then configured method order.
    pub outcomes: Vec<TrialOutcome>,
    pub sweep: SweepReport,
}

/// Seed of trial `p`; identical at every sweep point so that the points
/// differ only in the swept parameter.
pub fn trial_seed(master: u64, trial: usize) -> u64 {
    master ^ trial as u64
}

/// Everything shared read-only by all trials.
pub struct Setup {
    pub config: ExperimentConfig,
    pub dict: DictionaryBlocks,
}

impl Setup {
    pub fn new(config: &ExperimentConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let grid = config.grid.build()?;
        let geometry = config.geometry()?;
        let dict = build_dictionary(&grid, &geometry).map_err(|e| ConfigError::invalid("grid", e.to_string()))?;
        Ok(Setup {
            config: config.clone(),
            dict,
        })
    }

    pub fn grid(&self) -> &Grid {
        self.dict.grid()
    }

    /// Ground-truth directions (radians, ascending) of trial `seed`.
    pub fn truth(&self, seed: u64) -> Vec<f64> {
        let s = &self.config.scenario;
        let mut dirs: Vec<f64> = if s.random_directions {
            random_directions(
                self.grid(),
                s.directions_deg.len(),
                separation_steps(s.min_separation_deg, self.config.grid.step_deg),
                &mut TrialStreams::new(seed).directions(),
            )
        } else {
            s.directions_deg.iter().map(|&d| deg_to_rad(d)).collect()
        };
        dirs.sort_by(f64::total_cmp);
        dirs
    }

    pub fn scenario(&self, point: Option<f64>, seed: u64) -> Result<Scenario, ModelError> {
        let s = &self.config.scenario;
        let mut snr_db = s.snr_db;
        let mut coupling_alpha_db = s.coupling_alpha_db;
        if let (Some(v), Some(sweep)) = (point, &self.config.sweep) {
            match sweep.axis {
                SweepAxis::SnrDb => snr_db = v,
                SweepAxis::CouplingAlphaDb => coupling_alpha_db = v,
            }
        }
        Ok(Scenario {
            geometry: *self.dict.geometry(),
            sources: SourceSet::new(self.truth(seed))?,
            snapshots: s.snapshots,
            snr_db,
            coupling_alpha_db,
            coupling_taps: s.coupling_taps,
            seed,
        })
    }

    /// Runs one estimator on `y`.
    pub fn run_method(
        &self,
        method: Method,
        y: &SnapshotMatrix,
    ) -> Result<(SpectrumResult, Option<Trace>), EstimatorError> {
        let k = self.config.num_sources();
        let mode = match method {
            Method::Music => {
                let res = music_spectrum(&sample_covariance(y), self.grid(), self.dict.geometry(), k)?;
                let spectrum = SpectrumResult {
                    offsets: vec![0.0; res.spectrum.len()],
                    power: res.spectrum,
                    picked_directions: res.picked,
                };
                return Ok((spectrum, None));
            }
            Method::Dfsmc => Mode::Full,
            Method::SblOnGrid => Mode::OnGrid,
            Method::SblOffGrid => Mode::OffGridNoCoupling,
        };
        let opts = RunOptions {
            hyper: self.config.hyper,
            schedule: self.config.schedule,
            ..RunOptions::new(mode, k)
        };
        let out = run_dfsmc(y, &self.dict, &opts)?;
        Ok((out.spectrum, self.config.write_traces.then_some(out.trace)))
    }

    /// Simulates one trial and runs every configured method on it.
    pub fn run_trial(&self, point: usize, trial: usize) -> Result<Vec<TrialOutcome>, ExperimentError> {
        let value = self.config.sweep.as_ref().map(|s| s.values[point]);
        let seed = trial_seed(self.config.seed, trial);
        let sim = self
            .scenario(value, seed)
            .and_then(|sc| Ok((sc.simulate()?, sc)))
            .map_err(|source| ExperimentError::Simulation {
                point: value,
                trial,
                source,
            })?;
        let (data, scenario) = sim;
        let truth = scenario.sources.directions().to_vec();
        let truth_deg: Vec<f64> = truth.iter().map(|&t| rad_to_deg(t)).collect();
        self.config
            .methods
            .iter()
            .map(|&method| {
                let start = Instant::now();
                let (spectrum, trace) =
                    self.run_method(method, &data.snapshots)
                        .map_err(|source| ExperimentError::Estimator {
                            point: value,
                            trial,
                            method,
                            source,
                        })?;
                let wall_time_s = start.elapsed().as_secs_f64();
                let e1_deg = error_e1(&spectrum.picked_directions, &truth).map_err(|e| ExperimentError::Estimator {
                    point: value,
                    trial,
                    method,
                    source: e.into(),
                })?;
                Ok(TrialOutcome {
                    report: TrialReport {
                        point,
                        sweep_value: value,
                        trial,
                        seed,
                        method,
                        truth_deg: truth_deg.clone(),
                        picked_deg: spectrum.picked_directions.iter().map(|&t| rad_to_deg(t)).collect(),
                        e1_deg,
                        wall_time_s,
                    },
                    spectrum,
                    trace,
                })
            })
            .collect()
    }
}

/// Runs the whole experiment. Work units are (sweep point, trial) pairs
/// spread over the worker pool; results are collected in index order, so
/// the output does not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, ExperimentError> {
    run_experiment_with(config, |_| {})
}

/// [`run_experiment`] with a callback per finished trial (called from
/// worker threads, in completion order).
pub fn run_experiment_with<F>(config: &ExperimentConfig, on_trial: F) -> Result<ExperimentOutput, ExperimentError>
where
    F: Fn(&[TrialOutcome]) + Sync,
{
    let setup = Setup::new(config)?;
    let points = config.sweep_points().len();
    let units: Vec<(usize, usize)> = (0..points)
        .flat_map(|p| (0..config.trials).map(move |t| (p, t)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        builder = builder.num_threads(w);
    }
    let pool = builder.build()?;
    let per_unit: Vec<Vec<TrialOutcome>> = pool.install(|| {
        units
            .par_iter()
            .map(|&(p, t)| {
                let out = setup.run_trial(p, t)?;
                on_trial(&out);
                Ok(out)
            })
            .collect::<Result<_, ExperimentError>>()
    })?;
    let outcomes: Vec<TrialOutcome> = per_unit.into_iter().flatten().collect();
    let sweep = summarize(config, &outcomes);
    Ok(ExperimentOutput {
        config: config.clone(),
        outcomes,
        sweep,
    })
}

/// Aggregates per-trial reports into `e₂` and median `e₁` per method and
/// sweep point.
pub fn summarize(config: &ExperimentConfig, outcomes: &[TrialOutcome]) -> SweepReport {
    let points = config.sweep_points().len();
    let methods = config
        .methods
        .iter()
        .map(|&method| {
            let mut e2_deg = Vec::with_capacity(points);
            let mut median_e1_deg = Vec::with_capacity(points);
            for p in 0..points {
                let rows: Vec<&TrialReport> = outcomes
                    .iter()
                    .map(|o| &o.report)
                    .filter(|r| r.method == method && r.point == p)
                    .collect();
                let est: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|r| r.picked_deg.iter().map(|&d| deg_to_rad(d)).collect())
                    .collect();
                let truth: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|r| r.truth_deg.iter().map(|&d| deg_to_rad(d)).collect())
                    .collect();
                e2_deg.push(error_e2(&est, &truth).unwrap_or(f64::NAN));
                let e1: Vec<f64> = rows.iter().map(|r| r.e1_deg).collect();
                median_e1_deg.push(median(&e1));
            }
            MethodSummary {
                method,
                label: method.label(),
                e2_deg,
                median_e1_deg,
            }
        })
        .collect();
    SweepReport {
        axis: config.sweep.as_ref().map(|s| s.axis),
        values: config.sweep.as_ref().map(|s| s.values.clone()).unwrap_or_default(),
        trials: config.trials,
        methods,
    }
}

/// `k` distinct grid points at least `min_steps` apart, each shifted by a
/// uniform offset within half a grid step, from the trial's direction
/// stream.
pub fn random_directions<R: Rng + ?Sized>(grid: &Grid, k: usize, min_steps: usize, rng: &mut R) -> Vec<f64> {
    let u = grid.len();
    let step = grid.step();
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    // Rejection sampling; feasibility is checked during validation, and
    // restarting from scratch avoids greedy dead ends.
    'restart: loop {
        chosen.clear();
        for _ in 0..k {
            let mut placed = false;
            for _ in 0..1000 {
                let idx = rng.random_range(0..u);
                if chosen.iter().all(|&c| c.abs_diff(idx) >= min_steps) {
                    chosen.push(idx);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'restart;
            }
        }
        break;
    }
    chosen
        .iter()
        .map(|&idx| grid.points()[idx] + rng.random_range(-0.5 * step..=0.5 * step))
        .collect()
}
