//! Experiment configuration: JSON file format, defaults and validation.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use dfsmc_core::{build_grid, deg_to_rad, ArrayGeometry, Grid, Hyperparams, Schedule};
use serde::{Deserialize, Serialize};

/// Estimators the driver can run on each simulated dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[value(name = "dfsmc")]
    Dfsmc,
    #[value(name = "sbl_on_grid")]
    SblOnGrid,
    #[value(name = "sbl_off_grid")]
    SblOffGrid,
    #[value(name = "music")]
    Music,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dfsmc, Method::SblOnGrid, Method::SblOffGrid, Method::Music];

    /// Identifier used in file names, CSV rows and on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            Method::Dfsmc => "dfsmc",
            Method::SblOnGrid => "sbl_on_grid",
            Method::SblOffGrid => "sbl_off_grid",
            Method::Music => "music",
        }
    }

    /// Human-readable label for reports.
    pub fn label(&self) -> &'static str {
        match self {
            Method::Dfsmc => "DFSMC",
            Method::SblOnGrid => "on-grid SBL",
            Method::SblOffGrid => "off-grid SBL (no coupling)",
            Method::Music => "MUSIC",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub antennas: usize,
    /// Element spacing in wavelengths.
    pub spacing_wavelengths: f64,
    pub snapshots: usize,
    pub snr_db: f64,
    pub coupling_alpha_db: f64,
    /// Number of nonzero coupling coefficients including `c₀`.
    pub coupling_taps: usize,
    /// Source directions; also fixes the number of sources when
    /// `random_directions` is set.
    pub directions_deg: Vec<f64>,
    /// Redraw the directions for every trial: distinct random grid
    /// points, each shifted uniformly within half a grid step.
    pub random_directions: bool,
    /// Minimum spacing between randomly drawn grid points.
    pub min_separation_deg: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            antennas: 20,
            spacing_wavelengths: 0.5,
            snapshots: 100,
            snr_db: 20.0,
            coupling_alpha_db: -8.0,
            coupling_taps: 5,
            directions_deg: vec![-8.268, 18.128, 30.428],
            random_directions: false,
            min_separation_deg: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub min_deg: f64,
    pub max_deg: f64,
    pub step_deg: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            min_deg: -60.0,
            max_deg: 60.0,
            step_deg: 1.0,
        }
    }
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid, ConfigError> {
        build_grid(
            deg_to_rad(self.min_deg),
            deg_to_rad(self.max_deg),
            deg_to_rad(self.step_deg),
        )
        .map_err(|e| ConfigError::invalid("grid", e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb,
    CouplingAlphaDb,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::CouplingAlphaDb => "coupling_alpha_db",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    pub grid: GridConfig,
    pub hyper: Hyperparams,
    pub schedule: Schedule,
    pub methods: Vec<Method>,
    pub trials: usize,
    /// Master seed; trial `p` uses `seed ⊕ p`.
    pub seed: u64,
    pub sweep: Option<Sweep>,
    /// Run settings rather than part of the experiment: they are read but
    /// not serialized, so summaries of identical experiments match.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    /// Worker threads; all available cores when absent.
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    pub write_spectra: bool,
    /// Per-iteration EM traces, one CSV per method and trial.
    pub write_traces: bool,
    /// Wall-clock times go to a separate `timing.csv` so that the other
    /// outputs stay reproducible byte for byte.
    pub write_timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: ScenarioConfig::default(),
            grid: GridConfig::default(),
            hyper: Hyperparams::default(),
            schedule: Schedule::default(),
            methods: Method::ALL.to_vec(),
            trials: 1,
            seed: 0,
            sweep: None,
            output_dir: PathBuf::from("results"),
            workers: None,
            write_spectra: true,
            write_traces: false,
            write_timing: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}, field `{field}`: {message}")]
    Parse {
        line: usize,
        column: usize,
        field: String,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl ConfigError {
    pub fn invalid(field: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

/// Command-line overrides applied on top of a loaded configuration.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub methods: Option<Vec<Method>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    /// One value sets the SNR; several request an SNR sweep.
    pub snr_db: Option<Vec<f64>>,
    /// One value sets `α_c`; several request a coupling sweep.
    pub coupling_alpha_db: Option<Vec<f64>>,
    pub output_dir: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    /// Parses JSON, filling missing fields with defaults. Errors carry
    /// the line, column and path of the offending field.
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(&mut de).map_err(|err| {
            let field = err.path().to_string();
            let inner = err.into_inner();
            ConfigError::Parse {
                line: inner.line(),
                column: inner.column(),
                field,
                message: strip_position(&inner.to_string()),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("configuration serializes")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(m) = &o.methods {
            self.methods = m.clone();
        }
        if let Some(t) = o.trials {
            self.trials = t;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(w) = o.workers {
            self.workers = Some(w);
        }
        let snr_sweep = o.snr_db.as_ref().is_some_and(|v| v.len() > 1);
        let coupling_sweep = o.coupling_alpha_db.as_ref().is_some_and(|v| v.len() > 1);
        if snr_sweep && coupling_sweep {
            return Err(ConfigError::invalid(
                "sweep",
                "only one of --snr and --coupling-db may list several values",
            ));
        }
        for (values, axis) in [
            (&o.snr_db, SweepAxis::SnrDb),
            (&o.coupling_alpha_db, SweepAxis::CouplingAlphaDb),
        ] {
            let Some(values) = values else { continue };
            match values.as_slice() {
                [] => return Err(ConfigError::invalid(axis.name(), "empty value list")),
                [v] => {
                    match axis {
                        SweepAxis::SnrDb => self.scenario.snr_db = *v,
                        SweepAxis::CouplingAlphaDb => self.scenario.coupling_alpha_db = *v,
                    }
                    if self.sweep.as_ref().is_some_and(|s| s.axis == axis) {
                        self.sweep = None;
                    }
                }
                many => {
                    self.sweep = Some(Sweep {
                        axis,
                        values: many.to_vec(),
                    })
                }
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(ConfigError::invalid("trials", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(ConfigError::invalid("methods", "must name at least one method"));
        }
        let unique: BTreeSet<_> = self.methods.iter().collect();
        if unique.len() != self.methods.len() {
            return Err(ConfigError::invalid("methods", "contains duplicates"));
        }
        if self.workers == Some(0) {
            return Err(ConfigError::invalid("workers", "must be at least 1"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(ConfigError::invalid("sweep.values", "must not be empty"));
            }
            if let Some(v) = sweep.values.iter().find(|v| !v.is_finite()) {
                return Err(ConfigError::invalid("sweep.values", format!("non-finite value {v}")));
            }
        }
        self.hyper
            .validate()
            .map_err(|e| ConfigError::invalid("hyper", e.to_string()))?;
        self.schedule
            .validate()
            .map_err(|e| ConfigError::invalid("schedule", e.to_string()))?;
        let grid = self.grid.build()?;
        self.validate_scenario(&grid)
    }

    fn validate_scenario(&self, grid: &Grid) -> Result<(), ConfigError> {
        let s = &self.scenario;
        self.geometry()?;
        if s.snapshots == 0 {
            return Err(ConfigError::invalid("scenario.snapshots", "must be at least 1"));
        }
        if !s.snr_db.is_finite() {
            return Err(ConfigError::invalid("scenario.snr_db", "must be finite"));
        }
        if !s.coupling_alpha_db.is_finite() {
            return Err(ConfigError::invalid("scenario.coupling_alpha_db", "must be finite"));
        }
        if s.coupling_taps == 0 || s.coupling_taps > s.antennas {
            return Err(ConfigError::invalid(
                "scenario.coupling_taps",
                format!("must lie in 1..={}", s.antennas),
            ));
        }
        let k = s.directions_deg.len();
        if k == 0 {
            return Err(ConfigError::invalid(
                "scenario.directions_deg",
                "needs at least one source",
            ));
        }
        if k >= s.antennas {
            return Err(ConfigError::invalid(
                "scenario.directions_deg",
                format!("{k} sources need more than {k} antennas"),
            ));
        }
        let lo = self.grid.min_deg - 0.5 * self.grid.step_deg;
        let hi = self.grid.max_deg + 0.5 * self.grid.step_deg;
        if let Some(d) = s.directions_deg.iter().find(|d| !(lo..=hi).contains(*d)) {
            return Err(ConfigError::invalid(
                "scenario.directions_deg",
                format!("{d} lies outside the grid range"),
            ));
        }
        if s.random_directions {
            if !(s.min_separation_deg >= 0.0) || !s.min_separation_deg.is_finite() {
                return Err(ConfigError::invalid(
                    "scenario.min_separation_deg",
                    "must be finite and non-negative",
                ));
            }
            let sep = separation_steps(s.min_separation_deg, self.grid.step_deg);
            if (k - 1) * sep >= grid.len() {
                return Err(ConfigError::invalid(
                    "scenario.min_separation_deg",
                    format!("{k} sources this far apart do not fit on the grid"),
                ));
            }
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<ArrayGeometry, ConfigError> {
        ArrayGeometry::new(self.scenario.antennas, self.scenario.spacing_wavelengths)
            .map_err(|e| ConfigError::invalid("scenario", e.to_string()))
    }

    pub fn num_sources(&self) -> usize {
        self.scenario.directions_deg.len()
    }

    /// Sweep values, or a single unnamed point without a sweep.
    pub fn sweep_points(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            Some(s) => s.values.iter().map(|&v| Some(v)).collect(),
            None => vec![None],
        }
    }
}

/// Grid steps needed to keep random sources `min_deg` apart (at least 1).
pub fn separation_steps(min_deg: f64, step_deg: f64) -> usize {
    ((min_deg / step_deg).ceil() as usize).max(1)
}

/// serde_json appends " at line L column C"; the position is reported
/// separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}
