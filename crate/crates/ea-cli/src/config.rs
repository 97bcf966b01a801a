//! Flat TOML experiment configuration with defaults, validation, and the
//! resolved echo embedded in every artifact.

use serde::{Deserialize, Serialize};

use crate::AppError;
use ea_core::ground_state::{ENUMERATION_CAP, TRANSFER_MATRIX_ROW_CAP};
use ea_core::lattice::TerminalPair;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    GroundState,
    Census,
    LineMass,
    BarrierVerify,
    LowerBound,
    Decorrelate,
    ColumnsCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::GroundState => "ground-state",
            Experiment::Census => "census",
            Experiment::LineMass => "line-mass",
            Experiment::BarrierVerify => "barrier-verify",
            Experiment::LowerBound => "lower-bound",
            Experiment::Decorrelate => "decorrelate",
            Experiment::ColumnsCheck => "columns-check",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    Auto,
    Enumeration,
    TransferMatrix,
}

/// Raw file contents: every key optional, unknown keys rejected.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub experiment: Option<Experiment>,
    /// Square-grid shorthand.
    pub n: Option<usize>,
    pub n_cols: Option<usize>,
    pub n_rows: Option<usize>,
    /// Grid sweep for line-mass / lower-bound style experiments.
    pub ns: Option<Vec<usize>>,
    pub solver: Option<SolverChoice>,
    pub n_outer: Option<usize>,
    pub m_inner: Option<usize>,
    pub replicas: Option<usize>,
    pub resamples: Option<usize>,
    pub instances: Option<usize>,
    pub samples: Option<usize>,
    pub degree_cap: Option<u32>,
    pub quad_order: Option<usize>,
    pub low_threshold: Option<f64>,
    pub high_threshold: Option<f64>,
    pub t_grid: Option<Vec<f64>>,
    pub width: Option<usize>,
    pub epsilon: Option<f64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out_dir: Option<String>,
    pub strict: Option<bool>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, AppError> {
        toml::from_str(text).map_err(|e| AppError::Config(format!("config parse error: {e}")))
    }
}

/// Fully resolved configuration; serialized into run metadata and artifact
/// headers, and consumed verbatim by `replay`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub experiment: Experiment,
    pub n_cols: usize,
    pub n_rows: usize,
    pub ns: Vec<usize>,
    pub solver: SolverChoice,
    pub n_outer: usize,
    pub m_inner: usize,
    pub replicas: usize,
    pub resamples: usize,
    pub instances: usize,
    pub samples: usize,
    pub degree_cap: u32,
    pub quad_order: usize,
    pub low_threshold: f64,
    pub high_threshold: f64,
    pub t_grid: Vec<f64>,
    pub width: usize,
    pub epsilon: f64,
    pub seed: u64,
    /// Worker count; an execution detail that never affects results, so it
    /// is kept out of artifact headers and replay metadata.
    #[serde(skip)]
    pub threads: usize,
    pub strict: bool,
}

impl ResolvedConfig {
    pub fn from_raw(raw: &RawConfig, experiment: Experiment) -> Result<Self, AppError> {
        if let Some(named) = raw.experiment {
            if named != experiment {
                return Err(AppError::Config(format!(
                    "config names experiment '{}' but '{}' was requested",
                    named.name(),
                    experiment.name()
                )));
            }
        }
        let n_cols = raw.n_cols.or(raw.n).unwrap_or(8);
        let n_rows = raw.n_rows.or(raw.n).unwrap_or(n_cols);
        let resolved = ResolvedConfig {
            experiment,
            n_cols,
            n_rows,
            ns: raw.ns.clone().unwrap_or_else(|| vec![4, 6, 8]),
            solver: raw.solver.unwrap_or(SolverChoice::Auto),
            n_outer: raw.n_outer.unwrap_or(2000),
            m_inner: raw.m_inner.unwrap_or(200),
            replicas: raw.replicas.unwrap_or(1000),
            resamples: raw.resamples.unwrap_or(1000),
            instances: raw.instances.unwrap_or(200),
            samples: raw.samples.unwrap_or(10_000),
            degree_cap: raw.degree_cap.unwrap_or(ea_core::spectral::DEFAULT_DEGREE_CAP),
            quad_order: raw.quad_order.unwrap_or(ea_core::hermite::DEFAULT_QUAD_ORDER),
            low_threshold: raw.low_threshold.unwrap_or(1.0),
            high_threshold: raw.high_threshold.unwrap_or(100.0),
            t_grid: raw
                .t_grid
                .clone()
                .unwrap_or_else(|| ea_core::spectral::DEFAULT_T_GRID.to_vec()),
            width: raw.width.unwrap_or(5),
            epsilon: raw.epsilon.unwrap_or(0.02),
            seed: raw.seed.unwrap_or(0),
            threads: raw.threads.unwrap_or(0),
            strict: raw.strict.unwrap_or(true),
        };
        resolved.validate()?;
        Ok(resolved)
    }

    fn solver_capable(&self, n_cols: usize, n_rows: usize) -> Result<(), AppError> {
        let enumeration_ok = n_cols * n_rows <= ENUMERATION_CAP;
        let transfer_ok = n_rows <= TRANSFER_MATRIX_ROW_CAP;
        let ok = match self.solver {
            SolverChoice::Auto => enumeration_ok || transfer_ok,
            SolverChoice::Enumeration => enumeration_ok,
            SolverChoice::TransferMatrix => transfer_ok,
        };
        if ok {
            Ok(())
        } else {
            Err(AppError::Config(format!(
                "no capable exact solver for a {n_cols}x{n_rows} grid with solver choice {:?}",
                self.solver
            )))
        }
    }

    fn require_even_rows(&self, n_rows: usize) -> Result<(), AppError> {
        if self.strict && !n_rows.is_multiple_of(2) {
            return Err(AppError::Config(format!(
                "odd row count {n_rows} has no exact middle row for the canonical pair; \
                 set strict = false to use row {} instead",
                TerminalPair::canonical_row(n_rows)
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if self.n_cols < 2 || self.n_rows < 1 {
            return Err(AppError::Config("grid must have at least 2x1 vertices".into()));
        }
        for &v in &[
            self.n_outer,
            self.m_inner,
            self.replicas,
            self.resamples,
            self.instances,
            self.samples,
        ] {
            if v == 0 {
                return Err(AppError::Config("sample counts must be positive".into()));
            }
        }
        if self.quad_order < 1 || self.quad_order > ea_core::hermite::MAX_QUAD_ORDER {
            return Err(AppError::Config(format!(
                "quad_order {} outside 1..={}",
                self.quad_order,
                ea_core::hermite::MAX_QUAD_ORDER
            )));
        }
        if self.low_threshold <= 0.0 || self.high_threshold <= 0.0 {
            return Err(AppError::Config("thresholds must be positive".into()));
        }
        if self.t_grid.iter().any(|&t| t < 0.0 || t.is_nan()) {
            return Err(AppError::Config("t_grid entries must be >= 0".into()));
        }
        match self.experiment {
            Experiment::GroundState => {
                self.solver_capable(self.n_cols, self.n_rows)?;
                self.require_even_rows(self.n_rows)?;
            }
            Experiment::Census => {
                let g = ea_core::lattice::build_grid(self.n_cols, self.n_rows)
                    .map_err(|e| AppError::Config(e.to_string()))?;
                if g.num_edges() > ea_core::spectral::CENSUS_EDGE_CAP {
                    return Err(AppError::Config(format!(
                        "census needs at most {} edges, the {}x{} grid has {}",
                        ea_core::spectral::CENSUS_EDGE_CAP,
                        self.n_cols,
                        self.n_rows,
                        g.num_edges()
                    )));
                }
            }
            Experiment::LineMass | Experiment::LowerBound => {
                if self.ns.is_empty() {
                    return Err(AppError::Config("ns must not be empty".into()));
                }
                for &n in &self.ns {
                    if n < 2 {
                        return Err(AppError::Config("grid sweep entries must be >= 2".into()));
                    }
                    self.solver_capable(n, n)?;
                    self.require_even_rows(n)?;
                }
            }
            Experiment::BarrierVerify | Experiment::Decorrelate => {
                self.solver_capable(self.n_cols, self.n_rows)?;
                self.require_even_rows(self.n_rows)?;
            }
            Experiment::ColumnsCheck => {
                if self.width == 0 || self.width >= self.n_cols {
                    return Err(AppError::Config(format!(
                        "width {} invalid for {} vertex columns",
                        self.width, self.n_cols
                    )));
                }
                if self.epsilon < 0.0 {
                    return Err(AppError::Config("epsilon must be >= 0".into()));
                }
                self.require_even_rows(self.n_rows)?;
            }
        }
        Ok(())
    }

    /// Compact deterministic JSON echo for artifact headers.
    pub fn echo(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Run metadata: the replay input. Wall time is recorded here and only
/// here, so the data artifacts stay byte-identical across reruns.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMetadata {
    pub version: String,
    pub experiment: Experiment,
    pub config: ResolvedConfig,
    pub artifacts: Vec<String>,
    pub wall_time_ms: u128,
}
