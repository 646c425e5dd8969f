//! Experiment driver: sweeps recovery over a grid of measurement counts and
//! solvers on planted signals and aggregates the errors.
//!
//! # Configuration
//!
//! Experiments are described in TOML. Every key except `model`, `m_grid` and
//! `solvers` has a default.
//!
//! ```toml
//! seed = 7                       # master seed
//! trials = 10                    # planted signals per grid point
//! m_grid = [50, 100, 200, 400]
//! solvers = ["pgd1bit", "biht"]  # any of pgd1bit, biht, lasso, lasso1bit
//! output = "fig2.csv"            # relative to the config file
//!
//! [model]                        # or: kind = "ffnet", path = "net.json", r_min = 0.1
//! kind = "group_sparse"
//! n = 60
//! k = 3                          # r, x_max, x_c optional
//!
//! [signal]
//! latent = "active_box"          # or "ball" (default)
//! latent_seeds = [1, 2, 3]       # optional, one per trial
//!
//! [noise]                        # default: kind = "none"
//! kind = "sign_flip"             # or "gaussian_pre_quantization" with sigma
//! p = 0.05
//!
//! [settings.pgd1bit]             # any RecoveryConfig field
//! step_size = 0.5
//! step_scaling = "per_measurement"
//!
//! [settings.biht]
//! sparsity = 3
//! ```
//!
//! Trial `t` plants the same signal at every `m`; the matrix for `(m, t)` is
//! drawn from a seed derived from `(seed, m, t)`, so each cell is
//! reproducible on its own.

pub mod cli;
mod output;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use ndarray::Array1;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::unit;
use crate::error::{Error, Result};
use crate::genmodel::{normalize_model, FeedForwardModel, GenerativeModel, GroupSparseModel};
use crate::measure::{
    geodesic_dist, hamming_dist, noisy_linear_measure, noisy_sign_measure, sign_measure,
    MeasurementEnsemble, NoiseSpec,
};
use crate::recover::{onesided_l1, run_solver, SolveStatus, Solver, SolverSettings};
use crate::rng::{derive_seed, rng_from_seed, uniform_ball};

pub use output::{read_csv, write_csv, write_meta, CSV_COLUMNS};

const PLANT_STREAM: u64 = 1;
const MATRIX_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;
const SOLVER_STREAM: u64 = 4;
const PLANT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    GroupSparse {
        n: usize,
        k: usize,
        r: Option<f64>,
        x_max: Option<f64>,
        x_c: Option<f64>,
    },
    Ffnet {
        path: PathBuf,
        /// Wraps the network in a normalized model with this output floor.
        r_min: Option<f64>,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<Box<dyn GenerativeModel>> {
        match self {
            ModelSpec::GroupSparse {
                n,
                k,
                r,
                x_max,
                x_c,
            } => {
                let base = GroupSparseModel::with_default_amplitudes(*n, *k)?;
                let model = GroupSparseModel::new(
                    *n,
                    *k,
                    r.unwrap_or(base.r()),
                    x_max.unwrap_or(base.x_max()),
                    x_c.unwrap_or(base.x_c()),
                )?;
                Ok(Box::new(model))
            }
            ModelSpec::Ffnet { path, r_min } => {
                let net = FeedForwardModel::load(path).map_err(|e| {
                    Error::Config(format!("cannot load model {}: {e}", path.display()))
                })?;
                match r_min {
                    Some(r_min) => Ok(Box::new(normalize_model(net, *r_min)?)),
                    None => Ok(Box::new(net)),
                }
            }
        }
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let ModelSpec::Ffnet { path, .. } = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

/// Parses `group-sparse:n=60,k=3[,r=…,x_max=…,x_c=…]` or `ffnet:<path>`.
impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("model spec {s:?} has no ':'")))?;
        match kind {
            "group-sparse" | "group_sparse" => {
                let (mut n, mut k, mut r, mut x_max, mut x_c) = (None, None, None, None, None);
                for item in rest.split(',').filter(|i| !i.is_empty()) {
                    let (key, value) = item.split_once('=').ok_or_else(|| {
                        Error::Config(format!("expected key=value, got {item:?}"))
                    })?;
                    let value = value.trim();
                    let bad = || Error::Config(format!("bad value for {key}: {value:?}"));
                    match key.trim() {
                        "n" => n = Some(value.parse().map_err(|_| bad())?),
                        "k" => k = Some(value.parse().map_err(|_| bad())?),
                        "r" => r = Some(value.parse().map_err(|_| bad())?),
                        "x_max" => x_max = Some(value.parse().map_err(|_| bad())?),
                        "x_c" => x_c = Some(value.parse().map_err(|_| bad())?),
                        other => return Err(Error::Config(format!("unknown model key {other:?}"))),
                    }
                }
                let need = |v: Option<usize>, name| {
                    v.ok_or_else(|| Error::Config(format!("group-sparse model needs {name}")))
                };
                Ok(ModelSpec::GroupSparse {
                    n: need(n, "n")?,
                    k: need(k, "k")?,
                    r,
                    x_max,
                    x_c,
                })
            }
            "ffnet" => Ok(ModelSpec::Ffnet {
                path: PathBuf::from(rest),
                r_min: None,
            }),
            other => Err(Error::Config(format!("unknown model kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentSampling {
    /// Uniform in the latent ball `B₂ᵏ(r)`.
    #[default]
    Ball,
    /// Uniform in the cube `[−r/√k, r/√k]ᵏ` inscribed in the ball. For the
    /// group-sparse model every block of the planted signal is then active.
    ActiveBox,
}

impl LatentSampling {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R, k: usize, r: f64) -> Array1<f64> {
        match self {
            LatentSampling::Ball => uniform_ball(rng, k, r),
            LatentSampling::ActiveBox => {
                let h = r / (k as f64).sqrt();
                (0..k).map(|_| rng.random_range(-h..=h)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSource {
    pub latent: LatentSampling,
    /// Seed of the planted latent for each trial. Derived from the master
    /// seed when absent.
    pub latent_seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub signal: SignalSource,
    pub m_grid: Vec<usize>,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub solvers: Vec<Solver>,
    #[serde(default)]
    pub settings: SolverSettings,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

fn default_trials() -> usize {
    10
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.model.resolve_paths(base);
        if let Some(out) = &mut config.output {
            if out.is_relative() {
                *out = base.join(&*out);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.m_grid.is_empty() || self.m_grid.contains(&0) {
            return fail("m_grid must be non-empty with positive entries".into());
        }
        if self.solvers.is_empty() {
            return fail("at least one solver is required".into());
        }
        let mut seen = self.solvers.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.solvers.len() {
            return fail("solvers are listed more than once".into());
        }
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if let Some(seeds) = &self.signal.latent_seeds {
            if seeds.len() < self.trials {
                return fail(format!(
                    "{} latent seeds for {} trials",
                    seeds.len(),
                    self.trials
                ));
            }
        }
        let invalid = |e: Error| Error::Config(e.to_string());
        self.noise.validate().map_err(invalid)?;
        self.settings.pgd1bit.validate().map_err(invalid)?;
        Ok(())
    }

    fn plant_seed(&self, trial: usize) -> u64 {
        match &self.signal.latent_seeds {
            Some(seeds) => seeds[trial],
            None => derive_seed(self.seed, &[PLANT_STREAM, trial as u64]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Relaxed,
    Failed,
}

impl fmt::Display for RowStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowStatus::Ok => "ok",
            RowStatus::Relaxed => "relaxed",
            RowStatus::Failed => "failed",
        })
    }
}

impl FromStr for RowStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ok" => Ok(RowStatus::Ok),
            "relaxed" => Ok(RowStatus::Relaxed),
            "failed" => Ok(RowStatus::Failed),
            other => Err(Error::Format(format!("unknown row status {other:?}"))),
        }
    }
}

/// One solver run. Signal and estimate are compared as unit vectors, since
/// sign measurements carry no norm information; failed runs carry NaN
/// metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub m: usize,
    pub solver: Solver,
    pub trial: usize,
    pub status: RowStatus,
    pub d_s: f64,
    /// `‖x − x̂‖₂`.
    pub l2_error: f64,
    /// `‖x − x̂‖₂²/n`.
    pub per_coord_error: f64,
    /// One-sided ℓ1 loss of the estimate.
    pub final_loss: f64,
    /// `d_H(b, sign(Ax))`, the fraction of bits changed by noise.
    pub tau1: f64,
    /// `d_H(sign(Ax̂), b)`.
    pub tau2: f64,
    #[serde(skip)]
    pub wall_seconds: f64,
}

/// Mean and spread of the successful rows of one `(m, solver)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellAggregate {
    pub m: usize,
    pub solver: Solver,
    pub count: usize,
    pub d_s: f64,
    pub l2_error: f64,
    pub per_coord_error: f64,
    pub final_loss: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub d_s_std: f64,
    /// Half a standard deviation.
    pub d_s_errbar: f64,
    pub per_coord_error_std: f64,
    pub per_coord_error_errbar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<CellAggregate>,
}

/// Sample standard deviation (zero for a single value).
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-cell aggregates of rows sorted by `(m, solver, trial)`. Cells whose
/// runs all failed get `count = 0` and NaN statistics.
pub fn aggregate(rows: &[SweepRow]) -> Vec<CellAggregate> {
    let mut out = Vec::new();
    for cell in rows.chunk_by(|a, b| a.m == b.m && a.solver == b.solver) {
        let good: Vec<&SweepRow> = cell
            .iter()
            .filter(|r| r.status != RowStatus::Failed)
            .collect();
        let col = |f: fn(&SweepRow) -> f64| good.iter().map(|r| f(r)).collect::<Vec<f64>>();
        let (d_s, d_s_std) = mean_std(&col(|r| r.d_s));
        let (pce, pce_std) = mean_std(&col(|r| r.per_coord_error));
        out.push(CellAggregate {
            m: cell[0].m,
            solver: cell[0].solver,
            count: good.len(),
            d_s,
            l2_error: mean_std(&col(|r| r.l2_error)).0,
            per_coord_error: pce,
            final_loss: mean_std(&col(|r| r.final_loss)).0,
            tau1: mean_std(&col(|r| r.tau1)).0,
            tau2: mean_std(&col(|r| r.tau2)).0,
            d_s_std,
            d_s_errbar: 0.5 * d_s_std,
            per_coord_error_std: pce_std,
            per_coord_error_errbar: 0.5 * pce_std,
        });
    }
    out
}

fn plant(model: &dyn GenerativeModel, sampling: LatentSampling, seed: u64) -> Result<Array1<f64>> {
    let mut rng = rng_from_seed(seed);
    let mut last_err = None;
    for _ in 0..PLANT_ATTEMPTS {
        let z = sampling.sample(&mut rng, model.latent_dim(), model.latent_radius());
        match model.forward(&z) {
            Ok(x) => return Ok(x),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn run_cell(
    config: &ExperimentConfig,
    model: &dyn GenerativeModel,
    m: usize,
    trial: usize,
) -> Result<Vec<SweepRow>> {
    let n = model.ambient_dim();
    let x = unit(&plant(
        model,
        config.signal.latent,
        config.plant_seed(trial),
    )?)?;
    let cell = [m as u64, trial as u64];
    let a = MeasurementEnsemble::gaussian(
        m,
        n,
        derive_seed(config.seed, &[MATRIX_STREAM, cell[0], cell[1]]),
    )?;
    let noise = config.noise.with_seed(derive_seed(
        config.seed,
        &[NOISE_STREAM, config.noise.seed, cell[0], cell[1]],
    ));
    let clean = sign_measure(&a, &x)?;
    let b = noisy_sign_measure(&a, &x, &noise)?;
    let y = noisy_linear_measure(&a, &x, &noise)?;
    let tau1 = hamming_dist(&b, &clean)?;

    let mut rows = Vec::with_capacity(config.solvers.len());
    for &solver in &config.solvers {
        let started = Instant::now();
        let solver_seed = derive_seed(config.seed, &[SOLVER_STREAM, cell[0], cell[1]]);
        let outcome = run_solver(solver, &a, &b, &y, model, &config.settings, solver_seed)
            .and_then(|out| {
                let xh = unit(&out.estimate)?;
                let diff = &x - &xh;
                let l2 = diff.dot(&diff).sqrt();
                Ok(SweepRow {
                    m,
                    solver,
                    trial,
                    status: match out.status {
                        SolveStatus::Ok => RowStatus::Ok,
                        SolveStatus::Relaxed => RowStatus::Relaxed,
                    },
                    d_s: geodesic_dist(&x, &xh)?,
                    l2_error: l2,
                    per_coord_error: l2 * l2 / n as f64,
                    final_loss: onesided_l1(&a, &xh, &b)?,
                    tau1,
                    tau2: hamming_dist(&sign_measure(&a, &xh)?, &b)?,
                    wall_seconds: 0.0,
                })
            });
        let mut row = outcome.unwrap_or_else(|_| SweepRow {
            m,
            solver,
            trial,
            status: RowStatus::Failed,
            d_s: f64::NAN,
            l2_error: f64::NAN,
            per_coord_error: f64::NAN,
            final_loss: f64::NAN,
            tau1,
            tau2: f64::NAN,
            wall_seconds: 0.0,
        });
        row.wall_seconds = started.elapsed().as_secs_f64();
        rows.push(row);
    }
    Ok(rows)
}

/// Runs every `(m, trial)` cell of the grid with every solver.
///
/// Solver failures are recorded as rows with status `failed`; errors in
/// setting up a cell (model, matrix, planting) abort the sweep. Rows come
/// back sorted by `(m, solver, trial)` whatever order the cells ran in.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let model = config.model.build()?;
    let cells: Vec<(usize, usize)> = config
        .m_grid
        .iter()
        .flat_map(|&m| (0..config.trials).map(move |t| (m, t)))
        .collect();
    let mut rows = cells
        .into_par_iter()
        .map(|(m, t)| run_cell(config, model.as_ref(), m, t))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    rows.sort_by_key(|r| (r.m, r.solver, r.trial));
    let aggregates = aggregate(&rows);
    Ok(SweepResult { rows, aggregates })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
        seed = 3
        trials = 2
        m_grid = [80]
        solvers = ["pgd1bit"]
        [model]
        kind = "group_sparse"
        n = 24
        k = 3
    "#;

    #[test]
    fn parses_and_validates() {
        let c = ExperimentConfig::from_toml_str(SMALL).unwrap();
        assert_eq!(c.trials, 2);
        assert_eq!(c.signal.latent, LatentSampling::Ball);
        assert!(c.noise.is_noiseless());
        for bad in [
            SMALL.replace("m_grid = [80]", "m_grid = []"),
            SMALL.replace("trials = 2", "trials = 0"),
            SMALL.replace("[\"pgd1bit\"]", "[\"pgd1bit\", \"pgd1bit\"]"),
            SMALL.replace("[\"pgd1bit\"]", "[\"nope\"]"),
            SMALL.replace("seed = 3", "seed = 3\nbogus = 1"),
        ] {
            assert!(
                matches!(ExperimentConfig::from_toml_str(&bad), Err(Error::Config(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn model_spec_strings() {
        let spec: ModelSpec = "group-sparse:n=60,k=3,x_c=2".parse().unwrap();
        assert_eq!(
            spec,
            ModelSpec::GroupSparse {
                n: 60,
                k: 3,
                r: None,
                x_max: None,
                x_c: Some(2.0)
            }
        );
        assert!(matches!(
            "ffnet:dir/net.json".parse::<ModelSpec>(),
            Ok(ModelSpec::Ffnet { .. })
        ));
        assert!("group-sparse:n=60".parse::<ModelSpec>().is_err());
        assert!("vae:x".parse::<ModelSpec>().is_err());
        let missing = ModelSpec::Ffnet {
            path: "/nonexistent/net.json".into(),
            r_min: None,
        };
        assert!(matches!(missing.build(), Err(Error::Config(_))));
    }

    #[test]
    fn single_cell_matches_independent_recomputation() {
        let mut c = ExperimentConfig::from_toml_str(SMALL).unwrap();
        c.trials = 1;
        let res = run_sweep(&c).unwrap();
        assert_eq!(res.rows.len(), 1);
        let row = &res.rows[0];
        assert_eq!(row.tau1, 0.0);

        let model = c.model.build().unwrap();
        let x =
            unit(&plant(model.as_ref(), LatentSampling::Ball, c.plant_seed(0)).unwrap()).unwrap();
        let a =
            MeasurementEnsemble::gaussian(80, 24, derive_seed(3, &[MATRIX_STREAM, 80, 0])).unwrap();
        let b = sign_measure(&a, &x).unwrap();
        let cfg = c
            .settings
            .pgd1bit
            .with_seed(derive_seed(3, &[SOLVER_STREAM, 80, 0]));
        let est = crate::recover::pgd_1bit(&a, &b, model.as_ref(), &cfg)
            .unwrap()
            .estimate;
        assert_eq!(row.d_s, geodesic_dist(&x, &est).unwrap());
    }

    #[test]
    fn aggregates_use_half_std_error_bars() {
        let mut c = ExperimentConfig::from_toml_str(SMALL).unwrap();
        c.trials = 4;
        c.solvers = vec![Solver::Pgd1Bit, Solver::Biht];
        c.settings.biht.sparsity = 3;
        let res = run_sweep(&c).unwrap();
        assert_eq!(res.rows.len(), 8);
        assert_eq!(res.aggregates.len(), 2);
        for agg in &res.aggregates {
            assert_eq!(agg.count, 4);
            assert_eq!(agg.d_s_errbar, 0.5 * agg.d_s_std);
            assert_eq!(agg.per_coord_error_errbar, 0.5 * agg.per_coord_error_std);
        }
        for r in &res.rows {
            assert!(r.l2_error / std::f64::consts::PI <= r.d_s + 1e-12);
            assert!(r.d_s <= r.l2_error / 2.0 + 1e-12);
        }
    }

    #[test]
    fn explicit_latent_seeds_are_used() {
        let text = format!("{SMALL}\n[signal]\nlatent = \"active_box\"\nlatent_seeds = [5, 6]");
        let c = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(c.plant_seed(1), 6);
        let short = text.replace("[5, 6]", "[5]");
        assert!(ExperimentConfig::from_toml_str(&short).is_err());
    }

    #[test]
    fn active_box_fills_every_block() {
        let model = GroupSparseModel::with_default_amplitudes(30, 3).unwrap();
        for seed in 0..20 {
            let x = plant(&model, LatentSampling::ActiveBox, seed).unwrap();
            for block in 0..2 {
                assert!(x
                    .slice(ndarray::s![block * 10..(block + 1) * 10])
                    .iter()
                    .any(|v| *v != 0.0));
            }
        }
    }
}
