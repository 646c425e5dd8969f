use std::fmt;
use std::str::FromStr;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::{
    biht, lasso_1bit, lasso_1bit_relaxed, lasso_linear, pgd_1bit, BihtConfig, RecoveryConfig,
    DEFAULT_LASSO_REG,
};
use crate::error::{Error, Result};
use crate::genmodel::GenerativeModel;
use crate::measure::{MeasurementEnsemble, SignPattern};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    #[serde(rename = "pgd1bit")]
    Pgd1Bit,
    Biht,
    Lasso,
    #[serde(rename = "lasso1bit")]
    Lasso1Bit,
}

impl Solver {
    pub const ALL: [Solver; 4] = [
        Solver::Pgd1Bit,
        Solver::Biht,
        Solver::Lasso,
        Solver::Lasso1Bit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Solver::Pgd1Bit => "pgd1bit",
            Solver::Biht => "biht",
            Solver::Lasso => "lasso",
            Solver::Lasso1Bit => "lasso1bit",
        }
    }
}

impl fmt::Display for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Solver::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown solver {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoConfig {
    pub reg: f64,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            reg: DEFAULT_LASSO_REG,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lasso1BitConfig {
    /// Solve the hinge-relaxed program when the exact one is infeasible.
    pub relax_if_infeasible: bool,
}

impl Default for Lasso1BitConfig {
    fn default() -> Self {
        Self {
            relax_if_infeasible: true,
        }
    }
}

/// Per-solver settings, one table per solver name.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub pgd1bit: RecoveryConfig,
    pub biht: BihtConfig,
    pub lasso: LassoConfig,
    pub lasso1bit: Lasso1BitConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Ok,
    /// The 1-bit Lasso program was infeasible and the hinge relaxation was
    /// solved instead.
    Relaxed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverOutput {
    #[serde(with = "crate::serde_vec")]
    pub estimate: Array1<f64>,
    #[serde(with = "crate::serde_vec::option")]
    pub latent: Option<Array1<f64>>,
    pub status: SolveStatus,
}

/// Runs one solver by name.
///
/// The 1-bit solvers read the sign pattern `b`; `lasso` is the linear-
/// measurement baseline and reads the unquantized measurements `y`. The
/// generative model is used by `pgd1bit` only. `seed` replaces the PGD
/// restart seed.
pub fn run_solver(
    solver: Solver,
    a: &MeasurementEnsemble,
    b: &SignPattern,
    y: &Array1<f64>,
    model: &dyn GenerativeModel,
    settings: &SolverSettings,
    seed: u64,
) -> Result<SolverOutput> {
    let plain = |estimate| SolverOutput {
        estimate,
        latent: None,
        status: SolveStatus::Ok,
    };
    match solver {
        Solver::Pgd1Bit => {
            let res = pgd_1bit(a, b, model, &settings.pgd1bit.with_seed(seed))?;
            Ok(SolverOutput {
                estimate: res.estimate,
                latent: res.latent,
                status: SolveStatus::Ok,
            })
        }
        Solver::Biht => biht(a, b, &settings.biht).map(plain),
        Solver::Lasso => lasso_linear(a, y, settings.lasso.reg).map(|s| plain(s.estimate)),
        Solver::Lasso1Bit => match lasso_1bit(a, b) {
            Err(Error::Infeasible) if settings.lasso1bit.relax_if_infeasible => Ok(SolverOutput {
                estimate: lasso_1bit_relaxed(a, b)?,
                latent: None,
                status: SolveStatus::Relaxed,
            }),
            other => other.map(plain),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmodel::GroupSparseModel;
    use crate::measure::sign_measure;

    #[test]
    fn solver_names_round_trip() {
        for s in Solver::ALL {
            assert_eq!(s.name().parse::<Solver>().unwrap(), s);
            let json = serde_json::to_string(&s).unwrap();
            assert_eq!(json, format!("\"{}\"", s.name()));
        }
        assert!("pgd".parse::<Solver>().is_err());
    }

    #[test]
    fn settings_parse_per_solver_tables() {
        let s: SolverSettings = toml::from_str(
            "[pgd1bit]\nouter_iters = 30\n[biht]\nsparsity = 3\n[lasso]\nreg = 0.01\n",
        )
        .unwrap();
        assert_eq!(s.pgd1bit.outer_iters, 30);
        assert_eq!(s.biht.sparsity, 3);
        assert_eq!(s.lasso.reg, 0.01);
        assert!(s.lasso1bit.relax_if_infeasible);
        assert!(toml::from_str::<SolverSettings>("[pgd]\nx = 1").is_err());
    }

    #[test]
    fn dispatch_runs_every_solver() {
        let model = GroupSparseModel::with_default_amplitudes(12, 3).unwrap();
        let x = model
            .exact_project(&Array1::linspace(-1.0, 1.0, 12))
            .unwrap()
            .0;
        let a = MeasurementEnsemble::gaussian(40, 12, 3).unwrap();
        let b = sign_measure(&a, &x).unwrap();
        let y = a.apply(&x).unwrap();
        let mut settings = SolverSettings::default();
        settings.biht.sparsity = 3;
        for solver in Solver::ALL {
            let out = run_solver(solver, &a, &b, &y, &model, &settings, 1).unwrap();
            assert_eq!(out.estimate.len(), 12);
            assert_eq!(out.latent.is_some(), solver == Solver::Pgd1Bit);
            assert_eq!(out.status, SolveStatus::Ok);
        }
    }
}
