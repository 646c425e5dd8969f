//! Sparsity baselines: ℓ1-regularized least squares for linear measurements
//! and the ℓ1-minimization linear program for sign measurements.

use minilp::{ComparisonOp, LinearExpr, OptimizationDirection, Problem};
use ndarray::Array1;
use serde::Serialize;

use crate::error::{ensure_len, Error, Result};
use crate::measure::{MeasurementEnsemble, SignPattern};

pub const DEFAULT_LASSO_REG: f64 = 1e-4;
const LASSO_TOL: f64 = 1e-8;
const LASSO_MAX_ITERS: usize = 10_000;

/// Penalty on hinge violations in [`lasso_1bit_relaxed`].
pub const HINGE_PENALTY: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LassoSolution {
    #[serde(with = "crate::serde_vec")]
    pub estimate: Array1<f64>,
    /// `‖Ax̂ − y‖₂`, how far the relaxation is from the equality constraint.
    pub residual_norm: f64,
    pub objective: f64,
    pub iterations: usize,
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// `min ½‖Ax − y‖₂² + reg·‖x‖₁` by accelerated proximal gradient (FISTA)
/// with backtracking and function-value restarts.
///
/// Stops when the relative objective decrease drops below 1e−8 or after
/// 10⁴ iterations.
pub fn lasso_linear(a: &MeasurementEnsemble, y: &Array1<f64>, reg: f64) -> Result<LassoSolution> {
    ensure_len("measurements", y.len(), a.rows())?;
    if !(reg >= 0.0 && reg.is_finite()) {
        return Err(Error::invalid(format!(
            "regularization must be >= 0, got {reg}"
        )));
    }
    let smooth = |x: &Array1<f64>| -> Result<(f64, Array1<f64>)> {
        let r = a.apply(x)? - y;
        Ok((0.5 * r.dot(&r), r))
    };
    let l1 = |x: &Array1<f64>| x.mapv(f64::abs).sum();

    let mut x = Array1::<f64>::zeros(a.cols());
    let (f0, mut r) = smooth(&x)?;
    let mut objective = f0 + reg * l1(&x);
    let mut w = x.clone();
    let mut momentum = 1.0_f64;
    let mut lipschitz = 1.0;
    let mut iterations = 0;
    while iterations < LASSO_MAX_ITERS {
        iterations += 1;
        let (f_w, r_w) = smooth(&w)?;
        let grad = a.apply_transpose(&r_w)?;
        let (x_new, f_new, r_new) = loop {
            let step = 1.0 / lipschitz;
            let cand = (&w - &(&grad * step)).mapv(|v| soft_threshold(v, reg * step));
            let (f_c, r_c) = smooth(&cand)?;
            let d = &cand - &w;
            if f_c <= f_w + grad.dot(&d) + 0.5 * lipschitz * d.dot(&d) * (1.0 + 1e-12) {
                break (cand, f_c, r_c);
            }
            lipschitz *= 2.0;
        };
        let obj_new = f_new + reg * l1(&x_new);
        if obj_new > objective {
            // Momentum overshot: restart from the last accepted point.
            momentum = 1.0;
            w = x.clone();
            continue;
        }
        let decrease = objective - obj_new;
        let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        w = &x_new + &((&x_new - &x) * ((momentum - 1.0) / next));
        momentum = next;
        x = x_new;
        r = r_new;
        let old = objective;
        objective = obj_new;
        if obj_new <= f64::MIN_POSITIVE || decrease <= LASSO_TOL * old {
            break;
        }
    }
    Ok(LassoSolution {
        residual_norm: r.dot(&r).sqrt(),
        estimate: x,
        objective,
        iterations,
    })
}

/// Sets up `min Σ(u + v) [+ C·Σh]` over `x = u − v` with the sign constraints
/// `b_i⟨a_i, x⟩ [+ h_i] ≥ 0` and the normalization `Σ_i b_i⟨a_i, x⟩ = m`.
fn solve_lp(a: &MeasurementEnsemble, b: &SignPattern, hinge: Option<f64>) -> Result<Array1<f64>> {
    ensure_len("sign pattern", b.len(), a.rows())?;
    let (m, n) = (a.rows(), a.cols());
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let pos: Vec<_> = (0..n)
        .map(|_| problem.add_var(1.0, (0.0, f64::INFINITY)))
        .collect();
    let neg: Vec<_> = (0..n)
        .map(|_| problem.add_var(1.0, (0.0, f64::INFINITY)))
        .collect();
    let slack: Option<Vec<_>> = hinge.map(|c| {
        (0..m)
            .map(|_| problem.add_var(c, (0.0, f64::INFINITY)))
            .collect()
    });

    let bf = b.to_f64();
    for (i, row) in a.matrix().outer_iter().enumerate() {
        let mut expr = LinearExpr::empty();
        for j in 0..n {
            let c = bf[i] * row[j];
            expr.add(pos[j], c);
            expr.add(neg[j], -c);
        }
        if let Some(h) = &slack {
            expr.add(h[i], 1.0);
        }
        problem.add_constraint(expr, ComparisonOp::Ge, 0.0);
    }
    let total = a.apply_transpose(&bf)?;
    let mut expr = LinearExpr::empty();
    for j in 0..n {
        expr.add(pos[j], total[j]);
        expr.add(neg[j], -total[j]);
    }
    problem.add_constraint(expr, ComparisonOp::Eq, m as f64);

    let solution = problem.solve().map_err(|e| match e {
        minilp::Error::Infeasible => Error::Infeasible,
        minilp::Error::Unbounded => Error::invalid("1-bit Lasso program is unbounded"),
    })?;
    Ok((0..n)
        .map(|j| solution[pos[j]] - solution[neg[j]])
        .collect())
}

/// `min ‖x‖₁` subject to `b_i⟨a_i, x⟩ ≥ 0` for every row and
/// `Σ_i b_i⟨a_i, x⟩ = m`. Together the constraints say `sign(Ax) = b` (up to
/// rows where `⟨a_i, x⟩ = 0`) and `‖Ax‖₁ = m`. Solved with a simplex LP
/// solver; noisy patterns can make the program [`Error::Infeasible`].
pub fn lasso_1bit(a: &MeasurementEnsemble, b: &SignPattern) -> Result<Array1<f64>> {
    solve_lp(a, b, None)
}

/// The hinge-relaxed fallback `min ‖x‖₁ + C·Σ_i max(0, −b_i⟨a_i, x⟩)` subject
/// to `Σ_i b_i⟨a_i, x⟩ = m`, with `C` = [`HINGE_PENALTY`].
pub fn lasso_1bit_relaxed(a: &MeasurementEnsemble, b: &SignPattern) -> Result<Array1<f64>> {
    solve_lp(a, b, Some(HINGE_PENALTY))
}
