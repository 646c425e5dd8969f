use ndarray::Array1;

use crate::error::{ensure_len, Result};
use crate::measure::{sign, MeasurementEnsemble, SignPattern};

/// One-sided ℓ1 objective `2‖[b ⊙ (Ax)]₋‖₁ = 2 Σ_i max(0, −b_i⟨a_i, x⟩)`.
///
/// Zero exactly when every measurement of `x` agrees in sign with `b`
/// (treating `⟨a_i, x⟩ = 0` as agreeing with either sign).
pub fn onesided_l1(a: &MeasurementEnsemble, x: &Array1<f64>, b: &SignPattern) -> Result<f64> {
    ensure_len("sign pattern", b.len(), a.rows())?;
    let ax = a.apply(x)?;
    Ok(2.0
        * ax.iter()
            .zip(b.bits())
            .map(|(v, &bi)| (-f64::from(bi) * v).max(0.0))
            .sum::<f64>())
}

/// `Aᵀ(sign(Ax) − b)`, a subgradient of [`onesided_l1`].
pub fn onesided_l1_subgrad(
    a: &MeasurementEnsemble,
    x: &Array1<f64>,
    b: &SignPattern,
) -> Result<Array1<f64>> {
    ensure_len("sign pattern", b.len(), a.rows())?;
    let ax = a.apply(x)?;
    let resid: Array1<f64> = ax
        .iter()
        .zip(b.bits())
        .map(|(&v, &bi)| sign(v) - f64::from(bi))
        .collect();
    a.apply_transpose(&resid)
}
