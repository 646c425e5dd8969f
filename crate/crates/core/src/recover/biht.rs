use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::measure::{sign, MeasurementEnsemble, SignPattern};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BihtConfig {
    /// Number of entries kept by hard thresholding.
    pub sparsity: usize,
    pub step_size: f64,
    pub iters: usize,
    /// Renormalize after every thresholding step instead of only at the end.
    pub normalize_each_iter: bool,
}

impl Default for BihtConfig {
    fn default() -> Self {
        Self {
            sparsity: 1,
            step_size: 1.0,
            iters: 100,
            normalize_each_iter: false,
        }
    }
}

/// Keeps the `s` largest-magnitude entries (lowest index first on ties).
pub fn hard_threshold(v: &Array1<f64>, s: usize) -> Array1<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[j].abs().total_cmp(&v[i].abs()).then(i.cmp(&j)));
    let mut out = Array1::zeros(v.len());
    for &i in order.iter().take(s) {
        out[i] = v[i];
    }
    out
}

/// Binary iterative hard thresholding:
/// `x⁽ᵗ⁺¹⁾ = H_s(x⁽ᵗ⁾ + (λ/2)·Aᵀ(b − sign(Ax⁽ᵗ⁾)))` from `x⁽⁰⁾ = 0`, with the
/// final iterate scaled to unit norm.
pub fn biht(a: &MeasurementEnsemble, b: &SignPattern, config: &BihtConfig) -> Result<Array1<f64>> {
    ensure_len("sign pattern", b.len(), a.rows())?;
    let n = a.cols();
    if config.sparsity == 0 || config.sparsity > n {
        return Err(Error::invalid(format!(
            "sparsity must lie in 1..={n}, got {}",
            config.sparsity
        )));
    }
    if !(config.step_size > 0.0) || config.iters == 0 {
        return Err(Error::invalid(
            "BIHT needs a positive step size and at least one iteration",
        ));
    }
    let bf = b.to_f64();
    let mut x = Array1::<f64>::zeros(n);
    for _ in 0..config.iters {
        let resid: Array1<f64> = a
            .apply(&x)?
            .iter()
            .zip(&bf)
            .map(|(&v, &bi)| bi - sign(v))
            .collect();
        let step = a.apply_transpose(&resid)? * (config.step_size / 2.0);
        x = hard_threshold(&(&x + &step), config.sparsity);
        if config.normalize_each_iter {
            let norm = x.dot(&x).sqrt();
            if norm > 0.0 {
                x /= norm;
            }
        }
    }
    let norm = x.dot(&x).sqrt();
    if norm == 0.0 {
        return Err(Error::invalid(
            "BIHT iterate is zero (all measurements already agree with x = 0)",
        ));
    }
    Ok(x / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::sign_measure;
    use ndarray::array;

    #[test]
    fn threshold_ties_prefer_lower_index() {
        let v = array![1.0, -3.0, 3.0, 0.5];
        assert_eq!(hard_threshold(&v, 1), array![0.0, -3.0, 0.0, 0.0]);
        assert_eq!(hard_threshold(&v, 2), array![0.0, -3.0, 3.0, 0.0]);
        assert_eq!(hard_threshold(&v, 4), v);
    }

    #[test]
    fn full_sparsity_is_plain_subgradient_iteration() {
        let a = MeasurementEnsemble::gaussian(30, 5, 2).unwrap();
        let b = sign_measure(&a, &array![0.5, -0.5, 0.5, 0.1, -0.2]).unwrap();
        let config = BihtConfig {
            sparsity: 5,
            step_size: 0.1,
            iters: 7,
            normalize_each_iter: false,
        };
        let got = biht(&a, &b, &config).unwrap();
        let bf = b.to_f64();
        let mut x = Array1::<f64>::zeros(5);
        for _ in 0..7 {
            let sx = a.apply(&x).unwrap().mapv(sign);
            x = &x + &(a.matrix().t().dot(&(&bf - &sx)) * 0.05);
        }
        let x = &x / x.dot(&x).sqrt();
        assert!((&got - &x).mapv(f64::abs).sum() < 1e-12);
    }

    #[test]
    fn output_is_sparse_unit_vector() {
        let a = MeasurementEnsemble::gaussian(100, 20, 5).unwrap();
        let mut x = Array1::zeros(20);
        x[2] = 0.6;
        x[11] = -0.8;
        let b = sign_measure(&a, &x).unwrap();
        for normalize_each_iter in [false, true] {
            let config = BihtConfig {
                sparsity: 3,
                step_size: 1.0,
                iters: 50,
                normalize_each_iter,
            };
            let xh = biht(&a, &b, &config).unwrap();
            assert!(xh.iter().filter(|v| **v != 0.0).count() <= 3);
            assert!((xh.dot(&xh) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_excess_sparsity() {
        let a = MeasurementEnsemble::gaussian(10, 4, 5).unwrap();
        let b = SignPattern::new(vec![1; 10]).unwrap();
        let config = BihtConfig {
            sparsity: 5,
            ..BihtConfig::default()
        };
        assert!(matches!(
            biht(&a, &b, &config),
            Err(Error::InvalidArgument(_))
        ));
    }
}
