//! Projected gradient descent with a generative prior,
//! `x⁽ᵗ⁺¹⁾ = P_G(x⁽ᵗ⁾ + λAᵀ(b − sign(Ax⁽ᵗ⁾)))` from `x⁽⁰⁾ = 0`.

use ndarray::Array1;
use rayon::prelude::*;

use super::adam::{adam_minimize, clamp_to_ball};
use super::loss::onesided_l1;
use super::{RecoveryConfig, RecoveryResult};
use crate::error::{ensure_len, Error, Result};
use crate::genmodel::{sample_range_point, GenerativeModel};
use crate::measure::{sign, MeasurementEnsemble, SignPattern};
use crate::rng::{derive_seed, rng_from_seed};

const PROJECTION_STREAM: u64 = 0x5052_4f4a;

/// A point `x = G(z)` of the model range near some target.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub x: Array1<f64>,
    pub z: Array1<f64>,
    /// `‖G(z) − y‖₂²`.
    pub residual: f64,
}

fn random_start(model: &dyn GenerativeModel, seed: u64) -> Result<Array1<f64>> {
    Ok(sample_range_point(model, &mut rng_from_seed(seed))?.0)
}

/// Minimizes `‖G(z) − y‖₂²` from one start with Adam, clamping iterates to
/// the latent ball.
fn descend(
    model: &dyn GenerativeModel,
    y: &Array1<f64>,
    z0: &Array1<f64>,
    config: &RecoveryConfig,
) -> Result<Projection> {
    let r = model.latent_radius();
    let clamp = move |z: &mut Array1<f64>| clamp_to_ball(z, r);
    let out = adam_minimize(
        |z| {
            let diff = model.forward(z)? - y;
            let grad = model.vjp(z, &(&diff * 2.0))?;
            Ok((diff.dot(&diff), grad))
        },
        z0,
        config.inner_steps,
        config.inner_lr,
        Some(&clamp),
    )?;
    let x = model.forward(&out.best)?;
    Ok(Projection {
        x,
        z: out.best,
        residual: out.best_value,
    })
}

/// Approximate projection of `y` onto the range of `model`.
///
/// Uses the model's exact projector when it has one. Otherwise runs Adam on
/// `‖G(z) − y‖₂²` from `config.restarts` uniform random latents and keeps the
/// lowest residual (earliest restart on ties).
pub fn project_range(
    model: &dyn GenerativeModel,
    y: &Array1<f64>,
    config: &RecoveryConfig,
) -> Result<Projection> {
    config.validate()?;
    ensure_len("projection target", y.len(), model.ambient_dim())?;
    if let Some(exact) = model.exact_projection(y) {
        let (x, z) = exact?;
        let residual = (&x - y).mapv(|v| v * v).sum();
        return Ok(Projection { x, z, residual });
    }
    let attempts: Vec<Result<Projection>> = (0..config.restarts)
        .into_par_iter()
        .map(|restart| {
            let seed = derive_seed(config.seed, &[PROJECTION_STREAM, restart as u64]);
            descend(model, y, &random_start(model, seed)?, config)
        })
        .collect();
    pick_best(attempts, |p| p.residual)
}

fn pick_best<T>(attempts: Vec<Result<T>>, key: impl Fn(&T) -> f64) -> Result<T> {
    let mut best: Option<T> = None;
    let mut last_err = None;
    for attempt in attempts {
        match attempt {
            Ok(p) => {
                if best.as_ref().is_none_or(|b| key(&p) < key(b)) {
                    best = Some(p);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| last_err.unwrap_or_else(|| Error::invalid("no restarts were run")))
}

/// One pass of the PGD iteration. Returns the best iterate of the pass and
/// its iteration index.
fn run_restart(
    a: &MeasurementEnsemble,
    b: &SignPattern,
    bf: &Array1<f64>,
    model: &dyn GenerativeModel,
    config: &RecoveryConfig,
    restart: usize,
) -> Result<RecoveryResult> {
    let n = a.cols();
    let mut x = Array1::<f64>::zeros(n);
    let mut latent: Option<Array1<f64>> = None;
    let mut best: Option<RecoveryResult> = None;

    for t in 0..config.outer_iters {
        let resid: Array1<f64> = a
            .apply(&x)?
            .iter()
            .zip(bf)
            .map(|(&v, &bi)| bi - sign(v))
            .collect();
        let mut y = &x + &(a.apply_transpose(&resid)? * config.effective_step(a.rows()));
        if y.iter().all(|&v| v == 0.0) {
            // Only reachable from x = 0 when every bit is +1 (or λ = 0):
            // fall back to the back-projection Aᵀb.
            y = a.apply_transpose(bf)?;
        }
        let proj = match model.exact_projection(&y) {
            Some(exact) => {
                let (x, z) = exact?;
                Projection {
                    residual: (&x - &y).mapv(|v| v * v).sum(),
                    x,
                    z,
                }
            }
            None => {
                let z0 = match &latent {
                    Some(z) => z.clone(),
                    None => random_start(
                        model,
                        derive_seed(config.seed, &[PROJECTION_STREAM, restart as u64]),
                    )?,
                };
                descend(model, &y, &z0, config)?
            }
        };
        x = proj.x;
        latent = Some(proj.z.clone());
        let loss = onesided_l1(a, &x, b)?;
        if best.as_ref().is_none_or(|r| loss < r.final_loss) {
            best = Some(RecoveryResult {
                estimate: x.clone(),
                latent: Some(proj.z),
                final_loss: loss,
                iterations_run: config.outer_iters,
                restart_index: restart,
                best_iteration: t + 1,
            });
        }
    }
    Ok(best.expect("outer_iters >= 1"))
}

/// 1-bit recovery by projected gradient descent onto the range of `model`.
///
/// `A` is used as given; `config.step_scaling` selects whether λ multiplies
/// `Aᵀ(b − sign(Ax))` directly or after division by `m`. Each restart runs the
/// full iteration; within a restart the first projection starts from a
/// random latent and later ones warm-start from the previous latent. Models
/// with an exact projector run a single pass since restarts would be
/// identical. The returned estimate is the iterate with the smallest
/// one-sided ℓ1 loss over all passes and iterations (earliest on ties).
pub fn pgd_1bit(
    a: &MeasurementEnsemble,
    b: &SignPattern,
    model: &dyn GenerativeModel,
    config: &RecoveryConfig,
) -> Result<RecoveryResult> {
    config.validate()?;
    ensure_len("sign pattern", b.len(), a.rows())?;
    ensure_len("model output", model.ambient_dim(), a.cols())?;
    let bf = b.to_f64();
    let passes = if model.has_exact_projection() {
        1
    } else {
        config.restarts
    };
    let results: Vec<Result<RecoveryResult>> = (0..passes)
        .into_par_iter()
        .map(|restart| run_restart(a, b, &bf, model, config, restart))
        .collect();
    pick_best(results, |r| r.final_loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmodel::{Activation, FeedForwardModel, GroupSparseModel, Layer};
    use crate::measure::{geodesic_dist, hamming_dist, sign_measure};
    use crate::recover::onesided_l1;
    use crate::rng::{standard_normal_vec, uniform_ball};
    use ndarray::Array2;

    fn smooth_net(seed: u64) -> FeedForwardModel {
        let mut rng = rng_from_seed(seed);
        let mut layer = |inputs: usize, outputs: usize, act| {
            let w = Array2::from_shape_vec(
                (outputs, inputs),
                standard_normal_vec(&mut rng, inputs * outputs).to_vec(),
            )
            .unwrap()
                / (inputs as f64).sqrt();
            Layer::new(w, Array1::zeros(outputs), act).unwrap()
        };
        let layers = vec![
            layer(2, 8, Activation::Tanh),
            layer(8, 6, Activation::Identity),
        ];
        FeedForwardModel::new(layers, 1.0).unwrap()
    }

    #[test]
    fn projection_recovers_planted_point_of_smooth_net() {
        let model = smooth_net(5);
        let config = RecoveryConfig::default();
        let mut rng = rng_from_seed(8);
        for _ in 0..5 {
            let z = uniform_ball(&mut rng, 2, 1.0);
            let y = model.forward(&z).unwrap();
            let p = project_range(&model, &y, &config).unwrap();
            let err = (&p.x - &y).dot(&(&p.x - &y)).sqrt();
            assert!(err <= 1e-2, "error {err}");
            assert!(p.z.dot(&p.z).sqrt() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn projection_delegates_to_exact_projector() {
        let model = GroupSparseModel::with_default_amplitudes(12, 3).unwrap();
        let y = standard_normal_vec(&mut rng_from_seed(2), 12);
        let p = project_range(&model, &y, &RecoveryConfig::default()).unwrap();
        let (x, z) = model.exact_project(&y).unwrap();
        assert_eq!(p.x, x);
        assert_eq!(p.z, z);
        assert!(matches!(
            project_range(&model, &Array1::zeros(12), &RecoveryConfig::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn estimate_is_in_range_with_reproducible_loss() {
        let model = GroupSparseModel::with_default_amplitudes(30, 3).unwrap();
        let mut rng = rng_from_seed(11);
        for seed in 0..5 {
            let z = uniform_ball(&mut rng, 3, model.r());
            let x = model.forward(&z).unwrap();
            let a = MeasurementEnsemble::gaussian(300, 30, seed).unwrap();
            let b = sign_measure(&a, &x).unwrap();
            let res = pgd_1bit(&a, &b, &model, &RecoveryConfig::default()).unwrap();
            assert!(model.contains(&res.estimate, 1e-9));
            let again = onesided_l1(&a, &res.estimate, &b).unwrap();
            assert!((again - res.final_loss).abs() <= 1e-12);
            assert!(res.final_loss >= 0.0);
            assert!(geodesic_dist(&x, &res.estimate).unwrap() <= 0.2);
        }
    }

    #[test]
    fn best_loss_bounds_every_iterate() {
        let model = GroupSparseModel::with_default_amplitudes(30, 3).unwrap();
        let x = model
            .forward(&uniform_ball(&mut rng_from_seed(4), 3, model.r()))
            .unwrap();
        let a = MeasurementEnsemble::gaussian(100, 30, 9).unwrap();
        let b = sign_measure(&a, &x).unwrap();
        let config = RecoveryConfig::default();
        let res = pgd_1bit(&a, &b, &model, &config).unwrap();
        let bf = b.to_f64();
        let mut xt = Array1::<f64>::zeros(30);
        for _ in 0..config.outer_iters {
            let resid: Array1<f64> = a
                .apply(&xt)
                .unwrap()
                .iter()
                .zip(&bf)
                .map(|(&v, &bi)| bi - sign(v))
                .collect();
            let y = &xt + &(a.apply_transpose(&resid).unwrap() * config.step_size);
            xt = model.exact_project(&y).unwrap().0;
            assert!(res.final_loss <= onesided_l1(&a, &xt, &b).unwrap());
        }
    }

    #[test]
    fn all_positive_bits_use_back_projection() {
        let model = GroupSparseModel::with_default_amplitudes(12, 3).unwrap();
        let a = MeasurementEnsemble::gaussian(20, 12, 1).unwrap();
        let b = SignPattern::new(vec![1; 20]).unwrap();
        let config = RecoveryConfig {
            outer_iters: 1,
            ..RecoveryConfig::default()
        };
        let res = pgd_1bit(&a, &b, &model, &config).unwrap();
        let expected = model
            .exact_project(&a.apply_transpose(&b.to_f64()).unwrap())
            .unwrap()
            .0;
        assert_eq!(res.estimate, expected);
    }

    #[test]
    fn deterministic_and_loss_zero_iff_consistent() {
        let model = smooth_net(3);
        let x = model
            .forward(&uniform_ball(&mut rng_from_seed(6), 2, 1.0))
            .unwrap();
        let a = MeasurementEnsemble::gaussian(60, 6, 2).unwrap();
        let b = sign_measure(&a, &x).unwrap();
        let config = RecoveryConfig {
            outer_iters: 4,
            inner_steps: 50,
            seed: 17,
            ..RecoveryConfig::default()
        };
        let r1 = pgd_1bit(&a, &b, &model, &config).unwrap();
        let r2 = pgd_1bit(&a, &b, &model, &config).unwrap();
        assert_eq!(r1, r2);
        assert!(r1.restart_index < config.restarts);
        let bh = sign_measure(&a, &r1.estimate).unwrap();
        let ax = a.apply(&r1.estimate).unwrap();
        if ax.iter().all(|v| *v != 0.0) {
            assert_eq!(r1.final_loss == 0.0, hamming_dist(&bh, &b).unwrap() == 0.0);
        }
    }
}
