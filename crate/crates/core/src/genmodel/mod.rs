//! Generative models `G: B₂ᵏ(r) → ℝⁿ` used as signal priors.
//!
//! Three concrete decoders are provided:
//!
//! * [`GroupSparseModel`], an explicit piecewise-linear construction whose
//!   range is a set of group-sparse unit vectors and which admits an exact
//!   projection;
//! * [`FeedForwardModel`], a fully connected network with 1-Lipschitz
//!   activations, loadable from weight files;
//! * [`NormalizedModel`], which maps any decoder onto the unit sphere on the
//!   part of the latent ball where the raw output norm exceeds `R_min`.

mod feedforward;
mod group_sparse;
mod normalized;

use std::fmt;

use ndarray::Array1;
use rand::Rng;

use crate::error::{ensure_len, Error, Result};
use crate::rng::uniform_ball;

pub use feedforward::{Activation, FeedForwardModel, Layer};
pub use group_sparse::GroupSparseModel;
pub use normalized::{normalize_model, NormalizedModel};

/// Relative slack on `‖z‖₂ ≤ r` so that radially rescaled iterates pass.
const LATENT_RADIUS_SLACK: f64 = 1e-9;
const SAMPLE_ATTEMPTS: usize = 1000;

pub trait GenerativeModel: Send + Sync + fmt::Debug {
    fn latent_dim(&self) -> usize;

    fn ambient_dim(&self) -> usize;

    fn latent_radius(&self) -> f64;

    fn forward(&self, z: &Array1<f64>) -> Result<Array1<f64>>;

    /// `Jᵀu` where `J` is the Jacobian of [`forward`](Self::forward) at `z`.
    fn vjp(&self, z: &Array1<f64>, u: &Array1<f64>) -> Result<Array1<f64>>;

    /// An upper bound on the Lipschitz constant of `forward` over the latent ball.
    fn lipschitz_bound(&self) -> f64;

    /// Whether every output lies on the unit sphere.
    fn is_normalized(&self) -> bool;

    /// Exact Euclidean projection onto the range, returning `(x, z)` with
    /// `forward(z) = x`. `None` when the model has no exact projector.
    fn exact_projection(&self, _y: &Array1<f64>) -> Option<Result<(Array1<f64>, Array1<f64>)>> {
        None
    }

    fn has_exact_projection(&self) -> bool {
        false
    }

    /// Range membership, when the model can decide it.
    fn range_contains(&self, _x: &Array1<f64>, _tol: f64) -> Option<bool> {
        None
    }

    fn describe(&self) -> String;
}

impl<T: GenerativeModel + ?Sized> GenerativeModel for Box<T> {
    fn latent_dim(&self) -> usize {
        (**self).latent_dim()
    }
    fn ambient_dim(&self) -> usize {
        (**self).ambient_dim()
    }
    fn latent_radius(&self) -> f64 {
        (**self).latent_radius()
    }
    fn forward(&self, z: &Array1<f64>) -> Result<Array1<f64>> {
        (**self).forward(z)
    }
    fn vjp(&self, z: &Array1<f64>, u: &Array1<f64>) -> Result<Array1<f64>> {
        (**self).vjp(z, u)
    }
    fn lipschitz_bound(&self) -> f64 {
        (**self).lipschitz_bound()
    }
    fn is_normalized(&self) -> bool {
        (**self).is_normalized()
    }
    fn exact_projection(&self, y: &Array1<f64>) -> Option<Result<(Array1<f64>, Array1<f64>)>> {
        (**self).exact_projection(y)
    }
    fn has_exact_projection(&self) -> bool {
        (**self).has_exact_projection()
    }
    fn range_contains(&self, x: &Array1<f64>, tol: f64) -> Option<bool> {
        (**self).range_contains(x, tol)
    }
    fn describe(&self) -> String {
        (**self).describe()
    }
}

/// Draws `z` uniformly from the latent ball, resampling until the model
/// accepts it (a normalized model rejects latents whose raw output is too
/// small). Returns `(z, G(z))`.
pub fn sample_range_point<R: Rng + ?Sized>(
    model: &dyn GenerativeModel,
    rng: &mut R,
) -> Result<(Array1<f64>, Array1<f64>)> {
    let mut last_err = None;
    for _ in 0..SAMPLE_ATTEMPTS {
        let z = uniform_ball(rng, model.latent_dim(), model.latent_radius());
        match model.forward(&z) {
            Ok(x) => return Ok((z, x)),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Lipschitz constant of `f ∘ g` from those of `f` and `g`.
pub fn lipschitz_compose(l_f: f64, l_g: f64) -> Result<f64> {
    if !(l_f >= 0.0 && l_g >= 0.0) {
        return Err(Error::invalid(format!(
            "Lipschitz constants must be non-negative, got {l_f} and {l_g}"
        )));
    }
    Ok(l_f * l_g)
}

pub(crate) fn check_latent(z: &Array1<f64>, k: usize, r: f64) -> Result<()> {
    ensure_len("latent", z.len(), k)?;
    let norm = z.dot(z).sqrt();
    if !(norm <= r * (1.0 + LATENT_RADIUS_SLACK)) {
        return Err(Error::invalid(format!(
            "latent norm {norm} exceeds radius {r}"
        )));
    }
    Ok(())
}

/// `(I − ggᵀ)u / ν` for `g = x/ν`: the transpose of the Jacobian of
/// `x ↦ x/‖x‖` at `x` with `‖x‖ = ν`, applied to `u`.
pub(crate) fn normalization_vjp(raw: &Array1<f64>, u: &Array1<f64>) -> Array1<f64> {
    let nu = raw.dot(raw).sqrt();
    let g = raw / nu;
    let along = g.dot(u);
    (u - &(g * along)) / nu
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{rng_from_seed, standard_normal_vec};

    #[test]
    fn compose_cases() {
        assert_eq!(lipschitz_compose(2.0, 3.0).unwrap(), 6.0);
        assert_eq!(lipschitz_compose(1.0, 4.5).unwrap(), 4.5);
        assert!(lipschitz_compose(-1.0, 1.0).is_err());
    }

    #[test]
    fn composed_maps_respect_product_bound() {
        // g(z) = 3z, f(y) = 2 sin(y) elementwise: L_g = 3, L_f = 2.
        let bound = lipschitz_compose(2.0, 3.0).unwrap();
        let mut rng = rng_from_seed(4);
        for _ in 0..10_000 {
            let a = standard_normal_vec(&mut rng, 3);
            let b = &a + &(standard_normal_vec(&mut rng, 3) * 0.1);
            let fa = (&a * 3.0).mapv(|v| 2.0 * v.sin());
            let fb = (&b * 3.0).mapv(|v| 2.0 * v.sin());
            let lhs = (&fa - &fb).mapv(|v| v * v).sum().sqrt();
            let rhs = bound * (&a - &b).mapv(|v| v * v).sum().sqrt();
            assert!(lhs <= rhs + 1e-12);
        }
    }
}
