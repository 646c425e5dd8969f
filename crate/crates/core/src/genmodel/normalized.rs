use ndarray::Array1;

use super::{normalization_vjp, GenerativeModel};
use crate::error::{Error, Result};

/// `G(z) = G̃(z)/‖G̃(z)‖₂`, defined where `‖G̃(z)‖₂ > R_min`.
///
/// The Lipschitz bound reported is the inner bound divided by `R_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedModel<M> {
    inner: M,
    r_min: f64,
}

impl<M: GenerativeModel> NormalizedModel<M> {
    pub fn new(inner: M, r_min: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_min.is_finite()) {
            return Err(Error::invalid(format!(
                "R_min must be positive, got {r_min}"
            )));
        }
        Ok(Self { inner, r_min })
    }

    pub fn inner(&self) -> &M {
        &self.inner
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    /// Whether `z` lies in the domain `{z : ‖G̃(z)‖₂ > R_min}`.
    pub fn in_domain(&self, z: &Array1<f64>) -> Result<bool> {
        let raw = self.inner.forward(z)?;
        Ok(raw.dot(&raw).sqrt() > self.r_min)
    }

    fn raw_checked(&self, z: &Array1<f64>) -> Result<Array1<f64>> {
        let raw = self.inner.forward(z)?;
        let norm = raw.dot(&raw).sqrt();
        if !(norm > self.r_min) {
            return Err(Error::DomainViolation {
                norm,
                r_min: self.r_min,
            });
        }
        Ok(raw)
    }
}

/// Wraps `inner` so that its outputs are normalized onto the unit sphere.
pub fn normalize_model<M: GenerativeModel>(inner: M, r_min: f64) -> Result<NormalizedModel<M>> {
    NormalizedModel::new(inner, r_min)
}

impl<M: GenerativeModel> GenerativeModel for NormalizedModel<M> {
    fn latent_dim(&self) -> usize {
        self.inner.latent_dim()
    }

    fn ambient_dim(&self) -> usize {
        self.inner.ambient_dim()
    }

    fn latent_radius(&self) -> f64 {
        self.inner.latent_radius()
    }

    fn forward(&self, z: &Array1<f64>) -> Result<Array1<f64>> {
        let raw = self.raw_checked(z)?;
        let norm = raw.dot(&raw).sqrt();
        Ok(raw / norm)
    }

    fn vjp(&self, z: &Array1<f64>, u: &Array1<f64>) -> Result<Array1<f64>> {
        let raw = self.raw_checked(z)?;
        self.inner.vjp(z, &normalization_vjp(&raw, u))
    }

    fn lipschitz_bound(&self) -> f64 {
        self.inner.lipschitz_bound() / self.r_min
    }

    fn is_normalized(&self) -> bool {
        true
    }

    fn describe(&self) -> String {
        format!(
            "normalized({}, R_min={})",
            self.inner.describe(),
            self.r_min
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genmodel::{Activation, FeedForwardModel, Layer};
    use crate::rng::{rng_from_seed, standard_normal_vec, uniform_ball};
    use ndarray::{array, Array2};

    fn identity_net(scale: f64, dim: usize) -> FeedForwardModel {
        FeedForwardModel::new(
            vec![Layer::new(
                Array2::eye(dim) * scale,
                Array1::zeros(dim),
                Activation::Identity,
            )
            .unwrap()],
            10.0,
        )
        .unwrap()
    }

    #[test]
    fn unit_output_is_unchanged() {
        let g = normalize_model(identity_net(1.0, 2), 0.5).unwrap();
        let z = array![0.6, 0.8];
        let x = g.forward(&z).unwrap();
        assert!((&x - &z).mapv(f64::abs).sum() < 1e-15);
    }

    #[test]
    fn normalizes_three_four() {
        let g = normalize_model(identity_net(1.0, 2), 1.0).unwrap();
        assert_eq!(g.forward(&array![3.0, 4.0]).unwrap(), array![0.6, 0.8]);
    }

    #[test]
    fn floor_breach_is_domain_violation() {
        let g = normalize_model(identity_net(1e-6, 2), 1e-3).unwrap();
        assert!(matches!(
            g.forward(&array![1.0, 0.0]),
            Err(Error::DomainViolation { .. })
        ));
        assert!(!g.in_domain(&array![1.0, 0.0]).unwrap());
        assert!(normalize_model(identity_net(1.0, 2), 0.0).is_err());
    }

    #[test]
    fn lipschitz_divides_by_floor() {
        let g = normalize_model(identity_net(2.0, 3), 0.25).unwrap();
        assert_eq!(g.lipschitz_bound(), (3.0 * 2.0) / 0.25);
    }

    #[test]
    fn outputs_have_unit_norm_and_vjp_matches_fd() {
        let mut rng = rng_from_seed(6);
        let w = standard_normal_vec(&mut rng, 15)
            .into_shape_with_order((5, 3))
            .unwrap();
        let net = FeedForwardModel::new(
            vec![Layer::new(w, standard_normal_vec(&mut rng, 5), Activation::Tanh).unwrap()],
            1.0,
        )
        .unwrap();
        let g = normalize_model(net, 0.05).unwrap();
        for _ in 0..200 {
            let z = uniform_ball(&mut rng, 3, 1.0);
            let Ok(x) = g.forward(&z) else { continue };
            assert!((x.dot(&x).sqrt() - 1.0).abs() <= 1e-12);
            let u = standard_normal_vec(&mut rng, 5);
            let grad = g.vjp(&z, &u).unwrap();
            let h = 1e-6;
            for i in 0..3 {
                let mut zp = z.clone();
                let mut zm = z.clone();
                zp[i] += h;
                zm[i] -= h;
                let fd =
                    (u.dot(&g.forward(&zp).unwrap()) - u.dot(&g.forward(&zm).unwrap())) / (2.0 * h);
                assert!((fd - grad[i]).abs() < 1e-6 * (1.0 + fd.abs()));
            }
        }
    }
}
