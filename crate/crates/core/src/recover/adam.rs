use ndarray::Array1;

use crate::error::{Error, Result};

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamOutcome {
    /// Iterate with the lowest objective value seen, `z0` included.
    pub best: Array1<f64>,
    pub best_value: f64,
    pub steps: usize,
}

/// Adam with the standard moment decay rates, keeping the best iterate.
///
/// `objective` returns `(value, gradient)`. After every update `project`
/// (if given) may modify the iterate in place, e.g. to pull it back into a
/// feasible ball. A non-finite value or gradient aborts with
/// [`Error::Diverged`] carrying the last finite iterate.
pub fn adam_minimize<F>(
    mut objective: F,
    z0: &Array1<f64>,
    steps: usize,
    lr: f64,
    project: Option<&dyn Fn(&mut Array1<f64>)>,
) -> Result<AdamOutcome>
where
    F: FnMut(&Array1<f64>) -> Result<(f64, Array1<f64>)>,
{
    if steps == 0 {
        return Err(Error::invalid("Adam needs at least one step"));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::invalid(format!(
            "learning rate must be positive, got {lr}"
        )));
    }
    let finite = |v: f64, g: &Array1<f64>| v.is_finite() && g.iter().all(|x| x.is_finite());

    let mut z = z0.clone();
    let (mut value, mut grad) = objective(&z)?;
    if !finite(value, &grad) {
        return Err(Error::Diverged {
            last_finite: z0.to_vec(),
            steps: 0,
        });
    }
    let mut best = z.clone();
    let mut best_value = value;
    let mut m = Array1::<f64>::zeros(z.len());
    let mut v = Array1::<f64>::zeros(z.len());

    for t in 1..=steps {
        let bias1 = 1.0 - BETA1.powi(t as i32);
        let bias2 = 1.0 - BETA2.powi(t as i32);
        ndarray::Zip::from(&mut z)
            .and(&mut m)
            .and(&mut v)
            .and(&grad)
            .for_each(|zi, mi, vi, &gi| {
                *mi = BETA1 * *mi + (1.0 - BETA1) * gi;
                *vi = BETA2 * *vi + (1.0 - BETA2) * gi * gi;
                *zi -= lr * (*mi / bias1) / ((*vi / bias2).sqrt() + EPSILON);
            });
        if let Some(p) = project {
            p(&mut z);
        }
        let last = z.clone();
        (value, grad) = objective(&z)?;
        if !finite(value, &grad) {
            return Err(Error::Diverged {
                last_finite: best.to_vec(),
                steps: t,
            });
        }
        if value < best_value {
            best_value = value;
            best = last;
        }
    }
    Ok(AdamOutcome {
        best,
        best_value,
        steps,
    })
}

/// Radially rescales `z` back onto the sphere of radius `r` if it left the ball.
pub fn clamp_to_ball(z: &mut Array1<f64>, r: f64) {
    let norm = z.dot(z).sqrt();
    if norm > r {
        *z *= r / norm;
    }
}
