//! Monte Carlo checks of the embedding `Φ(x) = sign(Ax)`: how well Hamming
//! distance between sign patterns tracks geodesic distance on the range of a
//! generative model, the hyperplane-separation probabilities behind it, and
//! latent-space ε-nets.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{ensure_len, Error, Result};
use crate::genmodel::{sample_range_point, GenerativeModel};
use crate::measure::{
    angle_between, geodesic_dist, hamming_dist, noisy_linear_measure, noisy_sign_measure,
    sign_measure, MeasurementEnsemble, NoiseSpec, UNIT_NORM_TOL,
};
use crate::recover::{run_solver, Solver, SolverSettings};
use crate::rng::{derive_seed, rng_from_seed, standard_normal_vec, uniform_ball};

/// Quantile levels reported by [`bese_deviation`].
pub const REPORT_QUANTILES: [f64; 4] = [0.5, 0.9, 0.99, 1.0];

/// Slack on the metric-equivalence check run on every sampled pair.
const SANDWICH_TOL: f64 = 1e-12;

/// Pairs pushed through `A` per matrix product.
const PAIR_BATCH: usize = 256;

/// Largest number of grid points [`build_epsilon_net`] will generate.
pub const NET_POINT_BUDGET: usize = 10_000_000;

const PLANT_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const SOLVER_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingReport {
    pub num_pairs: usize,
    /// Largest `|d_S(x, s) − d_H(Φx, Φs)|` over the sampled pairs.
    pub max_dev: f64,
    pub mean_dev: f64,
    /// `(q, value)` at the levels in [`REPORT_QUANTILES`].
    pub quantiles: Vec<(f64, f64)>,
    pub m: usize,
    pub model_id: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalEmbeddingReport {
    pub eps: f64,
    pub far_count: usize,
    pub near_count: usize,
    /// Smallest Hamming distance among pairs with `‖x − s‖₂ > ε`.
    pub far_pairs_min_dh: Option<f64>,
    /// Largest Hamming distance among pairs with `‖x − s‖₂ ≤ ε`.
    pub near_pairs_max_dh: Option<f64>,
    /// Far pairs with Hamming distance below `ε/96`.
    pub far_below_eps_over_96: usize,
}

/// Outcome of a norm-preservation experiment for one fixed vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormPreservationReport {
    pub trials: usize,
    /// Trials with `(1 − ε)‖x‖² ≤ ‖Ax‖²/m ≤ (1 + ε)‖x‖²`.
    pub within: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `2·exp(−ε²(1 − ε)m/4)`, the per-trial failure bound.
    pub failure_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonNet {
    #[serde(serialize_with = "crate::serde_vec::many::serialize")]
    pub points: Vec<Array1<f64>>,
    pub radius: f64,
    pub ball_radius: f64,
    /// `k·ln(4r/δ)`, the log-cardinality of an optimal net. Grid nets may
    /// exceed it.
    pub declared_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoisyBoundTrial {
    pub d_s: f64,
    pub tau1: f64,
    pub tau2: f64,
    /// `ε̂ + τ₁ + τ₂ − d_S`; negative means the bound was violated.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NoisyBoundReport {
    pub eps_hat: f64,
    pub violations: usize,
    pub tau1_mean: f64,
    pub tau2_mean: f64,
    pub d_s_mean: f64,
    pub min_margin: f64,
    pub mean_margin: f64,
    pub trials: Vec<NoisyBoundTrial>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyBoundSetup {
    pub noise: NoiseSpec,
    pub solver: Solver,
    pub settings: SolverSettings,
    pub trials: usize,
    /// Pairs used by the companion [`bese_deviation`] run that estimates ε̂.
    pub bese_pairs: usize,
    pub seed: u64,
}

fn check_unit(name: &str, v: &Array1<f64>) -> Result<()> {
    let norm = v.dot(v).sqrt();
    if (norm - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::invalid(format!(
            "{name} must be a unit vector, norm is {norm}"
        )));
    }
    Ok(())
}

fn require_normalized(model: &dyn GenerativeModel) -> Result<()> {
    if !model.is_normalized() {
        return Err(Error::invalid(format!(
            "{} does not map onto the unit sphere",
            model.describe()
        )));
    }
    Ok(())
}

fn euclidean(x: ArrayView1<f64>, s: ArrayView1<f64>) -> f64 {
    x.iter()
        .zip(s)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Hamming distance between the sign patterns of two columns of `AX`.
fn column_hamming(ax: &Array2<f64>, i: usize, j: usize) -> f64 {
    let m = ax.nrows();
    let diff = (0..m)
        .filter(|&r| (ax[[r, i]] < 0.0) != (ax[[r, j]] < 0.0))
        .count();
    diff as f64 / m as f64
}

struct PairStats {
    euclid: f64,
    d_s: f64,
    d_h: f64,
}

/// Measures every pair with one matrix product per batch.
fn measure_pairs(a: &MeasurementEnsemble, pairs: &[(Array1<f64>, Array1<f64>)]) -> Vec<PairStats> {
    let n = a.cols();
    let mut out = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(PAIR_BATCH) {
        let mut points = Array2::<f64>::zeros((n, 2 * chunk.len()));
        for (p, (x, s)) in chunk.iter().enumerate() {
            points.column_mut(2 * p).assign(x);
            points.column_mut(2 * p + 1).assign(s);
        }
        let ax = a.matrix().dot(&points);
        for (p, (x, s)) in chunk.iter().enumerate() {
            let d_s = angle_between(x, s) / PI;
            let euclid = euclidean(x.view(), s.view());
            assert!(
                euclid / PI <= d_s + SANDWICH_TOL && d_s <= euclid / 2.0 + SANDWICH_TOL,
                "metric equivalence violated: ‖x − s‖ = {euclid}, d_S = {d_s}"
            );
            out.push(PairStats {
                euclid,
                d_s,
                d_h: column_hamming(&ax, 2 * p, 2 * p + 1),
            });
        }
    }
    out
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Estimates how far `Φ` is from an isometry between geodesic and Hamming
/// distance on the range of `model`, over `num_pairs` pairs of latents drawn
/// uniformly from the latent ball.
pub fn bese_deviation(
    model: &dyn GenerativeModel,
    a: &MeasurementEnsemble,
    num_pairs: usize,
    seed: u64,
) -> Result<EmbeddingReport> {
    require_normalized(model)?;
    ensure_len("model output", model.ambient_dim(), a.cols())?;
    if num_pairs == 0 {
        return Err(Error::invalid("need at least one pair"));
    }
    let mut rng = rng_from_seed(seed);
    let pairs = (0..num_pairs)
        .map(|_| {
            let x = sample_range_point(model, &mut rng)?.1;
            let s = sample_range_point(model, &mut rng)?.1;
            Ok((x, s))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut devs: Vec<f64> = measure_pairs(a, &pairs)
        .iter()
        .map(|p| (p.d_s - p.d_h).abs())
        .collect();
    devs.sort_by(f64::total_cmp);
    Ok(EmbeddingReport {
        num_pairs,
        max_dev: *devs.last().unwrap(),
        mean_dev: devs.iter().sum::<f64>() / num_pairs as f64,
        quantiles: REPORT_QUANTILES
            .iter()
            .map(|&q| (q, quantile(&devs, q)))
            .collect(),
        m: a.rows(),
        model_id: model.describe(),
        seed,
    })
}

/// Splits sampled pairs of range points into far (`‖x − s‖₂ > ε`) and near
/// ones and reports the extreme Hamming distances of each group.
///
/// Half of the pairs are independent uniform latents. The other half perturb
/// a uniform latent by a uniform offset of radius `2ε/L` (kept inside the
/// ball), so that the near group is populated even when `ε` is small.
pub fn local_embedding_check(
    model: &dyn GenerativeModel,
    a: &MeasurementEnsemble,
    eps: f64,
    num_pairs: usize,
    seed: u64,
) -> Result<LocalEmbeddingReport> {
    require_normalized(model)?;
    ensure_len("model output", model.ambient_dim(), a.cols())?;
    if !(eps > 0.0) {
        return Err(Error::invalid(format!("eps must be positive, got {eps}")));
    }
    let (k, r) = (model.latent_dim(), model.latent_radius());
    let offset = 2.0 * eps / model.lipschitz_bound().max(f64::MIN_POSITIVE);
    let mut rng = rng_from_seed(seed);
    let mut pairs = Vec::with_capacity(num_pairs);
    for i in 0..num_pairs {
        let (z, x) = sample_range_point(model, &mut rng)?;
        let s = if i % 2 == 0 {
            sample_range_point(model, &mut rng)?.1
        } else {
            loop {
                let mut w = &z + &uniform_ball(&mut rng, k, offset.min(2.0 * r));
                let norm = w.dot(&w).sqrt();
                if norm > r {
                    w *= r / norm;
                }
                if let Ok(s) = model.forward(&w) {
                    break s;
                }
            }
        };
        pairs.push((x, s));
    }
    let mut report = LocalEmbeddingReport {
        eps,
        far_count: 0,
        near_count: 0,
        far_pairs_min_dh: None,
        near_pairs_max_dh: None,
        far_below_eps_over_96: 0,
    };
    for p in measure_pairs(a, &pairs) {
        if p.euclid > eps {
            report.far_count += 1;
            report.far_pairs_min_dh = Some(report.far_pairs_min_dh.map_or(p.d_h, |v| v.min(p.d_h)));
            if p.d_h < eps / 96.0 {
                report.far_below_eps_over_96 += 1;
            }
        } else {
            report.near_count += 1;
            report.near_pairs_max_dh =
                Some(report.near_pairs_max_dh.map_or(p.d_h, |v| v.max(p.d_h)));
        }
    }
    Ok(report)
}

fn separation_frequency(
    x: &Array1<f64>,
    s: &Array1<f64>,
    trials: usize,
    seed: u64,
    event: impl Fn(f64, f64) -> bool,
) -> f64 {
    let mut rng = rng_from_seed(seed);
    let n = x.len();
    let mut hits = 0usize;
    for _ in 0..trials {
        let (mut ax, mut as_) = (0.0, 0.0);
        for j in 0..n {
            let g: f64 = rng.sample(StandardNormal);
            ax += g * x[j];
            as_ += g * s[j];
        }
        if event(ax, as_) {
            hits += 1;
        }
    }
    hits as f64 / trials as f64
}

fn check_pair(x: &Array1<f64>, s: &Array1<f64>, eps: f64, trials: usize) -> Result<f64> {
    ensure_len("s", s.len(), x.len())?;
    check_unit("x", x)?;
    check_unit("s", s)?;
    if !(eps > 0.0) || trials == 0 {
        return Err(Error::invalid("need eps > 0 and at least one trial"));
    }
    Ok(euclidean(x.view(), s.view()))
}

/// Frequency over `trials` Gaussian vectors `a` of
/// `{⟨a, x⟩ > ε/12 and ⟨a, s⟩ < −ε/12}`, for unit `x`, `s` with
/// `‖x − s‖₂ ≥ ε`. The probability is at least `ε/12`.
pub fn verify_sep_lemma(
    x: &Array1<f64>,
    s: &Array1<f64>,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let dist = check_pair(x, s, eps, trials)?;
    if dist < eps {
        return Err(Error::invalid(format!(
            "pair is not separated: ‖x − s‖ = {dist} < ε = {eps}"
        )));
    }
    let e0 = eps / 12.0;
    Ok(separation_frequency(x, s, trials, seed, |u, v| {
        u > e0 && v < -e0
    }))
}

/// Frequency of `{both ⟨a, x⟩, ⟨a, s⟩ > ε/12} ∪ {both < −ε/12}` for unit
/// `x`, `s` with `‖x − s‖₂ ≤ ε`. The probability is at least `1 − 2ε/3`.
pub fn verify_sep_lemma_near(
    x: &Array1<f64>,
    s: &Array1<f64>,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    let dist = check_pair(x, s, eps, trials)?;
    if dist > eps {
        return Err(Error::invalid(format!(
            "pair is not close: ‖x − s‖ = {dist} > ε = {eps}"
        )));
    }
    let e0 = eps / 12.0;
    Ok(separation_frequency(x, s, trials, seed, |u, v| {
        (u > e0 && v > e0) || (u < -e0 && v < -e0)
    }))
}

/// Mean of `d_H(Φx, Φs)` over `trials` independent `m × n` Gaussian
/// matrices. Its expectation is `d_S(x, s)`.
pub fn verify_sign_flip_prob(
    x: &Array1<f64>,
    s: &Array1<f64>,
    m: usize,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    ensure_len("s", s.len(), x.len())?;
    check_unit("x", x)?;
    check_unit("s", s)?;
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let mut total = 0.0;
    for t in 0..trials {
        let a = MeasurementEnsemble::gaussian(m, x.len(), derive_seed(seed, &[t as u64]))?;
        total += hamming_dist(&sign_measure(&a, x)?, &sign_measure(&a, s)?)?;
    }
    Ok(total / trials as f64)
}

/// Draws `trials` fresh `m × n` Gaussian matrices and counts how often
/// `‖Ax‖²/m` stays within a factor `1 ± ε` of `‖x‖²`.
pub fn verify_norm_preservation(
    x: &Array1<f64>,
    m: usize,
    eps: f64,
    trials: usize,
    seed: u64,
) -> Result<NormPreservationReport> {
    if !(eps > 0.0 && eps < 1.0) || trials == 0 {
        return Err(Error::invalid("need 0 < eps < 1 and at least one trial"));
    }
    let norm2 = x.dot(x);
    if norm2 == 0.0 {
        return Err(Error::invalid("x must be non-zero"));
    }
    let mut report = NormPreservationReport {
        trials,
        within: 0,
        min_ratio: f64::INFINITY,
        max_ratio: 0.0,
        failure_bound: 2.0 * (-eps * eps * (1.0 - eps) * m as f64 / 4.0).exp(),
    };
    for t in 0..trials {
        let a = MeasurementEnsemble::gaussian(m, x.len(), derive_seed(seed, &[t as u64]))?;
        let ax = a.apply(x)?;
        let ratio = ax.dot(&ax) / m as f64 / norm2;
        report.min_ratio = report.min_ratio.min(ratio);
        report.max_ratio = report.max_ratio.max(ratio);
        if (1.0 - eps..=1.0 + eps).contains(&ratio) {
            report.within += 1;
        }
    }
    Ok(report)
}

/// A δ-net of the centred ball `B₂ᵏ(r)`: the cubic grid of pitch `2δ/√k`
/// (whose cells have half-diagonal δ), keeping the points within `r + δ` of
/// the origin and pulling those outside the ball radially onto its surface.
pub fn build_epsilon_net(k: usize, r: f64, delta: f64) -> Result<EpsilonNet> {
    if k == 0 || !(r > 0.0) || !(delta > 0.0) {
        return Err(Error::invalid("need k >= 1, r > 0 and delta > 0"));
    }
    let declared_bound = k as f64 * (4.0 * r / delta).ln();
    if delta >= r {
        return Ok(EpsilonNet {
            points: vec![Array1::zeros(k)],
            radius: delta,
            ball_radius: r,
            declared_bound,
        });
    }
    let pitch = 2.0 * delta / (k as f64).sqrt();
    let reach = ((r + delta) / pitch).floor() as i64;
    let side = (2 * reach + 1) as f64;
    if side.powi(k as i32) > NET_POINT_BUDGET as f64 {
        return Err(Error::ResourceLimit(format!(
            "grid net would have {side}^{k} candidate points"
        )));
    }
    let mut points = Vec::new();
    let mut idx = vec![-reach; k];
    loop {
        let mut c: Array1<f64> = idx.iter().map(|&i| i as f64 * pitch).collect();
        let norm = c.dot(&c).sqrt();
        if norm <= r + delta {
            if norm > r {
                c *= r / norm;
            }
            points.push(c);
        }
        let mut d = 0;
        while d < k && idx[d] == reach {
            idx[d] = -reach;
            d += 1;
        }
        if d == k {
            break;
        }
        idx[d] += 1;
    }
    Ok(EpsilonNet {
        points,
        radius: delta,
        ball_radius: r,
        declared_bound,
    })
}

impl EpsilonNet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn log_cardinality(&self) -> f64 {
        (self.points.len() as f64).ln()
    }

    /// Distance from `p` to the nearest net point.
    pub fn distance_to(&self, p: &Array1<f64>) -> f64 {
        self.points
            .iter()
            .map(|c| euclidean(c.view(), p.view()))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest distance from `probes` uniform points of the ball to the net.
    /// The net covers the ball if this never exceeds the radius.
    pub fn certify(&self, probes: usize, seed: u64) -> f64 {
        let k = self.points.first().map_or(0, |p| p.len());
        let mut rng = rng_from_seed(seed);
        (0..probes)
            .map(|_| self.distance_to(&uniform_ball(&mut rng, k, self.ball_radius)))
            .fold(0.0, f64::max)
    }
}

/// Empirical check of `d_S(x, x̂) ≤ ε̂ + τ₁ + τ₂` under noisy measurements.
///
/// `ε̂` is the `max_dev` of a [`bese_deviation`] run on the same model and
/// matrix. Each trial plants `x = G(z)`, draws the noisy pattern `b`, sets
/// `τ₁ = d_H(b, sign(Ax))`, recovers `x̂` from `b`, and sets
/// `τ₂ = d_H(sign(Ax̂), b)`. Estimates are compared after scaling to unit
/// norm.
pub fn noisy_bound_check(
    model: &dyn GenerativeModel,
    a: &MeasurementEnsemble,
    setup: &NoisyBoundSetup,
) -> Result<NoisyBoundReport> {
    require_normalized(model)?;
    setup.noise.validate()?;
    if setup.trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    let eps_hat =
        bese_deviation(model, a, setup.bese_pairs, derive_seed(setup.seed, &[0]))?.max_dev;
    let mut trials = Vec::with_capacity(setup.trials);
    for t in 0..setup.trials as u64 {
        let mut rng = rng_from_seed(derive_seed(setup.seed, &[PLANT_STREAM, t]));
        let x = sample_range_point(model, &mut rng)?.1;
        let noise = setup
            .noise
            .with_seed(derive_seed(setup.noise.seed, &[NOISE_STREAM, t]));
        let clean = sign_measure(a, &x)?;
        let b = noisy_sign_measure(a, &x, &noise)?;
        let y = noisy_linear_measure(a, &x, &noise)?;
        let out = run_solver(
            setup.solver,
            a,
            &b,
            &y,
            model,
            &setup.settings,
            derive_seed(setup.seed, &[SOLVER_STREAM, t]),
        )?;
        let xh = unit(&out.estimate)?;
        let tau1 = hamming_dist(&b, &clean)?;
        let tau2 = hamming_dist(&sign_measure(a, &xh)?, &b)?;
        let d_s = geodesic_dist(&x, &xh)?;
        trials.push(NoisyBoundTrial {
            d_s,
            tau1,
            tau2,
            margin: eps_hat + tau1 + tau2 - d_s,
        });
    }
    let count = trials.len() as f64;
    let mean = |f: fn(&NoisyBoundTrial) -> f64| trials.iter().map(f).sum::<f64>() / count;
    Ok(NoisyBoundReport {
        eps_hat,
        violations: trials.iter().filter(|t| t.margin < 0.0).count(),
        tau1_mean: mean(|t| t.tau1),
        tau2_mean: mean(|t| t.tau2),
        d_s_mean: mean(|t| t.d_s),
        min_margin: trials
            .iter()
            .map(|t| t.margin)
            .fold(f64::INFINITY, f64::min),
        mean_margin: mean(|t| t.margin),
        trials,
    })
}

/// `v/‖v‖₂`, rejecting the zero vector.
pub fn unit(v: &Array1<f64>) -> Result<Array1<f64>> {
    let norm = v.dot(v).sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::invalid(
            "cannot normalize a zero or non-finite vector",
        ));
    }
    Ok(v / norm)
}

/// Unit vectors `x`, `s` in `ℝⁿ` at Euclidean distance `dist ∈ [0, 2]`,
/// in a random plane.
pub fn unit_pair_at_distance<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    dist: f64,
) -> Result<(Array1<f64>, Array1<f64>)> {
    if n < 2 || !(0.0..=2.0).contains(&dist) {
        return Err(Error::invalid("need n >= 2 and 0 <= dist <= 2"));
    }
    let x = unit(&standard_normal_vec(rng, n))?;
    let mut w = standard_normal_vec(rng, n);
    w = &w - &(&x * x.dot(&w));
    let w = unit(&w)?;
    let theta = 2.0 * (dist / 2.0).asin();
    let s = &x * theta.cos() + &w * theta.sin();
    Ok((x, s))
}
