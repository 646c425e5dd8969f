//! Explicit group-sparse decoder.
//!
//! The ambient vector is split into `k` blocks of length `n/k`. For
//! `i < k−1`, latent coordinate `z_i` drives block `i`: the interval
//! `[−r/√k, r/√k]` is cut into `n/k` sub-intervals of width `W = 2r√k/n`,
//! and when `z_i` falls in sub-interval `j` only entry `j` of the block can be
//! non-zero. Inside a sub-interval the entry traces a double triangle: over
//! the first half it goes `0 → −x_max → 0`, over the second half
//! `0 → +x_max → 0`, with apexes at the quarter points. Sub-intervals are
//! half-open `[left, right)` except the last, which is closed; every
//! boundary value is 0. Outside `[−r/√k, r/√k]` the block is zero. The last
//! block is always `(0, …, 0, x_c)` and the last latent coordinate is
//! ignored. The model output is the raw vector divided by its norm, which is
//! at least `x_c`.
//!
//! Every entry has slope magnitude `4x_max/W = 2n·x_max/(√k·r)`, giving the
//! normalized map a Lipschitz constant `2n·x_max/(√k·r·x_c)`.
//!
//! The image of the latent ball is the set of unit vectors that are
//! `k`-group-sparse, have last block `(0, …, 0, x_n)` with `x_n > 0`, and
//! satisfy `|x_j| ≤ (x_max/x_c)·x_n` on the other blocks. For `k = 2` this is
//! the same as requiring `x_n ≥ x_c/√((k−1)x_max² + x_c²)`; for larger `k`
//! the per-entry bound is the tighter condition, and both are checked.

use ndarray::Array1;

use super::{check_latent, normalization_vjp, GenerativeModel};
use crate::error::{ensure_len, Error, Result};
use crate::measure::sign;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSparseModel {
    n: usize,
    k: usize,
    r: f64,
    x_max: f64,
    x_c: f64,
}

/// Position of a latent coordinate inside the bump pattern of its block.
#[derive(Debug, Clone, Copy)]
struct Bump {
    index: usize,
    value: f64,
    slope: f64,
}

impl GroupSparseModel {
    pub fn new(n: usize, k: usize, r: f64, x_max: f64, x_c: f64) -> Result<Self> {
        if k == 0 || n == 0 || !n.is_multiple_of(k) {
            return Err(Error::invalid(format!(
                "ambient dimension {n} must be a positive multiple of latent dimension {k}"
            )));
        }
        for (name, v) in [("r", r), ("x_max", x_max), ("x_c", x_c)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self {
            n,
            k,
            r,
            x_max,
            x_c,
        })
    }

    /// `r = 1`, `x_c = 1` and `x_max = √(3/(k−1))`, which puts the
    /// last-coordinate floor at exactly 1/2. For `k = 1` there are no free
    /// blocks and `x_max = 1`.
    pub fn with_default_amplitudes(n: usize, k: usize) -> Result<Self> {
        let x_max = if k > 1 {
            (3.0 / (k - 1) as f64).sqrt()
        } else {
            1.0
        };
        Self::new(n, k, 1.0, x_max, 1.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn x_c(&self) -> f64 {
        self.x_c
    }

    pub fn block_len(&self) -> usize {
        self.n / self.k
    }

    /// Width `2r√k/n` of one sub-interval.
    pub fn sub_interval_width(&self) -> f64 {
        2.0 * self.r * (self.k as f64).sqrt() / self.n as f64
    }

    /// Half-width `r/√k` of the active latent interval.
    pub fn active_half_width(&self) -> f64 {
        self.r / (self.k as f64).sqrt()
    }

    /// Lower bound `x_c/√((k−1)x_max² + x_c²)` on the last output coordinate.
    pub fn last_coordinate_floor(&self) -> f64 {
        self.x_c / ((self.k - 1) as f64 * self.x_max * self.x_max + self.x_c * self.x_c).sqrt()
    }

    /// `L = 2n·x_max / (√k·r·x_c)`.
    pub fn lipschitz(&self) -> f64 {
        2.0 * self.n as f64 * self.x_max / ((self.k as f64).sqrt() * self.r * self.x_c)
    }

    fn ratio(&self) -> f64 {
        self.x_max / self.x_c
    }

    fn bump(&self, zi: f64) -> Option<Bump> {
        let lower = -self.active_half_width();
        if !(lower..=-lower).contains(&zi) {
            return None;
        }
        let w = self.sub_interval_width();
        let t = zi - lower;
        let index = ((t / w).floor() as usize).min(self.block_len() - 1);
        let local = (t - index as f64 * w).clamp(0.0, w);
        let (half, quarter) = (w / 2.0, w / 4.0);
        let peak_slope = self.x_max / quarter;
        let (value, slope) = if local < half {
            let value = -self.x_max * (1.0 - (local - quarter).abs() / quarter);
            (
                value,
                if local < quarter {
                    -peak_slope
                } else {
                    peak_slope
                },
            )
        } else {
            let l = local - half;
            let value = self.x_max * (1.0 - (l - quarter).abs() / quarter);
            (value, if l < quarter { peak_slope } else { -peak_slope })
        };
        Some(Bump {
            index,
            value,
            slope,
        })
    }

    /// The raw output `G̃(z)` before normalization.
    pub fn raw_forward(&self, z: &Array1<f64>) -> Result<Array1<f64>> {
        check_latent(z, self.k, self.r)?;
        let bl = self.block_len();
        let mut out = Array1::zeros(self.n);
        for i in 0..self.k - 1 {
            if let Some(b) = self.bump(z[i]) {
                out[i * bl + b.index] = b.value;
            }
        }
        out[self.n - 1] = self.x_c;
        Ok(out)
    }

    /// A latent `z` in the ball with `forward(z) = x`, for `x` in the range.
    pub fn latent_for(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        ensure_len("signal", x.len(), self.n)?;
        if !self.contains(x, 1e-9) {
            return Err(Error::invalid("vector is not in the group-sparse range"));
        }
        Ok(self.latent_for_unchecked(x))
    }

    fn latent_for_unchecked(&self, x: &Array1<f64>) -> Array1<f64> {
        let bl = self.block_len();
        let w = self.sub_interval_width();
        let lower = -self.active_half_width();
        let scale = self.x_c / x[self.n - 1];
        let mut z = Array1::zeros(self.k);
        for i in 0..self.k - 1 {
            let block = x.slice(ndarray::s![i * bl..(i + 1) * bl]);
            let j = (0..bl).fold(0, |best, j| {
                if block[j].abs() > block[best].abs() {
                    j
                } else {
                    best
                }
            });
            z[i] = match block[j] {
                0.0 => lower,
                _ => {
                    let u = (block[j] * scale).clamp(-self.x_max, self.x_max);
                    let rise = (u.abs() / self.x_max) * (w / 4.0);
                    let start = lower + j as f64 * w;
                    if u < 0.0 {
                        start + rise
                    } else {
                        start + w / 2.0 + rise
                    }
                }
            };
        }
        z
    }

    /// Range membership up to `tol`.
    pub fn contains(&self, x: &Array1<f64>, tol: f64) -> bool {
        if x.len() != self.n || (x.dot(x).sqrt() - 1.0).abs() > tol {
            return false;
        }
        let bl = self.block_len();
        let last = x[self.n - 1];
        if last < self.last_coordinate_floor() - tol {
            return false;
        }
        if x.slice(ndarray::s![self.n - bl..self.n - 1])
            .iter()
            .any(|v| v.abs() > tol)
        {
            return false;
        }
        let cap = self.ratio() * last + tol;
        (0..self.k - 1).all(|i| {
            let block = x.slice(ndarray::s![i * bl..(i + 1) * bl]);
            let mut nonzero = block.iter().filter(|v| v.abs() > tol);
            match (nonzero.next(), nonzero.next()) {
                (None, _) => true,
                (Some(v), None) => v.abs() <= cap,
                _ => false,
            }
        })
    }

    /// Euclidean projection of `y ≠ 0` onto the range.
    ///
    /// Each free block keeps its largest-magnitude entry of `y` (lowest index
    /// on ties) with matching sign. The magnitudes `a_i` and the last entry
    /// `t` are then the normalized Euclidean projection of
    /// `(w, y_n)` onto the cone `{0 ≤ a_i ≤ (x_max/x_c)·t}`, where `w_i` is
    /// the kept magnitude. When that projection is zero, the point of the
    /// range with every `a_i` at its cap maximizes `⟨x, y⟩`.
    pub fn exact_project(&self, y: &Array1<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
        ensure_len("projection target", y.len(), self.n)?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("projection target has non-finite entries"));
        }
        if y.iter().all(|&v| v == 0.0) {
            return Err(Error::invalid(
                "cannot project the zero vector onto the range",
            ));
        }
        let bl = self.block_len();
        let free = self.k - 1;
        let rho = self.ratio();

        let mut support = Vec::with_capacity(free);
        let mut w = Vec::with_capacity(free);
        for i in 0..free {
            let block = y.slice(ndarray::s![i * bl..(i + 1) * bl]);
            let mut best = 0;
            for (j, v) in block.iter().enumerate() {
                if v.abs() > block[best].abs() {
                    best = j;
                }
            }
            support.push((i * bl + best, sign(block[best])));
            w.push(block[best].abs());
        }
        let yn = y[self.n - 1];

        let (mags, t) = match cone_scale(&w, yn, rho) {
            Some(t) => (w.iter().map(|&wi| wi.min(rho * t)).collect::<Vec<_>>(), t),
            None => (vec![rho; free], 1.0),
        };
        let mut x = Array1::zeros(self.n);
        for (&(idx, s), a) in support.iter().zip(&mags) {
            x[idx] = s * a;
        }
        x[self.n - 1] = t;
        let norm = x.dot(&x).sqrt();
        x /= norm;
        let z = self.latent_for_unchecked(&x);
        // Re-evaluate so the returned pair is exactly consistent.
        let x = self.forward(&z)?;
        Ok((x, z))
    }
}

/// Minimizer `t > 0` of `Σ_i (w_i − min(w_i, ρt))² + (t − y_n)²`, or `None`
/// when the minimum over `t ≥ 0` sits at `t = 0`.
///
/// The derivative is proportional to
/// `h(t) = t − y_n − ρ Σ_i max(0, w_i − ρt)`, continuous and strictly
/// increasing, so the root is found by walking its linear pieces.
fn cone_scale(w: &[f64], yn: f64, rho: f64) -> Option<f64> {
    let h = |t: f64| t - yn - rho * w.iter().map(|&wi| (wi - rho * t).max(0.0)).sum::<f64>();
    if h(0.0) >= 0.0 {
        return None;
    }
    let mut breaks: Vec<f64> = w.iter().map(|&wi| wi / rho).filter(|&b| b > 0.0).collect();
    breaks.sort_by(|a, b| a.total_cmp(b));
    let mut lo = 0.0;
    for &hi in breaks.iter().chain(std::iter::once(&f64::INFINITY)) {
        if hi.is_infinite() || h(hi) >= 0.0 {
            let active: Vec<f64> = w.iter().copied().filter(|&wi| wi / rho > lo).collect();
            let t =
                (yn + rho * active.iter().sum::<f64>()) / (1.0 + rho * rho * active.len() as f64);
            return Some(t.clamp(lo, hi).max(f64::MIN_POSITIVE));
        }
        lo = hi;
    }
    unreachable!("h is unbounded above")
}

impl GenerativeModel for GroupSparseModel {
    fn latent_dim(&self) -> usize {
        self.k
    }

    fn ambient_dim(&self) -> usize {
        self.n
    }

    fn latent_radius(&self) -> f64 {
        self.r
    }

    fn forward(&self, z: &Array1<f64>) -> Result<Array1<f64>> {
        let raw = self.raw_forward(z)?;
        let norm = raw.dot(&raw).sqrt();
        Ok(raw / norm)
    }

    fn vjp(&self, z: &Array1<f64>, u: &Array1<f64>) -> Result<Array1<f64>> {
        ensure_len("cotangent", u.len(), self.n)?;
        let raw = self.raw_forward(z)?;
        let v = normalization_vjp(&raw, u);
        let bl = self.block_len();
        let mut out = Array1::zeros(self.k);
        for i in 0..self.k - 1 {
            if let Some(b) = self.bump(z[i]) {
                out[i] = b.slope * v[i * bl + b.index];
            }
        }
        Ok(out)
    }

    fn lipschitz_bound(&self) -> f64 {
        self.lipschitz()
    }

    fn is_normalized(&self) -> bool {
        true
    }

    fn exact_projection(&self, y: &Array1<f64>) -> Option<Result<(Array1<f64>, Array1<f64>)>> {
        Some(self.exact_project(y))
    }

    fn has_exact_projection(&self) -> bool {
        true
    }

    fn range_contains(&self, x: &Array1<f64>, tol: f64) -> Option<bool> {
        Some(self.contains(x, tol))
    }

    fn describe(&self) -> String {
        format!(
            "group-sparse(n={}, k={}, r={}, x_max={}, x_c={})",
            self.n, self.k, self.r, self.x_max, self.x_c
        )
    }
}
