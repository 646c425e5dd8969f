//! Gaussian measurement ensembles, the sign map `Φ(x) = sign(Ax)`, noise
//! channels and the two metrics compared throughout the crate: normalized
//! Hamming distance between sign patterns and geodesic (angular) distance
//! between unit vectors.
//!
//! # Sign convention
//!
//! `sign(0) = +1`. Under a Gaussian ensemble an exactly-zero inner product
//! has probability zero, so any fixed convention is harmless; this one keeps
//! every [`SignPattern`] entry in `{-1, +1}`.
//!
//! # Binary matrix layout
//!
//! [`MeasurementEnsemble::write_binary`] produces, all integers and floats
//! little-endian:
//!
//! | offset | size      | content                                 |
//! |--------|-----------|-----------------------------------------|
//! | 0      | 8         | magic `b"OBCSMAT\x01"`                  |
//! | 8      | 8         | rows `m` as `u64`                       |
//! | 16     | 8         | cols `n` as `u64`                       |
//! | 24     | 8         | seed as `u64`                           |
//! | 32     | `8·m·n`   | entries as IEEE-754 binary64, row-major |
//!
//! The plain-text form read by [`MeasurementEnsemble::parse_text`] is a
//! header line `m n [seed]` followed by `m` lines of `n` whitespace-separated
//! numbers. Blank lines and lines starting with `#` are skipped.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::rng::rng_from_seed;

pub const MATRIX_MAGIC: &[u8; 8] = b"OBCSMAT\x01";
const HEADER_LEN: usize = 32;

/// Tolerance on `‖x‖₂ - 1` accepted by [`geodesic_dist`].
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// `sign(v)` with `sign(0) = +1`.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// An `m × n` matrix with i.i.d. standard normal entries, together with the
/// seed it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementEnsemble {
    matrix: Array2<f64>,
    seed: u64,
}

impl MeasurementEnsemble {
    /// Draws `A_ij ~ N(0, 1)` row by row from a ChaCha8 stream seeded with `seed`.
    pub fn gaussian(m: usize, n: usize, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::invalid(format!(
                "measurement matrix dimensions must be positive, got {m}x{n}"
            )));
        }
        let mut rng = rng_from_seed(seed);
        let matrix = Array2::from_shape_simple_fn((m, n), || rng.sample::<f64, _>(StandardNormal));
        Ok(Self { matrix, seed })
    }

    /// Wraps an explicit matrix, e.g. a hand-built test fixture.
    pub fn from_matrix(matrix: Array2<f64>, seed: u64) -> Result<Self> {
        let (m, n) = matrix.dim();
        if m == 0 || n == 0 {
            return Err(Error::invalid("measurement matrix must be non-empty"));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("measurement matrix has non-finite entries"));
        }
        Ok(Self { matrix, seed })
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// `Ax`.
    pub fn apply(&self, x: &Array1<f64>) -> Result<Array1<f64>> {
        ensure_len("signal", x.len(), self.cols())?;
        Ok(self.matrix.dot(x))
    }

    /// `Aᵀv`.
    pub fn apply_transpose(&self, v: &Array1<f64>) -> Result<Array1<f64>> {
        ensure_len("measurement vector", v.len(), self.rows())?;
        Ok(self.matrix.t().dot(v))
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * self.matrix.len());
        out.extend_from_slice(MATRIX_MAGIC);
        out.extend_from_slice(&(self.rows() as u64).to_le_bytes());
        out.extend_from_slice(&(self.cols() as u64).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        // `Array2::iter` walks in logical row-major order for any layout.
        for v in self.matrix.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..8] != MATRIX_MAGIC {
            return Err(Error::Format("missing matrix magic header".into()));
        }
        let word = |i: usize| u64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
        let (m, n, seed) = (word(8) as usize, word(16) as usize, word(24));
        let expected = m
            .checked_mul(n)
            .and_then(|c| c.checked_mul(8))
            .and_then(|c| c.checked_add(HEADER_LEN))
            .ok_or_else(|| Error::Format("matrix dimensions overflow".into()))?;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "matrix payload is {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let matrix =
            Array2::from_shape_vec((m, n), data).map_err(|e| Error::Format(e.to_string()))?;
        Self::from_matrix(matrix, seed)
    }

    pub fn write_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_binary())?;
        Ok(())
    }

    pub fn read_binary(path: impl AsRef<Path>) -> Result<Self> {
        let mut buf = Vec::new();
        fs::File::open(path)?.read_to_end(&mut buf)?;
        Self::from_binary(&buf)
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty matrix text".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(Error::Format(format!("bad header line {header:?}")));
        }
        let parse_usize = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| Error::Format(format!("{s:?}: {e}")))
        };
        let m = parse_usize(fields[0])?;
        let n = parse_usize(fields[1])?;
        let seed = match fields.get(2) {
            Some(s) => s
                .parse::<u64>()
                .map_err(|e| Error::Format(format!("{s:?}: {e}")))?,
            None => 0,
        };
        let mut data = Vec::with_capacity(m * n);
        for (row, line) in lines.enumerate() {
            let before = data.len();
            for tok in line.split_whitespace() {
                data.push(
                    tok.parse::<f64>()
                        .map_err(|e| Error::Format(format!("row {row}: {tok:?}: {e}")))?,
                );
            }
            if data.len() - before != n {
                return Err(Error::Format(format!(
                    "row {row} has {} entries, expected {n}",
                    data.len() - before
                )));
            }
        }
        if data.len() != m * n {
            return Err(Error::Format(format!(
                "found {} rows, expected {m}",
                data.len() / n.max(1)
            )));
        }
        let matrix =
            Array2::from_shape_vec((m, n), data).map_err(|e| Error::Format(e.to_string()))?;
        Self::from_matrix(matrix, seed)
    }
}

/// A vector in `{-1, +1}^m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SignPattern(Vec<i8>);

impl SignPattern {
    pub fn new(bits: Vec<i8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b != 1 && b != -1) {
            return Err(Error::invalid(format!(
                "sign pattern entry {pos} is {}, expected -1 or +1",
                bits[pos]
            )));
        }
        Ok(Self(bits))
    }

    /// Quantizes real values with the `sign(0) = +1` convention.
    pub fn from_values<'a>(values: impl IntoIterator<Item = &'a f64>) -> Self {
        Self(values.into_iter().map(|&v| sign(v) as i8).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[i8] {
        &self.0
    }

    pub fn to_f64(&self) -> Array1<f64> {
        self.0.iter().map(|&b| f64::from(b)).collect()
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|&b| -b).collect())
    }
}

impl TryFrom<Vec<i8>> for SignPattern {
    type Error = Error;

    fn try_from(bits: Vec<i8>) -> Result<Self> {
        Self::new(bits)
    }
}

impl From<SignPattern> for Vec<i8> {
    fn from(p: SignPattern) -> Self {
        p.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    /// `b = sign(Ax + ξ)`, `ξ ~ N(0, σ² I)`.
    GaussianPreQuantization {
        sigma: f64,
    },
    /// Each clean bit is negated independently with probability `p`.
    SignFlip {
        p: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(flatten)]
    pub kind: NoiseKind,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            seed: 0,
        }
    }

    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::GaussianPreQuantization { sigma },
            seed,
        }
    }

    pub fn sign_flip(p: f64, seed: u64) -> Self {
        Self {
            kind: NoiseKind::SignFlip { p },
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn is_noiseless(&self) -> bool {
        match self.kind {
            NoiseKind::None => true,
            NoiseKind::GaussianPreQuantization { sigma } => sigma == 0.0,
            NoiseKind::SignFlip { p } => p == 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            NoiseKind::None => Ok(()),
            NoiseKind::GaussianPreQuantization { sigma } if sigma >= 0.0 && sigma.is_finite() => {
                Ok(())
            }
            NoiseKind::GaussianPreQuantization { sigma } => Err(Error::invalid(format!(
                "noise sigma must be >= 0, got {sigma}"
            ))),
            NoiseKind::SignFlip { p } if (0.0..=1.0).contains(&p) => Ok(()),
            NoiseKind::SignFlip { p } => Err(Error::invalid(format!(
                "flip probability must lie in [0, 1], got {p}"
            ))),
        }
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::none()
    }
}

/// `Φ(x) = sign(Ax)`.
pub fn sign_measure(a: &MeasurementEnsemble, x: &Array1<f64>) -> Result<SignPattern> {
    Ok(SignPattern::from_values(a.apply(x)?.iter()))
}

pub fn noisy_sign_measure(
    a: &MeasurementEnsemble,
    x: &Array1<f64>,
    noise: &NoiseSpec,
) -> Result<SignPattern> {
    noise.validate()?;
    let mut rng = rng_from_seed(noise.seed);
    match noise.kind {
        NoiseKind::None => sign_measure(a, x),
        NoiseKind::GaussianPreQuantization { .. } => Ok(SignPattern::from_values(
            noisy_linear_measure(a, x, noise)?.iter(),
        )),
        NoiseKind::SignFlip { p } => {
            let clean = sign_measure(a, x)?;
            let bits = clean
                .0
                .into_iter()
                .map(|b| if rng.random_bool(p) { -b } else { b })
                .collect();
            Ok(SignPattern(bits))
        }
    }
}

/// The real-valued measurements before quantization: `Ax + ξ` under
/// Gaussian noise, `Ax` otherwise. Uses the same random stream as
/// [`noisy_sign_measure`], so the signs of the result are exactly its bits
/// under Gaussian noise.
pub fn noisy_linear_measure(
    a: &MeasurementEnsemble,
    x: &Array1<f64>,
    noise: &NoiseSpec,
) -> Result<Array1<f64>> {
    noise.validate()?;
    let mut ax = a.apply(x)?;
    if let NoiseKind::GaussianPreQuantization { sigma } = noise.kind {
        if sigma > 0.0 {
            let mut rng = rng_from_seed(noise.seed);
            ax.mapv_inplace(|v| v + sigma * rng.sample::<f64, _>(StandardNormal));
        }
    }
    Ok(ax)
}

/// Fraction of positions where the two patterns disagree.
pub fn hamming_dist(b1: &SignPattern, b2: &SignPattern) -> Result<f64> {
    ensure_len("sign pattern", b2.len(), b1.len())?;
    if b1.is_empty() {
        return Err(Error::invalid("hamming distance of empty patterns"));
    }
    let diff = b1.0.iter().zip(&b2.0).filter(|(a, b)| a != b).count();
    Ok(diff as f64 / b1.len() as f64)
}

/// Normalized angle `arccos⟨x, s⟩ / π` between two unit vectors.
///
/// The angle is evaluated as `2·atan2(‖x − s‖, ‖x + s‖)`, which equals the
/// arccosine of the inner product for unit inputs but keeps full relative
/// precision for nearly parallel or antipodal pairs and can never produce NaN.
pub fn geodesic_dist(x: &Array1<f64>, s: &Array1<f64>) -> Result<f64> {
    ensure_len("geodesic operand", s.len(), x.len())?;
    for (name, v) in [("x", x), ("s", s)] {
        let norm = v.dot(v).sqrt();
        if !((1.0 - UNIT_NORM_TOL)..=(1.0 + UNIT_NORM_TOL)).contains(&norm) {
            return Err(Error::invalid(format!(
                "geodesic distance needs unit vectors, ‖{name}‖ = {norm}"
            )));
        }
    }
    Ok(angle_between(x, s) / std::f64::consts::PI)
}

pub(crate) fn angle_between(x: &Array1<f64>, s: &Array1<f64>) -> f64 {
    let (mut d2, mut p2) = (0.0, 0.0);
    for (a, b) in x.iter().zip(s) {
        d2 += (a - b) * (a - b);
        p2 += (a + b) * (a + b);
    }
    2.0 * d2.sqrt().atan2(p2.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ens(rows: Vec<Vec<f64>>) -> MeasurementEnsemble {
        let m = rows.len();
        let n = rows[0].len();
        let flat = rows.into_iter().flatten().collect();
        MeasurementEnsemble::from_matrix(Array2::from_shape_vec((m, n), flat).unwrap(), 0).unwrap()
    }

    #[test]
    fn gaussian_is_deterministic() {
        let a = MeasurementEnsemble::gaussian(3, 2, 7).unwrap();
        let b = MeasurementEnsemble::gaussian(3, 2, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, MeasurementEnsemble::gaussian(3, 2, 8).unwrap());
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(matches!(
            MeasurementEnsemble::gaussian(0, 2, 1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(MeasurementEnsemble::gaussian(2, 0, 1).is_err());
    }

    #[test]
    fn entry_moments() {
        let a = MeasurementEnsemble::gaussian(10_000, 1, 3).unwrap();
        let mean = a.matrix().mean().unwrap();
        assert!(mean.abs() <= 0.05, "mean {mean}");
        let big = MeasurementEnsemble::gaussian(500, 200, 4).unwrap();
        let mean = big.matrix().mean().unwrap();
        let var = big.matrix().mapv(|v| (v - mean).powi(2)).mean().unwrap();
        assert!(
            mean.abs() < 0.01 && (var - 1.0).abs() < 0.01,
            "{mean} {var}"
        );
    }

    #[test]
    fn norm_preserved_for_fixed_unit_vector() {
        let a = MeasurementEnsemble::gaussian(1000, 50, 1).unwrap();
        let x = Array1::from_elem(50, 1.0 / 50f64.sqrt());
        let y = a.apply(&x).unwrap();
        let ratio = y.dot(&y) / 1000.0;
        assert!((0.7..=1.3).contains(&ratio), "{ratio}");
    }

    #[test]
    fn sign_measure_hand_cases() {
        let a = ens(vec![vec![1.0, 0.0], vec![0.0, -1.0]]);
        assert_eq!(
            sign_measure(&a, &array![1.0, 1.0]).unwrap().bits(),
            &[1, -1]
        );
        let zero = ens(vec![vec![0.0, 0.0]]);
        assert_eq!(sign_measure(&zero, &array![1.0, 1.0]).unwrap().bits(), &[1]);
        assert!(sign_measure(&a, &array![1.0]).is_err());
    }

    #[test]
    fn sign_pattern_rejects_zero() {
        assert!(SignPattern::new(vec![1, 0, -1]).is_err());
        assert!(serde_json::from_str::<SignPattern>("[1,2]").is_err());
        let p: SignPattern = serde_json::from_str("[1,-1]").unwrap();
        assert_eq!(p.bits(), &[1, -1]);
    }

    #[test]
    fn noise_channels_reduce_correctly() {
        let a = MeasurementEnsemble::gaussian(200, 5, 11).unwrap();
        let x = array![0.3, -0.2, 0.5, 0.1, 0.7];
        let clean = sign_measure(&a, &x).unwrap();
        assert_eq!(
            noisy_sign_measure(&a, &x, &NoiseSpec::none()).unwrap(),
            clean
        );
        assert_eq!(
            noisy_sign_measure(&a, &x, &NoiseSpec::gaussian(0.0, 3)).unwrap(),
            clean
        );
        assert_eq!(
            noisy_sign_measure(&a, &x, &NoiseSpec::sign_flip(1.0, 3)).unwrap(),
            clean.negated()
        );
        assert_eq!(
            noisy_sign_measure(&a, &x, &NoiseSpec::sign_flip(0.0, 3)).unwrap(),
            clean
        );
        assert!(noisy_sign_measure(&a, &x, &NoiseSpec::sign_flip(1.5, 3)).is_err());
        assert!(noisy_sign_measure(&a, &x, &NoiseSpec::gaussian(-0.1, 3)).is_err());
    }

    #[test]
    fn gaussian_noise_hamming_bound() {
        let m = 10_000;
        let a = MeasurementEnsemble::gaussian(m, 20, 21).unwrap();
        let mut x = Array1::zeros(20);
        x[3] = 0.6;
        x[17] = -0.8;
        let clean = sign_measure(&a, &x).unwrap();
        let noisy = noisy_sign_measure(&a, &x, &NoiseSpec::gaussian(0.2, 5)).unwrap();
        let dh = hamming_dist(&clean, &noisy).unwrap();
        assert!(dh <= 0.2 / 2.0 + 0.05, "{dh}");
    }

    #[test]
    fn hamming_cases() {
        let b = SignPattern::new(vec![1, 1, -1, 1]).unwrap();
        let c = SignPattern::new(vec![1, -1, -1, -1]).unwrap();
        assert_eq!(hamming_dist(&b, &b).unwrap(), 0.0);
        assert_eq!(hamming_dist(&b, &b.negated()).unwrap(), 1.0);
        assert_eq!(hamming_dist(&b, &c).unwrap(), 0.5);
        let short = SignPattern::new(vec![1]).unwrap();
        assert!(hamming_dist(&b, &short).is_err());
    }

    #[test]
    fn geodesic_cases() {
        let x = array![1.0, 0.0, 0.0];
        let s = array![0.0, 1.0, 0.0];
        assert_eq!(geodesic_dist(&x, &x).unwrap(), 0.0);
        assert!((geodesic_dist(&x, &s).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(geodesic_dist(&x, &(-&x)).unwrap(), 1.0);
        assert!(geodesic_dist(&array![1.0, 1.0, 0.0], &s).is_err());
        // Within tolerance is accepted.
        assert!(geodesic_dist(&array![1.0 + 5e-10, 0.0, 0.0], &s).is_ok());
    }

    #[test]
    fn geodesic_agrees_with_arccos() {
        let mut rng = crate::rng::rng_from_seed(2);
        for _ in 0..1000 {
            let x = crate::rng::unit_sphere(&mut rng, 6);
            let s = crate::rng::unit_sphere(&mut rng, 6);
            let reference = x.dot(&s).clamp(-1.0, 1.0).acos() / std::f64::consts::PI;
            assert!((geodesic_dist(&x, &s).unwrap() - reference).abs() < 1e-12);
        }
    }

    #[test]
    fn binary_and_text_formats() {
        let a = MeasurementEnsemble::gaussian(4, 3, 99).unwrap();
        let bytes = a.to_binary();
        assert_eq!(&bytes[..8], MATRIX_MAGIC);
        assert_eq!(bytes.len(), 32 + 8 * 12);
        assert_eq!(u64::from_le_bytes(bytes[8..16].try_into().unwrap()), 4);
        assert_eq!(u64::from_le_bytes(bytes[16..24].try_into().unwrap()), 3);
        assert_eq!(u64::from_le_bytes(bytes[24..32].try_into().unwrap()), 99);
        assert_eq!(
            f64::from_le_bytes(bytes[40..48].try_into().unwrap()),
            a.matrix()[[0, 1]]
        );
        assert_eq!(MeasurementEnsemble::from_binary(&bytes).unwrap(), a);
        assert!(MeasurementEnsemble::from_binary(&bytes[..40]).is_err());

        let t = MeasurementEnsemble::parse_text("# fixture\n2 2 5\n1 0\n0 -1\n").unwrap();
        assert_eq!(t.matrix(), &array![[1.0, 0.0], [0.0, -1.0]]);
        assert_eq!(t.seed(), 5);
        assert!(MeasurementEnsemble::parse_text("2 2\n1 0\n").is_err());
        assert!(MeasurementEnsemble::parse_text("1 2\n1 0 3\n").is_err());
    }
}
