//! Numerical primitives shared by the simulator and the analysis.
//!
//! * `regularized_gamma_cdf`: the CDF of a sum of `k` unit-mean exponentials,
//!   which is the distribution of a squared norm of a `k`-vector of unit
//!   variance circularly symmetric complex Gaussians.
//! * `capacity_logdet` and `weighted_capacity_logdet`: `log2 det(I + ρHHᴴ)`
//!   through a complex Cholesky factorization.
//! * `SeedStream`: counter-style reproducible random streams, one per trial.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Largest shape parameter accepted by [`regularized_gamma_cdf`].
pub const MAX_GAMMA_SHAPE: u32 = 64;

/// Largest `n` accepted by [`binomial_coefficient`].
pub const MAX_BINOMIAL_N: u32 = 64;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Domain(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::Domain(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    /// Builds a matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(columns: &[Vec<Complex64>]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Domain("columns have unequal lengths".into()));
        }
        let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
        for (j, col) in columns.iter().enumerate() {
            for (i, z) in col.iter().enumerate() {
                data[i * cols + j] = *z;
            }
        }
        Self::new(rows, cols, data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn column(&self, col: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self.get(i, col)).collect()
    }

    pub fn column_norm_sqr(&self, col: usize) -> f64 {
        (0..self.rows).map(|i| self.get(i, col).norm_sqr()).sum()
    }

    /// Submatrix formed by the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if cols.iter().any(|&c| c >= self.cols) {
            return Err(Error::Domain("column index out of range".into()));
        }
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            data.extend(cols.iter().map(|&c| self.get(i, c)));
        }
        Self::new(self.rows, cols.len(), data)
    }
}

/// `log2 det(I + ρ H Hᴴ)` in bits per channel use.
pub fn capacity_logdet(h: &ComplexMatrix, rho: f64) -> Result<f64> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::Domain(format!("SNR must be positive, got {rho}")));
    }
    let cols: Vec<usize> = (0..h.cols()).collect();
    let gains = vec![rho; h.cols()];
    weighted_capacity_logdet(h, &cols, &gains)
}

/// `log2 det(I + Σ_j gains[j] · h_{c_j} h_{c_j}ᴴ)` over the selected columns
/// `c_j = cols[j]`. With every gain equal to `ρ` this is
/// `capacity_logdet` of the column submatrix.
pub fn weighted_capacity_logdet(h: &ComplexMatrix, cols: &[usize], gains: &[f64]) -> Result<f64> {
    debug_assert_eq!(cols.len(), gains.len());
    let n = h.rows();
    let mut a = identity_lower(n);
    let mut outer = vec![Complex64::new(0.0, 0.0); n * n];
    for (&c, &g) in cols.iter().zip(gains) {
        weighted_outer_lower(h, c, g, &mut outer);
        add_assign(&mut a, &outer);
    }
    log2_det_hpd_in_place(&mut a, n)
}

/// Row-major `n x n` identity, used as the lower-triangle accumulator.
pub(crate) fn identity_lower(n: usize) -> Vec<Complex64> {
    let mut a = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        a[i * n + i].re = 1.0;
    }
    a
}

/// Lower triangle of `gain · h_c h_cᴴ` written into `out`.
pub(crate) fn weighted_outer_lower(
    h: &ComplexMatrix,
    col: usize,
    gain: f64,
    out: &mut [Complex64],
) {
    let n = h.rows();
    for i in 0..n {
        let hi = h.get(i, col) * gain;
        for j in 0..=i {
            out[i * n + j] = hi * h.get(j, col).conj();
        }
    }
}

#[inline]
pub(crate) fn add_assign(acc: &mut [Complex64], term: &[Complex64]) {
    for (a, t) in acc.iter_mut().zip(term) {
        *a += *t;
    }
}

/// `log2 det` of a Hermitian matrix `≥ I` from its lower triangle; `a` is
/// overwritten by the Cholesky factor.
pub(crate) fn log2_det_hpd_in_place(a: &mut [Complex64], n: usize) -> Result<f64> {
    let log_det = cholesky_log_det_in_place(a, n)?;
    Ok((log_det / std::f64::consts::LN_2).max(0.0))
}

/// Natural log-determinant of a Hermitian positive-definite matrix whose lower
/// triangle is stored row-major in `a`. Overwrites `a` with the Cholesky factor.
fn cholesky_log_det_in_place(a: &mut [Complex64], n: usize) -> Result<f64> {
    let mut log_det = 0.0;
    for j in 0..n {
        let mut d = a[j * n + j].re;
        for k in 0..j {
            d -= a[j * n + k].norm_sqr();
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j });
        }
        let pivot = d.sqrt();
        a[j * n + j] = Complex64::new(pivot, 0.0);
        log_det += 2.0 * pivot.ln();
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k].conj();
            }
            a[i * n + j] = s / pivot;
        }
    }
    Ok(log_det)
}

/// `P(G < x)` for `G ~ Gamma(k, 1)`, i.e. a sum of `k` unit-mean exponentials.
///
/// Both tails are exact finite/rapidly convergent series of the same
/// function; the lower-tail series is used below the mean to avoid
/// cancellation in `1 - e^{-x} Σ x^j/j!`.
pub fn regularized_gamma_cdf(x: f64, k: u32) -> Result<f64> {
    if x.is_nan() || x < 0.0 {
        return Err(Error::Domain(format!("gamma CDF needs x >= 0, got {x}")));
    }
    if k == 0 || k > MAX_GAMMA_SHAPE {
        return Err(Error::Domain(format!(
            "gamma CDF shape must be in 1..={MAX_GAMMA_SHAPE}, got {k}"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    let kf = f64::from(k);
    if x < kf {
        // e^{-x} Σ_{j≥k} x^j / j!
        let mut term = (kf * x.ln() - x - ln_factorial(k)).exp();
        let mut sum = term;
        let mut j = kf;
        loop {
            j += 1.0;
            term *= x / j;
            sum += term;
            if term < sum * 1e-17 {
                break;
            }
        }
        Ok(sum.min(1.0))
    } else {
        // 1 - e^{-x} Σ_{j<k} x^j / j!
        let mut term = 1.0;
        let mut sum = 1.0;
        for j in 1..k {
            term *= x / f64::from(j);
            sum += term;
        }
        Ok((1.0 - (-x).exp() * sum).clamp(0.0, 1.0))
    }
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|i| f64::from(i).ln()).sum()
}

/// Exact `C(n, k)` for `0 <= k <= n <= 64`.
pub fn binomial_coefficient(n: u32, k: u32) -> Result<u64> {
    if n > MAX_BINOMIAL_N || k > n {
        return Err(Error::Domain(format!(
            "binomial coefficient needs 0 <= k <= n <= {MAX_BINOMIAL_N}, got ({n}, {k})"
        )));
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // Each partial product is itself a binomial coefficient, so the
        // division is exact.
        acc = acc * u128::from(n - i) / u128::from(i + 1);
    }
    Ok(acc as u64)
}

/// Binomial coefficient as `u128` for counting selection spaces whose size may
/// exceed the 64-bit range.
pub(crate) fn binomial_u128(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(u128::from(n - i)) / u128::from(i + 1);
    }
    acc
}

/// Identifies one reproducible random substream.
///
/// The master seed keys a ChaCha8 generator and the stream index selects
/// its 64-bit stream, so distinct pairs give independent sequences and the same
/// pair always replays the same sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedStream {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl SeedStream {
    pub const fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    /// Same stream index under a master seed decorrelated by `domain`. Used to
    /// give auxiliary randomness (e.g. random node selection) its own stream
    /// without perturbing the channel draws.
    pub fn substream(&self, domain: u64) -> Self {
        Self::new(
            splitmix64(self.master_seed ^ splitmix64(domain)),
            self.stream_index,
        )
    }

    pub fn sampler(&self) -> StreamSampler {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        StreamSampler { rng }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sequential sampler over one [`SeedStream`].
#[derive(Debug, Clone)]
pub struct StreamSampler {
    rng: ChaCha8Rng,
}

impl StreamSampler {
    /// `CN(0, variance)`: independent real and imaginary parts, each
    /// `N(0, variance / 2)`.
    pub fn complex_gaussian(&mut self, variance: f64) -> Complex64 {
        let re: f64 = self.rng.sample(StandardNormal);
        let im: f64 = self.rng.sample(StandardNormal);
        let scale = (0.5 * variance.max(0.0)).sqrt();
        Complex64::new(scale * re, scale * im)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// First `CN(0, variance)` sample of `stream`.
pub fn sample_complex_gaussian(stream: &SeedStream, variance: f64) -> Complex64 {
    stream.sampler().complex_gaussian(variance)
}

/// `10^(db/10)`.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}
