//! Closed-form results: listening-phase failure probability, the outage
//! upper bound of DF-MSC-opt, diversity-multiplexing tradeoff curves, and
//! throughput-reliability coefficients.

use crate::channel::SystemParams;
use crate::error::{Error, Result};
use crate::numerics::{binomial_coefficient, regularized_gamma_cdf};

/// Grid of `α` values on which the mean-value point of the bound is bracketed.
pub const BOUND_ALPHA_GRID: usize = 99;

/// `ln p` for the per-relay decoding probability by fraction `α` of the
/// codeword: `p = exp(−(2^{R/α} − 1) / (ρ_S σ_SR²))`.
fn ln_decode_prob(alpha: f64, params: &SystemParams) -> f64 {
    -(2f64.powf(params.rate / alpha) - 1.0) / (params.rho_s * params.sigma2_sr)
}

/// `P(Bin(M, p) < K)` given `ln p`.
fn fewer_than_k(ln_p: f64, m: usize, k: usize) -> f64 {
    if ln_p == f64::NEG_INFINITY {
        return 1.0;
    }
    let p = ln_p.exp();
    let ln_q = (-p).ln_1p();
    let mut sum = 0.0;
    for i in 0..k {
        let c = binomial_coefficient(m as u32, i as u32).expect("M <= 64") as f64;
        sum += c * ((m - i) as f64 * ln_q + i as f64 * ln_p).exp();
    }
    sum.clamp(0.0, 1.0)
}

/// Probability that fewer than `K` relays have decoded by channel use `l`.
pub fn phi(l: usize, params: &SystemParams) -> Result<f64> {
    if l == 0 || l > params.n {
        return Err(Error::Domain(format!(
            "channel use {l} outside 1..={}",
            params.n
        )));
    }
    Ok(phi_alpha(l as f64 / params.n as f64, params))
}

/// [`phi`] with `l = α·N` treated as continuous.
pub fn phi_alpha(alpha: f64, params: &SystemParams) -> f64 {
    fewer_than_k(ln_decode_prob(alpha, params), params.m, params.k)
}

/// `dΦ/dα`, never positive.
///
/// Uses `d/dp P(Bin(M,p) < K) = −M·C(M−1, K−1)·p^{K−1}(1−p)^{M−K}` and
/// `dp/dα = p · 2^{R/α} · R ln2 / (α² ρ_S σ_SR²)`, combined in log space.
pub fn phi_derivative(alpha: f64, params: &SystemParams) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    let (m, k) = (params.m, params.k);
    let ln_p = ln_decode_prob(alpha, params);
    if ln_p == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    let p = ln_p.exp();
    let snr = params.rho_s * params.sigma2_sr;
    let ln_growth = params.rate / alpha * std::f64::consts::LN_2;
    let ln_dp =
        ln_p + ln_growth + (params.rate * std::f64::consts::LN_2 / (alpha * alpha * snr)).ln();
    let ln_one_minus_p = (-p).ln_1p();
    let ln_mag = (m as f64).ln()
        + (binomial_coefficient((m - 1) as u32, (k - 1) as u32).expect("M <= 64") as f64).ln()
        + (k - 1) as f64 * ln_p
        + ln_dp;
    let tail = if m == k {
        1.0
    } else {
        ((m - k) as f64 * ln_one_minus_p).exp()
    };
    Ok(-(ln_mag.exp() * tail))
}

/// The two terms of the DF-MSC-opt outage upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageBound {
    /// `Φ_N`, probability that the listening phase runs past the codeword.
    pub phi_n: f64,
    /// `Φ_N · F((2^R − 1)/(ρ_S σ_D²); Nr)`.
    pub direct: f64,
    /// Supremum over the `α` grid of
    /// `−Φ'(α) · F((2^{R/α}−1)/(ρ_S σ_D²); Nr) · F((2^{R/(1−α)}−1)/(ρ_S σ_D²); Nr)^{K+1}`.
    pub relay_assisted: f64,
    /// Grid point attaining the supremum.
    pub alpha: f64,
}

impl OutageBound {
    pub fn total(&self) -> f64 {
        (self.direct + self.relay_assisted).clamp(0.0, 1.0)
    }
}

fn threshold_cdf(rate: f64, params: &SystemParams) -> f64 {
    let x = (2f64.powf(rate) - 1.0) / (params.rho_s * params.sigma2_d);
    regularized_gamma_cdf(x, params.nr as u32).expect("Nr <= 64 and x >= 0")
}

pub fn outage_bound_terms(params: &SystemParams) -> OutageBound {
    let phi_n = phi_alpha(1.0, params);
    let direct = phi_n * threshold_cdf(params.rate, params);
    let mut relay_assisted = 0.0;
    let mut best_alpha = 0.5;
    for i in 1..=BOUND_ALPHA_GRID {
        let alpha = i as f64 / (BOUND_ALPHA_GRID + 1) as f64;
        let slope = -phi_derivative(alpha, params).expect("alpha in (0, 1)");
        let listen = threshold_cdf(params.rate / alpha, params);
        let coop = threshold_cdf(params.rate / (1.0 - alpha), params);
        let term = slope * listen * coop.powi(params.k as i32 + 1);
        if term > relay_assisted {
            relay_assisted = term;
            best_alpha = alpha;
        }
    }
    OutageBound {
        phi_n,
        direct,
        relay_assisted,
        alpha: best_alpha,
    }
}

/// Outage upper bound of DF-MSC-opt, clamped to `[0, 1]`.
pub fn outage_upper_bound(params: &SystemParams) -> f64 {
    outage_bound_terms(params).total()
}

/// One point of a diversity-multiplexing tradeoff curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DmtPoint {
    pub r: f64,
    pub d: f64,
}

fn pos(x: f64) -> f64 {
    x.max(0.0)
}

fn check_r(r: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "multiplexing gain must be in [0, 1], got {r}"
        )))
    }
}

/// `(1 − 2r)/(1 − r)` clipped at zero; zero at `r = 1`.
fn half_rate_factor(r: f64) -> f64 {
    if r >= 0.5 {
        0.0
    } else {
        (1.0 - 2.0 * r) / (1.0 - r)
    }
}

/// Cooperative-phase exponent `d₃` for the given `K` and `Nr`.
fn dmt_cooperative(r: f64, k: usize, nr: usize) -> f64 {
    let nr_f = nr as f64;
    let k_f = k as f64;
    let lt = nr.min(k + 1);
    if r < 0.5 {
        return nr_f + (nr_f - 1.0) * k_f;
    }
    let lt_f = lt as f64;
    if r >= lt_f / (lt_f + 1.0) {
        return nr_f * lt_f * (1.0 - r) / r;
    }
    // Largest θ with θ/(θ+1) ≤ r; r < L_T/(L_T+1) keeps it below L_T.
    let mut theta = 1usize;
    while theta + 1 < lt && (theta + 1) as f64 / (theta + 2) as f64 <= r {
        theta += 1;
    }
    let t = theta as f64;
    let ratio = r / (1.0 - r);
    let a = nr_f + (nr_f - t) * (k_f + 1.0 - t) - (nr_f + k_f - 2.0 * t) * (ratio - t);
    let b = (nr_f - t) * (k_f + 1.0 - t) + nr_f * t * (1.0 - r) / r;
    a.min(b)
}

/// DMT of DF-MSC-opt waiting for `K` decoded relays: `min(d₁, d₂ + d₃)`.
pub fn dmt_msc(r: f64, k: usize, m: usize, nr: usize) -> Result<DmtPoint> {
    check_r(r)?;
    if k == 0 || k > m || nr == 0 {
        return Err(Error::Domain(format!(
            "need 1 <= K <= M and Nr >= 1, got K={k} M={m} Nr={nr}"
        )));
    }
    if r == 1.0 {
        return Ok(DmtPoint { r, d: 0.0 });
    }
    let waiting = (m - k + 1) as f64;
    let d1 = (waiting + nr as f64) * pos(1.0 - r);
    let d2 = waiting * half_rate_factor(r);
    let d3 = dmt_cooperative(r, k, nr);
    Ok(DmtPoint {
        r,
        d: pos(d1.min(d2 + d3)),
    })
}

/// Closed-form optimal number of relays to wait for. May fall outside
/// `[1, M]` or be non-finite near region edges.
pub fn k_star(r: f64, m: usize, nr: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Domain(format!("K* needs r in [0, 1), got {r}")));
    }
    let (m1, nr_f) = ((m + 1) as f64, nr as f64);
    if r <= 0.5 {
        let num = m1 * (2.0 - 4.0 * r + r * r) + nr_f * (2.0 - 3.0 * r + r * r);
        let den = (nr_f - 1.0) * (1.0 - r) + r * r;
        return Ok(num / den);
    }
    // θ/(θ+1) < r ≤ (θ+1)/(θ+2)
    let mut theta = 1usize;
    while r > (theta + 1) as f64 / (theta + 2) as f64 {
        theta += 1;
    }
    let t = theta as f64;
    let s = 1.0 - r;
    let num = m1 * s * s - nr_f * (3.0 * r - r * r - s * 2.0 * t) - t * (3.0 * t * s - 1.0 - r);
    let den = nr_f * s - r + s * s;
    Ok(num / den)
}

/// Relay thresholds `⌊K*⌋, ⌈K*⌉` clamped to `[1, M]`; empty when `K*` is
/// not finite.
pub fn k_star_candidates(r: f64, m: usize, nr: usize) -> Result<Vec<usize>> {
    let ks = k_star(r, m, nr)?;
    if !ks.is_finite() {
        return Ok(Vec::new());
    }
    let clamp = |v: f64| v.clamp(1.0, m as f64) as usize;
    let mut out = vec![clamp(ks.floor()), clamp(ks.ceil())];
    out.dedup();
    Ok(out)
}

/// DF-MSC-opt DMT with the relay threshold optimized: the better of the
/// closed-form `K*` neighbours, backed by a scan over every `K` in `1..=M`.
pub fn dmt_msc_opt(r: f64, m: usize, nr: usize) -> Result<DmtPoint> {
    check_r(r)?;
    if r == 1.0 {
        return Ok(DmtPoint { r, d: 0.0 });
    }
    let mut best = 0.0f64;
    for k in k_star_candidates(r, m, nr)? {
        best = best.max(dmt_msc(r, k, m, nr)?.d);
    }
    for k in 1..=m {
        best = best.max(dmt_msc(r, k, m, nr)?.d);
    }
    Ok(DmtPoint { r, d: best })
}

/// DMT of dynamic decode-and-forward with `Nr` receive antennas.
pub fn dmt_ddf(r: f64, m: usize, nr: usize) -> Result<DmtPoint> {
    check_r(r)?;
    let (m_f, nr_f) = (m as f64, nr as f64);
    let d = if r <= nr_f / (m_f + nr_f) {
        (m_f + nr_f) * (1.0 - r)
    } else if r <= 0.5 {
        nr_f + m_f * half_rate_factor(r)
    } else {
        nr_f * (1.0 - r) / r
    };
    Ok(DmtPoint { r, d })
}

/// DMT shared by AF-SDiv and DF-SDiv: `M(1−2r)⁺ + Nr(1−r)⁺`.
pub fn dmt_sdiv(r: f64, m: usize, nr: usize) -> Result<DmtPoint> {
    check_r(r)?;
    let d = m as f64 * pos(1.0 - 2.0 * r) + nr as f64 * pos(1.0 - r);
    Ok(DmtPoint { r, d })
}

/// Throughput-reliability coefficients of operating region `z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrtCoefficients {
    pub z: usize,
    /// Throughput coefficient `c(z) = K + 1 + Nr − (2z + 1)`.
    pub c: f64,
    /// Reliability gain `g(z) = (K + 1)·Nr − z(z + 1)`.
    pub g: f64,
    /// Throughput gain `t(z) = g(z)/c(z)`.
    pub t: f64,
}

pub fn trt_coefficients(z: usize, k: usize, nr: usize) -> Result<TrtCoefficients> {
    let lt = nr.min(k + 1);
    if k == 0 || nr == 0 || z >= lt {
        return Err(Error::Domain(format!(
            "operating region z = {z} outside 0..{lt} for K = {k}, Nr = {nr}"
        )));
    }
    let (k_f, nr_f, z_f) = (k as f64, nr as f64, z as f64);
    let c = k_f + 1.0 + nr_f - (2.0 * z_f + 1.0);
    let g = (k_f + 1.0) * nr_f - z_f * (z_f + 1.0);
    Ok(TrtCoefficients { z, c, g, t: g / c })
}

/// Predicted SNR shift between outage curves `ΔR` bits apart: `3ΔR / t(z)` dB.
pub fn predicted_snr_shift_db(delta_r_bits: f64, z: usize, k: usize, nr: usize) -> Result<f64> {
    if !(delta_r_bits >= 0.0) {
        return Err(Error::Domain(format!(
            "rate difference must be nonnegative, got {delta_r_bits}"
        )));
    }
    let coeffs = trt_coefficients(z, k, nr)?;
    Ok(3.0 * delta_r_bits / coeffs.t)
}
