//! Scenario parameters, block-fading channel draws and the listening phase.
//!
//! Relays are indexed `0..M` throughout. During the listening phase each relay
//! hears the source's single-antenna transmission and accumulates
//! `log2(1 + ρ_S |h_SR,m|²)` bits per channel use; it decodes at the first
//! channel use where the accumulated information reaches `N·R`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::{db_to_linear, ComplexMatrix, SeedStream};

pub const MAX_RELAYS: usize = 64;
pub const DEFAULT_CODEWORD_LENGTH: usize = 200;

/// Every constant of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams {
    /// Relay count `M`.
    pub m: usize,
    /// Number of decoded relays that ends the listening phase.
    pub k: usize,
    /// Destination antennas.
    pub nr: usize,
    /// Codeword length in channel uses.
    pub n: usize,
    /// Target rate, bits per channel use.
    pub rate: f64,
    /// Source transmit SNR, linear.
    pub rho_s: f64,
    /// Per-relay transmit SNR, linear. `None` means every relay transmits at
    /// `rho_s`.
    pub relay_powers: Option<Vec<f64>>,
    /// Source-relay link variance, linear.
    pub sigma2_sr: f64,
    /// Common source-destination and relay-destination link variance, linear.
    pub sigma2_d: f64,
}

impl SystemParams {
    /// Unit link variances, `N = 200`, equal relay powers.
    pub fn new(m: usize, k: usize, nr: usize, rate: f64, rho_s: f64) -> Result<Self> {
        let p = Self {
            m,
            k,
            nr,
            n: DEFAULT_CODEWORD_LENGTH,
            rate,
            rho_s,
            relay_powers: None,
            sigma2_sr: 1.0,
            sigma2_d: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidParams(msg));
        if self.m == 0 || self.m > MAX_RELAYS {
            return fail(format!("M must be in 1..={MAX_RELAYS}, got {}", self.m));
        }
        if self.k == 0 || self.k > self.m {
            return fail(format!(
                "K must satisfy 1 <= K <= M, got K={} M={}",
                self.k, self.m
            ));
        }
        if self.nr == 0 {
            return fail("Nr must be at least 1".into());
        }
        if self.n < 2 {
            return fail(format!("N must be at least 2, got {}", self.n));
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.rate) {
            return fail(format!("R must be positive, got {}", self.rate));
        }
        if !positive(self.rho_s) {
            return fail(format!("rho_s must be positive, got {}", self.rho_s));
        }
        if !positive(self.sigma2_sr) || !positive(self.sigma2_d) {
            return fail("link variances must be positive".into());
        }
        if let Some(powers) = &self.relay_powers {
            if powers.len() != self.m {
                return fail(format!(
                    "relay_powers needs {} entries, got {}",
                    self.m,
                    powers.len()
                ));
            }
            if !powers.iter().all(|&p| positive(p)) {
                return fail("relay powers must be positive".into());
            }
        }
        Ok(())
    }

    #[inline]
    pub fn relay_power(&self, relay: usize) -> f64 {
        match &self.relay_powers {
            Some(p) => p[relay],
            None => self.rho_s,
        }
    }

    /// Same scenario at a different source SNR. Explicit relay powers keep
    /// their ratio to the source power.
    pub fn with_snr_db(&self, snr_db: f64) -> Self {
        let rho = db_to_linear(snr_db);
        let scale = rho / self.rho_s;
        Self {
            rho_s: rho,
            relay_powers: self
                .relay_powers
                .as_ref()
                .map(|p| p.iter().map(|v| v * scale).collect()),
            ..self.clone()
        }
    }

    pub fn with_rate(&self, rate: f64) -> Self {
        Self {
            rate,
            ..self.clone()
        }
    }

    /// Target information per codeword, `N·R` bits.
    #[inline]
    pub fn codeword_bits(&self) -> f64 {
        self.n as f64 * self.rate
    }
}

/// One block-fading realization of every link.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Source to relay `m`.
    pub h_sr: Vec<Complex64>,
    /// Source to each destination antenna.
    pub h_sd: Vec<Complex64>,
    /// `Nr x M`; column `m` holds relay `m`'s gains to the destination antennas.
    pub h_rd: ComplexMatrix,
}

impl ChannelRealization {
    pub fn h_sd_norm_sqr(&self) -> f64 {
        self.h_sd.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn h_rd_norm_sqr(&self, relay: usize) -> f64 {
        self.h_rd.column_norm_sqr(relay)
    }

    /// `[h_SD | h_RD,d₁ | h_RD,d₂ | …]` for the relays in `decoding_set`.
    pub fn aggregate_matrix(&self, decoding_set: &[usize]) -> ComplexMatrix {
        let nr = self.h_sd.len();
        let cols = decoding_set.len() + 1;
        let mut out = ComplexMatrix::zeros(nr, cols);
        for (i, &z) in self.h_sd.iter().enumerate() {
            out.set(i, 0, z);
        }
        for (j, &relay) in decoding_set.iter().enumerate() {
            for i in 0..nr {
                out.set(i, j + 1, self.h_rd.get(i, relay));
            }
        }
        out
    }
}

/// Draws every link gain from `stream`. Sampling order is fixed: `h_sr` by
/// relay, then `h_sd` by antenna, then `h_rd` relay by relay.
pub fn draw_channel(params: &SystemParams, stream: &SeedStream) -> ChannelRealization {
    let mut sampler = stream.sampler();
    let h_sr = (0..params.m)
        .map(|_| sampler.complex_gaussian(params.sigma2_sr))
        .collect();
    let h_sd = (0..params.nr)
        .map(|_| sampler.complex_gaussian(params.sigma2_d))
        .collect();
    let mut h_rd = ComplexMatrix::zeros(params.nr, params.m);
    for relay in 0..params.m {
        for ant in 0..params.nr {
            h_rd.set(ant, relay, sampler.complex_gaussian(params.sigma2_d));
        }
    }
    ChannelRealization { h_sr, h_sd, h_rd }
}

/// First channel use `l` (1-based) with `l · log2(1 + ρ_S |h|²) ≥ N·R`, or
/// `None` when that takes more than `N` uses.
pub fn decode_time(h: Complex64, params: &SystemParams) -> Option<usize> {
    decode_time_for_gain(h.norm_sqr(), params)
}

pub(crate) fn decode_time_for_gain(gain: f64, params: &SystemParams) -> Option<usize> {
    let per_use = (params.rho_s * gain).ln_1p() / std::f64::consts::LN_2;
    if !(per_use > 0.0) {
        return None;
    }
    let target = params.codeword_bits();
    let ratio = target / per_use;
    if !(ratio <= params.n as f64 + 1.0) {
        return None;
    }
    let mut l = (ratio.ceil() as usize).max(1);
    // Settle rounding at exact multiples against the defining inequality.
    if l > 1 && (l - 1) as f64 * per_use >= target {
        l -= 1;
    } else if (l as f64) * per_use < target {
        l += 1;
    }
    (l <= params.n).then_some(l)
}

/// Result of the listening phase for one realization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListeningOutcome {
    /// Per relay: the channel use at which it decodes, if within `N`.
    pub decode_times: Vec<Option<usize>>,
    /// Listening-phase length; `None` when fewer than `K` relays decode within
    /// `N` and the source uses the direct link only.
    pub n1: Option<usize>,
    /// Relays (ascending index) decoded by `n1`. Empty when `n1` is `None`.
    pub decoding_set: Vec<usize>,
}

impl ListeningOutcome {
    /// Applies the order-statistic rule: `n1` is the `K`-th smallest decode
    /// time and every relay decoded by then, ties included, joins the set.
    pub fn from_decode_times(decode_times: Vec<Option<usize>>, k: usize) -> Self {
        let mut finite: Vec<usize> = decode_times.iter().flatten().copied().collect();
        let n1 = if k >= 1 && finite.len() >= k {
            let (_, kth, _) = finite.select_nth_unstable(k - 1);
            Some(*kth)
        } else {
            None
        };
        let decoding_set = match n1 {
            Some(n1) => decode_times
                .iter()
                .enumerate()
                .filter_map(|(m, t)| matches!(t, Some(t) if *t <= n1).then_some(m))
                .collect(),
            None => Vec::new(),
        };
        Self {
            decode_times,
            n1,
            decoding_set,
        }
    }

    pub fn is_direct_only(&self) -> bool {
        self.n1.is_none()
    }
}

pub fn listening_outcome(
    realization: &ChannelRealization,
    params: &SystemParams,
) -> ListeningOutcome {
    let times = realization
        .h_sr
        .iter()
        .map(|&h| decode_time(h, params))
        .collect();
    ListeningOutcome::from_decode_times(times, params.k)
}
