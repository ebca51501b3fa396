//! Mutual-information models of the reference schemes.
//!
//! * DF-SDiv: fixed halves. Relays that decode in the first half join the
//!   source in the second half with distributed space-time coding; the
//!   destination combines all antennas (energy sum).
//! * AF-SDiv: every relay forwards a scaled copy of its observation; each
//!   relay path contributes the harmonic-mean SNR `ab / (a + b + 1)`.
//! * DDF: a relay joins the transmission right after it decodes.
//! * DF-MSC-rand: multi-stream cooperation with a uniformly random selection.

use crate::channel::{decode_time_for_gain, ChannelRealization, ListeningOutcome, SystemParams};
use crate::error::Result;
use crate::numerics::SeedStream;
use crate::protocol::{mutual_information_msc, random_selection};

#[inline]
fn log2_1p(x: f64) -> f64 {
    x.ln_1p() / std::f64::consts::LN_2
}

/// Relays whose half-block information `½·log2(1 + ρ_S|h_SR|²)` reaches `R`.
pub fn sdiv_decoding_set(realization: &ChannelRealization, params: &SystemParams) -> Vec<usize> {
    realization
        .h_sr
        .iter()
        .enumerate()
        .filter(|(_, h)| 0.5 * log2_1p(params.rho_s * h.norm_sqr()) >= params.rate)
        .map(|(m, _)| m)
        .collect()
}

pub fn mi_df_sdiv(realization: &ChannelRealization, params: &SystemParams) -> f64 {
    let direct_snr = params.rho_s * realization.h_sd_norm_sqr();
    let relay_snr: f64 = sdiv_decoding_set(realization, params)
        .into_iter()
        .map(|m| params.relay_power(m) * realization.h_rd_norm_sqr(m))
        .sum();
    0.5 * log2_1p(direct_snr) + 0.5 * log2_1p(direct_snr + relay_snr)
}

/// Harmonic-mean SNR of an amplify-and-forward hop pair.
#[inline]
pub fn af_combiner(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        return 0.0;
    }
    a * b / (a + b + 1.0)
}

pub fn mi_af_sdiv(realization: &ChannelRealization, params: &SystemParams) -> f64 {
    let relay_snr: f64 = (0..params.m)
        .map(|m| {
            af_combiner(
                params.rho_s * realization.h_sr[m].norm_sqr(),
                params.relay_power(m) * realization.h_rd_norm_sqr(m),
            )
        })
        .sum();
    0.5 * log2_1p(params.rho_s * realization.h_sd_norm_sqr() + relay_snr)
}

/// Dynamic decode-and-forward. A relay that decodes at channel use `l`
/// transmits from use `l + 1` on; the destination accumulates
/// `log2(1 + ρ_S‖h_SD‖² + Σ_active ρ_m‖h_RD,m‖²)` per use.
pub fn mi_ddf(realization: &ChannelRealization, params: &SystemParams) -> f64 {
    let mut joins: Vec<(usize, f64)> = (0..params.m)
        .filter_map(|m| {
            decode_time_for_gain(realization.h_sr[m].norm_sqr(), params)
                .map(|t| (t, params.relay_power(m) * realization.h_rd_norm_sqr(m)))
        })
        .collect();
    joins.sort_by_key(|&(t, _)| t);

    let n = params.n;
    let mut snr = params.rho_s * realization.h_sd_norm_sqr();
    let mut total = 0.0;
    // Uses 1..=start-1 are already accounted for.
    let mut start = 1usize;
    let mut i = 0;
    while i < joins.len() {
        let t = joins[i].0;
        // Uses start..=t run at the current SNR; the relays decoding at t
        // join from t + 1.
        let end = t.min(n);
        if end >= start {
            total += (end + 1 - start) as f64 * log2_1p(snr);
            start = end + 1;
        }
        while i < joins.len() && joins[i].0 == t {
            snr += joins[i].1;
            i += 1;
        }
    }
    if start <= n {
        total += (n + 1 - start) as f64 * log2_1p(snr);
    }
    total / n as f64
}

/// DF-MSC with a uniformly random selection drawn from `stream`.
pub fn mi_df_msc_rand(
    realization: &ChannelRealization,
    outcome: &ListeningOutcome,
    stream: &SeedStream,
    params: &SystemParams,
) -> Result<f64> {
    let selection = random_selection(stream, outcome.decoding_set.len() + 1, params.nr)?;
    mutual_information_msc(realization, outcome, &selection, params)
}
