//! Deterministic parallel Monte-Carlo estimation.
//!
//! Trial `i` always draws its channel from `SeedStream(master_seed, i)`, so
//! every scheme, SNR point and rate sees the same fading realizations (common
//! random numbers), and counts are reduced as integers in any order.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use rayon::ThreadPool;

use crate::analysis::outage_upper_bound;
use crate::baselines::{mi_af_sdiv, mi_ddf, mi_df_msc_rand, mi_df_sdiv};
use crate::channel::{draw_channel, listening_outcome, SystemParams};
use crate::error::{Error, Result};
use crate::numerics::SeedStream;
use crate::protocol::{
    direct_rate, mutual_information_msc, optimal_selection, outage_indicator, NodeSelection,
};

/// Domain tag separating random-selection draws from channel draws.
const SELECTION_STREAM: u64 = 0x5e1e_c710;

/// Two-sided 95% standard normal quantile.
const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    DfMscOpt,
    DfMscRand,
    DfSdiv,
    AfSdiv,
    Ddf,
    Direct,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::DfMscOpt,
        Scheme::DfMscRand,
        Scheme::DfSdiv,
        Scheme::AfSdiv,
        Scheme::Ddf,
        Scheme::Direct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::DfMscOpt => "df-msc-opt",
            Scheme::DfMscRand => "df-msc-rand",
            Scheme::DfSdiv => "df-sdiv",
            Scheme::AfSdiv => "af-sdiv",
            Scheme::Ddf => "ddf",
            Scheme::Direct => "direct",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.name() == key)
            .ok_or_else(|| Error::Domain(format!("unknown scheme {s:?}")))
    }
}

/// Everything one trial produced, for traces and per-trial assertions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub outage: bool,
    pub mutual_information: f64,
    /// Listening-phase length for the multi-stream schemes; `None` when the
    /// scheme has no listening phase or it ran past the codeword.
    pub n1: Option<usize>,
    pub decoding_set_size: usize,
    pub selection: Option<NodeSelection>,
}

/// One trial of `scheme` on the fading realization of `trial_index`.
pub fn run_trial(
    scheme: Scheme,
    params: &SystemParams,
    trial_index: u64,
    master_seed: u64,
) -> Result<TrialOutcome> {
    let stream = SeedStream::new(master_seed, trial_index);
    let realization = draw_channel(params, &stream);
    let mut n1 = None;
    let mut decoding_set_size = 0;
    let mut selection = None;
    let mi = match scheme {
        Scheme::DfMscOpt | Scheme::DfMscRand => {
            let outcome = listening_outcome(&realization, params);
            n1 = outcome.n1;
            decoding_set_size = outcome.decoding_set.len();
            if outcome.n1.is_none() {
                direct_rate(&realization, params)
            } else if scheme == Scheme::DfMscOpt {
                let (sel, _) = optimal_selection(&realization, &outcome.decoding_set, params)?;
                let mi = mutual_information_msc(&realization, &outcome, &sel, params)?;
                selection = Some(sel);
                mi
            } else {
                mi_df_msc_rand(
                    &realization,
                    &outcome,
                    &stream.substream(SELECTION_STREAM),
                    params,
                )?
            }
        }
        Scheme::DfSdiv => mi_df_sdiv(&realization, params),
        Scheme::AfSdiv => mi_af_sdiv(&realization, params),
        Scheme::Ddf => mi_ddf(&realization, params),
        Scheme::Direct => direct_rate(&realization, params),
    };
    Ok(TrialOutcome {
        outage: outage_indicator(mi, params.rate),
        mutual_information: mi,
        n1,
        decoding_set_size,
        selection,
    })
}

/// Outage count with a 95% Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithCI {
    pub trials: u64,
    pub outages: u64,
    pub p_out: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl EstimateWithCI {
    pub fn from_counts(trials: u64, outages: u64) -> Self {
        assert!(trials > 0 && outages <= trials);
        let n = trials as f64;
        let p = outages as f64 / n;
        let (lo, hi) = wilson_interval(p, n, Z_95);
        Self {
            trials,
            outages,
            p_out: p,
            ci_low: lo.min(p),
            ci_high: hi.max(p),
        }
    }

    /// Binomial standard error `√(p̂(1−p̂)/n)`.
    pub fn std_error(&self) -> f64 {
        (self.p_out * (1.0 - self.p_out) / self.trials as f64).sqrt()
    }
}

fn wilson_interval(p: f64, n: f64, z: f64) -> (f64, f64) {
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Monte-Carlo runner bound to a fixed-size worker pool.
pub struct Engine {
    pool: ThreadPool,
    workers: usize,
}

impl fmt::Debug for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Engine")
            .field("workers", &self.workers)
            .finish()
    }
}

/// Coarse rate grid used to check that outage grows with rate before bisecting.
const MONOTONICITY_GRID: usize = 8;

impl Engine {
    pub fn new(workers: usize) -> Result<Self> {
        let workers = workers.max(1);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::InvalidParams(format!("cannot start {workers} workers: {e}")))?;
        Ok(Self { pool, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn estimate_outage(
        &self,
        scheme: Scheme,
        params: &SystemParams,
        trials: u64,
        master_seed: u64,
    ) -> Result<EstimateWithCI> {
        if trials == 0 {
            return Err(Error::Domain("need at least one trial".into()));
        }
        params.validate()?;
        let outages = self.pool.install(|| {
            (0..trials)
                .into_par_iter()
                .map(|i| run_trial(scheme, params, i, master_seed).map(|t| u64::from(t.outage)))
                .try_reduce(|| 0, |a, b| Ok(a + b))
        })?;
        Ok(EstimateWithCI::from_counts(trials, outages))
    }

    /// Outage estimates along an SNR grid. Every point reuses `master_seed`,
    /// so each trial index sees the same channel at every SNR.
    pub fn snr_sweep(
        &self,
        scheme: Scheme,
        params: &SystemParams,
        snr_grid_db: &[f64],
        trials: u64,
        master_seed: u64,
    ) -> Result<SweepResult> {
        if snr_grid_db.is_empty() {
            return Err(Error::Domain("SNR grid is empty".into()));
        }
        if snr_grid_db.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("SNR grid must be strictly increasing".into()));
        }
        let mut rows = Vec::with_capacity(snr_grid_db.len());
        for &snr_db in snr_grid_db {
            let point = params.with_snr_db(snr_db);
            let estimate = self.estimate_outage(scheme, &point, trials, master_seed)?;
            let bound = (scheme == Scheme::DfMscOpt).then(|| outage_upper_bound(&point));
            rows.push(SweepRow {
                snr_db,
                rate: params.rate,
                estimate,
                bound,
            });
        }
        Ok(SweepResult {
            scheme,
            master_seed,
            rows,
        })
    }

    /// Largest rate whose estimated outage stays at or below `target_pout`,
    /// found by bisection to within `rate_tolerance`.
    #[allow(clippy::too_many_arguments)]
    pub fn outage_capacity(
        &self,
        scheme: Scheme,
        params: &SystemParams,
        target_pout: f64,
        snr_db: f64,
        rate_tolerance: f64,
        trials: u64,
        master_seed: u64,
    ) -> Result<f64> {
        if !(target_pout > 0.0 && target_pout < 1.0) {
            return Err(Error::Domain(format!(
                "target outage must be in (0, 1), got {target_pout}"
            )));
        }
        if !(rate_tolerance > 0.0) {
            return Err(Error::Domain("rate tolerance must be positive".into()));
        }
        const RATE_FLOOR: f64 = 1.0 / 64.0;
        const RATE_CEILING: f64 = 1024.0;
        let base = params.with_snr_db(snr_db);
        let p_at =
            |rate: f64| self.estimate_outage(scheme, &base.with_rate(rate), trials, master_seed);

        let floor = p_at(RATE_FLOOR)?;
        if floor.p_out > target_pout {
            return Err(Error::NonBracketing(format!(
                "{scheme} at {snr_db} dB has outage {} > {target_pout} already at rate {RATE_FLOOR}",
                floor.p_out
            )));
        }
        let mut lo = RATE_FLOOR;
        let mut hi = 2.0 * RATE_FLOOR;
        loop {
            if p_at(hi)?.p_out > target_pout {
                break;
            }
            lo = hi;
            hi *= 2.0;
            if hi > RATE_CEILING {
                return Err(Error::NonBracketing(format!(
                    "{scheme} at {snr_db} dB stays below outage {target_pout} up to rate {RATE_CEILING}"
                )));
            }
        }
        self.check_rate_monotonicity(scheme, &base, RATE_FLOOR, hi, trials, master_seed)?;
        while hi - lo > rate_tolerance {
            let mid = 0.5 * (lo + hi);
            if p_at(mid)?.p_out <= target_pout {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }

    fn check_rate_monotonicity(
        &self,
        scheme: Scheme,
        base: &SystemParams,
        lo: f64,
        hi: f64,
        trials: u64,
        master_seed: u64,
    ) -> Result<()> {
        let mut prev: Option<(f64, EstimateWithCI)> = None;
        for i in 0..MONOTONICITY_GRID {
            let rate = lo + (hi - lo) * i as f64 / (MONOTONICITY_GRID - 1) as f64;
            let est = self.estimate_outage(scheme, &base.with_rate(rate), trials, master_seed)?;
            if let Some((prev_rate, prev_est)) = prev {
                let slack = 3.0 * (prev_est.std_error().powi(2) + est.std_error().powi(2)).sqrt();
                if est.p_out + slack < prev_est.p_out {
                    return Err(Error::Monotonicity(format!(
                        "{scheme}: outage {} at rate {rate} below {} at rate {prev_rate}",
                        est.p_out, prev_est.p_out
                    )));
                }
            }
            prev = Some((rate, est));
        }
        Ok(())
    }

    /// SNR (dB) at which the outage curve of `params` crosses `target_pout`.
    ///
    /// The curve is sampled on the `search` grid; a pilot pass with fewer
    /// trials locates the crossing, then the bracketing grid points are
    /// re-estimated with the full trial count and `log p_out` is interpolated
    /// linearly between them.
    pub fn snr_at_outage(
        &self,
        scheme: Scheme,
        params: &SystemParams,
        target_pout: f64,
        search: &SnrSearch,
        trials: u64,
        master_seed: u64,
    ) -> Result<f64> {
        search.validate()?;
        let grid = search.grid();
        let pilot_trials = (trials / 100).max(10_000).min(trials);
        let estimate =
            |db: f64, n: u64| self.estimate_outage(scheme, &params.with_snr_db(db), n, master_seed);

        let mut start = 0;
        if pilot_trials < trials {
            // First grid point whose pilot estimate is at or below target.
            let mut crossing = None;
            for (i, &db) in grid.iter().enumerate() {
                if estimate(db, pilot_trials)?.p_out <= target_pout {
                    crossing = Some(i);
                    break;
                }
            }
            start = crossing.map_or(grid.len().saturating_sub(2), |i| i.saturating_sub(2));
        }

        let mut prev: Option<(f64, f64)> = None;
        if start > 0 {
            let db = grid[start - 1];
            let p = estimate(db, trials)?.p_out;
            if p <= target_pout {
                // Pilot overshot; fall back to a full scan from the bottom.
                start = 0;
            } else {
                prev = Some((db, p));
            }
        }
        for &db in &grid[start..] {
            let p = estimate(db, trials)?.p_out;
            if p <= target_pout {
                let Some((db0, p0)) = prev else {
                    return Err(Error::NonBracketing(format!(
                        "{scheme}: outage {p} at {db} dB is already below {target_pout}"
                    )));
                };
                return Ok(interpolate_crossing(db0, p0, db, p, target_pout));
            }
            prev = Some((db, p));
        }
        Err(Error::NonBracketing(format!(
            "{scheme}: outage never reaches {target_pout} by {} dB",
            search.stop_db
        )))
    }

    /// SNR gap (dB) between the outage curves at `rate_b` and `rate_a` where
    /// they cross `target_pout`.
    #[allow(clippy::too_many_arguments)]
    pub fn measure_snr_shift_db(
        &self,
        scheme: Scheme,
        params: &SystemParams,
        rate_a: f64,
        rate_b: f64,
        target_pout: f64,
        search: &SnrSearch,
        trials: u64,
        master_seed: u64,
    ) -> Result<SnrShift> {
        if !(rate_b > rate_a) {
            return Err(Error::Domain(format!(
                "need rate_b > rate_a, got {rate_a} and {rate_b}"
            )));
        }
        if !(target_pout > 0.0 && target_pout < 1.0) {
            return Err(Error::Domain(format!(
                "target outage must be in (0, 1), got {target_pout}"
            )));
        }
        let snr_a_db = self.snr_at_outage(
            scheme,
            &params.with_rate(rate_a),
            target_pout,
            search,
            trials,
            master_seed,
        )?;
        let snr_b_db = self.snr_at_outage(
            scheme,
            &params.with_rate(rate_b),
            target_pout,
            search,
            trials,
            master_seed,
        )?;
        Ok(SnrShift {
            snr_a_db,
            snr_b_db,
            shift_db: snr_b_db - snr_a_db,
        })
    }
}

/// Point on the segment between `(db0, p0)` and `(db1, p1)` where the curve
/// equals `target`, linear in `log p` (linear in `p` when `p1` is zero).
fn interpolate_crossing(db0: f64, p0: f64, db1: f64, p1: f64, target: f64) -> f64 {
    let frac = if p1 > 0.0 {
        (p0.ln() - target.ln()) / (p0.ln() - p1.ln())
    } else {
        (p0 - target) / (p0 - p1)
    };
    db0 + frac.clamp(0.0, 1.0) * (db1 - db0)
}

/// Grid searched for an outage crossing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrSearch {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
}

impl SnrSearch {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_db > 0.0) || !(self.stop_db > self.start_db) {
            return Err(Error::Domain(format!("invalid SNR search range {self:?}")));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        snr_grid(self.start_db, self.stop_db, self.step_db)
    }
}

/// `start, start + step, …` up to and including `stop` (with a small
/// tolerance for accumulated rounding). Points are computed as
/// `start + i·step` so they do not drift.
pub fn snr_grid(start_db: f64, stop_db: f64, step_db: f64) -> Vec<f64> {
    if !(step_db > 0.0) || stop_db < start_db {
        return vec![start_db];
    }
    let count = ((stop_db - start_db) / step_db + 1e-9).floor() as usize + 1;
    (0..count).map(|i| start_db + i as f64 * step_db).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrShift {
    pub snr_a_db: f64,
    pub snr_b_db: f64,
    pub shift_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub snr_db: f64,
    pub rate: f64,
    pub estimate: EstimateWithCI,
    /// Analytic upper bound, for DF-MSC-opt rows only.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub scheme: Scheme,
    pub master_seed: u64,
    pub rows: Vec<SweepRow>,
}

/// Single-call convenience around [`Engine::estimate_outage`].
pub fn estimate_outage(
    scheme: Scheme,
    params: &SystemParams,
    trials: u64,
    master_seed: u64,
    worker_count: usize,
) -> Result<EstimateWithCI> {
    Engine::new(worker_count)?.estimate_outage(scheme, params, trials, master_seed)
}
