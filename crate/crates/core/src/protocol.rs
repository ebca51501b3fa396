//! Multi-stream cooperation with optimal node selection (DF-MSC-opt).
//!
//! After the listening phase the destination picks which of the `|D| + 1`
//! candidate nodes (the source plus every decoded relay) transmit in the
//! cooperative phase. Candidate `0` is the source; candidate `j >= 1` is the
//! `j`-th relay of the decoding set in ascending relay order.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;

use crate::channel::{ChannelRealization, ListeningOutcome, SystemParams};
use crate::error::{Error, Result};
use num_complex::Complex64;

use crate::numerics::{
    add_assign, binomial_u128, identity_lower, log2_det_hpd_in_place, weighted_capacity_logdet,
    weighted_outer_lower, SeedStream,
};

/// Default cap on the number of subsets an exhaustive search may visit.
pub const ENUMERATION_CAP: u64 = 1_000_000;

/// Candidate indices chosen to transmit, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeSelection {
    nodes: Vec<usize>,
}

impl NodeSelection {
    pub fn new(nodes: Vec<usize>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Domain("a selection needs at least one node".into()));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(format!(
                "selection indices must be strictly increasing, got {nodes:?}"
            )));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn includes_source(&self) -> bool {
        self.nodes.first() == Some(&0)
    }
}

/// Number of nodes that transmit in the cooperative phase.
#[inline]
pub fn selection_size(candidate_count: usize, nr: usize) -> usize {
    candidate_count.min(nr)
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order.
pub(crate) fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k == 0 || k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn check_cap(candidate_count: usize, nr: usize, cap: u64) -> Result<()> {
    let count = binomial_u128(
        candidate_count as u64,
        selection_size(candidate_count, nr) as u64,
    );
    if count > u128::from(cap) {
        return Err(Error::EnumerationCap { count, cap });
    }
    Ok(())
}

/// The selection space: every `Nr`-subset of the candidates in lexicographic
/// order, or the single all-candidates selection when there are at most `Nr`.
pub fn enumerate_selections(candidate_count: usize, nr: usize) -> Result<Vec<NodeSelection>> {
    enumerate_selections_capped(candidate_count, nr, ENUMERATION_CAP)
}

pub fn enumerate_selections_capped(
    candidate_count: usize,
    nr: usize,
    cap: u64,
) -> Result<Vec<NodeSelection>> {
    if candidate_count == 0 || nr == 0 {
        return Err(Error::Domain(
            "need at least one candidate and one antenna".into(),
        ));
    }
    check_cap(candidate_count, nr, cap)?;
    let mut out = Vec::new();
    for_each_combination(candidate_count, selection_size(candidate_count, nr), |s| {
        out.push(NodeSelection { nodes: s.to_vec() })
    });
    Ok(out)
}

/// Per-candidate transmit SNR: source at `ρ_S`, relays at their own power.
fn candidate_gains(decoding_set: &[usize], params: &SystemParams) -> Vec<f64> {
    std::iter::once(params.rho_s)
        .chain(decoding_set.iter().map(|&r| params.relay_power(r)))
        .collect()
}

/// Cooperative-phase rate `log2 det(I + Σ_{j∈V} ρ_j h_j h_jᴴ)` of one selection.
pub fn selection_rate(
    realization: &ChannelRealization,
    decoding_set: &[usize],
    selection: &NodeSelection,
    params: &SystemParams,
) -> Result<f64> {
    let candidates = decoding_set.len() + 1;
    if selection.nodes.iter().any(|&j| j >= candidates) {
        return Err(Error::Domain(format!(
            "selection {:?} exceeds {candidates} candidates",
            selection.nodes
        )));
    }
    let agg = realization.aggregate_matrix(decoding_set);
    let all_gains = candidate_gains(decoding_set, params);
    let gains: Vec<f64> = selection.nodes.iter().map(|&j| all_gains[j]).collect();
    weighted_capacity_logdet(&agg, &selection.nodes, &gains)
}

/// Exhaustive search for the selection maximizing the cooperative-phase rate.
/// Ties keep the lexicographically smallest subset.
pub fn optimal_selection(
    realization: &ChannelRealization,
    decoding_set: &[usize],
    params: &SystemParams,
) -> Result<(NodeSelection, f64)> {
    optimal_selection_capped(realization, decoding_set, params, ENUMERATION_CAP)
}

pub fn optimal_selection_capped(
    realization: &ChannelRealization,
    decoding_set: &[usize],
    params: &SystemParams,
    cap: u64,
) -> Result<(NodeSelection, f64)> {
    let candidates = decoding_set.len() + 1;
    check_cap(candidates, params.nr, cap)?;
    let agg = realization.aggregate_matrix(decoding_set);
    let all_gains = candidate_gains(decoding_set, params);
    let size = selection_size(candidates, params.nr);
    let n = agg.rows();
    let block = n * n;

    let mut outers = vec![Complex64::new(0.0, 0.0); candidates * block];
    for (j, chunk) in outers.chunks_exact_mut(block).enumerate() {
        weighted_outer_lower(&agg, j, all_gains[j], chunk);
    }

    let mut search = SubsetSearch {
        n,
        size,
        candidates,
        outers: &outers,
        partial: vec![Complex64::new(0.0, 0.0); (size + 1) * block],
        scratch: vec![Complex64::new(0.0, 0.0); block],
        current: vec![0; size],
        best_nodes: Vec::new(),
        best_rate: f64::NEG_INFINITY,
    };
    search.partial[..block].copy_from_slice(&identity_lower(n));
    search.descend(0, 0)?;
    Ok((
        NodeSelection {
            nodes: search.best_nodes,
        },
        search.best_rate,
    ))
}

/// Depth-first walk of the `size`-subsets in lexicographic order, keeping the
/// partial sums `I + Σ ρ_j h_j h_jᴴ` of each prefix so every leaf costs one
/// addition and one Cholesky factorization. The accumulation order matches
/// [`weighted_capacity_logdet`], so leaf values equal [`selection_rate`].
struct SubsetSearch<'a> {
    n: usize,
    size: usize,
    candidates: usize,
    outers: &'a [Complex64],
    partial: Vec<Complex64>,
    scratch: Vec<Complex64>,
    current: Vec<usize>,
    best_nodes: Vec<usize>,
    best_rate: f64,
}

impl SubsetSearch<'_> {
    fn descend(&mut self, depth: usize, first: usize) -> Result<()> {
        let block = self.n * self.n;
        let last_start = self.candidates - (self.size - depth);
        for j in first..=last_start {
            self.current[depth] = j;
            let term = &self.outers[j * block..(j + 1) * block];
            if depth + 1 == self.size {
                self.scratch
                    .copy_from_slice(&self.partial[depth * block..(depth + 1) * block]);
                add_assign(&mut self.scratch, term);
                let rate = log2_det_hpd_in_place(&mut self.scratch, self.n)?;
                if rate > self.best_rate {
                    self.best_rate = rate;
                    self.best_nodes.clone_from(&self.current);
                }
            } else {
                let (head, tail) = self.partial.split_at_mut((depth + 1) * block);
                let next = &mut tail[..block];
                next.copy_from_slice(&head[depth * block..]);
                add_assign(next, term);
                self.descend(depth + 1, j + 1)?;
            }
        }
        Ok(())
    }
}

/// End-to-end mutual information of a multi-stream cooperative transmission,
/// bits per channel use:
/// `(1/N)·[n1·log2(1 + ρ_S‖h_SD‖²) + (N − n1)·log2 det(I + Σ ρ_j h_j h_jᴴ)]`.
pub fn mutual_information_msc(
    realization: &ChannelRealization,
    outcome: &ListeningOutcome,
    selection: &NodeSelection,
    params: &SystemParams,
) -> Result<f64> {
    let n1 = outcome
        .n1
        .ok_or_else(|| Error::Domain("listening phase did not end within N".into()))?;
    let cooperative = if n1 < params.n {
        selection_rate(realization, &outcome.decoding_set, selection, params)?
    } else {
        0.0
    };
    Ok(combine_phases(
        n1,
        direct_rate(realization, params),
        cooperative,
        params.n,
    ))
}

#[inline]
pub(crate) fn combine_phases(n1: usize, direct: f64, cooperative: f64, n: usize) -> f64 {
    let n1 = n1.min(n);
    (n1 as f64 * direct + (n - n1) as f64 * cooperative) / n as f64
}

/// `log2(1 + ρ_S ‖h_SD‖²)`.
#[inline]
pub fn direct_rate(realization: &ChannelRealization, params: &SystemParams) -> f64 {
    (params.rho_s * realization.h_sd_norm_sqr()).ln_1p() / std::f64::consts::LN_2
}

/// Outage: mutual information strictly below the target rate.
#[inline]
pub fn outage_indicator(mi: f64, rate: f64) -> bool {
    mi < rate
}

/// The `(M + 1)`-bit pattern the destination broadcasts. Bit 0 is the source,
/// bit `m + 1` is relay `m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeedbackPattern {
    bits: Vec<bool>,
}

impl FeedbackPattern {
    pub fn from_bits(bits: Vec<bool>) -> Result<Self> {
        if bits.len() < 2 {
            return Err(Error::MalformedPattern(format!(
                "pattern needs M + 1 >= 2 bits, got {}",
                bits.len()
            )));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn relay_count(&self) -> usize {
        self.bits.len() - 1
    }

    pub fn source_selected(&self) -> bool {
        self.bits[0]
    }

    /// Relay indices whose bit is set, ascending.
    pub fn selected_relays(&self) -> Vec<usize> {
        self.bits[1..]
            .iter()
            .enumerate()
            .filter_map(|(m, &b)| b.then_some(m))
            .collect()
    }

    /// `(bit position, codeword row)` pairs: the `k`-th set bit, scanning from
    /// position 0, sends row `k` (1-based) of the codeword.
    pub fn stream_assignment(&self) -> Vec<(usize, usize)> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .enumerate()
            .map(|(row, (pos, _))| (pos, row + 1))
            .collect()
    }
}

impl fmt::Display for FeedbackPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for FeedbackPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::MalformedPattern(format!(
                    "unexpected character {other:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(bits)
    }
}

pub fn encode_feedback_pattern(
    selection: &NodeSelection,
    decoding_set: &[usize],
    m: usize,
) -> Result<FeedbackPattern> {
    let mut bits = vec![false; m + 1];
    for &node in &selection.nodes {
        if node == 0 {
            bits[0] = true;
            continue;
        }
        let relay = *decoding_set.get(node - 1).ok_or_else(|| {
            Error::Consistency(format!(
                "candidate {node} has no relay in a decoding set of size {}",
                decoding_set.len()
            ))
        })?;
        if relay >= m {
            return Err(Error::Consistency(format!(
                "relay {relay} out of range for M = {m}"
            )));
        }
        bits[relay + 1] = true;
    }
    FeedbackPattern::from_bits(bits)
}

/// Inverse of [`encode_feedback_pattern`] relative to the same decoding set.
pub fn decode_feedback_pattern(
    pattern: &FeedbackPattern,
    decoding_set: &[usize],
) -> Result<NodeSelection> {
    if !pattern.bits.iter().any(|&b| b) {
        return Err(Error::MalformedPattern("no node selected".into()));
    }
    let mut nodes = Vec::new();
    if pattern.source_selected() {
        nodes.push(0);
    }
    for relay in pattern.selected_relays() {
        let pos = decoding_set
            .iter()
            .position(|&d| d == relay)
            .ok_or_else(|| {
                Error::Consistency(format!(
                    "relay {relay} selected but not in the decoding set"
                ))
            })?;
        nodes.push(pos + 1);
    }
    nodes.sort_unstable();
    NodeSelection::new(nodes)
}

/// Uniform draw from the selection space.
pub fn random_selection(
    stream: &SeedStream,
    candidate_count: usize,
    nr: usize,
) -> Result<NodeSelection> {
    if candidate_count == 0 || nr == 0 {
        return Err(Error::Domain(
            "need at least one candidate and one antenna".into(),
        ));
    }
    let size = selection_size(candidate_count, nr);
    if size == candidate_count {
        return Ok(NodeSelection {
            nodes: (0..candidate_count).collect(),
        });
    }
    let mut sampler = stream.sampler();
    let mut nodes = index::sample(sampler.rng(), candidate_count, size).into_vec();
    nodes.sort_unstable();
    Ok(NodeSelection { nodes })
}
