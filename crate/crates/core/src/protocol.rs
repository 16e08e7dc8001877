//! Test-stage simulation over i.i.d. Bell-diagonal channels.
//!
//! Randomness is counter based: the subset, the basis of the `k`-th tested
//! round and the label of round `i` each come from a fixed stream and word
//! offset of the seeded ChaCha generator, so the outcome of a run does not
//! depend on how positions are split between workers.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{SamplingGeometry, SecurityTargets};
use crate::entropy::PrimeDimension;
use crate::error::{Error, Result};
use crate::keyrate::{evaluate_flagged, EvalOptions, KeyRateResult, LeakageModel, NoiseThresholds};
use crate::mub::{outcome_class, BellLabel, BellWeights};

const SUBSET_STREAM: u64 = 0;
const BASIS_STREAM: u64 = 1;
const LABEL_STREAM: u64 = 2;
/// Words reserved per draw; rejection sampling never gets close.
const WORDS_PER_DRAW: u128 = 16;
const CHUNK: usize = 4096;
pub const ABORT_TOLERANCE: f64 = 1e-12;

/// Distribution over Bell labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    d: PrimeDimension,
    p: BellWeights,
    cdf: Vec<f64>,
}

impl ChannelModel {
    /// Normalizes nonnegative weights.
    pub fn from_weights(weights: &BellWeights) -> Result<Self> {
        let total = weights.total();
        if !(total > 0.0) || weights.as_slice().iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::Precondition(
                "channel weights must be finite, nonnegative and not all zero",
            ));
        }
        let p = weights.scaled(1.0 / total);
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = p
            .as_slice()
            .iter()
            .map(|&w| {
                acc += w;
                acc
            })
            .collect();
        *cdf.last_mut().expect("nonempty") = 1.0;
        Ok(ChannelModel {
            d: weights.dimension(),
            p,
            cdf,
        })
    }

    /// `p_0^0 = ((d+1)(1-Q) - 1)/d`, every other label `Q/(d(d-1))`.
    pub fn depolarizing(d: PrimeDimension, q: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain {
                what: "depolarizing noise Q",
                value: q,
                domain: "[0, 1]",
            });
        }
        let df = d.as_f64();
        let p00 = ((df + 1.0) * (1.0 - q) - 1.0) / df;
        if p00 < 0.0 {
            return Err(Error::Infeasible {
                negativity: -p00,
                threshold: 0.0,
            });
        }
        let mut w = vec![q / (df * (df - 1.0)); d.get() * d.get()];
        w[0] = p00;
        Self::from_weights(&BellWeights::from_row_major(d, w)?)
    }

    pub fn dimension(&self) -> PrimeDimension {
        self.d
    }

    pub fn probabilities(&self) -> &BellWeights {
        &self.p
    }

    fn label_from_uniform(&self, u: f64) -> usize {
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

fn positioned(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.set_word_pos(index as u128 * WORDS_PER_DRAW);
    rng
}

/// Label of round `i` (0-based).
fn round_label(channel: &ChannelModel, seed: u64, i: u64) -> usize {
    let mut rng = positioned(seed, LABEL_STREAM, i);
    channel.label_from_uniform(rng.random::<f64>())
}

/// Measurement record of the tested rounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundOutcomes {
    pub d: PrimeDimension,
    /// Sorted 0-based positions of the tested rounds.
    pub positions: Vec<u64>,
    pub bases: Vec<u8>,
    /// Bell label index of each tested round.
    pub labels: Vec<u16>,
    /// Observed symbol `c` of each tested round.
    pub outcomes: Vec<u8>,
}

impl RoundOutcomes {
    pub fn statistics(&self) -> ObservedStatistics {
        let mut obs = ObservedStatistics::empty(self.d);
        for (&s, &c) in self.bases.iter().zip(&self.outcomes) {
            obs.record(s as usize, c as usize);
        }
        obs
    }
}

/// Draws `N` i.i.d. labels, a size-`m` test subset and uniform bases, and
/// records the deterministic outcome of every tested round. Key-round labels
/// are never materialized.
pub fn sample_round_outcomes(
    channel: &ChannelModel,
    total: u64,
    m: u64,
    seed: u64,
) -> Result<RoundOutcomes> {
    let d = channel.d;
    SamplingGeometry::new(total, m, d)?;
    if total > u32::MAX as u64 {
        return Err(Error::Precondition("simulation supports N < 2^32 rounds"));
    }
    let mut subset_rng = ChaCha8Rng::seed_from_u64(seed);
    subset_rng.set_stream(SUBSET_STREAM);
    let mut positions: Vec<u64> =
        rand::seq::index::sample(&mut subset_rng, total as usize, m as usize)
            .into_iter()
            .map(|p| p as u64)
            .collect();
    positions.sort_unstable();

    let per_round = |k: usize| -> (u8, u16, u8) {
        let mut brng = positioned(seed, BASIS_STREAM, k as u64);
        let s = brng.random_range(0..=d.get());
        let l = round_label(channel, seed, positions[k]);
        let c = outcome_class(d, s, BellLabel::from_index(d, l));
        (s as u8, l as u16, c as u8)
    };
    let chunks = positions.len().div_ceil(CHUNK);
    let run_chunk = |ci: usize| -> Vec<(u8, u16, u8)> {
        (ci * CHUNK..((ci + 1) * CHUNK).min(positions.len()))
            .map(per_round)
            .collect()
    };

    #[cfg(feature = "parallel")]
    let parts: Vec<Vec<(u8, u16, u8)>> = {
        use rayon::prelude::*;
        (0..chunks).into_par_iter().map(run_chunk).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Vec<(u8, u16, u8)>> = (0..chunks).map(run_chunk).collect();

    let mut out = RoundOutcomes {
        d,
        positions: Vec::new(),
        bases: Vec::with_capacity(m as usize),
        labels: Vec::with_capacity(m as usize),
        outcomes: Vec::with_capacity(m as usize),
    };
    for (s, l, c) in parts.into_iter().flatten() {
        out.bases.push(s);
        out.labels.push(l);
        out.outcomes.push(c);
    }
    out.positions = positions;
    Ok(out)
}

/// Per-basis symbol counts of the tested rounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedStatistics {
    d: PrimeDimension,
    counts: Vec<u64>,
}

impl ObservedStatistics {
    pub fn empty(d: PrimeDimension) -> Self {
        ObservedStatistics {
            d,
            counts: vec![0; (d.get() + 1) * d.get()],
        }
    }

    pub fn record(&mut self, j: usize, c: usize) {
        self.counts[j * self.d.get() + c] += 1;
    }

    pub fn dimension(&self) -> PrimeDimension {
        self.d
    }

    pub fn count(&self, j: usize, c: usize) -> u64 {
        self.counts[j * self.d.get() + c]
    }

    /// `m_j`.
    pub fn basis_size(&self, j: usize) -> u64 {
        let dd = self.d.get();
        self.counts[j * dd..(j + 1) * dd].iter().sum()
    }

    /// `w(q^j_c)`; zero for an empty basis.
    pub fn frequency(&self, j: usize, c: usize) -> f64 {
        let mj = self.basis_size(j);
        if mj == 0 {
            0.0
        } else {
            self.count(j, c) as f64 / mj as f64
        }
    }

    /// Total frequency of `c >= 1` in basis `j`.
    pub fn error_frequency(&self, j: usize) -> f64 {
        (1..self.d.get()).map(|c| self.frequency(j, c)).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AbortReason {
    EmptyBasis { j: usize },
    Exceeded { j: usize, c: usize, observed: f64, threshold: f64 },
}

impl core::fmt::Display for AbortReason {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            AbortReason::EmptyBasis { j } => write!(f, "empty basis class j={j}"),
            AbortReason::Exceeded { j, c, .. } => write!(f, "({j},{c})"),
        }
    }
}

/// Aborts when any `w(q^j_c) > Q̂_c^j` or some basis was never tested.
pub fn abort_check(obs: &ObservedStatistics, qhat: &NoiseThresholds) -> (bool, Vec<AbortReason>) {
    let d = obs.d;
    let mut reasons = Vec::new();
    for j in 0..=d.get() {
        if obs.basis_size(j) == 0 {
            reasons.push(AbortReason::EmptyBasis { j });
            continue;
        }
        for c in 1..d.get() {
            let observed = obs.frequency(j, c);
            let threshold = qhat.get(j, c);
            if observed > threshold + ABORT_TOLERANCE {
                reasons.push(AbortReason::Exceeded {
                    j,
                    c,
                    observed,
                    threshold,
                });
            }
        }
    }
    (!reasons.is_empty(), reasons)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRun {
    pub seed: u64,
    pub total: u64,
    pub m: u64,
    pub observed: ObservedStatistics,
    pub aborted: bool,
    pub reasons: Vec<AbortReason>,
    /// Computed from the thresholds, present when the run did not abort.
    pub result: Option<KeyRateResult>,
}

/// Protocol parameters shared by every simulated run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSetup {
    pub total: u64,
    pub m: u64,
    pub thresholds: NoiseThresholds,
    pub targets: SecurityTargets,
    pub leak: LeakageModel,
    pub options: EvalOptions,
}

pub fn run_protocol(channel: &ChannelModel, setup: &ProtocolSetup, seed: u64) -> Result<SimulationRun> {
    if setup.thresholds.dimension() != channel.d {
        return Err(Error::Precondition("channel and thresholds differ in dimension"));
    }
    let rounds = sample_round_outcomes(channel, setup.total, setup.m, seed)?;
    let observed = rounds.statistics();
    let (aborted, reasons) = abort_check(&observed, &setup.thresholds);
    let result = if aborted {
        None
    } else {
        Some(evaluate_flagged(
            &setup.thresholds,
            setup.total,
            setup.m,
            &setup.targets,
            &setup.leak,
            &setup.options,
        )?)
    };
    Ok(SimulationRun {
        seed,
        total: setup.total,
        m: setup.m,
        observed,
        aborted,
        reasons,
        result,
    })
}
