//! Finite-key length from abort thresholds.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::bounds::{
    default_beta, delta_min, hoeffding_condition, verify_at_delta, Branch, SamplingGeometry,
    SecurityTargets,
};
use crate::entropy::{d_ary_entropy, log2_of_inverse, Fraction01, PrimeDimension};
use crate::error::{check_index, Error, Result};
use crate::mub::{invert_statistics, BasisStatistics, BellWeights};

/// Total negative weight tolerated before the clamp is refused, as a fraction of `n`.
pub const DEFAULT_INFEASIBILITY_FRACTION: f64 = 0.05;
const ROW_TOLERANCE: f64 = 1e-12;
const REFINE_POINTS: u64 = 32;

/// Abort thresholds `Q̂_c^j` for `j in 0..=d`, `c in 1..d`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseThresholds {
    d: PrimeDimension,
    qhat: Vec<f64>,
}

impl NoiseThresholds {
    /// `Q̂_c^j = q / (d-1)` everywhere.
    pub fn symmetric(d: PrimeDimension, q: f64) -> Result<Self> {
        let per = q / (d.as_f64() - 1.0);
        Self::from_flat(d, alloc::vec![per; (d.get() + 1) * (d.get() - 1)])
    }

    /// One row per basis, each with `d-1` entries.
    pub fn from_rows(d: PrimeDimension, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != d.get() + 1 || rows.iter().any(|r| r.len() != d.get() - 1) {
            return Err(Error::Precondition(
                "threshold matrix must have d+1 rows of d-1 entries",
            ));
        }
        Self::from_flat(d, rows.concat())
    }

    fn from_flat(d: PrimeDimension, qhat: Vec<f64>) -> Result<Self> {
        for &q in &qhat {
            Fraction01::new(q)?;
        }
        let t = NoiseThresholds { d, qhat };
        for j in 0..=d.get() {
            let s: f64 = t.row(j).iter().sum();
            if s > 1.0 + ROW_TOLERANCE {
                return Err(Error::Domain {
                    what: "threshold row sum",
                    value: s,
                    domain: "[0, 1]",
                });
            }
        }
        Ok(t)
    }

    /// Replaces basis `j` by symmetric noise `q` spread over its `d-1` symbols.
    pub fn with_basis_noise(&self, j: usize, q: f64) -> Result<Self> {
        check_index("basis", j, self.d.get() + 1)?;
        let mut flat = self.qhat.clone();
        let w = self.d.get() - 1;
        flat[j * w..(j + 1) * w].fill(q / w as f64);
        Self::from_flat(self.d, flat)
    }

    pub fn dimension(&self) -> PrimeDimension {
        self.d
    }

    /// `Q̂_c^j` for `c >= 1`.
    pub fn get(&self, j: usize, c: usize) -> f64 {
        self.qhat[j * (self.d.get() - 1) + c - 1]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let w = self.d.get() - 1;
        &self.qhat[j * w..(j + 1) * w]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..=self.d.get()).map(|j| self.row(j).to_vec()).collect()
    }

    /// `Q̂_0^j = 1 - sum_c Q̂_c^j`.
    pub fn completed(&self) -> BasisStatistics {
        let (q, _) = worst_case_statistics(self, 0.0);
        q
    }
}

/// Conditions noted while computing a key length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Flag {
    MExceedsHalf,
    HoeffdingBeta,
    SizeTermNotDominated,
    SecurityTargetMissed,
    Q0Floored,
    LambdaClamped,
    EntropyArgCapped,
    Infeasible,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::MExceedsHalf => "m-exceeds-half",
            Flag::HoeffdingBeta => "hoeffding-beta-condition",
            Flag::SizeTermNotDominated => "third-term-not-dominated",
            Flag::SecurityTargetMissed => "security-target-missed",
            Flag::Q0Floored => "q0-floored",
            Flag::LambdaClamped => "lambda-clamped",
            Flag::EntropyArgCapped => "entropy-arg-capped",
            Flag::Infeasible => "infeasible",
        }
    }
}

/// `Q_c^j = min(Q̂_c^j + delta, 1)`, `Q_0^j` completed and floored at zero.
/// The flag reports whether any floor was applied.
pub fn worst_case_statistics(qhat: &NoiseThresholds, delta: f64) -> (BasisStatistics, bool) {
    let d = qhat.d;
    let mut q = BasisStatistics::zeros(d);
    let mut floored = false;
    for j in 0..=d.get() {
        let mut rest = 0.0;
        for c in 1..d.get() {
            let v = (qhat.get(j, c) + delta).min(1.0);
            q.set(j, c, v);
            rest += v;
        }
        let q0 = 1.0 - rest;
        if q0 < 0.0 {
            floored = true;
            // keep the row a distribution
            for c in 1..d.get() {
                q.set(j, c, q.get(j, c) / rest);
            }
            q.set(j, 0, 0.0);
        } else {
            q.set(j, 0, q0);
        }
    }
    (q, floored)
}

/// Bell weights after the clamp-and-rescale policy.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleWeights {
    pub lambda: BellWeights,
    /// Sum of the magnitudes of the clamped entries.
    pub negativity: f64,
    pub clamped: bool,
}

/// Inverts `q` to `n` key-round weights, clamping negatives and rescaling to `n`.
pub fn bell_weights_from_statistics(
    q: &BasisStatistics,
    n: f64,
    infeasibility_fraction: f64,
) -> Result<FeasibleWeights> {
    let mut lambda = invert_statistics(q, n);
    let negativity = lambda
        .as_slice()
        .iter()
        .filter(|&&w| w < 0.0)
        .fold(0.0, |acc, &w| acc - w);
    let threshold = infeasibility_fraction * n;
    if negativity > threshold {
        return Err(Error::Infeasible {
            negativity,
            threshold,
        });
    }
    let mut clamped = false;
    // round-off negatives are not worth a flag
    let noise = 1e-12 * n;
    for w in lambda.as_mut_slice() {
        if *w < 0.0 {
            clamped |= *w < -noise;
            *w = 0.0;
        }
    }
    let total = lambda.total();
    if !(total > 0.0) {
        return Err(Error::Infeasible {
            negativity,
            threshold,
        });
    }
    if total != n {
        lambda = lambda.scaled(n / total);
    }
    Ok(FeasibleWeights {
        lambda,
        negativity,
        clamped,
    })
}

/// `gamma = n log2 d - log2 d * sum_alpha n_alpha h_d(x_alpha)` in bits, with
/// `x_alpha` capped at `(d-1)/d`. Returns whether the cap was hit.
pub fn min_entropy_bound(lambda: &BellWeights) -> (f64, bool) {
    let d = lambda.dimension();
    let cap = (d.as_f64() - 1.0) / d.as_f64();
    let n = lambda.total();
    let mut capped = false;
    let mut penalty = 0.0;
    for alpha in 0..d.get() {
        let n_alpha = lambda.row_total(alpha);
        if n_alpha <= 0.0 {
            continue;
        }
        let off: f64 = (1..d.get()).map(|b| lambda.get(alpha, b)).sum();
        let mut x = (off / n_alpha).clamp(0.0, 1.0);
        if x > cap {
            capped |= x - cap > 1e-12;
            x = cap;
        }
        let h = d_ary_entropy(Fraction01::new(x).expect("clamped"), d);
        penalty += n_alpha * h;
    }
    ((n - penalty) * d.log2(), capped)
}

/// Error-correction leakage model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeakMode {
    /// `f * n * H(basis-0 error distribution)`.
    Shannon { efficiency: f64 },
    Fixed { bits: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageModel {
    pub mode: LeakMode,
    /// `1` disables the verification-hash term.
    pub eps_cor: f64,
}

impl LeakageModel {
    pub fn shannon(efficiency: f64) -> Result<Self> {
        Self::new(LeakMode::Shannon { efficiency }, 1.0)
    }

    pub fn fixed(bits: f64) -> Result<Self> {
        Self::new(LeakMode::Fixed { bits }, 1.0)
    }

    pub fn new(mode: LeakMode, eps_cor: f64) -> Result<Self> {
        match mode {
            LeakMode::Shannon { efficiency } if !(efficiency >= 1.0 && efficiency.is_finite()) => {
                return Err(Error::Domain {
                    what: "reconciliation efficiency",
                    value: efficiency,
                    domain: "[1, inf)",
                })
            }
            LeakMode::Fixed { bits } if !(bits >= 0.0 && bits.is_finite()) => {
                return Err(Error::Domain {
                    what: "fixed leakage",
                    value: bits,
                    domain: "[0, inf)",
                })
            }
            _ => {}
        }
        if !(eps_cor > 0.0 && eps_cor <= 1.0) {
            return Err(Error::Domain {
                what: "eps_cor",
                value: eps_cor,
                domain: "(0, 1]",
            });
        }
        Ok(LeakageModel { mode, eps_cor })
    }
}

impl Default for LeakageModel {
    fn default() -> Self {
        LeakageModel {
            mode: LeakMode::Shannon { efficiency: 1.0 },
            eps_cor: 1.0,
        }
    }
}

/// Shannon entropy in bits of the basis-0 threshold distribution.
pub fn basis0_error_entropy(qhat: &NoiseThresholds) -> f64 {
    let q = qhat.completed();
    q.row(0)
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

pub fn leak_ec(model: &LeakageModel, n: f64, qhat: &NoiseThresholds) -> f64 {
    match model.mode {
        LeakMode::Shannon { efficiency } => {
            let hash = if model.eps_cor < 1.0 {
                -model.eps_cor.log2()
            } else {
                0.0
            };
            efficiency * n * basis0_error_entropy(qhat) + hash
        }
        LeakMode::Fixed { bits } => bits,
    }
}

/// `max(0, floor(gamma - leak - 2 log2(1/eps)))`.
pub fn key_length(gamma: f64, leak: f64, eps: f64) -> Result<u64> {
    let margin = gamma - leak - 2.0 * log2_of_inverse(eps)?;
    Ok(if margin > 0.0 { margin.floor() as u64 } else { 0 })
}

/// Optional overrides for [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    /// Split ratio `c`; `c_gamma` when absent.
    pub split: Option<f64>,
    /// `1/d^2` when absent.
    pub beta: Option<f64>,
    /// Skips `delta_min` and uses this slack.
    pub delta: Option<f64>,
    pub infeasibility_fraction: f64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            split: None,
            beta: None,
            delta: None,
            infeasibility_fraction: DEFAULT_INFEASIBILITY_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateResult {
    pub d: PrimeDimension,
    pub total: u64,
    pub m: u64,
    pub key_rounds: u64,
    pub ell: u64,
    pub rate: f64,
    pub delta_used: f64,
    pub branch: Branch,
    pub split: f64,
    pub beta: f64,
    pub gamma: f64,
    pub leak: f64,
    /// `gamma - leak - 2 log2(1/eps)` before flooring.
    pub margin: f64,
    pub lambda: BellWeights,
    pub negativity: f64,
    pub achieved_security: f64,
    pub flags: BTreeSet<Flag>,
}

impl KeyRateResult {
    pub fn has(&self, flag: Flag) -> bool {
        self.flags.contains(&flag)
    }

    pub fn flag_names(&self) -> Vec<&'static str> {
        self.flags.iter().map(|f| f.as_str()).collect()
    }
}

/// Like [`evaluate`] but infeasible statistics give `ell = 0` and
/// [`Flag::Infeasible`] instead of an error.
pub fn evaluate_flagged(
    qhat: &NoiseThresholds,
    total: u64,
    m: u64,
    targets: &SecurityTargets,
    leak: &LeakageModel,
    opts: &EvalOptions,
) -> Result<KeyRateResult> {
    let d = qhat.d;
    let geom = SamplingGeometry::new(total, m, d)?;
    let beta = opts.beta.unwrap_or_else(|| default_beta(d));
    let cg = crate::bounds::c_gamma(&geom, beta);
    let split = opts.split.unwrap_or(cg);
    let dm = delta_min(targets, &geom, split, beta)?;
    let delta = opts.delta.unwrap_or(dm.delta);
    let report = verify_at_delta(targets, &geom, split, beta, delta)?;

    let mut flags = BTreeSet::new();
    if !geom.tests_at_most_half() {
        flags.insert(Flag::MExceedsHalf);
    }
    if !hoeffding_condition(beta, d) {
        flags.insert(Flag::HoeffdingBeta);
    }
    if !report.size_term_dominated {
        flags.insert(Flag::SizeTermNotDominated);
    }
    if report.achieved_security > targets.eps_sec * (1.0 + crate::bounds::CONSISTENCY_RTOL) {
        flags.insert(Flag::SecurityTargetMissed);
    }

    let n = geom.key_rounds() as f64;
    let (q, floored) = worst_case_statistics(qhat, delta);
    if floored {
        flags.insert(Flag::Q0Floored);
    }
    let leak_bits = leak_ec(leak, n, qhat);
    let pa = 2.0 * log2_of_inverse(targets.eps)?;

    let (lambda, negativity, gamma) = match bell_weights_from_statistics(
        &q,
        n,
        opts.infeasibility_fraction,
    ) {
        Ok(fw) => {
            if fw.clamped {
                flags.insert(Flag::LambdaClamped);
            }
            let (gamma, capped) = min_entropy_bound(&fw.lambda);
            if capped {
                flags.insert(Flag::EntropyArgCapped);
            }
            (fw.lambda, fw.negativity, gamma)
        }
        Err(Error::Infeasible { negativity, .. }) => {
            flags.insert(Flag::Infeasible);
            (invert_statistics(&q, n), negativity, 0.0)
        }
        Err(e) => return Err(e),
    };
    let margin = if flags.contains(&Flag::Infeasible) {
        f64::NEG_INFINITY
    } else {
        gamma - leak_bits - pa
    };
    let ell = if margin > 0.0 { margin.floor() as u64 } else { 0 };
    Ok(KeyRateResult {
        d,
        total,
        m,
        key_rounds: geom.key_rounds(),
        ell,
        rate: ell as f64 / total as f64,
        delta_used: delta,
        branch: dm.branch,
        split,
        beta,
        gamma,
        leak: leak_bits,
        margin,
        lambda,
        negativity,
        achieved_security: report.achieved_security,
        flags,
    })
}

/// Key length and rate at a fixed sample size `m`.
pub fn evaluate(
    qhat: &NoiseThresholds,
    total: u64,
    m: u64,
    targets: &SecurityTargets,
    leak: &LeakageModel,
    opts: &EvalOptions,
) -> Result<KeyRateResult> {
    let r = evaluate_flagged(qhat, total, m, targets, leak, opts)?;
    if r.has(Flag::Infeasible) {
        let n = r.key_rounds as f64;
        return Err(Error::Infeasible {
            negativity: r.negativity,
            threshold: opts.infeasibility_fraction * n,
        });
    }
    Ok(r)
}

/// Coarse sample sizes `ceil(N / 2^k)`, capped at `floor(N/2)`, ascending.
pub fn coarse_grid(total: u64) -> Vec<u64> {
    let half = total / 2;
    let mut ms = Vec::new();
    let mut k = 1u32;
    loop {
        let m = total.div_ceil(1u64 << k).min(half).max(1);
        ms.push(m);
        if m == 1 || k == 63 {
            break;
        }
        k += 1;
    }
    ms.sort_unstable();
    ms.dedup();
    ms
}

fn linear_points(lo: u64, hi: u64) -> Vec<u64> {
    let span = hi - lo;
    let mut ms: Vec<u64> = (0..REFINE_POINTS)
        .map(|i| lo + (span as f64 * i as f64 / (REFINE_POINTS - 1) as f64).round() as u64)
        .collect();
    ms.dedup();
    ms
}

/// Better of two results: larger margin, then less negativity, then smaller `m`.
fn better(a: KeyRateResult, b: KeyRateResult) -> KeyRateResult {
    use core::cmp::Ordering::*;
    let order = b
        .margin
        .total_cmp(&a.margin)
        .then(a.negativity.total_cmp(&b.negativity))
        .then(a.m.cmp(&b.m));
    match order {
        Greater => b,
        Less | Equal => a,
    }
}

fn best_of(
    ms: &[u64],
    qhat: &NoiseThresholds,
    total: u64,
    targets: &SecurityTargets,
    leak: &LeakageModel,
    opts: &EvalOptions,
) -> Result<KeyRateResult> {
    #[cfg(feature = "parallel")]
    let results: Vec<Result<KeyRateResult>> = {
        use rayon::prelude::*;
        ms.par_iter()
            .map(|&m| evaluate_flagged(qhat, total, m, targets, leak, opts))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<Result<KeyRateResult>> = ms
        .iter()
        .map(|&m| evaluate_flagged(qhat, total, m, targets, leak, opts))
        .collect();
    let mut best: Option<KeyRateResult> = None;
    for r in results {
        let r = r?;
        best = Some(match best {
            None => r,
            Some(b) => better(b, r),
        });
    }
    best.ok_or(Error::Precondition("empty sample-size grid"))
}

/// Maximizes the key length over the sample size.
///
/// The objective is the unfloored margin, so `m_opt` stays meaningful where
/// every length is zero; it ranks lengths identically where they are positive.
pub fn optimize_m(
    qhat: &NoiseThresholds,
    total: u64,
    targets: &SecurityTargets,
    leak: &LeakageModel,
    opts: &EvalOptions,
) -> Result<KeyRateResult> {
    if total < 4 {
        return Err(Error::Precondition("optimizing m needs N >= 4"));
    }
    let coarse = coarse_grid(total);
    let mut best = best_of(&coarse, qhat, total, targets, leak, opts)?;
    let pos = coarse.iter().position(|&m| m == best.m).unwrap_or(0);
    let mut lo = coarse[pos.saturating_sub(1)];
    let mut hi = coarse[(pos + 1).min(coarse.len() - 1)];
    for _ in 0..2 {
        if hi <= lo + 1 {
            break;
        }
        let ms = linear_points(lo, hi);
        let step = ((hi - lo) / (REFINE_POINTS - 1)).max(1);
        best = better(best, best_of(&ms, qhat, total, targets, leak, opts)?);
        lo = best.m.saturating_sub(step).max(1);
        hi = (best.m + step).min(total / 2);
    }
    Ok(best)
}

/// Rate with no finite-size terms: `delta = 0`, all rounds used for the key,
/// fixed leakage amortized to zero.
pub fn asymptotic_rate(qhat: &NoiseThresholds, leak: &LeakageModel) -> Result<f64> {
    let (q, _) = worst_case_statistics(qhat, 0.0);
    let fw = bell_weights_from_statistics(&q, 1.0, DEFAULT_INFEASIBILITY_FRACTION)?;
    let (gamma, _) = min_entropy_bound(&fw.lambda);
    let leak_rate = match leak.mode {
        LeakMode::Shannon { efficiency } => efficiency * basis0_error_entropy(qhat),
        LeakMode::Fixed { .. } => 0.0,
    };
    Ok(gamma - leak_rate)
}

/// Symmetric noise level where [`asymptotic_rate`] crosses zero, by bisection
/// on `[0, d/(d+1))`.
pub fn asymptotic_tolerance(d: PrimeDimension, leak: &LeakageModel) -> Result<f64> {
    let (mut lo, mut hi) = (0.0, d.as_f64() / (d.as_f64() + 1.0) * (1.0 - 1e-9));
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if asymptotic_rate(&NoiseThresholds::symmetric(d, mid)?, leak)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
