//! Monte Carlo verification of the classical sampling strategy.
//!
//! A fixed word `q` over the Bell alphabet is sampled many times with a fresh
//! `(t, s)` draw per trial; the observed failure frequency, with an exact
//! binomial upper limit, is compared against the analytic bound. Trial `i`
//! draws from ChaCha stream `i` of the master seed, so results do not depend
//! on how trials are scheduled.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::{
    c_gamma, default_beta, simple_strategy_error, union_error, ConfidenceParams, SamplingGeometry,
};
use crate::entropy::PrimeDimension;
use crate::error::{check_index, Error, Result};
use crate::logspace::LogProb;
use crate::mub::{BellLabel, ClassTable};
use crate::stats::clopper_pearson_upper;

pub const DEFAULT_CONFIDENCE: f64 = 0.99;
pub const MIN_TRIALS: u64 = 1000;
const TRIAL_CHUNK: u64 = 1024;

/// A length-`N` word over `A_d x A_d`, stored as row-major label indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BellWord {
    d: PrimeDimension,
    symbols: Vec<u16>,
}

impl BellWord {
    pub fn new(d: PrimeDimension, labels: &[BellLabel]) -> Result<Self> {
        let symbols = labels
            .iter()
            .map(|l| {
                check_index("alpha", l.alpha, d.get())?;
                check_index("beta", l.beta, d.get())?;
                Ok(l.index(d) as u16)
            })
            .collect::<Result<_>>()?;
        Ok(BellWord { d, symbols })
    }

    pub fn dimension(&self) -> PrimeDimension {
        self.d
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn label(&self, i: usize) -> BellLabel {
        BellLabel::from_index(self.d, self.symbols[i] as usize)
    }

    pub(crate) fn index_at(&self, i: usize) -> usize {
        self.symbols[i] as usize
    }
}

/// Fixed adversarial word families used for bound-dominance checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WordFamily {
    /// Every symbol is `(1, 0)`: each basis sees a single class.
    UniformClass,
    /// `(0,0)` and `(1,0)` alternate.
    Alternating,
    /// First half `(0,0)`, second half `(1,0)`.
    Blocked,
    /// `(0,0)` with probability 1/2, otherwise a uniform other label.
    Random,
}

impl WordFamily {
    pub const ALL: [WordFamily; 4] = [
        WordFamily::UniformClass,
        WordFamily::Alternating,
        WordFamily::Blocked,
        WordFamily::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WordFamily::UniformClass => "uniform-class",
            WordFamily::Alternating => "alternating",
            WordFamily::Blocked => "blocked",
            WordFamily::Random => "random",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        WordFamily::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Builds a word of the given family; `seed` only matters for [`WordFamily::Random`].
pub fn adversarial_word(family: WordFamily, d: PrimeDimension, len: usize, seed: u64) -> BellWord {
    let zero = BellLabel { alpha: 0, beta: 0 };
    let one = BellLabel { alpha: 1, beta: 0 };
    let labels: Vec<BellLabel> = match family {
        WordFamily::UniformClass => vec![one; len],
        WordFamily::Alternating => (0..len).map(|i| if i % 2 == 0 { zero } else { one }).collect(),
        WordFamily::Blocked => (0..len).map(|i| if i < len / 2 { zero } else { one }).collect(),
        WordFamily::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(u64::MAX);
            let others = d.get() * d.get() - 1;
            (0..len)
                .map(|_| {
                    if rng.random_bool(0.5) {
                        zero
                    } else {
                        BellLabel::from_index(d, 1 + rng.random_range(0..others))
                    }
                })
                .collect()
        }
    };
    BellWord {
        d,
        symbols: labels.iter().map(|l| l.index(d) as u16).collect(),
    }
}

/// Test positions `t` (sorted, 0-based) with the basis `s_i` assigned to each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetDraw {
    pub positions: Vec<u32>,
    pub bases: Vec<u8>,
}

impl SubsetDraw {
    /// `m_j = #_j(s)`.
    pub fn basis_count(&self, j: usize) -> usize {
        self.bases.iter().filter(|&&b| b as usize == j).count()
    }
}

/// Uniform size-`m` subset of `0..N` (partial Fisher–Yates) and i.i.d.
/// uniform bases in `0..=d`.
pub fn draw_subset_and_bases<R: RngCore + ?Sized>(
    total: usize,
    m: usize,
    d: PrimeDimension,
    rng: &mut R,
) -> SubsetDraw {
    assert!(m <= total, "sample larger than the word");
    let mut idx: Vec<u32> = (0..total as u32).collect();
    for i in 0..m {
        let k = rng.random_range(i..total);
        idx.swap(i, k);
    }
    idx.truncate(m);
    idx.sort_unstable();
    let bases = (0..m).map(|_| rng.random_range(0..=d.get()) as u8).collect();
    SubsetDraw {
        positions: idx,
        bases,
    }
}

/// Per-`(j, c)` class counts of a whole word, reused across trials.
#[derive(Debug, Clone)]
struct WordProfile {
    totals: Vec<u64>,
}

impl WordProfile {
    fn new(q: &BellWord, classes: &ClassTable) -> Self {
        let dd = q.d.get();
        let mut totals = vec![0u64; (dd + 1) * dd];
        for i in 0..q.len() {
            let l = q.index_at(i);
            for j in 0..=dd {
                totals[j * dd + classes.class_of_index(j, l)] += 1;
            }
        }
        WordProfile { totals }
    }
}

/// `|w_test - w_key|` for every `(j, c >= 1)`, flattened as `j * (d-1) + c - 1`;
/// `+inf` where `m_j = 0`.
fn deviations(
    q: &BellWord,
    draw: &SubsetDraw,
    classes: &ClassTable,
    profile: &WordProfile,
    out: &mut Vec<f64>,
) {
    let dd = q.d.get();
    let mut basis_hits = vec![0u64; (dd + 1) * dd];
    let mut tested = vec![0u64; (dd + 1) * dd];
    let mut basis_sizes = vec![0u64; dd + 1];
    for (&pos, &s) in draw.positions.iter().zip(&draw.bases) {
        let l = q.index_at(pos as usize);
        let s = s as usize;
        basis_sizes[s] += 1;
        basis_hits[s * dd + classes.class_of_index(s, l)] += 1;
        for j in 0..=dd {
            tested[j * dd + classes.class_of_index(j, l)] += 1;
        }
    }
    let key_rounds = (q.len() - draw.positions.len()) as f64;
    out.clear();
    for (j, &size) in basis_sizes.iter().enumerate() {
        for c in 1..dd {
            let cell = j * dd + c;
            if size == 0 {
                out.push(f64::INFINITY);
                continue;
            }
            let w_test = basis_hits[cell] as f64 / size as f64;
            let w_key = (profile.totals[cell] - tested[cell]) as f64 / key_rounds;
            out.push((w_test - w_key).abs());
        }
    }
}

fn deviation_of(
    q: &BellWord,
    draw: &SubsetDraw,
    classes: &ClassTable,
    j: usize,
    c: usize,
) -> f64 {
    let dd = q.d.get();
    let (mut m_j, mut in_test, mut in_word, mut in_sample) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..q.len() {
        if classes.class_of_index(j, q.index_at(i)) == c {
            in_word += 1;
        }
    }
    for (&pos, &s) in draw.positions.iter().zip(&draw.bases) {
        let hit = classes.class_of_index(j, q.index_at(pos as usize)) == c;
        if hit {
            in_sample += 1;
        }
        if s as usize == j {
            m_j += 1;
            if hit {
                in_test += 1;
            }
        }
    }
    debug_assert!(c < dd);
    if m_j == 0 {
        return f64::INFINITY;
    }
    let key_rounds = (q.len() - draw.positions.len()) as f64;
    (in_test as f64 / m_j as f64 - (in_word - in_sample) as f64 / key_rounds).abs()
}

/// Membership of `q` in the single-`(j, c)` good-word set. An empty basis
/// class (`m_j = 0`) counts as a bad word.
pub fn good_word_simple(
    q: &BellWord,
    draw: &SubsetDraw,
    classes: &ClassTable,
    j: usize,
    c: usize,
    delta: f64,
) -> bool {
    deviation_of(q, draw, classes, j, c) <= delta
}

/// Conjunction of [`good_word_simple`] over all `j` and `c >= 1`.
pub fn good_word_full(q: &BellWord, draw: &SubsetDraw, classes: &ClassTable, delta: f64) -> bool {
    let dd = q.d.get();
    (0..=dd).all(|j| (1..dd).all(|c| good_word_simple(q, draw, classes, j, c, delta)))
}

/// Failure counts with an exact binomial upper limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialReport {
    pub trials: u64,
    pub failures: u64,
    pub point: f64,
    pub upper: f64,
    pub level: f64,
}

impl TrialReport {
    pub fn new(trials: u64, failures: u64, level: f64) -> Result<Self> {
        Ok(TrialReport {
            trials,
            failures,
            point: failures as f64 / trials as f64,
            upper: clopper_pearson_upper(failures, trials, level)?,
            level,
        })
    }
}

/// Stream for trial `index` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Failure counts of one Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureGrid {
    pub d: PrimeDimension,
    pub deltas: Vec<f64>,
    pub trials: u64,
    /// `simple[k][j * (d-1) + c - 1]` for `deltas[k]`.
    pub simple: Vec<Vec<u64>>,
    /// Full-strategy failures per delta.
    pub full: Vec<u64>,
}

impl FailureGrid {
    pub fn simple_failures(&self, delta_index: usize, j: usize, c: usize) -> u64 {
        self.simple[delta_index][j * (self.d.get() - 1) + c - 1]
    }

    fn merge(mut self, other: FailureGrid) -> FailureGrid {
        for (a, b) in self.simple.iter_mut().zip(&other.simple) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (x, y) in self.full.iter_mut().zip(&other.full) {
            *x += y;
        }
        self.trials += other.trials;
        self
    }
}

/// Runs `trials` draws against `q` and counts failures for every delta and
/// every `(j, c >= 1)` at once.
pub fn estimate_failure_grid(
    q: &BellWord,
    m: usize,
    deltas: &[f64],
    trials: u64,
    seed: u64,
) -> Result<FailureGrid> {
    let d = q.d;
    if m < 1 || m >= q.len() {
        return Err(Error::Precondition("sample size must satisfy 1 <= m < N"));
    }
    let classes = ClassTable::closed_form(d);
    let profile = WordProfile::new(q, &classes);
    let pairs = (d.get() + 1) * (d.get() - 1);
    let empty = FailureGrid {
        d,
        deltas: deltas.to_vec(),
        trials: 0,
        simple: vec![vec![0; pairs]; deltas.len()],
        full: vec![0; deltas.len()],
    };
    let run_chunk = |chunk: u64| {
        let mut acc = empty.clone();
        let mut devs = Vec::with_capacity(pairs);
        let start = chunk * TRIAL_CHUNK;
        let end = (start + TRIAL_CHUNK).min(trials);
        for t in start..end {
            let mut rng = trial_rng(seed, t);
            let draw = draw_subset_and_bases(q.len(), m, d, &mut rng);
            deviations(q, &draw, &classes, &profile, &mut devs);
            for (k, &delta) in deltas.iter().enumerate() {
                let mut any = false;
                for (cell, &dev) in devs.iter().enumerate() {
                    if !(dev <= delta) {
                        acc.simple[k][cell] += 1;
                        any = true;
                    }
                }
                if any {
                    acc.full[k] += 1;
                }
            }
        }
        acc.trials = end - start;
        acc
    };
    let chunks = trials.div_ceil(TRIAL_CHUNK);

    #[cfg(feature = "parallel")]
    let grid = {
        use rayon::prelude::*;
        (0..chunks)
            .into_par_iter()
            .map(run_chunk)
            .reduce(|| empty.clone(), FailureGrid::merge)
    };
    #[cfg(not(feature = "parallel"))]
    let grid = (0..chunks).map(run_chunk).fold(empty.clone(), FailureGrid::merge);

    Ok(grid)
}

/// Failure frequency of the single-`(j, c)` strategy for a fixed word.
#[allow(clippy::too_many_arguments)]
pub fn estimate_failure(
    q: &BellWord,
    m: usize,
    delta: f64,
    j: usize,
    c: usize,
    trials: u64,
    seed: u64,
    level: f64,
) -> Result<TrialReport> {
    if trials < MIN_TRIALS {
        return Err(Error::Precondition("at least 1000 trials are required"));
    }
    check_index("basis", j, q.d.get() + 1)?;
    if c == 0 || c >= q.d.get() {
        return Err(Error::Index {
            what: "symbol (c >= 1)",
            value: c,
            bound: q.d.get(),
        });
    }
    let grid = estimate_failure_grid(q, m, &[delta], trials, seed)?;
    TrialReport::new(trials, grid.simple_failures(0, j, c), level)
}

/// One row of a bound-dominance check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominanceRow {
    pub delta: f64,
    /// `None` for the full (union) strategy.
    pub cell: Option<(usize, usize)>,
    pub report: TrialReport,
    pub analytic: LogProb,
}

impl DominanceRow {
    pub fn vacuous(&self) -> bool {
        self.analytic.is_vacuous()
    }

    pub fn dominated(&self) -> bool {
        self.report.upper <= self.analytic.linear()
    }
}

/// Settings for [`check_dominance`]; `split`/`beta` default to `c_gamma` and `1/d^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DominanceSettings {
    pub trials: u64,
    pub seed: u64,
    pub level: f64,
    pub split: Option<f64>,
    pub beta: Option<f64>,
}

/// Empirical failure against the analytic single-pair bound for every
/// `(delta, j, c)`, followed by one full-strategy row per delta checked
/// against the union bound.
pub fn check_dominance(
    q: &BellWord,
    m: usize,
    deltas: &[f64],
    settings: &DominanceSettings,
) -> Result<Vec<DominanceRow>> {
    let d = q.d;
    if settings.trials < MIN_TRIALS {
        return Err(Error::Precondition("at least 1000 trials are required"));
    }
    let geom = SamplingGeometry::new(q.len() as u64, m as u64, d)?;
    let beta = settings.beta.unwrap_or_else(|| default_beta(d));
    let split = settings.split.unwrap_or_else(|| c_gamma(&geom, beta));
    let grid = estimate_failure_grid(q, m, deltas, settings.trials, settings.seed)?;
    let mut rows = Vec::new();
    for (k, &delta) in deltas.iter().enumerate() {
        let params = ConfidenceParams::new(delta, split, beta, d)?;
        let bound = simple_strategy_error(&geom, &params)?;
        for j in 0..=d.get() {
            for c in 1..d.get() {
                rows.push(DominanceRow {
                    delta,
                    cell: Some((j, c)),
                    report: TrialReport::new(
                        settings.trials,
                        grid.simple_failures(k, j, c),
                        settings.level,
                    )?,
                    analytic: bound,
                });
            }
        }
        rows.push(DominanceRow {
            delta,
            cell: None,
            report: TrialReport::new(settings.trials, grid.full[k], settings.level)?,
            analytic: union_error(bound, d),
        });
    }
    Ok(rows)
}
