//! Analytic failure bounds for the classical sampling strategies and the
//! closed-form choice of the sampling slack `delta`.

#[allow(unused_imports)]
use num_traits::Float;

use crate::entropy::PrimeDimension;
use crate::error::{Error, Result};
use crate::logspace::{log_sum_exp, LogProb};

/// Relative slack allowed when comparing achieved security with the target.
pub const CONSISTENCY_RTOL: f64 = 1e-6;

/// `N` total rounds, `m` of which are tested; `n = N - m` form the raw key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SamplingGeometry {
    total: u64,
    tests: u64,
    d: PrimeDimension,
}

impl SamplingGeometry {
    pub fn new(total: u64, tests: u64, d: PrimeDimension) -> Result<Self> {
        if tests < 1 || tests >= total {
            return Err(Error::Precondition("sample size must satisfy 1 <= m < N"));
        }
        Ok(SamplingGeometry { total, tests, d })
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn tests(&self) -> u64 {
        self.tests
    }

    pub fn key_rounds(&self) -> u64 {
        self.total - self.tests
    }

    pub fn dimension(&self) -> PrimeDimension {
        self.d
    }

    /// Whether the two-sided basic bound applies (`m <= N/2`).
    pub fn tests_at_most_half(&self) -> bool {
        2 * self.tests <= self.total
    }
}

/// `beta = 1/d^2`.
pub fn default_beta(d: PrimeDimension) -> f64 {
    1.0 / (d.as_f64() * d.as_f64())
}

/// Slack `delta`, split ratio `c` with `delta_1 = c * delta`, and the
/// subset-size slack `beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceParams {
    pub delta: f64,
    pub split: f64,
    pub beta: f64,
}

impl ConfidenceParams {
    pub fn new(delta: f64, split: f64, beta: f64, d: PrimeDimension) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Domain {
                what: "delta",
                value: delta,
                domain: "[0, inf)",
            });
        }
        if !(split > 0.0 && split < 1.0) {
            return Err(Error::Domain {
                what: "split ratio c",
                value: split,
                domain: "(0, 1)",
            });
        }
        check_beta(beta, d)?;
        Ok(ConfidenceParams { delta, split, beta })
    }

    pub fn delta_test(&self) -> f64 {
        self.split * self.delta
    }

    pub fn delta_key(&self) -> f64 {
        self.delta - self.delta_test()
    }
}

pub(crate) fn check_beta(beta: f64, d: PrimeDimension) -> Result<()> {
    if beta > 0.0 && beta < 1.0 / (d.as_f64() + 1.0) {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "beta",
            value: beta,
            domain: "(0, 1/(d+1))",
        })
    }
}

/// The inner Hoeffding step needs `beta < 1/2 - 1/(d+1)`; `1/d^2` fails it for `d = 2`.
pub fn hoeffding_condition(beta: f64, d: PrimeDimension) -> bool {
    beta < 0.5 - 1.0 / (d.as_f64() + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityTargets {
    pub eps: f64,
    pub eps_sec: f64,
}

impl SecurityTargets {
    pub fn new(eps: f64, eps_sec: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < eps_sec && eps_sec < 1.0) {
            return Err(Error::Precondition(
                "security targets must satisfy 0 < eps < eps_sec < 1",
            ));
        }
        Ok(SecurityTargets { eps, eps_sec })
    }
}

impl Default for SecurityTargets {
    fn default() -> Self {
        SecurityTargets {
            eps: 1e-14,
            eps_sec: 1e-12,
        }
    }
}

/// `eps_0 = 2 exp(-delta^2 m N / (N + 2))` for a uniform size-`m` subset, `m <= N/2`.
pub fn basic_sampling_error(delta: f64, m: u64, total: u64) -> Result<LogProb> {
    if m < 1 || 2 * m > total {
        return Err(Error::Precondition("basic sampling bound needs 1 <= m <= N/2"));
    }
    if !(delta >= 0.0) {
        return Err(Error::Domain {
            what: "delta",
            value: delta,
            domain: "[0, inf)",
        });
    }
    let (m, n) = (m as f64, total as f64);
    Ok(LogProb::from_ln(
        core::f64::consts::LN_2 - delta * delta * m * n / (n + 2.0),
    ))
}

/// Logarithms of the three exponentials in the single-`(j, c)` bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpleStrategyTerms {
    /// `-(delta - delta_1)^2 m N / (N + 2)`: tested versus untested rounds.
    pub key: f64,
    /// `-delta_1^2 m^2 (1/(d+1) - beta) / (m + 2)`: basis-`j` rounds versus all tested.
    pub test: f64,
    /// `-2 beta^2 m`: the basis-`j` share deviates from `1/(d+1)`.
    pub size: f64,
}

impl SimpleStrategyTerms {
    pub fn dominant_delta_term(&self) -> f64 {
        self.key.max(self.test)
    }

    /// True when the `delta`-independent term is no larger than the dominant one.
    pub fn size_term_dominated(&self) -> bool {
        self.size <= self.dominant_delta_term()
    }
}

pub fn simple_strategy_terms(
    geom: &SamplingGeometry,
    params: &ConfidenceParams,
) -> Result<SimpleStrategyTerms> {
    let d = geom.dimension();
    check_beta(params.beta, d)?;
    let m = geom.tests() as f64;
    let n = geom.total() as f64;
    let share = 1.0 / (d.as_f64() + 1.0) - params.beta;
    let dk = params.delta_key();
    let dt = params.delta_test();
    Ok(SimpleStrategyTerms {
        key: -dk * dk * m * n / (n + 2.0),
        test: -dt * dt * m * m * share / (m + 2.0),
        size: -2.0 * params.beta * params.beta * m,
    })
}

/// `ln eps_delta^{j,c}` for the single-`(j, c)` sampling strategy.
pub fn simple_strategy_error(
    geom: &SamplingGeometry,
    params: &ConfidenceParams,
) -> Result<LogProb> {
    let t = simple_strategy_terms(geom, params)?;
    Ok(LogProb::from_ln(
        core::f64::consts::LN_2 + log_sum_exp(&[t.key, t.test, t.size]),
    ))
}

/// Union bound over the `(d+1)(d-1)` pairs `(j, c >= 1)`.
pub fn union_error(simple: LogProb, d: PrimeDimension) -> LogProb {
    simple.scale(d.union_pairs() as f64)
}

/// Split ratio at which the two `delta`-dependent terms coincide.
pub fn c_gamma(geom: &SamplingGeometry, beta: f64) -> f64 {
    let m = geom.tests() as f64;
    let n = geom.total() as f64;
    let share = 1.0 / (geom.dimension().as_f64() + 1.0) - beta;
    1.0 / ((m / (m + 2.0) * (n + 2.0) / n * share).sqrt() + 1.0)
}

/// `chi_d = ln((eps_sec - eps)^2 / (96 (d+1)(d-1)))`.
pub fn chi_d(targets: &SecurityTargets, d: PrimeDimension) -> Result<f64> {
    if !(targets.eps < targets.eps_sec) {
        return Err(Error::Precondition("eps must be smaller than eps_sec"));
    }
    Ok(2.0 * (targets.eps_sec - targets.eps).ln() - (96.0 * d.union_pairs() as f64).ln())
}

/// Which exponential fixes `delta_min`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `c >= c_gamma`: the tested-versus-untested term dominates.
    Key,
    /// `c < c_gamma`: the basis-share term dominates.
    Test,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Key => "c>=c_gamma",
            Branch::Test => "c<c_gamma",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaMin {
    pub delta: f64,
    pub branch: Branch,
    pub split: f64,
    pub beta: f64,
    pub c_gamma: f64,
    pub chi: f64,
    /// `delta` solving the key term alone.
    pub key_candidate: f64,
    /// `delta` solving the test term alone.
    pub test_candidate: f64,
}

impl DeltaMin {
    pub fn params(&self) -> ConfidenceParams {
        ConfidenceParams {
            delta: self.delta,
            split: self.split,
            beta: self.beta,
        }
    }
}

/// Smallest `delta` whose dominant `delta`-dependent term equals `exp(chi_d)`.
pub fn delta_min(
    targets: &SecurityTargets,
    geom: &SamplingGeometry,
    split: f64,
    beta: f64,
) -> Result<DeltaMin> {
    let d = geom.dimension();
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::Domain {
            what: "split ratio c",
            value: split,
            domain: "(0, 1)",
        });
    }
    check_beta(beta, d)?;
    let chi = chi_d(targets, d)?;
    let m = geom.tests() as f64;
    let n = geom.total() as f64;
    let share = 1.0 / (d.as_f64() + 1.0) - beta;
    let key_candidate = (-chi / ((1.0 - split) * (1.0 - split)) * (n + 2.0) / (n * m)).sqrt();
    let test_candidate = (-chi / (split * split) * (m + 2.0) / (m * m) / share).sqrt();
    let cg = c_gamma(geom, beta);
    let (delta, branch) = if split >= cg {
        (key_candidate, Branch::Key)
    } else {
        (test_candidate, Branch::Test)
    };
    Ok(DeltaMin {
        delta,
        branch,
        split,
        beta,
        c_gamma: cg,
        chi,
        key_candidate,
        test_candidate,
    })
}

/// `eps + 4 sqrt(eps_cl)` with `eps_cl = (d+1)(d-1) eps^{j,c}` clamped to one.
pub fn achieved_security(
    targets: &SecurityTargets,
    geom: &SamplingGeometry,
    params: &ConfidenceParams,
) -> Result<f64> {
    let simple = simple_strategy_error(geom, params)?;
    let cl = union_error(simple, geom.dimension());
    Ok(targets.eps + 4.0 * (0.5 * cl.ln().min(0.0)).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    pub delta_min: DeltaMin,
    pub terms: SimpleStrategyTerms,
    pub simple_error: LogProb,
    pub union_error: LogProb,
    /// `eps + 4 sqrt((d+1)(d-1) eps^{j,c})`.
    pub achieved_security: f64,
    /// `eps + 4 (d+1)(d-1) sqrt(eps^{j,c})`, the looser union placement.
    pub achieved_security_outer_union: f64,
    pub within_target: bool,
    pub slack: f64,
    pub size_term_dominated: bool,
    pub hoeffding_condition: bool,
}

/// Evaluates the security actually reached at `delta_min`.
pub fn verify_consistency(
    targets: &SecurityTargets,
    geom: &SamplingGeometry,
    split: f64,
    beta: f64,
) -> Result<ConsistencyReport> {
    let dm = delta_min(targets, geom, split, beta)?;
    verify_at(targets, geom, dm, dm.params())
}

/// Same as [`verify_consistency`] but at an arbitrary `delta`.
pub fn verify_at_delta(
    targets: &SecurityTargets,
    geom: &SamplingGeometry,
    split: f64,
    beta: f64,
    delta: f64,
) -> Result<ConsistencyReport> {
    let dm = delta_min(targets, geom, split, beta)?;
    let params = ConfidenceParams::new(delta, split, beta, geom.dimension())?;
    verify_at(targets, geom, dm, params)
}

fn verify_at(
    targets: &SecurityTargets,
    geom: &SamplingGeometry,
    dm: DeltaMin,
    params: ConfidenceParams,
) -> Result<ConsistencyReport> {
    let d = geom.dimension();
    let terms = simple_strategy_terms(geom, &params)?;
    let simple = simple_strategy_error(geom, &params)?;
    let union = union_error(simple, d);
    let achieved = targets.eps + 4.0 * (0.5 * union.ln().min(0.0)).exp();
    let outer = targets.eps
        + 4.0 * d.union_pairs() as f64 * (0.5 * simple.ln().min(0.0)).exp();
    Ok(ConsistencyReport {
        delta_min: dm,
        terms,
        simple_error: simple,
        union_error: union,
        achieved_security: achieved,
        achieved_security_outer_union: outer,
        within_target: achieved <= targets.eps_sec * (1.0 + CONSISTENCY_RTOL),
        slack: targets.eps_sec - achieved,
        size_term_dominated: terms.size_term_dominated(),
        hoeffding_condition: hoeffding_condition(params.beta, d),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(d: usize) -> PrimeDimension {
        PrimeDimension::new(d).unwrap()
    }

    #[test]
    fn basic_bound_examples() {
        let collapsed = basic_sampling_error(1.0, 1_000_000, 2_000_000).unwrap();
        assert!(collapsed.ln() < -9.9e5);
        assert_eq!(collapsed.linear(), 0.0);
        assert!((basic_sampling_error(0.0, 10, 100).unwrap().ln() - 2f64.ln()).abs() < 1e-15);
        // ln 2 - 1e-4 * 1e5 * 2e5 / (2e5 + 2), mpmath
        let v = basic_sampling_error(0.01, 100_000, 200_000).unwrap().ln();
        assert!((v + 9.306_752_820_440_045).abs() < 1e-9);
        assert!(basic_sampling_error(0.1, 51, 100).is_err());
    }

    #[test]
    fn simple_bound_is_vacuous_without_slack() {
        let geom = SamplingGeometry::new(1000, 400, dim(3)).unwrap();
        let p = ConfidenceParams::new(0.0, 0.5, 1.0 / 9.0, dim(3)).unwrap();
        assert!(simple_strategy_error(&geom, &p).unwrap().ln() >= 4f64.ln());
        assert!(ConfidenceParams::new(0.1, 0.5, 0.25, dim(3)).is_err());
        assert!(ConfidenceParams::new(0.1, 1.0, 0.1, dim(3)).is_err());
    }

    #[test]
    fn simple_bound_at_delta_min_matches_chi() {
        let d = dim(2);
        let geom = SamplingGeometry::new(10_000_000, 1_000_000, d).unwrap();
        let targets = SecurityTargets::default();
        let chi = chi_d(&targets, d).unwrap();
        let dm = delta_min(&targets, &geom, c_gamma(&geom, 0.25), 0.25).unwrap();
        let t = simple_strategy_terms(&geom, &dm.params()).unwrap();
        assert!((t.key - chi).abs() < 1e-9);
        assert!((t.test - chi).abs() < 1e-9);
        let total = simple_strategy_error(&geom, &dm.params()).unwrap().ln();
        // third term is exp(-125000): two equal terms, factor 2
        assert!((total - (4f64.ln() + chi)).abs() < 1e-9);
        assert!(total <= 6f64.ln() + chi);
    }

    #[test]
    fn size_term_isolation() {
        let d = dim(5);
        let geom = SamplingGeometry::new(4_000_000, 1_000_000, d).unwrap();
        let p = ConfidenceParams::new(0.01, 0.5, default_beta(d), d).unwrap();
        let t = simple_strategy_terms(&geom, &p).unwrap();
        assert!((t.size + 3200.0).abs() < 1e-9);
    }

    #[test]
    fn union_factor() {
        let base = LogProb::from_ln(-10.0);
        for (d, k) in [(2usize, 3.0f64), (3, 8.0), (5, 24.0)] {
            let u = union_error(base, dim(d));
            assert!((u.ln() - (-10.0 + k.ln())).abs() < 1e-14);
        }
    }

    #[test]
    fn c_gamma_examples() {
        let large = |d: usize| {
            let g = SamplingGeometry::new(1_000_000_000_000, 100_000_000_000, dim(d)).unwrap();
            c_gamma(&g, default_beta(dim(d)))
        };
        assert!((large(2) - 0.775_990_762_260_204).abs() < 1e-9);
        assert!((large(3) - 0.728_502_972_096_815).abs() < 1e-9);
        let g = SamplingGeometry::new(2, 1, dim(2)).unwrap();
        assert!((c_gamma(&g, 0.25) - 0.809_256_430_169_454).abs() < 1e-14);
    }

    #[test]
    fn chi_examples() {
        let t = SecurityTargets::default();
        assert!((chi_d(&t, dim(2)).unwrap() + 60.945_103_383_700_05).abs() < 1e-10);
        assert!((chi_d(&t, dim(5)).unwrap() + 63.024_544_925_379_88).abs() < 1e-10);
        let back = chi_d(&t, dim(3)).unwrap().exp() * 96.0 * 8.0;
        let expect = (t.eps_sec - t.eps).powi(2);
        assert!((back - expect).abs() / expect < 1e-12);
        assert!(SecurityTargets::new(1e-12, 1e-12).is_err());
        let bad = SecurityTargets {
            eps: 1e-12,
            eps_sec: 1e-14,
        };
        assert!(chi_d(&bad, dim(2)).is_err());
    }

    #[test]
    fn delta_min_examples() {
        let d = dim(2);
        let targets = SecurityTargets::default();
        let geom = SamplingGeometry::new(10_000_000, 1_000_000, d).unwrap();
        let cg = c_gamma(&geom, 0.25);
        let dm = delta_min(&targets, &geom, cg, 0.25).unwrap();
        assert_eq!(dm.branch, Branch::Key);
        assert!((dm.key_candidate - dm.test_candidate).abs() / dm.delta < 1e-10);
        // mpmath: 0.034850083865837759...
        assert!((dm.delta - 0.034_850_083_865_837_76).abs() < 1e-12);

        let mut prev = f64::INFINITY;
        for k in 5..12u32 {
            let n = 10u64.pow(k);
            let g = SamplingGeometry::new(n, n / 10, d).unwrap();
            let dm = delta_min(&targets, &g, c_gamma(&g, 0.25), 0.25).unwrap();
            assert!(dm.delta < prev);
            // scales like 1/sqrt(m)
            let scaled = dm.delta * ((n / 10) as f64).sqrt();
            let limit = (-dm.chi).sqrt() / (1.0 - 0.775_990_762_260_204);
            assert!((scaled / limit - 1.0).abs() < 1e-3, "{scaled} vs {limit}");
            prev = dm.delta;
        }
    }

    #[test]
    fn consistency_examples() {
        let targets = SecurityTargets::default();
        for d in [2, 3, 5] {
            let d = dim(d);
            let beta = default_beta(d);
            let geom = SamplingGeometry::new(100_000_000, 10_000_000, d).unwrap();
            let c = c_gamma(&geom, beta);
            let r = verify_consistency(&targets, &geom, c, beta).unwrap();
            assert!(r.size_term_dominated);
            assert!(r.within_target);
            assert!(r.achieved_security <= targets.eps_sec * (1.0 + CONSISTENCY_RTOL));
            assert!(r.achieved_security_outer_union > r.achieved_security);
            let doubled = verify_at_delta(&targets, &geom, c, beta, 2.0 * r.delta_min.delta).unwrap();
            assert!(doubled.achieved_security < targets.eps_sec);
            assert!(doubled.slack > r.slack);
        }
        let d = dim(2);
        let geom = SamplingGeometry::new(100, 10, d).unwrap();
        let r = verify_consistency(&targets, &geom, c_gamma(&geom, 0.25), 0.25).unwrap();
        assert!(!r.size_term_dominated);
        assert!(!r.hoeffding_condition);
    }

    #[test]
    fn hoeffding_condition_per_dimension() {
        assert!(!hoeffding_condition(default_beta(dim(2)), dim(2)));
        for d in [3, 5, 7, 11] {
            assert!(hoeffding_condition(default_beta(dim(d)), dim(d)));
        }
    }
}
