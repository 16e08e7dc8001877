//! Mutually unbiased bases, high-dimensional Bell states and the two-party
//! measurement they induce.
//!
//! Two routes are provided for the map from a Bell label to the outcome
//! difference observed in each basis:
//!
//! * a brute-force oracle ([`MubSet`]) that diagonalises `Z` and `XZ^k`
//!   numerically, builds the POVM elements as `d^2 x d^2` matrices and
//!   evaluates `<phi|Lambda|phi>`;
//! * the closed form ([`outcome_class`]): basis `0` reports `alpha`, basis
//!   `s + 1` reports `s*alpha - beta (mod d)`.
//!
//! The closed form drives everything at scale. The oracle certifies it.
//!
//! Alice's half of `Lambda^j_c` uses the complex conjugate of basis `j`.
//! With that convention every Bell label yields a single outcome per basis;
//! measuring both halves in the same (unconjugated) basis only has this
//! property for `d = 2`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Complex, ComplexField, DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;

use crate::entropy::PrimeDimension;
use crate::error::{check_index, Error, Result};

pub type C64 = Complex<f64>;

/// Largest dimension the numerical oracle accepts.
pub const ORACLE_MAX_DIMENSION: usize = 13;
/// Maximum tolerated `|U v - lambda v|` for accepted eigenvectors.
pub const EIGEN_RESIDUAL_TOLERANCE: f64 = 1e-8;

const DEGENERACY_TOLERANCE: f64 = 1e-6;

/// Bell label `(alpha, beta)`: bit shift and phase of `|phi_alpha^beta>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BellLabel {
    pub alpha: usize,
    pub beta: usize,
}

impl BellLabel {
    pub fn new(d: PrimeDimension, alpha: usize, beta: usize) -> Result<Self> {
        check_index("alpha", alpha, d.get())?;
        check_index("beta", beta, d.get())?;
        Ok(BellLabel { alpha, beta })
    }

    /// Row-major index `alpha * d + beta`.
    pub fn index(self, d: PrimeDimension) -> usize {
        self.alpha * d.get() + self.beta
    }

    pub fn from_index(d: PrimeDimension, index: usize) -> Self {
        BellLabel {
            alpha: index / d.get(),
            beta: index % d.get(),
        }
    }

    /// All `d^2` labels in row-major order.
    pub fn all(d: PrimeDimension) -> impl Iterator<Item = BellLabel> {
        (0..d.get() * d.get()).map(move |i| BellLabel::from_index(d, i))
    }
}

impl core::fmt::Display for BellLabel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "({},{})", self.alpha, self.beta)
    }
}

/// Outcome difference `c` reported in basis `j` for a Bell label.
///
/// Panics if `j > d`.
pub fn outcome_class(d: PrimeDimension, j: usize, label: BellLabel) -> usize {
    let dd = d.get();
    assert!(j <= dd, "basis index {j} out of range");
    if j == 0 {
        label.alpha
    } else {
        let s = j - 1;
        (s * label.alpha + dd - label.beta) % dd
    }
}

/// The outcome set `P_c^j` in closed form, sorted by label.
pub fn pcj_closed_form(d: PrimeDimension, j: usize, c: usize) -> Result<Vec<BellLabel>> {
    check_index("basis", j, d.get() + 1)?;
    check_index("symbol", c, d.get())?;
    Ok(BellLabel::all(d)
        .filter(|&l| outcome_class(d, j, l) == c)
        .collect())
}

/// Lookup table `(basis, label) -> outcome class`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTable {
    d: PrimeDimension,
    classes: Vec<usize>,
}

impl ClassTable {
    pub fn closed_form(d: PrimeDimension) -> Self {
        let dd = d.get();
        let mut classes = Vec::with_capacity((dd + 1) * dd * dd);
        for j in 0..=dd {
            classes.extend(BellLabel::all(d).map(|l| outcome_class(d, j, l)));
        }
        ClassTable { d, classes }
    }

    /// Builds the table from oracle probabilities; fails if some label has
    /// no outcome with probability above one half.
    pub fn from_oracle(mubs: &MubSet) -> Result<Self> {
        let d = mubs.dimension();
        let dd = d.get();
        let mut classes = Vec::with_capacity((dd + 1) * dd * dd);
        for j in 0..=dd {
            let povms: Vec<DMatrix<C64>> = (0..dd)
                .map(|c| mubs.povm_element(j, c))
                .collect::<Result<_>>()?;
            for label in BellLabel::all(d) {
                let phi = bell_state(d, label);
                let c = povms
                    .iter()
                    .position(|p| quadratic_form(p, &phi) > 0.5)
                    .ok_or(Error::Precondition("oracle outcome is not deterministic"))?;
                classes.push(c);
            }
        }
        Ok(ClassTable { d, classes })
    }

    pub fn dimension(&self) -> PrimeDimension {
        self.d
    }

    pub fn class(&self, j: usize, label: BellLabel) -> usize {
        self.class_of_index(j, label.index(self.d))
    }

    pub fn class_of_index(&self, j: usize, label_index: usize) -> usize {
        let dd = self.d.get();
        self.classes[j * dd * dd + label_index]
    }

    pub fn outcome_set(&self, j: usize, c: usize) -> Vec<BellLabel> {
        BellLabel::all(self.d)
            .filter(|&l| self.class(j, l) == c)
            .collect()
    }
}

/// `d x d` matrix of Bell-label weights `lambda_alpha^beta` (row `alpha`).
#[derive(Debug, Clone, PartialEq)]
pub struct BellWeights {
    d: PrimeDimension,
    weights: Vec<f64>,
}

impl BellWeights {
    pub fn zeros(d: PrimeDimension) -> Self {
        BellWeights {
            d,
            weights: vec![0.0; d.get() * d.get()],
        }
    }

    /// Row-major weights, `weights[alpha * d + beta]`.
    pub fn from_row_major(d: PrimeDimension, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != d.get() * d.get() {
            return Err(Error::Precondition("Bell weights need d*d entries"));
        }
        Ok(BellWeights { d, weights })
    }

    pub fn dimension(&self) -> PrimeDimension {
        self.d
    }

    pub fn get(&self, alpha: usize, beta: usize) -> f64 {
        self.weights[alpha * self.d.get() + beta]
    }

    pub fn set(&mut self, alpha: usize, beta: usize, value: f64) {
        let dd = self.d.get();
        self.weights[alpha * dd + beta] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `n_alpha = sum_beta lambda_alpha^beta`.
    pub fn row_total(&self, alpha: usize) -> f64 {
        let dd = self.d.get();
        self.weights[alpha * dd..(alpha + 1) * dd].iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        BellWeights {
            d: self.d,
            weights: self.weights.iter().map(|w| w * factor).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &BellWeights) -> f64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Per-basis outcome distribution `Q_c^j`, rows `j = 0..=d`, columns `c = 0..d`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisStatistics {
    d: PrimeDimension,
    values: Vec<f64>,
}

impl BasisStatistics {
    pub fn zeros(d: PrimeDimension) -> Self {
        BasisStatistics {
            d,
            values: vec![0.0; (d.get() + 1) * d.get()],
        }
    }

    pub fn from_rows(d: PrimeDimension, rows: &[Vec<f64>]) -> Result<Self> {
        let dd = d.get();
        if rows.len() != dd + 1 || rows.iter().any(|r| r.len() != dd) {
            return Err(Error::Precondition("statistics need d+1 rows of d entries"));
        }
        Ok(BasisStatistics {
            d,
            values: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dimension(&self) -> PrimeDimension {
        self.d
    }

    pub fn get(&self, j: usize, c: usize) -> f64 {
        self.values[j * self.d.get() + c]
    }

    pub fn set(&mut self, j: usize, c: usize, value: f64) {
        let dd = self.d.get();
        self.values[j * dd + c] = value;
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let dd = self.d.get();
        &self.values[j * dd..(j + 1) * dd]
    }

    pub fn max_abs_diff(&self, other: &BasisStatistics) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `Q_c^j = (1/n) sum_{(alpha,beta) in P_c^j} lambda_alpha^beta`.
pub fn forward_statistics(lambda: &BellWeights) -> Result<BasisStatistics> {
    let d = lambda.dimension();
    let n = lambda.total();
    if !(n > 0.0) || lambda.as_slice().iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(Error::Precondition(
            "Bell weights must be finite, nonnegative and not all zero",
        ));
    }
    let mut q = BasisStatistics::zeros(d);
    for label in BellLabel::all(d) {
        let w = lambda.get(label.alpha, label.beta) / n;
        for j in 0..=d.get() {
            let c = outcome_class(d, j, label);
            q.set(j, c, q.get(j, c) + w);
        }
    }
    Ok(q)
}

/// `lambda_alpha^beta = (n/d)(Q_alpha^0 + sum_s Q^{s+1}_{s alpha - beta mod d} - 1)`.
///
/// Negative entries are returned unchanged.
pub fn invert_statistics(q: &BasisStatistics, n: f64) -> BellWeights {
    let d = q.dimension();
    let dd = d.get();
    let mut lambda = BellWeights::zeros(d);
    for label in BellLabel::all(d) {
        let mut acc = q.get(0, label.alpha) - 1.0;
        for j in 1..=dd {
            acc += q.get(j, outcome_class(d, j, label));
        }
        lambda.set(label.alpha, label.beta, n / d.as_f64() * acc);
    }
    lambda
}

/// `|phi_alpha^beta> = d^{-1/2} sum_a omega^{a beta} |a> (x) |a + alpha>`.
pub fn bell_state(d: PrimeDimension, label: BellLabel) -> DVector<C64> {
    let dd = d.get();
    let norm = 1.0 / libm::sqrt(dd as f64);
    let mut v = DVector::from_element(dd * dd, C64::new(0.0, 0.0));
    for a in 0..dd {
        let b = (a + label.alpha) % dd;
        v[a * dd + b] = root_of_unity(dd, a * label.beta) * norm;
    }
    v
}

fn modulus(z: C64) -> f64 {
    libm::hypot(z.re, z.im)
}

fn root_of_unity(d: usize, k: usize) -> C64 {
    let theta = 2.0 * PI * ((k % d) as f64) / d as f64;
    C64::new(libm::cos(theta), libm::sin(theta))
}

/// Generalised Pauli product `X Z^s`, with `X|a> = |a+1>` and `Z|a> = omega^a |a>`.
pub fn shift_clock(d: usize, s: usize) -> DMatrix<C64> {
    let mut u = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
    for a in 0..d {
        u[((a + 1) % d, a)] = root_of_unity(d, s * a);
    }
    u
}

/// The `d + 1` bases; column `x` of basis `j` is `|x>^j`.
#[derive(Debug, Clone)]
pub struct MubSet {
    d: PrimeDimension,
    bases: Vec<DMatrix<C64>>,
    eigen_residual: f64,
}

/// Builds the computational basis and the eigenbases of `XZ^k`, `k = 0..d`.
///
/// Basis `k + 1` holds the eigenvectors of `XZ^k`, labelled so that
/// `|x>` has eigenvalue `mu_k omega^x`, where `mu_k^d = (XZ^k)^d`. Each
/// vector's first nonzero component is real and positive.
pub fn build_mub_bases(d: PrimeDimension) -> Result<MubSet> {
    let dd = d.get();
    if dd > ORACLE_MAX_DIMENSION {
        return Err(Error::OracleScale {
            d: dd,
            limit: ORACLE_MAX_DIMENSION,
        });
    }
    let mut bases = vec![DMatrix::<C64>::identity(dd, dd)];
    let mut worst = 0.0f64;
    for s in 0..dd {
        let (basis, residual) = eigenbasis_of_shift_clock(dd, s)?;
        worst = worst.max(residual);
        bases.push(basis);
    }
    Ok(MubSet {
        d,
        bases,
        eigen_residual: worst,
    })
}

fn eigenbasis_of_shift_clock(d: usize, s: usize) -> Result<(DMatrix<C64>, f64)> {
    let u = shift_clock(d, s);
    let hermitian = &u + u.adjoint();
    let eig = SymmetricEigen::new(hermitian);

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut vectors: Vec<DVector<C64>> = Vec::with_capacity(d);
    let mut start = 0;
    while start < d {
        let mut end = start + 1;
        while end < d
            && (eig.eigenvalues[order[end]] - eig.eigenvalues[order[start]]).abs()
                < DEGENERACY_TOLERANCE
        {
            end += 1;
        }
        let cols: Vec<DVector<C64>> = order[start..end]
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect();
        if cols.len() == 1 {
            vectors.extend(cols);
        } else {
            // split the degenerate eigenspace of U + U^dag with the
            // Hermitian operator (U - U^dag)/(2i) restricted to it
            let v = DMatrix::from_columns(&cols);
            let w = v.adjoint() * &u * &v;
            let k = (&w - w.adjoint()) * C64::new(0.0, -0.5);
            let inner = SymmetricEigen::new(k);
            let rotated = v * inner.eigenvectors;
            vectors.extend(rotated.column_iter().map(|c| c.into_owned()));
        }
        start = end;
    }

    let mu_arg = PI * (s * (d - 1)) as f64 / d as f64;
    let mut basis = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
    let mut filled = vec![false; d];
    let mut worst_residual = 0.0f64;
    for mut v in vectors {
        let norm = v.norm();
        v /= C64::new(norm, 0.0);
        if let Some(z) = v.iter().copied().find(|z| modulus(*z) > 1e-10) {
            let phase = z.conj() / modulus(z);
            v *= phase;
        }
        let uv = &u * &v;
        let lambda = v.dotc(&uv);
        let residual = (&uv - &v * lambda).norm();
        worst_residual = worst_residual.max(residual);
        let turns = (lambda.argument() - mu_arg) * d as f64 / (2.0 * PI);
        let nearest = libm::round(turns);
        let off_lattice = (turns - nearest).abs() * 2.0 * PI / d as f64;
        worst_residual = worst_residual.max(off_lattice);
        let x = (nearest as i64).rem_euclid(d as i64) as usize;
        if filled[x] {
            return Err(Error::Residual {
                residual: off_lattice.max(1.0),
                tolerance: EIGEN_RESIDUAL_TOLERANCE,
            });
        }
        filled[x] = true;
        basis.set_column(x, &v);
    }
    if worst_residual > EIGEN_RESIDUAL_TOLERANCE {
        return Err(Error::Residual {
            residual: worst_residual,
            tolerance: EIGEN_RESIDUAL_TOLERANCE,
        });
    }
    Ok((basis, worst_residual))
}

fn quadratic_form(m: &DMatrix<C64>, v: &DVector<C64>) -> f64 {
    v.dotc(&(m * v)).re
}

impl MubSet {
    pub fn dimension(&self) -> PrimeDimension {
        self.d
    }

    pub fn basis(&self, j: usize) -> &DMatrix<C64> {
        &self.bases[j]
    }

    pub fn vector(&self, j: usize, x: usize) -> DVector<C64> {
        self.bases[j].column(x).into_owned()
    }

    /// Largest eigen-equation residual encountered during construction.
    pub fn eigen_residual(&self) -> f64 {
        self.eigen_residual
    }

    /// `max | <u|u'> - [u == u'] |` within each basis.
    pub fn orthonormality_deviation(&self) -> f64 {
        let dd = self.d.get();
        self.bases
            .iter()
            .map(|b| {
                let gram = b.adjoint() * b;
                (&gram - DMatrix::<C64>::identity(dd, dd))
                    .iter()
                    .map(|z| modulus(*z))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// `max | |<u|v>|^2 - 1/d |` over vectors of distinct bases.
    pub fn unbiasedness_deviation(&self) -> f64 {
        let inv_d = 1.0 / self.d.as_f64();
        let mut worst = 0.0f64;
        for (i, a) in self.bases.iter().enumerate() {
            for b in &self.bases[i + 1..] {
                let overlaps = a.adjoint() * b;
                for z in overlaps.iter() {
                    worst = worst.max((z.norm_sqr() - inv_d).abs());
                }
            }
        }
        worst
    }

    /// `Lambda^j_c = sum_x |x*><x*|^j (x) |x+c><x+c|^j` on `C^d (x) C^d`.
    pub fn povm_element(&self, j: usize, c: usize) -> Result<DMatrix<C64>> {
        let dd = self.d.get();
        check_index("basis", j, dd + 1)?;
        check_index("symbol", c, dd)?;
        let mut m = DMatrix::from_element(dd * dd, dd * dd, C64::new(0.0, 0.0));
        for x in 0..dd {
            let alice = self.vector(j, x).map(|z| z.conj());
            let bob = self.vector(j, (x + c) % dd);
            let w = alice.kronecker(&bob);
            m += &w * w.adjoint();
        }
        Ok(m)
    }

    /// `max_entry | sum_c Lambda^j_c - I |`.
    pub fn completeness_residual(&self, j: usize) -> Result<f64> {
        let dd = self.d.get();
        let mut sum = DMatrix::from_element(dd * dd, dd * dd, C64::new(0.0, 0.0));
        for c in 0..dd {
            sum += self.povm_element(j, c)?;
        }
        sum -= DMatrix::<C64>::identity(dd * dd, dd * dd);
        Ok(sum.iter().map(|z| modulus(*z)).fold(0.0, f64::max))
    }

    /// `<phi_label| Lambda^j_c |phi_label>`.
    pub fn outcome_probability(&self, j: usize, c: usize, label: BellLabel) -> Result<f64> {
        let povm = self.povm_element(j, c)?;
        check_index("alpha", label.alpha, self.d.get())?;
        check_index("beta", label.beta, self.d.get())?;
        Ok(quadratic_form(&povm, &bell_state(self.d, label)))
    }

    /// Runs every structural check and compares the oracle outcome sets
    /// against [`pcj_closed_form`].
    pub fn certify(&self) -> Result<Certification> {
        let d = self.d;
        let dd = d.get();
        let mut cells = Vec::with_capacity((dd + 1) * dd);
        let mut completeness = 0.0f64;
        let mut determinism = 0.0f64;
        let mut mismatches = 0;
        for j in 0..=dd {
            completeness = completeness.max(self.completeness_residual(j)?);
            for c in 0..dd {
                let povm = self.povm_element(j, c)?;
                let closed = pcj_closed_form(d, j, c)?;
                let mut oracle_set = Vec::new();
                let mut residual = 0.0f64;
                for label in BellLabel::all(d) {
                    let p = quadratic_form(&povm, &bell_state(d, label));
                    determinism = determinism.max(p.abs().min((1.0 - p).abs()));
                    if p > 0.5 {
                        oracle_set.push(label);
                    }
                    let expected = if outcome_class(d, j, label) == c { 1.0 } else { 0.0 };
                    residual = residual.max((p - expected).abs());
                }
                if oracle_set != closed {
                    mismatches += 1;
                }
                cells.push(CellCertificate {
                    basis: j,
                    symbol: c,
                    oracle_set,
                    closed_form: closed,
                    residual,
                });
            }
        }
        Ok(Certification {
            d,
            eigen_residual: self.eigen_residual,
            orthonormality: self.orthonormality_deviation(),
            unbiasedness: self.unbiasedness_deviation(),
            completeness,
            determinism,
            mismatches,
            cells,
        })
    }
}

/// Oracle verdict for one `(j, c)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCertificate {
    pub basis: usize,
    pub symbol: usize,
    pub oracle_set: Vec<BellLabel>,
    pub closed_form: Vec<BellLabel>,
    /// `max_label |p - [label in closed form]|`.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certification {
    pub d: PrimeDimension,
    pub eigen_residual: f64,
    pub orthonormality: f64,
    pub unbiasedness: f64,
    pub completeness: f64,
    /// Largest distance of any outcome probability from `{0, 1}`.
    pub determinism: f64,
    pub mismatches: usize,
    pub cells: Vec<CellCertificate>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dim(d: usize) -> PrimeDimension {
        PrimeDimension::new(d).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn qubit_bell_states() {
        let d = dim(2);
        let s = 1.0 / 2f64.sqrt();
        let phi00 = bell_state(d, BellLabel::new(d, 0, 0).unwrap());
        let expect = [c(s, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(s, 0.0)];
        for (a, b) in phi00.iter().zip(expect) {
            assert!((a - b).norm() < 1e-15);
        }
        let phi11 = bell_state(d, BellLabel::new(d, 1, 1).unwrap());
        let expect = [c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)];
        for (a, b) in phi11.iter().zip(expect) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn qutrit_bell_state_expansion() {
        let d = dim(3);
        let v = bell_state(d, BellLabel::new(d, 1, 2).unwrap());
        let s = 1.0 / 3f64.sqrt();
        let w = root_of_unity(3, 1);
        // (|0,1> + w^2 |1,2> + w^4 |2,0>) / sqrt 3
        assert!((v[1] - c(s, 0.0)).norm() < 1e-15);
        assert!((v[3 + 2] - w.powu(2) * s).norm() < 1e-14);
        assert!((v[6] - w.powu(4) * s).norm() < 1e-14);
        assert!((v.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bell_states_are_orthonormal() {
        for dd in [2, 3, 5] {
            let d = dim(dd);
            let states: Vec<_> = BellLabel::all(d).map(|l| bell_state(d, l)).collect();
            for (i, a) in states.iter().enumerate() {
                for (k, b) in states.iter().enumerate() {
                    let ip = a.dotc(b).norm();
                    let expect = if i == k { 1.0 } else { 0.0 };
                    assert!((ip - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn qubit_mub_triple() {
        let mubs = build_mub_bases(dim(2)).unwrap();
        assert_eq!(mubs.bases.len(), 3);
        assert!(mubs.unbiasedness_deviation() < 1e-12);
        assert!(mubs.orthonormality_deviation() < 1e-12);
    }

    #[test]
    fn bases_are_unbiased_for_small_primes() {
        for dd in [3, 5, 7] {
            let mubs = build_mub_bases(dim(dd)).unwrap();
            assert_eq!(mubs.bases.len(), dd + 1);
            assert!(mubs.unbiasedness_deviation() < 1e-10, "d = {dd}");
            assert!(mubs.orthonormality_deviation() < 1e-10);
            assert!(mubs.eigen_residual() < EIGEN_RESIDUAL_TOLERANCE);
        }
    }

    #[test]
    fn eigenvectors_have_canonical_phase_and_eigenvalue_labels() {
        let dd = 5;
        let mubs = build_mub_bases(dim(dd)).unwrap();
        for s in 0..dd {
            let u = shift_clock(dd, s);
            let mu = PI * (s * (dd - 1)) as f64 / dd as f64;
            for x in 0..dd {
                let v = mubs.vector(s + 1, x);
                let first = v.iter().find(|z| z.norm() > 1e-10).unwrap();
                assert!(first.im.abs() < 1e-12 && first.re > 0.0);
                let expect = C64::new(0.0, mu).exp() * root_of_unity(dd, x);
                assert!((&u * &v - &v * expect).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn oracle_rejects_large_or_composite_dimensions() {
        assert!(matches!(
            build_mub_bases(dim(17)),
            Err(Error::OracleScale { .. })
        ));
        assert!(build_mub_bases(dim(13)).is_ok());
    }

    #[test]
    fn qubit_computational_povms() {
        let mubs = build_mub_bases(dim(2)).unwrap();
        let agree = mubs.povm_element(0, 0).unwrap();
        let differ = mubs.povm_element(0, 1).unwrap();
        for i in 0..4 {
            let on_diag = if i == 0 || i == 3 { 1.0 } else { 0.0 };
            assert!((agree[(i, i)].re - on_diag).abs() < 1e-15);
            assert!((differ[(i, i)].re - (1.0 - on_diag)).abs() < 1e-15);
        }
        assert!(mubs.povm_element(3, 0).is_err());
        assert!(mubs.povm_element(0, 2).is_err());
    }

    #[test]
    fn povm_trace_and_completeness() {
        let mubs = build_mub_bases(dim(3)).unwrap();
        let p = mubs.povm_element(2, 1).unwrap();
        assert!((p.trace().re - 3.0).abs() < 1e-10);
        assert!((&p - p.adjoint()).iter().all(|z| z.norm() < 1e-12));
        // projector of rank 3
        assert!((&p * &p - &p).iter().all(|z| z.norm() < 1e-10));
        for j in 0..=3 {
            assert!(mubs.completeness_residual(j).unwrap() < 1e-10);
        }
    }

    #[test]
    fn qubit_outcomes_follow_bit_difference_in_basis_zero() {
        let d = dim(2);
        let mubs = build_mub_bases(d).unwrap();
        for label in BellLabel::all(d) {
            for cc in 0..2 {
                let p = mubs.outcome_probability(0, cc, label).unwrap();
                let expect = if cc == label.alpha { 1.0 } else { 0.0 };
                assert!((p - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn qutrit_basis_two_outcome_rows_are_deterministic() {
        let d = dim(3);
        let mubs = build_mub_bases(d).unwrap();
        for label in BellLabel::all(d) {
            let probs: Vec<f64> = (0..3)
                .map(|cc| mubs.outcome_probability(2, cc, label).unwrap())
                .collect();
            assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            for p in probs {
                assert!(p.abs() < 1e-10 || (p - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn closed_form_examples() {
        let l = |a, b| BellLabel { alpha: a, beta: b };
        assert_eq!(pcj_closed_form(dim(2), 0, 1).unwrap(), vec![l(1, 0), l(1, 1)]);
        assert_eq!(
            pcj_closed_form(dim(3), 1, 2).unwrap(),
            vec![l(0, 1), l(1, 1), l(2, 1)]
        );
        let set = pcj_closed_form(dim(5), 3, 0).unwrap();
        assert_eq!(set.len(), 5);
        assert!(set.iter().all(|x| (2 * x.alpha) % 5 == x.beta));
        assert!(pcj_closed_form(dim(5), 6, 0).is_err());
    }

    #[test]
    fn oracle_class_table_equals_closed_form() {
        for dd in [2, 3, 5, 7] {
            let d = dim(dd);
            let mubs = build_mub_bases(d).unwrap();
            assert_eq!(ClassTable::from_oracle(&mubs).unwrap(), ClassTable::closed_form(d));
        }
    }

    #[test]
    fn same_basis_on_both_sides_is_not_deterministic_for_qutrits() {
        // documents why Alice's half of the POVM is conjugated
        let d = dim(3);
        let mubs = build_mub_bases(d).unwrap();
        let phi = bell_state(d, BellLabel { alpha: 0, beta: 0 });
        let mut p = 0.0;
        for x in 0..3 {
            let w = mubs.vector(2, x).kronecker(&mubs.vector(2, x));
            p += w.dotc(&phi).norm_sqr();
        }
        assert!((p - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn forward_examples() {
        let d = dim(3);
        let mut lambda = BellWeights::zeros(d);
        lambda.set(0, 0, 100.0);
        let q = forward_statistics(&lambda).unwrap();
        for j in 0..=3 {
            assert_eq!(q.get(j, 0), 1.0);
            assert_eq!(q.get(j, 1), 0.0);
        }
        let uniform = BellWeights::from_row_major(d, vec![1.0; 9]).unwrap();
        let q = forward_statistics(&uniform).unwrap();
        for j in 0..=3 {
            for cc in 0..3 {
                assert!((q.get(j, cc) - 1.0 / 3.0).abs() < 1e-15);
            }
        }
        let d2 = dim(2);
        let six_state = BellWeights::from_row_major(d2, vec![0.85, 0.05, 0.05, 0.05]).unwrap();
        let q = forward_statistics(&six_state).unwrap();
        for j in 0..3 {
            assert!((q.get(j, 0) - 0.9).abs() < 1e-12);
            assert!((q.get(j, 1) - 0.1).abs() < 1e-12);
        }
        let bad = BellWeights::from_row_major(d2, vec![1.0, -0.1, 0.0, 0.1]).unwrap();
        assert!(forward_statistics(&bad).is_err());
    }

    fn depolarized_stats(d: PrimeDimension, per_symbol: f64) -> BasisStatistics {
        let dd = d.get();
        let rows: Vec<Vec<f64>> = (0..=dd)
            .map(|_| {
                let mut r = vec![per_symbol; dd];
                r[0] = 1.0 - per_symbol * (dd - 1) as f64;
                r
            })
            .collect();
        BasisStatistics::from_rows(d, &rows).unwrap()
    }

    #[test]
    fn inversion_examples() {
        let d = dim(3);
        let lam = invert_statistics(&depolarized_stats(d, 0.0), 30.0);
        assert!((lam.get(0, 0) - 30.0).abs() < 1e-12);
        assert!(lam.as_slice()[1..].iter().all(|w| w.abs() < 1e-12));

        let lam = invert_statistics(&depolarized_stats(dim(2), 0.1), 1.0);
        let expect = [0.85, 0.05, 0.05, 0.05];
        for (a, b) in lam.as_slice().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }

        let q = depolarized_stats(d, 0.05);
        let lam = invert_statistics(&q, 1.0);
        assert!((lam.get(0, 0) - 2.6 / 3.0).abs() < 1e-12);
        for label in BellLabel::all(d).skip(1) {
            assert!((lam.get(label.alpha, label.beta) - 0.1 / 6.0).abs() < 1e-12);
        }
        let back = forward_statistics(&lam).unwrap();
        assert!(back.max_abs_diff(&q) < 1e-12);
    }

    #[test]
    fn certification_report_is_clean() {
        let mubs = build_mub_bases(dim(5)).unwrap();
        let cert = mubs.certify().unwrap();
        assert_eq!(cert.mismatches, 0);
        assert_eq!(cert.cells.len(), 6 * 5);
        assert!(cert.determinism < 1e-9);
        assert!(cert.completeness < 1e-10);
        assert!(cert.cells.iter().all(|c| c.residual < 1e-9));
    }
}
