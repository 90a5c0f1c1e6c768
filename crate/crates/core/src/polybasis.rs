//! Multi-index enumeration and coefficient algebra over the monomial basis
//! of polynomials of total degree ≤ m on n coordinates.
//!
//! Basis elements are ordered graded-lexicographically: first by total
//! degree, then lexicographically on the exponent tuple. Degree blocks are
//! therefore contiguous, which makes the degree-preservation structure of
//! generator matrices visible as block lower-triangularity.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent tuple k = (k_1,...,k_n) of a monomial x^k.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex(entries)
    }

    /// The zero multi-index (the constant monomial) in n coordinates.
    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// The unit multi-index e_axis (the monomial x_axis).
    pub fn unit(n: usize, axis: usize) -> Self {
        assert!(axis < n, "axis {axis} out of range for dimension {n}");
        let mut e = vec![0; n];
        e[axis] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Total degree |k| = Σ k_i.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn entries(&self) -> &[u32] {
        &self.0
    }

    pub fn entry(&self, i: usize) -> u32 {
        self.0[i]
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        assert_eq!(self.dim(), other.dim());
        MultiIndex(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Componentwise subtraction; `None` if any entry would go negative.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if self.dim() != other.dim() {
            return None;
        }
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.checked_sub(*b))
            .collect::<Option<Vec<u32>>>()
            .map(MultiIndex)
    }

    /// Returns self with entry `axis` incremented.
    pub fn bump(&self, axis: usize) -> MultiIndex {
        let mut e = self.0.clone();
        e[axis] += 1;
        MultiIndex(e)
    }

    /// Returns self with entry `axis` decremented, `None` if it is zero.
    pub fn drop(&self, axis: usize) -> Option<MultiIndex> {
        if self.0[axis] == 0 {
            return None;
        }
        let mut e = self.0.clone();
        e[axis] -= 1;
        Some(MultiIndex(e))
    }

    /// Componentwise l ≤ k.
    pub fn dominated_by(&self, other: &MultiIndex) -> bool {
        self.dim() == other.dim() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }
}

impl Ord for MultiIndex {
    /// Graded lexicographic order: by total degree, then lexicographically.
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, "]")
    }
}

impl FromStr for MultiIndex {
    type Err = Error;

    /// Parses `[k1,k2,...]` (brackets optional).
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
        if inner.trim().is_empty() {
            return Err(Error::InvalidParameter(format!(
                "empty multi-index: {s:?}"
            )));
        }
        inner
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<u32>()
                    .map_err(|_| Error::InvalidParameter(format!("bad multi-index entry {p:?}")))
            })
            .collect::<Result<Vec<u32>>>()
            .map(MultiIndex)
    }
}

/// Binomial coefficient in checked 64-bit arithmetic.
pub(crate) fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)?;
        acc /= i + 1;
    }
    Some(acc)
}

// Bases beyond this size are outside the intended desk scale.
const MAX_BASIS_SIZE: u64 = 2_000_000;

/// The monomial basis of polynomials of total degree ≤ `max_degree` on
/// `dim` coordinates, in graded lexicographic order.
#[derive(Debug, Clone)]
pub struct Basis {
    dim: usize,
    max_degree: u32,
    ordering: Vec<MultiIndex>,
    positions: HashMap<MultiIndex, usize>,
}

/// Enumerates all multi-indices with |k| ≤ m in graded lex order.
///
/// The basis size is N = binomial(n+m, n).
pub fn enumerate_basis(n: usize, m: u32) -> Result<Arc<Basis>> {
    Basis::new(n, m).map(Arc::new)
}

impl Basis {
    pub fn new(dim: usize, max_degree: u32) -> Result<Basis> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "basis dimension must be at least 1".into(),
            ));
        }
        let n = binomial(dim as u64 + max_degree as u64, dim as u64)
            .filter(|&n| n <= MAX_BASIS_SIZE)
            .ok_or(Error::BasisTooLarge {
                dim,
                max_degree,
            })?;

        let mut ordering = Vec::with_capacity(n as usize);
        let mut scratch = vec![0u32; dim];
        for degree in 0..=max_degree {
            emit_degree(degree, 0, &mut scratch, &mut ordering);
        }
        debug_assert_eq!(ordering.len(), n as usize);

        let positions = ordering
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect();
        Ok(Basis {
            dim,
            max_degree,
            ordering,
            positions,
        })
    }

    /// Number of state coordinates n.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    /// Basis size N.
    pub fn len(&self) -> usize {
        self.ordering.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn ordering(&self) -> &[MultiIndex] {
        &self.ordering
    }

    pub fn at(&self, position: usize) -> &MultiIndex {
        &self.ordering[position]
    }

    /// Position of `k` in the graded-lex ordering.
    pub fn index_of(&self, k: &MultiIndex) -> Result<usize> {
        if k.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: k.dim(),
            });
        }
        self.positions
            .get(k)
            .copied()
            .ok_or_else(|| Error::IndexOutOfBasis { index: k.clone() })
    }

    /// First basis position of the given degree block.
    pub fn degree_block_start(&self, degree: u32) -> usize {
        self.ordering
            .partition_point(|k| k.degree() < degree.min(self.max_degree + 1))
    }

    /// Two bases are interchangeable iff they have equal (n, m).
    pub fn same_layout(&self, other: &Basis) -> bool {
        self.dim == other.dim && self.max_degree == other.max_degree
    }
}

fn emit_degree(left: u32, coord: usize, scratch: &mut [u32], out: &mut Vec<MultiIndex>) {
    if coord + 1 == scratch.len() {
        scratch[coord] = left;
        out.push(MultiIndex::new(scratch.to_vec()));
        return;
    }
    for v in 0..=left {
        scratch[coord] = v;
        emit_degree(left - v, coord + 1, scratch, out);
    }
    scratch[coord] = 0;
}

/// A polynomial as its coefficient vector over a shared basis.
#[derive(Debug, Clone)]
pub struct PolyVector {
    basis: Arc<Basis>,
    coeffs: Vec<f64>,
}

impl PolyVector {
    pub fn new(basis: Arc<Basis>, coeffs: Vec<f64>) -> Result<PolyVector> {
        if coeffs.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: coeffs.len(),
            });
        }
        Ok(PolyVector { basis, coeffs })
    }

    pub fn zero(basis: Arc<Basis>) -> PolyVector {
        let n = basis.len();
        PolyVector {
            basis,
            coeffs: vec![0.0; n],
        }
    }

    /// The monomial x^k as a basis vector.
    pub fn monomial(basis: Arc<Basis>, k: &MultiIndex) -> Result<PolyVector> {
        let idx = basis.index_of(k)?;
        let mut p = PolyVector::zero(basis);
        p.coeffs[idx] = 1.0;
        Ok(p)
    }

    /// Builds a polynomial from sparse (multi-index, coefficient) terms.
    pub fn from_terms(basis: Arc<Basis>, terms: &[(MultiIndex, f64)]) -> Result<PolyVector> {
        let mut p = PolyVector::zero(basis);
        for (k, c) in terms {
            let idx = p.basis.index_of(k)?;
            p.coeffs[idx] += c;
        }
        Ok(p)
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn coeff(&self, k: &MultiIndex) -> Result<f64> {
        Ok(self.coeffs[self.basis.index_of(k)?])
    }

    /// Max |k| over nonzero coefficients; 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.basis
            .ordering()
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, &c)| c != 0.0)
            .map(|(k, _)| k.degree())
            .max()
            .unwrap_or(0)
    }

    /// Evaluates Σ α_k x^k with precomputed integer powers per coordinate.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        assert_eq!(
            x.len(),
            self.basis.dim(),
            "evaluation point has wrong dimension"
        );
        let m = self.basis.max_degree() as usize;
        // powers[c][p] = x_c^p
        let powers: Vec<Vec<f64>> = x
            .iter()
            .map(|&xi| {
                let mut row = Vec::with_capacity(m + 1);
                let mut acc = 1.0;
                row.push(acc);
                for _ in 0..m {
                    acc *= xi;
                    row.push(acc);
                }
                row
            })
            .collect();
        self.basis
            .ordering()
            .iter()
            .zip(&self.coeffs)
            .filter(|(_, &c)| c != 0.0)
            .map(|(k, &c)| {
                let term: f64 = k
                    .entries()
                    .iter()
                    .enumerate()
                    .map(|(c_idx, &p)| powers[c_idx][p as usize])
                    .product();
                c * term
            })
            .sum()
    }

    /// Coefficients of ∂p/∂x_axis in the same basis.
    pub fn differentiate(&self, axis: usize) -> PolyVector {
        assert!(axis < self.basis.dim(), "axis out of range");
        let mut out = PolyVector::zero(self.basis.clone());
        for (k, &c) in self.basis.ordering().iter().zip(&self.coeffs) {
            if c == 0.0 {
                continue;
            }
            if let Some(lower) = k.drop(axis) {
                let idx = self
                    .basis
                    .index_of(&lower)
                    .expect("derivative stays inside the basis");
                out.coeffs[idx] += c * f64::from(k.entry(axis));
            }
        }
        out
    }

    /// Exact coefficient convolution embedded into `target`.
    ///
    /// Errors with `DegreeOverflow` when deg(p)+deg(q) exceeds the target
    /// degree; products are never silently truncated.
    pub fn multiply(&self, other: &PolyVector, target: &Arc<Basis>) -> Result<PolyVector> {
        if self.basis.dim() != other.basis.dim() || self.basis.dim() != target.dim() {
            return Err(Error::BasisMismatch);
        }
        let degree = self.degree() + other.degree();
        if degree > target.max_degree() {
            return Err(Error::DegreeOverflow {
                degree,
                max: target.max_degree(),
            });
        }
        let mut out = PolyVector::zero(target.clone());
        for (k1, &c1) in self.basis.ordering().iter().zip(&self.coeffs) {
            if c1 == 0.0 {
                continue;
            }
            for (k2, &c2) in other.basis.ordering().iter().zip(&other.coeffs) {
                if c2 == 0.0 {
                    continue;
                }
                let idx = target.index_of(&k1.add(k2))?;
                out.coeffs[idx] += c1 * c2;
            }
        }
        Ok(out)
    }

    /// Re-expresses the polynomial over a basis of (weakly) larger degree.
    pub fn embed(&self, target: &Arc<Basis>) -> Result<PolyVector> {
        if target.dim() != self.basis.dim() {
            return Err(Error::BasisMismatch);
        }
        if self.basis.same_layout(target) {
            return Ok(PolyVector {
                basis: target.clone(),
                coeffs: self.coeffs.clone(),
            });
        }
        let mut out = PolyVector::zero(target.clone());
        for (k, &c) in self.basis.ordering().iter().zip(&self.coeffs) {
            if c != 0.0 {
                let idx = target.index_of(k)?;
                out.coeffs[idx] = c;
            }
        }
        Ok(out)
    }

    pub fn scale(&mut self, factor: f64) {
        for c in &mut self.coeffs {
            *c *= factor;
        }
    }

    /// self += factor * other (same basis layout required).
    pub fn axpy(&mut self, factor: f64, other: &PolyVector) -> Result<()> {
        if !self.basis.same_layout(&other.basis) {
            return Err(Error::BasisMismatch);
        }
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += factor * b;
        }
        Ok(())
    }
}

/// One term of the compensated jump expansion of a monomial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JumpTaylorTerm {
    /// Jump power l (appears as ξ^l under the jump measure).
    pub power: MultiIndex,
    /// Integer weight Π_i binomial(k_i, l_i).
    pub weight: u64,
    /// Remaining state monomial x^{k-l}.
    pub residual: MultiIndex,
}

/// Multinomial expansion of (x+ξ)^k − x^k − Σ_j k_j ξ_j x^{k−e_j}.
///
/// Returns all terms C(k,l) x^{k−l} ξ^l with l ≤ k componentwise and
/// |l| ≥ 2, in graded-lex order of l. These are exactly the terms that
/// survive compensation with the truncation function χ(ξ)=ξ.
pub fn jump_taylor_terms(k: &MultiIndex) -> Vec<JumpTaylorTerm> {
    let mut terms = Vec::new();
    let mut scratch = vec![0u32; k.dim()];
    collect_dominated(k, 0, &mut scratch, &mut terms);
    terms.sort_by(|a, b| a.power.cmp(&b.power));
    terms
}

fn collect_dominated(
    k: &MultiIndex,
    coord: usize,
    scratch: &mut Vec<u32>,
    out: &mut Vec<JumpTaylorTerm>,
) {
    if coord == k.dim() {
        let l = MultiIndex::new(scratch.clone());
        if l.degree() < 2 {
            return;
        }
        let weight = l
            .entries()
            .iter()
            .zip(k.entries())
            .map(|(&li, &ki)| binomial(u64::from(ki), u64::from(li)).expect("binomial overflow"))
            .try_fold(1u64, |acc, b| acc.checked_mul(b))
            .expect("jump expansion weight overflow");
        let residual = k.checked_sub(&l).expect("l dominated by k");
        out.push(JumpTaylorTerm {
            power: l,
            weight,
            residual,
        });
        return;
    }
    for v in 0..=k.entry(coord) {
        scratch[coord] = v;
        collect_dominated(k, coord + 1, scratch, out);
    }
    scratch[coord] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(entries: &[u32]) -> MultiIndex {
        MultiIndex::new(entries.to_vec())
    }

    #[test]
    fn enumerate_univariate() {
        let b = enumerate_basis(1, 3).unwrap();
        let expected: Vec<MultiIndex> = [0u32, 1, 2, 3].iter().map(|&k| mi(&[k])).collect();
        assert_eq!(b.ordering(), &expected[..]);
        assert_eq!(b.len(), 4);
    }

    #[test]
    fn enumerate_bivariate_graded_lex() {
        let b = enumerate_basis(2, 2).unwrap();
        let expected = vec![
            mi(&[0, 0]),
            mi(&[0, 1]),
            mi(&[1, 0]),
            mi(&[0, 2]),
            mi(&[1, 1]),
            mi(&[2, 0]),
        ];
        assert_eq!(b.ordering(), &expected[..]);
    }

    #[test]
    fn enumerate_count_matches_brute_force() {
        // Count all k with |k| <= 4 on 3 coordinates by triple loop.
        let mut count = 0usize;
        for k1 in 0..=4u32 {
            for k2 in 0..=4u32 {
                for k3 in 0..=4u32 {
                    if k1 + k2 + k3 <= 4 {
                        count += 1;
                    }
                }
            }
        }
        assert_eq!(count, 35);
        assert_eq!(enumerate_basis(3, 4).unwrap().len(), 35);
    }

    #[test]
    fn index_of_inverts_ordering() {
        let b = enumerate_basis(2, 2).unwrap();
        assert_eq!(b.index_of(&mi(&[0, 0])).unwrap(), 0);
        assert_eq!(b.index_of(&mi(&[1, 1])).unwrap(), 4);
        for (i, k) in b.ordering().iter().enumerate() {
            assert_eq!(b.index_of(k).unwrap(), i);
        }
    }

    #[test]
    fn index_of_by_linear_scan_oracle() {
        let b = enumerate_basis(3, 4).unwrap();
        let k = mi(&[0, 0, 4]);
        let scanned = b.ordering().iter().position(|x| *x == k).unwrap();
        assert_eq!(b.index_of(&k).unwrap(), scanned);
    }

    #[test]
    fn index_of_rejects_outside() {
        let b = enumerate_basis(2, 2).unwrap();
        assert!(matches!(
            b.index_of(&mi(&[3, 0])),
            Err(Error::IndexOutOfBasis { .. })
        ));
        assert!(matches!(
            b.index_of(&mi(&[1])),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn differentiate_univariate_square() {
        let b = enumerate_basis(1, 3).unwrap();
        let p = PolyVector::monomial(b.clone(), &mi(&[2])).unwrap();
        let d = p.differentiate(0);
        assert_eq!(d.coeffs(), &[0.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn differentiate_mixed() {
        // p = x1*x2 + 3, d/dx2 -> x1
        let b = enumerate_basis(2, 2).unwrap();
        let p = PolyVector::from_terms(b.clone(), &[(mi(&[1, 1]), 1.0), (mi(&[0, 0]), 3.0)])
            .unwrap();
        let d = p.differentiate(1);
        assert_eq!(d.coeff(&mi(&[1, 0])).unwrap(), 1.0);
        assert_eq!(d.degree(), 1);
        assert_eq!(d.coeffs().iter().filter(|&&c| c != 0.0).count(), 1);
    }

    #[test]
    fn differentiate_matches_symbolic_expansion() {
        // (x+1)^3 = x^3 + 3x^2 + 3x + 1; derivative 3(x+1)^2 = 3x^2 + 6x + 3.
        let b = enumerate_basis(1, 3).unwrap();
        let p = PolyVector::new(b.clone(), vec![1.0, 3.0, 3.0, 1.0]).unwrap();
        let d = p.differentiate(0);
        assert_eq!(d.coeffs(), &[3.0, 6.0, 3.0, 0.0]);
    }

    #[test]
    fn multiply_simple() {
        let b1 = enumerate_basis(1, 1).unwrap();
        let b2 = enumerate_basis(1, 2).unwrap();
        let x = PolyVector::monomial(b1.clone(), &mi(&[1])).unwrap();
        let sq = x.multiply(&x, &b2).unwrap();
        assert_eq!(sq.coeffs(), &[0.0, 0.0, 1.0]);

        // (1+x)(1-x) = 1 - x^2
        let p = PolyVector::new(b1.clone(), vec![1.0, 1.0]).unwrap();
        let q = PolyVector::new(b1, vec![1.0, -1.0]).unwrap();
        let prod = p.multiply(&q, &b2).unwrap();
        assert_eq!(prod.coeffs(), &[1.0, 0.0, -1.0]);
    }

    #[test]
    fn multiply_rejects_overflow() {
        let b = enumerate_basis(1, 2).unwrap();
        let x2 = PolyVector::monomial(b.clone(), &mi(&[2])).unwrap();
        assert!(matches!(
            x2.multiply(&x2, &b),
            Err(Error::DegreeOverflow { degree: 4, max: 2 })
        ));
    }

    #[test]
    fn multiply_matches_grid_evaluation() {
        // Random-ish degree-2 polynomials on n=2 against a 25-point grid.
        let b2 = enumerate_basis(2, 2).unwrap();
        let b4 = enumerate_basis(2, 4).unwrap();
        let p = PolyVector::new(b2.clone(), vec![0.3, -1.2, 0.7, 2.0, -0.5, 0.9]).unwrap();
        let q = PolyVector::new(b2, vec![-0.8, 0.1, 1.4, -0.3, 0.6, -1.1]).unwrap();
        let prod = p.multiply(&q, &b4).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let x = [-1.0 + 0.5 * i as f64, -1.0 + 0.5 * j as f64];
                let lhs = prod.evaluate(&x);
                let rhs = p.evaluate(&x) * q.evaluate(&x);
                assert!(
                    (lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()),
                    "mismatch at {x:?}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn evaluate_examples() {
        let b = enumerate_basis(1, 2).unwrap();
        let p = PolyVector::new(b, vec![1.0, 0.0, 1.0]).unwrap();
        assert_eq!(p.evaluate(&[2.0]), 5.0);

        let b2 = enumerate_basis(2, 2).unwrap();
        let q = PolyVector::monomial(b2, &mi(&[1, 1])).unwrap();
        assert_eq!(q.evaluate(&[3.0, 4.0]), 12.0);
    }

    #[test]
    fn evaluate_matches_naive_sum() {
        let b = enumerate_basis(2, 4).unwrap();
        let coeffs: Vec<f64> = (0..b.len())
            .map(|i| ((i * 2654435761) % 1000) as f64 / 500.0 - 1.0)
            .collect();
        let p = PolyVector::new(b.clone(), coeffs.clone()).unwrap();
        let x = [1.3f64, -0.7];
        let naive: f64 = b
            .ordering()
            .iter()
            .zip(&coeffs)
            .map(|(k, c)| {
                c * x[0].powi(k.entry(0) as i32) * x[1].powi(k.entry(1) as i32)
            })
            .sum();
        let got = p.evaluate(&x);
        assert!((got - naive).abs() <= 1e-12 * (1.0 + naive.abs()));
    }

    #[test]
    fn jump_taylor_univariate() {
        // (x+xi)^2 - x^2 - 2 xi x = xi^2
        let terms = jump_taylor_terms(&mi(&[2]));
        assert_eq!(
            terms,
            vec![JumpTaylorTerm {
                power: mi(&[2]),
                weight: 1,
                residual: mi(&[0]),
            }]
        );

        let terms = jump_taylor_terms(&mi(&[3]));
        assert_eq!(
            terms,
            vec![
                JumpTaylorTerm {
                    power: mi(&[2]),
                    weight: 3,
                    residual: mi(&[1]),
                },
                JumpTaylorTerm {
                    power: mi(&[3]),
                    weight: 1,
                    residual: mi(&[0]),
                },
            ]
        );
    }

    #[test]
    fn jump_taylor_bivariate() {
        let terms = jump_taylor_terms(&mi(&[2, 1]));
        let expected = vec![
            JumpTaylorTerm {
                power: mi(&[1, 1]),
                weight: 2,
                residual: mi(&[1, 0]),
            },
            JumpTaylorTerm {
                power: mi(&[2, 0]),
                weight: 1,
                residual: mi(&[0, 1]),
            },
            JumpTaylorTerm {
                power: mi(&[2, 1]),
                weight: 1,
                residual: mi(&[0, 0]),
            },
        ];
        assert_eq!(terms, expected);
    }

    #[test]
    fn jump_taylor_reconstructs_binomial_formula() {
        // Sum of expansion terms + x^k + sum k_j xi_j x^{k-e_j} == (x+xi)^k.
        let k = mi(&[3, 2]);
        let x = [0.7f64, -1.1];
        let xi = [0.4f64, 0.9];
        let full = (x[0] + xi[0]).powi(3) * (x[1] + xi[1]).powi(2);
        let mut acc = x[0].powi(3) * x[1].powi(2);
        for j in 0..2 {
            if let Some(r) = k.drop(j) {
                acc += f64::from(k.entry(j))
                    * xi[j]
                    * x[0].powi(r.entry(0) as i32)
                    * x[1].powi(r.entry(1) as i32);
            }
        }
        for term in jump_taylor_terms(&k) {
            let xpart = x[0].powi(term.residual.entry(0) as i32)
                * x[1].powi(term.residual.entry(1) as i32);
            let xipart = xi[0].powi(term.power.entry(0) as i32)
                * xi[1].powi(term.power.entry(1) as i32);
            acc += term.weight as f64 * xpart * xipart;
        }
        assert!((acc - full).abs() <= 1e-10 * (1.0 + full.abs()));
    }

    #[test]
    fn multi_index_parse_roundtrip() {
        let k: MultiIndex = "[2,0,3]".parse().unwrap();
        assert_eq!(k, mi(&[2, 0, 3]));
        assert_eq!(k.to_string(), "[2,0,3]");
        let bare: MultiIndex = "1,4".parse().unwrap();
        assert_eq!(bare, mi(&[1, 4]));
    }

    #[test]
    fn zero_polynomial_degree_is_zero() {
        let b = enumerate_basis(2, 3).unwrap();
        assert_eq!(PolyVector::zero(b).degree(), 0);
    }

    #[test]
    fn basis_overflow_errors() {
        assert!(matches!(
            Basis::new(40, 60),
            Err(Error::BasisTooLarge { .. })
        ));
    }
}
