//! Differential characteristics (b, a, K) with affine drift, quadratic
//! diffusion and polynomial jump kernels, and the matrix representation of
//! the associated generator on a monomial basis.
//!
//! The drift is b(x) = b + Σ x_i β_i, the diffusion
//! a(x) = a + Σ x_i α_{i0} + Σ_{i≤j} x_i x_j α_{ij}, and the jump kernel is
//! either a state combination of fixed Lévy measures (Condition A) or the
//! pushforward of a fixed measure under a state-affine map (Condition B).
//! All drifts are stated with respect to the truncation function χ(ξ)=ξ;
//! other truncations enter only through [`convert_truncation`].

mod catalog;
pub mod config;
mod jumps;

pub use catalog::{
    Bates2fJumpParams, Bates2fParams, BatesParams, BmParams, CirParams, ExpLevyJumpParams,
    ExpLevyParams, HestonParams, JacobiParams, Model, VasicekParams,
};
pub use jumps::{
    exponential_raw_moment, ConditionAJumps, ConditionBJumps, JumpLaw, JumpMomentTable, JumpSpec,
};

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::polybasis::{enumerate_basis, jump_taylor_terms, Basis, MultiIndex, PolyVector};

/// Domain of one state coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateDomain {
    FullLine,
    HalfLine,
    Interval { lo: f64, hi: f64 },
}

impl CoordinateDomain {
    fn contained_in_nonneg(&self) -> bool {
        match *self {
            CoordinateDomain::HalfLine => true,
            CoordinateDomain::Interval { lo, .. } => lo >= 0.0,
            CoordinateDomain::FullLine => false,
        }
    }

    fn contained_in_nonpos(&self) -> bool {
        matches!(*self, CoordinateDomain::Interval { hi, .. } if hi <= 0.0)
    }

    fn contains(&self, x: f64) -> bool {
        match *self {
            CoordinateDomain::FullLine => x.is_finite(),
            CoordinateDomain::HalfLine => x >= 0.0,
            CoordinateDomain::Interval { lo, hi } => (lo..=hi).contains(&x),
        }
    }

    fn clamp(&self, x: f64) -> f64 {
        match *self {
            CoordinateDomain::FullLine => x,
            CoordinateDomain::HalfLine => x.max(0.0),
            CoordinateDomain::Interval { lo, hi } => x.clamp(lo, hi),
        }
    }

    /// Sample points used by the psd validation grid.
    fn grid(&self) -> Vec<f64> {
        match *self {
            CoordinateDomain::FullLine => vec![-25.0, -5.0, -1.0, 0.0, 1.0, 5.0, 25.0],
            CoordinateDomain::HalfLine => vec![0.0, 0.5, 1.0, 5.0, 25.0],
            CoordinateDomain::Interval { lo, hi } => {
                (0..9).map(|i| lo + (hi - lo) * f64::from(i) / 8.0).collect()
            }
        }
    }
}

/// Cartesian product of per-coordinate domains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateSpace {
    coords: Vec<CoordinateDomain>,
}

// Full tensor validation grids are truncated to this many points.
const GRID_CAP: usize = 100_000;

impl StateSpace {
    pub fn new(coords: Vec<CoordinateDomain>) -> StateSpace {
        StateSpace { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coord(&self, i: usize) -> CoordinateDomain {
        self.coords[i]
    }

    pub fn coords(&self) -> &[CoordinateDomain] {
        &self.coords
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.coords).all(|(&xi, c)| c.contains(xi))
    }

    pub fn clamp(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.coords).map(|(&xi, c)| c.clamp(xi)).collect()
    }

    /// Deterministic tensor grid over the per-coordinate sample points,
    /// subsampled with a fixed stride when the full tensor exceeds the cap.
    pub fn validation_grid(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self.coords.iter().map(CoordinateDomain::grid).collect();
        let total: usize = axes.iter().map(Vec::len).product();
        let stride = total.div_ceil(GRID_CAP).max(1);
        let mut out = Vec::with_capacity(total.min(GRID_CAP));
        for linear in (0..total).step_by(stride) {
            let mut rest = linear;
            let mut point = Vec::with_capacity(axes.len());
            for axis in &axes {
                point.push(axis[rest % axis.len()]);
                rest /= axis.len();
            }
            out.push(point);
        }
        out
    }
}

/// Affine drift b(x) = b + Σ x_i β_i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    pub b: Vec<f64>,
    /// beta[i] is the vector multiplying the state factor x_i.
    pub beta: Vec<Vec<f64>>,
}

impl DriftSpec {
    pub fn zero(n: usize) -> DriftSpec {
        DriftSpec {
            b: vec![0.0; n],
            beta: vec![vec![0.0; n]; n],
        }
    }

    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.b);
        for (i, beta_i) in self.beta.iter().enumerate() {
            for (o, &c) in out.iter_mut().zip(beta_i) {
                *o += x[i] * c;
            }
        }
    }
}

/// Quadratic diffusion a(x) = a + Σ x_i α_{i0} + Σ_{i≤j} x_i x_j α_{ij};
/// every stored matrix must be exactly symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionSpec {
    pub a: Vec<Vec<f64>>,
    /// alpha_lin[i] multiplies x_i.
    pub alpha_lin: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alpha_quad: Vec<QuadDiffusionTerm>,
}

/// The symmetric matrix multiplying the state product x_i x_j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadDiffusionTerm {
    pub i: usize,
    pub j: usize,
    pub matrix: Vec<Vec<f64>>,
}

impl DiffusionSpec {
    pub fn zero(n: usize) -> DiffusionSpec {
        DiffusionSpec {
            a: vec![vec![0.0; n]; n],
            alpha_lin: vec![vec![vec![0.0; n]; n]; n],
            alpha_quad: Vec::new(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.a.len();
        let mut m = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                m[(r, c)] = self.a[r][c];
            }
        }
        for (i, al) in self.alpha_lin.iter().enumerate() {
            for r in 0..n {
                for c in 0..n {
                    m[(r, c)] += x[i] * al[r][c];
                }
            }
        }
        for term in &self.alpha_quad {
            let factor = x[term.i] * x[term.j];
            for r in 0..n {
                for c in 0..n {
                    m[(r, c)] += factor * term.matrix[r][c];
                }
            }
        }
        m
    }
}

/// Differential characteristics (b, a, K) of a polynomial Markov process,
/// stated with respect to the truncation function χ(ξ)=ξ.
#[derive(Debug, Clone)]
pub struct GeneratorSpec {
    pub state: StateSpace,
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    pub jumps: Option<JumpSpec>,
}

impl GeneratorSpec {
    pub fn dim(&self) -> usize {
        self.state.dim()
    }

    /// Structural admissibility check. An empty list means the spec is
    /// usable by [`build_matrix`].
    pub fn validate(&self) -> Vec<Violation> {
        let n = self.dim();
        let mut out = Vec::new();

        for (i, c) in self.state.coords().iter().enumerate() {
            if let CoordinateDomain::Interval { lo, hi } = *c {
                if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                    out.push(Violation::EmptyInterval {
                        coordinate: i,
                        lo,
                        hi,
                    });
                }
            }
        }

        check_len(&mut out, "drift.b", n, self.drift.b.len());
        check_len(&mut out, "drift.beta", n, self.drift.beta.len());
        for (i, beta_i) in self.drift.beta.iter().enumerate() {
            check_len(&mut out, &format!("drift.beta[{i}]"), n, beta_i.len());
        }
        if !self.drift.b.iter().all(|v| v.is_finite())
            || !self.drift.beta.iter().flatten().all(|v| v.is_finite())
        {
            out.push(Violation::NonFiniteEntry {
                which: "drift".into(),
            });
        }

        check_matrix(&mut out, "diffusion.a", n, &self.diffusion.a);
        check_len(&mut out, "diffusion.alpha_lin", n, self.diffusion.alpha_lin.len());
        for (i, al) in self.diffusion.alpha_lin.iter().enumerate() {
            check_matrix(&mut out, &format!("diffusion.alpha_lin[{i}]"), n, al);
        }
        for term in &self.diffusion.alpha_quad {
            if term.i > term.j || term.j >= n {
                out.push(Violation::DimensionMismatch {
                    what: format!("diffusion.alpha_quad index ({},{})", term.i, term.j),
                    expected: n,
                    found: term.j.max(term.i),
                });
            }
            check_matrix(
                &mut out,
                &format!("diffusion.alpha_quad[{},{}]", term.i, term.j),
                n,
                &term.matrix,
            );
        }

        // Positive semidefiniteness of a(x) on the deterministic sample grid.
        if out.is_empty() {
            for point in self.state.validation_grid() {
                let a = self.diffusion.eval(&point);
                let scale = 1.0 + a.amax();
                let eig = nalgebra::SymmetricEigen::new(a);
                if let Some(min) = eig
                    .eigenvalues
                    .iter()
                    .copied()
                    .min_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"))
                {
                    if min < -1e-10 * scale {
                        out.push(Violation::NotPositiveSemidefinite {
                            point,
                            eigenvalue: min,
                        });
                    }
                }
            }
        }

        if let Some(JumpSpec::ConditionA(cond_a)) = &self.jumps {
            if let Some(t) = &cond_a.base {
                check_len(&mut out, "jumps.base", n, t.dim());
                t.violations("base", &mut out);
            }
            for (&i, t) in &cond_a.linear {
                let admissible = i < n && self.state.coord(i).contained_in_nonneg();
                if !admissible {
                    out.push(Violation::LinearJumpIndexNotAdmissible { coordinate: i });
                }
                check_len(&mut out, &format!("jumps.linear[{i}]"), n, t.dim());
                t.violations(&format!("linear[{i}]"), &mut out);
            }
            for (&(i, j), t) in &cond_a.quadratic {
                let admissible = i <= j && j < n && {
                    let (ci, cj) = (self.state.coord(i), self.state.coord(j));
                    (ci.contained_in_nonneg() && cj.contained_in_nonneg())
                        || (ci.contained_in_nonpos() && cj.contained_in_nonpos())
                };
                if !admissible {
                    out.push(Violation::QuadraticJumpIndexNotAdmissible { i, j });
                }
                check_len(&mut out, &format!("jumps.quadratic[{i},{j}]"), n, t.dim());
                t.violations(&format!("quadratic[{i},{j}]"), &mut out);
            }
        }

        out
    }
}

fn check_len(out: &mut Vec<Violation>, what: &str, expected: usize, found: usize) {
    if expected != found {
        out.push(Violation::DimensionMismatch {
            what: what.to_string(),
            expected,
            found,
        });
    }
}

fn check_matrix(out: &mut Vec<Violation>, what: &str, n: usize, m: &[Vec<f64>]) {
    if m.len() != n || m.iter().any(|row| row.len() != n) {
        out.push(Violation::DimensionMismatch {
            what: what.to_string(),
            expected: n,
            found: m.len(),
        });
        return;
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        out.push(Violation::NonFiniteEntry {
            which: what.to_string(),
        });
        return;
    }
    for r in 0..n {
        for c in (r + 1)..n {
            if m[r][c] != m[c][r] {
                out.push(Violation::AsymmetricMatrix {
                    which: what.to_string(),
                });
                return;
            }
        }
    }
}

// Matrices above this size are kept as coordinate lists.
const DENSE_LIMIT: usize = 512;

#[derive(Debug, Clone)]
enum Storage {
    Dense(DMatrix<f64>),
    Coo {
        dim: usize,
        triplets: Vec<(usize, usize, f64)>,
    },
}

/// The matrix A representing the generator on a basis, with the row
/// convention A e_i = Σ_j A_ij e_j: row i holds the coefficients of the
/// image of basis monomial i.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    basis: Arc<Basis>,
    storage: Storage,
    nnz: usize,
}

impl GeneratorMatrix {
    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Number of structurally nonzero entries.
    pub fn nnz(&self) -> usize {
        self.nnz
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(m) => m[(i, j)],
            Storage::Coo { triplets, .. } => triplets
                .iter()
                .filter(|&&(r, c, _)| r == i && c == j)
                .map(|&(_, _, v)| v)
                .sum(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Coo { dim, triplets } => {
                let mut m = DMatrix::zeros(*dim, *dim);
                for &(r, c, v) in triplets {
                    m[(r, c)] += v;
                }
                m
            }
        }
    }

    /// Wraps a dense matrix over a basis; used by tests and oracles.
    pub fn from_dense(basis: Arc<Basis>, matrix: DMatrix<f64>) -> Result<GeneratorMatrix> {
        if matrix.nrows() != basis.len() || matrix.ncols() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                found: matrix.nrows(),
            });
        }
        let nnz = matrix.iter().filter(|&&v| v != 0.0).count();
        Ok(GeneratorMatrix {
            basis,
            storage: Storage::Dense(matrix),
            nnz,
        })
    }

    /// Row i as the polynomial 𝒜(x^{k_i}).
    pub fn row_poly(&self, i: usize) -> PolyVector {
        let n = self.dim();
        let mut coeffs = vec![0.0; n];
        match &self.storage {
            Storage::Dense(m) => {
                for j in 0..n {
                    coeffs[j] = m[(i, j)];
                }
            }
            Storage::Coo { triplets, .. } => {
                for &(r, c, v) in triplets {
                    if r == i {
                        coeffs[c] += v;
                    }
                }
            }
        }
        PolyVector::new(self.basis.clone(), coeffs).expect("row has basis length")
    }
}

/// Applies the generator to every basis monomial of degree ≤ m and collects
/// the resulting coefficient rows into the matrix A.
///
/// Row i is assembled as
/// ½ Σ a_kl(x) ∂²x^{k_i}/∂x_k∂x_l + Σ b_k(x) ∂x^{k_i}/∂x_k + jump part,
/// with the jump part expanded through [`jump_taylor_terms`] against the
/// moment tables (Condition A) or delegated to the action provider
/// (Condition B). Degree preservation is checked before returning.
pub fn build_matrix(spec: &GeneratorSpec, m: u32) -> Result<GeneratorMatrix> {
    let violations = spec.validate();
    if !violations.is_empty() {
        return Err(Error::InvalidSpec(violations));
    }
    let n = spec.dim();
    let basis = enumerate_basis(n, m)?;
    let size = basis.len();

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(size);
    for k in basis.ordering() {
        let mut acc = vec![0.0; size];
        apply_drift(spec, &basis, k, &mut acc)?;
        apply_diffusion(spec, &basis, k, &mut acc)?;
        match &spec.jumps {
            None => {}
            Some(JumpSpec::ConditionA(cond_a)) => {
                apply_condition_a(cond_a, &basis, k, &mut acc)?;
            }
            Some(JumpSpec::ConditionB(cond_b)) => {
                let image = cond_b.apply(&basis, k)?;
                for (a, b) in acc.iter_mut().zip(image.coeffs()) {
                    *a += b;
                }
            }
        }
        // Degree preservation: the image of x^k must stay in Pol_{<=|k|}.
        let deg = k.degree();
        for (j, &v) in acc.iter().enumerate() {
            assert!(
                v == 0.0 || basis.at(j).degree() <= deg,
                "generator raised degree of {k}: nonzero coefficient on {}",
                basis.at(j)
            );
        }
        rows.push(acc);
    }

    let nnz = rows.iter().flatten().filter(|&&v| v != 0.0).count();
    let storage = if size <= DENSE_LIMIT {
        let mut dense = DMatrix::zeros(size, size);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                dense[(i, j)] = v;
            }
        }
        Storage::Dense(dense)
    } else {
        let triplets = rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(move |(j, &v)| (i, j, v))
            })
            .collect();
        Storage::Coo {
            dim: size,
            triplets,
        }
    };
    Ok(GeneratorMatrix {
        basis,
        storage,
        nnz,
    })
}

fn apply_drift(
    spec: &GeneratorSpec,
    basis: &Arc<Basis>,
    k: &MultiIndex,
    acc: &mut [f64],
) -> Result<()> {
    let n = spec.dim();
    for c in 0..n {
        let kc = k.entry(c);
        if kc == 0 {
            continue;
        }
        let weight = f64::from(kc);
        let base = k.drop(c).expect("entry checked nonzero");
        let bc = spec.drift.b[c];
        if bc != 0.0 {
            acc[basis.index_of(&base)?] += weight * bc;
        }
        for i in 0..n {
            let coef = spec.drift.beta[i][c];
            if coef != 0.0 {
                acc[basis.index_of(&base.bump(i))?] += weight * coef;
            }
        }
    }
    Ok(())
}

fn apply_diffusion(
    spec: &GeneratorSpec,
    basis: &Arc<Basis>,
    k: &MultiIndex,
    acc: &mut [f64],
) -> Result<()> {
    let n = spec.dim();
    for c in 0..n {
        for d in 0..n {
            // coefficient of the second derivative of x^k w.r.t. (c, d)
            let (dcoef, base) = if c == d {
                let kc = k.entry(c);
                if kc < 2 {
                    continue;
                }
                (
                    f64::from(kc) * f64::from(kc - 1),
                    k.drop(c).and_then(|b| b.drop(c)).expect("kc >= 2"),
                )
            } else {
                let (kc, kd) = (k.entry(c), k.entry(d));
                if kc == 0 || kd == 0 {
                    continue;
                }
                (
                    f64::from(kc) * f64::from(kd),
                    k.drop(c).and_then(|b| b.drop(d)).expect("entries nonzero"),
                )
            };
            let w = 0.5 * dcoef;
            let a_cd = spec.diffusion.a[c][d];
            if a_cd != 0.0 {
                acc[basis.index_of(&base)?] += w * a_cd;
            }
            for (i, al) in spec.diffusion.alpha_lin.iter().enumerate() {
                let coef = al[c][d];
                if coef != 0.0 {
                    acc[basis.index_of(&base.bump(i))?] += w * coef;
                }
            }
            for term in &spec.diffusion.alpha_quad {
                let coef = term.matrix[c][d];
                if coef != 0.0 {
                    acc[basis.index_of(&base.bump(term.i).bump(term.j))?] += w * coef;
                }
            }
        }
    }
    Ok(())
}

fn apply_condition_a(
    cond_a: &ConditionAJumps,
    basis: &Arc<Basis>,
    k: &MultiIndex,
    acc: &mut [f64],
) -> Result<()> {
    for term in jump_taylor_terms(k) {
        let weight = term.weight as f64;
        if let Some(table) = &cond_a.base {
            let v = table
                .get(&term.power)
                .ok_or(Error::MissingJumpMoment {
                    index: term.power.clone(),
                })?;
            if v != 0.0 {
                acc[basis.index_of(&term.residual)?] += weight * v;
            }
        }
        for (&i, table) in &cond_a.linear {
            let v = table
                .get(&term.power)
                .ok_or(Error::MissingJumpMoment {
                    index: term.power.clone(),
                })?;
            if v != 0.0 {
                acc[basis.index_of(&term.residual.bump(i))?] += weight * v;
            }
        }
        for (&(i, j), table) in &cond_a.quadratic {
            let v = table
                .get(&term.power)
                .ok_or(Error::MissingJumpMoment {
                    index: term.power.clone(),
                })?;
            if v != 0.0 {
                acc[basis.index_of(&term.residual.bump(i).bump(j))?] += weight * v;
            }
        }
    }
    Ok(())
}

/// Rebases a spec whose drift is stated under a different truncation
/// function χ̃ to the internal convention χ(ξ)=ξ.
///
/// `correction` holds, per state coordinate, the moment functional
/// x ↦ ∫(ξ_c − χ̃_c(ξ)) K(x,dξ) as a polynomial in x. It must be affine:
/// the constant part is added to b and the linear part to β.
pub fn convert_truncation(
    spec: &GeneratorSpec,
    correction: &[PolyVector],
) -> Result<GeneratorSpec> {
    let n = spec.dim();
    if correction.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: correction.len(),
        });
    }
    let mut out = spec.clone();
    for (c, poly) in correction.iter().enumerate() {
        if poly.basis().dim() != n {
            return Err(Error::BasisMismatch);
        }
        if poly.degree() > 1 {
            return Err(Error::InvalidParameter(format!(
                "truncation correction on coordinate {c} has degree {}; \
                 b + correction must stay affine (degree <= 1)",
                poly.degree()
            )));
        }
        for (k, &coef) in poly.basis().ordering().iter().zip(poly.coeffs()) {
            if coef == 0.0 {
                continue;
            }
            match k.degree() {
                0 => out.drift.b[c] += coef,
                1 => {
                    let i = k
                        .entries()
                        .iter()
                        .position(|&e| e == 1)
                        .expect("degree-1 index");
                    out.drift.beta[i][c] += coef;
                }
                _ => unreachable!("degree checked above"),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(entries: &[u32]) -> MultiIndex {
        MultiIndex::new(entries.to_vec())
    }

    fn cir_spec(b: f64, beta: f64, sigma: f64) -> GeneratorSpec {
        Model::Cir(CirParams { b, beta, sigma })
            .generator_spec(8)
            .unwrap()
    }

    #[test]
    fn cir_matrix_matches_display() {
        // rows: [0; ...], [b, beta, 0, 0], [0, 2b+s^2, 2beta, 0], [0, 0, 3b+3s^2, 3beta]
        let (b, beta, sigma) = (0.1, -0.5, 0.3);
        let a = build_matrix(&cir_spec(b, beta, sigma), 3).unwrap();
        let s2 = sigma * sigma;
        let expected = [
            [0.0, 0.0, 0.0, 0.0],
            [b, beta, 0.0, 0.0],
            [0.0, 2.0 * b + s2, 2.0 * beta, 0.0],
            [0.0, 0.0, 3.0 * b + 3.0 * s2, 3.0 * beta],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(a.entry(i, j), expected[i][j], "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn brownian_motion_rows() {
        let spec = Model::Bm(BmParams { b: 0.0, a: 1.0 }).generator_spec(2).unwrap();
        let a = build_matrix(&spec, 2).unwrap();
        // A x^2 = 1; all other rows zero.
        for j in 0..3 {
            assert_eq!(a.entry(0, j), 0.0);
            assert_eq!(a.entry(1, j), 0.0);
        }
        assert_eq!(a.entry(2, 0), 1.0);
        assert_eq!(a.entry(2, 1), 0.0);
        assert_eq!(a.entry(2, 2), 0.0);
    }

    #[test]
    fn jacobi_rows_match_hand_application() {
        // A x = -beta x + beta theta; A x^2 = (s^2 + 2 beta theta) x - (s^2 + 2 beta) x^2
        let (beta, theta, sigma) = (1.0, 0.5, 0.4);
        let spec = Model::Jacobi(JacobiParams {
            beta,
            theta,
            sigma,
            jump_intensity: 0.0,
        })
        .generator_spec(2)
        .unwrap();
        let a = build_matrix(&spec, 2).unwrap();
        let s2 = sigma * sigma;
        assert!((a.entry(1, 0) - beta * theta).abs() < 1e-15);
        assert!((a.entry(1, 1) + beta).abs() < 1e-15);
        assert_eq!(a.entry(1, 2), 0.0);
        assert!((a.entry(2, 1) - (s2 + 2.0 * beta * theta)).abs() < 1e-15);
        assert!((a.entry(2, 2) + (s2 + 2.0 * beta)).abs() < 1e-15);
    }

    #[test]
    fn jacobi_reflection_jump_drift() {
        // With reflection jumps the x-row drift becomes (beta theta + lambda) - (beta + 2 lambda) x.
        let (beta, theta, sigma, lambda) = (1.0, 0.5, 0.4, 0.7);
        let spec = Model::Jacobi(JacobiParams {
            beta,
            theta,
            sigma,
            jump_intensity: lambda,
        })
        .generator_spec(3)
        .unwrap();
        let a = build_matrix(&spec, 3).unwrap();
        assert!((a.entry(1, 0) - (beta * theta + lambda)).abs() < 1e-14);
        assert!((a.entry(1, 1) + (beta + 2.0 * lambda)).abs() < 1e-14);
    }

    #[test]
    fn constant_row_is_zero() {
        let spec = Model::Bates(BatesParams::default()).generator_spec(3).unwrap();
        let a = build_matrix(&spec, 3).unwrap();
        for j in 0..a.dim() {
            assert_eq!(a.entry(0, j), 0.0, "conservative generator kills constants");
        }
    }

    #[test]
    fn block_lower_triangular_in_graded_order() {
        let spec = Model::Bates(BatesParams::default()).generator_spec(4).unwrap();
        let a = build_matrix(&spec, 4).unwrap();
        let basis = a.basis().clone();
        for i in 0..a.dim() {
            for j in 0..a.dim() {
                if basis.at(j).degree() > basis.at(i).degree() {
                    assert_eq!(a.entry(i, j), 0.0, "entry ({i},{j}) breaks degree blocks");
                }
            }
        }
    }

    #[test]
    fn one_dim_affine_is_lower_triangular_with_k_beta_diagonal() {
        let a = build_matrix(&cir_spec(0.1, -0.5, 0.3), 6).unwrap();
        for i in 0..a.dim() {
            for j in (i + 1)..a.dim() {
                assert_eq!(a.entry(i, j), 0.0);
            }
            assert!((a.entry(i, i) - i as f64 * -0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn generator_is_linear_in_jump_intensity() {
        // Scaling all jump tables by lambda scales the jump contribution.
        let base = Model::Bates(BatesParams::default()).generator_spec(3).unwrap();
        let mut no_jumps = base.clone();
        no_jumps.jumps = None;
        let mut doubled = base.clone();
        if let Some(JumpSpec::ConditionA(cond)) = &mut doubled.jumps {
            for t in cond.linear.values_mut() {
                *t = t.scaled(2.0);
            }
        }
        let a0 = build_matrix(&no_jumps, 3).unwrap().to_dense();
        let a1 = build_matrix(&base, 3).unwrap().to_dense();
        let a2 = build_matrix(&doubled, 3).unwrap().to_dense();
        let jump1 = &a1 - &a0;
        let jump2 = &a2 - &a0;
        assert!((jump2 - 2.0 * jump1).amax() < 1e-12);
    }

    #[test]
    fn validate_flags_i_set_violation() {
        // A linear jump table attached to a full-line coordinate.
        let mut spec = cir_spec(0.1, -0.5, 0.3);
        spec.state = StateSpace::new(vec![CoordinateDomain::FullLine]);
        let table =
            JumpMomentTable::tabulate(1, 3, |l| Ok(if l.degree() == 2 { 0.09 } else { 0.0 }))
                .unwrap();
        let mut cond = ConditionAJumps::default();
        cond.linear.insert(0, table);
        spec.jumps = Some(JumpSpec::ConditionA(cond));
        let violations = spec.validate();
        assert_eq!(
            violations
                .iter()
                .filter(|v| matches!(v, Violation::LinearJumpIndexNotAdmissible { coordinate: 0 }))
                .count(),
            1
        );
    }

    #[test]
    fn validate_flags_indefinite_diffusion() {
        // a(x) = 1 - x^2 on the full line goes negative at |x| > 1.
        let mut spec = Model::Bm(BmParams { b: 0.0, a: 1.0 }).generator_spec(2).unwrap();
        spec.diffusion.alpha_quad = vec![QuadDiffusionTerm {
            i: 0,
            j: 0,
            matrix: vec![vec![-1.0]],
        }];
        let violations = spec.validate();
        let psd = violations
            .iter()
            .find_map(|v| match v {
                Violation::NotPositiveSemidefinite { point, eigenvalue } => {
                    Some((point.clone(), *eigenvalue))
                }
                _ => None,
            })
            .expect("psd violation reported");
        // The named point must actually witness the failure.
        let a = spec.diffusion.eval(&psd.0);
        assert!(a[(0, 0)] < 0.0);
        assert!((a[(0, 0)] - psd.1).abs() < 1e-12);
    }

    #[test]
    fn validate_catalog_models_clean() {
        for model in Model::examples() {
            let spec = model.generator_spec(4).unwrap();
            assert!(
                spec.validate().is_empty(),
                "{} fails validation",
                model.name()
            );
        }
    }

    #[test]
    fn missing_jump_moment_is_an_error() {
        let mut spec = cir_spec(0.1, -0.5, 0.3);
        let table =
            JumpMomentTable::tabulate(1, 2, |l| Ok(if l.degree() == 2 { 0.5 } else { 0.0 }))
                .unwrap();
        let mut cond = ConditionAJumps::default();
        cond.linear.insert(0, table);
        spec.jumps = Some(JumpSpec::ConditionA(cond));
        // Degree 3 needs the third moment, which the table does not cover.
        match build_matrix(&spec, 3) {
            Err(Error::MissingJumpMoment { index }) => assert_eq!(index, mi(&[3])),
            other => panic!("expected missing-moment failure, got {other:?}"),
        }
    }

    #[test]
    fn convert_truncation_identity_and_constant() {
        let spec = cir_spec(0.1, -0.5, 0.3);
        let basis = enumerate_basis(1, 1).unwrap();
        let zero = PolyVector::zero(basis.clone());
        let same = convert_truncation(&spec, &[zero]).unwrap();
        assert_eq!(same.drift, spec.drift);

        let c0 = PolyVector::from_terms(basis.clone(), &[(mi(&[0]), 0.25)]).unwrap();
        let shifted = convert_truncation(&spec, &[c0]).unwrap();
        assert!((shifted.drift.b[0] - 0.35).abs() < 1e-15);
        assert_eq!(shifted.drift.beta, spec.drift.beta);
    }

    #[test]
    fn convert_truncation_linear_part_goes_to_beta() {
        let spec = cir_spec(0.1, -0.5, 0.3);
        let basis = enumerate_basis(1, 1).unwrap();
        let lin = PolyVector::from_terms(basis, &[(mi(&[1]), 0.125)]).unwrap();
        let out = convert_truncation(&spec, &[lin]).unwrap();
        assert!((out.drift.beta[0][0] - (-0.375)).abs() < 1e-15);
    }

    #[test]
    fn convert_truncation_rejects_quadratic_correction() {
        let spec = cir_spec(0.1, -0.5, 0.3);
        let basis = enumerate_basis(1, 2).unwrap();
        let quad = PolyVector::from_terms(basis, &[(mi(&[2]), 1.0)]).unwrap();
        assert!(matches!(
            convert_truncation(&spec, &[quad]),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn validation_grid_respects_cap() {
        let space = StateSpace::new(vec![CoordinateDomain::FullLine; 8]);
        let grid = space.validation_grid();
        assert!(grid.len() <= GRID_CAP);
        assert!(!grid.is_empty());
    }
}
