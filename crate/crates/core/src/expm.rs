//! Matrix exponential e^{tA} by scaling-and-squaring with the diagonal
//! Padé approximant of order 13, and its action on coefficient rows.
//!
//! The semigroup acts on coefficients from the left: with the row
//! convention A e_i = Σ_j A_ij e_j, the propagated polynomial P_t f has
//! coefficient row α e^{tA}. A classical RK4 integration of the backward
//! equation dα/dt = α A is included as an independent oracle.

use nalgebra::{DMatrix, RowDVector};

use crate::error::{Error, Result};
use crate::generator::GeneratorMatrix;
use crate::polybasis::PolyVector;

/// Padé(13) numerator coefficients for the exponential.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// 1-norm threshold below which the order-13 approximant is accurate to
/// machine precision without scaling.
const THETA13: f64 = 5.371_920_351_148_152;

/// Result of a matrix exponential evaluation.
#[derive(Debug, Clone)]
pub struct ExpmResult {
    pub matrix: DMatrix<f64>,
    /// Number of squarings used by the scaling step.
    pub scaling: u32,
    /// 1-norm of the scaled argument tA.
    pub norm_one: f64,
}

fn matrix_norm_one(a: &DMatrix<f64>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// e^{tA} for a dense square matrix; negative t is allowed (the semigroup
/// restricted to polynomials extends to a group).
pub fn expm_dense(a: &DMatrix<f64>, t: f64) -> Result<ExpmResult> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if !t.is_finite() || a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix exponential argument".into()));
    }
    let n = a.nrows();
    let mut b = a * t;
    let norm_one = matrix_norm_one(&b);
    if norm_one == 0.0 {
        return Ok(ExpmResult {
            matrix: DMatrix::identity(n, n),
            scaling: 0,
            norm_one,
        });
    }

    let scaling = if norm_one > THETA13 {
        (norm_one / THETA13).log2().ceil() as u32
    } else {
        0
    };
    if scaling > 0 {
        b /= 2f64.powi(scaling as i32);
    }

    let identity = DMatrix::<f64>::identity(n, n);
    let b2 = &b * &b;
    let b4 = &b2 * &b2;
    let b6 = &b2 * &b4;

    // u = B (B6 (c13 B6 + c11 B4 + c9 B2) + c7 B6 + c5 B4 + c3 B2 + c1 I)
    let w1 = PADE13[13] * &b6 + PADE13[11] * &b4 + PADE13[9] * &b2;
    let w2 = &b6 * w1 + PADE13[7] * &b6 + PADE13[5] * &b4 + PADE13[3] * &b2
        + PADE13[1] * &identity;
    let u = &b * w2;
    // v = B6 (c12 B6 + c10 B4 + c8 B2) + c6 B6 + c4 B4 + c2 B2 + c0 I
    let z1 = PADE13[12] * &b6 + PADE13[10] * &b4 + PADE13[8] * &b2;
    let v = &b6 * z1 + PADE13[6] * &b6 + PADE13[4] * &b4 + PADE13[2] * &b2
        + PADE13[0] * &identity;

    let denom = &v - &u;
    let numer = &v + &u;
    let mut r = denom
        .lu()
        .solve(&numer)
        .ok_or_else(|| Error::Numerical("matrix exponential solve is singular".into()))?;
    for _ in 0..scaling {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "matrix exponential overflowed to non-finite entries".into(),
        ));
    }
    Ok(ExpmResult {
        matrix: r,
        scaling,
        norm_one,
    })
}

/// e^{tA} of a generator matrix.
pub fn expm(a: &GeneratorMatrix, t: f64) -> Result<ExpmResult> {
    expm_dense(&a.to_dense(), t)
}

/// Coefficients of P_t f = α e^{tA} under the row convention.
pub fn apply_semigroup(a: &GeneratorMatrix, t: f64, f: &PolyVector) -> Result<PolyVector> {
    if !a.basis().same_layout(f.basis()) {
        return Err(Error::BasisMismatch);
    }
    let e = expm(a, t)?;
    let alpha = RowDVector::from_row_slice(f.coeffs());
    let row = alpha * &e.matrix;
    PolyVector::new(a.basis().clone(), row.iter().copied().collect())
}

/// Classical 4th-order Runge–Kutta integration of dα/dt = α A from α(0)=f.
///
/// Independent verification path for [`apply_semigroup`]; only used by
/// tests and diagnostics.
pub fn ode_oracle(a: &GeneratorMatrix, t: f64, f: &PolyVector, steps: usize) -> PolyVector {
    assert!(steps >= 1, "RK4 oracle needs at least one step");
    assert!(
        a.basis().same_layout(f.basis()),
        "RK4 oracle: operand bases differ"
    );
    let m = a.to_dense();
    let h = t / steps as f64;
    let mut alpha = RowDVector::from_row_slice(f.coeffs());
    for _ in 0..steps {
        let k1 = &alpha * &m;
        let k2 = (&alpha + (h / 2.0) * &k1) * &m;
        let k3 = (&alpha + (h / 2.0) * &k2) * &m;
        let k4 = (&alpha + h * &k3) * &m;
        alpha += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    PolyVector::new(a.basis().clone(), alpha.iter().copied().collect())
        .expect("row keeps basis length")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::{build_matrix, CirParams, Model};
    use crate::polybasis::{enumerate_basis, MultiIndex, PolyVector};
    use std::sync::Arc;

    fn mi(entries: &[u32]) -> MultiIndex {
        MultiIndex::new(entries.to_vec())
    }

    fn gen_from(dense: DMatrix<f64>) -> GeneratorMatrix {
        let n = dense.nrows();
        // Any basis with matching size works for pure matrix tests.
        let (dim, deg) = match n {
            2 => (1, 1),
            3 => (1, 2),
            4 => (1, 3),
            5 => (1, 4),
            6 => (1, 5),
            _ => panic!("unsupported test size {n}"),
        };
        let basis = enumerate_basis(dim, deg).unwrap();
        GeneratorMatrix::from_dense(basis, dense).unwrap()
    }

    #[test]
    fn zero_matrix_gives_exact_identity() {
        let a = gen_from(DMatrix::zeros(3, 3));
        let e = expm(&a, 2.5).unwrap();
        assert_eq!(e.matrix, DMatrix::identity(3, 3));
        let e0 = expm_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]), 0.0).unwrap();
        assert_eq!(e0.matrix, DMatrix::identity(2, 2));
    }

    #[test]
    fn nilpotent_matrix_is_exact() {
        // A = [[0,0],[1,0]], e^{tA} = I + tA
        let a = gen_from(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]));
        let e = expm(&a, 2.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 1.0]);
        assert!((e.matrix - expected).amax() < 1e-14);
    }

    #[test]
    fn non_finite_input_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, f64::NAN, 0.0, 0.0]);
        assert!(matches!(expm_dense(&a, 1.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn cir_exponential_matches_rk4_oracle() {
        let spec = Model::Cir(CirParams {
            b: 0.1,
            beta: -0.5,
            sigma: 0.3,
        })
        .generator_spec(2)
        .unwrap();
        let a = build_matrix(&spec, 2).unwrap();
        let e = expm(&a, 1.0).unwrap();
        // Compare each basis row against RK4 with many steps.
        for i in 0..a.dim() {
            let f = PolyVector::monomial(a.basis().clone(), a.basis().at(i)).unwrap();
            let ode = ode_oracle(&a, 1.0, &f, 20_000);
            for j in 0..a.dim() {
                let diff = (e.matrix[(i, j)] - ode.coeffs()[j]).abs();
                assert!(
                    diff <= 1e-9 * (1.0 + e.matrix[(i, j)].abs()),
                    "entry ({i},{j}) differs from oracle by {diff:e}"
                );
            }
        }
    }

    #[test]
    fn semigroup_preserves_constants() {
        let spec = Model::Bates(Default::default()).generator_spec(3).unwrap();
        let a = build_matrix(&spec, 3).unwrap();
        let one = PolyVector::monomial(a.basis().clone(), &mi(&[0, 0])).unwrap();
        for t in [0.0, 0.5, 2.0] {
            let pt = apply_semigroup(&a, t, &one).unwrap();
            assert!((pt.coeffs()[0] - 1.0).abs() < 1e-12);
            assert!(pt.coeffs()[1..].iter().all(|&c| c.abs() < 1e-12));
        }
    }

    #[test]
    fn brownian_square_gains_t() {
        let spec = Model::Bm(crate::generator::BmParams { b: 0.0, a: 1.0 })
            .generator_spec(2)
            .unwrap();
        let a = build_matrix(&spec, 2).unwrap();
        let x2 = PolyVector::monomial(a.basis().clone(), &mi(&[2])).unwrap();
        let t = 0.8;
        let pt = apply_semigroup(&a, t, &x2).unwrap();
        assert!((pt.coeffs()[0] - t).abs() < 1e-12);
        assert!((pt.coeffs()[2] - 1.0).abs() < 1e-12);
        assert!(pt.coeffs()[1].abs() < 1e-14);
    }

    #[test]
    fn cir_mean_matches_closed_form() {
        let (b, beta) = (0.1, -0.5);
        let spec = Model::Cir(CirParams {
            b,
            beta,
            sigma: 0.3,
        })
        .generator_spec(1)
        .unwrap();
        let a = build_matrix(&spec, 1).unwrap();
        let x = PolyVector::monomial(a.basis().clone(), &mi(&[1])).unwrap();
        let t = 0.7;
        let pt = apply_semigroup(&a, t, &x).unwrap();
        // E[X_t | X_0 = x] = x e^{beta t} + b (e^{beta t} - 1)/beta
        let ebt = (beta * t).exp();
        assert!((pt.coeffs()[1] - ebt).abs() < 1e-12);
        assert!((pt.coeffs()[0] - b * (ebt - 1.0) / beta).abs() < 1e-12);
    }

    #[test]
    fn rk4_on_zero_matrix_is_identity() {
        let a = gen_from(DMatrix::zeros(4, 4));
        let basis = a.basis().clone();
        let f = PolyVector::new(Arc::clone(&basis), vec![1.0, -2.0, 0.5, 3.0]).unwrap();
        let out = ode_oracle(&a, 1.7, &f, 10);
        assert_eq!(out.coeffs(), f.coeffs());
    }

    #[test]
    fn rk4_exact_on_nilpotent_after_one_step() {
        // Linear-in-t flow is integrated exactly by RK4.
        let a = gen_from(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]));
        let f = PolyVector::new(a.basis().clone(), vec![0.0, 1.0]).unwrap();
        let out = ode_oracle(&a, 2.0, &f, 1);
        assert_eq!(out.coeffs(), &[2.0, 1.0]);
    }

    #[test]
    fn rk4_agrees_with_expm_on_random_triangular() {
        let mut dense = DMatrix::zeros(5, 5);
        let mut state = 88172645463325252u64;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 2000) as f64 / 1000.0 - 1.0
        };
        for i in 0..5 {
            for j in 0..=i {
                dense[(i, j)] = next();
            }
        }
        let a = gen_from(dense);
        let f = PolyVector::new(a.basis().clone(), vec![0.3, -1.0, 0.7, 0.2, 1.5]).unwrap();
        let fast = apply_semigroup(&a, 1.0, &f).unwrap();
        let slow = ode_oracle(&a, 1.0, &f, 10_000);
        for (x, y) in fast.coeffs().iter().zip(slow.coeffs()) {
            assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn triangularity_is_preserved() {
        let spec = Model::Cir(CirParams {
            b: 0.1,
            beta: -0.5,
            sigma: 0.3,
        })
        .generator_spec(5)
        .unwrap();
        let a = build_matrix(&spec, 5).unwrap();
        let e = expm(&a, 1.3).unwrap();
        for i in 0..a.dim() {
            for j in (i + 1)..a.dim() {
                assert!(
                    e.matrix[(i, j)].abs() <= 1e-12,
                    "upper entry ({i},{j}) = {}",
                    e.matrix[(i, j)]
                );
            }
        }
    }

    #[test]
    fn basis_mismatch_is_rejected() {
        let spec = Model::Cir(CirParams {
            b: 0.1,
            beta: -0.5,
            sigma: 0.3,
        })
        .generator_spec(3)
        .unwrap();
        let a = build_matrix(&spec, 3).unwrap();
        let other = enumerate_basis(1, 2).unwrap();
        let f = PolyVector::zero(other);
        assert!(matches!(
            apply_semigroup(&a, 1.0, &f),
            Err(Error::BasisMismatch)
        ));
    }
}
