//! Moment engine: plain, conditional and mixed moments through the
//! semigroup, time-space harmonic polynomials, GMM moment conditions and a
//! simplex-based calibration objective.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::apply_semigroup;
use crate::generator::{build_matrix, GeneratorMatrix, GeneratorSpec, Model};
use crate::polybasis::{MultiIndex, PolyVector};

/// E[(X_t^x)^k]: propagate the monomial x^k by e^{tA} and evaluate at x.
pub fn moment(spec: &GeneratorSpec, k: &MultiIndex, t: f64, x: &[f64]) -> Result<f64> {
    if !spec.state.contains(x) {
        return Err(Error::InvalidParameter(format!(
            "start point {x:?} lies outside the declared state space"
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "moment horizon must be nonnegative, got {t}"
        )));
    }
    let a = build_matrix(spec, k.degree())?;
    let f = PolyVector::monomial(a.basis().clone(), k)?;
    Ok(apply_semigroup(&a, t, &f)?.evaluate(x))
}

/// E[X_t^n X_{t+s}^m] via the tower property at degree |n|+|m|:
/// propagate x^m by s, multiply by x^n, propagate by t, evaluate at x.
pub fn mixed_moment(
    spec: &GeneratorSpec,
    n: &MultiIndex,
    m: &MultiIndex,
    t: f64,
    s: f64,
    x: &[f64],
) -> Result<f64> {
    if !(t >= 0.0) || !(s >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mixed moment horizons must be nonnegative, got t={t}, s={s}"
        )));
    }
    if !spec.state.contains(x) {
        return Err(Error::InvalidParameter(format!(
            "start point {x:?} lies outside the declared state space"
        )));
    }
    let degree = n
        .degree()
        .checked_add(m.degree())
        .ok_or(Error::DegreeOverflow {
            degree: u32::MAX,
            max: u32::MAX,
        })?;
    let a = build_matrix(spec, degree)?;
    let basis = a.basis().clone();
    let inner = apply_semigroup(&a, s, &PolyVector::monomial(basis.clone(), m)?)?;
    let outer = PolyVector::monomial(basis.clone(), n)?.multiply(&inner, &basis)?;
    Ok(apply_semigroup(&a, t, &outer)?.evaluate(x))
}

/// The time-space harmonic polynomial Q(−s, ·) = Σ_{j=0}^m (−s)^j/j! A^j f.
///
/// Requires the generator to strictly lower polynomial degree (the sum is
/// then finite); errors naming the first monomial whose image does not
/// drop in degree. Q(t−s, X_s) is a martingale, which the Monte Carlo
/// module verifies statistically.
pub fn harmonic_polynomial(
    gen: &GeneratorMatrix,
    f: &PolyVector,
    s: f64,
) -> Result<PolyVector> {
    let basis = gen.basis();
    if !basis.same_layout(f.basis()) {
        return Err(Error::BasisMismatch);
    }
    // Degree-lowering check row by row.
    for i in 0..gen.dim() {
        let source_degree = basis.at(i).degree();
        let image = gen.row_poly(i);
        let ok = if source_degree == 0 {
            image.coeffs().iter().all(|&c| c == 0.0)
        } else {
            image
                .coeffs()
                .iter()
                .enumerate()
                .all(|(j, &c)| c == 0.0 || basis.at(j).degree() < source_degree)
        };
        if !ok {
            return Err(Error::DegreeNotLowered {
                monomial: basis.at(i).clone(),
            });
        }
    }

    let m = basis.max_degree();
    let a = gen.to_dense();
    let mut term = nalgebra::RowDVector::from_row_slice(f.coeffs());
    let mut acc = term.clone();
    for j in 1..=m {
        term = (&term * &a) * (-s / f64::from(j));
        acc += &term;
    }
    PolyVector::new(basis.clone(), acc.iter().copied().collect())
}

/// One GMM moment condition E[X_t^n X_{t+s}^m] with lag s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmmCondition {
    pub n: MultiIndex,
    pub m: MultiIndex,
    pub lag: f64,
}

/// A regularly sampled multivariate series (one row per observation).
#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub rows: Vec<Vec<f64>>,
    pub dt: f64,
}

impl TimeSeries {
    pub fn new(rows: Vec<Vec<f64>>, dt: f64) -> Result<TimeSeries> {
        if !(dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sampling interval must be positive, got {dt}"
            )));
        }
        Ok(TimeSeries { rows, dt })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn monomial_value(x: &[f64], k: &MultiIndex) -> f64 {
    k.entries()
        .iter()
        .enumerate()
        .map(|(c, &p)| x[c].powi(p as i32))
        .product()
}

/// Burn-in horizon after which the semigroup has numerically reached the
/// stationary law: chosen so the slowest mean-reversion mode satisfies
/// e^{λT} < 1e-10. Errors when some drift eigenvalue has nonnegative real
/// part (no stationary regime).
pub fn stationary_horizon(spec: &GeneratorSpec) -> Result<f64> {
    let n = spec.dim();
    let mut b = DMatrix::zeros(n, n);
    for (i, beta_i) in spec.drift.beta.iter().enumerate() {
        for (r, &v) in beta_i.iter().enumerate() {
            b[(r, i)] = v;
        }
    }
    let eigs = b.complex_eigenvalues();
    let max_re = eigs.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    if max_re >= 0.0 {
        return Err(Error::NoMeanReversion(format!(
            "slowest drift eigenvalue has real part {max_re} >= 0"
        )));
    }
    Ok((1e10f64).ln() / (-max_re))
}

/// A state-space point for the stationary evaluation: the fixed point of
/// the drift, clamped into the state space.
fn stationary_point(spec: &GeneratorSpec) -> Result<Vec<f64>> {
    let n = spec.dim();
    let mut b = DMatrix::zeros(n, n);
    for (i, beta_i) in spec.drift.beta.iter().enumerate() {
        for (r, &v) in beta_i.iter().enumerate() {
            b[(r, i)] = v;
        }
    }
    let rhs = DVector::from_iterator(n, spec.drift.b.iter().map(|&v| -v));
    let mu = b
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::NoMeanReversion("drift matrix is singular".into()))?;
    Ok(spec.state.clamp(mu.as_slice()))
}

/// Sample-minus-model residuals for the conditions: the sample average of
/// X_t^n X_{t+s}^m along the series minus the model's stationary moment
/// (mixed moment after the stationary burn-in horizon).
pub fn gmm_residuals(
    conditions: &[GmmCondition],
    data: &TimeSeries,
    spec: &GeneratorSpec,
) -> Result<Vec<f64>> {
    if conditions.is_empty() {
        return Ok(Vec::new());
    }
    let t_stat = stationary_horizon(spec)?;
    let x_stat = stationary_point(spec)?;
    let mut out = Vec::with_capacity(conditions.len());
    for cond in conditions {
        let steps = cond.lag / data.dt;
        let lag = steps.round();
        if (steps - lag).abs() > 1e-9 * (1.0 + steps.abs()) || lag < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "lag {} is not an integer multiple of the sampling interval {}",
                cond.lag, data.dt
            )));
        }
        let lag = lag as usize;
        if data.len() <= lag {
            return Err(Error::SeriesTooShort {
                needed: lag + 1,
                len: data.len(),
            });
        }
        let count = data.len() - lag;
        let sample: f64 = (0..count)
            .map(|i| {
                monomial_value(&data.rows[i], &cond.n) * monomial_value(&data.rows[i + lag], &cond.m)
            })
            .sum::<f64>()
            / count as f64;
        let model = mixed_moment(spec, &cond.n, &cond.m, t_stat, cond.lag, &x_stat)?;
        out.push(sample - model);
    }
    Ok(out)
}

/// Box constraints for calibration parameters, in the model family's
/// documented parameter order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ParameterBox {
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    fn check(&self) -> Result<()> {
        if self.lo.len() != self.hi.len() {
            return Err(Error::DimensionMismatch {
                expected: self.lo.len(),
                found: self.hi.len(),
            });
        }
        for (l, h) in self.lo.iter().zip(&self.hi) {
            if !l.is_finite() || !h.is_finite() || l > h {
                return Err(Error::InvalidParameter(format!(
                    "parameter box needs finite lo <= hi, got [{l}, {h}]"
                )));
            }
        }
        Ok(())
    }

    fn midpoint(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    fn clamp(&self, x: &mut [f64]) {
        for ((v, l), h) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*l, *h);
        }
    }

    fn is_point(&self) -> bool {
        self.lo.iter().zip(&self.hi).all(|(l, h)| l == h)
    }
}

/// Builds a catalog model from a family name and its parameter vector.
///
/// Parameter orders: `bm` [b, a]; `cir` [b, beta, sigma];
/// `vasicek` [beta, theta, sigma]; `jacobi` [beta, theta, sigma].
pub fn family_model(family: &str, params: &[f64]) -> Result<Model> {
    let expect = |n: usize| -> Result<()> {
        if params.len() != n {
            Err(Error::DimensionMismatch {
                expected: n,
                found: params.len(),
            })
        } else {
            Ok(())
        }
    };
    match family {
        "bm" => {
            expect(2)?;
            Ok(Model::Bm(crate::generator::BmParams {
                b: params[0],
                a: params[1],
            }))
        }
        "cir" => {
            expect(3)?;
            Ok(Model::Cir(crate::generator::CirParams {
                b: params[0],
                beta: params[1],
                sigma: params[2],
            }))
        }
        "vasicek" => {
            expect(3)?;
            Ok(Model::Vasicek(crate::generator::VasicekParams {
                beta: params[0],
                theta: params[1],
                sigma: params[2],
            }))
        }
        "jacobi" => {
            expect(3)?;
            Ok(Model::Jacobi(crate::generator::JacobiParams {
                beta: params[0],
                theta: params[1],
                sigma: params[2],
                jump_intensity: 0.0,
            }))
        }
        other => Err(Error::InvalidParameter(format!(
            "unknown calibration family {other:?}; supported: bm, cir, vasicek, jacobi"
        ))),
    }
}

/// Calibration output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub params: Vec<f64>,
    /// gᵀg at the returned parameters (identity weighting).
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The simplex collapsed without the objective moving: some parameter
    /// is unidentified by the supplied conditions.
    pub flat_objective: bool,
}

const SIMPLEX_TOL: f64 = 1e-6;
const MAX_ITERATIONS: usize = 500;

/// Minimizes gᵀg over the parameter box by Nelder–Mead from the box
/// midpoint. Deterministic given inputs; stops when the simplex diameter
/// falls below 1e-6 or after 500 iterations.
pub fn calibrate(
    conditions: &[GmmCondition],
    data: &TimeSeries,
    parameter_box: &ParameterBox,
    family: &str,
) -> Result<CalibrationResult> {
    parameter_box.check()?;
    let degree = conditions
        .iter()
        .map(|c| c.n.degree() + c.m.degree())
        .max()
        .unwrap_or(0);

    let objective = |theta: &[f64]| -> f64 {
        let value = family_model(family, theta)
            .and_then(|m| m.generator_spec(degree))
            .and_then(|spec| gmm_residuals(conditions, data, &spec))
            .map(|g| g.iter().map(|r| r * r).sum::<f64>());
        value.unwrap_or(f64::INFINITY)
    };

    let start = parameter_box.midpoint();
    let f_start = objective(&start);
    if !f_start.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    if parameter_box.is_point() {
        return Ok(CalibrationResult {
            params: start,
            objective: f_start,
            iterations: 0,
            converged: true,
            flat_objective: false,
        });
    }

    nelder_mead(objective, start, f_start, parameter_box)
}

fn simplex_diameter(simplex: &[Vec<f64>]) -> f64 {
    let mut d = 0.0f64;
    for i in 0..simplex.len() {
        for j in (i + 1)..simplex.len() {
            let dist = simplex[i]
                .iter()
                .zip(&simplex[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d = d.max(dist);
        }
    }
    d
}

fn nelder_mead<F>(
    f: F,
    start: Vec<f64>,
    f_start: f64,
    bbox: &ParameterBox,
) -> Result<CalibrationResult>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = start.len();
    // Initial vertex offsets: 5% of the box width per coordinate.
    let mut simplex: Vec<Vec<f64>> = vec![start.clone()];
    for i in 0..dim {
        let mut v = start.clone();
        let width = bbox.hi[i] - bbox.lo[i];
        v[i] += if width > 0.0 { 0.05 * width } else { 1e-4 };
        bbox.clamp(&mut v);
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut order: Vec<usize> = (0..simplex.len()).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite or inf"));
        let ordered: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let ordered_vals: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex = ordered;
        values = ordered_vals;

        if simplex_diameter(&simplex) < SIMPLEX_TOL {
            converged = true;
            break;
        }

        let worst = simplex.len() - 1;
        let centroid: Vec<f64> = (0..dim)
            .map(|c| simplex[..worst].iter().map(|v| v[c]).sum::<f64>() / worst as f64)
            .collect();

        let project = |scale: f64| -> Vec<f64> {
            let mut v: Vec<f64> = centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + scale * (c - w))
                .collect();
            bbox.clamp(&mut v);
            v
        };

        let reflected = project(alpha);
        let f_reflected = f(&reflected);
        if f_reflected < values[0] {
            let expanded = project(gamma);
            let f_expanded = f(&expanded);
            if f_expanded < f_reflected {
                simplex[worst] = expanded;
                values[worst] = f_expanded;
            } else {
                simplex[worst] = reflected;
                values[worst] = f_reflected;
            }
        } else if f_reflected < values[worst - 1] {
            simplex[worst] = reflected;
            values[worst] = f_reflected;
        } else {
            let contracted = project(-rho);
            let f_contracted = f(&contracted);
            if f_contracted < values[worst] {
                simplex[worst] = contracted;
                values[worst] = f_contracted;
            } else {
                for i in 1..simplex.len() {
                    for c in 0..dim {
                        simplex[i][c] = simplex[0][c] + sigma * (simplex[i][c] - simplex[0][c]);
                    }
                    bbox.clamp(&mut simplex[i]);
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }

    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).expect("finite or inf"))
        .map(|(i, _)| i)
        .expect("nonempty simplex");
    // Flat objective: the simplex collapsed while the objective never moved
    // from its starting value — some parameter is unidentified.
    let spread = values.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
        - values.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let flat = converged
        && spread <= 1e-15 * (1.0 + values[best].abs())
        && (f_start - values[best]).abs() <= 1e-15 * (1.0 + f_start.abs());
    Ok(CalibrationResult {
        params: simplex[best].clone(),
        objective: values[best],
        iterations,
        converged,
        flat_objective: flat,
    })
}
