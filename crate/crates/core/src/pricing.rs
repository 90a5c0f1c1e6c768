//! Exact pricing of polynomial claims by one matrix exponential, their
//! sensitivities via polynomial differentiation, and least-squares fits of
//! real payoffs used as control variates.
//!
//! Prices live under the supplied measure with no discounting layer; any
//! discount factor is the caller's responsibility.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::apply_semigroup;
use crate::generator::{build_matrix, GeneratorSpec};
use crate::polybasis::{Basis, PolyVector};

/// Per-coordinate transform from the process state to the observed market
/// value: the identity, or S = base·e^x for log-price coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordMap {
    Identity,
    Exp { base: f64 },
}

/// Diagonal invertible map S = G(X) between state and market coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MarketMap {
    coords: Vec<CoordMap>,
}

impl MarketMap {
    pub fn new(coords: Vec<CoordMap>) -> Result<MarketMap> {
        for (i, c) in coords.iter().enumerate() {
            if let CoordMap::Exp { base } = c {
                if !(*base > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "exponential map on coordinate {i} needs base > 0, got {base}"
                    )));
                }
            }
        }
        Ok(MarketMap { coords })
    }

    pub fn identity(n: usize) -> MarketMap {
        MarketMap {
            coords: vec![CoordMap::Identity; n],
        }
    }

    /// Exponential on coordinate 0 with the given base level, identity on
    /// the remaining coordinates (the usual log-price layout).
    pub fn log_price(n: usize, base: f64) -> Result<MarketMap> {
        let mut coords = vec![CoordMap::Identity; n];
        coords[0] = CoordMap::Exp { base };
        MarketMap::new(coords)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[CoordMap] {
        &self.coords
    }

    /// S = G(x).
    pub fn to_market(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.coords)
            .map(|(&xi, c)| match c {
                CoordMap::Identity => xi,
                CoordMap::Exp { base } => base * xi.exp(),
            })
            .collect()
    }

    /// x = G⁻¹(s); errors when s is outside the image.
    pub fn to_state(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coords.len(),
                found: s.len(),
            });
        }
        s.iter()
            .zip(&self.coords)
            .enumerate()
            .map(|(i, (&si, c))| match c {
                CoordMap::Identity => Ok(si),
                CoordMap::Exp { base } => {
                    if si > 0.0 {
                        Ok((si / base).ln())
                    } else {
                        Err(Error::OutsideMarketMap {
                            coordinate: i,
                            value: si,
                        })
                    }
                }
            })
            .collect()
    }

    /// Diagonal of the Jacobian of G⁻¹ at s.
    pub fn inverse_jacobian(&self, s: &[f64]) -> Result<Vec<f64>> {
        if s.len() != self.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coords.len(),
                found: s.len(),
            });
        }
        s.iter()
            .zip(&self.coords)
            .enumerate()
            .map(|(i, (&si, c))| match c {
                CoordMap::Identity => Ok(1.0),
                CoordMap::Exp { .. } => {
                    if si > 0.0 {
                        Ok(1.0 / si)
                    } else {
                        Err(Error::OutsideMarketMap {
                            coordinate: i,
                            value: si,
                        })
                    }
                }
            })
            .collect()
    }
}

/// European payoff φ(S) applied to the market value of the first coordinate
/// (calls, puts, powers) or a polynomial directly in the state.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayoffKind {
    Call { strike: f64 },
    Put { strike: f64 },
    Power { exponent: f64 },
    /// Coefficients over the univariate monomials 1, s, s², ... of S₁.
    PolyInPrice { coeffs: Vec<f64> },
}

impl PayoffKind {
    /// φ(S) for a market-value vector S.
    pub fn value(&self, s: &[f64]) -> f64 {
        let s0 = s[0];
        match self {
            PayoffKind::Call { strike } => (s0 - strike).max(0.0),
            PayoffKind::Put { strike } => (strike - s0).max(0.0),
            PayoffKind::Power { exponent } => s0.powf(*exponent),
            PayoffKind::PolyInPrice { coeffs } => {
                let mut acc = 0.0;
                for &c in coeffs.iter().rev() {
                    acc = acc * s0 + c;
                }
                acc
            }
        }
    }
}

/// A claim F = f∘G⁻¹(S_T): polynomial f over the model basis, maturity T.
#[derive(Debug, Clone)]
pub struct PolyClaim {
    pub f: PolyVector,
    pub maturity: f64,
}

impl PolyClaim {
    pub fn new(f: PolyVector, maturity: f64) -> Result<PolyClaim> {
        if !(maturity >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "maturity must be nonnegative, got {maturity}"
            )));
        }
        Ok(PolyClaim { f, maturity })
    }
}

fn propagated(spec: &GeneratorSpec, claim: &PolyClaim, t: f64) -> Result<PolyVector> {
    if !(t >= 0.0) || t > claim.maturity {
        return Err(Error::InvalidParameter(format!(
            "valuation time {t} must lie in [0, T={}]",
            claim.maturity
        )));
    }
    let a = build_matrix(spec, claim.f.basis().max_degree())?;
    apply_semigroup(&a, claim.maturity - t, &claim.f)
}

/// Exact price p_t = (P_{T−t} f)(G⁻¹(S_t)) of a polynomial claim.
pub fn price(
    spec: &GeneratorSpec,
    map: &MarketMap,
    claim: &PolyClaim,
    t: f64,
    s_t: &[f64],
) -> Result<f64> {
    let x = map.to_state(s_t)?;
    if !spec.state.contains(&x) {
        return Err(Error::InvalidParameter(format!(
            "mapped state {x:?} lies outside the declared state space"
        )));
    }
    Ok(propagated(spec, claim, t)?.evaluate(&x))
}

/// Price gradient with respect to the observed market values:
/// ∇(P_{T−t} f)(G⁻¹(S_t)) chained with the diagonal Jacobian of G⁻¹.
pub fn greeks(
    spec: &GeneratorSpec,
    map: &MarketMap,
    claim: &PolyClaim,
    t: f64,
    s_t: &[f64],
) -> Result<Vec<f64>> {
    let x = map.to_state(s_t)?;
    let jac = map.inverse_jacobian(s_t)?;
    let p = propagated(spec, claim, t)?;
    Ok((0..spec.dim())
        .map(|axis| p.differentiate(axis).evaluate(&x) * jac[axis])
        .collect())
}

/// Weighted least-squares diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub weighted_rmse: f64,
    pub max_abs_residual: f64,
    /// σ_max/σ_min of the weighted design.
    pub condition: f64,
    /// Set when the Tikhonov fallback was used.
    pub ridge: bool,
}

// Condition estimate above which the fit falls back to ridge regression.
const RIDGE_CONDITION: f64 = 1e12;

/// Fits f ∈ Pol over `basis` to φ∘G on weighted state samples by least
/// squares, minimizing Σ w_i (f(x_i) − φ(G(x_i)))².
///
/// Solved through the SVD of the weighted design; if the condition estimate
/// exceeds 1e12 the normal equations are re-solved with a Tikhonov term
/// 1e-10·σ_max² and the diagnostics flag it.
pub fn fit_payoff<F>(
    payoff: F,
    map: &MarketMap,
    basis: &Arc<Basis>,
    points: &[Vec<f64>],
    weights: &[f64],
) -> Result<(PolyVector, FitDiagnostics)>
where
    F: Fn(&[f64]) -> f64,
{
    let n = basis.len();
    if points.len() != weights.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            found: weights.len(),
        });
    }
    if points.len() < n {
        return Err(Error::InvalidParameter(format!(
            "least squares needs at least {n} sample points, got {}",
            points.len()
        )));
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidParameter(
            "sample weights must be finite and nonnegative".into(),
        ));
    }

    let rows = points.len();
    let mut design = DMatrix::zeros(rows, n);
    let mut rhs = DVector::zeros(rows);
    let mut targets = Vec::with_capacity(rows);
    for (i, x) in points.iter().enumerate() {
        if x.len() != basis.dim() {
            return Err(Error::DimensionMismatch {
                expected: basis.dim(),
                found: x.len(),
            });
        }
        let sw = weights[i].sqrt();
        let y = payoff(&map.to_market(x));
        targets.push(y);
        rhs[i] = sw * y;
        for (j, k) in basis.ordering().iter().enumerate() {
            let phi: f64 = k
                .entries()
                .iter()
                .enumerate()
                .map(|(c, &p)| x[c].powi(p as i32))
                .product();
            design[(i, j)] = sw * phi;
        }
    }

    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax <= 0.0 {
        return Err(Error::RankDeficient {
            condition: f64::INFINITY,
        });
    }
    let condition = smax / smin.max(f64::MIN_POSITIVE);
    let (coeffs, ridge) = if condition <= RIDGE_CONDITION {
        let sol = svd
            .solve(&rhs, smax * 1e-15)
            .map_err(|e| Error::Numerical(format!("least-squares solve: {e}")))?;
        (sol.iter().copied().collect::<Vec<f64>>(), false)
    } else {
        // Tikhonov fallback on the normal equations.
        let tau = 1e-10 * smax * smax;
        let gram = design.transpose() * &design + tau * DMatrix::identity(n, n);
        let atb = design.transpose() * &rhs;
        let sol = gram
            .lu()
            .solve(&atb)
            .ok_or(Error::RankDeficient { condition })?;
        (sol.iter().copied().collect::<Vec<f64>>(), true)
    };
    if coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::RankDeficient { condition });
    }

    let fit = PolyVector::new(basis.clone(), coeffs)?;
    let mut sq = 0.0;
    let mut wsum = 0.0;
    let mut max_abs = 0.0f64;
    for (i, x) in points.iter().enumerate() {
        let r = fit.evaluate(x) - targets[i];
        sq += weights[i] * r * r;
        wsum += weights[i];
        max_abs = max_abs.max(r.abs());
    }
    let diagnostics = FitDiagnostics {
        weighted_rmse: if wsum > 0.0 { (sq / wsum).sqrt() } else { 0.0 },
        max_abs_residual: max_abs,
        condition,
        ridge,
    };
    Ok((fit, diagnostics))
}
