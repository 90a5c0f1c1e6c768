//! Jump kernels enter the generator only through monomial moments
//! ∫ ξ^l μ(dξ) (state-combination kernels) or through an action provider
//! (pushforward kernels), never through densities.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::polybasis::{Basis, MultiIndex, PolyVector};

/// Monomial moments ∫ ξ^l μ(dξ) of one Lévy measure, for 2 ≤ |l| ≤ max_degree.
///
/// Terms with |l| ≤ 1 never appear: they vanish under the compensated jump
/// expansion with truncation function χ(ξ)=ξ.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpMomentTable {
    dim: usize,
    max_degree: u32,
    moments: BTreeMap<MultiIndex, f64>,
}

impl JumpMomentTable {
    pub fn new(dim: usize, max_degree: u32) -> JumpMomentTable {
        JumpMomentTable {
            dim,
            max_degree,
            moments: BTreeMap::new(),
        }
    }

    /// Builds a complete table from a moment functional l ↦ ∫ξ^l μ(dξ).
    pub fn tabulate<F>(dim: usize, max_degree: u32, mut moment: F) -> Result<JumpMomentTable>
    where
        F: FnMut(&MultiIndex) -> Result<f64>,
    {
        let mut table = JumpMomentTable::new(dim, max_degree);
        let basis = Basis::new(dim, max_degree)?;
        for l in basis.ordering() {
            if l.degree() >= 2 {
                table.insert(l.clone(), moment(l)?)?;
            }
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn insert(&mut self, l: MultiIndex, value: f64) -> Result<()> {
        if l.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: l.dim(),
            });
        }
        if l.degree() < 2 || l.degree() > self.max_degree {
            return Err(Error::InvalidParameter(format!(
                "jump moment index {l} outside 2 <= |l| <= {}",
                self.max_degree
            )));
        }
        self.moments.insert(l, value);
        Ok(())
    }

    pub fn get(&self, l: &MultiIndex) -> Option<f64> {
        self.moments.get(l).copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.moments.iter().map(|(k, &v)| (k, v))
    }

    /// Structural checks: completeness up to the declared degree and
    /// nonnegativity of even pure moments ∫ξ_i^{2p} μ(dξ).
    pub(crate) fn violations(&self, label: &str, out: &mut Vec<Violation>) {
        let basis = match Basis::new(self.dim, self.max_degree) {
            Ok(b) => b,
            Err(_) => return,
        };
        for l in basis.ordering() {
            if l.degree() < 2 {
                continue;
            }
            match self.moments.get(l) {
                None => out.push(Violation::IncompleteJumpTable {
                    which: label.to_string(),
                    missing: l.clone(),
                }),
                Some(&v) => {
                    let pure_even = l.entries().iter().filter(|&&e| e > 0).count() == 1
                        && l.degree() % 2 == 0;
                    if pure_even && v < 0.0 {
                        out.push(Violation::NegativeEvenMoment {
                            which: label.to_string(),
                            index: l.clone(),
                            value: v,
                        });
                    }
                }
            }
        }
    }

    pub fn scaled(&self, factor: f64) -> JumpMomentTable {
        JumpMomentTable {
            dim: self.dim,
            max_degree: self.max_degree,
            moments: self
                .moments
                .iter()
                .map(|(k, v)| (k.clone(), factor * v))
                .collect(),
        }
    }
}

impl Serialize for JumpMomentTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("JumpMomentTable", 3)?;
        st.serialize_field("dim", &self.dim)?;
        st.serialize_field("max_degree", &self.max_degree)?;
        let moments: BTreeMap<String, f64> = self
            .moments
            .iter()
            .map(|(k, &v)| (k.to_string(), v))
            .collect();
        st.serialize_field("moments", &moments)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for JumpMomentTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            dim: usize,
            max_degree: u32,
            moments: BTreeMap<String, f64>,
        }
        let raw = Raw::deserialize(d)?;
        let mut table = JumpMomentTable::new(raw.dim, raw.max_degree);
        for (key, value) in raw.moments {
            let l: MultiIndex = key.parse().map_err(serde::de::Error::custom)?;
            table.insert(l, value).map_err(serde::de::Error::custom)?;
        }
        Ok(table)
    }
}

/// State-combination jump kernel
/// K(x,dξ) = μ_00(dξ) + Σ_{i∈I} x_i μ_i0(dξ) + Σ_{(i,j)∈J} x_i x_j μ_ij(dξ).
///
/// Serializes with the linear/quadratic parts as entry lists
/// [{"i": .., "table": ..}] so the document stays plain JSON.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(from = "CondARepr", into = "CondARepr")]
pub struct ConditionAJumps {
    pub base: Option<JumpMomentTable>,
    /// Keyed by the coordinate whose state factor multiplies the measure.
    pub linear: BTreeMap<usize, JumpMomentTable>,
    /// Keyed by the (i,j), i ≤ j pair multiplying the measure.
    pub quadratic: BTreeMap<(usize, usize), JumpMomentTable>,
}

#[derive(Serialize, Deserialize)]
struct LinearEntry {
    i: usize,
    table: JumpMomentTable,
}

#[derive(Serialize, Deserialize)]
struct QuadEntry {
    i: usize,
    j: usize,
    table: JumpMomentTable,
}

#[derive(Serialize, Deserialize)]
struct CondARepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    base: Option<JumpMomentTable>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    linear: Vec<LinearEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    quadratic: Vec<QuadEntry>,
}

impl From<CondARepr> for ConditionAJumps {
    fn from(repr: CondARepr) -> Self {
        ConditionAJumps {
            base: repr.base,
            linear: repr.linear.into_iter().map(|e| (e.i, e.table)).collect(),
            quadratic: repr
                .quadratic
                .into_iter()
                .map(|e| ((e.i, e.j), e.table))
                .collect(),
        }
    }
}

impl From<ConditionAJumps> for CondARepr {
    fn from(cond: ConditionAJumps) -> Self {
        CondARepr {
            base: cond.base,
            linear: cond
                .linear
                .into_iter()
                .map(|(i, table)| LinearEntry { i, table })
                .collect(),
            quadratic: cond
                .quadratic
                .into_iter()
                .map(|((i, j), table)| QuadEntry { i, j, table })
                .collect(),
        }
    }
}

impl ConditionAJumps {
    pub fn is_empty(&self) -> bool {
        self.base.is_none() && self.linear.is_empty() && self.quadratic.is_empty()
    }

    /// Smallest max_degree across all tables (the kernel's covered degree).
    pub fn covered_degree(&self) -> Option<u32> {
        self.base
            .iter()
            .map(JumpMomentTable::max_degree)
            .chain(self.linear.values().map(JumpMomentTable::max_degree))
            .chain(self.quadratic.values().map(JumpMomentTable::max_degree))
            .min()
    }
}

type ActionFn = dyn Fn(&Arc<Basis>, &MultiIndex) -> Result<PolyVector> + Send + Sync;

/// Pushforward jump kernel K(x,dξ) = g^x_*μ with g(x,y) = H(y)x + h(y),
/// supplied as the action
/// x^k ↦ ∫ ( (x+g(x,y))^k − x^k − Σ_j g_j(x,y) k_j x^{k−e_j} ) μ(dy),
/// which is again a polynomial of degree ≤ |k|.
#[derive(Clone)]
pub struct ConditionBJumps {
    action: Arc<ActionFn>,
    max_degree: u32,
    label: String,
}

impl ConditionBJumps {
    pub fn new<F>(label: impl Into<String>, max_degree: u32, action: F) -> ConditionBJumps
    where
        F: Fn(&Arc<Basis>, &MultiIndex) -> Result<PolyVector> + Send + Sync + 'static,
    {
        ConditionBJumps {
            action: Arc::new(action),
            max_degree,
            label: label.into(),
        }
    }

    /// Highest monomial degree the action is defined for.
    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn apply(&self, basis: &Arc<Basis>, k: &MultiIndex) -> Result<PolyVector> {
        if k.degree() > self.max_degree {
            return Err(Error::DegreeOverflow {
                degree: k.degree(),
                max: self.max_degree,
            });
        }
        let image = (self.action)(basis, k)?;
        if image.degree() > k.degree() {
            return Err(Error::Numerical(format!(
                "jump action {} raised the degree of {k}: {} > {}",
                self.label,
                image.degree(),
                k.degree()
            )));
        }
        Ok(image)
    }
}

impl fmt::Debug for ConditionBJumps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConditionBJumps")
            .field("label", &self.label)
            .field("max_degree", &self.max_degree)
            .finish()
    }
}

/// Jump part of a generator specification.
#[derive(Debug, Clone)]
pub enum JumpSpec {
    ConditionA(ConditionAJumps),
    ConditionB(ConditionBJumps),
}

/// One-dimensional jump size distributions with closed-form moments.
///
/// `Merton` is a normal law N(mu, sigma²); `Kou` an asymmetric double
/// exponential with upward rate `eta_plus`, downward rate `eta_minus` and
/// upward probability `p`. Intensities are kept separate: these are the
/// normalized size laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum JumpLaw {
    Merton { mu: f64, sigma: f64 },
    Kou { p: f64, eta_plus: f64, eta_minus: f64 },
}

impl JumpLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            JumpLaw::Merton { mu, sigma } => {
                if !mu.is_finite() || !sigma.is_finite() || sigma < 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "merton law needs finite mu and sigma >= 0, got mu={mu}, sigma={sigma}"
                    )));
                }
            }
            JumpLaw::Kou {
                p,
                eta_plus,
                eta_minus,
            } => {
                if !(0.0..=1.0).contains(&p) || eta_plus <= 0.0 || eta_minus <= 0.0 {
                    return Err(Error::InvalidParameter(format!(
                        "kou law needs p in [0,1] and positive rates, got p={p}, eta_plus={eta_plus}, eta_minus={eta_minus}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Raw moment E[ξ^k] of the jump size.
    pub fn raw_moment(&self, k: u32) -> f64 {
        match *self {
            JumpLaw::Merton { mu, sigma } => {
                // m_k = mu m_{k-1} + (k-1) sigma^2 m_{k-2}
                let var = sigma * sigma;
                let (mut prev, mut cur) = (1.0, mu);
                if k == 0 {
                    return 1.0;
                }
                for j in 2..=k {
                    let next = mu * cur + f64::from(j - 1) * var * prev;
                    prev = cur;
                    cur = next;
                }
                cur
            }
            JumpLaw::Kou {
                p,
                eta_plus,
                eta_minus,
            } => {
                let fact: f64 = (1..=k).map(f64::from).product();
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                p * fact / eta_plus.powi(k as i32)
                    + (1.0 - p) * sign * fact / eta_minus.powi(k as i32)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.raw_moment(1)
    }

    /// Moment generating function E[e^{uξ}]; errors where it diverges.
    pub fn mgf(&self, u: f64) -> Result<f64> {
        match *self {
            JumpLaw::Merton { mu, sigma } => Ok((mu * u + 0.5 * sigma * sigma * u * u).exp()),
            JumpLaw::Kou {
                p,
                eta_plus,
                eta_minus,
            } => {
                if u >= eta_plus || u <= -eta_minus {
                    return Err(Error::InvalidParameter(format!(
                        "kou mgf undefined at u={u}: requires -eta_minus < u < eta_plus \
                         (eta_plus={eta_plus}, eta_minus={eta_minus})"
                    )));
                }
                Ok(p * eta_plus / (eta_plus - u) + (1.0 - p) * eta_minus / (eta_minus + u))
            }
        }
    }

    /// The exponential compensator ∫(e^ξ − 1) dF = MGF(1) − 1.
    pub fn exp_compensator(&self) -> Result<f64> {
        Ok(self.mgf(1.0)? - 1.0)
    }

    /// Checks the m-th exponential moment condition
    /// ∫_{|y|>1} e^{my} μ(dy) < ∞ required by exponential price models.
    pub fn check_exp_moment(&self, m: u32) -> Result<()> {
        match *self {
            JumpLaw::Merton { .. } => Ok(()),
            JumpLaw::Kou { eta_plus, .. } => {
                if f64::from(m) >= eta_plus {
                    Err(Error::InvalidParameter(format!(
                        "exponential moment condition violated: \
                         int_{{|y|>1}} e^{{{m}y}} mu(dy) diverges for kou tail eta_plus={eta_plus} <= m={m}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> f64 {
        use rand_distr::Distribution;
        match *self {
            JumpLaw::Merton { mu, sigma } => {
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                mu + sigma * z
            }
            JumpLaw::Kou {
                p,
                eta_plus,
                eta_minus,
            } => {
                let u: f64 = rng.random();
                let e: f64 = rand_distr::Exp1.sample(rng);
                if u < p {
                    e / eta_plus
                } else {
                    -e / eta_minus
                }
            }
        }
    }
}

/// E[Y^k] for Y exponential with the given mean (point mass at 0 if mean = 0).
pub fn exponential_raw_moment(mean: f64, k: u32) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if mean == 0.0 {
        return 0.0;
    }
    let fact: f64 = (1..=k).map(f64::from).product();
    fact * mean.powi(k as i32)
}
