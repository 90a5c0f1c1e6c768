//! Model catalog: the stock processes shipped with the library, each as a
//! validated generator spec plus the matching Euler simulation spec.
//!
//! Drifts below are stated in the internal χ(ξ)=ξ convention, so jump first
//! moments are folded into β. Simulation drifts carry the risk-neutral
//! compensators instead and add jumps raw; both faces describe the same
//! process and are cross-checked in tests.

use serde::{Deserialize, Serialize};

use super::jumps::{
    exponential_raw_moment, ConditionAJumps, ConditionBJumps, JumpLaw, JumpMomentTable, JumpSpec,
};
use super::{CoordinateDomain, DiffusionSpec, DriftSpec, GeneratorSpec, StateSpace};
use crate::error::{Error, Result};
use crate::montecarlo::{GuardRule, JumpSim, SimulationSpec};
use crate::polybasis::{binomial, MultiIndex, PolyVector};

/// Brownian motion with drift: dX = b dt + √a dW on R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmParams {
    pub b: f64,
    /// Variance rate a ≥ 0.
    pub a: f64,
}

/// Cox–Ingersoll–Ross: dX = (b + βX) dt + σ√X dW on R₊.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirParams {
    pub b: f64,
    pub beta: f64,
    pub sigma: f64,
}

/// Ornstein–Uhlenbeck: dX = −β(X−θ) dt + σ dW on R.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VasicekParams {
    pub beta: f64,
    pub theta: f64,
    pub sigma: f64,
}

/// dX = −β(X−θ) dt + σ√(X(1−X)) dW + (1−2X) dN on [0,1]; N has intensity
/// `jump_intensity` and each jump reflects the state at 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiParams {
    pub beta: f64,
    pub theta: f64,
    pub sigma: f64,
    #[serde(default)]
    pub jump_intensity: f64,
}

/// Compound-Poisson jump part of an exponential Lévy model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpLevyJumpParams {
    pub lambda: f64,
    #[serde(flatten)]
    pub law: JumpLaw,
}

/// Exponential Lévy price: X = x e^{L_t} on R₊ with rate r and diffusion a.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpLevyParams {
    pub r: f64,
    pub a: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps: Option<ExpLevyJumpParams>,
}

/// Heston: log-price X and variance V,
/// dX = (r − V/2) dt + √V dB₁, dV = (b − βV) dt + σ√V (ρ dB₁ + √(1−ρ²) dB₂).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HestonParams {
    pub r: f64,
    pub b: f64,
    pub beta: f64,
    pub sigma: f64,
    pub rho: f64,
}

/// Heston plus compound-Poisson jumps in the log price with intensity λV and
/// size law F; the x-drift carries the martingale compensator
/// −λV ∫(e^ξ−1) F(dξ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatesParams {
    pub r: f64,
    pub b: f64,
    pub beta: f64,
    pub sigma: f64,
    pub rho: f64,
    pub lambda: f64,
    pub law: JumpLaw,
}

impl Default for BatesParams {
    /// The stochastic-volatility-with-jumps configuration used across the
    /// test suite.
    fn default() -> Self {
        BatesParams {
            r: 0.03,
            b: 0.04,
            beta: 2.0,
            sigma: 0.4,
            rho: -0.7,
            lambda: 1.0,
            law: JumpLaw::Merton {
                mu: -0.1,
                sigma: 0.15,
            },
        }
    }
}

/// One jump source of the two-factor model: price jump size law for ξ₁ and
/// an exponential law (by mean) for the co-jump in the source's own
/// variance factor; the third component never jumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bates2fJumpParams {
    pub lambda: f64,
    pub law: JumpLaw,
    #[serde(default)]
    pub vol_jump_mean: f64,
}

/// Two-factor stochastic volatility with jumps: state (X, U, V),
/// dX = (r − U/2 − V/2 − λ₁Uκ₁ − λ₂Vκ₂) dt + √U dB₁ + √V dB₃ + dZ₁ + dZ₂,
/// dU = (b₁ − β₁₁U + β₁₂V) dt + σ₁√U (ρ₁ dB₁ + √(1−ρ₁²) dB₂) + co-jumps of Z₁,
/// dV = (b₂ − β₂₂V + β₂₁U) dt + σ₂√V (ρ₂ dB₃ + √(1−ρ₂²) dB₄) + co-jumps of Z₂,
/// where Z_k jumps with intensity λ₁U, λ₂V respectively.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bates2fParams {
    pub r: f64,
    pub b1: f64,
    pub b2: f64,
    pub beta11: f64,
    pub beta12: f64,
    pub beta21: f64,
    pub beta22: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho1: f64,
    pub rho2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps1: Option<Bates2fJumpParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps2: Option<Bates2fJumpParams>,
}

impl Default for Bates2fParams {
    fn default() -> Self {
        Bates2fParams {
            r: 0.03,
            b1: 0.03,
            b2: 0.02,
            beta11: 2.0,
            beta12: 0.3,
            beta21: 0.2,
            beta22: 1.5,
            sigma1: 0.3,
            sigma2: 0.25,
            rho1: -0.6,
            rho2: -0.4,
            jumps1: Some(Bates2fJumpParams {
                lambda: 0.8,
                law: JumpLaw::Merton {
                    mu: -0.08,
                    sigma: 0.12,
                },
                vol_jump_mean: 0.01,
            }),
            jumps2: Some(Bates2fJumpParams {
                lambda: 0.5,
                law: JumpLaw::Merton {
                    mu: -0.05,
                    sigma: 0.1,
                },
                vol_jump_mean: 0.02,
            }),
        }
    }
}

/// A catalog entry; serializes as {"model": name, "params": {...}}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params", rename_all = "snake_case")]
pub enum Model {
    Bm(BmParams),
    Cir(CirParams),
    Vasicek(VasicekParams),
    Jacobi(JacobiParams),
    ExpLevy(ExpLevyParams),
    Heston(HestonParams),
    Bates(BatesParams),
    Bates2f(Bates2fParams),
}

impl Model {
    pub fn name(&self) -> &'static str {
        match self {
            Model::Bm(_) => "bm",
            Model::Cir(_) => "cir",
            Model::Vasicek(_) => "vasicek",
            Model::Jacobi(_) => "jacobi",
            Model::ExpLevy(_) => "exp_levy",
            Model::Heston(_) => "heston",
            Model::Bates(_) => "bates",
            Model::Bates2f(_) => "bates2f",
        }
    }

    pub const NAMES: &'static [&'static str] = &[
        "bm", "cir", "vasicek", "jacobi", "exp_levy", "heston", "bates", "bates2f",
    ];

    fn check_params(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self {
            Model::Bm(p) => {
                if p.a < 0.0 {
                    return bad(format!("bm: variance rate a must be >= 0, got {}", p.a));
                }
            }
            Model::Cir(p) => {
                if p.sigma <= 0.0 || p.b < 0.0 {
                    return bad(format!(
                        "cir: needs sigma > 0 and b >= 0, got sigma={}, b={}",
                        p.sigma, p.b
                    ));
                }
            }
            Model::Vasicek(p) => {
                if p.sigma <= 0.0 {
                    return bad(format!("vasicek: needs sigma > 0, got {}", p.sigma));
                }
            }
            Model::Jacobi(p) => {
                if p.sigma <= 0.0 || p.beta <= 0.0 || !(0.0..=1.0).contains(&p.theta) {
                    return bad(format!(
                        "jacobi: needs sigma > 0, beta > 0, theta in [0,1], got \
                         sigma={}, beta={}, theta={}",
                        p.sigma, p.beta, p.theta
                    ));
                }
                if p.jump_intensity < 0.0 {
                    return bad(format!(
                        "jacobi: jump intensity must be >= 0, got {}",
                        p.jump_intensity
                    ));
                }
            }
            Model::ExpLevy(p) => {
                if p.a < 0.0 {
                    return bad(format!("exp_levy: needs a >= 0, got {}", p.a));
                }
                if let Some(j) = &p.jumps {
                    j.law.validate()?;
                    if j.lambda < 0.0 {
                        return bad(format!("exp_levy: lambda must be >= 0, got {}", j.lambda));
                    }
                }
            }
            Model::Heston(p) => check_sv_block("heston", p.b, p.sigma, p.rho)?,
            Model::Bates(p) => {
                check_sv_block("bates", p.b, p.sigma, p.rho)?;
                p.law.validate()?;
                if p.lambda < 0.0 {
                    return bad(format!("bates: lambda must be >= 0, got {}", p.lambda));
                }
            }
            Model::Bates2f(p) => {
                check_sv_block("bates2f factor 1", p.b1, p.sigma1, p.rho1)?;
                check_sv_block("bates2f factor 2", p.b2, p.sigma2, p.rho2)?;
                for j in [&p.jumps1, &p.jumps2].into_iter().flatten() {
                    j.law.validate()?;
                    if j.lambda < 0.0 || j.vol_jump_mean < 0.0 {
                        return bad(
                            "bates2f: jump intensity and vol jump mean must be >= 0".into(),
                        );
                    }
                }
            }
        }
        Ok(())
    }

    /// The differential characteristics of the model, with jump tables
    /// covering polynomial degree `max_degree`.
    pub fn generator_spec(&self, max_degree: u32) -> Result<GeneratorSpec> {
        self.check_params()?;
        match self {
            Model::Bm(p) => Ok(GeneratorSpec {
                state: StateSpace::new(vec![CoordinateDomain::FullLine]),
                drift: DriftSpec {
                    b: vec![p.b],
                    beta: vec![vec![0.0]],
                },
                diffusion: DiffusionSpec {
                    a: vec![vec![p.a]],
                    alpha_lin: vec![vec![vec![0.0]]],
                    alpha_quad: Vec::new(),
                },
                jumps: None,
            }),
            Model::Cir(p) => Ok(GeneratorSpec {
                state: StateSpace::new(vec![CoordinateDomain::HalfLine]),
                drift: DriftSpec {
                    b: vec![p.b],
                    beta: vec![vec![p.beta]],
                },
                diffusion: DiffusionSpec {
                    a: vec![vec![0.0]],
                    alpha_lin: vec![vec![vec![p.sigma * p.sigma]]],
                    alpha_quad: Vec::new(),
                },
                jumps: None,
            }),
            Model::Vasicek(p) => Ok(GeneratorSpec {
                state: StateSpace::new(vec![CoordinateDomain::FullLine]),
                drift: DriftSpec {
                    b: vec![p.beta * p.theta],
                    beta: vec![vec![-p.beta]],
                },
                diffusion: DiffusionSpec {
                    a: vec![vec![p.sigma * p.sigma]],
                    alpha_lin: vec![vec![vec![0.0]]],
                    alpha_quad: Vec::new(),
                },
                jumps: None,
            }),
            Model::Jacobi(p) => Ok(jacobi_generator(p)),
            Model::ExpLevy(p) => exp_levy_generator(p, max_degree),
            Model::Heston(p) => sv_generator(p.r, p.b, p.beta, p.sigma, p.rho, None, max_degree),
            Model::Bates(p) => sv_generator(
                p.r,
                p.b,
                p.beta,
                p.sigma,
                p.rho,
                Some((p.lambda, p.law)),
                max_degree,
            ),
            Model::Bates2f(p) => bates2f_generator(p, max_degree),
        }
    }

    /// The Euler simulation face of the model.
    pub fn simulation_spec(&self) -> Result<SimulationSpec> {
        self.check_params()?;
        match self {
            Model::Bm(p) => {
                let (b, vol) = (p.b, p.a.sqrt());
                Ok(SimulationSpec::new(
                    "bm",
                    1,
                    1,
                    move |_x, out: &mut [f64]| out[0] = b,
                    move |_x, out: &mut [f64]| out[0] = vol,
                    Vec::new(),
                    vec![GuardRule::None],
                ))
            }
            Model::Cir(p) => {
                let (b, beta, sigma) = (p.b, p.beta, p.sigma);
                Ok(SimulationSpec::new(
                    "cir",
                    1,
                    1,
                    move |x: &[f64], out: &mut [f64]| out[0] = b + beta * x[0],
                    move |x: &[f64], out: &mut [f64]| out[0] = sigma * x[0].max(0.0).sqrt(),
                    Vec::new(),
                    vec![GuardRule::NonNegativeEval],
                ))
            }
            Model::Vasicek(p) => {
                let (beta, theta, sigma) = (p.beta, p.theta, p.sigma);
                Ok(SimulationSpec::new(
                    "vasicek",
                    1,
                    1,
                    move |x: &[f64], out: &mut [f64]| out[0] = -beta * (x[0] - theta),
                    move |_x, out: &mut [f64]| out[0] = sigma,
                    Vec::new(),
                    vec![GuardRule::None],
                ))
            }
            Model::Jacobi(p) => {
                let (beta, theta, sigma, lambda) = (p.beta, p.theta, p.sigma, p.jump_intensity);
                let jumps = if lambda > 0.0 {
                    vec![JumpSim::new(
                        move |_x: &[f64]| lambda,
                        // Reflection at 1/2: the state jumps to 1 - x.
                        |x: &[f64], _rng: &mut _, out: &mut [f64]| out[0] = 1.0 - 2.0 * x[0],
                    )]
                } else {
                    Vec::new()
                };
                Ok(SimulationSpec::new(
                    "jacobi",
                    1,
                    1,
                    move |x: &[f64], out: &mut [f64]| out[0] = -beta * (x[0] - theta),
                    move |x: &[f64], out: &mut [f64]| {
                        out[0] = sigma * (x[0] * (1.0 - x[0])).max(0.0).sqrt()
                    },
                    jumps,
                    vec![GuardRule::ClampInterval { lo: 0.0, hi: 1.0 }],
                ))
            }
            Model::ExpLevy(p) => {
                let (r, vol) = (p.r, p.a.sqrt());
                let mut jumps = Vec::new();
                let mut comp = 0.0;
                if let Some(j) = &p.jumps {
                    comp = j.lambda * j.law.exp_compensator()?;
                    if j.lambda > 0.0 {
                        let (lambda, law) = (j.lambda, j.law);
                        jumps.push(JumpSim::new(
                            move |_x: &[f64]| lambda,
                            move |x: &[f64], rng: &mut _, out: &mut [f64]| {
                                out[0] = x[0] * (law.sample(rng).exp() - 1.0)
                            },
                        ));
                    }
                }
                Ok(SimulationSpec::new(
                    "exp_levy",
                    1,
                    1,
                    move |x: &[f64], out: &mut [f64]| out[0] = (r - comp) * x[0],
                    move |x: &[f64], out: &mut [f64]| out[0] = vol * x[0],
                    jumps,
                    vec![GuardRule::NonNegativeEval],
                ))
            }
            Model::Heston(p) => Ok(sv_simulation(
                "heston", p.r, p.b, p.beta, p.sigma, p.rho, None,
            )?),
            Model::Bates(p) => Ok(sv_simulation(
                "bates",
                p.r,
                p.b,
                p.beta,
                p.sigma,
                p.rho,
                Some((p.lambda, p.law)),
            )?),
            Model::Bates2f(p) => bates2f_simulation(p),
        }
    }

    /// One representative configuration of every catalog model.
    pub fn examples() -> Vec<Model> {
        vec![
            Model::Bm(BmParams { b: 0.1, a: 1.0 }),
            Model::Cir(CirParams {
                b: 0.1,
                beta: -0.5,
                sigma: 0.3,
            }),
            Model::Vasicek(VasicekParams {
                beta: 1.0,
                theta: 0.3,
                sigma: 0.2,
            }),
            Model::Jacobi(JacobiParams {
                beta: 1.0,
                theta: 0.5,
                sigma: 0.4,
                jump_intensity: 0.5,
            }),
            Model::ExpLevy(ExpLevyParams {
                r: 0.03,
                a: 0.04,
                jumps: Some(ExpLevyJumpParams {
                    lambda: 1.0,
                    law: JumpLaw::Merton {
                        mu: -0.1,
                        sigma: 0.15,
                    },
                }),
            }),
            Model::Heston(HestonParams {
                r: 0.03,
                b: 0.04,
                beta: 2.0,
                sigma: 0.4,
                rho: -0.7,
            }),
            Model::Bates(BatesParams::default()),
            Model::Bates2f(Bates2fParams::default()),
        ]
    }
}

fn check_sv_block(label: &str, b: f64, sigma: f64, rho: f64) -> Result<()> {
    if b < 0.0 || sigma < 0.0 || !(-1.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "{label}: needs b >= 0, sigma >= 0 and |rho| <= 1, got b={b}, sigma={sigma}, rho={rho}"
        )));
    }
    Ok(())
}

fn jacobi_generator(p: &JacobiParams) -> GeneratorSpec {
    let (beta, theta, sigma, lambda) = (p.beta, p.theta, p.sigma, p.jump_intensity);
    let s2 = sigma * sigma;
    let jumps = if lambda > 0.0 {
        // Pushforward of λδ₁ under g(x,y) = -2yx + y; for f = x^k the
        // compensated action is λ( f(1-x) - f(x) + (2x-1) f'(x) ).
        Some(JumpSpec::ConditionB(ConditionBJumps::new(
            "jacobi reflection",
            u32::MAX,
            move |basis, k| {
                if basis.dim() != 1 {
                    return Err(Error::BasisMismatch);
                }
                let deg = k.entry(0);
                let mut terms: Vec<(MultiIndex, f64)> = Vec::with_capacity(deg as usize + 3);
                // λ f(1-x) expanded binomially
                for j in 0..=deg {
                    let c = binomial(u64::from(deg), u64::from(j)).expect("small binomial") as f64;
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    terms.push((MultiIndex::new(vec![j]), lambda * c * sign));
                }
                // -λ f(x)
                terms.push((k.clone(), -lambda));
                // λ (2x - 1) f'(x) = λ k (2 x^k - x^{k-1})
                if deg > 0 {
                    let kf = f64::from(deg);
                    terms.push((k.clone(), 2.0 * lambda * kf));
                    terms.push((MultiIndex::new(vec![deg - 1]), -lambda * kf));
                }
                PolyVector::from_terms(basis.clone(), &terms)
            },
        )))
    } else {
        None
    };
    GeneratorSpec {
        state: StateSpace::new(vec![CoordinateDomain::Interval { lo: 0.0, hi: 1.0 }]),
        drift: DriftSpec {
            // χ(ξ)=ξ form: the jump compensator λ(1-2x) is folded in.
            b: vec![beta * theta + lambda],
            beta: vec![vec![-beta - 2.0 * lambda]],
        },
        diffusion: DiffusionSpec {
            a: vec![vec![0.0]],
            alpha_lin: vec![vec![vec![s2]]],
            alpha_quad: vec![super::QuadDiffusionTerm {
                i: 0,
                j: 0,
                matrix: vec![vec![-s2]],
            }],
        },
        jumps,
    }
}

fn exp_levy_generator(p: &ExpLevyParams, max_degree: u32) -> Result<GeneratorSpec> {
    let (r, a) = (p.r, p.a);
    let jumps = match &p.jumps {
        None => None,
        Some(j) => {
            // x^k ↦ J(k) x^k with J(k) = λ ∫(e^{ky} − 1 − k(e^y − 1)) F(dy);
            // requires the m-th exponential moment ∫_{|y|>1} e^{my} F(dy) < ∞.
            j.law.check_exp_moment(max_degree)?;
            let (lambda, law) = (j.lambda, j.law);
            let mgf1 = law.mgf(1.0)?;
            Some(JumpSpec::ConditionB(ConditionBJumps::new(
                "exponential levy",
                max_degree,
                move |basis, k| {
                    if basis.dim() != 1 {
                        return Err(Error::BasisMismatch);
                    }
                    let kf = f64::from(k.entry(0));
                    let jk = lambda * (law.mgf(kf)? - 1.0 - kf * (mgf1 - 1.0));
                    PolyVector::from_terms(basis.clone(), &[(k.clone(), jk)])
                },
            )))
        }
    };
    Ok(GeneratorSpec {
        state: StateSpace::new(vec![CoordinateDomain::HalfLine]),
        drift: DriftSpec {
            b: vec![0.0],
            beta: vec![vec![r]],
        },
        diffusion: DiffusionSpec {
            a: vec![vec![0.0]],
            alpha_lin: vec![vec![vec![0.0]]],
            alpha_quad: vec![super::QuadDiffusionTerm {
                i: 0,
                j: 0,
                matrix: vec![vec![a]],
            }],
        },
        jumps,
    })
}

/// Shared single-factor stochastic volatility generator (Heston and Bates).
fn sv_generator(
    r: f64,
    b: f64,
    beta: f64,
    sigma: f64,
    rho: f64,
    jump: Option<(f64, JumpLaw)>,
    max_degree: u32,
) -> Result<GeneratorSpec> {
    // Coordinate 0: log price (full line); coordinate 1: variance (half line).
    let mut x_drift_v = -0.5;
    let jumps = match jump {
        None => None,
        Some((lambda, law)) if lambda > 0.0 => {
            let kappa = law.exp_compensator()?;
            // χ(ξ)=ξ: the raw-jump compensator -λκ and the jump first moment
            // λE[ξ] both land in the v-linear part of the x drift.
            x_drift_v += -lambda * kappa + lambda * law.mean();
            let table = JumpMomentTable::tabulate(2, max_degree, |l| {
                Ok(if l.entry(1) == 0 {
                    lambda * law.raw_moment(l.entry(0))
                } else {
                    0.0
                })
            })?;
            let mut cond = ConditionAJumps::default();
            cond.linear.insert(1, table);
            Some(JumpSpec::ConditionA(cond))
        }
        Some(_) => None,
    };
    Ok(GeneratorSpec {
        state: StateSpace::new(vec![CoordinateDomain::FullLine, CoordinateDomain::HalfLine]),
        drift: DriftSpec {
            b: vec![r, b],
            beta: vec![vec![0.0, 0.0], vec![x_drift_v, -beta]],
        },
        diffusion: DiffusionSpec {
            a: vec![vec![0.0, 0.0], vec![0.0, 0.0]],
            alpha_lin: vec![
                vec![vec![0.0, 0.0], vec![0.0, 0.0]],
                vec![
                    vec![1.0, sigma * rho],
                    vec![sigma * rho, sigma * sigma],
                ],
            ],
            alpha_quad: Vec::new(),
        },
        jumps,
    })
}

fn sv_simulation(
    label: &str,
    r: f64,
    b: f64,
    beta: f64,
    sigma: f64,
    rho: f64,
    jump: Option<(f64, JumpLaw)>,
) -> Result<SimulationSpec> {
    let mut comp = 0.0;
    let mut jumps = Vec::new();
    if let Some((lambda, law)) = jump {
        comp = lambda * law.exp_compensator()?;
        if lambda > 0.0 {
            jumps.push(JumpSim::new(
                move |x: &[f64]| lambda * x[1],
                move |_x: &[f64], rng: &mut _, out: &mut [f64]| {
                    out[0] = law.sample(rng);
                    out[1] = 0.0;
                },
            ));
        }
    }
    let rho_bar = (1.0 - rho * rho).sqrt();
    Ok(SimulationSpec::new(
        label,
        2,
        2,
        move |x: &[f64], out: &mut [f64]| {
            let v = x[1];
            out[0] = r - 0.5 * v - comp * v;
            out[1] = b - beta * v;
        },
        move |x: &[f64], out: &mut [f64]| {
            let sv = x[1].max(0.0).sqrt();
            out[0] = sv;
            out[1] = 0.0;
            out[2] = sigma * rho * sv;
            out[3] = sigma * rho_bar * sv;
        },
        jumps,
        vec![GuardRule::None, GuardRule::NonNegativeEval],
    ))
}

fn bates2f_generator(p: &Bates2fParams, max_degree: u32) -> Result<GeneratorSpec> {
    let n = 3;
    let mut beta_u = vec![-0.5, -p.beta11, p.beta21];
    let mut beta_v = vec![-0.5, p.beta12, -p.beta22];
    let mut cond = ConditionAJumps::default();

    // Jump source k contributes intensity λ_k * (factor coordinate); under
    // χ(ξ)=ξ its compensator and first moments fold into that factor's β.
    let mut add_source = |factor: usize,
                          own_beta: &mut Vec<f64>,
                          params: &Bates2fJumpParams|
     -> Result<()> {
        if params.lambda == 0.0 {
            return Ok(());
        }
        let kappa = params.law.exp_compensator()?;
        own_beta[0] += -params.lambda * kappa + params.lambda * params.law.mean();
        own_beta[factor] += params.lambda * params.vol_jump_mean;
        let (lambda, law, w, own) = (params.lambda, params.law, params.vol_jump_mean, factor);
        let table = JumpMomentTable::tabulate(n, max_degree, move |l| {
            let other = if own == 1 { 2 } else { 1 };
            Ok(if l.entry(other) != 0 {
                0.0
            } else {
                lambda * law.raw_moment(l.entry(0)) * exponential_raw_moment(w, l.entry(own))
            })
        })?;
        cond.linear.insert(factor, table);
        Ok(())
    };
    if let Some(j1) = &p.jumps1 {
        add_source(1, &mut beta_u, j1)?;
    }
    if let Some(j2) = &p.jumps2 {
        add_source(2, &mut beta_v, j2)?;
    }

    let zero3 = || vec![vec![0.0; 3]; 3];
    let mut alpha_u = zero3();
    alpha_u[0][0] = 1.0;
    alpha_u[0][1] = p.sigma1 * p.rho1;
    alpha_u[1][0] = p.sigma1 * p.rho1;
    alpha_u[1][1] = p.sigma1 * p.sigma1;
    let mut alpha_v = zero3();
    alpha_v[0][0] = 1.0;
    alpha_v[0][2] = p.sigma2 * p.rho2;
    alpha_v[2][0] = p.sigma2 * p.rho2;
    alpha_v[2][2] = p.sigma2 * p.sigma2;

    Ok(GeneratorSpec {
        state: StateSpace::new(vec![
            CoordinateDomain::FullLine,
            CoordinateDomain::HalfLine,
            CoordinateDomain::HalfLine,
        ]),
        drift: DriftSpec {
            b: vec![p.r, p.b1, p.b2],
            beta: vec![vec![0.0; 3], beta_u, beta_v],
        },
        diffusion: DiffusionSpec {
            a: zero3(),
            alpha_lin: vec![zero3(), alpha_u, alpha_v],
            alpha_quad: Vec::new(),
        },
        jumps: if cond.is_empty() {
            None
        } else {
            Some(JumpSpec::ConditionA(cond))
        },
    })
}

fn bates2f_simulation(p: &Bates2fParams) -> Result<SimulationSpec> {
    let mut comp1 = 0.0;
    let mut comp2 = 0.0;
    let mut jumps = Vec::new();
    if let Some(j) = &p.jumps1 {
        comp1 = j.lambda * j.law.exp_compensator()?;
        if j.lambda > 0.0 {
            let (lambda, law, w) = (j.lambda, j.law, j.vol_jump_mean);
            jumps.push(JumpSim::new(
                move |x: &[f64]| lambda * x[1],
                move |_x: &[f64], rng: &mut rand_chacha::ChaCha8Rng, out: &mut [f64]| {
                    out[0] = law.sample(rng);
                    out[1] = if w > 0.0 {
                        w * <rand_distr::Exp1 as rand_distr::Distribution<f64>>::sample(&rand_distr::Exp1, rng)
                    } else {
                        0.0
                    };
                    out[2] = 0.0;
                },
            ));
        }
    }
    if let Some(j) = &p.jumps2 {
        comp2 = j.lambda * j.law.exp_compensator()?;
        if j.lambda > 0.0 {
            let (lambda, law, w) = (j.lambda, j.law, j.vol_jump_mean);
            jumps.push(JumpSim::new(
                move |x: &[f64]| lambda * x[2],
                move |_x: &[f64], rng: &mut rand_chacha::ChaCha8Rng, out: &mut [f64]| {
                    out[0] = law.sample(rng);
                    out[1] = 0.0;
                    out[2] = if w > 0.0 {
                        w * <rand_distr::Exp1 as rand_distr::Distribution<f64>>::sample(&rand_distr::Exp1, rng)
                    } else {
                        0.0
                    };
                },
            ));
        }
    }
    let (r, b1, b2) = (p.r, p.b1, p.b2);
    let (b11, b12, b21, b22) = (p.beta11, p.beta12, p.beta21, p.beta22);
    let (s1, s2) = (p.sigma1, p.sigma2);
    let (r1, r2) = (p.rho1, p.rho2);
    let (r1bar, r2bar) = ((1.0 - r1 * r1).sqrt(), (1.0 - r2 * r2).sqrt());
    Ok(SimulationSpec::new(
        "bates2f",
        3,
        4,
        move |x: &[f64], out: &mut [f64]| {
            let (u, v) = (x[1], x[2]);
            out[0] = r - 0.5 * u - 0.5 * v - comp1 * u - comp2 * v;
            out[1] = b1 - b11 * u + b12 * v;
            out[2] = b2 - b22 * v + b21 * u;
        },
        move |x: &[f64], out: &mut [f64]| {
            let su = x[1].max(0.0).sqrt();
            let sv = x[2].max(0.0).sqrt();
            out.fill(0.0);
            out[0] = su; // dB1 into x
            out[2] = sv; // dB3 into x
            out[4] = s1 * r1 * su; // dB1 into u
            out[5] = s1 * r1bar * su; // dB2 into u
            out[10] = s2 * r2 * sv; // dB3 into v
            out[11] = s2 * r2bar * sv; // dB4 into v
        },
        jumps,
        vec![
            GuardRule::None,
            GuardRule::NonNegativeEval,
            GuardRule::NonNegativeEval,
        ],
    ))
}
