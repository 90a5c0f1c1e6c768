//! Euler–Maruyama simulation with compound-Poisson jumps, plain and
//! control-variate estimators, and statistical martingale checks.
//!
//! Path generation is embarrassingly parallel: path i draws from a
//! counter-based substream keyed by (seed, i), so terminals are
//! bit-identical for any worker count.

pub mod rng;

use std::sync::Arc;

use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expm::apply_semigroup;
use crate::generator::GeneratorMatrix;
use crate::polybasis::PolyVector;
use crate::pricing::MarketMap;

type DriftFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type DiffusionFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;
type IntensityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type JumpSampleFn = dyn Fn(&[f64], &mut ChaCha8Rng, &mut [f64]) + Send + Sync;

/// One compound-Poisson jump source: a state-dependent intensity and a
/// sampler writing the state increment for a single jump.
#[derive(Clone)]
pub struct JumpSim {
    intensity: Arc<IntensityFn>,
    sample: Arc<JumpSampleFn>,
}

impl JumpSim {
    pub fn new<I, S>(intensity: I, sample: S) -> JumpSim
    where
        I: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        S: Fn(&[f64], &mut ChaCha8Rng, &mut [f64]) + Send + Sync + 'static,
    {
        JumpSim {
            intensity: Arc::new(intensity),
            sample: Arc::new(sample),
        }
    }
}

/// Per-coordinate discretization guard.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GuardRule {
    None,
    /// Full truncation: drift/diffusion/intensity are evaluated at max(x, 0);
    /// the state itself is left untouched.
    NonNegativeEval,
    /// The state is clamped into [lo, hi] after every step.
    ClampInterval { lo: f64, hi: f64 },
}

/// Simulation face of a model: coefficient functions for the Euler scheme.
///
/// `diffusion` writes the n×d factor σ(x) (row-major) with σσᵀ = a(x);
/// jump compensators are part of `drift` exactly as the model's
/// risk-neutral dynamics specify, and jumps are added raw.
#[derive(Clone)]
pub struct SimulationSpec {
    dim: usize,
    brownian_dim: usize,
    drift: Arc<DriftFn>,
    diffusion: Arc<DiffusionFn>,
    jumps: Vec<JumpSim>,
    guards: Vec<GuardRule>,
    label: String,
}

impl SimulationSpec {
    pub fn new<B, S>(
        label: impl Into<String>,
        dim: usize,
        brownian_dim: usize,
        drift: B,
        diffusion: S,
        jumps: Vec<JumpSim>,
        guards: Vec<GuardRule>,
    ) -> SimulationSpec
    where
        B: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        S: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        assert_eq!(guards.len(), dim, "one guard rule per coordinate");
        SimulationSpec {
            dim,
            brownian_dim,
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            jumps,
            guards,
            label: label.into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Evaluates the drift at a point (guards applied), for consistency tests.
    pub fn drift_at(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        (self.drift)(x, &mut out);
        out
    }

    /// Evaluates σ(x)σ(x)ᵀ at a point, for consistency tests against a(x).
    pub fn diffusion_squared_at(&self, x: &[f64]) -> DMatrix<f64> {
        let mut flat = vec![0.0; self.dim * self.brownian_dim];
        (self.diffusion)(x, &mut flat);
        let sigma = DMatrix::from_row_slice(self.dim, self.brownian_dim, &flat);
        &sigma * sigma.transpose()
    }
}

/// Monte Carlo run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Number of paths L.
    pub paths: usize,
    /// Euler steps per unit of time.
    pub steps_per_unit: usize,
    pub seed: u64,
    /// Worker threads; 0 uses the ambient rayon pool.
    pub workers: usize,
}

impl McConfig {
    pub fn new(paths: usize, steps_per_unit: usize, seed: u64) -> McConfig {
        McConfig {
            paths,
            steps_per_unit,
            seed,
            workers: 0,
        }
    }

    fn check(&self) -> Result<()> {
        if self.paths == 0 || self.steps_per_unit == 0 {
            return Err(Error::InvalidParameter(
                "path count and steps per unit time must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Terminal (or checkpoint) states of a batch of paths, one row per path.
#[derive(Debug, Clone)]
pub struct TerminalSet {
    pub states: DMatrix<f64>,
    /// Steps on which a guard modified the state or its evaluation point.
    pub clamp_events: u64,
    pub seed: u64,
}

impl TerminalSet {
    pub fn paths(&self) -> usize {
        self.states.nrows()
    }

    pub fn state(&self, path: usize) -> Vec<f64> {
        self.states.row(path).iter().copied().collect()
    }
}

/// Monte Carlo estimate with its sampling error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    /// sqrt(sample variance / paths).
    pub std_error: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub paths: usize,
    pub seed: u64,
    /// Plain-to-CV variance ratio; only set on control-variate estimates.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub variance_ratio: Option<f64>,
}

fn summarize(values: &[f64], seed: u64) -> Estimate {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n as f64 - 1.0)
    } else {
        0.0
    };
    Estimate {
        mean,
        std_error: (variance / n as f64).sqrt(),
        variance,
        paths: n,
        seed,
        variance_ratio: None,
    }
}

struct PathOutput {
    snapshots: Vec<Vec<f64>>,
    clamps: u64,
}

fn guard_eval(x: &[f64], guards: &[GuardRule], out: &mut Vec<f64>) -> bool {
    out.clear();
    out.extend_from_slice(x);
    let mut touched = false;
    for (v, g) in out.iter_mut().zip(guards) {
        match *g {
            GuardRule::None => {}
            GuardRule::NonNegativeEval => {
                if *v < 0.0 {
                    *v = 0.0;
                    touched = true;
                }
            }
            GuardRule::ClampInterval { lo, hi } => {
                let c = v.clamp(lo, hi);
                if c != *v {
                    *v = c;
                    touched = true;
                }
            }
        }
    }
    touched
}

/// Runs one path through the sorted positive snapshot times.
fn euler_path(
    sim: &SimulationSpec,
    x0: &[f64],
    times: &[f64],
    steps_per_unit: usize,
    rng: &mut ChaCha8Rng,
) -> PathOutput {
    let n = sim.dim;
    let bd = sim.brownian_dim;
    let mut x = x0.to_vec();
    let mut xg: Vec<f64> = Vec::with_capacity(n);
    let mut drift_buf = vec![0.0; n];
    let mut sigma_buf = vec![0.0; n * bd];
    let mut jump_buf = vec![0.0; n];
    let mut z = vec![0.0; bd];
    let mut clamps = 0u64;
    let mut snapshots = Vec::with_capacity(times.len());
    let mut t = 0.0;

    for &target in times {
        let duration = target - t;
        debug_assert!(duration >= 0.0, "snapshot times must be sorted");
        let steps = ((duration * steps_per_unit as f64).ceil() as usize).max(1);
        let dt = duration / steps as f64;
        let sqrt_dt = dt.sqrt();
        for _ in 0..steps {
            if guard_eval(&x, &sim.guards, &mut xg) {
                clamps += 1;
            }
            (sim.drift)(&xg, &mut drift_buf);
            (sim.diffusion)(&xg, &mut sigma_buf);
            for zi in z.iter_mut() {
                *zi = rand_distr::StandardNormal.sample(rng);
            }
            for c in 0..n {
                let diffusion: f64 = (0..bd).map(|b| sigma_buf[c * bd + b] * z[b]).sum();
                x[c] += drift_buf[c] * dt + diffusion * sqrt_dt;
            }
            for jump in &sim.jumps {
                let mean = (jump.intensity)(&xg) * dt;
                if mean > 0.0 {
                    let count = rand_distr::Poisson::new(mean)
                        .expect("positive jump mean")
                        .sample(rng) as u64;
                    for _ in 0..count {
                        (jump.sample)(&x, rng, &mut jump_buf);
                        for (xc, j) in x.iter_mut().zip(&jump_buf) {
                            *xc += j;
                        }
                    }
                }
            }
            // Interval coordinates are clamped after every step.
            for (c, g) in sim.guards.iter().enumerate() {
                if let GuardRule::ClampInterval { lo, hi } = *g {
                    let clamped = x[c].clamp(lo, hi);
                    if clamped != x[c] {
                        x[c] = clamped;
                        clamps += 1;
                    }
                }
            }
        }
        t = target;
        snapshots.push(x.clone());
    }
    PathOutput { snapshots, clamps }
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numerical(format!("worker pool: {e}")))?;
    Ok(pool.install(job))
}

fn simulate_snapshots(
    sim: &SimulationSpec,
    x0: &[f64],
    times: &[f64],
    cfg: &McConfig,
) -> Result<Vec<TerminalSet>> {
    cfg.check()?;
    if x0.len() != sim.dim {
        return Err(Error::DimensionMismatch {
            expected: sim.dim,
            found: x0.len(),
        });
    }
    if times.is_empty() || times.windows(2).any(|w| w[0] > w[1]) || times[0] < 0.0 {
        return Err(Error::InvalidParameter(
            "snapshot times must be nonnegative and sorted".into(),
        ));
    }
    if !times.iter().all(|t| t.is_finite()) {
        return Err(Error::NonFinite("snapshot times".into()));
    }

    let outputs: Vec<PathOutput> = with_pool(cfg.workers, || {
        (0..cfg.paths)
            .into_par_iter()
            .map(|i| {
                let mut path_rng = rng::substream(cfg.seed, i as u64);
                euler_path(sim, x0, times, cfg.steps_per_unit, &mut path_rng)
            })
            .collect()
    })?;

    let clamp_events: u64 = outputs.iter().map(|o| o.clamps).sum();
    let sets = (0..times.len())
        .map(|snap| {
            let mut states = DMatrix::zeros(cfg.paths, sim.dim);
            for (i, out) in outputs.iter().enumerate() {
                for (c, &v) in out.snapshots[snap].iter().enumerate() {
                    states[(i, c)] = v;
                }
            }
            TerminalSet {
                states,
                clamp_events,
                seed: cfg.seed,
            }
        })
        .collect();
    Ok(sets)
}

/// Simulates L terminal states at horizon `t`.
///
/// Per step, the jump count is Poisson with the intensity frozen at the
/// step's start state; sizes are drawn from the sampler against the live
/// state. Deterministic given (seed, paths, steps): each path uses the
/// substream keyed by (seed, path index).
pub fn simulate_terminal(
    sim: &SimulationSpec,
    x0: &[f64],
    t: f64,
    cfg: &McConfig,
) -> Result<TerminalSet> {
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "horizon must be positive, got {t}"
        )));
    }
    Ok(simulate_snapshots(sim, x0, &[t], cfg)?.pop().expect("one snapshot"))
}

/// Simulates all paths once, returning the states at every checkpoint.
pub fn simulate_checkpoints(
    sim: &SimulationSpec,
    x0: &[f64],
    checkpoints: &[f64],
    cfg: &McConfig,
) -> Result<Vec<TerminalSet>> {
    simulate_snapshots(sim, x0, checkpoints, cfg)
}

/// Simulates a single path sampled every `dt`, returning `points` rows
/// starting with x0. Used to generate calibration series.
pub fn simulate_series(
    sim: &SimulationSpec,
    x0: &[f64],
    points: usize,
    dt: f64,
    steps_per_unit: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if points == 0 || !(dt > 0.0) {
        return Err(Error::InvalidParameter(
            "series needs at least one point and dt > 0".into(),
        ));
    }
    let times: Vec<f64> = (1..points).map(|i| i as f64 * dt).collect();
    let mut series = vec![x0.to_vec()];
    if times.is_empty() {
        return Ok(series);
    }
    let mut path_rng = rng::substream(seed, 0);
    let out = euler_path(sim, x0, &times, steps_per_unit, &mut path_rng);
    series.extend(out.snapshots);
    Ok(series)
}

/// Sample mean/variance of φ(G(X_T)) over the terminal states.
pub fn estimate_plain<F>(payoff: F, map: &MarketMap, terminals: &TerminalSet) -> Estimate
where
    F: Fn(&[f64]) -> f64,
{
    let values: Vec<f64> = (0..terminals.paths())
        .map(|i| {
            let x = terminals.state(i);
            payoff(&map.to_market(&x))
        })
        .collect();
    summarize(&values, terminals.seed)
}

/// Plain and control-variate estimates over the same terminals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvEstimate {
    pub plain: Estimate,
    pub cv: Estimate,
}

/// The control-variate estimator
/// (1/L) Σ ( φ(G(X_i)) − (f(X_i) − E[f(X_T)]) ), where `exact_mean` is the
/// exactly priced E[f(X_T)]. Unbiased for any control polynomial f.
pub fn estimate_cv<F>(
    payoff: F,
    map: &MarketMap,
    control: &PolyVector,
    exact_mean: f64,
    terminals: &TerminalSet,
) -> Result<CvEstimate>
where
    F: Fn(&[f64]) -> f64,
{
    if control.basis().dim() != terminals.states.ncols() {
        return Err(Error::DimensionMismatch {
            expected: terminals.states.ncols(),
            found: control.basis().dim(),
        });
    }
    let mut plain_values = Vec::with_capacity(terminals.paths());
    let mut cv_values = Vec::with_capacity(terminals.paths());
    for i in 0..terminals.paths() {
        let x = terminals.state(i);
        let phi = payoff(&map.to_market(&x));
        let f = control.evaluate(&x);
        plain_values.push(phi);
        cv_values.push(phi - (f - exact_mean));
    }
    let plain = summarize(&plain_values, terminals.seed);
    let mut cv = summarize(&cv_values, terminals.seed);
    cv.variance_ratio = Some(if cv.variance > 0.0 {
        plain.variance / cv.variance
    } else {
        f64::INFINITY
    });
    Ok(CvEstimate { plain, cv })
}

/// One martingale checkpoint: the sample mean of Q(T−s, X_s) against the
/// constant reference Q(T, x0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MartingaleCheckpoint {
    pub s: f64,
    pub mean: f64,
    pub std_error: f64,
    pub reference: f64,
    pub z_score: f64,
}

/// Statistically verifies that Q(t−s, X_s) with Q(u,·) = P_u f is a
/// martingale: at every checkpoint s the sample mean of Q(T−s, X_s) is
/// z-scored against Q(T, x0).
pub fn martingale_check(
    gen: &GeneratorMatrix,
    sim: &SimulationSpec,
    f: &PolyVector,
    t_end: f64,
    x0: &[f64],
    checkpoints: &[f64],
    cfg: &McConfig,
) -> Result<Vec<MartingaleCheckpoint>> {
    if checkpoints.iter().any(|&s| s < 0.0 || s > t_end) {
        return Err(Error::InvalidParameter(
            "checkpoints must lie in [0, T]".into(),
        ));
    }
    let mut sorted: Vec<f64> = checkpoints.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite checkpoints"));
    let reference = apply_semigroup(gen, t_end, f)?.evaluate(x0);
    let sets = simulate_checkpoints(sim, x0, &sorted, cfg)?;
    let mut out = Vec::with_capacity(sorted.len());
    for (s, set) in sorted.iter().zip(&sets) {
        let q = apply_semigroup(gen, t_end - s, f)?;
        let values: Vec<f64> = (0..set.paths()).map(|i| q.evaluate(&set.state(i))).collect();
        let est = summarize(&values, cfg.seed);
        let z = if est.std_error > 0.0 {
            (est.mean - reference) / est.std_error
        } else if est.mean == reference {
            0.0
        } else {
            f64::INFINITY
        };
        out.push(MartingaleCheckpoint {
            s: *s,
            mean: est.mean,
            std_error: est.std_error,
            reference,
            z_score: z,
        });
    }
    Ok(out)
}
