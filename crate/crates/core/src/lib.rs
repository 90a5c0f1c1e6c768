//! Moments of polynomial Markov processes by matrix exponentials.
//!
//! For processes whose generator maps polynomials of degree ≤ m to
//! polynomials of degree ≤ m (affine diffusions, many jump diffusions,
//! Jacobi-type processes, exponential Lévy models), conditional moments are
//! linear-algebra objects: the generator restricted to the monomial basis
//! is a matrix A, and E[f(X_t) | X_0 = x] is the coefficient row of f
//! multiplied by e^{tA} and evaluated at x.
//!
//! The crate builds A from differential characteristics ([`generator`]),
//! exponentiates it ([`expm`]), and layers applications on top: moments and
//! GMM calibration ([`moments`]), exact pricing and Greeks for polynomial
//! claims ([`pricing`]), and control-variate Monte Carlo ([`montecarlo`]).

pub mod error;
pub mod expm;
pub mod generator;
pub mod moments;
pub mod montecarlo;
pub mod polybasis;
pub mod pricing;

pub use error::{Error, Result, Violation};
pub use expm::{apply_semigroup, expm, ode_oracle, ExpmResult};
pub use generator::{
    build_matrix, convert_truncation, GeneratorMatrix, GeneratorSpec, JumpLaw, JumpMomentTable,
    JumpSpec, Model,
};
pub use moments::{
    calibrate, gmm_residuals, harmonic_polynomial, mixed_moment, moment, CalibrationResult,
    GmmCondition, ParameterBox, TimeSeries,
};
pub use montecarlo::{
    estimate_cv, estimate_plain, martingale_check, simulate_terminal, Estimate, McConfig,
    SimulationSpec, TerminalSet,
};
pub use polybasis::{enumerate_basis, Basis, MultiIndex, PolyVector};
pub use pricing::{fit_payoff, greeks, price, MarketMap, PayoffKind, PolyClaim};
