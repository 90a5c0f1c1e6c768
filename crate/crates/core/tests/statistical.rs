//! Monte Carlo and quadrature oracles: the slower statistical cross-checks
//! between the analytic (matrix exponential) face and the simulation face.

mod common;

use common::{adaptive_simpson, normal_pdf};
use polymom::generator::{
    build_matrix, convert_truncation, BatesParams, CirParams, JumpLaw, Model,
};
use polymom::moments::{gmm_residuals, mixed_moment, moment, GmmCondition, TimeSeries};
use polymom::montecarlo::{
    estimate_cv, estimate_plain, simulate_checkpoints, simulate_series, simulate_terminal,
    McConfig,
};
use polymom::polybasis::{enumerate_basis, MultiIndex, PolyVector};
use polymom::pricing::{fit_payoff, price, MarketMap, PolyClaim};

fn mi(entries: &[u32]) -> MultiIndex {
    MultiIndex::new(entries.to_vec())
}

fn cir_model() -> Model {
    Model::Cir(CirParams {
        b: 0.1,
        beta: -0.5,
        sigma: 0.3,
    })
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn cir_second_moment_vs_million_path_euler() {
    let model = cir_model();
    let spec = model.generator_spec(2).unwrap();
    let exact = moment(&spec, &mi(&[2]), 1.0, &[0.2]).unwrap();
    let sim = model.simulation_spec().unwrap();
    let cfg = McConfig::new(1_000_000, 400, 424242);
    let set = simulate_terminal(&sim, &[0.2], 1.0, &cfg).unwrap();
    let values: Vec<f64> = (0..set.paths()).map(|i| set.state(i)[0].powi(2)).collect();
    let (mc, se) = mean_and_se(&values);
    assert!(
        (mc - exact).abs() <= 4.0 * se,
        "E[X_1^2]: exact {exact}, MC {mc} +- {se}"
    );
}

#[test]
fn cir_mixed_moment_vs_monte_carlo() {
    let model = cir_model();
    let spec = model.generator_spec(2).unwrap();
    let (t, s, x0) = (0.5, 0.5, 0.2);
    let exact = mixed_moment(&spec, &mi(&[1]), &mi(&[1]), t, s, &[x0]).unwrap();
    let sim = model.simulation_spec().unwrap();
    let cfg = McConfig::new(200_000, 400, 7_171);
    let sets = simulate_checkpoints(&sim, &[x0], &[t, t + s], &cfg).unwrap();
    let values: Vec<f64> = (0..cfg.paths)
        .map(|i| sets[0].state(i)[0] * sets[1].state(i)[0])
        .collect();
    let (mc, se) = mean_and_se(&values);
    assert!(
        (mc - exact).abs() <= 4.0 * se,
        "E[X_t X_(t+s)]: exact {exact}, MC {mc} +- {se}"
    );
}

#[test]
fn gmm_residuals_vanish_on_self_simulated_data() {
    let model = cir_model();
    let spec = model.generator_spec(4).unwrap();
    let sim = model.simulation_spec().unwrap();
    let dt = 0.25;
    let n_points = 100_000;
    let rows = simulate_series(&sim, &[0.2], n_points, dt, 100, 99).unwrap();
    let data = TimeSeries::new(rows.clone(), dt).unwrap();
    let conditions = vec![
        GmmCondition {
            n: mi(&[1]),
            m: mi(&[0]),
            lag: 0.0,
        },
        GmmCondition {
            n: mi(&[2]),
            m: mi(&[0]),
            lag: 0.0,
        },
        GmmCondition {
            n: mi(&[1]),
            m: mi(&[1]),
            lag: dt,
        },
    ];
    let residuals = gmm_residuals(&conditions, &data, &spec).unwrap();

    // Autocorrelated series: standard errors from 50 batch means.
    let batches = 50;
    let batch_len = n_points / batches;
    for (ci, cond) in conditions.iter().enumerate() {
        let lag = (cond.lag / dt).round() as usize;
        let mut batch_means = Vec::with_capacity(batches);
        for b in 0..batches {
            let lo = b * batch_len;
            let hi = (lo + batch_len).min(n_points - lag);
            if hi <= lo {
                continue;
            }
            let mean = (lo..hi)
                .map(|i| {
                    rows[i][0].powi(cond.n.entry(0) as i32)
                        * rows[i + lag][0].powi(cond.m.entry(0) as i32)
                })
                .sum::<f64>()
                / (hi - lo) as f64;
            batch_means.push(mean);
        }
        let (_, se_of_mean) = mean_and_se(&batch_means);
        assert!(
            residuals[ci].abs() <= 4.0 * se_of_mean,
            "condition {ci}: residual {} vs 4 x batch se {}",
            residuals[ci],
            se_of_mean
        );
    }
}

#[test]
fn reported_stderr_matches_repeat_batches() {
    // The single-run standard error must predict the spread of independent
    // repetitions. 250 independent seeds at L=2000 give the sd of the
    // estimator to ~4.5% relative accuracy.
    let model = Model::Bates(BatesParams::default());
    let sim = model.simulation_spec().unwrap();
    let map = MarketMap::log_price(2, 1.0).unwrap();
    let payoff = |s: &[f64]| (s[0] - 1.0f64).max(0.0);
    let batches = 250;
    let mut means = Vec::with_capacity(batches);
    let mut reported_se = Vec::with_capacity(batches);
    for b in 0..batches {
        let cfg = McConfig::new(2_000, 50, 60_000 + b as u64);
        let set = simulate_terminal(&sim, &[0.0, 0.04], 1.0, &cfg).unwrap();
        let est = estimate_plain(payoff, &map, &set);
        means.push(est.mean);
        reported_se.push(est.std_error);
    }
    let avg_reported = reported_se.iter().sum::<f64>() / batches as f64;
    let grand = means.iter().sum::<f64>() / batches as f64;
    let empirical_sd = (means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>()
        / (batches as f64 - 1.0))
        .sqrt();
    let ratio = avg_reported / empirical_sd;
    assert!(
        (ratio - 1.0).abs() <= 0.10,
        "reported stderr {avg_reported:.3e} vs empirical sd {empirical_sd:.3e} (ratio {ratio:.3})"
    );
}

#[test]
fn variance_reduction_holds_for_every_catalog_model() {
    // Degree-4 pilot-fitted control on a call payoff: the CV estimator must
    // strictly reduce the sample variance for each catalog model.
    let cases: Vec<(Model, Vec<f64>, MarketMap, f64)> = Model::examples()
        .into_iter()
        .map(|model| match model.name() {
            "bm" => (model, vec![0.5], MarketMap::identity(1), 0.5),
            "cir" => (model, vec![0.2], MarketMap::identity(1), 0.2),
            "vasicek" => (model, vec![0.3], MarketMap::identity(1), 0.3),
            "jacobi" => (model, vec![0.5], MarketMap::identity(1), 0.5),
            "exp_levy" => (model, vec![1.0], MarketMap::identity(1), 1.0),
            "heston" | "bates" => (
                model,
                vec![0.0, 0.04],
                MarketMap::log_price(2, 1.0).unwrap(),
                1.0,
            ),
            "bates2f" => (
                model,
                vec![0.0, 0.015, 0.013],
                MarketMap::log_price(3, 1.0).unwrap(),
                1.0,
            ),
            other => panic!("unmapped model {other}"),
        })
        .collect();

    for (model, x0, map, strike) in cases {
        let spec = model.generator_spec(4).unwrap();
        let sim = model.simulation_spec().unwrap();
        let payoff = |s: &[f64]| (s[0] - strike).max(0.0);
        let t = 1.0;

        let pilot = simulate_terminal(&sim, &x0, t, &McConfig::new(5_000, 50, 4_040)).unwrap();
        let basis = enumerate_basis(x0.len(), 4).unwrap();
        let points: Vec<Vec<f64>> = (0..pilot.paths()).map(|i| pilot.state(i)).collect();
        let weights = vec![1.0; points.len()];
        let (control, _) = fit_payoff(payoff, &map, &basis, &points, &weights).unwrap();
        let claim = PolyClaim::new(control.clone(), t).unwrap();
        let s_obs = map.to_market(&x0);
        let exact_mean = price(&spec, &map, &claim, 0.0, &s_obs).unwrap();

        let set = simulate_terminal(&sim, &x0, t, &McConfig::new(100_000, 50, 5_050)).unwrap();
        let pair = estimate_cv(payoff, &map, &control, exact_mean, &set).unwrap();
        assert!(
            pair.cv.variance < pair.plain.variance,
            "{}: CV variance {} not below plain {}",
            model.name(),
            pair.cv.variance,
            pair.plain.variance
        );
        let tol = 4.0
            * (pair.plain.std_error.powi(2) + pair.cv.std_error.powi(2)).sqrt();
        assert!(
            (pair.plain.mean - pair.cv.mean).abs() <= tol,
            "{}: CV and plain means disagree beyond noise",
            model.name()
        );
    }
}

#[test]
fn nested_fits_improve_on_pilot_sample() {
    // Black-Scholes call fitted at degree 4 beats the degree-2 fit on the
    // same pilot sample (nested least squares).
    let model = Model::ExpLevy(polymom::generator::ExpLevyParams {
        r: 0.03,
        a: 0.04,
        jumps: None,
    });
    let sim = model.simulation_spec().unwrap();
    let pilot = simulate_terminal(&sim, &[1.0], 1.0, &McConfig::new(10_000, 50, 808)).unwrap();
    let points: Vec<Vec<f64>> = (0..pilot.paths()).map(|i| pilot.state(i)).collect();
    let weights = vec![1.0; points.len()];
    let map = MarketMap::identity(1);
    let payoff = |s: &[f64]| (s[0] - 1.0f64).max(0.0);
    let (_, diag2) = fit_payoff(
        payoff,
        &map,
        &enumerate_basis(1, 2).unwrap(),
        &points,
        &weights,
    )
    .unwrap();
    let (_, diag4) = fit_payoff(
        payoff,
        &map,
        &enumerate_basis(1, 4).unwrap(),
        &points,
        &weights,
    )
    .unwrap();
    assert!(
        diag4.weighted_rmse < diag2.weighted_rmse,
        "degree-4 rmse {} vs degree-2 rmse {}",
        diag4.weighted_rmse,
        diag2.weighted_rmse
    );
}

#[test]
fn jump_law_moments_match_quadrature_and_sampler() {
    let laws = [
        JumpLaw::Merton {
            mu: -0.1,
            sigma: 0.15,
        },
        JumpLaw::Kou {
            p: 0.55,
            eta_plus: 9.0,
            eta_minus: 4.0,
        },
    ];
    for law in laws {
        for k in 2..=4u32 {
            let closed = law.raw_moment(k);
            let quad = match law {
                JumpLaw::Merton { mu, sigma } => {
                    let f = |y: f64| y.powi(k as i32) * normal_pdf(y, mu, sigma);
                    adaptive_simpson(&f, mu - 20.0 * sigma, mu + 20.0 * sigma, 1e-13)
                }
                JumpLaw::Kou {
                    p,
                    eta_plus,
                    eta_minus,
                } => {
                    let up = |y: f64| y.powi(k as i32) * p * eta_plus * (-eta_plus * y).exp();
                    let dn =
                        |y: f64| y.powi(k as i32) * (1.0 - p) * eta_minus * (eta_minus * y).exp();
                    adaptive_simpson(&up, 0.0, 60.0 / eta_plus, 1e-13)
                        + adaptive_simpson(&dn, -60.0 / eta_minus, 0.0, 1e-13)
                }
            };
            assert!(
                (closed - quad).abs() <= 1e-8 * (1.0 + closed.abs()),
                "{law:?} moment {k}: closed {closed} vs quadrature {quad}"
            );
        }
        // Sampler consistency at Monte Carlo accuracy.
        let mut rng = polymom::montecarlo::rng::substream(2024, 0);
        let draws: Vec<f64> = (0..200_000).map(|_| law.sample(&mut rng)).collect();
        for k in 1..=3u32 {
            let powers: Vec<f64> = draws.iter().map(|d| d.powi(k as i32)).collect();
            let (mean, se) = mean_and_se(&powers);
            let exact = law.raw_moment(k);
            assert!(
                (mean - exact).abs() <= 4.0 * se,
                "{law:?} sampler moment {k}: {mean} vs {exact} (se {se})"
            );
        }
    }
}

#[test]
fn truncation_conversion_against_quadrature() {
    // Drift stated under the truncation chi(xi) = xi 1_(|xi|<=1): moving to
    // chi(xi)=xi adds the large-jump first moment of the linear kernel,
    // integral_(|xi|>1) xi mu_10(dxi), to beta.
    let (lambda, mu, sigma) = (0.8, 0.6, 0.5);
    let spec_tilde = cir_model().generator_spec(2).unwrap();
    let tail = |y: f64| y * lambda * normal_pdf(y, mu, sigma);
    let correction_value = adaptive_simpson(&tail, 1.0, mu + 20.0 * sigma, 1e-13)
        + adaptive_simpson(&tail, -(mu + 20.0 * sigma).max(2.0), -1.0, 1e-13);
    let basis = enumerate_basis(1, 1).unwrap();
    let correction =
        PolyVector::from_terms(basis, &[(mi(&[1]), correction_value)]).unwrap();
    let converted = convert_truncation(&spec_tilde, &[correction]).unwrap();
    assert!(
        (converted.drift.beta[0][0] - (-0.5 + correction_value)).abs() < 1e-12,
        "beta should gain the large-jump mean {correction_value}"
    );
    assert!(converted.validate().is_empty());
    // The constant part is untouched by a purely linear correction.
    assert_eq!(converted.drift.b, spec_tilde.drift.b);
    // Sanity: the corrected spec still builds.
    build_matrix(&converted, 2).unwrap();
}
