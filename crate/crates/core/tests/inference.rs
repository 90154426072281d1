//! Sampler correctness checks: conjugate Gibbs draws against the analytic
//! full conditional, the Metropolis kernel against a closed-form posterior,
//! ICAR scaling oracles, determinism across thread counts, and structural
//! model validation.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use statrs::distribution::{ContinuousCDF, Gamma};

use spatial_smooth::inference::{
    adaptive_scalar_chain, build_model, fit_bym2, gamma_gibbs_draw, icar_scaling, run_mcmc,
    Baseline, InferenceError, Likelihood, McmcOptions, ModelOptions, PriorConfig,
};
use spatial_smooth::numerics::SymmetricMatrix;
use spatial_smooth::region::{make_grid_region, scaled_centroids};
use spatial_smooth::simgen::{gen_latent_field, gen_observations, Family};
use spatial_smooth::smooth::{build_tps_basis, select_knots};

fn quick_opts(seed: u64) -> McmcOptions {
    McmcOptions {
        chains: 2,
        iterations: 1500,
        burn_in: 500,
        thin: 1,
        seed,
    }
}

/// Kolmogorov-Smirnov p-value (asymptotic, with the usual finite-sample
/// correction).
fn ks_p_value(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let hi = (i as f64 + 1.0) / n - f;
        let lo = f - i as f64 / n;
        d = d.max(hi).max(lo);
    }
    let x = d * (n.sqrt() + 0.12 + 0.11 / n.sqrt());
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1.0f64).powi(k as i32 + 1) * (-2.0 * kf * kf * x * x).exp();
        p += term;
    }
    p.clamp(0.0, 1.0)
}

#[test]
fn gibbs_lambda_matches_analytic_gamma_full_conditional() {
    // Fix a real basis and a fixed beta; the engine's conjugate update draws
    // lambda1 | beta ~ Gamma(a + rank(P1)/2, b + beta'P1beta/2) through
    // gamma_gibbs_draw. Compare 10^4 draws against that distribution.
    let region = make_grid_region(8, 8, 1e4, 1e6, 3).unwrap();
    let coords = scaled_centroids(&region).unwrap();
    let knots = select_knots(&coords, 12, 4).unwrap();
    let basis = build_tps_basis(&coords, &knots, "distance").unwrap();

    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let beta: Vec<f64> = (0..basis.num_coefficients())
        .map(|i| ((i as f64) * 0.37).sin())
        .collect();
    let q1 = basis.p1().quadratic_form(&beta);
    let shape = 0.05 + basis.rank_p1() as f64 / 2.0;
    let rate = 0.005 + q1 / 2.0;

    let mut draws: Vec<f64> = (0..10_000)
        .map(|_| gamma_gibbs_draw(&mut rng, shape, rate))
        .collect();
    draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let dist = Gamma::new(shape, rate).unwrap();
    let p = ks_p_value(&draws, |x| dist.cdf(x));
    assert!(p > 0.01, "KS p-value {p}");
}

#[test]
fn normal_normal_toy_posterior() {
    // Prior mu ~ N(1, 2^2); data x_i ~ N(mu, 3^2), n = 40, known sigma.
    // Posterior is closed form.
    let (m0, s0, sigma) = (1.0f64, 2.0f64, 3.0f64);
    let data: Vec<f64> = (0..40)
        .map(|i| 2.0 + ((i * 37 % 17) as f64 - 8.0) / 3.0)
        .collect();
    let n = data.len() as f64;
    let xbar = data.iter().sum::<f64>() / n;

    let prec_post = 1.0 / (s0 * s0) + n / (sigma * sigma);
    let mean_post = (m0 / (s0 * s0) + n * xbar / (sigma * sigma)) / prec_post;
    let sd_post = (1.0 / prec_post).sqrt();

    let target = |mu: f64| {
        let prior = -0.5 * (mu - m0) * (mu - m0) / (s0 * s0);
        let ll: f64 = data
            .iter()
            .map(|x| -0.5 * (x - mu) * (x - mu) / (sigma * sigma))
            .sum();
        prior + ll
    };
    let draws = adaptive_scalar_chain(target, 0.0, 60_000, 5_000, 2024);
    let nd = draws.len() as f64;
    let mean = draws.iter().sum::<f64>() / nd;
    let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nd;

    // Monte-Carlo standard error of the mean by batch means.
    let batches = 25;
    let per = draws.len() / batches;
    let batch_means: Vec<f64> = (0..batches)
        .map(|b| draws[b * per..(b + 1) * per].iter().sum::<f64>() / per as f64)
        .collect();
    let bm = batch_means.iter().sum::<f64>() / batches as f64;
    let bvar =
        batch_means.iter().map(|x| (x - bm) * (x - bm)).sum::<f64>() / (batches as f64 - 1.0);
    let mcse_mean = (bvar / batches as f64).sqrt();

    assert!(
        (mean - mean_post).abs() <= 3.0 * mcse_mean.max(1e-6),
        "posterior mean {mean} vs {mean_post} (mcse {mcse_mean})"
    );
    // sd within 3 relative MC errors (sd of sd estimate ~ sd/sqrt(2*ess)).
    let ess_proxy = nd / 10.0;
    let mcse_sd = sd_post / (2.0 * ess_proxy).sqrt();
    assert!(
        (var.sqrt() - sd_post).abs() <= 3.0 * mcse_sd,
        "posterior sd {} vs {sd_post}",
        var.sqrt()
    );
}

#[test]
fn icar_scaling_path_and_complete_graph() {
    // Path 1-2-3: pseudo-inverse diagonal (5/9, 2/9, 5/9), geometric mean
    // (50/729)^(1/3) ≈ 0.40929.
    let w = SymmetricMatrix::from_dense(3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
    let s = icar_scaling(&w).unwrap();
    let expect = (5.0 / 9.0 * 2.0 / 9.0 * 5.0 / 9.0f64).powf(1.0 / 3.0);
    assert!((s - expect).abs() < 1e-10);
    assert!((s - 0.4093).abs() < 1e-3);

    // Complete graph n=2: Q = [[1,-1],[-1,1]], eigenvalue 2, pseudo-inverse
    // diagonal (1/4, 1/4).
    let w2 = SymmetricMatrix::from_dense(2, &[0.0, 1.0, 1.0, 0.0]).unwrap();
    assert!((icar_scaling(&w2).unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn icar_scaling_invariant_to_relabelling() {
    let region = make_grid_region(4, 5, 10.0, 20.0, 1).unwrap();
    let w = region.adjacency();
    let n = region.len();
    let s1 = icar_scaling(w).unwrap();
    // Reverse-order relabelling.
    let perm: Vec<usize> = (0..n).rev().collect();
    let w2 = SymmetricMatrix::from_fn(n, |i, j| w.get(perm[i], perm[j]));
    let s2 = icar_scaling(&w2).unwrap();
    assert!((s1 - s2).abs() < 1e-12);
}

#[test]
fn icar_scaling_rejects_disconnected() {
    let mut w = SymmetricMatrix::zeros(4);
    w.set_sym(0, 1, 1.0);
    w.set_sym(2, 3, 1.0);
    assert!(matches!(
        icar_scaling(&w),
        Err(InferenceError::DisconnectedGraph)
    ));
}

fn small_dataset(
    phi: f64,
    seed: u64,
) -> (
    Arc<spatial_smooth::region::Region>,
    spatial_smooth::simgen::SimDataset,
) {
    let region = Arc::new(make_grid_region(10, 10, 1e5, 1e7, seed).unwrap());
    let coords = scaled_centroids(&region).unwrap();
    let field = gen_latent_field(&[&coords], &[phi, 1.0 - phi], seed + 1).unwrap();
    let ds = gen_observations(&region, &field, 0.0, Family::Poisson, 0, seed + 2).unwrap();
    (region, ds)
}

fn spline_terms(
    region: &spatial_smooth::region::Region,
    k: usize,
) -> Vec<Arc<spatial_smooth::smooth::SmoothBasis>> {
    let coords = scaled_centroids(region).unwrap();
    let knots = select_knots(&coords, k, 77).unwrap();
    vec![Arc::new(
        build_tps_basis(&coords, &knots, "distance").unwrap(),
    )]
}

#[test]
fn spline_fit_alpha_interval_covers_zero_on_pure_noise() {
    let (region, ds) = small_dataset(0.0, 40);
    let terms = spline_terms(&region, 20);
    let model = build_model(&ds, terms, ModelOptions::default()).unwrap();
    let samples = run_mcmc(&model, &ds, quick_opts(11)).unwrap();
    let mut alphas: Vec<f64> = samples
        .chains
        .iter()
        .flat_map(|c| c.alpha.iter().copied())
        .collect();
    alphas.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = alphas[(alphas.len() as f64 * 0.025) as usize];
    let hi = alphas[(alphas.len() as f64 * 0.975) as usize];
    assert!(lo < 0.0 && hi > 0.0, "95% CI [{lo}, {hi}] misses 0");
    // Retained draws have finite log density everywhere.
    for chain in &samples.chains {
        for r in 0..chain.loglik.rows() {
            assert!(chain.loglik.row(r).iter().all(|v| v.is_finite()));
        }
    }
}

#[test]
fn fixed_seed_bit_identical_across_thread_counts() {
    let (region, ds) = small_dataset(0.5, 50);
    let terms = spline_terms(&region, 15);
    let model = build_model(&ds, terms, ModelOptions::default()).unwrap();
    let opts = McmcOptions {
        chains: 3,
        iterations: 400,
        burn_in: 100,
        thin: 2,
        seed: 9,
    };

    let pool1 = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let pool4 = rayon::ThreadPoolBuilder::new()
        .num_threads(4)
        .build()
        .unwrap();
    let run1 = pool1.install(|| run_mcmc(&model, &ds, opts)).unwrap();
    let run4 = pool4.install(|| run_mcmc(&model, &ds, opts)).unwrap();

    assert_eq!(run1.chains.len(), run4.chains.len());
    for (c1, c4) in run1.chains.iter().zip(&run4.chains) {
        assert_eq!(c1.alpha.len(), c4.alpha.len());
        for (a, b) in c1.alpha.iter().zip(&c4.alpha) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (k, m1) in &c1.betas {
            let m4 = &c4.betas[k];
            assert_eq!(m1.data().len(), m4.data().len());
            for (x, y) in m1.data().iter().zip(m4.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}

#[test]
fn bym2_structured_term_sums_to_zero_every_draw() {
    let (region, ds) = small_dataset(0.7, 60);
    let samples = fit_bym2(&ds, &region, PriorConfig::default(), quick_opts(21)).unwrap();
    for chain in &samples.chains {
        let s = &chain.components["structured"];
        for r in 0..s.rows() {
            let row = s.row(r);
            let sum: f64 = row.iter().sum();
            let scale = row.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
            assert!(sum.abs() <= 1e-10 * scale.max(1.0), "draw {r}: sum {sum}");
        }
        assert!(chain.hyper["phi"].iter().all(|&p| (0.0..=1.0).contains(&p)));
    }
}

#[test]
fn degenerate_smooth_limit_recovers_pooled_rate() {
    // S = 0 data with enormous smoothing and iid precisions: the fit
    // collapses to E(y_i) = xi_i * exp(alpha), alpha = log(sum y / sum xi).
    let region = Arc::new(make_grid_region(8, 8, 1e5, 1e6, 5).unwrap());
    let field = spatial_smooth::simgen::LatentField {
        values: vec![0.0; region.len()],
        components: Default::default(),
        phis: Default::default(),
    };
    let ds = gen_observations(&region, &field, 0.3, Family::Poisson, 0, 8).unwrap();
    let terms = spline_terms(&region, 10);
    let mut priors = PriorConfig::default();
    // Pin the smoothing and iid precisions at ~1e8 with tiny variance.
    priors.lambda_shape = 1e10;
    priors.lambda_rate = 100.0;
    priors.iid_shape = 1e10;
    priors.iid_rate = 100.0;
    let model = build_model(
        &ds,
        terms,
        ModelOptions {
            include_iid: true,
            likelihood: None,
            priors,
        },
    )
    .unwrap();
    let samples = run_mcmc(&model, &ds, quick_opts(31)).unwrap();
    let sum_y: f64 = ds.y.iter().map(|&v| v as f64).sum();
    let sum_xi: f64 = region.offsets().iter().sum();
    let expect = (sum_y / sum_xi).ln();
    let alphas: Vec<f64> = samples
        .chains
        .iter()
        .flat_map(|c| c.alpha.iter().copied())
        .collect();
    let mean = alphas.iter().sum::<f64>() / alphas.len() as f64;
    assert!(
        (mean - expect).abs() < 0.02,
        "alpha {mean} vs pooled {expect}"
    );
    let fitted = samples.fitted_mean();
    for (f, &xi) in fitted.iter().zip(region.offsets()) {
        assert!((f / (xi * expect.exp()) - 1.0).abs() < 0.05);
    }
}

#[test]
fn exchanging_term_order_gives_equivalent_posteriors() {
    let region = Arc::new(make_grid_region(8, 8, 1e5, 1e7, 70).unwrap());
    let dist = scaled_centroids(&region).unwrap();
    let movement = spatial_smooth::connectivity::movement_coords(&region, 2.0).unwrap();
    let field = gen_latent_field(&[&dist, &movement], &[0.6, 0.3, 0.1], 71).unwrap();
    let ds = gen_observations(&region, &field, 0.0, Family::Poisson, 0, 72).unwrap();

    let mk = |coords: &spatial_smooth::smooth::ConnectivityCoords, label: &str| {
        let knots = select_knots(coords, 15, 5).unwrap();
        Arc::new(build_tps_basis(coords, &knots, label).unwrap())
    };
    let t_dist = mk(&dist, "distance");
    let t_mv = mk(&movement, "movement");

    let opts = McmcOptions {
        chains: 2,
        iterations: 3000,
        burn_in: 1000,
        thin: 1,
        seed: 33,
    };
    let m_ab = build_model(
        &ds,
        vec![t_dist.clone(), t_mv.clone()],
        ModelOptions::default(),
    )
    .unwrap();
    let m_ba = build_model(&ds, vec![t_mv, t_dist], ModelOptions::default()).unwrap();
    let s_ab = run_mcmc(&m_ab, &ds, opts).unwrap();
    let s_ba = run_mcmc(&m_ba, &ds, opts).unwrap();

    let mean_alpha = |s: &spatial_smooth::inference::PosteriorSamples| -> f64 {
        let all: Vec<f64> = s
            .chains
            .iter()
            .flat_map(|c| c.alpha.iter().copied())
            .collect();
        all.iter().sum::<f64>() / all.len() as f64
    };
    // Posterior mean of the across-area variance of each fitted component:
    // labels follow the term, not its position in the spec.
    let comp_var = |s: &spatial_smooth::inference::PosteriorSamples, label: &str| -> f64 {
        let mut acc = 0.0;
        let mut count = 0usize;
        for chain in &s.chains {
            let m = &chain.components[label];
            for r in 0..m.rows() {
                let row = m.row(r);
                let mean = row.iter().sum::<f64>() / row.len() as f64;
                acc += row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / row.len() as f64;
                count += 1;
            }
        }
        acc / count as f64
    };
    assert!((mean_alpha(&s_ab) - mean_alpha(&s_ba)).abs() < 0.05);
    for label in ["distance", "movement", "iid"] {
        let a = comp_var(&s_ab, label);
        let b = comp_var(&s_ba, label);
        assert!(
            (a / b - 1.0).abs() < 0.3,
            "{label}: component variances {a} vs {b}"
        );
    }
}

#[test]
fn build_model_validation_errors() {
    let (region, ds) = small_dataset(0.5, 90);
    // Row mismatch: basis built on a different-size region.
    let other = make_grid_region(5, 5, 1e4, 1e5, 0).unwrap();
    let bad_terms = spline_terms(&other, 10);
    assert!(matches!(
        build_model(&ds, bad_terms, ModelOptions::default()),
        Err(InferenceError::DimensionError(_))
    ));
    // No random terms at all.
    assert!(matches!(
        build_model(
            &ds,
            vec![],
            ModelOptions {
                include_iid: false,
                ..ModelOptions::default()
            }
        ),
        Err(InferenceError::IncompatibleSpec(_))
    ));
    // BYM2 baseline combined with smooth terms.
    let mut model = build_model(&ds, spline_terms(&region, 10), ModelOptions::default()).unwrap();
    model.baseline = Baseline::Bym2 { scaling: 0.5 };
    assert!(matches!(
        run_mcmc(&model, &ds, quick_opts(1)),
        Err(InferenceError::IncompatibleSpec(_))
    ));
    // Invalid schedule.
    let model = build_model(&ds, spline_terms(&region, 10), ModelOptions::default()).unwrap();
    let bad = McmcOptions {
        chains: 2,
        iterations: 100,
        burn_in: 100,
        thin: 1,
        seed: 0,
    };
    assert!(matches!(
        run_mcmc(&model, &ds, bad),
        Err(InferenceError::InvalidConfig(_))
    ));
}

#[test]
fn fit_bym2_rejects_disconnected_region() {
    use spatial_smooth::region::{AreaUnit, Region};
    let units = (0..4)
        .map(|i| AreaUnit {
            id: i,
            centroid_x: i as f64,
            centroid_y: (i % 2) as f64,
            population: 1e5,
        })
        .collect();
    let region = Arc::new(Region::from_units_and_edges(units, &[(0, 1), (2, 3)]).unwrap());
    let ds = spatial_smooth::simgen::SimDataset::from_observed(
        Arc::clone(&region),
        vec![1, 2, 3, 4],
        Family::Poisson,
        0,
    )
    .unwrap();
    assert!(matches!(
        fit_bym2(&ds, &region, PriorConfig::default(), quick_opts(0)),
        Err(InferenceError::DisconnectedGraph)
    ));
}

#[test]
fn negbinomial_likelihood_accepted_via_override() {
    let (region, ds) = small_dataset(0.3, 100);
    let terms = spline_terms(&region, 10);
    let model = build_model(
        &ds,
        terms,
        ModelOptions {
            include_iid: true,
            likelihood: Some(Likelihood::NegBinomial),
            priors: PriorConfig::default(),
        },
    )
    .unwrap();
    let samples = run_mcmc(
        &model,
        &ds,
        McmcOptions {
            chains: 2,
            iterations: 600,
            burn_in: 200,
            thin: 1,
            seed: 3,
        },
    )
    .unwrap();
    let disp = samples.scalar_series("dispersion").unwrap();
    assert!(disp.iter().flatten().all(|&t| t > 0.0));
}
