//! Model comparison and variance-decomposition statistics: MAE, WAIC, Brier
//! score, AUROC, per-term variance proportions with credible intervals, and
//! split rank-normalized R̂ / bulk ESS convergence diagnostics.

use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::inference::{Likelihood, PosteriorSamples};
use crate::numerics::DenseMatrix;
use crate::simgen::SimDataset;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("metric requires a binomial dataset")]
    WrongFamily,
    #[error("AUROC undefined: all outcomes in one class")]
    UndefinedAuroc,
    #[error("numerical error: {0}")]
    NumericalError(String),
    #[error("chains too short: need at least {0} draws")]
    TooShort(usize),
    #[error("need at least two chains for diagnostics")]
    TooFewChains,
    #[error("variance decomposition needs at least two random terms, got {0}")]
    InsufficientTerms(usize),
}

/// Summary of one random term's share of the total random-term variance.
#[derive(Debug, Clone)]
pub struct ProportionSummary {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    /// Per-draw proportions (pooled across chains), for downstream checks.
    pub draws: Vec<f64>,
}

/// Per-term variance shares computed per posterior draw.
#[derive(Debug, Clone)]
pub struct VarianceDecomposition {
    pub terms: BTreeMap<String, ProportionSummary>,
    /// Draws whose total random-term variance was zero (proportions set to 0).
    pub flagged_draws: usize,
    pub n_draws: usize,
}

fn population_variance(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    }
}

/// Per-draw across-area variance of each random term divided by the variance
/// of the pointwise sum of all terms, summarized by the posterior mean and
/// central 95% interval.
pub fn variance_decomposition(
    samples: &PosteriorSamples,
) -> Result<VarianceDecomposition, MetricsError> {
    let labels = samples.component_labels();
    if labels.len() < 2 {
        return Err(MetricsError::InsufficientTerms(labels.len()));
    }
    let n = samples.n_areas;
    let mut series: BTreeMap<String, Vec<f64>> =
        labels.iter().map(|l| (l.clone(), Vec::new())).collect();
    let mut flagged = 0usize;
    let mut n_draws = 0usize;
    for chain in &samples.chains {
        let draws = chain.alpha.len();
        for d in 0..draws {
            n_draws += 1;
            let mut total = vec![0.0f64; n];
            for l in &labels {
                let row = chain.components[l].row(d);
                for (t, &v) in total.iter_mut().zip(row) {
                    *t += v;
                }
            }
            let var_total = population_variance(&total);
            if var_total <= 0.0 {
                flagged += 1;
                for l in &labels {
                    series.get_mut(l).unwrap().push(0.0);
                }
                continue;
            }
            for l in &labels {
                let var_term = population_variance(chain.components[l].row(d));
                series.get_mut(l).unwrap().push(var_term / var_total);
            }
        }
    }
    let mut terms = BTreeMap::new();
    for (label, draws) in series {
        let mut sorted = draws.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mean = draws.iter().sum::<f64>() / draws.len().max(1) as f64;
        terms.insert(
            label,
            ProportionSummary {
                mean,
                lo: quantile(&sorted, 0.025),
                hi: quantile(&sorted, 0.975),
                draws,
            },
        );
    }
    Ok(VarianceDecomposition {
        terms,
        flagged_draws: flagged,
        n_draws,
    })
}

/// Mean absolute error between observed counts and the posterior mean of
/// E(y_i).
pub fn mae(samples: &PosteriorSamples, dataset: &SimDataset) -> f64 {
    let fitted = samples.fitted_mean();
    dataset
        .y
        .iter()
        .zip(&fitted)
        .map(|(&y, &f)| (y as f64 - f).abs())
        .sum::<f64>()
        / dataset.y.len() as f64
}

/// WAIC from a draws×n pointwise log-likelihood matrix:
/// lppd − p_waic penalty on the deviance scale, −2(lppd − p_waic).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waic {
    pub waic: f64,
    pub p_waic: f64,
    pub lppd: f64,
}

pub fn waic(loglik: &DenseMatrix) -> Result<Waic, MetricsError> {
    let s = loglik.rows();
    let n = loglik.cols();
    if s < 2 {
        return Err(MetricsError::TooShort(2));
    }
    let mut lppd = 0.0;
    let mut p_waic = 0.0;
    for i in 0..n {
        let col: Vec<f64> = (0..s).map(|d| loglik.get(d, i)).collect();
        if col.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::NumericalError(format!(
                "non-finite log-likelihood at observation {i}"
            )));
        }
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + (col.iter().map(|v| (v - max).exp()).sum::<f64>() / s as f64).ln();
        if !lse.is_finite() {
            return Err(MetricsError::NumericalError(format!(
                "log-sum-exp overflow at observation {i}"
            )));
        }
        lppd += lse;
        let mean = col.iter().sum::<f64>() / s as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (s as f64 - 1.0);
        p_waic += var;
    }
    Ok(Waic {
        waic: -2.0 * (lppd - p_waic),
        p_waic,
        lppd,
    })
}

/// WAIC over the pooled chains of a posterior.
pub fn waic_from_samples(samples: &PosteriorSamples) -> Result<Waic, MetricsError> {
    waic(&samples.pooled_loglik())
}

fn binomial_probs(
    samples: &PosteriorSamples,
    dataset: &SimDataset,
) -> Result<(Vec<f64>, f64), MetricsError> {
    let trials = match samples.likelihood {
        Likelihood::Binomial { trials } => trials as f64,
        _ => return Err(MetricsError::WrongFamily),
    };
    if dataset.family != crate::simgen::Family::Binomial {
        return Err(MetricsError::WrongFamily);
    }
    let probs = samples.fitted_mean().iter().map(|f| f / trials).collect();
    Ok((probs, trials))
}

/// Brier score under the per-trial convention: each area contributes its
/// `trials` Bernoulli outcomes at the shared posterior-mean probability.
pub fn brier(samples: &PosteriorSamples, dataset: &SimDataset) -> Result<f64, MetricsError> {
    let (probs, trials) = binomial_probs(samples, dataset)?;
    let n = dataset.y.len() as f64;
    let mut sum = 0.0;
    for (&y, &p) in dataset.y.iter().zip(&probs) {
        let y = y as f64;
        sum += y * (1.0 - p) * (1.0 - p) + (trials - y) * p * p;
    }
    Ok(sum / (n * trials))
}

/// Brier score under the per-area convention: squared error between the
/// observed proportion and the posterior-mean probability.
pub fn brier_per_area(
    samples: &PosteriorSamples,
    dataset: &SimDataset,
) -> Result<f64, MetricsError> {
    let (probs, trials) = binomial_probs(samples, dataset)?;
    let n = dataset.y.len() as f64;
    Ok(dataset
        .y
        .iter()
        .zip(&probs)
        .map(|(&y, &p)| {
            let d = y as f64 / trials - p;
            d * d
        })
        .sum::<f64>()
        / n)
}

/// AUROC under the per-trial expansion: each area contributes y_i positive
/// and (trials − y_i) negative outcomes, all at the shared score p̂_i.
/// Computed by the midrank formula in O(n log n).
pub fn auroc(samples: &PosteriorSamples, dataset: &SimDataset) -> Result<f64, MetricsError> {
    let (probs, trials) = binomial_probs(samples, dataset)?;
    auroc_from_scores(&probs, &dataset.y, trials as u64)
}

/// Midrank AUROC over grouped outcomes: `scores[i]` is shared by `y[i]`
/// positives and `trials − y[i]` negatives.
pub fn auroc_from_scores(scores: &[f64], y: &[u64], trials: u64) -> Result<f64, MetricsError> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let n_pos: u64 = y.iter().sum();
    let n_total = trials * y.len() as u64;
    let n_neg = n_total - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::UndefinedAuroc);
    }
    // Walk tied score groups, assigning the average rank to every outcome in
    // the group.
    let mut rank_sum_pos = 0.0f64;
    let mut consumed = 0u64;
    let mut g = 0usize;
    while g < idx.len() {
        let mut h = g;
        let mut group_total = 0u64;
        let mut group_pos = 0u64;
        while h < idx.len() && scores[idx[h]] == scores[idx[g]] {
            group_total += trials;
            group_pos += y[idx[h]];
            h += 1;
        }
        let avg_rank = consumed as f64 + (group_total as f64 + 1.0) / 2.0;
        rank_sum_pos += group_pos as f64 * avg_rank;
        consumed += group_total;
        g = h;
    }
    let auc =
        (rank_sum_pos - n_pos as f64 * (n_pos as f64 + 1.0) / 2.0) / (n_pos as f64 * n_neg as f64);
    Ok(auc)
}

/// Split rank-normalized R̂ and bulk effective sample size for one scalar
/// parameter.
#[derive(Debug, Clone, Copy)]
pub struct Diagnostics {
    pub rhat: f64,
    pub ess_bulk: f64,
}

/// Compute split rank-normalized R̂ and bulk ESS from per-chain draws.
pub fn rhat_ess(chains: &[Vec<f64>]) -> Result<Diagnostics, MetricsError> {
    if chains.len() < 2 {
        return Err(MetricsError::TooFewChains);
    }
    let len = chains.iter().map(Vec::len).min().unwrap_or(0);
    if len < 4 {
        return Err(MetricsError::TooShort(4));
    }
    let half = len / 2;
    let splits: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..half], &c[half..2 * half]])
        .collect();

    // Rank-normalize across all splits jointly (average ranks for ties, then
    // the normal quantile transform).
    let total = splits.len() * half;
    let mut pool: Vec<(f64, usize)> = Vec::with_capacity(total);
    for (si, s) in splits.iter().enumerate() {
        for (ti, &v) in s.iter().enumerate() {
            pool.push((v, si * half + ti));
        }
    }
    pool.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut ranks = vec![0.0f64; total];
    let mut i = 0;
    while i < total {
        let mut j = i;
        while j < total && pool[j].0 == pool[i].0 {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0; // mean of ranks i+1 ..= j
        for item in &pool[i..j] {
            ranks[item.1] = avg;
        }
        i = j;
    }
    let normal = Normal::new(0.0, 1.0).unwrap();
    let z: Vec<Vec<f64>> = (0..splits.len())
        .map(|si| {
            (0..half)
                .map(|ti| {
                    let r = ranks[si * half + ti];
                    normal.inverse_cdf((r - 0.375) / (total as f64 + 0.25))
                })
                .collect()
        })
        .collect();

    let m = z.len() as f64;
    let nf = half as f64;
    let means: Vec<f64> = z.iter().map(|s| s.iter().sum::<f64>() / nf).collect();
    let vars: Vec<f64> = z
        .iter()
        .zip(&means)
        .map(|(s, &mu)| s.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (nf - 1.0))
        .collect();
    let w = vars.iter().sum::<f64>() / m;
    let grand = means.iter().sum::<f64>() / m;
    let b = nf * means.iter().map(|v| (v - grand) * (v - grand)).sum::<f64>() / (m - 1.0);
    let var_plus = (nf - 1.0) / nf * w + b / nf;

    let rhat = if w > 0.0 {
        (var_plus / w).sqrt()
    } else if b > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };

    // Bulk ESS via Geyer's initial monotone positive sequence on the
    // rank-normalized splits.
    let ess = if w <= 0.0 {
        f64::NAN
    } else {
        let max_lag = half - 1;
        let mut rho = Vec::with_capacity(max_lag);
        for t in 1..max_lag {
            let mut acov_mean = 0.0;
            for (s, &mu) in z.iter().zip(&means) {
                let mut acc = 0.0;
                for i in 0..(half - t) {
                    acc += (s[i] - mu) * (s[i + t] - mu);
                }
                acov_mean += acc / nf;
            }
            acov_mean /= m;
            rho.push(1.0 - (w - acov_mean) / var_plus);
        }
        let mut tau = 1.0;
        let mut prev_pair = f64::INFINITY;
        let mut t = 0;
        while t + 1 < rho.len() {
            let pair = rho[t] + rho[t + 1];
            if pair <= 0.0 {
                break;
            }
            let capped = pair.min(prev_pair);
            tau += 2.0 * capped;
            prev_pair = capped;
            t += 2;
        }
        (m * nf / tau).min(m * nf * (m * nf).log10())
    };

    Ok(Diagnostics {
        rhat,
        ess_bulk: ess,
    })
}

/// Diagnostics for α and every hyperparameter of a posterior.
pub fn summarize_diagnostics(
    samples: &PosteriorSamples,
) -> Result<BTreeMap<String, Diagnostics>, MetricsError> {
    let mut out = BTreeMap::new();
    for name in samples.scalar_names() {
        let series = samples
            .scalar_series(&name)
            .ok_or_else(|| MetricsError::NumericalError(format!("missing series {name}")))?;
        out.insert(name, rhat_ess(&series)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{ChainDraws, SamplerMeta};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    /// Hand-build a PosteriorSamples carrying only component draws.
    fn samples_with_components(
        comps: Vec<BTreeMap<String, DenseMatrix>>,
        n_areas: usize,
    ) -> PosteriorSamples {
        let chains = comps
            .into_iter()
            .map(|components| {
                let draws = components.values().next().map_or(0, |m| m.rows());
                ChainDraws {
                    alpha: vec![0.0; draws],
                    hyper: BTreeMap::new(),
                    betas: BTreeMap::new(),
                    components,
                    loglik: DenseMatrix::zeros(draws, 0),
                    fitted_mean: vec![0.0; n_areas],
                    acceptance: BTreeMap::new(),
                }
            })
            .collect();
        PosteriorSamples {
            n_areas,
            likelihood: Likelihood::Poisson,
            chains,
            meta: SamplerMeta {
                seed: 0,
                chains: 1,
                iterations: 0,
                burn_in: 0,
                thin: 1,
                adaptation_stalled: vec![],
            },
        }
    }

    #[test]
    fn proportion_zero_term() {
        let n = 5;
        let mut comps = BTreeMap::new();
        comps.insert("u".to_string(), DenseMatrix::zeros(3, n));
        let mut v = DenseMatrix::zeros(0, n);
        for d in 0..3 {
            let row: Vec<f64> = (0..n).map(|i| (i + d) as f64).collect();
            v.push_row(&row);
        }
        comps.insert("v".to_string(), v);
        let s = samples_with_components(vec![comps], n);
        let vd = variance_decomposition(&s).unwrap();
        assert_eq!(vd.terms["u"].mean, 0.0);
        assert!((vd.terms["v"].mean - 1.0).abs() < 1e-12);
        assert_eq!(vd.flagged_draws, 0);
    }

    #[test]
    fn proportion_doubled_variable_is_quarter() {
        // v = u pointwise: var(u)/var(u+v) = var(u)/var(2u) = 0.25.
        let n = 6;
        let mut u = DenseMatrix::zeros(0, n);
        u.push_row(&[1.0, 2.0, 4.0, 8.0, 16.0, 32.0]);
        let mut comps = BTreeMap::new();
        comps.insert("u".to_string(), u.clone());
        comps.insert("v".to_string(), u);
        let s = samples_with_components(vec![comps], n);
        let vd = variance_decomposition(&s).unwrap();
        assert!((vd.terms["u"].mean - 0.25).abs() < 1e-12);
        assert!((vd.terms["v"].mean - 0.25).abs() < 1e-12);
    }

    #[test]
    fn proportion_shift_invariance_and_zero_total_flagging() {
        let n = 4;
        let mut u1 = DenseMatrix::zeros(0, n);
        u1.push_row(&[0.0, 1.0, 2.0, 3.0]);
        let mut u2 = DenseMatrix::zeros(0, n);
        u2.push_row(&[10.0, 11.0, 12.0, 13.0]); // same + constant
        let mut v = DenseMatrix::zeros(0, n);
        v.push_row(&[5.0, 3.0, 1.0, -1.0]);

        let mut c1 = BTreeMap::new();
        c1.insert("u".to_string(), u1);
        c1.insert("v".to_string(), v.clone());
        let mut c2 = BTreeMap::new();
        c2.insert("u".to_string(), u2);
        c2.insert("v".to_string(), v);
        let s1 = samples_with_components(vec![c1], n);
        let s2 = samples_with_components(vec![c2], n);
        let p1 = variance_decomposition(&s1).unwrap();
        let p2 = variance_decomposition(&s2).unwrap();
        assert!((p1.terms["u"].mean - p2.terms["u"].mean).abs() < 1e-12);

        // All-constant draw: total variance zero, flagged.
        let mut cu = BTreeMap::new();
        cu.insert("u".to_string(), {
            let mut m = DenseMatrix::zeros(0, n);
            m.push_row(&[2.0; 4]);
            m
        });
        cu.insert("v".to_string(), {
            let mut m = DenseMatrix::zeros(0, n);
            m.push_row(&[7.0; 4]);
            m
        });
        let s = samples_with_components(vec![cu], n);
        let vd = variance_decomposition(&s).unwrap();
        assert_eq!(vd.flagged_draws, 1);
        assert_eq!(vd.terms["u"].mean, 0.0);
    }

    #[test]
    fn waic_identical_draws_has_zero_penalty() {
        let n = 3;
        let mut ll = DenseMatrix::zeros(0, n);
        ll.push_row(&[-1.0, -2.0, -0.5]);
        ll.push_row(&[-1.0, -2.0, -0.5]);
        let w = waic(&ll).unwrap();
        assert!(w.p_waic.abs() < 1e-12);
        assert!((w.waic - -2.0 * (-3.5)).abs() < 1e-12);
    }

    #[test]
    fn waic_two_draw_hand_arithmetic() {
        // ll = (log 1/2, log 1/4): lppd = log(3/8), p_waic = (log 2)²/2.
        let mut ll = DenseMatrix::zeros(0, 1);
        ll.push_row(&[0.5f64.ln()]);
        ll.push_row(&[0.25f64.ln()]);
        let w = waic(&ll).unwrap();
        let lppd = 0.375f64.ln();
        let p = 2f64.ln().powi(2) / 2.0;
        assert!((w.lppd - lppd).abs() < 1e-12);
        assert!((w.p_waic - p).abs() < 1e-12);
        assert!((w.waic - -2.0 * (lppd - p)).abs() < 1e-12);
    }

    #[test]
    fn waic_rejects_nonfinite_and_single_draw() {
        let mut ll = DenseMatrix::zeros(0, 1);
        ll.push_row(&[f64::NEG_INFINITY]);
        ll.push_row(&[-1.0]);
        assert!(matches!(waic(&ll), Err(MetricsError::NumericalError(_))));
        let mut one = DenseMatrix::zeros(0, 1);
        one.push_row(&[-1.0]);
        assert!(matches!(waic(&one), Err(MetricsError::TooShort(2))));
    }

    #[test]
    fn auroc_rank_formula_matches_brute_force() {
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let trials = 20u64;
        let y: Vec<u64> = (0..50).map(|_| rng.random_range(0..=trials)).collect();
        // Scores with deliberate ties.
        let scores: Vec<f64> = (0..50)
            .map(|_| (rng.random_range(0..10) as f64) / 10.0)
            .collect();
        let fast = auroc_from_scores(&scores, &y, trials).unwrap();
        // O(N²) pairwise comparison over expanded outcomes.
        let mut num = 0.0f64;
        let mut n_pos = 0u64;
        let mut n_neg = 0u64;
        for i in 0..50 {
            n_pos += y[i];
            n_neg += trials - y[i];
        }
        for i in 0..50 {
            for j in 0..50 {
                let pos = y[i] as f64;
                let neg = (trials - y[j]) as f64;
                let cmp = if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
                num += pos * neg * cmp;
            }
        }
        let brute = num / (n_pos as f64 * n_neg as f64);
        assert!((fast - brute).abs() < 1e-12, "{fast} vs {brute}");
    }

    #[test]
    fn auroc_perfect_and_tied() {
        // Perfect separation.
        let a = auroc_from_scores(&[0.9, 0.1], &[20, 0], 20).unwrap();
        assert!((a - 1.0).abs() < 1e-12);
        // Constant scores: all ties.
        let a = auroc_from_scores(&[0.5, 0.5], &[13, 4], 20).unwrap();
        assert!((a - 0.5).abs() < 1e-12);
        // One class only.
        assert!(matches!(
            auroc_from_scores(&[0.5, 0.5], &[20, 20], 20),
            Err(MetricsError::UndefinedAuroc)
        ));
    }

    #[test]
    fn auroc_invariant_under_monotone_transform() {
        let mut rng = ChaCha20Rng::seed_from_u64(19);
        let trials = 7u64;
        let y: Vec<u64> = (0..30).map(|_| rng.random_range(0..=trials)).collect();
        let scores: Vec<f64> = (0..30).map(|_| rng.random_range(0.01..0.99)).collect();
        let base = auroc_from_scores(&scores, &y, trials).unwrap();
        let logit: Vec<f64> = scores.iter().map(|p| (p / (1.0 - p)).ln()).collect();
        let cubed: Vec<f64> = scores.iter().map(|p| p * p * p).collect();
        assert!((auroc_from_scores(&logit, &y, trials).unwrap() - base).abs() < 1e-12);
        assert!((auroc_from_scores(&cubed, &y, trials).unwrap() - base).abs() < 1e-12);
    }

    fn iid_chains(n_chains: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n_chains)
            .map(|_| (0..len).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect()
    }

    #[test]
    fn rhat_near_one_for_iid_chains() {
        let d = rhat_ess(&iid_chains(4, 1000, 3)).unwrap();
        assert!(d.rhat > 0.99 && d.rhat < 1.01, "rhat {}", d.rhat);
    }

    #[test]
    fn rhat_diverges_for_constant_separated_chains() {
        let chains = vec![vec![1.0; 100], vec![2.0; 100]];
        let d = rhat_ess(&chains).unwrap();
        assert!(d.rhat > 2.0, "rhat {}", d.rhat);
    }

    #[test]
    fn ess_close_to_draw_count_for_iid() {
        let chains = iid_chains(4, 1000, 9);
        let d = rhat_ess(&chains).unwrap();
        let total = 4.0 * 1000.0;
        assert!(
            (d.ess_bulk - total).abs() / total < 0.2,
            "ess {} vs {total}",
            d.ess_bulk
        );
    }

    #[test]
    fn rhat_rejects_short_or_single_chain() {
        assert!(matches!(
            rhat_ess(&[vec![1.0, 2.0, 3.0, 4.0]]),
            Err(MetricsError::TooFewChains)
        ));
        assert!(matches!(
            rhat_ess(&[vec![1.0, 2.0], vec![1.0, 2.0]]),
            Err(MetricsError::TooShort(4))
        ));
    }
}
