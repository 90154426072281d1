//! Bayesian hierarchical model specification and MCMC fitting.
//!
//! Two model families share one engine: spline-structured models (one or more
//! thin-plate smooth terms plus an optional iid term, Poisson /
//! negative-binomial / binomial likelihoods) and the BYM2 baseline (scaled
//! ICAR plus iid under a single mixing parameter φ).
//!
//! The sampler is Metropolis-within-Gibbs: conjugate Gamma draws for the
//! smoothing and iid precisions, adaptive random-walk Metropolis in blocks of
//! at most 25 coefficients for everything else. Adaptation happens only
//! during burn-in. Chains run in parallel and are seeded by stream, so
//! results are bit-identical regardless of thread count.

mod engine;
mod sampler;

pub use sampler::{adaptive_scalar_chain, gamma_gibbs_draw};

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::numerics::{pseudo_inverse, DenseMatrix, NumericsError, SymmetricMatrix};
use crate::region::Region;
use crate::simgen::{Family, SimDataset};
use crate::smooth::SmoothBasis;

#[derive(Debug, Error)]
pub enum InferenceError {
    #[error("dimension mismatch: {0}")]
    DimensionError(String),
    #[error("incompatible model specification: {0}")]
    IncompatibleSpec(String),
    #[error("adjacency graph is disconnected")]
    DisconnectedGraph,
    #[error("invalid MCMC configuration: {0}")]
    InvalidConfig(String),
    #[error("posterior density not finite at initialization")]
    InitializationError,
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Observation likelihood of the fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Likelihood {
    Poisson,
    NegBinomial,
    Binomial { trials: u32 },
}

impl Likelihood {
    pub fn label(&self) -> &'static str {
        match self {
            Likelihood::Poisson => "poisson",
            Likelihood::NegBinomial => "negbinomial",
            Likelihood::Binomial { .. } => "binomial",
        }
    }

    pub fn has_offset(&self) -> bool {
        !matches!(self, Likelihood::Binomial { .. })
    }
}

/// Hyperprior configuration. Defaults follow the `jagam` convention for the
/// smoothing precisions; everything is overridable.
#[derive(Debug, Clone)]
pub struct PriorConfig {
    /// α ~ N(0, alpha_sd²)
    pub alpha_sd: f64,
    /// λ₀, λ₁ ~ Gamma(shape, rate)
    pub lambda_shape: f64,
    pub lambda_rate: f64,
    /// iid precision 1/σ_v² ~ Gamma(shape, rate)
    pub iid_shape: f64,
    pub iid_rate: f64,
    /// Negative-binomial dispersion θ ~ Exponential(rate)
    pub dispersion_rate: f64,
    /// BYM2 total precision τ² ~ Gamma(shape, rate); φ ~ Uniform(0, 1)
    pub bym2_tau_shape: f64,
    pub bym2_tau_rate: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            alpha_sd: 100.0,
            lambda_shape: 0.05,
            lambda_rate: 0.005,
            iid_shape: 1.0,
            iid_rate: 5e-5,
            dispersion_rate: 0.01,
            bym2_tau_shape: 1.0,
            bym2_tau_rate: 5e-4,
        }
    }
}

impl PriorConfig {
    fn validate(&self) -> Result<(), InferenceError> {
        let all = [
            self.alpha_sd,
            self.lambda_shape,
            self.lambda_rate,
            self.iid_shape,
            self.iid_rate,
            self.dispersion_rate,
            self.bym2_tau_shape,
            self.bym2_tau_rate,
        ];
        if all.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(InferenceError::InvalidConfig(
                "all prior hyperparameters must be strictly positive".into(),
            ));
        }
        Ok(())
    }
}

/// Structured baseline alternative to the spline terms.
#[derive(Debug, Clone, PartialEq)]
pub enum Baseline {
    None,
    /// Scaled-ICAR + iid mixture over the region adjacency graph.
    Bym2 {
        scaling: f64,
    },
}

/// A validated model ready for sampling.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub likelihood: Likelihood,
    /// log ξ_i per area; `None` for binomial models.
    pub offsets: Option<Vec<f64>>,
    pub terms: Vec<Arc<SmoothBasis>>,
    pub include_iid: bool,
    pub baseline: Baseline,
    pub priors: PriorConfig,
    pub n: usize,
}

/// Options accepted by [`build_model`].
#[derive(Debug, Clone)]
pub struct ModelOptions {
    pub include_iid: bool,
    /// Override the likelihood implied by the dataset family (e.g. fit
    /// negative-binomial to Poisson-family counts).
    pub likelihood: Option<Likelihood>,
    pub priors: PriorConfig,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self {
            include_iid: true,
            likelihood: None,
            priors: PriorConfig::default(),
        }
    }
}

/// Validate and assemble a spline-structured model for a dataset.
pub fn build_model(
    dataset: &SimDataset,
    terms: Vec<Arc<SmoothBasis>>,
    options: ModelOptions,
) -> Result<ModelSpec, InferenceError> {
    options.priors.validate()?;
    let n = dataset.region.len();
    for t in &terms {
        if t.num_points() != n {
            return Err(InferenceError::DimensionError(format!(
                "term `{}` has {} rows for {} areas",
                t.label(),
                t.num_points(),
                n
            )));
        }
    }
    {
        let mut seen = std::collections::BTreeSet::new();
        for t in &terms {
            if !seen.insert(t.label().to_string()) {
                return Err(InferenceError::IncompatibleSpec(format!(
                    "duplicate smooth term label `{}`",
                    t.label()
                )));
            }
            if t.label() == "iid" {
                return Err(InferenceError::IncompatibleSpec(
                    "`iid` is reserved for the unstructured term".into(),
                ));
            }
        }
    }
    if terms.is_empty() && !options.include_iid {
        return Err(InferenceError::IncompatibleSpec(
            "model needs at least one random term".into(),
        ));
    }
    let likelihood = match options.likelihood {
        Some(l) => l,
        None => match dataset.family {
            Family::Poisson => Likelihood::Poisson,
            Family::Binomial => Likelihood::Binomial {
                trials: dataset.trials,
            },
        },
    };
    if let Likelihood::Binomial { trials } = likelihood {
        if trials == 0 {
            return Err(InferenceError::InvalidConfig(
                "binomial needs trials >= 1".into(),
            ));
        }
        if let Some(&bad) = dataset.y.iter().find(|&&y| y > trials as u64) {
            return Err(InferenceError::DimensionError(format!(
                "count {bad} exceeds {trials} trials"
            )));
        }
    }
    let offsets = likelihood
        .has_offset()
        .then(|| dataset.region.log_offsets());
    Ok(ModelSpec {
        likelihood,
        offsets,
        terms,
        include_iid: options.include_iid,
        baseline: Baseline::None,
        priors: options.priors,
        n,
    })
}

/// Sampling schedule.
#[derive(Debug, Clone, Copy)]
pub struct McmcOptions {
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
}

impl McmcOptions {
    fn validate(&self) -> Result<(), InferenceError> {
        if self.chains == 0 {
            return Err(InferenceError::InvalidConfig(
                "need at least one chain".into(),
            ));
        }
        if self.iterations <= self.burn_in {
            return Err(InferenceError::InvalidConfig(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(InferenceError::InvalidConfig("thin must be >= 1".into()));
        }
        Ok(())
    }

    pub fn retained_per_chain(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }
}

/// Per-chain retained draws.
#[derive(Debug, Clone)]
pub struct ChainDraws {
    pub alpha: Vec<f64>,
    /// Hyperparameter series keyed by name, e.g. `lambda1[distance]`,
    /// `iid_precision`, `dispersion`, `phi`, `tau_precision`.
    pub hyper: BTreeMap<String, Vec<f64>>,
    /// Spline coefficients per term: draws × K.
    pub betas: BTreeMap<String, DenseMatrix>,
    /// Pointwise random-term values per label (incl. `iid` /
    /// `structured` / `unstructured`): draws × n.
    pub components: BTreeMap<String, DenseMatrix>,
    /// Pointwise log-likelihood: draws × n.
    pub loglik: DenseMatrix,
    /// Posterior mean of E(y_i), accumulated over retained draws.
    pub fitted_mean: Vec<f64>,
    /// Post-burn-in acceptance rates per update group.
    pub acceptance: BTreeMap<String, f64>,
}

/// Sampler run metadata.
#[derive(Debug, Clone)]
pub struct SamplerMeta {
    pub seed: u64,
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Update groups whose adaptation saw an all-rejected window (reported,
    /// not fatal).
    pub adaptation_stalled: Vec<String>,
}

/// Posterior draws from all chains plus run metadata.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub n_areas: usize,
    pub likelihood: Likelihood,
    pub chains: Vec<ChainDraws>,
    pub meta: SamplerMeta,
}

impl PosteriorSamples {
    pub fn n_draws_total(&self) -> usize {
        self.chains.iter().map(|c| c.alpha.len()).sum()
    }

    /// Labels of the stored pointwise random-term components.
    pub fn component_labels(&self) -> Vec<String> {
        self.chains
            .first()
            .map(|c| c.components.keys().cloned().collect())
            .unwrap_or_default()
    }

    /// Posterior mean of E(y_i), averaged over chains.
    pub fn fitted_mean(&self) -> Vec<f64> {
        let n = self.n_areas;
        let mut out = vec![0.0; n];
        for c in &self.chains {
            for (o, f) in out.iter_mut().zip(&c.fitted_mean) {
                *o += f;
            }
        }
        let k = self.chains.len().max(1) as f64;
        for o in &mut out {
            *o /= k;
        }
        out
    }

    /// A named scalar series per chain; `alpha` or any hyperparameter name.
    pub fn scalar_series(&self, name: &str) -> Option<Vec<Vec<f64>>> {
        if name == "alpha" {
            return Some(self.chains.iter().map(|c| c.alpha.clone()).collect());
        }
        let mut out = Vec::with_capacity(self.chains.len());
        for c in &self.chains {
            out.push(c.hyper.get(name)?.clone());
        }
        Some(out)
    }

    pub fn scalar_names(&self) -> Vec<String> {
        let mut names = vec!["alpha".to_string()];
        if let Some(c) = self.chains.first() {
            names.extend(c.hyper.keys().cloned());
        }
        names
    }

    /// Pool the pointwise log-likelihood matrices of all chains.
    pub fn pooled_loglik(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(0, self.n_areas);
        for c in &self.chains {
            for r in 0..c.loglik.rows() {
                out.push_row(c.loglik.row(r));
            }
        }
        out
    }
}

/// ICAR scaling factor: the geometric mean of the marginal variances of the
/// unscaled ICAR field (the diagonal of the generalized inverse of
/// Q = diag(rowsums) − W under the sum-to-zero constraint). Dividing the
/// field by √factor gives typical marginal variance 1, making the BYM2 φ
/// interpretable as a variance fraction.
pub fn icar_scaling(adjacency: &SymmetricMatrix) -> Result<f64, InferenceError> {
    let n = adjacency.order();
    if n < 2 {
        return Err(InferenceError::InvalidConfig(
            "ICAR scaling needs at least two areas".into(),
        ));
    }
    // Connectivity via BFS on nonzero entries.
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = stack.pop() {
        for j in 0..n {
            if adjacency.get(i, j) != 0.0 && !seen[j] {
                seen[j] = true;
                count += 1;
                stack.push(j);
            }
        }
    }
    if count != n {
        return Err(InferenceError::DisconnectedGraph);
    }
    let q = SymmetricMatrix::from_fn(n, |i, j| {
        if i == j {
            adjacency.row(i).iter().sum::<f64>()
        } else {
            -adjacency.get(i, j)
        }
    });
    let qinv = pseudo_inverse(&q, 1e-10)?;
    let mut log_sum = 0.0;
    for i in 0..n {
        let d = qinv.get(i, i);
        if !(d > 0.0) {
            return Err(InferenceError::InvalidConfig(format!(
                "nonpositive marginal variance {d} at area {i}"
            )));
        }
        log_sum += d.ln();
    }
    Ok((log_sum / n as f64).exp())
}

/// Run the MCMC sampler for a spline-structured or BYM2 model. Chains run in
/// parallel; given (seed, chains) the output is independent of thread count.
pub fn run_mcmc(
    model: &ModelSpec,
    dataset: &SimDataset,
    opts: McmcOptions,
) -> Result<PosteriorSamples, InferenceError> {
    opts.validate()?;
    model.priors.validate()?;
    if dataset.y.len() != model.n {
        return Err(InferenceError::DimensionError(format!(
            "{} observations for {} areas",
            dataset.y.len(),
            model.n
        )));
    }
    if matches!(model.baseline, Baseline::Bym2 { .. }) && !model.terms.is_empty() {
        return Err(InferenceError::IncompatibleSpec(
            "the BYM2 baseline and smooth terms are alternatives, not combinable".into(),
        ));
    }

    let chains: Vec<Result<ChainDraws, InferenceError>> = (0..opts.chains)
        .into_par_iter()
        .map(|chain_idx| engine::run_chain(model, dataset, &opts, chain_idx))
        .collect();
    let mut done = Vec::with_capacity(opts.chains);
    let mut stalled = Vec::new();
    for c in chains {
        done.push(c?);
    }
    for (i, c) in done.iter().enumerate() {
        for key in c.acceptance.keys() {
            if key.starts_with("stalled:") {
                stalled.push(format!("chain {i} {}", &key[8..]));
            }
        }
    }
    Ok(PosteriorSamples {
        n_areas: model.n,
        likelihood: model.likelihood,
        chains: done,
        meta: SamplerMeta {
            seed: opts.seed,
            chains: opts.chains,
            iterations: opts.iterations,
            burn_in: opts.burn_in,
            thin: opts.thin,
            adaptation_stalled: stalled,
        },
    })
}

/// Fit the BYM2 baseline on the region's adjacency graph with the same
/// engine. The ICAR term is scaled by [`icar_scaling`] and constrained to
/// sum to zero; the posterior of φ is reported directly.
pub fn fit_bym2(
    dataset: &SimDataset,
    region: &Region,
    priors: PriorConfig,
    opts: McmcOptions,
) -> Result<PosteriorSamples, InferenceError> {
    if region.len() != dataset.y.len() {
        return Err(InferenceError::DimensionError(format!(
            "{} observations for {} areas",
            dataset.y.len(),
            region.len()
        )));
    }
    if !region.is_connected() {
        return Err(InferenceError::DisconnectedGraph);
    }
    let scaling = icar_scaling(region.adjacency())?;
    let likelihood = match dataset.family {
        Family::Poisson => Likelihood::Poisson,
        Family::Binomial => Likelihood::Binomial {
            trials: dataset.trials,
        },
    };
    let offsets = likelihood.has_offset().then(|| region.log_offsets());
    let model = ModelSpec {
        likelihood,
        offsets,
        terms: Vec::new(),
        include_iid: false,
        baseline: Baseline::Bym2 { scaling },
        priors,
        n: region.len(),
    };
    run_mcmc(&model, dataset, opts)
}

/// Export posterior draws: one CSV per chain (flattened parameter columns)
/// plus a metadata text file. Returns the written paths.
pub fn export_posterior_csv(
    samples: &PosteriorSamples,
    dir: &std::path::Path,
    stem: &str,
) -> std::io::Result<Vec<std::path::PathBuf>> {
    use std::io::Write;
    std::fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (ci, chain) in samples.chains.iter().enumerate() {
        let path = dir.join(format!("{stem}_chain{ci}.csv"));
        let mut out = std::io::BufWriter::new(std::fs::File::create(&path)?);
        let mut cols: Vec<String> = vec!["alpha".into()];
        for (label, m) in &chain.betas {
            for j in 0..m.cols() {
                cols.push(format!("beta[{label}][{j}]"));
            }
        }
        if let Some(v) = chain.components.get("iid") {
            for j in 0..v.cols() {
                cols.push(format!("v[{j}]"));
            }
        }
        for name in chain.hyper.keys() {
            cols.push(name.clone());
        }
        writeln!(out, "{}", cols.join(","))?;
        let draws = chain.alpha.len();
        for d in 0..draws {
            let mut first = true;
            let mut cell =
                |out: &mut std::io::BufWriter<std::fs::File>, v: f64| -> std::io::Result<()> {
                    if first {
                        first = false;
                    } else {
                        write!(out, ",")?;
                    }
                    write!(out, "{v}")
                };
            cell(&mut out, chain.alpha[d])?;
            for m in chain.betas.values() {
                for j in 0..m.cols() {
                    cell(&mut out, m.get(d, j))?;
                }
            }
            if let Some(v) = chain.components.get("iid") {
                for j in 0..v.cols() {
                    cell(&mut out, v.get(d, j))?;
                }
            }
            for series in chain.hyper.values() {
                cell(&mut out, series[d])?;
            }
            writeln!(out)?;
        }
        paths.push(path);
    }
    let meta_path = dir.join(format!("{stem}_meta.txt"));
    let mut out = std::io::BufWriter::new(std::fs::File::create(&meta_path)?);
    writeln!(out, "seed = {}", samples.meta.seed)?;
    writeln!(out, "chains = {}", samples.meta.chains)?;
    writeln!(out, "iterations = {}", samples.meta.iterations)?;
    writeln!(out, "burn_in = {}", samples.meta.burn_in)?;
    writeln!(out, "thin = {}", samples.meta.thin)?;
    for (ci, chain) in samples.chains.iter().enumerate() {
        for (group, rate) in &chain.acceptance {
            if !group.starts_with("stalled:") {
                writeln!(out, "acceptance[chain{ci}][{group}] = {rate:.4}")?;
            }
        }
    }
    if samples.meta.adaptation_stalled.is_empty() {
        writeln!(out, "adaptation_stalled = none")?;
    } else {
        writeln!(
            out,
            "adaptation_stalled = {}",
            samples.meta.adaptation_stalled.join("; ")
        )?;
    }
    paths.push(meta_path);
    Ok(paths)
}
