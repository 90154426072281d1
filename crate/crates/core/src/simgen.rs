//! Synthetic dataset generation: the two-bump benchmark surface, latent
//! fields mixing smooth components with iid noise by square-root weights, and
//! Poisson / binomial observation draws.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Binomial, Distribution, Gamma, Poisson, StandardNormal};
use thiserror::Error;

use crate::region::Region;
use crate::smooth::ConnectivityCoords;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid mixing weights: {0}")]
    InvalidMixing(String),
    #[error("linear predictor overflow at area {0}: alpha + S = {1}")]
    FieldOverflow(usize, f64),
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("binomial family requires trials >= 1")]
    InvalidTrials,
    #[error("duplicate component label `{0}`")]
    DuplicateLabel(String),
    #[error("counts file error: {0}")]
    CountsFile(String),
}

/// Observation family for simulated data.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Poisson,
    Binomial,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::Poisson => "poisson",
            Family::Binomial => "binomial",
        }
    }
}

/// Latent per-area field assembled from weighted components. Component
/// values are stored unweighted; `values` is the √φ-weighted pointwise sum.
#[derive(Debug, Clone)]
pub struct LatentField {
    pub values: Vec<f64>,
    pub components: BTreeMap<String, Vec<f64>>,
    pub phis: BTreeMap<String, f64>,
}

/// The fixed two-bump benchmark surface evaluated at a coordinate pair.
pub fn sm_surface(x: f64, z: f64) -> f64 {
    const SX: f64 = 0.3;
    const SZ: f64 = 0.4;
    let bump1 =
        1.2 * (-(x - 0.2) * (x - 0.2) / (SX * SX) - (z - 0.3) * (z - 0.3) / (SZ * SZ)).exp();
    let bump2 =
        0.8 * (-(x - 0.7) * (x - 0.7) / (SX * SX) - (z - 0.8) * (z - 0.8) / (SZ * SZ)).exp();
    std::f64::consts::PI * SX * SZ * (bump1 + bump2)
}

/// Build a latent field S = Σ_k √φ_k · component_k. One smooth component per
/// coordinate set (the surface evaluated there, centred to mean zero and
/// standardized to unit variance so the weights are true variance shares),
/// plus a final iid standard-normal component. `phis` lists one weight per
/// coordinate set followed by the iid weight; they must be nonnegative and
/// sum to 1 within 1e-12.
pub fn gen_latent_field(
    coord_sets: &[&ConnectivityCoords],
    phis: &[f64],
    seed: u64,
) -> Result<LatentField, SimError> {
    if phis.len() != coord_sets.len() + 1 {
        return Err(SimError::InvalidMixing(format!(
            "{} coordinate sets need {} weights, got {}",
            coord_sets.len(),
            coord_sets.len() + 1,
            phis.len()
        )));
    }
    if let Some(bad) = phis.iter().find(|&&p| !(p >= 0.0)) {
        return Err(SimError::InvalidMixing(format!("negative weight {bad}")));
    }
    let total: f64 = phis.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(SimError::InvalidMixing(format!("weights sum to {total}")));
    }
    let n = coord_sets.first().map_or(0, |c| c.len());
    for c in coord_sets {
        if c.len() != n {
            return Err(SimError::LengthMismatch(
                "coordinate sets have differing lengths".into(),
            ));
        }
    }

    let mut components = BTreeMap::new();
    let mut phi_map = BTreeMap::new();
    for (coords, &phi) in coord_sets.iter().zip(phis) {
        let label = coords.label().to_string();
        let mut vals: Vec<f64> = coords
            .points()
            .iter()
            .map(|p| sm_surface(p[0], p[1]))
            .collect();
        let nf = vals.len().max(1) as f64;
        let mean = vals.iter().sum::<f64>() / nf;
        for v in &mut vals {
            *v -= mean;
        }
        let sd = (vals.iter().map(|v| v * v).sum::<f64>() / nf).sqrt();
        if sd > 1e-12 {
            for v in &mut vals {
                *v /= sd;
            }
        }
        if components.insert(label.clone(), vals).is_some() {
            return Err(SimError::DuplicateLabel(label));
        }
        phi_map.insert(label, phi);
    }

    let n = if n == 0 { 0 } else { n };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let eps: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    if components.insert("iid".into(), eps).is_some() {
        return Err(SimError::DuplicateLabel("iid".into()));
    }
    phi_map.insert("iid".into(), *phis.last().unwrap());

    let mut values = vec![0.0; n];
    for (label, comp) in &components {
        let w = phi_map[label].sqrt();
        for (v, c) in values.iter_mut().zip(comp) {
            *v += w * c;
        }
    }
    Ok(LatentField {
        values,
        components,
        phis: phi_map,
    })
}

/// Simulated (or observed) counts with the generating truth attached.
#[derive(Debug, Clone)]
pub struct SimDataset {
    pub region: Arc<Region>,
    pub y: Vec<u64>,
    pub family: Family,
    pub trials: u32,
    pub truth: Option<LatentField>,
    pub alpha_true: Option<f64>,
}

impl SimDataset {
    /// Wrap observed counts (the case-study path). No truth is attached.
    pub fn from_observed(
        region: Arc<Region>,
        y: Vec<u64>,
        family: Family,
        trials: u32,
    ) -> Result<Self, SimError> {
        if y.len() != region.len() {
            return Err(SimError::LengthMismatch(format!(
                "{} counts for {} units",
                y.len(),
                region.len()
            )));
        }
        if family == Family::Binomial {
            if trials == 0 {
                return Err(SimError::InvalidTrials);
            }
            if let Some(bad) = y.iter().find(|&&v| v > trials as u64) {
                return Err(SimError::LengthMismatch(format!(
                    "count {bad} exceeds {trials} trials"
                )));
            }
        }
        Ok(Self {
            region,
            y,
            family,
            trials,
            truth: None,
            alpha_true: None,
        })
    }
}

/// Draw observations from the latent field: Poisson with rate ξ·exp(α + S),
/// or Binomial(trials, logistic(α + S)) with no offset.
pub fn gen_observations(
    region: &Arc<Region>,
    field: &LatentField,
    alpha: f64,
    family: Family,
    trials: u32,
    seed: u64,
) -> Result<SimDataset, SimError> {
    gen_observations_impl(region, field, alpha, family, trials, None, seed)
}

/// Poisson-gamma (marginally negative-binomial) draws: y ~ Poisson(μ·g) with
/// g ~ Gamma(θ, θ), so E[y] = μ and Var[y] = μ + μ²/θ.
pub fn gen_observations_poisson_gamma(
    region: &Arc<Region>,
    field: &LatentField,
    alpha: f64,
    theta: f64,
    seed: u64,
) -> Result<SimDataset, SimError> {
    gen_observations_impl(region, field, alpha, Family::Poisson, 0, Some(theta), seed)
}

fn gen_observations_impl(
    region: &Arc<Region>,
    field: &LatentField,
    alpha: f64,
    family: Family,
    trials: u32,
    overdispersion: Option<f64>,
    seed: u64,
) -> Result<SimDataset, SimError> {
    let n = region.len();
    if field.values.len() != n {
        return Err(SimError::LengthMismatch(format!(
            "field has {} values for {} units",
            field.values.len(),
            n
        )));
    }
    if family == Family::Binomial && trials == 0 {
        return Err(SimError::InvalidTrials);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(n);
    for (i, &s) in field.values.iter().enumerate() {
        let eta = alpha + s;
        if eta > 700.0 {
            return Err(SimError::FieldOverflow(i, eta));
        }
        match family {
            Family::Poisson => {
                let mut rate = region.offsets()[i] * eta.exp();
                if let Some(theta) = overdispersion {
                    let g: f64 = Gamma::new(theta, 1.0 / theta)
                        .map_err(|e| SimError::InvalidMixing(e.to_string()))?
                        .sample(&mut rng);
                    rate *= g;
                }
                let draw = if rate > 0.0 {
                    Poisson::new(rate)
                        .map_err(|e| SimError::FieldOverflow(i, f64::from_bits(e as u64 as u64)))
                        .map(|p| p.sample(&mut rng))
                        .unwrap_or(0.0)
                } else {
                    0.0
                };
                y.push(draw as u64);
            }
            Family::Binomial => {
                let p = 1.0 / (1.0 + (-eta).exp());
                let draw = Binomial::new(trials as u64, p)
                    .map_err(|_| SimError::InvalidTrials)?
                    .sample(&mut rng);
                y.push(draw);
            }
        }
    }
    Ok(SimDataset {
        region: Arc::clone(region),
        y,
        family,
        trials,
        truth: Some(field.clone()),
        alpha_true: Some(alpha),
    })
}

/// Export a dataset as CSV: `id,y,offset,S_true,component_*` with component
/// columns in sorted label order.
pub fn write_dataset_csv(ds: &SimDataset, path: &Path) -> std::io::Result<()> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let labels: Vec<&String> = ds
        .truth
        .as_ref()
        .map(|t| t.components.keys().collect())
        .unwrap_or_default();
    write!(out, "id,y,offset,S_true")?;
    for l in &labels {
        write!(out, ",component_{l}")?;
    }
    writeln!(out)?;
    for (i, unit) in ds.region.units().iter().enumerate() {
        let s = ds.truth.as_ref().map_or(f64::NAN, |t| t.values[i]);
        write!(
            out,
            "{},{},{},{}",
            unit.id,
            ds.y[i],
            ds.region.offsets()[i],
            s
        )?;
        if let Some(t) = &ds.truth {
            for l in &labels {
                write!(out, ",{}", t.components[*l][i])?;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Read observed counts from a CSV with header `id,y`, returned in region
/// unit order. Every unit must be covered exactly once.
pub fn load_counts_csv(path: &Path, region: &Region) -> Result<Vec<u64>, SimError> {
    let err = |msg: String| SimError::CountsFile(format!("{}: {msg}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.iter().map(str::trim).ne(["id", "y"]) {
        return Err(err(format!(
            "expected header `id,y`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let index_of: std::collections::HashMap<u64, usize> = region
        .units()
        .iter()
        .enumerate()
        .map(|(i, u)| (u.id, i))
        .collect();
    let mut y: Vec<Option<u64>> = vec![None; region.len()];
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| err(e.to_string()))?;
        let id: u64 = record
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| err(format!("line {line}: bad id")))?;
        let count: u64 = record
            .get(1)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| err(format!("line {line}: bad count")))?;
        let idx = *index_of
            .get(&id)
            .ok_or_else(|| err(format!("line {line}: unknown unit id {id}")))?;
        if y[idx].replace(count).is_some() {
            return Err(err(format!("line {line}: duplicate count for id {id}")));
        }
    }
    y.into_iter()
        .enumerate()
        .map(|(i, v)| {
            v.ok_or_else(|| {
                err(format!(
                    "missing count for unit id {}",
                    region.units()[i].id
                ))
            })
        })
        .collect()
}
