//! Experiment configuration: a line-oriented `key = value` format with
//! `[section]` headers, parseable without dependencies from any language.
//! Unknown keys are rejected so typos fail loudly.

use std::collections::BTreeMap;
use std::path::PathBuf;

use thiserror::Error;

use crate::connectivity::FlowTransform;
use crate::inference::McmcOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {0}: {1}")]
    Syntax(usize, String),
    #[error("unknown key `{0}` in section [{1}]")]
    UnknownKey(String, String),
    #[error("missing required key `{0}` in section [{1}]")]
    MissingKey(String, String),
    #[error("invalid value for `{key}`: {msg}")]
    InvalidValue { key: String, msg: String },
    #[error("unknown study `{0}`")]
    UnknownStudy(String),
    #[error("{0}")]
    Invalid(String),
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
}

/// The experiment families the runner reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Study {
    /// Single distance-based source, Poisson counts, spline vs BYM2.
    Sim1Distance,
    /// Single movement-based source, Poisson counts, spline only.
    Sim1Movement,
    /// Distance + movement + iid mixture, Poisson counts, two-smooth model.
    Sim2Dual,
    /// Single distance-based source, binomial events, spline vs BYM2.
    Sim3Binomial,
    /// Distance + movement + iid mixture, binomial events, two-smooth model.
    Sim4BinomialDual,
    /// Negative-binomial fit over user counts or a synthetic overdispersed
    /// dataset, with distance and movement terms.
    CaseStudy,
}

impl Study {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sim1-distance" => Some(Self::Sim1Distance),
            "sim1-movement" => Some(Self::Sim1Movement),
            "sim2-dual" => Some(Self::Sim2Dual),
            "sim3-binomial" => Some(Self::Sim3Binomial),
            "sim4-binomial-dual" => Some(Self::Sim4BinomialDual),
            "casestudy" => Some(Self::CaseStudy),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sim1Distance => "sim1-distance",
            Self::Sim1Movement => "sim1-movement",
            Self::Sim2Dual => "sim2-dual",
            Self::Sim3Binomial => "sim3-binomial",
            Self::Sim4BinomialDual => "sim4-binomial-dual",
            Self::CaseStudy => "casestudy",
        }
    }

    pub fn is_dual(&self) -> bool {
        matches!(self, Self::Sim2Dual | Self::Sim4BinomialDual)
    }

    pub fn is_binomial(&self) -> bool {
        matches!(self, Self::Sim3Binomial | Self::Sim4BinomialDual)
    }

    pub fn fits_bym2(&self) -> bool {
        matches!(self, Self::Sim1Distance | Self::Sim3Binomial)
    }

    pub fn needs_movement(&self) -> bool {
        matches!(
            self,
            Self::Sim1Movement | Self::Sim2Dual | Self::Sim4BinomialDual | Self::CaseStudy
        )
    }

    /// The paper-fixed iid weight for the dual studies.
    pub fn fixed_iid_weight(&self) -> Option<f64> {
        match self {
            Self::Sim2Dual => Some(0.1),
            Self::Sim4BinomialDual => Some(0.2),
            _ => None,
        }
    }

    fn default_phi_grid(&self) -> Vec<f64> {
        match self {
            // 11 datasets, φ from 0 to 1 at intervals of 0.1.
            Self::Sim1Distance | Self::Sim1Movement | Self::Sim3Binomial => {
                (0..=10).map(|i| i as f64 / 10.0).collect()
            }
            // φ1 from 0 to 0.9, φ2 = 0.9 − φ1, 10 datasets.
            Self::Sim2Dual => (0..=9).map(|i| i as f64 / 10.0).collect(),
            // φ1 from 0 to 0.8, φ2 = 0.8 − φ1, 9 datasets.
            Self::Sim4BinomialDual => (0..=8).map(|i| i as f64 / 10.0).collect(),
            Self::CaseStudy => vec![],
        }
    }
}

/// Where the region comes from.
#[derive(Debug, Clone)]
pub enum RegionSource {
    Grid { rows: usize, cols: usize, pop_min: f64, pop_max: f64 },
    Csv { units: PathBuf, adjacency: PathBuf },
}

/// Fully resolved experiment configuration.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub study: Study,
    pub output: PathBuf,
    pub seed: u64,
    pub region: RegionSource,
    /// φ for the single-source studies, φ₁ for the dual studies.
    pub phi_grid: Vec<f64>,
    pub alpha: f64,
    pub trials: u32,
    pub iid_weight: f64,
    /// Case-study synthetic overdispersion when no counts file is given.
    pub theta: f64,
    pub counts_csv: Option<PathBuf>,
    pub knots: usize,
    pub gamma: f64,
    pub transform: FlowTransform,
    pub flows_csv: Option<PathBuf>,
    pub mcmc: McmcOptions,
}

impl ExperimentConfig {
    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, BTreeMap<String, (usize, String)>> = BTreeMap::new();
        let mut current = String::from("experiment");
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax(line_no, "unclosed section header".into()))?;
                current = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::Syntax(line_no, format!("expected `key = value`, got `{line}`"))
            })?;
            sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_string(), (line_no, value.trim().to_string()));
        }

        let known_sections = ["experiment", "region", "simulation", "smooth", "connectivity", "mcmc"];
        for s in sections.keys() {
            if !known_sections.contains(&s.as_str()) {
                return Err(ConfigError::UnknownKey("(section)".into(), s.clone()));
            }
        }

        let mut take = |section: &str, key: &str| -> Option<String> {
            sections.get_mut(section).and_then(|m| m.remove(key)).map(|(_, v)| v)
        };

        fn parse_num<T: std::str::FromStr>(key: &str, v: String) -> Result<T, ConfigError> {
            v.parse().map_err(|_| ConfigError::InvalidValue {
                key: key.into(),
                msg: format!("`{v}` is not a valid number"),
            })
        }

        let study_raw = take("experiment", "study")
            .ok_or_else(|| ConfigError::MissingKey("study".into(), "experiment".into()))?;
        let study =
            Study::parse(&study_raw).ok_or(ConfigError::UnknownStudy(study_raw.clone()))?;
        let output = PathBuf::from(take("experiment", "output").unwrap_or_else(|| "out".into()));
        let seed: u64 = match take("experiment", "seed") {
            Some(v) => parse_num("seed", v)?,
            None => 20240811,
        };

        let source = take("region", "source").unwrap_or_else(|| "grid".into());
        let region = match source.as_str() {
            "grid" => {
                let rows = match take("region", "rows") {
                    Some(v) => parse_num("rows", v)?,
                    None => 20,
                };
                let cols = match take("region", "cols") {
                    Some(v) => parse_num("cols", v)?,
                    None => 20,
                };
                let pop_min = match take("region", "pop_min") {
                    Some(v) => parse_num("pop_min", v)?,
                    None => 1e6,
                };
                let pop_max = match take("region", "pop_max") {
                    Some(v) => parse_num("pop_max", v)?,
                    None => 1e8,
                };
                RegionSource::Grid { rows, cols, pop_min, pop_max }
            }
            "csv" => {
                let units = take("region", "units_csv").ok_or_else(|| {
                    ConfigError::MissingKey("units_csv".into(), "region".into())
                })?;
                let adjacency = take("region", "adjacency_csv").ok_or_else(|| {
                    ConfigError::MissingKey("adjacency_csv".into(), "region".into())
                })?;
                RegionSource::Csv { units: units.into(), adjacency: adjacency.into() }
            }
            other => {
                return Err(ConfigError::InvalidValue {
                    key: "source".into(),
                    msg: format!("`{other}`; expected `grid` or `csv`"),
                })
            }
        };

        let phi_grid = match take("simulation", "phi_grid") {
            Some(v) => v
                .split(',')
                .map(|s| parse_num::<f64>("phi_grid", s.trim().to_string()))
                .collect::<Result<Vec<f64>, _>>()?,
            None => study.default_phi_grid(),
        };
        let alpha = match take("simulation", "alpha") {
            Some(v) => parse_num("alpha", v)?,
            None => 0.0,
        };
        let trials: u32 = match take("simulation", "trials") {
            Some(v) => parse_num("trials", v)?,
            None => 20,
        };
        let iid_weight = match take("simulation", "iid_weight") {
            Some(v) => parse_num("iid_weight", v)?,
            None => study.fixed_iid_weight().unwrap_or(0.0),
        };
        let theta = match take("simulation", "theta") {
            Some(v) => parse_num("theta", v)?,
            None => 2.0,
        };
        let counts_csv = take("simulation", "counts_csv").map(PathBuf::from);

        let knots: usize = match take("smooth", "knots") {
            Some(v) => parse_num("knots", v)?,
            None => 30,
        };

        let gamma = match take("connectivity", "gamma") {
            Some(v) => parse_num("gamma", v)?,
            None => 2.0,
        };
        let transform = match take("connectivity", "transform") {
            Some(v) => FlowTransform::parse(&v).ok_or_else(|| ConfigError::InvalidValue {
                key: "transform".into(),
                msg: format!("`{v}`; expected reciprocal, one-minus or neg-log"),
            })?,
            None => FlowTransform::Reciprocal,
        };
        let flows_csv = take("connectivity", "flows_csv").map(PathBuf::from);

        let chains: usize = match take("mcmc", "chains") {
            Some(v) => parse_num("chains", v)?,
            None => 2,
        };
        let iterations: usize = match take("mcmc", "iterations") {
            Some(v) => parse_num("iterations", v)?,
            None => 5000,
        };
        let burn_in: usize = match take("mcmc", "burn_in") {
            Some(v) => parse_num("burn_in", v)?,
            None => 2000,
        };
        let thin: usize = match take("mcmc", "thin") {
            Some(v) => parse_num("thin", v)?,
            None => 1,
        };

        // Anything left over is a typo.
        for (section, keys) in &sections {
            if let Some((key, (line, _))) = keys.iter().next() {
                let _ = line;
                return Err(ConfigError::UnknownKey(key.clone(), section.clone()));
            }
        }

        let config = ExperimentConfig {
            study,
            output,
            seed,
            region,
            phi_grid,
            alpha,
            trials,
            iid_weight,
            theta,
            counts_csv,
            knots,
            gamma,
            transform,
            flows_csv,
            mcmc: McmcOptions { chains, iterations, burn_in, thin, seed },
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for &p in &self.phi_grid {
            if !(0.0..=1.0).contains(&p) {
                return Err(ConfigError::Invalid(format!(
                    "phi grid entry {p} outside [0, 1]"
                )));
            }
        }
        if let Some(w) = self.study.fixed_iid_weight() {
            if (self.iid_weight - w).abs() > 1e-12 {
                return Err(ConfigError::Invalid(format!(
                    "study {} fixes the iid weight at {w}, got {}",
                    self.study.name(),
                    self.iid_weight
                )));
            }
            for &p in &self.phi_grid {
                if p > 1.0 - w + 1e-12 {
                    return Err(ConfigError::Invalid(format!(
                        "phi1 entry {p} exceeds 1 − iid weight = {}",
                        1.0 - w
                    )));
                }
            }
        }
        if self.study.is_dual() && self.phi_grid.is_empty() {
            return Err(ConfigError::Invalid("dual study needs a phi grid".into()));
        }
        if self.knots < 4 {
            return Err(ConfigError::Invalid(format!(
                "need at least 4 knots, got {}",
                self.knots
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(ConfigError::Invalid(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.mcmc.iterations <= self.mcmc.burn_in {
            return Err(ConfigError::Invalid(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.mcmc.iterations, self.mcmc.burn_in
            )));
        }
        if self.mcmc.chains == 0 || self.mcmc.thin == 0 {
            return Err(ConfigError::Invalid("chains and thin must be >= 1".into()));
        }
        if self.study.is_binomial() && self.trials == 0 {
            return Err(ConfigError::Invalid("binomial studies need trials >= 1".into()));
        }
        if self.study == Study::CaseStudy && self.counts_csv.is_none() && !(self.theta > 0.0) {
            return Err(ConfigError::Invalid(
                "case study without counts_csv needs theta > 0 for synthetic data".into(),
            ));
        }
        Ok(())
    }

    /// Echo as config text (the manifest embeds this).
    pub fn echo(&self) -> String {
        let mut s = String::new();
        use std::fmt::Write;
        let _ = writeln!(s, "[experiment]");
        let _ = writeln!(s, "study = {}", self.study.name());
        let _ = writeln!(s, "output = {}", self.output.display());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "[region]");
        match &self.region {
            RegionSource::Grid { rows, cols, pop_min, pop_max } => {
                let _ = writeln!(s, "source = grid");
                let _ = writeln!(s, "rows = {rows}");
                let _ = writeln!(s, "cols = {cols}");
                let _ = writeln!(s, "pop_min = {pop_min}");
                let _ = writeln!(s, "pop_max = {pop_max}");
            }
            RegionSource::Csv { units, adjacency } => {
                let _ = writeln!(s, "source = csv");
                let _ = writeln!(s, "units_csv = {}", units.display());
                let _ = writeln!(s, "adjacency_csv = {}", adjacency.display());
            }
        }
        let _ = writeln!(s, "[simulation]");
        let _ = writeln!(
            s,
            "phi_grid = {}",
            self.phi_grid.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")
        );
        let _ = writeln!(s, "alpha = {}", self.alpha);
        if self.study.is_binomial() {
            let _ = writeln!(s, "trials = {}", self.trials);
        }
        if self.study.is_dual() {
            let _ = writeln!(s, "iid_weight = {}", self.iid_weight);
        }
        if self.study == Study::CaseStudy {
            let _ = writeln!(s, "theta = {}", self.theta);
            if let Some(p) = &self.counts_csv {
                let _ = writeln!(s, "counts_csv = {}", p.display());
            }
        }
        let _ = writeln!(s, "[smooth]");
        let _ = writeln!(s, "knots = {}", self.knots);
        let _ = writeln!(s, "[connectivity]");
        let _ = writeln!(s, "gamma = {}", self.gamma);
        if let Some(p) = &self.flows_csv {
            let _ = writeln!(s, "flows_csv = {}", p.display());
        }
        let _ = writeln!(s, "[mcmc]");
        let _ = writeln!(s, "chains = {}", self.mcmc.chains);
        let _ = writeln!(s, "iterations = {}", self.mcmc.iterations);
        let _ = writeln!(s, "burn_in = {}", self.mcmc.burn_in);
        let _ = writeln!(s, "thin = {}", self.mcmc.thin);
        s
    }
}
