//! Areal study geography: units with centroids and populations, a binary
//! adjacency graph, and per-unit offsets (population / 100 000).
//!
//! Regions come from two places: a synthetic rook-adjacency lattice for the
//! simulation studies, or a pair of user CSV files for real data.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::numerics::SymmetricMatrix;
use crate::smooth::ConnectivityCoords;

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("region too small: need at least a 2x2 lattice")]
    RegionTooSmall,
    #[error("invalid population range: min {0}, max {1}")]
    InvalidPopulationRange(f64, f64),
    #[error("duplicate unit id {0}")]
    DuplicateId(u64),
    #[error("adjacency error: {0}")]
    AdjacencyError(String),
    #[error("adjacency graph is disconnected")]
    DisconnectedGraph,
    #[error("degenerate centroid axis {0}: all values equal")]
    DegenerateAxis(char),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },
}

/// One areal unit (a municipality analogue).
#[derive(Debug, Clone, PartialEq)]
pub struct AreaUnit {
    pub id: u64,
    pub centroid_x: f64,
    pub centroid_y: f64,
    pub population: f64,
}

/// The study geography. Immutable after construction; safe to share across
/// MCMC chains.
#[derive(Debug, Clone)]
pub struct Region {
    units: Vec<AreaUnit>,
    adjacency: SymmetricMatrix,
    neighbors: Vec<Vec<usize>>,
    offsets: Vec<f64>,
    /// Set when built by [`make_grid_region`]; drives SVG rendering.
    lattice: Option<(usize, usize)>,
}

impl Region {
    /// Assemble a region from units and undirected edges given as index
    /// pairs. Validates populations and edge indices.
    pub fn from_units_and_edges(
        units: Vec<AreaUnit>,
        edges: &[(usize, usize)],
    ) -> Result<Self, RegionError> {
        let n = units.len();
        for u in &units {
            if !(u.population > 0.0) || !u.population.is_finite() {
                return Err(RegionError::InvalidPopulationRange(
                    u.population,
                    u.population,
                ));
            }
            if !u.centroid_x.is_finite() || !u.centroid_y.is_finite() {
                return Err(RegionError::AdjacencyError(format!(
                    "unit {} has non-finite centroid",
                    u.id
                )));
            }
        }
        let mut w = SymmetricMatrix::zeros(n);
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(RegionError::AdjacencyError(format!(
                    "edge ({a}, {b}) out of range for {n} units"
                )));
            }
            if a == b {
                return Err(RegionError::AdjacencyError(format!("self-loop at {a}")));
            }
            w.set_sym(a, b, 1.0);
        }
        let neighbors = (0..n)
            .map(|i| (0..n).filter(|&j| w.get(i, j) != 0.0).collect())
            .collect();
        let offsets = units.iter().map(|u| u.population / 100_000.0).collect();
        Ok(Self {
            units,
            adjacency: w,
            neighbors,
            offsets,
            lattice: None,
        })
    }

    pub fn units(&self) -> &[AreaUnit] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    /// Binary symmetric adjacency matrix W.
    pub fn adjacency(&self) -> &SymmetricMatrix {
        &self.adjacency
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Offsets ξ_i = population_i / 100 000.
    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn log_offsets(&self) -> Vec<f64> {
        self.offsets.iter().map(|x| x.ln()).collect()
    }

    /// Lattice shape when the region came from [`make_grid_region`].
    pub fn lattice_shape(&self) -> Option<(usize, usize)> {
        self.lattice
    }

    /// Breadth-first connectivity check over the adjacency graph.
    pub fn is_connected(&self) -> bool {
        let n = self.len();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for &j in &self.neighbors[i] {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == n
    }
}

/// Build a rows×cols lattice with rook (edge-sharing) adjacency and
/// log-uniform populations on [pop_min, pop_max]. Deterministic given seed.
pub fn make_grid_region(
    rows: usize,
    cols: usize,
    pop_min: f64,
    pop_max: f64,
    seed: u64,
) -> Result<Region, RegionError> {
    if rows < 2 || cols < 2 {
        return Err(RegionError::RegionTooSmall);
    }
    if !(pop_min > 0.0) || !(pop_max >= pop_min) || !pop_max.is_finite() {
        return Err(RegionError::InvalidPopulationRange(pop_min, pop_max));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (ln_min, ln_max) = (pop_min.ln(), pop_max.ln());
    let mut units = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let ln_p = if ln_max > ln_min {
                rng.random_range(ln_min..ln_max)
            } else {
                ln_min
            };
            units.push(AreaUnit {
                id: (r * cols + c) as u64,
                centroid_x: c as f64,
                centroid_y: r as f64,
                population: ln_p.exp(),
            });
        }
    }
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if c + 1 < cols {
                edges.push((i, i + 1));
            }
            if r + 1 < rows {
                edges.push((i, i + cols));
            }
        }
    }
    let mut region = Region::from_units_and_edges(units, &edges)?;
    region.lattice = Some((rows, cols));
    Ok(region)
}

/// Load a region from the two CSV schemas:
/// units `id,centroid_x,centroid_y,population`, adjacency `id_a,id_b` (one
/// row per undirected edge; listing both orientations is accepted and
/// deduplicated, but a file that reciprocates some edges and not others is
/// rejected as inconsistent).
///
/// A disconnected graph is accepted with a warning; ICAR-based fits reject it
/// later.
pub fn load_region_csv(units_path: &Path, adjacency_path: &Path) -> Result<Region, RegionError> {
    let io_err = |path: &Path| {
        let p = path.to_path_buf();
        move |source: csv::Error| match source.kind() {
            csv::ErrorKind::Io(_) => {
                if let csv::ErrorKind::Io(io) = source.into_kind() {
                    RegionError::Io {
                        path: p.clone(),
                        source: io,
                    }
                } else {
                    unreachable!()
                }
            }
            _ => RegionError::Parse {
                path: p.clone(),
                line: 0,
                msg: source.to_string(),
            },
        }
    };

    let mut rdr = csv::Reader::from_path(units_path).map_err(io_err(units_path))?;
    let headers = rdr.headers().map_err(io_err(units_path))?.clone();
    let expect = ["id", "centroid_x", "centroid_y", "population"];
    if headers.iter().map(str::trim).ne(expect) {
        return Err(RegionError::Parse {
            path: units_path.to_path_buf(),
            line: 1,
            msg: format!(
                "expected header `id,centroid_x,centroid_y,population`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut units = Vec::new();
    let mut index_of: HashMap<u64, usize> = HashMap::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let line = row_idx as u64 + 2;
        let record = record.map_err(io_err(units_path))?;
        let parse_field = |k: usize, name: &str| -> Result<f64, RegionError> {
            record
                .get(k)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| RegionError::Parse {
                    path: units_path.to_path_buf(),
                    line,
                    msg: format!("bad {name} field"),
                })
        };
        let id = record
            .get(0)
            .and_then(|s| s.trim().parse::<u64>().ok())
            .ok_or_else(|| RegionError::Parse {
                path: units_path.to_path_buf(),
                line,
                msg: "bad id field".into(),
            })?;
        let x = parse_field(1, "centroid_x")?;
        let y = parse_field(2, "centroid_y")?;
        let pop = parse_field(3, "population")?;
        if !(pop > 0.0) {
            return Err(RegionError::Parse {
                path: units_path.to_path_buf(),
                line,
                msg: format!("population must be > 0, got {pop}"),
            });
        }
        if index_of.insert(id, units.len()).is_some() {
            return Err(RegionError::DuplicateId(id));
        }
        units.push(AreaUnit {
            id,
            centroid_x: x,
            centroid_y: y,
            population: pop,
        });
    }

    let mut rdr = csv::Reader::from_path(adjacency_path).map_err(io_err(adjacency_path))?;
    let headers = rdr.headers().map_err(io_err(adjacency_path))?.clone();
    if headers.iter().map(str::trim).ne(["id_a", "id_b"]) {
        return Err(RegionError::Parse {
            path: adjacency_path.to_path_buf(),
            line: 1,
            msg: format!(
                "expected header `id_a,id_b`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut oriented: HashMap<(usize, usize), u64> = HashMap::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let line = row_idx as u64 + 2;
        let record = record.map_err(io_err(adjacency_path))?;
        let get_id = |k: usize| -> Result<usize, RegionError> {
            let id = record
                .get(k)
                .and_then(|s| s.trim().parse::<u64>().ok())
                .ok_or_else(|| RegionError::Parse {
                    path: adjacency_path.to_path_buf(),
                    line,
                    msg: "bad id field".into(),
                })?;
            index_of.get(&id).copied().ok_or_else(|| {
                RegionError::AdjacencyError(format!("unknown unit id {id} at line {line}"))
            })
        };
        let a = get_id(0)?;
        let b = get_id(1)?;
        if a == b {
            return Err(RegionError::AdjacencyError(format!(
                "self-loop on unit {} at line {line}",
                units[a].id
            )));
        }
        oriented.entry((a, b)).or_insert(line);
    }

    // Accept either convention (each undirected edge once, or both
    // orientations everywhere) but reject a mix: a file that reciprocates
    // some edges and omits the reverse of others indicates a corrupted
    // export, and the one-sided rows are reported as asymmetric entries.
    let mut missing = String::new();
    let has_reciprocal = oriented
        .keys()
        .any(|&(a, b)| oriented.contains_key(&(b, a)));
    if has_reciprocal {
        for &(a, b) in oriented.keys() {
            if !oriented.contains_key(&(b, a)) {
                let _ = write!(missing, " ({},{})", units[a].id, units[b].id);
            }
        }
    }
    if !missing.is_empty() {
        return Err(RegionError::AdjacencyError(format!(
            "asymmetric adjacency entries, missing reciprocal rows for:{missing}"
        )));
    }

    let mut edges: Vec<(usize, usize)> = oriented
        .keys()
        .map(|&(a, b)| if a < b { (a, b) } else { (b, a) })
        .collect();
    edges.sort_unstable();
    edges.dedup();

    let region = Region::from_units_and_edges(units, &edges)?;
    if !region.is_connected() {
        log::warn!(
            "adjacency graph in {} is disconnected; spline models are unaffected but ICAR/BYM2 fits will fail",
            adjacency_path.display()
        );
    }
    Ok(region)
}

/// Affinely map each centroid axis onto [0, 1], giving the distance-based
/// connectivity coordinate system.
pub fn scaled_centroids(region: &Region) -> Result<ConnectivityCoords, RegionError> {
    let n = region.len();
    assert!(n >= 2, "scaled_centroids needs at least 2 units");
    let xs: Vec<f64> = region.units.iter().map(|u| u.centroid_x).collect();
    let ys: Vec<f64> = region.units.iter().map(|u| u.centroid_y).collect();
    let scale_axis = |v: &[f64], axis: char| -> Result<Vec<f64>, RegionError> {
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(max > min) {
            return Err(RegionError::DegenerateAxis(axis));
        }
        Ok(v.iter().map(|x| (x - min) / (max - min)).collect())
    };
    let sx = scale_axis(&xs, 'x')?;
    let sy = scale_axis(&ys, 'y')?;
    let points = sx.into_iter().zip(sy).map(|(x, z)| [x, z]).collect();
    Ok(ConnectivityCoords::new("distance", points))
}
