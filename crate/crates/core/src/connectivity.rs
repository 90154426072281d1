//! Human-movement connectivity coordinates: gravity-model flow estimates,
//! flow→dissimilarity transforms, and classical multidimensional scaling of
//! the result onto a 2-D coordinate system.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::numerics::{double_center, sym_eigen, NumericsError, SymmetricMatrix};
use crate::region::Region;
use crate::smooth::ConnectivityCoords;

#[derive(Debug, Error)]
pub enum ConnectivityError {
    #[error("coincident centroids for units {0} and {1}")]
    ZeroDistance(usize, usize),
    #[error("gravity exponent must be > 0, got {0}")]
    InvalidGamma(f64),
    #[error("all flows are zero")]
    DegenerateFlows,
    #[error("flow value error: {0}")]
    InvalidFlow(String),
    #[error("MDS requires dim = 2, got {0}")]
    DimensionError(usize),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("{path}: {msg}")]
    Csv { path: PathBuf, msg: String },
}

/// Symmetric nonnegative flow estimates between area units, zero diagonal.
#[derive(Debug, Clone)]
pub struct FlowMatrix {
    flows: SymmetricMatrix,
    gamma: f64,
}

impl FlowMatrix {
    pub fn flows(&self) -> &SymmetricMatrix {
        &self.flows
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn order(&self) -> usize {
        self.flows.order()
    }
}

/// Map from flow to dissimilarity. All variants are monotone decreasing in
/// flow and rescaled onto [0, 1]; `Reciprocal` is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlowTransform {
    /// d ∝ 1/(1 + f/f_max) − ½
    #[default]
    Reciprocal,
    /// d ∝ 1 − f/f_max
    OneMinus,
    /// d ∝ −log(f/f_max), clamped near zero flow
    NegLog,
}

impl FlowTransform {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "reciprocal" => Some(Self::Reciprocal),
            "one-minus" => Some(Self::OneMinus),
            "neg-log" => Some(Self::NegLog),
            _ => None,
        }
    }
}

/// Gravity-model flows: flow_ij = pop_i · pop_j / d_ij^γ with Euclidean
/// centroid distances.
pub fn gravity_flows(region: &Region, gamma: f64) -> Result<FlowMatrix, ConnectivityError> {
    if !(gamma > 0.0) {
        return Err(ConnectivityError::InvalidGamma(gamma));
    }
    let n = region.len();
    let units = region.units();
    let mut flows = SymmetricMatrix::zeros(n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = units[i].centroid_x - units[j].centroid_x;
            let dy = units[i].centroid_y - units[j].centroid_y;
            let d = (dx * dx + dy * dy).sqrt();
            if d == 0.0 {
                return Err(ConnectivityError::ZeroDistance(i, j));
            }
            flows.set_sym(
                i,
                j,
                units[i].population * units[j].population / d.powf(gamma),
            );
        }
    }
    Ok(FlowMatrix { flows, gamma })
}

/// Build a flow matrix from a CSV file with header `id_a,id_b,flow`.
/// Missing pairs default to zero; both orientations are accepted when they
/// agree, and conflicting duplicates are rejected.
pub fn load_flow_csv(path: &Path, region: &Region) -> Result<FlowMatrix, ConnectivityError> {
    let err = |msg: String| ConnectivityError::Csv {
        path: path.to_path_buf(),
        msg,
    };
    let mut rdr = csv::Reader::from_path(path).map_err(|e| err(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| err(e.to_string()))?.clone();
    if headers.iter().map(str::trim).ne(["id_a", "id_b", "flow"]) {
        return Err(err(format!(
            "expected header `id_a,id_b,flow`, got `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let index_of: HashMap<u64, usize> = region
        .units()
        .iter()
        .enumerate()
        .map(|(i, u)| (u.id, i))
        .collect();
    let n = region.len();
    let mut flows = SymmetricMatrix::zeros(n);
    let mut seen: HashMap<(usize, usize), f64> = HashMap::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let line = row_idx + 2;
        let record = record.map_err(|e| err(e.to_string()))?;
        let id = |k: usize| -> Result<usize, ConnectivityError> {
            let raw = record
                .get(k)
                .and_then(|s| s.trim().parse::<u64>().ok())
                .ok_or_else(|| err(format!("line {line}: bad id field")))?;
            index_of
                .get(&raw)
                .copied()
                .ok_or_else(|| err(format!("line {line}: unknown unit id {raw}")))
        };
        let a = id(0)?;
        let b = id(1)?;
        let f: f64 = record
            .get(2)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| err(format!("line {line}: bad flow field")))?;
        if a == b {
            return Err(err(format!("line {line}: self-flow not allowed")));
        }
        if !(f >= 0.0) || !f.is_finite() {
            return Err(ConnectivityError::InvalidFlow(format!(
                "line {line}: flow must be finite and >= 0, got {f}"
            )));
        }
        let key = if a < b { (a, b) } else { (b, a) };
        if let Some(&prev) = seen.get(&key) {
            if prev != f {
                return Err(ConnectivityError::InvalidFlow(format!(
                    "line {line}: conflicting flow for pair ({a}, {b}): {prev} vs {f}"
                )));
            }
        } else {
            seen.insert(key, f);
            flows.set_sym(key.0, key.1, f);
        }
    }
    Ok(FlowMatrix {
        flows,
        gamma: f64::NAN,
    })
}

/// Convert flows to a dissimilarity matrix with the default transform.
pub fn flows_to_dissimilarity(f: &FlowMatrix) -> Result<SymmetricMatrix, ConnectivityError> {
    flows_to_dissimilarity_with(f, FlowTransform::Reciprocal)
}

/// Convert flows to a dissimilarity matrix: a monotone-decreasing map (high
/// flow ⇒ low dissimilarity), rescaled so the largest off-diagonal
/// dissimilarity is 1 and the diagonal stays 0.
pub fn flows_to_dissimilarity_with(
    f: &FlowMatrix,
    transform: FlowTransform,
) -> Result<SymmetricMatrix, ConnectivityError> {
    let n = f.order();
    let mut max_flow = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let v = f.flows.get(i, j);
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ConnectivityError::InvalidFlow(format!(
                    "flow ({i}, {j}) = {v}"
                )));
            }
            max_flow = max_flow.max(v);
        }
    }
    if max_flow == 0.0 {
        return Err(ConnectivityError::DegenerateFlows);
    }
    let raw = |flow: f64| -> f64 {
        let q = flow / max_flow;
        match transform {
            FlowTransform::Reciprocal => 1.0 / (1.0 + q) - 0.5,
            FlowTransform::OneMinus => 1.0 - q,
            FlowTransform::NegLog => {
                const EPS: f64 = 1e-6;
                -(q * (1.0 - EPS) + EPS).ln()
            }
        }
    };
    let mut max_raw = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            max_raw = max_raw.max(raw(f.flows.get(i, j)));
        }
    }
    Ok(SymmetricMatrix::from_fn(n, |i, j| {
        if i == j || max_raw == 0.0 {
            0.0
        } else {
            raw(f.flows.get(i, j)) / max_raw
        }
    }))
}

/// Raw classical-MDS embedding: double-centre, eigendecompose, scale the top
/// two eigenvectors by √eigenvalue (negative eigenvalues clamp to zero).
/// `rank_deficient` is set when fewer than two eigenvalues are positive; the
/// second axis is then identically zero.
#[derive(Debug, Clone)]
pub struct MdsEmbedding {
    pub points: Vec<[f64; 2]>,
    pub eigenvalues: (f64, f64),
    pub rank_deficient: bool,
}

pub fn classical_mds_raw(d: &SymmetricMatrix) -> Result<MdsEmbedding, ConnectivityError> {
    let b = double_center(d)?;
    let eig = sym_eigen(&b)?;
    let n = d.order();
    let scale = eig
        .values
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()))
        .max(1e-300);
    let positive = eig.values.iter().filter(|&&l| l > 1e-12 * scale).count();
    let rank_deficient = positive < 2;
    if rank_deficient {
        log::warn!(
            "MDS embedding is rank deficient ({positive} positive eigenvalues); second axis set to zero"
        );
    }
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(2);
    for k in 0..2 {
        let lambda = eig.values.get(k).copied().unwrap_or(0.0).max(0.0);
        let usable = k < eig.values.len() && eig.values[k] > 1e-12 * scale;
        let mut axis: Vec<f64> = if usable {
            eig.vectors[k].iter().map(|v| v * lambda.sqrt()).collect()
        } else {
            vec![0.0; n]
        };
        // Sign convention: first loading with magnitude above roundoff is
        // positive.
        let amax = axis.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if let Some(first) = axis.iter().find(|v| v.abs() > 1e-12 * amax.max(1e-300)) {
            if *first < 0.0 {
                for v in &mut axis {
                    *v = -*v;
                }
            }
        }
        axes.push(axis);
    }
    let points = (0..n).map(|i| [axes[0][i], axes[1][i]]).collect();
    Ok(MdsEmbedding {
        points,
        eigenvalues: (
            eig.values.first().copied().unwrap_or(0.0).max(0.0),
            eig.values.get(1).copied().unwrap_or(0.0).max(0.0),
        ),
        rank_deficient,
    })
}

/// Classical MDS returning per-axis [0, 1]-rescaled coordinates (matching the
/// scaling convention used for geographic centroids). A degenerate axis maps
/// to all zeros.
pub fn classical_mds(
    d: &SymmetricMatrix,
    dim: usize,
) -> Result<ConnectivityCoords, ConnectivityError> {
    classical_mds_labeled(d, dim, "mds")
}

pub fn classical_mds_labeled(
    d: &SymmetricMatrix,
    dim: usize,
    label: &str,
) -> Result<ConnectivityCoords, ConnectivityError> {
    if dim != 2 {
        return Err(ConnectivityError::DimensionError(dim));
    }
    let emb = classical_mds_raw(d)?;
    let n = emb.points.len();
    let mut out = vec![[0.0f64; 2]; n];
    for axis in 0..2 {
        let vals: Vec<f64> = emb.points.iter().map(|p| p[axis]).collect();
        let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max > min {
            for (o, v) in out.iter_mut().zip(&vals) {
                o[axis] = (v - min) / (max - min);
            }
        }
    }
    Ok(ConnectivityCoords::new(label, out))
}

/// The full movement-coordinate pipeline: gravity flows → dissimilarity →
/// classical MDS, labelled "movement".
pub fn movement_coords(
    region: &Region,
    gamma: f64,
) -> Result<ConnectivityCoords, ConnectivityError> {
    let flows = gravity_flows(region, gamma)?;
    movement_coords_from_flows(&flows, FlowTransform::Reciprocal)
}

/// Movement coordinates from an externally supplied flow matrix (observed
/// air-passenger or phone data instead of the gravity model).
pub fn movement_coords_from_flows(
    flows: &FlowMatrix,
    transform: FlowTransform,
) -> Result<ConnectivityCoords, ConnectivityError> {
    let d = flows_to_dissimilarity_with(flows, transform)?;
    classical_mds_labeled(&d, 2, "movement")
}

/// Root-mean-square residual after optimally aligning `candidate` to
/// `target` by translation plus a 2×2 orthogonal map (rotation or
/// reflection). Zero means the configurations are congruent.
pub fn procrustes_residual(target: &[[f64; 2]], candidate: &[[f64; 2]]) -> f64 {
    procrustes_impl(target, candidate, false)
}

/// As [`procrustes_residual`] but also allowing a uniform scale, normalized
/// by the target's spread; used to compare configurations whose absolute
/// scale is arbitrary.
pub fn procrustes_similarity_residual(target: &[[f64; 2]], candidate: &[[f64; 2]]) -> f64 {
    procrustes_impl(target, candidate, true)
}

fn procrustes_impl(target: &[[f64; 2]], candidate: &[[f64; 2]], with_scale: bool) -> f64 {
    assert_eq!(target.len(), candidate.len());
    let n = target.len();
    let nf = n as f64;
    let center = |pts: &[[f64; 2]]| -> Vec<[f64; 2]> {
        let cx = pts.iter().map(|p| p[0]).sum::<f64>() / nf;
        let cz = pts.iter().map(|p| p[1]).sum::<f64>() / nf;
        pts.iter().map(|p| [p[0] - cx, p[1] - cz]).collect()
    };
    let p = center(target);
    let q = center(candidate);

    // Cross-covariance C = Σ p_i q_iᵀ, then the optimal orthogonal map is
    // U Vᵀ from the SVD of C (reflections allowed).
    let mut c = [[0.0f64; 2]; 2];
    for (pi, qi) in p.iter().zip(&q) {
        for a in 0..2 {
            for b in 0..2 {
                c[a][b] += pi[a] * qi[b];
            }
        }
    }
    let ctc = SymmetricMatrix::from_fn(2, |a, b| (0..2).map(|k| c[k][a] * c[k][b]).sum());
    let eig = sym_eigen(&ctc).expect("2x2 eigen");
    let s1 = eig.values[0].max(0.0).sqrt();
    let s2 = eig.values[1].max(0.0).sqrt();
    let v1 = [eig.vectors[0][0], eig.vectors[0][1]];
    let v2 = [eig.vectors[1][0], eig.vectors[1][1]];
    let apply = |m: &[[f64; 2]; 2], v: [f64; 2]| -> [f64; 2] {
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    };
    let tiny = 1e-14 * s1.max(1e-300);
    let u1 = if s1 > tiny {
        let cv = apply(&c, v1);
        [cv[0] / s1, cv[1] / s1]
    } else {
        [1.0, 0.0]
    };
    let u2 = if s2 > tiny {
        let cv = apply(&c, v2);
        [cv[0] / s2, cv[1] / s2]
    } else {
        [-u1[1], u1[0]]
    };
    // R = u1 v1ᵀ + u2 v2ᵀ maps q-space into p-space.
    let r = [
        [u1[0] * v1[0] + u2[0] * v2[0], u1[0] * v1[1] + u2[0] * v2[1]],
        [u1[1] * v1[0] + u2[1] * v2[0], u1[1] * v1[1] + u2[1] * v2[1]],
    ];
    let qq: f64 = q.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum();
    let scale = if with_scale && qq > 0.0 {
        (s1 + s2) / qq
    } else {
        1.0
    };

    let mut ss = 0.0;
    for (pi, qi) in p.iter().zip(&q) {
        let rq = apply(&r, *qi);
        let dx = pi[0] - scale * rq[0];
        let dz = pi[1] - scale * rq[1];
        ss += dx * dx + dz * dz;
    }
    let rms = (ss / nf).sqrt();
    if with_scale {
        let pp: f64 = p.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum();
        rms / (pp / nf).sqrt().max(1e-300)
    } else {
        rms
    }
}
