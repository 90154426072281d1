//! Thin-plate spline surfaces over a 2-D connectivity coordinate system.
//!
//! A surface is a linear combination of radial basis functions η(r) = r² log r
//! centred at knots, plus the two linear terms of the coordinate system. The
//! constant is dropped and every design column is centred, which absorbs the
//! sum-to-zero identifiability constraint (the model intercept plays the role
//! of the constant).
//!
//! Radial coefficients live in the classical TPS constraint subspace (no
//! linear-polynomial content at the knots), parameterized by the eigenbasis
//! of the projected kernel matrix: the kernel is conditionally positive
//! definite there, so the wiggliness penalty P₁ is diagonal and positive on
//! the radial block, tiny negative eigenvalues being numerical noise that is
//! clamped to zero. P₀ is the identity on the two linear columns. P₀ + P₁ is
//! positive definite, making the coefficient prior N(0, (λ₀P₀ + λ₁P₁)⁻¹)
//! proper, and every coefficient direction is either penalized or
//! data-identified.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::numerics::{pseudo_inverse, sym_eigen, DenseMatrix, SymmetricMatrix};

#[derive(Debug, Error)]
pub enum SmoothError {
    #[error("need at least 4 knots, got {0}")]
    TooFewKnots(usize),
    #[error("requested {requested} knots but only {available} distinct locations")]
    TooManyKnots { requested: usize, available: usize },
    #[error("duplicate knots at positions {0} and {1}")]
    DuplicateKnots(usize, usize),
    #[error("penalty projection found eigenvalue {0:.6e}, not PSD")]
    PenaltyNotPsd(f64),
    #[error("dimension mismatch: {0}")]
    DimensionError(String),
    #[error("non-finite coordinate at index {0}")]
    NonFiniteCoordinate(usize),
}

/// A 2-D coordinate system describing connectivity between area units, one
/// point per unit in region order. Geographic ("distance"), MDS-derived
/// ("movement"), or any user-supplied tag.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityCoords {
    label: String,
    points: Vec<[f64; 2]>,
}

impl ConnectivityCoords {
    pub fn new(label: impl Into<String>, points: Vec<[f64; 2]>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn check_finite(&self) -> Result<(), SmoothError> {
        for (i, p) in self.points.iter().enumerate() {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(SmoothError::NonFiniteCoordinate(i));
            }
        }
        Ok(())
    }
}

/// Design matrix and penalty pair for one smooth term.
#[derive(Debug, Clone)]
pub struct SmoothBasis {
    label: String,
    design: DenseMatrix,
    p1: SymmetricMatrix,
    p0: SymmetricMatrix,
    knots: Vec<[f64; 2]>,
    /// Knot weights defining each radial basis function: column g of the
    /// design is Σ_l weights[g][l] · η(‖s − knot_l‖), centred.
    radial_weights: Vec<Vec<f64>>,
    rank_p1: usize,
    null_dim: usize,
}

impl SmoothBasis {
    pub fn label(&self) -> &str {
        &self.label
    }

    /// n×K design matrix with centred columns.
    pub fn design(&self) -> &DenseMatrix {
        &self.design
    }

    /// Wiggliness penalty (K×K, PSD).
    pub fn p1(&self) -> &SymmetricMatrix {
        &self.p1
    }

    /// Null-space ridge penalty (K×K, PSD projector onto null(P₁)).
    pub fn p0(&self) -> &SymmetricMatrix {
        &self.p0
    }

    pub fn knots(&self) -> &[[f64; 2]] {
        &self.knots
    }

    /// Knot weights for each radial basis function, enabling independent
    /// re-evaluation (and prediction at new locations).
    pub fn radial_weights(&self) -> &[Vec<f64>] {
        &self.radial_weights
    }

    pub fn num_coefficients(&self) -> usize {
        self.design.cols()
    }

    pub fn num_points(&self) -> usize {
        self.design.rows()
    }

    pub fn rank_p1(&self) -> usize {
        self.rank_p1
    }

    pub fn rank_p0(&self) -> usize {
        self.null_dim
    }

    /// Dimension of the penalty null space covered by P₀.
    pub fn null_dim(&self) -> usize {
        self.null_dim
    }
}

/// Radial kernel η(r) = r² log r, extended by continuity with η(0) = 0.
pub fn tps_kernel(r: f64) -> f64 {
    if r > 0.0 {
        r * r * r.ln()
    } else {
        0.0
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dz = a[1] - b[1];
    (dx * dx + dz * dz).sqrt()
}

/// Choose `k` distinct knot locations from the data by greedy farthest-point
/// traversal, starting from a seeded random location. Ties break toward the
/// lowest index, so the result is deterministic given the seed.
pub fn select_knots(
    coords: &ConnectivityCoords,
    k: usize,
    seed: u64,
) -> Result<Vec<[f64; 2]>, SmoothError> {
    coords.check_finite()?;
    // Distinct locations, first occurrence order.
    let mut distinct: Vec<[f64; 2]> = Vec::new();
    'outer: for p in coords.points() {
        for q in &distinct {
            if p[0].to_bits() == q[0].to_bits() && p[1].to_bits() == q[1].to_bits() {
                continue 'outer;
            }
        }
        distinct.push(*p);
    }
    if k < 4 {
        return Err(SmoothError::TooFewKnots(k));
    }
    if k > distinct.len() {
        return Err(SmoothError::TooManyKnots {
            requested: k,
            available: distinct.len(),
        });
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let start = rng.random_range(0..distinct.len());
    let mut chosen = vec![start];
    let mut min_dist: Vec<f64> = distinct.iter().map(|p| dist(*p, distinct[start])).collect();
    while chosen.len() < k {
        let mut best = usize::MAX;
        let mut best_d = -1.0;
        for (i, &d) in min_dist.iter().enumerate() {
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        chosen.push(best);
        for (i, d) in min_dist.iter_mut().enumerate() {
            let nd = dist(distinct[i], distinct[best]);
            if nd < *d {
                *d = nd;
            }
        }
    }
    Ok(chosen.into_iter().map(|i| distinct[i]).collect())
}

/// Build the thin-plate spline basis over `coords` with the given knots.
///
/// Radial basis functions are kernel combinations within the classical TPS
/// constraint subspace (no linear-polynomial content at the knots): with E
/// the kernel matrix at the knots and P the projector onto the complement of
/// span{1, x, z} there, the eigenvectors of P·E·P with positive eigenvalue
/// define the radial functions and their diagonal wiggliness penalty. The
/// design appends the two linear coordinate columns and centres everything,
/// so K = rank + 2 (rank = #knots − 3 for knots in general position).
pub fn build_tps_basis(
    coords: &ConnectivityCoords,
    knots: &[[f64; 2]],
    label: impl Into<String>,
) -> Result<SmoothBasis, SmoothError> {
    coords.check_finite()?;
    let n = coords.len();
    let k = knots.len();
    if k < 4 {
        return Err(SmoothError::TooFewKnots(k));
    }
    for i in 0..k {
        if !knots[i][0].is_finite() || !knots[i][1].is_finite() {
            return Err(SmoothError::NonFiniteCoordinate(i));
        }
        for j in (i + 1)..k {
            if dist(knots[i], knots[j]) == 0.0 {
                return Err(SmoothError::DuplicateKnots(i, j));
            }
        }
    }
    // Orthogonal projector onto the complement of span{1, x, z} at the knots.
    let t: Vec<[f64; 3]> = knots.iter().map(|p| [1.0, p[0], p[1]]).collect();
    let gram = SymmetricMatrix::from_fn(3, |a, b| t.iter().map(|row| row[a] * row[b]).sum());
    let gram_inv = pseudo_inverse(&gram, 1e-12).map_err(|_| {
        SmoothError::DimensionError("knot polynomial Gram matrix is invalid".into())
    })?;
    // proj = I - T G⁺ Tᵀ
    let mut proj = DenseMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut acc = 0.0;
            for a in 0..3 {
                for b in 0..3 {
                    acc += t[i][a] * gram_inv.get(a, b) * t[j][b];
                }
            }
            proj.set(i, j, if i == j { 1.0 - acc } else { -acc });
        }
    }

    // Radial kernel matrix at the knots.
    let e = SymmetricMatrix::from_fn(k, |i, j| tps_kernel(dist(knots[i], knots[j])));
    // m = proj · E · proj, symmetrized.
    let mut pe = DenseMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            let mut acc = 0.0;
            for l in 0..k {
                acc += proj.get(i, l) * e.get(l, j);
            }
            pe.set(i, j, acc);
        }
    }
    let m = SymmetricMatrix::from_fn(k, |i, j| {
        let mut a = 0.0;
        let mut b = 0.0;
        for l in 0..k {
            a += pe.get(i, l) * proj.get(l, j);
            b += pe.get(j, l) * proj.get(l, i);
        }
        0.5 * (a + b)
    });

    let eig = sym_eigen(&m)
        .map_err(|_| SmoothError::DimensionError("penalty eigendecomposition failed".into()))?;
    let scale = eig
        .values
        .iter()
        .fold(0.0f64, |a, &v| a.max(v.abs()))
        .max(1e-300);
    if let Some(&bad) = eig.values.iter().find(|&&l| l < -1e-8 * scale) {
        return Err(SmoothError::PenaltyNotPsd(bad));
    }
    // The kernel is conditionally positive definite on the constraint
    // subspace; eigenvalues at roundoff scale are dropped along with the
    // three exact zeros from the projected-out polynomial directions.
    let cutoff = 1e-12 * scale;
    let retained: Vec<(f64, &Vec<f64>)> = eig
        .values
        .iter()
        .zip(&eig.vectors)
        .filter(|(l, _)| **l > cutoff)
        .map(|(l, v)| (*l, v))
        .collect();
    let rank_p1 = retained.len();
    let total = rank_p1 + 2;
    let radial_weights: Vec<Vec<f64>> = retained.iter().map(|(_, v)| (*v).clone()).collect();

    let mut design = DenseMatrix::zeros(n, total);
    for (i, p) in coords.points().iter().enumerate() {
        let raw: Vec<f64> = knots.iter().map(|kn| tps_kernel(dist(*p, *kn))).collect();
        for (g, w) in radial_weights.iter().enumerate() {
            let mut acc = 0.0;
            for (r, wl) in raw.iter().zip(w) {
                acc += r * wl;
            }
            design.set(i, g, acc);
        }
        design.set(i, rank_p1, p[0]);
        design.set(i, rank_p1 + 1, p[1]);
    }
    // Centre every column.
    for j in 0..total {
        let mean = (0..n).map(|i| design.get(i, j)).sum::<f64>() / n as f64;
        for i in 0..n {
            let v = design.get(i, j) - mean;
            design.set(i, j, v);
        }
    }

    // Diagonal wiggliness penalty on the radial block; unit ridge on the two
    // linear columns.
    let mut p1 = SymmetricMatrix::zeros(total);
    for (g, (l, _)) in retained.iter().enumerate() {
        p1.set(g, g, *l);
    }
    let mut p0 = SymmetricMatrix::zeros(total);
    p0.set(rank_p1, rank_p1, 1.0);
    p0.set(rank_p1 + 1, rank_p1 + 1, 1.0);

    Ok(SmoothBasis {
        label: label.into(),
        design,
        p1,
        p0,
        knots: knots.to_vec(),
        radial_weights,
        rank_p1,
        null_dim: 2,
    })
}

/// Evaluate the smooth at the data locations: X β.
pub fn evaluate_smooth(basis: &SmoothBasis, beta: &[f64]) -> Result<Vec<f64>, SmoothError> {
    if beta.len() != basis.num_coefficients() {
        return Err(SmoothError::DimensionError(format!(
            "basis has {} coefficients, beta has {}",
            basis.num_coefficients(),
            beta.len()
        )));
    }
    Ok(basis.design.matvec(beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::cholesky_solve;

    fn uniform_coords(n: usize, seed: u64) -> ConnectivityCoords {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let points = (0..n)
            .map(|_| [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
            .collect();
        ConnectivityCoords::new("test", points)
    }

    #[test]
    fn kernel_values() {
        assert_eq!(tps_kernel(0.0), 0.0);
        assert_eq!(tps_kernel(1.0), 0.0); // 1² · log 1
        let e = std::f64::consts::E;
        assert!((tps_kernel(e) - e * e).abs() < 1e-12);
    }

    #[test]
    fn select_all_points_as_knots() {
        let c = uniform_coords(9, 3);
        let knots = select_knots(&c, 9, 42).unwrap();
        assert_eq!(knots.len(), 9);
        let mut found = vec![false; 9];
        for k in &knots {
            for (i, p) in c.points().iter().enumerate() {
                if k == p {
                    found[i] = true;
                }
            }
        }
        assert!(found.iter().all(|&f| f));
    }

    #[test]
    fn select_four_corners() {
        let c = ConnectivityCoords::new(
            "corners",
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]],
        );
        let knots = select_knots(&c, 4, 11).unwrap();
        assert_eq!(knots.len(), 4);
        for p in c.points() {
            assert!(knots.contains(p));
        }
    }

    #[test]
    fn select_rejects_bad_counts() {
        let c = uniform_coords(10, 0);
        assert!(matches!(
            select_knots(&c, 3, 0),
            Err(SmoothError::TooFewKnots(3))
        ));
        assert!(matches!(
            select_knots(&c, 11, 0),
            Err(SmoothError::TooManyKnots { .. })
        ));
    }

    #[test]
    fn farthest_point_beats_random_subsets() {
        // Greedy max-min knot spread: the minimum pairwise distance among the
        // selected knots should be at least that of any random size-10 subset.
        let c = uniform_coords(100, 5);
        let knots = select_knots(&c, 10, 7).unwrap();
        let min_pair = |pts: &[[f64; 2]]| -> f64 {
            let mut m = f64::INFINITY;
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    m = m.min(dist(pts[i], pts[j]));
                }
            }
            m
        };
        let knot_min = min_pair(&knots);
        let mut rng = ChaCha20Rng::seed_from_u64(99);
        for _ in 0..100 {
            let mut subset: Vec<[f64; 2]> = Vec::new();
            while subset.len() < 10 {
                let p = c.points()[rng.random_range(0..100)];
                if !subset.contains(&p) {
                    subset.push(p);
                }
            }
            assert!(knot_min >= min_pair(&subset));
        }
    }

    fn basis_fixture(n: usize, k: usize, seed: u64) -> (ConnectivityCoords, SmoothBasis) {
        let c = uniform_coords(n, seed);
        let knots = select_knots(&c, k, seed + 1).unwrap();
        let b = build_tps_basis(&c, &knots, "test").unwrap();
        (c, b)
    }

    #[test]
    fn columns_are_centred_and_shape_is_rank_plus_2() {
        // 12 knots in general position: rank = 12 − 3, plus two linear
        // columns.
        let (_, b) = basis_fixture(50, 12, 1);
        assert_eq!(b.num_coefficients(), 11);
        assert_eq!(b.rank_p1(), 9);
        assert_eq!(b.null_dim(), 2);
        for j in 0..b.num_coefficients() {
            let mean: f64 = (0..b.num_points())
                .map(|i| b.design().get(i, j))
                .sum::<f64>()
                / 50.0;
            assert!(mean.abs() < 1e-10, "column {j} mean {mean}");
        }
    }

    #[test]
    fn null_space_coefficient_penalties() {
        // Zero radial block, unit x coefficient: no wiggliness penalty, unit
        // ridge penalty.
        let (_, b) = basis_fixture(40, 10, 2);
        let kk = b.num_coefficients();
        let mut beta = vec![0.0; kk];
        beta[kk - 2] = 1.0;
        assert!(b.p1().quadratic_form(&beta).abs() < 1e-12);
        assert!((b.p0().quadratic_form(&beta) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn penalties_are_psd_and_sum_positive_definite() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        for trial in 0..8 {
            let (_, b) = basis_fixture(60, 8 + trial, 100 + trial as u64);
            let kk = b.num_coefficients();
            for _ in 0..20 {
                let beta: Vec<f64> = (0..kk).map(|_| rng.random_range(-3.0..3.0)).collect();
                let q1 = b.p1().quadratic_form(&beta);
                let q0 = b.p0().quadratic_form(&beta);
                let norm2: f64 = beta.iter().map(|x| x * x).sum();
                assert!(q1 >= -1e-9 * norm2, "P1 not PSD: {q1}");
                assert!(q0 >= -1e-9 * norm2, "P0 not PSD: {q0}");
            }
            // P0 + P1 positive definite: smallest eigenvalue strictly positive.
            let sum = SymmetricMatrix::from_fn(kk, |i, j| b.p0().get(i, j) + b.p1().get(i, j));
            let eig = sym_eigen(&sum).unwrap();
            let min = eig.values.last().copied().unwrap();
            assert!(min > 1e-10, "P0+P1 min eigenvalue {min}");
        }
    }

    #[test]
    fn p1_annihilates_linear_null_space() {
        let (_, b) = basis_fixture(50, 15, 4);
        let kk = b.num_coefficients();
        for col in [kk - 2, kk - 1] {
            let mut beta = vec![0.0; kk];
            beta[col] = 1.0;
            let y = b.p1().matvec(&beta);
            let max = y.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
            assert!(max <= 1e-8, "P1 does not annihilate column {col}: {max}");
        }
    }

    #[test]
    fn evaluate_matches_naive_summation() {
        let (c, b) = basis_fixture(30, 10, 6);
        let kk = b.num_coefficients();
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let beta: Vec<f64> = (0..kk).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fitted = evaluate_smooth(&b, &beta).unwrap();
        // Independent evaluation through the δ parameterization: fold the
        // radial coefficients into knot weights δ = Σ_g β_g w_g by hand, sum
        // kernels pointwise, add the linear terms, subtract the overall mean.
        let k = b.knots().len();
        let r = b.rank_p1();
        let n = c.len();
        let mut delta = vec![0.0; k];
        for (g, w) in b.radial_weights().iter().enumerate() {
            for (d, wl) in delta.iter_mut().zip(w) {
                *d += beta[g] * wl;
            }
        }
        let uncentred = |i: usize| -> f64 {
            let mut f = 0.0;
            for (l, &d) in delta.iter().enumerate() {
                f += d * tps_kernel(dist(c.points()[i], b.knots()[l]));
            }
            f + beta[r] * c.points()[i][0] + beta[r + 1] * c.points()[i][1]
        };
        let mean: f64 = (0..n).map(uncentred).sum::<f64>() / n as f64;
        for i in 0..n {
            let explicit = uncentred(i) - mean;
            assert!(
                (fitted[i] - explicit).abs() <= 1e-10 * (1.0 + explicit.abs()),
                "point {i}: {} vs {explicit}",
                fitted[i]
            );
        }
        // The folded knot weights satisfy the classical TPS constraints.
        let s0: f64 = delta.iter().sum();
        let sx: f64 = delta.iter().zip(b.knots()).map(|(d, p)| d * p[0]).sum();
        let sz: f64 = delta.iter().zip(b.knots()).map(|(d, p)| d * p[1]).sum();
        assert!(s0.abs() < 1e-10 && sx.abs() < 1e-10 && sz.abs() < 1e-10);
        // Zero vector and unit vectors.
        let zero = evaluate_smooth(&b, &vec![0.0; kk]).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
        let mut e0 = vec![0.0; kk];
        e0[0] = 1.0;
        let col0 = evaluate_smooth(&b, &e0).unwrap();
        for i in 0..n {
            assert_eq!(col0[i], b.design().get(i, 0));
        }
    }

    #[test]
    fn smooth_output_sums_to_zero() {
        let (_, b) = basis_fixture(45, 9, 8);
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        for _ in 0..10 {
            let beta: Vec<f64> = (0..b.num_coefficients())
                .map(|_| rng.random_range(-2.0..2.0))
                .collect();
            let f = evaluate_smooth(&b, &beta).unwrap();
            let mean = f.iter().sum::<f64>() / f.len() as f64;
            let scale = f.iter().fold(1.0f64, |a, &v| a.max(v.abs()));
            assert!(mean.abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn ordering_invariance_up_to_row_permutation() {
        let c = uniform_coords(25, 9);
        let knots = select_knots(&c, 8, 10).unwrap();
        let b = build_tps_basis(&c, &knots, "a").unwrap();
        // Reverse the point order, same knots.
        let rev = ConnectivityCoords::new("a", c.points().iter().rev().cloned().collect());
        let b2 = build_tps_basis(&rev, &knots, "a").unwrap();
        assert_eq!(b.p1(), b2.p1());
        assert_eq!(b.p0(), b2.p0());
        // Design rows permute; column means are summed in a different order,
        // so allow roundoff-level slack.
        let n = c.len();
        for i in 0..n {
            for j in 0..b.num_coefficients() {
                let a = b.design().get(i, j);
                let bb = b2.design().get(n - 1 - i, j);
                assert!(
                    (a - bb).abs() <= 1e-12 * (1.0 + a.abs()),
                    "({i},{j}): {a} vs {bb}"
                );
            }
        }
    }

    #[test]
    fn duplicate_knots_rejected() {
        let c = uniform_coords(10, 14);
        let knots = vec![[0.1, 0.1], [0.5, 0.5], [0.1, 0.1], [0.9, 0.9]];
        assert!(matches!(
            build_tps_basis(&c, &knots, "x"),
            Err(SmoothError::DuplicateKnots(0, 2))
        ));
    }

    #[test]
    fn interpolation_limit_on_tiny_instance() {
        // With knots at every data point and a vanishing penalty, the
        // penalised fit reproduces noise-free data.
        let c = uniform_coords(8, 21);
        let knots: Vec<[f64; 2]> = c.points().to_vec();
        let b = build_tps_basis(&c, &knots, "interp").unwrap();
        let y: Vec<f64> = c
            .points()
            .iter()
            .map(|p| (2.0 * p[0]).sin() + (3.0 * p[1]).cos())
            .collect();
        let ybar = y.iter().sum::<f64>() / y.len() as f64;
        let resid: Vec<f64> = y.iter().map(|v| v - ybar).collect();
        let kk = b.num_coefficients();
        let n = c.len();
        // Normal equations with a tiny proper ridge.
        let mut xtx = SymmetricMatrix::from_fn(kk, |a, bcol| {
            (0..n)
                .map(|i| b.design().get(i, a) * b.design().get(i, bcol))
                .sum::<f64>()
                + 1e-12 * (b.p0().get(a, bcol) + b.p1().get(a, bcol))
        });
        // Guard conditioning: scale-aware jitter on the diagonal.
        for a in 0..kk {
            let v = xtx.get(a, a) + 1e-14;
            xtx.set(a, a, v);
        }
        let xty: Vec<f64> = (0..kk)
            .map(|a| (0..n).map(|i| b.design().get(i, a) * resid[i]).sum())
            .collect();
        let beta = cholesky_solve(&xtx, &xty).unwrap();
        let fit = evaluate_smooth(&b, &beta).unwrap();
        let max_resid = fit
            .iter()
            .zip(&resid)
            .map(|(f, r)| (f - r).abs())
            .fold(0.0f64, f64::max);
        assert!(max_resid <= 1e-6, "interpolation residual {max_resid}");
    }
}
