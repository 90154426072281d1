//! Dense symmetric linear algebra used throughout the crate: cyclic-Jacobi
//! eigendecomposition, Moore–Penrose pseudo-inverse, Cholesky solves, and the
//! double-centring step of classical MDS.
//!
//! Everything here is deterministic: the same input bytes produce the same
//! output bytes on every run and platform. Matrices are dense; the study
//! geographies this crate targets stay well below n = 2000 areas, where dense
//! Jacobi is simple and fast enough.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("matrix not positive semi-definite: eigenvalue {0:.6e}")]
    NotPsd(f64),
    #[error("matrix not positive definite: pivot {pivot:.6e} at row {row}")]
    NotPositiveDefinite { pivot: f64, row: usize },
    #[error("invalid dissimilarity matrix: {0}")]
    InvalidDissimilarity(String),
    #[error("dimension mismatch: {0}")]
    DimensionError(String),
}

/// Rectangular row-major matrix. A deliberately small helper, not a linear
/// algebra library: just enough for design matrices and draw stores.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        let mut data = Vec::with_capacity(r * c);
        for row in &rows {
            data.extend_from_slice(row);
        }
        Self {
            rows: r,
            cols: c,
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn push_row(&mut self, row: &[f64]) {
        assert_eq!(row.len(), self.cols, "row length mismatch");
        self.data.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = self.row(i);
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            y[i] = acc;
        }
        y
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Dense symmetric matrix with exact storage symmetry: `get(i, j)` and
/// `get(j, i)` return the same bits.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymmetricMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Build from a full dense layout, checking that the input really is
    /// symmetric (to 1e-12, absolute on an entry scale) and finite. Entries
    /// are mirrored from the lower triangle so storage is exactly symmetric.
    pub fn from_dense(n: usize, data: &[f64]) -> Result<Self, NumericsError> {
        if data.len() != n * n {
            return Err(NumericsError::DimensionError(format!(
                "expected {} entries, got {}",
                n * n,
                data.len()
            )));
        }
        let scale = data.iter().fold(0.0f64, |a, &v| a.max(v.abs())).max(1.0);
        for (idx, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(NumericsError::InvalidMatrix(format!(
                    "non-finite entry at ({}, {})",
                    idx / n,
                    idx % n
                )));
            }
        }
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let lo = data[i * n + j];
                let hi = data[j * n + i];
                if (lo - hi).abs() > 1e-12 * scale {
                    return Err(NumericsError::InvalidMatrix(format!(
                        "asymmetry at ({i}, {j}): {lo} vs {hi}"
                    )));
                }
                m.set(i, j, lo);
                m.set(j, i, lo);
            }
        }
        Ok(m)
    }

    /// Build by evaluating `f(i, j)` once per unordered pair.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = f(i, j);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        m
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    /// Set both (i, j) and (j, i).
    #[inline]
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.set(i, j, v);
        self.set(j, i, v);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let mut acc = 0.0;
            for (a, b) in self.row(i).iter().zip(x) {
                acc += a * b;
            }
            y[i] = acc;
        }
        y
    }

    /// xᵀ M x
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let y = self.matvec(x);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, &v| a.max(v.abs()))
    }

    fn check_finite(&self) -> Result<(), NumericsError> {
        for (idx, &v) in self.data.iter().enumerate() {
            if !v.is_finite() {
                return Err(NumericsError::InvalidMatrix(format!(
                    "non-finite entry at ({}, {})",
                    idx / self.n,
                    idx % self.n
                )));
            }
        }
        Ok(())
    }
}

/// Eigendecomposition of a symmetric matrix: eigenvalues sorted descending,
/// `vectors[k]` the orthonormal eigenvector for `values[k]`.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl EigenDecomposition {
    /// Reconstruct V Λ Vᵀ (testing aid).
    pub fn reconstruct(&self) -> SymmetricMatrix {
        let n = self.vectors.first().map_or(0, Vec::len);
        SymmetricMatrix::from_fn(n, |i, j| {
            self.values
                .iter()
                .zip(&self.vectors)
                .map(|(l, v)| l * v[i] * v[j])
                .sum()
        })
    }
}

/// Cyclic Jacobi eigendecomposition. Deterministic sweep order, no pivoting
/// randomness, so repeated runs are bit-identical.
pub fn sym_eigen(m: &SymmetricMatrix) -> Result<EigenDecomposition, NumericsError> {
    m.check_finite()?;
    let n = m.order();
    if n == 0 {
        return Err(NumericsError::InvalidMatrix("empty matrix".into()));
    }
    let mut a = m.clone();
    // v stored row-major; column k is eigenvector k.
    let mut v = SymmetricMatrix::identity(n);

    let scale = a.max_abs();
    if scale == 0.0 {
        return Ok(EigenDecomposition {
            values: vec![0.0; n],
            vectors: (0..n)
                .map(|k| (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect())
                .collect(),
        });
    }

    let tol = 1e-300f64.max(scale * 1e-15);
    const MAX_SWEEPS: usize = 100;
    for _sweep in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a.get(p, q).abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (theta * theta + 1.0).sqrt())
                } else {
                    -1.0 / (-theta + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                // Rotate rows/columns p and q of A.
                for k in 0..n {
                    if k != p && k != q {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        let new_kp = c * akp - s * akq;
                        let new_kq = s * akp + c * akq;
                        a.set_sym(k, p, new_kp);
                        a.set_sym(k, q, new_kq);
                    }
                }
                let new_pp = app - t * apq;
                let new_qq = aqq + t * apq;
                a.set(p, p, new_pp);
                a.set(q, q, new_qq);
                a.set_sym(p, q, 0.0);

                // Accumulate rotations into the eigenvector columns.
                for k in 0..n {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a.get(j, j)
            .partial_cmp(&a.get(i, i))
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let values: Vec<f64> = order.iter().map(|&k| a.get(k, k)).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| (0..n).map(|i| v.get(i, k)).collect())
        .collect();
    Ok(EigenDecomposition { values, vectors })
}

/// Moore–Penrose pseudo-inverse of a symmetric PSD matrix. Eigenvalues below
/// `rank_tol · λ_max` are treated as exact zeros; eigenvalues more negative
/// than −1e-10·‖M‖ reject the input as not PSD.
pub fn pseudo_inverse(
    m: &SymmetricMatrix,
    rank_tol: f64,
) -> Result<SymmetricMatrix, NumericsError> {
    let eig = sym_eigen(m)?;
    let max_abs = eig.values.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if max_abs == 0.0 {
        return Ok(SymmetricMatrix::zeros(m.order()));
    }
    if let Some(&lmin) = eig.values.iter().find(|&&l| l < -1e-10 * max_abs) {
        return Err(NumericsError::NotPsd(lmin));
    }
    let lmax = eig.values[0].max(0.0);
    let cutoff = rank_tol * lmax;
    let n = m.order();
    let mut out = SymmetricMatrix::zeros(n);
    for (l, vec) in eig.values.iter().zip(&eig.vectors) {
        if *l > cutoff {
            let inv = 1.0 / l;
            for i in 0..n {
                for j in 0..=i {
                    let add = inv * vec[i] * vec[j];
                    let v = out.get(i, j) + add;
                    out.set_sym(i, j, v);
                }
            }
        }
    }
    Ok(out)
}

/// Lower-triangular Cholesky factor L with A = L Lᵀ, stored dense row-major.
pub fn cholesky_factor(a: &SymmetricMatrix) -> Result<DenseMatrix, NumericsError> {
    a.check_finite()?;
    let n = a.order();
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a.get(i, j);
            for k in 0..j {
                sum -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(NumericsError::NotPositiveDefinite { pivot: sum, row: i });
                }
                l.set(i, j, sum.sqrt());
            } else {
                l.set(i, j, sum / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Solve A x = b for symmetric positive-definite A.
pub fn cholesky_solve(a: &SymmetricMatrix, b: &[f64]) -> Result<Vec<f64>, NumericsError> {
    let n = a.order();
    if b.len() != n {
        return Err(NumericsError::DimensionError(format!(
            "matrix order {n} vs rhs length {}",
            b.len()
        )));
    }
    let l = cholesky_factor(a)?;
    // Forward: L y = b
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum -= l.get(i, k) * y[k];
        }
        y[i] = sum / l.get(i, i);
    }
    // Back: Lᵀ x = y
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in (i + 1)..n {
            sum -= l.get(k, i) * x[k];
        }
        x[i] = sum / l.get(i, i);
    }
    Ok(x)
}

/// Double-centre a dissimilarity matrix: B = −½ J D² J with J = I − 11ᵀ/n.
/// This is the inner step of classical MDS; every row of B sums to zero.
pub fn double_center(d: &SymmetricMatrix) -> Result<SymmetricMatrix, NumericsError> {
    d.check_finite()?;
    let n = d.order();
    for i in 0..n {
        if d.get(i, i).abs() > 1e-12 {
            return Err(NumericsError::InvalidDissimilarity(format!(
                "nonzero diagonal at {i}: {}",
                d.get(i, i)
            )));
        }
        for j in 0..n {
            if d.get(i, j) < 0.0 {
                return Err(NumericsError::InvalidDissimilarity(format!(
                    "negative entry at ({i}, {j}): {}",
                    d.get(i, j)
                )));
            }
        }
    }
    let sq = SymmetricMatrix::from_fn(n, |i, j| {
        let v = d.get(i, j);
        v * v
    });
    let nf = n as f64;
    let row_means: Vec<f64> = (0..n).map(|i| sq.row(i).iter().sum::<f64>() / nf).collect();
    let grand = row_means.iter().sum::<f64>() / nf;
    Ok(SymmetricMatrix::from_fn(n, |i, j| {
        -0.5 * (sq.get(i, j) - row_means[i] - row_means[j] + grand)
    }))
}
