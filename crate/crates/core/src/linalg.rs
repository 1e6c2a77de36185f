//! Dense row-major matrices and a cyclic Jacobi eigensolver for real
//! symmetric matrices.
//!
//! Every matrix in this crate is a factor-graph Laplacian (a few hundred rows
//! at most) or a small explicit joint graph used in tests, so a dense
//! rotation scheme is plenty.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::SpectralError;

/// Entries whose magnitude is below this are treated as zero when fixing the
/// sign of an eigenvector.
const SIGN_EPS: f64 = 1e-10;
/// Eigenvalues closer than this are considered tied when ordering pairs.
const EIGENVALUE_TIE: f64 = 1e-9;
/// Allowed asymmetry `|m_ij - m_ji|` of solver input.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    fn off_diagonal_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.rows {
            for j in 0..self.cols {
                if i != j {
                    s += self[(i, j)] * self[(i, j)];
                }
            }
        }
        s.sqrt()
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self[(i, j)];
                if a == 0.0 {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out[(i * other.rows + k, j * other.cols + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

/// Kronecker product of a list of vectors, first factor most significant.
pub fn kron_vectors(factors: &[&[f64]]) -> Vec<f64> {
    let mut out = vec![1.0];
    for f in factors {
        let mut next = Vec::with_capacity(out.len() * f.len());
        for &a in &out {
            next.extend(f.iter().map(|&b| a * b));
        }
        out = next;
    }
    out
}

/// Eigenpairs of a symmetric matrix.
///
/// Eigenvalues ascend; column `k` of `vectors` pairs with `values[k]`. Each
/// eigenvector has its first entry of magnitude above `1e-10` positive, and
/// pairs with tied eigenvalues are ordered lexicographically by vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

impl Spectrum {
    /// Assembles a spectrum from explicit pairs, e.g. a closed-form
    /// decomposition. Pairs are used in the given order and sign.
    pub fn from_pairs(values: Vec<f64>, vectors: Vec<Vec<f64>>) -> Result<Self, SpectralError> {
        let n = values.len();
        if vectors.len() != n || vectors.iter().any(|v| v.len() != n) {
            return Err(SpectralError::DimensionMismatch {
                expected: n,
                found: vectors.len(),
            });
        }
        Ok(Self { values, vectors })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k]
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }
}

/// Flips `v` so that its first entry with magnitude above the noise floor is
/// positive.
pub fn normalize_sign(v: &mut [f64]) {
    if let Some(first) = v.iter().copied().find(|x| x.abs() > SIGN_EPS) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Settings for [`sym_eig_with`].
#[derive(Debug, Clone, Copy)]
pub struct JacobiSettings {
    /// Stop once the off-diagonal Frobenius norm drops below this.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for JacobiSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-11,
            max_sweeps: 100,
        }
    }
}

/// Eigendecomposition of a real symmetric matrix with default settings.
pub fn sym_eig(m: &Matrix) -> Result<Spectrum, SpectralError> {
    sym_eig_with(m, JacobiSettings::default())
}

/// Cyclic Jacobi eigendecomposition.
///
/// Sweeps every `(p, q)` pair in row order, zeroing `a_pq` with a plane
/// rotation, until the off-diagonal mass falls below the tolerance.
pub fn sym_eig_with(m: &Matrix, settings: JacobiSettings) -> Result<Spectrum, SpectralError> {
    if !m.is_square() {
        return Err(SpectralError::DimensionMismatch {
            expected: m.rows(),
            found: m.cols(),
        });
    }
    let asym = m.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(SpectralError::NotSymmetric { asymmetry: asym });
    }
    let n = m.rows();
    let mut a = m.clone();
    // enforce exact symmetry so rotations stay consistent
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = avg;
            a[(j, i)] = avg;
        }
    }
    let mut v = Matrix::identity(n);

    let mut converged = a.off_diagonal_norm() < settings.tolerance;
    let mut sweeps = 0;
    while !converged {
        if sweeps == settings.max_sweeps {
            return Err(SpectralError::NoConvergence {
                sweeps,
                off_norm: a.off_diagonal_norm(),
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        sweeps += 1;
        converged = a.off_diagonal_norm() < settings.tolerance;
    }

    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|k| {
            let mut col = v.column(k);
            normalize_sign(&mut col);
            (a[(k, k)], col)
        })
        .collect();
    sort_pairs(&mut pairs);
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(Spectrum { values, vectors })
}

fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    // theta == 0 has signum 1.0 in Rust, giving t = 1 (a 45 degree turn)
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Sorts by eigenvalue, then orders each run of tied eigenvalues
/// lexicographically by eigenvector.
fn sort_pairs(pairs: &mut [(f64, Vec<f64>)]) {
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut start = 0;
    while start < pairs.len() {
        let mut end = start + 1;
        while end < pairs.len() && pairs[end].0 - pairs[end - 1].0 <= EIGENVALUE_TIE {
            end += 1;
        }
        if end - start > 1 {
            pairs[start..end].sort_by(|x, y| lexicographic(&x.1, &y.1));
        }
        start = end;
    }
}

fn lexicographic(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}
