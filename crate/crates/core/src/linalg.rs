//! Dense complex linear algebra on small matrices.
//!
//! Everything here is row-major and sized for dimensions up to a few dozen.
//! The Hermitian eigensolver is a cyclic complex Jacobi iteration, chosen
//! because it is deterministic and accurate to machine precision at these
//! sizes. Eigenvectors and completed isometry columns follow one phase
//! convention: the first component of largest modulus is real and
//! nonnegative.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

pub type C64 = Complex64;

/// Complex column vector.
pub type CVector = Vec<C64>;

const JACOBI_OFF_TOL: f64 = 1e-13;
const JACOBI_MAX_SWEEPS: usize = 100;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense row-major complex matrix.
///
/// Serialized as a list of rows, each entry a `[re, im]` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<[f64; 2]>>", try_from = "Vec<Vec<[f64; 2]>>")]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![C64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from its rows; all rows must have equal length.
    pub fn from_rows(rows: Vec<Vec<C64>>) -> Result<Self> {
        let r = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(Self {
            rows: r,
            cols,
            data: rows.into_iter().flatten().collect(),
        })
    }

    /// Real diagonal matrix.
    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(dim: usize, columns: &[CVector]) -> Self {
        Self::from_fn(dim, columns.len(), |i, j| columns[j][i])
    }

    /// Outer product `a b†`.
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
    }

    /// Rank-one projector-like matrix `weight · v v†`.
    pub fn scaled_projector(weight: f64, v: &[C64]) -> Self {
        Self::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj() * weight)
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

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> CVector {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<C64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    /// `self += s · other`.
    pub fn add_scaled(&mut self, s: f64, other: &Matrix) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest `|A_ij - conj(A_ji)|`; infinite for non-square input.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_deviation() <= tol
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// `tr(A B)` without forming the product.
    pub fn trace_product(&self, other: &Matrix) -> C64 {
        assert_eq!(self.cols, other.rows);
        assert_eq!(self.rows, other.cols);
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        acc
    }

    pub fn mul_vec(&self, v: &[C64]) -> CVector {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `U A U†`.
    pub fn conjugate_by(&self, u: &Matrix) -> Self {
        &(u * self) * &u.adjoint()
    }

    /// Embeds `self` in the top-left block of a `dim × dim` zero matrix.
    pub fn embed_top_left(&self, dim: usize) -> Self {
        assert!(dim >= self.rows && dim >= self.cols);
        let mut m = Self::zeros(dim, dim);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(i, j)] = self[(i, j)];
            }
        }
        m
    }
}

impl From<Matrix> for Vec<Vec<[f64; 2]>> {
    fn from(m: Matrix) -> Self {
        (0..m.rows)
            .map(|i| m.row(i).iter().map(|z| [z.re, z.im]).collect())
            .collect()
    }
}

impl TryFrom<Vec<Vec<[f64; 2]>>> for Matrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        if rows.iter().flatten().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Format("non-finite matrix entry".into()));
        }
        Matrix::from_rows(
            rows.into_iter()
                .map(|r| r.into_iter().map(|[re, im]| C64::new(re, im)).collect())
                .collect(),
        )
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Mul for &Matrix {
    type Output = Matrix;
    fn mul(self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "matrix product shape mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        out
    }
}

impl Add for &Matrix {
    type Output = Matrix;
    fn add(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Matrix {
    type Output = Matrix;
    fn sub(self, rhs: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl AddAssign<&Matrix> for Matrix {
    fn add_assign(&mut self, rhs: &Matrix) {
        self.add_scaled(1.0, rhs);
    }
}

/// `⟨a, b⟩ = Σ conj(a_i) b_i`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Rescales `v` by a unit phase so that its first component of largest
/// modulus is real and nonnegative.
pub fn normalize_phase(v: &mut [C64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v
        .iter()
        .position(|z| z.norm() >= max * (1.0 - 1e-12))
        .expect("nonzero vector has a pivot");
    let phase = v[pivot].conj() / v[pivot].norm();
    for z in v.iter_mut() {
        *z *= phase;
    }
    v[pivot].im = 0.0;
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Ascending eigenvalues.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal eigenvectors, `eigenvectors[k]` belongs to `eigenvalues[k]`.
    pub eigenvectors: Vec<CVector>,
}

impl Spectrum {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `Σ f(λ_k) v_k v_k†`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.dim();
        let mut m = Matrix::zeros(n, n);
        for (&lam, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            m.add_scaled(f(lam), &Matrix::outer(v, v));
        }
        m
    }

    pub fn reconstruct(&self) -> Matrix {
        self.map(|x| x)
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.min().abs().max(self.max().abs())
    }

    /// Rank cutoff: eigenvalues above `tol::RANK · max(λ_max, 1 if zero)`.
    pub fn rank_threshold(&self) -> f64 {
        let m = self.max_abs();
        tol::RANK * if m > 0.0 { m } else { 1.0 }
    }

    pub fn rank(&self) -> usize {
        let t = self.rank_threshold();
        self.eigenvalues.iter().filter(|&&l| l > t).count()
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Hermitian eigendecomposition by cyclic Jacobi rotations.
pub fn eig_hermitian(h: &Matrix) -> Result<Spectrum> {
    if !h.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition of a {}x{} matrix",
            h.rows(),
            h.cols()
        )));
    }
    let dev = h.hermitian_deviation();
    if dev > tol::HERM {
        return Err(Error::NotHermitian(dev));
    }
    let n = h.rows();
    let mut a = h.hermitian_part();
    let mut v = Matrix::identity(n);
    let scale = h.frobenius_norm().max(1.0);

    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a) <= JACOBI_OFF_TOL * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                let mag = apq.norm();
                if mag < 1e-300 {
                    continue;
                }
                // Phase out arg(a_pq), then a real symmetric rotation.
                let phase = (apq / mag).conj();
                let tau = (a[(q, q)].re - a[(p, p)].re) / (2.0 * mag);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = t * cs;
                let g00 = C64::new(cs, 0.0);
                let g01 = C64::new(sn, 0.0);
                let g10 = phase * (-sn);
                let g11 = phase * cs;

                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = akp * g00 + akq * g10;
                    a[(k, q)] = akp * g01 + akq * g11;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = g00.conj() * apk + g10.conj() * aqk;
                    a[(q, k)] = g01.conj() * apk + g11.conj() * aqk;
                }
                a[(p, q)] = C64::new(0.0, 0.0);
                a[(q, p)] = C64::new(0.0, 0.0);
                a[(p, p)].im = 0.0;
                a[(q, q)].im = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * g00 + vkq * g10;
                    v[(k, q)] = vkp * g01 + vkq * g11;
                }
            }
        }
    }

    let mut pairs: Vec<(f64, CVector)> = (0..n)
        .map(|k| {
            let mut col = v.column(k);
            normalize_phase(&mut col);
            (a[(k, k)].re, col)
        })
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    let (eigenvalues, eigenvectors) = pairs.into_iter().unzip();
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Operator norm of a Hermitian matrix, `max |λ|`.
pub fn op_norm(h: &Matrix) -> Result<f64> {
    Ok(eig_hermitian(h)?.max_abs())
}

/// `‖V†V − I‖_F` for a matrix with intended orthonormal columns.
pub fn isometry_defect(v: &Matrix) -> f64 {
    let g = &v.adjoint() * v;
    (&g - &Matrix::identity(v.cols())).frobenius_norm()
}

/// Extends an `n × d` isometry to an `n × n` unitary whose first `d`
/// columns are exactly the columns of `v`.
pub fn complete_isometry(v: &Matrix) -> Result<Matrix> {
    let (n, d) = (v.rows(), v.cols());
    if n < d {
        return Err(Error::DimensionMismatch(format!(
            "cannot complete a {n}x{d} isometry"
        )));
    }
    let defect = isometry_defect(v);
    if defect > tol::ORTH {
        return Err(Error::NotOrthonormal(defect));
    }
    let mut basis: Vec<CVector> = (0..d).map(|j| v.column(j)).collect();
    let mut used = vec![false; n];
    while basis.len() < n {
        // Pick the unused standard basis vector with the largest residual;
        // residual² of e_j is 1 − Σ_b |b_j|².
        let (best, _) = (0..n)
            .filter(|&j| !used[j])
            .map(|j| (j, 1.0 - basis.iter().map(|b| b[j].norm_sqr()).sum::<f64>()))
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
        used[best] = true;
        let mut r: CVector = vec![C64::new(0.0, 0.0); n];
        r[best] = C64::new(1.0, 0.0);
        for _ in 0..2 {
            for b in &basis {
                let proj = inner(b, &r);
                for (ri, bi) in r.iter_mut().zip(b) {
                    *ri -= proj * bi;
                }
            }
        }
        let nrm = vec_norm(&r);
        for z in r.iter_mut() {
            *z /= nrm;
        }
        normalize_phase(&mut r);
        basis.push(r);
    }
    let mut u = Matrix::from_columns(n, &basis);
    // Keep the supplied columns bit-identical.
    for i in 0..n {
        for j in 0..d {
            u[(i, j)] = v[(i, j)];
        }
    }
    Ok(u)
}

/// Clock-and-shift unitaries `X^a Z^b`, `a, b ∈ [0, k)`, ordered with `a`
/// as the outer index. `X|j⟩ = |j+1⟩`, `Z|j⟩ = ω^j |j⟩`.
pub fn heisenberg_weyl(k: usize) -> Result<Vec<Matrix>> {
    if k == 0 {
        return Err(Error::InvalidParameter("Heisenberg-Weyl dimension must be >= 1".into()));
    }
    let omega = |p: usize| C64::from_polar(1.0, 2.0 * PI * (p % k) as f64 / k as f64);
    let mut out = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in 0..k {
            let mut w = Matrix::zeros(k, k);
            for j in 0..k {
                w[((j + a) % k, j)] = omega(b * j);
            }
            out.push(w);
        }
    }
    Ok(out)
}

/// Orthonormal bases of the span of a vector family and of its complement.
#[derive(Clone, Debug)]
pub struct SpanSplit {
    pub range: Vec<CVector>,
    pub complement: Vec<CVector>,
}

impl SpanSplit {
    pub fn new(dim: usize, vectors: &[CVector]) -> Result<Self> {
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch("vector length differs from dim".into()));
        }
        if vectors.is_empty() {
            return Ok(Self {
                range: Vec::new(),
                complement: (0..dim)
                    .map(|j| {
                        let mut e = vec![C64::new(0.0, 0.0); dim];
                        e[j] = C64::new(1.0, 0.0);
                        e
                    })
                    .collect(),
            });
        }
        let mut gram = Matrix::zeros(dim, dim);
        for v in vectors {
            gram.add_scaled(1.0, &Matrix::outer(v, v));
        }
        let spec = eig_hermitian(&gram)?;
        let t = spec.rank_threshold();
        let mut range = Vec::new();
        let mut complement = Vec::new();
        // Descending order for the range so the dominant directions come first.
        for (lam, v) in spec.eigenvalues.iter().zip(spec.eigenvectors).rev() {
            if *lam > t {
                range.push(v);
            } else {
                complement.push(v);
            }
        }
        Ok(Self { range, complement })
    }

    pub fn projector(&self, dim: usize) -> Matrix {
        projector_from_basis(dim, &self.range)
    }

    pub fn complement_projector(&self, dim: usize) -> Matrix {
        projector_from_basis(dim, &self.complement)
    }
}

fn projector_from_basis(dim: usize, basis: &[CVector]) -> Matrix {
    let mut p = Matrix::zeros(dim, dim);
    for b in basis {
        p.add_scaled(1.0, &Matrix::outer(b, b));
    }
    p
}

/// Orthogonal projector onto `span(vectors)` in `C^dim`.
pub fn projector_onto(dim: usize, vectors: &[CVector]) -> Result<Matrix> {
    Ok(SpanSplit::new(dim, vectors)?.projector(dim))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut impl Rng) -> Matrix {
        let a = Matrix::from_fn(n, n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        a.hermitian_part()
    }

    #[test]
    fn identity_spectrum() {
        let s = eig_hermitian(&Matrix::identity(3)).unwrap();
        assert_eq!(s.eigenvalues, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn diagonal_sorted() {
        let s = eig_hermitian(&Matrix::diag(&[2.0, -1.0])).unwrap();
        assert_eq!(s.eigenvalues, vec![-1.0, 2.0]);
    }

    #[test]
    fn pauli_x() {
        let x = Matrix::from_rows(vec![vec![c(0., 0.), c(1., 0.)], vec![c(1., 0.), c(0., 0.)]]).unwrap();
        let s = eig_hermitian(&x).unwrap();
        assert!((s.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((s.eigenvalues[1] - 1.0).abs() < 1e-14);
        let r = 1.0 / 2f64.sqrt();
        let v0 = &s.eigenvectors[0];
        let v1 = &s.eigenvectors[1];
        // (|0⟩ − |1⟩)/√2 and (|0⟩ + |1⟩)/√2 under the phase convention.
        assert!((v0[0] - c(r, 0.)).norm() < 1e-12 && (v0[1] - c(-r, 0.)).norm() < 1e-12);
        assert!((v1[0] - c(r, 0.)).norm() < 1e-12 && (v1[1] - c(r, 0.)).norm() < 1e-12);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = Matrix::from_rows(vec![vec![c(0., 0.), c(1., 0.)], vec![c(0., 0.), c(0., 0.)]]).unwrap();
        assert!(matches!(eig_hermitian(&m), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn complex_matrix_reconstruction_and_orthogonality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 5, 16, 33] {
            let h = random_hermitian(n, &mut rng);
            let s = eig_hermitian(&h).unwrap();
            let err = (&s.reconstruct() - &h).frobenius_norm();
            assert!(err <= tol::RECON * h.frobenius_norm().max(1e-300), "n={n} err={err}");
            let v = Matrix::from_columns(n, &s.eigenvectors);
            assert!(isometry_defect(&v) < 1e-12);
            assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn deterministic_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = random_hermitian(6, &mut rng);
        let a = eig_hermitian(&h).unwrap();
        let b = eig_hermitian(&h).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.eigenvectors, b.eigenvectors);
    }

    #[test]
    fn op_norm_cases() {
        assert!((op_norm(&Matrix::identity(4)).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(op_norm(&Matrix::zeros(3, 3)).unwrap(), 0.0);
        // (2/3)(ψψ† + φφ†), ψ = (1,0), φ = (−1/2, √3/2): eigenvalues 1 and 1/3.
        let psi = vec![c(1., 0.), c(0., 0.)];
        let phi = vec![c(-0.5, 0.), c(3f64.sqrt() / 2.0, 0.)];
        let mut m = Matrix::scaled_projector(2.0 / 3.0, &psi);
        m.add_scaled(2.0 / 3.0, &Matrix::outer(&phi, &phi));
        assert!((op_norm(&m).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn complete_identity_is_identity() {
        let u = complete_isometry(&Matrix::identity(3)).unwrap();
        assert_eq!(u, Matrix::identity(3));
    }

    #[test]
    fn complete_single_column() {
        let r = 1.0 / 2f64.sqrt();
        let v = Matrix::from_rows(vec![vec![c(r, 0.)], vec![c(r, 0.)]]).unwrap();
        let u = complete_isometry(&v).unwrap();
        assert!(isometry_defect(&u) < 1e-14);
        // Hand Gram–Schmidt of e_1 against v gives (1/√2, −1/√2).
        assert!((u[(0, 1)] - c(r, 0.)).norm() < 1e-14);
        assert!((u[(1, 1)] - c(-r, 0.)).norm() < 1e-14);
    }

    #[test]
    fn complete_trine_isometry() {
        let s = (2.0f64 / 3.0).sqrt();
        let angles = [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0];
        let rows = angles
            .iter()
            .map(|t| vec![c(s * t.cos(), 0.), c(s * t.sin(), 0.)])
            .collect();
        let v = Matrix::from_rows(rows).unwrap();
        let u = complete_isometry(&v).unwrap();
        assert!(isometry_defect(&u) < 1e-12);
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(u[(i, j)], v[(i, j)]);
            }
        }
    }

    #[test]
    fn complete_rejects_non_isometry() {
        let v = Matrix::from_rows(vec![vec![c(1., 0.)], vec![c(1., 0.)]]).unwrap();
        assert!(matches!(complete_isometry(&v), Err(Error::NotOrthonormal(_))));
    }

    #[test]
    fn heisenberg_weyl_small() {
        assert_eq!(heisenberg_weyl(1).unwrap(), vec![Matrix::identity(1)]);
        let w = heisenberg_weyl(2).unwrap();
        let z = Matrix::diag(&[1.0, -1.0]);
        let x = Matrix::from_rows(vec![vec![c(0., 0.), c(1., 0.)], vec![c(1., 0.), c(0., 0.)]]).unwrap();
        let close = |a: &Matrix, b: &Matrix| (a - b).frobenius_norm() < 1e-14;
        assert!(close(&w[0], &Matrix::identity(2)));
        assert!(close(&w[1], &z));
        assert!(close(&w[2], &x));
        assert!(close(&w[3], &(&x * &z)));
        assert!(heisenberg_weyl(0).is_err());
    }

    #[test]
    fn heisenberg_weyl_twirl_k3() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_hermitian(3, &mut rng);
        let ws = heisenberg_weyl(3).unwrap();
        let mut avg = Matrix::zeros(3, 3);
        for w in &ws {
            assert!(isometry_defect(w) < 1e-12);
            avg.add_scaled(1.0 / 9.0, &b.conjugate_by(w));
        }
        let expect = Matrix::identity(3).scale(b.trace().re / 3.0);
        assert!((&avg - &expect).frobenius_norm() < 1e-10);
    }

    #[test]
    fn projector_cases() {
        let e0 = vec![c(1., 0.), c(0., 0.)];
        let p = projector_onto(2, std::slice::from_ref(&e0)).unwrap();
        assert!((&p - &Matrix::diag(&[1.0, 0.0])).frobenius_norm() < 1e-14);

        let r = 1.0 / 2f64.sqrt();
        let p = projector_onto(2, &[e0, vec![c(r, 0.), c(r, 0.)]]).unwrap();
        assert!((&p - &Matrix::identity(2)).frobenius_norm() < 1e-12);

        let v = vec![c(r, 0.), c(r, 0.), c(0., 0.)];
        let p = projector_onto(3, &[v]).unwrap();
        let expect = Matrix::from_fn(3, 3, |i, j| if i < 2 && j < 2 { c(0.5, 0.) } else { c(0., 0.) });
        assert!((&p - &expect).frobenius_norm() < 1e-12);
        assert!((&(&p * &p) - &p).frobenius_norm() < 1e-12);

        assert_eq!(projector_onto(3, &[]).unwrap(), Matrix::zeros(3, 3));
    }

    #[test]
    fn projector_rank_of_dependent_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: CVector = (0..4).map(|_| c(rng.random(), rng.random())).collect();
        let b: CVector = (0..4).map(|_| c(rng.random(), rng.random())).collect();
        let sum: CVector = a.iter().zip(&b).map(|(x, y)| x + y * 2.0).collect();
        let split = SpanSplit::new(4, &[a, b, sum]).unwrap();
        assert_eq!(split.range.len(), 2);
        assert_eq!(split.complement.len(), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn completion_is_unitary(seed in any::<u64>(), d in 1usize..=16, extra in 0usize..=48) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = d + extra;
                let u = crate::random::haar_unitary(n, &mut rng);
                let cols: Vec<CVector> = (0..d).map(|j| u.column(j)).collect();
                let v = Matrix::from_columns(n, &cols);
                let w = complete_isometry(&v).unwrap();
                prop_assert!(isometry_defect(&w) <= 1e-10);
            }

            #[test]
            fn heisenberg_weyl_twirl(seed in any::<u64>(), k in 1usize..=8) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let ws = heisenberg_weyl(k).unwrap();
                let b = random_hermitian(k, &mut rng);
                let mut avg = Matrix::zeros(k, k);
                for w in &ws {
                    avg.add_scaled(1.0 / (k * k) as f64, &b.conjugate_by(w));
                }
                let expect = Matrix::identity(k).scale(b.trace().re / k as f64);
                prop_assert!((&avg - &expect).frobenius_norm() <= 1e-10);
            }

            #[test]
            fn spectrum_reconstructs(seed in any::<u64>(), n in 1usize..=24) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let h = random_hermitian(n, &mut rng);
                let s = eig_hermitian(&h).unwrap();
                prop_assert!((&s.reconstruct() - &h).frobenius_norm() <= tol::RECON * h.frobenius_norm());
                let v = Matrix::from_columns(n, &s.eigenvectors);
                prop_assert!(isometry_defect(&v) <= tol::ORTH);
            }
        }
    }
}
