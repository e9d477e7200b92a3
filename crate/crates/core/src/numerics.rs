//! Dense complex linear algebra and the seeded random source.
//!
//! [`ComplexMatrix`] is the single numeric carrier used across the crate:
//! channel blocks, covariances, message means (as single-column matrices)
//! and operators all live in it. Storage, products and the Hermitian
//! eigensolver behind principal square roots come from `nalgebra`. Hermitian
//! solves use the Cholesky below, which rejects a non-positive pivot.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Absolute tolerance on `max |A_ij - conj(A_ji)|` for Hermitian inputs.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Relative clamp threshold for negative eigenvalues in [`principal_sqrt`].
pub const EIGEN_CLAMP_REL: f64 = 1e-12;

pub type C64 = Complex64;

/// Dense complex matrix. Column vectors are `n x 1` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix(DMatrix<C64>);

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        Self(DMatrix::from_diagonal_element(n, n, C64::new(scale, 0.0)))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        Self(DMatrix::from_fn(rows, cols, f))
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, &entries)))
    }

    pub fn column(entries: Vec<C64>) -> Self {
        let n = entries.len();
        Self(DMatrix::from_vec(n, 1, entries))
    }

    pub fn from_nalgebra(m: DMatrix<C64>) -> Self {
        Self(m)
    }

    pub fn as_nalgebra(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_nalgebra(self) -> DMatrix<C64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, value: C64) {
        self.0[(i, j)] = value;
    }

    pub fn row_major(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.rows() * self.cols());
        for i in 0..self.rows() {
            for j in 0..self.cols() {
                out.push(self.0[(i, j)]);
            }
        }
        out
    }

    /// Column-major view of the entries; for a column vector this is the vector itself.
    pub fn as_slice(&self) -> &[C64] {
        self.0.as_slice()
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self(&self.0 * C64::new(factor, 0.0))
    }

    pub fn scale_complex(&self, factor: C64) -> Self {
        Self(&self.0 * factor)
    }

    /// `self + shift * I`.
    pub fn shift_diagonal(&self, shift: f64) -> Self {
        let mut out = self.0.clone();
        for i in 0..out.nrows().min(out.ncols()) {
            out[(i, i)] += shift;
        }
        Self(out)
    }

    /// `self + diag(shifts)`.
    pub fn shift_diagonal_by(&self, shifts: &[f64]) -> Self {
        let mut out = self.0.clone();
        for (i, s) in shifts.iter().enumerate() {
            out[(i, i)] += *s;
        }
        Self(out)
    }

    pub fn add_assign(&mut self, other: &Self) {
        self.0 += &other.0;
    }

    pub fn sub_assign(&mut self, other: &Self) {
        self.0 -= &other.0;
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `max |A_ij - conj(A_ji)|`; infinite for non-square input.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.0[(i, j)] - self.0[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// `(A + A^H) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    pub fn block(&self, row: usize, col: usize, nrows: usize, ncols: usize) -> Self {
        Self(self.0.view((row, col), (nrows, ncols)).into_owned())
    }

    pub fn set_block(&mut self, row: usize, col: usize, block: &Self) {
        self.0.view_mut((row, col), block.shape()).copy_from(&block.0);
    }

    /// Stacks column vectors (or any matrices with equal column counts) vertically.
    pub fn vstack(parts: &[Self]) -> Self {
        let cols = parts.first().map_or(1, |p| p.cols());
        let rows = parts.iter().map(|p| p.rows()).sum();
        let mut out = Self::zeros(rows, cols);
        let mut offset = 0;
        for p in parts {
            out.set_block(offset, 0, p);
            offset += p.rows();
        }
        out
    }

    /// Splits a column into consecutive blocks of the given sizes.
    pub fn split_rows(&self, sizes: &[usize]) -> Vec<Self> {
        let mut offset = 0;
        sizes
            .iter()
            .map(|&n| {
                let b = self.block(offset, 0, n, self.cols());
                offset += n;
                b
            })
            .collect()
    }

    /// Entry-wise convex combination `weight * self + (1 - weight) * other`.
    pub fn blend(&self, other: &Self, weight: f64) -> Self {
        Self(&self.0 * C64::new(weight, 0.0) + &other.0 * C64::new(1.0 - weight, 0.0))
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix(&self.0 * &rhs.0)
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;
    fn neg(self) -> ComplexMatrix {
        ComplexMatrix(-&self.0)
    }
}

fn check_hermitian(a: &ComplexMatrix) -> Result<()> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let deviation = a.hermitian_deviation();
    // NaN deviations fall through to the factorization, which rejects them.
    if deviation > HERMITIAN_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(())
}

/// Cholesky factor `A = L L^H` of a Hermitian positive-definite matrix,
/// kept so repeated solves against the same operator skip refactorization.
#[derive(Clone, Debug)]
pub struct HermitianFactor {
    lower: DMatrix<C64>,
}

impl HermitianFactor {
    /// Factors `a`, reading its lower triangle. Fails on a pivot `<= 0`.
    pub fn new(a: &ComplexMatrix) -> Result<Self> {
        check_hermitian(a)?;
        if !a.is_finite() {
            return Err(Error::NonFinite("hermitian factorization input"));
        }
        let n = a.rows();
        let mut l = DMatrix::<C64>::zeros(n, n);
        for j in 0..n {
            let mut pivot = a.0[(j, j)].re;
            for p in 0..j {
                pivot -= l[(j, p)].norm_sqr();
            }
            if !(pivot > 0.0) {
                return Err(Error::NotPositiveDefinite);
            }
            let d = pivot.sqrt();
            l[(j, j)] = C64::new(d, 0.0);
            for i in j + 1..n {
                let mut acc = a.0[(i, j)];
                for p in 0..j {
                    acc -= l[(i, p)] * l[(j, p)].conj();
                }
                l[(i, j)] = acc / d;
            }
        }
        Ok(Self { lower: l })
    }

    /// Rebuilds a factor from a stored lower-triangular `L`.
    pub fn from_lower(lower: &ComplexMatrix) -> Result<Self> {
        if !lower.is_square() {
            return Err(Error::DimensionMismatch("Cholesky factor must be square".into()));
        }
        let n = lower.rows();
        for i in 0..n {
            let d = lower.get(i, i);
            if !(d.re > 0.0) || d.im != 0.0 {
                return Err(Error::NotPositiveDefinite);
            }
            for j in i + 1..n {
                if lower.get(i, j) != C64::new(0.0, 0.0) {
                    return Err(Error::Codec("Cholesky factor is not lower triangular".into()));
                }
            }
        }
        Ok(Self { lower: lower.0.clone() })
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    pub fn lower(&self) -> ComplexMatrix {
        ComplexMatrix(self.lower.clone())
    }

    /// `A^{-1} B` by forward then backward substitution.
    pub fn solve(&self, b: &ComplexMatrix) -> ComplexMatrix {
        let l = &self.lower;
        let n = l.nrows();
        let mut x = b.0.clone();
        for c in 0..x.ncols() {
            for i in 0..n {
                let mut acc = x[(i, c)];
                for p in 0..i {
                    acc -= l[(i, p)] * x[(p, c)];
                }
                x[(i, c)] = acc / l[(i, i)].re;
            }
            for i in (0..n).rev() {
                let mut acc = x[(i, c)];
                for p in i + 1..n {
                    acc -= l[(p, i)].conj() * x[(p, c)];
                }
                x[(i, c)] = acc / l[(i, i)].re;
            }
        }
        ComplexMatrix(x)
    }

    pub fn inverse(&self) -> ComplexMatrix {
        self.solve(&ComplexMatrix::identity(self.dim())).hermitian_part()
    }
}

/// Solves `A X = B` for Hermitian positive-definite `A` by Cholesky.
pub fn hermitian_solve(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ComplexMatrix> {
    if a.rows() != b.rows() {
        return Err(Error::DimensionMismatch(format!(
            "solve of {}x{} system against {} rows",
            a.rows(),
            a.cols(),
            b.rows()
        )));
    }
    Ok(HermitianFactor::new(a)?.solve(b))
}

/// Real eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &ComplexMatrix) -> Result<Vec<f64>> {
    check_hermitian(a)?;
    let eig = SymmetricEigen::new(a.hermitian_part().0);
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}

/// Principal (Hermitian PSD) square root of a Hermitian PSD matrix.
///
/// Eigenvalues in `[-1e-12 * |A|, 0)` are clamped to zero, with `|A|` the
/// spectral radius.
pub fn principal_sqrt(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    check_hermitian(a)?;
    let n = a.rows();
    let eig = SymmetricEigen::new(a.hermitian_part().0);
    let radius = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tolerance = EIGEN_CLAMP_REL * radius;
    let mut roots = Vec::with_capacity(n);
    for &lambda in eig.eigenvalues.iter() {
        if lambda < -tolerance {
            return Err(Error::IndefiniteBeyondTolerance {
                eigenvalue: lambda,
                tolerance: -tolerance,
            });
        }
        roots.push(C64::new(lambda.max(0.0).sqrt(), 0.0));
    }
    let u = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(n, n, |i, j| u[(i, j)] * roots[j]);
    Ok(ComplexMatrix(scaled * u.adjoint()).hermitian_part())
}

/// Kac-Murdock-Szegő correlation matrix, entry `(i, j) = rho^|i - j|`.
pub fn exp_correlation(rho: f64, n: usize) -> Result<ComplexMatrix> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidRho(rho));
    }
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        C64::new(rho.powi(i.abs_diff(j) as i32), 0.0)
    }))
}

/// Seeded random source.
///
/// Backed by ChaCha8 (`rand_chacha::ChaCha8Rng`) with the 64-bit seed
/// expanded through `SeedableRng::seed_from_u64`. Streams are portable:
/// the same `(seed, stream)` pair yields the same draws on every platform.
/// Normal deviates use the `rand_distr` ziggurat sampler.
#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    /// Independent stream keyed by `(seed, stream)`. Used to give every
    /// channel edge its own sub-stream so synthesis order does not matter.
    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw from `[0, 1)` with 53 bits of precision.
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Circularly-symmetric complex normal with `E|z|^2 = variance`.
    pub fn complex_normal(&mut self, variance: f64) -> C64 {
        let s = (variance / 2.0).sqrt();
        let re = self.standard_normal();
        let im = self.standard_normal();
        C64::new(s * re, s * im)
    }
}

/// `m x n` matrix of i.i.d. circularly-symmetric complex Gaussians with
/// per-entry variance `std^2`. Entries are drawn in row-major order.
pub fn complex_gaussian_matrix(rng: &mut Rng, m: usize, n: usize, std: f64) -> ComplexMatrix {
    let variance = std * std;
    let entries = (0..m * n).map(|_| rng.complex_normal(variance)).collect();
    ComplexMatrix::from_row_major(m, n, entries).expect("entry count matches shape")
}

/// Relative error `|a - b| / |b|` in Frobenius norm; absolute when `b = 0`.
pub fn relative_error(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let denom = b.frobenius_norm();
    let diff = (a - b).frobenius_norm();
    if denom == 0.0 {
        diff
    } else {
        diff / denom
    }
}
