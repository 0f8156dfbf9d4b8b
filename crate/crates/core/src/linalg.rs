//! Fixed-size dense complex linear algebra.
//!
//! Everything in this crate lives in the 2-dimensional single-qubit space or
//! the 4-dimensional two-qubit space (plus the 16-dimensional Liouville space
//! used to compare Lindblad generators), so matrices are stored inline as
//! row-major `[[Complex64; N]; N]` arrays and every operation is a pure
//! function on values.
//!
//! Basis ordering for two qubits is `{↑↑, ↑↓, ↓↑, ↓↓}`, i.e. index
//! `2 * s_a + s_b` with `↑ = 0` and `↓ = 1`.

use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexScalar = Complex64;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Square complex matrix of dimension `N`, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat<const N: usize>(pub [[Complex64; N]; N]);

/// Complex column vector of dimension `N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vector<const N: usize>(pub [Complex64; N]);

pub type Mat2 = Mat<2>;
pub type Mat4 = Mat<4>;
pub type Mat16 = Mat<16>;
pub type Vec2 = Vector<2>;
pub type Vec4 = Vector<4>;

impl<const N: usize> Default for Mat<N> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<const N: usize> Mat<N> {
    pub fn zeros() -> Self {
        Mat([[ZERO; N]; N])
    }

    pub fn identity() -> Self {
        let mut m = Self::zeros();
        for k in 0..N {
            m.0[k][k] = ONE;
        }
        m
    }

    pub fn from_diag(d: [Complex64; N]) -> Self {
        let mut m = Self::zeros();
        for k in 0..N {
            m.0[k][k] = d[k];
        }
        m
    }

    pub fn from_real_diag(d: [f64; N]) -> Self {
        Self::from_diag(d.map(|x| c(x, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut m = *self;
        for row in m.0.iter_mut() {
            for x in row.iter_mut() {
                *x *= s;
            }
        }
        m
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(c(s, 0.0))
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::zeros();
        for r in 0..N {
            for col in 0..N {
                m.0[r][col] = self.0[col][r].conj();
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros();
        for r in 0..N {
            for col in 0..N {
                m.0[r][col] = self.0[col][r];
            }
        }
        m
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        let mut m = *self;
        for row in m.0.iter_mut() {
            for x in row.iter_mut() {
                *x = x.conj();
            }
        }
        m
    }

    pub fn trace(&self) -> Complex64 {
        (0..N).map(|k| self.0[k][k]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|row| row.iter())
            .map(|x| x.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flat_map(|row| row.iter())
            .map(|x| x.norm())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.0
            .iter()
            .flat_map(|row| row.iter())
            .all(|x| x.re.is_finite() && x.im.is_finite())
    }

    /// Largest entry of `|m − m†|`.
    pub fn hermiticity_defect(&self) -> f64 {
        (*self - self.adjoint()).max_abs()
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    pub fn anticommutator(&self, other: &Self) -> Self {
        *self * *other + *other * *self
    }

    pub fn apply(&self, v: &Vector<N>) -> Vector<N> {
        let mut out = [ZERO; N];
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in 0..N {
                acc += self.0[r][k] * v.0[k];
            }
            *o = acc;
        }
        Vector(out)
    }

    /// Column `k` as a vector.
    pub fn column(&self, k: usize) -> Vector<N> {
        let mut v = [ZERO; N];
        for (r, x) in v.iter_mut().enumerate() {
            *x = self.0[r][k];
        }
        Vector(v)
    }
}

impl<const N: usize> Index<(usize, usize)> for Mat<N> {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.0[r][c]
    }
}

impl<const N: usize> IndexMut<(usize, usize)> for Mat<N> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.0[r][c]
    }
}

impl<const N: usize> Add for Mat<N> {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl<const N: usize> AddAssign for Mat<N> {
    fn add_assign(&mut self, rhs: Self) {
        for r in 0..N {
            for col in 0..N {
                self.0[r][col] += rhs.0[r][col];
            }
        }
    }
}

impl<const N: usize> Sub for Mat<N> {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for r in 0..N {
            for col in 0..N {
                self.0[r][col] -= rhs.0[r][col];
            }
        }
        self
    }
}

impl<const N: usize> Neg for Mat<N> {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale_re(-1.0)
    }
}

impl<const N: usize> Mul for Mat<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut m = Self::zeros();
        for r in 0..N {
            for k in 0..N {
                let a = self.0[r][k];
                if a == ZERO {
                    continue;
                }
                for col in 0..N {
                    m.0[r][col] += a * rhs.0[k][col];
                }
            }
        }
        m
    }
}

impl<const N: usize> Mul<Complex64> for Mat<N> {
    type Output = Self;
    fn mul(self, rhs: Complex64) -> Self {
        self.scale(rhs)
    }
}

impl<const N: usize> Default for Vector<N> {
    fn default() -> Self {
        Vector([ZERO; N])
    }
}

impl<const N: usize> Vector<N> {
    pub fn basis(k: usize) -> Self {
        let mut v = [ZERO; N];
        v[k] = ONE;
        Vector(v)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `⟨self|other⟩`, antilinear in `self`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.0.iter().zip(other.0.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Vector(self.0.map(|x| x * s))
    }

    pub fn scale_re(&self, s: f64) -> Self {
        Vector(self.0.map(|x| x * s))
    }

    pub fn conj(&self) -> Self {
        Vector(self.0.map(|x| x.conj()))
    }

    /// `|self⟩⟨other|`.
    pub fn outer(&self, other: &Self) -> Mat<N> {
        let mut m = Mat::zeros();
        for r in 0..N {
            for col in 0..N {
                m.0[r][col] = self.0[r] * other.0[col].conj();
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }
}

impl<const N: usize> Add for Vector<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0.iter()) {
            *o += r;
        }
        Vector(out)
    }
}

impl<const N: usize> Sub for Vector<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut out = self.0;
        for (o, r) in out.iter_mut().zip(rhs.0.iter()) {
            *o -= r;
        }
        Vector(out)
    }
}

/// Pauli matrices and ladder operators in the `{↑, ↓}` basis.
pub mod pauli {
    use super::{c, Mat2, I, ONE, ZERO};

    pub fn sigma_x() -> Mat2 {
        Mat2::from_rows([[ZERO, ONE], [ONE, ZERO]])
    }

    pub fn sigma_y() -> Mat2 {
        Mat2::from_rows([[ZERO, -I], [I, ZERO]])
    }

    pub fn sigma_z() -> Mat2 {
        Mat2::from_rows([[ONE, ZERO], [ZERO, -ONE]])
    }

    /// `σ₋ = |↓⟩⟨↑|`.
    pub fn sigma_minus() -> Mat2 {
        Mat2::from_rows([[ZERO, ZERO], [ONE, ZERO]])
    }

    /// `σ₊ = |↑⟩⟨↓|`.
    pub fn sigma_plus() -> Mat2 {
        Mat2::from_rows([[ZERO, ONE], [ZERO, ZERO]])
    }

    /// `v·σ` for a real 3-vector.
    pub fn dot(v: [f64; 3]) -> Mat2 {
        sigma_x().scale(c(v[0], 0.0)) + sigma_y().scale(c(v[1], 0.0)) + sigma_z().scale(c(v[2], 0.0))
    }

    /// `σ_y ⊗ σ_y`.
    pub fn sigma_yy() -> super::Mat4 {
        super::kron2(&sigma_y(), &sigma_y())
    }
}

impl Mat2 {
    pub fn from_rows(rows: [[Complex64; 2]; 2]) -> Self {
        Mat(rows)
    }
}

impl Mat4 {
    pub fn from_rows(rows: [[Complex64; 4]; 4]) -> Self {
        Mat(rows)
    }
}

/// Kronecker product `a ⊗ b`; the first factor acts on qubit A.
pub fn kron2(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut m = Mat4::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    m.0[2 * i + k][2 * j + l] = a.0[i][j] * b.0[k][l];
                }
            }
        }
    }
    m
}

/// Kronecker product of two 4×4 matrices, used for Liouville-space superoperators.
pub fn kron4(a: &Mat4, b: &Mat4) -> Mat16 {
    let mut m = Mat16::zeros();
    for i in 0..4 {
        for j in 0..4 {
            let aij = a.0[i][j];
            if aij == ZERO {
                continue;
            }
            for k in 0..4 {
                for l in 0..4 {
                    m.0[4 * i + k][4 * j + l] = aij * b.0[k][l];
                }
            }
        }
    }
    m
}

pub fn kron_vec2(a: &Vec2, b: &Vec2) -> Vec4 {
    Vector([a.0[0] * b.0[0], a.0[0] * b.0[1], a.0[1] * b.0[0], a.0[1] * b.0[1]])
}

/// Lift a single-qubit operator onto qubit A (`op ⊗ 1`).
pub fn lift_a(op: &Mat2) -> Mat4 {
    kron2(op, &Mat2::identity())
}

/// Lift a single-qubit operator onto qubit B (`1 ⊗ op`).
pub fn lift_b(op: &Mat2) -> Mat4 {
    kron2(&Mat2::identity(), op)
}

pub fn det2(m: &Mat2) -> Complex64 {
    m.0[0][0] * m.0[1][1] - m.0[0][1] * m.0[1][0]
}

pub fn trace2(m: &Mat2) -> Complex64 {
    m.trace()
}

pub fn trace4(m: &Mat4) -> Complex64 {
    m.trace()
}

/// Squarings allowed before `expm` gives up; covers norms up to ~2⁶⁰.
const MAX_SQUARINGS: u32 = 60;
const MAX_TAYLOR_TERMS: usize = 60;

pub const DEFAULT_EXPM_TOL: f64 = 1e-14;

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
///
/// The input is scaled by `2^-s` until its Frobenius norm is at most 0.5,
/// the series is summed until the next term is below `tol · 1e-2` relative
/// to the partial sum, and the result is squared `s` times. Works for any
/// (non-Hermitian) matrix.
pub fn expm<const N: usize>(m: &Mat<N>, tol: f64) -> Result<Mat<N>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("expm tolerance must be positive, got {tol}")));
    }
    if !m.is_finite() {
        return Err(Error::NonFinite("expm input"));
    }
    let norm = m.frobenius_norm();
    let mut squarings = 0u32;
    let mut scaled_norm = norm;
    while scaled_norm > 0.5 {
        scaled_norm *= 0.5;
        squarings += 1;
        if squarings > MAX_SQUARINGS {
            return Err(Error::ExpmNotConverged { norm });
        }
    }
    let a = m.scale_re(0.5f64.powi(squarings as i32));
    let mut sum = Mat::<N>::identity();
    let mut term = Mat::<N>::identity();
    let mut converged = false;
    for k in 1..=MAX_TAYLOR_TERMS {
        term = (term * a).scale_re(1.0 / k as f64);
        sum += term;
        if term.frobenius_norm() <= tol * 1e-2 * sum.frobenius_norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::ExpmNotConverged { norm });
    }
    for _ in 0..squarings {
        sum = sum * sum;
    }
    if !sum.is_finite() {
        return Err(Error::ExpmNotConverged { norm });
    }
    Ok(sum)
}

pub const DEFAULT_HERMITIAN_TOL: f64 = 1e-10;

/// Eigen-decomposition of a Hermitian 4×4 matrix.
#[derive(Clone, Copy, Debug)]
pub struct HermitianEigen {
    /// Eigenvalues in descending order.
    pub values: [f64; 4],
    /// Orthonormal eigenvectors stored as columns, matching `values`.
    pub vectors: Mat4,
}

impl HermitianEigen {
    /// `V · diag(f(λ)) · V†`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> Mat4 {
        let d = Mat4::from_real_diag(self.values.map(f));
        self.vectors * d * self.vectors.adjoint()
    }
}

/// Cyclic complex Jacobi eigensolver for Hermitian 4×4 matrices.
pub fn herm_eig4(m: &Mat4) -> Result<HermitianEigen> {
    herm_eig4_tol(m, DEFAULT_HERMITIAN_TOL)
}

pub fn herm_eig4_tol(m: &Mat4, herm_tol: f64) -> Result<HermitianEigen> {
    if !m.is_finite() {
        return Err(Error::NonFinite("herm_eig4 input"));
    }
    let defect = m.hermiticity_defect();
    if defect > herm_tol {
        return Err(Error::NotHermitian { defect });
    }
    // symmetrize so that round-off in the input cannot stall the sweeps
    let mut a = (*m + m.adjoint()).scale_re(0.5);
    let mut v = Mat4::identity();
    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..64 {
        let off: f64 = (0..4)
            .flat_map(|p| (0..4).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a.0[p][q].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                let apq = a.0[p][q];
                let r = apq.norm();
                if r <= 1e-300 {
                    continue;
                }
                let phase = apq / r;
                let app = a.0[p][p].re;
                let aqq = a.0[q][q].re;
                let theta = (aqq - app) / (2.0 * r);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                // W = D·G where D = diag(1, e^{-iφ}) on (p, q) makes the pivot real
                // and G is the real Jacobi rotation that annihilates it.
                let mut w = Mat4::identity();
                w.0[p][p] = c(cs, 0.0);
                w.0[p][q] = c(sn, 0.0);
                w.0[q][p] = -phase.conj() * sn;
                w.0[q][q] = phase.conj() * cs;
                a = w.adjoint() * a * w;
                a.0[p][q] = ZERO;
                a.0[q][p] = ZERO;
                v = v * w;
            }
        }
    }

    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&i, &j| a.0[j][j].re.total_cmp(&a.0[i][i].re));
    let mut values = [0.0; 4];
    let mut vectors = Mat4::zeros();
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = a.0[src][src].re;
        for r in 0..4 {
            vectors.0[r][dst] = v.0[r][src];
        }
    }
    Ok(HermitianEigen { values, vectors })
}

/// Singular values of a 4×4 matrix in descending order.
///
/// One-sided Jacobi: columns are rotated pairwise until mutually orthogonal,
/// which keeps the absolute error of small singular values at round-off level.
pub fn singular_values4(m: &Mat4) -> Result<[f64; 4]> {
    if !m.is_finite() {
        return Err(Error::NonFinite("singular_values4 input"));
    }
    let mut cols: [Vec4; 4] = [0, 1, 2, 3].map(|k| m.column(k));
    for _sweep in 0..64 {
        let mut rotated = false;
        for p in 0..3 {
            for q in (p + 1)..4 {
                let alpha = cols[p].norm_sqr();
                let beta = cols[q].norm_sqr();
                let g = cols[p].inner(&cols[q]);
                let r = g.norm();
                if r == 0.0 || r <= 1e-16 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * r);
                let t = if zeta == 0.0 { 1.0 } else { zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt()) };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                // rephase column q so the overlap is real, then rotate
                let aligned = cols[q].scale(g.conj() / r);
                let new_p = cols[p].scale_re(cs) - aligned.scale_re(sn);
                let new_q = cols[p].scale_re(sn) + aligned.scale_re(cs);
                cols[p] = new_p;
                cols[q] = new_q;
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv = cols.map(|v| v.norm());
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

/// Flatten the Lindblad-type map `ρ ↦ A ρ B` into Liouville space acting on
/// column-stacked `ρ`: `vec(AρB) = (Bᵀ ⊗ A) vec(ρ)`.
pub fn sandwich_superop(a: &Mat4, b: &Mat4) -> Mat16 {
    kron4(&b.transpose(), a)
}

/// Column-stacked `vec(ρ)`.
pub fn vec_columns(m: &Mat4) -> Vector<16> {
    let mut v = Vector::<16>::default();
    for r in 0..4 {
        for col in 0..4 {
            v.0[4 * col + r] = m.0[r][col];
        }
    }
    v
}

/// Inverse of [`vec_columns`].
pub fn unvec_columns(v: &Vector<16>) -> Mat4 {
    let mut m = Mat4::zeros();
    for r in 0..4 {
        for col in 0..4 {
            m.0[r][col] = v.0[4 * col + r];
        }
    }
    m
}

/// Applies a Liouville-space map to `ρ`.
pub fn apply_superop(sup: &Mat16, rho: &Mat4) -> Mat4 {
    unvec_columns(&sup.apply(&vec_columns(rho)))
}
