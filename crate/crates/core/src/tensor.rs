//! Small dense vectors and second-order tensors over `R^d`, plus the two
//! numerical kernels the rest of the crate leans on: the matrix exponential
//! and the continuous Lyapunov solve.
//!
//! Slot convention, used everywhere in the crate: a [`Tensor2`] is stored
//! row-major with the row index for the left tensor slot and the column index
//! for the right one, so `(u ⊗ v)[i][j] = u[i] * v[j]`. An iterated integral
//! `∫ X ⊗ dX` therefore has entry `(i, j)` equal to `∫ X^i dX^j`.

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{Error, Result};

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 16;

/// Per-entry tolerance for the symmetry of an oracle covariance.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Smallest eigenvalue an oracle covariance may have.
pub const PSD_TOL: f64 = -1e-8;

/// A point or increment in `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorD(Vec<f64>);

impl VectorD {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("vector of dimension 0".into()));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("vector"));
        }
        Ok(Self(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    /// Unit vector `e_k` in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[k] = 1.0;
        Self(v)
    }

    pub(crate) fn from_vec_unchecked(entries: Vec<f64>) -> Self {
        Self(entries)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn scale(&self, a: f64) -> Self {
        Self(self.0.iter().map(|x| a * x).collect())
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl Index<usize> for VectorD {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl Add for &VectorD {
    type Output = VectorD;
    fn add(self, rhs: &VectorD) -> VectorD {
        assert_eq!(self.dim(), rhs.dim(), "vector dimension mismatch");
        VectorD(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &VectorD {
    type Output = VectorD;
    fn sub(self, rhs: &VectorD) -> VectorD {
        assert_eq!(self.dim(), rhs.dim(), "vector dimension mismatch");
        VectorD(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

/// A `d × d` real tensor in `(R^d)^{⊗2}`.
#[derive(Clone, PartialEq)]
pub struct Tensor2 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            t[(i, i)] = 1.0;
        }
        t
    }

    pub fn diag(entries: &[f64]) -> Self {
        let mut t = Self::zeros(entries.len());
        for (i, &x) in entries.iter().enumerate() {
            t[(i, i)] = x;
        }
        t
    }

    /// Builds a tensor from its rows, validating shape and finiteness.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("tensor of dimension 0".into()));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("tensor"));
        }
        Ok(Self { dim, data })
    }

    pub(crate) fn from_data(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        let d = self.dim;
        let mut t = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                t.data[j * d + i] = self.data[i * d + j];
            }
        }
        t
    }

    pub fn scale(&self, a: f64) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|x| a * x).collect(),
        }
    }

    pub fn matmul(&self, rhs: &Tensor2) -> Self {
        assert_eq!(self.dim, rhs.dim, "tensor dimension mismatch");
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out[i * d + j] += a * rhs.data[k * d + j];
                }
            }
        }
        Self { dim: d, data: out }
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|i| (0..d).map(|k| self.data[i * d + k] * v[k]).sum())
            .collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Induced 1-norm (maximum absolute column sum).
    pub fn norm1(&self) -> f64 {
        let d = self.dim;
        (0..d)
            .map(|j| (0..d).map(|i| self.data[i * d + j].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let d = self.dim;
        (0..d).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn is_antisymmetric(&self, tol: f64) -> bool {
        let d = self.dim;
        (0..d).all(|i| (0..=i).all(|j| (self[(i, j)] + self[(j, i)]).abs() <= tol))
    }

    /// Smallest eigenvalue of the symmetric part.
    pub fn min_sym_eigenvalue(&self) -> f64 {
        let s = sym(self);
        let m = DMatrix::from_row_slice(self.dim, self.dim, &s.data);
        m.symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }

    /// Smallest real part over the (complex) spectrum.
    pub fn min_eigenvalue_real_part(&self) -> f64 {
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.data);
        m.complex_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |a, z| a.min(z.re))
    }

    pub fn inverse(&self) -> Result<Self> {
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.data);
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::InvalidArgument("singular matrix".into()))?;
        Ok(from_nalgebra(&inv))
    }

    /// `self += a * (u ⊗ v)` without allocating.
    #[inline]
    pub(crate) fn add_outer_scaled(&mut self, a: f64, u: &[f64], v: &[f64]) {
        let d = self.dim;
        for i in 0..d {
            let ui = a * u[i];
            let row = &mut self.data[i * d..(i + 1) * d];
            for (r, &vj) in row.iter_mut().zip(v) {
                *r += ui * vj;
            }
        }
    }

    pub(crate) fn add_assign(&mut self, rhs: &Tensor2) {
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }

    /// `max |self - other| / scale` with a floor of 1 on the scale.
    pub fn rel_diff(&self, other: &Tensor2, scale: f64) -> f64 {
        let diff = self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()));
        diff / scale.max(f64::MIN_POSITIVE)
    }
}

pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Tensor2 {
    let d = m.nrows();
    let mut t = Tensor2::zeros(d);
    for i in 0..d {
        for j in 0..d {
            t[(i, j)] = m[(i, j)];
        }
    }
    t
}

pub(crate) fn to_nalgebra(t: &Tensor2) -> DMatrix<f64> {
    DMatrix::from_row_slice(t.dim, t.dim, &t.data)
}

impl Index<(usize, usize)> for Tensor2 {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Tensor2 {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Add for &Tensor2 {
    type Output = Tensor2;
    fn add(self, rhs: &Tensor2) -> Tensor2 {
        assert_eq!(self.dim, rhs.dim, "tensor dimension mismatch");
        Tensor2 {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Tensor2 {
    type Output = Tensor2;
    fn sub(self, rhs: &Tensor2) -> Tensor2 {
        assert_eq!(self.dim, rhs.dim, "tensor dimension mismatch");
        Tensor2 {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &Tensor2 {
    type Output = Tensor2;
    fn mul(self, rhs: &Tensor2) -> Tensor2 {
        self.matmul(rhs)
    }
}

impl fmt::Debug for Tensor2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.chunks(self.dim)).finish()
    }
}

impl Serialize for Tensor2 {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Tensor2 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        Tensor2::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// `u ⊗ v`.
pub fn outer(u: &VectorD, v: &VectorD) -> Result<Tensor2> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            got: v.dim(),
        });
    }
    let mut t = Tensor2::zeros(u.dim());
    t.add_outer_scaled(1.0, u.as_slice(), v.as_slice());
    Ok(t)
}

/// Symmetric part `(A + Aᵀ) / 2`.
pub fn sym(a: &Tensor2) -> Tensor2 {
    let d = a.dim;
    let mut t = Tensor2::zeros(d);
    for i in 0..d {
        for j in 0..d {
            t.data[i * d + j] = (a.data[i * d + j] + a.data[j * d + i]) / 2.0;
        }
    }
    t
}

/// Antisymmetric part `(A - Aᵀ) / 2`.
///
/// Together with [`sym`] this reconstructs `A` exactly: `(x+y)/2 + (x-y)/2`
/// rounds back to `x` for all finite `x`, `y` without overflow.
pub fn anti(a: &Tensor2) -> Tensor2 {
    let d = a.dim;
    let mut t = Tensor2::zeros(d);
    for i in 0..d {
        for j in 0..d {
            t.data[i * d + j] = (a.data[i * d + j] - a.data[j * d + i]) / 2.0;
        }
    }
    t
}

/// Characteristics `(Σ, Γ)` of a Brownian rough path: covariance of `B(1)`
/// and mean of the level-2 enhancement at time one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Characteristics {
    pub sigma: Tensor2,
    pub gamma: Tensor2,
}

impl Characteristics {
    /// Checked constructor: `sigma` must be symmetric and positive
    /// semidefinite within [`SYMMETRY_TOL`] and [`PSD_TOL`].
    pub fn new(sigma: Tensor2, gamma: Tensor2) -> Result<Self> {
        if sigma.dim() != gamma.dim() {
            return Err(Error::DimensionMismatch {
                expected: sigma.dim(),
                got: gamma.dim(),
            });
        }
        if !sigma.is_finite() || !gamma.is_finite() {
            return Err(Error::NonFinite("characteristics"));
        }
        if !sigma.is_symmetric(SYMMETRY_TOL) {
            return Err(Error::NotPsd(format!("sigma not symmetric: {sigma:?}")));
        }
        let lambda = sigma.min_sym_eigenvalue();
        if lambda < PSD_TOL {
            return Err(Error::NotPsd(format!("sigma min eigenvalue {lambda:.3e}")));
        }
        Ok(Self { sigma, gamma })
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }

    /// `Γ - Σ/2`, the drift of the area relative to the Stratonovich lift.
    pub fn strat_area_correction(&self) -> Tensor2 {
        strat_area_correction(self)
    }
}

/// `Γ - Σ/2`.
pub fn strat_area_correction(chars: &Characteristics) -> Tensor2 {
    &chars.gamma - &chars.sigma.scale(0.5)
}

// Degree-13 Padé numerator/denominator coefficients.
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const SQUARING_THRESHOLD: f64 = 0.5;
const EXP_MAX_NORM: f64 = 700.0;

/// `exp(A)` by scaling and squaring around a degree-13 Padé approximant.
///
/// The argument is scaled by `2^-s` until its 1-norm is at most 0.5, well
/// inside the region where the degree-13 approximant is accurate to unit
/// roundoff.
pub fn expm(a: &Tensor2) -> Result<Tensor2> {
    if !a.is_finite() {
        return Err(Error::NonFinite("matrix exponential argument"));
    }
    let norm = a.norm1();
    if norm > EXP_MAX_NORM {
        return Err(Error::ExpOutOfRange(norm));
    }
    let d = a.dim();
    let mut s = 0u32;
    if norm > SQUARING_THRESHOLD {
        s = (norm / SQUARING_THRESHOLD).log2().ceil() as u32;
    }
    let x = to_nalgebra(&a.scale(0.5f64.powi(s as i32)));
    let id = DMatrix::<f64>::identity(d, d);
    let b = &PADE13;
    let x2 = &x * &x;
    let x4 = &x2 * &x2;
    let x6 = &x4 * &x2;
    let u_inner = &x6 * (&x6 * b[13] + &x4 * b[11] + &x2 * b[9])
        + &x6 * b[7]
        + &x4 * b[5]
        + &x2 * b[3]
        + &id * b[1];
    let u = &x * u_inner;
    let v = &x6 * (&x6 * b[12] + &x4 * b[10] + &x2 * b[8])
        + &x6 * b[6]
        + &x4 * b[4]
        + &x2 * b[2]
        + &id * b[0];
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or(Error::ExpOutOfRange(norm))?;
    for _ in 0..s {
        r = &r * &r;
    }
    let out = from_nalgebra(&r);
    if !out.is_finite() {
        return Err(Error::ExpOutOfRange(norm));
    }
    Ok(out)
}

/// `exp(-M t)`.
pub fn mat_exp(m: &Tensor2, t: f64) -> Result<Tensor2> {
    expm(&m.scale(-t))
}

/// Fails unless every eigenvalue of `m` has a strictly positive real part.
pub fn check_spectral_gap(m: &Tensor2) -> Result<f64> {
    if !m.is_finite() {
        return Err(Error::NonFinite("drift matrix"));
    }
    let gap = m.min_eigenvalue_real_part();
    if gap.is_finite() && gap > 0.0 {
        Ok(gap)
    } else {
        Err(Error::SpectralGap(format!(
            "minimum eigenvalue real part {gap:.3e} is not positive"
        )))
    }
}

/// Solves `M Σ + Σ Mᵀ = C`.
///
/// The equation is vectorized row-major into a dense `d² × d²` system.
pub fn lyapunov_solve(m: &Tensor2, c: &Tensor2) -> Result<Tensor2> {
    if m.dim() != c.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: c.dim(),
        });
    }
    check_spectral_gap(m)?;
    let d = m.dim();
    let n = d * d;
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            let row = i * d + j;
            for l in 0..d {
                // (M Σ)_{ij} = Σ_l M_il Σ_lj
                k[(row, l * d + j)] += m[(i, l)];
                // (Σ Mᵀ)_{ij} = Σ_l Σ_il M_jl
                k[(row, i * d + l)] += m[(j, l)];
            }
        }
    }
    let rhs = nalgebra::DVector::from_row_slice(c.as_slice());
    let x = k
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SpectralGap("singular Lyapunov system".into()))?;
    let out = Tensor2::from_data(d, x.iter().copied().collect());
    if !out.is_finite() {
        return Err(Error::SpectralGap("non-finite Lyapunov solution".into()));
    }
    Ok(out)
}

/// Lower-triangular `L` with `L Lᵀ = C` for symmetric positive semidefinite
/// `C`. Pivots below `1e-12 · max diag` are treated as exact zeros.
pub fn cholesky_psd(c: &Tensor2) -> Result<Tensor2> {
    let d = c.dim();
    if !c.is_symmetric(SYMMETRY_TOL * c.max_abs().max(1.0)) {
        return Err(Error::NotPsd("covariance not symmetric".into()));
    }
    let scale = (0..d).fold(0.0f64, |m, i| m.max(c[(i, i)].abs())).max(1e-300);
    let tol = 1e-12 * scale;
    let mut l = Tensor2::zeros(d);
    for j in 0..d {
        let mut pivot = c[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot < -1e-8 * scale {
            return Err(Error::NotPsd(format!("negative pivot {pivot:.3e}")));
        }
        if pivot <= tol {
            for i in j + 1..d {
                let mut r = c[(i, j)];
                for k in 0..j {
                    r -= l[(i, k)] * l[(j, k)];
                }
                if r.abs() > 1e-6 * scale.sqrt() {
                    return Err(Error::NotPsd("inconsistent zero pivot".into()));
                }
            }
            continue;
        }
        let root = pivot.sqrt();
        l[(j, j)] = root;
        for i in j + 1..d {
            let mut r = c[(i, j)];
            for k in 0..j {
                r -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = r / root;
        }
    }
    Ok(l)
}
