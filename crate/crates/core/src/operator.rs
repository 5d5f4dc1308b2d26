//! Dense complex operators and superoperators.
//!
//! Vectorization stacks columns: `vec(X)[i + d*j] = X[i, j]`. Under this
//! convention the map `X -> A X B` has matrix `transpose(B) ⊗ A`. Every
//! conversion between operators and vectors goes through [`vectorize`] and
//! [`devectorize`].

use alloc::vec::Vec;
use core::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Eigenvalue floor applied before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-300;

/// Relative residual below which a matrix is treated as (anti-)Hermitian.
const NORMAL_TOL: f64 = 1e-12;

/// Square complex matrix on a finite Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    m: DMatrix<C64>,
}

impl Operator {
    pub fn from_matrix(m: DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Dimension { expected: m.nrows(), found: m.ncols() });
        }
        if m.nrows() == 0 {
            return Err(Error::Dimension { expected: 1, found: 0 });
        }
        Ok(Self { m })
    }

    pub(crate) fn wrap(m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self { m }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: DMatrix::zeros(dim, dim) }
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: DMatrix::identity(dim, dim) }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        Self { m: DMatrix::from_fn(d, d, |i, j| if i == j { C64::new(diag[i], 0.0) } else { ZERO }) }
    }

    /// Builds an operator from a real row-major array.
    pub fn from_real_rows(dim: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::Dimension { expected: dim * dim, found: rows.len() });
        }
        Self::from_matrix(DMatrix::from_fn(dim, dim, |i, j| C64::new(rows[i * dim + j], 0.0)))
    }

    /// Projector `|psi><psi|` of a normalized copy of `psi`.
    pub fn pure_state(psi: &[C64]) -> Result<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NonFinite("state vector"));
        }
        let v = DVector::from_iterator(psi.len(), psi.iter().map(|z| z / norm));
        Self::from_matrix(&v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.m[(i, j)]
    }

    pub fn adjoint(&self) -> Self {
        Self { m: self.m.adjoint() }
    }

    /// Entrywise complex conjugate.
    pub fn conjugate(&self) -> Self {
        Self { m: self.m.map(|z| z.conj()) }
    }

    pub fn trace(&self) -> C64 {
        self.m.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.m)
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { m: &self.m * s }
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `‖X − X†‖_F`.
    pub fn hermiticity_residual(&self) -> f64 {
        frobenius(&(&self.m - self.m.adjoint()))
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_residual() <= tol * self.frobenius_norm().max(1.0)
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        let d = self.dim();
        frobenius(&(self.m.adjoint() * &self.m - DMatrix::<C64>::identity(d, d))) <= tol
    }

    /// Hermitian and with no eigenvalue below `-tol`.
    pub fn is_positive(&self, tol: f64) -> bool {
        if !self.is_hermitian(tol) {
            return false;
        }
        let (vals, _) = hermitian_eigen(&self.m);
        vals.iter().all(|&v| v >= -tol)
    }

    pub fn hermitian_part(&self) -> Self {
        Self { m: (&self.m + self.m.adjoint()) * C64::new(0.5, 0.0) }
    }

    pub fn commutator(&self, other: &Self) -> Self {
        Self { m: &self.m * &other.m - &other.m * &self.m }
    }

    pub fn tensor(&self, other: &Self) -> Self {
        tensor_product(self, other)
    }

    /// `exp(scale · self)`.
    pub fn exp(&self, scale: C64) -> Result<Self> {
        Ok(Self { m: expm(&self.m, scale)? })
    }

    /// Principal logarithm of a positive semidefinite operator.
    pub fn log(&self) -> Result<Self> {
        matrix_log(self)
    }

    /// Eigenvalues and eigenvectors of the Hermitian part.
    pub fn eigh(&self) -> (Vec<f64>, DMatrix<C64>) {
        hermitian_eigen(&self.m)
    }

    /// Expectation value `Tr[self · rho]`.
    pub fn expectation(&self, rho: &Self) -> C64 {
        (&self.m * &rho.m).trace()
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        Operator { m: &self.m + &rhs.m }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        Operator { m: &self.m - &rhs.m }
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        Operator { m: &self.m * &rhs.m }
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator { m: -&self.m }
    }
}

/// Linear map on operators, stored in the column-stacking representation.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperOperator {
    dim: usize,
    m: DMatrix<C64>,
}

impl SuperOperator {
    pub fn from_matrix(dim: usize, m: DMatrix<C64>) -> Result<Self> {
        let n = dim * dim;
        if m.nrows() != n {
            return Err(Error::Dimension { expected: n, found: m.nrows() });
        }
        if m.ncols() != n {
            return Err(Error::Dimension { expected: n, found: m.ncols() });
        }
        Ok(Self { dim, m })
    }

    pub(crate) fn wrap(dim: usize, m: DMatrix<C64>) -> Self {
        debug_assert_eq!(m.nrows(), dim * dim);
        Self { dim, m }
    }

    pub fn zeros(dim: usize) -> Self {
        let n = dim * dim;
        Self { dim, m: DMatrix::zeros(n, n) }
    }

    pub fn identity(dim: usize) -> Self {
        let n = dim * dim;
        Self { dim, m: DMatrix::identity(n, n) }
    }

    /// `X -> A X B`.
    pub fn sandwich(a: &Operator, b: &Operator) -> Self {
        Self { dim: a.dim(), m: b.m.transpose().kronecker(&a.m) }
    }

    /// `X -> A X`.
    pub fn left(a: &Operator) -> Self {
        Self::sandwich(a, &Operator::identity(a.dim()))
    }

    /// `X -> X B`.
    pub fn right(b: &Operator) -> Self {
        Self::sandwich(&Operator::identity(b.dim()), b)
    }

    /// `X -> -i[H, X]`.
    pub fn hamiltonian(h: &Operator) -> Self {
        let c = &Self::left(h).m - &Self::right(h).m;
        Self { dim: h.dim(), m: c * (-I) }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.m
    }

    pub fn apply(&self, x: &Operator) -> Operator {
        devectorize_unchecked(self.dim, &(&self.m * vectorize(x)))
    }

    pub fn adjoint(&self) -> Self {
        superop_adjoint(self)
    }

    /// Entrywise complex conjugate of the matrix, i.e. `X -> conj(O[conj(X)])`.
    pub fn conjugate(&self) -> Self {
        Self { dim: self.dim, m: self.m.map(|z| z.conj()) }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dim: self.dim, m: &self.m * s }
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius(&self.m)
    }

    pub fn exp(&self, scale: C64) -> Result<Self> {
        Ok(Self { dim: self.dim, m: expm(&self.m, scale)? })
    }

    /// Norm of `vec(I)^T M`, which vanishes when `Tr O[X] = 0` for every `X`.
    pub fn trace_annihilation_residual(&self) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for col in 0..d * d {
            let mut s = ZERO;
            for i in 0..d {
                s += self.m[(i + d * i, col)];
            }
            acc += s.norm_sqr();
        }
        acc.sqrt()
    }

    /// Residual of `Tr O[X] = Tr X` over the matrix-unit basis.
    pub fn trace_preservation_residual(&self) -> f64 {
        (self - &Self::identity(self.dim)).trace_annihilation_residual()
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.trace_preservation_residual() <= tol
    }

    /// Residual of `O[X†] = O[X]†` over the matrix-unit basis.
    pub fn hermiticity_preservation_residual(&self) -> f64 {
        let d = self.dim;
        let idx = |i: usize, j: usize| i + d * j;
        let mut acc = 0.0;
        for k in 0..d {
            for l in 0..d {
                for i in 0..d {
                    for j in 0..d {
                        let a = self.m[(idx(i, j), idx(k, l))];
                        let b = self.m[(idx(j, i), idx(l, k))].conj();
                        acc += (a - b).norm_sqr();
                    }
                }
            }
        }
        acc.sqrt()
    }
}

impl Add for &SuperOperator {
    type Output = SuperOperator;
    fn add(self, rhs: &SuperOperator) -> SuperOperator {
        SuperOperator { dim: self.dim, m: &self.m + &rhs.m }
    }
}

impl Sub for &SuperOperator {
    type Output = SuperOperator;
    fn sub(self, rhs: &SuperOperator) -> SuperOperator {
        SuperOperator { dim: self.dim, m: &self.m - &rhs.m }
    }
}

impl Mul for &SuperOperator {
    type Output = SuperOperator;
    fn mul(self, rhs: &SuperOperator) -> SuperOperator {
        SuperOperator { dim: self.dim, m: &self.m * &rhs.m }
    }
}

/// Ordered tensor factors; the first factor is the slowest index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositeSpace {
    dims: Vec<usize>,
}

impl CompositeSpace {
    pub fn new(dims: &[usize]) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return Err(Error::Dimension { expected: 1, found: 0 });
        }
        Ok(Self { dims: dims.to_vec() })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn total(&self) -> usize {
        self.dims.iter().product()
    }

    /// Space with `factor` removed.
    pub fn without(&self, factor: usize) -> Result<Self> {
        if factor >= self.dims.len() {
            return Err(Error::FactorOutOfRange { index: factor, factors: self.dims.len() });
        }
        let mut dims = self.dims.clone();
        dims.remove(factor);
        if dims.is_empty() {
            dims.push(1);
        }
        Ok(Self { dims })
    }
}

/// Kronecker product with `a` as the slow index.
pub fn tensor_product(a: &Operator, b: &Operator) -> Operator {
    Operator { m: a.m.kronecker(&b.m) }
}

/// Traces out `factor` of an operator on `space`.
pub fn partial_trace(x: &Operator, space: &CompositeSpace, factor: usize) -> Result<Operator> {
    let n = space.dims.len();
    if factor >= n {
        return Err(Error::FactorOutOfRange { index: factor, factors: n });
    }
    if x.dim() != space.total() {
        return Err(Error::Dimension { expected: space.total(), found: x.dim() });
    }
    let before: usize = space.dims[..factor].iter().product();
    let df = space.dims[factor];
    let after: usize = space.dims[factor + 1..].iter().product();
    let out_dim = before * after;
    let full = |a: usize, i: usize, c: usize| (a * df + i) * after + c;
    let mut out = DMatrix::<C64>::zeros(out_dim, out_dim);
    for a in 0..before {
        for c in 0..after {
            for a2 in 0..before {
                for c2 in 0..after {
                    let mut s = ZERO;
                    for i in 0..df {
                        s += x.m[(full(a, i, c), full(a2, i, c2))];
                    }
                    out[(a * after + c, a2 * after + c2)] = s;
                }
            }
        }
    }
    Ok(Operator { m: out })
}

/// Column-stacked vector of `x`.
pub fn vectorize(x: &Operator) -> DVector<C64> {
    DVector::from_column_slice(x.m.as_slice())
}

/// Inverse of [`vectorize`].
pub fn devectorize(v: &DVector<C64>) -> Result<Operator> {
    let n = v.len();
    let d = isqrt(n).ok_or(Error::NotPerfectSquare(n))?;
    if d == 0 {
        return Err(Error::NotPerfectSquare(n));
    }
    Ok(devectorize_unchecked(d, v))
}

fn devectorize_unchecked(d: usize, v: &DVector<C64>) -> Operator {
    Operator { m: DMatrix::from_column_slice(d, d, v.as_slice()) }
}

fn isqrt(n: usize) -> Option<usize> {
    let r = libm_sqrt(n as f64) as usize;
    (r.saturating_sub(1)..=r + 1).find(|k| k * k == n)
}

fn libm_sqrt(x: f64) -> f64 {
    ComplexField::sqrt(x)
}

/// Hilbert–Schmidt adjoint: the conjugate transpose of the vectorized matrix.
pub fn superop_adjoint(o: &SuperOperator) -> SuperOperator {
    SuperOperator { dim: o.dim, m: o.m.adjoint() }
}

/// `exp(scale · x)` for an operator.
pub fn matrix_exp(x: &Operator, scale: C64) -> Result<Operator> {
    x.exp(scale)
}

/// Principal logarithm with eigenvalues clamped at [`LOG_FLOOR`].
pub fn matrix_log(x: &Operator) -> Result<Operator> {
    let scale = x.frobenius_norm().max(1.0);
    let res = x.hermiticity_residual();
    if !(res <= 1e-10 * scale) {
        return Err(Error::NotHermitian { residual: res });
    }
    let (vals, vecs) = hermitian_eigen(&x.m);
    let vmax = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let neg_tol = 1e-10 * vmax.max(1e-300);
    if let Some(&v) = vals.iter().find(|&&v| v < -neg_tol) {
        return Err(Error::NegativeEigenvalue { value: v });
    }
    let f: Vec<f64> = vals.iter().map(|&v| v.max(LOG_FLOOR).ln()).collect();
    Ok(Operator { m: spectral(&vecs, &f) })
}

/// Applies `f` to the eigenvalues of a Hermitian operator.
pub fn hermitian_function(x: &Operator, f: impl Fn(f64) -> f64) -> Operator {
    let (vals, vecs) = hermitian_eigen(&x.m);
    let fv: Vec<f64> = vals.iter().map(|&v| f(v)).collect();
    Operator { m: spectral(&vecs, &fv) }
}

fn spectral(vecs: &DMatrix<C64>, vals: &[f64]) -> DMatrix<C64> {
    let mut scaled = vecs.clone();
    for (j, &v) in vals.iter().enumerate() {
        scaled.column_mut(j).scale_mut(v);
    }
    scaled * vecs.adjoint()
}

/// Eigenpairs of `(m + m†)/2`, ascending.
pub fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let h = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = nalgebra::linalg::SymmetricEigen::new(h);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = DMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// Modulus of a complex number.
pub fn cabs(z: C64) -> f64 {
    z.norm_sqr().sqrt()
}

pub(crate) fn frobenius(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn one_norm(m: &DMatrix<C64>) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|z| cabs(*z)).sum::<f64>()).fold(0.0, f64::max)
}

/// `exp(scale · m)` for a square complex matrix.
///
/// Hermitian and anti-Hermitian inputs are exponentiated through their
/// eigendecomposition; everything else uses Padé-13 scaling and squaring.
pub fn expm(m: &DMatrix<C64>, scale: C64) -> Result<DMatrix<C64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension { expected: n, found: m.ncols() });
    }
    if !m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) || !scale.re.is_finite() || !scale.im.is_finite() {
        return Err(Error::NonFinite("matrix exponential input"));
    }
    let norm = frobenius(m);
    if norm == 0.0 || scale == ZERO {
        return Ok(DMatrix::identity(n, n));
    }
    let adj = m.adjoint();
    if frobenius(&(m - &adj)) < NORMAL_TOL * norm {
        let (vals, vecs) = hermitian_eigen(m);
        return Ok(spectral_complex(&vecs, vals.iter().map(|&v| (scale * v).exp())));
    }
    if frobenius(&(m + &adj)) < NORMAL_TOL * norm {
        // m = -i h with h = i m Hermitian
        let h = m * I;
        let (vals, vecs) = hermitian_eigen(&h);
        return Ok(spectral_complex(&vecs, vals.iter().map(|&v| (scale * (-I) * v).exp())));
    }
    Ok(pade13(&(m * scale)))
}

fn spectral_complex(vecs: &DMatrix<C64>, vals: impl Iterator<Item = C64>) -> DMatrix<C64> {
    let mut scaled = vecs.clone();
    for (j, v) in vals.enumerate() {
        for z in scaled.column_mut(j).iter_mut() {
            *z *= v;
        }
    }
    scaled * vecs.adjoint()
}

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

const THETA13: f64 = 5.371920351148152;

fn pade13(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows();
    let norm = one_norm(a);
    let mut s = 0i32;
    if norm > THETA13 {
        s = ComplexField::ceil(ComplexField::log2(norm / THETA13)) as i32;
    }
    let a = a * C64::new(ComplexField::powi(2.0f64, -s), 0.0);
    let b = |k: usize| C64::new(PADE13[k], 0.0);
    let id = DMatrix::<C64>::identity(n, n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9)) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1);
    let u = &a * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8)) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);
    let p = &v + &u;
    let q = &v - &u;
    let mut r = q.lu().solve(&p).unwrap_or_else(|| DMatrix::from_element(n, n, C64::new(f64::NAN, 0.0)));
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

/// Reads a dense complex matrix from row-major `(re, im)` pairs.
pub fn matrix_from_pairs(dim: usize, pairs: &[[f64; 2]]) -> Result<DMatrix<C64>> {
    if pairs.len() != dim * dim {
        return Err(Error::Dimension { expected: dim * dim, found: pairs.len() });
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| {
        let p = pairs[i * dim + j];
        C64::new(p[0], p[1])
    }))
}

/// Frobenius inner product `Tr[A† B]`.
pub fn hs_inner(a: &Operator, b: &Operator) -> C64 {
    a.m.iter().zip(b.m.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Basis of matrix units `|i><j|`, in column-stacking order.
pub fn matrix_units(dim: usize) -> Vec<Operator> {
    let mut out = Vec::with_capacity(dim * dim);
    for j in 0..dim {
        for i in 0..dim {
            let mut m = DMatrix::zeros(dim, dim);
            m[(i, j)] = ONE;
            out.push(Operator { m });
        }
    }
    out
}
