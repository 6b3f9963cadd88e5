//! Ladder-operator representations in (possibly truncated) Fock bases and
//! the dense complex matrix type used throughout the crate.
//!
//! Basis states are indexed from 0 in ascending Fock order. Composite spaces
//! are always ordered atom first, field second.

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Sub};

use ndarray::{s, Array1, Array2, Axis};
use num_complex::Complex64 as C64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type StateVector = Array1<C64>;

/// Which ladder algebra the radiation mode carries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AlgebraSpec {
    /// Harmonic oscillator `{a^dag, a, N}`.
    Oscillator,
    /// Discrete-series su(1,1) with Bargmann index `K > 0`.
    Su11 {
        #[serde(rename = "K")]
        k: f64,
    },
    /// su(2) with spin `J`; the representation has dimension `2J + 1`.
    Su2 {
        #[serde(rename = "twoJ")]
        two_j: u32,
    },
}

impl AlgebraSpec {
    pub fn su11(k: f64) -> Result<Self> {
        let spec = AlgebraSpec::Su11 { k };
        spec.validate()?;
        Ok(spec)
    }

    pub fn su2(two_j: u32) -> Result<Self> {
        let spec = AlgebraSpec::Su2 { two_j };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AlgebraSpec::Oscillator => Ok(()),
            AlgebraSpec::Su11 { k } if k > 0.0 && k.is_finite() => Ok(()),
            AlgebraSpec::Su11 { k } => Err(Error::domain(format!("su(1,1) needs K > 0, got {k}"))),
            AlgebraSpec::Su2 { two_j } if two_j >= 1 => Ok(()),
            AlgebraSpec::Su2 { .. } => Err(Error::domain("su(2) needs 2J >= 1")),
        }
    }

    /// Finite algebras have a fixed dimension; the others are truncated.
    pub fn exact_dim(&self) -> Option<usize> {
        match *self {
            AlgebraSpec::Su2 { two_j } => Some(two_j as usize + 1),
            _ => None,
        }
    }

    pub fn is_truncated(&self) -> bool {
        self.exact_dim().is_none()
    }

    /// Eigenvalue of the Cartan generator on basis state `index`.
    pub fn l3_eigenvalue(&self, index: usize) -> f64 {
        let k = index as f64;
        match *self {
            AlgebraSpec::Oscillator => k,
            AlgebraSpec::Su11 { k: bargmann } => bargmann + k,
            AlgebraSpec::Su2 { two_j } => k - two_j as f64 / 2.0,
        }
    }

    /// Raising-operator amplitude `<index+1| L_+ |index>`.
    pub fn raising_amplitude(&self, index: usize) -> f64 {
        let k = index as f64;
        match *self {
            AlgebraSpec::Oscillator => (k + 1.0).sqrt(),
            AlgebraSpec::Su11 { k: bargmann } => ((k + 1.0) * (2.0 * bargmann + k)).sqrt(),
            AlgebraSpec::Su2 { two_j } => ((k + 1.0) * (two_j as f64 - k)).max(0.0).sqrt(),
        }
    }
}

impl fmt::Display for AlgebraSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgebraSpec::Oscillator => write!(f, "oscillator"),
            AlgebraSpec::Su11 { k } => write!(f, "su(1,1) K={k}"),
            AlgebraSpec::Su2 { two_j } => write!(f, "su(2) 2J={two_j}"),
        }
    }
}

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix(Array2<C64>);

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix(Array2::zeros((rows, cols)))
    }

    pub fn identity(n: usize) -> Self {
        CMatrix(Array2::eye(n))
    }

    pub fn from_array(a: Array2<C64>) -> Self {
        CMatrix(a.as_standard_layout().into_owned())
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl FnMut((usize, usize)) -> C64) -> Self {
        CMatrix(Array2::from_shape_fn((rows, cols), f))
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, d) in diag.iter().enumerate() {
            m.0[(i, i)] = *d;
        }
        m
    }

    /// Builds from row-major entries. Fails if the length does not match.
    pub fn from_row_major(rows: usize, cols: usize, entries: Vec<C64>) -> Result<Self> {
        Array2::from_shape_vec((rows, cols), entries).map(CMatrix).map_err(|e| Error::dimension(e.to_string()))
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[StateVector]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::dimension("columns of unequal length"));
        }
        Ok(Self::from_fn(rows, columns.len(), |(r, c)| columns[c][r]))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn as_array(&self) -> &Array2<C64> {
        &self.0
    }

    pub fn into_array(self) -> Array2<C64> {
        self.0
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<C64> {
        self.0.iter().copied().collect()
    }

    pub fn adjoint(&self) -> Self {
        CMatrix(self.0.t().mapv(|z| z.conj()))
    }

    pub fn column(&self, c: usize) -> StateVector {
        self.0.column(c).to_owned()
    }

    pub fn scaled(&self, factor: C64) -> Self {
        CMatrix(&self.0 * factor)
    }

    pub fn apply(&self, v: &StateVector) -> StateVector {
        self.0.dot(v)
    }

    pub fn trace(&self) -> C64 {
        self.0.diag().sum()
    }

    /// Top-left `k x k` block.
    pub fn leading_block(&self, k: usize) -> Self {
        CMatrix(self.0.slice(s![..k, ..k]).to_owned())
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    /// Max-entry distance. Shapes must agree.
    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        assert_eq!(self.0.dim(), other.0.dim(), "shape mismatch in comparison");
        self.0.iter().zip(other.0.iter()).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    /// Maximum absolute column sum.
    pub fn norm1(&self) -> f64 {
        self.0.axis_iter(Axis(1)).map(|col| col.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn unitarity_defect(&self) -> f64 {
        (&self.adjoint() * self).max_abs_diff(&Self::identity(self.cols()))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.is_square() && self.unitarity_defect() <= tol
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.hermiticity_defect() <= tol
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::identity(self.rows());
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &CMatrix) -> Self {
        kron(self, other)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = C64;
    fn index(&self, idx: (usize, usize)) -> &C64 {
        &self.0[idx]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, idx: (usize, usize)) -> &mut C64 {
        &mut self.0[idx]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(self.0.dot(&rhs.0))
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 - &rhs.0)
    }
}

/// Kronecker product, first factor outermost.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    CMatrix(ndarray::linalg::kron(&a.0, &b.0))
}

/// Kronecker product of two vectors, first factor outermost.
pub fn kron_vec(a: &StateVector, b: &StateVector) -> StateVector {
    let mut out = Array1::zeros(a.len() * b.len());
    for (i, ai) in a.iter().enumerate() {
        out.slice_mut(s![i * b.len()..(i + 1) * b.len()]).assign(&b.mapv(|bj| ai * bj));
    }
    out
}

/// `{L_+, L_-, L_3}` for one algebra at a fixed dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderTriple {
    pub l_plus: CMatrix,
    pub l_minus: CMatrix,
    pub l_3: CMatrix,
    pub dim: usize,
    pub algebra: AlgebraSpec,
    /// True when the top basis state is an artificial cutoff.
    pub truncated: bool,
}

impl LadderTriple {
    /// `z L_+ - conj(z) L_-`.
    pub fn displacement_generator(&self, z: C64) -> CMatrix {
        &self.l_plus.scaled(z) - &self.l_minus.scaled(z.conj())
    }
}

pub fn build_ladder(algebra: AlgebraSpec, dim: usize) -> Result<LadderTriple> {
    algebra.validate()?;
    if dim < 2 {
        return Err(Error::dimension(format!("ladder dimension must be >= 2, got {dim}")));
    }
    if let Some(exact) = algebra.exact_dim() {
        if dim != exact {
            return Err(Error::dimension(format!("{algebra} has dimension {exact}, requested {dim}")));
        }
    }
    let mut l_plus = CMatrix::zeros(dim, dim);
    for k in 0..dim - 1 {
        l_plus[(k + 1, k)] = C64::new(algebra.raising_amplitude(k), 0.0);
    }
    let l_minus = l_plus.adjoint();
    let diag: Vec<C64> = (0..dim).map(|k| C64::new(algebra.l3_eigenvalue(k), 0.0)).collect();
    Ok(LadderTriple {
        l_plus,
        l_minus,
        l_3: CMatrix::from_diag(&diag),
        dim,
        algebra,
        truncated: algebra.is_truncated(),
    })
}

// Higham's scaling-and-squaring thresholds and Padé numerators.
const PADE_THETA: [(usize, f64); 4] =
    [(3, 1.495585217958292e-2), (5, 2.539_398_330_063_23e-1), (7, 9.504178996162932e-1), (9, 2.097847961257068e0)];
const THETA_13: f64 = 5.371920351148152;

fn pade_coefficients(degree: usize) -> &'static [f64] {
    match degree {
        3 => &[120.0, 60.0, 12.0, 1.0],
        5 => &[30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0],
        7 => &[17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0],
        9 => &[
            17643225600.0,
            8821612800.0,
            2075673600.0,
            302702400.0,
            30270240.0,
            2162160.0,
            110880.0,
            3960.0,
            90.0,
            1.0,
        ],
        13 => &[
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
        ],
        _ => unreachable!("no Padé table for degree {degree}"),
    }
}

fn axpy_real(acc: &mut Array2<C64>, coeff: f64, m: &Array2<C64>) {
    acc.scaled_add(C64::new(coeff, 0.0), m);
}

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn expm(m: &CMatrix) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::dimension(format!("expm needs a square matrix, got {}x{}", m.rows(), m.cols())));
    }
    if m.0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::domain("expm input has non-finite entries"));
    }
    let n = m.rows();
    let a = &m.0;
    let norm = m.norm1();
    let eye: Array2<C64> = Array2::eye(n);

    for &(degree, theta) in &PADE_THETA {
        if norm <= theta {
            let b = pade_coefficients(degree);
            let a2 = a.dot(a);
            let mut even = eye.clone() * C64::new(b[0], 0.0);
            let mut odd = eye.clone() * C64::new(b[1], 0.0);
            let mut power = eye.clone();
            for k in 1..=degree / 2 {
                power = power.dot(&a2);
                axpy_real(&mut even, b[2 * k], &power);
                axpy_real(&mut odd, b[2 * k + 1], &power);
            }
            let u = a.dot(&odd);
            return Ok(CMatrix(pade_solve(&u, &even)?));
        }
    }

    let squarings = if norm > THETA_13 { (norm / THETA_13).log2().ceil().max(0.0) as i32 } else { 0 };
    let scale = C64::new(0.5_f64.powi(squarings), 0.0);
    let a = a * scale;
    let b = pade_coefficients(13);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);

    let mut inner = &a6 * C64::new(b[13], 0.0);
    axpy_real(&mut inner, b[11], &a4);
    axpy_real(&mut inner, b[9], &a2);
    let mut odd = a6.dot(&inner);
    axpy_real(&mut odd, b[7], &a6);
    axpy_real(&mut odd, b[5], &a4);
    axpy_real(&mut odd, b[3], &a2);
    axpy_real(&mut odd, b[1], &eye);
    let u = a.dot(&odd);

    let mut inner = &a6 * C64::new(b[12], 0.0);
    axpy_real(&mut inner, b[10], &a4);
    axpy_real(&mut inner, b[8], &a2);
    let mut even = a6.dot(&inner);
    axpy_real(&mut even, b[6], &a6);
    axpy_real(&mut even, b[4], &a4);
    axpy_real(&mut even, b[2], &a2);
    axpy_real(&mut even, b[0], &eye);

    let mut r = pade_solve(&u, &even)?;
    for _ in 0..squarings {
        r = r.dot(&r);
    }
    Ok(CMatrix(r))
}

/// Solves `(V - U) X = V + U`.
fn pade_solve(u: &Array2<C64>, v: &Array2<C64>) -> Result<Array2<C64>> {
    let lhs = v - u;
    let rhs = v + u;
    lu_solve(lhs, rhs)
}

/// Gaussian elimination with partial pivoting, many right-hand sides.
fn lu_solve(mut a: Array2<C64>, mut b: Array2<C64>) -> Result<Array2<C64>> {
    let n = a.nrows();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[(i, col)].norm().total_cmp(&a[(j, col)].norm())).unwrap_or(col);
        if a[(pivot, col)].norm() == 0.0 {
            return Err(Error::range("singular Padé denominator"));
        }
        if pivot != col {
            for c in 0..n {
                a.swap((col, c), (pivot, c));
            }
            for c in 0..b.ncols() {
                b.swap((col, c), (pivot, c));
            }
        }
        let inv = C64::one() / a[(col, col)];
        for row in col + 1..n {
            let factor = a[(row, col)] * inv;
            if factor.is_zero() {
                continue;
            }
            a[(row, col)] = C64::zero();
            for c in col + 1..n {
                let t = a[(col, c)];
                a[(row, c)] -= factor * t;
            }
            for c in 0..b.ncols() {
                let t = b[(col, c)];
                b[(row, c)] -= factor * t;
            }
        }
    }
    for col in (0..n).rev() {
        let inv = C64::one() / a[(col, col)];
        for c in 0..b.ncols() {
            let mut acc = b[(col, c)];
            for k in col + 1..n {
                acc -= a[(col, k)] * b[(k, c)];
            }
            b[(col, c)] = acc * inv;
        }
    }
    Ok(b)
}

/// `exp(z L_+ - conj(z) L_-)` built numerically at the given dimension.
pub fn displacement_numeric(algebra: AlgebraSpec, dim: usize, z: C64) -> Result<CMatrix> {
    let ladder = build_ladder(algebra, dim)?;
    expm(&ladder.displacement_generator(z))
}

/// Outcome of a dimension-doubling convergence run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Convergence {
    pub dim: usize,
    pub value: f64,
    pub change: f64,
}

/// Doubles the truncation dimension from `start` until `monitor` changes by
/// less than `tol` between successive dimensions.
pub fn converge_dim(
    start: usize,
    max_dim: usize,
    tol: f64,
    mut monitor: impl FnMut(usize) -> Result<f64>,
) -> Result<Convergence> {
    let mut dim = start;
    let mut prev = monitor(dim)?;
    let mut change = f64::INFINITY;
    while dim * 2 <= max_dim {
        dim *= 2;
        let value = monitor(dim)?;
        change = (value - prev).abs();
        if change < tol {
            return Ok(Convergence { dim, value, change });
        }
        prev = value;
    }
    Err(Error::Tolerance { tol, achieved: change })
}
