//! Dense tensors over `ℝ^{m_1} ⊗ … ⊗ ℝ^{m_d}` and symmetric positive definite
//! operators acting on them.
//!
//! Storage is lexicographic with the first index varying slowest, so the
//! multi-index `(i_1, …, i_d)` lives at `((i_1·m_2 + i_2)·m_3 + i_3)…`.

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{AlsError, Result};

/// Default upper bound on the number of tensor entries.
pub const DEFAULT_ENTRY_CAP: usize = 1_000_000;

/// Dense operators up to this many rows are checked for definiteness.
pub const SPD_VERIFY_LIMIT: usize = 512;

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_RADICAND_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape {
    dims: Vec<usize>,
    len: usize,
}

impl Shape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        Self::with_cap(dims, DEFAULT_ENTRY_CAP)
    }

    pub fn with_cap(dims: Vec<usize>, cap: usize) -> Result<Self> {
        if dims.is_empty() {
            return Err(AlsError::InvalidShape("at least one mode required".into()));
        }
        if let Some(pos) = dims.iter().position(|&m| m == 0) {
            return Err(AlsError::InvalidShape(format!("mode {} has size 0", pos + 1)));
        }
        let mut len: usize = 1;
        for &m in &dims {
            len = len.checked_mul(m).ok_or(AlsError::CapExceeded {
                entries: usize::MAX,
                cap,
            })?;
        }
        if len > cap {
            return Err(AlsError::CapExceeded { entries: len, cap });
        }
        Ok(Self { dims, len })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Total number of entries `N = ∏ m_ν`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn linear_index(&self, index: &[usize]) -> usize {
        debug_assert_eq!(index.len(), self.dims.len());
        index
            .iter()
            .zip(&self.dims)
            .fold(0, |acc, (&i, &m)| acc * m + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dims.len()];
        for (slot, &m) in idx.iter_mut().zip(&self.dims).rev() {
            *slot = flat % m;
            flat /= m;
        }
        idx
    }

    /// (outer, inner) strides for mode `nu`: entries before and after it.
    fn split(&self, nu: usize) -> (usize, usize) {
        let outer = self.dims[..nu].iter().product();
        let inner = self.dims[nu + 1..].iter().product();
        (outer, inner)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    shape: Shape,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(AlsError::ShapeMismatch(format!(
                "{} values for shape {:?}",
                values.len(),
                shape.dims()
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(AlsError::NonFinite("tensor"));
        }
        Ok(Self { shape, values })
    }

    pub fn zeros(shape: Shape) -> Self {
        let values = vec![0.0; shape.len()];
        Self { shape, values }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.values[self.shape.linear_index(index)]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            values: self.values.iter().map(|x| alpha * x).collect(),
        }
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: f64, other: &DenseTensor) -> Result<Self> {
        check_same(&self.shape, &other.shape)?;
        Ok(Self {
            shape: self.shape.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + alpha * b)
                .collect(),
        })
    }

    /// `index tuple, value` rows, one per entry, in storage order.
    pub fn to_csv(&self) -> String {
        let d = self.shape.order();
        let mut out = String::new();
        let header: Vec<String> = (1..=d).map(|nu| format!("i{nu}")).collect();
        let _ = writeln!(out, "{},value", header.join(","));
        for (flat, v) in self.values.iter().enumerate() {
            let idx = self.shape.multi_index(flat);
            let idx: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(out, "{},{:e}", idx.join(","), v);
        }
        out
    }
}

fn check_same(a: &Shape, b: &Shape) -> Result<()> {
    if a != b {
        return Err(AlsError::ShapeMismatch(format!(
            "{:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Euclidean inner product `Σ u_i v_i`.
pub fn inner(u: &DenseTensor, v: &DenseTensor) -> Result<f64> {
    check_same(&u.shape, &v.shape)?;
    Ok(dot(&u.values, &v.values))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The symmetric positive definite `A` of the quadratic objective.
#[derive(Debug, Clone, PartialEq)]
pub enum SpdOperator {
    Identity(Shape),
    Dense {
        shape: Shape,
        matrix: DMatrix<f64>,
        /// `(λ_min, λ_max)` when definiteness was verified at construction.
        spectrum: Option<(f64, f64)>,
    },
    /// `A = A_1 ⊗ … ⊗ A_d`, each factor acting on its own mode.
    ModeWise {
        shape: Shape,
        factors: Vec<DMatrix<f64>>,
        spectrum: (f64, f64),
    },
}

impl SpdOperator {
    pub fn identity(shape: Shape) -> Self {
        SpdOperator::Identity(shape)
    }

    pub fn dense(shape: Shape, matrix: DMatrix<f64>) -> Result<Self> {
        let n = shape.len();
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(AlsError::ShapeMismatch(format!(
                "dense operator is {}x{}, tensor space has {} entries",
                matrix.nrows(),
                matrix.ncols(),
                n
            )));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(AlsError::NonFinite("operator"));
        }
        check_symmetric(&matrix)?;
        let spectrum = if n <= SPD_VERIFY_LIMIT {
            Some(verify_spd(&matrix)?)
        } else {
            None
        };
        Ok(SpdOperator::Dense {
            shape,
            matrix,
            spectrum,
        })
    }

    pub fn mode_wise(shape: Shape, factors: Vec<DMatrix<f64>>) -> Result<Self> {
        if factors.len() != shape.order() {
            return Err(AlsError::ShapeMismatch(format!(
                "{} factors for an order-{} tensor",
                factors.len(),
                shape.order()
            )));
        }
        let mut lo = 1.0;
        let mut hi = 1.0;
        for (nu, (f, &m)) in factors.iter().zip(shape.dims()).enumerate() {
            if f.nrows() != m || f.ncols() != m {
                return Err(AlsError::ShapeMismatch(format!(
                    "factor {} is {}x{}, mode size {}",
                    nu + 1,
                    f.nrows(),
                    f.ncols(),
                    m
                )));
            }
            if f.iter().any(|x| !x.is_finite()) {
                return Err(AlsError::NonFinite("operator factor"));
            }
            check_symmetric(f)
                .map_err(|_| AlsError::NotSpd(format!("factor {} not symmetric", nu + 1)))?;
            let (fmin, fmax) = verify_spd(f)
                .map_err(|_| AlsError::NotSpd(format!("factor {} not definite", nu + 1)))?;
            lo *= fmin;
            hi *= fmax;
        }
        Ok(SpdOperator::ModeWise {
            shape,
            factors,
            spectrum: (lo, hi),
        })
    }

    pub fn shape(&self) -> &Shape {
        match self {
            SpdOperator::Identity(s) => s,
            SpdOperator::Dense { shape, .. } => shape,
            SpdOperator::ModeWise { shape, .. } => shape,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, SpdOperator::Identity(_))
    }

    /// False only for large dense operators whose definiteness was trusted.
    pub fn is_verified(&self) -> bool {
        !matches!(self, SpdOperator::Dense { spectrum: None, .. })
    }

    /// `(λ_min, λ_max)` if known.
    pub fn spectrum(&self) -> Option<(f64, f64)> {
        match self {
            SpdOperator::Identity(_) => Some((1.0, 1.0)),
            SpdOperator::Dense { spectrum, .. } => *spectrum,
            SpdOperator::ModeWise { spectrum, .. } => Some(*spectrum),
        }
    }

    /// Dense `N×N` matrix of the operator (Kronecker product for mode-wise).
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            SpdOperator::Identity(s) => DMatrix::identity(s.len(), s.len()),
            SpdOperator::Dense { matrix, .. } => matrix.clone(),
            SpdOperator::ModeWise { factors, .. } => factors
                .iter()
                .skip(1)
                .fold(factors[0].clone(), |acc, f| acc.kronecker(f)),
        }
    }

    pub(crate) fn apply_slice(&self, x: &[f64]) -> Vec<f64> {
        match self {
            SpdOperator::Identity(_) => x.to_vec(),
            SpdOperator::Dense { matrix, .. } => {
                let n = x.len();
                (0..n)
                    .map(|i| (0..n).map(|j| matrix[(i, j)] * x[j]).sum())
                    .collect()
            }
            SpdOperator::ModeWise { shape, factors, .. } => {
                let mut cur = x.to_vec();
                let mut next = vec![0.0; cur.len()];
                for (nu, f) in factors.iter().enumerate() {
                    let m = shape.dims()[nu];
                    let (outer, inner) = shape.split(nu);
                    for o in 0..outer {
                        let base = o * m * inner;
                        for i in 0..m {
                            for t in 0..inner {
                                let mut acc = 0.0;
                                for j in 0..m {
                                    acc += f[(i, j)] * cur[base + j * inner + t];
                                }
                                next[base + i * inner + t] = acc;
                            }
                        }
                    }
                    std::mem::swap(&mut cur, &mut next);
                }
                cur
            }
        }
    }
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax();
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(AlsError::NotSpd(format!(
            "asymmetry {asym:e} exceeds {:e}",
            SYMMETRY_TOL * scale
        )));
    }
    Ok(())
}

fn verify_spd(m: &DMatrix<f64>) -> Result<(f64, f64)> {
    let eig = SymmetricEigen::new(m.clone());
    let lo = eig.eigenvalues.min();
    let hi = eig.eigenvalues.max();
    if !(lo > 0.0) {
        return Err(AlsError::NotSpd(format!("λ_min = {lo:e}")));
    }
    Ok((lo, hi))
}

/// `A v`.
pub fn apply_operator(op: &SpdOperator, v: &DenseTensor) -> Result<DenseTensor> {
    check_same(op.shape(), v.shape())?;
    Ok(DenseTensor {
        shape: v.shape.clone(),
        values: op.apply_slice(&v.values),
    })
}

/// `⟨Au, v⟩`.
pub fn a_inner(op: &SpdOperator, u: &DenseTensor, v: &DenseTensor) -> Result<f64> {
    let au = apply_operator(op, u)?;
    inner(&au, v)
}

/// `‖v‖_A = √⟨Av, v⟩`.
pub fn a_norm(op: &SpdOperator, v: &DenseTensor) -> Result<f64> {
    let radicand = a_inner(op, v, v)?;
    if radicand >= 0.0 {
        return Ok(radicand.sqrt());
    }
    let scale = inner(v, v)?;
    if radicand < -PSD_RADICAND_TOL * scale {
        return Err(AlsError::NotPsdOnVector(radicand));
    }
    Ok(0.0)
}

/// One term of a CP-style sum: a coefficient and one vector per mode.
pub type RankOneTerm = (f64, Vec<Vec<f64>>);

/// `Σ_j c_j · v_{j,1} ⊗ … ⊗ v_{j,d}`.
pub fn rank_one_sum(shape: &Shape, terms: &[RankOneTerm]) -> Result<DenseTensor> {
    let mut out = DenseTensor::zeros(shape.clone());
    for (t, (coef, vecs)) in terms.iter().enumerate() {
        if vecs.len() != shape.order() {
            return Err(AlsError::ShapeMismatch(format!(
                "term {} has {} vectors, tensor order {}",
                t + 1,
                vecs.len(),
                shape.order()
            )));
        }
        for (nu, (v, &m)) in vecs.iter().zip(shape.dims()).enumerate() {
            if v.len() != m {
                return Err(AlsError::ShapeMismatch(format!(
                    "term {} mode {}: vector length {} vs mode size {}",
                    t + 1,
                    nu + 1,
                    v.len(),
                    m
                )));
            }
        }
        let refs: Vec<&[f64]> = vecs.iter().map(|v| v.as_slice()).collect();
        accumulate_outer(&mut out.values, *coef, &refs);
    }
    if out.values.iter().any(|x| !x.is_finite()) {
        return Err(AlsError::NonFinite("rank-one sum"));
    }
    Ok(out)
}

/// `out += coef · v_1 ⊗ … ⊗ v_d` in storage order.
pub(crate) fn accumulate_outer(out: &mut [f64], coef: f64, vecs: &[&[f64]]) {
    if coef == 0.0 {
        return;
    }
    // Build the product incrementally: after mode ν, `partial` holds the
    // length-(m_1⋯m_ν) outer product of the first ν vectors.
    let mut partial = vec![coef];
    for v in vecs {
        let mut grown = Vec::with_capacity(partial.len() * v.len());
        for &p in &partial {
            grown.extend(v.iter().map(|x| p * x));
        }
        partial = grown;
    }
    for (o, p) in out.iter_mut().zip(partial) {
        *o += p;
    }
}

/// Standard basis vector of length `n` with a one at `i`.
pub fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}
