//! Tensor formats: multilinear maps `U : P_1 × … × P_L → V` from parameter
//! blocks to dense tensors, and the linear maps `W_μ` obtained by freezing
//! every block except one.
//!
//! Block layouts:
//! * CP, block μ: an `m_μ × r` matrix stored column-major, so term `j`
//!   occupies `[j·m_μ, (j+1)·m_μ)`.
//! * TT, block μ: an `r_{μ-1} × m_μ × r_μ` core stored with the first index
//!   slowest, `r_0 = r_d = 1`.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{AlsError, Result};
use crate::tensor::{accumulate_outer, DenseTensor, Shape};

/// A user-supplied multilinear map. Implementations must be linear in every
/// block separately; the engine relies on that to probe `W_μ` column by column.
pub trait MultilinearMap: fmt::Debug + Send + Sync {
    fn name(&self) -> &str;
    fn shape(&self) -> &Shape;
    fn block_dims(&self) -> Vec<usize>;
    /// Writes `U(blocks)` into `out` (length `N`, pre-zeroed).
    fn evaluate_into(&self, blocks: &[&[f64]], out: &mut [f64]);
}

#[derive(Debug, Clone)]
pub enum FormatDescriptor {
    Cp { shape: Shape, rank: usize },
    Tt { shape: Shape, ranks: Vec<usize> },
    Custom(Arc<dyn MultilinearMap>),
}

impl PartialEq for FormatDescriptor {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Self::Cp { shape: a, rank: r }, Self::Cp { shape: b, rank: s }) => a == b && r == s,
            (Self::Tt { shape: a, ranks: r }, Self::Tt { shape: b, ranks: s }) => {
                a == b && r == s
            }
            (Self::Custom(a), Self::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl FormatDescriptor {
    pub fn cp(shape: Shape, rank: usize) -> Result<Self> {
        if rank == 0 {
            return Err(AlsError::InvalidArgument("CP rank must be ≥ 1".into()));
        }
        Ok(Self::Cp { shape, rank })
    }

    pub fn tt(shape: Shape, ranks: Vec<usize>) -> Result<Self> {
        if ranks.len() + 1 != shape.order() {
            return Err(AlsError::InvalidArgument(format!(
                "TT of order {} needs {} ranks, got {}",
                shape.order(),
                shape.order() - 1,
                ranks.len()
            )));
        }
        if ranks.contains(&0) {
            return Err(AlsError::InvalidArgument("TT ranks must be ≥ 1".into()));
        }
        Ok(Self::Tt { shape, ranks })
    }

    pub fn custom(map: Arc<dyn MultilinearMap>) -> Self {
        Self::Custom(map)
    }

    pub fn shape(&self) -> &Shape {
        match self {
            Self::Cp { shape, .. } | Self::Tt { shape, .. } => shape,
            Self::Custom(m) => m.shape(),
        }
    }

    /// Number of parameter blocks `L`.
    pub fn num_blocks(&self) -> usize {
        match self {
            Self::Cp { shape, .. } | Self::Tt { shape, .. } => shape.order(),
            Self::Custom(m) => m.block_dims().len(),
        }
    }

    /// True for CP with a single term, the setting of factor angles.
    pub fn is_rank_one_cp(&self) -> bool {
        matches!(self, Self::Cp { rank: 1, .. })
    }

    fn tt_rank(ranks: &[usize], i: usize) -> usize {
        if i == 0 || i > ranks.len() {
            1
        } else {
            ranks[i - 1]
        }
    }

    fn block_dims(&self) -> Vec<usize> {
        match self {
            Self::Cp { shape, rank } => shape.dims().iter().map(|m| m * rank).collect(),
            Self::Tt { shape, ranks } => shape
                .dims()
                .iter()
                .enumerate()
                .map(|(mu, m)| Self::tt_rank(ranks, mu) * m * Self::tt_rank(ranks, mu + 1))
                .collect(),
            Self::Custom(m) => m.block_dims(),
        }
    }

    fn evaluate_into(&self, blocks: &[&[f64]], out: &mut [f64]) {
        match self {
            Self::Cp { shape, rank } => {
                let dims = shape.dims();
                for j in 0..*rank {
                    let cols: Vec<&[f64]> = blocks
                        .iter()
                        .zip(dims)
                        .map(|(b, &m)| &b[j * m..(j + 1) * m])
                        .collect();
                    accumulate_outer(out, 1.0, &cols);
                }
            }
            Self::Tt { shape, ranks } => {
                // `partial[idx * r + c]`: chained product of the first cores
                // for leading multi-index `idx` and open bond index `c`.
                let dims = shape.dims();
                let mut partial = vec![1.0];
                let mut rows = 1usize;
                for (mu, core) in blocks.iter().enumerate() {
                    let m = dims[mu];
                    let left = Self::tt_rank(ranks, mu);
                    let right = Self::tt_rank(ranks, mu + 1);
                    let mut next = vec![0.0; rows * m * right];
                    for idx in 0..rows {
                        for i in 0..m {
                            let dst = &mut next[(idx * m + i) * right..(idx * m + i + 1) * right];
                            for a in 0..left {
                                let w = partial[idx * left + a];
                                if w == 0.0 {
                                    continue;
                                }
                                let src = &core[(a * m + i) * right..(a * m + i + 1) * right];
                                for (d, s) in dst.iter_mut().zip(src) {
                                    *d += w * s;
                                }
                            }
                        }
                    }
                    partial = next;
                    rows *= m;
                }
                for (o, p) in out.iter_mut().zip(partial) {
                    *o += p;
                }
            }
            Self::Custom(m) => m.evaluate_into(blocks, out),
        }
    }
}

/// `dim(P_μ)` for a zero-based block index.
pub fn param_dim(fmt: &FormatDescriptor, mu: usize) -> Result<usize> {
    let dims = fmt.block_dims();
    dims.get(mu).copied().ok_or(AlsError::BlockOutOfRange {
        mu,
        blocks: dims.len(),
    })
}

/// `Σ_μ dim(P_μ)`.
pub fn total_param_dim(fmt: &FormatDescriptor) -> usize {
    fmt.block_dims().iter().sum()
}

/// A point `p = (p_1, …, p_L)` of the parameter space, one flat vector per block.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSystem {
    blocks: Vec<Vec<f64>>,
}

impl ParamSystem {
    pub fn new(fmt: &FormatDescriptor, blocks: Vec<Vec<f64>>) -> Result<Self> {
        let p = Self { blocks };
        p.check(fmt)?;
        Ok(p)
    }

    pub fn zeros(fmt: &FormatDescriptor) -> Self {
        Self {
            blocks: fmt.block_dims().into_iter().map(|n| vec![0.0; n]).collect(),
        }
    }

    /// CP blocks from per-block lists of term columns.
    pub fn cp_from_columns(fmt: &FormatDescriptor, columns: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let blocks = columns.into_iter().map(|cols| cols.concat()).collect();
        Self::new(fmt, blocks)
    }

    pub fn check(&self, fmt: &FormatDescriptor) -> Result<()> {
        let dims = fmt.block_dims();
        if self.blocks.len() != dims.len() {
            return Err(AlsError::ParamMismatch(format!(
                "{} blocks, format has {}",
                self.blocks.len(),
                dims.len()
            )));
        }
        for (mu, (b, &n)) in self.blocks.iter().zip(&dims).enumerate() {
            if b.len() != n {
                return Err(AlsError::ParamMismatch(format!(
                    "block {} has length {}, expected {}",
                    mu + 1,
                    b.len(),
                    n
                )));
            }
            if b.iter().any(|x| !x.is_finite()) {
                return Err(AlsError::NonFinite("parameter block"));
            }
        }
        Ok(())
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.blocks
    }

    pub fn block(&self, mu: usize) -> &[f64] {
        &self.blocks[mu]
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn set_block(&mut self, mu: usize, values: Vec<f64>) {
        debug_assert_eq!(self.blocks[mu].len(), values.len());
        self.blocks[mu] = values;
    }

    pub fn with_block(&self, mu: usize, values: Vec<f64>) -> Self {
        let mut p = self.clone();
        p.set_block(mu, values);
        p
    }

    pub fn block_norm(&self, mu: usize) -> f64 {
        self.blocks[mu].iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// `max_μ ‖p_μ‖`.
    pub fn max_block_norm(&self) -> f64 {
        (0..self.blocks.len())
            .map(|mu| self.block_norm(mu))
            .fold(0.0, f64::max)
    }

    /// Concatenation of all blocks.
    pub fn flatten(&self) -> Vec<f64> {
        self.blocks.concat()
    }
}

/// `U(p)`.
pub fn evaluate(fmt: &FormatDescriptor, p: &ParamSystem) -> Result<DenseTensor> {
    p.check(fmt)?;
    Ok(evaluate_unchecked(fmt, &p.blocks))
}

pub(crate) fn evaluate_unchecked(fmt: &FormatDescriptor, blocks: &[Vec<f64>]) -> DenseTensor {
    let refs: Vec<&[f64]> = blocks.iter().map(|b| b.as_slice()).collect();
    let mut out = vec![0.0; fmt.shape().len()];
    fmt.evaluate_into(&refs, &mut out);
    DenseTensor::new(fmt.shape().clone(), out).expect("finite blocks give finite tensor")
}

/// Dense `N × dim(P_μ)` matrix of `W_μ`: column `j` is `U(p)` with block μ
/// replaced by the `j`-th standard basis vector.
pub fn materialize_w(fmt: &FormatDescriptor, p: &ParamSystem, mu: usize) -> Result<DMatrix<f64>> {
    let n_mu = param_dim(fmt, mu)?;
    p.check(fmt)?;
    let n = fmt.shape().len();
    let mut w = DMatrix::zeros(n, n_mu);
    let mut probe = vec![0.0; n_mu];
    let mut col = vec![0.0; n];
    for j in 0..n_mu {
        probe[j] = 1.0;
        let refs: Vec<&[f64]> = p
            .blocks
            .iter()
            .enumerate()
            .map(|(nu, b)| if nu == mu { probe.as_slice() } else { b.as_slice() })
            .collect();
        col.iter_mut().for_each(|x| *x = 0.0);
        fmt.evaluate_into(&refs, &mut col);
        w.column_mut(j).copy_from_slice(&col);
        probe[j] = 0.0;
    }
    Ok(w)
}

/// JSON document for a parameter system together with its format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDocument {
    pub format: String,
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub blocks: Vec<Vec<f64>>,
}

pub fn params_to_json(fmt: &FormatDescriptor, p: &ParamSystem) -> Result<String> {
    let (format, ranks) = match fmt {
        FormatDescriptor::Cp { rank, .. } => ("cp", vec![*rank]),
        FormatDescriptor::Tt { ranks, .. } => ("tt", ranks.clone()),
        FormatDescriptor::Custom(m) => {
            return Err(AlsError::Serialization(format!(
                "custom format '{}' has no JSON form",
                m.name()
            )))
        }
    };
    let doc = ParamDocument {
        format: format.into(),
        dims: fmt.shape().dims().to_vec(),
        ranks,
        blocks: p.blocks.clone(),
    };
    Ok(serde_json::to_string(&doc)?)
}

pub fn params_from_doc(doc: ParamDocument) -> Result<(FormatDescriptor, ParamSystem)> {
    let shape = Shape::new(doc.dims)?;
    let fmt = match doc.format.as_str() {
        "cp" => {
            let [rank] = doc.ranks[..] else {
                return Err(AlsError::Serialization(
                    "cp format takes exactly one rank".into(),
                ));
            };
            FormatDescriptor::cp(shape, rank)?
        }
        "tt" => FormatDescriptor::tt(shape, doc.ranks)?,
        other => {
            return Err(AlsError::Serialization(format!(
                "unknown format '{other}'"
            )))
        }
    };
    let p = ParamSystem::new(&fmt, doc.blocks)?;
    Ok((fmt, p))
}

pub fn params_from_json(s: &str) -> Result<(FormatDescriptor, ParamSystem)> {
    params_from_doc(serde_json::from_str(s)?)
}
