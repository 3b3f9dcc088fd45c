//! Ready-to-run problem instances: the worked examples studied for local
//! convergence, plus a counterexample format and Tucker-structured targets.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{AlsError, Result};
use crate::formats::{FormatDescriptor, MultilinearMap, ParamSystem};
use crate::tensor::{dot, rank_one_sum, unit, DenseTensor, RankOneTerm, Shape, SpdOperator};

/// Default perturbation weight of the `b_λ` initial guess.
pub const BLAMBDA_INIT_MIX: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub a: SpdOperator,
    pub b: DenseTensor,
    pub fmt: FormatDescriptor,
    pub init: ParamSystem,
    pub reference: Option<DenseTensor>,
    pub label: String,
    /// Construction caveats, e.g. a parameter outside the analyzed range.
    pub warnings: Vec<String>,
}

impl ProblemInstance {
    pub fn new(
        a: SpdOperator,
        b: DenseTensor,
        fmt: FormatDescriptor,
        init: ParamSystem,
        reference: Option<DenseTensor>,
        label: impl Into<String>,
    ) -> Result<Self> {
        if a.shape() != b.shape() || fmt.shape() != b.shape() {
            return Err(AlsError::ShapeMismatch(format!(
                "operator {:?}, target {:?}, format {:?}",
                a.shape().dims(),
                b.shape().dims(),
                fmt.shape().dims()
            )));
        }
        if let Some(r) = &reference {
            if r.shape() != b.shape() {
                return Err(AlsError::ShapeMismatch("reference tensor".into()));
            }
        }
        init.check(&fmt)?;
        if b.is_zero() {
            return Err(AlsError::ZeroTarget);
        }
        Ok(Self {
            a,
            b,
            fmt,
            init,
            reference,
            label: label.into(),
            warnings: Vec::new(),
        })
    }
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let n = dot(&v, &v).sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// `r` orthonormal vectors in `ℝⁿ` from Gram–Schmidt on standard-normal draws.
pub fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize, r: usize) -> Result<Vec<Vec<f64>>> {
    if r > n {
        return Err(AlsError::InvalidArgument(format!(
            "{r} orthonormal vectors do not fit in dimension {n}"
        )));
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(r);
    while out.len() < r {
        let mut c: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for q in &out {
                let proj = dot(q, &c);
                c.iter_mut().zip(q).for_each(|(x, y)| *x -= proj * y);
            }
        }
        if dot(&c, &c).sqrt() > 1e-6 {
            out.push(normalized(c));
        }
    }
    Ok(out)
}

fn cp_rank_one(shape: &Shape, blocks: Vec<Vec<f64>>) -> Result<(FormatDescriptor, ParamSystem)> {
    let fmt = FormatDescriptor::cp(shape.clone(), 1)?;
    let init = ParamSystem::new(&fmt, blocks)?;
    Ok((fmt, init))
}

/// `b = 2e₁⊗e₁⊗e₁ + e₂⊗e₂⊗e₂` approximated in rank one from `(τ, 1)` blocks.
pub fn mohlenkamp_example(tau: f64) -> Result<ProblemInstance> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(AlsError::InvalidArgument(format!("τ must be ≥ 0, got {tau}")));
    }
    let shape = Shape::new(vec![2, 2, 2])?;
    let e1 = unit(2, 0);
    let e2 = unit(2, 1);
    let b = rank_one_sum(
        &shape,
        &[
            (2.0, vec![e1.clone(), e1.clone(), e1.clone()]),
            (1.0, vec![e2.clone(), e2.clone(), e2.clone()]),
        ],
    )?;
    let (fmt, init) = cp_rank_one(&shape, vec![vec![tau, 1.0]; 3])?;
    let reference = if tau < 0.5 {
        Some(rank_one_sum(&shape, &[(1.0, vec![e2.clone(), e2.clone(), e2])])?)
    } else if tau > 0.5 {
        Some(rank_one_sum(&shape, &[(2.0, vec![e1.clone(), e1.clone(), e1])])?)
    } else {
        None
    };
    let mut inst = ProblemInstance::new(
        SpdOperator::identity(shape),
        b,
        fmt,
        init,
        reference,
        format!("mohlenkamp(tau={tau})"),
    )?;
    if tau == 0.5 {
        inst.warnings
            .push("τ = 1/2: neither term dominates; no reference tensor".into());
    }
    Ok(inst)
}

/// `b_λ = p⊗p⊗p + λ(p⊗q⊗q + q⊗p⊗q + q⊗q⊗p)` with the default initial guess.
pub fn blambda_example(lambda: f64, n: usize, seed: u64) -> Result<ProblemInstance> {
    blambda_with_init(lambda, n, seed, BLAMBDA_INIT_MIX)
}

/// As [`blambda_example`] with initial blocks `(p + mix·q)/‖p + mix·q‖`.
pub fn blambda_with_init(lambda: f64, n: usize, seed: u64, mix: f64) -> Result<ProblemInstance> {
    if !lambda.is_finite() || !mix.is_finite() {
        return Err(AlsError::NonFinite("b_λ parameters"));
    }
    if n < 2 {
        return Err(AlsError::InvalidArgument("b_λ needs mode size n ≥ 2".into()));
    }
    let (p, q) = blambda_pair(n, seed)?;
    let shape = Shape::new(vec![n, n, n])?;
    let terms: Vec<RankOneTerm> = vec![
        (1.0, vec![p.clone(), p.clone(), p.clone()]),
        (lambda, vec![p.clone(), q.clone(), q.clone()]),
        (lambda, vec![q.clone(), p.clone(), q.clone()]),
        (lambda, vec![q.clone(), q.clone(), p.clone()]),
    ];
    let b = rank_one_sum(&shape, &terms)?;
    let start = normalized(p.iter().zip(&q).map(|(x, y)| x + mix * y).collect());
    let (fmt, init) = cp_rank_one(&shape, vec![start; 3])?;
    let in_range = (0.0..=0.5).contains(&lambda);
    let reference = if in_range {
        Some(rank_one_sum(&shape, &[(1.0, vec![p.clone(), p.clone(), p])])?)
    } else {
        None
    };
    let mut inst = ProblemInstance::new(
        SpdOperator::identity(shape),
        b,
        fmt,
        init,
        reference,
        format!("blambda(lambda={lambda},n={n},seed={seed})"),
    )?;
    if !in_range {
        inst.warnings.push(format!(
            "λ = {lambda} outside [0, 1/2]: p⊗p⊗p need not be the best approximation; reference omitted"
        ));
    }
    Ok(inst)
}

/// The seeded orthonormal pair `(p, q)` behind [`blambda_example`].
pub fn blambda_pair(n: usize, seed: u64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pq = random_orthonormal(&mut rng, n, 2)?;
    let q = pq.pop().unwrap();
    let p = pq.pop().unwrap();
    Ok((p, q))
}

/// Seeded totally orthogonal target with `r` terms and distinct descending weights.
pub fn totally_orthogonal(r: usize, dims: &[usize], seed: u64) -> Result<ProblemInstance> {
    if r == 0 || dims.is_empty() || r > *dims.iter().min().unwrap() {
        return Err(AlsError::InvalidArgument(format!(
            "r = {r} terms need 1 ≤ r ≤ min(dims) = {:?}",
            dims.iter().min()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors = dims
        .iter()
        .map(|&m| random_orthonormal(&mut rng, m, r))
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = (0..r)
        .map(|j| {
            let u: f64 = rand::Rng::random(&mut rng);
            (r - j) as f64 + 0.5 * u
        })
        .collect();
    let mut inst = totally_orthogonal_from(&weights, &factors)?;
    inst.label = format!("totally_orthogonal(r={r},dims={dims:?},seed={seed})");
    Ok(inst)
}

/// Totally orthogonal target from explicit data: `factors[μ][j]` is `b_{μ,j}`.
/// Initial blocks are the normalized sums `Σ_j b_{μ,j}`.
pub fn totally_orthogonal_from(weights: &[f64], factors: &[Vec<Vec<f64>>]) -> Result<ProblemInstance> {
    let r = weights.len();
    if r == 0 || weights.iter().any(|w| !(*w > 0.0)) {
        return Err(AlsError::InvalidArgument("weights must be positive".into()));
    }
    if weights.windows(2).any(|w| w[1] >= w[0]) {
        return Err(AlsError::InvalidArgument("weights must be strictly descending".into()));
    }
    let dims: Vec<usize> = factors.iter().map(|f| f.first().map_or(0, Vec::len)).collect();
    for f in factors {
        if f.len() != r {
            return Err(AlsError::InvalidArgument("one vector per weight and mode".into()));
        }
        for (i, x) in f.iter().enumerate() {
            for (j, y) in f.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot(x, y) - target).abs() > 1e-10 {
                    return Err(AlsError::InvalidArgument("mode vectors not orthonormal".into()));
                }
            }
        }
    }
    let shape = Shape::new(dims.clone())?;
    let terms: Vec<RankOneTerm> = (0..r)
        .map(|j| (weights[j], factors.iter().map(|f| f[j].clone()).collect()))
        .collect();
    let b = rank_one_sum(&shape, &terms)?;
    let reference = rank_one_sum(&shape, &terms[..1])?;
    let init_blocks = factors
        .iter()
        .zip(&dims)
        .map(|(f, &m)| normalized((0..m).map(|i| f.iter().map(|v| v[i]).sum()).collect()))
        .collect();
    let (fmt, init) = cp_rank_one(&shape, init_blocks)?;
    ProblemInstance::new(
        SpdOperator::identity(shape),
        b,
        fmt,
        init,
        Some(reference),
        format!("totally_orthogonal(r={r})"),
    )
}

/// `b = x⊗x⊗y + x⊗y⊗x + y⊗x⊗x` in CP rank 2, started from
/// `(x+y)⊗(x+y)⊗(x+y) − x⊗x⊗x`.
pub fn desilva_lim(n: usize) -> Result<ProblemInstance> {
    if n < 2 {
        return Err(AlsError::InvalidArgument("de Silva–Lim needs n ≥ 2".into()));
    }
    let shape = Shape::new(vec![n; 3])?;
    let x = unit(n, 0);
    let y = unit(n, 1);
    let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
    let neg_x: Vec<f64> = x.iter().map(|a| -a).collect();
    let b = rank_one_sum(
        &shape,
        &[
            (1.0, vec![x.clone(), x.clone(), y.clone()]),
            (1.0, vec![x.clone(), y.clone(), x.clone()]),
            (1.0, vec![y, x.clone(), x.clone()]),
        ],
    )?;
    let fmt = FormatDescriptor::cp(shape.clone(), 2)?;
    let init = ParamSystem::cp_from_columns(
        &fmt,
        vec![
            vec![xy.clone(), x.clone()],
            vec![xy.clone(), x],
            vec![xy, neg_x],
        ],
    )?;
    ProblemInstance::new(
        SpdOperator::identity(shape),
        b,
        fmt,
        init,
        None,
        format!("desilva_lim(n={n})"),
    )
}

/// `Ũ(x, y) = (x₁y₁ + x₂y₁, x₁y₁ + x₂y₁, x₁y₂, x₂y₂)` on `ℝ² × ℝ² → ℝ^{2×2}`.
#[derive(Debug)]
pub struct BilinearCounterexample {
    shape: Shape,
}

impl Default for BilinearCounterexample {
    fn default() -> Self {
        Self {
            shape: Shape::new(vec![2, 2]).expect("2×2 shape"),
        }
    }
}

impl MultilinearMap for BilinearCounterexample {
    fn name(&self) -> &str {
        "bilinear_counterexample"
    }

    fn shape(&self) -> &Shape {
        &self.shape
    }

    fn block_dims(&self) -> Vec<usize> {
        vec![2, 2]
    }

    fn evaluate_into(&self, blocks: &[&[f64]], out: &mut [f64]) {
        let (x, y) = (blocks[0], blocks[1]);
        out[0] += x[0] * y[0] + x[1] * y[0];
        out[1] += x[0] * y[0] + x[1] * y[0];
        out[2] += x[0] * y[1];
        out[3] += x[1] * y[1];
    }
}

/// A format with two parameter systems of equal value but different gradients.
#[derive(Debug, Clone)]
pub struct CounterexampleFixture {
    pub fmt: FormatDescriptor,
    pub a: SpdOperator,
    pub b: DenseTensor,
    /// `(e₁, e₁)`: a critical point of `F`.
    pub p: ParamSystem,
    /// `(e₂, e₁)`: same tensor, nonzero gradient.
    pub p_hat: ParamSystem,
}

pub fn counterexample_bilinear() -> CounterexampleFixture {
    let map = BilinearCounterexample::default();
    let shape = map.shape().clone();
    let fmt = FormatDescriptor::custom(Arc::new(map));
    let b = DenseTensor::new(shape.clone(), vec![1.0, 1.0, 0.0, 1.0]).expect("finite");
    let p = ParamSystem::new(&fmt, vec![unit(2, 0), unit(2, 0)]).expect("block sizes");
    let p_hat = ParamSystem::new(&fmt, vec![unit(2, 1), unit(2, 0)]).expect("block sizes");
    CounterexampleFixture {
        fmt,
        a: SpdOperator::identity(shape),
        b,
        p,
        p_hat,
    }
}

/// The counterexample as a runnable problem, started at `(e₂, e₁)`.
pub fn counterexample_problem() -> Result<ProblemInstance> {
    let fx = counterexample_bilinear();
    ProblemInstance::new(fx.a, fx.b, fx.fmt, fx.p_hat, None, "counterexample")
}

fn check_tucker(core: &DenseTensor, factors: &[DMatrix<f64>]) -> Result<()> {
    let t = core.shape().dims();
    if factors.len() != t.len() || factors.len() < 2 {
        return Err(AlsError::ShapeMismatch(format!(
            "core of order {} with {} factors",
            t.len(),
            factors.len()
        )));
    }
    for (mu, (f, &tm)) in factors.iter().zip(t).enumerate() {
        if f.ncols() != tm {
            return Err(AlsError::ShapeMismatch(format!(
                "factor {} has {} columns, core expects {tm}",
                mu + 1,
                f.ncols()
            )));
        }
        let gram = f.transpose() * f;
        if (gram - DMatrix::identity(tm, tm)).amax() > 1e-10 {
            return Err(AlsError::InvalidArgument(format!(
                "factor {} does not have orthonormal columns",
                mu + 1
            )));
        }
    }
    Ok(())
}

/// `b = Σ β_{i₁…i_d} B_{1,i₁} ⊗ … ⊗ B_{d,i_d}` approximated in rank one.
/// Initial blocks are the normalized `B_μ 1 + 0.1·1/√m_μ`.
pub fn tucker_target(core: &DenseTensor, factors: &[DMatrix<f64>]) -> Result<ProblemInstance> {
    check_tucker(core, factors)?;
    let dims: Vec<usize> = factors.iter().map(|f| f.nrows()).collect();
    let shape = Shape::new(dims.clone())?;
    let mut terms: Vec<RankOneTerm> = Vec::new();
    for (flat, &beta) in core.values().iter().enumerate() {
        if beta == 0.0 {
            continue;
        }
        let idx = core.shape().multi_index(flat);
        let vecs = factors
            .iter()
            .zip(&idx)
            .map(|(f, &i)| f.column(i).iter().copied().collect())
            .collect();
        terms.push((beta, vecs));
    }
    let b = rank_one_sum(&shape, &terms)?;
    let init_blocks = factors
        .iter()
        .map(|f| {
            let m = f.nrows();
            let bump = 0.1 / (m as f64).sqrt();
            normalized(f.column_sum().iter().map(|x| x + bump).collect())
        })
        .collect();
    let (fmt, init) = cp_rank_one(&shape, init_blocks)?;
    ProblemInstance::new(
        SpdOperator::identity(shape),
        b,
        fmt,
        init,
        None,
        format!("tucker(dims={dims:?},core={:?})", core.shape().dims()),
    )
}

/// Seeded Tucker data with a super-diagonal core `β_{i…i} = t − i`.
pub fn tucker_superdiagonal(dims: &[usize], t: usize, seed: u64) -> Result<(DenseTensor, Vec<DMatrix<f64>>)> {
    if t == 0 || dims.len() < 2 || dims.iter().any(|&m| m < t) {
        return Err(AlsError::InvalidArgument(format!(
            "super-diagonal core of size {t} needs order ≥ 2 and every mode ≥ {t}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors = dims
        .iter()
        .map(|&m| {
            let cols = random_orthonormal(&mut rng, m, t)?;
            Ok(DMatrix::from_fn(m, t, |i, j| cols[j][i]))
        })
        .collect::<Result<Vec<_>>>()?;
    let core_shape = Shape::new(vec![t; dims.len()])?;
    let mut core = vec![0.0; core_shape.len()];
    for i in 0..t {
        core[core_shape.linear_index(&vec![i; dims.len()])] = (t - i) as f64;
    }
    Ok((DenseTensor::new(core_shape, core)?, factors))
}

/// `Γ[i₁, i_d] = Σ β_{i₁ i₂ … i_d} ∏_{μ=2}^{d−1} ⟨B_{μ,i_μ}, p_μ⟩ / ‖p_μ‖`.
pub fn tucker_gamma(core: &DenseTensor, factors: &[DMatrix<f64>], p: &ParamSystem) -> Result<DMatrix<f64>> {
    check_tucker(core, factors)?;
    let d = factors.len();
    let t = core.shape().dims();
    // Projections ⟨B_{μ,i}, p_μ⟩ / ‖p_μ‖ for the inner modes.
    let proj: Vec<Vec<f64>> = (1..d - 1)
        .map(|mu| {
            let pm = p.block(mu);
            let nrm = dot(pm, pm).sqrt();
            (0..t[mu])
                .map(|i| factors[mu].column(i).iter().zip(pm).map(|(a, b)| a * b).sum::<f64>() / nrm)
                .collect()
        })
        .collect();
    let mut gamma = DMatrix::zeros(t[0], t[d - 1]);
    for (flat, &beta) in core.values().iter().enumerate() {
        let idx = core.shape().multi_index(flat);
        let w: f64 = (1..d - 1).map(|mu| proj[mu - 1][idx[mu]]).product();
        gamma[(idx[0], idx[d - 1])] += beta * w;
    }
    Ok(gamma)
}

/// Closed form of the coupling between the first and last block of a rank-one
/// approximation: `(∏_{μ=2}^{d−1} ‖p_μ‖) · B₁ Γ B_dᵀ`.
pub fn tucker_coupling(core: &DenseTensor, factors: &[DMatrix<f64>], p: &ParamSystem) -> Result<DMatrix<f64>> {
    let gamma = tucker_gamma(core, factors, p)?;
    let d = factors.len();
    let scale: f64 = (1..d - 1).map(|mu| p.block_norm(mu)).product();
    Ok(&factors[0] * gamma * factors[d - 1].transpose() * scale)
}

/// One gallery constructor argument for listings.
#[derive(Debug, Clone, Copy)]
pub struct GalleryArg {
    pub flag: &'static str,
    pub doc: &'static str,
}

#[derive(Debug, Clone, Copy)]
pub struct GalleryEntry {
    pub label: &'static str,
    pub summary: &'static str,
    pub args: &'static [GalleryArg],
}

const SEED: GalleryArg = GalleryArg {
    flag: "--seed",
    doc: "RNG seed for the orthonormal data (default 7)",
};

pub const GALLERY: &[GalleryEntry] = &[
    GalleryEntry {
        label: "mohlenkamp",
        summary: "rank-one approximation of 2e1⊗e1⊗e1 + e2⊗e2⊗e2 from blocks (τ, 1); superlinear",
        args: &[GalleryArg {
            flag: "--tau",
            doc: "initial weight τ ≥ 0 (default 0.4); τ < 1/2 converges to e2⊗e2⊗e2, τ > 1/2 to 2e1⊗e1⊗e1",
        }],
    },
    GalleryEntry {
        label: "blambda",
        summary: "rank-one approximation of p⊗p⊗p + λ(p⊗q⊗q + q⊗p⊗q + q⊗q⊗p); linear rate q_λ",
        args: &[
            GalleryArg {
                flag: "--lambda",
                doc: "coupling λ in [0, 1/2] (default 0.46); outside the range the reference is omitted",
            },
            GalleryArg {
                flag: "--n",
                doc: "mode size n ≥ 2 (default 8)",
            },
            SEED,
            GalleryArg {
                flag: "--init-mix",
                doc: "initial blocks (p + mix·q)/‖p + mix·q‖ (default 0.3)",
            },
        ],
    },
    GalleryEntry {
        label: "totally_orthogonal",
        summary: "rank-one approximation of a totally orthogonal sum; superlinear",
        args: &[
            GalleryArg {
                flag: "--r",
                doc: "number of terms, 1 ≤ r ≤ min(dims) (default 2)",
            },
            GalleryArg {
                flag: "--dims",
                doc: "comma-separated mode sizes (default 3,3,3)",
            },
            SEED,
        ],
    },
    GalleryEntry {
        label: "desilva_lim",
        summary: "rank-two approximation of x⊗x⊗y + x⊗y⊗x + y⊗x⊗x, which has no best rank-two approximation",
        args: &[GalleryArg {
            flag: "--n",
            doc: "mode size n ≥ 2 (default 2)",
        }],
    },
    GalleryEntry {
        label: "counterexample",
        summary: "bilinear format with equal values but different gradients at (e1,e1) and (e2,e1)",
        args: &[],
    },
    GalleryEntry {
        label: "tucker",
        summary: "rank-one approximation of a seeded Tucker target with super-diagonal core",
        args: &[
            GalleryArg {
                flag: "--dims",
                doc: "comma-separated mode sizes (default 3,3,3)",
            },
            GalleryArg {
                flag: "--t",
                doc: "core size per mode, weights t, t−1, …, 1 (default 2)",
            },
            SEED,
        ],
    },
];

pub fn gallery_entry(label: &str) -> Option<&'static GalleryEntry> {
    GALLERY.iter().find(|e| e.label == label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::full_gradient;
    use crate::formats::evaluate;

    #[test]
    fn mohlenkamp_references() {
        let low = mohlenkamp_example(0.4).unwrap();
        assert_eq!(low.reference.as_ref().unwrap().get(&[1, 1, 1]), 1.0);
        let high = mohlenkamp_example(0.6).unwrap();
        assert_eq!(high.reference.as_ref().unwrap().get(&[0, 0, 0]), 2.0);
        let mid = mohlenkamp_example(0.5).unwrap();
        assert!(mid.reference.is_none() && !mid.warnings.is_empty());
        assert!(mohlenkamp_example(-0.1).is_err());
        let zero = mohlenkamp_example(0.0).unwrap();
        assert_eq!(
            evaluate(&zero.fmt, &zero.init).unwrap(),
            *zero.reference.as_ref().unwrap()
        );
    }

    #[test]
    fn blambda_pair_orthonormal_and_deterministic() {
        for seed in 0..20 {
            let (p, q) = blambda_pair(8, seed).unwrap();
            assert!(dot(&p, &q).abs() < 1e-12);
            assert!((dot(&p, &p) - 1.0).abs() < 1e-12 && (dot(&q, &q) - 1.0).abs() < 1e-12);
        }
        assert_eq!(blambda_example(0.3, 5, 3).unwrap(), blambda_example(0.3, 5, 3).unwrap());
        assert_ne!(blambda_example(0.3, 5, 3).unwrap().b, blambda_example(0.3, 5, 4).unwrap().b);
    }

    #[test]
    fn blambda_zero_is_rank_one_and_range_flag() {
        let inst = blambda_example(0.0, 4, 1).unwrap();
        assert_eq!(&inst.b, inst.reference.as_ref().unwrap());
        let out = blambda_example(0.7, 4, 1).unwrap();
        assert!(out.reference.is_none() && !out.warnings.is_empty());
        assert!(blambda_example(0.2, 1, 1).is_err());
    }

    #[test]
    fn totally_orthogonal_canonical_is_mohlenkamp() {
        let e = |i| unit(2, i);
        let factors = vec![vec![e(0), e(1)]; 3];
        let inst = totally_orthogonal_from(&[2.0, 1.0], &factors).unwrap();
        assert_eq!(inst.b, mohlenkamp_example(0.4).unwrap().b);
        assert!(totally_orthogonal_from(&[1.0, 2.0], &factors).is_err());
        assert!(totally_orthogonal(4, &[3, 3, 3], 0).is_err());
        let seeded = totally_orthogonal(3, &[3, 4, 5], 11).unwrap();
        assert_eq!(seeded, totally_orthogonal(3, &[3, 4, 5], 11).unwrap());
    }

    #[test]
    fn desilva_lim_init_is_sequence_point() {
        let inst = desilva_lim(2).unwrap();
        let v = evaluate(&inst.fmt, &inst.init).unwrap();
        // (x+y)^{⊗3} − x^{⊗3} = b + x⊗y⊗y + y⊗x⊗y + y⊗y⊗x + y⊗y⊗y.
        let diff = v.axpy(-1.0, &inst.b).unwrap();
        let mut expected = vec![0.0; 8];
        for idx in [[0, 1, 1], [1, 0, 1], [1, 1, 0], [1, 1, 1]] {
            expected[inst.b.shape().linear_index(&idx)] = 1.0;
        }
        assert_eq!(diff.values(), expected.as_slice());
        assert!(desilva_lim(1).is_err());
    }

    #[test]
    fn counterexample_values_and_gradients() {
        let fx = counterexample_bilinear();
        let v = evaluate(&fx.fmt, &fx.p).unwrap();
        assert_eq!(v.values(), &[1.0, 1.0, 0.0, 0.0]);
        assert_eq!(evaluate(&fx.fmt, &fx.p_hat).unwrap(), v);
        let g = full_gradient(&fx.a, &fx.b, &fx.fmt, &fx.p).unwrap();
        assert!(g.iter().all(|x| x.abs() <= 1e-12));
        let gh = full_gradient(&fx.a, &fx.b, &fx.fmt, &fx.p_hat).unwrap();
        let want = [0.0, 0.0, 0.0, -1.0 / 3.0];
        assert!(gh.iter().zip(want).all(|(a, b)| (a - b).abs() <= 1e-12));
    }

    #[test]
    fn tucker_rank_one_and_gamma_diagonal() {
        let (core, factors) = tucker_superdiagonal(&[3, 4, 3], 2, 5).unwrap();
        let inst = tucker_target(&core, &factors).unwrap();
        let g = tucker_gamma(&core, &factors, &inst.init).unwrap();
        assert_eq!(g[(0, 1)], 0.0);
        assert_eq!(g[(1, 0)], 0.0);
        let bad = vec![factors[0].clone() * 2.0, factors[1].clone(), factors[2].clone()];
        assert!(tucker_target(&core, &bad).is_err());
        assert!(tucker_superdiagonal(&[3, 1, 3], 2, 0).is_err());
    }

    #[test]
    fn gallery_labels() {
        let labels: Vec<_> = GALLERY.iter().map(|e| e.label).collect();
        assert_eq!(
            labels,
            ["mohlenkamp", "blambda", "totally_orthogonal", "desilva_lim", "counterexample", "tucker"]
        );
        assert!(gallery_entry("blambda").unwrap().args[0].doc.contains("[0, 1/2]"));
        assert!(gallery_entry("nope").is_none());
    }
}
