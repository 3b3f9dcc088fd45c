//! Convergence instrumentation: objective and gradient evaluation, tangent
//! angles, rate estimation, assumption monitors, and the recursion identities
//! that describe one micro-step as a linear map on the tensor space.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{AlsError, Result};
use crate::formats::{evaluate, materialize_w, param_dim, FormatDescriptor, ParamSystem};
use crate::tensor::{a_inner, apply_operator, dot, inner, DenseTensor, SpdOperator};

/// Cosines at or below this magnitude make the tangent infinite.
pub const COS_ZERO_TOL: f64 = 1e-14;
/// Candidates closer than this to the current span are skipped when
/// completing an orthonormal basis.
pub const COMPLEMENT_SKIP_TOL: f64 = 1e-8;
/// Dense recursion matrices are only formed up to this many entries.
pub const RECURSION_CAP: usize = 256;

/// Diagnostics of a single micro-step.
#[derive(Debug, Clone, PartialEq)]
pub struct MicroStepRecord {
    /// Sweep index, starting at 1.
    pub k: usize,
    /// Zero-based block index.
    pub mu: usize,
    pub f: f64,
    /// `f(v_new) − f(v_old)`.
    pub decrement: f64,
    /// `‖F′_μ‖` at the parameters the step started from.
    pub grad_norm: f64,
    pub w_rank: usize,
    /// `‖W_μᵀ (b − A v_new)‖`.
    pub resid_orth: f64,
    pub param_norm_max: f64,
    pub tan_angle: Option<f64>,
    pub degenerate: bool,
}

/// `f(v) = (½⟨Av, v⟩ − ⟨b, v⟩) / ‖b‖²`.
pub fn objective(op: &SpdOperator, b: &DenseTensor, v: &DenseTensor) -> Result<f64> {
    let bb = inner(b, b)?;
    if bb == 0.0 {
        return Err(AlsError::ZeroTarget);
    }
    Ok((0.5 * a_inner(op, v, v)? - inner(b, v)?) / bb)
}

/// `F′_μ(q) = −W_μᵀ (b − A W_μ q) / ‖b‖²`.
pub fn gradient_block(
    op: &SpdOperator,
    b: &DenseTensor,
    w: &DMatrix<f64>,
    q: &[f64],
) -> Result<Vec<f64>> {
    let n = b.shape().len();
    if w.nrows() != n || w.ncols() != q.len() || op.shape() != b.shape() {
        return Err(AlsError::ShapeMismatch(format!(
            "W is {}x{}, q has {} entries, tensor space {}",
            w.nrows(),
            w.ncols(),
            q.len(),
            n
        )));
    }
    let bb = inner(b, b)?;
    if bb == 0.0 {
        return Err(AlsError::ZeroTarget);
    }
    let wq = w * DVector::from_column_slice(q);
    let awq = op.apply_slice(wq.as_slice());
    let resid = DVector::from_iterator(n, b.values().iter().zip(&awq).map(|(bi, ai)| bi - ai));
    let g = w.transpose() * resid;
    Ok(g.iter().map(|x| -x / bb).collect())
}

/// Gradient of `F = f ∘ U` with respect to every block, concatenated.
pub fn full_gradient(
    op: &SpdOperator,
    b: &DenseTensor,
    fmt: &FormatDescriptor,
    p: &ParamSystem,
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for mu in 0..fmt.num_blocks() {
        let w = materialize_w(fmt, p, mu)?;
        out.extend(gradient_block(op, b, &w, p.block(mu))?);
    }
    Ok(out)
}

/// `|tan ∠(x, y)|` for plain vectors; `f64::INFINITY` when orthogonal.
///
/// Evaluated as `‖y − (ŷ·x̂)x̂‖ / |x̂·y|`, which stays accurate far below the
/// `1e-8` floor of the `√(1 − cos²)` form.
pub fn vector_tangent(reference: &[f64], v: &[f64]) -> Result<f64> {
    let rn = dot(reference, reference).sqrt();
    let vn = dot(v, v).sqrt();
    if rn == 0.0 || vn == 0.0 {
        return Err(AlsError::ZeroAngle);
    }
    let c = dot(reference, v) / rn;
    if (c / vn).abs() <= COS_ZERO_TOL {
        return Ok(f64::INFINITY);
    }
    let perp: f64 = reference
        .iter()
        .zip(v)
        .map(|(r, x)| {
            let d = x - c * r / rn;
            d * d
        })
        .sum::<f64>()
        .sqrt();
    Ok(perp / c.abs())
}

/// Tangent of the angle between two tensors.
pub fn tangent_angle(reference: &DenseTensor, v: &DenseTensor) -> Result<f64> {
    if reference.shape() != v.shape() {
        return Err(AlsError::ShapeMismatch("tangent_angle".into()));
    }
    vector_tangent(reference.values(), v.values())
}

/// Mode-1 fiber of `t` through its largest-magnitude entry. For a rank-one
/// tensor this is proportional to the first factor.
pub fn leading_mode_factor(t: &DenseTensor) -> Option<Vec<f64>> {
    let (flat, &peak) = t
        .values()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))?;
    if peak == 0.0 {
        return None;
    }
    let shape = t.shape();
    let mut idx = shape.multi_index(flat);
    let m = shape.dims()[0];
    Some(
        (0..m)
            .map(|i| {
                idx[0] = i;
                t.get(&idx)
            })
            .collect(),
    )
}

/// Which angle a run reports against its reference tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AngleMode {
    /// Factor angle for rank-one CP formats, full-tensor angle otherwise.
    #[default]
    Auto,
    /// Angle between the first parameter block and the first reference factor.
    Factor,
    /// Angle between the full tensors.
    Full,
}

impl std::str::FromStr for AngleMode {
    type Err = AlsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "factor" => Ok(Self::Factor),
            "full" => Ok(Self::Full),
            other => Err(AlsError::InvalidArgument(format!("angle mode '{other}'"))),
        }
    }
}

/// Resolved angle measurement for one run.
#[derive(Debug, Clone, PartialEq)]
pub enum AngleProbe {
    None,
    Full(DenseTensor),
    Factor(Vec<f64>),
}

impl AngleProbe {
    pub fn new(
        mode: AngleMode,
        fmt: &FormatDescriptor,
        reference: Option<&DenseTensor>,
    ) -> Result<Self> {
        let Some(r) = reference else {
            return Ok(Self::None);
        };
        let factor = match mode {
            AngleMode::Full => false,
            AngleMode::Factor => true,
            AngleMode::Auto => fmt.is_rank_one_cp(),
        };
        if !factor {
            return Ok(Self::Full(r.clone()));
        }
        if !fmt.is_rank_one_cp() {
            return Err(AlsError::InvalidArgument(
                "factor angles need a rank-one CP format".into(),
            ));
        }
        leading_mode_factor(r)
            .map(Self::Factor)
            .ok_or(AlsError::ZeroAngle)
    }

    pub fn measure(&self, p: &ParamSystem, v: &DenseTensor) -> Option<f64> {
        let t = match self {
            Self::None => return None,
            Self::Full(r) => tangent_angle(r, v),
            Self::Factor(dir) => vector_tangent(dir, p.block(0)),
        };
        // A zero iterate has no direction.
        Some(t.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateClass {
    Superlinear,
    Linear,
    Sublinear,
    Inconclusive,
}

impl RateClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Superlinear => "superlinear",
            Self::Linear => "linear",
            Self::Sublinear => "sublinear",
            Self::Inconclusive => "inconclusive",
        }
    }
}

pub const SUPERLINEAR_BELOW: f64 = 0.01;
pub const SUBLINEAR_ABOVE: f64 = 0.99;
pub const LINEAR_SPREAD: f64 = 0.05;
pub const DEFAULT_RATE_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    /// `tan_{k+1} / tan_k` for the usable part of the series.
    pub ratios: Vec<f64>,
    /// Median over the last `window` ratios.
    pub q_hat: f64,
    pub class: RateClass,
    pub window: usize,
    /// The series hit an exact zero and was cut there.
    pub converged_exactly: bool,
}

impl RateEstimate {
    pub fn window_ratios(&self) -> &[f64] {
        &self.ratios[self.ratios.len() - self.window..]
    }
}

fn usable_prefix(tangents: &[f64]) -> Result<(&[f64], bool)> {
    let cut = tangents.iter().position(|&t| t == 0.0);
    let series = &tangents[..cut.unwrap_or(tangents.len())];
    if let Some(bad) = series.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(AlsError::InvalidArgument(format!(
            "tangent series entry {bad} is not finite and positive"
        )));
    }
    Ok((series, cut.is_some()))
}

/// Windowed tangent-ratio estimate with classification.
pub fn rate_estimate(tangents: &[f64], window: usize) -> Result<RateEstimate> {
    if window == 0 {
        return Err(AlsError::InvalidArgument("window must be ≥ 1".into()));
    }
    let (series, converged_exactly) = usable_prefix(tangents)?;
    if series.len() < window + 1 {
        return Err(AlsError::SeriesTooShort {
            needed: window + 1,
            got: series.len(),
        });
    }
    let ratios: Vec<f64> = series.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len() - window..];
    let q_hat = median(tail);
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let decreasing = tail.windows(2).all(|w| w[1] < w[0]);
    let class = if q_hat < SUPERLINEAR_BELOW && decreasing {
        RateClass::Superlinear
    } else if q_hat > SUBLINEAR_ABOVE {
        RateClass::Sublinear
    } else if (SUPERLINEAR_BELOW..=SUBLINEAR_ABOVE).contains(&q_hat) && hi - lo < LINEAR_SPREAD {
        RateClass::Linear
    } else {
        RateClass::Inconclusive
    };
    Ok(RateEstimate {
        ratios,
        q_hat,
        class,
        window,
        converged_exactly,
    })
}

/// Tangents at or below this are roundoff, not signal.
pub const TAN_NOISE_FLOOR: f64 = 1e-14;

/// Estimate for runs that stopped before `window + 1` sweeps were available.
///
/// The series is cut before its first entry at or below [`TAN_NOISE_FLOOR`]
/// (such a run counts as converged), and the window shrinks to the latter
/// half of the remaining ratios so the start-up transient is dropped.
pub fn rate_estimate_available(tangents: &[f64], window: usize) -> Result<RateEstimate> {
    let cut = tangents.iter().position(|&t| t <= TAN_NOISE_FLOOR);
    let series = &tangents[..cut.unwrap_or(tangents.len())];
    let available = series.len().saturating_sub(1);
    if available < 2 {
        return Err(AlsError::SeriesTooShort {
            needed: 3,
            got: series.len(),
        });
    }
    let w = if available > window {
        window
    } else {
        (available / 2).max(1)
    };
    let mut est = rate_estimate(series, w)?;
    est.converged_exactly = cut.is_some();
    Ok(est)
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-sweep summary kept by the run loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub k: usize,
    pub f: f64,
    /// `‖v_k − v_{k−1}‖_A`.
    pub step_a_norm: f64,
    pub param_norm_max: f64,
    pub max_grad: f64,
    pub tan_angle: Option<f64>,
}

/// Heuristic thresholds for the assumption monitors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorThresholds {
    /// Parameter-norm growth factor that marks a run as unbounded-suspect.
    pub growth_factor: f64,
}

impl Default for MonitorThresholds {
    fn default() -> Self {
        Self { growth_factor: 1e6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceTrend {
    NonIncreasing,
    Decaying,
    Irregular,
    Empty,
}

impl DistanceTrend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NonIncreasing => "non-increasing",
            Self::Decaying => "decaying",
            Self::Irregular => "irregular",
            Self::Empty => "empty",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorReport {
    pub initial_param_norm: f64,
    pub max_param_norm_per_sweep: Vec<f64>,
    pub unbounded_suspect: bool,
    /// `rank_sequences[μ][k−1]`: rank of `W_μ` in sweep `k`.
    pub rank_sequences: Vec<Vec<usize>>,
    /// Last sweep whose ranks differ from the previous sweep.
    pub last_rank_change: Option<usize>,
    pub distance_series: Vec<f64>,
    pub distance_trend: DistanceTrend,
    pub operator_unverified: bool,
}

/// Observable proxies for parameter boundedness, rank stability and iterate drift.
pub fn assumption_monitors(
    initial_param_norm: f64,
    records: &[MicroStepRecord],
    sweeps: &[SweepSummary],
    operator_verified: bool,
    thresholds: MonitorThresholds,
) -> MonitorReport {
    let max_param_norm_per_sweep: Vec<f64> = sweeps.iter().map(|s| s.param_norm_max).collect();
    let limit = thresholds.growth_factor * initial_param_norm;
    let unbounded_suspect = max_param_norm_per_sweep.iter().any(|&n| n > limit);

    let blocks = records.iter().map(|r| r.mu + 1).max().unwrap_or(0);
    let mut rank_sequences = vec![Vec::new(); blocks];
    for r in records {
        rank_sequences[r.mu].push(r.w_rank);
    }
    let last_rank_change = (1..sweeps.len())
        .rev()
        .find(|&i| {
            rank_sequences
                .iter()
                .any(|seq| seq.get(i).is_some() && seq.get(i) != seq.get(i - 1))
        })
        .map(|i| i + 1);

    let distance_series: Vec<f64> = sweeps.iter().map(|s| s.step_a_norm).collect();
    let distance_trend = if distance_series.is_empty() {
        DistanceTrend::Empty
    } else if distance_series
        .windows(2)
        .all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-15)
    {
        DistanceTrend::NonIncreasing
    } else {
        let peak = distance_series.iter().copied().fold(0.0, f64::max);
        if *distance_series.last().unwrap() <= 0.01 * peak {
            DistanceTrend::Decaying
        } else {
            DistanceTrend::Irregular
        }
    };

    MonitorReport {
        initial_param_norm,
        max_param_norm_per_sweep,
        unbounded_suspect,
        rank_sequences,
        last_rank_change,
        distance_series,
        distance_trend,
        operator_unverified: !operator_verified,
    }
}

/// `M_{μ,ν}`: the matrix of `g ↦ W_μ(p with block ν := g)ᵀ b`, size
/// `dim(P_μ) × dim(P_ν)`, probed on the standard basis of `P_ν`.
pub fn probe_coupling(
    fmt: &FormatDescriptor,
    p: &ParamSystem,
    b: &DenseTensor,
    mu: usize,
    nu: usize,
) -> Result<DMatrix<f64>> {
    if mu == nu {
        return Err(AlsError::InvalidArgument("coupling needs μ ≠ ν".into()));
    }
    let rows = param_dim(fmt, mu)?;
    let cols = param_dim(fmt, nu)?;
    let bvec = DVector::from_column_slice(b.values());
    let mut m = DMatrix::zeros(rows, cols);
    let mut probe = vec![0.0; cols];
    for j in 0..cols {
        probe[j] = 1.0;
        let w = materialize_w(fmt, &p.with_block(nu, probe.clone()), mu)?;
        m.set_column(j, &(w.transpose() * &bvec));
        probe[j] = 0.0;
    }
    Ok(m)
}

/// Moore–Penrose inverse of a symmetric matrix, dropping eigenvalues at or
/// below `eps_rank` times the largest one.
pub fn symmetric_pinv(m: &DMatrix<f64>, eps_rank: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    if top <= 0.0 {
        return out;
    }
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > eps_rank * top {
            let u = eig.eigenvectors.column(i);
            out += (u * u.transpose()) / l;
        }
    }
    out
}

/// Everything needed to replay micro-step `μ` of one sweep: the parameters
/// before the step and the tensors before and after it.
#[derive(Debug, Clone)]
pub struct StepContext<'a> {
    pub params_before: &'a ParamSystem,
    pub mu: usize,
    pub v_before: &'a DenseTensor,
    pub v_after: &'a DenseTensor,
}

#[derive(Debug, Clone)]
pub struct RecursionCheck {
    /// `N_{k,μ} = W_μ G⁺_μ M_μ H⁺_{μ−1} W_{μ−1}ᵀ`.
    pub n_matrix: DMatrix<f64>,
    /// `‖v_after − N v_before‖ / ‖v_after‖`.
    pub defect: f64,
}

/// Materializes the linear map that sends `v_{k,μ}` to `v_{k,μ+1}` and
/// measures how well it reproduces the committed iterate.
///
/// Requires `μ ≥ 1` (zero-based): block `μ−1` must come from a minimum-norm
/// micro-step so that `H⁺H` acts as the identity on it.
pub fn recursion_check(
    op: &SpdOperator,
    b: &DenseTensor,
    fmt: &FormatDescriptor,
    ctx: &StepContext<'_>,
    eps_rank: f64,
) -> Result<RecursionCheck> {
    let n = fmt.shape().len();
    if n > RECURSION_CAP {
        return Err(AlsError::CapExceeded {
            entries: n,
            cap: RECURSION_CAP,
        });
    }
    let mu = ctx.mu;
    if mu == 0 || mu >= fmt.num_blocks() {
        return Err(AlsError::InvalidArgument(format!(
            "recursion couples blocks μ−1 and μ; got zero-based μ = {mu}"
        )));
    }
    let p = ctx.params_before;
    let w_mu = materialize_w(fmt, p, mu)?;
    let w_prev = materialize_w(fmt, p, mu - 1)?;
    let a_dense = op.to_dense();
    let g = w_mu.transpose() * &a_dense * &w_mu;
    let g_pinv = symmetric_pinv(&g, eps_rank);
    let h_prev = w_prev.transpose() * &w_prev;
    let h_pinv = symmetric_pinv(&h_prev, eps_rank);
    let m = probe_coupling(fmt, p, b, mu, mu - 1)?;
    let n_matrix = &w_mu * g_pinv * m * h_pinv * w_prev.transpose();
    let pred = &n_matrix * DVector::from_column_slice(ctx.v_before.values());
    let after = DVector::from_column_slice(ctx.v_after.values());
    let denom = after.norm();
    let defect = if denom == 0.0 {
        pred.norm()
    } else {
        (after - pred).norm() / denom
    };
    Ok(RecursionCheck { n_matrix, defect })
}

/// Orthonormal basis `R` of `span(v)^⊥`, completed from the standard basis
/// by two-pass Gram–Schmidt.
pub fn orthonormal_complement(v: &[f64]) -> Result<DMatrix<f64>> {
    let n = v.len();
    let norm = dot(v, v).sqrt();
    if norm == 0.0 {
        return Err(AlsError::ZeroAngle);
    }
    let mut basis: Vec<Vec<f64>> = vec![v.iter().map(|x| x / norm).collect()];
    for i in 0..n {
        if basis.len() == n {
            break;
        }
        let mut c = vec![0.0; n];
        c[i] = 1.0;
        for _ in 0..2 {
            for q in &basis {
                let proj = dot(q, &c);
                c.iter_mut().zip(q).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let cn = dot(&c, &c).sqrt();
        if cn < COMPLEMENT_SKIP_TOL {
            continue;
        }
        basis.push(c.into_iter().map(|x| x / cn).collect());
    }
    let cols = basis.len() - 1;
    let mut r = DMatrix::zeros(n, cols);
    for (j, q) in basis[1..].iter().enumerate() {
        r.set_column(j, &DVector::from_column_slice(q));
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentRecursion {
    pub q_s: f64,
    pub q_c: f64,
    /// `|q_s / q_c| · |tan ∠(v̄, v_before)|`.
    pub predicted: f64,
    /// `|tan ∠(v̄, v_after)|`, measured directly.
    pub observed: f64,
    pub relative_defect: f64,
}

/// Tangent recursion through the block form of `N` in the basis `[v̂ R]`.
pub fn tangent_recursion(
    reference: &DenseTensor,
    n_matrix: &DMatrix<f64>,
    v_before: &DenseTensor,
    v_after: &DenseTensor,
) -> Result<TangentRecursion> {
    let rn = reference.norm();
    if rn == 0.0 {
        return Err(AlsError::ZeroAngle);
    }
    let vhat = DVector::from_iterator(
        reference.shape().len(),
        reference.values().iter().map(|x| x / rn),
    );
    let r = orthonormal_complement(reference.values())?;
    let v = DVector::from_column_slice(v_before.values());
    let c = vhat.dot(&v);
    let s = r.transpose() * &v;
    if c == 0.0 || s.norm() == 0.0 {
        return Err(AlsError::InvalidArgument(
            "tangent recursion needs c ≠ 0 and s ≠ 0".into(),
        ));
    }
    let nv = n_matrix * &vhat;
    let nr = n_matrix * &r;
    let s_next = r.transpose() * &nv * c + r.transpose() * &nr * &s;
    let c_next = vhat.dot(&nv) * c + (vhat.transpose() * &nr * &s)[0];
    let q_s = s_next.norm() / s.norm();
    let q_c = c_next.abs() / c.abs();
    let predicted = (q_s / q_c) * (s.norm() / c.abs());
    let observed = tangent_angle(reference, v_after)?;
    let relative_defect = if observed == 0.0 {
        predicted.abs()
    } else {
        (predicted - observed).abs() / observed
    };
    Ok(TangentRecursion {
        q_s,
        q_c,
        predicted,
        observed,
        relative_defect,
    })
}

/// `f` evaluated through `apply_operator` and `inner` separately; used to
/// cross-check [`objective`].
pub fn objective_two_path(op: &SpdOperator, b: &DenseTensor, v: &DenseTensor) -> Result<f64> {
    let av = apply_operator(op, v)?;
    let quad: f64 = av.values().iter().zip(v.values()).map(|(x, y)| x * y).sum();
    let lin: f64 = b.values().iter().zip(v.values()).map(|(x, y)| x * y).sum();
    let bb: f64 = b.values().iter().map(|x| x * x).sum();
    if bb == 0.0 {
        return Err(AlsError::ZeroTarget);
    }
    Ok((0.5 * quad - lin) / bb)
}

/// Convenience: `U(p)` followed by [`objective`].
pub fn objective_at(
    op: &SpdOperator,
    b: &DenseTensor,
    fmt: &FormatDescriptor,
    p: &ParamSystem,
) -> Result<f64> {
    objective(op, b, &evaluate(fmt, p)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{rank_one_sum, unit, Shape};

    fn cube() -> Shape {
        Shape::new(vec![2, 2, 2]).unwrap()
    }

    fn mohlenkamp_b() -> DenseTensor {
        rank_one_sum(
            &cube(),
            &[
                (2.0, vec![unit(2, 0), unit(2, 0), unit(2, 0)]),
                (1.0, vec![unit(2, 1), unit(2, 1), unit(2, 1)]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn objective_values() {
        let b = mohlenkamp_b();
        let id = SpdOperator::identity(cube());
        assert_eq!(objective(&id, &b, &DenseTensor::zeros(cube())).unwrap(), 0.0);
        assert_eq!(objective(&id, &b, &b).unwrap(), -0.5);
        // Direct substitution: (½‖b‖² + ‖b‖²)/‖b‖².
        assert_eq!(objective(&id, &b, &b.scaled(-1.0)).unwrap(), 1.5);
        let zero = DenseTensor::zeros(cube());
        assert_eq!(objective(&id, &zero, &b), Err(AlsError::ZeroTarget));
    }

    #[test]
    fn tangent_examples() {
        let e1 = rank_one_sum(&cube(), &[(1.0, vec![unit(2, 0), unit(2, 0), unit(2, 0)])]).unwrap();
        let e2 = rank_one_sum(&cube(), &[(1.0, vec![unit(2, 1), unit(2, 1), unit(2, 1)])]).unwrap();
        assert_eq!(tangent_angle(&e1, &e1.scaled(3.0)).unwrap(), 0.0);
        assert_eq!(tangent_angle(&e1, &e2).unwrap(), f64::INFINITY);
        let mixed = rank_one_sum(
            &cube(),
            &[(1.0, vec![vec![1.0, 1.0], unit(2, 0), unit(2, 0)])],
        )
        .unwrap();
        // cos = 1/√2, tan = 1.
        assert!((tangent_angle(&e1, &mixed).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(
            tangent_angle(&e1, &DenseTensor::zeros(cube())),
            Err(AlsError::ZeroAngle)
        );
    }

    #[test]
    fn tangent_is_accurate_for_tiny_angles() {
        let t = vector_tangent(&[1.0, 0.0], &[1.0, 1e-13]).unwrap();
        assert!((t - 1e-13).abs() < 1e-27);
    }

    #[test]
    fn geometric_series_is_linear() {
        let tans: Vec<f64> = (0..30).map(|k| 0.5f64.powi(k)).collect();
        let est = rate_estimate(&tans, 10).unwrap();
        assert_eq!(est.q_hat, 0.5);
        assert_eq!(est.class, RateClass::Linear);
    }

    #[test]
    fn harmonic_series_is_sublinear() {
        let tans: Vec<f64> = (1..=2000).map(|k| 1.0 / k as f64).collect();
        let est = rate_estimate(&tans, 10).unwrap();
        assert!(est.q_hat > 0.99 && est.q_hat < 1.0);
        assert_eq!(est.class, RateClass::Sublinear);
    }

    #[test]
    fn superlinear_and_exact_zero() {
        let tans = [0.4, 0.32, 0.084, 2.5e-4, 5.5e-15, 3.8e-60, 0.0, 0.0];
        assert!(matches!(
            rate_estimate(&tans, 10),
            Err(AlsError::SeriesTooShort { .. })
        ));
        let est = rate_estimate_available(&tans, 10).unwrap();
        assert!(est.converged_exactly);
        // 5.5e-15 is below the noise floor: ratios 0.8, 0.26, 0.003 remain.
        assert_eq!(est.window, 1);
        assert_eq!(est.class, RateClass::Superlinear);
        assert!(rate_estimate(&[1.0, f64::INFINITY, 0.5], 1).is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn complement_is_orthonormal() {
        let v = [1.0, 2.0, 0.0, -1.0];
        let r = orthonormal_complement(&v).unwrap();
        assert_eq!(r.ncols(), 3);
        let gram = r.transpose() * &r;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-14);
        let vv = DVector::from_column_slice(&v);
        assert!((r.transpose() * vv).amax() < 1e-14);
    }

    #[test]
    fn pinv_of_rank_one() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let p = symmetric_pinv(&m, 1e-12);
        assert!((p - DMatrix::from_element(2, 2, 0.25)).amax() < 1e-15);
        assert_eq!(symmetric_pinv(&DMatrix::zeros(2, 2), 1e-12), DMatrix::zeros(2, 2));
    }

    #[test]
    fn leading_factor_of_rank_one() {
        let t = rank_one_sum(
            &cube(),
            &[(1.0, vec![vec![0.6, 0.8], vec![1.0, 2.0], vec![-1.0, 0.5]])],
        )
        .unwrap();
        let f = leading_mode_factor(&t).unwrap();
        assert!(vector_tangent(&[0.6, 0.8], &f).unwrap() < 1e-15);
        assert!(leading_mode_factor(&DenseTensor::zeros(cube())).is_none());
    }
}
