//! The ALS iteration: Löwdin basis of `range(W_μ)`, Galerkin solve,
//! minimum-norm block update, and the sweep/run loops.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::diagnostics::{
    objective, AngleMode, AngleProbe, MicroStepRecord, SweepSummary,
};
use crate::error::{AlsError, Result};
use crate::formats::{evaluate, materialize_w, FormatDescriptor, ParamSystem};
use crate::gallery::ProblemInstance;
use crate::tensor::{a_norm, inner, DenseTensor, SpdOperator};

pub const DEFAULT_EPS_RANK: f64 = 1e-12;

/// Orthonormal basis `V = W T` of `range(W)` with `T = Ũ D̃^{-1/2}`, times a
/// near-identity correction that restores orthonormality lost to roundoff.
#[derive(Debug, Clone)]
pub struct LowdinBasis {
    pub v: DMatrix<f64>,
    pub t: DMatrix<f64>,
    /// Retained eigenvectors of `WᵀW`, one per column.
    pub u: DMatrix<f64>,
    /// Retained eigenvalues, descending.
    pub deltas: Vec<f64>,
    pub rank: usize,
    pub degenerate: bool,
}

pub fn lowdin_basis(w: &DMatrix<f64>, eps_rank: f64) -> Result<LowdinBasis> {
    if w.iter().any(|x| !x.is_finite()) {
        return Err(AlsError::NonFinite("W"));
    }
    if !(eps_rank >= 0.0) {
        return Err(AlsError::InvalidArgument("ε_rank must be ≥ 0".into()));
    }
    let n = w.ncols();
    let h = w.transpose() * w;
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let top = order.first().map_or(0.0, |&i| eig.eigenvalues[i]);
    let kept: Vec<usize> = if top > 0.0 {
        order
            .into_iter()
            .filter(|&i| eig.eigenvalues[i] > eps_rank * top)
            .collect()
    } else {
        Vec::new()
    };
    let rank = kept.len();
    let mut u = DMatrix::zeros(n, rank);
    let mut t = DMatrix::zeros(n, rank);
    let mut deltas = Vec::with_capacity(rank);
    for (c, &i) in kept.iter().enumerate() {
        let d = eig.eigenvalues[i];
        let col = eig.eigenvectors.column(i);
        u.set_column(c, &col);
        t.set_column(c, &(col / d.sqrt()));
        deltas.push(d);
    }
    // WᵀW squares cond(W), so near the cutoff WT drifts from orthonormal.
    // One more Löwdin pass on WT itself is well conditioned and fixes that.
    if rank > 0 {
        let v0 = w * &t;
        let g = SymmetricEigen::new(v0.transpose() * &v0);
        if g.eigenvalues.iter().all(|&e| e > 0.0) {
            let inv_sqrt = DMatrix::from_diagonal(&g.eigenvalues.map(|e| 1.0 / e.sqrt()));
            t = &t * (&g.eigenvectors * inv_sqrt * g.eigenvectors.transpose());
        }
    }
    let v = w * &t;
    Ok(LowdinBasis {
        v,
        t,
        u,
        deltas,
        rank,
        degenerate: rank == 0,
    })
}

/// Everything a micro-step produces. `record.k` and `record.tan_angle` are
/// filled in by the caller that knows the sweep index and the reference.
#[derive(Debug, Clone)]
pub struct MicroStepOutput {
    pub block: Vec<f64>,
    pub v_new: DenseTensor,
    pub record: MicroStepRecord,
    pub basis: LowdinBasis,
    /// `−½⟨V A_kμ⁻¹ Vᵀ r, r⟩ / ‖b‖²` with `r = b − A v_old`.
    pub predicted_decrement: f64,
    /// `‖p_new − Ũ Ũᵀ p_new‖`; zero up to roundoff for a minimum-norm update.
    pub kernel_residual: f64,
}

/// One Galerkin update of block `mu` (zero-based).
pub fn micro_step(
    op: &SpdOperator,
    b: &DenseTensor,
    fmt: &FormatDescriptor,
    p: &ParamSystem,
    mu: usize,
    eps_rank: f64,
) -> Result<MicroStepOutput> {
    p.check(fmt)?;
    if op.shape() != b.shape() || fmt.shape() != b.shape() {
        return Err(AlsError::ShapeMismatch("operator, target and format".into()));
    }
    let bb = inner(b, b)?;
    if bb == 0.0 {
        return Err(AlsError::ZeroTarget);
    }
    let w = materialize_w(fmt, p, mu)?;
    let basis = lowdin_basis(&w, eps_rank)?;
    let shape = b.shape().clone();
    let bvec = DVector::from_column_slice(b.values());

    let v_old_vec = &w * DVector::from_column_slice(p.block(mu));
    let v_old = DenseTensor::new(shape.clone(), v_old_vec.as_slice().to_vec())?;
    let r_old = &bvec - DVector::from_vec(op.apply_slice(v_old.values()));
    let grad_norm = (w.transpose() * &r_old).norm() / bb;
    let f_old = objective(op, b, &v_old)?;

    let (y, a_k) = if basis.degenerate {
        (DVector::zeros(0), DMatrix::zeros(0, 0))
    } else {
        let mut av = DMatrix::zeros(basis.v.nrows(), basis.rank);
        for j in 0..basis.rank {
            let col = op.apply_slice(basis.v.column(j).as_slice());
            av.set_column(j, &DVector::from_vec(col));
        }
        let a_k = basis.v.transpose() * av;
        let a_k = (&a_k + a_k.transpose()) * 0.5;
        let chol = a_k.clone().cholesky().ok_or(AlsError::ProjectedSingular)?;
        let y = chol.solve(&(basis.v.transpose() * &bvec));
        if y.iter().any(|x| !x.is_finite()) {
            return Err(AlsError::ProjectedSingular);
        }
        (y, a_k)
    };

    let (block, v_new_vec) = if basis.degenerate {
        (vec![0.0; w.ncols()], DVector::zeros(w.nrows()))
    } else {
        ((&basis.t * &y).as_slice().to_vec(), &basis.v * &y)
    };
    let v_new = DenseTensor::new(shape, v_new_vec.as_slice().to_vec())?;
    let f_new = objective(op, b, &v_new)?;

    let predicted_decrement = if basis.degenerate {
        0.0
    } else {
        let vr = basis.v.transpose() * &r_old;
        let z = a_k.cholesky().ok_or(AlsError::ProjectedSingular)?.solve(&vr);
        -0.5 * vr.dot(&z) / bb
    };

    let r_new = &bvec - DVector::from_vec(op.apply_slice(v_new.values()));
    let resid_orth = (w.transpose() * r_new).norm();

    let pv = DVector::from_column_slice(&block);
    let kernel_residual = (&pv - &basis.u * (basis.u.transpose() * &pv)).norm();

    let new_params = p.with_block(mu, block.clone());
    let record = MicroStepRecord {
        k: 0,
        mu,
        f: f_new,
        decrement: f_new - f_old,
        grad_norm,
        w_rank: basis.rank,
        resid_orth,
        param_norm_max: new_params.max_block_norm(),
        tan_angle: None,
        degenerate: basis.degenerate,
    };
    Ok(MicroStepOutput {
        block,
        v_new,
        record,
        basis,
        predicted_decrement,
        kernel_residual,
    })
}

/// Termination criteria, checked after every sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    max_sweeps: usize,
    f_tol: f64,
    grad_tol: f64,
    angle_tol: Option<f64>,
}

impl StopRule {
    pub fn new(max_sweeps: usize, f_tol: f64, grad_tol: f64, angle_tol: Option<f64>) -> Result<Self> {
        if max_sweeps == 0 {
            return Err(AlsError::InvalidArgument("max_sweeps must be ≥ 1".into()));
        }
        let ok = |x: f64| x >= 0.0 && !x.is_nan();
        if !ok(f_tol) || !ok(grad_tol) || angle_tol.is_some_and(|a| !ok(a)) {
            return Err(AlsError::InvalidArgument("tolerances must be ≥ 0".into()));
        }
        Ok(Self {
            max_sweeps,
            f_tol,
            grad_tol,
            angle_tol,
        })
    }

    pub fn max_sweeps(&self) -> usize {
        self.max_sweeps
    }
    pub fn f_tol(&self) -> f64 {
        self.f_tol
    }
    pub fn grad_tol(&self) -> f64 {
        self.grad_tol
    }
    pub fn angle_tol(&self) -> Option<f64> {
        self.angle_tol
    }
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            max_sweeps: 1000,
            f_tol: 1e-15,
            grad_tol: 0.0,
            angle_tol: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    MaxSweeps,
    FStalled,
    GradSmall,
    AngleSmall,
    Degenerate,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MaxSweeps => "max_sweeps",
            Self::FStalled => "f_stalled",
            Self::GradSmall => "grad_small",
            Self::AngleSmall => "angle_small",
            Self::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlsState {
    pub k: usize,
    pub params: ParamSystem,
    pub v: DenseTensor,
    pub f: f64,
}

impl AlsState {
    pub fn new(problem: &ProblemInstance) -> Result<Self> {
        let v = evaluate(&problem.fmt, &problem.init)?;
        let f = objective(&problem.a, &problem.b, &v)?;
        Ok(Self {
            k: 0,
            params: problem.init.clone(),
            v,
            f,
        })
    }
}

/// One Gauss–Seidel pass over all blocks in ascending order.
pub fn sweep(
    state: &AlsState,
    problem: &ProblemInstance,
    eps_rank: f64,
) -> Result<(AlsState, Vec<MicroStepRecord>)> {
    let mut params = state.params.clone();
    let mut v = state.v.clone();
    let mut f = state.f;
    let mut records = Vec::with_capacity(problem.fmt.num_blocks());
    for mu in 0..problem.fmt.num_blocks() {
        let out = micro_step(&problem.a, &problem.b, &problem.fmt, &params, mu, eps_rank)?;
        params.set_block(mu, out.block);
        v = out.v_new;
        f = out.record.f;
        let mut rec = out.record;
        rec.k = state.k + 1;
        records.push(rec);
    }
    Ok((
        AlsState {
            k: state.k + 1,
            params,
            v,
            f,
        },
        records,
    ))
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub label: String,
    pub records: Vec<MicroStepRecord>,
    pub sweeps: Vec<SweepSummary>,
    pub termination: Termination,
    pub initial_f: f64,
    pub initial_param_norm: f64,
    pub initial_tan: Option<f64>,
    pub final_state: AlsState,
    pub operator_verified: bool,
}

impl RunTrace {
    /// Tangent after each sweep, preceded by the initial tangent.
    pub fn tangent_series(&self) -> Vec<f64> {
        std::iter::once(self.initial_tan)
            .chain(self.sweeps.iter().map(|s| s.tan_angle))
            .map_while(|t| t)
            .collect()
    }

    pub fn f_series(&self) -> Vec<f64> {
        std::iter::once(self.initial_f)
            .chain(self.sweeps.iter().map(|s| s.f))
            .collect()
    }
}

/// Options beyond the stop rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub eps_rank: f64,
    pub angle: AngleMode,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            eps_rank: DEFAULT_EPS_RANK,
            angle: AngleMode::Auto,
        }
    }
}

pub fn run(problem: &ProblemInstance, stop: StopRule, eps_rank: f64) -> Result<RunTrace> {
    run_with(
        problem,
        stop,
        RunOptions {
            eps_rank,
            ..RunOptions::default()
        },
    )
}

pub fn run_with(problem: &ProblemInstance, stop: StopRule, opts: RunOptions) -> Result<RunTrace> {
    if problem.b.is_zero() {
        return Err(AlsError::ZeroTarget);
    }
    let probe = AngleProbe::new(opts.angle, &problem.fmt, problem.reference.as_ref())?;
    let mut state = AlsState::new(problem)?;
    let initial_f = state.f;
    let initial_param_norm = state.params.max_block_norm();
    let initial_tan = probe.measure(&state.params, &state.v);
    let mut records = Vec::new();
    let mut sweeps = Vec::new();
    let termination = loop {
        let (next, mut recs) = sweep(&state, problem, opts.eps_rank)?;
        let tan = probe.measure(&next.params, &next.v);
        if let Some(last) = recs.last_mut() {
            last.tan_angle = tan;
        }
        let step = next.v.axpy(-1.0, &state.v)?;
        let summary = SweepSummary {
            k: next.k,
            f: next.f,
            step_a_norm: a_norm(&problem.a, &step)?,
            param_norm_max: next.params.max_block_norm(),
            max_grad: recs.iter().map(|r| r.grad_norm).fold(0.0, f64::max),
            tan_angle: tan,
        };
        let degenerate = recs.iter().any(|r| r.degenerate) && next.v.is_zero();
        let f_change = (state.f - next.f).abs();
        let max_grad = summary.max_grad;
        records.append(&mut recs);
        sweeps.push(summary);
        state = next;
        if degenerate {
            break Termination::Degenerate;
        }
        if let (Some(tol), Some(t)) = (stop.angle_tol, tan) {
            if t <= tol {
                break Termination::AngleSmall;
            }
        }
        if max_grad <= stop.grad_tol {
            break Termination::GradSmall;
        }
        if f_change <= stop.f_tol {
            break Termination::FStalled;
        }
        if state.k >= stop.max_sweeps {
            break Termination::MaxSweeps;
        }
    };
    Ok(RunTrace {
        label: problem.label.clone(),
        records,
        sweeps,
        termination,
        initial_f,
        initial_param_norm,
        initial_tan,
        final_state: state,
        operator_verified: problem.a.is_verified(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::mohlenkamp_example;
    use crate::tensor::{rank_one_sum, unit, Shape};

    #[test]
    fn lowdin_of_orthonormal_columns() {
        let w = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let basis = lowdin_basis(&w, DEFAULT_EPS_RANK).unwrap();
        assert_eq!(basis.rank, 2);
        assert!(basis.deltas.iter().all(|d| (d - 1.0).abs() < 1e-15));
        let vtv = basis.v.transpose() * &basis.v;
        assert!((vtv - DMatrix::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn lowdin_single_scaled_column() {
        let w = DMatrix::from_row_slice(2, 1, &[2.0, 0.0]);
        let basis = lowdin_basis(&w, DEFAULT_EPS_RANK).unwrap();
        assert_eq!(basis.deltas, vec![4.0]);
        assert_eq!(basis.t[(0, 0)].abs(), 0.5);
        assert_eq!(basis.v[(0, 0)].abs(), 1.0);
    }

    #[test]
    fn lowdin_repeated_and_zero() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]);
        let basis = lowdin_basis(&w, DEFAULT_EPS_RANK).unwrap();
        assert_eq!(basis.rank, 1);
        assert!((basis.v[(0, 0)].abs() - 1.0).abs() < 1e-15);
        let zero = lowdin_basis(&DMatrix::zeros(3, 2), DEFAULT_EPS_RANK).unwrap();
        assert!(zero.degenerate && zero.rank == 0);
        assert!(lowdin_basis(&DMatrix::from_element(1, 1, f64::NAN), 1e-12).is_err());
    }

    #[test]
    fn micro_step_hand_example() {
        let inst = mohlenkamp_example(0.4).unwrap();
        let p = ParamSystem::new(&inst.fmt, vec![vec![0.3, -1.0], unit(2, 0), unit(2, 0)]).unwrap();
        let out = micro_step(&inst.a, &inst.b, &inst.fmt, &p, 0, DEFAULT_EPS_RANK).unwrap();
        assert!((out.block[0] - 2.0).abs() < 1e-14 && out.block[1].abs() < 1e-14);
        let want = rank_one_sum(
            inst.b.shape(),
            &[(2.0, vec![unit(2, 0), unit(2, 0), unit(2, 0)])],
        )
        .unwrap();
        assert!(out.v_new.axpy(-1.0, &want).unwrap().norm() < 1e-14);
        assert!(out.record.decrement <= 0.0);
        assert!((out.record.decrement - out.predicted_decrement).abs() < 1e-14);
    }

    #[test]
    fn micro_step_reproduces_target_in_range() {
        let shape = Shape::new(vec![2, 3]).unwrap();
        let fmt = FormatDescriptor::cp(shape.clone(), 1).unwrap();
        let b = rank_one_sum(&shape, &[(1.5, vec![vec![0.6, 0.8], vec![1.0, 0.0, 2.0]])]).unwrap();
        let p = ParamSystem::new(&fmt, vec![vec![1.0, 1.0], vec![1.0, 0.0, 2.0]]).unwrap();
        let out = micro_step(&SpdOperator::identity(shape), &b, &fmt, &p, 0, DEFAULT_EPS_RANK).unwrap();
        assert!(out.v_new.axpy(-1.0, &b).unwrap().norm() < 1e-14);
        assert!((out.record.f + 0.5).abs() < 1e-15);
    }

    #[test]
    fn micro_step_degenerate_subspace() {
        let inst = mohlenkamp_example(0.4).unwrap();
        let p = ParamSystem::new(&inst.fmt, vec![vec![0.0, 0.0], unit(2, 0), unit(2, 0)]).unwrap();
        let out = micro_step(&inst.a, &inst.b, &inst.fmt, &p, 1, DEFAULT_EPS_RANK).unwrap();
        assert!(out.record.degenerate);
        assert_eq!(out.block, vec![0.0, 0.0]);
        assert!(out.v_new.is_zero());
    }

    #[test]
    fn micro_step_rejects_zero_target() {
        let inst = mohlenkamp_example(0.4).unwrap();
        let zero = DenseTensor::zeros(inst.b.shape().clone());
        assert_eq!(
            micro_step(&inst.a, &zero, &inst.fmt, &inst.init, 0, DEFAULT_EPS_RANK).unwrap_err(),
            AlsError::ZeroTarget
        );
    }

    #[test]
    fn stop_rule_validation() {
        assert!(StopRule::new(0, 0.0, 0.0, None).is_err());
        assert!(StopRule::new(5, -1.0, 0.0, None).is_err());
        assert!(StopRule::new(5, 0.0, 0.0, Some(f64::NAN)).is_err());
        assert!(StopRule::new(5, 0.0, 0.0, Some(1e-12)).is_ok());
    }

    #[test]
    fn tau_zero_converges_in_one_sweep() {
        let inst = mohlenkamp_example(0.0).unwrap();
        let state = AlsState::new(&inst).unwrap();
        let (next, recs) = sweep(&state, &inst, DEFAULT_EPS_RANK).unwrap();
        assert_eq!(recs.len(), 3);
        let reference = inst.reference.as_ref().unwrap();
        assert!(next.v.axpy(-1.0, reference).unwrap().norm() < 1e-15);
        let (again, _) = sweep(&next, &inst, DEFAULT_EPS_RANK).unwrap();
        for mu in 0..3 {
            let d: f64 = again
                .params
                .block(mu)
                .iter()
                .zip(next.params.block(mu))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(d < 1e-10);
        }
    }

    #[test]
    fn tau_point_four_run() {
        let inst = mohlenkamp_example(0.4).unwrap();
        let stop = StopRule::new(20, 0.0, 0.0, Some(1e-12)).unwrap();
        let trace = run(&inst, stop, DEFAULT_EPS_RANK).unwrap();
        assert_eq!(trace.termination, Termination::AngleSmall);
        assert!(trace.sweeps.len() <= 20);
        assert!(trace.f_series().windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }
}
