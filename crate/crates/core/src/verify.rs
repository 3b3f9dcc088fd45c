//! Invariant and oracle checks, runnable from the CLI `verify` command and
//! reused by the acceptance suite.

#![allow(clippy::needless_range_loop, clippy::redundant_closure_call)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::als::{lowdin_basis, micro_step, AlsState, DEFAULT_EPS_RANK};
use crate::diagnostics::{
    full_gradient, gradient_block, objective, objective_two_path, probe_coupling, rate_estimate,
    recursion_check, tangent_recursion, StepContext,
};
use crate::error::Result;
use crate::formats::{evaluate, materialize_w, FormatDescriptor, ParamSystem};
use crate::gallery::{
    blambda_example, blambda_pair, counterexample_bilinear, mohlenkamp_example, totally_orthogonal,
    tucker_coupling, tucker_superdiagonal, tucker_target, ProblemInstance,
};
use crate::oracle::{brute_least_squares, finite_diff_grad, q_lambda_formula, DEFAULT_FD_STEP};
use crate::tensor::{a_norm, inner, DenseTensor, Shape, SpdOperator};

/// Fault injection for testing the checks themselves.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VerifyOptions {
    /// Added to the predicted decrement before comparing it with the observed one.
    pub decrement_offset: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name,
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomFormat {
    Cp,
    Tt,
    /// CP with two identical terms, so every `W_μ` is rank deficient.
    CpDuplicated,
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Random SPD matrix `XXᵀ/m + I/2`.
fn random_spd(rng: &mut ChaCha8Rng, m: usize) -> DMatrix<f64> {
    let x = DMatrix::from_vec(m, m, normal_vec(rng, m * m));
    &x * x.transpose() / m as f64 + DMatrix::identity(m, m) * 0.5
}

/// Seeded random problem: order 2–4, modes 2–4, ranks 1–3, mode-wise SPD
/// operator, standard-normal target and initial parameters.
pub fn random_problem(seed: u64, kind: RandomFormat) -> Result<ProblemInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(2..=4usize);
    let dims: Vec<usize> = (0..d).map(|_| rng.random_range(2..=4usize)).collect();
    let shape = Shape::new(dims.clone())?;
    let fmt = match kind {
        RandomFormat::Cp => FormatDescriptor::cp(shape.clone(), rng.random_range(1..=3))?,
        RandomFormat::CpDuplicated => FormatDescriptor::cp(shape.clone(), rng.random_range(2..=3))?,
        RandomFormat::Tt => {
            FormatDescriptor::tt(shape.clone(), (1..d).map(|_| rng.random_range(1..=3)).collect())?
        }
    };
    let factors = dims.iter().map(|&m| random_spd(&mut rng, m)).collect();
    let a = SpdOperator::mode_wise(shape.clone(), factors)?;
    let b = DenseTensor::new(shape.clone(), normal_vec(&mut rng, shape.len()))?;
    let mut init = ParamSystem::zeros(&fmt);
    for mu in 0..fmt.num_blocks() {
        let mut block = normal_vec(&mut rng, init.block(mu).len());
        if kind == RandomFormat::CpDuplicated {
            let m = dims[mu];
            let (first, rest) = block.split_at_mut(m);
            rest[..m].copy_from_slice(first);
        }
        init.set_block(mu, block);
    }
    let label = format!("random({kind:?},seed={seed})");
    ProblemInstance::new(a, b, fmt, init, None, label)
}

/// Worst violations of the per-micro-step identities over a few sweeps.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub steps: usize,
    /// Largest increase of `f`, `−‖v‖_A` and `−⟨v,b⟩` between consecutive steps,
    /// relative to `1 + |value|`.
    pub f_increase: f64,
    pub a_norm_decrease: f64,
    pub vb_decrease: f64,
    pub decrement_defect: f64,
    pub post_step_defect: f64,
    pub galerkin_ratio: f64,
    pub kernel_ratio: f64,
    pub orthonormality: f64,
    pub oracle_defect: f64,
    pub state_defect: f64,
    /// Share of the pre-step state outside `range(V)`. Nonzero only when the
    /// rank cutoff discards a direction the iterate still uses, in which case
    /// the step identities above are not expected to hold.
    pub dropped_state: f64,
    /// Largest `δ₁/δ_min` over retained Gram eigenvalues.
    pub cond_h: f64,
    /// Largest discarded `δ/δ₁`. Values near the cutoff make the retained rank
    /// a coin toss between two pseudo-inverses; true null directions sit near ε.
    pub dropped_ratio: f64,
}

/// Runs `sweeps` sweeps micro-step by micro-step and measures every identity.
pub fn step_checks(problem: &ProblemInstance, sweeps: usize, opts: VerifyOptions) -> Result<StepStats> {
    let (op, b, fmt) = (&problem.a, &problem.b, &problem.fmt);
    let bb = inner(b, b)?;
    let mut params = problem.init.clone();
    let mut st = StepStats::default();
    let mut prev: Option<(f64, f64, f64)> = None;
    for _ in 0..sweeps {
        for mu in 0..fmt.num_blocks() {
            let w = materialize_w(fmt, &params, mu)?;
            let out = micro_step(op, b, fmt, &params, mu, DEFAULT_EPS_RANK)?;
            if let (Some(d1), Some(dn)) = (out.basis.deltas.first(), out.basis.deltas.last()) {
                st.cond_h = st.cond_h.max(d1 / dn);
                let mut evs: Vec<f64> = (w.transpose() * &w).symmetric_eigenvalues().iter().copied().collect();
                evs.sort_by(|a, b| b.total_cmp(a));
                if let Some(&next) = evs.get(out.basis.rank) {
                    st.dropped_ratio = st.dropped_ratio.max(next / d1);
                }
            }
            let v_old = &w * nalgebra::DVector::from_column_slice(params.block(mu));
            let vn = v_old.norm();
            if vn > 0.0 {
                let outside = &v_old - &out.basis.v * (out.basis.v.transpose() * &v_old);
                st.dropped_state = st.dropped_state.max(outside.norm() / vn);
            }
            params.set_block(mu, out.block.clone());
            let v = &out.v_new;
            let f = out.record.f;
            let an = a_norm(op, v)?;
            let vb = inner(v, b)?;
            if let Some((f0, an0, vb0)) = prev {
                st.f_increase = st.f_increase.max((f - f0) / (1.0 + f0.abs()));
                st.a_norm_decrease = st.a_norm_decrease.max((an0 - an) / (1.0 + an0));
                st.vb_decrease = st.vb_decrease.max((vb0 - vb) / (1.0 + vb0.abs()));
            }
            prev = Some((f, an, vb));
            st.decrement_defect = st
                .decrement_defect
                .max((out.record.decrement - (out.predicted_decrement + opts.decrement_offset)).abs());
            let post = (f + vb / (2.0 * bb)).abs().max((f + an * an / (2.0 * bb)).abs());
            st.post_step_defect = st.post_step_defect.max(post);
            let wn = w.norm();
            if wn > 0.0 {
                st.galerkin_ratio = st.galerkin_ratio.max(out.record.resid_orth / (wn * bb.sqrt()));
            }
            let pn = out.block.iter().map(|x| x * x).sum::<f64>().sqrt();
            if pn > 0.0 {
                st.kernel_ratio = st.kernel_ratio.max(out.kernel_residual / pn);
            }
            let vtv = out.basis.v.transpose() * &out.basis.v;
            st.orthonormality = st
                .orthonormality
                .max((vtv - DMatrix::identity(out.basis.rank, out.basis.rank)).amax());
            if b.shape().len() <= crate::oracle::ORACLE_CAP {
                let q = brute_least_squares(&w, op, b, DEFAULT_EPS_RANK)?;
                let scale = q.iter().map(|x| x * x).sum::<f64>().sqrt().max(1.0);
                let diff = q
                    .iter()
                    .zip(&out.block)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
                st.oracle_defect = st.oracle_defect.max(diff / scale);
            }
            let u = evaluate(fmt, &params)?;
            let scale = u.norm().max(1.0);
            st.state_defect = st.state_defect.max(u.axpy(-1.0, v)?.norm() / scale);
            st.steps += 1;
        }
    }
    Ok(st)
}

impl StepStats {
    pub fn merge(&mut self, s: &StepStats) {
        self.steps += s.steps;
        self.f_increase = self.f_increase.max(s.f_increase);
        self.a_norm_decrease = self.a_norm_decrease.max(s.a_norm_decrease);
        self.vb_decrease = self.vb_decrease.max(s.vb_decrease);
        self.decrement_defect = self.decrement_defect.max(s.decrement_defect);
        self.post_step_defect = self.post_step_defect.max(s.post_step_defect);
        self.galerkin_ratio = self.galerkin_ratio.max(s.galerkin_ratio);
        self.kernel_ratio = self.kernel_ratio.max(s.kernel_ratio);
        self.orthonormality = self.orthonormality.max(s.orthonormality);
        self.oracle_defect = self.oracle_defect.max(s.oracle_defect);
        self.state_defect = self.state_defect.max(s.state_defect);
        self.dropped_state = self.dropped_state.max(s.dropped_state);
        self.cond_h = self.cond_h.max(s.cond_h);
        self.dropped_ratio = self.dropped_ratio.max(s.dropped_ratio);
    }

    pub fn descent_ok(&self) -> bool {
        self.f_increase <= 1e-12 && self.a_norm_decrease <= 1e-12 && self.vb_decrease <= 1e-12
    }
    pub fn identities_ok(&self) -> bool {
        self.decrement_defect <= 1e-10 && self.post_step_defect <= 1e-10
    }
}

/// Relative error of the analytic block gradient against central differences,
/// worst over all blocks.
pub fn gradient_fd_error(problem: &ProblemInstance) -> Result<f64> {
    let (op, b, fmt, p) = (&problem.a, &problem.b, &problem.fmt, &problem.init);
    let mut worst: f64 = 0.0;
    for mu in 0..fmt.num_blocks() {
        let w = materialize_w(fmt, p, mu)?;
        let g = gradient_block(op, b, &w, p.block(mu))?;
        let f = |q: &[f64]| {
            objective(op, b, &evaluate(fmt, &p.with_block(mu, q.to_vec())).expect("shape"))
                .expect("nonzero b")
        };
        let fd = finite_diff_grad(f, p.block(mu), DEFAULT_FD_STEP)?;
        let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dn = g.iter().zip(&fd).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        worst = worst.max(if gn > 0.0 { dn / gn } else { dn });
    }
    Ok(worst)
}

/// Worst defects of the recursion identities along a run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RecursionStats {
    pub checks: usize,
    pub recursion_defect: f64,
    pub tangent_defect: f64,
    pub symmetry_defect: f64,
}

/// Replays `sweeps` sweeps and checks `v_{μ+1} = N v_μ` for every step with
/// a predecessor block, the tangent recursion against `reference`, and the
/// transpose symmetry of the coupling matrices.
pub fn recursion_checks(
    problem: &ProblemInstance,
    reference: &DenseTensor,
    sweeps: usize,
) -> Result<RecursionStats> {
    let (op, b, fmt) = (&problem.a, &problem.b, &problem.fmt);
    let mut st = RecursionStats::default();
    let mut state = AlsState::new(problem)?;
    for _ in 0..sweeps {
        for mu in 0..fmt.num_blocks() {
            let out = micro_step(op, b, fmt, &state.params, mu, DEFAULT_EPS_RANK)?;
            let next_params = state.params.with_block(mu, out.block.clone());
            if mu >= 1 && state.k >= 1 {
                let ctx = StepContext {
                    params_before: &state.params,
                    mu,
                    v_before: &state.v,
                    v_after: &out.v_new,
                };
                let rc = recursion_check(op, b, fmt, &ctx, DEFAULT_EPS_RANK)?;
                st.recursion_defect = st.recursion_defect.max(rc.defect);
                let tr = tangent_recursion(reference, &rc.n_matrix, &state.v, &out.v_new)?;
                if tr.observed > 1e-6 {
                    st.tangent_defect = st.tangent_defect.max(tr.relative_defect);
                }
                let m1 = probe_coupling(fmt, &state.params, b, mu, mu - 1)?;
                let m2 = probe_coupling(fmt, &state.params, b, mu - 1, mu)?;
                let scale = m1.amax().max(1.0);
                st.symmetry_defect = st.symmetry_defect.max((m1 - m2.transpose()).amax() / scale);
                st.checks += 1;
            }
            state.params = next_params;
            state.v = out.v_new;
            state.f = out.record.f;
        }
        state.k += 1;
    }
    Ok(st)
}

/// Worst relative gap between the probed first/last coupling and its Tucker
/// closed form along a rank-one run.
pub fn tucker_closed_form_defect(dims: &[usize], t: usize, seed: u64, sweeps: usize) -> Result<f64> {
    let (core, factors) = tucker_superdiagonal(dims, t, seed)?;
    let problem = tucker_target(&core, &factors)?;
    let d = dims.len();
    let mut params = problem.init.clone();
    let mut worst: f64 = 0.0;
    let mut check = |p: &ParamSystem| -> Result<()> {
        let probed = probe_coupling(&problem.fmt, p, &problem.b, 0, d - 1)?;
        let closed = tucker_coupling(&core, &factors, p)?;
        let scale = closed.amax().max(1e-300);
        worst = worst.max((probed - closed).amax() / scale);
        Ok(())
    };
    check(&params)?;
    for _ in 0..sweeps {
        for mu in 0..d {
            let out = micro_step(&problem.a, &problem.b, &problem.fmt, &params, mu, DEFAULT_EPS_RANK)?;
            params.set_block(mu, out.block);
            check(&params)?;
        }
    }
    Ok(worst)
}

fn multilinearity_defect(seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for kind in [RandomFormat::Cp, RandomFormat::Tt] {
        let pb = random_problem(seed, kind)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let p = &pb.init;
        for mu in 0..pb.fmt.num_blocks() {
            let q = normal_vec(&mut rng, p.block(mu).len());
            let alpha: f64 = StandardNormal.sample(&mut rng);
            let mixed: Vec<f64> = p.block(mu).iter().zip(&q).map(|(x, y)| alpha * x + y).collect();
            let lhs = evaluate(&pb.fmt, &p.with_block(mu, mixed))?;
            let u = evaluate(&pb.fmt, p)?;
            let uq = evaluate(&pb.fmt, &p.with_block(mu, q))?;
            let rhs = u.scaled(alpha).axpy(1.0, &uq)?;
            let scale = lhs.norm().max(rhs.norm()).max(1.0);
            worst = worst.max(lhs.axpy(-1.0, &rhs)?.norm() / scale);
            let w = materialize_w(&pb.fmt, p, mu)?;
            let wp = &w * nalgebra::DVector::from_column_slice(p.block(mu));
            let fac = wp.iter().zip(u.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst = worst.max(fac / u.norm().max(1.0));
        }
    }
    Ok(worst)
}

fn record(out: &mut Vec<CheckResult>, name: &'static str, r: Result<(bool, String)>) {
    out.push(match r {
        Ok((ok, detail)) => CheckResult::new(name, ok, detail),
        Err(e) => CheckResult::new(name, false, format!("error: {e}")),
    });
}

/// Runs the full suite.
pub fn run_verify(opts: VerifyOptions) -> Vec<CheckResult> {
    let mut out = Vec::new();

    record(&mut out, "multilinearity and W·p = U(p)", (|| {
        let worst = (0..20).map(multilinearity_defect).collect::<Result<Vec<_>>>()?;
        let m = worst.into_iter().fold(0.0, f64::max);
        Ok((m <= 1e-12, format!("max relative defect {m:.2e}")))
    })());

    record(&mut out, "CP scaling non-uniqueness", (|| {
        let pb = random_problem(3, RandomFormat::Cp)?;
        let u = evaluate(&pb.fmt, &pb.init)?;
        let mut p = pb.init.clone();
        p.set_block(0, p.block(0).iter().map(|x| 3.0 * x).collect());
        p.set_block(1, p.block(1).iter().map(|x| x / 3.0).collect());
        let d = evaluate(&pb.fmt, &p)?.axpy(-1.0, &u)?.norm() / u.norm().max(1.0);
        Ok((d <= 1e-12, format!("defect {d:.2e}")))
    })());

    let merged = (|| -> Result<StepStats> {
        let mut agg = StepStats::default();
        for kind in [RandomFormat::Cp, RandomFormat::Tt, RandomFormat::CpDuplicated] {
            for seed in 0..10 {
                agg.merge(&step_checks(&random_problem(seed, kind)?, 3, opts)?);
            }
        }
        Ok(agg)
    })();
    match merged {
        Ok(s) => {
            let n = s.steps;
            out.push(CheckResult::new(
                "monotone descent chain",
                s.descent_ok(),
                format!(
                    "{n} steps; f rise {:.1e}, ‖v‖_A drop {:.1e}, ⟨v,b⟩ drop {:.1e}",
                    s.f_increase, s.a_norm_decrease, s.vb_decrease
                ),
            ));
            out.push(CheckResult::new(
                "decrement identity",
                s.decrement_defect <= 1e-10,
                format!("max defect {:.2e}", s.decrement_defect),
            ));
            out.push(CheckResult::new(
                "post-step identity",
                s.post_step_defect <= 1e-10,
                format!("max defect {:.2e}", s.post_step_defect),
            ));
            out.push(CheckResult::new(
                "Galerkin orthogonality",
                s.galerkin_ratio <= 1e-8,
                format!("max ‖Wᵀr‖/(‖W‖‖b‖) {:.2e}", s.galerkin_ratio),
            ));
            out.push(CheckResult::new(
                "minimum-norm update",
                s.kernel_ratio <= 1e-10,
                format!("max kernel component {:.2e}", s.kernel_ratio),
            ));
            out.push(CheckResult::new(
                "Löwdin orthonormality",
                s.orthonormality <= 1e-10,
                format!("max ‖VᵀV − I‖ {:.2e}", s.orthonormality),
            ));
            out.push(CheckResult::new(
                "oracle equivalence",
                s.oracle_defect <= 1e-10,
                format!("max relative gap {:.2e}", s.oracle_defect),
            ));
            out.push(CheckResult::new(
                "state consistency v = U(p)",
                s.state_defect <= 1e-10,
                format!("max relative gap {:.2e}", s.state_defect),
            ));
        }
        Err(e) => out.push(CheckResult::new("micro-step identities", false, format!("error: {e}"))),
    }

    record(&mut out, "Löwdin truncation rule", (|| {
        let w = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let basis = lowdin_basis(&w, DEFAULT_EPS_RANK)?;
        let ok = basis.rank == 2 && basis.deltas.iter().all(|d| *d > DEFAULT_EPS_RANK * basis.deltas[0]);
        Ok((ok, format!("rank {} of a 3-column W with a repeated column", basis.rank)))
    })());

    record(&mut out, "gradient vs finite differences", (|| {
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let kind = if seed % 2 == 0 { RandomFormat::Cp } else { RandomFormat::Tt };
            worst = worst.max(gradient_fd_error(&random_problem(seed, kind)?)?);
        }
        Ok((worst <= 1e-6, format!("max relative error {worst:.2e}")))
    })());

    record(&mut out, "counterexample gradients", (|| {
        let fx = counterexample_bilinear();
        let g = full_gradient(&fx.a, &fx.b, &fx.fmt, &fx.p)?;
        let gh = full_gradient(&fx.a, &fx.b, &fx.fmt, &fx.p_hat)?;
        let want = [0.0, 0.0, 0.0, -1.0 / 3.0];
        let e1 = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
        let e2 = gh.iter().zip(want).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let same = evaluate(&fx.fmt, &fx.p)? == evaluate(&fx.fmt, &fx.p_hat)?;
        Ok((
            same && e1 <= 1e-12 && e2 <= 1e-12,
            format!("F′(e1,e1) max {e1:.1e}; F′(e2,e1) = {gh:?}"),
        ))
    })());

    record(&mut out, "recursion identities", (|| {
        let mut worst = RecursionStats::default();
        let (p, _) = blambda_pair(5, 2)?;
        let pb = blambda_example(0.3, 5, 2)?;
        let reference = crate::tensor::rank_one_sum(pb.b.shape(), &[(1.0, vec![p.clone(), p.clone(), p])])?;
        for (problem, reference) in [
            (pb.clone(), reference),
            (mohlenkamp_example(0.45)?, mohlenkamp_example(0.45)?.reference.unwrap()),
        ] {
            let s = recursion_checks(&problem, &reference, 3)?;
            worst.checks += s.checks;
            worst.recursion_defect = worst.recursion_defect.max(s.recursion_defect);
            worst.tangent_defect = worst.tangent_defect.max(s.tangent_defect);
            worst.symmetry_defect = worst.symmetry_defect.max(s.symmetry_defect);
        }
        let tucker = tucker_closed_form_defect(&[3, 4, 3], 2, 1, 3)?;
        let ok = worst.recursion_defect <= 1e-8
            && worst.tangent_defect <= 1e-8
            && worst.symmetry_defect <= 1e-10
            && tucker <= 1e-8;
        Ok((
            ok,
            format!(
                "{} steps; N defect {:.1e}, tangent {:.1e}, M symmetry {:.1e}, Tucker form {:.1e}",
                worst.checks, worst.recursion_defect, worst.tangent_defect, worst.symmetry_defect, tucker
            ),
        ))
    })());

    record(&mut out, "objective two-path", (|| {
        let mut worst: f64 = 0.0;
        for seed in 0..10 {
            let pb = random_problem(seed, RandomFormat::Tt)?;
            let v = evaluate(&pb.fmt, &pb.init)?;
            worst = worst.max((objective(&pb.a, &pb.b, &v)? - objective_two_path(&pb.a, &pb.b, &v)?).abs());
        }
        Ok((worst <= 1e-12, format!("max gap {worst:.1e}")))
    })());

    record(&mut out, "rate-formula values", (|| {
        let grid: Vec<f64> = (0..=1000).map(|i| q_lambda_formula(0.5 * i as f64 / 1000.0)).collect();
        let inc = grid.windows(2).all(|w| w[1] > w[0]);
        let q46 = q_lambda_formula(0.46);
        let q50 = q_lambda_formula(0.5);
        Ok((
            inc && (q46 - 0.847).abs() <= 5e-4 && q50 == 1.0,
            format!("q(0.46) = {q46:.5}, q(0.5) = {q50}"),
        ))
    })());

    record(&mut out, "rate estimate scale invariance", (|| {
        let tans: Vec<f64> = (0..25).map(|k| 0.8f64.powi(k) * (1.0 + 0.01 * (k % 3) as f64)).collect();
        let base = rate_estimate(&tans, 10)?;
        let mut ok = true;
        for e in [-20, -3, 1, 7, 30] {
            let alpha = 2f64.powi(e);
            let scaled: Vec<f64> = tans.iter().map(|t| t * alpha).collect();
            let est = rate_estimate(&scaled, 10)?;
            ok &= est.ratios == base.ratios && est.class == base.class;
        }
        Ok((ok, format!("class {}", base.class.as_str())))
    })());

    record(&mut out, "gallery determinism and invariants", (|| {
        let a = blambda_example(0.46, 8, 7)?;
        let b = blambda_example(0.46, 8, 7)?;
        let c = totally_orthogonal(2, &[3, 3, 3], 1)?;
        let ok = a == b && c == totally_orthogonal(2, &[3, 3, 3], 1)? && !a.b.is_zero();
        Ok((ok, "seeded constructors reproduce bit-identically".to_string()))
    })());

    record(&mut out, "state initialization", (|| {
        let pb = mohlenkamp_example(0.4)?;
        let s = AlsState::new(&pb)?;
        let f = objective(&pb.a, &pb.b, &evaluate(&pb.fmt, &pb.init)?)?;
        Ok((s.f == f, format!("f(v0) = {f:.6}")))
    })());

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_cleanly() {
        let results = run_verify(VerifyOptions::default());
        for r in &results {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
    }

    #[test]
    fn decrement_fault_is_caught() {
        let results = run_verify(VerifyOptions {
            decrement_offset: 1e-6,
        });
        let dec = results.iter().find(|r| r.name == "decrement identity").unwrap();
        assert!(!dec.passed);
    }

    #[test]
    fn duplicated_problems_are_rank_deficient() {
        let pb = random_problem(4, RandomFormat::CpDuplicated).unwrap();
        let w = materialize_w(&pb.fmt, &pb.init, 0).unwrap();
        let basis = lowdin_basis(&w, DEFAULT_EPS_RANK).unwrap();
        assert!(basis.rank < w.ncols());
    }
}
