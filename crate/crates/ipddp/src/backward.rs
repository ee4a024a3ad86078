//! Backward sweep: constrained quadratic expansion of the stage subproblem,
//! positive-definiteness repair, gain computation, and the value recursion.

use nalgebra::{DMatrix, DVector};

use crate::derivatives::{stage_derivative_bundle, terminal_derivative_bundle, DerivativeBundle};
use crate::error::{Error, Result};
use crate::problem::{ControlProblem, SolverConfig};
use crate::scalar::{real, rmax, Real};
use crate::trajectory::Trajectory;

/// Quadratic model of the cost-to-go at one stage.
#[derive(Debug, Clone)]
pub struct ValueExpansion<T: Real> {
    pub v: T,
    pub vx: DVector<T>,
    pub vxx: DMatrix<T>,
}

impl<T: Real> ValueExpansion<T> {
    fn is_finite(&self) -> bool {
        self.v.is_finite()
            && self.vx.iter().all(|x| x.is_finite())
            && self.vxx.iter().all(|x| x.is_finite())
    }
}

/// Quadratic model of the stage subproblem after eliminating the multiplier
/// and slack blocks.
#[derive(Debug, Clone)]
pub struct QExpansion<T: Real> {
    pub q: T,
    pub qx: DVector<T>,
    pub qu: DVector<T>,
    pub qxx: DMatrix<T>,
    pub qxu: DMatrix<T>,
    pub qux: DMatrix<T>,
    pub quu: DMatrix<T>,
}

/// Feedforward/feedback gains for one stage, together with the constraint
/// residuals and Jacobians the forward pass replays.
#[derive(Debug, Clone)]
pub struct StageGain<T: Real> {
    pub k_ff: DVector<T>,
    pub k_fb: DMatrix<T>,
    pub mu2_used: T,
    pub eq_residual: DVector<T>,
    pub eq_jac_x: DMatrix<T>,
    pub eq_jac_u: DMatrix<T>,
    pub ineq_residual: DVector<T>,
    pub ineq_jac_x: DMatrix<T>,
    pub ineq_jac_u: DMatrix<T>,
}

/// Terminal-stage constraint data for the multiplier and slack updates.
#[derive(Debug, Clone)]
pub struct TerminalCache<T: Real> {
    pub eq_residual: DVector<T>,
    pub eq_jac: DMatrix<T>,
    pub ineq_residual: DVector<T>,
    pub ineq_jac: DMatrix<T>,
}

/// Per-stage numerical diagnostics of one backward sweep.
#[derive(Debug, Clone)]
pub struct StageDiagnostics {
    pub stage: usize,
    pub qu_inf: f64,
    pub min_eig_before: f64,
    pub min_eig_after: f64,
    pub mu2: f64,
}

/// Everything one backward sweep hands to the forward pass.
#[derive(Debug, Clone)]
pub struct GainSchedule<T: Real> {
    pub stages: Vec<StageGain<T>>,
    pub terminal: TerminalCache<T>,
    pub diagnostics: Vec<StageDiagnostics>,
}

fn inf_norm<T: Real>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |m, &x| rmax(m, x.abs()))
}

fn symmetrized<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    (m + m.transpose()) / real::<T>(2.0)
}

/// `jac^T * diag(w) * jac`.
fn weighted_gram<T: Real>(jac: &DMatrix<T>, w: &DVector<T>) -> DMatrix<T> {
    let mut scaled = jac.clone();
    for (i, &wi) in w.iter().enumerate() {
        scaled.row_mut(i).scale_mut(wi);
    }
    jac.transpose() * scaled
}

/// Shared constraint algebra of the expansion: the barrier/elimination
/// contributions to the value `v`, gradient `grad` (length `d`), and Hessian
/// `hess` (`d x d`) from the equality and inequality blocks.
fn constraint_terms<T: Real>(
    bundle: &DerivativeBundle<T>,
    s: &DVector<T>,
    lambda: &DVector<T>,
    tau: T,
    lambda_reg: T,
) -> Result<(T, DVector<T>, DMatrix<T>)> {
    let d = bundle.dim();
    let g = &bundle.eq.value;
    let h = &bundle.ineq.value;
    if h.len() != s.len() {
        return Err(Error::DimensionMismatch {
            what: "slack vector length",
            expected: h.len(),
            got: s.len(),
        });
    }
    if g.len() != lambda.len() {
        return Err(Error::DimensionMismatch {
            what: "multiplier vector length",
            expected: g.len(),
            got: lambda.len(),
        });
    }
    for &sv in s.iter() {
        if !(sv > T::zero()) {
            return Err(Error::NonpositiveSlack { stage: 0 });
        }
    }

    let mut value = lambda.dot(g);
    // Barrier gradient weight tau/s and elimination weight tau*(h+s)/s^2.
    let mut w_grad = DVector::zeros(h.len());
    let mut w_curv = DVector::zeros(h.len());
    for j in 0..h.len() {
        let sj = s[j];
        let r = h[j] + sj;
        value += tau * r / sj - tau * sj.ln();
        w_grad[j] = tau / sj + tau * r / (sj * sj);
        w_curv[j] = tau / (sj * sj);
    }

    let mut grad = bundle.ineq.jac.transpose() * w_grad;
    let mut hess = weighted_gram(&bundle.ineq.jac, &w_curv);
    hess += bundle.ineq.weighted_hessian(&s.map(|sj| tau / sj));
    if g.len() > 0 {
        grad += bundle.eq.jac.transpose() * (lambda + g / lambda_reg);
        hess += &bundle.eq.jac.transpose() * &bundle.eq.jac / lambda_reg;
        hess += bundle.eq.weighted_hessian(lambda);
    }
    debug_assert_eq!(grad.len(), d);
    Ok((value, grad, hess))
}

/// Terminal value expansion: terminal cost plus the eliminated terminal
/// constraint corrections.
pub fn terminal_value<T: Real>(
    bundle: &DerivativeBundle<T>,
    s_terminal: &DVector<T>,
    lambda_terminal: &DVector<T>,
    tau: T,
    lambda_reg: T,
) -> Result<ValueExpansion<T>> {
    let (cv, cg, ch) = constraint_terms(bundle, s_terminal, lambda_terminal, tau, lambda_reg)?;
    let out = ValueExpansion {
        v: bundle.cost.value + cv,
        vx: &bundle.cost.grad + cg,
        vxx: symmetrized(&(&bundle.cost.hess + ch)),
    };
    if !out.is_finite() {
        return Err(Error::NonFiniteValue { stage: 0 });
    }
    Ok(out)
}

/// Constrained quadratic expansion of one stage subproblem.
pub fn q_expansion<T: Real>(
    bundle: &DerivativeBundle<T>,
    next: &ValueExpansion<T>,
    s: &DVector<T>,
    lambda: &DVector<T>,
    tau: T,
    lambda_reg: T,
) -> Result<QExpansion<T>> {
    let n = bundle.n_states;
    let m = bundle.n_controls;
    let f = bundle
        .dynamics
        .as_ref()
        .expect("stage expansion needs dynamics derivatives");

    let (cv, cg, ch) = constraint_terms(bundle, s, lambda, tau, lambda_reg)?;

    let q = bundle.cost.value + next.v + cv;
    let qz = &bundle.cost.grad + cg + f.jac.transpose() * &next.vx;
    let mut qzz = &bundle.cost.hess + ch;
    qzz += f.jac.transpose() * &next.vxx * &f.jac;
    qzz += f.weighted_hessian(&next.vx);

    let out = QExpansion {
        q,
        qx: qz.rows(0, n).into_owned(),
        qu: qz.rows(n, m).into_owned(),
        qxx: symmetrized(&qzz.view((0, 0), (n, n)).into_owned()),
        qxu: qzz.view((0, n), (n, m)).into_owned(),
        qux: qzz.view((n, 0), (m, n)).into_owned(),
        quu: symmetrized(&qzz.view((n, n), (m, m)).into_owned()),
    };
    let finite = out.q.is_finite()
        && out.qx.iter().all(|v| v.is_finite())
        && out.qu.iter().all(|v| v.is_finite())
        && out.qxx.iter().all(|v| v.is_finite())
        && out.quu.iter().all(|v| v.is_finite());
    if !finite {
        return Err(Error::NonFiniteValue { stage: 0 });
    }
    Ok(out)
}

/// Regularized curvature blocks and the repair parameter that produced them.
#[derive(Debug, Clone)]
pub struct RegularizedBlocks<T: Real> {
    pub qxx: DMatrix<T>,
    pub qxu: DMatrix<T>,
    pub qux: DMatrix<T>,
    pub quu: DMatrix<T>,
    pub mu2_used: T,
    pub min_eig_before: T,
    pub min_eig_after: T,
}

fn min_eigenvalue<T: Real>(m: &DMatrix<T>) -> T {
    let eig = symmetrized(m).symmetric_eigen();
    eig.eigenvalues
        .iter()
        .fold(T::max_value().unwrap_or_else(T::one), |acc, &v| rmin_local(acc, v))
}

fn rmin_local<T: Real>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

/// Apply the global curvature shift and repair the assembled block until its
/// smallest eigenvalue reaches `eig_tol`, escalating the local shift tenfold
/// per trial from `mu2_init`.
pub fn regularize_q<T: Real>(
    q: &QExpansion<T>,
    mu1: T,
    mu2_init: T,
    eig_tol: T,
    f_x: &DMatrix<T>,
    f_u: &DMatrix<T>,
) -> Result<RegularizedBlocks<T>> {
    let n = q.qxx.nrows();
    let m = q.quu.nrows();
    let base_xx = q.qxx.clone();
    let base_xu = &q.qxu + f_x.transpose() * f_u * mu1;
    let base_ux = &q.qux + f_u.transpose() * f_x * mu1;
    let base_uu = &q.quu + f_u.transpose() * f_u * mu1;

    let d = n + m;
    let mut zz = DMatrix::zeros(d, d);
    zz.view_mut((0, 0), (n, n)).copy_from(&base_xx);
    zz.view_mut((0, n), (n, m)).copy_from(&base_xu);
    zz.view_mut((n, 0), (m, n)).copy_from(&base_ux);
    zz.view_mut((n, n), (m, m)).copy_from(&base_uu);

    let min_eig_before = min_eigenvalue(&zz);
    let ceiling = real::<T>(1e8);
    let mut mu2 = T::zero();
    let mut min_eig_after = min_eig_before;
    while min_eig_after < eig_tol {
        mu2 = if mu2 == T::zero() {
            mu2_init
        } else {
            mu2 * real::<T>(10.0)
        };
        if mu2 > ceiling {
            return Err(Error::RegularizationFailed {
                stage: 0,
                mu2: mu2.to_f64().unwrap_or(f64::INFINITY),
            });
        }
        let shifted = &zz + DMatrix::identity(d, d) * mu2;
        min_eig_after = min_eigenvalue(&shifted);
    }

    let eye_n = DMatrix::identity(n, n);
    let eye_m = DMatrix::identity(m, m);
    Ok(RegularizedBlocks {
        qxx: base_xx + eye_n * mu2,
        qxu: base_xu,
        qux: base_ux,
        quu: base_uu + eye_m * mu2,
        mu2_used: mu2,
        min_eig_before,
        min_eig_after,
    })
}

/// Feedforward and feedback gains from the regularized control block, via a
/// symmetric positive-definite factorization.
pub fn compute_gains<T: Real>(
    quu_reg: &DMatrix<T>,
    qu: &DVector<T>,
    qux: &DMatrix<T>,
) -> Result<(DVector<T>, DMatrix<T>)> {
    let chol = quu_reg
        .clone()
        .cholesky()
        .ok_or(Error::FactorizationFailed { stage: 0 })?;
    let k_ff = -chol.solve(qu);
    let k_fb = -chol.solve(qux);
    Ok((k_ff, k_fb))
}

/// Value recursion at one stage from its expansion and gains.
pub fn value_update<T: Real>(
    q: &QExpansion<T>,
    k_ff: &DVector<T>,
    k_fb: &DMatrix<T>,
) -> ValueExpansion<T> {
    let half = real::<T>(0.5);
    let quu_k = &q.quu * k_ff;
    let v = q.q + k_ff.dot(&quu_k) * half + k_ff.dot(&q.qu);
    let vx = &q.qx + k_fb.transpose() * &quu_k + k_fb.transpose() * &q.qu + q.qux.transpose() * k_ff;
    let vxx = &q.qxx
        + k_fb.transpose() * &q.quu * k_fb
        + k_fb.transpose() * &q.qux
        + q.qux.transpose() * k_fb;
    ValueExpansion {
        v,
        vx,
        vxx: symmetrized(&vxx),
    }
}

fn with_stage(err: Error, stage: usize) -> Error {
    match err {
        Error::NonpositiveSlack { .. } => Error::NonpositiveSlack { stage },
        Error::NonFiniteValue { .. } => Error::NonFiniteValue { stage },
        Error::RegularizationFailed { mu2, .. } => Error::RegularizationFailed { stage, mu2 },
        Error::FactorizationFailed { .. } => Error::FactorizationFailed { stage },
        other => other,
    }
}

/// One full backward sweep. Returns the gain schedule and the stationarity
/// measure `max_k ||Q_u||_inf` used by the subproblem convergence test.
pub fn backward_pass<T: Real, P: ControlProblem<T>>(
    problem: &P,
    traj: &Trajectory<T>,
    tau: T,
    config: &SolverConfig<T>,
) -> Result<(GainSchedule<T>, T)> {
    let n_stages = traj.horizon();
    let lambda_reg = (config.lambda_reg_fn)(tau);
    if !(lambda_reg > T::zero()) {
        return Err(Error::InvalidConfig(
            "lambda_reg_fn must return a positive value".into(),
        ));
    }

    let term_bundle = terminal_derivative_bundle(problem, &traj.states[n_stages])?;
    let mut value = terminal_value(
        &term_bundle,
        &traj.slacks[n_stages],
        &traj.multipliers[n_stages],
        tau,
        lambda_reg,
    )
    .map_err(|e| with_stage(e, n_stages))?;
    let terminal = TerminalCache {
        eq_residual: term_bundle.eq.value.clone(),
        eq_jac: term_bundle.eq.jac.clone(),
        ineq_residual: term_bundle.ineq.value.clone(),
        ineq_jac: term_bundle.ineq.jac.clone(),
    };

    let mut stages: Vec<StageGain<T>> = Vec::with_capacity(n_stages);
    let mut diagnostics: Vec<StageDiagnostics> = Vec::with_capacity(n_stages);
    let mut opt_inf = T::zero();

    for k in (0..n_stages).rev() {
        let bundle = stage_derivative_bundle(problem, k, &traj.states[k], &traj.controls[k])?;
        let q = q_expansion(
            &bundle,
            &value,
            &traj.slacks[k],
            &traj.multipliers[k],
            tau,
            lambda_reg,
        )
        .map_err(|e| with_stage(e, k))?;
        let qu_inf = inf_norm(&q.qu);
        opt_inf = rmax(opt_inf, qu_inf);

        let f_x = bundle.f_x();
        let f_u = bundle.f_u();
        let mut mu2_seed = config.mu2_init;
        let (reg, k_ff, k_fb) = loop {
            let reg = regularize_q(&q, config.mu1, mu2_seed, config.eig_tol, &f_x, &f_u)
                .map_err(|e| with_stage(e, k))?;
            match compute_gains(&reg.quu, &q.qu, &q.qux) {
                Ok((k_ff, k_fb)) => break (reg, k_ff, k_fb),
                Err(_) => {
                    // Eigenvalue test passed but the factorization did not;
                    // escalate the ladder and retry.
                    mu2_seed = rmax(reg.mu2_used, mu2_seed) * real::<T>(10.0);
                    if mu2_seed > real::<T>(1e8) {
                        return Err(Error::RegularizationFailed {
                            stage: k,
                            mu2: mu2_seed.to_f64().unwrap_or(f64::INFINITY),
                        });
                    }
                }
            }
        };

        value = value_update(&q, &k_ff, &k_fb);
        if !value.is_finite() {
            return Err(Error::NonFiniteValue { stage: k });
        }

        diagnostics.push(StageDiagnostics {
            stage: k,
            qu_inf: qu_inf.to_f64().unwrap_or(f64::NAN),
            min_eig_before: reg.min_eig_before.to_f64().unwrap_or(f64::NAN),
            min_eig_after: reg.min_eig_after.to_f64().unwrap_or(f64::NAN),
            mu2: reg.mu2_used.to_f64().unwrap_or(f64::NAN),
        });
        stages.push(StageGain {
            k_ff,
            k_fb,
            mu2_used: reg.mu2_used,
            eq_residual: bundle.eq.value.clone(),
            eq_jac_x: bundle.g_x(),
            eq_jac_u: bundle.g_u(),
            ineq_residual: bundle.ineq.value.clone(),
            ineq_jac_x: bundle.h_x(),
            ineq_jac_u: bundle.h_u(),
        });
    }
    stages.reverse();
    diagnostics.reverse();

    Ok((
        GainSchedule {
            stages,
            terminal,
            diagnostics,
        },
        opt_inf,
    ))
}
