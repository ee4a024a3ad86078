//! Forward pass: step-size selection, explicit control/multiplier/slack
//! updates, trajectory rollout under the new policy, and backtracking
//! acceptance.

use nalgebra::DVector;

use crate::backward::{GainSchedule, StageGain, TerminalCache};
use crate::error::{Error, Result};
use crate::problem::{eval_dynamics, ControlProblem, SolverConfig};
use crate::scalar::{rmin, Real};
use crate::trajectory::{merit_phi, violation_theta, Trajectory};

/// Which acceptance test admitted the step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcceptanceBranch {
    /// Violation already at tolerance and the merit function decreased.
    FeasibleDecrease,
    /// Constraint violation decreased sufficiently.
    ViolationDecrease,
    /// Merit function decreased sufficiently.
    MeritDecrease,
}

impl AcceptanceBranch {
    pub fn as_str(self) -> &'static str {
        match self {
            AcceptanceBranch::FeasibleDecrease => "feasible-decrease",
            AcceptanceBranch::ViolationDecrease => "violation-decrease",
            AcceptanceBranch::MeritDecrease => "merit-decrease",
        }
    }
}

/// Accepted trajectory and the step-size data that admitted it.
#[derive(Debug, Clone)]
pub struct LineSearchOutcome<T: Real> {
    pub trajectory: Trajectory<T>,
    pub alpha: T,
    pub phi_old: T,
    pub phi_new: T,
    pub theta_old: T,
    pub theta_new: T,
    pub trials: usize,
    pub branch: AcceptanceBranch,
}

/// Largest step in (0, 1] keeping `s + alpha * ds >= (1 - ftb_eps) * s`
/// elementwise: the fraction-to-boundary bound.
pub fn max_step<T: Real>(slacks: &[DVector<T>], slack_steps: &[DVector<T>], ftb_eps: T) -> T {
    let mut alpha = T::one();
    for (s, ds) in slacks.iter().zip(slack_steps.iter()) {
        for (&sv, &dv) in s.iter().zip(ds.iter()) {
            if dv < T::zero() {
                alpha = rmin(alpha, ftb_eps * sv / -dv);
            }
        }
    }
    alpha
}

/// Explicit update of one stage's control, multiplier, and slack from the
/// cached residuals and the state deviation already realized at this stage.
#[allow(clippy::too_many_arguments)]
pub fn stage_step_update<T: Real>(
    gain: &StageGain<T>,
    x_new: &DVector<T>,
    x_old: &DVector<T>,
    u_old: &DVector<T>,
    lambda_old: &DVector<T>,
    s_old: &DVector<T>,
    alpha: T,
    lambda_reg: T,
    config: &SolverConfig<T>,
) -> (DVector<T>, DVector<T>, DVector<T>) {
    let dx = x_new - x_old;
    let du = if config.literal_eq26_controls {
        &gain.k_ff + &gain.k_fb * &dx * alpha
    } else {
        &gain.k_ff * alpha + &gain.k_fb * &dx
    };
    let u_new = u_old + &du;

    let lambda_new = if lambda_old.len() > 0 {
        let step = (&gain.eq_residual * alpha + &gain.eq_jac_x * &dx + &gain.eq_jac_u * &du)
            / lambda_reg;
        if config.literal_multiplier_sign {
            lambda_old - step
        } else {
            lambda_old + step
        }
    } else {
        lambda_old.clone()
    };

    let s_new = if s_old.len() > 0 {
        s_old - (&gain.ineq_residual + s_old) * alpha
            - &gain.ineq_jac_x * &dx
            - &gain.ineq_jac_u * &du
    } else {
        s_old.clone()
    };

    (u_new, lambda_new, s_new)
}

fn terminal_step_update<T: Real>(
    cache: &TerminalCache<T>,
    x_new: &DVector<T>,
    x_old: &DVector<T>,
    lambda_old: &DVector<T>,
    s_old: &DVector<T>,
    alpha: T,
    lambda_reg: T,
    config: &SolverConfig<T>,
) -> (DVector<T>, DVector<T>) {
    let dx = x_new - x_old;
    let lambda_new = if lambda_old.len() > 0 {
        let step = (&cache.eq_residual * alpha + &cache.eq_jac * &dx) / lambda_reg;
        if config.literal_multiplier_sign {
            lambda_old - step
        } else {
            lambda_old + step
        }
    } else {
        lambda_old.clone()
    };
    let s_new = if s_old.len() > 0 {
        s_old - (&cache.ineq_residual + s_old) * alpha - &cache.ineq_jac * &dx
    } else {
        s_old.clone()
    };
    (lambda_new, s_new)
}

/// Roll the dynamics forward under the gain schedule at step size `alpha`,
/// applying the multiplier and slack updates along the way.
pub fn forward_pass<T: Real, P: ControlProblem<T>>(
    problem: &P,
    traj_old: &Trajectory<T>,
    gains: &GainSchedule<T>,
    alpha: T,
    tau: T,
    config: &SolverConfig<T>,
) -> Result<Trajectory<T>> {
    let n = traj_old.horizon();
    let lambda_reg = (config.lambda_reg_fn)(tau);
    let mut states = Vec::with_capacity(n + 1);
    let mut controls = Vec::with_capacity(n);
    let mut slacks = Vec::with_capacity(n + 1);
    let mut multipliers = Vec::with_capacity(n + 1);

    states.push(problem.initial_state());
    for k in 0..n {
        let (u_new, lambda_new, s_new) = stage_step_update(
            &gains.stages[k],
            &states[k],
            &traj_old.states[k],
            &traj_old.controls[k],
            &traj_old.multipliers[k],
            &traj_old.slacks[k],
            alpha,
            lambda_reg,
            config,
        );
        let next = eval_dynamics(problem, k, &states[k], &u_new);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::RolloutDiverged { stage: k + 1 });
        }
        states.push(next);
        controls.push(u_new);
        slacks.push(s_new);
        multipliers.push(lambda_new);
    }

    let (lambda_n, s_n) = terminal_step_update(
        &gains.terminal,
        &states[n],
        &traj_old.states[n],
        &traj_old.multipliers[n],
        &traj_old.slacks[n],
        alpha,
        lambda_reg,
        config,
    );
    slacks.push(s_n);
    multipliers.push(lambda_n);

    Ok(Trajectory {
        states,
        controls,
        slacks,
        multipliers,
    })
}

/// Proxy slack step direction used to bound the step size before any state
/// deviation exists: the unit-step slack update with zero state deviation and
/// pure feedforward control change.
fn proxy_slack_steps<T: Real>(traj: &Trajectory<T>, gains: &GainSchedule<T>) -> Vec<DVector<T>> {
    let n = traj.horizon();
    let mut steps = Vec::with_capacity(n + 1);
    for k in 0..n {
        let g = &gains.stages[k];
        if traj.slacks[k].len() > 0 {
            steps.push(-(&g.ineq_residual + &traj.slacks[k]) - &g.ineq_jac_u * &g.k_ff);
        } else {
            steps.push(DVector::zeros(0));
        }
    }
    if traj.slacks[n].len() > 0 {
        steps.push(-(&gains.terminal.ineq_residual + &traj.slacks[n]));
    } else {
        steps.push(DVector::zeros(0));
    }
    steps
}

/// Backtracking line search with fraction-to-boundary step cap.
///
/// Trials shrink geometrically from the cap; a trial is accepted when the
/// violation is at tolerance and the merit decreased, or when either the
/// violation or the merit decreased sufficiently. Non-finite rollouts and
/// nonpositive slacks reject the trial rather than aborting.
pub fn line_search<T: Real, P: ControlProblem<T>>(
    problem: &P,
    traj_old: &Trajectory<T>,
    gains: &GainSchedule<T>,
    tau: T,
    config: &SolverConfig<T>,
) -> Result<LineSearchOutcome<T>> {
    let phi_old = merit_phi(traj_old, problem, tau)?;
    let theta_old = violation_theta(traj_old, problem)?;
    let alpha_max = max_step(&traj_old.slacks, &proxy_slack_steps(traj_old, gains), config.ftb_eps);

    let mut alpha = alpha_max;
    let mut best: Option<(T, T, T)> = None; // (theta, phi, alpha) of best rejected trial
    for trial in 0..config.max_line_search_iters {
        let candidate = forward_pass(problem, traj_old, gains, alpha, tau, config);
        if let Ok(traj_new) = candidate {
            let positive = traj_new.slacks.iter().all(|s| s.iter().all(|&v| v > T::zero()));
            if positive && traj_new.is_finite() {
                let phi_new = merit_phi(&traj_new, problem, tau)?;
                let theta_new = violation_theta(&traj_new, problem)?;
                if phi_new.is_finite() && theta_new.is_finite() {
                    let merit_ok = phi_new <= phi_old - config.eps_theta * theta_old;
                    let branch = if theta_new <= config.eps_tol {
                        merit_ok.then_some(AcceptanceBranch::FeasibleDecrease)
                    } else if theta_new <= (T::one() - config.eps_theta) * theta_old {
                        Some(AcceptanceBranch::ViolationDecrease)
                    } else if merit_ok {
                        Some(AcceptanceBranch::MeritDecrease)
                    } else {
                        None
                    };
                    if let Some(branch) = branch {
                        return Ok(LineSearchOutcome {
                            trajectory: traj_new,
                            alpha,
                            phi_old,
                            phi_new,
                            theta_old,
                            theta_new,
                            trials: trial + 1,
                            branch,
                        });
                    }
                    let better = match &best {
                        Some((bt, bp, _)) => theta_new < *bt || (theta_new == *bt && phi_new < *bp),
                        None => true,
                    };
                    if better {
                        best = Some((theta_new, phi_new, alpha));
                    }
                }
            }
        }
        alpha *= config.alpha_backtrack;
    }

    let (best_theta, best_phi, best_alpha) = best.unwrap_or((
        T::from_f64(f64::INFINITY).unwrap_or_else(T::one),
        T::from_f64(f64::INFINITY).unwrap_or_else(T::one),
        T::zero(),
    ));
    Err(Error::LineSearchFailed {
        trials: config.max_line_search_iters,
        best_alpha: best_alpha.to_f64().unwrap_or(f64::NAN),
        best_phi: best_phi.to_f64().unwrap_or(f64::NAN),
        best_theta: best_theta.to_f64().unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backward::backward_pass;
    use crate::scalar::Smooth;
    use crate::trajectory::rollout;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn dvec(v: &[f64]) -> DVector<f64> {
        DVector::from_vec(v.to_vec())
    }

    #[test]
    fn max_step_examples_exact() {
        // Single slack 1 with step -2 at 0.995: 0.4975 exactly.
        assert_eq!(
            max_step(&[dvec(&[1.0])], &[dvec(&[-2.0])], 0.995),
            0.4975
        );
        // Nonnegative steps leave the bound inactive.
        assert_eq!(max_step(&[dvec(&[0.1, 5.0])], &[dvec(&[0.0, 3.0])], 0.995), 1.0);
        // Elementwise minimum with capping at one.
        assert_eq!(
            max_step(&[dvec(&[2.0, 1.0])], &[dvec(&[-4.0, -0.5])], 0.995),
            0.4975
        );
    }

    fn plain_gain(m: usize, n: usize, k_ff: &[f64]) -> StageGain<f64> {
        StageGain {
            k_ff: dvec(k_ff),
            k_fb: DMatrix::zeros(m, n),
            mu2_used: 0.0,
            eq_residual: DVector::zeros(0),
            eq_jac_x: DMatrix::zeros(0, n),
            eq_jac_u: DMatrix::zeros(0, m),
            ineq_residual: DVector::zeros(0),
            ineq_jac_x: DMatrix::zeros(0, n),
            ineq_jac_u: DMatrix::zeros(0, m),
        }
    }

    fn empty_terminal(n: usize) -> TerminalCache<f64> {
        TerminalCache {
            eq_residual: DVector::zeros(0),
            eq_jac: DMatrix::zeros(0, n),
            ineq_residual: DVector::zeros(0),
            ineq_jac: DMatrix::zeros(0, n),
        }
    }

    #[test]
    fn stage_update_pure_feedforward() {
        let gain = plain_gain(1, 1, &[0.75]);
        let cfg = SolverConfig::default();
        let x = dvec(&[2.0]);
        let (u, _, _) = stage_step_update(
            &gain,
            &x,
            &x,
            &dvec(&[0.125]),
            &DVector::zeros(0),
            &DVector::zeros(0),
            1.0,
            1.0,
            &cfg,
        );
        assert_eq!(u[0], 0.875);
    }

    #[test]
    fn stage_update_leaves_feasible_duals_alone() {
        // g = 0 and dx = du = 0: multiplier unchanged. h + s = 0: slack unchanged.
        let mut gain = plain_gain(1, 1, &[0.0]);
        gain.eq_residual = dvec(&[0.0]);
        gain.eq_jac_x = DMatrix::zeros(1, 1);
        gain.eq_jac_u = DMatrix::zeros(1, 1);
        gain.ineq_residual = dvec(&[-0.4]);
        gain.ineq_jac_x = DMatrix::zeros(1, 1);
        gain.ineq_jac_u = DMatrix::zeros(1, 1);
        let cfg = SolverConfig::default();
        let x = dvec(&[1.0]);
        let (_, lambda, s) = stage_step_update(
            &gain,
            &x,
            &x,
            &dvec(&[0.0]),
            &dvec(&[3.0]),
            &dvec(&[0.4]),
            0.5,
            2.0,
            &cfg,
        );
        assert_eq!(lambda[0], 3.0);
        assert_eq!(s[0], 0.4);
    }

    #[test]
    fn literal_control_scaling_differs() {
        let mut gain = plain_gain(1, 1, &[1.0]);
        gain.k_fb = DMatrix::from_row_slice(1, 1, &[2.0]);
        let mut cfg = SolverConfig::default();
        let x_old = dvec(&[0.0]);
        let x_new = dvec(&[1.0]);
        let args = |cfg: &SolverConfig<f64>| {
            stage_step_update(
                &gain,
                &x_new,
                &x_old,
                &dvec(&[0.0]),
                &DVector::zeros(0),
                &DVector::zeros(0),
                0.5,
                1.0,
                cfg,
            )
            .0[0]
        };
        // Default: alpha k + K dx = 0.5 + 2.0.
        assert_eq!(args(&cfg), 2.5);
        cfg.literal_eq26_controls = true;
        // Literal: k + alpha K dx = 1.0 + 1.0.
        assert_eq!(args(&cfg), 2.0);
    }

    struct Scalar1;
    impl ControlProblem<f64> for Scalar1 {
        fn n_states(&self) -> usize {
            1
        }
        fn n_controls(&self) -> usize {
            1
        }
        fn horizon(&self) -> usize {
            1
        }
        fn initial_state(&self) -> DVector<f64> {
            dvec(&[2.0])
        }
        fn dynamics<S: Smooth<f64>>(&self, _k: usize, x: &[S], u: &[S]) -> Vec<S> {
            vec![x[0].clone() + u[0].clone()]
        }
        fn stage_cost<S: Smooth<f64>>(&self, _k: usize, x: &[S], u: &[S]) -> S {
            x[0].sq() + u[0].sq()
        }
        fn terminal_cost<S: Smooth<f64>>(&self, x: &[S]) -> S {
            x[0].sq()
        }
    }

    fn unconstrained_traj(problem: &Scalar1, u0: f64) -> Trajectory<f64> {
        let controls = vec![dvec(&[u0])];
        let states = rollout(problem, &controls).unwrap();
        Trajectory {
            states,
            controls,
            slacks: vec![DVector::zeros(0); 2],
            multipliers: vec![DVector::zeros(0); 2],
        }
    }

    #[test]
    fn forward_pass_zero_gains_is_identity() {
        let traj = unconstrained_traj(&Scalar1, 0.25);
        let gains = GainSchedule {
            stages: vec![plain_gain(1, 1, &[0.0])],
            terminal: empty_terminal(1),
            diagnostics: Vec::new(),
        };
        let out = forward_pass(&Scalar1, &traj, &gains, 0.7, 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(out.states, traj.states);
        assert_eq!(out.controls, traj.controls);
    }

    #[test]
    fn forward_pass_matches_hand_rollout() {
        // x0 = 2, u_old = 0, k = -1, K = -0.5, alpha = 1:
        // u_new = -1, x1 = 2 - 1 = 1.
        let traj = unconstrained_traj(&Scalar1, 0.0);
        let mut gain = plain_gain(1, 1, &[-1.0]);
        gain.k_fb = DMatrix::from_row_slice(1, 1, &[-0.5]);
        let gains = GainSchedule {
            stages: vec![gain],
            terminal: empty_terminal(1),
            diagnostics: Vec::new(),
        };
        let out = forward_pass(&Scalar1, &traj, &gains, 1.0, 1.0, &SolverConfig::default()).unwrap();
        assert_eq!(out.controls[0][0], -1.0);
        assert_eq!(out.states[1][0], 1.0);
    }

    #[test]
    fn forward_pass_initial_state_is_alpha_independent() {
        let traj = unconstrained_traj(&Scalar1, 0.1);
        let gains = GainSchedule {
            stages: vec![plain_gain(1, 1, &[0.3])],
            terminal: empty_terminal(1),
            diagnostics: Vec::new(),
        };
        for &alpha in &[1.0, 0.5, 0.01] {
            let out =
                forward_pass(&Scalar1, &traj, &gains, alpha, 1.0, &SolverConfig::default()).unwrap();
            assert_eq!(out.states[0], traj.states[0]);
        }
    }

    #[test]
    fn line_search_accepts_descent_first_trial() {
        // From u = 0 on a strictly convex unconstrained problem, one backward
        // pass gives a descent direction accepted immediately.
        let traj = unconstrained_traj(&Scalar1, 0.0);
        let cfg = SolverConfig::default();
        let (gains, _) = backward_pass(&Scalar1, &traj, 1.0, &cfg).unwrap();
        let out = line_search(&Scalar1, &traj, &gains, 1.0, &cfg).unwrap();
        assert_eq!(out.trials, 1);
        assert_eq!(out.alpha, 1.0);
        assert_eq!(out.branch, AcceptanceBranch::FeasibleDecrease);
        assert!(out.phi_new < out.phi_old);
    }

    #[test]
    fn line_search_violation_branch_rule() {
        // theta_old = 1, eps_theta = 0.01: a trial with theta_new = 0.9 is
        // accepted through the violation test (0.9 <= 0.99).
        let theta_old: f64 = 1.0;
        let theta_new: f64 = 0.9;
        let eps_theta = 0.01;
        assert!(theta_new <= (1.0 - eps_theta) * theta_old);
    }

    #[test]
    fn line_search_skips_divergent_trials() {
        // Dynamics blow up for |u| > 1.5; the feedforward of -2 diverges at
        // alpha = 1 and succeeds after one halving.
        struct Guarded;
        impl ControlProblem<f64> for Guarded {
            fn n_states(&self) -> usize {
                1
            }
            fn n_controls(&self) -> usize {
                1
            }
            fn horizon(&self) -> usize {
                1
            }
            fn initial_state(&self) -> DVector<f64> {
                dvec(&[2.0])
            }
            fn dynamics<S: Smooth<f64>>(&self, _k: usize, x: &[S], u: &[S]) -> Vec<S> {
                if u[0].value().abs() > 1.5 {
                    vec![u[0].clone() * S::from_f64(f64::NAN)]
                } else {
                    vec![x[0].clone() + u[0].clone()]
                }
            }
            fn stage_cost<S: Smooth<f64>>(&self, _k: usize, x: &[S], u: &[S]) -> S {
                x[0].sq() + u[0].sq()
            }
            fn terminal_cost<S: Smooth<f64>>(&self, x: &[S]) -> S {
                x[0].sq()
            }
        }
        let controls = vec![dvec(&[0.0])];
        let states = rollout(&Guarded, &controls).unwrap();
        let traj = Trajectory {
            states,
            controls,
            slacks: vec![DVector::zeros(0); 2],
            multipliers: vec![DVector::zeros(0); 2],
        };
        let gains = GainSchedule {
            stages: vec![plain_gain(1, 1, &[-2.0])],
            terminal: empty_terminal(1),
            diagnostics: Vec::new(),
        };
        let out = line_search(&Guarded, &traj, &gains, 1.0, &SolverConfig::default()).unwrap();
        assert!(out.trials >= 2, "first trial should diverge");
        assert_relative_eq!(out.alpha, 0.5, max_relative = 1e-15);
    }

    #[test]
    fn line_search_failure_carries_diagnostics() {
        // Feedforward pointing uphill on a convex problem: nothing accepts.
        let traj = unconstrained_traj(&Scalar1, 0.0);
        let gains = GainSchedule {
            stages: vec![plain_gain(1, 1, &[5.0])],
            terminal: empty_terminal(1),
            diagnostics: Vec::new(),
        };
        let mut cfg = SolverConfig::default();
        cfg.max_line_search_iters = 5;
        match line_search(&Scalar1, &traj, &gains, 1.0, &cfg) {
            Err(Error::LineSearchFailed { trials, best_theta, .. }) => {
                assert_eq!(trials, 5);
                assert_eq!(best_theta, 0.0);
            }
            other => panic!("expected line-search failure, got {other:?}"),
        }
    }

    #[test]
    fn alpha_shrinks_geometrically() {
        let cfg = SolverConfig::<f64>::default();
        let alpha_max = 0.8_f64;
        let mut expected = alpha_max;
        let mut alpha = alpha_max;
        for _ in 0..6 {
            assert_eq!(alpha, expected);
            alpha *= cfg.alpha_backtrack;
            expected *= 0.5;
        }
    }
}
