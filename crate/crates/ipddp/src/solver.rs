//! Outer interior-point loop: barrier subproblems, convergence test, barrier
//! schedule, and iteration logging.

use std::io::Write;
use std::path::Path;

use nalgebra::DVector;

use crate::backward::{backward_pass, StageDiagnostics};
use crate::error::{Error, Result};
use crate::forward::{line_search, AcceptanceBranch};
use crate::problem::{ControlProblem, SolverConfig};
use crate::scalar::{real, rmax, rmin, Real};
use crate::trajectory::{initialize_variables, rollout, Trajectory};

/// Why the solve stopped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    /// The barrier parameter fell below the overall tolerance.
    ToleranceReached,
    MaxIters,
    LineSearchFailure,
    RegularizationFailure,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::ToleranceReached => "tolerance-reached",
            Termination::MaxIters => "max-iters",
            Termination::LineSearchFailure => "line-search-failure",
            Termination::RegularizationFailure => "regularization-failure",
        }
    }
}

/// One accepted iteration of the outer loop.
#[derive(Debug, Clone)]
pub struct IterationRecord<T: Real> {
    pub iter: usize,
    /// Barrier parameter the iteration ran at.
    pub tau: T,
    /// Merit value of the accepted trajectory at this `tau`.
    pub phi: T,
    /// Constraint violation of the accepted trajectory.
    pub theta: T,
    /// Accepted step size.
    pub alpha: T,
    /// Stationarity measure `max_k ||Q_u||_inf` from the backward sweep.
    pub opt_inf: T,
    /// Largest local regularization used across stages.
    pub mu2: T,
    /// Line-search trials spent.
    pub ls_trials: usize,
    /// Smallest slack entry of the accepted iterate (diagnostic; not part of
    /// the exported history table).
    pub min_slack: T,
    /// Acceptance branch the step passed through (diagnostic).
    pub branch: AcceptanceBranch,
}

/// Final iterate, termination reason, and the per-iteration history.
#[derive(Debug, Clone)]
pub struct SolveResult<T: Real> {
    pub trajectory: Trajectory<T>,
    pub termination: Termination,
    pub history: Vec<IterationRecord<T>>,
    pub final_tau: T,
    pub final_phi: T,
    pub final_theta: T,
    /// Backward-sweep diagnostics of the last completed iteration.
    pub last_diagnostics: Vec<StageDiagnostics>,
}

/// Subproblem convergence test: both the violation and the stationarity
/// measure must fall below `eps_tau * tau`.
pub fn barrier_converged<T: Real>(theta: T, opt_inf: T, tau: T, eps_tau: T) -> bool {
    rmax(theta, opt_inf) <= eps_tau * tau
}

/// Barrier schedule: geometric early, superlinear near zero, floored at a
/// tenth of the overall tolerance.
pub fn update_tau<T: Real>(tau: T, eps_tol: T) -> T {
    let fifth = real::<T>(0.2);
    let three_halves = real::<T>(1.5);
    rmax(eps_tol / real::<T>(10.0), rmin(fifth * tau, tau.powf(three_halves)))
}

/// Solve the constrained optimal control problem from an initial control
/// sequence.
///
/// Setup failures (invalid configuration, divergent initial rollout) return
/// an error; failures after the first accepted iterate return a normal
/// [`SolveResult`] whose [`Termination`] names the failure, with the history
/// and the last accepted iterate attached.
pub fn solve<T: Real, P: ControlProblem<T>>(
    problem: &P,
    initial_controls: &[DVector<T>],
    config: &SolverConfig<T>,
) -> Result<SolveResult<T>> {
    config.validate()?;
    let states = rollout(problem, initial_controls)?;
    let (slacks, multipliers, tau0) = initialize_variables(problem, &states, initial_controls);
    let mut traj = Trajectory {
        states,
        controls: initial_controls.to_vec(),
        slacks,
        multipliers,
    };

    let mut tau = tau0;
    let mut history: Vec<IterationRecord<T>> = Vec::new();
    let mut last_diagnostics: Vec<StageDiagnostics> = Vec::new();
    let mut iter = 0;

    let finish = |traj: Trajectory<T>,
                  termination: Termination,
                  history: Vec<IterationRecord<T>>,
                  tau: T,
                  diagnostics: Vec<StageDiagnostics>| {
        let (phi, theta) = match history.last() {
            Some(rec) => (rec.phi, rec.theta),
            None => (T::zero(), T::zero()),
        };
        Ok(SolveResult {
            trajectory: traj,
            termination,
            history,
            final_tau: tau,
            final_phi: phi,
            final_theta: theta,
            last_diagnostics: diagnostics,
        })
    };

    while tau >= config.eps_tol {
        if iter >= config.max_outer_iters {
            return finish(traj, Termination::MaxIters, history, tau, last_diagnostics);
        }

        let (gains, opt_inf) = match backward_pass(problem, &traj, tau, config) {
            Ok(out) => out,
            Err(Error::RegularizationFailed { .. }) | Err(Error::FactorizationFailed { .. }) => {
                return finish(
                    traj,
                    Termination::RegularizationFailure,
                    history,
                    tau,
                    last_diagnostics,
                );
            }
            Err(e) => return Err(e),
        };

        let outcome = match line_search(problem, &traj, &gains, tau, config) {
            Ok(out) => out,
            Err(Error::LineSearchFailed { .. }) => {
                return finish(
                    traj,
                    Termination::LineSearchFailure,
                    history,
                    tau,
                    last_diagnostics,
                );
            }
            Err(e) => return Err(e),
        };

        traj = outcome.trajectory;
        let mu2_max = gains
            .stages
            .iter()
            .fold(T::zero(), |m, g| rmax(m, g.mu2_used));
        history.push(IterationRecord {
            iter,
            tau,
            phi: outcome.phi_new,
            theta: outcome.theta_new,
            alpha: outcome.alpha,
            opt_inf,
            mu2: mu2_max,
            ls_trials: outcome.trials,
            min_slack: traj.min_slack(),
            branch: outcome.branch,
        });
        last_diagnostics = gains.diagnostics;
        iter += 1;

        // Lower the barrier parameter once the subproblem is solved; skip
        // levels that the current iterate already satisfies.
        if barrier_converged(outcome.theta_new, opt_inf, tau, config.eps_tau) {
            tau = update_tau(tau, config.eps_tol);
            while tau >= config.eps_tol
                && barrier_converged(outcome.theta_new, opt_inf, tau, config.eps_tau)
            {
                tau = update_tau(tau, config.eps_tol);
            }
        }
    }

    finish(
        traj,
        Termination::ToleranceReached,
        history,
        tau,
        last_diagnostics,
    )
}

/// Write the iteration history as CSV with 17 significant digits.
pub fn write_history_csv<T: Real, W: Write>(
    history: &[IterationRecord<T>],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "iter,tau,phi,theta,alpha,opt_inf,mu2,ls_trials")?;
    for rec in history {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            rec.iter, rec.tau, rec.phi, rec.theta, rec.alpha, rec.opt_inf, rec.mu2, rec.ls_trials
        )?;
    }
    Ok(())
}

pub fn write_history_csv_path<T: Real>(
    history: &[IterationRecord<T>],
    path: &Path,
) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_history_csv(history, std::io::BufWriter::new(file)).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Smooth;
    use approx::assert_relative_eq;

    #[test]
    fn tau_update_examples() {
        assert_relative_eq!(update_tau(10.0, 1e-4), 2.0, max_relative = 1e-15);
        assert_relative_eq!(update_tau(0.01, 1e-4), 0.001, max_relative = 1e-15);
        assert_relative_eq!(update_tau(1e-4, 1e-4), 1e-5, max_relative = 1e-15);
    }

    #[test]
    fn convergence_test_examples() {
        assert!(barrier_converged(0.5, 0.1, 1.0, 1.0));
        assert!(!barrier_converged(2.0, 0.0, 1.0, 1.0));
        assert!(barrier_converged(0.0, 0.0, 1e-9, 1.0));
    }

    #[test]
    fn tau_sequence_contracts_to_floor() {
        let eps_tol = 1e-4_f64;
        let mut tau = 10.0;
        let mut updates = 0;
        while tau >= eps_tol {
            tau = update_tau(tau, eps_tol);
            updates += 1;
            assert!(updates < 60, "schedule failed to contract");
        }
        assert!(tau >= eps_tol / 10.0);
    }

    /// Double integrator with quadratic cost: unconstrained solve should hit
    /// tolerance quickly and keep tau nonincreasing.
    struct DoubleIntegrator;
    impl ControlProblem<f64> for DoubleIntegrator {
        fn n_states(&self) -> usize {
            2
        }
        fn n_controls(&self) -> usize {
            1
        }
        fn horizon(&self) -> usize {
            12
        }
        fn initial_state(&self) -> DVector<f64> {
            DVector::from_vec(vec![1.0, 0.0])
        }
        fn dynamics<S: Smooth<f64>>(&self, _k: usize, x: &[S], u: &[S]) -> Vec<S> {
            vec![
                x[0].clone() + x[1].scale(0.1),
                x[1].clone() + u[0].scale(0.1),
            ]
        }
        fn stage_cost<S: Smooth<f64>>(&self, _k: usize, x: &[S], u: &[S]) -> S {
            (x[0].sq() + x[1].sq()).scale(0.5) + u[0].sq().scale(0.05)
        }
        fn terminal_cost<S: Smooth<f64>>(&self, x: &[S]) -> S {
            (x[0].sq() + x[1].sq()).scale(5.0)
        }
    }

    #[test]
    fn unconstrained_solve_reaches_tolerance() {
        let controls = vec![DVector::from_vec(vec![0.0]); 12];
        let result = solve(&DoubleIntegrator, &controls, &SolverConfig::default()).unwrap();
        assert_eq!(result.termination, Termination::ToleranceReached);
        assert!(!result.history.is_empty());
        for pair in result.history.windows(2) {
            assert!(pair[1].tau <= pair[0].tau);
        }
        assert!(result.final_tau < 1e-4);
        // Stationarity at the solution.
        let last = result.history.last().unwrap();
        assert!(last.theta == 0.0);
    }

    #[test]
    fn infeasible_equality_never_claims_tolerance() {
        // g(x, u) = 1 has no feasible point.
        struct Infeasible;
        impl ControlProblem<f64> for Infeasible {
            fn n_states(&self) -> usize {
                1
            }
            fn n_controls(&self) -> usize {
                1
            }
            fn horizon(&self) -> usize {
                3
            }
            fn initial_state(&self) -> DVector<f64> {
                DVector::from_vec(vec![0.0])
            }
            fn dynamics<S: Smooth<f64>>(&self, _k: usize, x: &[S], u: &[S]) -> Vec<S> {
                vec![x[0].clone() + u[0].clone()]
            }
            fn stage_cost<S: Smooth<f64>>(&self, _k: usize, x: &[S], u: &[S]) -> S {
                x[0].sq() + u[0].sq()
            }
            fn stage_eq<S: Smooth<f64>>(&self, _k: usize, _x: &[S], _u: &[S]) -> Vec<S> {
                vec![S::from_f64(1.0)]
            }
        }
        let controls = vec![DVector::from_vec(vec![0.0]); 3];
        let mut cfg = SolverConfig::default();
        cfg.max_outer_iters = 40;
        let result = solve(&Infeasible, &controls, &cfg).unwrap();
        assert_ne!(result.termination, Termination::ToleranceReached);
    }

    #[test]
    fn history_csv_columns() {
        let rec = IterationRecord {
            iter: 0,
            tau: 10.0,
            phi: 1.5,
            theta: 0.25,
            alpha: 1.0,
            opt_inf: 0.5,
            mu2: 0.0,
            ls_trials: 1,
            min_slack: 1.0,
            branch: AcceptanceBranch::MeritDecrease,
        };
        let mut buf = Vec::new();
        write_history_csv(&[rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("iter,tau,phi,theta,alpha,opt_inf,mu2,ls_trials\n"));
        assert_eq!(text.lines().count(), 2);
    }
}
