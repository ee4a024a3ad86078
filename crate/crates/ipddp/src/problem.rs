//! Problem definition interface and solver configuration.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::scalar::{real, Real, Smooth};

/// A discrete-time optimal control problem with stagewise equality and
/// inequality constraints.
///
/// All functions are evaluated generically so the solver can run them both on
/// plain scalars and on derivative-carrying jets. Implementations must be
/// pure: the same inputs always give the same outputs, and the length of each
/// returned constraint vector is fixed per stage.
///
/// Inequalities use the convention `h(x, u) <= 0` feasible.
pub trait ControlProblem<T: Real> {
    fn n_states(&self) -> usize;
    fn n_controls(&self) -> usize;

    /// Number of control stages `N`; states run `0..=N`.
    fn horizon(&self) -> usize;

    fn initial_state(&self) -> DVector<T>;

    /// State transition `x_{k+1} = f(k, x_k, u_k)`.
    fn dynamics<S: Smooth<T>>(&self, k: usize, x: &[S], u: &[S]) -> Vec<S>;

    fn stage_cost<S: Smooth<T>>(&self, k: usize, x: &[S], u: &[S]) -> S;

    fn terminal_cost<S: Smooth<T>>(&self, x: &[S]) -> S {
        let _ = x;
        S::from_f64(0.0)
    }

    /// Stage equality constraints `g_k(x, u) = 0`; empty by default.
    fn stage_eq<S: Smooth<T>>(&self, k: usize, x: &[S], u: &[S]) -> Vec<S> {
        let _ = (k, x, u);
        Vec::new()
    }

    /// Stage inequality constraints `h_k(x, u) <= 0`; empty by default.
    fn stage_ineq<S: Smooth<T>>(&self, k: usize, x: &[S], u: &[S]) -> Vec<S> {
        let _ = (k, x, u);
        Vec::new()
    }

    /// Terminal equality constraints `g_N(x) = 0`; empty by default.
    fn terminal_eq<S: Smooth<T>>(&self, x: &[S]) -> Vec<S> {
        let _ = x;
        Vec::new()
    }

    /// Terminal inequality constraints `h_N(x) <= 0`; empty by default.
    fn terminal_ineq<S: Smooth<T>>(&self, x: &[S]) -> Vec<S> {
        let _ = x;
        Vec::new()
    }
}

/// Evaluate the dynamics on plain scalars.
pub fn eval_dynamics<T: Real, P: ControlProblem<T>>(
    problem: &P,
    k: usize,
    x: &DVector<T>,
    u: &DVector<T>,
) -> DVector<T> {
    DVector::from_vec(problem.dynamics::<T>(k, x.as_slice(), u.as_slice()))
}

pub fn eval_stage_cost<T: Real, P: ControlProblem<T>>(
    problem: &P,
    k: usize,
    x: &DVector<T>,
    u: &DVector<T>,
) -> T {
    problem.stage_cost::<T>(k, x.as_slice(), u.as_slice())
}

pub fn eval_terminal_cost<T: Real, P: ControlProblem<T>>(problem: &P, x: &DVector<T>) -> T {
    problem.terminal_cost::<T>(x.as_slice())
}

pub fn eval_stage_eq<T: Real, P: ControlProblem<T>>(
    problem: &P,
    k: usize,
    x: &DVector<T>,
    u: &DVector<T>,
) -> DVector<T> {
    DVector::from_vec(problem.stage_eq::<T>(k, x.as_slice(), u.as_slice()))
}

pub fn eval_stage_ineq<T: Real, P: ControlProblem<T>>(
    problem: &P,
    k: usize,
    x: &DVector<T>,
    u: &DVector<T>,
) -> DVector<T> {
    DVector::from_vec(problem.stage_ineq::<T>(k, x.as_slice(), u.as_slice()))
}

pub fn eval_terminal_eq<T: Real, P: ControlProblem<T>>(problem: &P, x: &DVector<T>) -> DVector<T> {
    DVector::from_vec(problem.terminal_eq::<T>(x.as_slice()))
}

pub fn eval_terminal_ineq<T: Real, P: ControlProblem<T>>(
    problem: &P,
    x: &DVector<T>,
) -> DVector<T> {
    DVector::from_vec(problem.terminal_ineq::<T>(x.as_slice()))
}

/// Tolerances, regularization constants, and iteration budgets.
///
/// Fields are public for direct construction; [`SolverConfig::validate`] is
/// called on entry to the solver and rejects out-of-range values.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig<T: Real> {
    /// Overall tolerance the barrier parameter is driven below.
    pub eps_tol: T,
    /// Sufficient-decrease constant of the line-search acceptance test, in (0,1).
    pub eps_theta: T,
    /// Fraction-to-boundary constant, in (0,1).
    pub ftb_eps: T,
    /// Scale on the barrier parameter in the subproblem convergence test.
    pub eps_tau: T,
    /// Global curvature regularization applied through the dynamics Jacobians.
    pub mu1: T,
    /// First rung of the local regularization ladder.
    pub mu2_init: T,
    /// Minimum eigenvalue the regularized curvature block must reach.
    pub eig_tol: T,
    /// Multiplier-block regularization as a function of the barrier parameter.
    pub lambda_reg_fn: fn(T) -> T,
    /// Step-halving factor of the backtracking line search, in (0,1).
    pub alpha_backtrack: T,
    pub max_outer_iters: usize,
    pub max_line_search_iters: usize,
    /// Scale only the feedback term by the step size in the control update,
    /// reproducing the printed update formula instead of the conventional
    /// feedforward scaling.
    pub literal_eq26_controls: bool,
    /// Use the printed sign of the multiplier update instead of the
    /// Newton-step sign. The printed sign negates the dual step and diverges
    /// on equality-constrained problems; it is kept only for comparison.
    pub literal_multiplier_sign: bool,
}

fn identity_reg<T: Real>(tau: T) -> T {
    tau
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        SolverConfig {
            eps_tol: real(1e-4),
            eps_theta: real(1e-2),
            ftb_eps: real(0.995),
            eps_tau: real(1.0),
            mu1: T::zero(),
            mu2_init: real(1e-6),
            eig_tol: real(1e-6),
            lambda_reg_fn: identity_reg::<T>,
            alpha_backtrack: real(0.5),
            max_outer_iters: 500,
            max_line_search_iters: 30,
            literal_eq26_controls: false,
            literal_multiplier_sign: false,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        let one = T::one();
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.eps_tol > zero) {
            return fail("eps_tol must be > 0");
        }
        if !(self.eps_theta > zero && self.eps_theta < one) {
            return fail("eps_theta must be in (0,1)");
        }
        if !(self.ftb_eps > zero && self.ftb_eps < one) {
            return fail("ftb_eps must be in (0,1)");
        }
        if !(self.eps_tau > zero) {
            return fail("eps_tau must be > 0");
        }
        if !(self.mu1 >= zero) {
            return fail("mu1 must be >= 0");
        }
        if !(self.mu2_init > zero) {
            return fail("mu2_init must be > 0");
        }
        if !(self.eig_tol > zero) {
            return fail("eig_tol must be > 0");
        }
        if !(self.alpha_backtrack > zero && self.alpha_backtrack < one) {
            return fail("alpha_backtrack must be in (0,1)");
        }
        if self.max_outer_iters == 0 || self.max_line_search_iters == 0 {
            return fail("iteration budgets must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        SolverConfig::<f64>::default().validate().unwrap();
        SolverConfig::<f32>::default().validate().unwrap();
    }

    #[test]
    fn out_of_range_fields_rejected() {
        let mut cfg = SolverConfig::<f64>::default();
        cfg.ftb_eps = 1.0;
        assert!(cfg.validate().is_err());

        let mut cfg = SolverConfig::<f64>::default();
        cfg.eps_tol = 0.0;
        assert!(cfg.validate().is_err());

        let mut cfg = SolverConfig::<f64>::default();
        cfg.mu1 = -1.0;
        assert!(cfg.validate().is_err());
    }
}
