//! First- and second-order derivatives of problem functions at a stage point,
//! plus a finite-difference oracle used to validate them.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::problem::ControlProblem;
use crate::scalar::{real, rmax, Real, Smooth};

/// Value, Jacobian, and per-output Hessians of one vector-valued function
/// with respect to the stacked variables `z = (x, u)`.
#[derive(Debug, Clone)]
pub struct VectorDerivatives<T: Real> {
    /// Residual at the evaluation point, length `r`.
    pub value: DVector<T>,
    /// `r x d` Jacobian.
    pub jac: DMatrix<T>,
    /// One symmetric `d x d` Hessian per output.
    pub hess: Vec<DMatrix<T>>,
}

impl<T: Real> VectorDerivatives<T> {
    pub fn rows(&self) -> usize {
        self.value.len()
    }

    /// Contraction `sum_i w_i * hess_i`.
    pub fn weighted_hessian(&self, weights: &DVector<T>) -> DMatrix<T> {
        let d = self.jac.ncols();
        let mut out = DMatrix::zeros(d, d);
        for (i, h) in self.hess.iter().enumerate() {
            out += h * weights[i];
        }
        out
    }

    fn empty(d: usize) -> Self {
        VectorDerivatives {
            value: DVector::zeros(0),
            jac: DMatrix::zeros(0, d),
            hess: Vec::new(),
        }
    }

    fn is_finite(&self) -> bool {
        self.value.iter().all(|v| v.is_finite())
            && self.jac.iter().all(|v| v.is_finite())
            && self.hess.iter().all(|h| h.iter().all(|v| v.is_finite()))
    }
}

/// Value, gradient, and Hessian of a scalar function of `z`.
#[derive(Debug, Clone)]
pub struct ScalarDerivatives<T: Real> {
    pub value: T,
    pub grad: DVector<T>,
    pub hess: DMatrix<T>,
}

impl<T: Real> ScalarDerivatives<T> {
    fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|v| v.is_finite())
            && self.hess.iter().all(|v| v.is_finite())
    }
}

/// All derivatives needed by one backward-pass stage.
///
/// For a stage point the variables are `z = (x, u)` with `d = n + m`; for the
/// terminal point the control slots are empty (`d = n`) and `dynamics` is
/// absent.
#[derive(Debug, Clone)]
pub struct DerivativeBundle<T: Real> {
    pub n_states: usize,
    pub n_controls: usize,
    pub dynamics: Option<VectorDerivatives<T>>,
    pub cost: ScalarDerivatives<T>,
    pub eq: VectorDerivatives<T>,
    pub ineq: VectorDerivatives<T>,
}

impl<T: Real> DerivativeBundle<T> {
    pub fn dim(&self) -> usize {
        self.n_states + self.n_controls
    }

    pub fn f_x(&self) -> DMatrix<T> {
        let f = self.dynamics.as_ref().expect("terminal bundle has no dynamics");
        f.jac.columns(0, self.n_states).into_owned()
    }

    pub fn f_u(&self) -> DMatrix<T> {
        let f = self.dynamics.as_ref().expect("terminal bundle has no dynamics");
        f.jac.columns(self.n_states, self.n_controls).into_owned()
    }

    pub fn l_x(&self) -> DVector<T> {
        self.cost.grad.rows(0, self.n_states).into_owned()
    }

    pub fn l_u(&self) -> DVector<T> {
        self.cost.grad.rows(self.n_states, self.n_controls).into_owned()
    }

    pub fn l_xx(&self) -> DMatrix<T> {
        self.cost.hess.view((0, 0), (self.n_states, self.n_states)).into_owned()
    }

    pub fn l_xu(&self) -> DMatrix<T> {
        self.cost
            .hess
            .view((0, self.n_states), (self.n_states, self.n_controls))
            .into_owned()
    }

    pub fn l_ux(&self) -> DMatrix<T> {
        self.cost
            .hess
            .view((self.n_states, 0), (self.n_controls, self.n_states))
            .into_owned()
    }

    pub fn l_uu(&self) -> DMatrix<T> {
        self.cost
            .hess
            .view(
                (self.n_states, self.n_states),
                (self.n_controls, self.n_controls),
            )
            .into_owned()
    }

    pub fn g_x(&self) -> DMatrix<T> {
        self.eq.jac.columns(0, self.n_states).into_owned()
    }

    pub fn g_u(&self) -> DMatrix<T> {
        self.eq.jac.columns(self.n_states, self.n_controls).into_owned()
    }

    pub fn h_x(&self) -> DMatrix<T> {
        self.ineq.jac.columns(0, self.n_states).into_owned()
    }

    pub fn h_u(&self) -> DMatrix<T> {
        self.ineq.jac.columns(self.n_states, self.n_controls).into_owned()
    }
}

fn seed<T: Real>(x: &DVector<T>, u: &DVector<T>) -> (Vec<Jet<T>>, Vec<Jet<T>>) {
    let d = x.len() + u.len();
    let xj = x
        .iter()
        .enumerate()
        .map(|(i, &v)| Jet::variable(v, i, d))
        .collect();
    let uj = u
        .iter()
        .enumerate()
        .map(|(j, &v)| Jet::variable(v, x.len() + j, d))
        .collect();
    (xj, uj)
}

fn collect_vector<T: Real>(outputs: Vec<Jet<T>>, d: usize) -> VectorDerivatives<T> {
    let value = DVector::from_iterator(outputs.len(), outputs.iter().map(|j| j.value()));
    let mut jac = DMatrix::zeros(outputs.len(), d);
    let mut hess = Vec::with_capacity(outputs.len());
    for (i, jet) in outputs.iter().enumerate() {
        jac.set_row(i, &jet.gradient(d).transpose());
        hess.push(jet.hessian(d));
    }
    VectorDerivatives { value, jac, hess }
}

fn collect_scalar<T: Real>(output: Jet<T>, d: usize) -> ScalarDerivatives<T> {
    ScalarDerivatives {
        value: output.value(),
        grad: output.gradient(d),
        hess: output.hessian(d),
    }
}

/// Exact derivatives of dynamics, cost, and constraints at a stage point.
pub fn stage_derivative_bundle<T: Real, P: ControlProblem<T>>(
    problem: &P,
    k: usize,
    x: &DVector<T>,
    u: &DVector<T>,
) -> Result<DerivativeBundle<T>> {
    let d = x.len() + u.len();
    let (xj, uj) = seed(x, u);
    let bundle = DerivativeBundle {
        n_states: x.len(),
        n_controls: u.len(),
        dynamics: Some(collect_vector(problem.dynamics(k, &xj, &uj), d)),
        cost: collect_scalar(problem.stage_cost(k, &xj, &uj), d),
        eq: collect_vector(problem.stage_eq(k, &xj, &uj), d),
        ineq: collect_vector(problem.stage_ineq(k, &xj, &uj), d),
    };
    check_finite(&bundle, k)?;
    Ok(bundle)
}

/// Exact derivatives of the terminal cost and terminal constraints.
pub fn terminal_derivative_bundle<T: Real, P: ControlProblem<T>>(
    problem: &P,
    x: &DVector<T>,
) -> Result<DerivativeBundle<T>> {
    let d = x.len();
    let xj: Vec<Jet<T>> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| Jet::variable(v, i, d))
        .collect();
    let bundle = DerivativeBundle {
        n_states: d,
        n_controls: 0,
        dynamics: None,
        cost: collect_scalar(problem.terminal_cost(&xj), d),
        eq: collect_vector(problem.terminal_eq(&xj), d),
        ineq: collect_vector(problem.terminal_ineq(&xj), d),
    };
    check_finite(&bundle, problem.horizon())?;
    Ok(bundle)
}

fn check_finite<T: Real>(bundle: &DerivativeBundle<T>, stage: usize) -> Result<()> {
    let bad = |function: &'static str| Error::NonFiniteDerivative { function, stage };
    if let Some(f) = &bundle.dynamics {
        if !f.is_finite() {
            return Err(bad("dynamics"));
        }
    }
    if !bundle.cost.is_finite() {
        return Err(bad("cost"));
    }
    if !bundle.eq.is_finite() {
        return Err(bad("equality constraints"));
    }
    if !bundle.ineq.is_finite() {
        return Err(bad("inequality constraints"));
    }
    Ok(())
}

/// Central-difference Jacobian, column `i` from `(f(p + s e_i) - f(p - s e_i)) / 2s`.
pub fn fd_jacobian<T: Real, F>(f: F, point: &DVector<T>, step: T) -> DMatrix<T>
where
    F: Fn(&DVector<T>) -> DVector<T>,
{
    let rows = f(point).len();
    let d = point.len();
    let mut jac = DMatrix::zeros(rows, d);
    let two = real::<T>(2.0);
    for i in 0..d {
        let mut hi = point.clone();
        hi[i] += step;
        let mut lo = point.clone();
        lo[i] -= step;
        let col = (f(&hi) - f(&lo)) / (two * step);
        jac.set_column(i, &col);
    }
    jac
}

/// Second-order central-difference Hessian of a scalar function, symmetrized
/// as `(H + H^T) / 2`.
pub fn fd_hessian<T: Real, F>(f: F, point: &DVector<T>, step: T) -> DMatrix<T>
where
    F: Fn(&DVector<T>) -> T,
{
    let d = point.len();
    let mut hess = DMatrix::zeros(d, d);
    let f0 = f(point);
    let two = real::<T>(2.0);
    let four = real::<T>(4.0);
    let at = |offsets: &[(usize, T)]| {
        let mut p = point.clone();
        for &(i, dv) in offsets {
            p[i] += dv;
        }
        f(&p)
    };
    for i in 0..d {
        let fp = at(&[(i, step)]);
        let fm = at(&[(i, -step)]);
        hess[(i, i)] = (fp - two * f0 + fm) / (step * step);
        for j in i + 1..d {
            let pp = at(&[(i, step), (j, step)]);
            let pm = at(&[(i, step), (j, -step)]);
            let mp = at(&[(i, -step), (j, step)]);
            let mm = at(&[(i, -step), (j, -step)]);
            let v = (pp - pm - mp + mm) / (four * step * step);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let sym = (&hess + hess.transpose()) / two;
    sym
}

/// Steps and tolerances for [`check_derivatives`].
#[derive(Debug, Clone, Copy)]
pub struct CheckOptions<T: Real> {
    pub step_jacobian: T,
    pub step_hessian: T,
    pub tol_first: T,
    pub tol_second: T,
}

impl<T: Real> Default for CheckOptions<T> {
    fn default() -> Self {
        CheckOptions {
            step_jacobian: real(1e-5),
            step_hessian: real(1e-3),
            tol_first: real(1e-5),
            tol_second: real(1e-3),
        }
    }
}

/// One line of a derivative-check report: the worst relative error observed
/// for a function over the checked stages, and where it occurred.
#[derive(Debug, Clone)]
pub struct DerivativeCheckEntry {
    pub function: String,
    pub stage: usize,
    pub max_rel_err: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Default)]
pub struct DerivativeReport {
    pub entries: Vec<DerivativeCheckEntry>,
}

impl DerivativeReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    /// Aligned text table, one row per function.
    pub fn text_table(&self) -> String {
        let width = self
            .entries
            .iter()
            .map(|e| e.function.len())
            .chain(std::iter::once("function".len()))
            .max()
            .unwrap_or(8);
        let mut out = format!("{:width$}  {:>5}  {:>12}  pass\n", "function", "stage", "max_rel_err");
        for e in &self.entries {
            out.push_str(&format!(
                "{:width$}  {:>5}  {:>12.3e}  {}\n",
                e.function,
                e.stage,
                e.max_rel_err,
                if e.pass { "yes" } else { "NO" }
            ));
        }
        out
    }

    /// JSON array mirroring the text table.
    pub fn json(&self) -> String {
        let rows: Vec<String> = self
            .entries
            .iter()
            .map(|e| {
                format!(
                    "{{\"function\":\"{}\",\"stage\":{},\"max_rel_err\":{:e},\"pass\":{}}}",
                    e.function, e.stage, e.max_rel_err, e.pass
                )
            })
            .collect();
        format!("[\n  {}\n]\n", rows.join(",\n  "))
    }

    fn record<T: Real>(&mut self, function: &str, stage: usize, err: T, tol: T) {
        let err_f = err.to_f64().unwrap_or(f64::INFINITY);
        match self.entries.iter_mut().find(|e| e.function == function) {
            Some(e) => {
                if err_f > e.max_rel_err {
                    e.max_rel_err = err_f;
                    e.stage = stage;
                    e.pass = err <= tol;
                }
            }
            None => self.entries.push(DerivativeCheckEntry {
                function: function.to_string(),
                stage,
                max_rel_err: err_f,
                pass: err <= tol,
            }),
        }
    }
}

fn rel_err_mat<T: Real>(analytic: &DMatrix<T>, reference: &DMatrix<T>) -> T {
    let mut worst = T::zero();
    for (a, r) in analytic.iter().zip(reference.iter()) {
        let denom = rmax(T::one(), a.abs());
        worst = rmax(worst, (*a - *r).abs() / denom);
    }
    worst
}

/// Compare one analytic bundle against finite differences of the problem
/// functions at the same point. `stage` of `None` means the terminal point.
pub fn check_stage_bundle<T: Real, P: ControlProblem<T>>(
    problem: &P,
    stage: Option<usize>,
    x: &DVector<T>,
    u: &DVector<T>,
    bundle: &DerivativeBundle<T>,
    opts: &CheckOptions<T>,
    report: &mut DerivativeReport,
) {
    let n = x.len();
    let split = |z: &DVector<T>| -> (Vec<T>, Vec<T>) {
        (z.as_slice()[..n].to_vec(), z.as_slice()[n..].to_vec())
    };
    let z0 = DVector::from_iterator(n + u.len(), x.iter().chain(u.iter()).copied());
    let stage_idx = stage.unwrap_or_else(|| problem.horizon());

    struct Target<'a, T: Real> {
        name: &'static str,
        eval: Box<dyn Fn(&DVector<T>) -> DVector<T> + 'a>,
        derivs: &'a VectorDerivatives<T>,
    }
    let mut targets: Vec<Target<T>> = Vec::new();
    match stage {
        Some(k) => {
            if let Some(f) = &bundle.dynamics {
                targets.push(Target {
                    name: "dynamics",
                    eval: Box::new(move |z| {
                        let (xs, us) = split(z);
                        DVector::from_vec(problem.dynamics::<T>(k, &xs, &us))
                    }),
                    derivs: f,
                });
            }
            targets.push(Target {
                name: "stage_eq",
                eval: Box::new(move |z| {
                    let (xs, us) = split(z);
                    DVector::from_vec(problem.stage_eq::<T>(k, &xs, &us))
                }),
                derivs: &bundle.eq,
            });
            targets.push(Target {
                name: "stage_ineq",
                eval: Box::new(move |z| {
                    let (xs, us) = split(z);
                    DVector::from_vec(problem.stage_ineq::<T>(k, &xs, &us))
                }),
                derivs: &bundle.ineq,
            });
        }
        None => {
            targets.push(Target {
                name: "terminal_eq",
                eval: Box::new(|z| DVector::from_vec(problem.terminal_eq::<T>(z.as_slice()))),
                derivs: &bundle.eq,
            });
            targets.push(Target {
                name: "terminal_ineq",
                eval: Box::new(|z| DVector::from_vec(problem.terminal_ineq::<T>(z.as_slice()))),
                derivs: &bundle.ineq,
            });
        }
    }

    for t in &targets {
        if t.derivs.rows() == 0 {
            continue;
        }
        let jac_fd = fd_jacobian(&t.eval, &z0, opts.step_jacobian);
        report.record(
            &format!("{}.jacobian", t.name),
            stage_idx,
            rel_err_mat(&t.derivs.jac, &jac_fd),
            opts.tol_first,
        );
        let mut worst = T::zero();
        for row in 0..t.derivs.rows() {
            let hess_fd = fd_hessian(|z| t.eval.as_ref()(z)[row], &z0, opts.step_hessian);
            worst = rmax(worst, rel_err_mat(&t.derivs.hess[row], &hess_fd));
        }
        report.record(
            &format!("{}.hessian", t.name),
            stage_idx,
            worst,
            opts.tol_second,
        );
    }

    // Cost gradient and Hessian.
    let (name, cost_eval): (&str, Box<dyn Fn(&DVector<T>) -> T>) = match stage {
        Some(k) => (
            "stage_cost",
            Box::new(move |z: &DVector<T>| {
                let (xs, us) = split(z);
                problem.stage_cost::<T>(k, &xs, &us)
            }),
        ),
        None => (
            "terminal_cost",
            Box::new(|z: &DVector<T>| problem.terminal_cost::<T>(z.as_slice())),
        ),
    };
    let grad_fd = fd_jacobian(
        |z| DVector::from_vec(vec![cost_eval(z)]),
        &z0,
        opts.step_jacobian,
    );
    report.record(
        &format!("{name}.gradient"),
        stage_idx,
        rel_err_mat(&DMatrix::from_rows(&[bundle.cost.grad.transpose()]), &grad_fd),
        opts.tol_first,
    );
    let hess_fd = fd_hessian(&cost_eval, &z0, opts.step_hessian);
    report.record(
        &format!("{name}.hessian"),
        stage_idx,
        rel_err_mat(&bundle.cost.hess, &hess_fd),
        opts.tol_second,
    );
}

/// Compare analytic bundles against finite differences along a trajectory.
pub fn check_derivatives_with<T: Real, P: ControlProblem<T>>(
    problem: &P,
    states: &[DVector<T>],
    controls: &[DVector<T>],
    opts: &CheckOptions<T>,
) -> Result<DerivativeReport> {
    let mut report = DerivativeReport::default();
    for (k, u) in controls.iter().enumerate() {
        let bundle = stage_derivative_bundle(problem, k, &states[k], u)?;
        check_stage_bundle(problem, Some(k), &states[k], u, &bundle, opts, &mut report);
    }
    let xn = &states[controls.len()];
    let bundle = terminal_derivative_bundle(problem, xn)?;
    check_stage_bundle(
        problem,
        None,
        xn,
        &DVector::zeros(0),
        &bundle,
        opts,
        &mut report,
    );
    Ok(report)
}

/// [`check_derivatives_with`] using default steps and `tol` for both orders.
pub fn check_derivatives<T: Real, P: ControlProblem<T>>(
    problem: &P,
    states: &[DVector<T>],
    controls: &[DVector<T>],
    tol: T,
) -> Result<DerivativeReport> {
    let opts = CheckOptions {
        tol_first: tol,
        tol_second: tol,
        ..CheckOptions::default()
    };
    check_derivatives_with(problem, states, controls, &opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    struct Affine;
    impl ControlProblem<f64> for Affine {
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
            DVector::from_vec(vec![0.0])
        }
        fn dynamics<S: Smooth<f64>>(&self, _k: usize, x: &[S], u: &[S]) -> Vec<S> {
            vec![x[0].clone() + u[0].clone()]
        }
        fn stage_cost<S: Smooth<f64>>(&self, _k: usize, x: &[S], u: &[S]) -> S {
            (x[0].sq() + x[0].sq() + u[0].sq()).scale(0.025)
        }
    }

    #[test]
    fn linear_dynamics_have_unit_jacobian_zero_hessian() {
        let x = DVector::from_vec(vec![0.4]);
        let u = DVector::from_vec(vec![-0.2]);
        let b = stage_derivative_bundle(&Affine, 0, &x, &u).unwrap();
        assert_eq!(b.f_x()[(0, 0)], 1.0);
        assert_eq!(b.f_u()[(0, 0)], 1.0);
        assert!(b.dynamics.as_ref().unwrap().hess[0].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn quadratic_cost_blocks() {
        // l = 0.025 (x0^2 + x0^2 + u^2): l_xx = 0.1, l_uu = 0.05, l_xu = 0.
        let x = DVector::from_vec(vec![1.3]);
        let u = DVector::from_vec(vec![0.7]);
        let b = stage_derivative_bundle(&Affine, 0, &x, &u).unwrap();
        assert_relative_eq!(b.l_xx()[(0, 0)], 0.1, max_relative = 1e-14);
        assert_relative_eq!(b.l_uu()[(0, 0)], 0.05, max_relative = 1e-14);
        assert_eq!(b.l_xu()[(0, 0)], 0.0);
        assert_eq!(b.l_xu(), b.l_ux().transpose());
    }

    #[test]
    fn fd_jacobian_identity_exact() {
        // At the origin the stepped points are exact, so the quotient is too.
        let p = DVector::from_vec(vec![0.0, 0.0, 0.0]);
        let jac = fd_jacobian(|z| z.clone(), &p, 1e-5);
        assert_eq!(jac, DMatrix::<f64>::identity(3, 3));

        let p = DVector::from_vec(vec![0.3, -1.2, 2.0]);
        let jac = fd_jacobian(|z| z.clone(), &p, 1e-5);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_relative_eq!(jac[(i, j)], expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn fd_jacobian_square_slope() {
        let p = DVector::from_vec(vec![3.0]);
        let jac = fd_jacobian(|z| DVector::from_vec(vec![z[0] * z[0]]), &p, 1e-5);
        assert_relative_eq!(jac[(0, 0)], 6.0, epsilon = 1e-8);
    }

    #[test]
    fn fd_jacobian_sin_at_zero() {
        let p = DVector::from_vec(vec![0.0]);
        let jac = fd_jacobian(|z| DVector::from_vec(vec![z[0].sin()]), &p, 1e-5);
        assert_relative_eq!(jac[(0, 0)], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn fd_hessian_of_quadratics() {
        let p = DVector::from_vec(vec![0.5, -0.7]);
        let hess = fd_hessian(|z| z.dot(z), &p, 1e-3);
        assert_relative_eq!(hess[(0, 0)], 2.0, epsilon = 1e-6);
        assert_relative_eq!(hess[(1, 1)], 2.0, epsilon = 1e-6);
        assert_relative_eq!(hess[(0, 1)], 0.0, epsilon = 1e-6);

        let affine = fd_hessian(|z| 3.0 * z[0] - z[1] + 2.0, &p, 1e-3);
        assert!(affine.iter().all(|&v: &f64| v.abs() < 1e-6));

        // 50 (t - 390)^2 in a single temperature variable.
        let t = DVector::from_vec(vec![350.0]);
        let hess = fd_hessian(|z| 50.0 * (z[0] - 390.0) * (z[0] - 390.0), &t, 1e-3);
        assert_relative_eq!(hess[(0, 0)], 100.0, epsilon = 1e-4);
    }

    #[test]
    fn report_passes_on_smooth_problem() {
        let states = vec![
            DVector::from_vec(vec![0.4]),
            DVector::from_vec(vec![0.2]),
        ];
        let controls = vec![DVector::from_vec(vec![-0.2])];
        let report = check_derivatives(&Affine, &states, &controls, 1e-4).unwrap();
        assert!(report.passed(), "{}", report.text_table());
        assert!(report.entries.iter().any(|e| e.function == "dynamics.jacobian"));
    }

    #[test]
    fn corrupted_jacobian_is_flagged() {
        let x = DVector::from_vec(vec![0.4]);
        let u = DVector::from_vec(vec![-0.2]);
        let mut bundle = stage_derivative_bundle(&Affine, 0, &x, &u).unwrap();
        bundle.dynamics.as_mut().unwrap().jac[(0, 0)] += 0.1;
        let mut report = DerivativeReport::default();
        check_stage_bundle(
            &Affine,
            Some(0),
            &x,
            &u,
            &bundle,
            &CheckOptions::default(),
            &mut report,
        );
        let entry = report
            .entries
            .iter()
            .find(|e| e.function == "dynamics.jacobian")
            .unwrap();
        assert!(!entry.pass);
        assert!(report.entries.iter().filter(|e| e.function != "dynamics.jacobian").all(|e| e.pass));
    }

    #[test]
    fn json_mirror_has_all_fields() {
        let states = vec![DVector::from_vec(vec![0.1]), DVector::from_vec(vec![0.2])];
        let controls = vec![DVector::from_vec(vec![0.1])];
        let report = check_derivatives(&Affine, &states, &controls, 1e-4).unwrap();
        let json = report.json();
        assert!(json.contains("\"function\""));
        assert!(json.contains("\"stage\""));
        assert!(json.contains("\"max_rel_err\""));
        assert!(json.contains("\"pass\""));
    }
}
