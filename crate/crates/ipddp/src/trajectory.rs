//! Trajectory container, merit and violation measures, and variable
//! initialization.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problem::{
    eval_stage_cost, eval_stage_eq, eval_stage_ineq, eval_terminal_cost, eval_terminal_eq,
    eval_terminal_ineq, ControlProblem,
};
use crate::scalar::{real, rmax, Real};

/// State, control, slack, and multiplier sequences over one horizon.
///
/// Slack and multiplier vectors are ragged: their length at stage `k` matches
/// the number of inequality and equality constraints there, which is zero at
/// most stages for the benchmark problems.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    /// `N + 1` states of length `n`.
    pub states: Vec<DVector<T>>,
    /// `N` controls of length `m`.
    pub controls: Vec<DVector<T>>,
    /// `N + 1` slack vectors, one entry per inequality constraint.
    pub slacks: Vec<DVector<T>>,
    /// `N + 1` multiplier vectors, one entry per equality constraint.
    pub multipliers: Vec<DVector<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    /// Smallest slack entry, or `+inf` when there are no slacks.
    pub fn min_slack(&self) -> T {
        let mut m = T::max_value().unwrap_or_else(T::one);
        for s in &self.slacks {
            for &v in s.iter() {
                if v < m {
                    m = v;
                }
            }
        }
        m
    }

    /// True when every state, control, slack, and multiplier entry is finite.
    pub fn is_finite(&self) -> bool {
        let all = |vs: &Vec<DVector<T>>| vs.iter().all(|v| v.iter().all(|x| x.is_finite()));
        all(&self.states) && all(&self.controls) && all(&self.slacks) && all(&self.multipliers)
    }

    /// Write the stage/state/control table as CSV with 17 significant digits.
    ///
    /// Columns are `stage,x0..x{n-1},u0..u{m-1}`; control fields are blank on
    /// the terminal row. The format round-trips `f64` exactly.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let n = self.states[0].len();
        let m = if self.controls.is_empty() {
            0
        } else {
            self.controls[0].len()
        };
        let mut header = String::from("stage");
        for i in 0..n {
            header.push_str(&format!(",x{i}"));
        }
        for j in 0..m {
            header.push_str(&format!(",u{j}"));
        }
        writeln!(w, "{header}")?;
        for (k, x) in self.states.iter().enumerate() {
            let mut row = format!("{k}");
            for v in x.iter() {
                row.push_str(&format!(",{v:.16e}"));
            }
            if k < self.controls.len() {
                for v in self.controls[k].iter() {
                    row.push_str(&format!(",{v:.16e}"));
                }
            } else {
                for _ in 0..m {
                    row.push(',');
                }
            }
            writeln!(w, "{row}")?;
        }
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file))
            .map_err(|source| Error::Io {
                path: path.display().to_string(),
                source,
            })
    }

    /// Read back states and controls written by [`Trajectory::write_csv`].
    pub fn read_csv_path(path: &Path) -> Result<(Vec<DVector<T>>, Vec<DVector<T>>)> {
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        let parse_err = |message: String| Error::Parse {
            path: path.display().to_string(),
            message,
        };
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| parse_err("empty file".into()))?
            .map_err(|e| parse_err(e.to_string()))?;
        let cols: Vec<&str> = header.split(',').collect();
        let n = cols.iter().filter(|c| c.starts_with('x')).count();
        let m = cols.iter().filter(|c| c.starts_with('u')).count();
        let mut states = Vec::new();
        let mut controls = Vec::new();
        for line in lines {
            let line = line.map_err(|e| parse_err(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 1 + n + m {
                return Err(parse_err(format!("row has {} fields", fields.len())));
            }
            let num = |s: &str| -> Result<T> {
                let v: f64 = s
                    .parse()
                    .map_err(|e| parse_err(format!("bad float {s:?}: {e}")))?;
                Ok(real(v))
            };
            let x: Vec<T> = fields[1..1 + n]
                .iter()
                .map(|s| num(s))
                .collect::<Result<_>>()?;
            states.push(DVector::from_vec(x));
            if !fields[1 + n..].iter().all(|f| f.is_empty()) {
                let u: Vec<T> = fields[1 + n..]
                    .iter()
                    .map(|s| num(s))
                    .collect::<Result<_>>()?;
                controls.push(DVector::from_vec(u));
            }
        }
        Ok((states, controls))
    }
}

/// Simulate the dynamics forward from the initial state.
pub fn rollout<T: Real, P: ControlProblem<T>>(
    problem: &P,
    controls: &[DVector<T>],
) -> Result<Vec<DVector<T>>> {
    let n = problem.horizon();
    if controls.len() != n {
        return Err(Error::DimensionMismatch {
            what: "control sequence length",
            expected: n,
            got: controls.len(),
        });
    }
    let mut states = Vec::with_capacity(n + 1);
    states.push(problem.initial_state());
    for (k, u) in controls.iter().enumerate() {
        let next = crate::problem::eval_dynamics(problem, k, &states[k], u);
        if !next.iter().all(|v| v.is_finite()) {
            return Err(Error::RolloutDiverged { stage: k + 1 });
        }
        states.push(next);
    }
    Ok(states)
}

/// Plain objective: running costs plus terminal cost.
pub fn total_cost<T: Real, P: ControlProblem<T>>(
    states: &[DVector<T>],
    controls: &[DVector<T>],
    problem: &P,
) -> T {
    let mut total = T::zero();
    for (k, u) in controls.iter().enumerate() {
        total += eval_stage_cost(problem, k, &states[k], u);
    }
    total + eval_terminal_cost(problem, &states[controls.len()])
}

/// Barrier merit function: objective minus `tau` times the slack log terms.
///
/// Stages without inequality constraints contribute no log term. Fails if any
/// slack entry is not strictly positive.
pub fn merit_phi<T: Real, P: ControlProblem<T>>(
    traj: &Trajectory<T>,
    problem: &P,
    tau: T,
) -> Result<T> {
    let mut phi = total_cost(&traj.states, &traj.controls, problem);
    for (k, s) in traj.slacks.iter().enumerate() {
        for &v in s.iter() {
            if !(v > T::zero()) {
                return Err(Error::NonpositiveSlack { stage: k });
            }
            phi -= tau * v.ln();
        }
    }
    Ok(phi)
}

/// Total constraint violation: the l1 norm of every equality residual and
/// every slack-shifted inequality residual.
pub fn violation_theta<T: Real, P: ControlProblem<T>>(
    traj: &Trajectory<T>,
    problem: &P,
) -> Result<T> {
    let n = traj.horizon();
    let mut theta = T::zero();
    let mut add = |g: &DVector<T>, hs: Option<(&DVector<T>, &DVector<T>)>| -> Result<()> {
        for &v in g.iter() {
            theta += v.abs();
        }
        if let Some((h, s)) = hs {
            if h.len() != s.len() {
                return Err(Error::DimensionMismatch {
                    what: "slack vector length",
                    expected: h.len(),
                    got: s.len(),
                });
            }
            for (&hv, &sv) in h.iter().zip(s.iter()) {
                theta += (hv + sv).abs();
            }
        }
        Ok(())
    };
    for k in 0..n {
        let (x, u) = (&traj.states[k], &traj.controls[k]);
        let g = eval_stage_eq(problem, k, x, u);
        let h = eval_stage_ineq(problem, k, x, u);
        add(&g, Some((&h, &traj.slacks[k])))?;
    }
    let xn = &traj.states[n];
    let g = eval_terminal_eq(problem, xn);
    let h = eval_terminal_ineq(problem, xn);
    add(&g, Some((&h, &traj.slacks[n])))?;
    Ok(theta)
}

/// Slack, multiplier, and barrier-parameter initialization from the initial
/// rollout: slacks are the elementwise max of the inequality residual and
/// one, multipliers are ones, and the barrier parameter starts at the mean
/// stage cost floored at ten.
pub fn initialize_variables<T: Real, P: ControlProblem<T>>(
    problem: &P,
    states: &[DVector<T>],
    controls: &[DVector<T>],
) -> (Vec<DVector<T>>, Vec<DVector<T>>, T) {
    let n = controls.len();
    let one = T::one();
    let mut slacks = Vec::with_capacity(n + 1);
    let mut multipliers = Vec::with_capacity(n + 1);
    for k in 0..n {
        let h = eval_stage_ineq(problem, k, &states[k], &controls[k]);
        slacks.push(h.map(|v| rmax(v, one)));
        let g = eval_stage_eq(problem, k, &states[k], &controls[k]);
        multipliers.push(DVector::from_element(g.len(), one));
    }
    let h = eval_terminal_ineq(problem, &states[n]);
    slacks.push(h.map(|v| rmax(v, one)));
    let g = eval_terminal_eq(problem, &states[n]);
    multipliers.push(DVector::from_element(g.len(), one));

    let cost = total_cost(states, controls, problem);
    let tau0 = rmax(cost / real::<T>(n as f64), real(10.0));
    (slacks, multipliers, tau0)
}
