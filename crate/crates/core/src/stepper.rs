//! Time march for the heat equation with a direct or Robbins-Monro per-step solve.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::cn::{assemble_cn, CnSystem, Grid, HeatProblem};
use crate::error::{check_len, Error, Result};
use crate::rm::{rm_solve, NoiseModel, RmConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Direct,
    Rm,
}

/// Per-step Robbins-Monro settings. Step `m -> m+1` is warm-started from
/// level `m` and draws its noise from stream `m` under `seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RmStepConfig {
    pub iters: usize,
    pub gain: f64,
    pub seed: u64,
}

/// Nodal values `u[m][n]`, `m = 0..=M`, `n = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub values: Vec<Vec<f64>>,
    pub grid: Grid,
}

impl Field {
    pub fn level(&self, m: usize) -> &[f64] {
        &self.values[m]
    }

    pub fn interior(&self, m: usize) -> &[f64] {
        let row = &self.values[m];
        &row[1..row.len() - 1]
    }

    pub fn final_level(&self) -> &[f64] {
        self.values.last().expect("field has at least one level")
    }

    /// Max-norm error against `exact(x, t)` over all nodes of the final level.
    pub fn max_error_at_end(&self, exact: impl Fn(f64, f64) -> f64) -> f64 {
        let t = self.grid.t(self.grid.steps);
        self.final_level()
            .iter()
            .enumerate()
            .map(|(n, &u)| (u - exact(self.grid.x(n), t)).abs())
            .fold(0.0, f64::max)
    }

    /// Largest nodal difference against another field on the same grid.
    pub fn max_difference(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn value_range(&self) -> (f64, f64) {
        self.values
            .iter()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Largest per-step residual `|A u[m+1] - (B u[m] + w[m] - r[m+1])|_2`.
    pub fn max_step_residual(&self, problem: &HeatProblem, sys: &CnSystem) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for m in 0..self.grid.steps {
            let rhs = sys.build_rhs(problem, &self.grid, self.interior(m), m)?;
            let lhs = sys.implicit.matvec(self.interior(m + 1))?;
            let r = lhs.iter().zip(&rhs).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            worst = worst.max(r);
        }
        Ok(worst)
    }
}

/// March `M` Crank-Nicolson steps from `u(x, 0) = f(x)`.
///
/// `noise` defaults to zero noise and is only consulted by the RM solver.
pub fn solve_heat(
    problem: &HeatProblem,
    grid: &Grid,
    solver: SolverKind,
    rm: Option<&RmStepConfig>,
    noise: Option<&NoiseModel>,
) -> Result<Field> {
    let sys = assemble_cn(grid)?;
    let n_nodes = grid.intervals + 1;
    let interior = grid.interior();

    let rm = match solver {
        SolverKind::Direct => None,
        SolverKind::Rm => Some(
            rm.ok_or_else(|| Error::InvalidInput("rm solver requested without an rm configuration".into()))?,
        ),
    };
    let zero = NoiseModel::zero(interior);
    let noise = noise.unwrap_or(&zero);
    if rm.is_some() {
        check_len(interior, noise.dim())?;
    }

    let boundary_row = |m: usize, interior_vals: &[f64]| {
        let t = grid.t(m);
        let mut row = Vec::with_capacity(n_nodes);
        row.push((problem.g_lo)(t));
        row.extend_from_slice(interior_vals);
        row.push((problem.g_hi)(t));
        row
    };

    let mut values = Vec::with_capacity(grid.steps + 1);
    let initial: Vec<f64> = (0..n_nodes).map(|n| (problem.initial)(grid.x(n))).collect();
    let mut current = initial[1..n_nodes - 1].to_vec();
    values.push(initial);

    for m in 0..grid.steps {
        let rhs = sys.build_rhs(problem, grid, &current, m)?;
        let next = match rm {
            None => sys.implicit.thomas_solve(&rhs)?,
            Some(settings) => {
                let mut cfg = RmConfig::new(settings.iters, current.clone(), settings.seed);
                cfg.gain = settings.gain;
                cfg.stream = m as u64;
                rm_solve(&sys.implicit, &rhs, &cfg, noise)?.0
            }
        };
        values.push(boundary_row(m + 1, &next));
        current = next;
    }

    let field = Field { values, grid: *grid };
    if grid.ratio <= 1.0 {
        let (lo, hi) = field.value_range();
        log::debug!("field range [{lo}, {hi}] with a = {}", grid.ratio);
    }
    Ok(field)
}

/// `sin(pi t)`, exactly zero at integers.
pub fn sin_pi(t: f64) -> f64 {
    let mut r = t - 2.0 * (t / 2.0).round();
    if r > 0.5 {
        r = 1.0 - r;
    } else if r < -0.5 {
        r = -1.0 - r;
    }
    (PI * r).sin()
}

/// `sin(pi x) exp(-D pi^2 t)`: exact solution on `[0, 1]` for `f = sin(pi x)`
/// and homogeneous Dirichlet data.
pub fn analytic_solution(x: f64, t: f64, diffusivity: f64) -> f64 {
    sin_pi(x) * (-diffusivity * PI * PI * t).exp()
}

/// Exact solution of [`HeatProblem::sine`] on a general interval.
pub fn sine_solution(x: f64, t: f64, diffusivity: f64, x_lo: f64, x_hi: f64) -> f64 {
    let len = x_hi - x_lo;
    sin_pi((x - x_lo) / len) * (-diffusivity * PI * PI * t / (len * len)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderLevel {
    pub intervals: usize,
    pub steps: usize,
    pub dx: f64,
    pub dt: f64,
    pub max_err: f64,
    /// `err(previous level) / err(this level)`; absent on the first level or
    /// when this level's error is zero.
    pub ratio: Option<f64>,
}

/// Refinement study with the direct solver: level `l` uses `N0 2^l` intervals
/// and `M0 2^l` steps, so `dt` stays proportional to `dx`.
pub fn order_study(
    problem: &HeatProblem,
    exact: &(dyn Fn(f64, f64) -> f64 + Sync),
    intervals0: usize,
    steps0: usize,
    t_end: f64,
    levels: usize,
) -> Result<Vec<OrderLevel>> {
    if levels == 0 {
        return Err(Error::InvalidInput("need at least one refinement level".into()));
    }
    let raw: Vec<(Grid, f64)> = (0..levels)
        .into_par_iter()
        .map(|l| {
            let grid = Grid::new(problem, intervals0 << l, steps0 << l, t_end)?;
            let field = solve_heat(problem, &grid, SolverKind::Direct, None, None)?;
            Ok((grid, field.max_error_at_end(exact)))
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(levels);
    for (l, (grid, err)) in raw.iter().enumerate() {
        let ratio = (l > 0 && *err > 0.0).then(|| raw[l - 1].1 / err);
        out.push(OrderLevel {
            intervals: grid.intervals,
            steps: grid.steps,
            dx: grid.dx,
            dt: grid.dt,
            max_err: *err,
            ratio,
        });
    }
    Ok(out)
}
