//! Crank-Nicolson discretization of `u_t = D u_xx` with Dirichlet boundaries.
//!
//! Averaging the explicit and implicit FTCS stencils and multiplying through by
//! `2 dt` gives, at each interior node,
//!
//! ```text
//! -a u[n-1,m+1] + (2+2a) u[n,m+1] - a u[n+1,m+1] = a u[n-1,m] + (2-2a) u[n,m] + a u[n+1,m]
//! ```
//!
//! with `a = D dt / dx^2`. Moving the boundary values to the right-hand side
//! yields the square system `A u[m+1] = B u[m] + w[m] - r[m+1]`.

use std::fmt;
use std::sync::Arc;

use crate::error::{check_len, Error, Result};
use crate::tridiag::TriDiag;

pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `u_t = D u_xx` on `[x_lo, x_hi]`, `u(x, 0) = f(x)`, `u(x_lo, t) = g_lo(t)`,
/// `u(x_hi, t) = g_hi(t)`.
///
/// Corner compatibility between `f` and the boundary data is not required.
#[derive(Clone)]
pub struct HeatProblem {
    pub diffusivity: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub initial: ScalarFn,
    pub g_lo: ScalarFn,
    pub g_hi: ScalarFn,
}

impl HeatProblem {
    pub fn new(
        diffusivity: f64,
        x_lo: f64,
        x_hi: f64,
        initial: ScalarFn,
        g_lo: ScalarFn,
        g_hi: ScalarFn,
    ) -> Result<Self> {
        // D = 0 is admitted: it is the degenerate case where time stepping is the identity.
        if !(diffusivity >= 0.0 && diffusivity.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "diffusivity must be finite and non-negative, got {diffusivity}"
            )));
        }
        if !(x_hi > x_lo) || !x_lo.is_finite() || !x_hi.is_finite() {
            return Err(Error::InvalidInput(format!(
                "domain must satisfy x_lo < x_hi, got [{x_lo}, {x_hi}]"
            )));
        }
        Ok(Self { diffusivity, x_lo, x_hi, initial, g_lo, g_hi })
    }

    /// `f(x) = sin(pi (x - x_lo) / L)` with homogeneous boundaries; on `[0, 1]`
    /// the exact solution is [`crate::stepper::analytic_solution`].
    pub fn sine(diffusivity: f64, x_lo: f64, x_hi: f64) -> Result<Self> {
        let len = x_hi - x_lo;
        Self::new(
            diffusivity,
            x_lo,
            x_hi,
            Arc::new(move |x| crate::stepper::sin_pi((x - x_lo) / len)),
            Arc::new(|_| 0.0),
            Arc::new(|_| 0.0),
        )
    }

    pub fn length(&self) -> f64 {
        self.x_hi - self.x_lo
    }
}

impl fmt::Debug for HeatProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HeatProblem")
            .field("diffusivity", &self.diffusivity)
            .field("x_lo", &self.x_lo)
            .field("x_hi", &self.x_hi)
            .finish_non_exhaustive()
    }
}

/// Uniform space-time mesh: `N` intervals in space, `M` steps up to `t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub intervals: usize,
    pub steps: usize,
    pub t_end: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub dx: f64,
    pub dt: f64,
    /// Mesh ratio `a = D dt / dx^2`.
    pub ratio: f64,
}

impl Grid {
    pub fn new(problem: &HeatProblem, intervals: usize, steps: usize, t_end: f64) -> Result<Self> {
        if intervals < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 space intervals, got {intervals}"
            )));
        }
        if steps < 1 {
            return Err(Error::InvalidInput("need at least 1 time step".into()));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidInput(format!("t_end must be positive, got {t_end}")));
        }
        let dx = problem.length() / intervals as f64;
        let dt = t_end / steps as f64;
        Ok(Self {
            intervals,
            steps,
            t_end,
            x_lo: problem.x_lo,
            x_hi: problem.x_hi,
            dx,
            dt,
            ratio: problem.diffusivity * dt / (dx * dx),
        })
    }

    /// Interior unknowns per time level, `N - 1`.
    pub fn interior(&self) -> usize {
        self.intervals - 1
    }

    /// Node `n`; the last node is exactly `x_hi`.
    pub fn x(&self, n: usize) -> f64 {
        if n == self.intervals {
            self.x_hi
        } else {
            self.x_lo + n as f64 * self.dx
        }
    }

    pub fn t(&self, m: usize) -> f64 {
        m as f64 * self.dt
    }
}

/// The pair `(A, B)` of the Crank-Nicolson system `A u[m+1] = B u[m] + w[m] - r[m+1]`.
///
/// Both matrices are time-invariant for constant diffusivity.
#[derive(Debug, Clone, PartialEq)]
pub struct CnSystem {
    /// `A`: diagonal `2 + 2a`, off-diagonals `-a`.
    pub implicit: TriDiag,
    /// `B`: diagonal `2 - 2a`, off-diagonals `a`.
    pub explicit: TriDiag,
    pub ratio: f64,
}

pub fn assemble_cn(grid: &Grid) -> Result<CnSystem> {
    if grid.intervals < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 2 space intervals, got {}",
            grid.intervals
        )));
    }
    let a = grid.ratio;
    let n = grid.interior();
    Ok(CnSystem {
        implicit: TriDiag::symmetric_constant(n, 2.0 + 2.0 * a, -a)?,
        explicit: TriDiag::symmetric_constant(n, 2.0 - 2.0 * a, a)?,
        ratio: a,
    })
}

impl CnSystem {
    pub fn dim(&self) -> usize {
        self.implicit.n()
    }

    /// `B u[m] + w[m] - r[m+1]` for the step `m -> m + 1`.
    ///
    /// `w[m] = (a u[0,m], 0, .., 0, a u[N,m])` and
    /// `r[m+1] = (-a u[0,m+1], 0, .., 0, -a u[N,m+1])`.
    pub fn build_rhs(
        &self,
        problem: &HeatProblem,
        grid: &Grid,
        u_m: &[f64],
        m: usize,
    ) -> Result<Vec<f64>> {
        check_len(self.dim(), u_m.len())?;
        let mut rhs = self.explicit.matvec(u_m)?;
        let (t0, t1) = (grid.t(m), grid.t(m + 1));
        let a = self.ratio;
        let last = rhs.len() - 1;
        rhs[0] += a * ((problem.g_lo)(t0) + (problem.g_lo)(t1));
        rhs[last] += a * ((problem.g_hi)(t0) + (problem.g_hi)(t1));
        Ok(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem_with(d: f64, g_lo: f64, g_hi: f64) -> HeatProblem {
        HeatProblem::new(
            d,
            0.0,
            1.0,
            Arc::new(|_| 0.0),
            Arc::new(move |_| g_lo),
            Arc::new(move |_| g_hi),
        )
        .unwrap()
    }

    /// Grid with N intervals whose mesh ratio is exactly `a` (dx = 1/N, dt = 1).
    fn grid_with_ratio(a: f64, intervals: usize) -> (HeatProblem, Grid) {
        let dx = 1.0 / intervals as f64;
        let p = problem_with(a * dx * dx, 0.0, 0.0);
        let mut g = Grid::new(&p, intervals, 1, 1.0).unwrap();
        g.ratio = a;
        (p, g)
    }

    #[test]
    fn assemble_a_equals_one() {
        let (_, g) = grid_with_ratio(1.0, 4);
        let sys = assemble_cn(&g).unwrap();
        assert_eq!(sys.implicit.diag(), &[4.0, 4.0, 4.0]);
        assert_eq!(sys.implicit.sub(), &[-1.0, -1.0]);
        assert_eq!(sys.explicit.diag(), &[0.0, 0.0, 0.0]);
        assert_eq!(sys.explicit.sup(), &[1.0, 1.0]);
    }

    #[test]
    fn assemble_zero_diffusion() {
        let (_, g) = grid_with_ratio(0.0, 4);
        let sys = assemble_cn(&g).unwrap();
        assert_eq!(sys.implicit, TriDiag::symmetric_constant(3, 2.0, 0.0).unwrap());
        assert_eq!(sys.explicit, TriDiag::symmetric_constant(3, 2.0, 0.0).unwrap());
    }

    #[test]
    fn assemble_half_ratio() {
        let (_, g) = grid_with_ratio(0.5, 3);
        let sys = assemble_cn(&g).unwrap();
        assert_eq!(sys.implicit.diag(), &[3.0, 3.0]);
        assert_eq!(sys.implicit.sub(), &[-0.5]);
        assert_eq!(sys.explicit.diag(), &[1.0, 1.0]);
        assert_eq!(sys.explicit.sub(), &[0.5]);
    }

    #[test]
    fn assemble_rejects_single_interval() {
        let (_, mut g) = grid_with_ratio(1.0, 4);
        g.intervals = 1;
        assert!(assemble_cn(&g).is_err());
    }

    #[test]
    fn ratio_from_mesh() {
        let p = problem_with(1.0, 0.0, 0.0);
        let g = Grid::new(&p, 10, 10, 0.1).unwrap();
        assert!((g.ratio - 1.0).abs() < 1e-12);
        assert_eq!(g.interior(), 9);
    }

    #[test]
    fn grid_and_problem_validation() {
        let p = problem_with(1.0, 0.0, 0.0);
        assert!(Grid::new(&p, 1, 10, 1.0).is_err());
        assert!(Grid::new(&p, 4, 0, 1.0).is_err());
        assert!(Grid::new(&p, 4, 1, 0.0).is_err());
        let f: ScalarFn = Arc::new(|_| 0.0);
        assert!(HeatProblem::new(-1.0, 0.0, 1.0, f.clone(), f.clone(), f.clone()).is_err());
        assert!(HeatProblem::new(1.0, 1.0, 1.0, f.clone(), f.clone(), f).is_err());
    }

    #[test]
    fn rhs_interior_only() {
        let (p, g) = grid_with_ratio(1.0, 4);
        let sys = assemble_cn(&g).unwrap();
        let rhs = sys.build_rhs(&p, &g, &[1.0, 1.0, 1.0], 0).unwrap();
        assert_eq!(rhs, vec![1.0, 2.0, 1.0]);
    }

    #[test]
    fn rhs_zero_ratio_doubles() {
        let (_, g) = grid_with_ratio(0.0, 4);
        let p = problem_with(0.0, 3.0, -7.0);
        let sys = assemble_cn(&g).unwrap();
        let rhs = sys.build_rhs(&p, &g, &[1.0, -2.0, 0.5], 3).unwrap();
        assert_eq!(rhs, vec![2.0, -4.0, 1.0]);
    }

    #[test]
    fn rhs_boundary_coupling() {
        let (_, g) = grid_with_ratio(1.0, 4);
        let p = problem_with(g.ratio * g.dx * g.dx, 1.0, 0.0);
        let sys = assemble_cn(&g).unwrap();
        let rhs = sys.build_rhs(&p, &g, &[0.0, 0.0, 0.0], 0).unwrap();
        assert_eq!(rhs, vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn rhs_rejects_wrong_length() {
        let (p, g) = grid_with_ratio(1.0, 4);
        let sys = assemble_cn(&g).unwrap();
        assert!(sys.build_rhs(&p, &g, &[0.0; 2], 0).is_err());
    }

    #[test]
    fn a_plus_b_is_four_identity() {
        for a in [0.0, 0.25, 1.0, 3.7] {
            let (_, g) = grid_with_ratio(a, 7);
            let sys = assemble_cn(&g).unwrap();
            let sum = sys.implicit.add(&sys.explicit).unwrap();
            assert_eq!(sum, TriDiag::symmetric_constant(6, 4.0, 0.0).unwrap());
        }
    }
}
