//! Shared fixtures for the benchmarks.

use heatrm_core::{assemble_cn, Grid, HeatProblem, TriDiag};

/// Implicit matrix and first-step right-hand side for `sin(pi x)` on `N`
/// intervals with mesh ratio 1.
pub fn sine_system(intervals: usize) -> (TriDiag, Vec<f64>) {
    let p = HeatProblem::sine(1.0, 0.0, 1.0).expect("valid problem");
    let dx = 1.0 / intervals as f64;
    let g = Grid::new(&p, intervals, 1, dx * dx).expect("valid grid");
    let sys = assemble_cn(&g).expect("valid system");
    let u0: Vec<f64> = (1..intervals).map(|n| (p.initial)(g.x(n))).collect();
    let rhs = sys.build_rhs(&p, &g, &u0, 0).expect("matching length");
    (sys.implicit, rhs)
}
