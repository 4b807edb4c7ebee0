use std::sync::Arc;

use anyhow::{bail, Context, Result};
use heatrm_core::analysis::{self, compare_rate, measure_noise_floor};
use heatrm_core::cn::{assemble_cn, CnSystem, Grid, HeatProblem, ScalarFn};
use heatrm_core::report::{self, fmt_num};
use heatrm_core::rm::{l2_dist, NoiseModel, RmConfig};
use heatrm_core::stepper::{self, RmStepConfig, SolverKind};

use crate::config::{InitialKind, NoiseSel, RunConfig, SolverSel, StartSel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Order,
    RmStudy,
    Bounds,
    RecursionCheck,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Order => "order",
            Command::RmStudy => "rm-study",
            Command::Bounds => "bounds",
            Command::RecursionCheck => "recursion-check",
        }
    }
}

/// The artifact (`text`, always starting with `#` header lines) and
/// human-readable summary lines that go to stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    pub summary: Vec<String>,
}

/// Prefix of the header lines that echo the effective configuration.
pub const CONFIG_ECHO_PREFIX: &str = "# cfg ";

/// Recover the configuration echoed in an output header.
pub fn echoed_config(text: &str) -> Result<RunConfig> {
    let body: String = text
        .lines()
        .filter_map(|l| l.strip_prefix(CONFIG_ECHO_PREFIX))
        .map(|l| format!("{l}\n"))
        .collect();
    Ok(RunConfig::parse(&body)?)
}

fn header(cmd: Command, cfg: &RunConfig, summary: &[String]) -> Vec<String> {
    let mut lines = vec![format!("heatrm {} config_hash={} seed={}", cmd.name(), cfg.hash(), cfg.seed)];
    lines.extend(cfg.to_lines().into_iter().map(|l| format!("cfg {l}")));
    lines.extend(summary.iter().cloned());
    lines
}

pub fn build_problem(cfg: &RunConfig) -> Result<HeatProblem> {
    let (x_lo, len, amp) = (cfg.x_lo, cfg.x_hi - cfg.x_lo, cfg.initial_value);
    let initial: ScalarFn = match cfg.initial {
        InitialKind::Sine => Arc::new(move |x| amp * stepper::sin_pi((x - x_lo) / len)),
        InitialKind::Constant => Arc::new(move |_| amp),
    };
    let (lo, hi) = (cfg.boundary_lo, cfg.boundary_hi);
    Ok(HeatProblem::new(cfg.diffusivity, cfg.x_lo, cfg.x_hi, initial, Arc::new(move |_| lo), Arc::new(move |_| hi))?)
}

/// Exact solution when the data are a sine mode with homogeneous boundaries.
pub fn analytic(cfg: &RunConfig) -> Option<impl Fn(f64, f64) -> f64 + Sync> {
    let has = cfg.initial == InitialKind::Sine && cfg.boundary_lo == 0.0 && cfg.boundary_hi == 0.0;
    let (d, lo, hi, amp) = (cfg.diffusivity, cfg.x_lo, cfg.x_hi, cfg.initial_value);
    has.then_some(move |x, t| amp * stepper::sine_solution(x, t, d, lo, hi))
}

fn noise_model(cfg: &RunConfig, dim: usize) -> Result<NoiseModel> {
    Ok(match cfg.noise {
        NoiseSel::Zero => NoiseModel::zero(dim),
        NoiseSel::Uniform => NoiseModel::biased_uniform(dim, cfg.noise_bound, cfg.noise_mean)?,
    })
}

/// The first-step system `A x = B u_0 + w_0 - r_1` used by the single-solve studies.
struct SingleSolve {
    sys: CnSystem,
    rhs: Vec<f64>,
    x_init: Vec<f64>,
}

fn single_solve(cfg: &RunConfig) -> Result<SingleSolve> {
    let problem = build_problem(cfg)?;
    let grid = Grid::new(&problem, cfg.intervals, cfg.steps, cfg.t_end)?;
    let sys = assemble_cn(&grid)?;
    let u0: Vec<f64> = (1..cfg.intervals).map(|n| (problem.initial)(grid.x(n))).collect();
    let rhs = sys.build_rhs(&problem, &grid, &u0, 0)?;
    let x_init = match cfg.x_init {
        StartSel::Zero => vec![0.0; u0.len()],
        StartSel::Warm => u0,
    };
    Ok(SingleSolve { sys, rhs, x_init })
}

pub fn run(cmd: Command, cfg: &RunConfig) -> Result<Output> {
    cfg.validate().map_err(anyhow::Error::msg).context("invalid configuration")?;
    match cmd {
        Command::Solve => solve(cfg),
        Command::Order => order(cfg),
        Command::RmStudy => rm_study(cfg),
        Command::Bounds => bounds(cfg),
        Command::RecursionCheck => recursion_check(cfg),
    }
}

fn finish(
    cmd: Command,
    cfg: &RunConfig,
    summary: Vec<String>,
    write: impl FnOnce(&mut Vec<u8>, &[String]) -> std::io::Result<()>,
) -> Result<Output> {
    let mut buf = Vec::new();
    write(&mut buf, &header(cmd, cfg, &summary))?;
    Ok(Output { text: String::from_utf8(buf)?, summary })
}

fn solve(cfg: &RunConfig) -> Result<Output> {
    let problem = build_problem(cfg)?;
    let grid = Grid::new(&problem, cfg.intervals, cfg.steps, cfg.t_end)?;
    let noise = noise_model(cfg, grid.interior())?;
    let rm = RmStepConfig { iters: cfg.rm_iters, gain: cfg.gain, seed: cfg.seed };
    let field = match cfg.solver {
        SolverSel::Direct => stepper::solve_heat(&problem, &grid, SolverKind::Direct, None, None)?,
        SolverSel::Rm => stepper::solve_heat(&problem, &grid, SolverKind::Rm, Some(&rm), Some(&noise))?,
    };
    let mut summary = vec![format!("mesh_ratio a={}", fmt_num(grid.ratio))];
    if let Some(exact) = analytic(cfg) {
        summary.push(format!("max_error_vs_analytic={}", fmt_num(field.max_error_at_end(exact))));
    }
    finish(Command::Solve, cfg, summary, |w, h| report::write_field(w, h, &field))
}

fn order(cfg: &RunConfig) -> Result<Output> {
    let Some(exact) = analytic(cfg) else {
        bail!("order study needs an analytic solution: initial = sine with zero boundaries");
    };
    let problem = build_problem(cfg)?;
    let levels = stepper::order_study(&problem, &exact, cfg.intervals, cfg.steps, cfg.t_end, cfg.levels)?;
    let ratios: Vec<String> = levels.iter().filter_map(|l| l.ratio).map(fmt_num).collect();
    let summary = vec![format!("error_ratios={}", ratios.join(" "))];
    finish(Command::Order, cfg, summary, |w, h| report::write_order(w, h, &levels))
}

fn rm_study(cfg: &RunConfig) -> Result<Output> {
    let SingleSolve { sys, rhs, x_init } = single_solve(cfg)?;
    let a = &sys.implicit;
    let noise = noise_model(cfg, a.n())?;
    let mut rm_cfg = RmConfig::new(cfg.rm_iters, x_init, cfg.seed);
    rm_cfg.gain = cfg.gain;
    rm_cfg.checkpoints = cfg.checkpoint_list();

    let mut summary = Vec::new();
    let epsilon = match cfg.epsilon {
        Some(e) => e,
        None => {
            let floor = measure_noise_floor(a, &rhs, &rm_cfg, &noise, 10)?;
            summary.push(format!("noise_floor={}", fmt_num(floor)));
            if !(floor > 0.0) {
                bail!("measured noise floor is zero; set `epsilon` explicitly");
            }
            3.0 * floor
        }
    };

    // Tail-bound parameters: user supplied, otherwise fitted on 1..=k_max.
    let fitted = analysis::certify_bounds(a, cfg.k_max, cfg.gain);
    let (alpha, p) = match (&fitted, cfg.alpha, cfg.p) {
        (_, Some(alpha), Some(p)) => (Some(alpha), Some(p)),
        (Ok(cert), alpha, p) => {
            let fit_alpha = 8.0 * cert.c_const * (cert.fit.gamma * cfg.noise_bound).powi(2);
            (Some(alpha.unwrap_or(fit_alpha)), Some(p.unwrap_or(cert.fit.p)))
        }
        (Err(e), _, _) => {
            summary.push(format!("bound_fit_failed=\"{e}\""));
            (None, None)
        }
    };

    let report = analysis::aco_study(a, &rhs, &rm_cfg, &noise, epsilon, cfg.replications, alpha.zip(p))?;

    summary.push(format!("epsilon={}", fmt_num(epsilon)));
    if let (Some(alpha), Some(p)) = (alpha, p) {
        summary.push(format!("alpha={} p={}", fmt_num(alpha), fmt_num(p)));
    }
    match report.fitted_rate {
        Some(q) => {
            summary.push(format!("fitted_rate q={}", fmt_num(q)));
            if let Some(p) = p {
                let cmp = compare_rate(q, p);
                summary.push(format!(
                    "claimed_rate 2p={} consistent={}",
                    fmt_num(cmp.claimed),
                    cmp.consistent
                ));
            }
        }
        None => summary.push("fitted_rate q=unavailable".into()),
    }
    summary.push(match report.absorption_checkpoint {
        Some(k) => format!("deterministic_term_below_half_epsilon_at k={k}"),
        None => "deterministic_term_below_half_epsilon_at k=never".into(),
    });
    summary.push(format!(
        "final_partial_sum={}",
        fmt_num(*report.partial_sums.last().expect("at least one checkpoint"))
    ));
    finish(Command::RmStudy, cfg, summary, |w, h| report::write_study(w, h, &report))
}

fn bounds(cfg: &RunConfig) -> Result<Output> {
    let SingleSolve { sys, .. } = single_solve(cfg)?;
    let cert = analysis::certify_bounds(&sys.implicit, cfg.k_max, cfg.gain)?;
    let alpha = 8.0 * cert.c_const * (cert.fit.gamma * cfg.noise_bound).powi(2);
    let summary = vec![
        format!("range 1<=i<=k<={}", cfg.k_max),
        format!(
            "gamma={} p={} p_critical={}",
            fmt_num(cert.fit.gamma),
            fmt_num(cert.fit.p),
            fmt_num(cert.fit.p_critical)
        ),
        format!("C={} C_half_range={}", fmt_num(cert.c_const), fmt_num(cert.c_const_half_range)),
        format!("alpha={} b={}", fmt_num(alpha), fmt_num(cfg.noise_bound)),
        format!("product_bound_holds={} sum_bound_holds={}", cert.lemma1_holds(), cert.lemma2_holds()),
    ];
    finish(Command::Bounds, cfg, summary, |w, h| report::write_bounds(w, h, &cert))
}

fn recursion_check(cfg: &RunConfig) -> Result<Output> {
    let SingleSolve { sys, rhs, x_init } = single_solve(cfg)?;
    let a = &sys.implicit;
    let noise = noise_model(cfg, a.n())?;
    let mut rm_cfg = RmConfig::new(cfg.recursion_k, x_init.clone(), cfg.seed);
    rm_cfg.gain = cfg.gain;
    rm_cfg.record_noise = true;
    let (x_final, trace) = heatrm_core::rm_solve(a, &rhs, &rm_cfg, &noise)?;
    let draws = trace.noise_draws.expect("noise recording requested");
    let dev = analysis::error_recursion_check(a, &x_init, &rhs, &draws, cfg.recursion_k, cfg.gain)?;
    let summary = vec![format!(
        "k={} final_error={}",
        cfg.recursion_k,
        fmt_num(l2_dist(&x_final, &trace.exact))
    )];
    finish(Command::RecursionCheck, cfg, summary, |w, h| {
        use std::io::Write;
        for line in h {
            writeln!(w, "# {line}")?;
        }
        writeln!(w, "max_deviation={}", fmt_num(dev))
    })
}
