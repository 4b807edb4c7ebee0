//! Numerical checks of the convergence theory for the Robbins-Monro solve.
//!
//! Every constant here (`gamma`, `p`, `C`, `alpha`) is an empirical
//! certificate: it is fitted on a finite range `1 <= i <= k <= k_max` and then
//! checked exhaustively on that same range. Nothing is claimed beyond it.

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::rm::{l2_dist, rm_solve, rm_step, NoiseModel, RmConfig};
use crate::tridiag::TriDiag;

/// Outward rounding applied to fitted constants so that the equality case of
/// a certificate survives re-evaluation in a different operation order.
const OUTWARD: f64 = 1.0 + 1e-12;

/// Resolution of the exponent grid used by [`fit_lemma1`].
pub const P_GRID_STEP: f64 = 0.01;

/// Max-norm gap between the forward iterates and the closed-form error expansion
///
/// ```text
/// X_{k+1} - X_ex = prod_{i=1..k} (I - (c/i) A) (X_1 - X_ex)
///                + sum_{i=1..k} prod_{j=i+1..k} (I - (c/j) A) (c/i) xi_i
/// ```
///
/// The forward side runs [`rm_step`]; the closed form only uses products with
/// `A` and the direct solution, so the two routes share no intermediate state.
pub fn error_recursion_check(
    a: &TriDiag,
    x_init: &[f64],
    rhs: &[f64],
    noise_draws: &[Vec<f64>],
    k: usize,
    gain: f64,
) -> Result<f64> {
    let n = a.n();
    check_len(n, x_init.len())?;
    check_len(n, rhs.len())?;
    if noise_draws.len() < k {
        return Err(Error::InvalidInput(format!(
            "need {k} recorded noise draws, got {}",
            noise_draws.len()
        )));
    }
    for xi in &noise_draws[..k] {
        check_len(n, xi.len())?;
    }
    let exact = a.thomas_solve(rhs)?;

    let mut x = x_init.to_vec();
    for (j, xi) in noise_draws[..k].iter().enumerate() {
        x = rm_step(&x, j + 1, a, rhs, xi, gain)?;
    }
    let forward: Vec<f64> = x.iter().zip(&exact).map(|(p, q)| p - q).collect();

    let initial_err: Vec<f64> = x_init.iter().zip(&exact).map(|(p, q)| p - q).collect();
    let mut closed = apply_product(a, &initial_err, 1, k, gain)?;
    for (idx, xi) in noise_draws[..k].iter().enumerate() {
        let i = idx + 1;
        let scaled: Vec<f64> = xi.iter().map(|v| v * gain / i as f64).collect();
        let term = apply_product(a, &scaled, i + 1, k, gain)?;
        for (c, t) in closed.iter_mut().zip(term) {
            *c += t;
        }
    }

    Ok(forward
        .iter()
        .zip(&closed)
        .map(|(f, c)| (f - c).abs())
        .fold(0.0, f64::max))
}

/// `prod_{j=from..=to} (I - (c/j) A) v`, applied right to left; empty when `from > to`.
fn apply_product(a: &TriDiag, v: &[f64], from: usize, to: usize, gain: f64) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    let mut av = vec![0.0; v.len()];
    for j in from..=to {
        a.matvec_into(&out, &mut av)?;
        let s = gain / j as f64;
        for (o, q) in out.iter_mut().zip(&av) {
            *o -= s * q;
        }
    }
    Ok(out)
}

/// `|prod_{i=1..k} (I - (c/i) A) e|_2`: the deterministic part of the error
/// after `k` updates started from error `e`.
pub fn deterministic_error(a: &TriDiag, initial_err: &[f64], k: usize, gain: f64) -> Result<f64> {
    let v = apply_product(a, initial_err, 1, k, gain)?;
    Ok(v.iter().map(|x| x * x).sum::<f64>().sqrt())
}

/// `| prod_{j=i+1..k} (I - (c/j) A) |_2` for symmetric `A`.
///
/// All factors share the eigenvectors of `A`, so the norm is
/// `max_lambda | prod_j (1 - c lambda / j) |`. The empty product (`i == k`) is `1`.
pub fn product_norm(a: &TriDiag, i: usize, k: usize, gain: f64) -> Result<f64> {
    if i > k {
        return Err(Error::InvalidInput(format!("need i <= k, got i={i}, k={k}")));
    }
    let spectrum = a.spectrum()?;
    Ok(spectrum
        .eigenvalues
        .iter()
        .map(|&lambda| {
            (i + 1..=k)
                .map(|j| 1.0 - gain * lambda / j as f64)
                .product::<f64>()
                .abs()
        })
        .fold(0.0, f64::max))
}

/// Every `product_norm(A, i, k)` for `1 <= i <= k <= k_max`, built in one sweep.
///
/// The step at index `j` is `c / j^theta`; `theta = 1` is the iteration
/// actually run by the solver, other values are for exploration only.
#[derive(Debug, Clone)]
pub struct ProductTable {
    k_max: usize,
    gain: f64,
    theta: f64,
    // Row k holds i = 1..=k, at offset k(k-1)/2.
    norms: Vec<f64>,
}

impl ProductTable {
    pub fn build(a: &TriDiag, k_max: usize, gain: f64) -> Result<Self> {
        Self::build_with_theta(a, k_max, gain, 1.0)
    }

    pub fn build_with_theta(a: &TriDiag, k_max: usize, gain: f64, theta: f64) -> Result<Self> {
        if k_max < 2 {
            return Err(Error::InvalidInput(format!("k_max must be at least 2, got {k_max}")));
        }
        let eigenvalues = a.spectrum()?.eigenvalues;
        let steps: Vec<f64> = (0..=k_max)
            .map(|j| if j == 0 { 0.0 } else { gain / (j as f64).powf(theta) })
            .collect();

        // Each column i is an independent running product; fill columns in parallel.
        let columns: Vec<Vec<f64>> = (1..=k_max)
            .into_par_iter()
            .map(|i| {
                let mut running = vec![1.0; eigenvalues.len()];
                let mut col = Vec::with_capacity(k_max - i + 1);
                col.push(1.0);
                for step in &steps[i + 1..=k_max] {
                    let mut norm: f64 = 0.0;
                    for (r, &lambda) in running.iter_mut().zip(&eigenvalues) {
                        *r *= 1.0 - step * lambda;
                        norm = norm.max(r.abs());
                    }
                    col.push(norm);
                }
                col
            })
            .collect();

        let mut norms = vec![0.0; k_max * (k_max + 1) / 2];
        for (ci, col) in columns.iter().enumerate() {
            let i = ci + 1;
            for (offset, &v) in col.iter().enumerate() {
                let k = i + offset;
                norms[k * (k - 1) / 2 + (i - 1)] = v;
            }
        }
        Ok(Self { k_max, gain, theta, norms })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn gain(&self) -> f64 {
        self.gain
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Norm of `prod_{j=i+1..k}`, `1 <= i <= k <= k_max`.
    pub fn get(&self, i: usize, k: usize) -> f64 {
        debug_assert!(1 <= i && i <= k && k <= self.k_max);
        self.norms[k * (k - 1) / 2 + (i - 1)]
    }

    fn row(&self, k: usize) -> &[f64] {
        let start = k * (k - 1) / 2;
        &self.norms[start..start + k]
    }

    /// `sum_{i=1..k} (norm(i, k) c / i)^2`.
    pub fn lemma2_sum(&self, k: usize) -> f64 {
        self.row(k)
            .iter()
            .enumerate()
            .map(|(idx, &v)| {
                let t = v * self.gain / (idx + 1) as f64;
                t * t
            })
            .sum()
    }
}

/// Fitted constants of the product bound `norm(i, k) <= gamma ((i+1)/(k+1))^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma1Fit {
    pub gamma: f64,
    pub p: f64,
    /// Largest exponent passing the growth test before grid rounding.
    pub p_critical: f64,
    pub k_max: usize,
}

/// Largest `p` (on a 0.01 grid) for which the product bound does not degrade
/// with the range, then the smallest `gamma` making it hold on every pair.
///
/// On a finite range any `p` is attainable with a large enough `gamma`, so the
/// exponent is pinned by a growth test: for every start index
/// `i <= k_max/2`, the normalized product `norm(i,k) ((k+1)/(i+1))^p` must not
/// be larger at `k = k_max` than at `k = k_max/2`. That ratio is monotone in
/// `p`, so the admissible set is `p <= p_critical` with `p_critical` in closed form.
pub fn fit_lemma1(table: &ProductTable) -> Result<Lemma1Fit> {
    let k_max = table.k_max();
    let half = k_max / 2;
    let growth = ((k_max + 1) as f64 / (half + 1) as f64).ln();

    let mut p_critical = f64::INFINITY;
    for i in 1..=half {
        let (mid, end) = (table.get(i, half), table.get(i, k_max));
        if end == 0.0 {
            continue;
        }
        p_critical = p_critical.min((mid / end).ln() / growth);
    }
    if !(p_critical > 0.0) {
        return Err(Error::VerificationFailed(format!(
            "no exponent p > 0 keeps the product bound from growing on 1..={k_max} (critical p = {p_critical})"
        )));
    }
    // Unbounded only if every product vanished, e.g. A = I with c = 1.
    let p = if p_critical.is_finite() {
        (p_critical / P_GRID_STEP).floor() * P_GRID_STEP
    } else {
        1.0
    };
    if !(p > 0.0) {
        return Err(Error::VerificationFailed(format!(
            "critical exponent {p_critical} is below the grid resolution {P_GRID_STEP}"
        )));
    }

    let gamma = lemma1_gamma(table, p) * OUTWARD;
    Ok(Lemma1Fit { gamma, p, p_critical, k_max })
}

/// Smallest `gamma` with `norm(i,k) <= gamma ((i+1)/(k+1))^p` on the whole table.
pub fn lemma1_gamma(table: &ProductTable, p: f64) -> f64 {
    (1..=table.k_max())
        .into_par_iter()
        .map(|k| {
            table
                .row(k)
                .iter()
                .enumerate()
                .map(|(idx, &v)| v * ((k + 1) as f64 / (idx + 2) as f64).powf(p))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Per-`k` maximum over `i` of `norm(i,k) / (gamma ((i+1)/(k+1))^p)`; the bound
/// holds on the row iff the entry is `<= 1`.
pub fn lemma1_row_ratios(table: &ProductTable, gamma: f64, p: f64) -> Vec<f64> {
    (1..=table.k_max())
        .into_par_iter()
        .map(|k| {
            table
                .row(k)
                .iter()
                .enumerate()
                .map(|(idx, &v)| v / (gamma * ((idx + 2) as f64 / (k + 1) as f64).powf(p)))
                .fold(0.0, f64::max)
        })
        .collect()
}

/// `C = max_k sum(k) (k+1)^{2p} / gamma^2`, rounded outward.
pub fn fit_lemma2_constant(table: &ProductTable, fit: &Lemma1Fit) -> f64 {
    (1..=table.k_max())
        .map(|k| table.lemma2_sum(k) * ((k + 1) as f64).powf(2.0 * fit.p) / (fit.gamma * fit.gamma))
        .fold(0.0, f64::max)
        * OUTWARD
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub gamma: f64,
    pub p: f64,
    pub c_const: f64,
    pub alpha: f64,
    pub b: f64,
    pub epsilon: f64,
}

impl BoundParams {
    /// `alpha = 8 C (gamma b)^2`.
    pub fn from_fit(fit: &Lemma1Fit, c_const: f64, b: f64, epsilon: f64) -> Self {
        let alpha = 8.0 * c_const * (fit.gamma * b).powi(2);
        Self { gamma: fit.gamma, p: fit.p, c_const, alpha, b, epsilon }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma2Point {
    pub sum: f64,
    pub bound: f64,
    pub holds: bool,
}

/// `sum_{i=1..k} (product_norm(A,i,k) c/i)^2` against `C gamma^2 / (k+1)^{2p}`.
///
/// Evaluates the products directly through [`product_norm`], independently of
/// any [`ProductTable`].
pub fn lemma2_sum(a: &TriDiag, k: usize, gain: f64, params: &BoundParams) -> Result<Lemma2Point> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let mut sum = 0.0;
    for i in 1..=k {
        let t = product_norm(a, i, k, gain)? * gain / i as f64;
        sum += t * t;
    }
    let bound = params.c_const * params.gamma * params.gamma / ((k + 1) as f64).powf(2.0 * params.p);
    Ok(Lemma2Point { sum, bound, holds: sum <= bound })
}

/// One row of the product-bound certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateRow {
    pub k: usize,
    pub max_ratio_over_i: f64,
    pub sum: f64,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsCertificate {
    pub fit: Lemma1Fit,
    pub c_const: f64,
    /// `C` refitted on `k <= k_max/2`; growth relative to `c_const` shows how
    /// far the constant is from range-independent.
    pub c_const_half_range: f64,
    pub rows: Vec<CertificateRow>,
}

impl BoundsCertificate {
    pub fn lemma1_holds(&self) -> bool {
        self.rows.iter().all(|r| r.max_ratio_over_i <= 1.0)
    }

    pub fn lemma2_holds(&self) -> bool {
        self.rows.iter().all(|r| r.holds)
    }
}

/// Fit `(gamma, p)` and `C` on `1..=k_max` and check both bounds on every `k`.
pub fn certify_bounds(a: &TriDiag, k_max: usize, gain: f64) -> Result<BoundsCertificate> {
    let table = ProductTable::build(a, k_max, gain)?;
    let fit = fit_lemma1(&table)?;
    let c_const = fit_lemma2_constant(&table, &fit);
    let c_const_half_range = (1..=k_max / 2)
        .map(|k| table.lemma2_sum(k) * ((k + 1) as f64).powf(2.0 * fit.p) / (fit.gamma * fit.gamma))
        .fold(0.0, f64::max)
        * OUTWARD;
    let ratios = lemma1_row_ratios(&table, fit.gamma, fit.p);
    let rows = (1..=k_max)
        .map(|k| {
            let sum = table.lemma2_sum(k);
            let bound = c_const * fit.gamma * fit.gamma / ((k + 1) as f64).powf(2.0 * fit.p);
            CertificateRow { k, max_ratio_over_i: ratios[k - 1], sum, bound, holds: sum <= bound }
        })
        .collect();
    Ok(BoundsCertificate { fit, c_const, c_const_half_range, rows })
}

/// Tail bound `2 exp(-(k+1)^{2p} eps^2 / alpha)`; not clamped, so it reads 2 as `eps -> 0`.
pub fn hoeffding_bound(epsilon: f64, k: usize, alpha: f64, p: f64) -> f64 {
    2.0 * (-((k + 1) as f64).powf(2.0 * p) * epsilon * epsilon / alpha).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub checkpoints: Vec<usize>,
    pub median_err: Vec<f64>,
    pub q10_err: Vec<f64>,
    pub q90_err: Vec<f64>,
    /// Fraction of replications with `|X_{k+1} - X_ex| > epsilon`.
    pub tail_probs: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub hoeffding: Option<Vec<f64>>,
    /// Empirical decay exponent of the median error, when it can be fitted.
    pub fitted_rate: Option<f64>,
    /// First checkpoint at which the deterministic term
    /// `|prod (I - (c/i) A)(X_1 - X_ex)|` is at most `epsilon / 2`.
    pub absorption_checkpoint: Option<usize>,
    pub epsilon: f64,
    pub replications: usize,
    pub seed: u64,
}

/// Stream offset separating pilot replications from study replications.
const PILOT_STREAM_BASE: u64 = 1 << 32;

fn replicate(
    a: &TriDiag,
    rhs: &[f64],
    cfg: &RmConfig,
    noise: &NoiseModel,
    streams: impl IntoParallelIterator<Item = u64>,
) -> Result<Vec<Vec<f64>>> {
    streams
        .into_par_iter()
        .map(|stream| {
            let mut c = cfg.clone();
            c.stream = stream;
            c.record_iterates = false;
            c.record_noise = false;
            rm_solve(a, rhs, &c, noise).map(|(_, t)| t.err_norms)
        })
        .collect()
}

/// Median over `pilot_reps` replications of the error at the final checkpoint.
///
/// Pilot replications use streams disjoint from those of [`aco_study`].
pub fn measure_noise_floor(
    a: &TriDiag,
    rhs: &[f64],
    cfg: &RmConfig,
    noise: &NoiseModel,
    pilot_reps: usize,
) -> Result<f64> {
    if pilot_reps == 0 {
        return Err(Error::InvalidInput("need at least one pilot replication".into()));
    }
    if cfg.checkpoints.is_empty() {
        return Err(Error::InvalidInput("config has no checkpoints".into()));
    }
    let streams: Vec<u64> = (0..pilot_reps as u64).map(|r| PILOT_STREAM_BASE + r).collect();
    let runs = replicate(a, rhs, cfg, noise, streams)?;
    let mut finals: Vec<f64> = runs.iter().filter_map(|e| e.last().copied()).collect();
    Ok(quantile(&mut finals, 0.5))
}

/// `3 x` the measured noise floor from 10 pilot replications.
pub fn default_epsilon(a: &TriDiag, rhs: &[f64], cfg: &RmConfig, noise: &NoiseModel) -> Result<f64> {
    Ok(3.0 * measure_noise_floor(a, rhs, cfg, noise, 10)?)
}

/// Linear-interpolation quantile (sorts `values` in place).
pub fn quantile(values: &mut [f64], q: f64) -> f64 {
    values.sort_by(f64::total_cmp);
    let pos = q * (values.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    values[lo] + (pos - lo as f64) * (values[hi] - values[lo])
}

/// Ensemble of `replications` independent solves; replication `r` uses noise
/// stream `r` under `cfg.seed`, so the report does not depend on scheduling.
pub fn aco_study(
    a: &TriDiag,
    rhs: &[f64],
    cfg: &RmConfig,
    noise: &NoiseModel,
    epsilon: f64,
    replications: usize,
    bound: Option<(f64, f64)>,
) -> Result<StudyReport> {
    if replications < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 replications, got {replications}")));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
    }
    if cfg.checkpoints.is_empty() {
        return Err(Error::InvalidInput("config has no checkpoints".into()));
    }
    let runs = replicate(a, rhs, cfg, noise, (0..replications as u64).collect::<Vec<_>>())?;

    let n_cp = cfg.checkpoints.len();
    let (mut median_err, mut q10_err, mut q90_err, mut tail_probs) =
        (Vec::with_capacity(n_cp), Vec::with_capacity(n_cp), Vec::with_capacity(n_cp), Vec::with_capacity(n_cp));
    for j in 0..n_cp {
        let mut errs: Vec<f64> = runs.iter().map(|r| r[j]).collect();
        let exceed = errs.iter().filter(|&&e| e > epsilon).count();
        tail_probs.push(exceed as f64 / replications as f64);
        median_err.push(quantile(&mut errs, 0.5));
        q10_err.push(quantile(&mut errs, 0.1));
        q90_err.push(quantile(&mut errs, 0.9));
    }
    let partial_sums = tail_probs
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();

    let hoeffding = bound.map(|(alpha, p)| {
        cfg.checkpoints.iter().map(|&k| hoeffding_bound(epsilon, k, alpha, p)).collect()
    });
    let fitted_rate = rate_fit(&median_err, &cfg.checkpoints).ok();

    let exact = a.thomas_solve(rhs)?;
    let initial_err: Vec<f64> = cfg.x_init.iter().zip(&exact).map(|(p, q)| p - q).collect();
    let absorption_checkpoint = absorption_checkpoint(a, &initial_err, &cfg.checkpoints, epsilon, cfg.gain)?;

    Ok(StudyReport {
        checkpoints: cfg.checkpoints.clone(),
        median_err,
        q10_err,
        q90_err,
        tail_probs,
        partial_sums,
        hoeffding,
        fitted_rate,
        absorption_checkpoint,
        epsilon,
        replications,
        seed: cfg.seed,
    })
}

fn absorption_checkpoint(
    a: &TriDiag,
    initial_err: &[f64],
    checkpoints: &[usize],
    epsilon: f64,
    gain: f64,
) -> Result<Option<usize>> {
    let mut v = initial_err.to_vec();
    let mut av = vec![0.0; v.len()];
    let mut done = 0;
    for &cp in checkpoints {
        for j in done + 1..=cp {
            a.matvec_into(&v, &mut av)?;
            let s = gain / j as f64;
            for (o, q) in v.iter_mut().zip(&av) {
                *o -= s * q;
            }
        }
        done = cp;
        if l2_dist(&v, &vec![0.0; v.len()]) <= epsilon / 2.0 {
            return Ok(Some(cp));
        }
    }
    Ok(None)
}

/// Negated least-squares slope of `ln(err)` against `ln(k)`.
///
/// Non-positive or non-finite errors are dropped; at least three points must remain.
pub fn rate_fit(errors: &[f64], checkpoints: &[usize]) -> Result<f64> {
    check_len(checkpoints.len(), errors.len())?;
    let pts: Vec<(f64, f64)> = checkpoints
        .iter()
        .zip(errors)
        .filter(|(&k, &e)| k > 0 && e > 0.0 && e.is_finite())
        .map(|(&k, &e)| ((k as f64).ln(), e.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "rate fit needs at least 3 positive points, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("rate fit needs distinct checkpoints".into()));
    }
    Ok(-sxy / sxx)
}

/// Measured decay exponent `q` against the claimed `O(k^{-2p})` rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateComparison {
    pub measured: f64,
    pub claimed: f64,
    /// `q >= 2p - RATE_AGREEMENT_TOL`.
    pub consistent: bool,
}

pub const RATE_AGREEMENT_TOL: f64 = 0.1;

pub fn compare_rate(measured: f64, p: f64) -> RateComparison {
    let claimed = 2.0 * p;
    RateComparison { measured, claimed, consistent: measured >= claimed - RATE_AGREEMENT_TOL }
}

/// Roughly geometric checkpoints from `first` to `last` with `per_octave`
/// points per doubling, deduplicated after rounding; always ends at `last`.
pub fn geometric_checkpoints(first: usize, last: usize, per_octave: usize) -> Vec<usize> {
    assert!(first >= 1 && last >= first && per_octave >= 1);
    let ratio = 2f64.powf(1.0 / per_octave as f64);
    let mut out = Vec::new();
    let mut v = first as f64;
    while v < last as f64 {
        let k = v.round() as usize;
        if out.last() != Some(&k) {
            out.push(k);
        }
        v *= ratio;
    }
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}
