//! Robbins-Monro iteration for `A x = rhs` observed through bounded noise.
//!
//! Starting from `X_1 = x_init`, for `k = 1, 2, ..`
//!
//! ```text
//! X_{k+1} = X_k - (c / k) [A X_k - rhs - xi_k]
//! ```
//!
//! where the `xi_k` are i.i.d., zero mean and satisfy `|xi_k|_2 < b`.

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::tridiag::TriDiag;

/// Counter-based generator; `(seed, stream)` fully determines the sequence.
pub type NoiseStream = ChaCha8Rng;

pub fn noise_stream(seed: u64, stream: u64) -> NoiseStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Zero,
    /// Independent uniform components on `(mu - h, mu + h)` with
    /// `h = b / sqrt(n) - |mu|`, so every draw lies strictly inside the `b`-ball.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    bound: f64,
    dim: usize,
    mean_offset: f64,
}

impl NoiseModel {
    pub fn zero(dim: usize) -> Self {
        Self { kind: NoiseKind::Zero, bound: 0.0, dim, mean_offset: 0.0 }
    }

    pub fn uniform(dim: usize, bound: f64) -> Result<Self> {
        Self::biased_uniform(dim, bound, 0.0)
    }

    /// Uniform noise with a nonzero componentwise mean. The iteration then
    /// converges to `A^{-1}(rhs + mu 1)` rather than the solution of the system.
    pub fn biased_uniform(dim: usize, bound: f64, mean_offset: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("noise dimension must be positive".into()));
        }
        if !(bound > 0.0 && bound.is_finite()) {
            return Err(Error::InvalidInput(format!("noise bound must be positive, got {bound}")));
        }
        let edge = bound / (dim as f64).sqrt();
        if !(mean_offset.abs() < edge) {
            return Err(Error::InvalidInput(format!(
                "mean offset {mean_offset} must satisfy |mu| < b/sqrt(n) = {edge}"
            )));
        }
        Ok(Self { kind: NoiseKind::Uniform, bound, dim, mean_offset })
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean_offset(&self) -> f64 {
        self.mean_offset
    }

    fn half_width(&self) -> f64 {
        self.bound / (self.dim as f64).sqrt() - self.mean_offset.abs()
    }

    pub fn sampler(&self) -> NoiseSampler {
        let dist = match self.kind {
            NoiseKind::Zero => None,
            NoiseKind::Uniform => {
                let h = self.half_width();
                Some(Uniform::new(self.mean_offset - h, self.mean_offset + h))
            }
        };
        NoiseSampler { dist, bound_sq: self.bound * self.bound, dim: self.dim }
    }

    pub fn sample(&self, rng: &mut NoiseStream) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.sampler().sample_into(rng, &mut out);
        out
    }
}

/// Prepared sampler for a [`NoiseModel`], reused inside the iteration loop.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    dist: Option<Uniform<f64>>,
    bound_sq: f64,
    dim: usize,
}

impl NoiseSampler {
    pub fn sample_into(&self, rng: &mut NoiseStream, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let Some(dist) = &self.dist else {
            out.fill(0.0);
            return;
        };
        // `Uniform` is half-open, so the lower edge can be hit; reject to keep the bound strict.
        loop {
            let mut norm_sq = 0.0;
            for v in out.iter_mut() {
                *v = dist.sample(rng);
                norm_sq += *v * *v;
            }
            if norm_sq < self.bound_sq {
                return;
            }
        }
    }
}

/// One update `x_k - (c/k) [A x_k - rhs - xi_k]`.
pub fn rm_step(x_k: &[f64], k: usize, a: &TriDiag, rhs: &[f64], xi_k: &[f64], gain: f64) -> Result<Vec<f64>> {
    let n = a.n();
    check_len(n, x_k.len())?;
    check_len(n, rhs.len())?;
    check_len(n, xi_k.len())?;
    if k == 0 {
        return Err(Error::InvalidInput("iteration index starts at 1".into()));
    }
    let mut x = x_k.to_vec();
    let mut ax = vec![0.0; n];
    step_in_place(&mut x, &mut ax, k, a, rhs, xi_k, gain);
    Ok(x)
}

#[inline]
fn step_in_place(x: &mut [f64], ax: &mut [f64], k: usize, a: &TriDiag, rhs: &[f64], xi: &[f64], gain: f64) {
    a.matvec_into(x, ax).expect("dimensions checked by caller");
    let step = gain / k as f64;
    for i in 0..x.len() {
        x[i] -= step * (ax[i] - rhs[i] - xi[i]);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmConfig {
    pub max_iters: usize,
    /// Step at iteration `k` is `gain / k`; `1.0` is the classical schedule.
    pub gain: f64,
    /// The first iterate `X_1`.
    pub x_init: Vec<f64>,
    pub seed: u64,
    /// Noise stream index under `seed`; replication `r` of a study uses stream `r`.
    pub stream: u64,
    /// Iteration counts `k` at which `|X_{k+1} - X_ex|` is recorded. Must be increasing within `[1, max_iters]`.
    pub checkpoints: Vec<usize>,
    pub record_iterates: bool,
    pub record_noise: bool,
    /// Optional stop once `|A X_k - rhs|_2 <= tol`. Off by default.
    pub residual_tol: Option<f64>,
}

impl RmConfig {
    pub fn new(max_iters: usize, x_init: Vec<f64>, seed: u64) -> Self {
        Self {
            max_iters,
            gain: 1.0,
            x_init,
            seed,
            stream: 0,
            checkpoints: vec![max_iters],
            record_iterates: false,
            record_noise: false,
            residual_tol: None,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be positive".into()));
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(Error::InvalidInput(format!("gain must be positive, got {}", self.gain)));
        }
        check_len(dim, self.x_init.len())?;
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("checkpoints must be strictly increasing".into()));
        }
        if let (Some(&first), Some(&last)) = (self.checkpoints.first(), self.checkpoints.last()) {
            if first < 1 || last > self.max_iters {
                return Err(Error::InvalidInput(format!(
                    "checkpoints must lie in [1, {}]",
                    self.max_iters
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RmTrace {
    pub checkpoints: Vec<usize>,
    /// `|X_{k+1} - X_ex|_2` for each checkpoint `k`.
    pub err_norms: Vec<f64>,
    pub iterates: Option<Vec<Vec<f64>>>,
    /// Every `xi_k`, `k = 1..=iterations`, when requested.
    pub noise_draws: Option<Vec<Vec<f64>>>,
    /// Direct solution used as the error reference.
    pub exact: Vec<f64>,
    /// Updates actually performed (less than `max_iters` only on early stop).
    pub iterations: usize,
    /// Set when `inf Re(sigma(A)) > 0` could not be confirmed.
    pub spectral_warning: bool,
}

pub fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Run `max_iters` Robbins-Monro updates.
///
/// A matrix violating the spectral condition is reported through
/// [`RmTrace::spectral_warning`] and a log warning, not rejected.
pub fn rm_solve(a: &TriDiag, rhs: &[f64], cfg: &RmConfig, noise: &NoiseModel) -> Result<(Vec<f64>, RmTrace)> {
    let n = a.n();
    check_len(n, rhs.len())?;
    check_len(n, noise.dim())?;
    cfg.validate(n)?;

    let spectral_warning = match a.spectrum() {
        Ok(s) => !s.satisfies_spectral_condition(),
        Err(_) => true,
    };
    if spectral_warning {
        log::warn!("spectral condition inf Re(sigma(A)) > 0 not confirmed; iterates may diverge");
    }

    let exact = a.thomas_solve(rhs)?;
    let sampler = noise.sampler();
    let mut rng = noise_stream(cfg.seed, cfg.stream);

    let mut x = cfg.x_init.clone();
    let mut ax = vec![0.0; n];
    let mut xi = vec![0.0; n];
    let mut err_norms = Vec::with_capacity(cfg.checkpoints.len());
    let mut iterates = cfg.record_iterates.then(Vec::new);
    let mut noise_draws = cfg.record_noise.then(Vec::new);
    let mut next_cp = cfg.checkpoints.iter().copied().peekable();
    let mut iterations = 0;

    for k in 1..=cfg.max_iters {
        if let Some(tol) = cfg.residual_tol {
            a.matvec_into(&x, &mut ax)?;
            let res = ax.iter().zip(rhs).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            if res <= tol {
                break;
            }
        }
        sampler.sample_into(&mut rng, &mut xi);
        if let Some(d) = noise_draws.as_mut() {
            d.push(xi.clone());
        }
        step_in_place(&mut x, &mut ax, k, a, rhs, &xi, cfg.gain);
        iterations = k;

        if next_cp.peek() == Some(&k) {
            next_cp.next();
            err_norms.push(l2_dist(&x, &exact));
            if let Some(it) = iterates.as_mut() {
                it.push(x.clone());
            }
        }
    }

    // Checkpoints beyond an early stop see the frozen final iterate.
    for _ in next_cp {
        err_norms.push(l2_dist(&x, &exact));
        if let Some(it) = iterates.as_mut() {
            it.push(x.clone());
        }
    }

    let trace = RmTrace {
        checkpoints: cfg.checkpoints.clone(),
        err_norms,
        iterates,
        noise_draws,
        exact,
        iterations,
        spectral_warning,
    };
    Ok((x, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cn_a1(n_intervals: usize) -> TriDiag {
        TriDiag::symmetric_constant(n_intervals - 1, 4.0, -1.0).unwrap()
    }

    #[test]
    fn zero_noise_is_zero() {
        let m = NoiseModel::zero(4);
        let mut rng = noise_stream(1, 0);
        assert_eq!(m.sample(&mut rng), vec![0.0; 4]);
    }

    #[test]
    fn same_stream_same_draw() {
        let m = NoiseModel::uniform(4, 0.1).unwrap();
        let mut r1 = noise_stream(42, 3);
        let mut r2 = noise_stream(42, 3);
        for _ in 0..5 {
            assert_eq!(m.sample(&mut r1), m.sample(&mut r2));
        }
        let mut r3 = noise_stream(42, 4);
        assert_ne!(m.sample(&mut noise_stream(42, 3)), m.sample(&mut r3));
    }

    #[test]
    fn uniform_bound_and_zero_mean() {
        let (b, n, draws) = (0.1, 4, 100_000);
        let m = NoiseModel::uniform(n, b).unwrap();
        let mut rng = noise_stream(7, 0);
        let mut sums = vec![0.0; n];
        let mut max_norm: f64 = 0.0;
        for _ in 0..draws {
            let xi = m.sample(&mut rng);
            max_norm = max_norm.max(xi.iter().map(|v| v * v).sum::<f64>().sqrt());
            for (s, v) in sums.iter_mut().zip(&xi) {
                *s += v;
            }
        }
        assert!(max_norm < b);
        // Component variance (b/sqrt(n))^2 / 3; standard error of the mean over `draws`.
        let sigma = (b * b / (3.0 * n as f64) / draws as f64).sqrt();
        for s in sums {
            assert!((s / draws as f64).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn biased_noise_mean_and_bound() {
        let m = NoiseModel::biased_uniform(2, 1.0, 0.3).unwrap();
        let mut rng = noise_stream(0, 0);
        let mut mean = 0.0;
        for _ in 0..20_000 {
            let xi = m.sample(&mut rng);
            assert!(xi.iter().map(|v| v * v).sum::<f64>() < 1.0);
            mean += xi[0];
        }
        assert!((mean / 20_000.0 - 0.3).abs() < 0.01);
        assert!(NoiseModel::biased_uniform(2, 1.0, 0.8).is_err());
    }

    #[test]
    fn noise_model_validation() {
        assert!(NoiseModel::uniform(0, 1.0).is_err());
        assert!(NoiseModel::uniform(3, 0.0).is_err());
        assert!(NoiseModel::uniform(3, f64::NAN).is_err());
    }

    #[test]
    fn step_identity_one_shot() {
        let a = TriDiag::identity(2).unwrap();
        let x = rm_step(&[0.0, 0.0], 1, &a, &[1.0, 2.0], &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
    }

    #[test]
    fn step_with_noise() {
        let a = TriDiag::identity(2).unwrap();
        let x = rm_step(&[1.0, 2.0], 2, &a, &[1.0, 2.0], &[0.1, -0.1], 1.0).unwrap();
        assert!((x[0] - 1.05).abs() < 1e-15 && (x[1] - 1.95).abs() < 1e-15);
    }

    #[test]
    fn step_on_cn_matrix() {
        // x - (A x - rhs) with x = 0 is rhs.
        let x = rm_step(&[0.0; 3], 1, &cn_a1(4), &[1.0, 0.0, 0.0], &[0.0; 3], 1.0).unwrap();
        assert_eq!(x, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn step_rejects_bad_input() {
        let a = TriDiag::identity(2).unwrap();
        assert!(rm_step(&[0.0; 3], 1, &a, &[0.0; 2], &[0.0; 2], 1.0).is_err());
        assert!(rm_step(&[0.0; 2], 0, &a, &[0.0; 2], &[0.0; 2], 1.0).is_err());
    }

    #[test]
    fn fixed_point_is_preserved() {
        let a = cn_a1(6);
        let rhs = [1.0, -2.0, 0.5, 3.0, 0.25];
        let exact = a.thomas_solve(&rhs).unwrap();
        for k in [1, 2, 17] {
            let x = rm_step(&exact, k, &a, &rhs, &[0.0; 5], 1.0).unwrap();
            assert!(l2_dist(&x, &exact) < 1e-14);
        }
    }

    #[test]
    fn solve_identity_one_step() {
        let a = TriDiag::identity(2).unwrap();
        let cfg = RmConfig::new(1, vec![0.0, 0.0], 0);
        let (x, trace) = rm_solve(&a, &[3.0, 4.0], &cfg, &NoiseModel::zero(2)).unwrap();
        assert_eq!(x, vec![3.0, 4.0]);
        assert_eq!(trace.err_norms, vec![0.0]);
        assert!(!trace.spectral_warning);
    }

    #[test]
    fn solve_is_reproducible() {
        let a = cn_a1(10);
        let rhs = vec![1.0; 9];
        let mut cfg = RmConfig::new(5000, vec![0.0; 9], 99);
        cfg.checkpoints = vec![10, 100, 1000, 5000];
        cfg.record_noise = true;
        let noise = NoiseModel::uniform(9, 0.1).unwrap();
        let (x1, t1) = rm_solve(&a, &rhs, &cfg, &noise).unwrap();
        let (x2, t2) = rm_solve(&a, &rhs, &cfg, &noise).unwrap();
        assert_eq!(x1, x2);
        assert_eq!(t1, t2);
        assert_eq!(t1.noise_draws.as_ref().unwrap().len(), 5000);
    }

    #[test]
    fn biased_noise_converges_to_shifted_point() {
        let a = cn_a1(6);
        let rhs = vec![1.0; 5];
        let mu = 0.05;
        let noise = NoiseModel::biased_uniform(5, 0.2, mu).unwrap();
        let mut cfg = RmConfig::new(200_000, vec![0.0; 5], 3);
        cfg.checkpoints = vec![200_000];
        let (x, trace) = rm_solve(&a, &rhs, &cfg, &noise).unwrap();
        let shifted: Vec<f64> = rhs.iter().map(|r| r + mu).collect();
        let target = a.thomas_solve(&shifted).unwrap();
        assert!(l2_dist(&x, &target) < 0.1 * l2_dist(&target, &trace.exact));
    }

    #[test]
    fn spectral_violation_is_reported_not_fatal() {
        let a = TriDiag::symmetric_constant(2, -1.0, 0.0).unwrap();
        let cfg = RmConfig::new(5, vec![0.0, 0.0], 0);
        let (_, trace) = rm_solve(&a, &[1.0, 1.0], &cfg, &NoiseModel::zero(2)).unwrap();
        assert!(trace.spectral_warning);
    }

    #[test]
    fn early_stop_on_residual() {
        let a = TriDiag::identity(2).unwrap();
        let mut cfg = RmConfig::new(100, vec![0.0, 0.0], 0);
        cfg.checkpoints = vec![50, 100];
        cfg.residual_tol = Some(1e-12);
        let (x, trace) = rm_solve(&a, &[3.0, 4.0], &cfg, &NoiseModel::zero(2)).unwrap();
        assert_eq!(trace.iterations, 1);
        assert_eq!(x, vec![3.0, 4.0]);
        assert_eq!(trace.err_norms, vec![0.0, 0.0]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = RmConfig::new(10, vec![0.0; 2], 0);
        cfg.checkpoints = vec![5, 11];
        assert!(cfg.validate(2).is_err());
        cfg.checkpoints = vec![5, 5];
        assert!(cfg.validate(2).is_err());
        cfg.checkpoints = vec![0];
        assert!(cfg.validate(2).is_err());
        cfg.checkpoints = vec![1, 10];
        assert!(cfg.validate(2).is_ok());
        assert!(cfg.validate(3).is_err());
        cfg.gain = 0.0;
        assert!(cfg.validate(2).is_err());
    }
}
