//! Flat `key = value` run configuration.
//!
//! Blank lines and `#` comments are ignored. Unknown keys, duplicate keys and
//! values that violate a precondition are rejected with the offending line number.

use std::fmt;
use std::str::FromStr;

use heatrm_core::report::fmt_num;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn line_err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Line { line, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialKind {
    /// `initial_value * sin(pi (x - x_lo) / L)`.
    Sine,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverSel {
    Direct,
    Rm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseSel {
    Zero,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StartSel {
    /// `X_1 = 0`.
    Zero,
    /// `X_1` is the interior of the initial condition.
    Warm,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Checkpoints {
    /// Geometric from `first` to `rm_iters` with `per_octave` points per doubling.
    Geometric { first: usize, per_octave: usize },
    List(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub diffusivity: f64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub initial: InitialKind,
    pub initial_value: f64,
    pub boundary_lo: f64,
    pub boundary_hi: f64,
    pub intervals: usize,
    pub steps: usize,
    pub t_end: f64,
    pub solver: SolverSel,
    pub rm_iters: usize,
    pub gain: f64,
    pub noise: NoiseSel,
    pub noise_bound: f64,
    pub noise_mean: f64,
    pub x_init: StartSel,
    /// `None` means three times the noise floor measured by a pilot run.
    pub epsilon: Option<f64>,
    pub replications: usize,
    pub checkpoints: Checkpoints,
    pub k_max: usize,
    pub levels: usize,
    pub recursion_k: usize,
    /// Tail-bound parameters; `None` uses the fitted values.
    pub alpha: Option<f64>,
    pub p: Option<f64>,
    pub seed: u64,
    pub output: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            diffusivity: 1.0,
            x_lo: 0.0,
            x_hi: 1.0,
            initial: InitialKind::Sine,
            initial_value: 1.0,
            boundary_lo: 0.0,
            boundary_hi: 0.0,
            intervals: 10,
            steps: 10,
            t_end: 0.1,
            solver: SolverSel::Direct,
            rm_iters: 1_000_000,
            gain: 1.0,
            noise: NoiseSel::Uniform,
            noise_bound: 0.1,
            noise_mean: 0.0,
            x_init: StartSel::Zero,
            epsilon: None,
            replications: 200,
            checkpoints: Checkpoints::Geometric { first: 100, per_octave: 2 },
            k_max: 2000,
            levels: 4,
            recursion_k: 100,
            alpha: None,
            p: None,
            seed: 20240601,
            output: None,
        }
    }
}

const KEYS: &[&str] = &[
    "diffusivity",
    "x_lo",
    "x_hi",
    "initial",
    "initial_value",
    "boundary_lo",
    "boundary_hi",
    "intervals",
    "steps",
    "t_end",
    "solver",
    "rm_iters",
    "gain",
    "noise",
    "noise_bound",
    "noise_mean",
    "x_init",
    "epsilon",
    "replications",
    "checkpoints",
    "checkpoint_first",
    "checkpoints_per_octave",
    "k_max",
    "levels",
    "recursion_k",
    "alpha",
    "p",
    "seed",
    "output",
];

fn parse_num<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .parse()
        .map_err(|_| line_err(line, format!("cannot parse `{value}` as a number for `{key}`")))
}

fn parse_auto(line: usize, key: &str, value: &str) -> Result<Option<f64>, ConfigError> {
    if value == "auto" {
        Ok(None)
    } else {
        parse_num(line, key, value).map(Some)
    }
}

fn choice<T: Copy>(line: usize, key: &str, value: &str, options: &[(&str, T)]) -> Result<T, ConfigError> {
    options.iter().find(|(name, _)| *name == value).map(|(_, v)| *v).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        line_err(line, format!("`{key}` must be one of {}, got `{value}`", names.join("|")))
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<(&str, usize)> = Vec::new();
        let mut geometric = (100usize, 2usize);
        let mut explicit_list: Option<Vec<usize>> = None;

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| line_err(line, format!("expected `key = value`, got `{content}`")))?;
            let Some(&key) = KEYS.iter().find(|k| **k == key) else {
                return Err(line_err(line, format!("unknown key `{key}`")));
            };
            if let Some((_, first)) = seen.iter().find(|(k, _)| *k == key) {
                return Err(line_err(line, format!("duplicate key `{key}` (first set on line {first})")));
            }
            seen.push((key, line));

            match key {
                "diffusivity" => cfg.diffusivity = parse_num(line, key, value)?,
                "x_lo" => cfg.x_lo = parse_num(line, key, value)?,
                "x_hi" => cfg.x_hi = parse_num(line, key, value)?,
                "initial" => {
                    cfg.initial =
                        choice(line, key, value, &[("sine", InitialKind::Sine), ("constant", InitialKind::Constant)])?
                }
                "initial_value" => cfg.initial_value = parse_num(line, key, value)?,
                "boundary_lo" => cfg.boundary_lo = parse_num(line, key, value)?,
                "boundary_hi" => cfg.boundary_hi = parse_num(line, key, value)?,
                "intervals" => cfg.intervals = parse_num(line, key, value)?,
                "steps" => cfg.steps = parse_num(line, key, value)?,
                "t_end" => cfg.t_end = parse_num(line, key, value)?,
                "solver" => cfg.solver = choice(line, key, value, &[("direct", SolverSel::Direct), ("rm", SolverSel::Rm)])?,
                "rm_iters" => cfg.rm_iters = parse_num(line, key, value)?,
                "gain" => cfg.gain = parse_num(line, key, value)?,
                "noise" => cfg.noise = choice(line, key, value, &[("zero", NoiseSel::Zero), ("uniform", NoiseSel::Uniform)])?,
                "noise_bound" => cfg.noise_bound = parse_num(line, key, value)?,
                "noise_mean" => cfg.noise_mean = parse_num(line, key, value)?,
                "x_init" => cfg.x_init = choice(line, key, value, &[("zero", StartSel::Zero), ("warm", StartSel::Warm)])?,
                "epsilon" => cfg.epsilon = parse_auto(line, key, value)?,
                "replications" => cfg.replications = parse_num(line, key, value)?,
                "checkpoints" => {
                    if value != "auto" {
                        let list = value
                            .split(',')
                            .map(|v| parse_num(line, key, v.trim()))
                            .collect::<Result<Vec<usize>, _>>()?;
                        explicit_list = Some(list);
                    }
                }
                "checkpoint_first" => geometric.0 = parse_num(line, key, value)?,
                "checkpoints_per_octave" => geometric.1 = parse_num(line, key, value)?,
                "k_max" => cfg.k_max = parse_num(line, key, value)?,
                "levels" => cfg.levels = parse_num(line, key, value)?,
                "recursion_k" => cfg.recursion_k = parse_num(line, key, value)?,
                "alpha" => cfg.alpha = parse_auto(line, key, value)?,
                "p" => cfg.p = parse_auto(line, key, value)?,
                "seed" => cfg.seed = parse_num(line, key, value)?,
                "output" => cfg.output = (value != "-").then(|| value.to_string()),
                _ => unreachable!("key list and match arms disagree on `{key}`"),
            }
        }

        if explicit_list.is_some() && seen.iter().any(|(k, _)| *k == "checkpoint_first" || *k == "checkpoints_per_octave") {
            let line = seen.iter().find(|(k, _)| *k == "checkpoints").map(|(_, l)| *l).unwrap_or(0);
            return Err(line_err(line, "explicit `checkpoints` list conflicts with geometric checkpoint keys"));
        }
        cfg.checkpoints = match explicit_list {
            Some(list) => Checkpoints::List(list),
            None => Checkpoints::Geometric { first: geometric.0, per_octave: geometric.1 },
        };

        cfg.validate().map_err(|msg| {
            let line = seen.iter().find(|(k, _)| msg.starts_with(&format!("{k} "))).map(|(_, l)| *l);
            match line {
                Some(line) => line_err(line, msg),
                None => ConfigError::Invalid(msg),
            }
        })?;
        Ok(cfg)
    }

    /// Checks every numeric precondition. Messages start with the offending key.
    pub fn validate(&self) -> Result<(), String> {
        let finite = |k: &str, v: f64| if v.is_finite() { Ok(()) } else { Err(format!("{k} must be finite")) };
        finite("diffusivity", self.diffusivity)?;
        if self.diffusivity < 0.0 {
            return Err("diffusivity must be non-negative".into());
        }
        finite("x_lo", self.x_lo)?;
        finite("x_hi", self.x_hi)?;
        if self.x_hi <= self.x_lo {
            return Err("x_hi must exceed x_lo".into());
        }
        finite("initial_value", self.initial_value)?;
        finite("boundary_lo", self.boundary_lo)?;
        finite("boundary_hi", self.boundary_hi)?;
        if self.intervals < 2 {
            return Err("intervals must be at least 2".into());
        }
        if self.steps < 1 {
            return Err("steps must be at least 1".into());
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err("t_end must be positive".into());
        }
        if self.rm_iters < 1 {
            return Err("rm_iters must be at least 1".into());
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err("gain must be positive".into());
        }
        if self.noise == NoiseSel::Uniform {
            if !(self.noise_bound > 0.0 && self.noise_bound.is_finite()) {
                return Err("noise_bound must be positive for uniform noise".into());
            }
            let edge = self.noise_bound / ((self.intervals - 1) as f64).sqrt();
            if !(self.noise_mean.abs() < edge) {
                return Err(format!("noise_mean must satisfy |mean| < noise_bound/sqrt(N-1) = {edge}"));
            }
        } else if self.noise_mean != 0.0 {
            return Err("noise_mean requires uniform noise".into());
        }
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err("epsilon must be positive or `auto`".into());
            }
        }
        if self.replications < 2 {
            return Err("replications must be at least 2".into());
        }
        match &self.checkpoints {
            Checkpoints::Geometric { first, per_octave } => {
                if *first < 1 || *first > self.rm_iters {
                    return Err(format!("checkpoint_first must lie in [1, rm_iters = {}]", self.rm_iters));
                }
                if *per_octave < 1 {
                    return Err("checkpoints_per_octave must be at least 1".into());
                }
            }
            Checkpoints::List(list) => {
                if list.is_empty() || list.windows(2).any(|w| w[0] >= w[1]) {
                    return Err("checkpoints must be a non-empty increasing list".into());
                }
                if list[0] < 1 || *list.last().unwrap() > self.rm_iters {
                    return Err(format!("checkpoints must lie in [1, rm_iters = {}]", self.rm_iters));
                }
            }
        }
        if self.k_max < 2 {
            return Err("k_max must be at least 2".into());
        }
        if self.levels < 1 {
            return Err("levels must be at least 1".into());
        }
        if self.recursion_k < 1 {
            return Err("recursion_k must be at least 1".into());
        }
        for (k, v) in [("alpha", self.alpha), ("p", self.p)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(format!("{k} must be positive or `auto`"));
                }
            }
        }
        Ok(())
    }

    pub fn checkpoint_list(&self) -> Vec<usize> {
        match &self.checkpoints {
            Checkpoints::Geometric { first, per_octave } => {
                heatrm_core::analysis::geometric_checkpoints(*first, self.rm_iters, *per_octave)
            }
            Checkpoints::List(list) => list.clone(),
        }
    }

    /// Canonical `key = value` lines; parses back to an equal config.
    pub fn to_lines(&self) -> Vec<String> {
        let auto = |v: Option<f64>| v.map(fmt_num).unwrap_or_else(|| "auto".into());
        let mut lines = vec![
            format!("diffusivity = {}", fmt_num(self.diffusivity)),
            format!("x_lo = {}", fmt_num(self.x_lo)),
            format!("x_hi = {}", fmt_num(self.x_hi)),
            format!("initial = {}", match self.initial { InitialKind::Sine => "sine", InitialKind::Constant => "constant" }),
            format!("initial_value = {}", fmt_num(self.initial_value)),
            format!("boundary_lo = {}", fmt_num(self.boundary_lo)),
            format!("boundary_hi = {}", fmt_num(self.boundary_hi)),
            format!("intervals = {}", self.intervals),
            format!("steps = {}", self.steps),
            format!("t_end = {}", fmt_num(self.t_end)),
            format!("solver = {}", match self.solver { SolverSel::Direct => "direct", SolverSel::Rm => "rm" }),
            format!("rm_iters = {}", self.rm_iters),
            format!("gain = {}", fmt_num(self.gain)),
            format!("noise = {}", match self.noise { NoiseSel::Zero => "zero", NoiseSel::Uniform => "uniform" }),
            format!("noise_bound = {}", fmt_num(self.noise_bound)),
            format!("noise_mean = {}", fmt_num(self.noise_mean)),
            format!("x_init = {}", match self.x_init { StartSel::Zero => "zero", StartSel::Warm => "warm" }),
            format!("epsilon = {}", auto(self.epsilon)),
            format!("replications = {}", self.replications),
        ];
        match &self.checkpoints {
            Checkpoints::Geometric { first, per_octave } => {
                lines.push(format!("checkpoint_first = {first}"));
                lines.push(format!("checkpoints_per_octave = {per_octave}"));
            }
            Checkpoints::List(list) => {
                let s: Vec<String> = list.iter().map(|k| k.to_string()).collect();
                lines.push(format!("checkpoints = {}", s.join(",")));
            }
        }
        lines.extend([
            format!("k_max = {}", self.k_max),
            format!("levels = {}", self.levels),
            format!("recursion_k = {}", self.recursion_k),
            format!("alpha = {}", auto(self.alpha)),
            format!("p = {}", auto(self.p)),
            format!("seed = {}", self.seed),
            format!("output = {}", self.output.as_deref().unwrap_or("-")),
        ]);
        lines
    }

    /// First 16 hex digits of the SHA-256 of the canonical text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in self.to_lines() {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}
