//! Path simulation of continuous nonnegative local martingales `L` with
//! `L_0 = 1` and `L_inf = 0`, summarised per path by running extremes.

mod checks;
mod stats;

pub use checks::{
    doob_identity_check, exp_law_check, min_time_market_check, DoobRow, DoobTable, ExpLawReport,
    MinTimeRow, MinTimeTable, LAW_ALLOWANCE,
};
pub use stats::{ks_exp1, CompensatedSum, MCEstimate};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bridge extremes whose exceedance probability is below `exp(-SKIP_EXPONENT)`
/// are not sampled.
const SKIP_EXPONENT: f64 = 46.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Generator {
    /// `L_t = exp(sigma W_t - sigma^2 t / 2)`.
    GbmMartingale { sigma: f64 },
    /// `L_t = 1 / |B_t + e_1|` with `B` a three-dimensional Brownian motion.
    InverseBessel3,
}

impl Generator {
    fn validate(&self) -> Result<()> {
        match *self {
            Generator::GbmMartingale { sigma } if !(sigma > 0.0 && sigma.is_finite()) => Err(
                Error::Parameter(format!("sigma must be positive, got {sigma}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub generator: Generator,
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub seed: u64,
    /// Sample the extreme of the Brownian bridge between grid points.
    #[serde(default = "yes")]
    pub bridge: bool,
    /// Sample the extreme after the horizon from its exact conditional law.
    #[serde(default = "yes")]
    pub tail: bool,
    /// Constant fractions `pi` in the asset `S = 1 / L`; the wealth of each is
    /// recorded at the grid time where `L` peaks.
    #[serde(default)]
    pub fractions: Vec<f64>,
    /// Number of leading paths whose grid values are kept.
    #[serde(default)]
    pub keep_paths: usize,
    /// Worker threads; defaults to the available parallelism.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn yes() -> bool {
    true
}

impl SimConfig {
    pub fn new(generator: Generator, n_paths: usize, n_steps: usize, dt: f64, seed: u64) -> Self {
        SimConfig {
            generator,
            n_paths,
            n_steps,
            dt,
            seed,
            bridge: true,
            tail: true,
            fractions: Vec::new(),
            keep_paths: 0,
            threads: None,
        }
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }
}

/// Per-path record of one simulated `L`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummary {
    /// `L` at the horizon.
    pub terminal: f64,
    /// Largest grid value of `L` up to the horizon.
    pub max_grid: f64,
    /// Supremum up to the horizon including sampled bridge extremes.
    pub max_bridge: f64,
    /// Supremum over all time; equals `max_bridge` without the tail sample.
    pub max_total: f64,
    /// First grid step where `L` attains `max_grid`.
    pub argmax_step: usize,
    /// `sum L dK` along the grid with `K = 1 - 1 / (running max)`.
    pub clock_sum: f64,
    /// Wealth of each configured fraction at `argmax_step`, from unit capital.
    pub wealth_at_argmax: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathEnsemble {
    /// `None` for ensembles built from supplied paths.
    pub generator: Option<Generator>,
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub seed: u64,
    pub bridge: bool,
    pub tail: bool,
    pub fractions: Vec<f64>,
    pub summaries: Vec<PathSummary>,
    /// Grid values of the first `keep_paths` paths.
    pub paths: Vec<Vec<f64>>,
}

impl PathEnsemble {
    /// Ensemble from explicit grid values, each path starting at 1. No bridge
    /// or tail corrections apply.
    pub fn from_paths(paths: Vec<Vec<f64>>, dt: f64, fractions: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::Parameter(format!("dt must be positive, got {dt}")));
        }
        let n_steps = paths.first().map_or(0, |p| p.len().saturating_sub(1));
        let mut summaries = Vec::with_capacity(paths.len());
        for (k, p) in paths.iter().enumerate() {
            if p.len() != n_steps + 1 {
                return Err(Error::Dimension {
                    expected: n_steps + 1,
                    got: p.len(),
                });
            }
            if p.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::InvalidProcess(format!(
                    "path {k} has a nonpositive value"
                )));
            }
            if (p[0] - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidProcess(format!(
                    "path {k} does not start at 1"
                )));
            }
            let mut acc = Accumulator::new(&fractions);
            for w in p.windows(2) {
                acc.step(w[0], w[1], 1.0 / w[1] * w[0]);
            }
            let m = acc.max;
            summaries.push(acc.finish(p[n_steps], m, m));
        }
        Ok(PathEnsemble {
            generator: None,
            n_paths: paths.len(),
            n_steps,
            dt,
            seed: 0,
            bridge: false,
            tail: false,
            fractions,
            summaries,
            paths,
        })
    }

    pub fn horizon(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    /// `E[L]` at the horizon.
    pub fn terminal_mean(&self) -> MCEstimate {
        MCEstimate::from_samples(self.summaries.iter().map(|s| s.terminal))
    }

    /// Mean of `L_h / L*_h`, the conditional probability that the supremum is
    /// exceeded after the horizon.
    pub fn residual_probability(&self) -> MCEstimate {
        MCEstimate::from_samples(
            self.summaries
                .iter()
                .map(|s| (s.terminal / s.max_bridge).min(1.0)),
        )
    }
}

/// Running grid statistics shared by the generators.
struct Accumulator<'a> {
    max: f64,
    argmax: usize,
    step: usize,
    clock: f64,
    fractions: &'a [f64],
    wealth: Vec<f64>,
    at_max: Vec<f64>,
}

impl<'a> Accumulator<'a> {
    fn new(fractions: &'a [f64]) -> Self {
        Accumulator {
            max: 1.0,
            argmax: 0,
            step: 0,
            clock: 0.0,
            fractions,
            wealth: vec![1.0; fractions.len()],
            at_max: vec![1.0; fractions.len()],
        }
    }

    /// Advances one step from `prev` to `next`, with `growth = S_next / S_prev`.
    #[inline]
    fn step(&mut self, _prev: f64, next: f64, growth: f64) {
        self.step += 1;
        for (x, pi) in self.wealth.iter_mut().zip(self.fractions) {
            *x *= 1.0 + pi * (growth - 1.0);
        }
        if next > self.max {
            self.clock += next / self.max - 1.0;
            self.max = next;
            self.argmax = self.step;
            self.at_max.copy_from_slice(&self.wealth);
        }
    }

    fn finish(self, terminal: f64, max_bridge: f64, max_total: f64) -> PathSummary {
        PathSummary {
            terminal,
            max_grid: self.max,
            max_bridge: max_bridge.max(self.max),
            max_total: max_total.max(max_bridge).max(self.max),
            argmax_step: self.argmax,
            clock_sum: self.clock,
            wealth_at_argmax: self.at_max,
        }
    }
}

/// Uniform draw on `(0, 1]`.
#[inline]
fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

fn simulate_gbm(
    cfg: &SimConfig,
    sigma: f64,
    rng: &mut ChaCha8Rng,
    keep: bool,
) -> (PathSummary, Vec<f64>) {
    let v = sigma * sigma * cfg.dt;
    let sd = v.sqrt();
    let drift = -0.5 * v;
    let mut acc = Accumulator::new(&cfg.fractions);
    let mut path = if keep { vec![1.0] } else { Vec::new() };
    let need_level = keep || !cfg.fractions.is_empty();
    let (mut x, mut top, mut grid_top) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..cfg.n_steps {
        let z: f64 = rng.sample(StandardNormal);
        let y = x + drift + sd * z;
        top = top.max(y);
        if cfg.bridge {
            let gap = 2.0 * (top - x) * (top - y);
            if gap < SKIP_EXPONENT * v {
                let u = open_uniform(rng);
                let m = 0.5 * (x + y + ((x - y) * (x - y) - 2.0 * v * u.ln()).sqrt());
                top = top.max(m);
            }
        }
        if y > grid_top || need_level {
            let level = y.exp();
            if need_level {
                acc.step(x.exp(), level, (x - y).exp());
                if keep {
                    path.push(level);
                }
            } else {
                acc.step(0.0, level, 1.0);
            }
            grid_top = grid_top.max(y);
        } else {
            acc.step += 1;
        }
        x = y;
    }
    let terminal = x.exp();
    let bridged = top.exp();
    let total = if cfg.tail {
        (x - open_uniform(rng).ln()).max(top).exp()
    } else {
        bridged
    };
    (acc.finish(terminal, bridged, total), path)
}

fn simulate_bessel(cfg: &SimConfig, rng: &mut ChaCha8Rng, keep: bool) -> (PathSummary, Vec<f64>) {
    let sd = cfg.dt.sqrt();
    let mut acc = Accumulator::new(&cfg.fractions);
    let mut path = if keep { vec![1.0] } else { Vec::new() };
    let mut p = [1.0f64, 0.0, 0.0];
    let mut s = 1.0f64;
    let mut low = 1.0f64;
    for _ in 0..cfg.n_steps {
        for c in &mut p {
            let z: f64 = rng.sample(StandardNormal);
            *c += sd * z;
        }
        let next = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        low = low.min(next);
        if cfg.bridge {
            // the Bessel(3) bridge is the Brownian bridge conditioned to stay
            // positive: P[min <= g] = (e^{-2(a-g)(b-g)/dt} - q) / (1 - q)
            // with q = e^{-2ab/dt}
            let gap = 2.0 * (s - low) * (next - low);
            if gap < SKIP_EXPONENT * cfg.dt {
                let q = (-2.0 * s * next / cfg.dt).exp();
                let u = open_uniform(rng) * (1.0 - q) + q;
                let m = 0.5 * (s + next - ((s - next) * (s - next) - 2.0 * cfg.dt * u.ln()).sqrt());
                low = low.min(m.max(f64::MIN_POSITIVE));
            }
        }
        acc.step(1.0 / s, 1.0 / next, next / s);
        if keep {
            path.push(1.0 / next);
        }
        s = next;
    }
    let total = if cfg.tail {
        low.min(open_uniform(rng) * s)
    } else {
        low
    };
    (acc.finish(1.0 / s, 1.0 / low, 1.0 / total), path)
}

/// Simulates `cfg.n_paths` independent paths. Path `k` draws from its own
/// stream of the master seed, so results do not depend on threading.
pub fn simulate(cfg: &SimConfig) -> Result<PathEnsemble> {
    cfg.generator.validate()?;
    if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
        return Err(Error::Parameter(format!(
            "dt must be positive, got {}",
            cfg.dt
        )));
    }
    if cfg.n_paths == 0 || cfg.n_steps == 0 {
        return Err(Error::Parameter(
            "need at least one path and one step".into(),
        ));
    }
    if cfg
        .fractions
        .iter()
        .any(|f| !f.is_finite() || *f < 0.0 || *f > 1.0)
    {
        return Err(Error::Parameter("fractions must lie in [0, 1]".into()));
    }
    let threads = cfg
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, cfg.n_paths);
    let chunk = cfg.n_paths.div_ceil(threads);
    let run = |range: std::ops::Range<usize>| {
        let mut out = Vec::with_capacity(range.len());
        for k in range {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64);
            let keep = k < cfg.keep_paths;
            out.push(match cfg.generator {
                Generator::GbmMartingale { sigma } => simulate_gbm(cfg, sigma, &mut rng, keep),
                Generator::InverseBessel3 => simulate_bessel(cfg, &mut rng, keep),
            });
        }
        out
    };
    let parts: Vec<Vec<(PathSummary, Vec<f64>)>> = if threads == 1 {
        vec![run(0..cfg.n_paths)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..threads)
                .map(|t| {
                    let lo = t * chunk;
                    let hi = ((t + 1) * chunk).min(cfg.n_paths);
                    let run = &run;
                    scope.spawn(move || run(lo..hi))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("worker panicked"))
                .collect()
        })
    };
    let mut summaries = Vec::with_capacity(cfg.n_paths);
    let mut paths = Vec::new();
    for (s, p) in parts.into_iter().flatten() {
        summaries.push(s);
        if !p.is_empty() {
            paths.push(p);
        }
    }
    Ok(PathEnsemble {
        generator: Some(cfg.generator),
        n_paths: cfg.n_paths,
        n_steps: cfg.n_steps,
        dt: cfg.dt,
        seed: cfg.seed,
        bridge: cfg.bridge,
        tail: cfg.tail,
        fractions: cfg.fractions.clone(),
        summaries,
        paths,
    })
}
