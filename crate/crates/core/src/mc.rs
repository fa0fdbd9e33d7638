//! Monte-Carlo oracle: agents following the optimal feedback `alpha = 2A x + B`.
//!
//! Agent `i` draws from its own ChaCha8 stream `(seed, i)`, and agents are
//! grouped into fixed chunks whose moment accumulators are merged in chunk
//! order. Results are therefore bitwise identical for any rayon pool size.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::ValueCoefficients;
use crate::scenario::{GaussianInitial, HalfLineInitial, QuadraticCost};

pub const MIN_AGENTS: usize = 10_000;
pub const MIN_STEPS: usize = 200;
pub const MIN_KDE_SAMPLES: usize = 1_000;
pub const KDE_GRID: usize = 512;
const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    /// `1.06 s n^(-1/5)`, tuned for the density itself.
    Silverman,
    /// `s (4 / (5n))^(1/7)`, the normal-reference choice for the first
    /// derivative, whose zero is the mode.
    DensityDerivative,
    Fixed(f64),
}

impl BandwidthRule {
    pub fn bandwidth(&self, std_dev: f64, n: usize) -> f64 {
        let n = n as f64;
        match *self {
            Self::Silverman => 1.06 * std_dev * n.powf(-0.2),
            Self::DensityDerivative => std_dev * (4.0 / (5.0 * n)).powf(1.0 / 7.0),
            Self::Fixed(h) => h,
        }
    }
}

/// What happens to a path that reaches `x = 0` on the half-line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfLineBoundary {
    /// Killed, including a Brownian-bridge test for crossings between steps.
    /// Matches the density ansatz, which vanishes at the origin.
    Absorbing,
    /// Reflected by `x -> |x|`. Conserves mass.
    Folded,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub n_agents: usize,
    /// Euler–Maruyama steps on `[0, T]`; `dt = T / n_steps`.
    pub n_steps: usize,
    /// Statistics are recorded every this many steps (and at `t = 0`).
    pub record_every: usize,
    pub seed: u64,
    pub bandwidth: BandwidthRule,
}

impl EnsembleConfig {
    /// `dt = T/1000`, 101 record times.
    pub fn new(n_agents: usize, seed: u64) -> Self {
        Self { n_agents, n_steps: 1000, record_every: 10, seed, bandwidth: BandwidthRule::DensityDerivative }
    }

    pub fn with_steps(mut self, n_steps: usize, record_every: usize) -> Self {
        self.n_steps = n_steps;
        self.record_every = record_every;
        self
    }

    pub fn with_bandwidth(mut self, rule: BandwidthRule) -> Self {
        self.bandwidth = rule;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_agents < MIN_AGENTS {
            return Err(Error::InvalidParameter(format!("need n_agents >= {MIN_AGENTS}, got {}", self.n_agents)));
        }
        if self.n_steps < MIN_STEPS {
            return Err(Error::InvalidParameter(format!("need dt <= T/{MIN_STEPS}, got T/{}", self.n_steps)));
        }
        if self.record_every == 0 || self.n_steps % self.record_every != 0 {
            return Err(Error::InvalidParameter(format!(
                "record_every = {} must divide n_steps = {}",
                self.record_every, self.n_steps
            )));
        }
        Ok(())
    }

    fn records(&self) -> usize {
        self.n_steps / self.record_every + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    /// Agents still alive; always `n_agents` on the full line.
    pub alive: Vec<usize>,
    pub mean: Vec<f64>,
    /// Unbiased sample variance of the living agents.
    pub variance: Vec<f64>,
    pub stderr_mean: Vec<f64>,
    pub skewness: Vec<f64>,
    /// `NaN` when fewer than `MIN_KDE_SAMPLES` agents are alive.
    pub mode_kde: Vec<f64>,
    pub bandwidth: Vec<f64>,
    pub n_agents: usize,
    pub seed: u64,
}

impl EnsembleStats {
    pub fn survival(&self) -> Vec<f64> {
        self.alive.iter().map(|&k| k as f64 / self.n_agents as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
    m3: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.merge(&Moments { n: 1.0, mean: x, m2: 0.0, m3: 0.0 });
    }

    fn merge(&mut self, o: &Moments) {
        if o.n == 0.0 {
            return;
        }
        let (na, nb) = (self.n, o.n);
        let n = na + nb;
        let d = o.mean - self.mean;
        let dn = d / n;
        let m3 = self.m3 + o.m3 + d * dn * dn * na * nb * (na - nb) + 3.0 * dn * (na * o.m2 - nb * self.m2);
        self.m2 += o.m2 + d * dn * na * nb;
        self.m3 = m3;
        self.mean += dn * nb;
        self.n = n;
    }
}

enum Drift {
    /// `(A, B)` at the left end of every step.
    Line(Vec<(f64, f64)>),
    HalfLine(Vec<f64>, HalfLineBoundary),
}

enum Start {
    Gaussian { x0: f64, std_dev: f64 },
    Rayleigh { kappa: f64 },
}

struct Simulator {
    drift: Drift,
    start: Start,
    delta: f64,
    dt: f64,
    config: EnsembleConfig,
}

impl Simulator {
    fn full_line(
        value: &ValueCoefficients,
        cost: &QuadraticCost,
        initial: &GaussianInitial,
        config: &EnsembleConfig,
    ) -> Result<Self> {
        config.validate()?;
        value.require_global()?;
        check_delta(cost.delta)?;
        let dt = cost.horizon / config.n_steps as f64;
        let ab = (0..config.n_steps)
            .map(|j| {
                let [a, b, _] = value.at(j as f64 * dt).expect("global value");
                (a, b)
            })
            .collect();
        Ok(Self {
            drift: Drift::Line(ab),
            start: Start::Gaussian { x0: initial.x0, std_dev: initial.variance().sqrt() },
            delta: cost.delta,
            dt,
            config: *config,
        })
    }

    fn half_line(
        value: &ValueCoefficients,
        cost: &QuadraticCost,
        initial: &HalfLineInitial,
        boundary: HalfLineBoundary,
        config: &EnsembleConfig,
    ) -> Result<Self> {
        config.validate()?;
        value.require_global()?;
        check_delta(cost.delta)?;
        if cost.b != 0.0 {
            return Err(Error::InvalidParameter(format!("half-line ensembles need b = 0, got {}", cost.b)));
        }
        let dt = cost.horizon / config.n_steps as f64;
        let a = (0..config.n_steps).map(|j| value.at(j as f64 * dt).expect("global value")[0]).collect();
        Ok(Self {
            drift: Drift::HalfLine(a, boundary),
            start: Start::Rayleigh { kappa: initial.kappa },
            delta: cost.delta,
            dt,
            config: *config,
        })
    }

    fn times(&self) -> Vec<f64> {
        let step = self.dt * self.config.record_every as f64;
        (0..self.config.records()).map(|r| r as f64 * step).collect()
    }

    /// Runs agent `id`; `visit(record, x)` gets `None` once the agent is dead.
    fn path(&self, id: usize, mut visit: impl FnMut(usize, Option<f64>)) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(id as u64);
        let mut x = match self.start {
            Start::Gaussian { x0, std_dev } => x0 + std_dev * rng.sample::<f64, _>(StandardNormal),
            Start::Rayleigh { kappa } => {
                let u: f64 = rng.random();
                (-2.0 * (-u).ln_1p() / kappa).sqrt()
            }
        };
        visit(0, Some(x));
        let noise = self.delta * self.dt.sqrt();
        let kill_scale = -2.0 / (self.delta * self.delta * self.dt);
        let every = self.config.record_every;
        for j in 0..self.config.n_steps {
            let z: f64 = rng.sample(StandardNormal);
            match &self.drift {
                Drift::Line(ab) => {
                    let (a, b) = ab[j];
                    x += (2.0 * a * x + b) * self.dt + noise * z;
                }
                Drift::HalfLine(a, boundary) => {
                    let next = x + 2.0 * a[j] * x * self.dt + noise * z;
                    x = match boundary {
                        HalfLineBoundary::Folded => next.abs(),
                        HalfLineBoundary::Absorbing => {
                            let crossed = next <= 0.0 || {
                                let p = (kill_scale * x * next).exp();
                                p > 0.0 && rng.random::<f64>() < p
                            };
                            if crossed {
                                for r in j / every + 1..self.config.records() {
                                    visit(r, None);
                                }
                                return;
                            }
                            next
                        }
                    };
                }
            }
            if (j + 1) % every == 0 {
                visit((j + 1) / every, Some(x));
            }
        }
    }

    fn run(&self) -> Result<EnsembleStats> {
        let records = self.config.records();
        let n = self.config.n_agents;
        let chunks: Vec<(Vec<Moments>, Vec<Vec<f64>>)> = (0..n.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut moments = vec![Moments::default(); records];
                let mut samples = vec![Vec::with_capacity(CHUNK); records];
                for id in c * CHUNK..((c + 1) * CHUNK).min(n) {
                    self.path(id, |r, x| {
                        if let Some(x) = x {
                            moments[r].push(x);
                            samples[r].push(x);
                        }
                    });
                }
                (moments, samples)
            })
            .collect();
        let mut moments = vec![Moments::default(); records];
        let mut samples = vec![Vec::with_capacity(n); records];
        for (cm, cs) in chunks {
            for r in 0..records {
                moments[r].merge(&cm[r]);
                samples[r].extend_from_slice(&cs[r]);
            }
        }
        let mut stats = EnsembleStats {
            times: self.times(),
            alive: Vec::with_capacity(records),
            mean: Vec::with_capacity(records),
            variance: Vec::with_capacity(records),
            stderr_mean: Vec::with_capacity(records),
            skewness: Vec::with_capacity(records),
            mode_kde: Vec::with_capacity(records),
            bandwidth: Vec::with_capacity(records),
            n_agents: n,
            seed: self.config.seed,
        };
        for (m, s) in moments.iter().zip(&samples) {
            let alive = s.len();
            let variance = if alive > 1 { m.m2 / (m.n - 1.0) } else { f64::NAN };
            let skew = if m.m2 > 0.0 { (m.m3 / m.n) / (m.m2 / m.n).powf(1.5) } else { 0.0 };
            let (mode, h) = if alive >= MIN_KDE_SAMPLES {
                let h = self.config.bandwidth.bandwidth(variance.sqrt(), alive);
                (kde_mode_with_bandwidth(s, h)?, h)
            } else {
                (f64::NAN, f64::NAN)
            };
            stats.alive.push(alive);
            stats.mean.push(if alive > 0 { m.mean } else { f64::NAN });
            stats.variance.push(variance);
            stats.stderr_mean.push((variance / alive as f64).sqrt());
            stats.skewness.push(skew);
            stats.mode_kde.push(mode);
            stats.bandwidth.push(h);
        }
        Ok(stats)
    }

    fn write_paths<W: Write>(&self, out: &mut W, agents: usize) -> std::io::Result<()> {
        let times = self.times();
        writeln!(out, "t,agent_id,x")?;
        // record-major, as in every other time-indexed dump
        let mut rows = vec![Vec::new(); times.len()];
        for id in 0..agents.min(self.config.n_agents) {
            self.path(id, |r, x| {
                if let Some(x) = x {
                    rows[r].push((id, x));
                }
            });
        }
        for (t, row) in times.iter().zip(rows) {
            for (id, x) in row {
                writeln!(out, "{t:.16e},{id},{x:.16e}")?;
            }
        }
        Ok(())
    }
}

fn check_delta(delta: f64) -> Result<()> {
    // zero noise is allowed here: the frozen ensemble is a useful oracle
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("delta must be >= 0, got {delta}")));
    }
    Ok(())
}

/// Euler–Maruyama ensemble on the full line, `X_0 ~ N(x0, lambda/2)`.
pub fn simulate_ensemble(
    value: &ValueCoefficients,
    cost: &QuadraticCost,
    initial: &GaussianInitial,
    config: &EnsembleConfig,
) -> Result<EnsembleStats> {
    Simulator::full_line(value, cost, initial, config)?.run()
}

/// Half-line ensemble with drift `2A x` and `X_0` drawn from
/// `kappa x exp(-kappa x^2/2)`. Moments and modes are over living agents.
pub fn simulate_halfline_ensemble(
    value: &ValueCoefficients,
    cost: &QuadraticCost,
    initial: &HalfLineInitial,
    boundary: HalfLineBoundary,
    config: &EnsembleConfig,
) -> Result<EnsembleStats> {
    Simulator::half_line(value, cost, initial, boundary, config)?.run()
}

/// Dumps the first `agents` paths as `t,agent_id,x`. They are the same
/// paths the ensemble statistics are built from.
pub fn write_sample_paths<W: Write>(
    out: &mut W,
    value: &ValueCoefficients,
    cost: &QuadraticCost,
    initial: &GaussianInitial,
    config: &EnsembleConfig,
    agents: usize,
) -> Result<()> {
    Simulator::full_line(value, cost, initial, config)?
        .write_paths(out, agents)
        .map_err(|e| Error::InvalidParameter(format!("sample dump failed: {e}")))
}

/// Argmax of a Gaussian-kernel density estimate.
pub fn kde_mode(samples: &[f64], rule: BandwidthRule) -> Result<f64> {
    if samples.len() < MIN_KDE_SAMPLES {
        return Err(Error::TooFewSamples { got: samples.len(), required: MIN_KDE_SAMPLES });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    kde_mode_with_bandwidth(samples, rule.bandwidth(var.sqrt(), samples.len()))
}

/// Binned estimate on `KDE_GRID` nodes spanning the samples plus four
/// bandwidths, with a parabolic refinement of the best node.
fn kde_mode_with_bandwidth(samples: &[f64], h: f64) -> Result<f64> {
    if samples.len() < MIN_KDE_SAMPLES {
        return Err(Error::TooFewSamples { got: samples.len(), required: MIN_KDE_SAMPLES });
    }
    let (lo, hi) = samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, u), &x| (l.min(x), u.max(x)));
    if !(hi > lo) || !(h > 0.0) {
        // point mass
        return Ok(lo);
    }
    let (lo, hi) = (lo - 4.0 * h, hi + 4.0 * h);
    let step = (hi - lo) / (KDE_GRID - 1) as f64;
    // linear binning
    let mut bins = vec![0.0; KDE_GRID];
    for &x in samples {
        let s = (x - lo) / step;
        let i = (s.floor() as usize).min(KDE_GRID - 2);
        let w = s - i as f64;
        bins[i] += 1.0 - w;
        bins[i + 1] += w;
    }
    let reach = ((5.0 * h / step).ceil() as usize).min(KDE_GRID - 1);
    let kernel: Vec<f64> = (0..=reach).map(|k| (-0.5 * (k as f64 * step / h).powi(2)).exp()).collect();
    let density: Vec<f64> = (0..KDE_GRID)
        .map(|i| {
            let from = i.saturating_sub(reach);
            let to = (i + reach).min(KDE_GRID - 1);
            (from..=to).map(|j| bins[j] * kernel[i.abs_diff(j)]).sum()
        })
        .collect();
    let best = (0..KDE_GRID).fold(0, |b, i| if density[i] > density[b] { i } else { b });
    let mut x = lo + best as f64 * step;
    if best > 0 && best + 1 < KDE_GRID {
        let (l, c, r) = (density[best - 1], density[best], density[best + 1]);
        let den = l - 2.0 * c + r;
        if den < 0.0 {
            x += 0.5 * step * (l - r) / den;
        }
    }
    Ok(x)
}
