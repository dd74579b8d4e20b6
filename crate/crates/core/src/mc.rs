//! Monte Carlo simulation of group-sequential trials.
//!
//! Replicates are split into fixed-size chunks; chunk `c` draws from the
//! ChaCha stream `c` of the configured seed, so estimates do not depend on the
//! number of worker threads. Per-chunk tallies are merged in chunk order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::delay::DelayQuery;
use crate::design::GroupSequentialDesign;
use crate::error::{Error, Result};
use crate::recruitment::pipeline_counts;

const CHUNK: u64 = 1 << 14;

/// How test statistics are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimulationMode {
    /// Independent score increments with the exact canonical covariance.
    #[default]
    Increments,
    /// Individual responses `X_ij ~ N(μ_j, σ_j²)` with per-arm group sizes
    /// rounded up to whole participants.
    Participants,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub replicates: u64,
    pub seed: u64,
    /// Effect to simulate under; the design's evaluation effect when `None`.
    pub mu: Option<f64>,
    pub delay: Option<DelayQuery>,
    pub mode: SimulationMode,
    /// Worker threads; rayon's global pool when `None`.
    pub threads: Option<usize>,
}

impl SimConfig {
    pub fn new(replicates: u64, seed: u64) -> Self {
        Self {
            replicates,
            seed,
            mu: None,
            delay: None,
            mode: SimulationMode::Increments,
            threads: None,
        }
    }

    pub fn mu(mut self, mu: f64) -> Self {
        self.mu = Some(mu);
        self
    }

    pub fn delay(mut self, query: DelayQuery) -> Self {
        self.delay = Some(query);
        self
    }

    pub fn mode(mut self, mode: SimulationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }
}

/// A Monte Carlo estimate and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    fn proportion(count: u64, n: u64) -> Self {
        let p = count as f64 / n as f64;
        Self {
            mean: p,
            se: (p * (1.0 - p) / n as f64).sqrt(),
        }
    }

    fn from_sums(sum: f64, sum_sq: f64, n: u64) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 {
            ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
        } else {
            0.0
        };
        Self {
            mean,
            se: (var / nf).sqrt(),
        }
    }

    /// Whether `value` lies within `k` standard errors of the estimate.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.se
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub replicates: u64,
    pub mu: f64,
    pub accept: Vec<Estimate>,
    pub reject: Vec<Estimate>,
    pub sample_size: Estimate,
    /// Sample size including pipeline participants, when a delay was given.
    pub sample_size_delay: Option<Estimate>,
    /// Trial duration in months, when a delay was given.
    pub duration: Option<Estimate>,
}

#[derive(Default, Clone)]
struct Tally {
    accept: Vec<u64>,
    reject: Vec<u64>,
    n: (f64, f64),
    n_delay: (f64, f64),
    time: (f64, f64),
}

impl Tally {
    fn new(k: usize) -> Self {
        Self {
            accept: vec![0; k],
            reject: vec![0; k],
            ..Default::default()
        }
    }

    fn merge(&mut self, other: &Tally) {
        for (a, b) in self.accept.iter_mut().zip(&other.accept) {
            *a += b;
        }
        for (a, b) in self.reject.iter_mut().zip(&other.reject) {
            *a += b;
        }
        for (a, b) in [
            (&mut self.n, other.n),
            (&mut self.n_delay, other.n_delay),
            (&mut self.time, other.time),
        ] {
            a.0 += b.0;
            a.1 += b.1;
        }
    }
}

/// Everything a worker needs, with per-stage outcomes precomputed.
struct Plan {
    efficacy: Vec<f64>,
    futility: Vec<f64>,
    /// Stage-wise sizes of the total, delayed total and completion time.
    sizes: Vec<f64>,
    sizes_delay: Vec<f64>,
    times: Vec<f64>,
    kind: PlanKind,
}

enum PlanKind {
    Increments {
        sqrt_info: Vec<f64>,
        increment_mean: Vec<f64>,
        increment_sd: Vec<f64>,
    },
    Participants {
        /// Per-arm cumulative group sizes.
        groups: Vec<(u64, u64)>,
        mu: f64,
        sd: (f64, f64),
    },
}

impl Plan {
    fn new(design: &GroupSequentialDesign, config: &SimConfig, mu: f64) -> Result<Self> {
        let b = design.boundaries();
        let sizes = design.sample_sizes().to_vec();
        let (sizes_delay, times) = match &config.delay {
            Some(q) => {
                q.validate()?;
                let model = q.model_for(design)?;
                let profile = pipeline_counts(design, &model, q.delay)?;
                let inflated = sizes
                    .iter()
                    .zip(&profile.pipeline)
                    .map(|(n, p)| n + p)
                    .collect();
                let times = profile
                    .recruit_time
                    .iter()
                    .map(|t| t + q.delay + q.interim_overhead)
                    .collect();
                (inflated, times)
            }
            None => (sizes.clone(), vec![0.0; sizes.len()]),
        };
        let kind = match config.mode {
            SimulationMode::Increments => {
                let info = design.info();
                let mut prev = 0.0;
                let mut increment_mean = Vec::with_capacity(info.len());
                let mut increment_sd = Vec::with_capacity(info.len());
                for &i in info {
                    increment_mean.push(mu * (i - prev));
                    increment_sd.push((i - prev).sqrt());
                    prev = i;
                }
                PlanKind::Increments {
                    sqrt_info: info.iter().map(|i| i.sqrt()).collect(),
                    increment_mean,
                    increment_sd,
                }
            }
            SimulationMode::Participants => {
                let groups = design
                    .per_arm()
                    .iter()
                    .map(|&(a, b)| (a.ceil() as u64, b.ceil() as u64))
                    .collect();
                let spec = design.spec();
                PlanKind::Participants {
                    groups,
                    mu,
                    sd: (spec.sigma0_sq.sqrt(), spec.sigma1_sq.sqrt()),
                }
            }
        };
        Ok(Self {
            efficacy: b.efficacy.clone(),
            futility: b.futility.clone(),
            sizes,
            sizes_delay,
            times,
            kind,
        })
    }

    fn run_chunk(&self, seed: u64, chunk: u64, count: u64) -> Tally {
        let k_max = self.efficacy.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk);
        let mut tally = Tally::new(k_max);
        for _ in 0..count {
            let (stage, rejected) = self.one_trial(&mut rng);
            if rejected {
                tally.reject[stage] += 1;
            } else {
                tally.accept[stage] += 1;
            }
            for (acc, v) in [
                (&mut tally.n, self.sizes[stage]),
                (&mut tally.n_delay, self.sizes_delay[stage]),
                (&mut tally.time, self.times[stage]),
            ] {
                acc.0 += v;
                acc.1 += v * v;
            }
        }
        tally
    }

    /// Returns the stopping stage and whether H0 was rejected there.
    fn one_trial(&self, rng: &mut ChaCha8Rng) -> (usize, bool) {
        let k_max = self.efficacy.len();
        match &self.kind {
            PlanKind::Increments {
                sqrt_info,
                increment_mean,
                increment_sd,
            } => {
                let mut score = 0.0;
                for k in 0..k_max {
                    let x: f64 = rng.sample(StandardNormal);
                    score += increment_mean[k] + increment_sd[k] * x;
                    let z = score / sqrt_info[k];
                    if let Some(out) = self.decide(k, z) {
                        return out;
                    }
                }
                unreachable!("final stage always decides")
            }
            PlanKind::Participants { groups, mu, sd } => {
                let (mut sum0, mut sum1) = (0.0, 0.0);
                let (mut n0, mut n1) = (0u64, 0u64);
                for (k, &(g0, g1)) in groups.iter().enumerate() {
                    for _ in n0..g0 {
                        let x: f64 = rng.sample(StandardNormal);
                        sum0 += sd.0 * x;
                    }
                    for _ in n1..g1 {
                        let x: f64 = rng.sample(StandardNormal);
                        sum1 += mu + sd.1 * x;
                    }
                    n0 = g0;
                    n1 = g1;
                    let (a, b) = (n0 as f64, n1 as f64);
                    let se = (sd.0 * sd.0 / a + sd.1 * sd.1 / b).sqrt();
                    let z = (sum1 / b - sum0 / a) / se;
                    if let Some(out) = self.decide(k, z) {
                        return out;
                    }
                }
                unreachable!("final stage always decides")
            }
        }
    }

    #[inline]
    fn decide(&self, k: usize, z: f64) -> Option<(usize, bool)> {
        if z > self.efficacy[k] {
            Some((k, true))
        } else if z <= self.futility[k] || k + 1 == self.efficacy.len() {
            Some((k, false))
        } else {
            None
        }
    }
}

/// Runs `f` on a dedicated pool of `threads` workers, or on rayon's global pool.
pub(crate) fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        Some(0) => Err(Error::invalid("thread count must be positive")),
        Some(n) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?
            .install(f)),
        None => Ok(f()),
    }
}

/// Simulates `config.replicates` trials of `design`.
pub fn simulate(design: &GroupSequentialDesign, config: &SimConfig) -> Result<SimulationReport> {
    if config.replicates == 0 {
        return Err(Error::invalid("at least one replicate is required"));
    }
    let mu = config
        .mu
        .unwrap_or_else(|| design.spec().evaluation_effect());
    if !mu.is_finite() {
        return Err(Error::invalid("simulation effect must be finite"));
    }
    let plan = Plan::new(design, config, mu)?;

    let chunks: Vec<(u64, u64)> = (0..config.replicates.div_ceil(CHUNK))
        .map(|c| (c, CHUNK.min(config.replicates - c * CHUNK)))
        .collect();
    let work = || -> Vec<Tally> {
        chunks
            .par_iter()
            .map(|&(c, count)| plan.run_chunk(config.seed, c, count))
            .collect()
    };
    let tallies = in_pool(config.threads, work)?;

    let mut total = Tally::new(design.stages());
    for t in &tallies {
        total.merge(t);
    }
    let n = config.replicates;
    Ok(SimulationReport {
        replicates: n,
        mu,
        accept: total
            .accept
            .iter()
            .map(|&c| Estimate::proportion(c, n))
            .collect(),
        reject: total
            .reject
            .iter()
            .map(|&c| Estimate::proportion(c, n))
            .collect(),
        sample_size: Estimate::from_sums(total.n.0, total.n.1, n),
        sample_size_delay: config
            .delay
            .map(|_| Estimate::from_sums(total.n_delay.0, total.n_delay.1, n)),
        duration: config
            .delay
            .map(|_| Estimate::from_sums(total.time.0, total.time.1, n)),
    })
}
