//! Exact event-driven simulation of the branching process with immigration.
//!
//! In state `X` the next event arrives at rate `X·(-a_1) + (-b_0)`. A
//! branching event replaces one individual by `j ≠ 1` individuals with
//! probability `a_j/(-a_1)`; an immigration event adds `j ≥ 1` individuals
//! with probability `b_j/(-b_0)`. Replicate `k` draws from ChaCha stream `k`
//! of the configured seed, so results do not depend on scheduling.

use crate::laws::{IntensityLaw, ModelSpec};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use std::fmt::Write as _;

pub const DEFAULT_STATE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: ModelSpec,
    pub initial_state: u64,
    pub horizon: f64,
    pub replicates: u64,
    pub seed: u64,
    pub state_cap: u64,
}

impl SimConfig {
    pub fn new(model: ModelSpec, initial_state: u64, horizon: f64, replicates: u64, seed: u64) -> Self {
        Self {
            model,
            initial_state,
            horizon,
            replicates,
            seed,
            state_cap: DEFAULT_STATE_CAP,
        }
    }

    fn check(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicates must be at least 1".into()));
        }
        if self.state_cap < self.initial_state + 1 {
            return Err(Error::InvalidParameter(format!(
                "state cap {} must exceed the initial state {}",
                self.state_cap, self.initial_state
            )));
        }
        if !(self.horizon >= 0.0) || !self.horizon.is_finite() {
            return Err(Error::Domain {
                what: "horizon",
                value: self.horizon,
            });
        }
        Ok(())
    }
}

/// Jump tables built once per model.
#[derive(Debug, Clone)]
pub struct EventSampler {
    branch_rate: f64,
    immigration_rate: f64,
    /// Net change `j - 1` for each branching outcome.
    branch_delta: Vec<i64>,
    branch: WeightedAliasIndex<f64>,
    immigration_size: Vec<u64>,
    immigration: WeightedAliasIndex<f64>,
}

impl EventSampler {
    pub fn new(model: &ModelSpec) -> Result<Self> {
        let a = model.offspring().coefficients();
        let b = model.immigration().coefficients();
        for report in [model.offspring().validate(&Default::default()), model.immigration().validate(&Default::default())] {
            if !report.passed() {
                return Err(Error::Validation(format!("{}: {}", report.law, report.failures().join(", "))));
            }
        }
        let (branch_delta, branch_w): (Vec<i64>, Vec<f64>) = a
            .iter()
            .enumerate()
            .filter(|(j, v)| *j != 1 && **v > 0.0)
            .map(|(j, v)| (j as i64 - 1, *v))
            .unzip();
        let (immigration_size, imm_w): (Vec<u64>, Vec<f64>) = b
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, v)| **v > 0.0)
            .map(|(j, v)| (j as u64, *v))
            .unzip();
        let alias = |w: Vec<f64>| WeightedAliasIndex::new(w).map_err(|e| Error::InvalidParameter(format!("alias table: {e}")));
        Ok(Self {
            branch_rate: -a[1],
            immigration_rate: -b[0],
            branch_delta,
            branch: alias(branch_w)?,
            immigration_size,
            immigration: alias(imm_w)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathOutcome {
    pub state: u64,
    pub capped: bool,
    pub events: u64,
}

/// One path from `initial_state` to `horizon`.
pub fn simulate_path<R: Rng + ?Sized>(sampler: &EventSampler, initial_state: u64, horizon: f64, state_cap: u64, rng: &mut R) -> PathOutcome {
    let mut x = initial_state;
    let mut t = 0.0;
    let mut events = 0;
    loop {
        let branch = x as f64 * sampler.branch_rate;
        let rate = branch + sampler.immigration_rate;
        if rate <= 0.0 {
            break;
        }
        let wait: f64 = Exp1.sample(rng);
        t += wait / rate;
        if t > horizon {
            break;
        }
        events += 1;
        if rng.random::<f64>() * rate < branch {
            let delta = sampler.branch_delta[sampler.branch.sample(rng)];
            x = (x as i64 + delta) as u64;
        } else {
            x += sampler.immigration_size[sampler.immigration.sample(rng)];
        }
        if x >= state_cap {
            return PathOutcome {
                state: x,
                capped: true,
                events,
            };
        }
    }
    PathOutcome {
        state: x,
        capped: false,
        events,
    }
}

/// The RNG of replicate `k`.
pub fn replicate_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimResult {
    /// `counts[j]` replicates ended in state `j`.
    pub counts: Vec<u64>,
    /// Replicates that reached the state cap, excluded from `counts`.
    pub capped: u64,
    pub replicates: u64,
    pub events: u64,
    pub rng_streams_used: u64,
}

impl SimResult {
    /// Replicates that finished below the cap.
    pub fn kept(&self) -> u64 {
        self.replicates - self.capped
    }

    pub fn pmf(&self) -> Vec<f64> {
        let n = self.kept() as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }

    /// Binomial standard errors `√(p̂(1-p̂)/n)`.
    pub fn standard_errors(&self) -> Vec<f64> {
        let n = self.kept() as f64;
        self.pmf().iter().map(|p| (p * (1.0 - p) / n).sqrt()).collect()
    }

    pub fn capped_fraction(&self) -> f64 {
        self.capped as f64 / self.replicates as f64
    }

    pub fn p_hat(&self, j: usize) -> f64 {
        self.counts.get(j).map_or(0.0, |&c| c as f64 / self.kept() as f64)
    }

    pub fn se(&self, j: usize) -> f64 {
        let p = self.p_hat(j);
        (p * (1.0 - p) / self.kept() as f64).sqrt()
    }
}

#[derive(Default)]
struct Tally {
    counts: Vec<u64>,
    capped: u64,
    events: u64,
}

impl Tally {
    fn add(mut self, out: PathOutcome) -> Self {
        self.events += out.events;
        if out.capped {
            self.capped += 1;
        } else {
            let j = out.state as usize;
            if self.counts.len() <= j {
                self.counts.resize(j + 1, 0);
            }
            self.counts[j] += 1;
        }
        self
    }

    fn merge(mut self, other: Self) -> Self {
        if self.counts.len() < other.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.capped += other.capped;
        self.events += other.events;
        self
    }
}

/// Replicate-averaged indicators of the state at `horizon`.
pub fn estimate_pmf(config: &SimConfig) -> Result<SimResult> {
    config.check()?;
    let sampler = EventSampler::new(&config.model)?;
    let tally = (0..config.replicates)
        .into_par_iter()
        .fold(Tally::default, |acc, k| {
            let mut rng = replicate_rng(config.seed, k);
            acc.add(simulate_path(&sampler, config.initial_state, config.horizon, config.state_cap, &mut rng))
        })
        .reduce(Tally::default, Tally::merge);
    if tally.capped == config.replicates {
        return Err(Error::NoConvergence("every replicate reached the state cap".into()));
    }
    Ok(SimResult {
        counts: tally.counts,
        capped: tally.capped,
        replicates: config.replicates,
        events: tally.events,
        rng_streams_used: config.replicates,
    })
}

/// `(j, p_hat, se, n)` for every state observed.
pub fn pmf_table(result: &SimResult) -> String {
    let mut out = String::from("j,p_hat,se,n\n");
    let n = result.kept();
    for (j, (p, se)) in result.pmf().iter().zip(result.standard_errors()).enumerate() {
        if result.counts[j] > 0 {
            let _ = writeln!(out, "{j},{p:e},{se:e},{n}");
        }
    }
    out
}
