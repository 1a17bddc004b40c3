//! Reproducible random-instance sweeps comparing local search to the exact
//! optimum.
//!
//! Instance `t` of a sweep is drawn from a ChaCha8 stream seeded with
//! `seed + t`: sizes are drawn from the configured ranges (the candidate
//! count is capped at the point count), points are uniform
//! in `[0,1]^d`, and candidate centers are a uniformly random subset of the
//! points.

use std::ops::RangeInclusive;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::error::{Error, Result};
use crate::exact::solve_exact;
use crate::instance::{Instance, OpeningCosts, ProblemKind};
use crate::metric::{Backend, MetricSpace};
use crate::search::{iteration_bound, local_search, PivotRule, SearchConfig, SeedPolicy};

/// Uniform points in `[0,1]^d` with `m` of them also serving as candidates.
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, m: usize, d: usize) -> Backend {
    let points: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect();
    let mut chosen = sample(rng, n, m).into_vec();
    chosen.sort_unstable();
    let centers = chosen.into_iter().map(|j| points[j].clone()).collect();
    Backend::Euclidean { points, centers }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum SweepProblem {
    /// `k` drawn from `1..=min(k_max, m)`; `epsilon` widens the budget.
    KCluster {
        k_max: usize,
        epsilon: f64,
    },
    Ufl {
        opening: f64,
    },
}

/// Swap size: a fixed value, or every candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rho {
    Fixed(usize),
    AllCenters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub instances: usize,
    pub seed: u64,
    pub n: RangeInclusive<usize>,
    pub m: RangeInclusive<usize>,
    pub z_max: usize,
    pub dim: usize,
    pub qs: Vec<f64>,
    pub problem: SweepProblem,
    pub rho: Rho,
    pub epsilon_stop: f64,
    pub pivot: PivotRule,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            instances: 50,
            seed: 0,
            n: 8..=14,
            m: 3..=7,
            z_max: 3,
            dim: 2,
            qs: vec![1.0, 2.0],
            problem: SweepProblem::KCluster { k_max: 3, epsilon: 0.0 },
            rho: Rho::Fixed(1),
            epsilon_stop: 1e-6,
            pivot: PivotRule::FirstImprovement,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.into()));
        if self.n.is_empty() || *self.n.start() == 0 {
            return bad("point-count range must be nonempty and start at >= 1");
        }
        if self.m.is_empty() || *self.m.start() == 0 {
            return bad("candidate-count range must be nonempty and start at >= 1");
        }
        if self.dim == 0 {
            return bad("dimension must be >= 1");
        }
        if self.qs.is_empty() || self.qs.iter().any(|q| !(q.is_finite() && *q >= 1.0)) {
            return bad("exponents must be finite and >= 1");
        }
        if let Rho::Fixed(0) = self.rho {
            return bad("rho must be >= 1");
        }
        match self.problem {
            SweepProblem::KCluster { k_max, epsilon } if k_max == 0 || epsilon.is_nan() || epsilon < 0.0 => {
                bad("k_max must be >= 1 and epsilon >= 0")
            }
            SweepProblem::Ufl { opening } if !(opening.is_finite() && opening >= 0.0) => {
                bad("opening cost must be >= 0")
            }
            _ => Ok(()),
        }
    }
}

/// Instance `t` of the sweep, with its drawn `k` (0 for UFL).
pub fn sweep_instance(cfg: &SweepConfig, t: usize) -> Result<(Instance, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(t as u64));
    let n = rng.gen_range(cfg.n.clone());
    let m = rng.gen_range(cfg.m.clone()).min(n);
    let z = rng.gen_range(0..=cfg.z_max.min(n - 1));
    let q = cfg.qs[rng.gen_range(0..cfg.qs.len())];
    let (kind, k) = match cfg.problem {
        SweepProblem::KCluster { k_max, epsilon } => {
            let k = rng.gen_range(1..=k_max.min(m));
            (ProblemKind::KClusterOut { k, epsilon }, k)
        }
        SweepProblem::Ufl { opening } => (
            ProblemKind::UflOut {
                opening: OpeningCosts::Uniform(opening),
            },
            0,
        ),
    };
    let metric = MetricSpace::new(random_points(&mut rng, n, m, cfg.dim), q)?;
    Ok((Instance::new(metric, kind, z)?, k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub index: usize,
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub budget: usize,
    pub z: usize,
    pub q: f64,
    pub rho: usize,
    pub initial_cost: f64,
    pub ls_cost: f64,
    pub opt_cost: f64,
    /// Optimum with exactly `k` centers, when the budget exceeds `k`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opt_k_cost: Option<f64>,
    pub ratio: f64,
    pub iterations: usize,
    pub iteration_bound: f64,
    /// Kept out of JSON so artifacts are reproducible byte for byte.
    #[serde(skip)]
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub rows: usize,
    pub mean_ratio: f64,
    pub max_ratio: f64,
    pub min_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub rows: Vec<SweepRow>,
    pub summary: SweepSummary,
}

impl SweepReport {
    pub fn to_json(&self) -> String {
        canonical::to_string(self)
    }
}

/// `ls / opt`, with `0 / 0` read as 1.
pub fn cost_ratio(ls: f64, opt: f64) -> f64 {
    if opt > 0.0 {
        ls / opt
    } else if ls <= 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

fn run_row(cfg: &SweepConfig, t: usize) -> Result<SweepRow> {
    let start = Instant::now();
    let (inst, k) = sweep_instance(cfg, t)?;
    let m = inst.num_centers();
    let rho = match cfg.rho {
        Rho::Fixed(r) => r,
        Rho::AllCenters => m,
    };
    let search = SearchConfig {
        rho,
        epsilon_stop: cfg.epsilon_stop,
        pivot: cfg.pivot,
        seed: SeedPolicy::GreedyFarthest,
        ..SearchConfig::default()
    };
    let trace = local_search(&inst, &search)?;
    let opt = solve_exact(&inst, None)?;
    let opt_k_cost = match inst.kind() {
        ProblemKind::KClusterOut { k, .. } if inst.budget() > *k => {
            let strict = inst.with_kind(ProblemKind::KClusterOut { k: *k, epsilon: 0.0 })?;
            Some(solve_exact(&strict, None)?.cost)
        }
        _ => None,
    };
    Ok(SweepRow {
        index: t,
        seed: cfg.seed.wrapping_add(t as u64),
        n: inst.num_points(),
        m,
        k,
        budget: inst.budget(),
        z: inst.z(),
        q: inst.q(),
        rho,
        initial_cost: trace.initial_cost,
        ls_cost: trace.final_cost(),
        opt_cost: opt.cost,
        opt_k_cost,
        ratio: cost_ratio(trace.final_cost(), opt.cost),
        iterations: trace.iterations(),
        iteration_bound: iteration_bound(trace.initial_cost, trace.final_cost(), cfg.epsilon_stop, m),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs every instance of the sweep concurrently; rows come back in index
/// order.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let rows = (0..cfg.instances)
        .into_par_iter()
        .map(|t| run_row(cfg, t))
        .collect::<Result<Vec<_>>>()?;
    let ratios = rows.iter().map(|r| r.ratio);
    let summary = SweepSummary {
        rows: rows.len(),
        mean_ratio: if rows.is_empty() {
            0.0
        } else {
            ratios.clone().sum::<f64>() / rows.len() as f64
        },
        max_ratio: ratios.clone().fold(f64::NEG_INFINITY, f64::max),
        min_ratio: ratios.fold(f64::INFINITY, f64::min),
    };
    Ok(SweepReport {
        config: cfg.clone(),
        rows,
        summary,
    })
}
