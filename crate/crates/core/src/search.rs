//! Multiswap local search for UFL-out and k-median/k-means-out.
//!
//! One driver serves both problem families. A move closes up to `rho` open
//! centers and opens up to `rho` closed ones; it is accepted only when the new
//! cost is at most `(1 - epsilon_stop / |C|)` times the current cost, which
//! bounds the number of accepted moves polynomially.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::cost::{apply_swap, evaluate, swap_cost, Solution, SolutionDoc, SwapMove};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::metric::CenterId;
use crate::tol;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PivotRule {
    FirstImprovement,
    BestImprovement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SeedPolicy {
    /// Farthest-point growth from the best single center.
    GreedyFarthest,
    /// Uniformly random subset drawn from the given rng seed.
    Random(u64),
    Explicit(Vec<CenterId>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub rho: usize,
    pub epsilon_stop: f64,
    pub pivot: PivotRule,
    pub max_iterations: usize,
    pub seed: SeedPolicy,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            rho: 1,
            epsilon_stop: 1e-6,
            pivot: PivotRule::FirstImprovement,
            max_iterations: 100_000,
            seed: SeedPolicy::GreedyFarthest,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rho == 0 {
            return Err(Error::Config("rho must be >= 1".into()));
        }
        if !(self.epsilon_stop.is_finite() && self.epsilon_stop > 0.0) {
            return Err(Error::Config("epsilon_stop must be finite and > 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    LocalOptimum,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub iteration: usize,
    #[serde(rename = "move")]
    pub mv: SwapMove,
    pub cost_before: f64,
    pub cost_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchTrace {
    pub initial_cost: f64,
    pub steps: Vec<Step>,
    pub solution: Solution,
    pub termination: Termination,
}

#[derive(Serialize)]
struct TraceDoc<'a> {
    initial_cost: f64,
    iterations: &'a [Step],
    solution: SolutionDoc,
    termination: Termination,
}

impl SearchTrace {
    pub fn final_cost(&self) -> f64 {
        self.solution.cost()
    }

    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn to_json(&self) -> String {
        canonical::to_string(&TraceDoc {
            initial_cost: self.initial_cost,
            iterations: &self.steps,
            solution: self.solution.to_doc(),
            termination: self.termination,
        })
    }
}

/// Largest number of accepted moves compatible with the acceptance rule:
/// `log(c0 / c_final) / log(1 / (1 - epsilon / |C|)) + 1`.
pub fn iteration_bound(initial_cost: f64, final_cost: f64, epsilon_stop: f64, num_centers: usize) -> f64 {
    if initial_cost <= 0.0 {
        return 1.0;
    }
    if final_cost <= 0.0 {
        return f64::INFINITY;
    }
    let shrink = 1.0 - epsilon_stop / num_centers as f64;
    if shrink <= 0.0 {
        return f64::INFINITY;
    }
    (initial_cost / final_cost).ln() / (1.0 / shrink).ln() + 1.0
}

/// Lazily enumerates every feasible `(P, Q)` with `|P|, |Q| <= rho`,
/// `P ⊆ C - S`, `Q ⊆ S`, nonempty result within the budget, ordered by
/// `(|P| + |Q|, P ids, Q ids)`. The empty move is not produced.
pub struct MoveIter {
    open: Vec<CenterId>,
    closed: Vec<CenterId>,
    rho: usize,
    budget: usize,
    t: usize,
    t_max: usize,
    p: Vec<usize>,
    p_fresh: bool,
    q: Vec<usize>,
    q_active: bool,
}

impl MoveIter {
    pub fn new(open: &[CenterId], num_centers: usize, rho: usize, budget: usize) -> Self {
        let mut is_open = vec![false; num_centers];
        for i in open {
            is_open[i.0] = true;
        }
        let mut open = open.to_vec();
        open.sort_unstable();
        let closed = (0..num_centers).filter(|&i| !is_open[i]).map(CenterId).collect();
        MoveIter {
            open,
            closed,
            rho,
            budget,
            t: 1,
            t_max: 2 * rho,
            p: Vec::new(),
            p_fresh: true,
            q: Vec::new(),
            q_active: false,
        }
    }

    fn p_bounds(&self) -> (usize, usize) {
        (self.t.saturating_sub(self.rho), self.rho.min(self.t))
    }

    /// Next subset of `closed` in preorder (lexicographic over sorted sequences).
    fn advance_p(&mut self) -> bool {
        if self.p_fresh {
            self.p_fresh = false;
            return true;
        }
        let c = self.closed.len();
        let (_, hi) = self.p_bounds();
        if self.p.len() < hi {
            let next = self.p.last().map_or(0, |&x| x + 1);
            if next < c {
                self.p.push(next);
                return true;
            }
        }
        while let Some(x) = self.p.pop() {
            if x + 1 < c {
                self.p.push(x + 1);
                return true;
            }
        }
        false
    }

    fn advance_q(&mut self) {
        let r = self.q.len();
        let o = self.open.len();
        for k in (0..r).rev() {
            if self.q[k] < o - r + k {
                self.q[k] += 1;
                for l in k + 1..r {
                    self.q[l] = self.q[l - 1] + 1;
                }
                return;
            }
        }
        self.q_active = false;
    }
}

impl Iterator for MoveIter {
    type Item = SwapMove;

    fn next(&mut self) -> Option<SwapMove> {
        loop {
            if self.q_active {
                let mv = SwapMove {
                    add: self.p.iter().map(|&x| self.closed[x]).collect(),
                    remove: self.q.iter().map(|&x| self.open[x]).collect(),
                };
                self.advance_q();
                return Some(mv);
            }
            if self.t > self.t_max {
                return None;
            }
            if !self.advance_p() {
                self.t += 1;
                self.p.clear();
                self.p_fresh = true;
                continue;
            }
            let (lo, hi) = self.p_bounds();
            let p = self.p.len();
            if p < lo || p > hi {
                continue;
            }
            let r = self.t - p;
            let o = self.open.len();
            if r > o {
                continue;
            }
            let new_size = o - r + p;
            if new_size == 0 || new_size > self.budget {
                continue;
            }
            self.q = (0..r).collect();
            self.q_active = true;
        }
    }
}

/// All feasible moves around `sol`, see [`MoveIter`].
pub fn enumerate_moves(inst: &Instance, sol: &Solution, rho: usize) -> MoveIter {
    MoveIter::new(sol.open(), inst.num_centers(), rho, inst.budget())
}

const SCAN_BATCH: usize = 512;

/// Scans moves in enumeration order, evaluating batches in parallel. Returns
/// the first (or best) move whose new cost satisfies `accept`, with that cost.
/// The answer does not depend on scheduling.
fn scan(
    inst: &Instance,
    sol: &Solution,
    moves: MoveIter,
    pivot: PivotRule,
    accept: impl Fn(f64) -> bool + Sync,
) -> Result<Option<(SwapMove, f64)>> {
    let mut best: Option<(SwapMove, f64)> = None;
    let mut moves = moves.peekable();
    while moves.peek().is_some() {
        let batch: Vec<SwapMove> = moves.by_ref().take(SCAN_BATCH).collect();
        let costs: Vec<f64> = if batch.len() >= 64 {
            batch
                .par_iter()
                .map(|mv| swap_cost(inst, sol, mv))
                .collect::<Result<_>>()?
        } else {
            batch.iter().map(|mv| swap_cost(inst, sol, mv)).collect::<Result<_>>()?
        };
        match pivot {
            PivotRule::FirstImprovement => {
                if let Some(k) = costs.iter().position(|&c| accept(c)) {
                    let c = costs[k];
                    return Ok(Some((batch.into_iter().nth(k).unwrap(), c)));
                }
            }
            PivotRule::BestImprovement => {
                for (mv, c) in batch.into_iter().zip(costs) {
                    if accept(c) && best.as_ref().is_none_or(|(_, b)| c < *b) {
                        best = Some((mv, c));
                    }
                }
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Certificate {
    Certified,
    Counterexample { mv: SwapMove, delta: f64 },
}

impl Certificate {
    pub fn is_certified(&self) -> bool {
        matches!(self, Certificate::Certified)
    }
}

/// Exhaustively checks every move of size at most `rho` for a strict
/// improvement beyond the shared tolerance. Reports the first improving move
/// in enumeration order.
pub fn certify_local_optimum(inst: &Instance, sol: &Solution, rho: usize) -> Result<Certificate> {
    let cost = sol.cost();
    let limit = cost - tol::tolerance(cost);
    certify_with(inst, sol, rho, |c| c < limit)
}

/// Like [`certify_local_optimum`] but using the search's acceptance rule:
/// a move counts only if it reaches `(1 - epsilon_stop / |C|) * cost`.
pub fn certify_with_slack(inst: &Instance, sol: &Solution, rho: usize, epsilon_stop: f64) -> Result<Certificate> {
    let threshold = (1.0 - epsilon_stop / inst.num_centers() as f64) * sol.cost();
    certify_with(inst, sol, rho, |c| c <= threshold)
}

fn certify_with(
    inst: &Instance,
    sol: &Solution,
    rho: usize,
    improving: impl Fn(f64) -> bool + Sync,
) -> Result<Certificate> {
    let found = scan(
        inst,
        sol,
        enumerate_moves(inst, sol, rho),
        PivotRule::FirstImprovement,
        improving,
    )?;
    Ok(match found {
        None => Certificate::Certified,
        Some((mv, c)) => Certificate::Counterexample {
            mv,
            delta: c - sol.cost(),
        },
    })
}

fn farthest_seed(inst: &Instance) -> Result<Vec<CenterId>> {
    let n = inst.num_points();
    let m = inst.num_centers();
    let metric = inst.metric();
    let first = (0..m)
        .map(|i| ((0..n).map(|j| metric.dist(j, i)).sum::<f64>(), i))
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, i)| CenterId(i))
        .ok_or(Error::EmptyOpenSet)?;
    let mut open = vec![first];
    let mut reach: Vec<f64> = (0..n).map(|j| metric.dist(j, first.0)).collect();
    let target = inst.budget().min(m);
    let mut current = if inst.is_ufl() {
        evaluate(inst, &open)?.cost()
    } else {
        0.0
    };
    while open.len() < target {
        let far = (0..n)
            .max_by(|&a, &b| reach[a].total_cmp(&reach[b]).then(b.cmp(&a)))
            .expect("instance has points");
        let next = (0..m)
            .filter(|i| !open.contains(&CenterId(*i)))
            .min_by(|&a, &b| metric.dist(far, a).total_cmp(&metric.dist(far, b)).then(a.cmp(&b)))
            .map(CenterId)
            .expect("closed center available");
        if inst.is_ufl() {
            let mut grown = open.clone();
            grown.push(next);
            let c = evaluate(inst, &grown)?.cost();
            if c >= current {
                break;
            }
            current = c;
        }
        open.push(next);
        for (j, r) in reach.iter_mut().enumerate() {
            *r = r.min(metric.dist(j, next.0));
        }
    }
    open.sort_unstable();
    Ok(open)
}

fn random_seed(inst: &Instance, seed: u64) -> Vec<CenterId> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = inst.num_centers();
    let size = if inst.is_ufl() {
        rng.gen_range(1..=m)
    } else {
        inst.budget().min(m)
    };
    let mut open: Vec<CenterId> = sample(&mut rng, m, size).into_iter().map(CenterId).collect();
    open.sort_unstable();
    open
}

/// Initial open set for the given policy.
pub fn seed_solution(inst: &Instance, policy: &SeedPolicy) -> Result<Vec<CenterId>> {
    match policy {
        SeedPolicy::GreedyFarthest => farthest_seed(inst),
        SeedPolicy::Random(seed) => Ok(random_seed(inst, *seed)),
        SeedPolicy::Explicit(open) => Ok(open.clone()),
    }
}

/// Runs multiswap local search until no move meets the acceptance threshold
/// or the iteration cap is reached.
pub fn local_search(inst: &Instance, cfg: &SearchConfig) -> Result<SearchTrace> {
    cfg.validate()?;
    let seed = seed_solution(inst, &cfg.seed)?;
    let mut sol = evaluate(inst, &seed)?;
    let initial_cost = sol.cost();
    let shrink = 1.0 - cfg.epsilon_stop / inst.num_centers() as f64;
    let mut steps = Vec::new();
    let termination = loop {
        let cost = sol.cost();
        if cost <= 0.0 {
            break Termination::LocalOptimum;
        }
        if steps.len() >= cfg.max_iterations {
            break Termination::IterationCap;
        }
        let threshold = shrink * cost;
        let moves = enumerate_moves(inst, &sol, cfg.rho);
        match scan(inst, &sol, moves, cfg.pivot, |c| c <= threshold)? {
            None => break Termination::LocalOptimum,
            Some((mv, _)) => {
                let next = apply_swap(inst, &sol, &mv)?;
                log::debug!(
                    "iteration {}: {:?} cost {} -> {}",
                    steps.len() + 1,
                    mv,
                    cost,
                    next.cost()
                );
                steps.push(Step {
                    iteration: steps.len() + 1,
                    mv,
                    cost_before: cost,
                    cost_after: next.cost(),
                });
                sol = next;
            }
        }
    };
    Ok(SearchTrace {
        initial_cost,
        steps,
        solution: sol,
        termination,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{OpeningCosts, ProblemKind};
    use crate::metric::{Backend, MetricSpace};
    use std::collections::BTreeSet;

    fn line_instance(kind: ProblemKind, m: usize, z: usize) -> Instance {
        let points: Vec<Vec<f64>> = (0..12).map(|x| vec![x as f64 * 0.7]).collect();
        let centers: Vec<Vec<f64>> = (0..m).map(|x| vec![x as f64 * 1.3]).collect();
        Instance::new(
            MetricSpace::new(Backend::Euclidean { points, centers }, 1.0).unwrap(),
            kind,
            z,
        )
        .unwrap()
    }

    fn ufl(m: usize) -> Instance {
        line_instance(
            ProblemKind::UflOut {
                opening: OpeningCosts::Uniform(1.0),
            },
            m,
            1,
        )
    }

    #[test]
    fn rho_one_counts() {
        let inst = ufl(5);
        let sol = evaluate(&inst, &[CenterId(1), CenterId(3)]).unwrap();
        let moves: Vec<SwapMove> = enumerate_moves(&inst, &sol, 1).collect();
        let adds = moves.iter().filter(|m| m.add.len() == 1 && m.remove.is_empty()).count();
        let drops = moves.iter().filter(|m| m.add.is_empty() && m.remove.len() == 1).count();
        let swaps = moves.iter().filter(|m| m.add.len() == 1 && m.remove.len() == 1).count();
        assert_eq!((adds, drops, swaps, moves.len()), (3, 2, 6, 11));
    }

    #[test]
    fn never_empties_the_open_set() {
        let inst = ufl(4);
        let sol = evaluate(&inst, &[CenterId(2)]).unwrap();
        assert!(enumerate_moves(&inst, &sol, 2).all(|m| !(m.remove.len() == 1 && m.add.is_empty())));
    }

    /// Independent counter: every pair of subsets by brute force over bitmasks.
    fn brute_moves(open: &[usize], m: usize, rho: usize, budget: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
        let mut out = Vec::new();
        for pm in 0u32..(1 << m) {
            for qm in 0u32..(1 << m) {
                let p: Vec<usize> = (0..m).filter(|i| pm >> i & 1 == 1).collect();
                let q: Vec<usize> = (0..m).filter(|i| qm >> i & 1 == 1).collect();
                if p.iter().any(|i| open.contains(i)) || q.iter().any(|i| !open.contains(i)) {
                    continue;
                }
                if p.len() > rho || q.len() > rho || p.len() + q.len() == 0 {
                    continue;
                }
                let size = open.len() - q.len() + p.len();
                if size == 0 || size > budget {
                    continue;
                }
                out.push((p, q));
            }
        }
        out.sort_by(|a, b| (a.0.len() + a.1.len(), &a.0, &a.1).cmp(&(b.0.len() + b.1.len(), &b.0, &b.1)));
        out
    }

    #[test]
    fn enumeration_matches_brute_force() {
        for (m, open, rho, budget) in [
            (6, vec![0, 2, 4], 2, 6),
            (6, vec![1, 2, 5], 2, 3),
            (7, vec![0, 6], 3, 4),
            (5, vec![3], 5, 5),
        ] {
            let ids: Vec<CenterId> = open.iter().copied().map(CenterId).collect();
            let ours: Vec<(Vec<usize>, Vec<usize>)> = MoveIter::new(&ids, m, rho, budget)
                .map(|mv| {
                    (
                        mv.add.iter().map(|c| c.0).collect(),
                        mv.remove.iter().map(|c| c.0).collect(),
                    )
                })
                .collect();
            assert_eq!(ours, brute_moves(&open, m, rho, budget), "m={m} open={open:?}");
        }
    }

    #[test]
    fn rho_two_count_on_three_of_six() {
        // sum over p, q <= 2 of C(3,p) C(3,q), minus the empty move
        let expected: usize = (0..=2)
            .flat_map(|p| (0..=2).map(move |q| [1, 3, 3][p] * [1, 3, 3][q]))
            .sum::<usize>()
            - 1;
        let inst = ufl(6);
        let sol = evaluate(&inst, &[CenterId(0), CenterId(1), CenterId(2)]).unwrap();
        let moves: BTreeSet<SwapMove> = enumerate_moves(&inst, &sol, 2)
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<BTreeSet<_>>();
        assert_eq!(moves.len(), expected);
    }

    #[test]
    fn config_validation() {
        let inst = ufl(4);
        for cfg in [
            SearchConfig {
                rho: 0,
                ..Default::default()
            },
            SearchConfig {
                epsilon_stop: 0.0,
                ..Default::default()
            },
            SearchConfig {
                max_iterations: 0,
                ..Default::default()
            },
        ] {
            assert!(matches!(local_search(&inst, &cfg), Err(Error::Config(_))));
        }
        let cfg = SearchConfig {
            seed: SeedPolicy::Explicit(vec![]),
            ..Default::default()
        };
        assert!(matches!(local_search(&inst, &cfg), Err(Error::EmptyOpenSet)));
        let kc = line_instance(ProblemKind::KClusterOut { k: 2, epsilon: 0.0 }, 5, 1);
        let cfg = SearchConfig {
            seed: SeedPolicy::Explicit(vec![CenterId(0), CenterId(1), CenterId(2)]),
            ..Default::default()
        };
        assert!(matches!(local_search(&kc, &cfg), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn optimal_seed_accepts_nothing() {
        let inst = line_instance(ProblemKind::KClusterOut { k: 5, epsilon: 0.0 }, 5, 0);
        let all: Vec<CenterId> = (0..5).map(CenterId).collect();
        let trace = local_search(
            &inst,
            &SearchConfig {
                seed: SeedPolicy::Explicit(all),
                rho: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(trace.steps.is_empty());
        assert_eq!(trace.termination, Termination::LocalOptimum);
    }

    #[test]
    fn seeds_respect_budget() {
        let kc = line_instance(ProblemKind::KClusterOut { k: 2, epsilon: 0.5 }, 6, 1);
        assert_eq!(seed_solution(&kc, &SeedPolicy::GreedyFarthest).unwrap().len(), 3);
        assert_eq!(seed_solution(&kc, &SeedPolicy::Random(3)).unwrap().len(), 3);
        let u = ufl(6);
        let s = seed_solution(&u, &SeedPolicy::GreedyFarthest).unwrap();
        assert!(!s.is_empty());
        let r = seed_solution(&u, &SeedPolicy::Random(5)).unwrap();
        assert!(!r.is_empty() && r.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let inst = ufl(8);
        let cfg = SearchConfig {
            seed: SeedPolicy::Explicit((0..8).map(CenterId).collect()),
            max_iterations: 1,
            epsilon_stop: 1e-9,
            ..Default::default()
        };
        let trace = local_search(&inst, &cfg).unwrap();
        assert_eq!(trace.iterations(), 1);
        assert_eq!(trace.termination, Termination::IterationCap);
    }

    #[test]
    fn zero_cost_stops_immediately() {
        let metric = MetricSpace::new(Backend::Matrix(vec![vec![0.0, 3.0]; 3]), 1.0).unwrap();
        let inst = Instance::new(metric, ProblemKind::KClusterOut { k: 1, epsilon: 0.0 }, 0).unwrap();
        let cfg = SearchConfig {
            seed: SeedPolicy::Explicit(vec![CenterId(0)]),
            ..Default::default()
        };
        let trace = local_search(&inst, &cfg).unwrap();
        assert_eq!(trace.final_cost(), 0.0);
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn bound_formula() {
        assert_eq!(iteration_bound(0.0, 0.0, 0.1, 4), 1.0);
        assert!(iteration_bound(1.0, 0.0, 0.1, 4).is_infinite());
        let b = iteration_bound(8.0, 1.0, 2.0, 4);
        assert!((b - 4.0).abs() < 1e-12);
    }
}
