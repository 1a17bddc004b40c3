//! Brute-force optimum for desk-scale instances.
//!
//! k-cluster instances enumerate every subset of exactly `B` centers (adding
//! a center never raises the cost, so a budget-`B` optimum of that size
//! exists). UFL instances enumerate every nonempty subset when `|C| <= 20`,
//! otherwise every subset up to a caller-supplied size cap.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::cost::{cost_of_valid_set, evaluate};
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::metric::CenterId;

/// Most subsets the oracle will examine.
pub const MAX_SUBSETS: u128 = 10_000_000;

/// UFL instances up to this many candidates are enumerated in full.
pub const UFL_FULL_ENUMERATION: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactResult {
    pub open: Vec<CenterId>,
    pub cost: f64,
    pub examined: u64,
}

impl ExactResult {
    pub fn to_json(&self) -> String {
        canonical::to_string(self)
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = acc * (n - t) as u128 / (t + 1) as u128;
    }
    acc
}

/// Subset sizes the oracle will enumerate.
fn sizes(inst: &Instance, size_cap: Option<usize>) -> Result<Vec<usize>> {
    let m = inst.num_centers();
    if !inst.is_ufl() {
        return Ok(vec![inst.budget().min(m)]);
    }
    if m <= UFL_FULL_ENUMERATION {
        return Ok((1..=m).collect());
    }
    match size_cap {
        Some(cap) if cap >= 1 => Ok((1..=cap.min(m)).collect()),
        _ => Err(Error::CombinatorialBudget {
            count: (1u128 << m.min(127)) - 1,
            cap: MAX_SUBSETS,
        }),
    }
}

/// Number of subsets [`solve_exact`] would examine.
pub fn subset_count(inst: &Instance, size_cap: Option<usize>) -> Result<u128> {
    let m = inst.num_centers();
    Ok(sizes(inst, size_cap)?.into_iter().map(|s| binomial(m, s)).sum())
}

/// Best `(cost, set)` among subsets of `{first} ∪ (r-subsets of first+1..m)`,
/// in lexicographic order, keeping the earliest on exact ties.
fn best_with_first(inst: &Instance, first: usize, r: usize) -> (f64, Vec<CenterId>) {
    let m = inst.num_centers();
    let mut scratch = Vec::with_capacity(inst.num_points());
    let mut set: Vec<CenterId> = Vec::with_capacity(r + 1);
    set.push(CenterId(first));
    set.extend((first + 1..first + 1 + r).map(CenterId));
    let mut best_cost = f64::INFINITY;
    let mut best_set = set.clone();
    loop {
        let c = cost_of_valid_set(inst, &set, &mut scratch);
        if c < best_cost {
            best_cost = c;
            best_set.clone_from(&set);
        }
        // next r-combination of the tail, positions 1..=r
        let mut k = r;
        while k >= 1 && set[k].0 == m - 1 - (r - k) {
            k -= 1;
        }
        if k == 0 {
            break;
        }
        set[k].0 += 1;
        for l in k + 1..=r {
            set[l].0 = set[l - 1].0 + 1;
        }
    }
    (best_cost, best_set)
}

/// Globally optimal open set (lexicographically first on exact cost ties).
pub fn solve_exact(inst: &Instance, size_cap: Option<usize>) -> Result<ExactResult> {
    let count = subset_count(inst, size_cap)?;
    if count > MAX_SUBSETS {
        return Err(Error::CombinatorialBudget {
            count,
            cap: MAX_SUBSETS,
        });
    }
    let m = inst.num_centers();
    let chunks: Vec<(usize, usize)> = sizes(inst, size_cap)?
        .into_iter()
        .flat_map(|s| (0..=m - s).map(move |first| (first, s - 1)))
        .collect();
    let (_, open) = chunks
        .par_iter()
        .map(|&(first, r)| best_with_first(inst, first, r))
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
        .expect("at least one subset");
    let cost = evaluate(inst, &open)?.cost();
    Ok(ExactResult {
        open,
        cost,
        examined: count as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{OpeningCosts, ProblemKind};
    use crate::metric::{Backend, MetricSpace};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, kind: ProblemKind, m: usize) -> Instance {
        let points: Vec<Vec<f64>> = (0..9).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let centers: Vec<Vec<f64>> = (0..m).map(|_| vec![rng.gen(), rng.gen()]).collect();
        Instance::new(
            MetricSpace::new(Backend::Euclidean { points, centers }, 1.0).unwrap(),
            kind,
            2,
        )
        .unwrap()
    }

    /// Independent reference over bitmasks with from-scratch evaluation.
    fn bitmask_optimum(inst: &Instance, size: Option<usize>) -> f64 {
        let m = inst.num_centers();
        (1u32..(1 << m))
            .filter(|mask| size.is_none_or(|s| mask.count_ones() as usize == s))
            .map(|mask| {
                let open: Vec<CenterId> = (0..m).filter(|i| mask >> i & 1 == 1).map(CenterId).collect();
                evaluate(inst, &open).unwrap().cost()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(7, 3), 35);
        assert_eq!(binomial(20, 10), 184_756);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(5, 0), 1);
    }

    #[test]
    fn full_set_when_k_equals_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let inst = random(&mut rng, ProblemKind::KClusterOut { k: 4, epsilon: 0.0 }, 4);
        let res = solve_exact(&inst, None).unwrap();
        assert_eq!(res.open, (0..4).map(CenterId).collect::<Vec<_>>());
        assert_eq!(res.examined, 1);
    }

    #[test]
    fn agrees_with_bitmask_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let kc = random(&mut rng, ProblemKind::KClusterOut { k: 2, epsilon: 0.0 }, 6);
            let r = solve_exact(&kc, None).unwrap();
            assert_eq!(r.cost, bitmask_optimum(&kc, Some(2)));
            assert_eq!(r.examined, 15);
            let u = random(
                &mut rng,
                ProblemKind::UflOut {
                    opening: OpeningCosts::Uniform(0.2),
                },
                6,
            );
            let r = solve_exact(&u, None).unwrap();
            assert_eq!(r.cost, bitmask_optimum(&u, None));
            assert_eq!(r.examined, 63);
        }
    }

    #[test]
    fn lexicographically_first_on_ties() {
        // Centers 0 and 2 are identical; 1 is useless.
        let rows = vec![vec![1.0, 5.0, 1.0], vec![2.0, 5.0, 2.0]];
        let inst = Instance::new(
            MetricSpace::new(Backend::Matrix(rows), 1.0).unwrap(),
            ProblemKind::KClusterOut { k: 1, epsilon: 0.0 },
            0,
        )
        .unwrap();
        assert_eq!(solve_exact(&inst, None).unwrap().open, vec![CenterId(0)]);
    }

    #[test]
    fn budget_guard() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let points: Vec<Vec<f64>> = (0..3).map(|_| vec![rng.gen()]).collect();
        let centers: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.gen()]).collect();
        let metric = MetricSpace::new(Backend::Euclidean { points, centers }, 1.0).unwrap();
        let kc = Instance::new(metric.clone(), ProblemKind::KClusterOut { k: 20, epsilon: 0.0 }, 0).unwrap();
        assert!(matches!(solve_exact(&kc, None), Err(Error::CombinatorialBudget { .. })));
        let u = Instance::new(
            metric,
            ProblemKind::UflOut {
                opening: OpeningCosts::Uniform(1.0),
            },
            0,
        )
        .unwrap();
        assert!(matches!(solve_exact(&u, None), Err(Error::CombinatorialBudget { .. })));
        let capped = solve_exact(&u, Some(2)).unwrap();
        assert_eq!(capped.examined, 40 + 780);
    }
}
