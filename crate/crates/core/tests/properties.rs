use proptest::prelude::*;
use proptest::sample::subsequence;

use swapout::{
    apply_swap, delta_of_swap, evaluate, load_instance, save_instance, Backend, CenterId, Instance, MetricSpace,
    OpeningCosts, PointId, ProblemKind, SwapMove,
};

fn coords(len: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-10.0..10.0f64, dim), len)
}

prop_compose! {
    fn euclidean()(n in 2usize..16, m in 1usize..7, dim in 1usize..4)
        (points in coords(n, dim), centers in coords(m, dim), z in 0..n, q in prop::sample::select(vec![1.0, 2.0, 1.5]))
        -> (Vec<Vec<f64>>, Vec<Vec<f64>>, usize, f64) {
        (points, centers, z, q)
    }
}

fn kcluster(points: Vec<Vec<f64>>, centers: Vec<Vec<f64>>, z: usize, q: f64) -> Instance {
    let m = centers.len();
    let metric = MetricSpace::new(Backend::Euclidean { points, centers }, q).unwrap();
    Instance::new(metric, ProblemKind::KClusterOut { k: m, epsilon: 0.0 }, z).unwrap()
}

fn ids(v: &[usize]) -> Vec<CenterId> {
    v.iter().map(|&i| CenterId(i)).collect()
}

proptest! {
    #[test]
    fn outliers_are_the_costliest_points((points, centers, z, q) in euclidean(), pick in any::<prop::sample::Index>()) {
        let m = centers.len();
        let inst = kcluster(points, centers, z, q);
        let open = vec![CenterId(pick.index(m))];
        let sol = evaluate(&inst, &open).unwrap();
        prop_assert_eq!(sol.outliers().len(), z);
        let cost = |j: usize| inst.metric().assign_cost(PointId(j), open[0]).unwrap();
        let worst_kept = (0..inst.num_points()).filter(|&j| !sol.is_outlier(PointId(j))).map(cost).fold(0.0, f64::max);
        for j in sol.outliers() {
            prop_assert!(cost(j.0) >= worst_kept);
        }
    }

    #[test]
    fn zero_outliers_is_a_plain_sum((points, centers, _, q) in euclidean()) {
        let m = centers.len();
        let inst = kcluster(points, centers, 0, q);
        let open: Vec<CenterId> = (0..m).map(CenterId).collect();
        let direct: f64 = (0..inst.num_points())
            .map(|j| open.iter().map(|&i| inst.metric().assign_cost(PointId(j), i).unwrap()).fold(f64::INFINITY, f64::min))
            .sum();
        let got = evaluate(&inst, &open).unwrap().cost();
        prop_assert!((got - direct).abs() <= 1e-9 * direct.max(1.0));
    }

    #[test]
    fn relabelling_points_keeps_the_cost((points, centers, z, q) in euclidean(), shuffle in any::<u64>()) {
        let m = centers.len();
        let mut order: Vec<usize> = (0..points.len()).collect();
        // deterministic permutation from the drawn seed
        order.sort_by_key(|&j| (j as u64).wrapping_mul(shuffle | 1).rotate_left(17));
        let permuted: Vec<Vec<f64>> = order.iter().map(|&j| points[j].clone()).collect();
        let a = kcluster(points, centers.clone(), z, q);
        let b = kcluster(permuted, centers, z, q);
        let open: Vec<CenterId> = (0..m).step_by(2).map(CenterId).collect();
        let (ca, cb) = (evaluate(&a, &open).unwrap().cost(), evaluate(&b, &open).unwrap().cost());
        prop_assert!((ca - cb).abs() <= 1e-9 * ca.max(1.0));
    }

    #[test]
    fn incremental_matches_scratch(
        (points, centers, z, q) in euclidean(),
        open_mask in prop::collection::vec(any::<bool>(), 6),
        add_mask in prop::collection::vec(any::<bool>(), 6),
        remove_mask in prop::collection::vec(any::<bool>(), 6),
    ) {
        let m = centers.len();
        let inst = kcluster(points, centers, z, q);
        let mut open: Vec<usize> = (0..m).filter(|&i| open_mask[i]).collect();
        if open.is_empty() {
            open.push(0);
        }
        let add: Vec<usize> = (0..m).filter(|&i| add_mask[i] && !open.contains(&i)).collect();
        let remove: Vec<usize> = open.iter().copied().filter(|&i| remove_mask[i]).collect();
        prop_assume!(open.len() + add.len() > remove.len());
        let sol = evaluate(&inst, &ids(&open)).unwrap();
        let mv = SwapMove::new(ids(&add), ids(&remove));
        let mut after: Vec<usize> = open.iter().copied().filter(|i| !remove.contains(i)).chain(add.iter().copied()).collect();
        after.sort_unstable();
        let scratch = evaluate(&inst, &ids(&after)).unwrap();
        let delta = delta_of_swap(&inst, &sol, &mv).unwrap();
        prop_assert!((delta - (scratch.cost() - sol.cost())).abs() <= 1e-9 * sol.cost().max(1.0));
        prop_assert_eq!(apply_swap(&inst, &sol, &mv).unwrap(), scratch);
    }

    #[test]
    fn save_then_load_round_trips(
        (points, centers, z, q) in euclidean(),
        opening in prop::collection::vec(0.0..5.0f64, 6),
        ufl in any::<bool>(),
    ) {
        let m = centers.len();
        let metric = MetricSpace::new(Backend::Euclidean { points, centers }, q).unwrap();
        let kind = if ufl {
            ProblemKind::UflOut { opening: OpeningCosts::PerCenter(opening[..m].to_vec()) }
        } else {
            ProblemKind::KClusterOut { k: m, epsilon: 0.0 }
        };
        let inst = Instance::new(metric, kind, z).unwrap();
        let text = save_instance(&inst);
        let back = load_instance(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &inst);
        prop_assert_eq!(save_instance(&back), text);
    }

    #[test]
    fn matrix_and_euclidean_agree((points, centers, z, q) in euclidean(), open in subsequence((0..6).collect::<Vec<_>>(), 1..=3)) {
        let m = centers.len();
        let open: Vec<usize> = open.into_iter().filter(|&i| i < m).collect();
        prop_assume!(!open.is_empty());
        let rows: Vec<Vec<f64>> = points
            .iter()
            .map(|p| centers.iter().map(|c| p.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()).collect())
            .collect();
        let e = kcluster(points, centers, z, q);
        let mx = Instance::new(
            MetricSpace::new(Backend::Matrix(rows), q).unwrap(),
            ProblemKind::KClusterOut { k: m, epsilon: 0.0 },
            z,
        )
        .unwrap();
        let (a, b) = (evaluate(&e, &ids(&open)).unwrap(), evaluate(&mx, &ids(&open)).unwrap());
        prop_assert!((a.cost() - b.cost()).abs() <= 1e-9 * a.cost().max(1.0));
    }
}
