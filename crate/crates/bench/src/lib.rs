//! Fixtures shared by the benchmarks.

use swapout::sweep::{sweep_instance, SweepConfig, SweepProblem};
use swapout::{CenterId, Instance};

/// Random k-cluster instance with exactly `n` points and `m` candidates.
pub fn kcluster(n: usize, m: usize, k: usize, z: usize, q: f64, seed: u64) -> Instance {
    let cfg = SweepConfig {
        seed,
        n: n..=n,
        m: m..=m,
        z_max: 0,
        qs: vec![q],
        problem: SweepProblem::KCluster { k_max: k, epsilon: 0.0 },
        ..SweepConfig::default()
    };
    let (inst, _) = sweep_instance(&cfg, 0).expect("valid fixture");
    // sweep_instance draws k and z; pin them
    inst.with_kind(swapout::ProblemKind::KClusterOut { k, epsilon: 0.0 })
        .and_then(|i| i.with_z(z))
        .expect("valid fixture")
}

/// The first `k` candidates.
pub fn prefix(k: usize) -> Vec<CenterId> {
    (0..k).map(CenterId).collect()
}
