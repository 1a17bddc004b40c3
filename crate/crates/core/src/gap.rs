//! Locality-gap instance families and their certification.
//!
//! Two constructions are provided:
//!
//! * UFL-out with non-uniform opening costs: a set `A` holding one center of
//!   cost `rho` and `z` co-located points, plus `z` singleton sets `B_l`, each
//!   a unit-cost center with one point on it. Opening every `B_l` center is a
//!   `rho`-swap local optimum of cost `z`; opening only `A`'s center costs `rho`.
//! * k-median/k-means-out: co-located set `B`, rings `C_1..C_{k-1}` of radius
//!   `beta`, co-located sets `D_1..D_{k-2}`, and a ring `E` of radius `gamma`.
//!   `{f(B), f(D_*), f(E)}` is a local optimum for every `rho < k - 1`, while
//!   `{f(B), f(C_*)}` is optimal.
//!
//! Sets are placed far apart along the x axis, spaced by a separation `L`
//! that is `10^6` times the largest distance inside any set.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::cost::{evaluate, SwapMove};
use crate::error::{Error, Result};
use crate::exact::solve_exact;
use crate::instance::{Instance, OpeningCosts, ProblemKind};
use crate::metric::{pow_q, Backend, CenterId, MetricSpace, PointId};
use crate::search::{certify_local_optimum, Certificate};
use crate::tol;

pub const SEPARATION_FACTOR: f64 = 1e6;

/// `10^6` times the largest intra-set distance, or `10^6` when all sets are
/// co-located.
pub fn separation(max_intra: f64) -> f64 {
    SEPARATION_FACTOR * if max_intra > 0.0 { max_intra } else { 1.0 }
}

/// One cluster of the construction, in its own local frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacedSet {
    pub name: String,
    /// Translation of the local frame in the plane.
    pub offset: [f64; 2],
    pub center: CenterId,
    pub center_local: [f64; 2],
    pub points: Vec<PointId>,
    pub point_local: Vec<[f64; 2]>,
    /// Radius of the ring for ring-shaped sets.
    pub ring_radius: Option<f64>,
    /// Range inside `points` that lies on the ring.
    pub ring_points: std::ops::Range<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub separation: f64,
    pub sets: Vec<PlacedSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapInstance {
    pub instance: Instance,
    pub stated_local: Vec<CenterId>,
    pub stated_opt: Vec<CenterId>,
    pub layout: Layout,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UflGapParams {
    pub rho: usize,
    pub z: usize,
}

impl UflGapParams {
    pub fn validate(&self) -> Result<()> {
        if self.rho == 0 {
            return Err(Error::invalid("rho", "rho must be >= 1"));
        }
        if self.z <= self.rho {
            return Err(Error::invalid(
                "z",
                format!("need z > rho, got z = {} and rho = {}", self.z, self.rho),
            ));
        }
        Ok(())
    }

    pub fn stated_local_cost(&self) -> f64 {
        self.z as f64
    }

    pub fn stated_opt_cost(&self) -> f64 {
        self.rho as f64
    }

    pub fn ratio(&self) -> f64 {
        self.z as f64 / self.rho as f64
    }
}

fn euclid2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn shift(p: [f64; 2], by: [f64; 2]) -> [f64; 2] {
    [p[0] + by[0], p[1] + by[1]]
}

fn ring(size: usize, radius: f64) -> Vec<[f64; 2]> {
    (0..size)
        .map(|t| {
            let a = 2.0 * PI * t as f64 / size as f64;
            [radius * a.cos(), radius * a.sin()]
        })
        .collect()
}

struct SetSpec {
    name: String,
    point_local: Vec<[f64; 2]>,
    ring_radius: Option<f64>,
    ring_points: std::ops::Range<usize>,
}

/// Assigns ids and offsets, and builds the point-to-center matrix. Distances
/// inside a set are computed in its local frame so they stay exact; distances
/// across sets use translated coordinates.
fn place(specs: Vec<SetSpec>) -> (Layout, Vec<Vec<f64>>) {
    let origin = [0.0, 0.0];
    let mut max_intra: f64 = 0.0;
    for s in &specs {
        let pts: Vec<[f64; 2]> = s.point_local.iter().copied().chain([origin]).collect();
        for (a, &pa) in pts.iter().enumerate() {
            for &pb in &pts[a + 1..] {
                max_intra = max_intra.max(euclid2(pa, pb));
            }
        }
    }
    let sep = separation(max_intra);
    let mut next_point = 0;
    let sets: Vec<PlacedSet> = specs
        .into_iter()
        .enumerate()
        .map(|(s, spec)| {
            let points = (next_point..next_point + spec.point_local.len()).map(PointId).collect();
            next_point += spec.point_local.len();
            PlacedSet {
                name: spec.name,
                offset: [s as f64 * sep, 0.0],
                center: CenterId(s),
                center_local: origin,
                points,
                point_local: spec.point_local,
                ring_radius: spec.ring_radius,
                ring_points: spec.ring_points,
            }
        })
        .collect();
    let mut rows = vec![Vec::new(); next_point];
    for a in &sets {
        for (p, &local) in a.points.iter().zip(&a.point_local) {
            rows[p.0] = sets
                .iter()
                .map(|b| {
                    if a.center == b.center {
                        euclid2(local, b.center_local)
                    } else {
                        euclid2(shift(local, a.offset), shift(b.center_local, b.offset))
                    }
                })
                .collect();
        }
    }
    (Layout { separation: sep, sets }, rows)
}

/// UFL-out family: stated local optimum costs `z`, the optimum costs `rho`.
pub fn gen_ufl_gap(p: UflGapParams) -> Result<GapInstance> {
    p.validate()?;
    let mut specs = vec![SetSpec {
        name: "A".into(),
        point_local: vec![[0.0, 0.0]; p.z],
        ring_radius: None,
        ring_points: 0..0,
    }];
    specs.extend((1..=p.z).map(|l| SetSpec {
        name: format!("B{l}"),
        point_local: vec![[0.0, 0.0]],
        ring_radius: None,
        ring_points: 0..0,
    }));
    let (layout, _) = place(specs);
    // Everything is co-located within its set, so plain coordinates are exact.
    let points: Vec<Vec<f64>> = layout
        .sets
        .iter()
        .flat_map(|s| s.point_local.iter().map(move |&l| shift(l, s.offset).to_vec()))
        .collect();
    let centers: Vec<Vec<f64>> = layout
        .sets
        .iter()
        .map(|s| shift(s.center_local, s.offset).to_vec())
        .collect();
    let mut opening = vec![1.0; p.z + 1];
    opening[0] = p.rho as f64;
    let metric = MetricSpace::new(Backend::Euclidean { points, centers }, 1.0)?;
    let instance = Instance::new(
        metric,
        ProblemKind::UflOut {
            opening: OpeningCosts::PerCenter(opening),
        },
        p.z,
    )?;
    Ok(GapInstance {
        instance,
        stated_local: (1..=p.z).map(CenterId).collect(),
        stated_opt: vec![CenterId(0)],
        layout,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMedGapParams {
    pub k: usize,
    pub z: usize,
    pub beta: f64,
    pub gamma: f64,
    /// Total number of points; defaults to `5 z`.
    pub n: Option<usize>,
    /// Assignment-cost exponent (1 for k-median, 2 for k-means).
    pub q: f64,
}

impl KMedGapParams {
    pub fn new(k: usize, z: usize, beta: f64, gamma: f64) -> Self {
        KMedGapParams {
            k,
            z,
            beta,
            gamma,
            n: None,
            q: 1.0,
        }
    }

    pub fn with_q(self, q: f64) -> Self {
        KMedGapParams { q, ..self }
    }

    /// Points per `C` set, `z / (k - 1)`.
    pub fn u(&self) -> usize {
        self.z / (self.k - 1)
    }

    pub fn n(&self) -> usize {
        self.n.unwrap_or(5 * self.z)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid("k", "k must be >= 2"));
        }
        if self.z == 0 || !self.z.is_multiple_of(self.k - 1) {
            return Err(Error::invalid(
                "z",
                format!("z must be a positive multiple of k - 1 = {}", self.k - 1),
            ));
        }
        // Rings need at least one point. Larger u (u > k - 1 in particular)
        // makes the gap meaningful but is not needed for local optimality.
        let u = self.u();
        if u < 2 {
            return Err(Error::invalid("z", format!("need u = z / (k - 1) >= 2, got u = {u}")));
        }
        for (name, v) in [("beta", self.beta), ("gamma", self.gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, "must be finite and > 0"));
            }
        }
        if !(self.q.is_finite() && self.q >= 1.0) {
            return Err(Error::invalid("q", "exponent must be >= 1"));
        }
        // The separation condition is stated on assignment costs.
        let g = pow_q(self.gamma, self.q);
        let cb = (u - 1) as f64 * pow_q(self.beta, self.q);
        if !(g < cb && cb < 2.0 * g) {
            return Err(Error::invalid(
                "gamma",
                format!("need gamma^q < (u - 1) beta^q < 2 gamma^q, got {g} vs {cb}"),
            ));
        }
        if self.n() <= 2 * self.z {
            return Err(Error::invalid(
                "n",
                format!("need n > 2z so B is nonempty, got n = {}", self.n()),
            ));
        }
        Ok(())
    }

    /// `(u + k - 3) gamma^q`.
    pub fn stated_local_cost(&self) -> f64 {
        (self.u() + self.k - 3) as f64 * pow_q(self.gamma, self.q)
    }

    /// `(k - 1)(u - 1) beta^q`.
    pub fn stated_opt_cost(&self) -> f64 {
        ((self.k - 1) * (self.u() - 1)) as f64 * pow_q(self.beta, self.q)
    }

    pub fn ratio(&self) -> f64 {
        self.stated_local_cost() / self.stated_opt_cost()
    }

    /// `(u - k + 2) / (2 (k - 1))`, which the ratio always exceeds.
    pub fn ratio_lower_bound(&self) -> f64 {
        (self.u() as f64 - self.k as f64 + 2.0) / (2.0 * (self.k - 1) as f64)
    }
}

/// k-median/k-means-out family, emitted as a distance matrix.
pub fn gen_kmed_gap(p: KMedGapParams) -> Result<GapInstance> {
    p.validate()?;
    let (k, z, u) = (p.k, p.z, p.u());
    let mut specs = vec![SetSpec {
        name: "B".into(),
        point_local: vec![[0.0, 0.0]; p.n() - 2 * z],
        ring_radius: None,
        ring_points: 0..0,
    }];
    let ring_set = |name: String, size: usize, radius: f64| {
        let mut pts = vec![[0.0, 0.0]];
        pts.extend(ring(size, radius));
        SetSpec {
            name,
            point_local: pts,
            ring_radius: Some(radius),
            ring_points: 1..size + 1,
        }
    };
    for c in 1..k {
        specs.push(ring_set(format!("C{c}"), u - 1, p.beta));
    }
    for d in 1..k - 1 {
        specs.push(SetSpec {
            name: format!("D{d}"),
            point_local: vec![[0.0, 0.0]; u - 1],
            ring_radius: None,
            ring_points: 0..0,
        });
    }
    specs.push(ring_set("E".into(), u + k - 3, p.gamma));
    let (layout, rows) = place(specs);
    let metric = MetricSpace::new(Backend::Matrix(rows), p.q)?;
    let instance = Instance::new(metric, ProblemKind::KClusterOut { k, epsilon: 0.0 }, z)?;
    // centers: f(B) = 0, f(C_c) = c, f(D_d) = k - 1 + d, f(E) = 2k - 2
    let stated_local = std::iter::once(0).chain(k..=2 * k - 2).map(CenterId).collect();
    let stated_opt = (0..k).map(CenterId).collect();
    Ok(GapInstance {
        instance,
        stated_local,
        stated_opt,
        layout,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub rho: usize,
    pub local_certified: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<SwapMove>,
    pub local_cost: f64,
    pub opt_cost: f64,
    pub ratio: f64,
    /// Whether the exact oracle agrees that the stated optimum is optimal;
    /// absent when the oracle was skipped or over budget.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub opt_confirmed: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_cost: Option<f64>,
}

/// Certifies the stated local optimum against `rho`-swaps, computes the cost
/// ratio, and optionally confirms the stated optimum with the exact oracle.
pub fn verify_gap(
    inst: &Instance,
    stated_local: &[CenterId],
    stated_opt: &[CenterId],
    rho: usize,
    confirm_opt: bool,
) -> Result<GapReport> {
    let local = evaluate(inst, stated_local)?;
    let opt = evaluate(inst, stated_opt)?;
    let cert = certify_local_optimum(inst, &local, rho)?;
    let (opt_confirmed, oracle_cost) = if confirm_opt {
        match solve_exact(inst, None) {
            Ok(res) => (Some(tol::approx_eq(res.cost, opt.cost())), Some(res.cost)),
            Err(Error::CombinatorialBudget { .. }) => (None, None),
            Err(e) => return Err(e),
        }
    } else {
        (None, None)
    };
    Ok(GapReport {
        rho,
        local_certified: cert.is_certified(),
        counterexample: match cert {
            Certificate::Certified => None,
            Certificate::Counterexample { mv, .. } => Some(mv),
        },
        local_cost: local.cost(),
        opt_cost: opt.cost(),
        ratio: local.cost() / opt.cost(),
        opt_confirmed,
        oracle_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ufl_costs_and_ratio() {
        for (rho, z) in [(2, 5), (1, 2)] {
            let g = gen_ufl_gap(UflGapParams { rho, z }).unwrap();
            let local = evaluate(&g.instance, &g.stated_local).unwrap();
            let opt = evaluate(&g.instance, &g.stated_opt).unwrap();
            assert_eq!(local.cost(), z as f64);
            assert_eq!(opt.cost(), rho as f64);
            assert_eq!(local.outliers(), &(0..z).map(PointId).collect::<Vec<_>>()[..]);
        }
    }

    #[test]
    fn ufl_parameter_errors() {
        assert!(gen_ufl_gap(UflGapParams { rho: 3, z: 3 }).is_err());
        assert!(gen_ufl_gap(UflGapParams { rho: 0, z: 3 }).is_err());
    }

    #[test]
    fn kmed_costs_match_closed_forms() {
        let p = KMedGapParams {
            n: Some(40),
            ..KMedGapParams::new(3, 8, 1.0, 2.0)
        };
        let g = gen_kmed_gap(p).unwrap();
        assert_eq!(g.instance.num_points(), 40);
        assert_eq!(g.instance.num_centers(), 5);
        let local = evaluate(&g.instance, &g.stated_local).unwrap().cost();
        let opt = evaluate(&g.instance, &g.stated_opt).unwrap().cost();
        assert!(tol::approx_eq(local, 8.0), "{local}");
        assert!(tol::approx_eq(opt, 6.0), "{opt}");
        assert_eq!(p.stated_local_cost(), 8.0);
        assert_eq!(p.stated_opt_cost(), 6.0);
        assert_eq!(p.ratio_lower_bound(), 0.75);
    }

    #[test]
    fn kmed_parameter_errors() {
        // u = 4, (u - 1) beta = 3 is not below 2 gamma = 3
        assert!(gen_kmed_gap(KMedGapParams::new(3, 8, 1.0, 1.5)).is_err());
        // z not a multiple of k - 1
        assert!(gen_kmed_gap(KMedGapParams::new(3, 9, 1.0, 2.0)).is_err());
        // u = 1 leaves the C rings empty
        assert!(gen_kmed_gap(KMedGapParams::new(3, 2, 1.0, 0.75)).is_err());
        assert!(gen_kmed_gap(KMedGapParams {
            n: Some(16),
            ..KMedGapParams::new(3, 8, 1.0, 2.0)
        })
        .is_err());
    }

    #[test]
    fn rings_have_exact_radius() {
        let g = gen_kmed_gap(KMedGapParams::new(4, 24, 1.0, 3.75)).unwrap();
        let metric = g.instance.metric();
        for set in &g.layout.sets {
            if let Some(r) = set.ring_radius {
                for &p in &set.points[set.ring_points.clone()] {
                    let d = metric.distance(p, set.center).unwrap();
                    assert!((d - r).abs() <= 1e-9, "{} {d} vs {r}", set.name);
                }
            }
        }
    }

    #[test]
    fn separation_dominates() {
        let g = gen_kmed_gap(KMedGapParams::new(3, 8, 1.0, 2.0)).unwrap();
        // largest intra-set distance is the E ring diameter, 2 gamma
        assert!((g.layout.separation - 4e6).abs() < 1e-3);
        assert_eq!(separation(0.0), 1e6);
    }
}
