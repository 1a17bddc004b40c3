//! Executable version of the pairing and grouping argument used to analyse
//! multiswap local search with outliers.
//!
//! Given a local solution `S` and a global solution `O`, every open center is
//! a node tagged with the solution it came from, so a center open in both
//! appears twice. A partition of those nodes induces a per-part surplus
//! `delta(P)` of reclaimable outliers, a bijection `kappa` from local to
//! global outliers, super-edges between surplus and deficit parts, groups of
//! consecutive super-edges, and split parts. [`lemma_report`] checks the
//! structural facts the argument relies on.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{evaluate, Solution};
use crate::error::{Error, Result};
use crate::exact::solve_exact;
use crate::instance::Instance;
use crate::metric::{CenterId, PointId};
use crate::search::{local_search, SearchConfig, SeedPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "solution", content = "center")]
pub enum Node {
    Local(CenterId),
    Global(CenterId),
}

impl Node {
    pub fn center(self) -> CenterId {
        match self {
            Node::Local(c) | Node::Global(c) => c,
        }
    }

    /// Ordering key: center id first, local before global.
    fn key(self) -> (usize, bool) {
        (self.center().0, matches!(self, Node::Global(_)))
    }
}

/// All nodes of `(S, O)`, locals first.
pub fn nodes(local: &Solution, global: &Solution) -> Vec<Node> {
    local
        .open()
        .iter()
        .map(|&c| Node::Local(c))
        .chain(global.open().iter().map(|&c| Node::Global(c)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PartitionPolicy {
    /// Every node in its own part.
    Singleton,
    /// Shuffled nodes cut into parts of random size `1..=max_size`.
    RandomBalanced {
        max_size: usize,
        seed: u64,
    },
    User(Vec<Vec<Node>>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    parts: Vec<Vec<Node>>,
}

impl Partition {
    /// Checks that `parts` are nonempty, disjoint and cover `all` exactly.
    pub fn new(mut parts: Vec<Vec<Node>>, all: &[Node]) -> Result<Self> {
        let universe: BTreeSet<Node> = all.iter().copied().collect();
        let mut seen = BTreeSet::new();
        for (p, part) in parts.iter_mut().enumerate() {
            if part.is_empty() {
                return Err(Error::Pairing(format!("part {p} is empty")));
            }
            for &n in part.iter() {
                if !universe.contains(&n) {
                    return Err(Error::Pairing(format!(
                        "part {p} holds {n:?}, which is not an open center"
                    )));
                }
                if !seen.insert(n) {
                    return Err(Error::Pairing(format!("{n:?} appears in more than one part")));
                }
            }
            part.sort_unstable_by_key(|n| n.key());
        }
        if seen.len() != universe.len() {
            return Err(Error::Pairing(format!(
                "parts cover {} of {} nodes",
                seen.len(),
                universe.len()
            )));
        }
        Ok(Partition { parts })
    }

    pub fn from_policy(policy: &PartitionPolicy, all: &[Node]) -> Result<Self> {
        match policy {
            PartitionPolicy::Singleton => Partition::new(all.iter().map(|&n| vec![n]).collect(), all),
            PartitionPolicy::RandomBalanced { max_size, seed } => {
                if *max_size == 0 {
                    return Err(Error::Config("part size must be >= 1".into()));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut shuffled = all.to_vec();
                shuffled.shuffle(&mut rng);
                let mut parts = Vec::new();
                let mut rest = &shuffled[..];
                while !rest.is_empty() {
                    let take = rng.gen_range(1..=(*max_size).min(rest.len()));
                    parts.push(rest[..take].to_vec());
                    rest = &rest[take..];
                }
                Partition::new(parts, all)
            }
            PartitionPolicy::User(parts) => Partition::new(parts.clone(), all),
        }
    }

    pub fn parts(&self) -> &[Vec<Node>] {
        &self.parts
    }

    pub fn max_part_size(&self) -> usize {
        self.parts.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Part index of every node.
    fn index(&self) -> BTreeMap<Node, usize> {
        self.parts
            .iter()
            .enumerate()
            .flat_map(|(p, part)| part.iter().map(move |&n| (n, p)))
            .collect()
    }
}

/// Assigned and outlier classes of both solutions, after removing the points
/// that are outliers in both.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classes {
    pub local_assigned: Vec<PointId>,
    pub local_outliers: Vec<PointId>,
    pub global_assigned: Vec<PointId>,
    pub global_outliers: Vec<PointId>,
    /// Points that were outliers in both solutions and have been dropped.
    pub removed: Vec<PointId>,
    /// `z` after the removal.
    pub z: usize,
    /// Local assignment of every point (`None` for local outliers).
    pub sigma: Vec<Option<CenterId>>,
    /// Global assignment of every point (`None` for global outliers).
    pub sigma_star: Vec<Option<CenterId>>,
}

pub fn compute_classes(inst: &Instance, local: &Solution, global: &Solution) -> Result<Classes> {
    let n = inst.num_points();
    if local.sigma().len() != n || global.sigma().len() != n {
        return Err(Error::Pairing("solution does not match the instance".into()));
    }
    let (lo, go) = (local.outliers(), global.outliers());
    if lo.len() != inst.z() || go.len() != inst.z() {
        return Err(Error::Pairing(format!(
            "expected {} outliers per solution, got {} and {}",
            inst.z(),
            lo.len(),
            go.len()
        )));
    }
    let both: BTreeSet<PointId> = lo.iter().filter(|j| global.is_outlier(**j)).copied().collect();
    let keep = |v: &[PointId]| v.iter().filter(|j| !both.contains(j)).copied().collect::<Vec<_>>();
    let local_outliers = keep(lo);
    let global_outliers = keep(go);
    let assigned = |sol: &Solution| (0..n).map(PointId).filter(|&j| !sol.is_outlier(j)).collect::<Vec<_>>();
    Ok(Classes {
        local_assigned: assigned(local),
        global_assigned: assigned(global),
        z: local_outliers.len(),
        local_outliers,
        global_outliers,
        removed: both.into_iter().collect(),
        sigma: local.sigma().to_vec(),
        sigma_star: global.sigma().to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperEdge {
    /// Surplus part (`delta > 0`).
    pub plus: usize,
    /// Deficit part (`delta < 0`).
    pub minus: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingStructure {
    pub partition: Partition,
    pub deltas: Vec<i64>,
    /// `(j, kappa(j))` for every local outlier `j`, ascending in `j`.
    pub kappa: Vec<(PointId, PointId)>,
    /// Surplus parts in sweep order.
    pub plus: Vec<usize>,
    /// Deficit parts in sweep order.
    pub minus: Vec<usize>,
    /// Super-edges in creation order.
    pub super_edges: Vec<SuperEdge>,
}

impl PairingStructure {
    /// Parts with `delta == 0`.
    pub fn zero_parts(&self) -> Vec<usize> {
        (0..self.deltas.len()).filter(|&p| self.deltas[p] == 0).collect()
    }
}

pub fn build_pairing(partition: Partition, classes: &Classes) -> Result<PairingStructure> {
    if classes.local_outliers.len() != classes.global_outliers.len() {
        return Err(Error::Pairing(format!(
            "outlier classes differ in size: {} vs {}",
            classes.local_outliers.len(),
            classes.global_outliers.len()
        )));
    }
    let index = partition.index();
    let num_parts = partition.parts.len();
    let part_of = |node: Node| {
        index
            .get(&node)
            .copied()
            .ok_or_else(|| Error::Pairing(format!("{node:?} is not in the partition")))
    };
    // Reclaimable local outliers and newly forced global outliers, per part.
    let mut reclaim = vec![Vec::new(); num_parts];
    let mut forced = vec![Vec::new(); num_parts];
    for &j in &classes.local_outliers {
        let c = classes.sigma_star[j.0].ok_or_else(|| Error::Pairing(format!("point {} unassigned globally", j.0)))?;
        reclaim[part_of(Node::Global(c))?].push(j);
    }
    for &j in &classes.global_outliers {
        let c = classes.sigma[j.0].ok_or_else(|| Error::Pairing(format!("point {} unassigned locally", j.0)))?;
        forced[part_of(Node::Local(c))?].push(j);
    }
    let deltas: Vec<i64> = (0..num_parts)
        .map(|p| reclaim[p].len() as i64 - forced[p].len() as i64)
        .collect();

    let mut kappa = Vec::with_capacity(classes.local_outliers.len());
    for p in 0..num_parts {
        // classes are ascending, so these lists are too
        kappa.extend(reclaim[p].iter().copied().zip(forced[p].iter().copied()));
    }

    let first_node = |p: usize| partition.parts[p][0].key();
    let mut plus: Vec<usize> = (0..num_parts).filter(|&p| deltas[p] > 0).collect();
    let mut minus: Vec<usize> = (0..num_parts).filter(|&p| deltas[p] < 0).collect();
    plus.sort_by_key(|&p| first_node(p));
    minus.sort_by_key(|&p| first_node(p));

    let mut super_edges = Vec::new();
    let (mut a, mut b) = (0, 0);
    // leftovers start after the within-part pairs
    let mut used_a = plus.first().map_or(0, |&p| forced[p].len());
    let mut used_b = minus.first().map_or(0, |&p| reclaim[p].len());
    while a < plus.len() && b < minus.len() {
        let (pa, pb) = (plus[a], minus[b]);
        if super_edges.last() != Some(&SuperEdge { plus: pa, minus: pb }) {
            super_edges.push(SuperEdge { plus: pa, minus: pb });
        }
        kappa.push((reclaim[pa][used_a], forced[pb][used_b]));
        used_a += 1;
        used_b += 1;
        if used_a == reclaim[pa].len() {
            a += 1;
            used_a = plus.get(a).map_or(0, |&p| forced[p].len());
        }
        if used_b == forced[pb].len() {
            b += 1;
            used_b = minus.get(b).map_or(0, |&p| reclaim[p].len());
        }
    }
    if a != plus.len() || b != minus.len() {
        return Err(Error::Pairing("surpluses and deficits do not balance".into()));
    }
    kappa.sort_unstable();
    Ok(PairingStructure {
        partition,
        deltas,
        kappa,
        plus,
        minus,
        super_edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Ufl,
    KCluster,
}

/// `ceil(4 rho / epsilon)` for UFL, `2 rho + 3` for the k-cluster variant.
pub fn default_alpha(variant: Variant, rho: usize, epsilon: f64) -> usize {
    match variant {
        Variant::Ufl => (4.0 * rho as f64 / epsilon).ceil() as usize,
        Variant::KCluster => 2 * rho + 3,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type")]
pub enum GroupKind {
    /// Consecutive run of super-edges.
    Block { edges: Range<usize> },
    /// Every surplus and deficit part, used when there are at most `alpha`
    /// super-edges.
    MergedAll,
    /// A single zero-surplus part.
    Simple,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub kind: GroupKind,
    /// Part indices, ascending.
    pub parts: Vec<usize>,
    pub nodes: Vec<Node>,
}

impl Group {
    fn from_parts(kind: GroupKind, parts: BTreeSet<usize>, partition: &Partition) -> Self {
        let mut nodes: Vec<Node> = parts.iter().flat_map(|&p| partition.parts[p].iter().copied()).collect();
        nodes.sort_unstable_by_key(|n| n.key());
        Group {
            kind,
            parts: parts.into_iter().collect(),
            nodes,
        }
    }

    pub fn size(&self) -> usize {
        self.nodes.len()
    }
}

pub fn build_groups(ps: &PairingStructure, alpha: usize) -> Result<Vec<Group>> {
    if alpha < 2 {
        return Err(Error::Config(format!("group size alpha must be >= 2, got {alpha}")));
    }
    let edges = &ps.super_edges;
    let mut groups = Vec::new();
    if !edges.is_empty() && edges.len() <= alpha {
        let parts = ps.plus.iter().chain(&ps.minus).copied().collect();
        groups.push(Group::from_parts(GroupKind::MergedAll, parts, &ps.partition));
    } else if !edges.is_empty() {
        // blocks of alpha edges; the trailing partial block always joins the
        // one before it
        let count = edges.len().div_ceil(alpha) - 1;
        for s in 0..count {
            let end = if s + 1 == count { edges.len() } else { (s + 1) * alpha };
            let range = s * alpha..end;
            let parts = edges[range.clone()].iter().flat_map(|e| [e.plus, e.minus]).collect();
            groups.push(Group::from_parts(
                GroupKind::Block { edges: range },
                parts,
                &ps.partition,
            ));
        }
    }
    for p in ps.zero_parts() {
        groups.push(Group::from_parts(GroupKind::Simple, BTreeSet::from([p]), &ps.partition));
    }
    Ok(groups)
}

/// Parts of each group that have a super-edge outside the group's block.
pub fn detect_splits(groups: &[Group], edges: &[SuperEdge]) -> Vec<Vec<usize>> {
    groups
        .iter()
        .map(|g| match &g.kind {
            GroupKind::Block { edges: range } => {
                let outside: BTreeSet<usize> = edges
                    .iter()
                    .enumerate()
                    .filter(|(e, _)| !range.contains(e))
                    .flat_map(|(_, e)| [e.plus, e.minus])
                    .collect();
                g.parts.iter().copied().filter(|p| outside.contains(p)).collect()
            }
            GroupKind::MergedAll | GroupKind::Simple => Vec::new(),
        })
        .collect()
}

/// Whether the undirected graph on `vertices` is a forest whose components
/// are caterpillars. Returns `(acyclic, caterpillar)`.
fn forest_shape(edges: &[(usize, usize)]) -> (bool, bool) {
    let mut adj: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for &(a, b) in edges {
        adj.entry(a).or_default().insert(b);
        adj.entry(b).or_default().insert(a);
    }
    let simple_edges: usize = adj.values().map(BTreeSet::len).sum::<usize>() / 2;
    if simple_edges != edges.len() {
        // a repeated edge is a 2-cycle
        return (false, false);
    }
    let index: BTreeMap<usize, usize> = adj.keys().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut parent: Vec<usize> = (0..index.len()).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, index[&a]), find(&mut parent, index[&b]));
        if ra == rb {
            return (false, false);
        }
        parent[ra] = rb;
    }
    // In a tree the non-leaf vertices induce a subtree; it is a path exactly
    // when every such vertex has at most two non-leaf neighbours.
    let spine = |v: &usize| adj[v].len() >= 2;
    let caterpillar = adj
        .iter()
        .filter(|(v, _)| spine(v))
        .all(|(_, nb)| nb.iter().filter(|u| spine(u)).count() <= 2);
    (true, caterpillar)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub alpha: usize,
    pub rho: usize,
    pub removed: usize,
    pub parts: usize,
    pub super_edges: usize,
    pub groups: usize,
    pub kappa_bijective: bool,
    pub delta_sum_zero: bool,
    pub acyclic: bool,
    pub caterpillar: bool,
    pub group_sizes_ok: bool,
    pub splits_ok: bool,
    pub coverage_ok: bool,
    pub nonzero_parts_grouped: bool,
    /// First failed check, if any, with context.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.kappa_bijective
            && self.delta_sum_zero
            && self.acyclic
            && self.caterpillar
            && self.group_sizes_ok
            && self.splits_ok
            && self.coverage_ok
            && self.nonzero_parts_grouped
    }
}

/// Runs classes, pairing, grouping and split detection, then checks every
/// structural property. `rho` is the part-size bound used by the group-size
/// check.
pub fn lemma_report(
    inst: &Instance,
    local: &Solution,
    global: &Solution,
    policy: &PartitionPolicy,
    alpha: usize,
    rho: usize,
) -> Result<LemmaReport> {
    let classes = compute_classes(inst, local, global)?;
    let all = nodes(local, global);
    let partition = Partition::from_policy(policy, &all)?;
    let ps = build_pairing(partition, &classes)?;
    let groups = build_groups(&ps, alpha)?;
    let splits = detect_splits(&groups, &ps.super_edges);
    let mut failure: Option<String> = None;
    let mut note = |ok: bool, msg: &dyn Fn() -> String| {
        if !ok && failure.is_none() {
            failure = Some(msg());
        }
        ok
    };

    let domain: Vec<PointId> = ps.kappa.iter().map(|&(j, _)| j).collect();
    let mut image: Vec<PointId> = ps.kappa.iter().map(|&(_, j)| j).collect();
    image.sort_unstable();
    let kappa_bijective = note(
        domain == classes.local_outliers && image == classes.global_outliers,
        &|| "kappa is not a bijection between the outlier classes".into(),
    );
    let delta_sum_zero = note(ps.deltas.iter().sum::<i64>() == 0, &|| {
        "deltas do not sum to zero".into()
    });

    let edge_list: Vec<(usize, usize)> = ps.super_edges.iter().map(|e| (e.plus, e.minus)).collect();
    let (acyclic, caterpillar) = forest_shape(&edge_list);
    let acyclic = note(acyclic, &|| "super-edge graph has a cycle".into());
    let caterpillar = note(caterpillar, &|| "super-edge component is not a caterpillar".into());

    let mut group_sizes_ok = true;
    for (s, g) in groups.iter().enumerate() {
        let size = g.size();
        let ok = match g.kind {
            GroupKind::Block { .. } => alpha - 1 <= size && size <= 8 * rho * alpha,
            GroupKind::MergedAll => size <= 2 * alpha * rho,
            GroupKind::Simple => true,
        };
        group_sizes_ok &= note(ok, &|| format!("group {s} ({:?}) has {size} centers", g.kind));
    }
    let splits_ok = splits
        .iter()
        .enumerate()
        .all(|(s, sp)| note(sp.len() <= 2, &|| format!("group {s} splits {} parts", sp.len())));

    let coverage_ok = ps.kappa.iter().all(|&(j, kj)| {
        let (Some(gs), Some(ls)) = (classes.sigma_star[j.0], classes.sigma[kj.0]) else {
            return note(false, &|| format!("point {} or {} has no assignment", j.0, kj.0));
        };
        let covered = groups
            .iter()
            .any(|g| g.nodes.contains(&Node::Global(gs)) && g.nodes.contains(&Node::Local(ls)));
        note(covered, &|| {
            format!("no group covers outlier {} and its partner {}", j.0, kj.0)
        })
    });

    let grouped: BTreeSet<usize> = groups.iter().flat_map(|g| g.parts.iter().copied()).collect();
    let nonzero_parts_grouped = (0..ps.deltas.len()).filter(|&p| ps.deltas[p] != 0).all(|p| {
        note(grouped.contains(&p), &|| {
            format!("part {p} has nonzero delta but no group")
        })
    });

    Ok(LemmaReport {
        alpha,
        rho,
        removed: classes.removed.len(),
        parts: ps.partition.parts.len(),
        super_edges: ps.super_edges.len(),
        groups: groups.len(),
        kappa_bijective,
        delta_sum_zero,
        acyclic,
        caterpillar,
        group_sizes_ok,
        splits_ok,
        coverage_ok,
        nonzero_parts_grouped,
        failure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    Singleton,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolutionSource {
    /// Two independent random open sets.
    Random,
    /// Local search from a random seed against the exact optimum.
    SearchVsOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub trials: usize,
    pub rho: usize,
    pub alpha: usize,
    pub policy: PolicyKind,
    pub source: SolutionSource,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub report: LemmaReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub config: TrialConfig,
    pub passed: usize,
    pub failed: Vec<TrialOutcome>,
    pub max_super_edges: usize,
}

fn trial_pair(inst: &Instance, cfg: &TrialConfig, seed: u64) -> Result<(Solution, Solution)> {
    let random = |s: u64| -> Result<Solution> {
        let open = crate::search::seed_solution(inst, &SeedPolicy::Random(s))?;
        evaluate(inst, &open)
    };
    match cfg.source {
        SolutionSource::Random => Ok((random(seed)?, random(seed ^ 0x9e37_79b9_7f4a_7c15)?)),
        SolutionSource::SearchVsOracle => {
            let search = SearchConfig {
                rho: cfg.rho,
                seed: SeedPolicy::Random(seed),
                ..SearchConfig::default()
            };
            let local = local_search(inst, &search)?.solution;
            let global = evaluate(inst, &solve_exact(inst, None)?.open)?;
            Ok((local, global))
        }
    }
}

/// Runs independent lemma checks, in parallel, on solution pairs drawn from
/// `cfg.seed`. Results are in trial order.
pub fn run_trials(inst: &Instance, cfg: &TrialConfig) -> Result<TrialSummary> {
    let reports = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add(t as u64);
            let (local, global) = trial_pair(inst, cfg, seed)?;
            let policy = match cfg.policy {
                PolicyKind::Singleton => PartitionPolicy::Singleton,
                PolicyKind::Random => PartitionPolicy::RandomBalanced {
                    max_size: cfg.rho,
                    seed,
                },
            };
            lemma_report(inst, &local, &global, &policy, cfg.alpha, cfg.rho)
        })
        .collect::<Result<Vec<_>>>()?;
    let max_super_edges = reports.iter().map(|r| r.super_edges).max().unwrap_or(0);
    let (ok, bad): (Vec<_>, Vec<_>) = reports
        .into_iter()
        .enumerate()
        .map(|(trial, report)| TrialOutcome { trial, report })
        .partition(|o| o.report.passed());
    Ok(TrialSummary {
        config: cfg.clone(),
        passed: ok.len(),
        failed: bad,
        max_super_edges,
    })
}
