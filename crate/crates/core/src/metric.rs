//! Distance oracle between data points and candidate centers.
//!
//! Three backends are supported: an explicit `n × m` matrix, Euclidean
//! coordinates, and shortest paths in a nonnegatively weighted undirected
//! graph. Assignment costs are `distance^q` for an exponent `q >= 1`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

/// Index of a data point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointId(pub usize);

/// Index of a candidate center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CenterId(pub usize);

/// Graphs with at most this many vertices use Floyd–Warshall; larger ones run
/// Dijkstra from every center vertex.
pub const FLOYD_WARSHALL_MAX_VERTICES: usize = 64;

/// Default number of table entries materialized by [`MetricSpace::all_pairs_precompute`].
pub const DEFAULT_PRECOMPUTE_BUDGET: usize = 1 << 23;

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub num_vertices: usize,
    /// Undirected edges `(u, v, weight)`.
    pub edges: Vec<(usize, usize, f64)>,
    pub point_vertices: Vec<usize>,
    pub center_vertices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    /// `matrix[j][i]` is the distance from point `j` to center `i`.
    Matrix(Vec<Vec<f64>>),
    Euclidean {
        points: Vec<Vec<f64>>,
        centers: Vec<Vec<f64>>,
    },
    Graph(Graph),
}

/// Outcome of a precompute request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precompute {
    Materialized {
        entries: usize,
    },
    /// The table would not fit the budget; distances stay on-demand.
    OnDemand {
        requested: usize,
        budget: usize,
    },
}

#[derive(Debug, Clone)]
struct Table {
    dist: Vec<f64>,
    /// `None` when `q == 1`, in which case costs equal distances.
    cost: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct MetricSpace {
    backend: Backend,
    q: f64,
    num_points: usize,
    num_centers: usize,
    /// Terminal-to-terminal shortest paths for the graph backend, row-major `n × m`.
    graph_dist: Option<Vec<f64>>,
    table: Option<Table>,
}

impl PartialEq for MetricSpace {
    fn eq(&self, other: &Self) -> bool {
        self.q.to_bits() == other.q.to_bits() && self.backend == other.backend
    }
}

#[inline]
pub(crate) fn pow_q(d: f64, q: f64) -> f64 {
    if q == 1.0 {
        d
    } else if q == 2.0 {
        d * d
    } else {
        d.powf(q)
    }
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_finite_nonneg(path: impl FnOnce() -> String, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::invalid(path(), "value must be finite"));
    }
    if v < 0.0 {
        return Err(Error::invalid(path(), "value must be nonnegative"));
    }
    Ok(())
}

impl MetricSpace {
    pub fn new(backend: Backend, q: f64) -> Result<Self> {
        if !q.is_finite() || q < 1.0 {
            return Err(Error::invalid("q", format!("exponent must be >= 1, got {q}")));
        }
        let (num_points, num_centers, graph_dist) = match &backend {
            Backend::Matrix(rows) => {
                let n = rows.len();
                if n == 0 {
                    return Err(Error::invalid("distance_matrix", "no points"));
                }
                let m = rows[0].len();
                if m == 0 {
                    return Err(Error::invalid("distance_matrix[0]", "no centers"));
                }
                for (j, row) in rows.iter().enumerate() {
                    if row.len() != m {
                        return Err(Error::invalid(
                            format!("distance_matrix[{j}]"),
                            format!("row has {} entries, expected {m}", row.len()),
                        ));
                    }
                    for (i, &v) in row.iter().enumerate() {
                        check_finite_nonneg(|| format!("distance_matrix[{j}][{i}]"), v)?;
                    }
                }
                (n, m, None)
            }
            Backend::Euclidean { points, centers } => {
                if points.is_empty() {
                    return Err(Error::invalid("points", "no points"));
                }
                if centers.is_empty() {
                    return Err(Error::invalid("centers", "no centers"));
                }
                let d = points[0].len();
                if d == 0 {
                    return Err(Error::invalid("points[0]", "dimension must be >= 1"));
                }
                for (name, set) in [("points", points), ("centers", centers)] {
                    for (idx, c) in set.iter().enumerate() {
                        if c.len() != d {
                            return Err(Error::invalid(
                                format!("{name}[{idx}]"),
                                format!("dimension {} differs from {d}", c.len()),
                            ));
                        }
                        if let Some(k) = c.iter().position(|x| !x.is_finite()) {
                            return Err(Error::invalid(
                                format!("{name}[{idx}][{k}]"),
                                "coordinate must be finite",
                            ));
                        }
                    }
                }
                (points.len(), centers.len(), None)
            }
            Backend::Graph(g) => {
                let dist = graph_terminal_distances(g, None)?;
                (g.point_vertices.len(), g.center_vertices.len(), Some(dist))
            }
        };
        Ok(MetricSpace {
            backend,
            q,
            num_points,
            num_centers,
            graph_dist,
            table: None,
        })
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn num_points(&self) -> usize {
        self.num_points
    }

    pub fn num_centers(&self) -> usize {
        self.num_centers
    }

    pub fn is_precomputed(&self) -> bool {
        self.table.is_some()
    }

    /// The same space with a different cost exponent. Any precomputed table is
    /// rebuilt under the same budget.
    pub fn with_q(&self, q: f64) -> Result<Self> {
        let mut out = MetricSpace::new(self.backend.clone(), q)?;
        if self.table.is_some() {
            out.all_pairs_precompute(usize::MAX);
        }
        Ok(out)
    }

    fn check(&self, j: PointId, i: CenterId) -> Result<()> {
        if j.0 >= self.num_points {
            return Err(Error::point(j, self.num_points));
        }
        if i.0 >= self.num_centers {
            return Err(Error::center(i, self.num_centers));
        }
        Ok(())
    }

    pub fn distance(&self, j: PointId, i: CenterId) -> Result<f64> {
        self.check(j, i)?;
        Ok(self.dist(j.0, i.0))
    }

    pub fn assign_cost(&self, j: PointId, i: CenterId) -> Result<f64> {
        self.check(j, i)?;
        Ok(self.cost(j.0, i.0))
    }

    fn compute_dist(&self, j: usize, i: usize) -> f64 {
        match &self.backend {
            Backend::Matrix(rows) => rows[j][i],
            Backend::Euclidean { points, centers } => euclid(&points[j], &centers[i]),
            Backend::Graph(_) => self.graph_dist.as_ref().expect("graph distances")[j * self.num_centers + i],
        }
    }

    /// Unchecked distance lookup; panics on out-of-range ids.
    #[inline]
    pub(crate) fn dist(&self, j: usize, i: usize) -> f64 {
        match &self.table {
            Some(t) => t.dist[j * self.num_centers + i],
            None => self.compute_dist(j, i),
        }
    }

    /// Unchecked assignment cost `dist^q`.
    #[inline]
    pub(crate) fn cost(&self, j: usize, i: usize) -> f64 {
        match &self.table {
            Some(Table { cost: Some(c), .. }) => c[j * self.num_centers + i],
            Some(Table { dist, cost: None }) => dist[j * self.num_centers + i],
            None => pow_q(self.compute_dist(j, i), self.q),
        }
    }

    /// Materializes the full distance (and cost) table when it fits within
    /// `budget` entries. Lookups afterwards return bit-identical values.
    pub fn all_pairs_precompute(&mut self, budget: usize) -> Precompute {
        let requested = self.num_points.saturating_mul(self.num_centers);
        if requested > budget {
            log::warn!("distance table of {requested} entries exceeds budget {budget}; using on-demand distances");
            return Precompute::OnDemand { requested, budget };
        }
        if self.table.is_none() {
            let mut dist = Vec::with_capacity(requested);
            for j in 0..self.num_points {
                for i in 0..self.num_centers {
                    dist.push(self.compute_dist(j, i));
                }
            }
            let cost = (self.q != 1.0).then(|| dist.iter().map(|&d| pow_q(d, self.q)).collect());
            self.table = Some(Table { dist, cost });
        }
        Precompute::Materialized { entries: requested }
    }

    /// Checks that the point–center distances extend to a metric: for all
    /// points `j, j'` and centers `i, i'`,
    /// `d(j,i) <= d(j,i') + d(j',i') + d(j',i)` within relative tolerance.
    ///
    /// Runs in `O(n² m)`.
    pub fn validate_triangle(&self) -> Result<()> {
        let n = self.num_points;
        let m = self.num_centers;
        // via[j][j'] = min over i' of d(j,i') + d(j',i')
        let mut via = vec![f64::INFINITY; n * n];
        for j in 0..n {
            for jp in 0..n {
                let mut best = f64::INFINITY;
                for ip in 0..m {
                    best = best.min(self.dist(j, ip) + self.dist(jp, ip));
                }
                via[j * n + jp] = best;
            }
        }
        for j in 0..n {
            for i in 0..m {
                let direct = self.dist(j, i);
                for jp in 0..n {
                    let detour = via[j * n + jp] + self.dist(jp, i);
                    if !tol::approx_le(direct, detour) {
                        return Err(Error::invalid(
                            format!("distance[{j}][{i}]"),
                            format!("triangle inequality violated via point {jp}: {direct} > {detour}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum PathAlgo {
    FloydWarshall,
    Dijkstra,
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on distance, then vertex id
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn validate_graph(g: &Graph) -> Result<()> {
    if g.point_vertices.is_empty() {
        return Err(Error::invalid("graph.point_vertices", "no points"));
    }
    if g.center_vertices.is_empty() {
        return Err(Error::invalid("graph.center_vertices", "no centers"));
    }
    for (e, &(u, v, w)) in g.edges.iter().enumerate() {
        if u >= g.num_vertices || v >= g.num_vertices {
            return Err(Error::invalid(
                format!("graph.edges[{e}]"),
                format!("endpoint out of range (num_vertices = {})", g.num_vertices),
            ));
        }
        check_finite_nonneg(|| format!("graph.edges[{e}][2]"), w)?;
    }
    for (name, list) in [
        ("point_vertices", &g.point_vertices),
        ("center_vertices", &g.center_vertices),
    ] {
        if let Some(k) = list.iter().position(|&v| v >= g.num_vertices) {
            return Err(Error::invalid(
                format!("graph.{name}[{k}]"),
                format!("vertex out of range (num_vertices = {})", g.num_vertices),
            ));
        }
    }
    Ok(())
}

fn adjacency(g: &Graph) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); g.num_vertices];
    for &(u, v, w) in &g.edges {
        if u != v {
            adj[u].push((v, w));
            adj[v].push((u, w));
        }
    }
    adj
}

fn floyd_warshall(g: &Graph) -> Vec<f64> {
    let v = g.num_vertices;
    let mut d = vec![f64::INFINITY; v * v];
    for x in 0..v {
        d[x * v + x] = 0.0;
    }
    for &(a, b, w) in &g.edges {
        if a != b && w < d[a * v + b] {
            d[a * v + b] = w;
            d[b * v + a] = w;
        }
    }
    for k in 0..v {
        for a in 0..v {
            let dak = d[a * v + k];
            if dak.is_infinite() {
                continue;
            }
            for b in 0..v {
                let through = dak + d[k * v + b];
                if through < d[a * v + b] {
                    d[a * v + b] = through;
                }
            }
        }
    }
    d
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapItem(0.0, source));
    while let Some(HeapItem(d, u)) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(HeapItem(nd, v));
            }
        }
    }
    dist
}

/// Shortest-path distances from every point vertex to every center vertex,
/// row-major `n × m`. `force` overrides the size-based algorithm choice.
pub(crate) fn graph_terminal_distances(g: &Graph, force: Option<PathAlgo>) -> Result<Vec<f64>> {
    validate_graph(g)?;
    let n = g.point_vertices.len();
    let m = g.center_vertices.len();
    let algo = force.unwrap_or(if g.num_vertices <= FLOYD_WARSHALL_MAX_VERTICES {
        PathAlgo::FloydWarshall
    } else {
        PathAlgo::Dijkstra
    });
    let mut out = vec![0.0; n * m];
    match algo {
        PathAlgo::FloydWarshall => {
            let v = g.num_vertices;
            let d = floyd_warshall(g);
            for (j, &pv) in g.point_vertices.iter().enumerate() {
                for (i, &cv) in g.center_vertices.iter().enumerate() {
                    out[j * m + i] = d[pv * v + cv];
                }
            }
        }
        PathAlgo::Dijkstra => {
            let adj = adjacency(g);
            let mut cache: Vec<Option<Vec<f64>>> = vec![None; g.num_vertices];
            for (i, &cv) in g.center_vertices.iter().enumerate() {
                let from_center = cache[cv].get_or_insert_with(|| dijkstra(&adj, cv));
                for (j, &pv) in g.point_vertices.iter().enumerate() {
                    out[j * m + i] = from_center[pv];
                }
            }
        }
    }
    if let Some(k) = out.iter().position(|d| !d.is_finite()) {
        return Err(Error::invalid(
            "graph",
            format!(
                "center vertex {} unreachable from point vertex {}",
                g.center_vertices[k % m],
                g.point_vertices[k / m]
            ),
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn euclid_space(points: Vec<Vec<f64>>, centers: Vec<Vec<f64>>, q: f64) -> MetricSpace {
        MetricSpace::new(Backend::Euclidean { points, centers }, q).unwrap()
    }

    #[test]
    fn pythagorean_distance() {
        let s = euclid_space(vec![vec![0.0, 0.0]], vec![vec![3.0, 4.0]], 1.0);
        assert_eq!(s.distance(PointId(0), CenterId(0)).unwrap(), 5.0);
    }

    #[test]
    fn single_edge_graph() {
        let g = Graph {
            num_vertices: 2,
            edges: vec![(0, 1, 2.0)],
            point_vertices: vec![0],
            center_vertices: vec![1],
        };
        let s = MetricSpace::new(Backend::Graph(g), 1.0).unwrap();
        assert_eq!(s.distance(PointId(0), CenterId(0)).unwrap(), 2.0);
    }

    #[test]
    fn matrix_entry_verbatim() {
        let m = vec![vec![0.0, 1.5, 2.25], vec![3.0, 0.125, 7.75]];
        let s = MetricSpace::new(Backend::Matrix(m.clone()), 1.0).unwrap();
        assert_eq!(s.distance(PointId(1), CenterId(2)).unwrap(), m[1][2]);
    }

    #[test]
    fn assign_cost_powers() {
        for (q, d, expect) in [(2.0, 5.0, 25.0), (1.0, 5.0, 5.0), (3.0, 2.0, 8.0)] {
            let s = euclid_space(vec![vec![0.0]], vec![vec![d]], q);
            assert_eq!(s.assign_cost(PointId(0), CenterId(0)).unwrap(), expect);
        }
    }

    #[test]
    fn out_of_range_ids() {
        let s = euclid_space(vec![vec![0.0]], vec![vec![1.0]], 1.0);
        assert!(matches!(
            s.distance(PointId(1), CenterId(0)),
            Err(Error::PointOutOfRange { id: 1, len: 1 })
        ));
        assert!(matches!(
            s.assign_cost(PointId(0), CenterId(3)),
            Err(Error::CenterOutOfRange { id: 3, len: 1 })
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(MetricSpace::new(Backend::Matrix(vec![vec![1.0, -1.0]]), 1.0).is_err());
        assert!(MetricSpace::new(Backend::Matrix(vec![vec![1.0], vec![1.0, 2.0]]), 1.0).is_err());
        assert!(MetricSpace::new(Backend::Matrix(vec![vec![f64::NAN]]), 1.0).is_err());
        assert!(MetricSpace::new(Backend::Matrix(vec![vec![1.0]]), 0.5).is_err());
        let g = Graph {
            num_vertices: 3,
            edges: vec![(0, 1, 1.0)],
            point_vertices: vec![0],
            center_vertices: vec![2],
        };
        let err = MetricSpace::new(Backend::Graph(g), 1.0).unwrap_err();
        assert!(err.to_string().contains("unreachable"));
        let g = Graph {
            num_vertices: 2,
            edges: vec![(0, 1, -1.0)],
            point_vertices: vec![0],
            center_vertices: vec![1],
        };
        assert!(MetricSpace::new(Backend::Graph(g), 1.0).is_err());
    }

    fn random_graph(rng: &mut ChaCha8Rng, v: usize) -> Graph {
        let mut edges = Vec::new();
        // spanning path keeps it connected
        for x in 1..v {
            edges.push((x - 1, x, rng.gen_range(0..20) as f64));
        }
        for _ in 0..2 * v {
            let a = rng.gen_range(0..v);
            let b = rng.gen_range(0..v);
            edges.push((a, b, rng.gen_range(0..20) as f64));
        }
        Graph {
            num_vertices: v,
            edges,
            point_vertices: (0..v).step_by(2).collect(),
            center_vertices: (0..v).step_by(3).collect(),
        }
    }

    #[test]
    fn dijkstra_matches_floyd_warshall() {
        // Integer weights keep path sums exact, so equality is bitwise.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for v in [2, 5, 17, 40, 64] {
            let g = random_graph(&mut rng, v);
            let fw = graph_terminal_distances(&g, Some(PathAlgo::FloydWarshall)).unwrap();
            let dj = graph_terminal_distances(&g, Some(PathAlgo::Dijkstra)).unwrap();
            assert_eq!(fw, dj, "v = {v}");
        }
    }

    #[test]
    fn large_graph_uses_dijkstra_consistently() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = random_graph(&mut rng, 90);
        let auto = graph_terminal_distances(&g, None).unwrap();
        let fw = graph_terminal_distances(&g, Some(PathAlgo::FloydWarshall)).unwrap();
        assert_eq!(auto, fw);
    }

    #[test]
    fn precompute_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> = (0..9).map(|_| vec![rng.gen(), rng.gen()]).collect();
        let ctr: Vec<Vec<f64>> = (0..4).map(|_| vec![rng.gen(), rng.gen()]).collect();
        for q in [1.0, 2.0, 2.5] {
            let lazy = euclid_space(pts.clone(), ctr.clone(), q);
            let mut eager = lazy.clone();
            assert_eq!(
                eager.all_pairs_precompute(1000),
                Precompute::Materialized { entries: 36 }
            );
            for j in 0..9 {
                for i in 0..4 {
                    assert_eq!(lazy.dist(j, i).to_bits(), eager.dist(j, i).to_bits());
                    assert_eq!(lazy.cost(j, i).to_bits(), eager.cost(j, i).to_bits());
                }
            }
        }
    }

    #[test]
    fn precompute_budget_fallback() {
        let mut s = euclid_space(vec![vec![0.0]; 10], vec![vec![1.0]; 10], 1.0);
        assert_eq!(
            s.all_pairs_precompute(50),
            Precompute::OnDemand {
                requested: 100,
                budget: 50
            }
        );
        assert!(!s.is_precomputed());
        assert_eq!(s.distance(PointId(3), CenterId(4)).unwrap(), 1.0);
    }

    #[test]
    fn triangle_validation() {
        let ok = MetricSpace::new(Backend::Matrix(vec![vec![0.0, 1.0], vec![1.0, 0.0]]), 1.0).unwrap();
        ok.validate_triangle().unwrap();
        // d(0,1)=10 but 0 -> c0 -> 1 -> c1 costs 0 + 1 + 0
        let bad = MetricSpace::new(Backend::Matrix(vec![vec![0.0, 10.0], vec![1.0, 0.0]]), 1.0).unwrap();
        assert!(bad.validate_triangle().is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.gen(), rng.gen(), rng.gen()]).collect();
        euclid_space(pts.clone(), pts[..5].to_vec(), 1.0)
            .validate_triangle()
            .unwrap();
    }
}
