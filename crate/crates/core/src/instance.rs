//! Problem instances and their JSON document format.
//!
//! One document format covers all problem families, discriminated by `kind`:
//!
//! ```json
//! { "kind": "ufl-out" | "kcluster-out", "z": 2, "q": 1.0,
//!   "k": 3, "epsilon": 0.0, "opening_costs": 1.0 | [..],
//!   "points": [[..]], "centers": [[..]]   // or
//!   "distance_matrix": [[..]]             // or
//!   "graph": { "num_vertices": .., "edges": [[u, v, w]], "point_vertices": [..], "center_vertices": [..] } }
//! ```

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::error::{Error, Result};
use crate::metric::{Backend, CenterId, Graph, MetricSpace, DEFAULT_PRECOMPUTE_BUDGET};

#[derive(Debug, Clone, PartialEq)]
pub enum OpeningCosts {
    /// Every center costs the same.
    Uniform(f64),
    PerCenter(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemKind {
    /// Facility location with outliers: pay assignment plus opening costs.
    UflOut { opening: OpeningCosts },
    /// k-median / k-means with outliers (the exponent lives on the metric),
    /// with a center budget of `floor((1 + epsilon) k)`.
    KClusterOut { k: usize, epsilon: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Labels {
    #[serde(default)]
    pub points: Vec<String>,
    #[serde(default)]
    pub centers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    metric: MetricSpace,
    kind: ProblemKind,
    z: usize,
    labels: Option<Labels>,
    allow_all_outliers: bool,
}

/// `floor((1 + epsilon) k)`, with a 1e-9 guard so that products such as
/// `1.2 * 5` that land a hair below an integer still round to it.
pub fn center_budget(k: usize, epsilon: f64) -> usize {
    ((1.0 + epsilon) * k as f64 + 1e-9).floor() as usize
}

impl Instance {
    pub fn new(metric: MetricSpace, kind: ProblemKind, z: usize) -> Result<Self> {
        Self::from_parts(metric, kind, z, None, false)
    }

    /// Full constructor. `allow_all_outliers` accepts `z == |points|`, where
    /// every point is discarded and only opening costs remain.
    pub fn from_parts(
        mut metric: MetricSpace,
        kind: ProblemKind,
        z: usize,
        labels: Option<Labels>,
        allow_all_outliers: bool,
    ) -> Result<Self> {
        let n = metric.num_points();
        let m = metric.num_centers();
        if z > n {
            return Err(Error::invalid("z", format!("outlier count {z} exceeds {n} points")));
        }
        if z == n && !allow_all_outliers {
            return Err(Error::invalid(
                "z",
                format!("degenerate outlier count: z = {z} discards every point"),
            ));
        }
        match &kind {
            ProblemKind::UflOut { opening } => match opening {
                OpeningCosts::Uniform(f) => check_cost("opening_costs", *f)?,
                OpeningCosts::PerCenter(fs) => {
                    if fs.len() != m {
                        return Err(Error::invalid(
                            "opening_costs",
                            format!("{} costs given for {m} centers", fs.len()),
                        ));
                    }
                    for (i, &f) in fs.iter().enumerate() {
                        check_cost(&format!("opening_costs[{i}]"), f)?;
                    }
                }
            },
            ProblemKind::KClusterOut { k, epsilon } => {
                if *k == 0 {
                    return Err(Error::invalid("k", "k must be >= 1"));
                }
                if !epsilon.is_finite() || *epsilon < 0.0 {
                    return Err(Error::invalid("epsilon", "epsilon must be finite and >= 0"));
                }
                if *k > m {
                    return Err(Error::invalid("k", format!("k = {k} exceeds {m} candidate centers")));
                }
            }
        }
        if let Some(l) = &labels {
            if !l.points.is_empty() && l.points.len() != n {
                return Err(Error::invalid("labels.points", format!("expected {n} labels")));
            }
            if !l.centers.is_empty() && l.centers.len() != m {
                return Err(Error::invalid("labels.centers", format!("expected {m} labels")));
            }
        }
        metric.all_pairs_precompute(DEFAULT_PRECOMPUTE_BUDGET);
        Ok(Instance {
            metric,
            kind,
            z,
            labels,
            allow_all_outliers,
        })
    }

    pub fn metric(&self) -> &MetricSpace {
        &self.metric
    }

    pub fn kind(&self) -> &ProblemKind {
        &self.kind
    }

    pub fn z(&self) -> usize {
        self.z
    }

    pub fn q(&self) -> f64 {
        self.metric.q()
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_ref()
    }

    pub fn allows_all_outliers(&self) -> bool {
        self.allow_all_outliers
    }

    pub fn num_points(&self) -> usize {
        self.metric.num_points()
    }

    pub fn num_centers(&self) -> usize {
        self.metric.num_centers()
    }

    pub fn is_ufl(&self) -> bool {
        matches!(self.kind, ProblemKind::UflOut { .. })
    }

    /// Largest number of open centers a solution may use; the widened
    /// k-cluster budget is capped at the number of candidates.
    pub fn budget(&self) -> usize {
        match self.kind {
            ProblemKind::UflOut { .. } => self.num_centers(),
            ProblemKind::KClusterOut { k, epsilon } => center_budget(k, epsilon).min(self.num_centers()),
        }
    }

    #[inline]
    pub fn opening_cost(&self, i: CenterId) -> f64 {
        match &self.kind {
            ProblemKind::UflOut {
                opening: OpeningCosts::Uniform(f),
            } => *f,
            ProblemKind::UflOut {
                opening: OpeningCosts::PerCenter(fs),
            } => fs[i.0],
            ProblemKind::KClusterOut { .. } => 0.0,
        }
    }

    /// Same instance with another outlier count.
    pub fn with_z(&self, z: usize) -> Result<Self> {
        Self::from_parts(
            self.metric.clone(),
            self.kind.clone(),
            z,
            self.labels.clone(),
            self.allow_all_outliers,
        )
    }

    /// Same points and centers under a different problem kind.
    pub fn with_kind(&self, kind: ProblemKind) -> Result<Self> {
        Self::from_parts(
            self.metric.clone(),
            kind,
            self.z,
            self.labels.clone(),
            self.allow_all_outliers,
        )
    }

    /// Same instance with assignment cost `distance^q`.
    pub fn with_q(&self, q: f64) -> Result<Self> {
        Self::from_parts(
            self.metric.with_q(q)?,
            self.kind.clone(),
            self.z,
            self.labels.clone(),
            self.allow_all_outliers,
        )
    }
}

fn check_cost(path: &str, f: f64) -> Result<()> {
    if !f.is_finite() || f < 0.0 {
        return Err(Error::invalid(
            path,
            format!("opening cost must be finite and >= 0, got {f}"),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
enum KindTag {
    #[serde(rename = "ufl-out")]
    UflOut,
    #[serde(rename = "kcluster-out")]
    KClusterOut,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum OpeningDoc {
    Uniform(f64),
    PerCenter(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    num_vertices: usize,
    edges: Vec<(usize, usize, f64)>,
    point_vertices: Vec<usize>,
    center_vertices: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    kind: KindTag,
    z: usize,
    q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    opening_costs: Option<OpeningDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    centers: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    distance_matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    graph: Option<GraphDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Labels>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    allow_degenerate_z: bool,
}

/// Parses and validates an instance document.
pub fn load_instance(bytes: &[u8]) -> Result<Instance> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let doc: InstanceDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::Json {
        path: e.path().to_string(),
        source: e.into_inner(),
    })?;
    instance_from_doc(doc)
}

fn instance_from_doc(doc: InstanceDoc) -> Result<Instance> {
    let backend = match (doc.points, doc.centers, doc.distance_matrix, doc.graph) {
        (Some(points), Some(centers), None, None) => Backend::Euclidean { points, centers },
        (None, None, Some(m), None) => Backend::Matrix(m),
        (None, None, None, Some(g)) => Backend::Graph(Graph {
            num_vertices: g.num_vertices,
            edges: g.edges,
            point_vertices: g.point_vertices,
            center_vertices: g.center_vertices,
        }),
        (Some(_), None, None, None) => return Err(Error::invalid("centers", "points given without centers")),
        (None, Some(_), None, None) => return Err(Error::invalid("points", "centers given without points")),
        _ => {
            return Err(Error::invalid(
                "",
                "exactly one of points+centers, distance_matrix, or graph must be present",
            ))
        }
    };
    let metric = MetricSpace::new(backend, doc.q)?;
    let kind = match doc.kind {
        KindTag::UflOut => {
            if doc.k.is_some() {
                return Err(Error::invalid("k", "k is not used by ufl-out"));
            }
            if doc.epsilon.is_some() {
                return Err(Error::invalid("epsilon", "epsilon is not used by ufl-out"));
            }
            let opening = match doc.opening_costs {
                None => OpeningCosts::Uniform(1.0),
                Some(OpeningDoc::Uniform(f)) => OpeningCosts::Uniform(f),
                Some(OpeningDoc::PerCenter(fs)) => OpeningCosts::PerCenter(fs),
            };
            ProblemKind::UflOut { opening }
        }
        KindTag::KClusterOut => {
            if doc.opening_costs.is_some() {
                return Err(Error::invalid("opening_costs", "kcluster-out has no opening costs"));
            }
            let k = doc.k.ok_or_else(|| Error::invalid("k", "kcluster-out requires k"))?;
            ProblemKind::KClusterOut {
                k,
                epsilon: doc.epsilon.unwrap_or(0.0),
            }
        }
    };
    Instance::from_parts(metric, kind, doc.z, doc.labels, doc.allow_degenerate_z)
}

fn doc_from_instance(inst: &Instance) -> InstanceDoc {
    let mut doc = InstanceDoc {
        kind: KindTag::UflOut,
        z: inst.z,
        q: inst.q(),
        k: None,
        epsilon: None,
        opening_costs: None,
        points: None,
        centers: None,
        distance_matrix: None,
        graph: None,
        labels: inst.labels.clone(),
        allow_degenerate_z: inst.allow_all_outliers,
    };
    match &inst.kind {
        ProblemKind::UflOut { opening } => {
            doc.opening_costs = Some(match opening {
                OpeningCosts::Uniform(f) => OpeningDoc::Uniform(*f),
                OpeningCosts::PerCenter(fs) => OpeningDoc::PerCenter(fs.clone()),
            });
        }
        ProblemKind::KClusterOut { k, epsilon } => {
            doc.kind = KindTag::KClusterOut;
            doc.k = Some(*k);
            doc.epsilon = Some(*epsilon);
        }
    }
    match inst.metric.backend() {
        Backend::Matrix(m) => doc.distance_matrix = Some(m.clone()),
        Backend::Euclidean { points, centers } => {
            doc.points = Some(points.clone());
            doc.centers = Some(centers.clone());
        }
        Backend::Graph(g) => {
            doc.graph = Some(GraphDoc {
                num_vertices: g.num_vertices,
                edges: g.edges.clone(),
                point_vertices: g.point_vertices.clone(),
                center_vertices: g.center_vertices.clone(),
            })
        }
    }
    doc
}

/// Canonical document for `inst`: sorted keys, 17 significant digits.
pub fn save_instance(inst: &Instance) -> String {
    canonical::to_string(&doc_from_instance(inst))
}
