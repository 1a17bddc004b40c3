//! Exact cost evaluation with outliers and incremental swap evaluation.
//!
//! For an open set `S`, every point is tied to its nearest open center
//! (smallest id on ties), the `z` points with the largest assignment cost are
//! discarded (the larger id is discarded first on ties), and the cost is the
//! remaining assignment cost plus the opening cost of `S`.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::canonical;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::metric::{CenterId, PointId};

/// A point's distance and assignment cost to one open center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Near {
    pub center: CenterId,
    pub dist: f64,
    pub cost: f64,
}

impl Near {
    #[inline]
    fn of(inst: &Instance, j: usize, i: usize) -> Near {
        let m = inst.metric();
        Near {
            center: CenterId(i),
            dist: m.dist(j, i),
            cost: m.cost(j, i),
        }
    }

    /// Strict "closer than" under the (distance, id) order.
    #[inline]
    fn beats(&self, other: &Near) -> bool {
        match self.dist.partial_cmp(&other.dist).expect("finite distances") {
            Ordering::Less => true,
            Ordering::Greater => false,
            Ordering::Equal => self.center < other.center,
        }
    }
}

/// Tracks the best and second-best candidates seen so far.
#[derive(Default, Clone, Copy)]
struct Top2 {
    first: Option<Near>,
    second: Option<Near>,
}

impl Top2 {
    #[inline]
    fn push(&mut self, c: Near) {
        match self.first {
            None => self.first = Some(c),
            Some(f) if c.beats(&f) => {
                self.second = self.first;
                self.first = Some(c);
            }
            Some(_) => match self.second {
                Some(s) if !c.beats(&s) => {}
                _ => self.second = Some(c),
            },
        }
    }
}

/// An exchange closing `remove` (⊆ S) and opening `add` (disjoint from S).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SwapMove {
    pub add: Vec<CenterId>,
    pub remove: Vec<CenterId>,
}

impl SwapMove {
    /// Builds a move with both sides sorted.
    pub fn new(mut add: Vec<CenterId>, mut remove: Vec<CenterId>) -> Self {
        add.sort_unstable();
        remove.sort_unstable();
        SwapMove { add, remove }
    }

    pub fn empty() -> Self {
        SwapMove::new(Vec::new(), Vec::new())
    }

    /// The move undoing this one.
    pub fn reversed(&self) -> Self {
        SwapMove::new(self.remove.clone(), self.add.clone())
    }

    pub fn is_empty(&self) -> bool {
        self.add.is_empty() && self.remove.is_empty()
    }

    pub fn size(&self) -> usize {
        self.add.len() + self.remove.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    open: Vec<CenterId>,
    sigma: Vec<Option<CenterId>>,
    outliers: Vec<PointId>,
    nearest: Vec<Near>,
    second: Vec<Option<Near>>,
    total_assign: f64,
    total_open: f64,
}

impl Solution {
    /// Open centers, ascending.
    pub fn open(&self) -> &[CenterId] {
        &self.open
    }

    pub fn is_open(&self, i: CenterId) -> bool {
        self.open.binary_search(&i).is_ok()
    }

    /// Assignment of each point; `None` marks an outlier.
    pub fn sigma(&self) -> &[Option<CenterId>] {
        &self.sigma
    }

    /// Discarded points, ascending.
    pub fn outliers(&self) -> &[PointId] {
        &self.outliers
    }

    pub fn is_outlier(&self, j: PointId) -> bool {
        self.sigma[j.0].is_none()
    }

    pub fn nearest(&self) -> &[Near] {
        &self.nearest
    }

    pub fn second_nearest(&self) -> &[Option<Near>] {
        &self.second
    }

    pub fn total_assign(&self) -> f64 {
        self.total_assign
    }

    pub fn total_open(&self) -> f64 {
        self.total_open
    }

    pub fn cost(&self) -> f64 {
        self.total_assign + self.total_open
    }

    pub fn to_doc(&self) -> SolutionDoc {
        SolutionDoc {
            open: self.open.iter().map(|c| c.0).collect(),
            outliers: self.outliers.iter().map(|p| p.0).collect(),
            sigma: self.sigma.iter().map(|s| s.map_or(-1, |c| c.0 as i64)).collect(),
            cost: self.cost(),
        }
    }
}

/// Wire form of a solution; `-1` in `sigma` marks an outlier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionDoc {
    pub open: Vec<usize>,
    pub outliers: Vec<usize>,
    pub sigma: Vec<i64>,
    pub cost: f64,
}

impl SolutionDoc {
    pub fn to_json(&self) -> String {
        canonical::to_string(self)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_slice(bytes);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Json {
            path: e.path().to_string(),
            source: e.into_inner(),
        })
    }

    pub fn open_centers(&self) -> Vec<CenterId> {
        self.open.iter().copied().map(CenterId).collect()
    }
}

/// Marks the `z` points to discard: largest cost first, larger id first on ties.
pub(crate) fn outlier_mask(costs: &[f64], z: usize) -> Vec<bool> {
    let n = costs.len();
    let mut mask = vec![false; n];
    if z == 0 {
        return mask;
    }
    if z >= n {
        return vec![true; n];
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.select_nth_unstable_by(z - 1, |&a, &b| {
        costs[b].partial_cmp(&costs[a]).expect("finite costs").then(b.cmp(&a))
    });
    for &j in &idx[..z] {
        mask[j] = true;
    }
    mask
}

fn assign_total(costs: &[f64], mask: &[bool]) -> f64 {
    costs.iter().zip(mask).filter(|(_, &out)| !out).map(|(c, _)| c).sum()
}

fn open_total(inst: &Instance, open: &[CenterId]) -> f64 {
    if inst.is_ufl() {
        open.iter().map(|&i| inst.opening_cost(i)).sum()
    } else {
        0.0
    }
}

fn finish(inst: &Instance, open: Vec<CenterId>, nearest: Vec<Near>, second: Vec<Option<Near>>) -> Solution {
    let costs: Vec<f64> = nearest.iter().map(|n| n.cost).collect();
    let mask = outlier_mask(&costs, inst.z());
    let sigma = nearest
        .iter()
        .zip(&mask)
        .map(|(n, &out)| (!out).then_some(n.center))
        .collect();
    let outliers = (0..costs.len()).filter(|&j| mask[j]).map(PointId).collect();
    let total_assign = assign_total(&costs, &mask);
    let total_open = open_total(inst, &open);
    Solution {
        open,
        sigma,
        outliers,
        nearest,
        second,
        total_assign,
        total_open,
    }
}

fn check_open_set(inst: &Instance, open: &[CenterId]) -> Result<Vec<CenterId>> {
    if open.is_empty() {
        return Err(Error::EmptyOpenSet);
    }
    let m = inst.num_centers();
    if let Some(&bad) = open.iter().find(|c| c.0 >= m) {
        return Err(Error::center(bad, m));
    }
    let mut sorted = open.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("open", "duplicate center"));
    }
    if sorted.len() > inst.budget() {
        return Err(Error::BudgetExceeded {
            size: sorted.len(),
            budget: inst.budget(),
        });
    }
    Ok(sorted)
}

/// Evaluates the open set from scratch.
pub fn evaluate(inst: &Instance, open: &[CenterId]) -> Result<Solution> {
    let open = check_open_set(inst, open)?;
    let n = inst.num_points();
    let mut nearest = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for j in 0..n {
        let mut t = Top2::default();
        for &i in &open {
            t.push(Near::of(inst, j, i.0));
        }
        nearest.push(t.first.expect("nonempty open set"));
        second.push(t.second);
    }
    Ok(finish(inst, open, nearest, second))
}

/// Cost of an open set without building a [`Solution`]. `open` must be a
/// valid, sorted, duplicate-free set; the result is bit-identical to
/// `evaluate(inst, open)?.cost()`.
pub(crate) fn cost_of_valid_set(inst: &Instance, open: &[CenterId], costs: &mut Vec<f64>) -> f64 {
    costs.clear();
    for j in 0..inst.num_points() {
        let mut best = Near::of(inst, j, open[0].0);
        for &i in &open[1..] {
            let c = Near::of(inst, j, i.0);
            if c.beats(&best) {
                best = c;
            }
        }
        costs.push(best.cost);
    }
    let mask = outlier_mask(costs, inst.z());
    assign_total(costs, &mask) + open_total(inst, open)
}

struct CheckedMove {
    new_open: Vec<CenterId>,
    removed: Vec<bool>,
}

fn check_move(inst: &Instance, sol: &Solution, mv: &SwapMove) -> Result<CheckedMove> {
    let m = inst.num_centers();
    let mut removed = vec![false; m];
    for &i in &mv.remove {
        if i.0 >= m {
            return Err(Error::center(i, m));
        }
        if !sol.is_open(i) {
            return Err(Error::InvalidMove(format!("center {} is not open", i.0)));
        }
        if std::mem::replace(&mut removed[i.0], true) {
            return Err(Error::InvalidMove(format!("center {} removed twice", i.0)));
        }
    }
    let mut added = vec![false; m];
    for &i in &mv.add {
        if i.0 >= m {
            return Err(Error::center(i, m));
        }
        if sol.is_open(i) {
            return Err(Error::InvalidMove(format!("center {} is already open", i.0)));
        }
        if std::mem::replace(&mut added[i.0], true) {
            return Err(Error::InvalidMove(format!("center {} added twice", i.0)));
        }
    }
    let mut new_open: Vec<CenterId> = sol
        .open
        .iter()
        .copied()
        .filter(|i| !removed[i.0])
        .chain(mv.add.iter().copied())
        .collect();
    new_open.sort_unstable();
    if new_open.is_empty() {
        return Err(Error::EmptyOpenSet);
    }
    if new_open.len() > inst.budget() {
        return Err(Error::BudgetExceeded {
            size: new_open.len(),
            budget: inst.budget(),
        });
    }
    Ok(CheckedMove { new_open, removed })
}

/// Cost of the swapped set, computed incrementally from `sol`'s caches.
pub fn swap_cost(inst: &Instance, sol: &Solution, mv: &SwapMove) -> Result<f64> {
    let chk = check_move(inst, sol, mv)?;
    let n = inst.num_points();
    let mut costs = Vec::with_capacity(n);
    for j in 0..n {
        let near = sol.nearest[j];
        let kept = if !chk.removed[near.center.0] {
            Some(near)
        } else {
            sol.second[j].filter(|s| !chk.removed[s.center.0])
        };
        let best = match kept {
            Some(mut best) => {
                for &p in &mv.add {
                    let c = Near::of(inst, j, p.0);
                    if c.beats(&best) {
                        best = c;
                    }
                }
                best
            }
            None => {
                let mut t = Top2::default();
                for &i in &chk.new_open {
                    t.push(Near::of(inst, j, i.0));
                }
                t.first.expect("nonempty open set")
            }
        };
        costs.push(best.cost);
    }
    let mask = outlier_mask(&costs, inst.z());
    Ok(assign_total(&costs, &mask) + open_total(inst, &chk.new_open))
}

/// `cost(S - Q ∪ P) - cost(S)`; `sol` is left untouched.
pub fn delta_of_swap(inst: &Instance, sol: &Solution, mv: &SwapMove) -> Result<f64> {
    Ok(swap_cost(inst, sol, mv)? - sol.cost())
}

/// Applies the move and returns the new solution. Points whose nearest or
/// second-nearest center closes are rescanned; the others only compare
/// against the opened centers.
pub fn apply_swap(inst: &Instance, sol: &Solution, mv: &SwapMove) -> Result<Solution> {
    let chk = check_move(inst, sol, mv)?;
    let n = inst.num_points();
    let mut nearest = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for j in 0..n {
        let near = sol.nearest[j];
        let sec = sol.second[j];
        let intact = !chk.removed[near.center.0] && sec.is_none_or(|s| !chk.removed[s.center.0]);
        let mut t = Top2::default();
        if intact {
            t.push(near);
            if let Some(s) = sec {
                t.push(s);
            }
            for &p in &mv.add {
                t.push(Near::of(inst, j, p.0));
            }
        } else {
            for &i in &chk.new_open {
                t.push(Near::of(inst, j, i.0));
            }
        }
        nearest.push(t.first.expect("nonempty open set"));
        second.push(t.second);
    }
    Ok(finish(inst, chk.new_open, nearest, second))
}
