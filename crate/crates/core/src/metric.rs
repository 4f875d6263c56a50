//! Distance between architectures.
//!
//! Edges are compared with a weighted Hamming distance over their operation
//! selections, cells with the Hausdorff distance between their sets of edge
//! vectors, and architectures with the mean cell distance over positions.
//! Values are in distance units (DU).

use std::fmt::Write as _;

use crate::error::MetricError;
use crate::genotype::{CellSpec, Genotype};
use crate::op::{OpKind, OpScoreTable, SearchSpace};

/// Per-operation weights of the Hamming distance.
#[derive(Debug, Clone, PartialEq)]
pub struct HammingWeights {
    w: Vec<f64>,
}

impl HammingWeights {
    pub fn new(w: Vec<f64>) -> Self {
        HammingWeights { w }
    }

    /// Scores of the first `K` operations of `space`.
    pub fn for_space(space: SearchSpace, scores: &OpScoreTable) -> Self {
        HammingWeights { w: space.ops().iter().map(|&op| scores.score(op)).collect() }
    }

    /// Published weights for the larger of the two genotypes' search spaces.
    pub fn for_pair(a: &Genotype, b: &Genotype) -> Self {
        let space = if a.op_count() >= b.op_count() { a.search_space } else { b.search_space };
        Self::for_space(space, &OpScoreTable::published())
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn mean(&self) -> f64 {
        self.w.iter().sum::<f64>() / self.w.len() as f64
    }

    pub fn weight(&self, op: OpKind) -> f64 {
        self.w[op.ordinal()]
    }
}

/// Mean over positions of the weight where `u` and `v` differ (zero elsewhere).
pub fn hamming(u: &[bool], v: &[bool], w: &HammingWeights) -> Result<f64, MetricError> {
    if u.len() != v.len() || u.len() != w.len() {
        return Err(MetricError::LengthMismatch { u: u.len(), v: v.len(), w: w.len() });
    }
    Ok(padded_hamming(u, v, w))
}

/// Hamming distance after zero-extending both vectors to the weight length.
fn padded_hamming(u: &[bool], v: &[bool], w: &HammingWeights) -> f64 {
    let at = |x: &[bool], i: usize| x.get(i).copied().unwrap_or(false);
    let total: f64 = (0..w.len())
        .filter(|&i| at(u, i) != at(v, i))
        .map(|i| w.w[i])
        .sum();
    total / w.len() as f64
}

fn check_cells(x: &CellSpec, y: &CellSpec, w: &HammingWeights) -> Result<(), MetricError> {
    if x.steps != y.steps {
        return Err(MetricError::StepMismatch { left: x.steps, right: y.steps });
    }
    for e in x.edges.iter().chain(&y.edges) {
        if e.selected.len() > w.len() {
            return Err(MetricError::LengthMismatch { u: e.selected.len(), v: e.selected.len(), w: w.len() });
        }
    }
    Ok(())
}

/// Largest distance from an edge of `x` to its nearest edge of `y`.
pub fn directed_hausdorff(x: &CellSpec, y: &CellSpec, w: &HammingWeights) -> Result<f64, MetricError> {
    check_cells(x, y, w)?;
    Ok(directed(x, y, w))
}

fn directed(x: &CellSpec, y: &CellSpec, w: &HammingWeights) -> f64 {
    x.edges
        .iter()
        .map(|a| {
            y.edges
                .iter()
                .map(|b| padded_hamming(&a.selected, &b.selected, w))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Hausdorff distance between the edge sets of two cells: the larger of the
/// two directed distances.
pub fn hausdorff_cell(x: &CellSpec, y: &CellSpec, w: &HammingWeights) -> Result<f64, MetricError> {
    check_cells(x, y, w)?;
    Ok(directed(x, y, w).max(directed(y, x, w)))
}

/// Mean symmetrized Hausdorff distance between cells at equal positions.
pub fn metric_m(a: &Genotype, b: &Genotype, w: &HammingWeights) -> Result<f64, MetricError> {
    if a.n_cells() != b.n_cells() {
        return Err(MetricError::CellCountMismatch { left: a.n_cells(), right: b.n_cells() });
    }
    let mut total = 0.0;
    for (x, y) in a.cells.iter().zip(&b.cells) {
        total += hausdorff_cell(x, y, w)?;
    }
    Ok(total / a.n_cells() as f64)
}

/// Symmetric matrix of pairwise distances with a zero diagonal.
pub fn pairwise_matrix(genotypes: &[Genotype], w: &HammingWeights) -> Result<Vec<Vec<f64>>, MetricError> {
    let n = genotypes.len();
    if let Some(first) = genotypes.first() {
        if let Some((index, g)) = genotypes.iter().enumerate().find(|(_, g)| g.n_cells() != first.n_cells()) {
            return Err(MetricError::MixedCellCounts { index, expected: first.n_cells(), found: g.n_cells() });
        }
    }
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = metric_m(&genotypes[i], &genotypes[j], w)?;
            matrix[i][j] = d;
            matrix[j][i] = d;
        }
    }
    Ok(matrix)
}

/// Summary of the off-diagonal entries of a distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseStats {
    pub pairs: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub min: f64,
    pub max: f64,
    pub closest: (usize, usize),
    pub farthest: (usize, usize),
}

pub fn pairwise_stats(matrix: &[Vec<f64>]) -> Option<PairwiseStats> {
    let entries: Vec<((usize, usize), f64)> = (0..matrix.len())
        .flat_map(|i| (i + 1..matrix.len()).map(move |j| (i, j)))
        .map(|(i, j)| ((i, j), matrix[i][j]))
        .collect();
    if entries.is_empty() {
        return None;
    }
    let n = entries.len() as f64;
    let mean = entries.iter().map(|e| e.1).sum::<f64>() / n;
    let var = entries.iter().map(|e| (e.1 - mean).powi(2)).sum::<f64>() / n;
    let closest = entries.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    let farthest = entries.iter().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    Some(PairwiseStats {
        pairs: entries.len(),
        mean,
        std_dev: var.sqrt(),
        min: closest.1,
        max: farthest.1,
        closest: closest.0,
        farthest: farthest.0,
    })
}

pub fn matrix_csv(labels: &[String], matrix: &[Vec<f64>]) -> String {
    let mut out = String::from("label");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (l, row) in labels.iter().zip(matrix) {
        out.push_str(l);
        for v in row {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Distance from the starting architecture, one value per completed epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DistanceTrace {
    points: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TraceError {
    #[error("epoch {epoch} does not follow epoch {last}")]
    NotIncreasing { last: usize, epoch: usize },
    #[error("distance {0} is negative or not finite")]
    BadValue(f64),
}

impl DistanceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, epoch: usize, distance: f64) -> Result<(), TraceError> {
        if !(distance.is_finite() && distance >= 0.0) {
            return Err(TraceError::BadValue(distance));
        }
        if let Some(&(last, _)) = self.points.last() {
            if epoch <= last {
                return Err(TraceError::NotIncreasing { last, epoch });
            }
        }
        self.points.push((epoch, distance));
        Ok(())
    }

    pub fn from_points(points: impl IntoIterator<Item = (usize, f64)>) -> Result<Self, TraceError> {
        let mut trace = DistanceTrace::new();
        for (e, d) in points {
            trace.push(e, d)?;
        }
        Ok(trace)
    }

    pub fn points(&self) -> &[(usize, f64)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,distance_du\n");
        for (e, d) in &self.points {
            let _ = writeln!(out, "{e},{d}");
        }
        out
    }
}

/// When a plateau rule fires.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauRule {
    pub window: usize,
    pub start_epoch: usize,
    pub tolerance: f64,
}

impl Default for PlateauRule {
    fn default() -> Self {
        PlateauRule { window: 5, start_epoch: 10, tolerance: 1e-3 }
    }
}

/// First epoch `e` closing a run of `window` consecutive recorded epochs, all
/// at or after `start_epoch`, whose values span at most `tolerance`.
pub fn plateau_stop(trace: &DistanceTrace, rule: PlateauRule) -> Option<usize> {
    let window = rule.window.max(1);
    let points = trace.points();
    (window - 1..points.len()).find_map(|end| {
        let run = &points[end + 1 - window..=end];
        let (first, last) = (run[0].0, run[window - 1].0);
        if first < rule.start_epoch || last - first != window - 1 {
            return None;
        }
        let lo = run.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi = run.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        (hi - lo <= rule.tolerance).then_some(last)
    })
}
