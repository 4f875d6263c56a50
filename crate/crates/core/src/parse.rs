//! Discretization of architecture logits into genotypes.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::alpha::AlphaTable;
use crate::error::AlphaError;
use crate::genotype::{edge_pairs, CellSpec, EdgeSpec, Genotype};

/// Discretization threshold on sigmoid weights used by the edge and sparse methods.
pub const DEFAULT_THRESHOLD: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseMethod {
    /// Two strongest incoming edges per node, strongest softmax op on each.
    Darts,
    /// Up to two ops per edge whose sigmoid weight clears the threshold.
    Edge,
    /// The single strongest op per edge.
    Sparse,
}

impl ParseMethod {
    pub fn name(self) -> &'static str {
        match self {
            ParseMethod::Darts => "darts",
            ParseMethod::Edge => "edge",
            ParseMethod::Sparse => "sparse",
        }
    }
}

impl fmt::Display for ParseMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ParseMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "darts" => Ok(ParseMethod::Darts),
            "edge" => Ok(ParseMethod::Edge),
            "sparse" => Ok(ParseMethod::Sparse),
            other => Err(format!("unknown parse method {other:?} (expected darts, edge or sparse)")),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&a| (a - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest weight; the lowest index wins ties.
fn argmax(weights: &[f64]) -> usize {
    let mut best = 0;
    for (i, &w) in weights.iter().enumerate().skip(1) {
        if w > weights[best] {
            best = i;
        }
    }
    best
}

/// Descending by weight, ascending by index on ties.
fn by_weight_desc(weights: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| {
        weights[b]
            .partial_cmp(&weights[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    }
}

pub fn parse_alpha(alpha: &AlphaTable, method: ParseMethod, threshold: f64) -> Result<Genotype, AlphaError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(AlphaError::Threshold(threshold));
    }
    alpha.validate()?;
    let k = alpha.op_count();
    let pairs = edge_pairs(alpha.steps);
    let cells = (0..alpha.n_cells)
        .map(|c| {
            let table = alpha.cell_table(c);
            let selections = match method {
                ParseMethod::Edge => table.iter().map(|l| parse_edge(l, threshold)).collect(),
                ParseMethod::Sparse => table.iter().map(|l| parse_sparse(l)).collect(),
                ParseMethod::Darts => parse_darts(table, &pairs, alpha.steps),
            };
            let edges = pairs
                .iter()
                .zip(selections)
                .map(|(&(from, to), ops): (&(usize, usize), Vec<usize>)| {
                    let mut edge = EdgeSpec::empty(from, to, k);
                    for op in ops {
                        edge.selected[op] = true;
                    }
                    edge
                })
                .collect();
            CellSpec { steps: alpha.steps, kind: alpha.kind(c), edges }
        })
        .collect();
    let genotype = Genotype {
        search_space: alpha.search_space,
        steps: alpha.steps,
        cells,
        reduction_positions: alpha.reduction_positions.clone(),
        share_groups: alpha.share_groups.clone(),
    };
    genotype.validate()?;
    Ok(genotype)
}

fn parse_edge(logits: &[f64], threshold: f64) -> Vec<usize> {
    let weights: Vec<f64> = logits.iter().map(|&a| sigmoid(a)).collect();
    let mut above: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > threshold).collect();
    if above.is_empty() {
        return vec![argmax(&weights)];
    }
    above.sort_by(by_weight_desc(&weights));
    above.truncate(2);
    above
}

fn parse_sparse(logits: &[f64]) -> Vec<usize> {
    let weights: Vec<f64> = logits.iter().map(|&a| sigmoid(a)).collect();
    vec![argmax(&weights)]
}

fn parse_darts(table: &[Vec<f64>], pairs: &[(usize, usize)], steps: usize) -> Vec<Vec<usize>> {
    let mut chosen = vec![Vec::new(); pairs.len()];
    let strongest: Vec<(f64, usize)> = table
        .iter()
        .map(|logits| {
            let w = softmax(logits);
            let op = argmax(&w);
            (w[op], op)
        })
        .collect();
    for node in 2..steps + 2 {
        let mut incoming: Vec<usize> = (0..pairs.len()).filter(|&e| pairs[e].1 == node).collect();
        incoming.sort_by(|&a, &b| {
            strongest[b]
                .0
                .partial_cmp(&strongest[a].0)
                .unwrap_or(Ordering::Equal)
                .then(strongest[a].1.cmp(&strongest[b].1))
                .then(pairs[a].0.cmp(&pairs[b].0))
        });
        for &e in incoming.iter().take(2) {
            chosen[e] = vec![strongest[e].1];
        }
    }
    chosen
}
