//! JSON genotype documents.
//!
//! ```json
//! {
//!   "search_space": "So",
//!   "steps": 2,
//!   "reduction_positions": [1, 2],
//!   "share_groups": [[0, 3], [1, 2]],
//!   "cells": [
//!     { "kind": "normal", "edges": [ { "from": 0, "to": 2, "ops": ["simple_conv_3x3"] }, ... ] },
//!     ...
//!   ]
//! }
//! ```

use serde::{Deserialize, Serialize};

use crate::error::DocumentError;
use crate::genotype::{CellKind, CellSpec, EdgeSpec, Genotype};
use crate::op::{OpKind, SearchSpace};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    search_space: SearchSpace,
    steps: usize,
    reduction_positions: Vec<usize>,
    share_groups: Vec<Vec<usize>>,
    cells: Vec<CellDocument>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellDocument {
    kind: KindDocument,
    edges: Vec<EdgeDocument>,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(rename_all = "lowercase")]
enum KindDocument {
    Normal,
    Reduction,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDocument {
    from: usize,
    to: usize,
    ops: Vec<String>,
}

pub fn to_json(genotype: &Genotype) -> String {
    let doc = Document {
        search_space: genotype.search_space,
        steps: genotype.steps,
        reduction_positions: genotype.reduction_positions.iter().copied().collect(),
        share_groups: genotype.share_groups.clone(),
        cells: genotype
            .cells
            .iter()
            .map(|cell| CellDocument {
                kind: match cell.kind {
                    CellKind::Normal => KindDocument::Normal,
                    CellKind::Reduction => KindDocument::Reduction,
                },
                edges: cell
                    .edges
                    .iter()
                    .map(|e| EdgeDocument {
                        from: e.from_node,
                        to: e.to_node,
                        ops: e.ops().map(|op| op.name().to_owned()).collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("genotype documents always serialize");
    text.push('\n');
    text
}

pub fn serialize(genotype: &Genotype) -> Vec<u8> {
    to_json(genotype).into_bytes()
}

pub fn deserialize(bytes: &[u8]) -> Result<Genotype, DocumentError> {
    let doc: Document = serde_json::from_slice(bytes).map_err(|e| DocumentError::Malformed {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let op_count = doc.search_space.op_count();
    let mut cells = Vec::with_capacity(doc.cells.len());
    for (c, cell) in doc.cells.iter().enumerate() {
        let mut edges = Vec::with_capacity(cell.edges.len());
        for (e, edge) in cell.edges.iter().enumerate() {
            let mut spec = EdgeSpec::empty(edge.from, edge.to, op_count);
            for (o, name) in edge.ops.iter().enumerate() {
                let path = format!("cells[{c}].edges[{e}].ops[{o}]");
                let op: OpKind = name
                    .parse()
                    .map_err(|_| DocumentError::UnknownOp { path: path.clone(), name: name.clone() })?;
                if !doc.search_space.contains(op) {
                    return Err(DocumentError::InvalidField {
                        path,
                        message: format!("{op} is not part of search space {}", doc.search_space.tag()),
                    });
                }
                if std::mem::replace(&mut spec.selected[op.ordinal()], true) {
                    return Err(DocumentError::InvalidField { path, message: format!("{op} listed twice") });
                }
            }
            edges.push(spec);
        }
        cells.push(CellSpec {
            steps: doc.steps,
            kind: match cell.kind {
                KindDocument::Normal => CellKind::Normal,
                KindDocument::Reduction => CellKind::Reduction,
            },
            edges,
        });
    }
    let genotype = Genotype {
        search_space: doc.search_space,
        steps: doc.steps,
        cells,
        reduction_positions: doc.reduction_positions.iter().copied().collect(),
        share_groups: doc.share_groups,
    };
    genotype.validate()?;
    Ok(genotype)
}
