use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A primitive candidate operation on a cell edge.
///
/// Variant order is significant: the ordinal of an operation is its position
/// inside every per-edge selection or logit vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OpKind {
    SkipConnect,
    MaxPool3x3,
    AvgPool3x3,
    SepConv3x3,
    SepConv5x5,
    DilConv3x3,
    DilConv5x5,
    Conv3x1_1x3,
    Conv7x1_1x7,
    SimpleConv1x1,
    SimpleConv3x3,
    Bottleneck1x3x1,
}

impl OpKind {
    pub const ALL: [OpKind; 12] = [
        OpKind::SkipConnect,
        OpKind::MaxPool3x3,
        OpKind::AvgPool3x3,
        OpKind::SepConv3x3,
        OpKind::SepConv5x5,
        OpKind::DilConv3x3,
        OpKind::DilConv5x5,
        OpKind::Conv3x1_1x3,
        OpKind::Conv7x1_1x7,
        OpKind::SimpleConv1x1,
        OpKind::SimpleConv3x3,
        OpKind::Bottleneck1x3x1,
    ];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    pub fn from_ordinal(index: usize) -> Option<OpKind> {
        Self::ALL.get(index).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            OpKind::SkipConnect => "skip_connect",
            OpKind::MaxPool3x3 => "max_pool_3x3",
            OpKind::AvgPool3x3 => "avg_pool_3x3",
            OpKind::SepConv3x3 => "sep_conv_3x3",
            OpKind::SepConv5x5 => "sep_conv_5x5",
            OpKind::DilConv3x3 => "dil_conv_3x3",
            OpKind::DilConv5x5 => "dil_conv_5x5",
            OpKind::Conv3x1_1x3 => "conv_3x1_1x3",
            OpKind::Conv7x1_1x7 => "conv_7x1_1x7",
            OpKind::SimpleConv1x1 => "simple_conv_1x1",
            OpKind::SimpleConv3x3 => "simple_conv_3x3",
            OpKind::Bottleneck1x3x1 => "bottleneck_1x3x1",
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownOp(pub String);

impl fmt::Display for UnknownOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown operation {:?}", self.0)
    }
}

impl std::error::Error for UnknownOp {}

impl FromStr for OpKind {
    type Err = UnknownOp;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        OpKind::ALL
            .iter()
            .copied()
            .find(|op| op.name() == s)
            .ok_or_else(|| UnknownOp(s.to_owned()))
    }
}

/// The two supported operation sets: the 7-op DARTS space and its 12-op extension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SearchSpace {
    #[serde(rename = "S")]
    Darts,
    #[serde(rename = "So")]
    Extended,
}

impl SearchSpace {
    /// Number of candidate operations per edge.
    pub fn op_count(self) -> usize {
        match self {
            SearchSpace::Darts => 7,
            SearchSpace::Extended => 12,
        }
    }

    pub fn ops(self) -> &'static [OpKind] {
        &OpKind::ALL[..self.op_count()]
    }

    pub fn contains(self, op: OpKind) -> bool {
        op.ordinal() < self.op_count()
    }

    pub fn tag(self) -> &'static str {
        match self {
            SearchSpace::Darts => "S",
            SearchSpace::Extended => "So",
        }
    }
}

impl FromStr for SearchSpace {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "S" => Ok(SearchSpace::Darts),
            "So" => Ok(SearchSpace::Extended),
            other => Err(format!("unknown search space {other:?} (expected \"S\" or \"So\")")),
        }
    }
}

/// Benchmark score per operation, as a fraction of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct OpScoreTable {
    scores: [f64; 12],
}

impl OpScoreTable {
    /// Published proxy-network benchmark scores (top-1 percentages divided by 100).
    pub fn published() -> Self {
        let mut scores = [0.0; 12];
        for (op, pct) in [
            (OpKind::Conv3x1_1x3, 82.76),
            (OpKind::Conv7x1_1x7, 82.72),
            (OpKind::MaxPool3x3, 82.96),
            (OpKind::AvgPool3x3, 82.51),
            (OpKind::SkipConnect, 82.15),
            (OpKind::SimpleConv1x1, 82.27),
            (OpKind::SimpleConv3x3, 83.12),
            (OpKind::SepConv3x3, 83.19),
            (OpKind::SepConv5x5, 84.87),
            (OpKind::DilConv3x3, 82.96),
            (OpKind::DilConv5x5, 82.99),
            (OpKind::Bottleneck1x3x1, 83.06),
        ] {
            scores[op.ordinal()] = pct / 100.0;
        }
        OpScoreTable { scores }
    }

    /// Builds a table from explicit scores. Every operation must be present
    /// with a score strictly inside (0, 1).
    pub fn from_scores(
        entries: impl IntoIterator<Item = (OpKind, f64)>,
    ) -> Result<Self, InvalidScoreTable> {
        let mut scores = [f64::NAN; 12];
        for (op, score) in entries {
            if !(score > 0.0 && score < 1.0) {
                return Err(InvalidScoreTable::OutOfRange(op, score));
            }
            scores[op.ordinal()] = score;
        }
        if let Some(missing) = OpKind::ALL.iter().find(|op| scores[op.ordinal()].is_nan()) {
            return Err(InvalidScoreTable::Missing(*missing));
        }
        Ok(OpScoreTable { scores })
    }

    pub fn score(&self, op: OpKind) -> f64 {
        self.scores[op.ordinal()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (OpKind, f64)> + '_ {
        OpKind::ALL.iter().map(move |&op| (op, self.score(op)))
    }
}

impl Default for OpScoreTable {
    fn default() -> Self {
        Self::published()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InvalidScoreTable {
    #[error("score for {0} is {1}, expected a value strictly between 0 and 1")]
    OutOfRange(OpKind, f64),
    #[error("no score given for {0}")]
    Missing(OpKind),
}
