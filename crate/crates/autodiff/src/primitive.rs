//! The candidate operations of a cell edge and the mixtures over them.

use ddarts_core::OpKind;
use rand::Rng;

use crate::error::AutodiffError;
use crate::graph::{Graph, Var};
use crate::kernels::Conv2dSpec;
use crate::params::{Binding, ParamId, ParamStore};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
struct Conv {
    weight: ParamId,
    spec: Conv2dSpec,
}

/// Affine per-channel normalization parameters.
#[derive(Debug, Clone)]
pub struct Norm {
    gamma: ParamId,
    beta: ParamId,
}

impl Norm {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize) -> Self {
        Norm {
            gamma: store.add(format!("{name}.gamma"), Tensor::full(&[channels], 1.0)),
            beta: store.add(format!("{name}.beta"), Tensor::zeros(&[channels])),
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &Binding, x: Var) -> Var {
        g.norm(x, p[self.gamma], p[self.beta])
    }
}

/// One or more convolutions followed by normalization and ReLU.
#[derive(Debug, Clone)]
pub struct ConvStage {
    convs: Vec<Conv>,
    norm: Norm,
}

/// Kernel description for [`ConvStage::new`].
#[derive(Debug, Clone, Copy)]
pub struct ConvShape {
    pub cin: usize,
    pub cout: usize,
    pub kernel: (usize, usize),
    pub spec: Conv2dSpec,
}

impl ConvStage {
    pub fn new(store: &mut ParamStore, rng: &mut impl Rng, name: &str, shapes: &[ConvShape]) -> Self {
        let convs = shapes
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let cin_g = s.cin / s.spec.groups;
                let fan_in = cin_g * s.kernel.0 * s.kernel.1;
                let weight =
                    store.add_he_uniform(format!("{name}.conv{i}"), &[s.cout, cin_g, s.kernel.0, s.kernel.1], fan_in, rng);
                Conv { weight, spec: s.spec }
            })
            .collect();
        let out = shapes.last().expect("a stage needs a convolution").cout;
        ConvStage { convs, norm: Norm::new(store, &format!("{name}.norm"), out) }
    }

    /// A single `k x k` convolution stage.
    pub fn plain(store: &mut ParamStore, rng: &mut impl Rng, name: &str, cin: usize, cout: usize, k: usize, stride: usize) -> Self {
        let shape = ConvShape { cin, cout, kernel: (k, k), spec: Conv2dSpec::new(stride, k / 2) };
        ConvStage::new(store, rng, name, &[shape])
    }

    pub fn forward(&self, g: &mut Graph, p: &Binding, mut x: Var) -> Var {
        for conv in &self.convs {
            x = g.conv2d(x, p[conv.weight], conv.spec);
        }
        let y = self.norm.forward(g, p, x);
        g.relu(y)
    }
}

/// Halves the spatial size with two offset 1x1 stride-2 convolutions whose
/// outputs are concatenated along channels.
#[derive(Debug, Clone)]
pub struct FactorizedReduce {
    a: ParamId,
    b: ParamId,
    norm: Norm,
}

impl FactorizedReduce {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
        cin: usize,
        cout: usize,
    ) -> Result<Self, AutodiffError> {
        if !cout.is_multiple_of(2) || cout == 0 {
            return Err(AutodiffError::Unconfigured {
                op: "factorized reduction".into(),
                reason: format!("output channels must be even and positive, got {cout}"),
            });
        }
        Ok(FactorizedReduce {
            a: store.add_he_uniform(format!("{name}.a"), &[cout / 2, cin, 1, 1], cin, rng),
            b: store.add_he_uniform(format!("{name}.b"), &[cout / 2, cin, 1, 1], cin, rng),
            norm: Norm::new(store, &format!("{name}.norm"), cout),
        })
    }

    pub fn forward(&self, g: &mut Graph, p: &Binding, x: Var) -> Var {
        let spec = Conv2dSpec::new(2, 0);
        let left = g.conv2d(x, p[self.a], spec);
        let shifted = g.crop(x, 1, 1);
        let right = g.conv2d(shifted, p[self.b], spec);
        let cat = g.concat(&[left, right]);
        let y = self.norm.forward(g, p, cat);
        g.relu(y)
    }
}

#[derive(Debug, Clone)]
enum Body {
    Identity,
    Reduce(FactorizedReduce),
    MaxPool,
    AvgPool,
    Stages(Vec<ConvStage>),
}

/// A configured candidate operation with its parameters in a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct PrimitiveOp {
    kind: OpKind,
    stride: usize,
    channels: usize,
    body: Body,
}

impl PrimitiveOp {
    pub fn new(
        kind: OpKind,
        channels: usize,
        stride: usize,
        store: &mut ParamStore,
        rng: &mut impl Rng,
        name: &str,
    ) -> Result<Self, AutodiffError> {
        if !(stride == 1 || stride == 2) {
            return Err(AutodiffError::Unconfigured { op: kind.to_string(), reason: format!("stride {stride}") });
        }
        if channels == 0 {
            return Err(AutodiffError::Unconfigured { op: kind.to_string(), reason: "zero channels".into() });
        }
        let c = channels;
        let s = stride;
        let depthwise = |k: usize, stride: usize, dilation: usize| ConvShape {
            cin: c,
            cout: c,
            kernel: (k, k),
            spec: Conv2dSpec::new(stride, dilation * (k - 1) / 2).with_dilation(dilation).with_groups(c),
        };
        let pointwise = ConvShape { cin: c, cout: c, kernel: (1, 1), spec: Conv2dSpec::new(1, 0) };
        let asym = |k: usize| {
            [
                ConvShape { cin: c, cout: c, kernel: (1, k), spec: Conv2dSpec::asymmetric((1, s), (0, k / 2)) },
                ConvShape { cin: c, cout: c, kernel: (k, 1), spec: Conv2dSpec::asymmetric((s, 1), (k / 2, 0)) },
            ]
        };
        if kind == OpKind::SkipConnect && s == 2 {
            let fr = FactorizedReduce::new(store, rng, &format!("{name}.fr"), c, c)?;
            return Ok(PrimitiveOp { kind, stride, channels, body: Body::Reduce(fr) });
        }
        let mut stage = |i: usize, shapes: &[ConvShape]| ConvStage::new(store, rng, &format!("{name}.s{i}"), shapes);
        let body = match kind {
            OpKind::SkipConnect => Body::Identity,
            OpKind::MaxPool3x3 => Body::MaxPool,
            OpKind::AvgPool3x3 => Body::AvgPool,
            OpKind::SepConv3x3 | OpKind::SepConv5x5 => {
                let k = if kind == OpKind::SepConv3x3 { 3 } else { 5 };
                Body::Stages(vec![stage(0, &[depthwise(k, s, 1), pointwise]), stage(1, &[depthwise(k, 1, 1), pointwise])])
            }
            OpKind::DilConv3x3 | OpKind::DilConv5x5 => {
                let k = if kind == OpKind::DilConv3x3 { 3 } else { 5 };
                Body::Stages(vec![stage(0, &[depthwise(k, s, 2), pointwise])])
            }
            OpKind::Conv3x1_1x3 => Body::Stages(vec![stage(0, &asym(3))]),
            OpKind::Conv7x1_1x7 => Body::Stages(vec![stage(0, &asym(7))]),
            OpKind::SimpleConv1x1 | OpKind::SimpleConv3x3 => {
                let k = if kind == OpKind::SimpleConv1x1 { 1 } else { 3 };
                Body::Stages(vec![stage(
                    0,
                    &[ConvShape { cin: c, cout: c, kernel: (k, k), spec: Conv2dSpec::new(s, k / 2) }],
                )])
            }
            OpKind::Bottleneck1x3x1 => {
                let mid = c.div_ceil(4);
                Body::Stages(vec![
                    stage(0, &[ConvShape { cin: c, cout: mid, kernel: (1, 1), spec: Conv2dSpec::new(1, 0) }]),
                    stage(1, &[ConvShape { cin: mid, cout: mid, kernel: (3, 3), spec: Conv2dSpec::new(s, 1) }]),
                    stage(2, &[ConvShape { cin: mid, cout: c, kernel: (1, 1), spec: Conv2dSpec::new(1, 0) }]),
                ])
            }
        };
        Ok(PrimitiveOp { kind, stride, channels, body })
    }

    pub fn kind(&self) -> OpKind {
        self.kind
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn forward(&self, g: &mut Graph, p: &Binding, x: Var) -> Result<Var, AutodiffError> {
        let shape = g.shape(x);
        let fits = matches!(shape, &[_, c, h, w] if c == self.channels && h % self.stride == 0 && w % self.stride == 0 && h >= self.stride && w >= self.stride);
        if !fits {
            return Err(AutodiffError::ShapeMismatch {
                op: self.kind.to_string(),
                expected: format!("[B, {}, H, W] with H, W divisible by {}", self.channels, self.stride),
                found: shape.to_vec(),
            });
        }
        let pool = Conv2dSpec::new(self.stride, 1);
        Ok(match &self.body {
            Body::Identity => x,
            Body::Reduce(fr) => fr.forward(g, p, x),
            Body::MaxPool => g.max_pool(x, 3, pool),
            Body::AvgPool => g.avg_pool(x, 3, pool),
            Body::Stages(stages) => stages.iter().fold(x, |x, st| st.forward(g, p, x)),
        })
    }
}

/// `sum_k sigmoid(alpha_k) * o_k(x)`.
pub fn mixed_edge(g: &mut Graph, p: &Binding, x: Var, ops: &[PrimitiveOp], alpha: Var) -> Result<Var, AutodiffError> {
    check_mix(g, ops, alpha)?;
    let weights = g.sigmoid(alpha);
    weighted_sum(g, p, x, ops, weights)
}

/// `sum_k softmax(alpha)_k * o_k(x)`.
pub fn mixed_edge_softmax(
    g: &mut Graph,
    p: &Binding,
    x: Var,
    ops: &[PrimitiveOp],
    alpha: Var,
) -> Result<Var, AutodiffError> {
    check_mix(g, ops, alpha)?;
    let weights = g.softmax(alpha);
    weighted_sum(g, p, x, ops, weights)
}

fn check_mix(g: &Graph, ops: &[PrimitiveOp], alpha: Var) -> Result<(), AutodiffError> {
    let n = g.value(alpha).len();
    if n != ops.len() || ops.is_empty() {
        return Err(AutodiffError::MixLength { ops: ops.len(), weights: n });
    }
    Ok(())
}

/// `sum_k weights[k] * o_k(x)` for an already activated weight vector.
pub fn weighted_sum(
    g: &mut Graph,
    p: &Binding,
    x: Var,
    ops: &[PrimitiveOp],
    weights: Var,
) -> Result<Var, AutodiffError> {
    let mut terms = Vec::with_capacity(ops.len());
    for (k, op) in ops.iter().enumerate() {
        let y = op.forward(g, p, x)?;
        let w = g.slice(weights, k, &[1]);
        terms.push(g.scale_by(y, w));
    }
    Ok(g.add_n(&terms))
}
