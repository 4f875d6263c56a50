//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation applied to its [`Var`]s. Calling
//! [`Graph::backward`] on a one-element result walks the tape in reverse and
//! accumulates gradients into every node that depends on a leaf created with
//! [`Graph::param`].

use crate::error::AutodiffError;
use crate::kernels::{self, Conv2dSpec, ConvDims};
use crate::tensor::Tensor;

/// Epsilon inside the normalization's inverse standard deviation.
pub const NORM_EPS: f64 = 1e-5;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddN(Vec<Var>),
    MulScalar(Var, f64),
    AddScalar(Var),
    ScaleBy(Var, Var),
    Sum(Var),
    Mean(Var),
    Square(Var),
    Relu(Var),
    Sigmoid(Var),
    Softmax(Var),
    Slice { x: Var, start: usize },
    Reshape(Var),
    Conv2d { x: Var, w: Var, spec: Conv2dSpec },
    Norm { x: Var, gamma: Var, beta: Var, xhat: Vec<f64>, inv_std: Vec<f64> },
    MaxPool { x: Var, argmax: Vec<usize> },
    AvgPool { x: Var, kernel: usize, spec: Conv2dSpec },
    GlobalAvgPool(Var),
    Crop { x: Var, top: usize, left: usize },
    Concat(Vec<Var>),
    TileChannels(Var),
    Linear { x: Var, w: Var, b: Var },
    CrossEntropy { logits: Var, targets: Vec<usize>, probs: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    /// Number of recorded nodes.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A leaf whose gradient is tracked.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf treated as a constant.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Accumulated gradient after [`Graph::backward`]; `None` when no gradient
    /// reached the node.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Smallest `|x|` over the inputs of every recorded ReLU, or infinity if
    /// there are none. Finite differences are only meaningful when this
    /// exceeds the probe step by a wide margin.
    pub fn relu_margin(&self) -> f64 {
        self.nodes
            .iter()
            .filter_map(|n| match n.op {
                Op::Relu(a) => Some(self.data(a)),
                _ => None,
            })
            .flatten()
            .fold(f64::INFINITY, |m, x| m.min(x.abs()))
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    fn same_shape(&self, op: &str, a: Var, b: Var) {
        assert_eq!(self.shape(a), self.shape(b), "{op}: operand shapes differ");
    }

    fn zip(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64, name: &str) -> Var {
        self.same_shape(name, a, b);
        let data = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::from_parts(self.shape(a).to_vec(), data);
        let rg = self.rg(&[a, b]);
        self.push(value, op, rg)
    }

    fn map(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let data = self.data(a).iter().map(|&x| f(x)).collect();
        let value = Tensor::from_parts(self.shape(a).to_vec(), data);
        let rg = self.rg(&[a]);
        self.push(value, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, Op::Add(a, b), |x, y| x + y, "add")
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, Op::Sub(a, b), |x, y| x - y, "sub")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, Op::Mul(a, b), |x, y| x * y, "mul")
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        self.zip(a, b, Op::Div(a, b), |x, y| x / y, "div")
    }

    /// Sum of equally shaped tensors.
    pub fn add_n(&mut self, vars: &[Var]) -> Var {
        assert!(!vars.is_empty(), "add_n of nothing");
        let mut data = self.data(vars[0]).to_vec();
        for &v in &vars[1..] {
            self.same_shape("add_n", vars[0], v);
            for (d, x) in data.iter_mut().zip(self.data(v)) {
                *d += x;
            }
        }
        let value = Tensor::from_parts(self.shape(vars[0]).to_vec(), data);
        let rg = self.rg(vars);
        self.push(value, Op::AddN(vars.to_vec()), rg)
    }

    pub fn mul_scalar(&mut self, a: Var, c: f64) -> Var {
        self.map(a, Op::MulScalar(a, c), |x| x * c)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        self.map(a, Op::AddScalar(a), |x| x + c)
    }

    /// `x * s` where `s` holds a single value.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Var {
        let k = self.value(s).item();
        let data = self.data(x).iter().map(|v| v * k).collect();
        let value = Tensor::from_parts(self.shape(x).to_vec(), data);
        let rg = self.rg(&[x, s]);
        self.push(value, Op::ScaleBy(x, s), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.data(a).iter().sum();
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let d = self.data(a);
        let m = d.iter().sum::<f64>() / d.len() as f64;
        let rg = self.rg(&[a]);
        self.push(Tensor::scalar(m), Op::Mean(a), rg)
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.map(a, Op::Square(a), |x| x * x)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        self.map(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, Op::Sigmoid(a), ddarts_core::parse::sigmoid)
    }

    /// Softmax over all elements.
    pub fn softmax(&mut self, a: Var) -> Var {
        let data = ddarts_core::parse::softmax(self.data(a));
        let value = Tensor::from_parts(self.shape(a).to_vec(), data);
        let rg = self.rg(&[a]);
        self.push(value, Op::Softmax(a), rg)
    }

    /// Flat elements `start..start + shape.product()` of `x`, reshaped.
    pub fn slice(&mut self, x: Var, start: usize, shape: &[usize]) -> Var {
        let len: usize = shape.iter().product();
        let data = self.data(x)[start..start + len].to_vec();
        let rg = self.rg(&[x]);
        self.push(Tensor::from_parts(shape.to_vec(), data), Op::Slice { x, start }, rg)
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Var {
        assert_eq!(shape.iter().product::<usize>(), self.value(x).len(), "reshape changes the element count");
        let data = self.data(x).to_vec();
        let rg = self.rg(&[x]);
        self.push(Tensor::from_parts(shape.to_vec(), data), Op::Reshape(x), rg)
    }

    fn conv_dims(&self, x: Var, cout: usize, kh: usize, kw: usize, spec: Conv2dSpec) -> ConvDims {
        let (b, cin, h, w) = self.value(x).dims4();
        let oh = Conv2dSpec::out_len(h, kh, spec.stride.0, spec.padding.0, spec.dilation.0)
            .unwrap_or_else(|| panic!("{kh}x{kw} window does not fit a {h}x{w} map"));
        let ow = Conv2dSpec::out_len(w, kw, spec.stride.1, spec.padding.1, spec.dilation.1)
            .unwrap_or_else(|| panic!("{kh}x{kw} window does not fit a {h}x{w} map"));
        ConvDims { b, cin, h, w, cout, kh, kw, oh, ow }
    }

    /// Bias-free convolution of an NCHW map with an `[out, in/groups, kh, kw]` kernel.
    pub fn conv2d(&mut self, x: Var, w: Var, spec: Conv2dSpec) -> Var {
        let (cout, cin_g, kh, kw) = self.value(w).dims4();
        let d = self.conv_dims(x, cout, kh, kw, spec);
        assert!(spec.groups > 0 && d.cin.is_multiple_of(spec.groups) && cout % spec.groups == 0, "bad group count");
        assert_eq!(cin_g, d.cin / spec.groups, "kernel expects {} input channels per group", cin_g);
        let out = kernels::conv2d_forward(self.data(x), self.data(w), d, spec);
        let rg = self.rg(&[x, w]);
        self.push(Tensor::from_parts(vec![d.b, cout, d.oh, d.ow], out), Op::Conv2d { x, w, spec }, rg)
    }

    /// Per-channel normalization over batch and space, then `gamma * xhat + beta`.
    pub fn norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let (b, c, h, w) = self.value(x).dims4();
        assert_eq!(self.value(gamma).len(), c, "norm: gamma length");
        assert_eq!(self.value(beta).len(), c, "norm: beta length");
        let (xhat, inv_std) = kernels::norm_forward(self.data(x), b, c, h * w, NORM_EPS);
        let (g, be) = (self.data(gamma), self.data(beta));
        let hw = h * w;
        let out = xhat.iter().enumerate().map(|(i, &v)| g[(i / hw) % c] * v + be[(i / hw) % c]).collect();
        let rg = self.rg(&[x, gamma, beta]);
        self.push(Tensor::from_parts(vec![b, c, h, w], out), Op::Norm { x, gamma, beta, xhat, inv_std }, rg)
    }

    pub fn max_pool(&mut self, x: Var, kernel: usize, spec: Conv2dSpec) -> Var {
        let (_, c, _, _) = self.value(x).dims4();
        let d = self.conv_dims(x, c, kernel, kernel, spec);
        let (out, argmax) = kernels::max_pool_forward(self.data(x), d, spec);
        let rg = self.rg(&[x]);
        self.push(Tensor::from_parts(vec![d.b, c, d.oh, d.ow], out), Op::MaxPool { x, argmax }, rg)
    }

    /// Average pooling; padded cells are excluded from the divisor.
    pub fn avg_pool(&mut self, x: Var, kernel: usize, spec: Conv2dSpec) -> Var {
        let (_, c, _, _) = self.value(x).dims4();
        let d = self.conv_dims(x, c, kernel, kernel, spec);
        let out = kernels::avg_pool_forward(self.data(x), d, spec);
        let rg = self.rg(&[x]);
        self.push(Tensor::from_parts(vec![d.b, c, d.oh, d.ow], out), Op::AvgPool { x, kernel, spec }, rg)
    }

    /// `[B, C, H, W] -> [B, C]`.
    pub fn global_avg_pool(&mut self, x: Var) -> Var {
        let (b, c, h, w) = self.value(x).dims4();
        let hw = h * w;
        let out = self.data(x).chunks(hw).map(|ch| ch.iter().sum::<f64>() / hw as f64).collect();
        let rg = self.rg(&[x]);
        self.push(Tensor::from_parts(vec![b, c], out), Op::GlobalAvgPool(x), rg)
    }

    /// Drops the first `top` rows and `left` columns.
    pub fn crop(&mut self, x: Var, top: usize, left: usize) -> Var {
        let (b, c, h, w) = self.value(x).dims4();
        let (oh, ow) = (h - top, w - left);
        let src = self.data(x);
        let mut out = Vec::with_capacity(b * c * oh * ow);
        for bc in 0..b * c {
            for y in top..h {
                let row = (bc * h + y) * w;
                out.extend_from_slice(&src[row + left..row + w]);
            }
        }
        let rg = self.rg(&[x]);
        self.push(Tensor::from_parts(vec![b, c, oh, ow], out), Op::Crop { x, top, left }, rg)
    }

    /// Concatenation along the channel axis.
    pub fn concat(&mut self, vars: &[Var]) -> Var {
        assert!(!vars.is_empty(), "concat of nothing");
        let (b, _, h, w) = self.value(vars[0]).dims4();
        let channels: Vec<usize> = vars
            .iter()
            .map(|&v| {
                let (vb, vc, vh, vw) = self.value(v).dims4();
                assert_eq!((vb, vh, vw), (b, h, w), "concat: mismatched batch or spatial size");
                vc
            })
            .collect();
        let total: usize = channels.iter().sum();
        let hw = h * w;
        let mut out = Vec::with_capacity(b * total * hw);
        for bi in 0..b {
            for (&v, &c) in vars.iter().zip(&channels) {
                out.extend_from_slice(&self.data(v)[bi * c * hw..(bi + 1) * c * hw]);
            }
        }
        let rg = self.rg(vars);
        self.push(Tensor::from_parts(vec![b, total, h, w], out), Op::Concat(vars.to_vec()), rg)
    }

    /// Repeats the channels `factor` times: output channel `c` reads input channel `c % C`.
    pub fn tile_channels(&mut self, x: Var, factor: usize) -> Var {
        let (b, c, h, w) = self.value(x).dims4();
        let per = c * h * w;
        let src = self.data(x);
        let mut out = Vec::with_capacity(b * per * factor);
        for bi in 0..b {
            for _ in 0..factor {
                out.extend_from_slice(&src[bi * per..(bi + 1) * per]);
            }
        }
        let rg = self.rg(&[x]);
        self.push(Tensor::from_parts(vec![b, c * factor, h, w], out), Op::TileChannels(x), rg)
    }

    /// `[B, F] x [O, F]^T + [O]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Var {
        let (bs, f) = dims2(self.shape(x));
        let (o, wf) = dims2(self.shape(w));
        assert_eq!(f, wf, "linear: feature count");
        assert_eq!(self.value(b).len(), o, "linear: bias length");
        let (xd, wd, bd) = (self.data(x), self.data(w), self.data(b));
        let mut out = vec![0.0; bs * o];
        for i in 0..bs {
            for j in 0..o {
                let row = &xd[i * f..(i + 1) * f];
                let wr = &wd[j * f..(j + 1) * f];
                out[i * o + j] = bd[j] + row.iter().zip(wr).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        let rg = self.rg(&[x, w, b]);
        self.push(Tensor::from_parts(vec![bs, o], out), Op::Linear { x, w, b }, rg)
    }

    /// Batch mean of `-log softmax(logits)[target]`.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var, AutodiffError> {
        let (bs, classes) = dims2(self.shape(logits));
        if targets.len() != bs {
            return Err(AutodiffError::ShapeMismatch {
                op: "cross_entropy".into(),
                expected: format!("{} targets", targets.len()),
                found: self.shape(logits).to_vec(),
            });
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= classes) {
            return Err(AutodiffError::TargetOutOfRange { target: t, classes });
        }
        let xd = self.data(logits);
        let mut probs = Vec::with_capacity(bs * classes);
        let mut loss = 0.0;
        for (i, &t) in targets.iter().enumerate() {
            let row = &xd[i * classes..(i + 1) * classes];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
            let lse = max + z.ln();
            loss += lse - row[t];
            probs.extend(row.iter().map(|v| (v - lse).exp()));
        }
        let rg = self.rg(&[logits]);
        Ok(self.push(
            Tensor::scalar(loss / bs as f64),
            Op::CrossEntropy { logits, targets: targets.to_vec(), probs },
            rg,
        ))
    }

    /// Reverse sweep from a one-element `loss`. Earlier gradients are cleared.
    pub fn backward(&mut self, loss: Var) {
        assert_eq!(self.value(loss).len(), 1, "backward needs a one-element output");
        self.grads = vec![None; self.nodes.len()];
        if !self.nodes[loss.0].requires_grad {
            return;
        }
        self.grads[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.grads[i].take() else { continue };
            self.propagate(i, &g);
            self.grads[i] = Some(g);
        }
    }

    fn propagate(&mut self, i: usize, g: &[f64]) {
        let nodes = &self.nodes;
        let grads = &mut self.grads;
        let node = &nodes[i];
        let out = node.value.data();
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                accumulate(grads, nodes, *a, |ga| axpy(ga, 1.0, g));
                accumulate(grads, nodes, *b, |gb| axpy(gb, 1.0, g));
            }
            Op::Sub(a, b) => {
                accumulate(grads, nodes, *a, |ga| axpy(ga, 1.0, g));
                accumulate(grads, nodes, *b, |gb| axpy(gb, -1.0, g));
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (nodes[a.0].value.data(), nodes[b.0].value.data());
                accumulate(grads, nodes, *a, |ga| {
                    for ((x, &gi), &y) in ga.iter_mut().zip(g).zip(bd) {
                        *x += gi * y;
                    }
                });
                accumulate(grads, nodes, *b, |gb| {
                    for ((x, &gi), &y) in gb.iter_mut().zip(g).zip(ad) {
                        *x += gi * y;
                    }
                });
            }
            Op::Div(a, b) => {
                let bd = nodes[b.0].value.data();
                accumulate(grads, nodes, *a, |ga| {
                    for ((x, &gi), &y) in ga.iter_mut().zip(g).zip(bd) {
                        *x += gi / y;
                    }
                });
                accumulate(grads, nodes, *b, |gb| {
                    for (((x, &gi), &y), &q) in gb.iter_mut().zip(g).zip(bd).zip(out) {
                        *x -= gi * q / y;
                    }
                });
            }
            Op::AddN(vars) => {
                for v in vars {
                    accumulate(grads, nodes, *v, |gv| axpy(gv, 1.0, g));
                }
            }
            Op::MulScalar(a, c) => accumulate(grads, nodes, *a, |ga| axpy(ga, *c, g)),
            Op::AddScalar(a) => accumulate(grads, nodes, *a, |ga| axpy(ga, 1.0, g)),
            Op::ScaleBy(x, s) => {
                let k = nodes[s.0].value.item();
                let xd = nodes[x.0].value.data();
                accumulate(grads, nodes, *x, |gx| axpy(gx, k, g));
                accumulate(grads, nodes, *s, |gs| gs[0] += dot(g, xd));
            }
            Op::Sum(a) => accumulate(grads, nodes, *a, |ga| ga.iter_mut().for_each(|x| *x += g[0])),
            Op::Mean(a) => {
                let n = nodes[a.0].value.len() as f64;
                accumulate(grads, nodes, *a, |ga| ga.iter_mut().for_each(|x| *x += g[0] / n));
            }
            Op::Square(a) => {
                let ad = nodes[a.0].value.data();
                accumulate(grads, nodes, *a, |ga| {
                    for ((x, &gi), &v) in ga.iter_mut().zip(g).zip(ad) {
                        *x += 2.0 * v * gi;
                    }
                });
            }
            Op::Relu(a) => {
                let ad = nodes[a.0].value.data();
                accumulate(grads, nodes, *a, |ga| {
                    for ((x, &gi), &v) in ga.iter_mut().zip(g).zip(ad) {
                        if v > 0.0 {
                            *x += gi;
                        }
                    }
                });
            }
            Op::Sigmoid(a) => accumulate(grads, nodes, *a, |ga| {
                for ((x, &gi), &y) in ga.iter_mut().zip(g).zip(out) {
                    *x += gi * y * (1.0 - y);
                }
            }),
            Op::Softmax(a) => {
                let s = dot(g, out);
                accumulate(grads, nodes, *a, |ga| {
                    for ((x, &gi), &y) in ga.iter_mut().zip(g).zip(out) {
                        *x += y * (gi - s);
                    }
                });
            }
            Op::Slice { x, start } => {
                accumulate(grads, nodes, *x, |gx| axpy(&mut gx[*start..*start + g.len()], 1.0, g));
            }
            Op::Reshape(x) => accumulate(grads, nodes, *x, |gx| axpy(gx, 1.0, g)),
            Op::Conv2d { x, w, spec } => {
                let (cout, _, kh, kw) = nodes[w.0].value.dims4();
                let (b, cin, h, wd) = nodes[x.0].value.dims4();
                let (_, _, oh, ow) = node.value.dims4();
                let d = ConvDims { b, cin, h, w: wd, cout, kh, kw, oh, ow };
                let mut gx = take(grads, nodes, *x);
                let mut gw = take(grads, nodes, *w);
                kernels::conv2d_backward(
                    nodes[x.0].value.data(),
                    nodes[w.0].value.data(),
                    g,
                    d,
                    *spec,
                    gx.as_deref_mut(),
                    gw.as_deref_mut(),
                );
                put(grads, *x, gx);
                put(grads, *w, gw);
            }
            Op::Norm { x, gamma, beta, xhat, inv_std } => {
                let (b, c, h, w) = nodes[x.0].value.dims4();
                let mut gx = take(grads, nodes, *x);
                let mut gg = take(grads, nodes, *gamma);
                let mut gb = take(grads, nodes, *beta);
                kernels::norm_backward(
                    xhat,
                    inv_std,
                    nodes[gamma.0].value.data(),
                    g,
                    b,
                    c,
                    h * w,
                    gx.as_deref_mut(),
                    gg.as_deref_mut(),
                    gb.as_deref_mut(),
                );
                put(grads, *x, gx);
                put(grads, *gamma, gg);
                put(grads, *beta, gb);
            }
            Op::MaxPool { x, argmax } => accumulate(grads, nodes, *x, |gx| {
                for (&i, &gi) in argmax.iter().zip(g) {
                    gx[i] += gi;
                }
            }),
            Op::AvgPool { x, kernel, spec } => {
                let (b, c, h, w) = nodes[x.0].value.dims4();
                let (_, _, oh, ow) = node.value.dims4();
                let d = ConvDims { b, cin: c, h, w, cout: c, kh: *kernel, kw: *kernel, oh, ow };
                accumulate(grads, nodes, *x, |gx| kernels::avg_pool_backward(g, d, *spec, gx));
            }
            Op::GlobalAvgPool(x) => {
                let (_, _, h, w) = nodes[x.0].value.dims4();
                let hw = h * w;
                accumulate(grads, nodes, *x, |gx| {
                    for (chunk, &gi) in gx.chunks_mut(hw).zip(g) {
                        chunk.iter_mut().for_each(|v| *v += gi / hw as f64);
                    }
                });
            }
            Op::Crop { x, top, left } => {
                let (b, c, h, w) = nodes[x.0].value.dims4();
                let ow = w - left;
                accumulate(grads, nodes, *x, |gx| {
                    let mut o = 0;
                    for bc in 0..b * c {
                        for y in *top..h {
                            let row = (bc * h + y) * w;
                            axpy(&mut gx[row + left..row + w], 1.0, &g[o..o + ow]);
                            o += ow;
                        }
                    }
                });
            }
            Op::Concat(vars) => {
                let (b, total, h, w) = node.value.dims4();
                let hw = h * w;
                let mut offset = 0;
                for v in vars {
                    let c = nodes[v.0].value.shape()[1];
                    accumulate(grads, nodes, *v, |gv| {
                        for bi in 0..b {
                            let src = (bi * total + offset) * hw;
                            axpy(&mut gv[bi * c * hw..(bi + 1) * c * hw], 1.0, &g[src..src + c * hw]);
                        }
                    });
                    offset += c;
                }
            }
            Op::TileChannels(x) => {
                let (b, c, h, w) = nodes[x.0].value.dims4();
                let per = c * h * w;
                let factor = node.value.shape()[1] / c;
                accumulate(grads, nodes, *x, |gx| {
                    for bi in 0..b {
                        for r in 0..factor {
                            let src = (bi * factor + r) * per;
                            axpy(&mut gx[bi * per..(bi + 1) * per], 1.0, &g[src..src + per]);
                        }
                    }
                });
            }
            Op::Linear { x, w, b } => {
                let (bs, f) = dims2(nodes[x.0].value.shape());
                let o = nodes[b.0].value.len();
                let (xd, wd) = (nodes[x.0].value.data(), nodes[w.0].value.data());
                accumulate(grads, nodes, *x, |gx| {
                    for i in 0..bs {
                        for j in 0..o {
                            axpy(&mut gx[i * f..(i + 1) * f], g[i * o + j], &wd[j * f..(j + 1) * f]);
                        }
                    }
                });
                accumulate(grads, nodes, *w, |gw| {
                    for i in 0..bs {
                        for j in 0..o {
                            axpy(&mut gw[j * f..(j + 1) * f], g[i * o + j], &xd[i * f..(i + 1) * f]);
                        }
                    }
                });
                accumulate(grads, nodes, *b, |gb| {
                    for i in 0..bs {
                        axpy(gb, 1.0, &g[i * o..(i + 1) * o]);
                    }
                });
            }
            Op::CrossEntropy { logits, targets, probs } => {
                let classes = probs.len() / targets.len();
                let k = g[0] / targets.len() as f64;
                accumulate(grads, nodes, *logits, |gl| {
                    for (i, &t) in targets.iter().enumerate() {
                        for c in 0..classes {
                            let onehot = if c == t { 1.0 } else { 0.0 };
                            gl[i * classes + c] += k * (probs[i * classes + c] - onehot);
                        }
                    }
                });
            }
        }
    }
}

fn dims2(shape: &[usize]) -> (usize, usize) {
    match shape {
        [a, b] => (*a, *b),
        _ => panic!("expected a 2-d tensor, got shape {shape:?}"),
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn accumulate(grads: &mut [Option<Vec<f64>>], nodes: &[Node], v: Var, f: impl FnOnce(&mut [f64])) {
    let node = &nodes[v.0];
    if node.requires_grad {
        f(grads[v.0].get_or_insert_with(|| vec![0.0; node.value.len()]));
    }
}

fn take(grads: &mut [Option<Vec<f64>>], nodes: &[Node], v: Var) -> Option<Vec<f64>> {
    let node = &nodes[v.0];
    node.requires_grad.then(|| grads[v.0].take().unwrap_or_else(|| vec![0.0; node.value.len()]))
}

fn put(grads: &mut [Option<Vec<f64>>], v: Var, g: Option<Vec<f64>>) {
    let Some(g) = g else { return };
    match &mut grads[v.0] {
        Some(existing) => axpy(existing, 1.0, &g),
        slot => *slot = Some(g),
    }
}
