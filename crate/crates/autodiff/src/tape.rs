//! Reverse-mode differentiation over a recorded operation list.
//!
//! Every operation appends a node holding its forward value. Parents always
//! precede children, so the node list is already a topological order and
//! [`Tape::backward`] is a single reverse sweep.

use rand::Rng;

use crate::error::{config_err, dim_err, Result, TensorError};
use crate::kernels::{self, ConvGeometry};
use crate::tensor::Tensor;

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Conv2d { input: Var, kernel: Var, bias: Var, geom: ConvGeometry },
    MaxPool { input: Var, argmax: Vec<usize> },
    Upsample { input: Var, factor: usize },
    Linear { input: Var, weight: Var, bias: Var },
    Relu { input: Var },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { input: Var, factor: f64 },
    Concat { parts: Vec<Var> },
    SliceChannels { input: Var, start: usize },
    Reshape { input: Var },
    Dropout { input: Var, mask: Vec<f64> },
    Sum { input: Var },
    SquaredError { est: Var, target: Var, batch: usize },
    HalfSumSquares { inputs: Vec<Var> },
    WeightedSum { terms: Vec<(Var, f64)> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records a computation and differentiates scalar results with respect to
/// every node that requires a gradient.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, mut value: Tensor, op: Op, requires_grad: bool) -> Var {
        value = value.with_requires_grad(requires_grad);
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].value.requires_grad()
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    /// Records an input tensor; its `requires_grad` flag is kept.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let rg = t.requires_grad();
        let mut t = t;
        t.set_grad(None);
        self.push(t, Op::Leaf, rg)
    }

    /// Records a tensor that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        let mut t = t;
        t.set_grad(None);
        self.push(t, Op::Leaf, false)
    }

    /// Records a trainable value that always receives a gradient.
    pub fn param(&mut self, t: &Tensor) -> Var {
        let t = Tensor::new(t.shape().to_vec(), t.data().to_vec()).expect("valid tensor");
        self.push(t, Op::Leaf, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Gradient of the last [`Tape::backward`] root with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad()
    }

    pub fn conv2d(&mut self, input: Var, kernel: Var, bias: Var, stride: usize, padding: usize) -> Result<Var> {
        let geom = ConvGeometry::new(self.shape(input), self.shape(kernel), stride, padding)?;
        if self.shape(bias) != [geom.out_channels] {
            return dim_err(
                "conv2d",
                format!("bias must be [{}], got {:?}", geom.out_channels, self.shape(bias)),
            );
        }
        let out = kernels::conv2d_forward(self.data(input), self.data(kernel), self.data(bias), &geom);
        let shape = vec![geom.batch, geom.out_channels, geom.out_h, geom.out_w];
        let rg = self.rg(input) || self.rg(kernel) || self.rg(bias);
        Ok(self.push(Tensor::new(shape, out)?, Op::Conv2d { input, kernel, bias, geom }, rg))
    }

    pub fn max_pool2d(&mut self, input: Var, window: usize, stride: usize) -> Result<Var> {
        let shape = image_shape(self.shape(input), "max_pool2d")?;
        let oh = kernels::pool_extent(shape[2], window, stride)?;
        let ow = kernels::pool_extent(shape[3], window, stride)?;
        let (out, argmax) = kernels::max_pool_forward(self.data(input), &shape, window, stride, (oh, ow));
        let rg = self.rg(input);
        let t = Tensor::new(vec![shape[0], shape[1], oh, ow], out)?;
        Ok(self.push(t, Op::MaxPool { input, argmax }, rg))
    }

    pub fn upsample2d(&mut self, input: Var, factor: usize) -> Result<Var> {
        if factor == 0 {
            return config_err("upsample2d", "factor must be at least 1");
        }
        let shape = image_shape(self.shape(input), "upsample2d")?;
        let out = kernels::upsample_forward(self.data(input), &shape, factor);
        let rg = self.rg(input);
        let t = Tensor::new(vec![shape[0], shape[1], shape[2] * factor, shape[3] * factor], out)?;
        Ok(self.push(t, Op::Upsample { input, factor }, rg))
    }

    /// Affine map `[B, N] -> [B, M]` with `weight: [M, N]`, `bias: [M]`.
    pub fn linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(input), self.shape(weight), self.shape(bias));
        if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[1] || bs != [ws[0]] {
            return dim_err(
                "fully_connected",
                format!("input {xs:?}, weight {ws:?}, bias {bs:?} are incompatible"),
            );
        }
        let (batch, n, m) = (xs[0], xs[1], ws[0]);
        let out = kernels::linear_forward(self.data(input), self.data(weight), self.data(bias), batch, n, m);
        let rg = self.rg(input) || self.rg(weight) || self.rg(bias);
        Ok(self.push(Tensor::new(vec![batch, m], out)?, Op::Linear { input, weight, bias }, rg))
    }

    pub fn relu(&mut self, input: Var) -> Var {
        let t = self.value(input);
        let data = t.data().iter().map(|&v| v.max(0.0)).collect();
        let t = Tensor::new(t.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(input);
        self.push(t, Op::Relu { input }, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let data = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x + y).collect();
        let t = Tensor::new(self.shape(a).to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Add { a, b }, rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let data = self.data(a).iter().zip(self.data(b)).map(|(x, y)| x * y).collect();
        let t = Tensor::new(self.shape(a).to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Mul { a, b }, rg))
    }

    pub fn scale(&mut self, input: Var, factor: f64) -> Var {
        let data = self.data(input).iter().map(|v| v * factor).collect();
        let t = Tensor::new(self.shape(input).to_vec(), data).expect("same shape");
        let rg = self.rg(input);
        self.push(t, Op::Scale { input, factor }, rg)
    }

    /// Concatenates image tensors along the channel axis.
    pub fn concat_channels(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return config_err("concat_channels", "no inputs");
        };
        let s0 = image_shape(self.shape(first), "concat_channels")?;
        let mut channels = 0;
        for &p in parts {
            let s = image_shape(self.shape(p), "concat_channels")?;
            if s[0] != s0[0] || s[2] != s0[2] || s[3] != s0[3] {
                return dim_err(
                    "concat_channels",
                    format!("batch/spatial extents differ: {s0:?} vs {s:?}"),
                );
            }
            channels += s[1];
        }
        let plane = s0[2] * s0[3];
        let mut data = Vec::with_capacity(s0[0] * channels * plane);
        for b in 0..s0[0] {
            for &p in parts {
                let c = self.shape(p)[1];
                data.extend_from_slice(&self.data(p)[b * c * plane..(b + 1) * c * plane]);
            }
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        let t = Tensor::new(vec![s0[0], channels, s0[2], s0[3]], data)?;
        Ok(self.push(t, Op::Concat { parts: parts.to_vec() }, rg))
    }

    /// Channels `start..start + len` of an image tensor.
    pub fn slice_channels(&mut self, input: Var, start: usize, len: usize) -> Result<Var> {
        let s = image_shape(self.shape(input), "slice_channels")?;
        if len == 0 || start + len > s[1] {
            return dim_err(
                "slice_channels",
                format!("range {start}..{} outside {} channels", start + len, s[1]),
            );
        }
        let plane = s[2] * s[3];
        let mut data = Vec::with_capacity(s[0] * len * plane);
        for b in 0..s[0] {
            let off = (b * s[1] + start) * plane;
            data.extend_from_slice(&self.data(input)[off..off + len * plane]);
        }
        let rg = self.rg(input);
        let t = Tensor::new(vec![s[0], len, s[2], s[3]], data)?;
        Ok(self.push(t, Op::SliceChannels { input, start }, rg))
    }

    pub fn reshape(&mut self, input: Var, shape: Vec<usize>) -> Result<Var> {
        let t = self.value(input).clone().reshape(shape)?;
        let rg = self.rg(input);
        Ok(self.push(t, Op::Reshape { input }, rg))
    }

    /// Inverted dropout: in training mode each unit is zeroed with
    /// probability `rate` and survivors are scaled by `1 / (1 - rate)`;
    /// evaluation mode is the identity.
    pub fn dropout<R: Rng + ?Sized>(&mut self, input: Var, rate: f64, training: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return config_err("dropout", format!("rate must lie in [0, 1), got {rate}"));
        }
        let n = self.value(input).len();
        let mask: Vec<f64> = if training && rate > 0.0 {
            let keep = 1.0 / (1.0 - rate);
            (0..n).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect()
        } else {
            vec![1.0; n]
        };
        let data = self.data(input).iter().zip(&mask).map(|(x, m)| x * m).collect();
        let t = Tensor::new(self.shape(input).to_vec(), data)?;
        let rg = self.rg(input);
        Ok(self.push(t, Op::Dropout { input, mask }, rg))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let s = self.data(input).iter().sum();
        let rg = self.rg(input);
        self.push(Tensor::scalar(s), Op::Sum { input }, rg)
    }

    /// `Σ (est − target)² / B` where `B` is the leading extent.
    pub fn squared_error(&mut self, est: Var, target: Var) -> Result<Var> {
        self.same_shape("squared_error", est, target)?;
        let batch = self.shape(est)[0];
        let s: f64 = self
            .data(est)
            .iter()
            .zip(self.data(target))
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let rg = self.rg(est) || self.rg(target);
        Ok(self.push(Tensor::scalar(s / batch as f64), Op::SquaredError { est, target, batch }, rg))
    }

    /// `½ Σ w²` over every entry of every input.
    pub fn half_sum_squares(&mut self, inputs: &[Var]) -> Var {
        let s: f64 = inputs.iter().map(|&v| self.value(v).sum_squares()).sum();
        let rg = inputs.iter().any(|&v| self.rg(v));
        self.push(Tensor::scalar(0.5 * s), Op::HalfSumSquares { inputs: inputs.to_vec() }, rg)
    }

    /// `Σ λ_k · s_k` over scalar nodes `s_k`.
    pub fn weighted_sum(&mut self, terms: &[(Var, f64)]) -> Result<Var> {
        let mut total = 0.0;
        for &(v, w) in terms {
            let Some(x) = self.value(v).item() else {
                return dim_err("weighted_sum", format!("term {:?} is not a scalar", self.shape(v)));
            };
            total += w * x;
        }
        let rg = terms.iter().any(|&(v, _)| self.rg(v));
        Ok(self.push(Tensor::scalar(total), Op::WeightedSum { terms: terms.to_vec() }, rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return dim_err(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    /// Back-propagates from the scalar `root`, populating the gradient of
    /// every reachable node that requires one. Earlier gradients are cleared.
    pub fn backward(&mut self, root: Var) -> Result<()> {
        if self.nodes[root.0].value.len() != 1 {
            return Err(TensorError::Contract(format!(
                "backward needs a scalar root, got shape {:?}",
                self.shape(root)
            )));
        }
        let n = root.0 + 1;
        let mut reachable = vec![false; n];
        reachable[root.0] = true;
        for i in (0..n).rev() {
            if reachable[i] && self.nodes[i].value.requires_grad() {
                for p in self.parents(i) {
                    reachable[p.0] = true;
                }
            }
        }

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[root.0] = Some(vec![1.0]);
        for i in (0..n).rev() {
            if !self.nodes[i].value.requires_grad() {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.backprop_node(i, &g, &mut grads);
            grads[i] = Some(g);
        }

        for (i, node) in self.nodes.iter_mut().enumerate() {
            let grad = if i < n && reachable[i] && node.value.requires_grad() {
                Some(grads[i].take().unwrap_or_else(|| vec![0.0; node.value.len()]))
            } else {
                None
            };
            node.value.set_grad(grad);
        }
        Ok(())
    }

    fn parents(&self, i: usize) -> Vec<Var> {
        match &self.nodes[i].op {
            Op::Leaf => vec![],
            Op::Conv2d { input, kernel, bias, .. } => vec![*input, *kernel, *bias],
            Op::Linear { input, weight, bias } => vec![*input, *weight, *bias],
            Op::MaxPool { input, .. }
            | Op::Upsample { input, .. }
            | Op::Relu { input }
            | Op::Scale { input, .. }
            | Op::SliceChannels { input, .. }
            | Op::Reshape { input }
            | Op::Dropout { input, .. }
            | Op::Sum { input } => vec![*input],
            Op::Add { a, b } | Op::Mul { a, b } => vec![*a, *b],
            Op::SquaredError { est, target, .. } => vec![*est, *target],
            Op::Concat { parts } => parts.clone(),
            Op::HalfSumSquares { inputs } => inputs.clone(),
            Op::WeightedSum { terms } => terms.iter().map(|t| t.0).collect(),
        }
    }

    fn backprop_node(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let wants = |v: &Var| self.rg(*v);
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Conv2d { input, kernel, bias, geom } => {
                let r = kernels::conv2d_backward(
                    self.data(*input),
                    self.data(*kernel),
                    g,
                    geom,
                    (wants(input), wants(kernel), wants(bias)),
                );
                accumulate_owned(grads, *input, r.input);
                accumulate_owned(grads, *kernel, r.kernel);
                accumulate_owned(grads, *bias, r.bias);
            }
            Op::MaxPool { input, argmax } => {
                if wants(input) {
                    let slot = slot(grads, *input, self.value(*input).len());
                    for (&idx, gv) in argmax.iter().zip(g) {
                        slot[idx] += gv;
                    }
                }
            }
            Op::Upsample { input, factor } => {
                if wants(input) {
                    let dx = kernels::upsample_backward(g, self.shape(*input), *factor);
                    accumulate_owned(grads, *input, Some(dx));
                }
            }
            Op::Linear { input, weight, bias } => {
                let (batch, n) = (self.shape(*input)[0], self.shape(*input)[1]);
                let m = self.shape(*weight)[0];
                if wants(input) {
                    let slot = slot(grads, *input, batch * n);
                    kernels::gemm(1.0, g, (batch, m), false, self.data(*weight), (m, n), false, 1.0, slot);
                }
                if wants(weight) {
                    let slot = slot(grads, *weight, m * n);
                    kernels::gemm(1.0, g, (batch, m), true, self.data(*input), (batch, n), false, 1.0, slot);
                }
                if wants(bias) {
                    let slot = slot(grads, *bias, m);
                    for row in g.chunks(m) {
                        slot.iter_mut().zip(row).for_each(|(s, v)| *s += v);
                    }
                }
            }
            Op::Relu { input } => {
                if wants(input) {
                    let x = self.data(*input);
                    let slot = slot(grads, *input, x.len());
                    for ((s, &xv), &gv) in slot.iter_mut().zip(x).zip(g) {
                        if xv > 0.0 {
                            *s += gv;
                        }
                    }
                }
            }
            Op::Add { a, b } => {
                for v in [a, b] {
                    if wants(v) {
                        slot(grads, *v, g.len()).iter_mut().zip(g).for_each(|(s, gv)| *s += gv);
                    }
                }
            }
            Op::Mul { a, b } => {
                for (v, other) in [(a, b), (b, a)] {
                    if wants(v) {
                        let o = self.data(*other);
                        let slot = slot(grads, *v, g.len());
                        for ((s, gv), ov) in slot.iter_mut().zip(g).zip(o) {
                            *s += gv * ov;
                        }
                    }
                }
            }
            Op::Scale { input, factor } => {
                if wants(input) {
                    slot(grads, *input, g.len()).iter_mut().zip(g).for_each(|(s, gv)| *s += gv * factor);
                }
            }
            Op::Concat { parts } => {
                let out_shape = self.shape(Var(i));
                let (batch, total_c, plane) = (out_shape[0], out_shape[1], out_shape[2] * out_shape[3]);
                let mut offset = 0;
                for p in parts {
                    let c = self.shape(*p)[1];
                    if wants(p) {
                        let slot = slot(grads, *p, batch * c * plane);
                        for b in 0..batch {
                            let src = &g[(b * total_c + offset) * plane..][..c * plane];
                            let dst = &mut slot[b * c * plane..][..c * plane];
                            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
                        }
                    }
                    offset += c;
                }
            }
            Op::SliceChannels { input, start } => {
                if wants(input) {
                    let s = self.shape(*input).to_vec();
                    let len = self.shape(Var(i))[1];
                    let plane = s[2] * s[3];
                    let slot = slot(grads, *input, s.iter().product());
                    for b in 0..s[0] {
                        let dst = &mut slot[(b * s[1] + start) * plane..][..len * plane];
                        let src = &g[b * len * plane..][..len * plane];
                        dst.iter_mut().zip(src).for_each(|(d, v)| *d += v);
                    }
                }
            }
            Op::Reshape { input } => {
                if wants(input) {
                    slot(grads, *input, g.len()).iter_mut().zip(g).for_each(|(s, gv)| *s += gv);
                }
            }
            Op::Dropout { input, mask } => {
                if wants(input) {
                    let slot = slot(grads, *input, g.len());
                    for ((s, gv), m) in slot.iter_mut().zip(g).zip(mask) {
                        *s += gv * m;
                    }
                }
            }
            Op::Sum { input } => {
                if wants(input) {
                    let n = self.value(*input).len();
                    slot(grads, *input, n).iter_mut().for_each(|s| *s += g[0]);
                }
            }
            Op::SquaredError { est, target, batch } => {
                let scale = 2.0 * g[0] / *batch as f64;
                for (v, sign) in [(est, 1.0), (target, -1.0)] {
                    if wants(v) {
                        let (e, t) = (self.data(*est), self.data(*target));
                        let slot = slot(grads, *v, e.len());
                        for ((s, a), b) in slot.iter_mut().zip(e).zip(t) {
                            *s += sign * scale * (a - b);
                        }
                    }
                }
            }
            Op::HalfSumSquares { inputs } => {
                for v in inputs {
                    if wants(v) {
                        let x = self.data(*v);
                        let slot = slot(grads, *v, x.len());
                        slot.iter_mut().zip(x).for_each(|(s, xv)| *s += g[0] * xv);
                    }
                }
            }
            Op::WeightedSum { terms } => {
                for (v, w) in terms {
                    if wants(v) {
                        slot(grads, *v, 1)[0] += g[0] * w;
                    }
                }
            }
        }
    }
}

fn image_shape(shape: &[usize], op: &'static str) -> Result<[usize; 4]> {
    match shape {
        &[b, c, h, w] => Ok([b, c, h, w]),
        _ => dim_err(op, format!("expected [B,C,H,W], got {shape:?}")),
    }
}

fn slot(grads: &mut [Option<Vec<f64>>], v: Var, len: usize) -> &mut Vec<f64> {
    grads[v.0].get_or_insert_with(|| vec![0.0; len])
}

fn accumulate_owned(grads: &mut [Option<Vec<f64>>], v: Var, g: Option<Vec<f64>>) {
    let Some(g) = g else { return };
    match &mut grads[v.0] {
        Some(existing) => existing.iter_mut().zip(&g).for_each(|(e, x)| *e += x),
        empty => *empty = Some(g),
    }
}
