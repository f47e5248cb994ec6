//! The recording tape and its primitive operations.
//!
//! Every primitive evaluates its forward value eagerly and appends a node to
//! the tape. [`Tape::backward`] walks the nodes in reverse order and
//! accumulates gradients into every node that depends on a leaf with
//! `requires_grad`. Nodes are only ever appended, so inputs always precede
//! the operations that consume them.

use rand::Rng;

use crate::error::{shape_err, AutodiffError, Result};
use crate::linalg;
use crate::param::{ParamId, ParamSet};
use crate::tensor::Tensor;

/// Handle to a value recorded on a [`Tape`].
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
    MatMul(Var, Var),
    AddRow(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Concat {
        inputs: Vec<Var>,
        outer: usize,
        inners: Vec<usize>,
    },
    SelectRows {
        mask: Vec<bool>,
        a: Var,
        b: Var,
    },
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    ConvMaxPool {
        seq: Var,
        weight: Var,
        bias: Var,
        width: usize,
        argmax: Vec<Option<usize>>,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        probs: Vec<f64>,
    },
    Mse {
        pred: Var,
        targets: Vec<f64>,
    },
    Sum(Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records which side of every non-differentiable point (relu zero, max-pool
/// argmax) a forward pass landed on, and how close it came.
#[derive(Clone, Copy, Debug)]
pub struct KinkSummary {
    /// Hash of every relu sign and pooling argmax seen during the pass.
    pub signature: u64,
    /// Smallest distance from any relu input or pooling choice to its kink.
    pub min_margin: f64,
}

impl Default for KinkSummary {
    fn default() -> Self {
        Self {
            signature: 0xcbf2_9ce4_8422_2325,
            min_margin: f64::INFINITY,
        }
    }
}

impl KinkSummary {
    fn mix(&mut self, v: u64) {
        self.signature = (self.signature ^ v).wrapping_mul(0x0000_0100_0000_01b3);
    }

    fn margin(&mut self, m: f64) {
        if m < self.min_margin {
            self.min_margin = m;
        }
    }
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(Var, ParamId)>,
    kinks: Option<KinkSummary>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    /// A tape that also records a [`KinkSummary`]; used by gradient checking.
    pub fn with_kink_tracking() -> Self {
        Self {
            kinks: Some(KinkSummary::default()),
            ..Self::default()
        }
    }

    pub fn kink_summary(&self) -> Option<KinkSummary> {
        self.kinks
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    /// A value that never receives gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A free leaf that receives gradient but is not tied to a parameter.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Binds a parameter as a leaf. Gradients flow to it only when the
    /// parameter has `requires_grad` set.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> Var {
        let p = params.get(id);
        let v = self.push(p.value.clone(), Op::Leaf, p.requires_grad);
        self.params.push((v, id));
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return shape_err("matmul", &[sa, sb]);
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        linalg::gemm_acc(m, k, n, self.value(a).data(), self.value(b).data(), &mut out);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), rg))
    }

    /// Adds a length-`n` bias to every row of `a`, whose trailing dim is `n`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let n = self.value(a).cols();
        if self.value(bias).len() != n {
            return shape_err("add_row", &[self.shape(a), self.shape(bias)]);
        }
        let mut out = self.value(a).clone();
        let b = self.value(bias).data();
        for row in out.data_mut().chunks_mut(n) {
            row.iter_mut().zip(b).for_each(|(o, bi)| *o += bi);
        }
        let rg = self.rg(a) || self.rg(bias);
        Ok(self.push(out, Op::AddRow(a, bias), rg))
    }

    /// `x W + b`.
    pub fn affine(&mut self, x: Var, weight: Var, bias: Var) -> Result<Var> {
        let xw = self.matmul(x, weight)?;
        self.add_row(xw, bias)
    }

    fn zip_with(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return shape_err(op, &[ta.shape(), tb.shape()]);
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(ta.shape().to_vec(), data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with("add", a, b, |x, y| x + y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with("sub", a, b, |x, y| x - y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Sub(a, b), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.zip_with("mul", a, b, |x, y| x * y)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.value(a);
        let out = Tensor::new(t.shape().to_vec(), t.data().iter().map(|x| x * c).collect())
            .expect("same shape");
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, c), rg)
    }

    fn map(&mut self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let t = self.value(a);
        Tensor::new(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect())
            .expect("same shape")
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.map(a, sigmoid);
        let rg = self.rg(a);
        self.push(out, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.map(a, f64::tanh);
        let rg = self.rg(a);
        self.push(out, Op::Tanh(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        if let Some(k) = self.kinks.as_mut() {
            for &x in self.nodes[a.0].value.data() {
                k.mix(u64::from(x > 0.0));
                k.margin(x.abs());
            }
        }
        let out = self.map(a, |x| if x > 0.0 { x } else { 0.0 });
        let rg = self.rg(a);
        self.push(out, Op::Relu(a), rg)
    }

    /// Concatenates along an existing axis.
    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let Some(&first) = xs.first() else {
            return Err(AutodiffError::Invalid {
                op: "concat",
                msg: "no inputs".into(),
            });
        };
        let base = self.shape(first).to_vec();
        if axis >= base.len() {
            return shape_err("concat", &[&base, &[axis]]);
        }
        let mut out_shape = base.clone();
        out_shape[axis] = 0;
        for &x in xs {
            let s = self.shape(x);
            let compatible = s.len() == base.len()
                && s.iter()
                    .zip(&base)
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
            if !compatible {
                let shapes: Vec<&[usize]> = xs.iter().map(|&v| self.shape(v)).collect();
                return shape_err("concat", &shapes);
            }
            out_shape[axis] += s[axis];
        }
        let outer: usize = base[..axis].iter().product();
        let inners: Vec<usize> = xs
            .iter()
            .map(|&x| self.shape(x)[axis..].iter().product())
            .collect();
        Ok(self.concat_raw(xs, outer, inners, out_shape))
    }

    /// Stacks equally shaped inputs along a new axis.
    pub fn stack(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let Some(&first) = xs.first() else {
            return Err(AutodiffError::Invalid {
                op: "stack",
                msg: "no inputs".into(),
            });
        };
        let base = self.shape(first).to_vec();
        if axis > base.len() {
            return shape_err("stack", &[&base, &[axis]]);
        }
        if xs.iter().any(|&x| self.shape(x) != base.as_slice()) {
            let shapes: Vec<&[usize]> = xs.iter().map(|&v| self.shape(v)).collect();
            return shape_err("stack", &shapes);
        }
        let mut out_shape = base.clone();
        out_shape.insert(axis, xs.len());
        let outer: usize = base[..axis].iter().product();
        let inner: usize = base[axis..].iter().product();
        Ok(self.concat_raw(xs, outer, vec![inner; xs.len()], out_shape))
    }

    fn concat_raw(&mut self, xs: &[Var], outer: usize, inners: Vec<usize>, shape: Vec<usize>) -> Var {
        let mut out = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for (&x, &inner) in xs.iter().zip(&inners) {
                out.extend_from_slice(&self.value(x).data()[o * inner..(o + 1) * inner]);
            }
        }
        let rg = xs.iter().any(|&x| self.rg(x));
        let value = Tensor::new(shape, out).expect("concat sizes");
        self.push(
            value,
            Op::Concat {
                inputs: xs.to_vec(),
                outer,
                inners,
            },
            rg,
        )
    }

    /// Row `i` of the result is row `i` of `a` where `mask[i]`, else of `b`.
    pub fn select_rows(&mut self, mask: &[bool], a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() || ta.shape().len() != 2 || ta.rows() != mask.len() {
            return shape_err("select_rows", &[ta.shape(), tb.shape(), &[mask.len()]]);
        }
        let c = ta.cols();
        let mut out = Vec::with_capacity(ta.len());
        for (i, &m) in mask.iter().enumerate() {
            let src = if m { ta } else { tb };
            out.extend_from_slice(&src.data()[i * c..(i + 1) * c]);
        }
        let value = Tensor::new(ta.shape().to_vec(), out)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(
            value,
            Op::SelectRows {
                mask: mask.to_vec(),
                a,
                b,
            },
            rg,
        ))
    }

    /// Inverted dropout. Outside training, or with `p == 0`, returns `x`
    /// itself so the eval-mode path is the exact identity.
    pub fn dropout<R: Rng + ?Sized>(&mut self, x: Var, p: f64, training: bool, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(AutodiffError::Invalid {
                op: "dropout",
                msg: format!("probability {p} outside [0, 1)"),
            });
        }
        if !training || p == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - p);
        let n = self.value(x).len();
        let mask: Vec<f64> = (0..n)
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let t = self.value(x);
        let data = t.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let value = Tensor::new(t.shape().to_vec(), data)?;
        let rg = self.rg(x);
        Ok(self.push(value, Op::Dropout { x, mask }, rg))
    }

    /// Valid 1-D convolution of one filter width over `seq: [B, T, C]`
    /// followed by ReLU and max-over-time pooling, giving `[B, F]`.
    ///
    /// `weight` is `[width * C, F]` (window rows flattened in time order) and
    /// `bias` has `F` entries. For row `b` only windows lying entirely inside
    /// the first `lengths[b]` steps are pooled; when `lengths[b] < width` the
    /// single window at position 0 is used, which reads zero padding.
    /// Ties pick the lowest position.
    pub fn conv1d_maxpool(
        &mut self,
        seq: Var,
        weight: Var,
        bias: Var,
        width: usize,
        lengths: &[usize],
    ) -> Result<Var> {
        let (ss, sw, sb) = (self.shape(seq), self.shape(weight), self.shape(bias));
        let ok = ss.len() == 3
            && width >= 1
            && ss[1] >= width
            && sw.len() == 2
            && sw[0] == width * ss[2]
            && self.value(bias).len() == sw[1]
            && lengths.len() == ss[0]
            && lengths.iter().all(|&l| l <= ss[1]);
        if !ok {
            return shape_err("conv1d_maxpool", &[ss, sw, sb, &[width], &[lengths.len()]]);
        }
        let (batch, steps, chans) = (ss[0], ss[1], ss[2]);
        let filters = sw[1];
        let k = width * chans;
        let x = self.value(seq).data();
        let w = self.value(weight).data();
        let bvals = self.value(bias).data();
        let mut out = vec![0.0; batch * filters];
        let mut argmax = vec![None; batch * filters];
        let mut kinks = self.kinks;
        let mut pre = Vec::new();
        for b in 0..batch {
            let positions = pool_positions(lengths[b], width);
            pre.clear();
            pre.resize(positions * filters, 0.0);
            let xb = &x[b * steps * chans..(b + 1) * steps * chans];
            linalg::gemm_strided(positions, k, filters, xb, (chans as isize, 1), w, (filters as isize, 1), &mut pre);
            for f in 0..filters {
                let mut best = 0;
                let mut best_val = pre[f];
                let mut runner_up = f64::NEG_INFINITY;
                for p in 1..positions {
                    let v = pre[p * filters + f];
                    if v > best_val {
                        runner_up = best_val;
                        best_val = v;
                        best = p;
                    } else if v > runner_up {
                        runner_up = v;
                    }
                }
                let act = best_val + bvals[f];
                if let Some(k) = kinks.as_mut() {
                    k.mix(best as u64 * 2 + u64::from(act > 0.0));
                    k.margin(act.abs());
                    k.margin(best_val - runner_up);
                }
                if act > 0.0 {
                    out[b * filters + f] = act;
                    argmax[b * filters + f] = Some(best);
                }
            }
        }
        self.kinks = kinks;
        let rg = self.rg(seq) || self.rg(weight) || self.rg(bias);
        Ok(self.push(
            Tensor::new(vec![batch, filters], out)?,
            Op::ConvMaxPool {
                seq,
                weight,
                bias,
                width,
                argmax,
            },
            rg,
        ))
    }

    /// Mean over rows of `-log softmax(logits)[target]`, computed with the
    /// log-sum-exp shift.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let t = self.value(logits);
        let (rows, k) = (t.rows(), t.cols());
        if rows != targets.len() || rows == 0 {
            return shape_err("softmax_cross_entropy", &[t.shape(), &[targets.len()]]);
        }
        if let Some(&bad) = targets.iter().find(|&&c| c >= k) {
            return Err(AutodiffError::Invalid {
                op: "softmax_cross_entropy",
                msg: format!("target {bad} out of range for {k} classes"),
            });
        }
        let probs = softmax_rows(t).into_data();
        let mut total = 0.0;
        for (r, &c) in targets.iter().enumerate() {
            let row = t.row(r);
            total += log_sum_exp(row) - row[c];
        }
        let value = Tensor::scalar(total / rows as f64);
        let rg = self.rg(logits);
        Ok(self.push(
            value,
            Op::SoftmaxCrossEntropy {
                logits,
                targets: targets.to_vec(),
                probs,
            },
            rg,
        ))
    }

    /// Mean squared error between every entry of `pred` and `targets`.
    pub fn mse(&mut self, pred: Var, targets: &[f64]) -> Result<Var> {
        let t = self.value(pred);
        if t.len() != targets.len() || targets.is_empty() {
            return shape_err("mse", &[t.shape(), &[targets.len()]]);
        }
        let n = targets.len() as f64;
        let loss = t.data().iter().zip(targets).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / n;
        let rg = self.rg(pred);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::Mse {
                pred,
                targets: targets.to_vec(),
            },
            rg,
        ))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(AutodiffError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        if self.rg(loss) {
            grads[loss.0] = Some(vec![1.0]);
        }
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients {
            grads,
            params: self.params.clone(),
        })
    }

    fn acc<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut Vec<f64>> {
        if !self.rg(v) {
            return None;
        }
        let len = self.value(v).len();
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; len]))
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(a), self.shape(b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                if let Some(ga) = self.acc(grads, a) {
                    linalg::gemm_a_bt_acc(m, n, k, g, self.value(b).data(), ga);
                }
                if let Some(gb) = self.acc(grads, b) {
                    linalg::gemm_at_b_acc(k, m, n, self.value(a).data(), g, gb);
                }
            }
            &Op::AddRow(a, bias) => {
                if let Some(ga) = self.acc(grads, a) {
                    add_into(ga, g);
                }
                if let Some(gb) = self.acc(grads, bias) {
                    let n = gb.len();
                    for row in g.chunks(n) {
                        add_into(gb, row);
                    }
                }
            }
            &Op::Add(a, b) => {
                if let Some(ga) = self.acc(grads, a) {
                    add_into(ga, g);
                }
                if let Some(gb) = self.acc(grads, b) {
                    add_into(gb, g);
                }
            }
            &Op::Sub(a, b) => {
                if let Some(ga) = self.acc(grads, a) {
                    add_into(ga, g);
                }
                if let Some(gb) = self.acc(grads, b) {
                    gb.iter_mut().zip(g).for_each(|(o, gi)| *o -= gi);
                }
            }
            &Op::Mul(a, b) => {
                if let Some(ga) = self.acc(grads, a) {
                    let vb = self.value(b).data();
                    for ((o, gi), bi) in ga.iter_mut().zip(g).zip(vb) {
                        *o += gi * bi;
                    }
                }
                if let Some(gb) = self.acc(grads, b) {
                    let va = self.value(a).data();
                    for ((o, gi), ai) in gb.iter_mut().zip(g).zip(va) {
                        *o += gi * ai;
                    }
                }
            }
            &Op::Scale(a, c) => {
                if let Some(ga) = self.acc(grads, a) {
                    ga.iter_mut().zip(g).for_each(|(o, gi)| *o += gi * c);
                }
            }
            &Op::Sigmoid(a) => {
                let y = node.value.data();
                if let Some(ga) = self.acc(grads, a) {
                    for ((o, gi), yi) in ga.iter_mut().zip(g).zip(y) {
                        *o += gi * yi * (1.0 - yi);
                    }
                }
            }
            &Op::Tanh(a) => {
                let y = node.value.data();
                if let Some(ga) = self.acc(grads, a) {
                    for ((o, gi), yi) in ga.iter_mut().zip(g).zip(y) {
                        *o += gi * (1.0 - yi * yi);
                    }
                }
            }
            &Op::Relu(a) => {
                let x = self.value(a).data();
                if let Some(ga) = self.acc(grads, a) {
                    for ((o, gi), xi) in ga.iter_mut().zip(g).zip(x) {
                        if *xi > 0.0 {
                            *o += gi;
                        }
                    }
                }
            }
            Op::Concat {
                inputs,
                outer,
                inners,
            } => {
                let total: usize = inners.iter().sum();
                let mut offset = 0;
                for (&x, &inner) in inputs.iter().zip(inners) {
                    if let Some(gx) = self.acc(grads, x) {
                        for o in 0..*outer {
                            let src = &g[o * total + offset..o * total + offset + inner];
                            add_into(&mut gx[o * inner..(o + 1) * inner], src);
                        }
                    }
                    offset += inner;
                }
            }
            Op::SelectRows { mask, a, b } => {
                let c = node.value.cols();
                for (src, want) in [(*a, true), (*b, false)] {
                    if let Some(gs) = self.acc(grads, src) {
                        for (r, &m) in mask.iter().enumerate() {
                            if m == want {
                                add_into(&mut gs[r * c..(r + 1) * c], &g[r * c..(r + 1) * c]);
                            }
                        }
                    }
                }
            }
            Op::Dropout { x, mask } => {
                if let Some(gx) = self.acc(grads, *x) {
                    for ((o, gi), m) in gx.iter_mut().zip(g).zip(mask) {
                        *o += gi * m;
                    }
                }
            }
            Op::ConvMaxPool {
                seq,
                weight,
                bias,
                width,
                argmax,
            } => {
                let ss = self.shape(*seq);
                let (steps, chans) = (ss[1], ss[2]);
                let filters = self.shape(*weight)[1];
                let k = width * chans;
                if let Some(gb) = self.acc(grads, *bias) {
                    for (idx, am) in argmax.iter().enumerate() {
                        if am.is_some() {
                            gb[idx % filters] += g[idx];
                        }
                    }
                }
                if let Some(gw) = self.acc(grads, *weight) {
                    let x = self.value(*seq).data();
                    for (idx, am) in argmax.iter().enumerate() {
                        if let Some(p) = *am {
                            let (b, f) = (idx / filters, idx % filters);
                            let start = b * steps * chans + p * chans;
                            let window = &x[start..start + k];
                            for (j, xv) in window.iter().enumerate() {
                                gw[j * filters + f] += xv * g[idx];
                            }
                        }
                    }
                }
                if let Some(gx) = self.acc(grads, *seq) {
                    let w = self.value(*weight).data();
                    for (idx, am) in argmax.iter().enumerate() {
                        if let Some(p) = *am {
                            let (b, f) = (idx / filters, idx % filters);
                            let start = b * steps * chans + p * chans;
                            for j in 0..k {
                                gx[start + j] += w[j * filters + f] * g[idx];
                            }
                        }
                    }
                }
            }
            Op::SoftmaxCrossEntropy {
                logits,
                targets,
                probs,
            } => {
                if let Some(gl) = self.acc(grads, *logits) {
                    let k = self.value(*logits).cols();
                    let scale = g[0] / targets.len() as f64;
                    for (r, &c) in targets.iter().enumerate() {
                        for j in 0..k {
                            let onehot = if j == c { 1.0 } else { 0.0 };
                            gl[r * k + j] += scale * (probs[r * k + j] - onehot);
                        }
                    }
                }
            }
            Op::Mse { pred, targets } => {
                if let Some(gp) = self.acc(grads, *pred) {
                    let p = self.value(*pred).data();
                    let scale = 2.0 * g[0] / targets.len() as f64;
                    for ((o, pi), yi) in gp.iter_mut().zip(p).zip(targets) {
                        *o += scale * (pi - yi);
                    }
                }
            }
            &Op::Sum(a) => {
                if let Some(ga) = self.acc(grads, a) {
                    ga.iter_mut().for_each(|o| *o += g[0]);
                }
            }
        }
    }
}

/// Number of pooled window positions for a sequence of `length` real steps.
pub fn pool_positions(length: usize, width: usize) -> usize {
    if length >= width {
        length - width + 1
    } else {
        1
    }
}

/// Result of a reverse sweep.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    params: Vec<(Var, ParamId)>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, or `None` when `v` does not
    /// require gradient or does not influence the loss.
    pub fn get(&self, v: Var) -> Option<&[f64]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    /// Gradient for a parameter bound on the tape (summed over bindings).
    pub fn param(&self, id: ParamId) -> Option<Vec<f64>> {
        let mut out: Option<Vec<f64>> = None;
        for &(v, pid) in &self.params {
            if pid != id {
                continue;
            }
            if let Some(g) = self.get(v) {
                match out.as_mut() {
                    Some(o) => add_into(o, g),
                    None => out = Some(g.to_vec()),
                }
            }
        }
        out
    }

    /// Adds every parameter gradient into `ParamSet` grads.
    pub fn accumulate_into(&self, params: &mut ParamSet) {
        for &(v, id) in &self.params {
            if let Some(g) = self.get(v) {
                let p = params.get_mut(id);
                if p.requires_grad {
                    add_into(&mut p.grad, g);
                }
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Row-wise softmax of a tensor whose trailing dim is the class axis.
pub fn softmax_rows(t: &Tensor) -> Tensor {
    let k = t.cols();
    let mut out = Vec::with_capacity(t.len());
    for row in t.data().chunks(k) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|x| (x - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        out.extend(exps.into_iter().map(|e| e / z));
    }
    Tensor::new(t.shape().to_vec(), out).expect("same shape")
}
