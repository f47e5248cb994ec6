//! Recurrent and convolutional layers assembled from tape primitives.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{shape_err, Result};
use crate::param::{ParamId, ParamSet};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Uniform Glorot initialisation for a `[fan_in x fan_out]` matrix.
pub fn xavier_uniform<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.random_range(-limit..=limit))
        .collect();
    Tensor::new(vec![fan_in, fan_out], data).expect("sized")
}

/// Square matrix with orthonormal rows, from Gram-Schmidt on a Gaussian draw.
pub fn orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Tensor {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        for _ in 0..2 {
            for r in &rows {
                let d: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(r).for_each(|(a, b)| *a -= d * b);
            }
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            rows.push(v);
        }
    }
    Tensor::from_rows(&rows).expect("square")
}

/// Parameter handles for one GRU direction.
///
/// Inputs are row vectors, so `W_*` are `[input x hidden]` and `U_*` are
/// `[hidden x hidden]`.
#[derive(Clone, Copy, Debug)]
pub struct GruParams {
    pub w_z: ParamId,
    pub w_r: ParamId,
    pub w_h: ParamId,
    pub u_z: ParamId,
    pub u_r: ParamId,
    pub u_h: ParamId,
    pub b_z: ParamId,
    pub b_r: ParamId,
    pub b_h: ParamId,
}

impl GruParams {
    /// Registers the nine arrays under `prefix.{w_z,..,b_h}`.
    pub fn register<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        input: usize,
        hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let w = |name: &str, params: &mut ParamSet, rng: &mut R| {
            params.add(format!("{prefix}.{name}"), xavier_uniform(input, hidden, rng))
        };
        let w_z = w("w_z", params, rng)?;
        let w_r = w("w_r", params, rng)?;
        let w_h = w("w_h", params, rng)?;
        let u_z = params.add(format!("{prefix}.u_z"), orthogonal(hidden, rng))?;
        let u_r = params.add(format!("{prefix}.u_r"), orthogonal(hidden, rng))?;
        let u_h = params.add(format!("{prefix}.u_h"), orthogonal(hidden, rng))?;
        let b_z = params.add(format!("{prefix}.b_z"), Tensor::zeros(&[hidden]))?;
        let b_r = params.add(format!("{prefix}.b_r"), Tensor::zeros(&[hidden]))?;
        let b_h = params.add(format!("{prefix}.b_h"), Tensor::zeros(&[hidden]))?;
        let p = Self {
            w_z,
            w_r,
            w_h,
            u_z,
            u_r,
            u_h,
            b_z,
            b_r,
            b_h,
        };
        p.validate(params)?;
        Ok(p)
    }

    pub fn hidden(&self, params: &ParamSet) -> usize {
        params.value(self.b_z).len()
    }

    pub fn input(&self, params: &ParamSet) -> usize {
        params.value(self.w_z).rows()
    }

    /// Checks that all nine arrays agree on the hidden size.
    pub fn validate(&self, params: &ParamSet) -> Result<()> {
        let h = self.hidden(params);
        let d = self.input(params);
        let expect = [
            (self.w_z, [d, h]),
            (self.w_r, [d, h]),
            (self.w_h, [d, h]),
            (self.u_z, [h, h]),
            (self.u_r, [h, h]),
            (self.u_h, [h, h]),
        ];
        for (id, shape) in expect {
            if params.value(id).shape() != shape {
                return shape_err("gru_params", &[params.value(id).shape(), &shape]);
            }
        }
        for id in [self.b_r, self.b_h] {
            if params.value(id).len() != h {
                return shape_err("gru_params", &[params.value(id).shape(), &[h]]);
            }
        }
        Ok(())
    }

    pub fn bind(&self, tape: &mut Tape, params: &ParamSet) -> GruVars {
        GruVars {
            w_z: tape.param(params, self.w_z),
            w_r: tape.param(params, self.w_r),
            w_h: tape.param(params, self.w_h),
            u_z: tape.param(params, self.u_z),
            u_r: tape.param(params, self.u_r),
            u_h: tape.param(params, self.u_h),
            b_z: tape.param(params, self.b_z),
            b_r: tape.param(params, self.b_r),
            b_h: tape.param(params, self.b_h),
            hidden: self.hidden(params),
        }
    }
}

/// [`GruParams`] bound to a tape.
#[derive(Clone, Copy, Debug)]
pub struct GruVars {
    pub w_z: Var,
    pub w_r: Var,
    pub w_h: Var,
    pub u_z: Var,
    pub u_r: Var,
    pub u_h: Var,
    pub b_z: Var,
    pub b_r: Var,
    pub b_h: Var,
    pub hidden: usize,
}

/// One GRU step on a batch of rows `x: [B x in]`, `h_prev: [B x H]`.
///
/// `z = σ(xW_z + hU_z + b_z)`, `r = σ(xW_r + hU_r + b_r)`,
/// `h̃ = tanh(xW_h + (r⊙h)U_h + b_h)`, `h = (1-z)⊙h + z⊙h̃`.
pub fn gru_cell(tape: &mut Tape, x: Var, h_prev: Var, p: &GruVars) -> Result<Var> {
    let gate = |tape: &mut Tape, w: Var, u: Var, b: Var, h: Var| -> Result<Var> {
        let xw = tape.matmul(x, w)?;
        let hu = tape.matmul(h, u)?;
        let s = tape.add(xw, hu)?;
        tape.add_row(s, b)
    };
    let z_pre = gate(tape, p.w_z, p.u_z, p.b_z, h_prev)?;
    let z = tape.sigmoid(z_pre);
    let r_pre = gate(tape, p.w_r, p.u_r, p.b_r, h_prev)?;
    let r = tape.sigmoid(r_pre);
    let rh = tape.mul(r, h_prev)?;
    let cand_pre = gate(tape, p.w_h, p.u_h, p.b_h, rh)?;
    let cand = tape.tanh(cand_pre);
    let delta = tape.sub(cand, h_prev)?;
    let step = tape.mul(z, delta)?;
    tape.add(h_prev, step)
}

/// Bidirectional GRU over `seq` (one `[B x D]` var per time step).
///
/// Row `b` is real for steps `t < lengths[b]`; at padded steps both
/// directions carry their state unchanged and the output row is zero.
/// Both directions start from a zero state. Returns one `[B x 2H]` var per
/// step, `[forward ; backward]`.
pub fn bigru(
    tape: &mut Tape,
    seq: &[Var],
    lengths: &[usize],
    fwd: &GruVars,
    bwd: &GruVars,
) -> Result<Vec<Var>> {
    let Some(&first) = seq.first() else {
        return Ok(Vec::new());
    };
    let batch = tape.shape(first)[0];
    if lengths.len() != batch || lengths.iter().any(|&l| l > seq.len()) {
        return shape_err("bigru", &[tape.shape(first), &[lengths.len(), seq.len()]]);
    }
    let run = |tape: &mut Tape, p: &GruVars, order: &mut dyn Iterator<Item = usize>| -> Result<Vec<Option<Var>>> {
        let mut h = tape.constant(Tensor::zeros(&[batch, p.hidden]));
        let mut outs = vec![None; seq.len()];
        for t in order {
            let mask: Vec<bool> = lengths.iter().map(|&l| t < l).collect();
            if !mask.iter().any(|&m| m) {
                continue;
            }
            let next = gru_cell(tape, seq[t], h, p)?;
            h = if mask.iter().all(|&m| m) {
                next
            } else {
                tape.select_rows(&mask, next, h)?
            };
            outs[t] = Some(h);
        }
        Ok(outs)
    };
    let forward = run(tape, fwd, &mut (0..seq.len()))?;
    let backward = run(tape, bwd, &mut (0..seq.len()).rev())?;
    let width = fwd.hidden + bwd.hidden;
    let zeros = tape.constant(Tensor::zeros(&[batch, width]));
    let mut out = Vec::with_capacity(seq.len());
    for t in 0..seq.len() {
        let (Some(f), Some(b)) = (forward[t], backward[t]) else {
            out.push(zeros);
            continue;
        };
        let both = tape.concat(&[f, b], 1)?;
        let mask: Vec<bool> = lengths.iter().map(|&l| t < l).collect();
        out.push(if mask.iter().all(|&m| m) {
            both
        } else {
            tape.select_rows(&mask, both, zeros)?
        });
    }
    Ok(out)
}

/// A bank of 1-D convolution filters, `filters` per width, each followed by
/// ReLU and max-over-time pooling.
#[derive(Clone, Debug)]
pub struct ConvBank {
    pub widths: Vec<usize>,
    pub filters: usize,
    pub weights: Vec<ParamId>,
    pub biases: Vec<ParamId>,
}

impl ConvBank {
    /// Registers `prefix.w{width}.weight` (`[width*channels x filters]`) and
    /// `prefix.w{width}.bias` for every width.
    pub fn register<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        channels: usize,
        widths: &[usize],
        filters: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for &w in widths {
            weights.push(params.add(
                format!("{prefix}.w{w}.weight"),
                xavier_uniform(w * channels, filters, rng),
            )?);
            biases.push(params.add(format!("{prefix}.w{w}.bias"), Tensor::zeros(&[filters]))?);
        }
        Ok(Self {
            widths: widths.to_vec(),
            filters,
            weights,
            biases,
        })
    }

    pub fn output_width(&self) -> usize {
        self.widths.len() * self.filters
    }

    /// `seq: [B, T, C]` to the pooled `[B x widths*filters]` features,
    /// widths in registration order.
    pub fn forward(&self, tape: &mut Tape, params: &ParamSet, seq: Var, lengths: &[usize]) -> Result<Var> {
        let mut pooled = Vec::with_capacity(self.widths.len());
        for ((&w, &wid), &bid) in self.widths.iter().zip(&self.weights).zip(&self.biases) {
            let weight = tape.param(params, wid);
            let bias = tape.param(params, bid);
            pooled.push(tape.conv1d_maxpool(seq, weight, bias, w, lengths)?);
        }
        tape.concat(&pooled, 1)
    }
}
