//! Linear SVM (one-vs-rest) and linear SVR heads trained on shared
//! representations by stochastic subgradient descent.
//!
//! Both use the objective `lambda/2 |w|^2 + mean(loss)` with
//! `lambda = 1 / (C N)`, step `1 / (lambda t)` and the bias folded into the
//! weight vector as a constant feature. After every epoch the objective is
//! evaluated and the best snapshot so far is kept.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::container::{self, ArraySpec, NamedArray, SHALLOW_MAGIC};
use crate::corpus::ValenceClass;
use crate::error::{Error, Result};
use crate::model::argmax_class;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShallowConfig {
    pub c: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub standardize: bool,
}

impl Default for ShallowConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.1,
            epochs: 50,
            standardize: true,
        }
    }
}

impl ShallowConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        if !(self.c > 0.0 && self.c.is_finite()) {
            p.push(format!("shallow C {} must be positive", self.c));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            p.push(format!("shallow epsilon {} must be non-negative", self.epsilon));
        }
        if self.epochs == 0 {
            p.push("shallow epochs must be positive".into());
        }
        p
    }
}

/// Per-dimension z-scoring with training statistics. Constant dimensions
/// keep a scale of 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for row in x {
            var.iter_mut()
                .zip(row.iter().zip(&mean))
                .for_each(|(s, (v, m))| *s += (v - m) * (v - m));
        }
        let std = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 0.0 && sd.is_finite() {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Standardised row with the trailing bias feature.
    fn augment(&self, row: &[f64]) -> Vec<f64> {
        let mut out: Vec<f64> = row
            .iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        out.push(1.0);
        out
    }
}

fn check_rows(x: &[Vec<f64>], dim: Option<usize>) -> Result<usize> {
    let d = dim.or_else(|| x.first().map(Vec::len)).unwrap_or(0);
    for (i, row) in x.iter().enumerate() {
        if row.len() != d {
            return Err(Error::Width {
                context: format!("representation row {i}"),
                expected: d,
                found: row.len(),
            });
        }
    }
    Ok(d)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// Loss of one example given its score, and the score derivative used for
/// the subgradient step (`None` when the loss is flat there).
trait PointLoss {
    fn loss(&self, score: f64, target: f64) -> f64;
    fn slope(&self, score: f64, target: f64) -> f64;
}

struct Hinge;

impl PointLoss for Hinge {
    fn loss(&self, score: f64, y: f64) -> f64 {
        (1.0 - y * score).max(0.0)
    }

    fn slope(&self, score: f64, y: f64) -> f64 {
        if y * score < 1.0 {
            -y
        } else {
            0.0
        }
    }
}

struct EpsInsensitive(f64);

impl PointLoss for EpsInsensitive {
    fn loss(&self, score: f64, y: f64) -> f64 {
        ((y - score).abs() - self.0).max(0.0)
    }

    fn slope(&self, score: f64, y: f64) -> f64 {
        let r = y - score;
        if r > self.0 {
            -1.0
        } else if r < -self.0 {
            1.0
        } else {
            0.0
        }
    }
}

fn objective(w: &[f64], x: &[Vec<f64>], y: &[f64], lambda: f64, loss: &dyn PointLoss) -> f64 {
    let data: f64 = x.iter().zip(y).map(|(r, &t)| loss.loss(dot(w, r), t)).sum();
    0.5 * lambda * norm_sq(w) + data / x.len() as f64
}

/// Subgradient descent over augmented rows. Returns the best weights and
/// the objective of the best snapshot after each epoch.
fn descend(
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    epochs: usize,
    radius: f64,
    loss: &dyn PointLoss,
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let d = x[0].len();
    let lambda = 1.0 / (c * n as f64);
    let mut w = vec![0.0; d];
    let mut best_w = w.clone();
    let mut best = objective(&w, x, y, lambda, loss);
    let mut trace = Vec::with_capacity(epochs);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t = 0u64;
    for _ in 0..epochs {
        order.shuffle(rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let slope = loss.slope(dot(&w, &x[i]), y[i]);
            let shrink = 1.0 - eta * lambda;
            if slope == 0.0 {
                w.iter_mut().for_each(|v| *v *= shrink);
            } else {
                w.iter_mut()
                    .zip(&x[i])
                    .for_each(|(v, xi)| *v = shrink * *v - eta * slope * xi);
            }
            let norm = norm_sq(&w).sqrt();
            if norm > radius {
                let k = radius / norm;
                w.iter_mut().for_each(|v| *v *= k);
            }
        }
        let obj = objective(&w, x, y, lambda, loss);
        if obj < best {
            best = obj;
            best_w.clone_from(&w);
        }
        trace.push(best);
    }
    (best_w, trace)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearSvmModel {
    /// One row of length D per class, Neg-V..Pos-V.
    pub weights: Vec<Vec<f64>>,
    pub biases: [f64; 7],
    pub c: f64,
    pub standardizer: Standardizer,
    /// Best objective after each epoch, per class.
    pub objective_trace: Vec<Vec<f64>>,
}

impl LinearSvmModel {
    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn decision_values(&self, row: &[f64]) -> Result<[f64; 7]> {
        if row.len() != self.dim() {
            return Err(Error::Width {
                context: "svm input".into(),
                expected: self.dim(),
                found: row.len(),
            });
        }
        let z = self.standardizer.augment(row);
        let z = &z[..z.len() - 1];
        let mut out = [0.0; 7];
        for (k, o) in out.iter_mut().enumerate() {
            *o = dot(&self.weights[k], z) + self.biases[k];
        }
        Ok(out)
    }

    pub fn predict_one(&self, row: &[f64]) -> Result<ValenceClass> {
        Ok(argmax_class(&self.decision_values(row)?))
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<ValenceClass>> {
        x.iter().map(|r| self.predict_one(r)).collect()
    }
}

/// One-vs-rest linear SVM. Classes absent from `y` get zero rows.
pub fn train_svm(x: &[Vec<f64>], y: &[ValenceClass], config: &ShallowConfig, seed: u64) -> Result<LinearSvmModel> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Invalid(format!("svm: {} rows but {} labels", x.len(), y.len())));
    }
    let p = config.problems();
    if !p.is_empty() {
        return Err(Error::Config(p));
    }
    let d = check_rows(x, None)?;
    let standardizer = if config.standardize {
        Standardizer::fit(x)
    } else {
        Standardizer::identity(d)
    };
    let z: Vec<Vec<f64>> = x.iter().map(|r| standardizer.augment(r)).collect();
    let lambda = 1.0 / (config.c * x.len() as f64);
    let mut weights = vec![vec![0.0; d]; 7];
    let mut biases = [0.0; 7];
    let mut trace = vec![Vec::new(); 7];
    for class in ValenceClass::ALL {
        let k = class.index();
        if !y.contains(&class) {
            continue;
        }
        let targets: Vec<f64> = y.iter().map(|&c| if c == class { 1.0 } else { -1.0 }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let (w, tr) = descend(&z, &targets, config.c, config.epochs, 1.0 / lambda.sqrt(), &Hinge, &mut rng);
        weights[k] = w[..d].to_vec();
        biases[k] = w[d];
        trace[k] = tr;
    }
    Ok(LinearSvmModel {
        weights,
        biases,
        c: config.c,
        standardizer,
        objective_trace: trace,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SvrModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epsilon: f64,
    pub c: f64,
    pub standardizer: Standardizer,
    pub objective_trace: Vec<f64>,
}

impl SvrModel {
    pub fn dim(&self) -> usize {
        self.standardizer.dim()
    }

    pub fn predict_raw(&self, row: &[f64]) -> Result<f64> {
        if row.len() != self.dim() {
            return Err(Error::Width {
                context: "svr input".into(),
                expected: self.dim(),
                found: row.len(),
            });
        }
        let z = self.standardizer.augment(row);
        Ok(dot(&self.weights, &z[..z.len() - 1]) + self.bias)
    }

    /// Prediction clipped to `[0, 1]`.
    pub fn predict_one(&self, row: &[f64]) -> Result<f64> {
        Ok(self.predict_raw(row)?.clamp(0.0, 1.0))
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<f64>> {
        x.iter().map(|r| self.predict_one(r)).collect()
    }
}

pub fn train_svr(x: &[Vec<f64>], y: &[f64], config: &ShallowConfig, seed: u64) -> Result<SvrModel> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Invalid(format!(
            "svr needs at least 2 rows with one target each, got {} rows and {} targets",
            x.len(),
            y.len()
        )));
    }
    let p = config.problems();
    if !p.is_empty() {
        return Err(Error::Config(p));
    }
    let d = check_rows(x, None)?;
    let standardizer = if config.standardize {
        Standardizer::fit(x)
    } else {
        Standardizer::identity(d)
    };
    let z: Vec<Vec<f64>> = x.iter().map(|r| standardizer.augment(r)).collect();
    let lambda = 1.0 / (config.c * x.len() as f64);
    // The optimum satisfies lambda/2 |w|^2 <= objective(0).
    let zero_loss = y.iter().map(|v| (v.abs() - config.epsilon).max(0.0)).sum::<f64>() / y.len() as f64;
    let radius = (2.0 * zero_loss / lambda).sqrt().max(f64::MIN_POSITIVE);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, trace) = descend(&z, y, config.c, config.epochs, radius, &EpsInsensitive(config.epsilon), &mut rng);
    Ok(SvrModel {
        weights: w[..d].to_vec(),
        bias: w[d],
        epsilon: config.epsilon,
        c: config.c,
        standardizer,
        objective_trace: trace,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    Svm,
    Svr,
}

#[derive(Serialize, Deserialize)]
struct ShallowMeta {
    kind: HeadKind,
    dim: usize,
    c: f64,
    epsilon: f64,
    config_hash: String,
}

/// A trained shallow head as stored on disk.
#[derive(Clone, Debug, PartialEq)]
pub enum ShallowModel {
    Svm(LinearSvmModel),
    Svr(SvrModel),
}

fn array(name: &str, shape: Vec<usize>, data: Vec<f64>) -> NamedArray {
    NamedArray {
        spec: ArraySpec {
            name: name.into(),
            shape,
        },
        data,
    }
}

impl ShallowModel {
    pub fn kind(&self) -> HeadKind {
        match self {
            ShallowModel::Svm(_) => HeadKind::Svm,
            ShallowModel::Svr(_) => HeadKind::Svr,
        }
    }

    pub fn to_bytes(&self, config_hash: &str) -> Result<Vec<u8>> {
        let (meta, arrays) = match self {
            ShallowModel::Svm(m) => {
                let d = m.dim();
                (
                    ShallowMeta {
                        kind: HeadKind::Svm,
                        dim: d,
                        c: m.c,
                        epsilon: 0.0,
                        config_hash: config_hash.into(),
                    },
                    vec![
                        array("weights", vec![7, d], m.weights.concat()),
                        array("biases", vec![7], m.biases.to_vec()),
                        array("mean", vec![d], m.standardizer.mean.clone()),
                        array("std", vec![d], m.standardizer.std.clone()),
                    ],
                )
            }
            ShallowModel::Svr(m) => {
                let d = m.dim();
                (
                    ShallowMeta {
                        kind: HeadKind::Svr,
                        dim: d,
                        c: m.c,
                        epsilon: m.epsilon,
                        config_hash: config_hash.into(),
                    },
                    vec![
                        array("weights", vec![d], m.weights.clone()),
                        array("bias", vec![1], vec![m.bias]),
                        array("mean", vec![d], m.standardizer.mean.clone()),
                        array("std", vec![d], m.standardizer.std.clone()),
                    ],
                )
            }
        };
        let mut buf = Vec::new();
        container::write(SHALLOW_MAGIC, &meta, &arrays, &mut buf)?;
        Ok(buf)
    }

    /// The model and the config hash it was saved with.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, String)> {
        let (meta, arrays): (ShallowMeta, Vec<NamedArray>) = container::read(SHALLOW_MAGIC, bytes)?;
        let names: Vec<&str> = arrays.iter().map(|a| a.spec.name.as_str()).collect();
        let d = meta.dim;
        let bad = || Error::Invalid(format!("unexpected shallow model arrays {names:?}"));
        let mut it = arrays.iter();
        let mut next = |name: &str, len: usize| -> Result<Vec<f64>> {
            match it.next() {
                Some(a) if a.spec.name == name && a.data.len() == len => Ok(a.data.clone()),
                _ => Err(bad()),
            }
        };
        let model = match meta.kind {
            HeadKind::Svm => {
                let w = next("weights", 7 * d)?;
                let b = next("biases", 7)?;
                let standardizer = Standardizer {
                    mean: next("mean", d)?,
                    std: next("std", d)?,
                };
                ShallowModel::Svm(LinearSvmModel {
                    weights: w.chunks(d.max(1)).map(<[f64]>::to_vec).take(7).collect(),
                    biases: b.try_into().map_err(|_| bad())?,
                    c: meta.c,
                    standardizer,
                    objective_trace: Vec::new(),
                })
            }
            HeadKind::Svr => {
                let weights = next("weights", d)?;
                let bias = next("bias", 1)?[0];
                let standardizer = Standardizer {
                    mean: next("mean", d)?,
                    std: next("std", d)?,
                };
                ShallowModel::Svr(SvrModel {
                    weights,
                    bias,
                    epsilon: meta.epsilon,
                    c: meta.c,
                    standardizer,
                    objective_trace: Vec::new(),
                })
            }
        };
        Ok((model, meta.config_hash))
    }

    pub fn save(&self, path: &Path, config_hash: &str) -> Result<()> {
        std::fs::write(path, self.to_bytes(config_hash)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
