//! The BiGRU + CNN encoder with classification and intensity heads, its
//! training loop and checkpoints.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use autodiff::nn::{bigru, xavier_uniform, ConvBank, GruParams};
use autodiff::{softmax_rows, Adam, AdamConfig, ParamId, ParamSet, Tape, Tensor, Var};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::container::{self, ArraySpec, NamedArray, CHECKPOINT_MAGIC};
use crate::corpus::ValenceClass;
use crate::embed::TweetMatrix;
use crate::error::{Error, Result};
use crate::eval::{pearson, Correlation};
use crate::features::FeatureLayout;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskMode {
    StlClass,
    StlIntensity,
    Mtl,
}

impl TaskMode {
    pub fn has_class(self) -> bool {
        matches!(self, TaskMode::StlClass | TaskMode::Mtl)
    }

    pub fn has_intensity(self) -> bool {
        matches!(self, TaskMode::StlIntensity | TaskMode::Mtl)
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskMode::StlClass => "stl-class",
            TaskMode::StlIntensity => "stl-intensity",
            TaskMode::Mtl => "mtl",
        }
    }
}

impl fmt::Display for TaskMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('_', "-").as_str() {
            "stl-class" => Ok(TaskMode::StlClass),
            "stl-intensity" => Ok(TaskMode::StlIntensity),
            "mtl" => Ok(TaskMode::Mtl),
            _ => Err(Error::Invalid(format!(
                "unknown task mode `{s}` (expected stl-class, stl-intensity or mtl)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    /// Source names in concatenation order: `lexicons` or a key of the
    /// external feature paths.
    pub sources: Vec<String>,
    /// Zero-fill (with a warning) tweets missing from an external source.
    pub allow_missing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub max_len: usize,
    pub embed_dim: usize,
    pub gru_hidden: usize,
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    pub dropout: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub task_mode: TaskMode,
    pub loss_weight_lambda: f64,
    pub seed: u64,
    pub features: FeatureConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            max_len: 50,
            embed_dim: 300,
            gru_hidden: 256,
            filter_widths: vec![2, 3, 4, 5, 6],
            filters_per_width: 100,
            dropout: 0.5,
            lr: 1e-3,
            batch_size: 32,
            max_epochs: 100,
            patience: 20,
            task_mode: TaskMode::Mtl,
            loss_weight_lambda: 1.0,
            seed: 0,
            features: FeatureConfig::default(),
        }
    }
}

impl ModelConfig {
    /// Every violated constraint, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        for (name, v) in [
            ("max_len", self.max_len),
            ("embed_dim", self.embed_dim),
            ("gru_hidden", self.gru_hidden),
            ("filters_per_width", self.filters_per_width),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
        ] {
            if v == 0 {
                p.push(format!("{name} must be positive"));
            }
        }
        if self.filter_widths.is_empty() {
            p.push("filter_widths is empty".into());
        }
        if self.filter_widths.contains(&0) {
            p.push("filter widths must be positive".into());
        }
        if let Some(&w) = self.filter_widths.iter().max() {
            if w > self.max_len {
                p.push(format!("filter width {w} exceeds max_len {}", self.max_len));
            }
        }
        let mut sorted = self.filter_widths.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.filter_widths.len() {
            p.push("filter_widths contains duplicates".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            p.push(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            p.push(format!("lr {} must be positive", self.lr));
        }
        if !(self.loss_weight_lambda >= 0.0 && self.loss_weight_lambda.is_finite()) {
            p.push(format!("loss_weight_lambda {} must be non-negative", self.loss_weight_lambda));
        }
        if self.patience > self.max_epochs {
            p.push(format!(
                "patience {} exceeds max_epochs {}",
                self.patience, self.max_epochs
            ));
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(p))
        }
    }

    pub fn pooled_width(&self) -> usize {
        self.filter_widths.len() * self.filters_per_width
    }
}

/// Closed-form number of trainable scalars.
pub fn parameter_count(config: &ModelConfig, feature_width: usize) -> usize {
    let (d, h, f) = (config.embed_dim, config.gru_hidden, config.filters_per_width);
    let gru = 2 * 3 * (d * h + h * h + h);
    let conv: usize = config.filter_widths.iter().map(|w| w * 2 * h * f + f).sum();
    let combined = config.pooled_width() + feature_width;
    let class = if config.task_mode.has_class() { combined * 7 + 7 } else { 0 };
    let intensity = if config.task_mode.has_intensity() { combined + 1 } else { 0 };
    gru + conv + class + intensity
}

/// A tweet ready for the network.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedExample {
    pub id: String,
    pub matrix: TweetMatrix,
    pub features: Vec<f64>,
    pub class: Option<ValenceClass>,
    pub intensity: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
struct Head {
    weight: ParamId,
    bias: ParamId,
}

impl Head {
    fn register<R: Rng + ?Sized>(params: &mut ParamSet, name: &str, input: usize, out: usize, rng: &mut R) -> Result<Self> {
        Ok(Self {
            weight: params.add(format!("head.{name}.weight"), xavier_uniform(input, out, rng))?,
            bias: params.add(format!("head.{name}.bias"), Tensor::zeros(&[out]))?,
        })
    }

    fn forward(&self, tape: &mut Tape, params: &ParamSet, x: Var) -> Result<Var> {
        let w = tape.param(params, self.weight);
        let b = tape.param(params, self.bias);
        Ok(tape.affine(x, w, b)?)
    }
}

pub struct Model {
    pub config: ModelConfig,
    pub params: ParamSet,
    feature_width: usize,
    fwd: GruParams,
    bwd: GruParams,
    conv: ConvBank,
    class_head: Option<Head>,
    intensity_head: Option<Head>,
}

struct TapeOutputs {
    combined: Var,
    class_logits: Option<Var>,
    intensity: Option<Var>,
}

/// Eval-mode outputs for one tweet.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub id: String,
    pub class_probs: Option<[f64; 7]>,
    pub class: Option<ValenceClass>,
    pub intensity: Option<f64>,
    pub representation: SharedRepresentation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SharedRepresentation {
    pub pooled: Vec<f64>,
    pub handcrafted: Vec<f64>,
    pub combined: Vec<f64>,
}

/// Argmax with ties going to the lower ordinal.
pub fn argmax_class(scores: &[f64]) -> ValenceClass {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    ValenceClass::from_index(best).expect("seven scores")
}

impl Model {
    /// Registers every parameter, initialised from the config seed.
    pub fn build(config: &ModelConfig, feature_width: usize) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamSet::new();
        let (d, h) = (config.embed_dim, config.gru_hidden);
        let fwd = GruParams::register(&mut params, "encoder.gru_fwd", d, h, &mut rng)?;
        let bwd = GruParams::register(&mut params, "encoder.gru_bwd", d, h, &mut rng)?;
        let conv = ConvBank::register(
            &mut params,
            "encoder.conv",
            2 * h,
            &config.filter_widths,
            config.filters_per_width,
            &mut rng,
        )?;
        let combined = conv.output_width() + feature_width;
        let class_head = match config.task_mode.has_class() {
            true => Some(Head::register(&mut params, "class", combined, 7, &mut rng)?),
            false => None,
        };
        let intensity_head = match config.task_mode.has_intensity() {
            true => Some(Head::register(&mut params, "intensity", combined, 1, &mut rng)?),
            false => None,
        };
        Ok(Self {
            config: config.clone(),
            params,
            feature_width,
            fwd,
            bwd,
            conv,
            class_head,
            intensity_head,
        })
    }

    pub fn feature_width(&self) -> usize {
        self.feature_width
    }

    pub fn pooled_width(&self) -> usize {
        self.conv.output_width()
    }

    pub fn combined_width(&self) -> usize {
        self.pooled_width() + self.feature_width
    }

    pub fn check_example(&self, ex: &EncodedExample) -> Result<()> {
        let m = &ex.matrix;
        if m.dim != self.config.embed_dim || m.max_len != self.config.max_len {
            return Err(Error::Width {
                context: format!("tweet `{}` matrix", ex.id),
                expected: self.config.max_len * self.config.embed_dim,
                found: m.max_len * m.dim,
            });
        }
        if ex.features.len() != self.feature_width {
            return Err(Error::Width {
                context: format!("tweet `{}` features", ex.id),
                expected: self.feature_width,
                found: ex.features.len(),
            });
        }
        Ok(())
    }

    fn forward_tape<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        batch: &[&EncodedExample],
        training: bool,
        rng: &mut R,
    ) -> Result<TapeOutputs> {
        let b = batch.len();
        let d = self.config.embed_dim;
        let max_width = *self.config.filter_widths.iter().max().unwrap_or(&1);
        let longest = batch.iter().map(|e| e.matrix.length).max().unwrap_or(0);
        // Steps past every row's length are masked, so the batch is cut there.
        let steps = longest.max(max_width).min(self.config.max_len);
        let lengths: Vec<usize> = batch.iter().map(|e| e.matrix.length.min(steps)).collect();
        let p = if training { self.config.dropout } else { 0.0 };

        let mut seq = Vec::with_capacity(steps);
        for t in 0..steps {
            let mut rows = Vec::with_capacity(b * d);
            for e in batch {
                rows.extend_from_slice(e.matrix.row(t));
            }
            let x = tape.constant(Tensor::new(vec![b, d], rows)?);
            seq.push(tape.dropout(x, p, training, rng)?);
        }
        let fwd = self.fwd.bind(tape, &self.params);
        let bwd = self.bwd.bind(tape, &self.params);
        let hidden = bigru(tape, &seq, &lengths, &fwd, &bwd)?;
        let stacked = tape.stack(&hidden, 1)?;
        let pooled = self.conv.forward(tape, &self.params, stacked, &lengths)?;
        let combined = if self.feature_width > 0 {
            let mut feats = Vec::with_capacity(b * self.feature_width);
            for e in batch {
                feats.extend_from_slice(&e.features);
            }
            let f = tape.constant(Tensor::new(vec![b, self.feature_width], feats)?);
            tape.concat(&[pooled, f], 1)?
        } else {
            pooled
        };
        let dropped = tape.dropout(combined, p, training, rng)?;
        let class_logits = match &self.class_head {
            Some(h) => Some(h.forward(tape, &self.params, dropped)?),
            None => None,
        };
        let intensity = match &self.intensity_head {
            Some(h) => {
                let raw = h.forward(tape, &self.params, dropped)?;
                Some(tape.sigmoid(raw))
            }
            None => None,
        };
        Ok(TapeOutputs {
            combined,
            class_logits,
            intensity,
        })
    }

    /// Training loss for a batch: cross-entropy, MSE, or
    /// `CE + lambda * MSE`.
    fn loss(&self, tape: &mut Tape, out: &TapeOutputs, batch: &[&EncodedExample]) -> Result<Var> {
        let mut terms = Vec::new();
        if let Some(logits) = out.class_logits {
            let targets = batch
                .iter()
                .map(|e| e.class.map(ValenceClass::index))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::MissingValence(missing(batch, |e| e.class.is_none())))?;
            terms.push(tape.softmax_cross_entropy(logits, &targets)?);
        }
        if let Some(pred) = out.intensity {
            let targets = batch
                .iter()
                .map(|e| e.intensity)
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::MissingIntensity(missing(batch, |e| e.intensity.is_none())))?;
            let mse = tape.mse(pred, &targets)?;
            terms.push(if out.class_logits.is_some() {
                tape.scale(mse, self.config.loss_weight_lambda)
            } else {
                mse
            });
        }
        match terms.as_slice() {
            [one] => Ok(*one),
            [a, b] => Ok(tape.add(*a, *b)?),
            _ => Err(Error::Invalid("model has no heads".into())),
        }
    }

    /// Eval-mode predictions in input order, computed in batches.
    pub fn predict(&self, examples: &[EncodedExample]) -> Result<Vec<Prediction>> {
        let refs: Vec<&EncodedExample> = examples.iter().collect();
        self.predict_refs(&refs)
    }

    pub fn predict_refs(&self, examples: &[&EncodedExample]) -> Result<Vec<Prediction>> {
        let mut out = Vec::with_capacity(examples.len());
        // Eval mode draws no random numbers.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for chunk in examples.chunks(self.config.batch_size.max(1)) {
            for e in chunk {
                self.check_example(e)?;
            }
            let mut tape = Tape::new();
            let o = self.forward_tape(&mut tape, chunk, false, &mut rng)?;
            let combined = tape.value(o.combined);
            let probs = o.class_logits.map(|l| softmax_rows(tape.value(l)));
            let intensity = o.intensity.map(|v| tape.value(v).data().to_vec());
            let pw = self.pooled_width();
            for (i, e) in chunk.iter().enumerate() {
                let row = combined.row(i).to_vec();
                let class_probs = probs.as_ref().map(|p| {
                    let mut a = [0.0; 7];
                    a.copy_from_slice(p.row(i));
                    a
                });
                out.push(Prediction {
                    id: e.id.clone(),
                    class: class_probs.map(|p| argmax_class(&p)),
                    class_probs,
                    intensity: intensity.as_ref().map(|v| v[i]),
                    representation: SharedRepresentation {
                        pooled: row[..pw].to_vec(),
                        handcrafted: row[pw..].to_vec(),
                        combined: row,
                    },
                });
            }
        }
        Ok(out)
    }

    pub fn extract_representation(&self, example: &EncodedExample) -> Result<SharedRepresentation> {
        Ok(self.predict_refs(&[example])?.remove(0).representation)
    }

    /// Dev Pearson per active task, `(class, intensity)`.
    pub fn dev_scores(&self, dev: &[EncodedExample]) -> Result<(Option<Correlation>, Option<Correlation>)> {
        let preds = self.predict(dev)?;
        let mut class = None;
        let mut intensity = None;
        if self.config.task_mode.has_class() {
            let gold: Vec<f64> = dev
                .iter()
                .map(|e| e.class.map(|c| c.ordinal() as f64))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::MissingValence(missing_owned(dev, |e| e.class.is_none())))?;
            let pred: Vec<f64> = preds.iter().map(|p| p.class.unwrap().ordinal() as f64).collect();
            class = Some(pearson(&gold, &pred)?);
        }
        if self.config.task_mode.has_intensity() {
            let gold: Vec<f64> = dev
                .iter()
                .map(|e| e.intensity)
                .collect::<Option<_>>()
                .ok_or_else(|| Error::MissingIntensity(missing_owned(dev, |e| e.intensity.is_none())))?;
            let pred: Vec<f64> = preds.iter().map(|p| p.intensity.unwrap()).collect();
            intensity = Some(pearson(&gold, &pred)?);
        }
        Ok((class, intensity))
    }

    /// One optimisation step on `batch`; returns the batch loss.
    pub fn train_step<R: Rng + ?Sized>(&mut self, adam: &mut Adam, batch: &[&EncodedExample], rng: &mut R) -> Result<f64> {
        let mut tape = Tape::new();
        let out = self.forward_tape(&mut tape, batch, true, rng)?;
        let loss = self.loss(&mut tape, &out, batch)?;
        let value = tape.value(loss).item();
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch: 0,
                batch: 0,
                detail: format!("loss {value} on tweets {:?}", batch.iter().map(|e| &e.id).collect::<Vec<_>>()),
            });
        }
        let grads = tape.backward(loss)?;
        self.params.zero_grad();
        grads.accumulate_into(&mut self.params);
        adam.step(&mut self.params)?;
        Ok(value)
    }

    fn snapshot(&self) -> Vec<Tensor> {
        self.params.iter().map(|(_, p)| p.value.clone()).collect()
    }

    fn restore(&mut self, values: Vec<Tensor>) {
        for (p, v) in self.params.iter_mut().zip(values) {
            p.value = v;
        }
    }

    /// Adam training with early stopping on the mean dev Pearson of the
    /// active tasks (undefined counts as 0). Leaves the best epoch's
    /// parameters in place.
    pub fn train(&mut self, train: &[EncodedExample], dev: &[EncodedExample]) -> Result<TrainOutcome> {
        if train.is_empty() || dev.is_empty() {
            return Err(Error::Invalid("training and dev splits must be non-empty".into()));
        }
        self.check_labels(train)?;
        self.check_labels(dev)?;
        for e in train.iter().chain(dev) {
            self.check_example(e)?;
        }
        let mut adam = Adam::new(
            AdamConfig {
                lr: self.config.lr,
                ..AdamConfig::default()
            },
            &self.params,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut history = Vec::new();
        let mut best: Option<(f64, usize, Vec<Tensor>)> = None;
        let mut wait = 0;
        for epoch in 1..=self.config.max_epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for (bi, idx) in order.chunks(self.config.batch_size).enumerate() {
                let batch: Vec<&EncodedExample> = idx.iter().map(|&i| &train[i]).collect();
                let loss = self.train_step(&mut adam, &batch, &mut rng).map_err(|e| match e {
                    Error::NonFiniteLoss { detail, .. } => Error::NonFiniteLoss {
                        epoch,
                        batch: bi,
                        detail,
                    },
                    other => other,
                })?;
                total += loss * batch.len() as f64;
            }
            let (class, intensity) = self.dev_scores(dev)?;
            let active: Vec<f64> = [class, intensity].iter().flatten().map(|c| c.value).collect();
            let monitor = active.iter().sum::<f64>() / active.len() as f64;
            let record = EpochRecord {
                epoch,
                train_loss: total / train.len() as f64,
                dev_pearson_class: class.map(|c| c.value),
                dev_pearson_intensity: intensity.map(|c| c.value),
            };
            log::info!(
                "epoch {epoch}: loss {:.6} dev class {:?} intensity {:?}",
                record.train_loss,
                record.dev_pearson_class,
                record.dev_pearson_intensity
            );
            history.push(record);
            if best.as_ref().is_none_or(|(b, _, _)| monitor > *b) {
                best = Some((monitor, epoch, self.snapshot()));
                wait = 0;
            } else {
                wait += 1;
                if wait >= self.config.patience {
                    break;
                }
            }
        }
        let (best_monitor, best_epoch, values) = best.expect("at least one epoch");
        self.restore(values);
        Ok(TrainOutcome {
            history,
            best_epoch,
            best_monitor,
        })
    }

    fn check_labels(&self, data: &[EncodedExample]) -> Result<()> {
        if self.config.task_mode.has_class() {
            let m = missing_owned(data, |e| e.class.is_none());
            if !m.is_empty() {
                return Err(Error::MissingValence(m));
            }
        }
        if self.config.task_mode.has_intensity() {
            let m = missing_owned(data, |e| e.intensity.is_none());
            if !m.is_empty() {
                return Err(Error::MissingIntensity(m));
            }
        }
        Ok(())
    }

    fn arrays(&self) -> Vec<NamedArray> {
        self.params
            .iter()
            .map(|(_, p)| NamedArray {
                spec: ArraySpec {
                    name: p.name().to_string(),
                    shape: p.value.shape().to_vec(),
                },
                data: p.value.data().to_vec(),
            })
            .collect()
    }

    fn load_arrays(&mut self, arrays: Vec<NamedArray>) -> Result<()> {
        if arrays.len() != self.params.len() {
            return Err(Error::Invalid(format!(
                "checkpoint has {} arrays, model expects {}",
                arrays.len(),
                self.params.len()
            )));
        }
        for a in arrays {
            let id = self
                .params
                .id(&a.spec.name)
                .ok_or_else(|| Error::Invalid(format!("unknown array `{}` in checkpoint", a.spec.name)))?;
            let p = self.params.get_mut(id);
            if p.value.shape() != a.spec.shape.as_slice() {
                return Err(Error::Invalid(format!(
                    "array `{}` has shape {:?}, model expects {:?}",
                    a.spec.name,
                    a.spec.shape,
                    p.value.shape()
                )));
            }
            p.value = Tensor::new(a.spec.shape, a.data)?;
        }
        Ok(())
    }
}

fn missing(batch: &[&EncodedExample], pred: impl Fn(&EncodedExample) -> bool) -> Vec<String> {
    batch.iter().filter(|e| pred(e)).map(|e| e.id.clone()).collect()
}

fn missing_owned(data: &[EncodedExample], pred: impl Fn(&EncodedExample) -> bool) -> Vec<String> {
    data.iter().filter(|e| pred(e)).map(|e| e.id.clone()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_pearson_class: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dev_pearson_intensity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_monitor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CheckpointMeta {
    config: ModelConfig,
    feature_width: usize,
    feature_layout: FeatureLayout,
    history: Vec<EpochRecord>,
    best_epoch: usize,
    config_hash: String,
}

/// A trained model with the context needed to reuse it.
pub struct Checkpoint {
    pub model: Model,
    pub feature_layout: FeatureLayout,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub config_hash: String,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = CheckpointMeta {
            config: self.model.config.clone(),
            feature_width: self.model.feature_width,
            feature_layout: self.feature_layout.clone(),
            history: self.history.clone(),
            best_epoch: self.best_epoch,
            config_hash: self.config_hash.clone(),
        };
        let mut buf = Vec::new();
        container::write(CHECKPOINT_MAGIC, &meta, &self.model.arrays(), &mut buf)?;
        Ok(buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (meta, arrays): (CheckpointMeta, _) = container::read(CHECKPOINT_MAGIC, bytes)?;
        let mut model = Model::build(&meta.config, meta.feature_width)?;
        model.load_arrays(arrays)?;
        Ok(Self {
            model,
            feature_layout: meta.feature_layout,
            history: meta.history,
            best_epoch: meta.best_epoch,
            config_hash: meta.config_hash,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Invalid(m) => Error::Invalid(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
