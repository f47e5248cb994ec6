//! End-to-end commands: normalise, encode, train, export representations,
//! train shallow heads, evaluate and compare runs.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus::{detect_kind, parse_dataset, write_dataset, DatasetSplit, LabeledTweet, ValenceClass};
use crate::embed::{EmbeddingTable, VectorSource, WordComposer};
use crate::error::{read_to_string, Error, Result};
use crate::eval::{
    compare_examples, compare_runs, evaluate_run, ComparisonTable, EvalReport, Predictions, RunScores, Task, CELLS,
};
use crate::features::{
    ExternalFeatureSet, FeatureAssembler, FeatureLayout, FeatureSource, ScoredLexicon, LEXICON_SOURCE,
};
use crate::model::{Checkpoint, EncodedExample, EpochRecord, Model, Prediction, TaskMode};
use crate::normalize::{EmojiLexicon, FrequencyLexicon, NormalizeOptions, Normalizer};
use crate::shallow::{train_svm, train_svr, HeadKind, ShallowModel};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const HISTORY_FILE: &str = "history.json";
pub const RUN_FILE: &str = "run.json";

/// Loaded lexicons, embedding tables and feature sources for a config.
pub struct Resources {
    pub normalizer: Normalizer,
    pub composer: WordComposer,
    pub assembler: Option<FeatureAssembler>,
}

pub fn load_normalizer(freq: Option<&Path>, emoji: Option<&Path>, options: NormalizeOptions) -> Result<Normalizer> {
    let freq = match freq {
        Some(p) => FrequencyLexicon::load(p)?,
        None => FrequencyLexicon::default(),
    };
    let emoji = match emoji {
        Some(p) => EmojiLexicon::load(p)?,
        None => EmojiLexicon::default(),
    };
    Ok(Normalizer::new(freq, emoji, options))
}

impl Resources {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let r = &cfg.resources;
        let normalizer = load_normalizer(
            r.freq_lexicon.as_deref(),
            r.emoji_lexicon.as_deref(),
            cfg.normalize.clone(),
        )?;
        let glove_path = r
            .glove
            .as_deref()
            .ok_or_else(|| Error::Config(vec!["resources.glove: missing".into()]))?;
        let dim = cfg.model.embed_dim;
        let glove = EmbeddingTable::load(glove_path, r.glove_dim)?;
        let emoji = r.emoji_vectors.as_deref().map(|p| EmbeddingTable::load(p, dim)).transpose()?;
        let chars = r.char_vectors.as_deref().map(|p| EmbeddingTable::load(p, dim)).transpose()?;
        let composer = WordComposer::new(glove, emoji, chars, dim)?;
        let assembler = load_assembler(cfg)?;
        Ok(Self {
            normalizer,
            composer,
            assembler,
        })
    }

    pub fn feature_width(&self) -> usize {
        self.assembler.as_ref().map_or(0, FeatureAssembler::width)
    }

    pub fn feature_layout(&self) -> FeatureLayout {
        self.assembler.as_ref().map(|a| a.layout().clone()).unwrap_or_default()
    }

    pub fn encode(&self, tweet: &LabeledTweet, max_len: usize) -> Result<EncodedExample> {
        let norm = self.normalizer.normalize(tweet);
        let features = match &self.assembler {
            Some(a) => a.assemble_tweet(&norm)?.values,
            None => Vec::new(),
        };
        Ok(EncodedExample {
            id: tweet.id.clone(),
            matrix: self.composer.encode(&norm.tokens, max_len),
            features,
            class: tweet.valence,
            intensity: tweet.intensity,
        })
    }

    pub fn encode_split(&self, split: &DatasetSplit, max_len: usize) -> Result<Vec<EncodedExample>> {
        split.examples.iter().map(|t| self.encode(t, max_len)).collect()
    }
}

fn load_assembler(cfg: &RunConfig) -> Result<Option<FeatureAssembler>> {
    let fc = &cfg.model.features;
    if fc.sources.is_empty() {
        return Ok(None);
    }
    let mut sources = Vec::new();
    for name in &fc.sources {
        let src = if name == LEXICON_SOURCE {
            let mut lexicons = cfg
                .feature_files
                .lexicons
                .iter()
                .map(|p| ScoredLexicon::load(p))
                .collect::<Result<Vec<_>>>()?;
            if let Some(p) = &cfg.feature_files.sentiwordnet {
                lexicons.push(ScoredLexicon::from_sentiwordnet(p)?);
            }
            FeatureSource::Lexicons(lexicons)
        } else {
            let ext = cfg
                .feature_files
                .external
                .get(name)
                .ok_or_else(|| Error::Config(vec![format!("unknown feature source `{name}`")]))?;
            FeatureSource::External(ExternalFeatureSet::load(&ext.path, ext.dim)?)
        };
        sources.push((name.clone(), src));
    }
    Ok(Some(FeatureAssembler::new(sources, fc.allow_missing)?))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, serde_json::to_string_pretty(value)? + "\n")
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_to_string(path)?)?)
}

/// Normalises every tweet of a dataset file, keeping its layout and labels.
/// Returns the number of rows written.
pub fn normalize_file(input: &Path, output: &Path, normalizer: &Normalizer) -> Result<usize> {
    let text = read_to_string(input)?;
    let kind = detect_kind(&text)
        .ok_or_else(|| Error::parse(input, 1, "cannot tell the label layout from the header"))?;
    let mut split = parse_dataset(&text, kind, input)?;
    for t in &mut split.examples {
        t.text = normalizer.tokens(&t.text).join(" ");
    }
    let mut buf = Vec::new();
    write_dataset(&split, kind, &mut buf)?;
    write_file(output, buf)?;
    Ok(split.len())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EncodeStats {
    pub tweets: usize,
    pub tokens: usize,
    pub truncated: usize,
    pub glove: usize,
    pub emoji: usize,
    pub characters: usize,
    pub feature_width: usize,
}

/// Writes one row per tweet, `id<TAB>length<TAB>tokens` with each token
/// tagged by the table that produced its vector (`g`, `e` or `c`).
pub fn encode_split_report(cfg: &RunConfig, split_name: &str, out: &Path) -> Result<EncodeStats> {
    cfg.validate()?;
    let res = Resources::load(cfg)?;
    let split = cfg
        .data
        .get(split_name)
        .ok_or_else(|| Error::Invalid(format!("no split named `{split_name}`")))?
        .load(split_name, None)?;
    let mut stats = EncodeStats {
        feature_width: res.feature_width(),
        ..Default::default()
    };
    let mut text = format!("#encode\t{}\t{}\n", cfg.hash(), cfg.model.embed_dim);
    for t in &split.examples {
        let norm = res.normalizer.normalize(t);
        let kept = norm.tokens.len().min(cfg.model.max_len);
        stats.tweets += 1;
        stats.tokens += kept;
        stats.truncated += usize::from(norm.tokens.len() > cfg.model.max_len);
        let mut tagged = Vec::with_capacity(kept);
        for tok in &norm.tokens[..kept] {
            let (_, src) = res.composer.compose_with_source(tok);
            let tag = match src {
                VectorSource::Glove => {
                    stats.glove += 1;
                    'g'
                }
                VectorSource::Emoji => {
                    stats.emoji += 1;
                    'e'
                }
                VectorSource::Characters => {
                    stats.characters += 1;
                    'c'
                }
            };
            tagged.push(format!("{tok}/{tag}"));
        }
        if let Some(a) = &res.assembler {
            a.assemble_tweet(&norm)?;
        }
        text.push_str(&format!("{}\t{}\t{}\n", t.id, kept, tagged.join(" ")));
    }
    write_file(out, text)?;
    Ok(stats)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub config_hash: String,
    pub mode: TaskMode,
    pub seed: u64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub feature_width: usize,
    pub representation_width: usize,
    pub parameters: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryFile {
    pub config_hash: String,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

fn report_name(split: &str, head: &str, task: Task) -> String {
    format!("{split}_{head}_{}.json", task.short())
}

/// Writes a report plus, for classification, the confusion matrix as CSV
/// and PNG next to it.
pub fn write_report(dir: &Path, name: &str, report: &EvalReport) -> Result<()> {
    let path = dir.join(name);
    write_json(&path, report)?;
    if let Some(m) = &report.confusion {
        let stem = name.trim_end_matches(".json");
        let mut csv = Vec::new();
        m.write_csv(&mut csv)
            .map_err(|e| Error::io(&dir.join(format!("{stem}_confusion.csv")), e))?;
        write_file(&dir.join(format!("{stem}_confusion.csv")), csv)?;
        m.render_heatmap(&dir.join(format!("{stem}_confusion.png")), 24)?;
    }
    Ok(())
}

fn prediction_maps(preds: &[Prediction]) -> (Predictions, Predictions) {
    let classes = preds.iter().filter_map(|p| p.class.map(|c| (p.id.clone(), c))).collect();
    let intensities = preds
        .iter()
        .filter_map(|p| p.intensity.map(|v| (p.id.clone(), v)))
        .collect();
    (Predictions::Classes(classes), Predictions::Intensities(intensities))
}

/// Trains one model and writes its artifacts into `out`.
pub fn train_run(cfg: &RunConfig, mode: TaskMode, seed: u64, out: &Path) -> Result<RunInfo> {
    cfg.validate()?;
    let hash = cfg.hash();
    let res = Resources::load(cfg)?;
    let model_cfg = cfg.model_for(mode, seed);
    let max_len = model_cfg.max_len;
    let train = res.encode_split(&cfg.data.train.load("train", Some(mode))?, max_len)?;
    let dev_split = cfg.data.dev.load("dev", Some(mode))?;
    let dev = res.encode_split(&dev_split, max_len)?;
    let mut model = Model::build(&model_cfg, res.feature_width())?;
    log::info!(
        "training {mode} seed {seed}: {} train, {} dev, {} parameters",
        train.len(),
        dev.len(),
        model.params.num_scalars()
    );
    let outcome = model.train(&train, &dev)?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let ckpt = Checkpoint {
        model,
        feature_layout: res.feature_layout(),
        history: outcome.history.clone(),
        best_epoch: outcome.best_epoch,
        config_hash: hash.clone(),
    };
    ckpt.save(&out.join(CHECKPOINT_FILE))?;
    write_json(
        &out.join(HISTORY_FILE),
        &HistoryFile {
            config_hash: hash.clone(),
            best_epoch: outcome.best_epoch,
            history: outcome.history.clone(),
        },
    )?;
    let mut splits = vec![(dev_split, dev)];
    if let Some(t) = &cfg.data.test {
        let test_split = t.load("test", Some(mode))?;
        let test = res.encode_split(&test_split, max_len)?;
        splits.push((test_split, test));
    }
    for (split, encoded) in &splits {
        let preds = ckpt.model.predict(encoded)?;
        let (classes, intensities) = prediction_maps(&preds);
        for (active, p) in [(mode.has_class(), classes), (mode.has_intensity(), intensities)] {
            if !active {
                continue;
            }
            let mut report = evaluate_run(&p, split)?;
            report.config_hash = Some(hash.clone());
            write_report(out, &report_name(&split.name, "dl", report.task), &report)?;
        }
    }
    let info = RunInfo {
        config_hash: hash,
        mode,
        seed,
        best_epoch: outcome.best_epoch,
        epochs_run: outcome.history.len(),
        feature_width: ckpt.model.feature_width(),
        representation_width: ckpt.model.combined_width(),
        parameters: ckpt.model.params.num_scalars(),
    };
    write_json(&out.join(RUN_FILE), &info)?;
    Ok(info)
}

pub fn load_run_info(dir: &Path) -> Result<RunInfo> {
    read_json(&dir.join(RUN_FILE))
}

/// Representation rows keyed by tweet id.
#[derive(Clone, Debug, PartialEq)]
pub struct ReprFile {
    pub config_hash: String,
    pub width: usize,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl ReprFile {
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        let io = |e| Error::io(path, e);
        writeln!(buf, "#repr\t{}\t{}", self.config_hash, self.width).map_err(io)?;
        for (id, v) in &self.rows {
            if v.len() != self.width {
                return Err(Error::Width {
                    context: format!("representation of `{id}`"),
                    expected: self.width,
                    found: v.len(),
                });
            }
            let vals: Vec<String> = v.iter().map(|x| format!("{x:?}")).collect();
            writeln!(buf, "{id}\t{}", vals.join(" ")).map_err(io)?;
        }
        write_file(path, buf)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let header: Vec<&str> = lines
            .next()
            .map(|(_, l)| l.split('\t').collect())
            .unwrap_or_default();
        if header.len() != 3 || header[0] != "#repr" {
            return Err(Error::parse(path, 1, "expected `#repr<TAB>hash<TAB>width`"));
        }
        let width: usize = header[2]
            .parse()
            .map_err(|_| Error::parse(path, 1, format!("bad width `{}`", header[2])))?;
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (id, rest) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected `id<TAB>values`"))?;
            let v = rest
                .split(' ')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>().map_err(|_| Error::parse(path, i + 1, format!("bad value `{s}`"))))
                .collect::<Result<Vec<_>>>()?;
            if v.len() != width {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected {width} values, found {}", v.len()),
                ));
            }
            rows.push((id.to_string(), v));
        }
        Ok(Self {
            config_hash: header[1].to_string(),
            width,
            rows,
        })
    }
}

pub fn repr_path(run_dir: &Path, split: &str) -> PathBuf {
    run_dir.join(format!("repr_{split}.tsv"))
}

/// Exports shared representations for the named splits from a run's
/// checkpoint.
pub fn export_representations(cfg: &RunConfig, run_dir: &Path, splits: &[String], force: bool) -> Result<Vec<PathBuf>> {
    let ckpt = Checkpoint::load(&run_dir.join(CHECKPOINT_FILE))?;
    if ckpt.config_hash != cfg.hash() && !force {
        return Err(Error::Invalid(format!(
            "checkpoint config hash {} differs from the config's {} (use --force to override)",
            ckpt.config_hash,
            cfg.hash()
        )));
    }
    let res = Resources::load(cfg)?;
    if res.feature_width() != ckpt.model.feature_width() {
        return Err(Error::Width {
            context: "hand-crafted features versus checkpoint".into(),
            expected: ckpt.model.feature_width(),
            found: res.feature_width(),
        });
    }
    let mut out = Vec::new();
    for name in splits {
        let paths = cfg
            .data
            .get(name)
            .ok_or_else(|| Error::Invalid(format!("no split named `{name}`")))?;
        let split = paths.load(name, None)?;
        let encoded = res.encode_split(&split, ckpt.model.config.max_len)?;
        let preds = ckpt.model.predict(&encoded)?;
        let file = ReprFile {
            config_hash: ckpt.config_hash.clone(),
            width: ckpt.model.combined_width(),
            rows: preds.into_iter().map(|p| (p.id, p.representation.combined)).collect(),
        };
        let path = repr_path(run_dir, name);
        file.write(&path)?;
        out.push(path);
    }
    Ok(out)
}

/// Trains an SVM or SVR on the training representations of a run and
/// scores it on `eval_split`.
pub fn shallow_run(
    cfg: &RunConfig,
    run_dir: &Path,
    head: HeadKind,
    eval_split: &str,
    seed: u64,
) -> Result<EvalReport> {
    let train = ReprFile::load(&repr_path(run_dir, "train"))?;
    let eval = ReprFile::load(&repr_path(run_dir, eval_split))?;
    if train.width != eval.width {
        return Err(Error::Width {
            context: format!("{eval_split} representations versus train"),
            expected: train.width,
            found: eval.width,
        });
    }
    if train.config_hash != eval.config_hash {
        return Err(Error::Invalid("representation files come from different configs".into()));
    }
    let task = match head {
        HeadKind::Svm => Task::Classification,
        HeadKind::Svr => Task::Intensity,
    };
    let mode = match task {
        Task::Classification => TaskMode::StlClass,
        Task::Intensity => TaskMode::StlIntensity,
    };
    let gold_train = cfg.data.train.load("train", Some(mode))?;
    let gold_eval = cfg
        .data
        .get(eval_split)
        .ok_or_else(|| Error::Invalid(format!("no split named `{eval_split}`")))?
        .load(eval_split, Some(mode))?;
    let by_id: HashMap<&str, &LabeledTweet> = gold_train.examples.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut x = Vec::with_capacity(train.rows.len());
    let mut missing = Vec::new();
    let mut classes = Vec::new();
    let mut scores = Vec::new();
    for (id, v) in &train.rows {
        match by_id.get(id.as_str()) {
            Some(t) => {
                x.push(v.clone());
                match task {
                    Task::Classification => classes.push(t.valence.ok_or_else(|| Error::MissingValence(vec![id.clone()]))?),
                    Task::Intensity => scores.push(t.intensity.ok_or_else(|| Error::MissingIntensity(vec![id.clone()]))?),
                }
            }
            None => missing.push(id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Invalid(format!("representations without training labels: {missing:?}")));
    }
    let eval_x: Vec<Vec<f64>> = eval.rows.iter().map(|(_, v)| v.clone()).collect();
    let (model, preds) = match head {
        HeadKind::Svm => {
            let m = train_svm(&x, &classes, &cfg.shallow, seed)?;
            let p = m.predict(&eval_x)?;
            let map: HashMap<String, ValenceClass> =
                eval.rows.iter().map(|(id, _)| id.clone()).zip(p).collect();
            (ShallowModel::Svm(m), Predictions::Classes(map))
        }
        HeadKind::Svr => {
            let m = train_svr(&x, &scores, &cfg.shallow, seed)?;
            let p = m.predict(&eval_x)?;
            let map: HashMap<String, f64> = eval.rows.iter().map(|(id, _)| id.clone()).zip(p).collect();
            (ShallowModel::Svr(m), Predictions::Intensities(map))
        }
    };
    let name = match head {
        HeadKind::Svm => "svm.bin",
        HeadKind::Svr => "svr.bin",
    };
    model.save(&run_dir.join(name), &train.config_hash)?;
    let mut report = evaluate_run(&preds, &gold_eval)?;
    report.config_hash = Some(train.config_hash.clone());
    write_report(run_dir, &report_name(eval_split, "ml", task), &report)?;
    Ok(report)
}

/// Reads `id<TAB>value` predictions. Class values may be ordinals, labels
/// such as `Neg-V`, or `N: description` strings.
pub fn read_predictions(path: &Path, task: Task) -> Result<Predictions> {
    let text = read_to_string(path)?;
    let mut classes = HashMap::new();
    let mut scores = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let (id, value) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, i + 1, "expected `id<TAB>value`"))?;
        let value = value.trim();
        let dup = match task {
            Task::Classification => {
                let head = value.split(':').next().unwrap_or("").trim();
                let class = match head.parse::<i32>() {
                    Ok(o) => ValenceClass::from_ordinal(o),
                    Err(_) => value.parse().ok(),
                }
                .ok_or_else(|| Error::parse(path, i + 1, format!("bad class `{value}`")))?;
                classes.insert(id.to_string(), class).is_some()
            }
            Task::Intensity => {
                let v: f64 = value
                    .parse()
                    .map_err(|_| Error::parse(path, i + 1, format!("bad score `{value}`")))?;
                scores.insert(id.to_string(), v).is_some()
            }
        };
        if dup {
            return Err(Error::parse(path, i + 1, format!("duplicate id `{id}`")));
        }
    }
    Ok(match task {
        Task::Classification => Predictions::Classes(classes),
        Task::Intensity => Predictions::Intensities(scores),
    })
}

/// Scores a predictions file against a gold dataset file.
pub fn evaluate_files(predictions: &Path, gold: &Path, task: Task, out_dir: &Path, name: &str) -> Result<EvalReport> {
    let text = read_to_string(gold)?;
    let kind = detect_kind(&text).ok_or_else(|| Error::parse(gold, 1, "cannot tell the label layout"))?;
    let gold = parse_dataset(&text, kind, gold)?;
    let report = evaluate_run(&read_predictions(predictions, task)?, &gold)?;
    write_report(out_dir, &format!("{name}.json"), &report)?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub config_hash: Option<String>,
    pub split: String,
    pub table: ComparisonTable,
}

struct ArmRun {
    seed: u64,
    cells: [Option<(PathBuf, EvalReport)>; 4],
}

fn gather_arm(dirs: &[PathBuf], split: &str, mtl: bool) -> Result<Vec<ArmRun>> {
    let mut by_seed: BTreeMap<u64, ArmRun> = BTreeMap::new();
    for dir in dirs {
        let info = load_run_info(dir)?;
        if (info.mode == TaskMode::Mtl) != mtl {
            return Err(Error::Invalid(format!(
                "{} is a {} run but was given as {}",
                dir.display(),
                info.mode,
                if mtl { "MTL" } else { "STL" }
            )));
        }
        let entry = by_seed.entry(info.seed).or_insert_with(|| ArmRun {
            seed: info.seed,
            cells: Default::default(),
        });
        for (i, (head, task)) in CELLS.iter().enumerate() {
            let active = match task {
                Task::Classification => info.mode.has_class(),
                Task::Intensity => info.mode.has_intensity(),
            };
            let path = dir.join(report_name(split, head, *task));
            if !active || !path.is_file() {
                continue;
            }
            if entry.cells[i].is_some() {
                return Err(Error::Invalid(format!(
                    "seed {} has two runs providing {head} {}",
                    info.seed,
                    task.short()
                )));
            }
            entry.cells[i] = Some((path.clone(), EvalReport::load(&path)?));
        }
    }
    Ok(by_seed.into_values().collect())
}

/// Builds the MTL versus STL table from run directories, pairing runs by
/// seed. Writes `comparison.json`, `comparison.tsv` and per-example
/// disagreement files for the first seed into `out`.
pub fn compare_dirs(mtl: &[PathBuf], stl: &[PathBuf], split: &str, force: bool, out: &Path) -> Result<Comparison> {
    let m = gather_arm(mtl, split, true)?;
    let s = gather_arm(stl, split, false)?;
    let mut hashes: Vec<String> = m
        .iter()
        .chain(&s)
        .flat_map(|r| r.cells.iter().flatten())
        .filter_map(|(_, rep)| rep.config_hash.clone())
        .collect();
    hashes.sort();
    hashes.dedup();
    if hashes.len() > 1 && !force {
        return Err(Error::Invalid(format!(
            "runs come from different configs {hashes:?} (use --force to compare anyway)"
        )));
    }
    let scores = |runs: &[ArmRun]| -> Vec<RunScores> {
        runs.iter()
            .map(|r| {
                let mut cells = [None; 4];
                for (c, cell) in cells.iter_mut().zip(&r.cells) {
                    *c = cell.as_ref().map(|(_, rep)| rep.pearson);
                }
                RunScores { seed: r.seed, cells }
            })
            .collect()
    };
    let table = compare_runs(&scores(&m), &scores(&s))?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    if let (Some(mr), Some(sr)) = (m.first(), s.iter().find(|r| Some(r.seed) == m.first().map(|x| x.seed))) {
        for (i, (head, task)) in CELLS.iter().enumerate() {
            if let (Some((_, a)), Some((_, b))) = (&mr.cells[i], &sr.cells[i]) {
                let rows = compare_examples(a, b)?;
                let mut text = String::from("id\tgold\tmtl\tstl\n");
                for r in rows {
                    text.push_str(&format!("{}\t{}\t{}\t{}\n", r.id, r.gold, r.mtl, r.stl));
                }
                write_file(&out.join(format!("examples_{head}_{}.tsv", task.short())), text)?;
            }
        }
    }
    let cmp = Comparison {
        config_hash: hashes.first().cloned(),
        split: split.to_string(),
        table,
    };
    write_json(&out.join("comparison.json"), &cmp)?;
    write_file(&out.join("comparison.tsv"), cmp.table.render())?;
    Ok(cmp)
}

/// Default run directory for a mode and seed.
pub fn run_dir(cfg: &RunConfig, mode: TaskMode, seed: u64) -> PathBuf {
    cfg.output_dir.join(format!("{}-seed{seed}", mode.name()))
}
