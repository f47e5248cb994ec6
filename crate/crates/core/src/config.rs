//! Run configuration files (TOML). Relative paths resolve against the
//! directory holding the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{join_labels, load_dataset, DatasetSplit, LabelKind};
use crate::error::{read_to_string, Error, Result};
use crate::features::LEXICON_SOURCE;
use crate::model::{ModelConfig, TaskMode};
use crate::normalize::NormalizeOptions;
use crate::shallow::ShallowConfig;

/// Label files for one split: a combined file, or one or both single-label
/// files.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitPaths {
    pub both: Option<PathBuf>,
    pub class: Option<PathBuf>,
    pub intensity: Option<PathBuf>,
}

impl SplitPaths {
    fn paths(&self) -> impl Iterator<Item = &PathBuf> {
        self.both.iter().chain(&self.class).chain(&self.intensity)
    }

    /// Loads the labels `mode` needs. With both single-label files present
    /// they are joined on id.
    pub fn load(&self, name: &str, mode: Option<TaskMode>) -> Result<DatasetSplit> {
        let mut split = if let Some(p) = &self.both {
            load_dataset(p, LabelKind::Both)?
        } else {
            let want_class = mode.is_none_or(TaskMode::has_class);
            let want_intensity = mode.is_none_or(TaskMode::has_intensity);
            match (&self.class, &self.intensity) {
                (Some(c), Some(i)) if want_class && want_intensity => join_labels(
                    &load_dataset(c, LabelKind::Classification)?,
                    &load_dataset(i, LabelKind::Intensity)?,
                )?,
                (Some(c), _) if want_class => load_dataset(c, LabelKind::Classification)?,
                (_, Some(i)) if want_intensity => load_dataset(i, LabelKind::Intensity)?,
                (Some(c), None) => load_dataset(c, LabelKind::Classification)?,
                (None, Some(i)) => load_dataset(i, LabelKind::Intensity)?,
                _ => return Err(Error::Config(vec![format!("split `{name}` has no files")])),
            }
        };
        split.name = name.to_string();
        Ok(split)
    }

    fn resolve(&mut self, base: &Path) {
        for p in [&mut self.both, &mut self.class, &mut self.intensity].into_iter().flatten() {
            *p = base.join(&*p);
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub train: SplitPaths,
    pub dev: SplitPaths,
    pub test: Option<SplitPaths>,
}

impl DataPaths {
    /// `(name, paths)` for every configured split.
    pub fn splits(&self) -> Vec<(&'static str, &SplitPaths)> {
        let mut v = vec![("train", &self.train), ("dev", &self.dev)];
        if let Some(t) = &self.test {
            v.push(("test", t));
        }
        v
    }

    pub fn get(&self, name: &str) -> Option<&SplitPaths> {
        self.splits().into_iter().find(|(n, _)| *n == name).map(|(_, p)| p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResourcePaths {
    /// `word<TAB>count` unigram counts for segmentation and spelling.
    pub freq_lexicon: Option<PathBuf>,
    /// `emoji<TAB>words` replacements applied during normalisation.
    pub emoji_lexicon: Option<PathBuf>,
    pub glove: Option<PathBuf>,
    pub glove_dim: usize,
    pub emoji_vectors: Option<PathBuf>,
    pub char_vectors: Option<PathBuf>,
}

impl Default for ResourcePaths {
    fn default() -> Self {
        Self {
            freq_lexicon: None,
            emoji_lexicon: None,
            glove: None,
            glove_dim: 200,
            emoji_vectors: None,
            char_vectors: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSource {
    pub path: PathBuf,
    pub dim: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureFiles {
    /// Scored lexicons, in block order.
    pub lexicons: Vec<PathBuf>,
    /// A SentiWordNet release, appended after `lexicons`.
    pub sentiwordnet: Option<PathBuf>,
    /// Precomputed per-tweet vectors by source name.
    pub external: BTreeMap<String, ExternalSource>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub data: DataPaths,
    pub resources: ResourcePaths,
    pub feature_files: FeatureFiles,
    pub normalize: NormalizeOptions,
    pub model: ModelConfig,
    pub shallow: ShallowConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("runs"),
            seeds: vec![1, 2, 3, 4, 5],
            data: DataPaths::default(),
            resources: ResourcePaths::default(),
            feature_files: FeatureFiles::default(),
            normalize: NormalizeOptions::default(),
            model: ModelConfig::default(),
            shallow: ShallowConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(vec![e.to_string()]))?;
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&read_to_string(path)?, base)
    }

    fn resolve(&mut self, base: &Path) {
        self.output_dir = base.join(&self.output_dir);
        self.data.train.resolve(base);
        self.data.dev.resolve(base);
        if let Some(t) = &mut self.data.test {
            t.resolve(base);
        }
        let r = &mut self.resources;
        for p in [
            &mut r.freq_lexicon,
            &mut r.emoji_lexicon,
            &mut r.glove,
            &mut r.emoji_vectors,
            &mut r.char_vectors,
        ]
        .into_iter()
        .flatten()
        {
            *p = base.join(&*p);
        }
        let f = &mut self.feature_files;
        for p in f.lexicons.iter_mut().chain(f.sentiwordnet.as_mut()) {
            *p = base.join(&*p);
        }
        for s in f.external.values_mut() {
            s.path = base.join(&s.path);
        }
    }

    /// Every problem found, without touching data contents.
    pub fn problems(&self) -> Vec<String> {
        let mut p = self.model.problems();
        p.extend(self.shallow.problems());
        for (name, split) in self.data.splits() {
            let mut any = false;
            for path in split.paths() {
                any = true;
                need(&mut p, &format!("data.{name}"), path);
            }
            if !any {
                p.push(format!("data.{name}: no label files given"));
            }
        }
        let r = &self.resources;
        match &r.glove {
            Some(g) => need(&mut p, "resources.glove", g),
            None => p.push("resources.glove: missing".into()),
        }
        for (label, path) in [
            ("resources.freq_lexicon", &r.freq_lexicon),
            ("resources.emoji_lexicon", &r.emoji_lexicon),
            ("resources.emoji_vectors", &r.emoji_vectors),
            ("resources.char_vectors", &r.char_vectors),
        ] {
            if let Some(path) = path {
                need(&mut p, label, path);
            }
        }
        for path in &self.feature_files.lexicons {
            need(&mut p, "feature_files.lexicons", path);
        }
        if let Some(path) = &self.feature_files.sentiwordnet {
            need(&mut p, "feature_files.sentiwordnet", path);
        }
        for (name, s) in &self.feature_files.external {
            need(&mut p, &format!("feature_files.external.{name}"), &s.path);
            if s.dim == 0 {
                p.push(format!("feature_files.external.{name}: dim must be positive"));
            }
        }
        if r.glove_dim == 0 || r.glove_dim > self.model.embed_dim {
            p.push(format!(
                "resources.glove_dim {} must be in 1..={}",
                r.glove_dim, self.model.embed_dim
            ));
        }
        let has_lexicons = !self.feature_files.lexicons.is_empty() || self.feature_files.sentiwordnet.is_some();
        for src in &self.model.features.sources {
            if src == LEXICON_SOURCE {
                if !has_lexicons {
                    p.push("model.features.sources lists `lexicons` but no lexicon files are given".into());
                }
            } else if !self.feature_files.external.contains_key(src) {
                p.push(format!("model.features.sources: unknown source `{src}`"));
            }
        }
        if self.seeds.is_empty() {
            p.push("seeds is empty".into());
        }
        if let Err(e) = std::fs::create_dir_all(&self.output_dir) {
            p.push(format!("output_dir {}: {e}", self.output_dir.display()));
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

    /// Hex SHA-256 of the settings that must match for runs to be
    /// comparable. Seeds, task mode and file locations are left out.
    pub fn hash(&self) -> String {
        let mut model = self.model.clone();
        model.seed = 0;
        model.task_mode = TaskMode::Mtl;
        let canonical = serde_json::json!({
            "model": model,
            "shallow": self.shallow,
            "normalize": self.normalize,
            "glove_dim": self.resources.glove_dim,
        });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        hex::encode(&digest[..12])
    }

    /// Model settings for one run.
    pub fn model_for(&self, mode: TaskMode, seed: u64) -> ModelConfig {
        ModelConfig {
            task_mode: mode,
            seed,
            ..self.model.clone()
        }
    }
}

fn need(problems: &mut Vec<String>, label: &str, path: &Path) {
    if !path.is_file() {
        problems.push(format!("{label}: {} does not exist", path.display()));
    }
}
