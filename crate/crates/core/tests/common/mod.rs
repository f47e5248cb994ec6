#![allow(dead_code)]

use std::path::{Path, PathBuf};

use affect_mtl::embed::WordComposer;
use affect_mtl::model::{EncodedExample, ModelConfig, TaskMode};
use affect_mtl::normalize::{EmojiLexicon, FrequencyLexicon, NormalizeOptions, Normalizer};
use affect_mtl::synthetic::{SyntheticCorpus, SyntheticSpec};

pub fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn freq() -> FrequencyLexicon {
    FrequencyLexicon::load(&data("words.tsv")).unwrap()
}

pub fn emoji() -> EmojiLexicon {
    EmojiLexicon::load(&data("emoji.tsv")).unwrap()
}

pub fn normalizer() -> Normalizer {
    Normalizer::new(freq(), emoji(), NormalizeOptions::default())
}

/// `(raw, expected tokens joined by spaces)` rows of the golden file.
pub fn goldens() -> Vec<(String, String)> {
    std::fs::read_to_string(data("normalize_golden.tsv"))
        .unwrap()
        .lines()
        .filter(|l| !l.is_empty())
        .map(|l| {
            let (a, b) = l.split_once('\t').unwrap();
            (a.to_string(), b.to_string())
        })
        .collect()
}

pub const TINY_DIM: usize = 16;
pub const TINY_LEN: usize = 20;

pub fn tiny_config(mode: TaskMode, seed: u64) -> ModelConfig {
    ModelConfig {
        max_len: TINY_LEN,
        embed_dim: TINY_DIM,
        gru_hidden: 16,
        filter_widths: vec![2, 3],
        filters_per_width: 8,
        dropout: 0.0,
        lr: 1e-3,
        batch_size: 32,
        max_epochs: 30,
        patience: 30,
        task_mode: mode,
        seed,
        ..ModelConfig::default()
    }
}

pub fn corpus(examples: usize, seed: u64) -> SyntheticCorpus {
    SyntheticCorpus::generate(&SyntheticSpec {
        examples,
        embed_dim: TINY_DIM,
        seed,
        ..SyntheticSpec::default()
    })
    .unwrap()
}

/// Synthetic tweets embedded directly (their text is already tokenised).
pub fn encode(corpus: &SyntheticCorpus, features: usize) -> Vec<EncodedExample> {
    let comp = WordComposer::new(corpus.embeddings.clone(), None, None, TINY_DIM).unwrap();
    corpus
        .data
        .examples
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let toks: Vec<String> = t.text.split(' ').map(String::from).collect();
            EncodedExample {
                id: t.id.clone(),
                matrix: comp.encode(&toks, TINY_LEN),
                features: (0..features).map(|k| ((i * 7 + k) % 5) as f64 * 0.1).collect(),
                class: t.valence,
                intensity: t.intensity,
            }
        })
        .collect()
}

/// Writes synthetic data files plus a run config using them into `dir`.
pub fn synthetic_config(dir: &Path, corpus: &SyntheticCorpus, sizes: [usize; 3], extra: &str) -> PathBuf {
    corpus.write_files(dir, sizes).unwrap();
    let text = format!(
        r#"output_dir = "runs"
seeds = [1, 2]

[data.train]
both = "train.tsv"
[data.dev]
both = "dev.tsv"
[data.test]
both = "test.tsv"

[resources]
freq_lexicon = "freq.tsv"
glove = "embeddings.txt"
glove_dim = {TINY_DIM}

[model]
max_len = {TINY_LEN}
embed_dim = {TINY_DIM}
gru_hidden = 8
filter_widths = [2, 3]
filters_per_width = 4
dropout = 0.2
batch_size = 32
max_epochs = 4
patience = 4

[shallow]
epochs = 10
{extra}
"#
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}
