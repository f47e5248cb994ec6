//! Synthetic corpora whose valence class and intensity both derive from one
//! latent score, for testing the training pipeline without real data.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::corpus::{write_dataset, DatasetSplit, LabelKind, LabeledTweet, ValenceClass};
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    pub examples: usize,
    /// Number of graded sentiment words, evenly spaced on `[-1, 1]`.
    pub sentiment_words: usize,
    pub filler_words: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability that a token is a sentiment word.
    pub sentiment_rate: f64,
    /// Standard deviation of the latent score seen by each sentiment token.
    pub token_noise: f64,
    pub intensity_noise: f64,
    pub embed_dim: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            examples: 800,
            sentiment_words: 21,
            filler_words: 20,
            min_len: 4,
            max_len: 12,
            sentiment_rate: 0.6,
            token_noise: 0.25,
            intensity_noise: 0.03,
            embed_dim: 16,
            seed: 7,
        }
    }
}

/// Lowercase alphabetic name for `i` with a fixed prefix.
fn word(prefix: char, i: usize) -> String {
    let mut s = String::from(prefix);
    let mut i = i;
    loop {
        s.push((b'a' + (i % 26) as u8) as char);
        i /= 26;
        if i == 0 {
            break;
        }
    }
    s.push('x');
    s
}

#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    /// All examples, labelled with both class and intensity.
    pub data: DatasetSplit,
    pub latent: Vec<f64>,
    pub sentiment_vocab: Vec<(String, f64)>,
    pub filler_vocab: Vec<String>,
    pub embeddings: EmbeddingTable,
}

impl SyntheticCorpus {
    /// Class is the latent score times 3, rounded; intensity is
    /// `0.5 + 0.45 * latent` plus noise, clipped to `[0, 1]`.
    pub fn generate(spec: &SyntheticSpec) -> Result<Self> {
        if spec.sentiment_words < 2 || spec.min_len == 0 || spec.min_len > spec.max_len {
            return Err(Error::Invalid("degenerate synthetic corpus spec".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let k = spec.sentiment_words;
        let sentiment_vocab: Vec<(String, f64)> = (0..k)
            .map(|i| (word('s', i), -1.0 + 2.0 * i as f64 / (k - 1) as f64))
            .collect();
        let filler_vocab: Vec<String> = (0..spec.filler_words).map(|i| word('f', i)).collect();

        let mut embeddings = EmbeddingTable::new("synthetic", spec.embed_dim);
        let random_vec = |rng: &mut ChaCha8Rng, first: f64| -> Vec<f64> {
            let mut v: Vec<f64> = (0..spec.embed_dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(rng);
                    0.5 * z
                })
                .collect();
            v[0] = first;
            v
        };
        for (w, value) in &sentiment_vocab {
            let v = random_vec(&mut rng, *value);
            embeddings.insert(w, &v)?;
        }
        for w in &filler_vocab {
            let v = random_vec(&mut rng, 0.0);
            embeddings.insert(w, &v)?;
        }

        let token_noise = Normal::new(0.0, spec.token_noise.max(1e-12)).expect("finite");
        let intensity_noise = Normal::new(0.0, spec.intensity_noise.max(1e-12)).expect("finite");
        let mut examples = Vec::with_capacity(spec.examples);
        let mut latent = Vec::with_capacity(spec.examples);
        for i in 0..spec.examples {
            let s: f64 = rng.random_range(-1.0..=1.0);
            let len = rng.random_range(spec.min_len..=spec.max_len);
            let mut tokens = Vec::with_capacity(len);
            for _ in 0..len {
                if filler_vocab.is_empty() || rng.random::<f64>() < spec.sentiment_rate {
                    let seen = (s + token_noise.sample(&mut rng)).clamp(-1.0, 1.0);
                    let bucket = ((seen + 1.0) / 2.0 * (k - 1) as f64).round() as usize;
                    tokens.push(sentiment_vocab[bucket].0.clone());
                } else {
                    tokens.push(filler_vocab[rng.random_range(0..filler_vocab.len())].clone());
                }
            }
            let ordinal = (3.0 * s).round().clamp(-3.0, 3.0) as i32;
            let intensity = (0.5 + 0.45 * s + intensity_noise.sample(&mut rng)).clamp(0.0, 1.0);
            examples.push(LabeledTweet {
                id: format!("syn-{i:05}"),
                text: tokens.join(" "),
                valence: ValenceClass::from_ordinal(ordinal),
                intensity: Some(intensity),
            });
            latent.push(s);
        }
        Ok(Self {
            data: DatasetSplit {
                name: "synthetic".into(),
                examples,
            },
            latent,
            sentiment_vocab,
            filler_vocab,
            embeddings,
        })
    }

    /// Consecutive slices of the examples with the given sizes.
    pub fn split(&self, sizes: &[usize]) -> Result<Vec<DatasetSplit>> {
        if sizes.iter().sum::<usize>() > self.data.len() {
            return Err(Error::Invalid("split sizes exceed corpus size".into()));
        }
        let mut out = Vec::new();
        let mut start = 0;
        for (i, &n) in sizes.iter().enumerate() {
            out.push(DatasetSplit {
                name: format!("part{i}"),
                examples: self.data.examples[start..start + n].to_vec(),
            });
            start += n;
        }
        Ok(out)
    }

    /// Writes `train.tsv`, `dev.tsv`, `test.tsv` (both label columns),
    /// `embeddings.txt` and `freq.tsv` into `dir`.
    pub fn write_files(&self, dir: &Path, sizes: [usize; 3]) -> Result<SyntheticFiles> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let parts = self.split(&sizes)?;
        let names = ["train", "dev", "test"];
        let mut split_paths = Vec::new();
        for (part, name) in parts.iter().zip(names) {
            let path = dir.join(format!("{name}.tsv"));
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_dataset(part, LabelKind::Both, std::io::BufWriter::new(file))?;
            split_paths.push(path);
        }
        let emb = dir.join("embeddings.txt");
        let mut text = String::new();
        let words = self
            .sentiment_vocab
            .iter()
            .map(|(w, _)| w)
            .chain(&self.filler_vocab);
        for w in words.clone() {
            let v = self.embeddings.get(w).expect("vocabulary word");
            text.push_str(w);
            for x in v {
                text.push(' ');
                text.push_str(&format!("{x:?}"));
            }
            text.push('\n');
        }
        std::fs::write(&emb, text).map_err(|e| Error::io(&emb, e))?;
        let freq = dir.join("freq.tsv");
        let text: String = words.map(|w| format!("{w}\t100\n")).collect();
        std::fs::write(&freq, text).map_err(|e| Error::io(&freq, e))?;
        Ok(SyntheticFiles {
            train: split_paths[0].clone(),
            dev: split_paths[1].clone(),
            test: split_paths[2].clone(),
            embeddings: emb,
            freq,
        })
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticFiles {
    pub train: PathBuf,
    pub dev: PathBuf,
    pub test: PathBuf,
    pub embeddings: PathBuf,
    pub freq: PathBuf,
}
