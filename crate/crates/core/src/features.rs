//! Hand-crafted per-tweet features: lexicon aggregates computed from tokens
//! and precomputed vectors read from files, concatenated in a fixed order.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};
use crate::normalize::NormalizedTweet;

/// Name of the source that expands to the concatenated lexicon blocks.
pub const LEXICON_SOURCE: &str = "lexicons";

/// Known widths of precomputed transfer features.
pub const DEEPMOJI_SOFTMAX_DIM: usize = 64;
pub const DEEPMOJI_ATTENTION_DIM: usize = 2304;
pub const SKIP_THOUGHT_DIM: usize = 4800;
pub const SENTIMENT_NEURON_DIM: usize = 4096;

/// Word to score vector map; every entry has `k` scores.
#[derive(Clone, Debug)]
pub struct ScoredLexicon {
    pub name: String,
    k: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl ScoredLexicon {
    pub fn new(name: impl Into<String>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Invalid("lexicon arity must be at least 1".into()));
        }
        Ok(Self {
            name: name.into(),
            k,
            entries: HashMap::new(),
        })
    }

    /// Words are lowercased. A repeated word replaces the earlier scores.
    pub fn insert(&mut self, word: &str, scores: Vec<f64>) -> Result<()> {
        if scores.len() != self.k {
            return Err(Error::Width {
                context: format!("lexicon `{}` entry `{word}`", self.name),
                expected: self.k,
                found: scores.len(),
            });
        }
        self.entries.insert(word.to_lowercase(), scores);
        Ok(())
    }

    pub fn arity(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    /// Block width: one sum per score column plus the match count.
    pub fn block_width(&self) -> usize {
        self.k + 1
    }

    /// Reads a file whose first line is `#lexicon<TAB>name<TAB>k`, followed
    /// by `word<TAB>s1<TAB>...<TAB>sk` rows.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let (name, k) = loop {
            match lines.next() {
                None => return Err(Error::parse(path, 1, "missing `#lexicon` header")),
                Some((_, l)) if l.trim().is_empty() => continue,
                Some((i, l)) => {
                    let f: Vec<&str> = l.trim_end_matches('\r').split('\t').collect();
                    if f.len() != 3 || f[0] != "#lexicon" {
                        return Err(Error::parse(path, i + 1, "expected `#lexicon<TAB>name<TAB>k`"));
                    }
                    let k = f[2]
                        .trim()
                        .parse::<usize>()
                        .map_err(|_| Error::parse(path, i + 1, format!("bad arity `{}`", f[2])))?;
                    break (f[1].to_string(), k);
                }
            }
        };
        let mut lex = Self::new(name, k)?;
        for (i, raw) in lines {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != k + 1 {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected word and {k} scores, found {} fields", f.len()),
                ));
            }
            let scores = f[1..]
                .iter()
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::parse(path, i + 1, format!("bad score `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            lex.insert(f[0], scores)?;
        }
        Ok(lex)
    }

    /// Builds a three-column (positivity, negativity, objectivity) lexicon
    /// from a SentiWordNet release. Each word's scores are the mean over the
    /// synsets listing it; objectivity is `1 - pos - neg`.
    pub fn from_sentiwordnet(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let mut acc: HashMap<String, ([f64; 3], usize)> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() < 5 {
                return Err(Error::parse(path, i + 1, "expected at least 5 tab-separated fields"));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, i + 1, format!("bad score `{s}`")))
            };
            let (pos, neg) = (num(f[2])?, num(f[3])?);
            let mut seen = Vec::new();
            for term in f[4].split_whitespace() {
                let word = term.split('#').next().unwrap_or(term).replace('_', " ").to_lowercase();
                if word.is_empty() || seen.contains(&word) {
                    continue;
                }
                let e = acc.entry(word.clone()).or_insert(([0.0; 3], 0));
                e.0[0] += pos;
                e.0[1] += neg;
                e.0[2] += 1.0 - pos - neg;
                e.1 += 1;
                seen.push(word);
            }
        }
        let mut lex = Self::new("sentiwordnet", 3)?;
        for (w, (s, n)) in acc {
            let n = n as f64;
            lex.insert(&w, s.iter().map(|v| v / n).collect())?;
        }
        Ok(lex)
    }
}

/// Per lexicon, the column sums over matched tokens followed by the match
/// count, concatenated in lexicon order.
pub fn lexicon_features(tokens: &[String], lexicons: &[ScoredLexicon]) -> Vec<f64> {
    let width = lexicons.iter().map(ScoredLexicon::block_width).sum();
    let mut out = vec![0.0; width];
    let mut offset = 0;
    for lex in lexicons {
        let block = &mut out[offset..offset + lex.block_width()];
        for tok in tokens {
            if let Some(scores) = lex.get(tok) {
                block[..lex.k].iter_mut().zip(scores).for_each(|(b, s)| *b += s);
                block[lex.k] += 1.0;
            }
        }
        offset += lex.block_width();
    }
    out
}

/// Precomputed per-tweet vectors of one width.
#[derive(Clone, Debug)]
pub struct ExternalFeatureSet {
    pub name: String,
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl ExternalFeatureSet {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Self {
            name: name.into(),
            dim,
            vectors: HashMap::new(),
        }
    }

    pub fn insert(&mut self, id: &str, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Width {
                context: format!("feature set `{}` row `{id}`", self.name),
                expected: self.dim,
                found: vector.len(),
            });
        }
        if self.vectors.contains_key(id) {
            return Err(Error::Invalid(format!("feature set `{}`: duplicate id `{id}`", self.name)));
        }
        self.vectors.insert(id.to_string(), vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.vectors.get(id).map(Vec::as_slice)
    }

    /// Reads a file whose first line is `#features<TAB>name<TAB>dim`,
    /// followed by `id<TAB>f1 f2 ... f_dim` rows.
    pub fn load(path: &Path, expected_dim: usize) -> Result<Self> {
        let text = read_to_string(path)?;
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hl, header) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 1, "missing `#features` header"))?;
        let h: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
        if h.len() != 3 || h[0] != "#features" {
            return Err(Error::parse(path, hl + 1, "expected `#features<TAB>name<TAB>dim`"));
        }
        let declared = h[2]
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::parse(path, hl + 1, format!("bad dimension `{}`", h[2])))?;
        if declared != expected_dim {
            return Err(Error::Width {
                context: format!("{} header", path.display()),
                expected: expected_dim,
                found: declared,
            });
        }
        let mut set = Self::new(h[1], expected_dim);
        for (i, raw) in lines {
            let line = raw.trim_end_matches('\r');
            let (id, rest) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected `id<TAB>values`"))?;
            let values = rest
                .split_whitespace()
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::parse(path, i + 1, format!("bad value `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if values.len() != expected_dim {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected {expected_dim} values, found {}", values.len()),
                ));
            }
            set.insert(id.trim(), values)
                .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        }
        Ok(set)
    }
}

/// One entry of a feature layout.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub source: String,
    pub offset: usize,
    pub width: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub entries: Vec<LayoutEntry>,
}

impl FeatureLayout {
    pub fn width(&self) -> usize {
        self.entries.last().map_or(0, |e| e.offset + e.width)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HandcraftedVector {
    pub values: Vec<f64>,
}

pub enum FeatureSource {
    Lexicons(Vec<ScoredLexicon>),
    External(ExternalFeatureSet),
}

impl FeatureSource {
    fn width(&self) -> usize {
        match self {
            FeatureSource::Lexicons(l) => l.iter().map(ScoredLexicon::block_width).sum(),
            FeatureSource::External(s) => s.dim(),
        }
    }
}

/// Concatenates sources in configuration order.
pub struct FeatureAssembler {
    sources: Vec<(String, FeatureSource)>,
    layout: FeatureLayout,
    pub allow_missing: bool,
}

impl FeatureAssembler {
    pub fn new(sources: Vec<(String, FeatureSource)>, allow_missing: bool) -> Result<Self> {
        if sources.is_empty() {
            return Err(Error::Config(vec!["feature source list is empty".into()]));
        }
        let mut entries = Vec::with_capacity(sources.len());
        let mut offset = 0;
        for (name, src) in &sources {
            if entries.iter().any(|e: &LayoutEntry| &e.source == name) {
                return Err(Error::Config(vec![format!("feature source `{name}` listed twice")]));
            }
            if let FeatureSource::Lexicons(l) = src {
                if l.is_empty() {
                    return Err(Error::Config(vec![format!("source `{name}` has no lexicons")]));
                }
            }
            let width = src.width();
            entries.push(LayoutEntry {
                source: name.clone(),
                offset,
                width,
            });
            offset += width;
        }
        Ok(Self {
            sources,
            layout: FeatureLayout { entries },
            allow_missing,
        })
    }

    pub fn layout(&self) -> &FeatureLayout {
        &self.layout
    }

    pub fn width(&self) -> usize {
        self.layout.width()
    }

    pub fn assemble(&self, id: &str, tokens: &[String]) -> Result<HandcraftedVector> {
        let mut values = Vec::with_capacity(self.width());
        for (name, src) in &self.sources {
            match src {
                FeatureSource::Lexicons(l) => values.extend(lexicon_features(tokens, l)),
                FeatureSource::External(set) => match set.get(id) {
                    Some(v) => values.extend_from_slice(v),
                    None if self.allow_missing => {
                        log::warn!("no `{name}` features for tweet `{id}`; using zeros");
                        values.extend(std::iter::repeat_n(0.0, set.dim()));
                    }
                    None => {
                        return Err(Error::MissingFeature {
                            source_name: name.clone(),
                            id: id.to_string(),
                        })
                    }
                },
            }
        }
        Ok(HandcraftedVector { values })
    }

    pub fn assemble_tweet(&self, tweet: &NormalizedTweet) -> Result<HandcraftedVector> {
        self.assemble(&tweet.original_id, &tweet.tokens)
    }
}
