//! Word vectors composed from a GloVe-style table, an emoji table and a
//! character table, and fixed-length tweet matrices built from them.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{read_to_string, Error, Result};

/// Token to vector map with a fixed dimension. Vectors are stored
/// contiguously.
#[derive(Clone, Debug, Default)]
pub struct EmbeddingTable {
    pub name: String,
    dim: usize,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(name: impl Into<String>, dim: usize) -> Self {
        Self {
            name: name.into(),
            dim,
            ..Default::default()
        }
    }

    /// Adds a vector; returns `false` (and keeps the old one) for a token
    /// already present.
    pub fn insert(&mut self, token: &str, vector: &[f64]) -> Result<bool> {
        if vector.len() != self.dim {
            return Err(Error::Width {
                context: format!("embedding `{token}` in {}", self.name),
                expected: self.dim,
                found: vector.len(),
            });
        }
        if self.index.contains_key(token) {
            return Ok(false);
        }
        self.index.insert(token.to_string(), self.data.len() / self.dim.max(1));
        self.data.extend_from_slice(vector);
        Ok(true)
    }

    /// Reads lines of `token f1 ... f_dim` separated by single spaces. The
    /// token is everything before the last `dim` fields, so character
    /// tables may key on a space. Duplicate tokens keep their first vector.
    pub fn load(path: &Path, expected_dim: usize) -> Result<Self> {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut table = Self::new(name, expected_dim);
        let text = read_to_string(path)?;
        let mut values = Vec::with_capacity(expected_dim);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches(['\r', '\n']);
            let line = line.strip_suffix(' ').unwrap_or(line);
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.rsplitn(expected_dim + 1, ' ').collect();
            if fields.len() != expected_dim + 1 {
                return Err(Error::parse(
                    path,
                    i + 1,
                    format!("expected a token and {expected_dim} values, found {} fields", fields.len()),
                ));
            }
            values.clear();
            for f in fields[..expected_dim].iter().rev() {
                values.push(
                    f.parse::<f64>()
                        .map_err(|_| Error::parse(path, i + 1, format!("bad value `{f}`")))?,
                );
            }
            let token = fields[expected_dim];
            if token.is_empty() {
                return Err(Error::parse(path, i + 1, "empty token"));
            }
            table.insert(token, &values)?;
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }
}

/// Which table produced a word vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VectorSource {
    Glove,
    Emoji,
    Characters,
}

/// Composes word vectors with the lookup order GloVe, then emoji, then the
/// mean of character vectors. GloVe vectors are zero-padded at the end up
/// to the output dimension.
#[derive(Clone, Debug)]
pub struct WordComposer {
    glove: EmbeddingTable,
    emoji: EmbeddingTable,
    chars: EmbeddingTable,
    dim: usize,
}

impl WordComposer {
    pub fn new(glove: EmbeddingTable, emoji: Option<EmbeddingTable>, chars: Option<EmbeddingTable>, dim: usize) -> Result<Self> {
        let emoji = emoji.unwrap_or_else(|| EmbeddingTable::new("emoji", dim));
        let chars = chars.unwrap_or_else(|| EmbeddingTable::new("chars", dim));
        if glove.dim() > dim {
            return Err(Error::Width {
                context: format!("word table `{}` is wider than the output", glove.name),
                expected: dim,
                found: glove.dim(),
            });
        }
        for t in [&emoji, &chars] {
            if t.dim() != dim {
                return Err(Error::Width {
                    context: format!("table `{}`", t.name),
                    expected: dim,
                    found: t.dim(),
                });
            }
        }
        Ok(Self {
            glove,
            emoji,
            chars,
            dim,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn compose_with_source(&self, word: &str) -> (Vec<f64>, VectorSource) {
        if let Some(v) = self.glove.get(word) {
            let mut out = v.to_vec();
            out.resize(self.dim, 0.0);
            return (out, VectorSource::Glove);
        }
        if let Some(v) = self.emoji.get(word) {
            return (v.to_vec(), VectorSource::Emoji);
        }
        let mut out = vec![0.0; self.dim];
        let mut n = 0usize;
        let mut buf = [0u8; 4];
        for c in word.chars() {
            n += 1;
            if let Some(v) = self.chars.get(c.encode_utf8(&mut buf)) {
                out.iter_mut().zip(v).for_each(|(o, x)| *o += x);
            }
        }
        if n > 0 {
            out.iter_mut().for_each(|o| *o /= n as f64);
        }
        (out, VectorSource::Characters)
    }

    pub fn compose(&self, word: &str) -> Vec<f64> {
        self.compose_with_source(word).0
    }

    /// First `max_len` tokens, composed and zero-padded.
    pub fn encode(&self, tokens: &[String], max_len: usize) -> TweetMatrix {
        let length = tokens.len().min(max_len);
        let mut values = vec![0.0; max_len * self.dim];
        for (i, tok) in tokens.iter().take(length).enumerate() {
            values[i * self.dim..(i + 1) * self.dim].copy_from_slice(&self.compose(tok));
        }
        TweetMatrix {
            values,
            dim: self.dim,
            max_len,
            length,
        }
    }
}

/// `[max_len x dim]` row-major word vectors; rows at and after `length`
/// are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct TweetMatrix {
    pub values: Vec<f64>,
    pub dim: usize,
    pub max_len: usize,
    pub length: usize,
}

impl TweetMatrix {
    pub fn mask(&self) -> Vec<bool> {
        (0..self.max_len).map(|i| i < self.length).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(name: &str, dim: usize, rows: &[(&str, Vec<f64>)]) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(name, dim);
        for (k, v) in rows {
            t.insert(k, v).unwrap();
        }
        t
    }

    #[test]
    fn padding_and_truncation() {
        let glove = table("g", 2, &[("a", vec![1.0, 2.0])]);
        let c = WordComposer::new(glove, None, None, 3).unwrap();
        let m = c.encode(&vec!["a".to_string(); 3], 50);
        assert_eq!(m.length, 3);
        assert_eq!(m.row(0), &[1.0, 2.0, 0.0]);
        assert!(m.values[3 * 3..].iter().all(|&v| v == 0.0));
        assert_eq!(m.mask().iter().filter(|&&b| b).count(), 3);

        let long: Vec<String> = (0..60).map(|i| if i < 50 { "a" } else { "zz" }.to_string()).collect();
        let m = c.encode(&long, 50);
        assert_eq!(m.length, 50);
        assert!(m.values.chunks(3).all(|r| r == [1.0, 2.0, 0.0]));

        let empty = c.encode(&[], 50);
        assert_eq!(empty.length, 0);
        assert!(empty.values.iter().all(|&v| v == 0.0));
        assert!(empty.mask().iter().all(|&b| !b));
    }

    #[test]
    fn rejects_mismatched_tables() {
        let glove = table("g", 4, &[]);
        assert!(WordComposer::new(glove, None, None, 3).is_err());
        let glove = table("g", 2, &[]);
        assert!(WordComposer::new(glove, Some(EmbeddingTable::new("e", 2)), None, 3).is_err());
    }

    #[test]
    fn unknown_characters_count_in_mean() {
        let chars = table("c", 2, &[("a", vec![2.0, 4.0])]);
        let c = WordComposer::new(EmbeddingTable::new("g", 1), None, Some(chars), 2).unwrap();
        assert_eq!(c.compose("ab"), vec![1.0, 2.0]);
        assert_eq!(c.compose("zz"), vec![0.0, 0.0]);
    }

    #[test]
    fn insert_rejects_wrong_width() {
        let mut t = EmbeddingTable::new("t", 3);
        assert!(t.insert("x", &[1.0]).is_err());
        assert!(t.insert("x", &[1.0, 2.0, 3.0]).unwrap());
        assert!(!t.insert("x", &[0.0, 0.0, 0.0]).unwrap());
        assert_eq!(t.get("x").unwrap(), &[1.0, 2.0, 3.0]);
    }
}
