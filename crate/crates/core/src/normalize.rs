//! Tweet normalisation: lowercasing, entity masking, emoji replacement,
//! hashtag segmentation, tokenisation, punctuation filtering and spelling
//! correction, applied in that order.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Mutex, OnceLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledTweet;
use crate::error::{read_to_string, Error, Result};

/// Unigram counts used for segmentation and spelling correction.
#[derive(Clone, Debug, Default)]
pub struct FrequencyLexicon {
    counts: HashMap<String, u64>,
    total: u64,
    by_len: HashMap<usize, Vec<String>>,
}

impl FrequencyLexicon {
    /// Builds a lexicon; words are lowercased and repeated words summed.
    pub fn from_counts<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, u64)>,
        S: AsRef<str>,
    {
        let mut counts: HashMap<String, u64> = HashMap::new();
        for (w, c) in entries {
            let w = w.as_ref().trim().to_lowercase();
            if w.is_empty() || c == 0 {
                return Err(Error::Invalid(format!("bad lexicon entry `{w}` with count {c}")));
            }
            *counts.entry(w).or_default() += c;
        }
        let total = counts.values().sum();
        let mut by_len: HashMap<usize, Vec<String>> = HashMap::new();
        for w in counts.keys() {
            by_len.entry(w.chars().count()).or_default().push(w.clone());
        }
        by_len.values_mut().for_each(|v| v.sort());
        Ok(Self {
            counts,
            total,
            by_len,
        })
    }

    /// Reads `word<TAB>count` lines.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (w, c) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected word<TAB>count"))?;
            let c: u64 = c
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad count `{c}`")))?;
            if c == 0 {
                return Err(Error::parse(path, i + 1, "counts must be positive"));
            }
            entries.push((w.to_string(), c));
        }
        Self::from_counts(entries)
    }

    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.counts.contains_key(word)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Natural log of `count/total`; unknown words get
    /// `1 / (total * 10^len)`.
    pub fn log_prob(&self, word: &str) -> f64 {
        let total = (self.total.max(1)) as f64;
        match self.counts.get(word) {
            Some(&c) => (c as f64).ln() - total.ln(),
            None => -total.ln() - word.chars().count() as f64 * std::f64::consts::LN_10,
        }
    }

    fn words_with_len(&self, len: usize) -> &[String] {
        self.by_len.get(&len).map_or(&[], Vec::as_slice)
    }
}

/// Emoji (or emoji sequence) to replacement words.
#[derive(Clone, Debug, Default)]
pub struct EmojiLexicon {
    map: HashMap<String, Vec<String>>,
    max_chars: usize,
}

impl EmojiLexicon {
    pub fn from_entries<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<String>)>,
    {
        let mut map = HashMap::new();
        for (emoji, words) in entries {
            let words: Vec<String> = words
                .into_iter()
                .map(|w| w.to_lowercase())
                .filter(|w| !w.is_empty())
                .collect();
            if emoji.is_empty() || words.is_empty() {
                return Err(Error::Invalid(format!("emoji entry `{emoji}` needs a replacement")));
            }
            map.insert(emoji, words);
        }
        let max_chars = map.keys().map(|k| k.chars().count()).max().unwrap_or(0);
        Ok(Self { map, max_chars })
    }

    /// Reads `emoji<TAB>space separated words` lines.
    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() {
                continue;
            }
            let (e, words) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(path, i + 1, "expected emoji<TAB>words"))?;
            let words: Vec<String> = words.split_whitespace().map(String::from).collect();
            if words.is_empty() {
                return Err(Error::parse(path, i + 1, "empty replacement"));
            }
            entries.push((e.to_string(), words));
        }
        Self::from_entries(entries)
    }

    pub fn get(&self, emoji: &str) -> Option<&[String]> {
        self.map.get(emoji).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

/// Per-stage switches. Every stage is on by default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizeOptions {
    pub lowercase: bool,
    pub mask_entities: bool,
    pub replace_emoji: bool,
    pub segment_hashtags: bool,
    pub tokenize: bool,
    pub filter_punctuation: bool,
    pub correct_spelling: bool,
    pub collapse_whitespace: bool,
    pub max_edit: usize,
    /// Let emoji that have no lexicon entry through the punctuation filter
    /// so the embedding stage can look them up.
    pub keep_unmatched_emoji: bool,
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        Self {
            lowercase: true,
            mask_entities: true,
            replace_emoji: true,
            segment_hashtags: true,
            tokenize: true,
            filter_punctuation: true,
            correct_spelling: true,
            collapse_whitespace: true,
            max_edit: 2,
            keep_unmatched_emoji: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedTweet {
    pub original_id: String,
    pub tokens: Vec<String>,
}

fn url_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:https?://|www\.)\S+").unwrap())
}

fn mention_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(^|[^A-Za-z0-9_])@[A-Za-z0-9_]+").unwrap())
}

fn hashtag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"#([A-Za-z0-9_]+)").unwrap())
}

/// Masks URLs as `url` and @-mentions as `username`.
pub fn replace_entities(text: &str) -> String {
    let masked = url_re().replace_all(text, "url");
    mention_re().replace_all(&masked, "${1}username").into_owned()
}

/// Most probable split of `tag` under the unigram model of `freq`, found by
/// dynamic programming over split points.
pub fn segment_hashtag(tag: &str, freq: &FrequencyLexicon) -> Vec<String> {
    let chars: Vec<char> = tag.chars().collect();
    let n = chars.len();
    if n == 0 {
        return Vec::new();
    }
    let lower: Vec<char> = chars.iter().flat_map(|c| c.to_lowercase()).collect();
    if lower.len() != n {
        return vec![tag.to_lowercase()];
    }
    let mut best = vec![f64::NEG_INFINITY; n + 1];
    let mut back = vec![0usize; n + 1];
    best[0] = 0.0;
    for end in 1..=n {
        for start in 0..end {
            let word: String = lower[start..end].iter().collect();
            let score = best[start] + freq.log_prob(&word);
            if score > best[end] {
                best[end] = score;
                back[end] = start;
            }
        }
    }
    let mut words = Vec::new();
    let mut end = n;
    while end > 0 {
        let start = back[end];
        words.push(lower[start..end].iter().collect());
        end = start;
    }
    words.reverse();
    words
}

fn char_histogram_gap(a: &str, b: &str) -> usize {
    let mut diff: HashMap<char, i64> = HashMap::new();
    for c in a.chars() {
        *diff.entry(c).or_default() += 1;
    }
    for c in b.chars() {
        *diff.entry(c).or_default() -= 1;
    }
    diff.values().map(|v| v.unsigned_abs() as usize).sum()
}

/// Known words are returned as is. Otherwise the most frequent lexicon word
/// within Damerau-Levenshtein distance `max_edit` wins, ties going to the
/// smaller distance and then lexicographic order. Without a candidate the
/// word is returned unchanged.
pub fn correct_spelling(word: &str, freq: &FrequencyLexicon, max_edit: usize) -> String {
    if word.is_empty() || freq.contains(word) {
        return word.to_string();
    }
    let len = word.chars().count();
    let mut best: Option<(u64, usize, &str)> = None;
    for l in len.saturating_sub(max_edit)..=len + max_edit {
        for cand in freq.words_with_len(l) {
            // Each edit changes the character multiset by at most two.
            if char_histogram_gap(word, cand) > 2 * max_edit {
                continue;
            }
            let d = strsim::damerau_levenshtein(word, cand);
            if d > max_edit {
                continue;
            }
            let count = freq.count(cand);
            let better = match best {
                None => true,
                Some((bc, bd, bw)) => (count, std::cmp::Reverse(d), std::cmp::Reverse(cand.as_str())) > (bc, std::cmp::Reverse(bd), std::cmp::Reverse(bw)),
            };
            if better {
                best = Some((count, d, cand.as_str()));
            }
        }
    }
    best.map_or_else(|| word.to_string(), |(_, _, w)| w.to_string())
}

fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF | 0x2600..=0x27BF | 0x2B00..=0x2BFF | 0x2300..=0x23FF | 0x3030 | 0x303D)
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '\''
}

/// Splits into runs of `[A-Za-z0-9']` plus one token per other
/// non-whitespace character.
fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if is_word_char(c) {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            tokens.push(c.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

fn keep_token(tok: &str, keep_emoji: bool) -> Option<String> {
    if tok == "!" || tok == "?" {
        return Some(tok.to_string());
    }
    if tok.chars().all(is_word_char) {
        let t = tok.trim_matches('\'');
        return (!t.is_empty()).then(|| t.to_string());
    }
    if keep_emoji && tok.chars().all(is_emoji) {
        return Some(tok.to_string());
    }
    None
}

fn correctable(tok: &str) -> bool {
    tok != "username"
        && tok != "url"
        && tok.chars().any(|c| c.is_alphabetic())
        && tok.chars().all(|c| c.is_alphabetic() || c == '\'')
}

/// Lexicons and options for the full normalisation pipeline. Spelling
/// corrections are memoised across calls.
#[derive(Debug)]
pub struct Normalizer {
    pub freq: FrequencyLexicon,
    pub emoji: EmojiLexicon,
    pub options: NormalizeOptions,
    corrections: Mutex<HashMap<String, String>>,
}

impl Normalizer {
    pub fn new(freq: FrequencyLexicon, emoji: EmojiLexicon, options: NormalizeOptions) -> Self {
        Self {
            freq,
            emoji,
            options,
            corrections: Mutex::new(HashMap::new()),
        }
    }

    fn replace_emoji(&self, text: &str) -> String {
        if self.emoji.is_empty() {
            return text.to_string();
        }
        let chars: Vec<char> = text.chars().collect();
        let mut out = String::with_capacity(text.len());
        let mut i = 0;
        'outer: while i < chars.len() {
            let longest = self.emoji.max_chars.min(chars.len() - i);
            for l in (1..=longest).rev() {
                let key: String = chars[i..i + l].iter().collect();
                if let Some(words) = self.emoji.get(&key) {
                    out.push(' ');
                    out.push_str(&words.join(" "));
                    out.push(' ');
                    i += l;
                    continue 'outer;
                }
            }
            out.push(chars[i]);
            i += 1;
        }
        out
    }

    fn segment_hashtags(&self, text: &str) -> String {
        hashtag_re()
            .replace_all(text, |caps: &regex::Captures| {
                let words: Vec<String> = caps[1]
                    .split('_')
                    .filter(|p| !p.is_empty())
                    .flat_map(|p| segment_hashtag(p, &self.freq))
                    .collect();
                format!(" {} ", words.join(" "))
            })
            .into_owned()
    }

    fn correct(&self, tok: &str) -> String {
        if self.freq.contains(tok) {
            return tok.to_string();
        }
        if let Some(hit) = self.corrections.lock().expect("poisoned").get(tok) {
            return hit.clone();
        }
        let fixed = correct_spelling(tok, &self.freq, self.options.max_edit);
        self.corrections
            .lock()
            .expect("poisoned")
            .insert(tok.to_string(), fixed.clone());
        fixed
    }

    /// Runs every enabled stage over `text`.
    pub fn tokens(&self, text: &str) -> Vec<String> {
        let o = &self.options;
        let mut s = if o.lowercase {
            text.to_lowercase()
        } else {
            text.to_string()
        };
        if o.mask_entities {
            s = replace_entities(&s);
        }
        if o.replace_emoji {
            s = self.replace_emoji(&s);
        }
        if o.segment_hashtags {
            s = self.segment_hashtags(&s);
        }
        let mut toks: Vec<String> = if o.tokenize {
            tokenize(&s)
        } else {
            s.split_whitespace().map(String::from).collect()
        };
        if o.filter_punctuation {
            toks = toks
                .iter()
                .filter_map(|t| keep_token(t, o.keep_unmatched_emoji))
                .collect();
        }
        if o.correct_spelling && !self.freq.is_empty() {
            toks = toks
                .into_iter()
                .map(|t| if correctable(&t) { self.correct(&t) } else { t })
                .collect();
        }
        if o.collapse_whitespace {
            toks = toks
                .iter()
                .flat_map(|t| t.split_whitespace())
                .map(String::from)
                .collect();
        }
        toks
    }

    pub fn normalize(&self, tweet: &LabeledTweet) -> NormalizedTweet {
        NormalizedTweet {
            original_id: tweet.id.clone(),
            tokens: self.tokens(&tweet.text),
        }
    }
}

/// One-shot form of [`Normalizer::tokens`].
pub fn normalize(text: &str, freq: &FrequencyLexicon, emo: &EmojiLexicon, opts: &NormalizeOptions) -> Vec<String> {
    Normalizer::new(freq.clone(), emo.clone(), opts.clone()).tokens(text)
}
