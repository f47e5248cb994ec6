//! Valence datasets in the SemEval affect-in-tweets TSV layout.
//!
//! Classification files carry labels such as `2: moderately positive mental
//! state can be inferred`; intensity files carry a decimal in `[0, 1]`. The
//! combined layout used for multi-task runs has both label columns.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};

/// Seven-point valence scale, ordered from very negative to very positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValenceClass {
    #[serde(rename = "Neg-V")]
    NegV,
    #[serde(rename = "Neg-M")]
    NegM,
    #[serde(rename = "Neg-S")]
    NegS,
    #[serde(rename = "Neu")]
    Neu,
    #[serde(rename = "Pos-S")]
    PosS,
    #[serde(rename = "Pos-M")]
    PosM,
    #[serde(rename = "Pos-V")]
    PosV,
}

impl ValenceClass {
    pub const ALL: [ValenceClass; 7] = [
        ValenceClass::NegV,
        ValenceClass::NegM,
        ValenceClass::NegS,
        ValenceClass::Neu,
        ValenceClass::PosS,
        ValenceClass::PosM,
        ValenceClass::PosV,
    ];

    pub const COUNT: usize = 7;

    /// Position in [`ValenceClass::ALL`], 0..=6.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// -3 for `Neg-V` through +3 for `Pos-V`.
    pub fn ordinal(self) -> i32 {
        self as i32 - 3
    }

    pub fn from_ordinal(o: i32) -> Option<Self> {
        if (-3..=3).contains(&o) {
            Self::from_index((o + 3) as usize)
        } else {
            None
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ValenceClass::NegV => "Neg-V",
            ValenceClass::NegM => "Neg-M",
            ValenceClass::NegS => "Neg-S",
            ValenceClass::Neu => "Neu",
            ValenceClass::PosS => "Pos-S",
            ValenceClass::PosM => "Pos-M",
            ValenceClass::PosV => "Pos-V",
        }
    }

    fn description(self) -> &'static str {
        match self {
            ValenceClass::NegV => "very negative emotional state can be inferred",
            ValenceClass::NegM => "moderately negative emotional state can be inferred",
            ValenceClass::NegS => "slightly negative emotional state can be inferred",
            ValenceClass::Neu => "neutral or mixed emotional state can be inferred",
            ValenceClass::PosS => "slightly positive emotional state can be inferred",
            ValenceClass::PosM => "moderately positive emotional state can be inferred",
            ValenceClass::PosV => "very positive emotional state can be inferred",
        }
    }
}

impl fmt::Display for ValenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ValenceClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Invalid(format!("unknown valence class `{s}`")))
    }
}

pub fn class_to_ordinal(c: ValenceClass) -> i32 {
    c.ordinal()
}

pub fn ordinal_to_class(o: i32) -> Option<ValenceClass> {
    ValenceClass::from_ordinal(o)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledTweet {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valence: Option<ValenceClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intensity: Option<f64>,
}

/// Which label columns a dataset file carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    /// `ID, Tweet, Affect Dimension, Intensity Class`
    Classification,
    /// `ID, Tweet, Affect Dimension, Intensity Score`
    Intensity,
    /// `ID, Tweet, Affect Dimension, Intensity Class, Intensity Score`
    Both,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetSplit {
    pub name: String,
    pub examples: Vec<LabeledTweet>,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&LabeledTweet> {
        self.examples.iter().find(|t| t.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.examples.iter().map(|t| t.id.as_str())
    }
}

fn parse_class(field: &str) -> std::result::Result<ValenceClass, String> {
    let head = field.split(':').next().unwrap_or("").trim();
    let n: i32 = head
        .parse()
        .map_err(|_| format!("class label `{field}` does not start with an integer"))?;
    ValenceClass::from_ordinal(n).ok_or_else(|| format!("class integer {n} outside -3..3"))
}

fn parse_intensity(field: &str) -> std::result::Result<f64, String> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| format!("intensity `{field}` is not a number"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("intensity {v} outside [0, 1]"));
    }
    Ok(v)
}

/// Parses dataset text. `origin` is used in error messages only.
pub fn parse_dataset(content: &str, kind: LabelKind, origin: &Path) -> Result<DatasetSplit> {
    let columns = match kind {
        LabelKind::Both => 5,
        _ => 4,
    };
    let mut examples = Vec::new();
    let mut seen = HashSet::new();
    for (i, raw) in content.lines().enumerate().skip(1) {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let err = |msg: String| Error::parse(origin, line_no, msg);
        if fields.len() != columns {
            return Err(err(format!("expected {columns} tab-separated fields, found {}", fields.len())));
        }
        let id = fields[0].trim();
        let text = fields[1];
        if id.is_empty() {
            return Err(err("empty id".into()));
        }
        if text.trim() == "NONE" {
            return Err(err(format!("tweet `{id}` has no text")));
        }
        if fields[3..].iter().any(|f| f.trim().is_empty()) {
            return Err(err(format!("tweet `{id}` is missing its label")));
        }
        let (valence, intensity) = match kind {
            LabelKind::Classification => (Some(parse_class(fields[3]).map_err(err)?), None),
            LabelKind::Intensity => (None, Some(parse_intensity(fields[3]).map_err(err)?)),
            LabelKind::Both => (
                Some(parse_class(fields[3]).map_err(err)?),
                Some(parse_intensity(fields[4]).map_err(err)?),
            ),
        };
        if !seen.insert(id.to_string()) {
            return Err(err(format!("duplicate id `{id}`")));
        }
        examples.push(LabeledTweet {
            id: id.to_string(),
            text: text.to_string(),
            valence,
            intensity,
        });
    }
    let name = origin
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(DatasetSplit { name, examples })
}

/// Guesses the layout from the header: five columns carry both labels,
/// otherwise a header ending in "Class" or "Score" decides, and failing
/// that the first data row's label.
pub fn detect_kind(content: &str) -> Option<LabelKind> {
    let mut lines = content.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines.next()?.trim_end_matches('\r').split('\t').collect();
    match header.len() {
        5 => return Some(LabelKind::Both),
        4 => {}
        _ => return None,
    }
    let last = header[3].to_lowercase();
    if last.contains("class") {
        return Some(LabelKind::Classification);
    }
    if last.contains("score") {
        return Some(LabelKind::Intensity);
    }
    let row: Vec<&str> = lines.next()?.trim_end_matches('\r').split('\t').collect();
    let label = row.get(3)?;
    if label.contains(':') {
        Some(LabelKind::Classification)
    } else if parse_intensity(label).is_ok() {
        Some(LabelKind::Intensity)
    } else {
        None
    }
}

pub fn load_dataset(path: &Path, kind: LabelKind) -> Result<DatasetSplit> {
    parse_dataset(&read_to_string(path)?, kind, path)
}

/// Writes `split` in the layout of `kind`. Every example must carry the
/// labels that layout needs.
pub fn write_dataset<W: Write>(split: &DatasetSplit, kind: LabelKind, mut out: W) -> Result<()> {
    let io = |e| Error::io(Path::new(&split.name), e);
    let header = match kind {
        LabelKind::Classification => "ID\tTweet\tAffect Dimension\tIntensity Class",
        LabelKind::Intensity => "ID\tTweet\tAffect Dimension\tIntensity Score",
        LabelKind::Both => "ID\tTweet\tAffect Dimension\tIntensity Class\tIntensity Score",
    };
    writeln!(out, "{header}").map_err(io)?;
    for t in &split.examples {
        if t.text.contains(['\t', '\n', '\r']) {
            return Err(Error::Invalid(format!("tweet `{}` contains a tab or line break", t.id)));
        }
        let class = || {
            t.valence
                .map(|c| format!("{}: {}", c.ordinal(), c.description()))
                .ok_or_else(|| Error::MissingValence(vec![t.id.clone()]))
        };
        let score = || {
            t.intensity
                .map(|v| v.to_string())
                .ok_or_else(|| Error::MissingIntensity(vec![t.id.clone()]))
        };
        let labels = match kind {
            LabelKind::Classification => class()?,
            LabelKind::Intensity => score()?,
            LabelKind::Both => format!("{}\t{}", class()?, score()?),
        };
        writeln!(out, "{}\t{}\tvalence\t{}", t.id, t.text, labels).map_err(io)?;
    }
    Ok(())
}

/// Merges a classification split and an intensity split over the same
/// tweets into one split carrying both labels, in the classification
/// split's order.
pub fn join_labels(classes: &DatasetSplit, intensities: &DatasetSplit) -> Result<DatasetSplit> {
    let by_id: HashMap<&str, &LabeledTweet> =
        intensities.examples.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut missing = Vec::new();
    let mut examples = Vec::with_capacity(classes.len());
    for t in &classes.examples {
        match by_id.get(t.id.as_str()).and_then(|o| o.intensity) {
            Some(v) => examples.push(LabeledTweet {
                intensity: Some(v),
                ..t.clone()
            }),
            None => missing.push(t.id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingIntensity(missing));
    }
    if intensities.len() != classes.len() {
        let known: HashSet<&str> = classes.ids().collect();
        let extra: Vec<String> = intensities
            .ids()
            .filter(|id| !known.contains(id))
            .map(String::from)
            .collect();
        return Err(Error::MissingValence(extra));
    }
    Ok(DatasetSplit {
        name: classes.name.clone(),
        examples,
    })
}

/// Per-class example counts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ClassHistogram {
    pub counts: [usize; 7],
}

impl ClassHistogram {
    pub fn get(&self, c: ValenceClass) -> usize {
        self.counts[c.index()]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

impl Serialize for ClassHistogram {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(7))?;
        for c in ValenceClass::ALL {
            map.serialize_entry(c.label(), &self.get(c))?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for ClassHistogram {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = ClassHistogram;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from valence class to count")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
                let mut h = ClassHistogram::default();
                while let Some((k, v)) = map.next_entry::<String, usize>()? {
                    let c: ValenceClass = k.parse().map_err(de::Error::custom)?;
                    h.counts[c.index()] = v;
                }
                Ok(h)
            }
        }
        d.deserialize_map(V)
    }
}

pub fn histogram(split: &DatasetSplit) -> Result<ClassHistogram> {
    let missing: Vec<String> = split
        .examples
        .iter()
        .filter(|t| t.valence.is_none())
        .map(|t| t.id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingValence(missing));
    }
    let mut h = ClassHistogram::default();
    for c in split.examples.iter().filter_map(|t| t.valence) {
        h.counts[c.index()] += 1;
    }
    Ok(h)
}
