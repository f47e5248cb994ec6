//! Pearson correlation, confusion matrices, the paired t-test and
//! evaluation reports.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{DatasetSplit, ValenceClass};
use crate::error::{read_to_string, Error, Result};

/// A correlation that may be undefined because one input is constant.
/// Undefined values report `value == 0.0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub value: f64,
    pub defined: bool,
}

impl Correlation {
    pub const UNDEFINED: Correlation = Correlation {
        value: 0.0,
        defined: false,
    };

    /// The value, or `None` when undefined.
    pub fn get(self) -> Option<f64> {
        self.defined.then_some(self.value)
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::Invalid(format!(
            "pearson: length mismatch {} vs {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Invalid(format!("pearson needs at least 2 points, got {n}")));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 || !(sxx * syy).is_finite() {
        return Ok(Correlation::UNDEFINED);
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    Ok(Correlation {
        value: r.clamp(-1.0, 1.0),
        defined: true,
    })
}

/// Rows are gold classes, columns predictions, both ordered Neg-V..Pos-V.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix(pub [[u64; 7]; 7]);

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn row_sum(&self, gold: ValenceClass) -> u64 {
        self.0[gold.index()].iter().sum()
    }

    pub fn get(&self, gold: ValenceClass, pred: ValenceClass) -> u64 {
        self.0[gold.index()][pred.index()]
    }

    /// Negative gold predicted positive and positive gold predicted
    /// negative, returned as `(neg_to_pos, pos_to_neg)`. Neutral is in
    /// neither group.
    pub fn polarity_flips(&self) -> (u64, u64) {
        let mut np = 0;
        let mut pn = 0;
        for g in ValenceClass::ALL {
            for p in ValenceClass::ALL {
                let c = self.get(g, p);
                if g.ordinal() < 0 && p.ordinal() > 0 {
                    np += c;
                } else if g.ordinal() > 0 && p.ordinal() < 0 {
                    pn += c;
                }
            }
        }
        (np, pn)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        write!(out, "gold\\pred")?;
        for c in ValenceClass::ALL {
            write!(out, ",{}", c.label())?;
        }
        writeln!(out)?;
        for g in ValenceClass::ALL {
            write!(out, "{}", g.label())?;
            for v in self.0[g.index()] {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Row-normalised heatmap, `cell` pixels per entry, white (0) to dark
    /// blue (1). Empty rows stay white.
    pub fn render_heatmap(&self, path: &Path, cell: u32) -> Result<()> {
        let side = 7 * cell;
        let mut img = image::RgbImage::new(side, side);
        for g in 0..7 {
            let total: u64 = self.0[g].iter().sum();
            for p in 0..7 {
                let frac = if total == 0 {
                    0.0
                } else {
                    self.0[g][p] as f64 / total as f64
                };
                let shade = |lo: f64, hi: f64| (hi + (lo - hi) * frac).round() as u8;
                let px = image::Rgb([shade(8.0, 255.0), shade(48.0, 255.0), shade(107.0, 255.0)]);
                for dy in 0..cell {
                    for dx in 0..cell {
                        img.put_pixel(p as u32 * cell + dx, g as u32 * cell + dy, px);
                    }
                }
            }
        }
        img.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
    }
}

pub fn confusion(golds: &[ValenceClass], preds: &[ValenceClass]) -> Result<ConfusionMatrix> {
    if golds.len() != preds.len() {
        return Err(Error::Invalid(format!(
            "confusion: {} gold labels but {} predictions",
            golds.len(),
            preds.len()
        )));
    }
    let mut m = ConfusionMatrix::default();
    for (g, p) in golds.iter().zip(preds) {
        m.0[g.index()][p.index()] += 1;
    }
    Ok(m)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub df: usize,
    pub mean_difference: f64,
    /// Two-sided p-value; undefined when the differences have zero variance.
    pub p: Correlation,
}

/// Two-sided paired t-test on `a - b`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::Invalid(format!(
            "paired t-test: {} vs {} samples",
            a.len(),
            b.len()
        )));
    }
    let k = a.len();
    if k < 2 {
        return Err(Error::Invalid(format!("paired t-test needs at least 2 pairs, got {k}")));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / k as f64;
    let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    let df = k - 1;
    if var == 0.0 {
        let t = if mean == 0.0 { 0.0 } else { mean.signum() * f64::INFINITY };
        return Ok(TTest {
            t,
            df,
            mean_difference: mean,
            p: Correlation::UNDEFINED,
        });
    }
    let t = mean / (var.sqrt() / (k as f64).sqrt());
    Ok(TTest {
        t,
        df,
        mean_difference: mean,
        p: Correlation {
            value: student_t_two_sided(t, df as f64),
            defined: true,
        },
    })
}

/// `P(|T| >= |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// `I_x(a, b)` by Lentz's continued fraction.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Lanczos approximation (g = 7, 9 terms), reflection below 0.5.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Intensity,
}

impl Task {
    pub fn short(self) -> &'static str {
        match self {
            Task::Classification => "class",
            Task::Intensity => "intensity",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    pub gold: f64,
    pub pred: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub pearson: f64,
    pub pearson_defined: bool,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confusion: Option<ConfusionMatrix>,
    pub per_example: Vec<ExampleRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

impl EvalReport {
    pub fn correlation(&self) -> Correlation {
        Correlation {
            value: self.pearson,
            defined: self.pearson_defined,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&read_to_string(path)?)?)
    }
}

/// Predictions keyed by tweet id.
#[derive(Clone, Debug)]
pub enum Predictions {
    Classes(HashMap<String, ValenceClass>),
    Intensities(HashMap<String, f64>),
}

impl Predictions {
    pub fn task(&self) -> Task {
        match self {
            Predictions::Classes(_) => Task::Classification,
            Predictions::Intensities(_) => Task::Intensity,
        }
    }
}

/// Scores predictions against every example of `gold`, in gold order.
/// Classification is scored on ordinal codes.
pub fn evaluate_run(predictions: &Predictions, gold: &DatasetSplit) -> Result<EvalReport> {
    let task = predictions.task();
    let mut missing = Vec::new();
    let mut records = Vec::with_capacity(gold.len());
    let mut gold_classes = Vec::new();
    let mut pred_classes = Vec::new();
    for ex in &gold.examples {
        match predictions {
            Predictions::Classes(p) => {
                let g = ex.valence.ok_or_else(|| Error::MissingValence(vec![ex.id.clone()]))?;
                match p.get(&ex.id) {
                    Some(&c) => {
                        gold_classes.push(g);
                        pred_classes.push(c);
                        records.push(ExampleRecord {
                            id: ex.id.clone(),
                            gold: g.ordinal() as f64,
                            pred: c.ordinal() as f64,
                        });
                    }
                    None => missing.push(ex.id.clone()),
                }
            }
            Predictions::Intensities(p) => {
                let g = ex.intensity.ok_or_else(|| Error::MissingIntensity(vec![ex.id.clone()]))?;
                match p.get(&ex.id) {
                    Some(&v) => records.push(ExampleRecord {
                        id: ex.id.clone(),
                        gold: g,
                        pred: v,
                    }),
                    None => missing.push(ex.id.clone()),
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingPredictions(missing));
    }
    let golds: Vec<f64> = records.iter().map(|r| r.gold).collect();
    let preds: Vec<f64> = records.iter().map(|r| r.pred).collect();
    let r = pearson(&golds, &preds)?;
    let confusion = match task {
        Task::Classification => Some(confusion(&gold_classes, &pred_classes)?),
        Task::Intensity => None,
    };
    Ok(EvalReport {
        task,
        pearson: r.value,
        pearson_defined: r.defined,
        n: records.len(),
        confusion,
        per_example: records,
        config_hash: None,
    })
}

/// One row of a per-example MTL versus STL comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleComparison {
    pub id: String,
    pub gold: f64,
    pub mtl: f64,
    pub stl: f64,
}

/// Joins two reports on id, keeping examples where MTL and STL disagree.
pub fn compare_examples(mtl: &EvalReport, stl: &EvalReport) -> Result<Vec<ExampleComparison>> {
    if mtl.task != stl.task {
        return Err(Error::Invalid("cannot compare reports of different tasks".into()));
    }
    let stl_by_id: HashMap<&str, &ExampleRecord> =
        stl.per_example.iter().map(|r| (r.id.as_str(), r)).collect();
    let mut out = Vec::new();
    let mut missing = Vec::new();
    for r in &mtl.per_example {
        match stl_by_id.get(r.id.as_str()) {
            Some(s) if s.pred != r.pred => out.push(ExampleComparison {
                id: r.id.clone(),
                gold: r.gold,
                mtl: r.pred,
                stl: s.pred,
            }),
            Some(_) => {}
            None => missing.push(r.id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingPredictions(missing));
    }
    Ok(out)
}

/// The four metric cells of a comparison: head paradigm by task.
pub const CELLS: [(&str, Task); 4] = [
    ("dl", Task::Classification),
    ("dl", Task::Intensity),
    ("ml", Task::Classification),
    ("ml", Task::Intensity),
];

/// Per-seed scores for one run; `None` marks a cell the run did not produce.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunScores {
    pub seed: u64,
    pub cells: [Option<f64>; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellComparison {
    pub head: String,
    pub task: Task,
    pub stl_mean: Option<f64>,
    pub mtl_mean: Option<f64>,
    pub seeds: usize,
    pub ttest: Option<TTest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub seeds: Vec<u64>,
    pub cells: Vec<CellComparison>,
}

impl ComparisonTable {
    pub fn render(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
        let mut s = String::from("model\tDL class\tDL intensity\tML class\tML intensity\n");
        for (label, pick) in [("STL", 0), ("MTL", 1)] {
            s.push_str(label);
            for c in &self.cells {
                s.push('\t');
                s.push_str(&fmt(if pick == 0 { c.stl_mean } else { c.mtl_mean }));
            }
            s.push('\n');
        }
        s.push_str("p-value");
        for c in &self.cells {
            s.push('\t');
            s.push_str(&match &c.ttest {
                Some(t) if t.p.defined => format!("{:.4}", t.p.value),
                Some(_) => "undefined".to_string(),
                None => "-".to_string(),
            });
        }
        s.push('\n');
        s
    }
}

/// Pairs MTL and STL runs by seed and tests each cell. Both arms must
/// cover the same seeds, at least two of them.
pub fn compare_runs(mtl: &[RunScores], stl: &[RunScores]) -> Result<ComparisonTable> {
    let mut ms: Vec<u64> = mtl.iter().map(|r| r.seed).collect();
    let mut ss: Vec<u64> = stl.iter().map(|r| r.seed).collect();
    ms.sort_unstable();
    ss.sort_unstable();
    if ms.windows(2).any(|w| w[0] == w[1]) || ss.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Invalid("a seed appears twice within one arm".into()));
    }
    if ms != ss {
        return Err(Error::Invalid(format!("seed sets differ: MTL {ms:?} vs STL {ss:?}")));
    }
    if ms.len() < 2 {
        return Err(Error::Invalid("comparison needs at least 2 seeds per arm".into()));
    }
    let by_seed = |runs: &[RunScores], seed: u64| runs.iter().find(|r| r.seed == seed).cloned();
    let mut cells = Vec::with_capacity(4);
    for (i, (head, task)) in CELLS.iter().enumerate() {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for &seed in &ms {
            let (m, s) = (by_seed(mtl, seed).unwrap(), by_seed(stl, seed).unwrap());
            if let (Some(x), Some(y)) = (m.cells[i], s.cells[i]) {
                a.push(x);
                b.push(y);
            }
        }
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        let ttest = if a.len() >= 2 { Some(paired_ttest(&a, &b)?) } else { None };
        cells.push(CellComparison {
            head: head.to_string(),
            task: *task,
            stl_mean: mean(&b),
            mtl_mean: mean(&a),
            seeds: a.len(),
            ttest,
        });
    }
    Ok(ComparisonTable { seeds: ms, cells })
}
