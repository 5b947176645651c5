//! Subject-wise folds, UF1/UAR scoring and permutation significance tests.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::au::EmotionClass;
use crate::error::csv_error;
use crate::rng::RngStream;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Vec<String>>,
}

impl FoldPlan {
    /// Subjects of every fold except `test_fold`.
    pub fn train_subjects(&self, test_fold: usize) -> Vec<&str> {
        self.folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != test_fold)
            .flat_map(|(_, f)| f.iter().map(String::as_str))
            .collect()
    }
}

/// Seeded shuffle of the sorted subject list, then round-robin assignment.
pub fn split_subjects(subjects: &[String], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::InvalidConfig(format!("k must be at least 2, got {k}")));
    }
    let mut unique = BTreeSet::new();
    for s in subjects {
        if !unique.insert(s.clone()) {
            return Err(Error::DuplicateSubject(s.clone()));
        }
    }
    if subjects.len() < k {
        return Err(Error::TooFewSubjects { k, subjects: subjects.len() });
    }
    let mut order: Vec<String> = unique.into_iter().collect();
    RngStream::new(seed, "split", k as u64).shuffle(&mut order);
    let mut folds = vec![Vec::new(); k];
    for (i, s) in order.into_iter().enumerate() {
        folds[i % k].push(s);
    }
    for f in &mut folds {
        f.sort();
    }
    Ok(FoldPlan { k, seed, folds })
}

/// Rows are true classes, columns predicted classes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|i| self.counts[i][i]).sum()
    }

    fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    fn col_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|r| r[j]).sum()
    }

    /// `2 TP / (2 TP + FP + FN)`, 0 when the denominator is 0.
    pub fn f1(&self, class: EmotionClass) -> f64 {
        let i = class.code();
        let tp = self.counts[i][i];
        let denom = self.row_sum(i) + self.col_sum(i);
        if denom == 0 {
            0.0
        } else {
            (2 * tp) as f64 / denom as f64
        }
    }

    /// `TP / (TP + FN)`, 0 for a class with no true samples.
    pub fn recall(&self, class: EmotionClass) -> f64 {
        let i = class.code();
        let support = self.row_sum(i);
        if support == 0 {
            0.0
        } else {
            self.counts[i][i] as f64 / support as f64
        }
    }

    fn ensure_nonempty(&self) -> Result<()> {
        if self.total() == 0 {
            Err(Error::EmptyInput("confusion matrix"))
        } else {
            Ok(())
        }
    }
}

pub fn confusion(pred: &[EmotionClass], truth: &[EmotionClass]) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("predictions"));
    }
    let mut cm = ConfusionMatrix::default();
    for (p, t) in pred.iter().zip(truth) {
        cm.counts[t.code()][p.code()] += 1;
    }
    Ok(cm)
}

pub fn uf1(cm: &ConfusionMatrix) -> Result<f64> {
    cm.ensure_nonempty()?;
    Ok(EmotionClass::ALL.iter().map(|&c| cm.f1(c)).sum::<f64>() / 3.0)
}

pub fn uar(cm: &ConfusionMatrix) -> Result<f64> {
    cm.ensure_nonempty()?;
    Ok(EmotionClass::ALL.iter().map(|&c| cm.recall(c)).sum::<f64>() / 3.0)
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    cm.ensure_nonempty()?;
    Ok(cm.trace() as f64 / cm.total() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub uf1: f64,
    pub uar: f64,
    pub accuracy: f64,
    pub per_class_f1: [f64; 3],
    pub per_class_recall: [f64; 3],
    pub confusion: ConfusionMatrix,
}

impl MetricsReport {
    pub fn from_confusion(cm: ConfusionMatrix) -> Result<Self> {
        Ok(Self {
            uf1: uf1(&cm)?,
            uar: uar(&cm)?,
            accuracy: accuracy(&cm)?,
            per_class_f1: EmotionClass::ALL.map(|c| cm.f1(c)),
            per_class_recall: EmotionClass::ALL.map(|c| cm.recall(c)),
            confusion: cm,
        })
    }
}

/// Reads `sample_id,predicted_label` rows.
pub fn parse_predictions<R: Read>(input: R) -> Result<Vec<(String, EmotionClass)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingNamedColumn(name.to_string()))
    };
    let (c_id, c_label) = (col("sample_id")?, col("predicted_label")?);
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let id = record.get(c_id).unwrap_or("").to_string();
        let label = record.get(c_label).unwrap_or("").parse::<EmotionClass>()?;
        out.push((id, label));
    }
    Ok(out)
}

/// Scores predictions against a truth table keyed by sample id. Every
/// prediction must name a known sample; the first unknown id is reported.
pub fn score(predictions: &[(String, EmotionClass)], truth: &HashMap<String, EmotionClass>) -> Result<MetricsReport> {
    let mut seen = HashSet::with_capacity(predictions.len());
    let mut pred = Vec::with_capacity(predictions.len());
    let mut gold = Vec::with_capacity(predictions.len());
    for (id, p) in predictions {
        let t = truth.get(id).ok_or_else(|| Error::UnknownSampleId(id.clone()))?;
        if !seen.insert(id.as_str()) {
            return Err(Error::DuplicateSampleId(id.clone()));
        }
        pred.push(*p);
        gold.push(*t);
    }
    MetricsReport::from_confusion(confusion(&pred, &gold)?)
}

/// Metric values from repeated runs of one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSeries {
    pub label: String,
    pub values: Vec<f64>,
}

impl RunSeries {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput("run series"));
        }
        Ok(Self {
            label: label.into(),
            values,
        })
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    pub fn std(&self) -> f64 {
        sample_std(&self.values)
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1); 0 for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// `C(n, k)`, saturating at `u128::MAX`.
fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Two-sided permutation test on the difference of means.
///
/// Enumerates every relabeling when there are at most `num_permutations` of
/// them; otherwise draws `num_permutations` random relabelings, permutation
/// `j` using `rng.substream("permutation", j)`. The observed labeling is
/// always counted, so the p-value is never 0.
pub fn permutation_test(a: &RunSeries, b: &RunSeries, num_permutations: usize, rng: &RngStream) -> f64 {
    // Canonical argument order makes the Monte-Carlo branch symmetric too.
    let (a, b) = match a.values.len().cmp(&b.values.len()).then_with(|| {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    }) {
        std::cmp::Ordering::Greater => (b, a),
        _ => (a, b),
    };

    let pooled: Vec<f64> = a.values.iter().chain(&b.values).copied().collect();
    let (na, nb) = (a.values.len(), b.values.len());
    let total: f64 = pooled.iter().sum();
    let stat = |sum_a: f64| (sum_a / na as f64 - (total - sum_a) / nb as f64).abs();
    let observed = stat(a.values.iter().sum());
    let threshold = observed - 1e-12 * observed.max(1.0);

    let n = pooled.len();
    let combos = binomial(n, na);
    if combos <= num_permutations as u128 {
        let mut idx: Vec<usize> = (0..na).collect();
        let (mut hits, mut count) = (0u64, 0u64);
        loop {
            let sum_a: f64 = idx.iter().map(|&i| pooled[i]).sum();
            count += 1;
            if stat(sum_a) >= threshold {
                hits += 1;
            }
            // Advance to the next combination in lexicographic order.
            let mut i = na;
            loop {
                if i == 0 {
                    return hits as f64 / count as f64;
                }
                i -= 1;
                if idx[i] != i + n - na {
                    break;
                }
            }
            idx[i] += 1;
            for j in i + 1..na {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }

    let hits = crate::par::map_indexed(num_permutations, |j| {
        let mut shuffled = pooled.clone();
        rng.substream("permutation", j as u64).shuffle(&mut shuffled);
        stat(shuffled[..na].iter().sum()) >= threshold
    })
    .into_iter()
    .filter(|&h| h)
    .count();
    (hits + 1) as f64 / (num_permutations + 1) as f64
}

/// Significance tier; a p-value on a boundary gets the less significant tier.
pub fn significance_star(p: f64) -> Result<&'static str> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidPValue(p));
    }
    Ok(if p >= 0.05 {
        "n.s."
    } else if p >= 0.01 {
        "*"
    } else if p >= 0.001 {
        "**"
    } else {
        "***"
    })
}
