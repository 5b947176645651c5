//! Per-class mean AU profiles and their comparison (trend agreement via
//! Spearman rank correlation, per-AU differences, shared top-k AUs).

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::au::{AuTriplet, AuVector, EmotionClass, SourceTag, AU_DIM, AU_NUMBERS};
use crate::format::push_fixed;
use crate::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMean {
    pub mean: Vec<f64>,
    pub count: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassAuProfile {
    pub classes: BTreeMap<EmotionClass, ClassMean>,
}

impl ClassAuProfile {
    pub fn get(&self, class: EmotionClass) -> Option<&ClassMean> {
        self.classes.get(&class)
    }

    /// `au,positive,negative,surprise` with one row per AU; absent classes
    /// are left blank.
    pub fn write_csv<W: Write>(&self, mut out: W, prefix_comment: Option<&str>) -> Result<()> {
        if let Some(c) = prefix_comment {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "au,positive,negative,surprise")?;
        let mut line = String::new();
        for (i, au) in AU_NUMBERS.iter().enumerate() {
            line.clear();
            line.push_str(&format!("AU{au:02}"));
            for class in EmotionClass::ALL {
                line.push(',');
                if let Some(m) = self.get(class) {
                    push_fixed(&mut line, m.mean[i]);
                }
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileResult {
    pub profile: ClassAuProfile,
    pub warnings: Vec<String>,
}

/// Componentwise mean of apex vectors per class, optionally restricted to one
/// source. Classes left empty are omitted with a warning.
pub fn mean_au_by_class(triplets: &[AuTriplet], source_filter: Option<SourceTag>) -> ProfileResult {
    let mut sums = [[0.0f64; AU_DIM]; 3];
    let mut counts = [0usize; 3];
    for t in triplets.iter().filter(|t| source_filter.is_none_or(|s| t.source == s)) {
        let c = t.label.code();
        counts[c] += 1;
        for (acc, v) in sums[c].iter_mut().zip(t.apex.values()) {
            *acc += v;
        }
    }
    let mut result = ProfileResult::default();
    for class in EmotionClass::ALL {
        let c = class.code();
        if counts[c] == 0 {
            let scope = source_filter.map_or("any source".to_string(), |s| format!("source {s}"));
            result.warnings.push(format!("no {scope} triplets for class {class}"));
            continue;
        }
        let n = counts[c] as f64;
        // Clamp guards against summation drift just above 1.
        let mean = sums[c].iter().map(|s| (s / n).clamp(0.0, 1.0)).collect();
        result.profile.classes.insert(class, ClassMean { mean, count: counts[c] });
    }
    result
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation (Pearson on average ranks). Returns `(0, true)` when
/// either input has zero variance.
pub fn spearman(a: &[f64], b: &[f64]) -> (f64, bool) {
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    if ra == rb {
        let constant = ra.windows(2).all(|w| w[0] == w[1]);
        return if constant { (0.0, true) } else { (1.0, false) };
    }
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let (mut cov, mut va, mut vb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return (0.0, true);
    }
    ((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0), false)
}

/// AU numbers of the `k` largest entries; ties go to the lower AU number.
pub fn top_k_aus(mean: &[f64], k: usize) -> Vec<u8> {
    let mut idx: Vec<usize> = (0..mean.len()).collect();
    idx.sort_by(|&a, &b| mean[b].total_cmp(&mean[a]).then(a.cmp(&b)));
    let mut top: Vec<u8> = idx.into_iter().take(k).map(|i| AU_NUMBERS[i]).collect();
    top.sort_unstable();
    top
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassComparison {
    pub class: EmotionClass,
    pub rank_correlation: f64,
    pub degenerate: bool,
    pub abs_difference: Vec<f64>,
    pub top_k_shared: Vec<u8>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileComparison {
    pub top_k: usize,
    pub classes: Vec<ClassComparison>,
    pub warnings: Vec<String>,
}

pub fn compare_profiles(a: &ClassAuProfile, b: &ClassAuProfile, top_k: usize) -> ProfileComparison {
    let mut out = ProfileComparison {
        top_k,
        ..Default::default()
    };
    for class in EmotionClass::ALL {
        let (Some(ma), Some(mb)) = (a.get(class), b.get(class)) else {
            out.warnings.push(format!("class {class} missing from a profile; skipped"));
            continue;
        };
        let (rho, degenerate) = spearman(&ma.mean, &mb.mean);
        let top_a = top_k_aus(&ma.mean, top_k);
        let top_b = top_k_aus(&mb.mean, top_k);
        out.classes.push(ClassComparison {
            class,
            rank_correlation: rho,
            degenerate,
            abs_difference: ma.mean.iter().zip(&mb.mean).map(|(x, y)| (x - y).abs()).collect(),
            top_k_shared: top_a.into_iter().filter(|au| top_b.contains(au)).collect(),
        });
    }
    out
}

/// Convenience for callers holding a single AU vector as a profile row.
pub fn profile_of(class: EmotionClass, mean: &AuVector, count: usize) -> ClassAuProfile {
    let mut p = ClassAuProfile::default();
    p.classes.insert(
        class,
        ClassMean {
            mean: mean.values().to_vec(),
            count,
        },
    );
    p
}
