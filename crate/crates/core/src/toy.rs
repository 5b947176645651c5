//! Desk-scale ablation harness.
//!
//! Real MiE/MaE corpora cannot ship, so a seeded synthetic "world" stands in
//! for them: annotated micro-expression clips from a set of subjects (with a
//! held-out test fold), macro-expression clips, and an expert table. Each
//! source draws on its own class AU prototypes, so they overlap without
//! coinciding. Each run builds a pool restricted to a
//! source subset, composes a manifest, drops test-fold MiE samples, renders it
//! through the mock generator and trains a nearest-centroid classifier on
//! apex-minus-onset expression features. Scores are taken on a fixed test set
//! composed on held-out identities from an equal mixture of the test sources.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::au::{
    au_position, AuVector, ClassSourceCounts, EmotionClass, SourceSet, SourceTag, AU_DIM,
};
use crate::composer::{apply_fold_exclusion, compose, CompositionConfig};
use crate::eval::{
    confusion, mean, permutation_test, sample_std, significance_star, uar, uf1, RunSeries,
};
use crate::format::push_fixed;
use crate::ingest::{AuTimeSeries, ClipAnnotation, ClipRecord, IdentityPool};
use crate::mockgen::{GeneratorParams, MockGenerator, RenderedSample};
use crate::rng::RngStream;
use crate::samplers::{build_triplet_pool, ExpertEntry, ExpertTable, SamplerConfig};
use crate::{par, Error, Result};

type Prototypes = [&'static [(u8, f64)]; 3];

/// Spontaneous expressions: partial, low-intensity AU patterns.
const MIE_PROTOTYPES: Prototypes = [
    &[(6, 0.5), (12, 0.8), (14, 0.4), (25, 0.2)],
    &[(4, 0.9), (7, 0.6), (9, 0.3), (10, 0.3), (14, 0.4), (15, 0.3), (17, 0.5), (23, 0.3)],
    &[(1, 0.8), (2, 0.7), (5, 0.3), (25, 0.3)],
];

/// Posed expressions recruit more of the face.
const MAE_PROTOTYPES: Prototypes = [
    &[(6, 0.9), (10, 0.2), (12, 1.0), (25, 0.8), (26, 0.3)],
    &[(4, 1.0), (7, 0.4), (9, 0.7), (10, 0.6), (15, 0.7), (17, 0.7), (20, 0.4), (26, 0.2)],
    &[(1, 1.0), (2, 1.0), (5, 0.9), (25, 0.9), (26, 1.0)],
];

/// Textbook descriptions used for the expert table.
const EXPERT_PROTOTYPES: Prototypes = [
    &[(6, 0.6), (7, 0.2), (12, 1.0), (14, 0.3), (25, 0.6)],
    &[(1, 0.3), (4, 0.8), (7, 0.5), (9, 0.3), (15, 0.5), (17, 0.4), (20, 0.3), (23, 0.4)],
    &[(1, 0.9), (2, 0.9), (5, 0.6), (25, 0.7), (26, 0.6)],
];

fn prototype(table: &Prototypes, class: EmotionClass) -> [f64; AU_DIM] {
    let mut v = [0.0; AU_DIM];
    for &(au, w) in table[class.code()] {
        v[au_position(au).expect("prototype AU in set")] = w;
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    /// Subjects contributing micro-expression clips.
    pub mie_subjects: usize,
    /// How many of them form the held-out test fold.
    pub test_subjects: usize,
    pub mie_clips_per_subject_class: usize,
    pub mae_train_clips_per_class: usize,
    pub mae_test_clips_per_class: usize,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            mie_subjects: 24,
            test_subjects: 8,
            mie_clips_per_subject_class: 2,
            mae_train_clips_per_class: 40,
            mae_test_clips_per_class: 20,
            seed: 2022,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub subsets: Vec<SourceSet>,
    pub test_sources: SourceSet,
    pub num_identities: usize,
    pub samples_per_class_source: usize,
    /// `None` uses every annotated MiE clip.
    pub mie_triplets_per_class: Option<usize>,
    pub mae_triplets_per_class: usize,
    pub expert_triplets_per_class: usize,
    pub test_identities: usize,
    pub test_samples_per_class_source: usize,
    pub num_seeds: usize,
    pub base_seed: u64,
    pub num_permutations: usize,
    pub world: WorldConfig,
    pub sampler: SamplerConfig,
    pub generator: GeneratorParams,
    /// `None` derives a table from the class prototypes.
    pub expert_table: Option<ExpertTable>,
}

impl Default for ToyConfig {
    fn default() -> Self {
        use SourceTag::*;
        Self {
            subsets: vec![
                SourceSet::all(),
                SourceSet::of(&[MiE, MaE]),
                SourceSet::of(&[MiE, Expert]),
                SourceSet::of(&[MaE, Expert]),
                SourceSet::of(&[MiE]),
                SourceSet::of(&[MaE]),
                SourceSet::of(&[Expert]),
            ],
            test_sources: SourceSet::all(),
            num_identities: 1_000,
            samples_per_class_source: 1,
            mie_triplets_per_class: None,
            mae_triplets_per_class: 300,
            expert_triplets_per_class: 300,
            test_identities: 100,
            test_samples_per_class_source: 1,
            num_seeds: 20,
            base_seed: 0,
            num_permutations: 10_000,
            world: WorldConfig::default(),
            sampler: SamplerConfig::default(),
            // Enough render noise that the classifier does not saturate.
            generator: GeneratorParams {
                noise_sigma: 0.15,
                ..Default::default()
            },
            expert_table: None,
        }
    }
}

impl ToyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.subsets.is_empty() || self.subsets.iter().any(SourceSet::is_empty) {
            return bad("every source subset must be non-empty");
        }
        if self.test_sources.is_empty() {
            return bad("test_sources must be non-empty");
        }
        if self.num_seeds == 0 {
            return bad("num_seeds must be at least 1");
        }
        if self.num_identities == 0 || self.test_identities == 0 {
            return bad("identity counts must be positive");
        }
        if self.samples_per_class_source == 0 || self.test_samples_per_class_source == 0 {
            return bad("sample counts must be positive");
        }
        let w = &self.world;
        if w.test_subjects == 0 || w.test_subjects >= w.mie_subjects {
            return bad("world.test_subjects must be in 1..mie_subjects");
        }
        if w.mie_clips_per_subject_class == 0 || w.mae_train_clips_per_class == 0 || w.mae_test_clips_per_class == 0 {
            return bad("world clip counts must be positive");
        }
        self.sampler.validate()?;
        self.generator.validate()
    }
}

/// Expert table built from textbook class descriptions.
pub fn prototype_expert_table() -> ExpertTable {
    ExpertTable::new(EmotionClass::ALL.map(|class| {
        let entries = EXPERT_PROTOTYPES[class.code()]
            .iter()
            .map(|&(au, w)| ExpertEntry {
                au,
                p: (0.3 + 0.6 * w).min(0.95),
            })
            .collect();
        (class, entries)
    }))
    .expect("prototype table is valid")
}

pub const TOY_MIE_DATASET: &str = "toy-mie";
pub const TOY_MAE_DATASET: &str = "toy-mae";

/// Synthetic stand-in for the real AU corpora.
#[derive(Clone, Debug)]
pub struct ToyWorld {
    pub mie_clips: Vec<ClipRecord>,
    pub test_subjects: BTreeSet<(String, String)>,
    pub mae_train: Vec<ClipRecord>,
    pub mae_test: Vec<ClipRecord>,
    pub expert_table: ExpertTable,
}

fn gains(rng: &mut RngStream) -> [f64; AU_DIM] {
    let mut g = [0.0; AU_DIM];
    g.iter_mut().for_each(|v| *v = rng.uniform_f64(0.4, 1.6));
    g
}

fn clip_record(
    clip_id: String,
    dataset: &str,
    subject: &str,
    class: EmotionClass,
    onset: usize,
    apex: usize,
    frames: Vec<[f64; AU_DIM]>,
) -> ClipRecord {
    let n = frames.len();
    let series = frames
        .into_iter()
        .enumerate()
        .map(|(i, v)| (i, AuVector::new(v.map(|x| x.clamp(0.0, 1.0))).expect("clamped")))
        .collect();
    ClipRecord::new(
        ClipAnnotation {
            clip_id: clip_id.clone(),
            dataset: dataset.to_string(),
            subject_id: subject.to_string(),
            raw_label: class.as_str().to_string(),
            label: class,
            onset,
            apex,
            offset: None,
            n_frames: n,
        },
        AuTimeSeries::new(clip_id, series).expect("synthetic series is valid"),
    )
    .expect("synthetic clip is valid")
}

fn mie_clip(seed: u64, subject: &str, subject_gain: &[f64; AU_DIM], class: EmotionClass, j: usize) -> ClipRecord {
    let mut rng = RngStream::new(seed, &format!("world/mie/{subject}/{class}"), j as u64);
    let n = rng.uniform_int(20, 40) as usize;
    let onset = rng.uniform_int(2, 5) as usize;
    let apex = onset + rng.uniform_int(4, 10) as usize;
    let amplitude = rng.uniform_f64(0.15, 0.4);
    let proto = prototype(&MIE_PROTOTYPES, class);
    let mut target = [0.0; AU_DIM];
    for i in 0..AU_DIM {
        target[i] = amplitude * subject_gain[i] * proto[i];
    }
    // Subtle expressions leak into unrelated AUs.
    for _ in 0..2 {
        let i = rng.uniform_index(AU_DIM);
        target[i] += rng.uniform_f64(0.0, 0.2);
    }
    let frames = (0..n)
        .map(|f| {
            let ramp = if f <= onset {
                0.0
            } else if f <= apex {
                (f - onset) as f64 / (apex - onset) as f64
            } else {
                (1.0 - (f - apex) as f64 / (n - apex) as f64).max(0.0)
            };
            let mut v = [0.0; AU_DIM];
            for i in 0..AU_DIM {
                v[i] = ramp * target[i] + 0.015 * rng.standard_normal().abs();
            }
            v
        })
        .collect();
    clip_record(format!("{subject}-{class}-{j}"), TOY_MIE_DATASET, subject, class, onset, apex, frames)
}

fn mae_clip(seed: u64, split: &str, class: EmotionClass, j: usize) -> ClipRecord {
    let mut rng = RngStream::new(seed, &format!("world/mae/{split}/{class}"), j as u64);
    let n = rng.uniform_int(30, 60) as usize;
    let amplitude = rng.uniform_f64(0.7, 1.0);
    let gain = gains(&mut rng);
    let proto = prototype(&MAE_PROTOTYPES, class);
    let peak = 0.8 * (n - 1) as f64;
    let frames = (0..n)
        .map(|f| {
            let ramp = (f as f64 / peak).min(1.0);
            let mut v = [0.0; AU_DIM];
            for i in 0..AU_DIM {
                v[i] = ramp * amplitude * gain[i] * proto[i] + 0.015 * rng.standard_normal().abs();
            }
            v
        })
        .collect();
    let subject = format!("actor-{split}-{class}-{j}");
    clip_record(format!("mae-{split}-{class}-{j}"), TOY_MAE_DATASET, &subject, class, 0, n - 1, frames)
}

impl ToyWorld {
    pub fn build(cfg: &WorldConfig, expert_table: Option<&ExpertTable>) -> Self {
        let subjects: Vec<String> = (0..cfg.mie_subjects).map(|s| format!("sub{s:02}")).collect();
        let mut mie_clips = Vec::new();
        for subject in &subjects {
            let gain = gains(&mut RngStream::new(cfg.seed, &format!("world/gain/{subject}"), 0));
            for class in EmotionClass::ALL {
                for j in 0..cfg.mie_clips_per_subject_class {
                    mie_clips.push(mie_clip(cfg.seed, subject, &gain, class, j));
                }
            }
        }
        let test_subjects = subjects[subjects.len() - cfg.test_subjects..]
            .iter()
            .map(|s| (TOY_MIE_DATASET.to_string(), s.clone()))
            .collect();
        let mae = |split: &str, per_class: usize| -> Vec<ClipRecord> {
            EmotionClass::ALL
                .iter()
                .flat_map(|&c| (0..per_class).map(move |j| mae_clip(cfg.seed, split, c, j)))
                .collect()
        };
        Self {
            mie_clips,
            test_subjects,
            mae_train: mae("train", cfg.mae_train_clips_per_class),
            mae_test: mae("test", cfg.mae_test_clips_per_class),
            expert_table: expert_table.cloned().unwrap_or_else(prototype_expert_table),
        }
    }

    fn is_test_clip(&self, clip: &ClipRecord) -> bool {
        let a = clip.annotation();
        self.test_subjects.contains(&(a.dataset.clone(), a.subject_id.clone()))
    }
}

/// Apex-minus-onset expression feature of a rendered sample.
pub fn expression_feature(sample: &RenderedSample) -> Vec<f64> {
    let first = &sample.frames[0].expression;
    let last = &sample.frames[sample.frames.len() - 1].expression;
    last.iter().zip(first).map(|(a, b)| a - b).collect()
}

/// Nearest-centroid classifier over the three classes.
#[derive(Clone, Debug, PartialEq)]
pub struct CentroidClassifier {
    centroids: [Vec<f64>; 3],
}

pub fn train_centroid_classifier(features: &[Vec<f64>], labels: &[EmotionClass]) -> Result<CentroidClassifier> {
    if features.len() != labels.len() {
        return Err(Error::LengthMismatch {
            pred: features.len(),
            truth: labels.len(),
        });
    }
    let dim = features.first().map_or(0, Vec::len);
    let mut sums = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    let mut counts = [0usize; 3];
    for (x, y) in features.iter().zip(labels) {
        if x.len() != dim {
            return Err(Error::InvalidConfig("feature vectors differ in length".into()));
        }
        counts[y.code()] += 1;
        for (s, v) in sums[y.code()].iter_mut().zip(x) {
            *s += v;
        }
    }
    for class in EmotionClass::ALL {
        let c = class.code();
        if counts[c] == 0 {
            return Err(Error::MissingClass(class));
        }
        sums[c].iter_mut().for_each(|s| *s /= counts[c] as f64);
    }
    Ok(CentroidClassifier { centroids: sums })
}

impl CentroidClassifier {
    pub fn centroid(&self, class: EmotionClass) -> &[f64] {
        &self.centroids[class.code()]
    }

    /// Nearest centroid by Euclidean distance; ties go to the lowest class code.
    pub fn predict(&self, x: &[f64]) -> EmotionClass {
        let mut best = (EmotionClass::Positive, f64::INFINITY);
        for class in EmotionClass::ALL {
            let d: f64 = self.centroids[class.code()].iter().zip(x).map(|(c, v)| (c - v).powi(2)).sum();
            if d < best.1 {
                best = (class, d);
            }
        }
        best.0
    }
}

struct TestSet {
    features: Vec<Vec<f64>>,
    labels: Vec<EmotionClass>,
}

struct Harness {
    world: ToyWorld,
    generator: MockGenerator,
    test: TestSet,
}

const TEST_POOL_PER_CLASS: usize = 100;

impl Harness {
    fn new(cfg: &ToyConfig) -> Result<Self> {
        cfg.validate()?;
        let world = ToyWorld::build(&cfg.world, cfg.expert_table.as_ref());
        let generator = MockGenerator::new(cfg.generator)?;

        let test_mie: Vec<ClipRecord> = world.mie_clips.iter().filter(|c| world.is_test_clip(c)).cloned().collect();
        let mut counts = ClassSourceCounts::default();
        for class in EmotionClass::ALL {
            let available = test_mie.iter().filter(|c| c.label() == class).count();
            counts.set(class, SourceTag::MiE, available);
            counts.set(class, SourceTag::MaE, TEST_POOL_PER_CLASS);
            counts.set(class, SourceTag::Expert, TEST_POOL_PER_CLASS);
        }
        let test_seed = cfg.world.seed ^ 0x7E57_7E57;
        let pool = build_triplet_pool(&test_mie, &world.mae_test, &world.expert_table, &counts, &cfg.sampler, test_seed)?;
        let comp = CompositionConfig {
            num_identities: cfg.test_identities,
            samples_per_id: ClassSourceCounts::uniform(cfg.test_sources, cfg.test_samples_per_class_source),
            frames_per_sample: 2,
            seed: test_seed,
            ..Default::default()
        };
        let manifest = compose(&pool, &IdentityPool::numbered("test-", cfg.test_identities), &comp)?;
        let rendered = generator.render_manifest(&manifest);
        let test = TestSet {
            features: rendered.iter().map(expression_feature).collect(),
            labels: manifest.samples.iter().map(|s| s.label).collect(),
        };
        Ok(Self { world, generator, test })
    }

    fn run(&self, cfg: &ToyConfig, subset: SourceSet, seed: u64) -> Result<(f64, f64)> {
        let mut counts = ClassSourceCounts::default();
        for class in EmotionClass::ALL {
            for source in subset.iter() {
                let n = match source {
                    SourceTag::MiE => {
                        let available = self.world.mie_clips.iter().filter(|c| c.label() == class).count();
                        cfg.mie_triplets_per_class.unwrap_or(available)
                    }
                    SourceTag::MaE => cfg.mae_triplets_per_class,
                    SourceTag::Expert => cfg.expert_triplets_per_class,
                };
                counts.set(class, source, n);
            }
        }
        let pool = build_triplet_pool(
            &self.world.mie_clips,
            &self.world.mae_train,
            &self.world.expert_table,
            &counts,
            &cfg.sampler,
            seed,
        )?;
        let comp = CompositionConfig {
            num_identities: cfg.num_identities,
            samples_per_id: ClassSourceCounts::uniform(subset, cfg.samples_per_class_source),
            frames_per_sample: 2,
            seed,
            ..Default::default()
        };
        let manifest = compose(&pool, &IdentityPool::numbered("train-", cfg.num_identities), &comp)?;
        let (manifest, _) = apply_fold_exclusion(&manifest, &self.world.test_subjects);
        let rendered = self.generator.render_manifest(&manifest);
        let features: Vec<Vec<f64>> = rendered.iter().map(expression_feature).collect();
        let labels: Vec<EmotionClass> = manifest.samples.iter().map(|s| s.label).collect();
        let classifier = train_centroid_classifier(&features, &labels)?;
        let pred: Vec<EmotionClass> = self.test.features.iter().map(|x| classifier.predict(x)).collect();
        let cm = confusion(&pred, &self.test.labels)?;
        Ok((uf1(&cm)?, uar(&cm)?))
    }

    fn evaluate(&self, cfg: &ToyConfig, subset: SourceSet) -> Result<SubsetResult> {
        let runs = par::try_map_indexed(cfg.num_seeds, |i| self.run(cfg, subset, run_seed(cfg, i)))?;
        let (uf1s, uars): (Vec<f64>, Vec<f64>) = runs.into_iter().unzip();
        Ok(SubsetResult::new(subset, uf1s, uars))
    }
}

fn run_seed(cfg: &ToyConfig, i: usize) -> u64 {
    cfg.base_seed.wrapping_add(i as u64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    pub subset: SourceSet,
    pub label: String,
    pub uf1: Vec<f64>,
    pub uar: Vec<f64>,
    pub mean_uf1: f64,
    pub std_uf1: f64,
    pub mean_uar: f64,
    pub std_uar: f64,
}

impl SubsetResult {
    fn new(subset: SourceSet, uf1: Vec<f64>, uar: Vec<f64>) -> Self {
        Self {
            label: subset.label(),
            subset,
            mean_uf1: mean(&uf1),
            std_uf1: sample_std(&uf1),
            mean_uar: mean(&uar),
            std_uar: sample_std(&uar),
            uf1,
            uar,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairwiseSignificance {
    pub a: String,
    pub b: String,
    pub metric: String,
    pub p_value: f64,
    pub tag: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub num_seeds: usize,
    pub test_sources: SourceSet,
    pub results: Vec<SubsetResult>,
    pub comparisons: Vec<PairwiseSignificance>,
}

impl AblationReport {
    pub fn result(&self, subset: SourceSet) -> Option<&SubsetResult> {
        self.results.iter().find(|r| r.subset == subset)
    }
}

pub fn run_ablation(cfg: &ToyConfig) -> Result<AblationReport> {
    let harness = Harness::new(cfg)?;
    let results = cfg
        .subsets
        .iter()
        .map(|&s| harness.evaluate(cfg, s))
        .collect::<Result<Vec<_>>>()?;
    let mut comparisons = Vec::new();
    for (i, a) in results.iter().enumerate() {
        for b in &results[i + 1..] {
            for (metric, va, vb) in [("uf1", &a.uf1, &b.uf1), ("uar", &a.uar, &b.uar)] {
                let rng = RngStream::new(cfg.base_seed, &format!("ablation/permutation/{}/{}/{metric}", a.label, b.label), 0);
                let p = permutation_test(
                    &RunSeries::new(a.label.clone(), va.clone())?,
                    &RunSeries::new(b.label.clone(), vb.clone())?,
                    cfg.num_permutations,
                    &rng,
                );
                comparisons.push(PairwiseSignificance {
                    a: a.label.clone(),
                    b: b.label.clone(),
                    metric: metric.to_string(),
                    p_value: p,
                    tag: significance_star(p)?.to_string(),
                });
            }
        }
    }
    Ok(AblationReport {
        num_seeds: cfg.num_seeds,
        test_sources: cfg.test_sources,
        results,
        comparisons,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingAxis {
    /// Total pool size, split evenly over the six MaE/Expert buckets.
    Triplets,
    /// Number of training identities, MaE + Expert sources.
    Identities,
    /// Total training samples over all three sources at a fixed identity count.
    Samples,
}

impl ScalingAxis {
    pub fn subset(self) -> SourceSet {
        match self {
            Self::Triplets | Self::Identities => SourceSet::of(&[SourceTag::MaE, SourceTag::Expert]),
            Self::Samples => SourceSet::all(),
        }
    }

    /// The configuration a grid point runs, or why it is infeasible.
    pub fn configure(self, base: &ToyConfig, value: usize) -> std::result::Result<ToyConfig, String> {
        let mut cfg = base.clone();
        cfg.subsets = vec![self.subset()];
        match self {
            Self::Triplets => {
                if value == 0 || value % 6 != 0 {
                    return Err(format!("{value} triplets cannot be split evenly over 6 buckets"));
                }
                cfg.mae_triplets_per_class = value / 6;
                cfg.expert_triplets_per_class = value / 6;
            }
            Self::Identities => {
                if value == 0 {
                    return Err("identity count must be positive".into());
                }
                cfg.num_identities = value;
            }
            Self::Samples => {
                let per_id = cfg.num_identities * 9;
                if value == 0 || value % per_id != 0 {
                    return Err(format!(
                        "{value} samples is not a positive multiple of {per_id} (9 per identity)"
                    ));
                }
                cfg.samples_per_class_source = value / per_id;
            }
        }
        Ok(cfg)
    }
}

impl fmt::Display for ScalingAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Triplets => "triplets",
            Self::Identities => "identities",
            Self::Samples => "samples",
        })
    }
}

impl FromStr for ScalingAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "triplets" => Ok(Self::Triplets),
            "identities" | "ids" => Ok(Self::Identities),
            "samples" => Ok(Self::Samples),
            _ => Err(Error::InvalidConfig(format!("unknown scaling axis {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub value: usize,
    pub result: Option<SubsetResult>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingCurve {
    pub axis: ScalingAxis,
    pub subset: SourceSet,
    pub points: Vec<ScalingPoint>,
}

impl ScalingCurve {
    /// `axis_value,mean_uf1,std_uf1,mean_uar,std_uar`; infeasible points
    /// become `#` comment lines.
    pub fn write_csv<W: Write>(&self, mut out: W, prefix_comment: Option<&str>) -> Result<()> {
        if let Some(c) = prefix_comment {
            writeln!(out, "# {c}")?;
        }
        writeln!(out, "axis_value,mean_uf1,std_uf1,mean_uar,std_uar")?;
        for p in &self.points {
            match (&p.result, &p.error) {
                (Some(r), _) => {
                    let mut line = p.value.to_string();
                    for v in [r.mean_uf1, r.std_uf1, r.mean_uar, r.std_uar] {
                        line.push(',');
                        push_fixed(&mut line, v);
                    }
                    writeln!(out, "{line}")?;
                }
                (None, Some(e)) => writeln!(out, "# {}: {e}", p.value)?,
                (None, None) => {}
            }
        }
        Ok(())
    }
}

/// One ablation per grid point (in parallel over seeds); infeasible points
/// are recorded and the sweep continues.
pub fn run_scaling(axis: ScalingAxis, grid: &[usize], base: &ToyConfig) -> Result<ScalingCurve> {
    if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("scaling grid must be non-empty and strictly increasing".into()));
    }
    let harness = Harness::new(base)?;
    let subset = axis.subset();
    let points = grid
        .iter()
        .map(|&value| {
            let outcome = axis
                .configure(base, value)
                .and_then(|cfg| {
                    cfg.validate().map_err(|e| e.to_string())?;
                    harness.evaluate(&cfg, subset).map_err(|e| e.to_string())
                });
            match outcome {
                Ok(r) => ScalingPoint { value, result: Some(r), error: None },
                Err(e) => ScalingPoint { value, result: None, error: Some(e) },
            }
        })
        .collect();
    Ok(ScalingCurve { axis, subset, points })
}
