//! Dataset manifest composition.
//!
//! Every identity receives, for each (class, source) pair, the configured
//! number of samples. Sample `k` of a pair is an independent uniform draw
//! (with replacement) from the matching pool bucket, addressed by stream
//! `(seed, "compose/<class>/<source>", identity_index * count + k)`.

use std::collections::{BTreeSet, HashSet};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::au::{AuTriplet, AuVector, ClassSourceCounts, EmotionClass, Provenance, SourceSet, SourceTag, AU_DIM};
use crate::format::{config_digest, is_header_line, push_au_vector, push_json_str, ArtifactHeader};
use crate::ingest::IdentityPool;
use crate::rng::RngStream;
use crate::samplers::{push_provenance, TripletPool};
use crate::{par, Error, Result};

/// Caps on how many triplets of each pool bucket may be drawn from. A cap
/// applies per (class, source) bucket; the first `n` triplets in pool order
/// are eligible.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolLimits {
    pub mie: Option<usize>,
    pub mae: Option<usize>,
    pub expert: Option<usize>,
}

impl PoolLimits {
    pub fn get(&self, source: SourceTag) -> Option<usize> {
        match source {
            SourceTag::MiE => self.mie,
            SourceTag::MaE => self.mae,
            SourceTag::Expert => self.expert,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositionConfig {
    pub num_identities: usize,
    pub samples_per_id: ClassSourceCounts,
    #[serde(default)]
    pub pool_limits: PoolLimits,
    #[serde(default = "default_frames")]
    pub frames_per_sample: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_frames() -> usize {
    2
}

impl Default for CompositionConfig {
    /// The full-scale profile: 5,000 identities, one sample per class and
    /// source each, so 9 samples per identity and 45,000 overall.
    fn default() -> Self {
        Self {
            num_identities: 5_000,
            samples_per_id: ClassSourceCounts::uniform(SourceSet::all(), 1),
            pool_limits: PoolLimits::default(),
            frames_per_sample: 2,
            seed: 0,
        }
    }
}

impl CompositionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_identities == 0 {
            return Err(Error::InvalidConfig("num_identities must be positive".into()));
        }
        if self.frames_per_sample != 2 && self.frames_per_sample != 10 {
            return Err(Error::InvalidConfig(format!(
                "frames_per_sample must be 2 or 10, got {}",
                self.frames_per_sample
            )));
        }
        for (source, limit) in SourceTag::ALL.iter().map(|&s| (s, self.pool_limits.get(s))) {
            if limit == Some(0) {
                return Err(Error::InvalidConfig(format!("pool limit for {source} must be positive")));
            }
        }
        Ok(())
    }

    pub fn samples_per_identity(&self) -> usize {
        self.samples_per_id.total()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleSpec {
    pub sample_id: String,
    pub identity_id: String,
    pub face_ref: String,
    pub label: EmotionClass,
    pub source: SourceTag,
    pub frames: Vec<AuVector>,
    pub provenance: Provenance,
}

impl SampleSpec {
    pub fn onset(&self) -> &AuVector {
        &self.frames[0]
    }

    pub fn apex(&self) -> &AuVector {
        self.frames.last().expect("samples carry at least two frames")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetManifest {
    pub header: ArtifactHeader,
    pub samples: Vec<SampleSpec>,
}

pub const MANIFEST_KIND: &str = "manifest";

impl DatasetManifest {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count_by_class(&self) -> [usize; 3] {
        let mut counts = [0; 3];
        for s in &self.samples {
            counts[s.label.code()] += 1;
        }
        counts
    }

    fn refresh_header(&mut self) {
        self.header
            .extra
            .insert("num_samples".into(), serde_json::Value::from(self.samples.len()));
    }

    /// Header line followed by one sample per line, fields in the fixed order
    /// `sample_id, identity_id, face_ref, label, source, frames, provenance`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(self.header.to_json_line().as_bytes())?;
        out.write_all(b"\n")?;
        let mut line = String::with_capacity(1024);
        for s in &self.samples {
            line.clear();
            push_sample_json(&mut line, s);
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("manifest is UTF-8")
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let header = match lines.next() {
            Some((_, line)) if is_header_line(line) => ArtifactHeader::parse(line, MANIFEST_KIND)?,
            _ => return Err(Error::Format("manifest must start with a header line".into())),
        };
        let mut ids = HashSet::new();
        let mut samples = Vec::new();
        for (i, line) in lines {
            let s = parse_sample_json(line).map_err(|e| Error::Format(format!("manifest line {}: {e}", i + 1)))?;
            if !ids.insert(s.sample_id.clone()) {
                return Err(Error::DuplicateSampleId(s.sample_id));
            }
            samples.push(s);
        }
        Ok(Self { header, samples })
    }
}

fn push_sample_json(out: &mut String, s: &SampleSpec) {
    out.push_str("{\"sample_id\":");
    push_json_str(out, &s.sample_id);
    out.push_str(",\"identity_id\":");
    push_json_str(out, &s.identity_id);
    out.push_str(",\"face_ref\":");
    push_json_str(out, &s.face_ref);
    out.push_str(",\"label\":");
    push_json_str(out, s.label.as_str());
    out.push_str(",\"source\":");
    push_json_str(out, s.source.as_str());
    out.push_str(",\"frames\":[");
    for (i, f) in s.frames.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        push_au_vector(out, f);
    }
    out.push_str("],\"provenance\":");
    push_provenance(out, &s.provenance);
    out.push('}');
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleLine {
    sample_id: String,
    identity_id: String,
    face_ref: String,
    label: EmotionClass,
    source: SourceTag,
    frames: Vec<Vec<f64>>,
    provenance: Provenance,
}

fn parse_sample_json(line: &str) -> Result<SampleSpec> {
    let raw: SampleLine = serde_json::from_str(line)?;
    if raw.frames.len() < 2 {
        return Err(Error::InvalidFrameCount(raw.frames.len()));
    }
    let frames = raw
        .frames
        .iter()
        .map(|f| AuVector::from_slice(f))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleSpec {
        sample_id: raw.sample_id,
        identity_id: raw.identity_id,
        face_ref: raw.face_ref,
        label: raw.label,
        source: raw.source,
        frames,
        provenance: raw.provenance,
    })
}

/// `frames` AU vectors on the straight line from onset to apex. The two
/// endpoints are copied from the triplet, interior frames are
/// `onset + k/(frames-1) * (apex - onset)`.
pub fn interpolate_sequence(triplet: &AuTriplet, frames: usize) -> Result<Vec<AuVector>> {
    if frames < 2 {
        return Err(Error::InvalidFrameCount(frames));
    }
    let (onset, apex) = (triplet.onset.values(), triplet.apex.values());
    let last = frames - 1;
    let mut out = Vec::with_capacity(frames);
    out.push(triplet.onset);
    for k in 1..last {
        let t = k as f64 / last as f64;
        let mut v = [0.0; AU_DIM];
        for i in 0..AU_DIM {
            let (lo, hi) = if onset[i] <= apex[i] { (onset[i], apex[i]) } else { (apex[i], onset[i]) };
            v[i] = (onset[i] + t * (apex[i] - onset[i])).clamp(lo, hi);
        }
        out.push(AuVector::new(v).expect("convex combination stays in [0, 1]"));
    }
    out.push(triplet.apex);
    Ok(out)
}

fn compose_purpose(class: EmotionClass, source: SourceTag) -> String {
    format!("compose/{class}/{source}")
}

/// Composes a manifest over the first `cfg.num_identities` identities.
pub fn compose(pool: &TripletPool, identities: &IdentityPool, cfg: &CompositionConfig) -> Result<DatasetManifest> {
    cfg.validate()?;
    if identities.is_empty() {
        return Err(Error::EmptyIdentityPool);
    }
    if cfg.num_identities > identities.len() {
        return Err(Error::InsufficientIdentities {
            requested: cfg.num_identities,
            available: identities.len(),
        });
    }

    struct Plan<'a> {
        class: EmotionClass,
        source: SourceTag,
        count: usize,
        bucket: &'a [usize],
        purpose: String,
    }
    let mut plans = Vec::new();
    for (class, source, count) in cfg.samples_per_id.iter() {
        if count == 0 {
            continue;
        }
        let full = pool.bucket(class, source);
        let bucket = match cfg.pool_limits.get(source) {
            Some(limit) => &full[..limit.min(full.len())],
            None => full,
        };
        if bucket.is_empty() {
            return Err(Error::MissingTripletClass { class, tag: source });
        }
        plans.push(Plan {
            class,
            source,
            count,
            bucket,
            purpose: compose_purpose(class, source),
        });
    }

    let frames = cfg.frames_per_sample;
    let per_identity = par::try_map_indexed(cfg.num_identities, |i| -> Result<Vec<SampleSpec>> {
        let identity = &identities.entries()[i];
        let mut out = Vec::with_capacity(cfg.samples_per_identity());
        for plan in &plans {
            for k in 0..plan.count {
                let ordinal = (i * plan.count + k) as u64;
                let mut rng = RngStream::new(cfg.seed, &plan.purpose, ordinal);
                let triplet = &pool.triplets()[plan.bucket[rng.uniform_index(plan.bucket.len())]];
                out.push(SampleSpec {
                    sample_id: format!("{}:{}:{}:{k}", identity.id, plan.class, plan.source),
                    identity_id: identity.id.clone(),
                    face_ref: identity.face_ref.clone(),
                    label: plan.class,
                    source: plan.source,
                    frames: interpolate_sequence(triplet, frames)?,
                    provenance: triplet.provenance.clone(),
                });
            }
        }
        Ok(out)
    })?;

    let header = ArtifactHeader::new(MANIFEST_KIND, config_digest(cfg), cfg.seed)
        .with_extra("frames_per_sample", frames);
    let mut manifest = DatasetManifest {
        header,
        samples: per_identity.into_iter().flatten().collect(),
    };
    manifest.refresh_header();
    Ok(manifest)
}

/// Drops MiE-sourced samples whose triplet came from a test subject
/// (`(dataset, subject_id)` pairs). Returns the filtered manifest and the
/// number of removed samples.
pub fn apply_fold_exclusion(
    manifest: &DatasetManifest,
    test_subjects: &BTreeSet<(String, String)>,
) -> (DatasetManifest, usize) {
    let excluded = |s: &SampleSpec| {
        s.source == SourceTag::MiE
            && test_subjects.contains(&(s.provenance.dataset.clone(), s.provenance.subject_id.clone()))
    };
    let samples: Vec<SampleSpec> = manifest.samples.iter().filter(|s| !excluded(s)).cloned().collect();
    let removed = manifest.samples.len() - samples.len();
    let mut out = DatasetManifest {
        header: manifest.header.clone(),
        samples,
    };
    out.refresh_header();
    (out, removed)
}

/// Parses `dataset<TAB>subject_id` lines (`#` comments allowed).
pub fn parse_subject_list(text: &str) -> Result<BTreeSet<(String, String)>> {
    let mut out = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((dataset, subject)) = line.split_once('\t') else {
            return Err(Error::MalformedLine {
                line: i + 1,
                reason: "expected dataset<TAB>subject_id".into(),
            });
        };
        out.insert((dataset.trim().to_string(), subject.trim().to_string()));
    }
    Ok(out)
}
