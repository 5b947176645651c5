//! The three AU triplet sources and the triplet pool.
//!
//! * MiE: onset and apex rows of an annotated micro-expression clip, verbatim.
//! * MaE: frame 0 of a macro-expression clip as onset, apex drawn uniformly
//!   from the frame window `[max(1, floor(alpha n)), floor(beta n)]`.
//! * Expert: zero onset; each AU listed for the class is activated with its
//!   table probability and, when active, gets an intensity from
//!   `Uniform[mu, nu]`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::au::{
    au_position, AuTriplet, AuVector, ClassSourceCounts, EmotionClass, Provenance, SourceTag, AU_DIM,
};
use crate::format::{is_header_line, push_au_vector, push_json_str, ArtifactHeader};
use crate::ingest::ClipRecord;
use crate::rng::RngStream;
use crate::{par, Error, Result};

/// Slack used when flooring `alpha * n` so that e.g. `0.3 * 20` lands on 6.
const FLOOR_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    pub nu: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 0.5,
            mu: 0.1,
            nu: 0.3,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        let closed = |v: f64| (0.0..=1.0).contains(&v);
        if !(open(self.alpha) && open(self.beta) && self.alpha <= self.beta) {
            return Err(Error::InvalidConfig(format!(
                "need 0 < alpha <= beta < 1, got alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        if !(closed(self.mu) && closed(self.nu) && self.mu <= self.nu) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= mu <= nu <= 1, got mu={} nu={}",
                self.mu, self.nu
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertEntry {
    pub au: u8,
    pub p: f64,
}

/// Per-class AU activation probabilities. Unlisted AUs have probability 0.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExpertTable {
    // Indexed by class code, entries sorted by AU position.
    entries: [Vec<ExpertEntry>; 3],
}

impl ExpertTable {
    pub fn new(per_class: impl IntoIterator<Item = (EmotionClass, Vec<ExpertEntry>)>) -> Result<Self> {
        let mut entries: [Vec<ExpertEntry>; 3] = Default::default();
        for (class, list) in per_class {
            let mut seen = BTreeSet::new();
            for (i, e) in list.iter().enumerate() {
                let at = || format!("{class}[{i}] (AU{})", e.au);
                if au_position(e.au).is_none() {
                    return Err(Error::InvalidExpertTable(format!("{}: AU not in the AU index set", at())));
                }
                if !(e.p.is_finite() && (0.0..=1.0).contains(&e.p)) {
                    return Err(Error::InvalidExpertTable(format!("{}: probability {} outside [0, 1]", at(), e.p)));
                }
                if !seen.insert(e.au) {
                    return Err(Error::InvalidExpertTable(format!("{}: duplicate AU", at())));
                }
            }
            let mut sorted = list;
            sorted.sort_by_key(|e| e.au);
            entries[class.code()] = sorted;
        }
        Ok(Self { entries })
    }

    /// Parses `{"positive": [{"au": 12, "p": 1.0}, ...], ...}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, Vec<ExpertEntry>> =
            serde_json::from_str(text).map_err(|e| Error::InvalidExpertTable(e.to_string()))?;
        let per_class = raw
            .into_iter()
            .map(|(k, v)| {
                let class = k
                    .parse::<EmotionClass>()
                    .map_err(|_| Error::InvalidExpertTable(format!("unknown class {k:?}")))?;
                Ok((class, v))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(per_class)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes")
    }

    /// The shipped configuration table (a starting point, not ground truth).
    pub fn default_table() -> Self {
        Self::from_json(include_str!("../data/expert_table.json")).expect("bundled expert table is valid")
    }

    pub fn entries(&self, class: EmotionClass) -> &[ExpertEntry] {
        &self.entries[class.code()]
    }

    /// Activation probability of an AU for a class (0 when unlisted).
    pub fn probability(&self, class: EmotionClass, au: u8) -> f64 {
        self.entries(class).iter().find(|e| e.au == au).map_or(0.0, |e| e.p)
    }
}

impl Serialize for ExpertTable {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_map(EmotionClass::ALL.iter().map(|c| (c.as_str(), &self.entries[c.code()])))
    }
}

impl<'de> Deserialize<'de> for ExpertTable {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = BTreeMap::<EmotionClass, Vec<ExpertEntry>>::deserialize(deserializer)?;
        Self::new(raw).map_err(serde::de::Error::custom)
    }
}

pub fn extract_mie_triplet(clip: &ClipRecord) -> AuTriplet {
    let ann = clip.annotation();
    let frame = |i: usize| {
        *clip
            .series()
            .frame(i)
            .expect("ClipRecord guarantees onset and apex coverage")
    };
    AuTriplet {
        onset: frame(ann.onset),
        apex: frame(ann.apex),
        label: clip.label(),
        source: SourceTag::MiE,
        provenance: Provenance {
            dataset: ann.dataset.clone(),
            clip_id: ann.clip_id.clone(),
            subject_id: ann.subject_id.clone(),
        },
    }
}

/// Inclusive apex window `(lo, hi)` for a clip of `n` frames.
pub fn mae_apex_window(n: usize, cfg: &SamplerConfig) -> Result<(usize, usize)> {
    let floor = |x: f64| (x * n as f64 + FLOOR_EPS).floor() as usize;
    let hi = floor(cfg.beta);
    if n < 2 || hi < 1 {
        return Err(Error::WindowEmpty(n));
    }
    let lo = floor(cfg.alpha).max(1);
    Ok((lo, hi.max(lo)))
}

pub fn select_mae_apex_index(n: usize, cfg: &SamplerConfig, rng: &mut RngStream) -> Result<usize> {
    let (lo, hi) = mae_apex_window(n, cfg)?;
    Ok(rng.uniform_int(lo as u64, hi as u64) as usize)
}

pub fn sample_mae_triplet(clip: &ClipRecord, cfg: &SamplerConfig, rng: &mut RngStream) -> Result<AuTriplet> {
    let ann = clip.annotation();
    let apex_index = select_mae_apex_index(ann.n_frames, cfg, rng)?;
    let series = clip.series();
    let onset = *series.frame(0).expect("series starts at frame 0");
    let apex = *series
        .frame(apex_index)
        .ok_or_else(|| Error::FrameCoverage(ann.clip_id.clone()))?;
    Ok(AuTriplet {
        onset,
        apex,
        label: clip.label(),
        source: SourceTag::MaE,
        provenance: Provenance {
            dataset: ann.dataset.clone(),
            clip_id: ann.clip_id.clone(),
            subject_id: ann.subject_id.clone(),
        },
    })
}

pub fn sample_expert_triplet(
    label: EmotionClass,
    table: &ExpertTable,
    cfg: &SamplerConfig,
    rng: &mut RngStream,
) -> AuTriplet {
    let mut apex = [0.0; AU_DIM];
    for entry in table.entries(label) {
        if rng.bernoulli(entry.p) {
            let pos = au_position(entry.au).expect("validated on construction");
            apex[pos] = rng.uniform_f64(cfg.mu, cfg.nu);
        }
    }
    AuTriplet {
        onset: AuVector::zeros(),
        apex: AuVector::new(apex).expect("intensities lie in [mu, nu]"),
        label,
        source: SourceTag::Expert,
        provenance: Provenance::synthetic("expert", ""),
    }
}

/// Triplets plus a per-(class, source) index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TripletPool {
    triplets: Vec<AuTriplet>,
    buckets: [[Vec<usize>; 3]; 3],
}

impl TripletPool {
    pub fn new(triplets: Vec<AuTriplet>) -> Self {
        let mut buckets: [[Vec<usize>; 3]; 3] = Default::default();
        for (i, t) in triplets.iter().enumerate() {
            buckets[t.label.code()][t.source.index()].push(i);
        }
        Self { triplets, buckets }
    }

    pub fn triplets(&self) -> &[AuTriplet] {
        &self.triplets
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// Indices into [`Self::triplets`] for one (class, source) pair, in pool order.
    pub fn bucket(&self, class: EmotionClass, source: SourceTag) -> &[usize] {
        &self.buckets[class.code()][source.index()]
    }

    pub fn count(&self, class: EmotionClass, source: SourceTag) -> usize {
        self.bucket(class, source).len()
    }

    /// JSON Lines dump, optionally preceded by a header line.
    pub fn to_jsonl(&self, header: Option<&ArtifactHeader>) -> String {
        let mut out = String::with_capacity(self.triplets.len() * 400);
        if let Some(h) = header {
            out.push_str(&h.to_json_line());
            out.push('\n');
        }
        for t in &self.triplets {
            out.push_str(&triplet_json(t));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<(Option<ArtifactHeader>, Self)> {
        let mut header = None;
        let mut triplets = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            if i == 0 && is_header_line(line) {
                header = Some(ArtifactHeader::parse(line, "pool")?);
                continue;
            }
            triplets.push(
                parse_triplet_json(line).map_err(|e| Error::Format(format!("pool line {}: {e}", i + 1)))?,
            );
        }
        Ok((header, Self::new(triplets)))
    }
}

pub fn triplet_json(t: &AuTriplet) -> String {
    let mut out = String::with_capacity(400);
    out.push_str("{\"source\":");
    push_json_str(&mut out, t.source.as_str());
    out.push_str(",\"label\":");
    push_json_str(&mut out, t.label.as_str());
    out.push_str(",\"onset\":");
    push_au_vector(&mut out, &t.onset);
    out.push_str(",\"apex\":");
    push_au_vector(&mut out, &t.apex);
    out.push_str(",\"provenance\":");
    push_provenance(&mut out, &t.provenance);
    out.push('}');
    out
}

pub(crate) fn push_provenance(out: &mut String, p: &Provenance) {
    out.push_str("{\"dataset\":");
    push_json_str(out, &p.dataset);
    out.push_str(",\"clip_id\":");
    push_json_str(out, &p.clip_id);
    out.push_str(",\"subject_id\":");
    push_json_str(out, &p.subject_id);
    out.push('}');
}

#[derive(Deserialize)]
struct TripletLine {
    source: SourceTag,
    label: EmotionClass,
    onset: Vec<f64>,
    apex: Vec<f64>,
    provenance: Provenance,
}

pub fn parse_triplet_json(line: &str) -> Result<AuTriplet> {
    let raw: TripletLine = serde_json::from_str(line)?;
    AuTriplet::new(
        AuVector::from_slice(&raw.onset)?,
        AuVector::from_slice(&raw.apex)?,
        raw.label,
        raw.source,
        raw.provenance,
    )
}

fn pool_purpose(source: SourceTag, class: EmotionClass) -> String {
    format!("pool/{source}/{class}")
}

/// Builds a pool with exactly the requested number of triplets per
/// (class, source).
///
/// MiE triplets are extracted from the first `n` annotated clips of each
/// class in input order. MaE triplets pick a clip of the class uniformly and
/// then an apex in the window; Expert triplets are sampled from the table.
/// Triplet `k` of a bucket draws from stream `(seed, "pool/<source>/<class>", k)`.
pub fn build_triplet_pool(
    mie_clips: &[ClipRecord],
    mae_clips: &[ClipRecord],
    table: &ExpertTable,
    counts: &ClassSourceCounts,
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<TripletPool> {
    cfg.validate()?;
    let mut triplets = Vec::with_capacity(counts.total());
    for class in EmotionClass::ALL {
        let requested = counts.get(class, SourceTag::MiE);
        let available: Vec<&ClipRecord> = mie_clips.iter().filter(|c| c.label() == class).collect();
        if requested > available.len() {
            return Err(Error::InsufficientMiEClips {
                class,
                requested,
                available: available.len(),
            });
        }
        triplets.extend(available[..requested].iter().map(|c| extract_mie_triplet(c)));

        let requested = counts.get(class, SourceTag::MaE);
        if requested > 0 {
            let clips: Vec<&ClipRecord> = mae_clips.iter().filter(|c| c.label() == class).collect();
            if clips.is_empty() {
                return Err(Error::NoMaEClips(class));
            }
            let purpose = pool_purpose(SourceTag::MaE, class);
            let sampled = par::try_map_indexed(requested, |k| {
                let mut rng = RngStream::new(seed, &purpose, k as u64);
                let clip = clips[rng.uniform_index(clips.len())];
                sample_mae_triplet(clip, cfg, &mut rng)
            })?;
            triplets.extend(sampled);
        }

        let requested = counts.get(class, SourceTag::Expert);
        let purpose = pool_purpose(SourceTag::Expert, class);
        triplets.extend(par::map_indexed(requested, |k| {
            let mut rng = RngStream::new(seed, &purpose, k as u64);
            let mut t = sample_expert_triplet(class, table, cfg, &mut rng);
            t.provenance.clip_id = format!("expert-{class}-{k}");
            t
        }));
    }
    Ok(TripletPool::new(triplets))
}
