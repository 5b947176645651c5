//! Domain vocabulary: the fixed AU index set, AU vectors, emotion classes,
//! source tags and triplets.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Length of every AU vector.
pub const AU_DIM: usize = 17;

/// FACS AU numbers, positionally aligned with [`AuVector`] entries.
pub const AU_NUMBERS: [u8; AU_DIM] = [1, 2, 4, 5, 6, 7, 9, 10, 12, 14, 15, 17, 20, 23, 25, 26, 45];

/// Position of an AU number in [`AU_NUMBERS`].
pub fn au_position(au: u8) -> Option<usize> {
    AU_NUMBERS.binary_search(&au).ok()
}

/// Default divisor for OpenFace-style 0-5 intensity columns.
pub const DEFAULT_SCALE_MAX: f64 = 5.0;

/// Maps a raw extractor intensity to `[0, 1]` by `clamp(raw / scale_max, 0, 1)`.
pub fn normalize_intensity(raw: f64, scale_max: f64) -> Result<f64> {
    if !raw.is_finite() {
        return Err(Error::NonFiniteIntensity(raw));
    }
    if !(scale_max.is_finite() && scale_max > 0.0) {
        return Err(Error::InvalidScale(scale_max));
    }
    Ok((raw / scale_max).clamp(0.0, 1.0))
}

/// Seventeen AU intensities, each in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuVector([f64; AU_DIM]);

impl AuVector {
    pub fn new(values: [f64; AU_DIM]) -> Result<Self> {
        for (i, v) in values.iter().enumerate() {
            if !(v.is_finite() && (0.0..=1.0).contains(v)) {
                return Err(Error::InvalidAuVector(format!(
                    "AU{} = {v} outside [0, 1]",
                    AU_NUMBERS[i]
                )));
            }
        }
        Ok(Self(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; AU_DIM] = values.try_into().map_err(|_| {
            Error::InvalidAuVector(format!("expected {AU_DIM} values, got {}", values.len()))
        })?;
        Self::new(arr)
    }

    pub const fn zeros() -> Self {
        Self([0.0; AU_DIM])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn values(&self) -> &[f64; AU_DIM] {
        &self.0
    }

    /// Intensity of a FACS AU number, if it belongs to the index set.
    pub fn get_au(&self, au: u8) -> Option<f64> {
        au_position(au).map(|i| self.0[i])
    }

    /// Returns a copy with one AU replaced. Panics if `au` is not in the set
    /// or `value` is outside `[0, 1]`.
    pub fn with_au(mut self, au: u8, value: f64) -> Self {
        let i = au_position(au).unwrap_or_else(|| panic!("AU{au} is not in the AU index set"));
        assert!((0.0..=1.0).contains(&value), "intensity {value} outside [0, 1]");
        self.0[i] = value;
        self
    }
}

impl Default for AuVector {
    fn default() -> Self {
        Self::zeros()
    }
}

/// The unified three-class label space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionClass {
    Positive,
    Negative,
    Surprise,
}

impl EmotionClass {
    pub const ALL: [EmotionClass; 3] = [Self::Positive, Self::Negative, Self::Surprise];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Option<Self> {
        Self::ALL.get(code).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Positive => "positive",
            Self::Negative => "negative",
            Self::Surprise => "surprise",
        }
    }
}

impl fmt::Display for EmotionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(Self::Positive),
            "negative" => Ok(Self::Negative),
            "surprise" => Ok(Self::Surprise),
            "" => Err(Error::EmptyLabel),
            _ => Err(Error::UnknownLabel(s.to_string())),
        }
    }
}

/// Where an AU triplet came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SourceTag {
    /// Extracted from a real micro-expression clip.
    #[serde(rename = "mie")]
    MiE,
    /// Early stage of a real macro-expression clip.
    #[serde(rename = "mae")]
    MaE,
    /// Sampled from an expert AU activation table.
    #[serde(rename = "expert")]
    Expert,
}

impl SourceTag {
    pub const ALL: [SourceTag; 3] = [Self::MiE, Self::MaE, Self::Expert];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::MiE => "mie",
            Self::MaE => "mae",
            Self::Expert => "expert",
        }
    }
}

impl fmt::Display for SourceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mie" => Ok(Self::MiE),
            "mae" => Ok(Self::MaE),
            "expert" | "exp" => Ok(Self::Expert),
            _ => Err(Error::InvalidConfig(format!("unknown AU source {s:?}"))),
        }
    }
}

/// A non-empty-or-empty subset of the three sources, kept in canonical order.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SourceSet([bool; 3]);

impl SourceSet {
    pub const fn all() -> Self {
        Self([true; 3])
    }

    pub fn of(sources: &[SourceTag]) -> Self {
        let mut set = Self::default();
        for s in sources {
            set.0[s.index()] = true;
        }
        set
    }

    pub fn contains(&self, s: SourceTag) -> bool {
        self.0[s.index()]
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    pub fn len(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = SourceTag> + '_ {
        SourceTag::ALL.into_iter().filter(|s| self.contains(*s))
    }

    /// `"mie+mae+expert"` style label.
    pub fn label(&self) -> String {
        self.iter().map(|s| s.as_str()).collect::<Vec<_>>().join("+")
    }
}

impl FromStr for SourceSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let tags = s
            .split(['+', ','])
            .filter(|p| !p.trim().is_empty())
            .map(SourceTag::from_str)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::of(&tags))
    }
}

impl Serialize for SourceSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for SourceSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let tags = Vec::<SourceTag>::deserialize(deserializer)?;
        Ok(Self::of(&tags))
    }
}

/// Per-source counts for one class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceCounts {
    #[serde(default)]
    pub mie: usize,
    #[serde(default)]
    pub mae: usize,
    #[serde(default)]
    pub expert: usize,
}

impl SourceCounts {
    pub fn get(&self, source: SourceTag) -> usize {
        match source {
            SourceTag::MiE => self.mie,
            SourceTag::MaE => self.mae,
            SourceTag::Expert => self.expert,
        }
    }

    pub fn set(&mut self, source: SourceTag, n: usize) {
        match source {
            SourceTag::MiE => self.mie = n,
            SourceTag::MaE => self.mae = n,
            SourceTag::Expert => self.expert = n,
        }
    }
}

/// A count for every (class, source) pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassSourceCounts {
    #[serde(default)]
    pub positive: SourceCounts,
    #[serde(default)]
    pub negative: SourceCounts,
    #[serde(default)]
    pub surprise: SourceCounts,
}

impl ClassSourceCounts {
    /// The same count for every class and every source in `sources`.
    pub fn uniform(sources: SourceSet, n: usize) -> Self {
        let mut out = Self::default();
        for class in EmotionClass::ALL {
            for source in sources.iter() {
                out.set(class, source, n);
            }
        }
        out
    }

    fn row(&self, class: EmotionClass) -> &SourceCounts {
        match class {
            EmotionClass::Positive => &self.positive,
            EmotionClass::Negative => &self.negative,
            EmotionClass::Surprise => &self.surprise,
        }
    }

    pub fn get(&self, class: EmotionClass, source: SourceTag) -> usize {
        self.row(class).get(source)
    }

    pub fn set(&mut self, class: EmotionClass, source: SourceTag, n: usize) {
        let row = match class {
            EmotionClass::Positive => &mut self.positive,
            EmotionClass::Negative => &mut self.negative,
            EmotionClass::Surprise => &mut self.surprise,
        };
        row.set(source, n);
    }

    pub fn total(&self) -> usize {
        EmotionClass::ALL
            .iter()
            .flat_map(|&c| SourceTag::ALL.iter().map(move |&s| self.get(c, s)))
            .sum()
    }

    /// `(class, source, count)` in canonical class-major order.
    pub fn iter(&self) -> impl Iterator<Item = (EmotionClass, SourceTag, usize)> + '_ {
        EmotionClass::ALL
            .into_iter()
            .flat_map(move |c| SourceTag::ALL.into_iter().map(move |s| (c, s, self.get(c, s))))
    }
}

/// Case-insensitive raw label -> class table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    entries: BTreeMap<String, EmotionClass>,
}

impl LabelMap {
    pub fn new(entries: impl IntoIterator<Item = (String, EmotionClass)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (raw, class) in entries {
            let key = raw.trim().to_lowercase();
            if key.is_empty() {
                return Err(Error::InvalidLabelMap("empty raw label".into()));
            }
            if let Some(prev) = map.insert(key.clone(), class) {
                if prev != class {
                    return Err(Error::InvalidLabelMap(format!(
                        "label {key:?} mapped to both {prev} and {class}"
                    )));
                }
            }
        }
        Ok(Self { entries: map })
    }

    /// Valence-based merge of the common MiE label vocabularies.
    pub fn default_merge() -> Self {
        use EmotionClass::*;
        let pairs = [
            ("happiness", Positive),
            ("positive", Positive),
            ("surprise", Surprise),
            ("anger", Negative),
            ("disgust", Negative),
            ("fear", Negative),
            ("sadness", Negative),
            ("repression", Negative),
            ("negative", Negative),
        ];
        Self::new(pairs.iter().map(|(k, v)| (k.to_string(), *v))).expect("default table is valid")
    }

    /// Parses a JSON object `{"raw label": "positive" | "negative" | "surprise"}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, String> = serde_json::from_str(text)
            .map_err(|e| Error::InvalidLabelMap(e.to_string()))?;
        let entries = raw
            .into_iter()
            .map(|(k, v)| {
                let class = v.parse::<EmotionClass>().map_err(|_| {
                    Error::InvalidLabelMap(format!("label {k:?} maps to unknown class {v:?}"))
                })?;
                Ok((k, class))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    pub fn map(&self, raw: &str) -> Result<EmotionClass> {
        let key = raw.trim().to_lowercase();
        if key.is_empty() {
            return Err(Error::EmptyLabel);
        }
        self.entries
            .get(&key)
            .copied()
            .ok_or_else(|| Error::UnknownLabel(raw.to_string()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Default for LabelMap {
    fn default() -> Self {
        Self::default_merge()
    }
}

pub fn map_label(raw: &str, map: &LabelMap) -> Result<EmotionClass> {
    map.map(raw)
}

/// Subject id recorded for triplets that do not come from a real person.
pub const SYNTHETIC_SUBJECT: &str = "synthetic";

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub dataset: String,
    pub clip_id: String,
    pub subject_id: String,
}

impl Provenance {
    pub fn synthetic(dataset: &str, clip_id: impl Into<String>) -> Self {
        Self {
            dataset: dataset.to_string(),
            clip_id: clip_id.into(),
            subject_id: SYNTHETIC_SUBJECT.to_string(),
        }
    }
}

/// Onset and apex conditions plus label: the unit that defines one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct AuTriplet {
    pub onset: AuVector,
    pub apex: AuVector,
    pub label: EmotionClass,
    pub source: SourceTag,
    pub provenance: Provenance,
}

impl AuTriplet {
    pub fn new(
        onset: AuVector,
        apex: AuVector,
        label: EmotionClass,
        source: SourceTag,
        provenance: Provenance,
    ) -> Result<Self> {
        if source == SourceTag::Expert && !onset.is_zero() {
            return Err(Error::InvalidTriplet("expert triplets must have a zero onset".into()));
        }
        Ok(Self {
            onset,
            apex,
            label,
            source,
            provenance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn au_index_set_is_fixed() {
        assert_eq!(AU_NUMBERS.len(), 17);
        assert!(AU_NUMBERS.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(au_position(12), Some(8));
        assert_eq!(au_position(11), None);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize_intensity(0.0, 5.0).unwrap(), 0.0);
        assert_eq!(normalize_intensity(2.5, 5.0).unwrap(), 0.5);
        assert_eq!(normalize_intensity(5.3, 5.0).unwrap(), 1.0);
        assert_eq!(normalize_intensity(-0.2, 5.0).unwrap(), 0.0);
        assert!(matches!(normalize_intensity(f64::NAN, 5.0), Err(Error::NonFiniteIntensity(_))));
        assert!(matches!(normalize_intensity(1.0, 0.0), Err(Error::InvalidScale(_))));
    }

    #[test]
    fn label_examples() {
        let map = LabelMap::default();
        assert_eq!(map_label("surprise", &map).unwrap(), EmotionClass::Surprise);
        assert_eq!(map_label("happiness", &map).unwrap(), EmotionClass::Positive);
        assert_eq!(map_label("disgust", &map).unwrap(), EmotionClass::Negative);
        assert_eq!(map_label("  Fear ", &map).unwrap(), EmotionClass::Negative);
        assert_eq!(map_label("Repression", &map).unwrap(), EmotionClass::Negative);
        match map_label("others", &map) {
            Err(Error::UnknownLabel(s)) => assert_eq!(s, "others"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(map_label("contempt", &map), Err(Error::UnknownLabel(_))));
        assert!(matches!(map_label("  ", &map), Err(Error::EmptyLabel)));
    }

    #[test]
    fn label_map_from_json() {
        let map = LabelMap::from_json(r#"{"Happy": "positive", "tense": "negative"}"#).unwrap();
        assert_eq!(map.map("happy").unwrap(), EmotionClass::Positive);
        assert!(LabelMap::from_json(r#"{"x": "neutral"}"#).is_err());
    }

    #[test]
    fn au_vector_bounds() {
        assert!(AuVector::new([0.5; AU_DIM]).is_ok());
        let mut bad = [0.0; AU_DIM];
        bad[3] = 1.01;
        assert!(AuVector::new(bad).is_err());
        bad[3] = f64::NAN;
        assert!(AuVector::new(bad).is_err());
        assert!(AuVector::from_slice(&[0.0; 16]).is_err());
        assert_eq!(AuVector::zeros().with_au(12, 0.4).get_au(12), Some(0.4));
    }

    #[test]
    fn expert_triplet_requires_zero_onset() {
        let onset = AuVector::zeros().with_au(1, 0.1);
        let prov = Provenance::synthetic("expert", "x");
        assert!(AuTriplet::new(onset, onset, EmotionClass::Positive, SourceTag::Expert, prov.clone()).is_err());
        assert!(AuTriplet::new(onset, onset, EmotionClass::Positive, SourceTag::MaE, prov).is_ok());
    }

    #[test]
    fn class_and_source_codes() {
        for (i, c) in EmotionClass::ALL.iter().enumerate() {
            assert_eq!(c.code(), i);
            assert_eq!(EmotionClass::from_code(i), Some(*c));
            assert_eq!(c.as_str().parse::<EmotionClass>().unwrap(), *c);
        }
        assert_eq!(serde_json::to_string(&EmotionClass::Surprise).unwrap(), "\"surprise\"");
        let set: SourceSet = "mae+expert".parse().unwrap();
        assert_eq!(set.label(), "mae+expert");
        assert_eq!(serde_json::to_string(&set).unwrap(), r#"["mae","expert"]"#);
    }

    #[test]
    fn counts_uniform_total() {
        let c = ClassSourceCounts::uniform(SourceSet::all(), 1);
        assert_eq!(c.total(), 9);
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<ClassSourceCounts>(&json).unwrap(), c);
    }

    proptest! {
        #[test]
        fn normalize_is_monotone(a in -10.0f64..10.0, b in -10.0f64..10.0, scale in 0.1f64..10.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(normalize_intensity(lo, scale).unwrap() <= normalize_intensity(hi, scale).unwrap());
        }

        #[test]
        fn normalize_is_idempotent_on_unit_scale(x in 0.0f64..=1.0) {
            prop_assert_eq!(normalize_intensity(x, 1.0).unwrap(), x);
        }

        // Six-decimal values survive a text round trip bit for bit.
        #[test]
        fn fixed_text_round_trip(raw in proptest::collection::vec(0u32..=1_000_000, AU_DIM)) {
            let values: Vec<f64> = raw.iter().map(|&m| format!("{}.{:06}", m / 1_000_000, m % 1_000_000).parse().unwrap()).collect();
            let v = AuVector::from_slice(&values).unwrap();
            let mut text = String::new();
            crate::format::push_au_vector(&mut text, &v);
            let parsed: Vec<f64> = serde_json::from_str(&text).unwrap();
            let back = AuVector::from_slice(&parsed).unwrap();
            for (x, y) in v.values().iter().zip(back.values()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
