//! Parsing of per-frame AU series, clip annotations and identity lists.
//!
//! AU series follow the OpenFace column layout: a `frame` column, one
//! `AUxx_r` intensity column per AU in the index set (two-digit, zero padded)
//! and an optional `clip_id` column. Other columns are ignored.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::au::{normalize_intensity, AuVector, EmotionClass, LabelMap, AU_DIM, AU_NUMBERS};
use crate::error::csv_error;
use crate::format::{push_fixed, push_json_str};
use crate::{Error, Result};

pub fn au_column_name(au: u8) -> String {
    format!("AU{au:02}_r")
}

/// Frames of one clip, indices strictly increasing from 0.
#[derive(Clone, Debug, PartialEq)]
pub struct AuTimeSeries {
    clip_id: String,
    frames: Vec<(usize, AuVector)>,
}

impl AuTimeSeries {
    pub fn new(clip_id: impl Into<String>, frames: Vec<(usize, AuVector)>) -> Result<Self> {
        let clip_id = clip_id.into();
        let invalid = |reason: &str| Error::InvalidSeries {
            clip: clip_id.clone(),
            reason: reason.to_string(),
        };
        if frames.len() < 2 {
            return Err(invalid("fewer than 2 frames"));
        }
        if frames[0].0 != 0 {
            return Err(invalid("first frame index is not 0"));
        }
        if frames.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(invalid("frame indices are not strictly increasing"));
        }
        Ok(Self { clip_id, frames })
    }

    pub fn clip_id(&self) -> &str {
        &self.clip_id
    }

    pub fn frames(&self) -> &[(usize, AuVector)] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, index: usize) -> Option<&AuVector> {
        self.frames
            .binary_search_by_key(&index, |(i, _)| *i)
            .ok()
            .map(|pos| &self.frames[pos].1)
    }

    /// AU vectors for every recorded frame in `start..=end`.
    pub fn range(&self, start: usize, end: usize) -> impl Iterator<Item = &AuVector> {
        self.frames
            .iter()
            .filter(move |(i, _)| *i >= start && *i <= end)
            .map(|(_, v)| v)
    }
}

/// Parses an AU intensity CSV into one series per clip, ordered by clip id.
///
/// Without a `clip_id` column the whole file is one clip named
/// `default_clip_id` (typically the file stem).
pub fn parse_au_csv<R: Read>(input: R, scale_max: f64, default_clip_id: &str) -> Result<Vec<AuTimeSeries>> {
    normalize_intensity(0.0, scale_max)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);

    let frame_col = find("frame").ok_or_else(|| Error::MissingNamedColumn("frame".into()))?;
    let clip_col = find("clip_id");
    let mut au_cols = [0usize; AU_DIM];
    for (slot, au) in au_cols.iter_mut().zip(AU_NUMBERS) {
        *slot = find(&au_column_name(au)).ok_or(Error::MissingColumn(au))?;
    }

    let mut clips: BTreeMap<String, BTreeMap<usize, AuVector>> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let cell = |col: usize| record.get(col).unwrap_or("");
        let parse_err = |col: usize, message: String| Error::Parse {
            row,
            column: headers.get(col).unwrap_or("").to_string(),
            message,
        };

        let frame_text = cell(frame_col);
        let frame: usize = match frame_text.parse::<usize>() {
            Ok(f) => f,
            // Some exporters write frame numbers as floats ("12.0").
            Err(_) => match frame_text.parse::<f64>() {
                Ok(f) if f >= 0.0 && f.fract() == 0.0 && f < 1e15 => f as usize,
                _ => return Err(parse_err(frame_col, format!("bad frame index {frame_text:?}"))),
            },
        };

        let mut values = [0.0; AU_DIM];
        for (v, &col) in values.iter_mut().zip(&au_cols) {
            let raw: f64 = cell(col)
                .parse()
                .map_err(|_| parse_err(col, format!("not a number: {:?}", cell(col))))?;
            *v = normalize_intensity(raw, scale_max).map_err(|e| parse_err(col, e.to_string()))?;
        }
        let au = AuVector::new(values)?;

        let clip_id = match clip_col {
            Some(col) => cell(col).to_string(),
            None => default_clip_id.to_string(),
        };
        if clip_id.is_empty() {
            return Err(parse_err(clip_col.unwrap_or(0), "empty clip id".into()));
        }
        let frames = clips.entry(clip_id.clone()).or_default();
        if frames.insert(frame, au).is_some() {
            return Err(Error::DuplicateFrame { clip: clip_id, frame });
        }
    }

    clips
        .into_iter()
        .map(|(clip, frames)| AuTimeSeries::new(clip, frames.into_iter().collect()))
        .collect()
}

/// Writes series in the layout [`parse_au_csv`] reads, already normalized
/// (parse back with `scale_max = 1`).
pub fn write_au_csv<W: Write>(mut out: W, series: &[AuTimeSeries]) -> Result<()> {
    let mut line = String::from("clip_id,frame");
    for au in AU_NUMBERS {
        line.push(',');
        line.push_str(&au_column_name(au));
    }
    line.push('\n');
    out.write_all(line.as_bytes())?;
    for s in series {
        for (frame, au) in s.frames() {
            line.clear();
            line.push_str(s.clip_id());
            line.push(',');
            line.push_str(&frame.to_string());
            for v in au.values() {
                line.push(',');
                push_fixed(&mut line, *v);
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClipAnnotation {
    pub clip_id: String,
    pub dataset: String,
    pub subject_id: String,
    pub raw_label: String,
    pub label: EmotionClass,
    pub onset: usize,
    pub apex: usize,
    pub offset: Option<usize>,
    pub n_frames: usize,
}

impl ClipAnnotation {
    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: String| Error::InvalidAnnotation {
            clip: self.clip_id.clone(),
            reason,
        };
        if self.clip_id.is_empty() {
            return Err(invalid("empty clip id".into()));
        }
        if self.n_frames == 0 {
            return Err(invalid("n_frames must be positive".into()));
        }
        if self.onset >= self.apex {
            return Err(invalid(format!("onset {} is not before apex {}", self.onset, self.apex)));
        }
        if self.apex >= self.n_frames {
            return Err(invalid(format!("apex {} is not below n_frames {}", self.apex, self.n_frames)));
        }
        if let Some(off) = self.offset {
            if off < self.apex {
                return Err(invalid(format!("offset {off} precedes apex {}", self.apex)));
            }
        }
        Ok(())
    }
}

const ANNOTATION_COLUMNS: [&str; 7] = ["clip_id", "dataset", "subject_id", "label", "onset", "apex", "n_frames"];

/// Parses the clip annotation CSV (`offset` column optional, `-` for absent).
pub fn parse_annotations<R: Read>(input: R, map: &LabelMap) -> Result<Vec<ClipAnnotation>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let headers = reader.headers().map_err(csv_error)?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let mut cols = [0usize; 7];
    for (slot, name) in cols.iter_mut().zip(ANNOTATION_COLUMNS) {
        *slot = find(name).ok_or_else(|| Error::MissingNamedColumn(name.into()))?;
    }
    let [c_clip, c_dataset, c_subject, c_label, c_onset, c_apex, c_n] = cols;
    let c_offset = find("offset");

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        let cell = |col: usize| record.get(col).unwrap_or("");
        let clip_id = cell(c_clip).to_string();
        let index = |col: usize| -> Result<usize> {
            cell(col).parse::<usize>().map_err(|_| Error::Parse {
                row,
                column: ANNOTATION_COLUMNS
                    .iter()
                    .find(|n| find(n) == Some(col))
                    .unwrap_or(&"")
                    .to_string(),
                message: format!("clip {clip_id:?}: bad frame index {:?}", cell(col)),
            })
        };
        let offset = match c_offset.map(cell) {
            None | Some("") | Some("-") => None,
            Some(text) => Some(text.parse::<usize>().map_err(|_| Error::Parse {
                row,
                column: "offset".into(),
                message: format!("clip {clip_id:?}: bad offset {text:?}"),
            })?),
        };
        let raw_label = cell(c_label).to_string();
        let ann = ClipAnnotation {
            dataset: cell(c_dataset).to_string(),
            subject_id: cell(c_subject).to_string(),
            label: map.map(&raw_label)?,
            raw_label,
            onset: index(c_onset)?,
            apex: index(c_apex)?,
            offset,
            n_frames: index(c_n)?,
            clip_id,
        };
        ann.validate()?;
        if !seen.insert(ann.clip_id.clone()) {
            return Err(Error::InvalidAnnotation {
                clip: ann.clip_id,
                reason: "duplicate clip id".into(),
            });
        }
        out.push(ann);
    }
    Ok(out)
}

/// An annotation joined with its AU series.
#[derive(Clone, Debug, PartialEq)]
pub struct ClipRecord {
    annotation: ClipAnnotation,
    series: AuTimeSeries,
}

impl ClipRecord {
    pub fn new(annotation: ClipAnnotation, series: AuTimeSeries) -> Result<Self> {
        annotation.validate()?;
        if annotation.clip_id != series.clip_id {
            return Err(Error::InvalidSeries {
                clip: series.clip_id,
                reason: format!("joined to annotation {:?}", annotation.clip_id),
            });
        }
        if series.frame(annotation.onset).is_none() || series.frame(annotation.apex).is_none() {
            return Err(Error::FrameCoverage(annotation.clip_id));
        }
        Ok(Self { annotation, series })
    }

    pub fn annotation(&self) -> &ClipAnnotation {
        &self.annotation
    }

    pub fn series(&self) -> &AuTimeSeries {
        &self.series
    }

    pub fn label(&self) -> EmotionClass {
        self.annotation.label
    }

    pub fn clip_id(&self) -> &str {
        &self.annotation.clip_id
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinReport {
    pub unmatched_annotations: Vec<String>,
    pub unmatched_series: Vec<String>,
}

/// Inner join on clip id, in annotation order.
pub fn join_clips(
    annotations: Vec<ClipAnnotation>,
    series: Vec<AuTimeSeries>,
) -> Result<(Vec<ClipRecord>, JoinReport)> {
    let mut by_id: HashMap<String, AuTimeSeries> = HashMap::with_capacity(series.len());
    let mut series_order = Vec::with_capacity(series.len());
    for s in series {
        series_order.push(s.clip_id.clone());
        if by_id.insert(s.clip_id.clone(), s).is_some() {
            return Err(Error::InvalidSeries {
                clip: series_order.pop().unwrap_or_default(),
                reason: "duplicate clip id among series".into(),
            });
        }
    }
    let mut report = JoinReport::default();
    let mut records = Vec::new();
    for ann in annotations {
        match by_id.remove(&ann.clip_id) {
            Some(s) => records.push(ClipRecord::new(ann, s)?),
            None => report.unmatched_annotations.push(ann.clip_id),
        }
    }
    report.unmatched_series = series_order.into_iter().filter(|id| by_id.contains_key(id)).collect();
    Ok((records, report))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identity {
    pub id: String,
    pub face_ref: String,
}

/// Face identities in canonical sampling order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdentityPool {
    entries: Vec<Identity>,
}

impl IdentityPool {
    pub fn new(entries: Vec<Identity>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !seen.insert(e.id.as_str()) {
                return Err(Error::DuplicateIdentity(e.id.clone()));
            }
        }
        Ok(Self { entries })
    }

    /// `count` synthetic identities `prefix00000`, `prefix00001`, ...
    pub fn numbered(prefix: &str, count: usize) -> Self {
        let entries = (0..count)
            .map(|i| Identity {
                id: format!("{prefix}{i:05}"),
                face_ref: format!("faces/{prefix}{i:05}.png"),
            })
            .collect();
        Self { entries }
    }

    pub fn entries(&self) -> &[Identity] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reads `id<TAB>face-ref` lines; `#` comments and blank lines are skipped.
pub fn load_identities<R: BufRead>(input: R) -> Result<IdentityPool> {
    let mut entries = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split('\t');
        let (Some(id), Some(face_ref), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::MalformedLine {
                line: i + 1,
                reason: "expected exactly two tab-separated fields".into(),
            });
        };
        let (id, face_ref) = (id.trim(), face_ref.trim());
        if id.is_empty() || face_ref.is_empty() {
            return Err(Error::MalformedLine {
                line: i + 1,
                reason: "empty identity id or face reference".into(),
            });
        }
        entries.push(Identity {
            id: id.to_string(),
            face_ref: face_ref.to_string(),
        });
    }
    IdentityPool::new(entries)
}

/// One clip per line: `{"role": ..., "annotation": {...}, "frames": [[idx, [17]], ...]}`.
pub fn clip_record_json(role: &str, clip: &ClipRecord) -> String {
    let mut out = String::from("{\"role\":");
    push_json_str(&mut out, role);
    out.push_str(",\"annotation\":");
    out.push_str(&serde_json::to_string(&clip.annotation).expect("annotation serializes"));
    out.push_str(",\"frames\":[");
    for (k, (idx, au)) in clip.series.frames().iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        out.push('[');
        out.push_str(&idx.to_string());
        out.push(',');
        crate::format::push_au_vector(&mut out, au);
        out.push(']');
    }
    out.push_str("]}");
    out
}

#[derive(Deserialize)]
struct ClipLine {
    role: String,
    annotation: ClipAnnotation,
    frames: Vec<(usize, Vec<f64>)>,
}

/// Inverse of [`clip_record_json`]; returns `(role, record)`.
pub fn parse_clip_record_json(line: &str) -> Result<(String, ClipRecord)> {
    let parsed: ClipLine = serde_json::from_str(line)?;
    let frames = parsed
        .frames
        .into_iter()
        .map(|(i, v)| Ok((i, AuVector::from_slice(&v)?)))
        .collect::<Result<Vec<_>>>()?;
    let series = AuTimeSeries::new(parsed.annotation.clip_id.clone(), frames)?;
    Ok((parsed.role, ClipRecord::new(parsed.annotation, series)?))
}
