//! Deterministic stand-in for a conditional face generator.
//!
//! A "face" is an embedding with an identity part that depends only on the
//! identity id, and an expression part `A z + noise` that depends only on the
//! AU condition. `A` is a seeded Gaussian matrix with unit-norm columns.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::au::{AuVector, AU_DIM};
use crate::composer::DatasetManifest;
use crate::format::{is_header_line, ArtifactHeader};
use crate::rng::{mix64, RngStream};
use crate::{par, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorParams {
    pub embed_dim_identity: usize,
    pub embed_dim_expression: usize,
    pub mixing_matrix_seed: u64,
    pub noise_sigma: f64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            embed_dim_identity: 16,
            embed_dim_expression: 17,
            mixing_matrix_seed: 0,
            noise_sigma: 0.01,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim_identity == 0 || self.embed_dim_expression == 0 {
            return Err(Error::InvalidConfig("embedding dimensions must be positive".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!("noise_sigma must be >= 0, got {}", self.noise_sigma)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceEmbedding {
    pub identity: Vec<f64>,
    pub expression: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct MockGenerator {
    params: GeneratorParams,
    // Row-major, embed_dim_expression x AU_DIM.
    mixing: Vec<f64>,
}

impl MockGenerator {
    pub fn new(params: GeneratorParams) -> Result<Self> {
        params.validate()?;
        let rows = params.embed_dim_expression;
        let mut rng = RngStream::new(params.mixing_matrix_seed, "mixing-matrix", 0);
        let mut mixing: Vec<f64> = (0..rows * AU_DIM).map(|_| rng.standard_normal()).collect();
        for col in 0..AU_DIM {
            let norm = (0..rows).map(|r| mixing[r * AU_DIM + col].powi(2)).sum::<f64>().sqrt();
            for r in 0..rows {
                mixing[r * AU_DIM + col] /= norm;
            }
        }
        Ok(Self { params, mixing })
    }

    pub fn params(&self) -> &GeneratorParams {
        &self.params
    }

    /// Unit vector derived from the identity id alone.
    pub fn identity_part(&self, identity_id: &str) -> Vec<f64> {
        let mut rng = RngStream::new(self.params.mixing_matrix_seed, &format!("identity/{identity_id}"), 0);
        let mut v: Vec<f64> = (0..self.params.embed_dim_identity).map(|_| rng.standard_normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        v
    }

    /// `A z` without noise.
    pub fn expression_mean(&self, z: &AuVector) -> Vec<f64> {
        let z = z.values();
        self.mixing
            .chunks_exact(AU_DIM)
            .map(|row| row.iter().zip(z).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn generate_face(&self, identity_id: &str, z: &AuVector, rng: &mut RngStream) -> FaceEmbedding {
        let mut expression = self.expression_mean(z);
        if self.params.noise_sigma > 0.0 {
            for e in &mut expression {
                *e += self.params.noise_sigma * rng.standard_normal();
            }
        }
        FaceEmbedding {
            identity: self.identity_part(identity_id),
            expression,
        }
    }

    /// Renders every frame of every sample, in manifest order. Frame `f` of a
    /// sample uses stream `(mix(matrix seed, manifest seed), "render/<sample_id>", f)`,
    /// so a sample renders identically whether or not others were filtered out.
    pub fn render_manifest(&self, manifest: &DatasetManifest) -> Vec<RenderedSample> {
        let seed = mix64(self.params.mixing_matrix_seed ^ mix64(manifest.header.seed));
        par::map_indexed(manifest.samples.len(), |i| {
            let s = &manifest.samples[i];
            let purpose = format!("render/{}", s.sample_id);
            let frames = s
                .frames
                .iter()
                .enumerate()
                .map(|(f, z)| self.generate_face(&s.identity_id, z, &mut RngStream::new(seed, &purpose, f as u64)))
                .collect();
            RenderedSample {
                sample_id: s.sample_id.clone(),
                frames,
            }
        })
    }
}

pub fn generate_face(identity_id: &str, z: &AuVector, params: &GeneratorParams, rng: &mut RngStream) -> Result<FaceEmbedding> {
    Ok(MockGenerator::new(*params)?.generate_face(identity_id, z, rng))
}

pub fn render_manifest(manifest: &DatasetManifest, params: &GeneratorParams) -> Result<Vec<RenderedSample>> {
    Ok(MockGenerator::new(*params)?.render_manifest(manifest))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderedSample {
    pub sample_id: String,
    pub frames: Vec<FaceEmbedding>,
}

pub const EMBEDDINGS_KIND: &str = "embeddings";

pub fn write_embeddings_jsonl<W: Write>(mut out: W, header: &ArtifactHeader, samples: &[RenderedSample]) -> Result<()> {
    out.write_all(header.to_json_line().as_bytes())?;
    out.write_all(b"\n")?;
    for s in samples {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_embeddings_jsonl(text: &str) -> Result<(ArtifactHeader, Vec<RenderedSample>)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = match lines.next() {
        Some(l) if is_header_line(l) => ArtifactHeader::parse(l, EMBEDDINGS_KIND)?,
        _ => return Err(Error::Format("embedding dump must start with a header line".into())),
    };
    let samples = lines.map(|l| Ok(serde_json::from_str(l)?)).collect::<Result<Vec<_>>>()?;
    Ok((header, samples))
}
