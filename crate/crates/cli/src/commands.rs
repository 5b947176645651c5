use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use serde_json::json;

use miex_core::analysis::{compare_profiles, mean_au_by_class};
use miex_core::au::{EmotionClass, LabelMap, SourceTag};
use miex_core::composer::{apply_fold_exclusion, compose as compose_manifest, parse_subject_list, DatasetManifest};
use miex_core::eval::{parse_predictions, score as score_predictions, split_subjects};
use miex_core::format::{is_header_line, push_fixed, ArtifactHeader};
use miex_core::ingest::{
    clip_record_json, join_clips, load_identities, parse_annotations, parse_au_csv, parse_clip_record_json,
    ClipRecord, IdentityPool, JoinReport,
};
use miex_core::mockgen::{write_embeddings_jsonl, MockGenerator, EMBEDDINGS_KIND};
use miex_core::samplers::{build_triplet_pool, TripletPool};
use miex_core::toy::{run_ablation, run_scaling, ScalingAxis};
use miex_core::TOOL_VERSION;

use crate::config::LoadedConfig;
use crate::CliError;

pub struct Context {
    pub loaded: LoadedConfig,
    pub seed: u64,
}

impl Context {
    fn header(&self, kind: &str, seed: u64) -> ArtifactHeader {
        ArtifactHeader::new(kind, self.loaded.digest.clone(), seed)
    }

    /// First line of every CSV output.
    fn csv_comment(&self, seed: u64) -> String {
        format!("tool={TOOL_VERSION}, config_digest={}, seed={seed}", self.loaded.digest)
    }
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn header_value(h: &ArtifactHeader) -> serde_json::Value {
    serde_json::to_value(h).expect("header serializes")
}

fn load_clips(
    ctx: &Context,
    csvs: &[String],
    annotations: &Option<String>,
    what: &str,
    map: &LabelMap,
) -> Result<(Vec<ClipRecord>, JoinReport), CliError> {
    let loaded = &ctx.loaded;
    let ann_path = loaded.required(annotations, what)?;
    let anns = parse_annotations(open(&ann_path)?, map)?;
    let mut series = Vec::new();
    for p in csvs {
        let path = loaded.resolve(p);
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("clip").to_string();
        series.extend(parse_au_csv(BufReader::new(open(&path)?), loaded.config.au_scale_max, &stem)?);
    }
    Ok(join_clips(anns, series)?)
}

pub fn ingest(ctx: &Context, out: &Path) -> Result<(), CliError> {
    let paths = &ctx.loaded.config.paths;
    let map = ctx.loaded.label_map()?;
    let (mie, mie_report) = load_clips(ctx, &paths.mie_au_csv, &paths.mie_annotations, "mie_annotations", &map)?;
    let (mae, mae_report) = if paths.mae_annotations.is_none() && paths.mae_au_csv.is_empty() {
        (Vec::new(), JoinReport::default())
    } else {
        load_clips(ctx, &paths.mae_au_csv, &paths.mae_annotations, "mae_annotations", &map)?
    };
    if mie.is_empty() {
        return Err(CliError::Validation("no MiE clip has both an annotation and an AU series".into()));
    }
    for (role, r) in [("mie", &mie_report), ("mae", &mae_report)] {
        for id in &r.unmatched_annotations {
            eprintln!("warning: {role} annotation {id:?} has no AU series; skipped");
        }
        for id in &r.unmatched_series {
            eprintln!("warning: {role} AU series {id:?} has no annotation; skipped");
        }
    }
    let header = ctx
        .header("clips", ctx.seed)
        .with_extra("mie_clips", mie.len())
        .with_extra("mae_clips", mae.len())
        .with_extra("join", json!({ "mie": mie_report, "mae": mae_report }));
    let mut text = header.to_json_line();
    text.push('\n');
    for (role, clips) in [("mie", &mie), ("mae", &mae)] {
        for c in clips {
            text.push_str(&clip_record_json(role, c));
            text.push('\n');
        }
    }
    write_file(out, text.as_bytes())
}

fn read_clips(path: &Path) -> Result<(Vec<ClipRecord>, Vec<ClipRecord>), CliError> {
    let text = read_text(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(l) if is_header_line(l) => {
            ArtifactHeader::parse(l, "clips")?;
        }
        _ => return Err(CliError::Validation(format!("{}: missing clips header", path.display()))),
    }
    let (mut mie, mut mae) = (Vec::new(), Vec::new());
    for line in lines {
        let (role, clip) = parse_clip_record_json(line)?;
        match role.as_str() {
            "mie" => mie.push(clip),
            "mae" => mae.push(clip),
            other => return Err(CliError::Validation(format!("unknown clip role {other:?}"))),
        }
    }
    Ok((mie, mae))
}

pub fn pool(ctx: &Context, clips: &Path, out: &Path) -> Result<(), CliError> {
    let (mie, mae) = read_clips(clips)?;
    let cfg = &ctx.loaded.config;
    let mut available = [0; 3];
    for c in &mie {
        available[c.label().code()] += 1;
    }
    let counts = cfg.pool_counts(available);
    let pool = build_triplet_pool(&mie, &mae, &ctx.loaded.expert_table()?, &counts, &cfg.sampler, ctx.seed)?;
    let header = ctx
        .header("pool", ctx.seed)
        .with_extra("counts", serde_json::to_value(counts).expect("counts serialize"));
    write_file(out, pool.to_jsonl(Some(&header)).as_bytes())
}

fn read_pool(path: &Path) -> Result<TripletPool, CliError> {
    Ok(TripletPool::from_jsonl(&read_text(path)?)?.1)
}

pub fn compose(
    ctx: &Context,
    pool: &Path,
    frames: Option<usize>,
    exclude: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let pool = read_pool(pool)?;
    let mut comp = ctx.loaded.config.composition.clone();
    comp.seed = ctx.seed;
    if let Some(f) = frames {
        comp.frames_per_sample = f;
    }
    let identities = match &ctx.loaded.config.paths.identities {
        Some(p) => load_identities(BufReader::new(open(&ctx.loaded.resolve(p))?))?,
        None => IdentityPool::numbered("id", comp.num_identities),
    };
    let mut manifest = compose_manifest(&pool, &identities, &comp)?;
    if let Some(path) = exclude {
        let subjects = parse_subject_list(&read_text(path)?)?;
        let (filtered, removed) = apply_fold_exclusion(&manifest, &subjects);
        manifest = filtered;
        manifest.header.extra.insert("excluded_samples".into(), removed.into());
    }
    manifest.header.config_digest = ctx.loaded.digest.clone();
    let mut buf = Vec::new();
    manifest.write_jsonl(&mut buf)?;
    write_file(out, &buf)
}

fn read_manifest(path: &Path) -> Result<DatasetManifest, CliError> {
    Ok(DatasetManifest::from_jsonl(&read_text(path)?)?)
}

pub fn render_mock(ctx: &Context, manifest: &Path, out: &Path) -> Result<(), CliError> {
    let manifest = read_manifest(manifest)?;
    let generator = MockGenerator::new(ctx.loaded.config.generator)?;
    let rendered = generator.render_manifest(&manifest);
    let header = ctx
        .header(EMBEDDINGS_KIND, manifest.header.seed)
        .with_extra("num_samples", rendered.len());
    let mut buf = Vec::new();
    write_embeddings_jsonl(&mut buf, &header, &rendered)?;
    write_file(out, &buf)
}

pub fn split(
    ctx: &Context,
    clips: Option<&Path>,
    subjects: Option<&Path>,
    k: Option<usize>,
    fold_dir: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let pairs: BTreeSet<(String, String)> = match (clips, subjects) {
        (Some(c), _) => read_clips(c)?
            .0
            .iter()
            .map(|c| (c.annotation().dataset.clone(), c.annotation().subject_id.clone()))
            .collect(),
        (None, Some(s)) => parse_subject_list(&read_text(s)?)?,
        (None, None) => return Err(CliError::Validation("split needs --clips or --subjects".into())),
    };
    let keyed: BTreeMap<String, (String, String)> = pairs
        .into_iter()
        .map(|(d, s)| (format!("{d}/{s}"), (d, s)))
        .collect();
    let keys: Vec<String> = keyed.keys().cloned().collect();
    let k = k.unwrap_or(ctx.loaded.config.split.k);
    let plan = split_subjects(&keys, k, ctx.seed)?;
    if let Some(dir) = fold_dir {
        for (i, fold) in plan.folds.iter().enumerate() {
            let mut text = format!("# {}\n", ctx.csv_comment(ctx.seed));
            for key in fold {
                let (d, s) = &keyed[key];
                text.push_str(&format!("{d}\t{s}\n"));
            }
            write_file(&dir.join(format!("fold{i}.tsv")), text.as_bytes())?;
        }
    }
    let header = ctx.header("folds", ctx.seed);
    write_json(out, &json!({ "header": header_value(&header), "plan": plan }))
}

pub fn score(
    ctx: &Context,
    predictions: &Path,
    truth: Option<&Path>,
    annotations: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let preds = parse_predictions(BufReader::new(open(predictions)?))?;
    let table: HashMap<String, EmotionClass> = match (truth, annotations) {
        (Some(m), _) => read_manifest(m)?
            .samples
            .into_iter()
            .map(|s| (s.sample_id, s.label))
            .collect(),
        (None, Some(a)) => parse_annotations(open(a)?, &ctx.loaded.label_map()?)?
            .into_iter()
            .map(|a| (a.clip_id, a.label))
            .collect(),
        (None, None) => return Err(CliError::Validation("score needs --truth or --annotations".into())),
    };
    let report = score_predictions(&preds, &table)?;
    let header = ctx.header("metrics", ctx.seed).with_extra("num_predictions", preds.len());
    write_json(out, &json!({ "header": header_value(&header), "metrics": report }))
}

pub fn analyze(ctx: &Context, pool: &Path, top_k: usize, csv_dir: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let pool = read_pool(pool)?;
    let mut profiles = BTreeMap::new();
    let mut warnings = Vec::new();
    for source in SourceTag::ALL {
        let r = mean_au_by_class(pool.triplets(), Some(source));
        warnings.extend(r.warnings.into_iter().map(|w| format!("{source}: {w}")));
        profiles.insert(source, r.profile);
    }
    let mut comparisons = BTreeMap::new();
    for (a, b) in [
        (SourceTag::MiE, SourceTag::MaE),
        (SourceTag::MiE, SourceTag::Expert),
        (SourceTag::MaE, SourceTag::Expert),
    ] {
        comparisons.insert(format!("{a}_vs_{b}"), compare_profiles(&profiles[&a], &profiles[&b], top_k));
    }
    if let Some(dir) = csv_dir {
        for (source, profile) in &profiles {
            let mut buf = Vec::new();
            profile.write_csv(&mut buf, Some(&ctx.csv_comment(ctx.seed)))?;
            write_file(&dir.join(format!("profile_{source}.csv")), &buf)?;
        }
    }
    let profiles: BTreeMap<String, _> = profiles.into_iter().map(|(s, p)| (s.to_string(), p)).collect();
    let header = ctx.header("analysis", ctx.seed);
    write_json(
        out,
        &json!({
            "header": header_value(&header),
            "profiles": profiles,
            "comparisons": comparisons,
            "warnings": warnings,
        }),
    )
}

pub fn toy_ablation(ctx: &Context, seed: Option<u64>, csv: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let mut cfg = ctx.loaded.config.toy.clone();
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    let report = run_ablation(&cfg)?;
    if let Some(path) = csv {
        let mut text = format!("# {}\nsubset,mean_uf1,std_uf1,mean_uar,std_uar\n", ctx.csv_comment(cfg.base_seed));
        for r in &report.results {
            text.push_str(&r.label);
            for v in [r.mean_uf1, r.std_uf1, r.mean_uar, r.std_uar] {
                text.push(',');
                push_fixed(&mut text, v);
            }
            text.push('\n');
        }
        write_file(path, text.as_bytes())?;
    }
    let header = ctx.header("ablation", cfg.base_seed);
    write_json(out, &json!({ "header": header_value(&header), "report": report }))
}

pub fn toy_scaling(
    ctx: &Context,
    seed: Option<u64>,
    axis: ScalingAxis,
    grid: &[usize],
    csv: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let mut cfg = ctx.loaded.config.toy.clone();
    if let Some(s) = seed {
        cfg.base_seed = s;
    }
    let curve = run_scaling(axis, grid, &cfg)?;
    for p in &curve.points {
        if let Some(e) = &p.error {
            eprintln!("warning: {axis} = {}: {e}", p.value);
        }
    }
    if let Some(path) = csv {
        let mut buf = Vec::new();
        curve.write_csv(&mut buf, Some(&ctx.csv_comment(cfg.base_seed)))?;
        write_file(path, &buf)?;
    }
    let header = ctx.header("scaling", cfg.base_seed);
    write_json(out, &json!({ "header": header_value(&header), "curve": curve }))
}

/// Digest recorded in an artifact: a JSONL header line, a `# ...` CSV/TSV
/// comment line, or the `header` member of a JSON document.
fn recorded_digest(text: &str) -> Option<String> {
    let first = text.lines().find(|l| !l.trim().is_empty())?;
    if is_header_line(first) {
        let h: ArtifactHeader = serde_json::from_str(first).ok()?;
        return Some(h.config_digest);
    }
    if let Some(comment) = first.trim_start().strip_prefix('#') {
        return comment
            .split(',')
            .find_map(|kv| kv.trim().strip_prefix("config_digest="))
            .map(str::to_string);
    }
    let v: serde_json::Value = serde_json::from_str(text).ok()?;
    v.get("header")?.get("config_digest")?.as_str().map(str::to_string)
}

pub fn verify(loaded: &LoadedConfig, file: &Path) -> Result<(), CliError> {
    let text = read_text(file)?;
    let found = recorded_digest(&text)
        .ok_or_else(|| CliError::Validation(format!("{}: no config digest found", file.display())))?;
    if found != loaded.digest {
        return Err(CliError::Validation(format!(
            "{}: config digest {found} does not match {}",
            file.display(),
            loaded.digest
        )));
    }
    println!("ok {} {found}", file.display());
    Ok(())
}
