//! End-to-end in-memory pipeline: CSV text in, manifest and embeddings out.

use std::collections::{BTreeSet, HashMap};

use miex_core::analysis::{compare_profiles, mean_au_by_class};
use miex_core::au::{ClassSourceCounts, EmotionClass, LabelMap, SourceSet, SourceTag};
use miex_core::composer::{apply_fold_exclusion, compose, CompositionConfig, DatasetManifest};
use miex_core::eval::{score, split_subjects};
use miex_core::format::ArtifactHeader;
use miex_core::ingest::{
    clip_record_json, join_clips, parse_annotations, parse_au_csv, parse_clip_record_json, write_au_csv,
    AuTimeSeries, ClipRecord, IdentityPool,
};
use miex_core::mockgen::{read_embeddings_jsonl, write_embeddings_jsonl, GeneratorParams, MockGenerator};
use miex_core::samplers::{build_triplet_pool, SamplerConfig, TripletPool};
use miex_core::toy::{ToyWorld, WorldConfig};

fn annotations_csv(clips: &[ClipRecord]) -> String {
    let mut s = String::from("clip_id,dataset,subject_id,label,onset,apex,n_frames\n");
    for c in clips {
        let a = c.annotation();
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            a.clip_id, a.dataset, a.subject_id, a.raw_label, a.onset, a.apex, a.n_frames
        ));
    }
    s
}

fn round_trip(clips: &[ClipRecord]) -> Vec<ClipRecord> {
    let series: Vec<AuTimeSeries> = clips.iter().map(|c| c.series().clone()).collect();
    let mut csv = Vec::new();
    write_au_csv(&mut csv, &series).unwrap();
    let parsed = parse_au_csv(csv.as_slice(), 1.0, "unused").unwrap();
    let anns = parse_annotations(annotations_csv(clips).as_bytes(), &LabelMap::default_merge()).unwrap();
    let (records, report) = join_clips(anns, parsed).unwrap();
    assert!(report.unmatched_annotations.is_empty() && report.unmatched_series.is_empty());
    records
}

fn pool(world: &ToyWorld, mie: &[ClipRecord], mae: &[ClipRecord], seed: u64) -> TripletPool {
    let mut counts = ClassSourceCounts::default();
    for class in EmotionClass::ALL {
        counts.set(class, SourceTag::MiE, mie.iter().filter(|c| c.label() == class).count());
        counts.set(class, SourceTag::MaE, 50);
        counts.set(class, SourceTag::Expert, 50);
    }
    build_triplet_pool(mie, mae, &world.expert_table, &counts, &SamplerConfig::default(), seed).unwrap()
}

#[test]
fn csv_round_trip_preserves_clips() {
    let world = ToyWorld::build(&WorldConfig::default(), None);
    let mie = round_trip(&world.mie_clips);
    assert_eq!(mie.len(), world.mie_clips.len());
    for (a, b) in mie.iter().zip(&world.mie_clips) {
        assert_eq!(a.annotation(), b.annotation());
        for ((fa, va), (fb, vb)) in a.series().frames().iter().zip(b.series().frames()) {
            assert_eq!(fa, fb);
            // Six decimals on disk.
            assert!(va.values().iter().zip(vb.values()).all(|(x, y)| (x - y).abs() <= 5e-7));
        }
    }
    for c in &mie {
        let (role, back) = parse_clip_record_json(&clip_record_json("mie", c)).unwrap();
        assert_eq!((role.as_str(), &back), ("mie", c));
    }
}

#[test]
fn full_pipeline_round_trips_and_is_thread_count_independent() {
    let world = ToyWorld::build(&WorldConfig::default(), None);
    let mie = round_trip(&world.mie_clips);
    let mae = round_trip(&world.mae_train);

    let p = pool(&world, &mie, &mae, 5);
    let text = p.to_jsonl(Some(&ArtifactHeader::new("pool", "d", 5)));
    let (_, back) = TripletPool::from_jsonl(&text).unwrap();
    assert_eq!(back.to_jsonl(Some(&ArtifactHeader::new("pool", "d", 5))), text);

    let cfg = CompositionConfig {
        num_identities: 120,
        frames_per_sample: 10,
        seed: 5,
        ..Default::default()
    };
    let ids = IdentityPool::numbered("id", 120);
    let generator = MockGenerator::new(GeneratorParams::default()).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let manifest = compose(&p, &ids, &cfg).unwrap();
            let rendered = generator.render_manifest(&manifest);
            let mut emb = Vec::new();
            write_embeddings_jsonl(&mut emb, &ArtifactHeader::new("embeddings", "d", 5), &rendered).unwrap();
            (manifest.to_jsonl(), emb)
        })
    };
    let (m1, e1) = run(1);
    let (m4, e4) = run(4);
    assert_eq!(m1, m4);
    assert_eq!(e1, e4);

    let manifest = DatasetManifest::from_jsonl(&m1).unwrap();
    assert_eq!(manifest.to_jsonl(), m1);
    assert_eq!(manifest.len(), 120 * 9);
    let (_, rendered) = read_embeddings_jsonl(std::str::from_utf8(&e1).unwrap()).unwrap();
    assert_eq!(rendered.len(), manifest.len());
    assert!(rendered.iter().all(|r| r.frames.len() == 10));

    // Perfect predictions score 1 everywhere.
    let truth: HashMap<String, EmotionClass> = manifest.samples.iter().map(|s| (s.sample_id.clone(), s.label)).collect();
    let preds: Vec<(String, EmotionClass)> = manifest.samples.iter().map(|s| (s.sample_id.clone(), s.label)).collect();
    let report = score(&preds, &truth).unwrap();
    assert_eq!((report.uf1, report.uar, report.accuracy), (1.0, 1.0, 1.0));
}

#[test]
fn fold_exclusion_follows_split() {
    let world = ToyWorld::build(&WorldConfig::default(), None);
    let p = pool(&world, &world.mie_clips, &world.mae_train, 1);
    let manifest = compose(
        &p,
        &IdentityPool::numbered("id", 200),
        &CompositionConfig {
            num_identities: 200,
            samples_per_id: ClassSourceCounts::uniform(SourceSet::all(), 1),
            ..Default::default()
        },
    )
    .unwrap();
    let subjects: BTreeSet<String> = world.mie_clips.iter().map(|c| c.annotation().subject_id.clone()).collect();
    let subjects: Vec<String> = subjects.into_iter().collect();
    let plan = split_subjects(&subjects, 3, 9).unwrap();
    let mut kept_mie = 0;
    for fold in 0..3 {
        let test: BTreeSet<(String, String)> = plan.folds[fold]
            .iter()
            .map(|s| ("toy-mie".to_string(), s.clone()))
            .collect();
        let (filtered, removed) = apply_fold_exclusion(&manifest, &test);
        assert!(removed > 0);
        assert!(filtered
            .samples
            .iter()
            .filter(|s| s.source == SourceTag::MiE)
            .all(|s| !plan.folds[fold].contains(&s.provenance.subject_id)));
        kept_mie += filtered.samples.iter().filter(|s| s.source == SourceTag::MiE).count();
    }
    // Each MiE sample survives in exactly the two folds it is not tested in.
    let total_mie = manifest.samples.iter().filter(|s| s.source == SourceTag::MiE).count();
    assert_eq!(kept_mie, 2 * total_mie);
}

#[test]
fn mie_and_mae_profiles_share_top_aus() {
    let world = ToyWorld::build(&WorldConfig::default(), None);
    let p = pool(&world, &world.mie_clips, &world.mae_train, 2);
    let mie = mean_au_by_class(p.triplets(), Some(SourceTag::MiE));
    let mae = mean_au_by_class(p.triplets(), Some(SourceTag::MaE));
    assert!(mie.warnings.is_empty() && mae.warnings.is_empty());
    let cmp = compare_profiles(&mie.profile, &mae.profile, 3);
    assert_eq!(cmp.classes.len(), 3);
    for c in &cmp.classes {
        assert!(c.rank_correlation > 0.0, "{:?}", c.class);
        assert!(!c.top_k_shared.is_empty(), "{:?}", c.class);
    }
    let expert = mean_au_by_class(p.triplets(), Some(SourceTag::Expert));
    let table = &world.expert_table;
    // Expert apex means approach p * (mu + nu) / 2.
    let au12 = miex_core::au::au_position(12).unwrap();
    let m = expert.profile.get(EmotionClass::Positive).unwrap().mean[au12];
    assert!((m - table.probability(EmotionClass::Positive, 12) * 0.2).abs() < 0.02);
}
