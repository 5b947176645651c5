//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Run with `cargo test -p miex-cli --test acceptance`.

mod common;

use std::collections::{BTreeSet, HashSet};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use statrs::distribution::{ChiSquared, ContinuousCDF};

use miex_core::au::{AuTriplet, AuVector, ClassSourceCounts, EmotionClass, Provenance, SourceSet, SourceTag, AU_DIM};
use miex_core::composer::{apply_fold_exclusion, compose, interpolate_sequence, CompositionConfig};
use miex_core::eval::{accuracy, confusion, permutation_test, significance_star, split_subjects, uar, uf1, RunSeries};
use miex_core::ingest::IdentityPool;
use miex_core::rng::RngStream;
use miex_core::samplers::{
    build_triplet_pool, mae_apex_window, sample_expert_triplet, select_mae_apex_index, ExpertEntry, ExpertTable,
    SamplerConfig, TripletPool,
};
use miex_core::toy::{run_ablation, ToyConfig, ToyWorld, WorldConfig};

// Pinned tolerances and budgets.
const COMPOSE_BUDGET: Duration = Duration::from_secs(60);
const ABLATION_BUDGET: Duration = Duration::from_secs(300);
const INTERP_TOL: f64 = 1e-12;
const METRIC_TOL: f64 = 1e-12;
const CHI_SQUARE_MIN_P: f64 = 0.001;
const FREQ_SIGMAS: f64 = 3.0;
const ABLATION_POOLED_SDS: f64 = 2.0;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn world_pool(seed: u64) -> TripletPool {
    let world = ToyWorld::build(&WorldConfig::default(), None);
    let mut counts = ClassSourceCounts::default();
    for class in EmotionClass::ALL {
        let mie = world.mie_clips.iter().filter(|c| c.label() == class).count();
        counts.set(class, SourceTag::MiE, mie);
        counts.set(class, SourceTag::MaE, 1_000);
        counts.set(class, SourceTag::Expert, 1_000);
    }
    build_triplet_pool(
        &world.mie_clips,
        &world.mae_train,
        &ExpertTable::default_table(),
        &counts,
        &SamplerConfig::default(),
        seed,
    )
    .expect("pool builds")
}

fn composition_count() -> Outcome {
    let pool = world_pool(1);
    let cfg = CompositionConfig::default();
    let ids = IdentityPool::numbered("id", cfg.num_identities);
    let start = Instant::now();
    let first = compose(&pool, &ids, &cfg).map_err(|e| e.to_string())?;
    let bytes_a = first.to_jsonl();
    let elapsed = start.elapsed();
    let bytes_b = compose(&pool, &ids, &cfg).map_err(|e| e.to_string())?.to_jsonl();

    check(first.len() == 45_000, || format!("{} samples", first.len()))?;
    check(first.count_by_class() == [15_000; 3], || format!("class counts {:?}", first.count_by_class()))?;
    let identities: HashSet<&str> = first.samples.iter().map(|s| s.identity_id.as_str()).collect();
    check(identities.len() == 5_000, || format!("{} identities", identities.len()))?;
    for chunk in first.samples.chunks(9) {
        check(chunk.iter().all(|s| s.identity_id == chunk[0].identity_id), || "identity block not 9".into())?;
    }
    check(bytes_a == bytes_b, || "regenerated manifest differs".into())?;
    check(elapsed < COMPOSE_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("45000 samples, 15000 per class, {elapsed:.2?}, byte-identical"))
}

fn sampler_laws() -> Outcome {
    let ps = [0.2, 0.5, 0.8];
    let table = ExpertTable::new([
        (
            EmotionClass::Positive,
            vec![
                ExpertEntry { au: 1, p: ps[0] },
                ExpertEntry { au: 2, p: ps[1] },
                ExpertEntry { au: 4, p: ps[2] },
            ],
        ),
        (EmotionClass::Negative, vec![]),
        (EmotionClass::Surprise, vec![]),
    ])
    .map_err(|e| e.to_string())?;
    let cfg = SamplerConfig::default();
    let draws = 10_000;
    let mut active = [0usize; 3];
    for k in 0..draws {
        let mut rng = RngStream::new(2, "acceptance/expert", k as u64);
        let t = sample_expert_triplet(EmotionClass::Positive, &table, &cfg, &mut rng);
        check(t.onset.is_zero(), || format!("draw {k}: non-zero onset"))?;
        for (i, au) in [1u8, 2, 4].iter().enumerate() {
            if t.apex.get_au(*au).unwrap() > 0.0 {
                active[i] += 1;
            }
        }
    }
    let mut freq_detail = Vec::new();
    for (i, &p) in ps.iter().enumerate() {
        let f = active[i] as f64 / draws as f64;
        let bound = FREQ_SIGMAS * (p * (1.0 - p) / draws as f64).sqrt();
        check((f - p).abs() <= bound, || format!("p={p}: frequency {f} outside ±{bound:.4}"))?;
        freq_detail.push(format!("{p}->{f:.4}"));
    }

    let mut chi_detail = Vec::new();
    for n in [7usize, 50, 100] {
        let (lo, hi) = mae_apex_window(n, &cfg).map_err(|e| e.to_string())?;
        let width = hi - lo + 1;
        let mut counts = vec![0usize; width];
        let mut rng = RngStream::new(3, "acceptance/window", n as u64);
        for _ in 0..draws {
            let idx = select_mae_apex_index(n, &cfg, &mut rng).map_err(|e| e.to_string())?;
            check((lo..=hi).contains(&idx), || format!("n={n}: index {idx} outside [{lo},{hi}]"))?;
            counts[idx - lo] += 1;
        }
        let expected = draws as f64 / width as f64;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let p = if width == 1 {
            1.0
        } else {
            1.0 - ChiSquared::new((width - 1) as f64).unwrap().cdf(chi2)
        };
        check(p > CHI_SQUARE_MIN_P, || format!("n={n}: chi-square p = {p}"))?;
        chi_detail.push(format!("n={n} [{lo},{hi}] p={p:.3}"));
    }
    Ok(format!("onsets zero; freq {}; {}", freq_detail.join(" "), chi_detail.join(", ")))
}

fn random_au(rng: &mut RngStream) -> AuVector {
    let mut v = [0.0; AU_DIM];
    v.iter_mut().for_each(|x| *x = rng.next_f64());
    AuVector::new(v).unwrap()
}

fn interpolation() -> Outcome {
    let mut worst = 0.0f64;
    for k in 0..1_000u64 {
        let mut rng = RngStream::new(4, "acceptance/interp", k);
        let t = AuTriplet::new(
            random_au(&mut rng),
            random_au(&mut rng),
            EmotionClass::Surprise,
            SourceTag::MaE,
            Provenance::synthetic("test", "x"),
        )
        .unwrap();
        let frames = interpolate_sequence(&t, 10).map_err(|e| e.to_string())?;
        check(frames.len() == 10, || "wrong frame count".into())?;
        check(frames[0] == t.onset && frames[9] == t.apex, || format!("triplet {k}: endpoints not exact"))?;
        for (j, f) in frames.iter().enumerate() {
            for d in 0..AU_DIM {
                let (o, a) = (t.onset.values()[d], t.apex.values()[d]);
                let expected = o + j as f64 / 9.0 * (a - o);
                worst = worst.max((f.values()[d] - expected).abs());
            }
        }
    }
    check(worst <= INTERP_TOL, || format!("max deviation {worst:e}"))?;
    Ok(format!("1000 triplets, exact endpoints, max step error {worst:.1e}"))
}

/// Per-class counts straight from the label lists.
fn oracle(pred: &[EmotionClass], truth: &[EmotionClass]) -> (f64, f64, f64) {
    let (mut f1s, mut recalls, mut correct) = (0.0, 0.0, 0usize);
    for class in EmotionClass::ALL {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (p, t) in pred.iter().zip(truth) {
            match (*p == class, *t == class) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        f1s += if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
        recalls += recall;
    }
    for (p, t) in pred.iter().zip(truth) {
        correct += usize::from(p == t);
    }
    (f1s / 3.0, recalls / 3.0, correct as f64 / pred.len() as f64)
}

fn metric_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for k in 0..1_000u64 {
        let mut rng = RngStream::new(5, "acceptance/metrics", k);
        let n = rng.uniform_int(1, 40) as usize;
        let draw = |rng: &mut RngStream| EmotionClass::from_code(rng.uniform_index(3)).unwrap();
        let truth: Vec<_> = (0..n).map(|_| draw(&mut rng)).collect();
        let pred: Vec<_> = (0..n).map(|_| draw(&mut rng)).collect();
        let cm = confusion(&pred, &truth).map_err(|e| e.to_string())?;
        let got = (uf1(&cm).unwrap(), uar(&cm).unwrap(), accuracy(&cm).unwrap());
        let want = oracle(&pred, &truth);
        worst = worst.max((got.0 - want.0).abs()).max((got.1 - want.1).abs()).max((got.2 - want.2).abs());
    }
    check(worst <= METRIC_TOL, || format!("max deviation {worst:e}"))?;

    let truth: Vec<_> = EmotionClass::ALL.iter().cycle().take(30).copied().collect();
    for class in EmotionClass::ALL {
        let cm = confusion(&vec![class; 30], &truth).unwrap();
        check(uar(&cm).unwrap() == 1.0 / 3.0, || format!("all-{class}: uar {}", uar(&cm).unwrap()))?;
        check(uf1(&cm).unwrap() == 1.0 / 6.0, || format!("all-{class}: uf1 {}", uf1(&cm).unwrap()))?;
    }
    Ok(format!("1000 random sets, max deviation {worst:.1e}; uar=1/3, uf1=1/6 exact"))
}

fn fold_protocol() -> Outcome {
    for k in [3usize, 5] {
        for trial in 0..200u64 {
            let mut rng = RngStream::new(6, "acceptance/subjects", trial);
            let n = k + rng.uniform_index(60);
            let subjects: Vec<String> = (0..n).map(|i| format!("s{i:03}")).collect();
            let plan = split_subjects(&subjects, k, trial).map_err(|e| e.to_string())?;
            let all: Vec<&String> = plan.folds.iter().flatten().collect();
            let unique: BTreeSet<&String> = all.iter().copied().collect();
            check(plan.folds.len() == k, || "wrong fold count".into())?;
            check(all.len() == n && unique.len() == n, || format!("k={k}: not a partition"))?;
            let sizes: Vec<usize> = plan.folds.iter().map(Vec::len).collect();
            let spread = sizes.iter().max().unwrap() - sizes.iter().min().unwrap();
            check(spread <= 1, || format!("k={k}: sizes {sizes:?}"))?;
        }
    }

    let world = ToyWorld::build(&WorldConfig::default(), None);
    let pool = world_pool(7);
    let cfg = CompositionConfig {
        num_identities: 300,
        ..Default::default()
    };
    let manifest = compose(&pool, &IdentityPool::numbered("id", 300), &cfg).map_err(|e| e.to_string())?;
    let (filtered, removed) = apply_fold_exclusion(&manifest, &world.test_subjects);
    let is_test = |s: &miex_core::composer::SampleSpec| {
        s.source == SourceTag::MiE
            && world
                .test_subjects
                .contains(&(s.provenance.dataset.clone(), s.provenance.subject_id.clone()))
    };
    let expected: Vec<_> = manifest.samples.iter().filter(|s| !is_test(s)).cloned().collect();
    check(removed > 0, || "nothing excluded".into())?;
    check(filtered.samples == expected, || "exclusion removed the wrong samples".into())?;
    check(removed == manifest.len() - expected.len(), || "removed count wrong".into())?;
    let (again, removed_again) = apply_fold_exclusion(&filtered, &world.test_subjects);
    check(again.samples == filtered.samples && removed_again == 0, || "not idempotent".into())?;
    Ok(format!("k=3,5 partitions over 400 lists; {removed} MiE samples excluded exactly; idempotent"))
}

fn permutation() -> Outcome {
    let a = RunSeries::new("a", vec![0.0; 3]).unwrap();
    let b = RunSeries::new("b", vec![1.0; 3]).unwrap();
    let p = permutation_test(&a, &b, 10_000, &RngStream::new(8, "acceptance/perm", 0));
    check(p == 0.1, || format!("p = {p}"))?;
    for (p, tag) in [(0.2, "n.s."), (0.03, "*"), (0.004, "**"), (0.0005, "***")] {
        let got = significance_star(p).map_err(|e| e.to_string())?;
        check(got == tag, || format!("{p} -> {got}"))?;
    }
    Ok("p = 0.1 exactly; 0.2 n.s., 0.03 *, 0.004 **, 0.0005 ***".into())
}

fn toy_ablation() -> Outcome {
    let cfg = ToyConfig::default();
    check(cfg.num_seeds == 20 && cfg.num_identities == 1_000, || "unexpected toy defaults".into())?;
    check(cfg.test_sources == SourceSet::all(), || "test set is not the three-source mixture".into())?;
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let report = single.install(|| run_ablation(&cfg)).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let full = report.result(SourceSet::all()).ok_or("no full-composition result")?;
    let mut detail = vec![format!("full {:.4}±{:.4}", full.mean_uf1, full.std_uf1)];
    for source in SourceTag::ALL {
        let s = report.result(SourceSet::of(&[source])).ok_or("missing single-source result")?;
        let pooled = ((full.std_uf1.powi(2) + s.std_uf1.powi(2)) / 2.0).sqrt();
        let floor = s.mean_uf1 - ABLATION_POOLED_SDS * pooled;
        check(full.mean_uf1 >= floor, || {
            format!("full {:.4} < {source} {:.4} - 2x{pooled:.4}", full.mean_uf1, s.mean_uf1)
        })?;
        detail.push(format!("{source} {:.4}±{:.4}", s.mean_uf1, s.std_uf1));
    }
    check(elapsed < ABLATION_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{}; {elapsed:.1?} single-threaded", detail.join(", ")))
}

const PIPELINE_ARTIFACTS: [&str; 6] = [
    "clips.jsonl",
    "pool.jsonl",
    "manifest.jsonl",
    "embeddings.jsonl",
    "folds.json",
    "metrics.json",
];

fn run_pipeline(dir: &Path, jobs: &str, predictions: Option<&str>) -> Result<String, String> {
    common::write_fixture(dir, 500);
    let steps: [&[&str]; 5] = [
        &["ingest", "--out", "clips.jsonl"],
        &["pool", "--clips", "clips.jsonl", "--out", "pool.jsonl"],
        &["compose", "--pool", "pool.jsonl", "--frames", "10", "--out", "manifest.jsonl"],
        &["render-mock", "--manifest", "manifest.jsonl", "--out", "embeddings.jsonl"],
        &["split", "--clips", "clips.jsonl", "--k", "3", "--out", "folds.json"],
    ];
    let exec = |args: &[&str]| -> Result<(), String> {
        let out = common::miex()
            .current_dir(dir)
            .args(["--jobs", jobs, "--config", "config.json"])
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        check(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    };
    for step in steps {
        exec(step)?;
    }
    let manifest = std::fs::read_to_string(dir.join("manifest.jsonl")).map_err(|e| e.to_string())?;
    let preds = predictions.map_or_else(|| common::predictions_for(&manifest), str::to_string);
    std::fs::write(dir.join("predictions.csv"), &preds).map_err(|e| e.to_string())?;
    exec(&["score", "--predictions", "predictions.csv", "--truth", "manifest.jsonl", "--out", "metrics.json"])?;
    Ok(preds)
}

fn pipeline_determinism() -> Outcome {
    let one = tempfile::tempdir().map_err(|e| e.to_string())?;
    let eight = tempfile::tempdir().map_err(|e| e.to_string())?;
    let preds = run_pipeline(one.path(), "1", None)?;
    run_pipeline(eight.path(), "8", Some(&preds))?;
    let mut total = 0;
    for name in PIPELINE_ARTIFACTS {
        let a = std::fs::read(one.path().join(name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(eight.path().join(name)).map_err(|e| e.to_string())?;
        check(a == b, || format!("{name} differs between 1 and 8 workers"))?;
        total += a.len();
    }
    Ok(format!("{} artifacts ({total} bytes) identical across --jobs 1 and 8", PIPELINE_ARTIFACTS.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("composition count", composition_count),
        ("sampler laws", sampler_laws),
        ("interpolation", interpolation),
        ("metric oracle", metric_oracle),
        ("fold protocol", fold_protocol),
        ("permutation test", permutation),
        ("toy ablation ordering", toy_ablation),
        ("end-to-end determinism", pipeline_determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
