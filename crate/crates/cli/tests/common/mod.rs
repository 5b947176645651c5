#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use miex_core::au::EmotionClass;
use miex_core::ingest::{write_au_csv, AuTimeSeries, ClipRecord};
use miex_core::toy::{ToyWorld, WorldConfig};

pub fn miex() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_miex"));
    cmd.env_remove("MIEX_DATA_ROOT");
    cmd
}

pub fn run(dir: &Path, args: &[&str]) -> Output {
    miex().current_dir(dir).args(args).output().expect("miex runs")
}

pub fn run_ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "miex {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn raw_label(class: EmotionClass, j: usize) -> &'static str {
    match class {
        EmotionClass::Positive => "happiness",
        EmotionClass::Negative => ["disgust", "sadness", "repression", "fear"][j % 4],
        EmotionClass::Surprise => "surprise",
    }
}

fn annotation_csv(clips: &[ClipRecord]) -> String {
    let mut s = String::from("clip_id,dataset,subject_id,label,onset,apex,offset,n_frames\n");
    for (j, c) in clips.iter().enumerate() {
        let a = c.annotation();
        let offset = a.offset.map_or("-".to_string(), |o| o.to_string());
        writeln!(
            s,
            "{},{},{},{},{},{},{offset},{}",
            a.clip_id,
            a.dataset,
            a.subject_id,
            raw_label(a.label, j),
            a.onset,
            a.apex,
            a.n_frames
        )
        .unwrap();
    }
    s
}

fn au_csv(clips: &[ClipRecord]) -> Vec<u8> {
    let series: Vec<AuTimeSeries> = clips.iter().map(|c| c.series().clone()).collect();
    let mut buf = Vec::new();
    write_au_csv(&mut buf, &series).unwrap();
    buf
}

/// Writes synthetic MiE/MaE inputs and a small pipeline config into `dir`;
/// returns the config path.
pub fn write_fixture(dir: &Path, num_identities: usize) -> PathBuf {
    let world = ToyWorld::build(&WorldConfig::default(), None);
    let data = dir.join("data");
    std::fs::create_dir_all(&data).unwrap();
    std::fs::write(data.join("mie_au.csv"), au_csv(&world.mie_clips)).unwrap();
    std::fs::write(data.join("mie_annotations.csv"), annotation_csv(&world.mie_clips)).unwrap();
    std::fs::write(data.join("mae_au.csv"), au_csv(&world.mae_train)).unwrap();
    std::fs::write(data.join("mae_annotations.csv"), annotation_csv(&world.mae_train)).unwrap();
    let config = serde_json::json!({
        "seed": 11,
        "paths": {
            "root": "data",
            "mie_au_csv": ["mie_au.csv"],
            "mie_annotations": "mie_annotations.csv",
            "mae_au_csv": ["mae_au.csv"],
            "mae_annotations": "mae_annotations.csv"
        },
        "au_scale_max": 1.0,
        "pool": {"mae_per_class": 200, "expert_per_class": 200},
        "composition": {
            "num_identities": num_identities,
            "samples_per_id": {
                "positive": {"mie": 1, "mae": 1, "expert": 1},
                "negative": {"mie": 1, "mae": 1, "expert": 1},
                "surprise": {"mie": 1, "mae": 1, "expert": 1}
            }
        },
        "split": {"k": 3}
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

/// Predictions for every manifest sample: the true label on even lines,
/// `negative` otherwise.
pub fn predictions_for(manifest: &str) -> String {
    let mut s = String::from("sample_id,predicted_label\n");
    for (i, line) in manifest.lines().skip(1).enumerate() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let label = if i % 2 == 0 { v["label"].as_str().unwrap() } else { "negative" };
        writeln!(s, "{},{label}", v["sample_id"].as_str().unwrap()).unwrap();
    }
    s
}
