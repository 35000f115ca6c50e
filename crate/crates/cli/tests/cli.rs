use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use scenemorph_core::dataset::{DatasetManifest, Domain};
use scenemorph_core::raster::Image;
use scenemorph_core::translator::Checkpoint;

fn scenemorph(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scenemorph"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = scenemorph(dir, args);
    assert!(out.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&out.stderr));
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_stills(dir: &Path, n: usize, h: usize, w: usize) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..n {
        Image::filled(h, w, 3, (i % 200) as f32 / 255.0).save_png(&dir.join(format!("img{i:05}.png"))).unwrap();
    }
}

/// Two synthetic 8×8 domains under `dir/s1` and `dir/s2`.
fn two_domains(dir: &Path, n: usize) -> (PathBuf, PathBuf) {
    let n = n.to_string();
    for (domain, alias, seed) in [("S1", "day", "11"), ("S2", "night", "12")] {
        let out = domain.to_lowercase();
        ok(
            dir,
            &["prepare", "--synthetic", &n, "--domain", domain, "--alias", alias, "--height", "8", "--width", "8", "--seed", seed, "--out", &out],
        );
    }
    (dir.join("s1/manifest.tsv"), dir.join("s2/manifest.tsv"))
}

#[test]
fn prepare_directory_of_fifty_images() {
    let tmp = tempfile::tempdir().unwrap();
    write_stills(&tmp.path().join("raw"), 50, 12, 16);
    ok(tmp.path(), &["prepare", "--input", "raw", "--height", "6", "--width", "8", "--out", "ds"]);
    let m = DatasetManifest::read(&tmp.path().join("ds/manifest.tsv")).unwrap();
    assert_eq!(m.entries.len(), 50);
    assert_eq!(m.frame_ids()[49], "frame_000049");
    let im = Image::load(&m.resolve(&m.entries[0])).unwrap();
    assert_eq!((im.height(), im.width()), (6, 8));
}

#[test]
fn prepare_stride_budget_and_exclusions() {
    let tmp = tempfile::tempdir().unwrap();
    write_stills(&tmp.path().join("raw"), 1000, 4, 4);
    let excluded = ["frame_000000", "frame_000010", "frame_000500", "frame_000990", "frame_000120"];
    std::fs::write(tmp.path().join("skip.txt"), format!("# wipers\n{}\nghost\n", excluded.join("\n"))).unwrap();
    let out = ok(
        tmp.path(),
        &["prepare", "--input", "raw", "--stride", "10", "--exclude", "skip.txt", "--height", "4", "--width", "4", "--out", "ds"],
    );
    assert!(stderr(&out).contains("ghost"), "unknown ids are reported");
    let m = DatasetManifest::read(&tmp.path().join("ds/manifest.tsv")).unwrap();
    assert_eq!(m.entries.len(), 100);
    assert!(m.frame_ids().iter().all(|id| id[6..].parse::<usize>().unwrap() % 10 == 0));
    let off: Vec<String> = m.entries.iter().filter(|e| !e.include).map(|e| e.frame_id()).collect();
    assert_eq!(off.len(), 5);
    assert!(excluded.iter().all(|id| off.contains(&id.to_string())));

    ok(tmp.path(), &["prepare", "--input", "raw", "--budget", "100", "--height", "4", "--width", "4", "--out", "b"]);
    assert_eq!(DatasetManifest::read(&tmp.path().join("b/manifest.tsv")).unwrap().entries.len(), 100);
}

#[test]
fn exit_codes_separate_usage_from_data_errors() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&scenemorph(tmp.path(), &["prepare", "--bogus"])), 1);
    assert_eq!(code(&scenemorph(tmp.path(), &["prepare", "--input", "raw"])), 1, "missing --out");
    assert_eq!(code(&scenemorph(tmp.path(), &["prepare", "--input", "nowhere", "--out", "x"])), 2);
    assert_eq!(code(&scenemorph(tmp.path(), &["frobnicate"])), 1);
    assert_eq!(code(&scenemorph(tmp.path(), &["--help"])), 0);
}

#[test]
fn train_then_translate_preserves_ids() {
    let tmp = tempfile::tempdir().unwrap();
    let (s1, s2) = two_domains(tmp.path(), 8);
    let (s1, s2) = (s1.to_str().unwrap(), s2.to_str().unwrap());
    ok(tmp.path(), &["train", "--s1", s1, "--s2", s2, "--arch", "tiny", "--steps", "3", "--seed", "4", "--out", "run"]);
    let log = std::fs::read_to_string(tmp.path().join("run/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 4);
    assert!(log.starts_with("step,vae_1,vae_2,gan_1,gan_2,cc_1,cc_2,total\n1,"));

    ok(tmp.path(), &["translate", "--checkpoint", "run/translator.ckpt", "--manifest", s1, "--out", "tr"]);
    let source = DatasetManifest::read(Path::new(s1)).unwrap();
    let moved = DatasetManifest::read(&tmp.path().join("tr/manifest.tsv")).unwrap();
    assert_eq!(moved.frame_ids(), source.frame_ids());
    assert_eq!((moved.domain.domain, moved.domain.alias.as_str()), (Domain::S2, "night"));
    assert_eq!(std::fs::read_dir(tmp.path().join("tr/frames")).unwrap().count(), 8);

    let wrong = scenemorph(tmp.path(), &["translate", "--checkpoint", "run/translator.ckpt", "--manifest", s1, "--arch", "toy", "--out", "t2"]);
    assert_eq!(code(&wrong), 2, "{}", stderr(&wrong));
    std::fs::write(tmp.path().join("junk.ckpt"), b"not a checkpoint").unwrap();
    assert_eq!(code(&scenemorph(tmp.path(), &["translate", "--checkpoint", "junk.ckpt", "--manifest", s1, "--out", "t3"])), 2);
}

#[test]
fn config_file_values_yield_to_flags() {
    let tmp = tempfile::tempdir().unwrap();
    two_domains(tmp.path(), 4);
    std::fs::write(
        tmp.path().join("campaign.ini"),
        "seed = 9\n[train]\ns1 = s1/manifest.tsv\ns2 = s2/manifest.tsv\narch = tiny\nsteps = 2\nbatch_size = 2\nout = run\n",
    )
    .unwrap();
    ok(tmp.path(), &["--config", "campaign.ini", "train"]);
    assert_eq!(std::fs::read_to_string(tmp.path().join("run/train_log.csv")).unwrap().lines().count(), 3);
    assert_eq!(Checkpoint::load(&tmp.path().join("run/translator.ckpt")).unwrap().config.seed, 9);
    ok(tmp.path(), &["--config", "campaign.ini", "train", "--steps", "1", "--out", "run1"]);
    assert_eq!(std::fs::read_to_string(tmp.path().join("run1/train_log.csv")).unwrap().lines().count(), 2);

    std::fs::write(tmp.path().join("bad.ini"), "[train]\nstepz = 2\n").unwrap();
    assert_eq!(code(&scenemorph(tmp.path(), &["--config", "bad.ini", "train"])), 1);
}

#[test]
fn resumed_training_reproduces_the_straight_run() {
    let tmp = tempfile::tempdir().unwrap();
    let (s1, s2) = two_domains(tmp.path(), 6);
    let (s1, s2) = (s1.to_str().unwrap(), s2.to_str().unwrap());
    let base = ["train", "--s1", s1, "--s2", s2, "--arch", "tiny", "--seed", "3", "--lr-g", "0.01", "--lr-d", "0.01"];
    ok(tmp.path(), &[&base[..], &["--steps", "4", "--out", "straight"]].concat());
    ok(tmp.path(), &[&base[..], &["--steps", "2", "--out", "split"]].concat());
    ok(tmp.path(), &["train", "--s1", s1, "--s2", s2, "--resume", "split/translator.ckpt", "--steps", "4", "--out", "split"]);
    let read = |d: &str| std::fs::read(tmp.path().join(d)).unwrap();
    assert_eq!(read("split/train_log.csv"), read("straight/train_log.csv"));
    assert_eq!(read("split/translator.ckpt"), read("straight/translator.ckpt"));
}

#[test]
fn divergence_exits_with_runtime_error_and_keeps_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let (s1, s2) = two_domains(tmp.path(), 4);
    let out = scenemorph(
        tmp.path(),
        &[
            "train", "--s1", s1.to_str().unwrap(), "--s2", s2.to_str().unwrap(), "--arch", "tiny", "--steps", "50",
            "--checkpoint-interval", "1", "--lr-g", "1e150", "--lr-d", "1e150", "--out", "run",
        ],
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("diverged") || stderr(&out).contains("non-finite"), "{}", stderr(&out));
    let kept = Checkpoint::load(&tmp.path().join("run/translator.ckpt")).unwrap();
    assert!(kept.step >= 1 && kept.step < 50);
    assert!(stderr(&out).contains("is kept"));
}

#[test]
fn test_rejects_misaligned_manifests() {
    let tmp = tempfile::tempdir().unwrap();
    let (s1, _) = two_domains(tmp.path(), 5);
    let text = std::fs::read_to_string(&s1).unwrap();
    std::fs::write(tmp.path().join("s1/shuffled.tsv"), text.replace("s1_00002", "s1_00004x")).unwrap();
    let out = scenemorph(
        tmp.path(),
        &["test", "--original", "s1/manifest.tsv", "--transformed", "s1/shuffled.tsv", "--model", "constant:0", "--out", "t"],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("s1_00002"), "{}", stderr(&out));
}

#[test]
fn constant_model_rows_are_zero_and_grids_are_capped() {
    let tmp = tempfile::tempdir().unwrap();
    two_domains(tmp.path(), 100);
    ok(
        tmp.path(),
        &[
            "test", "--original", "s1/manifest.tsv", "--transform", "fog:0.3", "--model", "constant:-2.5", "--model", "brightness:100",
            "--scene", "foggy", "--flags", "--grid", "1000", "--out", "t",
        ],
    );
    let report = std::fs::read_to_string(tmp.path().join("t/report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "model_id,scene_id,epsilon_degrees,count,total_frames");
    assert_eq!(&lines[1..5], ["constant:-2.5,foggy,10,0,100", "constant:-2.5,foggy,20,0,100", "constant:-2.5,foggy,30,0,100", "constant:-2.5,foggy,40,0,100"]);
    assert_eq!(lines.len(), 9);
    let flags = std::fs::read_to_string(tmp.path().join("t/flags/2_brightness_100.csv")).unwrap();
    assert_eq!(flags.lines().count(), 1 + 100 * 4);
    let grid = Image::load(&tmp.path().join("t/grids/1_constant_-2.5.png")).unwrap();
    assert_eq!(grid.height(), 64 * (8 + 4), "rows are capped at 64");
    assert!(tmp.path().join("t/predictions/2_brightness_100_transformed.csv").exists());
}

fn report_csv(scene: &str, models: &[&str], counts: [usize; 4]) -> String {
    let mut s = String::from("model_id,scene_id,epsilon_degrees,count,total_frames\n");
    for m in models {
        for (eps, c) in [10, 20, 30, 40].iter().zip(counts) {
            s.push_str(&format!("{m},{scene},{eps},{c},5614\n"));
        }
    }
    s
}

#[test]
fn report_merges_scenes_and_models() {
    let tmp = tempfile::tempdir().unwrap();
    let models = ["Autumn", "Chauffeur", "Rwightman"];
    std::fs::write(tmp.path().join("snowy.csv"), report_csv("snowy", &models, [334, 115, 45, 14])).unwrap();
    std::fs::write(tmp.path().join("rainy.csv"), report_csv("rainy", &models, [120, 40, 9, 1])).unwrap();
    ok(tmp.path(), &["report", "--input", "snowy.csv", "--input", "rainy.csv", "--out", "rep"]);
    let table = std::fs::read_to_string(tmp.path().join("rep/table.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    let cells: usize = rows.iter().map(|r| r.split(',').skip(3).filter(|c| !c.is_empty()).count()).sum();
    assert_eq!(cells, 24);
    assert!(rows.contains(&"snowy,Rwightman,5614,334,115,45,14"));
    for scene in ["snowy", "rainy"] {
        let svg = std::fs::read_to_string(tmp.path().join(format!("rep/plots/{scene}.svg"))).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 3);
    }
}

#[test]
fn report_flags_monotonicity_and_schema_errors() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("bad.csv"), report_csv("snowy", &["m"], [10, 20, 5, 1])).unwrap();
    let out = scenemorph(tmp.path(), &["report", "--input", "bad.csv", "--out", "rep"]);
    assert_eq!(code(&out), 2);
    assert!(std::fs::read_to_string(tmp.path().join("rep/violations.csv")).unwrap().contains("m,snowy,10,10,20,20"));

    std::fs::write(tmp.path().join("schema.csv"), "model,scene,eps,count\nm,s,10,1\n").unwrap();
    assert_eq!(code(&scenemorph(tmp.path(), &["report", "--input", "schema.csv", "--out", "rep2"])), 2);
    assert_eq!(code(&scenemorph(tmp.path(), &["report", "--out", "rep3"])), 1);
}
