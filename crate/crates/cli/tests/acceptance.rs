//! Acceptance run: one line per criterion, non-zero exit if any fails.
//!
//! `cargo test -p scenemorph-cli --test acceptance -- 3 7` runs a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scenemorph_core::dataset::{Domain, FrameRecord};
use scenemorph_core::harness::{
    apply_relation, check_monotone, fog, inconsistency_count, pair_predictions, run_model, sweep_bounds, ErrorBound, InconsistencyReport,
    MetamorphicRelation, Prediction, PredictionPair, ReportRow,
};
use scenemorph_core::models::{train_toy_cnn, BrightnessModel, CnnConfig, ConstantModel, SteeringModel};
use scenemorph_core::raster::Image;
use scenemorph_core::synthetic;
use scenemorph_core::translator::{
    bce_gan_losses, cycle_loss, objective_gradient, total_objective, train, Architecture, Distance, LossWeights, Noise, Objective,
    OutputSquash, Slot, TrainConfig, TranslatorParams,
};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit_secs as f64 {
        Ok(())
    } else {
        Err(format!("took {:.1}s, limit {limit_secs}s", elapsed.as_secs_f64()))
    }
}

/// Predictions on a half-degree grid, so that many deviations land exactly on a bound.
fn random_pairs<'a>(ids: &'a [String], n: usize, rng: &mut ChaCha8Rng) -> Vec<PredictionPair<'a>> {
    (0..n)
        .map(|i| PredictionPair {
            frame_id: &ids[i],
            angle_original: f64::from(rng.random_range(-120i32..=120)) * 0.5,
            angle_transformed: f64::from(rng.random_range(-120i32..=120)) * 0.5,
        })
        .collect()
}

fn random_bounds(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut b: Vec<f64> = (0..rng.random_range(1..=6)).map(|_| f64::from(rng.random_range(1i32..=100)) * 0.5).collect();
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

fn c1_oracle() -> Verdict {
    let start = Instant::now();
    let ids: Vec<String> = (0..10_000).map(|i| format!("f{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for instance in 0..1000 {
        let n = rng.random_range(0..=10_000);
        let pairs = random_pairs(&ids, n, &mut rng);
        let raw: Vec<(f64, f64)> = pairs.iter().map(|p| (p.angle_original, p.angle_transformed)).collect();
        for eps in random_bounds(&mut rng) {
            let mut expected = 0;
            for &(a, b) in &raw {
                let d = if a > b { a - b } else { b - a };
                if d > eps {
                    expected += 1;
                }
            }
            let got = inconsistency_count(&pairs, ErrorBound::new(eps).unwrap());
            if got != expected {
                return Err(format!("instance {instance}, eps {eps}: {got} vs oracle {expected}"));
            }
        }
    }
    within(start.elapsed(), 60)?;
    Ok("1000 instances agree with the double-loop oracle".into())
}

fn c2_monotone() -> Verdict {
    let ids: Vec<String> = (0..2000).map(|i| format!("f{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    for _ in 0..1000 {
        let n = rng.random_range(0..=2000);
        let pairs = random_pairs(&ids, n, &mut rng);
        let bounds = ErrorBound::list(&random_bounds(&mut rng)).unwrap();
        let rows = sweep_bounds(&pairs, &bounds).unwrap();
        violations += rows.windows(2).filter(|w| w[1].count > w[0].count).count();
    }
    let fixture = InconsistencyReport {
        model_id: "Rwightman".into(),
        scene_id: "snowy".into(),
        rows: [(10.0, 334), (20.0, 115), (30.0, 45), (40.0, 14)]
            .into_iter()
            .map(|(epsilon, count)| ReportRow {
                epsilon,
                count,
                total_frames: 5614,
            })
            .collect(),
        per_frame_flags: None,
    };
    violations += check_monotone(&[fixture]).len();
    check(violations == 0, format!("{violations} violations over 1000 sets and the 334/115/45/14 fixture"))
}

fn labeled_frames(n: usize, seed: u64) -> Vec<FrameRecord> {
    synthetic::corpus(Domain::S1, n, 24, 32, seed)
}

fn c3_identity() -> Verdict {
    let stream = labeled_frames(500, 3);
    let cnn = train_toy_cnn(&labeled_frames(64, 4), &CnnConfig { epochs: 5, ..CnnConfig::default() }).map_err(|e| e.to_string())?;
    let identity = MetamorphicRelation::identity();
    let mut models: Vec<Box<dyn SteeringModel>> = vec![Box::new(ConstantModel::new(3.0).unwrap()), Box::new(cnn.model)];
    let mut counts = Vec::new();
    for model in &mut models {
        let a = run_model(model.as_mut(), &stream).map_err(|e| e.to_string())?;
        let b = run_model(model.as_mut(), &apply_relation(&identity, &stream).unwrap()).map_err(|e| e.to_string())?;
        let pairs = pair_predictions(&a, &b).unwrap();
        counts.extend(sweep_bounds(&pairs, &ErrorBound::defaults()).unwrap().iter().map(|r| r.count));
    }
    check(counts.iter().all(|&c| c == 0), format!("counts {counts:?} on 500 frames"))
}

fn c4_strict_boundary() -> Verdict {
    let p = |frame_id, a, b| PredictionPair {
        frame_id,
        angle_original: a,
        angle_transformed: b,
    };
    let on_bound = [p("a", 0.0, 10.0), p("b", 5.0, -5.0), p("c", 12.5, 2.5), p("d", -40.0, -30.0)];
    let just_over = [p("e", 0.0, 10.000001), p("f", 0.0, -10.5)];
    let ten = ErrorBound::new(10.0).unwrap();
    let (on, over) = (inconsistency_count(&on_bound, ten), inconsistency_count(&just_over, ten));
    check(on == 0 && over == 2, format!("{on} of 4 exact-ε pairs counted, {over} of 2 just above"))
}

fn random_images(n: usize, h: usize, w: usize, seed: u64) -> Vec<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| Image::from_fn(h, w, |_, _, _| rng.random_range(0.05f32..0.95))).collect()
}

fn c5_gradient() -> Verdict {
    let start = Instant::now();
    let mut params = TranslatorParams::initialized(Architecture::tiny(), 21).unwrap();
    let count = params.param_count();
    let (b1, b2) = (random_images(2, 8, 8, 1), random_images(2, 8, 8, 2));
    let objective = Objective::default();
    let noise = Noise::Seeded(5);
    let (_, grads) = objective_gradient(&params, &b1, &b2, &objective, noise).unwrap();
    let h = 1e-4;
    let mut worst = 0.0f64;
    for slot in Slot::ALL {
        for i in 0..params.net(slot).param_count() {
            let orig = params.net(slot).params()[i];
            params.net_mut(slot).params_mut()[i] = orig + h;
            let up = total_objective(&params, &b1, &b2, &objective, noise).unwrap().total;
            params.net_mut(slot).params_mut()[i] = orig - h;
            let down = total_objective(&params, &b1, &b2, &objective, noise).unwrap().total;
            params.net_mut(slot).params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grads.slot(slot)[i];
            worst = worst.max((numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6));
        }
    }
    within(start.elapsed(), 120)?;
    check(count <= 500 && worst < 1e-3, format!("{count} parameters, max relative error {worst:.2e}"))
}

fn c6_gan_point() -> Verdict {
    let expected = 2.0 * std::f64::consts::LN_2;
    let (d, _) = bce_gan_losses(&[0.5; 4], &[0.5; 3]).unwrap();
    // zero weights make every discriminator output exactly 0.5
    let params = TranslatorParams::zeros(Architecture::tiny()).unwrap();
    let only_gan = Objective {
        weights: LossWeights { vae: 0.0, gan: 1.0, cycle: 0.0 },
        distance: Distance::L1,
    };
    let l = total_objective(&params, &random_images(3, 8, 8, 6), &random_images(2, 8, 8, 7), &only_gan, Noise::Disabled).unwrap();
    let err = [d, l.gan_1, l.gan_2].iter().map(|v| (v - expected).abs()).fold(0.0, f64::max);
    check(err < 1e-6, format!("max |L_D - 2 ln 2| = {err:.1e}"))
}

fn c7_convergence() -> Verdict {
    let start = Instant::now();
    let (c1, c2) = (synthetic::corpus_images(Domain::S1, 64, 32, 32, 11), synthetic::corpus_images(Domain::S2, 64, 32, 32, 12));
    let config = TrainConfig {
        seed: 7,
        ..TrainConfig::default()
    };
    let outcome = train(&c1, &c2, Architecture::toy(), &config).map_err(|e| e.to_string())?;
    let totals: Vec<f64> = outcome.log.iter().map(|r| r.losses.total).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ratio = mean(&totals[450..500]) / mean(&totals[..50]);
    let corpus_mean = |c: &[Image]| c.iter().map(Image::mean).sum::<f64>() / c.len() as f64;
    let translated_mean = |c: &[Image], from, to| {
        let moved: Vec<Image> = c.iter().map(|im| outcome.params.translate(im, from, to).unwrap().image).collect();
        corpus_mean(&moved)
    };
    let gap12 = (translated_mean(&c1, Domain::S1, Domain::S2) - corpus_mean(&c2)).abs();
    let gap21 = (translated_mean(&c2, Domain::S2, Domain::S1) - corpus_mean(&c1)).abs();
    within(start.elapsed(), 900)?;
    check(
        totals.len() == 500 && ratio < 0.6 && gap12 < 0.05 && gap21 < 0.05,
        format!("loss ratio {ratio:.3}, brightness gaps {gap12:.4} (S1->S2) and {gap21:.4} (S2->S1)"),
    )
}

/// Exactly invertible linear nets built from a scaled permutation `A` and a
/// pixel permutation `P`: `E_1 = A`, `G_1 = A^-1`, `E_2 = A P^-1`, `G_2 = P A^-1`.
fn invertible_params(h: usize, w: usize, seed: u64) -> TranslatorParams {
    let n = 3 * h * w;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let perm = |rng: &mut ChaCha8Rng| {
        let mut v: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            v.swap(i, rng.random_range(0..=i));
        }
        v
    };
    let (a, p) = (perm(&mut rng), perm(&mut rng));
    let scale: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    let mut mats = vec![vec![0.0; n * n + n]; 4];
    for i in 0..n {
        mats[0][a[i] * n + i] = scale[i];
        mats[1][i * n + a[i]] = 1.0 / scale[i];
        mats[2][a[i] * n + p[i]] = scale[i];
        mats[3][p[i] * n + a[i]] = 1.0 / scale[i];
    }
    let mut params = TranslatorParams::zeros(Architecture::linear(h, w, n, OutputSquash::Clamp)).unwrap();
    let slots = [Slot::EncoderPrivate1, Slot::GeneratorPrivate1, Slot::EncoderPrivate2, Slot::GeneratorPrivate2];
    for (slot, m) in slots.into_iter().zip(mats) {
        params.net_mut(slot).set_params(m).unwrap();
    }
    params
}

fn c8_cycle() -> Verdict {
    let params = invertible_params(4, 6, 8);
    let mut worst = 0.0f64;
    for x in random_images(50, 4, 6, 9) {
        for from in Domain::BOTH {
            for d in [Distance::L1, Distance::L2] {
                worst = worst.max(cycle_loss(&params, &x, from, d).unwrap());
            }
        }
    }
    check(worst < 1e-6, format!("max cycle loss {worst:.1e} over 50 images"))
}

fn c9_fog_demo() -> Verdict {
    // mean exactly 0.5 with per-frame texture, so fog 0.6 adds 0.6 * 0.5 = 0.3
    let stream: Vec<FrameRecord> = (0..200)
        .map(|i| {
            let amp = 0.1 + 0.3 * (i as f32 / 200.0);
            let im = Image::from_fn(16, 16, |y, x, _| if (x + y + i) % 2 == 0 { 0.5 + amp } else { 0.5 - amp });
            FrameRecord::in_memory(format!("f{i:03}"), i, im)
        })
        .collect();
    let mr = fog(0.6).unwrap();
    let fogged = apply_relation(&mr, &stream).unwrap();
    let shift = stream.iter().zip(&fogged).map(|(a, b)| (b.image.mean() - a.image.mean() - 0.3).abs()).fold(0.0, f64::max);
    let ten = ErrorBound::new(10.0).unwrap();
    let count = |model: &mut dyn SteeringModel| -> usize {
        let a: Vec<Prediction> = run_model(model, &stream).unwrap();
        let b = run_model(model, &fogged).unwrap();
        inconsistency_count(&pair_predictions(&a, &b).unwrap(), ten)
    };
    let bright = count(&mut BrightnessModel::new(100.0).unwrap());
    let constant = count(&mut ConstantModel::new(0.0).unwrap());
    check(
        shift < 1e-5 && bright == 200 && constant == 0,
        format!("brightness IB {bright}/200, constant IB {constant}/200, max shift error {shift:.1e}"),
    )
}

fn run_cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_scenemorph"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

/// Relative path to contents of every file under `root`.
fn snapshot(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn c10_determinism() -> Verdict {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    for (domain, seed) in [("S1", "11"), ("S2", "12")] {
        let out = domain.to_lowercase();
        run_cli(dir, &["prepare", "--synthetic", "12", "--domain", domain, "--height", "32", "--width", "32", "--seed", seed, "--out", &out])?;
    }
    run_cli(dir, &["train", "--s1", "s1/manifest.tsv", "--s2", "s2/manifest.tsv", "--arch", "toy", "--steps", "3", "--seed", "5", "--out", "run"])?;
    let mut files = 0;
    for round in ["a", "b"] {
        let tr = format!("tr_{round}");
        run_cli(dir, &["translate", "--checkpoint", "run/translator.ckpt", "--manifest", "s1/manifest.tsv", "--seed", "5", "--out", &tr])?;
        let test_args = [
            "test", "--original", "s1/manifest.tsv", "--transformed", &format!("{tr}/manifest.tsv"), "--model", "constant:0",
            "--model", "brightness:100", "--model", "cnn:s1/manifest.tsv", "--flags", "--grid", "4", "--seed", "5", "--out",
        ];
        run_cli(dir, &[&test_args[..], &[&format!("test_{round}")]].concat())?;
    }
    for stage in ["tr", "test"] {
        let (a, b) = (snapshot(&dir.join(format!("{stage}_a"))), snapshot(&dir.join(format!("{stage}_b"))));
        if a != b {
            let names: Vec<&str> = a.iter().zip(&b).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
            return Err(format!("{stage} outputs differ: {names:?}"));
        }
        files += a.len();
    }
    Ok(format!("{files} translate/test output files byte-identical across reruns"))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 10] = [
        ("metric matches brute-force oracle", c1_oracle),
        ("sweep rows are monotone", c2_monotone),
        ("identity relation yields zero inconsistencies", c3_identity),
        ("deviation equal to the bound is not counted", c4_strict_boundary),
        ("analytic gradient matches finite differences", c5_gradient),
        ("discriminator loss at 0.5 equals 2 ln 2", c6_gan_point),
        ("toy translator converges", c7_convergence),
        ("invertible linear translator has zero cycle loss", c8_cycle),
        ("fog demo separates brightness and constant models", c9_fog_demo),
        ("translate and test are byte-deterministic", c10_determinism),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
