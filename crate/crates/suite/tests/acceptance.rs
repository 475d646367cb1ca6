//! Acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero
//! when any criterion fails. Criteria 4 to 8 drive the `imfilm` commands
//! through a full default-config experiment in a temporary directory.

use std::path::{Path, PathBuf};
use std::time::Instant;

use imfilm::controller::localize_subject;
use imfilm::features::SnippetEmbedding;
use imfilm::geometry::{project_foreground, Camera, Intrinsics, Orientation, Pose6D, Vec3};
use imfilm::imitation::dtw::dtw_align;
use imfilm::imitation::{ImitationDims, ImitationNet, PairSample};
use imfilm::manifest::Manifest;
use imfilm::style_net::{StyleDims, StyleNet, StyleTrainConfig, Variant};
use imfilm::StyleLabel;
use imfilm_nn::{grad_check, seeded_rng, NnError, ParamSet};
use imfilm_suite::{brute_force_dtw, first_difference, snapshot};
use rand::Rng;
use serde_json::Value;

type Verdict = Result<(bool, String), String>;

fn uniform<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn random_action<R: Rng>(rng: &mut R) -> [f64; 7] {
    let d = uniform(rng, 3);
    let n = d.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
    let w = uniform(rng, 3);
    [
        w[0] * 0.3,
        w[1] * 0.3,
        w[2] * 0.3,
        d[0] / n,
        d[1] / n,
        d[2] / n,
        rng.random_range(0.05..0.9),
    ]
}

fn nn_err(e: imfilm::Error) -> NnError {
    NnError::Numeric(e.to_string())
}

fn gradients() -> Verdict {
    let t = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let dims = StyleDims {
            fg_in: 3,
            bg_in: 4,
            hidden: 4,
            att_hidden: 3,
        };
        let net = StyleNet::new(Variant::FgBgAtt, dims, seed).map_err(|e| e.to_string())?;
        let mut rng = seeded_rng(seed + 1000);
        let t_len = rng.random_range(1..=5);
        let seq: Vec<SnippetEmbedding> = (0..t_len)
            .map(|_| SnippetEmbedding {
                fg: uniform(&mut rng, 3),
                bg: uniform(&mut rng, 4),
            })
            .collect();
        let y = StyleLabel::ALL[rng.random_range(0..5)];
        let cfg = StyleTrainConfig::default();
        let f = |p: &ParamSet| {
            let mut g = p.zeros_like();
            let (l, _) = net.loss_with(p, &seq, y, &cfg, Some(&mut g)).map_err(nn_err)?;
            Ok((l, g))
        };
        worst = worst.max(grad_check(f, &net.params, 1e-5).map_err(|e| e.to_string())?);

        let dims = ImitationDims {
            style_dim: 4,
            obs_dim: 5,
            hidden1: 6,
            context: 4,
            hidden2: 5,
        };
        let net = ImitationNet::new(dims, seed).map_err(|e| e.to_string())?;
        let s = PairSample {
            v: uniform(&mut rng, 4),
            obs: uniform(&mut rng, 5),
            action: random_action(&mut rng),
            label: random_action(&mut rng),
            style: Some((random_action(&mut rng), random_action(&mut rng))),
        };
        let f = |p: &ParamSet| {
            let mut g = p.zeros_like();
            let l = net.loss_with(p, &s, 0.7, Some(&mut g)).map_err(nn_err)?;
            Ok((l, g))
        };
        worst = worst.max(grad_check(f, &net.params, 1e-5).map_err(|e| e.to_string())?);
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-4 && secs < 60.0,
        format!("classification and dual imitation losses, 20 seeds: max relative error {worst:.2e} ({secs:.1} s)"),
    ))
}

fn dtw_oracle() -> Verdict {
    let t = Instant::now();
    let (mut pairs, mut mismatches) = (0, 0);
    for seed in 0..100u64 {
        let mut rng = seeded_rng(seed);
        let dim = rng.random_range(1..=4);
        for n in 1..=6 {
            for m in 1..=6 {
                let a: Vec<Vec<f64>> = (0..n).map(|_| uniform(&mut rng, dim)).collect();
                let b: Vec<Vec<f64>> = (0..m).map(|_| uniform(&mut rng, dim)).collect();
                let cost = dtw_align(&a, &b).map_err(|e| e.to_string())?.cost;
                pairs += 1;
                if cost != brute_force_dtw(&a, &b) {
                    mismatches += 1;
                }
            }
        }
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((
        mismatches == 0 && secs < 60.0,
        format!("{pairs} sequence pairs over 100 seeds, {mismatches} cost mismatches ({secs:.1} s)"),
    ))
}

fn geometry_round_trip() -> Verdict {
    use std::f64::consts::PI;
    let t = Instant::now();
    let k = Intrinsics::default();
    let mut rng = seeded_rng(3);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let cam = Pose6D::new(
            Vec3::new(
                rng.random_range(-50.0..50.0),
                rng.random_range(-50.0..50.0),
                rng.random_range(1.0..40.0),
            ),
            Orientation::new(
                rng.random_range(-0.3..0.3),
                rng.random_range(-PI..PI),
                rng.random_range(-0.8..0.8),
            ),
        );
        let height = rng.random_range(1.4..2.0);
        let depth = rng.random_range(3.0..60.0);
        let (u, v) = (
            rng.random_range(0.1..0.9) * k.width,
            rng.random_range(0.1..0.9) * k.height,
        );
        let center = cam.pos() + Camera::new(cam, k).ray(u, v) * depth;
        let subject = Pose6D::new(
            center - Vec3::new(0.0, 0.0, 0.5 * height),
            Orientation::new(0.0, rng.random_range(-PI..PI), 0.0),
        );
        let fg = project_foreground(&cam, &k, &subject, height).map_err(|e| e.to_string())?;
        let found = localize_subject(&fg, &cam, &k, height).map_err(|e| e.to_string())?;
        worst = worst.max((found - center).norm());
    }
    let secs = t.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-6 && secs < 10.0,
        format!("1000 configurations: max position error {worst:.2e} m ({secs:.2} s)"),
    ))
}

/// Runs one `imfilm` command with `cwd` as working directory, returning
/// elapsed seconds.
fn imfilm(cwd: &Path, out: &Path, args: &[&str]) -> Result<f64, String> {
    std::env::set_current_dir(cwd).map_err(|e| format!("{}: {e}", cwd.display()))?;
    let t = Instant::now();
    let mut argv = vec!["--out".to_string(), out.display().to_string()];
    argv.extend(args.iter().map(|a| a.to_string()));
    imfilm_cli::run_args(&argv).map_err(|e| format!("`imfilm {}` failed: {e}", args.join(" ")))?;
    let secs = t.elapsed().as_secs_f64();
    eprintln!("[imfilm {}: {secs:.1} s]", args.join(" "));
    Ok(secs)
}

fn report(run: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(run.join("reports/report.json")).map_err(|e| e.to_string())?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn num(v: &Value, path: &[&str]) -> Result<f64, String> {
    path.iter()
        .try_fold(v, |v, k| v.get(k))
        .and_then(Value::as_f64)
        .ok_or_else(|| format!("report has no {}", path.join(".")))
}

fn style_classification(run: &Path, train_secs: f64) -> Verdict {
    imfilm(run, run, &["eval", "--only", "style"])?;
    let r = report(run)?;
    let test_videos: u64 = r["style"]["fg-bg-att"]["confusion"].as_array().map_or(0, |rows| {
        rows.iter()
            .flat_map(|row| row.as_array().into_iter().flatten())
            .filter_map(Value::as_u64)
            .sum()
    });
    let acc = num(&r, &["style", "fg-bg-att", "accuracy"])?;
    let diag = |v: &str| num(&r, &["style", v, "mean_diagonal"]);
    let (att, fgbg, fg, bg) = (diag("fg-bg-att")?, diag("fg-bg")?, diag("fg-only")?, diag("bg-only")?);
    let ordered = att >= fgbg && fgbg >= fg.max(bg);
    Ok((
        acc >= 0.90 && ordered && test_videos == 49 && train_secs < 1800.0,
        format!(
            "FG+BG+Att accuracy {acc:.3} on {test_videos} test videos; mean diagonal Att {att:.3}, FG+BG {fgbg:.3}, FG {fg:.3}, BG {bg:.3} (ordering {}); training {train_secs:.0} s",
            if ordered { "holds" } else { "violated" }
        ),
    ))
}

fn dual_loss(run: &Path) -> Verdict {
    let secs = imfilm(run, run, &["eval", "--only", "imitation"])?;
    let r = report(run)?;
    let rows = |k: &str| r["imitation"][k]["rows"].as_array().cloned().unwrap_or_default();
    let (dual, base) = (rows("dual"), rows("baseline"));
    if dual.len() != 5 || base.len() != 5 {
        return Err("MSE table does not have five styles".into());
    }
    let wins = |key: &str| {
        (0..5)
            .filter(|&i| dual[i][key].as_f64() <= base[i][key].as_f64())
            .count()
    };
    let (w_omega, w_v) = (wins("omega"), wins("dir"));
    Ok((
        w_omega >= 3 && w_v >= 3 && secs < 300.0,
        format!("dual-loss MSE <= baseline on {w_omega}/5 styles for omega, {w_v}/5 for v (evaluation {secs:.1} s)"),
    ))
}

fn segmentation(run: &Path) -> Verdict {
    let secs = imfilm(run, run, &["eval", "--only", "segmentation"])?;
    let r = report(run)?;
    let n = num(&r, &["segmentation", "mixtures"])?;
    let correct = num(&r, &["segmentation", "correct"])?;
    let rate = correct / n.max(1.0);
    Ok((
        n == 100.0 && rate >= 0.90 && secs < 600.0,
        format!("{correct}/{n} mixtures with correct labels and boundary error <= 1 s ({secs:.1} s)"),
    ))
}

fn recovery(run: &Path) -> Verdict {
    let secs = imfilm(run, run, &["eval", "--only", "recovery"])?;
    let r = report(run)?;
    let rows = r["recovery"].as_array().cloned().unwrap_or_default();
    let mut pass = rows.len() == 5 && secs < 1200.0;
    let mut parts = Vec::new();
    for row in &rows {
        let acc = row["recovery"].as_f64().unwrap_or(0.0);
        let contract = row["contract_pass"].as_f64().unwrap_or(0.0);
        pass &= row["demos"].as_u64() == Some(5) && acc >= 0.8 && contract >= 1.0;
        parts.push(format!(
            "{} {acc:.1}/{contract:.1}",
            row["style"].as_str().unwrap_or("?")
        ));
    }
    Ok((
        pass,
        format!(
            "recovery/contract pass rate per style: {} ({secs:.1} s)",
            parts.join(", ")
        ),
    ))
}

fn tree(root: &Path) -> Result<imfilm_suite::Snapshot, String> {
    snapshot(root).map_err(|e| format!("{}: {e}", root.display()))
}

const SMALL: &[&str] = &[
    "corpus.train=[3,3,3,3,3]",
    "corpus.val=[1,1,1,1,1]",
    "corpus.test=[2,2,2,2,2]",
    "autoencoder.fg.epochs=3",
    "autoencoder.bg.epochs=3",
    "style.train.epochs=3",
    "imitation.train.epochs=3",
    "eval.mixtures=5",
    "eval.demos_per_style=2",
];

fn determinism(full: &Path) -> Verdict {
    // Two independent small experiments from the same settings.
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    for dir in [a.path(), b.path()] {
        let out = Path::new("run");
        let mut gen = vec!["gen-data"];
        for s in SMALL {
            gen.extend(["--set", s]);
        }
        imfilm(dir, out, &gen)?;
        for stage in ["autoencoder", "style", "imitation", "baseline"] {
            imfilm(dir, out, &["train", stage])?;
        }
        imfilm(dir, out, &["eval"])?;
        imfilm(dir, out, &["segment", "mix-001"])?;
        imfilm(dir, out, &["imitate", "test-orbiting-000"])?;
    }
    let (ta, tb) = (tree(&a.path().join("run"))?, tree(&b.path().join("run"))?);
    if let Some(d) = first_difference(&ta, &tb) {
        return Ok((false, format!("small experiment reruns differ in {}", d.display())));
    }

    // Full-scale reruns: retrain one stage and re-evaluate everything, then
    // check the recorded digests.
    let before = tree(&full.join("reports"))?;
    imfilm(full, full, &["train", "imitation"])?;
    imfilm(full, full, &["eval"])?;
    let after = tree(&full.join("reports"))?;
    if let Some(d) = first_difference(&before, &after) {
        return Ok((false, format!("re-evaluation changed reports/{}", d.display())));
    }
    let mut checked = 0;
    for m in [
        "train-imitation",
        "eval-style",
        "eval-imitation",
        "eval-segmentation",
        "eval-recovery",
    ] {
        let path = full.join(format!("manifests/{m}.json"));
        let manifest = Manifest::load(&path).map_err(|e| e.to_string())?;
        // Partial evaluations each saw report.json before later parts were
        // merged into it; only the last one recorded its final form.
        let changed: Vec<PathBuf> = manifest
            .changed(full)
            .into_iter()
            .filter(|p| m == "eval-recovery" || !p.ends_with("reports/report.json"))
            .collect();
        if !changed.is_empty() {
            return Ok((
                false,
                format!("{m} artifacts changed on rerun: {}", changed[0].display()),
            ));
        }
        checked += manifest.artifacts.len();
    }
    Ok((
        true,
        format!(
            "two small experiments byte-identical ({} files); full-scale retrain and re-eval match {checked} recorded digests",
            ta.len()
        ),
    ))
}

fn main() {
    let mut lines: Vec<(u8, &str, Verdict)> = Vec::new();
    lines.push((1, "gradient checks", gradients()));
    lines.push((2, "DTW oracle", dtw_oracle()));
    lines.push((3, "geometry round trip", geometry_round_trip()));

    let dir = tempfile::tempdir().expect("temporary directory");
    let run = dir.path().join("run");
    let setup = (|| -> Result<f64, String> {
        imfilm(dir.path(), &run, &["gen-data"])?;
        imfilm(dir.path(), &run, &["train", "autoencoder"])?;
        let style = imfilm(dir.path(), &run, &["train", "style"])?;
        imfilm(dir.path(), &run, &["train", "imitation"])?;
        imfilm(dir.path(), &run, &["train", "baseline"])?;
        Ok(style)
    })();
    match setup {
        Ok(style_secs) => {
            lines.push((4, "style classification", style_classification(&run, style_secs)));
            lines.push((5, "dual-loss trend", dual_loss(&run)));
            lines.push((6, "segmentation", segmentation(&run)));
            lines.push((7, "closed-loop recovery", recovery(&run)));
            lines.push((8, "determinism", determinism(&run)));
        }
        Err(e) => {
            for (n, name) in [
                (4, "style classification"),
                (5, "dual-loss trend"),
                (6, "segmentation"),
                (7, "closed-loop recovery"),
                (8, "determinism"),
            ] {
                lines.push((n, name, Err(format!("experiment setup failed: {e}"))));
            }
        }
    }

    println!();
    let mut failed = 0;
    for (n, name, v) in &lines {
        let (pass, detail) = match v {
            Ok((p, d)) => (*p, d.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("criterion {n} {} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!(
        "acceptance: {} of {} criteria passed",
        lines.len() - failed,
        lines.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
