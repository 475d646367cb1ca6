//! Subcommand implementations.

use std::fmt::Write as _;
use std::fs;
use std::time::Instant;

use imfilm::controller::trajectory_csv;
use imfilm::imitation::train::{evaluate_imitation, mse_csv, mse_text, predictions_csv, EmbeddedVideo};
use imfilm::pipeline::{
    attach_style_features, embed_corpus, embed_records, imitate, mixture_set, plan_imitation, recapture_benchmark,
    recapture_record, recapture_scene, recovery_csv, recovery_table, segment_video, segmentation_benchmark,
    segmentation_csv, train_encoders, train_imitation, train_style_variant, Models,
};
use imfilm::scene::{make_dataset, save_video, Split, VideoRecord};
use imfilm::segmenter::curve_csv;
use imfilm::style_net::{attention_csv, Confusion, Variant};
use imfilm::training::log_csv;
use imfilm::{Error, StyleLabel};

use crate::error::{CliError, CliResult};
use crate::report::{EvalReport, ImitationScores, RecoveryRow, SegmentationScore, StyleScore};
use crate::run::{non_empty, style_model, Run, BASELINE_MODEL, IMITATION_MODEL};

fn secs(t: Instant) -> String {
    format!("{:.1}s", t.elapsed().as_secs_f64())
}

pub fn gen_data(mut run: Run, styles: &[StyleLabel], force: bool) -> CliResult<()> {
    let dir = run.path("data");
    if non_empty(&dir) {
        if !force {
            return Err(CliError::NotEmpty(dir));
        }
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    if !styles.is_empty() {
        run.cfg.corpus.restrict(styles);
    }
    let t = Instant::now();
    let ds = make_dataset(&run.cfg.corpus, &dir)?;
    run.record_tree("data")?;
    println!(
        "generated {} videos in {} ({})",
        ds.videos.len(),
        dir.display(),
        secs(t)
    );
    for split in Split::ALL {
        let counts: Vec<String> = StyleLabel::ALL
            .iter()
            .map(|s| format!("{s} {}", ds.count(split, *s)))
            .collect();
        println!(
            "  {:<5} {:>3}  {}",
            split.name(),
            ds.split(split).len(),
            counts.join(", ")
        );
    }
    run.finish("gen-data")?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Stage {
    Autoencoder,
    Style,
    Imitation,
    Baseline,
}

pub fn train(mut run: Run, stage: Stage) -> CliResult<()> {
    let ds = run.dataset()?;
    let (train, val, test) = (ds.split(Split::Train), ds.split(Split::Val), ds.split(Split::Test));
    let t = Instant::now();
    match stage {
        Stage::Autoencoder => {
            let (enc, logs) = train_encoders(&run.cfg, &train)?;
            run.ensure_dir("models")?;
            enc.fg.save(&run.path("models/fg.cmn"))?;
            enc.bg.save(&run.path("models/bg.cmn"))?;
            run.record("models/fg.cmn");
            run.record("models/bg.cmn");
            run.write("logs/autoencoder-fg.csv", log_csv(&logs.fg))?;
            run.write("logs/autoencoder-bg.csv", log_csv(&logs.bg))?;
            let last = |l: &[imfilm::training::EpochLog]| l.last().map_or(f64::NAN, |e| e.loss);
            println!(
                "autoencoders trained ({}): final loss fg {:.5}, bg {:.5}",
                secs(t),
                last(&logs.fg),
                last(&logs.bg)
            );
        }
        Stage::Style => {
            let enc = run.encoders()?;
            let corpus = embed_corpus(&enc, &train, &val, &test, run.cfg.style.flip)?;
            run.ensure_dir("models")?;
            for v in Variant::ALL {
                let tv = Instant::now();
                let r = train_style_variant(&run.cfg, v, &corpus)?;
                let rel = style_model(v);
                r.net.save(&run.path(&rel))?;
                run.record(&rel);
                run.write(&format!("logs/style-{v}.csv"), log_csv(&r.log))?;
                println!(
                    "style {:<9} test accuracy {:.3}, mean diagonal {:.3} ({})",
                    v.name(),
                    r.confusion.accuracy(),
                    r.confusion.mean_diagonal(),
                    secs(tv)
                );
            }
        }
        Stage::Imitation | Stage::Baseline => {
            let enc = run.encoders()?;
            let att = run.style_net(Variant::FgBgAtt)?;
            let mut train_set = embed_records(&enc, &train, run.cfg.imitation.flip)?;
            let mut test_set = embed_records(&enc, &test, false)?;
            attach_style_features(&att, &mut train_set)?;
            attach_style_features(&att, &mut test_set)?;
            let mut tcfg = run.cfg.imitation.train;
            let (rel, kind) = if stage == Stage::Baseline {
                tcfg.dual = false;
                (BASELINE_MODEL, "single")
            } else {
                (IMITATION_MODEL, "dual")
            };
            let r = train_imitation(&run.cfg, &tcfg, &train_set, &test_set)?;
            run.ensure_dir("models")?;
            r.net.save(&run.path(rel), kind)?;
            run.record(rel);
            let name = if stage == Stage::Baseline {
                "baseline"
            } else {
                "imitation"
            };
            run.write(&format!("logs/{name}.csv"), log_csv(&r.log))?;
            let m = r.table.mean();
            println!(
                "{name} trained ({}): test MSE omega {:.5}, v {:.5}, s {:.5}",
                secs(t),
                m.omega,
                m.dir,
                m.scale
            );
        }
    }
    let cmd = match stage {
        Stage::Autoencoder => "train-autoencoder",
        Stage::Style => "train-style",
        Stage::Imitation => "train-imitation",
        Stage::Baseline => "train-baseline",
    };
    run.finish(cmd)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalPart {
    Style,
    Imitation,
    Segmentation,
    Recovery,
}

impl EvalPart {
    pub const ALL: [EvalPart; 4] = [
        EvalPart::Style,
        EvalPart::Imitation,
        EvalPart::Segmentation,
        EvalPart::Recovery,
    ];

    fn name(self) -> &'static str {
        match self {
            EvalPart::Style => "style",
            EvalPart::Imitation => "imitation",
            EvalPart::Segmentation => "segmentation",
            EvalPart::Recovery => "recovery",
        }
    }
}

pub fn eval(mut run: Run, only: Option<EvalPart>) -> CliResult<()> {
    let parts: Vec<EvalPart> = only.map_or(EvalPart::ALL.to_vec(), |p| vec![p]);
    let ds = run.dataset()?;
    let test = ds.split(Split::Test);
    let enc = run.encoders()?;
    let att = run.style_net(Variant::FgBgAtt)?;
    // Check every prerequisite before spending time on the first part.
    for p in &parts {
        match p {
            EvalPart::Style => {
                for v in Variant::ALL {
                    run.style_net(v)?;
                }
            }
            EvalPart::Imitation => {
                run.imitation_net(false)?;
                run.imitation_net(true)?;
            }
            EvalPart::Recovery => {
                run.imitation_net(false)?;
            }
            EvalPart::Segmentation => {}
        }
    }
    let report_path = run.path("reports/report.json");
    let mut report = EvalReport::load_or_default(&report_path)?;
    for p in &parts {
        let t = Instant::now();
        match p {
            EvalPart::Style => report.style = Some(eval_style(&mut run, &enc, &test)?),
            EvalPart::Imitation => report.imitation = Some(eval_imitation(&mut run, &enc, &att, &test)?),
            EvalPart::Segmentation => report.segmentation = Some(eval_segmentation(&mut run, &enc, &att)?),
            EvalPart::Recovery => report.recovery = Some(eval_recovery(&mut run, &enc, &att, &test)?),
        }
        eprintln!("eval {} done ({})", p.name(), secs(t));
    }
    run.write("reports/report.json", report.to_json())?;
    let cmd = only.map_or("eval".to_string(), |p| format!("eval-{}", p.name()));
    run.finish(&cmd)?;
    Ok(())
}

fn eval_style(
    run: &mut Run,
    enc: &imfilm::features::Encoders,
    test: &[&VideoRecord],
) -> CliResult<std::collections::BTreeMap<String, StyleScore>> {
    let videos = embed_records(enc, test, false)?;
    let mut raw = String::from("variant,video,truth,predicted");
    for s in StyleLabel::ALL {
        write!(raw, ",p_{s}").unwrap();
    }
    raw.push('\n');
    let mut scores = std::collections::BTreeMap::new();
    for v in Variant::ALL {
        let net = run.style_net(v)?;
        let mut conf = Confusion::new();
        for e in &videos {
            let fwd = net.forward(&e.snippets)?;
            conf.add(e.style, fwd.predicted());
            write!(raw, "{v},{},{},{}", e.id, e.style, fwd.predicted()).unwrap();
            for p in &fwd.probs {
                write!(raw, ",{p:.9}").unwrap();
            }
            raw.push('\n');
            if v == Variant::FgBgAtt {
                run.write(&format!("reports/attention/{}.csv", e.id), attention_csv(&fwd))?;
            }
        }
        run.write(&format!("reports/confusion-{v}.csv"), conf.to_csv())?;
        run.write(&format!("reports/confusion-{v}.txt"), conf.to_text())?;
        println!(
            "style {:<9} accuracy {:.3}, mean diagonal {:.3}",
            v.name(),
            conf.accuracy(),
            conf.mean_diagonal()
        );
        scores.insert(
            v.name().to_string(),
            StyleScore {
                accuracy: conf.accuracy(),
                mean_diagonal: conf.mean_diagonal(),
                confusion: conf.counts,
            },
        );
    }
    run.write("reports/style-predictions.csv", raw)?;
    Ok(scores)
}

fn eval_imitation(
    run: &mut Run,
    enc: &imfilm::features::Encoders,
    att: &imfilm::style_net::StyleNet,
    test: &[&VideoRecord],
) -> CliResult<ImitationScores> {
    let mut videos: Vec<EmbeddedVideo> = embed_records(enc, test, false)?;
    attach_style_features(att, &mut videos)?;
    let zero_style = run.cfg.imitation.train.zero_style;
    let (dual, dual_preds) = evaluate_imitation(&run.imitation_net(false)?, &videos, zero_style)?;
    let (base, base_preds) = evaluate_imitation(&run.imitation_net(true)?, &videos, zero_style)?;
    let tables = [("dual", &dual), ("baseline", &base)];
    run.write("reports/mse.csv", mse_csv(&tables))?;
    run.write("reports/mse.txt", mse_text(&tables))?;
    run.write("reports/imitation-predictions-dual.csv", predictions_csv(&dual_preds))?;
    run.write(
        "reports/imitation-predictions-baseline.csv",
        predictions_csv(&base_preds),
    )?;
    print!("{}", mse_text(&tables));
    Ok(ImitationScores { dual, baseline: base })
}

fn eval_segmentation(
    run: &mut Run,
    enc: &imfilm::features::Encoders,
    att: &imfilm::style_net::StyleNet,
) -> CliResult<SegmentationScore> {
    let mixtures = mixture_set(&run.cfg)?;
    let out = segmentation_benchmark(att, enc, &mixtures, &run.cfg)?;
    let correct = out.iter().filter(|o| o.correct).count();
    let labels_correct = out.iter().filter(|o| o.found == o.truth).count();
    let score = SegmentationScore {
        mixtures: out.len(),
        correct,
        labels_correct,
        accuracy: correct as f64 / out.len().max(1) as f64,
    };
    run.write("reports/segmentation.csv", segmentation_csv(&out))?;
    let text = format!(
        "mixtures {}\ncorrect (labels and boundary within {:.2} s) {}\nlabels correct {}\naccuracy {:.3}\n",
        score.mixtures, run.cfg.eval.boundary_tolerance, score.correct, score.labels_correct, score.accuracy
    );
    run.write("reports/segmentation.txt", &text)?;
    print!("{text}");
    Ok(score)
}

fn eval_recovery(
    run: &mut Run,
    enc: &imfilm::features::Encoders,
    att: &imfilm::style_net::StyleNet,
    test: &[&VideoRecord],
) -> CliResult<Vec<RecoveryRow>> {
    let net = run.imitation_net(false)?;
    let models = Models {
        encoders: enc,
        style: att,
        imitation: &net,
    };
    let out = recapture_benchmark(&models, test, &run.cfg)?;
    run.write("reports/recovery.csv", recovery_csv(&out))?;
    for o in &out {
        if let Some(rec) = &o.recapture {
            run.write(&format!("reports/recovery/{}.csv", o.demo), trajectory_csv(&rec.log))?;
        }
    }
    let rows: Vec<RecoveryRow> = recovery_table(&out)
        .into_iter()
        .map(|(s, n, acc, contract)| RecoveryRow {
            style: s.name().to_string(),
            demos: n,
            recovery: acc,
            contract_pass: contract,
        })
        .collect();
    let mut text = format!("{:<12} {:>5} {:>9} {:>9}\n", "style", "demos", "recovery", "contract");
    for r in &rows {
        writeln!(
            text,
            "{:<12} {:>5} {:>9.2} {:>9.2}",
            r.style, r.demos, r.recovery, r.contract_pass
        )
        .unwrap();
    }
    run.write("reports/recovery.txt", &text)?;
    print!("{text}");
    Ok(rows)
}

/// A demo or segmentation target: a corpus id, a benchmark mixture
/// (`mix-NNN`) or a video directory.
fn resolve_video(run: &Run, target: &str) -> CliResult<(VideoRecord, Option<String>)> {
    if let Some(n) = target.strip_prefix("mix-").and_then(|n| n.parse::<usize>().ok()) {
        let mut cfg = run.cfg.clone();
        if n >= cfg.eval.mixtures {
            return Err(CliError::Argument(format!(
                "mixture {n} out of range (eval.mixtures = {})",
                cfg.eval.mixtures
            )));
        }
        cfg.eval.mixtures = n + 1;
        let m = mixture_set(&cfg)?.swap_remove(n);
        let truth = format!(
            "truth: {} with seams at {}",
            m.labels.iter().map(|l| l.name()).collect::<Vec<_>>().join(" -> "),
            m.boundaries
                .iter()
                .map(|b| format!("{b:.2}s"))
                .collect::<Vec<_>>()
                .join(", ")
        );
        return Ok((m.video, Some(truth)));
    }
    Ok((run.video(target)?, None))
}

/// Directory name for per-video outputs.
fn slug(v: &VideoRecord) -> String {
    v.meta.id.replace(['/', '\\'], "_")
}

pub fn segment(mut run: Run, target: &str) -> CliResult<()> {
    let enc = run.encoders()?;
    let att = run.style_net(Variant::FgBgAtt)?;
    let (video, truth) = resolve_video(&run, target)?;
    let (segs, curve) = segment_video(&att, &enc, &video.features, &run.cfg.segmenter)?;
    let dir = format!("segments/{}", slug(&video));
    run.write(&format!("{dir}/segments.csv"), segs.to_csv())?;
    run.write(&format!("{dir}/curve.csv"), curve_csv(&curve))?;
    println!("{}: {:.2} s", video.meta.id, segs.duration);
    for s in &segs.segments {
        println!("  {:>7.2} - {:>7.2}  {}", s.start, s.end, s.label);
    }
    if let Some(t) = truth {
        println!("  {t}");
    }
    run.finish(&format!("segment-{}", slug(&video)))?;
    Ok(())
}

pub fn imitate_cmd(mut run: Run, target: &str, scene_seed: Option<u64>, dry_run: bool) -> CliResult<()> {
    let enc = run.encoders()?;
    let att = run.style_net(Variant::FgBgAtt)?;
    let net = if dry_run { None } else { Some(run.imitation_net(false)?) };
    let (demo, _) = resolve_video(&run, target)?;
    let (segs, plan) = plan_imitation(&att, &enc, &demo.features, &run.cfg.segmenter)?;
    let dir = format!("imitate/{}", slug(&demo));
    println!("plan for {} ({:.2} s):", demo.meta.id, segs.duration);
    for (s, p) in segs.segments.iter().zip(&plan) {
        println!(
            "  {:>7.2} - {:>7.2}  {:<12} frames {}..{}",
            s.start,
            s.end,
            s.label.name(),
            p.first_frame,
            p.end_frame
        );
    }
    run.write(&format!("{dir}/plan.csv"), segs.to_csv())?;
    let Some(net) = net else {
        run.finish(&format!("imitate-{}", slug(&demo)))?;
        return Ok(());
    };

    let seed = scene_seed.unwrap_or(run.cfg.eval.recapture_seed);
    let scene = recapture_scene(&run.cfg, &demo, seed)?;
    let models = Models {
        encoders: &enc,
        style: &att,
        imitation: &net,
    };
    let out = imitate(&models, &demo, &scene, &run.cfg.segmenter, &run.cfg.controller)?;
    let rec = out.recapture.as_ref().expect("imitate always returns the run");
    run.write(&format!("{dir}/trajectory.csv"), trajectory_csv(&rec.log))?;
    let rec_dir = format!("{dir}/recapture");
    let rec_path = run.ensure_dir(&rec_dir)?;
    save_video(&rec_path, &recapture_record(&demo, &scene, rec))?;
    run.record_tree(&rec_dir)?;

    let names = |l: Vec<StyleLabel>| l.iter().map(|s| s.name().to_string()).collect::<Vec<_>>();
    let verdict = serde_json::json!({
        "demo": demo.meta.id,
        "scene_seed": seed,
        "plan": names(out.plan.labels()),
        "predicted": out.predicted.map(|p| p.name()),
        "resegmented": out.resegmented.as_ref().map(|r| names(r.labels())),
        "recovered": out.recovered(),
        "contracts": out.contracts,
        "contract_passed": out.contract_passed(),
        "aborted": out.error,
    });
    run.write(
        &format!("{dir}/verdict.json"),
        serde_json::to_string_pretty(&verdict).expect("verdict serializes") + "\n",
    )?;
    let mut text = String::new();
    match (&out.error, &out.resegmented) {
        (Some(e), _) => writeln!(text, "aborted: {e}").unwrap(),
        (None, Some(r)) => {
            let found = r.labels();
            for (i, want) in out.plan.labels().iter().enumerate() {
                let got = found.get(i).map_or("-", |g| g.name());
                writeln!(text, "segment {i}: planned {want}, recaptured {got}").unwrap();
            }
        }
        (None, None) => {
            let got = out.predicted.map_or("-", |p| p.name());
            writeln!(text, "demo style {}, recapture classified {got}", out.style).unwrap();
        }
    }
    writeln!(text, "recovered: {}", out.recovered()).unwrap();
    for c in &out.contracts {
        if c.violations.is_empty() {
            writeln!(text, "contract {}: ok", c.style).unwrap();
        } else {
            writeln!(text, "contract {}: {}", c.style, c.violations.join("; ")).unwrap();
        }
    }
    run.write(&format!("{dir}/verdict.txt"), &text)?;
    print!("{text}");
    run.finish(&format!("imitate-{}", slug(&demo)))?;
    match rec.aborted {
        Some(l) => Err(Error::from(l).into()),
        None => Ok(()),
    }
}
