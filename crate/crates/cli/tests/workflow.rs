use std::fs;
use std::path::Path;
use std::process::Command;

use csod::commands::{self, EvalRequest};
use csod::config::RunConfig;
use csod::dataset::{DatasetManifest, Split};
use csod::{eval, pnm, train};
use csod_core::metrics::{self, PrOptions, SaliencyPair};
use csod_core::net::NetConfig;

fn csod() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_csod"));
    c.env("CSOD_THREADS", "1");
    c
}

fn tiny_run(root: &Path, epochs: usize, train: usize, accumulation: usize) -> RunConfig {
    let data = root.join("data");
    commands::gen_data(3, 16, train, 4, &data).unwrap();
    RunConfig {
        net: NetConfig::tiny(16),
        epochs,
        accumulation,
        base_lr: 5e-5,
        data_root: data,
        out_dir: root.join("run"),
        ..RunConfig::default()
    }
}

#[test]
fn gen_data_writes_three_files_per_sample_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let run = csod()
            .args(["gen-data", "--seed", "7", "--size", "24", "--train", "10", "--test", "5", "--out"])
            .arg(out)
            .output()
            .unwrap();
        assert!(run.status.success());
        assert!(String::from_utf8_lossy(&run.stdout).starts_with("wrote 15 samples"));
    }
    let mut names: Vec<String> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names.len(), 3 * 15 + 1);
    for name in &names {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
    let m = DatasetManifest::load(&a).unwrap();
    assert_eq!((m.seed, m.size, m.train.len(), m.test.len()), (7, 24, 10, 5));
    assert_eq!(m.test[0].id, 10);
    let s = m.read(&m.test[0]).unwrap();
    assert_eq!(s.image.shape().c, 3);
    assert!(s.mask.data().iter().all(|&v| v == 0.0 || v == 1.0));
}

#[test]
fn flag_and_config_errors_exit_with_two() {
    let out = csod().args(["gen-data", "--seed", "7"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--out"));

    let out = csod().args(["optbench", "--task", "mnist"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "epochs=3\nlearning_rate=1\n").unwrap();
    let out = csod().args(["train", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));

    let out = csod().args(["count-params", "--config"]).arg(dir.path().join("missing.cfg")).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn empty_split_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    commands::gen_data(1, 16, 0, 2, &data).unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, format!("data_root={}\nout_dir={}\nnet.input_size=16\n", data.display(), dir.path().join("run").display()))
        .unwrap();
    let out = csod().args(["train", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    let mut run = tiny_run(dir.path(), 1, 2, 2);
    run.data_root = dir.path().join("other");
    commands::gen_data(1, 16, 2, 0, &run.data_root).unwrap();
    commands::train(&run).unwrap();
    let ckpt = run.out_dir.join(train::CHECKPOINT_FILE);
    let out = csod()
        .args(["eval", "--split", "test", "--checkpoint"])
        .arg(&ckpt)
        .arg("--data")
        .arg(&run.data_root)
        .arg("--out")
        .arg(dir.path().join("eval"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_checkpoint_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    commands::gen_data(1, 16, 1, 1, &data).unwrap();
    let out = csod()
        .args(["eval", "--checkpoint"])
        .arg(dir.path().join("nope.csod"))
        .arg("--data")
        .arg(&data)
        .arg("--out")
        .arg(dir.path().join("eval"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn eighteen_epochs_divide_the_rate_after_nine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_run(dir.path(), 18, 2, 2);
    commands::train(&cfg).unwrap();
    let log = fs::read_to_string(cfg.out_dir.join(train::LOG_FILE)).unwrap();
    let mut lines = log.lines();
    assert_eq!(lines.next(), Some(train::LOG_HEADER));
    let rows: Vec<(usize, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 18);
    for (epoch, lr) in rows {
        let expected = if epoch <= 8 { 5e-5 } else { 5e-6 };
        assert!((lr - expected).abs() < 1e-18, "epoch {epoch}: lr {lr}");
    }
    assert!(log.contains(",5e-5,") && log.contains(",5e-6,"));
}

#[test]
fn log_rows_are_ordered_and_steps_count_accumulated_batches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_run(dir.path(), 3, 5, 2);
    let outcome = commands::train(&cfg).unwrap();
    assert_eq!(outcome.rows.len(), 3 * 3);
    for (i, w) in outcome.rows.windows(2).enumerate() {
        assert!((w[0].epoch, w[0].step) < (w[1].epoch, w[1].step), "row {i}");
    }
    assert_eq!(outcome.epoch_means.len(), 3);
    let record = RunConfig::load(&cfg.out_dir.join(train::CONFIG_RECORD)).unwrap();
    assert_eq!(record, cfg);
}

#[test]
fn eval_against_own_predictions_is_self_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny_run(dir.path(), 2, 8, 2);
    cfg.base_lr = 3e-3;
    commands::train(&cfg).unwrap();
    let req = EvalRequest::from_config(&cfg, Split::Test, 2);
    commands::eval(&req).unwrap();
    let manifest = DatasetManifest::load(&cfg.data_root).unwrap();
    let samples = manifest.read_split(Split::Test).unwrap();
    let net = train::load_checkpoint(&req.checkpoint).unwrap();
    let preds = eval::predict(&net, &samples, 1).unwrap();
    let mut pairs = Vec::new();
    for (s, p) in samples.iter().zip(&preds) {
        let reread = pnm::read(&cfg.out_dir.join(eval::PRED_DIR).join(format!("pred_{:05}.pgm", s.id))).unwrap();
        let worst = p.data().iter().zip(reread.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst <= 1.0 / 510.0 + 1e-15);
        let gt: Vec<f64> = reread.data().iter().map(|&v| f64::from(u8::from(v >= 0.5))).collect();
        let (w, h) = (p.shape().w, p.shape().h);
        pairs.push(SaliencyPair::new(w, h, p.data().to_vec(), gt).unwrap());
    }
    assert_eq!(metrics::max_f_measure(&pairs, &PrOptions::default()).unwrap(), 1.0);

    let metrics_csv = fs::read_to_string(cfg.out_dir.join(eval::METRICS_FILE)).unwrap();
    assert!(metrics_csv.starts_with("dataset,maxf,mae,iou,smeasure\nsynthetic_test,"));
    let pr = fs::read_to_string(cfg.out_dir.join(eval::PR_FILE)).unwrap();
    assert_eq!(pr.lines().count(), 256);
}

#[test]
fn eval_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_run(dir.path(), 1, 2, 2);
    commands::train(&cfg).unwrap();
    let mut reports = Vec::new();
    for threads in [1, 3] {
        let mut req = EvalRequest::from_config(&cfg, Split::Test, threads);
        req.out_dir = dir.path().join(format!("eval{threads}"));
        reports.push(commands::eval(&req).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn count_params_prints_both_decoders() {
    let out = csod().arg("count-params").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("fire+se") && text.contains("plain"));
    assert!(text.contains("closed form agrees with runtime: true"));
    let report = commands::count_params(&NetConfig::default()).unwrap();
    assert!(text.contains(&format!("decoder ratio: {:.4}", report.decoder_ratio)));
    assert!(text.contains(&report.checkpoint_bytes.to_string()));
}

#[test]
fn optbench_csv_has_a_column_per_optimizer() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.csv");
    let run = csod().args(["optbench", "--task", "quadratic", "--iters", "30", "--out"]).arg(&out).output().unwrap();
    assert!(run.status.success());
    assert!(String::from_utf8_lossy(&run.stdout).contains("adax final loss is"));
    let csv = fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("iter,adadelta,adam,adagrad,rmsprop,adamw,adax"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 31);
    assert!(rows[0][1..].iter().all(|&v| v == rows[0][1]));
}
