use std::path::Path;
use std::process::{Command, Output};

use smartaug::cli::{cmd_dump_aug, ExperimentConfig};
use smartaug::data::pnm;

const TINY: &str = "\
exp_id = 3
batch_size = 8
image_height = 8
image_width = 8
a_filters = 2
b_conv1 = 2
b_conv2 = 2
b_dense = 8
synthetic_train = 20
synthetic_val = 8
synthetic_test = 8
";

fn smartaug(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smartaug")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, extra: &str) -> String {
    let path = dir.join(name);
    let epochs = if extra.contains("epochs") { "" } else { "epochs = 2\n" };
    std::fs::write(&path, format!("{TINY}{epochs}{extra}")).unwrap();
    path.to_str().unwrap().to_string()
}

fn manifest(run_dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(run_dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn baseline_train_writes_run_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "base.cfg", "num_net_a = 0\n");
    let out = tmp.path().join("runs");
    let o = smartaug(&["train", "--config", &cfg, "--seed", "7", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = out.join("exp3_seed7");
    for f in ["config.txt", "metrics.csv", "manifest.json", "network_b.saug", "network_b.arch"] {
        assert!(run.join(f).is_file(), "{f}");
    }
    assert!(!run.join("network_a.saug").exists());
    let m = manifest(&run);
    assert!(m["test_accuracy"].as_f64().is_some());
    assert!(m["error"].is_null());
    assert_eq!(m["config"]["seed"], 7);
    let csv = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).take(2).collect();
    assert!(rows.iter().all(|r| r.split(',').nth(2) == Some("")), "{csv}");
    assert!(csv.lines().last().unwrap().starts_with("test_accuracy,"));
}

#[test]
fn smart_train_then_dump_and_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "smart.cfg", "num_net_a = 1\n");
    let out = tmp.path().join("runs");
    let out_s = out.to_str().unwrap();
    assert!(smartaug(&["train", "--config", &cfg, "--out", out_s]).status.success());
    let run = out.join("exp3_seed0");
    let csv = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse::<f64>().is_ok());
    assert!(run.join("network_a.saug").is_file() && run.join("network_a.arch").is_file());

    let o = smartaug(&["dump-aug", "--config", &cfg, "--out", out_s, "--count", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut files: Vec<String> = std::fs::read_dir(run.join("aug"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files.len(), 9);
    assert_eq!(files[0], "aug_0_0_0.pgm");
    assert!(files.contains(&"aug_0_0_2_src1.pgm".to_string()));
    for f in &files {
        let img = pnm::read(&run.join("aug").join(f)).unwrap();
        assert_eq!(img.shape(), &[1, 8, 8]);
        assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    let svg = tmp.path().join("curves.svg");
    let o = smartaug(&["export-curves", run.join("metrics.csv").to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_to_string(&svg).unwrap().matches("<polyline").count(), 2);
}

#[test]
fn untrained_augmenter_still_dumps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "zero.cfg", "epochs = 0\n");
    let out = tmp.path().join("runs");
    assert!(smartaug(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let config = ExperimentConfig::parse(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    let files = cmd_dump_aug(&config, &out.join("exp3_seed0/network_a.saug"), 2, &tmp.path().join("dump")).unwrap();
    assert_eq!(files.len(), 6);
}

#[test]
fn per_class_augmenters_dump_their_own_class() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "multi.cfg", "num_net_a = 2\nepochs = 1\n");
    let out = tmp.path().join("runs");
    assert!(smartaug(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let run = out.join("exp3_seed0");
    assert!(run.join("network_a0.saug").is_file() && run.join("network_a1.saug").is_file());
    let config = ExperimentConfig::parse(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    assert_eq!(config.learning_rate, 0.005);
    let files = cmd_dump_aug(&config, &run.join("network_a1.saug"), 1, &tmp.path().join("d")).unwrap();
    assert_eq!(files.len(), 3);
}

#[test]
fn missing_checkpoint_fails_dump() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.cfg", "");
    let o = smartaug(&["dump-aug", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("does not exist"));
}

#[test]
fn failing_run_writes_manifest_with_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.cfg", "dataset = /nonexistent/images\n");
    let out = tmp.path().join("runs");
    let o = smartaug(&["train", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    let m = manifest(&out.join("exp3_seed0"));
    assert!(m["error"].as_str().unwrap().contains("nonexistent"));
    assert!(m["test_accuracy"].is_null());
}

#[test]
fn invalid_config_names_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.cfg", "alpha = 0\nbeta = 0\n");
    let o = smartaug(&["train", "--config", &cfg, "--out", tmp.path().to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("alpha"));
    let cfg = write_config(tmp.path(), "typo.cfg", "epochz = 3\n");
    let o = smartaug(&["train", "--config", &cfg]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("epochz"));
}

#[test]
fn grid_runs_every_config_in_order() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = tmp.path().join("grid");
    std::fs::create_dir(&grid).unwrap();
    write_config(&grid, "a.cfg", "num_net_a = 0\nepochs = 1\n");
    std::fs::write(grid.join("b.cfg"), TINY.replace("exp_id = 3", "exp_id = 4") + "epochs = 1\nepochs = 1\n").unwrap();
    let out = tmp.path().join("runs");
    let o = smartaug(&["train", "--grid", grid.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success(), "b.cfg repeats `epochs` and must fail");
    assert!(out.join("exp3_seed0/manifest.json").is_file());
    std::fs::write(grid.join("b.cfg"), TINY.replace("exp_id = 3", "exp_id = 4") + "epochs = 1\n").unwrap();
    let o = smartaug(&["train", "--grid", grid.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("exp4_seed0/metrics.csv").is_file());
}

#[test]
fn malformed_metrics_report_the_line() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("m.csv");
    std::fs::write(&csv, "epoch,train_loss_total,train_loss_a,train_loss_b,val_loss_b,val_accuracy\n1,0.5,,0.5,0.6,0.5\n2,x,,0.5,0.6,0.5\n").unwrap();
    let o = smartaug(&["export-curves", csv.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    std::fs::write(&csv, "epoch,train_loss_total,train_loss_a,train_loss_b,val_loss_b,val_accuracy\n").unwrap();
    assert!(!smartaug(&["export-curves", csv.to_str().unwrap()]).status.success());
}

#[test]
fn gen_synthetic_writes_class_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("syn");
    let o = smartaug(&["gen-synthetic", "--out", out.to_str().unwrap(), "--count", "4", "--seed", "2"]);
    assert!(o.status.success());
    for class in ["rectangle", "disc"] {
        assert_eq!(std::fs::read_dir(out.join(class)).unwrap().count(), 4);
    }
    let ds = smartaug::data::load_image_dir(&out).unwrap();
    assert_eq!(ds.shape().dims(), [1, 32, 32]);
}
