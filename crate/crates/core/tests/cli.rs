use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hsigan::data::load_cube;
use hsigan::pipeline::REFINE_OUTPUTS;

const SMALL: &str = "\
# small scene for fast runs
synth_height = 12
synth_width = 12
synth_classes = 3
epochs = 3
batch_size = 8
patch_size = 5
spectral_width = 3
spatial_width = 4
noise_dim = 4
n_per_class = 4
";

fn hsigan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hsigan")).args(args).output().unwrap()
}

fn setup(extra: &str) -> (tempfile::TempDir, PathBuf, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    fs::write(&config, format!("{SMALL}{extra}")).unwrap();
    let out = dir.path().join("out");
    (dir, config, out)
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    hsigan(&args)
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn synth_writes_matching_header_and_is_reproducible() {
    let (dir, config, out) = setup("");
    ok(&run("synth", &config, &out, &[]));
    let cube = load_cube(&out.join("cube.hsi")).unwrap();
    assert_eq!((cube.height(), cube.width(), cube.bands()), (12, 12, 8));
    let first = fs::read(out.join("cube.hsi")).unwrap();
    let labels = fs::read(out.join("labels.pgm")).unwrap();
    let again = dir.path().join("again");
    ok(&run("synth", &config, &again, &[]));
    assert_eq!(first, fs::read(again.join("cube.hsi")).unwrap());
    assert_eq!(labels, fs::read(again.join("labels.pgm")).unwrap());
}

#[test]
fn dry_run_touches_nothing() {
    let (_dir, config, out) = setup("");
    for cmd in ["synth", "train", "refine", "eval"] {
        let o = run(cmd, &config, &out, &["--dry-run"]);
        ok(&o);
        assert!(String::from_utf8_lossy(&o.stdout).contains("valid"));
        assert!(!out.exists(), "{cmd} created the output directory");
    }
}

#[test]
fn config_errors_exit_1() {
    let (_dir, config, out) = setup("epohcs = 3\n");
    let o = run("train", &config, &out, &["--dry-run"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epohcs"));
    let o = hsigan(&["train", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn corrupt_cube_exits_2() {
    let (dir, config, out) = setup("");
    let cube = dir.path().join("bad.hsi");
    fs::write(&cube, b"not a cube").unwrap();
    let labels = dir.path().join("labels.pgm");
    fs::write(&labels, "P2\n12 12\n3\n").unwrap();
    let text = format!("{SMALL}cube = {}\nlabels = {}\n", cube.display(), labels.display());
    fs::write(&config, text).unwrap();
    assert_eq!(run("train", &config, &out, &[]).status.code(), Some(2));
}

#[test]
fn diverging_training_exits_3_and_keeps_last_checkpoint() {
    let (_dir, config, out) = setup("lr_d = 1e306\nepochs = 50\n");
    let o = run("train", &config, &out, &[]);
    assert_eq!(o.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    let ckpts: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "ckpt"))
        .collect();
    assert_eq!(ckpts.len(), 1);
    assert!(out.join("train_log.csv").exists());
}

#[test]
fn full_pipeline_artifacts_and_determinism() {
    let (dir, config, out) = setup("");
    ok(&run("train", &config, &out, &[]));
    for f in ["SS_3.ckpt", "split.csv", "train_log.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let log = fs::read_to_string(out.join("train_log.csv")).unwrap();
    assert!(log.starts_with("step,l1,l2,l3,total,feature_match\n"));
    ok(&run("refine", &config, &out, &[]));
    let mut names: Vec<String> = fs::read_dir(out.join("refine"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let mut expected: Vec<String> = REFINE_OUTPUTS.iter().map(|s| s.to_string()).collect();
    expected.sort();
    assert_eq!(names, expected);

    let o = run("eval", &config, &out, &[]);
    ok(&o);
    let table = String::from_utf8_lossy(&o.stdout);
    assert!(table.contains("Without CRF") && table.contains("With CRF") && table.contains("OA"));

    let again = dir.path().join("again");
    ok(&run("train", &config, &again, &[]));
    ok(&run("refine", &config, &again, &[]));
    assert_eq!(fs::read(out.join("split.csv")).unwrap(), fs::read(again.join("split.csv")).unwrap());
    for f in ["metrics.json", "metrics_crf.json"] {
        assert_eq!(fs::read(out.join("refine").join(f)).unwrap(), fs::read(again.join("refine").join(f)).unwrap());
    }
}

#[test]
fn zero_crf_iterations_give_equal_metrics() {
    let (_dir, config, out) = setup("crf_iterations = 0\n");
    ok(&run("train", &config, &out, &[]));
    ok(&run("refine", &config, &out, &[]));
    let r = out.join("refine");
    assert_eq!(fs::read(r.join("metrics.json")).unwrap(), fs::read(r.join("metrics_crf.json")).unwrap());
}

#[test]
fn checkpoint_from_other_architecture_exits_1() {
    let (dir, config, out) = setup("");
    ok(&run("train", &config, &out, &[]));
    let other = dir.path().join("other.cfg");
    let ckpt = out.join("SS_3.ckpt");
    fs::write(&other, format!("{SMALL}variant = CONV\ncheckpoint = {}\n", ckpt.display())).unwrap();
    let o = run("refine", &other, &out, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("checkpoint"));
}

#[test]
fn seed_flag_changes_split() {
    let (dir, config, out) = setup("epochs = 1\n");
    ok(&run("train", &config, &out, &[]));
    let other = dir.path().join("seeded");
    ok(&run("train", &config, &other, &["--seed", "5"]));
    assert_ne!(fs::read(out.join("split.csv")).unwrap(), fs::read(other.join("split.csv")).unwrap());
}
