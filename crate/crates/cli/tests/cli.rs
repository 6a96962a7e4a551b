use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn imfx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imfx"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = imfx(args);
    assert!(
        out.status.success(),
        "imfx {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const FAST: [&str; 8] = [
    "--set",
    "mlp_epochs=3",
    "--set",
    "lstm_epochs=2",
    "--set",
    "mlp_hidden=6",
    "--set",
    "lstm_units=3",
];

fn synth(dir: &Path) -> std::path::PathBuf {
    let csv = dir.join("series.csv");
    ok(&["synth", "--fixture", "trend-tones", "--length", "500", "--seed", "3", "--output", p(&csv)]);
    csv
}

#[test]
fn staged_commands_match_one_shot_run() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = synth(tmp.path());
    let full = tmp.path().join("full");
    let staged = tmp.path().join("staged");

    let mut args = vec!["run", "--input", p(&csv), "--out", p(&full), "--background", "8", "--seed", "4"];
    args.extend(FAST);
    let stdout = ok(&args);
    assert!(stdout.contains("mlp: MSE"));

    ok(&["decompose", "--input", p(&csv), "--out", p(&staged)]);
    let decomposition = staged.join("decomposition.csv");
    assert_eq!(fs::read(&decomposition).unwrap(), fs::read(full.join("decomposition.csv")).unwrap());

    let mut args = vec!["train", "--decomposition", p(&decomposition), "--out", p(&staged), "--seed", "4", "--background", "8"];
    args.extend(FAST);
    ok(&args);
    let ckpt = staged.join("checkpoint_mlp.json");
    assert_eq!(fs::read(&ckpt).unwrap(), fs::read(full.join("checkpoint_mlp.json")).unwrap());

    let common = ["--out", p(&staged), "--seed", "4", "--background", "8"];
    let mut args = vec!["predict", "--decomposition", p(&decomposition), "--checkpoint", p(&ckpt)];
    args.extend(common);
    args.extend(FAST);
    ok(&args);
    assert_eq!(
        fs::read(staged.join("predictions_mlp.csv")).unwrap(),
        fs::read(full.join("predictions_mlp.csv")).unwrap()
    );

    let mut args = vec!["explain", "--decomposition", p(&decomposition), "--checkpoint", p(&ckpt)];
    args.extend(common);
    args.extend(FAST);
    ok(&args);
    for name in ["attribution_mlp.json", "attribution_mlp.csv"] {
        assert_eq!(fs::read(staged.join(name)).unwrap(), fs::read(full.join(name)).unwrap(), "{name}");
    }

    let stdout = ok(&["plot", "--out", p(&staged)]);
    assert!(stdout.contains("overlay_mlp.svg"));
    assert_eq!(
        fs::read(staged.join("importance_mlp.svg")).unwrap(),
        fs::read(full.join("importance_mlp.svg")).unwrap()
    );
}

#[test]
fn config_file_and_ablation_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = synth(tmp.path());
    let conf = tmp.path().join("exp.conf");
    fs::write(
        &conf,
        format!(
            "input = {}\nmodel = mlp\nwindow = 5\nmlp_epochs = 2\nmlp_hidden = 4\nbackground = 5\n",
            csv.display()
        ),
    )
    .unwrap();
    let out = tmp.path().join("o");
    let stdout = ok(&["run", "--config", p(&conf), "--out", p(&out), "--exclude-imfs", "1"]);
    assert!(stdout.contains("without [\"imf_1\"]"), "{stdout}");
    let metrics = fs::read_to_string(out.join("metrics.json")).unwrap();
    assert!(metrics.contains("\"ablation\""));
}

#[test]
fn failures_exit_nonzero_with_context() {
    let tmp = tempfile::tempdir().unwrap();
    let csv = synth(tmp.path());
    let out = imfx(&["run", "--input", p(&csv), "--column", "Klose", "--out", p(&tmp.path().join("x"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("load stage failed") && err.contains("Klose"), "{err}");

    let conf = tmp.path().join("bad.conf");
    fs::write(&conf, "windw = 3\n").unwrap();
    let out = imfx(&["run", "--config", p(&conf)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown key `windw`"));

    let out = imfx(&["run", "--input", p(&csv), "--set", "nonsense"]);
    assert!(!out.status.success());
}
