use std::fs;
use std::process::{Command, Output};

fn sith(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sith")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn params_reports_catch_counts() {
    let o = sith(&["params"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("5,1170,2741310,2343,2743653"), "{text}");
    let o = sith(&["params", "--features", "10", "--slices", "2"]);
    assert!(stdout(&o).contains("2,20,860,43,903"));
}

#[test]
fn probe_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("probe.csv");
    let o = sith(&["probe", "compare-representations", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(out).unwrap();
    for series in ["sith,", "buffer,", "expdecay,"] {
        assert!(text.lines().any(|l| l.starts_with(series)));
    }
    assert!(!sith(&["probe", "bogus"]).status.success());
}

#[test]
fn presets_listed_and_unknown_rejected() {
    let o = sith(&["presets"]);
    assert!(stdout(&o).lines().any(|l| l == "sith-5-mask16-balls10"));
    let o = sith(&["train", "--preset", "sith-5-mask3-balls10"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn train_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("tiny.toml");
    fs::write(
        &config,
        r#"
label = "cli-tiny"
runs = 1
[memory]
kind = "buffer"
size = 1
[env]
balls_per_game = 1
[train]
epochs = 2
eval_every = 1
eval_games = 5
final_eval_games = 10
session_batch_cap = 8
"#,
    )
    .unwrap();
    let out = dir.path().join("runs");
    let o = sith(&["train", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let run = out.join("cli-tiny").join("run-0");
    let checkpoint = run.join("checkpoint.bin");
    assert!(checkpoint.exists());

    let scores = dir.path().join("scores.csv");
    let args = ["eval", checkpoint.to_str().unwrap(), "--games", "7", "--seed", "1"];
    let a = sith(&[&args[..], &["--out", scores.to_str().unwrap()]].concat());
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert!(stdout(&a).starts_with("7 games"));
    assert_eq!(fs::read_to_string(&scores).unwrap().lines().count(), 8);
    let b = sith(&args);
    assert_eq!(stdout(&a), stdout(&b));

    let wrong = dir.path().join("wrong.toml");
    fs::write(&wrong, fs::read_to_string(&config).unwrap().replace("size = 1", "size = 5")).unwrap();
    let o = sith(&["eval", checkpoint.to_str().unwrap(), "--config", wrong.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "label = \"bad\"\n[memory]\nkind = \"buffer\"\nsize = 1\n[train]\ngamma = 1.5\n").unwrap();
    let o = sith(&["train", "--config", config.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma"));
}

#[test]
fn sweep_exact_name_selects_one_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = sith(&[
        "sweep", "--preset", "buffer-1-mask0-balls1", "--epochs", "0", "--runs", "2", "--out", out,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<&str> = table.lines().skip(1).collect();
    assert_eq!(rows.len(), 1, "{table}");
    assert!(rows[0].starts_with("buffer-1-mask0-balls1,"));
}
