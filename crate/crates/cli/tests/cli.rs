use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 4

[federation]
n_clients = 3
train_samples = 200

[training]
rounds = 5
personal_epochs = 5

[bench]
n_per_stream = 40
workers = 2
"#;

fn btfl(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_btfl"));
    cmd.args(args).env_remove("BTFL_SEED");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn selftest_passes() {
    let o = btfl(&["selftest"], &[]);
    assert!(o.status.success(), "{}", stdout(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 7, "{out}");
    assert!(!out.contains("FAIL"));
}

#[test]
fn train_bench_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let run = dir.path().join("run");
    let run_s = run.to_str().unwrap();

    let o = btfl(&["train", "--config", &cfg, "--out", run_s], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("personal_ind"));
    let state = run.join("state.json");
    let state_s = state.to_str().unwrap();

    let o = btfl(&["bench", "--state", state_s, "--config", &cfg, "--out", run_s], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    for f in ["summary.csv", "summary.txt", "manifest.json", "trace_btfl.csv", "trace_fixed_mix_0.5.csv"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let summary = fs::read_to_string(run.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "method,orig_ind,shift_ind,orig_exd,shift_exd,synthetical,avg");
    assert_eq!(lines.len(), 7);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 7));
    let trace = fs::read_to_string(run.join("trace_local_only.csv")).unwrap();
    assert_eq!(
        trace.lines().next().unwrap(),
        "client_id,stream_tag,sample_idx,true_label,pred_label,e,tau_hat,event,alpha,beta,correct"
    );
    assert_eq!(trace.lines().count(), 1 + 3 * 5 * 40);

    let o = btfl(&["report", "--in", run_s], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(table.starts_with(&stdout(&o)));

    // Same inputs, bit-identical outputs.
    let again = dir.path().join("again");
    let o = btfl(&["bench", "--state", state_s, "--out", again.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(again.join("summary.csv")).unwrap(), summary.as_bytes());

    // A missing trace is an incomplete input.
    fs::remove_file(run.join("trace_btfl.csv")).unwrap();
    let o = btfl(&["report", "--in", run_s], &[]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn train_is_reproducible_and_seed_overridable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let read = |name: &str, env: &[(&str, &str)]| {
        let out = dir.path().join(name);
        let o = btfl(&["train", "--config", &cfg, "--out", out.to_str().unwrap()], env);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("state.json")).unwrap()
    };
    let a = read("a", &[]);
    assert_eq!(a, read("b", &[]));
    let c = read("c", &[("BTFL_SEED", "99")]);
    assert_ne!(a, c);
    assert!(String::from_utf8(c).unwrap().contains("\"seed\": 99"));
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let cases = [
        ("[federation]\nconcentration = 0.0\n", "concentration"),
        ("methods = [\"btfl\", \"nonsense\"]\n", "methods"),
        ("[adapter]\nlambda = 2.0\n", "lambda"),
        ("[bench]\nn_per_stream = 30\n", "n_per_stream"),
        ("[task]\nbogus = 1\n", "bogus"),
    ];
    for (text, field) in cases {
        let cfg = write_config(dir.path(), text);
        let o = btfl(&["train", "--config", &cfg, "--out", out_s], &[]);
        assert_eq!(o.status.code(), Some(2), "{text}: {}", stderr(&o));
        assert!(stderr(&o).contains(field), "{text}: {}", stderr(&o));
    }
    let cfg = write_config(dir.path(), SMALL);
    let o = btfl(&["train", "--config", &cfg, "--out", out_s], &[("BTFL_SEED", "x")]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_inputs_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = btfl(&["bench", "--state", missing.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(4));
    let o = btfl(&["report", "--in", dir.path().to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(4));
    let o = btfl(&["train", "--config", missing.to_str().unwrap(), "--out", "x"], &[]);
    assert_eq!(o.status.code(), Some(4));
}
