use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn domconf(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_domconf"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_pair(dir: &Path) {
    fs::write(dir.join("s.csv"), "id,domain,label,f0,f1\na,src,0,0.0,1.0\nb,src,1,1.0,0.0\nc,src,0,0.5,0.5\n").unwrap();
    fs::write(dir.join("t.csv"), "id,domain,label,f0,f1\nd,tgt,0,2.0,1.0\ne,tgt,1,3.0,0.0\n").unwrap();
}

#[test]
fn mmd_prints_report() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    let out = domconf(&["mmd", "s.csv", "t.csv"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    // source mean (0.5, 0.5), target mean (2.5, 0.5)
    assert!(text.starts_with("value = 2\n"), "{text}");
    assert!(text.contains("n_target = 2"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["frobnicate"][..],
        &["mmd", "s.csv"][..],
        &["gradcheck", "--seed", "minus-one"][..],
        &["mmd", "s.csv", "t.csv", "--unbiased"][..],
    ] {
        write_pair(dir.path());
        let out = domconf(args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", stderr(&out));
        let err = stderr(&out);
        assert!(err.starts_with("E_USAGE: "), "{err}");
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    }
}

#[test]
fn bad_config_keys_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.cfg"), "train.lambda = 0.25\ntrain.lamda = 1\n").unwrap();
    let out = domconf(&["train", "--config", "c.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("train.lamda"));
}

#[test]
fn malformed_data_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    fs::write(dir.path().join("bad.csv"), "id,domain,label,f0,f1\na,src,0,1.0,2.0\nb,src,0,1.0\n").unwrap();
    let out = domconf(&["mmd", "bad.csv", "t.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).starts_with("E_DATA: "));

    let out = domconf(&["mmd", "missing.csv", "t.csv"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn divergent_training_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.cfg"),
        "split.n_splits = 1\ntrain.lr = 1e12\ntrain.iterations = 200\n",
    )
    .unwrap();
    let out = domconf(&["train", "--config", "c.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert!(stderr(&out).starts_with("E_NUMERIC: "));
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = domconf(&["gradcheck", "--seed", "3", "--cases", "10"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(String::from_utf8_lossy(&out.stdout).contains("cases = 10"));
}

#[test]
fn train_writes_report_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.cfg"), "split.n_splits = 2\ntrain.iterations = 50\noutput = out\n").unwrap();
    let out = domconf(&["train", "--config", "c.cfg"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    for name in ["report.txt", "report.kv", "curve_split0.csv", "curve_split1.csv"] {
        assert!(dir.path().join("out").join(name).is_file(), "{name}");
    }
}

#[test]
fn select_layer_ranks_by_mmd() {
    let dir = tempfile::tempdir().unwrap();
    write_pair(dir.path());
    fs::write(dir.path().join("t2.csv"), "id,domain,label,f0,f1\nd,tgt,0,0.5,0.6\ne,tgt,1,0.5,0.4\n").unwrap();
    let out = domconf(&["select-layer", "far=s.csv,t.csv", "near=s.csv,t2.csv"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "candidate,mmd,accuracy,selected");
    assert!(lines[1].starts_with("near,") && lines[1].ends_with(",1"), "{text}");
}
