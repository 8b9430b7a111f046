use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpu-lyap"))
        .args(args)
        .env("FPU_LYAP_OUT", out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

const SWEEP: &str = r#"
model = "alpha-beta"
N = [12]
eps = [0.02, 0.05, 0.1]
t_max = 3000.0
ensemble = 3
seed = 4
"#;

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v = Vec::new();
    for model in fs::read_dir(dir).unwrap() {
        let model = model.unwrap().path();
        if !model.is_dir() {
            continue;
        }
        for run in fs::read_dir(&model).unwrap() {
            let run = run.unwrap().path();
            for f in ["series.csv", "ensemble.csv", "summary.json"] {
                v.push((run.join(f).strip_prefix(dir).unwrap().display().to_string(), fs::read(run.join(f)).unwrap()));
            }
        }
    }
    v.sort();
    v
}

#[test]
fn interrupted_sweep_resumes_to_identical_bytes() {
    let cfg_dir = tempfile::tempdir().unwrap();
    let cfg = cfg_dir.path().join("sweep.toml");
    fs::write(&cfg, SWEEP).unwrap();
    let cfg = cfg.to_str().unwrap();

    let a = tempfile::tempdir().unwrap();
    let full = cli(&["sweep", "--config", cfg], a.path());
    assert!(matches!(code(&full), 0 | 4), "{}", String::from_utf8_lossy(&full.stderr));

    let b = tempfile::tempdir().unwrap();
    // 3 runs × 3 members × 30000 steps; stop near 30%
    let cut = cli(&["sweep", "--config", cfg, "--max-steps", "27000"], b.path());
    assert_eq!(code(&cut), 5, "{}", String::from_utf8_lossy(&cut.stdout));
    let resumed = cli(&["sweep", "--config", cfg, "--resume"], b.path());
    assert_eq!(code(&resumed), code(&full));
    assert_eq!(tree(a.path()), tree(b.path()));

    // completed records are left alone
    let again = cli(&["sweep", "--config", cfg], b.path());
    assert_eq!(code(&again), code(&full));
    assert_eq!(tree(a.path()), tree(b.path()));
}

#[test]
fn flags_override_the_file_and_fit_reads_results() {
    let cfg_dir = tempfile::tempdir().unwrap();
    let cfg = cfg_dir.path().join("sweep.toml");
    fs::write(&cfg, SWEEP).unwrap();
    let out = tempfile::tempdir().unwrap();
    let o = cli(
        &["sweep", "--config", cfg.to_str().unwrap(), "--model", "pure-beta", "--eps", "0.05,0.1,0.2", "--ensemble", "2"],
        out.path(),
    );
    assert!(matches!(code(&o), 0 | 4));
    let summary = fs::read_to_string(out.path().join("pure-beta/N12_eps1e-1_dt0.1/summary.json")).unwrap();
    let rec: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(rec["ensemble"], 2);
    assert_eq!(rec["seed"], 4);
    assert_eq!(rec["t_max_rule"], "explicit");
    let header = fs::read_to_string(out.path().join("pure-beta/N12_eps1e-1_dt0.1/ensemble.csv")).unwrap();
    assert!(header.starts_with("# model=pure-beta N=12 eps=1e-1 dt=0.1 seed=4"));

    let fit = cli(&["fit", "--eps-window", "0,1"], out.path());
    assert_eq!(code(&fit), 0, "{}", String::from_utf8_lossy(&fit.stderr));
    let csv = fs::read_to_string(out.path().join("fit.csv")).unwrap();
    assert!(csv.starts_with("model,N,dt,C,a,a_stderr,eps_min,eps_max,n_points,rms\n"));
}

#[test]
fn config_errors_exit_before_compute() {
    let out = tempfile::tempdir().unwrap();
    for args in [
        vec!["run", "--model", "pure-beta", "--N", "3", "--eps", "1e-3"],
        vec!["run", "--model", "pure-beta", "--N", "16", "--eps", "-1e-3"],
        vec!["run", "--model", "no-such-model", "--N", "16", "--eps", "1e-3"],
        vec!["run", "--model", "pure-beta", "--N", "16,32", "--eps", "1e-3"],
        vec!["run", "--model", "toda", "--beta", "1", "--N", "16", "--eps", "1e-3"],
        vec!["theory", "--model", "toda", "--N", "16", "--eps", "1e-3"],
        vec!["fit", "--eps-window", "1"],
    ] {
        let o = cli(&args, out.path());
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let bad = out.path().join("bad.toml");
    fs::write(&bad, format!("{SWEEP}colour = \"blue\"\n")).unwrap();
    assert_eq!(code(&cli(&["sweep", "--config", bad.to_str().unwrap()], out.path())), 2);
    assert!(fs::read_dir(out.path()).unwrap().count() == 1, "nothing computed");
}

#[test]
fn tampered_checkpoint_stops_resume() {
    let out = tempfile::tempdir().unwrap();
    let args = ["run", "--model", "pure-beta", "--N", "12", "--eps", "0.1", "--t-max", "2000", "--ensemble", "2"];
    let mut cut = args.to_vec();
    cut.extend(["--max-steps", "5000"]);
    assert_eq!(code(&cli(&cut, out.path())), 5);
    let ck = out.path().join("pure-beta/N12_eps1e-1_dt0.1/checkpoints/member_0000.ckpt");
    let mut bytes = fs::read(&ck).unwrap();
    let k = bytes.len() / 2;
    bytes[k] = if bytes[k] == b'1' { b'2' } else { b'1' };
    fs::write(&ck, bytes).unwrap();
    let mut resume = args.to_vec();
    resume.push("--resume");
    let o = cli(&resume, out.path());
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("checksum"));
}

#[test]
fn theory_and_toda_check_write_tables() {
    let out = tempfile::tempdir().unwrap();
    let o = cli(&["theory", "--model", "gamma-delta", "--N", "64", "--eps", "1e-3,1e-2", "--n-mc", "2000"], out.path());
    assert_eq!(code(&o), 0);
    let csv = fs::read_to_string(out.path().join("gamma-delta/theory_N64.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 4);

    let o = cli(
        &[
            "toda-check", "--N", "12", "--eps", "0.05", "--dt-list", "0.1,0.4", "--sweep-dt", "0.4", "--sweep-eps",
            "0.02,0.05,0.1", "--t-max", "1000", "--ensemble", "2",
        ],
        out.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("strictly increasing in dt"));
    assert!(out.path().join("toda-check.csv").exists());
    assert!(out.path().join("toda-check.json").exists());
}
