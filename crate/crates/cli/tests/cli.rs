use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_levy-ou"));
    c.env_remove("LEVYOU_OUT");
    c
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, body).unwrap();
    p
}

const SIM: &str = r#"
schema = 1
seed = 11

[model]
alpha = 1.2
gamma = { power = { coef = 1.0, exponent = 1.0 } }
b = { power = { coef = 1.0, exponent = -1.0 } }

[simulate]
mode = "split"
epsilon = 1.0
delta = 0.05
n_max = 20
grid_points = 21
reps = 200
export = 5
"#;

#[test]
fn corollary_example_classification() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("corollary.toml");
    let o = run(&["criteria", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(tmp.path().join("criteria.txt")).unwrap();
    assert!(text.contains("cylindrically càdlàg but not H-càdlàg"));
}

#[test]
fn zero_reps_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SIM);
    let out = tmp.path().join("out");
    let o = run(&["simulate", cfg.to_str().unwrap(), "--set", "simulate.reps=0", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("simulate.reps"));
}

#[test]
fn unknown_key_is_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SIM}\nbogus_key = 3\n"));
    let o = run(&["simulate", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus_key"));
}

#[test]
fn model_assumption_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"
schema = 1
seed = 1
[stable_integral]
alpha = 1.0
domain = { interval = { lo = -1.0, hi = 1.0 } }
kernel = "linear"
delta = 0.1
reps = 10
"#;
    let cfg = write_config(tmp.path(), body);
    let o = run(&["stable-integral", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn failed_check_exit_code() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"
schema = 1
seed = 1
[model]
alpha = 1.0
gamma = { power = { coef = 1.0, exponent = 1.0 } }
b = { power = { coef = 1.0, exponent = -1.5 } }
[verify_supbound]
reps = 1000
windows = [[1, 1]]
c_cal = 1e-9
"#;
    let cfg = write_config(tmp.path(), body);
    let o = run(&["verify-supbound", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn outputs_carry_manifest_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SIM);
    let out = tmp.path().join("o");
    assert_eq!(code(&run(&["simulate", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])), 0);
    let all = files(&out);
    let manifest = String::from_utf8(all["manifest.toml"].clone()).unwrap();
    let first = manifest.lines().next().unwrap().to_string();
    assert!(first.starts_with("# manifest: ") && first.len() == "# manifest: ".len() + 64);
    for (name, bytes) in &all {
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), first, "{name}");
    }
    let paths = String::from_utf8(all["paths.txt"].clone()).unwrap();
    assert!(paths.contains("replicate time value large martingale remainder"));
}

#[test]
fn env_var_sets_output_dir() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = configs().join("corollary.toml");
    let out = tmp.path().join("from_env");
    let o = bin().args(["criteria", cfg.to_str().unwrap()]).env("LEVYOU_OUT", &out).output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(out.join("criteria.txt").exists());
}

#[test]
fn simulate_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SIM);
    let mut outs = Vec::new();
    for w in ["1", "8"] {
        let out = tmp.path().join(format!("w{w}"));
        let o = run(&["simulate", cfg.to_str().unwrap(), "--workers", w, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        outs.push(files(&out));
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn verify_identical_across_worker_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let body = r#"
schema = 1
seed = 5
[verify_marginal]
alphas = [1.0]
reps = 10000
"#;
    let cfg = write_config(tmp.path(), body);
    let mut outs = Vec::new();
    for w in ["1", "8"] {
        let out = tmp.path().join(format!("w{w}"));
        let o = run(&["verify-marginal", cfg.to_str().unwrap(), "--workers", w, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outs.push(files(&out));
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn rerun_from_manifest_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SIM);
    let first = tmp.path().join("first");
    assert_eq!(code(&run(&["simulate", cfg.to_str().unwrap(), "--out", first.to_str().unwrap()])), 0);
    let second = tmp.path().join("second");
    let manifest = first.join("manifest.toml");
    let o = run(&["rerun", manifest.to_str().unwrap(), "--workers", "3", "--out", second.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(files(&first), files(&second));
}
