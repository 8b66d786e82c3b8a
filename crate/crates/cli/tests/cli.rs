use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
[operator]
n = 1
n_modes = 8

[graph]
kind = "soc"
theta1 = 1.0
theta2 = 1.0

[noise]
kind = "diagonal"
mu = { rule = "powerlaw", a = 0.05, p = 2.0 }

[sim]
h = 1e-3
t_max = 0.3
m_traj = 24
seed = 3
"#;

fn extinct(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_extinct")).args(args).output().unwrap()
}

fn run_ok(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = extinct(&args);
    assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn setup() -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, CONFIG).unwrap();
    (dir, cfg)
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn same_inputs_give_identical_files() {
    let (dir, cfg) = setup();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for cmd in ["bounds", "simulate", "verify", "propcheck"] {
        run_ok(cmd, &cfg, &a, &[]);
        run_ok(cmd, &cfg, &b, &["--threads", "1"]);
    }
    let fa = files(&a);
    assert_eq!(fa.len(), 10);
    assert_eq!(fa, files(&b));
}

#[test]
fn every_file_carries_the_stamp() {
    let (dir, cfg) = setup();
    let out = dir.path().join("o");
    run_ok("verify", &cfg, &out, &["--seed", "11"]);
    for (name, bytes) in files(&out) {
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("config_hash"), "{name}");
        assert!(text.contains("tool_version"), "{name}");
        if name.ends_with(".csv") {
            assert!(text.starts_with("# tool=extinct"), "{name}");
            assert!(text.lines().next().unwrap().ends_with("seed=11"), "{name}");
        } else {
            assert!(text.contains("\"seed\": 11"), "{name}");
        }
    }
}

#[test]
fn floats_have_seventeen_significant_digits() {
    let (dir, cfg) = setup();
    let out = dir.path().join("o");
    run_ok("bounds", &cfg, &out, &[]);
    let csv = fs::read_to_string(out.join("bounds_theta.csv")).unwrap();
    let row = csv.lines().nth(2).unwrap();
    for field in row.split(',').filter(|f| !f.is_empty()) {
        let mantissa = field.split('e').next().unwrap().trim_start_matches('-');
        assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 17, "{field}");
        field.parse::<f64>().unwrap();
    }
}

#[test]
fn verify_refuses_foreign_artifacts() {
    let (dir, cfg) = setup();
    let out = dir.path().join("o");
    run_ok("simulate", &cfg, &out, &[]);
    let path = out.join("stats.json");
    let text = fs::read_to_string(&path).unwrap();
    let hash_line = text.lines().find(|l| l.contains("config_hash")).unwrap();
    let tampered = text.replacen(hash_line, "    \"config_hash\": \"0000\",", 1);
    fs::write(&path, tampered).unwrap();
    let o = extinct(&["verify", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("hash mismatch"));
    assert!(!out.join("verify.json").exists());
}

#[test]
fn different_seed_is_a_different_run() {
    let (dir, cfg) = setup();
    let out = dir.path().join("o");
    run_ok("simulate", &cfg, &out, &[]);
    let o = extinct(&[
        "verify",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "4",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_reports_location() {
    let (dir, cfg) = setup();
    fs::write(&cfg, format!("{CONFIG}\n[output]\ndirr = \"x\"\n")).unwrap();
    let o = extinct(&["bounds", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("dirr") && err.contains("run.toml"), "{err}");
}

#[test]
fn propcheck_passes_on_shipped_configs() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();
    for e in fs::read_dir(root).unwrap() {
        let p = e.unwrap().path();
        let stdout = run_ok("propcheck", &p, dir.path(), &[]);
        assert!(!stdout.contains("FAIL"), "{}: {stdout}", p.display());
    }
}
