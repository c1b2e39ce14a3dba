use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_skewflow"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn list_prints_eight_rows() {
    let out = bin().arg("--list").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 9);
    let again = bin().arg("--list").output().unwrap();
    assert_eq!(again.stdout, text.as_bytes());
}

#[test]
fn passing_run_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "fp.toml", "scenario = \"fixed-point\"\n[params]\ngrid = 32\n");
    let out = dir.path().join("out");
    let st = bin().arg("--config").arg(&cfg).arg("--outdir").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    for f in ["report.csv", "curves.csv", "plot.svg", "section.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.contains("diagnostic,alpha_hat,3.68"));
}

#[test]
fn malformed_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    for (i, text) in [
        "scenario = \"fixed-point\"\n[params]\ntol = -1e-3\n",
        "scenario = \"unknown\"\n",
        "scenario = \"spectrum\"\n[system]\nname = \"nope\"\n",
    ]
    .iter()
    .enumerate()
    {
        let cfg = write(dir.path(), &format!("bad{i}.toml"), text);
        let st = bin().arg("--config").arg(&cfg).arg("--outdir").arg(dir.path()).status().unwrap();
        assert_eq!(st.code(), Some(2), "{text}");
    }
    let st = bin().arg("--config").arg(dir.path().join("missing.toml")).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn runtime_failure_exits_one_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "fp.toml", "scenario = \"fixed-point\"\n[params]\ngrid = 8\nmax_iter = 2\n");
    let out = dir.path().join("out");
    let st = bin().arg("--config").arg(&cfg).arg("--outdir").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(1));
    let report = std::fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.contains(",error,"));
}

#[test]
fn same_seed_gives_identical_report_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "ae.toml",
        "scenario = \"attractor-equivalence\"\n[params]\ngrid = 16\nsamples = 4\n[output]\nplot = false\n",
    );
    let run = |sub: &str, seed: &str| {
        let out = dir.path().join(sub);
        let st = bin()
            .env("SKEWFLOW_THREADS", "1")
            .args(["--seed", seed])
            .arg("--config")
            .arg(&cfg)
            .arg("--outdir")
            .arg(&out)
            .status()
            .unwrap();
        assert_eq!(st.code(), Some(0));
        assert!(!out.join("plot.svg").exists());
        std::fs::read(out.join("report.csv")).unwrap()
    };
    let a = run("a", "11");
    let b = run("b", "11");
    assert_eq!(a, b);
    let c = run("c", "12");
    assert!(String::from_utf8(c).unwrap().contains(",12,"));
}

#[test]
fn bad_thread_count_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "fp.toml", "scenario = \"fixed-point\"\n");
    let st = bin().env("SKEWFLOW_THREADS", "0").arg("--config").arg(&cfg).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn shipped_configs_parse_and_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = skewflow::config::ExperimentConfig::load(&path).unwrap();
            cfg.validate().unwrap();
            cfg.system().unwrap();
            n += 1;
        }
    }
    assert!(n >= 8);
}
