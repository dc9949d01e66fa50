use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_liegroup-index"));
    cmd.env_remove("LIEGROUP_INDEX_CACHE");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    eprintln!("stdout:\n{}\nstderr:\n{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
    out
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const WINDING: &str = r#"{
  "group": {"kind": "torus", "n": 1},
  "operator": {"op": "winding", "k": 1},
  "cutoffs": [{"band": 8}, {"band": 16}],
  "gammas": [0.5, 2.0],
  "cache_dir": "cache"
}"#;

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn winding_config_reports_minus_one() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "w.json", WINDING);
    let out = run(bin().args(["index", "--config"]).arg(&cfg));
    assert_eq!(out.status.code(), Some(0));
    let r = report(&tmp.path().join("out"));
    let rows = r["report"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|row| row["kernel_count"] == -1));
    assert_eq!(r["report"]["verdict"], "stable");

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("out/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["manifest_id"], r["manifest_id"]);
    let csv = fs::read_to_string(tmp.path().join("out/tables/index.csv")).unwrap();
    assert!(csv.starts_with(&format!("# manifest_id={}", r["manifest_id"].as_str().unwrap())));
}

#[test]
fn invariant_laplacian_shift_has_zero_index() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "lap.json",
        r#"{
  "group": {"kind": "su2"},
  "operator": {"op": "multiplier", "multiplier": {"kind": "casimir_plus_one"}},
  "cutoffs": [{"band": 3}, {"band": 5}],
  "gammas": [1.0]
}"#,
    );
    let out = run(bin().args(["index", "--config"]).arg(&cfg).arg("--out").arg(tmp.path().join("o")));
    assert_eq!(out.status.code(), Some(0));
    let r = report(&tmp.path().join("o"));
    for row in r["report"]["rows"].as_array().unwrap() {
        assert_eq!(row["kernel_count"], 0);
        assert!(row["heat_trace"].as_f64().unwrap().abs() < 1e-8);
        assert!(row["density_route"].as_f64().unwrap().abs() < 1e-8);
    }
}

#[test]
fn malformed_operator_tree_exits_one_with_named_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.json",
        r#"{
  "group": {"kind": "su2"},
  "operator": {"op": "product", "factors": [{"op": "identity"}, {"op": "winding", "k": 2}]},
  "cutoffs": [{"band": 2}]
}"#,
    );
    let out = run(bin().args(["index", "--config"]).arg(&cfg));
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("config error at line 3"), "{err}");
    assert!(err.contains("operator.factors[1]"), "{err}");

    let cfg = write_config(tmp.path(), "bad2.json", "{\n  \"group\": {\"kind\": \"su2\"},\n  \"operator\": {\"op\": \"spin\"},\n  \"cutoffs\": []\n}");
    let out = run(bin().args(["index", "--config"]).arg(&cfg));
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("unknown variant"), "{err}");
}

#[test]
fn reports_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "w.json", WINDING);
    for d in ["a", "b"] {
        let out = run(bin().args(["index", "--config"]).arg(&cfg).arg("--out").arg(tmp.path().join(d)));
        assert_eq!(out.status.code(), Some(0));
    }
    let a = fs::read(tmp.path().join("a/report.json")).unwrap();
    let b = fs::read(tmp.path().join("b/report.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(fs::read(tmp.path().join("a/tables/index.csv")).unwrap(), fs::read(tmp.path().join("b/tables/index.csv")).unwrap());
}

#[test]
fn cache_list_purge_and_verify() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("cache");
    fs::create_dir(&cache).unwrap();

    let out = run(bin().args(["cache", "--action", "list", "--dir"]).arg(&cache));
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 1);

    let cfg = write_config(tmp.path(), "w.json", WINDING);
    assert_eq!(run(bin().args(["index", "--config"]).arg(&cfg)).status.code(), Some(0));
    let out = run(bin().args(["cache", "--action", "list"]).env("LIEGROUP_INDEX_CACHE", &cache));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);

    let out = run(bin().args(["cache", "--action", "verify", "--dir"]).arg(&cache));
    assert_eq!(out.status.code(), Some(0));

    let bin_file = fs::read_dir(&cache)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|x| x == "bin"))
        .unwrap();
    let mut bytes = fs::read(&bin_file).unwrap();
    bytes[20] ^= 0x01;
    fs::write(&bin_file, bytes).unwrap();
    let out = run(bin().args(["cache", "--action", "verify", "--dir"]).arg(&cache));
    assert_ne!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let key = bin_file.file_stem().unwrap().to_string_lossy().to_string();
    assert!(stdout.contains(&format!("CORRUPT\t{key}")), "{stdout}");

    let out = run(bin().args(["cache", "--action", "purge", "--dir"]).arg(&cache));
    assert_eq!(out.status.code(), Some(0));
    let out = run(bin().args(["cache", "--action", "list", "--dir"]).arg(&cache));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 1);
}

#[test]
fn missing_cache_dir_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(bin().args(["cache", "--action", "list", "--dir"]).arg(tmp.path().join("nope")));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn checks_pass_and_fail_as_expected() {
    let tmp = tempfile::tempdir().unwrap();
    let t2 = write_config(
        tmp.path(),
        "t2.json",
        r#"{"group": {"kind": "torus", "n": 2}, "operator": {"op": "identity"}, "cutoffs": [{"band": 4}]}"#,
    );
    for which in ["plancherel", "schur"] {
        let out = run(bin().args(["check", "--which", which, "--config"]).arg(&t2).arg("--out").arg(tmp.path().join(which)));
        assert_eq!(out.status.code(), Some(0), "{which}");
        assert_eq!(report(&tmp.path().join(which))["pass"], true);
    }

    let su3 = write_config(
        tmp.path(),
        "su3.json",
        r#"{"group": {"kind": "su3"}, "operator": {"op": "identity"}, "cutoffs": [{"band": 0}], "quadrature_level": 6}"#,
    );
    let out = run(bin().args(["check", "--which", "quadrature", "--config"]).arg(&su3).arg("--out").arg(tmp.path().join("q")));
    assert_eq!(out.status.code(), Some(0));

    let trace = write_config(
        tmp.path(),
        "trace.json",
        r#"{"group": {"kind": "su2"}, "operator": {"op": "multiplier", "multiplier": {"kind": "weight_power", "s": -5}}, "cutoffs": [{"band": 6}]}"#,
    );
    let out = run(bin().args(["check", "--which", "trace", "--config"]).arg(&trace).arg("--out").arg(tmp.path().join("tr")));
    assert_eq!(out.status.code(), Some(0));

    let sine = write_config(
        tmp.path(),
        "sine.json",
        r#"{
  "group": {"kind": "torus", "n": 1},
  "operator": {"op": "multiply", "coefficients": [
    {"label": {"torus": [1]}, "re": 0.0, "im": -0.5},
    {"label": {"torus": [-1]}, "re": 0.0, "im": 0.5}
  ]},
  "cutoffs": [{"band": 4}]
}"#,
    );
    let out = run(bin().args(["check", "--which", "ellipticity", "--config"]).arg(&sine).arg("--out").arg(tmp.path().join("e")));
    assert_eq!(out.status.code(), Some(2));
    let r = report(&tmp.path().join("e"));
    assert_eq!(r["pass"], false);
    let sites = r["ellipticity"][0]["non_invertible"].as_array().unwrap();
    assert!(sites.iter().any(|s| s["node"] == 0));
    assert!(tmp.path().join("e/tables/ellipticity_sites_0.csv").exists());
}
