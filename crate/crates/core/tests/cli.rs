use std::path::Path;
use std::process::{Command, Output};

use haarmoments::cli::{manifest_path, RunManifest};
use serde_json::Value;
use sha2::{Digest, Sha256};

fn haarmoments(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_haarmoments"));
    cmd.args(args).env_remove("HAARMOMENTS_CACHE");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn json_stdout(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("JSON on stdout")
}

#[test]
fn wg_table_writes_data_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("wg.json");
    let o = haarmoments(
        &[
            "wg-table",
            "--k",
            "2",
            "--n",
            "5",
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "4",
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
    let bytes = std::fs::read(&out).unwrap();
    let v: Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["values"]["[1,1]"]["numerator"], "1");
    assert_eq!(v["values"]["[1,1]"]["denominator"], "24");
    assert_eq!(v["values"]["[2]"]["numerator"], "-1");
    assert_eq!(v["values"]["[2]"]["denominator"], "120");
    let m: RunManifest =
        serde_json::from_slice(&std::fs::read(manifest_path(&out)).unwrap()).unwrap();
    assert_eq!(m.command, "wg-table");
    assert_eq!(m.seed, 4);
    assert_eq!(m.output_sha256, hex::encode(Sha256::digest(&bytes)));
    assert_eq!(m.parameters["command"]["wg-table"]["k"], 2);
}

#[test]
fn orthogonal_table_at_n4() {
    let o = haarmoments(
        &[
            "wg-table",
            "--k",
            "4",
            "--n",
            "4",
            "--orthogonal",
            "--seed",
            "0",
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
    let v = json_stdout(&o);
    // Wg^O for k = 4: (n+1)/(n(n-1)(n+2)) on equal pairings, -1/(n(n-1)(n+2)) otherwise.
    assert_eq!(v["values"]["[1,1]"]["numerator"], "5");
    assert_eq!(v["values"]["[1,1]"]["denominator"], "72");
    assert_eq!(v["values"]["[2]"]["numerator"], "-1");
    assert_eq!(v["values"]["[2]"]["denominator"], "72");
}

#[test]
fn usage_errors() {
    let o = haarmoments(&["wg-table", "--k", "2", "--n", "5", "--frobnicate"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(haarmoments(&["bogus"], &[]).status.code(), Some(2));
    assert_eq!(haarmoments(&[], &[]).status.code(), Some(2));
    let missing = haarmoments(
        &["free-norm", "--pencil", "/nonexistent.json", "--m", "3"],
        &[],
    );
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn cache_directory_is_filled_and_reused() {
    let dir = tempfile::tempdir().unwrap();
    let env = [("HAARMOMENTS_CACHE", dir.path())];
    let first = haarmoments(&["wg-table", "--k", "3", "--n", "6", "--seed", "1"], &env);
    assert_eq!(first.status.code(), Some(0));
    let cached = haarmoments::cli::cache_file(dir.path(), 3, 6, false);
    assert!(cached.exists());
    let second = haarmoments(&["wg-table", "--k", "3", "--n", "6", "--seed", "1"], &env);
    assert_eq!(first.stdout, second.stdout);
    let uncached = haarmoments(&["wg-table", "--k", "3", "--n", "6", "--seed", "1"], &[]);
    assert_eq!(first.stdout, uncached.stdout);
}

#[test]
fn freeness_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("demo.toml");
    std::fs::write(
        &cfg,
        "n = [8, 12]\nd = 2\nq_minus = 0\nq_plus = 1\nseed = 21\n",
    )
    .unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = haarmoments(
            &[
                "freeness",
                "--config",
                cfg.to_str().unwrap(),
                "--trials",
                "2",
                "--deterministic-timing",
                "--out",
                out.to_str().unwrap(),
            ],
            &[],
        );
        assert_eq!(
            o.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert!(manifest_path(&out).exists());
        std::fs::read_to_string(out).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,trial,seed,restricted_norm,astar_estimate,deviation,wall_time_ms"
    );
    assert_eq!(lines.count(), 4);
    let m: RunManifest =
        serde_json::from_slice(&std::fs::read(manifest_path(&dir.path().join("a.csv"))).unwrap())
            .unwrap();
    assert_eq!(m.seed, 21);
}

#[test]
fn freeness_rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "n = [8]\nd = 2\ncolour = 3\n").unwrap();
    let o = haarmoments(
        &[
            "freeness",
            "--config",
            cfg.to_str().unwrap(),
            "--trials",
            "1",
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_commands_report_json() {
    let o = haarmoments(
        &["centered-check", "--k", "2", "--n", "4", "--seed", "0"],
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
    let v = json_stdout(&o);
    assert!(v["checked"].as_u64().unwrap() > 0);
    assert_eq!(v["failures"].as_array().unwrap().len(), 0);

    let o = haarmoments(
        &[
            "gauss-compare",
            "--k",
            "2",
            "--n",
            "16",
            "--brackets",
            "--seed",
            "0",
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
    let v = json_stdout(&o);
    let inst = v["instances"].as_array().unwrap();
    assert!(!inst.is_empty());
    for i in inst {
        let margin = i["margin"].as_f64().unwrap();
        let diff = i["rhs"].as_f64().unwrap() - i["lhs"].as_f64().unwrap();
        assert!((margin - diff).abs() <= 1e-12 * (1.0 + diff.abs()));
    }
}

#[test]
fn free_norm_on_kesten_pencil() {
    let dir = tempfile::tempdir().unwrap();
    let pencil = dir.path().join("p.json");
    let p = haarmoments::freegroup::MatrixPencil::uniform_scalar(2, 0.0, 1.0).unwrap();
    std::fs::write(&pencil, p.to_json_string().unwrap()).unwrap();
    let o = haarmoments(
        &[
            "free-norm",
            "--pencil",
            pencil.to_str().unwrap(),
            "--m",
            "6",
            "--seed",
            "0",
        ],
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
    let v = json_stdout(&o);
    let lower = v["astar_norm_lower"].as_f64().unwrap();
    assert!(lower > 2.0 && lower <= 2.0 * 3f64.sqrt() + 1e-9);
    let rho = v["rho_k"].as_array().unwrap();
    assert_eq!(rho.len(), 6);
    for r in rho {
        assert!((r["rho_k"].as_f64().unwrap() - 3f64.sqrt()).abs() < 1e-12);
    }
}

#[test]
fn nb_spectrum_on_scalar_weights() {
    // Scalar weights b_i = 1 on F_1: B is the 2x2 matrix [[1,0],[0,1]] in
    // either form, so σ(B) = {1, 1} and A^(λ) is singular exactly at λ = 1.
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.json");
    std::fs::write(&w, r#"{"weights": [[[[1.0, 0.0]]], [[[1.0, 0.0]]]]}"#).unwrap();
    let o = haarmoments(
        &[
            "nb-spectrum",
            "--weights",
            w.to_str().unwrap(),
            "--lambda-grid",
            "0.5:2:0.5",
            "--seed",
            "0",
        ],
        &[],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v = json_stdout(&o);
    let spec = v["spectrum"].as_array().unwrap();
    assert_eq!(spec.len(), 2);
    for z in spec {
        assert!((z[0].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
    let grid = v["grid"].as_array().unwrap();
    assert_eq!(grid.len(), 4);
    // λ = 1 lies on the excluded set λ² = b_{i*} b_i = 1.
    assert!(grid[1]["min_singular_value"].is_null());
    assert!(grid[0]["min_singular_value"].as_f64().unwrap() > 1e-3);
}

#[test]
fn linearize_reports_shift_and_residual() {
    let dir = tempfile::tempdir().unwrap();
    let poly = dir.path().join("q.json");
    std::fs::write(
        &poly,
        r#"{"d": 1, "terms": [
            {"word": [0, 0], "matrix": [[[1.0, 0.0]]]},
            {"word": [], "matrix": [[[2.0, 0.0]]]},
            {"word": [1, 1], "matrix": [[[1.0, 0.0]]]}
        ]}"#,
    )
    .unwrap();
    let o = haarmoments(
        &[
            "linearize",
            "--poly",
            poly.to_str().unwrap(),
            "--norm",
            "--seed",
            "0",
        ],
        &[],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v = json_stdout(&o);
    assert!(v["residual"].as_f64().unwrap() <= 1e-8);
    let c = v["c"].as_f64().unwrap();
    assert!((v["shift"].as_f64().unwrap() - 3.0 * c).abs() < 1e-12);
    assert!((v["norm"].as_f64().unwrap() - 4.0).abs() < 0.05);
}

#[test]
fn selftest_passes() {
    let o = haarmoments(&["selftest", "--seed", "0"], &[]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stdout)
    );
    let v = json_stdout(&o);
    assert!(v.as_array().unwrap().iter().all(|l| l["passed"] == true));
}
