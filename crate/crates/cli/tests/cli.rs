use std::path::Path;
use std::process::{Command, Output};

fn polyspec(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyspec"))
        .args(args)
        .arg("--output-dir")
        .arg(dir)
        .env("POLYSPEC_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn verify_defaults_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyspec(&["verify"], dir.path());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{text}{}", stderr(&out));
    for group in ["projections", "spectrum", "masses", "routes", "reciprocity", "oracle", "sobolev", "relation", "herglotz", "bounds"] {
        assert!(text.contains(&format!("PASS {group}")), "{group} missing:\n{text}");
    }
    assert!(dir.path().join("verify.json").exists());
}

#[test]
fn generate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["generate", "--seeds", "1,2,3", "-L", "12", "--crystallites", "3"];
    assert_eq!(code(&polyspec(&args, a.path())), 0);
    assert_eq!(code(&polyspec(&args, b.path())), 0);
    for seed in 1..=3 {
        let rel = format!("microstructure/seed-{seed}.txt");
        let x = std::fs::read_to_string(a.path().join(&rel)).unwrap();
        let y = std::fs::read_to_string(b.path().join(&rel)).unwrap();
        // Payloads match; the embedded output_dir differs between the two runs.
        assert_eq!(x.split_once('\n').unwrap().1, y.split_once('\n').unwrap().1);
        assert!(x.starts_with('{') && x.contains("\"config_hash\""));
    }
    // Re-running into the same directory reproduces the files byte for byte.
    let before = std::fs::read(a.path().join("microstructure/seed-2.txt")).unwrap();
    assert_eq!(code(&polyspec(&args, a.path())), 0);
    assert_eq!(std::fs::read(a.path().join("microstructure/seed-2.txt")).unwrap(), before);
}

#[test]
fn crystallites_must_divide_side() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyspec(&["generate", "-L", "10", "--crystallites", "4"], dir.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("do not divide"));
}

#[test]
fn unknown_kind_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyspec(&["spectrum", "-L", "8", "--kind", "x3_gamma_x3"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn negative_contrast_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyspec(&["effective", "-L", "8", "--sigma1=-2,0", "--sigma2", "1"], dir.path());
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("contrast outside analyticity domain"));
}

#[test]
fn single_crystal_spectrum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"version":1,"d":2,"L":6,"crystallites_per_side":1,"angle_distribution":{"fixed":[0.0]},"seeds":[7]}"#,
    )
    .unwrap();
    let out = polyspec(&["spectrum", "--config", cfg.to_str().unwrap(), "--kind", "x1_gamma_x1"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("spectrum/seed-7/x1_gamma_x1_00.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let atoms = v["atoms"].as_array().unwrap();
    assert_eq!(atoms.len(), 1);
    assert!(atoms[0][0].as_f64().unwrap().abs() < 1e-12);
    assert!((atoms[0][1].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["config"]["L"], 6);
}

#[test]
fn effective_and_sweep_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"version":1,"L":8,"seeds":[2,1],"contrast_grid":[{"sigma1":[10,0],"sigma2":[1,0]}]}"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(code(&polyspec(&["effective", "--config", c], dir.path())), 0);
    let text = std::fs::read_to_string(dir.path().join("effective.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert!(lines.next().unwrap().starts_with("seed,d,L,crystallites,re_sigma1,im_sigma1"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2 * 4 * 2);
    assert!(rows[0].starts_with("1,") && rows.last().unwrap().starts_with("2,"));

    assert_eq!(code(&polyspec(&["sweep", "--config", c], dir.path())), 0);
    let merged = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(merged.lines().count(), 2 + 2 * 2 * 4 * 2);
    assert!(dir.path().join("sweep/seed-1.csv").exists());
}

#[test]
fn bounds_at_reference_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyspec(&["bounds", "-L", "12", "--seeds", "1,2"], dir.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in ["first_order", "second_order"] {
        let v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(format!("bounds/{name}.json"))).unwrap())
                .unwrap();
        assert_eq!(v["sigma1"][0], 51.074);
        assert!(!v["arcs"].as_array().unwrap().is_empty());
    }
    let membership = std::fs::read_to_string(dir.path().join("bounds/membership.csv")).unwrap();
    assert_eq!(membership.lines().count(), 2 + 2 * 2 * 2);
    let bad = polyspec(&["bounds", "-L", "8", "--mu0", "0.5", "--mu1", "0.4"], dir.path());
    assert_eq!(code(&bad), 2);
}
