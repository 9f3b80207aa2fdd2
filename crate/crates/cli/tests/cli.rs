use std::path::Path;
use std::process::{Command, Output};

fn odp(args: &[&str], cache: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odp"))
        .args(args)
        .env("ODP_CACHE_DIR", cache)
        .output()
        .expect("odp runs")
}

fn spec_json(k_augs: usize) -> String {
    serde_json::json!({
        "n_models": 6,
        "n_val": 300,
        "n_test": 500,
        "num_classes": 10,
        "accuracy_val": [0.3, 0.45, 0.55, 0.7, 0.8, 0.9],
        "accuracy_test": [0.2, 0.35, 0.45, 0.6, 0.7, 0.85],
        "margin": 8.0,
        "noise_sigma": 0.4,
        "temperature": 1.0,
        "k_augs": k_augs,
        "aug_flip_prob": 0.4,
        "seed": 5,
        "wrong_margin": 0.0,
        "shared_difficulty": true
    })
    .to_string()
}

fn synth(dir: &Path, k_augs: usize) -> String {
    let spec = dir.join("spec.json");
    std::fs::write(&spec, spec_json(k_augs)).unwrap();
    let data = dir.join("data");
    let out = odp(
        &["synth", "--spec", spec.to_str().unwrap(), "--out-dir", data.to_str().unwrap(), "--dataset-id", "toy"],
        &dir.join("cache"),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    data.join("manifest.json").to_str().unwrap().to_string()
}

#[test]
fn score_eval_leaderboard_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let manifest = synth(dir.path(), 3);
    let reports = dir.path().join("reports.csv");
    let reports = reports.to_str().unwrap();

    let out = odp(&["score", "--manifest", &manifest, "--out", reports, "--strict"], &cache);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(reports).unwrap().lines().count(), 1 + 6 * 10);
    // ODP_CACHE_DIR redirects the cache
    assert!(cache.is_dir());
    assert!(!Path::new(&manifest).parent().unwrap().join(".odp-cache").exists());

    let first = std::fs::read(reports).unwrap();
    let out = odp(&["score", "--manifest", &manifest, "--out", reports], &cache);
    assert!(String::from_utf8_lossy(&out.stderr).contains("0 computed, 60 cached"));
    assert_eq!(std::fs::read(reports).unwrap(), first);

    let table = dir.path().join("table.csv");
    let scatter = dir.path().join("scatter.csv");
    let out = odp(
        &[
            "eval",
            "--manifest",
            &manifest,
            "--reports",
            reports,
            "--out",
            table.to_str().unwrap(),
            "--scatter",
            scatter.to_str().unwrap(),
        ],
        &cache,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(&scatter).unwrap().lines().count(), 61);

    let out = odp(&["leaderboard", "--tables", table.to_str().unwrap(), "--format", "markdown"], &cache);
    assert!(out.status.success());
    let md = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = md.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("| Dataset | ATC | Nu. Norm | DOC | NI |"));
    assert!(lines[2].starts_with("| toy |"));

    let dg = dir.path().join("dg.csv");
    let t = table.to_str().unwrap();
    let out = odp(
        &["aggregate", "--tables", &format!("{t},{t}"), "--dataset-id", "toy-dg", "--out", dg.to_str().unwrap()],
        &cache,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv_out = odp(&["leaderboard", "--tables", dg.to_str().unwrap(), "--format", "csv"], &cache);
    let text = String::from_utf8(csv_out.stdout).unwrap();
    assert!(text.lines().nth(1).unwrap().starts_with("toy-dg,"));
}

#[test]
fn strict_mode_turns_skips_into_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let manifest = synth(dir.path(), 0);
    let reports = dir.path().join("r.csv");
    let args = ["score", "--manifest", &manifest, "--methods", "ni,doc", "--out", reports.to_str().unwrap()];
    let out = odp(&args, &cache);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped NI"));
    let mut strict = args.to_vec();
    strict.push("--strict");
    assert_eq!(odp(&strict, &cache).status.code(), Some(3));
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("cache");
    let bad = dir.path().join("manifest.json");
    std::fs::write(
        &bad,
        r#"{"dataset_id": "x", "num_classes": 3, "models": [{"model_id": "a", "val_logits": "nope.odpt",
            "val_labels": "nope.odpt", "test_logits": "nope.odpt"}]}"#,
    )
    .unwrap();
    let out = odp(&["score", "--manifest", bad.to_str().unwrap(), "--out", "/dev/null"], &cache);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.odpt"));

    let manifest = synth(dir.path(), 0);
    let out = odp(&["score", "--manifest", &manifest, "--methods", "bogus", "--out", "/dev/null"], &cache);
    assert_eq!(out.status.code(), Some(2));
}
