//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so that every criterion reports
//! even when an earlier one fails. Exits non-zero if anything failed.

mod common;

use std::path::Path;
use std::time::{Duration, Instant};

use rand::Rng;

use common::*;
use odp_core::harness::{
    evaluate, ground_truth, load_manifest, render_leaderboard, run_matrix, run_models, write_eval_table,
    write_family, write_reports, EvalTable, Format, LoadedModel, ScoreCache,
};
use odp_core::metrics::{cace, precision_at_top, spearman_rho, top_k};
use odp_core::scoring::agreement::{normal_cdf, probit};
use odp_core::scoring::assignment::{solve_capacitated, solve_dense};
use odp_core::scoring::confidence::doc_from_means;
use odp_core::scoring::matrix_norm::nuclear_norm;
use odp_core::scoring::transport::{quota_counts, transport_costs};
use odp_core::scoring::{
    score_atc, score_cott, score_doc, AgreementFit, ConfidenceFn, Method, Probabilities, ScoreConfig,
};
use odp_core::synth::{generate_family, generate_subpopulation_case, SynthFamily, SynthSpec};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_vector(rng: &mut rand_chacha::ChaCha8Rng, n: usize, ties: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            if ties {
                rng.random_range(0..6) as f64
            } else {
                rng.random::<f64>()
            }
        })
        .collect()
}

fn spearman_reference() -> Outcome {
    let mut rng = rng(1);
    let mut worst: f64 = 0.0;
    let mut worst_closed: f64 = 0.0;
    let mut checked = 0;
    while checked < 1000 {
        let ties = checked % 2 == 1;
        let n = rng.random_range(3..60);
        let x = random_vector(&mut rng, n, ties);
        let y = random_vector(&mut rng, n, ties);
        let reference = reference_spearman(&x, &y);
        if !reference.is_finite() {
            // a constant tie vector has no defined correlation
            continue;
        }
        let got = spearman_rho(&x, &y).map_err(|e| format!("vector {checked}: {e}"))?.value;
        worst = worst.max((got - reference).abs());
        if !ties {
            worst_closed = worst_closed.max((got - spearman_closed_form(&x, &y)).abs());
        }
        checked += 1;
    }
    check(
        worst <= 1e-12 && worst_closed <= 1e-12,
        format!("1000 vectors, max |Δ| vs reference ranks {worst:.2e}, vs closed form {worst_closed:.2e}"),
    )
}

fn cot_brute_force() -> Outcome {
    let mut rng = rng(2);
    let mut worst: f64 = 0.0;
    for instance in 0..200 {
        let m = rng.random_range(1..=7);
        let c = rng.random_range(2..=4);
        let scale = [0.5, 3.0, 10.0][instance % 3];
        let probs = random_probs(&mut rng, m, c, scale);
        let labels: Vec<usize> = (0..rng.random_range(1..20)).map(|_| rng.random_range(0..c)).collect();
        let counts = quota_counts(&labels, c, m);
        let oracle = brute_force_transport(&probs, &counts);

        let capacitated: f64 = transport_costs(&Probabilities::from_rows(probs.clone()), &counts).iter().sum();
        let mut targets = Vec::new();
        for (k, &n) in counts.iter().enumerate() {
            targets.extend(std::iter::repeat_n(k, n));
        }
        let square: Vec<Vec<f64>> = probs.iter().map(|p| targets.iter().map(|&k| l1_half(p, k)).collect()).collect();
        let dense: f64 = solve_dense(&square).iter().enumerate().map(|(i, &j)| square[i][j]).sum();
        let flat: Vec<f64> = probs.iter().flat_map(|p| (0..c).map(|k| l1_half(p, k))).collect();
        let groups: f64 = solve_capacitated(&flat, c, &counts).iter().enumerate().map(|(i, &g)| flat[i * c + g]).sum();

        for got in [capacitated, dense, groups] {
            worst = worst.max((got - oracle).abs());
        }
    }
    check(worst <= 1e-9, format!("200 instances m ≤ 7, max cost difference {worst:.2e}"))
}

fn nuclear_norm_oracle_check() -> Outcome {
    let mut rng = rng(3);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let n = rng.random_range(1..=64);
        let c = rng.random_range(1..=16);
        let rows: Vec<Vec<f64>> = if i % 2 == 0 {
            random_probs(&mut rng, n, c, 4.0)
        } else {
            (0..n).map(|_| (0..c).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect()
        };
        let oracle = nuclear_norm_oracle(&rows);
        let got = nuclear_norm(&Probabilities::from_rows(rows)).map_err(|e| e.to_string())?;
        worst = worst.max((got - oracle).abs() / oracle.max(f64::MIN_POSITIVE));
    }
    check(worst <= 1e-8, format!("100 matrices up to 64×16, max relative error {worst:.2e}"))
}

fn self_consistency() -> Outcome {
    let mut worst_atc: f64 = 0.0;
    let mut worst_cott: f64 = 0.0;
    let mut atc_ok = true;
    let mut cott_ok = true;
    for f in 0..50u64 {
        let mut rng = rng(400 + f);
        let acc = rng.random_range(0.2..0.95);
        let spec = SynthSpec {
            n_models: 1,
            n_val: rng.random_range(200..800),
            n_test: 50,
            num_classes: rng.random_range(2..8),
            accuracy_val: vec![acc],
            accuracy_test: vec![acc],
            margin: rng.random_range(1.0..4.0),
            noise_sigma: rng.random_range(0.3..1.5),
            temperature: 1.0,
            k_augs: 0,
            aug_flip_prob: 0.0,
            seed: 900 + f,
            wrong_margin: None,
            shared_difficulty: false,
        };
        let family = generate_family(&spec).map_err(|e| e.to_string())?;
        let val = &family.records[0].val;
        let acc_va = val.accuracy().unwrap();

        let atc = score_atc("m", val, val, ConfidenceFn::MaxConfidence).map_err(|e| e.to_string())?;
        let d = (atc.value - acc_va).abs();
        worst_atc = worst_atc.max(d * spec.n_val as f64);
        atc_ok &= d <= 1.0 / spec.n_val as f64;

        let max_points = 150 + 10 * f as usize;
        let cott = score_cott("m", val, val, max_points, f).map_err(|e| e.to_string())?;
        let m = max_points.min(spec.n_val) as f64;
        let d = (cott.value - (1.0 - acc_va)).abs();
        worst_cott = worst_cott.max(d * m);
        cott_ok &= d <= 1.0 / m;
    }
    // DoC with equal mean confidence returns the validation accuracy exactly
    let doc_ok = [0.0, 0.125, 0.61, 0.999, 1.0]
        .iter()
        .all(|&a| [0.3, 0.77, 1.0].iter().all(|&c| doc_from_means(a, c, c) == a));
    let family = generate_family(&SynthSpec {
        n_models: 1,
        n_val: 300,
        n_test: 10,
        num_classes: 3,
        accuracy_val: vec![0.7],
        accuracy_test: vec![0.7],
        margin: 2.0,
        noise_sigma: 0.7,
        temperature: 1.0,
        k_augs: 0,
        aug_flip_prob: 0.0,
        seed: 5,
        wrong_margin: None,
        shared_difficulty: false,
    })
    .map_err(|e| e.to_string())?;
    let val = &family.records[0].val;
    let doc = score_doc("m", val, val).map_err(|e| e.to_string())?;
    let doc_ok = doc_ok && doc.value == val.accuracy().unwrap();
    check(
        atc_ok && cott_ok && doc_ok,
        format!(
            "50 families: ATC max |Δ|·n_va = {worst_atc:.3}, COTT max |Δ|·m = {worst_cott:.3}, DoC exact = {doc_ok}"
        ),
    )
}

/// Twenty models whose validation and test accuracies lie on the probit line
/// `Φ⁻¹(acc_te) = 0.8·Φ⁻¹(acc_va) − 0.2`, test accuracies spread over 0.05–0.95.
fn monotone_spec() -> SynthSpec {
    let n_models = 20;
    let test: Vec<f64> = (0..n_models).map(|j| 0.05 + 0.9 * j as f64 / (n_models - 1) as f64).collect();
    let val: Vec<f64> = test.iter().map(|&t| normal_cdf((probit(t) + 0.2) / 0.8)).collect();
    SynthSpec {
        n_models,
        n_val: 2000,
        n_test: 10_000,
        num_classes: 40,
        accuracy_val: val,
        accuracy_test: test,
        margin: 10.0,
        noise_sigma: 0.5,
        temperature: 1.0,
        k_augs: 4,
        aug_flip_prob: 0.5,
        seed: 2024,
        wrong_margin: Some(0.0),
        shared_difficulty: true,
    }
}

fn monotone_family(family: &SynthFamily) -> Outcome {
    let models: Vec<LoadedModel> = family.records.iter().cloned().map(LoadedModel::from_record).collect();
    let config = ScoreConfig::default();
    let out = run_models("monotone", &models, &Method::ALL, &config, None).map_err(|e| e.to_string())?;
    if !out.skips.is_empty() {
        return Err(format!("unexpected skips: {:?}", out.skips));
    }
    let truth = ground_truth(&family.records).map_err(|e| e.to_string())?;
    let table = evaluate("monotone", &out.reports, &truth).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [Method::Atc, Method::Doc, Method::Cott, Method::Agreement] {
        let mae = table.get(m).and_then(|r| r.mae).unwrap_or(f64::INFINITY);
        ok &= mae <= 0.05;
        parts.push(format!("{} MAE {mae:.4}", m.name()));
    }
    for m in [Method::NuclearNorm, Method::Ni, Method::Dispersion, Method::MaNo] {
        let rho = table.get(m).and_then(|r| r.rho).unwrap_or(f64::NEG_INFINITY);
        ok &= rho >= 0.95;
        parts.push(format!("{} ρ {rho:+.4}", m.name()));
    }
    let rho = table.get(Method::Mde).and_then(|r| r.rho).unwrap_or(f64::INFINITY);
    ok &= rho <= -0.95;
    parts.push(format!("MDE ρ {rho:+.4}"));
    check(ok, parts.join(", "))
}

fn agreement_line_recovery() -> Outcome {
    let (a, b) = (0.8, -0.2);
    let line = |v: f64| normal_cdf(a * probit(v) + b);
    let mut worst_param: f64 = 0.0;
    let mut worst_mae: f64 = 0.0;
    for family in 0..10 {
        let mut rng = rng(700 + family);
        // rates of a pool whose agreement pairs lie exactly on the line
        let pairs: Vec<(f64, f64)> = (0..45)
            .map(|_| {
                let v = rng.random_range(0.05..0.98);
                (v, line(v))
            })
            .collect();
        let fit = AgreementFit::from_rate_pairs(&pairs, 1e-4).map_err(|e| e.to_string())?;
        worst_param = worst_param.max((fit.slope - a).abs()).max((fit.intercept - b).abs());
        let accs: Vec<f64> = (0..10).map(|_| rng.random_range(0.05..0.98)).collect();
        let mae = accs.iter().map(|&v| (fit.predict(v) - line(v)).abs()).sum::<f64>() / accs.len() as f64;
        worst_mae = worst_mae.max(mae);
    }
    check(
        worst_param <= 1e-6 && worst_mae <= 1e-6,
        format!("10 families: max parameter error {worst_param:.2e}, max prediction MAE {worst_mae:.2e}"),
    )
}

fn subpopulation_failure() -> Outcome {
    let case = generate_subpopulation_case(31).map_err(|e| e.to_string())?;
    let doc_errors = |f: &SynthFamily| -> Result<Vec<f64>, String> {
        f.records
            .iter()
            .zip(&f.test_accuracies)
            .map(|(r, &acc)| {
                score_doc(&r.model_id, &r.val, &r.test)
                    .map(|rep| rep.value - acc)
                    .map_err(|e| e.to_string())
            })
            .collect()
    };
    let minority = doc_errors(&case.minority_test)?;
    let majority = doc_errors(&case.majority_test)?;
    let min_over = minority.iter().cloned().fold(f64::INFINITY, f64::min);
    let max_major = majority.iter().map(|e| e.abs()).fold(0.0, f64::max);
    check(
        min_over > 0.3 && max_major <= 0.05,
        format!("minority over-prediction ≥ {min_over:.3} on every model, majority |error| ≤ {max_major:.3}"),
    )
}

fn metrics_edges() -> Outcome {
    // n = 30 selects the top 10; 8 of the predicted top 10 are truly top 10
    let accs: Vec<f64> = (0..30).map(|i| i as f64).collect();
    let mut scores = accs.clone();
    scores.swap(20, 18);
    scores.swap(21, 19);
    let p = precision_at_top(&scores, &accs, 0.1).map_err(|e| e.to_string())?.value;
    let k_ok = top_k(30, 0.1) == 10 && top_k(200, 0.1) == 20;
    let effective = odp_core::harness::effective_count(&[0.95, 0.6, 0.71]) == 2
        && odp_core::harness::effective_count(&[0.7, -0.9, 0.7001]) == 1;

    let labels = [0usize, 2, 1, 1, 0, 2];
    let one_hot: Vec<f64> = labels.iter().flat_map(|&l| (0..3).map(move |c| if c == l { 1.0 } else { 0.0 })).collect();
    let zero = cace(&one_hot, 3, &labels, 15).map_err(|e| e.to_string())?.value;
    let hand: Vec<f64> = (0..10).flat_map(|_| [0.3, 0.7]).collect();
    let hand_labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
    let hand = cace(&hand, 2, &hand_labels, 15).map_err(|e| e.to_string())?.value;

    let ok = p == 0.8 && k_ok && effective && zero == 0.0 && (hand - 0.4).abs() < 1e-12;
    check(
        ok,
        format!(
            "P@top n=30: {p}, top_k rule {k_ok}, #Effective rule {effective}, CACE oracle {zero}, CACE hand {hand:.12}"
        ),
    )
}

/// synth → ODPT files → manifest → scores → evaluation → leaderboard, all
/// written to `dir`. Returns the bytes of every artifact and the run counters.
fn full_pipeline(
    family: &SynthFamily,
    dir: &Path,
    cache_dir: &Path,
) -> Result<(Vec<Vec<u8>>, usize, usize), String> {
    let manifest_path = write_family(family, "synth-suite", Some("synthetic"), dir).map_err(|e| e.to_string())?;
    let manifest = load_manifest(&manifest_path).map_err(|e| e.to_string())?;
    let cache = ScoreCache::new(cache_dir);
    let out = run_matrix(&manifest, &Method::ALL, &ScoreConfig::default(), Some(&cache)).map_err(|e| e.to_string())?;
    let records: Vec<_> = manifest.load_all().map_err(|e| e.to_string())?.into_iter().map(|m| m.record).collect();
    let truth = ground_truth(&records).map_err(|e| e.to_string())?;
    let table = evaluate(&manifest.dataset_id, &out.reports, &truth).map_err(|e| e.to_string())?;
    write_reports(&out.reports, dir.join("reports.csv")).map_err(|e| e.to_string())?;
    write_eval_table(std::slice::from_ref(&table), dir.join("table.csv")).map_err(|e| e.to_string())?;
    let board = render_leaderboard(std::slice::from_ref::<EvalTable>(&table), Format::Markdown);
    let mut artifacts = Vec::new();
    for name in ["manifest.json", "reports.csv", "table.csv"] {
        artifacts.push(std::fs::read(dir.join(name)).map_err(|e| e.to_string())?);
    }
    artifacts.push(board.into_bytes());
    let bits: Vec<u8> = out.reports.iter().flat_map(|r| r.value.to_bits().to_le_bytes()).collect();
    artifacts.push(bits);
    Ok((artifacts, out.computed, out.cache_hits))
}

fn determinism_and_cache() -> Outcome {
    let spec = SynthSpec {
        n_models: 10,
        n_val: 600,
        n_test: 1500,
        ..monotone_spec()
    };
    let spec = SynthSpec {
        accuracy_val: monotone_spec().accuracy_val.into_iter().step_by(2).collect(),
        accuracy_test: monotone_spec().accuracy_test.into_iter().step_by(2).collect(),
        ..spec
    };
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let a = generate_family(&spec).map_err(|e| e.to_string())?;
    let b = generate_family(&spec).map_err(|e| e.to_string())?;
    let (first, computed_a, hits_a) = full_pipeline(&a, &root.path().join("a"), &root.path().join("cache-a"))?;
    let (second, computed_b, _) = full_pipeline(&b, &root.path().join("b"), &root.path().join("cache-b"))?;
    let (warm, computed_warm, hits_warm) = full_pipeline(&a, &root.path().join("a"), &root.path().join("cache-a"))?;
    let expected = 10 * Method::ALL.len();
    let ok = first == second
        && first == warm
        && computed_a == expected
        && computed_b == expected
        && hits_a == 0
        && computed_warm == 0
        && hits_warm == expected;
    check(
        ok,
        format!(
            "cold runs identical: {}, warm run identical: {}, warm run computed {computed_warm} of {expected} (cache hits {hits_warm})",
            first == second,
            first == warm
        ),
    )
}

fn main() {
    let start = Instant::now();
    let mut failures = 0;
    let mut report = |name: &str, outcome: Outcome| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failures += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {name}: {detail}");
    };

    report("spearman-matches-reference-ranks", spearman_reference());
    report("cot-matches-brute-force", cot_brute_force());
    report("nuclear-norm-matches-eigen-oracle", nuclear_norm_oracle_check());
    report("atc-doc-cott-self-consistency", self_consistency());
    let family = generate_family(&monotone_spec());
    report(
        "monotone-family-mae-and-rho",
        family.map_err(|e| e.to_string()).and_then(|f| monotone_family(&f)),
    );
    report("agreement-line-recovery", agreement_line_recovery());
    report("subpopulation-doc-overconfidence", subpopulation_failure());
    report("metrics-edge-suite", metrics_edges());
    report("determinism-and-warm-cache", determinism_and_cache());

    let elapsed = start.elapsed();
    report(
        "runtime-under-five-minutes",
        check(
            elapsed < Duration::from_secs(300),
            format!("suite took {:.1}s on {} core(s)", elapsed.as_secs_f64(), std::thread::available_parallelism().map_or(1, |n| n.get())),
        ),
    );
    if failures > 0 {
        println!("{failures} criterion(s) failed");
        std::process::exit(1);
    }
}
