//! Independent reference implementations used by the integration tests.
//!
//! Each oracle is written from the definition, favouring obviousness over
//! speed, and shares no code with the library.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Rank of each value: one plus the number of strictly smaller values plus
/// half the number of other equal values. O(n²).
pub fn reference_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(i, &v)| {
            let below = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().enumerate().filter(|&(j, &w)| j != i && w == v).count() as f64;
            1.0 + below + equal / 2.0
        })
        .collect()
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn reference_spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&reference_ranks(x), &reference_ranks(y))
}

/// `1 − 6 Σ d² / (n (n² − 1))`, valid without ties.
pub fn spearman_closed_form(x: &[f64], y: &[f64]) -> f64 {
    let rx = reference_ranks(x);
    let ry = reference_ranks(y);
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}

/// `½ ‖p − e_k‖₁` evaluated term by term.
pub fn l1_half(p: &[f64], k: usize) -> f64 {
    let mut s = 0.0;
    for (c, &v) in p.iter().enumerate() {
        let target = if c == k { 1.0 } else { 0.0 };
        s += (v - target).abs();
    }
    s / 2.0
}

fn permute(items: &mut Vec<usize>, at: usize, visit: &mut dyn FnMut(&[usize])) {
    if at == items.len() {
        visit(items);
        return;
    }
    for i in at..items.len() {
        items.swap(at, i);
        permute(items, at + 1, visit);
        items.swap(at, i);
    }
}

/// Minimum over all m! matchings of points to the target multiset.
pub fn brute_force_transport(probs: &[Vec<f64>], counts: &[usize]) -> f64 {
    let mut targets: Vec<usize> = Vec::new();
    for (k, &c) in counts.iter().enumerate() {
        targets.extend(std::iter::repeat_n(k, c));
    }
    assert_eq!(targets.len(), probs.len());
    let mut best = f64::INFINITY;
    permute(&mut targets, 0, &mut |perm| {
        let total: f64 = perm.iter().enumerate().map(|(i, &k)| l1_half(&probs[i], k)).sum();
        if total < best {
            best = total;
        }
    });
    best
}

/// Minimum-cost perfect matching of a square matrix by enumeration.
pub fn brute_force_assignment(costs: &[Vec<f64>]) -> f64 {
    let mut cols: Vec<usize> = (0..costs.len()).collect();
    let mut best = f64::INFINITY;
    permute(&mut cols, 0, &mut |perm| {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| costs[i][j]).sum();
        if total < best {
            best = total;
        }
    });
    best
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Σ sqrt(eigenvalues of PᵀP).
///
/// When P has fewer rows than columns the eigenvalues of the smaller PPᵀ are
/// used instead: the nonzero spectrum is the same, and the structurally zero
/// eigenvalues of PᵀP would otherwise come back as rounding noise whose square
/// roots are around 1e-8.
pub fn nuclear_norm_oracle(rows: &[Vec<f64>]) -> f64 {
    let (n, c) = (rows.len(), rows[0].len());
    let gram: Vec<Vec<f64>> = if n >= c {
        (0..c)
            .map(|i| (0..c).map(|j| rows.iter().map(|r| r[i] * r[j]).sum()).collect())
            .collect()
    } else {
        (0..n)
            .map(|i| (0..n).map(|j| (0..c).map(|k| rows[i][k] * rows[j][k]).sum()).collect())
            .collect()
    };
    jacobi_eigenvalues(gram).into_iter().map(|l| l.max(0.0).sqrt()).sum()
}

pub fn softmax_f64(logits: &[f32]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f32::NEG_INFINITY, f32::max) as f64;
    let e: Vec<f64> = logits.iter().map(|&l| (l as f64 - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|v| v / s).collect()
}

pub fn random_probs(rng: &mut ChaCha8Rng, n: usize, c: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            let logits: Vec<f32> = (0..c).map(|_| (rng.random::<f64>() * scale) as f32).collect();
            softmax_f64(&logits)
        })
        .collect()
}

/// Class-aggregated calibration error, looping class by bin by sample.
pub fn cace_oracle(probs: &[Vec<f64>], labels: &[usize], bins: usize) -> f64 {
    let n = probs.len() as f64;
    let c = probs[0].len();
    let mut total = 0.0;
    for class in 0..c {
        for b in 0..bins {
            let lo = b as f64 / bins as f64;
            let hi = (b + 1) as f64 / bins as f64;
            let mut count = 0.0;
            let mut p_sum = 0.0;
            let mut hits = 0.0;
            for (i, p) in probs.iter().enumerate() {
                let v = p[class];
                let inside = if b + 1 == bins { v >= lo && v <= hi } else { v >= lo && v < hi };
                if inside {
                    count += 1.0;
                    p_sum += v;
                    if labels[i] == class {
                        hits += 1.0;
                    }
                }
            }
            if count > 0.0 {
                total += count / n * (p_sum / count - hits / count).abs();
            }
        }
    }
    total
}

/// Simpson's rule for the standard normal CDF.
pub fn normal_cdf_quadrature(x: f64) -> f64 {
    let lo = -12.0;
    if x <= lo {
        return 0.0;
    }
    let steps = 20_000;
    let h = (x - lo) / steps as f64;
    let f = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(lo) + f(x);
    for i in 1..steps {
        let t = lo + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(t);
    }
    s * h / 3.0
}
