//! Exact minimum-cost assignment solvers.
//!
//! [`solve_dense`] is the classic O(n³) shortest-augmenting-path Hungarian
//! method on a square cost matrix. [`solve_capacitated`] solves the same
//! problem when the columns come in groups of identical copies (one group per
//! class), which is the shape of the transport problems in COT: every target
//! is a one-hot vector, so the `m × m` matrix has only `C` distinct columns.
//! It runs successive shortest paths over the `C` groups with Johnson
//! potentials, so each augmentation costs O(m·C) instead of O(m²).

/// Optimal assignment `row -> column` for a square cost matrix.
pub fn solve_dense(costs: &[Vec<f64>]) -> Vec<usize> {
    let n = costs.len();
    if n == 0 {
        return Vec::new();
    }
    debug_assert!(costs.iter().all(|row| row.len() == n));

    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = costs[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    assignment
}

const NONE: usize = usize::MAX;

/// Optimal assignment of `m` rows to `groups` column groups with the given capacities.
///
/// `costs` is row-major `[m × groups]`; `capacity[g]` copies of group `g` are
/// available and the capacities must sum to at least `m`. Returns the group of
/// every row.
pub fn solve_capacitated(costs: &[f64], groups: usize, capacity: &[usize]) -> Vec<usize> {
    assert_eq!(capacity.len(), groups);
    let m = if groups == 0 { 0 } else { costs.len() / groups };
    assert_eq!(costs.len(), m * groups);
    assert!(
        capacity.iter().sum::<usize>() >= m,
        "capacities must cover every row"
    );
    let c = |r: usize, g: usize| costs[r * groups + g];

    let mut group_of = vec![NONE; m];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); groups];
    let mut free = capacity.to_vec();
    let mut potential = vec![0.0f64; groups];

    let mut dist = vec![0.0f64; groups];
    let mut done = vec![false; groups];
    let mut prev_group = vec![NONE; groups];
    let mut prev_row = vec![NONE; groups];

    for row in 0..m {
        for g in 0..groups {
            dist[g] = c(row, g) - potential[g];
            done[g] = false;
            prev_group[g] = NONE;
            prev_row[g] = NONE;
        }
        let target = loop {
            let mut best = NONE;
            for g in 0..groups {
                if !done[g] && (best == NONE || dist[g] < dist[best]) {
                    best = g;
                }
            }
            let g = best;
            done[g] = true;
            if free[g] > 0 {
                break g;
            }
            // Moving row r out of g and into h changes the cost by c(r,h) - c(r,g).
            for &r in &members[g] {
                let base = dist[g] - c(r, g) + potential[g];
                for h in 0..groups {
                    if done[h] {
                        continue;
                    }
                    let nd = base + c(r, h) - potential[h];
                    if nd < dist[h] {
                        dist[h] = nd;
                        prev_group[h] = g;
                        prev_row[h] = r;
                    }
                }
            }
        };

        let reach = dist[target];
        for g in 0..groups {
            potential[g] += if done[g] { dist[g] } else { reach };
        }

        free[target] -= 1;
        let mut g = target;
        while prev_group[g] != NONE {
            let r = prev_row[g];
            let from = prev_group[g];
            let pos = members[from]
                .iter()
                .position(|&x| x == r)
                .expect("row is a member of its group");
            members[from].swap_remove(pos);
            members[g].push(r);
            group_of[r] = g;
            g = from;
        }
        members[g].push(row);
        group_of[row] = g;
    }
    group_of
}
