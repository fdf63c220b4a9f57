//! Independent brute-force oracles shared by the integration tests and the
//! acceptance run. None of these call into the code paths they check.

#![allow(dead_code)]

use urp::inference::conditional::{c_quad, conditional_moments, linear_statistic};
use urp::transform::{GofMatrix, SplitMode};
use urp::{RngStream, SplitColumn, Tree, TreeNode};

/// Every permutation of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut a: Vec<usize> = (0..n).collect();
    let mut c = vec![0; n];
    let mut out = vec![a.clone()];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            out.push(a.clone());
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// `vec(Σ g_i h_iᵀ)`, column-major, with rows of h permuted.
fn cross_product(g: &[Vec<f64>], h: &[Vec<f64>], perm: &[usize]) -> Vec<f64> {
    let (p, q) = (g[0].len(), h[0].len());
    let mut t = vec![0.0; p * q];
    for (i, &pi) in perm.iter().enumerate() {
        for qq in 0..q {
            for pp in 0..p {
                t[qq * p + pp] += g[i][pp] * h[pi][qq];
            }
        }
    }
    t
}

pub struct PermutationCheck {
    pub mu_err: f64,
    pub sigma_err: f64,
    pub p_asymptotic: f64,
    pub p_exact: f64,
}

/// Compares the closed-form permutation moments and the asymptotic c_quad
/// p-value with full enumeration of all n! reorderings of the h rows.
pub fn permutation_check(g_col: &SplitColumn, mode: SplitMode, h: &[Vec<f64>]) -> PermutationCheck {
    let gt = urp::transform::make_split_transform(g_col, mode, 1).unwrap();
    let gof = GofMatrix::from_rows(h, false).unwrap();
    let n = h.len();
    let g: Vec<Vec<f64>> = (0..n).map(|i| gt.row(i).to_vec()).collect();
    let m = conditional_moments(&gof, &gt).unwrap();
    let t_obs = linear_statistic(&gof, &gt).unwrap();
    assert_eq!(t_obs, cross_product(&g, h, &(0..n).collect::<Vec<_>>()));

    let perms = permutations(n);
    let d = t_obs.len();
    let ts: Vec<Vec<f64>> = perms.iter().map(|p| cross_product(&g, h, p)).collect();
    let count = ts.len() as f64;
    let mean: Vec<f64> = (0..d).map(|a| ts.iter().map(|t| t[a]).sum::<f64>() / count).collect();
    let mut cov = vec![0.0; d * d];
    for t in &ts {
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] += (t[a] - mean[a]) * (t[b] - mean[b]) / count;
            }
        }
    }
    let max_abs = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let observed = c_quad(&t_obs, &m).unwrap();
    let stat = observed.statistic;
    let exceed = ts
        .iter()
        .filter(|t| c_quad(t, &m).unwrap().statistic >= stat - 1e-9 * (1.0 + stat))
        .count();
    PermutationCheck {
        mu_err: max_abs(&mean, &m.mu),
        sigma_err: max_abs(&cov, &m.sigma),
        p_asymptotic: observed.p_value,
        p_exact: exceed as f64 / count,
    }
}

fn instance(seed: u64, shape: usize, q: usize) -> (SplitColumn, SplitMode, Vec<Vec<f64>>) {
    let n = 7;
    let mut r = RngStream::new(0x0AC1E, seed);
    let z: Vec<f64> = (0..n).map(|_| r.standard_normal()).collect();
    let h: Vec<Vec<f64>> = (0..n).map(|_| (0..q).map(|_| r.standard_normal()).collect()).collect();
    match shape {
        0 => (SplitColumn::numeric("z", z), SplitMode::Lin, h),
        1 => {
            let codes: Vec<u32> = (0..n).map(|i| u32::from(z[i] > 0.0)).collect();
            let codes = if codes.iter().all(|&c| c == codes[0]) { (0..n).map(|i| (i % 2) as u32).collect() } else { codes };
            (SplitColumn::categorical("g", codes, vec!["a".into(), "b".into()]), SplitMode::Cat, h)
        }
        2 => {
            let codes: Vec<u32> = (0..n).map(|i| (i % 3) as u32).collect();
            (SplitColumn::categorical("g", codes, vec!["a".into(), "b".into(), "c".into()]), SplitMode::Cat, h)
        }
        _ => (SplitColumn::numeric("z", z), SplitMode::Cat, h),
    }
}

/// Twenty seeded n = 7 instances whose statistic has at most two
/// dimensions: a linear z against one or two gof columns, or a two-level
/// factor against one.
pub fn permutation_instances() -> Vec<(SplitColumn, SplitMode, Vec<Vec<f64>>)> {
    (0..20u64)
        .map(|k| match k % 3 {
            0 => instance(k, 0, 1),
            1 => instance(k, 0, 2),
            _ => instance(k, 1, 1),
        })
        .collect()
}

/// n = 7 instances with three- and four-column designs against one or two
/// gof columns (3 to 8 dimensions).
pub fn wide_permutation_instances() -> Vec<(SplitColumn, SplitMode, Vec<Vec<f64>>)> {
    (100..112u64).map(|k| instance(k, 2 + (k as usize % 2), 1 + (k as usize / 2) % 2)).collect()
}

/// supLM by direct evaluation of `n·cᵢᵀ V̂⁻¹ cᵢ / (i(n−i))` at every
/// admissible `i`, where `cᵢ` sums the first `i` centered rows in z-order.
/// Requires distinct z and nonsingular `V̂` (K ≤ 2).
pub fn suplm_termwise(h: &[Vec<f64>], z: &[f64], min_segment: usize) -> (f64, usize) {
    let n = h.len();
    let k = h[0].len();
    let nf = n as f64;
    let mean: Vec<f64> = (0..k).map(|j| h.iter().map(|r| r[j]).sum::<f64>() / nf).collect();
    let c: Vec<Vec<f64>> = h.iter().map(|r| r.iter().zip(&mean).map(|(a, m)| a - m).collect()).collect();
    let v = |a: usize, b: usize| c.iter().map(|r| r[a] * r[b]).sum::<f64>() / nf;
    let inv: Vec<Vec<f64>> = if k == 1 {
        vec![vec![1.0 / v(0, 0)]]
    } else {
        let (a, b, d) = (v(0, 0), v(0, 1), v(1, 1));
        let det = a * d - b * b;
        vec![vec![d / det, -b / det], vec![-b / det, a / det]]
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| z[i].partial_cmp(&z[j]).unwrap());
    let mut best = (f64::NEG_INFINITY, 0);
    for i in min_segment.max(1)..=(n - min_segment).min(n - 1) {
        let s: Vec<f64> = (0..k).map(|j| order[..i].iter().map(|&o| c[o][j]).sum()).collect();
        let mut quad = 0.0;
        for a in 0..k {
            for b in 0..k {
                quad += s[a] * inv[a][b] * s[b];
            }
        }
        let value = nf * quad / (i as f64 * (nf - i as f64));
        if value > best.0 {
            best = (value, i);
        }
    }
    best
}

/// Pearson X² of a table given as rows of counts.
pub fn pearson(table: &[Vec<f64>]) -> f64 {
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<f64> = (0..table[0].len()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let total: f64 = rows.iter().sum();
    let mut x2 = 0.0;
    for (i, r) in table.iter().enumerate() {
        for (j, &o) in r.iter().enumerate() {
            let e = rows[i] * cols[j] / total;
            x2 += (o - e) * (o - e) / e;
        }
    }
    x2
}

/// OLS residual sum of squares by explicit normal equations.
pub fn ols_rss(y: &[f64], x: &[f64]) -> Option<f64> {
    let n = y.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let det = n * sxx - sx * sx;
    if det.abs() <= 1e-12 * n * sxx.max(1.0) {
        return None;
    }
    let b1 = (n * sxy - sx * sy) / det;
    let b0 = (sy - b1 * sx) / n;
    Some(y.iter().zip(x).map(|(yi, xi)| (yi - b0 - b1 * xi).powi(2)).sum())
}

/// Tries every cut position between distinct sorted z values; `(point, rss)`
/// with ties to the smallest point.
pub fn best_split_exhaustive(y: &[f64], x: &[f64], z: &[f64], min_node: usize) -> Option<(f64, f64)> {
    let mut values: Vec<f64> = z.to_vec();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values.dedup();
    let mut best: Option<(f64, f64)> = None;
    for w in values.windows(2) {
        let point = 0.5 * (w[0] + w[1]);
        let (mut yl, mut xl, mut yr, mut xr) = (vec![], vec![], vec![], vec![]);
        for i in 0..z.len() {
            if z[i] <= point {
                yl.push(y[i]);
                xl.push(x[i]);
            } else {
                yr.push(y[i]);
                xr.push(x[i]);
            }
        }
        if yl.len() < min_node || yr.len() < min_node {
            continue;
        }
        let (Some(a), Some(b)) = (ols_rss(&yl, &xl), ols_rss(&yr, &xr)) else {
            continue;
        };
        if best.is_none_or(|(_, r)| a + b < r) {
            best = Some((point, a + b));
        }
    }
    best
}

/// `(training RSS, leaves, ids of internal nodes kept)` of every pruned
/// subtree rooted at `node`.
pub fn pruned_subtrees(node: &TreeNode) -> Vec<(f64, usize, Vec<usize>)> {
    let mut out = vec![(node.fit.rss, 1, vec![])];
    if let [l, r] = node.children.as_slice() {
        for (rl, nl, il) in pruned_subtrees(l) {
            for (rr, nr, ir) in pruned_subtrees(r) {
                let mut ids = vec![node.id];
                ids.extend(&il);
                ids.extend(&ir);
                ids.sort_unstable();
                out.push((rl + rr, nl + nr, ids));
            }
        }
    }
    out
}

pub fn internal_ids(tree: &Tree) -> Vec<usize> {
    let mut ids = Vec::new();
    tree.root.visit(&mut |n| {
        if !n.is_leaf() {
            ids.push(n.id)
        }
    });
    ids.sort_unstable();
    ids
}

/// ARI through the pair-counting definition: every unordered pair is
/// classified by whether each labeling puts it together.
pub fn ari_pairs(a: &[usize], b: &[usize]) -> f64 {
    let (mut ss, mut sd, mut ds, mut dd) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => ss += 1.0,
                (true, false) => sd += 1.0,
                (false, true) => ds += 1.0,
                (false, false) => dd += 1.0,
            }
        }
    }
    let denom = (ss + sd) * (sd + dd) + (ss + ds) * (ds + dd);
    if denom == 0.0 {
        return 1.0;
    }
    2.0 * (ss * dd - sd * ds) / denom
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    assert!((a - b).abs() <= tol * (1.0 + b.abs()), "{what}: {a} vs {b}");
}
