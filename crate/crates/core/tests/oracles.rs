mod common;

use common::*;
use urp::inference::contingency::{chisq_statistic, two_row_statistic};
use urp::inference::fluctuation::suplm_statistic;
use urp::prune::{cost_complexity_path, subtree_at};
use urp::sim::{adjusted_rand_index, generate, ScenarioConfig};
use urp::transform::{make_split_transform, GofMatrix, SplitMode};
use urp::tree::best_split_point;
use urp::{fit_ols, grow, GrowControl, RngStream, SplitColumn, StrategyConfig};

#[test]
fn permutation_moments_match_enumeration() {
    let all = permutation_instances().into_iter().chain(wide_permutation_instances());
    for (k, (col, mode, h)) in all.enumerate() {
        let c = permutation_check(&col, mode, &h);
        assert!(c.mu_err < 1e-9, "instance {k}: mu off by {}", c.mu_err);
        assert!(c.sigma_err < 1e-9, "instance {k}: sigma off by {}", c.sigma_err);
        // The chi-square limit is only roughly right on seven points; the
        // ±0.08 agreement is scored by the acceptance run.
        assert!(
            (c.p_asymptotic - c.p_exact).abs() <= 0.25,
            "instance {k}: asymptotic {} vs exact {}",
            c.p_asymptotic,
            c.p_exact
        );
    }
}

#[test]
fn four_point_one_hot_moments() {
    let col = SplitColumn::categorical("g", vec![0, 0, 1, 1], vec!["a".into(), "b".into()]);
    let h = vec![vec![1.0], vec![-1.0], vec![1.0], vec![-1.0]];
    let c = permutation_check(&col, SplitMode::Cat, &h);
    assert!(c.mu_err < 1e-12 && c.sigma_err < 1e-12);
}

#[test]
fn suplm_matches_termwise_formula() {
    let h6: Vec<Vec<f64>> = [1.0, 1.0, 1.0, -1.0, -1.0, -1.0].iter().map(|&v| vec![v]).collect();
    let z6: Vec<f64> = (0..6).map(|i| i as f64).collect();
    let s = suplm_statistic(&GofMatrix::from_rows(&h6, false).unwrap(), &SplitColumn::numeric("z", z6.clone()), 1).unwrap();
    let (want, at) = suplm_termwise(&h6, &z6, 1);
    assert_eq!(at, 3);
    assert_eq!(s.argmax, 3);
    // σ̂² = 1, S₃ = 3: 6·9/(3·3) = 6
    assert_close(want, 6.0, 1e-15, "termwise");
    assert_close(s.statistic, want, 1e-13, "n=6 peak");

    for seed in 0..25u64 {
        let mut r = RngStream::new(0x5_0F_1E, seed);
        let n = 30 + (seed as usize * 7) % 60;
        let k = 1 + (seed as usize % 2);
        let h: Vec<Vec<f64>> = (0..n).map(|_| (0..k).map(|_| r.standard_normal()).collect()).collect();
        let z: Vec<f64> = (0..n).map(|_| r.uniform(-1.0, 1.0)).collect();
        let min_seg = 1 + seed as usize % 10;
        let got = suplm_statistic(&GofMatrix::from_rows(&h, false).unwrap(), &SplitColumn::numeric("z", z.clone()), min_seg).unwrap();
        let (want, at) = suplm_termwise(&h, &z, min_seg);
        assert_close(got.statistic, want, 1e-10, &format!("seed {seed}"));
        assert_eq!(got.argmax, at, "seed {seed}");
        assert_eq!(got.k, k);
    }
}

#[test]
fn chi_square_matches_hand_arithmetic() {
    // [[10, 30], [20, 40]] per bin: X² = 4·(1/12 + 1/18 + 1/28 + 1/42) = 200/252
    let (x2, df) = two_row_statistic(&[[10.0, 30.0], [20.0, 40.0]]);
    assert_close(x2, 200.0 / 252.0, 1e-10, "2x2");
    assert_eq!(df, 1);
    assert_close(x2, pearson(&[vec![10.0, 20.0], vec![30.0, 40.0]]), 1e-10, "pearson");

    for seed in 0..20u64 {
        let mut r = RngStream::new(0xC41, seed);
        let n = 40 + seed as usize * 3;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![r.standard_normal(), r.standard_normal()]).collect();
        let gof = GofMatrix::from_rows(&rows, false).unwrap().dichotomize();
        let levels = 2 + seed as usize % 4;
        let codes: Vec<u32> = (0..n).map(|_| (r.uniform(0.0, levels as f64) as u32).min(levels as u32 - 1)).collect();
        let col = SplitColumn::categorical("g", codes.clone(), (0..levels).map(|l| l.to_string()).collect());
        let g = make_split_transform(&col, SplitMode::Cat, 1).unwrap();
        let got = chisq_statistic(&gof, &g).unwrap();

        let mut want = 0.0;
        for j in 0..2 {
            let mut table = vec![vec![0.0; levels]; 2];
            for i in 0..n {
                table[usize::from(rows[i][j] >= 0.0)][codes[i] as usize] += 1.0;
            }
            // drop empty bins, as any 2 × P table must
            let keep: Vec<usize> = (0..levels).filter(|&l| table[0][l] + table[1][l] > 0.0).collect();
            let t: Vec<Vec<f64>> = table.iter().map(|row| keep.iter().map(|&l| row[l]).collect()).collect();
            if t.iter().all(|row| row.iter().sum::<f64>() > 0.0) && keep.len() > 1 {
                want += pearson(&t);
            }
        }
        assert_close(got.statistic, want, 1e-10, &format!("seed {seed}"));
    }
}

#[test]
fn best_split_matches_exhaustive_refit() {
    for seed in 0..30u64 {
        let mut r = RngStream::new(0xB57, seed);
        let n = 20;
        let z: Vec<f64> = (0..n).map(|_| (r.uniform(0.0, 8.0)).floor()).collect();
        let x: Vec<f64> = (0..n).map(|_| r.uniform(-1.0, 1.0)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| if z[i] > 3.0 { 1.0 } else { -1.0 } * x[i] + 0.3 * r.standard_normal())
            .collect();
        for min_node in [3, 5] {
            let got = best_split_point(&y, &x, &z, min_node);
            let want = best_split_exhaustive(&y, &x, &z, min_node);
            match (got, want) {
                (None, None) => {}
                (Some((p, rss)), Some((q, rss_want))) => {
                    assert_eq!(p, q, "seed {seed}");
                    assert_close(rss, rss_want, 1e-9, "rss");
                }
                other => panic!("seed {seed}: {other:?}"),
            }
        }
    }
}

#[test]
fn cost_complexity_path_matches_subtree_enumeration() {
    let control = GrowControl {
        max_depth: 2,
        ..GrowControl::default().unpruned()
    };
    let mut checked = 0;
    for seed in 0..12u64 {
        let cell = ScenarioConfig::tree(0.0, 0.6);
        let data = generate(&cell, &RngStream::new(seed, 0));
        let tree = grow(&data, &StrategyConfig::ctree(), &control).unwrap();
        let splits = tree.n_leaves() - 1;
        assert!(splits <= 3);
        if splits < 2 {
            continue;
        }
        checked += 1;
        let subtrees = pruned_subtrees(&tree.root);
        let path = cost_complexity_path(&tree);
        let optimum = |alpha: f64| {
            subtrees
                .iter()
                .min_by(|a, b| {
                    (a.0 + alpha * a.1 as f64)
                        .partial_cmp(&(b.0 + alpha * b.1 as f64))
                        .unwrap()
                        .then(a.1.cmp(&b.1))
                })
                .unwrap()
                .clone()
        };
        for w in path.windows(2) {
            let mid = 0.5 * (w[0].alpha + w[1].alpha);
            if w[1].alpha - w[0].alpha < 1e-9 {
                continue;
            }
            let (rss, leaves, ids) = optimum(mid);
            assert_eq!(internal_ids(subtree_at(&path, mid)), ids, "seed {seed} alpha {mid}");
            assert_eq!(w[0].leaves(), leaves);
            assert_close(w[0].tree.root.subtree_rss(), rss, 1e-12, "rss");
        }
        // Knots are where the optimum changes: just past each knot the
        // enumerated optimum is the knot's subtree.
        for step in &path[1..] {
            let (_, leaves, ids) = optimum(step.alpha * (1.0 + 1e-9) + 1e-12);
            assert_eq!(internal_ids(&step.tree), ids, "seed {seed} knot {}", step.alpha);
            assert_eq!(step.leaves(), leaves);
        }
        let last = path.last().unwrap();
        assert!(last.tree.root.is_leaf());
        assert!(optimum(last.alpha * 2.0 + 1.0).2.is_empty());
    }
    assert!(checked >= 4, "only {checked} multi-split trees");
}

#[test]
fn ari_matches_pair_counting() {
    let a = [0, 0, 1, 1];
    let b = [0, 1, 1, 1];
    assert_close(adjusted_rand_index(&a, &b).unwrap(), ari_pairs(&a, &b), 1e-12, "4 items");
    for seed in 0..50u64 {
        let mut r = RngStream::new(0xA51, seed);
        let n = 2 + seed as usize * 3;
        let ka = 1 + seed as usize % 5;
        let kb = 1 + (seed as usize / 5) % 4;
        let a: Vec<usize> = (0..n).map(|_| r.uniform(0.0, ka as f64) as usize).collect();
        let b: Vec<usize> = (0..n).map(|i| if r.uniform(0.0, 1.0) < 0.5 { a[i] } else { r.uniform(0.0, kb as f64) as usize }).collect();
        let got = adjusted_rand_index(&a, &b).unwrap();
        assert!((got - ari_pairs(&a, &b)).abs() <= 1e-12, "seed {seed}: {got} vs {}", ari_pairs(&a, &b));
    }
}

#[test]
fn ols_residuals_are_orthogonal() {
    for seed in 0..20u64 {
        let mut r = RngStream::new(0x015, seed);
        let n = 5 + seed as usize * 11;
        let x: Vec<f64> = (0..n).map(|_| 1e3 + r.uniform(-1.0, 1.0)).collect();
        let y: Vec<f64> = (0..n).map(|i| 2.0 - 3.0 * x[i] + r.standard_normal()).collect();
        let fit = fit_ols(&y, &x).unwrap();
        let tol = 1e-8 * n as f64;
        let s0: f64 = fit.residuals.iter().sum();
        let s1: f64 = fit.residuals.iter().zip(&x).map(|(e, xi)| e * (xi - 1e3)).sum();
        assert!(s0.abs() < tol && s1.abs() < tol, "seed {seed}: {s0} {s1}");
        let score_sum = fit.scores.iter().fold([0.0; 2], |acc, s| [acc[0] + s[0], acc[1] + s[1]]);
        // the slope score is scaled by x ~ 1e3
        assert!(score_sum[0].abs() < tol && score_sum[1].abs() < 1e3 * tol, "{score_sum:?}");
        assert_close(fit.rss, ols_rss(&y, &x).unwrap(), 1e-6, "rss");
    }
}
