//! Property tests for the invariants each module promises.

#[path = "../src/oracles.rs"]
#[allow(dead_code)]
mod oracles;

use proptest::collection::vec;
use proptest::prelude::*;

use selsql::calibrate::{self, auto_tie_tolerance, isotonic_fit, minmax_fit, platt_fit, Calibrator};
use selsql::logistic;
use selsql::metrics::{self, ConfusionCounts};
use selsql::records::{load_log, write_log, ExecResults, PredictionRecord, TokenInfo};
use selsql::select::{self, gmm_fit, ThresholdObjective};
use selsql::splits::{self, lex_sql, mask_template, DatasetItem};
use selsql::uncertainty::{max_entropy_score, nsp_score, token_entropy};

fn distribution(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    vec(0.0f64..1.0, 1..max_len).prop_filter_map("non-zero mass", |w| {
        let s: f64 = w.iter().sum();
        (s > 1e-6).then(|| w.iter().map(|x| x / s).collect())
    })
}

fn labelled_scores(max_n: usize) -> impl Strategy<Value = Vec<(f64, u8)>> {
    // Scores on a coarse grid so ties are common.
    vec(((0i32..40).prop_map(|k| k as f64 / 4.0), 0u8..2), 1..max_n)
}

fn record_strategy() -> impl Strategy<Value = PredictionRecord> {
    let info = prop_oneof![
        vec(distribution(5), 1..4).prop_map(TokenInfo::FullDistributions),
        vec(0.0f64..5.0, 1..6).prop_map(TokenInfo::TokenEntropies),
        vec(-10.0f64..=0.0, 1..6).prop_map(TokenInfo::ChosenLogprobs),
    ];
    (
        "[a-z0-9]{1,8}",
        ".{0,20}",
        info,
        proptest::option::of(0u8..2),
        proptest::option::of(("[a-z|\n]{0,8}", "[a-z|\n]{0,8}")),
    )
        .prop_map(|(id, question, token_info, label, exec)| PredictionRecord {
            id,
            question: question.clone(),
            gold_sql: "SELECT a FROM t".into(),
            pred_sql: format!("SELECT b FROM t -- {}", question.len()),
            token_info,
            label,
            exec_results: exec.map(|(g, p)| ExecResults(g, p)),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn log_round_trip(records in vec(record_strategy(), 1..6)) {
        let mut records = records;
        for (i, r) in records.iter_mut().enumerate() {
            r.id = format!("{}-{i}", r.id);
        }
        let f = tempfile::NamedTempFile::new().unwrap();
        write_log(f.path(), &records).unwrap();
        prop_assert_eq!(load_log(f.path()).unwrap(), records);
    }

    #[test]
    fn derive_label_is_binary(r in record_strategy()) {
        if let Ok(label) = selsql::derive_label(&r) {
            prop_assert!(label <= 1);
        }
    }

    #[test]
    fn entropy_bounded_and_permutation_invariant(d in distribution(12), seed in any::<u64>()) {
        let h = token_entropy(&d).unwrap();
        prop_assert!(h >= 0.0 && h <= (d.len() as f64).ln() + 1e-12);
        let mut p = d.clone();
        let k = (seed as usize) % p.len();
        p.rotate_left(k);
        p.reverse();
        prop_assert!((token_entropy(&p).unwrap() - h).abs() < 1e-12);
    }

    #[test]
    fn flattening_a_token_never_lowers_max_entropy(
        dists in vec(distribution(6), 1..5),
        pick in any::<usize>(),
        eps in 0.01f64..1.0,
    ) {
        let rec = |info| PredictionRecord {
            id: "r".into(), question: String::new(), gold_sql: String::new(),
            pred_sql: String::new(), token_info: info, label: Some(0), exec_results: None,
        };
        let before = max_entropy_score(&rec(TokenInfo::FullDistributions(dists.clone()))).unwrap();
        let mut flat = dists.clone();
        let k = pick % flat.len();
        let v = flat[k].len() as f64;
        flat[k] = flat[k].iter().map(|p| (1.0 - eps) * p + eps / v).collect();
        let after = max_entropy_score(&rec(TokenInfo::FullDistributions(flat))).unwrap();
        prop_assert!(after >= before - 1e-12);
        let vmax = dists.iter().map(|d| d.len()).max().unwrap() as f64;
        prop_assert!(before <= vmax.ln() + 1e-12);
    }

    #[test]
    fn nsp_invariant_to_sequence_duplication(lps in vec(-8.0f64..=0.0, 1..10)) {
        let rec = |lps: Vec<f64>| PredictionRecord {
            id: "r".into(), question: String::new(), gold_sql: String::new(),
            pred_sql: String::new(), token_info: TokenInfo::ChosenLogprobs(lps),
            label: Some(0), exec_results: None,
        };
        let once = nsp_score(&rec(lps.clone())).unwrap();
        let twice = nsp_score(&rec([lps.clone(), lps].concat())).unwrap();
        prop_assert!((once - twice).abs() < 1e-12);
    }

    #[test]
    fn isotonic_matches_reference(data in labelled_scores(60)) {
        let c = isotonic_fit(&data).unwrap();
        c.validate().unwrap();
        let reference = oracles::reference_isotonic_auto(&data, auto_tie_tolerance(data.len()));
        for (&(u, _), r) in data.iter().zip(&reference) {
            prop_assert!((c.apply(u) - r).abs() <= 1e-12);
        }
    }

    #[test]
    fn isotonic_beats_every_contiguous_monotone_fit(data in vec(((0i32..8).prop_map(f64::from), 0u8..2), 1..12)) {
        let c = isotonic_fit(&data).unwrap();
        let fitted = c.apply_all(&data.iter().map(|p| p.0).collect::<Vec<_>>());
        let real: Vec<(f64, f64)> = data.iter().map(|&(u, y)| (u, f64::from(y))).collect();
        let ours = oracles::sse(&real, &fitted);
        prop_assert!(ours <= oracles::best_contiguous_monotone_sse(&real) + 1e-12);
    }

    #[test]
    fn isotonic_dominates_minmax_and_platt(data in labelled_scores(80)) {
        prop_assume!(data.iter().any(|p| p.1 == 0) && data.iter().any(|p| p.1 == 1));
        let us: Vec<f64> = data.iter().map(|p| p.0).collect();
        let brier_of = |c: &Calibrator| {
            let pairs: Vec<(f64, u8)> = data.iter().map(|&(u, y)| (c.apply(u), y)).collect();
            metrics::brier(&pairs).unwrap()
        };
        let iso = brier_of(&isotonic_fit(&data).unwrap());
        for invert in [false, true] {
            prop_assert!(iso <= brier_of(&minmax_fit(&us, invert).unwrap()) + 1e-12);
        }
        prop_assert!(iso <= brier_of(&platt_fit(&data).unwrap()) + 1e-12);
    }

    #[test]
    fn calibrators_are_monotone_maps(data in labelled_scores(50)) {
        prop_assume!(data.iter().any(|p| p.1 == 0) && data.iter().any(|p| p.1 == 1));
        let us: Vec<f64> = data.iter().map(|p| p.0).collect();
        let grid: Vec<f64> = (-10..=110).map(|i| i as f64 / 10.0).collect();
        for c in [
            minmax_fit(&us, false).unwrap(),
            minmax_fit(&us, true).unwrap(),
            platt_fit(&data).unwrap(),
            isotonic_fit(&data).unwrap(),
        ] {
            let out = c.apply_all(&grid);
            prop_assert!(out.iter().all(|p| (0.0..=1.0).contains(p)));
            let up = out.windows(2).all(|w| w[0] <= w[1]);
            let down = out.windows(2).all(|w| w[0] >= w[1]);
            prop_assert!(up || down, "{:?}", c);
        }
    }

    #[test]
    fn logistic_gradient_matches_finite_differences(
        data in vec((-3.0f64..3.0, 0u8..2), 2..30),
        t0 in -2.0f64..2.0,
        t1 in -2.0f64..2.0,
    ) {
        let theta = [t0, t1];
        let g = logistic::gradient(theta, &data, logistic::RIDGE);
        let fd = oracles::central_difference(|t| logistic::objective(t, &data, logistic::RIDGE), theta, 1e-6);
        let gn = g[0].hypot(g[1]);
        let err = (g[0] - fd[0]).hypot(g[1] - fd[1]);
        prop_assert!(err <= 1e-5 * gn.max(1e-3), "g={:?} fd={:?}", g, fd);
    }

    #[test]
    fn logreg_abstention_is_a_half_line(data in labelled_scores(40)) {
        prop_assume!(data.iter().any(|p| p.1 == 0) && data.iter().any(|p| p.1 == 1));
        let clf = select::logreg_fit(&data).unwrap();
        let grid: Vec<bool> = (-20..=120).map(|i| clf.predict("x", i as f64 / 10.0).abstain).collect();
        let flips = grid.windows(2).filter(|w| w[0] != w[1]).count();
        prop_assert!(flips <= 1);
    }

    #[test]
    fn threshold_fit_is_optimal(data in labelled_scores(40), beta in prop_oneof![Just(0.5), Just(1.0), Just(2.0)]) {
        prop_assume!(data.iter().any(|p| p.1 == 0) && data.iter().any(|p| p.1 == 1));
        let fit = select::threshold_fit(&data, ThresholdObjective::FBeta(beta)).unwrap();
        let us: Vec<f64> = data.iter().map(|p| p.0).collect();
        for g in select::threshold_candidates(&us) {
            let mut c = ConfusionCounts::default();
            for &(u, y) in &data {
                c.record(u >= g, y == 1);
            }
            prop_assert!(metrics::f_beta(c, beta).value <= fit.objective + 1e-15);
        }
        // Reported objective is what the chosen γ achieves.
        let mut c = ConfusionCounts::default();
        for &(u, y) in &data {
            c.record(select::threshold_predict("x", fit.gamma, u).abstain, y == 1);
        }
        prop_assert_eq!(metrics::f_beta(c, beta).value, fit.objective);
    }

    #[test]
    fn gmm_likelihood_monotone_and_posteriors_valid(
        a in vec(-1.0f64..1.0, 3..40),
        b in vec(2.0f64..5.0, 3..40),
    ) {
        let xs = [a, b].concat();
        let fit = gmm_fit(&xs, 0).unwrap();
        for w in fit.log_likelihood_trace.windows(2) {
            prop_assert!(w[1] - w[0] >= -1e-9);
        }
        let m = &fit.model;
        prop_assert!((m.components[0].weight + m.components[1].weight - 1.0).abs() < 1e-9);
        prop_assert!(m.components.iter().all(|c| c.std >= 1e-5));
        for &x in &xs {
            let p = m.p_error(x);
            prop_assert!((0.0..=1.0).contains(&p));
            let e = m.error_component;
            let mut flipped = m.clone();
            flipped.error_component = 1 - e;
            prop_assert!((p + flipped.p_error(x) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn gmm_decisions_affine_invariant(
        a in vec(-1.0f64..1.0, 5..30),
        b in vec(3.0f64..5.0, 5..30),
        scale in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let xs = [a, b].concat();
        let ys: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
        let fx = gmm_fit(&xs, 0).unwrap().model;
        let fy = gmm_fit(&ys, 0).unwrap().model;
        for (&x, &y) in xs.iter().zip(&ys) {
            let px = fx.p_error(x);
            // Near the decision boundary rounding may legitimately flip a tie.
            if (px - 0.5).abs() > 1e-6 {
                prop_assert_eq!(fx.predicts_error(x), fy.predicts_error(y));
            }
        }
    }

    #[test]
    fn roc_auc_equals_pairwise_count(points in vec(((0i32..15).prop_map(f64::from), 0u8..2), 2..120)) {
        prop_assume!(points.iter().any(|p| p.1 == 0) && points.iter().any(|p| p.1 == 1));
        prop_assert_eq!(metrics::roc_auc(&points).unwrap(), oracles::brute_force_auc(&points));
    }

    #[test]
    fn risk_coverage_accounting(points in labelled_scores(60)) {
        let curve = metrics::risk_coverage_curve(&points).unwrap();
        for p in &curve {
            prop_assert!(p.coverage_paper + p.risk_paper <= 1.0 + 1e-15);
            prop_assert!((p.coverage_paper + p.risk_paper - p.coverage_std).abs() < 1e-12);
            let answered = points.iter().filter(|(u, _)| *u < p.gamma).count();
            prop_assert!((p.coverage_std - answered as f64 / points.len() as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn abstention_never_raises_result_ex(outcomes in vec((any::<bool>(), 0u8..2), 1..50)) {
        let base: Vec<(bool, u8)> = outcomes.iter().map(|&(_, y)| (false, y)).collect();
        prop_assert!(
            metrics::result_ex_outcomes(&outcomes).unwrap()
                <= metrics::result_ex_outcomes(&base).unwrap()
        );
    }

    #[test]
    fn reliability_counts_partition_input(pairs in vec((0.0f64..=1.0, 0u8..2), 0..80), bins in 1usize..12) {
        let curve = calibrate::reliability_curve(&pairs, bins).unwrap();
        prop_assert_eq!(curve.len(), bins);
        prop_assert_eq!(curve.iter().map(|b| b.count).sum::<usize>(), pairs.len());
    }
}

fn sql_strategy() -> impl Strategy<Value = String> {
    let cols = prop_oneof![Just("a"), Just("b"), Just("name"), Just("age")];
    let tables = prop_oneof![Just("t"), Just("singer"), Just("song")];
    let cond = (
        cols.clone(),
        prop_oneof![Just("="), Just(">"), Just("<")],
        0u32..5,
        any::<bool>(),
    )
        .prop_map(|(c, op, v, quoted)| {
            if quoted {
                format!("{c} {op} 'x{v}'")
            } else {
                format!("{c} {op} {v}")
            }
        });
    (cols, tables, vec(cond, 0..4), any::<bool>()).prop_map(|(c, t, conds, count)| {
        let sel = if count {
            format!("count({c})")
        } else {
            c.to_string()
        };
        let mut sql = format!("SELECT {sel} FROM {t}");
        if !conds.is_empty() {
            sql.push_str(" WHERE ");
            sql.push_str(&conds.join(" AND "));
        }
        sql
    })
}

fn items(sqls: Vec<String>) -> Vec<DatasetItem> {
    sqls.into_iter()
        .enumerate()
        .map(|(i, sql)| DatasetItem {
            id: format!("i{i:03}"),
            question: String::new(),
            sql,
            db_id: "db".into(),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn template_split_is_template_closed(sqls in vec(sql_strategy(), 4..60), seed in any::<u64>(), frac in 0.1f64..0.9) {
        let items = items(sqls);
        let Ok(split) = splits::template_split(&items, frac, seed, None) else {
            return Ok(());
        };
        let tpl = |id: &String| {
            let it = items.iter().find(|i| &i.id == id).unwrap();
            mask_template(&it.sql, None).unwrap()
        };
        let train: std::collections::HashSet<String> = split.train_ids.iter().map(tpl).collect();
        prop_assert!(split.test_ids.iter().all(|id| !train.contains(&tpl(id))));
        prop_assert_eq!(split.train_ids.len() + split.test_ids.len(), items.len());
        prop_assert_eq!(&split, &splits::template_split(&items, frac, seed, None).unwrap());
    }

    #[test]
    fn length_split_orders_and_covers(sqls in vec(sql_strategy(), 4..60), frac in 0.1f64..0.6) {
        let items = items(sqls);
        let Ok(split) = splits::length_split(&items, frac) else {
            return Ok(());
        };
        let len_and_tokens = |id: &String| {
            let it = items.iter().find(|i| &i.id == id).unwrap();
            let toks = lex_sql(&it.sql).unwrap();
            (toks.len(), splits::token_set(&toks))
        };
        let moved = split.diagnostics.moved_ids.clone().unwrap();
        let vocab: std::collections::HashSet<String> =
            split.train_ids.iter().flat_map(|id| len_and_tokens(id).1).collect();
        let min_test = split.test_ids.iter().map(|id| len_and_tokens(id).0).min().unwrap();
        for id in &split.train_ids {
            if !moved.contains(id) {
                prop_assert!(len_and_tokens(id).0 <= min_test);
            }
        }
        for id in &split.test_ids {
            prop_assert!(len_and_tokens(id).1.iter().all(|t| vocab.contains(t)));
        }
    }

    #[test]
    fn masking_is_idempotent(sql in sql_strategy()) {
        let once = mask_template(&sql, None).unwrap();
        prop_assert_eq!(mask_template(&once, None).unwrap(), once);
    }

    #[test]
    fn lexing_consumes_everything(sql in sql_strategy()) {
        let toks = lex_sql(&sql).unwrap();
        let joined: String = toks.iter().map(|t| t.text.as_str()).collect();
        let squashed: String = sql.chars().filter(|c| !c.is_whitespace()).collect();
        let quoted_ws: String = joined.chars().filter(|c| !c.is_whitespace()).collect();
        prop_assert_eq!(quoted_ws, squashed);
    }
}
