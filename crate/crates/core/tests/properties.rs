mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;

use common::{index_of, random_matrix, rng, vocab_with_ties};
use revdict::data::{
    hashgram_encode, load_dictionary, split_set, write_dictionary, DictEntry, DictionarySet, Split,
};
use revdict::ensemble::average;
use revdict::eval::{evaluate, precision_at_k};
use revdict::math::{cosine, mse_loss, norm, Matrix};
use revdict::optim::{AdamW, OneCycle};

fn bits(m: &Matrix) -> Vec<u64> {
    m.as_slice().iter().map(|v| v.to_bits()).collect()
}

fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn forward_commutes_with_row_permutation(seed in any::<u64>(), n in 1usize..12, aligner in any::<bool>()) {
        let mut r = rng(seed);
        let stack = if aligner {
            common::aligner_stack(&mut r, 5, 7, 3, 4)
        } else {
            common::projection_stack(&mut r, 5, 6, 4)
        };
        let x = random_matrix(&mut r, n, 5, 1.0);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let y = stack.infer(&x).unwrap();
        let yp = stack.infer(&x.select_rows(&perm)).unwrap();
        prop_assert_eq!(bits(&yp), bits(&y.select_rows(&perm)));
    }

    #[test]
    fn cosine_is_symmetric_and_scale_invariant(
        u in vec_strategy(9),
        v in vec_strategy(9),
        e in -8i32..8,
    ) {
        prop_assert_eq!(cosine(&u, &v).to_bits(), cosine(&v, &u).to_bits());
        let c = 2f64.powi(e);
        let su: Vec<f64> = u.iter().map(|x| x * c).collect();
        prop_assert!((cosine(&su, &v) - cosine(&u, &v)).abs() <= 1e-12);
        prop_assert!(cosine(&u, &v).abs() <= 1.0 + 1e-12);
    }

    #[test]
    fn mse_is_nonnegative_and_zero_on_identity(seed in any::<u64>(), n in 1usize..6, d in 1usize..6) {
        let mut r = rng(seed);
        let a = random_matrix(&mut r, n, d, 1.0);
        let b = random_matrix(&mut r, n, d, 1.0);
        prop_assert!(mse_loss(&a, &b).unwrap() >= 0.0);
        prop_assert_eq!(mse_loss(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn adamw_with_zero_gradient_only_decays(
        p in prop::collection::vec(-5.0f64..5.0, 1..20),
        lr in 1e-6f64..1e-1,
        wd in 0.0f64..1e-1,
    ) {
        let mut opt = AdamW::new(&[p.len()]);
        let mut q = p.clone();
        let g = vec![0.0; p.len()];
        opt.step(&mut [q.as_mut_slice()], &[g.as_slice()], lr, wd).unwrap();
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((b - a * (1.0 - lr * wd)).abs() <= 1e-15 * a.abs().max(1.0));
        }
    }

    #[test]
    fn one_cycle_is_unimodal_and_bounded(
        total in 2usize..400,
        pct in 0.05f64..0.95,
        max_lr in 1e-6f64..1.0,
    ) {
        let s = OneCycle::new(max_lr, pct, 25.0, 100.0, total).unwrap();
        let lrs: Vec<f64> = (0..=total).map(|t| s.lr_at(t).unwrap()).collect();
        let peak = s.peak_step();
        prop_assert!((lrs[peak] - max_lr).abs() <= 1e-12 * max_lr);
        for w in lrs[..=peak].windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        for w in lrs[peak..].windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert!((lrs[0] - max_lr / 25.0).abs() <= 1e-12 * max_lr);
        prop_assert!((lrs[total] - max_lr / 2500.0).abs() <= 1e-12 * max_lr);
        prop_assert!(s.lr_at(total + 1).is_err());
    }

    #[test]
    fn split_is_a_partition(n in 2usize..80, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let entries: Vec<DictEntry> = (0..n).map(|i| DictEntry::new(format!("id{i}"), "w", "g")).collect();
        let set = DictionarySet::new("ar", Split::Train, entries).unwrap();
        if let Ok((train, dev)) = split_set(&set, frac, seed) {
            prop_assert_eq!(train.len() + dev.len(), n);
            let mut ids: Vec<String> = train.entries().iter().chain(dev.entries()).map(|e| e.id.clone()).collect();
            ids.sort();
            ids.dedup();
            prop_assert_eq!(ids.len(), n);
            let again = split_set(&set, frac, seed).unwrap();
            prop_assert_eq!(again.0, train);
        }
    }

    #[test]
    fn hashgram_is_unit_or_zero(gloss in "\\PC{0,40}", d in 8usize..128, seed in any::<u64>()) {
        let v = hashgram_encode(&gloss, d, seed);
        prop_assert_eq!(v.len(), d);
        let n = norm(&v);
        if gloss.split_whitespace().next().is_none() {
            prop_assert_eq!(n, 0.0);
        } else {
            prop_assert!((n - 1.0).abs() < 1e-12);
        }
        prop_assert_eq!(v, hashgram_encode(&gloss, d, seed));
    }

    #[test]
    fn dictionary_round_trips(
        glosses in prop::collection::vec("\\PC{1,30}", 1..10),
        vecs in prop::collection::vec(vec_strategy(4), 10),
    ) {
        let entries: Vec<DictEntry> = glosses
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let mut e = DictEntry::new(format!("ar.{i}"), format!("w{i}"), g.clone());
                e.electra = Some(vecs[i].clone());
                e
            })
            .collect();
        let set = DictionarySet::new("ar", Split::Dev, entries).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.json");
        write_dictionary(&set, &path).unwrap();
        prop_assert_eq!(load_dictionary(&path, "ar", Split::Dev).unwrap(), set);
    }

    #[test]
    fn ensemble_average_ignores_member_order(seed in any::<u64>(), m in 1usize..6) {
        let mut r = rng(seed);
        let members: Vec<Matrix> = (0..m).map(|_| random_matrix(&mut r, 4, 3, 1.0)).collect();
        let mut refs: Vec<&Matrix> = members.iter().collect();
        let a = average(&refs).unwrap();
        refs.shuffle(&mut r);
        prop_assert_eq!(bits(&average(&refs).unwrap()), bits(&a));
    }

    #[test]
    fn lookup_prefix_scale_and_batch(seed in any::<u64>(), v in 1usize..200, k in 1usize..50, e in -6i32..6) {
        let mut r = rng(seed);
        let vocab = vocab_with_ties(&mut r, v, 6);
        let index = index_of(&vocab);
        let queries = random_matrix(&mut r, 3, 6, 1.0);
        let batch = index.batch_lookup(&queries, k + 5).unwrap();
        for (i, q) in queries.iter_rows().enumerate() {
            let long = index.lookup(q, k + 5).unwrap();
            let short = index.lookup(q, k).unwrap();
            prop_assert_eq!(&short[..], &long[..short.len()]);
            prop_assert_eq!(&batch[i], &long);
            let scaled: Vec<f64> = q.iter().map(|x| x * 2f64.powi(e)).collect();
            let ids = |h: &[revdict::retrieval::Hit]| h.iter().map(|h| h.id.clone()).collect::<Vec<_>>();
            prop_assert_eq!(ids(&index.lookup(&scaled, k).unwrap()), ids(&short));
        }
    }

    #[test]
    fn precision_is_monotone_in_k(seed in any::<u64>(), v in 2usize..150) {
        let mut r = rng(seed);
        let vocab = vocab_with_ties(&mut r, v, 5);
        let index = index_of(&vocab);
        let n = 10;
        let preds = random_matrix(&mut r, n, 5, 1.0);
        let ids: Vec<String> = (0..n).map(|i| vocab[(i * 7) % v].0.clone()).collect();
        let mut last = 0.0;
        for k in 1..=v {
            let p = precision_at_k(&preds, &ids, &index, k).unwrap();
            prop_assert!(p >= last);
            last = p;
        }
        prop_assert_eq!(last, 1.0);
    }

    #[test]
    fn rank_is_invariant_to_prediction_scale_and_item_order(seed in any::<u64>(), e in -6i32..6) {
        let mut r = rng(seed);
        let (n, m, d) = (12, 40, 4);
        let preds = random_matrix(&mut r, n, d, 1.0);
        let targets = random_matrix(&mut r, n, d, 1.0);
        let pool = random_matrix(&mut r, m, d, 1.0);
        let idx: Vec<usize> = (0..n).map(|i| (i * 3) % m).collect();
        let base = evaluate(&preds, &targets, &pool, &idx).unwrap();

        let mut scaled = preds.clone();
        scaled.as_mut_slice().iter_mut().for_each(|x| *x *= 2f64.powi(e));
        prop_assert_eq!(evaluate(&scaled, &targets, &pool, &idx).unwrap().rank, base.rank);

        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut r);
        let shuffled = evaluate(
            &preds.select_rows(&perm),
            &targets.select_rows(&perm),
            &pool,
            &perm.iter().map(|&i| idx[i]).collect::<Vec<_>>(),
        )
        .unwrap();
        prop_assert_eq!(shuffled.rank, base.rank);
        prop_assert!((shuffled.mse - base.mse).abs() <= 1e-12);
        prop_assert!((shuffled.cosine - base.cosine).abs() <= 1e-12);
    }
}
