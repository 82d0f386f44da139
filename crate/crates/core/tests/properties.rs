mod common;

use bar_core::dataset::load_csv;
use bar_core::fit::{movie_sse, Provenance, RIDGE};
use bar_core::interpret::{histogram_of, rank_attribute};
use bar_core::model_io::{read_model, write_model};
use bar_core::solver::{project_a, project_b, PairDomain, ReplicaState};
use bar_core::{assemble, center, fit_weights, rank_baseline, select_subset, BarModel, Mode, SolverConfig};
use common::{random_dataset, reference_means, rng};
use proptest::prelude::*;
use rand::Rng;

fn model_from(seed: u64, d: usize) -> BarModel {
    let ds = random_dataset(seed, 8, 10, 0.5, 0.2);
    let c = center(&ds).unwrap();
    let mut g = rng(seed ^ 0xabc);
    let bits: Vec<u8> = (0..ds.num_viewers() * d).map(|_| g.random_range(0..2u8)).collect();
    let weights = fit_weights(&bits, d, &c).unwrap();
    assemble(bits, d, weights, &ds, &c, Provenance::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn centering_matches_reference(seed in any::<u64>()) {
        let ds = random_dataset(seed, 12, 12, 0.4, 0.2);
        let c = center(&ds).unwrap();
        let (mm, vm) = reference_means(&ds);
        for (a, b) in c.movie_means.iter().zip(&mm) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in c.viewer_means.iter().zip(&vm) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        // viewer residual means vanish
        for v in 0..c.num_viewers() {
            let es = c.viewer_edges(v);
            if !es.is_empty() {
                let s: f64 = es.iter().map(|e| e.residual).sum();
                prop_assert!((s / es.len() as f64).abs() < 1e-9);
            }
        }
        for e in c.train().iter().chain(c.probe()) {
            let (m, v) = (e.movie as usize, e.viewer as usize);
            prop_assert_eq!(e.residual, e.stars - c.movie_means[m] - c.viewer_means[v]);
        }
    }

    #[test]
    fn ranking_matches_brute_force(seed in any::<u64>()) {
        let ds = random_dataset(seed, 10, 15, 0.4, 0.0);
        let c = center(&ds).unwrap();
        let r = rank_baseline(&c);
        let (mm, _) = reference_means(&ds);
        let mut errors = vec![0.0; ds.num_movies()];
        for e in ds.entries() {
            errors[e.movie as usize] += (e.stars - mm[e.movie as usize]).powi(2);
        }
        for (a, b) in r.errors.iter().zip(&errors) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        for w in r.order.windows(2) {
            let (a, b) = (w[0], w[1]);
            prop_assert!(r.errors[a] > r.errors[b] || (r.errors[a] == r.errors[b] && a < b));
        }
    }

    #[test]
    fn subset_is_minimal_and_monotone(seed in any::<u64>(), f1 in 0.01f64..1.0, f2 in 0.01f64..1.0) {
        let ds = random_dataset(seed, 10, 15, 0.4, 0.0);
        let r = rank_baseline(&center(&ds).unwrap());
        let (lo, hi) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
        let a = select_subset(&r, lo).unwrap();
        let b = select_subset(&r, hi).unwrap();
        prop_assert!(a.len() <= b.len());
        prop_assert_eq!(&b[..a.len()], &a[..]);
        if r.total > 0.0 {
            prop_assert!(r.coverage(a.len()) >= lo - 1e-12);
            prop_assert!(a.len() == 1 || r.coverage(a.len() - 1) < lo);
        }
    }

    #[test]
    fn csv_round_trip(seed in any::<u64>()) {
        let ds = random_dataset(seed, 6, 6, 0.5, 0.3);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        ds.write_csv(&p).unwrap();
        let back = load_csv(&p).unwrap();
        let key = |d: &bar_core::RatingsDataset| {
            let mut v: Vec<_> = d.entries().iter()
                .map(|e| (d.viewers()[e.viewer as usize].clone(), d.movies()[e.movie as usize].clone(), e.stars.to_bits(), e.partition))
                .collect();
            v.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
            v
        };
        prop_assert_eq!(key(&back), key(&ds));
    }

    #[test]
    fn projections_are_idempotent(seed in any::<u64>(), sparse in any::<bool>(), d in 1usize..4) {
        let ds = random_dataset(seed, 6, 6, 0.5, 0.0);
        let c = center(&ds).unwrap();
        let view = c.full_view().unwrap();
        let mode = if sparse { Mode::Sparse } else { Mode::Dense };
        let domain = PairDomain::new(&view, mode);
        let cfg = SolverConfig { d, mode, gamma: 1.7, ..SolverConfig::default() };
        let mut g = rng(seed);
        let mut x = ReplicaState::zeros(&domain, d);
        for v in x.w.iter_mut().chain(x.b.iter_mut()).chain(x.c.iter_mut()) {
            *v = g.random_range(-2.0..2.0);
        }
        let a1 = project_a(&x, &domain, &cfg).unwrap();
        let a2 = project_a(&a1, &domain, &cfg).unwrap();
        let b1 = project_b(&x, &domain, &cfg);
        let b2 = project_b(&b1, &domain, &cfg);
        for (p, q) in [(&a1, &a2), (&b1, &b2)] {
            for (s, t) in p.w.iter().chain(&p.b).chain(&p.c).zip(q.w.iter().chain(&q.b).chain(&q.c)) {
                prop_assert!((s - t).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn predict_is_affine_in_bits(seed in any::<u64>(), k in 0usize..3) {
        let mut model = model_from(seed, 3);
        let (v, m) = (0, 0);
        let before = model.predict(Some(v), Some(m), false);
        let old = model.bits[v * 3 + k];
        model.bits[v * 3 + k] = 1 - old;
        let after = model.predict(Some(v), Some(m), false);
        let w = model.movie_weights(m)[k];
        let expect = if old == 0 { w } else { -w };
        prop_assert!((after - before - expect).abs() <= 1e-12);
    }

    #[test]
    fn fitted_weights_are_stationary(seed in any::<u64>()) {
        let d = 3;
        let ds = random_dataset(seed, 10, 6, 0.6, 0.0);
        let c = center(&ds).unwrap();
        let mut g = rng(seed);
        let bits: Vec<u8> = (0..ds.num_viewers() * d).map(|_| g.random_range(0..2u8)).collect();
        let w = fit_weights(&bits, d, &c).unwrap();
        for m in 0..ds.num_movies() {
            let base = movie_sse(&bits, d, &w, &c, m);
            for k in 0..d {
                for h in [1e-3, -1e-3] {
                    let mut p = w.clone();
                    p[m * d + k] += h;
                    let ridge = RIDGE * (p[m * d + k].powi(2) - w[m * d + k].powi(2)).abs() + 1e-12;
                    prop_assert!(movie_sse(&bits, d, &p, &c, m) >= base - ridge);
                }
            }
        }
    }

    #[test]
    fn histogram_ignores_order(values in prop::collection::vec(-5.0f64..5.0, 1..40), bins in 1usize..12, seed in any::<u64>()) {
        let mut shuffled = values.clone();
        let mut g = rng(seed);
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, g.random_range(0..=i));
        }
        let a = histogram_of(&values, bins);
        prop_assert_eq!(&a, &histogram_of(&shuffled, bins));
        prop_assert_eq!(a.counts.iter().sum::<usize>(), values.len());
    }

    #[test]
    fn ranking_agrees_with_stable_sort(seed in any::<u64>(), k in 1usize..12) {
        let model = model_from(seed, 2);
        let w = model.attribute_weights(1);
        let mut asc: Vec<usize> = (0..w.len()).collect();
        asc.sort_by(|&a, &b| w[a].partial_cmp(&w[b]).unwrap());
        let mut desc: Vec<usize> = (0..w.len()).collect();
        desc.sort_by(|&a, &b| w[b].partial_cmp(&w[a]).unwrap());
        let (top, bottom) = rank_attribute(&model, 1, k).unwrap();
        let n = k.min(w.len());
        prop_assert_eq!(top.iter().map(|r| r.movie).collect::<Vec<_>>(), desc[..n].to_vec());
        prop_assert_eq!(bottom.iter().map(|r| r.movie).collect::<Vec<_>>(), asc[..n].to_vec());
    }

    #[test]
    fn model_file_round_trip(seed in any::<u64>()) {
        let model = model_from(seed, 3);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.bar");
        write_model(&model, &p).unwrap();
        let back = read_model(&p).unwrap();
        prop_assert_eq!(&back.bits, &model.bits);
        let bitsof = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bitsof(&back.weights), bitsof(&model.weights));
        prop_assert_eq!(back, model);
    }
}
