use impscore::backend::{
    CachedBackend, EmbeddingBackend, EmbeddingRecord, FileBackend, ToyEncoder,
};
use impscore::eval::{fractional_ranks, kendall_tau, spearman_rho};
use impscore::linalg::Matrix;
use impscore::model::TransformWeights;
use impscore::training::split_dataset;
use impscore::{Embedding, Metric, ModelConfig, ProjectionHead, TrainConfig, Transform};
use proptest::prelude::*;

const D: usize = 5;
const L: usize = 3;

fn metric() -> impl Strategy<Value = Metric> {
    prop_oneof![Just(Metric::Cosine), Just(Metric::Euclidean)]
}

fn transform() -> impl Strategy<Value = Transform> {
    prop_oneof![
        Just(Transform::PToS),
        Just(Transform::SToP),
        Just(Transform::ThirdSpace)
    ]
}

fn vec_of(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n)
}

fn head_with(imp: Metric, prag: Metric) -> impl Strategy<Value = ProjectionHead> {
    (
        transform(),
        vec_of(D * L),
        vec_of(D * L),
        vec_of(L * L),
        vec_of(L * L),
    )
        .prop_map(move |(transform, wp, ws, t1, t2)| {
            let cfg = ModelConfig {
                d: D,
                l: L,
                imp_metric: imp,
                prag_metric: prag,
                transform,
            };
            let tw = match transform {
                Transform::ThirdSpace => TransformWeights::Pair {
                    pragmatic: Matrix::from_vec(L, L, t1).unwrap(),
                    semantic: Matrix::from_vec(L, L, t2).unwrap(),
                },
                _ => TransformWeights::Single(Matrix::from_vec(L, L, t1).unwrap()),
            };
            ProjectionHead::new(
                cfg,
                Matrix::from_vec(D, L, wp).unwrap(),
                Matrix::from_vec(D, L, ws).unwrap(),
                tw,
            )
            .unwrap()
        })
}

fn any_head() -> impl Strategy<Value = ProjectionHead> {
    (metric(), metric()).prop_flat_map(|(i, p)| head_with(i, p))
}

fn emb(v: Vec<f64>) -> Embedding {
    Embedding::new(v).unwrap()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #[test]
    fn cosine_scores_stay_in_range(head in head_with(Metric::Cosine, Metric::Cosine), e in vec_of(D)) {
        let s = head.implicitness(&emb(e)).unwrap();
        prop_assert!((0.0..=2.0).contains(&s), "{s}");
    }

    #[test]
    fn cosine_scores_are_scale_invariant(
        head in head_with(Metric::Cosine, Metric::Euclidean),
        e in vec_of(D),
        c in 0.01f64..100.0,
    ) {
        let e = emb(e);
        let a = head.implicitness(&e).unwrap();
        let b = head.implicitness(&e.scaled(c)).unwrap();
        prop_assert!(close(a, b, 1e-9), "{a} vs {b}");
    }

    #[test]
    fn euclidean_scores_are_non_negative(head in head_with(Metric::Euclidean, Metric::Cosine), e in vec_of(D)) {
        prop_assert!(head.implicitness(&emb(e)).unwrap() >= 0.0);
    }

    #[test]
    fn projection_is_linear(head in any_head(), a in vec_of(D), b in vec_of(D), x in -3.0f64..3.0) {
        let combo: Vec<f64> = a.iter().zip(&b).map(|(u, v)| x * u + v).collect();
        let fa = head.project(&emb(a)).unwrap();
        let fb = head.project(&emb(b)).unwrap();
        let fc = head.project(&emb(combo)).unwrap();
        for k in 0..L {
            prop_assert!(close(fc.pragmatic[k], x * fa.pragmatic[k] + fb.pragmatic[k], 1e-12));
            prop_assert!(close(fc.semantic[k], x * fa.semantic[k] + fb.semantic[k], 1e-12));
        }
    }

    #[test]
    fn pragmatic_distance_is_symmetric(head in any_head(), a in vec_of(D), b in vec_of(D)) {
        let (a, b) = (emb(a), emb(b));
        let ab = head.pragmatic_distance(&a, &b).unwrap();
        let ba = head.pragmatic_distance(&b, &a).unwrap();
        prop_assert!(close(ab, ba, 1e-12), "{ab} vs {ba}");
        prop_assert!(ab >= 0.0);
    }

    #[test]
    fn euclidean_pragmatic_distance_scales(
        head in head_with(Metric::Cosine, Metric::Euclidean),
        a in vec_of(D),
        b in vec_of(D),
        c in 0.01f64..100.0,
    ) {
        let (a, b) = (emb(a), emb(b));
        let base = head.pragmatic_distance(&a, &b).unwrap();
        let scaled = head.pragmatic_distance(&a.scaled(c), &b.scaled(c)).unwrap();
        prop_assert!(close(scaled, c * base, 1e-9), "{scaled} vs {}", c * base);
    }

    #[test]
    fn self_distance_is_zero(head in any_head(), a in vec_of(D)) {
        let a = emb(a);
        prop_assert!(head.pragmatic_distance(&a, &a).unwrap().abs() < 1e-12);
    }

    #[test]
    fn toy_encoder_is_pure_and_order_preserving(texts in prop::collection::vec("[a-z ]{0,12}", 1..8), seed in 0u64..50) {
        let enc = ToyEncoder::new(16, seed);
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let batch = enc.embed(&refs).unwrap();
        prop_assert_eq!(batch.len(), texts.len());
        for (t, e) in refs.iter().zip(&batch) {
            prop_assert_eq!(e, &enc.embed(&[*t]).unwrap()[0]);
            prop_assert_eq!(e.dim(), 16);
        }
        let mut rev = refs.clone();
        rev.reverse();
        let back = enc.embed(&rev).unwrap();
        for (i, e) in back.iter().enumerate() {
            prop_assert_eq!(e, &batch[batch.len() - 1 - i]);
        }
    }

    #[test]
    fn cache_is_transparent(texts in prop::collection::vec("[a-c]{1,3}", 1..20)) {
        let plain = ToyEncoder::new(8, 4);
        let cached = CachedBackend::new(ToyEncoder::new(8, 4));
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let first = cached.embed(&refs).unwrap();
        let second = cached.embed(&refs).unwrap();
        prop_assert_eq!(&first, &plain.embed(&refs).unwrap());
        prop_assert_eq!(&first, &second);
        let distinct: std::collections::HashSet<&str> = refs.iter().copied().collect();
        prop_assert_eq!(cached.misses(), distinct.len() as u64);
    }

    #[test]
    fn file_backend_preserves_order(n in 1usize..12, picks in prop::collection::vec(0usize..12, 1..30)) {
        let records: Vec<EmbeddingRecord> = (0..n)
            .map(|i| EmbeddingRecord { text: format!("t{i}"), embedding: vec![i as f64, 1.0] })
            .collect();
        let backend = FileBackend::from_memory(records).unwrap();
        let texts: Vec<String> = picks.iter().map(|p| format!("t{}", p % n)).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let out = backend.embed(&refs).unwrap();
        for (p, e) in picks.iter().zip(&out) {
            prop_assert_eq!(e.values()[0], (p % n) as f64);
        }
    }

    #[test]
    fn split_is_a_partition(n in 0usize..200, seed in any::<u64>()) {
        let items: Vec<usize> = (0..n).collect();
        let cfg = TrainConfig { seed, ..TrainConfig::default() };
        let s = split_dataset(&items, &cfg).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, items);
        prop_assert_eq!(s.val.len(), (n as f64 * 0.1 + 1e-9).floor() as usize);
        prop_assert_eq!(s.test.len(), s.val.len());
    }

    #[test]
    fn tau_and_rho_are_symmetric_and_bounded(
        a in prop::collection::vec(-5.0f64..5.0, 2..10),
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut b = a.clone();
        b.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let tau = kendall_tau(&a, &b).unwrap();
        let rho = spearman_rho(&a, &b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&tau));
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&rho));
        prop_assert_eq!(tau, kendall_tau(&b, &a).unwrap());
        prop_assert!(close(rho, spearman_rho(&b, &a).unwrap(), 1e-12));
    }

    #[test]
    fn fractional_ranks_sum_is_fixed(v in prop::collection::vec(0u8..4, 1..15)) {
        let v: Vec<f64> = v.into_iter().map(f64::from).collect();
        let n = v.len() as f64;
        let sum: f64 = fractional_ranks(&v).iter().sum();
        prop_assert!(close(sum, n * (n + 1.0) / 2.0, 1e-12));
    }
}

#[test]
fn every_permutation_of_six_matches_itself_and_its_reverse() {
    fn perms(n: usize) -> Vec<Vec<f64>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n as f64);
                out.push(q);
            }
        }
        out
    }
    let all = perms(6);
    assert_eq!(all.len(), 720);
    for p in &all {
        let rev: Vec<f64> = p.iter().map(|x| 7.0 - x).collect();
        assert_eq!(kendall_tau(p, p).unwrap(), 1.0);
        assert_eq!(spearman_rho(p, p).unwrap(), 1.0);
        assert_eq!(kendall_tau(p, &rev).unwrap(), -1.0);
        assert_eq!(spearman_rho(p, &rev).unwrap(), -1.0);
    }
}
