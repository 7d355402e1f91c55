use proptest::prelude::*;
use relate_core::dataset::{generate_synthetic_dataset, SynthSpec};
use relate_core::models::accuracy;
use relate_core::pipeline::scenario::{benchmark_specs, sibling};
use relate_core::similarity::{
    cosine_similarity, dataset_embedding, dtw_distance, majority_vote, most_similar_dataset, train_encoder,
    wasserstein_1d, EncoderConfig, EMBEDDING_DIM,
};
use relate_core::Dataset;

fn named(v: &[(&str, f64)]) -> Vec<(String, f64)> {
    v.iter().map(|(n, s)| (n.to_string(), *s)).collect()
}

#[test]
#[allow(clippy::approx_constant)]
fn cosine_examples() {
    assert!((cosine_similarity(&[0.3, -2.0], &[0.3, -2.0]).unwrap() - 1.0).abs() < 1e-15);
    assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
    assert!((cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - 0.70710678).abs() < 1e-8);
    assert!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]).is_err());
}

#[test]
fn distance_examples() {
    assert_eq!(dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 3.0]).unwrap(), 0.0);
    assert_eq!(dtw_distance(&[0.5, -1.0], &[0.5, -1.0]).unwrap(), 0.0);
    assert_eq!(wasserstein_1d(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
    assert_eq!(wasserstein_1d(&[3.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.0);
    assert!(dtw_distance(&[], &[1.0]).is_err());
    assert!(wasserstein_1d(&[1.0], &[]).is_err());
}

#[test]
fn selection_examples() {
    let s = named(&[("b", 0.4), ("a", 1.0)]);
    assert_eq!(most_similar_dataset(&s).unwrap(), ("a".to_string(), 1.0));
    assert_eq!(most_similar_dataset(&named(&[("x", 0.9), ("y", 0.3)])).unwrap().0, "x");
    assert_eq!(most_similar_dataset(&named(&[("y", 0.5), ("x", 0.5)])).unwrap().0, "x");
    assert!(most_similar_dataset(&[]).is_err());

    assert_eq!(
        majority_vote(&named(&[("A", 0.1), ("A", 0.1), ("B", 0.9), ("C", 0.9)])).unwrap(),
        "A"
    );
    assert_eq!(
        majority_vote(&named(&[("A", 0.8), ("B", 0.6), ("A", 0.8), ("B", 0.6)])).unwrap(),
        "A"
    );
    assert_eq!(majority_vote(&named(&[("B", 0.2)])).unwrap(), "B");
    assert!(majority_vote(&[]).is_err());
}

fn default_dataset() -> Dataset {
    generate_synthetic_dataset(&SynthSpec::default()).unwrap()
}

#[test]
fn encoder_learns_and_embeds() {
    let ds = default_dataset();
    let cfg = EncoderConfig::default();
    let enc = train_encoder(&ds, &cfg, 1).unwrap();
    assert!(accuracy(&enc, &ds.val).unwrap() > 0.80);
    assert_eq!(enc, train_encoder(&ds, &cfg, 1).unwrap());

    let e = dataset_embedding(&enc, &ds.val, "d", "clean").unwrap();
    assert_eq!(e.vector.len(), EMBEDDING_DIM);
    assert!((e.vector.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs() < 1e-6);

    let one = dataset_embedding(&enc, &ds.val[..1], "d", "clean").unwrap();
    let raw = enc.embed(&ds.val[0]).unwrap();
    let n = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    for (a, b) in one.vector.iter().zip(&raw) {
        assert!((a - b / n).abs() < 1e-12);
    }

    let doubled: Vec<_> = ds.val.iter().chain(&ds.val).cloned().collect();
    let d = dataset_embedding(&enc, &doubled, "d", "clean").unwrap();
    for (a, b) in d.vector.iter().zip(&e.vector) {
        assert!((a - b).abs() < 1e-12);
    }
    assert!(dataset_embedding(&enc, &[], "d", "clean").is_err());
}

#[test]
fn siblings_are_more_similar_than_other_datasets() {
    let cfg = EncoderConfig::default();
    for seed in 0..5u64 {
        let specs = benchmark_specs(4, seed);
        let embed = |spec: &SynthSpec| {
            let ds: Dataset = generate_synthetic_dataset(spec).unwrap();
            let enc = train_encoder(&ds, &cfg, 99).unwrap();
            dataset_embedding(&enc, &ds.val, &ds.name, "clean").unwrap().vector
        };
        let home = embed(&specs[0]);
        let twin = cosine_similarity(&home, &embed(&sibling(&specs[0], seed))).unwrap();
        for other in &specs[1..] {
            let s = cosine_similarity(&home, &embed(other)).unwrap();
            assert!(twin > s, "seed {seed}: sibling {twin} vs {} {s}", other.name);
        }
    }
}

/// Exhaustive DTW over every monotone warping path.
fn dtw_brute(x: &[f64], y: &[f64], i: usize, j: usize) -> f64 {
    let c = (x[i] - y[j]).abs();
    if i + 1 == x.len() && j + 1 == y.len() {
        return c;
    }
    let mut best = f64::INFINITY;
    if i + 1 < x.len() {
        best = best.min(dtw_brute(x, y, i + 1, j));
    }
    if j + 1 < y.len() {
        best = best.min(dtw_brute(x, y, i, j + 1));
    }
    if i + 1 < x.len() && j + 1 < y.len() {
        best = best.min(dtw_brute(x, y, i + 1, j + 1));
    }
    c + best
}

fn vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, n)
}

fn nonzero(n: usize) -> impl Strategy<Value = Vec<f64>> {
    vector(n).prop_filter("non-zero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

proptest! {
    #[test]
    fn cosine_is_symmetric_bounded_and_scale_free(a in nonzero(8), b in nonzero(8), k in 0.01f64..100.0) {
        let s = cosine_similarity(&a, &b).unwrap();
        prop_assert!((s - cosine_similarity(&b, &a).unwrap()).abs() < 1e-15);
        prop_assert!(s.abs() <= 1.0 + 1e-9);
        let scaled: Vec<f64> = a.iter().map(|v| v * k).collect();
        prop_assert!((cosine_similarity(&scaled, &b).unwrap() - s).abs() < 1e-9);
    }

    #[test]
    fn cosine_ranking_matches_euclidean_on_unit_vectors(q in nonzero(6), cands in prop::collection::vec(nonzero(6), 2..6)) {
        let unit = |v: &[f64]| { let n = v.iter().map(|x| x * x).sum::<f64>().sqrt(); v.iter().map(|x| x / n).collect::<Vec<_>>() };
        let q = unit(&q);
        let cands: Vec<Vec<f64>> = cands.iter().map(|c| unit(c)).collect();
        let by_cos = (0..cands.len()).max_by(|&i, &j| {
            cosine_similarity(&q, &cands[i]).unwrap().total_cmp(&cosine_similarity(&q, &cands[j]).unwrap())
        }).unwrap();
        let dist = |c: &[f64]| c.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let best = dist(&cands[by_cos]);
        prop_assert!(cands.iter().all(|c| dist(c) >= best - 1e-12));
    }

    #[test]
    fn dtw_matches_enumeration_and_is_symmetric(x in (1usize..=6).prop_flat_map(vector), y in (1usize..=6).prop_flat_map(vector)) {
        let d = dtw_distance(&x, &y).unwrap();
        prop_assert!((d - dtw_brute(&x, &y, 0, 0)).abs() < 1e-9);
        prop_assert!((d - dtw_distance(&y, &x).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn dtw_is_bounded_by_any_path(x in (2usize..30).prop_flat_map(vector), y in (2usize..30).prop_flat_map(vector)) {
        // the diagonal-then-edge path is one valid warping
        let n = x.len().max(y.len());
        let witness: f64 = (0..n).map(|k| (x[k.min(x.len() - 1)] - y[k.min(y.len() - 1)]).abs()).sum();
        prop_assert!(dtw_distance(&x, &y).unwrap() <= witness + 1e-9);
    }

    #[test]
    fn wasserstein_is_a_translation_invariant_metric(
        x in (1usize..20).prop_flat_map(vector),
        y in (1usize..20).prop_flat_map(vector),
        z in (1usize..20).prop_flat_map(vector),
        c in -3.0f64..3.0,
    ) {
        let xy = wasserstein_1d(&x, &y).unwrap();
        let yz = wasserstein_1d(&y, &z).unwrap();
        let xz = wasserstein_1d(&x, &z).unwrap();
        prop_assert!(xz <= xy + yz + 1e-9);
        prop_assert!((xy - wasserstein_1d(&y, &x).unwrap()).abs() < 1e-9);
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        prop_assert!((wasserstein_1d(&x, &shifted).unwrap() - c.abs()).abs() < 1e-9);
    }
}
