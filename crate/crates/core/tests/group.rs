use rand_distr::{Distribution, StandardNormal};
use relate_core::attacks::{AttackGroup, AttackKind, AttackSpec};
use relate_core::dataset::{generate_synthetic_dataset, SynthSpec};
use relate_core::group::{
    extract_group_features, group_accuracy, group_training_vectors, max_mean_ratio, spectral_flatness,
    train_group_classifier, BoostConfig, LabeledVector, FEATURES,
};
use relate_core::models::{train, Architecture};
use relate_core::pipeline::scenario::{untuned, BENCHMARK_NOISE};
use relate_core::rng;
use relate_core::Dataset;

#[test]
fn white_noise_is_flatter_than_a_tone() {
    let mut r = rng::rng(3);
    let noise: Vec<f64> = (0..256).map(|_| StandardNormal.sample(&mut r)).collect();
    let tone: Vec<f64> = (0..256).map(|t| (t as f64 * 0.3).sin()).collect();
    let (fn_, ft) = (spectral_flatness(&noise), spectral_flatness(&tone));
    assert!(fn_ > 0.3, "{fn_}");
    assert!(ft < 0.1, "{ft}");
    assert!((0.0..=1.0).contains(&fn_) && (0.0..=1.0).contains(&ft));
    assert_eq!(spectral_flatness(&[1.0; 32]), 0.0);
}

#[test]
fn sparse_differences_have_a_high_peak_ratio() {
    let dense = vec![0.1; 50];
    let mut sparse = vec![0.001; 50];
    sparse[17] = 0.5;
    assert!((max_mean_ratio(&dense) - 1.0).abs() < 1e-12);
    assert!(max_mean_ratio(&sparse) > 10.0);
    assert_eq!(max_mean_ratio(&[]), 0.0);
}

#[test]
fn features_ignore_sample_order() {
    let ds: Dataset = generate_synthetic_dataset(&SynthSpec::default()).unwrap();
    let mut shuffled = ds.val.clone();
    shuffled.reverse();
    let (a, b) = (
        extract_group_features(&ds.val).unwrap(),
        extract_group_features(&shuffled).unwrap(),
    );
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-9);
    }
    assert!(extract_group_features::<f64>(&[]).is_err());
}

fn toy(label: AttackGroup, value: f64) -> LabeledVector {
    let mut features = [0.0; FEATURES];
    features[4] = value;
    features[9] = -value;
    LabeledVector {
        features,
        group: label,
        dataset: "toy".into(),
        attack: match label {
            AttackGroup::IterationBased => AttackKind::Fgsm,
            AttackGroup::OptimizationDecisionBased => AttackKind::DeepFool,
        },
        bootstrap: None,
    }
}

#[test]
fn boosting_separates_a_threshold_problem() {
    let rows: Vec<LabeledVector> = (0..40)
        .map(|i| {
            let v = i as f64 / 10.0;
            toy(
                if v > 2.0 {
                    AttackGroup::OptimizationDecisionBased
                } else {
                    AttackGroup::IterationBased
                },
                v,
            )
        })
        .collect();
    let clf = train_group_classifier(&rows, &BoostConfig::default()).unwrap();
    assert_eq!(group_accuracy(&clf, &rows).unwrap(), 1.0);
    assert_eq!(clf, train_group_classifier(&rows, &BoostConfig::default()).unwrap());
    let one_sided: Vec<_> = rows
        .iter()
        .filter(|r| r.group == AttackGroup::IterationBased)
        .cloned()
        .collect();
    assert!(train_group_classifier(&one_sided, &BoostConfig::default()).is_err());
}

#[test]
fn classifier_memorizes_its_training_set() {
    let ds: Dataset = generate_synthetic_dataset(&SynthSpec {
        noise: BENCHMARK_NOISE,
        ..SynthSpec::default()
    })
    .unwrap();
    let model = train(&untuned(Architecture::Mlp), &ds, 0).unwrap();
    let clean = extract_group_features(&ds.train).unwrap();
    let attacks: Vec<AttackSpec> = AttackKind::ALL.iter().map(|&k| AttackSpec::new(k, 0.1)).collect();
    let rows = group_training_vectors(&ds.name, &model, &ds.val, &clean, &attacks, 10, ds.val.len() / 5, 1).unwrap();
    assert_eq!(rows.len(), 7 * 11);
    let clf = train_group_classifier(&rows, &BoostConfig::default()).unwrap();
    let acc = group_accuracy(&clf, &rows).unwrap();
    assert!(acc >= 0.95, "{acc}");
}
