use proptest::prelude::*;
use relate_core::attacks::{attack_samples, AttackKind, AttackSpec};
use relate_core::dataset::{generate_synthetic_dataset, SynthSpec};
use relate_core::detection::{
    classify_case, detection_rate, fit_detector, fourier_features, snap_intensity, wavelet_features, Case,
    DetectorKind, DetectorPair, Verdict, DEFAULT_PERCENTILE, DEFAULT_THRESHOLD, FOURIER_BANDS, LOG_FLOOR,
    WAVELET_LEVELS,
};
use relate_core::models::{train, Architecture};
use relate_core::pipeline::scenario::{untuned, BENCHMARK_NOISE};
use relate_core::transform::power_spectrum;
use relate_core::{Dataset, Sample};

fn one_channel(values: Vec<f64>) -> Sample {
    let n = values.len();
    Sample::new(values, 1, n, 0).unwrap()
}

fn default_dataset() -> Dataset {
    generate_synthetic_dataset(&SynthSpec::default()).unwrap()
}

#[test]
fn constant_signal_has_only_dc_energy() {
    let f = fourier_features(&one_channel(vec![2.5; 64]));
    assert!(f[0] > LOG_FLOOR.ln() + 1.0);
    for v in &f[1..] {
        assert_eq!(*v, LOG_FLOOR.ln());
    }
    let (w, used) = wavelet_features(&one_channel(vec![2.5; 64]), WAVELET_LEVELS);
    assert_eq!(used, WAVELET_LEVELS);
    assert!(w.iter().all(|v| *v == LOG_FLOOR.ln()));
}

#[test]
fn sinusoid_peaks_in_its_band() {
    let n = 128;
    for k in [3usize, 10, 21, 37, 50] {
        let x: Vec<f64> = (0..n)
            .map(|t| (2.0 * std::f64::consts::PI * k as f64 * t as f64 / n as f64).sin())
            .collect();
        // All power of an integer-frequency sinusoid sits in bin k; bands
        // split the bins into 16 equal runs.
        let bins = power_spectrum(&x).len();
        let expected = k * FOURIER_BANDS / bins;
        let f = fourier_features(&one_channel(x));
        let arg = (0..FOURIER_BANDS).max_by(|&a, &b| f[a].total_cmp(&f[b])).unwrap();
        assert_eq!(arg, expected, "k={k}");
    }
}

#[test]
fn spike_energy_lands_in_level_one() {
    let mut spike = vec![0.0; 64];
    spike[0] = 1.0;
    let (ws, _) = wavelet_features(&one_channel(spike), WAVELET_LEVELS);
    let (wc, _) = wavelet_features(&one_channel(vec![1.0; 64]), WAVELET_LEVELS);
    // (1 - 0) / sqrt 2 is the only level-one detail: energy 1/2
    assert!((ws[0] - 0.5f64.ln()).abs() < 1e-12);
    assert!(ws[0] > wc[0]);
}

#[test]
fn short_series_reduce_wavelet_levels() {
    let (w, used) = wavelet_features(&one_channel(vec![0.5, -1.0, 2.0, 0.0, 1.0]), WAVELET_LEVELS);
    assert_eq!(used, 2);
    assert_eq!(w.len(), 2);
}

#[test]
fn calibration_bounds_training_exceedances() {
    let ds = default_dataset();
    for kind in [DetectorKind::Fourier, DetectorKind::Wavelet] {
        let det = fit_detector(kind, &ds.train, DEFAULT_PERCENTILE).unwrap();
        let over = ds.train.iter().filter(|s| det.flags(s)).count();
        let allowed = ((100.0 - DEFAULT_PERCENTILE) / 100.0 * ds.train.len() as f64).ceil() as usize + 1;
        assert!(over <= allowed, "{kind:?}: {over} > {allowed}");
        assert_eq!(det, fit_detector(kind, &ds.train, DEFAULT_PERCENTILE).unwrap());
        let mut never = det.clone();
        never.threshold = f64::INFINITY;
        assert_eq!(detection_rate(&never, &ds.val).unwrap(), 0.0);
    }
}

#[test]
fn clean_default_data_routes_to_case_one() {
    let ds = default_dataset();
    let det = DetectorPair::fit(&ds.train, DEFAULT_PERCENTILE).unwrap();
    let r = det.report(&ds.val, DEFAULT_THRESHOLD).unwrap();
    assert!(r.fused_rate < DEFAULT_THRESHOLD, "{r}");
    assert_eq!(r.case, Case::Case1);
    assert_eq!(det.classify_segments(&ds.val).unwrap(), vec![Verdict::Clean; 5]);
}

#[test]
fn fgsm_on_default_data_is_detected() {
    // At the generator's default noise an eps = 0.1 sign perturbation only
    // doubles the per-band power, which 16 log bands averaged over three
    // channels resolve for some models and seeds but not reliably. The
    // benchmark noise level is the regime the detectors are built for.
    let ds: Dataset = generate_synthetic_dataset(&SynthSpec {
        noise: BENCHMARK_NOISE,
        ..SynthSpec::default()
    })
    .unwrap();
    let model = train(&untuned(Architecture::Mlp), &ds, 0).unwrap();
    let det = DetectorPair::fit(&ds.train, DEFAULT_PERCENTILE).unwrap();
    let adv = attack_samples(&model, &ds.val, &AttackSpec::new(AttackKind::Fgsm, 0.1), 0).unwrap();
    let rate = det.fused_rate(&adv).unwrap();
    assert!(rate > 0.87, "{rate}");
}

#[test]
fn attacked_segments_are_found() {
    let ds = default_dataset();
    let model = train(&untuned(Architecture::Mlp), &ds, 0).unwrap();
    let det = DetectorPair::fit(&ds.train, DEFAULT_PERCENTILE).unwrap();
    let adv = attack_samples(&model, &ds.val, &AttackSpec::new(AttackKind::Fgsm, 0.1), 0).unwrap();
    let bounds = relate_core::detection::segment_bounds(ds.val.len(), 5);
    let mut mixed = ds.val.clone();
    for seg in [0, 2] {
        let (a, b) = bounds[seg];
        mixed[a..b].clone_from_slice(&adv[a..b]);
    }
    use Verdict::{Attacked as A, Clean as C};
    assert_eq!(det.classify_segments(&mixed).unwrap(), vec![A, C, A, C, C]);
}

#[test]
fn published_routing_examples() {
    assert_eq!(classify_case(0.075, 0.056, DEFAULT_THRESHOLD).0, Case::Case1);
    assert_eq!(classify_case(1.0, 1.0, DEFAULT_THRESHOLD).0, Case::Case2);
    assert_eq!(classify_case(0.156, 0.156, DEFAULT_THRESHOLD).0, Case::Case3);
    assert_eq!(snap_intensity(0.63, DEFAULT_THRESHOLD).unwrap(), 60);
    assert_eq!(snap_intensity(0.28, DEFAULT_THRESHOLD).unwrap(), 20);
    assert_eq!(snap_intensity(0.50, DEFAULT_THRESHOLD).unwrap(), 40);
    assert!(snap_intensity(0.05, DEFAULT_THRESHOLD).is_err());
}

proptest! {
    #[test]
    fn fusion_dominates_and_is_symmetric(a in 0.0f64..=1.0, b in 0.0f64..=1.0, t in 0.01f64..0.49) {
        let (case, fused) = classify_case(a, b, t);
        prop_assert!(fused >= a && fused >= b);
        prop_assert_eq!(classify_case(b, a, t), (case, fused));
    }

    #[test]
    fn every_rate_gets_exactly_one_case(f in 0.0f64..=1.0, t in 0.01f64..0.49) {
        let (case, _) = classify_case(f, f, t);
        let expected = if f < t { Case::Case1 } else if f > 1.0 - t { Case::Case2 } else { Case::Case3 };
        prop_assert_eq!(case, expected);
        prop_assert_eq!(case == Case::Case3, snap_intensity(f, t).is_ok());
    }

    #[test]
    fn boundaries_belong_to_case_three(t in 0.01f64..0.49) {
        prop_assert_eq!(classify_case(t, 0.0, t).0, Case::Case3);
        prop_assert_eq!(classify_case(1.0 - t, 0.0, t).0, Case::Case3);
    }
}

#[test]
fn lower_threshold_never_lowers_the_rate() {
    let ds = default_dataset();
    let det = fit_detector(DetectorKind::Fourier, &ds.train, DEFAULT_PERCENTILE).unwrap();
    let mut prev = 0.0;
    for k in 0..20 {
        let mut d = det.clone();
        d.threshold = det.threshold * (2.0 - 0.1 * k as f64);
        let r = detection_rate(&d, &ds.test).unwrap();
        assert!(r >= prev);
        prev = r;
    }
}
