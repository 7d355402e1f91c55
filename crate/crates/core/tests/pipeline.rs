use std::sync::OnceLock;

use proptest::prelude::*;
use relate_core::attacks::{AttackGroup, AttackKind, AttackSpec};
use relate_core::dataset::{generate_synthetic_dataset, SynthSpec};
use relate_core::detection::segment_bounds;
use relate_core::models::Architecture;
use relate_core::pipeline::scenario::{make_arrival, sibling, BENCHMARK_NOISE};
use relate_core::pipeline::{
    baselines, build_pbd, patterned_replica, run_pipeline, top3, Condition, GridConfig, ModelScore, Objective,
    PbdConfig, RunConfig,
};
use relate_core::similarity::EncoderConfig;
use relate_core::{Dataset, Pbd};

fn small_specs() -> Vec<SynthSpec> {
    (0..3)
        .map(|i| SynthSpec {
            name: format!("small{i}"),
            classes: 3,
            channels: 2,
            length: 32,
            per_class: 40,
            seed: 40 + i,
            variant: i + 1,
            noise: BENCHMARK_NOISE,
        })
        .collect()
}

fn small_config() -> PbdConfig {
    PbdConfig {
        grid: GridConfig {
            learning_rates: vec![0.01],
            widths: vec![8],
            epochs: 5,
        },
        encoder: {
            let mut e = EncoderConfig::default();
            e.schedule.epochs = 1;
            e
        },
        bootstrap: 2,
        ..PbdConfig::default()
    }
}

fn build() -> Pbd {
    let data: Vec<Dataset> = small_specs()
        .iter()
        .map(|s| generate_synthetic_dataset(s).unwrap())
        .collect();
    build_pbd(data, &small_config(), 5).unwrap()
}

fn shared() -> &'static Pbd {
    static PBD: OnceLock<Pbd> = OnceLock::new();
    PBD.get_or_init(build)
}

#[test]
fn pbd_has_one_row_per_model_and_condition() {
    let pbd = shared();
    let clean = pbd.records.iter().filter(|r| r.is_clean()).count();
    let attacked = pbd.records.iter().filter(|r| r.attack.is_some()).count();
    assert_eq!(clean, 3 * 6);
    assert_eq!(attacked, 3 * 6 * 7);
    for d in &pbd.datasets {
        assert_eq!(d.attacked_val.len(), 7);
        assert_eq!(d.embeddings.len(), 8);
        assert_eq!(d.models.len(), d.specs.len());
    }
    assert_eq!(pbd.group_training.len(), 3 * 7 * 3);
}

#[test]
fn pbd_build_is_deterministic_and_round_trips() {
    let pbd = shared();
    let mut again = build();
    // wall-clock timings are the only unseeded fields
    for (a, b) in again.records.iter_mut().zip(&pbd.records) {
        a.seconds = b.seconds;
    }
    assert_eq!(&again, pbd);

    let dir = tempfile::tempdir().unwrap();
    pbd.save(dir.path()).unwrap();
    let loaded = Pbd::load(dir.path()).unwrap();
    assert_eq!(&loaded, pbd);
}

#[test]
fn replicas_reuse_stored_attacks() {
    let d = &shared().datasets[0];
    assert_eq!(patterned_replica(d, &[None; 5], 1).unwrap(), d.data.val);
    let groups = [
        Some(AttackGroup::IterationBased),
        None,
        Some(AttackGroup::OptimizationDecisionBased),
        None,
        None,
    ];
    let replica = patterned_replica(d, &groups, 1).unwrap();
    for ((a, b), g) in segment_bounds(d.data.val.len(), 5).into_iter().zip(groups) {
        match g {
            None => assert_eq!(replica[a..b], d.data.val[a..b]),
            Some(g) => assert!(g
                .attacks()
                .iter()
                .any(|&k| d.attacked(k).unwrap()[a..b] == replica[a..b])),
        }
    }
}

#[test]
fn end_to_end_runs_are_consistent_and_reproducible() {
    let pbd = shared();
    let spec = sibling(&small_specs()[1], 3);
    let attacker = pbd.datasets[1].spec(pbd.datasets[1].reference).unwrap().clone();
    for cond in [
        Condition::Clean,
        Condition::Attack(AttackSpec::new(AttackKind::Bim, 0.1)),
    ] {
        let arrival = make_arrival(generate_synthetic_dataset(&spec).unwrap(), cond.clone(), &attacker, 3).unwrap();
        let cfg = RunConfig::default();
        let r = run_pipeline(&arrival, pbd, &cfg).unwrap();
        let obj = r.objective;
        assert_eq!(obj, cond.objective());
        assert!(r.top3.iter().any(|m| m.model == r.winner));
        assert!(!obj.better(r.winner_metric, r.baselines.oracle));
        assert!(!obj.better(r.baselines.worst, r.winner_metric));
        assert!(!obj.better(r.baselines.random_mean, r.baselines.oracle));
        assert_eq!(r.zoo.len(), pbd.dataset(&r.chosen_dataset).unwrap().specs.len());

        let again = run_pipeline(&arrival, pbd, &cfg).unwrap();
        assert_eq!(
            serde_json::to_string(&r).unwrap(),
            serde_json::to_string(&again).unwrap()
        );
    }
}

fn score(model: Architecture, score: f64, f1: f64) -> ModelScore {
    ModelScore { model, score, f1 }
}

#[test]
fn top3_breaks_ties_by_f1_then_zoo_order() {
    use Architecture::*;
    let rows = [
        score(Mlp, 0.9, 0.5),
        score(Linear, 0.9, 0.5),
        score(FcnS, 0.9, 0.7),
        score(TcnLite, 0.2, 0.9),
    ];
    let r = top3(&rows, Objective::Accuracy).unwrap();
    let order: Vec<_> = r.models.iter().map(|m| m.model).collect();
    assert_eq!(order, vec![FcnS, Linear, Mlp]);
    let r = top3(&rows, Objective::Asr).unwrap();
    assert_eq!(r.models[0].model, TcnLite);
    let r = top3(&rows[..2], Objective::Accuracy).unwrap();
    assert!(r.warning);
    assert!(top3(&[], Objective::Accuracy).is_err());
}

proptest! {
    #[test]
    fn baselines_are_ordered(metrics in prop::collection::vec(0.0f64..=1.0, 1..8), seed in 0u64..1000) {
        for obj in [Objective::Accuracy, Objective::Asr] {
            let b = baselines(&metrics, obj, 200, seed).unwrap();
            // the random mean is a convex combination of the metrics
            let (lo, hi) = (b.oracle.min(b.worst), b.oracle.max(b.worst));
            prop_assert!(b.random_mean >= lo - 1e-12 && b.random_mean <= hi + 1e-12);
            prop_assert!(!obj.better(b.worst, b.oracle));
            prop_assert!(metrics.contains(&b.oracle) && metrics.contains(&b.worst));
        }
    }
}
