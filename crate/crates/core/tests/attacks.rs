use proptest::prelude::*;
use relate_core::attacks::{
    attack_dataset, attack_samples, attack_success_rate, auto_pgd_traced, bim, boundary_attack, deepfool, elastic_net,
    fgsm, mim, AttackKind, AttackSpec,
};
use relate_core::dataset::{generate_synthetic_dataset, SynthSpec};
use relate_core::models::{train, Architecture, Classifier, Differentiable};
use relate_core::pipeline::scenario::untuned;
use relate_core::scalar::norm_linf;
use relate_core::{Dataset, Sample, TrainedModel};

/// Two-class linear model with logits `[0, w.x + b]`.
struct Binary {
    w: Vec<f64>,
    b: f64,
}

impl Binary {
    fn f(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.b
    }
}

impl Classifier<f64> for Binary {
    fn input_shape(&self) -> (usize, usize) {
        (1, self.w.len())
    }
    fn num_classes(&self) -> usize {
        2
    }
    fn predict(&self, x: &[f64]) -> usize {
        usize::from(self.f(x) > 0.0)
    }
}

impl Differentiable<f64> for Binary {
    fn logits(&self, x: &[f64]) -> Vec<f64> {
        vec![0.0, self.f(x)]
    }
    fn pullback(&self, x: &[f64], cotangent: &dyn Fn(&[f64]) -> Vec<f64>) -> (Vec<f64>, Vec<f64>) {
        let z = self.logits(x);
        let c = cotangent(&z);
        let g = self.w.iter().map(|w| c[1] * w).collect();
        (z, g)
    }
}

/// Label-only model that fails the test if anything asks for gradients.
struct GradientTrap(Binary);

impl Classifier<f64> for GradientTrap {
    fn input_shape(&self) -> (usize, usize) {
        self.0.input_shape()
    }
    fn num_classes(&self) -> usize {
        2
    }
    fn predict(&self, x: &[f64]) -> usize {
        self.0.predict(x)
    }
}

impl Differentiable<f64> for GradientTrap {
    fn logits(&self, _: &[f64]) -> Vec<f64> {
        panic!("decision-based attack read logits")
    }
    fn pullback(&self, _: &[f64], _: &dyn Fn(&[f64]) -> Vec<f64>) -> (Vec<f64>, Vec<f64>) {
        panic!("decision-based attack read gradients")
    }
}

fn sample(values: Vec<f64>, label: usize) -> Sample {
    let n = values.len();
    Sample::new(values, 1, n, label).unwrap()
}

fn default_setup() -> (Dataset, TrainedModel) {
    let ds: Dataset = generate_synthetic_dataset(&SynthSpec::default()).unwrap();
    let model = train(&untuned(Architecture::Mlp), &ds, 0).unwrap();
    (ds, model)
}

fn loss(model: &TrainedModel, s: &Sample) -> f64 {
    model.loss_and_gradient(s, s.label).unwrap().0
}

fn diff(a: &Sample, b: &Sample) -> Vec<f64> {
    a.values().iter().zip(b.values()).map(|(p, q)| p - q).collect()
}

#[test]
fn fgsm_flips_a_linear_model_inside_the_margin() {
    let w = vec![0.5, -1.0, 2.0, 0.25];
    let model = Binary { w: w.clone(), b: 0.0 };
    let eps = 0.1;
    let l1: f64 = w.iter().map(|v| v.abs()).sum();
    // f(x) = -0.6 eps ||w||_1: class 0, margin below the budget
    let x = sample(vec![0.0, 0.6 * eps * l1, 0.0, 0.0], 0);
    assert_eq!(model.predict(x.values()), 0);
    let adv = fgsm(&model, &x, 0, eps).unwrap();
    assert!((model.f(adv.values()) - 0.4 * eps * l1).abs() < 1e-12);
    assert_eq!(model.predict(adv.values()), 1);
}

#[test]
fn zero_budget_is_identity() {
    let (ds, model) = default_setup();
    let s = &ds.val[0];
    assert_eq!(&fgsm(&model, s, s.label, 0.0).unwrap(), s);
    let out = attack_samples(&model, &ds.val, &AttackSpec::new(AttackKind::Fgsm, 0.0), 1).unwrap();
    assert_eq!(out, ds.val);
}

#[test]
fn single_step_bim_is_fgsm_and_zero_momentum_mim_is_bim() {
    let (ds, model) = default_setup();
    for s in ds.val.iter().take(8) {
        assert_eq!(
            bim(&model, s, s.label, 0.1, 1).unwrap(),
            fgsm(&model, s, s.label, 0.1).unwrap()
        );
        assert_eq!(
            mim(&model, s, s.label, 0.1, 10, 0.0).unwrap(),
            bim(&model, s, s.label, 0.1, 10).unwrap()
        );
        assert_eq!(
            mim(&model, s, s.label, 0.1, 10, 1.0).unwrap(),
            mim(&model, s, s.label, 0.1, 10, 1.0).unwrap()
        );
    }
}

#[test]
fn fgsm_uses_the_whole_budget_where_the_gradient_is_nonzero() {
    let (ds, model) = default_setup();
    for s in ds.val.iter().take(8) {
        let (_, g) = model.loss_and_ascent_direction(s.values(), s.label);
        let adv = fgsm(&model, s, s.label, 0.1).unwrap();
        for (d, gi) in diff(&adv, s).iter().zip(&g) {
            if *gi != 0.0 {
                assert!((d.abs() - 0.1).abs() < 1e-12);
            } else {
                assert_eq!(*d, 0.0);
            }
        }
    }
}

#[test]
fn zero_gradient_leaves_input_unchanged() {
    let model = Binary {
        w: vec![0.0; 5],
        b: -1.0,
    };
    let x = sample(vec![0.3, -0.2, 1.0, 0.0, 2.0], 0);
    assert_eq!(mim(&model, &x, 0, 0.1, 10, 1.0).unwrap(), x);
    assert_eq!(bim(&model, &x, 0, 0.1, 10).unwrap(), x);
}

#[test]
fn iterative_attacks_reach_higher_loss() {
    let (ds, model) = default_setup();
    let pool: Vec<&Sample> = ds.val.iter().chain(&ds.test).collect();
    let (mut bim_wins, mut apgd_wins) = (0, 0);
    for s in &pool {
        let f = loss(&model, &fgsm(&model, s, s.label, 0.1).unwrap());
        let b = loss(&model, &bim(&model, s, s.label, 0.1, 10).unwrap());
        let trace = auto_pgd_traced(&model, s, s.label, 0.1, 10).unwrap();
        let max = trace.losses.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(trace.best_loss, max);
        assert!((loss(&model, &trace.best) - trace.best_loss).abs() < 1e-9);
        bim_wins += usize::from(b >= f);
        apgd_wins += usize::from(trace.best_loss >= b);
    }
    let n = pool.len() as f64;
    assert!(bim_wins as f64 / n >= 0.8, "bim {bim_wins}/{n}");
    assert!(apgd_wins as f64 / n >= 0.6, "autopgd {apgd_wins}/{n}");
}

#[test]
fn deepfool_matches_the_closed_form_step() {
    let model = Binary {
        w: vec![1.0, -2.0, 0.5],
        b: 0.3,
    };
    let x = sample(vec![-1.0, 0.5, 0.2], 0);
    let f = model.f(x.values());
    assert!(f < 0.0);
    let wn2: f64 = model.w.iter().map(|v| v * v).sum();
    let out = deepfool(&model, &x, 0, 50).unwrap();
    assert_eq!(out.steps, 1);
    assert!(out.adversarial);
    for ((a, x0), w) in out.sample.values().iter().zip(x.values()).zip(&model.w) {
        let expected = x0 - 1.02 * f * w / wn2;
        assert!((a - expected).abs() < 1e-6);
    }
}

#[test]
fn deepfool_leaves_misclassified_input_alone() {
    let model = Binary {
        w: vec![1.0, 1.0],
        b: 0.0,
    };
    let x = sample(vec![1.0, 1.0], 0);
    let out = deepfool(&model, &x, 0, 50).unwrap();
    assert_eq!(out.steps, 0);
    assert_eq!(out.sample, x);
}

#[test]
fn deepfool_is_smaller_than_fgsm() {
    let (ds, model) = default_setup();
    let (mut flipped, mut smaller) = (0, 0);
    for s in ds.val.iter().chain(&ds.test) {
        if model.predict(s.values()) != s.label {
            continue;
        }
        // Compare where FGSM found an adversarial example: the minimal one
        // cannot be much larger.
        let fg = fgsm(&model, s, s.label, 0.1).unwrap();
        let df = deepfool(&model, s, s.label, 50).unwrap();
        if !df.adversarial || model.predict(fg.values()) == s.label {
            continue;
        }
        flipped += 1;
        let l2 = |v: Vec<f64>| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        smaller += usize::from(l2(diff(&df.sample, s)) <= l2(diff(&fg, s)));
    }
    assert!(flipped > 0);
    assert!(smaller as f64 >= 0.7 * flipped as f64, "{smaller}/{flipped}");
}

#[test]
fn elastic_net_is_sparse() {
    let (ds, model) = default_setup();
    let s = &ds.val[0];
    let killed = elastic_net(&model, s, s.label, 100, 10.0).unwrap();
    assert_eq!(&killed.sample, s);
    assert!(!killed.adversarial);

    let zeros = |d: Vec<f64>| d.iter().filter(|v| **v == 0.0).count();
    let (mut flipped, mut sparser) = (0, 0);
    for s in ds.val.iter().chain(&ds.test) {
        let en = elastic_net(&model, s, s.label, 100, 0.01).unwrap();
        if !en.adversarial {
            continue;
        }
        flipped += 1;
        let b = bim(&model, s, s.label, 0.1, 10).unwrap();
        sparser += usize::from(zeros(diff(&en.sample, s)) >= zeros(diff(&b, s)));
    }
    assert!(flipped > 0);
    assert!(sparser as f64 >= 0.8 * flipped as f64, "{sparser}/{flipped}");
}

#[test]
fn boundary_attack_is_black_box_and_monotone() {
    let inner = Binary {
        w: vec![1.0, -0.5, 0.25, 2.0, -1.0, 0.5],
        b: -0.2,
    };
    let x = sample(vec![0.1, 0.4, -0.3, -0.2, 0.6, 0.0], 0);
    assert_eq!(inner.predict(x.values()), 0);
    let trap = GradientTrap(inner);
    let out = boundary_attack(&trap, &x, 0, 500, 17).unwrap();
    assert_ne!(trap.predict(out.sample.values()), 0);
    for it in &out.accepted {
        assert_ne!(trap.predict(it), 0);
    }
    assert!(out.distances.windows(2).all(|w| w[1] <= w[0]));
    assert!(out.distances.last() <= out.distances.first());
    let again = boundary_attack(&trap, &x, 0, 500, 17).unwrap();
    assert_eq!(again.sample, out.sample);

    // also through the dataset-level entry point
    let spec = AttackSpec::new(AttackKind::Boundary, 0.1);
    let res = attack_dataset(&trap, std::slice::from_ref(&x), &spec, 3).unwrap();
    assert!(res[0].adversarial);
}

#[test]
fn asr_counts_changed_predictions() {
    let (ds, model) = default_setup();
    assert_eq!(attack_success_rate(&model, &ds.val, &ds.val).unwrap(), 0.0);
    let adv = attack_samples(&model, &ds.val, &AttackSpec::new(AttackKind::Fgsm, 0.1), 0).unwrap();
    let asr = attack_success_rate(&model, &ds.val, &adv).unwrap();
    let (mut c, mut a) = (ds.val.clone(), adv.clone());
    c.reverse();
    a.reverse();
    assert_eq!(attack_success_rate(&model, &c, &a).unwrap(), asr);
    assert!(attack_success_rate(&model, &ds.val, &adv[1..]).is_err());
}

#[test]
fn stronger_budget_succeeds_more_often() {
    let (ds, model) = default_setup();
    let asr = |eps| {
        let adv = attack_samples(&model, &ds.test, &AttackSpec::new(AttackKind::Fgsm, eps), 0).unwrap();
        attack_success_rate(&model, &ds.test, &adv).unwrap()
    };
    assert!(asr(0.1) > asr(0.01));
}

fn linear_case() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
    (2usize..24).prop_flat_map(|n| {
        (
            prop::collection::vec(-3.0f64..3.0, n),
            prop::collection::vec(-3.0f64..3.0, n),
            0.0f64..1.0,
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_one_attacks_respect_the_budget((w, x, eps) in linear_case()) {
        let model = Binary { w, b: 0.1 };
        let s = sample(x, 0);
        for adv in [
            fgsm(&model, &s, 0, eps).unwrap(),
            bim(&model, &s, 0, eps, 10).unwrap(),
            mim(&model, &s, 0, eps, 10, 1.0).unwrap(),
            auto_pgd_traced(&model, &s, 0, eps, 10).unwrap().best,
        ] {
            prop_assert!(norm_linf(&diff(&adv, &s)) <= eps + 1e-9);
        }
    }
}
