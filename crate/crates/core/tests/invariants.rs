use proptest::prelude::*;

use noisysgd::data::{Label, LabelSet};
use noisysgd::linalg::{Matrix, Vector};
use noisysgd::loss::SurrogateLoss;
use noisysgd::model::{dead_neurons, typical_active, ActivationKind, ArchSpec, ModeKind, Network};
use noisysgd::netfile;
use noisysgd::rng::RngStream;
use noisysgd::theorems::basis::{simulate_basis, Progress};
use noisysgd::theorems::digits::associate;
use noisysgd::theorems::{check_theorem3, decay_constant, expected_decay_rate, Thm3Params};
use noisysgd::train::{corrupt_label, sgd_step, train, Budget, NoiseSpec, Schedule, TrainConfig};
use noisysgd::data::Distribution;
use noisysgd::loss::TargetSpec;

fn mode() -> impl Strategy<Value = ModeKind> {
    prop_oneof![
        Just(ModeKind::WithBias),
        Just(ModeKind::AugmentedInput),
        Just(ModeKind::Plain),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decay_rate_is_even_and_bounded(log_sigma in -6.0f64..3.0, ratio in -20.0f64..20.0) {
        let sigma = log_sigma.exp();
        let mu = ratio * sigma;
        let r = expected_decay_rate(sigma, mu).unwrap();
        prop_assert!(r < -decay_constant() * sigma.hypot(mu));
        prop_assert_eq!(r, expected_decay_rate(sigma, -mu).unwrap());
    }

    #[test]
    fn pos_neg_sets_only_shrink(k in 1usize..8, d in 1usize..6, h in 0.001f64..0.3, seed in any::<u64>()) {
        let mut rng = RngStream::new(seed, 0);
        let w0 = Matrix::new(2 * k, d, (0..2 * k * d).map(|_| rng.draw_uniform(-1.0, 1.0).unwrap()).collect()).unwrap();
        let run = simulate_basis(&w0, h, seed, 20_000, |p: &Progress| p.settled(4, 10 * d as u64)).unwrap();
        prop_assert_eq!(run.history.nesting_violation(), None);
        prop_assert_eq!(run.cross_column_changes, 0);
    }

    #[test]
    fn small_rate_basis_runs_end_below_two_kh(k in 2usize..10, d in 1usize..6, seed in 0u64..1000) {
        let mut p = Thm3Params::new(k, d, 0.01);
        p.seed = seed;
        p.runs = 1;
        let report = check_theorem3(&p).unwrap();
        prop_assert!(report.passed(), "{}", report);
    }

    #[test]
    fn network_files_round_trip(d in 1usize..6, w in 1usize..6, depth in 1usize..3, m in mode(), seed in any::<u64>()) {
        let spec = ArchSpec {
            input_dim: d,
            hidden: vec![w; depth],
            output_width: 1,
            activation: ActivationKind::Relu,
            mode: m,
        };
        let net = Network::<f64>::init_uniform(&spec, 1.5, &mut RngStream::new(seed, 1)).unwrap();
        let back: Network<f64> = netfile::from_bytes(&netfile::to_bytes(&net)).unwrap();
        prop_assert_eq!(back, net);
    }

    #[test]
    fn corrupted_labels_stay_in_the_label_set(p in 0.0f64..=1.0, classes in 2u8..11, seed in any::<u64>()) {
        let set = LabelSet::Classes(classes);
        let mut rng = RngStream::new(seed, 3);
        for i in 0..50 {
            let y = Label::Class(i % classes);
            let z = corrupt_label(y, NoiseSpec::LabelNoise(p), set, &mut rng);
            prop_assert!(set.contains(z));
            prop_assert_eq!(corrupt_label(y, NoiseSpec::LabelNoise(0.0), set, &mut rng), y);
        }
    }

    #[test]
    fn association_rule(hist in proptest::collection::vec(0u64..50, 2..11)) {
        if let Some(c) = associate(&hist, 2.0) {
            let c = c as usize;
            prop_assert!(hist[c] > 0);
            for (i, &v) in hist.iter().enumerate() {
                if i != c {
                    prop_assert!(hist[c] as f64 >= 2.0 * v as f64);
                }
            }
        } else {
            let max = *hist.iter().max().unwrap();
            let top = hist.iter().filter(|&&v| v == max).count();
            let second = hist.iter().filter(|&&v| v < max).max().copied().unwrap_or(0);
            prop_assert!(max == 0 || top > 1 || (max as f64) < 2.0 * second as f64);
        }
    }

    #[test]
    fn halving_schedule(h in 0.001f64..1.0, epochs in 1u64..5, n in 1u64..100, step in 0u64..10_000) {
        let rate = Schedule::HalveEvery { epochs }.rate(h, step, Some(n));
        prop_assert_eq!(rate, h * 0.5f64.powi((step / (epochs * n)) as i32));
        prop_assert_eq!(Schedule::Constant.rate(h, step, Some(n)), h);
    }

    #[test]
    fn misclassified_step_shrinks_a_plain_neuron(d in 1usize..8, seed in any::<u64>()) {
        // N(x) = V·x with y·N(x) < 0: the hinge-0 step adds h·y·x, and
        // ‖V + h y x‖² = ‖V‖² + 2h y N(x) + h² ‖x‖² < ‖V‖² for small h.
        let mut rng = RngStream::new(seed, 4);
        let v: Vec<f64> = (0..d).map(|_| rng.draw_gaussian()).collect();
        let x: Vec<f64> = (0..d).map(|_| rng.draw_gaussian()).collect();
        let n: f64 = v.iter().zip(&x).map(|(a, b)| a * b).sum();
        prop_assume!(n.abs() > 1e-3);
        let y = -n.signum();
        let mut net = Network::new(
            vec![noisysgd::model::Layer { weight: Matrix::new(1, d, v).unwrap(), bias: None }],
            ActivationKind::Relu,
            noisysgd::model::ArchMode::Plain,
        ).unwrap();
        let before = net.total_weight_norm();
        let h = 1e-3 * n.abs() / x.iter().map(|v| v * v).sum::<f64>();
        sgd_step(&mut net, &Vector::new(x).unwrap(), &TargetSpec::Binary(y), SurrogateLoss::HINGE0, h).unwrap();
        prop_assert!(net.total_weight_norm() < before);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn training_is_a_pure_function_of_the_seed(seed in any::<u64>(), run in 0u64..100, p in 0.0f64..0.5) {
        let spec = ArchSpec {
            input_dim: 4,
            hidden: vec![6],
            output_width: 1,
            activation: ActivationKind::Relu,
            mode: ModeKind::WithBias,
        };
        let mut cfg: TrainConfig<f64> = TrainConfig::new(
            Distribution::HypercubeBoundary { d: 4, eps: 0.3 },
            spec,
            SurrogateLoss::Logistic,
            NoiseSpec::LabelNoise(p),
            0.05,
            Budget::Steps(300),
        );
        cfg.master_seed = seed;
        cfg.run_id = run;
        cfg.metric_every = 100;
        cfg.probe_size = 50;
        let (a, b) = (train(&cfg).unwrap(), train(&cfg).unwrap());
        prop_assert_eq!(&a.network, &b.network);
        prop_assert_eq!(&a.metrics, &b.metrics);
    }

    #[test]
    fn activity_counts_are_consistent(seed in any::<u64>(), w in 1usize..12) {
        let spec = ArchSpec {
            input_dim: 3,
            hidden: vec![w],
            output_width: 1,
            activation: ActivationKind::Relu,
            mode: ModeKind::WithBias,
        };
        let mut rng = RngStream::new(seed, 5);
        let net = Network::<f64>::init_uniform(&spec, 1.0, &mut rng).unwrap();
        let xs: Vec<Vector<f64>> = (0..40)
            .map(|_| Vector::new((0..3).map(|_| rng.draw_gaussian()).collect()).unwrap())
            .collect();
        let active = typical_active(&net, &xs, 0).unwrap();
        let dead = dead_neurons(&net, &xs, 0).unwrap();
        prop_assert!(active <= (w - dead.len()) as f64 + 1e-12);
        prop_assert!(active >= 0.0);
    }
}
