//! Invariants of the adapter, baselines, quantizer and benchmark streams.

use std::sync::OnceLock;

use btfl_core::adapter::{hbu_update, AdapterConfig, BtflAdapter, EntropyBaselines, Event, HbuState};
use btfl_core::baselines::{fixed_mix, global_only, local_only, oracle_mix};
use btfl_core::bayes::{expected_interpolation_coefficient, softmax, BetaParams, QuadratureConfig};
use btfl_core::bench::{
    build_btgfl_streams, complement_distribution, evaluate, BenchParams, ShiftOperator, ShiftSet, StreamTag,
};
use btfl_core::dle::{aggregate_dles, fit_dle, fsq, DleModel, FeatureVector, FSQ_THRESHOLD};
use btfl_core::fedsim::{run_federation, Federation, FederationParams, TaskParams, TrainingConfig};
use btfl_core::method::MethodSpec;
use btfl_core::baselines::FedTheLiteConfig;
use proptest::prelude::*;

fn logits(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-8.0..8.0f64, k)
}

fn dle(d: usize) -> impl Strategy<Value = DleModel> {
    prop::collection::vec(0.01..0.99f64, d).prop_map(|p| DleModel::new(p, 50).unwrap())
}

fn event() -> impl Strategy<Value = Event> {
    prop_oneof![Just(Event::Ind), Just(Event::Exd), Just(Event::None)]
}

fn small_federation() -> &'static Federation {
    static FED: OnceLock<Federation> = OnceLock::new();
    FED.get_or_init(|| {
        let task = TaskParams::default();
        let fed = FederationParams {
            n_clients: 4,
            concentration: 0.1,
            train_samples: 200,
        };
        let training = TrainingConfig {
            rounds: 5,
            personal_epochs: 5,
            ..TrainingConfig::default()
        };
        run_federation(&task, &fed, &training, 3).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adapter_output_is_convex_mix(
        local in dle(12),
        global in dle(12),
        stream in prop::collection::vec((prop::collection::vec(0.0..2.0f64, 12), logits(5), logits(5)), 1..40),
        h_l in 0.05..2.0f64,
        h_g in 0.05..2.0f64,
    ) {
        let mut a = BtflAdapter::new(local, global, EntropyBaselines::new(h_l, h_g), AdapterConfig::default()).unwrap();
        for (z, l, g) in &stream {
            let out = a.adapt(&FeatureVector::new(z.clone()).unwrap(), l, g).unwrap();
            prop_assert!((0.0..=1.0).contains(&out.e));
            let (yl, yg) = (softmax(l), softmax(g));
            for i in 0..5 {
                let (lo, hi) = (yl[i].min(yg[i]), yl[i].max(yg[i]));
                prop_assert!(out.y_int[i] >= lo - 1e-12 && out.y_int[i] <= hi + 1e-12);
            }
            let s: f64 = out.y_int.as_slice().iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(out.tau_hat > 0.0 && out.tau_hat.is_finite());
        }
    }

    #[test]
    fn pruning_keeps_prior_bounded(lambda in 3.0..20.0f64, events in prop::collection::vec(event(), 0..500)) {
        let mut s = HbuState::fresh(lambda).unwrap();
        for ev in events {
            let before = s.prior;
            s = hbu_update(&s, ev);
            prop_assert!(s.prior.alpha >= 1.0 && s.prior.beta >= 1.0);
            prop_assert!(s.prior.alpha + s.prior.beta <= lambda + 1e-12);
            if ev == Event::None {
                prop_assert_eq!(s.prior, before);
            }
        }
    }

    #[test]
    fn e_decreases_with_tau(a in 1.0..16.0f64, b in 1.0..16.0f64, t1 in -10.0..10.0f64, dt in 0.0..5.0f64) {
        let p = BetaParams::new(a, b).unwrap();
        let cfg = QuadratureConfig::default();
        let e1 = expected_interpolation_coefficient(&p, t1.exp(), &cfg).unwrap();
        let e2 = expected_interpolation_coefficient(&p, (t1 + dt).exp(), &cfg).unwrap();
        prop_assert!(e2 <= e1 + 1e-10);
    }

    #[test]
    fn fixed_mix_is_valid(l in logits(6), g in logits(6), e0 in 0.0..=1.0f64) {
        let y = fixed_mix(&l, &g, e0).unwrap();
        let s: f64 = y.as_slice().iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        prop_assert!(y.as_slice().iter().all(|&p| (0.0..=1.0).contains(&p)));
    }

    #[test]
    fn oracle_dominates_per_sample(l in logits(6), g in logits(6), label in 0usize..6) {
        let (y, chose_global) = oracle_mix(&l, &g, label);
        let (yl, yg) = (local_only(&l), global_only(&g));
        let hit = |p: &btfl_core::bayes::ProbVector| p.argmax() == label;
        prop_assert!(hit(&y) || (!hit(&yl) && !hit(&yg)));
        if hit(&yl) == hit(&yg) {
            prop_assert_eq!(chose_global, yg[label] > yl[label] && !hit(&yl));
            prop_assert!(hit(&yl) || (y[label] >= yl[label] && y[label] >= yg[label]));
        }
    }

    #[test]
    fn fsq_rounds_tanh(z in prop::collection::vec(0.0..4.0f64, 1..50)) {
        let q = fsq(&FeatureVector::new(z.clone()).unwrap());
        for (x, &bit) in z.iter().zip(q.bits()) {
            if (x - FSQ_THRESHOLD).abs() > 1e-12 {
                prop_assert_eq!(bit as f64, x.tanh().round());
            }
        }
    }

    #[test]
    fn dle_fit_is_smoothed_frequency(bits in prop::collection::vec(prop::collection::vec(0u8..2, 8), 1..60)) {
        let samples: Vec<_> = bits
            .iter()
            .map(|b| fsq(&FeatureVector::new(b.iter().map(|&x| x as f64).collect()).unwrap()))
            .collect();
        let m = fit_dle(&samples).unwrap();
        let n = bits.len() as f64;
        for i in 0..8 {
            let zeros = bits.iter().filter(|b| b[i] == 0).count() as f64;
            prop_assert!((m.p[i] - (zeros + 1.0) / (n + 2.0)).abs() < 1e-15);
        }
        let agg = aggregate_dles(&[m.clone(), m.clone()]).unwrap();
        for i in 0..8 {
            prop_assert!((agg.p[i] - m.p[i]).abs() < 1e-15);
        }
    }
}

#[test]
fn complement_avoids_dominant_classes() {
    let mut p = vec![0.0; 10];
    p[0] = 1.0;
    let c = complement_distribution(&btfl_core::bayes::ProbVector::new(p).unwrap());
    assert_eq!(c[0], 0.0);
    for i in 1..10 {
        assert!((c[i] - 1.0 / 9.0).abs() < 1e-15);
    }
    let u = complement_distribution(&btfl_core::bayes::ProbVector::uniform(4));
    assert_eq!(u.as_slice(), &[0.25; 4]);
}

#[test]
fn streams_respect_construction() {
    let fed = small_federation();
    let shifts = ShiftSet::generate(&fed.task, &BenchParams::default(), 9);
    let n = 200;
    for client in &fed.clients {
        let streams = build_btgfl_streams(client, &fed.task, &shifts, n, 17).unwrap();
        assert_eq!(streams.len(), 5);
        let exd = complement_distribution(&client.class_distribution);
        for (s, tag) in streams.iter().zip(StreamTag::ALL) {
            assert_eq!(s.tag, tag);
            assert_eq!(s.samples.len(), n);
            if tag.is_exd() {
                assert!(s.samples.iter().all(|x| exd[x.label] > 0.0));
            }
        }
        let synth = &streams[4];
        for tag in &StreamTag::ALL[..4] {
            assert_eq!(synth.samples.iter().filter(|x| x.source == *tag).count(), n / 4);
        }
        // Shifted streams share labels with their unshifted sibling.
        for (a, b) in [(0, 1), (2, 3)] {
            assert!(streams[a].samples.iter().zip(&streams[b].samples).all(|(x, y)| x.label == y.label));
            assert!(streams[a].samples.iter().zip(&streams[b].samples).any(|(x, y)| x.z != y.z));
        }
        assert_eq!(streams, build_btgfl_streams(client, &fed.task, &shifts, n, 17).unwrap());
    }
}

#[test]
fn null_shift_reproduces_original_stream() {
    let fed = small_federation();
    let null = ShiftSet {
        corruption: ShiftOperator::Corruption { sigma: 0.0 },
        domain: ShiftOperator::identity_domain(fed.task.raw_dim),
    };
    let streams = build_btgfl_streams(&fed.clients[0], &fed.task, &null, 40, 1).unwrap();
    for (a, b) in [(0, 1), (2, 3)] {
        for (x, y) in streams[a].samples.iter().zip(&streams[b].samples) {
            assert_eq!((x.label, &x.z), (y.label, &y.z));
        }
    }
}

#[test]
fn rejects_stream_length_not_divisible_by_four() {
    let fed = small_federation();
    let shifts = ShiftSet::generate(&fed.task, &BenchParams::default(), 0);
    let err = build_btgfl_streams(&fed.clients[0], &fed.task, &shifts, 30, 0).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn oracle_accuracy_dominates_on_every_stream() {
    let fed = small_federation();
    let shifts = ShiftSet::generate(&fed.task, &BenchParams::default(), 2);
    let adapter = AdapterConfig::default();
    let fedthe = FedTheLiteConfig::default();
    for client in &fed.clients {
        for stream in build_btgfl_streams(client, &fed.task, &shifts, 100, 4).unwrap() {
            let acc = |m: MethodSpec| {
                let mut inst = m.instantiate(client, &adapter, &fedthe).unwrap();
                evaluate(inst.as_mut(), client, &stream).unwrap().accuracy
            };
            let oracle = acc(MethodSpec::OracleMix);
            assert!(oracle >= acc(MethodSpec::LocalOnly) && oracle >= acc(MethodSpec::GlobalOnly));
            assert_eq!(acc(MethodSpec::LocalOnly), acc(MethodSpec::LocalOnly));
        }
    }
}

#[test]
fn btfl_trace_is_rerun_identical() {
    let fed = small_federation();
    let client = &fed.clients[1];
    let shifts = ShiftSet::generate(&fed.task, &BenchParams::default(), 2);
    let stream = &build_btgfl_streams(client, &fed.task, &shifts, 100, 4).unwrap()[4];
    let run = || {
        let mut m = MethodSpec::Btfl
            .instantiate(client, &AdapterConfig::default(), &FedTheLiteConfig::default())
            .unwrap();
        evaluate(m.as_mut(), client, stream).unwrap()
    };
    assert_eq!(run(), run());
}
