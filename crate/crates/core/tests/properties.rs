use dt4ecg::autodiff::{grad, gradcheck_leaves, ops};
use dt4ecg::dsp::{filtfilt, normalize_01, segment, DspConfig};
use dt4ecg::nn::Module;
use dt4ecg::nn::{self, conv_out_len};
use dt4ecg::rng::seeded;
use dt4ecg::sca::ScaModule;
use dt4ecg::train::{MetricsReport, TaskWeights};
use dt4ecg::Tensor;
use proptest::prelude::*;
use rand::Rng;

fn vec_f64(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conv_length_formula(len in 1usize..60, k in 1usize..8, stride in 1usize..4, pad in 0usize..4, cin in 1usize..3) {
        let expected = conv_out_len(len, k, stride, pad);
        let x = Tensor::<f64>::zeros(&[1, cin, len]).unwrap();
        let w = Tensor::<f64>::zeros(&[2, cin, k]).unwrap();
        match nn::conv1d(&x, &w, None, stride, pad) {
            Ok(y) => {
                let to = expected.unwrap();
                prop_assert_eq!(to, (len + 2 * pad - k) / stride + 1);
                prop_assert_eq!(y.shape(), &[1, 2, to]);
            }
            Err(_) => prop_assert!(expected.is_none()),
        }
    }

    #[test]
    fn fan_out_is_linear(x in vec_f64(5), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let leaf = Tensor::param(x.clone(), &[5]).unwrap();
        let f = |v: &Tensor<f64>| ops::sum(&ops::mul(&nn::sigmoid(v), v).unwrap());
        let fx = f(&leaf);
        let both = ops::add(&ops::scale(&fx, a), &ops::scale(&fx, b)).unwrap();
        let g_both = grad(&both, std::slice::from_ref(&leaf)).unwrap().remove(0);
        let g_one = grad(&f(&leaf), std::slice::from_ref(&leaf)).unwrap().remove(0);
        for (p, q) in g_both.iter().zip(&g_one) {
            prop_assert!((p - (a + b) * q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
    }

    #[test]
    fn softmax_rows_sum_to_one_and_ce_matches(logits in vec_f64(12), labels in prop::collection::vec(0usize..4, 3)) {
        let l = Tensor::new(logits.clone(), &[3, 4]).unwrap();
        let p = nn::softmax(&l).unwrap().to_vec();
        for row in p.chunks(4) {
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        let ce = nn::cross_entropy(&l, &labels).unwrap().item();
        let naive = -labels.iter().enumerate().map(|(i, &y)| p[i * 4 + y].ln()).sum::<f64>() / 3.0;
        prop_assert!((ce - naive).abs() < 1e-6);
    }

    #[test]
    fn sca_gates_and_damping(seed in 0u64..1000) {
        let mut rng = seeded(seed, &[]);
        let m = ScaModule::<f64>::new(8, 12, 4, &mut rng).unwrap();
        let x = Tensor::new((0..2 * 8 * 12).map(|_| rng.random_range(-5.0..5.0)).collect(), &[2, 8, 12]).unwrap();
        let tr = m.trace(&x).unwrap();
        prop_assert_eq!(tr.output.shape(), x.shape());
        prop_assert!(tr.alpha.data().iter().all(|&a| a > 0.0 && a < 1.0));
        prop_assert!(tr.beta.data().iter().all(|&b| b > 0.0 && b < 1.0));
        let (xd, od, a, b) = (x.to_vec(), tr.output.to_vec(), tr.alpha.to_vec(), tr.beta.to_vec());
        for bi in 0..2 {
            for c in 0..8 {
                for t in 0..12 {
                    let i = (bi * 8 + c) * 12 + t;
                    let product = xd[i] * a[bi * 8 + c] * b[bi * 12 + t];
                    prop_assert!((od[i] - product).abs() <= 1e-15 * xd[i].abs().max(1.0));
                    prop_assert!(od[i].abs() <= xd[i].abs());
                }
            }
        }
    }

    #[test]
    fn gradnorm_deltas_sum_to_one(g in prop::collection::vec(1e-6f64..1e3, 2..6), alpha in 0.1f64..4.0) {
        let mut w = TaskWeights::new(g.len(), alpha, false);
        let before = w.w.clone();
        let u = w.update(&g).unwrap();
        prop_assert!((u.delta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for ((f, after), b) in u.factors.iter().zip(&w.w).zip(&before) {
            prop_assert!(*f <= 1.0 && *f > 0.0);
            prop_assert!(after <= b);
        }
    }

    #[test]
    fn weighted_recall_is_accuracy(k in 1usize..16, cells in prop::collection::vec(0usize..20, 225)) {
        let confusion: Vec<Vec<usize>> = (0..k).map(|i| cells[i * 15..i * 15 + k].to_vec()).collect();
        prop_assume!(confusion.iter().flatten().sum::<usize>() > 0);
        let m = MetricsReport::from_confusion(confusion).unwrap();
        prop_assert!((m.recall - m.accuracy).abs() < 1e-12);
        for v in [m.accuracy, m.precision, m.recall, m.f1] {
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn filtfilt_is_linear_on_random_signals(x in vec_f64(200), y in vec_f64(200), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let f = DspConfig::default().filter(100.0).unwrap();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
        let lhs = filtfilt(&f, &mix).unwrap();
        let (fx, fy) = (filtfilt(&f, &x).unwrap(), filtfilt(&f, &y).unwrap());
        prop_assert_eq!(lhs.len(), 200);
        for i in 0..200 {
            let rhs = a * fx[i] + b * fy[i];
            prop_assert!((lhs[i] - rhs).abs() <= 1e-9 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn normalize_hits_both_ends(x in prop::collection::vec(-100.0f64..100.0, 2..50)) {
        let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assume!(hi > lo);
        let n = normalize_01(&x);
        prop_assert_eq!(n.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
        prop_assert_eq!(n.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
    }

    #[test]
    fn segments_cover_consecutive_windows(len in 0usize..2000, window in 1usize..400) {
        let x: Vec<f64> = (0..len).map(|i| i as f64).collect();
        let s = segment(&x, window).unwrap();
        prop_assert_eq!(s.len(), len / window);
        for (i, w) in s.iter().enumerate() {
            prop_assert_eq!(w[0], (i * window) as f64);
            prop_assert_eq!(w.len(), window);
        }
    }
}

#[test]
fn sca_gradcheck_small_block() {
    for seed in 0..10 {
        let mut rng = seeded(seed, &[5]);
        let m = ScaModule::<f64>::new(4, 10, 4, &mut rng).unwrap();
        let x = Tensor::param(
            (0..80).map(|_| rng.random_range(-1.0..1.0)).collect(),
            &[2, 4, 10],
        )
        .unwrap();
        let mut leaves = vec![x.clone()];
        leaves.extend(m.parameters());
        let r = gradcheck_leaves(|| Ok(ops::sum(&m.forward(&x)?)), &leaves, 1e-5, 1e-4).unwrap();
        assert!(r.passed, "seed {seed}: {r:?}");
    }
}
