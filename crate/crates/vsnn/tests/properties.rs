//! Property tests for the numeric invariants that unit fixtures cannot
//! cover exhaustively.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vsnn::encoding::{encode_rate, EncoderSpec};
use vsnn::metrics::{compute_energy_ratio, compute_nmse, Activity, EnergySegment};
use vsnn::neuron::{
    lif_step, smoothed_gate, smoothed_gate_grad, surrogate_scalar, Activation, NeuronLayerState,
    SpikingNeuronConfig,
};
use vsnn::oracle::ref_matmul;
use vsnn::Tensor;

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, len..=len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matmul_matches_naive_reference(
        m in 1usize..5, k in 1usize..5, n in 1usize..5,
        seed in 0u64..1000,
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Tensor::new(vec![m, k], (0..m * k).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let b = Tensor::new(vec![k, n], (0..k * n).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
        let fast = a.matmul(&b).unwrap();
        let slow = ref_matmul(&a, &b).unwrap();
        for (x, y) in fast.data().iter().zip(slow.data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn reshape_preserves_data(data in finite_vec(12)) {
        let t = Tensor::new(vec![3, 4], data.clone()).unwrap();
        let r = t.reshape(&[2, 6]).unwrap().reshape(&[12]).unwrap();
        prop_assert_eq!(r.data(), &data[..]);
    }

    #[test]
    fn stack_then_index_roundtrips(rows in prop::collection::vec(finite_vec(5), 1..6)) {
        let parts: Vec<Tensor> = rows.iter().cloned().map(Tensor::from_vec).collect();
        let stacked = Tensor::stack(&parts).unwrap();
        for (i, row) in rows.iter().enumerate() {
            let picked = stacked.index_axis0(i).unwrap();
            prop_assert_eq!(picked.data(), &row[..]);
        }
    }

    #[test]
    fn rate_encoding_is_binary_and_seeded(seed in 0u64..1000, p in 0.0..1.0f64) {
        let input = Tensor::new(vec![4, 3], vec![p; 12]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = encode_rate(&input, 7, &mut rng).unwrap();
        prop_assert!(a.data().iter().all(|&v| v == 0.0 || v == 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = encode_rate(&input, 7, &mut rng).unwrap();
        prop_assert_eq!(a.data(), b.data());
    }

    #[test]
    fn direct_encoding_repeats_the_input(data in finite_vec(6), n_sts in 1usize..5) {
        let input = Tensor::new(vec![2, 3], data).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = EncoderSpec::Direct.encode(&input, n_sts, &mut rng).unwrap();
        prop_assert_eq!(enc.shape()[0], n_sts);
        for t in 0..n_sts {
            let step = enc.index_axis0(t).unwrap();
            prop_assert_eq!(step.data(), input.data());
        }
    }

    #[test]
    fn nmse_of_truth_is_zero_and_null_is_one(data in finite_vec(8)) {
        prop_assume!(data.iter().any(|v| v.abs() > 1e-6));
        let t = Tensor::new(vec![4, 2], data).unwrap();
        prop_assert!(compute_nmse(&t, &t).unwrap().abs() < 1e-15);
        let zero = Tensor::zeros(&[4, 2]);
        prop_assert!((compute_nmse(&zero, &t).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn energy_ratio_stays_in_unit_interval(
        acts in prop::collection::vec(0.0..100.0f64, 1..5),
        n_sts in 1usize..6,
    ) {
        let segs: Vec<EnergySegment> = acts
            .iter()
            .enumerate()
            .map(|(i, &s)| EnergySegment {
                layer: format!("A{i}"),
                n_nodes: (i + 2) as f64,
                mean_targets: 7.0,
                activity: Activity::Spiking(s),
            })
            .collect();
        let er = compute_energy_ratio(&segs, n_sts).unwrap();
        prop_assert!((0.0..=1.0).contains(&er));
        let full: Vec<EnergySegment> = segs
            .iter()
            .map(|s| EnergySegment { activity: Activity::Spiking(100.0), ..s.clone() })
            .collect();
        prop_assert!((compute_energy_ratio(&full, n_sts).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn smoothed_gate_is_a_valid_sigmoid(x in -5.0..5.0f64) {
        let k = 25.0;
        let s = smoothed_gate(x, k);
        prop_assert!((0.0..=1.0).contains(&s));
        // derivative is half the slope times the surrogate, and positive
        let d = smoothed_gate_grad(x, k);
        prop_assert!((d - 0.5 * k * surrogate_scalar(x, k)).abs() < 1e-15);
        prop_assert!(d > 0.0);
        let h = 1e-6;
        let fd = (smoothed_gate(x + h, k) - smoothed_gate(x - h, k)) / (2.0 * h);
        prop_assert!((d - fd).abs() < 1e-4);
    }

    #[test]
    fn lif_membrane_stays_below_threshold_after_each_step(
        zs in prop::collection::vec(-2.0..2.0f64, 1..20),
        beta in 0.0..1.0f64,
        threshold in 0.01..1.5f64,
    ) {
        let cfg = SpikingNeuronConfig {
            beta,
            threshold,
            surrogate_slope: 25.0,
            sigma: Activation::Linear,
        };
        let mut state = NeuronLayerState::zeros(&[1]);
        for &z in &zs {
            let spikes = lif_step(&mut state, &Tensor::from_vec(vec![z]), &cfg).unwrap();
            prop_assert!(spikes.data()[0] == 0.0 || spikes.data()[0] == 1.0);
            // firing resets, so the stored membrane is always subthreshold
            prop_assert!(state.membrane.data()[0] < threshold);
        }
    }
}
