//! Acceptance gate: one test per runtime tier, each printing a PASS/FAIL
//! line per criterion and asserting at the end. The main gate runs at
//! desk scale (about 3 hours); the full MNIST protocol is `#[ignore]`d
//! because it needs the complete 60k-digit training set and hours of
//! compute.
//!
//! Two criteria are known to fail on this implementation and are asserted
//! as written rather than weakened: the 9-feature per-seed win count over
//! the ANN baseline (criterion 6; the ANN trains too well here) and the
//! 1-feature energy-ratio band (criterion 8; activity has not decayed
//! into the band after 1000 epochs). The README has the details.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vsnn::config::{DatasetSpec, ExperimentConfig, SweepParameter};
use vsnn::data::Targets;
use vsnn::encoding::encode_direct;
use vsnn::metrics::{compute_energy_ratio, Activity, EnergySegment};
use vsnn::network::{build_network, Architecture, NetworkKind};
use vsnn::neuron::{
    lif_step, vsn_step, Activation, GateMode, NeuronLayerState, SpikingNeuronConfig,
};
use vsnn::oracle::gradient_check;
use vsnn::Tensor;
use vsnn_cli::commands::{run_experiment, RunReport};

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

fn load_config(name: &str) -> (ExperimentConfig, PathBuf) {
    let base = repo_root().join("configs");
    let cfg = ExperimentConfig::from_file(&base.join(format!("{name}.json"))).unwrap();
    (cfg, base)
}

struct Gate {
    failures: Vec<String>,
}

impl Gate {
    fn new() -> Gate {
        Gate {
            failures: Vec::new(),
        }
    }

    fn check(&mut self, criterion: &str, pass: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {criterion}: {detail}");
        if !pass {
            self.failures
                .push(format!("criterion {criterion}: {detail}"));
        }
    }

    fn finish(self) {
        assert!(
            self.failures.is_empty(),
            "acceptance gate failed:\n{}",
            self.failures.join("\n")
        );
    }
}

/// Max relative gradient error for one small network, production backward
/// vs central finite differences of the smoothed forward.
fn gradcheck_err(arch: &str, kind: NetworkKind, sigma: Activation, n_sts: usize, seed: u64) -> f64 {
    let arch: Architecture = arch.parse().unwrap();
    let neuron = SpikingNeuronConfig {
        beta: 0.9,
        threshold: 0.25,
        surrogate_slope: 25.0,
        sigma,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut net = build_network(
        &arch,
        &neuron,
        kind,
        n_sts,
        &mut rng,
        GateMode::Smoothed,
        false,
    )
    .unwrap();
    let batch = 3usize;
    let shape: Vec<usize> = std::iter::once(batch)
        .chain(arch.input_shape().iter().copied())
        .collect();
    let n: usize = shape.iter().product();
    let input = Tensor::new(shape, (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect()).unwrap();
    let train = encode_direct(&input, n_sts).unwrap();
    let width = *net.forward(&train).unwrap().shape().last().unwrap();
    let m = batch * width;
    let targets = Targets::Values(
        Tensor::new(
            vec![batch, width],
            (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap(),
    );
    gradient_check(&mut net, &train, &targets, 12, 1e-5, &mut rng)
        .unwrap()
        .max_rel_err
}

fn criterion_1(gate: &mut Gate) {
    let dense = "I(3)->DL(8)->A1->DL(5)->A2->DL(2)";
    let conv = "I(1,6,6)->CL(2,3)->A1->MP->F->DL(2)";
    let cases = [
        (NetworkKind::Vsnn, Activation::Linear, "VSN-linear"),
        (NetworkKind::Vsnn, Activation::Relu, "VSN-ReLU"),
        (NetworkKind::Snn, Activation::Linear, "LIF"),
    ];
    let mut worst = 0.0f64;
    let mut seed = 1;
    for (kind, sigma, _) in cases {
        for n_sts in [1usize, 3, 5] {
            for arch in [dense, conv] {
                worst = worst.max(gradcheck_err(arch, kind, sigma, n_sts, seed));
                seed += 1;
            }
        }
    }
    gate.check(
        "1",
        worst < 1e-4,
        format!("gradient check over 18 neuron/STS/layout cases, max rel err {worst:.3e}"),
    );
}

fn criterion_2(gate: &mut Gate) {
    // beta=0.5, T=1.0, constant drive 0.6: M walks 0.6, 0.9, 1.05 (fire,
    // reset), 0.6, 0.9, 1.05 (fire), worked through the recurrences by hand
    let cfg = SpikingNeuronConfig {
        beta: 0.5,
        threshold: 1.0,
        surrogate_slope: 25.0,
        sigma: Activation::Linear,
    };
    let z = Tensor::from_vec(vec![0.6]);
    let mut state = NeuronLayerState::zeros(&[1]);
    let mut lif_out = Vec::new();
    for _ in 0..6 {
        lif_out.push(lif_step(&mut state, &z, &cfg).unwrap().data()[0]);
    }
    let lif_ok = lif_out == [0.0, 0.0, 1.0, 0.0, 0.0, 1.0];

    // same drive through a VSN: spikes gate the activation, y = sigma(z*s)
    let mut state = NeuronLayerState::zeros(&[1]);
    let mut vsn_out = Vec::new();
    for _ in 0..6 {
        vsn_out.push(vsn_step(&mut state, &z, &cfg).unwrap().data()[0]);
    }
    let vsn_ok = vsn_out == [0.0, 0.0, 0.6, 0.0, 0.0, 0.6];

    // leak check: beta=0 forgets, so 0.6 never reaches the threshold
    let cfg0 = SpikingNeuronConfig { beta: 0.0, ..cfg };
    let mut state = NeuronLayerState::zeros(&[1]);
    let mut never = true;
    for _ in 0..6 {
        never &= lif_step(&mut state, &z, &cfg0).unwrap().data()[0] == 0.0;
    }
    gate.check(
        "2",
        lif_ok && vsn_ok && never,
        format!("hand-evaluated recurrences; LIF {lif_out:?}, VSN {vsn_out:?}"),
    );
}

fn run_mnist_desk() -> RunReport {
    let (mut cfg, base) = load_config("mnist_vsnn1");
    cfg.training.epochs = 100;
    cfg.seeds = vec![1, 2, 3];
    if let DatasetSpec::Mnist {
        n_train, n_test, ..
    } = &mut cfg.dataset
    {
        *n_train = 5000;
        *n_test = Some(2000);
    }
    run_experiment(&cfg, &base).unwrap().report
}

fn criterion_3(gate: &mut Gate, report: &RunReport) {
    gate.check(
        "3",
        report.metric_mean >= 92.0 && report.n_failed_trials == 0,
        format!(
            "MNIST VSNN-1 on 5000 TS, 100 epochs, 3 seeds: {:.2} ± {:.2}% (target >= 92%)",
            report.metric_mean, report.metric_std
        ),
    );
}

fn run_feynman1() -> RunReport {
    let (mut cfg, base) = load_config("feynman1_vsnn1");
    cfg.training.epochs = 1000;
    cfg.seeds = vec![1];
    if let DatasetSpec::Synthetic {
        n_samples, n_train, ..
    } = &mut cfg.dataset
    {
        *n_samples = 8000;
        *n_train = 4000;
    }
    run_experiment(&cfg, &base).unwrap().report
}

fn criterion_5(gate: &mut Gate, report: &RunReport) {
    gate.check(
        "5",
        report.metric_mean <= 5e-3 && report.n_failed_trials == 0,
        format!(
            "1-feature VSNN-1 on 4000 TS, 1000 epochs: NMSE {:.3e} (target <= 5e-3)",
            report.metric_mean
        ),
    );
}

fn run_feynman9(kind_cfg: &str) -> RunReport {
    let (mut cfg, base) = load_config(kind_cfg);
    cfg.training.epochs = 1000;
    cfg.seeds = vec![1, 2, 3, 4, 5];
    if let DatasetSpec::Synthetic {
        n_samples, n_train, ..
    } = &mut cfg.dataset
    {
        *n_samples = 8000;
        *n_train = 5000;
    }
    run_experiment(&cfg, &base).unwrap().report
}

fn criterion_6(gate: &mut Gate, vsnn: &RunReport, ann: &RunReport) {
    let wins = vsnn
        .trials
        .iter()
        .zip(&ann.trials)
        .filter(|(v, a)| match (v.metric, a.metric) {
            (Some(v), Some(a)) => v < a,
            _ => false,
        })
        .count();
    gate.check(
        "6",
        vsnn.metric_mean <= 2e-3 && wins >= 3,
        format!(
            "9-feature VSNN-1-ReLU NMSE {:.3e} (target <= 2e-3), beats ANN ({:.3e}) in {wins}/5 seeds",
            vsnn.metric_mean, ann.metric_mean
        ),
    );
}

fn criterion_7(gate: &mut Gate, reports: &[&RunReport], feynman9: &RunReport) {
    let mut all_sparse = true;
    let mut max_seen = 0.0f64;
    for r in reports {
        for (_, s) in &r.s_tilde_mean {
            all_sparse &= *s < 100.0;
            max_seen = max_seen.max(*s);
        }
    }
    let hidden: Vec<f64> = feynman9.s_tilde_mean.iter().map(|(_, s)| *s).collect();
    let in_band = !hidden.is_empty() && hidden.iter().all(|s| (5.0..=60.0).contains(s));
    gate.check(
        "7",
        all_sparse && in_band,
        format!(
            "every spiking layer under 100% (max {max_seen:.2}%); 9-feature hidden layers {:?} within [5, 60]",
            hidden.iter().map(|s| format!("{s:.1}")).collect::<Vec<_>>()
        ),
    );
}

/// The energy band tracks the full 500-epoch protocol, where spiking
/// activity has settled well below the 100-epoch desk run's level; one
/// seed keeps it affordable.
fn run_mnist_energy() -> RunReport {
    let (mut cfg, base) = load_config("mnist_vsnn1");
    cfg.training.epochs = 500;
    cfg.seeds = vec![1];
    if let DatasetSpec::Mnist {
        n_train, n_test, ..
    } = &mut cfg.dataset
    {
        *n_train = 5000;
        *n_test = Some(2000);
    }
    run_experiment(&cfg, &base).unwrap().report
}

fn criterion_8(gate: &mut Gate, mnist: &RunReport, feynman1: &RunReport) {
    let mnist_er = mnist.energy_ratio.unwrap_or(f64::NAN);
    let f1_er = feynman1.energy_ratio.unwrap_or(f64::NAN);
    // property: forcing 100% activity makes the ratio exactly 1, no training
    let segs: Vec<EnergySegment> = [(784usize, 200usize), (200, 200), (200, 10)]
        .iter()
        .enumerate()
        .map(|(i, &(n, t))| EnergySegment {
            layer: format!("A{i}"),
            n_nodes: n as f64,
            mean_targets: t as f64,
            activity: Activity::Spiking(100.0),
        })
        .collect();
    let saturated = compute_energy_ratio(&segs, 3).unwrap();
    gate.check(
        "8",
        (0.70..=0.90).contains(&mnist_er)
            && (0.05..=0.20).contains(&f1_er)
            && saturated == 1.0,
        format!(
            "MNIST E_r {mnist_er:.3} in [0.70, 0.90]; 1-feature E_r {f1_er:.3} in [0.05, 0.20]; E_r at forced 100% activity = {saturated}"
        ),
    );
}

fn criterion_9(gate: &mut Gate) {
    // same budget as the 9-feature benchmark run: the threshold penalty
    // only separates from optimization error once training has converged
    let (mut cfg, base) = load_config("feynman9_threshold_sweep");
    cfg.training.epochs = 1000;
    cfg.seeds = vec![1];
    if let DatasetSpec::Synthetic {
        n_samples, n_train, ..
    } = &mut cfg.dataset
    {
        *n_samples = 8000;
        *n_train = 5000;
    }
    let sweep = cfg.sweep.clone().unwrap();
    assert_eq!(sweep.parameter, SweepParameter::Threshold);
    let mut a1 = Vec::new();
    let mut nmse = Vec::new();
    for &t in &sweep.values {
        let swept = cfg.with_sweep_value(sweep.parameter, t).unwrap();
        let report = run_experiment(&swept, &base).unwrap().report;
        let s = report
            .s_tilde_mean
            .iter()
            .find(|(l, _)| l == "A1")
            .map(|(_, s)| *s)
            .unwrap_or(f64::NAN);
        a1.push(s);
        nmse.push(report.metric_mean);
    }
    let monotone = a1.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    // values are {0.005, 0.01, 0.02, 0.025, 0.05}: compare the ends
    let idx_ref = sweep.values.iter().position(|&v| v == 0.01).unwrap();
    let idx_hi = sweep.values.iter().position(|&v| v == 0.05).unwrap();
    let degraded = nmse[idx_hi] >= 2.0 * nmse[idx_ref];
    gate.check(
        "9",
        monotone && degraded,
        format!(
            "threshold sweep: A1 S\u{0303} {:?} non-increasing = {monotone}; NMSE at T=0.05 is {:.1}x T=0.01",
            a1.iter().map(|s| format!("{s:.1}")).collect::<Vec<_>>(),
            nmse[idx_hi] / nmse[idx_ref]
        ),
    );
}

fn run_quadratic(name: &str) -> RunReport {
    let (mut cfg, base) = load_config(name);
    cfg.training.epochs = 500;
    cfg.seeds = vec![1, 2, 3];
    if let DatasetSpec::Synthetic { n_samples, .. } = &mut cfg.dataset {
        *n_samples = 1200;
    }
    run_experiment(&cfg, &base).unwrap().report
}

fn criterion_10(gate: &mut Gate) {
    let one = run_quadratic("quadratic_vsnn1");
    let five = run_quadratic("quadratic_vsnn5");
    gate.check(
        "10",
        five.metric_mean <= 1.5e-3 && five.metric_mean < one.metric_mean,
        format!(
            "quadratic task: VSNN-5 NMSE {:.3e} (target <= 1.5e-3) vs VSNN-1 {:.3e}",
            five.metric_mean, one.metric_mean
        ),
    );
}

fn criterion_11(gate: &mut Gate) {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("det.json");
    std::fs::write(
        &cfg_path,
        r#"{
  "name": "det",
  "dataset": {"kind": "synthetic", "formula": "quadratic", "n_samples": 600,
              "n_train": 200, "data_seed": 7},
  "network": {"arch": "I(1)->DL(30)->A1->DL(30)->A2->DL(1)", "kind": "VSNN",
              "n_sts": 2, "encoder": "direct"},
  "neuron": {"beta": 0.9, "threshold": 0.15, "surrogate_slope": 25.0,
             "sigma": "linear"},
  "training": {"epochs": 25, "batch_size": 200, "optimizer": {"lr": 1e-3}},
  "seeds": [1, 2]
}
"#,
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_vsnn");
    let mut outs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let status = Command::new(bin)
            .args(["train", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success(), "train run {run} failed");
        outs.push(out);
    }
    let mut identical = true;
    let mut compared = Vec::new();
    for file in [
        "report.json",
        "model.json",
        "loss_seed1.csv",
        "loss_seed2.csv",
        "summary.md",
    ] {
        let a = std::fs::read(outs[0].join(file)).unwrap();
        let b = std::fs::read(outs[1].join(file)).unwrap();
        identical &= a == b;
        compared.push(file);
    }
    gate.check(
        "11",
        identical,
        format!("reruns byte-identical across {compared:?}"),
    );
}

fn fashion_quick(gate: &mut Gate) {
    let (cfg, base) = load_config("fashion_vsnn1");
    let images = match &cfg.dataset {
        DatasetSpec::Mnist { images, .. } => base.join(images),
        _ => unreachable!(),
    };
    if !images.exists() {
        println!(
            "SKIP fashion quick check: {} not present (see `vsnn fetch-data --dataset fashion-mnist`)",
            images.display()
        );
        return;
    }
    let mut cfg = cfg;
    cfg.apply_preset(vsnn::config::Preset::Quick).unwrap();
    let report = run_experiment(&cfg, &base).unwrap().report;
    gate.check(
        "fashion-quick",
        report.metric_mean > 75.0,
        format!(
            "Fashion-MNIST quick preset accuracy {:.2}%",
            report.metric_mean
        ),
    );
}

/// Desk-scale acceptance gate. Expect roughly 90 minutes on one core;
/// the 9-feature pair (criterion 6, 1000 epochs x 5 seeds x 2 networks)
/// dominates.
#[test]
fn acceptance_gate() {
    let mut gate = Gate::new();
    criterion_1(&mut gate);
    criterion_2(&mut gate);
    let mnist = run_mnist_desk();
    criterion_3(&mut gate, &mnist);
    let feynman1 = run_feynman1();
    criterion_5(&mut gate, &feynman1);
    let feynman9 = run_feynman9("feynman9_vsnn1_relu");
    let feynman9_ann = run_feynman9("feynman9_ann");
    criterion_6(&mut gate, &feynman9, &feynman9_ann);
    criterion_7(&mut gate, &[&mnist, &feynman1, &feynman9], &feynman9);
    let mnist_energy = run_mnist_energy();
    criterion_8(&mut gate, &mnist_energy, &feynman1);
    criterion_9(&mut gate);
    criterion_10(&mut gate);
    criterion_11(&mut gate);
    fashion_quick(&mut gate);
    gate.finish();
}

/// Full MNIST protocol (criterion 4): 50k training digits, 500 epochs,
/// 5 seeds. Needs the complete MNIST IDX files under data/mnist (the
/// bundled subset holds 10k digits, so this run reports a split error
/// until they are supplied) and several hours of compute.
#[test]
#[ignore]
fn acceptance_full_mnist() {
    let (mut cfg, base) = load_config("mnist_vsnn1");
    cfg.training.epochs = 500;
    cfg.seeds = vec![1, 2, 3, 4, 5];
    if let DatasetSpec::Mnist {
        n_train, n_test, ..
    } = &mut cfg.dataset
    {
        *n_train = 50000;
        *n_test = None;
    }
    let report = run_experiment(&cfg, &base).unwrap().report;
    println!(
        "full MNIST: {:.2} ± {:.2}%, S\u{0303} {:?}",
        report.metric_mean, report.metric_std, report.s_tilde_mean
    );
    assert!(
        (report.metric_mean - 98.05).abs() <= 0.5,
        "accuracy {:.2} outside 98.05 ± 0.5",
        report.metric_mean
    );
    let s: BTreeMap<&str, f64> = report
        .s_tilde_mean
        .iter()
        .map(|(l, v)| (l.as_str(), *v))
        .collect();
    assert!(
        (s["A1"] - 11.65).abs() <= 5.0,
        "A1 S-tilde {} off 11.65 by > 5",
        s["A1"]
    );
    assert!(
        (s["A2"] - 23.23).abs() <= 5.0,
        "A2 S-tilde {} off 23.23 by > 5",
        s["A2"]
    );
}
