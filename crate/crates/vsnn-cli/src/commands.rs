//! Subcommand implementations.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use vsnn::config::{ExperimentConfig, Preset, SweepSpec};
use vsnn::data::Targets;
use vsnn::encoding::encode_direct;
use vsnn::error::{Error, Result};
use vsnn::metrics::compute_energy_ratio;
use vsnn::network::{build_from_spec, build_network, Architecture, NetworkKind, SequentialNetwork};
use vsnn::neuron::{Activation, GateMode, SpikingNeuronConfig};
use vsnn::oracle::gradient_check;
use vsnn::training::{mean_std, run_trial, TrainReport};
use vsnn::Tensor;

use crate::output;

#[derive(Parser)]
#[command(name = "vsnn", version, about = "Spiking network training experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train a network over all configured seeds and write reports.
    Train(TrainArgs),
    /// Run the parameter sweep declared in the config.
    Sweep(TrainArgs),
    /// Evaluate a saved model on the configured test split.
    Eval(EvalArgs),
    /// Compute the synaptic energy ratio of a saved model.
    EnergyReport(EvalArgs),
    /// Compare analytic gradients against finite differences.
    Gradcheck(GradcheckArgs),
    /// Prepare datasets under data/.
    FetchData(FetchArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// 'full' runs the config as written, 'quick' applies its overrides.
    #[arg(long, default_value = "full")]
    preset: String,
    /// Override the seed list with 1..=N.
    #[arg(long)]
    seeds: Option<u64>,
    /// Output directory (default runs/<config name>).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    config: PathBuf,
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "full")]
    preset: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Check the architecture from this config instead of the built-in
    /// battery.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Negative control: run the check against a deliberately mismatched
    /// forward. The command must then fail.
    #[arg(long)]
    corrupt: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FetchArgs {
    /// mnist, fashion-mnist, feynman_i_6_2a or feynman_i_9_18.
    #[arg(long)]
    dataset: String,
    /// Directory to place files in.
    #[arg(long, default_value = "data")]
    out: PathBuf,
    /// Sample count for generated datasets.
    #[arg(long, default_value_t = 6000)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    data_seed: u64,
}

pub fn dispatch<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            return Err(Error::Config(e.to_string()));
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            return Ok(());
        }
    };
    match cli.cmd {
        Cmd::Train(a) => cmd_train(a),
        Cmd::Sweep(a) => cmd_sweep(a),
        Cmd::Eval(a) => cmd_eval(a, false),
        Cmd::EnergyReport(a) => cmd_eval(a, true),
        Cmd::Gradcheck(a) => cmd_gradcheck(a),
        Cmd::FetchData(a) => cmd_fetch(a),
    }
}

fn load_config(
    path: &Path,
    preset: &str,
    seeds: Option<u64>,
) -> Result<(ExperimentConfig, PathBuf)> {
    let preset: Preset = preset.parse()?;
    let mut cfg = ExperimentConfig::from_file(path)?;
    cfg.apply_preset(preset)?;
    if let Some(n) = seeds {
        if n == 0 {
            return Err(Error::Config("--seeds must be at least 1".into()));
        }
        cfg.seeds = (1..=n).collect();
    }
    let base = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok((cfg, base))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SavedModel {
    pub name: String,
    pub arch: String,
    pub kind: NetworkKind,
    pub n_sts: usize,
    pub neuron: SpikingNeuronConfig,
    pub params: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct TrialSummary {
    pub seed: u64,
    pub status: String,
    pub metric: Option<f64>,
    pub final_loss: Option<f64>,
    pub s_tilde: Vec<(String, f64)>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub name: String,
    pub arch: String,
    pub kind: NetworkKind,
    pub n_sts: usize,
    pub encoder: String,
    pub param_count: usize,
    pub metric_name: String,
    pub metric_mean: f64,
    pub metric_std: f64,
    pub n_failed_trials: usize,
    pub s_tilde_mean: Vec<(String, f64)>,
    pub energy_ratio: Option<f64>,
    pub trials: Vec<TrialSummary>,
}

pub struct ExperimentOutcome {
    pub report: RunReport,
    pub first_model: Option<SavedModel>,
    pub loss_curves: Vec<(u64, Vec<f64>)>,
}

fn build_net(cfg: &ExperimentConfig, seed: u64) -> Result<SequentialNetwork> {
    let arch: Architecture = cfg.network.arch.parse()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(build_from_spec(
        &arch,
        &cfg.neuron,
        cfg.network.kind,
        cfg.network.n_sts,
        &mut rng,
    )?
    .with_readout(cfg.network.readout))
}

/// Trains every configured seed and aggregates. Trials that blow up
/// numerically are recorded as failed, not fatal.
pub fn run_experiment(cfg: &ExperimentConfig, base_dir: &Path) -> Result<ExperimentOutcome> {
    let encoder = cfg.network.encoder.resolve()?;
    let (train_ds, test_ds) = cfg.dataset.load(base_dir, cfg.split_seed)?;
    let mut trials = Vec::new();
    let mut loss_curves = Vec::new();
    let mut first_model = None;
    let mut metrics = Vec::new();
    let mut metric_name = String::new();
    let mut s_acc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for &seed in &cfg.seeds {
        let mut net = build_net(cfg, seed)?;
        match run_trial(&mut net, encoder, &train_ds, &test_ds, &cfg.training, seed) {
            Ok(TrainReport {
                seed,
                epoch_losses,
                eval,
                warnings,
            }) => {
                metric_name = eval.metric_name.clone();
                metrics.push(eval.metric);
                for (layer, s) in &eval.s_tilde {
                    s_acc.entry(layer.clone()).or_default().push(*s);
                }
                if first_model.is_none() {
                    first_model = Some(SavedModel {
                        name: cfg.name.clone(),
                        arch: cfg.network.arch.clone(),
                        kind: cfg.network.kind,
                        n_sts: cfg.network.n_sts,
                        neuron: cfg.neuron,
                        params: net.export_params(),
                    });
                }
                trials.push(TrialSummary {
                    seed,
                    status: "ok".into(),
                    metric: Some(eval.metric),
                    final_loss: epoch_losses.last().copied(),
                    s_tilde: eval.s_tilde,
                    warnings,
                });
                loss_curves.push((seed, epoch_losses));
            }
            Err(Error::Numerical(msg)) => {
                trials.push(TrialSummary {
                    seed,
                    status: "failed".into(),
                    metric: None,
                    final_loss: None,
                    s_tilde: Vec::new(),
                    warnings: vec![format!("trial diverged: {msg}")],
                });
            }
            Err(e) => return Err(e),
        }
    }
    if metrics.is_empty() {
        return Err(Error::Numerical(format!(
            "all {} trials of '{}' diverged",
            cfg.seeds.len(),
            cfg.name
        )));
    }
    let (metric_mean, metric_std) = mean_std(&metrics);
    let s_tilde_mean: Vec<(String, f64)> = net_layer_order(cfg)?
        .into_iter()
        .filter_map(|name| s_acc.get(&name).map(|v| (name.clone(), mean_std(v).0)))
        .collect();
    let net = build_net(cfg, cfg.seeds[0])?;
    let energy_ratio = if s_tilde_mean.len() == s_acc.len() && !s_tilde_mean.is_empty() {
        let map: BTreeMap<String, f64> = s_tilde_mean.iter().cloned().collect();
        Some(compute_energy_ratio(
            &net.energy_topology(&map)?,
            cfg.network.n_sts,
        )?)
    } else if cfg.network.kind == NetworkKind::Ann {
        Some(1.0)
    } else {
        None
    };
    let report = RunReport {
        name: cfg.name.clone(),
        arch: cfg.network.arch.clone(),
        kind: cfg.network.kind,
        n_sts: cfg.network.n_sts,
        encoder: cfg.network.encoder.0.clone(),
        param_count: net.param_count(),
        metric_name,
        metric_mean,
        metric_std,
        n_failed_trials: trials.iter().filter(|t| t.status == "failed").count(),
        s_tilde_mean,
        energy_ratio,
        trials,
    };
    Ok(ExperimentOutcome {
        report,
        first_model,
        loss_curves,
    })
}

fn net_layer_order(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let net = build_net(cfg, 0)?;
    Ok(net
        .layer_descs()
        .into_iter()
        .map(|(name, _)| name)
        .collect())
}

fn out_dir(requested: &Option<PathBuf>, name: &str) -> PathBuf {
    requested
        .clone()
        .unwrap_or_else(|| PathBuf::from("runs").join(name))
}

fn write_metadata(dir: &Path, wall: f64) -> Result<()> {
    #[derive(Serialize)]
    struct Metadata {
        wall_seconds: f64,
    }
    output::write_json(&dir.join("metadata.json"), &Metadata { wall_seconds: wall })
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let started = Instant::now();
    let (cfg, base) = load_config(&args.config, &args.preset, args.seeds)?;
    let dir = out_dir(&args.out, &cfg.name);
    output::ensure_dir(&dir)?;
    let outcome = run_experiment(&cfg, &base)?;
    output::write_json(&dir.join("report.json"), &outcome.report)?;
    for (seed, losses) in &outcome.loss_curves {
        output::write_loss_csv(&dir.join(format!("loss_seed{seed}.csv")), losses)?;
    }
    if let Some(model) = &outcome.first_model {
        output::write_json(&dir.join("model.json"), model)?;
    }
    output::write_text(&dir.join("summary.md"), &summary_markdown(&outcome.report))?;
    write_metadata(&dir, started.elapsed().as_secs_f64())?;
    println!(
        "{}: {} = {} ({} seeds, {} failed){}",
        outcome.report.name,
        outcome.report.metric_name,
        output::fmt_metric(
            &outcome.report.metric_name,
            outcome.report.metric_mean,
            outcome.report.metric_std
        ),
        outcome.report.trials.len(),
        outcome.report.n_failed_trials,
        outcome
            .report
            .energy_ratio
            .map(|e| format!(", E_r = {e:.3}"))
            .unwrap_or_default()
    );
    Ok(())
}

fn summary_markdown(report: &RunReport) -> String {
    let mut rows = vec![vec![
        report.kind_label(),
        report.arch.clone(),
        report.n_sts.to_string(),
        output::fmt_metric(&report.metric_name, report.metric_mean, report.metric_std),
        report
            .s_tilde_mean
            .iter()
            .map(|(l, s)| format!("{l}: {s:.2}"))
            .collect::<Vec<_>>()
            .join(", "),
        report
            .energy_ratio
            .map(|e| format!("{e:.3}"))
            .unwrap_or_else(|| "-".into()),
    ]];
    rows[0].insert(0, report.name.clone());
    format!(
        "# {}\n\n{}\n",
        report.name,
        output::markdown_table(
            &[
                "experiment",
                "kind",
                "arch",
                "STS",
                &report.metric_name,
                "S\u{0303} (%)",
                "E_r"
            ],
            &rows
        )
    )
}

impl RunReport {
    fn kind_label(&self) -> String {
        format!("{:?}", self.kind).to_uppercase()
    }
}

#[derive(Debug, Serialize)]
struct SweepPoint {
    value: f64,
    metric_mean: f64,
    metric_std: f64,
    n_failed_trials: usize,
    s_tilde_mean: Vec<(String, f64)>,
    energy_ratio: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SweepReport {
    name: String,
    parameter: String,
    metric_name: String,
    points: Vec<SweepPoint>,
}

fn cmd_sweep(args: TrainArgs) -> Result<()> {
    let started = Instant::now();
    let (cfg, base) = load_config(&args.config, &args.preset, args.seeds)?;
    let SweepSpec { parameter, values } = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::Config(format!("config '{}' has no sweep block", cfg.name)))?;
    let dir = out_dir(&args.out, &format!("{}-sweep", cfg.name));
    output::ensure_dir(&dir)?;
    let mut points = Vec::new();
    let mut metric_name = String::new();
    for &value in &values {
        let swept = cfg.with_sweep_value(parameter, value)?;
        let outcome = run_experiment(&swept, &base)?;
        metric_name = outcome.report.metric_name.clone();
        points.push(SweepPoint {
            value,
            metric_mean: outcome.report.metric_mean,
            metric_std: outcome.report.metric_std,
            n_failed_trials: outcome.report.n_failed_trials,
            s_tilde_mean: outcome.report.s_tilde_mean,
            energy_ratio: outcome.report.energy_ratio,
        });
    }
    let report = SweepReport {
        name: cfg.name.clone(),
        parameter: format!("{parameter:?}"),
        metric_name: metric_name.clone(),
        points,
    };
    output::write_json(&dir.join("sweep.json"), &report)?;
    let rows: Vec<Vec<String>> = report
        .points
        .iter()
        .map(|p| {
            vec![
                format!("{}", p.value),
                output::fmt_metric(&metric_name, p.metric_mean, p.metric_std),
                p.energy_ratio
                    .map(|e| format!("{e:.3}"))
                    .unwrap_or_else(|| "-".into()),
            ]
        })
        .collect();
    output::write_text(
        &dir.join("sweep.md"),
        &format!(
            "# {} sweep over {}\n\n{}\n",
            report.name,
            report.parameter,
            output::markdown_table(&[&report.parameter, &metric_name, "E_r"], &rows)
        ),
    )?;
    write_metadata(&dir, started.elapsed().as_secs_f64())?;
    println!(
        "{}: swept {} values of {}",
        report.name,
        values.len(),
        report.parameter
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<SavedModel> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn cmd_eval(args: EvalArgs, energy_only: bool) -> Result<()> {
    let started = Instant::now();
    let (cfg, base) = load_config(&args.config, &args.preset, None)?;
    let model = load_model(&args.model)?;
    let arch: Architecture = model.arch.parse()?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut net = build_from_spec(&arch, &model.neuron, model.kind, model.n_sts, &mut rng)?;
    net.import_params(&model.params)?;
    let encoder = cfg.network.encoder.resolve()?;
    let (_, test_ds) = cfg.dataset.load(&base, cfg.split_seed)?;
    let eval = vsnn::training::evaluate(&mut net, encoder, &test_ds, 0x5eed)?;
    let s_map: BTreeMap<String, f64> = eval.s_tilde.iter().cloned().collect();
    let energy_ratio = if s_map.is_empty() && model.kind == NetworkKind::Ann {
        1.0
    } else {
        compute_energy_ratio(&net.energy_topology(&s_map)?, model.n_sts)?
    };
    #[derive(Serialize)]
    struct EvalOutput {
        name: String,
        metric_name: String,
        metric: f64,
        loss: f64,
        s_tilde: Vec<(String, f64)>,
        energy_ratio: f64,
    }
    let out = EvalOutput {
        name: model.name.clone(),
        metric_name: eval.metric_name.clone(),
        metric: eval.metric,
        loss: eval.loss,
        s_tilde: eval.s_tilde.clone(),
        energy_ratio,
    };
    if energy_only {
        println!("{}: E_r = {:.4}", out.name, out.energy_ratio);
        for (layer, s) in &out.s_tilde {
            println!("  {layer}: S\u{0303} = {s:.2}%");
        }
    } else {
        let metric = if out.metric_name == "nmse" {
            format!("{:.3e}", out.metric)
        } else {
            format!("{:.2}", out.metric)
        };
        println!(
            "{}: {} = {metric} (loss {:.6})",
            out.name, out.metric_name, out.loss
        );
    }
    if let Some(dir) = &args.out {
        output::ensure_dir(dir)?;
        let file = if energy_only {
            "energy.json"
        } else {
            "eval.json"
        };
        output::write_json(&dir.join(file), &out)?;
        write_metadata(dir, started.elapsed().as_secs_f64())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct GradcheckCase {
    arch: String,
    kind: String,
    max_rel_err: f64,
    mean_rel_err: f64,
    checked: usize,
    worst: String,
    pass: bool,
}

const GRADCHECK_TOLERANCE: f64 = 1e-4;

fn gradcheck_case(
    arch_str: &str,
    kind: NetworkKind,
    neuron: &SpikingNeuronConfig,
    n_sts: usize,
    classification: bool,
    corrupt: bool,
    seed: u64,
) -> Result<GradcheckCase> {
    let arch: Architecture = arch_str.parse()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // the corrupted variant pairs the hard-threshold forward with the
    // smooth oracle, which must disagree
    let mode = if corrupt {
        GateMode::Hard
    } else {
        GateMode::Smoothed
    };
    let mut net = build_network(&arch, neuron, kind, n_sts, &mut rng, mode, false)?;
    let batch = 3usize;
    let shape: Vec<usize> = std::iter::once(batch)
        .chain(arch.input_shape().iter().copied())
        .collect();
    let n: usize = shape.iter().product();
    let input = Tensor::new(shape, (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect())?;
    let train = encode_direct(&input, n_sts)?;
    let targets = if classification {
        let width = *net.forward(&train)?.shape().last().unwrap();
        Targets::Labels((0..batch).map(|b| b % width).collect())
    } else {
        let width = *net.forward(&train)?.shape().last().unwrap();
        let m = batch * width;
        Targets::Values(Tensor::new(
            vec![batch, width],
            (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )?)
    };
    let rep = gradient_check(&mut net, &train, &targets, 20, 1e-5, &mut rng)?;
    Ok(GradcheckCase {
        arch: arch_str.to_string(),
        kind: format!("{kind:?}").to_uppercase(),
        max_rel_err: rep.max_rel_err,
        mean_rel_err: rep.mean_rel_err,
        checked: rep.checked,
        worst: rep.worst,
        pass: rep.max_rel_err < GRADCHECK_TOLERANCE,
    })
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<()> {
    let mut cases = Vec::new();
    match &args.config {
        Some(path) => {
            let cfg = ExperimentConfig::from_file(path)?;
            let classification = cfg.network.arch.to_lowercase().contains("softmax");
            cases.push(gradcheck_case(
                &cfg.network.arch,
                cfg.network.kind,
                &cfg.neuron,
                cfg.network.n_sts.min(4),
                classification,
                args.corrupt,
                1,
            )?);
        }
        None => {
            let neuron = |sigma| SpikingNeuronConfig {
                beta: 0.9,
                threshold: 0.25,
                surrogate_slope: 25.0,
                sigma,
            };
            let battery: [(&str, NetworkKind, Activation, usize, bool); 4] = [
                (
                    "I(2)->DL(6)->A1->DL(5)->A2->DL(1)",
                    NetworkKind::Vsnn,
                    Activation::Tanh,
                    3,
                    false,
                ),
                (
                    "I(3)->DL(6)->A1->DL(2)->softmax",
                    NetworkKind::Snn,
                    Activation::Linear,
                    3,
                    true,
                ),
                (
                    "I(3)->DL(6)->A1->DL(2)->softmax",
                    NetworkKind::Ann,
                    Activation::Gelu,
                    1,
                    true,
                ),
                (
                    "I(1,6,6)->CL(2,3)->A1->MP->F->DL(2)->softmax",
                    NetworkKind::Vsnn,
                    Activation::Relu,
                    2,
                    true,
                ),
            ];
            for (i, (arch, kind, sigma, n_sts, cls)) in battery.iter().enumerate() {
                cases.push(gradcheck_case(
                    arch,
                    *kind,
                    &neuron(*sigma),
                    *n_sts,
                    *cls,
                    args.corrupt,
                    i as u64 + 1,
                )?);
            }
        }
    }
    for c in &cases {
        println!(
            "{} {} ({}, {} params checked): max rel err {:.3e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.arch,
            c.kind,
            c.checked,
            c.max_rel_err
        );
    }
    if let Some(dir) = &args.out {
        output::ensure_dir(dir)?;
        output::write_json(&dir.join("gradcheck.json"), &cases)?;
    }
    if cases.iter().any(|c| !c.pass) {
        return Err(Error::Numerical(
            "gradient check failed; see per-case output above".into(),
        ));
    }
    Ok(())
}

fn cmd_fetch(args: FetchArgs) -> Result<()> {
    match args.dataset.as_str() {
        "feynman_i_6_2a" | "feynman_i_9_18" => {
            let mut rng = ChaCha8Rng::seed_from_u64(args.data_seed);
            let ds = if args.dataset == "feynman_i_6_2a" {
                vsnn::data::synth_feynman_i_6_2a(args.samples, &mut rng)?
            } else {
                vsnn::data::synth_feynman_i_9_18(args.samples, &mut rng)?
            };
            output::ensure_dir(&args.out)?;
            let path = args.out.join(format!("{}.tsv", args.dataset));
            let width = ds.feature_shape().iter().product::<usize>();
            let mut text = String::new();
            for c in 0..width {
                text.push_str(&format!("x{c}\t"));
            }
            text.push_str("target\n");
            let targets = ds.values()?;
            for i in 0..ds.len() {
                for c in 0..width {
                    text.push_str(&format!("{:.12e}\t", ds.features.data()[i * width + c]));
                }
                text.push_str(&format!("{:.12e}\n", targets.data()[i]));
            }
            output::write_text(&path, &text)?;
            println!("wrote {} samples to {}", ds.len(), path.display());
            Ok(())
        }
        "mnist" => {
            let img = args.out.join("mnist/mnist-subset-images-idx3-ubyte.gz");
            let lab = args.out.join("mnist/mnist-subset-labels-idx1-ubyte.gz");
            if img.exists() && lab.exists() {
                println!("mnist subset already present at {}", img.display());
                Ok(())
            } else {
                Err(Error::Data(format!(
                    "mnist files not found at {}; this build bundles a 10k-digit \
                     subset under data/mnist, or download the full IDX files from \
                     https://ossci-datasets.s3.amazonaws.com/mnist/ and place them there",
                    img.display()
                )))
            }
        }
        "fashion-mnist" => {
            let img = args.out.join("fashion/train-images-idx3-ubyte.gz");
            if img.exists() {
                println!("fashion-mnist already present at {}", img.display());
                Ok(())
            } else {
                Err(Error::Data(format!(
                    "fashion-mnist files not found at {}; download the IDX files \
                     from https://github.com/zalandoresearch/fashion-mnist and \
                     place them under data/fashion",
                    img.display()
                )))
            }
        }
        other => Err(Error::Config(format!(
            "unknown dataset '{other}' (expected mnist, fashion-mnist, feynman_i_6_2a or feynman_i_9_18)"
        ))),
    }
}
