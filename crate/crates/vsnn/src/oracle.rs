//! Independent reference implementations used only for verification.
//!
//! Nothing in here is called by the production forward or backward paths;
//! tests and the `gradcheck` command compare production results against
//! these deliberately naive re-derivations. The spiking gate here is the
//! smooth one, so finite differences of this forward are well defined and
//! must agree with the production backward pass in smoothed gate mode.

use rand::Rng;

use crate::data::Targets;
use crate::error::{Error, Result};
use crate::layers::LayerDesc;
use crate::network::{Readout, SequentialNetwork};
use crate::neuron::{Activation, SpikeKind};
use crate::tensor::Tensor;

/// Naive triple-loop matrix product.
pub fn ref_matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k, n) = match (a.shape(), b.shape()) {
        ([m, k], [k2, n]) if k == k2 => (*m, *k, *n),
        (sa, sb) => {
            return Err(Error::dim(format!("ref_matmul shapes {sa:?} x {sb:?}")));
        }
    };
    let mut out = Tensor::zeros(&[m, n]);
    for i in 0..m {
        for j in 0..n {
            let mut acc = 0.0;
            for kk in 0..k {
                acc += a.data()[i * k + kk] * b.data()[kk * n + j];
            }
            out.data_mut()[i * n + j] = acc;
        }
    }
    Ok(out)
}

/// Naive valid cross-correlation, one sample `[C,H,L]`.
pub fn ref_conv2d(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let (c, h, l) = match input.shape() {
        [c, h, l] => (*c, *h, *l),
        s => return Err(Error::dim(format!("ref_conv2d input {s:?}"))),
    };
    let (co_n, ci_n, hk, lk) = match kernels.shape() {
        [a, b, c2, d] => (*a, *b, *c2, *d),
        s => return Err(Error::dim(format!("ref_conv2d kernels {s:?}"))),
    };
    if ci_n != c || hk > h || lk > l {
        return Err(Error::dim("ref_conv2d geometry mismatch"));
    }
    let (ho, lo) = (h - hk + 1, l - lk + 1);
    let mut out = Tensor::zeros(&[co_n, ho, lo]);
    for co in 0..co_n {
        for oy in 0..ho {
            for ox in 0..lo {
                let mut acc = bias.data()[co];
                for ci in 0..c {
                    for ky in 0..hk {
                        for kx in 0..lk {
                            acc += input.data()[ci * h * l + (oy + ky) * l + (ox + kx)]
                                * kernels.data()[co * c * hk * lk + ci * hk * lk + ky * lk + kx];
                        }
                    }
                }
                out.data_mut()[co * ho * lo + oy * lo + ox] = acc;
            }
        }
    }
    Ok(out)
}

/// Naive 2x2 stride-2 max pool, one sample `[C,H,L]`.
pub fn ref_maxpool(input: &Tensor) -> Result<Tensor> {
    let (c, h, l) = match input.shape() {
        [c, h, l] if h % 2 == 0 && l % 2 == 0 => (*c, *h, *l),
        s => return Err(Error::dim(format!("ref_maxpool input {s:?}"))),
    };
    let mut out = Tensor::zeros(&[c, h / 2, l / 2]);
    for ci in 0..c {
        for oy in 0..h / 2 {
            for ox in 0..l / 2 {
                let mut best = f64::NEG_INFINITY;
                for dy in 0..2 {
                    for dx in 0..2 {
                        best = best.max(input.data()[ci * h * l + (2 * oy + dy) * l + 2 * ox + dx]);
                    }
                }
                out.data_mut()[ci * (h / 2) * (l / 2) + oy * (l / 2) + ox] = best;
            }
        }
    }
    Ok(out)
}

fn ref_activation(a: Activation, x: f64) -> f64 {
    match a {
        Activation::Linear => x,
        Activation::Relu => {
            if x > 0.0 {
                x
            } else {
                0.0
            }
        }
        Activation::Gelu => x * 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2)),
        Activation::Tanh => x.tanh(),
    }
}

fn ref_smoothed_gate(x: f64, k: f64) -> f64 {
    (1.0 + k * x / (1.0 + k * x.abs())) / 2.0
}

/// A network re-described as plain data: layer structure plus a flat list
/// of parameter vectors, evaluated with naive loops and the smooth gate.
pub struct OracleNet {
    descs: Vec<LayerDesc>,
    head_len: usize,
    classification: bool,
    readout_mean: bool,
}

impl OracleNet {
    pub fn from_network(net: &SequentialNetwork) -> OracleNet {
        OracleNet {
            descs: net.layer_descs().into_iter().map(|(_, d)| d).collect(),
            head_len: net.head_len(),
            classification: net.is_classification(),
            readout_mean: true,
        }
    }

    pub fn with_readout(mut self, readout: Readout) -> OracleNet {
        self.readout_mean = readout == Readout::MeanOverSts;
        self
    }

    fn descs_with_params(&self, params: &[Vec<f64>]) -> Result<Vec<LayerDesc>> {
        let mut out = self.descs.clone();
        let mut cursor = params.iter();
        for desc in &mut out {
            match desc {
                LayerDesc::Dense { weights, bias }
                | LayerDesc::Conv {
                    kernels: weights,
                    bias,
                } => {
                    for slot in [&mut *weights, &mut *bias] {
                        let values = cursor
                            .next()
                            .ok_or_else(|| Error::Internal("too few parameter vectors".into()))?;
                        if values.len() != slot.numel() {
                            return Err(Error::Internal("parameter vector size mismatch".into()));
                        }
                        slot.data_mut().copy_from_slice(values);
                    }
                }
                _ => {}
            }
        }
        if cursor.next().is_some() {
            return Err(Error::Internal("too many parameter vectors".into()));
        }
        Ok(out)
    }

    /// Forward pass for one sample train `[n_sts, features...]`, returning
    /// the `[n_out]` output vector.
    fn forward_sample(&self, descs: &[LayerDesc], sample_train: &[Tensor]) -> Result<Vec<f64>> {
        let n_sts = sample_train.len();
        // membrane per spiking layer index
        let mut membranes: Vec<Vec<f64>> = vec![Vec::new(); self.head_len];
        let mut head_sum: Option<Vec<f64>> = None;
        let mut head_shape: Vec<usize> = Vec::new();
        let mut last: Vec<f64> = Vec::new();
        for step in sample_train.iter() {
            let mut x = step.clone();
            for (li, desc) in descs[..self.head_len].iter().enumerate() {
                x = self.apply_desc(desc, &x, Some(&mut membranes[li]))?;
            }
            head_shape = x.shape().to_vec();
            last = x.data().to_vec();
            let sum = head_sum.get_or_insert_with(|| vec![0.0; last.len()]);
            for (s, v) in sum.iter_mut().zip(&last) {
                *s += v;
            }
        }
        let decoded: Vec<f64> = if self.readout_mean {
            head_sum
                .expect("n_sts >= 1")
                .into_iter()
                .map(|v| v / n_sts as f64)
                .collect()
        } else {
            last
        };
        let mut x = Tensor::new(head_shape, decoded)?;
        for desc in &descs[self.head_len..] {
            x = self.apply_desc(desc, &x, None)?;
        }
        Ok(x.data().to_vec())
    }

    fn apply_desc(
        &self,
        desc: &LayerDesc,
        x: &Tensor,
        membrane: Option<&mut Vec<f64>>,
    ) -> Result<Tensor> {
        match desc {
            LayerDesc::Dense { weights, bias } => {
                let (n_out, n_in) = (weights.shape()[0], weights.shape()[1]);
                if x.numel() != n_in {
                    return Err(Error::dim("oracle dense input size"));
                }
                let mut out = Tensor::zeros(&[n_out]);
                for j in 0..n_out {
                    let mut acc = bias.data()[j];
                    for i in 0..n_in {
                        acc += weights.data()[j * n_in + i] * x.data()[i];
                    }
                    out.data_mut()[j] = acc;
                }
                Ok(out)
            }
            LayerDesc::Conv { kernels, bias } => ref_conv2d(x, kernels, bias),
            LayerDesc::MaxPool => ref_maxpool(x),
            LayerDesc::Flatten => x.reshape(&[x.numel()]),
            LayerDesc::Activation(a) => x.map(|v| ref_activation(*a, v)),
            LayerDesc::Spiking { cfg, kind } => {
                let membrane = membrane
                    .ok_or_else(|| Error::Internal("spiking layer outside the head".into()))?;
                if membrane.len() != x.numel() {
                    membrane.clear();
                    membrane.resize(x.numel(), 0.0);
                }
                let mut out = Tensor::zeros(x.shape());
                #[allow(clippy::needless_range_loop)]
                for i in 0..x.numel() {
                    let z = x.data()[i];
                    let m = cfg.beta * membrane[i] + z;
                    let g = ref_smoothed_gate(m - cfg.threshold, cfg.surrogate_slope);
                    membrane[i] = m * (1.0 - g);
                    out.data_mut()[i] = match kind {
                        SpikeKind::Lif => g,
                        SpikeKind::Vsn => ref_activation(cfg.sigma, z * g),
                    };
                }
                Ok(out)
            }
        }
    }

    /// Mean loss over the batch for a given flat parameter assignment.
    pub fn loss(
        &self,
        params: &[Vec<f64>],
        input_train: &Tensor,
        targets: &Targets,
    ) -> Result<f64> {
        let descs = self.descs_with_params(params)?;
        let n_sts = input_train.shape()[0];
        let batch = input_train.shape()[1];
        if targets.len() != batch {
            return Err(Error::Data("oracle target count mismatch".into()));
        }
        let mut total = 0.0;
        for b in 0..batch {
            let sample_train: Result<Vec<Tensor>> = (0..n_sts)
                .map(|t| input_train.index_axis0(t)?.index_axis0(b))
                .collect();
            let out = self.forward_sample(&descs, &sample_train?)?;
            total += match targets {
                Targets::Labels(labels) => {
                    if !self.classification {
                        return Err(Error::Config("labels on a regression network".into()));
                    }
                    let max = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let lse = max + out.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
                    lse - out[labels[b]]
                }
                Targets::Values(values) => {
                    let row = values.index_axis0(b)?;
                    let n = row.numel() as f64;
                    out.iter()
                        .zip(row.data())
                        .map(|(p, t)| (p - t) * (p - t))
                        .sum::<f64>()
                        / n
                }
            };
        }
        Ok(total / batch as f64)
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
    /// Parameter tensor and flat index of the worst disagreement.
    pub worst: String,
}

/// Compares the production backward pass (smoothed gate mode) against
/// central finite differences of the oracle forward, on `sample` randomly
/// chosen parameters per tensor.
pub fn gradient_check(
    net: &mut SequentialNetwork,
    input_train: &Tensor,
    targets: &Targets,
    sample_per_tensor: usize,
    h: f64,
    rng: &mut impl Rng,
) -> Result<GradCheckReport> {
    // analytic gradients from the production path
    let out = net.forward(input_train)?;
    let (_, dloss) = match targets {
        Targets::Labels(labels) => crate::layers::softmax_cross_entropy(&out, labels)?,
        Targets::Values(values) => crate::layers::mse_loss(&out, values)?,
    };
    net.zero_grad();
    net.backward(&dloss)?;
    let analytic: Vec<(String, Vec<f64>)> = net
        .params_grads_mut()
        .iter()
        .map(|pg| (pg.name.to_string(), pg.grad.data().to_vec()))
        .collect();

    let oracle = OracleNet::from_network(net);
    let base_params = net.export_params();
    let base_loss = oracle.loss(&base_params, input_train, targets)?;
    if !base_loss.is_finite() {
        return Err(Error::Numerical("oracle loss not finite".into()));
    }

    let mut checked = 0usize;
    let mut max_rel = 0.0f64;
    let mut sum_rel = 0.0f64;
    let mut worst = String::new();
    for (ti, (name, grads)) in analytic.iter().enumerate() {
        let n = grads.len();
        let picks: Vec<usize> = if n <= sample_per_tensor {
            (0..n).collect()
        } else {
            (0..sample_per_tensor)
                .map(|_| rng.gen_range(0..n))
                .collect()
        };
        for j in picks {
            let mut plus = base_params.clone();
            plus[ti][j] += h;
            let mut minus = base_params.clone();
            minus[ti][j] -= h;
            let fd = (oracle.loss(&plus, input_train, targets)?
                - oracle.loss(&minus, input_train, targets)?)
                / (2.0 * h);
            let g = grads[j];
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6);
            checked += 1;
            sum_rel += rel;
            if rel > max_rel {
                max_rel = rel;
                worst = format!("{name}[{j}]: analytic {g:.3e} vs fd {fd:.3e}");
            }
        }
    }
    if checked == 0 {
        return Err(Error::Config("network has no parameters to check".into()));
    }
    Ok(GradCheckReport {
        checked,
        max_rel_err: max_rel,
        mean_rel_err: sum_rel / checked as f64,
        worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::encode_direct;
    use crate::network::{build_network, Architecture, NetworkKind};
    use crate::neuron::{GateMode, SpikingNeuronConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn neuron(sigma: Activation) -> SpikingNeuronConfig {
        SpikingNeuronConfig {
            beta: 0.9,
            threshold: 0.25,
            surrogate_slope: 25.0,
            sigma,
        }
    }

    fn random_tensor(shape: &[usize], rng: &mut impl Rng) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor::new(
            shape.to_vec(),
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn ref_matmul_agrees_with_production() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (m, k, n) = (
                rng.gen_range(1..6),
                rng.gen_range(1..6),
                rng.gen_range(1..6),
            );
            let a = random_tensor(&[m, k], &mut rng);
            let b = random_tensor(&[k, n], &mut rng);
            let fast = a.matmul(&b).unwrap();
            let slow = ref_matmul(&a, &b).unwrap();
            for (x, y) in fast.data().iter().zip(slow.data()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ref_conv_agrees_with_production() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let input = random_tensor(&[2, 5, 6], &mut rng);
            let kernels = random_tensor(&[3, 2, 2, 3], &mut rng);
            let bias = random_tensor(&[3], &mut rng);
            let fast = Tensor::conv2d_forward(&input, &kernels, &bias).unwrap();
            let slow = ref_conv2d(&input, &kernels, &bias).unwrap();
            assert_eq!(fast.shape(), slow.shape());
            for (x, y) in fast.data().iter().zip(slow.data()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    fn check_net(arch: &str, kind: NetworkKind, sigma: Activation, n_sts: usize, seed: u64) {
        let arch: Architecture = arch.parse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = build_network(
            &arch,
            &neuron(sigma),
            kind,
            n_sts,
            &mut rng,
            GateMode::Smoothed,
            false,
        )
        .unwrap();
        let batch = random_tensor(
            &std::iter::once(3)
                .chain(arch.input_shape().iter().copied())
                .collect::<Vec<_>>(),
            &mut rng,
        )
        .map(|v| 0.5 * v + 0.3)
        .unwrap();
        let train = encode_direct(&batch, n_sts).unwrap();
        let targets = if net.is_classification() {
            Targets::Labels(vec![0, 1, 0])
        } else {
            let width = *net.forward(&train).unwrap().shape().last().unwrap();
            Targets::Values(random_tensor(&[3, width], &mut rng))
        };
        let rep = gradient_check(&mut net, &train, &targets, 25, 1e-5, &mut rng).unwrap();
        assert!(
            rep.max_rel_err < 1e-4,
            "{arch:?}: {} ({} checked)",
            rep.worst,
            rep.checked
        );
    }

    #[test]
    fn gradcheck_vsnn_regression() {
        check_net(
            "I(2)->DL(6)->A1->DL(5)->A2->DL(1)",
            NetworkKind::Vsnn,
            Activation::Tanh,
            3,
            7,
        );
    }

    #[test]
    fn gradcheck_vsnn_gelu() {
        check_net(
            "I(2)->DL(5)->A1->DL(1)",
            NetworkKind::Vsnn,
            Activation::Gelu,
            4,
            8,
        );
    }

    #[test]
    fn gradcheck_snn_classification() {
        check_net(
            "I(3)->DL(6)->A1->DL(2)->softmax",
            NetworkKind::Snn,
            Activation::Linear,
            3,
            9,
        );
    }

    #[test]
    fn gradcheck_ann() {
        check_net(
            "I(3)->DL(6)->A1->DL(2)->softmax",
            NetworkKind::Ann,
            Activation::Tanh,
            1,
            10,
        );
    }

    #[test]
    fn gradcheck_conv_vsnn() {
        check_net(
            "I(1,6,6)->CL(2,3)->A1->MP->F->DL(2)->softmax",
            NetworkKind::Vsnn,
            Activation::Relu,
            2,
            11,
        );
    }

    #[test]
    fn gradcheck_detects_a_corrupted_gradient() {
        let arch: Architecture = "I(2)->DL(4)->A1->DL(1)".parse().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = build_network(
            &arch,
            &neuron(Activation::Linear),
            NetworkKind::Vsnn,
            2,
            &mut rng,
            GateMode::Smoothed,
            false,
        )
        .unwrap();
        let batch = random_tensor(&[2, 2], &mut rng);
        let train = encode_direct(&batch, 2).unwrap();
        let targets = Targets::Values(random_tensor(&[2, 1], &mut rng));
        // sane baseline
        let ok = gradient_check(&mut net, &train, &targets, 100, 1e-5, &mut rng).unwrap();
        assert!(ok.max_rel_err < 1e-4);
        // corrupt: hard gate forward vs smoothed oracle must disagree
        let mut net_hard = build_network(
            &arch,
            &neuron(Activation::Linear),
            NetworkKind::Vsnn,
            2,
            &mut ChaCha8Rng::seed_from_u64(3),
            GateMode::Hard,
            false,
        )
        .unwrap();
        net_hard.import_params(&net.export_params()).unwrap();
        let bad = gradient_check(&mut net_hard, &train, &targets, 100, 1e-5, &mut rng).unwrap();
        assert!(
            bad.max_rel_err > 1e-3,
            "expected disagreement, got {}",
            bad.max_rel_err
        );
    }
}
