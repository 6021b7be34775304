use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row-wise softmax, stabilized by max subtraction.
pub fn softmax_rows(logits: &Tensor) -> Result<Tensor> {
    let [batch, k] = match logits.shape() {
        [b, k] => [*b, *k],
        s => return Err(Error::dim(format!("softmax expects [batch,K], got {s:?}"))),
    };
    let mut out = Tensor::zeros(logits.shape());
    let od = out.data_mut();
    for b in 0..batch {
        let row = &logits.data()[b * k..(b + 1) * k];
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let mut sum = 0.0;
        for j in 0..k {
            let e = (row[j] - max).exp();
            od[b * k + j] = e;
            sum += e;
        }
        for j in 0..k {
            od[b * k + j] /= sum;
        }
    }
    out.check_finite()?;
    Ok(out)
}

/// Mean cross-entropy of softmaxed logits against integer class labels.
/// Returns the loss and `dLoss/dlogits = (softmax - onehot)/batch`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f64, Tensor)> {
    let [batch, k] = match logits.shape() {
        [b, k] => [*b, *k],
        s => {
            return Err(Error::dim(format!(
                "cross-entropy expects [batch,K], got {s:?}"
            )))
        }
    };
    if labels.len() != batch {
        return Err(Error::Data(format!(
            "{} labels for batch of {batch}",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(Error::Data(format!("label {bad} out of range [0,{k})")));
    }
    let probs = softmax_rows(logits)?;
    let mut loss = 0.0;
    let mut grad = probs.clone();
    let gd = grad.data_mut();
    for (b, &label) in labels.iter().enumerate() {
        let p = probs.data()[b * k + label];
        // probabilities are strictly positive after softmax
        loss -= p.ln();
        gd[b * k + label] -= 1.0;
    }
    loss /= batch as f64;
    let grad = grad.scale(1.0 / batch as f64)?;
    if !loss.is_finite() {
        return Err(Error::Numerical("non-finite cross-entropy loss".into()));
    }
    Ok((loss, grad))
}

/// Mean squared error over all elements, with gradient `2(pred-target)/N`.
pub fn mse_loss(pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
    if pred.shape() != target.shape() {
        return Err(Error::dim(format!(
            "mse shape mismatch: {:?} vs {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    let n = pred.numel() as f64;
    let diff = pred.sub(target)?;
    let loss = diff.data().iter().map(|v| v * v).sum::<f64>() / n;
    let grad = diff.scale(2.0 / n)?;
    Ok((loss, grad))
}
