use crate::numerics::tensor::Tensor;

/// `log(sum(exp(v)))` with max subtraction.
pub fn logsumexp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Softmax of one vector, written into `out`.
pub fn softmax_into(v: &[f64], out: &mut [f64]) {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - m).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

pub fn softmax_vec(v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    softmax_into(v, &mut out);
    out
}

/// Softmax over the last axis.
pub fn softmax(logits: &Tensor) -> Tensor {
    let last = *logits.shape().last().unwrap_or(&1);
    let mut out = logits.clone();
    if last == 0 {
        return out;
    }
    for (src, dst) in logits
        .data()
        .chunks_exact(last)
        .zip(out.data_mut().chunks_exact_mut(last))
    {
        softmax_into(src, dst);
    }
    out
}
