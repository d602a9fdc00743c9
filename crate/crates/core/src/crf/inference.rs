use rayon::prelude::*;

use crate::crf::features::FeatureField;
use crate::crf::kernels::unary_from_probs;
use crate::crf::probability::ProbabilityMap;
use crate::crf::{Compatibility, CrfParams};
use crate::data::LabelMap;
use crate::error::{Error, Result};
use crate::numerics::softmax_vec;
use crate::parallel;

/// Refined map plus the max-abs change of every iteration.
#[derive(Clone, Debug)]
pub struct MeanFieldTrace {
    pub refined: ProbabilityMap,
    pub residuals: Vec<f64>,
}

/// Synchronous mean-field inference. `Q0` is the input map; zero iterations
/// return it unchanged.
pub fn mean_field_infer(probs: &ProbabilityMap, features: &FeatureField, params: &CrfParams) -> Result<ProbabilityMap> {
    mean_field_trace(probs, features, params).map(|t| t.refined)
}

pub fn mean_field_trace(probs: &ProbabilityMap, features: &FeatureField, params: &CrfParams) -> Result<MeanFieldTrace> {
    let k = probs.classes();
    params.validate(k)?;
    if features.height() != probs.height() || features.width() != probs.width() {
        return Err(Error::Shape(format!(
            "probability map is {}x{}, features {}x{}",
            probs.height(),
            probs.width(),
            features.height(),
            features.width()
        )));
    }
    let unary = unary_from_probs(probs, params.unary_floor)?;
    let n = probs.pixels();
    let mut q = probs.values().to_vec();
    let mut residuals = Vec::with_capacity(params.iterations);
    let a = 1.0 / (2.0 * params.theta_alpha * params.theta_alpha);
    let b = 1.0 / (2.0 * params.theta_beta * params.theta_beta);
    let g = 1.0 / (2.0 * params.theta_gamma * params.theta_gamma);
    for _ in 0..params.iterations {
        let next: Vec<f64> = parallel::install(|| {
            (0..n)
                .into_par_iter()
                .flat_map_iter(|i| {
                    let (ri, ci) = features.position(i);
                    let fi = features.intensity(i);
                    let mut msg = vec![0.0; k];
                    for j in 0..n {
                        if j == i {
                            continue;
                        }
                        let (rj, cj) = features.position(j);
                        let d2 = (ri - rj) * (ri - rj) + (ci - cj) * (ci - cj);
                        let s2: f64 = fi
                            .iter()
                            .zip(features.intensity(j))
                            .map(|(x, y)| (x - y) * (x - y))
                            .sum();
                        let kij = params.w1 * (-d2 * a - s2 * b).exp() + params.w2 * (-d2 * g).exp();
                        if kij == 0.0 {
                            continue;
                        }
                        for (m, qj) in msg.iter_mut().zip(&q[j * k..(j + 1) * k]) {
                            *m += kij * qj;
                        }
                    }
                    let pair: Vec<f64> = match &params.compat {
                        Compatibility::Potts => {
                            let total: f64 = msg.iter().sum();
                            msg.iter().map(|m| total - m).collect()
                        }
                        compat => (0..k)
                            .map(|l| (0..k).map(|l2| compat.mu(l, l2) * msg[l2]).sum())
                            .collect(),
                    };
                    let logits: Vec<f64> = unary.pixel(i).iter().zip(&pair).map(|(u, p)| -u - p).collect();
                    softmax_vec(&logits)
                })
                .collect()
        });
        let residual = q.iter().zip(&next).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        residuals.push(residual);
        q = next;
        if !q.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("mean-field update produced a non-finite value".into()));
        }
    }
    Ok(MeanFieldTrace {
        refined: ProbabilityMap::new(probs.height(), probs.width(), k, q)?,
        residuals,
    })
}

/// Per-pixel argmax as a one-based label map; ties go to the lowest class.
pub fn map_labeling(probs: &ProbabilityMap) -> LabelMap {
    let k = probs.classes();
    let labels = (0..probs.pixels())
        .map(|i| {
            let row = probs.pixel(i);
            let mut best = 0;
            for (l, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = l;
                }
            }
            best as u16 + 1
        })
        .collect();
    LabelMap::new(probs.height(), probs.width(), k, labels).expect("argmax labels are in range")
}
