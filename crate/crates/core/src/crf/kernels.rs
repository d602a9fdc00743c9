use crate::crf::features::{FeatureField, PixelFeature};
use crate::crf::probability::ProbabilityMap;
use crate::crf::CrfParams;
use crate::data::LabelMap;
use crate::error::{Error, Result};

/// Per-pixel, per-class unary costs `U_i(l)`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnaryField {
    pub classes: usize,
    pub costs: Vec<f64>,
}

impl UnaryField {
    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.costs[i * self.classes..(i + 1) * self.classes]
    }
}

/// `U_i(l) = -log(max(q_i(l), floor))`.
pub fn unary_from_probs(probs: &ProbabilityMap, floor: f64) -> Result<UnaryField> {
    if !(floor > 0.0 && floor <= 1e-2) {
        return Err(Error::Parameter(format!("unary floor must lie in (0, 1e-2], got {floor}")));
    }
    Ok(UnaryField {
        classes: probs.classes(),
        costs: probs.values().iter().map(|&q| -(q.max(floor)).ln()).collect(),
    })
}

fn sq_dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)
}

fn sq_dist_vec(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Appearance kernel over position and spectrum.
pub fn kernel_f1(a: &PixelFeature, b: &PixelFeature, theta_alpha: f64, theta_beta: f64) -> f64 {
    (-sq_dist(a.position, b.position) / (2.0 * theta_alpha * theta_alpha)
        - sq_dist_vec(&a.intensity, &b.intensity) / (2.0 * theta_beta * theta_beta))
        .exp()
}

/// Smoothness kernel over position.
pub fn kernel_f2(a: &PixelFeature, b: &PixelFeature, theta_gamma: f64) -> f64 {
    (-sq_dist(a.position, b.position) / (2.0 * theta_gamma * theta_gamma)).exp()
}

/// `μ(la, lb) · (w1·f1 + w2·f2)` for zero-based class indices.
pub fn pairwise_potential(a: &PixelFeature, b: &PixelFeature, la: usize, lb: usize, params: &CrfParams) -> f64 {
    let mu = params.compat.mu(la, lb);
    if mu == 0.0 {
        return 0.0;
    }
    mu * (params.w1 * kernel_f1(a, b, params.theta_alpha, params.theta_beta)
        + params.w2 * kernel_f2(a, b, params.theta_gamma))
}

/// Energy of a complete labeling; each unordered pixel pair counts once.
pub fn energy(labels: &LabelMap, features: &FeatureField, unary: &UnaryField, params: &CrfParams) -> Result<f64> {
    let n = labels.len();
    if features.pixels() != n || unary.costs.len() != n * unary.classes {
        return Err(Error::Shape(format!(
            "labels cover {n} pixels, features {}, unary {}",
            features.pixels(),
            unary.costs.len() / unary.classes.max(1)
        )));
    }
    let k = unary.classes;
    let idx: Vec<usize> = labels
        .labels()
        .iter()
        .map(|&l| {
            if l == 0 || l as usize > k {
                Err(Error::Contract(format!("energy needs labels in 1..={k}, got {l}")))
            } else {
                Ok(l as usize - 1)
            }
        })
        .collect::<Result<_>>()?;
    let mut e: f64 = idx.iter().enumerate().map(|(i, &l)| unary.pixel(i)[l]).sum();
    let feats: Vec<PixelFeature> = (0..n).map(|i| features.pixel(i)).collect();
    for i in 0..n {
        for j in i + 1..n {
            e += pairwise_potential(&feats[i], &feats[j], idx[i], idx[j], params);
        }
    }
    Ok(e)
}
