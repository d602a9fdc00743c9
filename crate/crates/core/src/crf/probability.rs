use crate::data::HyperCube;
use crate::error::{Error, Result};

/// Per-pixel distributions over `K` classes, `(h, w, K)` row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMap {
    height: usize,
    width: usize,
    classes: usize,
    q: Vec<f64>,
}

/// Tolerance on each pixel's total mass.
pub const MASS_TOLERANCE: f64 = 1e-6;

impl ProbabilityMap {
    pub fn new(height: usize, width: usize, classes: usize, q: Vec<f64>) -> Result<Self> {
        if classes == 0 {
            return Err(Error::Parameter("probability map needs at least one class".into()));
        }
        if q.len() != height * width * classes {
            return Err(Error::Length {
                expected: height * width * classes,
                found: q.len(),
            });
        }
        for (i, row) in q.chunks_exact(classes).enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) || (total - 1.0).abs() > MASS_TOLERANCE {
                return Err(Error::Contract(format!(
                    "pixel {i} is not a distribution (sum {total})"
                )));
            }
        }
        Ok(ProbabilityMap {
            height,
            width,
            classes,
            q,
        })
    }

    /// One-hot rows `(1 - smoothing)` on the label plus `smoothing / K` on every class.
    pub fn from_labels(height: usize, width: usize, classes: usize, labels: &[u16], smoothing: f64) -> Result<Self> {
        let mut q = vec![smoothing / classes as f64; labels.len() * classes];
        for (row, &l) in q.chunks_exact_mut(classes).zip(labels) {
            if l == 0 || l as usize > classes {
                return Err(Error::Contract(format!("label {l} outside 1..={classes}")));
            }
            row[l as usize - 1] += 1.0 - smoothing;
        }
        Self::new(height, width, classes, q)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.q[i * self.classes..(i + 1) * self.classes]
    }

    /// Largest per-entry difference to another map of the same shape.
    pub fn max_abs_diff(&self, other: &ProbabilityMap) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }

    /// View as a cube with one band per class, for `hsi-raw-v1` output.
    pub fn to_cube(&self) -> HyperCube {
        HyperCube::new(self.height, self.width, self.classes, self.q.clone()).expect("valid dimensions")
    }

    /// Read back from a cube written by [`ProbabilityMap::to_cube`]; rows are
    /// renormalized to absorb f32 rounding.
    pub fn from_cube(cube: &HyperCube) -> Result<Self> {
        let k = cube.bands();
        let mut q = cube.values().to_vec();
        for row in q.chunks_exact_mut(k) {
            let total: f64 = row.iter().sum();
            if !(total > 0.0) {
                return Err(Error::Contract("probability row with zero mass".into()));
            }
            row.iter_mut().for_each(|v| *v /= total);
        }
        Self::new(cube.height(), cube.width(), k, q)
    }
}
