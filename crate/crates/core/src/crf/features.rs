use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::HyperCube;

/// Above this band count the spectral feature is reduced by PCA.
pub const FULL_SPECTRUM_MAX_BANDS: usize = 16;
pub const PCA_COMPONENTS: usize = 3;

/// Position and spectral feature of one pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct PixelFeature {
    pub position: (f64, f64),
    pub intensity: Vec<f64>,
}

/// Spectral features for every pixel of a scene.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureField {
    height: usize,
    width: usize,
    dims: usize,
    intensity: Vec<f64>,
}

impl FeatureField {
    /// Full band vectors up to [`FULL_SPECTRUM_MAX_BANDS`] bands, otherwise the
    /// leading principal components.
    pub fn from_cube(cube: &HyperCube) -> Self {
        if cube.bands() <= FULL_SPECTRUM_MAX_BANDS {
            Self::full_spectrum(cube)
        } else {
            Self::principal_components(cube, PCA_COMPONENTS)
        }
    }

    pub fn full_spectrum(cube: &HyperCube) -> Self {
        FeatureField {
            height: cube.height(),
            width: cube.width(),
            dims: cube.bands(),
            intensity: cube.values().to_vec(),
        }
    }

    /// Projection onto the `components` leading eigenvectors of the band
    /// covariance. Each eigenvector's sign is fixed so that its largest
    /// magnitude entry is positive.
    pub fn principal_components(cube: &HyperCube, components: usize) -> Self {
        let (n, b) = (cube.pixels(), cube.bands());
        let components = components.min(b);
        let mut mean = vec![0.0; b];
        for px in cube.values().chunks_exact(b) {
            for (m, v) in mean.iter_mut().zip(px) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut cov = DMatrix::<f64>::zeros(b, b);
        for px in cube.values().chunks_exact(b) {
            for i in 0..b {
                let di = px[i] - mean[i];
                for j in i..b {
                    cov[(i, j)] += di * (px[j] - mean[j]);
                }
            }
        }
        for i in 0..b {
            for j in i..b {
                let v = cov[(i, j)] / n as f64;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&c)));
        let basis: Vec<Vec<f64>> = order[..components]
            .iter()
            .map(|&idx| {
                let mut v: Vec<f64> = eig.eigenvectors.column(idx).iter().copied().collect();
                let pivot = v
                    .iter()
                    .copied()
                    .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
                if pivot < 0.0 {
                    v.iter_mut().for_each(|x| *x = -*x);
                }
                v
            })
            .collect();
        let mut intensity = Vec::with_capacity(n * components);
        for px in cube.values().chunks_exact(b) {
            for axis in &basis {
                intensity.push(px.iter().zip(&mean).zip(axis).map(|((v, m), a)| (v - m) * a).sum());
            }
        }
        FeatureField {
            height: cube.height(),
            width: cube.width(),
            dims: components,
            intensity,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn intensity(&self, i: usize) -> &[f64] {
        &self.intensity[i * self.dims..(i + 1) * self.dims]
    }

    pub fn position(&self, i: usize) -> (f64, f64) {
        ((i / self.width) as f64, (i % self.width) as f64)
    }

    pub fn pixel(&self, i: usize) -> PixelFeature {
        PixelFeature {
            position: self.position(i),
            intensity: self.intensity(i).to_vec(),
        }
    }
}
