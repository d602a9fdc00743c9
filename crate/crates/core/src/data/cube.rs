use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Raw hyperspectral image, band-last `(h, w, b)` layout.
#[derive(Clone, Debug, PartialEq)]
pub struct HyperCube {
    height: usize,
    width: usize,
    bands: usize,
    values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Each band scaled linearly onto `[-1, 1]`.
    #[default]
    PerBandMinMax,
    /// Each band shifted to zero mean and scaled to unit variance.
    PerBandZScore,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per_band_minmax" | "minmax" => Ok(Normalization::PerBandMinMax),
            "per_band_zscore" | "zscore" => Ok(Normalization::PerBandZScore),
            other => Err(Error::Parameter(format!("unknown normalization {other:?}"))),
        }
    }
}

impl HyperCube {
    pub fn new(height: usize, width: usize, bands: usize, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::Parameter(format!(
                "cube dimensions must be positive, got {height}x{width}x{bands}"
            )));
        }
        let expected = height * width * bands;
        if values.len() != expected {
            return Err(Error::Length {
                expected,
                found: values.len(),
            });
        }
        Ok(HyperCube {
            height,
            width,
            bands,
            values,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.values[(row * self.width + col) * self.bands + band]
    }

    /// Spectral vector of one pixel.
    pub fn spectrum(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.width + col) * self.bands;
        &self.values[start..start + self.bands]
    }

    pub fn spectrum_at(&self, pixel: usize) -> &[f64] {
        &self.values[pixel * self.bands..(pixel + 1) * self.bands]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `(min, max)` of every band.
    pub fn band_ranges(&self) -> Vec<(f64, f64)> {
        let mut r = vec![(f64::INFINITY, f64::NEG_INFINITY); self.bands];
        for px in self.values.chunks_exact(self.bands) {
            for (range, &v) in r.iter_mut().zip(px) {
                range.0 = range.0.min(v);
                range.1 = range.1.max(v);
            }
        }
        r
    }

    pub fn normalize(&self, mode: Normalization) -> Result<HyperCube> {
        if !self.is_finite() {
            return Err(Error::NonFinite("cube contains NaN or infinite values".into()));
        }
        let n = self.pixels() as f64;
        let mut out = self.values.clone();
        match mode {
            Normalization::PerBandMinMax => {
                for (band, (lo, hi)) in self.band_ranges().into_iter().enumerate() {
                    let span = hi - lo;
                    for px in out.chunks_exact_mut(self.bands) {
                        px[band] = if span > 0.0 {
                            2.0 * (px[band] - lo) / span - 1.0
                        } else {
                            0.0
                        };
                    }
                }
            }
            Normalization::PerBandZScore => {
                for band in 0..self.bands {
                    let mean = self.values.iter().skip(band).step_by(self.bands).sum::<f64>() / n;
                    let var = self
                        .values
                        .iter()
                        .skip(band)
                        .step_by(self.bands)
                        .map(|v| (v - mean) * (v - mean))
                        .sum::<f64>()
                        / n;
                    let sd = var.sqrt();
                    for px in out.chunks_exact_mut(self.bands) {
                        px[band] = if sd > 0.0 { (px[band] - mean) / sd } else { 0.0 };
                    }
                }
            }
        }
        HyperCube::new(self.height, self.width, self.bands, out)
    }
}

/// Parse an `hsi-raw-v1` stream: `HSI1 <H> <W> <B>\n` then `H·W·B`
/// little-endian f32 values, band fastest.
pub fn read_cube<R: BufRead>(mut input: R) -> Result<HyperCube> {
    let mut header = Vec::new();
    input
        .read_until(b'\n', &mut header)
        .map_err(|e| Error::Format(format!("reading header: {e}")))?;
    let text = std::str::from_utf8(&header).map_err(|_| Error::Format("header is not ASCII".into()))?;
    if !text.ends_with('\n') {
        return Err(Error::Format("header line is not terminated".into()));
    }
    let fields: Vec<&str> = text.trim_end_matches('\n').split(' ').collect();
    if fields.len() != 4 || fields[0] != "HSI1" {
        return Err(Error::Format(format!("malformed header {:?}", text.trim_end())));
    }
    let dim = |s: &str| -> Result<usize> {
        s.parse::<usize>()
            .ok()
            .filter(|&d| d > 0)
            .ok_or_else(|| Error::Format(format!("bad dimension {s:?}")))
    };
    let (h, w, b) = (dim(fields[1])?, dim(fields[2])?, dim(fields[3])?);
    let expected = h
        .checked_mul(w)
        .and_then(|v| v.checked_mul(b))
        .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let mut payload = Vec::new();
    input
        .read_to_end(&mut payload)
        .map_err(|e| Error::Format(format!("reading payload: {e}")))?;
    if payload.len() != expected * 4 {
        return Err(Error::Length {
            expected,
            found: payload.len() / 4,
        });
    }
    let values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    HyperCube::new(h, w, b, values)
}

pub fn write_cube<W: Write>(cube: &HyperCube, mut out: W) -> std::io::Result<()> {
    writeln!(out, "HSI1 {} {} {}", cube.height, cube.width, cube.bands)?;
    let mut buf = Vec::with_capacity(cube.values.len() * 4);
    for &v in &cube.values {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out.write_all(&buf)
}

pub fn load_cube(path: &Path) -> Result<HyperCube> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_cube(std::io::BufReader::new(file))
}

pub fn save_cube(cube: &HyperCube, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_cube(cube, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
