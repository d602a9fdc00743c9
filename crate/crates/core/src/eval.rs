//! Accuracy metrics, confusion matrices and classification map images.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::data::{LabelMap, UNLABELED};
use crate::error::{Error, Result};

/// Class colors for rendered maps; class `l` uses `PALETTE[l - 1]`.
pub const PALETTE: [[u8; 3]; 24] = [
    [230, 25, 75],
    [60, 180, 75],
    [255, 225, 25],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [220, 190, 255],
    [170, 110, 40],
    [255, 250, 200],
    [128, 0, 0],
    [170, 255, 195],
    [128, 128, 0],
    [255, 215, 180],
    [0, 0, 128],
    [128, 128, 128],
    [255, 255, 255],
    [100, 60, 20],
    [20, 100, 60],
    [90, 90, 200],
];

/// Counts indexed `[truth - 1][pred - 1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn add(&mut self, truth: u16, pred: u16) {
        self.counts[(truth as usize - 1) * self.classes + pred as usize - 1] += 1;
    }

    /// Row-major counts.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|i| self.get(i, i)).sum()
    }

    fn row_sum(&self, i: usize) -> u64 {
        self.counts[i * self.classes..(i + 1) * self.classes].iter().sum()
    }

    fn col_sum(&self, j: usize) -> u64 {
        (0..self.classes).map(|i| self.get(i, j)).sum()
    }

    /// Recall per class; `None` for classes absent from the truth.
    pub fn per_class_recall(&self) -> Vec<Option<f64>> {
        (0..self.classes)
            .map(|i| {
                let row = self.row_sum(i);
                (row > 0).then(|| self.get(i, i) as f64 / row as f64)
            })
            .collect()
    }
}

/// Confusion over `indices` only.
pub fn confusion(pred: &LabelMap, truth: &LabelMap, indices: &[usize]) -> Result<ConfusionMatrix> {
    if pred.height() != truth.height() || pred.width() != truth.width() {
        return Err(Error::Shape(format!(
            "prediction is {}x{}, truth {}x{}",
            pred.height(),
            pred.width(),
            truth.height(),
            truth.width()
        )));
    }
    let k = truth.num_classes().max(pred.num_classes());
    let mut cm = ConfusionMatrix::new(k);
    for &i in indices {
        let (t, p) = (truth.labels()[i], pred.labels()[i]);
        if t == UNLABELED {
            return Err(Error::Contract(format!("pixel {i} is unlabeled in the truth map")));
        }
        if p == UNLABELED {
            return Err(Error::Contract(format!("pixel {i} is unlabeled in the prediction")));
        }
        cm.add(t, p);
    }
    Ok(cm)
}

fn require_total(cm: &ConfusionMatrix) -> Result<f64> {
    match cm.total() {
        0 => Err(Error::Undefined("accuracy of an empty confusion matrix".into())),
        t => Ok(t as f64),
    }
}

pub fn overall_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    Ok(cm.trace() as f64 / require_total(cm)?)
}

/// Mean recall over classes present in the truth.
pub fn average_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    require_total(cm)?;
    let recalls: Vec<f64> = cm.per_class_recall().into_iter().flatten().collect();
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

/// Cohen's kappa.
pub fn kappa(cm: &ConfusionMatrix) -> Result<f64> {
    let n = require_total(cm)?;
    let po = cm.trace() as f64 / n;
    let pe: f64 = (0..cm.classes())
        .map(|i| cm.row_sum(i) as f64 * cm.col_sum(i) as f64)
        .sum::<f64>()
        / (n * n);
    if (1.0 - pe).abs() < 1e-12 {
        return Err(Error::Undefined("kappa with chance agreement 1".into()));
    }
    Ok((po - pe) / (1.0 - pe))
}

/// Binary PPM image of a label map.
pub fn render_map(labels: &LabelMap) -> Result<Vec<u8>> {
    if labels.num_classes() > PALETTE.len() {
        return Err(Error::Parameter(format!(
            "{} classes exceed the {}-color palette",
            labels.num_classes(),
            PALETTE.len()
        )));
    }
    let mut out = format!("P6\n{} {}\n255\n", labels.width(), labels.height()).into_bytes();
    for &l in labels.labels() {
        let rgb = if l == UNLABELED { [0, 0, 0] } else { PALETTE[l as usize - 1] };
        out.extend_from_slice(&rgb);
    }
    Ok(out)
}

pub fn save_map(labels: &LabelMap, path: &Path) -> Result<()> {
    let bytes = render_map(labels)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Width, height and RGB payload of a binary PPM with maxval 255.
pub fn parse_ppm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PPM header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P6" || fields[3] != "255" {
        return Err(Error::Format(format!("unsupported PPM header {fields:?}")));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Format(format!("bad PPM dimension {s:?}")));
    let (w, h) = (num(&fields[1])?, num(&fields[2])?);
    let payload = bytes.get(pos..).unwrap_or_default();
    if payload.len() != w * h * 3 {
        return Err(Error::Length {
            expected: w * h * 3,
            found: payload.len(),
        });
    }
    Ok((w, h, payload.to_vec()))
}

/// Inverse of [`render_map`] for maps with `classes` classes.
pub fn labels_from_ppm(bytes: &[u8], classes: usize) -> Result<LabelMap> {
    let (w, h, rgb) = parse_ppm(bytes)?;
    let labels = rgb
        .chunks_exact(3)
        .map(|px| {
            if px == [0, 0, 0] {
                return Ok(UNLABELED);
            }
            PALETTE[..classes]
                .iter()
                .position(|c| c == px)
                .map(|i| i as u16 + 1)
                .ok_or_else(|| Error::Format(format!("color {px:?} is not in the palette")))
        })
        .collect::<Result<_>>()?;
    LabelMap::new(h, w, classes, labels)
}

/// Metrics report written as JSON.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub oa: f64,
    pub aa: f64,
    /// `None` when kappa is undefined.
    pub kappa: Option<f64>,
    pub per_class_recall: Vec<Option<f64>>,
    pub confusion: Vec<u64>,
    pub split_seed: u64,
    pub config_hash: String,
}

impl Metrics {
    pub fn from_confusion(cm: &ConfusionMatrix, split_seed: u64, config_hash: String) -> Result<Self> {
        Ok(Metrics {
            oa: overall_accuracy(cm)?,
            aa: average_accuracy(cm)?,
            kappa: kappa(cm).ok(),
            per_class_recall: cm.per_class_recall(),
            confusion: cm.counts().to_vec(),
            split_seed,
            config_hash,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(self.to_json().as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Hex SHA-256 of a config's canonical text.
pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}
