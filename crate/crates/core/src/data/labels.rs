use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Label reserved for unlabeled or background pixels.
pub const UNLABELED: u16 = 0;

/// Per-pixel class ids: `0` is unlabeled, classes are `1..=num_classes`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    num_classes: usize,
    labels: Vec<u16>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, num_classes: usize, labels: Vec<u16>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::Length {
                expected: height * width,
                found: labels.len(),
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l as usize > num_classes) {
            return Err(Error::Parameter(format!(
                "label {bad} exceeds class count {num_classes}"
            )));
        }
        Ok(LabelMap {
            height,
            width,
            num_classes,
            labels,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn labels(&self) -> &[u16] {
        &self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.labels[row * self.width + col]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Number of pixels carrying each class; index 0 counts unlabeled pixels.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes + 1];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }
}

/// Serialize as ASCII PGM (`P2`), `maxval = num_classes`.
pub fn write_pgm<W: Write>(map: &LabelMap, mut out: W) -> std::io::Result<()> {
    writeln!(out, "P2")?;
    writeln!(out, "{} {}", map.width, map.height)?;
    writeln!(out, "{}", map.num_classes.max(1))?;
    for row in map.labels.chunks(map.width) {
        let line: Vec<String> = row.iter().map(|l| l.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn parse_pgm(text: &str) -> Result<LabelMap> {
    let mut tokens = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(Error::Format("label file must be an ASCII PGM (P2)".into()));
    }
    let mut num = |what: &str| -> Result<usize> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| Error::Format(format!("PGM {what} missing or invalid")))
    };
    let width = num("width")?;
    let height = num("height")?;
    let maxval = num("maxval")?;
    let mut labels = Vec::with_capacity(width * height);
    for _ in 0..width * height {
        let v = num("pixel")?;
        if v > maxval {
            return Err(Error::Format(format!("pixel value {v} exceeds maxval {maxval}")));
        }
        labels.push(v as u16);
    }
    LabelMap::new(height, width, maxval, labels)
}

pub fn load_labels(path: &Path) -> Result<LabelMap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pgm(&text)
}

pub fn save_labels(map: &LabelMap, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    write_pgm(map, &mut buf).expect("in-memory write");
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}
