use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::labels::{LabelMap, UNLABELED};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Train,
    Test,
    Unlabeled,
}

impl Role {
    fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Test => "test",
            Role::Unlabeled => "unlabeled",
        }
    }
}

/// Labeled training pixels, held-out test pixels and the unlabeled pool.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSplit {
    pub train: Vec<(usize, u16)>,
    pub test: Vec<(usize, u16)>,
    pub unlabeled: Vec<usize>,
    pub seed: u64,
    /// Classes in `1..=K` without a single labeled pixel.
    pub warnings: Vec<String>,
}

impl DatasetSplit {
    pub fn test_pixels(&self) -> Vec<usize> {
        self.test.iter().map(|&(p, _)| p).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("pixel_index,label,role\n");
        for &(p, l) in &self.train {
            let _ = writeln!(out, "{p},{l},{}", Role::Train.as_str());
        }
        for &(p, l) in &self.test {
            let _ = writeln!(out, "{p},{l},{}", Role::Test.as_str());
        }
        for &p in &self.unlabeled {
            let _ = writeln!(out, "{p},{UNLABELED},{}", Role::Unlabeled.as_str());
        }
        out
    }

    pub fn from_csv(text: &str, seed: u64) -> Result<DatasetSplit> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("pixel_index,label,role") {
            return Err(Error::Format("split CSV header must be pixel_index,label,role".into()));
        }
        let mut split = DatasetSplit {
            train: Vec::new(),
            test: Vec::new(),
            unlabeled: Vec::new(),
            seed,
            warnings: Vec::new(),
        };
        for (n, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            let bad = || Error::Format(format!("split CSV line {}: {line:?}", n + 2));
            if f.len() != 3 {
                return Err(bad());
            }
            let p: usize = f[0].parse().map_err(|_| bad())?;
            let l: u16 = f[1].parse().map_err(|_| bad())?;
            match f[2] {
                "train" => split.train.push((p, l)),
                "test" => split.test.push((p, l)),
                "unlabeled" => split.unlabeled.push(p),
                _ => return Err(bad()),
            }
        }
        Ok(split)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path, seed: u64) -> Result<DatasetSplit> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, seed)
    }
}

/// Draw `n_per_class` training pixels per class without replacement.
///
/// Classes with fewer labeled pixels contribute `ceil(count / 2)` to
/// training. Every other labeled pixel goes to test; label-0 pixels form the
/// unlabeled pool.
pub fn make_split(labels: &LabelMap, n_per_class: usize, seed: u64) -> Result<DatasetSplit> {
    if n_per_class == 0 {
        return Err(Error::Parameter("n_per_class must be at least 1".into()));
    }
    let k = labels.num_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k + 1];
    for (p, &l) in labels.labels().iter().enumerate() {
        by_class[l as usize].push(p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut warnings = Vec::new();
    for (class, pixels) in by_class.iter_mut().enumerate().skip(1) {
        if pixels.is_empty() {
            warnings.push(format!("class {class} has no labeled pixels"));
            continue;
        }
        pixels.shuffle(&mut rng);
        let take = if pixels.len() >= n_per_class {
            n_per_class
        } else {
            pixels.len().div_ceil(2)
        };
        train.extend(pixels[..take].iter().map(|&p| (p, class as u16)));
        test.extend(pixels[take..].iter().map(|&p| (p, class as u16)));
    }
    test.sort_unstable();
    Ok(DatasetSplit {
        train,
        test,
        unlabeled: by_class[0].clone(),
        seed,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn three_classes() -> LabelMap {
        let mut labels = vec![0u16; 160];
        for (i, l) in labels.iter_mut().enumerate().take(150) {
            *l = (i % 3 + 1) as u16;
        }
        LabelMap::new(16, 10, 3, labels).unwrap()
    }

    #[test]
    fn ten_per_class() {
        let s = make_split(&three_classes(), 10, 1).unwrap();
        assert_eq!(s.train.len(), 30);
        assert_eq!(s.test.len(), 120);
        assert_eq!(s.unlabeled.len(), 10);
        for class in 1..=3 {
            assert_eq!(s.train.iter().filter(|&&(_, l)| l == class).count(), 10);
        }
    }

    #[test]
    fn exhausting_a_class_leaves_no_test() {
        let s = make_split(&three_classes(), 50, 1).unwrap();
        assert!(s.test.is_empty());
        assert_eq!(s.train.len(), 150);
    }

    #[test]
    fn small_class_gives_half_rounded_up() {
        let labels = LabelMap::new(1, 5, 2, vec![1, 1, 1, 2, 2]).unwrap();
        let s = make_split(&labels, 10, 3).unwrap();
        assert_eq!(s.train.iter().filter(|&&(_, l)| l == 1).count(), 2);
        assert_eq!(s.train.iter().filter(|&&(_, l)| l == 2).count(), 1);
        assert_eq!(s.test.len(), 2);
    }

    #[test]
    fn empty_class_is_a_warning() {
        let labels = LabelMap::new(1, 3, 3, vec![1, 1, 3]).unwrap();
        let s = make_split(&labels, 1, 0).unwrap();
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn deterministic_and_disjoint() {
        let a = make_split(&three_classes(), 7, 42).unwrap();
        let b = make_split(&three_classes(), 7, 42).unwrap();
        assert_eq!(a, b);
        let mut seen = HashSet::new();
        for p in a.train.iter().map(|x| x.0).chain(a.test.iter().map(|x| x.0)).chain(a.unlabeled.iter().copied()) {
            assert!(seen.insert(p));
        }
        assert_eq!(seen.len(), 160);
    }

    #[test]
    fn zero_per_class_rejected() {
        assert!(make_split(&three_classes(), 0, 0).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = make_split(&three_classes(), 5, 9).unwrap();
        let back = DatasetSplit::from_csv(&s.to_csv(), 9).unwrap();
        assert_eq!(back.train, s.train);
        assert_eq!(back.test, s.test);
        assert_eq!(back.unlabeled, s.unlabeled);
    }
}
