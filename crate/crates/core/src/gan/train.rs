use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{patch_batch, DatasetSplit, HyperCube};
use crate::error::{Error, Result};
use crate::gan::arch::{build_discriminator, build_generator, ArchConfig, Discriminator, Generator, PatchShape, Variant};
use crate::gan::loss::{self, LossReport};
use crate::numerics::{Adam, AdamConfig, Tape, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum GeneratorObjective {
    /// Match batch-mean discriminator features of real and generated patches.
    #[default]
    FeatureMatching,
    /// Minimize `-log(1 - p_fake)` on generated patches.
    NonSaturating,
}

impl std::str::FromStr for GeneratorObjective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "feature_matching" => Ok(GeneratorObjective::FeatureMatching),
            "nonsaturating" => Ok(GeneratorObjective::NonSaturating),
            _ => Err(Error::Parameter(format!("unknown generator objective {s:?}"))),
        }
    }
}

impl std::fmt::Display for GeneratorObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GeneratorObjective::FeatureMatching => "feature_matching",
            GeneratorObjective::NonSaturating => "nonsaturating",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Share of each discriminator batch drawn from labeled pixels; the rest
    /// is unlabeled, and as many generated patches are added.
    pub labeled_fraction: f64,
    pub disc_optim: AdamConfig,
    pub gen_optim: AdamConfig,
    pub seed: u64,
    pub objective: GeneratorObjective,
    pub patch_size: usize,
    pub arch: ArchConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 32,
            labeled_fraction: 0.5,
            disc_optim: AdamConfig::default(),
            gen_optim: AdamConfig::default(),
            seed: 0,
            objective: GeneratorObjective::FeatureMatching,
            patch_size: crate::data::DEFAULT_PATCH_SIZE,
            arch: ArchConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::Parameter(format!("batch_size must be >= 2, got {}", self.batch_size)));
        }
        if !(self.labeled_fraction > 0.0 && self.labeled_fraction < 1.0) {
            return Err(Error::Parameter(format!(
                "labeled_fraction must lie in (0, 1), got {}",
                self.labeled_fraction
            )));
        }
        for (what, a) in [("discriminator", &self.disc_optim), ("generator", &self.gen_optim)] {
            if !(a.lr > 0.0 && a.beta1 > 0.0 && a.beta2 > 0.0 && a.eps > 0.0) || a.beta1 >= 1.0 || a.beta2 >= 1.0 {
                return Err(Error::Parameter(format!("{what} optimizer rates must be positive: {a:?}")));
            }
        }
        if self.patch_size.is_multiple_of(2) {
            return Err(Error::Parameter(format!("patch_size must be odd, got {}", self.patch_size)));
        }
        Ok(())
    }

    fn labeled_per_batch(&self) -> usize {
        ((self.batch_size as f64 * self.labeled_fraction).round() as usize).clamp(1, self.batch_size - 1)
    }
}

/// Discriminator, generator and the loss log of a finished run.
#[derive(Clone, Debug)]
pub struct Trained {
    pub discriminator: Discriminator,
    pub generator: Generator,
    pub log: Vec<LossReport>,
}

/// Alternating discriminator / generator optimization over one scene.
pub struct Trainer<'a> {
    cube: &'a HyperCube,
    labeled: Vec<(usize, u16)>,
    pool: Vec<usize>,
    config: TrainConfig,
    disc: Discriminator,
    gen: Generator,
    d_opt: Adam,
    g_opt: Adam,
    rng: ChaCha8Rng,
    log: Vec<LossReport>,
    epochs_done: usize,
}

impl<'a> Trainer<'a> {
    /// Build freshly initialized networks for `variant`.
    ///
    /// The unlabeled pool is every pixel of the scene with its label ignored.
    pub fn new(cube: &'a HyperCube, split: &DatasetSplit, num_classes: usize, variant: Variant, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if split.train.is_empty() {
            return Err(Error::Parameter("split has no labeled training pixels".into()));
        }
        if let Some(&(p, l)) = split
            .train
            .iter()
            .find(|&&(p, l)| p >= cube.pixels() || l == 0 || l as usize > num_classes)
        {
            return Err(Error::Contract(format!("training pixel {p} with label {l} is invalid")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let patch = PatchShape {
            size: config.patch_size,
            bands: cube.bands(),
        };
        let disc = build_discriminator(variant, num_classes, patch, &config.arch, &mut rng)?;
        let gen = build_generator(patch, &config.arch, &mut rng)?;
        let d_opt = Adam::new(config.disc_optim, &disc.params);
        let g_opt = Adam::new(config.gen_optim, &gen.params);
        Ok(Trainer {
            cube,
            labeled: split.train.clone(),
            pool: (0..cube.pixels()).collect(),
            config,
            disc,
            gen,
            d_opt,
            g_opt,
            rng,
            log: Vec::new(),
            epochs_done: 0,
        })
    }

    pub fn discriminator(&self) -> &Discriminator {
        &self.disc
    }

    pub fn generator(&self) -> &Generator {
        &self.gen
    }

    pub fn log(&self) -> &[LossReport] {
        &self.log
    }

    pub fn epochs_done(&self) -> usize {
        self.epochs_done
    }

    /// Run every configured epoch. On a non-finite loss or gradient the
    /// networks keep their last successfully updated values.
    pub fn run(&mut self) -> Result<()> {
        while self.epochs_done < self.config.epochs {
            self.epoch()?;
        }
        Ok(())
    }

    pub fn epoch(&mut self) -> Result<()> {
        let per = self.config.labeled_per_batch();
        let mut order = self.labeled.clone();
        order.shuffle(&mut self.rng);
        for chunk in order.chunks(per) {
            let report = self.step(chunk)?;
            self.log.push(report);
        }
        self.epochs_done += 1;
        if let Some(last) = self.log.last() {
            log::debug!(
                "epoch {} l1={:.4} l2={:.4} l3={:.4} fm={:.4}",
                self.epochs_done,
                last.l1,
                last.l2,
                last.l3,
                last.feature_match
            );
        }
        Ok(())
    }

    fn step(&mut self, labeled: &[(usize, u16)]) -> Result<LossReport> {
        let size = self.config.patch_size;
        let n_unl = self.config.batch_size - self.config.labeled_per_batch();
        let n_lab = labeled.len();

        let unl: Vec<usize> = (0..n_unl)
            .map(|_| self.pool[self.rng.gen_range(0..self.pool.len())])
            .collect();
        let noise = self.gen.sample_noise(n_unl, &mut self.rng);
        let fake = self.gen.forward(&mut Tape::inference(), noise)?;

        // Discriminator: labeled, unlabeled and generated rows in one batch.
        let mut pixels: Vec<usize> = labeled.iter().map(|&(p, _)| p).collect();
        pixels.extend_from_slice(&unl);
        let real = patch_batch(self.cube, &pixels, size);
        let batch = concat_rows(&real, &fake)?;
        let mut tape = Tape::new();
        let logits = self.disc.logits(&mut tape, batch)?;
        let mut grad = Tensor::zeros(logits.shape());
        let (mut l1, mut l2, mut l3) = (0.0, 0.0, 0.0);
        for i in 0..logits.shape()[0] {
            let row = logits.row(i);
            let (value, g, total, count) = if i < n_lab {
                let (v, g) = loss::loss_supervised_grad(row, labeled[i].1)?;
                (v, g, &mut l1, n_lab)
            } else if i < n_lab + n_unl {
                let (v, g) = loss::loss_unsup_real_grad(row)?;
                (v, g, &mut l2, n_unl)
            } else {
                let (v, g) = loss::loss_unsup_fake_grad(row)?;
                (v, g, &mut l3, n_unl)
            };
            let scale = 1.0 / count as f64;
            *total += value * scale;
            for (dst, gv) in grad.row_mut(i).iter_mut().zip(g) {
                *dst = gv * scale;
            }
        }
        if !(l1.is_finite() && l2.is_finite() && l3.is_finite()) {
            return Err(Error::NonFinite(format!(
                "discriminator loss at step {}: l1={l1} l2={l2} l3={l3}",
                self.log.len()
            )));
        }
        let d_grads = tape.backward(&self.disc.params, grad)?;
        self.d_opt.step(&mut self.disc.params, &d_grads.params)?;

        // Generator.
        let real_unl = patch_batch(self.cube, &unl, size);
        let real_features = self.disc.features(&mut Tape::inference(), real_unl)?;
        let noise = self.gen.sample_noise(n_unl, &mut self.rng);
        let mut g_tape = Tape::new();
        let fake = self.gen.forward(&mut g_tape, noise)?;
        let mut d_tape = Tape::new();
        let (fm, upstream) = match self.config.objective {
            GeneratorObjective::FeatureMatching => {
                let fake_features = self.disc.features(&mut d_tape, fake)?;
                let (fm, g) = loss::feature_matching_grad(&real_features, &fake_features)?;
                (fm, g)
            }
            GeneratorObjective::NonSaturating => {
                let fake_features = self.disc.features(&mut Tape::inference(), fake.clone())?;
                let fm = loss::feature_matching_loss(&real_features, &fake_features)?;
                let logits = self.disc.logits(&mut d_tape, fake)?;
                let mut g = Tensor::zeros(logits.shape());
                let scale = 1.0 / n_unl as f64;
                for i in 0..n_unl {
                    let (_, gi) = loss::loss_unsup_real_grad(logits.row(i))?;
                    for (dst, v) in g.row_mut(i).iter_mut().zip(gi) {
                        *dst = v * scale;
                    }
                }
                (fm, g)
            }
        };
        if !fm.is_finite() {
            return Err(Error::NonFinite(format!("feature matching loss at step {}", self.log.len())));
        }
        let to_fake = d_tape.backward(&self.disc.params, upstream)?.input;
        let g_grads = g_tape.backward(&self.gen.params, to_fake)?;
        self.g_opt.step(&mut self.gen.params, &g_grads.params)?;
        Ok(LossReport::new(l1, l2, l3, fm))
    }

    pub fn into_trained(self) -> Trained {
        Trained {
            discriminator: self.disc,
            generator: self.gen,
            log: self.log,
        }
    }
}

/// Train `variant` on `cube` from scratch.
pub fn train(cube: &HyperCube, split: &DatasetSplit, num_classes: usize, variant: Variant, config: &TrainConfig) -> Result<Trained> {
    let mut trainer = Trainer::new(cube, split, num_classes, variant, config.clone())?;
    trainer.run()?;
    Ok(trainer.into_trained())
}

/// CSV training log, one row per step.
pub fn log_csv(log: &[LossReport]) -> String {
    let mut out = String::from("step,l1,l2,l3,total,feature_match\n");
    for (i, r) in log.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{},{},{},{}", r.l1, r.l2, r.l3, r.total, r.feature_match);
    }
    out
}

pub fn save_log(log: &[LossReport], path: &Path) -> Result<()> {
    std::fs::write(path, log_csv(log)).map_err(|e| Error::io(path, e))
}

fn concat_rows(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    if a.shape()[1..] != b.shape()[1..] {
        return Err(Error::Shape(format!("cannot concatenate {:?} and {:?}", a.shape(), b.shape())));
    }
    let mut shape = a.shape().to_vec();
    shape[0] += b.shape()[0];
    let mut data = Vec::with_capacity(a.len() + b.len());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Tensor::new(&shape, data)
}
