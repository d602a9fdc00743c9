//! Batch pipeline behind the `hsigan` binary: synthesize, train, refine and
//! evaluate from one flat config file.
//!
//! ```text
//! # comment
//! variant = SS
//! epochs = 200
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::crf::{map_labeling, mean_field_infer, CrfParams, FeatureField, ProbabilityMap};
use crate::data::{load_cube, load_labels, make_split, save_cube, save_labels, synth_scene, DatasetSplit, HyperCube, LabelMap, Normalization, SynthSpec};
use crate::error::{Error, Result};
use crate::eval::{config_hash, confusion, save_map, Metrics};
use crate::gan::{build_discriminator, build_generator, predict_map, save_log, ArchConfig, Discriminator, PatchShape, TrainConfig, Trainer, Variant};
use crate::numerics::{checkpoint, ParamSet};

/// Files written by [`cmd_refine`], relative to its output directory.
pub const REFINE_OUTPUTS: [&str; 6] = ["probs.hsi", "probs_crf.hsi", "map.ppm", "map_crf.ppm", "metrics.json", "metrics_crf.json"];

/// Every setting of a pipeline run. All fields have defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    /// Scene cube; empty means the synthetic scene.
    pub cube: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub synth: SynthSpec,
    pub normalization: Normalization,
    pub variant: Variant,
    pub train: TrainConfig,
    pub crf: CrfParams,
    pub n_per_class: usize,
    /// Checkpoint read by `refine`; defaults to the one `train` writes.
    pub checkpoint: Option<PathBuf>,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            cube: None,
            labels: None,
            synth: SynthSpec::default(),
            normalization: Normalization::default(),
            variant: Variant::Ss,
            train: TrainConfig {
                arch: ArchConfig {
                    spectral_width: 8,
                    spatial_width: 16,
                    noise_dim: 16,
                    ..ArchConfig::default()
                },
                ..TrainConfig::default()
            },
            crf: CrfParams::default(),
            n_per_class: 10,
            checkpoint: None,
            out: PathBuf::from("out"),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

fn normalization_name(n: Normalization) -> &'static str {
    match n {
        Normalization::PerBandMinMax => "per_band_minmax",
        Normalization::PerBandZScore => "per_band_zscore",
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = PipelineConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got {raw:?}", n + 1)))?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {}", n + 1, e.to_string().trim_start_matches("config error: "))))?;
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        match key {
            "cube" => self.cube = opt_path(value),
            "labels" => self.labels = opt_path(value),
            "synth_height" => self.synth.height = parse(key, value)?,
            "synth_width" => self.synth.width = parse(key, value)?,
            "synth_bands" => self.synth.bands = parse(key, value)?,
            "synth_classes" => self.synth.classes = parse(key, value)?,
            "synth_noise" => self.synth.noise_sigma = parse(key, value)?,
            "synth_seed" => self.synth.seed = parse(key, value)?,
            "normalization" => self.normalization = parse(key, value)?,
            "variant" => self.variant = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "labeled_fraction" => t.labeled_fraction = parse(key, value)?,
            "lr_d" => t.disc_optim.lr = parse(key, value)?,
            "lr_g" => t.gen_optim.lr = parse(key, value)?,
            "beta1" => {
                t.disc_optim.beta1 = parse(key, value)?;
                t.gen_optim.beta1 = t.disc_optim.beta1;
            }
            "beta2" => {
                t.disc_optim.beta2 = parse(key, value)?;
                t.gen_optim.beta2 = t.disc_optim.beta2;
            }
            "objective" => t.objective = parse(key, value)?,
            "patch_size" => t.patch_size = parse(key, value)?,
            "spectral_width" => t.arch.spectral_width = parse(key, value)?,
            "spatial_width" => t.arch.spatial_width = parse(key, value)?,
            "spectral_kernel" => t.arch.spectral_kernel = parse(key, value)?,
            "spatial_kernel" => t.arch.spatial_kernel = parse(key, value)?,
            "spectral_stride" => t.arch.spectral_stride = parse(key, value)?,
            "noise_dim" => t.arch.noise_dim = parse(key, value)?,
            "n_per_class" => self.n_per_class = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "crf_w1" => self.crf.w1 = parse(key, value)?,
            "crf_w2" => self.crf.w2 = parse(key, value)?,
            "crf_theta_alpha" => self.crf.theta_alpha = parse(key, value)?,
            "crf_theta_beta" => self.crf.theta_beta = parse(key, value)?,
            "crf_theta_gamma" => self.crf.theta_gamma = parse(key, value)?,
            "crf_iterations" => self.crf.iterations = parse(key, value)?,
            "crf_unary_floor" => self.crf.unary_floor = parse(key, value)?,
            "checkpoint" => self.checkpoint = opt_path(value),
            "out" => self.out = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        vec![
            ("cube", show_path(&self.cube)),
            ("labels", show_path(&self.labels)),
            ("synth_height", self.synth.height.to_string()),
            ("synth_width", self.synth.width.to_string()),
            ("synth_bands", self.synth.bands.to_string()),
            ("synth_classes", self.synth.classes.to_string()),
            ("synth_noise", self.synth.noise_sigma.to_string()),
            ("synth_seed", self.synth.seed.to_string()),
            ("normalization", normalization_name(self.normalization).to_string()),
            ("variant", self.variant.to_string()),
            ("epochs", t.epochs.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("labeled_fraction", t.labeled_fraction.to_string()),
            ("lr_d", t.disc_optim.lr.to_string()),
            ("lr_g", t.gen_optim.lr.to_string()),
            ("beta1", t.disc_optim.beta1.to_string()),
            ("beta2", t.disc_optim.beta2.to_string()),
            ("objective", t.objective.to_string()),
            ("patch_size", t.patch_size.to_string()),
            ("spectral_width", t.arch.spectral_width.to_string()),
            ("spatial_width", t.arch.spatial_width.to_string()),
            ("spectral_kernel", t.arch.spectral_kernel.to_string()),
            ("spatial_kernel", t.arch.spatial_kernel.to_string()),
            ("spectral_stride", t.arch.spectral_stride.to_string()),
            ("noise_dim", t.arch.noise_dim.to_string()),
            ("n_per_class", self.n_per_class.to_string()),
            ("seed", t.seed.to_string()),
            ("crf_w1", self.crf.w1.to_string()),
            ("crf_w2", self.crf.w2.to_string()),
            ("crf_theta_alpha", self.crf.theta_alpha.to_string()),
            ("crf_theta_beta", self.crf.theta_beta.to_string()),
            ("crf_theta_gamma", self.crf.theta_gamma.to_string()),
            ("crf_iterations", self.crf.iterations.to_string()),
            ("crf_unary_floor", self.crf.unary_floor.to_string()),
            ("checkpoint", show_path(&self.checkpoint)),
            ("out", self.out.display().to_string()),
        ]
    }

    /// Config file text that parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Hash of every setting that influences results; `out` is excluded.
    pub fn hash(&self) -> String {
        let mut text = String::new();
        for (k, v) in self.entries().into_iter().filter(|(k, _)| *k != "out") {
            let _ = writeln!(text, "{k} = {v}");
        }
        config_hash(&text)
    }

    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.train.seed = seed;
    }

    /// Checks the scene settings only; enough for `synth`.
    pub fn validate_scene(&self) -> Result<()> {
        if self.cube.is_some() != self.labels.is_some() {
            return Err(Error::Config("cube and labels must be given together".into()));
        }
        let s = &self.synth;
        if s.height == 0 || s.width == 0 || s.bands < 2 || s.classes < 2 || s.classes > s.height * s.width {
            return Err(Error::Config(format!("invalid synthetic scene {s:?}")));
        }
        Ok(())
    }

    /// Checks every setting; architecture checks need the synthetic scene's
    /// shape and are skipped for file data until it is loaded.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.validate_scene()?;
        self.train.validate().map_err(wrap)?;
        if self.n_per_class == 0 {
            return Err(Error::Config("n_per_class must be >= 1".into()));
        }
        if self.cube.is_none() {
            let s = &self.synth;
            self.crf.validate(s.classes).map_err(wrap)?;
            let patch = PatchShape {
                size: self.train.patch_size,
                bands: s.bands,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            build_discriminator(self.variant, s.classes, patch, &self.train.arch, &mut rng).map_err(wrap)?;
        }
        Ok(())
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out.join(format!("{}_{}.ckpt", self.variant, self.train.epochs)))
    }

    pub fn refine_dir(&self) -> PathBuf {
        self.out.join("refine")
    }
}

/// Process exit code for an error: 1 config, 2 data, 3 numeric.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Parameter(_) | Error::Shape(_) | Error::State(_) => 1,
        Error::Format(_) | Error::Length { .. } | Error::Contract(_) | Error::Io { .. } => 2,
        Error::NonFinite(_) | Error::Undefined(_) => 3,
    }
}

/// Raw scene and labels, from files or synthesized.
pub fn load_scene(config: &PipelineConfig) -> Result<(HyperCube, LabelMap)> {
    match (&config.cube, &config.labels) {
        (Some(c), Some(l)) => {
            let cube = load_cube(c)?;
            let labels = load_labels(l)?;
            if (cube.height(), cube.width()) != (labels.height(), labels.width()) {
                return Err(Error::Format(format!(
                    "cube is {}x{} but labels are {}x{}",
                    cube.height(),
                    cube.width(),
                    labels.height(),
                    labels.width()
                )));
            }
            Ok((cube, labels))
        }
        _ => synth_scene(&config.synth),
    }
}

fn prepare(config: &PipelineConfig) -> Result<(HyperCube, LabelMap, DatasetSplit)> {
    let (raw, labels) = load_scene(config)?;
    let cube = raw.normalize(config.normalization)?;
    let split = make_split(&labels, config.n_per_class, config.seed())?;
    for w in &split.warnings {
        log::warn!("{w}");
    }
    Ok((cube, labels, split))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Describe what a command would do without touching the filesystem.
pub fn dry_run(command: &str, config: &PipelineConfig) -> Result<String> {
    if command == "synth" {
        config.validate_scene()?;
    } else {
        config.validate()?;
    }
    let mut out = format!("{command}: configuration is valid\n");
    let targets: Vec<PathBuf> = match command {
        "synth" => vec![config.out.join("cube.hsi"), config.out.join("labels.pgm")],
        "train" => vec![config.checkpoint_path(), config.out.join("split.csv"), config.out.join("train_log.csv")],
        "refine" => REFINE_OUTPUTS.iter().map(|f| config.refine_dir().join(f)).collect(),
        "eval" => vec![],
        _ => return Err(Error::Config(format!("unknown command {command:?}"))),
    };
    for t in targets {
        let _ = writeln!(out, "would write {}", t.display());
    }
    Ok(out)
}

/// Write the synthetic scene as `cube.hsi` and `labels.pgm`.
pub fn cmd_synth(config: &PipelineConfig) -> Result<Vec<PathBuf>> {
    config.validate_scene()?;
    let (cube, labels) = synth_scene(&config.synth)?;
    create_dir(&config.out)?;
    let cube_path = config.out.join("cube.hsi");
    let labels_path = config.out.join("labels.pgm");
    save_cube(&cube, &cube_path)?;
    save_labels(&labels, &labels_path)?;
    Ok(vec![cube_path, labels_path])
}

fn joint_params(disc: &Discriminator, gen_params: &ParamSet) -> ParamSet {
    let mut all = ParamSet::new();
    for p in disc.params.iter().chain(gen_params.iter()) {
        all.add(p.name.clone(), p.value.clone(), p.trainable);
    }
    all
}

/// Train the configured variant and write its checkpoint, split and loss log.
///
/// On a non-finite loss the last good parameters are still written, to
/// `{variant}_{epochs_done}.ckpt`, before the error is returned.
pub fn cmd_train(config: &PipelineConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let (cube, labels, split) = prepare(config)?;
    create_dir(&config.out)?;
    let split_path = config.out.join("split.csv");
    split.save(&split_path)?;
    let mut trainer = Trainer::new(&cube, &split, labels.num_classes(), config.variant, config.train.clone())?;
    let outcome = trainer.run();
    let log_path = config.out.join("train_log.csv");
    save_log(trainer.log(), &log_path)?;
    let ckpt = match &outcome {
        Ok(()) => config.checkpoint_path(),
        Err(_) => config.out.join(format!("{}_{}.ckpt", config.variant, trainer.epochs_done())),
    };
    checkpoint::save(&joint_params(trainer.discriminator(), &trainer.generator().params), &ckpt)?;
    outcome?;
    Ok(vec![ckpt, split_path, log_path])
}

/// Rebuild the configured discriminator and load its weights from `path`.
pub fn load_discriminator(config: &PipelineConfig, bands: usize, classes: usize, path: &Path) -> Result<Discriminator> {
    let patch = PatchShape {
        size: config.train.patch_size,
        bands,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed());
    let mut disc = build_discriminator(config.variant, classes, patch, &config.train.arch, &mut rng)?;
    let gen = build_generator(patch, &config.train.arch, &mut rng)?;
    let mut entries = checkpoint::load(path)?;
    let expected = disc.params.len() + gen.params.len();
    if entries.len() != expected {
        return Err(Error::Shape(format!(
            "checkpoint {} holds {} parameters, {} {} with {classes} classes expects {expected}",
            path.display(),
            entries.len(),
            config.variant,
            "discriminator and generator"
        )));
    }
    entries.truncate(disc.params.len());
    disc.params.assign(entries)?;
    Ok(disc)
}

/// Predict, refine with the CRF, and write maps and metrics for both.
pub fn cmd_refine(config: &PipelineConfig) -> Result<Vec<PathBuf>> {
    config.validate()?;
    let (cube, labels, split) = prepare(config)?;
    let classes = labels.num_classes();
    config.crf.validate(classes).map_err(|e| Error::Config(e.to_string()))?;
    let disc = load_discriminator(config, cube.bands(), classes, &config.checkpoint_path())?;
    let probs = predict_map(&disc, &cube)?;
    let refined = mean_field_infer(&probs, &FeatureField::from_cube(&cube), &config.crf)?;

    let dir = config.refine_dir();
    create_dir(&dir)?;
    let test = split.test_pixels();
    let hash = config.hash();
    let mut written = Vec::new();
    for (map, suffix) in [(&probs, ""), (&refined, "_crf")] {
        let probs_path = dir.join(format!("probs{suffix}.hsi"));
        save_cube(&map.to_cube(), &probs_path)?;
        let pred = map_labeling(map);
        let map_path = dir.join(format!("map{suffix}.ppm"));
        save_map(&pred, &map_path)?;
        let metrics = Metrics::from_confusion(&confusion(&pred, &labels, &test)?, split.seed, hash.clone())?;
        let metrics_path = dir.join(format!("metrics{suffix}.json"));
        metrics.save(&metrics_path)?;
        written.extend([probs_path, map_path, metrics_path]);
    }
    Ok(written)
}

/// Without / with CRF comparison table from the metrics `refine` wrote.
pub fn cmd_eval(config: &PipelineConfig) -> Result<String> {
    config.validate()?;
    let dir = config.refine_dir();
    let read = |name: &str| -> Result<serde_json::Value> {
        let path = dir.join(name);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    };
    let (plain, crf) = (read("metrics.json")?, read("metrics_crf.json")?);
    let cell = |v: &serde_json::Value, k: &str| v[k].as_f64().map_or_else(|| "undefined".to_string(), |x| format!("{:.2}", 100.0 * x));
    let mut out = format!("{:<8} {:>12} {:>12}\n", config.variant, "Without CRF", "With CRF");
    for (label, key) in [("OA", "oa"), ("AA", "aa"), ("kappa", "kappa")] {
        let _ = writeln!(out, "{label:<8} {:>12} {:>12}", cell(&plain, key), cell(&crf, key));
    }
    Ok(out)
}

/// Probability map with `smoothing` mass spread from each one-hot label.
pub fn label_probabilities(labels: &LabelMap, smoothing: f64) -> Result<ProbabilityMap> {
    ProbabilityMap::from_labels(labels.height(), labels.width(), labels.num_classes(), labels.labels(), smoothing)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_text() {
        let c = PipelineConfig::default();
        assert_eq!(PipelineConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn every_key_is_settable() {
        let c = PipelineConfig::default();
        let mut d = PipelineConfig::default();
        for (k, v) in c.entries() {
            d.set(k, &v).unwrap();
        }
        assert_eq!(c, d);
    }

    #[test]
    fn comments_and_blank_lines() {
        let c = PipelineConfig::parse("# header\n\nvariant = spc  # trailing\nepochs=3\n").unwrap();
        assert_eq!(c.variant, Variant::Spc);
        assert_eq!(c.train.epochs, 3);
    }

    #[test]
    fn unknown_key_is_error() {
        let e = PipelineConfig::parse("epohcs = 3\n").unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(e.to_string().contains("epohcs"));
        assert_eq!(exit_code(&e), 1);
    }

    #[test]
    fn bad_value_is_error() {
        assert!(matches!(PipelineConfig::parse("epochs = many\n"), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::parse("variant = XYZ\n"), Err(Error::Config(_))));
        assert!(matches!(PipelineConfig::parse("just text\n"), Err(Error::Config(_))));
    }

    #[test]
    fn hash_ignores_out_only() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.out = "elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.set_seed(9);
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn validate_rejects_tiny_patch() {
        let c = PipelineConfig::parse("patch_size = 1\n").unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Format("x".into())), 2);
        assert_eq!(exit_code(&Error::NonFinite("x".into())), 3);
        assert_eq!(exit_code(&Error::Shape("x".into())), 1);
    }
}
