//! Run configuration and its text format.
//!
//! The format is flat `key = value` lines grouped under `[section]`
//! headers; `#` starts a comment line. Every key belongs to exactly one
//! section and unknown keys are rejected. Lists are comma separated.
//!
//! ```text
//! [quantum]
//! data_qubits = 8
//! layers = 6
//!
//! [training]
//! epochs = 10
//! ```
//!
//! [`RunConfig::to_text`] writes every field, so a serialized config is a
//! complete record of the run.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::calibration::{CalibrationConfig, Stage};
use crate::critic::CriticConfig;
use crate::data::{DatasetSpec, ResizePolicy};
use crate::encoder::EncoderConfig;
use crate::error::{Error, Result};
use crate::quantum::RotationSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Ablation {
    #[default]
    None,
    /// Circuit angles drawn i.i.d. from `U(0, 1)` instead of the encoder.
    NoiseUniform01,
    /// Circuit angles drawn i.i.d. from `N(0, 1)` instead of the encoder.
    NoiseGauss,
    /// `p / max(p)` replaces the calibration cascade.
    MapMax,
    /// One calibration stage disabled.
    CalibKnockout(Stage),
}

impl Ablation {
    pub fn name(self) -> String {
        match self {
            Ablation::None => "none".into(),
            Ablation::NoiseUniform01 => "noise_uniform01".into(),
            Ablation::NoiseGauss => "noise_gauss".into(),
            Ablation::MapMax => "map_max".into(),
            Ablation::CalibKnockout(s) => format!("calib_knockout:{}", s.name()),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Ablation::None),
            "noise_uniform01" => Some(Ablation::NoiseUniform01),
            "noise_gauss" => Some(Ablation::NoiseGauss),
            "map_max" => Some(Ablation::MapMax),
            _ => s
                .strip_prefix("calib_knockout:")
                .and_then(Stage::parse)
                .map(Ablation::CalibKnockout),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub data_qubits: usize,
    pub layers: usize,
    pub rotations: RotationSet,
    pub encoder: EncoderConfig,
    pub critic: CriticConfig,
    pub calibration: CalibrationConfig<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub n_critic: usize,
    pub lr_critic: f64,
    pub lr_encoder: f64,
    pub lr_pqc: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Linear decay of every learning rate to zero over `epochs`.
    pub lr_decay: bool,
    pub seed: u64,
    pub ablation: Ablation,
    /// Write a sample montage every this many epochs (0 disables).
    pub montage_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            data_qubits: 10,
            layers: 6,
            rotations: RotationSet::YZ,
            encoder: EncoderConfig::default(),
            critic: CriticConfig::default(),
            calibration: CalibrationConfig::default(),
            epochs: 50,
            batch_size: 5,
            n_critic: 5,
            lr_critic: 2e-4,
            lr_encoder: 2e-4,
            lr_pqc: 1e-2,
            adam_beta1: 0.0,
            adam_beta2: 0.9,
            adam_eps: 1e-8,
            lr_decay: false,
            seed: 0,
            ablation: Ablation::None,
            montage_every: 5,
        }
    }
}

impl TrainConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.data_qubits == 0 || self.data_qubits % 2 != 0 {
            out.push(format!(
                "quantum.data_qubits must be even and >= 2 (got {})",
                self.data_qubits
            ));
        } else if self.data_qubits > 16 {
            out.push(format!("quantum.data_qubits must be <= 16 (got {})", self.data_qubits));
        }
        if self.layers == 0 {
            out.push("quantum.layers must be >= 1".into());
        }
        if self.encoder.hidden.iter().any(|&w| w == 0) {
            out.push("encoder.hidden widths must be >= 1".into());
        }
        if !(self.encoder.alpha_min > 0.0) {
            out.push("encoder.alpha_min must be > 0".into());
        }
        if self.critic.hidden.iter().any(|&w| w == 0) {
            out.push("critic.hidden widths must be >= 1".into());
        }
        if !(self.critic.lambda_gp >= 0.0) {
            out.push("critic.lambda_gp must be >= 0".into());
        }
        if !(0.0..1.0).contains(&self.critic.leaky_slope) {
            out.push("critic.leaky_slope must lie in [0, 1)".into());
        }
        let mut cal = self.calibration;
        if let Ablation::CalibKnockout(stage) = self.ablation {
            cal.stages = cal.stages.without(stage);
        }
        out.extend(cal.problems());
        if self.epochs == 0 {
            out.push("training.epochs must be >= 1".into());
        }
        if self.batch_size == 0 {
            out.push("training.batch_size must be >= 1".into());
        }
        if self.n_critic == 0 {
            out.push("training.n_critic must be >= 1".into());
        }
        for (name, v) in [
            ("lr_critic", self.lr_critic),
            ("lr_encoder", self.lr_encoder),
            ("lr_pqc", self.lr_pqc),
            ("adam_eps", self.adam_eps),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("training.{name} must be > 0 (got {v})"));
            }
        }
        if !(0.0..1.0).contains(&self.adam_beta1) {
            out.push(format!("training.adam_beta1 must lie in [0, 1) (got {})", self.adam_beta1));
        }
        if !(self.adam_beta2 > 0.0 && self.adam_beta2 < 1.0) {
            out.push(format!("training.adam_beta2 must lie in (0, 1) (got {})", self.adam_beta2));
        }
        out
    }

    /// Calibration settings after applying a knockout ablation.
    pub fn effective_calibration(&self) -> CalibrationConfig<f64> {
        let mut cal = self.calibration;
        if let Ablation::CalibKnockout(stage) = self.ablation {
            cal.stages = cal.stages.without(stage);
        }
        cal
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub data: DatasetSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            data: DatasetSpec::new(PathBuf::new(), PathBuf::new(), 10),
        }
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(format!("expected a boolean, got {v:?}")),
    }
}

fn parse_num<N: std::str::FromStr>(v: &str) -> std::result::Result<N, String> {
    v.parse().map_err(|_| format!("expected a number, got {v:?}"))
}

fn parse_list(v: &str) -> std::result::Result<Vec<usize>, String> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|s| parse_num(s.trim())).collect()
}

fn fmt_list(v: &[usize]) -> String {
    v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Sets one `section.key`. `data.data_qubits` mirrors `quantum.data_qubits`.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let t = &mut self.train;
        let value = value.trim();
        match key {
            "quantum.data_qubits" => {
                t.data_qubits = parse_num(value)?;
                self.data.data_qubits = t.data_qubits;
            }
            "quantum.layers" => t.layers = parse_num(value)?,
            "quantum.rotations" => {
                t.rotations = RotationSet::from_count(parse_num(value)?)
                    .ok_or_else(|| format!("rotations per qubit must be 1 or 2, got {value}"))?
            }
            "encoder.hidden" => t.encoder.hidden = parse_list(value)?,
            "encoder.alpha_min" => t.encoder.alpha_min = parse_num(value)?,
            "encoder.positive_alpha" => t.encoder.positive_alpha = parse_bool(value)?,
            "calibration.tau" => t.calibration.tau = parse_num(value)?,
            "calibration.k" => t.calibration.k = parse_num(value)?,
            "calibration.eps_p" => t.calibration.eps_p = parse_num(value)?,
            "calibration.eps_n" => t.calibration.eps_n = parse_num(value)?,
            "calibration.smoothing" => t.calibration.stages.smoothing = parse_bool(value)?,
            "calibration.deviation" => t.calibration.stages.deviation = parse_bool(value)?,
            "calibration.normalization" => t.calibration.stages.normalization = parse_bool(value)?,
            "calibration.affine" => t.calibration.stages.affine = parse_bool(value)?,
            "critic.hidden" => t.critic.hidden = parse_list(value)?,
            "critic.leaky_slope" => t.critic.leaky_slope = parse_num(value)?,
            "critic.lambda_gp" => t.critic.lambda_gp = parse_num(value)?,
            "training.epochs" => t.epochs = parse_num(value)?,
            "training.batch_size" => t.batch_size = parse_num(value)?,
            "training.n_critic" => t.n_critic = parse_num(value)?,
            "training.lr_critic" => t.lr_critic = parse_num(value)?,
            "training.lr_encoder" => t.lr_encoder = parse_num(value)?,
            "training.lr_pqc" => t.lr_pqc = parse_num(value)?,
            "training.adam_beta1" => t.adam_beta1 = parse_num(value)?,
            "training.adam_beta2" => t.adam_beta2 = parse_num(value)?,
            "training.adam_eps" => t.adam_eps = parse_num(value)?,
            "training.lr_decay" => t.lr_decay = parse_bool(value)?,
            "training.seed" => t.seed = parse_num(value)?,
            "training.ablation" => {
                t.ablation = Ablation::parse(value).ok_or_else(|| {
                    format!(
                        "unknown ablation {value:?} (expected none, noise_uniform01, noise_gauss, map_max or calib_knockout:<stage>)"
                    )
                })?
            }
            "training.montage_every" => t.montage_every = parse_num(value)?,
            "data.images" => self.data.images = PathBuf::from(value),
            "data.labels" => self.data.labels = PathBuf::from(value),
            "data.class" => {
                self.data.class = match value {
                    "all" => None,
                    v => Some(parse_num(v)?),
                }
            }
            "data.train_count" => self.data.train_count = parse_num(value)?,
            "data.test_count" => self.data.test_count = parse_num(value)?,
            "data.resize" => {
                self.data.resize = ResizePolicy::parse(value)
                    .ok_or_else(|| format!("unknown resize policy {value:?} (expected pad_crop or downsample_pow2)"))?
            }
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Parses the text format on top of the defaults. All problems, both
    /// syntactic and semantic, are reported together.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut problems = cfg.apply_text(text);
        problems.extend(cfg.train.problems());
        if problems.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::ConfigList(problems))
        }
    }

    /// Applies every entry of `text`, returning the problems encountered.
    pub fn apply_text(&mut self, text: &str) -> Vec<String> {
        let mut problems = Vec::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                problems.push(format!("line {}: expected `key = value`, got {line:?}", lineno + 1));
                continue;
            };
            let key = if section.is_empty() {
                k.trim().to_string()
            } else {
                format!("{section}.{}", k.trim())
            };
            if let Err(e) = self.set(&key, v) {
                problems.push(format!("line {}: {key}: {e}", lineno + 1));
            }
        }
        problems
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.train.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::ConfigList(problems))
        }
    }

    pub fn to_text(&self) -> String {
        let t = &self.train;
        let c = &t.calibration;
        let d = &self.data;
        let mut s = String::new();
        let _ = writeln!(s, "[quantum]");
        let _ = writeln!(s, "data_qubits = {}", t.data_qubits);
        let _ = writeln!(s, "layers = {}", t.layers);
        let _ = writeln!(s, "rotations = {}", t.rotations.per_qubit());
        let _ = writeln!(s, "\n[encoder]");
        let _ = writeln!(s, "hidden = {}", fmt_list(&t.encoder.hidden));
        let _ = writeln!(s, "alpha_min = {:?}", t.encoder.alpha_min);
        let _ = writeln!(s, "positive_alpha = {}", t.encoder.positive_alpha);
        let _ = writeln!(s, "\n[calibration]");
    let _ = writeln!(s, "# declared defaults, not tuned values");
        let _ = writeln!(s, "tau = {:?}", c.tau);
        let _ = writeln!(s, "k = {:?}", c.k);
        let _ = writeln!(s, "eps_p = {:?}", c.eps_p);
        let _ = writeln!(s, "eps_n = {:?}", c.eps_n);
        let _ = writeln!(s, "smoothing = {}", c.stages.smoothing);
        let _ = writeln!(s, "deviation = {}", c.stages.deviation);
        let _ = writeln!(s, "normalization = {}", c.stages.normalization);
        let _ = writeln!(s, "affine = {}", c.stages.affine);
        let _ = writeln!(s, "\n[critic]");
    let _ = writeln!(s, "# declared stand-in sizes and conventional gradient-penalty weight");
        let _ = writeln!(s, "hidden = {}", fmt_list(&t.critic.hidden));
        let _ = writeln!(s, "leaky_slope = {:?}", t.critic.leaky_slope);
        let _ = writeln!(s, "lambda_gp = {:?}", t.critic.lambda_gp);
        let _ = writeln!(s, "\n[training]");
        let _ = writeln!(s, "epochs = {}", t.epochs);
        let _ = writeln!(s, "batch_size = {}", t.batch_size);
        let _ = writeln!(s, "# conventional WGAN-GP default: critic steps per generator step");
    let _ = writeln!(s, "n_critic = {}", t.n_critic);
        let _ = writeln!(s, "lr_critic = {:?}", t.lr_critic);
        let _ = writeln!(s, "lr_encoder = {:?}", t.lr_encoder);
        let _ = writeln!(s, "lr_pqc = {:?}", t.lr_pqc);
        let _ = writeln!(s, "adam_beta1 = {:?}", t.adam_beta1);
        let _ = writeln!(s, "adam_beta2 = {:?}", t.adam_beta2);
        let _ = writeln!(s, "adam_eps = {:?}", t.adam_eps);
        let _ = writeln!(s, "lr_decay = {}", t.lr_decay);
        let _ = writeln!(s, "seed = {}", t.seed);
        let _ = writeln!(s, "ablation = {}", t.ablation.name());
        let _ = writeln!(s, "montage_every = {}", t.montage_every);
        let _ = writeln!(s, "\n[data]");
        let _ = writeln!(s, "images = {}", d.images.display());
        let _ = writeln!(s, "labels = {}", d.labels.display());
        let _ = writeln!(s, "class = {}", d.class.map_or("all".to_string(), |c| c.to_string()));
        let _ = writeln!(s, "train_count = {}", d.train_count);
        let _ = writeln!(s, "test_count = {}", d.test_count);
        let _ = writeln!(s, "resize = {}", d.resize.name());
        s
    }
}
