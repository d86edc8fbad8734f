//! Config resolution and error classification.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use qpix::config::RunConfig;
use qpix::Error;

use crate::ConfigArgs;

/// A command failure, split by exit code: bad input (2) or a failure while running (1).
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

pub type CmdResult<T = ()> = Result<T, Failure>;

/// Errors while reading inputs (config, dataset, checkpoint) are usage errors.
pub fn input(e: Error) -> Failure {
    match e {
        Error::Config(_)
        | Error::ConfigList(_)
        | Error::Io { .. }
        | Error::Idx { .. }
        | Error::Dataset(_)
        | Error::Checkpoint(_)
        | Error::Shape { .. } => Failure::Usage(e.to_string()),
        other => Failure::Runtime(other.to_string()),
    }
}

pub fn runtime(e: Error) -> Failure {
    Failure::Runtime(e.to_string())
}

pub fn read_text(path: &Path) -> CmdResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Defaults, then the config file, then `--set`, then the named flags. Every
/// problem found along the way is reported at once.
pub fn resolve(args: &ConfigArgs) -> CmdResult<RunConfig> {
    resolve_with(args, true)
}

/// As [`resolve`]; `require_data` controls whether missing dataset paths count as problems.
pub fn resolve_with(args: &ConfigArgs, require_data: bool) -> CmdResult<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut problems = Vec::new();
    if let Some(path) = &args.config {
        let text = read_text(path)?;
        problems.extend(
            cfg.apply_text(&text)
                .into_iter()
                .map(|p| format!("{}: {p}", path.display())),
        );
    }
    for entry in &args.set {
        match entry.split_once('=') {
            Some((k, v)) => {
                if let Err(e) = cfg.set(k.trim(), v) {
                    problems.push(format!("--set {}: {e}", k.trim()));
                }
            }
            None => problems.push(format!("--set expects SECTION.KEY=VALUE, got {entry:?}")),
        }
    }
    problems.extend(apply_flags(&mut cfg, args));
    problems.extend(cfg.train.problems());
    if require_data {
        problems.extend(dataset_problems(&cfg));
    }
    if problems.is_empty() {
        absolutize(&mut cfg);
        Ok(cfg)
    } else {
        Err(Failure::Usage(Error::ConfigList(problems).to_string()))
    }
}

fn apply_flags(cfg: &mut RunConfig, args: &ConfigArgs) -> Vec<String> {
    let mut problems = Vec::new();
    let mut set = |flag: &str, key: &str, value: String| {
        if let Err(e) = cfg.set(key, &value) {
            problems.push(format!("--{flag}: {e}"));
        }
    };
    if let Some(v) = args.seed {
        set("seed", "training.seed", v.to_string());
    }
    if let Some(v) = args.epochs {
        set("epochs", "training.epochs", v.to_string());
    }
    if let Some(v) = args.data_qubits {
        set("d", "quantum.data_qubits", v.to_string());
    }
    if let Some(v) = args.layers {
        set("layers", "quantum.layers", v.to_string());
    }
    if let Some(v) = &args.ablation {
        set("ablation", "training.ablation", v.clone());
    }
    if let Some(v) = &args.class {
        set("class", "data.class", v.clone());
    }
    if let Some(p) = &args.dataset_images {
        cfg.data.images = p.clone();
    }
    if let Some(p) = &args.dataset_labels {
        cfg.data.labels = p.clone();
    }
    problems
}

pub fn dataset_problems(cfg: &RunConfig) -> Vec<String> {
    let mut out = Vec::new();
    if cfg.data.images.as_os_str().is_empty() {
        out.push("data.images is not set (use --dataset-images or `images =` under [data])".into());
    }
    if cfg.data.labels.as_os_str().is_empty() {
        out.push("data.labels is not set (use --dataset-labels or `labels =` under [data])".into());
    }
    if cfg.data.train_count == 0 || cfg.data.test_count == 0 {
        out.push("data.train_count and data.test_count must be >= 1".into());
    }
    out
}

/// Records dataset paths absolutely so a manifest works from any directory.
pub fn absolutize(cfg: &mut RunConfig) {
    for p in [&mut cfg.data.images, &mut cfg.data.labels] {
        if let Ok(abs) = fs::canonicalize(&*p) {
            *p = abs;
        }
    }
}

/// Dataset path overrides shared by the commands that take a checkpoint.
pub fn override_dataset(
    cfg: &mut RunConfig,
    images: Option<&PathBuf>,
    labels: Option<&PathBuf>,
    class: Option<&String>,
) -> CmdResult {
    if let Some(p) = images {
        cfg.data.images = p.clone();
    }
    if let Some(p) = labels {
        cfg.data.labels = p.clone();
    }
    if let Some(c) = class {
        cfg.set("data.class", c)
            .map_err(|e| Failure::Usage(format!("--class: {e}")))?;
    }
    let problems = dataset_problems(cfg);
    if !problems.is_empty() {
        return Err(Failure::Usage(Error::ConfigList(problems).to_string()));
    }
    absolutize(cfg);
    Ok(())
}
