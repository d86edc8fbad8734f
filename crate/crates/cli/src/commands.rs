use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qpix::calibration::Stage;
use qpix::config::{Ablation, RunConfig};
use qpix::data::{prepare, ImageSet};
use qpix::metrics::{export_images, feature_map, mmd_poly, montage, permutation_noise_floor, ImageFormat, SetComparison};
use qpix::training::checkpoint::read_checkpoint;
use qpix::training::{load_checkpoint, save_checkpoint, EpochLog, Trainer};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::resolve::{input, override_dataset, read_text, resolve, resolve_with, runtime, CmdResult, Failure};
use crate::{AblateArgs, ConfigArgs, EvaluateArgs, GenerateArgs, InspectArgs, Suite, TrainArgs};

pub const BUILD_ID: &str = concat!("qpix ", env!("CARGO_PKG_VERSION"), " (git ", env!("QPIX_GIT_REV"), ")");

const CHECKPOINT: &str = "checkpoint.qpck";
const INITIAL: &str = "initial.qpck";
const LOG: &str = "train_log.csv";
const MANIFEST: &str = "manifest.txt";
const MONTAGE_COUNT: usize = 25;
/// Montages reuse one latent stream so successive grids are comparable.
const MONTAGE_SEED: u64 = 0x6d6f_6e74;
const EVAL_RERUNS: u64 = 3;

fn create_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))
}

fn write_file(path: &Path, text: &str) -> CmdResult {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn load_data(cfg: &RunConfig) -> CmdResult<(ImageSet, ImageSet)> {
    prepare(&cfg.data, cfg.train.seed).map_err(input)
}

fn manifest(cfg: &RunConfig, command: &str, out: &Path) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# qpix run manifest; usable as --config to repeat the run");
    let _ = writeln!(s, "# build: {BUILD_ID}");
    let _ = writeln!(s, "# command: {command}");
    let _ = writeln!(s, "# seed: {}", cfg.train.seed);
    let _ = writeln!(s, "# output: {}", out.display());
    let _ = writeln!(s, "#   {MANIFEST}  this file");
    let _ = writeln!(s, "#   {LOG}  one row per epoch");
    let _ = writeln!(s, "#   {INITIAL}  parameters before the first epoch");
    let _ = writeln!(s, "#   {CHECKPOINT}  state after the latest completed epoch");
    let _ = writeln!(s, "#   montages/epoch_NNNN.*  {MONTAGE_COUNT}-sample grids");
    s.push('\n');
    s.push_str(&cfg.to_text());
    s
}

fn save_montage(trainer: &Trainer, dir: &Path, format: ImageFormat) -> CmdResult<PathBuf> {
    let images = trainer.generate_view(MONTAGE_COUNT, MONTAGE_SEED).map_err(runtime)?;
    let grid = montage(&images, trainer.view.height(), trainer.view.width()).map_err(runtime)?;
    let path = dir.join(format!("epoch_{:04}.{}", trainer.epoch, format.extension()));
    grid.save(&path, format).map_err(runtime)?;
    Ok(path)
}

/// Trains `trainer` up to `cfg.train.epochs` inside `out`. Every completed
/// epoch is logged and checkpointed before the next one starts.
fn run_training(cfg: &RunConfig, trainer: &mut Trainer, train: &ImageSet, out: &Path, format: ImageFormat) -> CmdResult {
    let montage_dir = out.join("montages");
    create_dir(&montage_dir)?;
    let log_path = out.join(LOG);
    let fresh = trainer.epoch == 0;
    let mut log = if fresh {
        let mut f = File::create(&log_path).map_err(|e| Failure::Runtime(format!("{}: {e}", log_path.display())))?;
        writeln!(f, "{}", EpochLog::CSV_HEADER).map_err(|e| Failure::Runtime(e.to_string()))?;
        f
    } else {
        OpenOptions::new()
            .append(true)
            .create(true)
            .open(&log_path)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", log_path.display())))?
    };
    if fresh {
        save_checkpoint(trainer, &cfg.data, &out.join(INITIAL)).map_err(runtime)?;
    }
    let every = cfg.train.montage_every as u64;
    let total = cfg.train.epochs as u64;
    while trainer.epoch < total {
        let row = trainer.train_epoch(train).map_err(|e| {
            Failure::Runtime(format!(
                "{e}; training aborted in epoch {}, last good state in {}",
                trainer.epoch + 1,
                out.join(CHECKPOINT).display()
            ))
        })?;
        writeln!(log, "{}", row.csv_row()).map_err(|e| Failure::Runtime(e.to_string()))?;
        log.flush().map_err(|e| Failure::Runtime(e.to_string()))?;
        save_checkpoint(trainer, &cfg.data, &out.join(CHECKPOINT)).map_err(runtime)?;
        eprintln!(
            "epoch {}/{}: W {:.4}, critic {:.4}, generator {:.4}, acceptance {:.3}, {:.1}s",
            trainer.epoch, total, row.wasserstein, row.critic_loss, row.generator_loss, row.acceptance, row.wall_seconds
        );
        if (every > 0 && trainer.epoch % every == 0) || trainer.epoch == total {
            save_montage(trainer, &montage_dir, format)?;
        }
    }
    Ok(())
}

fn uses_config_flags(a: &ConfigArgs) -> bool {
    a.config.is_some()
        || a.seed.is_some()
        || a.data_qubits.is_some()
        || a.layers.is_some()
        || a.ablation.is_some()
        || a.class.is_some()
        || !a.set.is_empty()
}


pub fn train(args: &TrainArgs) -> CmdResult {
    let (cfg, resumed) = match &args.resume {
        Some(path) => {
            if uses_config_flags(&args.cfg) {
                return Err(Failure::Usage(
                    "--resume takes its configuration from the checkpoint; only --epochs and the dataset paths may be given"
                        .into(),
                ));
            }
            let (mut trainer, mut cfg) = load_checkpoint(path).map_err(input)?;
            if let Some(e) = args.cfg.epochs {
                cfg.train.epochs = e;
            }
            override_dataset(&mut cfg, args.cfg.dataset_images.as_ref(), args.cfg.dataset_labels.as_ref(), None)?;
            cfg.validate().map_err(input)?;
            trainer.config = cfg.train.clone();
            (cfg, Some(trainer))
        }
        None => (resolve(&args.cfg)?, None),
    };
    let (train_set, _) = load_data(&cfg)?;
    let mut trainer = match resumed {
        Some(t) => {
            if t.view != train_set.view {
                return Err(Failure::Usage(
                    "checkpoint was trained at a different image geometry than the dataset provides".into(),
                ));
            }
            t
        }
        None => Trainer::new(cfg.train.clone(), train_set.view).map_err(input)?,
    };
    create_dir(&args.out)?;
    write_file(&args.out.join(MANIFEST), &manifest(&cfg, "train", &args.out))?;
    eprintln!(
        "training {} epochs on {} images ({} data qubits, {} layers, ablation {})",
        cfg.train.epochs,
        train_set.len(),
        cfg.train.data_qubits,
        cfg.train.layers,
        cfg.train.ablation.name()
    );
    run_training(&cfg, &mut trainer, &train_set, &args.out, args.format.into())?;
    println!("{}", args.out.join(CHECKPOINT).display());
    Ok(())
}

pub fn generate(args: &GenerateArgs) -> CmdResult {
    if args.count == 0 {
        return Err(Failure::Usage("--count must be >= 1".into()));
    }
    let (trainer, _) = load_checkpoint(&args.checkpoint).map_err(input)?;
    let images = trainer.generate_view(args.count, args.seed).map_err(runtime)?;
    let written = export_images(
        &images,
        trainer.view.height(),
        trainer.view.width(),
        &args.out,
        "sample",
        args.format.into(),
        true,
    )
    .map_err(runtime)?;
    eprintln!("wrote {} images and a montage to {}", images.len(), args.out.display());
    if let Some(m) = written.last() {
        println!("{}", m.display());
    }
    Ok(())
}

/// Mean and sample standard deviation.
fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

struct Evaluation {
    runs: Vec<(u64, SetComparison)>,
}

impl Evaluation {
    fn run(trainer: &Trainer, test: &ImageSet, base_seed: u64) -> CmdResult<Self> {
        let runs = (0..EVAL_RERUNS)
            .map(|k| {
                let seed = base_seed.wrapping_add(k);
                trainer.evaluate(test, seed).map(|c| (seed, c)).map_err(runtime)
            })
            .collect::<CmdResult<Vec<_>>>()?;
        Ok(Self { runs })
    }

    fn column(&self, f: impl Fn(&SetComparison) -> f64) -> (f64, f64) {
        mean_std(&self.runs.iter().map(|(_, c)| f(c)).collect::<Vec<_>>())
    }

    fn pixel_mmd(&self) -> (f64, f64) {
        self.column(|c| c.pixel_mmd)
    }

    fn pixel_frechet(&self) -> (f64, f64) {
        self.column(|c| c.pixel_frechet)
    }

    fn brightness(&self) -> (f64, f64) {
        self.column(|c| c.stats.brightness_summary.mean)
    }

    fn contrast(&self) -> (f64, f64) {
        self.column(|c| c.stats.contrast_summary.mean)
    }

    fn csv(&self) -> String {
        let mut s = String::from("seed,pixel_mmd,pixel_frechet,brightness,contrast\n");
        for (seed, c) in &self.runs {
            let _ = writeln!(
                s,
                "{seed},{:e},{:e},{:.6},{:.6}",
                c.pixel_mmd, c.pixel_frechet, c.stats.brightness_summary.mean, c.stats.contrast_summary.mean
            );
        }
        s
    }

    fn summary(&self, reference: usize) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# mean ± sample std over {} generation seeds", self.runs.len());
        let _ = writeln!(s, "reference_images = {reference}");
        for (name, (m, sd)) in [
            ("pixel_mmd", self.pixel_mmd()),
            ("pixel_frechet", self.pixel_frechet()),
            ("brightness", self.brightness()),
            ("contrast", self.contrast()),
        ] {
            let _ = writeln!(s, "{name} = {m:.6e} ± {sd:.6e}");
        }
        s
    }
}

pub fn evaluate(args: &EvaluateArgs) -> CmdResult {
    if args.real_vs_real {
        return real_vs_real(args);
    }
    let Some(path) = &args.checkpoint else {
        return Err(Failure::Usage("evaluate needs --checkpoint (or --real-vs-real)".into()));
    };
    let (trainer, mut cfg) = load_checkpoint(path).map_err(input)?;
    override_dataset(
        &mut cfg,
        args.dataset_images.as_ref(),
        args.dataset_labels.as_ref(),
        args.class.as_ref(),
    )?;
    let (_, test) = load_data(&cfg)?;
    if test.view != trainer.view {
        return Err(Failure::Usage(
            "checkpoint was trained at a different image geometry than the dataset provides".into(),
        ));
    }
    let eval = Evaluation::run(&trainer, &test, args.seed)?;
    create_dir(&args.out)?;
    let summary = eval.summary(test.len());
    write_file(&args.out.join("evaluation.csv"), &eval.csv())?;
    write_file(&args.out.join("evaluation.txt"), &summary)?;
    print!("{summary}");
    Ok(())
}

/// Training split against test split: both are draws from the same class, so
/// the MMD should sit inside its permutation noise floor.
fn real_vs_real(args: &EvaluateArgs) -> CmdResult {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_text(&read_text(path)?).map_err(input)?,
        None => RunConfig::default(),
    };
    override_dataset(
        &mut cfg,
        args.dataset_images.as_ref(),
        args.dataset_labels.as_ref(),
        args.class.as_ref(),
    )?;
    let (train, test) = load_data(&cfg)?;
    let n = train.len().min(test.len());
    let (h, w) = (test.view.height(), test.view.width());
    let a = feature_map(&train.images.view(&train.view).pixels[..n], h, w).map_err(runtime)?;
    let b = feature_map(&test.images.view(&test.view).pixels[..n], h, w).map_err(runtime)?;
    let mmd = mmd_poly(&a, &b).map_err(runtime)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let floor = permutation_noise_floor(&a, &b, args.rounds.max(1), 0.95, &mut rng).map_err(runtime)?;
    let mut s = String::new();
    let _ = writeln!(s, "images_per_side = {n}");
    let _ = writeln!(s, "pixel_mmd = {mmd:.6e}");
    let _ = writeln!(s, "noise_floor_p95 = {floor:.6e}");
    let _ = writeln!(s, "permutation_rounds = {}", args.rounds.max(1));
    let _ = writeln!(s, "below_noise_floor = {}", mmd.abs() < floor);
    create_dir(&args.out)?;
    write_file(&args.out.join("real_vs_real.txt"), &s)?;
    print!("{s}");
    Ok(())
}

fn suite_variants(suite: Suite) -> Vec<(String, String, Ablation)> {
    let v = |name: &str, label: &str, a: Ablation| (name.to_string(), label.to_string(), a);
    match suite {
        Suite::Noise => vec![
            v("noise_uniform01", "U(0,1)", Ablation::NoiseUniform01),
            v("noise_gauss", "N(0,1)", Ablation::NoiseGauss),
            v("learned", "learned", Ablation::None),
        ],
        Suite::Mapping => vec![
            v("map_max", "/max", Ablation::MapMax),
            v("calibrated", "calibrated", Ablation::None),
        ],
        Suite::Calibration => Stage::ALL
            .iter()
            .map(|&s| {
                (
                    format!("without_{}", s.name()),
                    format!("w/o {}", s.name()),
                    Ablation::CalibKnockout(s),
                )
            })
            .chain([v("full", "full model", Ablation::None)])
            .collect(),
    }
}

pub fn ablate(args: &AblateArgs) -> CmdResult {
    if args.cfg.ablation.is_some() {
        return Err(Failure::Usage("ablate sets the ablation per variant; drop --ablation".into()));
    }
    let base = resolve(&args.cfg)?;
    let variants = suite_variants(args.suite);
    let mut problems = Vec::new();
    for (name, _, ablation) in &variants {
        let mut t = base.train.clone();
        t.ablation = *ablation;
        problems.extend(t.problems().into_iter().map(|p| format!("{name}: {p}")));
    }
    if !problems.is_empty() {
        return Err(Failure::Usage(qpix::Error::ConfigList(problems).to_string()));
    }
    let (train_set, test) = load_data(&base)?;
    create_dir(&args.out)?;
    let suite = format!("{:?}", args.suite).to_lowercase();
    let csv_path = args.out.join(format!("ablation_{suite}.csv"));
    let mut csv = String::from(
        "variant,label,pixel_mmd_mean,pixel_mmd_std,pixel_frechet_mean,pixel_frechet_std,brightness_mean,contrast_mean,final_wasserstein,seconds\n",
    );
    write_file(&csv_path, &csv)?;
    for (name, label, ablation) in variants {
        let mut cfg = base.clone();
        cfg.train.ablation = ablation;
        let dir = args.out.join(&name);
        create_dir(&dir)?;
        write_file(&dir.join(MANIFEST), &manifest(&cfg, &format!("ablate {suite} ({name})"), &dir))?;
        eprintln!("variant {name} ({label})");
        let start = Instant::now();
        let mut trainer = Trainer::new(cfg.train.clone(), train_set.view).map_err(input)?;
        run_training(&cfg, &mut trainer, &train_set, &dir, args.format.into())?;
        let eval = Evaluation::run(&trainer, &test, args.eval_seed)?;
        write_file(&dir.join("evaluation.txt"), &eval.summary(test.len()))?;
        let last_w = last_wasserstein(&dir.join(LOG));
        let (mm, ms) = eval.pixel_mmd();
        let (fm, fs_) = eval.pixel_frechet();
        let _ = writeln!(
            csv,
            "{name},\"{label}\",{mm:e},{ms:e},{fm:e},{fs_:e},{:.4},{:.4},{},{:.1}",
            eval.brightness().0,
            eval.contrast().0,
            last_w.map_or("nan".into(), |w| format!("{w:e}")),
            start.elapsed().as_secs_f64()
        );
        write_file(&csv_path, &csv)?;
    }
    print!("{csv}");
    Ok(())
}

fn last_wasserstein(log: &Path) -> Option<f64> {
    let text = fs::read_to_string(log).ok()?;
    let header: Vec<&str> = text.lines().next()?.split(',').collect();
    let col = header.iter().position(|h| *h == "wasserstein")?;
    text.lines().last()?.split(',').nth(col)?.parse().ok()
}

pub fn inspect(args: &InspectArgs) -> CmdResult {
    let Some(path) = &args.checkpoint else {
        print!("{}", resolve_with(&args.cfg, false)?.to_text());
        return Ok(());
    };
    let ck = read_checkpoint(path).map_err(input)?;
    let (trainer, _) = qpix::training::checkpoint::trainer_from(&ck).map_err(input)?;
    let mut s = String::new();
    let _ = writeln!(s, "checkpoint {}", path.display());
    let _ = writeln!(s, "epochs completed: {}", trainer.epoch);
    let _ = writeln!(
        s,
        "image: {}x{} (canvas {}x{})",
        trainer.view.height(),
        trainer.view.width(),
        trainer.view.canvas,
        trainer.view.canvas
    );
    let _ = writeln!(s, "\ntensors:");
    for (name, t) in &ck.tensors {
        let norm = t.data.iter().map(|x| x * x).sum::<f64>().sqrt();
        let _ = writeln!(s, "  {name:<20} shape {:?}  L2 {norm:.6e}", t.shape);
    }
    let _ = writeln!(s, "\ncounters:");
    for (name, v) in &ck.counters {
        if name.ends_with("base_lr_bits") {
            let _ = writeln!(s, "  {name:<28} {} ({:e})", v, f64::from_bits(*v));
        } else {
            let _ = writeln!(s, "  {name:<28} {v}");
        }
    }
    let _ = writeln!(s, "\nconfiguration:");
    s.push_str(&ck.config_text);
    print!("{s}");
    Ok(())
}
