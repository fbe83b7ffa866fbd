//! `inseg` command-line tool: train, infer, evaluate, phantom, gradcheck.
//!
//! Exit status is 0 on success, 1 when a computation or file operation
//! fails, and 2 for usage errors.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};

use inseg::io::layout::{
    read_atlas_dir, read_contrasts, read_mask, read_models, write_atlas, write_models,
};
use inseg::io::{write_atomic, write_mvol, RunConfig};
use inseg::pipeline::train_orientation_model_with;
use inseg::{evaluate, generate_phantom, segment, CohortSummary, Error, Orientation, PhantomSpec, Result};

#[derive(Parser)]
#[command(name = "inseg", version, about = "Multi-contrast MRI lesion segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train axial, coronal and sagittal models on a directory of atlases.
    Train {
        /// Directory whose subdirectories each hold mprage/t2/flair/truth .mvol files.
        #[arg(long)]
        atlases: PathBuf,
        /// Run configuration (`key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Output model directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment one subject with trained models.
    Infer {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        mprage: PathBuf,
        #[arg(long)]
        t2: PathBuf,
        #[arg(long)]
        flair: PathBuf,
        /// Output directory for membership.mvol and mask.mvol.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the threshold and percentile saved with the models.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Compare predicted masks with manual masks. Repeat the flags for a cohort.
    Evaluate {
        #[arg(long, required = true)]
        pred: Vec<PathBuf>,
        #[arg(long, required = true)]
        truth: Vec<PathBuf>,
    },
    /// Generate synthetic subjects with known lesion masks.
    Phantom {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Number of subjects; more than one writes `case_NNN` subdirectories
        /// with consecutive seeds.
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
    /// Run the finite-difference gradient suite.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
}

fn read_text(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn train(atlases: PathBuf, config: PathBuf, out: PathBuf) -> Result<()> {
    let cfg = RunConfig::parse(&read_text(&config)?)?;
    let atlases = read_atlas_dir(&atlases)?;
    eprintln!("training on {} atlases", atlases.len());
    let mut models = Vec::with_capacity(3);
    let mut histories = Vec::with_capacity(3);
    for o in Orientation::ALL {
        let (net, history) = train_orientation_model_with(&atlases, o, &cfg.train, |e, t, v| {
            eprintln!("{o} epoch {}: train {t:.6} validation {v:.6}", e + 1)
        })?;
        models.push(net);
        histories.push((o, history));
    }
    let models: [_; 3] = models.try_into().expect("one model per orientation");
    write_models(&out, &models, &cfg, &histories)
}

fn infer(
    models: PathBuf,
    mprage: PathBuf,
    t2: PathBuf,
    flair: PathBuf,
    out: PathBuf,
    config: Option<PathBuf>,
) -> Result<()> {
    let (nets, mut cfg) = read_models(&models)?;
    if let Some(path) = config {
        cfg = RunConfig::parse(&read_text(&path)?)?;
    }
    let mc = read_contrasts(&mprage, &t2, &flair)?;
    let (mask, membership) = segment(&nets, &mc, &cfg.segment)?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_mvol(&out.join("membership.mvol"), &membership)?;
    write_mvol(&out.join("mask.mvol"), &mask.to_volume())?;
    eprintln!("{} lesion voxels", mask.count());
    Ok(())
}

fn evaluate_all(pred: Vec<PathBuf>, truth: Vec<PathBuf>) -> Result<()> {
    let mut reports = Vec::with_capacity(pred.len());
    for (p, t) in pred.iter().zip(&truth) {
        let (p, t) = (read_mask(p)?, read_mask(t)?);
        let spacing = t.grid.spacing.map(f64::from);
        reports.push(evaluate(&p, &t, spacing)?);
    }
    if let [only] = reports.as_slice() {
        print!("{}", only.to_key_values());
    } else {
        for (i, r) in reports.iter().enumerate() {
            println!("case={i}");
            print!("{}", r.to_key_values());
        }
        print!("{}", CohortSummary::from_reports(&reports).to_table());
    }
    Ok(())
}

fn phantom(spec: PathBuf, out: PathBuf, count: u64) -> Result<()> {
    let base = PhantomSpec::parse(&read_text(&spec)?)?;
    for i in 0..count {
        let spec = PhantomSpec { seed: base.seed + i, ..base.clone() };
        let dir = if count == 1 { out.clone() } else { out.join(format!("case_{i:03}")) };
        let (mc, truth) = generate_phantom(&spec)?;
        write_atlas(&dir, &mc, &truth)?;
        write_atomic(&dir.join("spec.txt"), spec.to_text().as_bytes())?;
    }
    Ok(())
}

fn gradcheck(seed: u64, trials: usize) -> Result<bool> {
    let report = inseg::gradcheck::run_suite(seed, trials)?;
    for c in &report.checks {
        println!(
            "{}\tmax_rel_err={:e}\ttolerance={:e}\tcompared={}\tskipped={}\t{}",
            c.name,
            c.max_rel_err,
            c.tolerance,
            c.evaluated,
            c.skipped,
            if c.passed() { "ok" } else { "FAILED" }
        );
    }
    println!("max_rel_err={:e}", report.max_rel_err());
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train { atlases, config, out } => train(atlases, config, out).map(|_| true),
        Command::Infer { models, mprage, t2, flair, out, config } => {
            infer(models, mprage, t2, flair, out, config).map(|_| true)
        }
        Command::Evaluate { pred, truth } => {
            if pred.len() != truth.len() {
                Cli::command()
                    .error(ErrorKind::WrongNumberOfValues, "--pred and --truth must be given equally often")
                    .exit();
            }
            evaluate_all(pred, truth).map(|_| true)
        }
        Command::Phantom { spec, out, count } => {
            if count == 0 {
                Cli::command().error(ErrorKind::ValueValidation, "--count must be >= 1").exit();
            }
            phantom(spec, out, count).map(|_| true)
        }
        Command::Gradcheck { seed, trials } => {
            if trials == 0 {
                Cli::command().error(ErrorKind::ValueValidation, "--trials must be >= 1").exit();
            }
            gradcheck(seed, trials)
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: gradient check exceeded tolerance");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
