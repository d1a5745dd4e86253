use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use geoknit::contact::label_contacts;
use geoknit::diffusion::{train::train_denoiser_with, Checkpoint, Denoiser, NoiseSchedule, Optimizer, TrainConfig};
use geoknit::guidance::{generate, GuidanceConfig, GuidanceRecord};
use geoknit::io::{json_files, read_json, to_json_line, write_json};
use geoknit::metrics::{evaluate_sample, EvalReport};
use geoknit::pipeline::{heatmap_svg, synth_dataset, training_example};
use geoknit::synth::{AssemblySample, Family};
use geoknit::geometry::PartModel;
use geoknit::Result;

#[derive(Parser)]
#[command(name = "geoknit", version, about = "Geometry-guided generation of mating CAD parts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Momentum,
    Adam,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a directory of normalized synthetic assemblies.
    SynthData {
        /// Comma-separated families: peg_socket, flange_ring, bracket_plate.
        #[arg(long, value_delimiter = ',', default_value = "peg_socket,flange_ring,bracket_plate")]
        families: Vec<String>,
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Label contact faces between two parts.
    Annotate {
        #[arg(long, num_args = 2, value_names = ["A", "B"])]
        pair: Vec<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the noise predictor on a synthetic dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f64,
        #[arg(long, value_enum, default_value = "momentum")]
        optimizer: OptimizerArg,
        /// Diffusion steps of the noise schedule.
        #[arg(long, default_value_t = 1000)]
        timesteps: usize,
        /// Loss log CSV; defaults to `<out>.loss.csv`.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Sample a part for a condition part, or for every sample in a directory.
    Sample {
        #[arg(long)]
        model: PathBuf,
        /// A part file, an assembly sample file, or a directory of samples.
        #[arg(long)]
        cond: PathBuf,
        /// Defaults to the prompt stored with the condition.
        #[arg(long)]
        prompt: Option<String>,
        #[arg(long)]
        guided: bool,
        #[arg(long, default_value_t = 6)]
        np: usize,
        #[arg(long, default_value_t = 1.0)]
        omega: f64,
        #[arg(long, value_delimiter = ',', default_value = "50,70,90,110")]
        steps: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file, or directory when `--cond` is a directory.
        #[arg(long)]
        out: PathBuf,
        /// JSON-lines record of every guided step.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Score generated parts against reference assemblies.
    Evaluate {
        #[arg(long)]
        gen: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// CSV copy of the report; defaults to `<out>` with a `.csv` extension.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Top-down occupancy heatmap of a directory of parts.
    Heatmap {
        #[arg(long)]
        models: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        pixels: usize,
        #[arg(long, default_value_t = 3.5)]
        extent: f64,
    },
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// A part file or an assembly sample, whose condition is used.
fn read_condition(path: &Path) -> Result<(PartModel, String)> {
    let text = fs::read_to_string(path)?;
    match serde_json::from_str::<AssemblySample>(&text) {
        Ok(s) => Ok((s.condition, s.prompt)),
        Err(_) => {
            let part: PartModel = serde_json::from_str(&text)?;
            let prompt = part.prompt.clone();
            Ok((part, prompt))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthData { families, count, out, seed } => {
            let fams = families.iter().map(|f| Family::parse(f.trim())).collect::<Result<Vec<_>>>()?;
            let samples = synth_dataset(&fams, count, seed)?;
            fs::create_dir_all(&out)?;
            for (k, s) in samples.iter().enumerate() {
                write_json(out.join(format!("sample_{k:05}.json")), s)?;
            }
            log::info!("wrote {} samples to {}", samples.len(), out.display());
        }
        Command::Annotate { pair, delta, out } => {
            let a: PartModel = read_json(&pair[0])?;
            let b: PartModel = read_json(&pair[1])?;
            let report = label_contacts(&a, &b, delta)?;
            match out {
                Some(p) => write_json(p, &report)?,
                None => print!("{}", geoknit::io::to_json_string(&report)?),
            }
        }
        Command::Train { data, out, epochs, seed, batch_size, lr, optimizer, timesteps, log } => {
            let files = json_files(&data)?;
            let examples = files
                .iter()
                .map(|f| read_json::<AssemblySample>(f).and_then(|s| training_example(&s)))
                .collect::<Result<Vec<_>>>()?;
            let cfg = TrainConfig {
                epochs,
                batch_size,
                learning_rate: lr,
                optimizer: match optimizer {
                    OptimizerArg::Momentum => Optimizer::Momentum,
                    OptimizerArg::Adam => Optimizer::Adam,
                },
                seed,
                ..TrainConfig::default()
            };
            let schedule = NoiseSchedule::linear(timesteps, 1e-4, 0.02);
            let mut csv = String::from("epoch,mean_loss\n");
            let outcome = train_denoiser_with(&examples, &cfg, schedule, |e| {
                csv.push_str(&format!("{},{}\n", e.epoch, e.mean_loss));
            })?;
            write_json(&out, &outcome.model.to_checkpoint())?;
            fs::write(log.unwrap_or_else(|| with_suffix(&out, ".loss.csv")), csv)?;
        }
        Command::Sample { model, cond, prompt, guided, np, omega, steps, seed, out, trace } => {
            let ck: Checkpoint = read_json(&model)?;
            let model = Denoiser::from_checkpoint(ck)?;
            let base = GuidanceConfig { candidates: np, regularization_weight: omega, guidance_steps: steps, seed, ..GuidanceConfig::default() };
            let jobs: Vec<(PathBuf, PathBuf)> = if cond.is_dir() {
                json_files(&cond)?.into_iter().map(|f| (out.join(f.file_name().expect("listed files have names")), f)).collect()
            } else {
                vec![(out.clone(), cond.clone())]
            };
            let mut lines = String::new();
            for (k, (dest, src)) in jobs.iter().enumerate() {
                let (part, stored) = read_condition(src)?;
                let text = prompt.clone().unwrap_or(stored);
                let job_seed = seed.wrapping_add(k as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(job_seed);
                let seeded = GuidanceConfig { seed: job_seed, ..base.clone() };
                let config = if guided { seeded } else { seeded.unguided() };
                let mut records: Vec<GuidanceRecord> = Vec::new();
                let gen = generate(&model, &part, &text, &config, &mut rng, Some(&mut records))?;
                write_json(dest, &gen)?;
                for r in &records {
                    lines.push_str(&to_json_line(r)?);
                }
            }
            if let Some(t) = trace {
                fs::write(t, lines)?;
            }
        }
        Command::Evaluate { gen, reference, out, csv, delta, seed } => {
            let mut samples = Vec::new();
            for f in json_files(&gen)? {
                let name = f.file_name().expect("listed files have names");
                let id = f.file_stem().expect("listed files have names").to_string_lossy().into_owned();
                let g: PartModel = read_json(&f)?;
                let r: AssemblySample = read_json(reference.join(name))?;
                samples.push((id, g, r));
            }
            use rayon::prelude::*;
            let evals = samples
                .par_iter()
                .map(|(id, g, r)| evaluate_sample(id, g, &r.target, &r.condition, delta, seed))
                .collect::<Result<Vec<_>>>()?;
            let report = EvalReport::from_samples(evals);
            write_json(&out, &report)?;
            fs::write(csv.unwrap_or_else(|| out.with_extension("csv")), report.to_csv())?;
        }
        Command::Heatmap { models, out, pixels, extent } => {
            let parts = json_files(&models)?
                .iter()
                .map(|f| {
                    let text = fs::read_to_string(f)?;
                    match serde_json::from_str::<AssemblySample>(&text) {
                        Ok(s) => Ok(s.target),
                        Err(_) => Ok(serde_json::from_str::<PartModel>(&text)?),
                    }
                })
                .collect::<Result<Vec<PartModel>>>()?;
            if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(out, heatmap_svg(&parts, pixels, extent))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Some(n) = std::env::var("GEOKNIT_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_malformed_input() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
