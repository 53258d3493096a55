use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use relpose::cli;
use relpose::robust::{RansacBenchConfig, RansacConfig};
use relpose::synth::{BenchConfig, SceneConfig};
use relpose::Result;

#[derive(Parser)]
#[command(name = "relpose", version, about = "Relative pose with a known rotation angle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a minimal problem read from a correspondence document.
    Solve {
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo accuracy benchmark on synthetic scenes.
    SynthBench(BenchArgs),
    /// RANSAC on contaminated synthetic scenes.
    RansacBench {
        #[command(flatten)]
        bench: BenchArgs,
        #[arg(long, default_value_t = 100)]
        n_obs: usize,
        #[arg(long, default_value_t = 0.3)]
        outlier_frac: f64,
        #[arg(long, default_value_t = 1000)]
        max_iterations: usize,
        /// Sampson threshold (normalized units) or ray distance; defaults
        /// to 1.5 px² through the focal length, or 0.01 scene units.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, default_value_t = 0.99)]
        confidence: f64,
    },
    /// Rotation angle between two instants of a gyroscope log.
    ImuAngle {
        #[arg(long)]
        gyro: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        from: i64,
        #[arg(long, allow_hyphen_values = true)]
        to: i64,
        /// Subtract the mean rate of the leading static window.
        #[arg(long)]
        bias_correct: bool,
        #[arg(long, default_value_t = 1_000_000_000)]
        bias_window_ns: i64,
    },
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "reg4")]
    solver: String,
    #[arg(long, default_value_t = 0.0)]
    noise_px: f64,
    #[arg(long, default_value_t = 0.0)]
    angle_noise_sigma: f64,
    #[arg(long, default_value = "forward")]
    motion: String,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    multi_center_radius: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl BenchArgs {
    fn config(&self) -> Result<BenchConfig> {
        let mut scene = SceneConfig {
            motion: cli::parse_motion(&self.motion)?,
            seed: self.seed,
            ..Default::default()
        };
        if let Some(r) = self.multi_center_radius {
            scene.multi_center_radius = r;
        }
        Ok(BenchConfig {
            scene,
            solver: cli::parse_solver(&self.solver)?,
            noise_px: self.noise_px,
            angle_noise_sigma: self.angle_noise_sigma,
            trials: self.trials,
        })
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Solve { input, out } => {
            let text = std::fs::read_to_string(&input)?;
            emit(out.as_ref(), &cli::cmd_solve(&text)?)
        }
        Command::SynthBench(args) => {
            let cfg = args.config()?;
            let start = Instant::now();
            let csv = cli::cmd_synth_bench(&cfg)?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            eprintln!(
                "{} trials in {ms:.1} ms wall ({:.3} ms per trial, parallel)",
                cfg.trials,
                ms / cfg.trials.max(1) as f64
            );
            emit(args.out.as_ref(), &csv)
        }
        Command::RansacBench {
            bench,
            n_obs,
            outlier_frac,
            max_iterations,
            threshold,
            confidence,
        } => {
            let base = bench.config()?;
            let mut ransac = RansacConfig::for_kind(base.solver, base.scene.focal_length());
            ransac.max_iterations = max_iterations;
            ransac.confidence = confidence;
            if let Some(t) = threshold {
                ransac.inlier_threshold = t;
            }
            let cfg = RansacBenchConfig {
                scene: base.scene,
                solver: base.solver,
                noise_px: base.noise_px,
                angle_noise_sigma: base.angle_noise_sigma,
                n_obs,
                outlier_frac,
                ransac,
                trials: base.trials,
            };
            emit(bench.out.as_ref(), &cli::cmd_ransac_bench(&cfg, threshold.is_none())?)
        }
        Command::ImuAngle {
            gyro,
            from,
            to,
            bias_correct,
            bias_window_ns,
        } => {
            let text = std::fs::read_to_string(&gyro)?;
            let window = bias_correct.then_some(bias_window_ns);
            emit(None, &cli::cmd_imu_angle(&text, from, to, window)?)
        }
    }
}

fn main() -> ExitCode {
    let parsed = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(parsed.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

