use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sqg_cli::config::{checks_from_arg, RunConfig};
use sqg_cli::error::CliError;
use sqg_cli::sweep::JOBS_ENV;
use sqg_cli::{commands, runner, sweep, verify};

#[derive(Parser)]
#[command(name = "sqgci", version, about = "Convex-integration runs for the forced SQG equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Config file, or a run manifest to reproduce.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override `[scheme] levels`.
    #[arg(long)]
    levels: Option<usize>,
    /// Override `[noise] seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the iteration and write snapshots, diagnostics and a manifest.
    Run(RunArgs),
    /// Run two branches and report their separation.
    Branch {
        #[command(flatten)]
        run: RunArgs,
        /// Level whose sign choice is toggled in the second run; without it both runs share the signature.
        #[arg(long)]
        flip: Option<usize>,
    },
    /// Check a finished run directory.
    Verify {
        /// Run directory (holding manifest.txt).
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated checks; defaults to `[verify] checks` of the manifest.
        #[arg(long)]
        checks: Option<String>,
    },
    /// One run per value of a config key, in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `section.key` to vary.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; `a..b` expands to the integers from a to b.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
        #[arg(long, env = JOBS_ENV)]
        jobs: Option<usize>,
    },
    /// Write a white-noise forcing sample as an SQGF1 file.
    SampleNoise {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        truncation: usize,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the parameter admissibility conditions of a config.
    ValidateParams {
        #[arg(long)]
        config: PathBuf,
    },
}

fn base_of(path: &Path) -> PathBuf {
    path.parent().filter(|p| !p.as_os_str().is_empty()).map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn load(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(l) = args.levels {
        cfg.scheme.levels = l;
    }
    if let Some(s) = args.seed {
        cfg.noise.seed = s;
    }
    cfg.check()?;
    Ok(cfg)
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run(args) => {
            let cfg = load(&args)?;
            let r = runner::execute("run", &cfg, &base_of(&args.config), &args.out, runner::Capture::default())?;
            for l in &r.output.levels {
                println!(
                    "level {} lambda={} retained={} max_q_x={:.6e} plateau_q_x={:.6e}",
                    l.level, l.lambda, l.retained, l.max_q_x, l.plateau_q_x
                );
            }
            println!("wrote {}", r.dir.display());
        }
        Command::Branch { run, flip } => {
            let cfg = load(&run)?;
            let b = runner::branch(&cfg, &base_of(&run.config), flip, &run.out)?;
            let r = &b.report;
            println!(
                "t={} flip={:?} distance={:.12e} leading={:.6e} measured_tail={:.6e} {}",
                r.t,
                r.flip_level,
                r.distance,
                r.leading,
                r.measured_tail,
                if r.passed { "pass" } else { "FAIL" }
            );
            if !r.passed {
                return Err(CliError::Verification("separation below its lower bound".into()));
            }
        }
        Command::Verify { out, checks } => {
            let checks = checks.as_deref().map(checks_from_arg).transpose()?;
            let recs = verify::verify(&out, checks)?;
            println!("{} checks passed ({})", recs.len(), out.join(verify::REPORT_TXT).display());
        }
        Command::Sweep {
            config,
            out,
            axis,
            values,
            jobs,
        } => {
            let cfg = RunConfig::load(&config)?;
            let s = sweep::sweep(&cfg, &base_of(&config), &axis, &sweep::expand_values(&values)?, &out, sweep::jobs(jobs))?;
            println!("{} runs, {} failed ({})", s.members.len(), s.failed_runs(), out.join(sweep::SWEEP_INDEX).display());
            if let Some(r) = s.ensemble.iter().find(|r| r.failed()) {
                return Err(CliError::Verification(format!("{} {}", r.name, r.region)));
            }
            if s.failed_runs() > 0 {
                let first = s.members.iter().find_map(|m| m.status.clone().err()).unwrap_or_default();
                return Err(CliError::Data(format!("{} sweep runs failed, first: {first}", s.failed_runs())));
            }
        }
        Command::SampleNoise { seed, truncation, alpha, out } => {
            println!("{}", commands::sample_noise(seed, truncation, alpha, &out)?);
        }
        Command::ValidateParams { config } => {
            let cfg = RunConfig::load(&config)?;
            print!("{}", commands::validate(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sqgci: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
