use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plume_inversion::harness::commands;
use plume_inversion::harness::{ScalePreset, ScenarioConfig};
use plume_inversion::Result;

#[derive(Parser)]
#[command(name = "plume-inv", version, about = "Gaussian plume source inversion experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML scenario file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides both the data and the chain seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Iteration preset: smoke, desk or paper.
    #[arg(long)]
    scale: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic data set.
    Simulate(Common),
    /// Run one inversion.
    Invert {
        #[command(flatten)]
        common: Common,
        /// Data set directory written by `simulate`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Continue from the checkpoint in --out.
        #[arg(long)]
        resume: bool,
    },
    /// One-factor-at-a-time sweep around level M.
    MainEffects(Common),
    /// Fixed versus estimated dispersion parameters.
    MisspecStudy(Common),
    /// Model comparison on a trial directory or the synthetic fixture.
    Chilbolton {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Comma-separated model list, e.g. `briggs:D,est-draxler`.
        #[arg(long)]
        models: Option<String>,
    },
}

fn load(c: &Common, trial: bool) -> Result<ScenarioConfig> {
    let mut cfg = match &c.config {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seeds.data = s;
        cfg.seeds.chain = s;
    }
    if let Some(s) = &c.scale {
        let scale: ScalePreset = s.parse()?;
        if trial {
            let (n, b) = scale.trial_iterations();
            cfg.sampler.n_iter = n;
            cfg.sampler.burn_in = b;
        } else {
            cfg.apply_scale(scale);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => {
            let cfg = load(&c, false)?;
            commands::cmd_simulate(&cfg, &c.out)?;
        }
        Command::Invert { common, data, resume } => {
            let cfg = load(&common, false)?;
            let r = commands::cmd_invert(&cfg, data.as_deref(), &common.out, resume)?;
            for c in &r.coverage {
                eprintln!("{:8} truth {:.4e} in [{:.4e}, {:.4e}]: {}", c.parameter, c.truth, c.q025, c.q975, c.covered);
            }
        }
        Command::MainEffects(c) => {
            let cfg = load(&c, false)?;
            let r = commands::cmd_main_effects(&cfg, &c.out)?;
            let failed = r.entries.iter().filter(|e| e.status != "ok").count();
            eprintln!("{} runs, {failed} failed", r.entries.len());
        }
        Command::MisspecStudy(c) => {
            let cfg = load(&c, false)?;
            commands::cmd_misspec_study(&cfg, &c.out)?;
        }
        Command::Chilbolton { common, data, models } => {
            let mut cfg = load(&common, true)?;
            if let Some(m) = models {
                cfg.trial.models = commands::parse_models(&m)?;
            }
            let r = commands::cmd_chilbolton(&cfg, data.as_deref(), &common.out)?;
            for f in &r.fits {
                eprintln!("{:14} BIC {:.1} RMSE {:.4e}", f.model, f.bic, f.rmse);
            }
            for (m, e) in &r.failures {
                eprintln!("{m}: failed: {e}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 1 } else { 2 })
        }
    }
}
