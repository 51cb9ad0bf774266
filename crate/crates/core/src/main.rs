use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nbshare::harness::{self, default_config, run_figure, write_atomic, Config, OracleKind};
use nbshare::report::num;
use nbshare::{classify, NbError, Result};

#[derive(Parser)]
#[command(name = "nbshare", version, about = "Nash-bargaining spectrum sharing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Dual step length
    #[arg(long)]
    delta: Option<f64>,
    /// Dual stopping threshold on the price change
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Uniform starting price for every bin
    #[arg(long)]
    lambda0: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured game and write a report and allocation CSV
    Solve {
        #[command(flatten)]
        common: Common,
        /// Solve with a reference oracle instead: grid, fdm-ts or pg
        #[arg(long)]
        oracle: Option<String>,
    },
    /// Emit the CSVs of one figure or table
    Fig {
        /// fig1 ... fig8 or table5
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Classify a two-user power-limited game
    Classify {
        #[command(flatten)]
        common: Common,
    },
    /// Compare the solver with a reference oracle
    OracleCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        oracle: Option<String>,
        /// Largest accepted log-NF shortfall of the solver
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
}

fn load(common: &Common) -> Result<Config> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| NbError::Config("--config is required".into()))?;
    let mut cfg = Config::load(path)?;
    apply_overrides(&mut cfg, common);
    Ok(cfg)
}

fn apply_overrides(cfg: &mut Config, common: &Common) {
    if let Some(d) = common.delta {
        cfg.dual.delta = d;
    }
    if let Some(x) = common.xi {
        cfg.dual.xi = x;
    }
    if let Some(m) = common.max_iters {
        cfg.dual.max_iters = m;
    }
    if common.lambda0.is_some() {
        cfg.dual.lambda0 = common.lambda0;
    }
}

fn stem(path: Option<&PathBuf>) -> String {
    path.and_then(|p| p.file_stem())
        .map_or("report".into(), |s| s.to_string_lossy().into_owned())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { common, oracle } => {
            let cfg = load(&common)?;
            let inst = cfg.instance(common.seed)?;
            let report = match oracle {
                Some(o) => harness::solve_with_oracle(&inst, OracleKind::parse(&o)?)?,
                None => harness::solve(&inst, &cfg)?,
            };
            let name = stem(common.config.as_ref());
            let txt = write_atomic(&common.out_dir, &format!("{name}.txt"), &report.to_text())?;
            let csv = write_atomic(
                &common.out_dir,
                &format!("{name}.csv"),
                &report.allocation_csv(),
            )?;
            println!("{}\n{}", txt.display(), csv.display());
        }
        Command::Fig { name, common } => {
            let mut cfg = match &common.config {
                Some(path) => Config::load(path)?,
                None => {
                    let src = default_config(&name).ok_or_else(|| {
                        NbError::Config(format!(
                            "unknown figure {name:?}; expected one of {}",
                            harness::FIGURES.join(", ")
                        ))
                    })?;
                    Config::parse(src, &format!("configs/{name}.toml"))?
                }
            };
            apply_overrides(&mut cfg, &common);
            let seed = common
                .seed
                .or(cfg.scenario.as_ref().and_then(|s| s.seed))
                .unwrap_or(0);
            for artifact in run_figure(&name, &cfg, seed)? {
                let path = write_atomic(&common.out_dir, &artifact.file, &artifact.contents)?;
                println!("{}", path.display());
            }
        }
        Command::Classify { common } => {
            let cfg = load(&common)?;
            let c = classify(&cfg.instance(common.seed)?)?;
            println!("kind = {}", c.kind.name());
            println!("tau = {}", num(c.tau));
            if let Some(w) = c.witness {
                println!(
                    "witness = {{ bin = {}, position = {}, alpha_lo = {}, alpha_hi = {} }}",
                    w.bin + 1,
                    w.position + 1,
                    num(w.alpha_lo),
                    num(w.alpha_hi)
                );
            }
        }
        Command::OracleCheck {
            common,
            oracle,
            tolerance,
        } => {
            let cfg = load(&common)?;
            let inst = cfg.instance(common.seed)?;
            let oracle = oracle.as_deref().map(OracleKind::parse).transpose()?;
            let check = harness::oracle_check(&inst, &cfg, oracle)?;
            print!("{}", check.to_text());
            if check.shortfall() > tolerance {
                return Err(NbError::Refused(format!(
                    "solver trails the oracle by {} > {tolerance}",
                    num(check.shortfall())
                )));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
