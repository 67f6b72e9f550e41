use cfnet_cli::commands::{self, PriceRow};
use cfnet_cli::{CliError, RunConfig, ThetaFile};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cfnet", version, about = "Fit densities in the Fourier domain and price with them")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the network and write theta.json, history.csv and diagnostics.json.
    Fit(Common),
    /// European prices at the configured strikes.
    Price(WithTheta),
    /// Bermudan put over a ladder of grid sizes.
    Bermudan(WithTheta),
    /// Fitted density against COS expansions.
    CompareCos(WithTheta),
    /// Fitted density of the original variable on a grid.
    ExportDensity(WithTheta),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Force the fixed reduction order.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct WithTheta {
    #[command(flatten)]
    common: Common,
    /// Defaults to theta.json in the output directory.
    #[arg(long)]
    theta: Option<PathBuf>,
}

fn load(c: &Common) -> Result<(RunConfig, PathBuf), CliError> {
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.train.seed = seed;
    }
    if c.deterministic {
        cfg.train.deterministic = true;
    }
    let out = c.out.clone().unwrap_or_else(|| cfg.output.clone());
    Ok((cfg, out))
}

fn with_theta(a: &WithTheta) -> Result<(RunConfig, ThetaFile, PathBuf), CliError> {
    let (cfg, out) = load(&a.common)?;
    let path = a.theta.clone().unwrap_or_else(|| out.join("theta.json"));
    let theta = ThetaFile::read(&path)?;
    theta.check_matches(&cfg)?;
    Ok((cfg, theta, out))
}

fn print_prices(rows: &[PriceRow], tolerance: f64) {
    println!("{:>10} {:>14} {:>14} {:>10}", "strike", "reference", "computed", "rel.err");
    for r in rows {
        let flag = if r.window_warning { "  window" } else { "" };
        println!("{:>10} {:>14.5} {:>14.5} {:>10.1e}{flag}", r.strike, r.reference, r.computed, r.rel_error);
    }
    let worst = rows.iter().map(|r| r.rel_error).fold(0.0, f64::max);
    if worst > tolerance {
        eprintln!("warning: largest relative error {worst:.2e} exceeds {tolerance:.0e}");
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit(c) => {
            let (cfg, out) = load(&c)?;
            let o = commands::cmd_fit(&cfg, &out)?;
            let d = &o.diagnostics;
            println!(
                "final loss {:.3e} (mse {:.3e}, mae {:.3e}) after {} attempt(s), seed {}",
                d.final_loss.total, d.final_loss.mse, d.final_loss.mae, d.attempts, d.seed
            );
            println!("fourier L2 re {:.3e} im {:.3e}", d.fourier.re.l2, d.fourier.im.l2);
            if let Some(m) = &d.density {
                println!("density L2 {:.3e} MPE {:.3e}", m.l2, m.mpe);
            }
            if d.threshold_warning {
                eprintln!("warning: final loss {:.3e} exceeds the threshold {:.0e}", d.final_loss.total, d.loss_threshold);
            }
            println!("wrote {}", out.display());
        }
        Command::Price(a) => {
            let (cfg, theta, out) = with_theta(&a)?;
            let rows = commands::cmd_price(&cfg, &theta, &out)?;
            print_prices(&rows, cfg.pricing.as_ref().map_or(1e-4, |p| p.tolerance));
        }
        Command::Bermudan(a) => {
            let (cfg, theta, out) = with_theta(&a)?;
            let rows = commands::cmd_bermudan(&cfg, &theta, &out)?;
            for r in &rows {
                println!(
                    "Q={:<6} {:.6}  change {}  ratio {}",
                    r.q,
                    r.price,
                    r.change.map_or("-".into(), |c| format!("{c:.2e}")),
                    r.ratio.map_or("-".into(), |c| format!("{c:.2}"))
                );
            }
        }
        Command::CompareCos(a) => {
            let (cfg, theta, out) = with_theta(&a)?;
            let c = commands::cmd_compare_cos(&cfg, &theta, &out)?;
            println!("range [{}, {}]", c.range[0], c.range[1]);
            println!("fitted density min {:.3e}, non-negativity loss {:.3e}", c.fournet_min, c.nonneg_loss);
            for col in &c.cos {
                println!("COS {} terms min {:.3e}", col.terms, col.min);
            }
        }
        Command::ExportDensity(a) => {
            let (cfg, out) = load(&a.common)?;
            commands::check_export(&cfg)?;
            let path = a.theta.clone().unwrap_or_else(|| out.join("theta.json"));
            let theta = ThetaFile::read(&path)?;
            commands::cmd_export_density(&cfg, &theta, &out)?;
            println!("wrote {}", out.join("density.csv").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
