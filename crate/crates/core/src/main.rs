use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use holotrap::cli::{self, EvaluateInput, Overrides, RunConfig};
use holotrap::Error;

#[derive(Parser)]
#[command(name = "holotrap", version, about = "Design and simulate SLM holograms for optical trap arrays")]
struct Args {
    /// Run configuration (JSON).
    #[arg(short, long, global = true, default_value = "holotrap.json")]
    config: PathBuf,
    /// Overrides the solver and loading seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the number of solver iterations.
    #[arg(long, global = true)]
    iterations: Option<usize>,
    /// Output directory (for `export`: the hologram file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a hologram and its simulated focal intensity.
    Design,
    /// Measure the traps produced by a hologram or an intensity map.
    Evaluate {
        #[arg(long, conflicts_with = "intensity")]
        hologram: Option<PathBuf>,
        /// Focal intensity map (CSV).
        #[arg(long)]
        intensity: Option<PathBuf>,
    },
    /// Monte Carlo atom loading on a trap report.
    Loadsim {
        /// Trap report from `evaluate`; defaults to the one in the output directory.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Rewrite a hologram with the configured lens term and save the device description.
    Export {
        /// Hologram to export; defaults to the one in the output directory.
        #[arg(long)]
        hologram: Option<PathBuf>,
    },
}

fn run(args: Args) -> Result<(), Error> {
    let export_out = match args.command {
        Command::Export { .. } => args.out.clone(),
        _ => None,
    };
    let overrides = Overrides {
        seed: args.seed,
        iterations: args.iterations,
        out: if export_out.is_some() { None } else { args.out.clone() },
    };
    let cfg = RunConfig::load(&args.config, &overrides)?;
    match args.command {
        Command::Design => {
            let out = cli::cmd_design(&cfg)?;
            println!("hologram: {}", out.hologram.display());
            println!("intensity: {} {}", out.intensity_pgm.display(), out.intensity_csv.display());
            println!("convergence: {}", out.convergence_json.display());
        }
        Command::Evaluate { hologram, intensity } => {
            let input = match (hologram, intensity) {
                (_, Some(path)) => EvaluateInput::Intensity(path),
                (Some(path), None) => EvaluateInput::Hologram(path),
                (None, None) => EvaluateInput::Hologram(cfg.output_dir.join(cli::HOLOGRAM_FILE)),
            };
            let (report, path) = cli::cmd_evaluate(&cfg, &input)?;
            for t in &report.traps {
                let name = t.trap_index.map_or("zeroth".to_string(), |i| format!("trap {i}"));
                println!(
                    "{name:>8}: x = {:+.3} um  y = {:+.3} um  power = {:.3} mW{}",
                    t.position_m[0] * 1e6,
                    t.position_m[1] * 1e6,
                    t.power_w * 1e3,
                    if t.above_threshold { "" } else { "  (below threshold)" }
                );
            }
            println!(
                "zeroth order: {:.3} mW{}",
                report.zeroth_order_power_w * 1e3,
                if report.zeroth_order_above_threshold { " (above threshold)" } else { "" }
            );
            println!("report: {}", path.display());
        }
        Command::Loadsim { report } => {
            let report = report.unwrap_or_else(|| cfg.output_dir.join(cli::REPORT_FILE));
            let (stats, path) = cli::cmd_loadsim(&cfg, &report)?;
            print!("{}", stats.summary());
            println!("statistics: {}", path.display());
        }
        Command::Export { hologram } => {
            let hologram = hologram.unwrap_or_else(|| cfg.output_dir.join(cli::HOLOGRAM_FILE));
            let out = export_out.unwrap_or_else(|| cfg.output_dir.join("export").join(cli::HOLOGRAM_FILE));
            let device = cli::cmd_export(&cfg, &hologram, &out)?;
            println!("hologram: {}", out.display());
            println!("device: {}", device.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
