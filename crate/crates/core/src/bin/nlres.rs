use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use nlres::run::{cmd_gen_model, cmd_oracle, cmd_run, cmd_validate};

#[derive(Parser)]
#[command(name = "nlres", version, about = "Non-local optical response of few-level molecular models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check an NLRM/1 model directory.
    Validate { dir: PathBuf },
    /// Compute the signals requested by a run config.
    Run { config: PathBuf },
    /// Build a synthetic model from a generator spec file or preset name
    /// (tlm_a, ladder, non_centrosymmetric).
    GenModel {
        spec: String,
        #[arg(short, long, default_value = "model")]
        out: PathBuf,
    },
    /// Fit oracle amplitude scans and compare with the perturbative orders.
    Oracle { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { dir } => cmd_validate(&dir).map(|(pass, text)| {
            println!("{}", text.trim_end());
            if pass {
                0
            } else {
                1
            }
        }),
        Command::Run { config } => cmd_run(&config).map(|files| {
            for f in files {
                println!("{f}");
            }
            0
        }),
        Command::GenModel { spec, out } => cmd_gen_model(&spec, &out).map(|m| {
            println!("wrote {} ({} states)", out.display(), m.n_states());
            0
        }),
        Command::Oracle { config } => cmd_oracle(&config).map(|c| {
            println!("lambda_max {:.6e}", c.lambda_max);
            for n in 0..3 {
                println!(
                    "order {}: relative L2 {:.3e} (oracle scale {:.3e}, engine scale {:.3e})",
                    n + 1,
                    c.relative_error[n],
                    c.oracle_scale[n],
                    c.engine_scale[n]
                );
            }
            0
        }),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
