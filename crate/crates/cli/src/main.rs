use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ibgan::experiment::{read_records, run_experiment, summarize, summary_csv, summary_table, ExperimentConfig};
use ibgan::ndcore::layer_checks;
use ibgan::oracle::property_sweep;
use ibgan::rng::seeded;
use ibgan::trainer::triplet_gradcheck;

#[derive(Parser)]
#[command(
    name = "ibgan",
    version,
    about = "Imputation-balanced GAN experiments for imbalanced time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment grid described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the record file named in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Summarize a result record file as a table and CSV.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        /// Where to write the summary CSV (default: stdout after the table).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run the exact-oracle property sweeps.
    OracleCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Compare analytic and finite-difference gradients.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random parameter draws for the composed losses.
        #[arg(long, default_value_t = 20)]
        draws: u64,
    },
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn run(cli: Cli) -> ibgan::Result<bool> {
    match cli.command {
        Command::Run { config, out, quiet } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(out) = out {
                cfg.experiment.output = out;
            }
            let records = run_experiment(&cfg, |r| {
                if quiet {
                    return;
                }
                let p = r.p_miss.map_or("-".to_string(), |p| p.to_string());
                match (&r.error, r.balanced_accuracy) {
                    (Some(e), _) => eprintln!("{} p_miss={p} replicate {}: error: {e}", r.method.name(), r.replicate),
                    (None, ba) => eprintln!(
                        "{} p_miss={p} n={} replicate {}: balanced accuracy {:.3}",
                        r.method.name(),
                        r.train_size,
                        r.replicate,
                        ba.unwrap_or(f64::NAN)
                    ),
                }
                for w in &r.warnings {
                    eprintln!("  warning: {w}");
                }
            })?;
            print!("{}", summary_table(&summarize(&records)?));
            Ok(records.iter().all(|r| r.error.is_none()))
        }
        Command::Summarize { input, csv } => {
            let rows = summarize(&read_records(&input)?)?;
            print!("{}", summary_table(&rows));
            let text = summary_csv(&rows);
            match csv {
                Some(path) => std::fs::write(&path, text).map_err(|e| ibgan::Error::Io { path, source: e })?,
                None => print!("\n{text}"),
            }
            Ok(true)
        }
        Command::OracleCheck { seed } => {
            let mut all = true;
            for c in property_sweep(&mut seeded(seed))? {
                println!(
                    "{} {}: worst {:.3e} (tolerance {:.0e})",
                    verdict(c.passed()),
                    c.name,
                    c.worst,
                    c.tolerance
                );
                all &= c.passed();
            }
            Ok(all)
        }
        Command::Gradcheck { seed, draws } => {
            let mut all = true;
            for (name, err) in layer_checks(&mut seeded(seed), 1e-6)? {
                let ok = err < 1e-5;
                println!("{} {name}: {err:.3e}", verdict(ok));
                all &= ok;
            }
            let mut worst = 0.0f64;
            for d in 0..draws {
                worst = worst.max(triplet_gradcheck(seed.wrapping_add(d), 1e-5)?.max());
            }
            let ok = worst < 1e-4;
            println!("{} composed triplet losses ({draws} draws): {worst:.3e}", verdict(ok));
            Ok(all && ok)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
