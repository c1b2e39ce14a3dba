use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use skewflow::config::ExperimentConfig;
use skewflow::output::write_outputs;
use skewflow::scenario::{list_scenarios, run};
use skewflow::Error;

/// Runs one skewflow experiment from a TOML config.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Args {
    /// Experiment config (TOML).
    #[arg(long, required_unless_present = "list")]
    config: Option<PathBuf>,
    /// Output directory; overrides `outdir` in the config.
    #[arg(long)]
    outdir: Option<PathBuf>,
    /// Seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Print the scenario table and exit.
    #[arg(long)]
    list: bool,
}

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SKEWFLOW_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("SKEWFLOW_THREADS must be a positive integer, got '{raw}'"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let args = Args::parse();
    if args.list {
        print!("{}", list_scenarios());
        return ExitCode::SUCCESS;
    }
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(2);
    }
    let path = args.config.expect("clap enforces --config");
    let mut cfg = match ExperimentConfig::load(&path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let outdir = args
        .outdir
        .or_else(|| cfg.outdir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(cfg.scenario.name()));
    let verdict = match run(&cfg) {
        Ok(v) => v,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = write_outputs(&verdict, &outdir, &cfg.output) {
        eprintln!("error: cannot write outputs to {}: {e}", outdir.display());
        return ExitCode::from(1);
    }
    for c in &verdict.criteria {
        println!(
            "{:<4} {} = {:.4e} ({} {:.1e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.measured,
            c.relation.symbol(),
            c.threshold
        );
    }
    if let Some(e) = &verdict.error {
        println!("ERROR {e}");
    }
    let ok = verdict.passed();
    println!("{}: {} -> {}", verdict.scenario, if ok { "pass" } else { "fail" }, outdir.display());
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
