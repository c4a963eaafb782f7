use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use speclp::scenarios::{reproduce, write_outputs};
use speclp::{run_scenario, HarnessError, Scenario, ScenarioConfig};

/// Exit status: 0 all criteria pass, 1 some criterion fails, 2 bad config,
/// 3 runtime error.
#[derive(Debug, Parser)]
#[command(
    name = "speclp",
    version,
    about = "Spectral evolution-operator verification scenarios"
)]
struct Cli {
    /// AUDIT_SYMBOL, KERNEL_DECAY, HORMANDER, DYADIC_ENVELOPE, GFUN_RATIO,
    /// LP_DECOMP, FRACLAP_XCHECK or REPRODUCE (case-insensitive).
    scenario: String,
    /// Flat TOML config; required except for `reproduce`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `output_dir` from the config, then
    /// `speclp-out/<scenario>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for the inner parallel loops.
    #[arg(long)]
    workers: Option<usize>,
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    if let Some(k) = cli.workers {
        if k == 0 {
            return Err(HarnessError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| HarnessError::Config(format!("cannot size thread pool: {e}")))?;
    }
    let scenario: Scenario = cli.scenario.parse()?;
    let mut cfg = match (&cli.config, scenario) {
        (Some(path), _) => ScenarioConfig::from_file(path)?,
        (None, Scenario::Reproduce) => ScenarioConfig::default(),
        (None, _) => return Err(HarnessError::Config(format!("{scenario} needs --config <file>"))),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    cfg.scenario = Some(scenario);
    let out = cli
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("speclp-out").join(scenario.name().to_ascii_lowercase()));

    if scenario == Scenario::Reproduce {
        let outcome = reproduce(&mut |r| println!("{}", r.line()))?;
        write_outputs(scenario, &cfg, &outcome, &out)?;
        let pass = outcome.pass();
        println!("{} -> {}", if pass { "ALL PASS" } else { "FAILURES" }, out.display());
        return Ok(pass);
    }
    let result = run_scenario(scenario, &cfg, &out)?;
    for c in &result.outcome.checks {
        println!(
            "{} {} = {:.6e} {} {:.3e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.relation,
            c.threshold
        );
    }
    println!(
        "{scenario}: {} -> {}",
        if result.pass { "pass" } else { "fail" },
        out.display()
    );
    Ok(result.pass)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ HarnessError::Config(_)) => {
            eprintln!("speclp: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("speclp: {e}");
            ExitCode::from(3)
        }
    }
}
