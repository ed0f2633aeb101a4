//! Command-line front end: `design`, `sweep`, `verify`.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 numerical
//! failure in the design/simulation core, 3 verification suite failure.

mod config;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use relay_optim::designer::{design, DesignOptions, Transceiver};
use relay_optim::linalg::CMat;
use relay_optim::sim::{fmt_sig, generate_scenario, render_csv, sweep, SweepAxis};
use relay_optim::verify::{run_all, VerifyConfig, VerifyLevel};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "relay-optim",
    version,
    about = "Robust multi-hop MIMO relay transceiver design and simulation"
)]
struct Cli {
    /// Worker threads for simulation; overrides RELAY_OPTIM_THREADS and the
    /// config file. 0 selects the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design a transceiver for one seeded scenario and dump its factors.
    Design {
        /// Run configuration file.
        config: PathBuf,
    },
    /// Sweep a parameter grid; writes aggregated metrics as CSV.
    Sweep {
        /// Run configuration file.
        config: PathBuf,
        /// Swept parameter: sigma_e_sq or snr_db.
        #[arg(long)]
        axis: String,
        /// Ascending grid values, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Run the self-check property suites.
    Verify {
        /// fast or full (full adds grid-search oracles and a larger batch).
        #[arg(long, default_value = "fast")]
        level: String,
        /// Base seed of the generated instances.
        #[arg(long, default_value_t = 0x5EED)]
        seed: u64,
        /// Deliberately corrupt one rotation so the majorization suite must
        /// fail; negative control for the exit-code contract.
        #[arg(long, hide = true)]
        corrupt_rotations: bool,
    },
}

enum CliError {
    /// Bad configuration, arguments or I/O: exit 1.
    Config(String),
    /// Numerical failure inside the core: exit 2.
    Numerical(String),
    /// Verification suites failed: exit 3.
    Verification,
}

impl From<relay_optim::Error> for CliError {
    fn from(e: relay_optim::Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("numerical error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Verification) => ExitCode::from(3),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Design { config } => {
            let rc = config::load(&config).map_err(CliError::Config)?;
            let pool = build_pool(cli.threads, rc.threads)?;
            pool.install(|| cmd_design(&rc))
        }
        Command::Sweep { config, axis, values } => {
            let rc = config::load(&config).map_err(CliError::Config)?;
            let pool = build_pool(cli.threads, rc.threads)?;
            pool.install(|| cmd_sweep(&rc, &axis, &values))
        }
        Command::Verify { level, seed, corrupt_rotations } => {
            cmd_verify(&level, seed, corrupt_rotations)
        }
    }
}

/// Thread-count precedence: flag, then RELAY_OPTIM_THREADS, then config.
fn build_pool(flag: Option<usize>, from_config: usize) -> Result<rayon::ThreadPool, CliError> {
    let threads = if let Some(t) = flag {
        t
    } else if let Ok(raw) = std::env::var("RELAY_OPTIM_THREADS") {
        raw.parse::<usize>().map_err(|_| {
            CliError::Config(format!("RELAY_OPTIM_THREADS: cannot parse `{raw}`"))
        })?
    } else {
        from_config
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))
}

fn cmd_design(rc: &RunConfig) -> Result<(), CliError> {
    let scenario = generate_scenario(&rc.sim, 0)?;
    let tx = design(&scenario.estimated, &rc.sim.objective, &DesignOptions::default())?;
    let ints = tx.internals.as_ref().expect("design keeps internals");

    if rc.verbosity >= 1 {
        println!(
            "objective {} = {}  ({} sweeps{})",
            rc.sim.objective.name(),
            fmt_sig(ints.objective_value),
            ints.sweeps,
            if ints.surrogate { ", surrogate bound in use" } else { "" }
        );
        for (k, gains) in ints.gains.iter().enumerate() {
            let h: Vec<String> = gains.iter().map(|&x| format!("{x:.6}")).collect();
            let p: Vec<String> =
                ints.lambda_f[k].iter().map(|&f| format!("{:.6}", f * f)).collect();
            println!("hop {}: gains [{}]  allocation [{}]", k + 1, h.join(", "), p.join(", "));
        }
    }
    if rc.verbosity >= 2 {
        let trace: Vec<String> = ints.objective_trace.iter().map(|&x| fmt_sig(x)).collect();
        println!("trace: {}", trace.join(" "));
    }

    write_factors(&rc.output, &tx)
        .map_err(|e| CliError::Config(format!("cannot write `{}`: {e}", rc.output.display())))?;
    if rc.verbosity >= 1 {
        println!("factors written to {}", rc.output.display());
    }
    Ok(())
}

/// Factor dump: one block per matrix, `# name rows cols` header, one line
/// per row of `re,im` pairs separated by spaces.
fn write_factors(path: &std::path::Path, tx: &Transceiver) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let ints = tx.internals.as_ref().expect("design keeps internals");
    for (k, p) in tx.precoders.iter().enumerate() {
        write_matrix(&mut out, &format!("P_{}", k + 1), p)?;
    }
    write_matrix(&mut out, "G", &tx.equalizer)?;
    for (k, f) in ints.f_mats.iter().enumerate() {
        write_matrix(&mut out, &format!("F_{}", k + 1), f)?;
    }
    for (k, q) in ints.rotations.iter().enumerate() {
        write_matrix(&mut out, &format!("Q_{k}"), q)?;
    }
    out.flush()
}

fn write_matrix(out: &mut impl Write, name: &str, m: &CMat) -> std::io::Result<()> {
    writeln!(out, "# {} {} {}", name, m.nrows(), m.ncols())?;
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| format!("{},{}", fmt_sig(m[(i, j)].re), fmt_sig(m[(i, j)].im)))
            .collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

fn cmd_sweep(rc: &RunConfig, axis: &str, values: &[f64]) -> Result<(), CliError> {
    let axis = SweepAxis::parse(axis).map_err(|e| CliError::Config(e.to_string()))?;
    if values.is_empty() {
        return Err(CliError::Config("at least one grid value required".into()));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config("grid values must be strictly ascending".into()));
    }
    for &v in values {
        let ok = match axis {
            SweepAxis::SigmaESq => (0.0..1.0).contains(&v),
            SweepAxis::SnrDb => v.is_finite(),
        };
        if !ok {
            return Err(CliError::Config(format!(
                "grid value {v} out of range for {}",
                axis.key()
            )));
        }
    }

    let points = sweep(&rc.sim, axis, values)?;
    let csv = render_csv(&points, &rc.sim.objective);
    std::fs::write(&rc.output, &csv)
        .map_err(|e| CliError::Config(format!("cannot write `{}`: {e}", rc.output.display())))?;

    if rc.verbosity >= 1 {
        for point in &points {
            println!(
                "{} = {}: weighted MSE robust {} vs nonrobust {}  (rate {} vs {}, {} trials)",
                axis.key(),
                fmt_sig(point.axis_value),
                fmt_sig(point.robust.weighted_mse_empirical),
                fmt_sig(point.nonrobust.weighted_mse_empirical),
                fmt_sig(point.robust.sum_rate),
                fmt_sig(point.nonrobust.sum_rate),
                point.robust.trials_used,
            );
        }
        println!("csv written to {}", rc.output.display());
    }
    Ok(())
}

fn cmd_verify(level: &str, seed: u64, corrupt_rotations: bool) -> Result<(), CliError> {
    let level = match level {
        "fast" => VerifyLevel::Fast,
        "full" => VerifyLevel::Full,
        other => {
            return Err(CliError::Config(format!(
                "unknown level `{other}` (expected fast or full)"
            )))
        }
    };
    let results = run_all(&VerifyConfig { level, seed, corrupt_rotations });
    let mut all_passed = true;
    for suite in &results {
        let status = if suite.passed { "PASS" } else { "FAIL" };
        println!(
            "suite {:<22} {status}  worst {:>18}  ({} cases){}",
            suite.name,
            fmt_sig(suite.worst),
            suite.cases,
            if suite.detail.is_empty() { String::new() } else { format!("  {}", suite.detail) }
        );
        all_passed &= suite.passed;
    }
    if all_passed {
        Ok(())
    } else {
        Err(CliError::Verification)
    }
}
