//! Experiment front door. Exit status: 0 = all requested audits pass,
//! 1 = audit failure, 2 = configuration error, 3 = numeric fatal.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hypernls::diagnostics::{
    bernstein_audit, radial_sobolev_audit, smoothing_audit, AuditVerdict, Calibration,
};
use hypernls::error::Error;
use hypernls::grid::FieldSnapshot;
use hypernls::lab::{
    self, calibrate, gen_data, resume, run_with_checkpoints, sweep, write_run_outputs, RunConfig,
};

#[derive(Parser)]
#[command(name = "hypernls", version, about = "Pseudospectral high-low simulator for the radial defocusing cubic NLS on hyperbolic 3-space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (flat JSON; unknown keys are rejected).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
    /// Worker threads for sweeps.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize initial data and write it as a field snapshot (data.json).
    GenData(Common),
    /// Run one experiment: evolution, audits, history/ledger/report files.
    Simulate(Common),
    /// Run every sweep point and fit the splitting power laws.
    Sweep(Common),
    /// Run the data-independent audit batteries against the calibration file.
    Audit(Common),
    /// Measure calibration constants and write calibration.json.
    Calibrate(Common),
    /// Continue a checkpointed run to its horizon.
    Resume {
        #[command(flatten)]
        common: Common,
        /// Checkpoint file (defaults to <out>/checkpoint.bin).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::NumericFatal { .. } => 3,
        _ => 2,
    }
}

fn load_config(common: &Common) -> Result<RunConfig, Error> {
    let mut config = match &common.config {
        Some(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| Error::Config(format!("cannot read config {path:?}: {e}")))?;
            RunConfig::from_json_bytes(&bytes)?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out = Some(out.display().to_string());
    }
    config.validate()?;
    Ok(config)
}

fn out_dir(config: &RunConfig) -> Result<PathBuf, Error> {
    config
        .out
        .as_ref()
        .map(PathBuf::from)
        .ok_or_else(|| Error::Config("an output directory is required (--out)".into()))
}

fn install_thread_pool(threads: Option<usize>) -> Result<(), Error> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    }
    Ok(())
}

fn write_checked(path: &Path, contents: &str, force: bool) -> Result<(), Error> {
    if path.exists() && !force {
        return Err(Error::Config(format!(
            "output {path:?} exists; pass --force to overwrite"
        )));
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn print_verdicts(verdicts: &[AuditVerdict]) {
    for v in verdicts {
        println!(
            "{} {}: ratio {:.6e} vs threshold {:.6e}",
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.ratio,
            v.threshold
        );
    }
}

fn cmd_gen_data(common: &Common) -> Result<bool, Error> {
    let config = load_config(common)?;
    let dir = out_dir(&config)?;
    std::fs::create_dir_all(&dir)?;
    let grid = config.grid()?;
    let field = gen_data(
        config.s,
        config.seed,
        config.amplitude,
        grid,
        config.delta_spec,
    )?;
    let snapshot = FieldSnapshot::from_field(&field);
    write_checked(
        &dir.join("data.json"),
        &snapshot.to_json_string()?,
        common.force,
    )?;
    println!("wrote {}", dir.join("data.json").display());
    Ok(true)
}

fn cmd_simulate(common: &Common) -> Result<bool, Error> {
    let config = load_config(common)?;
    let dir = out_dir(&config)?;
    std::fs::create_dir_all(&dir)?;
    let checkpoint_path = dir.join("checkpoint.bin");
    let checkpoint = config.checkpoint_every.map(|_| checkpoint_path.as_path());
    let (report, history, ledger) = run_with_checkpoints(&config, checkpoint)?;
    write_run_outputs(&dir, &report, &history, &ledger, common.force)?;
    print_verdicts(&report.audits);
    println!(
        "intervals {}  M_used {:.6e}  dE_total {:.6e}  bootstrap flag {}",
        ledger.interval_count(),
        ledger.m_used,
        ledger.delta_e_total,
        report.bootstrap.flag
    );
    for w in &history.warnings {
        println!("warning: {w}");
    }
    Ok(report.all_audits_pass)
}

fn cmd_sweep(common: &Common) -> Result<bool, Error> {
    let config = load_config(common)?;
    let dir = out_dir(&config)?;
    std::fs::create_dir_all(&dir)?;
    let report = sweep(&config)?;
    write_checked(
        &dir.join("report.json"),
        &serde_json::to_string_pretty(&report).map_err(Error::from)?,
        common.force,
    )?;
    for fit in &report.fits {
        match (&fit.fit, &fit.note) {
            (Some(f), _) => println!(
                "fit {}: slope {:.4} (target {:.4}), residual {:.3e}, {} points",
                fit.name, f.slope, fit.target, f.max_residual, f.points
            ),
            (None, Some(note)) => println!("fit {}: {note}", fit.name),
            (None, None) => {}
        }
    }
    let pass = report.runs.iter().all(|r| r.all_audits_pass);
    Ok(pass)
}

fn cmd_audit(common: &Common) -> Result<bool, Error> {
    let config = load_config(common)?;
    let dir = out_dir(&config)?;
    std::fs::create_dir_all(&dir)?;
    let calibration = match &config.calibration {
        Some(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| Error::Config(format!("cannot read calibration {path:?}: {e}")))?;
            Calibration::from_json_bytes(&bytes)?
        }
        None => return Err(Error::Config("audit requires a calibration file".into())),
    };
    let grid = config.grid()?;
    let mut verdicts = Vec::new();

    let s_list: Vec<f64> = (2..=14).map(|i| 2f64.powi(-i)).collect();
    verdicts.extend(bernstein_audit(&grid, &s_list)?);

    let lookup = |alpha: f64| calibration.get(&format!("radial_sobolev_alpha_{alpha:.2}"));
    verdicts.extend(radial_sobolev_audit(
        grid,
        100,
        &[0.3, 0.5, 0.75],
        config.seed,
        &lookup,
    )?);

    let mut smoothing_worst: Option<AuditVerdict> = None;
    for i in 0..100u64 {
        let f = hypernls::diagnostics::battery_field(grid, config.seed, i);
        let v = smoothing_audit(
            &f,
            1.0,
            config.delta_weight,
            65,
            calibration.get("smoothing")?,
        )?;
        if smoothing_worst
            .as_ref()
            .map(|w| v.ratio > w.ratio)
            .unwrap_or(true)
        {
            smoothing_worst = Some(v);
        }
    }
    verdicts.extend(smoothing_worst);

    write_checked(
        &dir.join("report.json"),
        &serde_json::to_string_pretty(&verdicts).map_err(Error::from)?,
        common.force,
    )?;
    print_verdicts(&verdicts);
    Ok(verdicts.iter().all(|v| v.pass))
}

fn cmd_calibrate(common: &Common) -> Result<bool, Error> {
    let config = load_config(common)?;
    let dir = out_dir(&config)?;
    std::fs::create_dir_all(&dir)?;
    let calibration = calibrate(&config)?;
    write_checked(
        &dir.join("calibration.json"),
        &calibration.to_json_string()?,
        common.force,
    )?;
    for (name, value) in &calibration.constants {
        println!("{name} = {value:.6e}");
    }
    println!("wrote {}", dir.join("calibration.json").display());
    Ok(true)
}

fn cmd_resume(common: &Common, checkpoint: &Option<PathBuf>) -> Result<bool, Error> {
    let config = load_config(common)?;
    let dir = out_dir(&config)?;
    let checkpoint_path = checkpoint
        .clone()
        .unwrap_or_else(|| dir.join("checkpoint.bin"));
    let (report, history, ledger) = resume(&config, &checkpoint_path)?;
    write_run_outputs(&dir, &report, &history, &ledger, common.force)?;
    print_verdicts(&report.audits);
    println!(
        "resumed from step {}; intervals {}",
        report.resumed_from_step.unwrap_or(0),
        ledger.interval_count()
    );
    Ok(report.all_audits_pass)
}

fn dispatch(cli: &Cli) -> Result<bool, Error> {
    match &cli.command {
        Command::GenData(c) => {
            install_thread_pool(c.threads)?;
            cmd_gen_data(c)
        }
        Command::Simulate(c) => {
            install_thread_pool(c.threads)?;
            cmd_simulate(c)
        }
        Command::Sweep(c) => {
            install_thread_pool(c.threads)?;
            cmd_sweep(c)
        }
        Command::Audit(c) => {
            install_thread_pool(c.threads)?;
            cmd_audit(c)
        }
        Command::Calibrate(c) => {
            install_thread_pool(c.threads)?;
            cmd_calibrate(c)
        }
        Command::Resume { common, checkpoint } => {
            install_thread_pool(common.threads)?;
            cmd_resume(common, checkpoint)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes_map_error_kinds() {
        assert_eq!(exit_code_for(&Error::Config("x".into())), 2);
        assert_eq!(
            exit_code_for(&Error::NumericFatal {
                t: 1.0,
                msg: "x".into()
            }),
            3
        );
        assert_eq!(exit_code_for(&Error::InvalidParameter("x".into())), 2);
    }
}
