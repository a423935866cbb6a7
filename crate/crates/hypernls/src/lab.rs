//! Experiment front door: rough-data generation, run configuration, sweeps
//! over the splitting parameters, report emission, and checkpointing.
//!
//! Everything is deterministic: a config maps to a report as a pure function
//! (modulo the wall-clock metadata fields), sweeps merge results in
//! parameter order, and a checkpointed run continues bit-identically to an
//! uninterrupted one.

use std::collections::BTreeSet;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus;
use crate::diagnostics::{
    bernstein_audit, conservation_audit, morawetz_audit, radial_sobolev_audit,
    scattering_diagnostic, smoothing_audit, AuditVerdict, Calibration, MorawetzReport,
    PowerLawFit, ScatteringReport, ThresholdProvenance,
};
use crate::error::{Error, Result};
use crate::grid::{self, RadialField, RadialGrid, SpectralField};
use crate::highlow::{
    budget_check, BudgetVerdict, HighLowParams, HighLowState, IntervalRecord, Ledger,
};
use crate::propagators::{CoEvolution, EvolutionHistory, StepperConfig, StrichartzTable};
use crate::rng::Lcg64;

pub const KNOWN_AUDITS: [&str; 7] = [
    "conservation",
    "bernstein",
    "radial_sobolev",
    "smoothing",
    "morawetz",
    "scattering",
    "budget",
];

/// Full experiment parameterization. The on-disk form is flat JSON with
/// exactly these keys; unknown keys are a configuration error (fail closed)
/// and parsing round-trips f64 values bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(rename = "R")]
    pub r_max: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub dt: f64,
    pub retain_every: usize,
    pub s: f64,
    pub s0: f64,
    pub eps: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub seed: u64,
    pub amplitude: f64,
    pub delta_spec: f64,
    /// Exponent κ in the bootstrap comparison `−κ(1−s)` vs `−s/2 + 3/8`.
    pub bootstrap_exponent: f64,
    /// Sobolev index of the scattering pull-back distance.
    pub sigma_scatter: f64,
    /// Weight exponent offset δ in the local-smoothing audit.
    pub delta_weight: f64,
    pub boundary_shell_fraction: f64,
    pub boundary_mass_tolerance: f64,
    pub budget_tolerance: f64,
    pub audits: Vec<String>,
    pub sweep_s0: Vec<f64>,
    pub sweep_s: Vec<f64>,
    /// Write a checkpoint every this many steps (requires an output dir).
    pub checkpoint_every: Option<u64>,
    /// Path of the calibration file consulted by calibrated audits.
    pub calibration: Option<String>,
    /// Output directory (CLI `--out` overrides).
    pub out: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            r_max: 40.0,
            n: 4096,
            dt: 2e-3,
            retain_every: 10,
            s: 0.95,
            s0: 2f64.powi(-8),
            eps: 0.1,
            horizon: 20.0,
            seed: 7,
            amplitude: 8.0,
            delta_spec: 0.01,
            bootstrap_exponent: 1.5,
            sigma_scatter: 0.5,
            delta_weight: 0.01,
            boundary_shell_fraction: 0.1,
            boundary_mass_tolerance: 1e-6,
            budget_tolerance: 0.1,
            audits: vec!["conservation".into(), "bernstein".into()],
            sweep_s0: Vec::new(),
            sweep_s: Vec::new(),
            checkpoint_every: None,
            calibration: None,
            out: None,
        }
    }
}

impl RunConfig {
    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_slice(bytes).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.r_max > 0.0) || !self.r_max.is_finite() {
            return bad(format!("R must be positive, got {}", self.r_max));
        }
        if self.n < 2 {
            return bad(format!("N must be at least 2, got {}", self.n));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if self.retain_every == 0 {
            return bad("retain_every must be at least 1".into());
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return bad(format!("s must lie in (0,1), got {}", self.s));
        }
        if !(self.s0 > 0.0) || !self.s0.is_finite() {
            return bad(format!("s0 must be positive, got {}", self.s0));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return bad(format!("eps must lie in (0,1), got {}", self.eps));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return bad(format!("T must be positive, got {}", self.horizon));
        }
        if !(self.amplitude > 0.0) || !self.amplitude.is_finite() {
            return bad(format!("amplitude must be positive, got {}", self.amplitude));
        }
        if !(self.delta_spec >= 0.0) || !self.delta_spec.is_finite() {
            return bad(format!("delta_spec must be nonnegative, got {}", self.delta_spec));
        }
        if !(self.bootstrap_exponent > 0.0) || !self.bootstrap_exponent.is_finite() {
            return bad(format!(
                "bootstrap_exponent must be positive, got {}",
                self.bootstrap_exponent
            ));
        }
        if !self.sigma_scatter.is_finite() {
            return bad("sigma_scatter must be finite".into());
        }
        if !(self.delta_weight > 0.0) {
            return bad("delta_weight must be positive".into());
        }
        if !(self.boundary_shell_fraction > 0.0 && self.boundary_shell_fraction < 1.0) {
            return bad("boundary_shell_fraction must lie in (0,1)".into());
        }
        if !(self.boundary_mass_tolerance > 0.0) {
            return bad("boundary_mass_tolerance must be positive".into());
        }
        if !(self.budget_tolerance >= 0.0) {
            return bad("budget_tolerance must be nonnegative".into());
        }
        for name in &self.audits {
            if !KNOWN_AUDITS.contains(&name.as_str()) {
                return bad(format!("unknown audit {name:?}"));
            }
        }
        let names: BTreeSet<&String> = self.audits.iter().collect();
        if names.len() != self.audits.len() {
            return bad("duplicate audit names".into());
        }
        if self.sweep_s0.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
            return bad("sweep_s0 values must be positive".into());
        }
        if self.sweep_s.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return bad("sweep_s values must lie in (0,1)".into());
        }
        if !self.sweep_s0.is_empty() && !self.sweep_s.is_empty() {
            return bad("sweep over either s0 or s, not both".into());
        }
        if self.checkpoint_every == Some(0) {
            return bad("checkpoint_every must be at least 1".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.r_max, self.n)
    }

    pub fn stepper(&self) -> Result<StepperConfig> {
        let cfg = StepperConfig {
            dt: self.dt,
            boundary_shell_fraction: self.boundary_shell_fraction,
            boundary_mass_tolerance: self.boundary_mass_tolerance,
            retain_every: self.retain_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn highlow_params(&self) -> HighLowParams {
        HighLowParams {
            s: self.s,
            s0: self.s0,
            eps: self.eps,
            horizon: self.horizon,
        }
    }
}

// ---------------------------------------------------------------------------
// Rough-data generation
// ---------------------------------------------------------------------------

/// Synthesize radial data of target regularity `s`: spectral coefficients
/// `ŵ_k = ξ_k·λ_k^{−β/2}` with `β = s + 1/2 + δ_spec` and unit-modulus
/// phases `ξ_k` from the portable generator, normalized post hoc so that
/// the discrete `H^s` norm equals `amplitude`. The continuum field lies in
/// `H^σ` exactly for `σ < s + δ_spec` and fails it for `σ ≥ s + δ_spec`.
pub fn gen_data(
    s: f64,
    seed: u64,
    amplitude: f64,
    grid: RadialGrid,
    delta_spec: f64,
) -> Result<RadialField> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "data regularity must lie in (0,1), got {s}"
        )));
    }
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "amplitude must be positive, got {amplitude}"
        )));
    }
    let beta = s + 0.5 + delta_spec;
    let mut rng = Lcg64::new(seed);
    let coeffs: Vec<Complex64> = (0..grid.node_count())
        .map(|k| rng.next_unit() * grid.eigenvalue(k).powf(-beta * 0.5))
        .collect();
    let raw = grid::inverse_transform(&SpectralField::from_coeffs(grid, coeffs)?);
    let norm = calculus::sobolev_norm(&raw, s);
    Ok(raw.scale(Complex64::new(amplitude / norm, 0.0)))
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// Bootstrap-exponent arithmetic: the run's scattering budget against the
/// splitting-parameter power laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub s: f64,
    pub s0: f64,
    pub kappa: f64,
    /// `−κ(1−s)`, the closed-loop growth exponent.
    pub exponent_zeta_bound: f64,
    /// `−s/2 + 3/8`, the budget-hypothesis exponent.
    pub exponent_m_threshold: f64,
    /// TRUE ⟺ `−κ(1−s) > −s/2 + 3/8` (the bootstrap closes for small s0).
    pub flag: bool,
    pub m_used: f64,
    /// `s0^{−s/2+3/8}`.
    pub m_threshold_value: f64,
    /// "below" or "above": which side of the threshold the run ended on.
    pub m_side: String,
    /// `s0^{−κ(1−s)}`, the predicted closed-loop budget.
    pub predicted_budget: f64,
    /// `½·s0^{−s/2+3/8}`, the bound the prediction must undercut.
    pub half_m: f64,
}

pub fn bootstrap_report(s: f64, s0: f64, kappa: f64, m_used: f64) -> BootstrapReport {
    let exponent_zeta_bound = -kappa * (1.0 - s);
    let exponent_m_threshold = -s / 2.0 + 3.0 / 8.0;
    let m_threshold_value = s0.powf(exponent_m_threshold);
    BootstrapReport {
        s,
        s0,
        kappa,
        exponent_zeta_bound,
        exponent_m_threshold,
        flag: exponent_zeta_bound > exponent_m_threshold,
        m_used,
        m_threshold_value,
        m_side: if m_used <= m_threshold_value {
            "below".into()
        } else {
            "above".into()
        },
        predicted_budget: s0.powf(exponent_zeta_bound),
        half_m: 0.5 * m_threshold_value,
    }
}

/// Monitor of the splitting-energy condition: each boundary's
/// `E(φ)·s0^{1−s}` must stay within a factor of 10 of the calibrated scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyConditionReport {
    pub scaled_values: Vec<f64>,
    pub c_ref: Option<f64>,
    pub flagged: bool,
}

fn energy_condition(ledger: &Ledger, c_ref: Option<f64>) -> EnergyConditionReport {
    let scale = ledger.params.s0.powf(1.0 - ledger.params.s);
    let mut scaled: Vec<f64> = vec![ledger.e_phi_initial * scale];
    scaled.extend(ledger.intervals.iter().map(|r| r.e_phi_end * scale));
    let flagged = match c_ref {
        Some(c) => scaled.iter().any(|&v| v < c / 10.0 || v > 10.0 * c),
        None => false,
    };
    EnergyConditionReport {
        scaled_values: scaled,
        c_ref,
        flagged,
    }
}

/// One fitted exponent with its target; `fit` is absent when the sweep was
/// degenerate (fewer than two usable points).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub name: String,
    pub target: f64,
    pub fit: Option<PowerLawFit>,
    pub note: Option<String>,
}

/// Per-interval mixed-norm tables, re-exported alongside the ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalTables {
    pub j: usize,
    pub psi: StrichartzTable,
    pub phi: StrichartzTable,
    pub v: StrichartzTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WallClock {
    pub started_unix_s: f64,
    pub elapsed_s: f64,
}

/// Serialized results of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: RunConfig,
    /// Ledger document in the export schema.
    pub ledger: serde_json::Value,
    pub interval_tables: Vec<IntervalTables>,
    pub audits: Vec<AuditVerdict>,
    pub fits: Vec<ExponentFit>,
    pub bootstrap: BootstrapReport,
    pub energy_condition: EnergyConditionReport,
    pub budget: Option<BudgetVerdict>,
    pub morawetz: Option<MorawetzReport>,
    pub scattering: Option<ScatteringReport>,
    pub resumed_from_step: Option<u64>,
    pub all_audits_pass: bool,
    pub wall_clock: WallClock,
}

impl RunReport {
    /// The report as JSON with the wall-clock fields stripped; this is the
    /// value the determinism contract is stated over.
    pub fn deterministic_json(&self) -> Result<serde_json::Value> {
        let mut doc = serde_json::to_value(self)?;
        doc.as_object_mut()
            .expect("report serializes to an object")
            .remove("wall_clock");
        Ok(doc)
    }
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

fn load_calibration(config: &RunConfig) -> Result<Option<Calibration>> {
    match &config.calibration {
        None => Ok(None),
        Some(path) => {
            let bytes = std::fs::read(path)
                .map_err(|e| Error::Config(format!("cannot read calibration {path:?}: {e}")))?;
            Ok(Some(Calibration::from_json_bytes(&bytes)?))
        }
    }
}

fn need_calibration<'c>(cal: Option<&'c Calibration>, audit: &str) -> Result<&'c Calibration> {
    cal.ok_or_else(|| {
        Error::Config(format!(
            "audit {audit:?} needs a calibration file; set \"calibration\" in the config"
        ))
    })
}

struct AuditOutputs {
    verdicts: Vec<AuditVerdict>,
    morawetz: Option<MorawetzReport>,
    scattering: Option<ScatteringReport>,
    budget: Option<BudgetVerdict>,
}

fn run_audits(
    config: &RunConfig,
    calibration: Option<&Calibration>,
    ledger: &Ledger,
    history: &EvolutionHistory,
    u0: &RadialField,
) -> Result<AuditOutputs> {
    let grid = *u0.grid();
    let mut verdicts = Vec::new();
    let mut morawetz = None;
    let mut scattering = None;
    let mut budget = None;

    for name in &config.audits {
        match name.as_str() {
            "conservation" => {
                let (m, e) = conservation_audit(history, 1e-10, 1e-4)?;
                verdicts.push(m);
                verdicts.push(e);
            }
            "bernstein" => {
                let s_list: Vec<f64> = (2..=14).map(|i| 2f64.powi(-i)).collect();
                verdicts.extend(bernstein_audit(&grid, &s_list)?);
            }
            "radial_sobolev" => {
                let cal = need_calibration(calibration, name)?;
                let lookup = |alpha: f64| cal.get(&format!("radial_sobolev_alpha_{alpha:.2}"));
                verdicts.extend(radial_sobolev_audit(
                    grid,
                    100,
                    &[0.3, 0.5, 0.75],
                    config.seed,
                    &lookup,
                )?);
            }
            "smoothing" => {
                let cal = need_calibration(calibration, name)?;
                verdicts.push(smoothing_audit(
                    u0,
                    1.0,
                    config.delta_weight,
                    65,
                    cal.get("smoothing")?,
                )?);
            }
            "morawetz" => {
                let cal = need_calibration(calibration, name)?;
                let report = morawetz_audit(history, cal.get("morawetz")?)?;
                verdicts.push(report.verdict.clone());
                morawetz = Some(report);
            }
            "scattering" => {
                let cal = need_calibration(calibration, name)?;
                let report = scattering_diagnostic(history, config.sigma_scatter)?;
                let threshold = cal.get("scattering_ratio_threshold")?;
                verdicts.push(AuditVerdict::new(
                    "scattering",
                    report.ratio,
                    1.0,
                    threshold,
                    ThresholdProvenance::Calibrated,
                ));
                scattering = Some(report);
            }
            "budget" => {
                let cal = need_calibration(calibration, name)?;
                let verdict =
                    budget_check(ledger, config.budget_tolerance, cal.get("budget_rho")?)?;
                verdicts.push(AuditVerdict::new(
                    "budget",
                    verdict.rho,
                    1.0,
                    verdict.c_cal * (1.0 + verdict.tolerance),
                    ThresholdProvenance::Calibrated,
                ));
                budget = Some(verdict);
            }
            other => return Err(Error::Config(format!("unknown audit {other:?}"))),
        }
    }
    Ok(AuditOutputs {
        verdicts,
        morawetz,
        scattering,
        budget,
    })
}

fn assemble_report(
    config: &RunConfig,
    ledger: &Ledger,
    outputs: AuditOutputs,
    calibration: Option<&Calibration>,
    resumed_from_step: Option<u64>,
    started_unix_s: f64,
    elapsed_s: f64,
) -> Result<RunReport> {
    let interval_tables = ledger
        .intervals
        .iter()
        .filter_map(|r| {
            r.tables.as_ref().map(|t| IntervalTables {
                j: r.j,
                psi: t[0].clone(),
                phi: t[1].clone(),
                v: t[2].clone(),
            })
        })
        .collect();
    let c_ref = calibration.and_then(|c| c.get("ephi_scale").ok());
    let all_audits_pass = outputs.verdicts.iter().all(|v| v.pass);
    Ok(RunReport {
        config: config.clone(),
        ledger: ledger.export_json(),
        interval_tables,
        audits: outputs.verdicts,
        fits: Vec::new(),
        bootstrap: bootstrap_report(
            config.s,
            config.s0,
            config.bootstrap_exponent,
            ledger.m_used,
        ),
        energy_condition: energy_condition(ledger, c_ref),
        budget: outputs.budget,
        morawetz: outputs.morawetz,
        scattering: outputs.scattering,
        resumed_from_step,
        all_audits_pass,
        wall_clock: WallClock {
            started_unix_s,
            elapsed_s,
        },
    })
}

fn now_unix() -> f64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Run one experiment: data synthesis, the high-low evolution, and the
/// requested audits. When `checkpoint` names a path and the config sets a
/// cadence, a checkpoint is (re)written every `checkpoint_every` steps.
pub fn run_with_checkpoints(
    config: &RunConfig,
    checkpoint: Option<&Path>,
) -> Result<(RunReport, EvolutionHistory, Ledger)> {
    config.validate()?;
    let started = now_unix();
    let t0 = std::time::Instant::now();
    let calibration = load_calibration(config)?;
    let grid = config.grid()?;
    let u0 = gen_data(config.s, config.seed, config.amplitude, grid, config.delta_spec)?;
    let stepper = config.stepper()?;
    let params = config.highlow_params();

    let mut state = HighLowState::new(&u0, &params, &stepper, config.seed)?;
    let mut history = EvolutionHistory::default();
    state.record_current(&mut history, &stepper);
    while !state.done() {
        state.step_once(&stepper, &mut history)?;
        if let (Some(path), Some(every)) = (checkpoint, config.checkpoint_every) {
            if state.step() % every == 0 && !state.done() {
                checkpoint_save(&state, &stepper, path)?;
            }
        }
    }
    let ledger = state.ledger(&stepper, history.warnings.clone());

    let outputs = run_audits(config, calibration.as_ref(), &ledger, &history, &u0)?;
    let report = assemble_report(
        config,
        &ledger,
        outputs,
        calibration.as_ref(),
        None,
        started,
        t0.elapsed().as_secs_f64(),
    )?;
    Ok((report, history, ledger))
}

/// Run one experiment without checkpointing.
pub fn run(config: &RunConfig) -> Result<(RunReport, EvolutionHistory, Ledger)> {
    run_with_checkpoints(config, None)
}

/// Continue a checkpointed run to its horizon and emit a fresh report. The
/// history covers the resumed span only; the ledger is complete.
pub fn resume(config: &RunConfig, checkpoint_path: &Path) -> Result<(RunReport, EvolutionHistory, Ledger)> {
    config.validate()?;
    let started = now_unix();
    let t0 = std::time::Instant::now();
    let calibration = load_calibration(config)?;
    let (mut state, stepper) = checkpoint_load(checkpoint_path)?;
    verify_checkpoint_matches(config, &state, &stepper)?;
    let resumed_from = state.step();

    let grid = config.grid()?;
    let u0 = gen_data(config.s, config.seed, config.amplitude, grid, config.delta_spec)?;

    let mut history = EvolutionHistory::default();
    state.record_current(&mut history, &stepper);
    while !state.done() {
        state.step_once(&stepper, &mut history)?;
    }
    let ledger = state.ledger(&stepper, history.warnings.clone());
    let outputs = run_audits(config, calibration.as_ref(), &ledger, &history, &u0)?;
    let report = assemble_report(
        config,
        &ledger,
        outputs,
        calibration.as_ref(),
        Some(resumed_from),
        started,
        t0.elapsed().as_secs_f64(),
    )?;
    Ok((report, history, ledger))
}

fn verify_checkpoint_matches(
    config: &RunConfig,
    state: &HighLowState,
    stepper: &StepperConfig,
) -> Result<()> {
    let p = &state.params;
    let same = p.s == config.s
        && p.s0 == config.s0
        && p.eps == config.eps
        && p.horizon == config.horizon
        && state.seed == config.seed
        && stepper.dt == config.dt
        && stepper.retain_every == config.retain_every
        && stepper.boundary_shell_fraction == config.boundary_shell_fraction
        && stepper.boundary_mass_tolerance == config.boundary_mass_tolerance;
    if !same {
        return Err(Error::Config(
            "checkpoint parameters do not match the supplied config".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    S0,
    S,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub points: Vec<f64>,
    pub fits: Vec<ExponentFit>,
    pub runs: Vec<RunReport>,
}

impl SweepReport {
    pub fn deterministic_json(&self) -> Result<serde_json::Value> {
        let mut doc = serde_json::to_value(self)?;
        if let Some(runs) = doc
            .as_object_mut()
            .and_then(|o| o.get_mut("runs"))
            .and_then(|r| r.as_array_mut())
        {
            for run in runs {
                run.as_object_mut().map(|o| o.remove("wall_clock"));
            }
        }
        Ok(doc)
    }
}

fn fit_or_note(name: &str, target: f64, points: Vec<(f64, f64)>) -> ExponentFit {
    if points.len() < 2 {
        return ExponentFit {
            name: name.into(),
            target,
            fit: None,
            note: Some("fit skipped (<2 points)".into()),
        };
    }
    if points.iter().any(|&(_, y)| !(y > 0.0)) {
        return ExponentFit {
            name: name.into(),
            target,
            fit: None,
            note: Some("fit skipped (nonpositive values)".into()),
        };
    }
    match crate::diagnostics::fit_power_law(&points) {
        Ok(fit) => ExponentFit {
            name: name.into(),
            target,
            fit: Some(fit),
            note: None,
        },
        Err(e) => ExponentFit {
            name: name.into(),
            target,
            fit: None,
            note: Some(format!("fit skipped ({e})")),
        },
    }
}

/// Max over intervals of the table surrogate for one field selector.
fn ledger_surrogate(ledger: &Ledger, field_idx: usize, sigma_idx: usize) -> f64 {
    ledger
        .intervals
        .iter()
        .filter_map(|r| r.tables.as_ref())
        .map(|t| t[field_idx].surrogate(sigma_idx))
        .fold(0.0, f64::max)
}

/// Sweep over `sweep_s0` (or `sweep_s`), running every point independently
/// (in parallel when a rayon pool is active) and fitting the splitting
/// power laws across s0 points. Results are merged in parameter order.
pub fn sweep(config: &RunConfig) -> Result<SweepReport> {
    config.validate()?;
    let (axis, points) = if !config.sweep_s0.is_empty() {
        (SweepAxis::S0, config.sweep_s0.clone())
    } else if !config.sweep_s.is_empty() {
        (SweepAxis::S, config.sweep_s.clone())
    } else {
        return Err(Error::Config(
            "sweep requires a nonempty sweep_s0 or sweep_s list".into(),
        ));
    };

    use rayon::prelude::*;
    let results: Vec<(RunReport, Ledger)> = points
        .par_iter()
        .map(|&value| {
            let mut point_config = config.clone();
            point_config.sweep_s0 = Vec::new();
            point_config.sweep_s = Vec::new();
            match axis {
                SweepAxis::S0 => point_config.s0 = value,
                SweepAxis::S => point_config.s = value,
            }
            run(&point_config).map(|(report, _history, ledger)| (report, ledger))
        })
        .collect::<Result<_>>()?;

    let mut fits = Vec::new();
    match axis {
        SweepAxis::S0 => {
            let s = config.s;
            let pairs = |f: &dyn Fn(&Ledger) -> f64| -> Vec<(f64, f64)> {
                points
                    .iter()
                    .zip(&results)
                    .map(|(&s0, (_, ledger))| (s0, f(ledger)))
                    .collect()
            };
            fits.push(fit_or_note(
                "E_phi0_vs_s0",
                -(1.0 - s),
                pairs(&|l: &Ledger| l.e_phi_initial),
            ));
            fits.push(fit_or_note(
                "max_dE_vs_s0",
                1.5 * s - 11.0 / 8.0,
                pairs(&|l: &Ledger| l.max_delta_e()),
            ));
            fits.push(fit_or_note(
                "psi_S0_vs_s0",
                s / 2.0,
                pairs(&|l: &Ledger| ledger_surrogate(l, 0, 0)),
            ));
            fits.push(fit_or_note(
                "v_S1_vs_s0",
                s - 7.0 / 8.0,
                pairs(&|l: &Ledger| ledger_surrogate(l, 2, 1)),
            ));
        }
        SweepAxis::S => {
            fits.push(ExponentFit {
                name: "s_sweep".into(),
                target: f64::NAN,
                fit: None,
                note: Some("fit skipped (sweep over s; see per-run bootstrap flags)".into()),
            });
        }
    }

    Ok(SweepReport {
        axis,
        points,
        fits,
        runs: results.into_iter().map(|(r, _)| r).collect(),
    })
}

// ---------------------------------------------------------------------------
// Checkpoints (versioned binary format)
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 8] = b"HNLSCKPT";
const CHECKPOINT_VERSION: u8 = 1;

struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    fn new() -> Self {
        ByteWriter { buf: Vec::new() }
    }
    fn u8(&mut self, x: u8) {
        self.buf.push(x);
    }
    fn u64(&mut self, x: u64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.buf.extend_from_slice(&x.to_le_bytes());
    }
    fn complex_vec(&mut self, v: &[Complex64]) {
        self.u64(v.len() as u64);
        for z in v {
            self.f64(z.re);
            self.f64(z.im);
        }
    }
    fn f64_slice(&mut self, v: &[f64]) {
        self.u64(v.len() as u64);
        for &x in v {
            self.f64(x);
        }
    }
    fn str(&mut self, s: &str) {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
    }
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        ByteReader { bytes, pos: 0 }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::CheckpointCorrupt("unexpected end of file".into()));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn complex_vec(&mut self, expect: usize) -> Result<Vec<Complex64>> {
        let n = self.u64()? as usize;
        if n != expect {
            return Err(Error::CheckpointCorrupt(format!(
                "field length {n} does not match grid ({expect})"
            )));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let re = self.f64()?;
            let im = self.f64()?;
            out.push(Complex64::new(re, im));
        }
        Ok(out)
    }
    fn f64_vec(&mut self, expect: usize) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n != expect {
            return Err(Error::CheckpointCorrupt(format!(
                "block length {n}, expected {expect}"
            )));
        }
        (0..n).map(|_| self.f64()).collect()
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u64()? as usize;
        let bytes = self.take(n)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::CheckpointCorrupt("invalid utf-8 string".into()))
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::CheckpointCorrupt(format!(
                "{} trailing bytes",
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Serialize the full run state (decomposition spectra, accumulators,
/// closed intervals) so that loading continues bit-identically.
pub fn checkpoint_save(state: &HighLowState, cfg: &StepperConfig, path: &Path) -> Result<()> {
    let mut w = ByteWriter::new();
    w.buf.extend_from_slice(CHECKPOINT_MAGIC);
    w.u8(CHECKPOINT_VERSION);

    let grid = state.engine.grid();
    w.f64(grid.r_max());
    w.u64(grid.subintervals() as u64);
    w.f64(cfg.dt);
    w.u64(cfg.retain_every as u64);
    w.f64(cfg.boundary_shell_fraction);
    w.f64(cfg.boundary_mass_tolerance);
    w.f64(state.params.s);
    w.f64(state.params.s0);
    w.f64(state.params.eps);
    w.f64(state.params.horizon);
    w.u64(state.seed);

    w.u64(state.engine.step);
    w.complex_vec(&state.engine.w_u);
    w.complex_vec(&state.engine.what_u);
    w.complex_vec(&state.engine.w_phi);
    w.complex_vec(&state.engine.what_phi);
    w.complex_vec(&state.engine.w_psi);
    w.complex_vec(&state.engine.what_psi);

    w.f64(state.accums.budget_total);
    w.f64(state.accums.budget_current);
    w.f64(state.accums.prev_integrand);
    w.f64(state.accums.max_shell_fraction);
    w.f64_slice(&state.accums.psi.save_state());
    w.f64_slice(&state.accums.phi.save_state());
    w.f64_slice(&state.accums.v.save_state());

    w.f64(state.delta_e_total);
    w.f64(state.e_phi_initial);
    w.f64(state.e_phi_start);
    w.u64(state.boundary_prev_step);

    w.u64(state.intervals.len() as u64);
    for rec in &state.intervals {
        w.u64(rec.j as u64);
        for x in [
            rec.b0,
            rec.b1,
            rec.budget,
            rec.delta_e,
            rec.term_i,
            rec.term_ii,
            rec.e_phi_end,
            rec.e_phi_start,
        ] {
            w.f64(x);
        }
        match &rec.tables {
            Some(tables) => {
                w.u8(1);
                for t in tables {
                    for row in &t.values {
                        for &x in row {
                            w.f64(x);
                        }
                    }
                }
            }
            None => w.u8(0),
        }
    }

    std::fs::write(path, &w.buf)?;
    Ok(())
}

/// Load a checkpoint; the version byte and every structural length are
/// validated before any state is built.
pub fn checkpoint_load(path: &Path) -> Result<(HighLowState, StepperConfig)> {
    let bytes = std::fs::read(path)?;
    decode_checkpoint(&bytes)
}

/// Decode a checkpoint image (separated out for fuzzing).
pub fn decode_checkpoint(bytes: &[u8]) -> Result<(HighLowState, StepperConfig)> {
    let mut r = ByteReader::new(bytes);
    let magic = r.take(8)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::CheckpointCorrupt("bad magic".into()));
    }
    let version = r.u8()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }

    let r_max = r.f64()?;
    let n = r.u64()? as usize;
    let grid = RadialGrid::new(r_max, n)
        .map_err(|e| Error::CheckpointCorrupt(format!("bad grid: {e}")))?;
    let cfg = StepperConfig {
        dt: r.f64()?,
        retain_every: r.u64()? as usize,
        boundary_shell_fraction: r.f64()?,
        boundary_mass_tolerance: r.f64()?,
    };
    cfg.validate()
        .map_err(|e| Error::CheckpointCorrupt(format!("bad stepper config: {e}")))?;
    let params = HighLowParams {
        s: r.f64()?,
        s0: r.f64()?,
        eps: r.f64()?,
        horizon: r.f64()?,
    };
    params
        .validate()
        .map_err(|e| Error::CheckpointCorrupt(format!("bad run params: {e}")))?;
    let seed = r.u64()?;

    let step = r.u64()?;
    let m = grid.node_count();
    let w_u = r.complex_vec(m)?;
    let what_u = r.complex_vec(m)?;
    let w_phi = r.complex_vec(m)?;
    let what_phi = r.complex_vec(m)?;
    let w_psi = r.complex_vec(m)?;
    let what_psi = r.complex_vec(m)?;
    let engine =
        CoEvolution::from_state(grid, w_u, what_u, w_phi, what_phi, w_psi, what_psi, step, &cfg)?;

    let mut accums = crate::propagators::Accumulators::new();
    accums.budget_total = r.f64()?;
    accums.budget_current = r.f64()?;
    accums.prev_integrand = r.f64()?;
    accums.max_shell_fraction = r.f64()?;
    let load_acc = |vals: Vec<f64>| {
        crate::propagators::StrichartzAccum::load_state(&vals)
            .ok_or_else(|| Error::CheckpointCorrupt("bad accumulator block".into()))
    };
    accums.psi = load_acc(r.f64_vec(30)?)?;
    accums.phi = load_acc(r.f64_vec(30)?)?;
    accums.v = load_acc(r.f64_vec(30)?)?;

    let delta_e_total = r.f64()?;
    let e_phi_initial = r.f64()?;
    let e_phi_start = r.f64()?;
    let boundary_prev_step = r.u64()?;

    let count = r.u64()? as usize;
    if count > bytes.len() {
        return Err(Error::CheckpointCorrupt("interval count too large".into()));
    }
    let mut intervals = Vec::with_capacity(count);
    for _ in 0..count {
        let j = r.u64()? as usize;
        let mut vals = [0.0f64; 8];
        for v in &mut vals {
            *v = r.f64()?;
        }
        let tables = match r.u8()? {
            0 => None,
            1 => {
                let mut tables = Vec::with_capacity(3);
                for _ in 0..3 {
                    let mut values = [[0.0f64; 5]; 2];
                    for row in &mut values {
                        for slot in row.iter_mut() {
                            *slot = r.f64()?;
                        }
                    }
                    tables.push(StrichartzTable { values });
                }
                Some([
                    tables[0].clone(),
                    tables[1].clone(),
                    tables[2].clone(),
                ])
            }
            other => {
                return Err(Error::CheckpointCorrupt(format!(
                    "bad table flag {other}"
                )))
            }
        };
        intervals.push(IntervalRecord {
            j,
            b0: vals[0],
            b1: vals[1],
            budget: vals[2],
            delta_e: vals[3],
            term_i: vals[4],
            term_ii: vals[5],
            e_phi_end: vals[6],
            e_phi_start: vals[7],
            tables,
        });
    }
    r.finish()?;

    let n_total = crate::propagators::steps_between(0.0, params.horizon, cfg.dt);
    Ok((
        HighLowState {
            engine,
            accums,
            params,
            seed,
            intervals,
            delta_e_total,
            e_phi_initial,
            e_phi_start,
            boundary_prev_step,
            n_total,
        },
        cfg,
    ))
}

// ---------------------------------------------------------------------------
// Calibration
// ---------------------------------------------------------------------------

/// Margin applied to every measured calibration maximum, so that re-runs
/// with fresh seeds stay under the stored constant.
const CALIBRATION_MARGIN: f64 = 1.25;

/// Measure the calibration constants on the supplied (reference)
/// configuration:
///
/// - `morawetz`: the space-time L⁴ ratio of the reference run and of a
///   forcing-free run (`ψ ≡ 0`, where the audit reduces to its conserved
///   term), maximum of the two, with margin;
/// - `smoothing`: max weighted-smoothing ratio over a battery of spectrum
///   fields plus synthesized rough data;
/// - `radial_sobolev_alpha_*`: per-α battery maxima;
/// - `budget_rho`: the reference run's cumulative-increment ratio;
/// - `ephi_scale`: the reference value of `E(φ(0))·s0^{1−s}`;
/// - `scattering_ratio_threshold`: the fixed tail-Cauchy acceptance ratio.
pub fn calibrate(config: &RunConfig) -> Result<Calibration> {
    config.validate()?;
    let grid = config.grid()?;
    let stepper = config.stepper()?;
    let mut constants = std::collections::BTreeMap::new();

    // reference run
    let u0 = gen_data(config.s, config.seed, config.amplitude, grid, config.delta_spec)?;
    let params = config.highlow_params();
    let (ledger, history) = crate::highlow::run_highlow(&u0, &params, &stepper, config.seed)?;
    let reference = morawetz_audit(&history, f64::INFINITY)?;
    let ref_ratio = reference.verdict.ratio;
    drop(history);

    // forcing-free run: u = φ smooth, ψ = v = 0 identically
    let smooth = calculus::project(&u0, crate::calculus::Projection::Low, 0.05)?;
    let zero_state = crate::highlow::Decomposition {
        u: smooth.clone(),
        psi: RadialField::zeros(grid),
        phi: smooth,
        v: RadialField::zeros(grid),
        t: 0.0,
    };
    let mut acc = crate::propagators::Accumulators::new();
    let horizon = config.horizon.min(5.0);
    let (_, zero_history) =
        crate::propagators::evolve_window(&zero_state, 0.0, horizon, &stepper, &mut acc)?;
    let zero_ratio = morawetz_audit(&zero_history, f64::INFINITY)?.verdict.ratio;
    drop(zero_history);
    constants.insert(
        "morawetz".to_string(),
        CALIBRATION_MARGIN * ref_ratio.max(zero_ratio),
    );

    // local smoothing battery: spectrum fields plus rough synthesized data
    let mut smoothing_max: f64 = 0.0;
    for i in 0..100u64 {
        let f = crate::diagnostics::battery_field(grid, config.seed, i);
        let v = smoothing_audit(&f, 1.0, config.delta_weight, 65, f64::INFINITY)?;
        smoothing_max = smoothing_max.max(v.ratio);
    }
    for s in [0.8, 0.95] {
        for seed in 1..=5u64 {
            let f = gen_data(s, seed, 1.0, grid, config.delta_spec)?;
            let v = smoothing_audit(&f, 1.0, config.delta_weight, 65, f64::INFINITY)?;
            smoothing_max = smoothing_max.max(v.ratio);
        }
    }
    constants.insert(
        "smoothing".to_string(),
        CALIBRATION_MARGIN * smoothing_max,
    );

    // radial Sobolev battery maxima per α
    let unlimited = |_: f64| Ok(f64::INFINITY);
    let verdicts = radial_sobolev_audit(grid, 100, &[0.3, 0.5, 0.75], config.seed, &unlimited)?;
    for v in verdicts {
        constants.insert(v.name.clone(), CALIBRATION_MARGIN * v.lhs);
    }

    // energy-increment scale of the reference ledger
    let rho = budget_check(&ledger, 0.0, f64::INFINITY)?.rho;
    constants.insert(
        "budget_rho".to_string(),
        CALIBRATION_MARGIN * rho.max(1e-12),
    );
    constants.insert(
        "ephi_scale".to_string(),
        ledger.e_phi_initial * config.s0.powf(1.0 - config.s),
    );

    constants.insert("scattering_ratio_threshold".to_string(), 0.5);

    Ok(Calibration {
        r_max: config.r_max,
        n: config.n,
        seed: config.seed,
        constants,
    })
}

// ---------------------------------------------------------------------------
// Output writing
// ---------------------------------------------------------------------------

/// Write `history.csv`, `ledger.json`, `report.json` into `dir`. Refuses to
/// overwrite existing outputs unless `force` is set.
pub fn write_run_outputs(
    dir: &Path,
    report: &RunReport,
    history: &EvolutionHistory,
    ledger: &Ledger,
    force: bool,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for name in ["history.csv", "ledger.json", "report.json"] {
        let path = dir.join(name);
        if path.exists() && !force {
            return Err(Error::Config(format!(
                "output {path:?} exists; pass --force to overwrite"
            )));
        }
    }
    std::fs::write(dir.join("history.csv"), history.to_csv())?;
    std::fs::write(
        dir.join("ledger.json"),
        serde_json::to_string_pretty(&ledger.export_json())?,
    )?;
    std::fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(report)?,
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> RunConfig {
        RunConfig {
            r_max: 10.0,
            n: 128,
            dt: 1e-2,
            retain_every: 5,
            s: 0.9,
            s0: 0.02,
            eps: 0.05,
            horizon: 0.5,
            seed: 3,
            amplitude: 1.0,
            audits: vec!["conservation".into(), "bernstein".into()],
            ..RunConfig::default()
        }
    }

    #[test]
    fn config_roundtrip_is_bit_exact() {
        let cfg = RunConfig {
            s0: 2f64.powi(-8) * 1.000000000000173,
            amplitude: 0.1 + 1e-17,
            ..RunConfig::default()
        };
        let json = cfg.to_json_string().unwrap();
        let back = RunConfig::from_json_bytes(json.as_bytes()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.s0.to_bits(), back.s0.to_bits());
    }

    #[test]
    fn config_rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            RunConfig::from_json_bytes(br#"{"unknown_key": 1}"#),
            Err(Error::Config(_))
        ));
        assert!(RunConfig::from_json_bytes(br#"{"s": 1.5}"#).is_err());
        assert!(RunConfig::from_json_bytes(br#"{"eps": 0.0}"#).is_err());
        assert!(RunConfig::from_json_bytes(br#"{"audits": ["nope"]}"#).is_err());
        assert!(RunConfig::from_json_bytes(br#"{"N": 1}"#).is_err());
        // empty object takes all defaults
        assert!(RunConfig::from_json_bytes(b"{}").is_ok());
    }

    #[test]
    fn gen_data_is_deterministic_and_normalized() {
        let grid = RadialGrid::new(20.0, 512).unwrap();
        let a = gen_data(0.8, 42, 1.0, grid, 0.01).unwrap();
        let b = gen_data(0.8, 42, 1.0, grid, 0.01).unwrap();
        assert_eq!(a, b);
        let norm = calculus::sobolev_norm(&a, 0.8);
        assert!((norm - 1.0).abs() <= 1e-12);

        // amplitude doubling is an exact pointwise factor of two
        let twice = gen_data(0.8, 42, 2.0, grid, 0.01).unwrap();
        for (x, y) in twice.w().iter().zip(a.w()) {
            assert_eq!(x.re.to_bits(), (2.0 * y.re).to_bits());
            assert_eq!(x.im.to_bits(), (2.0 * y.im).to_bits());
        }

        assert!(gen_data(1.0, 1, 1.0, grid, 0.01).is_err());
        assert!(gen_data(0.5, 1, 0.0, grid, 0.01).is_err());
    }

    #[test]
    fn refinement_signature_of_rough_data() {
        // fixed R, refine N: H^s stays at the normalized amplitude while the
        // H^1 norm grows (the data is in H^s but not H^1)
        let s = 0.5;
        let coarse = RadialGrid::new(20.0, 1024).unwrap();
        let fine = RadialGrid::new(20.0, 4096).unwrap();
        let fc = gen_data(s, 9, 1.0, coarse, 0.01).unwrap();
        let ff = gen_data(s, 9, 1.0, fine, 0.01).unwrap();
        let hs_c = calculus::sobolev_norm(&fc, s);
        let hs_f = calculus::sobolev_norm(&ff, s);
        assert!((hs_c - 1.0).abs() < 0.02 && (hs_f - 1.0).abs() < 0.02);
        let h1_c = calculus::sobolev_norm(&fc, 1.0);
        let h1_f = calculus::sobolev_norm(&ff, 1.0);
        assert!(
            h1_f >= 1.25 * h1_c,
            "H¹ grew only {}x under refinement",
            h1_f / h1_c
        );
    }

    #[test]
    fn run_produces_deterministic_report() {
        let cfg = small_config();
        let (ra, _, la) = run(&cfg).unwrap();
        let (rb, _, lb) = run(&cfg).unwrap();
        assert_eq!(la, lb);
        assert_eq!(
            serde_json::to_string(&ra.deterministic_json().unwrap()).unwrap(),
            serde_json::to_string(&rb.deterministic_json().unwrap()).unwrap()
        );
        assert!(ra.all_audits_pass, "{:#?}", ra.audits);
    }

    #[test]
    fn bootstrap_threshold_arithmetic_is_exact() {
        // flag(s) = TRUE ⟺ −(3/2)(1−s) > −s/2 + 3/8, boundary s = 15/16
        let cases = [(0.90, false), (15.0 / 16.0, false), (0.95, true)];
        for (s, expect) in cases {
            let b = bootstrap_report(s, 0.01, 1.5, 0.0);
            assert_eq!(b.flag, expect, "s = {s}");
        }
        // the boundary case is exact equality in f64
        let b = bootstrap_report(15.0 / 16.0, 0.01, 1.5, 0.0);
        assert_eq!(b.exponent_zeta_bound, b.exponent_m_threshold);
    }

    #[test]
    fn sweep_degenerate_point_reports_skip() {
        let mut cfg = small_config();
        cfg.horizon = 0.1;
        cfg.sweep_s0 = vec![0.02];
        let report = sweep(&cfg).unwrap();
        assert_eq!(report.runs.len(), 1);
        assert!(report
            .fits
            .iter()
            .all(|f| f.note.as_deref() == Some("fit skipped (<2 points)")));
    }

    #[test]
    fn checkpoint_roundtrip_and_resume_matches_straight_run() {
        let cfg = small_config();
        let grid = cfg.grid().unwrap();
        let u0 = gen_data(cfg.s, cfg.seed, cfg.amplitude, grid, cfg.delta_spec).unwrap();
        let stepper = cfg.stepper().unwrap();
        let params = cfg.highlow_params();

        // straight-through
        let mut straight = HighLowState::new(&u0, &params, &stepper, cfg.seed).unwrap();
        let mut hist = EvolutionHistory::default();
        while !straight.done() {
            straight.step_once(&stepper, &mut hist).unwrap();
        }

        // interrupted at an arbitrary step
        let mut first = HighLowState::new(&u0, &params, &stepper, cfg.seed).unwrap();
        let mut hist1 = EvolutionHistory::default();
        for _ in 0..17 {
            first.step_once(&stepper, &mut hist1).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.bin");
        checkpoint_save(&first, &stepper, &path).unwrap();

        let (mut resumed, cfg2) = checkpoint_load(&path).unwrap();
        assert_eq!(cfg2, stepper);
        let mut hist2 = EvolutionHistory::default();
        while !resumed.done() {
            resumed.step_once(&cfg2, &mut hist2).unwrap();
        }

        // bit-identical final state and ledger
        assert_eq!(resumed.engine.w_u, straight.engine.w_u);
        assert_eq!(resumed.engine.what_u, straight.engine.what_u);
        assert_eq!(
            resumed.ledger(&stepper, Vec::new()),
            straight.ledger(&stepper, Vec::new())
        );
    }

    #[test]
    fn checkpoint_rejects_tampering() {
        let cfg = small_config();
        let grid = cfg.grid().unwrap();
        let u0 = gen_data(cfg.s, cfg.seed, cfg.amplitude, grid, cfg.delta_spec).unwrap();
        let stepper = cfg.stepper().unwrap();
        let state = HighLowState::new(&u0, &cfg.highlow_params(), &stepper, cfg.seed).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("checkpoint.bin");
        checkpoint_save(&state, &stepper, &path).unwrap();

        let mut bytes = std::fs::read(&path).unwrap();
        // flipped version byte → version mismatch
        bytes[8] ^= 0xff;
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(Error::CheckpointVersion { .. })
        ));
        bytes[8] ^= 0xff;
        // truncation → corrupt
        assert!(matches!(
            decode_checkpoint(&bytes[..bytes.len() - 3]),
            Err(Error::CheckpointCorrupt(_))
        ));
        // trailing garbage → corrupt
        bytes.push(0);
        assert!(matches!(
            decode_checkpoint(&bytes),
            Err(Error::CheckpointCorrupt(_))
        ));
    }

    #[test]
    fn output_writer_respects_force() {
        let cfg = small_config();
        let (report, history, ledger) = run(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_run_outputs(dir.path(), &report, &history, &ledger, false).unwrap();
        assert!(dir.path().join("history.csv").exists());
        let err = write_run_outputs(dir.path(), &report, &history, &ledger, false);
        assert!(matches!(err, Err(Error::Config(_))));
        write_run_outputs(dir.path(), &report, &history, &ledger, true).unwrap();
    }
}
