//! Time evolution: exact linear Schrödinger flow, Strang split-step for the
//! cubic defocusing NLS, and the forced flow used to cross-validate the
//! correction field.
//!
//! In the conjugated representation the linear flow is the diagonal phase
//! `ŵ_k ← e^{−iλ_k t} ŵ_k`, exact for any `t`. The nonlinear substep is the
//! pointwise phase `w_j ← w_j·exp(−i·dt·|w_j|²/sinh²r_j)` (defocusing sign);
//! both substeps preserve the discrete mass up to rounding, so a Strang step
//! conserves mass to machine accuracy per step.
//!
//! The co-evolution engine advances `u` (full NLS), `ψ` (linear), `φ` (NLS)
//! with one shared step size, keeps the end-of-step spectra cached, defines
//! `v := u − ψ − φ` at every sample, and feeds per-step accumulators
//! (scattering budget, Strichartz sums, boundary-shell mass).

use num_complex::Complex64;

use crate::calculus;
use crate::error::{Error, Result};
use crate::grid::{self, RadialField, RadialGrid, SpectralField};
use crate::highlow::Decomposition;

/// Fixed-step integrator configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    /// Time step.
    pub dt: f64,
    /// Outer shell monitored for boundary reflections, as a fraction of `R`.
    pub boundary_shell_fraction: f64,
    /// Run is flagged when shell mass exceeds this fraction of total mass.
    pub boundary_mass_tolerance: f64,
    /// Full-field snapshots are retained every this many steps.
    pub retain_every: usize,
}

impl StepperConfig {
    pub fn new(dt: f64) -> Result<Self> {
        let cfg = StepperConfig {
            dt,
            boundary_shell_fraction: 0.1,
            boundary_mass_tolerance: 1e-6,
            retain_every: 10,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if !(self.boundary_shell_fraction > 0.0 && self.boundary_shell_fraction < 1.0) {
            return Err(Error::InvalidParameter(
                "boundary shell fraction must lie in (0,1)".into(),
            ));
        }
        if !(self.boundary_mass_tolerance > 0.0) {
            return Err(Error::InvalidParameter(
                "boundary mass tolerance must be positive".into(),
            ));
        }
        if self.retain_every == 0 {
            return Err(Error::InvalidParameter(
                "retention cadence must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Public flow operations
// ---------------------------------------------------------------------------

/// Exact linear flow `e^{itΔ}`: the spectral phase `e^{−iλ_k t}`.
pub fn linear_flow(f: &RadialField, t: f64) -> RadialField {
    if t == 0.0 {
        return f.clone();
    }
    let fhat = grid::transform(f);
    let flowed = fhat
        .apply_complex_multiplier(|l| Complex64::cis(-l * t))
        .expect("phases are finite");
    grid::inverse_transform(&flowed)
}

/// Same flow applied to a spectral field (used by pull-back diagnostics).
pub fn linear_flow_spectral(fhat: &SpectralField, t: f64) -> SpectralField {
    fhat.apply_complex_multiplier(|l| Complex64::cis(-l * t))
        .expect("phases are finite")
}

/// One Strang split step for the cubic defocusing NLS: half linear flow,
/// full nonlinear phase, half linear flow. Accepts negative `dt` (the step
/// is time-reversible).
pub fn strang_step(f: &RadialField, dt: f64) -> RadialField {
    let stepper = Stepper::new(*f.grid(), dt);
    let mut w = f.w().to_vec();
    let mut what = grid::transform(f).coeffs().to_vec();
    stepper.strang_advance(&mut w, &mut what);
    RadialField::from_w(*f.grid(), w).expect("step preserves finiteness")
}

/// One Strang step for the forced linear equation of the correction field:
/// half linear flow, the kick `w ← w − i·dt·F` with `F` the conjugated
/// representation of `|u|²u − |φ|²φ` evaluated from the supplied snapshots,
/// then half linear flow. Second-order when `u`, `φ` are supplied at the
/// half step.
pub fn forced_strang_step(
    v: &RadialField,
    u: &RadialField,
    phi: &RadialField,
    dt: f64,
) -> Result<RadialField> {
    if u.grid() != v.grid() || phi.grid() != v.grid() {
        return Err(Error::InvalidArgument(
            "forced step requires all fields on the same grid".into(),
        ));
    }
    let g = *v.grid();
    let stepper = Stepper::new(g, dt);
    let mut what = grid::transform(v).coeffs().to_vec();
    stepper.half_linear(&mut what);
    let mut w = inverse_kernel_vec(&what, &g);
    for (j, wj) in w.iter_mut().enumerate() {
        let inv_sh2 = stepper.inv_sinh2[j];
        let fu = u.w()[j] * (u.w()[j].norm_sqr() * inv_sh2);
        let fphi = phi.w()[j] * (phi.w()[j].norm_sqr() * inv_sh2);
        *wj -= Complex64::new(0.0, dt) * (fu - fphi);
    }
    let mut what = forward_kernel_vec(&w, &g);
    stepper.half_linear(&mut what);
    let w = inverse_kernel_vec(&what, &g);
    RadialField::from_w(g, w)
}

fn forward_kernel_vec(w: &[Complex64], g: &RadialGrid) -> Vec<Complex64> {
    grid::transform(&RadialField::from_w(*g, w.to_vec()).expect("sized"))
        .coeffs()
        .to_vec()
}

fn inverse_kernel_vec(coeffs: &[Complex64], g: &RadialGrid) -> Vec<Complex64> {
    grid::inverse_transform(&SpectralField::from_coeffs(*g, coeffs.to_vec()).expect("sized"))
        .w()
        .to_vec()
}

// ---------------------------------------------------------------------------
// Stepper: precomputed tables for one (grid, dt)
// ---------------------------------------------------------------------------

pub(crate) struct Stepper {
    pub grid: RadialGrid,
    pub dt: f64,
    half_phase: Vec<Complex64>,
    full_phase: Vec<Complex64>,
    pub sinh: Vec<f64>,
    pub inv_sinh: Vec<f64>,
    pub inv_sinh2: Vec<f64>,
    pub inv_sinh4: Vec<f64>,
    pub lambdas: Vec<f64>,
    pub sqrt_lambdas: Vec<f64>,
}

impl Stepper {
    pub fn new(grid: RadialGrid, dt: f64) -> Self {
        let m = grid.node_count();
        let lambdas: Vec<f64> = (0..m).map(|k| grid.eigenvalue(k)).collect();
        let sinh: Vec<f64> = (0..m).map(|j| grid.node(j).sinh()).collect();
        Stepper {
            half_phase: lambdas
                .iter()
                .map(|&l| Complex64::cis(-l * dt * 0.5))
                .collect(),
            full_phase: lambdas.iter().map(|&l| Complex64::cis(-l * dt)).collect(),
            inv_sinh: sinh.iter().map(|s| 1.0 / s).collect(),
            inv_sinh2: sinh.iter().map(|s| 1.0 / (s * s)).collect(),
            inv_sinh4: sinh.iter().map(|s| 1.0 / (s * s * s * s)).collect(),
            sqrt_lambdas: lambdas.iter().map(|l| l.sqrt()).collect(),
            grid,
            dt,
            sinh,
            lambdas,
        }
    }

    fn half_linear(&self, coeffs: &mut [Complex64]) {
        for (c, p) in coeffs.iter_mut().zip(&self.half_phase) {
            *c *= p;
        }
    }

    fn full_linear(&self, coeffs: &mut [Complex64]) {
        for (c, p) in coeffs.iter_mut().zip(&self.full_phase) {
            *c *= p;
        }
    }

    fn kick(&self, w: &mut [Complex64]) {
        for (wj, inv_sh2) in w.iter_mut().zip(&self.inv_sinh2) {
            let theta = -self.dt * wj.norm_sqr() * inv_sh2;
            *wj *= Complex64::cis(theta);
        }
    }

    /// One Strang step; `w` and `what` describe the same field on entry and
    /// exit (`what` drives the chain, `w` is its inverse transform).
    pub fn strang_advance(&self, w: &mut Vec<Complex64>, what: &mut Vec<Complex64>) {
        self.half_linear(what);
        *w = inverse_kernel_vec(what, &self.grid);
        self.kick(w);
        *what = forward_kernel_vec(w, &self.grid);
        self.half_linear(what);
        *w = inverse_kernel_vec(what, &self.grid);
    }
}

// ---------------------------------------------------------------------------
// Strichartz accumulation
// ---------------------------------------------------------------------------

/// Space-time exponent pairs carried by every per-interval table:
/// admissible `(∞,2), (2,6), (4,3)` plus reporting pairs `(8,4), (4,4)`.
pub const STRICHARTZ_PAIRS: [(f64, f64); 5] = [
    (f64::INFINITY, 2.0),
    (2.0, 6.0),
    (4.0, 3.0),
    (8.0, 4.0),
    (4.0, 4.0),
];

/// Index of each pair's `q` in the packed `[L², L⁶, L³, L⁴]` norm vector.
const PAIR_QIDX: [usize; 5] = [0, 1, 2, 3, 3];

/// Number of leading pairs that are admissible (`2/p + 3/q = 3/2`).
pub const ADMISSIBLE_PAIRS: usize = 3;

/// Finished mixed-norm table: `values[σ][pair]` is `‖|∇|^σ f‖_{L^p_t L^q_x}`
/// over one interval, for σ ∈ {0, 1}.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StrichartzTable {
    pub values: [[f64; 5]; 2],
}

impl StrichartzTable {
    /// Finite surrogate of the Strichartz norm: max over admissible pairs.
    pub fn surrogate(&self, sigma_idx: usize) -> f64 {
        self.values[sigma_idx][..ADMISSIBLE_PAIRS]
            .iter()
            .fold(0.0, |a, &b| a.max(b))
    }
}

/// Per-field running sums for one interval.
#[derive(Debug, Clone, Default)]
pub(crate) struct StrichartzAccum {
    sums: [[f64; 5]; 2],
    sup: [[f64; 5]; 2],
    prev_pow: [[f64; 5]; 2],
}

impl StrichartzAccum {
    fn reset_and_prime(&mut self, lq: &[[f64; 4]; 2]) {
        self.sums = [[0.0; 5]; 2];
        for sigma in 0..2 {
            for i in 0..STRICHARTZ_PAIRS.len() {
                self.sup[sigma][i] = lq[sigma][PAIR_QIDX[i]];
            }
        }
        self.prime(lq);
    }

    fn prime(&mut self, lq: &[[f64; 4]; 2]) {
        for sigma in 0..2 {
            for (i, &(p, _)) in STRICHARTZ_PAIRS.iter().enumerate() {
                if p.is_finite() {
                    self.prev_pow[sigma][i] = lq[sigma][PAIR_QIDX[i]].powf(p);
                }
            }
        }
    }

    fn step(&mut self, lq: &[[f64; 4]; 2], dt: f64) {
        for sigma in 0..2 {
            for (i, &(p, _)) in STRICHARTZ_PAIRS.iter().enumerate() {
                let g = lq[sigma][PAIR_QIDX[i]];
                if p.is_finite() {
                    let gp = g.powf(p);
                    self.sums[sigma][i] += 0.5 * dt * (self.prev_pow[sigma][i] + gp);
                    self.prev_pow[sigma][i] = gp;
                }
                if g > self.sup[sigma][i] {
                    self.sup[sigma][i] = g;
                }
            }
        }
    }

    fn table(&self) -> StrichartzTable {
        let mut values = [[0.0; 5]; 2];
        for sigma in 0..2 {
            for (i, &(p, _)) in STRICHARTZ_PAIRS.iter().enumerate() {
                values[sigma][i] = if p.is_finite() {
                    self.sums[sigma][i].powf(1.0 / p)
                } else {
                    self.sup[sigma][i]
                };
            }
        }
        StrichartzTable { values }
    }

    pub(crate) fn save_state(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(30);
        for block in [&self.sums, &self.sup, &self.prev_pow] {
            for row in block.iter() {
                out.extend_from_slice(row);
            }
        }
        out
    }

    pub(crate) fn load_state(vals: &[f64]) -> Option<Self> {
        if vals.len() != 30 {
            return None;
        }
        let mut acc = StrichartzAccum::default();
        let mut it = vals.iter().copied();
        for block in [&mut acc.sums, &mut acc.sup, &mut acc.prev_pow] {
            for row in block.iter_mut() {
                for slot in row.iter_mut() {
                    *slot = it.next()?;
                }
            }
        }
        Some(acc)
    }
}

/// All per-step accumulators updated by the evolution loop: the scattering
/// budget `∫‖u‖⁸_{L⁴ₓ} dt` (total and since the last interval boundary),
/// per-field Strichartz sums for `ψ, φ, v`, and the boundary-shell
/// watermark.
#[derive(Debug, Clone, Default)]
pub struct Accumulators {
    pub budget_total: f64,
    pub budget_current: f64,
    pub(crate) prev_integrand: f64,
    pub(crate) psi: StrichartzAccum,
    pub(crate) phi: StrichartzAccum,
    pub(crate) v: StrichartzAccum,
    pub max_shell_fraction: f64,
}

impl Accumulators {
    pub fn new() -> Self {
        Accumulators::default()
    }

    pub(crate) fn prime(&mut self, norms: &StepNorms) {
        self.prev_integrand = norms.budget_integrand;
        self.psi.reset_and_prime(&norms.lq_psi);
        self.phi.reset_and_prime(&norms.lq_phi);
        self.v.reset_and_prime(&norms.lq_v);
        self.note_shell(norms.shell_fraction);
    }

    pub(crate) fn accumulate(&mut self, norms: &StepNorms, dt: f64) {
        let inc = 0.5 * dt * (self.prev_integrand + norms.budget_integrand);
        self.budget_total += inc;
        self.budget_current += inc;
        self.prev_integrand = norms.budget_integrand;
        self.psi.step(&norms.lq_psi, dt);
        self.phi.step(&norms.lq_phi, dt);
        self.v.step(&norms.lq_v, dt);
        self.note_shell(norms.shell_fraction);
    }

    fn note_shell(&mut self, fraction: f64) {
        if fraction > self.max_shell_fraction {
            self.max_shell_fraction = fraction;
        }
    }

    /// Close the current interval: hand back the spent budget and the three
    /// field tables, then restart the interval sums primed with the supplied
    /// post-absorption measurement.
    pub(crate) fn close_interval(&mut self, post: &StepNorms) -> (f64, [StrichartzTable; 3]) {
        let spent = self.budget_current;
        let tables = [self.psi.table(), self.phi.table(), self.v.table()];
        self.budget_current = 0.0;
        self.prev_integrand = post.budget_integrand;
        self.psi.reset_and_prime(&post.lq_psi);
        self.phi.reset_and_prime(&post.lq_phi);
        self.v.reset_and_prime(&post.lq_v);
        (spent, tables)
    }
}

// ---------------------------------------------------------------------------
// Evolution history
// ---------------------------------------------------------------------------

/// Norm record kept at every step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSample {
    pub t: f64,
    pub mass_u: f64,
    pub energy_u: f64,
    pub energy_phi: f64,
    pub l4x_u: f64,
    pub l4x_zeta: f64,
    pub shell_mass: f64,
}

/// Full-field snapshot kept every `retain_every` steps.
#[derive(Debug, Clone)]
pub struct FieldSample {
    pub step: u64,
    pub t: f64,
    pub u: RadialField,
    pub psi: RadialField,
    pub phi: RadialField,
}

impl FieldSample {
    /// `ζ = φ + v = u − ψ`.
    pub fn zeta(&self) -> RadialField {
        self.u.sub(&self.psi)
    }

    /// `v = u − ψ − φ`.
    pub fn v(&self) -> RadialField {
        self.u.sub(&self.psi).sub(&self.phi)
    }
}

/// Per-run record of norms (every step) and retained fields (every
/// `retain_every` steps), with any boundary-shell warnings.
#[derive(Debug, Clone, Default)]
pub struct EvolutionHistory {
    pub samples: Vec<NormSample>,
    pub fields: Vec<FieldSample>,
    pub warnings: Vec<String>,
}

impl EvolutionHistory {
    /// CSV export, one row per sample step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mass_u,energy_u,energy_phi,L4x_u,L4x_zeta,shell_mass\n");
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                s.t, s.mass_u, s.energy_u, s.energy_phi, s.l4x_u, s.l4x_zeta, s.shell_mass
            ));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Co-evolution engine
// ---------------------------------------------------------------------------

/// Per-step measurement bundle consumed by accumulators and the history.
#[derive(Debug, Clone)]
pub(crate) struct StepNorms {
    pub mass_u: f64,
    pub energy_u: f64,
    pub energy_phi: f64,
    pub l4x_u: f64,
    pub l4x_zeta: f64,
    pub shell_fraction: f64,
    /// `‖u‖⁸_{L⁴ₓ}`, the budget integrand.
    pub budget_integrand: f64,
    /// `[σ∈{0,1}][L², L⁶, L³, L⁴]` for each decomposition field.
    pub lq_psi: [[f64; 4]; 2],
    pub lq_phi: [[f64; 4]; 2],
    pub lq_v: [[f64; 4]; 2],
}

/// The evolving state: `u`, `φ` as synced (physical, spectral) pairs, `ψ`
/// spectral-authoritative, plus the integer step counter that pins every
/// time stamp to `t = step·dt` bit-reproducibly.
pub(crate) struct CoEvolution {
    pub stepper: Stepper,
    pub w_u: Vec<Complex64>,
    pub what_u: Vec<Complex64>,
    pub w_phi: Vec<Complex64>,
    pub what_phi: Vec<Complex64>,
    pub what_psi: Vec<Complex64>,
    pub w_psi: Vec<Complex64>,
    pub step: u64,
    shell_from: usize,
}

impl CoEvolution {
    pub fn new(state: &Decomposition, cfg: &StepperConfig) -> Result<Self> {
        cfg.validate()?;
        let g = *state.u.grid();
        if state.psi.grid() != &g || state.phi.grid() != &g {
            return Err(Error::InvalidArgument(
                "decomposition fields live on different grids".into(),
            ));
        }
        let stepper = Stepper::new(g, cfg.dt);
        let shell_from = shell_start_index(&g, cfg.boundary_shell_fraction);
        Ok(CoEvolution {
            w_u: state.u.w().to_vec(),
            what_u: grid::transform(&state.u).coeffs().to_vec(),
            w_phi: state.phi.w().to_vec(),
            what_phi: grid::transform(&state.phi).coeffs().to_vec(),
            what_psi: grid::transform(&state.psi).coeffs().to_vec(),
            w_psi: state.psi.w().to_vec(),
            step: 0,
            stepper,
            shell_from,
        })
    }

    /// Rebuild an engine from a checkpoint. Both representations of every
    /// field are restored verbatim (after a boundary absorption the physical
    /// `φ` is authoritative and is not the exact inverse transform of its
    /// spectrum, so recomputing either side would break bit-identity).
    #[allow(clippy::too_many_arguments)]
    pub fn from_state(
        grid: RadialGrid,
        w_u: Vec<Complex64>,
        what_u: Vec<Complex64>,
        w_phi: Vec<Complex64>,
        what_phi: Vec<Complex64>,
        w_psi: Vec<Complex64>,
        what_psi: Vec<Complex64>,
        step: u64,
        cfg: &StepperConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let m = grid.node_count();
        for v in [&w_u, &what_u, &w_phi, &what_phi, &w_psi, &what_psi] {
            if v.len() != m {
                return Err(Error::InvalidArgument(
                    "state vectors do not match the grid".into(),
                ));
            }
        }
        let stepper = Stepper::new(grid, cfg.dt);
        let shell_from = shell_start_index(&grid, cfg.boundary_shell_fraction);
        Ok(CoEvolution {
            w_u,
            what_u,
            w_phi,
            what_phi,
            w_psi,
            what_psi,
            step,
            stepper,
            shell_from,
        })
    }

    pub fn grid(&self) -> RadialGrid {
        self.stepper.grid
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.stepper.dt
    }

    /// Advance every field by one step.
    pub fn advance(&mut self) {
        let CoEvolution {
            stepper,
            w_u,
            what_u,
            w_phi,
            what_phi,
            what_psi,
            w_psi,
            ..
        } = self;
        stepper.strang_advance(w_u, what_u);
        stepper.strang_advance(w_phi, what_phi);
        stepper.full_linear(what_psi);
        *w_psi = inverse_kernel_vec(what_psi, &stepper.grid);
        self.step += 1;
    }

    /// Absorb the correction: `φ ← φ + v = u − ψ` (computed directly so the
    /// new correction is exactly zero); `u`, `ψ` untouched.
    pub fn absorb(&mut self) {
        for j in 0..self.w_phi.len() {
            self.w_phi[j] = self.w_u[j] - self.w_psi[j];
        }
        self.what_phi = forward_kernel_vec(&self.w_phi, &self.stepper.grid);
    }

    /// Correction values `w_v = w_u − w_ψ − w_φ`.
    pub fn w_v(&self) -> Vec<Complex64> {
        (0..self.w_u.len())
            .map(|j| self.w_u[j] - self.w_psi[j] - self.w_phi[j])
            .collect()
    }

    pub fn field_u(&self) -> RadialField {
        RadialField::from_w(self.stepper.grid, self.w_u.clone()).expect("finite")
    }

    pub fn field_psi(&self) -> RadialField {
        RadialField::from_w(self.stepper.grid, self.w_psi.clone()).expect("finite")
    }

    pub fn field_phi(&self) -> RadialField {
        RadialField::from_w(self.stepper.grid, self.w_phi.clone()).expect("finite")
    }

    pub fn decomposition(&self) -> Decomposition {
        let u = self.field_u();
        let psi = self.field_psi();
        let phi = self.field_phi();
        let v = RadialField::from_w(self.stepper.grid, self.w_v()).expect("finite");
        Decomposition {
            u,
            psi,
            phi,
            v,
            t: self.time(),
        }
    }

    /// Measure everything the accumulators and history need at the current
    /// step boundary.
    pub fn measure(&self) -> StepNorms {
        let st = &self.stepper;
        let g = &st.grid;
        let h = g.spacing();
        let n = g.subintervals();

        let mass_u = calculus::l2_norm_w(&self.w_u, h).powi(2);
        let l4u_pow4 = calculus::l4_norm_pow4_w(&self.w_u, &st.sinh, h);
        let l4x_u = l4u_pow4.powf(0.25);
        let budget_integrand = l4u_pow4 * l4u_pow4;

        let energy_u =
            0.5 * calculus::h1_sq_coeffs(&self.what_u, &st.lambdas, h, n) + 0.25 * l4u_pow4;
        let l4phi_pow4 = calculus::l4_norm_pow4_w(&self.w_phi, &st.sinh, h);
        let energy_phi =
            0.5 * calculus::h1_sq_coeffs(&self.what_phi, &st.lambdas, h, n) + 0.25 * l4phi_pow4;

        let w_zeta: Vec<Complex64> = (0..self.w_u.len())
            .map(|j| self.w_u[j] - self.w_psi[j])
            .collect();
        let l4x_zeta = calculus::l4_norm_pow4_w(&w_zeta, &st.sinh, h).powf(0.25);

        let shell_fraction = shell_mass_fraction(&self.w_u, self.shell_from);

        let w_v = self.w_v();
        let what_v: Vec<Complex64> = (0..self.what_u.len())
            .map(|k| self.what_u[k] - self.what_psi[k] - self.what_phi[k])
            .collect();

        let lq_psi = lq_pack(st, &self.w_psi, &self.what_psi);
        let lq_phi = lq_pack(st, &self.w_phi, &self.what_phi);
        let lq_v = lq_pack(st, &w_v, &what_v);

        StepNorms {
            mass_u,
            energy_u,
            energy_phi,
            l4x_u,
            l4x_zeta,
            shell_fraction,
            budget_integrand,
            lq_psi,
            lq_phi,
            lq_v,
        }
    }
}

/// `[σ=0, σ=1] × [L², L⁶, L³, L⁴]` norms of one field, the σ=1 row from the
/// physical realization of `|∇|¹f`.
fn lq_pack(st: &Stepper, w: &[Complex64], what: &[Complex64]) -> [[f64; 4]; 2] {
    let g = &st.grid;
    let h = g.spacing();
    let row0 = lq_row(w, st, h);
    let grad_hat: Vec<Complex64> = what
        .iter()
        .zip(&st.sqrt_lambdas)
        .map(|(c, &sl)| c * sl)
        .collect();
    let w_grad = inverse_kernel_vec(&grad_hat, g);
    let row1 = lq_row(&w_grad, st, h);
    [row0, row1]
}

/// One pass over the nodes for the packed `[L², L⁶, L³, L⁴]` norms.
fn lq_row(w: &[Complex64], st: &Stepper, h: f64) -> [f64; 4] {
    let four_pi = 4.0 * std::f64::consts::PI;
    let (mut s2, mut s6, mut s3, mut s4) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (j, z) in w.iter().enumerate() {
        let nsq = z.norm_sqr();
        s2 += nsq;
        s4 += nsq * nsq * st.inv_sinh2[j];
        s6 += nsq * nsq * nsq * st.inv_sinh4[j];
        s3 += nsq * nsq.sqrt() * st.inv_sinh[j];
    }
    [
        (four_pi * h * s2).sqrt(),
        (four_pi * h * s6).powf(1.0 / 6.0),
        (four_pi * h * s3).powf(1.0 / 3.0),
        (four_pi * h * s4).powf(0.25),
    ]
}

fn shell_start_index(g: &RadialGrid, fraction: f64) -> usize {
    let cut = (1.0 - fraction) * g.r_max();
    let h = g.spacing();
    // first storage index j with node (j+1)h ≥ cut
    let j = (cut / h).ceil() as usize;
    j.saturating_sub(1).min(g.node_count())
}

fn shell_mass_fraction(w: &[Complex64], from: usize) -> f64 {
    let total: f64 = w.iter().map(|z| z.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let shell: f64 = w[from.min(w.len())..].iter().map(|z| z.norm_sqr()).sum();
    shell / total
}

/// Number of whole steps spanning `[t0, t1]`, with a relative guard so that
/// horizons within rounding of a multiple of `dt` do not gain a step.
pub(crate) fn steps_between(t0: f64, t1: f64, dt: f64) -> u64 {
    let span = t1 - t0;
    if span <= 0.0 {
        return 0;
    }
    let raw = span / dt;
    let rounded = raw.round();
    if (rounded * dt - span).abs() <= span.abs() * 1e-12 + dt * 1e-9 {
        rounded as u64
    } else {
        raw.ceil() as u64
    }
}

/// Advance a decomposition from `t0` to (at least) `t1` with fixed steps,
/// updating the accumulators once per step and recording norms every step
/// and fields every `retain_every` steps. `t1 = t0` is the identity.
/// The correction is maintained as the residual `v := u − ψ − φ` at every
/// sample; any `v` supplied in the input state is replaced by the residual.
pub fn evolve_window(
    state: &Decomposition,
    t0: f64,
    t1: f64,
    cfg: &StepperConfig,
    accums: &mut Accumulators,
) -> Result<(Decomposition, EvolutionHistory)> {
    if t0 != state.t {
        return Err(Error::InvalidArgument(format!(
            "window start {t0} does not match state time {}",
            state.t
        )));
    }
    if t1 < t0 {
        return Err(Error::InvalidArgument(format!(
            "window end {t1} precedes start {t0}"
        )));
    }
    let mut history = EvolutionHistory::default();
    let n_steps = steps_between(t0, t1, cfg.dt);
    if n_steps == 0 {
        return Ok((state.clone(), history));
    }

    let mut engine = CoEvolution::new(state, cfg)?;
    let norms = engine.measure();
    accums.prime(&norms);
    record_step(&mut history, &engine, &norms, t0, cfg, true);

    for i in 1..=n_steps {
        engine.advance();
        let t = t0 + i as f64 * cfg.dt;
        let norms = engine.measure();
        if !norms.mass_u.is_finite() || !norms.energy_u.is_finite() {
            return Err(Error::NumericFatal {
                t,
                msg: "field values became non-finite".into(),
            });
        }
        accums.accumulate(&norms, cfg.dt);
        let retain = engine.step % cfg.retain_every as u64 == 0 || i == n_steps;
        record_step(&mut history, &engine, &norms, t, cfg, retain);
    }

    let mut end = engine.decomposition();
    end.t = t0 + n_steps as f64 * cfg.dt;
    Ok((end, history))
}

pub(crate) fn record_step(
    history: &mut EvolutionHistory,
    engine: &CoEvolution,
    norms: &StepNorms,
    t: f64,
    cfg: &StepperConfig,
    retain_fields: bool,
) {
    history.samples.push(NormSample {
        t,
        mass_u: norms.mass_u,
        energy_u: norms.energy_u,
        energy_phi: norms.energy_phi,
        l4x_u: norms.l4x_u,
        l4x_zeta: norms.l4x_zeta,
        shell_mass: norms.shell_fraction,
    });
    if norms.shell_fraction > cfg.boundary_mass_tolerance && history.warnings.is_empty() {
        history.warnings.push(format!(
            "boundary shell mass fraction {:.3e} exceeded tolerance {:.3e} at t={t}",
            norms.shell_fraction, cfg.boundary_mass_tolerance
        ));
    }
    if retain_fields {
        history.fields.push(FieldSample {
            step: engine.step,
            t,
            u: engine.field_u(),
            psi: engine.field_psi(),
            phi: engine.field_phi(),
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::lebesgue_norm;
    use crate::calculus::sobolev_norm;
    use crate::rng::Lcg64;
    use std::f64::consts::PI;

    fn random_field(grid: RadialGrid, seed: u64) -> RadialField {
        let mut rng = Lcg64::new(seed);
        let w = (0..grid.node_count())
            .map(|_| Complex64::new(rng.next_f64() - 0.5, rng.next_f64() - 0.5))
            .collect();
        RadialField::from_w(grid, w).unwrap()
    }

    /// Smooth moderate-amplitude data: a few low sine modes.
    fn smooth_field(grid: RadialGrid, amplitude: f64) -> RadialField {
        let n = grid.subintervals();
        let w = (1..n)
            .map(|j| {
                let x = PI * j as f64 / n as f64;
                Complex64::new(
                    amplitude * (x.sin() + 0.5 * (2.0 * x).sin()),
                    amplitude * 0.3 * (3.0 * x).sin(),
                )
            })
            .collect();
        RadialField::from_w(grid, w).unwrap()
    }

    fn pure_mode(grid: RadialGrid, k: usize, amplitude: f64) -> RadialField {
        let n = grid.subintervals();
        let w = (1..n)
            .map(|j| Complex64::new(amplitude * (PI * (j * k) as f64 / n as f64).sin(), 0.0))
            .collect();
        RadialField::from_w(grid, w).unwrap()
    }

    #[test]
    fn linear_flow_at_zero_time_is_identity() {
        let g = RadialGrid::new(7.0, 64).unwrap();
        let f = random_field(g, 1);
        assert_eq!(linear_flow(&f, 0.0), f);
    }

    #[test]
    fn linear_flow_phase_on_pure_mode() {
        // mode k at R = π after t = π/(1+k²) is multiplied by e^{−iπ} = −1
        let g = RadialGrid::new(PI, 64).unwrap();
        for k in [1usize, 3] {
            let f = pure_mode(g, k, 0.8);
            let t = PI / (1.0 + (k * k) as f64);
            let flowed = linear_flow(&f, t);
            for (a, b) in flowed.w().iter().zip(f.w()) {
                assert!((a + b).norm() < 1e-12, "mode {k}");
            }
        }
    }

    #[test]
    fn linear_flow_is_an_isometry_of_sobolev_norms() {
        let g = RadialGrid::new(9.0, 256).unwrap();
        let f = random_field(g, 5);
        let flowed = linear_flow(&f, 7.3);
        for sigma in [0.0, 0.5, 1.0] {
            let a = sobolev_norm(&f, sigma);
            let b = sobolev_norm(&flowed, sigma);
            assert!((a - b).abs() <= 1e-11 * a, "sigma {sigma}: {a} vs {b}");
        }
    }

    #[test]
    fn linear_flow_group_property() {
        let g = RadialGrid::new(5.0, 128).unwrap();
        let f = random_field(g, 9);
        let (t1, t2) = (0.37, 1.91);
        let composed = linear_flow(&linear_flow(&f, t2), t1);
        let direct = linear_flow(&f, t1 + t2);
        let sup: f64 = direct.w().iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (a, b) in composed.w().iter().zip(direct.w()) {
            assert!((a - b).norm() <= 1e-12 * sup.max(1.0));
        }
    }

    #[test]
    fn strang_step_fixes_zero_field() {
        let g = RadialGrid::new(4.0, 32).unwrap();
        let z = RadialField::zeros(g);
        let stepped = strang_step(&z, 0.01);
        assert!(stepped.w().iter().all(|w| w.norm() == 0.0));
    }

    #[test]
    fn strang_step_conserves_mass_over_long_runs() {
        let g = RadialGrid::new(10.0, 256).unwrap();
        let mut f = smooth_field(g, 1.0);
        let m0 = calculus::mass(&f);
        for _ in 0..1000 {
            f = strang_step(&f, 1e-3);
        }
        let m1 = calculus::mass(&f);
        assert!((m1 - m0).abs() <= 1e-10 * m0, "drift {}", (m1 - m0) / m0);
    }

    #[test]
    fn strang_step_is_time_reversible() {
        let g = RadialGrid::new(10.0, 128).unwrap();
        let f = smooth_field(g, 0.7);
        let back = strang_step(&strang_step(&f, 2e-2), -2e-2);
        let sup: f64 = f.w().iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (a, b) in back.w().iter().zip(f.w()) {
            assert!((a - b).norm() <= 1e-12 * sup);
        }
    }

    #[test]
    fn forced_step_with_matching_fields_keeps_v_zero() {
        let g = RadialGrid::new(6.0, 64).unwrap();
        let u = random_field(g, 3);
        let v0 = RadialField::zeros(g);
        let v1 = forced_strang_step(&v0, &u, &u, 0.05).unwrap();
        assert!(v1.w().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn forced_step_rejects_grid_mismatch() {
        let g1 = RadialGrid::new(6.0, 64).unwrap();
        let g2 = RadialGrid::new(6.0, 32).unwrap();
        let v = RadialField::zeros(g1);
        let u = RadialField::zeros(g2);
        let phi = RadialField::zeros(g1);
        assert!(matches!(
            forced_strang_step(&v, &u, &phi, 0.1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn forced_step_matches_variation_of_constants_on_a_mode() {
        // frozen forcing: v̂_k(dt) = e^{−iλdt}·v̂_k(0) − (Ĝ_k/λ)(1−e^{−iλdt});
        // the midpoint kick is within O(dt³) of that, per mode.
        let g = RadialGrid::new(PI, 32).unwrap();
        let u = random_field(g, 41);
        let phi = random_field(g, 42);
        let v0 = pure_mode(g, 2, 0.3);

        let forcing: Vec<Complex64> = (0..g.node_count())
            .map(|j| {
                let sh2 = g.node(j).sinh().powi(2);
                u.w()[j] * (u.w()[j].norm_sqr() / sh2)
                    - phi.w()[j] * (phi.w()[j].norm_sqr() / sh2)
            })
            .collect();
        let ghat = grid::transform(&RadialField::from_w(g, forcing).unwrap());
        let v0_hat = grid::transform(&v0);

        let voc = |dt: f64| -> Vec<Complex64> {
            (0..g.node_count())
                .map(|k| {
                    let l = g.eigenvalue(k);
                    let decay = Complex64::cis(-l * dt);
                    v0_hat.coeffs()[k] * decay
                        - ghat.coeffs()[k] / l * (Complex64::new(1.0, 0.0) - decay)
                })
                .collect()
        };

        let err_at = |dt: f64| -> f64 {
            let stepped = forced_strang_step(&v0, &u, &phi, dt).unwrap();
            let shat = grid::transform(&stepped);
            shat.coeffs()
                .iter()
                .zip(voc(dt))
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max)
        };

        let e1 = err_at(1e-3);
        let e2 = err_at(5e-4);
        let ratio = e1 / e2;
        assert!(
            (5.0..11.0).contains(&ratio),
            "expected ~8x reduction, got {ratio} ({e1} vs {e2})"
        );
    }

    #[test]
    fn evolve_window_identity_horizon() {
        let g = RadialGrid::new(8.0, 64).unwrap();
        let state = crate::highlow::Decomposition::initial(random_field(g, 2), 0.01).unwrap();
        let cfg = StepperConfig::new(1e-2).unwrap();
        let mut acc = Accumulators::new();
        let (end, history) = evolve_window(&state, 0.0, 0.0, &cfg, &mut acc).unwrap();
        assert_eq!(end, state);
        assert!(history.samples.is_empty());
        assert!(history.fields.is_empty());
    }

    #[test]
    fn evolve_window_smallness_run_keeps_v_negligible() {
        // all data in the rough part, amplitude 1e−6: ‖v‖₂ at t=1 is cubic
        let g = RadialGrid::new(10.0, 128).unwrap();
        let data = smooth_field(g, 1e-6);
        let state = Decomposition {
            u: data.clone(),
            psi: data.clone(),
            phi: RadialField::zeros(g),
            v: RadialField::zeros(g),
            t: 0.0,
        };
        let cfg = StepperConfig::new(1e-2).unwrap();
        let mut acc = Accumulators::new();
        let (end, _) = evolve_window(&state, 0.0, 1.0, &cfg, &mut acc).unwrap();
        let vnorm = lebesgue_norm(&end.v, 2.0).unwrap();
        assert!(vnorm <= 1e-14, "‖v‖₂ = {vnorm}");
    }

    #[test]
    fn evolve_window_reconstruction_holds_at_every_sample() {
        let g = RadialGrid::new(10.0, 128).unwrap();
        let state = Decomposition::initial(smooth_field(g, 0.8), 0.02).unwrap();
        let mut cfg = StepperConfig::new(5e-3).unwrap();
        cfg.retain_every = 5;
        let mut acc = Accumulators::new();
        let (end, history) = evolve_window(&state, 0.0, 0.5, &cfg, &mut acc).unwrap();
        assert!(end.reconstruction_defect() <= 1e-13);
        for fs in &history.fields {
            assert_eq!(fs.zeta(), fs.u.sub(&fs.psi));
        }
        assert!((end.t - 0.5).abs() < 1e-12);
        assert_eq!(history.samples.len(), 101);
    }

    #[test]
    fn evolve_window_rejects_inconsistent_window() {
        let g = RadialGrid::new(8.0, 32).unwrap();
        let state = Decomposition::initial(random_field(g, 2), 0.01).unwrap();
        let cfg = StepperConfig::new(1e-2).unwrap();
        let mut acc = Accumulators::new();
        assert!(evolve_window(&state, 1.0, 2.0, &cfg, &mut acc).is_err());
        assert!(evolve_window(&state, 0.0, -1.0, &cfg, &mut acc).is_err());
    }

    #[test]
    fn steps_between_guards_rounding() {
        assert_eq!(steps_between(0.0, 20.0, 2e-3), 10000);
        assert_eq!(steps_between(0.0, 1.0, 1e-2), 100);
        assert_eq!(steps_between(0.0, 0.0, 1e-2), 0);
        assert_eq!(steps_between(0.0, 0.015, 1e-2), 2);
    }
}
