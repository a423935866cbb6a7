use hypernls::lab::{gen_data, run, RunConfig};
use hypernls::calculus;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(|s| s.as_str()).unwrap_or("ref");
    match mode {
        "ref" => {
            // reference-style run, short horizon first
            let amplitude: f64 = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(1.0);
            let horizon: f64 = args.get(3).and_then(|a| a.parse().ok()).unwrap_or(2.0);
            let cfg = RunConfig { amplitude, horizon, ..RunConfig::default() };
            let t0 = Instant::now();
            let (report, history, ledger) = run(&cfg).unwrap();
            let dt_wall = t0.elapsed().as_secs_f64();
            let drift_mass = report.audits.iter().find(|a| a.name == "conservation_mass").unwrap().lhs;
            let drift_energy = report.audits.iter().find(|a| a.name == "conservation_energy").unwrap().lhs;
            println!("amplitude={amplitude} T={horizon} wall={dt_wall:.1}s steps={} intervals={} M_used={:.4e} dE_total={:.4e} maxdE={:.4e} E_phi0={:.4e} mass_drift={drift_mass:.2e} energy_drift={drift_energy:.2e} shell={:.2e}",
                history.samples.len()-1, ledger.interval_count(), ledger.m_used, ledger.delta_e_total, ledger.max_delta_e(), ledger.e_phi_initial, ledger.max_shell_fraction);
            for rec in ledger.intervals.iter().take(8) {
                println!("  interval {}: [{:.3},{:.3}] budget={:.3e} dE={:.3e} I={:.3e} II={:.3e}", rec.j, rec.b0, rec.b1, rec.budget, rec.delta_e, rec.term_i, rec.term_ii);
            }
        }
        "desweep" => {
            let amplitude: f64 = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(10.0);
            let mut pts = Vec::new();
            for i in [6i32, 8, 10, 12] {
                let s0 = 2f64.powi(-i);
                let cfg = RunConfig { amplitude, s0, ..RunConfig::default() };
                let (_, _, ledger) = run(&cfg).unwrap();
                println!("s0=2^-{i} maxdE={:.5e} dE_total={:.5e} intervals={} M={:.3e}", ledger.max_delta_e(), ledger.delta_e_total, ledger.interval_count(), ledger.m_used);
                pts.push((s0, ledger.max_delta_e()));
            }
            let fit = hypernls::diagnostics::fit_power_law(&pts).unwrap();
            println!("maxdE slope={:.4} one-sided target >= {:.4}", fit.slope, 1.5*0.95 - 11.0/8.0 - 0.15);
        }
        "split" => {
            // splitting law: E(phi0) vs s0
            let s: f64 = args.get(2).and_then(|a| a.parse().ok()).unwrap_or(0.95);
            let amplitude: f64 = args.get(3).and_then(|a| a.parse().ok()).unwrap_or(1.0);
            let grid = hypernls::grid::RadialGrid::new(40.0, 4096).unwrap();
            let u0 = gen_data(s, 7, amplitude, grid, args.get(4).and_then(|a| a.parse().ok()).unwrap_or(0.01)).unwrap();
            let mut pts = Vec::new();
            for i in 4..=12 {
                let s0 = 2f64.powi(-i);
                let (_, phi0) = hypernls::highlow::split_initial(&u0, s0).unwrap();
                let e = calculus::energy(&phi0);
                pts.push((s0, e));
                println!("s0=2^-{i} E_phi0={e:.6e}  kinetic_frac={:.3}", 0.5*calculus::sobolev_norm(&phi0,1.0).powi(2)/e);
            }
            let fit = hypernls::diagnostics::fit_power_law(&pts).unwrap();
            println!("s={s} amplitude={amplitude}: slope={:.4} target={:.4} residual={:.3e}", fit.slope, -(1.0-s), fit.max_residual);
        }
        "rich2" => {
            let grid = hypernls::grid::RadialGrid::new(40.0, 4096).unwrap();
            let n = grid.subintervals();
            let w: Vec<num_complex::Complex64> = (1..n).map(|j| {
                let x = std::f64::consts::PI * j as f64 / n as f64;
                num_complex::Complex64::new(1.0 * (x.sin() + 0.5*(2.0*x).sin()), 0.3*(3.0*x).sin())
            }).collect();
            let u0 = hypernls::grid::RadialField::from_w(grid, w).unwrap();
            let evolve = |dt: f64| {
                let mut f = u0.clone();
                let steps = (1.0 / dt).round() as usize;
                for _ in 0..steps { f = hypernls::propagators::strang_step(&f, dt); }
                f
            };
            let a = evolve(4e-3); let b = evolve(2e-3); let c = evolve(1e-3);
            let e1 = calculus::lebesgue_norm(&a.sub(&b), 2.0).unwrap();
            let e2 = calculus::lebesgue_norm(&b.sub(&c), 2.0).unwrap();
            println!("richardson smooth: e1={e1:.4e} e2={e2:.4e} ratio={:.3}", e1/e2);
        }
        "rich" => {
            // Richardson self-convergence at reference grid
            let grid = hypernls::grid::RadialGrid::new(40.0, 4096).unwrap();
            let u0 = gen_data(0.95, 7, 1.0, grid, 0.01).unwrap();
            let evolve = |dt: f64| {
                let mut f = u0.clone();
                let steps = (1.0 / dt).round() as usize;
                for _ in 0..steps { f = hypernls::propagators::strang_step(&f, dt); }
                f
            };
            let t0 = Instant::now();
            let a = evolve(4e-3); let b = evolve(2e-3); let c = evolve(1e-3);
            let e1 = calculus::lebesgue_norm(&a.sub(&b), 2.0).unwrap();
            let e2 = calculus::lebesgue_norm(&b.sub(&c), 2.0).unwrap();
            println!("richardson: e(4e-3)={e1:.4e} e(2e-3)={e2:.4e} ratio={:.3} wall={:.1}s", e1/e2, t0.elapsed().as_secs_f64());
        }
        _ => eprintln!("unknown mode"),
    }
}
// (smooth-data Richardson appended as mode "rich2" via second file? no — edit below)
