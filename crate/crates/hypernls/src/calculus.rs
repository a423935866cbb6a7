//! Norms, functionals, fractional derivatives, and heat-flow frequency
//! projections, all realized as spectral multipliers plus sinh-weighted
//! quadrature.
//!
//! Integrals over ℍ³ of radial functions use the volume element
//! `4π sinh²(r) dr`. In the conjugated representation `w = sinh(r)·u` the
//! Lebesgue integrand `|u|^p sinh²r` becomes `|w|^p sinh^{2−p}r`, and the
//! quadrature is composite trapezoid on the uniform grid with the implicit
//! zero boundary values, i.e. `h·Σ_j` over interior nodes.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{self, RadialField, SpectralField};

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Heat-flow frequency projection kind.
///
/// `Low` keeps frequencies ≲ s^{−1/2} (multiplier `e^{−sλ}`), `High` is its
/// exact complement, `Band` localizes near s^{−1/2} (multiplier `sλe^{−sλ}`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    Low,
    High,
    Band,
}

/// `|∇|^σ f`, the spectral multiplier `λ^{σ/2}`. `σ = 0` is the identity.
///
/// Negative `σ` is safe: every eigenvalue exceeds 1.
pub fn fractional_derivative(f: &RadialField, sigma: f64) -> RadialField {
    if sigma == 0.0 {
        return f.clone();
    }
    let fhat = grid::transform(f);
    let scaled = fhat
        .apply_multiplier(|l| l.powf(sigma * 0.5))
        .expect("λ^{σ/2} is finite on a positive spectrum");
    grid::inverse_transform(&scaled)
}

/// Heat-flow projection at heat time `s`.
///
/// `High` is computed as the pointwise complement `f − Low(f, s)`, so the
/// partition of unity `low + high = f` holds exactly, not just to transform
/// accuracy. `s = 0` short-circuits: low is the identity, high is zero.
pub fn project(f: &RadialField, which: Projection, s: f64) -> Result<RadialField> {
    if !s.is_finite() || s < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "heat time must be nonnegative, got {s}"
        )));
    }
    match which {
        Projection::Low => {
            if s == 0.0 {
                return Ok(f.clone());
            }
            let fhat = grid::transform(f);
            let low = fhat.apply_multiplier(|l| (-s * l).exp())?;
            Ok(grid::inverse_transform(&low))
        }
        Projection::High => {
            if s == 0.0 {
                return Ok(RadialField::zeros(*f.grid()));
            }
            Ok(f.sub(&project(f, Projection::Low, s)?))
        }
        Projection::Band => {
            if s == 0.0 {
                return Err(Error::InvalidParameter(
                    "band projection requires a strictly positive heat time".into(),
                ));
            }
            let fhat = grid::transform(f);
            let band = fhat.apply_multiplier(|l| s * l * (-s * l).exp())?;
            Ok(grid::inverse_transform(&band))
        }
    }
}

/// `‖u‖_{L^p(ℍ³)}` of the physical field.
///
/// For finite `p`: `(4π Σ_j |w_j|^p sinh^{2−p}(r_j) h)^{1/p}`; for `p = ∞`:
/// `max_j |w_j|/sinh(r_j)`.
pub fn lebesgue_norm(f: &RadialField, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "Lebesgue exponent must satisfy p ≥ 1, got {p}"
        )));
    }
    let g = f.grid();
    if p.is_infinite() {
        return Ok(f
            .w()
            .iter()
            .enumerate()
            .map(|(j, z)| z.norm() / g.node(j).sinh())
            .fold(0.0, f64::max));
    }
    let h = g.spacing();
    let sum: f64 = f
        .w()
        .iter()
        .enumerate()
        .map(|(j, z)| z.norm_sqr().powf(p * 0.5) * g.node(j).sinh().powf(2.0 - p))
        .sum();
    Ok((FOUR_PI * sum * h).powf(1.0 / p))
}

/// `‖|∇|^σ f‖_{L²}`, computed spectrally:
/// `(4π·h·(2/N)·Σ_k λ_k^σ |ŵ_k|²)^{1/2}`.
pub fn sobolev_norm(f: &RadialField, sigma: f64) -> f64 {
    sobolev_norm_spectral(&grid::transform(f), sigma)
}

/// Same as [`sobolev_norm`] when the coefficients are already at hand.
pub fn sobolev_norm_spectral(fhat: &SpectralField, sigma: f64) -> f64 {
    let g = fhat.grid();
    let sum: f64 = fhat
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| g.eigenvalue(k).powf(sigma) * c.norm_sqr())
        .sum();
    (FOUR_PI * g.spacing() * (2.0 / g.subintervals() as f64) * sum).sqrt()
}

/// `‖sinh(r)·u‖_{L^∞}`; the stored `w` already carries the weight.
pub fn weighted_sup(f: &RadialField) -> f64 {
    f.w().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Lebesgue norm of `⟨r⟩^a·u` with `⟨r⟩ = (1 + r²)^{1/2}`.
pub fn weighted_norm(f: &RadialField, a: f64, p: f64) -> Result<f64> {
    let g = f.grid();
    let weighted: Vec<Complex64> = f
        .w()
        .iter()
        .enumerate()
        .map(|(j, &z)| z * (1.0 + g.node(j).powi(2)).powf(a * 0.5))
        .collect();
    lebesgue_norm(&RadialField::from_w(*g, weighted)?, p)
}

/// `M(u) = ∫|u|² dx = ‖u‖₂²`.
pub fn mass(f: &RadialField) -> f64 {
    let h = f.grid().spacing();
    FOUR_PI * h * f.w().iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// `E(u) = ½∫|∇u|² + ¼∫|u|⁴`.
pub fn energy(f: &RadialField) -> f64 {
    let kinetic = sobolev_norm(f, 1.0);
    let quartic = lebesgue_norm(f, 4.0).expect("p = 4 is valid");
    0.5 * kinetic * kinetic + 0.25 * quartic.powi(4)
}

/// Physical radial derivative `∂_r u` at the nodes, from
/// `∂_r u = (w'·sinh r − w·cosh r)/sinh² r`. For radial functions on ℍ³
/// this is the full gradient magnitude (up to phase).
pub fn radial_gradient_values(f: &RadialField) -> Vec<Complex64> {
    let g = f.grid();
    let wprime = grid::radial_derivative_values(&grid::transform(f));
    f.w()
        .iter()
        .zip(wprime)
        .enumerate()
        .map(|(j, (&wj, wpj))| {
            let r = g.node(j);
            let (sh, ch) = (r.sinh(), r.cosh());
            (wpj * sh - wj * ch) / (sh * sh)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Hot-path helpers on raw slices (the stepper precomputes node tables).
// ---------------------------------------------------------------------------

/// `‖u‖₂` from raw `w` values.
pub(crate) fn l2_norm_w(w: &[Complex64], h: f64) -> f64 {
    (FOUR_PI * h * w.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
}

/// `‖u‖_{L^p}` from raw `w` values and a precomputed `sinh` table.
pub(crate) fn lp_norm_w(w: &[Complex64], sinh: &[f64], h: f64, p: f64) -> f64 {
    let sum: f64 = w
        .iter()
        .zip(sinh)
        .map(|(z, &sh)| z.norm_sqr().powf(p * 0.5) * sh.powf(2.0 - p))
        .sum();
    (FOUR_PI * sum * h).powf(1.0 / p)
}

/// `‖u‖₄⁴` from raw `w` values (integer powers, no powf).
pub(crate) fn l4_norm_pow4_w(w: &[Complex64], sinh: &[f64], h: f64) -> f64 {
    let sum: f64 = w
        .iter()
        .zip(sinh)
        .map(|(z, &sh)| {
            let q = z.norm_sqr();
            q * q / (sh * sh)
        })
        .sum();
    FOUR_PI * sum * h
}

/// `Σ λ_k^σ |ŵ_k|²` scaled to the squared Sobolev norm, from raw coefficients.
pub(crate) fn sobolev_sq_coeffs(coeffs: &[Complex64], lambdas: &[f64], sigma: f64, h: f64, n: usize) -> f64 {
    let sum: f64 = coeffs
        .iter()
        .zip(lambdas)
        .map(|(c, &l)| l.powf(sigma) * c.norm_sqr())
        .sum();
    FOUR_PI * h * (2.0 / n as f64) * sum
}

/// `Σ λ_k |ŵ_k|²` scaled to `‖∇u‖₂²` (σ = 1 fast path).
pub(crate) fn h1_sq_coeffs(coeffs: &[Complex64], lambdas: &[f64], h: f64, n: usize) -> f64 {
    let sum: f64 = coeffs
        .iter()
        .zip(lambdas)
        .map(|(c, &l)| l * c.norm_sqr())
        .sum();
    FOUR_PI * h * (2.0 / n as f64) * sum
}

// ---------------------------------------------------------------------------
// Norm specifications (serializable names used in run configs)
// ---------------------------------------------------------------------------

/// A named norm: `"L2"`, `"L4"`, `"Linf"`, `"H0.5"`, `"H1"`, `"WsupSinh"`,
/// or `"W(a,p)"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormSpec {
    Lebesgue(f64),
    Sobolev(f64),
    WeightedSup,
    Weighted { a: f64, p: f64 },
}

impl NormSpec {
    pub fn parse(text: &str) -> Result<NormSpec> {
        let bad = || Error::InvalidParameter(format!("unrecognized norm spec {text:?}"));
        let t = text.trim();
        if t == "WsupSinh" {
            return Ok(NormSpec::WeightedSup);
        }
        if let Some(rest) = t.strip_prefix("W(") {
            let inner = rest.strip_suffix(')').ok_or_else(bad)?;
            let (a, p) = inner.split_once(',').ok_or_else(bad)?;
            let a: f64 = a.trim().parse().map_err(|_| bad())?;
            let p: f64 = if p.trim() == "inf" {
                f64::INFINITY
            } else {
                p.trim().parse().map_err(|_| bad())?
            };
            if !a.is_finite() || !(p >= 1.0) {
                return Err(bad());
            }
            return Ok(NormSpec::Weighted { a, p });
        }
        if let Some(rest) = t.strip_prefix('L') {
            let p: f64 = if rest == "inf" {
                f64::INFINITY
            } else {
                rest.parse().map_err(|_| bad())?
            };
            if !(p >= 1.0) {
                return Err(bad());
            }
            return Ok(NormSpec::Lebesgue(p));
        }
        if let Some(rest) = t.strip_prefix('H') {
            let sigma: f64 = rest.parse().map_err(|_| bad())?;
            if !sigma.is_finite() {
                return Err(bad());
            }
            return Ok(NormSpec::Sobolev(sigma));
        }
        Err(bad())
    }

    pub fn evaluate(&self, f: &RadialField) -> Result<f64> {
        match *self {
            NormSpec::Lebesgue(p) => lebesgue_norm(f, p),
            NormSpec::Sobolev(sigma) => Ok(sobolev_norm(f, sigma)),
            NormSpec::WeightedSup => Ok(weighted_sup(f)),
            NormSpec::Weighted { a, p } => weighted_norm(f, a, p),
        }
    }
}

impl std::fmt::Display for NormSpec {
    fn fmt(&self, out: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fn num(x: f64) -> String {
            if x.is_infinite() {
                "inf".into()
            } else {
                format!("{x}")
            }
        }
        match *self {
            NormSpec::Lebesgue(p) => write!(out, "L{}", num(p)),
            NormSpec::Sobolev(s) => write!(out, "H{}", num(s)),
            NormSpec::WeightedSup => write!(out, "WsupSinh"),
            NormSpec::Weighted { a, p } => write!(out, "W({},{})", num(a), num(p)),
        }
    }
}
