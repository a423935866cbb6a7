//! Radial grid, the sinh-conjugated field representation, and the exact
//! spectral transform diagonalizing the hyperbolic Laplacian on radial
//! functions.
//!
//! A radial function `u` on ℍ³ is stored as `w(r) = sinh(r)·u(r)` at the
//! interior nodes `r_j = j·R/N`, `j = 1..N−1`, with implicit Dirichlet
//! values `w(0) = w(R) = 0`. Under this conjugation the radial hyperbolic
//! Laplacian becomes `∂_rr − 1`, whose Dirichlet eigenfunctions on `(0, R)`
//! are `sin(πkr/R)` with eigenvalues of `−Δ` equal to
//!
//! ```text
//! λ_k = 1 + (πk/R)²,   k = 1..N−1.
//! ```
//!
//! The transform pair is the type-I discrete sine transform with the `2/N`
//! factor on the inverse, fixed bit-exactly so that oracle implementations
//! in any language agree:
//!
//! ```text
//! forward:  ŵ_k = Σ_{j=1}^{N−1} w_j sin(πjk/N)
//! inverse:  w_j = (2/N) Σ_{k=1}^{N−1} ŵ_k sin(πjk/N)
//! ```
//!
//! Discrete Parseval: `Σ_j |w_j|² = (2/N) Σ_k |ŵ_k|²`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform grid on `(0, R)` with `N` subintervals and `N−1` interior nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    r_max: f64,
    n: usize,
}

impl RadialGrid {
    /// Build a grid with truncation radius `r_max` and `n` subintervals.
    pub fn new(r_max: f64, n: usize) -> Result<Self> {
        if !r_max.is_finite() || r_max <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "truncation radius must be positive and finite, got {r_max}"
            )));
        }
        if n < 2 {
            return Err(Error::InvalidParameter(format!(
                "subinterval count must be at least 2, got {n}"
            )));
        }
        Ok(RadialGrid { r_max, n })
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// The subinterval count `N`.
    pub fn subintervals(&self) -> usize {
        self.n
    }

    /// Mesh spacing `h = R/N`.
    pub fn spacing(&self) -> f64 {
        self.r_max / self.n as f64
    }

    /// Number of interior nodes, `N−1`.
    pub fn node_count(&self) -> usize {
        self.n - 1
    }

    /// Node `r_{idx+1} = (idx+1)·h` for storage index `idx = 0..N−1`.
    pub fn node(&self, idx: usize) -> f64 {
        (idx + 1) as f64 * self.spacing()
    }

    /// Eigenvalue `λ_{idx+1} = 1 + (π(idx+1)/R)²` for storage index `idx`.
    pub fn eigenvalue(&self, idx: usize) -> f64 {
        let k = (idx + 1) as f64;
        1.0 + (std::f64::consts::PI * k / self.r_max).powi(2)
    }

    /// Smallest eigenvalue `λ_1 = 1 + (π/R)²`; always `> 1` (spectral gap).
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalue(0)
    }

    /// Largest resolved eigenvalue `λ_{N−1}`.
    pub fn lambda_max(&self) -> f64 {
        self.eigenvalue(self.node_count() - 1)
    }

    /// `sinh(r_j)` at every interior node.
    pub fn sinh_table(&self) -> Vec<f64> {
        (0..self.node_count()).map(|j| self.node(j).sinh()).collect()
    }
}

/// Radial complex field in the conjugated `w = sinh(r)·u` representation.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: RadialGrid,
    w: Vec<Complex64>,
}

impl RadialField {
    pub fn zeros(grid: RadialGrid) -> Self {
        RadialField {
            w: vec![Complex64::ZERO; grid.node_count()],
            grid,
        }
    }

    /// Wrap raw `w` values; checks length and finiteness.
    pub fn from_w(grid: RadialGrid, w: Vec<Complex64>) -> Result<Self> {
        if w.len() != grid.node_count() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values, grid expects {}",
                w.len(),
                grid.node_count()
            )));
        }
        if !w.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::InvalidArgument(
                "field contains non-finite values".into(),
            ));
        }
        Ok(RadialField { grid, w })
    }

    /// Build from samples of the physical field `u`; multiplies by `sinh(r_j)`.
    pub fn from_physical(grid: RadialGrid, u: &[Complex64]) -> Result<Self> {
        if u.len() != grid.node_count() {
            return Err(Error::InvalidArgument(format!(
                "sample vector has {} values, grid expects {}",
                u.len(),
                grid.node_count()
            )));
        }
        let w = u
            .iter()
            .enumerate()
            .map(|(j, &uj)| uj * grid.node(j).sinh())
            .collect();
        RadialField::from_w(grid, w)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn w(&self) -> &[Complex64] {
        &self.w
    }

    pub fn w_mut(&mut self) -> &mut [Complex64] {
        &mut self.w
    }

    /// Physical samples `u_j = w_j / sinh(r_j)`.
    pub fn to_physical(&self) -> Vec<Complex64> {
        self.w
            .iter()
            .enumerate()
            .map(|(j, &wj)| wj / self.grid.node(j).sinh())
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Pointwise sum; panics on grid mismatch (internal invariant).
    pub fn add(&self, other: &RadialField) -> RadialField {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let w = self
            .w
            .iter()
            .zip(&other.w)
            .map(|(a, b)| a + b)
            .collect();
        RadialField { grid: self.grid, w }
    }

    /// Pointwise difference; panics on grid mismatch (internal invariant).
    pub fn sub(&self, other: &RadialField) -> RadialField {
        assert_eq!(self.grid, other.grid, "grid mismatch");
        let w = self
            .w
            .iter()
            .zip(&other.w)
            .map(|(a, b)| a - b)
            .collect();
        RadialField { grid: self.grid, w }
    }

    pub fn scale(&self, c: Complex64) -> RadialField {
        RadialField {
            grid: self.grid,
            w: self.w.iter().map(|z| z * c).collect(),
        }
    }
}

/// Sine-transform coefficients of a [`RadialField`]; home of all spectral
/// multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: RadialGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(grid: RadialGrid) -> Self {
        SpectralField {
            coeffs: vec![Complex64::ZERO; grid.node_count()],
            grid,
        }
    }

    pub fn from_coeffs(grid: RadialGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.node_count() {
            return Err(Error::InvalidArgument(format!(
                "coefficient vector has {} values, grid expects {}",
                coeffs.len(),
                grid.node_count()
            )));
        }
        Ok(SpectralField { grid, coeffs })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Scale coefficient `k` by the real multiplier `m(λ_k)`.
    pub fn apply_multiplier(&self, m: impl Fn(f64) -> f64) -> Result<SpectralField> {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (idx, &c) in self.coeffs.iter().enumerate() {
            let mk = m(self.grid.eigenvalue(idx));
            if !mk.is_finite() {
                return Err(Error::NumericDomain(format!(
                    "multiplier non-finite at λ = {}",
                    self.grid.eigenvalue(idx)
                )));
            }
            coeffs.push(c * mk);
        }
        Ok(SpectralField {
            grid: self.grid,
            coeffs,
        })
    }

    /// Scale coefficient `k` by the complex multiplier `m(λ_k)` (propagator
    /// phases).
    pub fn apply_complex_multiplier(
        &self,
        m: impl Fn(f64) -> Complex64,
    ) -> Result<SpectralField> {
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        for (idx, &c) in self.coeffs.iter().enumerate() {
            let mk = m(self.grid.eigenvalue(idx));
            if !mk.re.is_finite() || !mk.im.is_finite() {
                return Err(Error::NumericDomain(format!(
                    "multiplier non-finite at λ = {}",
                    self.grid.eigenvalue(idx)
                )));
            }
            coeffs.push(c * mk);
        }
        Ok(SpectralField {
            grid: self.grid,
            coeffs,
        })
    }
}

// ---------------------------------------------------------------------------
// DST-I kernel
// ---------------------------------------------------------------------------

struct FftCache {
    planner: FftPlanner<f64>,
    plans: HashMap<usize, Arc<dyn Fft<f64>>>,
    buf: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl FftCache {
    fn new() -> Self {
        FftCache {
            planner: FftPlanner::new(),
            plans: HashMap::new(),
            buf: Vec::new(),
            scratch: Vec::new(),
        }
    }
}

thread_local! {
    static FFT_CACHE: RefCell<FftCache> = RefCell::new(FftCache::new());
}

/// `y_k = Σ_{j=1}^{N−1} x_j sin(πjk/N)`, `k = 1..N−1`, via a length-`2N`
/// FFT of the odd extension.
fn sine_kernel(x: &[Complex64], n: usize) -> Vec<Complex64> {
    debug_assert_eq!(x.len(), n - 1);
    FFT_CACHE.with(|cache| {
        let mut cache = cache.borrow_mut();
        let fft = match cache.plans.get(&(2 * n)) {
            Some(p) => Arc::clone(p),
            None => {
                let p = cache.planner.plan_fft_forward(2 * n);
                cache.plans.insert(2 * n, Arc::clone(&p));
                p
            }
        };
        cache.buf.clear();
        cache.buf.resize(2 * n, Complex64::ZERO);
        for (j, &xj) in x.iter().enumerate() {
            cache.buf[j + 1] = xj;
            cache.buf[2 * n - 1 - j] = -xj;
        }
        let need = fft.get_inplace_scratch_len();
        if cache.scratch.len() < need {
            cache.scratch.resize(need, Complex64::ZERO);
        }
        let FftCache { buf, scratch, .. } = &mut *cache;
        fft.process_with_scratch(buf, scratch);
        // odd extension gives Z_k = −2i·Σ x_j sin(πjk/N)
        let half_i = Complex64::new(0.0, 0.5);
        (1..n).map(|k| half_i * buf[k]).collect()
    })
}

/// `y_j = Σ_{k=1}^{N−1} c_k cos(πjk/N)`, `j = 1..N−1`, via a length-`2N`
/// FFT of the even extension. Used to evaluate radial derivatives of sine
/// series at the nodes.
pub(crate) fn cosine_kernel(c: &[Complex64], n: usize) -> Vec<Complex64> {
    debug_assert_eq!(c.len(), n - 1);
    FFT_CACHE.with(|cache| {
        let mut cache = cache.borrow_mut();
        let fft = match cache.plans.get(&(2 * n)) {
            Some(p) => Arc::clone(p),
            None => {
                let p = cache.planner.plan_fft_forward(2 * n);
                cache.plans.insert(2 * n, Arc::clone(&p));
                p
            }
        };
        cache.buf.clear();
        cache.buf.resize(2 * n, Complex64::ZERO);
        for (k, &ck) in c.iter().enumerate() {
            cache.buf[k + 1] = ck;
            cache.buf[2 * n - 1 - k] = ck;
        }
        let need = fft.get_inplace_scratch_len();
        if cache.scratch.len() < need {
            cache.scratch.resize(need, Complex64::ZERO);
        }
        let FftCache { buf, scratch, .. } = &mut *cache;
        fft.process_with_scratch(buf, scratch);
        // even extension gives Z_j = 2·Σ c_k cos(πjk/N)
        (1..n).map(|j| 0.5 * buf[j]).collect()
    })
}

/// Forward transform: `ŵ_k = Σ_j w_j sin(πjk/N)`.
pub fn transform(f: &RadialField) -> SpectralField {
    let n = f.grid.subintervals();
    SpectralField {
        grid: f.grid,
        coeffs: sine_kernel(&f.w, n),
    }
}

/// Inverse transform: `w_j = (2/N) Σ_k ŵ_k sin(πjk/N)`.
pub fn inverse_transform(fhat: &SpectralField) -> RadialField {
    let n = fhat.grid.subintervals();
    let scale = 2.0 / n as f64;
    let mut w = sine_kernel(&fhat.coeffs, n);
    for z in &mut w {
        *z *= scale;
    }
    RadialField { grid: fhat.grid, w }
}

/// Radial derivative `w'(r_j)` of the sine series with coefficients `ŵ_k`:
/// `w'_j = (2/N) Σ_k ŵ_k (πk/R) cos(πjk/N)`.
pub fn radial_derivative_values(fhat: &SpectralField) -> Vec<Complex64> {
    let n = fhat.grid.subintervals();
    let r = fhat.grid.r_max();
    let weighted: Vec<Complex64> = fhat
        .coeffs
        .iter()
        .enumerate()
        .map(|(idx, &c)| c * (std::f64::consts::PI * (idx + 1) as f64 / r))
        .collect();
    let scale = 2.0 / n as f64;
    let mut out = cosine_kernel(&weighted, n);
    for z in &mut out {
        *z *= scale;
    }
    out
}

// ---------------------------------------------------------------------------
// Field snapshot exchange format
// ---------------------------------------------------------------------------

/// On-disk field snapshot: `{"R": .., "N": .., "w_re": [..], "w_im": [..]}`
/// with arrays of length `N−1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSnapshot {
    #[serde(rename = "R")]
    pub r_max: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub w_re: Vec<f64>,
    pub w_im: Vec<f64>,
}

impl FieldSnapshot {
    pub fn from_field(f: &RadialField) -> Self {
        FieldSnapshot {
            r_max: f.grid.r_max(),
            n: f.grid.subintervals(),
            w_re: f.w.iter().map(|z| z.re).collect(),
            w_im: f.w.iter().map(|z| z.im).collect(),
        }
    }

    /// Validate and convert into a field.
    pub fn into_field(self) -> Result<RadialField> {
        let grid = RadialGrid::new(self.r_max, self.n)?;
        if self.w_re.len() != grid.node_count() || self.w_im.len() != grid.node_count() {
            return Err(Error::InvalidArgument(format!(
                "snapshot arrays have lengths {}/{}, grid expects {}",
                self.w_re.len(),
                self.w_im.len(),
                grid.node_count()
            )));
        }
        let w = self
            .w_re
            .iter()
            .zip(&self.w_im)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect();
        RadialField::from_w(grid, w)
    }

    /// Parse from JSON bytes. Unknown keys are rejected.
    pub fn from_json_bytes(bytes: &[u8]) -> Result<Self> {
        Ok(serde_json::from_slice(bytes)?)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Lcg64;
    use std::f64::consts::PI;

    pub(crate) fn random_field(grid: RadialGrid, seed: u64) -> RadialField {
        let mut rng = Lcg64::new(seed);
        let w = (0..grid.node_count())
            .map(|_| Complex64::new(rng.next_f64() - 0.5, rng.next_f64() - 0.5))
            .collect();
        RadialField::from_w(grid, w).unwrap()
    }

    /// Direct O(N²) double-summation oracle for the forward transform.
    fn dst_direct(w: &[Complex64], n: usize) -> Vec<Complex64> {
        (1..n)
            .map(|k| {
                (1..n)
                    .map(|j| w[j - 1] * (PI * (j * k) as f64 / n as f64).sin())
                    .sum()
            })
            .collect()
    }

    #[test]
    fn grid_nodes_match_definition() {
        let g = RadialGrid::new(PI, 4).unwrap();
        assert_eq!(g.node_count(), 3);
        assert!((g.node(0) - PI / 4.0).abs() < 1e-15);
        assert!((g.node(1) - PI / 2.0).abs() < 1e-15);
        assert!((g.node(2) - 3.0 * PI / 4.0).abs() < 1e-15);

        let g = RadialGrid::new(40.0, 4096).unwrap();
        assert_eq!(g.node_count(), 4095);
        assert!((g.spacing() - 40.0 / 4096.0).abs() < 1e-18);
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(matches!(
            RadialGrid::new(PI, 1),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            RadialGrid::new(0.0, 16),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            RadialGrid::new(-3.0, 16),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn spectral_gap_holds_on_every_grid() {
        for (r, n) in [(PI, 4), (40.0, 4096), (1e-2, 8), (200.0, 64)] {
            let g = RadialGrid::new(r, n).unwrap();
            assert!(g.lambda_min() > 1.0);
        }
    }

    #[test]
    fn pure_mode_transforms_to_single_coefficient() {
        let n = 64;
        let g = RadialGrid::new(PI, n).unwrap();
        let w: Vec<Complex64> = (1..n)
            .map(|j| Complex64::new((PI * j as f64 / n as f64).sin(), 0.0))
            .collect();
        let f = RadialField::from_w(g, w).unwrap();
        let fhat = transform(&f);
        assert!((fhat.coeffs()[0].re - n as f64 / 2.0).abs() < 1e-10);
        assert!(fhat.coeffs()[0].im.abs() < 1e-10);
        for k in 1..n - 1 {
            assert!(fhat.coeffs()[k].norm() < 1e-10, "leak into mode {}", k + 1);
        }
    }

    #[test]
    fn fast_transform_matches_direct_summation_oracle() {
        let g = RadialGrid::new(7.5, 48).unwrap();
        let f = random_field(g, 11);
        let fast = transform(&f);
        let direct = dst_direct(f.w(), 48);
        let scale: f64 = direct.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (a, b) in fast.coeffs().iter().zip(&direct) {
            assert!((a - b).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn roundtrip_is_identity() {
        for n in [4usize, 57, 128, 1000] {
            let g = RadialGrid::new(17.0, n).unwrap();
            let f = random_field(g, n as u64);
            let back = inverse_transform(&transform(&f));
            let sup: f64 = f.w().iter().map(|z| z.norm()).fold(0.0, f64::max);
            for (a, b) in back.w().iter().zip(f.w()) {
                assert!((a - b).norm() <= 1e-12 * sup);
            }
        }
    }

    #[test]
    fn parseval_against_double_summation_oracle() {
        let n = 96;
        let g = RadialGrid::new(5.0, n).unwrap();
        let f = random_field(g, 23);
        let physical: f64 = f.w().iter().map(|z| z.norm_sqr()).sum();
        let direct = dst_direct(f.w(), n);
        let spectral: f64 = direct.iter().map(|z| z.norm_sqr()).sum::<f64>() * 2.0 / n as f64;
        assert!((physical - spectral).abs() <= 1e-12 * physical);
        // and the fast path agrees with the same identity
        let fast: f64 = transform(&f)
            .coeffs()
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            * 2.0
            / n as f64;
        assert!((physical - fast).abs() <= 1e-12 * physical);
    }

    #[test]
    fn identity_multiplier_is_identity() {
        let g = RadialGrid::new(3.0, 32).unwrap();
        let f = random_field(g, 5);
        let fhat = transform(&f);
        let same = fhat.apply_multiplier(|_| 1.0).unwrap();
        assert_eq!(fhat.coeffs(), same.coeffs());
    }

    #[test]
    fn eigenvalue_multiplier_scales_pure_mode() {
        // m(λ) = λ on mode k with R = π scales by 1 + k².
        let n = 32;
        let g = RadialGrid::new(PI, n).unwrap();
        for k in [1usize, 3, 7] {
            let w: Vec<Complex64> = (1..n)
                .map(|j| Complex64::new((PI * (j * k) as f64 / n as f64).sin(), 0.0))
                .collect();
            let f = RadialField::from_w(g, w).unwrap();
            let scaled = inverse_transform(&transform(&f).apply_multiplier(|l| l).unwrap());
            let factor = 1.0 + (k * k) as f64;
            for (a, b) in scaled.w().iter().zip(f.w()) {
                assert!((a - b * factor).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn inverse_exponential_multipliers_cancel() {
        let g = RadialGrid::new(PI, 64).unwrap();
        let s = 30.0 / g.lambda_max(); // s·λ_max = 30
        let f = random_field(g, 9);
        let fhat = transform(&f);
        let roundtrip = fhat
            .apply_multiplier(|l| (-s * l).exp())
            .unwrap()
            .apply_multiplier(|l| (s * l).exp())
            .unwrap();
        let sup: f64 = fhat.coeffs().iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (a, b) in roundtrip.coeffs().iter().zip(fhat.coeffs()) {
            assert!((a - b).norm() <= 1e-10 * sup);
        }
    }

    #[test]
    fn non_finite_multiplier_is_rejected() {
        let g = RadialGrid::new(PI, 8).unwrap();
        let fhat = transform(&random_field(g, 2));
        assert!(matches!(
            fhat.apply_multiplier(|l| (l * 1e6).exp()),
            Err(Error::NumericDomain(_))
        ));
    }

    #[test]
    fn physical_representation_roundtrip() {
        let g = RadialGrid::new(12.0, 128).unwrap();
        // w_j = sinh(r_j) is the constant physical field u ≡ 1
        let w: Vec<Complex64> = (0..g.node_count())
            .map(|j| Complex64::new(g.node(j).sinh(), 0.0))
            .collect();
        let f = RadialField::from_w(g, w).unwrap();
        for u in f.to_physical() {
            assert!((u - Complex64::new(1.0, 0.0)).norm() < 1e-13);
        }

        let f = random_field(g, 77);
        let back = RadialField::from_physical(g, &f.to_physical()).unwrap();
        let sup: f64 = f.w().iter().map(|z| z.norm()).fold(0.0, f64::max);
        for (a, b) in back.w().iter().zip(f.w()) {
            assert!((a - b).norm() <= 1e-13 * sup);
        }
    }

    #[test]
    fn conjugation_limit_near_origin() {
        // w_j = r_j gives u_j = r_j/sinh(r_j) → 1 as r → 0.
        let g = RadialGrid::new(1.0, 4096).unwrap();
        let w: Vec<Complex64> = (0..g.node_count())
            .map(|j| Complex64::new(g.node(j), 0.0))
            .collect();
        let f = RadialField::from_w(g, w).unwrap();
        let u = f.to_physical();
        assert!((u[0].re - 1.0).abs() < 1e-7);
        assert!(u[0].re < 1.0); // r/sinh r < 1
    }

    #[test]
    fn radial_derivative_of_pure_mode_is_exact() {
        let n = 256;
        let r_max = 11.0;
        let g = RadialGrid::new(r_max, n).unwrap();
        let k = 5usize;
        let w: Vec<Complex64> = (0..g.node_count())
            .map(|j| Complex64::new((PI * k as f64 * g.node(j) / r_max).sin(), 0.0))
            .collect();
        let f = RadialField::from_w(g, w).unwrap();
        let deriv = radial_derivative_values(&transform(&f));
        for (j, d) in deriv.iter().enumerate() {
            let exact = (PI * k as f64 / r_max) * (PI * k as f64 * g.node(j) / r_max).cos();
            assert!((d.re - exact).abs() < 1e-9);
            assert!(d.im.abs() < 1e-9);
        }
    }

    #[test]
    fn snapshot_roundtrip_and_validation() {
        let g = RadialGrid::new(4.0, 32).unwrap();
        let f = random_field(g, 123);
        let json = FieldSnapshot::from_field(&f).to_json_string().unwrap();
        let back = FieldSnapshot::from_json_bytes(json.as_bytes())
            .unwrap()
            .into_field()
            .unwrap();
        assert_eq!(f, back);

        // wrong array length
        let mut snap = FieldSnapshot::from_field(&f);
        snap.w_re.pop();
        assert!(matches!(snap.into_field(), Err(Error::InvalidArgument(_))));

        // unknown key fails closed
        let bad = r#"{"R":1.0,"N":2,"w_re":[0.0],"w_im":[0.0],"extra":1}"#;
        assert!(FieldSnapshot::from_json_bytes(bad.as_bytes()).is_err());

        // non-finite values rejected
        let nan = r#"{"R":1.0,"N":2,"w_re":[null],"w_im":[0.0]}"#;
        assert!(FieldSnapshot::from_json_bytes(nan.as_bytes()).is_err());
    }
}
