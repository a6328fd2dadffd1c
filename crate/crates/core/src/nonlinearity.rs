//! Smoothing nonlinearities: double-convolution energy functionals, their
//! gradients, the scale-ball cutoff wrapper and the twisted (flow-conjugated)
//! version used by the periodic and connecting-curve solvers.
//!
//! Conventions. Convolution is normalized as (u∗ψ)(x) = (1/X)∫u(y)ψ(x−y)dy so
//! Fourier coefficients multiply plainly and ψ̂ ≡ δ_{n,0} is the averaging
//! projector. Gradients are taken with respect to the real coefficient
//! pairing ⟨u, v⟩ = Re Σ û(n) conj(v̂(n)).

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid;
use crate::params::EquationKind;
use crate::spectral::{weight, Params, SpectralField};

/// Smoothing kernel ψ given by its Fourier coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case")]
pub enum KernelShape {
    /// ψ̂(n) = (1 + n²)^(−β/2); decay order β.
    PowerLaw { beta: f64 },
    /// Smooth bump of the given support width (fraction of the period),
    /// sampled from closed form; decays faster than any power.
    Bump { support: f64 },
    /// Explicit coefficient table (n, re, im); must describe a real kernel.
    Table { entries: Vec<(i64, f64, f64)> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Kernel {
    #[serde(flatten)]
    pub shape: KernelShape,
    /// Drop the n = 0 coefficient. Solvers need this: the (p, n) = (0, 0)
    /// divisor vanishes identically, so the nonlinearity must not force the
    /// constant mode.
    #[serde(default)]
    pub zero_mean: bool,
    #[serde(skip)]
    cache: KernelCache,
}

#[derive(Debug, Clone, Default)]
struct KernelCache(Arc<Mutex<HashMap<usize, Arc<Vec<Complex64>>>>>);

impl Kernel {
    pub fn power_law(beta: f64, zero_mean: bool) -> Self {
        Kernel {
            shape: KernelShape::PowerLaw { beta },
            zero_mean,
            cache: KernelCache::default(),
        }
    }

    pub fn bump(support: f64, zero_mean: bool) -> Self {
        Kernel {
            shape: KernelShape::Bump { support },
            zero_mean,
            cache: KernelCache::default(),
        }
    }

    pub fn table(entries: Vec<(i64, f64, f64)>) -> Self {
        Kernel {
            shape: KernelShape::Table { entries },
            zero_mean: false,
            cache: KernelCache::default(),
        }
    }

    /// Declared decay order of ψ̂ (the kernel regularity class).
    pub fn decay_order(&self) -> f64 {
        match &self.shape {
            KernelShape::PowerLaw { beta } => *beta,
            // super-polynomial; any finite audit order is safe
            KernelShape::Bump { .. } => 16.0,
            KernelShape::Table { entries } => {
                // steepest order consistent with the table, floored at 1
                let mut best: f64 = 1.0;
                for order in [1.0f64, 2.0, 3.0, 4.0, 6.0, 8.0] {
                    let ok = entries.iter().all(|(n, re, im)| {
                        Complex64::new(*re, *im).norm() <= weight(*n).powf(-order) * 1.000001
                    });
                    if ok {
                        best = order;
                    }
                }
                best
            }
        }
    }

    fn compute(&self, n_cap: usize) -> Vec<Complex64> {
        let mut coeffs = vec![Complex64::default(); 2 * n_cap + 1];
        match &self.shape {
            KernelShape::PowerLaw { beta } => {
                for (i, c) in coeffs.iter_mut().enumerate() {
                    let n = i as i64 - n_cap as i64;
                    *c = Complex64::new((1.0 + (n * n) as f64).powf(-beta / 2.0), 0.0);
                }
            }
            KernelShape::Bump { support } => {
                // ψ(x) ∝ exp(−1/(1 − (2x/sX)²)) on |x| < sX/2, normalized to
                // ψ̂(0) = 1, sampled by midpoint quadrature.
                let m = 8192usize;
                let s = support.clamp(1e-3, 1.0);
                let mut raw = vec![0.0f64; m];
                for (j, r) in raw.iter_mut().enumerate() {
                    let x = (j as f64 + 0.5) / m as f64 - 0.5; // x/X ∈ (−1/2, 1/2)
                    let y = 2.0 * x / s;
                    if y.abs() < 1.0 {
                        *r = (-1.0 / (1.0 - y * y)).exp();
                    }
                }
                let mean: f64 = raw.iter().sum::<f64>() / m as f64;
                for (i, c) in coeffs.iter_mut().enumerate() {
                    let n = i as i64 - n_cap as i64;
                    let mut acc = Complex64::default();
                    for (j, r) in raw.iter().enumerate() {
                        let x = (j as f64 + 0.5) / m as f64 - 0.5;
                        let phase = -2.0 * std::f64::consts::PI * n as f64 * x;
                        acc += Complex64::from_polar(*r, phase);
                    }
                    *c = acc / (mean * m as f64);
                }
            }
            KernelShape::Table { entries } => {
                for (n, re, im) in entries {
                    if n.unsigned_abs() as usize <= n_cap {
                        coeffs[(n + n_cap as i64) as usize] = Complex64::new(*re, *im);
                    }
                }
            }
        }
        if self.zero_mean {
            coeffs[n_cap] = Complex64::default();
        }
        coeffs
    }

    /// ψ̂ over [−n_cap, n_cap], memoized.
    pub fn coeffs(&self, n_cap: usize) -> Arc<Vec<Complex64>> {
        let mut cache = self.cache.0.lock().unwrap();
        cache
            .entry(n_cap)
            .or_insert_with(|| Arc::new(self.compute(n_cap)))
            .clone()
    }

    /// Reality (ψ̂(−n) = conj ψ̂(n)) and declared decay |ψ̂(n)| ≤ K·w(n)^(−order);
    /// returns the witnessed constant K.
    pub fn validate(&self, n_cap: usize) -> Result<f64> {
        let coeffs = self.coeffs(n_cap);
        let order = self.decay_order();
        let mut bound: f64 = 0.0;
        for i in 0..coeffs.len() {
            let n = i as i64 - n_cap as i64;
            let mirrored = coeffs[(-n + n_cap as i64) as usize];
            if (coeffs[i] - mirrored.conj()).norm() > 1e-12 {
                return Err(Error::Config(format!(
                    "kernel is not real: coefficient at n = {n} breaks conjugate symmetry"
                )));
            }
            if !coeffs[i].norm().is_finite() {
                return Err(Error::Config("kernel has non-finite coefficients".into()));
            }
            bound = bound.max(coeffs[i].norm() * weight(n).powf(order));
        }
        Ok(bound)
    }
}

/// Pointwise nonlinear profile. For Schrödinger-like fields the argument is
/// s = |u∗ψ|²; for wave-like fields it is the smoothed field value itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Profile {
    Zero,
    /// Σ_j coeffs[j]·s^j.
    Polynomial { coeffs: Vec<f64> },
    /// −amp·cos(v): the sine-Gordon shape, slope amp·sin(v).
    SineGordon { amp: f64 },
    /// (Σ_j coeffs[j]·s^j)·exp(−(s/scale)²).
    GaussianDamped { coeffs: Vec<f64>, scale: f64 },
}

impl Profile {
    pub fn value(&self, s: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Polynomial { coeffs } => horner(coeffs, s),
            Profile::SineGordon { amp } => -amp * s.cos(),
            Profile::GaussianDamped { coeffs, scale } => {
                horner(coeffs, s) * (-(s / scale).powi(2)).exp()
            }
        }
    }

    /// ∂/∂s of `value`.
    pub fn slope(&self, s: f64) -> f64 {
        match self {
            Profile::Zero => 0.0,
            Profile::Polynomial { coeffs } => horner_deriv(coeffs, s),
            Profile::SineGordon { amp } => amp * s.sin(),
            Profile::GaussianDamped { coeffs, scale } => {
                let e = (-(s / scale).powi(2)).exp();
                e * (horner_deriv(coeffs, s) - 2.0 * s / (scale * scale) * horner(coeffs, s))
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Profile::Zero => true,
            Profile::Polynomial { coeffs } | Profile::GaussianDamped { coeffs, .. } => {
                coeffs.iter().all(|c| *c == 0.0)
            }
            Profile::SineGordon { amp } => *amp == 0.0,
        }
    }

    /// Spot check: derivatives up to order 4 stay finite and moderate on the
    /// sampled range (central differences on a coarse ladder).
    pub fn validate(&self, range: f64) -> Result<()> {
        let h = 1e-2 * range.max(1.0);
        for i in -20..=20 {
            let s = range * i as f64 / 20.0;
            let stencil: Vec<f64> = (-2..=2).map(|k| self.value(s + k as f64 * h)).collect();
            let d4 = (stencil[0] - 4.0 * stencil[1] + 6.0 * stencil[2] - 4.0 * stencil[3]
                + stencil[4])
                / h.powi(4);
            if !d4.is_finite() || d4.abs() > 1e9 {
                return Err(Error::Config(format!(
                    "profile derivative blows up near s = {s}"
                )));
            }
        }
        Ok(())
    }
}

fn horner(coeffs: &[f64], s: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
}

fn horner_deriv(coeffs: &[f64], s: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(0.0, |acc, (j, c)| acc * s + j as f64 * c)
}

/// T-periodic scalar modulation of the profile term:
/// a0 + ac·cos(2πt/T) + as·sin(2πt/T).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeModulation {
    pub constant: f64,
    #[serde(default)]
    pub cos_coeff: f64,
    #[serde(default)]
    pub sin_coeff: f64,
}

impl Default for TimeModulation {
    fn default() -> Self {
        TimeModulation {
            constant: 1.0,
            cos_coeff: 0.0,
            sin_coeff: 0.0,
        }
    }
}

impl TimeModulation {
    pub fn at(&self, t: f64, period: f64) -> f64 {
        let w = 2.0 * std::f64::consts::PI * t / period;
        self.constant + self.cos_coeff * w.cos() + self.sin_coeff * w.sin()
    }
}

/// Exterior potential c_t as sparse space-time coefficients ĉ(p, n) in the
/// physical temporal convention e^{i2πpt/T}.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Potential {
    pub entries: Vec<PotentialEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialEntry {
    pub p: i64,
    pub n: i64,
    pub re: f64,
    pub im: f64,
}

impl Potential {
    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.re == 0.0 && e.im == 0.0)
    }

    pub fn forces_mean_mode(&self) -> bool {
        self.entries
            .iter()
            .any(|e| e.n == 0 && (e.re != 0.0 || e.im != 0.0))
    }

    /// Slice ĉ_t(n) = Σ_p ĉ(p,n)·e^{i2πpt/T}.
    pub fn slice(&self, t: f64, n_cap: usize, params: &Params) -> SpectralField {
        let mut field = SpectralField::zeros(n_cap, params);
        let omega = 2.0 * std::f64::consts::PI / params.period_t;
        for e in &self.entries {
            if e.n.unsigned_abs() as usize <= n_cap {
                let rot = Complex64::from_polar(1.0, omega * e.p as f64 * t);
                let add = Complex64::new(e.re, e.im) * rot;
                field.set(e.n, field.get(e.n) + add);
            }
        }
        field
    }

    pub fn max_p(&self) -> i64 {
        self.entries.iter().map(|e| e.p.abs()).max().unwrap_or(0)
    }
}

/// Full description of a nonlinearity F_t.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonlinearitySpec {
    pub kernel: Kernel,
    pub profile: Profile,
    #[serde(default)]
    pub modulation: TimeModulation,
    #[serde(default)]
    pub potential: Potential,
    /// Plateau radius R of the scale-ball cutoff χ(|u|²_{−h}); `None` leaves
    /// the nonlinearity unwrapped.
    #[serde(default)]
    pub cutoff_radius: Option<f64>,
    /// Overall amplitude ε ≥ 0 multiplying profile and potential alike.
    pub amplitude: f64,
    /// Collocation override; default is 4·(2N+1).
    #[serde(default)]
    pub grid_points: Option<usize>,
}

impl NonlinearitySpec {
    pub fn zero() -> Self {
        NonlinearitySpec {
            kernel: Kernel::power_law(6.0, false),
            profile: Profile::Zero,
            modulation: TimeModulation::default(),
            potential: Potential::default(),
            cutoff_radius: None,
            amplitude: 0.0,
            grid_points: None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.amplitude == 0.0 || (self.profile.is_zero() && self.potential.is_zero())
    }

    pub fn validate(&self, n_cap: usize) -> Result<()> {
        if self.amplitude < 0.0 {
            return Err(Error::Config("amplitude must be nonnegative".into()));
        }
        self.kernel.validate(n_cap)?;
        self.profile.validate(4.0)?;
        if let Some(r) = self.cutoff_radius {
            if !(r > 0.0) {
                return Err(Error::Config("cutoff radius must be positive".into()));
            }
        }
        let _ = self.grid_size(n_cap)?;
        Ok(())
    }

    pub fn grid_size(&self, n_cap: usize) -> Result<usize> {
        let m = self
            .grid_points
            .unwrap_or_else(|| grid::default_grid_size(n_cap));
        let required = grid::min_quadrature_size(n_cap);
        if m < required {
            return Err(Error::GridUndersized {
                points: m,
                modes: 2 * n_cap + 1,
                required,
            });
        }
        Ok(m)
    }
}

/// Returns a copy with the scale-ball cutoff enabled at radius R.
pub fn cutoff_wrap(spec: &NonlinearitySpec, radius: f64) -> NonlinearitySpec {
    let mut wrapped = spec.clone();
    wrapped.cutoff_radius = Some(radius);
    wrapped
}

/// The cutoff ramp: 1 on [0, R], 0 on [R+1, ∞), cubic in between
/// (slope within [−1.5, 0]).
pub fn chi(x: f64, radius: f64) -> f64 {
    if x <= radius {
        1.0
    } else if x >= radius + 1.0 {
        0.0
    } else {
        let y = x - radius;
        1.0 - y * y * (3.0 - 2.0 * y)
    }
}

pub fn chi_prime(x: f64, radius: f64) -> f64 {
    if x <= radius || x >= radius + 1.0 {
        0.0
    } else {
        let y = x - radius;
        -6.0 * y * (1.0 - y)
    }
}

/// Coefficient-wise circle convolution (u∗ψ)^(n) = û(n)·ψ̂(n).
pub fn convolve(u: &SpectralField, spec: &NonlinearitySpec) -> SpectralField {
    let psi = spec.kernel.coeffs(u.n_cap());
    let coeffs = u
        .coeffs()
        .iter()
        .zip(psi.iter())
        .map(|(a, b)| a * b)
        .collect();
    SpectralField::from_coeffs(coeffs, u.params())
}

/// Level restriction: zero out the modes beyond |n| ≤ k.
fn restrict(u: &SpectralField, level: Option<usize>) -> Result<SpectralField> {
    match level {
        None => Ok(u.clone()),
        Some(k) => {
            let (head, _) = u.truncate(k)?;
            Ok(head.embed(u.n_cap()))
        }
    }
}

/// Packed wave-pair decode: exponential-basis coefficients of the (field,
/// momentum) components. Both are hermitian, so the physical grids are real.
pub fn wave_components(u: &SpectralField) -> (Vec<Complex64>, Vec<Complex64>) {
    let n_cap = u.n_cap();
    let mut phi = vec![Complex64::default(); 2 * n_cap + 1];
    let mut pi = vec![Complex64::default(); 2 * n_cap + 1];
    let at = |n: i64| u.get(n);
    phi[n_cap] = Complex64::new(std::f64::consts::SQRT_2 * at(0).re, 0.0);
    pi[n_cap] = Complex64::new(-std::f64::consts::SQRT_2 * at(0).im, 0.0);
    for k in 1..=n_cap as i64 {
        let wt = 1.0 / (k as f64).sqrt();
        let c_cos = at(-k).re * wt;
        let c_sin = at(k).re * wt;
        let d_cos = -at(-k).im * wt;
        let d_sin = -at(k).im * wt;
        let idx_p = (k + n_cap as i64) as usize;
        let idx_m = (-k + n_cap as i64) as usize;
        phi[idx_p] = Complex64::new(c_cos, -c_sin);
        phi[idx_m] = Complex64::new(c_cos, c_sin);
        pi[idx_p] = Complex64::new(d_cos, -d_sin);
        pi[idx_m] = Complex64::new(d_cos, d_sin);
    }
    (phi, pi)
}

/// Adjoint of the field-component decode: packs a real function q (hermitian
/// coefficients q̂) into gradient coefficients so that
/// ⟨pack(q), v⟩ = (1/2π)∫ q·φ_v dx for every direction v.
fn pack_wave_gradient(q_hat: &[Complex64], n_cap: usize, period_x: f64) -> Vec<Complex64> {
    let scale = period_x / (2.0 * std::f64::consts::PI);
    let mut out = vec![Complex64::default(); 2 * n_cap + 1];
    out[n_cap] = Complex64::new(scale * std::f64::consts::SQRT_2 * q_hat[n_cap].re, 0.0);
    for k in 1..=n_cap as i64 {
        let wt = 1.0 / (k as f64).sqrt();
        let qk = q_hat[(k + n_cap as i64) as usize];
        // cos component feeds n = −k, sin component feeds n = +k
        out[(-k + n_cap as i64) as usize] = Complex64::new(2.0 * scale * wt * qk.re, 0.0);
        out[(k + n_cap as i64) as usize] = Complex64::new(-2.0 * scale * wt * qk.im, 0.0);
    }
    out
}

struct GridContext {
    m: usize,
    psi: Arc<Vec<Complex64>>,
}

impl GridContext {
    fn new(spec: &NonlinearitySpec, n_cap: usize) -> Result<Self> {
        Ok(GridContext {
            m: spec.grid_size(n_cap)?,
            psi: spec.kernel.coeffs(n_cap),
        })
    }
}

/// Value of the unwrapped nonlinearity (profile + potential, no cutoff).
fn eval_base(u: &SpectralField, t: f64, spec: &NonlinearitySpec) -> Result<f64> {
    let params = u.params().clone();
    let n_cap = u.n_cap();
    let ctx = GridContext::new(spec, n_cap)?;
    let modulation = spec.modulation.at(t, params.period_t);
    let x_period = params.period_x;

    let value = match params.kind {
        EquationKind::NlsLike => {
            let smoothed: Vec<Complex64> = u
                .coeffs()
                .iter()
                .zip(ctx.psi.iter())
                .map(|(a, b)| a * b)
                .collect();
            let w_grid = grid::synthesize(&smoothed, ctx.m);
            let mut acc = 0.0;
            for w in &w_grid {
                acc += spec.profile.value(w.norm_sqr());
            }
            let profile_term = 0.5 * x_period * acc / ctx.m as f64 * modulation;
            let pot = spec.potential.slice(t, n_cap, &params);
            profile_term + pot.inner(u)
        }
        EquationKind::NlwLike => {
            let (phi_hat, _) = wave_components(u);
            let smoothed: Vec<Complex64> = phi_hat
                .iter()
                .zip(ctx.psi.iter())
                .map(|(a, b)| a * b)
                .collect();
            let w_grid = grid::synthesize(&smoothed, ctx.m);
            let phi_grid = grid::synthesize(&phi_hat, ctx.m);
            let pot = spec.potential.slice(t, n_cap, &params);
            let (c_hat, _) = wave_components(&pot);
            let c_grid = grid::synthesize(&c_hat, ctx.m);
            let mut acc = 0.0;
            for j in 0..ctx.m {
                acc +=
                    spec.profile.value(w_grid[j].re) * modulation + c_grid[j].re * phi_grid[j].re;
            }
            x_period * acc / (2.0 * std::f64::consts::PI * ctx.m as f64)
        }
    };
    Ok(spec.amplitude * value)
}

/// Gradient of the unwrapped nonlinearity.
fn grad_base(u: &SpectralField, t: f64, spec: &NonlinearitySpec) -> Result<SpectralField> {
    let params = u.params().clone();
    let n_cap = u.n_cap();
    let ctx = GridContext::new(spec, n_cap)?;
    let modulation = spec.modulation.at(t, params.period_t);
    let x_period = params.period_x;

    let mut out = match params.kind {
        EquationKind::NlsLike => {
            let smoothed: Vec<Complex64> = u
                .coeffs()
                .iter()
                .zip(ctx.psi.iter())
                .map(|(a, b)| a * b)
                .collect();
            let w_grid = grid::synthesize(&smoothed, ctx.m);
            let g_grid: Vec<Complex64> = w_grid
                .iter()
                .map(|w| w * (spec.profile.slope(w.norm_sqr()) * modulation))
                .collect();
            let g_hat = grid::analyze(&g_grid, n_cap);
            let mut coeffs: Vec<Complex64> = g_hat
                .iter()
                .zip(ctx.psi.iter())
                .map(|(g, psi)| x_period * g * psi.conj())
                .collect();
            let pot = spec.potential.slice(t, n_cap, &params);
            for (c, p) in coeffs.iter_mut().zip(pot.coeffs().iter()) {
                *c += p;
            }
            SpectralField::from_coeffs(coeffs, &params)
        }
        EquationKind::NlwLike => {
            let (phi_hat, _) = wave_components(u);
            let smoothed: Vec<Complex64> = phi_hat
                .iter()
                .zip(ctx.psi.iter())
                .map(|(a, b)| a * b)
                .collect();
            let w_grid = grid::synthesize(&smoothed, ctx.m);
            let q_grid: Vec<Complex64> = w_grid
                .iter()
                .map(|w| Complex64::new(spec.profile.slope(w.re) * modulation, 0.0))
                .collect();
            let mut q_hat = grid::analyze(&q_grid, n_cap);
            // smooth back (q ← q∗ψ̌), then add the exterior potential
            for (q, psi) in q_hat.iter_mut().zip(ctx.psi.iter()) {
                *q *= psi.conj();
            }
            let pot = spec.potential.slice(t, n_cap, &params);
            let (c_hat, _) = wave_components(&pot);
            for (q, c) in q_hat.iter_mut().zip(c_hat.iter()) {
                *q += c;
            }
            SpectralField::from_coeffs(pack_wave_gradient(&q_hat, n_cap, x_period), &params)
        }
    };
    for c in out.coeffs_mut() {
        *c *= spec.amplitude;
    }
    Ok(out)
}

/// F_t(u), optionally restricted to the level-k subspace (F^k(u) = F(u^k)).
pub fn eval_f(
    u: &SpectralField,
    t: f64,
    spec: &NonlinearitySpec,
    level: Option<usize>,
) -> Result<f64> {
    let u_eff = restrict(u, level)?;
    let base = eval_base(&u_eff, t, spec)?;
    Ok(match spec.cutoff_radius {
        None => base,
        Some(radius) => {
            let rho = u_eff.scale_norm(-u.params().smoothing_order).powi(2);
            chi(rho, radius) * base
        }
    })
}

/// ∇F_t(u) in the coefficient pairing; supported in [−k, k] when a level is
/// given. The cutoff contributes χ·∇F̃ + 2χ′·F̃·(w^{−2h}-weighted u).
pub fn grad_f(
    u: &SpectralField,
    t: f64,
    spec: &NonlinearitySpec,
    level: Option<usize>,
) -> Result<SpectralField> {
    let u_eff = restrict(u, level)?;
    let mut grad = grad_base(&u_eff, t, spec)?;
    if let Some(radius) = spec.cutoff_radius {
        let h = u.params().smoothing_order;
        let rho = u_eff.scale_norm(-h).powi(2);
        let c = chi(rho, radius);
        let cp = chi_prime(rho, radius);
        if cp != 0.0 {
            let base = eval_base(&u_eff, t, spec)?;
            let n_cap = u_eff.n_cap();
            for (i, g) in grad.coeffs_mut().iter_mut().enumerate() {
                let n = i as i64 - n_cap as i64;
                let wn = weight(n).powf(-2.0 * h);
                *g = c * *g + 2.0 * cp * base * wn * u_eff.coeffs()[i];
            }
        } else if c != 1.0 {
            for g in grad.coeffs_mut() {
                *g *= c;
            }
        }
    }
    if let Some(k) = level {
        let n_cap = grad.n_cap();
        for i in 0..grad.coeffs().len() {
            let n = i as i64 - n_cap as i64;
            if n.unsigned_abs() as usize > k {
                grad.coeffs_mut()[i] = Complex64::default();
            }
        }
    }
    Ok(grad)
}

/// G_t = F_t ∘ φ^A_t evaluated at u.
pub fn eval_g(
    u: &SpectralField,
    t: f64,
    spec: &NonlinearitySpec,
    level: Option<usize>,
) -> Result<f64> {
    eval_f(&u.free_flow(t), t, spec, level)
}

/// ∇G_t(u) = φ^A_{−t} ∇F_t(φ^A_t u); the flow is unitary so the adjoint is
/// the inverse flow.
pub fn grad_g(
    u: &SpectralField,
    t: f64,
    spec: &NonlinearitySpec,
    level: Option<usize>,
) -> Result<SpectralField> {
    let flowed = u.free_flow(t);
    let g = grad_f(&flowed, t, spec, level)?;
    Ok(g.free_flow(-t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ModelParams;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn nls_params() -> Params {
        let x = 2.0 * std::f64::consts::PI;
        let t = 2.0 * std::f64::consts::PI * 1.618033988749895;
        Arc::new(ModelParams::new(x, t, 2, 5.5, 2.0, EquationKind::NlsLike).unwrap())
    }

    fn nlw_params() -> Params {
        let x = 2.0 * std::f64::consts::PI;
        let t = 2.0 * std::f64::consts::PI * 1.618033988749895;
        Arc::new(ModelParams::new(x, t, 1, 3.5, 2.0, EquationKind::NlwLike).unwrap())
    }

    fn random_field(n_cap: usize, params: &Params, seed: u64, scale: f64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..2 * n_cap + 1)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale)
            .collect();
        SpectralField::from_coeffs(coeffs, params)
    }

    fn cubic_spec(amplitude: f64) -> NonlinearitySpec {
        NonlinearitySpec {
            kernel: Kernel::power_law(6.0, false),
            profile: Profile::Polynomial {
                coeffs: vec![0.0, 0.0, 0.5],
            },
            modulation: TimeModulation::default(),
            potential: Potential::default(),
            cutoff_radius: None,
            amplitude,
            grid_points: None,
        }
    }

    #[test]
    fn convolve_projector_and_identity() {
        let params = nls_params();
        let u = random_field(8, &params, 3, 1.0);
        // averaging projector
        let mut spec = cubic_spec(1.0);
        spec.kernel = Kernel::table(vec![(0, 1.0, 0.0)]);
        let avg = convolve(&u, &spec);
        for (n, c) in avg.modes() {
            if n == 0 {
                assert_eq!(c, u.get(0));
            } else {
                assert_eq!(c, Complex64::default());
            }
        }
        // identity kernel on the window
        let entries: Vec<(i64, f64, f64)> = (-8..=8).map(|n| (n, 1.0, 0.0)).collect();
        spec.kernel = Kernel::table(entries);
        let same = convolve(&u, &spec);
        assert!(same.sub(&u).l2_norm() == 0.0);
    }

    #[test]
    fn convolve_matches_quadrature_oracle() {
        // direct collocation convolution integral vs coefficient product
        let params = nls_params();
        let u = random_field(6, &params, 11, 1.0);
        let spec = cubic_spec(1.0);
        let conv = convolve(&u, &spec);
        let m = 256;
        let psi = spec.kernel.coeffs(6);
        let u_grid = grid::synthesize(u.coeffs(), m);
        let psi_grid = grid::synthesize(&psi, m);
        let conv_grid = grid::synthesize(conv.coeffs(), m);
        for j in (0..m).step_by(37) {
            let mut acc = Complex64::default();
            for l in 0..m {
                let diff = (j + m - l) % m;
                acc += u_grid[l] * psi_grid[diff];
            }
            acc /= m as f64; // (1/X)∫ … dy with dy = X/m
            assert!((acc - conv_grid[j]).norm() < 1e-10 * (1.0 + acc.norm()));
        }
    }

    #[test]
    fn eval_f_trivial_cases() {
        let params = nls_params();
        let u = random_field(8, &params, 5, 1.0);
        // f ≡ 0, c ≡ 0
        let mut spec = cubic_spec(1.0);
        spec.profile = Profile::Zero;
        assert_eq!(eval_f(&u, 0.3, &spec, None).unwrap(), 0.0);
        // u = 0 with a pure-profile nonlinearity built from s = |u∗ψ|²
        let zero = SpectralField::zeros(8, &params);
        let spec = NonlinearitySpec {
            profile: Profile::Polynomial {
                coeffs: vec![0.0, 1.0],
            },
            modulation: TimeModulation {
                constant: 0.0,
                cos_coeff: 1.0,
                sin_coeff: 0.0,
            },
            ..cubic_spec(1.0)
        };
        assert_eq!(eval_f(&zero, 0.77, &spec, None).unwrap(), 0.0);
    }

    #[test]
    fn eval_f_parseval_closed_form() {
        // f(s) = s: value is (X/2)·Σ|û(n)ψ̂(n)|²
        let params = nls_params();
        let mut u = SpectralField::zeros(8, &params);
        u.set(1, Complex64::new(1.0, 0.0));
        u.set(2, Complex64::new(1.0, 0.0));
        let spec = NonlinearitySpec {
            profile: Profile::Polynomial {
                coeffs: vec![0.0, 1.0],
            },
            ..cubic_spec(1.0)
        };
        let x = params.period_x;
        let expected = 0.5 * x * ((1.0f64 / 8.0).powi(2) + (1.0f64 / 125.0).powi(2));
        assert_relative_eq!(
            eval_f(&u, 0.0, &spec, None).unwrap(),
            expected,
            epsilon = 1e-11
        );
    }

    #[test]
    fn grid_undersize_rejected() {
        let params = nls_params();
        let u = random_field(8, &params, 5, 1.0);
        let mut spec = cubic_spec(1.0);
        spec.grid_points = Some(20); // below 2·(2·8+1) = 34
        assert!(matches!(
            eval_f(&u, 0.0, &spec, None),
            Err(Error::GridUndersized { .. })
        ));
    }

    fn fd_check(
        u: &SpectralField,
        t: f64,
        spec: &NonlinearitySpec,
        level: Option<usize>,
        seed: u64,
        tol: f64,
    ) {
        let params = u.params().clone();
        let g = grad_f(u, t, spec, level).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..4 {
            let v = random_field(u.n_cap(), &params, rng.gen(), 1.0);
            let eps = 1e-5;
            let up = u.add(&v.scaled(Complex64::new(eps, 0.0)));
            let um = u.sub(&v.scaled(Complex64::new(eps, 0.0)));
            let fd = (eval_f(&up, t, spec, level).unwrap() - eval_f(&um, t, spec, level).unwrap())
                / (2.0 * eps);
            let ip = g.inner(&v);
            assert!(
                (fd - ip).abs() <= tol * ip.abs().max(1e-10),
                "fd {fd} vs inner {ip}"
            );
        }
    }

    #[test]
    fn gradient_matches_finite_differences_nls() {
        let params = nls_params();
        let spec = cubic_spec(0.7);
        for seed in 0..8 {
            let u = random_field(10, &params, 100 + seed, 0.8);
            fd_check(&u, 0.4, &spec, None, 200 + seed, 1e-6);
            fd_check(&u, 0.4, &spec, Some(5), 300 + seed, 1e-6);
        }
    }

    #[test]
    fn gradient_matches_finite_differences_nlw() {
        let params = nlw_params();
        let spec = NonlinearitySpec {
            profile: Profile::SineGordon { amp: 0.8 },
            potential: Potential {
                entries: vec![PotentialEntry {
                    p: 1,
                    n: 1,
                    re: 0.3,
                    im: -0.1,
                }],
            },
            ..cubic_spec(0.9)
        };
        for seed in 0..8 {
            let u = random_field(10, &params, 400 + seed, 0.8);
            fd_check(&u, 1.3, &spec, None, 500 + seed, 1e-6);
        }
    }

    #[test]
    fn linear_potential_gradient_is_potential_field() {
        let params = nls_params();
        let spec = NonlinearitySpec {
            profile: Profile::Zero,
            potential: Potential {
                entries: vec![
                    PotentialEntry {
                        p: 0,
                        n: 1,
                        re: 0.5,
                        im: 0.25,
                    },
                    PotentialEntry {
                        p: 2,
                        n: -3,
                        re: -0.125,
                        im: 0.0,
                    },
                ],
            },
            ..cubic_spec(1.0)
        };
        for t in [0.0, 0.7, 3.1] {
            let u = random_field(8, &params, 77, 1.0);
            let g = grad_f(&u, t, &spec, None).unwrap();
            let c = spec.potential.slice(t, 8, &params);
            assert!(g.sub(&c).l2_norm() < 1e-14);
            // gradient independent of u
            let g2 = grad_f(&random_field(8, &params, 78, 2.0), t, &spec, None).unwrap();
            assert!(g.sub(&g2).l2_norm() < 1e-14);
        }
    }

    #[test]
    fn nlw_reconstruction_is_real() {
        let params = nlw_params();
        let u = random_field(12, &params, 9, 1.4);
        let (phi_hat, pi_hat) = wave_components(&u);
        for hat in [&phi_hat, &pi_hat] {
            let g = grid::synthesize(hat, 128);
            for v in g {
                assert!(v.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cutoff_plateau_and_support() {
        let params = nls_params();
        let spec = cubic_spec(0.7);
        let h = params.smoothing_order;
        let radius = 2.0;
        let wrapped = cutoff_wrap(&spec, radius);

        // inside the plateau: wrapped ≡ unwrapped
        let small = random_field(8, &params, 21, 0.1);
        assert!(small.scale_norm(-h).powi(2) < radius);
        assert_eq!(
            eval_f(&small, 0.2, &wrapped, None).unwrap(),
            eval_f(&small, 0.2, &spec, None).unwrap()
        );
        let gw = grad_f(&small, 0.2, &wrapped, None).unwrap();
        let gu = grad_f(&small, 0.2, &spec, None).unwrap();
        assert!(gw.sub(&gu).l2_norm() == 0.0);

        // far outside: exactly zero
        let mut big = SpectralField::zeros(8, &params);
        big.set(0, Complex64::new(10.0, 0.0)); // w(0) = 1, so |u|²_{−h} = 100
        assert!(big.scale_norm(-h).powi(2) >= radius + 1.0);
        assert_eq!(eval_f(&big, 0.2, &wrapped, None).unwrap(), 0.0);
        assert_eq!(grad_f(&big, 0.2, &wrapped, None).unwrap().l2_norm(), 0.0);

        // in the ramp: finite differences still match (χ′ term present)
        let mut ramp = SpectralField::zeros(8, &params);
        ramp.set(0, Complex64::new((radius + 0.5f64).sqrt(), 0.0));
        let rho = ramp.scale_norm(-h).powi(2);
        assert!(rho > radius && rho < radius + 1.0);
        fd_check(&ramp, 0.2, &wrapped, None, 23, 1e-6);
    }

    #[test]
    fn chi_slope_bounds() {
        let radius = 3.0;
        let mut max_slope: f64 = 0.0;
        for i in 0..=10_000 {
            let x = radius - 0.5 + 2.0 * i as f64 / 10_000.0;
            max_slope = max_slope.max(chi_prime(x, radius).abs());
            assert!(chi_prime(x, radius) <= 0.0);
        }
        assert!(max_slope <= 2.0);
        assert_eq!(chi(radius, radius), 1.0);
        assert_eq!(chi(radius + 1.0, radius), 0.0);
    }

    #[test]
    fn grad_g_unitarity_and_t0() {
        let params = nls_params();
        let spec = cubic_spec(0.7);
        let u = random_field(10, &params, 31, 0.9);
        let g0 = grad_g(&u, 0.0, &spec, None).unwrap();
        let f0 = grad_f(&u, 0.0, &spec, None).unwrap();
        assert!(g0.sub(&f0).l2_norm() == 0.0);
        for t in [0.3, 1.9] {
            let gg = grad_g(&u, t, &spec, None).unwrap();
            let gf = grad_f(&u.free_flow(t), t, &spec, None).unwrap();
            assert_relative_eq!(gg.l2_norm(), gf.l2_norm(), max_relative = 1e-13);
        }
    }

    #[test]
    fn grad_g_matches_finite_differences_of_eval_g() {
        let params = nls_params();
        let spec = cubic_spec(0.6);
        let u = random_field(10, &params, 41, 0.8);
        let t = 1.1;
        let g = grad_g(&u, t, &spec, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..5 {
            let v = random_field(10, &params, rng.gen(), 1.0);
            let eps = 1e-5;
            let fd = (eval_g(&u.add(&v.scaled(eps.into())), t, &spec, None).unwrap()
                - eval_g(&u.sub(&v.scaled(eps.into())), t, &spec, None).unwrap())
                / (2.0 * eps);
            let ip = g.inner(&v);
            assert!((fd - ip).abs() <= 1e-6 * ip.abs().max(1e-10));
        }
    }

    #[test]
    fn gradient_coefficients_inherit_kernel_decay() {
        // audit statistic max_n |ĝ(n)|·w(n)^{2β−1} stays bounded over random u
        let params = nls_params();
        let spec = cubic_spec(1.0);
        let beta = 6.0;
        let audit_order = 2.0 * beta - 1.0;
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let u = random_field(16, &params, 600 + seed, 1.0);
            let g = grad_f(&u, 0.0, &spec, None).unwrap();
            for (n, c) in g.modes() {
                worst = worst.max(c.norm() * weight(n).powf(audit_order));
            }
        }
        assert!(worst.is_finite());
        assert!(worst < 1e3, "audit statistic {worst} looks unbounded");
    }

    #[test]
    fn truncation_levels_converge() {
        let params = nls_params();
        let spec = cubic_spec(1.0);
        for seed in 0..5 {
            let u = random_field(16, &params, 700 + seed, 1.0);
            let full = grad_f(&u, 0.0, &spec, None).unwrap();
            let mut last = f64::INFINITY;
            for k in [2usize, 4, 8, 12, 16] {
                let leveled = grad_f(&u, 0.0, &spec, Some(k)).unwrap();
                let err = leveled.sub(&full).l2_norm();
                assert!(err <= last + 1e-12, "k = {k}: {err} after {last}");
                last = err;
            }
            assert!(last < 1e-12);
        }
    }

    #[test]
    fn gradient_bounded_over_random_inputs() {
        let params = nls_params();
        let spec = NonlinearitySpec {
            profile: Profile::GaussianDamped {
                coeffs: vec![0.0, 1.0],
                scale: 2.0,
            },
            ..cubic_spec(1.0)
        };
        let mut sup8: f64 = 0.0;
        let mut sup16: f64 = 0.0;
        for seed in 0..1000 {
            let u8 = random_field(8, &params, 900 + seed, 1.0);
            sup8 = sup8.max(grad_f(&u8, 0.0, &spec, None).unwrap().l2_norm());
        }
        for seed in 0..200 {
            let u16 = random_field(16, &params, 2900 + seed, 1.0);
            sup16 = sup16.max(grad_f(&u16, 0.0, &spec, None).unwrap().l2_norm());
        }
        assert!(sup8.is_finite() && sup16.is_finite());
        // resolution doubling does not blow the bound up
        assert!(sup16 < 4.0 * sup8 + 1.0, "sup8 {sup8} sup16 {sup16}");
    }

    #[test]
    fn wrapped_support_bound_at_levels() {
        // F^k vanishes once |u^k|₀ > k^h·√(R+1)
        let params = nls_params();
        let radius = 1.5;
        let spec = cutoff_wrap(&cubic_spec(1.0), radius);
        let h = params.smoothing_order;
        let k = 4usize;
        let mut u = SpectralField::zeros(8, &params);
        let loud = (k as f64).powf(h) * (radius + 1.0).sqrt() * 1.05;
        u.set(k as i64, Complex64::new(loud, 0.0));
        assert!(u.truncate(k).unwrap().0.l2_norm() > (k as f64).powf(h) * (radius + 1.0).sqrt());
        assert_eq!(eval_f(&u, 0.0, &spec, Some(k)).unwrap(), 0.0);
    }
}
