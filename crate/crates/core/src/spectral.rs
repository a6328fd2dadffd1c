//! Spectral fields on the circle: single-time coefficient vectors, space-time
//! coefficient tensors, scale norms, truncation, the exact free flow and the
//! gauge bookkeeping between twisted and physical periodicity.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid;
use crate::params::ModelParams;
use crate::util::pairwise_sum;

pub type Params = Arc<ModelParams>;

/// Scale-norm weight w(n) = max(|n|, 1). The n = 0 line would make the
/// paper-style |n|^σ weights degenerate, so constants are weighted like the
/// first mode in every scale.
pub fn weight(n: i64) -> f64 {
    n.unsigned_abs().max(1) as f64
}

/// Temporal exponent convention of a space-time field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gauge {
    /// Mode (p, n) evolves like e^{i(2πp/T − a n^d)t}; the field obeys
    /// u(t+T) = φ^A_{−T} u(t) by construction.
    Twisted,
    /// Mode (p, n) evolves like e^{i2πpt/T}; the field is T-periodic.
    Physical,
}

/// State of the PDE at one time: coefficients û(n), n ∈ [−N, N].
#[derive(Debug, Clone)]
pub struct SpectralField {
    n_cap: usize,
    coeffs: Vec<Complex64>,
    params: Params,
}

impl SpectralField {
    pub fn zeros(n_cap: usize, params: &Params) -> Self {
        SpectralField {
            n_cap,
            coeffs: vec![Complex64::default(); 2 * n_cap + 1],
            params: params.clone(),
        }
    }

    pub fn from_coeffs(coeffs: Vec<Complex64>, params: &Params) -> Self {
        assert!(coeffs.len() % 2 == 1, "mode window must be symmetric");
        SpectralField {
            n_cap: (coeffs.len() - 1) / 2,
            coeffs,
            params: params.clone(),
        }
    }

    pub fn single_mode(n_cap: usize, n: i64, value: Complex64, params: &Params) -> Self {
        let mut f = Self::zeros(n_cap, params);
        f.set(n, value);
        f
    }

    pub fn n_cap(&self) -> usize {
        self.n_cap
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    fn idx(&self, n: i64) -> usize {
        debug_assert!(n.unsigned_abs() as usize <= self.n_cap);
        (n + self.n_cap as i64) as usize
    }

    pub fn get(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.n_cap {
            Complex64::default()
        } else {
            self.coeffs[self.idx(n)]
        }
    }

    pub fn set(&mut self, n: i64, value: Complex64) {
        let i = self.idx(n);
        self.coeffs[i] = value;
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n_cap = self.n_cap as i64;
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(i, &c)| (i as i64 - n_cap, c))
    }

    /// Scale norm |u|_σ = (Σ_n |û(n)|² w(n)^{2σ})^{1/2}, pairwise-summed.
    pub fn scale_norm(&self, sigma: f64) -> f64 {
        let terms: Vec<f64> = self
            .modes()
            .map(|(n, c)| c.norm_sqr() * weight(n).powf(2.0 * sigma))
            .collect();
        pairwise_sum(&terms).sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.scale_norm(0.0)
    }

    /// Splits into (head, tail): the head keeps modes |n| ≤ k on its own
    /// [−k, k] window, the tail keeps the remaining modes on the original
    /// window. Embedding the head back and adding the tail reconstructs the
    /// field exactly.
    pub fn truncate(&self, k: usize) -> Result<(SpectralField, SpectralField)> {
        if k > self.n_cap {
            return Err(Error::ModeCapOutOfRange {
                requested: k,
                available: self.n_cap,
            });
        }
        let mut head = SpectralField::zeros(k, &self.params);
        let mut tail = SpectralField::zeros(self.n_cap, &self.params);
        for (n, c) in self.modes() {
            if n.unsigned_abs() as usize <= k {
                head.set(n, c);
            } else {
                tail.set(n, c);
            }
        }
        Ok((head, tail))
    }

    /// Zero-padded copy on a wider window.
    pub fn embed(&self, n_cap: usize) -> SpectralField {
        assert!(n_cap >= self.n_cap);
        let mut out = SpectralField::zeros(n_cap, &self.params);
        for (n, c) in self.modes() {
            out.set(n, c);
        }
        out
    }

    /// Exact free flow: mode n is multiplied by e^{+i a n^d t} (signed n^d
    /// for odd operator order). Unitary in every scale norm.
    pub fn free_flow(&self, t: f64) -> SpectralField {
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let n = i as i64 - self.n_cap as i64;
            let phase = self.params.eigenvalue(n) * t;
            *c *= Complex64::from_polar(1.0, phase);
        }
        out
    }

    pub fn add(&self, other: &SpectralField) -> SpectralField {
        assert_eq!(self.n_cap, other.n_cap);
        let coeffs = self
            .coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| a + b)
            .collect();
        SpectralField {
            n_cap: self.n_cap,
            coeffs,
            params: self.params.clone(),
        }
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        assert_eq!(self.n_cap, other.n_cap);
        let coeffs = self
            .coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| a - b)
            .collect();
        SpectralField {
            n_cap: self.n_cap,
            coeffs,
            params: self.params.clone(),
        }
    }

    pub fn scaled(&self, s: Complex64) -> SpectralField {
        let coeffs = self.coeffs.iter().map(|c| c * s).collect();
        SpectralField {
            n_cap: self.n_cap,
            coeffs,
            params: self.params.clone(),
        }
    }

    /// Real inner product Re Σ û(n) conj(v̂(n)); the gradient pairing.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        assert_eq!(self.n_cap, other.n_cap);
        let terms: Vec<f64> = self
            .coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| (a * b.conj()).re)
            .collect();
        pairwise_sum(&terms)
    }
}

/// Candidate periodic orbit (or one s-slice of a connecting curve):
/// coefficients Û(p, n) over (p, n) ∈ [−P, P] × [−N, N].
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    p_cap: usize,
    n_cap: usize,
    gauge: Gauge,
    /// Row-major, p outermost: index (p + P)·(2N+1) + (n + N).
    coeffs: Vec<Complex64>,
    params: Params,
}

impl SpaceTimeField {
    pub fn zeros(p_cap: usize, n_cap: usize, gauge: Gauge, params: &Params) -> Self {
        SpaceTimeField {
            p_cap,
            n_cap,
            gauge,
            coeffs: vec![Complex64::default(); (2 * p_cap + 1) * (2 * n_cap + 1)],
            params: params.clone(),
        }
    }

    pub fn p_cap(&self) -> usize {
        self.p_cap
    }

    pub fn n_cap(&self) -> usize {
        self.n_cap
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn idx(&self, p: i64, n: i64) -> usize {
        debug_assert!(p.unsigned_abs() as usize <= self.p_cap);
        debug_assert!(n.unsigned_abs() as usize <= self.n_cap);
        (p + self.p_cap as i64) as usize * (2 * self.n_cap + 1) + (n + self.n_cap as i64) as usize
    }

    pub fn get(&self, p: i64, n: i64) -> Complex64 {
        if p.unsigned_abs() as usize > self.p_cap || n.unsigned_abs() as usize > self.n_cap {
            Complex64::default()
        } else {
            self.coeffs[self.idx(p, n)]
        }
    }

    pub fn set(&mut self, p: i64, n: i64, value: Complex64) {
        let i = self.idx(p, n);
        self.coeffs[i] = value;
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, i64, Complex64)> + '_ {
        let p_cap = self.p_cap as i64;
        let n_cap = self.n_cap as i64;
        let cols = 2 * self.n_cap + 1;
        self.coeffs.iter().enumerate().map(move |(i, &c)| {
            let p = (i / cols) as i64 - p_cap;
            let n = (i % cols) as i64 - n_cap;
            (p, n, c)
        })
    }

    /// ℓ² norm over all (p, n); the |·|₀ of the solvers.
    pub fn l2_norm(&self) -> f64 {
        let terms: Vec<f64> = self.coeffs.iter().map(|c| c.norm_sqr()).collect();
        pairwise_sum(&terms).sqrt()
    }

    pub fn sub(&self, other: &SpaceTimeField) -> SpaceTimeField {
        assert_eq!(self.p_cap, other.p_cap);
        assert_eq!(self.n_cap, other.n_cap);
        assert_eq!(self.gauge, other.gauge);
        let coeffs = self
            .coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| a - b)
            .collect();
        SpaceTimeField {
            coeffs,
            ..self.clone()
        }
    }

    pub fn add_scaled(&mut self, other: &SpaceTimeField, s: Complex64) {
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        for (a, b) in self.coeffs.iter_mut().zip(other.coeffs.iter()) {
            *a += b * s;
        }
    }

    /// Coefficients are gauge-agnostic data; the flag only changes the
    /// temporal exponent used at evaluation time. Flipping the flag is the
    /// exact slice-wise free-flow conjugation.
    pub fn gauge_transform(&self, target: Gauge) -> SpaceTimeField {
        let mut out = self.clone();
        out.gauge = target;
        out
    }

    /// Time-domain evaluation at t.
    pub fn eval_slice(&self, t: f64) -> SpectralField {
        let mut slice = SpectralField::zeros(self.n_cap, &self.params);
        let omega = 2.0 * std::f64::consts::PI / self.params.period_t;
        for n in -(self.n_cap as i64)..=self.n_cap as i64 {
            let mut acc = Complex64::default();
            for p in -(self.p_cap as i64)..=self.p_cap as i64 {
                let c = self.get(p, n);
                if c != Complex64::default() {
                    acc += c * Complex64::from_polar(1.0, omega * p as f64 * t);
                }
            }
            if self.gauge == Gauge::Twisted {
                acc *= Complex64::from_polar(1.0, -self.params.eigenvalue(n) * t);
            }
            slice.set(n, acc);
        }
        slice
    }

    /// Evaluation on the uniform grid t_j = jT/m, j = 0..m, via FFT in p.
    pub fn eval_on_time_grid(&self, m: usize) -> Vec<SpectralField> {
        assert!(m >= 2 * self.p_cap + 1);
        let cols = 2 * self.n_cap + 1;
        // One length-m synthesis per spatial mode.
        let mut per_n: Vec<Vec<Complex64>> = Vec::with_capacity(cols);
        for ni in 0..cols {
            let col: Vec<Complex64> = (0..2 * self.p_cap + 1)
                .map(|pi| self.coeffs[pi * cols + ni])
                .collect();
            per_n.push(grid::synthesize(&col, m));
        }
        let dt = self.params.period_t / m as f64;
        (0..m)
            .map(|j| {
                let mut slice = SpectralField::zeros(self.n_cap, &self.params);
                for ni in 0..cols {
                    let n = ni as i64 - self.n_cap as i64;
                    let mut v = per_n[ni][j];
                    if self.gauge == Gauge::Twisted {
                        v *= Complex64::from_polar(1.0, -self.params.eigenvalue(n) * dt * j as f64);
                    }
                    slice.coeffs_mut()[ni] = v;
                }
                slice
            })
            .collect()
    }

    /// Inverse of `eval_on_time_grid`: coefficients from slices on the
    /// uniform grid t_j = jT/m. Temporal aliases beyond [−P, P] are
    /// truncated, not folded.
    pub fn from_time_grid(
        slices: &[SpectralField],
        p_cap: usize,
        gauge: Gauge,
        params: &Params,
    ) -> SpaceTimeField {
        let m = slices.len();
        assert!(m >= 2 * p_cap + 1);
        let n_cap = slices[0].n_cap();
        let cols = 2 * n_cap + 1;
        let dt = params.period_t / m as f64;
        let mut out = SpaceTimeField::zeros(p_cap, n_cap, gauge, params);
        for ni in 0..cols {
            let n = ni as i64 - n_cap as i64;
            let twist = params.eigenvalue(n) * dt;
            let col: Vec<Complex64> = (0..m)
                .map(|j| {
                    let mut v = slices[j].coeffs()[ni];
                    if gauge == Gauge::Twisted {
                        v *= Complex64::from_polar(1.0, twist * j as f64);
                    }
                    v
                })
                .collect();
            let coeffs = grid::analyze(&col, p_cap);
            for (pi, &c) in coeffs.iter().enumerate() {
                out.coeffs[pi * cols + ni] = c;
            }
        }
        out
    }

    /// Per-n ℓ² mass over temporal modes: (Σ_p |Û(p,n)|²)^{1/2}.
    pub fn spatial_profile(&self) -> Vec<(i64, f64)> {
        let cols = 2 * self.n_cap + 1;
        (0..cols)
            .map(|ni| {
                let n = ni as i64 - self.n_cap as i64;
                let terms: Vec<f64> = (0..2 * self.p_cap + 1)
                    .map(|pi| self.coeffs[pi * cols + ni].norm_sqr())
                    .collect();
                (n, pairwise_sum(&terms).sqrt())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::EquationKind;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    pub fn test_params(d: u32) -> Params {
        let x = 2.0 * std::f64::consts::PI;
        let t = 2.0 * std::f64::consts::PI * 1.618033988749895;
        Arc::new(
            ModelParams::new(x, t, d, 5.5, 2.0, EquationKind::NlsLike).unwrap(),
        )
    }

    fn random_field(n_cap: usize, params: &Params, seed: u64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let coeffs = (0..2 * n_cap + 1)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        SpectralField::from_coeffs(coeffs, params)
    }

    #[test]
    fn scale_norm_single_modes() {
        let params = test_params(2);
        let u = SpectralField::single_mode(8, 2, Complex64::new(1.0, 0.0), &params);
        assert_relative_eq!(u.scale_norm(3.0), 8.0, max_relative = 1e-15);
        let z0 = SpectralField::single_mode(8, 0, Complex64::new(1.0, 0.0), &params);
        for sigma in [-5.5, -1.0, 0.0, 2.0, 7.0] {
            assert_relative_eq!(z0.scale_norm(sigma), 1.0, max_relative = 1e-15);
        }
    }

    #[test]
    fn scale_norm_against_direct_sum() {
        let params = test_params(2);
        let mut u = SpectralField::zeros(64, &params);
        for n in 1..=64i64 {
            u.set(n, Complex64::new(1.0 / (n * n) as f64, 0.0));
        }
        // independent oracle: plain summation in reverse order
        let mut acc = 0.0;
        for n in (1..=64i64).rev() {
            let c = 1.0 / (n * n) as f64;
            acc += c * c * (n as f64).powf(-2.0);
        }
        assert_relative_eq!(u.scale_norm(-1.0), acc.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn truncate_splits_supports() {
        let params = test_params(2);
        let mut u = SpectralField::zeros(8, &params);
        u.set(-3, Complex64::new(1.0, 0.0));
        u.set(1, Complex64::new(2.0, 0.0));
        u.set(5, Complex64::new(3.0, 0.0));
        let (head, tail) = u.truncate(3).unwrap();
        assert_eq!(head.n_cap(), 3);
        assert_eq!(head.get(-3), Complex64::new(1.0, 0.0));
        assert_eq!(head.get(1), Complex64::new(2.0, 0.0));
        assert_eq!(tail.get(5), Complex64::new(3.0, 0.0));
        assert_eq!(tail.get(1), Complex64::default());
        // k = N leaves an empty tail
        let (_, tail) = u.truncate(8).unwrap();
        assert_eq!(tail.l2_norm(), 0.0);
        // out of range
        assert!(u.truncate(9).is_err());
    }

    #[test]
    fn truncate_parseval() {
        let params = test_params(2);
        for seed in 0..100 {
            let u = random_field(16, &params, seed);
            let k = (seed % 17) as usize;
            let (head, tail) = u.truncate(k).unwrap();
            let total = u.l2_norm().powi(2);
            let split = head.l2_norm().powi(2) + tail.l2_norm().powi(2);
            assert_relative_eq!(total, split, epsilon = 1e-12);
            // exact reconstruction
            let rebuilt = head.embed(16).add(&tail);
            assert!(rebuilt.sub(&u).l2_norm() == 0.0);
        }
    }

    #[test]
    fn free_flow_phase_and_identity() {
        let params = test_params(2);
        let u = SpectralField::single_mode(8, 3, Complex64::new(0.5, -0.25), &params);
        let t = params.period_t;
        let v = u.free_flow(t);
        let expected = Complex64::new(0.5, -0.25) * Complex64::from_polar(1.0, 9.0 * t);
        assert!((v.get(3) - expected).norm() < 1e-14);
        let w = u.free_flow(0.0);
        assert_eq!(w.get(3), u.get(3));
    }

    #[test]
    fn free_flow_unitary_and_group_law() {
        let params = test_params(2);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for seed in 0..50 {
            let u = random_field(12, &params, 1000 + seed);
            let t: f64 = rng.gen_range(-10.0..10.0);
            let s: f64 = rng.gen_range(-10.0..10.0);
            let sigma: f64 = rng.gen_range(-5.5..5.5);
            assert_relative_eq!(
                u.free_flow(t).scale_norm(sigma),
                u.scale_norm(sigma),
                max_relative = 1e-13
            );
            let two_step = u.free_flow(s).free_flow(t);
            let one_step = u.free_flow(s + t);
            assert!(two_step.sub(&one_step).l2_norm() < 1e-12 * (1.0 + u.l2_norm()));
        }
    }

    #[test]
    fn gauge_round_trip_and_twisted_periodicity() {
        let params = test_params(2);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let mut field = SpaceTimeField::zeros(5, 5, Gauge::Twisted, &params);
            for p in -5i64..=5 {
                for n in -5i64..=5 {
                    field.set(p, n, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                }
            }
            let rt = field
                .gauge_transform(Gauge::Physical)
                .gauge_transform(Gauge::Twisted);
            assert_eq!(rt.gauge(), Gauge::Twisted);
            let diff: f64 = field
                .coeffs()
                .iter()
                .zip(rt.coeffs().iter())
                .map(|(a, b)| (a - b).norm())
                .sum();
            assert!(diff < 1e-14);
        }

        // single twisted mode: evaluation at t = T is the inverse free flow of
        // the t = 0 slice
        let mut field = SpaceTimeField::zeros(3, 3, Gauge::Twisted, &params);
        field.set(1, 1, Complex64::new(1.0, 0.0));
        let at_zero = field.eval_slice(0.0);
        let at_t = field.eval_slice(params.period_t);
        let expected = at_zero.free_flow(-params.period_t);
        assert!(at_t.sub(&expected).l2_norm() < 1e-12);
    }

    #[test]
    fn gauge_evaluation_matches_slicewise_flow() {
        let params = test_params(2);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut twisted = SpaceTimeField::zeros(4, 4, Gauge::Twisted, &params);
        for p in -4i64..=4 {
            for n in -4i64..=4 {
                twisted.set(p, n, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
        }
        let physical = twisted.gauge_transform(Gauge::Physical);
        for j in 0..16 {
            let t = params.period_t * j as f64 / 16.0;
            let lhs = physical.eval_slice(t);
            let rhs = twisted.eval_slice(t).free_flow(t);
            assert!(lhs.sub(&rhs).l2_norm() < 1e-12);
        }
    }

    #[test]
    fn time_grid_round_trip() {
        let params = test_params(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &gauge in &[Gauge::Twisted, Gauge::Physical] {
            let mut field = SpaceTimeField::zeros(6, 4, gauge, &params);
            for p in -6i64..=6 {
                for n in -4i64..=4 {
                    field.set(p, n, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                }
            }
            let m = 4 * (2 * 6 + 1);
            let slices = field.eval_on_time_grid(m);
            // grid slices match direct evaluation
            for j in [0, 3, 17] {
                let t = params.period_t * j as f64 / m as f64;
                assert!(slices[j].sub(&field.eval_slice(t)).l2_norm() < 1e-11);
            }
            let back = SpaceTimeField::from_time_grid(&slices, 6, gauge, &params);
            let diff: f64 = field
                .coeffs()
                .iter()
                .zip(back.coeffs().iter())
                .map(|(a, b)| (a - b).norm())
                .sum();
            assert!(diff < 1e-10);
        }
    }
}
