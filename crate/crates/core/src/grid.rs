//! FFT helpers between symmetric mode windows [−N, N] and uniform
//! collocation grids, with cached plans.
//!
//! Conventions: synthesis is u(x_j) = Σ_n û(n) e^{+2πi n j / M}; analysis is
//! its exact inverse on band-limited data, û(n) = (1/M) Σ_j u_j e^{−2πi n j / M}.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

fn plan(len: usize, direction: FftDirection) -> Arc<dyn Fft<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (len, direction == FftDirection::Forward);
    let mut guard = cache.lock().unwrap();
    guard
        .entry(key)
        .or_insert_with(|| FftPlanner::new().plan_fft(len, direction))
        .clone()
}

/// In-place unnormalized DFT with e^{−2πi jk/M} kernel.
pub fn dft_forward(data: &mut [Complex64]) {
    plan(data.len(), FftDirection::Forward).process(data);
}

/// In-place unnormalized DFT with e^{+2πi jk/M} kernel.
pub fn dft_inverse(data: &mut [Complex64]) {
    plan(data.len(), FftDirection::Inverse).process(data);
}

/// Default dealiased grid size for a [−N, N] window.
pub fn default_grid_size(n_cap: usize) -> usize {
    4 * (2 * n_cap + 1)
}

/// Smallest grid that integrates products of two band-limited factors
/// exactly (quadratic integrands of a [−N, N] window).
pub fn min_quadrature_size(n_cap: usize) -> usize {
    2 * (2 * n_cap + 1)
}

/// Grid values from mode coefficients (zero-padded synthesis).
pub fn synthesize(coeffs: &[Complex64], m: usize) -> Vec<Complex64> {
    let n_cap = (coeffs.len() - 1) / 2;
    debug_assert_eq!(coeffs.len(), 2 * n_cap + 1);
    debug_assert!(m >= coeffs.len());
    let mut bins = vec![Complex64::default(); m];
    for (i, &c) in coeffs.iter().enumerate() {
        let n = i as i64 - n_cap as i64;
        let bin = n.rem_euclid(m as i64) as usize;
        bins[bin] = c;
    }
    dft_inverse(&mut bins);
    bins
}

/// Mode coefficients in [−n_cap, n_cap] from grid values (truncating analysis).
pub fn analyze(grid_values: &[Complex64], n_cap: usize) -> Vec<Complex64> {
    let m = grid_values.len();
    debug_assert!(m >= 2 * n_cap + 1);
    let mut bins = grid_values.to_vec();
    dft_forward(&mut bins);
    let scale = 1.0 / m as f64;
    let mut coeffs = vec![Complex64::default(); 2 * n_cap + 1];
    for (i, c) in coeffs.iter_mut().enumerate() {
        let n = i as i64 - n_cap as i64;
        let bin = n.rem_euclid(m as i64) as usize;
        *c = bins[bin] * scale;
    }
    coeffs
}
