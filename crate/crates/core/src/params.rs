//! Model parameters: operator order, periods, Hilbert-scale indices and the
//! Diophantine budget shared by every solver in the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which complexified field the coefficients describe.
///
/// Both kinds share the diagonal free flow `e^{i a n^d t}` on the complex
/// coefficient sequence; they differ in how coefficients map to physical
/// fields and in the shape of the nonlinear energy integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquationKind {
    /// Complex scalar field (Schrödinger-like), `d = 2` in the classical case.
    NlsLike,
    /// Real `(field, momentum)` pair packed into complex coefficients
    /// (wave-like), `d = 1` in the classical case.
    NlwLike,
}

/// Exact description of the frequency ratio `a T / 2π` when the time period
/// was derived from a high-precision target rather than a bare float.
///
/// Bare `f64` periods are dyadic rationals, so any Diophantine analysis of
/// them bottoms out near denominator 2^53. Carrying the ratio symbolically
/// lets the scan work at full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RatioSpec {
    /// (1 + √5)/2.
    Golden,
    /// √k for a positive integer k.
    Sqrt { value: u64 },
    /// Exact rational p/q.
    Rational { p: i64, q: u64 },
    /// Truncated factorial sum Σ_{k=1..terms} base^(−k!).
    LiouvilleSum { base: u32, terms: u32 },
    /// Value of the finite continued fraction [a0; a1, a2, ...].
    Quotients { a0: u64, rest: Vec<u64> },
}

/// The tuple defining operator, periods, scales and Diophantine quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Space period X > 0.
    pub period_x: f64,
    /// Time period T > 0.
    pub period_t: f64,
    /// Operator order d ≥ 1; the diagonal eigenvalues are `a n^d` (signed
    /// for odd d).
    pub degree: u32,
    /// Regularization order h > 0 of the nonlinearity class.
    pub smoothing_order: f64,
    /// Irrationality-measure budget r ≥ 2 used by decay predictions.
    pub irrationality_budget: f64,
    pub kind: EquationKind,
    /// Present when T was derived from an exact ratio target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<RatioSpec>,
}

impl ModelParams {
    /// Validates the invariants shared by every solver: positive periods,
    /// d ≥ 1, r ≥ 2 and the smoothness level m = ⌊h/d⌋ ≥ 2.
    pub fn new(
        period_x: f64,
        period_t: f64,
        degree: u32,
        smoothing_order: f64,
        irrationality_budget: f64,
        kind: EquationKind,
    ) -> Result<Self> {
        let p = ModelParams {
            period_x,
            period_t,
            degree,
            smoothing_order,
            irrationality_budget,
            kind,
            ratio: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.period_x > 0.0) || !(self.period_t > 0.0) {
            return Err(Error::Config("periods must be positive".into()));
        }
        if self.degree < 1 {
            return Err(Error::Config("operator order d must be at least 1".into()));
        }
        if !(self.smoothing_order > 0.0) {
            return Err(Error::Config("smoothing order h must be positive".into()));
        }
        if self.irrationality_budget < 2.0 {
            return Err(Error::Config(
                "irrationality budget r must be at least 2".into(),
            ));
        }
        if self.smoothness_level() < 2 {
            return Err(Error::Config(format!(
                "smoothness level m = floor(h/d) = {} is below 2; raise h or lower d",
                self.smoothness_level()
            )));
        }
        Ok(())
    }

    /// Eigenvalue scale a = (2π/X)^d (derived, never stored).
    pub fn eigen_scale(&self) -> f64 {
        (2.0 * std::f64::consts::PI / self.period_x).powi(self.degree as i32)
    }

    /// Diagonal eigenvalue λ_n = a n^d, signed for odd d.
    pub fn eigenvalue(&self, n: i64) -> f64 {
        self.eigen_scale() * powi_signed(n, self.degree)
    }

    /// Smoothness level m = ⌊h/d⌋.
    pub fn smoothness_level(&self) -> u32 {
        (self.smoothing_order / self.degree as f64).floor() as u32
    }

    /// The frequency ratio a T / 2π as a float, computed directly from a and
    /// T. (Text-book rewritings in terms of X alone are easy to get wrong;
    /// this is the defining expression.)
    pub fn frequency_ratio(&self) -> f64 {
        self.eigen_scale() * self.period_t / (2.0 * std::f64::consts::PI)
    }

    /// True when the solver-side admissibility inequality h > d·r holds for
    /// the configured budget.
    pub fn is_scale_admissible(&self) -> bool {
        self.smoothing_order > self.degree as f64 * self.irrationality_budget
    }

    /// Predicted coefficient decay exponent h − d(r−1) in the space index.
    pub fn decay_exponent(&self) -> f64 {
        self.smoothing_order - self.degree as f64 * (self.irrationality_budget - 1.0)
    }

    /// Predicted regularity h − d(r−1) − 1/2 of periodic solutions.
    pub fn regularity_index(&self) -> f64 {
        self.decay_exponent() - 0.5
    }
}

/// n^d with the sign of n preserved for odd d, as an exact f64 for the mode
/// ranges used here (|n| ≤ 2^17, d ≤ 3 stays far below 2^53).
pub fn powi_signed(n: i64, d: u32) -> f64 {
    (n as f64).powi(d as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigen_scale_matches_definition() {
        let p = ModelParams::new(2.0 * std::f64::consts::PI, 10.0, 2, 5.5, 2.0, EquationKind::NlsLike)
            .unwrap();
        assert!((p.eigen_scale() - 1.0).abs() < 1e-15);
        assert!((p.eigenvalue(3) - 9.0).abs() < 1e-14);
        let w = ModelParams::new(1.0, 10.0, 1, 3.5, 2.0, EquationKind::NlwLike).unwrap();
        assert!((w.eigen_scale() - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((w.eigenvalue(-2) + 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn refuses_low_smoothness_level() {
        // h/d = 1.5 gives m = 1 < 2.
        let r = ModelParams::new(1.0, 1.0, 2, 3.0, 2.0, EquationKind::NlsLike);
        assert!(r.is_err());
    }

    #[test]
    fn derived_quantities() {
        let p = ModelParams::new(2.0 * std::f64::consts::PI, 2.0 * std::f64::consts::PI * 1.618, 2, 5.5, 2.0, EquationKind::NlsLike)
            .unwrap();
        assert!((p.frequency_ratio() - 1.618).abs() < 1e-12);
        assert_eq!(p.smoothness_level(), 2);
        assert!(p.is_scale_admissible());
        assert!((p.decay_exponent() - 3.5).abs() < 1e-12);
        assert!((p.regularity_index() - 3.0).abs() < 1e-12);
    }
}
