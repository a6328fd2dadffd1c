//! Exact-rational interval arithmetic for the Diophantine analysis.
//!
//! Every number analyzed by the scan engine is carried as a certified
//! enclosure `[lo, hi]` of exact rationals. Constructors produce enclosures
//! of width at most 2^(−bits), and since rational arithmetic is exact the
//! width only grows through explicit operations, never through rounding.
//! Quotient extraction then either certifies a continued-fraction digit or
//! reports that the enclosure is too wide — it can never silently emit a
//! wrong digit.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::params::RatioSpec;

/// Certified enclosure of a real number.
#[derive(Debug, Clone, PartialEq)]
pub struct RealInterval {
    pub lo: BigRational,
    pub hi: BigRational,
}

impl RealInterval {
    pub fn exact(v: BigRational) -> Self {
        RealInterval { lo: v.clone(), hi: v }
    }

    pub fn new(lo: BigRational, hi: BigRational) -> Self {
        debug_assert!(lo <= hi);
        RealInterval { lo, hi }
    }

    pub fn is_exact(&self) -> bool {
        self.lo == self.hi
    }

    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }

    pub fn mid(&self) -> BigRational {
        (&self.lo + &self.hi) / BigRational::from_integer(2.into())
    }

    pub fn to_f64(&self) -> f64 {
        rational_to_f64(&self.mid())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(&self.lo + &other.lo, &self.hi + &other.hi)
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(&self.lo - &other.hi, &self.hi - &other.lo)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let cands = [
            &self.lo * &other.lo,
            &self.lo * &other.hi,
            &self.hi * &other.lo,
            &self.hi * &other.hi,
        ];
        let lo = cands.iter().min().unwrap().clone();
        let hi = cands.iter().max().unwrap().clone();
        Self::new(lo, hi)
    }

    /// Reciprocal; requires the interval to exclude zero.
    pub fn recip(&self) -> Self {
        assert!(
            self.lo.is_positive() || self.hi.is_negative(),
            "interval straddles zero"
        );
        Self::new(self.hi.recip(), self.lo.recip())
    }

    pub fn div(&self, other: &Self) -> Self {
        self.mul(&other.recip())
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        if r.is_negative() {
            Self::new(&self.hi * r, &self.lo * r)
        } else {
            Self::new(&self.lo * r, &self.hi * r)
        }
    }

    pub fn shift(&self, r: &BigRational) -> Self {
        Self::new(&self.lo + r, &self.hi + r)
    }

    pub fn powi(&self, mut e: u32) -> Self {
        let mut acc = RealInterval::exact(BigRational::one());
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            base = base.mul(&base);
            e >>= 1;
        }
        acc
    }

    /// Both endpoints share the same integer floor?  Then that floor is a
    /// certified continued-fraction digit.
    pub fn certified_floor(&self) -> Option<BigInt> {
        let fl = self.lo.floor().to_integer();
        let fh = self.hi.floor().to_integer();
        if fl == fh {
            Some(fl)
        } else {
            None
        }
    }
}

/// √k as a 2^(−bits)-wide enclosure, via the integer square root of k·2^(2·bits).
pub fn sqrt_interval(k: u64, bits: u32) -> RealInterval {
    let shifted: BigInt = BigInt::from(k) << (2 * bits as usize);
    let s = shifted.sqrt();
    let den: BigInt = BigInt::one() << bits as usize;
    RealInterval::new(
        BigRational::new(s.clone(), den.clone()),
        BigRational::new(s + 1, den),
    )
}

/// (1 + √5)/2 as an enclosure.
pub fn golden_interval(bits: u32) -> RealInterval {
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    sqrt_interval(5, bits + 2)
        .shift(&BigRational::one())
        .scale(&half)
}

/// arctan(1/x) · 2^bits as an integer enclosure (alternating Gregory series).
fn atan_inv_fixed(x: u64, bits: u32) -> (BigInt, BigInt) {
    let one: BigInt = BigInt::one() << bits as usize;
    let x = BigInt::from(x);
    let x2 = &x * &x;
    let mut power = x.clone();
    let mut sum = BigInt::zero();
    let mut k: u64 = 0;
    loop {
        let den = &power * BigInt::from(2 * k + 1);
        let term = &one / &den;
        if term.is_zero() {
            break;
        }
        if k % 2 == 0 {
            sum += &term;
        } else {
            sum -= &term;
        }
        power *= &x2;
        k += 1;
    }
    // Each floored term loses < 1 ulp and the truncation is bounded by the
    // first omitted term, itself < 1 ulp.
    let slack = BigInt::from(k + 2);
    (&sum - &slack, sum + slack)
}

/// π as an enclosure of width ≲ 2^(−bits), via π = 16·atan(1/5) − 4·atan(1/239).
pub fn pi_interval(bits: u32) -> RealInterval {
    let guard = bits + 32;
    let (lo5, hi5) = atan_inv_fixed(5, guard);
    let (lo239, hi239) = atan_inv_fixed(239, guard);
    let lo = BigInt::from(16) * lo5 - BigInt::from(4) * hi239;
    let hi = BigInt::from(16) * hi5 - BigInt::from(4) * lo239;
    let den: BigInt = BigInt::one() << guard as usize;
    RealInterval::new(BigRational::new(lo, den.clone()), BigRational::new(hi, den))
}

/// Evaluate a ratio descriptor to a certified enclosure.
pub fn ratio_value(spec: &RatioSpec, bits: u32) -> RealInterval {
    match spec {
        RatioSpec::Golden => golden_interval(bits),
        RatioSpec::Sqrt { value } => sqrt_interval(*value, bits),
        RatioSpec::Rational { p, q } => RealInterval::exact(BigRational::new(
            BigInt::from(*p),
            BigInt::from(*q),
        )),
        RatioSpec::LiouvilleSum { base, terms } => {
            let mut sum = BigRational::zero();
            let mut fact: u64 = 1;
            for k in 1..=*terms as u64 {
                fact *= k;
                let den = BigInt::from(*base).pow(fact as u32);
                sum += BigRational::new(BigInt::one(), den);
            }
            RealInterval::exact(sum)
        }
        RatioSpec::Quotients { a0, rest } => {
            RealInterval::exact(quotients_to_rational(*a0, rest))
        }
    }
}

/// Value of the finite continued fraction [a0; a1, a2, ...].
pub fn quotients_to_rational(a0: u64, rest: &[u64]) -> BigRational {
    let mut value = BigRational::zero();
    for a in rest.iter().rev() {
        assert!(*a > 0, "partial quotients must be positive");
        value = (BigRational::from_integer(BigInt::from(*a)) + value).recip();
    }
    BigRational::from_integer(BigInt::from(a0)) + value
}

/// Time period realizing a target frequency ratio: T = x · X^d / (2π)^(d−1).
pub fn period_for_ratio(ratio: &RealInterval, period_x: f64, degree: u32, bits: u32) -> f64 {
    let x_rat = BigRational::from_float(period_x).expect("finite space period");
    let xd = RealInterval::exact(x_rat).powi(degree);
    let t = if degree == 1 {
        ratio.mul(&xd)
    } else {
        let two_pi = pi_interval(bits).scale(&BigRational::from_integer(2.into()));
        ratio.mul(&xd).div(&two_pi.powi(degree - 1))
    };
    t.to_f64()
}

/// log2 of a positive big integer, accurate to ~1e−15 relative.
pub fn log2_bigint(x: &BigInt) -> f64 {
    debug_assert!(x.is_positive());
    let b = x.bits();
    if b <= 53 {
        x.to_f64().unwrap().log2()
    } else {
        let top: BigInt = x >> (b - 53) as usize;
        (b - 53) as f64 + top.to_f64().unwrap().log2()
    }
}

/// log2 |r| for nonzero r.
pub fn log2_rational(r: &BigRational) -> f64 {
    debug_assert!(!r.is_zero());
    log2_bigint(&r.numer().abs()) - log2_bigint(&r.denom().abs())
}

/// Faithful f64 of an arbitrary-size rational (|error| ≤ a few ulps).
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let neg = r.is_negative();
    let n = r.numer().abs();
    let d = r.denom().abs();
    let shift: i64 = 80 - (n.bits() as i64 - d.bits() as i64);
    let q: BigInt = if shift >= 0 {
        (n << shift as usize).div_floor(&d)
    } else {
        n.div_floor(&(d << (-shift) as usize))
    };
    let qf = q.to_f64().unwrap_or(f64::MAX);
    let scale = if shift.unsigned_abs() > 2000 {
        if shift > 0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        2f64.powi(-shift as i32)
    };
    let v = qf * scale;
    if neg {
        -v
    } else {
        v
    }
}
