//! Exact scalars of the form `a + b·γ + c·L`.
//!
//! Every coefficient produced by the transport recursions lives in the
//! two-dimensional extension of the rationals spanned by the Euler constant `γ`
//! and a single logarithmic symbol `L` whose numeric value is fixed by the
//! caller at evaluation time (`ln(m²ℓ²/2)` for coefficient tables, `ln(σ/ℓ²)`
//! for pointwise remainders). Addition and rational multiples are closed; a
//! product of two such numbers stays in the ring only when at least one factor
//! is purely rational — which is the only kind of product the recursions form,
//! and the only kind [`HadScalar::mul`] accepts.

use num::rational::BigRational;
use num::{BigInt, ToPrimitive, Zero};
use std::fmt;

/// Exact rational number of arbitrary size.
pub type Rat = BigRational;

/// Euler–Mascheroni constant γ to 30 significant digits (rounds to the
/// correctly-rounded f64).
#[allow(clippy::excessive_precision)]
pub const EULER_GAMMA: f64 = 0.577215664901532860606512090082;

/// Converts a finite f64 to the exact rational it represents.
///
/// Every finite f64 is a dyadic rational, so no rounding occurs. Returns
/// `None` for NaN or infinities.
pub fn rat_from_f64(x: f64) -> Option<Rat> {
    BigRational::from_float(x)
}

/// Exact rational from an integer pair `n/d` (`d ≠ 0`).
pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// `n!` as an exact rational.
pub fn factorial(n: usize) -> Rat {
    let mut acc = BigInt::from(1);
    for i in 2..=n {
        acc *= BigInt::from(i);
    }
    Rat::from_integer(acc)
}

/// Exact scalar `a + b·γ + c·L` with rational `a`, `b`, `c`.
#[derive(Clone, PartialEq, Eq)]
pub struct HadScalar {
    rational: Rat,
    gamma: Rat,
    log: Rat,
}

impl HadScalar {
    /// The additive identity.
    pub fn zero() -> Self {
        HadScalar {
            rational: Rat::zero(),
            gamma: Rat::zero(),
            log: Rat::zero(),
        }
    }

    /// Builds `a + b·γ + c·L` from its three rational parts.
    pub fn new(rational: Rat, gamma: Rat, log: Rat) -> Self {
        HadScalar {
            rational,
            gamma,
            log,
        }
    }

    /// A purely rational scalar.
    pub fn from_rat(r: Rat) -> Self {
        HadScalar {
            rational: r,
            gamma: Rat::zero(),
            log: Rat::zero(),
        }
    }

    /// A purely rational scalar from an integer pair.
    pub fn from_ratio(n: i64, d: i64) -> Self {
        Self::from_rat(rat(n, d))
    }

    /// The rational part `a`.
    pub fn rational_part(&self) -> &Rat {
        &self.rational
    }

    /// The coefficient `b` of the Euler constant.
    pub fn gamma_part(&self) -> &Rat {
        &self.gamma
    }

    /// The coefficient `c` of the logarithmic symbol.
    pub fn log_part(&self) -> &Rat {
        &self.log
    }

    /// True when all three parts vanish.
    pub fn is_zero(&self) -> bool {
        self.rational.is_zero() && self.gamma.is_zero() && self.log.is_zero()
    }

    /// True when the γ and L parts vanish.
    pub fn is_rational(&self) -> bool {
        self.gamma.is_zero() && self.log.is_zero()
    }

    /// Exact sum.
    pub fn add(&self, other: &HadScalar) -> HadScalar {
        HadScalar {
            rational: &self.rational + &other.rational,
            gamma: &self.gamma + &other.gamma,
            log: &self.log + &other.log,
        }
    }

    /// Exact difference.
    pub fn sub(&self, other: &HadScalar) -> HadScalar {
        HadScalar {
            rational: &self.rational - &other.rational,
            gamma: &self.gamma - &other.gamma,
            log: &self.log - &other.log,
        }
    }

    /// Exact negation.
    pub fn neg(&self) -> HadScalar {
        HadScalar {
            rational: -self.rational.clone(),
            gamma: -self.gamma.clone(),
            log: -self.log.clone(),
        }
    }

    /// Exact multiple by a rational factor.
    pub fn scale(&self, r: &Rat) -> HadScalar {
        HadScalar {
            rational: &self.rational * r,
            gamma: &self.gamma * r,
            log: &self.log * r,
        }
    }

    /// Exact product.
    ///
    /// Defined only when at least one factor is purely rational: products of
    /// two transcendental parts (`γ·γ`, `γ·L`, `L·L`) leave the coefficient
    /// ring, and the recursions never form them.
    ///
    /// # Panics
    ///
    /// Panics when both factors carry a γ or L part.
    pub fn mul(&self, other: &HadScalar) -> HadScalar {
        if self.is_rational() {
            other.scale(&self.rational)
        } else if other.is_rational() {
            self.scale(&other.rational)
        } else {
            panic!("product of two transcendental scalars leaves the coefficient ring");
        }
    }

    /// Numeric value with the logarithmic symbol set to `log_value`.
    pub fn eval(&self, log_value: f64) -> f64 {
        rat_to_f64(&self.rational) + rat_to_f64(&self.gamma) * EULER_GAMMA
            + rat_to_f64(&self.log) * log_value
    }
}

/// Nearest f64 to an exact rational.
pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().expect("rational out of f64 range")
}

impl fmt::Debug for HadScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for HadScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.rational.is_zero() {
            parts.push(format!("{}", self.rational));
        }
        if !self.gamma.is_zero() {
            parts.push(format!("({})g", self.gamma));
        }
        if !self.log.is_zero() {
            parts.push(format!("({})L", self.log));
        }
        if parts.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", parts.join(" + "))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ring_operations_are_exact() {
        let a = HadScalar::new(rat(1, 3), rat(2, 1), rat(-1, 2));
        let b = HadScalar::new(rat(1, 6), rat(-2, 1), rat(1, 2));
        let s = a.add(&b);
        assert_eq!(s.rational_part(), &rat(1, 2));
        assert!(s.gamma_part().is_zero());
        assert!(s.log_part().is_zero());
        assert!(s.is_rational());

        let d = a.sub(&a);
        assert!(d.is_zero());

        let m = a.scale(&rat(6, 1));
        assert_eq!(m.rational_part(), &rat(2, 1));
        assert_eq!(m.gamma_part(), &rat(12, 1));
        assert_eq!(m.log_part(), &rat(-3, 1));
    }

    #[test]
    fn products_with_a_rational_factor_are_allowed_on_either_side() {
        let t = HadScalar::new(rat(1, 4), rat(3, 1), rat(5, 1));
        let r = HadScalar::from_ratio(2, 1);
        let left = r.mul(&t);
        let right = t.mul(&r);
        assert_eq!(left, right);
        assert_eq!(left.gamma_part(), &rat(6, 1));
        assert_eq!(left.log_part(), &rat(10, 1));
    }

    #[test]
    #[should_panic(expected = "leaves the coefficient ring")]
    fn transcendental_products_are_rejected() {
        let t = HadScalar::new(rat(0, 1), rat(1, 1), rat(0, 1));
        let u = HadScalar::new(rat(0, 1), rat(0, 1), rat(1, 1));
        let _ = t.mul(&u);
    }

    #[test]
    fn evaluation_substitutes_gamma_and_the_log_symbol() {
        let s = HadScalar::new(rat(-1, 2), rat(1, 1), rat(3, 1));
        let l = 0.25_f64;
        let expected = -0.5 + EULER_GAMMA + 3.0 * l;
        assert!((s.eval(l) - expected).abs() < 1e-15);
    }

    #[test]
    fn f64_conversion_is_exact_for_dyadics() {
        let r = rat_from_f64(0.375).unwrap();
        assert_eq!(r, rat(3, 8));
        let x = 0.1_f64;
        let r = rat_from_f64(x).unwrap();
        assert_eq!(rat_to_f64(&r), x);
        assert!(rat_from_f64(f64::NAN).is_none());
    }

    #[test]
    fn factorials_match_hand_values() {
        assert_eq!(factorial(0), rat(1, 1));
        assert_eq!(factorial(1), rat(1, 1));
        assert_eq!(factorial(5), rat(120, 1));
    }
}
