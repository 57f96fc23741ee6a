//! Reals that remember an exact rational value when one is known.
//!
//! Pole locations of the conormal symbol are square roots of spectral data.
//! For the model geometries these are rational, and coincidences between
//! poles must be detected exactly rather than up to rounding.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_rational::Rational64;
use serde::{Serialize, Serializer};

/// Tolerance used when at least one operand has no exact value.
pub const COINCIDENCE_TOL: f64 = 1e-9;

/// Largest denominator accepted when snapping a float onto a rational.
const SNAP_MAX_DENOM: i64 = 1000;

#[derive(Clone, Copy, Debug)]
pub struct Real {
    value: f64,
    exact: Option<Rational64>,
}

impl Real {
    pub fn from_ratio(r: Rational64) -> Self {
        Real {
            value: *r.numer() as f64 / *r.denom() as f64,
            exact: Some(r),
        }
    }

    pub fn int(i: i64) -> Self {
        Self::from_ratio(Rational64::from_integer(i))
    }

    pub fn frac(num: i64, den: i64) -> Self {
        Self::from_ratio(Rational64::new(num, den))
    }

    /// A float with no exact representation attached.
    pub fn float(value: f64) -> Self {
        Real { value, exact: None }
    }

    /// Attach a rational when `value` sits within relative 1e-12 of one with a
    /// small denominator.
    pub fn snap(value: f64) -> Self {
        match snap_rational(value) {
            Some(r) => Self::from_ratio(r),
            None => Self::float(value),
        }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn exact(&self) -> Option<Rational64> {
        self.exact
    }

    pub fn is_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn is_zero(&self) -> bool {
        match self.exact {
            Some(r) => *r.numer() == 0,
            None => self.value == 0.0,
        }
    }

    /// Square root; stays exact when numerator and denominator are perfect
    /// squares.
    pub fn sqrt(&self) -> Self {
        if let Some(r) = self.exact {
            if *r.numer() >= 0 {
                if let (Some(a), Some(b)) = (isqrt_exact(*r.numer()), isqrt_exact(*r.denom())) {
                    return Self::from_ratio(Rational64::new(a, b));
                }
            }
        }
        Self::float(self.value.sqrt())
    }

    /// Equality: exact when both sides are exact, otherwise within
    /// [`COINCIDENCE_TOL`].
    pub fn coincides(&self, other: &Real) -> bool {
        match (self.exact, other.exact) {
            (Some(a), Some(b)) => a == b,
            _ => (self.value - other.value).abs() <= COINCIDENCE_TOL,
        }
    }

    pub fn cmp_tol(&self, other: &Real) -> Ordering {
        if self.coincides(other) {
            Ordering::Equal
        } else if let (Some(a), Some(b)) = (self.exact, other.exact) {
            a.cmp(&b)
        } else {
            self.value.total_cmp(&other.value)
        }
    }

    /// Strict `self < bound` where coincidence counts as not-less.
    pub fn lt_strict(&self, bound: &Real) -> bool {
        self.cmp_tol(bound) == Ordering::Less
    }

    fn combine(
        self,
        rhs: Real,
        fe: impl Fn(Rational64, Rational64) -> Option<Rational64>,
        ff: impl Fn(f64, f64) -> f64,
    ) -> Real {
        match (self.exact, rhs.exact) {
            (Some(a), Some(b)) => match fe(a, b) {
                Some(r) => Real::from_ratio(r),
                None => Real::float(ff(self.value, rhs.value)),
            },
            _ => Real::float(ff(self.value, rhs.value)),
        }
    }
}

impl From<f64> for Real {
    fn from(v: f64) -> Self {
        Real::float(v)
    }
}

impl From<i64> for Real {
    fn from(v: i64) -> Self {
        Real::int(v)
    }
}

impl Add for Real {
    type Output = Real;
    fn add(self, rhs: Real) -> Real {
        self.combine(rhs, |a, b| a.checked_add_r(b), |a, b| a + b)
    }
}

impl Sub for Real {
    type Output = Real;
    fn sub(self, rhs: Real) -> Real {
        self.combine(rhs, |a, b| a.checked_add_r(-b), |a, b| a - b)
    }
}

impl Mul for Real {
    type Output = Real;
    fn mul(self, rhs: Real) -> Real {
        self.combine(rhs, |a, b| a.checked_mul_r(b), |a, b| a * b)
    }
}

impl Div for Real {
    type Output = Real;
    fn div(self, rhs: Real) -> Real {
        self.combine(
            rhs,
            |a, b| {
                if *b.numer() == 0 {
                    None
                } else {
                    a.checked_mul_r(b.recip())
                }
            },
            |a, b| a / b,
        )
    }
}

impl Neg for Real {
    type Output = Real;
    fn neg(self) -> Real {
        Real {
            value: -self.value,
            exact: self.exact.map(|r| -r),
        }
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exact {
            Some(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Some(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            None => write!(f, "{}", self.value),
        }
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.value)
    }
}

trait CheckedRatio: Sized {
    fn checked_add_r(self, other: Self) -> Option<Self>;
    fn checked_mul_r(self, other: Self) -> Option<Self>;
}

// Rational64 panics on overflow; fall back to floats instead.
impl CheckedRatio for Rational64 {
    fn checked_add_r(self, other: Self) -> Option<Self> {
        let (a, b) = (*self.numer() as i128, *self.denom() as i128);
        let (c, d) = (*other.numer() as i128, *other.denom() as i128);
        ratio_from_i128(a * d + c * b, b * d)
    }

    fn checked_mul_r(self, other: Self) -> Option<Self> {
        let (a, b) = (*self.numer() as i128, *self.denom() as i128);
        let (c, d) = (*other.numer() as i128, *other.denom() as i128);
        ratio_from_i128(a * c, b * d)
    }
}

fn gcd_i128(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn ratio_from_i128(num: i128, den: i128) -> Option<Rational64> {
    if den == 0 {
        return None;
    }
    let g = gcd_i128(num, den).max(1);
    let (mut n, mut d) = (num / g, den / g);
    if d < 0 {
        n = -n;
        d = -d;
    }
    let n = i64::try_from(n).ok()?;
    let d = i64::try_from(d).ok()?;
    Some(Rational64::new_raw(n, d))
}

fn isqrt_exact(v: i64) -> Option<i64> {
    if v < 0 {
        return None;
    }
    let mut r = (v as f64).sqrt() as i64;
    while r * r > v {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= v {
        r += 1;
    }
    (r * r == v).then_some(r)
}

/// Continued-fraction search for a rational within relative 1e-12 of `v`.
pub fn snap_rational(v: f64) -> Option<Rational64> {
    if !v.is_finite() {
        return None;
    }
    if v == 0.0 {
        return Some(Rational64::from_integer(0));
    }
    let target = v.abs();
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut x = target;
    for _ in 0..40 {
        let a = x.floor();
        if a > 1e12 {
            break;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > SNAP_MAX_DENOM {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let approx = h1 as f64 / k1 as f64;
        if (approx - target).abs() <= 1e-12 * target.max(1.0) {
            let sign = if v < 0.0 { -1 } else { 1 };
            return Some(Rational64::new(sign * h1, k1));
        }
        let frac = x - a as f64;
        if frac <= 0.0 {
            break;
        }
        x = 1.0 / frac;
    }
    None
}
