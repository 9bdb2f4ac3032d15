//! Numeric backend abstraction for expression evaluation.
//!
//! Expressions and jets are evaluated generically over [`Scalar`]: `f64` is
//! the fast backend used for sign scanning and plotting, [`Real`] is the
//! reference backend every reported quantity comes from.

use crate::real::{self, Real};

pub trait Scalar: Clone {
    fn from_f64(x: f64) -> Self;
    /// Builds a literal from its `f64` rendering or an exact reference
    /// value, whichever the backend needs.
    fn from_parts(f: f64, exact: impl FnOnce() -> Real) -> Self;
    fn to_f64(&self) -> f64;
    fn zero() -> Self;
    fn one() -> Self;

    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn abs(&self) -> Self;

    fn is_zero(&self) -> bool;
    fn is_negative(&self) -> bool;
    fn is_finite(&self) -> bool;

    fn sqrt(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn tan(&self) -> Self;
    fn atan(&self) -> Self;
    fn sinh(&self) -> Self;
    fn cosh(&self) -> Self;
    fn asinh(&self) -> Self;
    fn acosh(&self) -> Self;
    /// `self^p` for positive `self`.
    fn pow(&self, p: &Self) -> Self;
    fn powi(&self, n: i64) -> Self;

    fn lngamma(&self) -> Self;
    fn digamma(&self) -> Self;
    fn trigamma(&self) -> Self;
    fn tetragamma(&self) -> Self;

    /// Accepts a computed value into further arithmetic. The reference
    /// backend rejects overflow to keep NaN out of exact computations; the
    /// `f64` backend keeps IEEE infinities, whose sign is still meaningful
    /// for scanning.
    fn admit(self) -> Option<Self>
    where
        Self: Sized,
    {
        Some(self)
    }

    /// Whether a trigonometric function of this argument is worth
    /// evaluating. The reference backend reduces the argument modulo 2π at
    /// full accuracy, whose cost grows with the exponent; past a generous
    /// cutoff the reduction is declared out of range instead.
    fn trig_arg_ok(&self) -> bool {
        true
    }
}

/// Largest binary exponent accepted for trig arguments on the reference
/// backend (|x| < 2^8192).
const TRIG_EXP_CAP: i32 = 1 << 13;

impl Scalar for Real {
    fn from_f64(x: f64) -> Self {
        Real::from_f64(x)
    }
    fn admit(self) -> Option<Self> {
        self.is_finite().then_some(self)
    }
    fn trig_arg_ok(&self) -> bool {
        self.is_zero() || self.raw_mantissa().map(|(_, e, _)| e.abs() <= TRIG_EXP_CAP).unwrap_or(false)
    }
    fn from_parts(_f: f64, exact: impl FnOnce() -> Real) -> Self {
        exact()
    }
    fn to_f64(&self) -> f64 {
        Real::to_f64(self)
    }
    fn zero() -> Self {
        Real::zero()
    }
    fn one() -> Self {
        Real::one()
    }
    fn add(&self, o: &Self) -> Self {
        Real::add(self, o)
    }
    fn sub(&self, o: &Self) -> Self {
        Real::sub(self, o)
    }
    fn mul(&self, o: &Self) -> Self {
        Real::mul(self, o)
    }
    fn div(&self, o: &Self) -> Self {
        Real::div(self, o)
    }
    fn neg(&self) -> Self {
        Real::neg(self)
    }
    fn abs(&self) -> Self {
        Real::abs(self)
    }
    fn is_zero(&self) -> bool {
        Real::is_zero(self)
    }
    fn is_negative(&self) -> bool {
        Real::is_negative(self)
    }
    fn is_finite(&self) -> bool {
        Real::is_finite(self)
    }
    fn sqrt(&self) -> Self {
        Real::sqrt(self)
    }
    fn exp(&self) -> Self {
        Real::exp(self)
    }
    fn ln(&self) -> Self {
        Real::ln(self)
    }
    fn sin(&self) -> Self {
        Real::sin(self)
    }
    fn cos(&self) -> Self {
        Real::cos(self)
    }
    fn tan(&self) -> Self {
        Real::tan(self)
    }
    fn atan(&self) -> Self {
        Real::atan(self)
    }
    fn sinh(&self) -> Self {
        Real::sinh(self)
    }
    fn cosh(&self) -> Self {
        Real::cosh(self)
    }
    fn asinh(&self) -> Self {
        Real::asinh(self)
    }
    fn acosh(&self) -> Self {
        Real::acosh(self)
    }
    fn pow(&self, p: &Self) -> Self {
        Real::pow(self, p)
    }
    fn powi(&self, n: i64) -> Self {
        Real::powi(self, n)
    }
    fn lngamma(&self) -> Self {
        real::lngamma(self)
    }
    fn digamma(&self) -> Self {
        real::digamma(self)
    }
    fn trigamma(&self) -> Self {
        real::trigamma(self)
    }
    fn tetragamma(&self) -> Self {
        real::tetragamma(self)
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn from_parts(f: f64, _exact: impl FnOnce() -> Real) -> Self {
        f
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn is_negative(&self) -> bool {
        *self < 0.0
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn sin(&self) -> Self {
        f64::sin(*self)
    }
    fn cos(&self) -> Self {
        f64::cos(*self)
    }
    fn tan(&self) -> Self {
        f64::tan(*self)
    }
    fn atan(&self) -> Self {
        f64::atan(*self)
    }
    fn sinh(&self) -> Self {
        f64::sinh(*self)
    }
    fn cosh(&self) -> Self {
        f64::cosh(*self)
    }
    fn asinh(&self) -> Self {
        f64::asinh(*self)
    }
    fn acosh(&self) -> Self {
        f64::acosh(*self)
    }
    fn pow(&self, p: &Self) -> Self {
        f64::powf(*self, *p)
    }
    fn powi(&self, n: i64) -> Self {
        if n.unsigned_abs() <= i32::MAX as u64 {
            f64::powi(*self, n as i32)
        } else {
            f64::powf(*self, n as f64)
        }
    }
    fn lngamma(&self) -> Self {
        lngamma_f64(*self)
    }
    fn digamma(&self) -> Self {
        digamma_f64(*self)
    }
    fn trigamma(&self) -> Self {
        trigamma_f64(*self)
    }
    fn tetragamma(&self) -> Self {
        tetragamma_f64(*self)
    }
}

// B_2 .. B_14
const BERN_F64: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];
const SHIFT_F64: f64 = 12.0;

fn shift_f64(x: f64) -> (f64, f64, [f64; 16], usize) {
    // returns shifted argument, product of consumed factors, factors, count
    let mut v = x;
    let mut prod = 1.0;
    let mut factors = [0.0f64; 16];
    let mut n = 0;
    while v < SHIFT_F64 {
        factors[n] = v;
        prod *= v;
        v += 1.0;
        n += 1;
    }
    (v, prod, factors, n)
}

pub fn lngamma_f64(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let (v, prod, _, _) = shift_f64(x);
    let mut acc = (v - 0.5) * v.ln() - v + 0.5 * (2.0 * std::f64::consts::PI).ln();
    let inv2 = 1.0 / (v * v);
    let mut inv_pow = 1.0 / v;
    for (i, b) in BERN_F64.iter().enumerate() {
        let k2 = (2 * (i + 1)) as f64;
        acc += b / (k2 * (k2 - 1.0)) * inv_pow;
        inv_pow *= inv2;
    }
    acc - prod.ln()
}

pub fn digamma_f64(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let (v, _, factors, n) = shift_f64(x);
    let inv = 1.0 / v;
    let inv2 = inv * inv;
    let mut acc = v.ln() - 0.5 * inv;
    let mut inv_pow = inv2;
    for (i, b) in BERN_F64.iter().enumerate() {
        let k2 = (2 * (i + 1)) as f64;
        acc -= b / k2 * inv_pow;
        inv_pow *= inv2;
    }
    for f in &factors[..n] {
        acc -= 1.0 / f;
    }
    acc
}

pub fn trigamma_f64(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let (v, _, factors, n) = shift_f64(x);
    let inv = 1.0 / v;
    let inv2 = inv * inv;
    let mut acc = inv + 0.5 * inv2;
    let mut inv_pow = inv2 * inv;
    for b in BERN_F64.iter() {
        acc += b * inv_pow;
        inv_pow *= inv2;
    }
    for f in &factors[..n] {
        acc += 1.0 / (f * f);
    }
    acc
}

pub fn tetragamma_f64(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let (v, _, factors, n) = shift_f64(x);
    let inv = 1.0 / v;
    let inv2 = inv * inv;
    let mut acc = -inv2 - inv2 * inv;
    let mut inv_pow = inv2 * inv2;
    for (i, b) in BERN_F64.iter().enumerate() {
        let k2 = (2 * (i + 1)) as f64;
        acc -= (k2 + 1.0) * b * inv_pow;
        inv_pow *= inv2;
    }
    for f in &factors[..n] {
        acc -= 2.0 / (f * f * f);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f64_polygamma_agrees_with_reference() {
        for &x in &[0.1, 0.5, 1.0, 1.4616, 3.7, 25.0, 1000.0] {
            let r = Real::from_f64(x);
            assert!((lngamma_f64(x) - real::lngamma(&r).to_f64()).abs() < 1e-11 * (1.0 + lngamma_f64(x).abs()));
            assert!((digamma_f64(x) - real::digamma(&r).to_f64()).abs() < 1e-11 * (1.0 + digamma_f64(x).abs()));
            assert!((trigamma_f64(x) - real::trigamma(&r).to_f64()).abs() < 1e-10 * (1.0 + trigamma_f64(x).abs()));
            assert!((tetragamma_f64(x) - real::tetragamma(&r).to_f64()).abs() < 1e-9 * (1.0 + tetragamma_f64(x).abs()));
        }
    }
}
