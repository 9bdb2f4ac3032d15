//! Extended-precision reference arithmetic.
//!
//! All "exact" quantities in this crate (function values, derivatives,
//! condition numbers, rounding deltas) are computed with [`Real`], a fixed
//! 256-bit binary float. That is at least four times the mantissa width of
//! the widest simulated floating-point system, so reference values can be
//! treated as exact relative to anything measured against them.

use std::cell::RefCell;
use std::cmp::Ordering;

use astro_float::{BigFloat, Consts, RoundingMode, Sign};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use once_cell::sync::Lazy;

/// Mantissa bits of the reference arithmetic.
pub const PREC: usize = 256;

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> = RefCell::new(Consts::new().expect("constants cache"));
}

fn with_consts<R>(f: impl FnOnce(&mut Consts) -> R) -> R {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

/// A 256-bit binary floating-point number.
///
/// Values are always finite; operations that would produce NaN or infinity
/// indicate a bug in the caller (domain checks happen before evaluation) and
/// panic in debug builds.
#[derive(Clone, Debug)]
pub struct Real(BigFloat);

impl Real {
    fn wrap(x: BigFloat) -> Self {
        debug_assert!(!x.is_nan(), "reference arithmetic produced NaN");
        Real(x)
    }

    pub fn zero() -> Self {
        Real(BigFloat::from_i64(0, PREC))
    }

    pub fn one() -> Self {
        Real(BigFloat::from_i64(1, PREC))
    }

    pub fn from_f64(x: f64) -> Self {
        Real::wrap(BigFloat::from_f64(x, PREC))
    }

    pub fn from_i64(x: i64) -> Self {
        Real(BigFloat::from_i64(x, PREC))
    }

    pub fn from_u64(x: u64) -> Self {
        Real(BigFloat::from_u64(x, PREC))
    }

    pub fn from_bigint(x: &BigInt) -> Self {
        let mag = x.magnitude();
        let mut acc = Real::zero();
        let scale = Real::from_u64(1u64 << 32).mul(&Real::from_u64(1u64 << 32));
        for d in mag.to_u64_digits().iter().rev() {
            acc = acc.mul(&scale).add(&Real::from_u64(*d));
        }
        if x.is_negative() {
            acc.neg()
        } else {
            acc
        }
    }

    pub fn from_rational(x: &BigRational) -> Self {
        Real::from_bigint(x.numer()).div(&Real::from_bigint(x.denom()))
    }

    pub fn pi() -> Self {
        with_consts(|cc| Real::wrap(cc.pi(PREC, RM)))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative() && !self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive() && !self.0.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        !self.0.is_nan() && !self.0.is_inf()
    }

    pub fn total_cmp(&self, other: &Real) -> Ordering {
        match self.0.cmp(&other.0) {
            Some(c) if c < 0 => Ordering::Less,
            Some(c) if c > 0 => Ordering::Greater,
            Some(_) => Ordering::Equal,
            None => panic!("comparison with NaN in reference arithmetic"),
        }
    }

    pub fn lt(&self, other: &Real) -> bool {
        self.total_cmp(other) == Ordering::Less
    }

    pub fn le(&self, other: &Real) -> bool {
        self.total_cmp(other) != Ordering::Greater
    }

    pub fn eq_val(&self, other: &Real) -> bool {
        self.total_cmp(other) == Ordering::Equal
    }

    pub fn to_f64(&self) -> f64 {
        if self.0.is_zero() {
            return 0.0;
        }
        if self.0.is_inf_pos() {
            return f64::INFINITY;
        }
        if self.0.is_inf_neg() {
            return f64::NEG_INFINITY;
        }
        let (words, _n, sign, e, _) = self.0.as_raw_parts().expect("finite value");
        let top = words[words.len() - 1];
        let next = if words.len() > 1 { words[words.len() - 2] } else { 0 };
        let frac = (top as f64) + (next as f64) * 2f64.powi(-64);
        let mag = frac * 2f64.powi(e - 64);
        if sign == Sign::Neg {
            -mag
        } else {
            mag
        }
    }

    /// Binary exponent `e` such that `|self| ∈ [2^(e-1), 2^e)`.
    pub fn exponent(&self) -> Option<i32> {
        if self.0.is_zero() {
            None
        } else {
            self.0.exponent()
        }
    }

    /// Raw little-endian mantissa words together with the binary exponent.
    pub fn raw_mantissa(&self) -> Option<(Vec<u64>, i32, bool)> {
        let (words, _n, sign, e, _) = self.0.as_raw_parts()?;
        Some((words.to_vec(), e, sign == Sign::Neg))
    }

    pub fn abs(&self) -> Self {
        Real(self.0.abs())
    }

    pub fn neg(&self) -> Self {
        Real(self.0.neg())
    }

    pub fn add(&self, o: &Real) -> Self {
        Real::wrap(self.0.add(&o.0, PREC, RM))
    }

    pub fn sub(&self, o: &Real) -> Self {
        Real::wrap(self.0.sub(&o.0, PREC, RM))
    }

    pub fn mul(&self, o: &Real) -> Self {
        Real::wrap(self.0.mul(&o.0, PREC, RM))
    }

    pub fn div(&self, o: &Real) -> Self {
        debug_assert!(!o.is_zero(), "division by zero in reference arithmetic");
        Real::wrap(self.0.div(&o.0, PREC, RM))
    }

    pub fn recip(&self) -> Self {
        Real::wrap(self.0.reciprocal(PREC, RM))
    }

    /// Exact scaling by a power of two.
    pub fn mul_pow2(&self, k: i32) -> Self {
        if self.0.is_zero() {
            return self.clone();
        }
        let mut out = self.0.clone();
        let e = out.exponent().expect("finite nonzero");
        out.set_exponent(e.checked_add(k).expect("exponent overflow"));
        Real(out)
    }

    pub fn sqrt(&self) -> Self {
        Real::wrap(self.0.sqrt(PREC, RM))
    }

    pub fn exp(&self) -> Self {
        with_consts(|cc| Real::wrap(self.0.exp(PREC, RM, cc)))
    }

    pub fn ln(&self) -> Self {
        with_consts(|cc| Real::wrap(self.0.ln(PREC, RM, cc)))
    }

    pub fn sin(&self) -> Self {
        with_consts(|cc| Real::wrap(self.0.sin(PREC, RM, cc)))
    }

    pub fn cos(&self) -> Self {
        with_consts(|cc| Real::wrap(self.0.cos(PREC, RM, cc)))
    }

    pub fn tan(&self) -> Self {
        with_consts(|cc| Real::wrap(self.0.tan(PREC, RM, cc)))
    }

    pub fn atan(&self) -> Self {
        with_consts(|cc| Real::wrap(self.0.atan(PREC, RM, cc)))
    }

    pub fn sinh(&self) -> Self {
        with_consts(|cc| Real::wrap(self.0.sinh(PREC, RM, cc)))
    }

    pub fn cosh(&self) -> Self {
        with_consts(|cc| Real::wrap(self.0.cosh(PREC, RM, cc)))
    }

    pub fn asinh(&self) -> Self {
        with_consts(|cc| Real::wrap(self.0.asinh(PREC, RM, cc)))
    }

    pub fn acosh(&self) -> Self {
        with_consts(|cc| Real::wrap(self.0.acosh(PREC, RM, cc)))
    }

    /// `self^p` for positive `self`.
    pub fn pow(&self, p: &Real) -> Self {
        with_consts(|cc| Real::wrap(self.0.pow(&p.0, PREC, RM, cc)))
    }

    /// Integer power, valid for any sign of the base.
    pub fn powi(&self, n: i64) -> Self {
        if n == 0 {
            return Real::one();
        }
        let mag = self.0.powi(n.unsigned_abs() as usize, PREC, RM);
        let mag = Real::wrap(mag);
        if n < 0 {
            mag.recip()
        } else {
            mag
        }
    }

    pub fn min_val(&self, o: &Real) -> Self {
        if self.le(o) {
            self.clone()
        } else {
            o.clone()
        }
    }

    pub fn max_val(&self, o: &Real) -> Self {
        if self.le(o) {
            o.clone()
        } else {
            self.clone()
        }
    }
}

const SHIFT_THRESHOLD: f64 = 64.0;
const BERNOULLI_TERMS: usize = 24;

/// Even-index Bernoulli numbers B_2, B_4, ... needed by the asymptotic
/// log-gamma and polygamma series, at reference precision.
static BERNOULLI_EVEN: Lazy<Vec<Real>> = Lazy::new(|| {
    let n_max = 2 * BERNOULLI_TERMS;
    let mut b: Vec<BigRational> = Vec::with_capacity(n_max + 1);
    b.push(BigRational::from_integer(1.into()));
    for m in 1..=n_max {
        // B_m = -1/(m+1) * sum_{k<m} C(m+1, k) B_k
        let mut acc = BigRational::zero();
        let mut binom = BigInt::from(1); // C(m+1, 0)
        for (k, bk) in b.iter().enumerate() {
            acc += BigRational::from_integer(binom.clone()) * bk;
            // C(m+1, k+1) = C(m+1, k) * (m+1-k)/(k+1)
            binom = binom * BigInt::from((m + 1 - k) as u64) / BigInt::from((k + 1) as u64);
        }
        b.push(-acc / BigRational::from_integer(BigInt::from((m + 1) as u64)));
    }
    (1..=BERNOULLI_TERMS).map(|k| Real::from_rational(&b[2 * k])).collect()
});

/// Shifts `x` up past the asymptotic threshold, returning the shifted
/// argument and the factors `x, x+1, ..., x+n-1` consumed by the shift.
fn shift_up(x: &Real) -> (Real, Vec<Real>) {
    let mut v = x.clone();
    let mut factors = Vec::new();
    while v.to_f64() < SHIFT_THRESHOLD {
        factors.push(v.clone());
        v = v.add(&Real::one());
    }
    (v, factors)
}

/// log Γ(x) for x > 0.
pub fn lngamma(x: &Real) -> Real {
    assert!(x.is_positive(), "lngamma requires a positive argument");
    let (big, factors) = shift_up(x);
    let ln_big = big.ln();
    // (X - 1/2) ln X - X + ln(2π)/2
    let half = Real::one().mul_pow2(-1);
    let mut acc = big.sub(&half).mul(&ln_big).sub(&big);
    let two_pi = Real::pi().mul_pow2(1);
    acc = acc.add(&two_pi.ln().mul_pow2(-1));
    // + Σ B_2k / (2k (2k-1) X^(2k-1))
    let inv2 = big.mul(&big).recip();
    let mut inv_pow = big.recip(); // X^-(2k-1)
    for (i, b2k) in BERNOULLI_EVEN.iter().enumerate() {
        let k2 = 2 * (i + 1);
        let denom = Real::from_u64((k2 * (k2 - 1)) as u64);
        acc = acc.add(&b2k.div(&denom).mul(&inv_pow));
        inv_pow = inv_pow.mul(&inv2);
    }
    if factors.is_empty() {
        return acc;
    }
    let mut prod = Real::one();
    for f in &factors {
        prod = prod.mul(f);
    }
    acc.sub(&prod.ln())
}

/// Γ(x) for x > 0.
pub fn gamma(x: &Real) -> Real {
    lngamma(x).exp()
}

/// Digamma ψ(x) for x > 0.
pub fn digamma(x: &Real) -> Real {
    assert!(x.is_positive(), "digamma requires a positive argument");
    let (big, factors) = shift_up(x);
    let inv = big.recip();
    // ln X - 1/(2X) - Σ B_2k / (2k X^2k)
    let mut acc = big.ln().sub(&inv.mul_pow2(-1));
    let inv2 = inv.mul(&inv);
    let mut inv_pow = inv2.clone(); // X^-2k
    for (i, b2k) in BERNOULLI_EVEN.iter().enumerate() {
        let k2 = 2 * (i + 1);
        acc = acc.sub(&b2k.div(&Real::from_u64(k2 as u64)).mul(&inv_pow));
        inv_pow = inv_pow.mul(&inv2);
    }
    for f in &factors {
        acc = acc.sub(&f.recip());
    }
    acc
}

/// Trigamma ψ'(x) for x > 0.
pub fn trigamma(x: &Real) -> Real {
    assert!(x.is_positive(), "trigamma requires a positive argument");
    let (big, factors) = shift_up(x);
    let inv = big.recip();
    let inv2 = inv.mul(&inv);
    // 1/X + 1/(2X^2) + Σ B_2k / X^(2k+1)
    let mut acc = inv.add(&inv2.mul_pow2(-1));
    let mut inv_pow = inv2.mul(&inv); // X^-(2k+1)
    for b2k in BERNOULLI_EVEN.iter() {
        acc = acc.add(&b2k.mul(&inv_pow));
        inv_pow = inv_pow.mul(&inv2);
    }
    for f in &factors {
        let f2 = f.mul(f);
        acc = acc.add(&f2.recip());
    }
    acc
}

/// Tetragamma ψ''(x) for x > 0.
pub fn tetragamma(x: &Real) -> Real {
    assert!(x.is_positive(), "tetragamma requires a positive argument");
    let (big, factors) = shift_up(x);
    let inv = big.recip();
    let inv2 = inv.mul(&inv);
    // -1/X^2 - 1/X^3 - Σ (2k+1) B_2k / X^(2k+2)
    let mut acc = inv2.neg().sub(&inv2.mul(&inv));
    let mut inv_pow = inv2.mul(&inv2); // X^-(2k+2)
    for (i, b2k) in BERNOULLI_EVEN.iter().enumerate() {
        let k2 = 2 * (i + 1);
        acc = acc.sub(&Real::from_u64((k2 + 1) as u64).mul(b2k).mul(&inv_pow));
        inv_pow = inv_pow.mul(&inv2);
    }
    for f in &factors {
        let f3 = f.mul(f).mul(f);
        acc = acc.sub(&f3.recip().mul_pow2(1));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &Real, b: f64, rel: f64) {
        let av = a.to_f64();
        assert!(
            (av - b).abs() <= rel * b.abs().max(1.0),
            "got {av}, want {b}"
        );
    }

    #[test]
    fn basic_arithmetic_round_trips() {
        let a = Real::from_f64(1.5);
        let b = Real::from_f64(-0.25);
        assert_eq!(a.add(&b).to_f64(), 1.25);
        assert_eq!(a.mul(&b).to_f64(), -0.375);
        assert_eq!(a.mul_pow2(3).to_f64(), 12.0);
    }

    #[test]
    fn elementary_functions_match_f64() {
        for &x in &[0.3, 1.0, 2.5, 10.0] {
            let r = Real::from_f64(x);
            assert_close(&r.exp(), x.exp(), 1e-15);
            assert_close(&r.ln(), x.ln(), 1e-15);
            assert_close(&r.sin(), x.sin(), 1e-15);
            assert_close(&r.tan(), x.tan(), 1e-15);
        }
    }

    #[test]
    fn gamma_factorials() {
        // Γ(n) = (n-1)!
        let g6 = gamma(&Real::from_f64(6.0));
        assert_close(&g6, 120.0, 1e-30);
        let g1 = gamma(&Real::from_f64(1.0));
        assert_close(&g1, 1.0, 1e-30);
        // Γ(1/2) = √π
        let gh = gamma(&Real::from_f64(0.5));
        assert_close(&gh, std::f64::consts::PI.sqrt(), 1e-15);
    }

    #[test]
    fn digamma_known_values() {
        // ψ(1) = -γ
        let euler_gamma = 0.577_215_664_901_532_9_f64;
        assert_close(&digamma(&Real::one()).neg(), euler_gamma, 1e-15);
        // ψ(1/2) = -γ - 2 ln 2
        let want = -euler_gamma - 2.0 * std::f64::consts::LN_2;
        let got = digamma(&Real::from_f64(0.5));
        assert!((got.to_f64() - want).abs() < 1e-14);
        // recurrence ψ(x+1) = ψ(x) + 1/x at reference precision
        let x = Real::from_f64(0.37);
        let lhs = digamma(&x.add(&Real::one()));
        let rhs = digamma(&x).add(&x.recip());
        assert!(lhs.sub(&rhs).abs().to_f64() < 1e-60);
    }

    #[test]
    fn trigamma_known_values() {
        // ψ'(1) = π²/6
        let want = std::f64::consts::PI.powi(2) / 6.0;
        assert_close(&trigamma(&Real::one()), want, 1e-15);
        // ψ'(1/2) = π²/2
        let want = std::f64::consts::PI.powi(2) / 2.0;
        assert_close(&trigamma(&Real::from_f64(0.5)), want, 1e-15);
    }

    #[test]
    fn tetragamma_known_values() {
        // ψ''(1) = -2 ζ(3)
        let zeta3 = 1.202_056_903_159_594_3_f64;
        let got = tetragamma(&Real::one()).to_f64();
        assert!((got + 2.0 * zeta3).abs() < 1e-14, "got {got}");
        // recurrence ψ''(x+1) = ψ''(x) + 2/x³
        let x = Real::from_f64(0.8);
        let lhs = tetragamma(&x.add(&Real::one()));
        let rhs = tetragamma(&x).add(&x.powi(3).recip().mul_pow2(1));
        assert!(lhs.sub(&rhs).abs().to_f64() < 1e-55);
    }

    #[test]
    fn to_f64_precision() {
        let x = Real::from_f64(std::f64::consts::PI);
        assert_eq!(x.to_f64(), std::f64::consts::PI);
        let tiny = Real::from_f64(3.0).mul_pow2(-40);
        assert_eq!(tiny.to_f64(), 3.0 * 2f64.powi(-40));
    }
}
