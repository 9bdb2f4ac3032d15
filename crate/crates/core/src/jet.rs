//! Second-order forward-mode differentiation.
//!
//! A [`Jet2`] carries (f(x), f'(x), f''(x)) through the AST via the
//! second-order chain rule. Works over both numeric backends; the `Real`
//! instantiation is the reference for κ, H, and G.

use crate::expr::{ConstVal, EvalError, Expr, IntrinsicKind};
use crate::real::Real;
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct Jet<T> {
    pub v: T,
    pub d1: T,
    pub d2: T,
}

/// Reference-precision jet.
pub type Jet2 = Jet<Real>;

impl<T: Scalar> Jet<T> {
    pub fn constant(v: T) -> Jet<T> {
        Jet { v, d1: T::zero(), d2: T::zero() }
    }

    pub fn variable(v: T) -> Jet<T> {
        Jet { v, d1: T::one(), d2: T::zero() }
    }

    fn neg(&self) -> Jet<T> {
        Jet { v: self.v.neg(), d1: self.d1.neg(), d2: self.d2.neg() }
    }

    fn add(&self, o: &Jet<T>) -> Jet<T> {
        Jet { v: self.v.add(&o.v), d1: self.d1.add(&o.d1), d2: self.d2.add(&o.d2) }
    }

    fn sub(&self, o: &Jet<T>) -> Jet<T> {
        Jet { v: self.v.sub(&o.v), d1: self.d1.sub(&o.d1), d2: self.d2.sub(&o.d2) }
    }

    fn mul(&self, o: &Jet<T>) -> Jet<T> {
        let d1 = self.d1.mul(&o.v).add(&self.v.mul(&o.d1));
        let cross = self.d1.mul(&o.d1);
        let d2 = self
            .d2
            .mul(&o.v)
            .add(&cross)
            .add(&cross)
            .add(&self.v.mul(&o.d2));
        Jet { v: self.v.mul(&o.v), d1, d2 }
    }

    fn div(&self, o: &Jet<T>) -> Jet<T> {
        let v = self.v.div(&o.v);
        // (f/g)' = (f' - (f/g) g')/g
        let d1 = self.d1.sub(&v.mul(&o.d1)).div(&o.v);
        // (f/g)'' = (f'' - 2 (f/g)' g' - (f/g) g'')/g
        let two_d1g1 = d1.mul(&o.d1);
        let d2 = self
            .d2
            .sub(&two_d1g1)
            .sub(&two_d1g1)
            .sub(&v.mul(&o.d2))
            .div(&o.v);
        Jet { v, d1, d2 }
    }

    /// Composes a univariate rule (φ(u), φ'(u), φ''(u)) with this jet.
    fn chain(&self, v: T, p1: T, p2: T) -> Jet<T> {
        let d1 = p1.mul(&self.d1);
        let d2 = p2.mul(&self.d1).mul(&self.d1).add(&p1.mul(&self.d2));
        Jet { v, d1, d2 }
    }

    /// Accepts the jet into further arithmetic only if every component is
    /// admissible on the backend (see [`Scalar::admit`]).
    fn admit(self) -> Option<Jet<T>> {
        Some(Jet { v: self.v.admit()?, d1: self.d1.admit()?, d2: self.d2.admit()? })
    }

    /// [`chain`](Self::chain) with the rule admitted first, so an overflowed
    /// rule never mixes with a zero derivative.
    fn chain_admitted(&self, v: T, p1: T, p2: T) -> Option<Jet<T>> {
        self.chain(v.admit()?, p1.admit()?, p2.admit()?).admit()
    }
}

struct JetCtx<'a, T> {
    x: &'a T,
    next_id: usize,
}

impl<'a, T: Scalar> JetCtx<'a, T> {
    fn fail(&self, id: usize, e: &Expr, reason: &str) -> EvalError {
        EvalError::Domain { node: id, expr: e.to_string(), reason: reason.to_string() }
    }

    fn eval(&mut self, e: &Expr) -> Result<Jet<T>, EvalError> {
        let id = self.next_id;
        self.next_id += 1;
        match e {
            Expr::Const(c) => Ok(Jet::constant(T::from_parts(c.as_f64(), || c.as_real()))),
            Expr::Var => Ok(Jet::variable(self.x.clone())),
            Expr::Neg(a) => Ok(self.eval(a)?.neg()),
            Expr::Add(a, b) => Ok(self.eval(a)?.add(&self.eval(b)?)),
            Expr::Sub(a, b) => Ok(self.eval(a)?.sub(&self.eval(b)?)),
            Expr::Mul(a, b) => Ok(self.eval(a)?.mul(&self.eval(b)?)),
            Expr::Div(a, b) => {
                let num = self.eval(a)?;
                let den = self.eval(b)?;
                if den.v.is_zero() {
                    return Err(self.fail(id, e, "division by zero"));
                }
                Ok(num.div(&den))
            }
            Expr::Pow(a, c) => {
                let base = self.eval(a)?;
                pow_jet(&base, c).ok_or_else(|| {
                    self.fail(id, e, "power undefined or non-differentiable at this base")
                })
            }
            Expr::Intrinsic(k, a) => {
                let arg = self.eval(a)?;
                intrinsic_jet(*k, &arg)
                    .ok_or_else(|| self.fail(id, e, "argument outside the differentiable domain"))
            }
        }
    }
}

fn pow_jet<T: Scalar>(u: &Jet<T>, c: &ConstVal) -> Option<Jet<T>> {
    if let Some(n) = c.as_integer() {
        if u.v.is_zero() && n <= 1 {
            // u^0 is constant 1; keep it simple and defined everywhere
            if n == 0 {
                return Some(Jet::constant(T::one()));
            }
            if n == 1 {
                return Some(u.clone());
            }
            return None;
        }
        if n == 0 {
            return Some(Jet::constant(T::one()));
        }
        let alpha = T::from_f64(n as f64);
        let um2 = u.v.powi(n - 2);
        let um1 = um2.mul(&u.v);
        let v = um1.mul(&u.v);
        let p1 = alpha.mul(&um1);
        let p2 = alpha.mul(&T::from_f64((n - 1) as f64)).mul(&um2);
        return u.chain_admitted(v, p1, p2);
    }
    if u.v.is_zero() || u.v.is_negative() {
        return None;
    }
    let alpha = T::from_parts(c.as_f64(), || c.as_real());
    let one = T::one();
    let um2 = u.v.pow(&alpha.sub(&one).sub(&one));
    let um1 = um2.mul(&u.v);
    let v = um1.mul(&u.v);
    let p1 = alpha.mul(&um1);
    let p2 = alpha.mul(&alpha.sub(&one)).mul(&um2);
    u.chain_admitted(v, p1, p2)
}

fn intrinsic_jet<T: Scalar>(k: IntrinsicKind, u: &Jet<T>) -> Option<Jet<T>> {
    if crate::expr::trig_kind(k) && !u.v.trig_arg_ok() {
        return None;
    }
    let one = T::one();
    let positive = !u.v.is_zero() && !u.v.is_negative();
    let (v, p1, p2) = match k {
        IntrinsicKind::Sin => {
            let (s, c) = (u.v.sin(), u.v.cos());
            (s.clone(), c, s.neg())
        }
        IntrinsicKind::Cos => {
            let (s, c) = (u.v.sin(), u.v.cos());
            (c.clone(), s.neg(), c.neg())
        }
        IntrinsicKind::Tan => {
            let c = u.v.cos();
            if c.is_zero() {
                return None;
            }
            let t = u.v.sin().div(&c);
            let sec2 = one.add(&t.mul(&t));
            let p2 = t.mul(&sec2).mul_2();
            (t, sec2, p2)
        }
        IntrinsicKind::Cot => {
            let s = u.v.sin();
            if s.is_zero() {
                return None;
            }
            let t = u.v.cos().div(&s);
            let csc2 = one.add(&t.mul(&t));
            let p2 = t.mul(&csc2).mul_2();
            (t, csc2.neg(), p2)
        }
        IntrinsicKind::Exp => {
            let e = u.v.exp();
            (e.clone(), e.clone(), e)
        }
        IntrinsicKind::Log => {
            if !positive {
                return None;
            }
            let inv = one.div(&u.v);
            (u.v.ln(), inv.clone(), inv.mul(&inv).neg())
        }
        IntrinsicKind::Sinh => {
            let (s, c) = (u.v.sinh(), u.v.cosh());
            (s.clone(), c, s)
        }
        IntrinsicKind::Cosh => {
            let (s, c) = (u.v.sinh(), u.v.cosh());
            (c.clone(), s, c)
        }
        IntrinsicKind::Atan => {
            let den = one.add(&u.v.mul(&u.v));
            let p1 = one.div(&den);
            let p2 = u.v.mul_2().neg().div(&den.mul(&den));
            (u.v.atan(), p1, p2)
        }
        IntrinsicKind::Asinh => {
            let w = one.add(&u.v.mul(&u.v));
            let rt = w.sqrt();
            let p1 = one.div(&rt);
            let p2 = u.v.neg().div(&w.mul(&rt));
            (u.v.asinh(), p1, p2)
        }
        IntrinsicKind::Acosh => {
            let shifted = u.v.sub(&one);
            if shifted.is_zero() || shifted.is_negative() {
                return None;
            }
            let w = u.v.mul(&u.v).sub(&one);
            let rt = w.sqrt();
            let p1 = one.div(&rt);
            let p2 = u.v.neg().div(&w.mul(&rt));
            (u.v.acosh(), p1, p2)
        }
        IntrinsicKind::Sqrt => {
            if !positive {
                return None;
            }
            let rt = u.v.sqrt();
            let p1 = one.div(&rt.mul_2());
            let p2 = p1.neg().div(&u.v.mul_2());
            (rt, p1, p2)
        }
        IntrinsicKind::Gamma => {
            if !positive {
                return None;
            }
            let g = u.v.lngamma().exp();
            let psi = u.v.digamma();
            let p1 = g.mul(&psi);
            let p2 = g.mul(&psi.mul(&psi).add(&u.v.trigamma()));
            (g, p1, p2)
        }
        IntrinsicKind::Digamma => {
            if !positive {
                return None;
            }
            (u.v.digamma(), u.v.trigamma(), u.v.tetragamma())
        }
    };
    u.chain_admitted(v, p1, p2)
}

trait Mul2 {
    fn mul_2(&self) -> Self;
}

impl<T: Scalar> Mul2 for T {
    fn mul_2(&self) -> T {
        self.add(self)
    }
}

/// Evaluates `f` and its first two derivatives at `x`.
pub fn eval_jet2(f: &Expr, x: &Real) -> Result<Jet2, EvalError> {
    JetCtx { x, next_id: 0 }.eval(f)
}

/// Jet evaluation over any backend (used by the f64 scanning paths).
pub fn eval_jet<T: Scalar>(f: &Expr, x: &T) -> Result<Jet<T>, EvalError> {
    JetCtx { x, next_id: 0 }.eval(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn jet(src: &str, x: f64) -> Jet2 {
        eval_jet2(&parse(src).unwrap(), &Real::from_f64(x)).unwrap()
    }

    /// Central finite differences at reference precision, step 2^-20.
    fn fd(src: &str, x: f64) -> (f64, f64) {
        let f = parse(src).unwrap();
        let h = Real::one().mul_pow2(-20);
        let xr = Real::from_f64(x);
        let fp = crate::expr::eval(&f, &xr.add(&h)).unwrap();
        let fm = crate::expr::eval(&f, &xr.sub(&h)).unwrap();
        let f0 = crate::expr::eval(&f, &xr).unwrap();
        let d1 = fp.sub(&fm).mul_pow2(19); // /(2h)
        let d2 = fp.add(&fm).sub(&f0.mul_pow2(1)).mul_pow2(40); // /h²
        (d1.to_f64(), d2.to_f64())
    }

    fn assert_matches_fd(src: &str, x: f64) {
        let j = jet(src, x);
        let (fd1, fd2) = fd(src, x);
        let d1 = j.d1.to_f64();
        let d2 = j.d2.to_f64();
        assert!((d1 - fd1).abs() <= 1e-6 * (1.0 + d1.abs()), "{src} d1 at {x}: {d1} vs {fd1}");
        assert!((d2 - fd2).abs() <= 1e-4 * (1.0 + d2.abs()), "{src} d2 at {x}: {d2} vs {fd2}");
    }

    #[test]
    fn power_rule() {
        let j = jet("x^3", 2.0);
        assert_eq!(j.v.to_f64(), 8.0);
        assert_eq!(j.d1.to_f64(), 12.0);
        assert_eq!(j.d2.to_f64(), 12.0);
    }

    #[test]
    fn exp_is_a_fixed_point() {
        let j = jet("exp(x)", 1.0);
        let e = std::f64::consts::E;
        assert!((j.v.to_f64() - e).abs() < 1e-15);
        assert!((j.d1.to_f64() - e).abs() < 1e-15);
        assert!((j.d2.to_f64() - e).abs() < 1e-15);
    }

    #[test]
    fn finite_difference_oracle() {
        assert_matches_fd("tan(x)", 0.3);
        assert_matches_fd("sin(log(x))", 3.7);
        assert_matches_fd("gamma(x)", 2.3);
        assert_matches_fd("digamma(x)", 1.9);
        assert_matches_fd("cot(x)", 1.1);
        assert_matches_fd("acosh(x)", 1.8);
        assert_matches_fd("x^0.5 - 2*x^1.5", 0.9);
        assert_matches_fd("(x + 1)/(x^2 + x - 2)", 3.2);
        assert_matches_fd("asinh(sinh(x))", 0.4);
        assert_matches_fd("x^-2", 1.3);
    }

    #[test]
    fn linearity_and_product_rule() {
        let f = parse("sin(x)").unwrap();
        let g = parse("x^2 + 1").unwrap();
        let fg = parse("sin(x)*(x^2 + 1)").unwrap();
        let lin = parse("3*sin(x) - 2*(x^2 + 1)").unwrap();
        for &x in &[0.3, 1.0, 2.2, 5.5] {
            let xr = Real::from_f64(x);
            let jf = eval_jet2(&f, &xr).unwrap();
            let jg = eval_jet2(&g, &xr).unwrap();
            let jfg = eval_jet2(&fg, &xr).unwrap();
            let jlin = eval_jet2(&lin, &xr).unwrap();
            // product rule
            let want = jf.d1.mul(&jg.v).add(&jf.v.mul(&jg.d1));
            assert!(jfg.d1.sub(&want).abs().to_f64() < 1e-70 * (1.0 + want.to_f64().abs()));
            // linearity
            let want = jf.d2.mul(&Real::from_f64(3.0)).sub(&jg.d2.mul_pow2(1));
            assert!(jlin.d2.sub(&want).abs().to_f64() < 1e-70 * (1.0 + want.to_f64().abs()));
        }
    }

    #[test]
    fn nondifferentiable_points_are_errors() {
        assert!(eval_jet2(&parse("sqrt(x)").unwrap(), &Real::zero()).is_err());
        assert!(eval_jet2(&parse("acosh(x)").unwrap(), &Real::one()).is_err());
    }
}
