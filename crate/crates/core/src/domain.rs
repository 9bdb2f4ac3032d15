//! Natural-domain computation.
//!
//! Walks the AST bottom-up, restricting the working domain at every node
//! that imposes a constraint: positivity for log/gamma/digamma/sqrt and
//! non-integer powers, arg > 1 for acosh, and pole removal for quotients,
//! tan, and cot. Boundaries and poles are located with the same
//! root-bracketing machinery as the zero locus.

use crate::expr::{eval_scalar, Expr, IntrinsicKind};
use crate::interval::{Interval, IntervalDomain};
use crate::roots::ScanPolicy;

#[derive(Clone, Debug)]
pub struct NaturalDomain {
    pub domain: IntervalDomain,
    /// Set when some boundary or pole could not be pinned down at the scan
    /// resolution; the returned domain is then a best effort, not a fact.
    pub unresolved: bool,
}

pub fn natural_domain(f: &Expr, within: &IntervalDomain, scan: &ScanPolicy) -> NaturalDomain {
    let mut ctx = Ctx { scan, unresolved: false };
    let domain = ctx.restrict(f, within.clone());
    NaturalDomain { domain, unresolved: ctx.unresolved }
}

struct Ctx<'a> {
    scan: &'a ScanPolicy,
    unresolved: bool,
}

impl Ctx<'_> {
    fn restrict(&mut self, e: &Expr, dom: IntervalDomain) -> IntervalDomain {
        match e {
            Expr::Const(_) | Expr::Var => dom,
            Expr::Neg(a) => self.restrict(a, dom),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                let d = self.restrict(a, dom);
                self.restrict(b, d)
            }
            Expr::Div(a, b) => {
                let d = self.restrict(a, dom);
                let d = self.restrict(b, d);
                self.remove_zeros(b, d)
            }
            Expr::Pow(a, c) => {
                let d = self.restrict(a, dom);
                match c.as_integer() {
                    Some(n) if n >= 0 => d,
                    Some(_) => self.remove_zeros(a, d),
                    None => self.keep_positive(a, d, 0.0),
                }
            }
            Expr::Intrinsic(k, a) => {
                let d = self.restrict(a, dom);
                match k {
                    IntrinsicKind::Log
                    | IntrinsicKind::Gamma
                    | IntrinsicKind::Digamma
                    | IntrinsicKind::Sqrt => self.keep_positive(a, d, 0.0),
                    IntrinsicKind::Acosh => self.keep_positive(a, d, 1.0),
                    IntrinsicKind::Tan => {
                        let cos_arg = Expr::Intrinsic(IntrinsicKind::Cos, Box::new(a.as_ref().clone()));
                        self.remove_zeros(&cos_arg, d)
                    }
                    IntrinsicKind::Cot => {
                        let sin_arg = Expr::Intrinsic(IntrinsicKind::Sin, Box::new(a.as_ref().clone()));
                        self.remove_zeros(&sin_arg, d)
                    }
                    _ => d,
                }
            }
        }
    }

    /// Drops isolated zeros of `g` from `dom` (poles of 1/g).
    fn remove_zeros(&mut self, g: &Expr, dom: IntervalDomain) -> IntervalDomain {
        let locus = crate::roots::zero_locus(g, &dom, self.scan);
        self.unresolved |= locus.unresolved;
        let mut cuts = locus.points();
        cuts.extend(cut_at_origin(g, &dom));
        split_at_points(&dom, &cuts)
    }

    /// Keeps the part of `dom` where g(x) > threshold.
    fn keep_positive(&mut self, g: &Expr, dom: IntervalDomain, threshold: f64) -> IntervalDomain {
        let shifted = if threshold == 0.0 {
            g.clone()
        } else {
            Expr::Sub(
                Box::new(g.clone()),
                Box::new(Expr::Const(crate::expr::ConstVal::from_text(&threshold.to_string()).unwrap())),
            )
        };
        let locus = crate::roots::zero_locus(&shifted, &dom, self.scan);
        self.unresolved |= locus.unresolved;
        let mut cuts = locus.points();
        cuts.extend(cut_at_origin(&shifted, &dom));
        let pieces = split_at_points(&dom, &cuts);
        let mut keep = Vec::new();
        for iv in pieces.components() {
            match sample_sign(&shifted, iv) {
                Some(true) => keep.push(*iv),
                Some(false) => {}
                None => self.unresolved = true,
            }
        }
        IntervalDomain::from_intervals(keep)
    }
}

/// The geometric scan never samples x = 0, so a boundary sitting exactly at
/// the origin (g(0) = 0 or g undefined there) is cut explicitly.
fn cut_at_origin(g: &Expr, dom: &IntervalDomain) -> Option<f64> {
    if !dom.components().iter().any(|iv| iv.contains(0.0)) {
        return None;
    }
    match eval_scalar(g, &0.0) {
        Ok(v) if v != 0.0 => None,
        _ => Some(0.0),
    }
}

/// Splits every component of `dom` at each of `points` that falls inside
/// it, excluding the points themselves.
fn split_at_points(dom: &IntervalDomain, points: &[f64]) -> IntervalDomain {
    let mut out = Vec::new();
    for iv in dom.components() {
        let mut cuts: Vec<f64> = points.iter().copied().filter(|p| iv.contains(*p)).collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut lo = iv.lo;
        for c in cuts {
            if lo < c {
                out.push(Interval::new(lo, c));
            }
            lo = c;
        }
        if lo < iv.hi {
            out.push(Interval::new(lo, iv.hi));
        }
    }
    IntervalDomain::from_intervals(out)
}

/// Sign of `g` at a representative interior point of `iv`: `Some(true)` for
/// positive. Tries a few points in case the first lands on a zero.
fn sample_sign(g: &Expr, iv: &Interval) -> Option<bool> {
    for x in representatives(iv) {
        if let Ok(v) = eval_scalar(g, &x) {
            if v > 0.0 {
                return Some(true);
            }
            if v < 0.0 {
                return Some(false);
            }
        }
    }
    None
}

fn representatives(iv: &Interval) -> Vec<f64> {
    let mut out = Vec::new();
    match (iv.lo.is_finite(), iv.hi.is_finite()) {
        (true, true) => {
            out.push(0.5 * (iv.lo + iv.hi));
            if iv.lo > 0.0 {
                out.push((iv.lo * iv.hi).sqrt());
            } else if iv.hi < 0.0 {
                out.push(-(iv.lo * iv.hi).sqrt());
            }
            out.push(iv.lo + 0.1 * (iv.hi - iv.lo));
            out.push(iv.hi - 0.1 * (iv.hi - iv.lo));
        }
        (true, false) => {
            out.push(iv.lo + 1.0);
            out.push(iv.lo.abs().max(1.0) * 10.0);
        }
        (false, true) => {
            out.push(iv.hi - 1.0);
            out.push(-iv.hi.abs().max(1.0) * 10.0);
        }
        (false, false) => {
            out.push(1.0);
            out.push(-1.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use std::f64::consts::PI;

    fn nd(src: &str, within: &str) -> NaturalDomain {
        natural_domain(
            &parse(src).unwrap(),
            &IntervalDomain::parse(within).unwrap(),
            &ScanPolicy::coarse(),
        )
    }

    #[test]
    fn log_restricts_to_positive_axis() {
        let d = nd("log(x)", "(-inf, inf)");
        assert_eq!(d.domain.components(), &[Interval::new(0.0, f64::INFINITY)]);
        assert!(!d.unresolved);
    }

    #[test]
    fn tan_poles_split_the_window() {
        let d = nd("tan(x)", "(-2, 2)");
        let comps = d.domain.components();
        assert_eq!(comps.len(), 3);
        assert!((comps[0].hi + PI / 2.0).abs() < 1e-10);
        assert!((comps[1].lo + PI / 2.0).abs() < 1e-10);
        assert!((comps[1].hi - PI / 2.0).abs() < 1e-10);
        assert!((comps[2].lo - PI / 2.0).abs() < 1e-10);
        assert_eq!(comps[2].hi, 2.0);
    }

    #[test]
    fn polynomials_are_entire() {
        let d = nd("x^2", "(-inf, inf)");
        assert_eq!(d.domain, IntervalDomain::full());
    }

    #[test]
    fn sqrt_shift_needs_x_above_one() {
        let d = nd("1 + sqrt(x - 1)", "(-inf, inf)");
        let comps = d.domain.components();
        assert_eq!(comps.len(), 1);
        assert!((comps[0].lo - 1.0).abs() < 1e-12);
        assert_eq!(comps[0].hi, f64::INFINITY);
    }

    #[test]
    fn rational_poles_are_removed() {
        let d = nd("(x + 1)/(x^2 + x - 2)", "(-inf, inf)");
        let comps = d.domain.components();
        // poles at -2 and 1
        assert_eq!(comps.len(), 3);
        assert!((comps[0].hi + 2.0).abs() < 1e-10);
        assert!((comps[1].lo + 2.0).abs() < 1e-10);
        assert!((comps[1].hi - 1.0).abs() < 1e-10);
        assert!((comps[2].lo - 1.0).abs() < 1e-10);
    }

    #[test]
    fn acosh_needs_argument_above_one() {
        let d = nd("acosh(x)", "(-inf, inf)");
        let comps = d.domain.components();
        assert_eq!(comps.len(), 1);
        assert!((comps[0].lo - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nested_constraints_compose() {
        // log(sin(x)) on (0, 2π): needs sin > 0, i.e. (0, π)
        let d = nd("log(sin(x))", "(0.000001, 6.28)");
        let comps = d.domain.components();
        assert_eq!(comps.len(), 1);
        assert!((comps[0].hi - PI).abs() < 1e-10);
    }
}
