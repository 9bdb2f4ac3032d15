//! Compatibility of a pair (g, h) for composition.
//!
//! The sufficient condition under test is boundedness of
//! A(x) = (κ(h,x) + κ(g,h(x))) / (1 + κ(g∘h,x)) over the domain, with the
//! rule ∞/∞ = 1. The definitional ratio is
//! B(x) = μ(g,h(x))·μ(h,x) / μ(g∘h,x). At generic points (x ≠ 0, h(x) ≠ 0,
//! g(h(x)) ≠ 0, all κ finite) the chain rule gives the exact identity
//! B = 1 + A, which doubles as a test of the κ composition equality.

use crate::conditioning::{kappa, Kappa};
use crate::expr::{eval, Expr};
use crate::interval::IntervalDomain;
use crate::real::Real;
use crate::roots::{critical_locus, zero_locus, ScanPolicy};
use crate::stability::geometric_samples;
use crate::{domain::natural_domain, expr::EvalError};

/// (num, den) with either possibly ∞; the one nonobvious entry is ∞/∞ = 1.
fn ext_div(num: f64, den: f64) -> f64 {
    match (num.is_infinite(), den.is_infinite()) {
        (true, true) => 1.0,
        (false, true) => 0.0,
        (true, false) => f64::INFINITY,
        (false, false) => num / den,
    }
}

fn kappa_f64(k: &Kappa) -> f64 {
    k.to_f64()
}

pub fn a_ratio(g: &Expr, h: &Expr, x: &Real) -> Result<f64, EvalError> {
    let y = eval(h, x)?;
    let kh = kappa_f64(&kappa(h, x)?);
    let kg = kappa_f64(&kappa(g, &y)?);
    let kc = kappa_f64(&kappa(&g.substitute(h), x)?);
    Ok(ext_div(kh + kg, 1.0 + kc))
}

pub fn b_ratio(g: &Expr, h: &Expr, x: &Real) -> Result<f64, EvalError> {
    let y = eval(h, x)?;
    let mh = 1.0 + kappa_f64(&kappa(h, x)?);
    let mg = 1.0 + kappa_f64(&kappa(g, &y)?);
    let mc = 1.0 + kappa_f64(&kappa(&g.substitute(h), x)?);
    Ok(ext_div(mg * mh, mc))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CompatVerdict {
    Supported,
    Refuted,
    Inconclusive,
}

/// Counts of the four proof cases among sampled points:
/// 1: x = 0; 2: g(h(x)) = 0, x ≠ 0; 3: generic; 4: h(x) = 0 with
/// g(h(x)) ≠ 0 and x ≠ 0 (A = ∞ there).
#[derive(Clone, Copy, Debug, Default)]
pub struct CaseLog {
    pub case1: usize,
    pub case2: usize,
    pub case3: usize,
    pub case4: usize,
}

#[derive(Clone, Debug)]
pub struct CompatReport {
    pub sup_a: f64,
    pub sup_b: f64,
    pub verdict: CompatVerdict,
    pub case_log: CaseLog,
    /// Sampled x where h(x) fell outside g's domain.
    pub image_violations: usize,
    /// Divergent probe sequence when refuted.
    pub witness: Vec<f64>,
    pub note: String,
}

struct PointEval {
    a: f64,
    b: f64,
}

fn classify_and_eval(
    g: &Expr,
    h: &Expr,
    composed: &Expr,
    x: &Real,
    log: &mut CaseLog,
) -> Option<PointEval> {
    let y = eval(h, x).ok()?;
    let gy = eval(g, &y).ok()?;
    let kh = kappa_f64(&kappa(h, x).ok()?);
    let kg = kappa_f64(&kappa(g, &y).ok()?);
    let kc = kappa_f64(&kappa(composed, x).ok()?);
    if x.is_zero() {
        log.case1 += 1;
    } else if gy.is_zero() {
        log.case2 += 1;
    } else if y.is_zero() {
        log.case4 += 1;
    } else {
        log.case3 += 1;
    }
    Some(PointEval {
        a: ext_div(kh + kg, 1.0 + kc),
        b: ext_div((1.0 + kg) * (1.0 + kh), 1.0 + kc),
    })
}

/// True when the tail of the sequence keeps growing and has left any
/// plausible bound behind.
fn diverges(vals: &[f64]) -> bool {
    if vals.len() < 8 {
        return false;
    }
    let tail = &vals[vals.len() - 8..];
    let monotone = tail.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-9));
    monotone && tail[7] >= 100.0 && tail[7] >= 10.0 * tail[0]
}

pub fn check_compatible(
    g: &Expr,
    h: &Expr,
    dom: &IntervalDomain,
    samples_per_component: usize,
    seed: u64,
    scan: &ScanPolicy,
) -> CompatReport {
    let composed = g.substitute(h);
    let g_dom = natural_domain(g, &IntervalDomain::full(), scan).domain;

    let mut xs: Vec<f64> = Vec::new();
    for iv in dom.split_at_zero().components() {
        xs.extend(geometric_samples(iv, samples_per_component, seed));
    }
    // structurally dangerous points: zeros of h, zeros of g∘h, critical
    // points of h, plus relative offsets from each
    let mut targeted: Vec<f64> = Vec::new();
    for z in zero_locus(h, dom, scan)
        .points()
        .into_iter()
        .chain(zero_locus(&composed, dom, scan).points())
    {
        for k in [2, 5, 8] {
            let eps = 10f64.powi(-k);
            for s in [1.0, -1.0] {
                targeted.push(z * (s * eps).exp());
            }
        }
    }
    let crit = critical_locus(h, dom, scan).points();
    let step = (crit.len() / 24).max(1);
    targeted.extend(crit.iter().step_by(step).copied());
    xs.extend(targeted.iter().copied().filter(|x| dom.contains(*x)));

    let mut sup_a = 0.0f64;
    let mut sup_b = 0.0f64;
    let mut case_log = CaseLog::default();
    let mut image_violations = 0usize;
    let mut image_components: Vec<usize> = Vec::new();
    let mut evaluated = 0usize;

    for &x in &xs {
        let xr = Real::from_f64(x);
        let y = match eval(h, &xr) {
            Ok(y) => y,
            Err(_) => continue,
        };
        let yf = y.to_f64();
        match g_dom.components().iter().position(|iv| iv.contains(yf)) {
            Some(i) => {
                if !image_components.contains(&i) {
                    image_components.push(i);
                }
            }
            None => {
                image_violations += 1;
                continue;
            }
        }
        if let Some(p) = classify_and_eval(g, h, &composed, &xr, &mut case_log) {
            evaluated += 1;
            if p.a.is_finite() {
                sup_a = sup_a.max(p.a);
            }
            if p.b.is_finite() {
                sup_b = sup_b.max(p.b);
            }
        }
    }

    // refutation probes: A along sequences toward the unbounded and finite
    // ends of each component
    let mut witness: Vec<f64> = Vec::new();
    'comps: for iv in dom.split_at_zero().components() {
        let mut sequences: Vec<Vec<f64>> = Vec::new();
        if !iv.hi.is_finite() || !iv.lo.is_finite() {
            let dir = if iv.hi.is_finite() { -1.0 } else { 1.0 };
            let x0 = if dir > 0.0 { iv.lo.abs().max(1.0) } else { iv.hi.abs().max(1.0) };
            let sign = if iv.hi <= 0.0 { -1.0 } else { 1.0 };
            let mut seq = Vec::new();
            let mut m = x0;
            while m <= scan.max_abs {
                let x = sign * m;
                if iv.contains(x) {
                    seq.push(x);
                }
                m *= 2.0;
            }
            sequences.push(seq);
        }
        for (e, dir) in [(iv.lo, 1.0), (iv.hi, -1.0)] {
            if e.is_finite() && e != 0.0 {
                sequences.push((1..=9).map(|j| e * (dir * 10f64.powi(-j)).exp()).collect());
            }
        }
        for seq in sequences {
            let vals: Vec<f64> = seq
                .iter()
                .filter_map(|x| a_ratio(g, h, &Real::from_f64(*x)).ok())
                .take_while(|a| a.is_finite())
                .collect();
            if diverges(&vals) {
                witness = seq;
                break 'comps;
            }
        }
    }

    let (verdict, note) = if !witness.is_empty() {
        (CompatVerdict::Refuted, "A(x) grows without bound along the witness sequence".to_string())
    } else if image_components.len() > 1 {
        (CompatVerdict::Inconclusive, "image of h spans several components of g's domain".to_string())
    } else if evaluated < xs.len() / 2 {
        (CompatVerdict::Inconclusive, "too many evaluation failures".to_string())
    } else {
        (CompatVerdict::Supported, format!("sup A ≈ {sup_a:.6} over {evaluated} samples"))
    };
    CompatReport {
        sup_a,
        sup_b,
        verdict,
        case_log,
        image_violations,
        witness,
        note,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditioning::composition_kappa_check;
    use crate::expr::parse;

    #[test]
    fn monomial_pair_has_constant_a() {
        let g = parse("x^2").unwrap();
        let h = parse("x^3").unwrap();
        let a = a_ratio(&g, &h, &Real::from_f64(5.0)).unwrap();
        assert!((a - 5.0 / 7.0).abs() < 1e-12, "A = {a}");
        let b = b_ratio(&g, &h, &Real::from_f64(5.0)).unwrap();
        assert!((b - 12.0 / 7.0).abs() < 1e-12, "B = {b}");
    }

    #[test]
    fn at_zero_a_reduces_to_kappa_of_g() {
        // κ(h,0) = κ(g∘h,0) = 0, so A(0) = κ(g, h(0))
        let g = parse("x^2").unwrap();
        let h = parse("x + 1").unwrap();
        let a = a_ratio(&g, &h, &Real::zero()).unwrap();
        assert!((a - 2.0).abs() < 1e-12, "A(0) = {a}");
        let b = b_ratio(&g, &h, &Real::zero()).unwrap();
        assert!((b - 3.0).abs() < 1e-12);
    }

    #[test]
    fn vanishing_composition_uses_infinity_rule() {
        // g(h(1)) = 0 with κ(g, h(1)) = ∞: A = ∞/∞ = 1, B ≤ 1
        let g = parse("x^2 - 1").unwrap();
        let h = parse("x^3").unwrap();
        let a = a_ratio(&g, &h, &Real::one()).unwrap();
        assert_eq!(a, 1.0);
        let b = b_ratio(&g, &h, &Real::one()).unwrap();
        assert!(b <= 1.0);
    }

    #[test]
    fn inner_zero_with_nonzero_outer_forces_infinite_a() {
        // h(1) = 0, g(0) = 1 ≠ 0: κ(h,1) = ∞ over finite denominator
        let g = parse("exp(x)").unwrap();
        let h = parse("x - 1").unwrap();
        let a = a_ratio(&g, &h, &Real::one()).unwrap();
        assert!(a.is_infinite());
    }

    #[test]
    fn generic_points_satisfy_b_equals_one_plus_a() {
        let pairs = [("x^2", "x^3"), ("exp(x)", "x^2 + 1"), ("log(x)", "x^2 + 3"), ("sin(x)", "1/x")];
        for (gs, hs) in pairs {
            let g = parse(gs).unwrap();
            let h = parse(hs).unwrap();
            for i in 0..40 {
                let x = 0.13 + 0.31 * i as f64;
                let xr = Real::from_f64(x);
                let (a, b) = match (a_ratio(&g, &h, &xr), b_ratio(&g, &h, &xr)) {
                    (Ok(a), Ok(b)) if a.is_finite() && b.is_finite() => (a, b),
                    _ => continue,
                };
                assert!((b - (1.0 + a)).abs() <= 1e-10 * b.abs(), "{gs}∘{hs} at {x}: B={b}, 1+A={}", 1.0 + a);
            }
        }
    }

    #[test]
    fn composition_bound_holds_at_samples() {
        let g = parse("exp(x)").unwrap();
        let h = parse("x^2 + 1").unwrap();
        for i in 1..30 {
            let x = Real::from_f64(0.2 * i as f64);
            let c = composition_kappa_check(&g, &h, &x).unwrap();
            assert!(c.bound_holds);
        }
    }

    #[test]
    fn monomials_are_supported_on_positive_axis() {
        let g = parse("x^2").unwrap();
        let h = parse("x^3").unwrap();
        let dom = IntervalDomain::parse("(0, inf)").unwrap();
        let r = check_compatible(&g, &h, &dom, 64, 7, &ScanPolicy::coarse());
        assert_eq!(r.verdict, CompatVerdict::Supported, "{}", r.note);
        assert!(r.sup_a <= 1.0 + 1e-12, "sup A = {}", r.sup_a);
        assert!(r.case_log.case3 > 0);
    }

    #[test]
    fn identity_outer_is_always_supported() {
        let g = parse("x").unwrap();
        let h = parse("sin(x)").unwrap();
        let dom = IntervalDomain::parse("(0.1, 3)").unwrap();
        let r = check_compatible(&g, &h, &dom, 64, 7, &ScanPolicy::coarse());
        assert_eq!(r.verdict, CompatVerdict::Supported, "{}", r.note);
        assert!(r.sup_a <= 1.0 + 1e-9);
    }

    #[test]
    fn exp_of_exp_is_refuted_toward_minus_infinity() {
        let g = parse("exp(x)").unwrap();
        let h = parse("exp(x)").unwrap();
        let r = check_compatible(&g, &h, &IntervalDomain::full(), 64, 7, &ScanPolicy::coarse());
        assert_eq!(r.verdict, CompatVerdict::Refuted, "{}", r.note);
        assert!(r.witness.iter().all(|x| *x < 0.0));
        // A ~ |x| along the witness
        let far = *r.witness.last().unwrap();
        let a = a_ratio(&g, &h, &Real::from_f64(far)).unwrap();
        assert!(a > 0.5 * far.abs(), "A({far}) = {a}");
    }

    #[test]
    fn image_spanning_components_is_inconclusive() {
        // h maps (0,2) across the pole of g at 0
        let g = parse("1/x").unwrap();
        let h = parse("x - 1").unwrap();
        let dom = IntervalDomain::parse("(0, 2)").unwrap();
        let r = check_compatible(&g, &h, &dom, 64, 7, &ScanPolicy::coarse());
        assert_eq!(r.verdict, CompatVerdict::Inconclusive, "{}", r.note);
    }
}
