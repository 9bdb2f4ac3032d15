//! Empirical backward/mixed/forward stability checks for AST evaluation.
//!
//! Definitions under test, with C the estimated constant and u = 2^(−t):
//! backward — f̂(x) = f(y) for some y with dist(x,y) ≤ Cu; mixed —
//! dist(f̂(x), f(y)) ≤ Cu and dist(x,y) ≤ Cu; forward — dist(f̂(x), f(x)) ≤
//! C u μ(f,x). A sample only counts toward a definition when u < 1/(Cμ),
//! which makes C self-referential; it is resolved by upward fixed-point
//! iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conditioning::mu;
use crate::expr::{eval, Expr};
use crate::fp_sim::{eval_in_fp, FpSystem};
use crate::interval::{Interval, IntervalDomain};
use crate::metric::rel_distance_real;
use crate::real::Real;
use crate::roots::{critical_locus, ScanPolicy};

pub const DEFAULT_T_SET: [u32; 5] = [8, 12, 16, 20, 24];
pub const DEFAULT_SAMPLES_PER_COMPONENT: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabilityKind {
    Backward,
    Mixed,
    Forward,
}

#[derive(Clone, Debug)]
pub struct SampleRecord {
    pub x: f64,
    pub t: u32,
    pub u: f64,
    pub mu: f64,
    /// Measured distance for the definition under test (already divided by
    /// u, and by μ for the forward kind).
    pub ratio: f64,
}

#[derive(Clone, Debug)]
pub struct StabilityVerdict {
    pub kind: StabilityKind,
    pub samples: Vec<SampleRecord>,
    /// Smallest C ≥ 1 such that every sample with u < 1/(Cμ) satisfies the
    /// definition's inequality at that C; `None` when the fixed-point
    /// iteration diverges.
    pub estimated_c: Option<f64>,
    pub violations: Vec<String>,
    pub skipped_infinite_mu: usize,
    pub not_checkable: usize,
}

/// Upward fixed-point for the self-referential constant: ratios are
/// `measured/u` style quantities, and a sample only binds while u < 1/(Cμ).
fn fixed_point_c(samples: &[SampleRecord]) -> Option<f64> {
    let mut c: f64 = 1.0;
    for _ in 0..200 {
        let bound = samples
            .iter()
            .filter(|s| s.u < 1.0 / (c * s.mu))
            .map(|s| s.ratio)
            .fold(1.0f64, f64::max);
        if !bound.is_finite() {
            return None;
        }
        if bound <= c * (1.0 + 1e-12) {
            return Some(c.max(bound));
        }
        c = bound;
    }
    None
}

/// Geometric (log-uniform) sample points inside a component, jittered but
/// fully determined by `seed`. Components must not straddle 0.
pub fn geometric_samples(iv: &Interval, n: usize, seed: u64) -> Vec<f64> {
    assert!(!iv.straddles_zero());
    let negative = iv.hi <= 0.0;
    let (mlo, mhi) = if negative { (-iv.hi, -iv.lo) } else { (iv.lo, iv.hi) };
    // clamp unbounded/zero endpoints to a finite window in magnitude
    let lo = if mlo > 0.0 { mlo } else { (mhi / 1e8).min(1e-8) };
    let hi = if mhi.is_finite() { mhi } else { (mlo.max(1e-8) * 1e8).max(1e8) };
    let (llo, lhi) = (lo.ln(), hi.ln());
    let margin = (lhi - llo).min(1.0) * 1e-3 + 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ mlo.to_bits() ^ mhi.to_bits().rotate_left(17));
    (0..n)
        .map(|i| {
            let frac = (i as f64 + rng.gen_range(0.05..0.95)) / n as f64;
            let l = llo + margin + (lhi - llo - 2.0 * margin) * frac;
            let x = l.exp();
            if negative {
                -x
            } else {
                x
            }
        })
        .collect()
}

pub fn forward_profile(
    f: &Expr,
    dom: &IntervalDomain,
    xs: &[f64],
    ts: &[u32],
) -> StabilityVerdict {
    let mut samples = Vec::new();
    let mut violations = Vec::new();
    let mut skipped = 0usize;
    for &x in xs {
        if !dom.contains(x) {
            continue;
        }
        let xr = Real::from_f64(x);
        let (mu_f, exactv) = match (mu(f, &xr), eval(f, &xr)) {
            (Ok(m), Ok(v)) => (m, v),
            _ => continue,
        };
        let mu_v = match mu_f.finite() {
            Some(m) => m.to_f64(),
            None => {
                skipped += 1;
                continue;
            }
        };
        for &t in ts {
            let sys = FpSystem::new(t);
            let u = sys.u_f64();
            match eval_in_fp(&sys, f, &xr) {
                Ok((out, _)) => {
                    let d = rel_distance_real(&out.to_real(&sys), &exactv)
                        .map(|d| d.to_f64())
                        .unwrap_or(f64::INFINITY);
                    samples.push(SampleRecord { x, t, u, mu: mu_v, ratio: d / (u * mu_v) });
                }
                Err(e) => violations.push(format!("no output at x={x}, t={t}: {e}")),
            }
        }
    }
    let estimated_c = if violations.is_empty() { fixed_point_c(&samples) } else { None };
    StabilityVerdict {
        kind: StabilityKind::Forward,
        samples,
        estimated_c,
        violations,
        skipped_infinite_mu: skipped,
        not_checkable: 0,
    }
}

#[derive(Clone, Debug)]
pub enum CheckOutcome {
    Satisfied {
        y: f64,
        /// For backward: dist(x,y)/u. For mixed: the minimal
        /// max(dist(f̂,f(y)), dist(x,y))/u over candidate y.
        ratio: f64,
    },
    Violation(String),
    NotCheckable(String),
}

#[derive(Clone, Debug)]
pub struct PointCheck {
    pub x: f64,
    pub t: u32,
    pub outcome: CheckOutcome,
}

/// Strict monotonicity on the component containing x, detected by a scan
/// for sign changes of f'.
fn monotone_component(f: &Expr, dom: &IntervalDomain, x: f64) -> Result<Interval, String> {
    let comp = dom
        .component_of(x)
        .ok_or_else(|| format!("x={x} not inside the domain"))?;
    let crits = critical_locus(f, &IntervalDomain::from_interval(comp), &ScanPolicy::coarse());
    if !crits.is_empty() {
        return Err(format!("not strictly monotone on {comp} (critical point near {})", crits.points()[0]));
    }
    Ok(comp)
}

/// Inverts f on a monotone component at reference precision: finds y with
/// f(y) = w to relative 2^(−96), by Newton from x with bisection fallback.
fn invert_monotone(f: &Expr, comp: &Interval, x: &Real, w: &Real) -> Result<Real, String> {
    let tol_bits = -96i32;
    let in_comp = |y: &Real| {
        let yf = y.to_f64();
        comp.lo < yf && yf < comp.hi
    };
    let close = |fy: &Real| -> bool {
        let err = fy.sub(w).abs();
        if w.is_zero() {
            return err.is_zero();
        }
        err.le(&w.abs().mul_pow2(tol_bits))
    };
    let mut y = x.clone();
    for _ in 0..60 {
        let j = crate::jet::eval_jet2(f, &y).map_err(|e| e.to_string())?;
        if close(&j.v) {
            return Ok(y);
        }
        if j.d1.is_zero() {
            break;
        }
        let step = j.v.sub(w).div(&j.d1);
        let y_next = y.sub(&step);
        if !in_comp(&y_next) {
            break;
        }
        y = y_next;
    }
    // bisection fallback on an expanding bracket around x
    let mut r = 1e-12f64;
    let sign_at = |y: &Real| -> Result<Real, String> {
        eval(f, y).map(|v| v.sub(w)).map_err(|e| e.to_string())
    };
    while r < 100.0 {
        let lo = clamp_to(comp, x.to_f64() * (-r).exp());
        let hi = clamp_to(comp, x.to_f64() * r.exp());
        let (lo, hi) = (lo.min(hi), lo.max(hi));
        let (slo, shi) = (sign_at(&Real::from_f64(lo))?, sign_at(&Real::from_f64(hi))?);
        if slo.is_zero() {
            return Ok(Real::from_f64(lo));
        }
        if shi.is_zero() {
            return Ok(Real::from_f64(hi));
        }
        if slo.is_negative() != shi.is_negative() {
            let (mut lo, mut hi) = (Real::from_f64(lo), Real::from_f64(hi));
            let neg = slo.is_negative();
            let half = Real::one().mul_pow2(-1);
            for _ in 0..300 {
                let mid = lo.add(&hi).mul(&half);
                let sm = sign_at(&mid)?;
                if close(&sm.add(w)) || sm.is_zero() {
                    return Ok(mid);
                }
                if sm.is_negative() == neg {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(lo.add(&hi).mul(&half));
        }
        r *= 8.0;
    }
    Err("computed output is outside the range of f on the component".into())
}

fn clamp_to(comp: &Interval, y: f64) -> f64 {
    // stay strictly inside with a relative margin
    let lo = if comp.lo.is_finite() { comp.lo + comp.lo.abs() * 1e-14 + 1e-300 } else { y };
    let hi = if comp.hi.is_finite() { comp.hi - comp.hi.abs() * 1e-14 - 1e-300 } else { y };
    y.max(lo).min(hi)
}

pub fn backward_check(f: &Expr, dom: &IntervalDomain, x: f64, t: u32) -> PointCheck {
    let outcome = backward_outcome(f, dom, x, t);
    PointCheck { x, t, outcome }
}

fn backward_outcome(f: &Expr, dom: &IntervalDomain, x: f64, t: u32) -> CheckOutcome {
    let comp = match monotone_component(f, dom, x) {
        Ok(c) => c,
        Err(m) => return CheckOutcome::NotCheckable(m),
    };
    let sys = FpSystem::new(t);
    let xr = Real::from_f64(x);
    let out = match eval_in_fp(&sys, f, &xr) {
        Ok((v, _)) => v.to_real(&sys),
        Err(e) => return CheckOutcome::Violation(format!("no output: {e}")),
    };
    if out.is_zero() {
        return CheckOutcome::NotCheckable("computed output is exactly zero".into());
    }
    match invert_monotone(f, &comp, &xr, &out) {
        Ok(y) => match rel_distance_real(&xr, &y) {
            Some(d) => CheckOutcome::Satisfied {
                y: y.to_f64(),
                ratio: d.to_f64() / sys.u_f64(),
            },
            None => CheckOutcome::Violation("preimage in a different sign component".into()),
        },
        Err(m) => CheckOutcome::Violation(m),
    }
}

pub fn mixed_check(f: &Expr, dom: &IntervalDomain, x: f64, t: u32) -> PointCheck {
    let outcome = mixed_outcome(f, dom, x, t);
    PointCheck { x, t, outcome }
}

fn mixed_outcome(f: &Expr, dom: &IntervalDomain, x: f64, t: u32) -> CheckOutcome {
    let comp = match monotone_component(f, dom, x) {
        Ok(c) => c,
        Err(m) => return CheckOutcome::NotCheckable(m),
    };
    let sys = FpSystem::new(t);
    let u = sys.u_f64();
    let xr = Real::from_f64(x);
    let out = match eval_in_fp(&sys, f, &xr) {
        Ok((v, _)) => v.to_real(&sys),
        Err(e) => return CheckOutcome::Violation(format!("no output: {e}")),
    };
    if out.is_zero() {
        return CheckOutcome::NotCheckable("computed output is exactly zero".into());
    }
    // candidate perturbed inputs: the exact backward preimage, x itself,
    // and geometric interpolations between them
    let mut candidates = vec![x];
    if let Ok(y) = invert_monotone(f, &comp, &xr, &out) {
        let yf = y.to_f64();
        for s in [0.25, 0.5, 0.75, 1.0] {
            candidates.push(x * (yf / x).powf(s));
        }
    }
    let mut best: Option<(f64, f64)> = None;
    for y in candidates {
        if !comp.contains(y) {
            continue;
        }
        let yr = Real::from_f64(y);
        let fy = match eval(f, &yr) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let d_out = rel_distance_real(&out, &fy).map(|d| d.to_f64()).unwrap_or(f64::INFINITY);
        let d_in = rel_distance_real(&xr, &yr).map(|d| d.to_f64()).unwrap_or(f64::INFINITY);
        let score = d_out.max(d_in) / u;
        if best.map(|(b, _)| score < b).unwrap_or(true) {
            best = Some((score, y));
        }
    }
    match best {
        Some((ratio, y)) if ratio.is_finite() => CheckOutcome::Satisfied { y, ratio },
        _ => CheckOutcome::Violation("no candidate perturbed input works".into()),
    }
}

/// Aggregates point checks over a sample grid into a verdict with the
/// fixed-point constant.
pub fn check_profile(
    kind: StabilityKind,
    f: &Expr,
    dom: &IntervalDomain,
    xs: &[f64],
    ts: &[u32],
) -> StabilityVerdict {
    assert!(kind != StabilityKind::Forward, "use forward_profile");
    let mut samples = Vec::new();
    let mut violations = Vec::new();
    let mut skipped = 0usize;
    let mut not_checkable = 0usize;
    for &x in xs {
        let xr = Real::from_f64(x);
        let mu_v = match mu(f, &xr).ok().and_then(|m| m.finite().map(|v| v.to_f64())) {
            Some(m) => m,
            None => {
                skipped += 1;
                continue;
            }
        };
        for &t in ts {
            let check = match kind {
                StabilityKind::Backward => backward_check(f, dom, x, t),
                StabilityKind::Mixed => mixed_check(f, dom, x, t),
                StabilityKind::Forward => unreachable!(),
            };
            match check.outcome {
                CheckOutcome::Satisfied { ratio, .. } => samples.push(SampleRecord {
                    x,
                    t,
                    u: 2f64.powi(-(t as i32)),
                    mu: mu_v,
                    ratio,
                }),
                CheckOutcome::Violation(m) => violations.push(format!("x={x}, t={t}: {m}")),
                CheckOutcome::NotCheckable(_) => not_checkable += 1,
            }
        }
    }
    let estimated_c = if violations.is_empty() { fixed_point_c(&samples) } else { None };
    StabilityVerdict {
        kind,
        samples,
        estimated_c,
        violations,
        skipped_infinite_mu: skipped,
        not_checkable,
    }
}

#[derive(Clone, Debug)]
pub struct CompositionReport {
    /// Amenability + compatibility verdicts supplied by the caller.
    pub hypotheses_met: bool,
    pub forward: StabilityVerdict,
}

/// Forward profile of the composed evaluator ĝ∘ĥ against μ(g∘h, x).
pub fn composition_experiment(
    g: &Expr,
    h: &Expr,
    dom: &IntervalDomain,
    xs: &[f64],
    ts: &[u32],
    hypotheses_met: bool,
) -> CompositionReport {
    let composed = g.substitute(h);
    CompositionReport { hypotheses_met, forward: forward_profile(&composed, dom, xs, ts) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn full() -> IntervalDomain {
        IntervalDomain::full()
    }

    #[test]
    fn forward_exp_has_small_constant() {
        let f = parse("exp(x)").unwrap();
        let xs: Vec<f64> = (-10..=10).map(|i| i as f64 / 1.09 + 0.011).collect();
        let v = forward_profile(&f, &full(), &xs, &[12, 16, 20, 24]);
        let c = v.estimated_c.expect("converges");
        assert!(c <= 10.0, "C = {c}");
        assert!(v.violations.is_empty());
    }

    #[test]
    fn forward_identity_is_one_rounding() {
        let f = parse("x").unwrap();
        let xs = [0.3, 1.7, 9.1, -4.2];
        let v = forward_profile(&f, &full(), &xs, &DEFAULT_T_SET);
        assert!(v.estimated_c.unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn forward_sin_small_argument_is_fine() {
        // at moderate |x| the input-rounding error x·u only moves sin by
        // ≈ |x·cos(x)|·u, which the condition number absorbs
        let f = parse("sin(x)").unwrap();
        let v = forward_profile(&f, &full(), &[0.3, 1.2, 4.0], &[16, 20, 24]);
        assert!(v.estimated_c.unwrap() < 50.0);
    }

    #[test]
    fn forward_sin_huge_argument_diverges() {
        // near 10⁶π + π/2 the condition number is tiny but rounding the
        // input scrambles the value completely: no finite C fits
        let f = parse("sin(x)").unwrap();
        let x = 1e6 * std::f64::consts::PI + std::f64::consts::FRAC_PI_2;
        let v = forward_profile(&f, &full(), &[x], &[16, 20, 24]);
        assert!(v.estimated_c.is_none());
    }

    #[test]
    fn backward_known_cases() {
        let dom = full();
        let c = backward_check(&parse("exp(x)").unwrap(), &dom, 1.0, 20);
        match c.outcome {
            CheckOutcome::Satisfied { ratio, .. } => assert!(ratio <= 4.0, "ratio {ratio}"),
            o => panic!("{o:?}"),
        }
        let c = backward_check(&parse("x").unwrap(), &dom, 0.7, 12);
        match c.outcome {
            CheckOutcome::Satisfied { ratio, .. } => assert!(ratio <= 1.0 + 1e-12),
            o => panic!("{o:?}"),
        }
        let pos = IntervalDomain::parse("(0, inf)").unwrap();
        let c = backward_check(&parse("x^2").unwrap(), &pos, 3.0, 12);
        match c.outcome {
            CheckOutcome::Satisfied { ratio, .. } => assert!(ratio <= 2.0),
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn oscillatory_components_are_not_checkable() {
        let c = backward_check(&parse("sin(x)").unwrap(), &full(), 2.0, 16);
        assert!(matches!(c.outcome, CheckOutcome::NotCheckable(_)));
    }

    #[test]
    fn backward_implies_mixed_at_same_constant() {
        let dom = IntervalDomain::parse("(0, inf)").unwrap();
        for src in ["exp(x)", "log(x)", "x^2"] {
            let f = parse(src).unwrap();
            for &x in &[0.4, 2.0, 17.0] {
                for &t in &[12u32, 20] {
                    let b = backward_check(&f, &dom, x, t);
                    let m = mixed_check(&f, &dom, x, t);
                    if let (
                        CheckOutcome::Satisfied { ratio: rb, .. },
                        CheckOutcome::Satisfied { ratio: rm, .. },
                    ) = (&b.outcome, &m.outcome)
                    {
                        assert!(rm <= &(rb * (1.0 + 1e-9)), "{src} x={x} t={t}: {rm} > {rb}");
                    } else {
                        panic!("{src} x={x} t={t}: {:?} / {:?}", b.outcome, m.outcome);
                    }
                }
            }
        }
    }

    #[test]
    fn mixed_log_at_e_is_bounded() {
        let dom = IntervalDomain::parse("(0, inf)").unwrap();
        let c = mixed_check(&parse("log(x)").unwrap(), &dom, std::f64::consts::E, 16);
        match c.outcome {
            CheckOutcome::Satisfied { ratio, .. } => assert!(ratio < 10.0, "ratio {ratio}"),
            o => panic!("{o:?}"),
        }
    }

    #[test]
    fn composition_of_monomials_is_bounded() {
        let g = parse("x^2").unwrap();
        let h = parse("x^3").unwrap();
        let dom = IntervalDomain::parse("(0, inf)").unwrap();
        let xs = geometric_samples(&dom.components()[0], 24, 7);
        let rep = composition_experiment(&g, &h, &dom, &xs, &[12, 16, 20], true);
        assert!(rep.forward.estimated_c.unwrap() < 20.0);
        assert!(rep.hypotheses_met);
    }

    #[test]
    fn samples_are_deterministic_and_in_range() {
        let iv = Interval::new(0.5, 100.0);
        let a = geometric_samples(&iv, 64, 42);
        let b = geometric_samples(&iv, 64, 42);
        assert_eq!(a, b);
        assert!(a.iter().all(|&x| iv.contains(x)));
        let neg = Interval::new(-8.0, -0.25);
        let c = geometric_samples(&neg, 32, 1);
        assert!(c.iter().all(|&x| neg.contains(x)));
    }
}
