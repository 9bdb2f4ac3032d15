//! Sign-change root bracketing on a geometric grid.
//!
//! Scanning is geometric in |x| so that sample density is uniform in the
//! relative metric. Brackets found by the fast `f64` pass are certified and
//! refined by bisection at reference precision.

use crate::expr::{eval_scalar, Expr};
use crate::interval::{Interval, IntervalDomain};
use crate::jet::eval_jet;
use crate::real::Real;

#[derive(Clone, Copy, Debug)]
pub struct ScanPolicy {
    pub samples_per_decade: usize,
    /// Smallest |x| scanned; the metric pushes 0 infinitely far away, so a
    /// cutoff is unavoidable and is reported via `exhaustive_within`.
    pub min_abs: f64,
    pub max_abs: f64,
}

impl Default for ScanPolicy {
    fn default() -> Self {
        ScanPolicy { samples_per_decade: 10_000, min_abs: 1e-8, max_abs: 1e8 }
    }
}

impl ScanPolicy {
    pub fn coarse() -> ScanPolicy {
        ScanPolicy { samples_per_decade: 2_000, ..ScanPolicy::default() }
    }
}

#[derive(Clone, Debug)]
pub struct RootBracket {
    /// Certified bracket: the reference evaluator changes sign between
    /// `lo` and `hi` (or vanishes at `root_f64`).
    pub lo: f64,
    pub hi: f64,
    pub root_f64: f64,
}

#[derive(Clone, Debug)]
pub struct ZeroLocus {
    pub brackets: Vec<RootBracket>,
    /// The region actually scanned; honesty about coverage.
    pub exhaustive_within: IntervalDomain,
    /// Set when the fast evaluator failed inside the scanned region, i.e.
    /// some subranges were skipped.
    pub unresolved: bool,
}

impl ZeroLocus {
    pub fn is_empty(&self) -> bool {
        self.brackets.is_empty()
    }

    pub fn points(&self) -> Vec<f64> {
        self.brackets.iter().map(|b| b.root_f64).collect()
    }
}

/// Scans `dom` for sign changes of `fast`, refining each bracket with
/// `exact`. Both closures return `None` outside their domain.
pub fn scan_sign_changes(
    dom: &IntervalDomain,
    scan: &ScanPolicy,
    fast: &dyn Fn(f64) -> Option<f64>,
    exact: &dyn Fn(&Real) -> Option<Real>,
) -> ZeroLocus {
    let mut brackets: Vec<RootBracket> = Vec::new();
    let mut covered: Vec<Interval> = Vec::new();
    let mut unresolved = false;

    for comp in dom.split_at_zero().components() {
        let negative = comp.hi <= 0.0;
        // scan in magnitudes; mirror for negative components
        let (mlo, mhi) = if negative { (-comp.hi, -comp.lo) } else { (comp.lo, comp.hi) };
        let lo = mlo.max(scan.min_abs);
        let hi = mhi.min(scan.max_abs);
        if !(lo < hi) {
            continue;
        }
        covered.push(if negative {
            Interval::new(-hi, -lo)
        } else {
            Interval::new(lo, hi)
        });

        let decades = (hi / lo).log10();
        let n = ((decades * scan.samples_per_decade as f64).ceil() as usize).max(2);
        let ratio = (hi / lo).powf(1.0 / n as f64);
        let mut prev: Option<(f64, f64)> = None;
        // half-step offset keeps samples strictly inside the open interval
        let mut mag = lo * ratio.sqrt();
        for _ in 0..n {
            let x = if negative { -mag } else { mag };
            // ±inf from f64 overflow keeps its sign and is usable sign
            // evidence; only NaN forfeits exhaustiveness
            match fast(x).filter(|v| !v.is_nan()) {
                Some(v) => {
                    if v == 0.0 {
                        push_exact_zero(&mut brackets, x, exact);
                        prev = None;
                    } else {
                        if let Some((px, pv)) = prev {
                            if pv * v < 0.0 {
                                if let Some(b) = refine(px, x, fast, exact) {
                                    brackets.push(b);
                                } else {
                                    unresolved = true;
                                }
                            }
                        }
                        prev = Some((x, v));
                    }
                }
                None => {
                    unresolved = true;
                    prev = None;
                }
            }
            mag *= ratio;
        }
    }

    brackets.sort_by(|a, b| a.root_f64.partial_cmp(&b.root_f64).unwrap());
    ZeroLocus {
        brackets,
        exhaustive_within: IntervalDomain::from_intervals(covered),
        unresolved,
    }
}

fn push_exact_zero(out: &mut Vec<RootBracket>, x: f64, exact: &dyn Fn(&Real) -> Option<Real>) {
    let v = match exact(&Real::from_f64(x)) {
        Some(v) => v,
        None => return,
    };
    if v.is_zero() {
        out.push(RootBracket { lo: x, hi: x, root_f64: x });
    } else if let Some(b) = certify(x, x * (1.0 - 1e-9), x * (1.0 + 1e-9), exact) {
        // f64 underflow artifact; the root (if any) is nearby
        out.push(b);
    }
}

/// f64 bisection down to a few ulps, then certification of a tight bracket
/// at reference precision.
fn refine(
    a: f64,
    b: f64,
    fast: &dyn Fn(f64) -> Option<f64>,
    exact: &dyn Fn(&Real) -> Option<Real>,
) -> Option<RootBracket> {
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let mut flo = fast(lo)?;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match fast(mid) {
            Some(v) if v == 0.0 => {
                lo = mid;
                hi = mid;
                break;
            }
            Some(v) => {
                if (v < 0.0) == (flo < 0.0) {
                    lo = mid;
                    flo = v;
                } else {
                    hi = mid;
                }
            }
            None => return None,
        }
    }
    certify(0.5 * (lo + hi), a.min(b), a.max(b), exact)
}

/// Finds the tightest widening of `root` (within the grid bracket) across
/// which the reference evaluator changes sign.
fn certify(
    root: f64,
    grid_lo: f64,
    grid_hi: f64,
    exact: &dyn Fn(&Real) -> Option<Real>,
) -> Option<RootBracket> {
    let scale = root.abs().max(f64::MIN_POSITIVE);
    let mut w = scale * 1e-13;
    loop {
        let lo = (root - w).max(grid_lo);
        let hi = (root + w).min(grid_hi);
        let slo = exact(&Real::from_f64(lo))?;
        let shi = exact(&Real::from_f64(hi))?;
        if slo.is_zero() || shi.is_zero() {
            let r = if slo.is_zero() { lo } else { hi };
            return Some(RootBracket { lo, hi, root_f64: r });
        }
        if slo.is_negative() != shi.is_negative() {
            return Some(RootBracket { lo, hi, root_f64: root });
        }
        if lo <= grid_lo && hi >= grid_hi {
            return None; // f64 sign change not confirmed by the reference
        }
        w *= 32.0;
    }
}

/// Reference-precision bisection inside a certified bracket; ~`iters` extra
/// bits beyond f64.
pub fn refine_root_real(
    b: &RootBracket,
    exact: &dyn Fn(&Real) -> Option<Real>,
    iters: usize,
) -> Option<Real> {
    if b.lo == b.hi {
        return Some(Real::from_f64(b.root_f64));
    }
    let mut lo = Real::from_f64(b.lo);
    let mut hi = Real::from_f64(b.hi);
    let slo = exact(&lo)?;
    if slo.is_zero() {
        return Some(lo);
    }
    let neg = slo.is_negative();
    let half = Real::one().mul_pow2(-1);
    for _ in 0..iters {
        let mid = lo.add(&hi).mul(&half);
        let sm = exact(&mid)?;
        if sm.is_zero() {
            return Some(mid);
        }
        if sm.is_negative() == neg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo.add(&hi).mul(&half))
}

/// Certified sign-change zeros of `f` on `dom`.
pub fn zero_locus(f: &Expr, dom: &IntervalDomain, scan: &ScanPolicy) -> ZeroLocus {
    scan_sign_changes(
        dom,
        scan,
        &|x| eval_scalar(f, &x).ok(),
        &|x| eval_scalar(f, x).ok(),
    )
}

/// Certified sign-change zeros of f' on `dom` (critical points).
pub fn critical_locus(f: &Expr, dom: &IntervalDomain, scan: &ScanPolicy) -> ZeroLocus {
    scan_sign_changes(
        dom,
        scan,
        &|x| eval_jet(f, &x).ok().map(|j| j.d1),
        &|x| eval_jet(f, x).ok().map(|j| j.d1),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use std::f64::consts::PI;

    fn locus(src: &str, dom: &str) -> ZeroLocus {
        zero_locus(
            &parse(src).unwrap(),
            &IntervalDomain::parse(dom).unwrap(),
            &ScanPolicy::coarse(),
        )
    }

    #[test]
    fn finds_sin_zeros() {
        let l = locus("sin(x)", "(0.5, 10)");
        let pts = l.points();
        assert_eq!(pts.len(), 3);
        for (p, want) in pts.iter().zip([PI, 2.0 * PI, 3.0 * PI]) {
            assert!((p - want).abs() < 1e-12 * want, "{p} vs {want}");
        }
        assert!(!l.unresolved);
    }

    #[test]
    fn exp_has_no_zeros() {
        assert!(locus("exp(x)", "(-inf, inf)").is_empty());
    }

    #[test]
    fn sin_log_zeros_are_exponentials() {
        let l = locus("sin(log(x))", "(0.01, 100)");
        let pts = l.points();
        // e^{kπ} for k = -1, 0, 1 within (0.01, 100)
        assert_eq!(pts.len(), 3);
        for (p, k) in pts.iter().zip([-1.0f64, 0.0, 1.0]) {
            let want = (k * PI).exp();
            assert!((p - want).abs() < 1e-12 * want, "{p} vs {want}");
        }
    }

    #[test]
    fn refined_roots_are_sharp() {
        let l = locus("x^3 - 2*x + 1", "(0.2, 0.9)");
        assert_eq!(l.brackets.len(), 1);
        // root (√5-1)/2 of x²+x-1
        let want = (5.0f64.sqrt() - 1.0) / 2.0;
        let b = &l.brackets[0];
        assert!((b.root_f64 - want).abs() < 1e-14, "got {}", b.root_f64);
        assert!(b.lo <= want && want <= b.hi);
        // on-demand reference refinement sharpens well past f64
        let f = parse("x^3 - 2*x + 1").unwrap();
        let root = refine_root_real(b, &|x| crate::expr::eval(&f, x).ok(), 60).unwrap();
        let resid = crate::expr::eval(&f, &root).unwrap().abs().to_f64();
        assert!(resid < 1e-25, "resid {resid}");
    }

    #[test]
    fn negative_components_are_mirrored() {
        let l = locus("cos(x)", "(-3, -1)");
        let pts = l.points();
        assert_eq!(pts.len(), 1);
        assert!((pts[0] + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn critical_points_of_sin() {
        let l = critical_locus(
            &parse("sin(x)").unwrap(),
            &IntervalDomain::parse("(0.5, 7)").unwrap(),
            &ScanPolicy::coarse(),
        );
        let pts = l.points();
        assert_eq!(pts.len(), 2);
        assert!((pts[0] - PI / 2.0).abs() < 1e-10);
        assert!((pts[1] - 1.5 * PI).abs() < 1e-10);
    }

    #[test]
    fn coverage_is_reported() {
        let l = locus("sin(x)", "(0, inf)");
        let cov = l.exhaustive_within.components();
        assert_eq!(cov.len(), 1);
        assert_eq!(cov[0].lo, 1e-8);
        assert_eq!(cov[0].hi, 1e8);
    }
}
