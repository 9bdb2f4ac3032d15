//! Condition numbers and the H/G diagnostics.
//!
//! κ(f,x) is 0 at x = 0, ∞ at nonzero roots of f, and |x f'(x)/f(x)|
//! elsewhere; μ = 1 + κ. H = x²ff''/(f²+x²f'²) drives the amenability
//! propositions, G = (xff' + x²ff'' − x²f'²)/(f²+x²f'²) is the level-2
//! surrogate.

use crate::expr::{EvalError, Expr};
use crate::jet::{eval_jet2, Jet2};
use crate::real::{Real, PREC};

/// Exact roots are generally unrepresentable, so the ∞ branch of κ also
/// fires when |f(x)| falls this far below |x f'(x)| — everything past this
/// ratio is rounding noise at reference precision.
const NUMERICALLY_ZERO_BITS: i32 = (PREC as i32) - 8;

#[derive(Clone, Debug)]
pub enum Kappa {
    /// x = 0.
    Zero,
    Finite(Real),
    Infinite {
        /// True when triggered by the |f| underflow threshold rather than
        /// an exact zero.
        numerically_zero: bool,
    },
}

impl Kappa {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Kappa::Infinite { .. })
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Kappa::Zero => 0.0,
            Kappa::Finite(v) => v.to_f64(),
            Kappa::Infinite { .. } => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<Real> {
        match self {
            Kappa::Zero => Some(Real::zero()),
            Kappa::Finite(v) => Some(v.clone()),
            Kappa::Infinite { .. } => None,
        }
    }

    /// μ = 1 + κ.
    pub fn mu(&self) -> Mu {
        match self.finite() {
            Some(v) => Mu::Finite(v.add(&Real::one())),
            None => Mu::Infinite,
        }
    }
}

#[derive(Clone, Debug)]
pub enum Mu {
    Finite(Real),
    Infinite,
}

impl Mu {
    pub fn to_f64(&self) -> f64 {
        match self {
            Mu::Finite(v) => v.to_f64(),
            Mu::Infinite => f64::INFINITY,
        }
    }

    pub fn finite(&self) -> Option<&Real> {
        match self {
            Mu::Finite(v) => Some(v),
            Mu::Infinite => None,
        }
    }
}

/// H or G at a point; `Degenerate` flags a vanishing denominator
/// (f(x) = f'(x) = 0 at x ≠ 0, or x = 0 with f(0) = 0).
#[derive(Clone, Debug)]
pub enum Diag {
    Value(Real),
    Degenerate,
}

impl Diag {
    pub fn value(&self) -> Option<&Real> {
        match self {
            Diag::Value(v) => Some(v),
            Diag::Degenerate => None,
        }
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Diag::Value(v) => v.to_f64(),
            Diag::Degenerate => f64::NAN,
        }
    }
}

/// Largest binary exponent at which the quadratic forms in κ, H, and G are
/// formed directly; beyond it the jet is rescaled first.
const SAFE_EXP: i64 = 1 << 28;

/// Exact power-of-two rescaling with flush-to-zero when the target exponent
/// leaves the representable range (such terms are negligible in every sum
/// they enter here).
fn shift_pow2(r: &Real, k: i64) -> Real {
    let Some(e) = r.exponent() else { return Real::zero() };
    let ne = e as i64 + k;
    if ne < -SAFE_EXP * 4 {
        return Real::zero();
    }
    if k.abs() <= i32::MAX as i64 / 2 {
        return r.mul_pow2(k as i32);
    }
    r.mul_pow2((k / 2) as i32).mul_pow2((k - k / 2) as i32)
}

/// The terms (f, x f', x² f'') scaled by a common power of two so their
/// largest exponent is near zero. κ, H, and G are ratios of forms of equal
/// degree in f, so they are invariant under this rescaling, while the raw
/// products can overflow for admissible jets (e.g. Γ near its overflow
/// threshold, where squaring f doubles an already huge exponent).
fn scaled_terms(x: &Real, j: &Jet2) -> (Real, Real, Real) {
    let ex = x.exponent().unwrap_or(0) as i64;
    let spans = [
        j.v.exponent().map(|e| e as i64),
        j.d1.exponent().map(|e| e as i64 + ex),
        j.d2.exponent().map(|e| e as i64 + 2 * ex),
    ];
    let top = spans.into_iter().flatten().max().unwrap_or(0);
    if top.abs() <= SAFE_EXP && ex.abs() <= SAFE_EXP {
        return (j.v.clone(), x.mul(&j.d1), x.mul(x).mul(&j.d2));
    }
    // Distribute the shift across the factors so no intermediate product
    // overflows: x is reduced to its mantissa and the remaining exponent is
    // folded into the derivative's shift.
    let x0 = shift_pow2(x, -ex);
    let t0 = shift_pow2(&j.v, -top);
    let t1 = x0.mul(&shift_pow2(&j.d1, ex - top));
    let t2 = x0.mul(&x0).mul(&shift_pow2(&j.d2, 2 * ex - top));
    (t0, t1, t2)
}

pub fn kappa_from_jet(x: &Real, j: &Jet2) -> Kappa {
    if x.is_zero() {
        return Kappa::Zero;
    }
    if j.v.is_zero() {
        return Kappa::Infinite { numerically_zero: false };
    }
    let (t0, t1, _) = scaled_terms(x, j);
    let num = t1.abs();
    // |f| < 2^-(PREC-8) |x f'| ⇒ numerically zero
    if !num.is_zero() {
        let thresh = num.mul_pow2(-NUMERICALLY_ZERO_BITS);
        if t0.abs().lt(&thresh) {
            return Kappa::Infinite { numerically_zero: true };
        }
    }
    if t0.is_zero() {
        return Kappa::Infinite { numerically_zero: true };
    }
    Kappa::Finite(num.div(&t0.abs()))
}

pub fn kappa(f: &Expr, x: &Real) -> Result<Kappa, EvalError> {
    Ok(kappa_from_jet(x, &eval_jet2(f, x)?))
}

pub fn mu(f: &Expr, x: &Real) -> Result<Mu, EvalError> {
    Ok(kappa(f, x)?.mu())
}

pub fn h_from_jet(x: &Real, j: &Jet2) -> Diag {
    let (t0, t1, t2) = scaled_terms(x, j);
    let denom = t0.mul(&t0).add(&t1.mul(&t1));
    if denom.is_zero() {
        return Diag::Degenerate;
    }
    Diag::Value(t0.mul(&t2).div(&denom))
}

pub fn g_from_jet(x: &Real, j: &Jet2) -> Diag {
    let (t0, t1, t2) = scaled_terms(x, j);
    let denom = t0.mul(&t0).add(&t1.mul(&t1));
    if denom.is_zero() {
        return Diag::Degenerate;
    }
    let num = t0.mul(&t1).add(&t0.mul(&t2)).sub(&t1.mul(&t1));
    Diag::Value(num.div(&denom))
}

pub fn h_value(f: &Expr, x: &Real) -> Result<Diag, EvalError> {
    Ok(h_from_jet(x, &eval_jet2(f, x)?))
}

pub fn g_value(f: &Expr, x: &Real) -> Result<Diag, EvalError> {
    Ok(g_from_jet(x, &eval_jet2(f, x)?))
}

/// Everything the analyzers need at one point, from a single jet.
#[derive(Clone, Debug)]
pub struct CondReport {
    pub x: f64,
    pub f: f64,
    pub fprime: f64,
    pub fsecond: f64,
    pub kappa: Kappa,
    pub h: Diag,
    pub g: Diag,
}

impl CondReport {
    pub fn mu_f64(&self) -> f64 {
        self.kappa.mu().to_f64()
    }
}

pub fn cond_report(f: &Expr, x: &Real) -> Result<CondReport, EvalError> {
    let j = eval_jet2(f, x)?;
    Ok(CondReport {
        x: x.to_f64(),
        f: j.v.to_f64(),
        fprime: j.d1.to_f64(),
        fsecond: j.d2.to_f64(),
        kappa: kappa_from_jet(x, &j),
        h: h_from_jet(x, &j),
        g: g_from_jet(x, &j),
    })
}

#[derive(Clone, Debug)]
pub struct CompositionCheck {
    pub lhs: Kappa,
    pub rhs_product: ExtProduct,
    /// `lhs ≤ product` with a 1 + 1e-10 slack.
    pub bound_holds: bool,
    /// `lhs = product` to relative 1e-10; `None` when the equality
    /// preconditions (x ≠ 0, h(x) ≠ 0, g(h(x)) ≠ 0, finite κ) fail.
    pub equality_holds: Option<bool>,
}

/// Product of two κ's in the extended reals. 0·∞ is ∞ here: the product is
/// only ever used as an upper bound.
#[derive(Clone, Debug)]
pub enum ExtProduct {
    Finite(Real),
    Infinite,
}

impl ExtProduct {
    pub fn to_f64(&self) -> f64 {
        match self {
            ExtProduct::Finite(v) => v.to_f64(),
            ExtProduct::Infinite => f64::INFINITY,
        }
    }
}

fn kappa_product(a: &Kappa, b: &Kappa) -> ExtProduct {
    match (a.finite(), b.finite()) {
        (Some(x), Some(y)) => ExtProduct::Finite(x.mul(&y)),
        _ => ExtProduct::Infinite,
    }
}

/// Eq. (1) bound and Eq. (2) equality for κ(g∘h, x) versus
/// κ(g, h(x))·κ(h, x), with the composition evaluated on the composed AST.
pub fn composition_kappa_check(g: &Expr, h: &Expr, x: &Real) -> Result<CompositionCheck, EvalError> {
    let hx = crate::expr::eval(h, x)?;
    let k_h = kappa(h, x)?;
    let k_g = kappa(g, &hx)?;
    let composed = g.substitute(h);
    let k_gh = kappa(&composed, x)?;
    let rhs = kappa_product(&k_g, &k_h);

    let slack = Real::from_f64(1e-10);
    let bound_holds = match (&k_gh, &rhs) {
        (_, ExtProduct::Infinite) => true,
        (Kappa::Infinite { .. }, ExtProduct::Finite(_)) => false,
        (k, ExtProduct::Finite(p)) => {
            let lhs = k.finite().expect("finite");
            lhs.le(&p.mul(&Real::one().add(&slack)))
        }
    };

    let preconditions = !x.is_zero()
        && !hx.is_zero()
        && !k_gh.is_infinite()
        && !k_g.is_infinite()
        && !k_h.is_infinite();
    let equality_holds = preconditions.then(|| {
        let lhs = k_gh.finite().expect("finite");
        match &rhs {
            ExtProduct::Finite(p) => {
                let tol = slack.mul(&Real::one().add(&lhs));
                lhs.sub(p).abs().le(&tol)
            }
            ExtProduct::Infinite => false,
        }
    });

    Ok(CompositionCheck { lhs: k_gh, rhs_product: rhs, bound_holds, equality_holds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn k(src: &str, x: f64) -> Kappa {
        kappa(&parse(src).unwrap(), &Real::from_f64(x)).unwrap()
    }

    fn h(src: &str, x: f64) -> f64 {
        h_value(&parse(src).unwrap(), &Real::from_f64(x)).unwrap().to_f64()
    }

    #[test]
    fn kappa_known_values() {
        assert!((k("exp(x)", 2.0).to_f64() - 2.0).abs() < 1e-60);
        assert!((k("x^3", 5.0).to_f64() - 3.0).abs() < 1e-60);
        assert!((k("x^3", -5.0).to_f64() - 3.0).abs() < 1e-60);
        assert!(matches!(k("sin(x)", 0.0), Kappa::Zero));
        assert!((k("log(x)", std::f64::consts::E).to_f64() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mu_is_one_plus_kappa() {
        let f = parse("exp(x)").unwrap();
        let m = mu(&f, &Real::from_f64(2.0)).unwrap();
        assert!((m.to_f64() - 3.0).abs() < 1e-60);
        assert_eq!(mu(&f, &Real::zero()).unwrap().to_f64(), 1.0);
    }

    #[test]
    fn kappa_is_infinite_at_numerical_roots() {
        // pin a root of sin near π far beyond f64, then probe there
        let f = parse("sin(x)").unwrap();
        let dom = crate::interval::IntervalDomain::parse("(3, 4)").unwrap();
        let locus = crate::roots::zero_locus(&f, &dom, &crate::roots::ScanPolicy::coarse());
        let root = crate::roots::refine_root_real(
            &locus.brackets[0],
            &|x| crate::expr::eval(&f, x).ok(),
            280,
        )
        .unwrap();
        match kappa(&f, &root).unwrap() {
            Kappa::Infinite { numerically_zero } => assert!(numerically_zero),
            other => panic!("expected ∞, got {other:?}"),
        }
        // ...but a millionth of a radian away it is very finite
        let nearby = root.mul(&Real::from_f64(1.0 + 1e-6));
        assert!(!kappa(&f, &nearby).unwrap().is_infinite());
    }

    #[test]
    fn h_known_values() {
        // H(exp, x) = x²/(1+x²)
        assert!((h("exp(x)", 1.0) - 0.5).abs() < 1e-60);
        assert!((h("exp(x)", 2.0) - 0.8).abs() < 1e-60);
        // tan stays below 2 on (−π/2, π/2)
        let f = parse("tan(x)").unwrap();
        let mut sup: f64 = 0.0;
        for j in 1..200 {
            let x = -1.57 + 3.14 * j as f64 / 200.0;
            if x.abs() < 1e-9 {
                continue;
            }
            let v = h_value(&f, &Real::from_f64(x)).unwrap().to_f64().abs();
            sup = sup.max(v);
        }
        assert!(sup <= 2.0, "sup {sup}");
        // blow-up of the square-root example at its endpoint
        let v = h("1 + sqrt(x - 1)", 1.0 + 1e-8);
        assert!(v < -1e3, "got {v}");
    }

    #[test]
    fn g_vanishes_at_zero_for_exp_and_tracks_kappa_slope() {
        let v = g_value(&parse("exp(x)").unwrap(), &Real::zero()).unwrap().to_f64();
        assert_eq!(v, 0.0);

        // G = x κ̃'(x)/(1+κ̃²) with κ̃ = x f'/f, checked by finite differences
        for (src, x) in [("x^2 + 1", 1.3), ("sin(log(x))", 2.0), ("exp(x)", 0.7)] {
            let f = parse(src).unwrap();
            let xr = Real::from_f64(x);
            let g = g_value(&f, &xr).unwrap().to_f64();
            let kt = |y: &Real| {
                let j = eval_jet2(&f, y).unwrap();
                y.mul(&j.d1).div(&j.v)
            };
            let hstep = Real::one().mul_pow2(-25);
            let d = kt(&xr.add(&hstep)).sub(&kt(&xr.sub(&hstep))).mul_pow2(24);
            let kt0 = kt(&xr).to_f64();
            let want = x * d.to_f64() / (1.0 + kt0 * kt0);
            assert!((g - want).abs() < 1e-6 * (1.0 + want.abs()), "{src}: {g} vs {want}");
        }
    }

    #[test]
    fn g_minus_h_is_bounded() {
        // |G − H| = |xff' − x²f'²|/(f²+x²f'²) ≤ (1+√2)/2 (maximize over the
        // ratio t = xf'/f); the bound 1 fails, e.g. exp near x = −1−√2
        let bound = (1.0 + 2.0f64.sqrt()) / 2.0 + 1e-9;
        let mut worst: f64 = 0.0;
        for (src, lo, hi) in [
            ("exp(x)", -6.0, 6.0),
            ("x^3 - 2*x + 1", -3.0, 3.0),
            ("sin(log(x))", 0.1, 20.0),
            ("gamma(x)", 0.2, 8.0),
        ] {
            let f = parse(src).unwrap();
            for j in 0..400 {
                let x = lo + (hi - lo) * j as f64 / 400.0;
                let xr = Real::from_f64(x);
                let (Ok(hv), Ok(gv)) = (h_value(&f, &xr), g_value(&f, &xr)) else { continue };
                let (Some(hv), Some(gv)) = (hv.value(), gv.value()) else { continue };
                let d = gv.sub(hv).abs().to_f64();
                worst = worst.max(d);
                assert!(d <= bound, "{src} at {x}: |G-H| = {d}");
            }
        }
        // the classical bound 1 really is exceeded somewhere
        let f = parse("exp(x)").unwrap();
        let x = Real::from_f64(-1.0 - 2.0f64.sqrt());
        let d = g_value(&f, &x)
            .unwrap()
            .value()
            .unwrap()
            .sub(h_value(&f, &x).unwrap().value().unwrap())
            .abs()
            .to_f64();
        assert!(d > 1.0 && d <= bound);
    }

    #[test]
    fn h_pole_limits_for_rationals() {
        // pole of order k at x = 2: H → (k+1)/k at rel-distance 1e-6
        for (k, src) in [(1, "1/(x - 2)"), (2, "1/(x - 2)^2"), (3, "1/(x - 2)^3")] {
            let x = 2.0 * (1e-6f64).exp();
            let v = h(src, x);
            let want = (k as f64 + 1.0) / k as f64;
            assert!((v - want).abs() <= 1e-3, "k={k}: {v} vs {want}");
        }
    }

    #[test]
    fn h_limits_for_algebraic_sums() {
        // f = x^0.5 − 2x^1.5: H → α(α−1)/(1+α²) with α = 0.5 at 0, 1.5 at ∞
        let near0 = h("x^0.5 - 2*x^1.5", 1e-6);
        let want0 = 0.5 * (0.5 - 1.0) / (1.0 + 0.25);
        assert!((near0 - want0).abs() < 1e-3, "{near0} vs {want0}");
        let far = h("x^0.5 - 2*x^1.5", 1e6);
        let want_inf = 1.5 * 0.5 / (1.0 + 2.25);
        assert!((far - want_inf).abs() < 1e-3, "{far} vs {want_inf}");
    }

    #[test]
    fn composition_bound_and_equality() {
        let g = parse("x^2").unwrap();
        let hh = parse("x^3").unwrap();
        let c = composition_kappa_check(&g, &hh, &Real::from_f64(5.0)).unwrap();
        assert!((c.lhs.to_f64() - 6.0).abs() < 1e-50);
        assert!((c.rhs_product.to_f64() - 6.0).abs() < 1e-50);
        assert!(c.bound_holds);
        assert_eq!(c.equality_holds, Some(true));

        let e = parse("exp(x)").unwrap();
        let c = composition_kappa_check(&e, &e, &Real::one()).unwrap();
        assert!((c.lhs.to_f64() - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(c.equality_holds, Some(true));

        let c = composition_kappa_check(&g, &hh, &Real::zero()).unwrap();
        assert!(c.bound_holds);
        assert_eq!(c.equality_holds, None);
    }
}
