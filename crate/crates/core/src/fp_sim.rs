//! Simulated binary floating-point arithmetic F_u.
//!
//! Precision-t values are ±m·2^(e−t) with 2^(t−1) ≤ m ≤ 2^t − 1 and an
//! unbounded exponent; u = 2^(−t). Rounding is to nearest with exact ties
//! resolved toward zero. Arithmetic ops and intrinsics are exact-then-round:
//! the exact value is formed at reference precision (512× finer than the
//! widest simulated system, so the double rounding is immaterial) and then
//! rounded once.

use std::fmt;

use thiserror::Error;

use crate::expr::{intrinsic_scalar, pow_scalar, Expr};
use crate::real::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FpSystem {
    t: u32,
}

impl FpSystem {
    pub fn new(t: u32) -> FpSystem {
        assert!((2..=63).contains(&t), "precision t must be in [2, 63]");
        FpSystem { t }
    }

    pub fn t(&self) -> u32 {
        self.t
    }

    /// Unit roundoff u = 2^(−t), exact.
    pub fn u(&self) -> Real {
        Real::one().mul_pow2(-(self.t as i32))
    }

    pub fn u_f64(&self) -> f64 {
        2f64.powi(-(self.t as i32))
    }

    /// Nearest representable value, ties toward zero.
    pub fn round_fl(&self, x: &Real) -> FpValue {
        if x.is_zero() {
            return FpValue::Zero;
        }
        let (words, e, neg) = x.raw_mantissa().expect("finite nonzero");
        let nbits = words.len() * 64;
        let t = self.t as usize;
        assert!(nbits > t + 1);
        // bit i counted from the MSB (which is always 1)
        let bit = |i: usize| (words[words.len() - 1 - i / 64] >> (63 - i % 64)) & 1;
        let mut m: u64 = 0;
        for i in 0..t {
            m = (m << 1) | bit(i);
        }
        let mut e = e as i64;
        if bit(t) == 1 && (t + 1..nbits).any(|i| bit(i) == 1) {
            // above the midpoint: round away from zero in magnitude
            m += 1;
            if m == 1 << t {
                m >>= 1;
                e += 1;
            }
        }
        FpValue::Finite { neg, m, e }
    }
}

/// A simulated floating-point number; reconstructs exactly as ±m·2^(e−t).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FpValue {
    Zero,
    Finite { neg: bool, m: u64, e: i64 },
}

impl FpValue {
    pub fn is_zero(&self) -> bool {
        matches!(self, FpValue::Zero)
    }

    pub fn to_real(&self, sys: &FpSystem) -> Real {
        match *self {
            FpValue::Zero => Real::zero(),
            FpValue::Finite { neg, m, e } => {
                let shift = e - sys.t as i64;
                let v = Real::from_u64(m).mul_pow2(i32::try_from(shift).expect("exponent range"));
                if neg {
                    v.neg()
                } else {
                    v
                }
            }
        }
    }

    pub fn to_f64(&self, sys: &FpSystem) -> f64 {
        match *self {
            FpValue::Zero => 0.0,
            FpValue::Finite { neg, m, e } => {
                let v = m as f64 * 2f64.powi((e - sys.t as i64) as i32);
                if neg {
                    -v
                } else {
                    v
                }
            }
        }
    }

    /// `mantissa-hex e exponent` rendering for traces.
    pub fn trace_repr(&self) -> String {
        match *self {
            FpValue::Zero => "0".to_string(),
            FpValue::Finite { neg, m, e } => {
                format!("{}0x{m:x}e{e}", if neg { "-" } else { "+" })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FpOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl FpOp {
    fn name(&self) -> &'static str {
        match self {
            FpOp::Add => "add",
            FpOp::Sub => "sub",
            FpOp::Mul => "mul",
            FpOp::Div => "div",
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum FpError {
    #[error("division by zero at node {node}")]
    DivisionByZero { node: usize },
    #[error("no output: node {node} `{expr}`: {reason}")]
    NoOutput { node: usize, expr: String, reason: String },
}

/// One rounding event.
#[derive(Clone, Debug)]
pub struct TraceRecord {
    pub node: usize,
    pub op: String,
    pub inputs: Vec<FpValue>,
    pub exact: Real,
    pub rounded: FpValue,
    /// fl(z) = z(1+δ); exact value of the stored δ.
    pub delta: Real,
}

#[derive(Clone, Debug, Default)]
pub struct OpTrace {
    pub records: Vec<TraceRecord>,
}

impl OpTrace {
    /// Line-delimited export: node id, op, inputs (hex mantissa/exponent),
    /// δ as an exact dyadic rational.
    pub fn export_lines(&self) -> Vec<String> {
        self.records
            .iter()
            .map(|r| {
                let ins: Vec<String> = r.inputs.iter().map(|v| v.trace_repr()).collect();
                format!(
                    "{} {} in=[{}] out={} delta={}",
                    r.node,
                    r.op,
                    ins.join(","),
                    r.rounded.trace_repr(),
                    dyadic_string(&r.delta)
                )
            })
            .collect()
    }
}

/// Exact dyadic rendering `±m*2^k` of a reference value (reference values
/// are binary floats, hence exactly dyadic).
pub fn dyadic_string(x: &Real) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    let (words, e, neg) = x.raw_mantissa().expect("finite");
    // strip trailing zero words/bits
    let mut bits: Vec<u64> = words.clone();
    let nbits = bits.len() * 64;
    let mut shift = 0usize;
    while bits[0] == 0 {
        bits.remove(0);
        shift += 64;
    }
    let tz = bits[0].trailing_zeros() as usize;
    shift += tz;
    // value = m_int · 2^(e − nbits + shift), m_int = mantissa >> shift
    let mut digits = num_bigint::BigUint::default();
    for w in bits.iter().rev() {
        digits = (digits << 64u32) | num_bigint::BigUint::from(*w);
    }
    digits >>= tz;
    let exp = e as i64 - nbits as i64 + shift as i64;
    format!("{}{}*2^{}", if neg { "-" } else { "" }, digits, exp)
}

fn round_with_delta(sys: &FpSystem, exact: &Real) -> (FpValue, Real) {
    let rounded = sys.round_fl(exact);
    let delta = if exact.is_zero() {
        Real::zero()
    } else {
        rounded.to_real(sys).sub(exact).div(exact)
    };
    (rounded, delta)
}

/// x ∘̃ y = fl(x ∘ y); returns the rounded value and δ with |δ| ≤ u.
pub fn fp_op(sys: &FpSystem, op: FpOp, a: FpValue, b: FpValue) -> Result<(FpValue, Real), FpError> {
    let (ar, br) = (a.to_real(sys), b.to_real(sys));
    let exact = match op {
        FpOp::Add => ar.add(&br),
        FpOp::Sub => ar.sub(&br),
        FpOp::Mul => ar.mul(&br),
        FpOp::Div => {
            if b.is_zero() {
                return Err(FpError::DivisionByZero { node: 0 });
            }
            ar.div(&br)
        }
    };
    Ok(round_with_delta(sys, &exact))
}

struct FpCtx<'a> {
    sys: &'a FpSystem,
    trace: OpTrace,
    next_id: usize,
}

impl FpCtx<'_> {
    fn record(&mut self, node: usize, op: String, inputs: Vec<FpValue>, exact: Real) -> FpValue {
        let (rounded, delta) = round_with_delta(self.sys, &exact);
        self.trace.records.push(TraceRecord { node, op, inputs, exact, rounded, delta });
        rounded
    }

    fn eval(&mut self, e: &Expr, input: FpValue) -> Result<FpValue, FpError> {
        let id = self.next_id;
        self.next_id += 1;
        match e {
            Expr::Const(c) => {
                let exact = c.as_real();
                Ok(self.record(id, "const".into(), vec![], exact))
            }
            Expr::Var => Ok(input),
            // sign flips are exact: no rounding event
            Expr::Neg(a) => Ok(match self.eval(a, input)? {
                FpValue::Zero => FpValue::Zero,
                FpValue::Finite { neg, m, e } => FpValue::Finite { neg: !neg, m, e },
            }),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let va = self.eval(a, input)?;
                let vb = self.eval(b, input)?;
                let op = match e {
                    Expr::Add(..) => FpOp::Add,
                    Expr::Sub(..) => FpOp::Sub,
                    Expr::Mul(..) => FpOp::Mul,
                    _ => FpOp::Div,
                };
                if op == FpOp::Div && vb.is_zero() {
                    return Err(FpError::DivisionByZero { node: id });
                }
                let (ar, br) = (va.to_real(self.sys), vb.to_real(self.sys));
                let exact = match op {
                    FpOp::Add => ar.add(&br),
                    FpOp::Sub => ar.sub(&br),
                    FpOp::Mul => ar.mul(&br),
                    FpOp::Div => ar.div(&br),
                };
                Ok(self.record(id, op.name().into(), vec![va, vb], exact))
            }
            Expr::Pow(a, c) => {
                let va = self.eval(a, input)?;
                let exact = pow_scalar(&va.to_real(self.sys), c).ok_or_else(|| FpError::NoOutput {
                    node: id,
                    expr: e.to_string(),
                    reason: "power undefined at the rounded base".into(),
                })?;
                Ok(self.record(id, format!("pow^{}", c.text()), vec![va], exact))
            }
            Expr::Intrinsic(k, a) => {
                let va = self.eval(a, input)?;
                let exact =
                    intrinsic_scalar(*k, &va.to_real(self.sys)).ok_or_else(|| FpError::NoOutput {
                        node: id,
                        expr: e.to_string(),
                        reason: format!("{} undefined at the rounded argument", k.name()),
                    })?;
                Ok(self.record(id, k.name().into(), vec![va], exact))
            }
        }
    }
}

/// Runs the AST as a floating-point algorithm: the input is rounded into
/// F_u first, then every node is a correctly rounded operation.
pub fn eval_in_fp(sys: &FpSystem, f: &Expr, x: &Real) -> Result<(FpValue, OpTrace), FpError> {
    let mut ctx = FpCtx { sys, trace: OpTrace::default(), next_id: 0 };
    let (input, delta) = round_with_delta(sys, x);
    ctx.trace.records.push(TraceRecord {
        node: usize::MAX,
        op: "input".into(),
        inputs: vec![],
        exact: x.clone(),
        rounded: input,
        delta,
    });
    let out = ctx.eval(f, input)?;
    Ok((out, ctx.trace))
}

impl fmt::Display for FpValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.trace_repr())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn fl(t: u32, x: f64) -> f64 {
        let sys = FpSystem::new(t);
        sys.round_fl(&Real::from_f64(x)).to_f64(&sys)
    }

    #[test]
    fn t3_examples() {
        assert_eq!(fl(3, 9.0), 8.0); // tie {8, 10} resolved toward zero
        assert_eq!(fl(3, -9.0), -8.0);
        assert_eq!(fl(3, 5.0), 5.0);
        assert_eq!(fl(3, 11.0), 10.0); // tie {10, 12}
        assert_eq!(fl(3, 11.01), 12.0);
        assert_eq!(fl(3, 6.5), 6.0); // tie {6, 7}
    }

    #[test]
    fn rounding_is_idempotent_and_monotone() {
        let sys = FpSystem::new(5);
        let mut prev = f64::NEG_INFINITY;
        for i in -300..300 {
            let x = i as f64 * 0.037;
            let r = sys.round_fl(&Real::from_f64(x));
            let rf = r.to_f64(&sys);
            assert!(rf >= prev, "monotonicity broke at {x}");
            prev = rf;
            assert_eq!(sys.round_fl(&r.to_real(&sys)), r, "not idempotent at {x}");
        }
    }

    #[test]
    fn ties_go_toward_zero_exhaustively() {
        // all midpoints between consecutive representables, t ≤ 6
        for t in 2..=6u32 {
            let sys = FpSystem::new(t);
            for e in -3i64..=6 {
                for m in (1u64 << (t - 1))..(1u64 << t) {
                    let v = FpValue::Finite { neg: false, m, e };
                    let next = if m + 1 == 1 << t {
                        FpValue::Finite { neg: false, m: 1 << (t - 1), e: e + 1 }
                    } else {
                        FpValue::Finite { neg: false, m: m + 1, e }
                    };
                    let mid = v.to_real(&sys).add(&next.to_real(&sys)).mul_pow2(-1);
                    assert_eq!(sys.round_fl(&mid), v, "t={t} m={m} e={e}");
                    assert_eq!(sys.round_fl(&mid.neg()), FpValue::Finite { neg: true, m, e });
                }
            }
        }
    }

    #[test]
    fn op_axioms_hold_bit_exactly() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..4000 {
            let t = rng.gen_range(2..=32);
            let sys = FpSystem::new(t);
            let a = sys.round_fl(&Real::from_f64(rng.gen_range(-1e6f64..1e6)));
            let b = sys.round_fl(&Real::from_f64(rng.gen_range(-1e6f64..1e6)));
            for op in [FpOp::Add, FpOp::Sub, FpOp::Mul, FpOp::Div] {
                if op == FpOp::Div && b.is_zero() {
                    continue;
                }
                let (_, delta) = fp_op(&sys, op, a, b).unwrap();
                assert!(delta.abs().le(&sys.u()), "|δ| > u for {op:?} at t={t}");
            }
        }
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let sys = FpSystem::new(8);
        let one = sys.round_fl(&Real::one());
        assert!(matches!(
            fp_op(&sys, FpOp::Div, one, FpValue::Zero),
            Err(FpError::DivisionByZero { .. })
        ));
    }

    #[test]
    fn eval_examples() {
        // exp at 1, t=24: within 3u of e
        let sys = FpSystem::new(24);
        let (v, trace) = eval_in_fp(&sys, &parse("exp(x)").unwrap(), &Real::one()).unwrap();
        let d = crate::metric::rel_distance(v.to_f64(&sys), std::f64::consts::E);
        assert!(d <= 3.0 * sys.u_f64(), "distance {d}");
        assert_eq!(trace.records.len(), 2); // input rounding + one op

        // exact arithmetic case
        let sys = FpSystem::new(8);
        let (v, _) = eval_in_fp(&sys, &parse("x*x - 1").unwrap(), &Real::one()).unwrap();
        assert_eq!(v, FpValue::Zero);

        // cancellation of the rounded sum at t=4
        let sys = FpSystem::new(4);
        let (v, _) =
            eval_in_fp(&sys, &parse("(x + 1) - x").unwrap(), &Real::from_f64(1024.0)).unwrap();
        assert_eq!(v, FpValue::Zero);
    }

    #[test]
    fn no_output_on_rounded_domain_violation() {
        // fl(x) at t=2 pushes 1.1 down to 1, where log(x − 1) dies
        let sys = FpSystem::new(2);
        let err = eval_in_fp(&sys, &parse("log(x - 1)").unwrap(), &Real::from_f64(1.1));
        assert!(matches!(err, Err(FpError::NoOutput { .. })));
    }

    #[test]
    fn traces_export_exact_dyadics() {
        let sys = FpSystem::new(3);
        let (_, trace) = eval_in_fp(&sys, &parse("x + 1").unwrap(), &Real::from_f64(9.0)).unwrap();
        let lines = trace.export_lines();
        // input fl(9) = 8: δ = −1/9, not dyadic in decimal but the stored
        // 256-bit value is printed exactly
        assert!(lines[0].contains("out=+0x4e4"));
        let (v, _) = eval_in_fp(&sys, &parse("x").unwrap(), &Real::from_f64(10.0)).unwrap();
        assert_eq!(v, FpValue::Finite { neg: false, m: 5, e: 4 });
        assert_eq!(dyadic_string(&v.to_real(&sys)), "5*2^1");
        assert_eq!(dyadic_string(&Real::zero()), "0");
    }
}
