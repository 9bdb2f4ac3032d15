//! Open intervals and finite unions of them.
//!
//! Endpoints are `f64` with `±inf` allowed. Analysis code splits any
//! interval that straddles 0 before working on it, since the relative-error
//! metric separates (−∞,0), {0}, and (0,∞) into different components.

use std::fmt;

use thiserror::Error;

/// An open interval (lo, hi), lo < hi, endpoints possibly infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Interval {
        assert!(lo < hi, "empty interval ({lo}, {hi})");
        assert!(!lo.is_nan() && !hi.is_nan());
        Interval { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo < x && x < self.hi
    }

    pub fn straddles_zero(&self) -> bool {
        self.lo < 0.0 && self.hi > 0.0
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    fn intersect(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo < hi).then(|| Interval::new(lo, hi))
    }
}

/// A finite union of disjoint open intervals, kept sorted.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct IntervalDomain {
    intervals: Vec<Interval>,
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("invalid interval syntax: {0}")]
pub struct IntervalParseError(String);

impl IntervalDomain {
    pub fn empty() -> IntervalDomain {
        IntervalDomain { intervals: Vec::new() }
    }

    pub fn full() -> IntervalDomain {
        IntervalDomain::from_interval(Interval::new(f64::NEG_INFINITY, f64::INFINITY))
    }

    pub fn from_interval(iv: Interval) -> IntervalDomain {
        IntervalDomain { intervals: vec![iv] }
    }

    /// Builds a domain from arbitrary intervals, sorting and merging
    /// overlapping or touching pieces. Note that merging across a shared
    /// endpoint is *not* done: (0,1) ∪ (1,2) stays two components, since the
    /// endpoint is excluded from both.
    pub fn from_intervals(mut ivs: Vec<Interval>) -> IntervalDomain {
        ivs.sort_by(|a, b| a.lo.partial_cmp(&b.lo).unwrap());
        let mut out: Vec<Interval> = Vec::with_capacity(ivs.len());
        for iv in ivs {
            match out.last_mut() {
                Some(last) if iv.lo < last.hi => last.hi = last.hi.max(iv.hi),
                _ => out.push(iv),
            }
        }
        IntervalDomain { intervals: out }
    }

    pub fn components(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|iv| iv.contains(x))
    }

    /// The component containing `x`, if any.
    pub fn component_of(&self, x: f64) -> Option<Interval> {
        self.intervals.iter().copied().find(|iv| iv.contains(x))
    }

    pub fn intersect(&self, other: &IntervalDomain) -> IntervalDomain {
        let mut out = Vec::new();
        for a in &self.intervals {
            for b in &other.intervals {
                if let Some(c) = a.intersect(b) {
                    out.push(c);
                }
            }
        }
        IntervalDomain::from_intervals(out)
    }

    /// Splits every component straddling 0 into its negative and positive
    /// parts (the point 0 itself is dropped; it is its own metric
    /// component).
    pub fn split_at_zero(&self) -> IntervalDomain {
        let mut out = Vec::new();
        for iv in &self.intervals {
            if iv.straddles_zero() {
                out.push(Interval::new(iv.lo, 0.0));
                out.push(Interval::new(0.0, iv.hi));
            } else {
                out.push(*iv);
            }
        }
        IntervalDomain { intervals: out }
    }

    pub fn parse(text: &str) -> Result<IntervalDomain, IntervalParseError> {
        let mut out = Vec::new();
        for piece in text.split('U') {
            let piece = piece.trim();
            if piece.is_empty() {
                return Err(IntervalParseError("empty interval in union".into()));
            }
            let inner = piece
                .strip_prefix('(')
                .and_then(|s| s.strip_suffix(')'))
                .ok_or_else(|| IntervalParseError(format!("`{piece}`: expected (a,b)")))?;
            let (a, b) = inner
                .split_once(',')
                .ok_or_else(|| IntervalParseError(format!("`{piece}`: expected two endpoints")))?;
            let lo = parse_endpoint(a.trim())?;
            let hi = parse_endpoint(b.trim())?;
            if !(lo < hi) {
                return Err(IntervalParseError(format!("`{piece}`: endpoints out of order")));
            }
            out.push(Interval::new(lo, hi));
        }
        Ok(IntervalDomain::from_intervals(out))
    }
}

/// Endpoint syntax: `inf`, `-inf`, a decimal number, or a scaled pi form
/// like `pi`, `-pi/2`, `3pi/2`, `2pi`.
fn parse_endpoint(s: &str) -> Result<f64, IntervalParseError> {
    let bad = || IntervalParseError(format!("bad endpoint `{s}`"));
    let (neg, rest) = match s.strip_prefix('-') {
        Some(r) => (true, r.trim_start()),
        None => (false, s),
    };
    let v = if rest == "inf" {
        f64::INFINITY
    } else if let Some(i) = rest.find("pi") {
        let coef = if i == 0 { 1.0 } else { rest[..i].parse::<f64>().map_err(|_| bad())? };
        let denom = match rest[i + 2..].trim() {
            "" => 1.0,
            d => {
                let d = d.strip_prefix('/').ok_or_else(bad)?.trim();
                d.parse::<f64>().map_err(|_| bad())?
            }
        };
        coef * std::f64::consts::PI / denom
    } else {
        rest.parse::<f64>().map_err(|_| bad())?
    };
    Ok(if neg { -v } else { v })
}

fn fmt_endpoint(x: f64, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    if x == f64::INFINITY {
        write!(out, "inf")
    } else if x == f64::NEG_INFINITY {
        write!(out, "-inf")
    } else {
        write!(out, "{x}")
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        fmt_endpoint(self.lo, f)?;
        write!(f, ", ")?;
        fmt_endpoint(self.hi, f)?;
        write!(f, ")")
    }
}

impl fmt::Display for IntervalDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "(empty)");
        }
        for (i, iv) in self.intervals.iter().enumerate() {
            if i > 0 {
                write!(f, " U ")?;
            }
            write!(f, "{iv}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn parses_pi_endpoints() {
        let d = IntervalDomain::parse("(-pi/2, pi/2)").unwrap();
        assert_eq!(d.components(), &[Interval::new(-PI / 2.0, PI / 2.0)]);
        let d = IntervalDomain::parse("(pi, 2pi)").unwrap();
        assert_eq!(d.components(), &[Interval::new(PI, 2.0 * PI)]);
        let d = IntervalDomain::parse("(3pi/2, inf)").unwrap();
        assert_eq!(d.components()[0].lo, 1.5 * PI);
        assert_eq!(d.components()[0].hi, f64::INFINITY);
    }

    #[test]
    fn parses_unions_and_sorts() {
        let d = IntervalDomain::parse("(1, inf) U (-inf, -2) U (-2, 1)").unwrap();
        assert_eq!(d.components().len(), 3);
        assert!(d.components()[0].lo == f64::NEG_INFINITY);
        assert!(d.contains(0.0) && !d.contains(-2.0) && !d.contains(1.0));
    }

    #[test]
    fn display_round_trips() {
        for src in ["(0, inf)", "(-inf, inf)", "(-pi/2, pi/2)", "(1, 2) U (3, 4)"] {
            let d = IntervalDomain::parse(src).unwrap();
            let again = IntervalDomain::parse(&d.to_string()).unwrap();
            assert_eq!(d, again, "lossy round trip for {src}");
        }
    }

    #[test]
    fn split_and_intersect() {
        let d = IntervalDomain::parse("(-2, 3)").unwrap().split_at_zero();
        assert_eq!(
            d.components(),
            &[Interval::new(-2.0, 0.0), Interval::new(0.0, 3.0)]
        );
        let e = IntervalDomain::parse("(-1, 1)").unwrap();
        let i = d.intersect(&e);
        assert_eq!(
            i.components(),
            &[Interval::new(-1.0, 0.0), Interval::new(0.0, 1.0)]
        );
    }

    #[test]
    fn merging_keeps_shared_endpoints_open() {
        let d = IntervalDomain::from_intervals(vec![
            Interval::new(0.0, 1.0),
            Interval::new(1.0, 2.0),
            Interval::new(0.5, 0.8),
        ]);
        assert_eq!(d.components().len(), 2);
        assert!(!d.contains(1.0));
    }
}
