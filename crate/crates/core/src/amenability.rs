//! Empirical amenability checks.
//!
//! Amenability of f on an interval means: for some C > 0 and every x with
//! finite κ, the relative-metric ball of radius 1/(Cμ(f,x)) around x stays
//! inside the domain and μ grows by at most a factor C inside it. Four
//! sufficient criteria (one per endpoint configuration of a positive
//! component) reduce this to two items: κ → ∞ toward endpoints / near the
//! ill-posed locus, and limsup |H| bounded. Negative components are handled
//! by reflecting x → −x.
//!
//! Verdicts are "supported/refuted/inconclusive", never "proved": the
//! checker samples. Refutations, however, are certificates — every refuted
//! component carries witnesses (x, escaping y or a blow-up point) that the
//! direct definition check confirms for every C in a sweep up to 10^4.
//!
//! Operationalized thresholds (finite sampling cannot prove divergence):
//! "κ → ∞" passes when κ exceeds 10^k at relative distance ≤ 10^(−k) from
//! the target for k = 2..8 (probes sit at 0.45·10^(−k)) and the log-log
//! slope of κ against 1/distance is ≥ 0.5. "limsup |H| ≤ C" passes when the
//! running max of |H| moves < 1% over the last 4 decades of approach;
//! divergence is declared when it grows monotonically across ≥ 4 decades.

use crate::conditioning::{h_from_jet, kappa_from_jet};
use crate::domain::natural_domain;
use crate::expr::Expr;
use crate::interval::{Interval, IntervalDomain};
use crate::jet::{eval_jet, eval_jet2};
use crate::metric::dist_to_points;
use crate::real::Real;
use crate::roots::{critical_locus, zero_locus, ScanPolicy, ZeroLocus};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropositionId {
    AbBounded,
    AInf,
    ZeroB,
    ZeroInf,
}

impl PropositionId {
    pub fn name(self) -> &'static str {
        match self {
            PropositionId::AbBounded => "ab-bounded",
            PropositionId::AInf => "a-inf",
            PropositionId::ZeroB => "zero-b",
            PropositionId::ZeroInf => "zero-inf",
        }
    }
}

/// Which criterion applies to a component; components left of 0 are treated
/// through f(−x) and reported as reflected.
pub fn select_proposition(iv: &Interval) -> Result<(PropositionId, bool), String> {
    if iv.straddles_zero() {
        return Err(format!("component {iv} straddles 0; split it at the origin first"));
    }
    if iv.hi <= 0.0 {
        let (id, _) = select_proposition(&Interval::new(-iv.hi, -iv.lo))?;
        return Ok((id, true));
    }
    let id = match (iv.lo > 0.0, iv.hi.is_finite()) {
        (true, true) => PropositionId::AbBounded,
        (true, false) => PropositionId::AInf,
        (false, true) => PropositionId::ZeroB,
        (false, false) => PropositionId::ZeroInf,
    };
    Ok((id, false))
}

#[derive(Clone, Debug)]
pub struct EndpointEvidence {
    /// 0.0 and f64::INFINITY stand for the zero/unbounded endpoints.
    pub endpoint: f64,
    pub points: Vec<f64>,
    /// Relative distance of each point to the target (endpoint or locus).
    pub distances: Vec<f64>,
    pub kappas: Vec<f64>,
    /// Fitted log-log slope of κ against 1/distance.
    pub slope: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ItemVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct Item1Report {
    pub verdict: ItemVerdict,
    pub note: String,
    pub evidence: Vec<EndpointEvidence>,
    /// Points where κ stays small while the distance to the locus shrinks.
    pub witnesses: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Item2Report {
    pub verdict: ItemVerdict,
    pub note: String,
    /// Largest running max of |H| observed over the evidence (max of ends).
    pub limsup: Option<f64>,
    /// Endpoints where the analytic-extension shortcut applied.
    pub shortcut_at: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DefectKind {
    /// The ball of radius 1/(Cμ(f,x)) around x leaves the component.
    BallEscape,
    /// Some y inside the ball has μ(f,y) > Cμ(f,x).
    MuBlowup,
}

#[derive(Clone, Debug)]
pub struct Defect {
    pub c: f64,
    pub x: f64,
    pub y: f64,
    pub kind: DefectKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Supported,
    Refuted,
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct ComponentReport {
    pub component: Interval,
    pub reflected: bool,
    pub proposition: PropositionId,
    pub item1: Item1Report,
    pub item2: Item2Report,
    /// One confirmed defect per sweep constant when refuted (coordinates in
    /// the original, unreflected variable).
    pub defects: Vec<Defect>,
    pub overall: Verdict,
}

#[derive(Clone, Debug)]
pub struct AmenabilityReport {
    pub components: Vec<ComponentReport>,
    pub overall: Verdict,
}

/// A finite union of intervals is amenable iff every piece is.
pub fn combine_union(verdicts: &[Verdict]) -> Verdict {
    if verdicts.iter().any(|v| *v == Verdict::Refuted) {
        Verdict::Refuted
    } else if verdicts.iter().all(|v| *v == Verdict::Supported) {
        Verdict::Supported
    } else {
        Verdict::Inconclusive
    }
}

pub const C_SWEEP: [f64; 4] = [10.0, 100.0, 1000.0, 10000.0];

pub fn check_amenability(f: &Expr, dom: &IntervalDomain, scan: &ScanPolicy) -> AmenabilityReport {
    let mut components = Vec::new();
    for iv in dom.split_at_zero().components() {
        components.push(check_component(f, iv, scan));
    }
    let overall = combine_union(&components.iter().map(|c| c.overall).collect::<Vec<_>>());
    AmenabilityReport { components, overall }
}

fn check_component(f: &Expr, iv: &Interval, scan: &ScanPolicy) -> ComponentReport {
    let (proposition, reflected) = select_proposition(iv).expect("split_at_zero upheld");
    let (g, w) = if reflected {
        (f.reflect(), Interval::new(-iv.hi, -iv.lo))
    } else {
        (f.clone(), *iv)
    };
    let wdom = IntervalDomain::from_interval(w);
    let locus = zero_locus(&g, &wdom, scan);
    let crits = critical_locus(&g, &wdom, scan);

    let item1 = check_item1(&g, &w, &locus, &crits, scan);
    let item2 = check_item2(&g, &w, scan, &crits);

    let locus_pts = locus.points();
    let candidates = witness_candidates(&g, &w, &item1, &crits, scan);
    let mut defects = Vec::new();
    for &c in &C_SWEEP {
        match check_definition_direct(&g, &w, c, &candidates, &locus_pts) {
            Some(d) => defects.push(d),
            None => {
                defects.clear();
                break;
            }
        }
    }
    let refuted = defects.len() == C_SWEEP.len();
    if reflected {
        for d in &mut defects {
            d.x = -d.x;
            d.y = -d.y;
        }
    }
    let overall = if refuted {
        Verdict::Refuted
    } else if item1.verdict == ItemVerdict::Pass && item2.verdict == ItemVerdict::Pass {
        Verdict::Supported
    } else {
        Verdict::Inconclusive
    };
    ComponentReport {
        component: *iv,
        reflected,
        proposition,
        item1,
        item2,
        defects,
        overall,
    }
}

fn kappa_at(f: &Expr, x: f64) -> Option<f64> {
    let xr = Real::from_f64(x);
    let j = eval_jet2(f, &xr).ok()?;
    Some(kappa_from_jet(&xr, &j).to_f64())
}

fn mu_at(f: &Expr, x: f64) -> Option<f64> {
    kappa_at(f, x).map(|k| 1.0 + k)
}

fn h_at(f: &Expr, x: f64) -> Option<f64> {
    let xr = Real::from_f64(x);
    let j = eval_jet2(f, &xr).ok()?;
    h_from_jet(&xr, &j).value().map(|v| v.to_f64())
}

fn fit_slope(log_inv_d: &[f64], log_k: &[f64]) -> f64 {
    let n = log_inv_d.len() as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let mx = log_inv_d.iter().sum::<f64>() / n;
    let my = log_k.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in log_inv_d.iter().zip(log_k) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

const DIV_POINTS: usize = 32;
const DIV_DECADES: f64 = 8.0;

/// κ along a geometric approach to a finite endpoint; `dir` = +1 approaches
/// from above. Probes sit at relative distance 0.45·10^(−k) so the κ > 10^k
/// threshold reads κ·d > 0.45.
fn endpoint_divergence(g: &Expr, e: f64, dir: f64, cap: f64) -> (EndpointEvidence, ItemVerdict) {
    let d_hi = cap.min(0.045);
    let mut ev = EndpointEvidence {
        endpoint: e,
        points: Vec::new(),
        distances: Vec::new(),
        kappas: Vec::new(),
        slope: f64::NAN,
    };
    let mut errors = 0usize;
    for j in 0..DIV_POINTS {
        let d = d_hi * 10f64.powf(-DIV_DECADES * j as f64 / (DIV_POINTS - 1) as f64);
        let x = e * (dir * d).exp();
        match kappa_at(g, x) {
            Some(k) => {
                ev.points.push(x);
                ev.distances.push(d);
                ev.kappas.push(k);
            }
            None => errors += 1,
        }
    }
    if errors > 0 || ev.points.len() < DIV_POINTS {
        return (ev, ItemVerdict::Inconclusive);
    }
    let threshold_ok = ev
        .distances
        .iter()
        .zip(&ev.kappas)
        .all(|(d, k)| k.is_infinite() || k * d > 0.45);
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for (d, k) in ev.distances.iter().zip(&ev.kappas) {
        if k.is_finite() && *k > 0.0 {
            lx.push(-d.ln());
            ly.push(k.ln());
        }
    }
    ev.slope = if lx.len() >= 2 { fit_slope(&lx, &ly) } else { 1.0 };
    let v = if threshold_ok && ev.slope >= 0.5 { ItemVerdict::Pass } else { ItemVerdict::Fail };
    (ev, v)
}

enum TailOutcome {
    Void,
    Pass(EndpointEvidence),
    Fail(Vec<f64>, EndpointEvidence),
    Inconclusive(String),
}

/// κ behaviour along sequences approaching 0 or ∞ while staying close to
/// the zero locus. Probe points are relative offsets 10^(−j) from the locus
/// elements nearest the endpoint, plus critical points of g in the tail
/// region (the classical counterexample sequences sit at critical points).
fn tail_check(
    g: &Expr,
    w: &Interval,
    locus: &ZeroLocus,
    crits: &ZeroLocus,
    toward_inf: bool,
    scan: &ScanPolicy,
) -> TailOutcome {
    let pts = locus.points();
    if pts.is_empty() {
        return TailOutcome::Void;
    }
    // the locus only matters if it accumulates toward the endpoint; a locus
    // bounded away from it makes the hypothesis void
    let (region, crit_region) = if toward_inf {
        (scan.max_abs.powf(0.75), scan.max_abs.sqrt())
    } else {
        (scan.min_abs.powf(0.75), scan.min_abs.sqrt())
    };
    let tail_locus: Vec<f64> = pts
        .iter()
        .copied()
        .filter(|p| if toward_inf { *p >= region } else { *p <= region })
        .collect();
    if tail_locus.is_empty() {
        return TailOutcome::Void;
    }

    let mut candidates: Vec<f64> = Vec::new();
    let mut anchors = tail_locus.clone();
    if toward_inf {
        anchors.sort_by(|a, b| b.partial_cmp(a).unwrap());
    } else {
        anchors.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    for r in anchors.iter().take(3) {
        for j in 1..=8 {
            let eps = 10f64.powi(-j);
            for s in [1.0, -1.0] {
                let x = r * (s * eps).exp();
                if w.contains(x) {
                    candidates.push(x);
                }
            }
        }
    }
    // critical points in the tail, screened cheaply in f64
    let mut crit_tail: Vec<f64> = crits
        .points()
        .into_iter()
        .filter(|c| if toward_inf { *c >= crit_region } else { *c <= crit_region })
        .filter(|c| {
            eval_jet(g, c)
                .ok()
                .map(|j| j.v != 0.0 && (c * j.d1 / j.v).abs() <= 20.0)
                .unwrap_or(false)
        })
        .collect();
    crit_tail.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let step = (crit_tail.len() / 24).max(1);
    candidates.extend(crit_tail.iter().step_by(step).copied());

    let mut ev = EndpointEvidence {
        endpoint: if toward_inf { f64::INFINITY } else { 0.0 },
        points: Vec::new(),
        distances: Vec::new(),
        kappas: Vec::new(),
        slope: f64::NAN,
    };
    for x in candidates {
        if let Some(k) = kappa_at(g, x) {
            ev.points.push(x);
            ev.distances.push(dist_to_points(x, &pts));
            ev.kappas.push(k);
        }
    }

    // failure: κ stays small along a sequence with distance to the locus
    // shrinking toward 0
    let mut lows: Vec<(f64, f64)> = ev
        .points
        .iter()
        .zip(ev.distances.iter().zip(&ev.kappas))
        .filter(|(x, (d, k))| {
            **d <= 0.05
                && **k <= 10.0
                && if toward_inf { **x >= crit_region } else { **x <= crit_region }
        })
        .map(|(x, (d, _))| (*x, *d))
        .collect();
    lows.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    if lows.len() >= 4 && lows[0].1 <= 1e-3 {
        let witnesses = lows.iter().map(|(x, _)| *x).collect();
        return TailOutcome::Fail(witnesses, ev);
    }

    let near: Vec<(f64, f64)> = ev
        .distances
        .iter()
        .zip(&ev.kappas)
        .filter(|(d, _)| **d <= 0.05)
        .map(|(d, k)| (*d, *k))
        .collect();
    if near.len() < 8 {
        return TailOutcome::Inconclusive("too few usable probes near the locus".into());
    }
    let threshold_ok = near.iter().all(|(d, k)| k.is_infinite() || k * d > 0.45);
    let (mut lx, mut ly) = (Vec::new(), Vec::new());
    for (d, k) in &near {
        if k.is_finite() && *k > 0.0 {
            lx.push(-d.ln());
            ly.push(k.ln());
        }
    }
    ev.slope = if lx.len() >= 2 { fit_slope(&lx, &ly) } else { 1.0 };
    if threshold_ok && ev.slope >= 0.5 {
        TailOutcome::Pass(ev)
    } else {
        TailOutcome::Inconclusive("κ near the locus does not follow a divergent trend".into())
    }
}

pub fn check_item1(
    g: &Expr,
    w: &Interval,
    locus: &ZeroLocus,
    crits: &ZeroLocus,
    scan: &ScanPolicy,
) -> Item1Report {
    let mut evidence = Vec::new();
    let mut witnesses = Vec::new();
    let mut notes = Vec::new();
    let mut verdict = ItemVerdict::Pass;
    fn downgrade(v: ItemVerdict, current: &mut ItemVerdict) {
        match v {
            ItemVerdict::Fail => *current = ItemVerdict::Fail,
            ItemVerdict::Inconclusive if *current == ItemVerdict::Pass => {
                *current = ItemVerdict::Inconclusive
            }
            _ => {}
        }
    }

    let cap = if w.is_bounded() { 0.25 * (w.hi / w.lo).ln() } else { 0.5 };
    if w.lo > 0.0 {
        let (ev, v) = endpoint_divergence(g, w.lo, 1.0, cap);
        if v == ItemVerdict::Fail {
            witnesses.extend(ev.points.iter().copied());
            notes.push(format!("κ stays bounded approaching {}", w.lo));
        } else if v == ItemVerdict::Inconclusive {
            notes.push(format!("κ not evaluable near {}", w.lo));
        }
        downgrade(v, &mut verdict);
        evidence.push(ev);
    }
    if w.hi.is_finite() {
        let (ev, v) = endpoint_divergence(g, w.hi, -1.0, cap);
        if v == ItemVerdict::Fail {
            witnesses.extend(ev.points.iter().copied());
            notes.push(format!("κ stays bounded approaching {}", w.hi));
        } else if v == ItemVerdict::Inconclusive {
            notes.push(format!("κ not evaluable near {}", w.hi));
        }
        downgrade(v, &mut verdict);
        evidence.push(ev);
    }
    if w.lo == 0.0 || !w.hi.is_finite() {
        for toward_inf in [false, true] {
            if toward_inf && w.hi.is_finite() {
                continue;
            }
            if !toward_inf && w.lo > 0.0 {
                continue;
            }
            match tail_check(g, w, locus, crits, toward_inf, scan) {
                TailOutcome::Void => {}
                TailOutcome::Pass(ev) => evidence.push(ev),
                TailOutcome::Fail(wit, ev) => {
                    notes.push(format!(
                        "κ bounded along a sequence toward {} with distance to the locus → 0",
                        if toward_inf { "∞" } else { "0" }
                    ));
                    witnesses.extend(wit);
                    evidence.push(ev);
                    downgrade(ItemVerdict::Fail, &mut verdict);
                }
                TailOutcome::Inconclusive(m) => {
                    notes.push(m);
                    downgrade(ItemVerdict::Inconclusive, &mut verdict);
                }
            }
        }
    }
    // a non-exhaustive locus scan can still certify a failure, never a pass
    if locus.unresolved && verdict == ItemVerdict::Pass {
        verdict = ItemVerdict::Inconclusive;
        notes.push("zero-locus scan was not exhaustive".into());
    }
    Item1Report {
        verdict,
        note: if notes.is_empty() { "κ diverges at every required approach".into() } else { notes.join("; ") },
        evidence,
        witnesses,
    }
}

const H_POINTS: usize = 192;

enum EndStatus {
    Pass(f64),
    Shortcut,
    Fail(f64),
    Inconclusive(String),
}

/// Running-max plateau test over (position-in-decades, |H|) evidence.
fn plateau(seq: &[(f64, f64)]) -> EndStatus {
    if seq.len() < H_POINTS / 2 {
        return EndStatus::Inconclusive("too many evaluation failures along the approach".into());
    }
    let p_end = seq.last().unwrap().0;
    let mut running = Vec::with_capacity(seq.len());
    let mut m = 0.0f64;
    for (p, h) in seq {
        m = m.max(h.abs());
        running.push((*p, m));
    }
    let m_end = m;
    let at = |p: f64| -> f64 {
        running
            .iter()
            .rev()
            .find(|(q, _)| *q <= p)
            .map(|(_, v)| *v)
            .unwrap_or(0.0)
    };
    let m_ref = at(p_end - 4.0);
    if m_end <= m_ref * 1.01 + 1e-12 {
        return EndStatus::Pass(m_end);
    }
    let marks: Vec<f64> = (0..=4).rev().map(|k| at(p_end - k as f64)).collect();
    let monotone = marks.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-6));
    if monotone && m_end >= 2.0 * m_ref {
        EndStatus::Fail(m_end)
    } else {
        EndStatus::Inconclusive(format!(
            "running max of |H| still moving ({m_ref:.4} → {m_end:.4} over 4 decades)"
        ))
    }
}

fn h_evidence_finite(g: &Expr, e: f64, dir: f64, cap: f64) -> Vec<(f64, f64)> {
    let d_hi = cap.min(0.4);
    let mut seq = Vec::new();
    for j in 0..H_POINTS {
        let d = d_hi * 10f64.powf(-8.0 * j as f64 / (H_POINTS - 1) as f64);
        let x = e * (dir * d).exp();
        if let Some(h) = h_at(g, x) {
            seq.push((-d.log10(), h));
        }
    }
    seq
}

fn h_evidence_tail(
    g: &Expr,
    w: &Interval,
    toward_inf: bool,
    scan: &ScanPolicy,
    crits: &ZeroLocus,
) -> Vec<(f64, f64)> {
    let (m0, m1) = if toward_inf {
        ((w.lo * 1.3f64.exp()).max(scan.min_abs * 10.0).min(scan.max_abs / 1e4), scan.max_abs)
    } else {
        (scan.min_abs, (w.hi * (-1.3f64).exp()).min(scan.max_abs / 10.0).max(scan.min_abs * 1e4))
    };
    let mut seq = Vec::new();
    for j in 0..H_POINTS {
        let frac = j as f64 / (H_POINTS - 1) as f64;
        let x = if toward_inf {
            m0 * (m1 / m0).powf(frac)
        } else {
            m1 * (m0 / m1).powf(frac)
        };
        if !w.contains(x) {
            continue;
        }
        if let Some(h) = h_at(g, x) {
            let p = if toward_inf { x.log10() } else { -x.log10() };
            seq.push((p, h));
        }
    }
    // |H| peaks of oscillatory functions sit at critical points; a bare
    // geometric grid almost never lands on them
    let crit_pts = crits.points();
    let step = (crit_pts.len() / 48).max(1);
    for c in crit_pts.iter().step_by(step) {
        if *c >= m0.min(m1) && *c <= m0.max(m1) && w.contains(*c) {
            if let Some(h) = h_at(g, *c) {
                let p = if toward_inf { c.log10() } else { -c.log10() };
                seq.push((p, h));
            }
        }
    }
    seq.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    seq
}

pub fn check_item2(g: &Expr, w: &Interval, scan: &ScanPolicy, crits: &ZeroLocus) -> Item2Report {
    // analytic-extension shortcut: the natural domain strictly contains the
    // endpoint (an endpoint created only by the user's restriction)
    let wide_lo = if w.lo > 0.0 { w.lo / 4.0 } else { -1.0 };
    let wide_hi = if w.hi.is_finite() { w.hi * 4.0 } else { f64::INFINITY };
    let natural = natural_domain(g, &IntervalDomain::from_interval(Interval::new(wide_lo, wide_hi)), scan);
    let interior = |e: f64| -> bool {
        !natural.unresolved
            && natural.domain.components().iter().any(|iv| {
                if e == 0.0 {
                    iv.lo < -1e-12 && iv.hi > 1e-12
                } else {
                    iv.lo < e * (1.0 - 1e-9) - 1e-300 && iv.hi > e * (1.0 + 1e-9)
                }
            })
    };

    let cap = if w.is_bounded() { 0.25 * (w.hi / w.lo).ln() } else { 0.4 };
    let mut limsup: Option<f64> = None;
    let mut shortcut_at = Vec::new();
    let mut notes = Vec::new();
    let mut verdict = ItemVerdict::Pass;

    let mut ends: Vec<(f64, EndStatus)> = Vec::new();
    // lower end
    if interior(w.lo) {
        ends.push((w.lo, EndStatus::Shortcut));
    } else if w.lo > 0.0 {
        ends.push((w.lo, plateau(&h_evidence_finite(g, w.lo, 1.0, cap))));
    } else {
        ends.push((0.0, plateau(&h_evidence_tail(g, w, false, scan, crits))));
    }
    // upper end
    if w.hi.is_finite() && interior(w.hi) {
        ends.push((w.hi, EndStatus::Shortcut));
    } else if w.hi.is_finite() {
        ends.push((w.hi, plateau(&h_evidence_finite(g, w.hi, -1.0, cap))));
    } else {
        ends.push((f64::INFINITY, plateau(&h_evidence_tail(g, w, true, scan, crits))));
    }

    for (e, status) in ends {
        match status {
            EndStatus::Shortcut => shortcut_at.push(e),
            EndStatus::Pass(m) => limsup = Some(limsup.map(|v: f64| v.max(m)).unwrap_or(m)),
            EndStatus::Fail(m) => {
                notes.push(format!("|H| grows without bound toward {e} (last running max {m:.3e})"));
                verdict = ItemVerdict::Fail;
            }
            EndStatus::Inconclusive(msg) => {
                notes.push(format!("toward {e}: {msg}"));
                if verdict != ItemVerdict::Fail {
                    verdict = ItemVerdict::Inconclusive;
                }
            }
        }
    }
    Item2Report {
        verdict,
        note: if notes.is_empty() { "limsup |H| bounded at both ends".into() } else { notes.join("; ") },
        limsup,
        shortcut_at,
    }
}

/// Searches x near a finite endpoint such that the ball of radius 1/(Cμ)
/// escapes the component, following the x = endpoint·(1 + C^(−p)) pattern.
pub fn falsify_ball_escape(g: &Expr, w: &Interval, c_sweep: &[f64]) -> Vec<Defect> {
    let mut ends = Vec::new();
    if w.lo > 0.0 {
        ends.push((w.lo, 1.0));
    }
    if w.hi.is_finite() {
        ends.push((w.hi, -1.0));
    }
    let mut out = Vec::new();
    for &c in c_sweep {
        'search: for &(e, dir) in &ends {
            for p in 2..=6 {
                let off = c.powi(-p);
                let x = e * (dir * off).exp();
                if !w.contains(x) {
                    continue;
                }
                let mu = match mu_at(g, x) {
                    Some(m) if m.is_finite() => m,
                    _ => continue,
                };
                if off * c * mu < 1.0 - 1e-9 {
                    out.push(Defect {
                        c,
                        x,
                        y: x * (-dir / (c * mu)).exp(),
                        kind: DefectKind::BallEscape,
                    });
                    break 'search;
                }
            }
        }
    }
    out
}

/// Checks Definition-1.8 directly at constant C over a grid: the ball must
/// stay inside the component and μ must not grow by more than a factor C
/// inside it. Returns the first defect found, if any.
pub fn check_definition_direct(
    g: &Expr,
    w: &Interval,
    c: f64,
    grid: &[f64],
    locus_pts: &[f64],
) -> Option<Defect> {
    for &x in grid {
        if !w.contains(x) {
            continue;
        }
        let mu_x = match mu_at(g, x) {
            Some(m) if m.is_finite() => m,
            _ => continue, // κ(f,x) = ∞ points are excluded by the definition
        };
        let rho = 1.0 / (c * mu_x);
        if w.lo > 0.0 && (x / w.lo).ln() < rho * (1.0 - 1e-9) {
            return Some(Defect { c, x, y: x * (-rho).exp(), kind: DefectKind::BallEscape });
        }
        if w.hi.is_finite() && (w.hi / x).ln() < rho * (1.0 - 1e-9) {
            return Some(Defect { c, x, y: x * rho.exp(), kind: DefectKind::BallEscape });
        }
        for &l in locus_pts {
            if (l / x).ln().abs() < rho * (1.0 - 1e-6) {
                return Some(Defect { c, x, y: l, kind: DefectKind::MuBlowup });
            }
        }
        for tau in [-0.95, -0.8, -0.6, -0.4, -0.2, 0.2, 0.4, 0.6, 0.8, 0.95] {
            let y = x * (rho * tau).exp();
            if let Some(mu_y) = mu_at(g, y) {
                if mu_y > c * mu_x * (1.0 + 1e-9) {
                    return Some(Defect { c, x, y, kind: DefectKind::MuBlowup });
                }
            }
        }
    }
    None
}

/// Candidate x's for the direct definition check: item-1 witnesses, the
/// ball-escape pattern near finite endpoints, low-κ critical points, and a
/// generic geometric grid.
fn witness_candidates(
    g: &Expr,
    w: &Interval,
    item1: &Item1Report,
    crits: &ZeroLocus,
    scan: &ScanPolicy,
) -> Vec<f64> {
    let mut out = Vec::new();
    for d in falsify_ball_escape(g, w, &C_SWEEP) {
        out.push(d.x);
    }
    out.extend(item1.witnesses.iter().copied());
    let crit_pts = crits.points();
    let step = (crit_pts.len() / 24).max(1);
    out.extend(crit_pts.iter().step_by(step).copied());
    let lo = w.lo.max(scan.min_abs);
    let hi = w.hi.min(scan.max_abs);
    if lo < hi {
        for j in 0..32 {
            let frac = (j as f64 + 0.5) / 32.0;
            out.push(lo * (hi / lo).powf(frac));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn check(src: &str, dom: &str) -> AmenabilityReport {
        check_amenability(
            &parse(src).unwrap(),
            &IntervalDomain::parse(dom).unwrap(),
            &ScanPolicy::coarse(),
        )
    }

    #[test]
    fn proposition_selection() {
        assert_eq!(select_proposition(&Interval::new(1.0, 2.0)).unwrap(), (PropositionId::AbBounded, false));
        assert_eq!(select_proposition(&Interval::new(0.0, f64::INFINITY)).unwrap(), (PropositionId::ZeroInf, false));
        assert_eq!(
            select_proposition(&Interval::new(-std::f64::consts::PI, -std::f64::consts::FRAC_PI_2)).unwrap(),
            (PropositionId::AbBounded, true)
        );
        assert_eq!(select_proposition(&Interval::new(0.0, 3.0)).unwrap(), (PropositionId::ZeroB, false));
        assert!(select_proposition(&Interval::new(-1.0, 1.0)).is_err());
    }

    #[test]
    fn exp_is_supported_on_the_line() {
        let r = check("exp(x)", "(-inf, inf)");
        assert_eq!(r.overall, Verdict::Supported);
        assert_eq!(r.components.len(), 2);
        assert!(r.components.iter().any(|c| c.reflected));
    }

    #[test]
    fn polynomial_is_supported() {
        let r = check("x^3 - 2*x + 1", "(-inf, inf)");
        assert_eq!(r.overall, Verdict::Supported, "{:#?}", summarize(&r));
    }

    #[test]
    fn tan_window_is_supported_without_shortcut() {
        let r = check("tan(x)", "(1.5707963267948966, 4.71238898038469)");
        assert_eq!(r.overall, Verdict::Supported, "{:#?}", summarize(&r));
        assert!(r.components[0].item2.shortcut_at.is_empty());
    }

    #[test]
    fn sin_on_pi_interval_uses_extension_shortcut() {
        let r = check("sin(x)", "(0, 3.141592653589793)");
        assert_eq!(r.overall, Verdict::Supported, "{:#?}", summarize(&r));
        assert_eq!(r.components[0].item2.shortcut_at.len(), 2);
    }

    #[test]
    fn sin_on_the_line_is_refuted_by_item1_witnesses() {
        let r = check("sin(x)", "(-inf, inf)");
        assert_eq!(r.overall, Verdict::Refuted, "{:#?}", summarize(&r));
        let pos = r.components.iter().find(|c| !c.reflected).unwrap();
        assert_eq!(pos.item1.verdict, ItemVerdict::Fail);
        // witnesses are near-critical points kπ + π/2: κ ≈ 0 there
        let w = pos.item1.witnesses[0];
        assert!(kappa_at(&parse("sin(x)").unwrap(), w).unwrap() < 1.0);
        assert_eq!(pos.defects.len(), C_SWEEP.len());
    }

    #[test]
    fn sqrt_shift_is_refuted_by_ball_escape() {
        let r = check("1 + sqrt(x - 1)", "(1, inf)");
        assert_eq!(r.overall, Verdict::Refuted, "{:#?}", summarize(&r));
        let c = &r.components[0];
        assert_eq!(c.item2.verdict, ItemVerdict::Fail);
        assert!(c.defects.iter().any(|d| d.kind == DefectKind::BallEscape && d.y < 1.0));
    }

    #[test]
    fn ball_escape_matches_the_closed_form() {
        // at x = 1 + 10^(-4) and C = 10 the escape radius wins
        let g = parse("1 + sqrt(x - 1)").unwrap();
        let w = Interval::new(1.0, f64::INFINITY);
        let defects = falsify_ball_escape(&g, &w, &[10.0]);
        assert_eq!(defects.len(), 1);
        assert!(defects[0].y < 1.0);
        // tan keeps its balls inside: κ blows up fast enough
        let tanw = Interval::new(1.5707963267948966, 4.71238898038469);
        assert!(falsify_ball_escape(&parse("tan(x)").unwrap(), &tanw, &C_SWEEP).is_empty());
    }

    #[test]
    fn sin_squared_plus_one_fails_item2_toward_infinity() {
        let r = check("sin(x)^2 + 1", "(1, inf)");
        assert_eq!(r.overall, Verdict::Refuted, "{:#?}", summarize(&r));
        assert_eq!(r.components[0].item2.verdict, ItemVerdict::Fail);
        assert_eq!(r.components[0].defects.len(), C_SWEEP.len());
    }

    #[test]
    fn sin_log_is_supported_with_the_known_h_bound() {
        let r = check("sin(log(x))", "(0, inf)");
        assert_eq!(r.overall, Verdict::Supported, "{:#?}", summarize(&r));
        let c = &r.components[0];
        assert_eq!(c.proposition, PropositionId::ZeroInf);
        let limsup = c.item2.limsup.unwrap();
        assert!((limsup - (1.0 + 2f64.sqrt()) / 2.0).abs() < 0.02, "limsup {limsup}");
    }

    #[test]
    fn bounded_kappa_restriction_is_refuted_by_ball_escape() {
        // κ stays bounded at both endpoints, so ball radii do not shrink
        // and every C admits an x whose ball leaves (0.5, 2)
        let r = check("exp(x)", "(0.5, 2)");
        assert_eq!(r.overall, Verdict::Refuted, "{:#?}", summarize(&r));
        assert_eq!(r.components[0].item1.verdict, ItemVerdict::Fail);
        assert!(r.components[0]
            .defects
            .iter()
            .all(|d| d.kind == DefectKind::BallEscape));
    }

    #[test]
    fn union_combines_conjunctively() {
        use Verdict::*;
        assert_eq!(combine_union(&[Supported, Supported]), Supported);
        assert_eq!(combine_union(&[Supported, Refuted]), Refuted);
        assert_eq!(combine_union(&[Supported, Inconclusive]), Inconclusive);
    }

    fn summarize(r: &AmenabilityReport) -> Vec<String> {
        r.components
            .iter()
            .map(|c| {
                format!(
                    "{} {:?} item1={:?} ({}) item2={:?} ({}) defects={}",
                    c.component,
                    c.overall,
                    c.item1.verdict,
                    c.item1.note,
                    c.item2.verdict,
                    c.item2.note,
                    c.defects.len()
                )
            })
            .collect()
    }
}
