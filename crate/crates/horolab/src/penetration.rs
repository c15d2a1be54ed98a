//! Penetration calculus for convex bodies in the half-space model: entry and
//! exit times of geodesics, the six penetration maps (chord length, height,
//! imaginary-part height, feet, boundary-projection and crossratio variants),
//! and a randomized checker for the registered coarse-geometry inequalities.

use std::f64::consts::LN_2;

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constants::{c0, c1_prime, c2_prime, c3_prime, c_dprime, h_prime, nu, Eps};
use crate::models::{
    busemann, crossratio, dist, dist_to_geodesic, geodesic_between, line_through_points,
    line_to_boundary, point_on_segment, project_to_geodesic, Boundary, Geodesic, Horoball,
    Moebius, Point, ProjInput, XReal,
};
use crate::{Error, Result};

/// A convex obstacle: a horoball, a metric ball, or a tube around a geodesic.
#[derive(Debug, Clone, Copy)]
pub enum ConvexBody {
    Horoball(Horoball),
    Ball { center: Point, radius: f64 },
    Tube { core: Geodesic, radius: f64 },
}

/// Which penetration map to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenKind {
    Length,
    Ph,
    Ipp,
    Ftp,
    Bp,
    Crp,
}

/// Where the pencil of geodesics is based: a boundary point (full geodesics
/// with `xi_minus` there) or an interior point (rays, parameter t >= 0).
#[derive(Debug, Clone, Copy)]
pub enum Source {
    Boundary(Boundary),
    Interior(Point),
}

/// Entry/exit parameters of a geodesic in a body plus the map value. For a
/// miss both times equal the closest-approach parameter.
#[derive(Debug, Clone, Copy)]
pub struct PenRecord {
    pub t_minus: XReal,
    pub t_plus: XReal,
    pub value: XReal,
}

/// Outcome of a randomized inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub violations: u64,
    pub worst_margin: f64,
    pub samples: u64,
}

fn beq(a: Boundary, b: Boundary) -> bool {
    match (a, b) {
        (Boundary::Inf, Boundary::Inf) => true,
        (Boundary::Finite(x), Boundary::Finite(y)) => x == y,
        _ => false,
    }
}

impl ConvexBody {
    pub fn contains(&self, p: Point) -> bool {
        match self {
            ConvexBody::Horoball(h) => h.contains(p),
            ConvexBody::Ball { center, radius } => dist(p, *center) <= *radius,
            ConvexBody::Tube { core, radius } => dist_to_geodesic(p, core) <= *radius,
        }
    }

    /// Whether a boundary point lies in the closure at infinity of the body.
    pub fn at_infinity(&self, b: Boundary) -> bool {
        match self {
            ConvexBody::Horoball(h) => beq(b, h.center),
            ConvexBody::Ball { .. } => false,
            ConvexBody::Tube { core, .. } => beq(b, core.xi_minus) || beq(b, core.xi_plus),
        }
    }

    /// The t-shrunk body (radius decreases by t; horoballs shrink inward).
    pub fn shrink(&self, t: f64) -> Result<ConvexBody> {
        match self {
            ConvexBody::Horoball(h) => Ok(ConvexBody::Horoball(h.shrink(t))),
            ConvexBody::Ball { center, radius } => {
                if radius - t <= 0.0 {
                    return Err(Error::Domain("shrunk ball radius must stay positive".into()));
                }
                Ok(ConvexBody::Ball { center: *center, radius: radius - t })
            }
            ConvexBody::Tube { core, radius } => {
                if radius - t <= 0.0 {
                    return Err(Error::Domain("shrunk tube radius must stay positive".into()));
                }
                Ok(ConvexBody::Tube { core: *core, radius: radius - t })
            }
        }
    }

    /// Entry and exit parameters of the full geodesic `g` in the body, or
    /// None on a miss. Horoballs and balls are solved in closed form; tubes
    /// by convexity of the distance along `g` (search plus bisection).
    pub fn entry_exit(&self, g: &Geodesic) -> Option<(XReal, XReal)> {
        match self {
            ConvexBody::Horoball(h) => horoball_interval(h, g),
            ConvexBody::Ball { center, radius } => ball_interval(*center, *radius, g),
            ConvexBody::Tube { core, radius } => tube_interval(core, *radius, g),
        }
    }

    /// Parameter of the closest approach of `g` to the body.
    pub fn nearest_param(&self, g: &Geodesic) -> f64 {
        match self {
            ConvexBody::Horoball(h) => {
                let (m, _) = cusp_frame(h);
                let gi = m.apply_geodesic(g);
                gi.param_of_projection(ProjInput::Boundary(Boundary::Inf)).unwrap_or(0.0)
            }
            ConvexBody::Ball { center, .. } => {
                g.param_of_projection(ProjInput::Interior(*center)).unwrap_or(0.0)
            }
            ConvexBody::Tube { core, .. } => {
                if beq(g.xi_minus, core.xi_minus)
                    || beq(g.xi_minus, core.xi_plus)
                    || beq(g.xi_plus, core.xi_minus)
                    || beq(g.xi_plus, core.xi_plus)
                {
                    return 0.0;
                }
                let f = |t: f64| dist_to_geodesic(g.point_at(t), core);
                golden_argmin(&f, -60.0, 60.0)
            }
        }
    }
}

/// Moebius map sending the horoball center to infinity, plus the height of
/// the image horosphere.
fn cusp_frame(h: &Horoball) -> (Moebius, f64) {
    match h.center {
        Boundary::Inf => (Moebius::identity(), h.param),
        Boundary::Finite(xi) => {
            let m = Moebius::new(
                Complex64::new(0.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(1.0, 0.0),
                -xi,
            );
            let hi = m.apply_horoball(h);
            (m, hi.param)
        }
    }
}

fn horoball_interval(h: &Horoball, g: &Geodesic) -> Option<(XReal, XReal)> {
    let (m, s) = cusp_frame(h);
    let gi = m.apply_geodesic(g);
    match (gi.xi_minus, gi.xi_plus) {
        // vertical toward the cusp: enters once, never leaves
        (Boundary::Finite(_), Boundary::Inf) => {
            let h0 = gi.anchor().h;
            Some((XReal::Finite((s / h0).ln()), XReal::PosInf))
        }
        (Boundary::Inf, Boundary::Finite(_)) => {
            let h0 = gi.anchor().h;
            Some((XReal::NegInf, XReal::Finite((h0 / s).ln())))
        }
        (Boundary::Finite(a), Boundary::Finite(b)) => {
            // arc apex height is half the endpoint gap; height s is crossed
            // at apex parameter +- arcosh(top/s)
            let top = (a - b).norm() / 2.0;
            if top <= s {
                return None;
            }
            let t_apex = gi.param_of_projection(ProjInput::Boundary(Boundary::Inf)).ok()?;
            let half = (top / s).acosh();
            Some((XReal::Finite(t_apex - half), XReal::Finite(t_apex + half)))
        }
        (Boundary::Inf, Boundary::Inf) => None,
    }
}

fn ball_interval(center: Point, r: f64, g: &Geodesic) -> Option<(XReal, XReal)> {
    let dp = dist_to_geodesic(center, g);
    if dp > r {
        return None;
    }
    let tp = g.param_of_projection(ProjInput::Interior(center)).ok()?;
    // hyperbolic Pythagoras: cosh d(g(t), c) = cosh(t - tp) cosh dp
    let half = (r.cosh() / dp.cosh()).max(1.0).acosh();
    Some((XReal::Finite(tp - half), XReal::Finite(tp + half)))
}

fn tube_interval(core: &Geodesic, r: f64, g: &Geodesic) -> Option<(XReal, XReal)> {
    let shares = |b: Boundary| beq(b, core.xi_minus) || beq(b, core.xi_plus);
    let sm = shares(g.xi_minus);
    let sp = shares(g.xi_plus);
    if sm && sp {
        return Some((XReal::NegInf, XReal::PosInf));
    }
    let f = |t: f64| dist_to_geodesic(g.point_at(t), core);
    if sm || sp {
        // asymptotic to the core on one side: walk that way until inside,
        // then locate the single crossing on the other side
        let dir_in = if sm { -1.0 } else { 1.0 };
        let mut t = 0.0;
        let mut step = 1.0;
        while f(t) > 0.5 * r {
            t += dir_in * step;
            step *= 2.0;
            if step > 1e6 {
                return None;
            }
        }
        let crossing = cross_out(&f, t, -dir_in, r);
        return Some(if sm { (XReal::NegInf, crossing) } else { (crossing, XReal::PosInf) });
    }
    let tmin = golden_argmin(&f, -60.0, 60.0);
    // tangency rule: a graze within 1e-10 of the radius counts as a miss
    if f(tmin) > r - 1e-10 {
        return None;
    }
    Some((cross_out(&f, tmin, -1.0, r), cross_out(&f, tmin, 1.0, r)))
}

/// Minimizer of a convex function by golden-section search.
fn golden_argmin(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - phi * (hi - lo);
    let mut d = lo + phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..120 {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// Level crossing f = r in direction `dir` starting from an inside point
/// (f(t_in) < r): doubling steps to bracket, then bisection to 1e-10.
fn cross_out(f: &dyn Fn(f64) -> f64, t_in: f64, dir: f64, r: f64) -> XReal {
    let mut inside = t_in;
    let mut step = 0.5;
    let mut outside;
    loop {
        let t = t_in + dir * step;
        if f(t) > r {
            outside = t;
            break;
        }
        inside = t;
        step *= 2.0;
        if step > 1e5 {
            return if dir > 0.0 { XReal::PosInf } else { XReal::NegInf };
        }
    }
    for _ in 0..80 {
        let mid = 0.5 * (inside + outside);
        if f(mid) > r {
            outside = mid;
        } else {
            inside = mid;
        }
        if (outside - inside).abs() < 1e-10 {
            break;
        }
    }
    XReal::Finite(0.5 * (inside + outside))
}

fn xsub(a: XReal, b: XReal) -> XReal {
    match (a, b) {
        (XReal::Finite(x), XReal::Finite(y)) => XReal::Finite(x - y),
        (XReal::PosInf, _) | (_, XReal::NegInf) => XReal::PosInf,
        (XReal::NegInf, _) | (_, XReal::PosInf) => XReal::NegInf,
    }
}

/// Distance from `x` to the geodesic, or to the forward ray when the pencil
/// is based at an interior point.
fn dist_to_path(x: Point, g: &Geodesic, ray: bool) -> f64 {
    if !ray {
        return dist_to_geodesic(x, g);
    }
    match g.param_of_projection(ProjInput::Interior(x)) {
        Ok(t) => dist(x, g.point_at(t.max(0.0))),
        Err(_) => dist(x, g.anchor()),
    }
}

/// Entry/exit record and penetration value of `g` in `body` for the given
/// map, with the source validated against the geodesic.
pub fn pen_record(g: &Geodesic, body: &ConvexBody, kind: PenKind, source: Source) -> Result<PenRecord> {
    match source {
        Source::Boundary(b) => {
            if !beq(g.xi_minus, b) {
                return Err(Error::Precondition("geodesic must start at the source".into()));
            }
            if body.at_infinity(b) {
                return Err(Error::Precondition("source lies at infinity of the body".into()));
            }
        }
        Source::Interior(p) => {
            if kind == PenKind::Crp {
                return Err(Error::Precondition("crp needs a boundary source".into()));
            }
            if dist(g.anchor(), p) > 1e-9 {
                return Err(Error::Precondition("ray must be anchored at the source".into()));
            }
            if body.contains(p) {
                return Err(Error::Precondition("interior source must lie outside the body".into()));
            }
        }
    }
    let interior = matches!(source, Source::Interior(_));
    let interval = match body.entry_exit(g) {
        Some((lo, hi)) if !interior => Some((lo, hi)),
        Some((lo, hi)) => {
            // restrict to the forward ray; the source is outside, so the
            // chord lies entirely on one side of t = 0
            if hi.to_f64() < 0.0 {
                None
            } else {
                let lo2 = match lo {
                    XReal::Finite(v) if v >= 0.0 => XReal::Finite(v),
                    _ => XReal::Finite(0.0),
                };
                Some((lo2, hi))
            }
        }
        None => None,
    };
    let (t_minus, t_plus) = match interval {
        Some(iv) => iv,
        None => {
            let mut t = body.nearest_param(g);
            if interior {
                t = t.max(0.0);
            }
            (XReal::Finite(t), XReal::Finite(t))
        }
    };
    let value = match (kind, body) {
        (PenKind::Length, _) => match interval {
            Some((lo, hi)) => xsub(hi, lo),
            None => XReal::Finite(0.0),
        },
        (PenKind::Ph, ConvexBody::Horoball(h)) => ph_horoball(g, h, interior)?,
        (PenKind::Ph, ConvexBody::Ball { center, radius }) => {
            XReal::Finite(2.0 * (radius - dist_to_path(*center, g, interior)).max(0.0))
        }
        (PenKind::Ipp, ConvexBody::Horoball(h)) => ipp_horoball(g, h, source)?,
        (PenKind::Ipp, ConvexBody::Ball { center, radius }) => {
            ipp_ball(g, *center, *radius, source)?
        }
        (PenKind::Ftp, ConvexBody::Tube { core, .. }) => ftp_core(g, core, source)?,
        (PenKind::Bp, _) => bp_body(g, body, source)?,
        (PenKind::Crp, ConvexBody::Tube { core, .. }) => crp_core(g, core, source)?,
        _ => {
            return Err(Error::Precondition(format!(
                "penetration map {kind:?} is not defined for this body"
            )))
        }
    };
    Ok(PenRecord { t_minus, t_plus, value })
}

/// Penetration value only.
pub fn penetration(g: &Geodesic, body: &ConvexBody, kind: PenKind, source: Source) -> Result<XReal> {
    Ok(pen_record(g, body, kind, source)?.value)
}

/// Height map: twice the supremum of the height above the horosphere along
/// the geodesic (or forward ray).
fn ph_horoball(g: &Geodesic, h: &Horoball, ray: bool) -> Result<XReal> {
    let (m, s) = cusp_frame(h);
    let gi = m.apply_geodesic(g);
    let top = match (gi.xi_minus, gi.xi_plus) {
        (_, Boundary::Inf) => return Ok(XReal::PosInf),
        (Boundary::Inf, Boundary::Finite(_)) => {
            if ray {
                // descending vertical: the sup over t >= 0 is at the anchor
                gi.anchor().h
            } else {
                return Ok(XReal::PosInf);
            }
        }
        (Boundary::Finite(a), Boundary::Finite(b)) => {
            if ray {
                let t_apex = gi.param_of_projection(ProjInput::Boundary(Boundary::Inf))?;
                if t_apex >= 0.0 {
                    gi.point_at(t_apex).h
                } else {
                    gi.anchor().h
                }
            } else {
                (a - b).norm() / 2.0
            }
        }
    };
    Ok(XReal::Finite(2.0 * (top / s).ln().max(0.0)))
}

/// Imaginary-part variant for horoballs: twice the height of the closest
/// point to gamma(+inf) on the source-to-center geodesic.
fn ipp_horoball(g: &Geodesic, h: &Horoball, source: Source) -> Result<XReal> {
    if beq(g.xi_plus, h.center) {
        return Ok(XReal::PosInf);
    }
    let p = match source {
        Source::Boundary(b) => {
            let line = geodesic_between(b, h.center)?;
            project_to_geodesic(ProjInput::Boundary(g.xi_plus), &line)?
        }
        Source::Interior(x0) => {
            let line = line_to_boundary(x0, h.center)?;
            let t = line.param_of_projection(ProjInput::Boundary(g.xi_plus))?.max(0.0);
            line.point_at(t)
        }
    };
    Ok(XReal::Finite(2.0 * h.height_above(p)))
}

/// Ball variant: the projection point is clamped to the segment/ray from the
/// source to the center (at the center the value saturates at 2r).
fn ipp_ball(g: &Geodesic, center: Point, r: f64, source: Source) -> Result<XReal> {
    let p = match source {
        Source::Boundary(b) => {
            let line = line_to_boundary(center, b)?;
            let t = line.param_of_projection(ProjInput::Boundary(g.xi_plus))?.max(0.0);
            line.point_at(t)
        }
        Source::Interior(x0) => {
            let line = line_through_points(center, x0)?;
            let t = line
                .param_of_projection(ProjInput::Boundary(g.xi_plus))?
                .clamp(0.0, dist(center, x0));
            line.point_at(t)
        }
    };
    Ok(XReal::Finite(2.0 * (r - dist(center, p)).max(0.0)))
}

/// Feet map: distance between the projections of the two ends onto the core.
fn ftp_core(g: &Geodesic, core: &Geodesic, source: Source) -> Result<XReal> {
    let p_minus = match source {
        Source::Boundary(b) => project_to_geodesic(ProjInput::Boundary(b), core)?,
        Source::Interior(x0) => project_to_geodesic(ProjInput::Interior(x0), core)?,
    };
    if beq(g.xi_plus, core.xi_minus) || beq(g.xi_plus, core.xi_plus) {
        return Ok(XReal::PosInf);
    }
    let p_plus = project_to_geodesic(ProjInput::Boundary(g.xi_plus), core)?;
    Ok(XReal::Finite(dist(p_minus, p_plus)))
}

/// Closest point of the body to a boundary point (None when the boundary
/// point lies at infinity of the body).
fn closest_to_boundary(body: &ConvexBody, xi: Boundary) -> Result<Option<Point>> {
    if body.at_infinity(xi) {
        return Ok(None);
    }
    match body {
        ConvexBody::Horoball(h) => {
            let line = geodesic_between(xi, h.center)?;
            let (lo, _) = horoball_interval(h, &line)
                .ok_or_else(|| Error::Domain("radial line must meet its horoball".into()))?;
            let t = lo
                .finite()
                .ok_or_else(|| Error::Domain("horoball entry from the boundary is finite".into()))?;
            Ok(Some(line.point_at(t)))
        }
        ConvexBody::Ball { center, radius } => {
            let line = line_to_boundary(*center, xi)?;
            Ok(Some(line.point_at(*radius)))
        }
        ConvexBody::Tube { core, radius } => {
            let pc = project_to_geodesic(ProjInput::Boundary(xi), core)?;
            let line = line_to_boundary(pc, xi)?;
            Ok(Some(line.point_at(*radius)))
        }
    }
}

/// Closest point of the body to an interior point.
fn closest_to_interior(body: &ConvexBody, x: Point) -> Result<Point> {
    if body.contains(x) {
        return Ok(x);
    }
    match body {
        ConvexBody::Horoball(h) => {
            let line = line_to_boundary(x, h.center)?;
            let (lo, _) = horoball_interval(h, &line)
                .ok_or_else(|| Error::Domain("radial line must meet its horoball".into()))?;
            let t = lo
                .finite()
                .ok_or_else(|| Error::Domain("horoball entry from outside is finite".into()))?;
            Ok(line.point_at(t))
        }
        ConvexBody::Ball { center, radius } => {
            let line = line_through_points(*center, x)?;
            Ok(line.point_at(*radius))
        }
        ConvexBody::Tube { core, radius } => {
            let pc = project_to_geodesic(ProjInput::Interior(x), core)?;
            let line = line_through_points(pc, x)?;
            Ok(line.point_at(*radius))
        }
    }
}

/// Boundary-projection map: distance between the closest points of the body
/// to the two ends of the geodesic.
fn bp_body(g: &Geodesic, body: &ConvexBody, source: Source) -> Result<XReal> {
    let q_minus = match source {
        Source::Boundary(b) => closest_to_boundary(body, b)?,
        Source::Interior(x0) => Some(closest_to_interior(body, x0)?),
    };
    let q_plus = closest_to_boundary(body, g.xi_plus)?;
    match (q_minus, q_plus) {
        (Some(a), Some(b)) => Ok(XReal::Finite(dist(a, b))),
        _ => Ok(XReal::PosInf),
    }
}

/// Crossratio map against the two ends of the core.
fn crp_core(g: &Geodesic, core: &Geodesic, source: Source) -> Result<XReal> {
    let xi0 = match source {
        Source::Boundary(b) => b,
        Source::Interior(_) => {
            return Err(Error::Precondition("crp needs a boundary source".into()))
        }
    };
    let (l1, l2) = (core.xi_minus, core.xi_plus);
    if beq(g.xi_plus, l1) || beq(g.xi_plus, l2) {
        return Ok(XReal::PosInf);
    }
    let x1 = crossratio(xi0, l1, g.xi_plus, l2)?;
    let x2 = crossratio(xi0, l2, g.xi_plus, l1)?;
    if matches!(x1, XReal::PosInf) || matches!(x2, XReal::PosInf) {
        return Ok(XReal::PosInf);
    }
    Ok(XReal::Finite(x1.to_f64().max(x2.to_f64()).max(0.0)))
}

// ---------------------------------------------------------------------------
// randomized inequality registry
// ---------------------------------------------------------------------------

/// The registered inequality identifiers.
pub fn lemma_ids() -> &'static [&'static str] {
    &[
        "L2.1", "L2.2", "L2.5", "L2.6", "L2.7", "L2.8", "L2.11", "L2.12", "L2.13", "L2.14",
        "L3.2", "L3.3", "L3.4", "L3.5", "L3.6", "L4.2",
    ]
}

/// One sampled instance: a list of (margin, bound) pairs where margin is
/// lhs - bound, so a violation is a decisively positive margin.
type Checks = Vec<(f64, f64)>;
type Gen = fn(&mut ChaCha8Rng) -> Option<Checks>;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-trial stream: counter-based so trials are independent of each other
/// and of the rejection history.
fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(trial.wrapping_add(0x51AB_C0DE))))
}

/// Runs `trials` random instances of a registered inequality. Hypotheses are
/// enforced by rejection (capped at 1e6 attempts per trial); a violation is a
/// margin above 1e-9 * (1 + |bound|).
pub fn check_inequality(lemma_id: &str, trials: u64, seed: u64) -> Result<CheckReport> {
    let id = lemma_id.replace('_', ".");
    let gen: Gen = match id.as_str() {
        "L2.1" => gen_l2_1,
        "L2.2" => gen_l2_2,
        "L2.5" => gen_l2_5,
        "L2.6" => gen_l2_6,
        "L2.7" => gen_l2_7,
        "L2.8" => gen_l2_8,
        "L2.11" => gen_l2_11,
        "L2.12" => gen_l2_12,
        "L2.13" => gen_l2_13,
        "L2.14" => gen_l2_14,
        "L3.2" => gen_l3_2,
        "L3.3" => gen_l3_3,
        "L3.4" => gen_l3_4,
        "L3.5" => gen_l3_5,
        "L3.6" => gen_l3_6,
        "L4.2" => gen_l4_2,
        _ => return Err(Error::UnknownLemma(lemma_id.into())),
    };
    let mut violations = 0u64;
    let mut worst = f64::NEG_INFINITY;
    let mut samples = 0u64;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let mut attempts = 0u64;
        let checks = loop {
            attempts += 1;
            samples += 1;
            if attempts > 1_000_000 {
                return Err(Error::SamplingCap(id));
            }
            if let Some(cs) = gen(&mut rng) {
                break cs;
            }
        };
        for (margin, bound) in checks {
            if margin > worst {
                worst = margin;
            }
            if margin > 1e-9 * (1.0 + bound.abs()) {
                violations += 1;
            }
        }
    }
    Ok(CheckReport { violations, worst_margin: worst, samples })
}

// --- samplers --------------------------------------------------------------

fn rc(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0))
}

fn rpt(rng: &mut ChaCha8Rng) -> Point {
    Point::new(rc(rng), rng.gen_range(-3.0..3.0f64).exp())
}

fn reps(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0.05f64.ln()..5.0f64.ln()).exp()
}

fn runit(rng: &mut ChaCha8Rng) -> Complex64 {
    let a = rng.gen_range(0.0..std::f64::consts::TAU);
    Complex64::new(a.cos(), a.sin())
}

fn rmoeb(rng: &mut ChaCha8Rng) -> Moebius {
    loop {
        let a = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let b = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let c = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let d = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        if (a * d - b * c).norm() > 0.1 {
            return Moebius::new(a, b, c, d);
        }
    }
}

fn bclose(a: Boundary, b: Boundary, tol: f64) -> bool {
    match (a, b) {
        (Boundary::Inf, Boundary::Inf) => true,
        (Boundary::Finite(x), Boundary::Finite(y)) => (x - y).norm() < tol,
        _ => false,
    }
}

/// Random point at distance U[0, rad] from `p` (exact by unit speed).
fn perturb(rng: &mut ChaCha8Rng, p: Point, rad: f64) -> Option<Point> {
    if rad <= f64::MIN_POSITIVE {
        return Some(p);
    }
    let target =
        Boundary::Finite(Complex64::new(rng.gen_range(-12.0..12.0), rng.gen_range(-12.0..12.0)));
    let g = line_to_boundary(p, target).ok()?;
    Some(g.point_at(rng.gen_range(0.0..rad)))
}

/// Full geodesic from the boundary source through an interior point.
fn from_through(xi0: Boundary, w: Point) -> Option<Geodesic> {
    let g1 = line_to_boundary(w, xi0).ok()?;
    geodesic_between(xi0, g1.xi_minus).ok()
}

/// Random point of the horoball at height-above-horosphere about `d`.
fn point_at_depth(rng: &mut ChaCha8Rng, h: &Horoball, d: f64) -> Point {
    match h.center {
        Boundary::Inf => Point::new(rc(rng), h.param * d.exp()),
        Boundary::Finite(xi) => {
            let cap = h.param * (-d).exp();
            let hh = cap * rng.gen_range(0.1..0.9);
            let rad = (cap * hh - hh * hh).max(0.0).sqrt() * rng.gen_range(0.0..0.95);
            Point::new(xi + runit(rng) * rad, hh)
        }
    }
}

fn rand_in_body(rng: &mut ChaCha8Rng, body: &ConvexBody) -> Option<Point> {
    match body {
        ConvexBody::Horoball(h) => {
            let d = rng.gen_range(0.05..1.8);
            Some(point_at_depth(rng, h, d))
        }
        ConvexBody::Ball { center, radius } => perturb(rng, *center, 0.95 * radius),
        ConvexBody::Tube { core, radius } => {
            let t = rng.gen_range(-6.0..6.0);
            perturb(rng, core.point_at(t), 0.9 * radius)
        }
    }
}

fn rand_core(rng: &mut ChaCha8Rng) -> Option<Geodesic> {
    for _ in 0..64 {
        let a = rc(rng);
        let b = rc(rng);
        if (a - b).norm() >= 1.0 {
            return geodesic_between(Boundary::Finite(a), Boundary::Finite(b)).ok();
        }
    }
    None
}

fn rand_horoball(rng: &mut ChaCha8Rng) -> Horoball {
    if rng.gen_bool(0.25) {
        Horoball::at_infinity(rng.gen_range(-2.0..1.0f64).exp())
    } else {
        Horoball::at(rc(rng), rng.gen_range(-2.0..1.0f64).exp())
    }
}

enum SegEnd {
    Pt(Point),
    Bnd(Boundary),
}

/// Distance from `x` to the segment/ray from `a` to the given end.
fn dist_to_segment(x: Point, a: Point, end: SegEnd) -> Option<f64> {
    match end {
        SegEnd::Bnd(w) => {
            let g = line_to_boundary(a, w).ok()?;
            let t = g.param_of_projection(ProjInput::Interior(x)).ok()?.max(0.0);
            Some(dist(x, g.point_at(t)))
        }
        SegEnd::Pt(q) => {
            let g = line_through_points(a, q).ok()?;
            let t = g.param_of_projection(ProjInput::Interior(x)).ok()?.clamp(0.0, dist(a, q));
            Some(dist(x, g.point_at(t)))
        }
    }
}

// --- generators ------------------------------------------------------------

/// Exponential closing: a point t deep along [x, z] is e^{-t} sinh d(x, y)
/// close to [y, z], itself at most e^{d(x,y)-t}/2.
fn gen_l2_1(rng: &mut ChaCha8Rng) -> Option<Checks> {
    let x = rpt(rng);
    let y = rpt(rng);
    let dxy = dist(x, y);
    let (t, dseg) = if rng.gen_bool(0.5) {
        let z = Boundary::Finite(rc(rng));
        let g = line_to_boundary(x, z).ok()?;
        let t = rng.gen_range(0.0..12.0);
        (t, dist_to_segment(g.point_at(t), y, SegEnd::Bnd(z))?)
    } else {
        let z = rpt(rng);
        let d = dist(x, z);
        if d < 1e-6 {
            return None;
        }
        let t = rng.gen_range(0.0..d);
        let g = line_through_points(x, z).ok()?;
        (t, dist_to_segment(g.point_at(t), y, SegEnd::Pt(z))?)
    };
    let b1 = (-t).exp() * dxy.sinh();
    let b2 = 0.5 * (dxy - t).exp();
    Some(vec![(dseg - b1, b1), (b1 - b2, b2)])
}

/// Midpoint stability: the midpoint of a long segment moves at most eps/2
/// when both endpoints move at most eps.
fn gen_l2_2(rng: &mut ChaCha8Rng) -> Option<Checks> {
    let eps = reps(rng);
    let e = Eps::Finite(eps);
    let a = rpt(rng);
    let w = Boundary::Finite(rc(rng));
    let g = line_to_boundary(a, w).ok()?;
    let len = c0(e) + rng.gen_range(0.0..5.0);
    let b = g.point_at(len);
    let ap = perturb(rng, a, eps)?;
    let bp = perturb(rng, b, eps)?;
    let m = g.point_at(0.5 * len);
    let dm = dist_to_segment(m, ap, SegEnd::Pt(bp))?;
    Some(vec![(dm - 0.5 * eps, 0.5 * eps)])
}

/// Tube entry points from a common source are c1'(eps)-close.
fn gen_l2_5(rng: &mut ChaCha8Rng) -> Option<Checks> {
    let core = rand_core(rng)?;
    let eps = reps(rng);
    let tube = ConvexBody::Tube { core, radius: eps };
    let (tw, twp) = (rng.gen_range(-6.0..6.0), rng.gen_range(-6.0..6.0));
    let w = perturb(rng, core.point_at(tw), 0.9 * eps)?;
    let wp = perturb(rng, core.point_at(twp), 0.9 * eps)?;
    let (g, gp, lo_min) = if rng.gen_bool(0.25) {
        let x0 = rpt(rng);
        if dist_to_geodesic(x0, &core) <= eps + 0.05 {
            return None;
        }
        (line_through_points(x0, w).ok()?, line_through_points(x0, wp).ok()?, 1e-6)
    } else {
        let xi0 = Boundary::Finite(rc(rng));
        if bclose(xi0, core.xi_minus, 0.3) || bclose(xi0, core.xi_plus, 0.3) {
            return None;
        }
        (from_through(xi0, w)?, from_through(xi0, wp)?, f64::NEG_INFINITY)
    };
    let tl = tube.entry_exit(&g)?.0.finite()?;
    let tl2 = tube.entry_exit(&gp)?.0.finite()?;
    if tl <= lo_min || tl2 <= lo_min {
        return None;
    }
    let bound = c1_prime(Eps::Finite(eps));
    Some(vec![(dist(g.point_at(tl), gp.point_at(tl2)) - bound, bound)])
}

/// Deep interior of a long near-tube chord: a point eta c''(eps) from the
/// nearer end is within eps - eta of the core.
fn gen_l2_6(rng: &mut ChaCha8Rng) -> Option<Checks> {
    let core = rand_core(rng)?;
    let eps = reps(rng);
    let e = Eps::Finite(eps);
    let ta = rng.gen_range(-6.0..6.0);
    let gap = c0(e) + 2.0 * eps + rng.gen_range(0.0..4.0);
    let a = perturb(rng, core.point_at(ta), eps)?;
    let b = perturb(rng, core.point_at(ta + gap), eps)?;
    let dab = dist(a, b);
    if dab < c0(e) {
        return None;
    }
    let gab = line_through_points(a, b).ok()?;
    let cdp = c_dprime(e);
    let smax = (0.5 * dab).min(0.5 * eps * cdp);
    let s = rng.gen_range(0.0..smax);
    let t = if rng.gen_bool(0.5) { s } else { dab - s };
    let a0 = gab.point_at(t);
    let eta = s / cdp;
    let bound = eps - eta;
    Some(vec![(dist_to_geodesic(a0, &core) - bound, bound)])
}

/// Long companion chord: entries are c2'(eps) d(x, gamma')-close.
fn gen_l2_7(rng: &mut ChaCha8Rng) -> Option<Checks> {
    let core = rand_core(rng)?;
    let eps = reps(rng);
    let e = Eps::Finite(eps);
    let tube = ConvexBody::Tube { core, radius: eps };
    let xi0 = Boundary::Finite(rc(rng));
    if bclose(xi0, core.xi_minus, 0.3) || bclose(xi0, core.xi_plus, 0.3) {
        return None;
    }
    let tw = rng.gen_range(-4.0..4.0);
    let w = perturb(rng, core.point_at(tw), 0.5 * eps)?;
    let g = from_through(xi0, w)?;
    let zb = g.xi_plus.finite()?;
    let za = xi0.finite().unwrap();
    let scale = (za - zb).norm();
    if scale < 1e-6 {
        return None;
    }
    let zbp = zb + runit(rng) * scale * (-rng.gen_range(1.0..9.0f64)).exp();
    if (zbp - za).norm() < 1e-9 {
        return None;
    }
    let gp = geodesic_between(xi0, Boundary::Finite(zbp)).ok()?;
    let (lo2, hi2) = tube.entry_exit(&gp)?;
    if xsub(hi2, lo2).to_f64() < c0(e) {
        return None;
    }
    let x = g.point_at(tube.entry_exit(&g)?.0.finite()?);
    let xp = gp.point_at(lo2.finite()?);
    let bound = c2_prime(e) * dist_to_geodesic(x, &gp);
    Some(vec![(dist(x, xp) - bound, bound)])
}

/// Long chord with a close exit: the companion exits c3'(eps)-proportionally
/// close, or penetrates deeper.
fn gen_l2_8(rng: &mut ChaCha8Rng) -> Option<Checks> {
    let core = rand_core(rng)?;
    let eps = reps(rng);
    let e = Eps::Finite(eps);
    let tube = ConvexBody::Tube { core, radius: eps };
    let lb = core.xi_plus.finite().unwrap();
    let la = core.xi_minus.finite().unwrap();
    let sep = (la - lb).norm();
    let xi0 = Boundary::Finite(rc(rng));
    if bclose(xi0, core.xi_minus, 0.3) || bclose(xi0, core.xi_plus, 0.3) {
        return None;
    }
    let za = xi0.finite().unwrap();
    let eta_pt = lb + runit(rng) * sep * (-rng.gen_range(8.0..15.0f64)).exp();
    let rho = (eta_pt - lb).norm();
    let eta2 = eta_pt + runit(rng) * rho * (-rng.gen_range(1.5..6.0f64)).exp();
    if (eta_pt - za).norm() < 1e-6 || (eta2 - za).norm() < 1e-6 {
        return None;
    }
    let g = geodesic_between(xi0, Boundary::Finite(eta_pt)).ok()?;
    let gp = geodesic_between(xi0, Boundary::Finite(eta2)).ok()?;
    let (lo, hi) = tube.entry_exit(&g)?;
    let (tx, ty) = (lo.finite()?, hi.finite()?);
    let y = g.point_at(ty);
    let etaval = dist_to_geodesic(y, &gp);
    if ty - tx < h_prime(e, etaval) {
        return None;
    }
    let bound = c3_prime(e) * etaval;
    let margin = match tube.entry_exit(&gp) {
        // the conclusion asserts the companion meets the tube with entry in X
        None => 1e3,
        Some((lo2, hi2)) => match (lo2.finite(), hi2) {
            (Some(t2), XReal::Finite(t2h)) => {
                let m1 = dist(y, gp.point_at(t2h)) - bound;
                let m2 = (ty - tx) - (t2h - t2);
                m1.min(m2)
            }
            // exit at infinity: the companion chord is longer than d(x, y)
            (Some(_), XReal::PosInf) => -1.0,
            _ => 1e3,
        },
    };
    Some(vec![(margin.max(-1e6), bound)])
}

/// Horoball entry points from a common source are 2 log(1 + sqrt 2)-close.
fn gen_l2_11(rng: &mut ChaCha8Rng) -> Option<Checks> {
    let h = rand_horoball(rng);
    let hb = ConvexBody::Horoball(h);
    let (dw, dwp) = (rng.gen_range(0.1..2.5), rng.gen_range(0.1..2.5));
    let w = point_at_depth(rng, &h, dw);
    let wp = point_at_depth(rng, &h, dwp);
    let (g, gp) = if rng.gen_bool(0.25) {
        let x0 = rpt(rng);
        if h.contains(x0) {
            return None;
        }
        (line_through_points(x0, w).ok()?, line_through_points(x0, wp).ok()?)
    } else {
        let xi0 = Boundary::Finite(rc(rng));
        if bclose(xi0, h.center, 0.05) {
            return None;
        }
        (from_through(xi0, w)?, from_through(xi0, wp)?)
    };
    let t1 = hb.entry_exit(&g)?.0.finite()?;
    let t2 = hb.entry_exit(&gp)?.0.finite()?;
    let bound = c1_prime(Eps::Infinity);
    Some(vec![(dist(g.point_at(t1), gp.point_at(t2)) - bound, bound)])
}

/// A point on a long horospherical chord sits 2/3 of its end-distance deep.
fn gen_l2_12(rng: &mut ChaCha8Rng) -> Option<Checks> {
    let s = rng.gen_range(-2.0..1.0f64).exp();
    let mut h = Horoball::at_infinity(s);
    let target = c0(Eps::Infinity) + rng.gen_range(0.0..6.0);
    let gapz = 2.0 * s * (0.5 * target).sinh();
    let za = rc(rng);
    let zb = za + runit(rng) * gapz;
    let mut a = Point::new(za, s);
    let mut b = Point::new(zb, s);
    if rng.gen_bool(0.5) {
        let m = rmoeb(rng);
        h = m.apply_horoball(&h);
        a = m.apply_point(a);
        b = m.apply_point(b);
    }
    let dab = dist(a, b);
    let t = rng.gen_range(0.0..dab);
    let a0 = point_on_segment(a, b, t).ok()?;
    let bound = (2.0 / 3.0) * t.min(dab - t);
    Some(vec![(bound - h.height_above(a0), bound)])
}

/// Long companion horoball chord: entries are 5/2 d(x, gamma')-close.
fn gen_l2_13(rng: &mut ChaCha8Rng) -> Option<Checks> {
    let h = rand_horoball(rng);
    let hb = ConvexBody::Horoball(h);
    let (dw, dwp) = (rng.gen_range(0.05..2.0), rng.gen_range(2.1..4.0));
    let w = point_at_depth(rng, &h, dw);
    let wp = point_at_depth(rng, &h, dwp);
    let interior = rng.gen_bool(0.25);
    let (g, gp) = if interior {
        let x0 = rpt(rng);
        if h.contains(x0) {
            return None;
        }
        (line_through_points(x0, w).ok()?, line_through_points(x0, wp).ok()?)
    } else {
        let xi0 = Boundary::Finite(rc(rng));
        if bclose(xi0, h.center, 0.05) {
            return None;
        }
        (from_through(xi0, w)?, from_through(xi0, wp)?)
    };
    let (lo2, hi2) = hb.entry_exit(&gp)?;
    if xsub(hi2, lo2).to_f64() < c0(Eps::Infinity) {
        return None;
    }
    let x = g.point_at(hb.entry_exit(&g)?.0.finite()?);
    let xp = gp.point_at(lo2.finite()?);
    let bound = 2.5 * dist_to_path(x, &gp, interior);
    Some(vec![(dist(x, xp) - bound, bound)])
}

/// Long horoball chord with a close exit: the companion meets the horoball
/// and exits 5/2-proportionally close.
fn gen_l2_14(rng: &mut ChaCha8Rng) -> Option<Checks> {
    let s = rng.gen_range(-3.0..0.0f64).exp();
    let hb = ConvexBody::Horoball(Horoball::at_infinity(s));
    let u = rng.gen_range(3.2..10.0f64);
    let gap = 2.0 * s * u.cosh();
    let za = rc(rng);
    let zb = za + runit(rng) * gap;
    let g = geodesic_between(Boundary::Finite(za), Boundary::Finite(zb)).ok()?;
    let zbp = zb + runit(rng) * gap * (-(u + rng.gen_range(1.0..7.0))).exp();
    let gp = geodesic_between(Boundary::Finite(za), Boundary::Finite(zbp)).ok()?;
    let (lo, hi) = hb.entry_exit(&g)?;
    let (tx, ty) = (lo.finite()?, hi.finite()?);
    let y = g.point_at(ty);
    let etaval = dist_to_geodesic(y, &gp);
    if ty - tx < h_prime(Eps::Infinity, etaval) {
        return None;
    }
    let bound = 2.5 * etaval;
    let margin = match hb.entry_exit(&gp) {
        Some((_, XReal::Finite(typ))) => dist(y, gp.point_at(typ)) - bound,
        _ => 1e3,
    };
    Some(vec![(margin.max(-1e6), bound)])
}

/// The boundary-projection map stays within 2 c1'(eps) of the chord length.
fn gen_l3_2(rng: &mut ChaCha8Rng) -> Option<Checks> {
    let (body, eps) = if rng.gen_bool(0.5) {
        let core = rand_core(rng)?;
        let eps = reps(rng);
        (ConvexBody::Tube { core, radius: eps }, eps)
    } else {
        let r = rng.gen_range(0.3..3.0);
        (ConvexBody::Ball { center: rpt(rng), radius: r }, r)
    };
    let xi0 = Boundary::Finite(rc(rng));
    if near_tube_ends(&body, xi0, 0.2) {
        return None;
    }
    let g = if rng.gen_bool(0.6) {
        let w = rand_in_body(rng, &body)?;
        from_through(xi0, w)?
    } else {
        let xp = Boundary::Finite(rc(rng));
        if bclose(xp, xi0, 1e-3) || near_tube_ends(&body, xp, 1e-3) {
            return None;
        }
        geodesic_between(xi0, xp).ok()?
    };
    let src = Source::Boundary(xi0);
    let ell = penetration(&g, &body, PenKind::Length, src).ok()?.finite()?;
    let bp = penetration(&g, &body, PenKind::Bp, src).ok()?.finite()?;
    let bound = 2.0 * c1_prime(Eps::Finite(eps));
    Some(vec![((ell - bp).abs() - bound, bound)])
}

/// Height and imaginary-part maps agree within 2 log(1 + sqrt 2); for
/// horoballs met by the geodesic (boundary pencil) they differ by exactly
/// 2 log 2.
fn gen_l3_3(rng: &mut ChaCha8Rng) -> Option<Checks> {
    let horoball = rng.gen_bool(0.5);
    let (body, center_b) = if horoball {
        let h = rand_horoball(rng);
        (ConvexBody::Horoball(h), Some(h.center))
    } else {
        (ConvexBody::Ball { center: rpt(rng), radius: rng.gen_range(0.3..3.0) }, None)
    };
    let interior = rng.gen_bool(0.25);
    let through = rng.gen_bool(0.6);
    let (g, src) = if interior {
        let x0 = rpt(rng);
        if body.contains(x0) {
            return None;
        }
        let g = if through {
            line_through_points(x0, rand_in_body(rng, &body)?).ok()?
        } else {
            line_to_boundary(x0, Boundary::Finite(rc(rng))).ok()?
        };
        (g, Source::Interior(x0))
    } else {
        let xi0 = Boundary::Finite(rc(rng));
        if let Some(cb) = center_b {
            if bclose(xi0, cb, 0.05) {
                return None;
            }
        }
        let g = if through {
            from_through(xi0, rand_in_body(rng, &body)?)?
        } else {
            let xp = Boundary::Finite(rc(rng));
            if bclose(xp, xi0, 1e-3) {
                return None;
            }
            geodesic_between(xi0, xp).ok()?
        };
        (g, Source::Boundary(xi0))
    };
    if let Some(cb) = center_b {
        if bclose(g.xi_plus, cb, 1e-3) {
            return None;
        }
    }
    let ph = penetration(&g, &body, PenKind::Ph, src).ok()?.finite()?;
    let ipp = penetration(&g, &body, PenKind::Ipp, src).ok()?.finite()?;
    let k = c1_prime(Eps::Infinity);
    let mut checks = vec![((ph - ipp).abs() - k, k)];
    if horoball && !interior && body.entry_exit(&g).is_some() {
        checks.push(((ipp - ph - 2.0 * LN_2).abs(), 0.0));
    }
    Some(checks)
}

/// Feet and boundary-projection maps on a tube agree within 2 eps.
fn gen_l3_4(rng: &mut ChaCha8Rng) -> Option<Checks> {
    let core = rand_core(rng)?;
    let eps = reps(rng);
    let body = ConvexBody::Tube { core, radius: eps };
    let xi0 = Boundary::Finite(rc(rng));
    if near_tube_ends(&body, xi0, 0.2) {
        return None;
    }
    let g = if rng.gen_bool(0.6) {
        from_through(xi0, rand_in_body(rng, &body)?)?
    } else {
        let xp = Boundary::Finite(rc(rng));
        if bclose(xp, xi0, 1e-3) || near_tube_ends(&body, xp, 1e-3) {
            return None;
        }
        geodesic_between(xi0, xp).ok()?
    };
    let src = Source::Boundary(xi0);
    let ftp = penetration(&g, &body, PenKind::Ftp, src).ok()?.finite()?;
    let bp = penetration(&g, &body, PenKind::Bp, src).ok()?.finite()?;
    let bound = 2.0 * eps;
    Some(vec![((ftp - bp).abs() - bound, bound)])
}

/// Crossratio versus the projection gap on the spanning geodesic.
fn gen_l3_5(rng: &mut ChaCha8Rng) -> Option<Checks> {
    let mut pts = [Boundary::Inf; 4];
    for p in pts.iter_mut() {
        *p = if rng.gen_bool(0.06) { Boundary::Inf } else { Boundary::Finite(rc(rng)) };
    }
    for i in 0..4 {
        for j in i + 1..4 {
            if bclose(pts[i], pts[j], 0.05) {
                return None;
            }
        }
    }
    let (a, b, cc, d) = (pts[0], pts[1], pts[2], pts[3]);
    let l = geodesic_between(b, d).ok()?;
    let tp = l.param_of_projection(ProjInput::Boundary(a)).ok()?;
    let tq = l.param_of_projection(ProjInput::Boundary(cc)).ok()?;
    let dpq = (tp - tq).abs();
    let cr = crossratio(a, b, cc, d).ok()?.finite()?;
    let k = c1_prime(Eps::Infinity);
    Some(if dpq >= k {
        if tq <= tp {
            vec![((cr - dpq).abs() - 2.0 * k, 2.0 * k)]
        } else {
            vec![(cr - k, k)]
        }
    } else {
        vec![(cr - 2.0 * k, 2.0 * k)]
    })
}

/// Crossratio and feet maps agree within 2 log(1 + sqrt 2) more.
fn gen_l3_6(rng: &mut ChaCha8Rng) -> Option<Checks> {
    let core = rand_core(rng)?;
    let eps = reps(rng);
    let body = ConvexBody::Tube { core, radius: eps };
    let xi0 = Boundary::Finite(rc(rng));
    if near_tube_ends(&body, xi0, 0.2) {
        return None;
    }
    let g = if rng.gen_bool(0.6) {
        from_through(xi0, rand_in_body(rng, &body)?)?
    } else {
        let xp = Boundary::Finite(rc(rng));
        if bclose(xp, xi0, 1e-3) || near_tube_ends(&body, xp, 1e-3) {
            return None;
        }
        geodesic_between(xi0, xp).ok()?
    };
    let src = Source::Boundary(xi0);
    let crp = penetration(&g, &body, PenKind::Crp, src).ok()?.finite()?;
    let ftp = penetration(&g, &body, PenKind::Ftp, src).ok()?.finite()?;
    let bound = 2.0 * c1_prime(Eps::Infinity);
    Some(vec![((crp - ftp).abs() - bound, bound)])
}

/// Synchronized fellow-traveling into a mu-shrunk ball/horoball: entries are
/// nu(mu)-close and the backward gap decays like nu(mu) e^{-s}.
fn gen_l4_2(rng: &mut ChaCha8Rng) -> Option<Checks> {
    let mu = LN_2 + rng.gen_range(0.0..2.5);
    let nu_mu = nu(mu);
    let (body, center_b) = if rng.gen_bool(0.4) {
        let r = mu + rng.gen_range(0.05..2.5);
        (ConvexBody::Ball { center: rpt(rng), radius: r }, None)
    } else {
        let h = rand_horoball(rng);
        (ConvexBody::Horoball(h), Some(h.center))
    };
    let inner = body.shrink(mu).ok()?;
    let w = rand_in_body(rng, &inner)?;
    let wp = rand_in_body(rng, &inner)?;
    let interior = rng.gen_bool(0.25);
    let (g, gp, xi0_b) = if interior {
        let x0 = rpt(rng);
        if body.contains(x0) {
            return None;
        }
        (line_through_points(x0, w).ok()?, line_through_points(x0, wp).ok()?, None)
    } else {
        let xi0 = Boundary::Finite(rc(rng));
        if let Some(cb) = center_b {
            if bclose(xi0, cb, 0.05) {
                return None;
            }
        }
        (from_through(xi0, w)?, from_through(xi0, wp)?, Some(xi0))
    };
    let tx = body.entry_exit(&g)?.0.finite()?;
    let txp = body.entry_exit(&gp)?.0.finite()?;
    let x = g.point_at(tx);
    let xp = gp.point_at(txp);
    // synchronize: same distance to the source as the entry point of g
    let t0 = match xi0_b {
        Some(xi0) => busemann(xi0, x, gp.anchor()),
        None => tx,
    };
    let mut checks = vec![(dist(x, xp) - nu_mu, nu_mu)];
    let smax = if interior { tx.min(9.0) } else { 9.0 };
    for _ in 0..3 {
        let s = rng.gen_range(0.0..smax.max(1e-9));
        let bound = nu_mu * (-s).exp();
        checks.push((dist(g.point_at(tx - s), gp.point_at(t0 - s)) - bound, bound));
    }
    Some(checks)
}

fn near_tube_ends(body: &ConvexBody, b: Boundary, tol: f64) -> bool {
    if let ConvexBody::Tube { core, .. } = body {
        bclose(b, core.xi_minus, tol) || bclose(b, core.xi_plus, tol)
    } else {
        false
    }
}
