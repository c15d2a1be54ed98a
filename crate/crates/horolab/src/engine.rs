//! Iterative geodesic construction: tangent-replacement avoidance of a
//! horoball family ("uncloud"), prescription of one penetration while all
//! others stay bounded, the two-sided variant, the running-bound recurrence,
//! and a continued-fraction digit constructor hitting a prescribed limsup.

use num_complex::Complex64;
use serde::Serialize;

use crate::constants::{self, Eps, ParamSet};
use crate::dioph::{self, CFExpansion};
use crate::models::{
    geodesic_between, line_through_points, line_to_boundary, Boundary, Geodesic, Horoball, Model,
    Point,
};
use crate::penetration::{pen_record, ConvexBody, PenKind, Source};
use crate::{Error, Result};

fn beq(a: Boundary, b: Boundary) -> bool {
    match (a, b) {
        (Boundary::Inf, Boundary::Inf) => true,
        (Boundary::Finite(x), Boundary::Finite(y)) => x == y,
        _ => false,
    }
}

// ---------------------------------------------------------------------------
// obstacle families
// ---------------------------------------------------------------------------

/// A finite family of convex obstacles whose pairwise intersections have
/// diameter at most `delta0`; one member may be designated as the body whose
/// penetration gets prescribed.
#[derive(Debug, Clone)]
pub struct ObstacleFamily {
    pub bodies: Vec<ConvexBody>,
    pub delta0: f64,
    pub designated_index: Option<usize>,
    /// how an infinite family was truncated to this finite one, if it was
    pub truncation_note: Option<String>,
}

/// Representative geodesics through the intersection of a pair of bodies:
/// the axis joining their centers plus a deterministic fan of perturbed
/// chords. The intersection diameter is estimated as the longest common
/// chord over these.
fn candidate_axes(a: &ConvexBody, b: &ConvexBody) -> Vec<Geodesic> {
    #[derive(Clone, Copy)]
    enum Anchor {
        B(Boundary),
        P(Point),
    }
    fn anchors(c: &ConvexBody) -> Vec<Anchor> {
        match c {
            ConvexBody::Horoball(h) => vec![Anchor::B(h.center)],
            ConvexBody::Ball { center, .. } => vec![Anchor::P(*center)],
            ConvexBody::Tube { core, .. } => {
                vec![Anchor::B(core.xi_minus), Anchor::B(core.xi_plus), Anchor::P(core.anchor())]
            }
        }
    }
    fn size(c: &ConvexBody) -> f64 {
        match c {
            ConvexBody::Horoball(h) => h.param,
            ConvexBody::Ball { radius, .. } | ConvexBody::Tube { radius, .. } => *radius,
        }
    }
    let mut out = Vec::new();
    let scale = 0.25 * size(a).min(size(b)).min(1.0);
    for pa in anchors(a) {
        for pb in anchors(b) {
            // axis plus horizontal perturbations of the first endpoint
            for k in -4i32..=4 {
                let off = Complex64::new(scale * k as f64 / 4.0, 0.0);
                let g = match (pa, pb) {
                    (Anchor::B(Boundary::Finite(x)), Anchor::B(y)) => {
                        geodesic_between(Boundary::Finite(x + off), y)
                    }
                    (Anchor::B(Boundary::Inf), Anchor::B(y)) => {
                        if k == 0 {
                            geodesic_between(Boundary::Inf, y)
                        } else {
                            continue;
                        }
                    }
                    (Anchor::B(x), Anchor::P(q)) => line_to_boundary(q, x).map(|g| {
                        let _ = off;
                        g
                    }),
                    (Anchor::P(p), Anchor::B(y)) => line_to_boundary(p, y),
                    (Anchor::P(p), Anchor::P(q)) => {
                        line_through_points(Point::new(p.z + off, p.h), q)
                    }
                };
                if let Ok(g) = g {
                    out.push(g);
                }
            }
        }
    }
    out
}

/// Length of the longest sampled common chord of `a` and `b` (zero when a
/// closed-form separation test applies).
pub fn pair_chord(a: &ConvexBody, b: &ConvexBody) -> Result<f64> {
    // exact separations for the horoball/horoball cases
    if let (ConvexBody::Horoball(x), ConvexBody::Horoball(y)) = (a, b) {
        match (x.center, y.center) {
            (Boundary::Inf, Boundary::Inf) => {
                return Err(Error::Family("two obstacles share the point at infinity".into()))
            }
            (Boundary::Finite(cx), Boundary::Finite(cy)) => {
                if cx == cy {
                    return Err(Error::Family("two obstacles share a boundary center".into()));
                }
                if (cx - cy).norm_sqr() >= x.param * y.param - 1e-15 {
                    return Ok(0.0);
                }
            }
            (Boundary::Inf, Boundary::Finite(_)) => {
                if y.param <= x.param + 1e-15 {
                    return Ok(0.0);
                }
            }
            (Boundary::Finite(_), Boundary::Inf) => {
                if x.param <= y.param + 1e-15 {
                    return Ok(0.0);
                }
            }
        }
    }
    let mut best = 0.0f64;
    for g in candidate_axes(a, b) {
        if let (Some((am, ap)), Some((bm, bp))) = (a.entry_exit(&g), b.entry_exit(&g)) {
            let lo = am.to_f64().max(bm.to_f64());
            let hi = ap.to_f64().min(bp.to_f64());
            if hi.is_finite() || lo.is_finite() {
                best = best.max(hi - lo);
            }
        }
    }
    Ok(best.max(0.0))
}

impl ObstacleFamily {
    pub fn new(
        bodies: Vec<ConvexBody>,
        delta0: f64,
        designated_index: Option<usize>,
    ) -> Result<Self> {
        if bodies.is_empty() {
            return Err(Error::Family("empty obstacle family".into()));
        }
        if delta0 < 0.0 {
            return Err(Error::Family("delta0 must be >= 0".into()));
        }
        if let Some(d) = designated_index {
            if d >= bodies.len() {
                return Err(Error::Family("designated index out of range".into()));
            }
        }
        let fam =
            ObstacleFamily { bodies, delta0, designated_index, truncation_note: None };
        fam.check_intersections()?;
        Ok(fam)
    }

    pub fn from_horoballs(
        horoballs: Vec<Horoball>,
        delta0: f64,
        designated_index: Option<usize>,
    ) -> Result<Self> {
        Self::new(horoballs.into_iter().map(ConvexBody::Horoball).collect(), delta0, designated_index)
    }

    /// Pairwise intersection diameters must stay below delta0 (tolerance
    /// 1e-8). All-horoball families are swept by foot coordinate; mixed
    /// families are checked quadratically.
    fn check_intersections(&self) -> Result<()> {
        let tol = self.delta0 + 1e-8;
        let all_horo = self.bodies.iter().all(|b| matches!(b, ConvexBody::Horoball(_)));
        if all_horo && self.bodies.len() > 256 {
            // indices of finite horoballs sorted by Re of the foot; two
            // finite horoballs with diameters <= D only meet within |dc| < D
            let mut fins: Vec<(f64, usize)> = Vec::new();
            let mut infs: Vec<usize> = Vec::new();
            let mut max_d = 0.0f64;
            for (i, b) in self.bodies.iter().enumerate() {
                if let ConvexBody::Horoball(h) = b {
                    match h.center {
                        Boundary::Finite(c) => {
                            fins.push((c.re, i));
                            max_d = max_d.max(h.param);
                        }
                        Boundary::Inf => infs.push(i),
                    }
                }
            }
            if infs.len() > 1 {
                return Err(Error::Family("two obstacles share the point at infinity".into()));
            }
            fins.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let window = max_d + 1e-6;
            for i in 0..fins.len() {
                for j in i + 1..fins.len() {
                    if fins[j].0 - fins[i].0 > window {
                        break;
                    }
                    self.pair_ok(fins[i].1, fins[j].1, tol)?;
                }
                for &k in &infs {
                    self.pair_ok(fins[i].1, k, tol)?;
                }
            }
            return Ok(());
        }
        for i in 0..self.bodies.len() {
            for j in i + 1..self.bodies.len() {
                self.pair_ok(i, j, tol)?;
            }
        }
        Ok(())
    }

    fn pair_ok(&self, i: usize, j: usize, tol: f64) -> Result<()> {
        let chord = pair_chord(&self.bodies[i], &self.bodies[j])?;
        if chord > tol {
            return Err(Error::Family(format!(
                "obstacles {i} and {j} overlap with chord {chord:.6} > delta0 tolerance {tol:.6}"
            )));
        }
        Ok(())
    }

    /// Parse bodies from a JSON array of objects
    /// `{"kind": "horoball"|"ball"|"tube", "center": [...]|"inf", "param": N}`.
    /// Horoball centers: "inf" or [x] or [x, y]; ball centers: [x, h] or
    /// [x, y, h]; tube cores: boundary endpoints [a, b] or [are, aim, bre, bim].
    pub fn from_json(text: &str, delta0: f64, designated_index: Option<usize>) -> Result<Self> {
        #[derive(serde::Deserialize)]
        struct Raw {
            kind: String,
            center: serde_json::Value,
            param: f64,
        }
        let raw: Vec<Raw> = serde_json::from_str(text)
            .map_err(|e| Error::Family(format!("obstacle JSON: {e}")))?;
        let mut bodies = Vec::with_capacity(raw.len());
        for (i, r) in raw.iter().enumerate() {
            let nums: Option<Vec<f64>> = r.center.as_array().map(|a| {
                a.iter().filter_map(|v| v.as_f64()).collect()
            });
            let body = match (r.kind.as_str(), &nums) {
                ("horoball", _) if r.center.as_str() == Some("inf") => {
                    ConvexBody::Horoball(Horoball::at_infinity(r.param))
                }
                ("horoball", Some(v)) if v.len() == 1 => {
                    ConvexBody::Horoball(Horoball::at(Complex64::new(v[0], 0.0), r.param))
                }
                ("horoball", Some(v)) if v.len() == 2 => {
                    ConvexBody::Horoball(Horoball::at(Complex64::new(v[0], v[1]), r.param))
                }
                ("ball", Some(v)) if v.len() == 2 => ConvexBody::Ball {
                    center: Point::new(Complex64::new(v[0], 0.0), v[1]),
                    radius: r.param,
                },
                ("ball", Some(v)) if v.len() == 3 => ConvexBody::Ball {
                    center: Point::new(Complex64::new(v[0], v[1]), v[2]),
                    radius: r.param,
                },
                ("tube", Some(v)) if v.len() == 2 => ConvexBody::Tube {
                    core: geodesic_between(Boundary::real(v[0]), Boundary::real(v[1]))?,
                    radius: r.param,
                },
                ("tube", Some(v)) if v.len() == 4 => ConvexBody::Tube {
                    core: geodesic_between(
                        Boundary::Finite(Complex64::new(v[0], v[1])),
                        Boundary::Finite(Complex64::new(v[2], v[3])),
                    )?,
                    radius: r.param,
                },
                _ => {
                    return Err(Error::Family(format!(
                        "obstacle {i}: unsupported kind/center shape"
                    )))
                }
            };
            bodies.push(body);
        }
        Self::new(bodies, delta0, designated_index)
    }

    /// The Ford family of a Euclidean ring plus the unit-height horoball at
    /// infinity, designated; tangent spheres, so delta0 = 0.
    pub fn ford(q_bound: u32, ring: dioph::Ring) -> Result<Self> {
        let ford = dioph::ford_family(q_bound, ring)?;
        let mut fam = Self::from_horoballs(ford.bodies, 0.0, Some(0))?;
        fam.truncation_note = Some(format!(
            "Ford family truncated to denominators |q| <= {q_bound} inside the sampling window"
        ));
        Ok(fam)
    }
}

// ---------------------------------------------------------------------------
// traces and reports
// ---------------------------------------------------------------------------

/// One verification row: a measured quantity against its bound.
#[derive(Debug, Clone, Serialize)]
pub struct ReportRow {
    pub obstacle_index: usize,
    pub t_entry: f64,
    pub value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// One replacement step of an iterative construction.
#[derive(Debug, Clone, Copy)]
pub struct TraceStep {
    pub k: usize,
    pub obstacle_index: usize,
    pub t_entry: f64,
    pub endpoint: Boundary,
}

/// Full record of an iterative construction: the replacement steps, every
/// intermediate ray (rays[0] is the initial one), and the verification rows
/// for the final geodesic.
#[derive(Debug, Clone)]
pub struct ConstructionTrace {
    pub steps: Vec<TraceStep>,
    pub rays: Vec<Geodesic>,
    pub final_geodesic: Geodesic,
    pub report: Vec<ReportRow>,
    pub warnings: Vec<String>,
    pub converged: bool,
}

// ---------------------------------------------------------------------------
// uncloud: tangent-replacement avoidance
// ---------------------------------------------------------------------------

/// Geodesic ray from the source to a finite boundary foot, parameterized
/// with t = 0 at the source (interior case) or at height 1 (source at
/// infinity, a shift common to all rays of the pencil).
fn ray_to(source: Source, w: f64) -> Result<Geodesic> {
    match source {
        Source::Interior(p) => line_to_boundary(p, Boundary::real(w)),
        Source::Boundary(Boundary::Inf) => geodesic_between(Boundary::Inf, Boundary::real(w)),
        Source::Boundary(_) => Err(Error::Precondition(
            "finite boundary sources are not supported by the avoidance iteration".into(),
        )),
    }
}

/// Whether the forward ray enters the interior of the body (chord of
/// positive length ahead of the source).
fn ray_enters(source: Source, g: &Geodesic, body: &ConvexBody) -> bool {
    match body.entry_exit(g) {
        None => false,
        Some((lo, hi)) => {
            let cut = match source {
                Source::Interior(_) => 0.0,
                _ => f64::NEG_INFINITY,
            };
            hi.to_f64() - lo.to_f64().max(cut) > 1e-12
        }
    }
}

/// Replace the ray through `w_base` by the tangent ray to `body` whose foot
/// is nearest to `w_base` on the boundary line. Brackets the enter/miss
/// transition on both sides by doubling steps and bisects it.
fn tangent_ray(source: Source, body: &ConvexBody, w_base: f64) -> Result<(Geodesic, f64)> {
    let enters = |w: f64| -> bool {
        ray_to(source, w).map(|g| ray_enters(source, &g, body)).unwrap_or(false)
    };
    let base_state = enters(w_base);
    let mut candidates: Vec<f64> = Vec::new();
    for side in [1.0f64, -1.0] {
        let mut prev = w_base;
        let mut prev_state = base_state;
        let mut step = 0.01;
        for _ in 0..55 {
            let w = w_base + side * step;
            let st = enters(w);
            if st != prev_state {
                // bisect toward the non-entering side of the bracket
                let (mut win, mut wout) = if prev_state { (prev, w) } else { (w, prev) };
                for _ in 0..200 {
                    let mid = 0.5 * (win + wout);
                    if enters(mid) {
                        win = mid;
                    } else {
                        wout = mid;
                    }
                }
                candidates.push(wout);
                break;
            }
            prev = w;
            prev_state = st;
            step *= 2.0;
        }
    }
    // keep only tangents on the entering side of the pencil: from a missing
    // base the first transition is miss -> enter and the bisection already
    // lands on the miss side of a genuine tangency for both orientations
    if candidates.is_empty() {
        return Err(Error::Step("no tangent ray found while replacing the current ray".into()));
    }
    candidates.sort_by(|a, b| {
        let da = (a - w_base).abs();
        let db = (b - w_base).abs();
        da.partial_cmp(&db).unwrap().then(b.partial_cmp(a).unwrap())
    });
    let w = candidates[0];
    Ok((ray_to(source, w)?, w))
}

/// Iteratively replace a geodesic ray by tangent rays until it avoids the
/// mu1-shrunk obstacles up to the horizon. The source is an interior point
/// outside every obstacle or the point at infinity of a designated horoball.
pub fn uncloud(
    fam: &ObstacleFamily,
    source: Source,
    mu1: f64,
    horizon: f64,
    max_iter: usize,
) -> Result<ConstructionTrace> {
    let (_mu2, _mu3, _mu4, mu5) = constants::mu_chain(mu1)?;
    let mut warnings: Vec<String> = Vec::new();

    // planar model only: all feet and the source on the real axis
    let planar_ok = fam.bodies.iter().all(|b| match b {
        ConvexBody::Horoball(h) => match h.center {
            Boundary::Inf => true,
            Boundary::Finite(c) => c.im.abs() < 1e-12,
        },
        _ => false,
    });
    if !planar_ok {
        return Err(Error::Precondition(
            "the avoidance iteration runs over horoball families in the half-plane model".into(),
        ));
    }

    // skip bodies whose closure at infinity contains the source
    let mut skip = vec![false; fam.bodies.len()];
    match source {
        Source::Interior(p) => {
            if p.z.im.abs() > 1e-12 {
                return Err(Error::Precondition("interior source must lie in the half-plane".into()));
            }
            for b in &fam.bodies {
                if b.contains(p) {
                    return Err(Error::Precondition(
                        "interior source must lie outside every obstacle".into(),
                    ));
                }
            }
        }
        Source::Boundary(Boundary::Inf) => {
            for (i, b) in fam.bodies.iter().enumerate() {
                if b.at_infinity(Boundary::Inf) {
                    skip[i] = true;
                }
            }
            if !skip.iter().any(|&s| s) {
                return Err(Error::Precondition(
                    "a source at infinity must be the ideal point of some obstacle".into(),
                ));
            }
        }
        Source::Boundary(_) => {
            return Err(Error::Precondition(
                "finite boundary sources are not supported by the avoidance iteration".into(),
            ));
        }
    }

    let shrunk: Vec<ConvexBody> = fam
        .bodies
        .iter()
        .map(|b| b.shrink(mu1))
        .collect::<Result<_>>()
        .map_err(|_| Error::Precondition("every obstacle must survive the mu1 shrinking".into()))?;

    // time origin: the source (interior) or the exit from the cusp horoball
    // (source at infinity); for vertical rays anchored at height 1 the exit
    // time is the same for every ray of the pencil
    let mut ray = match source {
        Source::Interior(p) => line_to_boundary(p, Boundary::Inf)?,
        _ => ray_to(source, 0.0)?,
    };
    let t_shift = match source {
        Source::Interior(_) => 0.0,
        _ => {
            let i = skip.iter().position(|&s| s).unwrap();
            fam.bodies[i].entry_exit(&ray).map(|(_, hi)| hi.to_f64()).unwrap_or(0.0)
        }
    };

    let mut steps: Vec<TraceStep> = Vec::new();
    let mut rays: Vec<Geodesic> = vec![ray];
    let mut t_prev = t_shift;
    let mut converged = false;

    for k in 1..=max_iter {
        // first mu1-shrunk obstacle entered strictly after the previous
        // tangency, within the horizon
        let cut = match source {
            Source::Interior(_) => 0.0,
            _ => f64::NEG_INFINITY,
        };
        let mut first: Option<(usize, f64)> = None;
        for (i, s) in shrunk.iter().enumerate() {
            if skip[i] {
                continue;
            }
            if let Some((lo, hi)) = s.entry_exit(&ray) {
                let lo_f = lo.to_f64();
                if hi.to_f64() - lo_f.max(cut) <= 1e-9 {
                    continue;
                }
                if lo_f > t_prev + 1e-9 && lo_f - t_shift < horizon {
                    if first.map_or(true, |(_, t)| lo_f < t) {
                        first = Some((i, lo_f));
                    }
                }
            }
        }
        let (idx, _) = match first {
            None => {
                converged = true;
                break;
            }
            Some(f) => f,
        };
        let w_base = match ray.xi_plus {
            Boundary::Finite(c) => c.re,
            Boundary::Inf => match source {
                Source::Interior(p) => p.z.re,
                _ => 0.0,
            },
        };
        let (new_ray, w) = tangent_ray(source, &shrunk[idx], w_base)?;
        let t_entry = match fam.bodies[idx].entry_exit(&new_ray) {
            Some((lo, _)) => lo.to_f64(),
            None => {
                return Err(Error::Step(format!(
                    "tangent ray no longer meets obstacle {idx}"
                )))
            }
        };
        steps.push(TraceStep {
            k,
            obstacle_index: idx,
            t_entry: t_entry - t_shift,
            endpoint: Boundary::real(w),
        });
        ray = new_ray;
        rays.push(ray);
        t_prev = t_entry;
    }
    if !converged {
        warnings.push(format!("iteration cap {max_iter} reached before the horizon"));
    }

    // the final ray must avoid every (mu5 - 1e-6)-shrunk obstacle up to the
    // horizon
    let margin = mu5 - 1e-6;
    let mut report = Vec::new();
    let win_lo = match source {
        Source::Interior(_) => 0.0,
        _ => t_shift,
    };
    for (i, b) in fam.bodies.iter().enumerate() {
        if skip[i] {
            continue;
        }
        let shr = match b.shrink(margin) {
            Ok(s) => s,
            Err(_) => {
                warnings.push(format!("obstacle {i} vanishes under the mu5 margin"));
                continue;
            }
        };
        if let Some((lo, hi)) = shr.entry_exit(&ray) {
            let lo_f = lo.to_f64().max(win_lo);
            let hi_f = hi.to_f64().min(horizon + t_shift);
            let chord = hi_f - lo_f;
            if chord > 0.0 {
                let pass = chord <= 1e-9;
                report.push(ReportRow {
                    obstacle_index: i,
                    t_entry: lo_f - t_shift,
                    value: chord,
                    bound: 1e-9,
                    pass,
                });
            }
        }
    }
    let all_pass = report.iter().all(|r| r.pass);
    Ok(ConstructionTrace {
        steps,
        rays,
        final_geodesic: ray,
        report,
        warnings,
        converged: converged && all_pass,
    })
}

// ---------------------------------------------------------------------------
// local prescription: move one endpoint along the level set of f0
// ---------------------------------------------------------------------------

/// Outcome of a single prescription move.
#[derive(Debug, Clone)]
pub struct LocalOutcome {
    pub geodesic: Geodesic,
    pub endpoint: Boundary,
    pub f0_residual: f64,
    pub ell_residual: f64,
    pub warnings: Vec<String>,
    /// sampled (theta, length) pairs from the grid scan
    pub grid: Vec<(f64, f64)>,
}

fn pen_value(g: &Geodesic, body: &ConvexBody, kind: PenKind, source: Source) -> Result<f64> {
    Ok(pen_record(g, body, kind, source)?.value.to_f64())
}

fn convexity(b: &ConvexBody) -> Eps {
    match b {
        ConvexBody::Horoball(_) => Eps::Infinity,
        ConvexBody::Ball { radius, .. } | ConvexBody::Tube { radius, .. } => Eps::Finite(*radius),
    }
}

fn eps_min(a: Eps, b: Eps) -> Eps {
    match (a, b) {
        (Eps::Infinity, x) | (x, Eps::Infinity) => x,
        (Eps::Finite(x), Eps::Finite(y)) => Eps::Finite(x.min(y)),
    }
}

/// Sup-norm distance from f0 to the reference map of its threshold case
/// (height map for horoballs/balls, tangency-point map for tubes).
fn kappa_of(f0: PenKind) -> f64 {
    match f0 {
        PenKind::Ph | PenKind::Ftp => 0.0,
        PenKind::Ipp => 2.0 * (1.0 + std::f64::consts::SQRT_2).ln(),
        _ => 0.0,
    }
}

/// Hypothesis windows for the single-step prescription, reported as
/// warnings rather than enforced.
fn threshold_warnings(
    c0: &ConvexBody,
    f0: PenKind,
    cn: &ConvexBody,
    h: f64,
    target: f64,
    delta: f64,
) -> Vec<String> {
    let mut w = Vec::new();
    let eps = eps_min(convexity(c0), convexity(cn));
    let c1p = constants::c1_prime(eps);
    let kf = kappa_of(f0);
    let (hmin, hmax, h0min) = match c0 {
        ConvexBody::Horoball(_) => (2.0 * c1p + 2.0 * delta + kf, f64::INFINITY, 2.0 * delta),
        ConvexBody::Ball { radius, .. } => (
            2.0 * c1p + 2.0 * delta + kf,
            2.0 * radius - 2.0 * c1p - kf,
            2.0 * delta,
        ),
        ConvexBody::Tube { radius, .. } => {
            (4.0 * c1p + 2.0 * radius + delta + kf, f64::INFINITY, delta)
        }
    };
    if h < hmin - 1e-12 {
        w.push(format!(
            "prescription level h = {h:.6} below the guaranteed window start {hmin:.6}"
        ));
    }
    if h > hmax + 1e-12 {
        w.push(format!(
            "prescription level h = {h:.6} above the guaranteed window end {hmax:.6}"
        ));
    }
    if target < h0min - 1e-12 {
        w.push(format!(
            "reset target {target:.6} below the guaranteed floor {h0min:.6}"
        ));
    }
    w
}

/// Distance from the source foot to the moving endpoint on the level set
/// f0 = h, as a function of the direction theta. Solved in closed form for
/// the height map on a horoball at infinity, otherwise by a radial bracket
/// and bisection.
fn level_radius(
    c0: &ConvexBody,
    f0: PenKind,
    h: f64,
    x0: Complex64,
    theta: f64,
) -> Result<f64> {
    if let ConvexBody::Horoball(hb) = c0 {
        if matches!(hb.center, Boundary::Inf) {
            // apex height of the half-circle from x0 to w is |w - x0| / 2,
            // so the height map equals 2 log(|w - x0| / (2 s))
            match f0 {
                PenKind::Ph => return Ok(2.0 * hb.param * (h / 2.0).exp()),
                // meets-case identity: ipp = ph + 2 log 2
                PenKind::Ipp => return Ok(hb.param * (h / 2.0).exp()),
                _ => {}
            }
        }
    }
    let xi0 = Boundary::Finite(x0);
    let eval = |r: f64| -> Option<f64> {
        let w = Boundary::Finite(x0 + Complex64::from_polar(r, theta));
        let g = geodesic_between(xi0, w).ok()?;
        let v = pen_value(&g, c0, f0, Source::Boundary(xi0)).ok()?;
        v.is_finite().then_some(v)
    };
    let mut bracket: Option<(f64, f64)> = None;
    let mut prev: Option<(f64, f64)> = None;
    for k in 0..=96 {
        let r = 1e-6 * (1e12f64).powf(k as f64 / 96.0);
        if let Some(v) = eval(r) {
            if let Some((rp, vp)) = prev {
                if (vp - h) * (v - h) <= 0.0 {
                    bracket = Some((rp, r));
                    break;
                }
            }
            prev = Some((r, v));
        }
    }
    let (mut lo, mut hi) = bracket.ok_or_else(|| {
        Error::Infeasible("no radius attains the requested penetration level".into())
    })?;
    let flo = eval(lo).unwrap_or(f64::NAN);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        match eval(mid) {
            Some(v) if (flo - h) * (v - h) <= 0.0 => hi = mid,
            _ => lo = mid,
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Move the far endpoint of `current` along the level set f0(C0) = h until
/// the penetration length of `cn` equals `target` (72-direction grid scan
/// plus bisection to 1e-8). The planar model exposes only two level points;
/// the move succeeds only if one of them already satisfies the contract.
pub fn local_prescribe(
    model: Model,
    c0: &ConvexBody,
    f0: PenKind,
    h: f64,
    cn: &ConvexBody,
    target: f64,
    delta: f64,
    xi0: Boundary,
    current: &Geodesic,
) -> Result<LocalOutcome> {
    let x0 = xi0
        .finite()
        .ok_or_else(|| Error::Precondition("prescription source must be a finite boundary point".into()))?;
    if !beq(current.xi_minus, xi0) {
        return Err(Error::Precondition("current geodesic must start at the source".into()));
    }
    let src = Source::Boundary(xi0);
    let f0v = pen_value(current, c0, f0, src)?;
    if (f0v - h).abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "current geodesic has f0 = {f0v:.10}, expected h = {h:.10}"
        )));
    }
    let ell0 = pen_value(current, cn, PenKind::Length, src)?;
    if ell0 < target - 1e-8 {
        return Err(Error::Precondition(format!(
            "current penetration {ell0:.10} already below the target {target:.10}"
        )));
    }
    let mut warnings = threshold_warnings(c0, f0, cn, h, target, delta);
    if model == Model::H2 {
        warnings.push(
            "planar model: the level set degenerates to two points, outside the hypotheses \
             of the intermediate-value mechanism (stated for dimension >= 3)"
                .into(),
        );
    }

    let make = |theta: f64| -> Result<(Geodesic, Complex64)> {
        let r = level_radius(c0, f0, h, x0, theta)?;
        let w = x0 + Complex64::from_polar(r, theta);
        Ok((geodesic_between(xi0, Boundary::Finite(w))?, w))
    };
    let ell_at = |theta: f64| -> Result<f64> {
        let (g, _) = make(theta)?;
        pen_value(&g, cn, PenKind::Length, src)
    };
    let finish = |theta: f64, grid: Vec<(f64, f64)>, mut warnings: Vec<String>| -> Result<LocalOutcome> {
        let (g, w) = make(theta)?;
        let f0_res = (pen_value(&g, c0, f0, src)? - h).abs();
        let ell_res = (pen_value(&g, cn, PenKind::Length, src)? - target).abs();
        // the designated body should still be met first along the geodesic
        let t0 = pen_record(&g, c0, PenKind::Length, src)?.t_minus.to_f64();
        let tn = pen_record(&g, cn, PenKind::Length, src)?.t_minus.to_f64();
        if tn < t0 - 1e-9 {
            warnings.push("moved geodesic meets the constrained obstacle before the designated one".into());
        }
        Ok(LocalOutcome {
            geodesic: g,
            endpoint: Boundary::Finite(w),
            f0_residual: f0_res,
            ell_residual: ell_res,
            warnings,
            grid,
        })
    };

    let wc = current
        .xi_plus
        .finite()
        .ok_or_else(|| Error::Precondition("current geodesic must have a finite far endpoint".into()))?;
    let theta_cur = (wc - x0).arg();

    if model == Model::H2 {
        let mut grid = Vec::new();
        for theta in [theta_cur, theta_cur + std::f64::consts::PI] {
            let ell = ell_at(theta)?;
            grid.push((theta, ell));
            if (ell - target).abs() <= 1e-8 {
                return finish(theta, grid, warnings);
            }
        }
        return Err(Error::Infeasible(format!(
            "planar level set misses the target: sampled lengths {:?}",
            grid.iter().map(|g| g.1).collect::<Vec<_>>()
        )));
    }

    if (ell0 - target).abs() <= 1e-8 {
        return finish(theta_cur, Vec::new(), warnings);
    }

    // 72-direction scan outward from the current direction
    let step = 2.0 * std::f64::consts::PI / 72.0;
    let mut grid = Vec::with_capacity(72);
    grid.push((theta_cur, ell0));
    let mut hit: Option<f64> = None;
    'scan: for j in 1..=36 {
        for sgn in [1.0f64, -1.0] {
            if j == 36 && sgn < 0.0 {
                continue;
            }
            let theta = theta_cur + sgn * j as f64 * step;
            let ell = ell_at(theta)?;
            grid.push((theta, ell));
            if ell <= target {
                hit = Some(theta);
                break 'scan;
            }
        }
    }
    let theta_hit = hit.ok_or_else(|| {
        let min = grid.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
        Error::Infeasible(format!(
            "no direction on the 72-point level-set grid reaches the target {target:.6} \
             (grid minimum {min:.6})"
        ))
    })?;
    let (mut lo, mut hi) = (theta_cur, theta_hit); // ell(lo) >= target >= ell(hi)
    let mut theta = theta_hit;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let ell = ell_at(mid)?;
        if (ell - target).abs() <= 1e-8 {
            theta = mid;
            break;
        }
        if ell >= target {
            lo = mid;
        } else {
            hi = mid;
        }
        theta = hi;
    }
    let out = finish(theta, grid, warnings)?;
    if out.ell_residual > 1e-8 {
        return Err(Error::Infeasible(format!(
            "bisection stalled with length residual {:.3e}",
            out.ell_residual
        )));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// global prescription
// ---------------------------------------------------------------------------

fn finite_coord(b: &ConvexBody) -> Option<Complex64> {
    match b {
        ConvexBody::Horoball(h) => h.center.finite(),
        ConvexBody::Ball { center, .. } => Some(center.z),
        ConvexBody::Tube { core, .. } => Some(core.anchor().z),
    }
}

fn detect_model(fam: &ObstacleFamily, x0: Complex64) -> Model {
    let planar = x0.im.abs() < 1e-12
        && fam.bodies.iter().all(|b| finite_coord(b).map_or(true, |c| c.im.abs() < 1e-12));
    if planar {
        Model::H2
    } else {
        Model::H3
    }
}

fn prescribe_from(
    fam: &ObstacleFamily,
    f0: PenKind,
    h: f64,
    p: &ParamSet,
    xi0: Boundary,
    mut g: Geodesic,
    horizon: f64,
    max_iter: usize,
) -> Result<ConstructionTrace> {
    let tab = constants::derived_constants(p);
    let d = fam
        .designated_index
        .ok_or_else(|| Error::Precondition("prescription needs a designated obstacle".into()))?;
    let c0 = fam.bodies[d];
    let x0 = xi0
        .finite()
        .ok_or_else(|| Error::Precondition("prescription source must be a finite boundary point".into()))?;
    if c0.at_infinity(xi0) {
        return Err(Error::Precondition("source lies at infinity of the designated obstacle".into()));
    }
    let model = detect_model(fam, x0);
    let src = Source::Boundary(xi0);
    let mut warnings: Vec<String> = Vec::new();
    let guaranteed = constants::c1_dprime(p.eps0, p.delta0, kappa_of(f0));
    if h < guaranteed - 1e-12 {
        warnings.push(format!(
            "h = {h:.6} below the guaranteed prescription threshold {guaranteed:.6}"
        ));
    }
    if let Some(note) = &fam.truncation_note {
        warnings.push(note.clone());
    }

    let mut steps: Vec<TraceStep> = Vec::new();
    let mut rays: Vec<Geodesic> = vec![g];
    let mut converged = false;
    for k in 1..=max_iter {
        let t0 = pen_record(&g, &c0, PenKind::Length, src)?.t_minus.to_f64();
        // minimal-entry-time obstacle whose penetration length exceeds the
        // final bound h1'
        let mut violator: Option<(usize, f64, f64)> = None;
        for (i, b) in fam.bodies.iter().enumerate() {
            if i == d {
                continue;
            }
            let rec = pen_record(&g, b, PenKind::Length, src)?;
            let ell = rec.value.to_f64();
            if ell <= tab.h1_prime + 1e-9 {
                continue;
            }
            let rel = rec.t_minus.to_f64() - t0;
            if rel > fam.delta0 + 1e-9 && rel < horizon {
                if violator.map_or(true, |(_, t, _)| rel < t) {
                    violator = Some((i, rel, ell));
                }
            }
        }
        let (idx, rel, _ell) = match violator {
            None => {
                converged = true;
                break;
            }
            Some(v) => v,
        };
        let out = local_prescribe(model, &c0, f0, h, &fam.bodies[idx], tab.h0, fam.delta0, xi0, &g)?;
        for w in out.warnings {
            if !warnings.contains(&w) {
                warnings.push(w);
            }
        }
        g = out.geodesic;
        rays.push(g);
        steps.push(TraceStep { k, obstacle_index: idx, t_entry: rel, endpoint: out.endpoint });
    }
    if !converged {
        warnings.push(format!("iteration cap {max_iter} reached with violations remaining"));
    }

    // final verification: f0 pinned at h, every other penetration within the
    // horizon bounded by h1'
    let mut report = Vec::new();
    let f0v = pen_value(&g, &c0, f0, src)?;
    report.push(ReportRow {
        obstacle_index: d,
        t_entry: 0.0,
        value: f0v,
        bound: h,
        pass: (f0v - h).abs() <= 1e-6,
    });
    let t0 = pen_record(&g, &c0, PenKind::Length, src)?.t_minus.to_f64();
    for (i, b) in fam.bodies.iter().enumerate() {
        if i == d {
            continue;
        }
        let rec = pen_record(&g, b, PenKind::Length, src)?;
        let ell = rec.value.to_f64();
        let rel = rec.t_minus.to_f64() - t0;
        if ell > 0.0 && rel > fam.delta0 && rel < horizon {
            report.push(ReportRow {
                obstacle_index: i,
                t_entry: rel,
                value: ell,
                bound: tab.h1_prime + 1e-6,
                pass: ell <= tab.h1_prime + 1e-6,
            });
        }
    }
    let all_pass = report.iter().all(|r| r.pass);
    Ok(ConstructionTrace {
        steps,
        rays,
        final_geodesic: g,
        report,
        warnings,
        converged: converged && all_pass,
    })
}

/// Prescribe f0 on the designated obstacle at level h while resetting every
/// later penetration (entered after delta0, before the horizon) to the
/// derived floor, until all of them sit below the derived bound h1'.
pub fn prescribe(
    fam: &ObstacleFamily,
    f0: PenKind,
    h: f64,
    p: &ParamSet,
    xi0: Boundary,
    horizon: f64,
    max_iter: usize,
) -> Result<ConstructionTrace> {
    let x0 = xi0
        .finite()
        .ok_or_else(|| Error::Precondition("prescription source must be a finite boundary point".into()))?;
    let d = fam
        .designated_index
        .ok_or_else(|| Error::Precondition("prescription needs a designated obstacle".into()))?;
    // initial endpoint on the level set, aimed at the family
    let mut centroid = Complex64::new(0.0, 0.0);
    let mut n = 0usize;
    for (i, b) in fam.bodies.iter().enumerate() {
        if i == d {
            continue;
        }
        if let Some(c) = finite_coord(b) {
            centroid += c;
            n += 1;
        }
    }
    let theta0 = if n > 0 { (centroid / n as f64 - x0).arg() } else { std::f64::consts::PI };
    let r0 = level_radius(&fam.bodies[d], f0, h, x0, theta0)?;
    let w0 = x0 + Complex64::from_polar(r0, theta0);
    let g0 = geodesic_between(xi0, Boundary::Finite(w0))?;
    prescribe_from(fam, f0, h, p, xi0, g0, horizon, max_iter)
}

/// Two-sided prescription: run the one-sided loop, then rerun it sourcing
/// from the far endpoint of the result. Verifies the two-sided penetration
/// bound h1'' = h1' + c3'(eps0)(delta0 + c1) + c1'(eps0).
pub fn prescribe_line(
    fam: &ObstacleFamily,
    f0: PenKind,
    h: f64,
    p: &ParamSet,
    xi0: Boundary,
    horizon: f64,
    max_iter: usize,
) -> Result<(ConstructionTrace, f64)> {
    let tab = constants::derived_constants(p);
    let h1dp = tab.h1_prime + tab.c3p_eps0 * (p.delta0 + tab.c1) + tab.c1p_eps0;
    let pass1 = prescribe(fam, f0, h, p, xi0, horizon, max_iter)?;
    let far = pass1.final_geodesic.xi_plus;
    let back = geodesic_between(far, xi0)?;
    let mut pass2 = prescribe_from(fam, f0, h, p, far, back, horizon, max_iter)?;

    // two-sided verification against h1'' from both endpoints
    let d = fam.designated_index.unwrap();
    let g = pass2.final_geodesic;
    let mut report = Vec::new();
    let f0v = pen_value(&g, &fam.bodies[d], f0, Source::Boundary(far))?;
    report.push(ReportRow {
        obstacle_index: d,
        t_entry: 0.0,
        value: f0v,
        bound: h,
        pass: (f0v - h).abs() <= 1e-6,
    });
    for src_pt in [far, g.xi_plus] {
        let src = Source::Boundary(src_pt);
        let oriented = geodesic_between(src_pt, if beq(src_pt, far) { g.xi_plus } else { far })?;
        let t0 = pen_record(&oriented, &fam.bodies[d], PenKind::Length, src)?.t_minus.to_f64();
        for (i, b) in fam.bodies.iter().enumerate() {
            if i == d {
                continue;
            }
            let rec = pen_record(&oriented, b, PenKind::Length, src)?;
            let ell = rec.value.to_f64();
            let rel = rec.t_minus.to_f64() - t0;
            if ell > 0.0 && rel > fam.delta0 && rel < horizon {
                report.push(ReportRow {
                    obstacle_index: i,
                    t_entry: rel,
                    value: ell,
                    bound: h1dp + 1e-6,
                    pass: ell <= h1dp + 1e-6,
                });
            }
        }
    }
    let all_pass = report.iter().all(|r| r.pass);
    pass2.converged = pass2.converged && all_pass;
    pass2.report = report;
    let mut steps = pass1.steps;
    steps.extend(pass2.steps.iter().copied());
    pass2.steps = steps;
    Ok((pass2, h1dp))
}

// ---------------------------------------------------------------------------
// running-bound recurrence
// ---------------------------------------------------------------------------

/// Grid evaluation of the running penetration bound.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RecurrenceReport {
    pub max_u: f64,
    pub min_u: f64,
    /// max deviation of u_N from h_* + c e^{t - t_N} on the last interval
    pub last_interval_dev: f64,
    /// final value of the exact majorant iteration x_{k+1} = x_k +
    /// exp(c' x_k - (N - k) c'' + 2 c'')
    pub x_final: f64,
    pub dt: f64,
}

/// Evaluate the running bounds u_n on a grid: u_0 = h_*, and for t <= t_n
/// u_n(t) = c e^{t - t_n} + sup over |s - t| <= c' e^{t - t_n} of u_{n-1}(s),
/// with u_n = h_* beyond t_n (the bound resets after each fix). Requires
/// c'' >= 3 c' + log 2 and gaps t_n - t_{n-1} >= c''; then the envelope is
/// sandwiched between h_* and h_* + 2c. Also runs the exact majorant x_k.
pub fn u_recurrence(
    c: f64,
    cp: f64,
    cpp: f64,
    h_star: f64,
    t_seq: &[f64],
    grid: usize,
) -> Result<RecurrenceReport> {
    if !(c > 0.0 && cp >= 0.0) {
        return Err(Error::Precondition("need c > 0 and c' >= 0".into()));
    }
    if cpp < 3.0 * cp + std::f64::consts::LN_2 - 1e-12 {
        return Err(Error::Precondition("need c'' >= 3 c' + log 2".into()));
    }
    if t_seq.is_empty() || grid < 16 {
        return Err(Error::Precondition("need at least one time and 16 grid points".into()));
    }
    if t_seq[0] < 0.0 {
        return Err(Error::Precondition("times must be nonnegative".into()));
    }
    for w in t_seq.windows(2) {
        if w[1] - w[0] < cpp - 1e-12 {
            return Err(Error::Precondition(format!(
                "gap {:.6} below c'' = {cpp:.6}",
                w[1] - w[0]
            )));
        }
    }
    let t_last = *t_seq.last().unwrap();
    let span = t_last + cp + 1.0;
    let dt = span / (grid - 1) as f64;
    let at = |u: &[f64], s: f64| -> f64 {
        let s = s.clamp(0.0, span);
        let x = s / dt;
        let i = (x.floor() as usize).min(grid - 2);
        let f = x - i as f64;
        u[i] * (1.0 - f) + u[i + 1] * f
    };
    let mut u_prev = vec![h_star; grid];
    for &tn in t_seq {
        let mut u_cur = vec![h_star; grid];
        for i in 0..grid {
            let t = i as f64 * dt;
            if t > tn {
                break;
            }
            let decay = (t - tn).exp();
            let w = cp * decay;
            let mut sup = f64::NEG_INFINITY;
            for j in 0..=64 {
                let s = t - w + 2.0 * w * j as f64 / 64.0;
                sup = sup.max(at(&u_prev, s));
            }
            u_cur[i] = c * decay + sup;
        }
        u_prev = u_cur;
    }
    let mut max_u = f64::NEG_INFINITY;
    let mut min_u = f64::INFINITY;
    let mut last_dev = 0.0f64;
    let t_prev_last = if t_seq.len() >= 2 { t_seq[t_seq.len() - 2] } else { 0.0 };
    for i in 0..grid {
        let t = i as f64 * dt;
        if t > t_last {
            break;
        }
        max_u = max_u.max(u_prev[i]);
        min_u = min_u.min(u_prev[i]);
        if t > t_prev_last {
            last_dev = last_dev.max((u_prev[i] - (h_star + c * (t - t_last).exp())).abs());
        }
    }
    let slack = 1e-6 + 8.0 * (1.0 + c + cp) * dt;
    if max_u > h_star + 2.0 * c + slack || min_u < h_star - slack {
        return Err(Error::Step(format!(
            "running bound escaped the sandwich: range [{min_u:.6}, {max_u:.6}] vs \
             [{h_star:.6}, {:.6}]",
            h_star + 2.0 * c
        )));
    }
    // exact majorant of the accumulated window growth
    let n = t_seq.len();
    let mut x = 0.0f64;
    for k in 0..n {
        x += (cp * x - (n - k) as f64 * cpp + 2.0 * cp).exp();
    }
    Ok(RecurrenceReport { max_u, min_u, last_interval_dev: last_dev, x_final: x, dt })
}

// ---------------------------------------------------------------------------
// limsup prescription by continued-fraction digits
// ---------------------------------------------------------------------------

/// A digit string realizing a prescribed limsup of excursion heights.
#[derive(Debug, Clone)]
pub struct LimsupOutcome {
    pub digits: Vec<u64>,
    pub peak_indices: Vec<usize>,
    pub excursions: Vec<f64>,
    pub achieved: f64,
    pub offpeak_max: f64,
}

/// Build a continued fraction whose excursion heights have limsup h: sparse
/// large digits steer alpha + beta toward 2 e^{h/2}, everything else stays
/// in {1, 2}. Requires h at or above the hall-ray onset and at least 50
/// digits of budget.
pub fn limsup_prescribe(h: f64, budget: usize) -> Result<LimsupOutcome> {
    let onset = constants::hall_and_lagrange_bounds().half_height;
    if h < onset - 1e-12 {
        return Err(Error::Precondition(format!(
            "limsup level {h:.6} below the hall-ray onset {onset:.6}"
        )));
    }
    if budget < 50 {
        return Err(Error::Precondition("digit budget must be at least 50".into()));
    }
    // filler skeleton alternating 2, 1 keeps off-peak excursions below 1
    let mut digits: Vec<u64> = (0..budget).map(|i| if i % 2 == 0 { 2 } else { 1 }).collect();
    let spacing = 20usize;
    let peaks: Vec<usize> =
        (1..).map(|m| m * spacing - 1).take_while(|&i| i + 1 < budget).collect();
    let goal = 2.0 * (h / 2.0).exp();
    let mut e = CFExpansion::new(0, digits.clone(), None)?;
    for &i in &peaks {
        // excursion i has magnitude (a_{i+1} + frac + beta) / 2 with
        // a_{i+1} = digits[i]; beta depends on the digits already fixed
        let beta = dioph::back_value(&e, i - 1)?;
        // frac = [0; a_{i+2}, a_{i+3}, ...]
        let frac = 1.0 / dioph::tail_value(&e, i + 1)?;
        let a = (goal - beta - frac).round().max(3.0);
        digits[i] = a as u64;
        e = CFExpansion::new(0, digits.clone(), None)?;
    }
    let excursions = dioph::excursions_cf(&e, budget - 1)?;
    let achieved = dioph::limsup_estimate(&excursions)?;
    let offpeak_max = excursions
        .iter()
        .enumerate()
        .filter(|(n, _)| !peaks.contains(&(n + 1)))
        .map(|(_, &v)| v)
        .fold(0.0f64, f64::max);
    Ok(LimsupOutcome { digits, peak_indices: peaks, excursions, achieved, offpeak_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::dist;

    const MU1: f64 = 1.042;

    fn ps_inf() -> ParamSet {
        ParamSet::new(Eps::Infinity, 0.0, 0.0, true).unwrap()
    }

    #[test]
    fn family_json_roundtrip_and_overlap_rejection() {
        let fam = ObstacleFamily::from_json(
            r#"[
                {"kind": "horoball", "center": "inf", "param": 1.0},
                {"kind": "horoball", "center": [0.0], "param": 0.5},
                {"kind": "ball", "center": [3.0, 0.3], "param": 0.4},
                {"kind": "tube", "center": [10.0, 10.6], "param": 0.3}
            ]"#,
            0.0,
            Some(0),
        )
        .unwrap();
        assert_eq!(fam.bodies.len(), 4);
        assert!(matches!(fam.bodies[0], ConvexBody::Horoball(_)));
        assert!(matches!(fam.bodies[3], ConvexBody::Tube { .. }));

        // two overlapping horoballs violate the delta0 = 0 budget
        let bad = ObstacleFamily::from_horoballs(
            vec![
                Horoball::at(Complex64::new(0.0, 0.0), 1.0),
                Horoball::at(Complex64::new(0.5, 0.0), 1.0),
            ],
            0.0,
            None,
        );
        assert!(matches!(bad, Err(Error::Family(_))));
        // ... but pass under a generous delta0
        ObstacleFamily::from_horoballs(
            vec![
                Horoball::at(Complex64::new(0.0, 0.0), 1.0),
                Horoball::at(Complex64::new(0.5, 0.0), 1.0),
            ],
            3.0,
            None,
        )
        .unwrap();
    }

    #[test]
    fn ford_tangencies_have_zero_chord() {
        let fam = ObstacleFamily::ford(12, dioph::Ring::Rational).unwrap();
        assert!(fam.bodies.len() > 50);
        // tangent circles at 0 and 1 and the line at height 1
        let c0 = ConvexBody::Horoball(Horoball::at(Complex64::new(0.0, 0.0), 1.0));
        let c1 = ConvexBody::Horoball(Horoball::at(Complex64::new(1.0, 0.0), 1.0));
        let cinf = ConvexBody::Horoball(Horoball::at_infinity(1.0));
        assert_eq!(pair_chord(&c0, &c1).unwrap(), 0.0);
        assert_eq!(pair_chord(&c0, &cinf).unwrap(), 0.0);
    }

    /// Cauchy property of the replacement iteration: consecutive rays stay
    /// within mu2 e^{t - t_k} of each other before the k-th tangency.
    fn check_cauchy(trace: &ConstructionTrace, mu2: f64, shift_interior: bool) {
        for (i, step) in trace.steps.iter().enumerate() {
            let (a, b) = (&trace.rays[i], &trace.rays[i + 1]);
            let tk = step.t_entry;
            let lo = if shift_interior { 0.0 } else { tk - 25.0 };
            for j in 0..=50 {
                let t = lo + (tk - lo) * j as f64 / 50.0;
                let d = dist(a.point_at(t), b.point_at(t));
                let bound = mu2 * (t - tk).exp() + 1e-6;
                assert!(
                    d <= bound,
                    "step {}: d = {d:.3e} exceeds {bound:.3e} at t = {t:.3}",
                    step.k
                );
            }
        }
    }

    #[test]
    fn uncloud_ford_interior_source() {
        let fam = ObstacleFamily::ford(12, dioph::Ring::Rational).unwrap();
        let (mu2, _mu3, mu4, _mu5) = constants::mu_chain(MU1).unwrap();
        let src = Source::Interior(Point::planar(0.5, 0.9));
        let trace = uncloud(&fam, src, MU1, 12.0, 1000).unwrap();
        assert!(trace.converged, "warnings: {:?}", trace.warnings);
        assert!(!trace.steps.is_empty());
        assert!(trace.report.iter().all(|r| r.pass));
        for w in trace.steps.windows(2) {
            assert!(
                w[1].t_entry - w[0].t_entry >= mu4 - 1e-6,
                "entry gap {:.6} below mu4 = {mu4:.6}",
                w[1].t_entry - w[0].t_entry
            );
        }
        check_cauchy(&trace, mu2, true);

        // determinism: bit-identical endpoints on a rerun
        let again = uncloud(&fam, src, MU1, 12.0, 1000).unwrap();
        for (a, b) in trace.steps.iter().zip(again.steps.iter()) {
            assert_eq!(a.endpoint.finite().unwrap(), b.endpoint.finite().unwrap());
        }
    }

    #[test]
    fn uncloud_source_at_infinity_and_trivial_case() {
        // source at the ideal point of the cusp horoball
        let fam = ObstacleFamily::ford(8, dioph::Ring::Rational).unwrap();
        let trace =
            uncloud(&fam, Source::Boundary(Boundary::Inf), MU1, 10.0, 1000).unwrap();
        assert!(trace.converged, "warnings: {:?}", trace.warnings);
        assert!(!trace.steps.is_empty());

        // a single distant obstacle: the initial vertical ray already avoids
        // it and no replacement happens
        let fam = ObstacleFamily::from_horoballs(
            vec![Horoball::at(Complex64::new(50.0, 0.0), 1.0)],
            0.0,
            None,
        )
        .unwrap();
        let trace =
            uncloud(&fam, Source::Interior(Point::planar(0.0, 0.5)), MU1, 20.0, 100).unwrap();
        assert!(trace.converged);
        assert!(trace.steps.is_empty());
        assert!(trace.report.is_empty());

        // finite boundary sources are rejected
        let err = uncloud(&fam, Source::Boundary(Boundary::real(2.0)), MU1, 20.0, 100);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn local_prescribe_moves_to_the_target() {
        // designated cusp horoball, height map pinned at h = 7; one deep
        // sphere near the initial endpoint must be reset to the floor
        let tab = constants::derived_constants(&ps_inf());
        let h = 7.0f64;
        let c0 = ConvexBody::Horoball(Horoball::at_infinity(1.0));
        let cn = ConvexBody::Horoball(Horoball::at(Complex64::new(0.5, 0.5), 0.5));
        // place the source so the level-set endpoint lands 0.01 from the
        // sphere's base point: a deep but finite initial hit
        let r = 2.0 * (h / 2.0).exp();
        let x0 = Complex64::new(0.51 + r, 0.5);
        let xi0 = Boundary::Finite(x0);
        let theta = (Complex64::new(0.5, 0.5) - x0).arg();
        let w = x0 + Complex64::from_polar(r, theta);
        let g = geodesic_between(xi0, Boundary::Finite(w)).unwrap();
        let ell0 = pen_value(&g, &cn, PenKind::Length, Source::Boundary(xi0)).unwrap();
        assert!(ell0 > tab.h1_prime, "initial hit too shallow: {ell0}");

        let out = local_prescribe(Model::H3, &c0, PenKind::Ph, h, &cn, tab.h0, 0.0, xi0, &g)
            .unwrap();
        assert!(out.f0_residual <= 1e-8, "f0 residual {}", out.f0_residual);
        assert!(out.ell_residual <= 1e-8, "length residual {}", out.ell_residual);
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);

        // zero-move when the target is already met
        let out2 = local_prescribe(
            Model::H3,
            &c0,
            PenKind::Ph,
            h,
            &cn,
            ell0,
            0.0,
            xi0,
            &g,
        )
        .unwrap();
        assert_eq!(out2.endpoint.finite().unwrap(), w);

        // thresholds are reported, not silently assumed
        let out3 =
            local_prescribe(Model::H3, &c0, PenKind::Ph, h, &cn, tab.h0, 2.0, xi0, &g).unwrap();
        assert!(out3.warnings.iter().any(|w| w.contains("window start")));
    }

    #[test]
    fn local_prescribe_planar_banner() {
        let tab = constants::derived_constants(&ps_inf());
        let h = 7.0f64;
        let c0 = ConvexBody::Horoball(Horoball::at_infinity(1.0));
        let cn = ConvexBody::Horoball(Horoball::at(Complex64::new(0.5, 0.0), 0.5));
        let x0 = Complex64::new(0.51 + 2.0 * (h / 2.0).exp(), 0.0);
        let xi0 = Boundary::Finite(x0);
        let w = x0 - Complex64::new(2.0 * (h / 2.0).exp(), 0.0);
        let g = geodesic_between(xi0, Boundary::Finite(w)).unwrap();
        let res = local_prescribe(Model::H2, &c0, PenKind::Ph, h, &cn, tab.h0, 0.0, xi0, &g);
        match res {
            Err(Error::Infeasible(msg)) => assert!(msg.contains("planar")),
            Ok(out) => assert!(out.warnings.iter().any(|w| w.contains("planar"))),
            Err(e) => panic!("unexpected error: {e}"),
        }
    }

    #[test]
    fn prescribe_gaussian_ford() {
        let fam = ObstacleFamily::ford(6, dioph::Ring::Gaussian).unwrap();
        let p = ps_inf();
        let tab = constants::derived_constants(&p);
        let h = 7.0f64;
        let xi0 = Boundary::Finite(Complex64::new(0.5 + 2.0 * (h / 2.0).exp(), 0.5));
        let trace = prescribe(&fam, PenKind::Ph, h, &p, xi0, 30.0, 10_000).unwrap();
        assert!(trace.converged, "report: {:?}", trace.report);
        let f0_row = &trace.report[0];
        assert!((f0_row.value - h).abs() <= 1e-6);
        for row in &trace.report[1..] {
            assert!(row.value <= tab.h1_prime + 1e-6, "{row:?}");
        }
        // the head stays pinned at h between rounds
        let src = Source::Boundary(xi0);
        let c0 = fam.bodies[0];
        for g in &trace.rays {
            let v = pen_value(g, &c0, PenKind::Ph, src).unwrap();
            assert!((v - h).abs() <= 1e-8, "intermediate f0 = {v}");
        }
        // entry gaps between consecutive fixes
        for w in trace.steps.windows(2) {
            assert!(
                w[1].t_entry - w[0].t_entry >= tab.c6 - 1e-6,
                "gap {:.6} below c6 = {:.6}",
                w[1].t_entry - w[0].t_entry,
                tab.c6
            );
        }
    }

    #[test]
    fn prescribe_line_two_sided_bound() {
        let p = ps_inf();
        let tab = constants::derived_constants(&p);
        let fam = ObstacleFamily::ford(4, dioph::Ring::Gaussian).unwrap();
        let h = 7.0f64;
        let xi0 = Boundary::Finite(Complex64::new(0.5 + 2.0 * (h / 2.0).exp(), 0.5));
        let (trace, h1dp) = prescribe_line(&fam, PenKind::Ph, h, &p, xi0, 30.0, 10_000).unwrap();
        // h1''(inf, 0) = h1' + (5/2)(1/19) + 2 log(1 + sqrt 2)
        let expect = tab.h1_prime
            + 2.5 / 19.0
            + 2.0 * (1.0 + std::f64::consts::SQRT_2).ln();
        assert!((h1dp - expect).abs() < 1e-12);
        assert!(trace.converged, "report: {:?}", trace.report);
        for row in &trace.report[1..] {
            assert!(row.value <= h1dp + 1e-6, "{row:?}");
        }
    }

    #[test]
    fn u_recurrence_sandwich_and_collapse() {
        let cpp = 0.3 + std::f64::consts::LN_2;
        let times: Vec<f64> = (1..=20).map(|k| k as f64 * cpp).collect();
        let rep = u_recurrence(1.0, 0.1, cpp, 5.0, &times, 6000).unwrap();
        let tol = 1e-6 + 8.0 * 2.1 * rep.dt;
        assert!(rep.max_u <= 7.0 + tol, "max_u = {}", rep.max_u);
        assert!(rep.min_u >= 5.0 - tol, "min_u = {}", rep.min_u);
        assert!(rep.x_final <= 1.0);

        // c' = 0 collapses the window: u = h_* + c e^{t - t_n} on the last
        // interval exactly
        let rep0 = u_recurrence(1.0, 0.0, cpp, 5.0, &times, 6000).unwrap();
        assert!(rep0.last_interval_dev <= 1e-9, "dev = {}", rep0.last_interval_dev);

        // preconditions
        assert!(u_recurrence(1.0, 0.3, 0.5, 5.0, &times, 6000).is_err());
        assert!(u_recurrence(1.0, 0.0, cpp, 5.0, &[0.0, 0.1], 6000).is_err());
    }

    #[test]
    fn u_majorant_stays_below_one() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(97);
        for _ in 0..1000 {
            let cp: f64 = rng.gen_range(0.0..1.0);
            let cpp = 3.0 * cp + std::f64::consts::LN_2 + rng.gen_range(0.0..1.0);
            let n = rng.gen_range(2..=40);
            let mut x = 0.0f64;
            for k in 0..n {
                x += (cp * x - (n - k) as f64 * cpp + 2.0 * cp).exp();
            }
            assert!(x <= 1.0, "x_N = {x} for cp = {cp}, cpp = {cpp}, N = {n}");
        }
    }

    #[test]
    fn limsup_prescribe_hits_the_level() {
        let out = limsup_prescribe(8.0, 400).unwrap();
        assert!((out.achieved - 8.0).abs() <= 0.05, "achieved {}", out.achieved);
        assert!(out.offpeak_max < 8.0 - 1.0, "off-peak max {}", out.offpeak_max);

        let small = limsup_prescribe(8.0, 50).unwrap();
        assert!((small.achieved - 8.0).abs() <= 0.15, "achieved {}", small.achieved);

        // below the hall-ray onset the construction refuses
        assert!(matches!(limsup_prescribe(3.0, 400), Err(Error::Precondition(_))));
        assert!(matches!(limsup_prescribe(8.0, 10), Err(Error::Precondition(_))));
    }
}
