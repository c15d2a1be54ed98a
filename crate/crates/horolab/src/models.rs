//! Closed-form geometry of the upper half-plane / half-space model:
//! distances, geodesics with unit-speed parameterization, Busemann heights,
//! Moebius actions with Poincare extension, projections, crossratio and the
//! boundary (Hamenstadt) distance normalized at height 1.
//!
//! The base coordinate is complex throughout; the plane case is the real
//! slice. Dimension-specific behavior (sampling, prescription level sets)
//! lives with its consumers, tagged by `Model`.

use num_complex::Complex64;

use crate::{Error, Result};

/// Which half-space model a configuration lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    H2,
    H3,
}

/// Extended real: finite value or a signed infinity. Floating-point
/// infinities never flow through intermediate arithmetic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XReal {
    NegInf,
    Finite(f64),
    PosInf,
}

impl XReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            XReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, XReal::Finite(_))
    }

    /// Collapses to f64 for comparisons and reports.
    pub fn to_f64(self) -> f64 {
        match self {
            XReal::NegInf => f64::NEG_INFINITY,
            XReal::Finite(v) => v,
            XReal::PosInf => f64::INFINITY,
        }
    }
}

/// A point of the boundary circle/sphere: a finite coordinate or infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    Finite(Complex64),
    Inf,
}

impl Boundary {
    pub fn real(x: f64) -> Self {
        Boundary::Finite(Complex64::new(x, 0.0))
    }

    pub fn finite(self) -> Option<Complex64> {
        match self {
            Boundary::Finite(z) => Some(z),
            Boundary::Inf => None,
        }
    }
}

/// An interior point (base, height), height > 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub z: Complex64,
    pub h: f64,
}

impl Point {
    pub fn new(z: Complex64, h: f64) -> Self {
        assert!(h > 0.0, "interior point must have positive height");
        Point { z, h }
    }

    pub fn planar(x: f64, h: f64) -> Self {
        Point::new(Complex64::new(x, 0.0), h)
    }
}

/// Hyperbolic distance. Evaluated as 2 arsinh of the half-chord quotient,
/// which stays accurate for nearby points (the cosh form loses half the
/// digits near 1).
pub fn dist(p: Point, q: Point) -> f64 {
    let dz = (p.z - q.z).norm_sqr();
    let dh = (p.h - q.h) * (p.h - q.h);
    2.0 * ((dz + dh) / (4.0 * p.h * q.h)).sqrt().asinh()
}

/// Busemann cocycle at a boundary point: beta_xi(x, y), the renormalized
/// "how much farther from xi is x than y".
pub fn busemann(xi: Boundary, x: Point, y: Point) -> f64 {
    match xi {
        Boundary::Inf => (y.h / x.h).ln(),
        Boundary::Finite(c) => {
            // send xi to infinity by z -> -1/(z - c) and compare heights
            let m = Moebius::new(
                Complex64::new(0.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(1.0, 0.0),
                -c,
            );
            let xh = m.apply_point(x).h;
            let yh = m.apply_point(y).h;
            (yh / xh).ln()
        }
    }
}

/// Busemann-style cocycle based at an interior point: d(x, xi) - d(y, xi).
pub fn basepoint_busemann(xi: Point, x: Point, y: Point) -> f64 {
    dist(x, xi) - dist(y, xi)
}

#[derive(Debug, Clone, Copy)]
enum GeoKind {
    /// Semicircle over the segment [a, b]: center, radius, unit direction.
    Arc { center: Complex64, r: f64, u: Complex64 },
    /// Vertical line traversed upward (to infinity).
    Up { foot: Complex64 },
    /// Vertical line traversed downward (from infinity).
    Down { foot: Complex64 },
}

/// An oriented geodesic with a unit-speed parameterization anchored so that
/// `point_at(0)` is the stored anchor.
#[derive(Debug, Clone, Copy)]
pub struct Geodesic {
    pub xi_minus: Boundary,
    pub xi_plus: Boundary,
    kind: GeoKind,
    /// parameter of the anchor in the canonical parameterization
    tau0: f64,
}

impl Geodesic {
    /// Unit-speed point. Arc: tau -> center + r tanh(tau) u at height
    /// r sech(tau); vertical: height e^{+-tau}.
    pub fn point_at(&self, t: f64) -> Point {
        let tau = self.tau0 + t;
        match self.kind {
            GeoKind::Arc { center, r, u } => {
                // clamp against overflow far along the ray
                let th = tau.tanh();
                let sech = 1.0 / tau.cosh();
                Point::new(center + u * (r * th), (r * sech).max(f64::MIN_POSITIVE))
            }
            GeoKind::Up { foot } => Point::new(foot, tau.exp()),
            GeoKind::Down { foot } => Point::new(foot, (-tau).exp()),
        }
    }

    /// The anchor point, i.e. `point_at(0)`.
    pub fn anchor(&self) -> Point {
        self.point_at(0.0)
    }

    /// Parameter value of the closest-point projection of `p` (which must
    /// not be an endpoint when on the boundary).
    pub fn param_of_projection(&self, p: ProjInput) -> Result<f64> {
        let tau = match self.kind {
            GeoKind::Arc { center, r, u } => {
                // rotate/translate so the arc is the unit-scale semicircle
                // over [-r, r] along the real axis
                match p {
                    ProjInput::Interior(q) => {
                        let w = (q.z - center) * u.conj();
                        // distance to the arc's axis depends on (x, |y|, h):
                        // after conjugating the arc to a vertical axis the
                        // projection parameter is monotone in x/|(w,h)|
                        // direction; closed form below via the 0-inf picture
                        arc_proj_tau(w, q.h, r)
                    }
                    ProjInput::Boundary(b) => match b {
                        Boundary::Inf => 0.0,
                        Boundary::Finite(z) => {
                            let w = (z - center) * u.conj();
                            if (w - Complex64::new(r, 0.0)).norm() < 1e-14 * (1.0 + r)
                                || (w + Complex64::new(r, 0.0)).norm() < 1e-14 * (1.0 + r)
                            {
                                return Err(Error::ProjectionUndefined);
                            }
                            arc_proj_tau(w, 0.0, r)
                        }
                    },
                }
            }
            GeoKind::Up { foot } | GeoKind::Down { foot } => {
                let sign = if matches!(self.kind, GeoKind::Up { .. }) { 1.0 } else { -1.0 };
                match p {
                    ProjInput::Interior(q) => {
                        let rr = ((q.z - foot).norm_sqr() + q.h * q.h).sqrt();
                        sign * rr.ln()
                    }
                    ProjInput::Boundary(Boundary::Inf) => return Err(Error::ProjectionUndefined),
                    ProjInput::Boundary(Boundary::Finite(z)) => {
                        let rr = (z - foot).norm();
                        if rr < 1e-300 {
                            return Err(Error::ProjectionUndefined);
                        }
                        sign * rr.ln()
                    }
                }
            }
        };
        Ok(tau - self.tau0)
    }
}

/// Projection parameter on the canonical arc over [-r, r]: send -r -> 0,
/// r -> inf by z -> (z + r)/(r - z); the arc becomes the vertical axis at 0
/// and projection there is (0, |image|).
fn arc_proj_tau(w: Complex64, h: f64, r: f64) -> f64 {
    // Poincare extension of M = [(1, r), (-1, r)] / sqrt(2r)
    let a = Complex64::new(1.0, 0.0);
    let b = Complex64::new(r, 0.0);
    let c = Complex64::new(-1.0, 0.0);
    let d = Complex64::new(r, 0.0);
    let den = (c * w + d).norm_sqr() + c.norm_sqr() * h * h;
    let num = (a * w + b) * (c * w + d).conj() + a * c.conj() * h * h;
    let det = (a * d - b * c).norm(); // = 2r
    let z1 = num / den;
    let h1 = det * h / den;
    let rho = (z1.norm_sqr() + h1 * h1).sqrt();
    // on the canonical arc, tau relates to the axis height by
    // e^{tau-shift}: the map above sends arc-parameter tau to axis height
    // e^{tau} (tanh/sech algebra), so tau = log rho
    rho.ln()
}

/// Input to a projection: an interior point or a boundary point.
#[derive(Debug, Clone, Copy)]
pub enum ProjInput {
    Interior(Point),
    Boundary(Boundary),
}

/// Geodesic from `a` to `b` with the default anchor (arc apex, or height 1
/// on vertical lines).
pub fn geodesic_between(a: Boundary, b: Boundary) -> Result<Geodesic> {
    let kind = match (a, b) {
        (Boundary::Inf, Boundary::Inf) => return Err(Error::DegenerateGeodesic),
        (Boundary::Finite(p), Boundary::Finite(q)) => {
            if (p - q).norm() < 1e-300 {
                return Err(Error::DegenerateGeodesic);
            }
            let center = (p + q) / 2.0;
            let r = (q - p).norm() / 2.0;
            let u = (q - p) / (q - p).norm();
            GeoKind::Arc { center, r, u }
        }
        (Boundary::Finite(p), Boundary::Inf) => GeoKind::Up { foot: p },
        (Boundary::Inf, Boundary::Finite(q)) => GeoKind::Down { foot: q },
    };
    Ok(Geodesic { xi_minus: a, xi_plus: b, kind, tau0: 0.0 })
}

/// Same, re-anchored at a given on-geodesic point (checked to 1e-9).
pub fn geodesic_with_anchor(a: Boundary, b: Boundary, anchor: Point) -> Result<Geodesic> {
    let mut g = geodesic_between(a, b)?;
    let t = g.param_of_projection(ProjInput::Interior(anchor))?;
    let on = g.point_at(t);
    if dist(on, anchor) > 1e-9 {
        return Err(Error::Precondition("anchor does not lie on the geodesic".into()));
    }
    g.tau0 += t;
    Ok(g)
}

/// Geodesic through the interior point `p` ending at the boundary point
/// `w`, anchored at `p` and oriented toward `w` (so `w` sits at +infinity).
pub fn line_to_boundary(p: Point, w: Boundary) -> Result<Geodesic> {
    match w {
        Boundary::Inf => geodesic_with_anchor(Boundary::Finite(p.z), Boundary::Inf, p),
        Boundary::Finite(xi) => {
            // send w to infinity; the line becomes vertical through the
            // image of p, whose foot pulls back to the other endpoint
            let m = Moebius::new(
                Complex64::new(0.0, 0.0),
                Complex64::new(-1.0, 0.0),
                Complex64::new(1.0, 0.0),
                -xi,
            );
            let pi = m.apply_point(p);
            let other = m.inverse().apply_boundary(Boundary::Finite(pi.z));
            geodesic_with_anchor(other, w, p)
        }
    }
}

/// Geodesic through two interior points, anchored at `p` and oriented so
/// that `q` lies at the parameter `dist(p, q) > 0`.
pub fn line_through_points(p: Point, q: Point) -> Result<Geodesic> {
    let dz = q.z - p.z;
    let scale = 1.0 + p.h + q.h + p.z.norm() + q.z.norm();
    if dz.norm() <= 1e-12 * scale {
        if (q.h - p.h).abs() <= 1e-12 * scale {
            return Err(Error::DegenerateGeodesic);
        }
        return if q.h > p.h {
            geodesic_with_anchor(Boundary::Finite(p.z), Boundary::Inf, p)
        } else {
            geodesic_with_anchor(Boundary::Inf, Boundary::Finite(p.z), p)
        };
    }
    // in the vertical plane through p, q: circle center w0 (along dz) with
    // (w - w0)^2 + h^2 constant; endpoint offsets computed cancellation-free
    // via (r - w0)(r + w0) = h_p^2
    let u = dz / dz.norm();
    let wq = dz.norm();
    let w0 = (wq * wq + q.h * q.h - p.h * p.h) / (2.0 * wq);
    let r = (w0 * w0 + p.h * p.h).sqrt();
    let (lo, hi) = if w0 >= 0.0 {
        (-(p.h * p.h) / (w0 + r), w0 + r)
    } else {
        (w0 - r, p.h * p.h / (r - w0))
    };
    let a = p.z + u * lo;
    let b = p.z + u * hi;
    geodesic_with_anchor(Boundary::Finite(a), Boundary::Finite(b), p)
}

/// Point on the segment [p, q] at arc length `s` from `p`.
pub fn point_on_segment(p: Point, q: Point, s: f64) -> Result<Point> {
    Ok(line_through_points(p, q)?.point_at(s))
}

/// Closest point on `L` to `p`.
pub fn project_to_geodesic(p: ProjInput, l: &Geodesic) -> Result<Point> {
    let t = l.param_of_projection(p)?;
    Ok(l.point_at(t))
}

/// Distance from an interior point to a geodesic, in closed form:
/// after sending the geodesic to the vertical axis, cosh d = |(z, h)| / h.
pub fn dist_to_geodesic(p: Point, l: &Geodesic) -> f64 {
    match l.kind {
        GeoKind::Arc { center, r, u } => {
            let w = (p.z - center) * u.conj();
            // conjugate to the vertical axis (see arc_proj_tau)
            let c = Complex64::new(-1.0, 0.0);
            let d = Complex64::new(r, 0.0);
            let den = (c * w + d).norm_sqr() + p.h * p.h;
            let num = (w + d) * (c * w + d).conj() + c.conj() * p.h * p.h;
            let h1 = 2.0 * r * p.h / den;
            let z1 = num / den;
            let q = (z1.norm_sqr() + h1 * h1).sqrt() / h1;
            q.max(1.0).acosh()
        }
        GeoKind::Up { foot } | GeoKind::Down { foot } => {
            let q = ((p.z - foot).norm_sqr() + p.h * p.h).sqrt() / p.h;
            q.max(1.0).acosh()
        }
    }
}

/// A unit-determinant Moebius transformation acting by Poincare extension.
#[derive(Debug, Clone, Copy)]
pub struct Moebius {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl Moebius {
    /// Normalizes the determinant to 1 (complex square root).
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Self {
        let det = a * d - b * c;
        assert!(det.norm() > 1e-300, "singular Moebius matrix");
        let s = det.sqrt();
        Moebius { a: a / s, b: b / s, c: c / s, d: d / s }
    }

    pub fn identity() -> Self {
        Moebius {
            a: Complex64::new(1.0, 0.0),
            b: Complex64::new(0.0, 0.0),
            c: Complex64::new(0.0, 0.0),
            d: Complex64::new(1.0, 0.0),
        }
    }

    pub fn inverse(&self) -> Self {
        Moebius { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn compose(&self, rhs: &Moebius) -> Self {
        Moebius {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    /// Boundary action with the usual infinity conventions.
    pub fn apply_boundary(&self, p: Boundary) -> Boundary {
        match p {
            Boundary::Inf => {
                if self.c.norm() < 1e-300 {
                    Boundary::Inf
                } else {
                    Boundary::Finite(self.a / self.c)
                }
            }
            Boundary::Finite(z) => {
                let den = self.c * z + self.d;
                if den.norm() < 1e-300 {
                    Boundary::Inf
                } else {
                    Boundary::Finite((self.a * z + self.b) / den)
                }
            }
        }
    }

    /// Poincare extension to the interior.
    pub fn apply_point(&self, p: Point) -> Point {
        let w = self.c * p.z + self.d;
        let den = w.norm_sqr() + self.c.norm_sqr() * p.h * p.h;
        let z = ((self.a * p.z + self.b) * w.conj() + self.a * self.c.conj() * p.h * p.h) / den;
        Point::new(z, p.h / den)
    }

    /// Image geodesic, re-anchored at the image of the anchor. The image
    /// anchor is snapped to the image geodesic by projection: it lies on it
    /// up to floating-point noise, which can exceed any fixed tolerance when
    /// the map contracts strongly near the anchor.
    pub fn apply_geodesic(&self, g: &Geodesic) -> Geodesic {
        let a = self.apply_boundary(g.xi_minus);
        let b = self.apply_boundary(g.xi_plus);
        let anchor = self.apply_point(g.anchor());
        let mut img = geodesic_between(a, b)
            .expect("isometric images of distinct endpoints stay distinct");
        let t = img
            .param_of_projection(ProjInput::Interior(anchor))
            .expect("projection of an interior point is defined");
        img.tau0 += t;
        img
    }

    /// Image horoball. A horoball at infinity of height s maps (when the
    /// lower-left entry is nonzero) to the ball at a/c of diameter
    /// 1/(|c|^2 s).
    pub fn apply_horoball(&self, h: &Horoball) -> Horoball {
        // reduce to the center-at-infinity case
        let (m, s) = match h.center {
            Boundary::Inf => (*self, h.param),
            Boundary::Finite(xi) => {
                // N sends infinity to xi and Horoball(inf, s) to the ball of
                // diameter 1/s at xi
                let n = Moebius::new(
                    xi,
                    Complex64::new(-1.0, 0.0),
                    Complex64::new(1.0, 0.0),
                    Complex64::new(0.0, 0.0),
                );
                (self.compose(&n), 1.0 / h.param)
            }
        };
        if m.c.norm() < 1e-12 {
            // fixes infinity: heights scale by |a/d| = |a|^2
            Horoball { center: Boundary::Inf, param: m.a.norm_sqr() * s }
        } else {
            Horoball {
                center: Boundary::Finite(m.a / m.c),
                param: 1.0 / (m.c.norm_sqr() * s),
            }
        }
    }
}

/// A horoball: center at infinity with boundary height `param`, or finite
/// center with Euclidean diameter `param`.
#[derive(Debug, Clone, Copy)]
pub struct Horoball {
    pub center: Boundary,
    pub param: f64,
}

impl Horoball {
    pub fn at_infinity(height: f64) -> Self {
        assert!(height > 0.0);
        Horoball { center: Boundary::Inf, param: height }
    }

    pub fn at(center: Complex64, diameter: f64) -> Self {
        assert!(diameter > 0.0);
        Horoball { center: Boundary::Finite(center), param: diameter }
    }

    /// The t-shrunk horoball (grown for t < 0).
    pub fn shrink(&self, t: f64) -> Horoball {
        match self.center {
            Boundary::Inf => Horoball { center: self.center, param: self.param * t.exp() },
            Boundary::Finite(_) => {
                Horoball { center: self.center, param: self.param * (-t).exp() }
            }
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        match self.center {
            Boundary::Inf => p.h >= self.param,
            Boundary::Finite(c) => (p.z - c).norm_sqr() + p.h * p.h <= self.param * p.h,
        }
    }

    /// Signed height of `p` above the horosphere: max is attained at the
    /// horoball "deepest" point; zero outside.
    pub fn height_above(&self, p: Point) -> f64 {
        match self.center {
            Boundary::Inf => (p.h / self.param).ln().max(0.0),
            Boundary::Finite(c) => {
                let q = self.param * p.h / ((p.z - c).norm_sqr() + p.h * p.h);
                q.ln().max(0.0)
            }
        }
    }
}

/// Crossratio of four boundary points, as a logarithm:
/// log(|a - c||b - d| / (|c - b||d - a|)), factors containing the point at
/// infinity cancelling pairwise. Requires a != b and c != d.
pub fn crossratio(a: Boundary, b: Boundary, c: Boundary, d: Boundary) -> Result<XReal> {
    if bnd_eq(a, b) || bnd_eq(c, d) {
        return Err(Error::Domain("crossratio needs a != b and c != d".into()));
    }
    if bnd_eq(a, c) || bnd_eq(b, d) {
        return Ok(XReal::NegInf);
    }
    if bnd_eq(c, b) || bnd_eq(a, d) {
        return Ok(XReal::PosInf);
    }
    // each |u - v| with an infinite argument drops out (it cancels against
    // the other factor containing the same infinite point)
    let mut log_num = 0.0;
    let mut log_den = 0.0;
    if let (Boundary::Finite(x), Boundary::Finite(y)) = (a, c) {
        log_num += (x - y).norm().ln();
    }
    if let (Boundary::Finite(x), Boundary::Finite(y)) = (b, d) {
        log_num += (x - y).norm().ln();
    }
    if let (Boundary::Finite(x), Boundary::Finite(y)) = (c, b) {
        log_den += (x - y).norm().ln();
    }
    if let (Boundary::Finite(x), Boundary::Finite(y)) = (d, a) {
        log_den += (x - y).norm().ln();
    }
    Ok(XReal::Finite(log_num - log_den))
}

fn bnd_eq(a: Boundary, b: Boundary) -> bool {
    match (a, b) {
        (Boundary::Inf, Boundary::Inf) => true,
        (Boundary::Finite(x), Boundary::Finite(y)) => x == y,
        _ => false,
    }
}

/// Boundary distance seen from the cusp at infinity, normalized on the
/// height-1 horosphere: exactly the Euclidean distance of the feet.
pub fn hamenstadt_dist(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rand_point(rng: &mut ChaCha8Rng) -> Point {
        let z = c(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let h = (rng.gen_range(-3.0..3.0f64)).exp();
        Point::new(z, h)
    }

    fn rand_boundary(rng: &mut ChaCha8Rng) -> Boundary {
        if rng.gen_bool(0.1) {
            Boundary::Inf
        } else {
            Boundary::Finite(c(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)))
        }
    }

    fn rand_moebius(rng: &mut ChaCha8Rng) -> Moebius {
        loop {
            let a = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let b = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let cc = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let d = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            if (a * d - b * cc).norm() > 0.1 {
                return Moebius::new(a, b, cc, d);
            }
        }
    }

    #[test]
    fn dist_examples() {
        assert!((dist(Point::planar(0.0, 1.0), Point::planar(0.0, std::f64::consts::E)) - 1.0)
            .abs()
            < 1e-12);
        assert!(
            (dist(Point::planar(0.0, 1.0), Point::planar(1.0, 1.0)) - 1.5f64.acosh()).abs()
                < 1e-12
        );
        assert_eq!(dist(Point::planar(2.0, 3.0), Point::planar(2.0, 3.0)), 0.0);
    }

    #[test]
    fn dist_symmetric_triangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let (p, q, r) = (rand_point(&mut rng), rand_point(&mut rng), rand_point(&mut rng));
            assert!((dist(p, q) - dist(q, p)).abs() < 1e-12);
            assert!(dist(p, r) <= dist(p, q) + dist(q, r) + 1e-9);
        }
    }

    #[test]
    fn dist_moebius_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let m = rand_moebius(&mut rng);
            let (p, q) = (rand_point(&mut rng), rand_point(&mut rng));
            let d0 = dist(p, q);
            let d1 = dist(m.apply_point(p), m.apply_point(q));
            assert!((d0 - d1).abs() < 1e-9 * (1.0 + d0), "d0={d0} d1={d1}");
        }
    }

    #[test]
    fn busemann_examples() {
        let x = Point::planar(0.0, 1.0);
        let y = Point::planar(0.0, std::f64::consts::E);
        assert!((busemann(Boundary::Inf, x, y) - 1.0).abs() < 1e-12);
        assert_eq!(busemann(Boundary::real(3.0), x, x), 0.0);
    }

    #[test]
    fn busemann_cocycle_and_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let xi = rand_boundary(&mut rng);
            let (x, y, z) = (rand_point(&mut rng), rand_point(&mut rng), rand_point(&mut rng));
            let bxy = busemann(xi, x, y);
            let byz = busemann(xi, y, z);
            let bxz = busemann(xi, x, z);
            assert!((bxy + byz - bxz).abs() < 1e-9);
            assert!(bxy.abs() <= dist(x, y) + 1e-9);
        }
    }

    #[test]
    fn basepoint_busemann_examples() {
        let xi = Point::planar(0.0, (2.0f64).exp());
        let x = Point::planar(0.0, 1.0);
        let y = Point::planar(0.0, std::f64::consts::E);
        assert!((basepoint_busemann(xi, x, y) - 1.0).abs() < 1e-12);
        assert_eq!(basepoint_busemann(xi, x, x), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let (a, b, p) = (rand_point(&mut rng), rand_point(&mut rng), rand_point(&mut rng));
            assert!((basepoint_busemann(p, a, b) + basepoint_busemann(p, b, a)).abs() < 1e-12);
        }
    }

    #[test]
    fn geodesic_vertical() {
        let g = geodesic_between(Boundary::real(0.0), Boundary::Inf).unwrap();
        for t in [-1.0, 0.0, 2.5] {
            let p = g.point_at(t);
            assert!(p.z.norm() < 1e-15);
            assert!((p.h - t.exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn geodesic_arc_apex() {
        let g = geodesic_between(Boundary::real(-1.0), Boundary::real(1.0)).unwrap();
        let apex = g.point_at(0.0);
        assert!(apex.z.norm() < 1e-15);
        assert!((apex.h - 1.0).abs() < 1e-15);
    }

    #[test]
    fn geodesic_unit_speed_and_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let a = rand_boundary(&mut rng);
            let b = rand_boundary(&mut rng);
            if bnd_eq(a, b) {
                continue;
            }
            let g = geodesic_between(a, b).unwrap();
            let s = rng.gen_range(-8.0..8.0);
            let t = rng.gen_range(-8.0..8.0);
            let d = dist(g.point_at(s), g.point_at(t));
            assert!((d - (s - t).abs()).abs() < 1e-9, "d={d} s={s} t={t}");
            // endpoint convergence
            if let Boundary::Finite(z) = b {
                let far = g.point_at(30.0);
                assert!((far.z - z).norm() < 1e-9 && far.h < 1e-9);
            }
            if let Boundary::Finite(z) = a {
                let far = g.point_at(-30.0);
                assert!((far.z - z).norm() < 1e-9 && far.h < 1e-9);
            }
        }
    }

    #[test]
    fn anchored_geodesic() {
        let anchor = Point::planar(0.0, 5.0);
        let g = geodesic_with_anchor(Boundary::real(0.0), Boundary::Inf, anchor).unwrap();
        let p = g.point_at(0.0);
        assert!(dist(p, anchor) < 1e-12);
        // off-geodesic anchor rejected
        assert!(geodesic_with_anchor(Boundary::real(0.0), Boundary::Inf, Point::planar(1.0, 5.0))
            .is_err());
    }

    #[test]
    fn projection_examples() {
        let axis = geodesic_between(Boundary::real(0.0), Boundary::Inf).unwrap();
        let p = Point::planar(0.0, 2.0);
        let pr = project_to_geodesic(ProjInput::Interior(p), &axis).unwrap();
        assert!(dist(p, pr) < 1e-12);
        let g = geodesic_between(Boundary::real(-1.0), Boundary::real(1.0)).unwrap();
        let pr = project_to_geodesic(ProjInput::Boundary(Boundary::Inf), &g).unwrap();
        assert!(pr.z.norm() < 1e-12 && (pr.h - 1.0).abs() < 1e-12);
        // endpoint projection is undefined
        assert!(project_to_geodesic(ProjInput::Boundary(Boundary::real(1.0)), &g).is_err());
    }

    #[test]
    fn projection_is_argmin_and_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..300 {
            let a = rand_boundary(&mut rng);
            let b = rand_boundary(&mut rng);
            if bnd_eq(a, b) {
                continue;
            }
            let g = geodesic_between(a, b).unwrap();
            let p = rand_point(&mut rng);
            let q = rand_point(&mut rng);
            let tp = g.param_of_projection(ProjInput::Interior(p)).unwrap();
            let tq = g.param_of_projection(ProjInput::Interior(q)).unwrap();
            let dp = dist(p, g.point_at(tp));
            // argmin versus nearby parameters, and the closed form agrees
            for dt in [-0.5, -1e-3, 1e-3, 0.5] {
                assert!(dp <= dist(p, g.point_at(tp + dt)) + 1e-9);
            }
            assert!((dp - dist_to_geodesic(p, &g)).abs() < 1e-9);
            // projections do not increase distances
            assert!((tp - tq).abs() <= dist(p, q) + 1e-9);
            // idempotent
            let t2 = g.param_of_projection(ProjInput::Interior(g.point_at(tp))).unwrap();
            assert!((t2 - tp).abs() < 1e-9);
        }
    }

    #[test]
    fn line_constructions() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..500 {
            let p = rand_point(&mut rng);
            let q = rand_point(&mut rng);
            if dist(p, q) < 1e-3 {
                continue;
            }
            // through two interior points: q sits at parameter dist(p, q)
            let g = line_through_points(p, q).unwrap();
            assert!(dist(g.anchor(), p) < 1e-9);
            assert!(dist(g.point_at(dist(p, q)), q) < 1e-8, "p={p:?} q={q:?}");
            // toward a boundary point: anchored at p, converging to w
            let w = rand_boundary(&mut rng);
            let gb = line_to_boundary(p, w).unwrap();
            assert!(dist(gb.anchor(), p) < 1e-9);
            let far = gb.point_at(35.0);
            match w {
                Boundary::Inf => assert!(far.h > 1e9),
                Boundary::Finite(z) => assert!((far.z - z).norm() < 1e-8 && far.h < 1e-8),
            }
        }
        // vertical special case and midpoint helper
        let p = Point::planar(1.0, 1.0);
        let q = Point::planar(1.0, std::f64::consts::E);
        let g = line_through_points(p, q).unwrap();
        assert!(dist(g.point_at(1.0), q) < 1e-12);
        let m = point_on_segment(p, q, 0.5).unwrap();
        assert!((m.h - 0.5f64.exp()).abs() < 1e-12);
        assert!(line_through_points(p, p).is_err());
    }

    #[test]
    fn moebius_examples() {
        let id = Moebius::identity();
        let p = Point::planar(0.3, 2.0);
        assert!(dist(id.apply_point(p), p) < 1e-12);
        // inversion sends the horoball at infinity of height 1 to the ball
        // of diameter 1 at 0
        let m = Moebius::new(c(0.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        let h = m.apply_horoball(&Horoball::at_infinity(1.0));
        match h.center {
            Boundary::Finite(z) => assert!(z.norm() < 1e-12),
            _ => panic!("expected finite center"),
        }
        assert!((h.param - 1.0).abs() < 1e-12);
        // and back
        let h2 = m.apply_horoball(&h);
        assert!(matches!(h2.center, Boundary::Inf));
        assert!((h2.param - 1.0).abs() < 1e-12);
    }

    #[test]
    fn moebius_horoball_consistency() {
        // membership commutes with the action
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..300 {
            let m = rand_moebius(&mut rng);
            let h = if rng.gen_bool(0.5) {
                Horoball::at_infinity((rng.gen_range(-1.0..1.0f64)).exp())
            } else {
                Horoball::at(
                    c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
                    (rng.gen_range(-1.0..1.0f64)).exp(),
                )
            };
            let hi = m.apply_horoball(&h);
            for _ in 0..10 {
                let p = rand_point(&mut rng);
                assert_eq!(h.contains(p), hi.contains(m.apply_point(p)), "h={h:?} p={p:?}");
            }
        }
    }

    #[test]
    fn shrink_and_contains() {
        let h = Horoball::at_infinity(1.0);
        assert!((h.shrink(std::f64::consts::LN_2).param - 2.0).abs() < 1e-12);
        let hb = Horoball::at(c(0.0, 0.0), 1.0);
        assert!((hb.shrink(1.0).param - (-1.0f64).exp()).abs() < 1e-12);
        // nesting
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let t = rng.gen_range(-1.0..1.0);
            let tp = t + rng.gen_range(0.0..1.0);
            let h = Horoball::at(c(rng.gen_range(-2.0..2.0), 0.0), rng.gen_range(0.5..2.0));
            for _ in 0..5 {
                let p = rand_point(&mut rng);
                if h.shrink(tp).contains(p) {
                    assert!(h.shrink(t).contains(p));
                }
            }
        }
    }

    #[test]
    fn height_above_matches_busemann() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..300 {
            let h = if rng.gen_bool(0.5) {
                Horoball::at_infinity((rng.gen_range(-1.0..1.0f64)).exp())
            } else {
                Horoball::at(
                    c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
                    (rng.gen_range(-1.0..1.0f64)).exp(),
                )
            };
            let p = rand_point(&mut rng);
            // reference: Busemann cocycle against a boundary basepoint of
            // the horosphere
            let x0 = match h.center {
                Boundary::Inf => Point::new(p.z, h.param),
                Boundary::Finite(cz) => Point::new(cz, h.param),
            };
            let expected = busemann(h.center, x0, p).max(0.0);
            assert!(
                (h.height_above(p) - expected).abs() < 1e-9,
                "h={h:?} p={p:?} got={} want={}",
                h.height_above(p),
                expected
            );
        }
    }

    #[test]
    fn crossratio_symmetries() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..500 {
            let (a, b, cc, d) = (
                rand_boundary(&mut rng),
                rand_boundary(&mut rng),
                rand_boundary(&mut rng),
                rand_boundary(&mut rng),
            );
            if bnd_eq(a, b) || bnd_eq(cc, d) {
                continue;
            }
            let x = crossratio(a, b, cc, d).unwrap();
            let y = crossratio(cc, d, a, b).unwrap();
            match (x, y) {
                (XReal::Finite(u), XReal::Finite(v)) => assert!((u - v).abs() < 1e-9),
                _ => assert_eq!(x, y),
            }
            if !bnd_eq(d, cc) {
                let z = crossratio(a, b, d, cc).unwrap();
                match (x, z) {
                    (XReal::Finite(u), XReal::Finite(v)) => assert!((u + v).abs() < 1e-9),
                    (XReal::PosInf, XReal::NegInf) | (XReal::NegInf, XReal::PosInf) => {}
                    _ => panic!("sign swap mismatch: {x:?} {z:?}"),
                }
            }
        }
    }

    #[test]
    fn crossratio_special_values() {
        let a = Boundary::real(0.0);
        let b = Boundary::Inf;
        let cc = Boundary::real(1.0);
        let d = Boundary::real(-1.0);
        // |0-1| |inf - (-1)| / (|1 - inf| |-1 - 0|) -> log(1/1) = 0
        assert_eq!(crossratio(a, b, cc, d).unwrap(), XReal::Finite(0.0));
        assert_eq!(crossratio(a, b, a, d).unwrap(), XReal::NegInf);
        assert_eq!(crossratio(a, b, b, d).unwrap(), XReal::PosInf);
        assert!(crossratio(a, a, cc, d).is_err());
    }

    /// Limit-form evaluation of the crossratio via rays at t = 30.
    fn crossratio_by_limit(a: Boundary, b: Boundary, cc: Boundary, d: Boundary) -> f64 {
        let base = |w: Boundary| -> Point {
            // a ray endpoint distinct from everything in play
            let other = Boundary::Finite(c(137.0, 91.0));
            let g = geodesic_between(other, w).unwrap();
            g.point_at(30.0)
        };
        let (at, bt, ct, dt) = (base(a), base(b), base(cc), base(d));
        0.5 * (dist(at, ct) - dist(ct, bt) + dist(bt, dt) - dist(dt, at))
    }

    #[test]
    fn crossratio_matches_limit_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut done = 0;
        while done < 100 {
            let (a, b, cc, d) = (
                rand_boundary(&mut rng),
                rand_boundary(&mut rng),
                rand_boundary(&mut rng),
                rand_boundary(&mut rng),
            );
            if bnd_eq(a, b) || bnd_eq(cc, d) || bnd_eq(a, cc) || bnd_eq(b, d) || bnd_eq(cc, b)
                || bnd_eq(a, d)
            {
                continue;
            }
            let x = crossratio(a, b, cc, d).unwrap().finite().unwrap();
            let y = crossratio_by_limit(a, b, cc, d);
            assert!((x - y).abs() < 1e-6, "closed {x} vs limit {y}");
            done += 1;
        }
    }

    #[test]
    fn crossratio_continuity_at_coincidence() {
        let a = Boundary::real(0.0);
        let b = Boundary::real(5.0);
        let d = Boundary::real(2.0);
        let mut prev = f64::INFINITY;
        for k in 1..8 {
            let cc = Boundary::real(2.0 + 10f64.powi(-k));
            let v = crossratio(a, b, cc, d).unwrap().finite().unwrap().abs();
            assert!(v < prev);
            prev = v;
        }
        assert!(prev < 1e-6);
    }

    #[test]
    fn hamenstadt_and_crossratio() {
        assert_eq!(hamenstadt_dist(c(1.0, 0.0), c(1.0, 0.0)), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..300 {
            let pts: Vec<Complex64> = (0..4)
                .map(|_| c(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
                .collect();
            let (a, b, cc, d) = (pts[0], pts[1], pts[2], pts[3]);
            if a == b || cc == d || a == cc || b == d || cc == b || a == d {
                continue;
            }
            let via_dh = (hamenstadt_dist(a, cc) * hamenstadt_dist(b, d)
                / (hamenstadt_dist(cc, b) * hamenstadt_dist(d, a)))
            .ln();
            let direct = crossratio(
                Boundary::Finite(a),
                Boundary::Finite(b),
                Boundary::Finite(cc),
                Boundary::Finite(d),
            )
            .unwrap()
            .finite()
            .unwrap();
            assert!((via_dh - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn visual_distance_route() {
        // d_{x0}(a, b) = exp(-Gromov product at x0), rescaled by e^t along
        // the upward ray, converges to |a - b| (height-1 normalization)
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..50 {
            let a = c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let b = c(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            if (a - b).norm() < 0.1 {
                continue;
            }
            let t = 30.0f64;
            let xt = Point::new(c(0.0, 0.0), t.exp());
            // visual distance at xt by the ray limit at s = 60
            let s = 60.0;
            let far = Boundary::Finite(c(211.0, -173.0));
            let as_ = geodesic_between(far, Boundary::Finite(a)).unwrap().point_at(s);
            let bs = geodesic_between(far, Boundary::Finite(b)).unwrap().point_at(s);
            let gromov = 0.5 * (dist(xt, as_) + dist(xt, bs) - dist(as_, bs));
            let est = t.exp() * (-gromov).exp();
            assert!((est - hamenstadt_dist(a, b)).abs() < 1e-6, "est={est} |a-b|={}", (a - b).norm());
        }
    }
}
