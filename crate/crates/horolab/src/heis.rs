//! Heisenberg group and Cygan metrics on the boundary of complex
//! hyperbolic n-space in its Siegel domain model, the unitary matrix
//! group preserving the Hermitian form -z0 zn~ - zn z0~ + |z|^2, and the
//! quaternionic Moebius machinery of real hyperbolic 5-space.

use num_complex::Complex64;

use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Heisenberg group and Cygan distances
// ---------------------------------------------------------------------------

/// A point (zeta, v) of Heis_{2n-1} with underlying space C^{n-1} x R.
#[derive(Debug, Clone, PartialEq)]
pub struct HeisPoint {
    pub zeta: Vec<Complex64>,
    pub v: f64,
}

impl HeisPoint {
    pub fn new(zeta: Vec<Complex64>, v: f64) -> Self {
        HeisPoint { zeta, v }
    }

    pub fn origin(n: usize) -> Self {
        HeisPoint { zeta: vec![Complex64::new(0.0, 0.0); n - 1], v: 0.0 }
    }

    fn zeta_norm_sqr(&self) -> f64 {
        self.zeta.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Hermitian pairing zeta* zeta' = sum conj(zeta_i) zeta'_i.
fn herm(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Group law (zeta, v)(zeta', v') = (zeta + zeta', v + v' - 2 Im zeta* zeta').
pub fn heis_mul(p: &HeisPoint, q: &HeisPoint) -> HeisPoint {
    assert_eq!(p.zeta.len(), q.zeta.len());
    let zeta = p.zeta.iter().zip(&q.zeta).map(|(a, b)| a + b).collect();
    HeisPoint { zeta, v: p.v + q.v - 2.0 * herm(&p.zeta, &q.zeta).im }
}

pub fn heis_inv(p: &HeisPoint) -> HeisPoint {
    HeisPoint { zeta: p.zeta.iter().map(|z| -z).collect(), v: -p.v }
}

/// Cygan gauge at the origin: (|zeta|^4 + v^2)^{1/4}.
fn cygan_gauge(p: &HeisPoint) -> f64 {
    let z2 = p.zeta_norm_sqr();
    (z2 * z2 + p.v * p.v).sqrt().sqrt()
}

/// Modified Cygan gauge at the origin: ((|zeta|^4 + v^2)^{1/2} + |zeta|^2)^{1/2}.
fn cygan_mod_gauge(p: &HeisPoint) -> f64 {
    let z2 = p.zeta_norm_sqr();
    ((z2 * z2 + p.v * p.v).sqrt() + z2).sqrt()
}

/// Left-invariant Cygan distance.
pub fn cygan(p: &HeisPoint, q: &HeisPoint) -> f64 {
    cygan_gauge(&heis_mul(&heis_inv(p), q))
}

/// Left-invariant modified Cygan distance.
pub fn cygan_mod(p: &HeisPoint, q: &HeisPoint) -> f64 {
    cygan_mod_gauge(&heis_mul(&heis_inv(p), q))
}

// ---------------------------------------------------------------------------
// Siegel domain
// ---------------------------------------------------------------------------

/// A point (w0, w) of C x C^{n-1}; interior of the Siegel domain iff
/// 2 Re w0 - |w|^2 > 0, boundary iff = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct SiegelPoint {
    pub w0: Complex64,
    pub w: Vec<Complex64>,
}

impl SiegelPoint {
    pub fn new(w0: Complex64, w: Vec<Complex64>) -> Self {
        SiegelPoint { w0, w }
    }

    /// The defining quantity 2 Re w0 - |w|^2.
    pub fn defect(&self) -> f64 {
        2.0 * self.w0.re - self.w.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn is_interior(&self) -> bool {
        self.defect() > 0.0
    }

    pub fn is_boundary(&self) -> bool {
        self.defect().abs() <= 1e-12
    }

    /// The boundary point u_{zeta,v}(0,0) = (|zeta|^2/2 - iv/2, zeta).
    pub fn from_heis(p: &HeisPoint) -> Self {
        SiegelPoint {
            w0: Complex64::new(p.zeta_norm_sqr() / 2.0, -p.v / 2.0),
            w: p.zeta.clone(),
        }
    }

    /// Inverse of `from_heis`; requires a finite boundary point.
    pub fn to_heis(&self) -> Result<HeisPoint> {
        if !self.is_boundary() {
            return Err(Error::Domain("not a boundary point of the Siegel domain".into()));
        }
        Ok(HeisPoint { zeta: self.w.clone(), v: -2.0 * self.w0.im })
    }
}

// ---------------------------------------------------------------------------
// The unitary group of the Hermitian form q
// ---------------------------------------------------------------------------

/// An (n+1) x (n+1) complex matrix acting projectively on the Siegel domain.
#[derive(Debug, Clone)]
pub struct UQMatrix {
    pub m: Vec<Vec<Complex64>>,
}

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn cone() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

impl UQMatrix {
    pub fn dim(&self) -> usize {
        self.m.len()
    }

    pub fn identity(n: usize) -> Self {
        let mut m = vec![vec![czero(); n + 1]; n + 1];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = cone();
        }
        UQMatrix { m }
    }

    /// The matrix of the form q itself: antidiagonal blocks (-1, I, -1).
    pub fn q_form(n: usize) -> Self {
        let mut x = UQMatrix::identity(n);
        x.m[0][0] = czero();
        x.m[n][n] = czero();
        x.m[0][n] = -cone();
        x.m[n][0] = -cone();
        UQMatrix { m: x.m }
    }

    /// The inversion antidiagonal(1, I, 1), swapping 0 and infinity.
    pub fn x0(n: usize) -> Self {
        let mut x = UQMatrix::identity(n);
        x.m[0][0] = czero();
        x.m[n][n] = czero();
        x.m[0][n] = cone();
        x.m[n][0] = cone();
        UQMatrix { m: x.m }
    }

    /// The dilation diag(lambda, I, 1/conj(lambda)), a form-preserving map
    /// fixing 0 and infinity.
    pub fn dilation(n: usize, lambda: Complex64) -> Self {
        let mut x = UQMatrix::identity(n);
        x.m[0][0] = lambda;
        x.m[n][n] = cone() / lambda.conj();
        x
    }

    pub fn mul(&self, o: &UQMatrix) -> UQMatrix {
        let k = self.dim();
        let mut m = vec![vec![czero(); k]; k];
        for i in 0..k {
            for j in 0..k {
                m[i][j] = (0..k).map(|l| self.m[i][l] * o.m[l][j]).sum();
            }
        }
        UQMatrix { m }
    }

    pub fn adjoint(&self) -> UQMatrix {
        let k = self.dim();
        let mut m = vec![vec![czero(); k]; k];
        for i in 0..k {
            for j in 0..k {
                m[i][j] = self.m[j][i].conj();
            }
        }
        UQMatrix { m }
    }

    /// The (n+1, 1) block coefficient; zero exactly when the map fixes
    /// infinity.
    pub fn c_entry(&self) -> Complex64 {
        self.m[self.dim() - 1][0]
    }

    /// Projective action on homogeneous coordinates [w0 : w : 1] (boundary
    /// and interior alike); `None` encodes infinity = [1 : 0 : 0].
    pub fn apply(&self, p: Option<&SiegelPoint>) -> Option<SiegelPoint> {
        let k = self.dim();
        let hom: Vec<Complex64> = match p {
            None => {
                let mut h = vec![czero(); k];
                h[0] = cone();
                h
            }
            Some(sp) => {
                let mut h = Vec::with_capacity(k);
                h.push(sp.w0);
                h.extend_from_slice(&sp.w);
                h.push(cone());
                h
            }
        };
        let img: Vec<Complex64> =
            (0..k).map(|i| (0..k).map(|j| self.m[i][j] * hom[j]).sum()).collect();
        let scale: f64 = img.iter().map(|z| z.norm()).sum();
        if img[k - 1].norm() <= 1e-12 * scale {
            return None;
        }
        let w0 = img[0] / img[k - 1];
        let w = img[1..k - 1].iter().map(|z| z / img[k - 1]).collect();
        Some(SiegelPoint { w0, w })
    }
}

/// Membership in U_Q: X invertible with inverse Q^{-1} X* Q, checked as
/// X (Q^{-1} X* Q) = I within 1e-9.
pub fn uq_check(x: &UQMatrix) -> bool {
    let n = x.dim() - 1;
    let q = UQMatrix::q_form(n);
    // Q is its own inverse
    let inv = q.mul(&x.adjoint()).mul(&q);
    let prod = x.mul(&inv);
    let id = UQMatrix::identity(n);
    let mut worst = 0.0f64;
    for i in 0..=n {
        for j in 0..=n {
            worst = worst.max((prod.m[i][j] - id.m[i][j]).norm());
        }
    }
    worst <= 1e-9
}

/// The Heisenberg embedding u_{zeta,v} = (1, zeta*, |zeta|^2/2 - iv/2;
/// 0, I, zeta; 0, 0, 1).
pub fn u_matrix(p: &HeisPoint) -> UQMatrix {
    let k = p.zeta.len();
    let mut x = UQMatrix::identity(k + 1);
    for (j, z) in p.zeta.iter().enumerate() {
        x.m[0][j + 1] = z.conj();
        x.m[j + 1][k + 1] = *z;
    }
    x.m[0][k + 1] = Complex64::new(p.zeta_norm_sqr() / 2.0, -p.v / 2.0);
    x
}

/// The height parameter s for which the horoball X0 H_s centered at (0,0)
/// is tangent to the geodesic from infinity to u_{zeta,v}(0,0): the
/// double-root condition of s e^{-2t} + (s|zeta|^2 - 2)e^{-t}
/// + (s/4)(|zeta|^4 + v^2) = 0.
pub fn tangency_s(p: &HeisPoint) -> Result<f64> {
    let z2 = p.zeta_norm_sqr();
    let gauge = (z2 * z2 + p.v * p.v).sqrt();
    if gauge <= 0.0 {
        return Err(Error::Domain("tangency height at the origin".into()));
    }
    Ok(2.0 / (gauge + z2))
}

/// Distance (renormalized metric, max curvature -1) between H_s and X H_s:
/// log |c| + log(s/2). Requires X not to fix infinity.
pub fn horoball_dist_complex(x: &UQMatrix, s: f64) -> Result<f64> {
    let c = x.c_entry();
    let scale: f64 = x.m.iter().flatten().map(|z| z.norm()).sum();
    if c.norm() <= 1e-12 * scale {
        return Err(Error::Domain("matrix fixes infinity (c = 0)".into()));
    }
    if s <= 0.0 {
        return Err(Error::Precondition("horoball height must be positive".into()));
    }
    Ok(c.norm().ln() + (s / 2.0).ln())
}

/// Distance (renormalized metric) between H_{s0} and the horoball centered
/// at xi tangent to the geodesic from infinity to xi':
/// -log d'_Cyg(xi, xi') + (1/2) log(s0/2).
pub fn horoball_dist_via_cygan(xi: &SiegelPoint, xi2: &SiegelPoint, s0: f64) -> Result<f64> {
    if s0 <= 0.0 {
        return Err(Error::Precondition("horoball height must be positive".into()));
    }
    let p = xi.to_heis()?;
    let q = xi2.to_heis()?;
    let d = cygan_mod(&p, &q);
    if d <= 0.0 {
        return Err(Error::Domain("coinciding boundary points".into()));
    }
    Ok(-d.ln() + 0.5 * (s0 / 2.0).ln())
}

/// Distance along the axis c0(t) = (e^{-t}, 0) between (x, 0) and (y, 0)
/// for the renormalized metric: half the curvature -1 halfplane distance.
pub fn c0_dist_renormalized(x: f64, y: f64) -> Result<f64> {
    if x <= 0.0 || y <= 0.0 {
        return Err(Error::Precondition("axis coordinates must be positive".into()));
    }
    Ok(0.5 * (x / y).ln().abs())
}

// ---------------------------------------------------------------------------
// Quaternions and real hyperbolic 5-space
// ---------------------------------------------------------------------------

/// A quaternion x1 + x2 i + x3 j + x4 k stored as four reals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub x: [f64; 4],
}

impl Quaternion {
    pub fn new(x1: f64, x2: f64, x3: f64, x4: f64) -> Self {
        Quaternion { x: [x1, x2, x3, x4] }
    }

    pub fn zero() -> Self {
        Quaternion { x: [0.0; 4] }
    }

    pub fn one() -> Self {
        Quaternion { x: [1.0, 0.0, 0.0, 0.0] }
    }

    pub fn real(t: f64) -> Self {
        Quaternion { x: [t, 0.0, 0.0, 0.0] }
    }

    pub fn conj(self) -> Self {
        Quaternion { x: [self.x[0], -self.x[1], -self.x[2], -self.x[3]] }
    }

    /// Reduced norm N(z) = |z|^2.
    pub fn norm_sqr(self) -> f64 {
        self.x.iter().map(|t| t * t).sum()
    }

    pub fn abs(self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Reduced trace z + conj(z) = 2 x1.
    pub fn tr(self) -> f64 {
        2.0 * self.x[0]
    }

    pub fn add(self, o: Quaternion) -> Quaternion {
        let mut x = self.x;
        for (a, b) in x.iter_mut().zip(o.x) {
            *a += b;
        }
        Quaternion { x }
    }

    pub fn sub(self, o: Quaternion) -> Quaternion {
        let mut x = self.x;
        for (a, b) in x.iter_mut().zip(o.x) {
            *a -= b;
        }
        Quaternion { x }
    }

    pub fn neg(self) -> Quaternion {
        Quaternion { x: [-self.x[0], -self.x[1], -self.x[2], -self.x[3]] }
    }

    pub fn mul(self, o: Quaternion) -> Quaternion {
        let [a1, a2, a3, a4] = self.x;
        let [b1, b2, b3, b4] = o.x;
        Quaternion {
            x: [
                a1 * b1 - a2 * b2 - a3 * b3 - a4 * b4,
                a1 * b2 + a2 * b1 + a3 * b4 - a4 * b3,
                a1 * b3 - a2 * b4 + a3 * b1 + a4 * b2,
                a1 * b4 + a2 * b3 - a3 * b2 + a4 * b1,
            ],
        }
    }

    pub fn scale(self, t: f64) -> Quaternion {
        Quaternion { x: [self.x[0] * t, self.x[1] * t, self.x[2] * t, self.x[3] * t] }
    }

    pub fn inv(self) -> Result<Quaternion> {
        let n = self.norm_sqr();
        if n <= 0.0 {
            return Err(Error::Domain("division by zero quaternion".into()));
        }
        Ok(self.conj().scale(1.0 / n))
    }
}

/// A 2 x 2 quaternionic matrix (a, b; c, d).
#[derive(Debug, Clone, Copy)]
pub struct QMat2 {
    pub a: Quaternion,
    pub b: Quaternion,
    pub c: Quaternion,
    pub d: Quaternion,
}

impl QMat2 {
    pub fn new(a: Quaternion, b: Quaternion, c: Quaternion, d: Quaternion) -> Self {
        QMat2 { a, b, c, d }
    }

    pub fn identity() -> Self {
        QMat2 {
            a: Quaternion::one(),
            b: Quaternion::zero(),
            c: Quaternion::zero(),
            d: Quaternion::one(),
        }
    }

    pub fn mul(&self, o: &QMat2) -> QMat2 {
        QMat2 {
            a: self.a.mul(o.a).add(self.b.mul(o.c)),
            b: self.a.mul(o.b).add(self.b.mul(o.d)),
            c: self.c.mul(o.a).add(self.d.mul(o.c)),
            d: self.c.mul(o.b).add(self.d.mul(o.d)),
        }
    }

    /// Inverse by Schur complement, pivoting on whichever of a, c is
    /// invertible.
    pub fn inv(&self) -> Result<QMat2> {
        if self.a.norm_sqr() > 0.0 {
            let ai = self.a.inv()?;
            let s = self.d.sub(self.c.mul(ai).mul(self.b)).inv()?;
            let aibs = ai.mul(self.b).mul(s);
            Ok(QMat2 {
                a: ai.add(aibs.mul(self.c).mul(ai)),
                b: aibs.neg(),
                c: s.mul(self.c).mul(ai).neg(),
                d: s,
            })
        } else if self.c.norm_sqr() > 0.0 {
            // row-swapped pivot: invert (c, d; a, b) and swap the columns of
            // the result
            let sw = QMat2 { a: self.c, b: self.d, c: self.a, d: self.b }.inv()?;
            Ok(QMat2 { a: sw.b, b: sw.a, c: sw.d, d: sw.c })
        } else {
            Err(Error::Domain("first column is zero".into()))
        }
    }
}

/// Dieudonne determinant |ad - a c a^{-1} b| (a != 0) or |cb - c a c^{-1} d|
/// (c != 0), a group morphism GL_2(H) -> R_+^*.
pub fn dieudonne(m: &QMat2) -> Result<f64> {
    if m.a.norm_sqr() > 0.0 {
        Ok(m.a.mul(m.d).sub(m.a.mul(m.c).mul(m.a.inv()?).mul(m.b)).abs())
    } else if m.c.norm_sqr() > 0.0 {
        Ok(m.c.mul(m.b).sub(m.c.mul(m.a).mul(m.c.inv()?).mul(m.d)).abs())
    } else {
        Err(Error::Domain("dieudonne needs a != 0 or c != 0".into()))
    }
}

/// Moebius action of SL_2(H) on H union {infinity} (None = infinity):
/// z -> (az + b)(cz + d)^{-1}.
pub fn sl2h_act(m: &QMat2, z: Option<Quaternion>) -> Result<Option<Quaternion>> {
    match z {
        None => {
            if m.c.norm_sqr() > 0.0 {
                Ok(Some(m.a.mul(m.c.inv()?)))
            } else {
                Ok(None)
            }
        }
        Some(z) => {
            let den = m.c.mul(z).add(m.d);
            let num = m.a.mul(z).add(m.b);
            if den.abs() <= 1e-12 * (1.0 + num.abs()) {
                return Ok(None);
            }
            Ok(Some(num.mul(den.inv()?)))
        }
    }
}

/// Vertical coordinate of g(z, t) in the upper halfspace model:
/// t / (|cz + d|^2 + |c|^2 t^2).
pub fn vertical(m: &QMat2, z: Quaternion, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Err(Error::Precondition("vertical coordinate must be positive".into()));
    }
    Ok(t / (m.c.mul(z).add(m.d).norm_sqr() + m.c.norm_sqr() * t * t))
}

/// Distance between the horoballs H_s and g H_s in H^5_R:
/// 2 log |c| + 2 log s. Requires g not to fix infinity.
pub fn horoball_dist_h5(m: &QMat2, s: f64) -> Result<f64> {
    if m.c.norm_sqr() <= 0.0 {
        return Err(Error::Domain("matrix fixes infinity (c = 0)".into()));
    }
    if s <= 0.0 {
        return Err(Error::Precondition("horoball height must be positive".into()));
    }
    Ok(2.0 * m.c.abs().ln() + 2.0 * s.ln())
}

/// Residuals |N(ad) + N(bc) + sigma Tr(a conj(c) d conj(b)) - 1| for
/// sigma = +1 and sigma = -1; exactly one sign should vanish on
/// unit-determinant matrices (the printed sign is typographically
/// uncertain, so both are reported).
pub fn eq35_check(m: &QMat2) -> (f64, f64) {
    let base = m.a.mul(m.d).norm_sqr() + m.b.mul(m.c).norm_sqr();
    let cross = m.a.mul(m.c.conj()).mul(m.d).mul(m.b.conj()).tr();
    ((base + cross - 1.0).abs(), (base - cross - 1.0).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rq(rng: &mut impl Rng) -> Quaternion {
        Quaternion::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        )
    }

    fn rc(rng: &mut impl Rng) -> Complex64 {
        Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))
    }

    fn rheis(rng: &mut impl Rng, n: usize) -> HeisPoint {
        let zeta = (0..n - 1).map(|_| rc(rng)).collect();
        HeisPoint::new(zeta, rng.gen_range(-4.0..4.0))
    }

    /// Random unit-determinant quaternionic matrix: a product of shears and
    /// a unit diagonal.
    fn r_sl2h(rng: &mut impl Rng, factors: usize) -> QMat2 {
        let mut m = QMat2::identity();
        for _ in 0..factors {
            let q = rq(rng);
            let f = match rng.gen_range(0..3) {
                0 => QMat2::new(Quaternion::one(), q, Quaternion::zero(), Quaternion::one()),
                1 => QMat2::new(Quaternion::one(), Quaternion::zero(), q, Quaternion::one()),
                _ => {
                    let u = q.scale(1.0 / q.abs().max(1e-9));
                    let w = rq(rng);
                    let w = w.scale(1.0 / w.abs().max(1e-9));
                    QMat2::new(u, Quaternion::zero(), Quaternion::zero(), w)
                }
            };
            m = m.mul(&f);
        }
        m
    }

    fn rand_interior(rng: &mut impl Rng, n: usize) -> SiegelPoint {
        let w: Vec<Complex64> = (0..n - 1).map(|_| rc(rng)).collect();
        let w2: f64 = w.iter().map(|z| z.norm_sqr()).sum();
        let re = (w2 + rng.gen_range(-2.0..1.5f64).exp()) / 2.0;
        SiegelPoint::new(Complex64::new(re, rng.gen_range(-2.0..2.0)), w)
    }

    #[test]
    fn heis_group_axioms() {
        for n in [2usize, 3] {
            let mut rng = ChaCha8Rng::seed_from_u64(61);
            let e = HeisPoint::origin(n);
            for _ in 0..1000 {
                let (p, q, r) = (rheis(&mut rng, n), rheis(&mut rng, n), rheis(&mut rng, n));
                assert_eq!(heis_mul(&e, &p), p);
                let lhs = heis_mul(&heis_mul(&p, &q), &r);
                let rhs = heis_mul(&p, &heis_mul(&q, &r));
                assert!((lhs.v - rhs.v).abs() <= 1e-12);
                let pi = heis_mul(&heis_inv(&p), &p);
                assert!(pi.v.abs() <= 1e-12 && pi.zeta.iter().all(|z| z.norm() == 0.0));
            }
        }
        // (1, 0)(i, 0) = (1+i, -2 Im(conj(1) i)) = (1+i, -2)
        let a = HeisPoint::new(vec![Complex64::new(1.0, 0.0)], 0.0);
        let b = HeisPoint::new(vec![Complex64::new(0.0, 1.0)], 0.0);
        let ab = heis_mul(&a, &b);
        assert_eq!(ab.zeta[0], Complex64::new(1.0, 1.0));
        assert_eq!(ab.v, -2.0);
    }

    #[test]
    fn cygan_distances_sandwich_and_invariance() {
        for n in [2usize, 3] {
            let mut rng = ChaCha8Rng::seed_from_u64(62);
            for _ in 0..10_000 {
                let (p, q) = (rheis(&mut rng, n), rheis(&mut rng, n));
                let d = cygan(&p, &q);
                let dm = cygan_mod(&p, &q);
                assert!(d <= dm + 1e-12 && dm <= 2f64.sqrt() * d + 1e-12);
                let g = rheis(&mut rng, n);
                let (gp, gq) = (heis_mul(&g, &p), heis_mul(&g, &q));
                assert!((cygan(&gp, &gq) - d).abs() <= 1e-12 * (1.0 + d));
                assert!((cygan_mod(&gp, &gq) - dm).abs() <= 1e-12 * (1.0 + dm));
            }
        }
        // triangle inequality, sampled
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        for _ in 0..2000 {
            let (p, q, r) = (rheis(&mut rng, 2), rheis(&mut rng, 2), rheis(&mut rng, 2));
            assert!(cygan(&p, &r) <= cygan(&p, &q) + cygan(&q, &r) + 1e-12);
            assert!(cygan_mod(&p, &r) <= cygan_mod(&p, &q) + cygan_mod(&q, &r) + 1e-12);
        }
    }

    #[test]
    fn boundary_gauge_matches_siegel_coordinates() {
        // d'_Cyg((w0,w),(0,0)) = sqrt(2|w0| + |w|^2) on boundary points
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        for _ in 0..1000 {
            let p = rheis(&mut rng, 2);
            let sp = SiegelPoint::from_heis(&p);
            assert!(sp.is_boundary());
            let want = (2.0 * sp.w0.norm() + sp.w[0].norm_sqr()).sqrt();
            let got = cygan_mod(&p, &HeisPoint::origin(2));
            assert!((got - want).abs() <= 1e-12 * (1.0 + want));
            let q = sp.to_heis().unwrap();
            assert!((q.v - p.v).abs() <= 1e-12);
        }
    }

    #[test]
    fn u_matrix_morphism_and_uq_membership() {
        for n in [2usize, 3] {
            let mut rng = ChaCha8Rng::seed_from_u64(65);
            assert!(uq_check(&UQMatrix::x0(n)));
            assert!(uq_check(&UQMatrix::identity(n)));
            let id = u_matrix(&HeisPoint::origin(n));
            for i in 0..=n {
                for j in 0..=n {
                    assert_eq!(id.m[i][j], UQMatrix::identity(n).m[i][j]);
                }
            }
            for _ in 0..1000 {
                let (p, q) = (rheis(&mut rng, n), rheis(&mut rng, n));
                let up = u_matrix(&p);
                assert!(uq_check(&up));
                let prod = up.mul(&u_matrix(&q));
                let upq = u_matrix(&heis_mul(&p, &q));
                for i in 0..=n {
                    for j in 0..=n {
                        assert!((prod.m[i][j] - upq.m[i][j]).norm() <= 1e-12);
                    }
                }
            }
            // a non-example
            let mut bad = UQMatrix::identity(n);
            bad.m[0][0] = Complex64::new(2.0, 0.0);
            assert!(!uq_check(&bad));
        }
    }

    #[test]
    fn heisenberg_preserves_horoballs_at_infinity() {
        for n in [2usize, 3] {
            let mut rng = ChaCha8Rng::seed_from_u64(66);
            for _ in 0..1000 {
                let p = rand_interior(&mut rng, n);
                let g = u_matrix(&rheis(&mut rng, n));
                let gp = g.apply(Some(&p)).expect("interior stays finite");
                // u_{zeta,v} preserves every H_s, i.e. the defect itself
                assert!((gp.defect() - p.defect()).abs() <= 1e-9 * (1.0 + p.defect().abs()));
            }
        }
    }

    #[test]
    fn x0_image_of_horoball_is_sublevel_set() {
        // X0 H_s = {2 Re w0 - |w|^2 >= s |w0|^2}: membership via the matrix
        // action agrees with the inequality
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let x0 = UQMatrix::x0(2);
        let s = 0.7;
        let mut seen = [0usize; 2];
        for _ in 0..1000 {
            let p = rand_interior(&mut rng, 2);
            let by_inequality = p.defect() >= s * p.w0.norm_sqr();
            // p in X0 H_s iff X0^{-1} p = X0 p in H_s
            let pre = x0.apply(Some(&p)).expect("interior image finite");
            let by_action = pre.defect() >= s;
            // skip samples within float noise of the horosphere
            if (p.defect() - s * p.w0.norm_sqr()).abs() <= 1e-9 {
                continue;
            }
            assert_eq!(by_inequality, by_action);
            seen[by_inequality as usize] += 1;
        }
        assert!(seen[0] > 50 && seen[1] > 50, "degenerate sampling {seen:?}");
    }

    #[test]
    fn tangency_height_examples_and_discriminant() {
        let p = HeisPoint::new(vec![Complex64::new(0.0, 0.0)], 2.0);
        assert!((tangency_s(&p).unwrap() - 1.0).abs() <= 1e-15);
        assert!(tangency_s(&HeisPoint::origin(2)).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(68);
        for _ in 0..1000 {
            let p = rheis(&mut rng, 2);
            let s = tangency_s(&p).unwrap();
            let z2 = p.zeta[0].norm_sqr();
            // discriminant of s e^{-2t} + (s z2 - 2) e^{-t} + (s/4)(z2^2+v^2)
            let disc = (s * z2 - 2.0) * (s * z2 - 2.0) - s * s * (z2 * z2 + p.v * p.v);
            assert!(disc.abs() <= 1e-9, "disc {disc:.3e}");
            // algebraic identity with the modified Cygan gauge: s d'^2 = 2
            let d = cygan_mod(&HeisPoint::origin(2), &p);
            assert!((s * d * d - 2.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn horoball_distance_two_routes() {
        // tangency of H_2 and X0 H_2
        assert!(horoball_dist_complex(&UQMatrix::x0(2), 2.0).unwrap().abs() <= 1e-15);
        assert!(horoball_dist_complex(&UQMatrix::identity(2), 2.0).is_err());
        for n in [2usize, 3] {
            let mut rng = ChaCha8Rng::seed_from_u64(69);
            let x0 = UQMatrix::x0(n);
            for _ in 0..100 {
                let a = rheis(&mut rng, n);
                let b = rheis(&mut rng, n);
                let s = tangency_s(&b).unwrap();
                // X H_s = u_a X0 H_s is centered at xi = u_a(0,0) and tangent
                // to the geodesic from infinity to xi' = u_a u_b(0,0)
                let x = u_matrix(&a).mul(&x0).mul(&u_matrix(&b));
                let route1 = horoball_dist_complex(&x, s).unwrap();
                let xi = SiegelPoint::from_heis(&a);
                let xi2 = SiegelPoint::from_heis(&heis_mul(&a, &b));
                let route2 = horoball_dist_via_cygan(&xi, &xi2, s).unwrap();
                assert!((route1 - route2).abs() <= 1e-9, "{route1} vs {route2}");
                // scaling in s
                let r_scaled = horoball_dist_complex(&x, 3.0 * s).unwrap();
                assert!((r_scaled - route1 - 3f64.ln()).abs() <= 1e-12);
                // a dilation changes |c|, exercising the log|c| term
                let lam = Complex64::new(rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0));
                let xd = UQMatrix::dilation(n, lam).mul(&x);
                assert!(uq_check(&xd));
                let want = route1 - lam.norm().ln();
                assert!((horoball_dist_complex(&xd, s).unwrap() - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn c0_axis_distance_display() {
        // d'((s0/2, 0), (2/s, 0)) = (1/2)(log(s0/2) - log(2/s))
        for (s0, s) in [(2.0, 2.0), (5.0, 1.0), (8.0, 0.25)] {
            let want = 0.5 * ((s0 / 2.0f64).ln() - (2.0 / s as f64).ln());
            assert!((c0_dist_renormalized(s0 / 2.0, 2.0 / s).unwrap() - want.abs()).abs() <= 1e-15);
        }
    }

    #[test]
    fn dieudonne_multiplicative() {
        assert!((dieudonne(&QMat2::identity()).unwrap() - 1.0).abs() <= 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        for _ in 0..1000 {
            let m = r_sl2h(&mut rng, 3);
            let nmat = r_sl2h(&mut rng, 3);
            let dm = dieudonne(&m).unwrap();
            let dn = dieudonne(&nmat).unwrap();
            let dmn = dieudonne(&m.mul(&nmat)).unwrap();
            assert!((dmn - dm * dn).abs() <= 1e-9 * (1.0 + dm * dn), "{dmn} vs {}", dm * dn);
            // shears and unit diagonals have determinant 1
            assert!((dm - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn sl2h_action_bijection_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..500 {
            let m = r_sl2h(&mut rng, 4);
            let mi = m.inv().unwrap();
            // inverse is a two-sided inverse
            let p = m.mul(&mi);
            assert!(p.a.sub(Quaternion::one()).abs() <= 1e-9);
            assert!(p.b.abs() <= 1e-9 && p.c.abs() <= 1e-9);
            let z = Some(rq(&mut rng));
            let back = sl2h_act(&mi, sl2h_act(&m, z).unwrap()).unwrap();
            let err = back.unwrap().sub(z.unwrap()).abs();
            assert!(err <= 1e-7, "roundtrip error {err:.3e}");
            // infinity roundtrip
            let winf = sl2h_act(&mi, sl2h_act(&m, None).unwrap()).unwrap();
            assert!(winf.is_none() || winf.unwrap().abs() > 1e6);
        }
        // the pole goes to infinity
        let g = QMat2::new(
            Quaternion::zero(),
            Quaternion::one(),
            Quaternion::one().neg(),
            Quaternion::zero(),
        );
        assert!(sl2h_act(&g, Some(Quaternion::zero())).unwrap().is_none());
    }

    #[test]
    fn vertical_matches_reflection_decomposition() {
        // Oracle from the proof of the vertical-coordinate formula:
        // g = phi . sigma with sigma the reflection in the isometric sphere
        // (center -c^{-1}d, radius 1/|c|) and phi a height-preserving
        // Euclidean isometry. The height of g(z,t) is the height after sigma.
        let mut rng = ChaCha8Rng::seed_from_u64(72);
        for _ in 0..1000 {
            let m = r_sl2h(&mut rng, 4);
            if m.c.abs() < 1e-3 {
                continue;
            }
            let z = rq(&mut rng);
            let t = rng.gen_range(-1.5..1.5f64).exp();
            let o = m.c.inv().unwrap().mul(m.d).neg();
            let rad2 = 1.0 / m.c.norm_sqr();
            let denom = z.sub(o).norm_sqr() + t * t;
            let h_sigma = rad2 * t / denom;
            let got = vertical(&m, z, t).unwrap();
            assert!((got - h_sigma).abs() <= 1e-9 * (1.0 + h_sigma));
            // the boundary action agrees with phi . sigma at t = 0
            let sigma_z = o.add(z.sub(o).scale(rad2 / z.sub(o).norm_sqr()));
            let phi = |w: Quaternion| {
                m.b.sub(m.a.mul(m.c.inv().unwrap()).mul(m.d))
                    .mul(w.conj().mul(m.c.conj()).add(m.d.conj()))
                    .add(m.a.mul(m.c.inv().unwrap()))
            };
            let via_decomp = phi(sigma_z);
            let direct = sl2h_act(&m, Some(z)).unwrap().unwrap();
            assert!(via_decomp.sub(direct).abs() <= 1e-7 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn h5_horoball_distance() {
        // g = (0, 1; -1, 0) at s = 1: tangency, distance 0
        let g = QMat2::new(
            Quaternion::zero(),
            Quaternion::one(),
            Quaternion::one().neg(),
            Quaternion::zero(),
        );
        assert!(horoball_dist_h5(&g, 1.0).unwrap().abs() <= 1e-15);
        assert!(horoball_dist_h5(&QMat2::identity(), 1.0).is_err());
        // oracle: g sends (-c^{-1}d, s) to the top of g H_s, whose height is
        // 1/(|c|^2 s); the gap to H_s along the vertical line is ln(s/h)
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for _ in 0..500 {
            let m = r_sl2h(&mut rng, 4);
            if m.c.abs() < 1e-3 {
                continue;
            }
            let s = rng.gen_range(0.2..1.2f64).exp();
            let o = m.c.inv().unwrap().mul(m.d).neg();
            let top = vertical(&m, o, s).unwrap();
            let want = (s / top).ln();
            assert!((horoball_dist_h5(&m, s).unwrap() - want).abs() <= 1e-9 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn eq35_sign_is_uniformly_minus() {
        let (rp, rm) = eq35_check(&QMat2::identity());
        assert!(rp <= 1e-15 && rm <= 1e-15);
        let upper = QMat2::new(
            Quaternion::one(),
            Quaternion::new(1.0, 2.0, -0.5, 0.3),
            Quaternion::zero(),
            Quaternion::one(),
        );
        let (rp, rm) = eq35_check(&upper);
        assert!(rp <= 1e-15 && rm <= 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(74);
        let (mut minus_ok, mut plus_ok) = (0usize, 0usize);
        let mut split = 0usize;
        for _ in 0..1000 {
            let m = r_sl2h(&mut rng, 4);
            let (rp, rm) = eq35_check(&m);
            if rm <= 1e-9 {
                minus_ok += 1;
            }
            if rp <= 1e-9 {
                plus_ok += 1;
            }
            if rp <= 1e-9 && rm <= 1e-9 {
                split += 1;
            }
        }
        // the minus sign is the one consistent with the unit Dieudonne
        // determinant (in the commutative case N(ad) + N(bc)
        // - 2 Re(ad conj(bc)) = |ad - bc|^2)
        assert_eq!(minus_ok, 1000, "minus sign fails on {} cases", 1000 - minus_ok);
        assert!(plus_ok == split, "plus sign passed a non-degenerate case");
    }
}
