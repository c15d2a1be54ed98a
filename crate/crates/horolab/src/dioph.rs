//! Continued fractions, Ford circle/sphere families, real and Gaussian
//! approximation constants, and the excursion-height sequence of the
//! modular geodesic attached to an irrational number.

use num_complex::Complex64;

use crate::models::Horoball;
use crate::{Error, Result};

/// A continued fraction [a0; a1, a2, ...]. `period` marks the length of the
/// trailing repeating block of `digits` for quadratic irrationals.
#[derive(Debug, Clone)]
pub struct CFExpansion {
    pub a0: i64,
    pub digits: Vec<u64>,
    pub period: Option<usize>,
}

impl CFExpansion {
    pub fn new(a0: i64, digits: Vec<u64>, period: Option<usize>) -> Result<Self> {
        if digits.iter().any(|&d| d == 0) {
            return Err(Error::Precondition("continued fraction digits must be >= 1".into()));
        }
        if let Some(p) = period {
            if p == 0 || p > digits.len() {
                return Err(Error::Precondition("periodic block must be nonempty".into()));
            }
        }
        Ok(CFExpansion { a0, digits, period })
    }

    /// Digit a_{i+1} (index into `digits`), extending cyclically when the
    /// expansion is marked periodic.
    fn digit_at(&self, i: usize) -> Option<u64> {
        if i < self.digits.len() {
            return Some(self.digits[i]);
        }
        let p = self.period?;
        let pre = self.digits.len() - p;
        Some(self.digits[pre + (i - pre) % p])
    }
}

/// Number of unfolded digits that pins a continued fraction value well below
/// 1e-12 (the worst case, all-ones, converges like the golden ratio).
const UNFOLD: usize = 300;

/// Euclidean-algorithm expansion of an irrational. Rational inputs surface
/// as an exhausted fractional part or a digit blow-up.
pub fn cf_expand(x: f64, n: usize) -> Result<CFExpansion> {
    let a0 = x.floor() as i64;
    let mut frac = x - x.floor();
    let mut digits = Vec::with_capacity(n);
    for _ in 0..n {
        if frac < 1e-12 {
            return Err(Error::Domain("rational input: finite continued fraction".into()));
        }
        let inv = 1.0 / frac;
        let d = inv.floor();
        if d > 1e15 {
            return Err(Error::Domain("rational input: digit blow-up".into()));
        }
        digits.push(d as u64);
        frac = inv - d;
    }
    CFExpansion::new(a0, digits, None)
}

/// Value of the tail [a_{start+1}; a_{start+2}, ...] by backward unfolding.
pub(crate) fn tail_value(e: &CFExpansion, start: usize) -> Result<f64> {
    if e.digit_at(start).is_none() {
        return Err(Error::Domain("expansion too short for the requested tail".into()));
    }
    let mut v = f64::INFINITY;
    for i in (start..start + UNFOLD).rev() {
        if let Some(d) = e.digit_at(i) {
            v = d as f64 + 1.0 / v;
        }
    }
    Ok(v)
}

/// Value of the backward fraction [0; a_{end+1}, a_end, ..., a_1].
pub(crate) fn back_value(e: &CFExpansion, end: usize) -> Result<f64> {
    let mut v = f64::INFINITY;
    for i in 0..=end {
        let d = e
            .digit_at(i)
            .ok_or_else(|| Error::Domain("expansion too short for the backward value".into()))?;
        v = d as f64 + 1.0 / v;
    }
    Ok(1.0 / v)
}

/// Numeric value of the expansion (periodic tails unfolded to convergence).
pub fn cf_value(e: &CFExpansion) -> f64 {
    let n = if e.period.is_some() { UNFOLD } else { e.digits.len() };
    let mut v = f64::INFINITY;
    for i in (0..n).rev() {
        if let Some(d) = e.digit_at(i) {
            v = d as f64 + 1.0 / v;
        }
    }
    e.a0 as f64 + 1.0 / v
}

/// The convergents (p_0, q_0), ..., (p_n, q_n).
pub fn convergents(e: &CFExpansion, n: usize) -> Result<Vec<(i128, i128)>> {
    let (mut pm1, mut qm1) = (1i128, 0i128);
    let (mut p, mut q) = (e.a0 as i128, 1i128);
    let mut out = vec![(p, q)];
    for i in 0..n {
        let a = e
            .digit_at(i)
            .ok_or_else(|| Error::Domain("expansion too short for convergents".into()))?
            as i128;
        let pn = a
            .checked_mul(p)
            .and_then(|t| t.checked_add(pm1))
            .ok_or_else(|| Error::Domain("convergent overflow".into()))?;
        let qn = a
            .checked_mul(q)
            .and_then(|t| t.checked_add(qm1))
            .ok_or_else(|| Error::Domain("convergent overflow".into()))?;
        (pm1, qm1) = (p, q);
        (p, q) = (pn, qn);
        out.push((p, q));
    }
    Ok(out)
}

/// Approximation constant of a periodic expansion: the cyclic minimum of
/// 1/(alpha + beta) with alpha the forward and beta the backward periodic
/// limit at each position of the repeating block.
pub fn approx_constant(e: &CFExpansion) -> Result<f64> {
    let per = e
        .period
        .ok_or_else(|| Error::Domain("approximation constant needs a periodic expansion".into()))?;
    let pre = e.digits.len() - per;
    let block = &e.digits[pre..];
    let mut best = f64::INFINITY;
    for j in 0..per {
        let mut alpha = f64::INFINITY;
        for k in (0..UNFOLD).rev() {
            alpha = block[(j + k) % per] as f64 + 1.0 / alpha;
        }
        let mut v = f64::INFINITY;
        for k in (0..UNFOLD).rev() {
            let idx = (j as i64 - 1 - k as i64).rem_euclid(per as i64) as usize;
            v = block[idx] as f64 + 1.0 / v;
        }
        let beta = 1.0 / v;
        best = best.min(1.0 / (alpha + beta));
    }
    Ok(best)
}

/// Running minimum of |q|^2 |x - p/q| over Gaussian integers with
/// 0 < |q| <= qmax and p the nearest Gaussian integer to qx (plus its
/// 8 neighbors, which suffices since |qx - p| < 1 for the nearest p).
pub fn complex_approx_constant(x: Complex64, qmax: u32) -> Result<f64> {
    let best = complex_brute(x, qmax, 1);
    if best < 1e-10 {
        return Err(Error::Domain("input is Gaussian-rational at this resolution".into()));
    }
    Ok(best)
}

/// The finite-resolution minimum itself, with a configurable neighbor
/// radius around the nearest Gaussian integer.
pub fn complex_brute(x: Complex64, qmax: u32, nbr: i64) -> f64 {
    let m = qmax as i64;
    let mut best = f64::INFINITY;
    for a in -m..=m {
        for b in -m..=m {
            if a == 0 && b == 0 {
                continue;
            }
            let q = Complex64::new(a as f64, b as f64);
            let qn = q.norm();
            if qn > qmax as f64 {
                continue;
            }
            let qx = q * x;
            let (pr, pi) = (qx.re.round() as i64, qx.im.round() as i64);
            for dr in -nbr..=nbr {
                for di in -nbr..=nbr {
                    let p = Complex64::new((pr + dr) as f64, (pi + di) as f64);
                    best = best.min((qx - p).norm() * qn);
                }
            }
        }
    }
    best
}

/// Which arithmetic the Ford family lives over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ring {
    Rational,
    Gaussian,
}

/// The cusp horoball at infinity together with the Ford circles/spheres at
/// reduced fractions p/q with |q| <= Q inside a fixed base window.
#[derive(Debug, Clone)]
pub struct FordFamily {
    pub q_bound: u32,
    pub ring: Ring,
    pub bodies: Vec<Horoball>,
}

fn gcd_u(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy)]
struct Gauss(i64, i64);

impl Gauss {
    fn norm(self) -> i64 {
        self.0 * self.0 + self.1 * self.1
    }

    fn mul(self, o: Gauss) -> Gauss {
        Gauss(self.0 * o.0 - self.1 * o.1, self.0 * o.1 + self.1 * o.0)
    }

    /// Remainder of self / o with norm strictly below |o|^2 (rounded
    /// division in Z[i]).
    fn rem(self, o: Gauss) -> Gauss {
        let n = o.norm() as f64;
        let num = self.mul(Gauss(o.0, -o.1));
        let qr = (num.0 as f64 / n).round() as i64;
        let qi = (num.1 as f64 / n).round() as i64;
        let q = Gauss(qr, qi);
        let qo = q.mul(o);
        Gauss(self.0 - qo.0, self.1 - qo.1)
    }
}

fn gauss_coprime(mut a: Gauss, mut b: Gauss) -> bool {
    while b.norm() != 0 {
        let r = a.rem(b);
        a = b;
        b = r;
    }
    a.norm() == 1
}

/// Ford family over the rationals (window p/q in [-3, 4]) or the Gaussian
/// integers (window [-0.5, 1.5]^2); checks pairwise disjointness of
/// interiors on construction.
pub fn ford_family(q_bound: u32, ring: Ring) -> Result<FordFamily> {
    if q_bound < 1 {
        return Err(Error::Family("q bound must be >= 1".into()));
    }
    let mut bodies = vec![Horoball::at_infinity(1.0)];
    match ring {
        Ring::Rational => {
            for q in 1..=q_bound as i64 {
                let lo = (-3 * q) as i64;
                let hi = 4 * q;
                for p in lo..=hi {
                    if gcd_u(p.unsigned_abs(), q as u64) != 1 {
                        continue;
                    }
                    let c = Complex64::new(p as f64 / q as f64, 0.0);
                    bodies.push(Horoball::at(c, 1.0 / (q * q) as f64));
                }
            }
        }
        Ring::Gaussian => {
            let m = q_bound as i64;
            // one representative per associate class {q, iq, -q, -iq}:
            // Re q >= 1, Im q >= 0
            for qa in 1..=m {
                for qb in 0..=m {
                    let q = Gauss(qa, qb);
                    let n2 = q.norm();
                    if n2 > (q_bound * q_bound) as i64 {
                        continue;
                    }
                    let qc = Complex64::new(qa as f64, qb as f64);
                    // p ranges over q * window plus a one-unit margin
                    let bound = (n2 as f64).sqrt() * 1.6 + 2.0;
                    let pb = bound.ceil() as i64;
                    let center0 = qc * Complex64::new(0.5, 0.5);
                    for pa in -pb..=pb {
                        for pbi in -pb..=pb {
                            let p = Gauss(pa + center0.re.round() as i64, pbi + center0.im.round() as i64);
                            let c = Complex64::new(p.0 as f64, p.1 as f64) / qc;
                            if !(-0.5..=1.5).contains(&c.re) || !(-0.5..=1.5).contains(&c.im) {
                                continue;
                            }
                            if !gauss_coprime(p, q) {
                                continue;
                            }
                            bodies.push(Horoball::at(c, 1.0 / n2 as f64));
                        }
                    }
                }
            }
        }
    }
    check_disjoint(&bodies)?;
    Ok(FordFamily { q_bound, ring, bodies })
}

/// Pairwise disjointness of interiors: two finite horoballs of diameters
/// d1, d2 are disjoint iff |c1 - c2|^2 >= d1 d2 (equality at tangency); a
/// finite ball misses the height-1 horoball at infinity iff d <= 1.
fn check_disjoint(bodies: &[Horoball]) -> Result<()> {
    let mut finite: Vec<(Complex64, f64)> = Vec::new();
    for b in bodies {
        match b.center {
            crate::models::Boundary::Inf => {
                if (b.param - 1.0).abs() > 1e-12 {
                    return Err(Error::Family("cusp horoball must have height 1".into()));
                }
            }
            crate::models::Boundary::Finite(c) => {
                if b.param > 1.0 + 1e-12 {
                    return Err(Error::Family(format!("ball at {c} pokes through the cusp horoball")));
                }
                finite.push((c, b.param));
            }
        }
    }
    // sort by real part so only nearby pairs need the exact test
    finite.sort_by(|a, b| a.0.re.total_cmp(&b.0.re));
    for i in 0..finite.len() {
        let (ci, di) = finite[i];
        for j in i + 1..finite.len() {
            let (cj, dj) = finite[j];
            if cj.re - ci.re > 1.0 {
                break;
            }
            let gap = (ci - cj).norm_sqr() - di * dj;
            if gap < -1e-12 {
                return Err(Error::Family(format!(
                    "overlapping interiors at {ci} and {cj} (gap {gap:.3e})"
                )));
            }
        }
    }
    Ok(())
}

/// The excursion magnitudes (alpha_{n+1} + beta_{n+1})/2 for n = 1..horizon:
/// the apex heights of the modular geodesic's horoball excursions under the
/// height-1 normalization.
pub fn excursion_magnitudes_cf(e: &CFExpansion, horizon: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(horizon);
    for n in 1..=horizon {
        let alpha = tail_value(e, n)?;
        let beta = back_value(e, n - 1)?;
        out.push((alpha + beta) / 2.0);
    }
    Ok(out)
}

/// Excursion heights of the expansion: 2 log of the magnitude, clipped at 0.
pub fn excursions_cf(e: &CFExpansion, horizon: usize) -> Result<Vec<f64>> {
    Ok(excursion_magnitudes_cf(e, horizon)?
        .into_iter()
        .map(|m| (2.0 * m.ln()).max(0.0))
        .collect())
}

/// Excursion heights for a real sample (digits taken from the float).
pub fn excursions(x: f64, horizon: usize) -> Result<Vec<f64>> {
    let e = cf_expand(x, horizon + 1)?;
    excursions_cf(&e, horizon)
}

/// Windowed limsup: the maximum over the tail half of the window.
pub fn limsup_estimate(vals: &[f64]) -> Result<f64> {
    if vals.is_empty() {
        return Err(Error::Domain("limsup of an empty window".into()));
    }
    Ok(vals[vals.len() / 2..].iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

/// The spectrum coordinate change t -> -2 log t.
pub fn spectrum_map(c: f64) -> Result<f64> {
    if c <= 0.0 {
        return Err(Error::Domain("spectrum map needs a positive constant".into()));
    }
    Ok(-2.0 * c.ln())
}
