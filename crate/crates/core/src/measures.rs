//! The transformed measure μ̄ on the support and the one-dimensional shuffling
//! measures added along the top and right edges.

use crate::geometry::{clip, moments, HalfPlane, Polygon};
use crate::types::{Error, Rectangle, Result};

/// Area density `-3/(b1 b2)`, line densities on the four edges and a unit
/// atom at the lower-left corner.
#[derive(Debug, Clone, Copy)]
pub struct MuBar {
    pub rect: Rectangle,
}

/// One edge of the support: the line `z[axis] = level` carrying density `rho`.
#[derive(Debug, Clone, Copy)]
struct Edge {
    axis: usize,
    level: f64,
    rho: f64,
}

impl MuBar {
    pub fn new(rect: Rectangle) -> Self {
        MuBar { rect }
    }

    pub fn area_density(&self) -> f64 {
        -3.0 / self.rect.area()
    }

    fn edges(&self) -> [Edge; 4] {
        let r = &self.rect;
        let s = r.area();
        [
            Edge { axis: 0, level: r.c1, rho: -r.c1 / s },
            Edge { axis: 1, level: r.c2, rho: -r.c2 / s },
            Edge { axis: 0, level: r.right(), rho: r.right() / s },
            Edge { axis: 1, level: r.top(), rho: r.top() / s },
        ]
    }

    /// `μ̄(D)` in closed form; zero for every rectangle.
    pub fn total(&self) -> f64 {
        let r = &self.rect;
        let s = r.area();
        -3.0 + (-r.c1 * r.b2 - r.c2 * r.b1 + r.right() * r.b2 + r.top() * r.b1) / s + 1.0
    }

    /// `∫ (g0 + g1 z1 + g2 z2) dμ̄` over a polygon inside the support. The
    /// corner atom is counted only when `owns_corner` holds.
    pub fn integrate_affine(&self, poly: &Polygon, g: [f64; 3], owns_corner: bool) -> f64 {
        let aff = |z: [f64; 2]| g[0] + g[1] * z[0] + g[2] * z[1];
        let mut total = 0.0;
        if !poly.is_empty() {
            let (a, mx, my) = moments(poly);
            total += self.area_density() * (g[0] * a + g[1] * mx + g[2] * my);
            let tol = 1e-12 * self.rect.scale();
            for e in self.edges() {
                let other = 1 - e.axis;
                let on: Vec<f64> = poly
                    .vertices
                    .iter()
                    .filter(|v| (v[e.axis] - e.level).abs() <= tol)
                    .map(|v| v[other])
                    .collect();
                if on.len() < 2 {
                    continue;
                }
                let lo = on.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = on.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut mid = [0.0; 2];
                mid[e.axis] = e.level;
                mid[other] = 0.5 * (lo + hi);
                total += e.rho * (hi - lo) * aff(mid);
            }
        }
        if owns_corner {
            total += aff(self.rect.corner());
        }
        total
    }

    /// `μ̄` of a polygon region, corner atom included iff indicated.
    pub fn of_region(&self, poly: &Polygon, owns_corner: bool) -> f64 {
        self.integrate_affine(poly, [1.0, 0.0, 0.0], owns_corner)
    }
}

/// Clip to the support, then evaluate μ̄; the corner atom counts when the
/// corner lies in the polygon.
pub fn mu_bar_of_polygon(rect: &Rectangle, poly: &Polygon) -> f64 {
    let bounds = [
        HalfPlane { n: [-1.0, 0.0], d: -rect.c1 },
        HalfPlane { n: [0.0, -1.0], d: -rect.c2 },
        HalfPlane { n: [1.0, 0.0], d: rect.right() },
        HalfPlane { n: [0.0, 1.0], d: rect.top() },
    ];
    let inside = bounds.iter().fold(poly.clone(), |p, h| clip(&p, h));
    let owns = inside.contains(rect.corner(), 1e-12 * rect.scale());
    MuBar::new(*rect).of_region(&inside, owns)
}

/// Density linear on `[lo, hi]`, from `d_lo` to `d_hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPiece {
    pub lo: f64,
    pub hi: f64,
    pub d_lo: f64,
    pub d_hi: f64,
}

impl LinearPiece {
    fn mass(&self) -> f64 {
        0.5 * (self.d_lo + self.d_hi) * (self.hi - self.lo)
    }

    fn first_moment(&self) -> f64 {
        // ∫ x ((hi-x) d_lo + (x-lo) d_hi)/(hi-lo) dx
        let w = self.hi - self.lo;
        w * (self.d_lo * (2.0 * self.lo + self.hi) + self.d_hi * (self.lo + 2.0 * self.hi)) / 6.0
    }
}

/// Signed measure on an interval: atoms plus piecewise-linear densities.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IntervalMeasure {
    pub atoms: Vec<(f64, f64)>,
    pub pieces: Vec<LinearPiece>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvxReport {
    pub total_mass: f64,
    pub first_moment: f64,
    pub sign_pattern_ok: bool,
}

impl IntervalMeasure {
    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>() + self.pieces.iter().map(LinearPiece::mass).sum::<f64>()
    }

    pub fn first_moment(&self) -> f64 {
        self.atoms.iter().map(|a| a.0 * a.1).sum::<f64>()
            + self.pieces.iter().map(LinearPiece::first_moment).sum::<f64>()
    }

    /// Signs in left-to-right order, zeros dropped, runs merged.
    fn sign_runs(&self, tol: f64) -> Vec<i8> {
        let mut events: Vec<(f64, u8, Vec<i8>)> = Vec::new();
        let sgn = |v: f64| if v > tol { 1 } else if v < -tol { -1 } else { 0 };
        for &(x, m) in &self.atoms {
            events.push((x, 0, vec![sgn(m)]));
        }
        for p in &self.pieces {
            events.push((p.lo, 1, vec![sgn(p.d_lo), sgn(p.d_hi)]));
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut runs: Vec<i8> = Vec::new();
        for s in events.into_iter().flat_map(|e| e.2) {
            if s != 0 && runs.last() != Some(&s) {
                runs.push(s);
            }
        }
        runs
    }
}

/// Mass, first moment and whether the density signs follow `+, -, +`
/// (any of the runs may be absent).
pub fn check_interval_measure_cvx_zero(m: &IntervalMeasure) -> CvxReport {
    let scale = m
        .atoms
        .iter()
        .map(|a| a.1.abs())
        .chain(m.pieces.iter().flat_map(|p| [p.d_lo.abs(), p.d_hi.abs()]))
        .fold(0.0, f64::max);
    let runs = m.sign_runs(1e-14 * scale.max(1e-300));
    let ok = matches!(runs.as_slice(), [] | [1] | [-1] | [1, -1] | [-1, 1] | [1, -1, 1]);
    CvxReport {
        total_mass: m.total_mass(),
        first_moment: m.first_moment(),
        sign_pattern_ok: ok,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Along the top edge, paired with item 1's price line.
    Top,
    /// Along the right edge, paired with item 2's price line.
    Right,
}

/// The rectangle as seen from `side`: for `Right` the axes are exchanged so
/// that every side formula can be written for the top edge.
fn oriented(rect: &Rectangle, side: Side) -> Rectangle {
    match side {
        Side::Top => *rect,
        Side::Right => rect.swapped(),
    }
}

/// `(a, m)` of the shuffle on `side` for boundary offset `p_a`.
pub fn alpha_params(rect: &Rectangle, side: Side, p_a: f64) -> Result<(f64, f64)> {
    let r = oriented(rect, side);
    if r.c1 == 0.0 {
        return Err(Error::ZeroCornerCase);
    }
    let lo = (2.0 * r.b2 - r.c2) / 3.0;
    if !(p_a > lo && p_a < r.b2) {
        return Err(Error::InvalidArgument(format!(
            "p_a = {p_a} outside ({lo}, {})",
            r.b2
        )));
    }
    let d = r.c2 - 2.0 * r.b2 + 3.0 * p_a;
    let a = d * d / (8.0 * r.c1 * (r.b2 - p_a));
    let m = 4.0 * r.c1 * (r.b2 - p_a) / d;
    Ok((a, m))
}

/// Linear shuffle with an atom at the corner-side end of an edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShuffleAlpha {
    pub side: Side,
    pub p_a: f64,
    pub a: f64,
    pub m: f64,
}

impl ShuffleAlpha {
    pub fn new(rect: &Rectangle, side: Side, p_a: f64) -> Result<Self> {
        let (a, m) = alpha_params(rect, side, p_a)?;
        Ok(ShuffleAlpha { side, p_a, a, m })
    }

    /// From explicit `(p_a, a, m)`, e.g. solver output; no consistency check.
    pub fn from_parts(side: Side, p_a: f64, a: f64, m: f64) -> Self {
        ShuffleAlpha { side, p_a, a, m }
    }

    /// The measure in the coordinate running along the edge.
    pub fn measure(&self, rect: &Rectangle) -> IntervalMeasure {
        let r = oriented(rect, self.side);
        let s = r.area();
        let d0 = (2.0 * r.b2 - r.c2 - 3.0 * self.p_a) / s;
        IntervalMeasure {
            atoms: vec![(r.c1, r.c1 * (r.b2 - self.p_a) / s)],
            pieces: vec![LinearPiece {
                lo: r.c1,
                hi: r.c1 + self.m,
                d_lo: d0,
                d_hi: d0 + 3.0 * self.a * self.m / s,
            }],
        }
    }
}

/// Shuffle for the vertical-strip structures: linear up to `c1 + p_a1/a1`,
/// then constant `2 b2/(b1 b2)` up to `c1 + p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShuffleBeta {
    pub p_a1: f64,
    pub a1: f64,
    pub p: f64,
}

impl ShuffleBeta {
    pub fn new(p_a1: f64, a1: f64, p: f64) -> Result<Self> {
        if !(a1 > 0.0) {
            return Err(Error::InvalidArgument(format!("a1 = {a1} must be positive")));
        }
        Ok(ShuffleBeta { p_a1, a1, p })
    }

    pub fn measure(&self, rect: &Rectangle) -> IntervalMeasure {
        let r = rect;
        let s = r.area();
        let kink = (self.p_a1 / self.a1).min(self.p);
        let d0 = (2.0 * r.b2 - r.c2 - 3.0 * self.p_a1) / s;
        let mut pieces = vec![LinearPiece {
            lo: r.c1,
            hi: r.c1 + kink,
            d_lo: d0,
            d_hi: d0 + 3.0 * self.a1 * kink / s,
        }];
        if self.p > kink {
            let d = 2.0 * r.b2 / s;
            pieces.push(LinearPiece {
                lo: r.c1 + kink,
                hi: r.c1 + self.p,
                d_lo: d,
                d_hi: d,
            });
        }
        IntervalMeasure {
            atoms: vec![(r.c1, r.c1 * (r.b2 - self.p_a1) / s)],
            pieces,
        }
    }
}

/// Both expressions for the strip width `p` implied by zero mass and zero moment.
pub fn beta_p_of(rect: &Rectangle, p_a1: f64, a1: f64) -> Result<(f64, f64)> {
    if !(a1 > 0.0) || !a1.is_finite() {
        return Err(Error::InvalidArgument(format!("a1 = {a1} must be positive and finite")));
    }
    let r = rect;
    let from_mass =
        (1.5 * p_a1 * p_a1 / a1 + r.c2 * p_a1 / a1 - r.c1 * (r.b2 - p_a1)) / (2.0 * r.b2);
    let from_moment = (p_a1 / a1) * ((p_a1 + r.c2) / (2.0 * r.b2)).sqrt();
    Ok((from_mass, from_moment))
}

/// Step shuffle for the no-exclusion structure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShuffleBetaE;

impl ShuffleBetaE {
    pub fn measure(rect: &Rectangle) -> IntervalMeasure {
        let r = rect;
        let s = r.area();
        let split = r.c1 + r.b1 * r.b2 / r.c2;
        let end = 0.5 * (r.c1 + r.b1);
        let d1 = (2.0 * r.b2 - r.c2) / s;
        let d2 = 2.0 * r.b2 / s;
        IntervalMeasure {
            atoms: vec![(r.c1, r.c1 * r.b2 / s)],
            pieces: vec![
                LinearPiece { lo: r.c1, hi: split, d_lo: d1, d_hi: d1 },
                LinearPiece { lo: split, hi: end, d_lo: d2, d_hi: d2 },
            ],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polygon;

    fn rect(c1: f64, c2: f64, b1: f64, b2: f64) -> Rectangle {
        Rectangle::new(c1, c2, b1, b2).unwrap()
    }

    /// Midpoint-rule oracle for an interval measure.
    fn quad(m: &IntervalMeasure, f: impl Fn(f64) -> f64) -> f64 {
        let mut s: f64 = m.atoms.iter().map(|&(x, w)| w * f(x)).sum();
        for p in &m.pieces {
            let n = 20000;
            let h = (p.hi - p.lo) / n as f64;
            for i in 0..n {
                let x = p.lo + (i as f64 + 0.5) * h;
                let d = p.d_lo + (p.d_hi - p.d_lo) * (x - p.lo) / (p.hi - p.lo);
                s += d * f(x) * h;
            }
        }
        s
    }

    #[test]
    fn total_is_zero() {
        for r in [rect(0.0, 0.0, 1.0, 1.0), rect(4.0, 4.0, 12.0, 3.0), rect(0.3, 7.0, 0.2, 5.0)] {
            assert!(MuBar::new(r).total().abs() < 1e-14);
            assert!(mu_bar_of_polygon(&r, &Polygon::from_rect(&r)).abs() < 1e-13);
        }
    }

    #[test]
    fn unit_square_regions_vanish() {
        let r = rect(0.0, 0.0, 1.0, 1.0);
        let s2 = 2f64.sqrt();
        let p = (4.0 - s2) / 3.0;
        let sq = Polygon::from_rect(&r);
        let z = [
            HalfPlane { n: [0.0, 1.0], d: 2.0 / 3.0 },
            HalfPlane { n: [1.0, 0.0], d: 2.0 / 3.0 },
            HalfPlane { n: [1.0, 1.0], d: p },
        ]
        .iter()
        .fold(sq, |q, h| clip(&q, h));
        assert!(mu_bar_of_polygon(&r, &z).abs() < 1e-14);
        let a = Polygon::new(vec![
            [0.0, 2.0 / 3.0],
            [(2.0 - s2) / 3.0, 2.0 / 3.0],
            [(2.0 - s2) / 3.0, 1.0],
            [0.0, 1.0],
        ]);
        assert!(mu_bar_of_polygon(&r, &a).abs() < 1e-14);
    }

    #[test]
    fn affine_integral_matches_grid() {
        let r = rect(0.4, 1.1, 2.0, 0.7);
        let poly = clip(&Polygon::from_rect(&r), &HalfPlane { n: [1.0, 2.0], d: 3.6 });
        let g = [0.3, -1.2, 0.8];
        let exact = MuBar::new(r).integrate_affine(&poly, g, true);
        // Grid oracle: area part by midpoint rule, edges by 1-D midpoint rule.
        let n = 1500;
        let (h1, h2) = (r.b1 / n as f64, r.b2 / n as f64);
        let f = |x: f64, y: f64| g[0] + g[1] * x + g[2] * y;
        let inside = |x: f64, y: f64| x + 2.0 * y <= 3.6;
        let s = r.area();
        let mut tot = 0.0;
        for i in 0..n {
            let x = r.c1 + (i as f64 + 0.5) * h1;
            for j in 0..n {
                let y = r.c2 + (j as f64 + 0.5) * h2;
                if inside(x, y) {
                    tot += -3.0 / s * f(x, y) * h1 * h2;
                }
            }
            if inside(x, r.c2) {
                tot += -r.c2 / s * f(x, r.c2) * h1;
            }
            if inside(x, r.top()) {
                tot += r.top() / s * f(x, r.top()) * h1;
            }
        }
        for j in 0..n {
            let y = r.c2 + (j as f64 + 0.5) * h2;
            if inside(r.c1, y) {
                tot += -r.c1 / s * f(r.c1, y) * h2;
            }
            if inside(r.right(), y) {
                tot += r.right() / s * f(r.right(), y) * h2;
            }
        }
        tot += f(r.c1, r.c2);
        assert!((exact - tot).abs() < 2e-3, "{exact} vs {tot}");
    }

    #[test]
    fn alpha_example_and_quadrature() {
        let r = rect(0.1, 0.1, 1.0, 1.0);
        let r1: f64 = (2.0 * (2.0 + 0.5) - 0.1 * (2.0 - 0.3)) / (3.0 * 2.3);
        // Exact arithmetic gives 4.83/6.9 = 0.7.
        assert!((r1 - 0.7).abs() < 1e-15);
        let (a, m) = alpha_params(&r, Side::Top, r1).unwrap();
        assert!((a - 1.0 / 6.0).abs() < 1e-14);
        assert!((m - 0.6).abs() < 1e-14);
        let meas = ShuffleAlpha::new(&r, Side::Top, r1).unwrap().measure(&r);
        assert!(quad(&meas, |_| 1.0).abs() < 1e-9);
        assert!(quad(&meas, |x| x - r.c1).abs() < 1e-9);
        let rep = check_interval_measure_cvx_zero(&meas);
        assert!(rep.total_mass.abs() < 1e-14 && rep.first_moment.abs() < 1e-14);
        assert!(rep.sign_pattern_ok);
    }

    #[test]
    fn alpha_edge_cases() {
        let r = rect(0.1, 0.1, 1.0, 1.0);
        let lo = (2.0 - 0.1) / 3.0;
        let (a, m) = alpha_params(&r, Side::Top, lo + 1e-9).unwrap();
        assert!(a < 1e-15 && m > 1e7);
        assert!(alpha_params(&r, Side::Top, lo).is_err());
        assert!(alpha_params(&r, Side::Top, 1.0).is_err());
        assert_eq!(
            alpha_params(&rect(0.0, 0.3, 1.0, 1.0), Side::Top, 0.6),
            Err(Error::ZeroCornerCase)
        );
        assert!(alpha_params(&rect(0.0, 0.3, 1.0, 1.0), Side::Right, 0.8).is_ok());
    }

    #[test]
    fn right_side_is_mirror() {
        let r = rect(0.2, 0.05, 1.3, 0.9);
        let p = 1.0;
        let right = alpha_params(&r, Side::Right, p).unwrap();
        let top = alpha_params(&r.swapped(), Side::Top, p).unwrap();
        assert_eq!(right, top);
    }

    #[test]
    fn zero_measure_report() {
        let rep = check_interval_measure_cvx_zero(&IntervalMeasure::default());
        assert_eq!(rep, CvxReport { total_mass: 0.0, first_moment: 0.0, sign_pattern_ok: true });
    }

    #[test]
    fn bad_sign_pattern_detected() {
        let m = IntervalMeasure {
            atoms: vec![(0.0, -1.0)],
            pieces: vec![LinearPiece { lo: 0.0, hi: 1.0, d_lo: 2.0, d_hi: -1.0 }],
        };
        assert!(!check_interval_measure_cvx_zero(&m).sign_pattern_ok);
    }

    #[test]
    fn beta_e_threshold() {
        let r = rect(0.5, 8.0, 1.0, 1.0);
        let rep = check_interval_measure_cvx_zero(&ShuffleBetaE::measure(&r));
        assert!(rep.total_mass.abs() < 1e-15);
        assert!(rep.first_moment >= -1e-15);
        let thr = 2.0 * (1.0f64 / 0.5).powi(2);
        for (c2, nonneg) in [(thr * 1.05, true), (thr * 0.95, false)] {
            let r = rect(0.5, c2, 1.0, 1.0);
            let mom = ShuffleBetaE::measure(&r).first_moment() - 0.5 * ShuffleBetaE::measure(&r).total_mass();
            assert_eq!(mom >= 0.0, nonneg, "c2={c2} moment={mom}");
        }
    }

    #[test]
    fn beta_p_errors_and_limit() {
        let r = rect(0.3, 2.0, 1.0, 1.0);
        assert!(beta_p_of(&r, 0.5, 0.0).is_err());
        let (pm, pq) = beta_p_of(&r, r.b2, 1e9).unwrap();
        assert!(pm.abs() < 1e-8 && pq.abs() < 1e-8);
    }
}
