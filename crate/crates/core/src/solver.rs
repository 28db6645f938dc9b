//! Phase classification and the per-region solvers.
//!
//! The small/small tree is parametrised by the projected lengths `m1, m2`
//! rather than by `p_a1, p_a2`. Along the top edge
//! `p_a1(m) = (4 c1 b2 + (2 b2 - c2) m) / (3 m + 4 c1)` is strictly
//! decreasing, so sweeping `p_a1` upward from `r1` is the same as sweeping
//! `m1` downward from its coincidence value. The map stays finite at
//! `c1 = 0`, where `p_a1` is constant and `a1 = 0`.

use crate::geometry::{HalfPlane, Polygon};
use crate::measures::mu_bar_of_polygon;
use crate::mechanism::{expected_revenue, menu_from_structure};
use crate::roots::{bisect, real_roots_in_interval};
use crate::types::{Error, Mechanism, Rectangle, Result, SolveParams, StructureKind};
use serde::{Deserialize, Serialize};

/// Decision tolerance on normalised instances (largest coordinate 1).
const TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PhaseRegion {
    SmallSmall,
    SmallLarge,
    SmallVeryLarge,
    LargeSmall,
    VeryLargeSmall,
    BothLarge,
}

impl PhaseRegion {
    pub const ALL: [PhaseRegion; 6] = [
        PhaseRegion::SmallSmall,
        PhaseRegion::SmallLarge,
        PhaseRegion::SmallVeryLarge,
        PhaseRegion::LargeSmall,
        PhaseRegion::VeryLargeSmall,
        PhaseRegion::BothLarge,
    ];

    pub fn swapped(self) -> Self {
        use PhaseRegion::*;
        match self {
            SmallLarge => LargeSmall,
            LargeSmall => SmallLarge,
            SmallVeryLarge => VeryLargeSmall,
            VeryLargeSmall => SmallVeryLarge,
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalConstants {
    pub r1: f64,
    pub r2: f64,
    pub p_a1_star: f64,
    pub p_a2_star: f64,
    pub p_star: f64,
}

/// Lower bound on `c_o` for the "large" band when `c_i <= b_i`.
fn large_threshold(ci: f64, bi: f64, bo: f64) -> f64 {
    2.0 * bo * (bi + ci) / (bi + 3.0 * ci)
}

fn very_large_threshold(ci: f64, bi: f64, bo: f64) -> f64 {
    if ci >= bi {
        f64::INFINITY
    } else {
        let q = bi / (bi - ci);
        2.0 * bo * q * q
    }
}

/// Phase region of `rect`. Ties on the lower "large" threshold go to
/// `SmallSmall`; ties on the "very large" threshold go to the very-large
/// side, where both structures coincide.
pub fn classify(rect: &Rectangle) -> PhaseRegion {
    let Rectangle { c1, c2, b1, b2 } = *rect;
    let small_small = (c1 <= b1 && c2 <= large_threshold(c1, b1, b2))
        || (c2 <= b2 && c1 <= large_threshold(c2, b2, b1));
    if small_small {
        PhaseRegion::SmallSmall
    } else if c1 <= b1 {
        if c2 < very_large_threshold(c1, b1, b2) {
            PhaseRegion::SmallLarge
        } else {
            PhaseRegion::SmallVeryLarge
        }
    } else if c2 <= b2 {
        if c1 < very_large_threshold(c2, b2, b1) {
            PhaseRegion::LargeSmall
        } else {
            PhaseRegion::VeryLargeSmall
        }
    } else {
        PhaseRegion::BothLarge
    }
}

fn r_const(ci: f64, bi: f64, co: f64, bo: f64) -> f64 {
    (2.0 * bo * (2.0 * bi + 5.0 * ci) - co * (2.0 * bi - 3.0 * ci)) / (3.0 * (2.0 * bi + 3.0 * ci))
}

fn pa_star(ci: f64, co: f64, bo: f64) -> f64 {
    (2.0 * bo - co) / 3.0 - 4.0 * ci / 9.0 + 2.0 / 9.0 * (2.0 * ci * (2.0 * ci + 3.0 * (bo + co))).sqrt()
}

/// Pure-bundling offset: the root of `mu_bar(corner triangle of leg p) = 0`.
pub fn p_star(rect: &Rectangle) -> f64 {
    let s = rect.c1 + rect.c2;
    ((s * s + 6.0 * rect.b1 * rect.b2).sqrt() - s) / 3.0
}

pub fn critical_constants(rect: &Rectangle) -> CriticalConstants {
    let Rectangle { c1, c2, b1, b2 } = *rect;
    CriticalConstants {
        r1: r_const(c1, b1, c2, b2),
        r2: r_const(c2, b2, c1, b1),
        p_a1_star: pa_star(c1, c2, b2),
        p_a2_star: pa_star(c2, c1, b1),
        p_star: p_star(rect),
    }
}

/// One side of the tree in its own frame: `c` is the corner coordinate on
/// the swept axis, `(b_o, c_o)` the extent of the other axis.
#[derive(Debug, Clone, Copy)]
struct Side {
    c: f64,
    b_o: f64,
    c_o: f64,
}

impl Side {
    fn first(r: &Rectangle) -> Self {
        Side { c: r.c1, b_o: r.b2, c_o: r.c2 }
    }

    fn second(r: &Rectangle) -> Self {
        Side { c: r.c2, b_o: r.b1, c_o: r.c1 }
    }

    fn p_a(&self, m: f64) -> f64 {
        if self.c == 0.0 {
            (2.0 * self.b_o - self.c_o) / 3.0
        } else {
            (4.0 * self.c * self.b_o + (2.0 * self.b_o - self.c_o) * m) / (3.0 * m + 4.0 * self.c)
        }
    }

    fn a(&self, m: f64) -> f64 {
        if self.c == 0.0 {
            0.0
        } else {
            2.0 * self.c * (self.b_o + self.c_o) / (m * (3.0 * m + 4.0 * self.c))
        }
    }

    /// Length at which the slope reaches 1.
    fn m_star(&self) -> f64 {
        let c = self.c;
        ((4.0 * c * c + 6.0 * c * (self.b_o + self.c_o)).sqrt() - 2.0 * c) / 3.0
    }

    fn m_of(&self, p_a: f64) -> f64 {
        4.0 * self.c * (self.b_o - p_a) / (self.c_o - 2.0 * self.b_o + 3.0 * p_a)
    }
}

/// Closed-form region residuals of the small/small tree.
struct Tree {
    r: Rectangle,
    s1: Side,
    s2: Side,
}

impl Tree {
    fn new(r: &Rectangle) -> Self {
        Tree { r: *r, s1: Side::first(r), s2: Side::second(r) }
    }

    fn points(&self, m1: f64, m2: f64) -> ([f64; 2], [f64; 2]) {
        let r = &self.r;
        let p = [r.c1 + m1, r.c2 + 0.5 * (2.0 * r.b2 - r.c2 - self.s1.p_a(m1))];
        let q = [r.c1 + 0.5 * (2.0 * r.b1 - r.c1 - self.s2.p_a(m2)), r.c2 + m2];
        (p, q)
    }

    /// `P1 + P2 - Q1 - Q2`: increasing in `m1`, decreasing in `m2`.
    fn balance(&self, m1: f64, m2: f64) -> f64 {
        let (p, q) = self.points(m1, m2);
        (p[0] + p[1]) - (q[0] + q[1])
    }

    /// `-b1 b2 mu_bar(W)` for the four-region partition.
    fn neg_w(&self, m1: f64, m2: f64) -> f64 {
        let Rectangle { c1, c2, b1, b2 } = self.r;
        let (p, q) = self.points(m1, m2);
        3.0 * (b1 - m1) * (b2 - m2) - 1.5 * (p[1] - q[1]) * (q[0] - p[0]) - (c2 + b2) * (b1 - m1) - (c1 + b1) * (b2 - m2)
    }

    /// `-b1 b2 mu_bar(W)` once the item-2 region has merged into the bundle.
    fn neg_w_b(&self, m1: f64) -> f64 {
        let Rectangle { c1, c2, b1, b2 } = self.r;
        let h = 0.5 * (2.0 * b2 - c2 - self.s1.p_a(m1));
        let p = m1 + h;
        3.0 * ((b1 - m1) * b2 - 0.5 * h * h) - (c2 + b2) * (b1 - m1) - (c1 + b1) * b2 + c2 * (b1 - p)
    }

    /// `m2` balancing `P` and `Q` for the given `m1`.
    fn m2_balanced(&self, m1: f64) -> Result<f64> {
        let lo = if self.s2.c > 0.0 { 1e-15 } else { 0.0 };
        let hi = 4.0 * (self.r.right() + self.r.top());
        bisect(|m2| self.balance(m1, m2), lo, hi, "balance of P and Q")
    }
}

fn finish(kind: StructureKind, params: SolveParams, rect: &Rectangle) -> Result<Mechanism> {
    let menu = menu_from_structure(kind, &params, rect)?;
    let revenue = expected_revenue(&menu, rect);
    Mechanism::new(kind, params, menu, revenue)
}

/// Solve on a copy rescaled so the largest coordinate is 1, then rebuild on `rect`.
fn normalised(
    rect: &Rectangle,
    inner: impl Fn(&Rectangle) -> Result<(StructureKind, SolveParams)>,
) -> Result<Mechanism> {
    let s = rect.right().max(rect.top());
    let (kind, params) = inner(&rect.scaled(1.0 / s))?;
    finish(kind, params.scaled(s), rect)
}

fn swap_result(r: (StructureKind, SolveParams)) -> (StructureKind, SolveParams) {
    (r.0.swapped(), r.1.swapped())
}

/// Bundle offset for a two-item menu. `p_star` whenever the unsold set is a
/// triangle; otherwise `mu_bar(unsold set) = 0` is solved on the clipped polygon.
fn bundle_offset(rect: &Rectangle) -> Result<f64> {
    let p = p_star(rect);
    if p <= rect.b1.min(rect.b2) {
        return Ok(p);
    }
    let s = rect.c1 + rect.c2;
    let unsold = |p: f64| {
        let h = HalfPlane { n: [1.0, 1.0], d: s + p };
        mu_bar_of_polygon(rect, &Polygon::from_rect(rect).clip(&h))
    };
    let hi = rect.b1 + rect.b2;
    bisect(unsold, rect.b1.min(rect.b2), hi * (1.0 - 1e-9), "pure bundling offset")
}

fn kind_c(rect: &Rectangle) -> Result<(StructureKind, SolveParams)> {
    Ok((
        StructureKind::C,
        SolveParams { p: Some(bundle_offset(rect)?), ..Default::default() },
    ))
}

/// Closed form for `c = (0, 0)`.
pub fn solve_zero_corner(rect: &Rectangle) -> Result<Mechanism> {
    if rect.c1 != 0.0 || rect.c2 != 0.0 {
        return Err(Error::InvalidArgument("solve_zero_corner needs c1 = c2 = 0".into()));
    }
    if rect.b1 < rect.b2 {
        return solve_zero_corner(&rect.swapped()).map(|m| m.swapped());
    }
    let (b1, b2) = (rect.b1, rect.b2);
    let params = if b1 <= 2.0 * b2 {
        let root = (2.0 * b1 * b2).sqrt();
        let p1 = (2.0 * b1 - root) / 3.0;
        let q2 = (2.0 * b2 - root) / 3.0;
        (
            StructureKind::A,
            SolveParams {
                p_a1: Some(2.0 * b2 / 3.0),
                p_a2: Some(2.0 * b1 / 3.0),
                a1: Some(0.0),
                a2: Some(0.0),
                m1: Some(p1),
                m2: Some(q2),
                p: Some((2.0 * (b1 + b2) - root) / 3.0),
                big_p: Some([p1, 2.0 * b2 / 3.0]),
                big_q: Some([2.0 * b1 / 3.0, q2]),
            },
        )
    } else {
        (
            StructureKind::B,
            SolveParams {
                p_a1: Some(2.0 * b2 / 3.0),
                a1: Some(0.0),
                m1: Some(b1 / 2.0),
                p: Some(b1 / 2.0 + b2 / 3.0),
                big_p: Some([b1 / 2.0, 2.0 * b2 / 3.0]),
                ..Default::default()
            },
        )
    };
    finish(params.0, params.1, rect)
}

/// `p_a2` that places `P` and `Q` on a common bundle line, given `p_a1`.
pub fn solve_pa2_given_pa1(rect: &Rectangle, p_a1: f64) -> Result<f64> {
    if rect.c1 == 0.0 || rect.c2 == 0.0 {
        return Err(Error::ZeroCornerCase);
    }
    let t = Tree::new(rect);
    let m1 = t.s1.m_of(p_a1);
    let r2 = critical_constants(rect).r2;
    if !(m1.is_finite() && m1 > 0.0) {
        return Err(Error::InvalidArgument(format!("p_a1 = {p_a1} outside the admissible range")));
    }
    let g = |p_a2: f64| t.balance(m1, t.s2.m_of(p_a2));
    let lo = r2.min((2.0 * rect.b1 - rect.c1) / 3.0 + 1e-9 * rect.scale());
    bisect(g, lo, rect.b1, "p_a2 balance")
}

/// Left-hand side of the two-price bundle-region equation, in polynomial
/// form. Equals `-b1 b2 mu_bar(W) D1 D2` with
/// `D1 = c2 - 2 b2 + 3 p_a1`, `D2 = c1 - 2 b1 + 3 p_a2`.
pub fn residual_w(rect: &Rectangle, p_a1: f64, p_a2: f64) -> f64 {
    let Rectangle { c1, c2, b1, b2 } = *rect;
    let d1 = c2 - 2.0 * b2 + 3.0 * p_a1;
    let d2 = c1 - 2.0 * b1 + 3.0 * p_a2;
    let x1 = b1 * d1 - 4.0 * c1 * (b2 - p_a1);
    let x2 = b2 * d2 - 4.0 * c2 * (b1 - p_a2);
    let y1 = (2.0 * b2 - c2 - p_a1) * d2 - 8.0 * c2 * (b1 - p_a2);
    let y2 = (2.0 * b1 - c1 - p_a2) * d1 - 8.0 * c1 * (b2 - p_a1);
    3.0 * x1 * x2 - (x1 * d2 * (c2 + b2) + x2 * d1 * (c1 + b1)) - 0.375 * y1 * y2
}

/// Cubic in `p_a1` for the structure with only the `(a1, 1)` item, as a
/// function value. Equals `-b1 b2 mu_bar(W) (c2 - 2 b2 + 3 p_a1)`.
pub fn fig_b_cubic(rect: &Rectangle, p_a1: f64) -> f64 {
    let Rectangle { c1, c2, b1, b2 } = *rect;
    let e = c2 - 2.0 * b2;
    let k0 = -8.0 * c1 * b2 * b2 + (c2 * b1 - b2 * b1 - b2 * c1) * e + (c2 / 2.0 - b1) * e * e - 0.375 * e * e * e;
    let k1 = c1 * (4.0 * c2 - 3.0 * b2) + 3.0 * b1 * b2 + 2.0 * (c2 - 2.0 * c1) * e - 15.0 / 8.0 * e * e;
    let k2 = 1.5 * c2 - 21.0 / 8.0 * e;
    let k3 = -9.0 / 8.0;
    ((k3 * p_a1 + k2) * p_a1 + k1) * p_a1 + k0
}

/// Ascending coefficients of the cubic fixing `p_a1` in the small/large band.
pub fn small_large_cubic(rect: &Rectangle) -> [f64; 4] {
    let Rectangle { c1, c2, b1, b2 } = *rect;
    let w = (b1 - c1) * (b1 - c1);
    let bb = b1 * b2;
    [
        2.0 * bb * bb * c2 - c2 * c2 * b2 * w,
        2.0 * bb * bb - 4.0 * bb * c1 * c2 - 3.0 * c2 * b2 * w,
        2.0 * c1 * c1 * c2 - 4.0 * bb * c1 - 9.0 * b2 * w / 4.0,
        2.0 * c1 * c1,
    ]
}

fn kind_a(t: &Tree, m1: f64, m2: f64) -> (StructureKind, SolveParams) {
    let (p, q) = t.points(m1, m2);
    (
        StructureKind::A,
        SolveParams {
            p_a1: Some(t.s1.p_a(m1)),
            p_a2: Some(t.s2.p_a(m2)),
            a1: Some(t.s1.a(m1)),
            a2: Some(t.s2.a(m2)),
            m1: Some(m1),
            m2: Some(m2),
            p: Some(p[0] + p[1] - t.r.c1 - t.r.c2),
            big_p: Some(p),
            big_q: Some(q),
        },
    )
}

/// Search for the `(a1, 1)`-only structure, sweeping `m1` down from `m_start`
/// to the slope limit. Falls through to pure bundling when the bundle region
/// still carries positive mass at the limit.
fn item_one_branch(rect: &Rectangle, m_start: f64) -> Result<(StructureKind, SolveParams)> {
    let t = Tree::new(rect);
    let ms1 = t.s1.m_star();
    if m_start - ms1 <= TOL || t.neg_w_b(ms1) < 0.0 {
        return kind_c(rect);
    }
    let m1 = if t.neg_w_b(m_start) > 0.0 {
        log::warn!("bundle region already negative at the branch start {m_start}; using the start point");
        m_start
    } else {
        bisect(|m| t.neg_w_b(m), ms1, m_start, "item-1 structure")?
    };
    let p_a1 = t.s1.p_a(m1);
    let h = 0.5 * (2.0 * rect.b2 - rect.c2 - p_a1);
    Ok((
        StructureKind::B,
        SolveParams {
            p_a1: Some(p_a1),
            a1: Some(t.s1.a(m1)),
            m1: Some(m1),
            p: Some(m1 + h),
            big_p: Some([rect.c1 + m1, rect.c2 + h]),
            ..Default::default()
        },
    ))
}

fn small_small_inner(rect: &Rectangle) -> Result<(StructureKind, SolveParams)> {
    let t = Tree::new(rect);
    let cc = critical_constants(rect);
    let m10 = 0.5 * (2.0 * rect.b1 - rect.c1 - cc.r2);
    let m20 = 0.5 * (2.0 * rect.b2 - rect.c2 - cc.r1);
    let ms1 = t.s1.m_star();
    let ms2 = t.s2.m_star();
    match (m10 >= ms1, m20 >= ms2) {
        (true, true) => {
            // Which slope reaches 1 first as m1 falls along the balanced curve.
            let f_corner = t.balance(ms1, ms2);
            enum Limit {
                Both,
                First,
                Second,
            }
            let (limit, m1_end) = if f_corner.abs() <= TOL {
                (Limit::Both, ms1)
            } else if f_corner > 0.0 {
                (Limit::First, ms1)
            } else {
                let m = bisect(|m1| t.balance(m1, ms2), ms1, m10, "item-2 slope limit")?;
                (Limit::Second, m)
            };
            let w = |m1: f64| t.m2_balanced(m1).map(|m2| t.neg_w(m1, m2)).unwrap_or(f64::NAN);
            if w(m1_end) >= 0.0 {
                let m1 = if m10 - m1_end <= TOL { m10 } else { bisect(w, m1_end, m10, "bundle region mass")? };
                let m2 = t.m2_balanced(m1)?;
                return Ok(kind_a(&t, m1, m2));
            }
            match limit {
                Limit::Second => item_one_branch(rect, m1_end),
                Limit::First => {
                    let m2 = t.m2_balanced(ms1)?;
                    item_one_branch(&rect.swapped(), m2).map(swap_result)
                }
                Limit::Both => kind_c(rect),
            }
        }
        (true, false) => item_one_branch(rect, m10),
        (false, true) => item_one_branch(&rect.swapped(), m20).map(swap_result),
        (false, false) => kind_c(rect),
    }
}

pub fn solve_small_small(rect: &Rectangle) -> Result<Mechanism> {
    if rect.c1 == 0.0 && rect.c2 == 0.0 {
        return solve_zero_corner(rect);
    }
    normalised(rect, small_small_inner)
}

fn small_large_inner(rect: &Rectangle) -> Result<(StructureKind, SolveParams)> {
    let Rectangle { c1, c2, b1, b2 } = *rect;
    let lo = (2.0 * b2 - c2).max(0.0);
    let roots = real_roots_in_interval(&small_large_cubic(rect), lo, b2);
    if roots.is_empty() {
        return Err(Error::SolverDiverged {
            what: "no root of the small/large cubic".into(),
            lo,
            hi: b2,
            iterations: 0,
        });
    }
    let p = 0.5 * (b1 - c1);
    let mut best: Option<(f64, SolveParams)> = None;
    let mut valid = 0;
    for &pa in &roots {
        let den = b1 * b2 - c1 * pa;
        let a1 = if den > 0.0 { pa * (1.5 * pa + c2) / den } else { f64::INFINITY };
        if !(a1 <= 1.0 + TOL) || pa > a1 * (p + TOL) {
            continue;
        }
        valid += 1;
        let params = SolveParams {
            p_a1: Some(pa),
            a1: Some(a1.min(1.0)),
            p: Some(p),
            ..Default::default()
        };
        let rev = expected_revenue(&menu_from_structure(StructureKind::D, &params, rect)?, rect);
        if best.as_ref().map_or(true, |b| rev > b.0) {
            best = Some((rev, params));
        }
    }
    if valid > 1 {
        log::warn!("{valid} admissible roots {roots:?} of the small/large cubic; keeping the best revenue");
    }
    match best {
        Some((_, params)) => Ok((StructureKind::D, params)),
        None => kind_c(rect),
    }
}

pub fn solve_small_large(rect: &Rectangle) -> Result<Mechanism> {
    normalised(rect, small_large_inner)
}

pub fn solve_large_small(rect: &Rectangle) -> Result<Mechanism> {
    solve_small_large(&rect.swapped()).map(|m| m.swapped())
}

pub fn solve_small_verylarge(rect: &Rectangle) -> Result<Mechanism> {
    let params = SolveParams { p: Some(0.5 * (rect.b1 - rect.c1)), ..Default::default() };
    finish(StructureKind::E, params, rect)
}

pub fn solve_verylarge_small(rect: &Rectangle) -> Result<Mechanism> {
    solve_small_verylarge(&rect.swapped()).map(|m| m.swapped())
}

pub fn solve_bundling(rect: &Rectangle) -> Result<Mechanism> {
    let (kind, params) = kind_c(rect)?;
    finish(kind, params, rect)
}

/// Optimal mechanism for the uniform density on `rect`.
pub fn solve(rect: &Rectangle) -> Result<Mechanism> {
    match classify(rect) {
        PhaseRegion::SmallSmall => solve_small_small(rect),
        PhaseRegion::SmallLarge => solve_small_large(rect),
        PhaseRegion::SmallVeryLarge => solve_small_verylarge(rect),
        PhaseRegion::LargeSmall => solve_large_small(rect),
        PhaseRegion::VeryLargeSmall => solve_verylarge_small(rect),
        PhaseRegion::BothLarge => solve_bundling(rect),
    }
}
