//! Convex polygons, half-plane clipping, exact moments and best-response regions.

use crate::types::{Error, MenuItem, Rectangle, Result, ALLOC_TOL};

pub type Point = [f64; 2];

/// Adjacent vertices closer than this (max-norm) are merged.
pub const DEDUP_TOL: f64 = 1e-12;

/// Regions with area below this fraction of the support are dropped; their
/// points lie on the closed boundary of a neighbouring region.
const NULL_AREA_FRAC: f64 = 1e-14;

/// `{ z : n1 z1 + n2 z2 <= d }`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfPlane {
    pub n: [f64; 2],
    pub d: f64,
}

impl HalfPlane {
    pub fn new(n1: f64, n2: f64, d: f64) -> Result<Self> {
        if n1 == 0.0 && n2 == 0.0 {
            return Err(Error::InvalidArgument("half-plane normal is zero".into()));
        }
        Ok(HalfPlane { n: [n1, n2], d })
    }

    pub fn complement(&self) -> Self {
        HalfPlane {
            n: [-self.n[0], -self.n[1]],
            d: -self.d,
        }
    }

    #[inline]
    pub fn eval(&self, z: Point) -> f64 {
        self.n[0] * z[0] + self.n[1] * z[1] - self.d
    }

    pub fn contains(&self, z: Point, tol: f64) -> bool {
        self.eval(z) <= tol
    }
}

/// Convex polygon, vertices counter-clockwise. Fewer than three vertices means empty.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Polygon {
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        let mut p = Polygon { vertices };
        p.normalize();
        p
    }

    pub fn empty() -> Self {
        Polygon::default()
    }

    pub fn from_rect(r: &Rectangle) -> Self {
        Polygon {
            vertices: rect_vertices(r).to_vec(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3
    }

    pub fn area(&self) -> f64 {
        area(self)
    }

    pub fn clip(&self, h: &HalfPlane) -> Polygon {
        clip(self, h)
    }

    pub fn contains(&self, z: Point, tol: f64) -> bool {
        if self.is_empty() {
            return false;
        }
        let n = self.vertices.len();
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let cross = (b[0] - a[0]) * (z[1] - a[1]) - (b[1] - a[1]) * (z[0] - a[0]);
            let len = (b[0] - a[0]).abs().max((b[1] - a[1]).abs()).max(1e-300);
            cross / len >= -tol
        })
    }

    fn normalize(&mut self) {
        dedup(&mut self.vertices);
        if self.vertices.len() < 3 {
            self.vertices.clear();
            return;
        }
        if signed_area(&self.vertices) < 0.0 {
            self.vertices.reverse();
        }
    }
}

fn rect_vertices(r: &Rectangle) -> [Point; 4] {
    [
        [r.c1, r.c2],
        [r.right(), r.c2],
        [r.right(), r.top()],
        [r.c1, r.top()],
    ]
}

fn dedup(v: &mut Vec<Point>) {
    let close = |a: Point, b: Point| (a[0] - b[0]).abs() <= DEDUP_TOL && (a[1] - b[1]).abs() <= DEDUP_TOL;
    v.dedup_by(|a, b| close(*a, *b));
    while v.len() > 1 && close(v[0], v[v.len() - 1]) {
        v.pop();
    }
}

/// Sutherland-Hodgman step against one half-plane.
fn clip_raw(src: &[Point], h: &HalfPlane, mut push: impl FnMut(Point)) {
    let n = src.len();
    if n == 0 {
        return;
    }
    for i in 0..n {
        let s = src[if i == 0 { n - 1 } else { i - 1 }];
        let e = src[i];
        let ds = h.eval(s);
        let de = h.eval(e);
        let cut = |s: Point, e: Point| {
            let t = ds / (ds - de);
            [s[0] + t * (e[0] - s[0]), s[1] + t * (e[1] - s[1])]
        };
        if de <= 0.0 {
            if ds > 0.0 {
                push(cut(s, e));
            }
            push(e);
        } else if ds <= 0.0 {
            push(cut(s, e));
        }
    }
}

pub fn clip(poly: &Polygon, h: &HalfPlane) -> Polygon {
    let mut out = Vec::with_capacity(poly.vertices.len() + 1);
    clip_raw(&poly.vertices, h, |p| out.push(p));
    dedup(&mut out);
    if out.len() < 3 {
        out.clear();
    }
    Polygon { vertices: out }
}

fn signed_area(v: &[Point]) -> f64 {
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    let o = v[0];
    let mut s = 0.0;
    for i in 1..n - 1 {
        let a = [v[i][0] - o[0], v[i][1] - o[1]];
        let b = [v[i + 1][0] - o[0], v[i + 1][1] - o[1]];
        s += a[0] * b[1] - a[1] * b[0];
    }
    0.5 * s
}

pub fn area(poly: &Polygon) -> f64 {
    signed_area(&poly.vertices).abs()
}

/// Raw moments about a reference vertex: (A, ∫u, ∫v, ∫uv) with u = x - x0, v = y - y0.
fn local_moments(v: &[Point]) -> (Point, [f64; 4]) {
    let n = v.len();
    if n < 3 {
        return ([0.0, 0.0], [0.0; 4]);
    }
    let o = v[0];
    let (mut a, mut mx, mut my, mut ixy) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let p = [v[i][0] - o[0], v[i][1] - o[1]];
        let q = [v[(i + 1) % n][0] - o[0], v[(i + 1) % n][1] - o[1]];
        let cr = p[0] * q[1] - q[0] * p[1];
        a += cr;
        mx += (p[0] + q[0]) * cr;
        my += (p[1] + q[1]) * cr;
        ixy += cr * (p[0] * q[1] + 2.0 * p[0] * p[1] + 2.0 * q[0] * q[1] + q[0] * p[1]);
    }
    let sgn = if a < 0.0 { -1.0 } else { 1.0 };
    (o, [sgn * a / 2.0, sgn * mx / 6.0, sgn * my / 6.0, sgn * ixy / 24.0])
}

/// `(A, ∫z1 dA, ∫z2 dA)`.
pub fn moments(poly: &Polygon) -> (f64, f64, f64) {
    let (o, [a, mx, my, _]) = local_moments(&poly.vertices);
    (a, mx + o[0] * a, my + o[1] * a)
}

/// `∫ z1 z2 dA`.
pub fn moment_xy(poly: &Polygon) -> f64 {
    let (o, [a, mx, my, ixy]) = local_moments(&poly.vertices);
    ixy + o[0] * my + o[1] * mx + o[0] * o[1] * a
}

/// Index of the item a type picks; `None` is the outside option.
/// Ties go to the higher price, then to the lower index.
pub fn choose(menu: &[MenuItem], z: Point) -> (f64, Option<usize>) {
    let tol = 1e-12 * (1.0 + z[0].abs() + z[1].abs());
    let (mut best_u, mut best_t, mut best) = (0.0, 0.0, None);
    for (k, item) in menu.iter().enumerate() {
        let u = item.utility(z);
        let tie = (u - best_u).abs() <= tol;
        let better = u > best_u + tol
            || (tie && item.t > best_t + tol)
            || (tie && (item.t - best_t).abs() <= tol && best.is_none());
        if better {
            best_u = u;
            best_t = item.t;
            best = Some(k);
        }
    }
    (best_u.max(0.0), best)
}

/// Half-planes cutting the region of item `k` out of the support; `None` when
/// the item is never chosen.
fn region_constraints(menu: &[MenuItem], k: usize, out: &mut [HalfPlane; 8]) -> Option<usize> {
    let qk = menu[k];
    let mut n = 0;
    let mut push = |h: HalfPlane| {
        out[n] = h;
        n += 1;
    };
    let k_is_null = qk.is_null();
    if !k_is_null {
        if qk.q1.abs() <= ALLOC_TOL && qk.q2.abs() <= ALLOC_TOL {
            return None;
        }
        push(HalfPlane {
            n: [-qk.q1, -qk.q2],
            d: -qk.t,
        });
    }
    for (j, qj) in menu.iter().enumerate() {
        if j == k {
            continue;
        }
        let dn = [qj.q1 - qk.q1, qj.q2 - qk.q2];
        let dd = qj.t - qk.t;
        if dn[0].abs() <= ALLOC_TOL && dn[1].abs() <= ALLOC_TOL {
            // Same allocation: the cheaper one wins, exact duplicates go to the lower index.
            if dd < -ALLOC_TOL || (dd.abs() <= ALLOC_TOL && j < k) {
                return None;
            }
            continue;
        }
        push(HalfPlane { n: dn, d: dd });
    }
    Some(n)
}

/// Regions of a menu. `regions[k]` is where item `k` is chosen; `opt_out` is the
/// set where the buyer takes nothing, empty when the menu lists the null item.
#[derive(Debug, Clone)]
pub struct BestResponse {
    pub regions: Vec<Polygon>,
    pub opt_out: Polygon,
    /// Who receives the lowest type `(c1, c2)`.
    pub corner: Option<usize>,
}

pub fn best_response_regions(menu: &[MenuItem], rect: &Rectangle) -> BestResponse {
    let base = Polygon::from_rect(rect);
    let min_area = NULL_AREA_FRAC * rect.area();
    let keep = |p: Polygon| if area(&p) <= min_area { Polygon::empty() } else { p };
    let mut hs = [HalfPlane { n: [1.0, 0.0], d: 0.0 }; 8];
    let regions = (0..menu.len())
        .map(|k| match region_constraints(menu, k, &mut hs) {
            None => Polygon::empty(),
            Some(n) => keep(hs[..n].iter().fold(base.clone(), |p, h| clip(&p, h))),
        })
        .collect();
    let opt_out = if menu.iter().any(MenuItem::is_null) {
        Polygon::empty()
    } else {
        keep(menu.iter().fold(base, |p, it| {
            if it.q1.abs() <= ALLOC_TOL && it.q2.abs() <= ALLOC_TOL {
                p
            } else {
                clip(&p, &HalfPlane { n: [it.q1, it.q2], d: it.t })
            }
        }))
    };
    BestResponse {
        regions,
        opt_out,
        corner: choose(menu, rect.corner()).1,
    }
}

/// Fixed-capacity polygon for the allocation-free revenue path.
#[derive(Clone, Copy)]
struct Buf {
    pts: [Point; 16],
    len: usize,
}

impl Buf {
    fn rect(r: &Rectangle) -> Self {
        let mut b = Buf {
            pts: [[0.0; 2]; 16],
            len: 4,
        };
        b.pts[..4].copy_from_slice(&rect_vertices(r));
        b
    }

    fn clip(&self, h: &HalfPlane) -> Buf {
        let mut out = Buf {
            pts: [[0.0; 2]; 16],
            len: 0,
        };
        clip_raw(&self.pts[..self.len], h, |p| {
            if out.len < 16 {
                out.pts[out.len] = p;
                out.len += 1;
            }
        });
        out
    }

    fn area(&self) -> f64 {
        signed_area(&self.pts[..self.len]).abs()
    }
}

/// `Σ t_k area_k`, i.e. expected revenue times `b1 b2`, without heap allocation.
pub(crate) fn weighted_area_sum(menu: &[MenuItem], rect: &Rectangle) -> f64 {
    let min_area = NULL_AREA_FRAC * rect.area();
    let mut hs = [HalfPlane { n: [1.0, 0.0], d: 0.0 }; 8];
    let mut total = 0.0;
    for (k, item) in menu.iter().enumerate() {
        if item.t == 0.0 {
            continue;
        }
        let Some(n) = region_constraints(menu, k, &mut hs) else {
            continue;
        };
        let mut b = Buf::rect(rect);
        for h in &hs[..n] {
            b = b.clip(h);
            if b.len < 3 {
                break;
            }
        }
        if b.len >= 3 {
            let a = b.area();
            if a > min_area {
                total += item.t * a;
            }
        }
    }
    total
}
