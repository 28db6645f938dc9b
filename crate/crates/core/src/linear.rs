//! Symmetric linear marginals `f(z) = 2z/(2c+1)` on `[c, c+1]`.
//!
//! The optimal menu keeps the four-item shape of the uniform small-corner
//! case. Its item lines come from a shuffling measure on `[c, P1]` (`P1` is the
//! z1-coordinate of the critical point), whose interior density is cubic.

use crate::geometry::{best_response_regions, moment_xy};
use crate::roots::{bisect, poly_eval, real_roots_in_interval};
use crate::types::{Error, Menu, MenuItem, Rectangle, Result};
use serde::{Deserialize, Serialize};

/// Upper end of the corner range on which the structure is known to persist.
pub const LINEAR_C_MAX: f64 = 0.250116;
pub const UNIFORM_POWER_RATE: f64 = -3.0;

const A_MAX: f64 = 3.0;
const SCAN: usize = 120;
/// Slack on `a1 <= 1` covering the rounding of `LINEAR_C_MAX`.
const A1_SLACK: f64 = 1e-5;
/// Scans are geometric in the distance to the lower end: as `c -> 0` the
/// solution collapses onto `a1 = 0`, `p_a1 = sqrt(0.6)`.
const SCAN_FLOOR: f64 = 1e-15;

/// `-3 - Σ z_i f_i'(z_i)/f_i(z_i)`. For a linear marginal `z f'/f = 1`.
pub fn power_rate(c: f64) -> f64 {
    let f = |z: f64| 2.0 * z / (2.0 * c + 1.0);
    let df = 2.0 / (2.0 * c + 1.0);
    let z = c + 0.5;
    -3.0 - 2.0 * z * df / f(z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearDensityInstance {
    pub c: f64,
}

impl LinearDensityInstance {
    pub fn new(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::NonFinite);
        }
        if !(0.0..=LINEAR_C_MAX).contains(&c) {
            return Err(Error::OutOfRange { c, max: LINEAR_C_MAX });
        }
        Ok(Self { c })
    }

    pub fn rect(&self) -> Rectangle {
        Rectangle { c1: self.c, c2: self.c, b1: 1.0, b2: 1.0 }
    }

    pub fn density(&self, z: [f64; 2]) -> f64 {
        let n = 2.0 * self.c + 1.0;
        4.0 * z[0] * z[1] / (n * n)
    }
}

/// Solved parameters; item 2 mirrors item 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub c: f64,
    pub p_a1: f64,
    pub a1: f64,
    #[serde(rename = "P1")]
    pub p1: f64,
    #[serde(rename = "P2")]
    pub p2: f64,
    /// Bundle price, `P1 + P2`.
    pub p: f64,
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Antiderivative vanishing at `lo`.
fn poly_integral_from(p: &[f64], lo: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    out.extend(p.iter().enumerate().map(|(k, &v)| v / (k + 1) as f64));
    out[0] = -poly_eval(&out, lo);
    out
}

/// The shuffling measure on `[c, P1]` of the top edge (and its mirror on the
/// right edge). Values carry the factor `(2c+1)^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenShuffleAlpha {
    pub c: f64,
    pub p_a1: f64,
    pub a1: f64,
    pub p1: f64,
}

impl GenShuffleAlpha {
    /// Point mass at `z1 = c`.
    pub fn atom(&self) -> f64 {
        let c = self.c;
        2.0 * c * c * ((c + 1.0) * (c + 1.0) - (c + self.p_a1).powi(2))
    }

    /// Density on `[c, P1]` as ascending coefficients in `z1`.
    pub fn density_poly(&self) -> Vec<f64> {
        let (c, a) = (self.c, self.a1);
        let k = c + self.p_a1 + a * c;
        let g0 = 3.0 * (c + 1.0) * (c + 1.0) - 5.0 * k * k;
        vec![0.0, 2.0 * g0, 20.0 * a * k, -10.0 * a * a]
    }

    pub fn density(&self, z: f64) -> f64 {
        poly_eval(&self.density_poly(), z)
    }

    pub fn mass(&self) -> f64 {
        self.atom() + poly_eval(&poly_integral_from(&self.density_poly(), self.c), self.p1)
    }

    /// First moment about `c`; the atom sits at `c` and drops out.
    pub fn first_moment(&self) -> f64 {
        poly_eval(&self.moment_poly(), self.p1)
    }

    /// `∫_c^x (z-c) density dz` as a polynomial in `x`.
    fn moment_poly(&self) -> Vec<f64> {
        poly_integral_from(&poly_mul(&self.density_poly(), &[-self.c, 1.0]), self.c)
    }

    /// Atom `>= 0`, then a density that changes sign at most once, from `-` to `+`.
    pub fn sign_pattern_ok(&self) -> bool {
        if self.atom() < -1e-14 {
            return false;
        }
        let d = self.density_poly();
        let inner: Vec<f64> = real_roots_in_interval(&d, self.c, self.p1)
            .into_iter()
            .filter(|&r| r > self.c + 1e-12 && r < self.p1 - 1e-12)
            .collect();
        match inner.as_slice() {
            [] => true,
            [r] => poly_eval(&d, 0.5 * (self.c + r)) <= 0.0,
            _ => false,
        }
    }
}

/// Mass condition on `[c, P1]`.
pub fn marginal_residual(c: f64, p_a1: f64, a1: f64, p1: f64) -> f64 {
    GenShuffleAlpha { c, p_a1, a1, p1 }.mass()
}

/// First-moment condition on `[c, P1]`.
pub fn expectation_residual(c: f64, p_a1: f64, a1: f64, p1: f64) -> f64 {
    GenShuffleAlpha { c, p_a1, a1, p1 }.first_moment()
}

/// `μ̄(W)` for the bundle region `[P1, c+1]^2 ∩ {z1 + z2 >= P1 + P2}`.
pub fn mu_w_residual(c: f64, p_a1: f64, a1: f64, p1: f64) -> f64 {
    let n2 = (2.0 * c + 1.0).powi(2);
    let top = (c + 1.0) * (c + 1.0);
    let p2 = c + p_a1 - a1 * (p1 - c);
    let tail = top - p1 * p1;
    // ∫∫ over the cut-off triangle of 4 z1 z2.
    let tri = if p2 > p1 {
        let s = p1 + p2;
        // 2 z2 ((s - z2)^2 - p1^2)
        let q = [0.0, 2.0 * (s * s - p1 * p1), -4.0 * s, 2.0];
        poly_eval(&poly_integral_from(&q, p1), p2)
    } else {
        0.0
    };
    (4.0 * top * tail - 5.0 * tail * tail + 5.0 * tri) / n2
}

/// First `-` to `+` crossing of the first moment in `(c, min(c+1, c+p_a1/a1)]`.
fn p1_from_moment(c: f64, p_a1: f64, a1: f64) -> Option<f64> {
    if a1 <= 0.0 {
        return None;
    }
    let hi = (c + 1.0).min(c + p_a1 / a1);
    let m = GenShuffleAlpha { c, p_a1, a1, p1: hi }.moment_poly();
    let lo = c + 1e-9 * (1.0 + c);
    real_roots_in_interval(&m, lo, hi)
        .into_iter()
        .find(|&r| {
            let d = 1e-9 * (1.0 + r);
            poly_eval(&m, r - d) < 0.0 && poly_eval(&m, (r + d).min(hi)) >= 0.0
        })
}

/// Sign change of `f` on a geometric scan of `(lo, hi)`, refined by
/// bisection. Points where `f` is undefined are skipped.
fn scan_then_bisect(f: impl Fn(f64) -> Option<f64>, lo: f64, hi: f64, what: &str) -> Result<f64> {
    let w = hi - lo;
    let ratio = (1.0 / SCAN_FLOOR).powf(1.0 / SCAN as f64);
    let mut prev: Option<(f64, f64)> = None;
    let mut d = SCAN_FLOOR;
    for _ in 0..=SCAN {
        let x = lo + w * d.min(1.0);
        d *= ratio;
        let Some(v) = f(x) else {
            prev = None;
            continue;
        };
        if let Some((x0, v0)) = prev {
            if v0.signum() != v.signum() || v == 0.0 {
                return bisect(|t| f(t).unwrap_or(f64::NAN), x0, x, what);
            }
        }
        prev = Some((x, v));
    }
    Err(Error::NoConvergence(format!("{what}: no sign change on [{lo}, {hi}]")))
}

/// `(a1, P1)` solving the mass and moment conditions for a given `p_a1`.
fn slope_for(c: f64, p_a1: f64) -> Result<(f64, f64)> {
    let mass = |a: f64| p1_from_moment(c, p_a1, a).map(|p1| marginal_residual(c, p_a1, a, p1));
    let a = scan_then_bisect(mass, 0.0, A_MAX, "linear-density slope")?;
    let p1 = p1_from_moment(c, p_a1, a)
        .ok_or_else(|| Error::NoConvergence(format!("moment condition lost at a1={a}, p_a1={p_a1}")))?;
    Ok((a, p1))
}

/// Item lines and bundle price for `c` in `[0, LINEAR_C_MAX]`. Below
/// `c ~ 1e-6` the system is badly conditioned and `P1` loses digits; `c = 0`
/// itself is solved in closed form.
pub fn solve_linear(c: f64) -> Result<LinearParams> {
    let inst = LinearDensityInstance::new(c)?;
    let c = inst.c;
    let s = 0.6f64.sqrt();
    if c == 0.0 {
        // Flat item lines at sqrt(0.6); μ̄(W) = 0 is a quartic in P1. Its
        // other positive root lies above 1, outside the support.
        let quartic = [-0.7, 2.0 * s, 3.0, -10.0 / 3.0 * s, -5.0 / 6.0];
        let p1 = real_roots_in_interval(&quartic, 0.0, s)
            .into_iter()
            .next()
            .ok_or_else(|| Error::NoConvergence("bundle-region quartic has no root in (0, sqrt(0.6))".into()))?;
        return Ok(LinearParams { c, p_a1: s, a1: 0.0, p1, p2: s, p: p1 + s });
    }
    // At p_a1 = s(c+1) - c the density vanishes at c; above it starts negative.
    let lo = s * (c + 1.0) - c;
    let hi = 1.0;
    let w = |pa: f64| slope_for(c, pa).ok().map(|(a, p1)| mu_w_residual(c, pa, a, p1));
    let p_a1 = scan_then_bisect(w, lo, hi, "linear-density bundle region")?;
    let (a1, p1) = slope_for(c, p_a1)?;
    let p2 = c + p_a1 - a1 * (p1 - c);
    let out = LinearParams { c, p_a1, a1, p1, p2, p: p1 + p2 };
    // The range end is the corner at which a1 reaches 1, rounded.
    let ok = (0.0..=1.0 + A1_SLACK).contains(&a1) && (c..=c + 1.0).contains(&p1) && (c..=c + 1.0).contains(&p2);
    if !ok {
        return Err(Error::NoConvergence(format!("solution outside the support: {out:?}")));
    }
    Ok(out)
}

/// Null item, `(a1, 1)`, `(1, a1)` and the bundle.
pub fn linear_menu(params: &LinearParams) -> Menu {
    let c = params.c;
    let t = c + params.p_a1 + params.a1 * c;
    let a = params.a1.min(1.0);
    vec![
        MenuItem::NULL,
        MenuItem { q1: a, q2: 1.0, t },
        MenuItem { q1: 1.0, q2: a, t },
        MenuItem::bundle(params.p),
    ]
}

/// Expected payment under the product of linear marginals.
pub fn linear_revenue(params: &LinearParams) -> f64 {
    let inst = LinearDensityInstance { c: params.c };
    let menu = linear_menu(params);
    let n2 = (2.0 * params.c + 1.0).powi(2);
    let br = best_response_regions(&menu, &inst.rect());
    br.regions.iter().zip(&menu).map(|(poly, it)| it.t * 4.0 * moment_xy(poly) / n2).sum()
}
