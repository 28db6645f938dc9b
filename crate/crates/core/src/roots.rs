//! Polynomial real-root isolation and bracketed bisection.

use crate::types::{Error, Result};

pub const BISECT_TOL: f64 = 1e-12;
pub const BISECT_MAX_ITER: usize = 200;
const PANELS: usize = 256;
const DEDUP: f64 = 1e-10;

/// Horner evaluation, coefficients in ascending order.
pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

pub fn poly_derivative(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, &c)| k as f64 * c)
        .collect()
}

/// `Σ |c_k| |x|^k`, the natural rounding scale of `poly_eval` at `x`.
fn poly_scale(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x.abs() + c.abs())
}

/// Bisection to `BISECT_TOL` on a sign-changing bracket.
pub fn bisect(f: impl Fn(f64) -> f64, lo: f64, hi: f64, what: &str) -> Result<f64> {
    bisect_with(f, lo, hi, BISECT_TOL, BISECT_MAX_ITER, what)
}

pub fn bisect_with(
    f: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    max_iter: usize,
    what: &str,
) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::SolverDiverged {
            what: format!("{what}: no sign change (f(lo)={flo:e}, f(hi)={fhi:e})"),
            lo,
            hi,
            iterations: 0,
        });
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= tol || mid == lo || mid == hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    if (hi - lo).abs() <= tol {
        return Ok(0.5 * (lo + hi));
    }
    Err(Error::SolverDiverged {
        what: what.to_string(),
        lo,
        hi,
        iterations: max_iter,
    })
}

/// All real roots in `[lo, hi]`, sorted. Sign changes over 256 panels are
/// refined by bisection; even-multiplicity roots are picked up from the
/// derivative's roots.
pub fn real_roots_in_interval(coeffs: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut c = coeffs.to_vec();
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    if c.len() <= 1 || !(hi >= lo) {
        return Vec::new();
    }
    let f = |x: f64| poly_eval(&c, x);
    let tiny = |x: f64| f(x).abs() <= 1e-13 * poly_scale(&c, x).max(1e-300);
    let mut roots = Vec::new();
    if hi == lo {
        if tiny(lo) {
            roots.push(lo);
        }
        return roots;
    }
    let h = (hi - lo) / PANELS as f64;
    let mut x0 = lo;
    let mut f0 = f(x0);
    if tiny(lo) {
        roots.push(lo);
    }
    for i in 1..=PANELS {
        let x1 = if i == PANELS { hi } else { lo + h * i as f64 };
        let f1 = f(x1);
        if tiny(x1) {
            roots.push(x1);
        } else if f0 != 0.0 && f0.signum() != f1.signum() && !tiny(x0) {
            if let Ok(r) = bisect(f, x0, x1, "polynomial root") {
                roots.push(r);
            }
        }
        x0 = x1;
        f0 = f1;
    }
    if c.len() > 2 {
        for r in real_roots_in_interval(&poly_derivative(&c), lo, hi) {
            if tiny(r) {
                roots.push(r);
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for r in roots {
        if out.last().map_or(true, |&l| r - l > DEDUP) {
            out.push(r);
        }
    }
    out
}
