//! Independent checks of solver output: region measures, shuffle conditions,
//! finite-difference stationarity and a brute-force menu search.

use crate::geometry::{best_response_regions, weighted_area_sum};
use crate::measures::{check_interval_measure_cvx_zero, IntervalMeasure, MuBar, ShuffleAlpha, ShuffleBeta, ShuffleBetaE, Side};
use crate::mechanism::{expected_revenue, revenue_monotonicity_check, utility};
use crate::types::{Mechanism, Menu, MenuItem, Rectangle, Result, StructureKind, ALLOC_TOL};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const MU_REGION_TOL: f64 = 1e-9;
pub const MU_TOTAL_TOL: f64 = 1e-12;
pub const SHUFFLE_TOL: f64 = 1e-10;
pub const FOC_TOL: f64 = 1e-3;
pub const FD_STEP: f64 = 1e-5;
/// Second differences carry round-off of order `eps R / h^2`.
pub const HESSIAN_TOL: f64 = 1e-4;
pub const ORACLE_GAP_TOL: f64 = 5e-3;
pub const ORACLE_UNDERSHOOT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub kind: StructureKind,
    pub revenue: f64,
    pub mu_d: f64,
    pub mu_z: Option<f64>,
    pub mu_a: Option<f64>,
    pub mu_b: Option<f64>,
    pub mu_w: Option<f64>,
    pub shuffle_mass: f64,
    pub shuffle_moment: f64,
    pub shuffle_sign_ok: bool,
    pub foc_gradient_norm: f64,
    /// Largest second difference along a free coordinate, divided by `1 + R`.
    pub hessian_diag_max: f64,
    /// Solver revenue minus the best brute-force revenue.
    pub oracle_gap: Option<f64>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl CertificateReport {
    fn push(&mut self, name: &str, value: f64, tolerance: f64, pass: bool) {
        self.checks.push(Check { name: name.to_string(), value, tolerance, pass });
        self.pass = self.checks.iter().all(|c| c.pass);
    }

    /// Fold in a brute-force result.
    pub fn with_oracle(mut self, brute_revenue: f64) -> Self {
        let gap = self.revenue - brute_revenue;
        let rel = gap / self.revenue.abs().max(1e-300);
        self.oracle_gap = Some(gap);
        self.push("oracle_gap", rel, ORACLE_GAP_TOL, rel.abs() <= ORACLE_GAP_TOL && rel >= -ORACLE_UNDERSHOOT_TOL);
        self
    }
}

/// Which coordinate of an item is fractional: 0 for `(a,1)`, 1 for `(1,a)`.
fn slope_axis(it: &MenuItem) -> Option<usize> {
    if (it.q2 - 1.0).abs() <= ALLOC_TOL && it.q1 < 1.0 - ALLOC_TOL {
        Some(0)
    } else if (it.q1 - 1.0).abs() <= ALLOC_TOL && it.q2 < 1.0 - ALLOC_TOL {
        Some(1)
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy)]
enum Coord {
    Price(usize),
    Slope(usize, usize),
}

fn perturbed(menu: &[MenuItem], c: Coord, delta: f64) -> Menu {
    let mut m = menu.to_vec();
    match c {
        Coord::Price(k) => m[k].t += delta,
        Coord::Slope(k, 0) => m[k].q1 += delta,
        Coord::Slope(k, _) => m[k].q2 += delta,
    }
    m
}

fn coord_value(menu: &[MenuItem], c: Coord) -> f64 {
    match c {
        Coord::Price(k) => menu[k].t,
        Coord::Slope(k, 0) => menu[k].q1,
        Coord::Slope(k, _) => menu[k].q2,
    }
}

fn shuffle_for(mech: &Mechanism, rect: &Rectangle) -> Result<(Vec<IntervalMeasure>, bool)> {
    use StructureKind::*;
    let sp = &mech.params;
    let mut out = Vec::new();
    let mut moment_may_be_positive = false;
    let alpha = |side: Side, p_a: Option<f64>, a: Option<f64>, m: Option<f64>| -> Option<IntervalMeasure> {
        let corner = match side {
            Side::Top => rect.c1,
            Side::Right => rect.c2,
        };
        match (p_a, a, m) {
            (Some(p_a), Some(a), Some(m)) if corner > 0.0 => Some(ShuffleAlpha::from_parts(side, p_a, a, m).measure(rect)),
            _ => None,
        }
    };
    match mech.kind {
        A => {
            out.extend(alpha(Side::Top, sp.p_a1, sp.a1, sp.m1));
            out.extend(alpha(Side::Right, sp.p_a2, sp.a2, sp.m2));
        }
        B => out.extend(alpha(Side::Top, sp.p_a1, sp.a1, sp.m1)),
        F => out.extend(alpha(Side::Right, sp.p_a2, sp.a2, sp.m2)),
        D => {
            if let (Some(p_a1), Some(a1), Some(p)) = (sp.p_a1, sp.a1, sp.p) {
                out.push(ShuffleBeta::new(p_a1, a1, p)?.measure(rect));
            }
        }
        G => {
            if let (Some(p_a2), Some(a2), Some(p)) = (sp.p_a2, sp.a2, sp.p) {
                out.push(ShuffleBeta::new(p_a2, a2, p)?.measure(&rect.swapped()));
            }
        }
        E => {
            out.push(ShuffleBetaE::measure(rect));
            moment_may_be_positive = true;
        }
        H => {
            out.push(ShuffleBetaE::measure(&rect.swapped()));
            moment_may_be_positive = true;
        }
        C => {}
    }
    Ok((out, moment_may_be_positive))
}

/// Measure identities, shuffle conditions and finite-difference stationarity.
pub fn certificate_check(mech: &Mechanism, rect: &Rectangle) -> Result<CertificateReport> {
    let menu = &mech.menu;
    let mu = MuBar::new(*rect);
    let revenue = expected_revenue(menu, rect);
    let br = best_response_regions(menu, rect);
    let mut rep = CertificateReport {
        kind: mech.kind,
        revenue,
        mu_d: mu.total(),
        mu_z: None,
        mu_a: None,
        mu_b: None,
        mu_w: None,
        shuffle_mass: 0.0,
        shuffle_moment: 0.0,
        shuffle_sign_ok: true,
        foc_gradient_norm: 0.0,
        hessian_diag_max: 0.0,
        oracle_gap: None,
        checks: Vec::new(),
        pass: true,
    };
    rep.push("mu_D", rep.mu_d, MU_TOTAL_TOL, rep.mu_d.abs() <= MU_TOTAL_TOL);

    // Every region of the menu carries zero net mass.
    let add = |slot: &mut Option<f64>, v: f64| *slot = Some(slot.unwrap_or(0.0) + v);
    if !br.opt_out.is_empty() {
        add(&mut rep.mu_z, mu.of_region(&br.opt_out, br.corner.is_none()));
    }
    for (k, (poly, it)) in br.regions.iter().zip(menu).enumerate() {
        if poly.is_empty() {
            continue;
        }
        let v = mu.of_region(poly, br.corner == Some(k));
        let slot = if it.is_null() {
            &mut rep.mu_z
        } else if it.is_bundle() {
            &mut rep.mu_w
        } else if slope_axis(it) == Some(0) {
            &mut rep.mu_a
        } else {
            &mut rep.mu_b
        };
        add(slot, v);
    }
    for (name, v) in [("mu_Z", rep.mu_z), ("mu_A", rep.mu_a), ("mu_B", rep.mu_b), ("mu_W", rep.mu_w)] {
        if let Some(v) = v {
            rep.push(name, v, MU_REGION_TOL, v.abs() <= MU_REGION_TOL);
        }
    }

    let (shuffles, moment_may_be_positive) = shuffle_for(mech, rect)?;
    let len = rect.scale();
    for m in &shuffles {
        let r = check_interval_measure_cvx_zero(m);
        if r.total_mass.abs() > rep.shuffle_mass.abs() {
            rep.shuffle_mass = r.total_mass;
        }
        if r.first_moment.abs() > rep.shuffle_moment.abs() {
            rep.shuffle_moment = r.first_moment;
        }
        rep.shuffle_sign_ok &= r.sign_pattern_ok;
    }
    if !shuffles.is_empty() {
        rep.push("shuffle_mass", rep.shuffle_mass, SHUFFLE_TOL, rep.shuffle_mass.abs() <= SHUFFLE_TOL);
        let ok = if moment_may_be_positive {
            rep.shuffle_moment >= -SHUFFLE_TOL * len
        } else {
            rep.shuffle_moment.abs() <= SHUFFLE_TOL * len
        };
        rep.push("shuffle_moment", rep.shuffle_moment, SHUFFLE_TOL * len, ok);
        rep.push("shuffle_sign_pattern", 0.0, 0.0, rep.shuffle_sign_ok);
    }

    // Stationarity along each free coordinate. Coordinates at a bound get a
    // one-sided test instead; the single-item price of the no-exclusion
    // structures sits at the participation kink and is left to the local test.
    let h_price = FD_STEP * len;
    let r0 = revenue;
    let mut grad2 = 0.0;
    let mut one_sided_worst: f64 = 0.0;
    let mut hmax = f64::NEG_INFINITY;
    for (k, it) in menu.iter().enumerate() {
        if it.is_null() {
            continue;
        }
        let mut coords = Vec::new();
        if !(mech.kind.no_exclusion() && !it.is_bundle()) {
            coords.push((Coord::Price(k), h_price, 0.0, f64::INFINITY));
        }
        if let Some(ax) = slope_axis(it) {
            coords.push((Coord::Slope(k, ax), FD_STEP, 0.0, 1.0));
        }
        for (c, h, lo, hi) in coords {
            let x = coord_value(menu, c);
            let f = |d: f64| expected_revenue(&perturbed(menu, c, d), rect);
            if x - h < lo {
                one_sided_worst = one_sided_worst.max((f(h) - r0) / h);
            } else if x + h > hi {
                one_sided_worst = one_sided_worst.max((f(-h) - r0) / h);
            } else {
                let (fp, fm) = (f(h), f(-h));
                grad2 += ((fp - fm) / (2.0 * h)).powi(2);
                hmax = hmax.max((fp - 2.0 * r0 + fm) / (h * h) / (1.0 + r0.abs()));
            }
        }
    }
    rep.foc_gradient_norm = grad2.sqrt();
    rep.hessian_diag_max = if hmax.is_finite() { hmax } else { 0.0 };
    rep.push("foc_gradient_norm", rep.foc_gradient_norm, FOC_TOL, rep.foc_gradient_norm < FOC_TOL);
    rep.push("foc_one_sided", one_sided_worst, FOC_TOL, one_sided_worst < FOC_TOL);
    rep.push("hessian_diag_max", rep.hessian_diag_max, HESSIAN_TOL, rep.hessian_diag_max <= HESSIAN_TOL);

    rep.push("menu_size", menu.len() as f64, 4.0, menu.len() <= 4);
    rep.push("revenue_monotone", 0.0, 1e-9, revenue_monotonicity_check(menu, rect, 50));
    let lip = lipschitz_excess(menu, rect, 40);
    rep.push("utility_lipschitz", lip, 1e-12, lip <= 1e-12);
    let rev_gap = (mech.revenue - revenue).abs();
    rep.push("reported_revenue", rev_gap, 1e-10 * len, rev_gap <= 1e-10 * len);
    Ok(rep)
}

/// Largest `|u(z) - u(z')| - |z - z'|_1` over a grid and its diagonal neighbours.
pub fn lipschitz_excess(menu: &[MenuItem], rect: &Rectangle, n: usize) -> f64 {
    let n = n.max(2);
    let pt = |i: usize, j: usize| {
        [
            rect.c1 + rect.b1 * i as f64 / (n - 1) as f64,
            rect.c2 + rect.b2 * j as f64 / (n - 1) as f64,
        ]
    };
    let mut worst = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            let z = pt(i, j);
            let u = utility(menu, z).0;
            for (di, dj) in [(1usize, 0usize), (0, 1), (1, 1), (3, 7), (n - 1 - i, n - 1 - j)] {
                if i + di >= n || j + dj >= n {
                    continue;
                }
                let w = pt(i + di, j + dj);
                let d = (u - utility(menu, w).0).abs() - ((z[0] - w[0]).abs() + (z[1] - w[1]).abs());
                worst = worst.max(d);
            }
        }
    }
    worst
}

/// True iff no single-coordinate move of size `eps` raises revenue by more than 1e-10.
pub fn local_max_check(menu: &[MenuItem], rect: &Rectangle, eps: f64) -> bool {
    let r0 = expected_revenue(menu, rect);
    menu.iter().enumerate().all(|(k, it)| {
        if it.is_null() {
            return true;
        }
        let mut coords = vec![Coord::Price(k)];
        if let Some(ax) = slope_axis(it) {
            coords.push(Coord::Slope(k, ax));
        }
        coords.into_iter().all(|c| {
            [eps, -eps].into_iter().all(|d| {
                let m = perturbed(menu, c, d);
                if m.iter().any(|it| it.validate().is_err()) {
                    return true;
                }
                expected_revenue(&m, rect) <= r0 + 1e-10
            })
        })
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub menu: Menu,
    pub revenue: f64,
    pub evaluations: usize,
}

/// Seeds carried from the coarse grid into refinement.
const SEEDS: usize = 12;

type Cand = (f64, [f64; 5]);

/// Keep the `k` best candidates, best first; ties resolved lexicographically
/// so the result does not depend on evaluation order.
fn keep_best(mut v: Vec<Cand>, k: usize) -> Vec<Cand> {
    v.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| {
        a.1.iter().zip(&b.1).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    }));
    v.truncate(k);
    v
}

/// Best-first selection of up to `k` candidates, each more than `sep[d]`
/// away from every earlier pick in some coordinate and with a different
/// revenue. Shifting the price of an unchosen item changes nothing, so equal
/// revenues usually mean the same menu.
fn keep_spread(v: Vec<Cand>, k: usize, sep: &[f64; 5]) -> Vec<Cand> {
    let mut out: Vec<Cand> = Vec::new();
    for c in keep_best(v, usize::MAX) {
        if out.len() == k {
            break;
        }
        let distinct = |o: &Cand| {
            (o.0 - c.0).abs() > 1e-12 * o.0.abs().max(1.0) && (0..5).any(|d| (o.1[d] - c.1[d]).abs() > sep[d])
        };
        if out.iter().all(distinct) {
            out.push(c);
        }
    }
    out
}

/// Grid search over `{null, (a1,1,t1), (1,a2,t2), (1,1,t)}`. The best
/// coarse cells are then refined `refine_rounds` times, each round shrinking
/// the window by 4 around the incumbent. Single-item prices above the bundle
/// price are skipped: such an item is never bought, and the grid point
/// `t_i = t` already represents dropping it.
pub fn brute_force_menu_search(rect: &Rectangle, coarse: usize, refine_rounds: usize) -> BruteForceResult {
    let n = coarse.max(8);
    let t_max = rect.c1 + rect.c2 + rect.b1 + rect.b2;
    // x = [a1, a2, t1, t2, t]
    let full = [(0.0, 1.0), (0.0, 1.0), (0.0, t_max), (0.0, t_max), (0.0, t_max)];
    let area = rect.area();
    let eval = |x: &[f64; 5]| {
        let menu = [
            MenuItem::NULL,
            MenuItem { q1: x[0], q2: 1.0, t: x[2] },
            MenuItem { q1: 1.0, q2: x[1], t: x[3] },
            MenuItem::bundle(x[4]),
        ];
        weighted_area_sum(&menu, rect) / area
    };
    let evaluations = std::sync::atomic::AtomicUsize::new(0);
    let grid = |window: &[(f64, f64); 5], n: usize, keep: usize| -> Vec<Cand> {
        let mut sep = [0.0; 5];
        for d in 0..5 {
            sep[d] = 1.01 * (window[d].1 - window[d].0) / (n - 1) as f64;
        }
        let g: Vec<Vec<f64>> = window
            .iter()
            .map(|&(lo, hi)| (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
            .collect();
        let per_slice: Vec<Vec<Cand>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut local: Vec<Cand> = Vec::new();
                let mut count = 0;
                for &a2 in &g[1] {
                    for &t in &g[4] {
                        for &t1 in g[2].iter().filter(|&&v| v <= t + 1e-15) {
                            for &t2 in g[3].iter().filter(|&&v| v <= t + 1e-15) {
                                let x = [g[0][i], a2, t1, t2, t];
                                local.push((eval(&x), x));
                                count += 1;
                            }
                        }
                    }
                    if local.len() > 64 * keep {
                        local = keep_spread(local, 8 * keep, &sep);
                    }
                }
                evaluations.fetch_add(count, std::sync::atomic::Ordering::Relaxed);
                keep_spread(local, 8 * keep, &sep)
            })
            .collect();
        keep_spread(per_slice.into_iter().flatten().collect(), keep, &sep)
    };
    let seeds = grid(&full, n, SEEDS);
    let n_ref = (n / 2).max(8);
    let refined: Vec<Cand> = seeds
        .iter()
        .map(|&seed| {
            let mut best = seed;
            for round in 1..=refine_rounds {
                let shrink = 0.25f64.powi(round as i32);
                let mut window = full;
                for d in 0..5 {
                    let hw = 0.5 * (full[d].1 - full[d].0) * shrink;
                    window[d] = ((best.1[d] - hw).max(full[d].0), (best.1[d] + hw).min(full[d].1));
                }
                if let Some(&c) = grid(&window, n_ref, 1).first() {
                    if c.0 > best.0 {
                        best = c;
                    }
                }
            }
            best
        })
        .collect();
    let (revenue, x) = keep_best(refined, 1)[0];
    BruteForceResult {
        menu: vec![
            MenuItem::NULL,
            MenuItem { q1: x[0], q2: 1.0, t: x[2] },
            MenuItem { q1: 1.0, q2: x[1], t: x[3] },
            MenuItem::bundle(x[4]),
        ],
        revenue,
        evaluations: evaluations.into_inner(),
    }
}

/// Certificate plus brute-force gap.
pub fn verify(mech: &Mechanism, rect: &Rectangle, coarse: usize, refine_rounds: usize) -> Result<(CertificateReport, BruteForceResult)> {
    let rep = certificate_check(mech, rect)?;
    let bf = brute_force_menu_search(rect, coarse, refine_rounds);
    Ok((rep.with_oracle(bf.revenue), bf))
}
