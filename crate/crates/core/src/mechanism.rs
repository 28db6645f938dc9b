//! Menus from structure parameters, buyer choice and exact expected revenue.

use crate::geometry::{best_response_regions, choose, weighted_area_sum, Point};
use crate::measures::MuBar;
use crate::types::{
    sort_menu, Error, Menu, MenuItem, Rectangle, Result, SolveParams, StructureKind,
};

fn need(kind: StructureKind, v: Option<f64>, field: &'static str) -> Result<f64> {
    v.ok_or(Error::IncompleteParams { kind, field })
}

/// Explicit menu of a structure. Kinds `F`, `G`, `H` are built as the mirror
/// of `B`, `D`, `E`.
pub fn menu_from_structure(kind: StructureKind, params: &SolveParams, rect: &Rectangle) -> Result<Menu> {
    use StructureKind::*;
    match kind {
        F | G | H => {
            let mut menu: Menu = menu_from_structure(kind.swapped(), &params.swapped(), &rect.swapped())?
                .iter()
                .map(MenuItem::swapped)
                .collect();
            sort_menu(&mut menu);
            return Ok(menu);
        }
        _ => {}
    }
    let r = rect;
    let item1 = |a1: f64, p_a1: f64| MenuItem { q1: a1, q2: 1.0, t: r.c2 + p_a1 + a1 * r.c1 };
    let menu = match kind {
        A => {
            let a1 = need(kind, params.a1, "a1")?;
            let a2 = need(kind, params.a2, "a2")?;
            let p_a1 = need(kind, params.p_a1, "p_a1")?;
            let p_a2 = need(kind, params.p_a2, "p_a2")?;
            let p = need(kind, params.p, "p")?;
            vec![
                MenuItem::NULL,
                item1(a1, p_a1),
                MenuItem { q1: 1.0, q2: a2, t: r.c1 + p_a2 + a2 * r.c2 },
                MenuItem::bundle(r.c1 + r.c2 + p),
            ]
        }
        B => {
            let a1 = need(kind, params.a1, "a1")?;
            let p_a1 = need(kind, params.p_a1, "p_a1")?;
            let p = need(kind, params.p, "p")?;
            vec![MenuItem::NULL, item1(a1, p_a1), MenuItem::bundle(r.c1 + r.c2 + p)]
        }
        C => {
            let p = need(kind, params.p, "p")?;
            vec![MenuItem::NULL, MenuItem::bundle(r.c1 + r.c2 + p)]
        }
        D => {
            let a1 = need(kind, params.a1, "a1")?;
            let p_a1 = need(kind, params.p_a1, "p_a1")?;
            let p = need(kind, params.p, "p")?;
            let single = item1(a1, p_a1);
            // Indifference along the vertical line z1 = c1 + p.
            let t = single.t + (1.0 - a1) * (r.c1 + p);
            vec![MenuItem::NULL, single, MenuItem::bundle(t)]
        }
        E => vec![
            MenuItem { q1: 0.0, q2: 1.0, t: r.c2 },
            MenuItem::bundle(r.c2 + 0.5 * (r.c1 + r.b1)),
        ],
        F | G | H => unreachable!(),
    };
    for item in &menu {
        item.validate()?;
    }
    Ok(menu)
}

/// Buyer utility at `z` and the chosen item (`None`: takes nothing).
pub fn utility(menu: &[MenuItem], z: Point) -> (f64, Option<usize>) {
    choose(menu, z)
}

/// Price paid by type `z`.
pub fn payment(menu: &[MenuItem], z: Point) -> f64 {
    match choose(menu, z).1 {
        Some(k) => menu[k].t,
        None => 0.0,
    }
}

/// Exact expected payment under the uniform density.
pub fn expected_revenue(menu: &[MenuItem], rect: &Rectangle) -> f64 {
    weighted_area_sum(menu, rect) / rect.area()
}

/// `∫ u dμ̄`, integrating the piecewise-affine utility against μ̄ region by region.
pub fn primal_objective(menu: &[MenuItem], rect: &Rectangle) -> f64 {
    let mu = MuBar::new(*rect);
    let br = best_response_regions(menu, rect);
    br.regions
        .iter()
        .zip(menu)
        .enumerate()
        .map(|(k, (poly, it))| mu.integrate_affine(poly, [-it.t, it.q1, it.q2], br.corner == Some(k)))
        .sum()
}

/// On an `n x n` grid, no type pays strictly less than a componentwise smaller one.
pub fn revenue_monotonicity_check(menu: &[MenuItem], rect: &Rectangle, n: usize) -> bool {
    let n = n.max(2);
    let tol = 1e-9;
    let grid = |i: usize, lo: f64, w: f64| lo + w * i as f64 / (n - 1) as f64;
    let pay: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| payment(menu, [grid(i, rect.c1, rect.b1), grid(j, rect.c2, rect.b2)]))
                .collect()
        })
        .collect();
    // Monotone along both axes implies monotone in the product order.
    (0..n).all(|i| {
        (0..n).all(|j| {
            (i + 1 == n || pay[i + 1][j] >= pay[i][j] - tol) && (j + 1 == n || pay[i][j + 1] >= pay[i][j] - tol)
        })
    })
}
