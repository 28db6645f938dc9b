//! Domain records shared by the solver, the oracle and the front ends.

use serde::{Deserialize, Serialize};
use std::fmt;

/// Tolerance used when deciding whether an allocation coordinate equals 0 or 1.
pub const ALLOC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("non-finite input")]
    NonFinite,
    #[error("side lengths must be positive (b1={b1}, b2={b2})")]
    NonPositiveSide { b1: f64, b2: f64 },
    #[error("corner coordinates must be non-negative (c1={c1}, c2={c2})")]
    NegativeCorner { c1: f64, c2: f64 },
    #[error("invalid menu item ({q1}, {q2}, {t}): {reason}")]
    InvalidMenuItem {
        q1: f64,
        q2: f64,
        t: f64,
        reason: &'static str,
    },
    #[error("invalid mechanism: {0}")]
    InvalidMechanism(String),
    #[error("shuffling measure is degenerate when the corner coordinate is zero")]
    ZeroCornerCase,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("structure {kind} needs parameter `{field}`")]
    IncompleteParams { kind: StructureKind, field: &'static str },
    #[error("solver diverged: {what} (bracket [{lo}, {hi}], {iterations} iterations)")]
    SolverDiverged {
        what: String,
        lo: f64,
        hi: f64,
        iterations: usize,
    },
    #[error("c = {c} is outside the supported range [0, {max}]")]
    OutOfRange { c: f64, max: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Support `[c1, c1+b1] x [c2, c2+b2]` of the uniform valuation density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    pub c1: f64,
    pub c2: f64,
    pub b1: f64,
    pub b2: f64,
}

impl Rectangle {
    pub fn new(c1: f64, c2: f64, b1: f64, b2: f64) -> Result<Self> {
        validate_rectangle(c1, c2, b1, b2)
    }

    /// Reflect across the diagonal, exchanging the roles of the two items.
    pub fn swapped(&self) -> Self {
        Rectangle {
            c1: self.c2,
            c2: self.c1,
            b1: self.b2,
            b2: self.b1,
        }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        Rectangle {
            c1: self.c1 * lambda,
            c2: self.c2 * lambda,
            b1: self.b1 * lambda,
            b2: self.b2 * lambda,
        }
    }

    pub fn area(&self) -> f64 {
        self.b1 * self.b2
    }

    pub fn corner(&self) -> [f64; 2] {
        [self.c1, self.c2]
    }

    pub fn top(&self) -> f64 {
        self.c2 + self.b2
    }

    pub fn right(&self) -> f64 {
        self.c1 + self.b1
    }

    /// Characteristic length, used to scale absolute tolerances.
    pub fn scale(&self) -> f64 {
        (self.c1 + self.b1).max(self.c2 + self.b2).max(1.0)
    }

    pub fn contains(&self, z: [f64; 2], tol: f64) -> bool {
        z[0] >= self.c1 - tol
            && z[0] <= self.right() + tol
            && z[1] >= self.c2 - tol
            && z[1] <= self.top() + tol
    }
}

pub fn validate_rectangle(c1: f64, c2: f64, b1: f64, b2: f64) -> Result<Rectangle> {
    if ![c1, c2, b1, b2].iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if b1 <= 0.0 || b2 <= 0.0 {
        return Err(Error::NonPositiveSide { b1, b2 });
    }
    if c1 < 0.0 || c2 < 0.0 {
        return Err(Error::NegativeCorner { c1, c2 });
    }
    Ok(Rectangle { c1, c2, b1, b2 })
}

/// A lottery `(q1, q2)` offered at price `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MenuItem {
    pub q1: f64,
    pub q2: f64,
    pub t: f64,
}

impl MenuItem {
    pub const NULL: MenuItem = MenuItem {
        q1: 0.0,
        q2: 0.0,
        t: 0.0,
    };

    /// Checked constructor; only `(0,0)`, `(a1,1)`, `(1,a2)` and `(1,1)` are accepted.
    pub fn new(q1: f64, q2: f64, t: f64) -> Result<Self> {
        let item = MenuItem { q1, q2, t };
        item.validate()?;
        Ok(item)
    }

    pub fn bundle(t: f64) -> Self {
        MenuItem { q1: 1.0, q2: 1.0, t }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason| Error::InvalidMenuItem {
            q1: self.q1,
            q2: self.q2,
            t: self.t,
            reason,
        };
        if !(self.q1.is_finite() && self.q2.is_finite() && self.t.is_finite()) {
            return Err(bad("non-finite entry"));
        }
        let in_unit = |q: f64| (-ALLOC_TOL..=1.0 + ALLOC_TOL).contains(&q);
        if !in_unit(self.q1) || !in_unit(self.q2) {
            return Err(bad("allocation outside [0,1]"));
        }
        if self.t < -ALLOC_TOL {
            return Err(bad("negative price"));
        }
        if self.is_null() {
            return Ok(());
        }
        if self.q1.abs() <= ALLOC_TOL && self.q2.abs() <= ALLOC_TOL {
            return Err(bad("zero allocation with positive price"));
        }
        if (self.q1 - 1.0).abs() > ALLOC_TOL && (self.q2 - 1.0).abs() > ALLOC_TOL {
            return Err(bad("allocation must be (a1,1), (1,a2) or (1,1)"));
        }
        Ok(())
    }

    pub fn is_null(&self) -> bool {
        self.q1.abs() <= ALLOC_TOL && self.q2.abs() <= ALLOC_TOL && self.t.abs() <= ALLOC_TOL
    }

    pub fn is_bundle(&self) -> bool {
        (self.q1 - 1.0).abs() <= ALLOC_TOL && (self.q2 - 1.0).abs() <= ALLOC_TOL
    }

    pub fn utility(&self, z: [f64; 2]) -> f64 {
        self.q1 * z[0] + self.q2 * z[1] - self.t
    }

    pub fn swapped(&self) -> Self {
        MenuItem {
            q1: self.q2,
            q2: self.q1,
            t: self.t,
        }
    }

    pub fn scaled_price(&self, lambda: f64) -> Self {
        MenuItem {
            t: self.t * lambda,
            ..*self
        }
    }
}

pub type Menu = Vec<MenuItem>;

/// The eight optimal structures. `A, B, F, C, D, E, G, H` name the
/// figure panels (a) to (h) in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StructureKind {
    A,
    B,
    F,
    C,
    D,
    E,
    G,
    H,
}

impl StructureKind {
    pub const ALL: [StructureKind; 8] = [
        StructureKind::A,
        StructureKind::B,
        StructureKind::F,
        StructureKind::C,
        StructureKind::D,
        StructureKind::E,
        StructureKind::G,
        StructureKind::H,
    ];

    /// The structure obtained by exchanging the two items.
    pub fn swapped(self) -> Self {
        use StructureKind::*;
        match self {
            A => A,
            B => F,
            F => B,
            C => C,
            D => G,
            G => D,
            E => H,
            H => E,
        }
    }

    /// Whether the menu omits the null item (the lowest type always buys).
    pub fn no_exclusion(self) -> bool {
        matches!(self, StructureKind::E | StructureKind::H)
    }

    pub fn as_str(self) -> &'static str {
        use StructureKind::*;
        match self {
            A => "A",
            B => "B",
            F => "F",
            C => "C",
            D => "D",
            E => "E",
            G => "G",
            H => "H",
        }
    }

    pub fn index(self) -> usize {
        Self::ALL.iter().position(|&k| k == self).unwrap()
    }
}

impl fmt::Display for StructureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for StructureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        StructureKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown structure kind `{s}`")))
    }
}

/// Solved structure parameters. Which fields are present depends on the kind.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveParams {
    pub p_a1: Option<f64>,
    pub p_a2: Option<f64>,
    pub a1: Option<f64>,
    pub a2: Option<f64>,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    /// Bundle offset: the bundle sells at `c1 + c2 + p`.
    pub p: Option<f64>,
    #[serde(rename = "P")]
    pub big_p: Option<[f64; 2]>,
    #[serde(rename = "Q")]
    pub big_q: Option<[f64; 2]>,
}

impl SolveParams {
    pub fn swapped(&self) -> Self {
        let flip = |v: Option<[f64; 2]>| v.map(|[x, y]| [y, x]);
        SolveParams {
            p_a1: self.p_a2,
            p_a2: self.p_a1,
            a1: self.a2,
            a2: self.a1,
            m1: self.m2,
            m2: self.m1,
            p: self.p,
            big_p: flip(self.big_q),
            big_q: flip(self.big_p),
        }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        let s = |v: Option<f64>| v.map(|x| x * lambda);
        let s2 = |v: Option<[f64; 2]>| v.map(|[x, y]| [x * lambda, y * lambda]);
        SolveParams {
            p_a1: s(self.p_a1),
            p_a2: s(self.p_a2),
            a1: self.a1,
            a2: self.a2,
            m1: s(self.m1),
            m2: s(self.m2),
            p: s(self.p),
            big_p: s2(self.big_p),
            big_q: s2(self.big_q),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMechanism")]
pub struct Mechanism {
    pub kind: StructureKind,
    pub params: SolveParams,
    pub menu: Menu,
    pub revenue: f64,
}

#[derive(Deserialize)]
struct RawMechanism {
    kind: StructureKind,
    params: SolveParams,
    menu: Menu,
    revenue: f64,
}

impl TryFrom<RawMechanism> for Mechanism {
    type Error = Error;
    fn try_from(raw: RawMechanism) -> Result<Self> {
        Mechanism::new(raw.kind, raw.params, raw.menu, raw.revenue)
    }
}

impl Mechanism {
    pub fn new(kind: StructureKind, params: SolveParams, menu: Menu, revenue: f64) -> Result<Self> {
        if menu.len() > 4 {
            return Err(Error::InvalidMechanism(format!(
                "menu has {} items, at most 4 allowed",
                menu.len()
            )));
        }
        for item in &menu {
            item.validate()?;
        }
        if !menu.iter().any(MenuItem::is_bundle) {
            return Err(Error::InvalidMechanism("menu lacks the bundle".into()));
        }
        if !kind.no_exclusion() && !menu.iter().any(MenuItem::is_null) {
            return Err(Error::InvalidMechanism(format!(
                "kind {kind} requires the null item"
            )));
        }
        if !revenue.is_finite() {
            return Err(Error::InvalidMechanism("non-finite revenue".into()));
        }
        Ok(Mechanism {
            kind,
            params,
            menu,
            revenue,
        })
    }

    pub fn bundle_price(&self) -> f64 {
        self.menu
            .iter()
            .find(|m| m.is_bundle())
            .map(|m| m.t)
            .unwrap_or(f64::NAN)
    }

    /// The same mechanism with the two items exchanged.
    pub fn swapped(&self) -> Self {
        let mut menu: Menu = self.menu.iter().map(MenuItem::swapped).collect();
        sort_menu(&mut menu);
        Mechanism {
            kind: self.kind.swapped(),
            params: self.params.swapped(),
            menu,
            revenue: self.revenue,
        }
    }
}

/// Canonical item order: null, `(a1,1)`, `(1,a2)`, bundle.
pub fn sort_menu(menu: &mut Menu) {
    let rank = |m: &MenuItem| {
        if m.is_null() {
            0
        } else if m.is_bundle() {
            3
        } else if (m.q2 - 1.0).abs() <= ALLOC_TOL {
            1
        } else {
            2
        }
    };
    menu.sort_by_key(rank);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rectangle_examples() {
        assert!(validate_rectangle(0.0, 0.0, 1.0, 1.0).is_ok());
        assert!(validate_rectangle(4.0, 4.0, 12.0, 3.0).is_ok());
        assert!(matches!(
            validate_rectangle(0.0, 0.0, 0.0, 1.0),
            Err(Error::NonPositiveSide { .. })
        ));
        assert!(matches!(
            validate_rectangle(-1.0, 0.0, 1.0, 1.0),
            Err(Error::NegativeCorner { .. })
        ));
        assert!(matches!(
            validate_rectangle(f64::NAN, 0.0, 1.0, 1.0),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn menu_item_forms() {
        assert!(MenuItem::new(0.0, 0.0, 0.0).is_ok());
        assert!(MenuItem::new(0.3, 1.0, 1.0).is_ok());
        assert!(MenuItem::new(1.0, 0.0, 1.0).is_ok());
        assert!(MenuItem::new(0.5, 0.5, 1.0).is_err());
        assert!(MenuItem::new(0.0, 0.0, 1.0).is_err());
        assert!(MenuItem::new(1.2, 1.0, 1.0).is_err());
        assert!(MenuItem::new(1.0, 1.0, -0.5).is_err());
    }

    #[test]
    fn mechanism_rejects_bad_menus() {
        let ok = vec![MenuItem::NULL, MenuItem::bundle(1.0)];
        assert!(Mechanism::new(StructureKind::C, SolveParams::default(), ok, 0.5).is_ok());
        let no_null = vec![MenuItem::bundle(1.0)];
        assert!(Mechanism::new(StructureKind::C, SolveParams::default(), no_null.clone(), 0.5).is_err());
        assert!(Mechanism::new(StructureKind::E, SolveParams::default(), no_null, 0.5).is_ok());
        let lottery = vec![
            MenuItem::NULL,
            MenuItem { q1: 0.5, q2: 0.5, t: 0.2 },
            MenuItem::bundle(1.0),
        ];
        assert!(Mechanism::new(StructureKind::A, SolveParams::default(), lottery, 0.5).is_err());
    }

    #[test]
    fn kind_swap_is_involution() {
        for k in StructureKind::ALL {
            assert_eq!(k.swapped().swapped(), k);
            assert_eq!(k.as_str().parse::<StructureKind>().unwrap(), k);
        }
    }

    #[test]
    fn deserialize_validates() {
        let bad = r#"{"kind":"A","params":{},"menu":[{"q1":0.5,"q2":0.5,"t":1.0}],"revenue":0.1}"#;
        assert!(serde_json::from_str::<Mechanism>(bad).is_err());
    }
}
