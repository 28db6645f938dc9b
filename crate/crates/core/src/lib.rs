//! Revenue-optimal two-item menus for a buyer with uniform values on a rectangle.

pub mod geometry;
pub mod linear;
pub mod measures;
pub mod mechanism;
pub mod oracle;
pub mod roots;
pub mod sample;
pub mod solver;
pub mod types;

pub use geometry::{best_response_regions, BestResponse, HalfPlane, Point, Polygon};
pub use linear::{linear_menu, linear_revenue, power_rate, solve_linear, LinearParams};
pub use mechanism::{expected_revenue, menu_from_structure, payment, primal_objective, utility};
pub use solver::{classify, critical_constants, solve, CriticalConstants, PhaseRegion};
pub use types::{Error, Mechanism, Menu, MenuItem, Rectangle, Result, SolveParams, StructureKind};
