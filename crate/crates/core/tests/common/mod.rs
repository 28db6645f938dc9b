#![allow(dead_code)]

pub use optmech::sample::{seeded_rects, DEFAULT_SEED as SEED};

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}
