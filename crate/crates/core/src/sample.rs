//! Seeded random rectangles, spread over the six phase regions.

use crate::solver::{classify, PhaseRegion};
use crate::types::Rectangle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_SEED: u64 = 20240611;

/// Corner-to-side ratio ranges that mostly land in `region`.
fn ratio_box(region: PhaseRegion) -> [(f64, f64); 2] {
    use PhaseRegion::*;
    match region {
        SmallSmall => [(0.0, 1.0), (0.0, 1.2)],
        SmallLarge => [(0.0, 1.0), (1.0, 8.0)],
        SmallVeryLarge => [(0.0, 1.0), (2.0, 40.0)],
        LargeSmall => [(1.0, 8.0), (0.0, 1.0)],
        VeryLargeSmall => [(2.0, 40.0), (0.0, 1.0)],
        BothLarge => [(1.0, 6.0), (1.0, 6.0)],
    }
}

/// Rejection sample inside one phase region, sides in `[0.5, 2)`.
pub fn rect_in(rng: &mut ChaCha8Rng, region: PhaseRegion) -> Rectangle {
    let [r1, r2] = ratio_box(region);
    loop {
        let b1 = rng.gen_range(0.5..2.0);
        let b2 = rng.gen_range(0.5..2.0);
        let c1 = b1 * rng.gen_range(r1.0..r1.1);
        let c2 = b2 * rng.gen_range(r2.0..r2.1);
        let r = Rectangle { c1, c2, b1, b2 };
        if classify(&r) == region {
            return r;
        }
    }
}

/// `n` rectangles cycling through the six regions.
pub fn seeded_rects(seed: u64, n: usize) -> Vec<Rectangle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|i| rect_in(&mut rng, PhaseRegion::ALL[i % PhaseRegion::ALL.len()])).collect()
}
