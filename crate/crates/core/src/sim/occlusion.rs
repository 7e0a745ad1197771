use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{InteractionMode, MediumSpec};
use crate::seed;

/// What the finger does to clear grains lodged against an object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClearingAction {
    None,
    Vibrate,
    Twist,
}

/// Fraction of the footprint disturbed by lodged fine grains, regardless of action.
pub const STICKS_BOUNDARY_FRACTION: f64 = 0.1;

// Mean blocked fraction per action for grains that block, and the half-width
// of the per-seed uniform spread around it.
const BLOCKS_MEAN_NONE: f64 = 0.85;
const BLOCKS_MEAN_VIBRATE: f64 = 0.55;
const BLOCKS_MEAN_TWIST: f64 = 0.25;
const BLOCKS_SPREAD: f64 = 0.12;

/// Fraction of an object footprint hidden by grains.
pub fn occlusion_fraction(medium: &MediumSpec, action: ClearingAction, rng_seed: u64) -> f64 {
    match medium.interaction {
        InteractionMode::Slips => 0.0,
        InteractionMode::Sticks => STICKS_BOUNDARY_FRACTION,
        InteractionMode::Blocks => {
            let mean = match action {
                ClearingAction::None => BLOCKS_MEAN_NONE,
                ClearingAction::Vibrate => BLOCKS_MEAN_VIBRATE,
                ClearingAction::Twist => BLOCKS_MEAN_TWIST,
            };
            let mut rng = seed::rng(rng_seed);
            let jitter: f64 = rng.random_range(-BLOCKS_SPREAD..BLOCKS_SPREAD);
            (mean + jitter).clamp(0.0, 1.0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_over_seeds(m: &MediumSpec, a: ClearingAction) -> f64 {
        (0..100).map(|s| occlusion_fraction(m, a, s)).sum::<f64>() / 100.0
    }

    #[test]
    fn slips_never_occludes() {
        let mut m = MediumSpec::rice();
        m.interaction = InteractionMode::Slips;
        for a in [
            ClearingAction::None,
            ClearingAction::Vibrate,
            ClearingAction::Twist,
        ] {
            for s in 0..10 {
                assert_eq!(occlusion_fraction(&m, a, s), 0.0);
            }
        }
    }

    #[test]
    fn rice_clearing_order() {
        let rice = MediumSpec::rice();
        let none = mean_over_seeds(&rice, ClearingAction::None);
        let vib = mean_over_seeds(&rice, ClearingAction::Vibrate);
        let twist = mean_over_seeds(&rice, ClearingAction::Twist);
        assert!(twist < vib && vib < none, "{twist} {vib} {none}");
    }

    #[test]
    fn sand_ignores_action() {
        let sand = MediumSpec::sand();
        for s in 0..20 {
            assert_eq!(
                occlusion_fraction(&sand, ClearingAction::None, s),
                occlusion_fraction(&sand, ClearingAction::Twist, s)
            );
        }
    }

    #[test]
    fn fractions_in_unit_interval() {
        let rice = MediumSpec::rice();
        for s in 0..200 {
            let f = occlusion_fraction(&rice, ClearingAction::None, s);
            assert!((0.0..=1.0).contains(&f));
        }
    }
}
