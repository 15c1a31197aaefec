//! Per-destination stack features: the eight quantities every priority
//! function sees when container `c` is about to be reshuffled from its
//! origin stack to a candidate destination stack.

use thiserror::Error;

use crate::energy::kinematics;
use crate::yard::{Bay, Container, Slot};

/// Feature vector for one `(container, origin, destination)` decision. All
/// values are carried as `f64` because they feed straight into arithmetic
/// priority expressions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackFeatures {
    /// Tiers hoisted when moving the container to the destination (`h_s`).
    pub hoisted: f64,
    /// Tiers lowered (`l_s`).
    pub lowered: f64,
    /// Stacks trolleyed (`x_s`).
    pub crossed: f64,
    /// 1 if the container would have to be reshuffled again from the
    /// destination, else 0 (`r_s`).
    pub rehandle: f64,
    /// Lowest container id in the destination; `C + 1` when empty (`t_s`).
    pub lowest_id: f64,
    /// Tightness `(t_s - c - 1) / C` (`g_s`).
    pub tightness: f64,
    /// Stacks of trolley travel away from the truck lane, 0 when the move
    /// heads toward the truck (`k_s`).
    pub away_from_truck: f64,
    /// Containers already in the destination (`n_s`).
    pub height: f64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("stack {dest} is not a legal destination from stack {origin}")]
    IllegalDestination { origin: usize, dest: usize },
}

/// Compute the feature vector for relocating `container` (currently on top
/// of `origin`) onto `dest`.
pub fn compute_features(
    bay: &Bay,
    container: Container,
    origin: usize,
    dest: usize,
) -> Result<StackFeatures, FeatureError> {
    if dest == origin
        || dest < 1
        || dest > bay.stack_count()
        || bay.height(dest) >= bay.max_height()
    {
        return Err(FeatureError::IllegalDestination { origin, dest });
    }
    let pickup = Slot::new(origin, bay.height(origin));
    let landing = Slot::new(dest, bay.height(dest) + 1);
    let (hoisted, lowered, crossed) = kinematics(pickup, landing);

    let total = bay.id_bound() as f64;
    let c = container.id as f64;
    let lowest = bay.min_id_in(dest).unwrap_or(bay.id_bound() + 1) as f64;
    let rehandle = if lowest < c { 1.0 } else { 0.0 };
    let tightness = (lowest - c - 1.0) / total;
    let away_from_truck = dest.saturating_sub(origin) as f64;

    Ok(StackFeatures {
        hoisted: hoisted as f64,
        lowered: lowered as f64,
        crossed: crossed as f64,
        rehandle,
        lowest_id: lowest,
        tightness,
        away_from_truck,
        height: bay.height(dest) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::yard::bay_from_ids;
    use approx::assert_relative_eq;

    #[test]
    fn empty_destination_uses_sentinel() {
        // C = 10 via the highest id present; container c = 3 moves to the
        // empty stack: t_s = 11, r_s = 0, g_s = (11-3-1)/10 = 0.7, n_s = 0.
        let bay = bay_from_ids(&[&[10, 3], &[]], 4);
        let c = bay.top(1).unwrap();
        let f = compute_features(&bay, c, 1, 2).unwrap();
        assert_eq!(f.lowest_id, 11.0);
        assert_eq!(f.rehandle, 0.0);
        assert_relative_eq!(f.tightness, 0.7);
        assert_eq!(f.height, 0.0);
    }

    #[test]
    fn occupied_destination_without_rehandle() {
        // dest holds {5, 8}, c = 3, C = 10: t_s = 5, r_s = 0, g_s = 0.1.
        let bay = bay_from_ids(&[&[10, 3], &[5, 8]], 4);
        let c = bay.top(1).unwrap();
        let f = compute_features(&bay, c, 1, 2).unwrap();
        assert_eq!(f.lowest_id, 5.0);
        assert_eq!(f.rehandle, 0.0);
        assert_relative_eq!(f.tightness, 0.1);
        assert_eq!(f.height, 2.0);
    }

    #[test]
    fn lower_id_below_marks_rehandle() {
        // dest holds {2}, c = 4: the container must be reshuffled again.
        let bay = bay_from_ids(&[&[9, 4], &[2]], 4);
        let c = bay.top(1).unwrap();
        let f = compute_features(&bay, c, 1, 2).unwrap();
        assert_eq!(f.lowest_id, 2.0);
        assert_eq!(f.rehandle, 1.0);
    }

    #[test]
    fn away_from_truck_is_one_sided() {
        let bay = bay_from_ids(&[&[9], &[4, 5], &[8], &[6]], 4);
        let c = bay.top(2).unwrap();
        let toward = compute_features(&bay, c, 2, 4).unwrap();
        assert_eq!(toward.away_from_truck, 2.0);
        let bay = bay_from_ids(&[&[9], &[6], &[8], &[4, 5]], 4);
        let c = bay.top(4).unwrap();
        let back = compute_features(&bay, c, 4, 2).unwrap();
        assert_eq!(back.away_from_truck, 0.0);
    }

    #[test]
    fn hoist_and_lower_follow_direct_lift() {
        // Pickup at tier 2, landing at tier 3: one tier hoisted.
        let bay = bay_from_ids(&[&[7, 3], &[8, 9], &[]], 4);
        let c = bay.top(1).unwrap();
        let f = compute_features(&bay, c, 1, 2).unwrap();
        assert_eq!((f.hoisted, f.lowered, f.crossed), (1.0, 0.0, 1.0));
        // Landing on the empty stack at tier 1: one tier lowered.
        let f = compute_features(&bay, c, 1, 3).unwrap();
        assert_eq!((f.hoisted, f.lowered, f.crossed), (0.0, 1.0, 2.0));
    }

    #[test]
    fn illegal_destination_rejected() {
        let bay = bay_from_ids(&[&[1, 2], &[3, 4]], 2);
        let c = bay.top(1).unwrap();
        assert!(compute_features(&bay, c, 1, 2).is_err()); // full
        assert!(compute_features(&bay, c, 1, 1).is_err()); // origin
        assert!(compute_features(&bay, c, 1, 5).is_err()); // out of range
    }
}
