use rand::Rng;

use crate::error::Result;
use crate::lattice::{flip_delta, AllocationMap, FlipDelta, ModelParams, SuitabilityField};

/// Acceptance counters for one sweep.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SweepStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl SweepStats {
    pub fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// One proposal: uniform parcel, uniform different use, Metropolis accept.
/// Returns the component changes if the flip was accepted.
#[inline]
pub(crate) fn metropolis_proposal<R: Rng + ?Sized>(
    map: &mut AllocationMap,
    field: &SuitabilityField,
    params: &ModelParams,
    rng: &mut R,
) -> Option<FlipDelta> {
    let idx = rng.random_range(0..map.len());
    let target = map.at(idx).others()[rng.random_range(0..2usize)];
    let delta = flip_delta(map, field, idx, target);
    let d_phi = delta.phi(params);
    if d_phi <= 0.0 || rng.random::<f64>() < (-d_phi / params.temperature).exp() {
        map.put(idx, target);
        Some(delta)
    } else {
        None
    }
}

/// `rows * cols` single-parcel Metropolis proposals.
pub fn metropolis_sweep<R: Rng + ?Sized>(
    map: &mut AllocationMap,
    field: &SuitabilityField,
    params: &ModelParams,
    rng: &mut R,
) -> Result<SweepStats> {
    field.check_matches(map)?;
    params.validate()?;
    let mut stats = SweepStats::default();
    for _ in 0..map.len() {
        stats.proposed += 1;
        if metropolis_proposal(map, field, params, rng).is_some() {
            stats.accepted += 1;
        }
    }
    Ok(stats)
}
