//! Climate degradation of one land use's suitability plane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{LandUse, SuitabilityField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    /// Fraction of suitability removed, in `[0, 1]`.
    pub delta_a: f64,
    #[serde(default = "default_target")]
    pub target_use: LandUse,
}

fn default_target() -> LandUse {
    LandUse::Agriculture
}

impl DegradationSpec {
    pub fn new(delta_a: f64) -> Result<Self> {
        let spec = DegradationSpec {
            delta_a,
            target_use: LandUse::Agriculture,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.delta_a) {
            return Err(Error::Validation(format!(
                "degradation must lie in [0, 1], got {}",
                self.delta_a
            )));
        }
        Ok(())
    }
}

/// Scales the target plane uniformly by `1 - delta_a`; other planes are copied
/// unchanged.
pub fn apply_degradation(field: &SuitabilityField, spec: &DegradationSpec) -> Result<SuitabilityField> {
    spec.validate()?;
    let factor = 1.0 - spec.delta_a;
    let mut out = field.clone();
    for s in out.plane_mut(spec.target_use) {
        *s *= factor;
    }
    Ok(out)
}

/// Per-parcel variant: parcel `idx` of the target plane is scaled by
/// `1 - delta_a * multiplier[idx]`, clamped at zero.
pub fn apply_spatial_degradation(
    field: &SuitabilityField,
    spec: &DegradationSpec,
    multiplier: &[f64],
) -> Result<SuitabilityField> {
    spec.validate()?;
    if multiplier.len() != field.rows() * field.cols() {
        return Err(Error::Config(format!(
            "multiplier has {} entries, field has {} parcels",
            multiplier.len(),
            field.rows() * field.cols()
        )));
    }
    let mut out = field.clone();
    for (s, m) in out.plane_mut(spec.target_use).iter_mut().zip(multiplier) {
        *s *= (1.0 - spec.delta_a * m).max(0.0);
    }
    Ok(out)
}
