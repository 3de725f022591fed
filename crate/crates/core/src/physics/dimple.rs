use serde::{Deserialize, Serialize};

use super::thermo::{condensate_fraction, critical_temperature, eta_parameter, EtaReference};
use super::{CloudState, PhysicalConstants, TrapGeometry};
use crate::error::{Error, Result};

/// Gaussian-beam dimple potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DimpleParams {
    /// 1/e^2 beam waist, m.
    pub waist: f64,
    /// Axial trap frequency, rad/s. Not set by the beam; supplied directly.
    pub axial_omega: f64,
    /// Maximum depth, K.
    pub max_depth: f64,
    pub eta_reference: EtaReference,
}

impl Default for DimpleParams {
    fn default() -> Self {
        DimpleParams {
            waist: 7e-6,
            axial_omega: 2.0 * std::f64::consts::PI * 60.0,
            max_depth: 1.12e-6,
            eta_reference: EtaReference::CriticalTemperature,
        }
    }
}

impl DimpleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.waist > 0.0 && self.axial_omega > 0.0 && self.max_depth > 0.0) {
            return Err(Error::domain("dimple", "waist, axial frequency and maximum depth must be > 0"));
        }
        Ok(())
    }

    /// Harmonic approximation of the dimple at depth `depth` (K).
    pub fn trap(&self, depth: f64, c: &PhysicalConstants) -> Result<TrapGeometry> {
        let u = c.k_b * depth;
        let radial = (4.0 * u / (c.atom_mass * self.waist * self.waist)).sqrt();
        TrapGeometry::new(radial, radial, self.axial_omega)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "depth", rename_all = "snake_case")]
pub enum DimpleDepth {
    /// Smallest depth (K) at which the dimple cloud condenses.
    Critical(f64),
    NeverCondenses,
}

impl DimpleDepth {
    pub fn depth(&self) -> Option<f64> {
        match self {
            DimpleDepth::Critical(u) => Some(*u),
            DimpleDepth::NeverCondenses => None,
        }
    }

    /// True when a dimple of depth `depth` holds a condensate.
    pub fn condensed_at(&self, depth: f64) -> bool {
        matches!(self, DimpleDepth::Critical(u) if depth > *u)
    }
}

fn fraction_at(depth: f64, t: f64, atoms: f64, params: &DimpleParams, c: &PhysicalConstants) -> Result<f64> {
    if depth <= 0.0 {
        return Ok(0.0);
    }
    let trap = params.trap(depth, c)?;
    let state = CloudState::new(atoms, t, trap)?;
    let tc = critical_temperature(atoms, &trap, c)?;
    condensate_fraction(t / tc, eta_parameter(&state, c, params.eta_reference)?)
}

/// Smallest dimple depth at which a cloud of `dimple_atoms` at the reservoir
/// temperature has a non-zero condensate fraction, to 1% relative.
pub fn critical_dimple_depth(
    reservoir_temperature: f64,
    dimple_atoms: f64,
    params: &DimpleParams,
    c: &PhysicalConstants,
) -> Result<DimpleDepth> {
    if !(reservoir_temperature > 0.0) {
        return Err(Error::domain("critical_dimple_depth", "reservoir temperature must be > 0"));
    }
    params.validate()?;
    if dimple_atoms < 1.0 {
        return Ok(DimpleDepth::NeverCondenses);
    }
    let t = reservoir_temperature;
    if fraction_at(params.max_depth, t, dimple_atoms, params, c)? <= 0.0 {
        return Ok(DimpleDepth::NeverCondenses);
    }
    let (mut lo, mut hi) = (0.0, params.max_depth);
    while hi - lo > 0.01 * hi {
        let mid = 0.5 * (lo + hi);
        if fraction_at(mid, t, dimple_atoms, params, c)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(DimpleDepth::Critical(hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn harmonic_radial_frequency() {
        let p = DimpleParams::default();
        let trap = p.trap(1e-6, &c()).unwrap();
        let oracle = (4.0 * 1.380_649e-23 * 1e-6 / (1.4432e-25 * 49e-12f64)).sqrt();
        assert!((trap.omega_x / oracle - 1.0).abs() < 1e-12);
    }

    #[test]
    fn depth_falls_with_atoms_and_rises_with_temperature() {
        let p = DimpleParams::default();
        let base = critical_dimple_depth(300e-9, 5e5, &p, &c()).unwrap().depth().unwrap();
        let more = critical_dimple_depth(300e-9, 5e6, &p, &c()).unwrap().depth().unwrap();
        assert!(more < base);
        match critical_dimple_depth(600e-9, 5e5, &p, &c()).unwrap() {
            DimpleDepth::Critical(u) => assert!(u > base),
            DimpleDepth::NeverCondenses => {}
        }
        let huge = critical_dimple_depth(300e-9, 1e12, &p, &c()).unwrap().depth().unwrap();
        assert!(huge < 0.05 * base);
    }

    #[test]
    fn boundary_is_a_solution_to_one_percent() {
        let p = DimpleParams::default();
        let u = critical_dimple_depth(300e-9, 5e5, &p, &c()).unwrap().depth().unwrap();
        assert!(fraction_at(u, 300e-9, 5e5, &p, &c()).unwrap() > 0.0);
        assert!(fraction_at(0.99 * u, 300e-9, 5e5, &p, &c()).unwrap() <= 1e-3);
    }

    #[test]
    fn hot_sparse_cloud_never_condenses() {
        let p = DimpleParams::default();
        assert_eq!(critical_dimple_depth(5e-6, 1e3, &p, &c()).unwrap(), DimpleDepth::NeverCondenses);
        assert!(!DimpleDepth::NeverCondenses.condensed_at(1.0));
        assert!(!DimpleDepth::Critical(0.5).condensed_at(0.0));
    }
}
