//! Thermodynamics and density profiles of harmonically trapped, partially
//! condensed Bose gases in the semi-ideal approximation.

mod dimple;
mod profile;
pub mod special;
mod thermo;

pub use dimple::{critical_dimple_depth, DimpleDepth, DimpleParams};
pub use profile::{semi_ideal_profile, ColumnProfile, ProfileOptions, ProfileRegime, SemiIdealProfile};
pub use special::{bose_g, zeta};
pub use thermo::{
    condensate_fraction, critical_temperature, eta_parameter, phase_space_density, tf_chemical_potential,
    thermal_de_broglie, EtaReference,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bohr radius in metres.
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Atomic mass, kg. Defaults to 87Rb.
    pub atom_mass: f64,
    /// s-wave scattering length, m. Defaults to 98 Bohr radii (87Rb).
    pub scattering_length: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        PhysicalConstants {
            hbar: 1.054_571_817e-34,
            k_b: 1.380_649e-23,
            atom_mass: 1.4432e-25,
            scattering_length: 98.0 * BOHR_RADIUS,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        let ok = [self.hbar, self.k_b, self.atom_mass].iter().all(|v| v.is_finite() && *v > 0.0);
        if !ok || !(self.scattering_length >= 0.0) {
            return Err(Error::Config("physical constants must be positive (scattering length non-negative)".into()));
        }
        Ok(())
    }

    pub fn planck(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.hbar
    }

    /// Contact coupling `g = 4 pi hbar^2 a / m`, J m^3.
    pub fn coupling(&self) -> f64 {
        4.0 * std::f64::consts::PI * self.hbar * self.hbar * self.scattering_length / self.atom_mass
    }
}

/// Angular trap frequencies of a harmonic potential, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapGeometry {
    pub omega_x: f64,
    pub omega_y: f64,
    pub omega_z: f64,
}

impl TrapGeometry {
    pub fn new(omega_x: f64, omega_y: f64, omega_z: f64) -> Result<Self> {
        for w in [omega_x, omega_y, omega_z] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::domain("TrapGeometry", format!("frequency {w} must be > 0")));
            }
        }
        Ok(TrapGeometry { omega_x, omega_y, omega_z })
    }

    /// Builds a trap from ordinary frequencies in Hz.
    pub fn from_hz(fx: f64, fy: f64, fz: f64) -> Result<Self> {
        let tau = 2.0 * std::f64::consts::PI;
        Self::new(tau * fx, tau * fy, tau * fz)
    }

    pub fn isotropic(omega: f64) -> Result<Self> {
        Self::new(omega, omega, omega)
    }

    /// Geometric mean frequency.
    pub fn omega_bar(&self) -> f64 {
        (self.omega_x * self.omega_y * self.omega_z).cbrt()
    }

    /// Rescales an optical trap to another beam power; stiffness is linear in power.
    pub fn at_power(&self, power: f64, reference_power: f64) -> Result<Self> {
        if !(power > 0.0 && reference_power > 0.0) {
            return Err(Error::domain("TrapGeometry::at_power", "powers must be > 0"));
        }
        let k = (power / reference_power).sqrt();
        Self::new(self.omega_x * k, self.omega_y * k, self.omega_z * k)
    }

    pub fn omega(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.omega_x,
            Axis::Y => self.omega_y,
            Axis::Z => self.omega_z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    #[default]
    Z,
}

impl Axis {
    /// The two in-plane axes (image columns, image rows) for a probe along `self`.
    pub fn transverse(self) -> (Axis, Axis) {
        match self {
            Axis::X => (Axis::Y, Axis::Z),
            Axis::Y => (Axis::X, Axis::Z),
            Axis::Z => (Axis::X, Axis::Y),
        }
    }
}

/// Ground truth of a trapped cloud at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudState {
    pub atom_number: f64,
    /// Temperature, K.
    pub temperature: f64,
    pub trap: TrapGeometry,
}

impl CloudState {
    pub fn new(atom_number: f64, temperature: f64, trap: TrapGeometry) -> Result<Self> {
        if !(atom_number >= 1.0 && atom_number.is_finite()) {
            return Err(Error::domain("CloudState", format!("atom number {atom_number} < 1")));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::domain("CloudState", format!("temperature {temperature} <= 0")));
        }
        Ok(CloudState { atom_number, temperature, trap })
    }
}
