//! Dark-field Faraday image synthesis and reduction to radial profiles.

mod image;
mod radial;
mod synth;

pub use image::{AngleImage, ImageKind, FGRID_MAGIC};
pub use radial::{azimuthal_average, AverageOptions, BinGeometry, RadialProfile};
pub use synth::{
    column_density, detect_dark_field, estimate_angles, faraday_angle_map, DensityGrid, ImageGeometry, ProjectedColumn,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeParams {
    /// Probe detuning, Hz. Informational; enters only through `rotation_coefficient`.
    pub detuning: f64,
    /// Incident photon flux, photons / um^2 / us.
    pub photon_flux: f64,
    /// Pulse duration, us.
    pub pulse_duration: f64,
    /// Fraction of unrotated light leaking through the crossed polarizer.
    pub polarizer_floor: f64,
    /// Faraday rotation per column density, rad um^2 / atom.
    pub rotation_coefficient: f64,
}

impl Default for ProbeParams {
    fn default() -> Self {
        ProbeParams {
            detuning: 1.5e9,
            photon_flux: 400.0,
            pulse_duration: 2.0,
            polarizer_floor: 3e-4,
            rotation_coefficient: 7.8e-5,
        }
    }
}

impl ProbeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.photon_flux > 0.0 && self.pulse_duration > 0.0) {
            return Err(Error::Config("probe flux and pulse duration must be > 0".into()));
        }
        if !(0.0..0.1).contains(&self.polarizer_floor) {
            return Err(Error::Config("polarizer_floor must lie in [0, 0.1)".into()));
        }
        if !(self.rotation_coefficient > 0.0 && self.rotation_coefficient.is_finite()) {
            return Err(Error::Config("rotation_coefficient must be > 0".into()));
        }
        Ok(())
    }

    /// Incident photons per pixel of side `pixel_size` um.
    pub fn incident_photons(&self, pixel_size: f64) -> f64 {
        self.photon_flux * self.pulse_duration * pixel_size * pixel_size
    }

    /// Pulse duration giving `photons` mean detected photons on a pixel at angle `theta`.
    pub fn duration_for_photons(&self, photons: f64, theta: f64, pixel_size: f64) -> f64 {
        let per_us = self.photon_flux * pixel_size * pixel_size * (theta.sin().powi(2) + self.polarizer_floor);
        photons / per_us
    }
}
