use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{GridFitter, GridSpec, ModelSpec};
use crate::imaging::{
    azimuthal_average, column_density, detect_dark_field, estimate_angles, faraday_angle_map, AverageOptions,
    ImageGeometry, ProbeParams,
};
use crate::physics::{
    critical_temperature, semi_ideal_profile, Axis, CloudState, PhysicalConstants, ProfileOptions, TrapGeometry,
};
use crate::{par, rng};

/// Everything needed to synthesize and fit an image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImagingSetup {
    pub constants: PhysicalConstants,
    pub trap: TrapGeometry,
    pub probe: ProbeParams,
    pub geometry: ImageGeometry,
    pub profile: ProfileOptions,
    pub grid: GridSpec,
    pub axis: Axis,
}

impl ImagingSetup {
    pub fn model(&self) -> ModelSpec {
        ModelSpec {
            constants: self.constants,
            trap: self.trap,
            axis: self.axis,
            rotation_coefficient: self.probe.rotation_coefficient,
            profile: self.profile,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShotNoiseConfig {
    pub true_fractions: Vec<f64>,
    /// Mean detected photons on the peak pixel.
    pub photon_levels: Vec<f64>,
    pub samples: usize,
    pub atom_number: f64,
    pub seed: u64,
}

impl Default for ShotNoiseConfig {
    fn default() -> Self {
        ShotNoiseConfig {
            true_fractions: vec![0.23, 0.35, 0.50],
            photon_levels: vec![10.0, 30.0, 100.0, 1e3, 1e4, 1e5],
            samples: 200,
            atom_number: 3e6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseRow {
    pub true_fraction: f64,
    pub photons: f64,
    /// us
    pub pulse_duration: f64,
    pub fitted: usize,
    pub failed: usize,
    pub mean_fraction: f64,
    pub std_error: f64,
    pub bias: f64,
}

/// Temperature at which the semi-ideal profile has condensate fraction `target`.
pub fn temperature_for_fraction(
    atom_number: f64,
    target: f64,
    trap: &TrapGeometry,
    c: &PhysicalConstants,
    options: &ProfileOptions,
) -> Result<f64> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::domain("temperature_for_fraction", format!("fraction {target} outside (0, 1)")));
    }
    let tc = critical_temperature(atom_number, trap, c)?;
    let frac = |t: f64| -> Result<f64> {
        Ok(semi_ideal_profile(&CloudState::new(atom_number, t, *trap)?, c, options)?.condensate_fraction)
    };
    let (mut lo, mut hi) = (1e-3 * tc, tc);
    if frac(lo)? < target {
        return Err(Error::domain("temperature_for_fraction", format!("fraction {target} not reached")));
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if frac(mid)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Mean fitted fraction against photon number for each true fraction.
pub fn shot_noise_study(config: &ShotNoiseConfig, setup: &ImagingSetup) -> Result<Vec<ShotNoiseRow>> {
    if config.samples == 0 || config.photon_levels.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::Config("shot-noise study needs samples >= 1 and positive photon levels".into()));
    }
    let c = &setup.constants;
    let mut rows = vec![];
    for (fi, &target) in config.true_fractions.iter().enumerate() {
        let t = temperature_for_fraction(config.atom_number, target, &setup.trap, c, &setup.profile)?;
        let profile = semi_ideal_profile(&CloudState::new(config.atom_number, t, setup.trap)?, c, &setup.profile)?;
        let angles = faraday_angle_map(&column_density(&profile, setup.axis, &setup.geometry)?, &setup.probe)?;
        let peak = angles.max_value();
        let reference = azimuthal_average(&angles, &AverageOptions::default())?;
        let fitter = GridFitter::new(setup.model(), setup.grid, &reference)?;
        for (li, &photons) in config.photon_levels.iter().enumerate() {
            let mut probe = setup.probe;
            probe.pulse_duration = probe.duration_for_photons(photons, peak, setup.geometry.pixel_size);
            let stream = (fi * config.photon_levels.len() + li) as u64;
            let fits = par::map_indexed(config.samples, |s| -> Option<f64> {
                let seed = rng::derive_seed(config.seed, rng::stream::SHOT_NOISE, (stream << 32) | s as u64);
                let raw = detect_dark_field(&angles, &probe, seed).ok()?;
                let est = estimate_angles(&raw, &probe).ok()?;
                let prof = azimuthal_average(&est, &AverageOptions::default()).ok()?;
                fitter.fit(&prof).ok().map(|r| r.fraction)
            });
            let ok: Vec<f64> = fits.iter().flatten().copied().collect();
            let n = ok.len() as f64;
            let mean = ok.iter().sum::<f64>() / n;
            let sd = if ok.len() > 1 {
                (ok.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                f64::NAN
            };
            rows.push(ShotNoiseRow {
                true_fraction: profile.condensate_fraction,
                photons,
                pulse_duration: probe.pulse_duration,
                fitted: ok.len(),
                failed: fits.len() - ok.len(),
                mean_fraction: mean,
                std_error: sd / n.sqrt(),
                bias: mean - profile.condensate_fraction,
            });
        }
    }
    Ok(rows)
}
