use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{AngleImage, ImageKind, ProbeParams};
use crate::error::{Error, Result};
use crate::physics::{Axis, ColumnProfile, SemiIdealProfile, TrapGeometry};

/// Projected radii sampled when building a column profile.
const COLUMN_POINTS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImageGeometry {
    pub width: usize,
    pub height: usize,
    /// um
    pub pixel_size: f64,
    /// Cloud centre in pixel coordinates (col, row); the middle pixel if unset.
    pub center: Option<(f64, f64)>,
}

impl Default for ImageGeometry {
    fn default() -> Self {
        ImageGeometry { width: 64, height: 64, pixel_size: 3.5, center: None }
    }
}

impl ImageGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.width < 3 || self.height < 3 || !(self.pixel_size > 0.0) {
            return Err(Error::Config("image needs at least 3x3 pixels of positive size".into()));
        }
        Ok(())
    }

    pub fn center_px(&self) -> (f64, f64) {
        self.center.unwrap_or(((self.width / 2) as f64, (self.height / 2) as f64))
    }
}

/// Column density of a profile seen along a probe axis, as a function of
/// in-plane position in um.
#[derive(Debug, Clone)]
pub struct ProjectedColumn {
    column: ColumnProfile,
    /// omega_bar / omega_probe, converted to atoms / um^2.
    scale: f64,
    /// In-plane scaling to the scaled radius, m per um.
    ku: f64,
    kv: f64,
}

impl ProjectedColumn {
    pub fn new(profile: &SemiIdealProfile, axis: Axis) -> Self {
        Self::within(profile, axis, f64::INFINITY)
    }

    /// Only valid up to the projected scaled radius `rho_limit`, m; cheaper
    /// when the cloud extends far beyond the region of interest.
    pub fn within(profile: &SemiIdealProfile, axis: Axis, rho_limit: f64) -> Self {
        let trap = profile.state.trap;
        let wbar = trap.omega_bar();
        let (u, v) = axis.transverse();
        ProjectedColumn {
            column: profile.column_within(COLUMN_POINTS, rho_limit),
            scale: wbar / trap.omega(axis) * 1e-12,
            ku: trap.omega(u) / wbar * 1e-6,
            kv: trap.omega(v) / wbar * 1e-6,
        }
    }

    /// Column density at in-plane offset (x, y) um from the cloud centre, atoms / um^2.
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (a, b) = (self.ku * x, self.kv * y);
        self.scale * self.column.eval((a * a + b * b).sqrt())
    }

    pub fn peak(&self) -> f64 {
        self.eval(0.0, 0.0)
    }

    /// Column density at a projected scaled radius, m (see [`ProjectedColumn::scaled_radius`]).
    #[inline]
    pub fn eval_scaled(&self, rho: f64) -> f64 {
        self.scale * self.column.eval(rho)
    }

    /// Projected scaled radius of the in-plane offset (x, y) um. Depends
    /// only on the trap and probe axis.
    pub fn scaled_radius(trap: &TrapGeometry, axis: Axis, x: f64, y: f64) -> f64 {
        let wbar = trap.omega_bar();
        let (u, v) = axis.transverse();
        let a = trap.omega(u) / wbar * 1e-6 * x;
        let b = trap.omega(v) / wbar * 1e-6 * y;
        (a * a + b * b).sqrt()
    }
}

/// Column density on a pixel grid, atoms / um^2.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub pixel_size: f64,
    pub data: Array2<f64>,
}

impl DensityGrid {
    pub fn total_atoms(&self) -> f64 {
        self.data.sum() * self.pixel_size * self.pixel_size
    }
}

/// Samples the line-of-sight integrated density at pixel centres.
pub fn column_density(profile: &SemiIdealProfile, axis: Axis, geometry: &ImageGeometry) -> Result<DensityGrid> {
    geometry.validate()?;
    let col = ProjectedColumn::new(profile, axis);
    let (cx, cy) = geometry.center_px();
    let p = geometry.pixel_size;
    let data = Array2::from_shape_fn((geometry.height, geometry.width), |(r, c)| {
        col.eval((c as f64 - cx) * p, (r as f64 - cy) * p)
    });
    Ok(DensityGrid { pixel_size: p, data })
}

/// Linear Faraday rotation `theta = c_F * column`.
pub fn faraday_angle_map(col: &DensityGrid, probe: &ProbeParams) -> Result<AngleImage> {
    probe.validate()?;
    let data = col.data.mapv(|n| probe.rotation_coefficient * n);
    AngleImage::new(ImageKind::Angle, col.pixel_size, data)
}

/// Poisson photon counts behind a crossed polarizer.
pub fn detect_dark_field(img: &AngleImage, probe: &ProbeParams, seed: u64) -> Result<AngleImage> {
    if img.kind != ImageKind::Angle {
        return Err(Error::Usage("detect_dark_field expects an angle image".into()));
    }
    probe.validate()?;
    let incident = probe.incident_photons(img.pixel_size);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Array2::zeros(img.data.dim());
    for (out, theta) in data.iter_mut().zip(img.data.iter()) {
        let mean = incident * (theta.sin().powi(2) + probe.polarizer_floor);
        *out = if mean > 0.0 {
            Poisson::new(mean).map_err(|e| Error::domain("detect_dark_field", e.to_string()))?.sample(&mut rng)
        } else {
            0.0
        };
    }
    AngleImage::new(ImageKind::Photons, img.pixel_size, data)
}

/// Inverts the detection law pixel by pixel.
pub fn estimate_angles(raw: &AngleImage, probe: &ProbeParams) -> Result<AngleImage> {
    if raw.kind != ImageKind::Photons {
        return Err(Error::Usage("estimate_angles expects a photon image".into()));
    }
    probe.validate()?;
    let incident = probe.incident_photons(raw.pixel_size);
    let data = raw.data.mapv(|c| (c / incident - probe.polarizer_floor).clamp(0.0, 1.0).sqrt().asin());
    AngleImage::new(ImageKind::Angle, raw.pixel_size, data)
}
