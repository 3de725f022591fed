//! Semi-ideal grid fits of radial profiles and growth-curve fits of the
//! condensate fraction versus final trap power.

mod bounds;
mod grid;
mod growth;

pub use bounds::{confidence_bounds, Chi2Surface, Intervals};
pub use grid::{chi_square, grid_fit_profile, GridFitResult, GridFitter, GridSpec, ModelSpec, SIGMA_FLOOR};
pub use growth::{critical_power, growth_fit, growth_model, CriticalPower, GrowthFit, GrowthPoint, DEFAULT_THRESHOLD};
