//! Synthetic campaigns with known ground truth.

mod campaign;
mod dimple;

pub use campaign::{
    benchmark_calibration, run_outcome, sample_initial_conditions, simulate_campaign, true_critical_power,
    CampaignConfig, CampaignMode, Environment, InitialConditions,
};
pub use dimple::{
    classify_phase, phase_boundary, simulate_dimple_cycles, DimpleConfig, DimpleCycleTrace, DimpleSample, Phase,
};
