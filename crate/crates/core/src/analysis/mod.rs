//! Benchmark-conditioned statistics over campaigns of experimental runs.

mod binning;
mod curve;
mod record;
mod regression;
mod shotnoise;

pub use binning::{bin_by_benchmark, BenchmarkBin, BinningMode};
pub use curve::{
    binned_critical_curve, convolution_bias, heating_shift, model_comparison, nrf_by_setpoint, pooled_estimate,
    BinErrorModel, ConvolutionBias, CriticalCurve, CurveBin, CurveOptions, HeatingShift, ModelComparison, PooledPoint,
    SetpointNrf,
};
pub use record::{read_records, write_records, ExperimentRecord, RECORD_HEADER};
pub use regression::{linear_regression, noise_reduction_factor, poly_fit, LinearFit, NrfDof, PolyFit};
pub use shotnoise::{shot_noise_study, temperature_for_fraction, ImagingSetup, ShotNoiseConfig, ShotNoiseRow};
