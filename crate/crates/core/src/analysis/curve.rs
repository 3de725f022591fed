use std::collections::BTreeMap;

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::regression::{linear_regression, noise_reduction_factor, poly_fit, NrfDof, PolyFit};
use super::{BenchmarkBin, ExperimentRecord};
use crate::error::{Error, Result};
use crate::fitting::{critical_power, growth_fit, GrowthPoint, DEFAULT_THRESHOLD};
use crate::{par, rng};

/// Smallest per-bin error used as a fit weight, mW.
const MIN_PC_ERROR: f64 = 1e-6;

/// How the error of a bin's mean P_c is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BinErrorModel {
    /// Scatter of the bin's own subset fits.
    OwnScatter,
    /// Subset scatter pooled over all bins, divided by each bin's subset count.
    #[default]
    PooledScatter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurveOptions {
    pub threshold: f64,
    /// Seed for the subset draws.
    pub seed: u64,
    pub bin_errors: BinErrorModel,
}

impl Default for CurveOptions {
    fn default() -> Self {
        CurveOptions { threshold: DEFAULT_THRESHOLD, seed: 0, bin_errors: BinErrorModel::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveBin {
    pub mean_psd: f64,
    pub psd_std_error: f64,
    pub psd_spread: f64,
    /// Mean critical power over the subset fits, mW.
    pub p_c: f64,
    pub p_c_std_error: f64,
    pub subsets: usize,
    pub records: usize,
    /// Sum of squared deviations of the subset P_c values from their mean.
    pub subset_ss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledPoint {
    pub mean_psd: f64,
    pub psd_std_error: f64,
    /// Population standard deviation of PSD over all records.
    pub psd_spread: f64,
    pub p_c: f64,
    pub p_c_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalCurve {
    pub bins: Vec<CurveBin>,
    /// Weighted polynomial fit of P_c against PSD; quadratic unless too few bins.
    /// The covariance is inflated by the reduced chi^2 when that exceeds 1.
    pub fit: PolyFit,
    pub pooled: PooledPoint,
}

impl CriticalCurve {
    /// (c0, c1, c2), zero-padded when the fit degree was reduced.
    pub fn coefficients(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for (k, v) in self.fit.coefficients.iter().enumerate().take(3) {
            c[k] = *v;
        }
        c
    }

    /// 1 sigma error of the curvature coefficient; zero when not fitted.
    pub fn c2_std_error(&self) -> f64 {
        self.fit.covariance.get(2).map_or(0.0, |row| row[2].sqrt())
    }

    pub fn band(&self, psd: f64) -> (f64, f64) {
        self.fit.band(psd)
    }
}

fn growth_points(records: &[&ExperimentRecord]) -> Vec<GrowthPoint> {
    records.iter().map(|r| GrowthPoint::new(r.final_power, r.measured_fraction)).collect()
}

/// Single growth fit over all records.
pub fn pooled_estimate(records: &[ExperimentRecord], threshold: f64) -> Result<(f64, f64)> {
    let refs: Vec<&ExperimentRecord> = records.iter().collect();
    let fit = growth_fit(&growth_points(&refs))?;
    let pc = critical_power(&fit, threshold)?;
    Ok((pc.value, pc.std_error))
}

/// Critical power of one bin from disjoint subsets with one record per setpoint.
fn bin_critical_power(
    records: &[ExperimentRecord],
    bin: &BenchmarkBin,
    options: &CurveOptions,
    index: usize,
) -> Result<CurveBin> {
    let mut by_power: BTreeMap<u64, Vec<&ExperimentRecord>> = BTreeMap::new();
    for &i in &bin.indices {
        by_power.entry(records[i].final_power.to_bits()).or_default().push(&records[i]);
    }
    if by_power.len() < 5 {
        return Err(Error::InsufficientData(format!("bin covers {} power setpoints, need >= 5", by_power.len())));
    }
    let mut rng = rng::task_rng(options.seed, rng::stream::SUBSETS, index as u64);
    for group in by_power.values_mut() {
        group.shuffle(&mut rng);
    }
    let subsets = by_power.values().map(Vec::len).min().unwrap_or(0);
    let mut pcs = Vec::with_capacity(subsets);
    let mut last_err = 0.0;
    for k in 0..subsets {
        let pick: Vec<&ExperimentRecord> = by_power.values().map(|g| g[k]).collect();
        let fit = growth_fit(&growth_points(&pick))?;
        let pc = critical_power(&fit, options.threshold)?;
        pcs.push(pc.value);
        last_err = pc.std_error;
    }
    let n = pcs.len() as f64;
    let mean = pcs.iter().sum::<f64>() / n;
    let err = if pcs.len() > 1 {
        (pcs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
    } else {
        last_err
    };
    Ok(CurveBin {
        mean_psd: bin.mean_psd,
        psd_std_error: bin.psd_std_error,
        psd_spread: bin.psd_spread,
        p_c: mean,
        p_c_std_error: err,
        subsets,
        records: bin.indices.len(),
        subset_ss: pcs.iter().map(|p| (p - mean).powi(2)).sum(),
    })
}

/// Per-bin critical powers, a weighted quadratic in PSD, and the pooled point.
///
/// Bins whose subsets cannot all be fitted are dropped with a warning.
pub fn binned_critical_curve(
    records: &[ExperimentRecord],
    bins: &[BenchmarkBin],
    options: &CurveOptions,
) -> Result<CriticalCurve> {
    let fitted = par::map_indexed(bins.len(), |b| bin_critical_power(records, &bins[b], options, b));
    let mut out = vec![];
    for (b, r) in fitted.into_iter().enumerate() {
        match r {
            Ok(cb) => out.push(cb),
            Err(e) => warn!("bin {b} (PSD {:.5}) dropped: {e}", bins[b].mean_psd),
        }
    }
    if out.is_empty() {
        return Err(Error::InsufficientData("no bin could be fitted".into()));
    }
    out.sort_by(|a, b| a.mean_psd.total_cmp(&b.mean_psd));
    if options.bin_errors == BinErrorModel::PooledScatter {
        let ss: f64 = out.iter().map(|b| b.subset_ss).sum();
        let dof: usize = out.iter().map(|b| b.subsets.saturating_sub(1)).sum();
        if dof > 0 {
            let var = ss / dof as f64;
            for b in &mut out {
                b.p_c_std_error = (var / b.subsets as f64).sqrt();
            }
        }
    }
    let fit = curve_fit(&out)?;

    let all: Vec<usize> = bins.iter().flat_map(|b| b.indices.iter().copied()).collect();
    let pool_bin = BenchmarkBin::from_indices(records, all.clone());
    let subset: Vec<ExperimentRecord> = all.iter().map(|&i| records[i]).collect();
    let (p_c, p_c_std_error) = pooled_estimate(&subset, options.threshold)?;
    Ok(CriticalCurve {
        bins: out,
        fit,
        pooled: PooledPoint {
            mean_psd: pool_bin.mean_psd,
            psd_std_error: pool_bin.psd_std_error,
            psd_spread: pool_bin.psd_spread,
            p_c,
            p_c_std_error,
        },
    })
}

/// Weighted fit of degree min(2, distinct PSD values - 1).
fn curve_fit(bins: &[CurveBin]) -> Result<PolyFit> {
    let x: Vec<f64> = bins.iter().map(|b| b.mean_psd).collect();
    let y: Vec<f64> = bins.iter().map(|b| b.p_c).collect();
    let s: Vec<f64> = bins.iter().map(|b| b.p_c_std_error.max(MIN_PC_ERROR)).collect();
    let mut distinct = x.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let degree = 2.min(distinct.len() - 1);
    if degree < 2 {
        warn!("only {} distinct bin PSD values; curve degree reduced to {degree}", distinct.len());
    }
    // per-bin errors come from a handful of subsets and tend to be low
    Ok(poly_fit(&x, &y, &s, degree)?.with_birge_scaling())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvolutionBias {
    /// Shift to add to the measured curve, `-f'' sigma^2 / 2`.
    pub shift: f64,
    /// Curve coefficients after the shift.
    pub corrected: [f64; 3],
}

/// Bias of a quadratic `c0 + c1 x + c2 x^2` averaged over x-noise of spread `sigma_x`.
pub fn convolution_bias(coefficients: [f64; 3], sigma_x: f64) -> Result<ConvolutionBias> {
    if !(sigma_x >= 0.0) || !coefficients[2].is_finite() {
        return Err(Error::Usage("convolution_bias needs finite c2 and sigma_x >= 0".into()));
    }
    let shift = -0.5 * (2.0 * coefficients[2]) * sigma_x * sigma_x;
    let [c0, c1, c2] = coefficients;
    Ok(ConvolutionBias { shift, corrected: [c0 + shift, c1, c2] })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub chi2_red_linear: f64,
    pub chi2_red_quadratic: f64,
}

/// Reduced chi^2 of weighted linear and quadratic fits to the binned curve.
pub fn model_comparison(bins: &[CurveBin]) -> Result<ModelComparison> {
    if bins.len() < 5 {
        return Err(Error::InsufficientData(format!("model comparison needs >= 5 bins, got {}", bins.len())));
    }
    let x: Vec<f64> = bins.iter().map(|b| b.mean_psd).collect();
    let y: Vec<f64> = bins.iter().map(|b| b.p_c).collect();
    let s: Vec<f64> = bins.iter().map(|b| b.p_c_std_error.max(MIN_PC_ERROR)).collect();
    let lin = poly_fit(&x, &y, &s, 1)?;
    let quad = poly_fit(&x, &y, &s, 2)?;
    Ok(ModelComparison { chi2_red_linear: lin.chi2_reduced(), chi2_red_quadratic: quad.chi2_reduced() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetpointNrf {
    /// mW
    pub power: f64,
    pub runs: usize,
    /// Benchmark angle as predictor of the final atom number.
    pub nrf: f64,
    pub mean_fraction: f64,
}

/// NRF of (benchmark angle, measured N) at every power setpoint, by decreasing power.
pub fn nrf_by_setpoint(records: &[ExperimentRecord], dof: NrfDof) -> Result<Vec<SetpointNrf>> {
    let mut by_power: BTreeMap<u64, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        by_power.entry(r.final_power.to_bits()).or_default().push(r);
    }
    let mut out = vec![];
    for group in by_power.values() {
        let x: Vec<f64> = group.iter().map(|r| r.peak_benchmark_angle).collect();
        let y: Vec<f64> = group.iter().map(|r| r.measured_n).collect();
        out.push(SetpointNrf {
            power: group[0].final_power,
            runs: group.len(),
            nrf: noise_reduction_factor(&x, &y, dof)?,
            mean_fraction: group.iter().map(|r| r.measured_fraction).sum::<f64>() / group.len() as f64,
        });
    }
    out.sort_by(|a, b| b.power.total_cmp(&a.power));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatingShift {
    /// mW per us of probe dose.
    pub slope: f64,
    pub slope_std_error: f64,
    pub intercept: f64,
    /// (dose us, P_c mW, P_c error mW) per campaign.
    pub points: Vec<(f64, f64, f64)>,
}

/// Regression of pooled P_c on probe dose, one campaign per point.
pub fn heating_shift(campaigns: &[Vec<ExperimentRecord>], threshold: f64) -> Result<HeatingShift> {
    let points: Vec<(f64, f64, f64)> = par::map_slice(campaigns, |c| -> Result<(f64, f64, f64)> {
        if c.is_empty() {
            return Err(Error::InsufficientData("empty campaign".into()));
        }
        let dose = c.iter().map(|r| r.probe_dose).sum::<f64>() / c.len() as f64;
        let (pc, se) = pooled_estimate(c, threshold)?;
        Ok((dose, pc, se))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fit = linear_regression(&x, &y)?;
    Ok(HeatingShift { slope: fit.slope, slope_std_error: fit.slope_std_error, intercept: fit.intercept, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::growth_model;

    #[test]
    fn convolution_examples() {
        let b = convolution_bias([0.0, 0.0, 5.0], 0.1).unwrap();
        assert!((b.shift + 0.05).abs() < 1e-15);
        assert_eq!(convolution_bias([1.0, 2.0, 0.0], 0.3).unwrap().shift, 0.0);
        assert!(convolution_bias([0.0, 0.0, 1.0], -1.0).is_err());
    }

    fn series(run: u64, psd: f64, beta: f64) -> Vec<ExperimentRecord> {
        (0..9)
            .map(|k| {
                let p = 600.0 + 37.5 * k as f64;
                ExperimentRecord {
                    run,
                    psd_benchmark: psd,
                    peak_benchmark_angle: 0.1,
                    final_power: p,
                    measured_fraction: growth_model(p, -0.002, beta, 0.15),
                    measured_n: 1e6,
                    probe_dose: 0.0,
                    seed: 0,
                }
            })
            .collect()
    }

    #[test]
    fn noise_free_bins_match_pooled() {
        let records: Vec<_> = (0..8).flat_map(|r| series(r, 0.25, 800.0)).collect();
        let bins: Vec<BenchmarkBin> =
            (0..4).map(|b| BenchmarkBin::from_indices(&records, (b * 18..(b + 1) * 18).collect())).collect();
        let curve = binned_critical_curve(&records, &bins, &CurveOptions::default()).unwrap();
        assert_eq!(curve.bins.len(), 4);
        for b in &curve.bins {
            assert!((b.p_c - curve.pooled.p_c).abs() < 0.1, "{} vs {}", b.p_c, curve.pooled.p_c);
            assert_eq!(b.subsets, 2);
        }
        assert_eq!(curve.fit.coefficients.len(), 1);
        assert_eq!(curve.coefficients()[2], 0.0);
    }

    #[test]
    fn model_comparison_linear_bins() {
        let bins: Vec<CurveBin> = (0..8)
            .map(|i| {
                let x = 0.24 + 0.004 * i as f64;
                CurveBin {
                    mean_psd: x,
                    psd_std_error: 0.0,
                    psd_spread: 0.0,
                    p_c: 500.0 + 1000.0 * x,
                    p_c_std_error: 1.0,
                    subsets: 4,
                    records: 36,
                    subset_ss: 0.0,
                }
            })
            .collect();
        let m = model_comparison(&bins).unwrap();
        assert!(m.chi2_red_linear < 1e-12 && m.chi2_red_quadratic < 1e-12);
        assert!(model_comparison(&bins[..4]).is_err());
    }
}
