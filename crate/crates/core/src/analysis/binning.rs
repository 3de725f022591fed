use serde::{Deserialize, Serialize};

use super::ExperimentRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BinningMode {
    /// Equal numbers of records per bin, by PSD rank.
    #[default]
    EqualPopulation,
    /// Equal PSD intervals between the extreme values.
    EqualWidth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkBin {
    /// Indices into the record slice.
    pub indices: Vec<usize>,
    pub mean_psd: f64,
    /// Standard error of the mean PSD.
    pub psd_std_error: f64,
    /// Population standard deviation of PSD within the bin.
    pub psd_spread: f64,
}

impl BenchmarkBin {
    pub fn from_indices(records: &[ExperimentRecord], indices: Vec<usize>) -> Self {
        let n = indices.len() as f64;
        let mean = indices.iter().map(|&i| records[i].psd_benchmark).sum::<f64>() / n;
        let ss: f64 = indices.iter().map(|&i| (records[i].psd_benchmark - mean).powi(2)).sum();
        let sd = if indices.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
        BenchmarkBin { indices, mean_psd: mean, psd_std_error: sd / n.sqrt(), psd_spread: (ss / n).sqrt() }
    }
}

/// Groups records by benchmark PSD, ordered by increasing PSD.
///
/// Records of one run share a PSD and are never split between bins.
pub fn bin_by_benchmark(
    records: &[ExperimentRecord],
    n_bins: usize,
    min_per_bin: usize,
    mode: BinningMode,
) -> Result<Vec<BenchmarkBin>> {
    if n_bins == 0 {
        return Err(Error::Usage("n_bins must be >= 1".into()));
    }
    let need = n_bins * min_per_bin.max(1);
    if records.len() < need {
        return Err(Error::InsufficientData(format!(
            "{n_bins} bins of >= {min_per_bin} need {need} records, got {} (short by {})",
            records.len(),
            need - records.len()
        )));
    }
    let lo = records.iter().map(|r| r.psd_benchmark).fold(f64::INFINITY, f64::min);
    let hi = records.iter().map(|r| r.psd_benchmark).fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::Degenerate("all records share one benchmark PSD; only a single bin is possible".into()));
    }
    // runs are the binning unit
    let mut runs: Vec<(f64, u64, Vec<usize>)> = vec![];
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| records[a].run.cmp(&records[b].run).then(a.cmp(&b)));
    for i in order {
        match runs.last_mut() {
            Some((_, run, idx)) if *run == records[i].run => idx.push(i),
            _ => runs.push((records[i].psd_benchmark, records[i].run, vec![i])),
        }
    }
    runs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let groups: Vec<Vec<usize>> = match mode {
        BinningMode::EqualPopulation => {
            let total = records.len();
            let mut groups = vec![vec![]; n_bins];
            let mut seen = 0usize;
            for (_, _, idx) in runs {
                // bin of the run's middle record in the global rank order
                let mid = seen + idx.len() / 2;
                let b = (mid * n_bins / total).min(n_bins - 1);
                seen += idx.len();
                groups[b].extend(idx);
            }
            groups
        }
        BinningMode::EqualWidth => {
            let mut groups = vec![vec![]; n_bins];
            for (psd, _, idx) in runs {
                let b = (((psd - lo) / (hi - lo)) * n_bins as f64) as usize;
                groups[b.min(n_bins - 1)].extend(idx);
            }
            groups
        }
    };
    if let Some((b, g)) = groups.iter().enumerate().find(|(_, g)| g.len() < min_per_bin.max(1)) {
        return Err(Error::InsufficientData(format!(
            "bin {b} holds {} records, fewer than the minimum {min_per_bin}",
            g.len()
        )));
    }
    Ok(groups.into_iter().map(|g| BenchmarkBin::from_indices(records, g)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(run: u64, psd: f64) -> ExperimentRecord {
        ExperimentRecord {
            run,
            psd_benchmark: psd,
            peak_benchmark_angle: 0.1,
            final_power: 700.0,
            measured_fraction: 0.1,
            measured_n: 1e6,
            probe_dose: 0.0,
            seed: 0,
        }
    }

    #[test]
    fn equal_population_counts() {
        let records: Vec<_> = (0..210).map(|i| rec(i, 0.2 + (i * 37 % 210) as f64 * 1e-4)).collect();
        let bins = bin_by_benchmark(&records, 21, 5, BinningMode::EqualPopulation).unwrap();
        assert_eq!(bins.len(), 21);
        assert!(bins.iter().all(|b| b.indices.len() == 10));
        assert!(bins.windows(2).all(|w| w[0].mean_psd < w[1].mean_psd));
    }

    #[test]
    fn identical_psd_is_degenerate() {
        let records: Vec<_> = (0..50).map(|i| rec(i, 0.25)).collect();
        assert!(matches!(bin_by_benchmark(&records, 5, 2, BinningMode::EqualPopulation), Err(Error::Degenerate(_))));
    }

    #[test]
    fn shortfall_is_reported() {
        let records: Vec<_> = (0..20).map(|i| rec(i, 0.2 + i as f64 * 1e-3)).collect();
        let err = bin_by_benchmark(&records, 21, 1, BinningMode::EqualPopulation).unwrap_err();
        assert!(err.to_string().contains("short by 1"), "{err}");
    }

    #[test]
    fn runs_stay_together() {
        let mut records = vec![];
        for run in 0..12u64 {
            for _ in 0..3 {
                records.push(rec(run, 0.2 + run as f64 * 1e-3));
            }
        }
        let bins = bin_by_benchmark(&records, 4, 3, BinningMode::EqualPopulation).unwrap();
        for b in &bins {
            let runs: std::collections::BTreeSet<u64> = b.indices.iter().map(|&i| records[i].run).collect();
            assert_eq!(b.indices.len(), runs.len() * 3);
        }
        let w = bin_by_benchmark(&records, 4, 1, BinningMode::EqualWidth).unwrap();
        assert_eq!(w.iter().map(|b| b.indices.len()).sum::<usize>(), 36);
    }
}
