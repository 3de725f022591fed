use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One simulated (or measured) experimental run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    /// Run index; records of one evaporation series share it.
    pub run: u64,
    /// Peak phase-space density of the benchmark cloud.
    pub psd_benchmark: f64,
    /// Peak Faraday angle of the benchmark image, rad.
    pub peak_benchmark_angle: f64,
    /// Final trap power, mW.
    #[serde(rename = "final_power_mw")]
    pub final_power: f64,
    pub measured_fraction: f64,
    pub measured_n: f64,
    /// Total dispersive exposure, us.
    #[serde(rename = "probe_dose_us")]
    pub probe_dose: f64,
    pub seed: u64,
}

pub const RECORD_HEADER: [&str; 8] = [
    "run",
    "psd_benchmark",
    "peak_benchmark_angle",
    "final_power_mw",
    "measured_fraction",
    "measured_n",
    "probe_dose_us",
    "seed",
];

impl ExperimentRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.psd_benchmark > 0.0) {
            return Err(Error::Usage(format!("run {}: psd_benchmark must be > 0", self.run)));
        }
        if !(self.final_power > 0.0) {
            return Err(Error::Usage(format!("run {}: final power must be > 0", self.run)));
        }
        if !(0.0..=1.0).contains(&self.measured_fraction) {
            return Err(Error::Usage(format!("run {}: fraction {} outside [0, 1]", self.run, self.measured_fraction)));
        }
        Ok(())
    }
}

pub fn write_records<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RECORD_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<records>", e))?;
    Ok(())
}

/// Reads a record table; the header must match [`RECORD_HEADER`] exactly.
pub fn read_records<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(RECORD_HEADER.iter().copied()) {
        return Err(Error::Format { offset: 0, msg: format!("record header must be `{}`", RECORD_HEADER.join(",")) });
    }
    let mut out = vec![];
    for row in rdr.deserialize() {
        let r: ExperimentRecord = row?;
        r.validate()?;
        out.push(r);
    }
    Ok(out)
}
