use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{ProbeParams, ProjectedColumn};
use crate::physics::{
    condensate_fraction, critical_dimple_depth, critical_temperature, eta_parameter, semi_ideal_profile, Axis,
    CloudState, DimpleDepth, DimpleParams, EtaReference, PhysicalConstants, ProfileOptions, TrapGeometry,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DimpleConfig {
    /// Informational; the potential depth is specified directly.
    pub wavelength_nm: f64,
    pub waist_um: f64,
    pub axial_hz: f64,
    pub max_depth_uk: f64,
    pub cycle_rate_hz: f64,
    pub cycles: usize,
    pub samples_per_cycle: usize,
    pub pulses_per_cycle: usize,
    pub pulse_duration_us: f64,
    /// Share of the reservoir held by the dimple at full depth.
    pub capture_max: f64,
    /// Depth scale of the saturating capture law, uK.
    pub capture_saturation_uk: f64,
    /// Relaxation time of the dimple population, s.
    pub loading_time_s: f64,
    /// Reservoir atom number factor per cycle.
    pub n_decay: f64,
    /// Reservoir temperature factor per cycle.
    pub t_decay: f64,
    /// Reservoir heating per us of probe light, K/us.
    pub heating_per_us: f64,
    /// Initial reservoir, used by [`DimpleConfig::reservoir`].
    pub reservoir_atoms: f64,
    pub reservoir_temperature_nk: f64,
}

impl Default for DimpleConfig {
    fn default() -> Self {
        DimpleConfig {
            wavelength_nm: 912.0,
            waist_um: 7.0,
            axial_hz: 60.0,
            max_depth_uk: 1.12,
            cycle_rate_hz: 10.0,
            cycles: 30,
            samples_per_cycle: 40,
            pulses_per_cycle: 1,
            pulse_duration_us: 2.0,
            capture_max: 0.5,
            capture_saturation_uk: 0.3,
            loading_time_s: 0.004,
            n_decay: 1.0,
            t_decay: 1.0,
            heating_per_us: 3.0e-9,
            reservoir_atoms: 6.5e5,
            reservoir_temperature_nk: 470.0,
        }
    }
}

impl DimpleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.waist_um > 0.0 && self.axial_hz > 0.0 && self.max_depth_uk >= 0.0) {
            return Err(Error::Config("dimple waist and axial frequency must be > 0, depth >= 0".into()));
        }
        if self.cycles == 0 || self.samples_per_cycle < 2 || !(self.cycle_rate_hz > 0.0) {
            return Err(Error::Config("need cycles >= 1, samples_per_cycle >= 2, cycle_rate > 0".into()));
        }
        if self.pulses_per_cycle > self.samples_per_cycle {
            return Err(Error::Config("at most one probe pulse per sample".into()));
        }
        if !(self.capture_max > 0.0 && self.capture_max <= 1.0 && self.capture_saturation_uk > 0.0) {
            return Err(Error::Config("capture_max must lie in (0, 1], saturation depth > 0".into()));
        }
        if !(self.loading_time_s >= 0.0 && self.n_decay > 0.0 && self.t_decay > 0.0 && self.heating_per_us >= 0.0) {
            return Err(Error::Config("loading time, decay factors and heating must be non-negative".into()));
        }
        Ok(())
    }

    /// Initial reservoir state. Only N and T enter the dimple model; the trap is nominal.
    pub fn reservoir(&self) -> Result<CloudState> {
        CloudState::new(self.reservoir_atoms, self.reservoir_temperature_nk * 1e-9, TrapGeometry::isotropic(1.0)?)
    }

    pub fn params(&self) -> DimpleParams {
        DimpleParams {
            waist: self.waist_um * 1e-6,
            axial_omega: 2.0 * std::f64::consts::PI * self.axial_hz,
            max_depth: (self.max_depth_uk * 1e-6).max(1e-12),
            eta_reference: EtaReference::CriticalTemperature,
        }
    }

    /// Equilibrium share of the reservoir in a dimple of depth `depth_uk`.
    pub fn capture(&self, depth_uk: f64) -> f64 {
        if depth_uk <= 0.0 || self.max_depth_uk <= 0.0 {
            return 0.0;
        }
        let s = self.capture_saturation_uk;
        self.capture_max * (-(depth_uk / s)).exp_m1() / (-(self.max_depth_uk / s)).exp_m1()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Bec,
    Thermal,
}

/// BEC iff `depth` exceeds the critical depth of the boundary.
pub fn classify_phase(depth: f64, boundary: DimpleDepth) -> Phase {
    if boundary.condensed_at(depth) {
        Phase::Bec
    } else {
        Phase::Thermal
    }
}

/// Critical depth for a reservoir of `total_atoms` assuming full capture, K.
pub fn phase_boundary(
    total_atoms: f64,
    temperature: f64,
    config: &DimpleConfig,
    c: &PhysicalConstants,
) -> Result<DimpleDepth> {
    critical_dimple_depth(temperature, config.capture_max * total_atoms, &config.params(), c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimpleSample {
    /// s
    pub time: f64,
    pub cycle: usize,
    pub depth_uk: f64,
    pub reservoir_n: f64,
    /// K
    pub reservoir_t: f64,
    pub dimple_atoms: f64,
    pub condensed_atoms: f64,
    /// Classifier label from the full-capture boundary.
    pub phase: Phase,
    /// Label from the loaded dimple population.
    pub truth: Phase,
    /// rad, present when a probe pulse fired at this sample.
    pub peak_angle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimpleCycleTrace {
    pub samples: Vec<DimpleSample>,
    pub notes: Vec<String>,
}

impl DimpleCycleTrace {
    /// Cycles (0-based) in which any sample is condensed by the ground truth.
    pub fn bec_cycles(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.samples.iter().filter(|s| s.truth == Phase::Bec).map(|s| s.cycle).collect();
        out.dedup();
        out
    }

    /// Largest condensed atom number per cycle.
    pub fn peak_condensed(&self) -> Vec<f64> {
        let cycles = self.samples.last().map_or(0, |s| s.cycle + 1);
        let mut out = vec![0.0; cycles];
        for s in &self.samples {
            out[s.cycle] = f64::max(out[s.cycle], s.condensed_atoms);
        }
        out
    }

    /// Share of samples in `cycles` whose classifier label matches the truth.
    pub fn agreement(&self, cycles: std::ops::Range<usize>) -> f64 {
        let sel: Vec<&DimpleSample> = self.samples.iter().filter(|s| cycles.contains(&s.cycle)).collect();
        sel.iter().filter(|s| s.phase == s.truth).count() as f64 / sel.len().max(1) as f64
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "time_s",
            "cycle",
            "depth_uk",
            "reservoir_n",
            "reservoir_t_k",
            "dimple_atoms",
            "condensed_atoms",
            "phase",
            "truth",
            "peak_angle_rad",
        ])?;
        let label = |p: Phase| if p == Phase::Bec { "bec" } else { "thermal" };
        for s in &self.samples {
            w.write_record([
                format!("{:.6}", s.time),
                s.cycle.to_string(),
                format!("{:.6e}", s.depth_uk),
                format!("{:.6e}", s.reservoir_n),
                format!("{:.6e}", s.reservoir_t),
                format!("{:.6e}", s.dimple_atoms),
                format!("{:.6e}", s.condensed_atoms),
                label(s.phase).to_string(),
                label(s.truth).to_string(),
                s.peak_angle.map_or(String::new(), |a| format!("{a:.6e}")),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<dimple trace>", e))?;
        Ok(())
    }
}

fn condensed(atoms: f64, temperature: f64, depth_k: f64, params: &DimpleParams, c: &PhysicalConstants) -> Result<f64> {
    if depth_k <= 0.0 || atoms < 1.0 {
        return Ok(0.0);
    }
    let trap = params.trap(depth_k, c)?;
    let state = CloudState::new(atoms, temperature, trap)?;
    let t = temperature / critical_temperature(atoms, &trap, c)?;
    Ok(atoms * condensate_fraction(t, eta_parameter(&state, c, params.eta_reference)?)?)
}

/// Steps the reservoir through the dimple cycles.
///
/// Within a cycle the depth follows `U_max sin^2(pi f t)`; the dimple
/// population relaxes towards `capture(U) N` with `loading_time_s`. Probe
/// pulses are spread evenly over the cycle and heat the reservoir.
pub fn simulate_dimple_cycles(
    config: &DimpleConfig,
    reservoir: &CloudState,
    probe: &ProbeParams,
    c: &PhysicalConstants,
    profile: &ProfileOptions,
) -> Result<DimpleCycleTrace> {
    config.validate()?;
    let params = config.params();
    let period = 1.0 / config.cycle_rate_hz;
    let m = config.samples_per_cycle;
    let dt = period / m as f64;
    let pulse_samples: Vec<usize> = (0..config.pulses_per_cycle)
        .map(|j| (((j as f64 + 0.5) / config.pulses_per_cycle as f64) * m as f64) as usize)
        .collect();
    let relax = if config.loading_time_s > 0.0 { 1.0 - (-dt / config.loading_time_s).exp() } else { 1.0 };

    let (mut n_res, mut t_res) = (reservoir.atom_number, reservoir.temperature);
    let mut dimple_atoms = 0.0;
    let mut samples = Vec::with_capacity(config.cycles * m);
    let mut boundary = (f64::NAN, f64::NAN, DimpleDepth::NeverCondenses);
    for cycle in 0..config.cycles {
        for k in 0..m {
            if (boundary.0, boundary.1) != (n_res, t_res) {
                boundary = (n_res, t_res, phase_boundary(n_res, t_res, config, c)?);
            }
            let time = (cycle * m + k) as f64 * dt + 0.5 * dt;
            let depth_uk = config.max_depth_uk * (std::f64::consts::PI * config.cycle_rate_hz * time).sin().powi(2);
            let target = config.capture(depth_uk) * n_res;
            dimple_atoms += (target - dimple_atoms) * relax;
            let n0 = condensed(dimple_atoms, t_res, depth_uk * 1e-6, &params, c)?;
            let truth = if n0 > 0.0 { Phase::Bec } else { Phase::Thermal };
            let phase = classify_phase(depth_uk * 1e-6, boundary.2);
            let mut peak_angle = None;
            if pulse_samples.contains(&k) {
                peak_angle = Some(if depth_uk > 0.0 && dimple_atoms >= 1.0 {
                    let trap = params.trap(depth_uk * 1e-6, c)?;
                    let p = semi_ideal_profile(&CloudState::new(dimple_atoms, t_res, trap)?, c, profile)?;
                    probe.rotation_coefficient * ProjectedColumn::new(&p, Axis::Z).peak()
                } else {
                    0.0
                });
                t_res += config.heating_per_us * config.pulse_duration_us;
            }
            samples.push(DimpleSample {
                time,
                cycle,
                depth_uk,
                reservoir_n: n_res,
                reservoir_t: t_res,
                dimple_atoms,
                condensed_atoms: n0,
                phase,
                truth,
                peak_angle,
            });
        }
        n_res *= config.n_decay;
        t_res *= config.t_decay;
    }
    Ok(DimpleCycleTrace {
        samples,
        notes: vec![
            "non-adiabatic loading beyond a single relaxation time is not modelled".into(),
            format!("classifier assumes capture of {} of the reservoir", config.capture_max),
        ],
    })
}
