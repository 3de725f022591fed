use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analysis::ExperimentRecord;
use crate::error::{Error, Result};
use crate::fitting::{growth_model, DEFAULT_THRESHOLD};
use crate::imaging::{ImageGeometry, ProbeParams, ProjectedColumn};
use crate::physics::{
    phase_space_density, semi_ideal_profile, Axis, CloudState, PhysicalConstants, ProfileOptions, TrapGeometry,
};
use crate::{par, rng};

/// Physical setting shared by all runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Environment {
    pub constants: PhysicalConstants,
    /// Trap frequencies at `reference_power`.
    pub reference_trap: TrapGeometry,
    /// mW
    pub reference_power: f64,
    pub probe: ProbeParams,
    pub geometry: ImageGeometry,
    pub profile: ProfileOptions,
    pub axis: Axis,
}

impl Default for Environment {
    fn default() -> Self {
        Environment {
            constants: PhysicalConstants::default(),
            reference_trap: TrapGeometry::from_hz(79.5, 79.5, 112.4).expect("positive frequencies"),
            reference_power: 1100.0,
            probe: ProbeParams::default(),
            geometry: ImageGeometry::default(),
            profile: ProfileOptions::default(),
            axis: Axis::Z,
        }
    }
}

impl Environment {
    pub fn trap_at(&self, power: f64) -> Result<TrapGeometry> {
        self.reference_trap.at_power(power, self.reference_power)
    }

    pub fn validate(&self) -> Result<()> {
        self.constants.validate()?;
        self.probe.validate()?;
        self.geometry.validate()?;
        self.profile.validate()?;
        if !(self.reference_power > 0.0) {
            return Err(Error::Config("reference_power must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CampaignMode {
    /// Every run is evaporated to every setpoint.
    #[default]
    CrossProduct,
    /// Run `i` goes to setpoint `i mod len`.
    SingleSetpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CampaignConfig {
    pub runs: usize,
    /// Final powers, mW, ascending.
    pub setpoints: Vec<f64>,
    pub mode: CampaignMode,
    pub nominal_atoms: f64,
    /// K
    pub nominal_temperature: f64,
    /// Relative 1 sigma spread of the initial atom number.
    pub sigma_n: f64,
    /// Relative 1 sigma spread of the initial temperature.
    pub sigma_t: f64,
    /// Power at which the benchmark image is taken, mW.
    pub benchmark_power: f64,
    /// True critical curve P_c = c0 + c1 PSD + c2 PSD^2, mW.
    pub critical_curve: [f64; 3],
    /// 1/mW, negative.
    pub alpha_true: f64,
    /// 1/mW
    pub gamma_true: f64,
    /// Fraction readout noise.
    pub sigma_f: f64,
    /// Formation noise at the deepest setpoint.
    pub sigma_form: f64,
    /// Transition shift per unit probe dose, mW/us.
    pub kappa: f64,
    /// Probe exposure per run, us.
    pub probe_dose: f64,
    /// Relative noise of the benchmark peak angle.
    pub benchmark_noise: f64,
    /// Relative noise of the final atom number readout.
    pub n_readout_noise: f64,
    pub seed: u64,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            runs: 84,
            setpoints: (0..9).map(|k| 600.0 + 37.5 * k as f64).collect(),
            mode: CampaignMode::CrossProduct,
            nominal_atoms: 3e6,
            nominal_temperature: 1e-6,
            sigma_n: 0.03,
            sigma_t: 0.005,
            benchmark_power: 1100.0,
            critical_curve: [731.4, -565.0, 2500.0],
            alpha_true: -0.002,
            gamma_true: 0.15,
            sigma_f: 0.01,
            sigma_form: 0.0287,
            kappa: 0.25,
            probe_dose: 0.0,
            benchmark_noise: 0.005,
            n_readout_noise: 0.0059,
            seed: 0,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.setpoints.is_empty() || self.setpoints.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::Config("setpoints must be non-empty and positive".into()));
        }
        if self.setpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("setpoints must be strictly ascending".into()));
        }
        let sigmas =
            [self.sigma_n, self.sigma_t, self.sigma_f, self.sigma_form, self.benchmark_noise, self.n_readout_noise];
        if sigmas.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Config("noise levels must be >= 0".into()));
        }
        if !(self.nominal_atoms >= 1.0 && self.nominal_temperature > 0.0 && self.benchmark_power > 0.0) {
            return Err(Error::Config("nominal atoms, temperature and benchmark power must be positive".into()));
        }
        if !(self.alpha_true < 0.0 && self.gamma_true > 0.0) {
            return Err(Error::Config("alpha_true must be < 0 and gamma_true > 0".into()));
        }
        if !(self.kappa >= 0.0 && self.probe_dose >= 0.0) {
            return Err(Error::Config("kappa and probe_dose must be >= 0".into()));
        }
        Ok(())
    }

    /// Offset `P_c - beta` putting the growth curve's threshold crossing at P_c.
    pub fn crossing_offset(&self) -> f64 {
        let f = |u: f64| growth_model(u, self.alpha_true, 0.0, self.gamma_true) - DEFAULT_THRESHOLD;
        // fraction rises as power falls; f(0) = -alpha/gamma - threshold may have either sign
        let (mut lo, mut hi) = (-1.0, 0.0);
        if f(hi) > 0.0 {
            hi = 1.0;
            while f(hi) > 0.0 {
                hi *= 2.0;
            }
        }
        while f(lo) < 0.0 {
            lo *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions {
    pub atoms: f64,
    /// K
    pub temperature: f64,
    pub psd: f64,
    /// Non-positive draws that were redrawn.
    pub resampled: u32,
}

fn positive_draw(rng: &mut ChaCha8Rng, nominal: f64, rel: f64, resampled: &mut u32) -> f64 {
    loop {
        let xi: f64 = rng.sample(StandardNormal);
        let v = nominal * (1.0 + rel * xi);
        if v > 0.0 {
            return v;
        }
        *resampled += 1;
    }
}

/// Benchmark-cloud atom number, temperature and PSD for run `run`.
pub fn sample_initial_conditions(config: &CampaignConfig, env: &Environment, run: u64) -> Result<InitialConditions> {
    let mut rng = rng::task_rng(config.seed, rng::stream::INITIAL_CONDITIONS, run);
    let mut resampled = 0;
    let atoms = positive_draw(&mut rng, config.nominal_atoms, config.sigma_n, &mut resampled).max(1.0);
    let temperature = positive_draw(&mut rng, config.nominal_temperature, config.sigma_t, &mut resampled);
    let trap = env.trap_at(config.benchmark_power)?;
    let psd = phase_space_density(&CloudState::new(atoms, temperature, trap)?, &env.constants, &env.profile)?;
    Ok(InitialConditions { atoms, temperature, psd, resampled })
}

/// Peak benchmark angle per atom, rad, from the nominal cloud.
pub fn benchmark_calibration(config: &CampaignConfig, env: &Environment) -> Result<f64> {
    let trap = env.trap_at(config.benchmark_power)?;
    let state = CloudState::new(config.nominal_atoms, config.nominal_temperature, trap)?;
    let profile = semi_ideal_profile(&state, &env.constants, &env.profile)?;
    let peak = env.probe.rotation_coefficient * ProjectedColumn::new(&profile, env.axis).peak();
    Ok(peak / config.nominal_atoms)
}

/// True critical power for a benchmark PSD after a probe dose, mW.
pub fn true_critical_power(config: &CampaignConfig, psd: f64, dose: f64) -> f64 {
    let [c0, c1, c2] = config.critical_curve;
    c0 + c1 * psd + c2 * psd * psd - config.kappa * dose
}

/// Simulates one run evaporated to `power`. `index` seeds the outcome noise.
pub fn run_outcome(
    initial: &InitialConditions,
    run: u64,
    power: f64,
    dose: f64,
    config: &CampaignConfig,
    calibration: f64,
    index: u64,
) -> ExperimentRecord {
    let mut rng = rng::task_rng(config.seed, rng::stream::OUTCOME, index);
    let mut normal = || -> f64 { rng.sample(StandardNormal) };
    let (xi_f, xi_form, xi_n, xi_b) = (normal(), normal(), normal(), normal());

    let p_c = true_critical_power(config, initial.psd, dose);
    let beta = p_c - config.crossing_offset();
    let clean = growth_model(power, config.alpha_true, beta, config.gamma_true);
    let deepest = config.setpoints[0].min(power);
    let depth = if power < p_c && p_c > deepest { ((p_c - power) / (p_c - deepest)).min(1.0) } else { 0.0 };
    let form = config.sigma_form * depth * xi_form;

    let fraction = (clean + config.sigma_f * xi_f + form).clamp(0.0, 1.0);
    let survival = power / config.benchmark_power;
    let measured_n = initial.atoms * survival * (1.0 + config.n_readout_noise * xi_n + form);
    let angle = calibration * initial.atoms * (1.0 + config.benchmark_noise * xi_b);
    ExperimentRecord {
        run,
        psd_benchmark: initial.psd,
        peak_benchmark_angle: angle,
        final_power: power,
        measured_fraction: fraction,
        measured_n: measured_n.max(0.0),
        probe_dose: dose,
        seed: config.seed,
    }
}

/// All records of a campaign, in run order then setpoint order.
pub fn simulate_campaign(config: &CampaignConfig, env: &Environment) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    env.validate()?;
    if config.runs == 0 {
        return Ok(vec![]);
    }
    let calibration = benchmark_calibration(config, env)?;
    let per_run = par::map_indexed(config.runs, |r| -> Result<Vec<ExperimentRecord>> {
        let run = r as u64;
        let init = sample_initial_conditions(config, env, run)?;
        let n_sp = config.setpoints.len();
        Ok(match config.mode {
            CampaignMode::CrossProduct => (0..n_sp)
                .map(|k| {
                    let index = run * n_sp as u64 + k as u64;
                    run_outcome(&init, run, config.setpoints[k], config.probe_dose, config, calibration, index)
                })
                .collect(),
            CampaignMode::SingleSetpoint => {
                vec![run_outcome(&init, run, config.setpoints[r % n_sp], config.probe_dose, config, calibration, run)]
            }
        })
    });
    let mut out = Vec::with_capacity(config.runs * config.setpoints.len());
    for r in per_run {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_offset_puts_threshold_at_pc() {
        let c = CampaignConfig::default();
        let u = c.crossing_offset();
        assert!((growth_model(u, c.alpha_true, 0.0, c.gamma_true) - DEFAULT_THRESHOLD).abs() < 1e-12);
        assert!(u < 0.0);
        let mut flat = c.clone();
        flat.gamma_true = 1e-3;
        let u2 = flat.crossing_offset();
        assert!((growth_model(u2, flat.alpha_true, 0.0, flat.gamma_true) - DEFAULT_THRESHOLD).abs() < 1e-12);
    }

    #[test]
    fn zero_spread_gives_identical_psd() {
        let mut c = CampaignConfig { sigma_n: 0.0, sigma_t: 0.0, ..Default::default() };
        let env = Environment::default();
        let a = sample_initial_conditions(&c, &env, 0).unwrap();
        let b = sample_initial_conditions(&c, &env, 5).unwrap();
        assert_eq!(a.psd, b.psd);
        c.sigma_n = 0.03;
        assert_ne!(
            sample_initial_conditions(&c, &env, 0).unwrap().psd,
            sample_initial_conditions(&c, &env, 5).unwrap().psd
        );
    }

    #[test]
    fn benchmark_cloud_has_expected_scale() {
        let c = CampaignConfig::default();
        let env = Environment::default();
        let nominal = CampaignConfig { sigma_n: 0.0, sigma_t: 0.0, ..c.clone() };
        let psd = sample_initial_conditions(&nominal, &env, 0).unwrap().psd;
        assert!((psd - 0.25).abs() < 0.01, "{psd}");
        let peak = benchmark_calibration(&c, &env).unwrap() * c.nominal_atoms;
        assert!(peak > 0.05 && peak < 0.2, "{peak}");
    }

    #[test]
    fn empty_and_deterministic() {
        let env = Environment::default();
        let c = CampaignConfig { runs: 0, ..Default::default() };
        assert!(simulate_campaign(&c, &env).unwrap().is_empty());
        let c = CampaignConfig { runs: 5, ..Default::default() };
        let a = simulate_campaign(&c, &env).unwrap();
        assert_eq!(a.len(), 45);
        assert_eq!(a, simulate_campaign(&c, &env).unwrap());
    }
}
