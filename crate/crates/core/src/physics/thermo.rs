use serde::{Deserialize, Serialize};

use super::special::{bose_g, ZETA_2, ZETA_3};
use super::{CloudState, PhysicalConstants, ProfileOptions, TrapGeometry};
use crate::error::{Error, Result};

/// Temperature used to make the interaction parameter dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EtaReference {
    /// `eta = mu_TF(N) / (k_B T_c)`
    #[default]
    CriticalTemperature,
    /// `eta = mu_TF(N) / (k_B T)`
    Temperature,
}

/// Thermal de Broglie wavelength `h / sqrt(2 pi m k_B T)`, m.
pub fn thermal_de_broglie(temperature: f64, c: &PhysicalConstants) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::domain("thermal_de_broglie", format!("T = {temperature} must be > 0")));
    }
    Ok(c.planck() / (2.0 * std::f64::consts::PI * c.atom_mass * c.k_b * temperature).sqrt())
}

/// Ideal-gas transition temperature in a harmonic trap, K.
pub fn critical_temperature(atom_number: f64, trap: &TrapGeometry, c: &PhysicalConstants) -> Result<f64> {
    if !(atom_number >= 1.0) {
        return Err(Error::domain("critical_temperature", format!("N = {atom_number} < 1")));
    }
    Ok(c.hbar * trap.omega_bar() * atom_number.cbrt() / (c.k_b * ZETA_3.cbrt()))
}

/// Zero-temperature Thomas-Fermi chemical potential of `n0` condensed atoms, J.
pub fn tf_chemical_potential(n0: f64, trap: &TrapGeometry, c: &PhysicalConstants) -> f64 {
    if n0 <= 0.0 {
        return 0.0;
    }
    let wbar = trap.omega_bar();
    let a_ho = (c.hbar / (c.atom_mass * wbar)).sqrt();
    0.5 * c.hbar * wbar * (15.0 * n0 * c.scattering_length / a_ho).powf(0.4)
}

pub fn eta_parameter(state: &CloudState, c: &PhysicalConstants, reference: EtaReference) -> Result<f64> {
    if !(state.temperature > 0.0) {
        return Err(Error::domain("eta_parameter", "temperature must be > 0"));
    }
    let mu0 = tf_chemical_potential(state.atom_number, &state.trap, c);
    let t_ref = match reference {
        EtaReference::CriticalTemperature => critical_temperature(state.atom_number, &state.trap, c)?,
        EtaReference::Temperature => state.temperature,
    };
    Ok(mu0 / (c.k_b * t_ref))
}

/// Condensate fraction of the truncated semi-ideal expansion, clamped to [0, 1].
///
/// `t` is the reduced temperature `T / T_c`.
pub fn condensate_fraction(t: f64, eta: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::domain("condensate_fraction", format!("t = {t} must be >= 0")));
    }
    if !(eta >= 0.0) {
        return Err(Error::domain("condensate_fraction", format!("eta = {eta} must be >= 0")));
    }
    if t >= 1.0 {
        return Ok(0.0);
    }
    let t3 = t * t * t;
    let ideal = 1.0 - t3;
    let f = ideal - eta * (ZETA_2 / ZETA_3) * t * t * ideal.powf(0.4);
    Ok(f.clamp(0.0, 1.0))
}

/// Peak phase-space density of the thermal component, `n_th,max * lambda_T^3`.
///
/// Uncondensed clouds above `T_c` use the closed-form harmonic-trap relation
/// `N = (k_B T / hbar wbar)^3 g_3(z)`, `PSD = g_{3/2}(z)`; anything else is
/// read off the numerical semi-ideal profile.
pub fn phase_space_density(state: &CloudState, c: &PhysicalConstants, options: &ProfileOptions) -> Result<f64> {
    let tc = critical_temperature(state.atom_number, &state.trap, c)?;
    if state.temperature > tc {
        let scale = (c.k_b * state.temperature / (c.hbar * state.trap.omega_bar())).powi(3);
        let target = state.atom_number / scale;
        let z = solve_fugacity_g3(target)?;
        return bose_g(1.5, z);
    }
    let profile = super::semi_ideal_profile(state, c, options)?;
    Ok(profile.peak_phase_space_density())
}

/// Solves `g_3(z) = target` on `[0, 1]`.
fn solve_fugacity_g3(target: f64) -> Result<f64> {
    let gmax = bose_g(3.0, 1.0)?;
    if target > gmax {
        return Err(Error::numerical("phase_space_density", "cloud is below T_c"));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if bose_g(3.0, mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::special::ZETA_3_2;
    use std::f64::consts::PI;

    fn rb() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn de_broglie_values() {
        let c = rb();
        let l1 = thermal_de_broglie(1e-6, &c).unwrap();
        // direct evaluation: h / sqrt(2 pi m kB T)
        let oracle = 6.626_070_15e-34 / (2.0 * PI * 1.4432e-25 * 1.380_649e-23 * 1e-6f64).sqrt();
        assert!((l1 / oracle - 1.0).abs() < 1e-9);
        assert!((l1 - 1.87e-7).abs() < 0.01e-7);
        let l4 = thermal_de_broglie(4e-6, &c).unwrap();
        assert!((l4 / l1 - 0.5).abs() < 1e-12);
        let l100n = thermal_de_broglie(100e-9, &c).unwrap();
        assert!((l100n - 5.92e-7).abs() < 0.01e-7);
        assert!(thermal_de_broglie(0.0, &c).is_err());
    }

    #[test]
    fn critical_temperature_values() {
        let c = rb();
        let trap = TrapGeometry::from_hz(100.0, 100.0, 100.0).unwrap();
        let tc = critical_temperature(1e6, &trap, &c).unwrap();
        assert!((tc - 451e-9).abs() < 1e-9, "{tc}");
        let tc8 = critical_temperature(8e6, &trap, &c).unwrap();
        assert!((tc8 / tc - 2.0).abs() < 1e-12);
        let tc1 = critical_temperature(1.0, &trap, &c).unwrap();
        let oracle = c.hbar * trap.omega_bar() / (c.k_b * ZETA_3.cbrt());
        assert!((tc1 / oracle - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tf_chemical_potential_scaling() {
        let c = rb();
        let trap = TrapGeometry::from_hz(100.0, 100.0, 100.0).unwrap();
        assert_eq!(tf_chemical_potential(0.0, &trap, &c), 0.0);
        let m1 = tf_chemical_potential(1e3, &trap, &c);
        let m32 = tf_chemical_potential(32e3, &trap, &c);
        assert!((m32 / m1 - 4.0).abs() < 1e-12);
    }

    /// Integrates the TF density (mu - V)/g over the ellipsoid on a fine
    /// radial grid and checks the atom number comes back.
    #[test]
    fn tf_chemical_potential_integration_round_trip() {
        let c = rb();
        let trap = TrapGeometry::from_hz(100.0, 100.0, 100.0).unwrap();
        let n0 = 1e5;
        let mu = tf_chemical_potential(n0, &trap, &c);
        let g = c.coupling();
        let wbar = trap.omega_bar();
        let r_tf = (2.0 * mu / (c.atom_mass * wbar * wbar)).sqrt();
        let steps = 20_000;
        let h = r_tf / steps as f64;
        let mut total = 0.0;
        for i in 0..steps {
            let r = (i as f64 + 0.5) * h;
            let v = 0.5 * c.atom_mass * wbar * wbar * r * r;
            total += 4.0 * PI * r * r * (mu - v) / g * h;
        }
        assert!((total / n0 - 1.0).abs() < 0.005, "{total}");
    }

    #[test]
    fn eta_values() {
        let c = rb();
        let trap = TrapGeometry::from_hz(100.0, 100.0, 100.0).unwrap();
        let state = CloudState::new(1e6, 300e-9, trap).unwrap();
        let eta = eta_parameter(&state, &c, EtaReference::CriticalTemperature).unwrap();
        // direct evaluation oracle
        let wbar = trap.omega_bar();
        let a_ho = (c.hbar / (c.atom_mass * wbar)).sqrt();
        let mu = 0.5 * c.hbar * wbar * (15.0 * 1e6 * c.scattering_length / a_ho).powf(0.4);
        let tc = c.hbar * wbar * 100.0 / (c.k_b * ZETA_3.cbrt());
        assert!((eta - mu / (c.k_b * tc)).abs() < 1e-12);
        assert!(eta > 0.3 && eta < 0.5, "{eta}");
        let mut ideal = c;
        ideal.scattering_length = 0.0;
        assert_eq!(eta_parameter(&state, &ideal, EtaReference::CriticalTemperature).unwrap(), 0.0);
        // eta ~ N^(1/15) at fixed trap, so it vanishes as N -> 0
        let small = CloudState::new(1e3, 300e-9, trap).unwrap();
        let ratio = eta_parameter(&small, &c, EtaReference::CriticalTemperature).unwrap() / eta;
        assert!((ratio - 1e-3f64.powf(1.0 / 15.0)).abs() < 1e-12);
        let literal = eta_parameter(&state, &c, EtaReference::Temperature).unwrap();
        assert!((literal / eta - tc / 300e-9).abs() < 1e-9);
    }

    #[test]
    fn condensate_fraction_values() {
        assert_eq!(condensate_fraction(0.0, 0.7).unwrap(), 1.0);
        assert_eq!(condensate_fraction(1.0, 0.7).unwrap(), 0.0);
        assert!((condensate_fraction(0.8, 0.0).unwrap() - 0.488).abs() < 1e-12);
        // 1 - 0.512 - 0.4 * (zeta2/zeta3) * 0.64 * 0.488^0.4
        let oracle = 0.488 - 0.4 * (1.644_934_066_848_226 / 1.202_056_903_159_594) * 0.64 * 0.488f64.powf(0.4);
        let f = condensate_fraction(0.8, 0.4).unwrap();
        assert!((f - oracle).abs() < 1e-12);
        assert!((f - 0.225).abs() < 1e-3);
        assert!(condensate_fraction(0.5, -0.1).is_err());
        assert!(condensate_fraction(-0.1, 0.1).is_err());
    }

    #[test]
    fn saturated_and_half_fugacity_psd() {
        assert!((bose_g(1.5, 1.0).unwrap() - ZETA_3_2).abs() < 1e-12);
        let z = solve_fugacity_g3(bose_g(3.0, 0.5).unwrap()).unwrap();
        assert!((z - 0.5).abs() < 1e-12);
    }
}
