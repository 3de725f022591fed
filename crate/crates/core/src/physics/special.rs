//! Riemann zeta and Bose (polylogarithm) functions on the real line.

use std::f64::consts::PI;
use std::sync::OnceLock;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// B_{2k} / (2k)! for k = 1..=10.
const BERNOULLI_OVER_FACTORIAL: [f64; 10] = [
    1.0 / 6.0 / 2.0,
    -1.0 / 30.0 / 24.0,
    1.0 / 42.0 / 720.0,
    -1.0 / 30.0 / 40_320.0,
    5.0 / 66.0 / 3_628_800.0,
    -691.0 / 2730.0 / 479_001_600.0,
    7.0 / 6.0 / 87_178_291_200.0,
    -3617.0 / 510.0 / 20_922_789_888_000.0,
    43_867.0 / 798.0 / 6_402_373_705_728_000.0,
    -174_611.0 / 330.0 / 2_432_902_008_176_640_000.0,
];

pub const ZETA_2: f64 = PI * PI / 6.0;
pub const ZETA_3: f64 = 1.202_056_903_159_594_3;
pub const ZETA_3_2: f64 = 2.612_375_348_685_488;

/// Riemann zeta for real `s != 1`.
///
/// Euler-Maclaurin summation for `s >= 1/2`, the functional equation below.
pub fn zeta(s: f64) -> f64 {
    if s == 1.0 {
        return f64::INFINITY;
    }
    if s == 0.0 {
        return -0.5;
    }
    if s < 0.5 {
        // Trivial zeros; sin() would only give them to rounding.
        if s < 0.0 && s.fract() == 0.0 && (s as i64) % 2 == 0 {
            return 0.0;
        }
        let one_minus = 1.0 - s;
        return 2f64.powf(s) * PI.powf(s - 1.0) * (PI * s / 2.0).sin() * gamma(one_minus) * zeta(one_minus);
    }
    const N: usize = 12;
    let n = N as f64;
    let mut sum: f64 = (1..N).map(|k| (k as f64).powf(-s)).sum();
    sum += n.powf(1.0 - s) / (s - 1.0) + 0.5 * n.powf(-s);
    // rising factorial s (s+1) ... (s+2k-2) times N^{-s-2k+1}
    let mut rising = s;
    let mut npow = n.powf(-s - 1.0);
    for (k, coeff) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        if k > 0 {
            rising *= (s + 2.0 * k as f64 - 1.0) * (s + 2.0 * k as f64);
            npow /= n * n;
        }
        sum += coeff * rising * npow;
    }
    sum
}

fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

/// Bose function `g_p(z) = sum_{l>=1} z^l / l^p` for `p > 1`, `0 <= z <= 1`.
///
/// Small fugacities use the defining series with a geometric tail bound.
/// Near `z = 1` the series is replaced by its expansion in `alpha = -ln z`,
/// whose coefficients are zeta values; at `z = 1` this gives `zeta(p)` exactly
/// instead of a truncated sum.
pub fn bose_g(p: f64, z: f64) -> Result<f64> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::domain("bose_g", format!("order p = {p} must be > 1")));
    }
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::domain("bose_g", format!("fugacity z = {z} outside [0, 1]")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z <= 0.5 {
        return Ok(direct_series(p, z));
    }
    Ok(alpha_expansion(p, -z.ln()))
}

fn direct_series(p: f64, z: f64) -> f64 {
    let mut sum = 0.0;
    let mut zl = 1.0;
    for l in 1..10_000 {
        zl *= z;
        let term = zl * (l as f64).powf(-p);
        sum += term;
        // remaining tail <= term * z / (1 - z)
        if term * z / (1.0 - z) < 1e-17 * sum {
            break;
        }
    }
    sum
}

fn alpha_expansion(p: f64, alpha: f64) -> f64 {
    let rounded = p.round();
    let integer_order = (p - rounded).abs() < 1e-9;
    let mut sum = if alpha == 0.0 {
        0.0
    } else if integer_order {
        let n = rounded as usize;
        let mut fact = 1.0;
        for k in 1..n {
            fact *= k as f64;
        }
        (-alpha).powi(n as i32 - 1) / fact * (harmonic(n - 1) - alpha.ln())
    } else {
        gamma(1.0 - p) * alpha.powf(p - 1.0)
    };
    let mut power = 1.0; // (-alpha)^k / k!
    for k in 0..200 {
        if k > 0 {
            power *= -alpha / k as f64;
        }
        if integer_order && k + 1 == rounded as usize {
            continue;
        }
        let term = zeta(p - k as f64) * power;
        sum += term;
        if alpha == 0.0 {
            break;
        }
        // zeta vanishes at negative even integers; such terms say nothing about convergence
        if k as f64 > p + 2.0 && term != 0.0 && term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

/// Fast tabulated `g_{3/2}(exp(-x))` for `x >= 0`, used in density-profile hot loops.
///
/// The table is uniform in `s = sqrt(x)`, in which the function is analytic
/// (the square-root cusp at `x = 0` becomes linear), and is interpolated with
/// four-point Lagrange polynomials. Accuracy is better than 1e-10 absolute.
pub struct BoseTable {
    step: f64,
    values: Vec<f64>,
}

const TABLE_S_MAX: f64 = 5.5;
const TABLE_NODES: usize = 4401;

impl BoseTable {
    pub fn g32() -> &'static BoseTable {
        static TABLE: OnceLock<BoseTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            let step = TABLE_S_MAX / (TABLE_NODES - 1) as f64;
            let values = (0..TABLE_NODES + 2)
                .map(|i| {
                    let s = i as f64 * step;
                    bose_g(1.5, (-s * s).exp()).expect("in domain")
                })
                .collect();
            BoseTable { step, values }
        })
    }

    /// `g_{3/2}(exp(-x))`; `x` is clamped at zero.
    #[inline]
    pub fn eval_neg_log(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        let s = x.sqrt();
        if s >= TABLE_S_MAX {
            let z = (-x).exp();
            return z + z * z * 0.353_553_390_593_273_8;
        }
        let u = s / self.step;
        let i = (u.floor() as usize).clamp(1, TABLE_NODES - 2);
        let t = u - i as f64;
        let (y0, y1, y2, y3) = (self.values[i - 1], self.values[i], self.values[i + 1], self.values[i + 2]);
        // Lagrange on nodes -1, 0, 1, 2
        let c0 = -t * (t - 1.0) * (t - 2.0) / 6.0;
        let c1 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
        let c2 = -(t + 1.0) * t * (t - 2.0) / 2.0;
        let c3 = (t + 1.0) * t * (t - 1.0) / 6.0;
        c0 * y0 + c1 * y1 + c2 * y2 + c3 * y3
    }
}
