use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// chi^2 sampled on a rectangular grid. Row-major: index `i * y.len() + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chi2Surface {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub chi2: Vec<f64>,
    /// A derived quantity at each node (for example the condensate fraction).
    pub derived: Vec<f64>,
}

impl Chi2Surface {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.chi2[i * self.y.len() + j]
    }

    pub fn argmin(&self) -> (usize, usize) {
        let k = self
            .chi2
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        (k / self.y.len(), k % self.y.len())
    }

    pub fn min(&self) -> f64 {
        let (i, j) = self.argmin();
        self.at(i, j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intervals {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub derived: (f64, f64),
    /// The region reaches the edge of the surface; the affected bounds are
    /// limited by the grid rather than by chi^2.
    pub open: bool,
}

/// Extremal parameter values over the region `chi2 <= chi2_min + 1`, with
/// crossings located by linear interpolation between nodes.
pub fn confidence_bounds(surface: &Chi2Surface, chi2_min: f64) -> Result<Intervals> {
    let (nx, ny) = (surface.x.len(), surface.y.len());
    if nx == 0 || ny == 0 || surface.chi2.len() != nx * ny || surface.derived.len() != nx * ny {
        return Err(Error::Usage("chi2 surface shape mismatch".into()));
    }
    if !(surface.min() <= chi2_min + 1e-9 * chi2_min.abs().max(1.0)) {
        return Err(Error::Usage(format!("surface minimum {} is above chi2_min {chi2_min}", surface.min())));
    }
    let level = chi2_min + 1.0;
    let inside = |i: usize, j: usize| surface.at(i, j) <= level;
    let mut x = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y = (f64::INFINITY, f64::NEG_INFINITY);
    let mut d = (f64::INFINITY, f64::NEG_INFINITY);
    let mut open = false;
    let widen = |r: &mut (f64, f64), v: f64| {
        r.0 = r.0.min(v);
        r.1 = r.1.max(v);
    };
    // crossing between an inside node a and an outside node b along one axis
    let cross = |ca: f64, cb: f64, pa: f64, pb: f64| {
        let t = ((level - ca) / (cb - ca)).clamp(0.0, 1.0);
        (pa + t * (pb - pa), t)
    };
    for i in 0..nx {
        for j in 0..ny {
            if !inside(i, j) {
                continue;
            }
            let c = surface.at(i, j);
            let dv = surface.derived[i * ny + j];
            widen(&mut x, surface.x[i]);
            widen(&mut y, surface.y[j]);
            widen(&mut d, dv);
            if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
                open = true;
            }
            let neighbours =
                [(i.wrapping_sub(1), j, true), (i + 1, j, true), (i, j.wrapping_sub(1), false), (i, j + 1, false)];
            for (a, b, along_x) in neighbours {
                if a >= nx || b >= ny || inside(a, b) {
                    continue;
                }
                let cb = surface.at(a, b);
                let db = surface.derived[a * ny + b];
                if along_x {
                    let (p, t) = cross(c, cb, surface.x[i], surface.x[a]);
                    widen(&mut x, p);
                    widen(&mut d, dv + t * (db - dv));
                } else {
                    let (p, t) = cross(c, cb, surface.y[j], surface.y[b]);
                    widen(&mut y, p);
                    widen(&mut d, dv + t * (db - dv));
                }
            }
        }
    }
    Ok(Intervals { x, y, derived: d, open })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surface(f: impl Fn(f64, f64) -> f64, xs: Vec<f64>, ys: Vec<f64>) -> Chi2Surface {
        let mut chi2 = vec![];
        let mut derived = vec![];
        for &x in &xs {
            for &y in &ys {
                chi2.push(f(x, y));
                derived.push(2.0 * x);
            }
        }
        Chi2Surface { x: xs, y: ys, chi2, derived }
    }

    fn lin(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn quadratic_surface_gives_plus_minus_s() {
        let (n0, s) = (5.0, 0.7);
        let surf = surface(|x, y| ((x - n0) / s).powi(2) + (y / 2.0).powi(2), lin(0.0, 10.0, 401), lin(-5.0, 5.0, 201));
        let iv = confidence_bounds(&surf, 0.0).unwrap();
        assert!((iv.x.0 - (n0 - s)).abs() < 1e-3 && (iv.x.1 - (n0 + s)).abs() < 1e-3, "{:?}", iv.x);
        assert!((iv.y.0 + 2.0).abs() < 1e-3 && (iv.y.1 - 2.0).abs() < 1e-3);
        assert!((iv.derived.1 - 2.0 * (n0 + s)).abs() < 2e-3);
        assert!(!iv.open);
    }

    #[test]
    fn asymmetric_surface_matches_region_scan() {
        // chi2 rising faster on the right
        let f = |x: f64, y: f64| if x > 1.0 { 4.0 * (x - 1.0).powi(2) } else { 0.25 * (x - 1.0).powi(2) } + y * y;
        let surf = surface(f, lin(-4.0, 4.0, 801), lin(-2.0, 2.0, 101));
        let iv = confidence_bounds(&surf, 0.0).unwrap();
        // brute-force scan on a much finer grid
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..=800_000 {
            let x = -4.0 + 8.0 * k as f64 / 800_000.0;
            if f(x, 0.0) <= 1.0 {
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        assert!((iv.x.0 - lo).abs() < 1e-3 && (iv.x.1 - hi).abs() < 1e-3, "{:?} vs {lo} {hi}", iv.x);
        assert!((lo + 1.0).abs() < 1e-4 && (hi - 1.5).abs() < 1e-4);
    }

    #[test]
    fn region_at_edge_is_open() {
        let surf = surface(|x, _| x * x, lin(0.0, 3.0, 31), lin(0.0, 1.0, 5));
        let iv = confidence_bounds(&surf, 0.0).unwrap();
        assert!(iv.open);
        assert!(confidence_bounds(&surf, -5.0).is_err());
    }
}
