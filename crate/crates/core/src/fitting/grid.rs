use log::warn;
use nalgebra::{Matrix2, SMatrix, SVector, Vector2};
use serde::{Deserialize, Serialize};

use super::bounds::{confidence_bounds, Chi2Surface};
use crate::error::{Error, Result};
use crate::imaging::{BinGeometry, ProjectedColumn, RadialProfile};
use crate::par;
use crate::physics::{semi_ideal_profile, Axis, CloudState, PhysicalConstants, ProfileOptions, TrapGeometry};

/// Lower bound on the per-bin uncertainty, rad.
pub const SIGMA_FLOOR: f64 = 1e-4;

const SIGMA_MODEL: &str = "standard error of the bin mean (population std / sqrt(count)), floored at 1e-4 rad";

/// chi^2 of `data` against `model`, using the data's per-bin uncertainty.
pub fn chi_square(data: &RadialProfile, model: &RadialProfile) -> Result<f64> {
    data.validate()?;
    if model.len() != data.len()
        || model.mean.len() != data.len()
        || data.radius.iter().zip(&model.radius).any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
    {
        return Err(Error::Usage("chi_square: data and model bin grids differ".into()));
    }
    Ok((0..data.len())
        .map(|i| {
            let s = sigma(data.std[i], data.count[i]);
            ((data.mean[i] - model.mean[i]) / s).powi(2)
        })
        .sum())
}

fn sigma(std: f64, count: usize) -> f64 {
    (std / (count as f64).sqrt()).max(SIGMA_FLOOR)
}

/// (N, T) search grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub n_points: usize,
    pub t_points: usize,
    pub n_min: f64,
    pub n_max: f64,
    /// K
    pub t_min: f64,
    /// K
    pub t_max: f64,
    /// Subdivisions per coarse cell in the refinement pass.
    pub zoom: usize,
    /// Radius covered by the model bank, um. Defaults to the reference profile's.
    pub max_radius: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_points: 80,
            t_points: 80,
            n_min: 1e4,
            n_max: 1e7,
            t_min: 10e-9,
            t_max: 3e-6,
            zoom: 4,
            max_radius: None,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 3 || self.t_points < 3 || self.zoom < 2 {
            return Err(Error::Config("fit grid needs >= 3 points per axis and zoom >= 2".into()));
        }
        if !(self.n_min >= 1.0 && self.n_max > self.n_min && self.t_min > 0.0 && self.t_max > self.t_min) {
            return Err(Error::Config("fit grid ranges must be increasing, N >= 1 and T > 0".into()));
        }
        Ok(())
    }

    fn log_n(&self, i: f64) -> f64 {
        let (a, b) = (self.n_min.ln(), self.n_max.ln());
        a + (b - a) * i / (self.n_points - 1) as f64
    }

    fn temp(&self, j: f64) -> f64 {
        self.t_min + (self.t_max - self.t_min) * j / (self.t_points - 1) as f64
    }
}

/// Everything besides (N, T) needed to turn a cloud into a model profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub constants: PhysicalConstants,
    pub trap: TrapGeometry,
    pub axis: Axis,
    /// rad um^2 / atom
    pub rotation_coefficient: f64,
    pub profile: ProfileOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFitResult {
    #[serde(rename = "best_N")]
    pub best_n: f64,
    /// K
    #[serde(rename = "best_T")]
    pub best_t: f64,
    pub fraction: f64,
    pub chi2_min: f64,
    #[serde(rename = "ci_N")]
    pub ci_n: (f64, f64),
    #[serde(rename = "ci_T")]
    pub ci_t: (f64, f64),
    pub ci_fraction: (f64, f64),
    /// Coarse minimum on the edge of the search grid.
    pub on_boundary: bool,
    /// The chi2_min + 1 region reaches the edge of the grid it was read from.
    pub open_interval: bool,
    /// Signal indistinguishable from zero.
    pub low_signal: bool,
    pub bins_used: usize,
    pub sigma_model: String,
}

/// Bin weights over projected scaled radii: the model value of a bin is the
/// weighted sum of the column density at these radii.
#[derive(Debug, Clone)]
struct Kernel {
    bins: Vec<Vec<(f64, f64)>>,
    /// Bin index along the radius, matched against `round(radius / width)`.
    index: Vec<usize>,
    geometry: Option<BinGeometry>,
    radii: Vec<f64>,
    rho_max: f64,
}

impl Kernel {
    fn from_profile(reference: &RadialProfile, model: &ModelSpec, max_radius: Option<f64>) -> Result<Self> {
        match reference.geometry {
            Some(g) => {
                let r = max_radius.unwrap_or(g.max_radius);
                let g = BinGeometry { max_radius: r, ..g };
                let offsets = g.offsets_by_bin();
                let mut bins = vec![];
                let mut index = vec![];
                for (k, list) in offsets.into_iter().enumerate() {
                    // full annuli only
                    if (k as f64 + 0.5) * g.bin_width > r * (1.0 + 1e-12) || list.is_empty() {
                        continue;
                    }
                    let mut rho: Vec<f64> = list
                        .iter()
                        .map(|&(x, y)| ProjectedColumn::scaled_radius(&model.trap, model.axis, x, y))
                        .collect();
                    rho.sort_by(f64::total_cmp);
                    let w = 1.0 / rho.len() as f64;
                    let mut merged: Vec<(f64, f64)> = vec![];
                    for v in rho {
                        match merged.last_mut() {
                            Some(last) if (v - last.0).abs() <= 1e-12 * v.max(1e-30) => last.1 += w,
                            _ => merged.push((v, w)),
                        }
                    }
                    bins.push(merged);
                    index.push(k);
                }
                Ok(Kernel::finish(bins, index, Some(g), vec![]))
            }
            None => {
                let bins = reference
                    .radius
                    .iter()
                    .map(|&r| vec![(ProjectedColumn::scaled_radius(&model.trap, model.axis, r, 0.0), 1.0)])
                    .collect();
                Ok(Kernel::finish(bins, (0..reference.len()).collect(), None, reference.radius.clone()))
            }
        }
    }

    fn finish(bins: Vec<Vec<(f64, f64)>>, index: Vec<usize>, geometry: Option<BinGeometry>, radii: Vec<f64>) -> Self {
        let rho_max = bins.iter().flatten().map(|b| b.0).fold(0.0, f64::max);
        Kernel { bins, index, geometry, radii, rho_max }
    }

    /// Pairs of (data bin, kernel bin) usable for `data`.
    fn match_bins(&self, data: &RadialProfile) -> Result<Vec<(usize, usize)>> {
        match (&self.geometry, &data.geometry) {
            (Some(g), Some(d)) => {
                let same = (g.pixel_size - d.pixel_size).abs() <= 1e-12 * g.pixel_size
                    && (g.bin_width - d.bin_width).abs() <= 1e-12 * g.bin_width
                    && (g.center_frac.0 - d.center_frac.0).abs() < 1e-9
                    && (g.center_frac.1 - d.center_frac.1).abs() < 1e-9;
                if !same {
                    return Err(Error::Usage("profile bin geometry differs from the fitter's model bank".into()));
                }
                let limit = g.max_radius.min(d.max_radius) * (1.0 + 1e-12);
                let mut pairs = vec![];
                for (i, r) in data.radius.iter().enumerate() {
                    let k = (r / d.bin_width).round() as usize;
                    if (k as f64 + 0.5) * d.bin_width > limit {
                        continue;
                    }
                    if let Ok(pos) = self.index.binary_search(&k) {
                        pairs.push((i, pos));
                    }
                }
                Ok(pairs)
            }
            (None, _) => {
                if data.radius.len() != self.radii.len()
                    || data.radius.iter().zip(&self.radii).any(|(a, b)| (a - b).abs() > 1e-9 * a.abs().max(1.0))
                {
                    return Err(Error::Usage("profile radii differ from the fitter's model bank".into()));
                }
                Ok((0..data.len()).map(|i| (i, i)).collect())
            }
            (Some(_), None) => Err(Error::Usage("fitter expects a profile with pixel bin geometry".into())),
        }
    }
}

#[derive(Debug, Clone)]
struct Model {
    values: Vec<f64>,
    fraction: f64,
}

/// Precomputed model bank for one bin geometry plus the refinement logic.
pub struct GridFitter {
    model: ModelSpec,
    spec: GridSpec,
    kernel: Kernel,
    bank: Vec<Option<Model>>,
}

impl GridFitter {
    /// Builds the coarse model bank for profiles binned like `reference`.
    pub fn new(model: ModelSpec, spec: GridSpec, reference: &RadialProfile) -> Result<Self> {
        spec.validate()?;
        model.constants.validate()?;
        model.profile.validate()?;
        let kernel = Kernel::from_profile(reference, &model, spec.max_radius)?;
        let mut fitter = GridFitter { model, spec, kernel, bank: vec![] };
        let nt = spec.t_points;
        let bank = par::map_indexed(spec.n_points * nt, |k| {
            let n = spec.log_n((k / nt) as f64).exp();
            let t = spec.temp((k % nt) as f64);
            fitter.evaluate(n, t).ok()
        });
        let failed = bank.iter().filter(|m| m.is_none()).count();
        if failed > 0 {
            warn!("{failed} of {} grid models failed and are excluded", bank.len());
        }
        fitter.bank = bank;
        Ok(fitter)
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn model_spec(&self) -> &ModelSpec {
        &self.model
    }

    fn evaluate(&self, n: f64, t: f64) -> Result<Model> {
        let state = CloudState::new(n, t, self.model.trap)?;
        let profile = semi_ideal_profile(&state, &self.model.constants, &self.model.profile)?;
        let col = ProjectedColumn::within(&profile, self.model.axis, self.kernel.rho_max);
        let c = self.model.rotation_coefficient;
        let values = self
            .kernel
            .bins
            .iter()
            .map(|bin| c * bin.iter().map(|&(rho, w)| w * col.eval_scaled(rho)).sum::<f64>())
            .collect();
        Ok(Model { values, fraction: profile.condensate_fraction })
    }

    /// Model profile for (N, T) on the bins of `like` that this fitter can use.
    pub fn model_profile(&self, n: f64, t: f64, like: &RadialProfile) -> Result<RadialProfile> {
        let pairs = self.kernel.match_bins(like)?;
        let m = self.evaluate(n, t)?;
        let mut out =
            RadialProfile { radius: vec![], mean: vec![], std: vec![], count: vec![], geometry: like.geometry };
        for (i, k) in pairs {
            out.radius.push(like.radius[i]);
            out.mean.push(m.values[k]);
            out.std.push(0.0);
            out.count.push(like.count[i]);
        }
        Ok(out)
    }

    pub fn fit(&self, profile: &RadialProfile) -> Result<GridFitResult> {
        self.fit_with_surface(profile).map(|(r, _)| r)
    }

    /// Fit plus the refined chi^2 surface over (N, T) with fractions as the derived value.
    pub fn fit_with_surface(&self, profile: &RadialProfile) -> Result<(GridFitResult, Chi2Surface)> {
        profile.validate()?;
        let pairs = self.kernel.match_bins(profile)?;
        if pairs.len() < 10 {
            return Err(Error::InsufficientData(format!("{} usable bins, at least 10 required", pairs.len())));
        }
        let data: Vec<(f64, f64, usize)> =
            pairs.iter().map(|&(i, k)| (profile.mean[i], 1.0 / sigma(profile.std[i], profile.count[i]), k)).collect();
        let chi2 = |m: &Model| -> f64 { data.iter().map(|&(y, w, k)| ((y - m.values[k]) * w).powi(2)).sum() };
        let low_signal = data.iter().all(|&(y, _, _)| y.abs() < SIGMA_FLOOR);

        let spec = &self.spec;
        let (nn, nt) = (spec.n_points, spec.t_points);
        let coarse = Chi2Surface {
            x: (0..nn).map(|i| spec.log_n(i as f64).exp()).collect(),
            y: (0..nt).map(|j| spec.temp(j as f64)).collect(),
            chi2: self.bank.iter().map(|m| m.as_ref().map_or(f64::INFINITY, &chi2)).collect(),
            derived: self.bank.iter().map(|m| m.as_ref().map_or(f64::NAN, |m| m.fraction)).collect(),
        };
        let (ic, jc) = coarse.argmin();
        if !coarse.at(ic, jc).is_finite() {
            return Err(Error::numerical("grid_fit_profile", "no grid model could be evaluated"));
        }
        let on_boundary = ic == 0 || jc == 0 || ic + 1 == nn || jc + 1 == nt;

        // one zoom pass over the neighbouring coarse cells
        let z = spec.zoom as f64;
        let (i_lo, i_hi) = (ic.saturating_sub(1) as f64, (ic + 1).min(nn - 1) as f64);
        let (j_lo, j_hi) = (jc.saturating_sub(1) as f64, (jc + 1).min(nt - 1) as f64);
        let fx = ((i_hi - i_lo) * z) as usize + 1;
        let fy = ((j_hi - j_lo) * z) as usize + 1;
        let fine_ln: Vec<f64> = (0..fx).map(|a| spec.log_n(i_lo + a as f64 / z)).collect();
        let fine_t: Vec<f64> = (0..fy).map(|b| spec.temp(j_lo + b as f64 / z)).collect();
        let models = par::map_indexed(fx * fy, |k| self.evaluate(fine_ln[k / fy].exp(), fine_t[k % fy]).ok());
        let fine = Chi2Surface {
            x: fine_ln.iter().map(|v| v.exp()).collect(),
            y: fine_t.clone(),
            chi2: models.iter().map(|m| m.as_ref().map_or(f64::INFINITY, &chi2)).collect(),
            derived: models.iter().map(|m| m.as_ref().map_or(f64::NAN, |m| m.fraction)).collect(),
        };
        let (a, b) = fine.argmin();
        let mut best = (fine_ln[a].exp(), fine_t[b], fine.at(a, b), fine.derived[a * fy + b]);

        // sub-cell minimum from a quadratic through the 3x3 neighbourhood
        if a > 0 && b > 0 && a + 1 < fx && b + 1 < fy {
            if let Some((da, db)) = quadratic_vertex(|p, q| fine.at((a as i64 + p) as usize, (b as i64 + q) as usize)) {
                let ln_n = fine_ln[a] + da * (fine_ln[a + 1] - fine_ln[a]);
                let t = fine_t[b] + db * (fine_t[b + 1] - fine_t[b]);
                if let Ok(m) = self.evaluate(ln_n.exp(), t) {
                    let c = chi2(&m);
                    if c <= best.2 {
                        best = (ln_n.exp(), t, c, m.fraction);
                    }
                }
            }
        }

        let polished = self.polish(&data, best);
        let local = polished.as_ref().and_then(|p| {
            best = (p.ln_n.exp(), p.ln_t.exp(), p.chi2, p.fraction);
            self.local_surface(p, chi2)
        });

        let (surface, mut iv) = match local {
            Some(s) => {
                let iv = confidence_bounds(&s, best.2.min(s.min()))?;
                (s, iv)
            }
            None => {
                let iv = confidence_bounds(&fine, best.2.min(fine.min()))?;
                (fine, iv)
            }
        };
        let mut open = iv.open;
        if open {
            // region extends past the sampled window; fall back to the coarse surface
            let coarse_iv = confidence_bounds(&coarse, coarse.min())?;
            iv.x = (iv.x.0.min(coarse_iv.x.0), iv.x.1.max(coarse_iv.x.1));
            iv.y = (iv.y.0.min(coarse_iv.y.0), iv.y.1.max(coarse_iv.y.1));
            iv.derived = (iv.derived.0.min(coarse_iv.derived.0), iv.derived.1.max(coarse_iv.derived.1));
            open = coarse_iv.open;
        }
        let contain = |r: (f64, f64), v: f64| (r.0.min(v), r.1.max(v));
        let fraction = if low_signal { 0.0 } else { best.3 };
        let result = GridFitResult {
            best_n: best.0,
            best_t: best.1,
            fraction,
            chi2_min: best.2.max(0.0),
            ci_n: contain(iv.x, best.0),
            ci_t: contain(iv.y, best.1),
            ci_fraction: contain(iv.derived, fraction),
            on_boundary,
            open_interval: open,
            low_signal,
            bins_used: data.len(),
            sigma_model: SIGMA_MODEL.to_string(),
        };
        Ok((result, surface))
    }
}

struct Polished {
    ln_n: f64,
    ln_t: f64,
    chi2: f64,
    fraction: f64,
    /// Curvature-based one-sigma widths in (ln N, ln T).
    sd: [f64; 2],
}

impl GridFitter {
    /// Levenberg-Marquardt refinement in (ln N, ln T) from the grid minimum.
    fn polish(&self, data: &[(f64, f64, usize)], start: (f64, f64, f64, f64)) -> Option<Polished> {
        let spec = &self.spec;
        let lo = [spec.n_min.ln(), spec.t_min.ln()];
        let hi = [spec.n_max.ln(), spec.t_max.ln()];
        let residuals = |p: [f64; 2]| -> Option<(Vec<f64>, f64)> {
            let m = self.evaluate(p[0].exp(), p[1].exp()).ok()?;
            let r = data.iter().map(|&(y, w, k)| (m.values[k] - y) * w).collect();
            Some((r, m.fraction))
        };
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let normal = |p: [f64; 2], r: &[f64]| -> Option<(Matrix2<f64>, Vector2<f64>)> {
            const H: f64 = 1e-5;
            let mut jac = [vec![0.0; r.len()], vec![0.0; r.len()]];
            for (d, col) in jac.iter_mut().enumerate() {
                let mut q = p;
                q[d] += if q[d] + H <= hi[d] { H } else { -H };
                let step = q[d] - p[d];
                let (rq, _) = residuals(q)?;
                for (c, (a, b)) in col.iter_mut().zip(rq.iter().zip(r)) {
                    *c = (a - b) / step;
                }
            }
            let jtj = Matrix2::new(
                dot(&jac[0], &jac[0]),
                dot(&jac[0], &jac[1]),
                dot(&jac[1], &jac[0]),
                dot(&jac[1], &jac[1]),
            );
            Some((jtj, Vector2::new(dot(&jac[0], r), dot(&jac[1], r))))
        };
        let mut p = [start.0.ln(), start.1.ln()];
        let (mut r, mut frac) = residuals(p)?;
        let mut cost = dot(&r, &r);
        let mut lambda = 1e-3;
        for _ in 0..40 {
            let (jtj, g) = normal(p, &r)?;
            let mut improved = false;
            while lambda < 1e8 {
                let mut a = jtj;
                a[(0, 0)] *= 1.0 + lambda;
                a[(1, 1)] *= 1.0 + lambda;
                let Some(inv) = a.try_inverse() else {
                    lambda *= 10.0;
                    continue;
                };
                let delta = inv * -g;
                let q = [(p[0] + delta[0]).clamp(lo[0], hi[0]), (p[1] + delta[1]).clamp(lo[1], hi[1])];
                if let Some((rq, fq)) = residuals(q) {
                    let cq = dot(&rq, &rq);
                    if cq < cost {
                        let gain = cost - cq;
                        (p, r, frac, cost) = (q, rq, fq, cq);
                        lambda = (lambda * 0.1).max(1e-9);
                        improved = gain > 1e-12 * cost.max(1e-300);
                        break;
                    }
                }
                lambda *= 10.0;
            }
            if !improved {
                break;
            }
        }
        if !(cost < start.2) {
            return None;
        }
        let cov = normal(p, &r).and_then(|(jtj, _)| jtj.try_inverse());
        let sd = cov.map_or([f64::NAN; 2], |c| [c[(0, 0)].sqrt(), c[(1, 1)].sqrt()]);
        Some(Polished { ln_n: p[0], ln_t: p[1], chi2: cost, fraction: frac, sd })
    }

    /// chi^2 on a small (ln N, ln T) lattice spanning +-3 sigma around the
    /// polished minimum, with the minimum itself at the centre node.
    fn local_surface(&self, best: &Polished, chi2: impl Fn(&Model) -> f64 + Sync) -> Option<Chi2Surface> {
        const HALF: usize = 4;
        let spec = &self.spec;
        let widths: Vec<f64> = best.sd.iter().map(|s| 3.0 * s).collect();
        if widths.iter().any(|w| !w.is_finite() || *w <= 0.0) {
            return None;
        }
        let axis = |c: f64, w: f64, lo: f64, hi: f64| -> Vec<f64> {
            (0..=2 * HALF)
                .map(|k| c + w * (k as f64 - HALF as f64) / HALF as f64)
                .filter(|v| *v >= lo && *v <= hi)
                .collect()
        };
        let ln_n = axis(best.ln_n, widths[0], spec.n_min.ln(), spec.n_max.ln());
        let ln_t = axis(best.ln_t, widths[1], spec.t_min.ln(), spec.t_max.ln());
        let ny = ln_t.len();
        let models = par::map_indexed(ln_n.len() * ny, |k| self.evaluate(ln_n[k / ny].exp(), ln_t[k % ny].exp()).ok());
        Some(Chi2Surface {
            x: ln_n.iter().map(|v| v.exp()).collect(),
            y: ln_t.iter().map(|v| v.exp()).collect(),
            chi2: models.iter().map(|m| m.as_ref().map_or(f64::INFINITY, &chi2)).collect(),
            derived: models.iter().map(|m| m.as_ref().map_or(f64::NAN, |m| m.fraction)).collect(),
        })
    }
}

/// Stationary point of the least-squares quadratic through a 3x3 stencil,
/// in stencil units, if it is a minimum inside the stencil.
fn quadratic_vertex(f: impl Fn(i64, i64) -> f64) -> Option<(f64, f64)> {
    let mut ata = SMatrix::<f64, 6, 6>::zeros();
    let mut atb = SVector::<f64, 6>::zeros();
    for p in -1..=1 {
        for q in -1..=1 {
            let v = f(p, q);
            if !v.is_finite() {
                return None;
            }
            let (x, y) = (p as f64, q as f64);
            let row = SVector::<f64, 6>::from([1.0, x, y, x * x, y * y, x * y]);
            ata += row * row.transpose();
            atb += row * v;
        }
    }
    let c = ata.lu().solve(&atb)?;
    let h = Matrix2::new(2.0 * c[3], c[5], c[5], 2.0 * c[4]);
    if !(h[(0, 0)] > 0.0 && h.determinant() > 0.0) {
        return None;
    }
    let v = h.try_inverse()? * -Vector2::new(c[1], c[2]);
    (v[0].abs() <= 1.0 && v[1].abs() <= 1.0).then_some((v[0], v[1]))
}

/// One-shot fit; builds a model bank for the profile's own bin geometry.
pub fn grid_fit_profile(profile: &RadialProfile, model: &ModelSpec, spec: &GridSpec) -> Result<GridFitResult> {
    GridFitter::new(*model, *spec, profile)?.fit(profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(mean: Vec<f64>, std: Vec<f64>, count: Vec<usize>) -> RadialProfile {
        let radius = (0..mean.len()).map(|i| i as f64).collect();
        RadialProfile { radius, mean, std, count, geometry: None }
    }

    #[test]
    fn chi_square_identity_and_offsets() {
        let d = profile(vec![1.0, 2.0, 3.0, 4.0], vec![0.2, 0.2, 0.0, 0.4], vec![4, 4, 4, 4]);
        assert_eq!(chi_square(&d, &d).unwrap(), 0.0);
        // sigma per bin: 0.1, 0.1, floor, 0.2
        let sig = [0.1, 0.1, SIGMA_FLOOR, 0.2];
        let mut m = d.clone();
        m.mean[0] += sig[0];
        m.mean[2] -= sig[2];
        m.mean[3] += sig[3];
        assert!((chi_square(&d, &m).unwrap() - 3.0).abs() < 1e-9);
        let mut wrong = d.clone();
        wrong.radius[1] = 1.5;
        assert!(matches!(chi_square(&d, &wrong), Err(Error::Usage(_))));
    }

    #[test]
    fn quadratic_vertex_exact_for_quadratics() {
        let f = |p: i64, q: i64| {
            let (x, y) = (p as f64 - 0.3, q as f64 + 0.45);
            2.0 * x * x + y * y + 0.5 * x * y + 7.0
        };
        let (a, b) = quadratic_vertex(f).unwrap();
        assert!((a - 0.3).abs() < 1e-12 && (b + 0.45).abs() < 1e-12);
        assert!(quadratic_vertex(|p, _| -(p as f64).powi(2)).is_none());
    }
}
