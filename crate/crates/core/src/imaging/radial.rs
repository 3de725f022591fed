use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{AngleImage, ImageKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AverageOptions {
    /// Centre in pixel coordinates (col, row); smoothed argmax if unset.
    pub center: Option<(f64, f64)>,
    /// Bin width, um; one pixel if unset.
    pub bin_width: Option<f64>,
    /// Largest radius included, um; distance to the nearest image edge if unset.
    pub max_radius: Option<f64>,
}

/// How a profile's bins map onto pixels, so model images can be binned the
/// same way as the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinGeometry {
    pub pixel_size: f64,
    pub bin_width: f64,
    /// Sub-pixel part of the centre position, pixels, in [0, 1).
    pub center_frac: (f64, f64),
    pub max_radius: f64,
}

impl BinGeometry {
    fn bin_of(&self, r: f64) -> Option<usize> {
        (r <= self.max_radius * (1.0 + 1e-12)).then(|| (r / self.bin_width).round() as usize)
    }

    /// In-plane pixel offsets (x, y) in um from the centre, grouped by bin index.
    pub fn offsets_by_bin(&self) -> Vec<Vec<(f64, f64)>> {
        let p = self.pixel_size;
        let reach = (self.max_radius / p).ceil() as i64 + 1;
        let nbins = (self.max_radius / self.bin_width).round() as usize + 1;
        let mut bins = vec![Vec::new(); nbins];
        for m in -reach..=reach {
            for l in -reach..=reach {
                let x = (l as f64 - self.center_frac.0) * p;
                let y = (m as f64 - self.center_frac.1) * p;
                if let Some(k) = self.bin_of(x.hypot(y)) {
                    if k < nbins {
                        bins[k].push((x, y));
                    }
                }
            }
        }
        bins
    }
}

/// Azimuthally averaged signal versus radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    /// Nominal bin centres, um.
    pub radius: Vec<f64>,
    pub mean: Vec<f64>,
    /// Population standard deviation within each bin.
    pub std: Vec<f64>,
    pub count: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<BinGeometry>,
}

impl RadialProfile {
    pub fn len(&self) -> usize {
        self.radius.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radius.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.radius.len();
        if self.mean.len() != n || self.std.len() != n || self.count.len() != n {
            return Err(Error::Usage("radial profile columns differ in length".into()));
        }
        if self.radius.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Usage("radial bin centres must increase strictly".into()));
        }
        if self.count.contains(&0) || self.std.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::Usage("bins need count >= 1 and std >= 0".into()));
        }
        Ok(())
    }

    /// CSV columns `radius_um,mean,std,count`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["radius_um", "mean", "std", "count"])?;
        for i in 0..self.len() {
            w.write_record([
                self.radius[i].to_string(),
                self.mean[i].to_string(),
                self.std[i].to_string(),
                self.count[i].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            radius_um: f64,
            mean: f64,
            std: f64,
            count: usize,
        }
        let mut profile = RadialProfile { radius: vec![], mean: vec![], std: vec![], count: vec![], geometry: None };
        for row in csv::Reader::from_reader(input).deserialize::<Row>() {
            let row = row?;
            profile.radius.push(row.radius_um);
            profile.mean.push(row.mean);
            profile.std.push(row.std);
            profile.count.push(row.count);
        }
        profile.validate()?;
        Ok(profile)
    }
}

/// Argmax of the 3x3 box-smoothed image, (col, row). The middle pixel for a flat image.
fn smoothed_argmax(img: &AngleImage) -> (usize, usize) {
    let (h, w) = (img.height(), img.width());
    let lo = img.data.iter().cloned().fold(f64::INFINITY, f64::min);
    if img.max_value() <= lo {
        return ((w - 1) / 2, (h - 1) / 2);
    }
    let mut best = (0, 0);
    let mut best_val = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for r in 0..h {
        for c in 0..w {
            let (mut sum, mut n) = (0.0, 0);
            for rr in r.saturating_sub(1)..=(r + 1).min(h - 1) {
                for cc in c.saturating_sub(1)..=(c + 1).min(w - 1) {
                    sum += img.data[[rr, cc]];
                    n += 1;
                }
            }
            // raw value breaks ties between equal smoothed values
            let v = (sum / n as f64, img.data[[r, c]]);
            if v > best_val {
                best_val = v;
                best = (c, r);
            }
        }
    }
    best
}

/// Bins pixels by distance from the centre; empty bins are omitted.
pub fn azimuthal_average(img: &AngleImage, options: &AverageOptions) -> Result<RadialProfile> {
    if img.kind != ImageKind::Angle {
        return Err(Error::Usage("azimuthal_average expects an angle image".into()));
    }
    let (w, h) = (img.width() as f64, img.height() as f64);
    let (cx, cy) = match options.center {
        Some(c) => c,
        None => {
            let (c, r) = smoothed_argmax(img);
            (c as f64, r as f64)
        }
    };
    if !(cx >= 0.0 && cy >= 0.0 && cx <= w - 1.0 && cy <= h - 1.0) {
        return Err(Error::domain("azimuthal_average", format!("centre ({cx}, {cy}) outside the image")));
    }
    let p = img.pixel_size;
    let bin_width = options.bin_width.unwrap_or(p);
    if !(bin_width > 0.0) {
        return Err(Error::domain("azimuthal_average", "bin width must be > 0"));
    }
    let edge = cx.min(cy).min(w - 1.0 - cx).min(h - 1.0 - cy) * p;
    let max_radius = options.max_radius.unwrap_or(edge);
    let geometry =
        BinGeometry { pixel_size: p, bin_width, center_frac: (cx - cx.floor(), cy - cy.floor()), max_radius };

    let nbins = (max_radius / bin_width).round() as usize + 1;
    let mut sum = vec![0.0; nbins];
    let mut sum2 = vec![0.0; nbins];
    let mut count = vec![0usize; nbins];
    for ((r, c), v) in img.data.indexed_iter() {
        let d = ((c as f64 - cx) * p).hypot((r as f64 - cy) * p);
        if let Some(k) = geometry.bin_of(d) {
            if k < nbins {
                sum[k] += v;
                sum2[k] += v * v;
                count[k] += 1;
            }
        }
    }
    let mut out = RadialProfile { radius: vec![], mean: vec![], std: vec![], count: vec![], geometry: Some(geometry) };
    for k in 0..nbins {
        if count[k] == 0 {
            continue;
        }
        let n = count[k] as f64;
        let mean = sum[k] / n;
        out.radius.push(k as f64 * bin_width);
        out.mean.push(mean);
        out.std.push((sum2[k] / n - mean * mean).max(0.0).sqrt());
        out.count.push(count[k]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn angle(data: Array2<f64>) -> AngleImage {
        AngleImage::new(ImageKind::Angle, 1.0, data).unwrap()
    }

    #[test]
    fn constant_image() {
        let img = angle(Array2::from_elem((21, 21), 2.0));
        let p = azimuthal_average(&img, &AverageOptions { center: Some((10.0, 10.0)), ..Default::default() }).unwrap();
        assert!(p.len() >= 10);
        for i in 0..p.len() {
            assert!((p.mean[i] - 2.0).abs() < 1e-12);
            assert!(p.std[i] < 1e-7);
        }
        p.validate().unwrap();
    }

    #[test]
    fn single_bright_pixel() {
        let mut data = Array2::zeros((21, 21));
        data[[10, 10]] = 1.0;
        let p = azimuthal_average(&angle(data), &AverageOptions::default()).unwrap();
        assert_eq!(p.radius[0], 0.0);
        assert_eq!(p.count[0], 1);
        assert_eq!(p.mean[0], 1.0);
        assert!(p.mean[1..].iter().all(|&m| m == 0.0));
    }

    #[test]
    fn gaussian_profile_matches_within_half_bin_gradient() {
        let s = 10.0;
        let f = |r: f64| (-r * r / (2.0 * s * s)).exp();
        let data = Array2::from_shape_fn((81, 81), |(r, c)| f((c as f64 - 40.0).hypot(r as f64 - 40.0)));
        let img = angle(data);
        let p = azimuthal_average(&img, &AverageOptions::default()).unwrap();
        for i in 0..p.len() {
            let r = p.radius[i];
            let grad = (f(r - 0.5) - f(r + 0.5)).abs().max((f(r) - f((r - 0.5).max(0.0))).abs());
            assert!((p.mean[i] - f(r)).abs() <= grad + 1e-12, "r={r}: {} vs {}", p.mean[i], f(r));
            // pixelization-only spread
            assert!(p.std[i] < 0.02);
        }
    }

    #[test]
    fn smoothing_resists_single_hot_pixel() {
        let mut data = Array2::from_shape_fn((31, 31), |(r, c)| {
            let d = (c as f64 - 20.0).hypot(r as f64 - 12.0);
            (-d * d / 50.0).exp()
        });
        data[[2, 2]] = 3.0;
        let p = azimuthal_average(&angle(data), &AverageOptions::default()).unwrap();
        let g = p.geometry.unwrap();
        assert_eq!(g.center_frac, (0.0, 0.0));
        // centre at (20, 12): nearest edge is 10 pixels away
        assert_eq!(g.max_radius, 10.0);
    }

    #[test]
    fn offsets_reproduce_pixel_membership() {
        let img = angle(Array2::from_elem((40, 40), 1.0));
        let opts = AverageOptions { center: Some((19.0, 21.0)), ..Default::default() };
        let p = azimuthal_average(&img, &opts).unwrap();
        let bins = p.geometry.unwrap().offsets_by_bin();
        for (i, r) in p.radius.iter().enumerate() {
            assert_eq!(bins[r.round() as usize].len(), p.count[i]);
        }
    }

    #[test]
    fn errors() {
        let img = angle(Array2::zeros((5, 5)));
        assert!(azimuthal_average(&img, &AverageOptions { center: Some((7.0, 1.0)), ..Default::default() }).is_err());
        let photons = AngleImage::new(ImageKind::Photons, 1.0, Array2::zeros((5, 5))).unwrap();
        assert!(azimuthal_average(&photons, &AverageOptions::default()).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let img = angle(Array2::from_shape_fn((15, 15), |(r, c)| (r + c) as f64 * 0.01));
        let p = azimuthal_average(&img, &AverageOptions { center: Some((7.0, 7.0)), ..Default::default() }).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let back = RadialProfile::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.radius, p.radius);
        assert_eq!(back.count, p.count);
        assert!(back.geometry.is_none());
    }
}
