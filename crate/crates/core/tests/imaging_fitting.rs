use dbprobe::fitting::{GridFitter, GridSpec, ModelSpec};
use dbprobe::imaging::{
    azimuthal_average, column_density, detect_dark_field, estimate_angles, faraday_angle_map, AngleImage,
    AverageOptions, ImageGeometry, ImageKind, ProbeParams,
};
use dbprobe::physics::{semi_ideal_profile, Axis, CloudState, PhysicalConstants, ProfileOptions, TrapGeometry};
use dbprobe::Error;
use ndarray::Array2;
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn trap() -> TrapGeometry {
    TrapGeometry::from_hz(79.5, 79.5, 112.4).unwrap().at_power(700.0, 1100.0).unwrap()
}

fn model() -> ModelSpec {
    ModelSpec {
        constants: PhysicalConstants::default(),
        trap: trap(),
        axis: Axis::Z,
        rotation_coefficient: ProbeParams::default().rotation_coefficient,
        profile: ProfileOptions::default(),
    }
}

fn angle_image(n: f64, t: f64) -> AngleImage {
    let c = PhysicalConstants::default();
    let p = semi_ideal_profile(&CloudState::new(n, t, trap()).unwrap(), &c, &ProfileOptions::default()).unwrap();
    faraday_angle_map(&column_density(&p, Axis::Z, &ImageGeometry::default()).unwrap(), &ProbeParams::default())
        .unwrap()
}

/// Dispersion index test: sum (x - m)^2 / m over repeated draws is chi^2 with n - 1 dof.
#[test]
fn photon_counts_have_poisson_variance() {
    let samples = 10_000;
    let theta = 0.05;
    let img = AngleImage::new(ImageKind::Angle, 3.5, Array2::from_elem((4, 4), theta)).unwrap();
    let probe = ProbeParams { pulse_duration: 0.05, ..Default::default() };
    let mean_expected = probe.incident_photons(3.5) * (theta.sin().powi(2) + probe.polarizer_floor);
    let draws: Vec<Array2<f64>> = (0..samples).map(|s| detect_dark_field(&img, &probe, s).unwrap().data).collect();
    let chi = ChiSquared::new((samples - 1) as f64).unwrap();
    let (lo, hi) = (chi.inverse_cdf(0.005), chi.inverse_cdf(0.995));
    let mut rejected = 0;
    for px in 0..16 {
        let x: Vec<f64> = draws.iter().map(|d| d[(px / 4, px % 4)]).collect();
        let m = x.iter().sum::<f64>() / samples as f64;
        assert!((m / mean_expected - 1.0).abs() < 0.05, "mean {m} vs {mean_expected}");
        let stat: f64 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / m;
        if !(lo..=hi).contains(&stat) {
            rejected += 1;
        }
    }
    // 16 pixels at 1% significance
    assert!(rejected <= 2, "{rejected} pixels rejected");
}

#[test]
fn noiseless_round_trip_recovers_truth() {
    for (n, t) in [(1e6, 300e-9), (2e6, 150e-9), (5e5, 500e-9)] {
        let img = angle_image(n, t);
        let prof = azimuthal_average(&img, &AverageOptions::default()).unwrap();
        let fit = GridFitter::new(model(), GridSpec::default(), &prof).unwrap().fit(&prof).unwrap();
        assert!((fit.best_n / n - 1.0).abs() < 1e-3, "{fit:?}");
        assert!((fit.best_t / t - 1.0).abs() < 1e-3, "{fit:?}");
        assert!(fit.ci_n.0 <= n && n <= fit.ci_n.1 && fit.ci_t.0 <= t && t <= fit.ci_t.1);
        assert!(!fit.low_signal && !fit.on_boundary);
    }
}

#[test]
fn blank_image_is_low_signal_with_zero_fraction() {
    let img = AngleImage::new(ImageKind::Angle, 3.5, Array2::zeros((64, 64))).unwrap();
    let prof = azimuthal_average(&img, &AverageOptions::default()).unwrap();
    let fit = GridFitter::new(model(), GridSpec::default(), &prof).unwrap().fit(&prof).unwrap();
    assert!(fit.low_signal);
    assert_eq!(fit.fraction, 0.0);
}

#[test]
fn photon_pipeline_is_unbiased_at_high_flux() {
    let img = angle_image(3e6, 250e-9);
    let truth_prof = azimuthal_average(&img, &AverageOptions::default()).unwrap();
    let fitter = GridFitter::new(model(), GridSpec::default(), &truth_prof).unwrap();
    let truth = fitter.fit(&truth_prof).unwrap().fraction;
    let mut probe = ProbeParams::default();
    probe.pulse_duration = probe.duration_for_photons(1e5, img.max_value(), 3.5);
    let raw = detect_dark_field(&img, &probe, 9).unwrap();
    let est = estimate_angles(&raw, &probe).unwrap();
    let fit = fitter.fit(&azimuthal_average(&est, &AverageOptions::default()).unwrap()).unwrap();
    assert!((fit.fraction - truth).abs() < 0.02, "{} vs {truth}", fit.fraction);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn fgrid_round_trip(w in 1usize..12, h in 1usize..12, px in 0.5f64..10.0, seed in any::<u64>()) {
        let mut state = seed;
        let data = Array2::from_shape_fn((h, w), |_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 40) as f32 as f64 / 1024.0
        });
        let img = AngleImage::new(ImageKind::Photons, px, data).unwrap();
        let back = AngleImage::from_fgrid_bytes(&img.to_fgrid_bytes()).unwrap();
        prop_assert_eq!(back, img);
    }

    #[test]
    fn truncated_fgrid_reports_offset(cut in 0usize..40) {
        let img = AngleImage::new(ImageKind::Angle, 3.5, Array2::from_elem((2, 2), 0.1)).unwrap();
        let bytes = img.to_fgrid_bytes();
        let cut = cut.min(bytes.len() - 1);
        let is_format_error = matches!(AngleImage::from_fgrid_bytes(&bytes[..cut]), Err(Error::Format { .. }));
        prop_assert!(is_format_error);
    }

    #[test]
    fn estimate_inverts_noiseless_counts(theta in 0.0f64..1.2, incident in 10.0f64..1e6) {
        let probe = ProbeParams { pulse_duration: incident / (400.0 * 3.5 * 3.5), ..Default::default() };
        let counts = probe.incident_photons(3.5) * (theta.sin().powi(2) + probe.polarizer_floor);
        let raw = AngleImage::new(ImageKind::Photons, 3.5, Array2::from_elem((1, 1), counts)).unwrap();
        let est = estimate_angles(&raw, &probe).unwrap();
        prop_assert!((est.data[(0, 0)] - theta).abs() < 1e-6);
    }
}
