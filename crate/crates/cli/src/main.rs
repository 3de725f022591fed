mod config;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use dbprobe::analysis::{
    bin_by_benchmark, binned_critical_curve, convolution_bias, model_comparison, nrf_by_setpoint, read_records,
    shot_noise_study, write_records, BenchmarkBin, ExperimentRecord, ImagingSetup,
};
use dbprobe::fitting::{critical_power, growth_fit, GridFitter, GrowthPoint};
use dbprobe::imaging::{
    azimuthal_average, column_density, detect_dark_field, estimate_angles, faraday_angle_map, AngleImage,
    AverageOptions, ImageKind, RadialProfile,
};
use dbprobe::physics::{semi_ideal_profile, CloudState};
use dbprobe::simulator::{simulate_campaign, simulate_dimple_cycles};
use dbprobe::{rng, Error};
use serde::Serialize;
use serde_json::{json, Value};

use config::GlobalConfig;

#[derive(Parser)]
#[command(name = "dbprobe", version, about = "Dispersive benchmark simulation and analysis")]
struct Cli {
    /// JSON configuration (schema dbprobe.config.v1). Defaults apply to omitted keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize an angle image and a photon-count image of one cloud.
    Synth {
        /// Atom number.
        #[arg(long)]
        n: f64,
        #[arg(long = "t-nk")]
        t_nk: f64,
        /// Trap power, mW. Defaults to the reference power.
        #[arg(long)]
        power: Option<f64>,
        /// Mean detected photons on the peak pixel; sets the pulse duration.
        #[arg(long)]
        photons: Option<f64>,
        #[arg(long = "pulse-us")]
        pulse_us: Option<f64>,
    },
    /// Fit N and T to an FGRID image or a radial-profile CSV.
    Fit {
        input: PathBuf,
        #[arg(long)]
        power: Option<f64>,
        /// Pulse duration used to record a photon image.
        #[arg(long = "pulse-us")]
        pulse_us: Option<f64>,
    },
    /// Simulate a measurement campaign.
    Campaign,
    /// Noise reduction factor per setpoint and growth curves of two PSD groups.
    Nrf {
        /// Records CSV; simulated from the config when omitted.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Binned critical curve, pooled point and convolution shift.
    Curve {
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Fitted condensate fraction against photon number.
    Shotnoise,
    /// Dimple cycling trace with phase labels.
    Dimple {
        #[arg(long)]
        pulses: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let validation = e.chain().any(|c| c.downcast_ref::<Error>().is_some_and(Error::is_validation));
            ExitCode::from(if validation { 2 } else { 1 })
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let base = match &cli.config {
        Some(p) => GlobalConfig::load(p)?,
        None => GlobalConfig::default(),
    };
    let mut cfg = base.resolve(cli.seed, cli.out.clone())?;
    match cli.command {
        Command::Synth { n, t_nk, power, photons, pulse_us } => {
            if let Some(p) = pulse_us {
                cfg.environment.probe.pulse_duration = p;
            }
            synth(&mut cfg, n, t_nk * 1e-9, power, photons).context("synth")
        }
        Command::Fit { input, power, pulse_us } => {
            if let Some(p) = pulse_us {
                cfg.environment.probe.pulse_duration = p;
            }
            fit(&cfg, &input, power).context("fit")
        }
        Command::Campaign => campaign(&cfg).context("campaign"),
        Command::Nrf { records } => nrf(&cfg, records.as_deref()).context("nrf"),
        Command::Curve { records } => curve(&cfg, records.as_deref()).context("curve"),
        Command::Shotnoise => shotnoise(&cfg).context("shotnoise"),
        Command::Dimple { pulses } => {
            if let Some(p) = pulses {
                cfg.dimple.pulses_per_cycle = p;
            }
            cfg.validate()?;
            dimple(&cfg).context("dimple")
        }
    }
}

fn create(cfg: &GlobalConfig, name: &str) -> dbprobe::Result<(PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::Io { path: cfg.out_dir.clone(), source: e })?;
    let path = cfg.out_dir.join(name);
    let f = File::create(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
    Ok((path, BufWriter::new(f)))
}

/// Writes `<command>.json` holding the resolved config, output files and results.
fn manifest(cfg: &GlobalConfig, command: &str, files: &[&Path], results: Value) -> anyhow::Result<()> {
    let (path, w) = create(cfg, &format!("{command}.json"))?;
    let doc = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.seed,
        "config": cfg,
        "files": files.iter().map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned())).collect::<Vec<_>>(),
        "results": results,
    });
    serde_json::to_writer_pretty(w, &doc).map_err(Error::from)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_rows<T: Serialize>(cfg: &GlobalConfig, name: &str, rows: &[T]) -> anyhow::Result<PathBuf> {
    let (path, w) = create(cfg, name)?;
    let mut csv = csv::Writer::from_writer(w);
    for r in rows {
        csv.serialize(r).map_err(Error::from)?;
    }
    csv.flush().map_err(|e| Error::Io { path: path.clone(), source: e })?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn imaging_setup(cfg: &GlobalConfig, power: f64) -> dbprobe::Result<ImagingSetup> {
    let env = &cfg.environment;
    Ok(ImagingSetup {
        constants: env.constants,
        trap: env.trap_at(power)?,
        probe: env.probe,
        geometry: env.geometry,
        profile: env.profile,
        grid: cfg.grid,
        axis: env.axis,
    })
}

fn synth(cfg: &mut GlobalConfig, n: f64, t: f64, power: Option<f64>, photons: Option<f64>) -> anyhow::Result<()> {
    let power = power.unwrap_or(cfg.environment.reference_power);
    let setup = imaging_setup(cfg, power)?;
    let state = CloudState::new(n, t, setup.trap)?;
    let profile = semi_ideal_profile(&state, &setup.constants, &setup.profile)?;
    let angles = faraday_angle_map(&column_density(&profile, setup.axis, &setup.geometry)?, &setup.probe)?;
    let peak = angles.max_value();
    if let Some(p) = photons {
        if !(p > 0.0) {
            return Err(Error::Usage("--photons must be > 0".into()).into());
        }
        cfg.environment.probe.pulse_duration = setup.probe.duration_for_photons(p, peak, setup.geometry.pixel_size);
    }
    let probe = cfg.environment.probe;
    let counts = detect_dark_field(&angles, &probe, rng::derive_seed(cfg.seed, rng::stream::SYNTH, 0))?;
    let angle_path = cfg.out_dir.join("angles.fgrid");
    let photon_path = cfg.out_dir.join("photons.fgrid");
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::Io { path: cfg.out_dir.clone(), source: e })?;
    angles.write_fgrid(&angle_path)?;
    counts.write_fgrid(&photon_path)?;
    manifest(
        cfg,
        "synth",
        &[&angle_path, &photon_path],
        json!({
            "atom_number": n,
            "temperature_k": t,
            "power_mw": power,
            "condensate_fraction": profile.condensate_fraction,
            "peak_angle_rad": peak,
            "pulse_duration_us": probe.pulse_duration,
            "peak_photons": counts.max_value(),
        }),
    )
}

fn load_profile(cfg: &GlobalConfig, input: &Path) -> anyhow::Result<(RadialProfile, Option<ImageKind>)> {
    let is_csv = input.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let f = File::open(input).map_err(|e| Error::Io { path: input.into(), source: e })?;
        return Ok((RadialProfile::read_csv(f)?, None));
    }
    let img = AngleImage::read_fgrid(input)?;
    let kind = img.kind;
    let angles = match kind {
        ImageKind::Angle => img,
        ImageKind::Photons => estimate_angles(&img, &cfg.environment.probe)?,
    };
    Ok((azimuthal_average(&angles, &AverageOptions::default())?, Some(kind)))
}

fn fit(cfg: &GlobalConfig, input: &Path, power: Option<f64>) -> anyhow::Result<()> {
    let (profile, kind) = load_profile(cfg, input)?;
    let power = power.unwrap_or(cfg.environment.reference_power);
    let setup = imaging_setup(cfg, power)?;
    let fitter = GridFitter::new(setup.model(), cfg.grid, &profile)?;
    let result = fitter.fit(&profile)?;
    let profile_path = write_profile(cfg, &profile)?;
    manifest(
        cfg,
        "fit",
        &[&profile_path],
        json!({ "input": input, "input_kind": kind, "power_mw": power, "fit": result }),
    )
}

fn write_profile(cfg: &GlobalConfig, profile: &RadialProfile) -> anyhow::Result<PathBuf> {
    let (path, w) = create(cfg, "profile.csv")?;
    profile.write_csv(w)?;
    Ok(path)
}

fn records_for(cfg: &GlobalConfig, path: Option<&Path>) -> anyhow::Result<Vec<ExperimentRecord>> {
    match path {
        Some(p) => {
            let f = File::open(p).map_err(|e| Error::Io { path: p.into(), source: e })?;
            Ok(read_records(f)?)
        }
        None => Ok(simulate_campaign(&cfg.campaign, &cfg.environment)?),
    }
}

fn campaign(cfg: &GlobalConfig) -> anyhow::Result<()> {
    let records = simulate_campaign(&cfg.campaign, &cfg.environment)?;
    let (path, w) = create(cfg, "records.csv")?;
    write_records(&records, w)?;
    println!("wrote {}", path.display());
    let psd: Vec<f64> = records.iter().map(|r| r.psd_benchmark).collect();
    let lo = psd.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = psd.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    manifest(cfg, "campaign", &[&path], json!({ "records": records.len(), "psd_min": lo, "psd_max": hi }))
}

#[derive(Serialize)]
struct GroupRow {
    group: &'static str,
    mean_psd: f64,
    power_mw: f64,
    runs: usize,
    mean_fraction: f64,
    fit_fraction: f64,
}

/// Splits the runs at the median benchmark PSD and fits each half.
fn growth_groups(records: &[ExperimentRecord], threshold: f64) -> anyhow::Result<(Vec<GroupRow>, Value)> {
    let mut psd: Vec<f64> = records.iter().map(|r| r.psd_benchmark).collect();
    psd.sort_by(f64::total_cmp);
    let median = psd[psd.len() / 2];
    let mut rows = vec![];
    let mut fits = vec![];
    for (name, low) in [("low", true), ("high", false)] {
        let group: Vec<&ExperimentRecord> = records.iter().filter(|r| (r.psd_benchmark < median) == low).collect();
        if group.is_empty() {
            continue;
        }
        let points: Vec<GrowthPoint> =
            group.iter().map(|r| GrowthPoint::new(r.final_power, r.measured_fraction)).collect();
        let mean_psd = group.iter().map(|r| r.psd_benchmark).sum::<f64>() / group.len() as f64;
        let fit = growth_fit(&points)?;
        let pc = critical_power(&fit, threshold)?;
        let mut powers: Vec<f64> = group.iter().map(|r| r.final_power).collect();
        powers.sort_by(f64::total_cmp);
        powers.dedup();
        for p in powers {
            let at: Vec<f64> = group.iter().filter(|r| r.final_power == p).map(|r| r.measured_fraction).collect();
            rows.push(GroupRow {
                group: name,
                mean_psd,
                power_mw: p,
                runs: at.len(),
                mean_fraction: at.iter().sum::<f64>() / at.len() as f64,
                fit_fraction: fit.eval(p),
            });
        }
        fits.push(
            json!({ "group": name, "mean_psd": mean_psd, "records": group.len(), "fit": fit, "critical_power": pc }),
        );
    }
    Ok((rows, Value::Array(fits)))
}

fn nrf(cfg: &GlobalConfig, records: Option<&Path>) -> anyhow::Result<()> {
    let records = records_for(cfg, records)?;
    let table = nrf_by_setpoint(&records, cfg.curve.nrf_dof)?;
    let nrf_path = write_rows(cfg, "nrf.csv", &table)?;
    let (rows, fits) = growth_groups(&records, cfg.curve.options.threshold)?;
    let group_path = write_rows(cfg, "growth_groups.csv", &rows)?;
    manifest(cfg, "nrf", &[&nrf_path, &group_path], json!({ "nrf": table, "groups": fits }))
}

#[derive(Serialize)]
struct CurveRow {
    mean_psd: f64,
    psd_std_error: f64,
    psd_spread: f64,
    p_c_mw: f64,
    p_c_std_error: f64,
    curve_mw: f64,
    band_mw: f64,
    subsets: usize,
    records: usize,
}

fn curve(cfg: &GlobalConfig, records: Option<&Path>) -> anyhow::Result<()> {
    let records = records_for(cfg, records)?;
    let settings = &cfg.curve;
    let bins = match bin_by_benchmark(&records, settings.n_bins, settings.min_per_bin, settings.binning) {
        Ok(b) => b,
        Err(Error::Degenerate(msg)) => {
            log::warn!("{msg}; analysing as one bin");
            vec![BenchmarkBin::from_indices(&records, (0..records.len()).collect())]
        }
        Err(e) => return Err(e.into()),
    };
    let curve = binned_critical_curve(&records, &bins, &settings.options)?;
    let coefficients = curve.coefficients();
    let pooled_shift = convolution_bias(coefficients, curve.pooled.psd_spread)?;
    let within = (curve.bins.iter().map(|b| b.psd_spread.powi(2)).sum::<f64>() / curve.bins.len() as f64).sqrt();
    let bin_shift = convolution_bias(coefficients, within)?;
    let comparison = model_comparison(&curve.bins).ok();
    let rows: Vec<CurveRow> = curve
        .bins
        .iter()
        .map(|b| {
            let (v, s) = curve.band(b.mean_psd);
            CurveRow {
                mean_psd: b.mean_psd,
                psd_std_error: b.psd_std_error,
                psd_spread: b.psd_spread,
                p_c_mw: b.p_c,
                p_c_std_error: b.p_c_std_error,
                curve_mw: v,
                band_mw: s,
                subsets: b.subsets,
                records: b.records,
            }
        })
        .collect();
    let path = write_rows(cfg, "curve.csv", &rows)?;
    let at_pooled = curve.band(curve.pooled.mean_psd);
    manifest(
        cfg,
        "curve",
        &[&path],
        json!({
            "coefficients": coefficients,
            "c2_std_error": curve.c2_std_error(),
            "fit": curve.fit,
            "pooled": curve.pooled,
            "curve_at_pooled_psd": { "value": at_pooled.0, "std_error": at_pooled.1 },
            "pooled_shift": pooled_shift,
            "binned_shift": bin_shift,
            "model_comparison": comparison,
        }),
    )
}

fn shotnoise(cfg: &GlobalConfig) -> anyhow::Result<()> {
    let setup = imaging_setup(cfg, cfg.shotnoise_power)?;
    let rows = shot_noise_study(&cfg.shotnoise, &setup)?;
    let path = write_rows(cfg, "shotnoise.csv", &rows)?;
    manifest(cfg, "shotnoise", &[&path], json!({ "rows": rows }))
}

fn dimple(cfg: &GlobalConfig) -> anyhow::Result<()> {
    let reservoir = cfg.dimple.reservoir()?;
    let trace = simulate_dimple_cycles(
        &cfg.dimple,
        &reservoir,
        &cfg.environment.probe,
        &cfg.environment.constants,
        &cfg.environment.profile,
    )?;
    let (path, w) = create(cfg, "dimple.csv")?;
    trace.write_csv(w)?;
    println!("wrote {}", path.display());
    manifest(
        cfg,
        "dimple",
        &[&path],
        json!({
            "bec_cycles": trace.bec_cycles(),
            "peak_condensed": trace.peak_condensed(),
            "agreement_first_20": trace.agreement(0..20.min(cfg.dimple.cycles)),
            "notes": trace.notes,
        }),
    )
}
