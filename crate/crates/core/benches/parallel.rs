use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dbprobe::fitting::{GridFitter, GridSpec, ModelSpec};
use dbprobe::imaging::{azimuthal_average, column_density, faraday_angle_map, AverageOptions};
use dbprobe::par;
use dbprobe::physics::{semi_ideal_profile, CloudState};
use dbprobe::simulator::{simulate_campaign, CampaignConfig, Environment};

fn campaign(c: &mut Criterion) {
    let env = Environment::default();
    let cfg = CampaignConfig::default();
    let mut g = c.benchmark_group("campaign_84x9");
    g.sample_size(20);
    g.bench_function(BenchmarkId::new("pool", "default"), |b| b.iter(|| simulate_campaign(&cfg, &env).unwrap()));
    g.bench_function(BenchmarkId::new("pool", "sequential"), |b| {
        b.iter(|| par::run_sequential(|| simulate_campaign(&cfg, &env).unwrap()))
    });
    g.finish();
}

fn model_bank(c: &mut Criterion) {
    let env = Environment::default();
    let trap = env.trap_at(700.0).unwrap();
    let profile =
        semi_ideal_profile(&CloudState::new(1e6, 300e-9, trap).unwrap(), &env.constants, &env.profile).unwrap();
    let img = faraday_angle_map(&column_density(&profile, env.axis, &env.geometry).unwrap(), &env.probe).unwrap();
    let reference = azimuthal_average(&img, &AverageOptions::default()).unwrap();
    let model = ModelSpec {
        constants: env.constants,
        trap,
        axis: env.axis,
        rotation_coefficient: env.probe.rotation_coefficient,
        profile: env.profile,
    };
    let spec = GridSpec { n_points: 24, t_points: 24, ..Default::default() };
    let mut g = c.benchmark_group("grid_bank_24x24");
    g.sample_size(10);
    g.bench_function(BenchmarkId::new("pool", "default"), |b| {
        b.iter(|| GridFitter::new(model, spec, &reference).unwrap())
    });
    g.bench_function(BenchmarkId::new("pool", "sequential"), |b| {
        b.iter(|| par::run_sequential(|| GridFitter::new(model, spec, &reference).unwrap()))
    });
    g.finish();
}

criterion_group!(benches, campaign, model_bank);
criterion_main!(benches);
