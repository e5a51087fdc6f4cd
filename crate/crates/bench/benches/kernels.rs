use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use iscc_core::control::{
    ekf_predict, ekf_update, fuse_shared_measurements, replan_with_reuse, rrt_star, Environment3d, EquivalentSphere,
    KinematicTrack, Obstacle, RrtSettings,
};
use iscc_core::network::{run_discovery, routes_from_adjacency, NetworkScenario, ProtocolConfig, ProtocolKind};
use iscc_core::sensing::{
    apply_mask, fft_range_baseline, omp_range_baseline, recover_blank_band, synthesize_echo, RecoverySettings,
    SpectrumMask, TargetSet, WaveformConfig,
};
use iscc_core::Vec3;
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sensing(c: &mut Criterion) {
    let cfg = WaveformConfig::default_experiment();
    let mask = SpectrumMask::default_experiment();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let targets = TargetSet::random(3, 200.0, 1000.0, 5.0, &cfg, &mut rng).unwrap();
    let snap = apply_mask(&synthesize_echo(&targets, &cfg, Some(20.0), 3).unwrap(), &mask).unwrap();
    let mut g = c.benchmark_group("sensing");
    g.bench_function("recover_blank_band/512", |b| {
        b.iter(|| recover_blank_band(&snap, &RecoverySettings::new(3)).unwrap())
    });
    g.bench_function("fft_baseline/512", |b| b.iter(|| fft_range_baseline(&snap, &cfg, 8, 3)));
    g.bench_function("omp_baseline/512", |b| b.iter(|| omp_range_baseline(&snap, &cfg, 0.5, 3).unwrap()));
    g.finish();
}

fn network(c: &mut Criterion) {
    let scenario = NetworkScenario { node_count: 40, duration: 5.0, warmup: 1.0, ..Default::default() };
    let st = ProtocolConfig::new("st", ProtocolKind::SensingTriggered).unwrap();
    let fb = ProtocolConfig::new("fb", ProtocolKind::FixedBeacon { interval: 0.25 }).unwrap();
    let mut g = c.benchmark_group("network");
    g.sample_size(10);
    g.bench_function("discovery/st/40x5s", |b| b.iter(|| run_discovery(&st, &scenario, 1).unwrap()));
    g.bench_function("discovery/fb/40x5s", |b| b.iter(|| run_discovery(&fb, &scenario, 1).unwrap()));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 80;
    let mut adj = vec![vec![false; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let linked = rng.random_bool(0.08);
            adj[i][j] = linked;
            adj[j][i] = linked;
        }
    }
    g.bench_function("routes_from_adjacency/80", |b| b.iter(|| routes_from_adjacency(&adj)));
    g.finish();
}

fn control(c: &mut Criterion) {
    let bounds = Vec3::new(300.0, 300.0, 100.0);
    let start = Vec3::new(30.0, 150.0, 50.0);
    let goal = Vec3::new(270.0, 150.0, 50.0);
    let settings = RrtSettings::default();
    let empty = Environment3d::empty(bounds).unwrap();
    let blocked = Environment3d::new(
        bounds,
        vec![Obstacle {
            sphere: EquivalentSphere::new(Vec3::new(150.0, 150.0, 50.0), 30.0, 1.0).unwrap(),
            velocity: Vec3::zeros(),
        }],
        1.0,
    )
    .unwrap();
    let tree = rrt_star(&empty, start, goal, &settings, 7).unwrap().tree;
    let mut g = c.benchmark_group("control");
    g.sample_size(20);
    g.bench_function("rrt_star/1000", |b| b.iter(|| rrt_star(&blocked, start, goal, &settings, 7).unwrap()));
    g.bench_function("replan_with_reuse/1000", |b| {
        b.iter(|| replan_with_reuse(&tree, &blocked, start, goal, &settings, 7).unwrap())
    });
    let track = KinematicTrack::isotropic(Vec3::zeros(), Vec3::new(5.0, 0.0, 0.0), 1.0, 1.0, 0.0).unwrap();
    let r = Matrix3::identity();
    g.bench_function("ekf_predict_update", |b| {
        b.iter_batched(
            || track.clone(),
            |t| {
                let p = ekf_predict(&t, 0.05, 0.05).unwrap();
                ekf_update(&p, Vec3::new(0.3, 0.0, 0.0), &r).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
    let obs: Vec<(Vec3, Matrix3<f64>)> = (0..4).map(|k| (Vec3::new(k as f64, 0.0, 0.0), r * (1.0 + k as f64))).collect();
    g.bench_function("fuse_shared_measurements/4", |b| b.iter(|| fuse_shared_measurements(&obs).unwrap()));
    g.finish();
}

criterion_group!(benches, sensing, network, control);
criterion_main!(benches);
