use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use homview_core::association::hmf_association;
use homview_core::fhe::FheParams;
use homview_core::geometry::{estimate_homography_ransac_with, BBox, BoxProjectionMode, Homography, RansacParams};
use homview_core::pipeline::build_graph;
use homview_core::simulator::{generate_sequence, Scenario, ScenarioConfig};
use homview_core::Execution;
use std::hint::black_box;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn boxes(n: usize, shift: f64) -> Vec<BBox> {
    (0..n).map(|i| BBox::new((i % 20) as f64 * 48.0 + shift, (i / 20) as f64 * 48.0, 30.0, 22.0).unwrap()).collect()
}

fn bench_hmf(c: &mut Criterion) {
    let h = Homography::from_row_major([0.99, -0.05, 4.0, 0.05, 0.99, -3.0, 1e-5, 0.0, 1.0]).unwrap();
    let mut g = c.benchmark_group("hmf_cost_200x200");
    let (a, b) = (boxes(200, 0.0), boxes(200, 3.0));
    for (name, exec) in MODES {
        g.bench_function(name, |bch| {
            bch.iter(|| hmf_association(black_box(&a), &b, &h, BoxProjectionMode::Polygon, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_ransac(c: &mut Criterion) {
    let cfg = ScenarioConfig {
        scenario: Scenario::Mixed,
        frames: 12,
        correspondence_count: 500,
        correspondence_outlier_rate: 0.3,
        corr_intervals: vec![10],
        ..Default::default()
    };
    let bundle = generate_sequence(&cfg).unwrap();
    let corr = &bundle.correspondences[&(1, 11)];
    let params = RansacParams { confidence: 1.0, max_iters: 500, ..Default::default() };
    let mut g = c.benchmark_group("ransac_500pts");
    for (name, exec) in MODES {
        g.bench_function(name, |bch| {
            bch.iter(|| estimate_homography_ransac_with(black_box(corr), &params, exec).unwrap())
        });
    }
    g.finish();
}

fn bench_graph(c: &mut Criterion) {
    let cfg =
        ScenarioConfig { scenario: Scenario::Mixed, frames: 120, correspondence_count: 200, ..Default::default() };
    let bundle = generate_sequence(&cfg).unwrap();
    let corr = &bundle.correspondences;
    let mut g = c.benchmark_group("graph_build_120f");
    g.sample_size(20);
    for h in [1usize, 10] {
        let params = FheParams { interval: h, ..Default::default() };
        for (name, exec) in MODES {
            g.bench_with_input(BenchmarkId::new(name, h), &params, |bch, p| {
                bch.iter(|| build_graph(120, p, corr, exec).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, bench_hmf, bench_ransac, bench_graph);
criterion_main!(benches);
