use bipartite_core::boundary::boundary_matching_cost;
use bipartite_core::geometry::{BoxRegion, PointCloud};
use bipartite_core::graph::{tsp_exact_dp, tsp_heuristic};
use bipartite_core::matching::{m_p_cost, CostParams};
use bipartite_core::sampling::{stream_rng, Lane, MeasureSampler, MeasureSpec};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;

fn cloud(stream: u64, n: usize, d: usize) -> PointCloud {
    let mut rng = stream_rng(7, Lane::Aux, stream);
    PointCloud::from_flat(d, (0..n * d).map(|_| rng.gen::<f64>()).collect()).unwrap()
}

fn matching(c: &mut Criterion) {
    let params = CostParams::with_p(1.0).unwrap();
    let mut group = c.benchmark_group("m_p_cost");
    for n in [50usize, 200, 800] {
        let (x, y) = (cloud(1, n, 3), cloud(2, n, 3));
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| m_p_cost(black_box(&x), black_box(&y), &params).unwrap())
        });
    }
    let (x, y) = (cloud(3, 400, 3), cloud(4, 360, 3));
    group.bench_function("rectangular_400x360", |b| b.iter(|| m_p_cost(&x, &y, &params).unwrap()));
    group.finish();
}

fn boundary(c: &mut Criterion) {
    let params = CostParams::new(1.0, 0.05).unwrap();
    let s = BoxRegion::unit(3);
    let (x, y) = (cloud(5, 200, 3), cloud(6, 180, 3));
    c.bench_function("boundary_matching_cost/200x180", |b| {
        b.iter(|| boundary_matching_cost(&x, &y, &params, &s).unwrap())
    });
}

fn tours(c: &mut Criterion) {
    let params = CostParams::with_p(1.0).unwrap();
    let (x, y) = (cloud(7, 8, 2), cloud(8, 8, 2));
    c.bench_function("tsp_exact_dp/8", |b| b.iter(|| tsp_exact_dp(&x, &y, &params).unwrap()));
    let (x, y) = (cloud(9, 100, 2), cloud(10, 100, 2));
    c.bench_function("tsp_heuristic/100", |b| b.iter(|| tsp_heuristic(&x, &y, &params).unwrap()));
}

fn sampling(c: &mut Criterion) {
    let sampler = MeasureSampler::new(&MeasureSpec::unit_cube(3)).unwrap();
    c.bench_function("poisson_pair/10000", |b| {
        let mut t = 0u64;
        b.iter(|| {
            t += 1;
            sampler.sample_pair(10_000.0, true, 1, t).unwrap()
        })
    });
}

criterion_group!(benches, matching, boundary, tours, sampling);
criterion_main!(benches);
