use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use eleatt::bptt::loss_and_grad;
use eleatt::cells::block_forward;
use eleatt::numerics::Tensor2;
use eleatt::{evaluate, CellKind, CellParams, GateActivation, RngStream, StepState};
use eleatt_bench::{task_batch, task_network};

fn matmul(c: &mut Criterion) {
    let mut rng = RngStream::new(1);
    let mut g = c.benchmark_group("matmul");
    for n in [16, 64, 128] {
        let a = rng.uniform(-1.0, 1.0, n, n).unwrap();
        let b = rng.uniform(-1.0, 1.0, n, 32).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| Tensor2::matmul(black_box(&a), black_box(&b)).unwrap())
        });
    }
    g.finish();
}

fn block_step(c: &mut Criterion) {
    let (d, n, batch) = (75, 100, 32);
    let mut rng = RngStream::new(2);
    let x = rng.uniform(-1.0, 1.0, d, batch).unwrap();
    let mut g = c.benchmark_group("block_step");
    for kind in CellKind::ALL {
        for gated in [false, true] {
            let gate = gated.then_some(GateActivation::Sigmoid);
            let p = CellParams::init(kind, d, n, gate, &mut rng).unwrap();
            let s = StepState::zeros(kind, n, batch);
            let id = format!("{}{kind}", if gated { "eleatt-" } else { "" });
            g.bench_function(id, |bench| bench.iter(|| block_forward(black_box(&x), &s, &p).unwrap()));
        }
    }
    g.finish();
}

fn bptt(c: &mut Criterion) {
    let batch = task_batch(32);
    let mut g = c.benchmark_group("loss_and_grad");
    g.sample_size(20);
    for gated in [false, true] {
        let net = task_network(CellKind::Gru, 16, gated);
        let id = if gated { "eleatt-gru" } else { "gru" };
        g.bench_function(id, |bench| bench.iter(|| loss_and_grad(&net, black_box(&batch), None).unwrap()));
    }
    g.finish();
}

fn inference(c: &mut Criterion) {
    let batch = task_batch(256);
    let net = task_network(CellKind::Gru, 16, true);
    c.bench_function("evaluate/eleatt-gru/256", |bench| {
        bench.iter(|| evaluate(&net, black_box(&batch)).unwrap())
    });
}

criterion_group!(benches, matmul, block_step, bptt, inference);
criterion_main!(benches);
