use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tapkit_core::nn::{conv_backward, conv_forward, maxpool_forward, LayerGrads};
use tapkit_core::{LayerParams, RngStream, Tensor};

fn conv(c: &mut Criterion) {
    let mut group = c.benchmark_group("conv3x3");
    // Element crop, first screen layer, and a deeper screen layer.
    for (h, w, cin, cout) in [(32, 32, 3, 8), (300, 168, 3, 8), (75, 42, 8, 8)] {
        let mut rng = RngStream::new(1);
        let input = Tensor::<f32>::uniform(&[h, w, cin], 1.0, &mut rng);
        let params = LayerParams::<f32>::conv3x3(cin, cout, &mut rng);
        let grad_out = Tensor::<f32>::uniform(&[h, w, cout], 1.0, &mut rng);
        let id = format!("{h}x{w}x{cin}->{cout}");
        group.bench_with_input(BenchmarkId::new("forward", &id), &input, |b, x| {
            b.iter(|| conv_forward(black_box(x), &params).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("backward", &id), &input, |b, x| {
            let mut grads = LayerGrads::zeros_like(&params);
            b.iter(|| conv_backward(black_box(x), &params, &grad_out, &mut grads, true).unwrap())
        });
    }
    group.finish();
}

fn pool(c: &mut Criterion) {
    let input = Tensor::<f32>::uniform(&[300, 168, 8], 1.0, &mut RngStream::new(2));
    c.bench_function("maxpool 300x168x8", |b| b.iter(|| maxpool_forward(black_box(&input)).unwrap()));
}

criterion_group!(benches, conv, pool);
criterion_main!(benches);
