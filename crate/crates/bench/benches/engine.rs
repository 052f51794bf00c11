use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use momentstack::{
    enumerate_sp, enumerate_spr, gram_moments, stack, summarize, Calculus, ComplexMatrixBuffer,
    DiagramShape, ModelDims, MomentValues, PartitionIndex, SeededSampler, StackingScheme,
};
use std::hint::black_box;

fn example_moments() -> MomentValues {
    let singles: Vec<f64> = (1..=8)
        .map(|q| {
            [1.0f64, 0.25, 0.25, 0.0625]
                .iter()
                .map(|x| x.powi(q))
                .sum::<f64>()
                / 4.0
        })
        .collect();
    MomentValues::from_singles(&singles)
}

fn diagrams(c: &mut Criterion) {
    let shape = DiagramShape::for_partition(&PartitionIndex::single(4)).unwrap();
    c.bench_function("enumerate+summarize SP_4", |b| {
        b.iter(|| {
            enumerate_sp(&shape)
                .map(|pp| summarize(&shape, &pp).unwrap().sigma_count)
                .sum::<usize>()
        })
    });
    c.bench_function("enumerate SPR_6", |b| b.iter(|| enumerate_spr(3).count()));
}

fn formulas(c: &mut Criterion) {
    let dims = ModelDims::new(4, 4).unwrap();
    let parts = PartitionIndex::single(4);
    c.bench_function("forward_map (4) cold", |b| {
        b.iter_batched(
            Calculus::default,
            |calc| calc.forward_map(&parts, dims).unwrap(),
            BatchSize::SmallInput,
        )
    });
    let calc = Calculus::default();
    calc.forward_map(&parts, dims).unwrap();
    c.bench_function("stacked_estimator_coeffs (4) cached", |b| {
        let s = StackingScheme::new(5, 10).unwrap();
        b.iter(|| {
            calc.stacked_estimator_coeffs(black_box(&parts), dims, s)
                .unwrap()
        })
    });
    let values = example_moments();
    calc.stacked_variance(3, dims, StackingScheme::single(), &values)
        .unwrap();
    c.bench_function("stacked_variance p=3 L=50", |b| {
        let s = StackingScheme::new(5, 10).unwrap();
        b.iter(|| {
            calc.stacked_variance(3, dims, black_box(s), &values)
                .unwrap()
                .value
        })
    });
}

fn matrices(c: &mut Criterion) {
    let d = ComplexMatrixBuffer::from_diagonal(4, 4, &[2.0, 1.0, 1.0, 0.5]).unwrap();
    let s = StackingScheme::new(30, 30).unwrap();
    let obs: Vec<_> = (0..s.count())
        .map(|i| SeededSampler::new(1, i).observe_additive(&d, 1.0).unwrap())
        .collect();
    let compound = stack(&obs, s).unwrap();
    let parts = PartitionIndex::up_to_weight(3);
    c.bench_function("gram_moments 120x120", |b| {
        b.iter(|| gram_moments(black_box(&compound), 120.0, &parts))
    });
    c.bench_function("sample 900 observations", |b| {
        b.iter(|| {
            (0..900)
                .map(|i| SeededSampler::new(2, i).observe_additive(&d, 1.0).unwrap())
                .collect::<Vec<_>>()
        })
    });
}

criterion_group!(benches, diagrams, formulas, matrices);
criterion_main!(benches);
