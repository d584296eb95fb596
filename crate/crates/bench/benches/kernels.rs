use std::hint::black_box;

use chiamp::chi_formula::{chi_via_formula, decompose, AlphaSequence, AmplifierPair};
use chiamp::appendix::CorrelationParams;
use chiamp::{
    correlation_sum, kloosterman, make_bump, rational_phase_sum, twisted_kloosterman, CoefficientSource,
    DirichletCharacter, FourierPair, InertFunction, Modulus, RationalPhase,
};
use criterion::{criterion_group, criterion_main, Criterion};

fn exponential_sums(c: &mut Criterion) {
    let m = Modulus::new(997).unwrap();
    c.bench_function("kloosterman c=997", |b| b.iter(|| kloosterman(black_box(3), black_box(5), &m)));
    let chi = DirichletCharacter::new(997, 5).unwrap();
    c.bench_function("twisted kloosterman q=997", |b| {
        b.iter(|| twisted_kloosterman(&chi, black_box(3), black_box(5)))
    });
    let rp = RationalPhase::new(343, 2, 7, 3, 1).unwrap();
    c.bench_function("rational phase s=343", |b| b.iter(|| rational_phase_sum(black_box(&rp))));
    let cp = CorrelationParams::from_ell(49, 25, 2, 3, 11).unwrap();
    c.bench_function("correlation [s1,s2]=1225", |b| b.iter(|| correlation_sum(black_box(&cp))));
}

fn weights(c: &mut Criterion) {
    let w = make_bump();
    c.bench_function("bump fourier xi=7.3", |b| b.iter(|| w.fourier(black_box(7.3))));
    let v = InertFunction::standard();
    c.bench_function("inert fourier xi=7.3", |b| b.iter(|| v.fourier(black_box(7.3))));
}

fn formula(c: &mut Criterion) {
    let chi = DirichletCharacter::new(29, 3).unwrap();
    let alpha = AlphaSequence::new(&chi, 4.0).unwrap();
    c.bench_function("chi formula q=29 R=4", |b| {
        b.iter(|| chi_via_formula(&chi, black_box(7), &alpha, None))
    });
    let lambda = CoefficientSource::ternary_divisor(401);
    let v = InertFunction::standard();
    let amp = AmplifierPair::new(&chi, 2, 2).unwrap();
    let mut g = c.benchmark_group("decompose");
    g.sample_size(10);
    g.bench_function("q=29 N=100 R=4 S=T=2", |b| {
        b.iter(|| decompose(&lambda, &chi, &v, 100.0, &alpha, &amp, None))
    });
    g.finish();
}

criterion_group!(benches, exponential_sums, weights, formula);
criterion_main!(benches);
