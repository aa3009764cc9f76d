use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hodge_dn::bvp::HarmonicSpaces;
use hodge_dn::dec::assemble;
use hodge_dn::dn::DNMap;
use hodge_dn::exec;
use hodge_dn::mesh::{generate, Shape};
use hodge_dn::witten::{GradedComplex, Grading};
use hodge_dn::Tolerances;

fn pipeline(c: &mut Criterion) {
    let tol = Tolerances::default();
    let mut group = c.benchmark_group("assemble+harmonic+dn");
    group.sample_size(10);
    for (shape, res) in [(Shape::Disk, 4), (Shape::Annulus, 8)] {
        let mesh = generate(shape, res).unwrap();
        for (label, sequential) in [("parallel", false), ("sequential", true)] {
            group.bench_with_input(BenchmarkId::new(label, format!("{shape}_r{res}")), &mesh, |b, mesh| {
                exec::set_sequential(sequential);
                b.iter(|| {
                    let bundle = Arc::new(assemble(mesh).unwrap());
                    let c = GradedComplex::zero(bundle, Grading::Degree).unwrap();
                    let h = HarmonicSpaces::compute(&c, &tol).unwrap();
                    DNMap::assemble(&c, &h, &tol).unwrap()
                });
            });
        }
    }
    exec::set_sequential(false);
    group.finish();
}

criterion_group!(benches, pipeline);
criterion_main!(benches);
