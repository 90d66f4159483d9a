use criterion::{criterion_group, criterion_main, Criterion};

use art_bench::{config, corpus_source};
use art_core::annotate::elaborate;
use art_core::cgen::{generate, Options};
use art_core::driver;
use art_core::frontend::parse_program;

const PROGRAMS: &[&str] = &["absl.limp", "insert.limp", "insertsort.limp"];

fn front(c: &mut Criterion) {
    for name in PROGRAMS {
        let src = corpus_source(name);
        c.bench_function(&format!("elaborate+generate {name}"), |b| {
            b.iter(|| {
                let p = elaborate(&parse_program(&src).unwrap()).unwrap();
                generate(&p, Options::default()).unwrap()
            })
        });
    }
}

fn verify(c: &mut Criterion) {
    let cfg = config();
    let mut g = c.benchmark_group("verify");
    g.sample_size(10);
    for name in PROGRAMS {
        let src = corpus_source(name);
        g.bench_function(*name, |b| b.iter(|| driver::verify_source(&src, &cfg).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, front, verify);
criterion_main!(benches);
