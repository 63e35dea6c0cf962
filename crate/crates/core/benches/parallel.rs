use criterion::{black_box, criterion_group, criterion_main, Criterion};

use tokopt::exec;
use tokopt::synth::{generate, SynthSpec};
use tokopt::tokenizers::{Tokenizer, TokenizerKind};

fn nbest_batch(c: &mut Criterion) {
    let spec = SynthSpec {
        train: 500,
        valid: 10,
        test: 10,
        ..SynthSpec::default()
    };
    let train = generate(&spec, 0).unwrap().dataset.train;
    let texts: Vec<&str> = train.iter().map(|e| e.text.as_str()).collect();
    let Tokenizer::Unigram(model) = Tokenizer::train(TokenizerKind::Unigram, &texts, 400).unwrap() else {
        unreachable!()
    };
    let sentences: Vec<Vec<char>> = train.iter().map(|e| e.chars()).collect();

    let mut group = c.benchmark_group("nbest25");
    group.sample_size(20);
    group.bench_function("exec::map", |b| {
        b.iter(|| exec::map(&sentences, |s| model.nbest(black_box(s), 25)))
    });
    group.bench_function("map_sequential", |b| {
        b.iter(|| exec::map_sequential(&sentences, |s| model.nbest(black_box(s), 25)))
    });
    group.finish();
}

criterion_group!(benches, nbest_batch);
criterion_main!(benches);
