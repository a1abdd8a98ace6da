use std::hint::black_box;

use cabin_nlu::corpus::{generate_corpus, GeneratorConfig};
use cabin_nlu::models::{train_joint, train_tagger, TaggerTask, TrainConfig};
use cabin_nlu::numerics::{backward, Tape};
use criterion::{criterion_group, criterion_main, Criterion};

fn config(epochs: usize) -> TrainConfig {
    TrainConfig {
        hidden_dim: 32,
        attention_dim: 16,
        embedding_dim: 50,
        max_epochs: epochs,
        ..TrainConfig::default()
    }
}

fn tagger_epoch(c: &mut Criterion) {
    let corpus = generate_corpus(&GeneratorConfig::new(200, 3)).unwrap();
    let cfg = config(1);
    c.bench_function("slot tagger epoch (200 utterances)", |b| {
        b.iter(|| train_tagger(black_box(&corpus), TaggerTask::Slot, &cfg, None).unwrap())
    });
}

fn joint_step(c: &mut Criterion) {
    let corpus = generate_corpus(&GeneratorConfig::new(100, 5)).unwrap();
    let model = train_joint(&corpus, &config(1), None).unwrap();
    let u = &corpus[0];
    c.bench_function("joint forward and backward", |b| {
        b.iter(|| {
            let mut tape = Tape::new();
            let loss = model.utterance_loss(&mut tape, black_box(u)).unwrap();
            backward(&tape, loss).unwrap()
        })
    });
    c.bench_function("joint predict", |b| b.iter(|| model.predict(black_box(&u.tokens)).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = tagger_epoch, joint_step
}
criterion_main!(benches);
