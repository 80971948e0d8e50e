use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion, Throughput};
use picm::gaussian::TritMasses;
use picm::rangecoder::{Decoder, Encoder};
use picm::{decode, encode, synth_grid, Budget, Dims, EncodeOptions, ScaleLaw, Strategy};

const SYMBOLS: usize = 1 << 16;

// skewed but not degenerate
fn trits() -> (Vec<u8>, TritMasses) {
    let masses = TritMasses {
        freqs: [9000, 50000, 6536],
        total: 1 << 16,
    };
    let mut x = 0x9e37_79b9_7f4a_7c15u64;
    let seq = (0..SYMBOLS)
        .map(|_| {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            match (x >> 48) as u32 {
                v if v < 9000 => 0,
                v if v < 59000 => 1,
                _ => 2,
            }
        })
        .collect();
    (seq, masses)
}

fn range_coder(c: &mut Criterion) {
    let (seq, masses) = trits();
    let mut g = c.benchmark_group("range_coder");
    g.throughput(Throughput::Elements(SYMBOLS as u64));
    g.bench_function("encode", |b| {
        b.iter(|| {
            let mut enc = Encoder::new();
            for &t in &seq {
                enc.encode(t, &masses).unwrap();
            }
            black_box(enc.flush().unwrap())
        })
    });
    let mut enc = Encoder::new();
    for &t in &seq {
        enc.encode(t, &masses).unwrap();
    }
    let bytes = enc.flush().unwrap();
    g.bench_function("decode", |b| {
        b.iter(|| {
            let mut dec = Decoder::new(&bytes);
            let mut acc = 0u32;
            for _ in 0..SYMBOLS {
                acc += dec.decode(&masses).unwrap() as u32;
            }
            black_box(acc)
        })
    });
    g.finish();
}

fn codec(c: &mut Criterion) {
    let dims = Dims::new(16, 16, 64).unwrap();
    let grid = synth_grid(7, dims, ScaleLaw::LogUniform { lo: 0.1, hi: 10.0 }).unwrap();
    let mut g = c.benchmark_group("codec");
    g.sample_size(10);
    g.throughput(Throughput::Elements(grid.len() as u64));
    for strategy in [Strategy::ExpectedVariance, Strategy::Sigma] {
        let opts = EncodeOptions {
            strategy,
            ..EncodeOptions::default()
        };
        g.bench_function(format!("encode_{strategy}"), |b| {
            b.iter(|| black_box(encode(&grid, &opts).unwrap()))
        });
    }
    let (stream, _) = encode(&grid, &EncodeOptions::default()).unwrap();
    let half = (stream.header_len() + stream.len()) as u64 / 2;
    for (name, budget) in [
        ("decode_full", Budget::Full),
        ("decode_half", Budget::Bytes(half)),
    ] {
        g.bench_function(name, |b| {
            b.iter_batched(
                || stream.as_bytes(),
                |s| black_box(decode(s, budget).unwrap()),
                BatchSize::SmallInput,
            )
        });
    }
    g.finish();
}

criterion_group!(benches, range_coder, codec);
criterion_main!(benches);
