use std::hint::black_box;
use std::io::BufReader;

use arrowpush::convert::{convert_stream, write_mech_uspto, AdapterConfig, SourceFormat, StreamOptions};
use arrowpush::corpus::{self, SynthOptions, SEEDS};
use arrowpush::engine::{EnumOptions, Engine, State};
use arrowpush::par::Exec;
use arrowpush::search::{evaluate, EvalConfig, HeuristicPolicy, SearchConfig};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn enumeration(c: &mut Criterion) {
    let engine = Engine::default();
    let state = State::from_smiles("CC(=O)CCCC=O.O.O.[BH4-].[BH4-]").unwrap();
    let mut group = c.benchmark_group("enumeration");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| engine.enumerate(black_box(&state), &EnumOptions { max_arrows: 2, exec }).len())
        });
    }
    group.finish();
}

fn conservation(c: &mut Criterion) {
    let engine = Engine::default();
    let states: Vec<State> = SEEDS.iter().map(|s| State::from_smiles(s).unwrap()).collect();
    let mut group = c.benchmark_group("conservation");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| engine.check_conservation(black_box(&states), 2, exec).unwrap())
        });
    }
    group.finish();
}

fn conversion(c: &mut Criterion) {
    let engine = Engine::default();
    let mechs = corpus::synthesize(&engine, &SynthOptions { count: 500, seed: 1, ..Default::default() });
    let mut input = Vec::new();
    write_mech_uspto(&mechs, &mut input).unwrap();
    let cfg = AdapterConfig::for_format(SourceFormat::MechUspto);
    let mut group = c.benchmark_group("conversion");
    group.sample_size(10);
    for (name, exec) in MODES {
        let opts = StreamOptions { exec, ..Default::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let (mut out, mut rejects) = (Vec::new(), Vec::new());
                convert_stream(&engine, &cfg, BufReader::new(input.as_slice()), &mut out, &mut rejects, &opts)
                    .unwrap()
            })
        });
    }
    group.finish();
}

fn evaluation(c: &mut Criterion) {
    let engine = Engine::default();
    let mechs = corpus::synthesize(&engine, &SynthOptions { count: 8, max_steps: 2, seed: 5, ..Default::default() });
    let mut group = c.benchmark_group("evaluation");
    group.sample_size(10);
    for (name, exec) in MODES {
        let policy = HeuristicPolicy { exec, ..HeuristicPolicy::default() };
        let cfg = EvalConfig {
            widths: vec![1],
            search: SearchConfig { beam_width: 1, ..SearchConfig::default() },
            exec,
            ..EvalConfig::default()
        };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate(&engine, black_box(&mechs), &policy, &cfg).steps)
        });
    }
    group.finish();
}

criterion_group!(benches, enumeration, conservation, conversion, evaluation);
criterion_main!(benches);
