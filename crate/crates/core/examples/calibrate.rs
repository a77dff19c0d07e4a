//! Parameter sweep over decay, noise and pre-population.
//!
//! Every grid point runs the full 3 × 40 × 30 experiment once per seed and
//! reports the mean no-probe / no-attack proportions, the worst deviation
//! from the target table, and how many seeds pass each pattern gate.
//!
//!     cargo run --release -p dg-core --example calibrate -- \
//!         --decay 0.5,1 --noise 0.25,0.5 --prepop 10,15 --seeds 0-4

use std::ops::RangeInclusive;

use rand::{Rng, SeedableRng};

use dg_core::analysis::{Cell, Measure};
use dg_core::{aggregate, run_experiment, AgentParams, AggregateStats, CostScheme, ExperimentConfig};

/// Reference proportions: [condition][probe, attack][regular, honeypot, none].
pub const TARGET: [[[f64; 3]; 2]; 3] = [
    [[0.42, 0.42, 0.16], [0.39, 0.40, 0.20]],
    [[0.40, 0.41, 0.18], [0.38, 0.39, 0.22]],
    [[0.40, 0.40, 0.20], [0.36, 0.38, 0.26]],
];

fn worst_deviation(stats: &AggregateStats) -> f64 {
    let mut worst = 0.0_f64;
    for (ci, c) in CostScheme::ALL.iter().enumerate() {
        let s = stats.get(*c).expect("all conditions run");
        for (mi, m) in Measure::ALL.iter().enumerate() {
            for (ki, cell) in [Cell::Regular, Cell::Honeypot, Cell::None].iter().enumerate() {
                worst = worst.max((s.measure(*m).get(*cell) - TARGET[ci][mi][ki]).abs());
            }
        }
    }
    worst
}

fn balanced(stats: &AggregateStats) -> bool {
    stats
        .conditions
        .iter()
        .all(|c| (c.probe.regular - c.probe.honeypot).abs() <= 0.05)
}

fn list<T: std::str::FromStr>(arg: &str) -> Vec<T> {
    arg.split(',')
        .map(|s| s.parse().ok().expect("comma-separated numbers"))
        .collect()
}

fn range(arg: &str) -> RangeInclusive<u64> {
    let (a, b) = arg.split_once('-').unwrap_or((arg, arg));
    a.parse().expect("seed")..=b.parse().expect("seed")
}

fn main() {
    let mut decays = vec![0.5];
    let mut noises = vec![0.25];
    let mut prepops = vec![15];
    let mut taus: Vec<Option<f64>> = vec![None];
    let mut seeds = 0..=0;
    let mut random = 0usize;
    let args: Vec<String> = std::env::args().skip(1).collect();
    for pair in args.chunks(2) {
        match pair[0].as_str() {
            "--decay" => decays = list(&pair[1]),
            "--noise" => noises = list(&pair[1]),
            "--prepop" => prepops = list(&pair[1]),
            "--seeds" => seeds = range(&pair[1]),
            "--random" => random = pair[1].parse().expect("sample count"),
            "--tau" => {
                taus = pair[1]
                    .split(',')
                    .map(|t| (t != "auto").then(|| t.parse().expect("temperature")))
                    .collect()
            }
            other => panic!("unknown flag {other}"),
        }
    }

    println!(
        "d     sigma  tau   prepop | probe_none (mean)    | attack_none (mean)   | worst(max) | a  b  c  d  all"
    );
    let mut points = Vec::new();
    for &decay in &decays {
        for &noise in &noises {
            for &tau in &taus {
                for &prepopulation in &prepops {
                    points.push((decay, noise, tau, prepopulation));
                }
            }
        }
    }
    if random > 0 {
        // log-uniform samples over a wide box
        let mut rng = rand::rngs::StdRng::seed_from_u64(random as u64);
        let mut log_uniform = |lo: f64, hi: f64| (rng.random_range(lo.ln()..hi.ln())).exp();
        points = (0..random)
            .map(|_| {
                let decay = log_uniform(0.5, 4.0);
                let noise = log_uniform(0.05, 0.6);
                let tau = log_uniform(0.5, 2.0);
                let auto = log_uniform(1.0, 2.0) < 1.3;
                let prepop = log_uniform(3.0, 100.0).round() as i64;
                let r = |x: f64| (x * 100.0).round() / 100.0;
                (r(decay), r(noise), (!auto).then(|| r(tau)), prepop)
            })
            .collect();
    }
    for (decay, noise, tau, prepopulation) in points {
                let mut probe_none = [0.0; 3];
                let mut attack_none = [0.0; 3];
                let mut worst = 0.0_f64;
                let mut passes = [0usize; 5];
                let n = seeds.clone().count() as f64;
                for seed in seeds.clone() {
                    let config = ExperimentConfig {
                        agent: AgentParams {
                            temperature: tau,
                            ..AgentParams::new(decay, noise, prepopulation)
                        },
                        master_seed: seed,
                        ..ExperimentConfig::default()
                    };
                    let stats: AggregateStats =
                        aggregate(&run_experiment(&config).expect("experiment runs")).expect("aggregates");
                    for (acc, v) in probe_none.iter_mut().zip(stats.series(Measure::Probe, Cell::None)) {
                        *acc += v / n;
                    }
                    for (acc, v) in attack_none.iter_mut().zip(stats.series(Measure::Attack, Cell::None)) {
                        *acc += v / n;
                    }
                    let w = worst_deviation(&stats);
                    worst = worst.max(w);
                    let gates = [
                        stats.none_non_decreasing(Measure::Probe),
                        stats.none_non_decreasing(Measure::Attack),
                        balanced(&stats),
                        w <= 0.10,
                    ];
                    for (p, g) in passes.iter_mut().zip(gates) {
                        *p += g as usize;
                    }
                    passes[4] += gates.iter().all(|g| *g) as usize;
                }
                println!(
                    "{decay:<5} {noise:<6} {:<5} {prepopulation:<6} | {:.3} {:.3} {:.3}    | {:.3} {:.3} {:.3}    | {worst:.3}      | {} {} {} {} {}",
                    tau.map_or("auto".to_string(), |t| t.to_string()),
                    probe_none[0], probe_none[1], probe_none[2],
                    attack_none[0], attack_none[1], attack_none[2],
                    passes[0], passes[1], passes[2], passes[3], passes[4],
                );
    }
}
