//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero
//! if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ader_cli::commands::{cmd_lowerbound, cmd_sweep, LowerBoundParams};
use ader_cli::config::{ComparatorSpec, EnvKind, EnvironmentConfig, ExperimentConfig};
use ader_core::ader::{bound_value, run, AlgorithmConfig, BoundParams, RegretTrace, Theorem, Variant};
use ader_core::environments::{
    best_block_comparators, dynamic_path_length, generate, make_contraction, make_lowerbound_instance,
    make_model_tracking, path_length, BlockPartition, Contraction, DynamicalModel,
    EnvironmentSpec, Family, LossSequence,
};
use ader_core::geometry::{FeasibleSet, Vector};
use ader_core::meta::GridFlavor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// One randomized run from the bound-compliance batch.
struct BatchRun {
    label: String,
    variant: Variant,
    horizon: usize,
    trace: RegretTrace,
    losses: LossSequence,
    set: FeasibleSet,
}

fn random_model(set: &FeasibleSet, rng: &mut ChaCha8Rng) -> DynamicalModel {
    let maps = (0..rng.random_range(1..=3))
        .map(|_| match rng.random_range(0..3) {
            0 => Contraction::Shrink {
                rho: rng.random_range(0.9..=1.0),
            },
            1 => {
                let i = rng.random_range(0..set.dim());
                let j = (i + rng.random_range(1..set.dim())) % set.dim();
                Contraction::Rotation {
                    plane: (i, j),
                    angle: rng.random_range(-0.3..0.3),
                }
            }
            _ => Contraction::TowardPoint {
                anchor: set.sample(rng),
                weight: rng.random_range(0.0..0.1),
            },
        })
        .collect();
    DynamicalModel::schedule(maps, set).unwrap()
}

/// Builds and runs one tuple of the bound-compliance grid, registering the three
/// comparator families.
fn batch_run(variant: Variant, family: Family, horizon: usize, dim: usize, seed: u64) -> BatchRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let set = FeasibleSet::ball(dim, rng.random_range(1.0..4.0)).unwrap();
    let mut spec = EnvironmentSpec::new(family, horizon, dim, seed);
    spec.gradient_bound = rng.random_range(0.5..2.0);
    let blocks;
    match family {
        Family::QuadraticTracking => {
            if rng.random::<bool>() {
                spec.switches = horizon / rng.random_range(20..200);
                blocks = BlockPartition::even(horizon, spec.switches + 1).unwrap();
            } else {
                spec.drift = rng.random_range(0.0..0.2);
                blocks = BlockPartition::even(horizon, 10).unwrap();
            }
        }
        Family::LinearAdversary => blocks = BlockPartition::even(horizon, 10).unwrap(),
        Family::LowerBound => {
            spec.tau = rng.random_range(0.0..(horizon as f64 * set.diameter() / 10.0));
            blocks = make_lowerbound_instance(horizon, spec.tau, &set, spec.gradient_bound, seed)
                .unwrap()
                .blocks;
        }
    }
    let losses = generate(&spec, &set).unwrap();
    let mut config = AlgorithmConfig::new(variant, horizon, &set, &losses.bounds);
    if variant.needs_model() {
        config = config.with_model(random_model(&set, &mut rng));
    }
    let mut trace = run(&losses.rounds, &config, &set).unwrap();
    let comparators = [
        ("constant-best", BlockPartition::whole(horizon).unwrap()),
        ("per-round-minimizer", BlockPartition::singletons(horizon).unwrap()),
        ("block-best", blocks),
    ];
    for (name, partition) in comparators {
        let u = best_block_comparators(&losses.rounds, &partition, &set).unwrap();
        trace.register_comparator(name, &u, &losses.rounds).unwrap();
    }
    BatchRun {
        label: format!("{variant}/{family}/T={horizon}/d={dim}/seed={seed}"),
        variant,
        horizon,
        trace,
        losses,
        set,
    }
}

fn compliance_batch() -> Vec<BatchRun> {
    let mut grid = Vec::new();
    for variant in [Variant::OgdBaseline, Variant::AderBasic, Variant::AderImproved, Variant::AderDynamical] {
        for family in Family::ALL {
            for horizon in [100, 1_000, 10_000] {
                for dim in [2, 5, 10] {
                    for rep in 0..2u64 {
                        grid.push((variant, family, horizon, dim, rep));
                    }
                }
            }
        }
    }
    grid.par_iter()
        .enumerate()
        .map(|(i, &(v, f, t, d, _))| batch_run(v, f, t, d, 1_000 + i as u64))
        .collect()
}

fn criterion_bounds(batch: &[BatchRun]) -> Outcome {
    let mut checks = 0;
    let mut worst = f64::INFINITY;
    let mut failures = Vec::new();
    for r in batch {
        for c in &r.trace.comparators {
            checks += 1;
            let expected = match r.variant {
                Variant::OgdBaseline => Theorem::Ogd,
                Variant::AderBasic => Theorem::AderBasic,
                Variant::AderImproved => Theorem::AderImproved,
                _ => Theorem::AderDynamical,
            };
            worst = worst.min(c.slack / c.bound.abs().max(1.0));
            if c.theorem != expected || !c.within_bound(1e-6) {
                failures.push(format!("{} {}: regret {} bound {}", r.label, c.name, c.regret, c.bound));
            }
        }
    }
    outcome(
        failures.is_empty() && batch.len() >= 200,
        format!(
            "{} runs, {checks} comparator checks, min relative slack {worst:.3}{}",
            batch.len(),
            failures.first().map(|f| format!("; first failure {f}")).unwrap_or_default()
        ),
    )
}

/// Independent grid-size oracle: count doublings from η₁ until the largest useful step is covered.
fn expected_grid_size(horizon: usize, flavor: GridFlavor) -> u64 {
    let t = horizon as f64;
    let ratio = match flavor {
        GridFlavor::Basic => (1.0 + 4.0 * t / 7.0).sqrt(),
        GridFlavor::Dynamical => (1.0 + 2.0 * t).sqrt(),
    };
    let mut n = 1;
    let mut reach = 1.0;
    while reach < ratio {
        reach *= 2.0;
        n += 1;
    }
    n
}

fn criterion_queries(batch: &[BatchRun]) -> Outcome {
    let mut failures = Vec::new();
    for r in batch {
        let t = r.horizon as u64;
        let expected = match r.variant {
            Variant::AderImproved | Variant::OgdBaseline => t,
            Variant::AderBasic => expected_grid_size(r.horizon, GridFlavor::Basic) * t,
            _ => expected_grid_size(r.horizon, GridFlavor::Dynamical) * t,
        };
        if r.trace.grad_queries != expected {
            failures.push(format!("{}: {} != {expected}", r.label, r.trace.grad_queries));
        }
    }
    let n = |t| expected_grid_size(t, GridFlavor::Basic);
    outcome(
        failures.is_empty(),
        format!(
            "{} runs exact; basic N at T=10^2/10^3/10^4 = {}/{}/{}{}",
            batch.len(),
            n(100),
            n(1000),
            n(10_000),
            failures.first().map(|f| format!("; first mismatch {f}")).unwrap_or_default()
        ),
    )
}

fn criterion_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = 0;
    for i in 0..20 {
        let dim = rng.random_range(1..8);
        let horizon = rng.random_range(1..2_000);
        let set = FeasibleSet::ball(dim, rng.random_range(0.5..5.0)).unwrap();
        let family = if i % 2 == 0 { Family::QuadraticTracking } else { Family::LinearAdversary };
        let mut spec = EnvironmentSpec::new(family, horizon, dim, rng.random());
        spec.drift = rng.random_range(0.0..0.3);
        spec.gradient_bound = rng.random_range(0.1..3.0);
        let losses = generate(&spec, &set).unwrap();
        let identity = make_contraction(Contraction::Identity, &set).unwrap();
        let dynamical = AlgorithmConfig::new(Variant::AderDynamical, horizon, &set, &losses.bounds).with_model(identity);
        let basic =
            AlgorithmConfig::new(Variant::AderBasic, horizon, &set, &losses.bounds).with_grid(GridFlavor::Dynamical);
        let a = run(&losses.rounds, &dynamical, &set).unwrap();
        let b = run(&losses.rounds, &basic, &set).unwrap();
        let same = a.rounds == b.rounds
            && a.meta == b.meta
            && a.grid == b.grid
            && a.cumulative_loss.to_bits() == b.cumulative_loss.to_bits();
        if !same {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("20 configs, {failures} differing traces"))
}

fn criterion_meta_regret(batch: &[BatchRun]) -> Outcome {
    let mut checked = 0;
    let mut failures = Vec::new();
    for r in batch {
        if let Some(check) = r.trace.meta_regret_check() {
            checked += 1;
            if !check.holds(1e-6) {
                failures.push(format!("{}: {} > {}", r.label, check.meta_loss, check.bound));
            }
        }
    }
    outcome(
        failures.is_empty() && checked > 0,
        format!(
            "{checked} meta runs{}",
            failures.first().map(|f| format!("; first failure {f}")).unwrap_or_default()
        ),
    )
}

fn criterion_surrogate(batch: &[BatchRun]) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut runs = 0;
    for (i, r) in batch.iter().enumerate().filter(|(_, r)| r.variant == Variant::AderImproved) {
        let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
        let points: Vec<Vector> = (0..20).map(|_| r.set.sample(&mut rng)).collect();
        worst = worst.max(r.trace.surrogate_gap(&r.losses.rounds, &points).unwrap());
        runs += 1;
    }
    outcome(worst <= 1e-9, format!("{runs} runs x 20 points, max violation {worst:.3e}"))
}

fn criterion_scaling(out: &Path) -> Outcome {
    let d = 2.0;
    let config = ExperimentConfig {
        algorithms: vec![Variant::AderBasic, Variant::AderImproved, Variant::OgdBaseline],
        environments: vec![EnvironmentConfig {
            switch_every: Some(50),
            ..EnvironmentConfig::new(EnvKind::QuadraticTracking)
        }],
        horizons: vec![100, 1_000, 10_000],
        dim: 2,
        diameter: d,
        seeds: (0..5).collect(),
        comparators: vec![ComparatorSpec::BlockBest { blocks: None }],
        ..ExperimentConfig::default()
    };
    let rows = cmd_sweep(&config, 0, out).unwrap();
    // Quadratic tracking on a ball of diameter D: G = D, c = D²/2.
    let (g, c) = (d, d * d / 2.0);
    let limit = 3.0 * g * d.sqrt() + c;
    let mean_ratio = |alg: &str, t: usize| {
        let r: Vec<f64> = rows.iter().filter(|r| r.algorithm == alg && r.horizon == t).map(|r| r.ratio).collect();
        r.iter().sum::<f64>() / r.len() as f64
    };
    let ader_max = rows
        .iter()
        .filter(|r| r.algorithm != "ogd-baseline")
        .map(|r| r.ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    let growth = mean_ratio("ogd-baseline", 10_000) / mean_ratio("ogd-baseline", 100);
    let p_growth = {
        let p = |t| rows.iter().filter(|r| r.horizon == t).map(|r| r.path_length).sum::<f64>();
        p(10_000) / p(100)
    };
    outcome(
        ader_max < limit && growth >= 3.0,
        format!(
            "Ader max ratio {ader_max:.3} < {limit:.3}; OGD ratio {:.3} -> {:.3} (x{growth:.2}); P_T grew x{p_growth:.0}",
            mean_ratio("ogd-baseline", 100),
            mean_ratio("ogd-baseline", 10_000)
        ),
    )
}

fn criterion_lower_bound(out: &Path) -> Outcome {
    let (d, g, t) = (2.0, 1.0, 4096);
    let mut worst = f64::INFINITY;
    let mut parts = Vec::new();
    let mut pass = true;
    for mult in [1.0, 16.0, 256.0] {
        let params = LowerBoundParams {
            horizon: t,
            tau: mult * d,
            seeds: 50,
            first_seed: 0,
            dim: 3,
            diameter: d,
            gradient_bound: g,
            algorithms: Variant::ALL.to_vec(),
        };
        let rows = cmd_lowerbound(&params, 0, &out.join(format!("tau{mult}"))).unwrap();
        let threshold = 0.05 * g * (t as f64 * (d * d + d * params.tau)).sqrt();
        let min = rows.iter().map(|r| r.mean_regret).fold(f64::INFINITY, f64::min);
        worst = worst.min(min / threshold);
        pass &= min >= threshold;
        parts.push(format!("tau={}D: min mean regret {min:.1} vs {threshold:.1}", mult));
    }
    outcome(pass, format!("{}; worst ratio to threshold {worst:.2}", parts.join(", ")))
}

fn criterion_dynamics() -> Outcome {
    let horizon = 10_000;
    let set = FeasibleSet::ball(2, 2.0).unwrap();
    let angle = 0.2;
    let model = make_contraction(Contraction::Rotation { plane: (0, 1), angle }, &set).unwrap();
    let start = Vector::new(vec![0.8 * set.radius(), 0.0]).unwrap();
    let (losses, u) = make_model_tracking(horizon, &set, &model, &start).unwrap();
    let config = AlgorithmConfig::new(Variant::AderDynamical, horizon, &set, &losses.bounds).with_model(model.clone());
    let mut trace = run(&losses.rounds, &config, &set).unwrap();
    let report = trace.register_comparator("follow-dynamics", &u, &losses.rounds).unwrap().clone();
    let p_dyn = dynamic_path_length(&u, &model).unwrap();
    let p = path_length(&u).unwrap();
    let params = |path| BoundParams {
        diameter: set.diameter(),
        grad_bound: losses.bounds.g,
        loss_range: losses.bounds.c,
        horizon,
        eta: None,
        path,
    };
    let thm5 = bound_value(Theorem::AderDynamical, &params(0.0)).unwrap();
    let thm3 = bound_value(Theorem::AderBasic, &params(p)).unwrap();
    // Every step moves the comparator by the same chord 2r·sin(θ/2).
    let chord = 2.0 * start.norm() * (angle / 2.0).sin();
    let moving = p >= 0.5 * (horizon - 1) as f64 * chord;
    outcome(
        p_dyn < 1e-9 && moving && report.regret <= thm5 && report.regret <= 0.5 * thm3,
        format!(
            "P'={p_dyn:.1e}, P={p:.1}; regret {:.2} <= {thm5:.2} (P'=0 bound) and <= {:.2} (half the P bound)",
            report.regret,
            0.5 * thm3
        ),
    )
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn ader(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_ader"))
        .args(args)
        .env_remove("ADER_OUT_DIR")
        .output()
        .unwrap()
        .status
        .success()
}

fn criterion_golden(out: &Path) -> Outcome {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let minimal = golden.join("minimal.json");
    let dirs: Vec<_> = (0..2).map(|i| out.join(format!("minimal{i}"))).collect();
    let mut ok = true;
    for d in &dirs {
        ok &= ader(&["run", "--config", minimal.to_str().unwrap(), "--out", d.to_str().unwrap()]);
    }
    let first = read_tree(&dirs[0]);
    let repeat = ok && first == read_tree(&dirs[1]) && first.len() == 3;
    let expected = read_tree(&golden.join("minimal"));
    let matches_golden = first == expected;

    let multi: Vec<_> = [1, 4]
        .iter()
        .map(|jobs| {
            let d = out.join(format!("jobs{jobs}"));
            let j = jobs.to_string();
            let d_str = d.to_str().unwrap();
            let args = [
                "run", "--config", minimal.to_str().unwrap(), "--algo", "ader-basic", "ader-improved", "ogd-baseline",
                "--t", "20", "50", "--seed", "1", "2", "3", "--jobs", &j, "--out", d_str,
            ];
            ok &= ader(&args);
            read_tree(&d)
        })
        .collect();
    let workers = multi[0] == multi[1] && multi[0].len() == 18 + 2;
    outcome(
        ok && repeat && matches_golden && workers,
        format!(
            "repeat identical: {repeat}; matches checked-in golden: {matches_golden}; --jobs 1 vs 4 identical over {} files: {workers}",
            multi[0].len()
        ),
    )
}

fn main() {
    let started = Instant::now();
    let scratch = tempfile::tempdir().unwrap();
    let batch = compliance_batch();
    let results = [
        ("1 bound compliance", criterion_bounds(&batch)),
        ("2 scaling ratio", criterion_scaling(&scratch.path().join("sweep"))),
        ("3 query accounting", criterion_queries(&batch)),
        ("4 identity-dynamics equivalence", criterion_identity()),
        ("5 meta-regret runtime check", criterion_meta_regret(&batch)),
        ("6 surrogate inequality", criterion_surrogate(&batch)),
        ("7 lower-bound sanity", criterion_lower_bound(&scratch.path().join("lower"))),
        ("8 dynamics advantage", criterion_dynamics()),
        ("9 golden determinism", criterion_golden(scratch.path())),
    ];
    let mut failed = 0;
    for (name, o) in &results {
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        results.len() - failed,
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
