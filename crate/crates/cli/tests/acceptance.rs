//! Acceptance criteria, one test each. Every test writes a PASS/FAIL line
//! straight to stderr so the verdicts show up in captured test output.
//!
//! The tests take a shared lock: several of them measure wall time, and the
//! comparison in criterion 4 needs the machine to itself.

use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Duration;

use mgamsgd::compare::{compare, CompareConfig, Method};
use mgamsgd::elasticity::{total_loss, ElasticityLoss, LoadCase, Material, ProblemSpec, END_LOAD};
use mgamsgd::jet::{fd_gradient, loss_gradient};
use mgamsgd::mga::{decode, encode, tournament_select, SelectionState, PICK_LIMIT, RESOLUTION};
use mgamsgd::network::{forward, init_params, Architecture};
use mgamsgd::optim::{adam_step, AdamState};
use mgamsgd::reference::{analytic_uniaxial, cube_grid, mse_u};
use mgamsgd::sampling::{
    generate_grid, DirichletPoint, Face, GridSpec, InteriorPoint, NeumannPoint, SampleSet,
};
use mgamsgd::sensitivity::{morris_oat, mu, sigma, table1, RunSample};
use mgamsgd::trainer::{train_mga_msgd, TrainConfig, TrainOutcome, TrainingTrace};
use mgamsgd_cli::commands;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "acceptance {id:>2} {:<4} {name}: {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().lock().write_all(line.as_bytes());
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

/// The default Case-A training runs shared by criteria 3, 5 and 8.
fn default_runs() -> &'static [(TrainConfig, TrainOutcome)] {
    static RUNS: OnceLock<Vec<(TrainConfig, TrainOutcome)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        SEEDS
            .iter()
            .map(|&seed| {
                let cfg = TrainConfig {
                    seed,
                    ..TrainConfig::default()
                };
                let out = train_mga_msgd(&cfg, &cfg.problem(), &cfg.material().unwrap())
                    .unwrap_or_else(|a| panic!("seed {seed}: {a}"));
                (cfg, out)
            })
            .collect()
    })
}

fn median(v: &[f64]) -> f64 {
    mgamsgd::compare::median(v).expect("non-empty")
}

fn random_point_set(rng: &mut ChaCha8Rng) -> SampleSet {
    let mut u = || rng.gen::<f64>();
    let inside = [u(), u(), u()];
    let on_dirichlet = [0.0, u(), u()];
    let face = Face::ALL[1 + (u() * 5.0) as usize % 5];
    let mut on_face = [u(), u(), u()];
    let axis = face.index() / 2;
    on_face[axis] = if face.index() % 2 == 0 { 0.0 } else { 1.0 };
    let w = 1.0 + u();
    SampleSet {
        interior: vec![
            InteriorPoint {
                point: inside,
                weight: 1.0,
                on_boundary: false,
            },
            InteriorPoint {
                point: on_dirichlet,
                weight: w,
                on_boundary: true,
            },
            InteriorPoint {
                point: on_face,
                weight: w,
                on_boundary: true,
            },
        ],
        dirichlet: vec![DirichletPoint {
            node: 1,
            point: on_dirichlet,
        }],
        neumann: vec![NeumannPoint {
            node: 2,
            point: on_face,
            face,
            normal: face.outward_normal(),
        }],
    }
}

#[test]
fn criterion_01_gradient_exactness() {
    let _g = serial();
    let arch = Architecture::new(2, 10).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut checked, mut bad) = (0.0f64, 0usize, 0usize);
    let start = std::time::Instant::now();
    for draw in 0..100u64 {
        let params = init_params(arch, 1000 + draw);
        let samples = random_point_set(&mut rng);
        let case = if rng.gen_bool(0.5) {
            LoadCase::A
        } else {
            LoadCase::B
        };
        let problem = ProblemSpec::new(case, rng.gen_range(0.1..10.0), rng.gen_bool(0.5));
        let mat = Material::new(rng.gen_range(0.5..2.0), rng.gen_range(0.1..0.45)).unwrap();
        let loss = ElasticityLoss::new(arch, samples, problem, mat).unwrap();
        let g = loss_gradient(params.as_slice(), &loss).unwrap();
        let fd = fd_gradient(params.as_slice(), &loss, 1e-5).unwrap();
        for (a, b) in g.iter().zip(&fd) {
            let err = (a - b).abs();
            checked += 1;
            if err > 1e-8 {
                let rel = err / b.abs();
                worst = worst.max(rel);
                if !(rel <= 1e-5) {
                    bad += 1;
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "gradient exactness",
        bad == 0 && secs < 60.0,
        &format!("{checked} components over 100 draws, {bad} outside 1e-5 (worst relative {worst:.2e}), {secs:.1} s"),
    );
}

#[test]
fn criterion_02_analytic_zero_loss() {
    let _g = serial();
    let arch = Architecture::new(2, 10).unwrap();
    let mat = Material::new(1.0, 0.3).unwrap();
    let params = analytic_uniaxial(mat, -0.1).network_params(arch).unwrap();
    let samples = generate_grid(&GridSpec::uniform(5)).unwrap();
    let mut worst = 0.0f64;
    for normalize in [false, true] {
        let problem = ProblemSpec::new(LoadCase::A, 6.25, normalize);
        let b = total_loss(&params, &arch, &samples, &problem, &mat).unwrap();
        for term in [b.mse_e, b.mse_d, b.mse_n, b.mse_uq, b.mse] {
            worst = worst.max(term.abs());
        }
    }
    verdict(
        2,
        "analytic-zero loss",
        worst <= 1e-12,
        &format!("largest term {worst:.2e}"),
    );
}

#[test]
fn criterion_03_end_to_end_accuracy() {
    let _g = serial();
    let runs = default_runs();
    let mse: Vec<f64> = runs.iter().map(|(_, o)| o.loss.mse).collect();
    let err: Vec<f64> = runs
        .iter()
        .map(|(cfg, o)| {
            let exact = analytic_uniaxial(cfg.material().unwrap(), END_LOAD[0]);
            mse_u(
                |x| forward(&o.params, x),
                |x| exact.displacement(x),
                &cube_grid(10),
            )
            .unwrap()
        })
        .collect();
    let slowest = runs
        .iter()
        .map(|(_, o)| o.trace.total_time)
        .fold(0.0, f64::max);
    let (m, e) = (median(&mse), median(&err));
    verdict(
        3,
        "end-to-end Case A accuracy",
        m <= 1e-4 && e <= 1e-4 && slowest <= 180.0,
        &format!("median MSE {m:.3e}, median MSE_u {e:.3e}, slowest run {slowest:.1} s"),
    );
}

#[test]
fn criterion_04_baseline_dominance() {
    let _g = serial();
    let train = TrainConfig::default();
    let cfg = CompareConfig::new(&train, Duration::from_secs(60), SEEDS.to_vec());
    let report = compare(&train, &train.problem(), &train.material().unwrap(), &cfg).unwrap();
    let med = |m| report.median_final_loss(m).unwrap_or(f64::INFINITY);
    let (h, s, a) = (med(Method::MgaMsgd), med(Method::Sgd), med(Method::Adam));
    verdict(
        4,
        "baseline dominance",
        h < s && h < a,
        &format!(
            "median final loss: mga-msgd {h:.3e}, sgd (lr {}) {s:.3e}, adam (lr {}) {a:.3e}",
            cfg.sgd_lr, cfg.adam_lr
        ),
    );
}

fn strictly_decreasing(trace: &TrainingTrace) -> bool {
    trace.accepted_msec().windows(2).all(|w| w[1] < w[0])
}

#[test]
fn criterion_05_qualification_monotonicity() {
    let _g = serial();
    let mut traces: Vec<TrainingTrace> = default_runs()
        .iter()
        .map(|(_, o)| o.trace.clone())
        .collect();
    let variants = [
        TrainConfig {
            case: LoadCase::B,
            ..TrainConfig::default()
        },
        TrainConfig {
            lr_c: 0.9,
            ..TrainConfig::default()
        },
        TrainConfig {
            p_sf: 0.9,
            m_g: 0.5,
            m_m: 0.5,
            m_l: 0.5,
            ..TrainConfig::default()
        },
        TrainConfig {
            n_h: 3,
            beta_i: 1.0,
            csgd_iters: 50,
            ..TrainConfig::default()
        },
        TrainConfig {
            nx: 6,
            ny: 4,
            nz: 4,
            n_gai: 60,
            csgd_iters: 20,
            ..TrainConfig::default()
        },
    ];
    for base in &variants {
        for seed in [10, 11] {
            let cfg = TrainConfig {
                seed,
                ..base.clone()
            };
            let out = train_mga_msgd(&cfg, &cfg.problem(), &cfg.material().unwrap()).unwrap();
            traces.push(out.trace);
        }
    }
    let accepted: usize = traces.iter().map(TrainingTrace::accepted_count).sum();
    let violations = traces.iter().filter(|t| !strictly_decreasing(t)).count();
    verdict(
        5,
        "qualification monotonicity",
        violations == 0 && accepted > traces.len(),
        &format!(
            "{} runs, {accepted} accepted generations, {violations} violations",
            traces.len()
        ),
    );
}

#[test]
fn criterion_06_encoding_roundtrip() {
    let _g = serial();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut values: Vec<f64> = (0..1_000_000)
        .map(|_| rng.gen_range(-16.0..=16.0))
        .collect();
    values.extend([-16.0, 16.0, 0.0, -0.0]);
    for &x in &values {
        worst = worst.max((decode(&encode(x)) - x).abs());
    }
    let mut inexact = 0;
    for _ in 0..100_000 {
        let k: i64 = rng.gen_range(-(1i64 << 25) + 1..(1i64 << 25));
        let x = k as f64 * RESOLUTION;
        if decode(&encode(x)).to_bits() != x.to_bits() && !(x == 0.0) {
            inexact += 1;
        }
    }
    verdict(
        6,
        "encoding roundtrip",
        worst <= RESOLUTION && inexact == 0,
        &format!("worst error {worst:.3e} (bound {RESOLUTION:.3e}) over 1e6 draws; {inexact} representable values changed"),
    );
}

/// Replays selections against an independent count of picks and reports
/// `(iterations, clears, violations)`.
fn selection_law(n: usize, count: usize, iterations: usize, seed: u64) -> (usize, u64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = SelectionState::new(n);
    let mut shadow = vec![0u32; n];
    let mut violations = 0;
    for _ in 0..iterations {
        // Coarse values so that ties occur.
        let imp: Vec<f64> = (0..n).map(|_| (rng.gen::<f64>() * 8.0).floor()).collect();
        let before = state.clears;
        let picks = tournament_select(&imp, count, 3, &mut state, &mut rng).unwrap();
        let mut taken = vec![false; n];
        let mut expected_clears = 0;
        for &p in &picks {
            let exhausted = (0..n).all(|i| taken[i] || shadow[i] >= PICK_LIMIT);
            if exhausted {
                shadow.iter_mut().for_each(|c| *c = 0);
                expected_clears += 1;
            }
            if taken[p] || shadow[p] >= PICK_LIMIT {
                violations += 1;
            }
            taken[p] = true;
            shadow[p] += 1;
        }
        if state.clears - before != expected_clears {
            violations += 1;
        }
        if state.pick_counts != shadow {
            violations += 1;
        }
    }
    (iterations, state.clears, violations)
}

#[test]
fn criterion_07_selection_history_law() {
    let _g = serial();
    let runs = [
        selection_law(180, 5, 10_000, 7),
        selection_law(7, 3, 10_000, 8),
    ];
    let violations: usize = runs.iter().map(|r| r.2).sum();
    let clears: u64 = runs.iter().map(|r| r.1).sum();
    verdict(
        7,
        "selection-history law",
        violations == 0 && runs.iter().all(|r| r.1 > 0),
        &format!("2 runs of 1e4 iterations, {clears} clears, {violations} violations"),
    );
}

#[test]
fn criterion_08_uniqueness_enforcement() {
    let _g = serial();
    let mut worst = 0.0f64;
    for (cfg, out) in default_runs() {
        let nodes = cfg.samples().unwrap().interior;
        let n = nodes.len() as f64;
        let (mut sy, mut sz) = (0.0, 0.0);
        for node in &nodes {
            let u = forward(&out.params, node.point);
            sy += u[1];
            sz += u[2];
        }
        worst = worst.max((sy / n).abs()).max((sz / n).abs());
    }
    verdict(
        8,
        "uniqueness enforcement",
        worst <= 1e-3,
        &format!(
            "largest |mean u_y|, |mean u_z| over {} runs: {worst:.3e}",
            SEEDS.len()
        ),
    );
}

#[test]
fn criterion_09_morris_harness() {
    let _g = serial();
    let spread_ok = mu(&[1.0, 2.0, 3.0]).unwrap() == 1.0 && sigma(&[1.0, 2.0, 3.0]).unwrap() == 1.0;

    // Metric equal to the swept value of lr_c over 4 levels of [0.5, 1]:
    // values 1/2, 2/3, 5/6, 1 about the mean 3/4.
    let lr = table1()[0];
    let res = morris_oat(&TrainConfig::default(), &[lr], 4, 1, 0, |run| {
        Ok(RunSample {
            mse: run.value,
            time: run.config.lr_c,
        })
    })
    .unwrap();
    let (m, s) = res.sweeps[0]
        .stats(mgamsgd::sensitivity::Metric::AvgMse)
        .unwrap();
    let (mt, st) = res.sweeps[0]
        .stats(mgamsgd::sensitivity::Metric::MinTime)
        .unwrap();
    let (hand_mu, hand_sigma) = (2.0 / 9.0, (5.0f64 / 108.0).sqrt());
    let mock_ok = [
        (m, hand_mu),
        (s, hand_sigma),
        (mt, hand_mu),
        (st, hand_sigma),
    ]
    .iter()
    .all(|(a, b)| (a - b).abs() <= 1e-15);

    let dir = tempfile::TempDir::new().unwrap();
    let cfg = dir.path().join("budget.toml");
    std::fs::write(&cfg, "csgd_iters = 2\nfsgd_iters = 2\n").unwrap();
    let csv = dir.path().join("sensitivity.csv");
    let swept = commands::sensitivity(Some(&cfg), 2, 1, &csv);
    let text = std::fs::read_to_string(&csv).unwrap_or_default();
    let lines: Vec<&str> = text.lines().collect();
    let names: Vec<&str> = table1().iter().map(|r| r.param.name()).collect();
    let metrics = ["avg_mse", "min_mse", "avg_time", "min_time"];
    let shape_ok = swept.is_ok()
        && lines.first() == Some(&"param,metric,mu,sigma")
        && lines.len() == 1 + 44
        && lines[1..].iter().enumerate().all(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            f.len() == 4
                && f[0] == names[i / 4]
                && f[1] == metrics[i % 4]
                && f[2..]
                    .iter()
                    .all(|v| v.parse::<f64>().is_ok_and(|x| x >= 0.0))
        });
    verdict(
        9,
        "Morris harness correctness",
        spread_ok && mock_ok && shape_ok,
        &format!(
            "mu/sigma [1,2,3] {}, mocked sweep mu {m:.6} sigma {s:.6} (hand {hand_mu:.6}, {hand_sigma:.6}), \
             sweep CSV {} data rows",
            if spread_ok { "exact" } else { "wrong" },
            lines.len().saturating_sub(1)
        ),
    );
}

#[test]
fn criterion_10_adam_hand_check() {
    let _g = serial();
    let mut state = AdamState::with_rates(1, 0.9, 0.999, 1e-8);
    let mut theta = [1.0];
    adam_step(&mut theta, &[0.5], &mut state, 0.1).unwrap();
    let expected = -0.1 * 0.5 / (0.5 + 1e-8);
    let delta = theta[0] - 1.0;
    let moments_ok =
        (state.m[0] - 0.05).abs() <= 1e-15 && (state.v[0] - 0.00025).abs() <= 1e-15 && state.t == 1;
    verdict(
        10,
        "Adam hand-check",
        (delta - expected).abs() <= 1e-12 && moments_ok,
        &format!("step {delta:.15e}, expected {expected:.15e}"),
    );
}
