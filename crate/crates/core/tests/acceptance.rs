//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are reported as FAIL without failing
//! the process; any other failure, or a known failure that starts passing,
//! exits nonzero.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use acot::advgen::mlp::flatten;
use acot::advgen::wgan::{
    classifier_loss_and_grad, critic_loss_and_grad, generator_loss_and_grad, rectify_normalize, sample_batch,
};
use acot::advgen::{random_negatives, train_classifier, train_wgan, Arch, ClassifierConfig, GanConfig, MlpParams};
use acot::classify::{default_gamma, grassmann_kernel};
use acot::data::{make_synthetic, sequence_mean, RngSeed, SyntheticConfig};
use acot::experiment::{self, Settings};
use acot::grassmann::{GrassmannObjective, RayleighObjective, SubspacePoint};
use acot::linalg::{gaussian_vector, random_rotation};
use acot::ot::{exact_ot_uniform, ipot, transport_cost, uniform, CostMatrix, IpotConfig, Metric};
use acot::representation::{
    learn_representation, ordering_satisfaction, AcotConfig, SubspaceObjective, SubspaceStep,
};
use acot::srot::{gram_residual, out_of_subspace_energy, pythagorean_check};

const KNOWN_FAILURES: &[&str] = &["AC-7"];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------

fn ac1() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut ok = true;
    for _ in 0..1000 {
        let d = rng.random_range(2..=8);
        let k = rng.random_range(1..d);
        let u = SubspacePoint::random(d, k, &mut rng).unwrap();
        let x = gaussian_vector(d, &mut rng);
        let y = gaussian_vector(d, &mut rng);
        let (lhs, rhs) = pythagorean_check(&x, &y, &u);
        let rel = (lhs - rhs).abs() / (1.0 + lhs);
        worst = worst.max(rel);
        ok &= rel <= 1e-10;
    }
    verdict(ok, format!("1000 triples, worst |lhs-rhs|/(1+lhs) = {worst:.2e}"))
}

fn ac2() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = IpotConfig {
        outer_iters: 1000,
        ..IpotConfig::default()
    };
    let (mut worst_gap, mut worst_marg) = (0.0f64, 0.0f64);
    let mut ok = true;
    for _ in 0..20 {
        let n = rng.random_range(2..=6);
        let c = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>());
        let cost = CostMatrix::from_raw(c, Metric::SquaredEuclidean).unwrap();
        let (_, exact) = exact_ot_uniform(&cost).unwrap();
        let pi = ipot(&cost, &uniform(n), &uniform(n), &cfg).unwrap();
        let got = transport_cost(&pi, &cost).unwrap();
        let gap = (got - exact).abs() / (1.0 + exact);
        worst_gap = worst_gap.max(gap);
        worst_marg = worst_marg.max(pi.marginal_violation());
        ok &= gap <= 1e-3 && pi.marginal_violation() <= 1e-6;
    }
    verdict(
        ok,
        format!("20 instances, worst cost gap {worst_gap:.2e}, worst marginal violation {worst_marg:.2e}"),
    )
}

fn ac3() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let s = Settings::new().with("seed", 1).with("instances", 100);
    let reports = experiment::verify_bounds(&s, dir.path()).unwrap();
    let sandwich = reports.iter().filter(|r| r.sandwich_ok).count();
    let worst = reports
        .iter()
        .map(|r| r.slack_lower.min(r.slack_upper) / r.epsilon)
        .fold(f64::INFINITY, f64::min);

    let s = Settings::new().with("seed", 2).with("instances", 20).with("full_rank", true);
    let full = experiment::verify_bounds(&s, dir.path()).unwrap();
    let collapsed = full
        .iter()
        .filter(|r| {
            (r.p2 - r.c2).abs() <= r.epsilon && (r.c2 - r.s2).abs() <= r.epsilon && r.residual == 0.0 && r.k == r.d
        })
        .count();
    verdict(
        sandwich == 100 && collapsed == 20,
        format!(
            "sandwich_ok {sandwich}/100 (min slack/eps {worst:.3}), k=d collapse {collapsed}/20"
        ),
    )
}

/// Adaptive random search for `max_U (1/m) Σ ‖(I − UUᵀ)y‖²`: 1,000 uniform
/// draws, then 9,000 Gaussian perturbations of the incumbent with a step
/// size that grows on success and shrinks on failure.
fn random_search_residual(y: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> f64 {
    let d = y.nrows();
    let eval = |u: &DMatrix<f64>| out_of_subspace_energy(y, &SubspacePoint::from_span(u).unwrap());
    let mut best_u = DMatrix::from_fn(d, k, |_, _| rng.sample(StandardNormal));
    let mut best = eval(&best_u);
    for _ in 1..1000 {
        let u = DMatrix::from_fn(d, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let v = eval(&u);
        if v > best {
            best = v;
            best_u = u;
        }
    }
    best_u = SubspacePoint::from_span(&best_u).unwrap().into_basis();
    let mut step = 0.3;
    for _ in 0..9000 {
        let cand = &best_u + DMatrix::from_fn(d, k, |_, _| step * rng.sample::<f64, _>(StandardNormal));
        let Ok(point) = SubspacePoint::from_span(&cand) else {
            continue;
        };
        let v = out_of_subspace_energy(y, &point);
        if v > best {
            best = v;
            best_u = point.into_basis();
            step *= 1.5;
        } else {
            step = (step * 0.95).max(1e-6);
        }
    }
    best
}

fn ac4() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut worst_match, mut worst_bound) = (0.0f64, f64::INFINITY);
    let mut ok = true;
    for _ in 0..50 {
        let d = rng.random_range(2..=6);
        let m = rng.random_range(2..=8);
        let y = DMatrix::from_fn(d, m, |_, _| rng.sample(StandardNormal));
        for k in 1..d {
            let exact = gram_residual(&y, k).unwrap();
            let found = random_search_residual(&y, k, &mut rng);
            worst_bound = worst_bound.min(exact - found);
            ok &= found <= exact + 1e-9;
            if k == d - 1 {
                worst_match = worst_match.max(exact - found);
                ok &= exact - found <= 1e-3;
            }
        }
    }
    verdict(
        ok,
        format!("50 instances, k=d-1 worst gap {worst_match:.2e}, min (eig - search) {worst_bound:.2e}"),
    )
}

// ---------------------------------------------------------------------------
// AC-5 gradient checks

fn rel_ok(analytic: f64, fd: f64) -> bool {
    let err = (analytic - fd).abs();
    err <= 1e-4 * analytic.abs().max(fd.abs()) || err < 1e-9
}

fn matrix_fd_ok<O: GrassmannObjective>(obj: &O, u: &DMatrix<f64>) -> bool {
    let g = obj.euclidean_grad(u);
    let h = 1e-6;
    (0..u.len()).all(|i| {
        let mut up = u.clone();
        up[i] += h;
        let mut um = u.clone();
        um[i] -= h;
        let fd = (obj.value(&up) - obj.value(&um)) / (2.0 * h);
        rel_ok(g[i], fd)
    })
}

fn unit_nonneg(d: usize, n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(d, n, |_, _| rng.random::<f64>() + 0.01);
    for mut c in m.column_iter_mut() {
        let norm = c.norm();
        c /= norm;
    }
    m
}

/// Checks `count` random parameter coordinates of `loss` against central
/// differences.
fn params_fd_ok(
    p: &MlpParams,
    analytic: &[f64],
    loss: &dyn Fn(&MlpParams) -> f64,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> bool {
    let h = 1e-5;
    (0..count).all(|_| {
        let i = rng.random_range(0..p.num_params());
        let mut plus = p.clone();
        *plus.param_mut(i) += h;
        let mut minus = p.clone();
        *minus.param_mut(i) -= h;
        rel_ok(analytic[i], (loss(&plus) - loss(&minus)) / (2.0 * h))
    })
}

fn ac5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts = Vec::new();
    let mut ok = true;

    // Rayleigh
    let mut passed = 0;
    for _ in 0..50 {
        let d = rng.random_range(2..=6);
        let k = rng.random_range(1..=d);
        let a = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let obj = RayleighObjective::new(&a + a.transpose());
        let u = DMatrix::from_fn(d, k, |_, _| rng.sample::<f64, _>(StandardNormal));
        passed += usize::from(matrix_fd_ok(&obj, &u));
    }
    ok &= passed == 50;
    counts.push(format!("rayleigh {passed}/50"));

    // ACOT subspace objective, both gradient forms
    for step in [SubspaceStep::Surrogate, SubspaceStep::ExactTransport] {
        let (mut checked, mut passed) = (0, 0);
        while checked < 60 {
            let d = rng.random_range(2..=6);
            let k = rng.random_range(1..d);
            let x = unit_nonneg(d, rng.random_range(2..=6), &mut rng);
            let y = unit_nonneg(d, rng.random_range(1..=6), &mut rng);
            let plan = DMatrix::from_fn(x.ncols(), y.ncols(), |_, _| rng.random::<f64>());
            let plan = &plan / plan.sum();
            let cfg = AcotConfig {
                k,
                subspace_step: step,
                metric: if checked % 2 == 0 { Metric::SquaredEuclidean } else { Metric::Euclidean },
                beta1: rng.random_range(0.0..2.0),
                beta2: rng.random_range(0.0..10.0),
                ..AcotConfig::default()
            };
            let obj = SubspaceObjective::new(&x, &y, &plan, &cfg).unwrap();
            let u = DMatrix::from_fn(d, k, |_, _| rng.random_range(-1.0..1.0));
            if obj.min_abs_hinge(&u) < 1e-4 {
                continue;
            }
            checked += 1;
            passed += usize::from(matrix_fd_ok(&obj, &u));
        }
        ok &= passed == checked;
        counts.push(format!("acot {step:?} {passed}/{checked}"));
    }

    let ds = make_synthetic(
        &SyntheticConfig {
            sequences_per_class: 2,
            frames: 4,
            dim: 6,
            distractors: 3,
            ..SyntheticConfig::default()
        },
        RngSeed(50),
    )
    .unwrap();
    let means: Vec<DVector<f64>> = ds.sequences().iter().map(|s| sequence_mean(s).into_inner()).collect();

    // classifier
    let (mut checked, mut passed) = (0, 0);
    while checked < 50 {
        let clf = MlpParams::init(Arch::Classifier, ds.dim(), ds.num_classes(), &mut rng);
        let frames: Vec<(DVector<f64>, usize)> = (0..8)
            .map(|_| {
                let s = &ds.sequences()[rng.random_range(0..ds.len())];
                (s.frame(rng.random_range(0..s.len())), s.label())
            })
            .collect();
        let (_, g) = classifier_loss_and_grad(&clf, &frames).unwrap();
        let loss = |p: &MlpParams| classifier_loss_and_grad(p, &frames).unwrap().0;
        checked += 1;
        passed += usize::from(params_fd_ok(&clf, &flatten(&g), &loss, 5, &mut rng));
    }
    ok &= passed == checked;
    counts.push(format!("classifier {passed}/{checked}"));

    // critic
    let (mut checked, mut passed) = (0, 0);
    while checked < 50 {
        let critic = MlpParams::critic(ds.dim(), &mut rng);
        let real: Vec<DVector<f64>> = (0..6).map(|_| unit_nonneg(ds.dim(), 1, &mut rng).column(0).into_owned()).collect();
        let fake: Vec<DVector<f64>> = (0..6).map(|_| unit_nonneg(ds.dim(), 1, &mut rng).column(0).into_owned()).collect();
        let margin = real
            .iter()
            .chain(&fake)
            .map(|v| critic.forward_trace(v).unwrap().min_abs_relu_preactivation())
            .fold(f64::INFINITY, f64::min);
        if margin < 1e-3 {
            continue;
        }
        let (_, g) = critic_loss_and_grad(&critic, &real, &fake).unwrap();
        let loss = |p: &MlpParams| critic_loss_and_grad(p, &real, &fake).unwrap().0;
        checked += 1;
        passed += usize::from(params_fd_ok(&critic, &flatten(&g), &loss, 5, &mut rng));
    }
    ok &= passed == checked;
    counts.push(format!("critic {passed}/{checked}"));

    // generator
    let cfg = GanConfig::default();
    let (mut checked, mut passed) = (0, 0);
    while checked < 50 {
        let generator = MlpParams::generator(ds.dim(), &mut rng);
        let critic = MlpParams::critic(ds.dim(), &mut rng);
        let clf = MlpParams::init(Arch::Classifier, ds.dim(), ds.num_classes(), &mut rng);
        let batch = sample_batch(&ds, &means, cfg.sigma, 6, &mut rng);
        let margin = batch
            .iter()
            .map(|s| {
                let gt = generator.forward_trace(&s.z).unwrap();
                match rectify_normalize(&(&s.x + &gt.output)) {
                    Ok(r) => gt
                        .min_abs_relu_preactivation()
                        .min(r.min_abs_preactivation())
                        .min(critic.forward_trace(&r.y).unwrap().min_abs_relu_preactivation()),
                    Err(_) => 0.0,
                }
            })
            .fold(f64::INFINITY, f64::min);
        if margin < 1e-3 {
            continue;
        }
        let (_, g) = generator_loss_and_grad(&generator, &critic, &clf, &batch, &cfg, false).unwrap();
        let loss = |p: &MlpParams| generator_loss_and_grad(p, &critic, &clf, &batch, &cfg, false).unwrap().0.total;
        checked += 1;
        passed += usize::from(params_fd_ok(&generator, &flatten(&g), &loss, 5, &mut rng));
    }
    ok &= passed == checked;
    counts.push(format!("generator {passed}/{checked}"));

    verdict(ok, counts.join(", "))
}

// ---------------------------------------------------------------------------

fn monotone_fixture() -> SyntheticConfig {
    SyntheticConfig {
        noise_scale: 1.0,
        distractor_scale: 0.0,
        frame_noise_support: 2,
        frame_noise_spread: 0.5,
        ..SyntheticConfig::default()
    }
}

fn ac6() -> Verdict {
    let syn = monotone_fixture();
    let mut means = Vec::new();
    for beta2 in [10.0, 0.0] {
        let mut cfg = AcotConfig {
            beta2,
            eta: 0.01,
            ..AcotConfig::default()
        };
        cfg.rcg.max_iters = 20;
        let mut total = 0.0;
        for seed in 0..5u64 {
            let ds = make_synthetic(&syn, RngSeed(seed)).unwrap();
            let mut sum = 0.0;
            for (i, x) in ds.sequences().iter().enumerate() {
                let y = random_negatives(x, 2 * x.len(), RngSeed(seed).child(i as u64)).unwrap();
                let out = learn_representation(x, &y, &cfg).unwrap();
                sum += ordering_satisfaction(x, &out.subspace, cfg.eta).unwrap();
            }
            total += sum / ds.len() as f64;
        }
        means.push(total / 5.0);
    }
    verdict(
        means[0] >= 0.9 && means[1] <= 0.7,
        format!("satisfied {:.3} at beta2=10 vs {:.3} at beta2=0 (5 seeds)", means[0], means[1]),
    )
}

fn ac7() -> Verdict {
    let ds = make_synthetic(&SyntheticConfig::default(), RngSeed(7)).unwrap();
    let (train, _) = ds.split(1.0 / 3.0, RngSeed(7).child(1)).unwrap();
    let clf = train_classifier(&train, &ClassifierConfig::default(), RngSeed(7).child(2)).unwrap();
    let cfg = GanConfig::default();
    let gan = train_wgan(&train, &clf.params, &cfg, RngSeed(7).child(3)).unwrap();
    let last = gan.history.last().unwrap();
    let peak = gan
        .history
        .iter()
        .max_by(|a, b| a.loose_fooling.total_cmp(&b.loose_fooling))
        .unwrap();
    verdict(
        last.loose_fooling >= 0.6 && last.mean_perturbation_sq <= 0.5,
        format!(
            "classifier train acc {:.3}; after {} iters loose {:.3}, strict {:.3}, mean |x'|^2 {:.4}; \
             peak loose {:.3} at iter {}",
            clf.train_accuracy,
            last.iter,
            last.loose_fooling,
            last.strict_fooling,
            last.mean_perturbation_sq,
            peak.loose_fooling,
            peak.iter
        ),
    )
}

fn ac8() -> Verdict {
    let report = experiment::ablate(&Settings::new().with("seed", 7)).unwrap();
    let acc = |v: &str| report.table(v).unwrap().accuracy;
    let cot = report.table("cot_random").unwrap();
    let rows: Vec<String> = experiment::TABLE_VARIANTS
        .iter()
        .map(|v| format!("{v} {:.3}", acc(v)))
        .collect();
    verdict(
        acc("full") >= acc("avg_pool") + 0.05 && acc("acot") >= cot.accuracy,
        format!("{}; cot_random std {:.3}", rows.join(", "), cot.accuracy_std.unwrap_or(0.0)),
    )
}

fn ac9() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst_rot, mut worst_diag) = (0.0f64, 0.0f64);
    let mut in_range = true;
    for _ in 0..200 {
        let d = rng.random_range(2..=8);
        let k = rng.random_range(1..=d);
        let gamma = if rng.random::<bool>() { default_gamma(k) } else { rng.random_range(0.01..=1.0 / k as f64) };
        let u1 = SubspacePoint::random(d, k, &mut rng).unwrap();
        let u2 = SubspacePoint::random(d, k, &mut rng).unwrap();
        let kv = grassmann_kernel(&u1, &u2, gamma).unwrap();
        let r1 = u1.rotated(&random_rotation(k, &mut rng)).unwrap();
        let r2 = u2.rotated(&random_rotation(k, &mut rng)).unwrap();
        worst_rot = worst_rot.max((grassmann_kernel(&r1, &r2, gamma).unwrap() - kv).abs());
        let top = (gamma * k as f64).exp();
        worst_diag = worst_diag.max((grassmann_kernel(&u1, &u1, gamma).unwrap() - top).abs());
        in_range &= (1.0..=top + 1e-12).contains(&kv);
    }
    verdict(
        worst_rot <= 1e-10 && worst_diag <= 1e-9 && in_range,
        format!("200 pairs, rotation drift {worst_rot:.2e}, diagonal error {worst_diag:.2e}, in range {in_range}"),
    )
}

// ---------------------------------------------------------------------------
// AC-10: every command twice with the same seed

fn run_cli(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_acot")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "acot {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Every JSON, JSON-lines and CSV file under `dir`, keyed by relative path.
fn payloads(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(p) = stack.pop() {
        for entry in fs::read_dir(&p).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if matches!(path.extension().and_then(|e| e.to_str()), Some("json" | "jsonl" | "csv")) {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                files.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn pipeline_run(root: &Path) -> Vec<(String, Vec<u8>)> {
    let p = |sub: &str| root.join(sub).display().to_string();
    let mut stdout = Vec::new();
    stdout.push(run_cli(&[
        "--seed", "3", "--out-dir", &p("data"), "gen-data", "--sequences-per-class", "6",
    ]));
    stdout.push(run_cli(&[
        "--seed", "3", "--out-dir", &p("gan"), "train-gan", "--data", &p("data/train"), "--iters", "100",
        "--eval-every", "50",
    ]));
    let generator = p("gan/generator.json");
    for (part, out) in [("train", "repr_train"), ("test", "repr_test")] {
        stdout.push(run_cli(&[
            "--seed", "3", "--out-dir", &p(out), "learn-repr", "--data", &p(&format!("data/{part}")),
            "--generator", &generator, "--dump-coupling",
        ]));
    }
    for pipeline in ["avgpool_raw", "acot_avgpool_linear", "acot_subspace_knn"] {
        stdout.push(run_cli(&[
            "--seed", "3", "--out-dir", &p(&format!("classify_{pipeline}")), "classify", "--train",
            &p("data/train"), "--test", &p("data/test"), "--train-repr", &p("repr_train"), "--test-repr",
            &p("repr_test"), "--pipeline", pipeline,
        ]));
    }
    stdout.push(run_cli(&["--seed", "3", "--out-dir", &p("bounds"), "verify-bounds", "--instances", "5"]));
    stdout.push(run_cli(&[
        "--seed", "3", "--out-dir", &p("ablate"), "ablate", "--sequences-per-class", "6", "--iters", "100",
        "--random-trials", "2", "--k-sweep", "1,2",
    ]));
    let mut files = payloads(root);
    for (i, s) in stdout.into_iter().enumerate() {
        files.push((format!("stdout_{i}"), s.into_bytes()));
    }
    files
}

fn ac10() -> Verdict {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = pipeline_run(a.path());
    let second = pipeline_run(b.path());
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let same_set = first.len() == second.len() && first.iter().zip(&second).all(|(x, y)| x.0 == y.0);
    verdict(
        same_set && differing.is_empty(),
        format!("{} payloads compared across 6 commands, {} differ {:?}", first.len(), differing.len(), differing),
    )
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| a.starts_with("AC-")).collect();
    let criteria: [(&str, fn() -> Verdict, Duration); 10] = [
        ("AC-1", ac1, Duration::from_secs(1)),
        ("AC-2", ac2, Duration::from_secs(30)),
        ("AC-3", ac3, Duration::from_secs(300)),
        ("AC-4", ac4, Duration::from_secs(60)),
        ("AC-5", ac5, Duration::from_secs(120)),
        ("AC-6", ac6, Duration::from_secs(120)),
        ("AC-7", ac7, Duration::from_secs(300)),
        ("AC-8", ac8, Duration::from_secs(600)),
        ("AC-9", ac9, Duration::from_secs(1)),
        ("AC-10", ac10, Duration::from_secs(600)),
    ];
    let mut unexpected = Vec::new();
    for (name, run, budget) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == name) {
            continue;
        }
        let start = Instant::now();
        let v = run();
        let elapsed = start.elapsed();
        let pass = v.pass && elapsed <= budget;
        let timing = format!("{:.2}s of {}s", elapsed.as_secs_f64(), budget.as_secs());
        println!("{name} {} [{timing}] {}", if pass { "PASS" } else { "FAIL" }, v.detail);
        let known = KNOWN_FAILURES.contains(&name);
        if pass == known {
            unexpected.push(name);
        }
    }
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unexpected outcome for {unexpected:?}");
        ExitCode::FAILURE
    }
}
