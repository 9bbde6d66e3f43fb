//! Acceptance suite. Prints one PASS/FAIL line per criterion and a summary.
//! Failures only change the exit status under `--strict`; `--paper-scale`
//! adds the long profile.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use ickan::bspline::{eval_basis, reparameterize, KnotVector, Parameterization, Spline};
use ickan::evaluation::{
    evaluate_path, gamma_samples, parity, relative_rms, Path, PATHS, PATH_SAMPLES,
};
use ickan::fem::{
    generate_dataset, plate_with_hole, solve, square_mesh, validation_mesh, Mesh, NoiseOptions,
    SolverOptions, Specimen, SpecimenDataset,
};
use ickan::hyperelasticity::{fd_gradient, objectivity_check, MaterialModel, BENCHMARKS};
use ickan::network::{Architecture, IckanModel, Mode};
use ickan::symreg::{distill, LAMBDA_SYM};
use ickan::trainer::{train_ensemble, TrainConfig, TrainReport};
use nalgebra::{Matrix2, Matrix3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

struct Suite {
    failures: usize,
}

impl Suite {
    fn run(&mut self, id: &str, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        let in_time = elapsed <= limit;
        let pass = out.pass && in_time;
        if !pass {
            self.failures += 1;
        }
        println!(
            "{} {id}. {name} ({:.1} s, limit {} s): {}{}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            limit.as_secs(),
            out.detail,
            if in_time { "" } else { " [over time limit]" }
        );
    }
}

fn check(ok: bool, label: &str, value: String, details: &mut Vec<String>) -> bool {
    details.push(format!("{label} {value}{}", if ok { "" } else { " (!)" }));
    ok
}

fn spline_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut pou: f64 = 0.0;
    let mut convex_ok = true;
    let mut deriv: f64 = 0.0;
    for _ in 0..10_000 {
        let order = rng.random_range(0..=9);
        let n = order + 1 + rng.random_range(0..20);
        let lo = rng.random_range(-10.0..10.0);
        let width = rng.random_range(0.1..40.0);
        let kv = KnotVector::uniform(lo, lo + width, order, n).unwrap();
        let x = lo + width * rng.random::<f64>();
        pou = pou.max((eval_basis(x, &kv).iter().sum::<f64>() - 1.0).abs());

        let raw: Vec<f64> = (0..rng.random_range(3..40)).map(|_| rng.random_range(-5.0..5.0)).collect();
        let c = reparameterize(&raw);
        let tol = 8.0 * f64::EPSILON * c.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        for i in 0..c.len() - 2 {
            convex_ok &= c[i + 1] >= c[i] && c[i + 2] >= c[i + 1];
            convex_ok &= c[i + 2] - 2.0 * c[i + 1] + c[i] >= -tol;
        }

        let order = rng.random_range(2..=6);
        let n = order + 1 + rng.random_range(0..10);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = Spline::new(
            KnotVector::uniform(lo, lo + width, order, n).unwrap(),
            raw,
            Parameterization::MonotoneConvex,
        )
        .unwrap();
        let x = lo - 0.5 * width + 2.0 * width * rng.random::<f64>();
        let h = 1e-6 * width;
        let v = s.eval(x);
        let fd = (s.eval(x + h).value - s.eval(x - h).value) / (2.0 * h);
        deriv = deriv.max((fd - v.d1).abs() / v.d1.abs().max(1.0));
        let near_end = (x - lo).abs() < 2.0 * h || (x - lo - width).abs() < 2.0 * h;
        if order >= 3 && !near_end {
            let fd2 = (s.eval(x + h).d1 - s.eval(x - h).d1) / (2.0 * h);
            deriv = deriv.max((fd2 - v.d2).abs() / v.d2.abs().max(1.0));
        }
    }
    let mut d = Vec::new();
    let ok = check(pou < 1e-12, "partition-of-unity err", format!("{pou:.1e}"), &mut d)
        & check(convex_ok, "monotone-convex control points on 1e4 draws", format!("{convex_ok}"), &mut d)
        & check(deriv < 1e-5, "derivative vs FD rel err", format!("{deriv:.1e}"), &mut d);
    Outcome {
        pass: ok,
        detail: d.join(", "),
    }
}

fn random_model(seed: u64, mode: Mode) -> IckanModel {
    let arch = Architecture {
        mode,
        ..Architecture::default()
    };
    let mut m = IckanModel::random(&arch, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    m.grid_initialize().unwrap();
    m
}

fn convexity_suite() -> Outcome {
    let mut min_grad = f64::INFINITY;
    let mut min_eig = f64::INFINITY;
    let mut jensen = f64::NEG_INFINITY;
    for seed in 0..100 {
        let m = random_model(seed, Mode::Constrained);
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let mut k = || -> [f64; 3] { std::array::from_fn(|_| rng.random_range(-5.0..25.0)) };
        for _ in 0..1000 {
            let (a, b) = (k(), k());
            let (_, g, h) = m.forward_with_input_derivatives(&a).unwrap();
            min_grad = min_grad.min(g.iter().copied().fold(f64::INFINITY, f64::min));
            let eig = Matrix3::from_fn(|r, c| h[r][c]).symmetric_eigenvalues();
            min_eig = min_eig.min(eig.min() / (1.0 + eig.amax()));
            let t = 0.5 * (a[0] - a[0].floor());
            let mix: [f64; 3] = std::array::from_fn(|i| t * a[i] + (1.0 - t) * b[i]);
            let rhs = t * m.forward(&a).unwrap() + (1.0 - t) * m.forward(&b).unwrap();
            let gap = (m.forward(&mix).unwrap() - rhs) / (1.0 + rhs.abs());
            jensen = jensen.max(gap);
        }
    }
    let mut d = Vec::new();
    let ok = check(min_grad >= -1e-12, "min gradient", format!("{min_grad:.2e}"), &mut d)
        & check(min_eig >= -1e-8, "min scaled Hessian eigenvalue", format!("{min_eig:.2e}"), &mut d)
        & check(jensen <= 1e-10, "max Jensen gap", format!("{jensen:.2e}"), &mut d);
    Outcome {
        pass: ok,
        detail: format!("100 models x 1000 samples: {}", d.join(", ")),
    }
}

fn mechanics_suite() -> Outcome {
    let mut models: Vec<MaterialModel> = BENCHMARKS.iter().map(|n| MaterialModel::benchmark(n).unwrap()).collect();
    models.push(MaterialModel::ickan(random_model(42, Mode::Constrained)).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut fs = Vec::new();
    while fs.len() < 100 {
        let f = Matrix3::identity() + Matrix3::from_fn(|_, _| rng.random_range(-0.3..0.3));
        if f.determinant() > 0.4 && (f - Matrix3::identity()).norm() > 0.05 {
            fs.push(f);
        }
    }
    let mut stress_err: f64 = 0.0;
    let mut objectivity: f64 = 0.0;
    let mut ratio = (f64::INFINITY, f64::NEG_INFINITY);
    let mut p_id: f64 = 0.0;
    for m in &models {
        p_id = p_id.max(m.stress(&Matrix3::identity()).unwrap().norm());
        for f in &fs {
            let p = m.stress(f).unwrap();
            if matches!(m, MaterialModel::Ogden(_)) {
                let coarse = fd_gradient(|x| m.energy(x), f, 2e-2, 9).unwrap();
                let fine = fd_gradient(|x| m.energy(x), f, 1e-2, 9).unwrap();
                let r = (coarse - p).norm() / (fine - p).norm();
                ratio = (ratio.0.min(r), ratio.1.max(r));
            } else {
                let fd = fd_gradient(|x| m.energy(x), f, 1e-6, 9).unwrap();
                stress_err = stress_err.max((p - fd).norm() / p.norm());
            }
            let axis = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let r = Rotation3::from_axis_angle(&Unit::new_normalize(axis), rng.random_range(-3.0..3.0));
            objectivity = objectivity.max(objectivity_check(m, f, r.matrix()).unwrap());
        }
    }
    let w_ab = MaterialModel::benchmark("AB").unwrap().energy(&Matrix3::identity()).unwrap().abs();
    let mut d = Vec::new();
    let ok = check(stress_err < 1e-5, "stress vs FD rel err", format!("{stress_err:.1e}"), &mut d)
        & check(
            ratio.0 > 3.5 && ratio.1 < 4.5,
            "OG Richardson ratio range",
            format!("[{:.3}, {:.3}]", ratio.0, ratio.1),
            &mut d,
        )
        & check(objectivity < 1e-10, "|W(RF) - W(F)|", format!("{objectivity:.1e}"), &mut d)
        & check(p_id < 1e-10, "|P(I)|", format!("{p_id:.1e}"), &mut d)
        & check(w_ab < 1e-6, "W_AB(I)", format!("{w_ab:.1e}"), &mut d);
    Outcome {
        pass: ok,
        detail: format!("7 kinds x 100 F: {}", d.join(", ")),
    }
}

fn patch_suite() -> Outcome {
    let a = Matrix2::new(1.15, 0.08, -0.05, 0.92);
    let mut worst: f64 = 0.0;
    let mut iters = 0;
    for mesh in [square_mesh(1, 1).unwrap(), square_mesh(10, 10).unwrap()] {
        for name in BENCHMARKS {
            let spec = Specimen::affine(mesh.clone(), &a).unwrap();
            let sol = solve(
                &spec.mesh,
                &spec.partition,
                &MaterialModel::benchmark(name).unwrap(),
                &spec.target(1.0),
                None,
                &SolverOptions::default(),
            )
            .unwrap();
            iters = iters.max(sol.iterations);
            for (n, p) in spec.mesh.nodes().iter().enumerate() {
                let exact = (a - Matrix2::identity()) * nalgebra::Vector2::new(p[0], p[1]);
                worst = worst
                    .max((sol.u[2 * n] - exact[0]).abs())
                    .max((sol.u[2 * n + 1] - exact[1]).abs());
            }
        }
    }
    let mut d = Vec::new();
    let ok = check(worst < 1e-10, "max nodal error", format!("{worst:.1e}"), &mut d)
        & check(iters <= 3, "max Newton iterations", format!("{iters}"), &mut d);
    Outcome {
        pass: ok,
        detail: format!("2- and 200-element meshes, 6 materials: {}", d.join(", ")),
    }
}

struct Trained {
    model: IckanModel,
    reports: Vec<TrainReport>,
}

fn nh_dataset(mesh: &Mesh, sigma: f64) -> SpecimenDataset {
    let spec = Specimen::biaxial(mesh.clone()).unwrap();
    let noise = NoiseOptions {
        sigma,
        seed: 0,
        per_dof_constant: false,
    };
    generate_dataset(
        &spec,
        &MaterialModel::NeoHookean,
        &[0.1, 0.2, 0.3],
        &noise,
        &SolverOptions::default(),
    )
    .unwrap()
}

fn train_desk(ds: &SpecimenDataset, mode: Mode) -> Trained {
    let cfg = TrainConfig {
        epochs: 1000,
        ensemble_size: 3,
        architecture: Architecture {
            mode,
            ..Architecture::default()
        },
        ..TrainConfig::default()
    };
    let (model, reports) = train_ensemble(&cfg, ds).unwrap();
    Trained { model, reports }
}

fn rediscovery(trained: &[(f64, Trained)]) -> Outcome {
    let truth = MaterialModel::NeoHookean;
    let gammas = gamma_samples(1.0, PATH_SAMPLES).unwrap();
    let mut ok = true;
    let mut d = Vec::new();
    for (sigma, t) in trained {
        let limit = if *sigma == 0.0 { 0.05 } else { 0.10 };
        let learned = MaterialModel::ickan(t.model.clone()).unwrap();
        let best = t.reports.iter().find(|r| r.selected).unwrap();
        let ratio = best.final_loss / best.losses[0];
        ok &= check(ratio < 1e-2, &format!("sigma={sigma:e}: loss ratio"), format!("{ratio:.1e}"), &mut d);
        for path in PATHS {
            let a = evaluate_path(&truth, path, &gammas).unwrap();
            let b = evaluate_path(&learned, path, &gammas).unwrap();
            let e = relative_rms(&a, &b).unwrap();
            ok &= check(e < limit, &format!("{path}"), format!("{e:.4}"), &mut d);
        }
        let coef = distill(&t.model, LAMBDA_SYM).unwrap().energy.coefficients_at_origin().unwrap();
        ok &= check((0.4..=0.6).contains(&coef[0]), "K1 coef", format!("{:.4}", coef[0]), &mut d);
        ok &= check((1.35..=1.65).contains(&coef[2]), "K3 coef", format!("{:.4}", coef[2]), &mut d);
    }
    Outcome {
        pass: ok,
        detail: d.join(", "),
    }
}

fn validation(model: &IckanModel) -> Outcome {
    let spec = Specimen::uniaxial(validation_mesh(12, 8).unwrap()).unwrap();
    let deltas: Vec<f64> = (1..=100).map(|t| 0.01 * t as f64).collect();
    let learned = MaterialModel::ickan(model.clone()).unwrap();
    match parity(&spec, &MaterialModel::NeoHookean, &learned, &deltas, &SolverOptions::default()) {
        Ok(r) => {
            let mut d = Vec::new();
            let ok = check(r.r2_itil1 > 0.95, "R2(I1~)", format!("{:.5}", r.r2_itil1), &mut d)
                & check(r.r2_j > 0.95, "R2(J)", format!("{:.5}", r.r2_j), &mut d);
            Outcome {
                pass: ok,
                detail: format!(
                    "{} nodes, 100 load levels, model trained at sigma=1e-4: {}",
                    spec.mesh.n_nodes(),
                    d.join(", ")
                ),
            }
        }
        Err(e) => Outcome {
            pass: false,
            detail: format!("solve failed: {e}"),
        },
    }
}

/// Most negative second difference of `W` over sampled points and
/// directions in the unit cube of `K`.
fn min_second_difference(model: &IckanModel) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = 0.05;
    let mut worst = f64::INFINITY;
    for _ in 0..10_000 {
        let k: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..1.0));
        let dir = Unit::new_normalize(Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)));
        let at = |s: f64| model.forward(&std::array::from_fn(|i| k[i] + s * h * dir[i])).unwrap();
        worst = worst.min(at(1.0) - 2.0 * at(0.0) + at(-1.0));
    }
    worst
}

fn ablation(vanilla: &Trained, constrained: &Trained) -> Outcome {
    let v = min_second_difference(&vanilla.model);
    let c = min_second_difference(&constrained.model);
    let mut d = Vec::new();
    let ok = check(v < -1e-10, "vanilla min second difference", format!("{v:.2e}"), &mut d);
    d.push(format!("constrained min second difference {c:.2e}"));
    Outcome {
        pass: ok,
        detail: d.join(", "),
    }
}

/// Long profile at the published resolution: six materials, two noise
/// levels, ensembles of ten.
fn paper_scale() -> Outcome {
    let mesh = plate_with_hole(19, 36, 0.2).unwrap();
    let snapshots = |name: &str| match name {
        "NH" | "GT" => 3,
        "IH" | "HW" => 8,
        "AB" => 10,
        _ => 6,
    };
    let mut d = vec![format!("{} training nodes", mesh.n_nodes())];
    let mut ok = true;
    for name in BENCHMARKS {
        let truth = MaterialModel::benchmark(name).unwrap();
        let step = if matches!(name, "AB" | "OG") { 0.05 } else { 0.1 };
        let deltas: Vec<f64> = (1..=snapshots(name)).map(|t| step * t as f64).collect();
        for sigma in [1e-4, 1e-3] {
            let noise = NoiseOptions {
                sigma,
                seed: 0,
                per_dof_constant: false,
            };
            let spec = Specimen::biaxial(mesh.clone()).unwrap();
            let ds = generate_dataset(&spec, &truth, &deltas, &noise, &SolverOptions::default()).unwrap();
            let cfg = TrainConfig::default();
            let (model, _) = match train_ensemble(&cfg, &ds) {
                Ok(r) => r,
                Err(e) => {
                    ok = false;
                    d.push(format!("{name} sigma={sigma:e}: training failed: {e}"));
                    continue;
                }
            };
            let learned = MaterialModel::ickan(model.clone()).unwrap();
            let errs: Vec<String> = PATHS
                .iter()
                .map(|&p: &Path| {
                    let g = gamma_samples(p.gamma_max(), PATH_SAMPLES).unwrap();
                    let a = evaluate_path(&truth, p, &g);
                    let b = evaluate_path(&learned, p, &g);
                    match (a, b) {
                        (Ok(a), Ok(b)) => format!("{p} {:.3}", relative_rms(&a, &b).unwrap()),
                        _ => format!("{p} n/a"),
                    }
                })
                .collect();
            d.push(format!("{name} sigma={sigma:e}: {}", errs.join(" ")));
            if sigma == 1e-3 && matches!(name, "IH" | "AB") {
                let target = if name == "IH" { 0.99 } else { 0.95 };
                let vspec = Specimen::uniaxial(validation_mesh(33, 36).unwrap()).unwrap();
                let vdeltas: Vec<f64> = (1..=100).map(|t| 0.01 * t as f64).collect();
                match parity(&vspec, &truth, &learned, &vdeltas, &SolverOptions::default()) {
                    Ok(r) => {
                        ok &= check(
                            r.r2_itil1 > target && r.r2_j > target,
                            &format!("{name} validation R2 (I1~, J)"),
                            format!("({:.4}, {:.4})", r.r2_itil1, r.r2_j),
                            &mut d,
                        )
                    }
                    Err(e) => {
                        ok = false;
                        d.push(format!("{name} validation failed: {e}"));
                    }
                }
            }
        }
    }
    Outcome {
        pass: ok,
        detail: d.join("; "),
    }
}

fn main() -> ExitCode {
    let paper = std::env::args().any(|a| a == "--paper-scale");
    let strict = std::env::args().any(|a| a == "--strict");
    let mut suite = Suite { failures: 0 };
    let secs = Duration::from_secs;
    suite.run("1", "spline soundness", secs(10), spline_soundness);
    suite.run("2", "convexity and monotonicity", secs(60), convexity_suite);
    suite.run("3", "mechanics consistency", secs(60), mechanics_suite);
    suite.run("4", "FEM patch test", secs(10), patch_suite);

    let mesh = plate_with_hole(10, 18, 0.2).unwrap();
    let start = Instant::now();
    let trained: Vec<(f64, Trained)> = [0.0, 1e-4]
        .into_iter()
        .map(|s| (s, train_desk(&nh_dataset(&mesh, s), Mode::Constrained)))
        .collect();
    let training_time = start.elapsed();
    suite.run("5", "desk-scale NH rediscovery", secs(30 * 60), || {
        let mut out = rediscovery(&trained);
        out.detail = format!(
            "{} nodes, training {:.1} s, {}",
            mesh.n_nodes(),
            training_time.as_secs_f64(),
            out.detail
        );
        out
    });
    suite.run("6", "desk-scale validation solve", secs(10 * 60), || validation(&trained[1].1.model));
    suite.run("7", "vanilla ablation witness", secs(10 * 60), || {
        let vanilla = train_desk(&nh_dataset(&mesh, 0.0), Mode::Vanilla);
        ablation(&vanilla, &trained[0].1)
    });
    if paper {
        suite.run("8", "paper-scale profile", secs(24 * 3600), paper_scale);
    } else {
        println!("SKIP 8. paper-scale profile SKIPPED (opt-in via --paper-scale)");
    }
    if suite.failures == 0 {
        println!("acceptance: all criteria passed");
        return ExitCode::SUCCESS;
    }
    println!(
        "acceptance: {} criterion(s) FAILED{}",
        suite.failures,
        if strict { "" } else { " (exit status 0; pass --strict to fail the run)" }
    );
    if strict {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
