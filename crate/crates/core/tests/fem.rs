use ickan::evaluation::element_invariants;
use ickan::fem::{
    plate_with_hole, solve, square_mesh, validation_mesh, Mesh, SolverOptions, Specimen,
};
use ickan::hyperelasticity::{MaterialModel, BENCHMARKS};
use nalgebra::Matrix2;

fn patch(mesh: Mesh, model: &MaterialModel) -> (f64, usize) {
    let a = Matrix2::new(1.15, 0.08, -0.05, 0.92);
    let spec = Specimen::affine(mesh, &a).unwrap();
    let sol = solve(
        &spec.mesh,
        &spec.partition,
        model,
        &spec.target(1.0),
        None,
        &SolverOptions::default(),
    )
    .unwrap();
    let mut worst: f64 = 0.0;
    for (n, p) in spec.mesh.nodes().iter().enumerate() {
        let exact = (a - Matrix2::identity()) * nalgebra::Vector2::new(p[0], p[1]);
        worst = worst.max((sol.u[2 * n] - exact[0]).abs()).max((sol.u[2 * n + 1] - exact[1]).abs());
    }
    (worst, sol.iterations)
}

#[test]
fn patch_test_two_elements() {
    for name in BENCHMARKS {
        let (err, iters) = patch(square_mesh(1, 1).unwrap(), &MaterialModel::benchmark(name).unwrap());
        assert!(err < 1e-10, "{name}: {err}");
        assert!(iters <= 3, "{name}: {iters}");
    }
}

#[test]
fn patch_test_two_hundred_elements() {
    let mesh = square_mesh(10, 10).unwrap();
    assert_eq!(mesh.n_elements(), 200);
    for name in BENCHMARKS {
        let (err, iters) = patch(mesh.clone(), &MaterialModel::benchmark(name).unwrap());
        assert!(err < 1e-10, "{name}: {err}");
        assert!(iters <= 3, "{name}: {iters}");
    }
}

#[test]
fn newton_converges_quadratically() {
    let spec = Specimen::biaxial(plate_with_hole(6, 8, 0.2).unwrap()).unwrap();
    let opts = SolverOptions {
        rel_tol: 1e-13,
        ..SolverOptions::default()
    };
    let sol = solve(
        &spec.mesh,
        &spec.partition,
        &MaterialModel::Isihara,
        &spec.target(0.3),
        None,
        &opts,
    )
    .unwrap();
    let r = &sol.residuals;
    assert!(r.len() >= 3, "{r:?}");
    // Once in the asymptotic range the error exponent roughly doubles.
    let k = r.iter().position(|&v| v < 1e-3).expect("residual drops");
    if k + 1 < r.len() && r[k + 1] > 1e-13 {
        assert!(r[k + 1] < 100.0 * r[k] * r[k], "{r:?}");
    }
    assert!(*r.last().unwrap() < 1e-12);
}

#[test]
fn plate_strain_field_is_heterogeneous() {
    let spec = Specimen::biaxial(plate_with_hole(10, 18, 0.2).unwrap()).unwrap();
    let sol = solve(
        &spec.mesh,
        &spec.partition,
        &MaterialModel::NeoHookean,
        &spec.target(0.1),
        None,
        &SolverOptions::default(),
    )
    .unwrap();
    assert!(sol.reactions.iter().all(|r| r.is_finite()));
    let (itil1, _) = element_invariants(&spec, &sol.u).unwrap();
    let (lo, hi) = itil1.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi - lo > 1e-3, "{lo} {hi}");
    // Reactions balance on opposite edges.
    assert!((sol.reactions[0] + sol.reactions[2]).abs() < 1e-8);
    assert!((sol.reactions[1] + sol.reactions[3]).abs() < 1e-8);
}

#[test]
fn validation_specimen_solves_with_every_benchmark() {
    let spec = Specimen::uniaxial(validation_mesh(6, 4).unwrap()).unwrap();
    for name in BENCHMARKS {
        let model = MaterialModel::benchmark(name).unwrap();
        let mut u: Option<Vec<f64>> = None;
        for t in 1..=5 {
            let sol = solve(
                &spec.mesh,
                &spec.partition,
                &model,
                &spec.target(0.05 * t as f64),
                u.as_deref(),
                &SolverOptions::default(),
            )
            .unwrap();
            u = Some(sol.u);
        }
    }
}
