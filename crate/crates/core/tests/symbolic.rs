use ickan::network::{Architecture, IckanModel};
use ickan::symreg::{distill, Candidate, SymbolicEnergy, LAMBDA_SYM, LIBRARY};
use nalgebra::Matrix3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model(seed: u64) -> IckanModel {
    let mut m = IckanModel::random(&Architecture::default(), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    m.grid_initialize().unwrap();
    m
}

#[test]
fn random_models_distill_with_high_parity() {
    for seed in 0..4 {
        let d = distill(&model(seed), LAMBDA_SYM).unwrap();
        assert!(d.parity_r2 > 0.95, "seed {seed}: {}", d.parity_r2);
        assert_eq!(d.fits.len(), 8);
        for f in &d.fits {
            assert!(f.fit.c >= 0.0 && f.fit.a >= 0.0);
        }
    }
}

#[test]
fn distillation_is_deterministic() {
    let m = model(9);
    let a = distill(&m, LAMBDA_SYM).unwrap();
    let b = distill(&m, LAMBDA_SYM).unwrap();
    assert_eq!(a.energy.to_prefix(), b.energy.to_prefix());
    assert_eq!(a.parity_r2, b.parity_r2);
}

#[test]
fn library_members_are_convex_and_non_decreasing() {
    for c in LIBRARY {
        for s in 0..200 {
            let x = -20.0 + 0.2 * s as f64;
            let h = 1e-3;
            let (l, m, r) = (c.eval(x - h), c.eval(x), c.eval(x + h));
            assert!(r >= m && m >= l, "{c:?} at {x}");
            assert!(l - 2.0 * m + r >= -1e-12 * (1.0 + m.abs()), "{c:?} at {x}");
        }
    }
    assert_eq!(Candidate::Identity.complexity(), 1);
    assert_eq!(Candidate::Softplus(3).complexity(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn distilled_energy_is_monotone_convex(seed in 0u64..500, k in prop::array::uniform3(-2.0f64..20.0)) {
        let e = distill(&model(seed), LAMBDA_SYM).unwrap().energy;
        let j = e.eval_k(&k).unwrap();
        for g in j.g {
            prop_assert!(g >= -1e-12);
        }
        let h = Matrix3::from_fn(|r, c| j.h[r][c]);
        let eig = h.symmetric_eigenvalues();
        prop_assert!(eig.min() >= -1e-8 * (1.0 + eig.amax()));
    }

    #[test]
    fn prefix_roundtrip_preserves_values(seed in 0u64..500, k in prop::array::uniform3(-2.0f64..20.0)) {
        let e = distill(&model(seed), LAMBDA_SYM).unwrap().energy;
        let back = SymbolicEnergy::from_prefix(&e.to_prefix()).unwrap();
        prop_assert_eq!(back.eval(&k).to_bits(), e.eval(&k).to_bits());
    }
}
