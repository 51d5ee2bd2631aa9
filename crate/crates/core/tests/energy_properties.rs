//! Energy density of a static cavity and of the non-resonant motion.

use std::f64::consts::PI;

use cavity::energy::{energy_density, energy_profile, static_density, total_energy};
use cavity::{CavityConfig, FieldSolution};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn static_density_is_casimir(lam in 0.5f64..3.0, fx in 0.01f64..0.99, t in 0.0f64..50.0) {
        let sol = FieldSolution::exact(CavityConfig::static_cavity(lam)).unwrap();
        let rho = energy_density(&sol, fx * lam, t).unwrap();
        prop_assert!((rho + PI / (24.0 * lam * lam)).abs() < 1e-10);
    }
}

#[test]
fn static_total_energy() {
    let sol = FieldSolution::exact(CavityConfig::static_cavity(2.0)).unwrap();
    let e = total_energy(&sol, 3.3).unwrap();
    assert!((e.value - 2.0 * static_density(2.0)).abs() < 1e-9);
}

#[test]
fn balanced_mirrors_do_not_pump_energy() {
    let cfg = CavityConfig::two_mirror(1.0, 0.01, 1.0, 1.0, 2, 0.0);
    let sol = FieldSolution::exact(cfg).unwrap();
    let e0 = static_density(1.0);
    for i in 0..30 {
        let t = 0.37 + i as f64;
        let e = total_energy(&sol, t).unwrap().value;
        assert!((e - e0).abs() < 5.0 * 0.01 * PI / 24.0, "t={t} {e}");
    }
}

#[test]
fn parallel_profile_matches_sequential() {
    let cfg = CavityConfig::two_mirror(1.0, 0.03, 1.0, 1.0, 3, 0.0);
    let sol = FieldSolution::exact(cfg).unwrap();
    let a = energy_profile(&sol, 7.3, 300, true).unwrap();
    let b = energy_profile(&sol, 7.3, 300, false).unwrap();
    assert_eq!(a, b);
}
