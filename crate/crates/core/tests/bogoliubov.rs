//! Bogoliubov coefficients against the Klein-Gordon inner product and the
//! selection rules of the q = 2 motion.

use cavity::photons::{beta_inner_product_oracle, bogoliubov_at, bogoliubov_grid, post_stop_time, unitarity_sum};
use cavity::{Backend, CavityConfig, FieldSolution};

fn single_shaker(stop: f64, backend: Backend) -> FieldSolution {
    let cfg = CavityConfig::two_mirror(1.0, 0.01, 0.0, 1.0, 2, 0.0);
    FieldSolution::new(cfg, backend).unwrap().extend_post_stop(stop).unwrap()
}

#[test]
fn quadrature_matches_inner_product_on_six_by_six_grid() {
    let sol = single_shaker(40.0, Backend::Exact);
    let t = post_stop_time(&sol).unwrap() + 0.3;
    for n in 1..=6 {
        for m in 1..=6 {
            let quad = bogoliubov_at(&sol, n, m, t).unwrap().beta;
            let oracle = beta_inner_product_oracle(&sol, n, m, t).unwrap();
            assert!((quad - oracle).norm() < 1e-3, "({n},{m}) {quad} {oracle}");
        }
    }
}

#[test]
fn modulus_is_independent_of_evaluation_time() {
    let sol = single_shaker(60.0, Backend::Exact);
    let t = post_stop_time(&sol).unwrap();
    let ns = [1, 2, 3, 4];
    let a = bogoliubov_grid(&sol, &ns, &ns, t, true).unwrap();
    let b = bogoliubov_grid(&sol, &ns, &ns, t + 2.71, true).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!((x.beta.norm() - y.beta.norm()).abs() < 1e-8, "{x:?} {y:?}");
    }
}

#[test]
fn odd_sum_of_indices_is_forbidden() {
    let sol = single_shaker(200.0, Backend::RgClosedShaker);
    let t = post_stop_time(&sol).unwrap();
    let ns: Vec<u32> = (1..=8).collect();
    let grid = bogoliubov_grid(&sol, &ns, &ns, t, true).unwrap();
    let max = grid.iter().map(|e| e.beta.norm()).fold(0.0, f64::max);
    for e in grid.iter().filter(|e| (e.n + e.m) % 2 == 1) {
        assert!(e.beta.norm() < 1e-3 * max, "({},{}) {}", e.n, e.m, e.beta.norm());
    }
}

#[test]
fn parallel_and_sequential_grids_agree() {
    let sol = single_shaker(40.0, Backend::RgClosedShaker);
    let t = post_stop_time(&sol).unwrap();
    let ns = [1, 2, 3, 5, 8];
    assert_eq!(bogoliubov_grid(&sol, &ns, &ns, t, true).unwrap(), bogoliubov_grid(&sol, &ns, &ns, t, false).unwrap());
}

#[test]
fn bogoliubov_transformation_is_unitary() {
    let sol = single_shaker(80.0, Backend::Exact);
    for k in 1..=3 {
        let u = unitarity_sum(&sol, k, 2000, true).unwrap();
        assert!((0.98..=1.02).contains(&u.value), "k={k} {u:?}");
    }
}
