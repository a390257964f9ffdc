//! Property tests for the invariants of each module.

use proptest::prelude::*;

use chdroplet::analytic::{
    c_of_n, c_of_n_forms, c_star, d_of_k, eta_star, geometry, minimize_phi, phi_reduced, surface_tension,
    unit_ball_volume, ProblemSpec, Regime, CHI,
};
use chdroplet::diagnostics::{classify, l4_distance_to_sharp, partition_volumes, Classification};
use chdroplet::energy::{free_energy, g_functional};
use chdroplet::expansion::{expansion_state, r1_equation, solve_r1};
use chdroplet::field::{
    fractional_droplet, read_snapshot, sharp_droplet, translate, uniform_field, write_snapshot, Field, Grid,
};
use chdroplet::minimizer::{flow_step, project_zero_mean, stable_step, Seed};
use chdroplet::profile1d::{bar_m, bar_m_prime, mollified_profile};
use chdroplet::well::potential;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn dims() -> impl Strategy<Value = usize> {
    prop_oneof![Just(2usize), Just(3usize)]
}

fn spec_strategy() -> impl Strategy<Value = ProblemSpec> {
    (dims(), 10.0..500.0f64, 1e-4..0.9f64).prop_map(|(d, l, delta)| ProblemSpec::new(d, l, -1.0 + delta).unwrap())
}

fn grid2(n_side: usize, length: f64) -> Grid {
    Grid::new(2, n_side, length).unwrap()
}

fn field_strategy(n_side: usize, length: f64, amp: f64) -> impl Strategy<Value = Field> {
    proptest::collection::vec(-amp..amp, n_side * n_side)
        .prop_map(move |values| Field::from_values(grid2(n_side, length), values).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn geometry_relations_hold(spec in spec_strategy()) {
        let g = geometry(&spec);
        let vol = spec.volume();
        prop_assert!(rel(g.v_plus, (spec.n + 1.0) * vol / 2.0) < 1e-14);
        prop_assert!(rel(unit_ball_volume(spec.d) * g.r0.powi(spec.d as i32), g.v_plus) < 1e-12);
        prop_assert!(rel(g.delta, 2.0 * unit_ball_volume(spec.d) * g.r0.powi(spec.d as i32) / vol) < 1e-12);
        let n_back = 2.0 * g.v_plus / vol - 1.0;
        prop_assert!((n_back - spec.n).abs() < 4.0 * f64::EPSILON);
    }

    #[test]
    fn c_of_n_forms_agree(spec in spec_strategy()) {
        let (a, b) = c_of_n_forms(&spec, surface_tension(), CHI);
        prop_assert!(rel(a, b) < 1e-12, "{} vs {}", a, b);
    }

    #[test]
    fn d_of_k_does_not_depend_on_length(d in dims(), k in 0.1..10.0f64, l1 in 20.0..2000.0f64, l2 in 20.0..2000.0f64) {
        let s = surface_tension();
        let c1 = c_of_n(&ProblemSpec::from_k(d, l1, k).unwrap(), s, CHI);
        let c2 = c_of_n(&ProblemSpec::from_k(d, l2, k).unwrap(), s, CHI);
        prop_assert!(rel(c1, c2) < 1e-12);
        prop_assert!(rel(c1, d_of_k(k, d, s, CHI)) < 1e-12);
    }

    #[test]
    fn supercritical_minimizer_is_global(d in dims(), factor in 1.0001..3.0f64) {
        let c = factor * c_star(d);
        let r = minimize_phi(c, d);
        prop_assert_eq!(r.regime, Regime::Droplet);
        prop_assert!(r.eta_c >= eta_star(d));
        let samples = 100_000;
        for i in 0..=samples {
            let eta = i as f64 / samples as f64;
            prop_assert!(r.phi_min <= phi_reduced(eta, c, d) + 1e-14);
        }
    }

    #[test]
    fn subcritical_uniform_is_strict(d in dims(), factor in 0.0..0.9999f64) {
        let c = factor * c_star(d);
        let r = minimize_phi(c, d);
        prop_assert_eq!(r.regime, Regime::Uniform);
        prop_assert_eq!(r.eta_c, 0.0);
        let samples = 100_000;
        for i in 1..=samples {
            let eta = i as f64 / samples as f64;
            prop_assert!(phi_reduced(0.0, c, d) < phi_reduced(eta, c, d));
        }
    }

    #[test]
    fn equal_partition_pointwise(z in -20.0..20.0f64) {
        let lhs = bar_m_prime(z).powi(2);
        prop_assert!((lhs - 2.0 * potential(bar_m(z))).abs() < 1e-12);
        prop_assert!(bar_m_prime(z) < 0.0);
        prop_assert_eq!(bar_m(-z), -bar_m(z));
    }

    #[test]
    fn mollified_profile_is_odd(z in -200.0..200.0f64, l in 10.0..1000.0f64, d in dims()) {
        prop_assert_eq!(mollified_profile(-z, l, d), -mollified_profile(z, l, d));
        prop_assert!(mollified_profile(z, l, d).abs() <= 1.0);
    }

    #[test]
    fn fractional_droplet_mean_is_exact(n in -0.9..-0.6f64, eta in 0.2..1.0f64) {
        let grid = grid2(64, 32.0);
        if let Ok((f, alpha)) = fractional_droplet(grid, n, eta) {
            prop_assert!((f.mean() - n).abs() < 1e-14);
            prop_assert!(f.max() <= 1.0 + alpha.abs() + 1e-12);
            prop_assert!(f.min() >= -1.0 - alpha.abs() - 1e-12);
        }
    }

    #[test]
    fn energy_breakdown_adds_up(f in field_strategy(16, 8.0, 1.5)) {
        let e = free_energy(&f).unwrap();
        prop_assert!(e.gradient_part >= 0.0 && e.potential_part >= 0.0);
        prop_assert!(rel(e.total, e.gradient_part + e.potential_part) < 1e-15);
    }

    #[test]
    fn uniform_energy_closed_form(n in -0.999..0.999f64, d in dims()) {
        let grid = Grid::new(d, 16, 12.0).unwrap();
        let e = free_energy(&uniform_field(grid, n).unwrap()).unwrap().total;
        let expected = 0.25 * (n * n - 1.0).powi(2) * 12f64.powi(d as i32);
        prop_assert!(rel(e, expected) < 1e-12);
    }

    #[test]
    fn energy_is_translation_invariant(f in field_strategy(16, 8.0, 1.5), sx in 0usize..16, sy in 0usize..16) {
        let e = free_energy(&f).unwrap().total;
        let moved = free_energy(&translate(&f, &[sx, sy]).unwrap()).unwrap().total;
        prop_assert!(rel(moved, e) < 1e-12);
    }

    #[test]
    fn f_to_g_identity(f in field_strategy(16, 8.0, 0.5), n in -0.99..0.5f64) {
        let mean = f.mean();
        let w = Field { grid: f.grid, values: f.values.iter().map(|v| v - mean).collect() };
        let g = g_functional(&w, n).unwrap();
        let shifted = Field { grid: f.grid, values: w.values.iter().map(|v| n + v).collect() };
        let lhs = free_energy(&shifted).unwrap().total - free_energy(&Field::constant(f.grid, n)).unwrap().total;
        prop_assert!((lhs - g).abs() <= 1e-10 * g.abs().max(1e-300) + 1e-12, "{} vs {}", lhs, g);
    }

    #[test]
    fn projection_is_zero_mean_and_idempotent(f in field_strategy(16, 8.0, 3.0)) {
        let p = project_zero_mean(&f);
        prop_assert!(p.mean().abs() < 1e-14);
        prop_assert_eq!(project_zero_mean(&p).values, p.values);
    }

    #[test]
    fn flow_step_conserves_mass_and_decreases_energy(f in field_strategy(16, 8.0, 0.3), n in -0.8..0.0f64) {
        let mut f = f;
        let shift = n - f.mean();
        f.add_constant(shift);
        let e0 = free_energy(&f).unwrap().total;
        let step = flow_step(&f, stable_step(&f.grid)).unwrap();
        prop_assert!((step.field.mean() - n).abs() < 1e-12);
        prop_assert!(step.energy.total <= e0 + 1e-12 * e0.abs());
    }

    #[test]
    fn partition_covers_the_torus(f in field_strategy(32, 16.0, 1.2), n in -0.95..-0.3f64) {
        let diag = partition_volumes(&f, n).unwrap();
        let total = diag.vol_a + diag.vol_b + diag.vol_c;
        prop_assert!((total - 256.0).abs() <= f.grid.cell_volume());
        prop_assert_eq!(diag.h_plus, 1.0 - diag.kappa);
        prop_assert_eq!(diag.h_minus, -1.0 + diag.kappa);
    }

    #[test]
    fn classify_is_monotone(a in 0.0..1.0f64, b in 0.0..1.0f64, threshold in 0.0..1.0f64) {
        let f = Field::constant(grid2(8, 4.0), -0.5);
        let mut lo = partition_volumes(&f, -0.5).unwrap();
        let mut hi = lo;
        lo.eta_measured = a.min(b);
        hi.eta_measured = a.max(b);
        if classify(&lo, threshold) == Classification::Droplet {
            prop_assert_eq!(classify(&hi, threshold), Classification::Droplet);
        }
    }

    #[test]
    fn l4_distance_is_translation_invariant(eta in 0.3..1.0f64, sx in 0usize..64, sy in 0usize..64) {
        let grid = grid2(64, 32.0);
        let n = -0.7;
        let sharp = sharp_droplet(grid, n, eta).unwrap();
        let moved = translate(&sharp, &[sx, sy]).unwrap();
        let a = l4_distance_to_sharp(&sharp, n, eta).unwrap();
        let b = l4_distance_to_sharp(&moved, n, eta).unwrap();
        prop_assert!((a - b).abs() < 1e-10, "{} vs {}", a, b);
    }

    #[test]
    fn l4_distance_of_uniform_field(n in -0.95..-0.2f64) {
        let grid = grid2(32, 16.0);
        let spec = ProblemSpec::new(2, 16.0, n).unwrap();
        let r0 = geometry(&spec).r0;
        let d = l4_distance_to_sharp(&uniform_field(grid, n).unwrap(), n, 0.0).unwrap();
        let expected = 256.0 * (n + 1.0).powi(4) / (r0 * r0);
        prop_assert!(rel(d, expected) < 1e-12);
    }

    #[test]
    fn expansion_relations(factor in 1.1..4.0f64, l in 50.0..2000.0f64) {
        let s = surface_tension();
        let k = factor * chdroplet::analytic::k_star(2, s, CHI);
        let spec = ProblemSpec::from_k(2, l, k).unwrap();
        let st = expansion_state(&spec).unwrap();
        prop_assert!((st.phi1 + CHI * st.mu1).abs() <= 1e-15 * st.phi1.abs().max(1.0));
        prop_assert!((st.mu1 + st.k1 * s / 2.0).abs() <= 1e-15 * st.mu1.abs().max(1.0));
        let roots = solve_r1(st.lambda, st.omega_lambda_area, s, CHI).unwrap();
        let r = roots.selected.unwrap();
        prop_assert!(r1_equation(r, st.lambda, st.omega_lambda_area, s, CHI).abs() < 1e-10);
        prop_assert!((st.r1 - minimize_phi(c_of_n(&spec, s, CHI), 2).eta_c.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn seed_labels_round_trip(x in 0.01..1.0f64) {
        for seed in [Seed::Uniform, Seed::EtaStar, Seed::EtaAnalytic, Seed::Equimolar, Seed::Fraction(x)] {
            let parsed: Seed = seed.to_string().parse().unwrap();
            prop_assert_eq!(parsed, seed);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn snapshot_round_trip(f in field_strategy(16, 8.0, 2.0), n in -0.99..0.99f64) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.snap");
        write_snapshot(&path, &f, n, "prop").unwrap();
        let (header, back) = read_snapshot(&path).unwrap();
        prop_assert_eq!(header.n, n);
        prop_assert_eq!(back.values, f.values);
    }
}
