//! First-order matched expansion around a circular interface in `d = 2`.
//!
//! With `λ = 1/r₀` the radius `r` of the droplet (in units of `r₀`) solves
//! `2π(r² - 1) + λ|Ω^λ|χS/(2r) = 0`, `|Ω^λ| = L²λ²`, and the approximate
//! solution is `m̄(|x| - r r₀) + χS/(2 r r₀)`. Writing `q = λ|Ω^λ|χS/(4π)`
//! the cubic is `r³ - r + q = 0` and `q = 1/(4C(n))`, so `r²` is exactly the
//! interior stationary point of the phenomenological energy.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::analytic::{geometry, surface_tension, ProblemSpec, CHI};
use crate::energy::{el_residual, free_energy, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::field::{compensated_sum, Field, Grid};
use crate::profile1d::{bar_m, bar_m_prime, bar_m_second, QUAD_TOL, TRUNCATION};
use crate::quadrature::integrate_pieces;
use crate::well::potential_prime;

/// Roots below this are discarded as non-positive.
pub const POSITIVE_ROOT_FLOOR: f64 = 1e-12;

/// Largest `q` for which `r³ - r + q` has positive roots, `2/(3√3)`.
pub fn fold_coefficient() -> f64 {
    2.0 / (3.0 * 3f64.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubicRoots {
    /// `q` in `r³ - r + q = 0`.
    pub q: f64,
    pub positive_roots: Vec<f64>,
    /// Largest positive root; `None` means no droplet branch exists.
    pub selected: Option<f64>,
}

impl CubicRoots {
    pub fn no_droplet(&self) -> bool {
        self.selected.is_none()
    }
}

/// Newton polish of a root of `r³ - r + q`.
fn polish(mut r: f64, q: f64) -> f64 {
    for _ in 0..3 {
        let f = r * r * r - r + q;
        let fp = 3.0 * r * r - 1.0;
        if fp == 0.0 {
            break;
        }
        let next = r - f / fp;
        if !next.is_finite() {
            break;
        }
        r = next;
    }
    r
}

/// Real roots of `r³ - r + q`.
fn depressed_cubic_roots(q: f64) -> Vec<f64> {
    // t³ + pt + q with p = -1: discriminant sign follows 4 - 27q².
    let disc = 4.0 - 27.0 * q * q;
    let mut roots = if disc >= 0.0 {
        let amp = 2.0 / 3f64.sqrt();
        let arg = (-1.5 * q * 3f64.sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3).map(|k| amp * (theta - 2.0 * PI * k as f64 / 3.0).cos()).collect::<Vec<_>>()
    } else {
        // One real root; Cardano with both cube roots real.
        let s = (q * q / 4.0 - 1.0 / 27.0).sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()]
    };
    for r in roots.iter_mut() {
        *r = polish(*r, q);
    }
    roots.sort_by(|a, b| b.total_cmp(a));
    roots
}

/// Positive roots of `2πr³ - 2πr + λ·area·χS/2 = 0`, largest first.
pub fn solve_r1(lambda: f64, omega_area: f64, s: f64, chi: f64) -> Result<CubicRoots> {
    if !(lambda > 0.0) || !(omega_area > 0.0) {
        return Err(Error::Domain(format!("need λ > 0 and area > 0, got {lambda} and {omega_area}")));
    }
    let q = lambda * omega_area * chi * s / (4.0 * PI);
    let positive_roots: Vec<f64> = depressed_cubic_roots(q).into_iter().filter(|&r| r > POSITIVE_ROOT_FLOOR).collect();
    let selected = positive_roots.first().copied();
    Ok(CubicRoots { q, positive_roots, selected })
}

/// Left-hand side of `2π(r² - 1) + λ·area·χS/(2r) = 0`.
pub fn r1_equation(r: f64, lambda: f64, omega_area: f64, s: f64, chi: f64) -> f64 {
    2.0 * PI * (r * r - 1.0) + lambda * omega_area * chi * s / (2.0 * r)
}

/// Reduced free energy `λ⁻¹(2πrS + (λ⁻³L⁻²/χ)·2π²(1 - r²)²)`; its
/// stationarity condition is the cubic above.
pub fn reduced_free_energy(r: f64, lambda: f64, length: f64, s: f64, chi: f64) -> f64 {
    let bulk = 2.0 * PI * PI * (1.0 - r * r).powi(2) / (chi * lambda.powi(3) * length * length);
    (2.0 * PI * r * s + bulk) / lambda
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionState {
    pub lambda: f64,
    #[serde(rename = "K1")]
    pub k1: f64,
    pub mu1: f64,
    pub phi1: f64,
    /// Radius in units of `r₀`.
    pub r1: f64,
    pub r2: f64,
    pub omega_lambda_area: f64,
    pub positive_roots: Vec<f64>,
    /// Equimolar radius `r₀` in original units.
    pub r0: f64,
    /// Constant added on top of `λφ₁` to make the grid mean exact.
    pub mean_correction: f64,
}

impl ExpansionState {
    /// Droplet radius `r^{(1)} r₀` in original units.
    pub fn radius(&self) -> f64 {
        self.r1 * self.r0
    }

    /// `λφ₁ = χS/(2 r^{(1)} r₀)`.
    pub fn background_shift(&self) -> f64 {
        self.lambda * self.phi1
    }

    /// Volume fraction `(r^{(1)})²` of the phenomenological picture.
    pub fn eta(&self) -> f64 {
        self.r1 * self.r1
    }
}

/// First-order quantities for a two-dimensional droplet-regime spec.
pub fn expansion_state(spec: &ProblemSpec) -> Result<ExpansionState> {
    if spec.d != 2 {
        return Err(Error::Precondition(format!("the expansion is two-dimensional, got d = {}", spec.d)));
    }
    let r0 = geometry(spec).r0;
    if !(r0 > 0.0) {
        return Err(Error::Precondition("the expansion needs n > -1".into()));
    }
    let s = surface_tension();
    let lambda = 1.0 / r0;
    let area = (spec.length * lambda).powi(2);
    let roots = solve_r1(lambda, area, s, CHI)?;
    let Some(r1) = roots.selected else {
        return Err(Error::Precondition(format!(
            "no droplet branch: cubic coefficient {:.6} exceeds the fold {:.6}",
            roots.q,
            fold_coefficient()
        )));
    };
    let k1 = 1.0 / r1;
    let mu1 = -k1 * s / 2.0;
    Ok(ExpansionState {
        lambda,
        k1,
        mu1,
        phi1: -CHI * mu1,
        r1,
        r2: -CHI * s / (8.0 * r1 * r1),
        omega_lambda_area: area,
        positive_roots: roots.positive_roots,
        r0,
        mean_correction: 0.0,
    })
}

/// `m̄(|x| - R) + c` on the grid, with `m̄` clamped to `-1` more than `L/4`
/// outside the circle.
fn circle_field(grid: Grid, radius: f64, shift: f64) -> Field {
    let clamp = grid.length / 4.0;
    let values = grid
        .radii()
        .into_iter()
        .map(|rho| {
            let z = rho - radius;
            let base = if z > clamp { -1.0 } else { bar_m(z) };
            base + shift
        })
        .collect();
    Field { grid, values }
}

/// Builds `m^{(1)}` on the grid with its mean shifted to exactly `n`.
pub fn first_order_solution(spec: &ProblemSpec, grid: Grid) -> Result<(Field, ExpansionState)> {
    if grid.d != spec.d || grid.length != spec.length {
        return Err(Error::Precondition("grid and problem disagree on dimension or box side".into()));
    }
    let mut state = expansion_state(spec)?;
    let mut field = circle_field(grid, state.radius(), state.background_shift());
    let correction = spec.n - field.mean();
    field.add_constant(correction);
    let second = spec.n - field.mean();
    field.add_constant(second);
    state.mean_correction = correction + second;
    Ok((field, state))
}

/// `r^{(2)} = r^{(1)} + λ r₂`, in units of `r₀`.
pub fn second_order_radius(state: &ExpansionState) -> f64 {
    state.r1 + state.lambda * state.r2
}

/// `mean(m̄(|x| - r r₀) + χS/(2 r r₀)) - n` on the grid, without the exact
/// mean correction.
pub fn mass_defect(spec: &ProblemSpec, grid: Grid, r: f64) -> Result<f64> {
    let r0 = geometry(spec).r0;
    let radius = r * r0;
    let field = circle_field(grid, radius, CHI * surface_tension() / (2.0 * radius));
    Ok(field.mean() - spec.n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuumResidual {
    pub mu_hat: f64,
    /// Sup over the torus of `|-Δm + F'(m) + μ̂|`.
    pub sup_residual: f64,
    /// Background constant that makes the continuum mean exactly `n`.
    pub shift: f64,
}

/// Euler–Lagrange residual of the radial profile `m̄(ρ - R) + c` evaluated
/// with exact derivatives, so that grid truncation error does not mask the
/// `O(λ²)` behaviour. `c` and `μ̂` come from one-dimensional quadrature of
/// the mean and of the mean of `F'(m)`.
pub fn continuum_residual(spec: &ProblemSpec, state: &ExpansionState) -> Result<ContinuumResidual> {
    let length = spec.length;
    let area = length * length;
    let radius = state.radius();
    let rho_max = (radius + length / 4.0).min(length / 2.0);
    let outer_area = area - PI * rho_max * rho_max;
    let mut breaks = vec![0.0, (radius - TRUNCATION).max(0.0), radius, (radius + TRUNCATION).min(rho_max), rho_max];
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let excess = integrate_pieces(|rho| (1.0 + bar_m(rho - radius)) * 2.0 * PI * rho, &breaks, QUAD_TOL).value;
    let shift = spec.delta() - excess / area;

    let inner =
        integrate_pieces(|rho| potential_prime(bar_m(rho - radius) + shift) * 2.0 * PI * rho, &breaks, QUAD_TOL).value;
    let mu_hat = -(inner + potential_prime(-1.0 + shift) * outer_area) / area;

    let residual = |rho: f64| {
        let z = rho - radius;
        -bar_m_second(z) - bar_m_prime(z) / rho + potential_prime(bar_m(z) + shift) + mu_hat
    };
    let samples = (rho_max / 0.005).ceil() as usize;
    let mut sup = (potential_prime(-1.0 + shift) + mu_hat).abs();
    for i in 1..=samples {
        let rho = rho_max * i as f64 / samples as f64;
        sup = sup.max(residual(rho).abs());
    }
    Ok(ContinuumResidual { mu_hat, sup_residual: sup, shift })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub state: ExpansionState,
    pub r2_total: f64,
    pub energy: EnergyBreakdown,
    /// `λ⁻¹(2πrS + …)` at `r^{(1)}`.
    pub reduced_energy: f64,
    pub grid_mu_hat: f64,
    pub grid_residual: f64,
    pub continuum: ContinuumResidual,
    pub mass_defect_first: f64,
    pub mass_defect_second: f64,
}

/// Everything the comparison report needs, from one spec and grid.
pub fn expansion_report(spec: &ProblemSpec, grid: Grid) -> Result<(Field, ExpansionReport)> {
    let (field, state) = first_order_solution(spec, grid)?;
    let energy = free_energy(&field)?;
    let (grid_mu_hat, grid_residual) = el_residual(&field);
    let continuum = continuum_residual(spec, &state)?;
    let r2_total = second_order_radius(&state);
    let report = ExpansionReport {
        reduced_energy: reduced_free_energy(state.r1, state.lambda, spec.length, surface_tension(), CHI),
        mass_defect_first: mass_defect(spec, grid, state.r1)?,
        mass_defect_second: mass_defect(spec, grid, r2_total)?,
        state,
        r2_total,
        energy,
        grid_mu_hat,
        grid_residual,
        continuum,
    };
    Ok((field, report))
}

/// Least-squares slope of `log y` against `log x`.
pub fn fitted_order(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = compensated_sum(lx.iter().copied()) / n;
    let my = compensated_sum(ly.iter().copied()) / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Box side giving equimolar radius `r0` at `n = -1 + K L^{-2/3}`.
pub fn length_for_radius(r0: f64, k: f64) -> f64 {
    (2.0 * PI * r0 * r0 / k).powf(0.75)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{c_of_n, k_star, minimize_phi, stationary_threshold};

    fn s() -> f64 {
        surface_tension()
    }

    #[test]
    fn small_coefficient_limit() {
        let mut previous = f64::INFINITY;
        for &area in &[1e-2, 1e-3, 1e-4] {
            let roots = solve_r1(1e-3, area, s(), CHI).unwrap();
            assert_eq!(roots.positive_roots.len(), 2);
            let gap = 1.0 - roots.selected.unwrap();
            assert!(gap > 0.0 && gap < previous);
            assert!((gap - roots.q / 2.0).abs() < 2.0 * roots.q * roots.q + 4.0 * f64::EPSILON);
            assert!((roots.positive_roots[1] - roots.q).abs() < 2.0 * roots.q.powi(3));
            previous = gap;
        }
    }

    #[test]
    fn roots_solve_the_cubic() {
        for &(lambda, area) in &[(0.04, 64.0), (0.1, 30.0), (0.02, 900.0)] {
            let roots = solve_r1(lambda, area, s(), CHI).unwrap();
            for &r in &roots.positive_roots {
                assert!(r1_equation(r, lambda, area, s(), CHI).abs() < 1e-10);
            }
        }
        assert!(solve_r1(0.0, 1.0, s(), CHI).is_err());
    }

    #[test]
    fn no_droplet_beyond_fold() {
        let q_big = 1.01 * fold_coefficient();
        let area = q_big * 4.0 * PI / (0.1 * CHI * s());
        assert!(solve_r1(0.1, area, s(), CHI).unwrap().no_droplet());
    }

    /// The cubic loses its positive roots where `Φ` loses its interior
    /// stationary point, which happens below `C★`.
    #[test]
    fn fold_matches_stationary_threshold() {
        let lambda = 0.05;
        let has_root = |q: f64| {
            let area = q * 4.0 * PI / (lambda * CHI * s());
            !solve_r1(lambda, area, s(), CHI).unwrap().no_droplet()
        };
        let (mut lo, mut hi) = (0.1, 1.0);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if has_root(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let c_fold = 1.0 / (4.0 * lo);
        assert!((c_fold - stationary_threshold(2)).abs() < 1e-6);
        assert!((c_fold - 3.0 * 3f64.sqrt() / 8.0).abs() < 1e-9);
        assert!(c_fold < crate::analytic::c_star(2) - 0.2);
    }

    #[test]
    fn selected_root_is_stationary_for_reduced_energy() {
        let spec = ProblemSpec::from_k(2, 200.0, 2.0 * k_star(2, s(), CHI)).unwrap();
        let st = expansion_state(&spec).unwrap();
        let h = 1e-6;
        let e = |r: f64| reduced_free_energy(r, st.lambda, spec.length, s(), CHI);
        let slope = (e(st.r1 + h) - e(st.r1 - h)) / (2.0 * h);
        let scale = 2.0 * PI * s() / st.lambda;
        assert!((slope / scale).abs() < 1e-8, "{slope}");
    }

    #[test]
    fn radius_matches_phenomenology() {
        for &(l, kf) in &[(100.0, 1.5), (200.0, 2.0), (400.0, 3.0), (150.0, 0.9)] {
            let spec = ProblemSpec::from_k(2, l, kf * k_star(2, s(), CHI)).unwrap();
            let st = expansion_state(&spec).unwrap();
            let c = c_of_n(&spec, s(), CHI);
            let phen = minimize_phi(c, 2);
            if kf > 1.0 {
                assert!((st.r1 - phen.eta_c.sqrt()).abs() < 1e-6);
            }
            assert!((st.r1 * (1.0 - st.r1 * st.r1) - 1.0 / (4.0 * c)).abs() < 1e-12);
        }
    }

    #[test]
    fn first_order_relations() {
        let spec = ProblemSpec::from_k(2, 200.0, 2.0 * k_star(2, s(), CHI)).unwrap();
        let st = expansion_state(&spec).unwrap();
        assert!((st.phi1 + CHI * st.mu1).abs() < 1e-15);
        assert!((st.mu1 + st.k1 * s() / 2.0).abs() < 1e-15);
        assert!((st.background_shift() - CHI * s() / (2.0 * st.r1 * st.r0)).abs() < 1e-15);
        assert!(st.r2 < 0.0);
        assert!(second_order_radius(&st) < st.r1);
        let r2_unit = -CHI * s() / 8.0;
        assert!((r2_unit + 2f64.sqrt() / 24.0).abs() < 1e-15);
    }

    #[test]
    fn first_order_field_has_exact_mean() {
        let spec = ProblemSpec::from_k(2, 100.0, 2.0 * k_star(2, s(), CHI)).unwrap();
        let grid = Grid::new(2, 256, 100.0).unwrap();
        let (f, st) = first_order_solution(&spec, grid).unwrap();
        assert!((f.mean() - spec.n).abs() < 1e-14);
        // The sharp-interface mass balance misses the first-moment term 2πM/L².
        let expected = -2.0 * PI * crate::profile1d::constant_m() / (100.0 * 100.0);
        assert!((st.mean_correction / expected - 1.0).abs() < 0.05, "{}", st.mean_correction);
        let sub = ProblemSpec::from_k(2, 100.0, 0.5 * k_star(2, s(), CHI)).unwrap();
        assert!(matches!(first_order_solution(&sub, grid), Err(Error::Precondition(_))));
        assert!(expansion_state(&ProblemSpec::new(3, 10.0, -0.5).unwrap()).is_err());
    }

    #[test]
    fn continuum_residual_is_second_order() {
        let k = 2.0 * k_star(2, s(), CHI);
        let radii = [20.0, 40.0, 80.0];
        let res: Vec<f64> = radii
            .iter()
            .map(|&r0| {
                let spec = ProblemSpec::from_k(2, length_for_radius(r0, k), k).unwrap();
                let st = expansion_state(&spec).unwrap();
                continuum_residual(&spec, &st).unwrap().sup_residual
            })
            .collect();
        let lambdas: Vec<f64> = radii.iter().map(|r| 1.0 / r).collect();
        let order = fitted_order(&lambdas, &res);
        assert!((1.5..=2.5).contains(&order), "order {order}, residuals {res:?}");
    }

    #[test]
    fn fitted_order_of_power_law() {
        let x = [1.0, 2.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.7)).collect();
        assert!((fitted_order(&x, &y) - 1.7).abs() < 1e-12);
    }
}
