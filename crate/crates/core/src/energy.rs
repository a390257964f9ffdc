//! Discrete free energy, its exact first variation, the shifted functional
//! `𝓖(w)` and the Lagrange multiplier estimate.
//!
//! The gradient energy uses forward differences with periodic wrap and the
//! variation uses the matching `(2d+1)`-point Laplacian, so `h^d` times the
//! variation is the exact gradient of the discrete energy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{compensated_sum, Field, Grid};
use crate::well::{potential, potential_prime};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub gradient_part: f64,
    pub potential_part: f64,
    pub total: f64,
    pub mass: f64,
}

/// Neumaier accumulator, for sums over cells that are interleaved with other
/// work.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accumulator {
    sum: f64,
    carry: f64,
}

impl Accumulator {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Calls `f(i, j)` for every cell `i` and its forward neighbour `j` along
/// `axis`, in a fixed order.
#[inline]
fn for_each_forward_pair(grid: &Grid, axis: usize, mut f: impl FnMut(usize, usize)) {
    let n = grid.n_side;
    let stride = grid.stride(axis);
    let block = stride * n;
    for base in (0..grid.len()).step_by(block) {
        for k in 0..n {
            let kn = if k + 1 == n { 0 } else { k + 1 };
            let row = base + k * stride;
            let next = base + kn * stride;
            for r in 0..stride {
                f(row + r, next + r);
            }
        }
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain("field contains non-finite values".into()))
    }
}

fn gradient_sum(grid: &Grid, values: &[f64]) -> f64 {
    let mut acc = Accumulator::default();
    for axis in 0..grid.d {
        for_each_forward_pair(grid, axis, |i, j| {
            let diff = values[j] - values[i];
            acc.add(diff * diff);
        });
    }
    acc.value()
}

fn breakdown(grid: &Grid, gradient_sum: f64, potential_sum: f64, value_sum: f64) -> EnergyBreakdown {
    let h = grid.spacing();
    let cell = grid.cell_volume();
    let gradient_part = 0.5 * gradient_sum / (h * h) * cell;
    let potential_part = potential_sum * cell;
    EnergyBreakdown {
        gradient_part,
        potential_part,
        total: gradient_part + potential_part,
        mass: value_sum / grid.len() as f64,
    }
}

pub fn free_energy(field: &Field) -> Result<EnergyBreakdown> {
    check_finite(&field.values)?;
    let grid = &field.grid;
    let grad = gradient_sum(grid, &field.values);
    let pot = compensated_sum(field.values.iter().map(|&m| potential(m)));
    let sum = compensated_sum(field.values.iter().copied());
    Ok(breakdown(grid, grad, pot, sum))
}

/// Energy and `-Δ_h m + F'(m)` in one sweep; `variation` is overwritten.
pub fn energy_and_variation(grid: &Grid, values: &[f64], variation: &mut [f64]) -> EnergyBreakdown {
    let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
    let mut pot = Accumulator::default();
    let mut sum = Accumulator::default();
    for (v, &m) in variation.iter_mut().zip(values) {
        *v = potential_prime(m);
        pot.add(potential(m));
        sum.add(m);
    }
    let mut grad = Accumulator::default();
    for axis in 0..grid.d {
        for_each_forward_pair(grid, axis, |i, j| {
            let diff = values[j] - values[i];
            grad.add(diff * diff);
            let flux = diff * inv_h2;
            variation[i] -= flux;
            variation[j] += flux;
        });
    }
    breakdown(grid, grad.value(), pot.value(), sum.value())
}

/// The unconstrained variation `-Δ_h m + m³ - m`.
pub fn first_variation(field: &Field) -> Field {
    let mut out = vec![0.0; field.values.len()];
    energy_and_variation(&field.grid, &field.values, &mut out);
    Field { grid: field.grid, values: out }
}

/// `G(w) = (n²-1)w²/2 + w²(w+2n)²/4`.
#[inline]
pub fn g_density(w: f64, n: f64) -> f64 {
    0.5 * (n * n - 1.0) * w * w + 0.25 * w * w * (w + 2.0 * n).powi(2)
}

/// Largest `|mean(w)|` accepted by [`g_functional`].
pub const ZERO_MEAN_TOLERANCE: f64 = 1e-12;

/// `𝓖(w) = ½∫|∇w|² + ∫G(w)` for a zero-mean perturbation `w` of `n`.
pub fn g_functional(w: &Field, n: f64) -> Result<f64> {
    check_finite(&w.values)?;
    let mean = w.mean();
    if mean.abs() > ZERO_MEAN_TOLERANCE {
        return Err(Error::Precondition(format!("perturbation must have zero mean, got {mean:e}")));
    }
    let grid = &w.grid;
    let grad = gradient_sum(grid, &w.values);
    let pot = compensated_sum(w.values.iter().map(|&x| g_density(x, n)));
    Ok(breakdown(grid, grad, pot, 0.0).total)
}

/// `μ̂ = -mean(first_variation)`.
pub fn lagrange_multiplier_estimate(field: &Field) -> f64 {
    -first_variation(field).mean()
}

/// `(μ̂, ‖first_variation + μ̂‖_∞)`.
pub fn el_residual(field: &Field) -> (f64, f64) {
    let var = first_variation(field);
    let mu = -var.mean();
    (mu, var.sup_distance_to(-mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{translate, uniform_field};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: Grid, amplitude: f64, rng: &mut ChaCha8Rng) -> Field {
        let values = (0..grid.len()).map(|_| amplitude * (2.0 * rng.gen::<f64>() - 1.0)).collect();
        Field { grid, values }
    }

    #[test]
    fn constant_fields() {
        let g = Grid::new(2, 16, 10.0).unwrap();
        let e = free_energy(&uniform_field(g, 0.0).unwrap()).unwrap();
        assert_eq!(e.gradient_part, 0.0);
        assert!((e.potential_part - 25.0).abs() < 1e-12);
        let v = first_variation(&uniform_field(g, -0.3).unwrap());
        assert!(v.sup_distance_to(-0.027 + 0.3) < 1e-15);
        let one = Field::constant(g, 1.0);
        assert_eq!(first_variation(&one).sup_distance_to(0.0), 0.0);
        assert_eq!(lagrange_multiplier_estimate(&one), 0.0);
        let n: f64 = -0.9;
        assert!((lagrange_multiplier_estimate(&Field::constant(g, n)) - (n - n.powi(3))).abs() < 1e-15);
    }

    #[test]
    fn breakdown_adds_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = Grid::new(3, 8, 3.0).unwrap();
        let f = random_field(g, 1.2, &mut rng);
        let e = free_energy(&f).unwrap();
        assert!(e.gradient_part >= 0.0 && e.potential_part >= 0.0);
        assert!((e.total - (e.gradient_part + e.potential_part)).abs() <= 1e-15 * e.total);
        let mut var = vec![0.0; g.len()];
        let e2 = energy_and_variation(&g, &f.values, &mut var);
        assert!((e.total - e2.total).abs() <= 1e-14 * e.total);
        assert!((e.mass - f.mean()).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_finite() {
        let g = Grid::new(2, 8, 4.0).unwrap();
        let mut f = Field::constant(g, 0.0);
        f.values[3] = f64::NAN;
        assert!(free_energy(&f).is_err());
    }

    #[test]
    fn variation_is_gradient_3d() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Grid::new(3, 8, 5.0).unwrap();
        let f = random_field(g, 1.0, &mut rng);
        let var = first_variation(&f);
        for _ in 0..5 {
            let dir = random_field(g, 1.0, &mut rng);
            let eps = 1e-6;
            let shifted = |s: f64| {
                let values = f.values.iter().zip(&dir.values).map(|(a, b)| a + s * b).collect();
                free_energy(&Field { grid: g, values }).unwrap().total
            };
            let fd = (shifted(eps) - shifted(-eps)) / (2.0 * eps);
            let exact: f64 = var.values.iter().zip(&dir.values).map(|(a, b)| a * b).sum::<f64>() * g.cell_volume();
            assert!((fd - exact).abs() < 1e-6 * exact.abs(), "{fd} vs {exact}");
        }
    }

    #[test]
    fn g_functional_examples() {
        let g = Grid::new(2, 16, 8.0).unwrap();
        assert_eq!(g_functional(&Field::constant(g, 0.0), -0.5).unwrap(), 0.0);
        assert!(matches!(g_functional(&Field::constant(g, 0.1), -0.5), Err(Error::Precondition(_))));
        // Inside (z₋, z₊) the density is negative.
        let n: f64 = -0.9;
        let z_plus = -2.0 * n + (2.0 - 2.0 * n * n).sqrt();
        let z_minus = -2.0 * n - (2.0 - 2.0 * n * n).sqrt();
        let mid = 0.5 * (z_plus + z_minus);
        assert!(g_density(mid, n) < 0.0);
        assert!(g_density(z_plus, n).abs() < 1e-12 && g_density(z_minus, n).abs() < 1e-12);
    }

    #[test]
    fn translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = Grid::new(2, 32, 12.0).unwrap();
        let f = random_field(g, 1.0, &mut rng);
        let e = free_energy(&f).unwrap().total;
        let moved = free_energy(&translate(&f, &[9, 30]).unwrap()).unwrap().total;
        assert!((e - moved).abs() <= 1e-12 * e);
    }
}
