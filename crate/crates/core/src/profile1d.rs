//! The optimal planar interface `m̄(z) = -tanh(z/√2)`, its surface tension,
//! the compactly supported profile `m₀` used to build droplets on a torus, and
//! the first-moment constants `M` and `B` that enter the finite-size
//! corrections.

use serde::{Deserialize, Serialize};
use std::f64::consts::SQRT_2;

use crate::quadrature::{integrate, integrate_pieces};
use crate::well::{potential, potential_prime};

/// Absolute tolerance handed to the adaptive quadrature.
pub const QUAD_TOL: f64 = 1e-10;

/// Exponentially decaying integrands are truncated here; `1 - tanh(40/√2)` is
/// below `1e-24`.
pub const TRUNCATION: f64 = 40.0;

/// Planar profile with `m̄(0) = 0`, `+1` on the left and `-1` on the right.
#[inline]
pub fn bar_m(z: f64) -> f64 {
    -(z / SQRT_2).tanh()
}

#[inline]
pub fn bar_m_prime(z: f64) -> f64 {
    let c = (z / SQRT_2).cosh();
    -1.0 / (SQRT_2 * c * c)
}

#[inline]
pub fn bar_m_second(z: f64) -> f64 {
    // m̄'' = F'(m̄)
    potential_prime(bar_m(z))
}

/// `1 + m̄(z)` for `z ≥ 0` without cancellation.
#[inline]
fn tail_above_minus_one(z: f64) -> f64 {
    let e = (-SQRT_2 * z).exp();
    2.0 * e / (1.0 + e)
}

/// `m₀`: equal to `m̄` for `|z| < w_inner`, to `-sgn z` for `|z| > w_outer`,
/// odd and C¹ in between.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarProfile {
    pub w_inner: f64,
    pub w_outer: f64,
}

impl PlanarProfile {
    /// Cutoffs `L^{(d-1)/(d+1)}` and twice that.
    pub fn new(length: f64, d: usize) -> Self {
        let df = d as f64;
        let w_inner = length.powf((df - 1.0) / (df + 1.0));
        Self { w_inner, w_outer: 2.0 * w_inner }
    }

    pub fn value(&self, z: f64) -> f64 {
        if z < 0.0 {
            return -self.value_right(-z);
        }
        self.value_right(z)
    }

    /// On the blend interval the tail `1 + m̄` is multiplied by a cubic
    /// smoothstep going from 1 to 0, which keeps the value in `[-1, m̄]` and
    /// matches `m̄'` at `w_inner` and slope zero at `w_outer`.
    fn value_right(&self, z: f64) -> f64 {
        if z < self.w_inner {
            bar_m(z)
        } else if z >= self.w_outer {
            -1.0
        } else {
            let t = (z - self.w_inner) / (self.w_outer - self.w_inner);
            let step = 1.0 - t * t * (3.0 - 2.0 * t);
            -1.0 + tail_above_minus_one(z) * step
        }
    }

    /// `sup_z |m₀ - m̄|`, attained at the blend start.
    pub fn deviation_bound(&self) -> f64 {
        tail_above_minus_one(self.w_inner)
    }
}

pub fn mollified_profile(z: f64, length: f64, d: usize) -> f64 {
    PlanarProfile::new(length, d).value(z)
}

/// `S = ∫_{-1}^{1} √(2F(h)) dh`.
pub fn surface_tension_quadrature() -> f64 {
    integrate(|h| (2.0 * potential(h)).sqrt(), -1.0, 1.0, QUAD_TOL).value
}

/// `∫ (m̄')² dz`.
pub fn surface_tension_gradient_form() -> f64 {
    integrate_pieces(|z| bar_m_prime(z).powi(2), &[-TRUNCATION, 0.0, TRUNCATION], QUAD_TOL).value
}

/// `2 ∫ F(m̄) dz`.
pub fn surface_tension_potential_form() -> f64 {
    2.0 * integrate_pieces(|z| potential(bar_m(z)), &[-TRUNCATION, 0.0, TRUNCATION], QUAD_TOL).value
}

fn m_integrand(z: f64) -> f64 {
    (z.signum() - (z / SQRT_2).tanh()) * z
}

fn b_integrand(z: f64) -> f64 {
    let m = bar_m(z);
    (m * m * m - m) * z
}

/// `M = ∫ (sgn z - tanh(z/√2)) z dz`.
pub fn constant_m() -> f64 {
    integrate_pieces(m_integrand, &[-TRUNCATION, 0.0, TRUNCATION], QUAD_TOL).value
}

/// `B = ∫ (m̄³ - m̄) z dz`.
pub fn constant_b() -> f64 {
    integrate_pieces(b_integrand, &[-TRUNCATION, 0.0, TRUNCATION], QUAD_TOL).value
}

/// Half-line versions, used to check the evenness of the integrands.
pub fn constant_m_half_line(cutoff: f64) -> f64 {
    integrate(m_integrand, 0.0, cutoff, QUAD_TOL / 2.0).value
}

pub fn constant_b_half_line(cutoff: f64) -> f64 {
    integrate(b_integrand, 0.0, cutoff, QUAD_TOL / 2.0).value
}

/// `∫ (sgn z + m₀(z)) z dz`, the moment that actually enters the mass of a
/// droplet built from `m₀`; it differs from `M` only by the mollification.
pub fn mollified_moment(length: f64, d: usize) -> f64 {
    let p = PlanarProfile::new(length, d);
    let breaks = [-p.w_outer, -p.w_inner, 0.0, p.w_inner, p.w_outer];
    integrate_pieces(|z| (z.signum() + p.value(z)) * z, &breaks, QUAD_TOL).value
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileConstants {
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "B")]
    pub b: f64,
}

pub fn profile_constants() -> ProfileConstants {
    ProfileConstants { s: surface_tension_quadrature(), m: constant_m(), b: constant_b() }
}
