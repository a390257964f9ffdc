//! Closed-form phenomenology of droplet formation: the geometry of the mass
//! constraint, the volume-fraction free energy `Φ(η)` and the critical
//! constants, for any dimension `d ≥ 2`.
//!
//! Everything here is a pure function of its inputs.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Compressibility `1/F''(-1)` of the double well `F(m) = (m² - 1)²/4`.
pub const CHI: f64 = 0.5;

/// Planar surface tension `∫ √(2F(h)) dh = 2^{3/2}/3`.
pub fn surface_tension() -> f64 {
    2f64.powf(1.5) / 3.0
}

/// Relative distance from `C★` inside which [`minimize_phi`] reports a tie.
pub const CRITICAL_TOLERANCE: f64 = 1e-9;

/// One instance of the constrained minimization problem: a `d`-dimensional
/// torus of side `length` and prescribed mean order parameter `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub d: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub n: f64,
}

impl ProblemSpec {
    /// `n = -1` is accepted as the degenerate pure-phase limit.
    pub fn new(d: usize, length: f64, n: f64) -> Result<Self> {
        if d < 2 {
            return Err(Error::Domain(format!("dimension must be at least 2, got {d}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::Domain(format!("box side must be positive, got {length}")));
        }
        if !(-1.0..1.0).contains(&n) {
            return Err(Error::Domain(format!("mean order parameter must lie in [-1, 1), got {n}")));
        }
        Ok(Self { d, length, n })
    }

    /// Critical-regime parameterization `n = -1 + K L^{-d/(d+1)}`.
    pub fn from_k(d: usize, length: f64, k: f64) -> Result<Self> {
        if !(k >= 0.0) {
            return Err(Error::Domain(format!("K must be nonnegative, got {k}")));
        }
        let n = -1.0 + k * critical_scale(d, length);
        Self::new(d, length, n)
    }

    /// Supersaturation `δ = n + 1`.
    pub fn delta(&self) -> f64 {
        self.n + 1.0
    }

    /// Inverse of [`ProblemSpec::from_k`].
    pub fn k(&self) -> f64 {
        self.delta() / critical_scale(self.d, self.length)
    }

    /// `L^d`.
    pub fn volume(&self) -> f64 {
        self.length.powi(self.d as i32)
    }
}

/// `L^{-d/(d+1)}`.
pub fn critical_scale(d: usize, length: f64) -> f64 {
    length.powf(-(d as f64) / (d as f64 + 1.0))
}

/// Surface area `σ_d = 2π^{d/2}/Γ(d/2)` of the unit sphere in `ℝ^d`.
pub fn sphere_area_constant(d: usize) -> Result<f64> {
    if d < 1 {
        return Err(Error::Domain("sphere area constant needs d >= 1".into()));
    }
    let half = d as f64 / 2.0;
    Ok(2.0 * std::f64::consts::PI.powf(half) / gamma(half))
}

/// Unit-ball volume `σ_d/d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    sphere_area_constant(d).expect("d >= 1") / d as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometrySummary {
    /// Volume of the `+1` phase if the field took only the values ±1.
    pub v_plus: f64,
    /// Equimolar radius: the ball of this radius has volume `v_plus`.
    pub r0: f64,
    /// Radius above which a cylinder (strip) beats a sphere on the torus.
    pub r_c: f64,
    /// Equimolar interface area `σ_d r₀^{d-1}`.
    pub gamma0: f64,
    pub delta: f64,
    /// Whether `r₀ ≤ r_c`, i.e. the isoperimetric optimum is still a ball.
    pub sphere_regime: bool,
}

pub fn geometry(spec: &ProblemSpec) -> GeometrySummary {
    let d = spec.d;
    let sigma = sphere_area_constant(d).expect("validated spec");
    let sigma_lower = sphere_area_constant(d - 1).expect("validated spec");
    let df = d as f64;
    let v_plus = spec.delta() / 2.0 * spec.volume();
    let r0 = (v_plus / (sigma / df)).powf(1.0 / df);
    let r_c = ((df - 1.0) / df).powi(d as i32 - 2) * (sigma_lower / sigma) * spec.length;
    GeometrySummary {
        v_plus,
        r0,
        r_c,
        gamma0: sigma * r0.powi(d as i32 - 1),
        delta: spec.delta(),
        sphere_regime: r0 <= r_c,
    }
}

/// Exact free energy `(n² - 1)² L^d / 4` of the constant field.
pub fn uniform_energy(spec: &ProblemSpec) -> f64 {
    0.25 * (spec.n * spec.n - 1.0).powi(2) * spec.volume()
}

/// Both algebraic forms of the bulk-to-surface ratio `C(n)`: the one in
/// terms of `r₀` and the one in terms of `n` directly.
pub fn c_of_n_forms(spec: &ProblemSpec, s: f64, chi: f64) -> (f64, f64) {
    let d = spec.d;
    let df = d as f64;
    let sigma = sphere_area_constant(d).expect("validated spec");
    let r0 = geometry(spec).r0;
    let via_radius = sigma / (2.0 * chi * s) * (2.0 / df).powi(2) * r0.powi(d as i32 + 1) / spec.volume();
    let via_density =
        2.0 / (df * chi * s) * (sigma / df).powf(-1.0 / df) * (spec.delta() / 2.0).powf((df + 1.0) / df) * spec.length;
    (via_radius, via_density)
}

/// Ratio `C(n)` of the uniform-background cost to the equimolar surface cost;
/// `S|Γ₀|C(n)` is the leading-order free energy of the uniform field.
pub fn c_of_n(spec: &ProblemSpec, s: f64, chi: f64) -> f64 {
    if spec.delta() <= 0.0 {
        return 0.0;
    }
    let (via_radius, via_density) = c_of_n_forms(spec, s, chi);
    debug_assert!((via_radius - via_density).abs() <= 1e-10 * via_density.abs().max(1e-300));
    via_density
}

/// `η^{1-1/d} + C(1-η)²`, i.e. `Φ(η)/(S|Γ₀|)`.
pub fn phi_reduced(eta: f64, c: f64, d: usize) -> f64 {
    let exponent = 1.0 - 1.0 / d as f64;
    eta.powf(exponent) + c * (1.0 - eta).powi(2)
}

/// Phenomenological free energy `Φ(η) = S|Γ₀|(η^{1-1/d} + C(1-η)²)` of putting
/// a fraction `η` of the excess mass into a droplet.
pub fn phi(eta: f64, c: f64, s: f64, gamma0: f64, d: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("volume fraction must lie in [0, 1], got {eta}")));
    }
    Ok(s * gamma0 * phi_reduced(eta, c, d))
}

/// `dΦ/dη` up to the factor `S|Γ₀|`.
fn phi_slope(eta: f64, c: f64, d: usize) -> f64 {
    let df = d as f64;
    (1.0 - 1.0 / df) * eta.powf(-1.0 / df) - 2.0 * c * (1.0 - eta)
}

/// Critical value of `C`: above it the minimum of `Φ` leaves `η = 0`.
pub fn c_star(d: usize) -> f64 {
    let df = d as f64;
    ((df + 1.0) / 2.0).powf((df + 1.0) / df) / df
}

/// Volume fraction of the droplet at the tie `C = C★`, and the smallest
/// droplet fraction ever selected: `η★ = (dC★)^{-d/(d+1)} = 2/(d+1)`.
pub fn eta_star(d: usize) -> f64 {
    let df = d as f64;
    (df * c_star(d)).powf(-df / (df + 1.0))
}

/// Smallest `C` at which `Φ` has an interior stationary point (a metastable
/// droplet), `(d-1)(d+1)^{(d+1)/d}/(2d²)`, reached at `η = 1/(d+1)`. It lies
/// below `C★`: between the two the droplet exists but loses to the uniform
/// state.
pub fn stationary_threshold(d: usize) -> f64 {
    let df = d as f64;
    (df - 1.0) * (df + 1.0).powf((df + 1.0) / df) / (2.0 * df * df)
}

/// `D(K) = C(-1 + K L^{-d/(d+1)})`, which does not depend on `L`.
pub fn d_of_k(k: f64, d: usize, s: f64, chi: f64) -> f64 {
    let df = d as f64;
    2.0 / (df * chi * s) * unit_ball_volume(d).powf(-1.0 / df) * (k / 2.0).powf((df + 1.0) / df)
}

/// Critical density coefficient: `D(K★) = C★`.
pub fn k_star(d: usize, s: f64, chi: f64) -> f64 {
    let df = d as f64;
    (df + 1.0) * unit_ball_volume(d).powf(1.0 / (df + 1.0)) * (chi * s / 2.0).powf(df / (df + 1.0))
}

/// `K★` found by bisection on the monotone map `K ↦ D(K) - C★`.
pub fn k_star_by_root(d: usize, s: f64, chi: f64) -> f64 {
    let target = c_star(d);
    let mut lo = 0.0;
    let mut hi = 1.0;
    while d_of_k(hi, d, s, chi) < target {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if d_of_k(mid, d, s, chi) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Closed forms exactly as they are commonly quoted. They coincide with the
/// constants above for `d = 2` only, and `eta_star_*` never give the tie
/// point; they are kept so reports can show the discrepancy.
pub mod printed {
    /// `(1/d)((d+1)/2)^{(d+1)/2}`.
    pub fn c_star(d: usize) -> f64 {
        let df = d as f64;
        ((df + 1.0) / 2.0).powf((df + 1.0) / 2.0) / df
    }

    /// `(dC★)^{-d}`; equals `8/27` in `d = 2` but `Φ(8/27) > Φ(0)` at `C★`.
    pub fn eta_star_relation(d: usize) -> f64 {
        let df = d as f64;
        (df * c_star(d)).powf(-df)
    }

    /// `((d+1)/2)^{(d+1)/(2d)}`, which exceeds one.
    pub fn eta_star_display(d: usize) -> f64 {
        let df = d as f64;
        ((df + 1.0) / 2.0).powf((df + 1.0) / (2.0 * df))
    }

    /// `2((d+1)/2)^{d/2}(σ_d/d)^{1/(d+1)}(χS/2)^{d/(d+1)}`.
    pub fn k_star(d: usize, s: f64, chi: f64) -> f64 {
        let df = d as f64;
        2.0 * ((df + 1.0) / 2.0).powf(df / 2.0)
            * super::unit_ball_volume(d).powf(1.0 / (df + 1.0))
            * (chi * s / 2.0).powf(df / (df + 1.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalConstants {
    pub d: usize,
    #[serde(rename = "S")]
    pub s: f64,
    pub chi: f64,
    pub c_star: f64,
    pub eta_star: f64,
    pub k_star: f64,
}

pub fn critical_constants(d: usize) -> CriticalConstants {
    let s = surface_tension();
    CriticalConstants { d, s, chi: CHI, c_star: c_star(d), eta_star: eta_star(d), k_star: k_star(d, s, CHI) }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Uniform,
    Droplet,
    Critical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhenomenologicalResult {
    pub eta_c: f64,
    /// `min Φ/(S|Γ₀|)`.
    pub phi_min: f64,
    pub c_of_n: f64,
    pub regime: Regime,
    /// The other minimizer when `regime` is `Critical` (`eta_c` is the
    /// droplet one, this is `0`).
    pub tie_eta: Option<f64>,
}

/// Minimize `η ↦ η^{1-1/d} + C(1-η)²` over `[0, 1]`.
pub fn minimize_phi(c: f64, d: usize) -> PhenomenologicalResult {
    let cs = c_star(d);
    let es = eta_star(d);
    if (c - cs).abs() <= CRITICAL_TOLERANCE * cs {
        return PhenomenologicalResult {
            eta_c: es,
            phi_min: phi_reduced(0.0, c, d).min(phi_reduced(es, c, d)),
            c_of_n: c,
            regime: Regime::Critical,
            tie_eta: Some(0.0),
        };
    }
    if c < cs {
        return PhenomenologicalResult { eta_c: 0.0, phi_min: c, c_of_n: c, regime: Regime::Uniform, tie_eta: None };
    }
    // The slope is convex in η, negative at η★ and positive at 1 once C > C★.
    let (mut lo, mut hi) = (es, 1.0);
    let mut eta = 0.5 * (lo + hi);
    for _ in 0..200 {
        eta = 0.5 * (lo + hi);
        let g = phi_slope(eta, c, d);
        if g.abs() < 1e-12 && hi - lo < 1e-12 {
            break;
        }
        if g < 0.0 {
            lo = eta;
        } else {
            hi = eta;
        }
        if hi - lo <= 4.0 * f64::EPSILON {
            break;
        }
    }
    PhenomenologicalResult {
        eta_c: eta,
        phi_min: phi_reduced(eta, c, d),
        c_of_n: c,
        regime: Regime::Droplet,
        tie_eta: None,
    }
}
