//! Sweeps of the density coefficient `K` across the critical curve: one
//! minimization per point, classification of each minimizer and location of
//! the uniform/droplet flip.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    c_of_n, geometry, minimize_phi, phi, phi_reduced, surface_tension, PhenomenologicalResult, ProblemSpec, Regime, CHI,
};
use crate::diagnostics::{classify, partition_volumes, Classification};
use crate::error::{Error, Result};
use crate::field::Grid;
use crate::minimizer::{minimize, FlowConfig, MinimizeReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "K")]
    pub k: f64,
    pub n: f64,
    pub energy: f64,
    pub energy_per_area: f64,
    pub phi_min_per_area: f64,
    pub eta_measured: f64,
    pub eta_c: f64,
    pub classification: Classification,
    pub best_seed: String,
    pub converged: bool,
}

impl SweepRow {
    pub const CSV_HEADER: &'static str =
        "K,n,energy,energy_per_area,phi_min_per_area,eta_measured,eta_c,classification,best_seed,converged";

    pub fn csv_row(&self) -> String {
        let class = match self.classification {
            Classification::Uniform => "uniform",
            Classification::Droplet => "droplet",
        };
        format!(
            "{:.10},{:.12},{:.12e},{:.12},{:.12},{:.10},{:.10},{class},{},{}",
            self.k,
            self.n,
            self.energy,
            self.energy_per_area,
            self.phi_min_per_area,
            self.eta_measured,
            self.eta_c,
            self.best_seed,
            self.converged
        )
    }

    /// `(f_L - min Φ)/min Φ`.
    pub fn relative_gap(&self) -> f64 {
        (self.energy_per_area - self.phi_min_per_area) / self.phi_min_per_area
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Number of classification changes along increasing `K`.
    pub flips: usize,
    /// `(K_i, K_{i+1})` around the flip when there is exactly one.
    pub bracket: Option<(f64, f64)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiPoint {
    pub eta: f64,
    /// `η^{1-1/d} + C(1-η)²`.
    pub reduced: f64,
    /// `S|Γ₀|` times the reduced value.
    pub phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiScan {
    pub spec: ProblemSpec,
    pub c: f64,
    pub result: PhenomenologicalResult,
    pub points: Vec<PhiPoint>,
    /// Volume fractions of the marked global minima (two at criticality).
    pub minima: Vec<f64>,
}

pub const PHI_CSV_HEADER: &str = "eta,phi_reduced,phi";

impl PhiPoint {
    pub fn csv_row(&self) -> String {
        format!("{:.12},{:.15e},{:.15e}", self.eta, self.reduced, self.phi)
    }
}

/// Tabulates the volume-fraction energy on `points` evenly spaced fractions
/// of `[0, 1]` and marks its minimizers.
pub fn phi_scan(spec: &ProblemSpec, points: usize) -> Result<PhiScan> {
    if points < 2 {
        return Err(Error::Domain(format!("a scan needs at least two points, got {points}")));
    }
    let s = surface_tension();
    let c = c_of_n(spec, s, CHI);
    let gamma0 = geometry(spec).gamma0;
    let result = minimize_phi(c, spec.d);
    let points = linspace(0.0, 1.0, points)
        .into_iter()
        .map(|eta| Ok(PhiPoint { eta, reduced: phi_reduced(eta, c, spec.d), phi: phi(eta, c, s, gamma0, spec.d)? }))
        .collect::<Result<Vec<_>>>()?;
    let minima = match result.regime {
        Regime::Uniform => vec![0.0],
        Regime::Droplet => vec![result.eta_c],
        Regime::Critical => vec![0.0, result.eta_c],
    };
    Ok(PhiScan { spec: *spec, c, result, points, minima })
}

/// `count` evenly spaced values in `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

fn report_or_partial(result: Result<MinimizeReport>) -> Result<MinimizeReport> {
    match result {
        Ok(r) => Ok(r),
        Err(Error::NotConverged(r)) => Ok(*r),
        Err(e) => Err(e),
    }
}

/// One sweep point; non-converged runs keep their best partial result and
/// are marked as such.
pub fn sweep_point(d: usize, length: f64, grid: Grid, k: f64, config: &FlowConfig, threshold: f64) -> Result<SweepRow> {
    let spec = ProblemSpec::from_k(d, length, k)?;
    let s = surface_tension();
    let geo = geometry(&spec);
    let phen = minimize_phi(c_of_n(&spec, s, CHI), d);
    let report = report_or_partial(minimize(&spec, grid, config))?;
    let diag = partition_volumes(&report.best_field, spec.n)?;
    Ok(SweepRow {
        k,
        n: spec.n,
        energy: report.energy.total,
        energy_per_area: report.energy.total / geo.gamma0,
        phi_min_per_area: s * phen.phi_min,
        eta_measured: diag.eta_measured,
        eta_c: phen.eta_c,
        classification: classify(&diag, threshold),
        best_seed: report.best_seed,
        converged: report.converged,
    })
}

/// Runs all points on the current rayon pool; rows come back in `K` order.
pub fn run_sweep(
    d: usize,
    length: f64,
    n_side: usize,
    ks: &[f64],
    config: &FlowConfig,
    threshold: f64,
) -> Result<SweepResult> {
    let grid = Grid::new(d, n_side, length)?;
    let mut ks = ks.to_vec();
    ks.sort_by(|a, b| a.total_cmp(b));
    let rows =
        ks.par_iter().map(|&k| sweep_point(d, length, grid, k, config, threshold)).collect::<Result<Vec<_>>>()?;
    let changes: Vec<usize> =
        (1..rows.len()).filter(|&i| rows[i].classification != rows[i - 1].classification).collect();
    let bracket = match changes.as_slice() {
        [i] => Some((rows[i - 1].k, rows[*i].k)),
        _ => None,
    };
    Ok(SweepResult { flips: changes.len(), bracket, rows })
}
