//! Droplet measurements on a field: the κ-partition into near-`+1`,
//! near-`-1` and transition cells, the effective radius and volume fraction,
//! the normalized `L⁴` distance to a sharp droplet, and level-set topology.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::analytic::{eta_star, geometry, unit_ball_volume, ProblemSpec};
use crate::error::{Error, Result};
use crate::field::{compensated_sum, Field, Grid};

/// Half-width of the exhaustive translation search around the centroid.
pub const SEARCH_RADIUS: isize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Uniform,
    Droplet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DropletDiagnostics {
    pub kappa: f64,
    pub h_plus: f64,
    pub h_minus: f64,
    pub vol_a: f64,
    pub vol_b: f64,
    pub vol_c: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub eta_measured: f64,
    pub l4_distance: Option<f64>,
    pub classification: Option<Classification>,
}

impl DropletDiagnostics {
    pub const CSV_HEADER: &'static str = "kappa,vol_a,vol_b,vol_c,R,eta_measured,l4_distance,classification";

    pub fn csv_row(&self) -> String {
        let l4 = self.l4_distance.map(|v| format!("{v:.10e}")).unwrap_or_default();
        let class = match self.classification {
            Some(Classification::Uniform) => "uniform",
            Some(Classification::Droplet) => "droplet",
            None => "",
        };
        format!(
            "{:.10},{:.10e},{:.10e},{:.10e},{:.10},{:.10},{l4},{class}",
            self.kappa, self.vol_a, self.vol_b, self.vol_c, self.radius, self.eta_measured
        )
    }
}

/// `κ = max(δ^{1/3}, √2 h)`: the asymptotic choice, floored at the change of
/// the planar profile across two cells.
pub fn kappa_for(delta: f64, spacing: f64) -> f64 {
    delta.cbrt().max(2f64.sqrt() * spacing)
}

fn spec_for(field: &Field, n: f64) -> Result<ProblemSpec> {
    let spec = ProblemSpec::new(field.grid.d, field.grid.length, n)?;
    if !(spec.delta() > 0.0) {
        return Err(Error::Precondition("diagnostics need n > -1".into()));
    }
    Ok(spec)
}

/// Volumes of `A = {h₋ < m < h₊}`, `B = {m ≤ h₋}`, `C = {m ≥ h₊}`, the radius
/// `R` with `(σ_d/d)R^d = |C|` and `η = (R/r₀)^d`.
pub fn partition_volumes(field: &Field, n: f64) -> Result<DropletDiagnostics> {
    let spec = spec_for(field, n)?;
    let grid = field.grid;
    let kappa = kappa_for(spec.delta(), grid.spacing());
    let (h_plus, h_minus) = (1.0 - kappa, -1.0 + kappa);
    let (mut a, mut b, mut c) = (0usize, 0usize, 0usize);
    for &m in &field.values {
        if m >= h_plus {
            c += 1;
        } else if m <= h_minus {
            b += 1;
        } else {
            a += 1;
        }
    }
    let cell = grid.cell_volume();
    let vol_c = c as f64 * cell;
    let d = grid.d as i32;
    let radius = (vol_c / unit_ball_volume(grid.d)).powf(1.0 / d as f64);
    let r0 = geometry(&spec).r0;
    Ok(DropletDiagnostics {
        kappa,
        h_plus,
        h_minus,
        vol_a: a as f64 * cell,
        vol_b: b as f64 * cell,
        vol_c,
        radius,
        eta_measured: (radius / r0).powi(d),
        l4_distance: None,
        classification: None,
    })
}

/// Droplet when `η_measured ≥ threshold`.
pub fn classify(diag: &DropletDiagnostics, eta_threshold: f64) -> Classification {
    if diag.eta_measured >= eta_threshold {
        Classification::Droplet
    } else {
        Classification::Uniform
    }
}

/// `η★/2`.
pub fn default_threshold(d: usize) -> f64 {
    eta_star(d) / 2.0
}

/// Periodic centroid of `{m > 0}` per axis (circular mean), rounded to a grid
/// index; the argmax when the set is empty.
fn positive_centroid(field: &Field) -> [usize; 3] {
    let grid = field.grid;
    let n = grid.n_side;
    let mut sums = [[0.0f64; 2]; 3];
    let mut count = 0usize;
    for (idx, &m) in field.values.iter().enumerate() {
        if m > 0.0 {
            count += 1;
            let c = grid.unflatten(idx);
            for axis in 0..grid.d {
                let angle = 2.0 * PI * c[axis] as f64 / n as f64;
                sums[axis][0] += angle.cos();
                sums[axis][1] += angle.sin();
            }
        }
    }
    if count == 0 {
        return grid.unflatten(field.argmax());
    }
    let mut out = [0; 3];
    for axis in 0..grid.d {
        let angle = sums[axis][1].atan2(sums[axis][0]).rem_euclid(2.0 * PI);
        out[axis] = ((angle / (2.0 * PI) * n as f64).round() as usize) % n;
    }
    out
}

/// Integer offsets inside the ball of radius `radius` around a grid point.
fn ball_offsets(grid: &Grid, radius: f64) -> Vec<[isize; 3]> {
    let h = grid.spacing();
    let reach = (radius / h).ceil() as isize;
    let mut out = Vec::new();
    let range = |active: bool| if active { -reach..=reach } else { 0..=0 };
    for i in range(true) {
        for j in range(grid.d >= 2) {
            for k in range(grid.d >= 3) {
                let r2 = ((i * i + j * j + k * k) as f64) * h * h;
                if r2.sqrt() < radius {
                    out.push([i, j, k]);
                }
            }
        }
    }
    out
}

fn wrap(c: usize, o: isize, n: usize) -> usize {
    (c as isize + o).rem_euclid(n as isize) as usize
}

/// `min_s (1/r₀^d) ∫ |m - m♯(· - s)|⁴` over translations `s` within
/// `±SEARCH_RADIUS` cells of the centroid of `{m > 0}`, where `m♯` is the
/// sharp droplet of volume fraction `eta`.
pub fn l4_distance_to_sharp(field: &Field, n: f64, eta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("volume fraction must lie in [0, 1], got {eta}")));
    }
    let spec = spec_for(field, n)?;
    let grid = field.grid;
    let r0 = geometry(&spec).r0;
    let radius = eta.powf(1.0 / grid.d as f64) * r0;
    let quartic = |x: f64| {
        let s = x * x;
        s * s
    };
    let base = compensated_sum(field.values.iter().map(|&m| quartic(m + 1.0)));
    let offsets = if radius > 0.0 { ball_offsets(&grid, radius) } else { Vec::new() };
    let center = positive_centroid(field);
    let n_side = grid.n_side;
    let active = |axis: usize| if axis < grid.d { -SEARCH_RADIUS..=SEARCH_RADIUS } else { 0..=0 };

    let mut best = f64::INFINITY;
    for si in active(0) {
        for sj in active(1) {
            for sk in active(2) {
                let shift = [si, sj, sk];
                let mut c = [0usize; 3];
                for axis in 0..grid.d {
                    c[axis] = wrap(center[axis], shift[axis], n_side);
                }
                let delta = compensated_sum(offsets.iter().map(|o| {
                    let mut p = [0usize; 3];
                    for axis in 0..grid.d {
                        p[axis] = wrap(c[axis], o[axis], n_side);
                    }
                    let m = field.values[grid.flatten(&p)];
                    quartic(m - 1.0) - quartic(m + 1.0)
                }));
                best = best.min(base + delta);
            }
        }
    }
    Ok(best * grid.cell_volume() / r0.powi(grid.d as i32))
}

/// A priori bound `2δ²κ⁻²L^d` on the transition volume of a minimizer.
pub fn transition_volume_bound(spec: &ProblemSpec, kappa: f64) -> f64 {
    2.0 * spec.delta().powi(2) / (kappa * kappa) * spec.volume()
}

/// Partition, `L⁴` distance to the `eta_reference` sharp droplet and the
/// classification at `threshold`.
pub fn diagnose(field: &Field, n: f64, eta_reference: f64, threshold: f64) -> Result<DropletDiagnostics> {
    let mut diag = partition_volumes(field, n)?;
    diag.l4_distance = Some(l4_distance_to_sharp(field, n, eta_reference)?);
    diag.classification = Some(classify(&diag, threshold));
    Ok(diag)
}

/// Components of `{m > level}` under face adjacency with periodic wrap.
/// Returns whether there is at most one, and the count.
pub fn level_set_connected(field: &Field, level: f64) -> (bool, usize) {
    let grid = field.grid;
    let n = grid.n_side;
    let mut seen = vec![false; grid.len()];
    let mut queue = VecDeque::new();
    let mut components = 0;
    for start in 0..grid.len() {
        if seen[start] || field.values[start] <= level {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            let c = grid.unflatten(idx);
            for axis in 0..grid.d {
                for step in [1, n - 1] {
                    let mut p = c;
                    p[axis] = (c[axis] + step) % n;
                    let j = grid.flatten(&p);
                    if !seen[j] && field.values[j] > level {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    (components <= 1, components)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsoperimetricReport {
    /// Length of the zero contour.
    pub perimeter: f64,
    /// Area of `{m > 0}`.
    pub area: f64,
    /// `perimeter² - 4π·area`.
    pub deficit: f64,
}

/// Marching-squares length of the zero level line and the isoperimetric
/// deficit of `{m > 0}` in `d = 2`. Saddle cells are resolved by pairing
/// crossings in edge order.
pub fn isoperimetric_deficit(field: &Field) -> Result<IsoperimetricReport> {
    let grid = field.grid;
    if grid.d != 2 {
        return Err(Error::Precondition("the isoperimetric report is two-dimensional".into()));
    }
    let n = grid.n_side;
    let h = grid.spacing();
    let at = |i: usize, j: usize| field.values[(i % n) * n + (j % n)];
    let mut segments = Vec::new();
    for i in 0..n {
        for j in 0..n {
            // Corners counterclockwise in (i, j) coordinates.
            let corners = [
                (0.0, 0.0, at(i, j)),
                (1.0, 0.0, at(i + 1, j)),
                (1.0, 1.0, at(i + 1, j + 1)),
                (0.0, 1.0, at(i, j + 1)),
            ];
            let mut crossings: Vec<(f64, f64)> = Vec::with_capacity(4);
            for e in 0..4 {
                let (x0, y0, v0) = corners[e];
                let (x1, y1, v1) = corners[(e + 1) % 4];
                if (v0 > 0.0) != (v1 > 0.0) {
                    let t = v0 / (v0 - v1);
                    crossings.push((x0 + t * (x1 - x0), y0 + t * (y1 - y0)));
                }
            }
            for pair in crossings.chunks_exact(2) {
                let (dx, dy) = (pair[1].0 - pair[0].0, pair[1].1 - pair[0].1);
                segments.push((dx * dx + dy * dy).sqrt());
            }
        }
    }
    let perimeter = compensated_sum(segments) * h;
    let area = field.values.iter().filter(|&&m| m > 0.0).count() as f64 * h * h;
    Ok(IsoperimetricReport { perimeter, area, deficit: perimeter * perimeter - 4.0 * PI * area })
}
