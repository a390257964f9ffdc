//! Order-parameter fields on a periodic grid and the trial-function
//! constructors: uniform, equimolar droplet, fractional droplet and sharp
//! droplet.
//!
//! The torus is represented as the centered cube `[-L/2, L/2)^d`; grid point
//! `i` along an axis sits at `(i - N/2) h`, so index `N/2` is the origin.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::analytic::{geometry, ProblemSpec};
use crate::error::{Error, Result};
use crate::profile1d::PlanarProfile;

/// Largest grid spacing that still resolves the `√2`-wide interface.
pub const MAX_RESOLVING_SPACING: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub d: usize,
    #[serde(rename = "N")]
    pub n_side: usize,
    #[serde(rename = "L")]
    pub length: f64,
}

impl Grid {
    pub fn new(d: usize, n_side: usize, length: f64) -> Result<Self> {
        match d {
            2 => {}
            3 if n_side <= 128 => {}
            3 => return Err(Error::Domain(format!("three-dimensional grids are limited to N <= 128, got {n_side}"))),
            _ => return Err(Error::Domain(format!("only d = 2 and d = 3 grids are supported, got {d}"))),
        }
        if n_side < 8 {
            return Err(Error::Domain(format!("need at least 8 points per side, got {n_side}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::Domain(format!("box side must be positive, got {length}")));
        }
        Ok(Self { d, n_side, length })
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n_side as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.d as i32)
    }

    pub fn len(&self) -> usize {
        self.n_side.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn resolves_interface(&self) -> bool {
        self.spacing() <= MAX_RESOLVING_SPACING
    }

    pub fn require_resolution(&self) -> Result<()> {
        if self.resolves_interface() {
            Ok(())
        } else {
            Err(Error::Precondition(format!(
                "grid spacing {:.4} exceeds {MAX_RESOLVING_SPACING}; the interface is not resolved",
                self.spacing()
            )))
        }
    }

    /// Stride of axis `axis` in the row-major value array.
    pub fn stride(&self, axis: usize) -> usize {
        self.n_side.pow((self.d - 1 - axis) as u32)
    }

    /// Integer coordinates of a flat index, slowest axis first.
    pub fn unflatten(&self, mut index: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for axis in (0..self.d).rev() {
            out[axis] = index % self.n_side;
            index /= self.n_side;
        }
        out
    }

    pub fn flatten(&self, coords: &[usize]) -> usize {
        coords[..self.d].iter().fold(0, |acc, &c| acc * self.n_side + c)
    }

    /// Physical coordinate of grid index `i` along any axis.
    pub fn coordinate(&self, i: usize) -> f64 {
        (i as f64 - (self.n_side / 2) as f64) * self.spacing()
    }

    /// Distance of every grid point from the origin of the centered cube.
    pub fn radii(&self) -> Vec<f64> {
        let coords: Vec<f64> = (0..self.n_side).map(|i| self.coordinate(i)).collect();
        (0..self.len())
            .map(|idx| {
                let c = self.unflatten(idx);
                c[..self.d].iter().map(|&i| coords[i] * coords[i]).sum::<f64>().sqrt()
            })
            .collect()
    }
}

/// Neumaier-compensated sum in iteration order.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            carry += (sum - t) + v;
        } else {
            carry += (v - t) + sum;
        }
        sum = t;
    }
    sum + carry
}

#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl Field {
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Format(format!("expected {} values, got {}", grid.len(), values.len())));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn mean(&self) -> f64 {
        compensated_sum(self.values.iter().copied()) / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// `sup |self - value|`.
    pub fn sup_distance_to(&self, value: f64) -> f64 {
        self.values.iter().map(|v| (v - value).abs()).fold(0.0, f64::max)
    }

    pub fn add_constant(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v += c);
    }
}

fn spec_for(grid: &Grid, n: f64) -> Result<ProblemSpec> {
    ProblemSpec::new(grid.d, grid.length, n)
}

/// The supersaturated state `m ≡ n`.
pub fn uniform_field(grid: Grid, n: f64) -> Result<Field> {
    spec_for(&grid, n)?;
    Ok(Field::constant(grid, n))
}

fn radial_field(grid: Grid, profile: impl Fn(f64) -> f64) -> Field {
    let values = grid.radii().into_iter().map(profile).collect();
    Field { grid, values }
}

/// `m₀(|x| - r₀)`; its mean is close to, but not exactly, `n`.
pub fn equimolar_droplet(grid: Grid, n: f64) -> Result<Field> {
    let geo = geometry(&spec_for(&grid, n)?);
    if !(geo.r0 > 0.0) {
        return Err(Error::Precondition("equimolar droplet needs n > -1".into()));
    }
    if !geo.sphere_regime {
        return Err(Error::Precondition(format!(
            "equimolar radius {:.3} exceeds the sphere/strip crossover {:.3}",
            geo.r0, geo.r_c
        )));
    }
    let profile = PlanarProfile::new(grid.length, grid.d);
    Ok(radial_field(grid, |rho| profile.value(rho - geo.r0)))
}

/// `m₀(|x| - η^{1/d} r₀) + α`, with `α` set by exact discrete mass balance so
/// that the grid mean is `n`. Returns the field and `α`.
pub fn fractional_droplet(grid: Grid, n: f64, eta: f64) -> Result<(Field, f64)> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("volume fraction must lie in [0, 1], got {eta}")));
    }
    let geo = geometry(&spec_for(&grid, n)?);
    let radius = eta.powf(1.0 / grid.d as f64) * geo.r0;
    let mut field = if radius > 0.0 {
        let profile = PlanarProfile::new(grid.length, grid.d);
        radial_field(grid, |rho| profile.value(rho - radius))
    } else {
        Field::constant(grid, -1.0)
    };
    let alpha = n - field.mean();
    field.add_constant(alpha);
    // One correction pass absorbs the rounding of the first shift.
    let residual = n - field.mean();
    field.add_constant(residual);
    Ok((field, alpha + residual))
}

/// Sharp-interface droplet: `+1` for `|x| < η^{1/d} r₀`, `-1` elsewhere.
pub fn sharp_droplet(grid: Grid, n: f64, eta: f64) -> Result<Field> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Domain(format!("volume fraction must lie in [0, 1], got {eta}")));
    }
    let geo = geometry(&spec_for(&grid, n)?);
    let radius = eta.powf(1.0 / grid.d as f64) * geo.r0;
    Ok(radial_field(grid, |rho| if rho < radius { 1.0 } else { -1.0 }))
}

/// Cyclic shift: the value at `i` moves to `i + shift (mod N)`.
pub fn translate(field: &Field, shift: &[usize]) -> Result<Field> {
    let grid = field.grid;
    if shift.len() != grid.d || shift.iter().any(|&s| s >= grid.n_side) {
        return Err(Error::Domain(format!("shift {shift:?} must have {} components in [0, {})", grid.d, grid.n_side)));
    }
    let n = grid.n_side;
    let mut values = vec![0.0; grid.len()];
    for (idx, &v) in field.values.iter().enumerate() {
        let c = grid.unflatten(idx);
        let mut moved = [0; 3];
        for axis in 0..grid.d {
            moved[axis] = (c[axis] + shift[axis]) % n;
        }
        values[grid.flatten(&moved)] = v;
    }
    Ok(Field { grid, values })
}

/// JSON header line of a field snapshot file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub d: usize,
    #[serde(rename = "N")]
    pub n_side: usize,
    #[serde(rename = "L")]
    pub length: f64,
    pub n: f64,
    pub tag: String,
}

/// Header line, newline, then `N^d` little-endian `f64` values in row-major
/// order.
pub fn write_snapshot(path: &Path, field: &Field, n: f64, tag: &str) -> Result<()> {
    let header = SnapshotHeader {
        d: field.grid.d,
        n_side: field.grid.n_side,
        length: field.grid.length,
        n,
        tag: tag.to_string(),
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for v in &field.values {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, Field)> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if !line.ends_with('\n') {
        return Err(Error::Format("header line is not newline-terminated".into()));
    }
    let header: SnapshotHeader = serde_json::from_str(line.trim_end())?;
    let grid = Grid::new(header.d, header.n_side, header.length)?;
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    if payload.len() != grid.len() * 8 {
        return Err(Error::Format(format!("payload has {} bytes, header implies {}", payload.len(), grid.len() * 8)));
    }
    let values = payload.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes"))).collect();
    Ok((header, Field { grid, values }))
}
