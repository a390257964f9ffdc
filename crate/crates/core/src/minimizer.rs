//! Constrained minimization of the discrete free energy from several seeds.
//!
//! Two descent schemes share the zero-mean projection: the explicit projected
//! flow `m ← m - τ P(δF/δm)` with step halving, and a limited-memory BFGS
//! iteration on the same constraint plane (the default, because the explicit
//! step `h²/(4d)` needs far too many iterations on interface-resolving grids).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::analytic::{c_of_n, eta_star, geometry, minimize_phi, surface_tension, ProblemSpec, CHI};
use crate::energy::{energy_and_variation, Accumulator, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::field::{compensated_sum, fractional_droplet, read_snapshot, uniform_field, Field, Grid};

/// Relative energy gap below which two seeds count as tied.
pub const TIE_TOLERANCE: f64 = 1e-10;
/// Energy slack allowed per accepted step.
pub const MONOTONE_SLACK: f64 = 1e-12;
/// Step halvings before the explicit flow gives up.
pub const MAX_HALVINGS: usize = 30;
/// Sanity bound on `|m|` during descent.
pub const VALUE_BOUND: f64 = 2.0;

const ARMIJO: f64 = 1e-4;
const LINE_SEARCH_STEPS: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Lbfgs,
    ExplicitFlow,
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lbfgs" => Ok(Scheme::Lbfgs),
            "explicit" | "explicit-flow" => Ok(Scheme::ExplicitFlow),
            _ => Err(Error::Domain(format!("unknown scheme '{s}'"))),
        }
    }
}

/// Initial field for one descent run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Seed {
    Uniform,
    /// Fractional droplet at the minimal volume fraction.
    EtaStar,
    /// Fractional droplet at the minimizer of the phenomenological energy.
    EtaAnalytic,
    /// Fractional droplet holding all of the excess mass.
    Equimolar,
    Fraction(f64),
    File(PathBuf),
}

impl Seed {
    pub fn defaults() -> Vec<Seed> {
        vec![Seed::Uniform, Seed::EtaStar, Seed::EtaAnalytic, Seed::Equimolar]
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Seed::Uniform => write!(f, "uniform"),
            Seed::EtaStar => write!(f, "eta-star"),
            Seed::EtaAnalytic => write!(f, "eta-c"),
            Seed::Equimolar => write!(f, "equimolar"),
            Seed::Fraction(eta) => write!(f, "eta={eta}"),
            Seed::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for Seed {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "uniform" => return Ok(Seed::Uniform),
            "eta-star" => return Ok(Seed::EtaStar),
            "eta-c" => return Ok(Seed::EtaAnalytic),
            "equimolar" => return Ok(Seed::Equimolar),
            _ => {}
        }
        if let Some(v) = s.strip_prefix("eta=") {
            let eta: f64 = v.parse().map_err(|_| Error::Domain(format!("bad volume fraction in seed '{s}'")))?;
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::Domain(format!("seed volume fraction {eta} outside [0, 1]")));
            }
            return Ok(Seed::Fraction(eta));
        }
        if let Some(p) = s.strip_prefix("file:") {
            return Ok(Seed::File(PathBuf::from(p)));
        }
        Err(Error::Domain(format!("unknown seed '{s}'")))
    }
}

/// Builds the initial field of a seed with mean exactly `spec.n`.
pub fn seed_field(seed: &Seed, spec: &ProblemSpec, grid: Grid) -> Result<Field> {
    let n = spec.n;
    let droplet = |eta: f64| fractional_droplet(grid, n, eta).map(|(f, _)| f);
    match seed {
        Seed::Uniform => uniform_field(grid, n),
        Seed::EtaStar => droplet(eta_star(spec.d)),
        Seed::EtaAnalytic => {
            let c = c_of_n(spec, surface_tension(), CHI);
            droplet(minimize_phi(c, spec.d).eta_c)
        }
        Seed::Equimolar => droplet(1.0),
        Seed::Fraction(eta) => droplet(*eta),
        Seed::File(path) => {
            let (_, mut field) = read_snapshot(path)?;
            if field.grid != grid {
                return Err(Error::Precondition(format!("snapshot {} is on a different grid", path.display())));
            }
            let shift = n - field.mean();
            field.add_constant(shift);
            Ok(field)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub scheme: Scheme,
    /// Explicit-flow step; `None` means the stability bound `h²/(4d)`.
    pub step_tau: Option<f64>,
    pub max_iters: usize,
    pub tol_residual: f64,
    pub seeds: Vec<Seed>,
    /// Number of stored correction pairs for the quasi-Newton scheme.
    pub history: usize,
    /// Keep every `trace_stride`-th iterate in the energy trace.
    pub trace_stride: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Lbfgs,
            step_tau: None,
            max_iters: 200_000,
            tol_residual: 1e-6,
            seeds: Seed::defaults(),
            history: 10,
            trace_stride: 1,
        }
    }
}

/// Explicit-stability bound `h²/(4d)`.
pub fn stable_step(grid: &Grid) -> f64 {
    grid.spacing().powi(2) / (4.0 * grid.d as f64)
}

impl FlowConfig {
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !(self.tol_residual > 0.0) {
            return Err(Error::Domain(format!("residual tolerance must be positive, got {}", self.tol_residual)));
        }
        if let Some(tau) = self.step_tau {
            let bound = stable_step(grid);
            if !(tau > 0.0) || tau > bound * (1.0 + 1e-12) {
                return Err(Error::Domain(format!("step {tau} must lie in (0, {bound}]")));
            }
        }
        if self.seeds.is_empty() {
            return Err(Error::Domain("at least one seed is required".into()));
        }
        if self.history == 0 || self.trace_stride == 0 {
            return Err(Error::Domain("history and trace stride must be positive".into()));
        }
        Ok(())
    }

    pub fn tau(&self, grid: &Grid) -> f64 {
        self.step_tau.unwrap_or_else(|| stable_step(grid))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iter: usize,
    pub energy: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: String,
    pub energy: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_value: f64,
}

#[derive(Clone, Serialize)]
pub struct MinimizeReport {
    #[serde(skip)]
    pub best_field: Field,
    pub best_seed: String,
    pub energy: EnergyBreakdown,
    pub mu_hat: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub per_seed_energies: Vec<SeedOutcome>,
    pub energy_trace: Vec<TracePoint>,
    /// Another seed reached a different field within the tie tolerance.
    pub tie: bool,
    pub max_value: f64,
    /// `1 + δ + 10·tol`, the a priori bound on the maximum of a minimizer.
    pub max_bound: f64,
    pub max_bound_holds: bool,
}

impl fmt::Debug for MinimizeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MinimizeReport")
            .field("best_seed", &self.best_seed)
            .field("energy", &self.energy)
            .field("mu_hat", &self.mu_hat)
            .field("residual", &self.residual)
            .field("iterations", &self.iterations)
            .field("converged", &self.converged)
            .field("per_seed_energies", &self.per_seed_energies)
            .field("tie", &self.tie)
            .finish_non_exhaustive()
    }
}

/// Subtracts the mean. A mean already below the rounding floor of the values
/// is left alone, which makes the projection exactly idempotent.
pub fn project_zero_mean(direction: &Field) -> Field {
    let mut out = direction.clone();
    project_in_place(&mut out.values);
    out
}

fn project_in_place(values: &mut [f64]) -> f64 {
    let len = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / len;
    let scale = compensated_sum(values.iter().map(|v| v.abs())) / len;
    if mean.abs() > 4.0 * f64::EPSILON * scale {
        values.iter_mut().for_each(|v| *v -= mean);
    }
    mean
}

fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |a, v| a.max(v.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = Accumulator::default();
    for (x, y) in a.iter().zip(b) {
        acc.add(x * y);
    }
    acc.value()
}

#[derive(Clone, Debug)]
pub struct FlowStep {
    pub field: Field,
    pub tau: f64,
    pub energy: EnergyBreakdown,
}

/// One explicit projected step `m - τ P(δF/δm)`. The step is halved until the
/// energy does not increase and `|m| ≤ 2`; after 30 halvings this fails.
pub fn flow_step(field: &Field, tau: f64) -> Result<FlowStep> {
    let grid = field.grid;
    let mut var = vec![0.0; grid.len()];
    let e0 = energy_and_variation(&grid, &field.values, &mut var);
    project_in_place(&mut var);
    let mut scratch = vec![0.0; grid.len()];
    let mut t = tau;
    for _ in 0..=MAX_HALVINGS {
        let values: Vec<f64> = field.values.iter().zip(&var).map(|(m, v)| m - t * v).collect();
        if sup_norm(&values) <= VALUE_BOUND {
            let e = energy_and_variation(&grid, &values, &mut scratch);
            if e.total <= e0.total + MONOTONE_SLACK * e0.total.abs() {
                return Ok(FlowStep { field: Field { grid, values }, tau: t, energy: e });
            }
        }
        t *= 0.5;
    }
    Err(Error::Flow(format!("energy increased after {MAX_HALVINGS} step halvings from tau = {tau:e}")))
}

struct SeedRun {
    field: Field,
    energy: EnergyBreakdown,
    mu_hat: f64,
    residual: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<TracePoint>,
}

/// Removes the drift of the mean left by rounding.
fn pin_mean(values: &mut [f64], n: f64) {
    let mean = compensated_sum(values.iter().copied()) / values.len() as f64;
    let shift = n - mean;
    if shift != 0.0 {
        values.iter_mut().for_each(|v| *v += shift);
    }
}

fn run_explicit(start: Field, n: f64, config: &FlowConfig) -> Result<SeedRun> {
    let grid = start.grid;
    let mut tau = config.tau(&grid);
    let mut field = start;
    let mut var = vec![0.0; grid.len()];
    let mut energy = energy_and_variation(&grid, &field.values, &mut var);
    let mut mu = -project_in_place(&mut var);
    let mut residual = sup_norm(&var);
    let mut trace = vec![TracePoint { iter: 0, energy: energy.total, residual }];
    let mut iterations = 0;
    while residual >= config.tol_residual && iterations < config.max_iters {
        let step = flow_step(&field, tau)?;
        tau = step.tau;
        field = step.field;
        pin_mean(&mut field.values, n);
        iterations += 1;
        energy = energy_and_variation(&grid, &field.values, &mut var);
        mu = -project_in_place(&mut var);
        residual = sup_norm(&var);
        if iterations % config.trace_stride == 0 {
            trace.push(TracePoint { iter: iterations, energy: energy.total, residual });
        }
    }
    Ok(SeedRun { field, energy, mu_hat: mu, residual, iterations, converged: residual < config.tol_residual, trace })
}

struct History {
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    rho: VecDeque<f64>,
    cap: usize,
}

impl History {
    fn new(cap: usize) -> Self {
        Self { s: VecDeque::new(), y: VecDeque::new(), rho: VecDeque::new(), cap }
    }

    fn clear(&mut self) {
        self.s.clear();
        self.y.clear();
        self.rho.clear();
    }

    fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    /// Stores `(x_new - x, g_new - g)`, recycling the oldest buffers.
    fn push(&mut self, x_new: &[f64], x: &[f64], g_new: &[f64], g: &[f64]) {
        let (mut s, mut y) = if self.s.len() == self.cap {
            self.rho.pop_front();
            (self.s.pop_front().expect("full"), self.y.pop_front().expect("full"))
        } else {
            (vec![0.0; x.len()], vec![0.0; x.len()])
        };
        for i in 0..x.len() {
            s[i] = x_new[i] - x[i];
            y[i] = g_new[i] - g[i];
        }
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            self.rho.push_back(1.0 / sy);
            self.s.push_back(s);
            self.y.push_back(y);
        }
    }

    /// Two-loop recursion; writes `-H g` into `dir`.
    fn direction(&self, g: &[f64], gamma0: f64, dir: &mut [f64]) {
        dir.copy_from_slice(g);
        let k = self.s.len();
        let mut alpha = vec![0.0; k];
        for i in (0..k).rev() {
            alpha[i] = self.rho[i] * dot(&self.s[i], dir);
            let a = alpha[i];
            dir.iter_mut().zip(&self.y[i]).for_each(|(d, y)| *d -= a * y);
        }
        let gamma = match k {
            0 => gamma0,
            _ => 1.0 / (self.rho[k - 1] * dot(&self.y[k - 1], &self.y[k - 1])),
        };
        dir.iter_mut().for_each(|d| *d *= gamma);
        for (i, a) in alpha.iter().enumerate().take(k) {
            let beta = self.rho[i] * dot(&self.y[i], dir);
            let c = a - beta;
            dir.iter_mut().zip(&self.s[i]).for_each(|(d, s)| *d += c * s);
        }
        dir.iter_mut().for_each(|d| *d = -*d);
    }
}

fn run_lbfgs(start: Field, n: f64, config: &FlowConfig) -> SeedRun {
    let grid = start.grid;
    let len = grid.len();
    let cell = grid.cell_volume();
    let h2 = grid.spacing().powi(2);
    // Inverse of the largest Hessian eigenvalue of a ±1 state.
    let gamma0 = 1.0 / (cell * (4.0 * grid.d as f64 / h2 + 2.0));

    let mut x = start.values;
    let mut var = vec![0.0; len];
    let mut energy = energy_and_variation(&grid, &x, &mut var);
    let mut mu = -project_in_place(&mut var);
    let mut residual = sup_norm(&var);
    let mut g: Vec<f64> = var.iter().map(|v| v * cell).collect();

    let mut x_new = vec![0.0; len];
    let mut g_new = vec![0.0; len];
    let mut dir = vec![0.0; len];
    let mut history = History::new(config.history);
    let mut trace = vec![TracePoint { iter: 0, energy: energy.total, residual }];
    let mut iterations = 0;

    while residual >= config.tol_residual && iterations < config.max_iters {
        history.direction(&g, gamma0, &mut dir);
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            history.clear();
            history.direction(&g, gamma0, &mut dir);
            slope = dot(&g, &dir);
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..LINE_SEARCH_STEPS {
            for i in 0..len {
                x_new[i] = x[i] + step * dir[i];
            }
            pin_mean(&mut x_new, n);
            if sup_norm(&x_new) <= VALUE_BOUND {
                let e = energy_and_variation(&grid, &x_new, &mut var);
                if e.total <= energy.total + ARMIJO * step * slope {
                    accepted = Some(e);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(e_new) = accepted else {
            if history.is_empty() {
                break;
            }
            history.clear();
            continue;
        };
        mu = -project_in_place(&mut var);
        residual = sup_norm(&var);
        for i in 0..len {
            g_new[i] = var[i] * cell;
        }
        history.push(&x_new, &x, &g_new, &g);
        std::mem::swap(&mut x, &mut x_new);
        std::mem::swap(&mut g, &mut g_new);
        energy = e_new;
        iterations += 1;
        if iterations % config.trace_stride == 0 {
            trace.push(TracePoint { iter: iterations, energy: energy.total, residual });
        }
    }
    if trace.last().map(|t| t.iter) != Some(iterations) {
        trace.push(TracePoint { iter: iterations, energy: energy.total, residual });
    }
    SeedRun {
        field: Field { grid, values: x },
        energy,
        mu_hat: mu,
        residual,
        iterations,
        converged: residual < config.tol_residual,
        trace,
    }
}

fn run_seed(start: Field, n: f64, config: &FlowConfig) -> Result<SeedRun> {
    match config.scheme {
        Scheme::Lbfgs => Ok(run_lbfgs(start, n, config)),
        Scheme::ExplicitFlow => run_explicit(start, n, config),
    }
}

pub fn check_problem(spec: &ProblemSpec, grid: &Grid) -> Result<()> {
    if grid.d != spec.d || grid.length != spec.length {
        return Err(Error::Precondition("grid and problem disagree on dimension or box side".into()));
    }
    grid.require_resolution()?;
    let geo = geometry(spec);
    if !geo.sphere_regime {
        return Err(Error::Precondition(format!(
            "equimolar radius {:.3} exceeds the sphere/strip crossover {:.3}",
            geo.r0, geo.r_c
        )));
    }
    Ok(())
}

/// Runs every seed and returns the lowest-energy converged critical point.
pub fn minimize(spec: &ProblemSpec, grid: Grid, config: &FlowConfig) -> Result<MinimizeReport> {
    check_problem(spec, &grid)?;
    config.validate(&grid)?;
    let starts =
        config.seeds.iter().map(|s| seed_field(s, spec, grid).map(|f| (s.label(), f))).collect::<Result<Vec<_>>>()?;
    let runs = starts
        .into_par_iter()
        .map(|(label, f)| run_seed(f, spec.n, config).map(|r| (label, r)))
        .collect::<Result<Vec<_>>>()?;

    let outcomes: Vec<SeedOutcome> = runs
        .iter()
        .map(|(label, r)| SeedOutcome {
            seed: label.clone(),
            energy: r.energy.total,
            residual: r.residual,
            iterations: r.iterations,
            converged: r.converged,
            max_value: r.field.max(),
        })
        .collect();

    let lowest = |pool: &mut dyn Iterator<Item = usize>| {
        pool.min_by(|&a, &b| runs[a].1.energy.total.total_cmp(&runs[b].1.energy.total))
    };
    let any_converged = runs.iter().any(|(_, r)| r.converged);
    let mut best = if any_converged {
        lowest(&mut (0..runs.len()).filter(|&i| runs[i].1.converged)).expect("nonempty")
    } else {
        lowest(&mut (0..runs.len())).expect("at least one seed")
    };
    let mut tie = false;
    if any_converged {
        let e_best = runs[best].1.energy.total;
        let close =
            |i: usize| runs[i].1.converged && (runs[i].1.energy.total - e_best).abs() <= TIE_TOLERANCE * e_best.abs();
        tie = (0..runs.len()).any(|i| {
            i != best && close(i) && field_gap(&runs[i].1.field, &runs[best].1.field) > 100.0 * config.tol_residual
        });
        if let Some(u) = (0..runs.len()).find(|&i| runs[i].0 == Seed::Uniform.label() && close(i)) {
            best = u;
        }
    }

    let (label, run) = runs.into_iter().nth(best).expect("index in range");
    let max_value = run.field.max();
    let max_bound = 1.0 + spec.delta() + 10.0 * config.tol_residual;
    let report = MinimizeReport {
        best_seed: label,
        energy: run.energy,
        mu_hat: run.mu_hat,
        residual: run.residual,
        iterations: run.iterations,
        converged: run.converged,
        per_seed_energies: outcomes,
        energy_trace: run.trace,
        tie,
        max_value,
        max_bound,
        max_bound_holds: max_value <= max_bound,
        best_field: run.field,
    };
    if report.converged {
        Ok(report)
    } else {
        Err(Error::NotConverged(Box::new(report)))
    }
}

fn field_gap(a: &Field, b: &Field) -> f64 {
    a.values.iter().zip(&b.values).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn write_trace_csv(path: &Path, trace: &[TracePoint]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "iter,energy,residual")?;
    for t in trace {
        writeln!(out, "{},{:.17e},{:.6e}", t.iter, t.energy, t.residual)?;
    }
    out.flush()?;
    Ok(())
}
