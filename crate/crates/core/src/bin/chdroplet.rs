#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use chdroplet::analytic::{
    c_of_n, critical_constants, geometry, k_star, minimize_phi, surface_tension, ProblemSpec, Regime, CHI,
};
use chdroplet::constants::{constants_table, ConstantRow};
use chdroplet::diagnostics::{
    default_threshold, diagnose, isoperimetric_deficit, level_set_connected, Classification, DropletDiagnostics,
};
use chdroplet::expansion::expansion_report;
use chdroplet::field::{write_snapshot, Grid};
use chdroplet::minimizer::{check_problem, minimize, write_trace_csv, FlowConfig, MinimizeReport, Scheme, Seed};
use chdroplet::report::{
    line_plot, write_csv, write_json, write_svg_best_effort, Marker, RunManifest, Series, FORMAT_VERSION,
};
use chdroplet::sweep::{linspace, phi_scan, run_sweep, SweepRow, PHI_CSV_HEADER};
use chdroplet::{Error, Result};

#[derive(Parser)]
#[command(name = "chdroplet", version, about = "Droplet formation in the mass-constrained Cahn-Hilliard energy")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form and numerical values of the critical and profile constants.
    Constants {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Tabulate the volume-fraction energy and mark its minimizers.
    PhiScan {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 1001)]
        points: usize,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Minimize the free energy on a periodic grid.
    Minimize {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        flow: FlowArgs,
        /// Volume-fraction threshold separating uniform from droplet.
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Minimize at evenly spaced values of K and locate the classification flip.
    Sweep {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long = "L", default_value_t = 200.0)]
        length: f64,
        #[command(flatten)]
        grid: GridArgs,
        /// Range in units of the critical K.
        #[arg(long, default_value_t = 0.5)]
        k_rel_min: f64,
        #[arg(long, default_value_t = 2.0)]
        k_rel_max: f64,
        #[arg(long, default_value_t = 11)]
        count: usize,
        #[command(flatten)]
        flow: FlowArgs,
        #[arg(long)]
        threshold: Option<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// First-order matched expansion in d = 2, compared with the minimizer.
    Expand {
        #[command(flatten)]
        problem: ProblemArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        flow: FlowArgs,
        /// Skip the direct minimization.
        #[arg(long)]
        skip_minimize: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Args, Clone)]
struct ProblemArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long = "L", default_value_t = 200.0)]
    length: f64,
    /// Density coefficient in n = -1 + K L^(-d/(d+1)).
    #[arg(long = "K", conflicts_with_all = ["k_rel", "n"])]
    k: Option<f64>,
    /// K in units of the critical K.
    #[arg(long = "K-rel", conflicts_with = "n")]
    k_rel: Option<f64>,
    /// Mean density.
    #[arg(long)]
    n: Option<f64>,
}

impl ProblemArgs {
    fn spec(&self) -> Result<ProblemSpec> {
        match (self.k, self.k_rel, self.n) {
            (Some(k), _, _) => ProblemSpec::from_k(self.d, self.length, k),
            (_, Some(rel), _) => {
                valid_dimension(self.d)?;
                ProblemSpec::from_k(self.d, self.length, rel * k_star(self.d, surface_tension(), CHI))
            }
            (_, _, Some(n)) => ProblemSpec::new(self.d, self.length, n),
            _ => Err(Error::Precondition("one of --K, --K-rel or --n is required".into())),
        }
    }
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Grid points per side.
    #[arg(long = "N", default_value_t = 1024)]
    n_side: usize,
}

#[derive(Args, Clone)]
struct FlowArgs {
    /// Comma-separated seeds: uniform, eta-star, eta-c, equimolar, eta=<x>, file:<path>.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<Seed>>,
    /// Sup-norm tolerance on the projected Euler-Lagrange residual.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iters: usize,
    /// Step of the explicit flow; defaults to the stability bound.
    #[arg(long)]
    tau: Option<f64>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    threads: Option<usize>,
    /// lbfgs or explicit.
    #[arg(long, default_value = "lbfgs")]
    scheme: Scheme,
}

impl FlowArgs {
    fn config(&self) -> FlowConfig {
        let mut config = FlowConfig {
            scheme: self.scheme,
            step_tau: self.tau,
            max_iters: self.max_iters,
            tol_residual: self.tol,
            ..FlowConfig::default()
        };
        if let Some(seeds) = &self.seeds {
            config.seeds = seeds.clone();
        }
        config
    }

    fn install_threads(&self) -> Result<()> {
        if let Some(threads) = self.threads {
            if threads == 0 {
                return Err(Error::Domain("--threads must be positive".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
                .map_err(|e| Error::Precondition(format!("thread pool: {e}")))?;
        }
        Ok(())
    }
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Output directory.
    #[arg(long, env = "CHDROPLET_OUT", default_value = "chdroplet-out")]
    out: PathBuf,
}

fn valid_dimension(d: usize) -> Result<()> {
    if d == 2 || d == 3 {
        Ok(())
    } else {
        Err(Error::Domain(format!("dimension must be 2 or 3, got {d}")))
    }
}

static START: OnceLock<Instant> = OnceLock::new();

/// Collects artifact names and writes the manifest last.
struct Run {
    command: &'static str,
    dir: PathBuf,
    artifacts: Vec<String>,
}

impl Run {
    fn begin(command: &'static str, dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { command, dir: dir.to_path_buf(), artifacts: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.artifacts.push(name.to_string());
        self.dir.join(name)
    }

    fn svg(&mut self, name: &str, svg: &str) {
        if write_svg_best_effort(&self.dir.join(name), svg) {
            self.artifacts.push(name.to_string());
        }
    }

    fn finish(self, spec: serde_json::Value, grid: Option<&Grid>, flow: Option<&FlowConfig>) -> Result<()> {
        let manifest = RunManifest {
            format_version: FORMAT_VERSION,
            command: self.command.to_string(),
            spec,
            grid: grid.map(serde_json::to_value).transpose()?,
            flow: flow.map(serde_json::to_value).transpose()?,
            output_dir: self.dir,
            wall_clock_seconds: START.get_or_init(Instant::now).elapsed().as_secs_f64(),
            artifacts: self.artifacts,
        };
        let path = manifest.write()?;
        println!("manifest: {}", path.display());
        Ok(())
    }
}

fn class_name(c: Option<Classification>) -> &'static str {
    match c {
        Some(Classification::Droplet) => "droplet",
        Some(Classification::Uniform) => "uniform",
        None => "unclassified",
    }
}

fn cmd_constants(d: usize, out: &OutputArgs) -> Result<()> {
    valid_dimension(d)?;
    let rows = constants_table(d);
    let mut run = Run::begin("constants", &out.out)?;
    let csv: Vec<String> = rows.iter().map(ConstantRow::csv_row).collect();
    write_csv(&run.path("constants.csv"), ConstantRow::CSV_HEADER, &csv)?;
    write_json(&run.path("constants.json"), &json!({ "d": d, "rows": rows, "critical": critical_constants(d) }))?;
    println!("{:<28} {:>22} {:>22} {:>10}", "name", "closed form", "numeric", "gap");
    for r in &rows {
        let numeric = r.numeric.map(|v| format!("{v:.15}")).unwrap_or_default();
        let gap = r.gap.map(|v| format!("{v:.1e}")).unwrap_or_default();
        println!("{:<28} {:>22.15} {:>22} {:>10}  {}", r.name, r.closed_form, numeric, gap, r.note);
    }
    run.finish(json!({ "d": d }), None, None)
}

fn cmd_phi_scan(problem: &ProblemArgs, points: usize, out: &OutputArgs) -> Result<()> {
    let spec = problem.spec()?;
    let scan = phi_scan(&spec, points)?;
    let mut run = Run::begin("phi-scan", &out.out)?;
    let csv: Vec<String> = scan.points.iter().map(|p| p.csv_row()).collect();
    write_csv(&run.path("phi_scan.csv"), PHI_CSV_HEADER, &csv)?;
    write_json(
        &run.path("phi_scan.json"),
        &json!({ "spec": spec, "C": scan.c, "result": scan.result, "minima": scan.minima }),
    )?;
    let series = Series {
        name: "reduced energy".into(),
        points: scan.points.iter().map(|p| (p.eta, p.reduced)).collect(),
        color: "navy",
        scatter: false,
    };
    let markers: Vec<Marker> = scan
        .minima
        .iter()
        .map(|&eta| Marker {
            x: eta,
            y: chdroplet::analytic::phi_reduced(eta, scan.c, spec.d),
            label: format!("eta={eta:.4}"),
        })
        .collect();
    let title = format!("d={} L={} K={:.4} C={:.4} ({:?})", spec.d, spec.length, spec.k(), scan.c, scan.result.regime);
    run.svg("phi_scan.svg", &line_plot(&title, "eta", "eta^(1-1/d) + C(1-eta)^2", &[series], &markers));
    println!("C = {:.12}  regime = {:?}  eta_c = {:.12}", scan.c, scan.result.regime, scan.result.eta_c);
    if scan.result.regime == Regime::Critical {
        println!("critical: minima at eta = 0 and eta = {:.12}", scan.result.eta_c);
    }
    run.finish(serde_json::to_value(spec)?, None, None)
}

fn partial_or_error(result: Result<MinimizeReport>) -> Result<(MinimizeReport, Option<Error>)> {
    match result {
        Ok(r) => Ok((r, None)),
        Err(Error::NotConverged(r)) => {
            let err = Error::NotConverged(r.clone());
            Ok((*r, Some(err)))
        }
        Err(e) => Err(e),
    }
}

fn prepare(spec: &ProblemSpec, n_side: usize, flow: &FlowArgs) -> Result<(Grid, FlowConfig)> {
    let grid = Grid::new(spec.d, n_side, spec.length)?;
    check_problem(spec, &grid)?;
    let config = flow.config();
    config.validate(&grid)?;
    flow.install_threads()?;
    Ok((grid, config))
}

fn cmd_minimize(
    problem: &ProblemArgs,
    grid_args: &GridArgs,
    flow: &FlowArgs,
    threshold: Option<f64>,
    out: &OutputArgs,
) -> Result<()> {
    let spec = problem.spec()?;
    let (grid, config) = prepare(&spec, grid_args.n_side, flow)?;
    let threshold = threshold.unwrap_or_else(|| default_threshold(spec.d));
    let (report, failure) = partial_or_error(minimize(&spec, grid, &config))?;

    let s = surface_tension();
    let geo = geometry(&spec);
    let phen = minimize_phi(c_of_n(&spec, s, CHI), spec.d);
    let diag: DropletDiagnostics = diagnose(&report.best_field, spec.n, phen.eta_c, threshold)?;
    let (connected, components) = level_set_connected(&report.best_field, 0.0);
    let isoperimetric = if spec.d == 2 && diag.classification == Some(Classification::Droplet) {
        Some(isoperimetric_deficit(&report.best_field)?)
    } else {
        None
    };

    let mut run = Run::begin("minimize", &out.out)?;
    write_snapshot(&run.path("field.snap"), &report.best_field, spec.n, &report.best_seed)?;
    write_trace_csv(&run.path("trace.csv"), &report.energy_trace)?;
    let seed_rows: Vec<String> = report
        .per_seed_energies
        .iter()
        .map(|o| {
            format!(
                "{},{:.15e},{:.6e},{},{},{:.12}",
                o.seed, o.energy, o.residual, o.iterations, o.converged, o.max_value
            )
        })
        .collect();
    write_csv(&run.path("seeds.csv"), "seed,energy,residual,iterations,converged,max_value", &seed_rows)?;
    write_csv(&run.path("diagnostics.csv"), DropletDiagnostics::CSV_HEADER, &[diag.csv_row()])?;
    write_json(
        &run.path("diagnostics.json"),
        &json!({
            "spec": spec,
            "geometry": geo,
            "phenomenology": phen,
            "threshold": threshold,
            "diagnostics": diag,
            "level_set_connected": connected,
            "level_set_components": components,
            "isoperimetric": isoperimetric,
            "energy_per_area": report.energy.total / geo.gamma0,
            "phi_min_per_area": s * phen.phi_min,
            "report": report,
        }),
    )?;
    println!(
        "seed {}  energy {:.10}  residual {:.3e}  iterations {}  converged {}",
        report.best_seed, report.energy.total, report.residual, report.iterations, report.converged
    );
    println!(
        "classification {}  eta measured {:.6}  eta_c {:.6}  L4 {:.4e}",
        class_name(diag.classification),
        diag.eta_measured,
        phen.eta_c,
        diag.l4_distance.unwrap_or(f64::NAN)
    );
    run.finish(serde_json::to_value(spec)?, Some(&grid), Some(&config))?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    d: usize,
    length: f64,
    grid_args: &GridArgs,
    (rel_min, rel_max, count): (f64, f64, usize),
    flow: &FlowArgs,
    threshold: Option<f64>,
    out: &OutputArgs,
) -> Result<()> {
    valid_dimension(d)?;
    if !(rel_min < rel_max) || count < 2 {
        return Err(Error::Domain("the K range needs min < max and at least two points".into()));
    }
    let ks_crit = k_star(d, surface_tension(), CHI);
    let ks = linspace(rel_min * ks_crit, rel_max * ks_crit, count);
    for &k in &ks {
        let spec = ProblemSpec::from_k(d, length, k)?;
        prepare(&spec, grid_args.n_side, flow)?;
    }
    let grid = Grid::new(d, grid_args.n_side, length)?;
    let config = flow.config();
    let threshold = threshold.unwrap_or_else(|| default_threshold(d));
    let result = run_sweep(d, length, grid_args.n_side, &ks, &config, threshold)?;

    let mut run = Run::begin("sweep", &out.out)?;
    let csv: Vec<String> = result.rows.iter().map(SweepRow::csv_row).collect();
    write_csv(&run.path("sweep.csv"), SweepRow::CSV_HEADER, &csv)?;
    let contains = result.bracket.map(|(a, b)| a <= ks_crit && ks_crit <= b);
    let max_gap = result.rows.iter().map(|r| r.relative_gap().abs()).fold(0.0, f64::max);
    write_json(
        &run.path("sweep.json"),
        &json!({
            "K_star": ks_crit,
            "flips": result.flips,
            "bracket": result.bracket,
            "bracket_contains_K_star": contains,
            "max_relative_gap": max_gap,
            "rows": result.rows,
        }),
    )?;
    let numeric = Series {
        name: "numeric f/|G0|".into(),
        points: result.rows.iter().map(|r| (r.k, r.energy_per_area)).collect(),
        color: "crimson",
        scatter: true,
    };
    let analytic_ks = linspace(ks[0], ks[ks.len() - 1], 200);
    let analytic = Series {
        name: "analytic min".into(),
        points: analytic_ks
            .iter()
            .filter_map(|&k| {
                let spec = ProblemSpec::from_k(d, length, k).ok()?;
                Some((k, surface_tension() * minimize_phi(c_of_n(&spec, surface_tension(), CHI), d).phi_min))
            })
            .collect(),
        color: "navy",
        scatter: false,
    };
    let marker_y = surface_tension() * minimize_phi(chdroplet::analytic::c_star(d), d).phi_min;
    let markers = [Marker { x: ks_crit, y: marker_y, label: "K*".into() }];
    run.svg(
        "sweep.svg",
        &line_plot(
            &format!("d={d} L={length} N={}", grid_args.n_side),
            "K",
            "energy / |G0|",
            &[numeric, analytic],
            &markers,
        ),
    );
    for r in &result.rows {
        println!(
            "K {:.6}  class {:<8} eta {:.4} (eta_c {:.4})  gap {:+.3e}  seed {}",
            r.k,
            class_name(Some(r.classification)),
            r.eta_measured,
            r.eta_c,
            r.relative_gap(),
            r.best_seed
        );
    }
    match result.bracket {
        Some((a, b)) => println!("flip between K = {a:.6} and {b:.6}; K* = {ks_crit:.6}"),
        None => println!("{} classification flips; K* = {ks_crit:.6}", result.flips),
    }
    let all_converged = result.rows.iter().all(|r| r.converged);
    run.finish(json!({ "d": d, "L": length, "K": ks }), Some(&grid), Some(&config))?;
    if all_converged {
        Ok(())
    } else {
        Err(Error::Flow("some sweep points did not converge; see sweep.csv".into()))
    }
}

fn cmd_expand(
    problem: &ProblemArgs,
    grid_args: &GridArgs,
    flow: &FlowArgs,
    skip_minimize: bool,
    out: &OutputArgs,
) -> Result<()> {
    let spec = problem.spec()?;
    let (grid, config) = prepare(&spec, grid_args.n_side, flow)?;
    let (first_order, report) = expansion_report(&spec, grid)?;
    let phen = minimize_phi(c_of_n(&spec, surface_tension(), CHI), spec.d);
    let direct = if skip_minimize { None } else { Some(partial_or_error(minimize(&spec, grid, &config))?) };

    let mut run = Run::begin("expand", &out.out)?;
    write_snapshot(&run.path("first_order.snap"), &first_order, spec.n, "first-order")?;
    let mut summary = json!({
        "spec": spec,
        "expansion": report,
        "eta_c": phen.eta_c,
        "sqrt_eta_c": phen.eta_c.sqrt(),
        "r1_minus_sqrt_eta_c": report.state.r1 - phen.eta_c.sqrt(),
    });
    if let Some((min, _)) = &direct {
        write_snapshot(&run.path("minimizer.snap"), &min.best_field, spec.n, &min.best_seed)?;
        summary["minimizer_energy"] = json!(min.energy.total);
        summary["minimizer_converged"] = json!(min.converged);
        summary["energy_gap"] = json!(report.energy.total - min.energy.total);
    }
    write_json(&run.path("expansion.json"), &summary)?;
    let st = &report.state;
    println!("lambda {:.6e}  K1 {:.10}  mu1 {:.10}  phi1 {:.10}", st.lambda, st.k1, st.mu1, st.phi1);
    println!(
        "r1 {:.12}  sqrt(eta_c) {:.12}  r2 {:.12}  radius {:.6}",
        st.r1,
        phen.eta_c.sqrt(),
        report.r2_total,
        st.radius()
    );
    println!(
        "energy(m1) {:.10}  grid residual {:.3e}  continuum residual {:.3e}",
        report.energy.total, report.grid_residual, report.continuum.sup_residual
    );
    if let Some((min, _)) = &direct {
        println!("energy(minimizer) {:.10}  gap {:+.4e}", min.energy.total, report.energy.total - min.energy.total);
    }
    run.finish(serde_json::to_value(spec)?, Some(&grid), Some(&config))?;
    match direct {
        Some((_, Some(e))) => Err(e),
        _ => Ok(()),
    }
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Constants { d, out } => cmd_constants(*d, out),
        Command::PhiScan { problem, points, out } => cmd_phi_scan(problem, *points, out),
        Command::Minimize { problem, grid, flow, threshold, out } => cmd_minimize(problem, grid, flow, *threshold, out),
        Command::Sweep { d, length, grid, k_rel_min, k_rel_max, count, flow, threshold, out } => {
            cmd_sweep(*d, *length, grid, (*k_rel_min, *k_rel_max, *count), flow, *threshold, out)
        }
        Command::Expand { problem, grid, flow, skip_minimize, out } => {
            cmd_expand(problem, grid, flow, *skip_minimize, out)
        }
    }
}

fn main() -> ExitCode {
    START.get_or_init(Instant::now);
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
