//! Command-line front end: config ingestion, experiment orchestration, result
//! persistence, and plot emission.
//!
//! Exit codes: 0 ok, 1 config error, 2 mathematical-invariant violation,
//! 3 numerical failure (non-convergence).

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use nalgebra::DVector;
use serde::Serialize;

use config::{Overrides, RunConfig};
use output::{write_json, write_svg_plot, CsvField, CsvWriter, Measured, Series};
use shadowlab_core::error::Error as CoreError;
use shadowlab_core::expansion::{validate_expansion, ValidationConfig};
use shadowlab_core::grassmann::{hopf_fiber_check, LineScheme, OneForm};
use shadowlab_core::hamflow::{flow, FlowOptions};
use shadowlab_core::loops::{
    energy_area_gap, loop_area, loop_area_by_quadrature, loop_energy, loop_energy_by_quadrature,
    FourierLoop,
};
use shadowlab_core::shadowvol::{mc_shadow_volume, ShadowSolver};
use shadowlab_core::symplinalg::{
    ball_volume_2k, linear_shadow_volume, random_symplectic, section_volume, wedge_norm,
    wirtinger_check, FormsContext,
};

#[derive(Parser)]
#[command(
    name = "shadowlab",
    version,
    about = "Numerical laboratory for middle-dimensional shadows of symplectic balls"
)]
struct Cli {
    /// Config file (TOML or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Ambient complex dimension override.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Shadow complex dimension override.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Seed override (quadrature and random maps).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Largest time of the t grid.
    #[arg(long = "t-max", global = true)]
    t_max: Option<f64>,
    /// Monte Carlo sample count override.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Linear shadow volume with its equality flag, plus a random-map sweep.
    Linear,
    /// Complex section volume with its equality flag, plus a random-map sweep.
    Section,
    /// Wirtinger inequality sweep.
    Wirtinger,
    /// Loop functionals: analyze a CSV loop or sweep random loops.
    Loops {
        /// CSV with columns theta, x_1..x_2n.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Hopf fiber-integration identity check.
    Hopf,
    /// Integrate a Hamiltonian trajectory and report flow quality.
    Flow {
        /// Initial point as a JSON array.
        #[arg(long)]
        x0: Option<String>,
    },
    /// Track the shadow boundary over the t grid and tabulate f(t).
    Boundary,
    /// Second-order expansion: C, fitted C, symmetry flag, fit table and plot.
    Expansion,
    /// Evaluate the explicit twist/shear maps and their certified formulas.
    Counterexamples,
    /// Run the built-in invariant suite.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ov = Overrides {
        n: cli.n,
        k: cli.k,
        seed: cli.seed,
        t_max: cli.t_max,
        samples: cli.samples,
        out: cli.out.clone(),
    };
    let cfg = match RunConfig::load(cli.config.as_deref(), &ov) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let run = match &cli.cmd {
        Cmd::Linear => cmd_linear(&cfg),
        Cmd::Section => cmd_section(&cfg),
        Cmd::Wirtinger => cmd_wirtinger(&cfg),
        Cmd::Loops { input } => cmd_loops(&cfg, input.as_deref()),
        Cmd::Hopf => cmd_hopf(&cfg),
        Cmd::Flow { x0 } => cmd_flow(&cfg, x0.as_deref()),
        Cmd::Boundary => cmd_boundary(&cfg),
        Cmd::Expansion => cmd_expansion(&cfg),
        Cmd::Counterexamples => cmd_counterexamples(&cfg),
        Cmd::Selftest => cmd_selftest(),
    };
    match run {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(classify_error(&e))
        }
    }
}

/// Numerical failures exit 3; everything else unplanned is a config/usage error.
fn classify_error(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<CoreError>() {
        Some(
            CoreError::NewtonDiverged { .. }
            | CoreError::FlowNonConvergent { .. }
            | CoreError::FlowBlowUp { .. }
            | CoreError::StepControlExhausted { .. }
            | CoreError::UnconvergedBoundary { .. },
        ) => 3,
        _ => 1,
    }
}

const EXIT_OK: ExitCode = ExitCode::SUCCESS;
const EXIT_VIOLATION: u8 = 2;

#[derive(Serialize)]
struct SweepSummary {
    count: usize,
    violations: usize,
    equality_flag_mismatches: usize,
    extremal_gap: Measured,
}

#[derive(Serialize)]
struct LinearReport<'a> {
    experiment: &'a str,
    n: usize,
    k: usize,
    /// The linear map, row-major.
    phi: Vec<Vec<f64>>,
    volume: Measured,
    gap: Measured,
    equality: bool,
    subspace_defect: Measured,
    floor: f64,
    sweep: SweepSummary,
}

fn cmd_linear(cfg: &RunConfig) -> Result<ExitCode> {
    cfg.ensure_out_dir()?;
    let proj = cfg.projector()?;
    let phi = cfg.phi_map()?;
    let main = linear_shadow_volume(&phi, &proj)?;
    let floor = ball_volume_2k(cfg.k);
    let tol = cfg.tolerances.nonsqueezing;

    let mut csv = CsvWriter::create(
        &cfg.out.join("linear_sweep.csv"),
        &["seed", "volume", "gap", "equality", "subspace_defect"],
    )?;
    let mut violations = 0usize;
    let mut mismatches = 0usize;
    let mut min_gap = f64::INFINITY;
    for i in 0..cfg.sweep {
        let seed = cfg.quadrature.seed.wrapping_add(i as u64);
        let p = random_symplectic(cfg.n, seed, 0.6)?;
        let s = linear_shadow_volume(&p, &proj)?;
        min_gap = min_gap.min(s.gap);
        if s.volume < floor - tol {
            violations += 1;
        }
        if s.equality != s.volume_at_floor() {
            mismatches += 1;
        }
        csv.row(&[
            CsvField::Int(seed as i64),
            CsvField::Float(s.volume),
            CsvField::Float(s.gap),
            CsvField::Bool(s.equality),
            CsvField::Float(s.subspace_defect),
        ])?;
    }
    csv.finish()?;

    let phi_rows: Vec<Vec<f64>> = (0..2 * cfg.n)
        .map(|r| (0..2 * cfg.n).map(|c| phi.matrix()[(r, c)]).collect())
        .collect();
    let report = LinearReport {
        experiment: &cfg.experiment,
        n: cfg.n,
        k: cfg.k,
        phi: phi_rows,
        volume: Measured::new(main.volume, tol),
        gap: Measured::new(main.gap, tol),
        equality: main.equality,
        subspace_defect: Measured::new(main.subspace_defect, 1e-9),
        floor,
        sweep: SweepSummary {
            count: cfg.sweep,
            violations,
            equality_flag_mismatches: mismatches,
            extremal_gap: Measured::new(min_gap, tol),
        },
    };
    write_json(&cfg.out.join("linear_shadow.json"), &report)?;
    println!(
        "linear: volume {:.9} (floor {floor:.9}), equality {}, sweep violations {violations}",
        main.volume, main.equality
    );
    if violations > 0 || mismatches > 0 || main.volume < floor - tol {
        return Ok(ExitCode::from(EXIT_VIOLATION));
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SectionReport<'a> {
    experiment: &'a str,
    n: usize,
    k: usize,
    volume: Measured,
    gap: Measured,
    equality: bool,
    ceiling: f64,
    sweep: SweepSummary,
}

fn cmd_section(cfg: &RunConfig) -> Result<ExitCode> {
    cfg.ensure_out_dir()?;
    let proj = cfg.projector()?;
    let phi = cfg.phi_map()?;
    let main = section_volume(&phi, &proj)?;
    let ceiling = ball_volume_2k(cfg.k);
    let tol = cfg.tolerances.nonsqueezing;

    let mut csv = CsvWriter::create(
        &cfg.out.join("section_sweep.csv"),
        &["seed", "volume", "gap", "equality"],
    )?;
    let mut violations = 0usize;
    let mut max_gap = f64::NEG_INFINITY;
    for i in 0..cfg.sweep {
        let seed = cfg.quadrature.seed.wrapping_add(i as u64);
        let p = random_symplectic(cfg.n, seed, 0.6)?;
        let s = section_volume(&p, &proj)?;
        max_gap = max_gap.max(s.gap);
        if s.volume > ceiling + tol {
            violations += 1;
        }
        csv.row(&[
            CsvField::Int(seed as i64),
            CsvField::Float(s.volume),
            CsvField::Float(s.gap),
            CsvField::Bool(s.equality),
        ])?;
    }
    csv.finish()?;

    let report = SectionReport {
        experiment: &cfg.experiment,
        n: cfg.n,
        k: cfg.k,
        volume: Measured::new(main.volume, tol),
        gap: Measured::new(main.gap, tol),
        equality: main.equality,
        ceiling,
        sweep: SweepSummary {
            count: cfg.sweep,
            violations,
            equality_flag_mismatches: 0,
            extremal_gap: Measured::new(max_gap, tol),
        },
    };
    write_json(&cfg.out.join("section.json"), &report)?;
    println!(
        "section: volume {:.9} (ceiling {ceiling:.9}), equality {}, sweep violations {violations}",
        main.volume, main.equality
    );
    if violations > 0 || main.volume > ceiling + tol {
        return Ok(ExitCode::from(EXIT_VIOLATION));
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct WirtingerReport<'a> {
    experiment: &'a str,
    n: usize,
    k: usize,
    tuples: usize,
    max_violation: Measured,
    equality_failures: usize,
}

fn cmd_wirtinger(cfg: &RunConfig) -> Result<ExitCode> {
    use rand::Rng;
    cfg.ensure_out_dir()?;
    let ctx = FormsContext::new(cfg.n, cfg.k)?;
    let mut rng = rand_chacha(cfg.quadrature.seed);
    let mut csv = CsvWriter::create(
        &cfg.out.join("wirtinger_sweep.csv"),
        &["index", "lhs", "rhs", "gap", "is_equality"],
    )?;
    let mut max_violation: f64 = f64::NEG_INFINITY;
    let mut equality_failures = 0usize;
    let mut count = 0usize;
    for i in 0..cfg.sweep {
        let vs: Vec<DVector<f64>> = (0..2 * cfg.k)
            .map(|_| DVector::from_fn(2 * cfg.n, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        if wedge_norm(&vs) < 1e-8 {
            continue;
        }
        let w = wirtinger_check(&ctx, &vs)?;
        max_violation = max_violation.max(w.lhs - w.rhs);
        csv.row(&[
            CsvField::Int(i as i64),
            CsvField::Float(w.lhs),
            CsvField::Float(w.rhs),
            CsvField::Float(w.gap),
            CsvField::Bool(w.is_equality),
        ])?;
        count += 1;
        // interleave constructed complex tuples, which must sit at equality
        if i % 4 == 0 {
            let mut tuple = Vec::with_capacity(2 * cfg.k);
            for _ in 0..cfg.k {
                let b = DVector::from_fn(2 * cfg.n, |_, _| rng.gen_range(-1.0..1.0));
                tuple.push(b.clone());
                tuple.push(shadowlab_core::symplinalg::apply_j(&b));
            }
            if wedge_norm(&tuple) > 1e-6 {
                let w = wirtinger_check(&ctx, &tuple)?;
                if !w.is_equality {
                    equality_failures += 1;
                }
            }
        }
    }
    csv.finish()?;
    let report = WirtingerReport {
        experiment: &cfg.experiment,
        n: cfg.n,
        k: cfg.k,
        tuples: count,
        max_violation: Measured::new(max_violation, 1e-10),
        equality_failures,
    };
    write_json(&cfg.out.join("wirtinger.json"), &report)?;
    println!(
        "wirtinger: {count} tuples, max lhs - rhs = {max_violation:.3e}, \
         {equality_failures} equality failures"
    );
    if max_violation > 1e-10 || equality_failures > 0 {
        return Ok(ExitCode::from(EXIT_VIOLATION));
    }
    Ok(EXIT_OK)
}

fn rand_chacha(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Serialize)]
struct LoopsReport<'a> {
    experiment: &'a str,
    loops: usize,
    max_identity_error: Measured,
    min_gap: Measured,
    single_loop: Option<SingleLoop>,
}

#[derive(Serialize)]
struct SingleLoop {
    energy: Measured,
    area: Measured,
    gap: Measured,
    is_harmonic_circle: bool,
}

fn cmd_loops(cfg: &RunConfig, input: Option<&std::path::Path>) -> Result<ExitCode> {
    use rand::Rng;
    cfg.ensure_out_dir()?;
    let mut single = None;
    if let Some(path) = input {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read {}", path.display()))?;
        let mut samples = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with("theta") {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .with_context(|| format!("bad CSV number on line {}", ln + 1))?;
            if vals.len() < 3 {
                bail!("loop CSV needs theta plus at least 2 coordinates");
            }
            samples.push(DVector::from_vec(vals[1..].to_vec()));
        }
        let z = FourierLoop::from_samples(samples, shadowlab_core::loops::DEFAULT_MODES)?;
        let g = energy_area_gap(&z)?;
        single = Some(SingleLoop {
            energy: Measured::new(loop_energy(&z)?, 1e-8),
            area: Measured::new(loop_area(&z)?, 1e-8),
            gap: Measured::new(g.gap, 1e-9),
            is_harmonic_circle: g.is_harmonic_circle,
        });
        #[derive(Serialize)]
        struct Coeff {
            mode: isize,
            coeff: Vec<f64>,
        }
        let coeffs: Vec<Coeff> = z
            .coeffs()
            .map(|(m, c)| Coeff {
                mode: m,
                coeff: c.iter().copied().collect(),
            })
            .collect();
        write_json(&cfg.out.join("loop_coeffs.json"), &coeffs)?;
    }

    let mut rng = rand_chacha(cfg.quadrature.seed ^ 0x100f5);
    let mut csv = CsvWriter::create(
        &cfg.out.join("loops.csv"),
        &["index", "energy", "area", "gap", "is_harmonic_circle"],
    )?;
    let count = cfg.sweep.min(5000);
    let mut max_identity: f64 = 0.0;
    let mut min_gap = f64::INFINITY;
    for i in 0..count {
        let coeffs: Vec<DVector<f64>> = (0..11)
            .map(|_| DVector::from_fn(2 * cfg.n, |_, _| rng.gen_range(-1.0..1.0)))
            .collect();
        let z = FourierLoop::from_coeffs(coeffs, 128)?;
        let e = loop_energy_by_quadrature(&z)?;
        let a = loop_area_by_quadrature(&z)?;
        let g = energy_area_gap(&z)?;
        max_identity = max_identity.max((g.gap - (e - a)).abs() / e.max(1.0));
        min_gap = min_gap.min(g.gap);
        csv.row(&[
            CsvField::Int(i as i64),
            CsvField::Float(e),
            CsvField::Float(a),
            CsvField::Float(g.gap),
            CsvField::Bool(g.is_harmonic_circle),
        ])?;
    }
    csv.finish()?;
    let report = LoopsReport {
        experiment: &cfg.experiment,
        loops: count,
        max_identity_error: Measured::new(max_identity, 1e-8),
        min_gap: Measured::new(min_gap, 1e-9),
        single_loop: single,
    };
    write_json(&cfg.out.join("loops.json"), &report)?;
    println!(
        "loops: {count} random loops, max identity error {max_identity:.3e}, min gap {min_gap:.3e}"
    );
    if max_identity > 1e-8 || min_gap < -1e-9 {
        return Ok(ExitCode::from(EXIT_VIOLATION));
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct HopfReport<'a> {
    experiment: &'a str,
    k: usize,
    resolution: usize,
    lhs: Measured,
    rhs: Measured,
    gap: Measured,
}

fn cmd_hopf(cfg: &RunConfig) -> Result<ExitCode> {
    cfg.ensure_out_dir()?;
    let k = cfg.k;
    if k > 2 {
        bail!("the fiber identity check supports k in {{1, 2}}");
    }
    let eta = OneForm::primitive(k);
    let resolution = cfg.quadrature.eta_res.max(16);
    let scheme = if k == 2 {
        LineScheme::Hopf {
            eta_res: cfg.quadrature.eta_res,
            n_phi1: cfg.quadrature.phi_res,
            n_phi2: cfg.quadrature.phi_res,
        }
    } else {
        LineScheme::MonteCarlo {
            count: cfg.quadrature.lines,
            seed: cfg.quadrature.seed,
        }
    };
    let r = hopf_fiber_check(k, &eta, resolution, scheme)?;
    let tol = if k == 2 {
        2e-4 * r.lhs.abs().max(1.0)
    } else {
        1e-10
    };
    let report = HopfReport {
        experiment: &cfg.experiment,
        k,
        resolution,
        lhs: Measured::new(r.lhs, tol),
        rhs: Measured::new(r.rhs, tol),
        gap: Measured::new(r.gap, tol),
    };
    write_json(&cfg.out.join("hopf.json"), &report)?;
    println!(
        "hopf: lhs {:.9}, rhs {:.9}, gap {:.3e}",
        r.lhs, r.rhs, r.gap
    );
    if r.gap.abs() > tol {
        return Ok(ExitCode::from(EXIT_VIOLATION));
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct FlowReport<'a> {
    experiment: &'a str,
    t_end: f64,
    steps: usize,
    defect: Measured,
    energy_drift: Measured,
    endpoint: Vec<f64>,
}

fn cmd_flow(cfg: &RunConfig, x0: Option<&str>) -> Result<ExitCode> {
    cfg.ensure_out_dir()?;
    let h = cfg.hamiltonian()?;
    let x0: DVector<f64> = match x0 {
        Some(text) => {
            let v: Vec<f64> = serde_json::from_str(text).context("bad --x0 JSON array")?;
            if v.len() != 2 * cfg.n {
                bail!("--x0 needs {} coordinates", 2 * cfg.n);
            }
            DVector::from_vec(v)
        }
        None => DVector::from_fn(2 * cfg.n, |i, _| 0.3 + 0.1 * i as f64),
    };
    let t_end = cfg.t_grid.last().copied().unwrap_or(0.1);
    let opts = FlowOptions::default();
    let mut csv = {
        let mut header = vec!["t".to_string()];
        for i in 0..2 * cfg.n {
            header.push(format!("x{i}"));
        }
        header.push("defect".into());
        header.push("energy_drift".into());
        let refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        CsvWriter::create(&cfg.out.join("flow.csv"), &refs)?
    };
    // tabulate at 32 report times, each flowed from the start so the quality
    // numbers apply to the whole interval
    let reports = 32usize;
    let mut last = None;
    for i in 1..=reports {
        let t = t_end * i as f64 / reports as f64;
        let r = flow(&h, &x0, t, &opts)?;
        let mut row = vec![CsvField::Float(t)];
        row.extend(r.endpoint.iter().map(|&v| CsvField::Float(v)));
        row.push(CsvField::Float(r.defect));
        row.push(CsvField::Float(r.energy_drift));
        csv.row(&row)?;
        last = Some(r);
    }
    csv.finish()?;
    let last = last.expect("at least one report time");
    let report = FlowReport {
        experiment: &cfg.experiment,
        t_end,
        steps: last.steps,
        defect: Measured::new(last.defect, 1e-8),
        energy_drift: Measured::new(last.energy_drift, 1e-8),
        endpoint: last.endpoint.iter().copied().collect(),
    };
    write_json(&cfg.out.join("flow.json"), &report)?;
    println!(
        "flow: t = {t_end}, defect {:.3e}, energy drift {:.3e}",
        last.defect, last.energy_drift
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct BoundaryReport<'a> {
    experiment: &'a str,
    n: usize,
    k: usize,
    floor: f64,
    f_table: Vec<FRow>,
    worst_residual: Measured,
    projected_curve_simple: Option<bool>,
    monte_carlo: Vec<shadowlab_core::shadowvol::McShadowVolume>,
}

#[derive(Serialize)]
struct FRow {
    t: f64,
    f: Measured,
}

fn cmd_boundary(cfg: &RunConfig) -> Result<ExitCode> {
    cfg.ensure_out_dir()?;
    let h = cfg.hamiltonian()?;
    let phi = cfg.phi_map()?;
    let proj = cfg.projector()?;
    let solver = ShadowSolver::new(
        &h,
        &phi,
        &proj,
        cfg.boundary_grid()?,
        cfg.boundary_options(),
    )?;
    let boundaries = solver.solve_targets(&cfg.t_grid)?;
    let quad_tol = 1e-6;

    let mut ftable = CsvWriter::create(
        &cfg.out.join("f_table.csv"),
        &["t", "f", "estimator", "tolerance"],
    )?;
    let mut rows = Vec::new();
    let mut worst_residual: f64 = 0.0;
    for b in &boundaries {
        let f = solver.volume(b)?;
        worst_residual = worst_residual.max(b.worst_residual());
        ftable.row(&[
            CsvField::Float(b.t),
            CsvField::Float(f),
            CsvField::Text("boundary".into()),
            CsvField::Float(quad_tol),
        ])?;
        rows.push(FRow {
            t: b.t,
            f: Measured::new(f, quad_tol),
        });
    }

    // occupancy cross-estimates at the final time, one row per cell size
    let t_last = cfg.t_grid.last().copied().unwrap_or(0.0);
    let mut mc_results = Vec::new();
    for &cell in &cfg.cells {
        let mc = mc_shadow_volume(
            &h,
            &phi,
            &proj,
            t_last,
            cfg.samples,
            cell,
            cfg.quadrature.seed,
        )?;
        ftable.row(&[
            CsvField::Float(t_last),
            CsvField::Float(mc.estimate),
            CsvField::Text(format!("occupancy-cell-{cell}")),
            CsvField::Float(cfg.tolerances.estimator_agreement),
        ])?;
        mc_results.push(mc);
    }
    ftable.finish()?;

    // per-node dump of the last boundary
    let last = boundaries.last().expect("nonempty t grid");
    {
        let dim = 2 * cfg.n;
        let chart_names: &[&str] = if cfg.k == 1 {
            &["theta"]
        } else {
            &["eta", "phi1", "phi2"]
        };
        let mut header: Vec<String> = chart_names.iter().map(|s| s.to_string()).collect();
        for i in 0..dim {
            header.push(format!("x{i}"));
        }
        header.push("residual".into());
        let refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let mut csv = CsvWriter::create(&cfg.out.join("boundary.csv"), &refs)?;
        for (i, pt) in last.points.iter().enumerate() {
            let mut row: Vec<CsvField> = solver
                .chart_coordinates(i)
                .iter()
                .map(|&c| CsvField::Float(c))
                .collect();
            row.extend(pt.iter().map(|&v| CsvField::Float(v)));
            row.push(CsvField::Float(last.residuals[i]));
            csv.row(&row)?;
        }
        csv.finish()?;
    }

    let report = BoundaryReport {
        experiment: &cfg.experiment,
        n: cfg.n,
        k: cfg.k,
        floor: ball_volume_2k(cfg.k),
        f_table: rows,
        worst_residual: Measured::new(worst_residual, cfg.tolerances.boundary_residual),
        projected_curve_simple: solver.projected_curve_is_simple(last),
        monte_carlo: mc_results,
    };
    write_json(&cfg.out.join("boundary.json"), &report)?;
    println!(
        "boundary: {} times solved, worst residual {:.3e}",
        boundaries.len(),
        worst_residual
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct ExpansionOut<'a> {
    experiment: &'a str,
    n: usize,
    k: usize,
    c: Measured,
    fitted_c: Option<Measured>,
    symmetry_flag: bool,
    fit_constant: Option<Measured>,
    fit_linear: Option<Measured>,
    floor: f64,
    lines: usize,
    f_values: Vec<(f64, f64)>,
}

fn cmd_expansion(cfg: &RunConfig) -> Result<ExitCode> {
    cfg.ensure_out_dir()?;
    let h = cfg.hamiltonian()?;
    let phi = cfg.phi_map()?;
    let proj = cfg.projector()?;
    let vcfg = ValidationConfig {
        t_grid: cfg.t_grid.clone(),
        scheme: cfg.quadrature.line_scheme(cfg.k)?,
        grid: cfg.boundary_grid()?,
        boundary: cfg.boundary_options(),
    };
    let floor = ball_volume_2k(cfg.k);
    let result = validate_expansion(&h, &phi, &proj, &vcfg);
    // on boundary-solver failure persist the quadrature side before exiting 3
    let report = match result {
        Ok(r) => r,
        Err(
            e @ (CoreError::NewtonDiverged { .. }
            | CoreError::FlowNonConvergent { .. }
            | CoreError::StepControlExhausted { .. }
            | CoreError::FlowBlowUp { .. }),
        ) => {
            let partial = shadowlab_core::expansion::expansion_coefficient(
                &h,
                &phi,
                &proj,
                cfg.quadrature.line_scheme(cfg.k)?,
            )?;
            let out = ExpansionOut {
                experiment: &cfg.experiment,
                n: cfg.n,
                k: cfg.k,
                c: Measured::new(partial.c, partial.quadrature_error),
                fitted_c: None,
                symmetry_flag: partial.symmetry,
                fit_constant: None,
                fit_linear: None,
                floor,
                lines: partial.lines,
                f_values: Vec::new(),
            };
            write_json(&cfg.out.join("expansion.json"), &out)?;
            return Err(e.into());
        }
        Err(e) => return Err(e.into()),
    };

    let fitted = report.fitted_c.expect("validation fits");
    let out = ExpansionOut {
        experiment: &cfg.experiment,
        n: cfg.n,
        k: cfg.k,
        c: Measured::new(report.c, report.quadrature_error),
        fitted_c: Some(Measured::new(fitted, report.fit_residual.unwrap_or(0.0))),
        symmetry_flag: report.symmetry,
        fit_constant: report.fit_constant.map(|v| Measured::new(v, 1e-5)),
        fit_linear: report.fit_linear.map(|v| Measured::new(v, 1e-4)),
        floor,
        lines: report.lines,
        f_values: report.f_values.clone(),
    };
    write_json(&cfg.out.join("expansion.json"), &out)?;

    let mut csv = CsvWriter::create(&cfg.out.join("fit.csv"), &["t", "f", "f_fit"])?;
    let mut measured = Vec::new();
    let mut fit_curve = Vec::new();
    for &(t, f) in &report.f_values {
        let f_fit = floor + report.c * t * t;
        csv.row(&[
            CsvField::Float(t),
            CsvField::Float(f),
            CsvField::Float(f_fit),
        ])?;
        measured.push((t, f));
    }
    csv.finish()?;
    if let (Some(&(t0, _)), Some(&(t1, _))) = (report.f_values.first(), report.f_values.last()) {
        for i in 0..=100 {
            let t = t0 + (t1 - t0) * i as f64 / 100.0;
            fit_curve.push((t, floor + report.c * t * t));
        }
    }
    write_svg_plot(
        &cfg.out.join("fit.svg"),
        &format!("shadow volume vs t ({})", cfg.experiment),
        "t",
        "f(t)",
        &[
            Series {
                label: "measured f(t)",
                points: measured,
                color: "#1f77b4",
                markers: true,
            },
            Series {
                label: "floor + C t^2",
                points: fit_curve,
                color: "#d62728",
                markers: false,
            },
        ],
    )?;
    println!(
        "expansion: C = {:.8} +- {:.2e}, fitted {fitted:.8}, symmetry {}",
        report.c, report.quadrature_error, report.symmetry
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CounterexampleReport<'a> {
    experiment: &'a str,
    rho_r0: f64,
    rho_max_j2_mismatch: Measured,
    shear_max_defect: Measured,
    shear_max_slope: Measured,
    chi_poly_sup_error: Measured,
}

fn cmd_counterexamples(cfg: &RunConfig) -> Result<ExitCode> {
    use rand::Rng;
    cfg.ensure_out_dir()?;
    let p = cfg.rho_profile()?;
    let mut rng = rand_chacha(cfg.quadrature.seed ^ 0xce);
    let mut worst_j2: f64 = 0.0;
    for _ in 0..50 {
        let z = DVector::from_vec(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let t = rng.gen_range(-3.0..3.0);
        let j = shadowlab_core::counterexamples::rho_map_jacobian2(&p, &z, t, 50_000);
        worst_j2 = worst_j2.max((j.closed_form - j.sampled_max).abs());
    }
    let r0 = shadowlab_core::counterexamples::jacobian2_lower_radius(&p, p.r_max);

    let s = cfg.shear_profile()?;
    let mut worst_defect: f64 = 0.0;
    let mut max_slope: f64 = 0.0;
    let span = 2.2 * s.r_big;
    for i in 0..=2000 {
        let x2 = -span + 2.0 * span * i as f64 / 2000.0;
        max_slope = max_slope.max(s.chi_prime(x2).abs());
        let x = DVector::from_vec(vec![0.7, -0.3, x2, 0.2]);
        worst_defect = worst_defect.max(shadowlab_core::counterexamples::guth_shear_defect(&s, &x));
    }
    let (_, sup, _) = s.polynomial_approximation(28);

    let report = CounterexampleReport {
        experiment: &cfg.experiment,
        rho_r0: r0,
        rho_max_j2_mismatch: Measured::new(worst_j2, 1e-4),
        shear_max_defect: Measured::new(worst_defect, 1e-9),
        shear_max_slope: Measured::new(max_slope, 1.5),
        chi_poly_sup_error: Measured::new(sup, 0.05),
    };
    write_json(&cfg.out.join("counterexamples.json"), &report)?;
    println!(
        "counterexamples: J2 mismatch {worst_j2:.3e}, J2 >= 1 up to r = {r0:.3}, \
         shear defect {worst_defect:.3e}"
    );
    if worst_j2 > 1e-4 || worst_defect > 1e-9 || max_slope > 1.5 {
        return Ok(ExitCode::from(EXIT_VIOLATION));
    }
    Ok(EXIT_OK)
}

fn cmd_selftest() -> Result<ExitCode> {
    let checks = shadowlab_core::selftest::run_all(&Default::default());
    let mut all_ok = true;
    println!("{:<26} {:<6} detail", "check", "status");
    for c in &checks {
        println!(
            "{:<26} {:<6} {}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        );
        all_ok &= c.passed;
    }
    if all_ok {
        Ok(EXIT_OK)
    } else {
        Ok(ExitCode::from(EXIT_VIOLATION))
    }
}
