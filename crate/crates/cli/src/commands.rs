//! One function per subcommand. Each returns the process exit code: 0 for
//! success, 2 when a configured threshold is exceeded; usage and config
//! problems surface as errors and become exit code 1 in the driver.

use std::path::PathBuf;

use gfvc::util::linspace;
use gfvc::{
    a_op, analytic_damped_bvp, b_op, build_bck_problem, check_ibp_k, default_diff_step,
    default_residual_grid, el_residual, falva_residual, k_op, random_subintervals, solve_ritz,
    Error, FunctionHandle, OrderMode, OscillatorConfig, Potential, ProblemSpec, Result, Solution,
    SolveOptions, TransformationSpec,
};

use crate::config::RunConfig;
use crate::output::{fmt_sig, write_table, write_text};
use crate::registry;

pub fn op_eval(cfg: &RunConfig) -> Result<i32> {
    let ocfg = cfg
        .op
        .as_ref()
        .ok_or_else(|| Error::Usage("op eval needs an op section".into()))?;
    let kcfg = cfg.kernel_section()?;
    let ps = cfg.pset_or_default()?;
    let quad = cfg.quad_or_default()?;
    let f = registry::function(&ocfg.function, (ps.a, ps.b))?;

    let mut rows = Vec::with_capacity(ocfg.points.len());
    for &x in &ocfg.points {
        let v = match ocfg.operator.as_str() {
            "integral" => k_op(&kcfg.build()?, &ps, &f, x, &quad)?[0],
            "caputo" => b_op(&kcfg.build_for_derivative()?, &ps, &f, x, &quad)?[0],
            "derivative" => {
                let kernel = kcfg.build_for_derivative()?;
                a_op(&kernel, &ps, &f, x, &quad, default_diff_step(&ps))?[0]
            }
            other => {
                return Err(Error::Usage(format!(
                    "unknown operator {other:?}; expected integral, caputo or derivative"
                )))
            }
        };
        println!("{}", fmt_sig(v));
        rows.push(vec![x, v]);
    }
    if let Some(out) = &cfg.output {
        write_table(out, &["t".into(), "value".into()], &rows)?;
    }
    Ok(0)
}

pub fn ibp_check(cfg: &RunConfig) -> Result<i32> {
    let icfg = cfg
        .ibp
        .as_ref()
        .ok_or_else(|| Error::Usage("ibp-check needs an ibp section".into()))?;
    let kcfg = cfg.kernel_section()?;
    let ps = cfg.pset_or_default()?;
    let quad = cfg.quad_or_default()?;
    let f = registry::function(&icfg.f, (ps.a, ps.b))?;
    let g = registry::function(&icfg.g, (ps.a, ps.b))?;

    let report = match icfg.route.as_str() {
        "integral" => check_ibp_k(&kcfg.build()?, &ps, &f, &g, &quad)?,
        "derivative" => gfvc::check_ibp_b(&kcfg.build_for_derivative()?, &ps, &f, &g, &quad)?,
        other => {
            return Err(Error::Usage(format!(
                "unknown ibp route {other:?}; expected integral or derivative"
            )))
        }
    };
    println!("lhs = {}", fmt_sig(report.lhs));
    println!("rhs = {}", fmt_sig(report.rhs));
    println!("abs_residual = {}", fmt_sig(report.abs_residual));
    println!("route = {}", report.route);
    threshold_gate(cfg, "abs_residual", report.abs_residual)
}

pub fn solve(cfg: &RunConfig) -> Result<i32> {
    let problem = registry::build_problem(cfg)?;
    let sol = run_solver(cfg, &problem)?;
    let d = &sol.diagnostics;
    println!("converged = {}", sol.converged);
    println!("functional_value = {}", fmt_sig(d.functional_value));
    println!("el_residual_l2 = {}", fmt_sig(d.el_residual_l2));
    if let Some(nbc) = &d.natural_bc_residual {
        let cells: Vec<String> = nbc.iter().map(|v| fmt_sig(*v)).collect();
        println!("natural_bc_residual = {}", cells.join(" "));
    }
    if let Some(lambda) = d.multiplier {
        println!("multiplier = {}", fmt_sig(lambda));
    }
    if let Some(gap) = d.constraint_gap {
        println!("constraint_gap = {}", fmt_sig(gap));
    }

    if let Some(out) = &cfg.output {
        let (a, b) = problem.interval();
        let grid = match &cfg.grid {
            Some(g) => g.resolve((a, b))?,
            None => linspace(a, b, 101),
        };
        let dim = problem.lagrangian().dim();
        let mut columns = vec!["t".to_string()];
        columns.extend((1..=dim).map(|c| format!("y_{c}")));
        let rows: Vec<Vec<f64>> = grid
            .iter()
            .map(|&t| {
                let mut row = vec![t];
                row.extend(sol.evaluator.eval(t));
                row
            })
            .collect();
        write_table(out, &columns, &rows)?;
    }
    threshold_gate(cfg, "el_residual_l2", d.el_residual_l2)
}

pub fn residual(cfg: &RunConfig) -> Result<i32> {
    let problem = registry::build_problem(cfg)?;
    let y = resolve_trajectory(cfg, &problem)?;
    let grid = diagnostic_grid(cfg, &problem)?;
    let rows = el_residual(&problem, &y, &grid, problem.quad())?;
    let worst = rows.iter().flatten().fold(0.0_f64, |m, r| m.max(r.abs()));
    println!("max_abs_residual = {}", fmt_sig(worst));

    if let Some(out) = &cfg.output {
        let dim = rows.len();
        let mut columns = vec!["t".to_string()];
        columns.extend((1..=dim).map(|c| format!("residual_{c}")));
        let table: Vec<Vec<f64>> = grid
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let mut row = vec![t];
                row.extend(rows.iter().map(|comp| comp[i]));
                row
            })
            .collect();
        write_table(out, &columns, &table)?;
    }
    threshold_gate(cfg, "max_abs_residual", worst)
}

pub fn noether(cfg: &RunConfig, seed: u64) -> Result<i32> {
    let problem = registry::build_problem(cfg)?;
    let dim = problem.lagrangian().dim();
    let tcfg = cfg
        .transformation
        .as_ref()
        .ok_or_else(|| Error::Usage("noether needs a transformation section".into()))?;
    let xf = match tcfg.kind.as_str() {
        "translation" => {
            let direction = tcfg.direction.clone().unwrap_or_else(|| vec![1.0; dim]);
            TransformationSpec::translation(direction)?
        }
        "rotation_xy" => TransformationSpec::rotation_xy(dim)?,
        other => {
            return Err(Error::Usage(format!(
                "unknown transformation {other:?}; expected translation or rotation_xy"
            )))
        }
    };
    let y = resolve_trajectory(cfg, &problem)?;

    let spans = random_subintervals(problem.interval(), 8, seed);
    let defect = gfvc::check_invariance(&problem, &xf, &y, &[1e-2, 1e-3, 1e-4], &spans)?;
    println!("invariance_defect = {}", fmt_sig(defect));

    let grid = match &cfg.grid {
        Some(_) => diagnostic_grid(cfg, &problem)?,
        // The identity is costly per point (nested operator evaluations),
        // so the default grid is coarse.
        None => {
            let (a, b) = problem.interval();
            let h = problem.diff_step();
            linspace(a + 2.0 * h, b - 2.0 * h, 9)
        }
    };
    let res = gfvc::noether_residual(&problem, &xf, &y, &grid)?;
    let worst = res.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    println!("max_abs_residual = {}", fmt_sig(worst));

    if let Some(out) = &cfg.output {
        let rows: Vec<Vec<f64>> = grid.iter().zip(&res).map(|(&t, &r)| vec![t, r]).collect();
        write_table(out, &["t".into(), "residual".into()], &rows)?;
    }
    threshold_gate(cfg, "max_abs_residual", worst)
}

pub fn constant_of_motion(cfg: &RunConfig) -> Result<i32> {
    let problem = registry::build_problem(cfg)?;
    let y = resolve_trajectory(cfg, &problem)?;
    let mode = match cfg.order_mode.as_deref() {
        None | Some("derived_one_minus_alpha") => OrderMode::DerivedOneMinusAlpha,
        Some("as_printed_alpha") => OrderMode::AsPrintedAlpha,
        Some(other) => {
            return Err(Error::Usage(format!(
                "unknown order_mode {other:?}; expected derived_one_minus_alpha or \
                 as_printed_alpha"
            )))
        }
    };
    let (a, b) = problem.interval();
    let inset = 0.05 * (b - a);
    let grid = match &cfg.grid {
        Some(g) => g.resolve((a + inset, b - inset))?,
        None => linspace(a + inset, b - inset, 16),
    };
    let q = gfvc::constant_of_motion(&problem, &y, &grid, mode)?;
    for (t, v) in grid.iter().zip(&q.values) {
        println!("{} {}", fmt_sig(*t), fmt_sig(*v));
    }
    println!("flatness = {}", fmt_sig(q.flatness));

    if let Some(out) = &cfg.output {
        let rows: Vec<Vec<f64>> = grid
            .iter()
            .zip(&q.values)
            .map(|(&t, &v)| vec![t, v])
            .collect();
        write_table(out, &["t".into(), "value".into()], &rows)?;
    }
    threshold_gate(cfg, "flatness", q.flatness)
}

pub fn validate(cfg: &RunConfig) -> Result<i32> {
    let problem = registry::build_problem(cfg)?;
    let report = gfvc::validate_problem(&problem);
    for finding in &report.findings {
        println!("finding: {finding}");
    }
    for note in &report.notes {
        println!("note: {note}");
    }
    if report.is_clean() {
        println!("no findings");
        Ok(0)
    } else {
        Ok(2)
    }
}

#[derive(Clone, Debug, clap::Args)]
pub struct OscillatorArgs {
    /// Damping rate; the problem's kernel coefficient is its negative.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: f64,
    /// Natural frequency of the spring term.
    #[arg(long)]
    pub omega: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mass: f64,
    /// Sample count for the emitted table.
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    /// Exit 2 when the closed-form comparison exceeds this.
    #[arg(long, default_value_t = 1e-3)]
    pub tolerance: f64,
    #[arg(long, default_value = "oscillator.csv")]
    pub out: PathBuf,
    /// Boundary values at the left end, three comma-separated entries.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub ya: Option<Vec<f64>>,
    /// Boundary values at the right end, three comma-separated entries.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub yb: Option<Vec<f64>>,
}

pub fn demo_oscillator(args: &OscillatorArgs) -> Result<i32> {
    if args.points < 2 {
        return Err(Error::Usage("points must be at least 2".into()));
    }
    let cfg = OscillatorConfig {
        mass: args.mass,
        potential: Potential::Harmonic {
            k: args.mass * args.omega * args.omega,
        },
        kernel_coefficient: -args.gamma,
        interval: (0.0, 1.0),
        y_a: boundary_triple(&args.ya, [0.0, 1.0, 0.0])?,
        y_b: boundary_triple(&args.yb, [1.0, 0.5, 0.0])?,
    };
    let problem = build_bck_problem(&cfg)?;
    let exact = analytic_damped_bvp(&cfg)?;
    let sol = solve_ritz(&problem, 20, &SolveOptions::default())?;

    let (a, b) = cfg.interval;
    let margin = 4e-3 * (b - a);
    let grid = linspace(a + margin, b - margin, args.points);
    let res = falva_residual(&cfg, &sol.evaluator, &grid)?;
    let c = cfg.kernel_coefficient;

    let mut linf = 0.0_f64;
    let mut rows = Vec::with_capacity(grid.len());
    for (i, &t) in grid.iter().enumerate() {
        let pos = sol.evaluator.eval(t);
        let vel = sol.evaluator.deriv(t);
        let acc = sol
            .evaluator
            .second_deriv(t)
            .ok_or_else(|| Error::Usage("solver trajectory lacks second derivatives".into()))?;
        let want = exact.eval(t);
        for k in 0..3 {
            linf = linf.max((pos[k] - want[k]).abs());
        }
        let momentum = cfg.mass * (acc[0] - c * vel[0]);
        let rotation = cfg.mass * (acc[0] * pos[1] - pos[0] * acc[1])
            - c * cfg.mass * (vel[0] * pos[1] - pos[0] * vel[1]);
        let mut row = vec![t];
        row.extend(&pos);
        row.extend(&want);
        row.extend((0..3).map(|k| res[k][i]));
        row.push(momentum);
        row.push(rotation);
        rows.push(row);
    }

    let mut columns = vec!["t".to_string()];
    columns.extend((1..=3).map(|k| format!("y_{k}")));
    columns.extend((1..=3).map(|k| format!("analytic_{k}")));
    columns.extend((1..=3).map(|k| format!("el_residual_{k}")));
    columns.push("momentum_residual".into());
    columns.push("rotation_residual".into());
    let mut text = columns.join(",");
    text.push('\n');
    for row in &rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_sig(*v)).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    write_text(&args.out, &text)?;

    println!("wrote {}", args.out.display());
    println!(
        "L_inf error vs analytic = {} (tolerance {})",
        fmt_sig(linf),
        fmt_sig(args.tolerance)
    );
    if linf > args.tolerance {
        println!(
            "L_inf error {} exceeds tolerance {}",
            fmt_sig(linf),
            fmt_sig(args.tolerance)
        );
        return Ok(2);
    }
    Ok(0)
}

fn boundary_triple(given: &Option<Vec<f64>>, fallback: [f64; 3]) -> Result<[f64; 3]> {
    match given {
        None => Ok(fallback),
        Some(v) if v.len() == 3 => Ok([v[0], v[1], v[2]]),
        Some(v) => Err(Error::Usage(format!(
            "boundary values need exactly three entries, got {}",
            v.len()
        ))),
    }
}

fn run_solver(cfg: &RunConfig, problem: &ProblemSpec) -> Result<Solution> {
    let basis = cfg.basis_size.unwrap_or(20);
    let opts = SolveOptions::default();
    if problem.isoperimetric().is_some() {
        gfvc::solve_isoperimetric(problem, basis, &opts)
    } else {
        solve_ritz(problem, basis, &opts)
    }
}

fn resolve_trajectory(cfg: &RunConfig, problem: &ProblemSpec) -> Result<FunctionHandle> {
    match &cfg.trajectory {
        Some(name) => {
            let dim = problem.lagrangian().dim();
            if dim != 1 {
                return Err(Error::Usage(format!(
                    "named trajectories are scalar but this problem has {dim} components; \
                     drop the trajectory key to use the solver's extremal"
                )));
            }
            registry::function(name, problem.interval())
        }
        None => Ok(run_solver(cfg, problem)?.evaluator),
    }
}

/// Interior grid for stencil-based diagnostics, staying clear of the
/// differentiation margin at both ends.
fn diagnostic_grid(cfg: &RunConfig, problem: &ProblemSpec) -> Result<Vec<f64>> {
    let (a, b) = problem.interval();
    let h = problem.diff_step();
    match &cfg.grid {
        Some(g) => g.resolve((a + 2.0 * h, b - 2.0 * h)),
        None => Ok(default_residual_grid(problem)),
    }
}

fn threshold_gate(cfg: &RunConfig, what: &str, value: f64) -> Result<i32> {
    match cfg.threshold {
        Some(limit) if value > limit => {
            println!(
                "{what} {} exceeds threshold {}",
                fmt_sig(value),
                fmt_sig(limit)
            );
            Ok(2)
        }
        _ => Ok(0),
    }
}
