use std::f64::consts::FRAC_1_SQRT_2;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use cr_yamabe::action::{theorem_b_check, write_paths_csv, ActionOptions, PairsSpec};
use cr_yamabe::flow::{self, FlowChecks, RunSummary};
use cr_yamabe::harnack::{harnack_y, harnack_z, LegendrianField};
use cr_yamabe::initial::{
    exact_curvature_at, exact_torsion_free_residual, random_smooth_field, rational_sample_points, section5_lambda,
    section5_w_closed_form, section5_w_oracle, verify_torsion_free,
};
use cr_yamabe::interp::FieldHistory;
use cr_yamabe::poly::QI2;
use cr_yamabe::sphere::SPHERE_VOLUME;
use cr_yamabe::{
    ComplexField, Direction, Error, FlowConfig, FrameCalculus, GridDims, HopfGrid, PseudohermitianState, Result,
    ScalarField, Section5Params, SpherePoint, TerminalEvent,
};

use crate::manifest::{Check, RunManifest, Status};

/// What a subcommand hands back to `main` for the exit status.
pub struct Outcome {
    pub manifest: RunManifest,
    /// A numerical terminal event or optimizer failure occurred.
    pub numerical: bool,
}

fn calculus(dims: GridDims) -> Result<Arc<FrameCalculus>> {
    Ok(Arc::new(FrameCalculus::new(Arc::new(HopfGrid::new(dims)?))))
}

fn write_manifest(m: &RunManifest, out: Option<&Path>) -> Result<()> {
    if let Some(dir) = out {
        m.write(dir)?;
    }
    Ok(())
}

pub fn run(config: &Path, out: Option<PathBuf>, threads: Option<usize>) -> Result<Outcome> {
    let mut cfg = FlowConfig::load(config)?;
    let dir = out
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| Error::Usage("no output directory: pass --out or set \"out\" in the config".into()))?;
    cfg.out = None;
    let run = flow::run(&cfg)?;
    let files = run.write_outputs(&dir)?;

    let mut m = RunManifest::new();
    m.record_command("run", serde_json::to_value(&cfg)?, threads);
    m.grid = Some(cfg.grid);
    m.t_start = Some(0.0);
    m.t_end = Some(run.final_state.t());
    m.terminal = Some(run.terminal.clone());
    m.add_outputs(&dir, files);
    for c in flow_checks(&run.config, &FlowChecks::evaluate(&run), run.min_w0) {
        m.push(c);
    }
    m.write(&dir)?;
    Ok(Outcome { numerical: run.terminal.is_numerical(), manifest: m })
}

fn flow_checks(cfg: &FlowConfig, fc: &FlowChecks, min_w0: f64) -> Vec<Check> {
    let tol = &cfg.tolerances;
    let mut out = vec![
        Check::at_most("min_w_nondecreasing", fc.worst_min_w_drop, tol.monotone_rel)
            .with_detail("largest relative drop of min W between accepted states"),
        Check::at_most("min_w_comparison", fc.worst_comparison_gap, fc.theorem_a_tol)
            .with_detail(format!("largest shortfall of min W below c/(1-2ct), c = {min_w0:.6e}")),
    ];
    match (fc.min_y, fc.min_diff_residual) {
        (Some(y), Some(d)) => {
            out.push(Check::at_least_minus("harnack_min_y", y, fc.theorem_a_tol));
            out.push(Check::at_least_minus("harnack_differential", d, fc.theorem_a_tol));
        }
        _ => {
            out.push(Check::not_run("harnack_min_y", "no recorded time at or after t_min"));
            out.push(Check::not_run("harnack_differential", "no recorded time at or after t_min"));
        }
    }
    out.push(
        Check::at_most("structural_growth", fc.worst_structural_ratio, tol.structural_factor)
            .with_detail("max over A11, W0, W11, Q11 of |value| / t=0 level"),
    );
    out
}

fn max_diff(a: &ComplexField, f: impl Fn(&SpherePoint) -> Complex64) -> f64 {
    let g = a.grid();
    a.values().iter().enumerate().fold(0.0, |m, (i, v)| m.max((v - f(&g.point(i))).norm()))
}

pub struct OperatorOptions {
    pub grid: GridDims,
    pub tol: f64,
    pub poly_tol: f64,
    pub seed: u64,
}

pub fn verify_operators(o: &OperatorOptions, out: Option<PathBuf>, threads: Option<usize>) -> Result<Outcome> {
    let calc = calculus(o.grid)?;
    let g = calc.grid().clone();
    let mut m = RunManifest::new();
    m.record_command(
        "verify-operators",
        json!({"grid": o.grid, "tol": o.tol, "poly_tol": o.poly_tol, "seed": o.seed}),
        threads,
    );
    m.grid = Some(o.grid);

    let ones = vec![1.0; g.len()];
    m.push(Check::at_most("quadrature_volume", (g.integrate(&ones) - SPHERE_VOLUME).abs() / SPHERE_VOLUME, 1e-10));

    let z1 = ComplexField::from_fn(g.clone(), |p| p.z1());
    let z2 = ComplexField::from_fn(g.clone(), |p| p.z2());
    let d = calc.frame_derivative(&z2, Direction::Z1)?;
    m.push(Check::at_most("frame_z1_on_z2", max_diff(&d, |p| p.z1().conj() * FRAC_1_SQRT_2), o.tol));
    let d = calc.frame_derivative(&z1, Direction::Z1)?;
    m.push(Check::at_most("frame_z1_on_z1", max_diff(&d, |p| -p.z2().conj() * FRAC_1_SQRT_2), o.tol));

    let re = ScalarField::from_fn(g.clone(), |p| p.z1().re);
    let lap = calc.sublaplacian(&re)?;
    m.push(Check::at_most("sublaplacian_re_z1", lap.max_abs_diff(&re.map(|v| -0.5 * v)), o.tol));
    let n1 = ScalarField::from_fn(g.clone(), |p| p.z1().norm_sqr());
    let want = ScalarField::from_fn(g.clone(), |p| p.z2().norm_sqr() - p.z1().norm_sqr());
    m.push(Check::at_most("sublaplacian_norm_z1", calc.sublaplacian(&n1)?.max_abs_diff(&want), o.tol));

    let (f, poly) = random_smooth_field(o.seed, 4, &g)?;
    let mut worst = 0.0f64;
    for dir in [Direction::Z1, Direction::Z1bar, Direction::T] {
        let exact = poly.frame_derivative(dir);
        worst = worst.max(max_diff(&calc.frame_derivative(&f, dir)?, |p| exact.eval(p)));
    }
    let (lap, residue) = calc.sublaplacian_with_residue(&f)?;
    let exact = poly.sublaplacian();
    worst = worst.max(max_diff(&lap.to_complex(), |p| exact.eval(p)));
    let scale = f.max_abs().max(1.0);
    m.push(
        Check::at_most("random_polynomial", worst / scale, o.poly_tol)
            .with_detail(format!("degree 4, seed {}, error relative to max|f| = {scale:.3e}", o.seed)),
    );
    m.push(Check::at_most("sublaplacian_reality", residue / lap.max_abs().max(scale), 1e-8));

    let s = calc.covariant_second(&f)?;
    let t = calc.frame_derivative(&f, Direction::T)?;
    let i = Complex64::new(0.0, 1.0);
    let comm = (0..g.len()).fold(0.0f64, |acc, k| {
        acc.max((s.f11bar.values()[k] - s.f1bar1.values()[k] - i * t.values()[k]).norm())
    });
    m.push(Check::at_most("commutation", comm / scale, o.poly_tol));

    write_manifest(&m, out.as_deref())?;
    Ok(Outcome { manifest: m, numerical: false })
}

pub struct InitialOptions {
    pub grid: GridDims,
    pub params: Section5Params,
    pub points: usize,
    pub seed: u64,
    pub tol: f64,
    pub printed_formula: bool,
}

pub fn verify_initial_data(o: &InitialOptions, out: Option<PathBuf>, threads: Option<usize>) -> Result<Outcome> {
    let calc = calculus(o.grid)?;
    let p = &o.params;
    let mut m = RunManifest::new();
    m.record_command(
        "verify-initial-data",
        json!({"grid": o.grid, "params": p, "points": o.points, "seed": o.seed, "tol": o.tol,
               "printed_formula": o.printed_formula}),
        threads,
    );
    m.grid = Some(o.grid);

    let pts = rational_sample_points(o.seed, o.points);
    let residual = exact_torsion_free_residual(p, &pts)?;
    let nonzero = residual.iter().filter(|r| !r.is_zero()).count();
    m.push(Check::flag("exact_torsion_free", nonzero == 0, format!("{nonzero} of {} exact points nonzero", pts.len())));

    let (a, b, c) = (QI2::from_c64(p.a)?, QI2::from_c64(p.b)?, QI2::from_c64(p.c)?);
    let want = &(&(&c * &c.conj()) - &(&a * &a.conj())) - &(&b * &b.conj());
    let w_exact = exact_curvature_at(p, &pts)?;
    let off = w_exact.iter().filter(|w| **w != want).count();
    let closed = section5_w_closed_form(p);
    m.push(Check::flag(
        "exact_constant_curvature",
        off == 0,
        format!("W = |c|^2-|a|^2-|b|^2 = {closed:.12e} at {} of {} exact points", pts.len() - off, pts.len()),
    ));

    let tf = verify_torsion_free(p, &calc)?;
    m.push(Check::at_most("discrete_torsion", tf.max_abs_a11, o.tol));
    m.push(Check::at_most("discrete_torsion_free_residual", tf.residual_5_1, o.tol));

    let lambda = section5_lambda(p, calc.grid())?;
    let w = calc.webster_curvature(&lambda)?;
    let rel = w.values().iter().fold(0.0f64, |acc, v| acc.max((v - closed).abs())) / closed.abs();
    m.push(Check::at_most("discrete_curvature", rel, o.tol));

    if o.printed_formula {
        let oracle = section5_w_oracle(p, calc.grid())?;
        let rel = w.max_abs_diff(&oracle) / oracle.max_abs();
        m.push(Check::at_most("printed_curvature_formula", rel, 1e-4));
    } else {
        m.push(Check::not_run("printed_curvature_formula", "pass --printed-formula to compare"));
    }

    write_manifest(&m, out.as_deref())?;
    Ok(Outcome { manifest: m, numerical: false })
}

fn read_summary(run_dir: &Path) -> Result<RunSummary> {
    let p = run_dir.join("run.json");
    let text = std::fs::read_to_string(&p).map_err(|e| Error::Usage(format!("cannot read {}: {e}", p.display())))?;
    Ok(serde_json::from_str(&text)?)
}

/// η₁ = Σ cₖ mₖ over a few low-degree monomials.
fn random_eta(g: &Arc<HopfGrid>, rng: &mut impl Rng, amplitude: f64) -> LegendrianField {
    let mut c = || Complex64::new(rng.gen_range(-amplitude..amplitude), rng.gen_range(-amplitude..amplitude));
    let k = [c(), c(), c(), c(), c(), c()];
    LegendrianField::new(ComplexField::from_fn(g.clone(), |p| {
        let (z1, z2) = (p.z1(), p.z2());
        k[0] + k[1] * z1 + k[2] * z2 + k[3] * z1.conj() + k[4] * z2.conj() + k[5] * z1 * z2.conj()
    }))
}

pub const MONITOR_HEADER: &str = "t,min_Y,min_Z_minus_Y";

pub struct MonitorOptions {
    pub samples: usize,
    pub seed: u64,
    pub tol: Option<f64>,
}

pub fn harnack_monitor(run_dir: &Path, o: &MonitorOptions, out: Option<PathBuf>, threads: Option<usize>) -> Result<Outcome> {
    let summary = read_summary(run_dir)?;
    let (grid, snaps) = flow::load_snapshots(run_dir)?;
    let calc = Arc::new(FrameCalculus::with_fd_order(grid.clone(), summary.config.fd_order)?);
    let tol = o.tol.unwrap_or(summary.checks.theorem_a_tol);
    let t_min = summary.config.t_min;
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);

    let mut rows = Vec::new();
    let (mut min_y, mut min_gap) = (f64::INFINITY, f64::INFINITY);
    for (t, lambda) in snaps {
        if !(t > 0.0 && t >= t_min) {
            continue;
        }
        let st = PseudohermitianState::new(calc.clone(), lambda, t)?;
        let y = harnack_y(&st, t)?;
        let scale = y.max_abs().max(1.0);
        let mut gap = f64::INFINITY;
        for _ in 0..o.samples {
            let z = harnack_z(&st, &random_eta(&grid, &mut rng, 5.0), t)?;
            gap = gap.min(z.zip_map(&y, |a, b| a - b).min() / scale);
        }
        min_y = min_y.min(y.min());
        min_gap = min_gap.min(gap);
        rows.push((t, y.min(), gap));
    }

    let dir = out.unwrap_or_else(|| run_dir.to_path_buf());
    std::fs::create_dir_all(&dir)?;
    let csv = dir.join("harnack_monitor.csv");
    let mut text = format!("{MONITOR_HEADER}\n");
    for (t, y, gap) in &rows {
        text.push_str(&format!("{t:.17e},{y:.17e},{gap:.17e}\n"));
    }
    std::fs::write(&csv, text)?;

    let mut m = RunManifest::open(&dir)?;
    m.record_command(
        "harnack-monitor",
        json!({"run": run_dir, "samples": o.samples, "seed": o.seed, "tol": tol}),
        threads,
    );
    m.add_outputs(&dir, [csv]);
    if rows.is_empty() {
        m.push(Check::not_run("monitor_min_y", "no snapshot at or after t_min"));
        m.push(Check::not_run("quadratic_dominance", "no snapshot at or after t_min"));
    } else {
        m.push(Check::at_least_minus("monitor_min_y", min_y, tol).with_detail(format!("{} snapshots", rows.len())));
        let detail = if o.samples == 0 { "no samples".to_string() } else { format!("{} fields per snapshot, relative to max|Y|", o.samples) };
        if o.samples == 0 {
            m.push(Check::not_run("quadratic_dominance", &detail));
        } else {
            m.push(Check::at_least_minus("quadratic_dominance", min_gap, 1e-12).with_detail(detail));
        }
    }
    m.write(&dir)?;
    Ok(Outcome { manifest: m, numerical: false })
}

pub fn path_action(pairs: &Path, run_dir: &Path, opts: &ActionOptions, out: Option<PathBuf>, threads: Option<usize>) -> Result<Outcome> {
    let text = std::fs::read_to_string(pairs).map_err(|e| Error::Usage(format!("cannot read {}: {e}", pairs.display())))?;
    let spec: PairsSpec = serde_json::from_str(&text).map_err(|e| Error::Config(format!("bad pairs file: {e}")))?;
    let list = spec.pairs()?;
    let hist = FieldHistory::load(run_dir)?;

    let mut checks = Vec::new();
    let mut errors = Vec::new();
    let mut numerical = false;
    for (k, p) in list.iter().enumerate() {
        let x1 = SpherePoint::project(p.x1[0], p.x1[1])?;
        let x2 = SpherePoint::project(p.x2[0], p.x2[1])?;
        match theorem_b_check(&x1, p.t1, &x2, p.t2, &hist, opts) {
            Ok(c) => checks.push(c),
            Err(e @ (Error::Reachability { .. } | Error::PathStep { .. })) => {
                numerical = true;
                errors.push(format!("pair {k}: {e}"));
            }
            Err(e) => return Err(e),
        }
    }

    let dir = out.unwrap_or_else(|| run_dir.to_path_buf());
    std::fs::create_dir_all(&dir)?;
    let csv = dir.join("paths.csv");
    write_paths_csv(&checks, std::fs::File::create(&csv)?)?;

    let mut m = RunManifest::open(&dir)?;
    m.record_command(
        "path-action",
        json!({"pairs": spec, "run": run_dir, "segments": opts.segments, "random_starts": opts.random_starts,
               "seed": opts.seed, "defect_tol": opts.defect_tol}),
        threads,
    );
    m.add_outputs(&dir, [csv]);
    let passed = checks.iter().filter(|c| c.pass).count();
    let worst = checks.iter().map(|c| c.lhs / c.rhs).fold(f64::INFINITY, f64::min);
    let mut detail = format!("{passed} of {} pairs pass; smallest lhs/rhs {worst:.6e}", list.len());
    if !errors.is_empty() {
        detail.push_str(&format!("; {}", errors.join("; ")));
    }
    let check = if list.is_empty() {
        Check::not_run("integrated_harnack", "no pairs")
    } else {
        Check::flag("integrated_harnack", passed == list.len(), detail)
    };
    m.push(check);
    m.write(&dir)?;
    Ok(Outcome { manifest: m, numerical })
}

/// Human-readable table of a manifest.
pub fn report(run_dir: &Path) -> Result<(String, RunManifest)> {
    let m = RunManifest::load(run_dir)?;
    let mut s = String::new();
    s.push_str(&format!("run directory: {}\n", run_dir.display()));
    s.push_str(&format!("commands: {}  (version {})\n", m.commands.join(", "), m.code_version));
    if let Some(g) = m.grid {
        s.push_str(&format!("grid: {} x {} x {}\n", g.n_eta, g.n_xi1, g.n_xi2));
    }
    match (&m.terminal, m.t_end) {
        (Some(TerminalEvent::Completed), Some(t)) => s.push_str(&format!("terminal event: completed at t = {t}\n")),
        (Some(ev), Some(t)) => {
            s.push_str(&format!("terminal event: {}\n", serde_json::to_string(ev)?));
            s.push_str(&format!("last valid t: {t}\n"));
        }
        _ => {}
    }
    let rows: Vec<[String; 5]> = m
        .checks
        .iter()
        .map(|c| {
            let f = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4e}"));
            [c.name.clone(), c.status.label().to_string(), f(c.value), f(c.tolerance), c.detail.clone()]
        })
        .collect();
    let head = ["check", "status", "worst", "tolerance", "detail"];
    let mut w = head.map(str::len);
    for r in &rows {
        for (i, cell) in r.iter().enumerate().take(4) {
            w[i] = w[i].max(cell.chars().count());
        }
    }
    let line = |r: [&str; 5]| {
        format!("{:<a$}  {:<b$}  {:>c$}  {:>d$}  {}\n", r[0], r[1], r[2], r[3], r[4], a = w[0], b = w[1], c = w[2], d = w[3])
    };
    s.push_str(&line(head));
    for r in &rows {
        s.push_str(&line([&r[0], &r[1], &r[2], &r[3], &r[4]]));
    }
    let fails = m.checks.iter().filter(|c| c.status == Status::Fail).count();
    let not_run = m.checks.iter().filter(|c| c.status == Status::NotRun).count();
    s.push_str(&format!("{} checks: {} failed, {} not run\n", m.checks.len(), fails, not_run));
    Ok((s, m))
}
