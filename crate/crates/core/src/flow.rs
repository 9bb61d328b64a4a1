//! Explicit time integration of ∂ₜλ = −W with monitoring.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::calculus::{FrameCalculus, DEFAULT_FD_ORDER};
use crate::error::{Error, Result};
use crate::field::{self, ScalarField};
use crate::harnack::{differential_harnack_residual, harnack_y, harnack_z, window_dt, LegendrianField};
use crate::initial::{random_real_poly, section5_lambda, Section5Params};
use crate::sphere::{GridDims, HopfGrid};
use crate::transform::{DiagnosticsRecord, PseudohermitianState};
use crate::ComplexField;

/// Largest admissible dt·max W.
pub const W_STEP_CAP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomInit {
    pub seed: u64,
    pub degree: u32,
    /// λ₀ = amplitude · P / max|P| on the grid.
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Section5(Section5Params),
    File { file: PathBuf },
    Random { random: RandomInit },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative slack allowed when min W decreases between trace rows.
    #[serde(default = "d_monotone")]
    pub monotone_rel: f64,
    /// Allowed growth of A₁₁, W,₀, W,₁₁, Q₁₁ over their t = 0 levels.
    #[serde(default = "d_factor")]
    pub structural_factor: f64,
    /// Absolute tolerance for Y ≥ −tol; when absent it is derived from the
    /// run itself (10 × the t = 0 level of |Δ_bW − Δ_bW̄|, see the flow docs).
    #[serde(default)]
    pub theorem_a: Option<f64>,
}

fn d_monotone() -> f64 {
    1e-8
}
fn d_factor() -> f64 {
    10.0
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { monotone_rel: d_monotone(), structural_factor: d_factor(), theorem_a: None }
    }
}

fn d_sigma() -> f64 {
    0.25
}
fn d_w_cap() -> f64 {
    1e4
}
fn d_t_min() -> f64 {
    0.01
}
fn d_one() -> usize {
    1
}
fn d_fd() -> usize {
    DEFAULT_FD_ORDER
}

/// Run configuration (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub grid: GridDims,
    pub initial: InitialSpec,
    pub t_end: f64,
    #[serde(default = "d_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "d_w_cap")]
    pub w_cap: f64,
    #[serde(default = "d_t_min")]
    pub t_min: f64,
    /// Snapshot cadence in flow time.
    #[serde(default)]
    pub snapshots_every: Option<f64>,
    /// Extra snapshot times.
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
    /// Record a trace row every this many accepted steps.
    #[serde(default = "d_one")]
    pub trace_every: usize,
    #[serde(default = "d_fd")]
    pub fd_order: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl FlowConfig {
    pub fn new(grid: GridDims, initial: InitialSpec, t_end: f64) -> Self {
        Self {
            grid,
            initial,
            t_end,
            sigma: d_sigma(),
            integrator: Integrator::Rk4,
            w_cap: d_w_cap(),
            t_min: d_t_min(),
            snapshots_every: None,
            snapshot_times: Vec::new(),
            trace_every: 1,
            fd_order: DEFAULT_FD_ORDER,
            tolerances: Tolerances::default(),
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        let bad = |m: String| Err(Error::Config(m));
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return bad(format!("t_end must be positive (got {})", self.t_end));
        }
        if !(self.sigma > 0.0 && self.sigma <= 1.0) {
            return bad(format!("sigma must lie in (0, 1] (got {})", self.sigma));
        }
        if !(self.w_cap > 0.0) {
            return bad(format!("w_cap must be positive (got {})", self.w_cap));
        }
        if !(self.t_min >= 0.0) {
            return bad(format!("t_min must be nonnegative (got {})", self.t_min));
        }
        if let Some(e) = self.snapshots_every {
            if !(e > 0.0) {
                return bad(format!("snapshots_every must be positive (got {e})"));
            }
        }
        if self.trace_every == 0 {
            return bad("trace_every must be at least 1".into());
        }
        if let InitialSpec::Section5(p) = &self.initial {
            p.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Snapshot times strictly inside (0, t_end), sorted.
    fn snapshot_schedule(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.snapshot_times.iter().copied().filter(|t| *t > 0.0 && *t < self.t_end).collect();
        if let Some(e) = self.snapshots_every {
            let mut k = 1;
            while (k as f64) * e < self.t_end * (1.0 - 1e-12) {
                v.push(k as f64 * e);
                k += 1;
            }
        }
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        v
    }
}

/// Builds λ₀ on the grid from an initial-data spec.
pub fn initial_lambda(spec: &InitialSpec, grid: &Arc<HopfGrid>) -> Result<ScalarField> {
    match spec {
        InitialSpec::Section5(p) => section5_lambda(p, grid),
        InitialSpec::File { file } => field::load(file)?.into_scalar(grid.clone()),
        InitialSpec::Random { random } => {
            let p = random_real_poly(random.seed, random.degree)?;
            let raw = ScalarField::from_fn(grid.clone(), |x| p.eval(x).re);
            let m = raw.max_abs();
            let s = if m > 0.0 { random.amplitude / m } else { 0.0 };
            Ok(raw.map(|v| v * s))
        }
    }
}

/// dt = σh²/(4 max e^{−2λ}), capped so that dt·max W ≤ 0.1.
pub fn dt_rule(h_min: f64, max_e2: f64, max_w: f64, sigma: f64) -> f64 {
    let dt = sigma * h_min * h_min / (4.0 * max_e2);
    if max_w > 0.0 {
        dt.min(W_STEP_CAP / max_w)
    } else {
        dt
    }
}

pub fn adaptive_dt(state: &PseudohermitianState, sigma: f64) -> Result<f64> {
    let h = state.calculus().grid().h_min();
    let max_e2 = state.lambda().values().iter().fold(0.0f64, |m, l| m.max((-2.0 * l).exp()));
    Ok(dt_rule(h, max_e2, state.w()?.max(), sigma))
}

/// One step of λ̇ = −W from raw values; `w` is W(λ).
fn advance(calc: &FrameCalculus, lam: &[f64], w: &[f64], dt: f64, integrator: Integrator) -> Vec<f64> {
    let axpy = |a: f64, k: &[f64]| -> Vec<f64> { lam.iter().zip(k).map(|(l, k)| l - a * k).collect() };
    match integrator {
        Integrator::Euler => axpy(dt, w),
        Integrator::Rk4 => {
            let k2 = calc.webster_values(&axpy(0.5 * dt, w));
            let k3 = calc.webster_values(&axpy(0.5 * dt, &k2));
            let k4 = calc.webster_values(&axpy(dt, &k3));
            (0..lam.len())
                .map(|i| lam[i] - dt / 6.0 * (w[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                .collect()
        }
    }
}

/// Advances λ by dt and rebuilds the caches.
pub fn step(state: &PseudohermitianState, dt: f64, integrator: Integrator) -> Result<PseudohermitianState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Usage(format!("dt must be positive (got {dt})")));
    }
    let calc = state.calculus();
    let lam = advance(calc, state.lambda().values(), state.w()?.values(), dt, integrator);
    let t = state.t() + dt;
    if lam.iter().any(|v| !v.is_finite()) {
        return Err(Error::StepFailure { t, last_good: Box::new(state.clone()) });
    }
    PseudohermitianState::new(calc.clone(), ScalarField::from_raw(calc.grid().clone(), lam), t)
}

/// Time residuals of the W, A₁₁ and sublaplacian evolution equations at the
/// middle of a uniform three-state window, merged with the spatial diagnostics
/// of that state. The sublaplacian check uses the fixed function f = Re z₁.
pub fn evolution_residuals(window: &[&PseudohermitianState]) -> Result<DiagnosticsRecord> {
    let dt = window_dt(window)?;
    let (sm, s0, sp) = (window[0], window[1], window[2]);
    let calc = s0.calculus();
    let g = calc.grid().clone();
    let mut d = s0.diagnostics()?;
    let w = s0.w()?;
    let n = g.len();

    // Ẇ = 4Δ_bW + 2W²
    let (wm, wp) = (sm.w()?, sp.w()?);
    let lap = s0.lap_w()?;
    let r27 = (0..n).fold(0.0f64, |m, i| {
        let wdot = (wp.values()[i] - wm.values()[i]) / (2.0 * dt);
        let wi = w.values()[i];
        m.max((wdot - 4.0 * lap.values()[i] - 2.0 * wi * wi).abs())
    });

    // Ȧ₁₁ = 2WA₁₁ − 2iW,₁₁
    let (am, a0, ap) = (sm.a11()?, s0.a11()?, sp.a11()?);
    let w11 = calc.flowed_hessian11(s0.lambda(), w)?;
    let i2 = num_complex::Complex64::new(0.0, 2.0);
    let r28 = (0..n).fold(0.0f64, |m, i| {
        let adot = (ap.values()[i] - am.values()[i]) / (2.0 * dt);
        m.max((adot - 2.0 * w.values()[i] * a0.values()[i] + i2 * w11.values()[i]).norm())
    });

    // ḟ = 0: ∂ₜ(Δ_b f) = 2WΔ_b f − 2⟨∇_bW, ∇_b f⟩
    let f = ScalarField::from_fn(g.clone(), |p| p.z1().re);
    let lf = |s: &PseudohermitianState| calc.flowed_sublaplacian(s.lambda(), &f);
    let (lm, l0, lp) = (lf(sm)?, lf(s0)?, lf(sp)?);
    let f1 = calc.flowed_gradient(s0.lambda(), &f)?;
    let w1 = s0.w1()?;
    let r212 = (0..n).fold(0.0f64, |m, i| {
        let lhs = (lp.values()[i] - lm.values()[i]) / (2.0 * dt);
        let inner = 2.0 * (w1.values()[i] * f1.values()[i].conj()).re;
        let rhs = 2.0 * w.values()[i] * l0.values()[i] - 2.0 * inner;
        m.max((lhs - rhs).abs())
    });

    d.res_2_7 = Some(r27);
    d.res_2_8 = Some(r28);
    d.res_2_12 = Some(r212);
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub dt: f64,
    pub min_w: f64,
    pub max_w: f64,
    /// Present once t ≥ t_min.
    pub min_y: Option<f64>,
    pub diagnostics: DiagnosticsRecord,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    /// Diagnostic rows, every `trace_every` steps and at the end.
    pub rows: Vec<TraceRow>,
    /// (t, min W, max W) of every accepted state, starting at t = 0.
    pub extrema: Vec<(f64, f64, f64)>,
}

pub const TRACE_HEADER: &str = "t,dt,min_W,max_W,min_Y,max_abs_A11,max_abs_W0,max_abs_W11,res_2_7,res_2_8";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.17e}")).unwrap_or_default()
}

impl FlowTrace {
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "{TRACE_HEADER}")?;
        for r in &self.rows {
            let d = &r.diagnostics;
            writeln!(
                w,
                "{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e},{},{}",
                r.t, r.dt, r.min_w, r.max_w, opt(r.min_y), d.max_abs_a11, d.max_abs_w0, d.max_abs_w11,
                opt(d.res_2_7), opt(d.res_2_8)
            )?;
        }
        Ok(())
    }

    pub fn min_w_series(&self) -> Vec<(f64, f64)> {
        self.extrema.iter().map(|e| (e.0, e.1)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnackRow {
    pub t: f64,
    pub min_y: f64,
    pub argmin: (f64, f64, f64),
    pub min_diff_residual: f64,
    /// min Z with η = 0.
    pub min_z_eta0: f64,
}

pub const HARNACK_HEADER: &str = "t,min_Y,argmin_eta,argmin_xi1,argmin_xi2,min_diff_residual,min_Z_eta0";

pub fn write_harnack_csv(rows: &[HarnackRow], w: impl Write) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    writeln!(w, "{HARNACK_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            r.t, r.min_y, r.argmin.0, r.argmin.1, r.argmin.2, r.min_diff_residual, r.min_z_eta0
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TerminalEvent {
    Completed,
    WCapExceeded { t: f64, max_w: f64 },
    PredictedCollapse { t: f64, dt: f64 },
    StepFailure { t: f64 },
}

impl TerminalEvent {
    pub fn is_numerical(&self) -> bool {
        !matches!(self, TerminalEvent::Completed)
    }
}

#[derive(Debug, Clone)]
pub struct FlowRun {
    pub config: FlowConfig,
    pub params: Option<Section5Params>,
    pub trace: FlowTrace,
    pub harnack: Vec<HarnackRow>,
    /// States at t = 0, at every scheduled snapshot time, and at the end.
    pub snapshots: Vec<PseudohermitianState>,
    pub initial: DiagnosticsRecord,
    pub min_w0: f64,
    pub terminal: TerminalEvent,
    pub final_state: PseudohermitianState,
    pub steps: usize,
}

fn extrema(t: f64, w: &[f64]) -> (f64, f64, f64) {
    let (lo, hi) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    (t, lo, hi)
}

fn positivity_check(w: &ScalarField) -> Result<()> {
    let (i, v) = w.argmin();
    if !(v > 0.0) {
        let (e, a, b) = w.grid().coords(i);
        return Err(Error::Hypothesis(format!(
            "initial data must have W > 0; min W = {v:.6e} at node {i} (η = {e:.6}, ξ₁ = {a:.6}, ξ₂ = {b:.6})"
        )));
    }
    Ok(())
}

/// Runs the configured flow from its own initial data.
pub fn run(config: &FlowConfig) -> Result<FlowRun> {
    config.validate()?;
    let grid = Arc::new(HopfGrid::new(config.grid)?);
    let calc = Arc::new(FrameCalculus::with_fd_order(grid.clone(), config.fd_order)?);
    let lambda = initial_lambda(&config.initial, &grid)?;
    let params = match &config.initial {
        InitialSpec::Section5(p) => Some(*p),
        _ => None,
    };
    run_from(config, calc, lambda, params)
}

struct Recorder<'a> {
    calc: &'a Arc<FrameCalculus>,
    config: &'a FlowConfig,
    trace: FlowTrace,
    harnack: Vec<HarnackRow>,
}

impl Recorder<'_> {
    fn record(&mut self, lam: &[f64], w: &[f64], t: f64, dt: f64, forward: Option<Vec<f64>>) -> Result<()> {
        let calc = self.calc;
        let g = calc.grid().clone();
        let mk = |v: Vec<f64>, t: f64| PseudohermitianState::new(calc.clone(), ScalarField::from_raw(g.clone(), v), t);
        let forward = forward.unwrap_or_else(|| advance(calc, lam, w, dt, self.config.integrator));
        let backward = advance(calc, lam, w, -dt, self.config.integrator);
        let s0 = mk(lam.to_vec(), t)?;
        let sp = mk(forward, t + dt)?;
        let sm = mk(backward, t - dt)?;
        let diag = evolution_residuals(&[&sm, &s0, &sp])?;
        let wf = s0.w()?;
        let mut min_y = None;
        if t >= self.config.t_min && t > 0.0 {
            let y = harnack_y(&s0, t)?;
            let (i, v) = y.argmin();
            let d = differential_harnack_residual(&[&sm, &s0, &sp])?;
            let zero = LegendrianField::new(ComplexField::zeros(g.clone()));
            let z0 = harnack_z(&s0, &zero, t)?;
            min_y = Some(v);
            self.harnack.push(HarnackRow {
                t,
                min_y: v,
                argmin: g.coords(i),
                min_diff_residual: d.min(),
                min_z_eta0: z0.min(),
            });
        }
        self.trace.rows.push(TraceRow { t, dt, min_w: wf.min(), max_w: wf.max(), min_y, diagnostics: diag });
        Ok(())
    }
}

/// Runs the flow from a given λ₀.
pub fn run_from(
    config: &FlowConfig,
    calc: Arc<FrameCalculus>,
    lambda0: ScalarField,
    params: Option<Section5Params>,
) -> Result<FlowRun> {
    config.validate()?;
    let grid = calc.grid().clone();
    let h_min = grid.h_min();
    let initial_state = PseudohermitianState::new(calc.clone(), lambda0, 0.0)?;
    positivity_check(initial_state.w()?)?;
    let initial = initial_state.diagnostics()?;
    let min_w0 = initial_state.w()?.min();

    let schedule = config.snapshot_schedule();
    let mut next_snap = 0;
    let mut snapshots = vec![initial_state.clone()];
    let mut rec = Recorder { calc: &calc, config, trace: FlowTrace::default(), harnack: Vec::new() };
    rec.trace.extrema.push(extrema(0.0, initial_state.w()?.values()));

    let mut lam = initial_state.lambda().values().to_vec();
    let mut w = initial_state.w()?.values().to_vec();
    let mut t = 0.0;
    let mut steps = 0usize;
    let mut last_dt = dt_rule(h_min, 1.0, 1.0, config.sigma);
    let terminal = loop {
        if t >= config.t_end {
            break TerminalEvent::Completed;
        }
        let max_w = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max_w > config.w_cap {
            break TerminalEvent::WCapExceeded { t, max_w };
        }
        let max_e2 = lam.iter().fold(0.0f64, |m, l| m.max((-2.0 * l).exp()));
        let mut dt = dt_rule(h_min, max_e2, max_w, config.sigma);
        let target = schedule.get(next_snap).copied().unwrap_or(config.t_end).min(config.t_end);
        let landing = t + dt >= target * (1.0 - 1e-13);
        if landing {
            dt = target - t;
        }
        let min_lam = lam.iter().copied().fold(f64::INFINITY, f64::min);
        if (2.0 * min_lam).exp() - 2.0 * dt <= 0.0 {
            break TerminalEvent::PredictedCollapse { t, dt };
        }
        let next = advance(&calc, &lam, &w, dt, config.integrator);
        if next.iter().any(|v| !v.is_finite()) {
            break TerminalEvent::StepFailure { t: t + dt };
        }
        if steps % config.trace_every == 0 {
            rec.record(&lam, &w, t, dt, Some(next.clone()))?;
        }
        t = if landing { target } else { t + dt };
        lam = next;
        w = calc.webster_values(&lam);
        rec.trace.extrema.push(extrema(t, &w));
        steps += 1;
        last_dt = dt;
        if landing && next_snap < schedule.len() && target == schedule[next_snap] {
            snapshots.push(PseudohermitianState::new(calc.clone(), ScalarField::from_raw(grid.clone(), lam.clone()), t)?);
            next_snap += 1;
        }
    };

    let final_state = PseudohermitianState::new(calc.clone(), ScalarField::from_raw(grid.clone(), lam.clone()), t)?;
    if rec.trace.rows.last().map_or(true, |r| r.t < t) {
        rec.record(&lam, &w, t, last_dt, None)?;
    }
    if snapshots.last().map_or(true, |s| s.t() < t) {
        snapshots.push(final_state.clone());
    }
    let run = FlowRun {
        config: config.clone(),
        params,
        trace: rec.trace,
        harnack: rec.harnack,
        snapshots,
        initial,
        min_w0,
        terminal,
        final_state,
        steps,
    };
    if let Some(out) = &config.out {
        run.write_outputs(out)?;
    }
    Ok(run)
}

/// Entry of `snapshots/index.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub t: f64,
    pub header: String,
}

impl FlowRun {
    /// Writes trace.csv, harnack.csv, run.json and the snapshot blocks;
    /// returns the paths written.
    pub fn write_outputs(&self, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::new();
        let p = dir.join("trace.csv");
        self.trace.write_csv(std::fs::File::create(&p)?)?;
        files.push(p);
        let p = dir.join("harnack.csv");
        write_harnack_csv(&self.harnack, std::fs::File::create(&p)?)?;
        files.push(p);
        let snap_dir = dir.join("snapshots");
        let mut index = Vec::new();
        for (k, s) in self.snapshots.iter().enumerate() {
            let header = s.write_snapshot(&snap_dir, &format!("snap_{k:04}"), self.params)?;
            index.push(SnapshotEntry { t: s.t(), header: header.file_name().unwrap().to_string_lossy().into_owned() });
            files.push(header);
        }
        let p = snap_dir.join("index.json");
        std::fs::write(&p, serde_json::to_string_pretty(&index)?)?;
        files.push(p);
        let summary = RunSummary::from_run(self);
        let p = dir.join("run.json");
        std::fs::write(&p, serde_json::to_string_pretty(&summary)?)?;
        files.push(p);
        Ok(files)
    }
}

/// Machine-readable digest of a run, written next to the CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: FlowConfig,
    pub steps: usize,
    pub t_final: f64,
    pub terminal: TerminalEvent,
    pub min_w0: f64,
    pub initial: DiagnosticsRecord,
    pub checks: FlowChecks,
}

/// Monitored invariants of a finished run with their worst values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowChecks {
    /// Largest relative decrease of min W between consecutive rows.
    pub worst_min_w_drop: f64,
    pub min_w_nondecreasing: bool,
    /// Largest violation of min W(t) ≥ c/(1 − 2ct) (positive means violated).
    pub worst_comparison_gap: f64,
    pub min_y: Option<f64>,
    pub min_diff_residual: Option<f64>,
    pub theorem_a_tol: f64,
    pub theorem_a: Option<bool>,
    pub structural: bool,
    pub worst_structural_ratio: f64,
}

impl FlowChecks {
    pub fn evaluate(run: &FlowRun) -> Self {
        let tol = &run.config.tolerances;
        let rows = &run.trace.rows;
        let mut worst_drop = 0.0f64;
        for pair in run.trace.extrema.windows(2) {
            let drop = (pair[0].1 - pair[1].1) / pair[0].1.abs();
            worst_drop = worst_drop.max(drop);
        }
        let c = run.min_w0;
        let worst_gap = run
            .trace
            .extrema
            .iter()
            .filter(|e| 1.0 - 2.0 * c * e.0 > 0.0)
            .map(|e| c / (1.0 - 2.0 * c * e.0) - e.1)
            .fold(f64::NEG_INFINITY, f64::max);
        let min_y = run.harnack.iter().map(|h| h.min_y).reduce(f64::min);
        let min_diff = run.harnack.iter().map(|h| h.min_diff_residual).reduce(f64::min);
        let theorem_a_tol = tol.theorem_a.unwrap_or_else(|| default_theorem_a_tol(run));
        let theorem_a = match (min_y, min_diff) {
            (Some(y), Some(d)) => Some(y >= -theorem_a_tol && d >= -theorem_a_tol),
            _ => None,
        };
        let i = &run.initial;
        let levels = [i.max_abs_a11, i.max_abs_w0, i.max_abs_w11, i.max_abs_q11];
        let mut worst_ratio = 0.0f64;
        for r in rows {
            let d = &r.diagnostics;
            for (v, l) in [d.max_abs_a11, d.max_abs_w0, d.max_abs_w11, d.max_abs_q11].iter().zip(levels) {
                worst_ratio = worst_ratio.max(v / l.max(f64::MIN_POSITIVE));
            }
        }
        Self {
            worst_min_w_drop: worst_drop,
            min_w_nondecreasing: worst_drop <= tol.monotone_rel,
            worst_comparison_gap: worst_gap,
            min_y,
            min_diff_residual: min_diff,
            theorem_a_tol,
            theorem_a,
            structural: worst_ratio <= tol.structural_factor,
            worst_structural_ratio: worst_ratio,
        }
    }
}

/// Default tolerance for the Harnack lower bound Y ≥ −tol: ten times the t = 0 size of Δ_bW minus its
/// grid mean, a proxy for the discretization error of Δ_bW when W is close
/// to constant; never below 1e−10.
pub fn default_theorem_a_tol(run: &FlowRun) -> f64 {
    let s = &run.snapshots[0];
    match s.lap_w() {
        Ok(l) => {
            let g = l.grid();
            let mean = g.integrate(l.values()) / crate::sphere::SPHERE_VOLUME;
            (10.0 * l.map(|v| v - mean).max_abs()).max(1e-10)
        }
        Err(_) => 1e-10,
    }
}

impl RunSummary {
    pub fn from_run(run: &FlowRun) -> Self {
        Self {
            config: run.config.clone(),
            steps: run.steps,
            t_final: run.final_state.t(),
            terminal: run.terminal.clone(),
            min_w0: run.min_w0,
            initial: run.initial.clone(),
            checks: FlowChecks::evaluate(run),
        }
    }
}

/// Reads the λ snapshots of a run directory as (t, λ) pairs.
pub fn load_snapshots(run_dir: impl AsRef<Path>) -> Result<(Arc<HopfGrid>, Vec<(f64, ScalarField)>)> {
    let snap_dir = run_dir.as_ref().join("snapshots");
    let index_path = snap_dir.join("index.json");
    let text = std::fs::read_to_string(&index_path)
        .map_err(|e| Error::Usage(format!("cannot read {}: {e}", index_path.display())))?;
    let index: Vec<SnapshotEntry> = serde_json::from_str(&text)?;
    let first = index.first().ok_or_else(|| Error::Data("run has no snapshots".into()))?;
    let header = crate::transform::read_snapshot_header(snap_dir.join(&first.header))?;
    let grid = Arc::new(HopfGrid::new(header.grid)?);
    let mut out = Vec::with_capacity(index.len());
    for e in &index {
        let (h, l) = crate::transform::read_snapshot_lambda(snap_dir.join(&e.header), grid.clone())?;
        out.push((h.t, l));
    }
    Ok((grid, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::build_grid;

    fn constant_state(lambda: f64) -> PseudohermitianState {
        let c = Arc::new(FrameCalculus::new(Arc::new(build_grid(8, 8, 8).unwrap())));
        let l = ScalarField::constant(c.grid().clone(), lambda);
        PseudohermitianState::new(c, l, 0.0).unwrap()
    }

    #[test]
    fn euler_step_on_constant() {
        let s = constant_state(0.0);
        let n = step(&s, 1e-3, Integrator::Euler).unwrap();
        assert!(n.lambda().values().iter().all(|v| (v + 1e-3).abs() < 1e-15));
        assert!((n.t() - 1e-3).abs() < 1e-18);
        assert!(matches!(step(&s, 0.0, Integrator::Rk4), Err(Error::Usage(_))));
        assert!(matches!(step(&s, -1.0, Integrator::Rk4), Err(Error::Usage(_))));
    }

    #[test]
    fn dt_formula() {
        assert!((dt_rule(0.1, 1.0, 1.0, 0.25) - 6.25e-4).abs() < 1e-18);
        assert!((dt_rule(0.1, 4.0, 1.0, 0.25) - 0.25 * 0.01 / 16.0).abs() < 1e-18);
        // σh²/4 = 1e−3 but the W rule wins
        assert!((dt_rule(0.2, 1.0, 1e3, 0.1) - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn config_json() {
        let c = FlowConfig::from_json(
            r#"{"grid":{"n_eta":8,"n_xi1":8,"n_xi2":8},
                "initial":{"a":[0.1,0],"b":[0.05,0],"c":[1,0]},
                "t_end":0.1,"integrator":"euler","snapshots_every":0.02}"#,
        )
        .unwrap();
        assert_eq!(c.integrator, Integrator::Euler);
        assert_eq!(c.sigma, 0.25);
        assert!(matches!(c.initial, InitialSpec::Section5(_)));
        assert_eq!(c.snapshot_schedule().len(), 4);
        let bad = r#"{"grid":{"n_eta":8,"n_xi1":8,"n_xi2":8},"initial":{"file":"x"},"t_end":-1}"#;
        assert!(matches!(FlowConfig::from_json(bad), Err(Error::Config(_))));
        let bad = r#"{"grid":{"n_eta":8,"n_xi1":8,"n_xi2":8},"initial":{"file":"x"},"t_end":1,"sigma":2}"#;
        assert!(matches!(FlowConfig::from_json(bad), Err(Error::Config(_))));
        let bad = r#"{"grid":{"n_eta":8,"n_xi1":8,"n_xi2":8},"initial":{"file":"x"},"t_end":1,"bogus":2}"#;
        assert!(matches!(FlowConfig::from_json(bad), Err(Error::Config(_))));
    }

    #[test]
    fn nonpositive_initial_curvature_is_rejected() {
        let grid = Arc::new(build_grid(8, 8, 8).unwrap());
        let calc = Arc::new(FrameCalculus::new(grid.clone()));
        // λ = 0.4·Re(z₁²) has W < 0 somewhere? use a large bump instead
        let lam = ScalarField::from_fn(grid, |p| 1.5 * (p.z1() * p.z1()).re);
        let w = calc.webster_curvature(&lam).unwrap();
        assert!(w.min() <= 0.0);
        let cfg = FlowConfig::new(GridDims::new(8, 8, 8), InitialSpec::File { file: "unused".into() }, 0.1);
        let err = run_from(&cfg, calc, lam, None).unwrap_err();
        assert!(matches!(err, Error::Hypothesis(ref m) if m.contains("node")), "{err}");
    }

    #[test]
    fn constant_run_lands_on_end_time() {
        let mut cfg = FlowConfig::new(
            GridDims::new(8, 8, 8),
            InitialSpec::Section5(Section5Params::real(0.0, 0.0, 1.0).unwrap()),
            0.1,
        );
        cfg.snapshot_times = vec![0.05];
        cfg.trace_every = 10;
        let run = run(&cfg).unwrap();
        assert_eq!(run.terminal, TerminalEvent::Completed);
        assert_eq!(run.final_state.t(), 0.1);
        assert!(run.snapshots.iter().any(|s| s.t() == 0.05));
        let w = run.final_state.w().unwrap();
        let exact = 1.0 / (1.0 - 0.2);
        assert!(w.values().iter().all(|v| ((v - exact) / exact).abs() < 1e-9));
        let ts: Vec<f64> = run.trace.rows.iter().map(|r| r.t).collect();
        assert!(ts.windows(2).all(|p| p[1] > p[0]));
    }

    #[test]
    fn w_cap_stops_the_run() {
        let mut cfg = FlowConfig::new(
            GridDims::new(8, 8, 8),
            InitialSpec::Section5(Section5Params::real(0.0, 0.0, 1.0).unwrap()),
            0.6,
        );
        cfg.w_cap = 5.0;
        cfg.trace_every = 50;
        let run = run(&cfg).unwrap();
        assert!(matches!(run.terminal, TerminalEvent::WCapExceeded { .. }), "{:?}", run.terminal);
        assert!(run.final_state.w().unwrap().values().iter().all(|v| v.is_finite()));
    }
}
