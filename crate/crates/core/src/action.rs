//! Legendrian paths, their action ∫ e^{2λ}|γ̇|²_{θ̂} dt, and the integrated
//! Harnack check W(x₂,t₂)/W(x₁,t₁) ≥ (t₂/t₁)⁻² exp(−L/16).
//!
//! Paths are driven by piecewise-constant controls (u₁, u₂) on the hatted
//! orthonormal frame e₁ = (Ẑ₁ + Ẑ₁̄)/√2, e₂ = i(Ẑ₁ − Ẑ₁̄)/√2, so horizontality
//! holds by construction. In C² this is ż = ½(u₁ + iu₂)(−z̄₂, z̄₁).

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::FieldHistory;
use crate::optim::{self, BfgsOptions};
use crate::sphere::{frame_at, ComplexVector, SpherePoint};

/// Largest norm drift tolerated in one substep before renormalizing.
pub const RENORM_TOL: f64 = 1e-8;
/// Smallest W(x₁, t₁) accepted by [`theorem_b_check`].
pub const POSITIVITY_FLOOR: f64 = 1e-12;

/// e₁ and e₂ at `p` as real vectors of C².
pub fn horizontal_frame(p: &SpherePoint) -> [ComplexVector; 2] {
    let f = frame_at(p);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let comb = |a: Complex64, b: Complex64| ComplexVector {
        holo: [a * f.z1.holo[0] + b * f.z1bar.holo[0], a * f.z1.holo[1] + b * f.z1bar.holo[1]],
        anti: [a * f.z1.anti[0] + b * f.z1bar.anti[0], a * f.z1.anti[1] + b * f.z1bar.anti[1]],
    };
    let i = Complex64::i();
    [comb(s.into(), s.into()), comb(i * s, -i * s)]
}

/// Velocity ż for controls `u` at `z`.
fn velocity(z: [Complex64; 2], u: [f64; 2]) -> [Complex64; 2] {
    let c = 0.5 * Complex64::new(u[0], u[1]);
    [-c * z[1].conj(), c * z[0].conj()]
}

fn to_point(z: [Complex64; 2]) -> SpherePoint {
    SpherePoint::project(z[0], z[1]).expect("path stays near the sphere")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegendrianPath {
    pub t1: f64,
    pub t2: f64,
    /// Piecewise-constant controls, one pair per uniform segment.
    pub controls: Vec<[f64; 2]>,
    /// Minimum RK4 substeps per segment (fast segments use more).
    pub substeps: usize,
    /// γ at the N + 1 knots.
    pub points: Vec<[Complex64; 2]>,
    /// Weighted action once evaluated against a history; the hatted action
    /// Σ|uₖ|²Δt straight after integration.
    pub action: f64,
    /// Chordal distance from γ(t₂) to the requested endpoint (0 if none).
    pub defect: f64,
}

impl LegendrianPath {
    pub fn segments(&self) -> usize {
        self.controls.len()
    }

    pub fn start(&self) -> SpherePoint {
        to_point(self.points[0])
    }

    pub fn end(&self) -> SpherePoint {
        to_point(*self.points.last().unwrap())
    }

    pub fn dt(&self) -> f64 {
        (self.t2 - self.t1) / self.segments() as f64
    }

    /// Hatted action Σ|uₖ|²Δt.
    pub fn hatted_action(&self) -> f64 {
        self.controls.iter().map(|u| u[0] * u[0] + u[1] * u[1]).sum::<f64>() * self.dt()
    }

    /// max |θ̂(γ̇)| / |γ̇| over knots and the controls used after them.
    pub fn horizontality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (k, u) in self.controls.iter().enumerate() {
            let z = self.points[k];
            let v = ComplexVector::real(velocity(z, *u));
            let speed = (v.holo[0].norm_sqr() + v.holo[1].norm_sqr()).sqrt();
            if speed > 0.0 {
                worst = worst.max(frame_at(&to_point(z)).theta(&v).norm() / speed);
            }
        }
        worst
    }

    pub fn norm_defect(&self) -> f64 {
        self.points.iter().map(|z| ((z[0].norm_sqr() + z[1].norm_sqr()).sqrt() - 1.0).abs()).fold(0.0, f64::max)
    }
}

fn rk4(z: [Complex64; 2], u: [f64; 2], h: f64) -> [Complex64; 2] {
    let add = |a: [Complex64; 2], k: [Complex64; 2], s: f64| [a[0] + k[0] * s, a[1] + k[1] * s];
    let k1 = velocity(z, u);
    let k2 = velocity(add(z, k1, 0.5 * h), u);
    let k3 = velocity(add(z, k2, 0.5 * h), u);
    let k4 = velocity(add(z, k3, h), u);
    [
        z[0] + (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) * (h / 6.0),
        z[1] + (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) * (h / 6.0),
    ]
}

/// Largest rotation angle |c|·h allowed in one RK4 substep.
const MAX_SUBSTEP_ANGLE: f64 = 0.05;

/// Controls fast enough to need more substeps than this are rejected.
const MAX_SEGMENT_SUBSTEPS: usize = 64;

/// Substeps used on a segment: at least `m`, even, and fine enough that one
/// substep turns by at most [`MAX_SUBSTEP_ANGLE`].
fn segment_substeps(u: [f64; 2], seg_dt: f64, m: usize) -> usize {
    let angle = 0.5 * (u[0] * u[0] + u[1] * u[1]).sqrt() * seg_dt;
    let need = (angle / MAX_SUBSTEP_ANGLE).ceil() as usize;
    let k = m.max(need);
    k + k % 2
}

/// All substep nodes; segment k contributes `segment_substeps` of them after
/// the start point.
fn trajectory(x1: &SpherePoint, controls: &[[f64; 2]], t1: f64, t2: f64, m: usize) -> Result<Vec<[Complex64; 2]>> {
    let seg_dt = (t2 - t1) / controls.len() as f64;
    let mut z = x1.coords();
    let mut out = vec![z];
    let mut step = 0;
    for u in controls {
        let mk = segment_substeps(*u, seg_dt, m);
        if mk > MAX_SEGMENT_SUBSTEPS {
            return Err(Error::PathStep { step, drift: f64::INFINITY });
        }
        let h = seg_dt / mk as f64;
        for _ in 0..mk {
            let next = rk4(z, *u, h);
            let r = (next[0].norm_sqr() + next[1].norm_sqr()).sqrt();
            let drift = (r - 1.0).abs();
            if !(drift <= RENORM_TOL) {
                return Err(Error::PathStep { step, drift });
            }
            z = [next[0] / r, next[1] / r];
            out.push(z);
            step += 1;
        }
    }
    Ok(out)
}

/// Indices of the knots within a trajectory.
fn knot_indices(controls: &[[f64; 2]], seg_dt: f64, m: usize) -> Vec<usize> {
    let mut idx = vec![0];
    for u in controls {
        idx.push(idx.last().unwrap() + segment_substeps(*u, seg_dt, m));
    }
    idx
}

fn check_path_args(controls: &[[f64; 2]], t1: f64, t2: f64, m: usize) -> Result<()> {
    if controls.len() < 2 {
        return Err(Error::Usage(format!("need at least 2 segments (got {})", controls.len())));
    }
    if !(t1 > 0.0) || !(t2 > t1) {
        return Err(Error::Usage(format!("need 0 < t1 < t2 (got t1 = {t1}, t2 = {t2})")));
    }
    if m == 0 || m % 2 != 0 {
        return Err(Error::Usage(format!("substeps must be even and positive (got {m})")));
    }
    if controls.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Data("controls must be finite".into()));
    }
    Ok(())
}

pub const DEFAULT_SUBSTEPS: usize = 4;

/// Integrates γ̇ = u₁e₁(γ) + u₂e₂(γ) from x₁ over [t₁, t₂].
pub fn integrate_path(x1: &SpherePoint, controls: &[[f64; 2]], t1: f64, t2: f64) -> Result<LegendrianPath> {
    integrate_path_with(x1, controls, t1, t2, DEFAULT_SUBSTEPS)
}

pub fn integrate_path_with(
    x1: &SpherePoint,
    controls: &[[f64; 2]],
    t1: f64,
    t2: f64,
    substeps: usize,
) -> Result<LegendrianPath> {
    check_path_args(controls, t1, t2, substeps)?;
    let traj = trajectory(x1, controls, t1, t2, substeps)?;
    let mut p = LegendrianPath {
        t1,
        t2,
        controls: controls.to_vec(),
        substeps,
        points: knot_indices(controls, (t2 - t1) / controls.len() as f64, substeps).into_iter().map(|i| traj[i]).collect(),
        action: 0.0,
        defect: 0.0,
    };
    p.action = p.hatted_action();
    Ok(p)
}

/// ∫ e^{2λ(γ,t)}(u₁² + u₂²) dt by composite Simpson on the substep nodes.
fn weighted_action(traj: &[[Complex64; 2]], controls: &[[f64; 2]], t1: f64, t2: f64, m: usize, hist: &FieldHistory) -> Result<f64> {
    let seg_dt = (t2 - t1) / controls.len() as f64;
    let knots = knot_indices(controls, seg_dt, m);
    let mut total = 0.0;
    for (k, u) in controls.iter().enumerate() {
        let speed2 = u[0] * u[0] + u[1] * u[1];
        if speed2 == 0.0 {
            continue;
        }
        let mk = knots[k + 1] - knots[k];
        let h = seg_dt / mk as f64;
        let ts = t1 + k as f64 * seg_dt;
        let mut seg = 0.0;
        for s in 0..=mk {
            let t = (ts + s as f64 * h).min(t2);
            let e = (2.0 * hist.lambda_at(&to_point(traj[knots[k] + s]), t)?).exp();
            let c = if s == 0 || s == mk { 1.0 } else if s % 2 == 1 { 4.0 } else { 2.0 };
            seg += c * e;
        }
        total += speed2 * seg * h / 3.0;
    }
    Ok(total)
}

/// Action of a path against the time-dependent conformal factor.
pub fn action(path: &LegendrianPath, hist: &FieldHistory) -> Result<f64> {
    if !hist.covers(path.t1, path.t2) {
        return Err(Error::Usage(format!(
            "snapshots {:?} do not cover [{}, {}]",
            (hist.times().first(), hist.times().last()),
            path.t1,
            path.t2
        )));
    }
    let traj = trajectory(&path.start(), &path.controls, path.t1, path.t2, path.substeps)?;
    weighted_action(&traj, &path.controls, path.t1, path.t2, path.substeps, hist)
}

#[derive(Debug, Clone, Copy)]
pub struct ActionOptions {
    pub segments: usize,
    pub substeps: usize,
    pub mu0: f64,
    pub mu_factor: f64,
    pub max_rounds: usize,
    pub defect_tol: f64,
    pub random_starts: usize,
    pub seed: u64,
    pub bfgs: BfgsOptions,
}

impl Default for ActionOptions {
    fn default() -> Self {
        Self {
            segments: 8,
            substeps: DEFAULT_SUBSTEPS,
            mu0: 10.0,
            mu_factor: 10.0,
            max_rounds: 6,
            defect_tol: 1e-6,
            random_starts: 6,
            seed: 0,
            bfgs: BfgsOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ActionResult {
    pub l_hat: f64,
    pub path: LegendrianPath,
    /// Action of every feasible start, in seed order.
    pub candidates: Vec<f64>,
}

fn chordal(a: [Complex64; 2], b: [Complex64; 2]) -> f64 {
    ((a[0] - b[0]).norm_sqr() + (a[1] - b[1]).norm_sqr()).sqrt()
}

fn flatten(c: &[[f64; 2]]) -> Vec<f64> {
    c.iter().flatten().copied().collect()
}

fn unflatten(x: &[f64]) -> Vec<[f64; 2]> {
    x.chunks(2).map(|p| [p[0], p[1]]).collect()
}

struct Endpoints<'a> {
    x1: SpherePoint,
    x2: [Complex64; 2],
    t1: f64,
    t2: f64,
    hist: &'a FieldHistory,
    opts: ActionOptions,
    scale: f64,
}

impl Endpoints<'_> {
    fn end(&self, x: &[f64]) -> Option<[Complex64; 2]> {
        trajectory(&self.x1, &unflatten(x), self.t1, self.t2, self.opts.substeps).ok().map(|t| *t.last().unwrap())
    }

    fn penalized(&self, x: &[f64], mu: f64) -> f64 {
        let c = unflatten(x);
        let Ok(traj) = trajectory(&self.x1, &c, self.t1, self.t2, self.opts.substeps) else {
            return f64::INFINITY;
        };
        let a = weighted_action(&traj, &c, self.t1, self.t2, self.opts.substeps, self.hist).unwrap_or(f64::INFINITY);
        let d = chordal(*traj.last().unwrap(), self.x2);
        a + mu * d * d
    }

    /// Damped Gauss–Newton on the endpoint residual with minimal-norm steps.
    fn polish(&self, mut x: Vec<f64>) -> Vec<f64> {
        let resid = |x: &[f64]| -> Option<DVector<f64>> {
            let e = self.end(x)?;
            Some(DVector::from_vec(vec![
                e[0].re - self.x2[0].re,
                e[0].im - self.x2[0].im,
                e[1].re - self.x2[1].re,
                e[1].im - self.x2[1].im,
            ]))
        };
        for _ in 0..60 {
            let Some(r) = resid(&x) else { break };
            if r.norm() <= 1e-13 {
                break;
            }
            let n = x.len();
            let mut jac = DMatrix::zeros(4, n);
            let mut y = x.clone();
            for i in 0..n {
                let h = 1e-7 * x[i].abs().max(1.0);
                y[i] = x[i] + h;
                let Some(rp) = resid(&y) else { return x };
                y[i] = x[i] - h;
                let Some(rm) = resid(&y) else { return x };
                y[i] = x[i];
                jac.set_column(i, &((rp - rm) / (2.0 * h)));
            }
            let Ok(pinv) = jac.pseudo_inverse(1e-10) else { break };
            let mut step = pinv * &r;
            // trust region: no control moves by more than the seed scale
            let big = step.amax();
            if big > self.scale {
                step *= self.scale / big;
            }
            let mut scale = 1.0;
            let mut improved = false;
            for _ in 0..12 {
                let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, s)| a - scale * s).collect();
                if resid(&cand).is_some_and(|rc| rc.norm() < r.norm()) {
                    x = cand;
                    improved = true;
                    break;
                }
                scale *= 0.5;
            }
            if !improved {
                break;
            }
        }
        x
    }

    fn solve_from(&self, seed: Vec<f64>) -> (Vec<f64>, f64) {
        // shoot to a feasible path first, then trade action against defect
        let mut x = self.polish(seed);
        let mut mu = self.opts.mu0;
        for _ in 0..self.opts.max_rounds {
            if let Ok((y, _)) = optim::minimize(|v| self.penalized(v, mu), x.clone(), self.opts.bfgs) {
                x = y;
            }
            let d = self.end(&x).map_or(f64::INFINITY, |e| chordal(e, self.x2));
            if d <= self.opts.defect_tol {
                break;
            }
            mu *= self.opts.mu_factor;
        }
        let x = self.polish(x);
        let d = self.end(&x).map_or(f64::INFINITY, |e| chordal(e, self.x2));
        (x, d)
    }
}

/// Seeds: rest, two-arc concatenations along ±e₁ then ±e₂ (and the
/// reverse), and random controls.
fn seeds(n: usize, scale: f64, random: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; 2 * n]];
    let half = n / 2;
    for (s1, s2) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        for first_axis in 0..2 {
            let mut c = vec![[0.0; 2]; n];
            for (k, ck) in c.iter_mut().enumerate() {
                if k < half {
                    ck[first_axis] = s1 * scale;
                } else {
                    ck[1 - first_axis] = s2 * scale;
                }
            }
            out.push(flatten(&c));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..random {
        out.push((0..2 * n).map(|_| rng.gen_range(-1.5..1.5) * scale).collect());
    }
    out
}

/// Upper bound L_hat on the path infimum between (x₁, t₁) and (x₂, t₂).
pub fn minimize_action(
    x1: &SpherePoint,
    t1: f64,
    x2: &SpherePoint,
    t2: f64,
    hist: &FieldHistory,
    opts: &ActionOptions,
) -> Result<ActionResult> {
    check_path_args(&vec![[0.0; 2]; opts.segments.max(2)], t1, t2, opts.substeps)?;
    if opts.segments < 2 {
        return Err(Error::Usage("need at least 2 segments".into()));
    }
    if !hist.covers(t1, t2) {
        return Err(Error::Usage(format!("snapshots do not cover [{t1}, {t2}]")));
    }
    // Levi speed that covers the great-circle angle in the available time.
    let angle = 2.0 * (0.5 * x1.chordal_distance(x2)).min(1.0).asin();
    let scale = (2.0 * angle / (t2 - t1)).max(1.0);
    let ep = Endpoints { x1: *x1, x2: x2.coords(), t1, t2, hist, opts: *opts, scale };
    let starts = seeds(opts.segments, scale, opts.random_starts, opts.seed);
    let results: Vec<(Vec<f64>, f64)> = starts.into_par_iter().map(|s| ep.solve_from(s)).collect();

    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut candidates = Vec::new();
    let mut best_defect = f64::INFINITY;
    for (x, d) in results {
        best_defect = best_defect.min(d);
        if d > opts.defect_tol {
            continue;
        }
        let c = unflatten(&x);
        let traj = trajectory(x1, &c, t1, t2, opts.substeps)?;
        let a = weighted_action(&traj, &c, t1, t2, opts.substeps, hist)?;
        candidates.push(a);
        if best.as_ref().map_or(true, |b| a < b.0) {
            best = Some((a, x, d));
        }
    }
    let Some((l_hat, x, defect)) = best else {
        return Err(Error::Reachability { best_defect });
    };
    let mut path = integrate_path_with(x1, &unflatten(&x), t1, t2, opts.substeps)?;
    path.action = l_hat;
    path.defect = defect;
    Ok(ActionResult { l_hat, path, candidates })
}

/// Smallest action among piecewise-constant controls with values in
/// `levels`² on `n` segments whose endpoint lands within `tol` of x₂.
pub fn brute_force_action(
    x1: &SpherePoint,
    t1: f64,
    x2: &SpherePoint,
    t2: f64,
    hist: &FieldHistory,
    levels: &[f64],
    n: usize,
    tol: f64,
) -> Result<Option<f64>> {
    let choices: Vec<[f64; 2]> = levels.iter().flat_map(|a| levels.iter().map(move |b| [*a, *b])).collect();
    let total = choices.len().pow(n as u32);
    let target = x2.coords();
    let found: Vec<f64> = (0..total)
        .into_par_iter()
        .filter_map(|mut code| {
            let c: Vec<[f64; 2]> = (0..n)
                .map(|_| {
                    let v = choices[code % choices.len()];
                    code /= choices.len();
                    v
                })
                .collect();
            let traj = trajectory(x1, &c, t1, t2, DEFAULT_SUBSTEPS).ok()?;
            if chordal(*traj.last().unwrap(), target) > tol {
                return None;
            }
            weighted_action(&traj, &c, t1, t2, DEFAULT_SUBSTEPS, hist).ok()
        })
        .collect();
    Ok(found.into_iter().reduce(f64::min))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnackCheck {
    pub x1: [Complex64; 2],
    pub t1: f64,
    pub x2: [Complex64; 2],
    pub t2: f64,
    pub w1: f64,
    pub w2: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub l_hat: f64,
    pub defect: f64,
    pub pass: bool,
}

/// Evaluates both sides of the integrated Harnack inequality with L
/// replaced by the optimizer's L_hat ≥ L.
pub fn theorem_b_check(
    x1: &SpherePoint,
    t1: f64,
    x2: &SpherePoint,
    t2: f64,
    hist: &FieldHistory,
    opts: &ActionOptions,
) -> Result<HarnackCheck> {
    if !(t1 > 0.0) || t2 < t1 {
        return Err(Error::Usage(format!("need 0 < t1 <= t2 (got {t1}, {t2})")));
    }
    let w1 = hist.w_at(x1, t1)?;
    if !(w1 > POSITIVITY_FLOOR) {
        return Err(Error::Hypothesis(format!("W(x1, t1) = {w1:.3e} is not positive")));
    }
    let w2 = hist.w_at(x2, t2)?;
    let (l_hat, defect) = if t1 == t2 {
        let d = x1.chordal_distance(x2);
        if d > opts.defect_tol {
            return Err(Error::Usage("t1 = t2 admits only x1 = x2".into()));
        }
        (0.0, d)
    } else {
        let r = minimize_action(x1, t1, x2, t2, hist, opts)?;
        (r.l_hat, r.path.defect)
    };
    let lhs = w2 / w1;
    let rhs = (t2 / t1).powi(-2) * (-l_hat / 16.0).exp();
    Ok(HarnackCheck { x1: x1.coords(), t1, x2: x2.coords(), t2, w1, w2, lhs, rhs, l_hat, defect, pass: lhs >= rhs })
}

/// Endpoint pair for path-action requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathPair {
    pub x1: [Complex64; 2],
    pub t1: f64,
    pub x2: [Complex64; 2],
    pub t2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPairs {
    pub count: usize,
    pub seed: u64,
    pub t1: f64,
    pub t2: f64,
}

/// JSON: a list of pairs, or `{"random": {"count", "seed", "t1", "t2"}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairsSpec {
    List(Vec<PathPair>),
    Random { random: RandomPairs },
}

impl PairsSpec {
    pub fn pairs(&self) -> Result<Vec<PathPair>> {
        match self {
            PairsSpec::List(v) => {
                for p in v {
                    for z in [p.x1, p.x2] {
                        let r = (z[0].norm_sqr() + z[1].norm_sqr()).sqrt();
                        if (r - 1.0).abs() > 1e-10 {
                            return Err(Error::Config(format!("point ({}, {}) is not on the sphere", z[0], z[1])));
                        }
                    }
                }
                Ok(v.clone())
            }
            PairsSpec::Random { random } => Ok(random_pairs(random.seed, random.count, random.t1, random.t2)),
        }
    }
}

pub fn random_point(rng: &mut impl Rng) -> SpherePoint {
    loop {
        let mut g = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (a, b) = (g(), g());
        let r2 = a.norm_sqr() + b.norm_sqr();
        if r2 > 1e-4 && r2 <= 1.0 {
            return SpherePoint::project(a, b).unwrap();
        }
    }
}

pub fn random_pairs(seed: u64, count: usize, t1: f64, t2: f64) -> Vec<PathPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| PathPair { x1: random_point(&mut rng).coords(), t1, x2: random_point(&mut rng).coords(), t2 })
        .collect()
}

pub const PATHS_HEADER: &str =
    "x1_re1,x1_im1,x1_re2,x1_im2,x2_re1,x2_im1,x2_re2,x2_im2,t1,t2,W1,W2,lhs,rhs,L_hat,defect,pass";

pub fn write_paths_csv(checks: &[HarnackCheck], w: impl Write) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    writeln!(w, "{PATHS_HEADER}")?;
    for c in checks {
        let z: Vec<String> = c.x1.iter().chain(&c.x2).flat_map(|z| [z.re, z.im]).map(|v| format!("{v:.17e}")).collect();
        writeln!(
            w,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
            z.join(","),
            c.t1,
            c.t2,
            c.w1,
            c.w2,
            c.lhs,
            c.rhs,
            c.l_hat,
            c.defect,
            c.pass
        )?;
    }
    Ok(())
}
