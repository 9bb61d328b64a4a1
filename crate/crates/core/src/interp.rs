//! Off-grid evaluation of node fields and of time-indexed snapshot histories.
//!
//! Space: 6-point Lagrange in each Hopf coordinate, periodic in ξ₁, ξ₂; rows
//! beyond the ends of the η range are read through the reflections
//! η ↦ −η (ξ₂ + π) and η ↦ π − η (ξ₁ + π). Time: linear between snapshots.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{self, same_grid, ScalarField};
use crate::sphere::{HopfGrid, SpherePoint};
use crate::transform::{read_snapshot_header, PseudohermitianState};

const WIDTH: usize = 6;

fn lagrange_weights(x: f64) -> [f64; WIDTH] {
    // nodes at 0, 1, …, 5; x ∈ [2, 3)
    let mut w = [1.0; WIDTH];
    for (i, wi) in w.iter_mut().enumerate() {
        for j in 0..WIDTH {
            if j != i {
                *wi *= (x - j as f64) / (i as f64 - j as f64);
            }
        }
    }
    w
}

/// Base index and weights of the stencil around fractional position `s`.
fn stencil(s: f64) -> (isize, [f64; WIDTH]) {
    let f = s.floor();
    (f as isize - 2, lagrange_weights(s - f + 2.0))
}

/// Value of a node field at an arbitrary point.
pub fn interpolate(f: &ScalarField, p: &SpherePoint) -> f64 {
    let g = f.grid();
    let (n, n1, n2) = (g.n_eta() as isize, g.n_xi1() as isize, g.n_xi2() as isize);
    let (eta, xi1, xi2) = p.hopf();
    let (k0, we) = stencil(eta / g.h_eta() - 0.5);
    let (a0, w1) = stencil(xi1 / g.h_xi1());
    let (b0, w2) = stencil(xi2 / g.h_xi2());
    let v = f.values();
    let mut acc = 0.0;
    for (dk, we) in we.iter().enumerate() {
        let k = k0 + dk as isize;
        let (row, s1, s2) = if k < 0 {
            (-1 - k, 0, n2 / 2)
        } else if k >= n {
            (2 * n - 1 - k, n1 / 2, 0)
        } else {
            (k, 0, 0)
        };
        let mut row_acc = 0.0;
        for (da, wa) in w1.iter().enumerate() {
            let j1 = (a0 + da as isize + s1).rem_euclid(n1);
            let base = ((row * n1 + j1) * n2) as usize;
            let mut inner = 0.0;
            for (db, wb) in w2.iter().enumerate() {
                let j2 = (b0 + db as isize + s2).rem_euclid(n2) as usize;
                inner += wb * v[base + j2];
            }
            row_acc += wa * inner;
        }
        acc += we * row_acc;
    }
    acc
}

/// λ and W on a common grid at increasing times.
#[derive(Debug, Clone)]
pub struct FieldHistory {
    grid: Arc<HopfGrid>,
    times: Vec<f64>,
    lambda: Vec<ScalarField>,
    w: Vec<ScalarField>,
}

impl FieldHistory {
    pub fn new(times: Vec<f64>, lambda: Vec<ScalarField>, w: Vec<ScalarField>) -> Result<Self> {
        if times.is_empty() || times.len() != lambda.len() || times.len() != w.len() {
            return Err(Error::Usage("history needs matching nonempty time, λ and W lists".into()));
        }
        if times.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::Usage("history times must be strictly increasing".into()));
        }
        let grid = lambda[0].grid().clone();
        for f in lambda.iter().chain(&w) {
            same_grid(&grid, f.grid())?;
        }
        Ok(Self { grid, times, lambda, w })
    }

    pub fn from_states(states: &[PseudohermitianState]) -> Result<Self> {
        let mut times = Vec::new();
        let mut lambda = Vec::new();
        let mut w = Vec::new();
        for s in states {
            if times.last().is_some_and(|t| *t >= s.t()) {
                continue;
            }
            times.push(s.t());
            lambda.push(s.lambda().clone());
            w.push(s.w()?.clone());
        }
        Self::new(times, lambda, w)
    }

    /// Spatially constant λ ≡ c on [t0, t1] with W = e^{−2c}.
    pub fn constant(grid: Arc<HopfGrid>, c: f64, t0: f64, t1: f64) -> Result<Self> {
        let l = ScalarField::constant(grid.clone(), c);
        let w = ScalarField::constant(grid, (-2.0 * c).exp());
        Self::new(vec![t0, t1], vec![l.clone(), l], vec![w.clone(), w])
    }

    /// The history of λ + c (W scales by e^{−2c}).
    pub fn shifted(&self, c: f64) -> Self {
        let s = (-2.0 * c).exp();
        Self {
            grid: self.grid.clone(),
            times: self.times.clone(),
            lambda: self.lambda.iter().map(|f| f.map(|v| v + c)).collect(),
            w: self.w.iter().map(|f| f.map(|v| v * s)).collect(),
        }
    }

    /// Reads the snapshot index of a run directory.
    pub fn load(run_dir: impl AsRef<Path>) -> Result<Self> {
        let snap_dir = run_dir.as_ref().join("snapshots");
        let index_path = snap_dir.join("index.json");
        let text = std::fs::read_to_string(&index_path)
            .map_err(|e| Error::Usage(format!("cannot read {}: {e}", index_path.display())))?;
        let index: Vec<crate::flow::SnapshotEntry> = serde_json::from_str(&text)?;
        let mut grid: Option<Arc<HopfGrid>> = None;
        let (mut times, mut lambda, mut w) = (Vec::new(), Vec::new(), Vec::new());
        for e in &index {
            let h = read_snapshot_header(snap_dir.join(&e.header))?;
            let g = match &grid {
                Some(g) => g.clone(),
                None => {
                    let g = Arc::new(HopfGrid::new(h.grid)?);
                    grid = Some(g.clone());
                    g
                }
            };
            times.push(h.t);
            lambda.push(field::load(snap_dir.join(&h.lambda))?.into_scalar(g.clone())?);
            w.push(field::load(snap_dir.join(&h.w))?.into_scalar(g)?);
        }
        Self::new(times, lambda, w)
    }

    pub fn grid(&self) -> &Arc<HopfGrid> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn covers(&self, t0: f64, t1: f64) -> bool {
        let (a, b) = (self.times[0], *self.times.last().unwrap());
        t0 >= a && t1 <= b
    }

    fn bracket(&self, t: f64) -> Result<(usize, f64)> {
        let (a, b) = (self.times[0], *self.times.last().unwrap());
        if !(t >= a && t <= b) {
            return Err(Error::Usage(format!("time {t} outside the snapshot range [{a}, {b}]")));
        }
        if self.times.len() == 1 {
            return Ok((0, 0.0));
        }
        let i = self.times.partition_point(|s| *s <= t).clamp(1, self.times.len() - 1) - 1;
        let (s0, s1) = (self.times[i], self.times[i + 1]);
        Ok((i, (t - s0) / (s1 - s0)))
    }

    fn eval(&self, fields: &[ScalarField], p: &SpherePoint, t: f64) -> Result<f64> {
        let (i, s) = self.bracket(t)?;
        let v0 = interpolate(&fields[i], p);
        if s == 0.0 {
            return Ok(v0);
        }
        Ok((1.0 - s) * v0 + s * interpolate(&fields[i + 1], p))
    }

    pub fn lambda_at(&self, p: &SpherePoint, t: f64) -> Result<f64> {
        self.eval(&self.lambda, p, t)
    }

    pub fn w_at(&self, p: &SpherePoint, t: f64) -> Result<f64> {
        self.eval(&self.w, p, t)
    }
}
