//! Discrete operators in the fixed frame (Ẑ₁, Ẑ₁̄, T̂) of the standard sphere.
//!
//! In Hopf coordinates the frame reads
//!
//! ```text
//! Ẑ₁ = α (∂_η + i tanη ∂_ξ₁ − i cotη ∂_ξ₂),   α = e^{−i(ξ₁+ξ₂)} / (2√2)
//! T̂  = ½ (∂_ξ₁ + ∂_ξ₂)
//! ```
//!
//! ξ-derivatives are spectral (row-wise 2D FFT); η-derivatives are centered
//! finite differences. Near the degenerate circles the stencil reads ghost
//! rows obtained from the exact reflections
//! f(−η, ξ₁, ξ₂) = f(η, ξ₁, ξ₂ + π) and f(π − η, ξ₁, ξ₂) = f(η, ξ₁ + π, ξ₂).

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::{same_grid, ComplexField, Field, ScalarField};
use crate::sphere::HopfGrid;

type C = Complex64;

const I: C = C { re: 0.0, im: 1.0 };

/// Relative bound on the imaginary part of a sublaplacian of a real field.
pub const IMAG_RESIDUE_TOL: f64 = 1e-8;

pub const DEFAULT_FD_ORDER: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Z1,
    Z1bar,
    T,
}

/// Second covariant derivatives in the hatted frame.
#[derive(Debug, Clone)]
pub struct CovariantSecond {
    /// f,₁₁ = Ẑ₁Ẑ₁f
    pub f11: ComplexField,
    /// f,₁₁̄ = Ẑ₁̄Ẑ₁f
    pub f11bar: ComplexField,
    /// f,₁̄₁ = Ẑ₁Ẑ₁̄f
    pub f1bar1: ComplexField,
}

struct Stencil {
    // d1[m-1] multiplies f(k+m) − f(k−m); d2[0] is the center weight.
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Stencil {
    fn central(order: usize) -> Result<Self> {
        let (d1, d2): (&[f64], &[f64]) = match order {
            2 => (&[0.5], &[-2.0, 1.0]),
            4 => (&[2.0 / 3.0, -1.0 / 12.0], &[-5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0]),
            6 => (
                &[3.0 / 4.0, -3.0 / 20.0, 1.0 / 60.0],
                &[-49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0],
            ),
            8 => (
                &[4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0],
                &[-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0, 8.0 / 315.0, -1.0 / 560.0],
            ),
            _ => {
                return Err(Error::Config(format!(
                    "finite-difference order must be 2, 4, 6 or 8 (got {order})"
                )))
            }
        };
        Ok(Self { d1: d1.to_vec(), d2: d2.to_vec() })
    }

    fn radius(&self) -> usize {
        self.d1.len()
    }
}

/// Coordinate partial derivatives of one field.
pub(crate) struct Partials {
    pub f_e: Vec<C>,
    pub f_1: Vec<C>,
    pub f_2: Vec<C>,
    pub second: Option<SecondPartials>,
}

pub(crate) struct SecondPartials {
    pub f_ee: Vec<C>,
    pub f_11: Vec<C>,
    pub f_22: Vec<C>,
    pub f_12: Vec<C>,
    pub f_e1: Vec<C>,
    pub f_e2: Vec<C>,
}

/// Operator backend bound to one grid.
pub struct FrameCalculus {
    grid: Arc<HopfGrid>,
    order: usize,
    stencil: Stencil,
    fft1: Arc<dyn Fft<f64>>,
    ifft1: Arc<dyn Fft<f64>>,
    fft2: Arc<dyn Fft<f64>>,
    ifft2: Arc<dyn Fft<f64>>,
    tan: Vec<f64>,
    cot: Vec<f64>,
    // α at each (j1, j2) of a row; α does not depend on η.
    alpha: Vec<C>,
}

impl std::fmt::Debug for FrameCalculus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrameCalculus")
            .field("dims", &self.grid.dims())
            .field("fd_order", &self.order)
            .finish()
    }
}

fn wavenumber(j: usize, n: usize) -> f64 {
    if j <= n / 2 {
        j as f64
    } else {
        j as f64 - n as f64
    }
}

impl FrameCalculus {
    pub fn new(grid: Arc<HopfGrid>) -> Self {
        Self::with_fd_order(grid, DEFAULT_FD_ORDER).expect("default order is supported")
    }

    pub fn with_fd_order(grid: Arc<HopfGrid>, order: usize) -> Result<Self> {
        let stencil = Stencil::central(order)?;
        if stencil.radius() > grid.n_eta() {
            return Err(Error::Config(format!(
                "n_eta = {} is too small for order-{order} differences",
                grid.n_eta()
            )));
        }
        let mut planner = FftPlanner::new();
        let (n1, n2) = (grid.n_xi1(), grid.n_xi2());
        let tan = grid.eta().iter().map(|e| e.tan()).collect();
        let cot = grid.eta().iter().map(|e| 1.0 / e.tan()).collect();
        let s = 1.0 / (2.0 * std::f64::consts::SQRT_2);
        let mut alpha = Vec::with_capacity(n1 * n2);
        for a in grid.xi1() {
            for b in grid.xi2() {
                alpha.push(C::from_polar(s, -(a + b)));
            }
        }
        Ok(Self {
            fft1: planner.plan_fft_forward(n1),
            ifft1: planner.plan_fft_inverse(n1),
            fft2: planner.plan_fft_forward(n2),
            ifft2: planner.plan_fft_inverse(n2),
            grid,
            order,
            stencil,
            tan,
            cot,
            alpha,
        })
    }

    pub fn grid(&self) -> &Arc<HopfGrid> {
        &self.grid
    }

    pub fn fd_order(&self) -> usize {
        self.order
    }

    fn check(&self, f: &impl Field) -> Result<()> {
        same_grid(&self.grid, f.grid())
    }

    fn check_finite(values: &[C]) -> Result<()> {
        match values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::Data(format!("non-finite value at node {i}"))),
            None => Ok(()),
        }
    }

    /// Spectral ξ-derivatives of every row. Each requested pair (a, b)
    /// produces ∂₁ᵃ∂₂ᵇ f. The Nyquist mode is dropped for odd orders so that
    /// real fields stay real.
    fn xi_derivatives(&self, values: &[C], orders: &[(u32, u32)]) -> Vec<Vec<C>> {
        let (n1, n2) = (self.grid.n_xi1(), self.grid.n_xi2());
        let row = n1 * n2;
        let scale = 1.0 / row as f64;
        let rows: Vec<Vec<Vec<C>>> = values
            .par_chunks(row)
            .map(|src| {
                // forward: along ξ₂ (contiguous), transpose, along ξ₁
                let mut buf = src.to_vec();
                self.fft2.process(&mut buf);
                let mut spec = transpose(&buf, n1, n2); // layout [j2][j1]
                self.fft1.process(&mut spec);
                orders
                    .iter()
                    .map(|&(a, b)| {
                        let mut work = spec.clone();
                        for j2 in 0..n2 {
                            let s2 = symbol(j2, n2, b) * scale;
                            for j1 in 0..n1 {
                                work[j2 * n1 + j1] *= symbol(j1, n1, a) * s2;
                            }
                        }
                        self.ifft1.process(&mut work);
                        let mut back = transpose(&work, n2, n1);
                        self.ifft2.process(&mut back);
                        back
                    })
                    .collect()
            })
            .collect();
        let mut out: Vec<Vec<C>> = orders.iter().map(|_| Vec::with_capacity(values.len())).collect();
        for r in rows {
            for (o, part) in out.iter_mut().zip(r) {
                o.extend_from_slice(&part);
            }
        }
        out
    }

    /// Applies a per-row Fourier multiplier in (ξ₁, ξ₂). The closure gets the
    /// row index and the first/second-order symbols of one mode.
    fn xi_multiplier(&self, values: &[C], sym: impl Fn(usize, &ModeSymbols) -> C + Sync) -> Vec<C> {
        let (n1, n2) = (self.grid.n_xi1(), self.grid.n_xi2());
        let row = n1 * n2;
        let scale = 1.0 / row as f64;
        let mut out = vec![C::new(0.0, 0.0); values.len()];
        out.par_chunks_mut(row)
            .zip(values.par_chunks(row))
            .enumerate()
            .for_each(|(k, (dst, src))| {
                let mut buf = src.to_vec();
                self.fft2.process(&mut buf);
                let mut spec = transpose(&buf, n1, n2);
                self.fft1.process(&mut spec);
                for j2 in 0..n2 {
                    for j1 in 0..n1 {
                        let m = ModeSymbols::new(j1, n1, j2, n2);
                        spec[j2 * n1 + j1] *= sym(k, &m) * scale;
                    }
                }
                self.ifft1.process(&mut spec);
                let back = transpose(&spec, n2, n1);
                dst.copy_from_slice(&back);
                self.ifft2.process(dst);
            });
        out
    }

    /// (Ẑ₁f, Δ̂_b f) of a real field with the fewest transforms; used by
    /// the time stepper.
    pub(crate) fn z1_and_lap(&self, values: &[f64]) -> (Vec<C>, Vec<f64>) {
        let v: Vec<C> = values.iter().map(|x| C::new(*x, 0.0)).collect();
        let (tan, cot) = (&self.tan, &self.cot);
        let q = self.xi_multiplier(&v, |k, m| I * (tan[k] * m.s1 - cot[k] * m.s2));
        let lx = self.xi_multiplier(&v, |k, m| {
            tan[k] * tan[k] * m.s11 + cot[k] * cot[k] * m.s22 - 2.0 * m.s12
        });
        let fe = self.eta_derivative(&v, false);
        let fee = self.eta_derivative(&v, true);
        let z1 = self.node_map(|_, m, i| self.alpha[m] * (fe[i] + q[i]));
        let row = self.grid.row_len();
        let lap = (0..v.len())
            .map(|i| {
                let k = i / row;
                (fee[i].re + (cot[k] - tan[k]) * fe[i].re + lx[i].re) / 4.0
            })
            .collect();
        (z1, lap)
    }

    fn ghost(&self, k: isize) -> (usize, usize, usize) {
        let n = self.grid.n_eta() as isize;
        if k < 0 {
            ((-1 - k) as usize, 0, self.grid.n_xi2() / 2)
        } else if k >= n {
            ((2 * n - 1 - k) as usize, self.grid.n_xi1() / 2, 0)
        } else {
            (k as usize, 0, 0)
        }
    }

    /// η-derivative (first or second) with parity ghosts.
    fn eta_derivative(&self, values: &[C], second: bool) -> Vec<C> {
        let g = &self.grid;
        let (n1, n2) = (g.n_xi1(), g.n_xi2());
        let row = n1 * n2;
        let h = g.h_eta();
        let inv = if second { 1.0 / (h * h) } else { 1.0 / h };
        let r = self.stencil.radius();
        let mut out = vec![C::new(0.0, 0.0); values.len()];
        out.par_chunks_mut(row).enumerate().for_each(|(k, dst)| {
            let at = |kk: isize, j1: usize, j2: usize| -> C {
                let (kr, s1, s2) = self.ghost(kk);
                values[g.index(kr, (j1 + s1) % n1, (j2 + s2) % n2)]
            };
            let k = k as isize;
            for j1 in 0..n1 {
                for j2 in 0..n2 {
                    let mut acc = if second {
                        values[g.index(k as usize, j1, j2)] * self.stencil.d2[0]
                    } else {
                        C::new(0.0, 0.0)
                    };
                    for m in 1..=r {
                        let (p, q) = (at(k + m as isize, j1, j2), at(k - m as isize, j1, j2));
                        acc += if second {
                            (p + q) * self.stencil.d2[m]
                        } else {
                            (p - q) * self.stencil.d1[m - 1]
                        };
                    }
                    dst[j1 * n2 + j2] = acc * inv;
                }
            }
        });
        out
    }

    pub(crate) fn partials(&self, values: &[C], second: bool) -> Partials {
        if !second {
            let mut xi = self.xi_derivatives(values, &[(1, 0), (0, 1)]);
            let f_2 = xi.pop().unwrap();
            let f_1 = xi.pop().unwrap();
            return Partials { f_e: self.eta_derivative(values, false), f_1, f_2, second: None };
        }
        let mut xi = self.xi_derivatives(values, &[(1, 0), (0, 1), (2, 0), (0, 2), (1, 1)]);
        let f_12 = xi.pop().unwrap();
        let f_22 = xi.pop().unwrap();
        let f_11 = xi.pop().unwrap();
        let f_2 = xi.pop().unwrap();
        let f_1 = xi.pop().unwrap();
        let sp = SecondPartials {
            f_ee: self.eta_derivative(values, true),
            f_e1: self.eta_derivative(&f_1, false),
            f_e2: self.eta_derivative(&f_2, false),
            f_11,
            f_22,
            f_12,
        };
        Partials { f_e: self.eta_derivative(values, false), f_1, f_2, second: Some(sp) }
    }

    fn node_map(&self, f: impl Fn(usize, usize, usize) -> C + Sync) -> Vec<C> {
        let row = self.grid.row_len();
        let mut out = vec![C::new(0.0, 0.0); self.grid.len()];
        out.par_chunks_mut(row).enumerate().for_each(|(k, dst)| {
            for (m, v) in dst.iter_mut().enumerate() {
                *v = f(k, m, k * row + m);
            }
        });
        out
    }

    /// Ẑ₁, Ẑ₁̄ or T̂ applied to raw node values.
    pub(crate) fn apply(&self, values: &[C], dir: Direction) -> Vec<C> {
        let p = self.partials(values, false);
        self.apply_first(&p, dir)
    }

    pub(crate) fn apply_first(&self, p: &Partials, dir: Direction) -> Vec<C> {
        match dir {
            Direction::Z1 => self.node_map(|k, m, i| {
                self.alpha[m] * (p.f_e[i] + I * (p.f_1[i] * self.tan[k] - p.f_2[i] * self.cot[k]))
            }),
            Direction::Z1bar => self.node_map(|k, m, i| {
                self.alpha[m].conj() * (p.f_e[i] - I * (p.f_1[i] * self.tan[k] - p.f_2[i] * self.cot[k]))
            }),
            Direction::T => self.node_map(|_, _, i| 0.5 * (p.f_1[i] + p.f_2[i])),
        }
    }

    /// (Ẑ₁Ẑ₁f, Ẑ₁̄Ẑ₁f, Ẑ₁Ẑ₁̄f, Ẑ₁̄Ẑ₁̄f) from raw node values.
    pub(crate) fn apply_second(&self, values: &[C]) -> [Vec<C>; 4] {
        self.second_from(&self.partials(values, true))
    }

    pub(crate) fn second_from(&self, p: &Partials) -> [Vec<C>; 4] {
        let s = p.second.as_ref().expect("second partials requested");
        // L f = f_ηη + (κ−τ) f_η + τ² f₁₁ + κ² f₂₂ − 2 f₁₂
        let lap = self.node_map(|k, _, i| {
            let (t, c) = (self.tan[k], self.cot[k]);
            s.f_ee[i] + (c - t) * p.f_e[i] + t * t * s.f_11[i] + c * c * s.f_22[i] - 2.0 * s.f_12[i]
        });
        let z1bar_z1 = self.node_map(|_, _, i| (lap[i] + 2.0 * I * (p.f_1[i] + p.f_2[i])) / 8.0);
        let z1_z1bar = self.node_map(|_, _, i| (lap[i] - 2.0 * I * (p.f_1[i] + p.f_2[i])) / 8.0);
        let z1_z1 = self.node_map(|k, m, i| {
            let (t, c) = (self.tan[k], self.cot[k]);
            let (sec2, csc2) = (1.0 + t * t, 1.0 + c * c);
            let d = p.f_e[i] + I * (t * p.f_1[i] - c * p.f_2[i]);
            let d2 = s.f_ee[i] - t * t * s.f_11[i] - c * c * s.f_22[i]
                + 2.0 * s.f_12[i]
                + I * (2.0 * t * s.f_e1[i] - 2.0 * c * s.f_e2[i] + sec2 * p.f_1[i] + csc2 * p.f_2[i]);
            self.alpha[m] * self.alpha[m] * (d2 + (t - c) * d)
        });
        let z1bar_z1bar = self.node_map(|k, m, i| {
            let (t, c) = (self.tan[k], self.cot[k]);
            let (sec2, csc2) = (1.0 + t * t, 1.0 + c * c);
            let d = p.f_e[i] - I * (t * p.f_1[i] - c * p.f_2[i]);
            let d2 = s.f_ee[i] - t * t * s.f_11[i] - c * c * s.f_22[i]
                + 2.0 * s.f_12[i]
                - I * (2.0 * t * s.f_e1[i] - 2.0 * c * s.f_e2[i] + sec2 * p.f_1[i] + csc2 * p.f_2[i]);
            let a = self.alpha[m].conj();
            a * a * (d2 + (t - c) * d)
        });
        [z1_z1, z1bar_z1, z1_z1bar, z1bar_z1bar]
    }

    pub fn frame_derivative(&self, f: &impl Field, dir: Direction) -> Result<ComplexField> {
        self.check(f)?;
        let v = f.complex_values();
        Self::check_finite(&v)?;
        Ok(ComplexField::from_raw(self.grid.clone(), self.apply(&v, dir)))
    }

    pub fn covariant_second(&self, f: &impl Field) -> Result<CovariantSecond> {
        self.check(f)?;
        let v = f.complex_values();
        Self::check_finite(&v)?;
        let [f11, f11bar, f1bar1, _] = self.apply_second(&v);
        let g = &self.grid;
        Ok(CovariantSecond {
            f11: ComplexField::from_raw(g.clone(), f11),
            f11bar: ComplexField::from_raw(g.clone(), f11bar),
            f1bar1: ComplexField::from_raw(g.clone(), f1bar1),
        })
    }

    /// Components (f,₁̄, f,₁) of ∇̂_b f = f,₁̄Ẑ₁ + f,₁Ẑ₁̄.
    pub fn subgradient(&self, f: &ScalarField) -> Result<(ComplexField, ComplexField)> {
        let f1 = self.frame_derivative(f, Direction::Z1)?;
        Ok((f1.conj(), f1))
    }

    /// Δ̂_b f = f,₁₁̄ + f,₁̄₁ with the imaginary residue returned alongside.
    pub fn sublaplacian_with_residue(&self, f: &ScalarField) -> Result<(ScalarField, f64)> {
        let c = self.covariant_second(f)?;
        let sum = c.f11bar.zip_map(&c.f1bar1, |a, b| a + b);
        let residue = sum.max_abs_im();
        let limit = IMAG_RESIDUE_TOL * f.max_abs();
        if residue > limit {
            return Err(Error::NumericalConsistency { what: "sublaplacian imaginary part", residue, limit });
        }
        Ok((sum.re(), residue))
    }

    pub fn sublaplacian(&self, f: &ScalarField) -> Result<ScalarField> {
        self.sublaplacian_with_residue(f).map(|(s, _)| s)
    }

    /// e^{2λ}(u₁v₁̄ + u₁̄v₁) for hatted-frame components U = (u₁, u₁̄), V = (v₁, v₁̄).
    pub fn levi_inner(
        &self,
        u: (&ComplexField, &ComplexField),
        v: (&ComplexField, &ComplexField),
        lambda: &ScalarField,
    ) -> Result<ScalarField> {
        for f in [u.0, u.1, v.0, v.1] {
            same_grid(&self.grid, f.grid())?;
        }
        same_grid(&self.grid, lambda.grid())?;
        let values = (0..self.grid.len())
            .map(|i| {
                let s = u.0.values()[i] * v.1.values()[i] + u.1.values()[i] * v.0.values()[i];
                (2.0 * lambda.values()[i]).exp() * s.re
            })
            .collect();
        Ok(ScalarField::from_raw(self.grid.clone(), values))
    }
}

fn symbol(j: usize, n: usize, order: u32) -> C {
    if order == 0 {
        return C::new(1.0, 0.0);
    }
    let nyquist = n % 2 == 0 && j == n / 2;
    if nyquist && order % 2 == 1 {
        return C::new(0.0, 0.0);
    }
    let k = if nyquist { n as f64 / 2.0 } else { wavenumber(j, n) };
    (I * k).powu(order)
}

pub(crate) struct ModeSymbols {
    s1: C,
    s2: C,
    s11: C,
    s22: C,
    s12: C,
}

impl ModeSymbols {
    fn new(j1: usize, n1: usize, j2: usize, n2: usize) -> Self {
        let (s1, s2) = (symbol(j1, n1, 1), symbol(j2, n2, 1));
        Self { s1, s2, s11: symbol(j1, n1, 2), s22: symbol(j2, n2, 2), s12: s1 * s2 }
    }
}

fn transpose(src: &[C], rows: usize, cols: usize) -> Vec<C> {
    let mut out = vec![C::new(0.0, 0.0); src.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = src[r * cols + c];
        }
    }
    out
}
