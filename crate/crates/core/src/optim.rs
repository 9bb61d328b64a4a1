//! Quasi-Newton minimization with finite-difference gradients.

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::BFGS;

use crate::error::{Error, Result};

struct Problem<'a, F: Fn(&[f64]) -> f64> {
    f: &'a F,
    step: f64,
}

impl<F: Fn(&[f64]) -> f64> CostFunction for Problem<'_, F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, x: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        Ok((self.f)(x))
    }
}

impl<F: Fn(&[f64]) -> f64> Gradient for Problem<'_, F> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, x: &Vec<f64>) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        Ok(fd_gradient(self.f, x, self.step))
    }
}

/// Central differences with step `h·max(1, |xᵢ|)`.
pub fn fd_gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            let hi = h * x[i].abs().max(1.0);
            y[i] = x[i] + hi;
            let fp = f(&y);
            y[i] = x[i] - hi;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * hi)
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    /// Stop once the cost changes by less than this fraction of its size.
    pub rel_tol: f64,
    pub max_iters: u64,
    pub fd_step: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-8, max_iters: 200, fd_step: 1e-6 }
    }
}

/// Minimizes `f` from `x0`; returns the best point and its value.
pub fn minimize(f: impl Fn(&[f64]) -> f64, x0: Vec<f64>, opts: BfgsOptions) -> Result<(Vec<f64>, f64)> {
    let f0 = f(&x0);
    if !f0.is_finite() {
        return Err(Error::Data("objective is not finite at the starting point".into()));
    }
    let n = x0.len();
    if n == 0 {
        return Ok((x0, f0));
    }
    let h0: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    let problem = Problem { f: &f, step: opts.fd_step };
    let tol = opts.rel_tol * f0.abs().max(1e-300);
    let solver = BFGS::new(MoreThuenteLineSearch::new())
        .with_tolerance_cost(tol)
        .and_then(|s| s.with_tolerance_grad(1e-12))
        .map_err(|e| Error::Config(e.to_string()))?;
    let res = Executor::new(problem, solver)
        .configure(|s| s.param(x0.clone()).inv_hessian(h0).max_iters(opts.max_iters))
        .run();
    match res {
        Ok(r) => {
            let st = r.state();
            match st.get_best_param() {
                Some(p) if st.get_best_cost().is_finite() && st.get_best_cost() <= f0 => Ok((p.clone(), st.get_best_cost())),
                _ => Ok((x0, f0)),
            }
        }
        // Line-search breakdown near a minimum: keep the start.
        Err(_) => Ok((x0, f0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let (x, v) = minimize(f, vec![-1.2, 1.0], BfgsOptions { max_iters: 500, ..Default::default() }).unwrap();
        assert!(v < 1e-8, "{v} at {x:?}");
        assert!((x[0] - 1.0).abs() < 1e-3 && (x[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn quadratic_gradient() {
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[0] * x[1] + 0.5 * x[1] * x[1];
        let g = fd_gradient(&f, &[1.0, -2.0], 1e-6);
        assert!((g[0] - (2.0 - 6.0)).abs() < 1e-8 && (g[1] - (3.0 - 2.0)).abs() < 1e-8);
    }
}
