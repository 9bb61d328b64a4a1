//! Harnack quantity Z(θ, η), its minimum Y(θ) over η, and the differential
//! form of the inequality.
//!
//! Vectors are given by lowered flowed components (v₁, v₁̄) with
//! ⟨V, U⟩ = v₁u₁̄ + v₁̄u₁, so ⟨∇_bW, η⟩ = 2 Re(W,₁ η̄₁) and |η|² = 2|η₁|².

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{same_grid, ComplexField, ScalarField};
use crate::transform::PseudohermitianState;

/// Legendrian field through its flowed component η₁ (η₁̄ is its conjugate).
#[derive(Debug, Clone)]
pub struct LegendrianField {
    eta1: ComplexField,
}

impl LegendrianField {
    pub fn new(eta1: ComplexField) -> Self {
        Self { eta1 }
    }

    /// Checks that the two components are conjugate at every node.
    pub fn from_pair(eta1: ComplexField, eta1bar: &ComplexField) -> Result<Self> {
        same_grid(eta1.grid(), eta1bar.grid())?;
        let scale = eta1.max_abs().max(1.0);
        let defect = eta1
            .values()
            .iter()
            .zip(eta1bar.values())
            .fold(0.0f64, |m, (a, b)| m.max((a.conj() - b).norm()));
        if defect > 1e-12 * scale {
            return Err(Error::Data(format!("η₁̄ is not the conjugate of η₁ (defect {defect:.3e})")));
        }
        Ok(Self { eta1 })
    }

    pub fn eta1(&self) -> &ComplexField {
        &self.eta1
    }

    pub fn eta1bar(&self) -> ComplexField {
        self.eta1.conj()
    }

    /// |η|² = 2|η₁|² with respect to θ(t).
    pub fn norm_sq(&self) -> ScalarField {
        self.eta1.map(|v| Complex64::new(2.0 * v.norm_sqr(), 0.0)).re()
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Usage(format!("Harnack quantities need t > 0 (got {t})")));
    }
    Ok(())
}

fn check_positive(w: &ScalarField) -> Result<()> {
    let (i, v) = w.argmin();
    if !(v > 0.0) {
        let (e, a, b) = w.grid().coords(i);
        return Err(Error::Hypothesis(format!(
            "W must be positive; W = {v:.6e} at node {i} (η = {e:.6}, ξ₁ = {a:.6}, ξ₂ = {b:.6})"
        )));
    }
    Ok(())
}

/// Z = 2Δ_bW + W² + W/t + ⟨∇_bW, η⟩ + W|η|²/8.
pub fn harnack_z(state: &PseudohermitianState, eta: &LegendrianField, t: f64) -> Result<ScalarField> {
    check_t(t)?;
    let w = state.w()?;
    same_grid(w.grid(), eta.eta1.grid())?;
    let (lap, w1) = (state.lap_w()?, state.w1()?);
    let values = (0..w.values().len())
        .map(|i| {
            let (wi, e) = (w.values()[i], eta.eta1.values()[i]);
            let inner = 2.0 * (w1.values()[i] * e.conj()).re;
            2.0 * lap.values()[i] + wi * wi + wi / t + inner + wi * 2.0 * e.norm_sqr() / 8.0
        })
        .collect();
    ScalarField::new(w.grid().clone(), values)
}

/// Y = 2Δ_bW + W² + W/t − 2W⁻¹|∇_bW|², the minimum of Z over η.
pub fn harnack_y(state: &PseudohermitianState, t: f64) -> Result<ScalarField> {
    check_t(t)?;
    let w = state.w()?;
    check_positive(w)?;
    let (lap, w1) = (state.lap_w()?, state.w1()?);
    let values = (0..w.values().len())
        .map(|i| {
            let wi = w.values()[i];
            2.0 * lap.values()[i] + wi * wi + wi / t - 4.0 * w1.values()[i].norm_sqr() / wi
        })
        .collect();
    ScalarField::new(w.grid().clone(), values)
}

/// η = −4W⁻¹∇_bW, i.e. η₁ = −4W,₁/W.
pub fn optimal_eta(state: &PseudohermitianState) -> Result<LegendrianField> {
    let w = state.w()?;
    check_positive(w)?;
    let w1 = state.w1()?;
    let values = w1.values().iter().zip(w.values()).map(|(d, wi)| -4.0 * d / wi).collect();
    Ok(LegendrianField::new(ComplexField::new(w.grid().clone(), values)?))
}

/// Step of a three-state window, checked for uniformity.
pub(crate) fn window_dt(window: &[&PseudohermitianState]) -> Result<f64> {
    if window.len() != 3 {
        return Err(Error::Usage(format!("need exactly 3 consecutive states (got {})", window.len())));
    }
    let (d1, d2) = (window[1].t() - window[0].t(), window[2].t() - window[1].t());
    if !(d1 > 0.0) || (d1 - d2).abs() > 1e-9 * d1.abs().max(d2.abs()) {
        return Err(Error::Usage(format!("window steps are not uniform ({d1:e} vs {d2:e})")));
    }
    for s in &window[1..] {
        same_grid(window[0].lambda().grid(), s.lambda().grid())?;
    }
    Ok(0.5 * (d1 + d2))
}

/// ∂ₜW + 2W/t − 4W⁻¹|∇_bW|² at the middle state, with ∂ₜW by central
/// differences.
pub fn differential_harnack_residual(window: &[&PseudohermitianState]) -> Result<ScalarField> {
    let dt = window_dt(window)?;
    let mid = window[1];
    let t = mid.t();
    check_t(t)?;
    let (wm, w0, wp) = (window[0].w()?, mid.w()?, window[2].w()?);
    check_positive(w0)?;
    let w1 = mid.w1()?;
    let values = (0..w0.values().len())
        .map(|i| {
            let wi = w0.values()[i];
            let wdot = (wp.values()[i] - wm.values()[i]) / (2.0 * dt);
            wdot + 2.0 * wi / t - 8.0 * w1.values()[i].norm_sqr() / wi
        })
        .collect();
    ScalarField::new(w0.grid().clone(), values)
}
