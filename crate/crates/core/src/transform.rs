//! Conformal change θ = e^{2λ}θ̂ of the standard structure.
//!
//! Every flowed-frame quantity is obtained from hatted derivatives of λ and
//! of the operand (l₁ = λ,₁̂ below). With Z₁ = e^{−λ}Ẑ₁:
//!
//! ```text
//! W     = e^{−2λ}(−4Δ̂_bλ − 8|l₁|² + 1)
//! A₁₁   = e^{−2λ}(2iλ,₁̂₁̂ − 4i l₁²)
//! Δ_b f = e^{−2λ}(Δ̂_b f + 4 Re(l₁ f,₁̄̂))
//! f,₁₁  = e^{−2λ}(f,₁̂₁̂ − 4 l₁ f,₁̂)
//! f,₁₁̄  = e^{−2λ}(f,₁̂₁̄̂ + 2 λ,₁̄̂ f,₁̂)
//! f,₀   = e^{−2λ}(T̂f + 4 Im(λ,₁̄̂ f,₁̂))
//! ```
//!
//! The connection form of θ takes the values ω₁¹(Z₁) = 3e^{−λ}l₁,
//! ω₁¹(Z₁̄) = −3e^{−λ}λ,₁̄̂ and ω₁¹(T) = i e^{−2λ}(Δ̂_bλ − 4|l₁|² − 1).
//! The f,₁₁ line is f,₁̂₁̂ = e^{2λ}(f,₁₁ + 4λ,₁f,₁) solved for f,₁₁ with
//! λ,₁ and f,₁ on the right read in the flowed frame (λ,₁ = e^{−λ}l₁); it
//! agrees with a direct computation through ω₁¹(Z₁).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::calculus::{CovariantSecond, Direction, FrameCalculus, IMAG_RESIDUE_TOL};
use crate::error::{Error, Result};
use crate::field::{self, same_grid, ComplexField, ScalarField};
use crate::initial::Section5Params;
use crate::sphere::GridDims;

type C = Complex64;
const I: C = C { re: 0.0, im: 1.0 };

/// Label recorded in diagnostics for the second-derivative convention.
pub const HESSIAN_CONVENTION: &str = "flowed-rhs: f,11 = e^(-2l) f,1^1^ - 4 l,1 f,1";

/// Hatted derivatives of λ needed by the transformation laws.
pub(crate) struct LambdaJet {
    pub e2: Vec<f64>,
    pub l1: Vec<C>,
    pub l11: Vec<C>,
    pub lap: Vec<f64>,
}

impl LambdaJet {
    fn new(calc: &FrameCalculus, lambda: &ScalarField) -> Result<Self> {
        same_grid(calc.grid(), lambda.grid())?;
        if let Some(i) = lambda.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite λ at node {i}")));
        }
        let vals: Vec<C> = lambda.values().iter().map(|v| C::new(*v, 0.0)).collect();
        let p = calc.partials(&vals, true);
        let l1 = calc.apply_first(&p, Direction::Z1);
        let [l11, a, b, _] = calc.second_from(&p);
        let lap = a.iter().zip(&b).map(|(x, y)| (x + y).re).collect();
        let e2 = lambda.values().iter().map(|v| (-2.0 * v).exp()).collect();
        Ok(Self { e2, l1, l11, lap })
    }

    fn webster(&self) -> Vec<f64> {
        (0..self.e2.len())
            .map(|i| self.e2[i] * (-4.0 * self.lap[i] - 8.0 * self.l1[i].norm_sqr() + 1.0))
            .collect()
    }

    fn torsion(&self) -> Vec<C> {
        (0..self.e2.len())
            .map(|i| self.e2[i] * (2.0 * I * self.l11[i] - 4.0 * I * self.l1[i] * self.l1[i]))
            .collect()
    }
}

/// First and second hatted derivatives of an operand.
struct Jet {
    f1: Vec<C>,
    f1bar: Vec<C>,
    f11: Vec<C>,
    f11bar: Vec<C>,
    f1bar1: Vec<C>,
}

impl Jet {
    fn new(calc: &FrameCalculus, values: &[C]) -> Self {
        let p = calc.partials(values, true);
        let [f11, f11bar, f1bar1, _] = calc.second_from(&p);
        Self {
            f1: calc.apply_first(&p, Direction::Z1),
            f1bar: calc.apply_first(&p, Direction::Z1bar),
            f11,
            f11bar,
            f1bar1,
        }
    }
}

fn real_values(f: &ScalarField) -> Vec<C> {
    f.values().iter().map(|v| C::new(*v, 0.0)).collect()
}

impl FrameCalculus {
    pub(crate) fn lambda_jet(&self, lambda: &ScalarField) -> Result<LambdaJet> {
        LambdaJet::new(self, lambda)
    }

    /// W of θ = e^{2λ}θ̂ (Ŵ = 1 on the standard sphere).
    pub fn webster_curvature(&self, lambda: &ScalarField) -> Result<ScalarField> {
        same_grid(self.grid(), lambda.grid())?;
        if let Some(i) = lambda.values().iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite λ at node {i}")));
        }
        Ok(ScalarField::from_raw(self.grid().clone(), self.webster_values(lambda.values())))
    }

    /// W from raw λ values, without validation.
    pub(crate) fn webster_values(&self, lambda: &[f64]) -> Vec<f64> {
        let (l1, lap) = self.z1_and_lap(lambda);
        (0..lambda.len())
            .map(|i| (-2.0 * lambda[i]).exp() * (-4.0 * lap[i] - 8.0 * l1[i].norm_sqr() + 1.0))
            .collect()
    }

    /// A₁₁ of θ = e^{2λ}θ̂ (Â₁₁ = 0).
    pub fn torsion(&self, lambda: &ScalarField) -> Result<ComplexField> {
        Ok(ComplexField::from_raw(self.grid().clone(), self.lambda_jet(lambda)?.torsion()))
    }

    /// Flowed component f,₁ = e^{−λ}f,₁̂.
    pub fn flowed_gradient(&self, lambda: &ScalarField, f: &ScalarField) -> Result<ComplexField> {
        same_grid(self.grid(), lambda.grid())?;
        let f1 = self.frame_derivative(f, Direction::Z1)?;
        Ok(ComplexField::from_raw(
            self.grid().clone(),
            f1.values().iter().zip(lambda.values()).map(|(d, l)| d * (-l).exp()).collect(),
        ))
    }

    pub fn flowed_sublaplacian(&self, lambda: &ScalarField, f: &ScalarField) -> Result<ScalarField> {
        let lj = self.lambda_jet(lambda)?;
        same_grid(self.grid(), f.grid())?;
        let j = Jet::new(self, &real_values(f));
        Ok(ScalarField::from_raw(self.grid().clone(), flowed_lap(&lj, &j)))
    }

    /// Flowed (f,₁₁, f,₁₁̄, f,₁̄₁).
    pub fn flowed_second(&self, lambda: &ScalarField, f: &ScalarField) -> Result<CovariantSecond> {
        let lj = self.lambda_jet(lambda)?;
        same_grid(self.grid(), f.grid())?;
        let j = Jet::new(self, &real_values(f));
        let n = j.f1.len();
        let g = self.grid().clone();
        let f11 = (0..n).map(|i| lj.e2[i] * (j.f11[i] - 4.0 * lj.l1[i] * j.f1[i])).collect();
        let f11bar = (0..n)
            .map(|i| lj.e2[i] * (j.f11bar[i] + 2.0 * lj.l1[i].conj() * j.f1[i]))
            .collect();
        let f1bar1 = (0..n)
            .map(|i| lj.e2[i] * (j.f1bar1[i] + 2.0 * lj.l1[i] * j.f1bar[i]))
            .collect();
        Ok(CovariantSecond {
            f11: ComplexField::from_raw(g.clone(), f11),
            f11bar: ComplexField::from_raw(g.clone(), f11bar),
            f1bar1: ComplexField::from_raw(g, f1bar1),
        })
    }

    pub fn flowed_hessian11(&self, lambda: &ScalarField, f: &ScalarField) -> Result<ComplexField> {
        Ok(self.flowed_second(lambda, f)?.f11)
    }

    /// f,₀ for θ(t) from the commutation relation i f,₀ = f,₁₁̄ − f,₁̄₁.
    pub fn reeb_derivative(&self, lambda: &ScalarField, f: &ScalarField) -> Result<ScalarField> {
        let s = self.flowed_second(lambda, f)?;
        let v = s.f11bar.zip_map(&s.f1bar1, |a, b| -I * (a - b));
        let residue = v.max_abs_im();
        let limit = IMAG_RESIDUE_TOL * f.max_abs().max(v.max_abs());
        if residue > limit {
            return Err(Error::NumericalConsistency { what: "Reeb derivative imaginary part", residue, limit });
        }
        Ok(v.re())
    }

    /// Q₁₁ = W,₁₁/6 + (i/2)WA₁₁ − A₁₁,₀ − (2i/3)A₁₁,₁̄₁, with all tensor
    /// derivatives of A₁₁ taken in full.
    pub fn cartan_q11(&self, lambda: &ScalarField) -> Result<ComplexField> {
        Ok(self.cartan_parts(lambda)?.0)
    }

    /// (full Q₁₁, Q₁₁ evaluated with A₁₁ ≡ 0).
    pub fn cartan_parts(&self, lambda: &ScalarField) -> Result<(ComplexField, ComplexField)> {
        let lj = self.lambda_jet(lambda)?;
        let g = self.grid().clone();
        let w = ScalarField::from_raw(g.clone(), lj.webster());
        let a = lj.torsion();
        let w11 = self.flowed_hessian11(lambda, &w)?;
        let n = a.len();

        let ap = self.partials(&a, false);
        let za = self.apply_first(&ap, Direction::Z1);
        let zba = self.apply_first(&ap, Direction::Z1bar);
        let ta = self.apply_first(&ap, Direction::T);
        let el: Vec<f64> = lambda.values().iter().map(|v| (-v).exp()).collect();

        // A₁₁,₀ = T(A) − 2ω(T)A
        let a0: Vec<C> = (0..n)
            .map(|i| {
                let (l1, l1b) = (lj.l1[i], lj.l1[i].conj());
                let t_a = lj.e2[i] * (ta[i] - 2.0 * I * l1b * za[i] + 2.0 * I * l1 * zba[i]);
                let om_t = I * lj.e2[i] * (lj.lap[i] - 4.0 * l1.norm_sqr() - 1.0);
                t_a - 2.0 * om_t * a[i]
            })
            .collect();
        // B = A₁₁,₁̄ = Z₁̄A − 2ω(Z₁̄)A
        let b: Vec<C> = (0..n)
            .map(|i| el[i] * (zba[i] + 6.0 * lj.l1[i].conj() * a[i]))
            .collect();
        // A₁₁,₁̄₁ = Z₁B − ω(Z₁)B
        let zb = self.apply(&b, Direction::Z1);
        let ab1: Vec<C> = (0..n).map(|i| el[i] * (zb[i] - 3.0 * lj.l1[i] * b[i])).collect();

        let full = (0..n)
            .map(|i| {
                w11.values()[i] / 6.0 + 0.5 * I * w.values()[i] * a[i] - a0[i] - (2.0 / 3.0) * I * ab1[i]
            })
            .collect();
        let reduced = w11.values().iter().map(|v| v / 6.0).collect();
        Ok((ComplexField::from_raw(g.clone(), full), ComplexField::from_raw(g, reduced)))
    }
}

fn flowed_lap(lj: &LambdaJet, j: &Jet) -> Vec<f64> {
    (0..j.f1.len())
        .map(|i| {
            let lap = (j.f11bar[i] + j.f1bar1[i]).re;
            lj.e2[i] * (lap + 4.0 * (lj.l1[i] * j.f1[i].conj()).re)
        })
        .collect()
}

/// Monitored quantities of one state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub max_abs_a11: f64,
    pub max_abs_w0: f64,
    pub max_abs_w11: f64,
    pub max_abs_q11: f64,
    /// Q₁₁ evaluated under A₁₁ ≡ 0, i.e. W,₁₁/6.
    pub max_abs_q11_torsion_free: f64,
    pub res_2_7: Option<f64>,
    pub res_2_8: Option<f64>,
    pub res_2_12: Option<f64>,
    pub imag_residue: f64,
    pub hessian_convention: String,
}

#[derive(Debug, Clone)]
struct Caches {
    w: ScalarField,
    a11: ComplexField,
    w1: ComplexField,
    lap_w: ScalarField,
    imag_residue: f64,
}

/// λ, flow time and the fields derived from them.
#[derive(Debug, Clone)]
pub struct PseudohermitianState {
    calc: Arc<FrameCalculus>,
    lambda: ScalarField,
    t: f64,
    caches: Option<Caches>,
}

impl PseudohermitianState {
    /// Builds the state and its caches.
    pub fn new(calc: Arc<FrameCalculus>, lambda: ScalarField, t: f64) -> Result<Self> {
        same_grid(calc.grid(), lambda.grid())?;
        let mut s = Self { calc, lambda, t, caches: None };
        s.rebuild()?;
        Ok(s)
    }

    pub fn calculus(&self) -> &Arc<FrameCalculus> {
        &self.calc
    }

    pub fn lambda(&self) -> &ScalarField {
        &self.lambda
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Replaces λ and t; all caches become stale at once.
    pub fn set_lambda(&mut self, lambda: ScalarField, t: f64) -> Result<()> {
        same_grid(self.calc.grid(), lambda.grid())?;
        self.caches = None;
        self.lambda = lambda;
        self.t = t;
        Ok(())
    }

    pub fn caches_valid(&self) -> bool {
        self.caches.is_some()
    }

    pub fn rebuild(&mut self) -> Result<()> {
        self.caches = None;
        let calc = &self.calc;
        let lj = calc.lambda_jet(&self.lambda)?;
        let g = calc.grid().clone();
        let w = ScalarField::from_raw(g.clone(), lj.webster());
        if !w.is_finite() {
            return Err(Error::Data("non-finite curvature".into()));
        }
        let a11 = ComplexField::from_raw(g.clone(), lj.torsion());
        let jw = Jet::new(calc, &real_values(&w));
        let imag_residue = (0..jw.f1.len())
            .map(|i| (jw.f11bar[i] + jw.f1bar1[i]).im.abs())
            .fold(0.0, f64::max);
        let lap_w = ScalarField::from_raw(g.clone(), flowed_lap(&lj, &jw));
        let w1 = ComplexField::from_raw(
            g,
            jw.f1.iter().zip(self.lambda.values()).map(|(d, l)| d * (-l).exp()).collect(),
        );
        self.caches = Some(Caches { w, a11, w1, lap_w, imag_residue });
        Ok(())
    }

    fn caches(&self) -> Result<&Caches> {
        self.caches.as_ref().ok_or(Error::StaleCache)
    }

    pub fn w(&self) -> Result<&ScalarField> {
        Ok(&self.caches()?.w)
    }

    pub fn a11(&self) -> Result<&ComplexField> {
        Ok(&self.caches()?.a11)
    }

    /// Flowed (W,₁̄, W,₁).
    pub fn grad_w(&self) -> Result<(ComplexField, ComplexField)> {
        let w1 = &self.caches()?.w1;
        Ok((w1.conj(), w1.clone()))
    }

    /// Flowed W,₁ alone.
    pub fn w1(&self) -> Result<&ComplexField> {
        Ok(&self.caches()?.w1)
    }

    /// Flowed Δ_b W.
    pub fn lap_w(&self) -> Result<&ScalarField> {
        Ok(&self.caches()?.lap_w)
    }

    pub fn imag_residue(&self) -> Result<f64> {
        Ok(self.caches()?.imag_residue)
    }

    /// Spatial diagnostics of this state (time residuals left empty).
    pub fn diagnostics(&self) -> Result<DiagnosticsRecord> {
        let c = self.caches()?;
        let w0 = self.calc.reeb_derivative(&self.lambda, &c.w)?;
        let w11 = self.calc.flowed_hessian11(&self.lambda, &c.w)?;
        let (q, q0) = self.calc.cartan_parts(&self.lambda)?;
        Ok(DiagnosticsRecord {
            max_abs_a11: c.a11.max_abs(),
            max_abs_w0: w0.max_abs(),
            max_abs_w11: w11.max_abs(),
            max_abs_q11: q.max_abs(),
            max_abs_q11_torsion_free: q0.max_abs(),
            res_2_7: None,
            res_2_8: None,
            res_2_12: None,
            imag_residue: c.imag_residue,
            hessian_convention: HESSIAN_CONVENTION.to_string(),
        })
    }

    /// Writes `<stem>.json` plus binary blocks for λ, W and A₁₁.
    pub fn write_snapshot(
        &self,
        dir: impl AsRef<Path>,
        stem: &str,
        params: Option<Section5Params>,
    ) -> Result<PathBuf> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let c = self.caches()?;
        let header = SnapshotHeader {
            t: self.t,
            grid: self.calc.grid().dims(),
            fd_order: self.calc.fd_order(),
            params,
            lambda: format!("{stem}_lambda.bin"),
            w: format!("{stem}_w.bin"),
            a11: format!("{stem}_a11.bin"),
        };
        self.lambda.save(dir.join(&header.lambda))?;
        c.w.save(dir.join(&header.w))?;
        c.a11.save(dir.join(&header.a11))?;
        let path = dir.join(format!("{stem}.json"));
        std::fs::write(&path, serde_json::to_string_pretty(&header)?)?;
        Ok(path)
    }

    /// Reads a snapshot header and rebuilds the state from its λ block.
    pub fn read_snapshot(path: impl AsRef<Path>, calc: Arc<FrameCalculus>) -> Result<Self> {
        let (header, lambda) = read_snapshot_lambda(path, calc.grid().clone())?;
        Self::new(calc, lambda, header.t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub t: f64,
    pub grid: GridDims,
    pub fd_order: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Section5Params>,
    pub lambda: String,
    pub w: String,
    pub a11: String,
}

pub fn read_snapshot_header(path: impl AsRef<Path>) -> Result<SnapshotHeader> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// Header and λ of a snapshot, without rebuilding derived fields.
pub fn read_snapshot_lambda(
    path: impl AsRef<Path>,
    grid: Arc<crate::sphere::HopfGrid>,
) -> Result<(SnapshotHeader, ScalarField)> {
    let path = path.as_ref();
    let header = read_snapshot_header(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let lambda = field::load(dir.join(&header.lambda))?.into_scalar(grid)?;
    Ok((header, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::build_grid;

    fn calc(n: usize) -> Arc<FrameCalculus> {
        Arc::new(FrameCalculus::new(Arc::new(build_grid(n, n, n).unwrap())))
    }

    #[test]
    fn standard_sphere() {
        let c = calc(8);
        let zero = ScalarField::constant(c.grid().clone(), 0.0);
        let w = c.webster_curvature(&zero).unwrap();
        assert!(w.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!(c.torsion(&zero).unwrap().max_abs() < 1e-14);
        assert!(c.cartan_q11(&zero).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn constant_shift_scales_curvature() {
        let c = calc(8);
        let cst = ScalarField::constant(c.grid().clone(), -(2.0f64).ln());
        let w = c.webster_curvature(&cst).unwrap();
        assert!(w.values().iter().all(|v| (v - 4.0).abs() < 1e-12));
    }

    #[test]
    fn stale_caches_are_reported() {
        let c = calc(8);
        let zero = ScalarField::constant(c.grid().clone(), 0.0);
        let mut s = PseudohermitianState::new(c.clone(), zero.clone(), 0.0).unwrap();
        assert!(s.w().is_ok());
        s.set_lambda(zero, 0.1).unwrap();
        assert!(matches!(s.w(), Err(Error::StaleCache)));
        assert!(matches!(s.diagnostics(), Err(Error::StaleCache)));
        s.rebuild().unwrap();
        assert!(s.w().is_ok());
    }

    #[test]
    fn snapshot_round_trip() {
        let c = calc(8);
        let lam = ScalarField::from_fn(c.grid().clone(), |p| 0.1 * p.z1().re);
        let s = PseudohermitianState::new(c.clone(), lam, 0.125).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = s.write_snapshot(dir.path(), "snap_0001", None).unwrap();
        let back = PseudohermitianState::read_snapshot(&path, c).unwrap();
        assert_eq!(back.t(), 0.125);
        assert_eq!(back.lambda().values(), s.lambda().values());
        assert_eq!(back.w().unwrap().values(), s.w().unwrap().values());
    }
}
