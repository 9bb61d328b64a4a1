//! Torsion-free initial data λ = −ln|az₁ + bz₂ + c| and the exact oracles.

use std::sync::Arc;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calculus::{Direction, FrameCalculus};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::poly::{ExactPoint, LogPolyLambda, PolyField, QI2};
use crate::sphere::{HopfGrid, SpherePoint};

/// Parameters (a, b, c); JSON form `{"a":[re,im],"b":[re,im],"c":[re,im]}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section5Params {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
}

impl Section5Params {
    pub fn new(a: Complex64, b: Complex64, c: Complex64) -> Result<Self> {
        let p = Self { a, b, c };
        p.validate()?;
        Ok(p)
    }

    pub fn real(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(a.into(), b.into(), c.into())
    }

    /// |c| > √(|a|² + |b|²), which keeps az₁ + bz₂ + c away from zero on S³.
    pub fn validate(&self) -> Result<()> {
        let finite = [self.a, self.b, self.c].iter().all(|z| z.is_finite());
        if !finite {
            return Err(Error::Parameter("a, b, c must be finite".into()));
        }
        let ab = (self.a.norm_sqr() + self.b.norm_sqr()).sqrt();
        if self.c.norm() <= ab {
            return Err(Error::Parameter(format!(
                "need |c| > sqrt(|a|^2 + |b|^2); got |c| = {}, sqrt(|a|^2 + |b|^2) = {ab}",
                self.c.norm()
            )));
        }
        Ok(())
    }

    pub fn denominator(&self, p: &SpherePoint) -> Complex64 {
        self.a * p.z1() + self.b * p.z2() + self.c
    }

    /// G = |az₁ + bz₂ + c|² as an exact polynomial (λ = −½ ln G).
    pub fn g_poly(&self) -> Result<PolyField> {
        let a = PolyField::constant(QI2::from_c64(self.a)?);
        let b = PolyField::constant(QI2::from_c64(self.b)?);
        let c = PolyField::constant(QI2::from_c64(self.c)?);
        let g = &(&(&a * &PolyField::z1()) + &(&b * &PolyField::z2())) + &c;
        Ok(&g * &g.conj())
    }
}

pub fn section5_lambda(p: &Section5Params, grid: &Arc<HopfGrid>) -> Result<ScalarField> {
    p.validate()?;
    ScalarField::new(grid.clone(), grid.points().map(|x| -p.denominator(&x).norm().ln()).collect())
}

/// Pointwise value of the printed closed form
/// W = −(3|z₁|²+2|z₂|²)|a|² − (3|z₂|²+2|z₁|²)|b|² − (ab̄z₁z̄₂ + āb z̄₁z₂)
///     − c(āz̄₁ + b̄z̄₂) − c̄(az₁ + bz₂) + |c|².
pub fn section5_w_formula(p: &Section5Params, x: &SpherePoint) -> f64 {
    let (z1, z2) = (x.z1(), x.z2());
    let (n1, n2) = (z1.norm_sqr(), z2.norm_sqr());
    let (a, b, c) = (p.a, p.b, p.c);
    let w = -(3.0 * n1 + 2.0 * n2) * a.norm_sqr() - (3.0 * n2 + 2.0 * n1) * b.norm_sqr()
        - (a * b.conj() * z1 * z2.conj() + a.conj() * b * z1.conj() * z2)
        - c * (a.conj() * z1.conj() + b.conj() * z2.conj())
        - c.conj() * (a * z1 + b * z2)
        + c.norm_sqr();
    w.re
}

/// The printed curvature formula sampled on the grid.
pub fn section5_w_oracle(p: &Section5Params, grid: &Arc<HopfGrid>) -> Result<ScalarField> {
    p.validate()?;
    ScalarField::new(grid.clone(), grid.points().map(|x| section5_w_formula(p, &x)).collect())
}

/// Curvature of λ = −ln|az₁ + bz₂ + c| computed exactly from the
/// transformation law: the constant |c|² − |a|² − |b|².
///
/// The printed formula above does not agree with this; see
/// [`exact_curvature_at`] for a pointwise exact check.
pub fn section5_w_closed_form(p: &Section5Params) -> f64 {
    p.c.norm_sqr() - p.a.norm_sqr() - p.b.norm_sqr()
}

/// W at exact points, in exact arithmetic.
pub fn exact_curvature_at(p: &Section5Params, points: &[ExactPoint]) -> Result<Vec<QI2>> {
    let l = LogPolyLambda::new(p.g_poly()?);
    points.iter().map(|x| l.webster(x)).collect()
}

/// Rational sample points of S³ (inverse stereographic images of small
/// rational triples).
pub fn rational_sample_points(seed: u64, count: usize) -> Vec<ExactPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut x = || BigRational::new(BigInt::from(rng.gen_range(-12i64..=12)), BigInt::from(rng.gen_range(1i64..=7)));
            ExactPoint::stereographic([x(), x(), x()])
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorsionFreeReport {
    /// max |λ,₁₁ − 2(λ,₁)²| with hatted discrete derivatives.
    pub residual_5_1: f64,
    /// max |A₁₁| from the torsion transformation law.
    pub max_abs_a11: f64,
}

pub fn verify_torsion_free(
    p: &Section5Params,
    calc: &FrameCalculus,
) -> Result<TorsionFreeReport> {
    let lambda = section5_lambda(p, calc.grid())?;
    let l1 = calc.frame_derivative(&lambda, Direction::Z1)?;
    let l11 = calc.covariant_second(&lambda)?.f11;
    let residual_5_1 = l11
        .values()
        .iter()
        .zip(l1.values())
        .fold(0.0f64, |m, (a, b)| m.max((a - 2.0 * b * b).norm()));
    let max_abs_a11 = calc.torsion(&lambda)?.max_abs();
    Ok(TorsionFreeReport { residual_5_1, max_abs_a11 })
}

/// The torsion-free residual λ,₁₁ − 2(λ,₁)² at exact points, in exact
/// arithmetic.
pub fn exact_torsion_free_residual(p: &Section5Params, points: &[ExactPoint]) -> Result<Vec<QI2>> {
    let l = LogPolyLambda::new(p.g_poly()?);
    points.iter().map(|x| l.torsion_free_residual(x)).collect()
}

pub fn poly_frame_derivative(f: &PolyField, dir: Direction) -> PolyField {
    f.frame_derivative(dir)
}

pub const MAX_RANDOM_DEGREE: u32 = 4;

/// A real polynomial P + P̄ with reproducible small rational coefficients.
pub fn random_real_poly(seed: u64, max_degree: u32) -> Result<PolyField> {
    if max_degree > MAX_RANDOM_DEGREE {
        return Err(Error::Parameter(format!(
            "max_degree must be at most {MAX_RANDOM_DEGREE} (got {max_degree})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = PolyField::zero();
    let d = max_degree;
    for e0 in 0..=d {
        for e1 in 0..=d - e0 {
            for e2 in 0..=d - e0 - e1 {
                for e3 in 0..=d - e0 - e1 - e2 {
                    let re = BigRational::new(BigInt::from(rng.gen_range(-8i64..=8)), BigInt::from(16));
                    let im = BigRational::new(BigInt::from(rng.gen_range(-8i64..=8)), BigInt::from(16));
                    let c = QI2::from_qi(num_complex::Complex::new(re, im));
                    p = &p + &PolyField::monomial([e0, e1, e2, e3], c);
                }
            }
        }
    }
    Ok(&p + &p.conj())
}

/// Random real polynomial field, returned sampled and exact.
pub fn random_smooth_field(
    seed: u64,
    max_degree: u32,
    grid: &Arc<HopfGrid>,
) -> Result<(ScalarField, PolyField)> {
    let poly = random_real_poly(seed, max_degree)?;
    let sampled = ScalarField::new(grid.clone(), grid.points().map(|x| poly.eval(&x).re).collect())?;
    Ok((sampled, poly))
}
