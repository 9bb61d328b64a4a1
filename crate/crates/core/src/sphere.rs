//! Points, Hopf-coordinate grids and the standard pseudohermitian frame of S³ ⊂ C².
//!
//! Conventions used everywhere else in the crate:
//!
//! * Hopf coordinates `(η, ξ₁, ξ₂)` with `z₁ = cos η·e^{iξ₁}`, `z₂ = sin η·e^{iξ₂}`,
//!   `η ∈ (0, π/2)`, `ξ₁, ξ₂ ∈ [0, 2π)`.
//! * Standard contact form `θ̂ = i(σ − σ̄)`, `σ = z₁dz̄₁ + z₂dz̄₂`, which in Hopf
//!   coordinates reads `θ̂ = 2(cos²η dξ₁ + sin²η dξ₂)`.
//! * Frame `Ẑ₁ = (z̄₁∂₂ − z̄₂∂₁)/√2`, Reeb field `T̂ = (i/2)(z·∂ − z̄·∂̄) = ½(∂_{ξ₁} + ∂_{ξ₂})`.
//! * Volume form `θ̂ ∧ dθ̂ = 8 sin η cos η dη dξ₁ dξ₂` (absolute value), so the
//!   total volume of S³ is `16π²`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Total volume of S³ under `|θ̂ ∧ dθ̂|`.
pub const SPHERE_VOLUME: f64 = 16.0 * PI * PI;

/// Smallest admissible node count along every Hopf direction.
pub const MIN_NODES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpherePoint {
    z1: Complex64,
    z2: Complex64,
}

impl SpherePoint {
    /// Projects a nonzero point of C² radially onto the sphere.
    pub fn project(z1: Complex64, z2: Complex64) -> Result<Self> {
        let r = (z1.norm_sqr() + z2.norm_sqr()).sqrt();
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::Data(format!(
                "cannot project ({z1}, {z2}) onto S³"
            )));
        }
        Ok(Self {
            z1: z1 / r,
            z2: z2 / r,
        })
    }

    pub fn from_hopf(eta: f64, xi1: f64, xi2: f64) -> Self {
        Self {
            z1: Complex64::from_polar(eta.cos(), xi1),
            z2: Complex64::from_polar(eta.sin(), xi2),
        }
    }

    /// Hopf coordinates `(η, ξ₁, ξ₂)` with angles in `[0, 2π)`. On the degenerate
    /// circles the undefined angle is reported as 0.
    pub fn hopf(&self) -> (f64, f64, f64) {
        let eta = self.z2.norm().atan2(self.z1.norm());
        let wrap = |a: f64| a.rem_euclid(TAU);
        (eta, wrap(self.z1.arg()), wrap(self.z2.arg()))
    }

    pub fn z1(&self) -> Complex64 {
        self.z1
    }

    pub fn z2(&self) -> Complex64 {
        self.z2
    }

    pub fn coords(&self) -> [Complex64; 2] {
        [self.z1, self.z2]
    }

    pub fn norm_defect(&self) -> f64 {
        (self.z1.norm_sqr() + self.z2.norm_sqr() - 1.0).abs()
    }

    /// Chordal distance in C² = R⁴.
    pub fn chordal_distance(&self, other: &SpherePoint) -> f64 {
        ((self.z1 - other.z1).norm_sqr() + (self.z2 - other.z2).norm_sqr()).sqrt()
    }

    /// `(−z̄₂, z̄₁)`: the unit complex direction spanning the contact plane at this point.
    pub fn horizontal_direction(&self) -> [Complex64; 2] {
        [-self.z2.conj(), self.z1.conj()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridDims {
    pub n_eta: usize,
    pub n_xi1: usize,
    pub n_xi2: usize,
}

impl GridDims {
    pub fn new(n_eta: usize, n_xi1: usize, n_xi2: usize) -> Self {
        Self {
            n_eta,
            n_xi1,
            n_xi2,
        }
    }

    pub fn len(&self) -> usize {
        self.n_eta * self.n_xi1 * self.n_xi2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [
            ("n_eta", self.n_eta),
            ("n_xi1", self.n_xi1),
            ("n_xi2", self.n_xi2),
        ] {
            if n < MIN_NODES {
                return Err(Error::Config(format!(
                    "{name} = {n} is below the minimum of {MIN_NODES}"
                )));
            }
        }
        for (name, n) in [("n_xi1", self.n_xi1), ("n_xi2", self.n_xi2)] {
            if n % 2 != 0 {
                return Err(Error::Config(format!("{name} = {n} must be even")));
            }
        }
        Ok(())
    }
}

impl std::str::FromStr for GridDims {
    type Err = Error;

    /// Parses `"n_eta,n_xi1,n_xi2"`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("bad grid spec {s:?}: {e}")))?;
        match parts.as_slice() {
            [a, b, c] => Ok(Self::new(*a, *b, *c)),
            _ => Err(Error::Config(format!(
                "grid spec {s:?} must have three comma-separated counts"
            ))),
        }
    }
}

/// Structured grid on S³: cell-centred in η, uniform and periodic in ξ₁, ξ₂.
///
/// Node `(k, j1, j2)` is stored at flat index `(k·n_xi1 + j1)·n_xi2 + j2`.
#[derive(Debug, Clone)]
pub struct HopfGrid {
    dims: GridDims,
    eta: Vec<f64>,
    xi1: Vec<f64>,
    xi2: Vec<f64>,
    /// Quadrature weight per η row (the ξ cell area is folded in).
    row_weight: Vec<f64>,
}

/// Validates the counts and builds the grid.
pub fn build_grid(n_eta: usize, n_xi1: usize, n_xi2: usize) -> Result<HopfGrid> {
    HopfGrid::new(GridDims::new(n_eta, n_xi1, n_xi2))
}

impl HopfGrid {
    pub fn new(dims: GridDims) -> Result<Self> {
        dims.validate()?;
        let h = FRAC_PI_2 / dims.n_eta as f64;
        let eta: Vec<f64> = (0..dims.n_eta).map(|k| (k as f64 + 0.5) * h).collect();
        let xi1 = (0..dims.n_xi1)
            .map(|j| TAU * j as f64 / dims.n_xi1 as f64)
            .collect();
        let xi2 = (0..dims.n_xi2)
            .map(|j| TAU * j as f64 / dims.n_xi2 as f64)
            .collect();
        // Exact cell integral of 8 sin η cos η over [kh, (k+1)h]; the rows
        // telescope to 4, so the weights sum to 16π² up to rounding.
        let cell = (TAU / dims.n_xi1 as f64) * (TAU / dims.n_xi2 as f64);
        let row_weight = (0..dims.n_eta)
            .map(|k| {
                let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
                4.0 * (b.sin().powi(2) - a.sin().powi(2)) * cell
            })
            .collect();
        Ok(Self {
            dims,
            eta,
            xi1,
            xi2,
            row_weight,
        })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn n_eta(&self) -> usize {
        self.dims.n_eta
    }

    pub fn n_xi1(&self) -> usize {
        self.dims.n_xi1
    }

    pub fn n_xi2(&self) -> usize {
        self.dims.n_xi2
    }

    pub fn row_len(&self) -> usize {
        self.dims.n_xi1 * self.dims.n_xi2
    }

    pub fn h_eta(&self) -> f64 {
        FRAC_PI_2 / self.dims.n_eta as f64
    }

    pub fn h_xi1(&self) -> f64 {
        TAU / self.dims.n_xi1 as f64
    }

    pub fn h_xi2(&self) -> f64 {
        TAU / self.dims.n_xi2 as f64
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn xi1(&self) -> &[f64] {
        &self.xi1
    }

    pub fn xi2(&self) -> &[f64] {
        &self.xi2
    }

    pub fn index(&self, k: usize, j1: usize, j2: usize) -> usize {
        (k * self.dims.n_xi1 + j1) * self.dims.n_xi2 + j2
    }

    pub fn unindex(&self, idx: usize) -> (usize, usize, usize) {
        let j2 = idx % self.dims.n_xi2;
        let rest = idx / self.dims.n_xi2;
        (rest / self.dims.n_xi1, rest % self.dims.n_xi1, j2)
    }

    pub fn coords(&self, idx: usize) -> (f64, f64, f64) {
        let (k, j1, j2) = self.unindex(idx);
        (self.eta[k], self.xi1[j1], self.xi2[j2])
    }

    pub fn point(&self, idx: usize) -> SpherePoint {
        let (eta, xi1, xi2) = self.coords(idx);
        SpherePoint::from_hopf(eta, xi1, xi2)
    }

    pub fn points(&self) -> impl Iterator<Item = SpherePoint> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    pub fn weight(&self, idx: usize) -> f64 {
        self.row_weight[self.unindex(idx).0]
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Quadrature of node values against `|θ̂ ∧ dθ̂|`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        let row = self.row_len();
        values
            .chunks(row)
            .zip(&self.row_weight)
            .map(|(chunk, w)| w * chunk.iter().sum::<f64>())
            .sum()
    }

    /// Smallest effective spacing of the horizontal operator: the η spacing, or
    /// the ξ spacing scaled by the `sin η cos η` factor that multiplies the
    /// principal ξ-part of the sublaplacian near the degenerate circles.
    pub fn h_min(&self) -> f64 {
        let k0 = self.eta[0];
        let polar = (k0.sin() * k0.cos()) * self.h_xi1().max(self.h_xi2());
        self.h_eta().min(polar)
    }
}

/// A complex vector `Σ holoⱼ ∂ⱼ + antiⱼ ∂̄ⱼ` at a point of C². Real vectors have
/// `anti = conj(holo)`; `holo` is then the velocity `ż`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexVector {
    pub holo: [Complex64; 2],
    pub anti: [Complex64; 2],
}

impl ComplexVector {
    pub fn real(holo: [Complex64; 2]) -> Self {
        Self {
            holo,
            anti: [holo[0].conj(), holo[1].conj()],
        }
    }

    pub fn conj(&self) -> Self {
        Self {
            holo: [self.anti[0].conj(), self.anti[1].conj()],
            anti: [self.holo[0].conj(), self.holo[1].conj()],
        }
    }

    /// Derivative of `|z₁|² + |z₂|²` along the vector at `p`.
    pub fn radial_derivative(&self, p: &SpherePoint) -> Complex64 {
        let z = p.coords();
        self.holo[0] * z[0].conj()
            + self.holo[1] * z[1].conj()
            + self.anti[0] * z[0]
            + self.anti[1] * z[1]
    }
}

/// The standard frame `(Ẑ₁, Ẑ₁̄, T̂)` at a point, with the forms it is dual to.
#[derive(Debug, Clone, Copy)]
pub struct FrameCoefficients {
    point: SpherePoint,
    pub z1: ComplexVector,
    pub z1bar: ComplexVector,
    pub t: ComplexVector,
}

pub fn frame_at(p: &SpherePoint) -> FrameCoefficients {
    let [z1, z2] = p.coords();
    let zhat = ComplexVector {
        holo: [-z2.conj() * FRAC_1_SQRT_2, z1.conj() * FRAC_1_SQRT_2],
        anti: [Complex64::new(0.0, 0.0); 2],
    };
    FrameCoefficients {
        point: *p,
        z1: zhat,
        z1bar: zhat.conj(),
        t: ComplexVector::real([I * z1 * 0.5, I * z2 * 0.5]),
    }
}

impl FrameCoefficients {
    pub fn point(&self) -> SpherePoint {
        self.point
    }

    /// `θ̂(V) = i Σ (zⱼ dz̄ⱼ − z̄ⱼ dzⱼ)(V)`.
    pub fn theta(&self, v: &ComplexVector) -> Complex64 {
        let z = self.point.coords();
        I * (z[0] * v.anti[0] + z[1] * v.anti[1] - z[0].conj() * v.holo[0] - z[1].conj() * v.holo[1])
    }

    /// `dθ̂(V, U) = 2i Σ dzⱼ ∧ dz̄ⱼ (V, U)`.
    pub fn dtheta(&self, v: &ComplexVector, u: &ComplexVector) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..2 {
            acc += v.holo[j] * u.anti[j] - u.holo[j] * v.anti[j];
        }
        2.0 * I * acc
    }

    /// `θ̂¹ = √2(z₁dz₂ − z₂dz₁)`.
    pub fn theta1(&self, v: &ComplexVector) -> Complex64 {
        let z = self.point.coords();
        std::f64::consts::SQRT_2 * (z[0] * v.holo[1] - z[1] * v.holo[0])
    }

    /// `ω̂₁¹ = −2(z̄₁dz₁ + z̄₂dz₂)`.
    pub fn connection(&self, v: &ComplexVector) -> Complex64 {
        let z = self.point.coords();
        -2.0 * (z[0].conj() * v.holo[0] + z[1].conj() * v.holo[1])
    }

    /// Coefficients of `Ẑ₁` on `(∂_η, ∂_{ξ₁}, ∂_{ξ₂})`:
    /// `e^{−i(ξ₁+ξ₂)}/(2√2) · (1, i tan η, −i cot η)`.
    pub fn z1_hopf(&self) -> [Complex64; 3] {
        let (eta, xi1, xi2) = self.point.hopf();
        let alpha = Complex64::from_polar(0.5 * FRAC_1_SQRT_2, -(xi1 + xi2));
        [alpha, alpha * I * eta.tan(), -alpha * I / eta.tan()]
    }

    /// Coefficients of `T̂` on `(∂_η, ∂_{ξ₁}, ∂_{ξ₂})`.
    pub fn t_hopf(&self) -> [f64; 3] {
        [0.0, 0.5, 0.5]
    }
}

/// Converts a vector given by Hopf-coordinate coefficients into C² components at `p`.
pub fn hopf_to_complex(p: &SpherePoint, c: [Complex64; 3]) -> ComplexVector {
    let (eta, xi1, xi2) = p.hopf();
    // ∂_η z₁ = −sin η e^{iξ₁}, ∂_{ξ₁} z₁ = i z₁, ∂_η z₂ = cos η e^{iξ₂}, ∂_{ξ₂} z₂ = i z₂.
    let dz1 = [
        Complex64::from_polar(-eta.sin(), xi1),
        I * p.z1(),
        Complex64::new(0.0, 0.0),
    ];
    let dz2 = [
        Complex64::from_polar(eta.cos(), xi2),
        Complex64::new(0.0, 0.0),
        I * p.z2(),
    ];
    let conj3 = |d: [Complex64; 3]| [d[0].conj(), d[1].conj(), d[2].conj()];
    let apply = |d: [Complex64; 3]| c[0] * d[0] + c[1] * d[1] + c[2] * d[2];
    ComplexVector {
        holo: [apply(dz1), apply(dz2)],
        anti: [apply(conj3(dz1)), apply(conj3(dz2))],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_point(rng: &mut ChaCha8Rng) -> SpherePoint {
        let mut c = || Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        SpherePoint::project(c(), c()).unwrap()
    }

    #[test]
    fn small_grid_embeds_on_sphere() {
        let grid = build_grid(4, 4, 4).unwrap();
        assert_eq!(grid.len(), 64);
        for p in grid.points() {
            assert!(p.norm_defect() <= 1e-12);
        }
    }

    #[test]
    fn weights_sum_to_volume() {
        let grid = build_grid(8, 8, 8).unwrap();
        let total: f64 = grid.weights().iter().sum();
        assert!((total - SPHERE_VOLUME).abs() <= 1e-10 * SPHERE_VOLUME, "{total}");
        assert!(grid.weights().iter().all(|w| *w > 0.0));
        let ones = vec![1.0; grid.len()];
        assert!((grid.integrate(&ones) - SPHERE_VOLUME).abs() <= 1e-10 * SPHERE_VOLUME);
    }

    #[test]
    fn rejects_small_or_odd_counts() {
        let err = build_grid(3, 4, 4).unwrap_err();
        assert!(err.to_string().contains("n_eta"), "{err}");
        assert!(build_grid(4, 5, 4).unwrap_err().to_string().contains("n_xi1"));
        assert!(build_grid(4, 4, 2).unwrap_err().to_string().contains("n_xi2"));
    }

    #[test]
    fn eta_nodes_avoid_degenerate_circles() {
        let grid = build_grid(6, 4, 4).unwrap();
        let h = grid.h_eta();
        for (k, e) in grid.eta().iter().enumerate() {
            assert!((e - (k as f64 + 0.5) * h).abs() < 1e-15);
            assert!(*e > 0.0 && *e < FRAC_PI_2);
        }
    }

    #[test]
    fn grid_spec_parses() {
        let d: GridDims = "16, 8,8".parse().unwrap();
        assert_eq!(d, GridDims::new(16, 8, 8));
        assert!("16,8".parse::<GridDims>().is_err());
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"n_eta":16,"n_xi1":8,"n_xi2":8}"#);
    }

    #[test]
    fn projection_round_trips_through_hopf() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let z1 = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let z2 = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let p = SpherePoint::project(z1, z2).unwrap();
            assert!(p.norm_defect() <= 1e-12);
            let (e, a, b) = p.hopf();
            let q = SpherePoint::from_hopf(e, a, b);
            assert!(p.chordal_distance(&q) <= 1e-12);
        }
        assert!(SpherePoint::project(Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)).is_err());
    }

    #[test]
    fn frame_applies_to_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let p = random_point(&mut rng);
            let f = frame_at(&p);
            // Ẑ₁ z₂ = z̄₁/√2, Ẑ₁ z₁ = −z̄₂/√2
            assert!((f.z1.holo[1] - p.z1().conj() * FRAC_1_SQRT_2).norm() < 1e-15);
            assert!((f.z1.holo[0] + p.z2().conj() * FRAC_1_SQRT_2).norm() < 1e-15);
            assert!(f.z1.radial_derivative(&p).norm() <= 1e-12);
            assert!(f.t.radial_derivative(&p).norm() <= 1e-12);
        }
    }

    #[test]
    fn reeb_field_normalisation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let p = random_point(&mut rng);
            let f = frame_at(&p);
            assert!((f.theta(&f.t) - 1.0).norm() <= 1e-10);
            // dθ̂(T̂, ·) vanishes on a basis of T_pS³.
            let e1 = ComplexVector::real([-p.z2().conj() * 0.5, p.z1().conj() * 0.5]);
            let e2 = ComplexVector::real([-p.z2().conj() * 0.5 * I, p.z1().conj() * 0.5 * I]);
            for v in [e1, e2, f.t] {
                assert!(f.dtheta(&f.t, &v).norm() <= 1e-10);
            }
            // The Hopf-coordinate form ½(∂ξ₁ + ∂ξ₂) is the same vector.
            let th = f.t_hopf();
            let t2 = hopf_to_complex(&p, [th[0].into(), th[1].into(), th[2].into()]);
            for j in 0..2 {
                assert!((t2.holo[j] - f.t.holo[j]).norm() < 1e-14);
            }
            // θ̂¹ is dual to Ẑ₁ and kills T̂ and Ẑ₁̄.
            assert!((f.theta1(&f.z1) - 1.0).norm() < 1e-14);
            assert!(f.theta1(&f.t).norm() < 1e-14);
            assert!(f.theta1(&f.z1bar).norm() < 1e-14);
        }
    }

    #[test]
    fn hopf_coefficients_reproduce_z1() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let p = random_point(&mut rng);
            let f = frame_at(&p);
            let v = hopf_to_complex(&p, f.z1_hopf());
            for j in 0..2 {
                assert!((v.holo[j] - f.z1.holo[j]).norm() < 1e-12);
                assert!(v.anti[j].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn connection_form_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let p = random_point(&mut rng);
            let f = frame_at(&p);
            assert!(f.connection(&f.z1).norm() <= 1e-10);
            assert!(f.connection(&f.z1bar).norm() <= 1e-10);
            assert!((f.connection(&f.t) + I).norm() <= 1e-10);
        }
    }

    #[test]
    fn structure_equation_on_frame() {
        // dθ̂ = i θ̂¹ ∧ θ̂¹̄ evaluated on (Ẑ₁, Ẑ₁̄) gives i.
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let p = random_point(&mut rng);
        let f = frame_at(&p);
        assert!((f.dtheta(&f.z1, &f.z1bar) - I).norm() < 1e-14);
    }

    #[test]
    fn frame_smooth_across_seam() {
        // The Hopf coefficients of Ẑ₁ are smooth in ξ: compare a derivative
        // straddling ξ = 0 with the same stencil in the interior.
        let eta = 0.6;
        let h = 1e-3;
        let coef = |xi: f64| frame_at(&SpherePoint::from_hopf(eta, xi, 0.3)).z1_hopf()[0];
        let seam = (coef(h) - coef(TAU - h)) / (2.0 * h);
        let inner = (coef(1.0 + h) - coef(1.0 - h)) / (2.0 * h);
        // |∂ξ α| = |α| everywhere.
        assert!((seam.norm() - inner.norm()).abs() < 1e-6);
    }
}
