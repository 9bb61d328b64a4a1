//! Exact polynomial oracle in z₁, z₂, z̄₁, z̄₂.
//!
//! Coefficients live in Q(i, √2) so that the 1/√2 of the frame is carried
//! exactly. Frame vector fields act as first-order polynomial operators:
//!
//! ```text
//! Ẑ₁ = (z̄₁∂₂ − z̄₂∂₁)/√2,  Ẑ₁̄ = (z₁∂̄₂ − z₂∂̄₁)/√2,  T̂ = (i/2)(z·∂ − z̄·∂̄)
//! ```
//!
//! All three are tangent to S³, so acting on a polynomial extension gives
//! the derivative of its restriction.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::calculus::Direction;
use crate::error::{Error, Result};
use crate::sphere::SpherePoint;

pub type QI = Complex<BigRational>;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn qi(re: BigRational, im: BigRational) -> QI {
    Complex::new(re, im)
}

fn qi_zero() -> QI {
    Complex::new(BigRational::zero(), BigRational::zero())
}

fn qi_to_c64(x: &QI) -> Complex64 {
    Complex64::new(x.re.to_f64().unwrap_or(f64::NAN), x.im.to_f64().unwrap_or(f64::NAN))
}

/// Exact number a + b√2 with a, b ∈ Q(i).
#[derive(Clone, PartialEq, Eq)]
pub struct QI2 {
    pub a: QI,
    pub b: QI,
}

impl fmt::Debug for QI2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}i) + ({} + {}i)√2", self.a.re, self.a.im, self.b.re, self.b.im)
    }
}

impl QI2 {
    pub fn zero() -> Self {
        Self { a: qi_zero(), b: qi_zero() }
    }

    pub fn one() -> Self {
        Self::rational(BigRational::one())
    }

    pub fn rational(r: BigRational) -> Self {
        Self { a: qi(r, BigRational::zero()), b: qi_zero() }
    }

    pub fn from_qi(a: QI) -> Self {
        Self { a, b: qi_zero() }
    }

    pub fn int(n: i64) -> Self {
        Self::rational(q(n, 1))
    }

    pub fn i() -> Self {
        Self::from_qi(qi(BigRational::zero(), BigRational::one()))
    }

    pub fn sqrt2() -> Self {
        Self { a: qi_zero(), b: qi(BigRational::one(), BigRational::zero()) }
    }

    /// 1/√2 = √2/2.
    pub fn inv_sqrt2() -> Self {
        Self { a: qi_zero(), b: qi(q(1, 2), BigRational::zero()) }
    }

    /// Exact binary value of a finite float.
    pub fn from_f64(x: f64) -> Result<Self> {
        BigRational::from_float(x)
            .map(Self::rational)
            .ok_or_else(|| Error::Parameter(format!("{x} is not finite")))
    }

    pub fn from_c64(z: Complex64) -> Result<Self> {
        let re = BigRational::from_float(z.re);
        let im = BigRational::from_float(z.im);
        match (re, im) {
            (Some(re), Some(im)) => Ok(Self::from_qi(qi(re, im))),
            _ => Err(Error::Parameter(format!("{z} is not finite"))),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }

    pub fn conj(&self) -> Self {
        Self { a: self.a.conj(), b: self.b.conj() }
    }

    /// Multiplicative inverse via (a + b√2)(a − b√2) = a² − 2b².
    pub fn inv(&self) -> Result<Self> {
        let two = qi(q(2, 1), BigRational::zero());
        let norm = &self.a * &self.a - &two * &self.b * &self.b;
        if norm.is_zero() {
            return Err(Error::Data("division by zero in exact arithmetic".into()));
        }
        let ninv = qi_inv(&norm);
        Ok(Self { a: &self.a * &ninv, b: -(&self.b * &ninv) })
    }

    pub fn to_c64(&self) -> Complex64 {
        qi_to_c64(&self.a) + qi_to_c64(&self.b) * std::f64::consts::SQRT_2
    }

    /// Exact real part when the value is real, i.e. has no imaginary part.
    pub fn is_real(&self) -> bool {
        self.a.im.is_zero() && self.b.im.is_zero()
    }

    /// Sign of a real value a + b√2.
    pub fn real_sign(&self) -> Option<i32> {
        if !self.is_real() {
            return None;
        }
        let (a, b) = (&self.a.re, &self.b.re);
        let sgn = |x: &BigRational| if x.is_zero() { 0 } else if x.is_positive() { 1 } else { -1 };
        let (sa, sb) = (sgn(a), sgn(b));
        if sa == 0 || sb == 0 || sa == sb {
            return Some(if sa != 0 { sa } else { sb });
        }
        // opposite signs: compare a² with 2b²
        let lhs = a * a;
        let rhs = q(2, 1) * b * b;
        Some(if lhs == rhs { 0 } else if lhs > rhs { sa } else { sb })
    }
}

fn qi_inv(z: &QI) -> QI {
    let n = &z.re * &z.re + &z.im * &z.im;
    qi(&z.re / &n, -(&z.im / &n))
}

impl Add for &QI2 {
    type Output = QI2;
    fn add(self, o: &QI2) -> QI2 {
        QI2 { a: &self.a + &o.a, b: &self.b + &o.b }
    }
}

impl Sub for &QI2 {
    type Output = QI2;
    fn sub(self, o: &QI2) -> QI2 {
        QI2 { a: &self.a - &o.a, b: &self.b - &o.b }
    }
}

impl Mul for &QI2 {
    type Output = QI2;
    fn mul(self, o: &QI2) -> QI2 {
        let two = qi(q(2, 1), BigRational::zero());
        QI2 {
            a: &self.a * &o.a + &two * &self.b * &o.b,
            b: &self.a * &o.b + &self.b * &o.a,
        }
    }
}

impl Neg for &QI2 {
    type Output = QI2;
    fn neg(self) -> QI2 {
        QI2 { a: -self.a.clone(), b: -self.b.clone() }
    }
}

macro_rules! owned_ops {
    ($($tr:ident $m:ident),*) => {$(
        impl $tr for QI2 {
            type Output = QI2;
            fn $m(self, o: QI2) -> QI2 { (&self).$m(&o) }
        }
    )*};
}
owned_ops!(Add add, Sub sub, Mul mul);

/// Exponents of z₁, z₂, z̄₁, z̄₂.
pub type Monomial = [u32; 4];

/// Sparse polynomial with exact coefficients.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct PolyField {
    terms: BTreeMap<Monomial, QI2>,
}

impl fmt::Debug for PolyField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.terms.iter()).finish()
    }
}

/// A point of S³ with exact coordinates (z₁, z₂, z̄₁, z̄₂).
#[derive(Clone, Debug)]
pub struct ExactPoint {
    pub vars: [QI2; 4],
}

impl ExactPoint {
    /// Inverse stereographic image of (x₁, x₂, x₃) ∈ Q³; always exactly on S³.
    pub fn stereographic(x: [BigRational; 3]) -> Self {
        let s = &x[0] * &x[0] + &x[1] * &x[1] + &x[2] * &x[2];
        let den = &s + BigRational::one();
        let two = q(2, 1);
        let z1 = qi(&two * &x[0] / &den, &two * &x[1] / &den);
        let z2 = qi(&two * &x[2] / &den, (&s - BigRational::one()) / &den);
        let z1 = QI2::from_qi(z1);
        let z2 = QI2::from_qi(z2);
        Self { vars: [z1.clone(), z2.clone(), z1.conj(), z2.conj()] }
    }

    pub fn norm_sq(&self) -> QI2 {
        &(&self.vars[0] * &self.vars[2]) + &(&self.vars[1] * &self.vars[3])
    }

    pub fn to_point(&self) -> Result<SpherePoint> {
        SpherePoint::project(self.vars[0].to_c64(), self.vars[1].to_c64())
    }
}

impl PolyField {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: QI2) -> Self {
        Self::monomial([0; 4], c)
    }

    pub fn monomial(m: Monomial, c: QI2) -> Self {
        let mut p = Self::zero();
        p.push(m, c);
        p
    }

    fn var(i: usize) -> Self {
        let mut m = [0; 4];
        m[i] = 1;
        Self::monomial(m, QI2::one())
    }

    pub fn z1() -> Self {
        Self::var(0)
    }

    pub fn z2() -> Self {
        Self::var(1)
    }

    pub fn z1bar() -> Self {
        Self::var(2)
    }

    pub fn z2bar() -> Self {
        Self::var(3)
    }

    /// Re z₁ = (z₁ + z̄₁)/2.
    pub fn re_z1() -> Self {
        (&Self::z1() + &Self::z1bar()).scale(&QI2::rational(q(1, 2)))
    }

    /// |z₁|².
    pub fn norm_z1() -> Self {
        &Self::z1() * &Self::z1bar()
    }

    fn push(&mut self, m: Monomial, c: QI2) {
        if c.is_zero() {
            return;
        }
        let e = self.terms.entry(m).or_insert_with(QI2::zero);
        *e = &*e + &c;
        if e.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &QI2)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.iter().sum()).max().unwrap_or(0)
    }

    pub fn scale(&self, c: &QI2) -> Self {
        let mut p = Self::zero();
        for (m, v) in &self.terms {
            p.push(*m, v * c);
        }
        p
    }

    /// Complex conjugate: swaps z and z̄ and conjugates coefficients.
    pub fn conj(&self) -> Self {
        let mut p = Self::zero();
        for (m, v) in &self.terms {
            p.push([m[2], m[3], m[0], m[1]], v.conj());
        }
        p
    }

    /// ∂/∂(variable i), treating the four variables as independent.
    pub fn partial(&self, i: usize) -> Self {
        let mut p = Self::zero();
        for (m, v) in &self.terms {
            if m[i] == 0 {
                continue;
            }
            let mut e = *m;
            e[i] -= 1;
            p.push(e, v * &QI2::int(m[i] as i64));
        }
        p
    }

    /// Exact application of Ẑ₁, Ẑ₁̄ or T̂.
    pub fn frame_derivative(&self, dir: Direction) -> Self {
        let s = QI2::inv_sqrt2();
        match dir {
            Direction::Z1 => (&(&Self::z1bar() * &self.partial(1)) - &(&Self::z2bar() * &self.partial(0))).scale(&s),
            Direction::Z1bar => (&(&Self::z1() * &self.partial(3)) - &(&Self::z2() * &self.partial(2))).scale(&s),
            Direction::T => {
                let hol = &(&Self::z1() * &self.partial(0)) + &(&Self::z2() * &self.partial(1));
                let anti = &(&Self::z1bar() * &self.partial(2)) + &(&Self::z2bar() * &self.partial(3));
                (&hol - &anti).scale(&(&QI2::i() * &QI2::rational(q(1, 2))))
            }
        }
    }

    /// Δ̂_b f = Ẑ₁̄Ẑ₁f + Ẑ₁Ẑ₁̄f.
    pub fn sublaplacian(&self) -> Self {
        &self.frame_derivative(Direction::Z1).frame_derivative(Direction::Z1bar)
            + &self.frame_derivative(Direction::Z1bar).frame_derivative(Direction::Z1)
    }

    /// Reduces modulo |z₁|² + |z₂|² − 1 by eliminating z₂z̄₂. The result
    /// agrees with `self` on S³ and is unique, so two polynomials agree on
    /// the sphere iff their reductions are equal.
    pub fn reduce_on_sphere(&self) -> Self {
        let mut out = Self::zero();
        for (m, v) in &self.terms {
            let k = m[1].min(m[3]);
            // (z₂z̄₂)^k = (1 − z₁z̄₁)^k
            let mut binom = BigInt::one();
            for j in 0..=k {
                let sign = if j % 2 == 0 { 1 } else { -1 };
                let c = v * &QI2::rational(BigRational::from_integer(&binom * sign));
                out.push([m[0] + j, m[1] - k, m[2] + j, m[3] - k], c);
                binom = binom * BigInt::from(k - j) / BigInt::from(j + 1);
            }
        }
        out
    }

    pub fn eval_exact(&self, p: &ExactPoint) -> QI2 {
        let mut acc = QI2::zero();
        for (m, v) in &self.terms {
            let mut t = v.clone();
            for (i, e) in m.iter().enumerate() {
                for _ in 0..*e {
                    t = &t * &p.vars[i];
                }
            }
            acc = &acc + &t;
        }
        acc
    }

    pub fn eval(&self, p: &SpherePoint) -> Complex64 {
        let vars = [p.z1(), p.z2(), p.z1().conj(), p.z2().conj()];
        self.terms
            .iter()
            .map(|(m, v)| {
                let mut t = v.to_c64();
                for (i, e) in m.iter().enumerate() {
                    t *= vars[i].powu(*e);
                }
                t
            })
            .sum()
    }
}

impl Add for &PolyField {
    type Output = PolyField;
    fn add(self, o: &PolyField) -> PolyField {
        let mut p = self.clone();
        for (m, v) in &o.terms {
            p.push(*m, v.clone());
        }
        p
    }
}

impl Sub for &PolyField {
    type Output = PolyField;
    fn sub(self, o: &PolyField) -> PolyField {
        let mut p = self.clone();
        for (m, v) in &o.terms {
            p.push(*m, -v);
        }
        p
    }
}

impl Mul for &PolyField {
    type Output = PolyField;
    fn mul(self, o: &PolyField) -> PolyField {
        let mut p = PolyField::zero();
        for (m, v) in &self.terms {
            for (n, w) in &o.terms {
                p.push([m[0] + n[0], m[1] + n[1], m[2] + n[2], m[3] + n[3]], v * w);
            }
        }
        p
    }
}

/// λ = −½ ln G for a polynomial G positive on S³, with exact pointwise
/// evaluation of the derived quantities.
#[derive(Clone, Debug)]
pub struct LogPolyLambda {
    g: PolyField,
    z1g: PolyField,
    z1z1g: PolyField,
    lap_g: PolyField,
}

impl LogPolyLambda {
    pub fn new(g: PolyField) -> Self {
        let z1g = g.frame_derivative(Direction::Z1);
        let z1z1g = z1g.frame_derivative(Direction::Z1);
        let lap_g = g.sublaplacian();
        Self { g, z1g, z1z1g, lap_g }
    }

    pub fn g(&self) -> &PolyField {
        &self.g
    }

    /// λ,₁ = −Ẑ₁G / (2G).
    pub fn lambda_1(&self, p: &ExactPoint) -> Result<QI2> {
        let g = self.g.eval_exact(p);
        Ok(&(&self.z1g.eval_exact(p) * &g.inv()?) * &QI2::rational(q(-1, 2)))
    }

    /// λ,₁₁ = Ẑ₁Ẑ₁λ.
    pub fn lambda_11(&self, p: &ExactPoint) -> Result<QI2> {
        let g = self.g.eval_exact(p);
        let gi = g.inv()?;
        let z1g = self.z1g.eval_exact(p);
        let t1 = &self.z1z1g.eval_exact(p) * &gi;
        let t2 = &(&z1g * &z1g) * &(&gi * &gi);
        Ok(&(&t1 - &t2) * &QI2::rational(q(-1, 2)))
    }

    /// λ,₁₁ − 2(λ,₁)², the torsion-free residual.
    pub fn torsion_free_residual(&self, p: &ExactPoint) -> Result<QI2> {
        let l1 = self.lambda_1(p)?;
        Ok(&self.lambda_11(p)? - &(&QI2::int(2) * &(&l1 * &l1)))
    }

    /// W = e^{−2λ}(−4Δ̂λ − 8|λ,₁|² + 1) = 2Δ̂G − 6|Ẑ₁G|²/G + G.
    pub fn webster(&self, p: &ExactPoint) -> Result<QI2> {
        let g = self.g.eval_exact(p);
        let z1g = self.z1g.eval_exact(p);
        let grad2 = &z1g * &z1g.conj();
        let t = &(&QI2::int(6) * &grad2) * &g.inv()?;
        Ok(&(&(&QI2::int(2) * &self.lap_g.eval_exact(p)) - &t) + &g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts() -> Vec<ExactPoint> {
        [[1, 2, 3], [-1, 0, 2], [3, -2, 1], [0, 0, 0]]
            .iter()
            .map(|x| ExactPoint::stereographic([q(x[0], 3), q(x[1], 5), q(x[2], 7)]))
            .collect()
    }

    #[test]
    fn stereographic_points_are_exactly_on_sphere() {
        for p in pts() {
            assert_eq!(p.norm_sq(), QI2::one());
        }
    }

    #[test]
    fn qi2_inverse() {
        let x = &(&QI2::int(3) + &QI2::sqrt2()) + &QI2::i();
        assert_eq!(&x * &x.inv().unwrap(), QI2::one());
        assert_eq!(&QI2::sqrt2() * &QI2::inv_sqrt2(), QI2::one());
        assert!(QI2::zero().inv().is_err());
    }

    #[test]
    fn real_sign_of_surds() {
        let x = &QI2::int(-1) + &QI2::sqrt2();
        assert_eq!(x.real_sign(), Some(1));
        let y = &QI2::int(2) - &(&QI2::int(2) * &QI2::sqrt2());
        assert_eq!(y.real_sign(), Some(-1));
    }

    #[test]
    fn frame_on_coordinates() {
        let s = QI2::inv_sqrt2();
        assert_eq!(PolyField::z2().frame_derivative(Direction::Z1), PolyField::z1bar().scale(&s));
        assert_eq!(PolyField::z1().frame_derivative(Direction::Z1), PolyField::z2bar().scale(&(-&s)));
        // tangency
        let r = &(&PolyField::z1() * &PolyField::z1bar()) + &(&PolyField::z2() * &PolyField::z2bar());
        for d in [Direction::Z1, Direction::Z1bar, Direction::T] {
            assert!(r.frame_derivative(d).is_zero());
        }
    }

    #[test]
    fn sublaplacian_identities() {
        let half = QI2::rational(q(-1, 2));
        assert_eq!(PolyField::re_z1().sublaplacian(), PolyField::re_z1().scale(&half));
        let n1 = PolyField::norm_z1();
        let n2 = &PolyField::z2() * &PolyField::z2bar();
        assert_eq!(n1.sublaplacian().reduce_on_sphere(), (&n2 - &n1).reduce_on_sphere());
    }

    #[test]
    fn reduction_eliminates_the_sphere_relation() {
        let r = &(&PolyField::z1() * &PolyField::z1bar()) + &(&PolyField::z2() * &PolyField::z2bar());
        assert_eq!(r.reduce_on_sphere(), PolyField::constant(QI2::one()));
    }

    #[test]
    fn log_lambda_of_constant() {
        let l = LogPolyLambda::new(PolyField::constant(QI2::int(4)));
        for p in pts() {
            assert_eq!(l.webster(&p).unwrap(), QI2::int(4));
            assert!(l.torsion_free_residual(&p).unwrap().is_zero());
        }
    }
}
