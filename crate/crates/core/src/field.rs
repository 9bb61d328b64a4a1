//! Node-sampled fields on a [`HopfGrid`] and their on-disk formats.
//!
//! Binary layout (little endian):
//!
//! ```text
//! magic  b"CRYF"
//! u32    format version (1)
//! u32    kind: 0 = real, 1 = complex
//! u64    n_eta, n_xi1, n_xi2
//! f64... values in node order; complex values as (re, im) pairs
//! ```
//!
//! CSV layout: `node,eta,xi1,xi2,value` for real fields and
//! `node,eta,xi1,xi2,re,im` for complex fields.

use std::borrow::Cow;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sphere::{GridDims, HopfGrid, SpherePoint};

const MAGIC: &[u8; 4] = b"CRYF";
const VERSION: u32 = 1;

/// Anything that can be read as complex node values on a grid.
pub trait Field {
    fn grid(&self) -> &Arc<HopfGrid>;
    fn complex_values(&self) -> Cow<'_, [Complex64]>;
}

#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<HopfGrid>,
    values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ComplexField {
    grid: Arc<HopfGrid>,
    values: Vec<Complex64>,
}

fn check_len(grid: &HopfGrid, n: usize) -> Result<()> {
    if n != grid.len() {
        return Err(Error::Data(format!(
            "{n} values for a grid with {} nodes",
            grid.len()
        )));
    }
    Ok(())
}

impl ScalarField {
    pub fn new(grid: Arc<HopfGrid>, values: Vec<f64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    /// Builds a field without the finiteness check; used for intermediate
    /// results whose finiteness is checked by the caller.
    pub(crate) fn from_raw(grid: Arc<HopfGrid>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn constant(grid: Arc<HopfGrid>, value: f64) -> Self {
        let n = grid.len();
        Self::from_raw(grid, vec![value; n])
    }

    pub fn from_fn(grid: Arc<HopfGrid>, f: impl Fn(&SpherePoint) -> f64) -> Self {
        let values = grid.points().map(|p| f(&p)).collect();
        Self::from_raw(grid, values)
    }

    pub fn grid(&self) -> &Arc<HopfGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_raw(self.grid.clone(), self.values.iter().map(|v| f(*v)).collect())
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| f(*a, *b))
            .collect();
        Self::from_raw(self.grid.clone(), values)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Index and value of the smallest entry.
    pub fn argmin(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |(bi, bv), (i, v)| if v < bv { (i, v) } else { (bi, bv) })
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField::from_raw(
            self.grid.clone(),
            self.values.iter().map(|v| Complex64::new(*v, 0.0)).collect(),
        )
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "node,eta,xi1,xi2,value")?;
        for (i, v) in self.values.iter().enumerate() {
            let (e, a, b) = self.grid.coords(i);
            writeln!(w, "{i},{e:.17e},{a:.17e},{b:.17e},{v:.17e}")?;
        }
        Ok(())
    }

    pub fn write_binary(&self, w: impl Write) -> Result<()> {
        write_binary(w, self.grid.dims(), 0, self.values.iter().copied())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_binary(std::fs::File::create(path)?)
    }
}

impl ComplexField {
    pub fn new(grid: Arc<HopfGrid>, values: Vec<Complex64>) -> Result<Self> {
        check_len(&grid, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value at node {i}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_raw(grid: Arc<HopfGrid>, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: Arc<HopfGrid>) -> Self {
        let n = grid.len();
        Self::from_raw(grid, vec![Complex64::new(0.0, 0.0); n])
    }

    pub fn from_fn(grid: Arc<HopfGrid>, f: impl Fn(&SpherePoint) -> Complex64) -> Self {
        let values = grid.points().map(|p| f(&p)).collect();
        Self::from_raw(grid, values)
    }

    pub fn grid(&self) -> &Arc<HopfGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_raw(self.grid.clone(), self.values.iter().map(|v| f(*v)).collect())
    }

    pub fn zip_map(&self, other: &ComplexField, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| f(*a, *b))
            .collect();
        Self::from_raw(self.grid.clone(), values)
    }

    pub fn re(&self) -> ScalarField {
        ScalarField::from_raw(self.grid.clone(), self.values.iter().map(|v| v.re).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn max_abs_im(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    pub fn max_abs_diff(&self, other: &ComplexField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        writeln!(w, "node,eta,xi1,xi2,re,im")?;
        for (i, v) in self.values.iter().enumerate() {
            let (e, a, b) = self.grid.coords(i);
            writeln!(w, "{i},{e:.17e},{a:.17e},{b:.17e},{:.17e},{:.17e}", v.re, v.im)?;
        }
        Ok(())
    }

    pub fn write_binary(&self, w: impl Write) -> Result<()> {
        write_binary(
            w,
            self.grid.dims(),
            1,
            self.values.iter().flat_map(|v| [v.re, v.im]),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_binary(std::fs::File::create(path)?)
    }
}

impl Field for ScalarField {
    fn grid(&self) -> &Arc<HopfGrid> {
        &self.grid
    }

    fn complex_values(&self) -> Cow<'_, [Complex64]> {
        Cow::Owned(self.values.iter().map(|v| Complex64::new(*v, 0.0)).collect())
    }
}

impl Field for ComplexField {
    fn grid(&self) -> &Arc<HopfGrid> {
        &self.grid
    }

    fn complex_values(&self) -> Cow<'_, [Complex64]> {
        Cow::Borrowed(&self.values)
    }
}

fn write_binary(
    w: impl Write,
    dims: GridDims,
    kind: u32,
    values: impl Iterator<Item = f64>,
) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&kind.to_le_bytes())?;
    for n in [dims.n_eta, dims.n_xi1, dims.n_xi2] {
        w.write_all(&(n as u64).to_le_bytes())?;
    }
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// A field read back from the binary format.
#[derive(Debug, Clone)]
pub enum StoredField {
    Real(GridDims, Vec<f64>),
    Complex(GridDims, Vec<Complex64>),
}

impl StoredField {
    pub fn dims(&self) -> GridDims {
        match self {
            StoredField::Real(d, _) | StoredField::Complex(d, _) => *d,
        }
    }

    pub fn into_scalar(self, grid: Arc<HopfGrid>) -> Result<ScalarField> {
        match self {
            StoredField::Real(d, v) if d == grid.dims() => ScalarField::new(grid, v),
            StoredField::Real(d, _) => Err(Error::Usage(format!(
                "stored field has dims {d:?}, grid has {:?}",
                grid.dims()
            ))),
            StoredField::Complex(..) => Err(Error::Data("expected a real field".into())),
        }
    }

    pub fn into_complex(self, grid: Arc<HopfGrid>) -> Result<ComplexField> {
        match self {
            StoredField::Complex(d, v) if d == grid.dims() => ComplexField::new(grid, v),
            StoredField::Complex(d, _) => Err(Error::Usage(format!(
                "stored field has dims {d:?}, grid has {:?}",
                grid.dims()
            ))),
            StoredField::Real(..) => Err(Error::Data("expected a complex field".into())),
        }
    }
}

pub fn read_binary(r: impl Read) -> Result<StoredField> {
    let mut r = std::io::BufReader::new(r);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Data("not a field file (bad magic)".into()));
    }
    let mut u4 = [0u8; 4];
    r.read_exact(&mut u4)?;
    let version = u32::from_le_bytes(u4);
    if version != VERSION {
        return Err(Error::Data(format!("unsupported field format version {version}")));
    }
    r.read_exact(&mut u4)?;
    let kind = u32::from_le_bytes(u4);
    let mut u8b = [0u8; 8];
    let mut dims = [0usize; 3];
    for d in &mut dims {
        r.read_exact(&mut u8b)?;
        *d = u64::from_le_bytes(u8b) as usize;
    }
    let dims = GridDims::new(dims[0], dims[1], dims[2]);
    let count = dims.len() * if kind == 1 { 2 } else { 1 };
    let mut raw = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut u8b)?;
        raw.push(f64::from_le_bytes(u8b));
    }
    match kind {
        0 => Ok(StoredField::Real(dims, raw)),
        1 => Ok(StoredField::Complex(
            dims,
            raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect(),
        )),
        k => Err(Error::Data(format!("unknown field kind {k}"))),
    }
}

pub fn load(path: impl AsRef<Path>) -> Result<StoredField> {
    read_binary(std::fs::File::open(path)?)
}

pub(crate) fn same_grid(a: &HopfGrid, b: &HopfGrid) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Usage(format!(
            "fields live on different grids ({:?} vs {:?})",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::build_grid;

    #[test]
    fn rejects_wrong_length_and_nan() {
        let g = Arc::new(build_grid(4, 4, 4).unwrap());
        assert!(ScalarField::new(g.clone(), vec![0.0; 3]).is_err());
        let mut v = vec![0.0; 64];
        v[7] = f64::NAN;
        let err = ScalarField::new(g, v).unwrap_err();
        assert!(err.to_string().contains("node 7"));
    }

    #[test]
    fn binary_round_trip() {
        let g = Arc::new(build_grid(4, 6, 4).unwrap());
        let f = ScalarField::from_fn(g.clone(), |p| p.z1().re + 2.0 * p.z2().im);
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"CRYF");
        assert_eq!(buf.len(), 4 + 4 + 4 + 24 + 8 * g.len());
        let back = read_binary(&buf[..]).unwrap().into_scalar(g.clone()).unwrap();
        assert_eq!(back.values(), f.values());

        let c = ComplexField::from_fn(g.clone(), |p| p.z1() * p.z2().conj());
        let mut buf = Vec::new();
        c.write_binary(&mut buf).unwrap();
        let back = read_binary(&buf[..]).unwrap().into_complex(g).unwrap();
        assert_eq!(back.values(), c.values());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let g = Arc::new(build_grid(4, 4, 4).unwrap());
        let f = ScalarField::constant(g, 1.5);
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("node,eta,xi1,xi2,value"));
        assert_eq!(lines.count(), 64);
    }

    #[test]
    fn mismatched_dims_are_usage_errors() {
        let g = Arc::new(build_grid(4, 4, 4).unwrap());
        let g2 = Arc::new(build_grid(6, 4, 4).unwrap());
        let f = ScalarField::constant(g, 0.0);
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert!(matches!(
            read_binary(&buf[..]).unwrap().into_scalar(g2),
            Err(Error::Usage(_))
        ));
    }
}
