//! Periodic sampling of `R^d`, discrete Fourier transforms in the symmetric
//! `(2π)^{-d/2}` convention, Fourier multipliers and Riemann-sum `L^p` norms.
//!
//! The domain is the torus `[-L, L)^d` sampled with `n` points per axis at
//! `x_m = -L + m h`, `h = 2L/n`. The dual lattice is `ξ_k = π k / L` with
//! `k ∈ [-n/2, n/2)`. Coefficients are stored in FFT order: the flat index
//! along one axis is `k mod n`.
//!
//! With `h^d` as the physical measure and `(π/L)^d` as the spectral one,
//! the discrete transforms approximate
//!
//! ```text
//! F f(ξ) = (2π)^{-d/2} ∫ e^{-i x·ξ} f(x) dx,   f(x) = (2π)^{-d/2} ∫ e^{i x·ξ} F f(ξ) dξ
//! ```
//!
//! and satisfy Plancherel exactly: `Σ|f|² h^d = Σ|F f|² (π/L)^d`.

use std::any::{Any, TypeId};
use std::collections::HashMap;
use std::io::{Read, Write};
use std::sync::{Arc, Mutex};

use num_complex::Complex;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftDirection, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAX_DIM: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec<T> {
    pub dim: usize,
    pub n: usize,
    pub half_extent: T,
}

impl<T: Real> GridSpec<T> {
    pub fn new(dim: usize, n: usize, half_extent: T) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidArgument(format!(
                "dimension must be in 1..={MAX_DIM}, got {dim}"
            )));
        }
        if n < 2 || !n.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "points per axis must be even and >= 2, got {n}"
            )));
        }
        if !(half_extent > T::zero()) || !half_extent.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "half extent must be positive, got {half_extent}"
            )));
        }
        Ok(GridSpec { dim, n, half_extent })
    }

    /// Total number of samples, `n^d`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> T {
        T::lit(2.0) * self.half_extent / T::from_usize_lossy(self.n)
    }

    /// Physical cell measure `h^d`.
    pub fn cell_measure(&self) -> T {
        self.spacing().powi(self.dim as i32)
    }

    /// Lattice spacing in frequency, `π / L`.
    pub fn freq_spacing(&self) -> T {
        T::PI() / self.half_extent
    }

    /// Spectral cell measure `(π/L)^d`.
    pub fn freq_measure(&self) -> T {
        self.freq_spacing().powi(self.dim as i32)
    }

    /// Largest per-axis lattice frequency magnitude, `π n / (2L)`.
    pub fn nyquist(&self) -> T {
        self.freq_spacing() * T::from_usize_lossy(self.n / 2)
    }

    /// Smallest nonzero lattice frequency magnitude, `π / L`.
    pub fn min_nonzero_frequency(&self) -> T {
        self.freq_spacing()
    }

    /// Largest lattice `|ξ|` (corner of the lattice cube).
    pub fn max_frequency_norm(&self) -> T {
        self.nyquist() * T::from_usize_lossy(self.dim).sqrt()
    }

    pub fn same_as(&self, other: &GridSpec<T>) -> bool {
        self.dim == other.dim && self.n == other.n && self.half_extent == other.half_extent
    }

    pub fn ensure_same(&self, other: &GridSpec<T>) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "(d={}, n={}, L={}) vs (d={}, n={}, L={})",
                self.dim, self.n, self.half_extent, other.dim, other.n, other.half_extent
            )))
        }
    }

    /// Per-axis flat indices of a sample, most significant axis first.
    pub fn axis_indices(&self, mut idx: usize, out: &mut [usize]) {
        for a in (0..self.dim).rev() {
            out[a] = idx % self.n;
            idx /= self.n;
        }
    }

    /// Signed lattice integer for an axis index in FFT order.
    #[inline]
    pub fn signed_mode(&self, i: usize) -> i64 {
        if i < self.n / 2 {
            i as i64
        } else {
            i as i64 - self.n as i64
        }
    }

    /// Physical coordinates of sample `idx`.
    pub fn position_at(&self, idx: usize, out: &mut [T]) {
        let mut ax = [0usize; MAX_DIM];
        self.axis_indices(idx, &mut ax);
        let h = self.spacing();
        for a in 0..self.dim {
            out[a] = -self.half_extent + h * T::from_usize_lossy(ax[a]);
        }
    }

    /// Lattice frequency of coefficient `idx`.
    pub fn frequency_at(&self, idx: usize, out: &mut [T]) {
        let mut ax = [0usize; MAX_DIM];
        self.axis_indices(idx, &mut ax);
        let dk = self.freq_spacing();
        for a in 0..self.dim {
            out[a] = dk * T::from_i64_lossy(self.signed_mode(ax[a]));
        }
    }

    pub fn frequency_norm_at(&self, idx: usize) -> T {
        let mut xi = [T::zero(); MAX_DIM];
        self.frequency_at(idx, &mut xi);
        norm(&xi[..self.dim])
    }

    /// Evaluate `f` at every lattice frequency (FFT order).
    pub fn map_frequencies<R, F>(&self, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(&[T]) -> R + Sync,
    {
        use rayon::prelude::*;
        (0..self.len())
            .into_par_iter()
            .map(|idx| {
                let mut xi = [T::zero(); MAX_DIM];
                self.frequency_at(idx, &mut xi);
                f(&xi[..self.dim])
            })
            .collect()
    }

    /// Evaluate `f` at every sample position.
    pub fn map_positions<R, F>(&self, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(&[T]) -> R + Sync,
    {
        use rayon::prelude::*;
        (0..self.len())
            .into_par_iter()
            .map(|idx| {
                let mut x = [T::zero(); MAX_DIM];
                self.position_at(idx, &mut x);
                f(&x[..self.dim])
            })
            .collect()
    }

    /// `(-1)^{Σ_a i_a}` for flat index `idx`; links the `x_0 = -L` origin
    /// shift to the plain DFT.
    #[inline]
    fn parity(&self, idx: usize) -> bool {
        let mut ax = [0usize; MAX_DIM];
        self.axis_indices(idx, &mut ax);
        ax[..self.dim].iter().sum::<usize>() % 2 == 1
    }
}

#[inline]
pub fn norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Physical-space samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    pub grid: GridSpec<T>,
    pub values: Vec<Complex<T>>,
}

/// Frequency-space coefficients in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField<T> {
    pub grid: GridSpec<T>,
    pub coeffs: Vec<Complex<T>>,
}

impl<T: Real> Field<T> {
    pub fn new(grid: GridSpec<T>, values: Vec<Complex<T>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} samples, grid needs {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::InvalidArgument("field contains non-finite samples".into()));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: GridSpec<T>) -> Self {
        Field {
            grid,
            values: vec![Complex::new(T::zero(), T::zero()); grid.len()],
        }
    }

    pub fn from_fn<F: Fn(&[T]) -> Complex<T> + Sync>(grid: GridSpec<T>, f: F) -> Self {
        Field {
            grid,
            values: grid.map_positions(f),
        }
    }

    pub fn from_real_fn<F: Fn(&[T]) -> T + Sync>(grid: GridSpec<T>, f: F) -> Self {
        Field {
            grid,
            values: grid.map_positions(|x| Complex::new(f(x), T::zero())),
        }
    }

    pub fn forward(&self) -> SpectralField<T> {
        forward_transform(self)
    }

    /// Riemann-sum mean over the torus.
    pub fn mean(&self) -> Complex<T> {
        let s = self
            .values
            .iter()
            .fold(Complex::new(T::zero(), T::zero()), |a, &v| a + v);
        s / T::from_usize_lossy(self.values.len())
    }

    /// Subtract the grid mean (projects out the zero mode exactly).
    pub fn remove_mean(&mut self) {
        let m = self.mean();
        for v in &mut self.values {
            *v = *v - m;
        }
    }

    pub fn scale(&self, c: T) -> Self {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|&v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &Field<T>) -> Result<Self> {
        self.grid.ensure_same(&other.grid)?;
        Ok(Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Field<T>) -> Result<Self> {
        self.add(&other.scale(-T::one()))
    }

    /// Largest `|Im f| / max|f|`.
    pub fn relative_imag_residue(&self) -> T {
        let max_abs = self.sup_norm();
        if max_abs == T::zero() {
            return T::zero();
        }
        self.values.iter().fold(T::zero(), |a, v| a.max(v.im.abs())) / max_abs
    }

    /// Drop the imaginary part.
    pub fn real_part(&self) -> Self {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| Complex::new(v.re, T::zero())).collect(),
        }
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |a, v| a.max(v.norm()))
    }

    /// Translate by `y` (result is `f(x - y)`), exactly, through the phase
    /// multiplier `e^{-i ξ·y}`.
    pub fn translate(&self, y: &[T]) -> Result<Self> {
        if y.len() != self.grid.dim {
            return Err(Error::InvalidArgument("shift vector has wrong dimension".into()));
        }
        let spec = self.forward();
        let shifted = apply_multiplier(&spec, |xi| {
            let phase = -xi.iter().zip(y).fold(T::zero(), |a, (&k, &s)| a + k * s);
            Complex::new(phase.cos(), phase.sin())
        })?;
        Ok(inverse_transform(&shifted))
    }

    /// Flat binary dump: magic `SPLF`, `u32` version, `u32 d`, `u32 n`,
    /// `f64 L`, then `n^d` little-endian `(f32 re, f32 im)` pairs.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(FIELD_MAGIC)?;
        w.write_all(&FIELD_VERSION.to_le_bytes())?;
        w.write_all(&(self.grid.dim as u32).to_le_bytes())?;
        w.write_all(&(self.grid.n as u32).to_le_bytes())?;
        w.write_all(&self.grid.half_extent.as_f64().to_le_bytes())?;
        for v in &self.values {
            w.write_all(&(v.re.as_f64() as f32).to_le_bytes())?;
            w.write_all(&(v.im.as_f64() as f32).to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let io = |e: std::io::Error| Error::Format(e.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != FIELD_MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4).map_err(io)?;
        let version = u32::from_le_bytes(b4);
        if version != FIELD_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        r.read_exact(&mut b4).map_err(io)?;
        let dim = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4).map_err(io)?;
        let n = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8).map_err(io)?;
        let half_extent = T::lit(f64::from_le_bytes(b8));
        let grid = GridSpec::new(dim, n, half_extent)?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            r.read_exact(&mut b4).map_err(io)?;
            let re = f32::from_le_bytes(b4);
            r.read_exact(&mut b4).map_err(io)?;
            let im = f32::from_le_bytes(b4);
            values.push(Complex::new(T::lit(re as f64), T::lit(im as f64)));
        }
        Field::new(grid, values)
    }

    /// CSV with header `index,re,im`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "index,re,im")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{i},{:e},{:e}", v.re, v.im)?;
        }
        Ok(())
    }
}

const FIELD_MAGIC: &[u8; 4] = b"SPLF";
const FIELD_VERSION: u32 = 1;

impl<T: Real> SpectralField<T> {
    pub fn zeros(grid: GridSpec<T>) -> Self {
        SpectralField {
            grid,
            coeffs: vec![Complex::new(T::zero(), T::zero()); grid.len()],
        }
    }

    pub fn inverse(&self) -> Field<T> {
        inverse_transform(self)
    }

    /// Spectral `ℓ²` norm with the `(π/L)^d` measure.
    pub fn l2_norm(&self) -> T {
        (self.coeffs.iter().fold(T::zero(), |a, c| a + c.norm_sqr()) * self.grid.freq_measure()).sqrt()
    }

    /// Pointwise product with precomputed lattice values.
    pub fn multiply(&self, values: &[Complex<T>]) -> Result<Self> {
        if values.len() != self.coeffs.len() {
            return Err(Error::GridMismatch(format!(
                "multiplier has {} values, spectrum has {}",
                values.len(),
                self.coeffs.len()
            )));
        }
        Ok(SpectralField {
            grid: self.grid,
            coeffs: self.coeffs.iter().zip(values).map(|(&c, &m)| c * m).collect(),
        })
    }

    /// Evaluate the trigonometric interpolant at arbitrary points.
    ///
    /// Direct summation, `O(n^d)` per point.
    pub fn evaluate_at(&self, points: &[Vec<T>]) -> Vec<Complex<T>> {
        use rayon::prelude::*;
        let d = self.grid.dim;
        let scale = (T::TAU()).powf(-T::lit(d as f64 / 2.0)) * self.grid.freq_measure();
        points
            .par_iter()
            .map(|x| {
                let mut acc = Complex::new(T::zero(), T::zero());
                let mut xi = [T::zero(); MAX_DIM];
                for (idx, &c) in self.coeffs.iter().enumerate() {
                    if c.re == T::zero() && c.im == T::zero() {
                        continue;
                    }
                    self.grid.frequency_at(idx, &mut xi);
                    let ph = xi[..d].iter().zip(x).fold(T::zero(), |a, (&k, &p)| a + k * p);
                    acc = acc + c * Complex::new(ph.cos(), ph.sin());
                }
                acc * scale
            })
            .collect()
    }
}

type PlanCache = Mutex<HashMap<(TypeId, usize, bool), Box<dyn Any + Send + Sync>>>;

static PLANS: Lazy<PlanCache> = Lazy::new(|| Mutex::new(HashMap::new()));

fn plan<T: Real>(n: usize, forward: bool) -> Arc<dyn Fft<T>> {
    let key = (TypeId::of::<T>(), n, forward);
    let mut cache = PLANS.lock().expect("fft plan cache poisoned");
    if let Some(p) = cache.get(&key) {
        return p.downcast_ref::<Arc<dyn Fft<T>>>().expect("plan cache type").clone();
    }
    let dir = if forward {
        FftDirection::Forward
    } else {
        FftDirection::Inverse
    };
    let p: Arc<dyn Fft<T>> = FftPlanner::<T>::new().plan_fft(n, dir);
    cache.insert(key, Box::new(p.clone()));
    p
}

/// Unnormalized d-dimensional DFT over a row-major `n^d` buffer.
fn fft_nd<T: Real>(grid: &GridSpec<T>, data: &mut [Complex<T>], forward: bool) {
    let n = grid.n;
    let fft = plan::<T>(n, forward);
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
    // Last axis is contiguous.
    fft.process_with_scratch(data, &mut scratch);
    if grid.dim == 1 {
        return;
    }
    let total = data.len();
    let mut line = vec![Complex::new(T::zero(), T::zero()); n];
    for axis in 0..grid.dim - 1 {
        let stride = n.pow((grid.dim - 1 - axis) as u32);
        let block = stride * n;
        for start in (0..total).step_by(block) {
            for offset in 0..stride {
                let base = start + offset;
                for (i, l) in line.iter_mut().enumerate() {
                    *l = data[base + i * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (i, l) in line.iter().enumerate() {
                    data[base + i * stride] = *l;
                }
            }
        }
    }
}

pub fn forward_transform<T: Real>(f: &Field<T>) -> SpectralField<T> {
    let grid = f.grid;
    let mut data = f.values.clone();
    fft_nd(&grid, &mut data, true);
    let scale = T::TAU().powf(-T::lit(grid.dim as f64 / 2.0)) * grid.cell_measure();
    for (idx, c) in data.iter_mut().enumerate() {
        let s = if grid.parity(idx) { -scale } else { scale };
        *c = *c * s;
    }
    SpectralField { grid, coeffs: data }
}

pub fn inverse_transform<T: Real>(spec: &SpectralField<T>) -> Field<T> {
    let grid = spec.grid;
    let mut data: Vec<Complex<T>> = spec
        .coeffs
        .iter()
        .enumerate()
        .map(|(idx, &c)| if grid.parity(idx) { -c } else { c })
        .collect();
    fft_nd(&grid, &mut data, false);
    let scale = T::TAU().powf(-T::lit(grid.dim as f64 / 2.0)) * grid.freq_measure();
    for v in &mut data {
        *v = *v * scale;
    }
    Field { grid, values: data }
}

/// Pointwise `m(ξ) · F(ξ)` over the lattice.
pub fn apply_multiplier<T, M>(spec: &SpectralField<T>, m: M) -> Result<SpectralField<T>>
where
    T: Real,
    M: Fn(&[T]) -> Complex<T> + Sync,
{
    let values = spec.grid.map_frequencies(&m);
    check_finite_multiplier(&spec.grid, &values)?;
    spec.multiply(&values)
}

/// Residual imaginary part (relative) below which the output of a real
/// input is treated as real.
fn real_output_threshold<T: Real>() -> T {
    T::lit(1e-10).max(T::epsilon() * T::lit(1e3))
}

/// Apply a lattice multiplier to `f`; a real input whose output is real
/// up to `1e-10` relative is returned as an exactly real field.
pub fn apply_lattice_multiplier<T: Real>(f: &Field<T>, values: &[Complex<T>]) -> Result<Field<T>> {
    let out = inverse_transform(&f.forward().multiply(values)?);
    let input_real = f.values.iter().all(|v| v.im == T::zero());
    if input_real && out.relative_imag_residue() < real_output_threshold() {
        Ok(out.real_part())
    } else {
        Ok(out)
    }
}

pub(crate) fn check_finite_multiplier<T: Real>(grid: &GridSpec<T>, values: &[Complex<T>]) -> Result<()> {
    if let Some(idx) = values.iter().position(|v| !v.re.is_finite() || !v.im.is_finite()) {
        let mut xi = [T::zero(); MAX_DIM];
        grid.frequency_at(idx, &mut xi);
        return Err(Error::Multiplier {
            xi: xi[..grid.dim].iter().map(|v| v.as_f64()).collect(),
        });
    }
    Ok(())
}

/// `(Σ |f|^p h^d)^{1/p}`.
pub fn lp_norm<T: Real>(f: &Field<T>, p: T) -> Result<T> {
    if !(p >= T::one()) {
        return Err(Error::InvalidArgument(format!("L^p norm needs p >= 1, got {p}")));
    }
    Ok(lp_norm_of_moduli(
        f.values.iter().map(|v| v.norm()),
        p,
        f.grid.cell_measure(),
    ))
}

pub(crate) fn lp_norm_of_moduli<T: Real, I: Iterator<Item = T>>(moduli: I, p: T, cell: T) -> T {
    let two = T::lit(2.0);
    let s = moduli.fold(T::zero(), |a, m| {
        if p == two {
            a + m * m
        } else if p == T::one() {
            a + m
        } else {
            a + m.powf(p)
        }
    });
    (s * cell).powf(p.recip())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid1(n: usize, l: f64) -> GridSpec<f64> {
        GridSpec::new(1, n, l).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(1, 7, 1.0).is_err());
        assert!(GridSpec::new(0, 8, 1.0).is_err());
        assert!(GridSpec::new(4, 8, 1.0).is_err());
        assert!(GridSpec::new(2, 8, -1.0).is_err());
        let g = grid1(64, 4.0);
        assert_relative_eq!(g.spacing() * 64.0, 8.0);
    }

    #[test]
    fn constant_field_is_pure_zero_mode() {
        let g = GridSpec::new(2, 16, 3.0).unwrap();
        let f = Field::from_real_fn(g, |_| 1.0);
        let spec = f.forward();
        for (i, c) in spec.coeffs.iter().enumerate() {
            if i == 0 {
                // (2π)^{-1} · (2L)^2 for d = 2
                assert_relative_eq!(c.re, 36.0 / std::f64::consts::TAU, epsilon = 1e-12);
            } else {
                assert!(c.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn single_harmonic_has_one_coefficient() {
        let l = 5.0;
        let g = grid1(32, l);
        let f = Field::from_fn(g, |x| {
            let ph = std::f64::consts::PI * x[0] / l;
            Complex::new(ph.cos(), ph.sin())
        });
        let spec = f.forward();
        for (i, c) in spec.coeffs.iter().enumerate() {
            if i == 1 {
                assert!(c.norm() > 1.0);
            } else {
                assert!(c.norm() < 1e-12, "index {i}: {c}");
            }
        }
    }

    #[test]
    fn gaussian_transform_matches_closed_form() {
        let g = grid1(256, 16.0);
        let f = Field::from_real_fn(g, |x: &[f64]| (-x[0] * x[0] / 2.0).exp());
        let spec = f.forward();
        for idx in 0..g.len() {
            let mut xi = [0.0];
            g.frequency_at(idx, &mut xi);
            if xi[0].abs() <= 4.0 {
                let exact = (-xi[0] * xi[0] / 2.0).exp();
                let c = spec.coeffs[idx];
                assert!(((c.re - exact) / exact).abs() < 1e-8, "xi={}", xi[0]);
                assert!(c.im.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_of_unit_coefficient_is_plane_wave() {
        let g = grid1(16, 2.0);
        let mut spec = SpectralField::zeros(g);
        spec.coeffs[3] = Complex::new(1.0, 0.0);
        let f = spec.inverse();
        let amp = (std::f64::consts::TAU).powf(-0.5) * g.freq_spacing();
        let mut x = [0.0];
        for idx in 0..g.len() {
            g.position_at(idx, &mut x);
            let ph = 3.0 * g.freq_spacing() * x[0];
            assert_relative_eq!(f.values[idx].re, amp * ph.cos(), epsilon = 1e-14);
            assert_relative_eq!(f.values[idx].im, amp * ph.sin(), epsilon = 1e-14);
        }
        assert_eq!(SpectralField::zeros(g).inverse().sup_norm(), 0.0);
    }

    #[test]
    fn derivative_multiplier() {
        let l = 4.0;
        let g = grid1(64, l);
        let k0 = 3.0 * std::f64::consts::PI / l;
        let f = Field::from_fn(g, |x| Complex::new((k0 * x[0]).cos(), (k0 * x[0]).sin()));
        let df = apply_multiplier(&f.forward(), |xi| Complex::new(0.0, xi[0]))
            .unwrap()
            .inverse();
        for (a, b) in df.values.iter().zip(&f.values) {
            let expect = Complex::new(0.0, k0) * b;
            assert!((a - expect).norm() < 1e-11);
        }
    }

    #[test]
    fn non_finite_multiplier_is_rejected() {
        let g = grid1(8, 1.0);
        let f = Field::from_real_fn(g, |x: &[f64]| x[0]);
        let err = apply_multiplier(&f.forward(), |xi| Complex::new(1.0 / xi[0], 0.0)).unwrap_err();
        assert!(matches!(err, Error::Multiplier { .. }));
    }

    #[test]
    fn lp_norms() {
        let g = grid1(1024, 16.0);
        let plateau = Field::from_real_fn(g, |x: &[f64]| if (-1.0..1.0).contains(&x[0]) { 1.0 } else { 0.0 });
        assert_relative_eq!(lp_norm(&plateau, 2.0).unwrap(), 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(lp_norm(&Field::zeros(g), 3.0).unwrap(), 0.0);
        let gauss = Field::from_real_fn(g, |x: &[f64]| (-x[0] * x[0] / 2.0).exp());
        assert_relative_eq!(
            lp_norm(&gauss, 2.0).unwrap(),
            std::f64::consts::PI.powf(0.25),
            epsilon = 1e-6
        );
        assert!(lp_norm(&gauss, 0.5).is_err());
    }

    #[test]
    fn plancherel_three_dimensions() {
        let g = GridSpec::new(3, 16, 4.0).unwrap();
        let f = Field::from_real_fn(g, |x: &[f64]| {
            (-(x[0] * x[0] + 2.0 * x[1] * x[1] + 0.5 * x[2] * x[2])).exp() * (1.0 + x[0])
        });
        let spec = f.forward();
        assert_relative_eq!(lp_norm(&f, 2.0).unwrap(), spec.l2_norm(), max_relative = 1e-12);
        let back = spec.inverse();
        for (a, b) in back.values.iter().zip(&f.values) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn translation_is_exact_for_lattice_shifts() {
        let g = grid1(64, 8.0);
        let f = Field::from_real_fn(g, |x: &[f64]| (-(x[0] - 0.3).powi(2)).exp());
        let h = g.spacing();
        let shifted = f.translate(&[3.0 * h]).unwrap();
        for i in 3..g.len() {
            assert!((shifted.values[i] - f.values[i - 3]).norm() < 1e-13);
        }
    }

    #[test]
    fn spectral_interpolation_reproduces_samples() {
        let g = grid1(64, 8.0);
        let f = Field::from_real_fn(g, |x: &[f64]| (-x[0] * x[0]).exp());
        let spec = f.forward();
        let v = spec.evaluate_at(&[vec![0.0], vec![0.123]]);
        assert!((v[0].re - 1.0).abs() < 1e-13);
        assert!((v[1].re - (-0.123f64 * 0.123).exp()).abs() < 1e-12);
    }

    #[test]
    fn binary_roundtrip() {
        let g = GridSpec::new(2, 8, 2.5).unwrap();
        let f = Field::from_real_fn(g, |x: &[f64]| x[0] - 0.5 * x[1]);
        let mut buf = Vec::new();
        f.write_binary(&mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 4 + 8 + 64 * 8);
        let back = Field::<f64>::read_binary(buf.as_slice()).unwrap();
        assert!(back.grid.same_as(&g));
        for (a, b) in back.values.iter().zip(&f.values) {
            assert!((a - b).norm() < 1e-5);
        }
        assert!(Field::<f64>::read_binary(&b"NOPE"[..]).is_err());
    }

    #[test]
    fn single_precision_roundtrip() {
        let g = GridSpec::<f32>::new(1, 128, 8.0).unwrap();
        let f = Field::from_real_fn(g, |x: &[f32]| (-x[0] * x[0]).exp());
        let back = f.forward().inverse();
        for (a, b) in back.values.iter().zip(&f.values) {
            assert!((a - b).norm() < 1e-5);
        }
    }
}
