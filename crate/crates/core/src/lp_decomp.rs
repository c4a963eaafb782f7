//! Littlewood–Paley blocks `Δ_j`, the low part `S₀`, and the Besov and
//! Sobolev norms built from them.

use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::{apply_lattice_multiplier, lp_norm, Field, GridSpec};

fn mollifier<T: Real>(u: T) -> T {
    if u > T::zero() {
        (-u.recip()).exp()
    } else {
        T::zero()
    }
}

/// Radial cutoff: 1 on `[0, 1]`, 0 on `[2, ∞)`, smooth and decreasing
/// in between.
pub fn chi<T: Real>(rho: T) -> T {
    let two = T::lit(2.0);
    if rho <= T::one() {
        return T::one();
    }
    if rho >= two {
        return T::zero();
    }
    let a = mollifier(two - rho);
    let b = mollifier(rho - T::one());
    a / (a + b)
}

/// `Φ(ρ) = chi(ρ) - chi(2ρ)`, supported in `[1/2, 2]`.
pub fn phi<T: Real>(rho: T) -> T {
    (chi(rho) - chi(rho * T::lit(2.0))).max(T::zero())
}

/// Dyadic annuli `j_min..=j_max` covering every nonzero lattice frequency.
#[derive(Debug, Clone, Copy)]
pub struct DyadicDecomposition<T> {
    pub grid: GridSpec<T>,
    pub j_min: i32,
    pub j_max: i32,
}

pub fn build_decomposition<T: Real>(grid: &GridSpec<T>) -> DyadicDecomposition<T> {
    let lo = grid.min_nonzero_frequency().log2().floor();
    let hi = grid.max_frequency_norm().log2().ceil();
    DyadicDecomposition {
        grid: *grid,
        j_min: lo.to_i32().unwrap_or(i32::MIN / 2),
        j_max: hi.to_i32().unwrap_or(i32::MAX / 2),
    }
}

impl<T: Real> DyadicDecomposition<T> {
    pub fn contains(&self, j: i32) -> bool {
        (self.j_min..=self.j_max).contains(&j)
    }

    fn check(&self, j: i32) -> Result<()> {
        if self.contains(j) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "block index {j} outside active range [{}, {}]",
                self.j_min, self.j_max
            )))
        }
    }

    /// `Φ(2^{-j}ξ)` on the lattice.
    pub fn block_multiplier(&self, j: i32) -> Result<Vec<Complex<T>>> {
        self.check(j)?;
        let scale = T::lit(2.0).powi(-j);
        Ok(self
            .grid
            .map_frequencies(|xi| Complex::new(phi(crate::spectral::norm(xi) * scale), T::zero())))
    }

    /// `chi(ξ)` on the lattice.
    pub fn low_multiplier(&self) -> Vec<Complex<T>> {
        self.grid
            .map_frequencies(|xi| Complex::new(chi(crate::spectral::norm(xi)), T::zero()))
    }

    /// Indices summed in the Besov norm alongside `S₀`.
    pub fn high_blocks(&self) -> std::ops::RangeInclusive<i32> {
        self.j_min.max(1)..=self.j_max
    }
}

pub fn block<T: Real>(f: &Field<T>, j: i32, d: &DyadicDecomposition<T>) -> Result<Field<T>> {
    f.grid.ensure_same(&d.grid)?;
    apply_lattice_multiplier(f, &d.block_multiplier(j)?)
}

pub fn low_part<T: Real>(f: &Field<T>, d: &DyadicDecomposition<T>) -> Result<Field<T>> {
    f.grid.ensure_same(&d.grid)?;
    apply_lattice_multiplier(f, &d.low_multiplier())
}

/// `(j, ‖Δ_j f‖_q)` for every high block, in increasing `j`.
pub fn energy_table<T: Real>(f: &Field<T>, q: T, d: &DyadicDecomposition<T>) -> Result<Vec<(i32, T)>> {
    d.high_blocks()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|j| Ok((j, lp_norm(&block(f, j, d)?, q)?)))
        .collect()
}

/// `‖S₀f‖_q + (Σ_{j≥1} ‖Δ_j f‖_q^q)^{1/q}`.
pub fn besov_norm0<T: Real>(f: &Field<T>, q: T, d: &DyadicDecomposition<T>) -> Result<T> {
    if !(q >= T::one()) {
        return Err(Error::InvalidArgument(format!("Besov index q must be >= 1, got {q}")));
    }
    let low = lp_norm(&low_part(f, d)?, q)?;
    let high = energy_table(f, q, d)?
        .into_iter()
        .map(|(_, v)| v.powf(q))
        .sum::<T>()
        .powf(q.recip());
    Ok(low + high)
}

/// `‖(1 - Δ)^{α/2} f‖_p`.
pub fn sobolev_norm<T: Real>(f: &Field<T>, alpha: T, p: T) -> Result<T> {
    let half = alpha / T::lit(2.0);
    let m = f.grid.map_frequencies(|xi| {
        let r2 = xi.iter().fold(T::zero(), |a, &v| a + v * v);
        Complex::new((T::one() + r2).powf(half), T::zero())
    });
    lp_norm(&apply_lattice_multiplier(f, &m)?, p)
}

pub fn write_energy_csv<T: Real, W: Write>(table: &[(i32, T)], mut w: W) -> std::io::Result<()> {
    writeln!(w, "j,norm")?;
    for (j, v) in table {
        writeln!(w, "{j},{v:e}")?;
    }
    Ok(())
}
