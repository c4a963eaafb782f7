//! Numerical checks of kernel estimates: spatial and temporal decay of
//! `∇K`, the Hörmander integral, dyadic `L¹` envelopes, and a
//! principal-value evaluation of the fractional Laplacian.

use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{kernel_from_multiplier, ComposedOperator, TimeIntegralRule};
use crate::gfunction::TimeWindow;
use crate::lp_decomp::DyadicDecomposition;
use crate::quadrature::GaussLegendre;
use crate::scalar::Real;
use crate::spectral::{apply_lattice_multiplier, inverse_transform, Field, GridSpec, SpectralField, MAX_DIM};
use crate::symbols::SymbolSpec;

/// Values below this fraction of the largest one are treated as round-off.
pub const NOISE_FLOOR: f64 = 1e-13;

/// Least-squares line through `(x, y)`: `(slope, intercept)`.
pub fn fit_line<T: Real>(xs: &[T], ys: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(xs.len());
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (&x, &y) in xs.iter().zip(ys) {
        sxy = sxy + (x - mx) * (y - my);
        sxx = sxx + (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn kernel_scale<T: Real>(grid: &GridSpec<T>) -> T {
    T::TAU().powf(-T::lit(grid.dim as f64 / 2.0))
}

/// `∂_{x_i}` of the kernel of `L_{ψ₁}(l) T_{ψ₂}(t, s)`, and `|∇K|`.
#[derive(Debug, Clone)]
pub struct GradientKernel<T> {
    pub components: Vec<Field<T>>,
    pub magnitude: Field<T>,
    /// Kernel-normalized spectra of the components, for off-grid evaluation.
    pub spectra: Vec<SpectralField<T>>,
}

impl<T: Real> GradientKernel<T> {
    /// `|∇K|` at arbitrary points by spectral interpolation.
    pub fn magnitude_at(&self, points: &[Vec<T>]) -> Vec<T> {
        let mut acc = vec![T::zero(); points.len()];
        for spec in &self.spectra {
            for (a, v) in acc.iter_mut().zip(spec.evaluate_at(points)) {
                *a = *a + v.norm_sqr();
            }
        }
        acc.into_iter().map(|v| v.sqrt()).collect()
    }
}

fn gradient_from_multiplier<T: Real>(grid: &GridSpec<T>, m: &[Complex<T>]) -> GradientKernel<T> {
    let scale = kernel_scale(grid);
    let spectra: Vec<SpectralField<T>> = (0..grid.dim)
        .map(|axis| {
            let ik = grid.map_frequencies(|xi| Complex::new(T::zero(), xi[axis] * scale));
            SpectralField {
                grid: *grid,
                coeffs: ik.iter().zip(m).map(|(a, b)| a * b).collect(),
            }
        })
        .collect();
    let components: Vec<Field<T>> = spectra.iter().map(inverse_transform).collect();
    let magnitude = Field {
        grid: *grid,
        values: (0..grid.len())
            .map(|i| {
                let s = components.iter().fold(T::zero(), |a, c| a + c.values[i].norm_sqr());
                Complex::new(s.sqrt(), T::zero())
            })
            .collect(),
    };
    GradientKernel {
        components,
        magnitude,
        spectra,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn gradient_kernel<T: Real>(
    psi1: &SymbolSpec<T>,
    l: T,
    psi2: &SymbolSpec<T>,
    s: T,
    t: T,
    grid: &GridSpec<T>,
) -> Result<GradientKernel<T>> {
    let op = ComposedOperator::new(grid, Some((psi1, l)), psi2, s, TimeIntegralRule::default_for(psi2))?;
    Ok(gradient_from_multiplier(grid, &op.multiplier(t)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFitReport<T> {
    pub fitted_exponent: T,
    pub target_exponent: T,
    pub fit_window: (T, T),
    pub fitted_constant: T,
    /// `max(measured / bound) - 1` over the window, with the fitted constant.
    pub max_pointwise_excess: T,
    /// `(r or t, measured)` samples used for the fit.
    pub samples: Vec<(T, T)>,
}

impl<T: Real> DecayFitReport<T> {
    pub fn relative_exponent_error(&self) -> T {
        ((self.fitted_exponent - self.target_exponent) / self.target_exponent).abs()
    }

    /// Columns `x, measured, bound`.
    pub fn write_csv<W: Write>(&self, label: &str, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{label},measured,bound")?;
        for &(x, v) in &self.samples {
            let bound = self.fitted_constant * x.powf(self.target_exponent);
            writeln!(w, "{x:e},{v:e},{bound:e}")?;
        }
        Ok(())
    }
}

fn octaves<T: Real>(lo: T, hi: T) -> T {
    (hi / lo).log2()
}

/// Fit of `|∇K(t, x)|` against `|x|^{-(d+1+γ₁)}` over `r_lo ≤ |x| ≤ r_hi`
/// (default `[L/32, L/4]`, away from the periodic images).
#[allow(clippy::too_many_arguments)]
pub fn decay_fit_space<T: Real>(
    psi1: &SymbolSpec<T>,
    l: T,
    psi2: &SymbolSpec<T>,
    s: T,
    t: T,
    grid: &GridSpec<T>,
    window: Option<(T, T)>,
) -> Result<DecayFitReport<T>> {
    let (r_lo, r_hi) = window.unwrap_or((grid.half_extent / T::lit(32.0), grid.half_extent / T::lit(4.0)));
    if !(r_lo > T::zero()) || octaves(r_lo, r_hi) < T::lit(3.0) {
        return Err(Error::Audit(format!(
            "spatial fit window [{r_lo}, {r_hi}] must span at least 3 octaves"
        )));
    }
    if r_hi > grid.half_extent || r_lo < T::lit(4.0) * grid.spacing() {
        return Err(Error::Audit(format!(
            "spatial fit window [{r_lo}, {r_hi}] not resolved by grid with L = {}, h = {}",
            grid.half_extent,
            grid.spacing()
        )));
    }
    let gk = gradient_kernel(psi1, l, psi2, s, t, grid)?;
    let target = -(T::from_usize_lossy(grid.dim) + T::one() + psi1.gamma);
    let peak = gk.magnitude.sup_norm();
    let mut samples = Vec::new();
    let mut x = [T::zero(); MAX_DIM];
    for i in 0..grid.len() {
        grid.position_at(i, &mut x);
        let r = crate::spectral::norm(&x[..grid.dim]);
        if r >= r_lo && r <= r_hi {
            samples.push((r, gk.magnitude.values[i].re));
        }
    }
    samples.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite radii"));
    let floor = peak * T::lit(NOISE_FLOOR);
    let (lx, ly): (Vec<T>, Vec<T>) = samples
        .iter()
        .filter(|&&(_, v)| v > floor)
        .map(|&(r, v)| (r.ln(), v.ln()))
        .unzip();
    let fitted_exponent = if lx.len() >= 2 {
        fit_line(&lx, &ly).0
    } else {
        // Entire tail below round-off: faster than any power.
        T::neg_infinity()
    };
    let fitted_constant = samples.iter().fold(T::zero(), |m, &(r, v)| m.max(v * r.powf(-target)));
    let max_pointwise_excess = samples.iter().fold(T::neg_infinity(), |m, &(r, v)| {
        let bound = fitted_constant * r.powf(target);
        if bound > T::zero() {
            m.max(v / bound - T::one())
        } else {
            m
        }
    });
    Ok(DecayFitReport {
        fitted_exponent,
        target_exponent: target,
        fit_window: (r_lo, r_hi),
        fitted_constant,
        max_pointwise_excess,
        samples,
    })
}

/// `sup_x |∇K|`; in one dimension the grid maximum is refined by
/// golden-section search on the spectral interpolant.
pub fn sup_gradient<T: Real>(gk: &GradientKernel<T>) -> T {
    let grid = gk.magnitude.grid;
    let (imax, vmax) =
        gk.magnitude.values.iter().enumerate().fold(
            (0, T::neg_infinity()),
            |acc, (i, v)| if v.re > acc.1 { (i, v.re) } else { acc },
        );
    if grid.dim != 1 {
        return vmax;
    }
    let mut x = [T::zero()];
    grid.position_at(imax, &mut x);
    let h = grid.spacing();
    let f = |p: T| gk.magnitude_at(&[vec![p]])[0];
    let ratio = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let (mut a, mut b) = (x[0] - h, x[0] + h);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..40 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    vmax.max(fc).max(fd)
}

/// Regression of `log sup_x |∇K(t, ·)|` on `log(t - s)`, target
/// `-(d+1+γ₁)/γ₂`.
pub fn decay_fit_time<T: Real>(
    psi1: &SymbolSpec<T>,
    l: T,
    psi2: &SymbolSpec<T>,
    s: T,
    grid: &GridSpec<T>,
    t_list: &[T],
) -> Result<DecayFitReport<T>> {
    if t_list.len() < 2 {
        return Err(Error::Audit("time fit needs at least two times".into()));
    }
    let lo = t_list.iter().copied().fold(T::infinity(), T::min) - s;
    let hi = t_list.iter().copied().fold(T::neg_infinity(), T::max) - s;
    if !(lo > T::zero()) || octaves(lo, hi) < T::lit(3.0) - T::lit(1e-12) {
        return Err(Error::Audit(format!(
            "time fit window [{lo}, {hi}] must be positive and span at least 3 octaves"
        )));
    }
    let op = ComposedOperator::new(grid, Some((psi1, l)), psi2, s, TimeIntegralRule::default_for(psi2))?;
    let samples: Vec<(T, T)> = t_list
        .iter()
        .map(|&t| {
            let gk = gradient_from_multiplier(grid, &op.multiplier(t)?);
            Ok((t - s, sup_gradient(&gk)))
        })
        .collect::<Result<_>>()?;
    let (lx, ly): (Vec<T>, Vec<T>) = samples.iter().map(|&(t, v)| (t.ln(), v.ln())).unzip();
    let target = -(T::from_usize_lossy(grid.dim) + T::one() + psi1.gamma) / psi2.gamma;
    let fitted_constant = samples.iter().fold(T::zero(), |m, &(t, v)| m.max(v * t.powf(-target)));
    let max_pointwise_excess = samples.iter().fold(T::neg_infinity(), |m, &(t, v)| {
        m.max(v / (fitted_constant * t.powf(target)) - T::one())
    });
    Ok(DecayFitReport {
        fitted_exponent: fit_line(&lx, &ly).0,
        target_exponent: target,
        fit_window: (lo, hi),
        fitted_constant,
        max_pointwise_excess,
        samples,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HormanderReport<T> {
    pub y_values: Vec<T>,
    pub integrals: Vec<T>,
    pub sup: T,
    pub trend_slope: T,
}

impl<T: Real> HormanderReport<T> {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "y,H")?;
        for (y, h) in self.y_values.iter().zip(&self.integrals) {
            writeln!(w, "{y:e},{h:e}")?;
        }
        Ok(())
    }
}

/// `H(y) = ∫_{|x| ≥ 2|y|} ‖K(·, x - y) - K(·, x)‖_V dx` for several shifts,
/// where `‖·‖_V` is the weighted `L^q` norm of the time window.
pub fn hormander_integrals<T: Real>(
    psi1: &SymbolSpec<T>,
    l: T,
    psi2: &SymbolSpec<T>,
    window: &TimeWindow<T>,
    q: T,
    ys: &[Vec<T>],
    grid: &GridSpec<T>,
) -> Result<Vec<T>> {
    if !(q >= T::one()) {
        return Err(Error::InvalidArgument(format!("q must be >= 1, got {q}")));
    }
    let h = grid.spacing();
    for y in ys {
        if y.len() != grid.dim {
            return Err(Error::GridMismatch(format!(
                "shift has {} components, grid has dimension {}",
                y.len(),
                grid.dim
            )));
        }
        let ny = crate::spectral::norm(y);
        if !(ny > T::zero()) {
            return Err(Error::InvalidArgument("shift must be nonzero".into()));
        }
        if h > ny / T::lit(8.0) {
            return Err(Error::Audit(format!(
                "grid spacing {h} does not resolve |y| = {ny} (need spacing <= |y|/8)"
            )));
        }
    }
    let op = ComposedOperator::new(
        grid,
        Some((psi1, l)),
        psi2,
        window.s,
        TimeIntegralRule::default_for(psi2),
    )?;
    let phases: Vec<Vec<Complex<T>>> = ys
        .iter()
        .map(|y| {
            grid.map_frequencies(|xi| {
                let dot = xi.iter().zip(y).fold(T::zero(), |a, (&k, &v)| a + k * v);
                Complex::new(dot.cos(), -dot.sin())
            })
        })
        .collect();
    let mut acc = vec![vec![T::zero(); grid.len()]; ys.len()];
    let mults = op.multipliers_along(&window.nodes)?;
    for (m, &w) in mults.iter().zip(&window.weights) {
        let base = kernel_from_multiplier(grid, m.clone());
        let shifted: Vec<Vec<T>> = phases
            .par_iter()
            .map(|ph| {
                let k = kernel_from_multiplier(grid, m.iter().zip(ph).map(|(a, b)| a * b).collect());
                k.values
                    .iter()
                    .zip(&base.values)
                    .map(|(a, b)| w * (a - b).norm().powf(q))
                    .collect()
            })
            .collect();
        for (a, s) in acc.iter_mut().zip(shifted) {
            for (x, v) in a.iter_mut().zip(s) {
                *x = *x + v;
            }
        }
    }
    let cell = grid.cell_measure();
    let inv_q = q.recip();
    Ok(ys
        .iter()
        .zip(acc)
        .map(|(y, sum)| {
            let cut = T::lit(2.0) * crate::spectral::norm(y);
            let mut x = [T::zero(); MAX_DIM];
            let mut total = T::zero();
            for (i, v) in sum.into_iter().enumerate() {
                grid.position_at(i, &mut x);
                if crate::spectral::norm(&x[..grid.dim]) >= cut {
                    total = total + v.powf(inv_q);
                }
            }
            total * cell
        })
        .collect())
}

#[allow(clippy::too_many_arguments)]
pub fn hormander_integral<T: Real>(
    psi1: &SymbolSpec<T>,
    l: T,
    psi2: &SymbolSpec<T>,
    window: &TimeWindow<T>,
    q: T,
    y: &[T],
    grid: &GridSpec<T>,
) -> Result<T> {
    Ok(hormander_integrals(psi1, l, psi2, window, q, &[y.to_vec()], grid)?[0])
}

/// `H(y)` along `y = |y| e₁` for the given magnitudes, with the log-log
/// trend.
#[allow(clippy::too_many_arguments)]
pub fn hormander_sweep<T: Real>(
    psi1: &SymbolSpec<T>,
    l: T,
    psi2: &SymbolSpec<T>,
    window: &TimeWindow<T>,
    q: T,
    magnitudes: &[T],
    grid: &GridSpec<T>,
) -> Result<HormanderReport<T>> {
    if magnitudes.len() < 2 {
        return Err(Error::Audit("Hormander sweep needs at least two shifts".into()));
    }
    let ys: Vec<Vec<T>> = magnitudes
        .iter()
        .map(|&m| {
            let mut y = vec![T::zero(); grid.dim];
            y[0] = m;
            y
        })
        .collect();
    let integrals = hormander_integrals(psi1, l, psi2, window, q, &ys, grid)?;
    let lx: Vec<T> = magnitudes.iter().map(|m| m.ln()).collect();
    let ly: Vec<T> = integrals.iter().map(|h| h.ln()).collect();
    Ok(HormanderReport {
        y_values: magnitudes.to_vec(),
        sup: integrals.iter().copied().fold(T::zero(), T::max),
        trend_slope: fit_line(&lx, &ly).0,
        integrals,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeRow<T> {
    pub j: i32,
    pub l1_norm: T,
    pub envelope: T,
    /// `envelope / l1_norm`; at least 1 for every fitted row.
    pub slack: T,
    /// Excluded from the fit as numerically zero.
    pub below_floor: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnvelopeReport<T> {
    pub rows: Vec<EnvelopeRow<T>>,
    pub big_c: T,
    pub c: T,
    pub tau: T,
    /// `log₂` regression slope over the lowest `low_fit` rows.
    pub low_slope: T,
}

impl<T: Real> EnvelopeReport<T> {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "j,l1_norm,envelope_value,slack")?;
        for r in &self.rows {
            writeln!(w, "{},{:e},{:e},{:e}", r.j, r.l1_norm, r.envelope, r.slack)?;
        }
        Ok(())
    }

    pub fn all_under_envelope(&self) -> bool {
        let tol = T::one() - T::lit(1e-9);
        self.rows.iter().all(|r| r.below_floor || r.slack >= tol)
    }
}

/// `(log C, c)` with `log C + jγ₁ ln 2 - cτ2^{jγ₂} ≥ log m_j` for all rows,
/// minimizing the summed log-slack. Two variables, so the optimum sits on
/// a pair of tight constraints; all pairs are enumerated.
fn fit_envelope(rows: &[(f64, f64)], gamma1: f64, gamma2: f64, tau: f64) -> Option<(f64, f64)> {
    // Constraint k: a - c·b_k ≥ r_k.
    let cons: Vec<(f64, f64)> = rows
        .iter()
        .map(|&(j, lm)| (tau * 2f64.powf(j * gamma2), lm - j * gamma1 * std::f64::consts::LN_2))
        .collect();
    let n = cons.len() as f64;
    let sum_b: f64 = cons.iter().map(|c| c.0).sum();
    let objective = |a: f64, c: f64| n * a - c * sum_b;
    let feasible = |a: f64, c: f64| cons.iter().all(|&(b, r)| a - c * b >= r - 1e-9 * (1.0 + r.abs()));
    let mut best: Option<(f64, f64, f64)> = None;
    let mut consider = |a: f64, c: f64| {
        if a.is_finite() && c.is_finite() && feasible(a, c) {
            let o = objective(a, c);
            if best.is_none_or(|(bo, _, _)| o < bo) {
                best = Some((o, a, c));
            }
        }
    };
    if cons.len() == 1 {
        consider(cons[0].1, 0.0);
    }
    for i in 0..cons.len() {
        for k in i + 1..cons.len() {
            let (bi, ri) = cons[i];
            let (bk, rk) = cons[k];
            if (bi - bk).abs() <= f64::EPSILON * bi.abs().max(bk.abs()) {
                continue;
            }
            let c = (ri - rk) / (bk - bi);
            consider(ri + c * bi, c);
        }
    }
    best.map(|(_, a, c)| (a, c))
}

/// `‖L_{ψ₁}(l) p_{ψ₂,j}(t, s, ·)‖₁` for each `j` and the tightest envelope
/// `C 2^{jγ₁} e^{-c(t-s)2^{jγ₂}}`.
#[allow(clippy::too_many_arguments)]
pub fn dyadic_l1_envelope<T: Real>(
    psi1: &SymbolSpec<T>,
    l: T,
    psi2: &SymbolSpec<T>,
    s: T,
    t: T,
    j_range: (i32, i32),
    decomposition: &DyadicDecomposition<T>,
    low_fit: usize,
) -> Result<EnvelopeReport<T>> {
    let grid = decomposition.grid;
    let (j_lo, j_hi) = j_range;
    if j_lo > j_hi || !decomposition.contains(j_lo) || !decomposition.contains(j_hi) {
        return Err(Error::InvalidArgument(format!(
            "j range [{j_lo}, {j_hi}] outside active range [{}, {}]",
            decomposition.j_min, decomposition.j_max
        )));
    }
    let op = ComposedOperator::new(&grid, Some((psi1, l)), psi2, s, TimeIntegralRule::default_for(psi2))?;
    let m = op.multiplier(t)?;
    let cell = grid.cell_measure();
    let norms: Vec<(i32, T)> = (j_lo..=j_hi)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|j| {
            let b = decomposition.block_multiplier(j)?;
            let k = kernel_from_multiplier(&grid, b.iter().zip(&m).map(|(a, c)| a * c).collect());
            Ok((j, k.values.iter().map(|v| v.norm()).sum::<T>() * cell))
        })
        .collect::<Result<_>>()?;
    let floor = T::min_positive_value().powf(T::lit(0.8));
    let fitted: Vec<(f64, f64)> = norms
        .iter()
        .filter(|(_, v)| *v > floor && v.is_finite())
        .map(|&(j, v)| (j as f64, v.as_f64().ln()))
        .collect();
    let (g1, g2, tau) = (psi1.gamma.as_f64(), psi2.gamma.as_f64(), (t - s).as_f64());
    let (log_c, c) = fit_envelope(&fitted, g1, g2, tau)
        .ok_or_else(|| Error::Audit("envelope fit has no feasible solution".into()))?;
    let envelope = |j: i32| {
        let jf = j as f64;
        T::lit((log_c + jf * g1 * std::f64::consts::LN_2 - c * tau * 2f64.powf(jf * g2)).exp())
    };
    let rows: Vec<EnvelopeRow<T>> = norms
        .iter()
        .map(|&(j, v)| {
            let e = envelope(j);
            EnvelopeRow {
                j,
                l1_norm: v,
                envelope: e,
                slack: e / v,
                below_floor: !(v > floor && v.is_finite()),
            }
        })
        .collect();
    let low: Vec<&(f64, f64)> = fitted.iter().take(low_fit.max(2)).collect();
    let (lx, ly): (Vec<f64>, Vec<f64>) = low.iter().map(|&&(j, lm)| (j, lm / std::f64::consts::LN_2)).unzip();
    let low_slope = if lx.len() >= 2 { fit_line(&lx, &ly).0 } else { f64::NAN };
    Ok(EnvelopeReport {
        rows,
        big_c: T::lit(log_c.exp()),
        c: T::lit(c),
        tau: t - s,
        low_slope: T::lit(low_slope),
    })
}

/// Panel layout of the principal-value quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PvQuadrature {
    /// Minimum panels on `[0, 1]`; more are added for oscillation.
    pub panels: usize,
    /// Gauss–Legendre order per panel.
    pub order: usize,
}

impl Default for PvQuadrature {
    fn default() -> Self {
        PvQuadrature { panels: 8, order: 16 }
    }
}

/// `2^η Γ((d+η)/2) / (π^{d/2} |Γ(-η/2)|)`.
pub fn frac_lap_constant(eta: f64, dim: usize) -> f64 {
    use statrs::function::gamma::gamma;
    let d = dim as f64;
    2f64.powf(eta) * gamma((d + eta) / 2.0) / (std::f64::consts::PI.powf(d / 2.0) * gamma(-eta / 2.0).abs())
}

/// `∫_Y^∞ e^{iξy} y^{-a} dy` by its asymptotic series in `1/(ξY)`.
fn oscillatory_tail(xi: f64, y: f64, a: f64, terms: usize) -> Complex<f64> {
    let phase = Complex::new(0.0, xi * y).exp();
    let inv = Complex::new(0.0, -1.0 / xi); // 1/(iξ)
                                            // I(a) = -e^{iξY} Y^{-a}/(iξ) + (a/(iξ)) I(a+1)
    let mut sum = Complex::new(0.0, 0.0);
    let mut coef = Complex::new(1.0, 0.0);
    for k in 0..terms {
        let ak = a + k as f64;
        sum += coef * (-phase * y.powf(-ak) * inv);
        coef *= inv * ak;
    }
    sum
}

/// `C(η) ∫_0^∞ (2cos(ξy) - 2) y^{-1-η} dy`, which equals `-|ξ|^η`.
fn pv_symbol(xi: f64, eta: f64, quad: &PvQuadrature, gl: &GaussLegendre<f64>) -> f64 {
    let xi = xi.abs();
    if xi == 0.0 {
        return 0.0;
    }
    let c = frac_lap_constant(eta, 1);
    let a = 1.0 + eta;
    // [0, 1] with y = v^m, m = 2/(2-η): the integrand becomes smooth in v.
    let m = 2.0 / (2.0 - eta);
    let near_panels = quad.panels.max((2.0 * xi * m).ceil() as usize);
    let near = gl.integrate(0.0, 1.0, near_panels, |v| {
        if v == 0.0 {
            return 0.0;
        }
        let y = v.powf(m);
        let half = (xi * y / 2.0).sin();
        // 2cos(ξy) - 2 = -4 sin²(ξy/2), without cancellation
        -4.0 * half * half * y.powf(-a) * m * v.powf(m - 1.0)
    });
    // [1, ∞): the constant part is exact, the cosine part is panels on
    // [1, Y] plus an asymptotic tail.
    let y_max = (40.0 / xi).max(8.0);
    let mut far = -2.0 / eta;
    let mut lo = 1.0;
    while lo < y_max {
        let hi = (2.0 * lo).min(y_max);
        let panels = ((hi - lo) * xi / std::f64::consts::PI).ceil().max(1.0) as usize;
        far += gl.integrate(lo, hi, panels, |y| 2.0 * (xi * y).cos() * y.powf(-a));
        lo = hi;
    }
    far += 2.0 * oscillatory_tail(xi, y_max, a, 8).re;
    c * (near + far)
}

/// `-(−Δ)^{η/2} f` from the principal-value integral
/// `C(η) ∫_0^∞ (f(x+y) + f(x-y) - 2f(x)) y^{-1-η} dy`, with translations done
/// exactly in Fourier space (one dimension).
pub fn fractional_laplacian_pv<T: Real>(f: &Field<T>, eta: f64, quad: &PvQuadrature) -> Result<Field<T>> {
    if !(eta > 0.0 && eta < 2.0) {
        return Err(Error::InvalidArgument(format!("eta must lie in (0, 2), got {eta}")));
    }
    if f.grid.dim != 1 {
        return Err(Error::InvalidArgument(
            "principal-value route is implemented in one dimension".into(),
        ));
    }
    if quad.order == 0 || quad.panels == 0 {
        return Err(Error::InvalidArgument("quadrature needs panels and nodes".into()));
    }
    let gl = GaussLegendre::<f64>::new(quad.order);
    let m = f
        .grid
        .map_frequencies(|xi| Complex::new(T::lit(pv_symbol(xi[0].as_f64(), eta, quad, &gl)), T::zero()));
    apply_lattice_multiplier(f, &m)
}

/// `-(−Δ)^{η/2} f` by the multiplier `-|ξ|^η`.
pub fn fractional_laplacian_multiplier<T: Real>(f: &Field<T>, eta: T) -> Result<Field<T>> {
    let m = f
        .grid
        .map_frequencies(|xi| Complex::new(-crate::spectral::norm(xi).powf(eta), T::zero()));
    apply_lattice_multiplier(f, &m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gfunction::{window_for_grid, Horizon};
    use crate::lp_decomp::build_decomposition;
    use crate::spectral::lp_norm;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn poisson_grad_periodic(l: f64, t: f64, x: f64) -> f64 {
        // ∂_x ∂_t of (1/2L) sinh(at) / (cosh(at) - cos(ax)), a = π/L
        let a = PI / l;
        let (sh, ch) = ((a * t).sinh(), (a * t).cosh());
        let (c, s) = ((a * x).cos(), (a * x).sin());
        let den = ch - c;
        -a * a * s / (2.0 * l) * (ch * den - 2.0 * sh * sh) / den.powi(3)
    }

    #[test]
    fn line_fit_recovers_slope() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * x - 1.0).collect();
        let (m, b) = fit_line(&xs, &ys);
        assert_relative_eq!(m, 2.5, epsilon = 1e-14);
        assert_relative_eq!(b, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn heat_gradient_kernel_properties() {
        let g = GridSpec::new(1, 512, 16.0).unwrap();
        let heat = SymbolSpec::<f64>::heat(1);
        let gk = gradient_kernel(&heat, 0.0, &heat, 0.0, 1.0, &g).unwrap();
        let k = &gk.components[0];
        // Odd: value at x = 0 vanishes; integral vanishes.
        assert!(k.values[g.n / 2].re.abs() < 1e-14);
        let integral: f64 = k.values.iter().map(|v| v.re).sum::<f64>() * g.cell_measure();
        assert!(integral.abs() < 1e-14);
        // Δ p_t derivative in closed form: ∂³_x (4πt)^{-1/2} e^{-x²/4t}.
        let exact = |x: f64| {
            let gauss = (4.0 * PI).powf(-0.5) * (-x * x / 4.0).exp();
            gauss * (3.0 * x / 4.0 - x.powi(3) / 8.0)
        };
        let mut x = [0.0];
        for i in 0..g.len() {
            g.position_at(i, &mut x);
            assert!((k.values[i].re - exact(x[0])).abs() < 1e-10);
        }
    }

    #[test]
    fn gradient_matches_finite_difference_of_kernel() {
        let g = GridSpec::new(1, 512, 16.0).unwrap();
        let heat = SymbolSpec::<f64>::heat(1);
        let poisson = SymbolSpec::<f64>::poisson(1);
        let op = ComposedOperator::new(&g, Some((&poisson, 0.0)), &heat, 0.0, TimeIntegralRule::exact()).unwrap();
        let m = op.multiplier(1.0).unwrap();
        let scale = kernel_scale(&g);
        let kspec = SpectralField {
            grid: g,
            coeffs: m.iter().map(|v| v * scale).collect(),
        };
        let gk = gradient_kernel(&poisson, 0.0, &heat, 0.0, 1.0, &g).unwrap();
        for x0 in [0.37, 1.3, -2.2] {
            let h = 1e-4;
            let k = kspec.evaluate_at(&[vec![x0 + h], vec![x0 - h]]);
            let fd = ((k[0] - k[1]) / (2.0 * h)).re.abs();
            let got = gk.magnitude_at(&[vec![x0]])[0];
            assert_relative_eq!(got, fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn poisson_space_decay() {
        let l = 256.0;
        let g = GridSpec::new(1, 8192, l).unwrap();
        let p = SymbolSpec::<f64>::poisson(1);
        let gk = gradient_kernel(&p, 0.0, &p, 0.0, 1.0, &g).unwrap();
        let mut x = [0.0];
        for i in (0..g.len()).step_by(7) {
            g.position_at(i, &mut x);
            let e = poisson_grad_periodic(l, 1.0, x[0]);
            assert!((gk.components[0].values[i].re - e).abs() < 1e-10);
        }
        let r = decay_fit_space(&p, 0.0, &p, 0.0, 1.0, &g, Some((4.0, 32.0))).unwrap();
        assert!(r.fitted_constant.is_finite() && r.fitted_constant > 0.0);
        assert!(r.max_pointwise_excess <= 1e-12);
        // Oracle: the same regression on the closed-form derivative.
        let (lx, ly): (Vec<f64>, Vec<f64>) = r
            .samples
            .iter()
            .map(|&(x, _)| (x.ln(), poisson_grad_periodic(l, 1.0, x).abs().ln()))
            .unzip();
        assert_relative_eq!(r.fitted_exponent, fit_line(&lx, &ly).0, max_relative = 1e-6);
        assert!(r.fitted_exponent < -2.8, "{}", r.fitted_exponent);
        assert_eq!(r.target_exponent, -3.0);
        assert!(decay_fit_space(&p, 0.0, &p, 0.0, 1.0, &g, Some((8.0, 32.0))).is_err());
    }

    #[test]
    fn heat_space_decay_is_faster_than_any_power() {
        let g = GridSpec::new(1, 2048, 64.0).unwrap();
        let h = SymbolSpec::<f64>::heat(1);
        let r = decay_fit_space(&h, 0.0, &h, 0.0, 1.0, &g, Some((4.0, 32.0))).unwrap();
        assert!(r.fitted_exponent < -8.0, "{}", r.fitted_exponent);
    }

    #[test]
    fn homogeneous_space_constant_is_stable_in_time() {
        let l = 256.0;
        let g = GridSpec::new(1, 16384, l).unwrap();
        let p = SymbolSpec::<f64>::poisson(1);
        let consts: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&t| {
                decay_fit_space(&p, 0.0, &p, 0.0, t, &g, Some((8.0, 64.0)))
                    .unwrap()
                    .fitted_constant
            })
            .collect();
        let (lo, hi) = consts
            .iter()
            .fold((f64::MAX, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
        assert!(hi / lo - 1.0 < 0.1, "{consts:?}");
    }

    #[test]
    fn time_decay_heat_pair() {
        let g = GridSpec::new(1, 2048, 32.0).unwrap();
        let h = SymbolSpec::<f64>::heat(1);
        let r = decay_fit_time(&h, 0.0, &h, 0.0, &g, &[0.5, 1.0, 2.0, 4.0]).unwrap();
        assert!(r.relative_exponent_error() < 0.02, "{}", r.fitted_exponent);
        assert!(decay_fit_time(&h, 0.0, &h, 0.0, &g, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn hormander_basics() {
        let g = GridSpec::new(1, 1024, 16.0).unwrap();
        let h = SymbolSpec::<f64>::heat(1);
        let w = window_for_grid(0.0, Horizon::Finite(4.0), 2.0, &h, &h, &g, 8).unwrap();
        let small = hormander_integral(&h, 0.0, &h, &w, 2.0, &[0.25], &g).unwrap();
        let large = hormander_integral(&h, 0.0, &h, &w, 2.0, &[4.0], &g).unwrap();
        assert!(small.is_finite() && small > 0.0);
        assert!(large < small);
        assert!(hormander_integral(&h, 0.0, &h, &w, 2.0, &[0.0], &g).is_err());
        assert!(matches!(
            hormander_integral(&h, 0.0, &h, &w, 2.0, &[0.05], &g),
            Err(Error::Audit(_))
        ));
    }

    #[test]
    fn envelope_lp_fit() {
        let rows = [(0.0, 0.0), (1.0, 2f64.ln() * 2.0 - 3.0), (2.0, -20.0)];
        let (a, c) = fit_envelope(&rows, 2.0, 2.0, 1.0).unwrap();
        for &(j, lm) in &rows {
            assert!(a + j * 2.0 * std::f64::consts::LN_2 - c * 4f64.powf(j) >= lm - 1e-9);
        }
        assert!(c > 0.0);
    }

    #[test]
    fn heat_envelope_and_scaling_in_time() {
        let g = GridSpec::new(1, 16384, 1024.0).unwrap();
        let d = build_decomposition(&g);
        let h = SymbolSpec::<f64>::heat(1);
        let r1 = dyadic_l1_envelope(&h, 0.0, &h, 0.0, 1.0, (-6, 4), &d, 3).unwrap();
        assert!(r1.c > 0.0);
        assert!(r1.all_under_envelope());
        assert!((r1.low_slope - 2.0).abs() < 0.1, "{}", r1.low_slope);
        let r4 = dyadic_l1_envelope(&h, 0.0, &h, 0.0, 4.0, (-6, 4), &d, 3).unwrap();
        for j in -6..3 {
            let a = r4.rows.iter().find(|r| r.j == j).unwrap().l1_norm;
            let b = r1.rows.iter().find(|r| r.j == j + 1).unwrap().l1_norm;
            assert_relative_eq!(a, b / 4.0, max_relative = 0.05);
        }
        let mut out = Vec::new();
        r1.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out)
            .unwrap()
            .starts_with("j,l1_norm,envelope_value,slack"));
    }

    #[test]
    fn pv_constant_matches_closed_form() {
        use statrs::function::gamma::gamma;
        for eta in [0.3, 0.5, 1.0, 1.5, 1.9] {
            let alt = gamma(1.0 + eta) * (PI * eta / 2.0).sin() / PI;
            assert_relative_eq!(frac_lap_constant(eta, 1), alt, max_relative = 1e-12);
        }
    }

    #[test]
    fn pv_symbol_equals_power() {
        let gl = GaussLegendre::new(16);
        let q = PvQuadrature::default();
        for eta in [0.01, 0.5, 1.0, 1.5] {
            for xi in [0.05, 0.3, 1.0, 7.0, 60.0] {
                let got = pv_symbol(xi, eta, &q, &gl);
                assert_relative_eq!(got, -xi.powf(eta), max_relative = 1e-7);
            }
        }
    }

    #[test]
    fn pv_route_matches_multiplier() {
        let g = GridSpec::new(1, 512, 16.0).unwrap();
        let f = Field::from_real_fn(g, |x: &[f64]| (-x[0] * x[0] / 2.0).exp());
        for eta in [0.5, 1.0, 1.5] {
            let a = fractional_laplacian_pv(&f, eta, &PvQuadrature::default()).unwrap();
            let b = fractional_laplacian_multiplier(&f, eta).unwrap();
            let err = lp_norm(&a.sub(&b).unwrap(), 2.0).unwrap() / lp_norm(&b, 2.0).unwrap();
            assert!(err < 1e-6, "eta {eta}: {err:e}");
        }
        let df = Field::from_real_fn(g, |x: &[f64]| x[0] * (-x[0] * x[0] / 2.0).exp());
        let near = fractional_laplacian_pv(&df, 0.01, &PvQuadrature::default()).unwrap();
        let err = lp_norm(&near.add(&df).unwrap(), 2.0).unwrap() / lp_norm(&df, 2.0).unwrap();
        assert!(err < 1e-2);
        let sum = fractional_laplacian_pv(&f.add(&df).unwrap(), 1.0, &PvQuadrature::default()).unwrap();
        let parts = fractional_laplacian_pv(&f, 1.0, &PvQuadrature::default())
            .unwrap()
            .add(&fractional_laplacian_pv(&df, 1.0, &PvQuadrature::default()).unwrap())
            .unwrap();
        assert!(sum.sub(&parts).unwrap().sup_norm() < 1e-12);
        assert!(fractional_laplacian_pv(&f, 2.0, &PvQuadrature::default()).is_err());
    }
}
