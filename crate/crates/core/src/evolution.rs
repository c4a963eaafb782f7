//! Evolution systems `T_ψ(t, s)` realized as the Fourier multiplier
//! `exp(∫_s^t ψ(r, ξ) dr)`, optionally composed with an outer operator
//! `L_{ψ₁}(l)`, and the convolution kernels they define.

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::scalar::Real;
use crate::spectral::{
    apply_lattice_multiplier, check_finite_multiplier, inverse_transform, Field, GridSpec, SpectralField, MAX_DIM,
};
use crate::symbols::SymbolSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TimeIntegralMethod {
    /// `(t - s) ψ(s, ξ)`; only valid for time-constant symbols.
    ExactTimeConstant,
    /// Composite Gauss–Legendre with `nodes` nodes per unit time.
    GaussLegendre { nodes: usize },
    /// Composite trapezoid with `panels` panels per unit time.
    Trapezoid { panels: usize },
}

/// How `∫_s^t ψ(r, ξ) dr` is evaluated. Composite rules double their panel
/// count until two successive estimates agree to `tolerance` (relative,
/// per lattice point).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeIntegralRule<T> {
    pub method: TimeIntegralMethod,
    pub tolerance: T,
}

const MAX_DOUBLINGS: usize = 14;

impl<T: Real> TimeIntegralRule<T> {
    pub fn exact() -> Self {
        TimeIntegralRule {
            method: TimeIntegralMethod::ExactTimeConstant,
            tolerance: T::lit(1e-10),
        }
    }

    pub fn gauss_legendre(nodes: usize) -> Self {
        TimeIntegralRule {
            method: TimeIntegralMethod::GaussLegendre { nodes },
            tolerance: T::lit(1e-10),
        }
    }

    pub fn trapezoid(panels: usize) -> Self {
        TimeIntegralRule {
            method: TimeIntegralMethod::Trapezoid { panels },
            tolerance: T::lit(1e-10),
        }
    }

    pub fn with_tolerance(mut self, tol: T) -> Self {
        self.tolerance = tol;
        self
    }

    /// Exact for time-constant symbols, Gauss–Legendre(8) otherwise.
    pub fn default_for(psi: &SymbolSpec<T>) -> Self {
        if psi.time_constant {
            Self::exact()
        } else {
            Self::gauss_legendre(8)
        }
    }
}

fn lattice_xi<T: Real>(grid: &GridSpec<T>, idx: usize) -> Vec<f64> {
    let mut xi = [T::zero(); MAX_DIM];
    grid.frequency_at(idx, &mut xi);
    xi[..grid.dim].iter().map(|v| v.as_f64()).collect()
}

/// Time nodes and weights of one composite estimate on `[a, b]`.
fn composite_nodes<T: Real>(method: TimeIntegralMethod, a: T, b: T, refinement: usize) -> Vec<(T, T)> {
    let span = b - a;
    let units = span.ceil().to_usize().unwrap_or(1).max(1);
    match method {
        TimeIntegralMethod::GaussLegendre { nodes } => {
            let gl = GaussLegendre::<T>::new(nodes.max(1));
            let panels = units << refinement;
            let h = span / T::from_usize_lossy(panels);
            (0..panels)
                .flat_map(|p| {
                    let lo = a + h * T::from_usize_lossy(p);
                    gl.on_interval(lo, lo + h).collect::<Vec<_>>()
                })
                .collect()
        }
        TimeIntegralMethod::Trapezoid { panels } => {
            let m = (units * panels.max(1)) << refinement;
            let h = span / T::from_usize_lossy(m);
            (0..=m)
                .map(|i| {
                    let w = if i == 0 || i == m { h / T::lit(2.0) } else { h };
                    (a + h * T::from_usize_lossy(i), w)
                })
                .collect()
        }
        TimeIntegralMethod::ExactTimeConstant => unreachable!("exact rule has no nodes"),
    }
}

/// `∫_a^b ψ(r, ξ) dr` at every lattice frequency.
pub fn integrate_symbol<T: Real>(
    psi: &SymbolSpec<T>,
    a: T,
    b: T,
    grid: &GridSpec<T>,
    rule: &TimeIntegralRule<T>,
) -> Result<Vec<Complex<T>>> {
    if !(b >= a) || !(a >= T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "time integral needs 0 <= a <= b, got a = {a}, b = {b}"
        )));
    }
    if b == a {
        return Ok(vec![Complex::new(T::zero(), T::zero()); grid.len()]);
    }
    let q = match rule.method {
        TimeIntegralMethod::ExactTimeConstant => {
            if !psi.time_constant {
                return Err(Error::Precondition(format!(
                    "exact time integral selected for time-dependent symbol `{}`",
                    psi.name
                )));
            }
            grid.map_frequencies(|xi| psi.value(a, xi) * (b - a))
        }
        method => {
            let estimate = |refinement: usize| {
                let nodes = composite_nodes(method, a, b, refinement);
                grid.map_frequencies(|xi| {
                    nodes.iter().fold(Complex::new(T::zero(), T::zero()), |acc, &(r, w)| {
                        acc + psi.value(r, xi) * w
                    })
                })
            };
            let mut prev = estimate(0);
            let mut converged = None;
            let mut worst = (T::infinity(), 0usize);
            for refinement in 1..=MAX_DOUBLINGS {
                let next = estimate(refinement);
                worst = (T::zero(), 0);
                for (i, (p, n)) in prev.iter().zip(&next).enumerate() {
                    let change = (n - p).norm();
                    let scale = n.norm().max(T::min_positive_value());
                    let rel = if change == T::zero() { T::zero() } else { change / scale };
                    if rel > worst.0 {
                        worst = (rel, i);
                    }
                }
                if worst.0 <= rule.tolerance {
                    converged = Some(next);
                    break;
                }
                prev = next;
            }
            converged.ok_or_else(|| Error::Quadrature {
                worst_change: worst.0.as_f64(),
                xi: lattice_xi(grid, worst.1),
            })?
        }
    };
    check_finite_multiplier(grid, &q).map_err(|_| Error::SymbolEvaluation {
        name: psi.name.clone(),
        t: a.as_f64(),
        xi: vec![],
    })?;
    Ok(q)
}

/// `[ψ₁(l, ξ)] · exp(∫_s^t ψ₂(r, ξ) dr)` on the lattice.
#[derive(Debug, Clone)]
pub struct EvolutionMultiplier<T> {
    pub grid: GridSpec<T>,
    pub s: T,
    pub t: T,
    pub values: Vec<Complex<T>>,
    /// Name and time `l` of the outer symbol, when present.
    pub pre_symbol: Option<(String, T)>,
}

fn check_times<T: Real>(s: T, t: T) -> Result<()> {
    if !(s >= T::zero()) || !(t > s) {
        return Err(Error::InvalidArgument(format!(
            "evolution needs t > s >= 0, got s = {s}, t = {t}"
        )));
    }
    Ok(())
}

pub fn build_multiplier<T: Real>(
    psi2: &SymbolSpec<T>,
    s: T,
    t: T,
    grid: &GridSpec<T>,
    rule: &TimeIntegralRule<T>,
    pre: Option<(&SymbolSpec<T>, T)>,
) -> Result<EvolutionMultiplier<T>> {
    check_times(s, t)?;
    let q = integrate_symbol(psi2, s, t, grid, rule)?;
    let mut values: Vec<Complex<T>> = q.iter().map(|z| z.exp()).collect();
    if let Some((psi1, l)) = pre {
        let outer = grid.map_frequencies(|xi| psi1.value(l, xi));
        check_finite_multiplier(grid, &outer)?;
        for (v, o) in values.iter_mut().zip(&outer) {
            *v = *v * o;
        }
    }
    Ok(EvolutionMultiplier {
        grid: *grid,
        s,
        t,
        values,
        pre_symbol: pre.map(|(p, l)| (p.name.clone(), l)),
    })
}

pub fn apply_evolution<T: Real>(f: &Field<T>, mult: &EvolutionMultiplier<T>) -> Result<Field<T>> {
    f.grid.ensure_same(&mult.grid)?;
    apply_lattice_multiplier(f, &mult.values)
}

/// Convolution kernel of a lattice multiplier: `(2π)^{-d/2} F^{-1}(m)`,
/// so that applying `m` equals convolving with the returned field.
pub fn kernel_from_multiplier<T: Real>(grid: &GridSpec<T>, values: Vec<Complex<T>>) -> Field<T> {
    let spec = SpectralField {
        grid: *grid,
        coeffs: values,
    };
    let scale = T::TAU().powf(-T::lit(grid.dim as f64 / 2.0));
    inverse_transform(&spec).scale(scale)
}

/// Sampled convolution kernel of `L_{ψ₁}(l) T_{ψ₂}(t, s)`.
pub fn kernel_field<T: Real>(
    pre: Option<(&SymbolSpec<T>, T)>,
    psi2: &SymbolSpec<T>,
    s: T,
    t: T,
    grid: &GridSpec<T>,
    rule: &TimeIntegralRule<T>,
) -> Result<Field<T>> {
    let m = build_multiplier(psi2, s, t, grid, rule, pre)?;
    Ok(kernel_from_multiplier(grid, m.values))
}

/// `max |M(t,s) - M(t,r) M(r,s)| / (|M(t,s)| + ε_floor)` over the lattice.
pub fn verify_composition<T: Real>(
    psi2: &SymbolSpec<T>,
    s: T,
    r: T,
    t: T,
    grid: &GridSpec<T>,
    rule: &TimeIntegralRule<T>,
) -> Result<T> {
    if !(s >= T::zero() && s <= r && r <= t) {
        return Err(Error::InvalidArgument(format!(
            "composition needs 0 <= s <= r <= t, got ({s}, {r}, {t})"
        )));
    }
    let exp_q = |a: T, b: T| -> Result<Vec<Complex<T>>> {
        Ok(integrate_symbol(psi2, a, b, grid, rule)?
            .into_iter()
            .map(|z| z.exp())
            .collect())
    };
    let full = exp_q(s, t)?;
    let late = exp_q(r, t)?;
    let early = exp_q(s, r)?;
    let floor = T::min_positive_value().sqrt();
    Ok(full
        .iter()
        .zip(late.iter().zip(&early))
        .fold(T::zero(), |worst, (m, (a, b))| {
            worst.max((m - a * b).norm() / (m.norm() + floor))
        }))
}

/// `L_{ψ₁}(l) T_{ψ₂}(t, s)` for a fixed start time, with the lattice data
/// that does not depend on `t` evaluated once.
#[derive(Debug, Clone)]
pub struct ComposedOperator<T: Real> {
    pub grid: GridSpec<T>,
    pub s: T,
    outer: Option<Vec<Complex<T>>>,
    psi2: SymbolSpec<T>,
    psi2_lattice: Option<Vec<Complex<T>>>,
    rule: TimeIntegralRule<T>,
}

impl<T: Real> ComposedOperator<T> {
    pub fn new(
        grid: &GridSpec<T>,
        pre: Option<(&SymbolSpec<T>, T)>,
        psi2: &SymbolSpec<T>,
        s: T,
        rule: TimeIntegralRule<T>,
    ) -> Result<Self> {
        if !(s >= T::zero()) {
            return Err(Error::InvalidArgument(format!("start time must be >= 0, got {s}")));
        }
        if matches!(rule.method, TimeIntegralMethod::ExactTimeConstant) && !psi2.time_constant {
            return Err(Error::Precondition(format!(
                "exact time integral selected for time-dependent symbol `{}`",
                psi2.name
            )));
        }
        let outer = match pre {
            Some((psi1, l)) => {
                let v = grid.map_frequencies(|xi| psi1.value(l, xi));
                check_finite_multiplier(grid, &v)?;
                Some(v)
            }
            None => None,
        };
        let psi2_lattice = if psi2.time_constant {
            let v = grid.map_frequencies(|xi| psi2.value(s, xi));
            check_finite_multiplier(grid, &v)?;
            Some(v)
        } else {
            None
        };
        Ok(ComposedOperator {
            grid: *grid,
            s,
            outer,
            psi2: psi2.clone(),
            psi2_lattice,
            rule,
        })
    }

    /// `∫_a^b ψ₂` on the lattice.
    pub fn exponent_increment(&self, a: T, b: T) -> Result<Vec<Complex<T>>> {
        match &self.psi2_lattice {
            Some(v) => Ok(v.iter().map(|&z| z * (b - a)).collect()),
            None => integrate_symbol(&self.psi2, a, b, &self.grid, &self.rule),
        }
    }

    /// Multiplier values for a given exponent `Q(ξ) = ∫_s^t ψ₂`.
    pub fn multiplier_from_exponent(&self, q: &[Complex<T>]) -> Vec<Complex<T>> {
        match &self.outer {
            Some(o) => q.iter().zip(o).map(|(z, w)| z.exp() * w).collect(),
            None => q.iter().map(|z| z.exp()).collect(),
        }
    }

    pub fn multiplier(&self, t: T) -> Result<Vec<Complex<T>>> {
        check_times(self.s, t)?;
        let q = self.exponent_increment(self.s, t)?;
        Ok(self.multiplier_from_exponent(&q))
    }

    /// Multipliers at increasing times, integrating `ψ₂` incrementally.
    pub fn multipliers_along(&self, times: &[T]) -> Result<Vec<Vec<Complex<T>>>> {
        let mut out = Vec::with_capacity(times.len());
        let mut cur = self.s;
        let mut q = vec![Complex::new(T::zero(), T::zero()); self.grid.len()];
        for &t in times {
            check_times(self.s, t)?;
            if t < cur {
                return Err(Error::InvalidArgument("times must be increasing".into()));
            }
            if self.psi2_lattice.is_some() {
                q = self.exponent_increment(self.s, t)?;
            } else {
                let inc = self.exponent_increment(cur, t)?;
                for (a, b) in q.iter_mut().zip(inc) {
                    *a = *a + b;
                }
            }
            cur = t;
            out.push(self.multiplier_from_exponent(&q));
        }
        Ok(out)
    }

    pub fn apply(&self, f: &Field<T>, t: T) -> Result<Field<T>> {
        f.grid.ensure_same(&self.grid)?;
        apply_lattice_multiplier(f, &self.multiplier(t)?)
    }

    pub fn kernel(&self, t: T) -> Result<Field<T>> {
        Ok(kernel_from_multiplier(&self.grid, self.multiplier(t)?))
    }
}

/// Samples of `g` at `points`, zero where a point leaves the box.
fn resample<T: Real>(g: &Field<T>, points: &[Vec<T>]) -> Field<T> {
    let grid = g.grid;
    let inside: Vec<usize> = (0..points.len())
        .filter(|&i| points[i].iter().all(|c| c.abs() < grid.half_extent))
        .collect();
    let pts: Vec<Vec<T>> = inside.iter().map(|&i| points[i].clone()).collect();
    let vals = g.forward().evaluate_at(&pts);
    let mut out = Field::zeros(grid);
    for (&i, v) in inside.iter().zip(vals) {
        out.values[i] = v;
    }
    out
}

/// Relative sup-norm defect of the parabolic scaling law
/// `L T(bt+s, s) f (x) = b^{-γ₁/γ₂} [L T(t, 0) f_b](b^{-1/γ₂} x)` with
/// `f_b(x) = f(b^{1/γ₂} x)`, for homogeneous time-constant symbols.
///
/// Off-grid values come from the trigonometric interpolant (`O(n^{2d})`);
/// `f_b` is set to zero where `b^{1/γ₂} x` leaves the box, so `f` must
/// decay there.
pub fn scaling_identity_error<T: Real>(
    psi1: &SymbolSpec<T>,
    l: T,
    psi2: &SymbolSpec<T>,
    s: T,
    t: T,
    b: T,
    f: &Field<T>,
) -> Result<T> {
    for p in [psi1, psi2] {
        if !(p.time_constant && p.homogeneous) {
            return Err(Error::Precondition(format!(
                "scaling law needs homogeneous time-constant symbols; `{}` is not",
                p.name
            )));
        }
    }
    if !(b > T::zero() && t > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "need b > 0 and t > 0, got b = {b}, t = {t}"
        )));
    }
    let grid = f.grid;
    let rule = TimeIntegralRule::exact();
    let lhs = ComposedOperator::new(&grid, Some((psi1, l)), psi2, s, rule)?.apply(f, b * t + s)?;
    let c = b.powf(psi2.gamma.recip());
    let positions: Vec<Vec<T>> = grid.map_positions(|x| x.to_vec());
    let stretched: Vec<Vec<T>> = positions.iter().map(|x| x.iter().map(|&v| v * c).collect()).collect();
    let fb = resample(f, &stretched);
    let h = ComposedOperator::new(&grid, Some((psi1, l)), psi2, T::zero(), rule)?.apply(&fb, t)?;
    let shrunk: Vec<Vec<T>> = positions.iter().map(|x| x.iter().map(|&v| v / c).collect()).collect();
    let rhs = resample(&h, &shrunk).values;
    let factor = b.powf(-psi1.gamma / psi2.gamma);
    let scale = lhs.sup_norm();
    if !(scale > T::zero()) {
        return Err(Error::InvalidArgument("left-hand side vanishes".into()));
    }
    let worst = lhs
        .values
        .iter()
        .zip(&rhs)
        .fold(T::zero(), |m, (a, r)| m.max((a - r * factor).norm()));
    Ok(worst / scale)
}
