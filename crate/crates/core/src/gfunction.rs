//! Littlewood–Paley g-functions
//! `G(x) = (∫_s^{s+a} (t-s)^{qγ₁/γ₂-1} |L_{ψ₁}(l) T_{ψ₂}(t,s) f(x)|^q dt)^{1/q}`
//! and corpus statistics of `‖G‖_p / ‖f‖_p`.

use std::fmt;
use std::io::Write;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::evolution::{ComposedOperator, TimeIntegralRule};
use crate::quadrature::GaussLegendre;
use crate::scalar::Real;
use crate::spectral::{inverse_transform, lp_norm, Field, GridSpec, SpectralField};
use crate::symbols::SymbolSpec;

/// `-ln(1e-16)`: decay exponent at which the time integral is truncated.
pub const TRUNCATION_EXPONENT: f64 = 36.841_361_487_904_734;

/// Lower end of the graded mesh, as a multiple of `1/(κ₂ ξ_max^{γ₂})`.
const FIRST_PANEL_SCALE: f64 = 1e-3;

/// Time nodes evaluated together; bounds memory for the node multipliers.
const NODE_CHUNK: usize = 32;

/// Length `a` of the time window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> Horizon<T> {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Horizon::Infinite)
    }

    pub fn finite(&self) -> Option<T> {
        match *self {
            Horizon::Finite(a) => Some(a),
            Horizon::Infinite => None,
        }
    }
}

impl<T: Real> fmt::Display for Horizon<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Horizon::Finite(a) => write!(f, "{a}"),
            Horizon::Infinite => f.write_str("inf"),
        }
    }
}

impl<T: Real> Serialize for Horizon<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Horizon::Finite(a) => s.serialize_f64(a.as_f64()),
            Horizon::Infinite => s.serialize_str("inf"),
        }
    }
}

/// Spectral scales that set the graded time mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowScales<T> {
    /// Decay constant `κ₂` of `Re ψ₂ ≤ -κ₂|ξ|^{γ₂}`.
    pub kappa2: T,
    /// Smallest nonzero frequency present (sets the truncation time).
    pub xi_min: T,
    /// Largest frequency present (sets the first panel).
    pub xi_max: T,
    /// Drop `(s, s + cutoff)` from the window.
    pub lower_cutoff: Option<T>,
}

impl<T: Real> WindowScales<T> {
    pub fn for_grid(grid: &GridSpec<T>, kappa2: T) -> Self {
        WindowScales {
            kappa2,
            xi_min: grid.min_nonzero_frequency(),
            xi_max: grid.max_frequency_norm(),
            lower_cutoff: None,
        }
    }

    /// `TRUNCATION_EXPONENT / (κ₂ ξ^{γ₂})` at `ξ = ξ_max`: the time after which
    /// every resolved mode has decayed by `1e-16`.
    pub fn resolution_time(&self, gamma2: T) -> T {
        T::lit(TRUNCATION_EXPONENT) / (self.kappa2 * self.xi_max.powf(gamma2))
    }
}

/// Quadrature for `∫_s^{s+a} (t-s)^{β-1} F(t) dt`, `β = qγ₁/γ₂`.
#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "T: Real"))]
pub struct TimeWindow<T> {
    pub s: T,
    pub a: Horizon<T>,
    pub weight_exponent: T,
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    /// Upper limit actually integrated to when `a` is infinite.
    pub truncation_t: Option<T>,
    pub lower_cutoff: Option<T>,
}

impl<T: Real> TimeWindow<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `β = qγ₁/γ₂`.
    pub fn beta(&self) -> T {
        self.weight_exponent + T::one()
    }
}

/// Gauss–Legendre in `u = (t-s)^β` on `[τ_a, τ_b]`, appended to `out`.
fn push_panel<T: Real>(gl: &GaussLegendre<T>, beta: T, ta: T, tb: T, out: &mut Vec<(T, T)>) {
    let (ua, ub) = (ta.powf(beta), tb.powf(beta));
    for (u, w) in gl.on_interval(ua, ub) {
        out.push((u.powf(beta.recip()), w / beta));
    }
}

/// Build the time quadrature.
///
/// Without `scales` the window must be finite and gets one Gauss–Legendre
/// panel of `n_nodes` nodes in `u = (t-s)^β`. With `scales` the window is
/// split into dyadically graded panels `[0, τ₀], [τ₀, 2τ₀], …` with
/// `τ₀ = 1e-3/(κ₂ ξ_max^{γ₂})` and `n_nodes` nodes each, which resolves
/// every lattice frequency; an infinite window is truncated at
/// `36.84/(κ₂ ξ_min^{γ₂})`, where the slowest mode has decayed by `1e-16`.
pub fn build_time_window<T: Real>(
    s: T,
    a: Horizon<T>,
    q: T,
    gamma1: T,
    gamma2: T,
    n_nodes: usize,
    scales: Option<&WindowScales<T>>,
) -> Result<TimeWindow<T>> {
    if !(q >= T::one()) {
        return Err(Error::InvalidArgument(format!("q must be >= 1, got {q}")));
    }
    if !(gamma1 > T::zero() && gamma2 > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "orders must be positive, got gamma1 = {gamma1}, gamma2 = {gamma2}"
        )));
    }
    if !(s >= T::zero()) || n_nodes == 0 {
        return Err(Error::InvalidArgument(format!(
            "need s >= 0 and at least one node, got s = {s}, n_nodes = {n_nodes}"
        )));
    }
    if let Some(a) = a.finite() {
        if !(a > T::zero() && a.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "window length must be positive, got {a}"
            )));
        }
    }
    let beta = q * gamma1 / gamma2;
    let gl = GaussLegendre::<T>::new(n_nodes);
    let mut pairs = Vec::new();
    let mut truncation_t = None;
    let mut lower_cutoff = None;
    match scales {
        None => {
            let a = a
                .finite()
                .ok_or_else(|| Error::Window("an infinite window needs the spectral scales of the grid".into()))?;
            push_panel(&gl, beta, T::zero(), a, &mut pairs);
        }
        Some(sc) => {
            if !(sc.kappa2 > T::zero()) || !(sc.xi_max > T::zero()) {
                return Err(Error::Window(format!(
                    "need kappa2 > 0 and xi_max > 0, got {} and {}",
                    sc.kappa2, sc.xi_max
                )));
            }
            let upper = match a {
                Horizon::Finite(a) => a,
                Horizon::Infinite => {
                    if !(sc.xi_min > T::zero()) {
                        return Err(Error::Window(
                            "infinite window with zero-frequency content: remove the mean so \
                             the spectrum has a gap at the origin"
                                .into(),
                        ));
                    }
                    let t = T::lit(TRUNCATION_EXPONENT) / (sc.kappa2 * sc.xi_min.powf(gamma2));
                    truncation_t = Some(t);
                    t
                }
            };
            let first = T::lit(FIRST_PANEL_SCALE) / (sc.kappa2 * sc.xi_max.powf(gamma2));
            let mut lo = match sc.lower_cutoff {
                Some(c) if c > T::zero() => {
                    if c >= upper {
                        return Err(Error::Window(format!(
                            "lower cutoff {c} is past the end of the window {upper}"
                        )));
                    }
                    lower_cutoff = Some(c);
                    c
                }
                _ => {
                    let hi = first.min(upper);
                    push_panel(&gl, beta, T::zero(), hi, &mut pairs);
                    hi
                }
            };
            while lo < upper {
                let hi = (lo * T::lit(2.0)).min(upper);
                // Avoid a sliver panel at the end.
                let hi = if upper - hi < lo * T::lit(0.25) { upper } else { hi };
                push_panel(&gl, beta, lo, hi, &mut pairs);
                lo = hi;
            }
        }
    }
    Ok(TimeWindow {
        s,
        a,
        weight_exponent: beta - T::one(),
        nodes: pairs.iter().map(|&(t, _)| s + t).collect(),
        weights: pairs.iter().map(|&(_, w)| w).collect(),
        truncation_t,
        lower_cutoff,
    })
}

/// Window on `grid` for the pair `(ψ₁, ψ₂)` with graded panels of
/// `nodes_per_panel` nodes.
pub fn window_for_grid<T: Real>(
    s: T,
    a: Horizon<T>,
    q: T,
    psi1: &SymbolSpec<T>,
    psi2: &SymbolSpec<T>,
    grid: &GridSpec<T>,
    nodes_per_panel: usize,
) -> Result<TimeWindow<T>> {
    let scales = WindowScales::for_grid(grid, psi2.kappa);
    build_time_window(s, a, q, psi1.gamma, psi2.gamma, nodes_per_panel, Some(&scales))
}

/// Default panel order for [`window_for_grid`].
pub const DEFAULT_NODES_PER_PANEL: usize = 16;

/// Refuse `(q, a)` combinations outside the hypotheses of the bounds:
/// an infinite window needs `q = 2` or a homogeneous, time-constant pair.
pub fn check_legality<T: Real>(psi1: &SymbolSpec<T>, psi2: &SymbolSpec<T>, q: T, a: Horizon<T>) -> Result<()> {
    if !a.is_infinite() || q == T::lit(2.0) {
        return Ok(());
    }
    let ok = |p: &SymbolSpec<T>| p.time_constant && p.homogeneous;
    if ok(psi1) && ok(psi2) {
        return Ok(());
    }
    let offender = if ok(psi1) { psi2 } else { psi1 };
    Err(Error::Precondition(format!(
        "an infinite time window with q = {q} requires both symbols to be time-constant and \
         homogeneous (or q = 2, where Plancherel applies); `{}` is {}",
        offender.name,
        if offender.time_constant {
            "not homogeneous"
        } else {
            "time-dependent"
        }
    )))
}

/// `|L_{ψ₁}(l) T_{ψ₂}(t_i, s) f|^q` summed against the window weights, for
/// several fields at once. The reduction runs in node order, so results do
/// not depend on the thread count.
pub fn g_functions<T: Real>(
    fields: &[Field<T>],
    psi1: &SymbolSpec<T>,
    l: T,
    psi2: &SymbolSpec<T>,
    window: &TimeWindow<T>,
    q: T,
) -> Result<Vec<Field<T>>> {
    let Some(first) = fields.first() else {
        return Ok(Vec::new());
    };
    let grid = first.grid;
    for f in fields {
        f.grid.ensure_same(&grid)?;
    }
    if !(q >= T::one()) {
        return Err(Error::InvalidArgument(format!("q must be >= 1, got {q}")));
    }
    let spectra: Vec<SpectralField<T>> = fields
        .iter()
        .map(|f| {
            let mut f = f.clone();
            if window.a.is_infinite() {
                f.remove_mean();
            }
            f.forward()
        })
        .collect();
    let rule = TimeIntegralRule::default_for(psi2);
    let op = ComposedOperator::new(&grid, Some((psi1, l)), psi2, window.s, rule)?;
    let mut acc = vec![vec![T::zero(); grid.len()]; fields.len()];
    let mut cur_t = window.s;
    let mut cur_q = vec![Complex::new(T::zero(), T::zero()); grid.len()];
    for (chunk_t, chunk_w) in window.nodes.chunks(NODE_CHUNK).zip(window.weights.chunks(NODE_CHUNK)) {
        let mults: Vec<Vec<Complex<T>>> = if psi2.time_constant {
            chunk_t.par_iter().map(|&t| op.multiplier(t)).collect::<Result<_>>()?
        } else {
            let mut out = Vec::with_capacity(chunk_t.len());
            for &t in chunk_t {
                let inc = op.exponent_increment(cur_t, t)?;
                for (a, b) in cur_q.iter_mut().zip(inc) {
                    *a = *a + b;
                }
                cur_t = t;
                out.push(op.multiplier_from_exponent(&cur_q));
            }
            out
        };
        for (spec, sum) in spectra.iter().zip(acc.iter_mut()) {
            let terms: Vec<Vec<T>> = mults
                .par_iter()
                .zip(chunk_w.par_iter())
                .map(|(m, &w)| {
                    let u = inverse_transform(&spec.multiply(m)?);
                    Ok(u.values.iter().map(|v| w * v.norm().powf(q)).collect())
                })
                .collect::<Result<_>>()?;
            for term in &terms {
                for (s, v) in sum.iter_mut().zip(term) {
                    *s = *s + *v;
                }
            }
        }
    }
    let inv_q = q.recip();
    Ok(acc
        .into_iter()
        .map(|sum| Field {
            grid,
            values: sum
                .into_iter()
                .map(|v| Complex::new(v.max(T::zero()).powf(inv_q), T::zero()))
                .collect(),
        })
        .collect())
}

pub fn g_function<T: Real>(
    f: &Field<T>,
    psi1: &SymbolSpec<T>,
    l: T,
    psi2: &SymbolSpec<T>,
    window: &TimeWindow<T>,
    q: T,
) -> Result<Field<T>> {
    Ok(g_functions(std::slice::from_ref(f), psi1, l, psi2, window, q)?.remove(0))
}

/// `μ₁² Γ(2γ₁/γ₂) (2κ₂)^{-2γ₁/γ₂}`: bound on `‖G‖₂² / ‖f‖₂²` for `q = 2`,
/// `a = ∞`.
pub fn explicit_q2_constant(mu1: f64, kappa2: f64, gamma1: f64, gamma2: f64) -> Result<f64> {
    if !(mu1 > 0.0 && kappa2 > 0.0 && gamma1 > 0.0 && gamma2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "constants must be positive: mu1 = {mu1}, kappa2 = {kappa2}, gamma1 = {gamma1}, gamma2 = {gamma2}"
        )));
    }
    let r = 2.0 * gamma1 / gamma2;
    Ok(mu1 * mu1 * statrs::function::gamma::gamma(r) * (2.0 * kappa2).powf(-r))
}

/// Time-window parameters independent of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound(serialize = "T: Real"))]
pub struct WindowConfig<T> {
    pub s: T,
    pub a: Horizon<T>,
    pub nodes_per_panel: usize,
}

#[derive(Debug, Clone, Serialize)]
#[serde(bound(serialize = "T: Real"))]
pub struct RatioReport<T> {
    pub pair: String,
    pub p: T,
    pub q: T,
    pub s: T,
    pub a: Horizon<T>,
    pub n: usize,
    pub per_field: Vec<T>,
    pub max: T,
    pub median: T,
    /// `|max(2n) / max(n) - 1|`.
    pub refinement_drift: Option<T>,
    pub refined_max: Option<T>,
}

impl<T: Real> RatioReport<T> {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "field_id,ratio")?;
        for (i, r) in self.per_field.iter().enumerate() {
            writeln!(w, "{i},{r:e}")?;
        }
        Ok(())
    }
}

fn ratios<T: Real>(
    corpus: &[Field<T>],
    p: T,
    q: T,
    psi1: &SymbolSpec<T>,
    l: T,
    psi2: &SymbolSpec<T>,
    window: &WindowConfig<T>,
) -> Result<Vec<T>> {
    let grid = corpus[0].grid;
    let win = window_for_grid(window.s, window.a, q, psi1, psi2, &grid, window.nodes_per_panel)?;
    let gs = g_functions(corpus, psi1, l, psi2, &win, q)?;
    corpus
        .iter()
        .zip(&gs)
        .map(|(f, g)| {
            let mut f = f.clone();
            if window.a.is_infinite() {
                f.remove_mean();
            }
            let nf = lp_norm(&f, p)?;
            if !(nf > T::zero()) {
                return Err(Error::InvalidArgument("corpus field has zero norm".into()));
            }
            Ok(lp_norm(g, p)? / nf)
        })
        .collect()
}

fn median<T: Real>(v: &[T]) -> T {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite ratios"));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / T::lit(2.0)
    }
}

/// Per-field `‖G(f)‖_p / ‖f‖_p`. When `refined` is given (the same corpus
/// sampled with `2n` points), the drift of the maximum is reported.
#[allow(clippy::too_many_arguments)]
pub fn ratio_report<T: Real>(
    corpus: &[Field<T>],
    refined: Option<&[Field<T>]>,
    p: T,
    q: T,
    psi1: &SymbolSpec<T>,
    l: T,
    psi2: &SymbolSpec<T>,
    window: &WindowConfig<T>,
) -> Result<RatioReport<T>> {
    if corpus.is_empty() {
        return Err(Error::InvalidArgument("empty corpus".into()));
    }
    if !(p > T::one()) {
        return Err(Error::InvalidArgument(format!("p must be > 1, got {p}")));
    }
    check_legality(psi1, psi2, q, window.a)?;
    let per_field = ratios(corpus, p, q, psi1, l, psi2, window)?;
    let max = per_field.iter().copied().fold(T::zero(), T::max);
    let refined_max = match refined {
        Some(r) if !r.is_empty() => {
            let v = ratios(r, p, q, psi1, l, psi2, window)?;
            Some(v.into_iter().fold(T::zero(), T::max))
        }
        _ => None,
    };
    Ok(RatioReport {
        pair: format!("{}/{}", psi1.name, psi2.name),
        p,
        q,
        s: window.s,
        a: window.a,
        n: corpus[0].grid.n,
        median: median(&per_field),
        per_field,
        max,
        refinement_drift: refined_max.map(|r| (r / max - T::one()).abs()),
        refined_max,
    })
}
