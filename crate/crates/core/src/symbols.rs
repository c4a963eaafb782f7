//! Symbols `ψ(t, ξ)` of Fourier-multiplier operators, their certificate
//! constants, a name-addressable registry of built-in families, and sample
//! audits of the ellipticity bound `Re ψ ≤ -κ|ξ|^γ`, the derivative bound
//! `|∂^α ψ| ≤ μ|ξ|^{γ-|α|}` and homogeneity.
//!
//! Audits are falsifiers on finite sample sets, not proofs.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::norm;

pub type SymbolFn<T> = Arc<dyn Fn(T, &[T]) -> Complex<T> + Send + Sync>;

/// Default absolute tolerance of the ellipticity audit.
pub const S1_TOLERANCE: f64 = 1e-6;
/// Default relative tolerance of the derivative audit.
pub const S2_TOLERANCE: f64 = 1e-3;
/// Default relative tolerance of the homogeneity check.
pub const HOMOGENEITY_TOLERANCE: f64 = 1e-10;

/// Bounded nonnegative time profile `k(t)` of the `power-t` family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TimeProfile {
    /// `k(t) = slope · min(t, horizon)`.
    Linear { slope: f64, horizon: f64 },
    /// `k(t) = amp · (1 + sin(freq · t))`.
    Oscillating { amp: f64, freq: f64 },
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Linear { slope, horizon } => slope * t.min(horizon),
            TimeProfile::Oscillating { amp, freq } => amp * (1.0 + (freq * t).sin()),
        }
    }

    /// Upper bound `M` of `k`.
    pub fn bound(&self) -> f64 {
        match *self {
            TimeProfile::Linear { slope, horizon } => slope * horizon,
            TimeProfile::Oscillating { amp, .. } => 2.0 * amp,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            TimeProfile::Linear { slope, horizon } => slope >= 0.0 && horizon >= 0.0,
            TimeProfile::Oscillating { amp, freq } => amp >= 0.0 && freq.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "time profile must be nonnegative: {self:?}"
            )))
        }
    }
}

/// Closed-form description of a built-in power-law symbol
/// `sign · (coef + k(t)) · |ξ|^gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLaw {
    pub sign: f64,
    pub coef: f64,
    pub gamma: f64,
    pub profile: Option<TimeProfile>,
}

/// A symbol with its certificate parameters.
#[derive(Clone)]
pub struct SymbolSpec<T> {
    pub name: String,
    eval: SymbolFn<T>,
    /// Ellipticity constant κ.
    pub kappa: T,
    /// Derivative-bound constant μ, certified for every `|α| ≤ n_cert`.
    pub mu: T,
    /// Order-zero magnitude constant: `|ψ(t, ξ)| ≤ mu0 |ξ|^γ`.
    pub mu0: T,
    /// Order γ.
    pub gamma: T,
    /// Certified multi-index depth N.
    pub n_cert: usize,
    pub time_constant: bool,
    pub homogeneous: bool,
    pub power_law: Option<PowerLaw>,
}

impl<T> fmt::Debug for SymbolSpec<T>
where
    T: fmt::Debug,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymbolSpec")
            .field("name", &self.name)
            .field("kappa", &self.kappa)
            .field("mu", &self.mu)
            .field("mu0", &self.mu0)
            .field("gamma", &self.gamma)
            .field("n_cert", &self.n_cert)
            .field("time_constant", &self.time_constant)
            .field("homogeneous", &self.homogeneous)
            .finish()
    }
}

/// Certificate parameters for a user-supplied symbol.
#[derive(Debug, Clone, Copy)]
pub struct Certificate {
    pub kappa: f64,
    pub mu: f64,
    pub mu0: f64,
    pub gamma: f64,
    pub n_cert: usize,
    pub time_constant: bool,
    pub homogeneous: bool,
}

impl<T: Real> SymbolSpec<T> {
    /// Wrap an arbitrary symbol function with its claimed certificate.
    pub fn custom<F>(name: impl Into<String>, cert: Certificate, eval: F) -> Result<Self>
    where
        F: Fn(T, &[T]) -> Complex<T> + Send + Sync + 'static,
    {
        for (what, v) in [("kappa", cert.kappa), ("mu", cert.mu), ("gamma", cert.gamma)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{what} must be positive, got {v}")));
            }
        }
        if cert.n_cert == 0 {
            return Err(Error::InvalidArgument("certified depth must be >= 1".into()));
        }
        Ok(SymbolSpec {
            name: name.into(),
            eval: Arc::new(eval),
            kappa: T::lit(cert.kappa),
            mu: T::lit(cert.mu),
            mu0: T::lit(cert.mu0),
            gamma: T::lit(cert.gamma),
            n_cert: cert.n_cert,
            time_constant: cert.time_constant,
            homogeneous: cert.homogeneous,
            power_law: None,
        })
    }

    /// Power-law family `sign · (coef + k(t)) · |ξ|^γ` in dimension `dim`.
    ///
    /// κ = coef, `mu0 = coef + sup k`, N is the smallest depth exceeding
    /// `d + 1 + ⌊γ⌋`, and μ bounds every derivative up to that depth.
    pub fn power_law(name: impl Into<String>, law: PowerLaw, dim: usize) -> Result<Self> {
        if !(law.gamma > 0.0) || !(law.coef > 0.0) || law.sign.abs() != 1.0 {
            return Err(Error::InvalidArgument(format!("invalid power law {law:?}")));
        }
        if let Some(p) = &law.profile {
            p.validate()?;
        }
        let n_cert = (dim + 2 + law.gamma.floor() as usize).max(dim / 2 + 1);
        let magnitude = law.coef + law.profile.map_or(0.0, |p| p.bound());
        let mu = magnitude * radial_power_derivative_bound(law.gamma, dim, n_cert).max(1.0);
        let half_gamma = T::lit(law.gamma / 2.0);
        let sign = T::lit(law.sign);
        let coef = law.coef;
        let profile = law.profile;
        let eval: SymbolFn<T> = Arc::new(move |t: T, xi: &[T]| {
            let r2 = xi.iter().fold(T::zero(), |a, &x| a + x * x);
            let c = T::lit(coef + profile.map_or(0.0, |p| p.eval(t.as_f64())));
            // ψ(t, 0) = 0: limit of the power law at the origin.
            let mag = if r2 == T::zero() {
                T::zero()
            } else {
                r2.powf(half_gamma)
            };
            Complex::new(sign * c * mag, T::zero())
        });
        Ok(SymbolSpec {
            name: name.into(),
            eval,
            kappa: T::lit(law.coef),
            mu: T::lit(mu),
            mu0: T::lit(magnitude),
            gamma: T::lit(law.gamma),
            n_cert,
            time_constant: law.profile.is_none(),
            homogeneous: law.profile.is_none(),
            power_law: Some(law),
        })
    }

    /// `-|ξ|²`.
    pub fn heat(dim: usize) -> Self {
        Self::power_law(
            "heat",
            PowerLaw {
                sign: -1.0,
                coef: 1.0,
                gamma: 2.0,
                profile: None,
            },
            dim,
        )
        .expect("valid built-in")
    }

    /// `-|ξ|`.
    pub fn poisson(dim: usize) -> Self {
        Self::power_law(
            "poisson",
            PowerLaw {
                sign: -1.0,
                coef: 1.0,
                gamma: 1.0,
                profile: None,
            },
            dim,
        )
        .expect("valid built-in")
    }

    /// `-|ξ|^γ`.
    pub fn power(gamma: f64, dim: usize) -> Result<Self> {
        Self::power_law(
            format!("power:{gamma}"),
            PowerLaw {
                sign: -1.0,
                coef: 1.0,
                gamma,
                profile: None,
            },
            dim,
        )
    }

    /// `-(κ + k(t))|ξ|^γ`.
    pub fn power_t(gamma: f64, kappa: f64, profile: TimeProfile, dim: usize) -> Result<Self> {
        Self::power_law(
            format!("power-t:{gamma}"),
            PowerLaw {
                sign: -1.0,
                coef: kappa,
                gamma,
                profile: Some(profile),
            },
            dim,
        )
    }

    /// `-|ξ|^η`, the symbol of `-(-Δ)^{η/2}`.
    pub fn frac_lap(eta: f64, dim: usize) -> Result<Self> {
        Self::power_law(
            format!("frac-lap:{eta}"),
            PowerLaw {
                sign: -1.0,
                coef: 1.0,
                gamma: eta,
                profile: None,
            },
            dim,
        )
    }

    /// `ψ^k` for a time-constant power law; the symbol of `L_ψ^k`.
    ///
    /// For even `k` the sign flips, so the ellipticity bound no longer
    /// holds; such symbols only serve as the outer operator.
    pub fn powered(&self, k: u32, dim: usize) -> Result<Self> {
        let law = self.power_law.filter(|l| l.profile.is_none()).ok_or_else(|| {
            Error::Precondition(format!(
                "`{}` is not a time-constant power law; cannot form its power",
                self.name
            ))
        })?;
        if k == 0 {
            return Err(Error::InvalidArgument("power must be >= 1".into()));
        }
        let new = PowerLaw {
            sign: law.sign.powi(k as i32),
            coef: law.coef.powi(k as i32),
            gamma: law.gamma * k as f64,
            profile: None,
        };
        Self::power_law(format!("{}^{k}", self.name), new, dim)
    }

    /// Raw evaluation without checks.
    #[inline]
    pub fn value(&self, t: T, xi: &[T]) -> Complex<T> {
        (self.eval)(t, xi)
    }

    /// Class requirement `N ≥ ⌊d/2⌋ + 1`.
    pub fn validate_for_dim(&self, dim: usize) -> Result<()> {
        if self.n_cert < dim / 2 + 1 {
            return Err(Error::InvalidArgument(format!(
                "symbol `{}` certifies depth {} < floor(d/2)+1 = {}",
                self.name,
                self.n_cert,
                dim / 2 + 1
            )));
        }
        Ok(())
    }
}

/// Look up a built-in symbol by registry name.
///
/// Names: `heat`, `poisson`, `power:γ`, `frac-lap:η`,
/// `power-t:γ[:κ[:linear:slope:horizon | :osc:amp:freq]]`, and any
/// time-constant name followed by `^k`.
pub fn lookup<T: Real>(name: &str, dim: usize) -> Result<SymbolSpec<T>> {
    let unknown = || Error::UnknownSymbol(name.to_string());
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| unknown());
    if let Some((base, k)) = name.rsplit_once('^') {
        let k: u32 = k.trim().parse().map_err(|_| unknown())?;
        let mut spec = lookup::<T>(base, dim)?.powered(k, dim)?;
        spec.name = name.to_string();
        return Ok(spec);
    }
    let parts: Vec<&str> = name.split(':').collect();
    let mut spec = match parts.as_slice() {
        ["heat"] => SymbolSpec::heat(dim),
        ["poisson"] => SymbolSpec::poisson(dim),
        ["power", g] => SymbolSpec::power(num(g)?, dim)?,
        ["frac-lap", e] => SymbolSpec::frac_lap(num(e)?, dim)?,
        ["power-t", g] => SymbolSpec::power_t(
            num(g)?,
            1.0,
            TimeProfile::Linear {
                slope: 1.0,
                horizon: 100.0,
            },
            dim,
        )?,
        ["power-t", g, kap] => SymbolSpec::power_t(
            num(g)?,
            num(kap)?,
            TimeProfile::Linear {
                slope: 1.0,
                horizon: 100.0,
            },
            dim,
        )?,
        ["power-t", g, kap, "linear", slope, horizon] => SymbolSpec::power_t(
            num(g)?,
            num(kap)?,
            TimeProfile::Linear {
                slope: num(slope)?,
                horizon: num(horizon)?,
            },
            dim,
        )?,
        ["power-t", g, kap, "osc", amp, freq] => SymbolSpec::power_t(
            num(g)?,
            num(kap)?,
            TimeProfile::Oscillating {
                amp: num(amp)?,
                freq: num(freq)?,
            },
            dim,
        )?,
        _ => return Err(unknown()),
    };
    spec.name = name.to_string();
    Ok(spec)
}

/// Checked evaluation of `ψ(t, ξ)`.
pub fn eval_symbol<T: Real>(spec: &SymbolSpec<T>, t: T, xi: &[T]) -> Result<Complex<T>> {
    if !(t >= T::zero()) {
        return Err(Error::InvalidArgument(format!("symbol time must be >= 0, got {t}")));
    }
    if xi.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("frequency must be finite".into()));
    }
    let v = spec.value(t, xi);
    if !v.re.is_finite() || !v.im.is_finite() {
        return Err(Error::SymbolEvaluation {
            name: spec.name.clone(),
            t: t.as_f64(),
            xi: xi.iter().map(|x| x.as_f64()).collect(),
        });
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Condition {
    S1,
    S2,
    Homogeneity,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstPoint {
    pub t: f64,
    pub xi: Vec<f64>,
    pub alpha: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AuditReport {
    pub condition: Condition,
    /// Signed defect at the worst sample (absolute for S1/S2, relative
    /// for homogeneity).
    pub worst_violation: f64,
    /// Defect divided by the bound at the worst sample (S2 only).
    pub worst_relative: Option<f64>,
    pub worst_point: WorstPoint,
    pub sample_count: usize,
    pub tolerance: f64,
    pub pass: bool,
    pub note: &'static str,
}

const FALSIFIER_NOTE: &str = "finite-sample audit: a pass does not prove the bound on a continuum";

fn require_samples<T>(t: &[T], xi: &[Vec<T>]) -> Result<()> {
    if t.is_empty() || xi.is_empty() {
        return Err(Error::InvalidArgument("audit sample sets must be non-empty".into()));
    }
    Ok(())
}

fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

/// Worst `Re ψ(t, ξ) + κ|ξ|^γ` over the samples; passes when `≤ tol`.
pub fn audit_s1<T: Real>(
    spec: &SymbolSpec<T>,
    t_samples: &[T],
    xi_samples: &[Vec<T>],
    tol: f64,
) -> Result<AuditReport> {
    require_samples(t_samples, xi_samples)?;
    let mut worst = f64::NEG_INFINITY;
    let mut point = WorstPoint {
        t: 0.0,
        xi: vec![],
        alpha: vec![],
    };
    for xi in xi_samples {
        let r = norm(xi);
        if r == T::zero() {
            return Err(Error::Precondition("S1 audit samples must avoid xi = 0".into()));
        }
        let bound = spec.kappa * r.powf(spec.gamma);
        for &t in t_samples {
            let v = eval_symbol(spec, t, xi)?;
            let defect = (v.re + bound).as_f64();
            if defect > worst {
                worst = defect;
                point = WorstPoint {
                    t: t.as_f64(),
                    xi: to_f64(xi),
                    alpha: vec![],
                };
            }
        }
    }
    Ok(AuditReport {
        condition: Condition::S1,
        worst_violation: worst,
        worst_relative: None,
        worst_point: point,
        sample_count: t_samples.len() * xi_samples.len(),
        tolerance: tol,
        pass: worst <= tol,
        note: FALSIFIER_NOTE,
    })
}

/// Every multi-index of length `dim` with `|α| ≤ max_order`.
pub fn multi_indices(dim: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = vec![];
    let mut cur = vec![0usize; dim];
    fn rec(pos: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if pos == cur.len() {
            out.push(cur.clone());
            return;
        }
        for k in 0..=left {
            cur[pos] = k;
            rec(pos + 1, left - k, cur, out);
        }
        cur[pos] = 0;
    }
    rec(0, max_order, &mut cur, &mut out);
    out.sort_by_key(|a| a.iter().sum::<usize>());
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Nested central finite difference `∂^α ψ(t, ξ)`.
///
/// Each order gets its own step `h = ε^{1/(|α|+2)} · |ξ|`, which balances
/// O(h²) truncation against O(ε/h^{|α|}) round-off independently of the
/// dyadic scale of `ξ`.
pub fn finite_difference<T: Real>(spec: &SymbolSpec<T>, t: T, xi: &[T], alpha: &[usize]) -> Result<Complex<T>> {
    let order: usize = alpha.iter().sum();
    if order == 0 {
        return eval_symbol(spec, t, xi);
    }
    let scale = norm(xi);
    let h = T::epsilon().powf(T::lit(1.0 / (order as f64 + 2.0))) * scale;
    for (a, &x) in xi.iter().enumerate() {
        if alpha[a] > 0 && (x + h == x || !h.is_finite() || h == T::zero()) {
            return Err(Error::Audit(format!(
                "finite-difference step {h:e} underflows at xi = {:?}",
                to_f64(xi)
            )));
        }
    }
    let dim = xi.len();
    let mut acc = Complex::new(T::zero(), T::zero());
    let mut m = vec![0usize; dim];
    let mut point = xi.to_vec();
    loop {
        let mut w = 1.0;
        for a in 0..dim {
            if alpha[a] > 0 {
                w *= binomial(alpha[a], m[a]) * if m[a] % 2 == 1 { -1.0 } else { 1.0 };
                let off = alpha[a] as f64 / 2.0 - m[a] as f64;
                point[a] = xi[a] + h * T::lit(off);
            }
        }
        acc = acc + eval_symbol(spec, t, &point)? * T::lit(w);
        // odometer over m ∈ Π [0, α_a]
        let mut a = 0;
        loop {
            if a == dim {
                return Ok(acc / h.powi(order as i32));
            }
            if m[a] < alpha[a] {
                m[a] += 1;
                break;
            }
            m[a] = 0;
            a += 1;
        }
    }
}

/// Worst `|∂^α ψ| - μ|ξ|^{γ-|α|}` over samples and `|α| ≤ max_order`.
///
/// A sample passes when its defect is at most `rel_tol` times the bound.
pub fn audit_s2<T: Real>(
    spec: &SymbolSpec<T>,
    max_order: usize,
    t_samples: &[T],
    xi_samples: &[Vec<T>],
    rel_tol: f64,
) -> Result<AuditReport> {
    require_samples(t_samples, xi_samples)?;
    if max_order > spec.n_cert {
        return Err(Error::Precondition(format!(
            "max_order {max_order} exceeds certified depth {}",
            spec.n_cert
        )));
    }
    let dim = xi_samples[0].len();
    let alphas = multi_indices(dim, max_order);
    let mut worst = f64::NEG_INFINITY;
    let mut worst_rel = f64::NEG_INFINITY;
    let mut point = WorstPoint {
        t: 0.0,
        xi: vec![],
        alpha: vec![],
    };
    let mut pass = true;
    for xi in xi_samples {
        let r = norm(xi);
        if r == T::zero() || xi.iter().any(|&x| x == T::zero()) {
            return Err(Error::Precondition(
                "S2 audit samples must avoid the coordinate hyperplanes".into(),
            ));
        }
        for &t in t_samples {
            for alpha in &alphas {
                let order = alpha.iter().sum::<usize>();
                let d = finite_difference(spec, t, xi, alpha)?;
                let bound = (spec.mu * r.powf(spec.gamma - T::from_usize_lossy(order))).as_f64();
                let defect = d.norm().as_f64() - bound;
                let rel = defect / bound;
                if defect > rel_tol * bound {
                    pass = false;
                }
                if rel > worst_rel {
                    worst_rel = rel;
                }
                if defect > worst {
                    worst = defect;
                    point = WorstPoint {
                        t: t.as_f64(),
                        xi: to_f64(xi),
                        alpha: alpha.clone(),
                    };
                }
            }
        }
    }
    Ok(AuditReport {
        condition: Condition::S2,
        worst_violation: worst,
        worst_relative: Some(worst_rel),
        worst_point: point,
        sample_count: t_samples.len() * xi_samples.len() * alphas.len(),
        tolerance: rel_tol,
        pass,
        note: FALSIFIER_NOTE,
    })
}

/// Worst `|ψ(λξ) - λ^γ ψ(ξ)| / (|λ^γ ψ(ξ)| + ε_floor)`.
pub fn check_homogeneity<T: Real>(
    spec: &SymbolSpec<T>,
    lambdas: &[T],
    xi_samples: &[Vec<T>],
    tol: f64,
) -> Result<AuditReport> {
    if !spec.time_constant {
        return Err(Error::Precondition(format!(
            "homogeneity check needs a time-constant symbol; `{}` depends on t",
            spec.name
        )));
    }
    if lambdas.is_empty() || xi_samples.is_empty() {
        return Err(Error::InvalidArgument("homogeneity samples must be non-empty".into()));
    }
    let floor = T::min_positive_value().sqrt();
    let mut worst = f64::NEG_INFINITY;
    let mut point = WorstPoint {
        t: 0.0,
        xi: vec![],
        alpha: vec![],
    };
    for &lam in lambdas {
        if !(lam > T::zero()) {
            return Err(Error::InvalidArgument("dilations must be positive".into()));
        }
        for xi in xi_samples {
            let scaled: Vec<T> = xi.iter().map(|&x| x * lam).collect();
            let lhs = eval_symbol(spec, T::zero(), &scaled)?;
            let rhs = eval_symbol(spec, T::zero(), xi)? * lam.powf(spec.gamma);
            let v = ((lhs - rhs).norm() / (rhs.norm() + floor)).as_f64();
            if v > worst {
                worst = v;
                point = WorstPoint {
                    t: lam.as_f64(),
                    xi: to_f64(xi),
                    alpha: vec![],
                };
            }
        }
    }
    Ok(AuditReport {
        condition: Condition::Homogeneity,
        worst_violation: worst,
        worst_relative: None,
        worst_point: point,
        sample_count: lambdas.len() * xi_samples.len(),
        tolerance: tol,
        pass: worst <= tol,
        note: FALSIFIER_NOTE,
    })
}

/// Upper bound on `sup_{|ξ|=1} |∂^α |ξ|^γ|` over all `|α| ≤ depth`.
///
/// In one dimension this is the falling factorial `|γ(γ-1)…(γ-k+1)|`
/// (exact). Otherwise each derivative is expanded as a sum of terms
/// `c ξ^β |ξ|^e` with `|β| + e = γ - |α|`, and `Σ|c|` bounds it on the unit
/// sphere.
pub fn radial_power_derivative_bound(gamma: f64, dim: usize, depth: usize) -> f64 {
    if dim == 1 {
        let mut best: f64 = 1.0;
        let mut ff = 1.0;
        for k in 0..depth {
            ff *= gamma - k as f64;
            best = best.max(ff.abs());
        }
        return best;
    }
    type Terms = HashMap<(Vec<u32>, i64), f64>;
    // exponent e stored as e * 2^20 to hash exactly
    const SCALE: f64 = (1 << 20) as f64;
    let key_e = |e: f64| (e * SCALE).round() as i64;
    let differentiate = |terms: &Terms, axis: usize| -> Terms {
        let mut out: Terms = HashMap::new();
        for ((beta, ek), &c) in terms {
            let e = *ek as f64 / SCALE;
            if beta[axis] > 0 {
                let mut b = beta.clone();
                b[axis] -= 1;
                *out.entry((b, *ek)).or_insert(0.0) += c * beta[axis] as f64;
            }
            if e != 0.0 {
                let mut b = beta.clone();
                b[axis] += 1;
                *out.entry((b, key_e(e - 2.0))).or_insert(0.0) += c * e;
            }
        }
        out.retain(|_, c| c.abs() > 1e-300);
        out
    };
    let mut start: Terms = HashMap::new();
    start.insert((vec![0; dim], key_e(gamma)), 1.0);
    let mut memo: HashMap<Vec<usize>, Terms> = HashMap::new();
    memo.insert(vec![0; dim], start);
    let mut best: f64 = 1.0;
    for alpha in multi_indices(dim, depth) {
        if alpha.iter().all(|&a| a == 0) {
            continue;
        }
        let axis = alpha.iter().position(|&a| a > 0).expect("nonzero multi-index");
        let mut parent = alpha.clone();
        parent[axis] -= 1;
        let terms = differentiate(&memo[&parent], axis);
        best = best.max(terms.values().map(|c| c.abs()).sum());
        memo.insert(alpha, terms);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn xi_samples(dim: usize) -> Vec<Vec<f64>> {
        let mut v = vec![];
        for &r in &[0.3, 1.0, 2.7, 11.0] {
            for &th in &[0.3f64, 1.1, 2.0, 4.0] {
                v.push(match dim {
                    1 => vec![if th > 1.5 { -r } else { r }],
                    2 => vec![r * th.cos(), r * th.sin()],
                    _ => vec![r * th.cos() * 0.6, r * th.sin() * 0.6, r * 0.8],
                });
            }
        }
        v
    }

    #[test]
    fn direct_evaluation() {
        let heat = SymbolSpec::<f64>::heat(2);
        assert_eq!(eval_symbol(&heat, 0.0, &[1.0, 0.0]).unwrap(), Complex::new(-1.0, 0.0));
        let poisson = SymbolSpec::<f64>::poisson(2);
        assert_eq!(
            eval_symbol(&poisson, 3.0, &[0.0, 2.0]).unwrap(),
            Complex::new(-2.0, 0.0)
        );
        let pt = SymbolSpec::<f64>::power_t(
            1.5,
            1.0,
            TimeProfile::Linear {
                slope: 1.0,
                horizon: 10.0,
            },
            1,
        )
        .unwrap();
        assert_relative_eq!(eval_symbol(&pt, 1.0, &[1.0]).unwrap().re, -2.0);
        assert_eq!(heat.value(0.0, &[0.0, 0.0]), Complex::new(0.0, 0.0));
        assert!(eval_symbol(&heat, -1.0, &[1.0, 0.0]).is_err());
    }

    #[test]
    fn non_finite_symbol_is_reported() {
        let cert = Certificate {
            kappa: 1.0,
            mu: 1.0,
            mu0: 1.0,
            gamma: 1.0,
            n_cert: 2,
            time_constant: true,
            homogeneous: false,
        };
        let bad = SymbolSpec::<f64>::custom("bad", cert, |_, xi| Complex::new(1.0 / xi[0], 0.0)).unwrap();
        assert!(matches!(
            eval_symbol(&bad, 0.0, &[0.0]),
            Err(Error::SymbolEvaluation { .. })
        ));
    }

    #[test]
    fn s1_equality_and_sign_flip() {
        let heat = SymbolSpec::<f64>::heat(2);
        let r = audit_s1(&heat, &[0.0, 1.0], &xi_samples(2), S1_TOLERANCE).unwrap();
        assert!(r.pass);
        assert!(r.worst_violation.abs() < 1e-9);

        let cert = Certificate {
            kappa: 1.0,
            mu: 2.0,
            mu0: 1.0,
            gamma: 2.0,
            n_cert: 3,
            time_constant: true,
            homogeneous: true,
        };
        let anti = SymbolSpec::<f64>::custom("anti-heat", cert, |_, xi| {
            Complex::new(xi.iter().map(|x| x * x).sum(), 0.0)
        })
        .unwrap();
        let r = audit_s1(&anti, &[0.0], &[vec![1.0]], S1_TOLERANCE).unwrap();
        assert_relative_eq!(r.worst_violation, 2.0);
        assert!(!r.pass);

        let pt = lookup::<f64>("power-t:1.5", 1).unwrap();
        let r = audit_s1(&pt, &[0.0, 0.5, 3.0], &xi_samples(1), S1_TOLERANCE).unwrap();
        assert!(r.pass && r.worst_violation <= 0.0);

        assert!(audit_s1(&heat, &[], &xi_samples(2), S1_TOLERANCE).is_err());
    }

    #[test]
    fn s2_examples() {
        // |∂ξ ψ| = γ|ξ|^{γ-1} for ψ = -|ξ|^γ in d = 1
        let p = SymbolSpec::<f64>::power(1.5, 1).unwrap();
        assert_relative_eq!(p.mu, 1.5);
        let d = finite_difference(&p, 0.0, &[2.0], &[1]).unwrap();
        assert_relative_eq!(d.re, -1.5 * 2f64.sqrt(), max_relative = 1e-8);
        let r = audit_s2(&p, p.n_cert, &[0.0], &xi_samples(1), S2_TOLERANCE).unwrap();
        assert!(r.pass, "{r:?}");

        let heat = SymbolSpec::<f64>::heat(2);
        let d = finite_difference(&heat, 0.0, &[0.7, -1.3], &[2, 0]).unwrap();
        assert_relative_eq!(d.re, -2.0, max_relative = 1e-6);
        assert_relative_eq!(heat.mu, 2.0);

        let cert = Certificate {
            kappa: 1.0,
            mu: 0.5,
            mu0: 0.5,
            gamma: 1.0,
            n_cert: 2,
            time_constant: true,
            homogeneous: true,
        };
        let weak = SymbolSpec::<f64>::custom("weak-poisson", cert, |_, xi| {
            Complex::new(-xi.iter().map(|x| x * x).sum::<f64>().sqrt(), 0.0)
        })
        .unwrap();
        let r = audit_s2(&weak, 0, &[0.0], &[vec![1.0]], S2_TOLERANCE).unwrap();
        assert_relative_eq!(r.worst_violation, 0.5);
        assert!(!r.pass);

        assert!(audit_s2(&heat, heat.n_cert + 1, &[0.0], &xi_samples(2), S2_TOLERANCE).is_err());
        assert!(audit_s2(&heat, 1, &[0.0], &[vec![0.0, 1.0]], S2_TOLERANCE).is_err());
    }

    #[test]
    fn built_in_families_pass_their_own_certificates() {
        for dim in 1..=3 {
            for name in ["heat", "poisson", "power:1.5", "power:0.5", "frac-lap:1", "power-t:2"] {
                let s = lookup::<f64>(name, dim).unwrap();
                s.validate_for_dim(dim).unwrap();
                let ts = [0.0, 0.7, 4.0];
                let xs = xi_samples(dim);
                assert!(audit_s1(&s, &ts, &xs, S1_TOLERANCE).unwrap().pass, "{name} d={dim}");
                let order = s.n_cert.min(4);
                let r = audit_s2(&s, order, &ts, &xs, S2_TOLERANCE).unwrap();
                assert!(r.pass, "{name} d={dim}: {r:?}");
            }
        }
    }

    #[test]
    fn homogeneity() {
        let p = SymbolSpec::<f64>::poisson(2);
        let r = check_homogeneity(&p, &[2.0], &[vec![1.0, 0.0]], HOMOGENEITY_TOLERANCE).unwrap();
        assert_eq!(r.worst_violation, 0.0);
        let h = SymbolSpec::<f64>::heat(1);
        let r = check_homogeneity(&h, &[3.0], &xi_samples(1), HOMOGENEITY_TOLERANCE).unwrap();
        assert!(r.pass && r.worst_violation < 1e-15);

        let cert = Certificate {
            kappa: 1.0,
            mu: 4.0,
            mu0: 2.0,
            gamma: 2.0,
            n_cert: 3,
            time_constant: true,
            homogeneous: false,
        };
        let mixed = SymbolSpec::<f64>::custom("mixed", cert, |_, xi| {
            let r = xi[0].abs();
            Complex::new(-r - r * r, 0.0)
        })
        .unwrap();
        let r = check_homogeneity(&mixed, &[2.0], &[vec![1.0]], HOMOGENEITY_TOLERANCE).unwrap();
        // |ψ(2) - 4ψ(1)| / |4ψ(1)| = |-6 + 8| / 8
        assert_relative_eq!(r.worst_violation, 0.25, max_relative = 1e-12);
        assert!(!r.pass);

        let pt = lookup::<f64>("power-t:2", 1).unwrap();
        assert!(matches!(
            check_homogeneity(&pt, &[2.0], &[vec![1.0]], 1e-10),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn registry_names() {
        assert!(lookup::<f64>("nope", 1).is_err());
        assert!(lookup::<f64>("power:x", 1).is_err());
        let sq = lookup::<f64>("poisson^2", 1).unwrap();
        assert_relative_eq!(sq.value(0.0, &[3.0]).re, 9.0);
        assert_relative_eq!(sq.gamma, 2.0);
        let osc = lookup::<f64>("power-t:2:0.5:osc:0.25:3", 1).unwrap();
        assert!(!osc.time_constant);
        assert_relative_eq!(osc.mu0, 1.0);
        assert!(lookup::<f64>("power-t:2^2", 1).is_err());
    }

    #[test]
    fn derivative_bound_matches_one_dimensional_formula() {
        assert_relative_eq!(radial_power_derivative_bound(2.0, 1, 5), 2.0);
        assert_relative_eq!(radial_power_derivative_bound(1.0, 1, 5), 1.0);
        // d = 2, γ = 2: ∂_i |ξ|² = 2ξ_i, ∂_i² = 2
        assert_relative_eq!(radial_power_derivative_bound(2.0, 2, 4), 2.0);
    }

    #[test]
    fn evaluation_is_pure() {
        let s = lookup::<f64>("power:1.3", 2).unwrap();
        let a = s.value(0.5, &[0.3, -0.9]);
        let b = s.value(0.5, &[0.3, -0.9]);
        assert_eq!(a.re.to_bits(), b.re.to_bits());
    }
}
