//! Scenario dispatch and artifact writing.
//!
//! Every run writes `summary.json` (deterministic), one or more CSV tables,
//! and `metadata.json`, which holds the only wall-clock data.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};
use speclp_core::gfunction::{self, WindowConfig};
use speclp_core::kernel_audit::{self as ka, PvQuadrature};
use speclp_core::lp_decomp as lp;
use speclp_core::spectral::lp_norm;
use speclp_core::symbols::{self, HOMOGENEITY_TOLERANCE, S1_TOLERANCE, S2_TOLERANCE};
use speclp_core::{Field64, Grid64, Symbol64};

use crate::acceptance;
use crate::config::{Scenario, ScenarioConfig};
use crate::corpus::generate_corpus;
use crate::HarnessError;

pub const SCHEMA_VERSION: u32 = 1;

/// One named pass criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: &'static str,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            relation: "<=",
            threshold,
            pass: value <= threshold,
        }
    }

    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            relation: "<",
            threshold,
            pass: value < threshold,
        }
    }

    pub fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            relation: ">",
            threshold,
            pass: value > threshold,
        }
    }

    /// Passes iff `value` is finite.
    pub fn finite(name: impl Into<String>, value: f64) -> Self {
        Check::at_most(name, value.abs(), f64::MAX)
    }
}

/// What a scenario computed, before it is written out.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    /// Wall-clock checks; they count toward `pass` but are written to the
    /// metadata file so the summary stays byte-reproducible.
    pub timings: Vec<Check>,
    /// Headline numbers, copied to the top level of the summary.
    pub metrics: BTreeMap<String, f64>,
    pub report: Value,
    pub tables: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().chain(&self.timings).all(|c| c.pass)
    }
}

#[derive(Debug)]
pub struct RunResult {
    pub scenario: Scenario,
    pub pass: bool,
    pub out_dir: PathBuf,
    pub outcome: Outcome,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    scenario: Scenario,
    pass: bool,
    #[serde(flatten)]
    metrics: &'a BTreeMap<String, f64>,
    checks: &'a [Check],
    config: &'a ScenarioConfig,
    report: &'a Value,
}

/// Run `scenario` with `cfg` and write its artifacts into `out_dir`.
pub fn run_scenario(scenario: Scenario, cfg: &ScenarioConfig, out_dir: &Path) -> Result<RunResult, HarnessError> {
    let outcome = match scenario {
        Scenario::AuditSymbol => audit_symbol(cfg)?,
        Scenario::KernelDecay => kernel_decay(cfg)?,
        Scenario::Hormander => hormander(cfg)?,
        Scenario::DyadicEnvelope => dyadic_envelope(cfg)?,
        Scenario::GfunRatio => gfun_ratio(cfg)?,
        Scenario::LpDecomp => lp_decomp(cfg)?,
        Scenario::FraclapXcheck => fraclap_xcheck(cfg)?,
        Scenario::Reproduce => reproduce(&mut |_| {})?,
    };
    write_outputs(scenario, cfg, &outcome, out_dir)?;
    Ok(RunResult {
        scenario,
        pass: outcome.pass(),
        out_dir: out_dir.to_path_buf(),
        outcome,
    })
}

pub fn write_outputs(
    scenario: Scenario,
    cfg: &ScenarioConfig,
    o: &Outcome,
    out_dir: &Path,
) -> Result<(), HarnessError> {
    fs::create_dir_all(out_dir)?;
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        scenario,
        pass: o.pass(),
        metrics: &o.metrics,
        checks: &o.checks,
        config: cfg,
        report: &o.report,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    fs::write(out_dir.join("summary.json"), text)?;
    for (name, bytes) in &o.tables {
        fs::write(out_dir.join(name), bytes)?;
    }
    let stamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let meta = json!({
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario,
        "description": scenario.description(),
        "timestamp_unix": stamp,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "timings": o.timings,
    });
    fs::write(
        out_dir.join("metadata.json"),
        serde_json::to_string_pretty(&meta)? + "\n",
    )?;
    Ok(())
}

/// Legality failures are configuration errors.
fn legality(psi1: &Symbol64, psi2: &Symbol64, q: f64, a: gfunction::Horizon<f64>) -> Result<(), HarnessError> {
    gfunction::check_legality(psi1, psi2, q, a).map_err(|e| match e {
        speclp_core::Error::Precondition(msg) => HarnessError::Config(msg),
        other => other.into(),
    })
}

fn csv<F>(f: F) -> Result<Vec<u8>, HarnessError>
where
    F: FnOnce(&mut Vec<u8>) -> std::io::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

/// Quote a CSV field when it holds a comma or a quote.
fn csv_field(s: &str) -> String {
    if s.contains([',', '"']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn homogeneous_pair(a: &Symbol64, b: &Symbol64) -> bool {
    a.time_constant && a.homogeneous && b.time_constant && b.homogeneous
}

/// Directions off the coordinate hyperplanes, times radii `2^{k/2}`.
fn audit_frequencies(dim: usize) -> Vec<Vec<f64>> {
    let dirs: Vec<Vec<f64>> = match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => [0.3f64, 1.1, 2.0, 4.0].iter().map(|a| vec![a.cos(), a.sin()]).collect(),
        _ => [[1.0, 2.0, 3.0], [-2.0, 1.0, 0.5], [0.7, -0.4, -1.3]]
            .iter()
            .map(|v| {
                let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.iter().map(|x| x / n).collect()
            })
            .collect(),
    };
    (-12..=12)
        .flat_map(|k| {
            let r = 2f64.powf(k as f64 / 2.0);
            dirs.iter().map(move |d| d.iter().map(|x| x * r).collect::<Vec<f64>>())
        })
        .collect()
}

fn audit_symbol(cfg: &ScenarioConfig) -> Result<Outcome, HarnessError> {
    let (psi1, psi2) = cfg.symbols()?;
    let mut syms = vec![psi1];
    if psi2.name != syms[0].name {
        syms.push(psi2);
    }
    let xi = audit_frequencies(cfg.dim);
    let mut out = Outcome::default();
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for psi in &syms {
        let times: Vec<f64> = if psi.time_constant {
            vec![0.0]
        } else {
            vec![0.0, 0.5, 1.0, 2.0, 5.0]
        };
        let order = cfg.audit_max_order.min(psi.n_cert);
        let mut audits = vec![
            symbols::audit_s1(psi, &times, &xi, S1_TOLERANCE)?,
            symbols::audit_s2(psi, order, &times, &xi, S2_TOLERANCE)?,
        ];
        if psi.time_constant && psi.homogeneous {
            audits.push(symbols::check_homogeneity(
                psi,
                &[0.5, 2.0, 7.0],
                &xi,
                HOMOGENEITY_TOLERANCE,
            )?);
        }
        for a in &audits {
            let cond = format!("{:?}", a.condition);
            let (value, tol) = match a.worst_relative {
                Some(r) => (r, a.tolerance),
                None => (a.worst_violation, a.tolerance),
            };
            out.checks
                .push(Check::at_most(format!("{}:{cond}", psi.name), value, tol));
            rows.push(format!(
                "{},{cond},{:e},{:e},{}",
                csv_field(&psi.name),
                a.worst_violation,
                a.tolerance,
                a.pass
            ));
        }
        reports.push(json!({ "symbol": psi.name, "s2_order": order, "audits": audits }));
    }
    out.report = json!({ "symbols": reports });
    let mut table = String::from("symbol,condition,worst_violation,tolerance,pass\n");
    for r in rows {
        table.push_str(&r);
        table.push('\n');
    }
    out.tables.push(("audit.csv".into(), table.into_bytes()));
    Ok(out)
}

fn kernel_decay(cfg: &ScenarioConfig) -> Result<Outcome, HarnessError> {
    let grid = cfg.grid()?;
    let (psi1, psi2) = cfg.symbols()?;
    let window = match (cfg.r_lo, cfg.r_hi) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => return Err(HarnessError::Config("set both r_lo and r_hi, or neither".into())),
    };
    if cfg.t.is_nan() || cfg.t <= cfg.s {
        return Err(HarnessError::Config(format!("t = {} must exceed s = {}", cfg.t, cfg.s)));
    }
    let tau = cfg.t - cfg.s;
    let space_times = [cfg.s + tau / 2.0, cfg.t, cfg.s + 2.0 * tau];
    let space: Vec<_> = space_times
        .iter()
        .map(|&t| ka::decay_fit_space(&psi1, cfg.l, &psi2, cfg.s, t, &grid, window))
        .collect::<Result<_, _>>()?;
    let time = ka::decay_fit_time(&psi1, cfg.l, &psi2, cfg.s, &grid, &cfg.t_list)?;
    let consts: Vec<f64> = space.iter().map(|r| r.fitted_constant).collect();
    let (lo, hi) = consts
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &c| (a.min(c), b.max(c)));
    let variation = hi / lo - 1.0;

    let mut out = Outcome::default();
    out.checks
        .push(Check::finite("time_constant_finite", time.fitted_constant));
    out.checks
        .push(Check::finite("space_constant_finite", space[1].fitted_constant));
    if homogeneous_pair(&psi1, &psi2) {
        out.checks.push(Check::at_most(
            "time_exponent_rel_error",
            time.relative_exponent_error(),
            0.02,
        ));
        out.checks
            .push(Check::below("space_constant_variation", variation, 0.1));
    }
    out.metrics.insert("time_exponent".into(), time.fitted_exponent);
    out.metrics.insert("time_exponent_target".into(), time.target_exponent);
    out.metrics.insert("space_exponent".into(), space[1].fitted_exponent);
    out.metrics.insert("space_constant_variation".into(), variation);
    out.report = json!({
        "space": { "times": space_times, "fits": space },
        "time": time,
    });
    out.tables
        .push(("space_decay.csv".into(), csv(|w| space[1].write_csv("r", w))?));
    out.tables
        .push(("time_decay.csv".into(), csv(|w| time.write_csv("t", w))?));
    Ok(out)
}

fn hormander(cfg: &ScenarioConfig) -> Result<Outcome, HarnessError> {
    let grid = cfg.grid()?;
    let (psi1, psi2) = cfg.symbols()?;
    let a = cfg.horizon()?;
    legality(&psi1, &psi2, cfg.q, a)?;
    if cfg.y_exp_max <= cfg.y_exp_min {
        return Err(HarnessError::Config("y_exp_max must exceed y_exp_min".into()));
    }
    let window = gfunction::window_for_grid(cfg.s, a, cfg.q, &psi1, &psi2, &grid, cfg.nodes_per_panel)?;
    let mags: Vec<f64> = (cfg.y_exp_min..=cfg.y_exp_max).map(|k| 2f64.powi(k)).collect();
    let r = ka::hormander_sweep(&psi1, cfg.l, &psi2, &window, cfg.q, &mags, &grid)?;
    let mut out = Outcome::default();
    out.checks.push(Check::finite("sup_h", r.sup));
    out.checks
        .push(Check::at_most("abs_trend_slope", r.trend_slope.abs(), 0.1));
    out.metrics.insert("sup_h".into(), r.sup);
    out.metrics.insert("trend_slope".into(), r.trend_slope);
    out.report = json!({ "window_nodes": window.len(), "truncation_t": window.truncation_t, "sweep": r });
    out.tables.push(("hormander.csv".into(), csv(|w| r.write_csv(w))?));
    Ok(out)
}

fn dyadic_envelope(cfg: &ScenarioConfig) -> Result<Outcome, HarnessError> {
    let grid = cfg.grid()?;
    let (psi1, psi2) = cfg.symbols()?;
    let d = lp::build_decomposition(&grid);
    let r = ka::dyadic_l1_envelope(&psi1, cfg.l, &psi2, cfg.s, cfg.t, (cfg.j_lo, cfg.j_hi), &d, cfg.low_fit)?;
    let above = r
        .rows
        .iter()
        .filter(|row| !row.below_floor && row.slack < 1.0 - 1e-9)
        .count();
    let slope_err = ((r.low_slope - psi1.gamma) / psi1.gamma).abs();
    let mut out = Outcome::default();
    out.checks.push(Check::above("decay_rate_c", r.c, 0.0));
    out.checks
        .push(Check::at_most("rows_above_envelope", above as f64, 0.0));
    out.checks.push(Check::at_most("low_slope_rel_error", slope_err, 0.05));
    out.metrics.insert("big_c".into(), r.big_c);
    out.metrics.insert("c".into(), r.c);
    out.metrics.insert("low_slope".into(), r.low_slope);
    out.report = serde_json::to_value(&r)?;
    out.tables.push(("envelope.csv".into(), csv(|w| r.write_csv(w))?));
    Ok(out)
}

fn corpus_fields(cfg: &ScenarioConfig, grid: &Grid64) -> Result<Vec<Field64>, HarnessError> {
    Ok(generate_corpus(&cfg.corpus_spec(), grid)?
        .into_iter()
        .map(|e| e.field)
        .collect())
}

fn gfun_ratio(cfg: &ScenarioConfig) -> Result<Outcome, HarnessError> {
    let grid = cfg.grid()?;
    let (psi1, psi2) = cfg.symbols()?;
    let a = cfg.horizon()?;
    legality(&psi1, &psi2, cfg.q, a)?;
    let fields = corpus_fields(cfg, &grid)?;
    let refined = if cfg.refine {
        let fine = Grid64::new(cfg.dim, 2 * cfg.n, cfg.half_extent)?;
        Some(corpus_fields(cfg, &fine)?)
    } else {
        None
    };
    let win = WindowConfig {
        s: cfg.s,
        a,
        nodes_per_panel: cfg.nodes_per_panel,
    };
    let r = gfunction::ratio_report(&fields, refined.as_deref(), cfg.p, cfg.q, &psi1, cfg.l, &psi2, &win)?;
    let mut out = Outcome::default();
    out.checks.push(Check::finite("max_ratio", r.max));
    out.metrics.insert("max_ratio".into(), r.max);
    out.metrics.insert("median_ratio".into(), r.median);
    let mut explicit = None;
    if cfg.p == 2.0 && cfg.q == 2.0 && a.is_infinite() {
        let c = gfunction::explicit_q2_constant(psi1.mu0, psi2.kappa, psi1.gamma, psi2.gamma)?;
        out.checks.push(Check::at_most(
            "max_ratio_sq_over_explicit",
            r.max * r.max / c,
            1.0 + 1e-3,
        ));
        explicit = Some(c);
    }
    if let Some(drift) = r.refinement_drift {
        out.checks.push(Check::below("refinement_drift", drift, 0.05));
        out.metrics.insert("refinement_drift".into(), drift);
    }
    out.report = json!({ "explicit_q2_constant": explicit, "ratios": r });
    out.tables.push(("ratios.csv".into(), csv(|w| r.write_csv(w))?));
    Ok(out)
}

/// Largest `|Σ_j Φ(2^{-j}ξ) - 1|` over the nonzero lattice frequencies.
pub fn partition_defect(d: &lp::DyadicDecomposition<f64>) -> Result<f64, HarnessError> {
    let blocks = (d.j_min..=d.j_max)
        .map(|j| d.block_multiplier(j))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((1..d.grid.len())
        .map(|i| (blocks.iter().map(|b| b[i].re).sum::<f64>() - 1.0).abs())
        .fold(0.0, f64::max))
}

/// `(max_{|i-j|≥2} ‖Δ_iΔ_j f‖₂, ‖S₀f + Σ_{j≥1} Δ_j f - f‖₂)`, relative to `‖f‖₂`.
pub fn block_defects(f: &Field64, d: &lp::DyadicDecomposition<f64>) -> Result<(f64, f64), HarnessError> {
    let norm = lp_norm(f, 2.0)?;
    let blocks: Vec<(i32, Field64)> = (d.j_min..=d.j_max)
        .map(|j| Ok((j, lp::block(f, j, d)?)))
        .collect::<Result<_, HarnessError>>()?;
    let mut orth: f64 = 0.0;
    for (i, bi) in &blocks {
        for j in d.j_min..=d.j_max {
            if (i - j).abs() >= 2 {
                orth = orth.max(lp_norm(&lp::block(bi, j, d)?, 2.0)? / norm);
            }
        }
    }
    let mut sum = lp::low_part(f, d)?;
    for (j, b) in &blocks {
        if d.high_blocks().contains(j) {
            sum = sum.add(b)?;
        }
    }
    Ok((orth, lp_norm(&sum.sub(f)?, 2.0)? / norm))
}

fn lp_decomp(cfg: &ScenarioConfig) -> Result<Outcome, HarnessError> {
    let grid = cfg.grid()?;
    let d = lp::build_decomposition(&grid);
    let fields = corpus_fields(cfg, &grid)?;
    let pou = partition_defect(&d)?;
    let mut orth: f64 = 0.0;
    let mut recon: f64 = 0.0;
    let mut per_field = Vec::new();
    let mut table = String::from("field_id,j,norm\n");
    for (id, f) in fields.iter().enumerate() {
        let (o, r) = block_defects(f, &d)?;
        orth = orth.max(o);
        recon = recon.max(r);
        for (j, v) in lp::energy_table(f, cfg.p, &d)? {
            table.push_str(&format!("{id},{j},{v:e}\n"));
        }
        per_field.push(json!({
            "id": id,
            "lp_norm": lp_norm(f, cfg.p)?,
            "besov_norm0": lp::besov_norm0(f, cfg.p, &d)?,
            "orthogonality_defect": o,
            "reconstruction_error": r,
        }));
    }
    let mut out = Outcome::default();
    out.checks.push(Check::at_most("partition_of_unity_defect", pou, 1e-14));
    out.checks
        .push(Check::at_most("almost_orthogonality_defect", orth, 1e-12));
    out.checks.push(Check::at_most("reconstruction_error", recon, 1e-10));
    out.metrics.insert("partition_of_unity_defect".into(), pou);
    out.report = json!({ "j_min": d.j_min, "j_max": d.j_max, "fields": per_field });
    out.tables.push(("lp_energy.csv".into(), table.into_bytes()));
    Ok(out)
}

/// Gaussian test functions `(center, width)` for the fractional Laplacian
/// cross-check.
pub const FRACLAP_GAUSSIANS: [(f64, f64); 3] = [(0.0, 1.0), (0.0, 2.0), (1.5, 0.75)];

/// Relative L² gap between the principal-value and multiplier routes.
pub fn fraclap_gap(grid: &Grid64, center: f64, width: f64, eta: f64) -> Result<f64, HarnessError> {
    let f = Field64::from_real_fn(*grid, |x: &[f64]| {
        (-(x[0] - center).powi(2) / (2.0 * width * width)).exp()
    });
    let pv = ka::fractional_laplacian_pv(&f, eta, &PvQuadrature::default())?;
    let mult = ka::fractional_laplacian_multiplier(&f, eta)?;
    Ok(lp_norm(&pv.sub(&mult)?, 2.0)? / lp_norm(&mult, 2.0)?)
}

fn fraclap_xcheck(cfg: &ScenarioConfig) -> Result<Outcome, HarnessError> {
    let grid = cfg.grid()?;
    if cfg.eta.is_empty() {
        return Err(HarnessError::Config("eta list is empty".into()));
    }
    let mut out = Outcome::default();
    let mut table = String::from("eta,center,width,rel_l2\n");
    let mut worst: f64 = 0.0;
    for &eta in &cfg.eta {
        for &(c, w) in &FRACLAP_GAUSSIANS {
            let gap = fraclap_gap(&grid, c, w, eta)?;
            worst = worst.max(gap);
            table.push_str(&format!("{eta},{c},{w},{gap:e}\n"));
            out.checks
                .push(Check::below(format!("eta={eta},width={w},center={c}"), gap, 1e-3));
        }
    }
    out.metrics.insert("max_rel_l2".into(), worst);
    out.report = json!({
        "quadrature": PvQuadrature::default(),
        "constants": cfg.eta.iter().map(|&e| ka::frac_lap_constant(e, cfg.dim)).collect::<Vec<_>>(),
    });
    out.tables.push(("fraclap.csv".into(), table.into_bytes()));
    Ok(out)
}

/// Run the acceptance suite, calling `progress` after each criterion.
pub fn reproduce(progress: &mut dyn FnMut(&acceptance::CriterionResult)) -> Result<Outcome, HarnessError> {
    let results = acceptance::run_all(progress);
    let mut out = Outcome::default();
    let mut table = String::from("criterion,title,check,value,relation,threshold,pass\n");
    for r in &results {
        if let Some(e) = &r.error {
            out.checks.push(Check {
                name: format!("C{}:error", r.id),
                value: f64::NAN,
                relation: "none",
                threshold: 0.0,
                pass: false,
            });
            table.push_str(&format!(
                "{},{},{},,,,false\n",
                r.id,
                csv_field(r.title),
                csv_field(&format!("error: {e}"))
            ));
        }
        for c in &r.checks {
            let named = Check {
                name: format!("C{}:{}", r.id, c.name),
                ..c.clone()
            };
            table.push_str(&format!(
                "{},{},{},{:e},{},{:e},{}\n",
                r.id,
                csv_field(r.title),
                csv_field(&c.name),
                c.value,
                c.relation,
                c.threshold,
                c.pass
            ));
            out.checks.push(named);
        }
        for t in &r.timings {
            out.timings.push(Check {
                name: format!("C{}:{}", r.id, t.name),
                ..t.clone()
            });
        }
    }
    let passed = results.iter().filter(|r| r.pass()).count();
    out.metrics.insert("criteria_passed".into(), passed as f64);
    out.metrics.insert("criteria_total".into(), results.len() as f64);
    out.report = json!({
        "criteria": results.iter().map(|r| json!({ "id": r.id, "title": r.title, "pass": r.pass(), "error": r.error })).collect::<Vec<_>>(),
    });
    out.tables.push(("acceptance.csv".into(), table.into_bytes()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_fields_with_commas_are_quoted() {
        assert_eq!(csv_field("heat"), "heat");
        assert_eq!(csv_field("p=1.5,q=2_drift"), "\"p=1.5,q=2_drift\"");
        assert_eq!(csv_field("a \"b\", c"), "\"a \"\"b\"\", c\"");
    }

    #[test]
    fn finite_check_rejects_nan_and_infinity() {
        assert!(Check::finite("x", 1.0).pass);
        assert!(!Check::finite("x", f64::NAN).pass);
        assert!(!Check::finite("x", f64::INFINITY).pass);
    }
}
