//! Flat TOML scenario configuration.
//!
//! Every key is optional; missing keys take the defaults of
//! [`ScenarioConfig::default`]. Example:
//!
//! ```toml
//! scenario = "GFUN_RATIO"
//! psi1 = "heat"
//! psi2 = "heat"
//! dim = 1
//! n = 1024
//! half_extent = 32.0
//! p = 2.0
//! q = 2.0
//! a = "inf"
//! corpus_kind = "GAUSSIAN_MIX"
//! corpus_count = 16
//! seed = 7
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use speclp_core::gfunction::Horizon;

use crate::corpus::CorpusKind;
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scenario {
    AuditSymbol,
    KernelDecay,
    Hormander,
    DyadicEnvelope,
    GfunRatio,
    LpDecomp,
    FraclapXcheck,
    Reproduce,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::AuditSymbol,
        Scenario::KernelDecay,
        Scenario::Hormander,
        Scenario::DyadicEnvelope,
        Scenario::GfunRatio,
        Scenario::LpDecomp,
        Scenario::FraclapXcheck,
        Scenario::Reproduce,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::AuditSymbol => "AUDIT_SYMBOL",
            Scenario::KernelDecay => "KERNEL_DECAY",
            Scenario::Hormander => "HORMANDER",
            Scenario::DyadicEnvelope => "DYADIC_ENVELOPE",
            Scenario::GfunRatio => "GFUN_RATIO",
            Scenario::LpDecomp => "LP_DECOMP",
            Scenario::FraclapXcheck => "FRACLAP_XCHECK",
            Scenario::Reproduce => "REPRODUCE",
        }
    }

    /// What the scenario measures, for the metadata file.
    pub fn description(&self) -> &'static str {
        match self {
            Scenario::AuditSymbol => "sampled audit of the ellipticity and derivative bounds of a symbol",
            Scenario::KernelDecay => "spatial and temporal decay of the gradient of the composed kernel",
            Scenario::Hormander => "Hormander integral of the composed kernel over dyadic shifts",
            Scenario::DyadicEnvelope => "L1 norms of dyadic kernel pieces against an exponential envelope",
            Scenario::GfunRatio => "L^p ratio of the g-function to its input over a corpus",
            Scenario::LpDecomp => "partition of unity, almost orthogonality and reconstruction of dyadic blocks",
            Scenario::FraclapXcheck => "fractional Laplacian: principal-value quadrature against the multiplier",
            Scenario::Reproduce => "full acceptance suite",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = HarnessError;

    /// Case-insensitive; `-` and `_` are interchangeable.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_uppercase().replace('-', "_");
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == norm)
            .ok_or_else(|| HarnessError::Config(format!("unknown scenario `{s}`")))
    }
}

/// `a` as written in the file: a number or the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WindowLength {
    Number(f64),
    Text(String),
}

impl WindowLength {
    pub fn horizon(&self) -> Result<Horizon<f64>, HarnessError> {
        match self {
            WindowLength::Number(a) if *a > 0.0 && a.is_finite() => Ok(Horizon::Finite(*a)),
            WindowLength::Number(a) if a.is_infinite() && *a > 0.0 => Ok(Horizon::Infinite),
            WindowLength::Text(s) if matches!(s.trim().to_ascii_lowercase().as_str(), "inf" | "infinity") => {
                Ok(Horizon::Infinite)
            }
            other => Err(HarnessError::Config(format!(
                "`a` must be a positive number or \"inf\", got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Option<Scenario>,
    pub psi1: String,
    pub psi2: String,
    pub dim: usize,
    pub n: usize,
    /// Half-width `L` of the periodic box `[-L, L)^d`.
    pub half_extent: f64,
    pub p: f64,
    pub q: f64,
    pub s: f64,
    pub a: WindowLength,
    /// Time at which `ψ₁` is evaluated.
    pub l: f64,
    /// Evaluation time for single-time scenarios.
    pub t: f64,
    pub seed: u64,
    pub corpus_kind: CorpusKind,
    pub corpus_count: usize,
    /// Dyadic shell of the ANNULUS corpus.
    pub annulus_j0: i32,
    /// Project out the zero mode of every corpus entry.
    pub remove_mean: bool,
    pub output_dir: Option<PathBuf>,
    /// Also run at `2n` and report the drift.
    pub refine: bool,
    pub nodes_per_panel: usize,
    /// Times for the temporal decay fit.
    pub t_list: Vec<f64>,
    /// Spatial fit window; defaults to `[L/32, L/4]`.
    pub r_lo: Option<f64>,
    pub r_hi: Option<f64>,
    /// Shifts `|y| = 2^k` for `k` in `y_exp_min..=y_exp_max`.
    pub y_exp_min: i32,
    pub y_exp_max: i32,
    pub j_lo: i32,
    pub j_hi: i32,
    /// Rows used for the low-frequency slope.
    pub low_fit: usize,
    pub eta: Vec<f64>,
    pub audit_max_order: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: None,
            psi1: "heat".into(),
            psi2: "heat".into(),
            dim: 1,
            n: 1024,
            half_extent: 32.0,
            p: 2.0,
            q: 2.0,
            s: 0.0,
            a: WindowLength::Text("inf".into()),
            l: 0.0,
            t: 1.0,
            seed: 0,
            corpus_kind: CorpusKind::GaussianMix,
            corpus_count: 8,
            annulus_j0: 3,
            remove_mean: true,
            output_dir: None,
            refine: false,
            nodes_per_panel: speclp_core::gfunction::DEFAULT_NODES_PER_PANEL,
            t_list: vec![0.5, 1.0, 2.0, 4.0],
            r_lo: None,
            r_hi: None,
            y_exp_min: -6,
            y_exp_max: 2,
            j_lo: -6,
            j_hi: 5,
            low_fit: 3,
            eta: vec![0.5, 1.0, 1.5],
            audit_max_order: 4,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn horizon(&self) -> Result<Horizon<f64>, HarnessError> {
        self.a.horizon()
    }

    pub fn corpus_spec(&self) -> crate::corpus::CorpusSpec {
        crate::corpus::CorpusSpec {
            kind: self.corpus_kind,
            count: self.corpus_count,
            seed: self.seed,
            annulus_j0: self.annulus_j0,
            remove_mean: self.remove_mean,
        }
    }

    pub fn grid(&self) -> Result<speclp_core::Grid64, HarnessError> {
        Ok(speclp_core::Grid64::new(self.dim, self.n, self.half_extent)?)
    }

    pub fn symbols(&self) -> Result<(speclp_core::Symbol64, speclp_core::Symbol64), HarnessError> {
        Ok((
            speclp_core::symbols::lookup(&self.psi1, self.dim)?,
            speclp_core::symbols::lookup(&self.psi2, self.dim)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let cfg = ScenarioConfig::from_toml_str(
            "scenario = \"GFUN_RATIO\"\npsi1 = \"poisson\"\na = 1.5\nn = 512\ncorpus_kind = \"ANNULUS\"\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario, Some(Scenario::GfunRatio));
        assert_eq!(cfg.psi1, "poisson");
        assert_eq!(cfg.horizon().unwrap(), Horizon::Finite(1.5));
        assert_eq!(cfg.corpus_kind, CorpusKind::Annulus);
        assert_eq!(cfg.n, 512);
        assert_eq!(cfg.psi2, "heat");
    }

    #[test]
    fn window_length_forms() {
        let cfg = ScenarioConfig::from_toml_str("a = \"inf\"").unwrap();
        assert!(cfg.horizon().unwrap().is_infinite());
        assert!(ScenarioConfig::from_toml_str("a = -1.0").unwrap().horizon().is_err());
        assert!(ScenarioConfig::from_toml_str("a = \"soon\"")
            .unwrap()
            .horizon()
            .is_err());
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(ScenarioConfig::from_toml_str("gamma = 2.0").is_err());
    }

    #[test]
    fn roundtrips_through_toml() {
        let cfg = ScenarioConfig {
            seed: 42,
            ..Default::default()
        };
        let back = ScenarioConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn scenario_names() {
        assert_eq!("gfun-ratio".parse::<Scenario>().unwrap(), Scenario::GfunRatio);
        assert_eq!("REPRODUCE".parse::<Scenario>().unwrap(), Scenario::Reproduce);
        assert!("nope".parse::<Scenario>().is_err());
    }
}
