//! Deterministic test-function corpora.
//!
//! Each entry is drawn as an analytic recipe (Gaussian bumps or Gaussian
//! wave packets) from a seeded ChaCha stream and then sampled, so the same
//! seed gives the same functions on any grid of the same box.

use std::f64::consts::PI;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use speclp_core::gfunction::TRUNCATION_EXPONENT;
use speclp_core::{Field64, Grid64};

use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CorpusKind {
    GaussianMix,
    BandlimitedRandom,
    Annulus,
}

/// Largest `|f|` allowed beyond `0.9 L`.
pub const BOUNDARY_TOLERANCE: f64 = 1e-14;

const MIX_WIDTHS: (f64, f64) = (0.75, 2.0);
const PACKET_SIGMA: f64 = 2.0;
const RANDOM_BAND: (f64, f64) = (1.0, 6.0);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Component {
    /// `amp · exp(-|x-c|²/w²)`
    Bump { amp: f64, center: Vec<f64>, width: f64 },
    /// `amp · exp(-|x-c|²/(2σ²)) · cos(ω·(x-c) + phase)`
    Packet {
        amp: f64,
        center: Vec<f64>,
        sigma: f64,
        omega: Vec<f64>,
        phase: f64,
    },
}

impl Component {
    fn eval(&self, x: &[f64]) -> f64 {
        let dist2 = |c: &[f64]| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        match self {
            Component::Bump { amp, center, width } => amp * (-dist2(center) / (width * width)).exp(),
            Component::Packet {
                amp,
                center,
                sigma,
                omega,
                phase,
            } => {
                let arg: f64 = x.iter().zip(center).zip(omega).map(|((a, c), w)| w * (a - c)).sum();
                amp * (-dist2(center) / (2.0 * sigma * sigma)).exp() * (arg + phase).cos()
            }
        }
    }
}

/// Analytic description of one corpus entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recipe {
    pub components: Vec<Component>,
    /// Nominal frequency band `(ξ_lo, ξ_hi)`.
    pub band: (f64, f64),
    /// Frequency beyond which the spectrum is below `1e-16` of its peak.
    pub extent: f64,
}

impl Recipe {
    pub fn sample(&self, grid: Grid64) -> Field64 {
        Field64::from_real_fn(grid, |x: &[f64]| self.components.iter().map(|c| c.eval(x)).sum())
    }
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub id: usize,
    pub field: Field64,
    pub band: (f64, f64),
    pub mean_removed: bool,
    pub recipe: Recipe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorpusSpec {
    pub kind: CorpusKind,
    pub count: usize,
    pub seed: u64,
    pub annulus_j0: i32,
    pub remove_mean: bool,
}

fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    if dim == 1 {
        return vec![if rng.gen_bool(0.5) { 1.0 } else { -1.0 }];
    }
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return v.into_iter().map(|a| a / n).collect();
        }
    }
}

fn center(rng: &mut ChaCha8Rng, dim: usize, spread: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.gen_range(-spread..=spread)).collect()
}

/// Spectral half-width of a Gaussian `exp(-|x|²/(2σ²))` at the `1e-16` level.
fn gaussian_extent(sigma: f64) -> f64 {
    (2.0 * TRUNCATION_EXPONENT).sqrt() / sigma
}

fn draw_recipe(rng: &mut ChaCha8Rng, spec: &CorpusSpec, grid: &Grid64) -> Recipe {
    let d = grid.dim;
    let l = grid.half_extent;
    match spec.kind {
        CorpusKind::GaussianMix => {
            let k = rng.gen_range(2..=5);
            let mut comps: Vec<(f64, Vec<f64>, f64)> = (0..k)
                .map(|_| {
                    let amp = rng.gen_range(-1.0..1.0);
                    (amp, center(rng, d, l / 4.0), rng.gen_range(MIX_WIDTHS.0..MIX_WIDTHS.1))
                })
                .collect();
            // Balance the last weight so the integral over R^d vanishes.
            let mass = |a: f64, w: f64| a * (w * PI.sqrt()).powi(d as i32);
            let rest: f64 = comps[..k - 1].iter().map(|c| mass(c.0, c.2)).sum();
            let w_last = comps[k - 1].2;
            comps[k - 1].0 = -rest / mass(1.0, w_last);
            let w_min = comps.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            // exp(-|x|²/w²) has σ = w/√2.
            let extent = gaussian_extent(w_min / 2f64.sqrt());
            Recipe {
                components: comps
                    .into_iter()
                    .map(|(amp, center, width)| Component::Bump { amp, center, width })
                    .collect(),
                band: (0.0, extent),
                extent,
            }
        }
        CorpusKind::BandlimitedRandom => {
            let k = rng.gen_range(3..=6);
            let components = (0..k)
                .map(|_| {
                    let r = rng.gen_range(RANDOM_BAND.0..=RANDOM_BAND.1);
                    Component::Packet {
                        amp: rng.gen_range(0.2..1.0),
                        center: center(rng, d, l / 4.0),
                        sigma: PACKET_SIGMA,
                        omega: unit_vector(rng, d).into_iter().map(|u| u * r).collect(),
                        phase: rng.gen_range(0.0..2.0 * PI),
                    }
                })
                .collect();
            Recipe {
                components,
                band: RANDOM_BAND,
                extent: RANDOM_BAND.1 + gaussian_extent(PACKET_SIGMA),
            }
        }
        CorpusKind::Annulus => {
            let r = 2f64.powi(spec.annulus_j0);
            // Spectral spread 1/σ shrinks with the shell so that 99.9% of
            // the energy stays within 2^{j0 ± 0.1}.
            let sigma = 48.0 / r;
            let k = rng.gen_range(1..=3);
            let components = (0..k)
                .map(|_| Component::Packet {
                    amp: rng.gen_range(0.2..1.0),
                    center: center(rng, d, l / 16.0),
                    sigma,
                    omega: unit_vector(rng, d).into_iter().map(|u| u * r).collect(),
                    phase: rng.gen_range(0.0..2.0 * PI),
                })
                .collect();
            let j0 = spec.annulus_j0 as f64;
            Recipe {
                components,
                band: (2f64.powf(j0 - 0.1), 2f64.powf(j0 + 0.1)),
                extent: r + gaussian_extent(sigma),
            }
        }
    }
}

/// Draw the recipes only (grid-independent apart from the box size).
pub fn draw_recipes(spec: &CorpusSpec, grid: &Grid64) -> Vec<Recipe> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.count).map(|_| draw_recipe(&mut rng, spec, grid)).collect()
}

fn boundary_max(f: &Field64) -> f64 {
    let g = f.grid;
    let cut = 0.9 * g.half_extent;
    let mut x = [0.0; speclp_core::spectral::MAX_DIM];
    let mut worst: f64 = 0.0;
    for (i, v) in f.values.iter().enumerate() {
        g.position_at(i, &mut x);
        if x[..g.dim].iter().any(|c| c.abs() > cut) {
            worst = worst.max(v.norm());
        }
    }
    worst
}

pub fn generate_corpus(spec: &CorpusSpec, grid: &Grid64) -> Result<Vec<CorpusEntry>, HarnessError> {
    if spec.count == 0 {
        return Err(HarnessError::Config("corpus_count must be at least 1".into()));
    }
    let nyquist = grid.nyquist();
    draw_recipes(spec, grid)
        .into_iter()
        .enumerate()
        .map(|(id, recipe)| {
            if recipe.band.1 > nyquist / 2.0 || recipe.extent > nyquist {
                return Err(HarnessError::Config(format!(
                    "corpus band up to {:.3} (spectral extent {:.3}) exceeds half the Nyquist \
                     frequency {:.3}; increase n or reduce the box",
                    recipe.band.1,
                    recipe.extent,
                    nyquist / 2.0
                )));
            }
            let mut field = recipe.sample(*grid);
            let edge = boundary_max(&field);
            if edge >= BOUNDARY_TOLERANCE {
                return Err(HarnessError::Config(format!(
                    "corpus entry {id} has |f| = {edge:e} beyond 0.9 L; increase half_extent"
                )));
            }
            if spec.remove_mean {
                field.remove_mean();
            }
            Ok(CorpusEntry {
                id,
                field,
                band: recipe.band,
                mean_removed: spec.remove_mean,
                recipe,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use speclp_core::spectral::lp_norm;

    fn spec(kind: CorpusKind, count: usize) -> CorpusSpec {
        CorpusSpec {
            kind,
            count,
            seed: 11,
            annulus_j0: 3,
            remove_mean: true,
        }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let g = Grid64::new(1, 1024, 32.0).unwrap();
        for kind in [CorpusKind::GaussianMix, CorpusKind::BandlimitedRandom] {
            let a = generate_corpus(&spec(kind, 4), &g).unwrap();
            let b = generate_corpus(&spec(kind, 4), &g).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.field.values, y.field.values);
            }
        }
    }

    #[test]
    fn single_gaussian_mix_entry() {
        let g = Grid64::new(1, 1024, 32.0).unwrap();
        let c = generate_corpus(&spec(CorpusKind::GaussianMix, 1), &g).unwrap();
        assert_eq!(c.len(), 1);
        assert!(lp_norm(&c[0].field, 2.0).unwrap() > 0.0);
        assert!(c[0].field.mean().norm() < 1e-15);
        assert!(c[0].mean_removed);
    }

    #[test]
    fn annulus_energy_concentration() {
        let g = Grid64::new(1, 2048, 64.0).unwrap();
        let c = generate_corpus(&spec(CorpusKind::Annulus, 4), &g).unwrap();
        let (lo, hi) = (2f64.powf(2.9), 2f64.powf(3.1));
        for e in &c {
            let s = e.field.forward();
            let mut inside = 0.0;
            let mut total = 0.0;
            for (i, v) in s.coeffs.iter().enumerate() {
                let r = g.frequency_norm_at(i);
                total += v.norm_sqr();
                if r >= lo && r <= hi {
                    inside += v.norm_sqr();
                }
            }
            assert!(inside / total >= 0.999, "{}", inside / total);
        }
    }

    #[test]
    fn small_box_and_coarse_grid_are_rejected() {
        let tight = Grid64::new(1, 1024, 32.0).unwrap();
        assert!(matches!(
            generate_corpus(&spec(CorpusKind::Annulus, 2), &tight),
            Err(HarnessError::Config(_))
        ));
        let coarse = Grid64::new(1, 128, 32.0).unwrap();
        assert!(generate_corpus(&spec(CorpusKind::GaussianMix, 2), &coarse).is_err());
        assert!(generate_corpus(&spec(CorpusKind::GaussianMix, 0), &tight).is_err());
    }

    #[test]
    fn recipes_do_not_depend_on_resolution() {
        let a = Grid64::new(2, 128, 32.0).unwrap();
        let b = Grid64::new(2, 256, 32.0).unwrap();
        let s = spec(CorpusKind::BandlimitedRandom, 3);
        assert_eq!(draw_recipes(&s, &a), draw_recipes(&s, &b));
    }
}
