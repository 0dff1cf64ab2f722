//! Synthetic benchmark data.
//!
//! * `multimodal_s31`: ten relevant and ten irrelevant uniform covariates; the
//!   response is `+-floor(sum X)` plus Gaussian noise, the sign set by an
//!   unobserved fair coin, so the conditional mean is always zero.
//! * `transition_fig1`: one covariate; unimodal response below 0.5, a
//!   two-component mixture at +-1 above.
//! * `ridge_2d`: a scalar covariate and two responses concentrated on the
//!   curve `y2 sqrt(y1) = t`.
//! * `functional`: curves whose only signal is the height of a bump at a
//!   fixed location, buried in random Fourier noise.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CdeError, Result};
use crate::functional::{unit_grid, FunctionalBlock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    MultimodalS31,
    TransitionFig1,
    Ridge2d,
    Functional,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::MultimodalS31 => "multimodal_s31",
            Variant::TransitionFig1 => "transition_fig1",
            Variant::Ridge2d => "ridge_2d",
            Variant::Functional => "functional",
        }
    }

    /// Default response noise for the variant.
    pub fn default_sigma(self) -> f64 {
        match self {
            Variant::MultimodalS31 => 0.25,
            Variant::TransitionFig1 => 0.3,
            Variant::Ridge2d => 0.02,
            Variant::Functional => 0.1,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = CdeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multimodal_s31" => Ok(Variant::MultimodalS31),
            "transition_fig1" => Ok(Variant::TransitionFig1),
            "ridge_2d" => Ok(Variant::Ridge2d),
            "functional" => Ok(Variant::Functional),
            other => Err(CdeError::config(format!(
                "unknown variant '{other}' (expected multimodal_s31, transition_fig1, ridge_2d or functional)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n: usize,
    pub sigma: f64,
    pub seed: u64,
    pub variant: Variant,
}

impl SyntheticConfig {
    pub fn new(variant: Variant, n: usize, seed: u64) -> Self {
        SyntheticConfig {
            n,
            sigma: variant.default_sigma(),
            seed,
            variant,
        }
    }

    fn normal(&self) -> Result<Normal<f64>> {
        Normal::new(0.0, self.sigma)
            .ok()
            .filter(|_| self.sigma > 0.0)
            .ok_or_else(|| CdeError::config(format!("sigma must be positive, got {}", self.sigma)))
    }
}

/// Generates the dataset for `config.variant`.
pub fn generate(config: &SyntheticConfig) -> Result<Dataset> {
    match config.variant {
        Variant::MultimodalS31 => gen_multimodal(config),
        Variant::TransitionFig1 => gen_transition(config),
        Variant::Ridge2d => gen_ridge_2d(config),
        Variant::Functional => gen_functional(config),
    }
}

pub fn gen_multimodal(config: &SyntheticConfig) -> Result<Dataset> {
    let noise = config.normal()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n;
    let mut x = Array2::zeros((n, 20));
    let mut y = Array2::zeros((n, 1));
    for i in 0..n {
        for j in 0..20 {
            x[[i, j]] = rng.random::<f64>();
        }
        let level = (0..10).map(|j| x[[i, j]]).sum::<f64>().floor();
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        y[[i, 0]] = sign * level + noise.sample(&mut rng);
    }
    let mut ds = Dataset::new(x, y)?;
    ds.covariate_names = (1..=10)
        .map(|j| format!("x{j}"))
        .chain((1..=10).map(|j| format!("z{j}")))
        .collect();
    ds.response_names = vec!["y".into()];
    Ok(ds)
}

pub fn gen_transition(config: &SyntheticConfig) -> Result<Dataset> {
    let noise = config.normal()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n;
    let mut x = Array2::zeros((n, 1));
    let mut y = Array2::zeros((n, 1));
    for i in 0..n {
        let xi: f64 = rng.random();
        let center = if xi < 0.5 {
            0.0
        } else if rng.random_bool(0.5) {
            1.0
        } else {
            -1.0
        };
        x[[i, 0]] = xi;
        y[[i, 0]] = center + noise.sample(&mut rng);
    }
    Dataset::new(x, y)
}

pub fn gen_ridge_2d(config: &SyntheticConfig) -> Result<Dataset> {
    gen_ridge_2d_latent(config).map(|(ds, _)| ds)
}

/// Ridge data together with the latent `t` of every row.
pub fn gen_ridge_2d_latent(config: &SyntheticConfig) -> Result<(Dataset, Vec<f64>)> {
    let noise = config.normal()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n;
    let mut x = Array2::zeros((n, 1));
    let mut y = Array2::zeros((n, 2));
    let mut latent = Vec::with_capacity(n);
    for i in 0..n {
        let t = rng.random_range(0.5..1.5);
        latent.push(t);
        let jitter: f64 = rng.sample(StandardNormal);
        x[[i, 0]] = t * (1.0 + 0.05 * jitter);
        let y1 = rng.random_range(0.2..0.9);
        y[[i, 0]] = y1;
        y[[i, 1]] = t / f64::sqrt(y1) + noise.sample(&mut rng);
    }
    Ok((Dataset::new(x, y)?, latent))
}

/// Evaluation points per generated curve.
pub const FUNCTIONAL_POINTS: usize = 500;
pub const BUMP_CENTER: f64 = 0.6;
pub const BUMP_WIDTH: f64 = 0.1;
/// Pointwise standard deviation of the Fourier noise.
pub const NOISE_AMPLITUDE: f64 = 0.5;
/// Frequencies `1..=NOISE_TERMS` (cycles per unit domain) in the noise series.
pub const NOISE_TERMS: usize = 40;

pub fn gen_functional(config: &SyntheticConfig) -> Result<Dataset> {
    gen_functional_with(config, NOISE_AMPLITUDE)
}

/// `f_i(x) = a_i bump(x) + noise_i(x)` on a uniform grid of [`FUNCTIONAL_POINTS`]
/// points, `y_i = a_i + N(0, sigma)`, `a_i ~ U(0, 2)`.
pub fn gen_functional_with(config: &SyntheticConfig, noise_amplitude: f64) -> Result<Dataset> {
    let noise = config.normal()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n;
    let grid = unit_grid(FUNCTIONAL_POINTS);
    let bump: Vec<f64> = grid
        .iter()
        .map(|x| (-0.5 * ((x - BUMP_CENTER) / BUMP_WIDTH).powi(2)).exp())
        .collect();
    let tau = std::f64::consts::TAU;
    // cos/sin tables, one row per frequency
    let basis: Vec<(Vec<f64>, Vec<f64>)> = (1..=NOISE_TERMS)
        .map(|k| {
            let w = tau * k as f64;
            (
                grid.iter().map(|x| (w * x).cos()).collect(),
                grid.iter().map(|x| (w * x).sin()).collect(),
            )
        })
        .collect();
    let coef_scale = noise_amplitude / (NOISE_TERMS as f64).sqrt();
    let mut curves = Array2::zeros((n, FUNCTIONAL_POINTS));
    let mut y = Array2::zeros((n, 1));
    for i in 0..n {
        let a = rng.random_range(0.0..2.0);
        let mut row = curves.row_mut(i);
        for (v, b) in row.iter_mut().zip(&bump) {
            *v = a * b;
        }
        for (cos, sin) in &basis {
            let alpha: f64 = rng.sample::<f64, _>(StandardNormal) * coef_scale;
            let beta: f64 = rng.sample::<f64, _>(StandardNormal) * coef_scale;
            for ((v, c), s) in row.iter_mut().zip(cos).zip(sin) {
                *v += alpha * c + beta * s;
            }
        }
        y[[i, 0]] = a + noise.sample(&mut rng);
    }
    let mut ds = Dataset::new(Array2::zeros((n, 0)), y)?;
    ds.response_names = vec!["y".into()];
    ds.with_functional(FunctionalBlock::new(curves, grid)?)
}
