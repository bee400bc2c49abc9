//! Unit-variance randomization of Fourier coefficients.
//!
//! A draw multiplies each coefficient pair `(c_n, c_{-n})` by `(X_n,
//! conj(X_n))` where `X_n = (a + ib)/sqrt(2)` with `a, b` independent scalars
//! from the chosen family, and the zero mode by a single real scalar.  Each
//! `(sample, mode, component)` triple owns its own keyed stream, so results
//! do not depend on evaluation order or thread scheduling.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{canonical_half_space, SpectralField};
use crate::grid::Mode;

/// Scalar coefficient family, symmetric with unit sub-gaussian control
/// `E exp(γX) <= exp(c γ²)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientDistribution {
    Gaussian,
    Rademacher,
    UniformSymmetric,
}

impl CoefficientDistribution {
    /// Declared sub-gaussian constant `c`.
    pub fn subgaussian_constant(&self) -> f64 {
        match self {
            Self::Gaussian => 0.5,
            Self::Rademacher => 0.5,
            Self::UniformSymmetric => 1.0 / 6.0,
        }
    }

    /// Variance of one scalar draw (the uniform family is not unit-variance).
    pub fn variance(&self) -> f64 {
        match self {
            Self::Gaussian | Self::Rademacher => 1.0,
            Self::UniformSymmetric => 1.0 / 3.0,
        }
    }

    pub fn draw(&self, rng: &mut impl Rng) -> f64 {
        match self {
            Self::Gaussian => rng.sample(rand_distr::StandardNormal),
            Self::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::UniformSymmetric => rng.gen_range(-1.0..=1.0),
        }
    }
}

/// splitmix64 finalizer; decent avalanche for seed derivation.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn stream_seed_words(words: [u64; 6]) -> [u8; 32] {
    let mut state: u64 = 0x7761_7665_6c61_6221;
    let mut out = [0u8; 32];
    for w in words {
        state = mix64(state ^ w);
    }
    for chunk in out.chunks_exact_mut(8) {
        state = mix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    out
}

/// Keyed stream for one `(sample, mode, component)` cell.
pub(crate) fn stream_rng(base_seed: u64, sample_index: u64, mode: Mode, component: u32) -> ChaCha8Rng {
    let key = stream_seed_words([
        base_seed,
        sample_index,
        mode[0] as u64,
        mode[1] as u64,
        mode[2] as u64,
        component as u64,
    ]);
    ChaCha8Rng::from_seed(key)
}

/// Base data plus the family and seed that turn it into a random field pair.
#[derive(Clone, Debug)]
pub struct RandomizationSpec {
    pub u0: SpectralField,
    pub u1: SpectralField,
    pub distribution: CoefficientDistribution,
    pub base_seed: u64,
}

impl RandomizationSpec {
    pub fn new(
        u0: SpectralField,
        u1: SpectralField,
        distribution: CoefficientDistribution,
        base_seed: u64,
    ) -> Result<Self> {
        if u0.grid() != u1.grid() {
            return Err(Error::GridMismatch("randomization pair must share a grid".into()));
        }
        Ok(Self { u0, u1, distribution, base_seed })
    }

    /// Draw sample `sample_index` of the randomized pair.
    pub fn sample(&self, sample_index: u64) -> (SpectralField, SpectralField) {
        let u0 = self.randomize_component(&self.u0, sample_index, 0);
        let u1 = self.randomize_component(&self.u1, sample_index, 1);
        (u0, u1)
    }

    fn randomize_component(
        &self,
        base: &SpectralField,
        sample_index: u64,
        component: u32,
    ) -> SpectralField {
        let grid = *base.grid();
        let mut coeffs = base.coeffs().to_vec();
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for (idx, mode) in grid.modes() {
            if mode == [0, 0, 0] {
                let mut rng = stream_rng(self.base_seed, sample_index, mode, component);
                coeffs[idx] *= self.distribution.draw(&mut rng);
            } else if canonical_half_space(mode) {
                if let Some(mirror) = grid.mirror_index(mode) {
                    let mut rng = stream_rng(self.base_seed, sample_index, mode, component);
                    let a = self.distribution.draw(&mut rng);
                    let b = self.distribution.draw(&mut rng);
                    let x = Complex64::new(a * inv_sqrt2, b * inv_sqrt2);
                    coeffs[idx] *= x;
                    coeffs[mirror] *= x.conj();
                }
            }
        }
        SpectralField::from_coeffs_unchecked(grid, coeffs)
    }
}

/// One row of the moment-generating-function verification.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MgfRow {
    pub gamma: f64,
    pub empirical: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub bound: f64,
    /// True when even the lower confidence bound exceeds the declared
    /// sub-gaussian bound, i.e. a significant violation.
    pub flagged: bool,
}

/// Empirical check of `E exp(γX) <= exp(c γ²)` on a γ grid.
///
/// The confidence band is mean ± 3 standard errors.  For the Gaussian family
/// the bound is an equality, so the empirical mean straddles it and only the
/// band position is meaningful.
pub fn verify_subgaussian_mgf(
    distribution: CoefficientDistribution,
    gammas: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Vec<MgfRow>> {
    if samples < 2 {
        return Err(Error::InvalidArgument("MGF check needs at least 2 samples".into()));
    }
    if distribution == CoefficientDistribution::Gaussian {
        if let Some(&g) = gammas.iter().find(|g| g.abs() > 10.0) {
            return Err(Error::InvalidArgument(format!(
                "gaussian MGF draw with |γ| = {} > 10 would overflow the estimator",
                g.abs()
            )));
        }
    }
    let c = distribution.subgaussian_constant();
    let mut rows = Vec::with_capacity(gammas.len());
    for (gi, &gamma) in gammas.iter().enumerate() {
        let mut rng = stream_rng(seed, gi as u64, [0, 0, 0], 3);
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        for _ in 0..samples {
            let v = (gamma * distribution.draw(&mut rng)).exp();
            sum += v;
            sum_sq += v * v;
        }
        let n = samples as f64;
        let mean = sum / n;
        let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
        let se = (var / n).sqrt();
        let bound = (c * gamma * gamma).exp();
        let (ci_low, ci_high) = (mean - 3.0 * se, mean + 3.0 * se);
        rows.push(MgfRow { gamma, empirical: mean, ci_low, ci_high, bound, flagged: ci_low > bound });
    }
    Ok(rows)
}

/// On-disk form of a randomization spec: family, declared constant, seed, and
/// checkpoint paths for the base pair.
#[derive(Serialize, Deserialize, Debug)]
pub struct RandomizationSpecFile {
    pub family: CoefficientDistribution,
    pub c: f64,
    pub base_seed: u64,
    pub u0_ref: String,
    pub u1_ref: String,
}

impl RandomizationSpecFile {
    pub fn describe(spec: &RandomizationSpec, u0_ref: &str, u1_ref: &str) -> Self {
        Self {
            family: spec.distribution,
            c: spec.distribution.subgaussian_constant(),
            base_seed: spec.base_seed,
            u0_ref: u0_ref.to_string(),
            u1_ref: u1_ref.to_string(),
        }
    }

    /// Reload the full spec, resolving the checkpoint refs against `dir`.
    pub fn resolve(&self, dir: &std::path::Path) -> Result<RandomizationSpec> {
        if (self.c - self.family.subgaussian_constant()).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "declared sub-gaussian constant {} does not match family (expected {})",
                self.c,
                self.family.subgaussian_constant()
            )));
        }
        let u0 = crate::io::load_field_json(dir.join(&self.u0_ref))?;
        let u1 = crate::io::load_field_json(dir.join(&self.u1_ref))?;
        RandomizationSpec::new(u0, u1, self.family, self.base_seed)
    }
}
