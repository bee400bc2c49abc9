//! Deterministic test-function corpora for the inequality checks.
//!
//! The bulk of a corpus is random-phase power-law fields `|c_n| ~ |n|^{-σ}`
//! with σ swept over a range, which probes every regularity class the norms
//! care about.  A fixed adversarial tail of single harmonics and extreme
//! two-mode combinations exercises the edges (pure scales, large dynamic
//! range, near-Nyquist content).

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::field::SpectralField;
use crate::grid::{Mode, TorusGrid};
use crate::propagator::WavePair;
use crate::randomization::stream_seed_words;

/// Mean-free random-phase field with `|c_n| = amplitude * |n|^{-sigma}`.
pub fn power_law_field(grid: TorusGrid, sigma: f64, amplitude: f64, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::from_seed(stream_seed_words([seed, 0x706f_7765, 0, 0, 0, 0]));
    SpectralField::from_mode_fn(grid, |m| {
        let r = TorusGrid::norm(m);
        if r == 0.0 {
            Complex64::ZERO
        } else {
            let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            Complex64::from_polar(amplitude * r.powf(-sigma), theta)
        }
    })
}

/// Data pair with position slope `sigma` and velocity slope `sigma - 1`, the
/// usual one-derivative offset between position and velocity regularity.
pub fn power_law_pair(grid: TorusGrid, sigma: f64, amplitude: f64, seed: u64) -> WavePair {
    let u0 = power_law_field(grid, sigma, amplitude, seed.wrapping_mul(2).wrapping_add(1));
    let u1 = power_law_field(grid, sigma - 1.0, amplitude, seed.wrapping_mul(2).wrapping_add(2));
    WavePair::new(u0, u1).expect("components share the grid by construction")
}

/// `count` random-phase power-law fields with σ drawn uniformly from
/// `sigma_range`, reproducible from the seed.
pub fn power_law_corpus(
    grid: TorusGrid,
    seed: u64,
    count: usize,
    sigma_range: (f64, f64),
) -> Vec<SpectralField> {
    let mut sigma_rng =
        ChaCha8Rng::from_seed(stream_seed_words([seed, 0x7369_676d, 0, 0, 0, 0]));
    (0..count)
        .map(|k| {
            let sigma = sigma_rng.gen_range(sigma_range.0..=sigma_range.1);
            power_law_field(grid, sigma, 1.0, seed.wrapping_add(1 + k as u64))
        })
        .collect()
}

fn clamp_wavenumber(grid: &TorusGrid, k: i64) -> i64 {
    let max = (grid.modes_per_axis() / 2 - 1) as i64;
    k.min(max).max(1)
}

fn single_mode(grid: TorusGrid, k: i64, amp: f64) -> SpectralField {
    let mode: Mode = [clamp_wavenumber(&grid, k), 0, 0];
    SpectralField::harmonic(grid, mode, Complex64::new(amp / 2.0, 0.0)).unwrap()
}

fn two_mode(grid: TorusGrid, k1: i64, a1: f64, k2: i64, a2: f64) -> SpectralField {
    single_mode(grid, k1, a1).add(&single_mode(grid, k2, a2)).unwrap()
}

/// Twenty deterministic edge-case fields: ten single harmonics across the
/// dyadic range and ten two-mode fields with extreme amplitude or frequency
/// separation.  Wavenumbers are clamped into the retained band, so very small
/// grids may repeat entries.
pub fn adversarial_corpus(grid: TorusGrid) -> Vec<SpectralField> {
    let n = grid.modes_per_axis() as i64;
    let near_nyquist = n / 2 - 1;
    let singles = [1, 2, 3, 4, 6, 8, 12, 16, 24, near_nyquist];
    let mut out: Vec<SpectralField> =
        singles.iter().map(|&k| single_mode(grid, k, 1.0)).collect();
    let pairs: [(i64, f64, i64, f64); 10] = [
        (1, 1.0, 2, 1.0),
        (1, 1.0, 3, 1.0),
        (2, 1.0, 3, 1.0),
        (1, 1e3, 2, 1.0),
        (1, 1.0, 2, 1e3),
        (1, 1e-3, near_nyquist, 1.0),
        (1, 1.0, near_nyquist, 1e-3),
        (1, 1.0, near_nyquist, 1.0),
        (2, 10.0, n / 4, 0.1),
        (3, 0.1, n / 4, 10.0),
    ];
    out.extend(pairs.iter().map(|&(k1, a1, k2, a2)| two_mode(grid, k1, a1, k2, a2)));
    out
}

/// The standard mixed corpus: `count` power-law fields over σ in `[0.6, 3.0]`
/// plus the adversarial tail.
pub fn standard_corpus(grid: TorusGrid, seed: u64, count: usize) -> Vec<SpectralField> {
    let mut out = power_law_corpus(grid, seed, count, (0.6, 3.0));
    out.extend(adversarial_corpus(grid));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> TorusGrid {
        TorusGrid::new(1, 64, 2).unwrap()
    }

    #[test]
    fn corpus_is_reproducible_and_sized() {
        let g = grid();
        let a = standard_corpus(g, 5, 30);
        let b = standard_corpus(g, 5, 30);
        assert_eq!(a.len(), 50);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.coeffs(), y.coeffs());
        }
        let c = standard_corpus(g, 6, 30);
        assert_ne!(a[0].coeffs(), c[0].coeffs());
    }

    #[test]
    fn power_law_fields_are_mean_free_and_hermitian() {
        let g = grid();
        for f in power_law_corpus(g, 1, 8, (0.6, 3.0)) {
            assert_eq!(f.mean(), 0.0);
            assert!(f.hermitian_defect() < 1e-14);
            assert!(f.l2_norm() > 0.0);
        }
    }

    #[test]
    fn power_law_slope_shows_in_coefficients() {
        let g = grid();
        let f = power_law_field(g, 2.0, 3.0, 9);
        let c1 = f.coeff([1, 0, 0]).norm();
        let c4 = f.coeff([4, 0, 0]).norm();
        assert!((c1 - 3.0).abs() < 1e-12);
        assert!((c4 - 3.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn adversarial_entries_stay_in_band() {
        let g = TorusGrid::new(1, 16, 2).unwrap();
        let fields = adversarial_corpus(g);
        assert_eq!(fields.len(), 20);
        for f in &fields {
            assert!(f.hermitian_defect() == 0.0);
            assert!(f.l2_norm() > 0.0);
        }
    }

    #[test]
    fn pair_slopes_are_offset_by_one() {
        let g = grid();
        let pair = power_law_pair(g, 1.5, 2.0, 4);
        let r0 = pair.u0.coeff([8, 0, 0]).norm() / pair.u0.coeff([2, 0, 0]).norm();
        let r1 = pair.u1.coeff([8, 0, 0]).norm() / pair.u1.coeff([2, 0, 0]).norm();
        assert!((r0 - 0.25f64.powf(1.5)).abs() < 1e-12);
        assert!((r1 - 0.25f64.powf(0.5)).abs() < 1e-12);
    }
}
