//! Exact linear wave propagation in Fourier space.
//!
//! For `u_tt = Δu` with data `(u0, u1)` the solution is diagonal per mode:
//! `z_n(t) = cos(t|n|) c0_n + sinc-type sin(t|n|)/|n| c1_n`, with the `|n| = 0`
//! limit `c0 + t c1`.  The "tilde" variant folds one Japanese-bracket weight
//! into the time derivative so that rough velocities stay in the same space:
//! `z~ = <∇>^{-1} ∂_t z`, i.e. `∂_t z = <∇> z~`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::TorusGrid;
use crate::lp;

/// Position/velocity pair on a common grid.
#[derive(Clone, Debug)]
pub struct WavePair {
    pub u0: SpectralField,
    pub u1: SpectralField,
}

impl WavePair {
    pub fn new(u0: SpectralField, u1: SpectralField) -> Result<Self> {
        if u0.grid() != u1.grid() {
            return Err(Error::GridMismatch("wave pair components must share a grid".into()));
        }
        Ok(Self { u0, u1 })
    }

    pub fn zero(grid: TorusGrid) -> Self {
        Self { u0: SpectralField::zero(grid), u1: SpectralField::zero(grid) }
    }

    pub fn grid(&self) -> &TorusGrid {
        self.u0.grid()
    }
}

/// Free evolution `z(t)`.
pub fn evolve_linear(pair: &WavePair, t: f64) -> SpectralField {
    map_pair(pair, |r, c0, c1| {
        let (s, c) = (t * r).sin_cos();
        let sinc = if r == 0.0 { t } else { s / r };
        c * c0 + sinc * c1
    })
}

/// Weighted derivative `z~(t) = <∇>^{-1} ∂_t z(t)`.
pub fn evolve_tilde(pair: &WavePair, t: f64) -> SpectralField {
    map_pair(pair, |r, c0, c1| {
        let (s, c) = (t * r).sin_cos();
        let bracket = (1.0 + r * r).sqrt();
        (-r * s * c0 + c * c1) / bracket
    })
}

/// Propagated state `(z(t), ∂_t z(t))`; composing these realizes the group law.
pub fn evolve_state(pair: &WavePair, t: f64) -> WavePair {
    let z = evolve_linear(pair, t);
    let zt = map_pair(pair, |r, c0, c1| {
        let (s, c) = (t * r).sin_cos();
        -r * s * c0 + c * c1
    });
    WavePair { u0: z, u1: zt }
}

/// Frequency-truncated free evolution `P_j z(t)`.
pub fn evolve_truncated(pair: &WavePair, t: f64, cutoff_j: usize) -> SpectralField {
    lp::project(&evolve_linear(pair, t), cutoff_j)
}

/// Conserved free energy `(‖∂_t z‖² + ‖ |∇| z ‖²)/2` of the state `(z, ∂_t z)`.
pub fn free_energy(state: &WavePair) -> f64 {
    let vol = state.grid().torus_volume();
    let mut acc = 0.0;
    for (i, mode) in state.grid().modes() {
        let r2 = TorusGrid::norm_sq(mode);
        acc += state.u1.coeffs()[i].norm_sqr() + r2 * state.u0.coeffs()[i].norm_sqr();
    }
    0.5 * vol * acc
}

fn map_pair(pair: &WavePair, f: impl Fn(f64, Complex64, Complex64) -> Complex64) -> SpectralField {
    let grid = *pair.grid();
    let mut coeffs = vec![Complex64::ZERO; grid.spectral_len()];
    for (i, mode) in grid.modes() {
        if grid.is_unpaired(mode) {
            continue;
        }
        coeffs[i] = f(TorusGrid::norm(mode), pair.u0.coeffs()[i], pair.u1.coeffs()[i]);
    }
    SpectralField::from_coeffs_unchecked(grid, coeffs)
}
