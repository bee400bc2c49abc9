//! Discretization of the torus `[0, 2π)^d`.
//!
//! Fields are represented by Fourier coefficients on the plane-wave basis
//! `e_n(x) = exp(i n·x)` with integer wavenumbers `n`.  A grid retains the
//! cube of wavenumbers spanning `[-N/2, N/2)` per axis and carries an
//! oversampled physical grid of `rho*N` uniform points per axis for
//! pointwise (nonlinear) operations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A wavenumber.  Axes beyond the grid dimension are zero.
pub type Mode = [i64; 3];

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Spectral grid on `[0, 2π)^d`, `d <= 3`.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct TorusGrid {
    dim: usize,
    modes_per_axis: usize,
    oversample: usize,
}

impl TorusGrid {
    /// `modes_per_axis` is the retained bandwidth `N` (even), `oversample`
    /// the physical-grid factor `rho`.
    pub fn new(dim: usize, modes_per_axis: usize, oversample: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1..=3, got {dim}")));
        }
        if modes_per_axis < 2 || modes_per_axis % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "modes_per_axis must be even and >= 2, got {modes_per_axis}"
            )));
        }
        if oversample < 2 {
            return Err(Error::InvalidGrid(format!(
                "oversample must be >= 2, got {oversample}"
            )));
        }
        Ok(Self { dim, modes_per_axis, oversample })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes_per_axis(&self) -> usize {
        self.modes_per_axis
    }

    pub fn oversample(&self) -> usize {
        self.oversample
    }

    /// Number of retained coefficients, `N^d`.
    pub fn spectral_len(&self) -> usize {
        self.modes_per_axis.pow(self.dim as u32)
    }

    /// Physical points per axis, `rho*N`.
    pub fn phys_per_axis(&self) -> usize {
        self.oversample * self.modes_per_axis
    }

    /// Total physical points, `(rho*N)^d`.
    pub fn phys_len(&self) -> usize {
        self.phys_per_axis().pow(self.dim as u32)
    }

    /// Quadrature weight of one physical cell, `(2π/(rho*N))^d`.
    pub fn cell_volume(&self) -> f64 {
        (TWO_PI / self.phys_per_axis() as f64).powi(self.dim as i32)
    }

    /// Volume of the torus, `(2π)^d`.
    pub fn torus_volume(&self) -> f64 {
        TWO_PI.powi(self.dim as i32)
    }

    /// Top dyadic level `J` such that blocks `0..=J` reproduce every retained
    /// mode: `J = ceil(log2 N) + 1`.
    pub fn dyadic_levels(&self) -> usize {
        let n = self.modes_per_axis;
        let ceil_log2 = n.next_power_of_two().trailing_zeros() as usize;
        ceil_log2 + 1
    }

    /// Flat row-major index of a retained mode, or `None` if outside the cube.
    pub fn index_of(&self, mode: Mode) -> Option<usize> {
        let n = self.modes_per_axis as i64;
        let half = n / 2;
        let mut flat: usize = 0;
        for axis in 0..self.dim {
            let shifted = mode[axis] + half;
            if !(0..n).contains(&shifted) {
                return None;
            }
            flat = flat * self.modes_per_axis + shifted as usize;
        }
        for axis in self.dim..3 {
            if mode[axis] != 0 {
                return None;
            }
        }
        Some(flat)
    }

    /// Mode of a flat row-major index.
    pub fn mode_of(&self, index: usize) -> Mode {
        debug_assert!(index < self.spectral_len());
        let n = self.modes_per_axis;
        let half = (n / 2) as i64;
        let mut mode = [0i64; 3];
        let mut rem = index;
        for axis in (0..self.dim).rev() {
            mode[axis] = (rem % n) as i64 - half;
            rem /= n;
        }
        mode
    }

    /// Iterator over `(flat_index, mode)` for every retained mode.
    pub fn modes(&self) -> impl Iterator<Item = (usize, Mode)> + '_ {
        (0..self.spectral_len()).map(move |i| (i, self.mode_of(i)))
    }

    /// True when some component sits on the unmatched plane `-N/2`; such a
    /// mode has no mirror in the cube and must carry a zero coefficient in a
    /// real field.
    pub fn is_unpaired(&self, mode: Mode) -> bool {
        let half = (self.modes_per_axis / 2) as i64;
        (0..self.dim).any(|axis| mode[axis] == -half)
    }

    /// Flat index of `-mode`, when retained.
    pub fn mirror_index(&self, mode: Mode) -> Option<usize> {
        self.index_of([-mode[0], -mode[1], -mode[2]])
    }

    /// `|n|^2` as a float.
    pub fn norm_sq(mode: Mode) -> f64 {
        let [a, b, c] = mode;
        (a * a + b * b + c * c) as f64
    }

    /// Euclidean `|n|`.
    pub fn norm(mode: Mode) -> f64 {
        Self::norm_sq(mode).sqrt()
    }
}

/// Distinct values of `|n|` over the retained cube, ascending.  Used to scan
/// radial multipliers exhaustively.
pub fn retained_radii(grid: &TorusGrid) -> Vec<f64> {
    let mut sq: Vec<i64> = grid
        .modes()
        .map(|(_, m)| m[0] * m[0] + m[1] * m[1] + m[2] * m[2])
        .collect();
    sq.sort_unstable();
    sq.dedup();
    sq.into_iter().map(|s| (s as f64).sqrt()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_roundtrip_d2() {
        let g = TorusGrid::new(2, 8, 2).unwrap();
        for (i, m) in g.modes() {
            assert_eq!(g.index_of(m), Some(i));
        }
        assert_eq!(g.spectral_len(), 64);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TorusGrid::new(0, 8, 2).is_err());
        assert!(TorusGrid::new(4, 8, 2).is_err());
        assert!(TorusGrid::new(1, 7, 2).is_err());
        assert!(TorusGrid::new(1, 8, 1).is_err());
    }

    #[test]
    fn unpaired_plane_detected() {
        let g = TorusGrid::new(1, 8, 2).unwrap();
        assert!(g.is_unpaired([-4, 0, 0]));
        assert!(!g.is_unpaired([3, 0, 0]));
        assert_eq!(g.mirror_index([-4, 0, 0]), None);
        assert_eq!(g.mirror_index([3, 0, 0]), g.index_of([-3, 0, 0]));
    }

    #[test]
    fn dyadic_levels_cover_bandwidth() {
        for n in [2usize, 8, 48, 64, 256] {
            let g = TorusGrid::new(1, n, 2).unwrap();
            let top = g.dyadic_levels() as f64;
            // every retained |n| (corner included, d=3 worst case) sits inside
            // the unit ball after scaling by 2^-J
            let corner = 3f64.sqrt() * (n as f64) / 2.0;
            assert!(corner / 2f64.powf(top) <= 1.0);
        }
    }

    #[test]
    fn quadrature_normalization() {
        let g = TorusGrid::new(2, 8, 2).unwrap();
        let total: f64 = g.cell_volume() * g.phys_len() as f64;
        assert!((total - g.torus_volume()).abs() < 1e-12);
    }
}
