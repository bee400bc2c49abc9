//! Band-limited real fields stored by Fourier coefficient.

use num_complex::Complex64;
use rustfft::FftDirection;

use crate::error::{Error, Result};
use crate::fft::dft_cube;
use crate::grid::{Mode, TorusGrid};
use crate::multiplier::MultiplierSymbol;

/// Real field on the torus, stored as complex coefficients over the retained
/// cube in row-major wavenumber order.
///
/// Invariant: `c_{-n} = conj(c_n)` for every retained pair, and coefficients
/// on the unmatched `-N/2` planes vanish, so synthesized samples are real up
/// to roundoff.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: TorusGrid,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zero(grid: TorusGrid) -> Self {
        Self { grid, coeffs: vec![Complex64::ZERO; grid.spectral_len()] }
    }

    /// Wrap raw coefficients, rejecting non-Hermitian input.
    pub fn from_coeffs(grid: TorusGrid, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.spectral_len() {
            return Err(Error::SizeMismatch { expected: grid.spectral_len(), got: coeffs.len() });
        }
        let field = Self { grid, coeffs };
        let scale = field.coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
        let defect = field.hermitian_defect();
        if defect > 1e-12 * (1.0 + scale) {
            return Err(Error::NotHermitian { defect });
        }
        Ok(field)
    }

    pub(crate) fn from_coeffs_unchecked(grid: TorusGrid, coeffs: Vec<Complex64>) -> Self {
        debug_assert_eq!(coeffs.len(), grid.spectral_len());
        let field = Self { grid, coeffs };
        field.debug_check_hermitian();
        field
    }

    /// The real field `a e_n + conj(a) e_{-n}` (for `n = 0`: the constant
    /// `Re a`, rejecting a nonzero imaginary part).
    pub fn harmonic(grid: TorusGrid, mode: Mode, amplitude: Complex64) -> Result<Self> {
        let mut field = Self::zero(grid);
        let idx = grid
            .index_of(mode)
            .ok_or_else(|| Error::InvalidArgument(format!("mode {mode:?} outside retained cube")))?;
        if mode == [0, 0, 0] {
            if amplitude.im != 0.0 {
                return Err(Error::InvalidArgument(
                    "constant mode requires a real amplitude".into(),
                ));
            }
            field.coeffs[idx] = amplitude;
            return Ok(field);
        }
        let mirror = grid.mirror_index(mode).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "mode {mode:?} sits on the unmatched -N/2 plane and cannot carry a real harmonic"
            ))
        })?;
        field.coeffs[idx] = amplitude;
        field.coeffs[mirror] = amplitude.conj();
        Ok(field)
    }

    /// Build a Hermitian field from values prescribed on canonical modes.
    ///
    /// `f` is consulted once per conjugate pair, at the representative whose
    /// last nonzero component is positive; the mirror coefficient is filled
    /// with the conjugate.  At `n = 0` only the real part is kept.  Unmatched
    /// `-N/2` planes stay zero.
    pub fn from_mode_fn(grid: TorusGrid, mut f: impl FnMut(Mode) -> Complex64) -> Self {
        let mut field = Self::zero(grid);
        for (idx, mode) in grid.modes() {
            if grid.is_unpaired(mode) {
                continue;
            }
            if mode == [0, 0, 0] {
                field.coeffs[idx] = Complex64::new(f(mode).re, 0.0);
            } else if canonical_half_space(mode) {
                let value = f(mode);
                field.coeffs[idx] = value;
                let mirror = grid.mirror_index(mode).expect("paired mode has a mirror");
                field.coeffs[mirror] = value.conj();
            }
        }
        field.debug_check_hermitian();
        field
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeff(&self, mode: Mode) -> Complex64 {
        self.grid.index_of(mode).map_or(Complex64::ZERO, |i| self.coeffs[i])
    }

    /// Mean value of the field, `c_0`.
    pub fn mean(&self) -> f64 {
        self.coeff([0, 0, 0]).re
    }

    /// Worst violation of conjugate symmetry (including any mass on the
    /// unmatched planes).
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, mode) in self.grid.modes() {
            match self.grid.mirror_index(mode) {
                Some(j) => worst = worst.max((self.coeffs[i] - self.coeffs[j].conj()).norm()),
                None => worst = worst.max(self.coeffs[i].norm()),
            }
        }
        worst
    }

    fn debug_check_hermitian(&self) {
        #[cfg(debug_assertions)]
        {
            let scale = self.coeffs.iter().map(|c| c.norm()).fold(0.0f64, f64::max);
            let defect = self.hermitian_defect();
            debug_assert!(
                defect <= 1e-9 * (1.0 + scale),
                "hermitian defect {defect:.3e} at scale {scale:.3e}"
            );
        }
    }

    /// Samples on the oversampled physical grid (complex, before dropping the
    /// roundoff-level imaginary part).
    pub fn synthesize_complex(&self) -> Vec<Complex64> {
        let m = self.grid.phys_per_axis();
        let mut buf = vec![Complex64::ZERO; self.grid.phys_len()];
        for (i, mode) in self.grid.modes() {
            let c = self.coeffs[i];
            if c == Complex64::ZERO {
                continue;
            }
            buf[phys_slot(&self.grid, mode)] = c;
        }
        dft_cube(&mut buf, self.grid.dim(), m, FftDirection::Inverse);
        buf
    }

    /// Real samples `u(x_j)` on the physical grid.
    pub fn synthesize(&self) -> Vec<f64> {
        self.synthesize_complex().into_iter().map(|z| z.re).collect()
    }

    /// Recover coefficients from physical samples, truncating modes outside
    /// the retained cube.  Unmatched `-N/2` planes are zeroed so the result
    /// is exactly Hermitian for real input.
    pub fn analyze(grid: TorusGrid, samples: &[f64]) -> Result<Self> {
        if samples.len() != grid.phys_len() {
            return Err(Error::SizeMismatch { expected: grid.phys_len(), got: samples.len() });
        }
        let m = grid.phys_per_axis();
        let mut buf: Vec<Complex64> =
            samples.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        dft_cube(&mut buf, grid.dim(), m, FftDirection::Forward);
        let scale = 1.0 / grid.phys_len() as f64;
        let mut coeffs = vec![Complex64::ZERO; grid.spectral_len()];
        // symmetrize conjugate pairs explicitly: the DFT of real input is
        // Hermitian in exact arithmetic, but FFT roundoff is not, and in a
        // field with strong amplitude contrast that noise can dominate weak
        // dyadic shells
        for (i, mode) in grid.modes() {
            if grid.is_unpaired(mode) {
                continue;
            }
            if mode == [0, 0, 0] {
                coeffs[i] = Complex64::new(buf[phys_slot(&grid, mode)].re * scale, 0.0);
            } else if canonical_half_space(mode) {
                let direct = buf[phys_slot(&grid, mode)];
                let mirrored = buf[phys_slot(&grid, [-mode[0], -mode[1], -mode[2]])];
                let c = (direct + mirrored.conj()) * (0.5 * scale);
                coeffs[i] = c;
                let j = grid.mirror_index(mode).expect("paired mode has a mirror");
                coeffs[j] = c.conj();
            }
        }
        Ok(Self::from_coeffs_unchecked(grid, coeffs))
    }

    /// Apply a multiplier symbol coefficient-wise.  A non-finite symbol value
    /// at a retained mode is reported as singular.
    pub fn apply_multiplier(&self, symbol: &MultiplierSymbol) -> Result<Self> {
        let mut coeffs = self.coeffs.clone();
        for (i, mode) in self.grid.modes() {
            let m = symbol.eval(mode);
            if !m.re.is_finite() || !m.im.is_finite() {
                return Err(Error::SingularSymbol { label: symbol.label().to_string(), mode });
            }
            coeffs[i] *= m;
        }
        Ok(Self::from_coeffs_unchecked(self.grid, coeffs))
    }

    /// Dealiased pointwise nonlinearity `u -> |u|^{p-1} u`.
    ///
    /// Synthesizes on the oversampled grid, applies the power there, and
    /// re-analyzes.  Exact (up to roundoff) for integer `p` when the product
    /// bandwidth stays below the oversampled Nyquist; for non-integer `p` the
    /// power is not band-limited and the result is the retained-cube
    /// truncation, whose quality improves with `oversample`.
    pub fn pointwise_power(&self, p: f64) -> Result<Self> {
        if !(p >= 1.0) {
            return Err(Error::InvalidArgument(format!("power p must be >= 1, got {p}")));
        }
        let mut samples = self.synthesize();
        for s in &mut samples {
            let v = s.abs().powf(p - 1.0) * *s;
            if !v.is_finite() {
                return Err(Error::NonFinite(format!(
                    "pointwise power p={p} (sample {s:.3e} overflowed)"
                )));
            }
            *s = v;
        }
        Self::analyze(self.grid, &samples)
    }

    /// `L^q` norm by equal-weight quadrature on the physical grid, normalized
    /// so that the constant 1 has norm `(2π)^{d/q}`.  `q = inf` is the grid
    /// maximum of `|u|`.
    pub fn lebesgue_norm(&self, q: f64) -> Result<f64> {
        Ok(self.integral_abs_pow(q)?.1)
    }

    /// `(integral of |u|^q, L^q norm)`; for `q = inf` the integral slot
    /// carries the maximum itself.
    pub fn integral_abs_pow(&self, q: f64) -> Result<(f64, f64)> {
        if q.is_nan() || q < 1.0 {
            return Err(Error::InvalidArgument(format!("Lebesgue exponent must be >= 1, got {q}")));
        }
        let samples = self.synthesize();
        if q.is_infinite() {
            let max = samples.iter().fold(0.0f64, |acc, s| acc.max(s.abs()));
            return Ok((max, max));
        }
        let sum: f64 = samples.iter().map(|s| s.abs().powf(q)).sum();
        let integral = self.grid.cell_volume() * sum;
        Ok((integral, integral.powf(1.0 / q)))
    }

    /// `L^2` norm through Plancherel, `(2π)^{d/2} ||c||_{l^2}`; cheaper than
    /// quadrature and identical up to roundoff.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        (self.grid.torus_volume() * sum).sqrt()
    }

    pub fn scale(&self, factor: f64) -> Self {
        let coeffs = self.coeffs.iter().map(|c| c * factor).collect();
        Self { grid: self.grid, coeffs }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(
                "fields live on different grids; refusing to combine".into(),
            ));
        }
        let coeffs =
            self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid, coeffs })
    }

    /// `sum_n |c_n|` scale used for tolerance decisions.
    pub fn coeff_linf(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }
}

/// True when the last nonzero component of `mode` is positive; exactly one of
/// `n`, `-n` satisfies this for `n != 0`.
pub fn canonical_half_space(mode: Mode) -> bool {
    for axis in (0..3).rev() {
        if mode[axis] != 0 {
            return mode[axis] > 0;
        }
    }
    false
}

fn phys_slot(grid: &TorusGrid, mode: Mode) -> usize {
    let m = grid.phys_per_axis();
    let mi = m as i64;
    let mut flat = 0usize;
    for axis in 0..grid.dim() {
        let wrapped = mode[axis].rem_euclid(mi) as usize;
        flat = flat * m + wrapped;
    }
    flat
}
