//! Littlewood-Paley decomposition and Besov/Sobolev norms.
//!
//! The radial cutoff `φ` equals 1 on `[0,1]`, 0 on `[2,∞)`, and in between is
//! the mollification of the indicator of `[0, 3/2]` by the standard
//! `exp(-1/x)` bump, tabulated once and interpolated.  Projectors are
//! `P_j u = Σ φ(2^{-j}|n|) c_n e_n`, blocks are `Δ_j = P_j - P_{j-1}` with
//! `P_{-1} = 0`, so that `Σ_{j=0}^{J} Δ_j` telescopes to the identity on the
//! retained cube for `J = ceil(log2 N) + 1`.

use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::grid::{retained_radii, TorusGrid};
use crate::multiplier::MultiplierSymbol;

/// Table resolution for `φ` on `[1, 2]`.
const TABLE_LEN: usize = 8192;
/// Simpson sub-panels per table cell when accumulating the mollifier.
const SUB_PANELS: usize = 8;

/// Tabulated smooth dyadic cutoff.
pub struct BumpProfile {
    /// `φ(1 + i/TABLE_LEN)` for `i = 0..=TABLE_LEN`; starts at exactly 1,
    /// ends at exactly 0.
    table: Vec<f64>,
}

/// The `exp(-1/(1/4 - t^2))` mollifier on `(-1/2, 1/2)`.
fn mollifier(t: f64) -> f64 {
    let q = 0.25 - t * t;
    if q <= 0.0 {
        0.0
    } else {
        (-1.0 / q).exp()
    }
}

impl BumpProfile {
    fn build() -> Self {
        // cumulative integral of the mollifier over [-1/2, y] at the table
        // nodes y_i = -1/2 + i/TABLE_LEN, by composite Simpson per cell
        let mut cumulative = Vec::with_capacity(TABLE_LEN + 1);
        cumulative.push(0.0f64);
        let cell = 1.0 / TABLE_LEN as f64;
        let h = cell / SUB_PANELS as f64;
        let mut acc = 0.0f64;
        for i in 0..TABLE_LEN {
            let left = -0.5 + i as f64 * cell;
            let mut cell_sum = 0.0f64;
            for s in 0..SUB_PANELS {
                let a = left + s as f64 * h;
                cell_sum += h / 6.0
                    * (mollifier(a) + 4.0 * mollifier(a + 0.5 * h) + mollifier(a + h));
            }
            acc += cell_sum;
            cumulative.push(acc);
        }
        let total = acc;
        // φ(r) = 1 - G(r - 3/2)/Z on (1, 2); the shared `total` makes the
        // endpoints exactly 1 and 0
        let table = cumulative.into_iter().map(|g| 1.0 - g / total).collect();
        Self { table }
    }

    /// The shared profile.
    pub fn standard() -> &'static Self {
        static PROFILE: OnceLock<BumpProfile> = OnceLock::new();
        PROFILE.get_or_init(Self::build)
    }

    /// Continuity class of the interpolated profile (the underlying
    /// mollified step is smooth; the cubic table interpolant is C^1).
    pub fn smoothness_order(&self) -> u32 {
        1
    }

    /// Evaluate `φ(r)`; exactly 1 for `r <= 1` and exactly 0 for `r >= 2`.
    pub fn eval(&self, r: f64) -> f64 {
        if r <= 1.0 {
            return 1.0;
        }
        if r >= 2.0 {
            return 0.0;
        }
        let x = (r - 1.0) * TABLE_LEN as f64;
        let i = (x as usize).min(TABLE_LEN - 1);
        let t = x - i as f64;
        // Catmull-Rom tangents, one-sided at the ends
        let y0 = self.table[i];
        let y1 = self.table[i + 1];
        let m0 = if i == 0 {
            y1 - y0
        } else {
            0.5 * (y1 - self.table[i - 1])
        };
        let m1 = if i + 2 > TABLE_LEN {
            y1 - y0
        } else {
            0.5 * (self.table[i + 2] - y0)
        };
        let t2 = t * t;
        let t3 = t2 * t;
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * m1;
        v.clamp(0.0, 1.0)
    }

    /// Projector weight `φ(2^{-j} r)`.
    pub fn projector_weight(&self, j: usize, r: f64) -> f64 {
        self.eval(r / (1u64 << j) as f64)
    }

    /// Block weight of `Δ_j` at radius `r`.
    pub fn delta_weight(&self, j: usize, r: f64) -> f64 {
        if j == 0 {
            self.eval(r)
        } else {
            self.projector_weight(j, r) - self.projector_weight(j - 1, r)
        }
    }

    /// `Σ_j w_j(r)^2` over `j = 0..=j_top`; the exact `L^2` square-function
    /// weight at radius `r`.
    pub fn sum_sq_weights(&self, j_top: usize, r: f64) -> f64 {
        (0..=j_top).map(|j| self.delta_weight(j, r).powi(2)).sum()
    }
}

/// `P_j u`: low-pass at dyadic level `j`.
pub fn project(field: &SpectralField, j: usize) -> SpectralField {
    let profile = BumpProfile::standard();
    let sym = MultiplierSymbol::radial(format!("P_{j}"), move |r| profile.projector_weight(j, r));
    field.apply_multiplier(&sym).expect("projector weight is finite")
}

/// `Δ_j u`: dyadic block at level `j` (`Δ_0 = P_0`).
pub fn delta(field: &SpectralField, j: usize) -> SpectralField {
    let profile = BumpProfile::standard();
    let sym = MultiplierSymbol::radial(format!("Delta_{j}"), move |r| profile.delta_weight(j, r));
    field.apply_multiplier(&sym).expect("block weight is finite")
}

/// All blocks `Δ_0 u, ..., Δ_J u` with `J` from the grid bandwidth.
pub fn decompose(field: &SpectralField) -> Vec<SpectralField> {
    (0..=field.grid().dyadic_levels()).map(|j| delta(field, j)).collect()
}

/// Sum a block list back into one field.  An empty list is rejected because
/// it names no grid.
pub fn reconstruct(blocks: &[SpectralField]) -> Result<SpectralField> {
    let first = blocks
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot reconstruct from an empty block list".into()))?;
    let mut acc = first.clone();
    for block in &blocks[1..] {
        acc = acc.add(block)?;
    }
    Ok(acc)
}

/// Besov norm request `B^s_{p,r}`; `p` and `r` may be `f64::INFINITY`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct NormSpec {
    pub s: f64,
    #[serde(with = "crate::io::exponent_serde")]
    pub p: f64,
    #[serde(with = "crate::io::exponent_serde")]
    pub r: f64,
    #[serde(default)]
    pub homogeneous: bool,
}

impl NormSpec {
    pub fn new(s: f64, p: f64, r: f64) -> Self {
        Self { s, p, r, homogeneous: false }
    }

    pub fn homogeneous(s: f64, p: f64, r: f64) -> Self {
        Self { s, p, r, homogeneous: true }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.s.is_finite() {
            return Err(Error::InvalidArgument(format!("Besov s must be finite, got {}", self.s)));
        }
        for (name, v) in [("p", self.p), ("r", self.r)] {
            if v.is_nan() || v < 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "Besov {name} must be >= 1 or inf, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Besov norm value with the dyadic window that actually contributed.
#[derive(Clone, Copy, Debug)]
pub struct BesovReport {
    pub value: f64,
    /// First and last level with a nonzero block norm; `None` for the zero
    /// field.
    pub window: Option<(usize, usize)>,
}

/// `B^s_{p,r}` through the block norms.  The homogeneous variant drops the
/// mean mode (the only retained mode without a dyadic shell) and refuses
/// fields whose mean is essential, i.e. nonzero mean with `s <= 0`.
pub fn besov_norm_report(field: &SpectralField, spec: &NormSpec) -> Result<BesovReport> {
    spec.validate()?;
    let mut work = field.clone();
    if spec.homogeneous {
        let mean = field.mean();
        if mean.abs() > 1e-12 * (1.0 + field.coeff_linf()) {
            if spec.s <= 0.0 {
                return Err(Error::IllConditioned(format!(
                    "homogeneous Besov norm with s = {} <= 0 on a field with mean {mean:.3e}",
                    spec.s
                )));
            }
            work = drop_mean(field);
        }
    }
    let j_top = field.grid().dyadic_levels();
    let mut sum = 0.0f64;
    let mut sup = 0.0f64;
    let mut window: Option<(usize, usize)> = None;
    for j in 0..=j_top {
        let block_norm = delta(&work, j).lebesgue_norm(spec.p)?;
        if block_norm > 0.0 {
            window = Some(match window {
                None => (j, j),
                Some((lo, _)) => (lo, j),
            });
        }
        let weighted = 2f64.powf(spec.s * j as f64) * block_norm;
        if spec.r.is_infinite() {
            sup = sup.max(weighted);
        } else {
            sum += weighted.powf(spec.r);
        }
    }
    let value = if spec.r.is_infinite() { sup } else { sum.powf(1.0 / spec.r) };
    Ok(BesovReport { value, window })
}

pub fn besov_norm(field: &SpectralField, spec: &NormSpec) -> Result<f64> {
    Ok(besov_norm_report(field, spec)?.value)
}

/// `W^{s,p}` norm via the Bessel multiplier `<n>^s`.
pub fn sobolev_norm(field: &SpectralField, s: f64, p: f64) -> Result<f64> {
    let weighted = field.apply_multiplier(&MultiplierSymbol::bessel_potential(s))?;
    weighted.lebesgue_norm(p)
}

/// Homogeneous Sobolev norm `|| |∇|^s u ||_{L^p}` over the mean-free part,
/// reported together with the dropped mean.
pub struct HomogeneousSobolev {
    pub value: f64,
    pub mean: f64,
}

pub fn sobolev_norm_homogeneous(field: &SpectralField, s: f64, p: f64) -> Result<HomogeneousSobolev> {
    let mean = field.mean();
    let mut coeffs = field.coeffs().to_vec();
    for (i, mode) in field.grid().modes() {
        if mode == [0, 0, 0] {
            coeffs[i] = num_complex::Complex64::ZERO;
        } else {
            coeffs[i] *= TorusGrid::norm(mode).powf(s);
        }
    }
    let weighted = SpectralField::from_coeffs_unchecked(*field.grid(), coeffs);
    Ok(HomogeneousSobolev { value: weighted.lebesgue_norm(p)?, mean })
}

/// Drop the mean mode.
pub fn drop_mean(field: &SpectralField) -> SpectralField {
    let mut coeffs = field.coeffs().to_vec();
    if let Some(i) = field.grid().index_of([0, 0, 0]) {
        coeffs[i] = num_complex::Complex64::ZERO;
    }
    SpectralField::from_coeffs_unchecked(*field.grid(), coeffs)
}

/// `|| (Σ_j |Δ_j u|^2)^{1/2} ||_{L^p}` over the full block range.
pub fn square_function_norm(field: &SpectralField, p: f64) -> Result<f64> {
    let blocks = decompose(field);
    let mut sq = vec![0.0f64; field.grid().phys_len()];
    for block in &blocks {
        for (slot, s) in sq.iter_mut().zip(block.synthesize()) {
            *slot += s * s;
        }
    }
    let samples: Vec<f64> = sq.into_iter().map(f64::sqrt).collect();
    if p.is_infinite() {
        return Ok(samples.iter().fold(0.0f64, |a, s| a.max(s.abs())));
    }
    if p.is_nan() || p < 1.0 {
        return Err(Error::InvalidArgument(format!("Lebesgue exponent must be >= 1, got {p}")));
    }
    let sum: f64 = samples.iter().map(|s| s.abs().powf(p)).sum();
    Ok((field.grid().cell_volume() * sum).powf(1.0 / p))
}

/// Exact bracket for `B^s_{2,2} / H^s` on a given grid: the range over all
/// retained radii of `Σ_j 2^{2js} w_j(r)^2 / <r>^{2s}`, returned as
/// `(min, max)` of its square root.  Any field's ratio of the two norms is a
/// weighted mean of this quantity over its support, so it must land inside.
pub fn besov_h_bracket(grid: &TorusGrid, s: f64) -> (f64, f64) {
    let profile = BumpProfile::standard();
    let j_top = grid.dyadic_levels();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for r in retained_radii(grid) {
        let num: f64 =
            (0..=j_top).map(|j| (4f64.powf(s * j as f64)) * profile.delta_weight(j, r).powi(2)).sum();
        let g = num / (1.0 + r * r).powf(s);
        lo = lo.min(g);
        hi = hi.max(g);
    }
    (lo.sqrt(), hi.sqrt())
}
