//! Monte Carlo tails of space-time norms of the randomized free wave.
//!
//! For each sample the linear flow of a randomized pair is evaluated on a
//! uniform time grid, the spatial Besov norm at each node is combined into
//! `L^{q1}((0,T))` by composite trapezoid quadrature (or a sup for
//! `q1 = inf`), and the empirical survival function of the resulting norm is
//! fitted against the sub-Gaussian prediction `-log P(norm > λ) ~ c λ²` on
//! the upper tail.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lp::{self, NormSpec};
use crate::propagator::{evolve_linear, evolve_tilde, WavePair};
use crate::randomization::RandomizationSpec;

/// What to measure per sample.
#[derive(Clone, Copy, Debug)]
pub struct TailSpec {
    pub t_end: f64,
    /// Time integrability; `inf` selects the sup-in-time variant.
    pub q1: f64,
    /// Spatial norm at each time node.
    pub norm: NormSpec,
    /// Quadrature intervals over `(0, t_end)`; 64 is the working default.
    pub time_nodes: usize,
    /// Optional dyadic truncation applied to the randomized pair before
    /// propagation.
    pub truncation_j: Option<usize>,
    /// Measure the weighted derivative flow instead of the position flow.
    pub tilde: bool,
}

impl TailSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::InvalidArgument(format!("tail horizon must be positive, got {}", self.t_end)));
        }
        if self.time_nodes < 2 {
            return Err(Error::InvalidArgument(format!(
                "time quadrature needs at least 2 intervals, got {}",
                self.time_nodes
            )));
        }
        if self.q1.is_nan() || self.q1 < 1.0 {
            return Err(Error::InvalidArgument(format!("time exponent q1 must be >= 1, got {}", self.q1)));
        }
        self.norm.validate()
    }
}

/// Empirical tail of the space-time norm with its sub-Gaussian fit.
#[derive(Clone, Debug, Serialize)]
pub struct TailEstimate {
    pub lambda_grid: Vec<f64>,
    pub survival: Vec<f64>,
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    /// Slope of `-log survival` against `λ²` on the fit window.
    pub fitted_c: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Index range (inclusive) of the grid points used by the fit.
    pub fit_window: (usize, usize),
    pub samples: usize,
}

/// Per-sample space-time norms of the randomized linear flow, in sample
/// order.  This is the expensive half of a tail estimate; keeping it
/// separate lets one λ-grid choice reuse the norms.
pub fn sample_spacetime_norms(
    rand: &RandomizationSpec,
    spec: &TailSpec,
    samples: usize,
) -> Result<Vec<f64>> {
    spec.validate()?;
    if samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let nodes = spec.time_nodes;
    let dt = spec.t_end / nodes as f64;
    (0..samples as u64)
        .into_par_iter()
        .map(|m| -> Result<f64> {
            let (u0, u1) = rand.sample(m);
            let pair = match spec.truncation_j {
                Some(j) => WavePair::new(lp::project(&u0, j), lp::project(&u1, j))?,
                None => WavePair::new(u0, u1)?,
            };
            let mut acc = 0.0f64;
            let mut sup = 0.0f64;
            for i in 0..=nodes {
                let t = i as f64 * dt;
                let z = if spec.tilde { evolve_tilde(&pair, t) } else { evolve_linear(&pair, t) };
                let g = lp::besov_norm(&z, &spec.norm)?;
                if spec.q1.is_infinite() {
                    sup = sup.max(g);
                } else {
                    let w = if i == 0 || i == nodes { 0.5 } else { 1.0 };
                    acc += w * g.powf(spec.q1);
                }
            }
            Ok(if spec.q1.is_infinite() { sup } else { (acc * dt).powf(1.0 / spec.q1) })
        })
        .collect()
}

/// Survival curve of the norms on a λ-grid with a binomial normal-approximation
/// band.  The grid must be strictly increasing.
pub fn survival_curve(norms: &[f64], lambda_grid: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    if norms.is_empty() || lambda_grid.is_empty() {
        return Err(Error::InvalidArgument("survival curve needs samples and a λ grid".into()));
    }
    if lambda_grid.windows(2).any(|w| w[0] >= w[1]) || lambda_grid.iter().any(|l| !l.is_finite()) {
        return Err(Error::InvalidArgument("λ grid must be finite and strictly increasing".into()));
    }
    let m = norms.len() as f64;
    let mut survival = Vec::with_capacity(lambda_grid.len());
    let mut lo = Vec::with_capacity(lambda_grid.len());
    let mut hi = Vec::with_capacity(lambda_grid.len());
    for &lam in lambda_grid {
        let p = norms.iter().filter(|&&v| v > lam).count() as f64 / m;
        let se = (p * (1.0 - p) / m).sqrt();
        survival.push(p);
        lo.push((p - 1.96 * se).max(0.0));
        hi.push((p + 1.96 * se).min(1.0));
    }
    Ok((survival, lo, hi))
}

/// Least-squares fit of `-log survival` against `λ²` on the upper fifth of
/// the grid, restricted to points backed by at least 10 exceedances.
pub fn tail_estimate_from_norms(norms: &[f64], lambda_grid: &[f64]) -> Result<TailEstimate> {
    let (survival, ci_low, ci_high) = survival_curve(norms, lambda_grid)?;
    let m = norms.len() as f64;
    let start = (lambda_grid.len() * 4) / 5;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut window = (usize::MAX, 0usize);
    for k in start..lambda_grid.len() {
        let hits = survival[k] * m;
        if hits >= 10.0 && survival[k] < 1.0 {
            xs.push(lambda_grid[k] * lambda_grid[k]);
            ys.push(-survival[k].ln());
            window.0 = window.0.min(k);
            window.1 = window.1.max(k);
        }
    }
    if xs.len() < 5 {
        return Err(Error::DegenerateFit(format!(
            "only {} usable tail points (need 5 with >= 10 exceedances in the upper fifth)",
            xs.len()
        )));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateFit("tail grid has no spread in λ²".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (slope * x + intercept);
            e * e
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - mean_y) * (y - mean_y)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    if !(slope > 0.0) {
        return Err(Error::DegenerateFit(format!(
            "fitted tail slope must be positive for a sub-Gaussian tail, got {slope}"
        )));
    }
    Ok(TailEstimate {
        lambda_grid: lambda_grid.to_vec(),
        survival,
        ci_low,
        ci_high,
        fitted_c: slope,
        intercept,
        r_squared,
        fit_window: window,
        samples: norms.len(),
    })
}

/// Full pipeline: sample norms, then fit the tail on the given λ-grid.
pub fn strichartz_tail(
    rand: &RandomizationSpec,
    spec: &TailSpec,
    lambda_grid: &[f64],
    samples: usize,
) -> Result<TailEstimate> {
    let norms = sample_spacetime_norms(rand, spec, samples)?;
    tail_estimate_from_norms(&norms, lambda_grid)
}

/// Evenly spaced λ-grid from the sample median to the 99th percentile, the
/// default window for tail fitting.
pub fn auto_lambda_grid(norms: &[f64], count: usize) -> Result<Vec<f64>> {
    if norms.len() < 10 || count < 2 {
        return Err(Error::InvalidArgument(
            "automatic λ grid needs at least 10 norms and 2 grid points".into(),
        ));
    }
    let mut sorted = norms.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lo = sorted[sorted.len() / 2];
    let hi = sorted[(((sorted.len() as f64) * 0.99) as usize).min(sorted.len() - 1)];
    if !(hi > lo) {
        return Err(Error::DegenerateFit("norm distribution has no spread between median and q99".into()));
    }
    Ok((0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect())
}

/// Tails CSV `{lambda, survival, ci_low, ci_high}` followed by one fit
/// summary line as a comment row.
pub fn write_tail_csv(estimate: &TailEstimate, mut w: impl std::io::Write) -> Result<()> {
    writeln!(w, "lambda,survival,ci_low,ci_high")?;
    for i in 0..estimate.lambda_grid.len() {
        writeln!(
            w,
            "{},{},{},{}",
            estimate.lambda_grid[i], estimate.survival[i], estimate.ci_low[i], estimate.ci_high[i]
        )?;
    }
    writeln!(
        w,
        "# fit: c={} intercept={} r2={} window={}..{} samples={}",
        estimate.fitted_c,
        estimate.intercept,
        estimate.r_squared,
        estimate.fit_window.0,
        estimate.fit_window.1,
        estimate.samples
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::power_law_pair;
    use crate::field::SpectralField;
    use crate::grid::TorusGrid;
    use crate::randomization::CoefficientDistribution;
    use num_complex::Complex64;

    fn grid() -> TorusGrid {
        TorusGrid::new(1, 32, 2).unwrap()
    }

    fn besov_spec(nodes: usize) -> TailSpec {
        TailSpec {
            t_end: 1.0,
            q1: 2.0,
            norm: NormSpec::new(0.0, 4.0, 2.0),
            time_nodes: nodes,
            truncation_j: None,
            tilde: false,
        }
    }

    fn gaussian_rand(seed: u64) -> RandomizationSpec {
        let pair = power_law_pair(grid(), 1.2, 1.0, 77);
        RandomizationSpec::new(pair.u0, pair.u1, CoefficientDistribution::Gaussian, seed).unwrap()
    }

    #[test]
    fn spec_validation() {
        let mut s = besov_spec(64);
        s.t_end = 0.0;
        assert!(s.validate().is_err());
        let mut s = besov_spec(64);
        s.time_nodes = 1;
        assert!(s.validate().is_err());
        let mut s = besov_spec(64);
        s.q1 = 0.5;
        assert!(s.validate().is_err());
        assert!(besov_spec(64).validate().is_ok());
    }

    #[test]
    fn zero_base_gives_zero_survival() {
        let g = grid();
        let rand = RandomizationSpec::new(
            SpectralField::zero(g),
            SpectralField::zero(g),
            CoefficientDistribution::Gaussian,
            1,
        )
        .unwrap();
        let norms = sample_spacetime_norms(&rand, &besov_spec(8), 20).unwrap();
        assert!(norms.iter().all(|n| *n == 0.0));
        let (surv, _, _) = survival_curve(&norms, &[0.1, 0.2, 0.3]).unwrap();
        assert!(surv.iter().all(|p| *p == 0.0));
        // no spread: the sub-Gaussian fit must refuse
        assert!(matches!(
            tail_estimate_from_norms(&norms, &[0.1, 0.2, 0.3]),
            Err(Error::DegenerateFit(_))
        ));
    }

    #[test]
    fn rademacher_single_mode_norm_is_constant() {
        // |X_n| = 1 a.s., so the space-time norm is the same for every sample
        // and the survival curve is a step
        let g = grid();
        let u0 = SpectralField::harmonic(g, [2, 0, 0], Complex64::new(0.5, 0.0)).unwrap();
        let rand = RandomizationSpec::new(
            u0,
            SpectralField::zero(g),
            CoefficientDistribution::Rademacher,
            3,
        )
        .unwrap();
        let norms = sample_spacetime_norms(&rand, &besov_spec(16), 40).unwrap();
        let v = norms[0];
        assert!(v > 0.0);
        assert!(norms.iter().all(|n| (n - v).abs() < 1e-12 * v));
        let grid_l = [0.5 * v, 0.9 * v, 1.1 * v];
        let (surv, _, _) = survival_curve(&norms, &grid_l).unwrap();
        assert_eq!(surv, vec![1.0, 1.0, 0.0]);
    }

    #[test]
    fn survival_is_nonincreasing_and_grid_validated() {
        let norms: Vec<f64> = (0..100).map(|k| k as f64 / 10.0).collect();
        let lam: Vec<f64> = (0..20).map(|k| k as f64 / 2.0).collect();
        let (surv, lo, hi) = survival_curve(&norms, &lam).unwrap();
        for w in surv.windows(2) {
            assert!(w[1] <= w[0]);
        }
        for i in 0..surv.len() {
            assert!(lo[i] <= surv[i] && surv[i] <= hi[i]);
        }
        assert!(survival_curve(&norms, &[1.0, 1.0]).is_err(), "non-increasing grid");
        assert!(survival_curve(&norms, &[]).is_err());
    }

    #[test]
    fn gaussian_tail_fits_subgaussian_line() {
        let rand = gaussian_rand(5);
        let spec = besov_spec(32);
        let norms = sample_spacetime_norms(&rand, &spec, 2000).unwrap();
        let lam = auto_lambda_grid(&norms, 30).unwrap();
        let est = tail_estimate_from_norms(&norms, &lam).unwrap();
        assert!(est.fitted_c > 0.0);
        assert!(est.r_squared > 0.9, "tail linearity r2 = {}", est.r_squared);
        assert!(est.fit_window.0 >= (lam.len() * 4) / 5);
    }

    #[test]
    fn fitted_slope_stable_under_node_doubling() {
        let rand = gaussian_rand(5);
        let n1 = sample_spacetime_norms(&rand, &besov_spec(32), 2000).unwrap();
        let n2 = sample_spacetime_norms(&rand, &besov_spec(64), 2000).unwrap();
        let lam = auto_lambda_grid(&n1, 30).unwrap();
        let c1 = tail_estimate_from_norms(&n1, &lam).unwrap().fitted_c;
        let c2 = tail_estimate_from_norms(&n2, &lam).unwrap().fitted_c;
        assert!((c1 - c2).abs() <= 0.3 * c1.max(c2), "c1={c1} c2={c2}");
    }

    #[test]
    fn sup_in_time_variant_dominates_average() {
        let rand = gaussian_rand(9);
        let mut sup_spec = besov_spec(16);
        sup_spec.q1 = f64::INFINITY;
        let avg = sample_spacetime_norms(&rand, &besov_spec(16), 10).unwrap();
        let sup = sample_spacetime_norms(&rand, &sup_spec, 10).unwrap();
        for (a, s) in avg.iter().zip(&sup) {
            // L² in time over (0,1) is bounded by the sup
            assert!(*a <= s * 1.0000001, "avg {a} sup {s}");
        }
    }

    #[test]
    fn truncation_reduces_norms() {
        let rand = gaussian_rand(13);
        let mut spec = besov_spec(8);
        let full = sample_spacetime_norms(&rand, &spec, 10).unwrap();
        spec.truncation_j = Some(1);
        let cut = sample_spacetime_norms(&rand, &spec, 10).unwrap();
        for (f, c) in full.iter().zip(&cut) {
            assert!(c <= f, "projection cannot grow an l^r-of-blocks norm here: {c} vs {f}");
        }
    }

    #[test]
    fn csv_contains_fit_line() {
        let rand = gaussian_rand(5);
        let norms = sample_spacetime_norms(&rand, &besov_spec(16), 2000).unwrap();
        let lam = auto_lambda_grid(&norms, 25).unwrap();
        let est = tail_estimate_from_norms(&norms, &lam).unwrap();
        let mut buf = Vec::new();
        write_tail_csv(&est, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("lambda,survival,ci_low,ci_high\n"));
        assert!(text.lines().last().unwrap().starts_with("# fit: c="));
        assert_eq!(text.lines().count(), 1 + lam.len() + 1);
    }
}
