//! Monte Carlo and corpus-based verification of the functional inequalities
//! the continuation argument consumes.
//!
//! Every check reports the worst ratio `lhs / rhs` over a deterministic
//! corpus.  A "pass" certifies stability (every ratio finite and positive);
//! absolute constants are implicit in the estimates, so proximity to a fixed
//! number is never demanded.  Cross-resolution and amplitude-invariance
//! comparisons are made by running the same check twice and comparing
//! reports.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::field::{canonical_half_space, SpectralField};
use crate::galerkin::EnergyTrace;
use crate::grid::TorusGrid;
use crate::lp::{self, NormSpec};
use crate::multiplier::MultiplierSymbol;
use crate::randomization::{stream_rng, CoefficientDistribution};

/// Uniform result record for one inequality over one corpus.
#[derive(Clone, Debug, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub params: serde_json::Value,
    pub max_ratio: f64,
    pub corpus_seed: u64,
    pub grid: TorusGrid,
    pub pass: bool,
}

impl InequalityReport {
    fn from_ratios(
        name: &str,
        params: serde_json::Value,
        ratios: &[f64],
        corpus_seed: u64,
        grid: TorusGrid,
    ) -> Result<Self> {
        if ratios.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{name}: no usable corpus entries (all degenerate)"
            )));
        }
        let max_ratio = ratios.iter().copied().fold(0.0f64, f64::max);
        let min_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let pass = ratios.iter().all(|r| r.is_finite() && *r >= 0.0) && max_ratio > 0.0;
        let mut params = params;
        params["min_ratio"] = json!(min_ratio);
        params["entries"] = json!(ratios.len());
        Ok(Self { name: name.to_string(), params, max_ratio, corpus_seed, grid, pass })
    }
}

/// One Monte Carlo point of the Kolmogorov-Paley-Zygmund check.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KpzRow {
    pub q: f64,
    /// `‖Σ a_n X_n‖_{L^q} / (√q ‖a‖_{ℓ²})`.
    pub ratio: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KpzReport {
    pub family: CoefficientDistribution,
    pub l2: f64,
    pub samples: usize,
    pub rows: Vec<KpzRow>,
}

/// Empirical `L^q` moments of the randomized sum `Σ a_n X_n` with the
/// Hermitian pairing `X_{-n} = conj(X_n)`, against the `√q ℓ²` benchmark.
/// Confidence intervals come from a percentile bootstrap over the sample set.
pub fn kpz_check(
    coefficients: &SpectralField,
    family: CoefficientDistribution,
    qs: &[f64],
    samples: usize,
    seed: u64,
    bootstrap_resamples: usize,
) -> Result<KpzReport> {
    if let Some(&q) = qs.iter().find(|q| **q < 1.0 || q.is_infinite() || q.is_nan()) {
        return Err(Error::InvalidArgument(format!("moment exponent q must be finite and >= 1, got {q}")));
    }
    if qs.is_empty() {
        return Err(Error::InvalidArgument("kpz check needs at least one exponent".into()));
    }
    if samples < 10_000 {
        return Err(Error::InvalidArgument(format!(
            "kpz moments need at least 10^4 samples for a usable bootstrap, got {samples}"
        )));
    }
    let grid = *coefficients.grid();
    let l2_sq: f64 = coefficients.coeffs().iter().map(|c| c.norm_sqr()).sum();
    if l2_sq == 0.0 {
        return Err(Error::InvalidArgument("kpz check needs a nonzero coefficient sequence".into()));
    }
    let l2 = l2_sq.sqrt();

    // one keyed stream per (sample, mode): scheduling-independent
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let entries: Vec<(usize, [i64; 3], Complex64)> = grid
        .modes()
        .filter(|(_, m)| *m == [0, 0, 0] || canonical_half_space(*m))
        .map(|(i, m)| (i, m, coefficients.coeffs()[i]))
        .collect();
    let sums: Vec<f64> = (0..samples as u64)
        .into_par_iter()
        .map(|sample| {
            let mut s = 0.0f64;
            for &(idx, mode, a) in &entries {
                if a == Complex64::ZERO {
                    continue;
                }
                let mut rng = stream_rng(seed, sample, mode, 2);
                if mode == [0, 0, 0] {
                    s += a.re * family.draw(&mut rng);
                } else {
                    let x = Complex64::new(
                        family.draw(&mut rng) * inv_sqrt2,
                        family.draw(&mut rng) * inv_sqrt2,
                    );
                    s += 2.0 * (a * x).re;
                }
                let _ = idx;
            }
            s.abs()
        })
        .collect();

    let ratio_of = |indices: Option<&[u32]>, q: f64| -> f64 {
        let mean = match indices {
            None => sums.iter().map(|s| s.powf(q)).sum::<f64>() / samples as f64,
            Some(ix) => ix.iter().map(|&i| sums[i as usize].powf(q)).sum::<f64>() / ix.len() as f64,
        };
        mean.powf(1.0 / q) / (q.sqrt() * l2)
    };

    let mut boot_rng = stream_rng(seed, u64::MAX, [0, 0, 0], 4);
    let mut boot: Vec<Vec<f64>> = vec![Vec::with_capacity(bootstrap_resamples); qs.len()];
    let mut indices = vec![0u32; samples];
    for _ in 0..bootstrap_resamples {
        for ix in indices.iter_mut() {
            *ix = (rand::Rng::gen_range(&mut boot_rng, 0..samples)) as u32;
        }
        for (qi, &q) in qs.iter().enumerate() {
            boot[qi].push(ratio_of(Some(&indices), q));
        }
    }

    let rows = qs
        .iter()
        .enumerate()
        .map(|(qi, &q)| {
            let ratio = ratio_of(None, q);
            let (ci_low, ci_high) = if bootstrap_resamples >= 20 {
                let mut b = boot[qi].clone();
                b.sort_by(|x, y| x.partial_cmp(y).unwrap());
                let lo = ((0.025 * b.len() as f64).floor() as usize).min(b.len() - 1);
                let hi = ((0.975 * b.len() as f64).ceil() as usize).clamp(1, b.len()) - 1;
                (b[lo], b[hi])
            } else {
                (ratio, ratio)
            };
            KpzRow { q, ratio, ci_low, ci_high }
        })
        .collect();
    Ok(KpzReport { family, l2, samples, rows })
}

/// Gagliardo-Nirenberg interpolation `‖u‖_{W^{s,p}} ≲ ‖u‖^{1-α}_{W^{t,p0}}
/// ‖u‖^α_{L^{p1}}`, with `α` solved from the scaling relation
/// `-s/d + 1/p = (1-α)(1/p0 - t/d) + α/p1`.
pub fn gn_check(
    corpus: &[SpectralField],
    s: f64,
    t: f64,
    p: f64,
    p0: f64,
    p1: f64,
    corpus_seed: u64,
) -> Result<InequalityReport> {
    let grid = *first_grid(corpus)?;
    let d = grid.dim() as f64;
    let lhs_scale = -s / d + 1.0 / p;
    let a_term = 1.0 / p0 - t / d;
    let b_term = 1.0 / p1;
    if (b_term - a_term).abs() < 1e-14 {
        return Err(Error::InvalidArgument(
            "scaling relation is degenerate: both sides carry the same dimension".into(),
        ));
    }
    let alpha = (lhs_scale - a_term) / (b_term - a_term);
    if !(alpha > 0.0 && alpha <= 1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "interpolation weight α = {alpha} falls outside (0, 1]"
        )));
    }
    if s > (1.0 - alpha) * t + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "smoothness budget violated: s = {s} > (1-α)t = {}",
            (1.0 - alpha) * t
        )));
    }
    let ratios = collect_ratios(corpus, |u| {
        let lhs = lp::sobolev_norm(u, s, p)?;
        let rhs = lp::sobolev_norm(u, t, p0)?.powf(1.0 - alpha) * u.lebesgue_norm(p1)?.powf(alpha);
        Ok(finite_ratio(lhs, rhs))
    })?;
    InequalityReport::from_ratios(
        "gagliardo_nirenberg",
        json!({"s": s, "t": t, "p": p, "p0": p0, "p1": p1, "alpha": alpha, "d": d}),
        &ratios,
        corpus_seed,
        grid,
    )
}

/// Chain rule `‖|u|^{p-1}u‖_{B^s_{q,r}} ≲ ‖u‖_{B^s_{q1,r}} ‖|u|^{p-1}‖_{L^{q2}}`,
/// nonhomogeneous and homogeneous variants in one pass.
pub fn chain_rule_check(
    corpus: &[SpectralField],
    s: f64,
    p_exponent: f64,
    q: f64,
    q1: f64,
    q2: f64,
    r: f64,
    corpus_seed: u64,
) -> Result<Vec<InequalityReport>> {
    let grid = *first_grid(corpus)?;
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidArgument(format!("chain rule needs s in (0,1), got {s}")));
    }
    if !(p_exponent > 1.0) {
        return Err(Error::InvalidArgument(format!("nonlinearity power must exceed 1, got {p_exponent}")));
    }
    let inv = |e: f64| if e.is_infinite() { 0.0 } else { 1.0 / e };
    if (inv(q) - inv(q1) - inv(q2)).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "Hölder mismatch: 1/{q} != 1/{q1} + 1/{q2}"
        )));
    }
    let pm1 = p_exponent - 1.0;
    let pairs = collect_pairs(corpus, |u| {
        let fu = u.pointwise_power(p_exponent)?;
        // ‖|u|^{p-1}‖_{L^{q2}} = ‖u‖^{p-1}_{L^{(p-1) q2}}
        let factor = if q2.is_infinite() {
            u.lebesgue_norm(f64::INFINITY)?.powf(pm1)
        } else {
            u.lebesgue_norm(pm1 * q2)?.powf(pm1)
        };
        let nh = finite_ratio(
            lp::besov_norm(&fu, &NormSpec::new(s, q, r))?,
            lp::besov_norm(u, &NormSpec::new(s, q1, r))? * factor,
        );
        let h = finite_ratio(
            lp::besov_norm(&fu, &NormSpec::homogeneous(s, q, r))?,
            lp::besov_norm(u, &NormSpec::homogeneous(s, q1, r))? * factor,
        );
        Ok(Some((nh, h)))
    })?;
    let params = json!({"s": s, "p": p_exponent, "q": q, "q1": q1, "q2": q2, "r": r});
    let both: Vec<(Option<f64>, Option<f64>)> = pairs.into_iter().flatten().collect();
    let nh: Vec<f64> = both.iter().filter_map(|(a, _)| *a).collect();
    let h: Vec<f64> = both.iter().filter_map(|(_, b)| *b).collect();
    Ok(vec![
        InequalityReport::from_ratios("chain_rule", params.clone(), &nh, corpus_seed, grid)?,
        InequalityReport::from_ratios("chain_rule_homogeneous", params, &h, corpus_seed, grid)?,
    ])
}

/// Tame product estimate
/// `‖fg‖_{Ḃ^s_{p,r}} ≲ ‖f‖_{Ḃ^s_{p1,r}} ‖g‖_{L^{p1'}} + ‖f‖_{L^{p2}} ‖g‖_{Ḃ^s_{p2',r}}`
/// with `p1', p2'` the Hölder complements of `p1, p2` relative to `p`.
/// Consecutive corpus entries are paired as `(f, g)`.
pub fn tame_check(
    corpus: &[SpectralField],
    s: f64,
    p: f64,
    r: f64,
    p1: f64,
    p2: f64,
    corpus_seed: u64,
) -> Result<InequalityReport> {
    let grid = *first_grid(corpus)?;
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("tame estimate needs s > 0, got {s}")));
    }
    let p1c = holder_complement(p, p1)?;
    let p2c = holder_complement(p, p2)?;
    let pairs: Vec<(&SpectralField, &SpectralField)> =
        corpus.chunks_exact(2).map(|c| (&c[0], &c[1])).collect();
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("tame check needs at least two corpus fields".into()));
    }
    let ratios: Vec<Option<f64>> = pairs
        .par_iter()
        .map(|(f, g)| -> Result<Option<f64>> {
            let prod = pointwise_product(f, g)?;
            let lhs = lp::besov_norm(&prod, &NormSpec::homogeneous(s, p, r))?;
            let rhs = lp::besov_norm(f, &NormSpec::homogeneous(s, p1, r))? * g.lebesgue_norm(p1c)?
                + f.lebesgue_norm(p2)? * lp::besov_norm(g, &NormSpec::homogeneous(s, p2c, r))?;
            Ok(finite_ratio(lhs, rhs))
        })
        .collect::<Result<_>>()?;
    let ratios: Vec<f64> = ratios.into_iter().flatten().collect();
    InequalityReport::from_ratios(
        "tame_product",
        json!({"s": s, "p": p, "r": r, "p1": p1, "p1_conj": p1c, "p2": p2, "p2_conj": p2c}),
        &ratios,
        corpus_seed,
        grid,
    )
}

/// Function space selector for embedding checks.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(tag = "space", rename_all = "snake_case")]
pub enum SpaceSpec {
    Besov { s: f64, p: f64, r: f64 },
    Sobolev { s: f64, p: f64 },
}

impl SpaceSpec {
    fn smoothness(&self) -> f64 {
        match *self {
            SpaceSpec::Besov { s, .. } | SpaceSpec::Sobolev { s, .. } => s,
        }
    }

    fn integrability(&self) -> f64 {
        match *self {
            SpaceSpec::Besov { p, .. } | SpaceSpec::Sobolev { p, .. } => p,
        }
    }

    fn norm(&self, u: &SpectralField) -> Result<f64> {
        match *self {
            SpaceSpec::Besov { s, p, r } => lp::besov_norm(u, &NormSpec::new(s, p, r)),
            SpaceSpec::Sobolev { s, p } => lp::sobolev_norm(u, s, p),
        }
    }

    fn label(&self) -> String {
        match *self {
            SpaceSpec::Besov { s, p, r } => format!("B[{s},{p},{r}]"),
            SpaceSpec::Sobolev { s, p } => format!("W[{s},{p}]"),
        }
    }
}

/// `‖u‖_target ≲ ‖u‖_source` after validating the embedding conditions
/// (monotonicity in the summation index, the `s - d/p` scaling ladder, and
/// the Besov/Sobolev bridges at matching indices).
pub fn embedding_check(
    corpus: &[SpectralField],
    source: SpaceSpec,
    target: SpaceSpec,
    corpus_seed: u64,
) -> Result<InequalityReport> {
    let grid = *first_grid(corpus)?;
    let d = grid.dim() as f64;
    let tol = 1e-12;
    let (ss, st) = (source.smoothness(), target.smoothness());
    let (ps, pt) = (source.integrability(), target.integrability());
    let scaling_ok = ps <= pt + tol && ss - d / ps >= st - d / pt - tol && ss >= st - tol;
    let admissible = match (source, target) {
        (SpaceSpec::Besov { r: rs, .. }, SpaceSpec::Besov { r: rt, .. }) => {
            scaling_ok && (ss > st + tol || rs <= rt + tol)
        }
        (SpaceSpec::Besov { r: rs, .. }, SpaceSpec::Sobolev { .. }) => {
            (ps - pt).abs() <= tol && (ss > st + tol || ((ss - st).abs() <= tol && rs <= 1.0 + tol))
        }
        (SpaceSpec::Sobolev { .. }, SpaceSpec::Besov { r: rt, .. }) => {
            (ps - pt).abs() <= tol && (ss > st + tol || ((ss - st).abs() <= tol && rt.is_infinite()))
        }
        (SpaceSpec::Sobolev { .. }, SpaceSpec::Sobolev { .. }) => {
            (ps - pt).abs() <= tol && ss >= st - tol
        }
    };
    if !admissible {
        return Err(Error::InvalidArgument(format!(
            "no embedding from {source:?} into {target:?} under the validated conditions"
        )));
    }
    let ratios = collect_ratios(corpus, |u| {
        Ok(finite_ratio(target.norm(u)?, source.norm(u)?))
    })?;
    InequalityReport::from_ratios(
        &format!("embedding {} -> {}", source.label(), target.label()),
        json!({"source": source, "target": target, "d": d}),
        &ratios,
        corpus_seed,
        grid,
    )
}

/// Bernstein inequalities on dyadic blocks: the `L^p -> L^q` gain
/// `2^{jd(1/p-1/q)}` over all blocks, and two-sided derivative comparability
/// `‖|∇|^k Δ_j u‖_p ~ 2^{jk} ‖Δ_j u‖_p` on the annulus blocks `j >= 1`.
/// Returns the three reports (gain, derivative upper, derivative lower; the
/// lower report stores the inverse ratio so that larger still means worse).
pub fn bernstein_check(
    corpus: &[SpectralField],
    p: f64,
    q: f64,
    k: u32,
    corpus_seed: u64,
) -> Result<Vec<InequalityReport>> {
    let grid = *first_grid(corpus)?;
    if !(p > 1.0) || q < p || !q.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Bernstein exponents need 1 < p <= q < inf, got p={p}, q={q}"
        )));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("derivative order k must be at least 1".into()));
    }
    let d = grid.dim() as f64;
    let j_top = grid.dyadic_levels();
    let grad = MultiplierSymbol::gradient_magnitude(k as f64);
    let per_field: Vec<(Vec<f64>, Vec<f64>)> = corpus
        .par_iter()
        .map(|u| -> Result<(Vec<f64>, Vec<f64>)> {
            let mut gain = Vec::new();
            let mut deriv = Vec::new();
            for j in 0..=j_top {
                let b = lp::delta(u, j);
                let np = b.lebesgue_norm(p)?;
                if np < 1e-290 {
                    continue;
                }
                let factor = 2f64.powf(j as f64 * d * (1.0 / p - 1.0 / q));
                gain.push(b.lebesgue_norm(q)? / (factor * np));
                if j >= 1 {
                    let db = b.apply_multiplier(&grad)?;
                    deriv.push(db.lebesgue_norm(p)? / (2f64.powf((j * k as usize) as f64) * np));
                }
            }
            Ok((gain, deriv))
        })
        .collect::<Result<_>>()?;
    let mut gains = Vec::new();
    let mut derivs = Vec::new();
    for (g, dr) in per_field {
        gains.extend(g);
        derivs.extend(dr);
    }
    let inv_derivs: Vec<f64> = derivs.iter().map(|r| 1.0 / r).collect();
    let params = json!({"p": p, "q": q, "k": k, "d": d});
    Ok(vec![
        InequalityReport::from_ratios("bernstein_lp_lq", params.clone(), &gains, corpus_seed, grid)?,
        InequalityReport::from_ratios("bernstein_derivative_upper", params.clone(), &derivs, corpus_seed, grid)?,
        InequalityReport::from_ratios("bernstein_derivative_lower", params, &inv_derivs, corpus_seed, grid)?,
    ])
}

/// Square function comparability `‖(Σ_j |Δ_j u|²)^{1/2}‖_p ~ ‖u‖_p`.
pub fn square_function_check(
    corpus: &[SpectralField],
    p: f64,
    corpus_seed: u64,
) -> Result<InequalityReport> {
    let grid = *first_grid(corpus)?;
    let ratios = collect_ratios(corpus, |u| {
        Ok(finite_ratio(lp::square_function_norm(u, p)?, u.lebesgue_norm(p)?))
    })?;
    InequalityReport::from_ratios("square_function", json!({"p": p}), &ratios, corpus_seed, grid)
}

/// One ensemble member of a remainder-energy study: a sample's traces over
/// the cutoff ladder plus whether any run tripped the blowup guard.
#[derive(Debug)]
pub struct EnsembleEntry {
    pub sample_index: u64,
    pub traces: Vec<EnergyTrace>,
    pub aborted: bool,
}

/// Summary of `sup_n sup_t E_n` across an ensemble: per-sample sups and the
/// empirical `(1-η)`-quantile, the computable face of the a priori bound.
#[derive(Debug, Serialize)]
pub struct AprioriReport {
    pub t_end: f64,
    pub eta: f64,
    pub samples: usize,
    pub aborted_runs: usize,
    pub per_sample_sup: Vec<f64>,
    pub quantile: f64,
}

pub fn apriori_bound_report(entries: &[EnsembleEntry], t_end: f64, eta: f64) -> Result<AprioriReport> {
    if entries.is_empty() {
        return Err(Error::InvalidArgument("a priori report needs at least one sample".into()));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("quantile level η must lie in (0,1), got {eta}")));
    }
    let per_sample_sup: Vec<f64> = entries
        .iter()
        .map(|e| e.traces.iter().map(EnergyTrace::max_total).fold(0.0f64, f64::max))
        .collect();
    let aborted_runs = entries.iter().filter(|e| e.aborted).count();
    let mut sorted = per_sample_sup.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = (((1.0 - eta) * entries.len() as f64).ceil() as usize).clamp(1, entries.len());
    let quantile = sorted[k - 1];
    Ok(AprioriReport {
        t_end,
        eta,
        samples: entries.len(),
        aborted_runs,
        per_sample_sup,
        quantile,
    })
}

/// The default battery: one desk-scale instance of every corpus check on the
/// standard corpus.  The Gagliardo-Nirenberg instance depends on the
/// dimension because the admissibility relation does.
pub fn standard_battery(grid: TorusGrid, seed: u64, power_law_count: usize) -> Result<Vec<InequalityReport>> {
    let corpus = crate::corpus::standard_corpus(grid, seed, power_law_count);
    let mut out = Vec::new();
    out.extend(bernstein_check(&corpus, 2.0, 4.0, 1, seed)?);
    out.push(embedding_check(
        &corpus,
        SpaceSpec::Besov { s: 0.5, p: 2.0, r: 1.0 },
        SpaceSpec::Sobolev { s: 0.5, p: 2.0 },
        seed,
    )?);
    out.push(embedding_check(
        &corpus,
        SpaceSpec::Sobolev { s: 0.5, p: 2.0 },
        SpaceSpec::Besov { s: 0.5, p: 2.0, r: f64::INFINITY },
        seed,
    )?);
    out.push(embedding_check(
        &corpus,
        SpaceSpec::Besov { s: 0.6, p: 2.0, r: 2.0 },
        SpaceSpec::Besov { s: 0.1, p: 2.0, r: f64::INFINITY },
        seed,
    )?);
    // each target exponent p is placed so the interpolation weight lands at
    // 2/3 (d = 1) or 1/2 (d = 2, 3) with s <= (1 - alpha) t
    let (s, t, p, p0, p1) = match grid.dim() {
        1 => (1.0 / 3.0, 1.0, 4.0, 2.0, 8.0),
        2 => (0.5, 1.5, 16.0 / 3.0, 2.0, 8.0),
        _ => (0.5, 1.5, 48.0 / 11.0, 2.0, 8.0),
    };
    out.push(gn_check(&corpus, s, t, p, p0, p1, seed)?);
    out.extend(chain_rule_check(&corpus, 0.5, 3.0, 2.0, 4.0, 4.0, 2.0, seed)?);
    out.push(tame_check(&corpus, 0.75, 2.0, 2.0, 4.0, 4.0, seed)?);
    out.push(square_function_check(&corpus, 4.0, seed)?);
    Ok(out)
}

fn first_grid(corpus: &[SpectralField]) -> Result<&TorusGrid> {
    let first = corpus
        .first()
        .ok_or_else(|| Error::InvalidArgument("corpus must not be empty".into()))?;
    for f in corpus {
        if f.grid() != first.grid() {
            return Err(Error::GridMismatch("corpus fields must share one grid".into()));
        }
    }
    Ok(first.grid())
}

/// `lhs / rhs`, or `None` when the entry is degenerate (`rhs = 0` with
/// `lhs = 0`, the zero field).  A nonzero `lhs` over a zero `rhs` maps to
/// infinity and fails the finiteness gate downstream.
fn finite_ratio(lhs: f64, rhs: f64) -> Option<f64> {
    if rhs == 0.0 {
        if lhs == 0.0 {
            None
        } else {
            Some(f64::INFINITY)
        }
    } else {
        Some(lhs / rhs)
    }
}

fn collect_ratios(
    corpus: &[SpectralField],
    f: impl Fn(&SpectralField) -> Result<Option<f64>> + Sync,
) -> Result<Vec<f64>> {
    let ratios: Vec<Option<f64>> = corpus.par_iter().map(&f).collect::<Result<_>>()?;
    Ok(ratios.into_iter().flatten().collect())
}

fn collect_pairs<T: Send>(
    corpus: &[SpectralField],
    f: impl Fn(&SpectralField) -> Result<Option<T>> + Sync,
) -> Result<Vec<Option<T>>> {
    corpus.par_iter().map(&f).collect()
}

fn holder_complement(p: f64, p_part: f64) -> Result<f64> {
    let inv = 1.0 / p - 1.0 / p_part;
    if inv < -1e-14 {
        return Err(Error::InvalidArgument(format!(
            "Hölder complement of {p_part} relative to {p} is negative"
        )));
    }
    if inv.abs() < 1e-14 {
        Ok(f64::INFINITY)
    } else {
        Ok(1.0 / inv)
    }
}

/// Band-truncated pointwise product on the oversampled grid.
fn pointwise_product(f: &SpectralField, g: &SpectralField) -> Result<SpectralField> {
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch("product needs both factors on one grid".into()));
    }
    let fs = f.synthesize();
    let gs = g.synthesize();
    let prod: Vec<f64> = fs.iter().zip(&gs).map(|(a, b)| a * b).collect();
    SpectralField::analyze(*f.grid(), &prod)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::standard_corpus;
    use crate::randomization::CoefficientDistribution::{Gaussian, Rademacher};

    fn grid() -> TorusGrid {
        TorusGrid::new(1, 32, 2).unwrap()
    }

    fn small_corpus() -> Vec<SpectralField> {
        standard_corpus(grid(), 7, 12)
    }

    #[test]
    fn kpz_single_coefficient_gaussian_q2() {
        // a = (1) at the zero mode: S = X_0, ratio at q=2 is exactly 1/√2 in
        // expectation
        let g = grid();
        let a = SpectralField::harmonic(g, [0, 0, 0], Complex64::new(1.0, 0.0)).unwrap();
        let rep = kpz_check(&a, Gaussian, &[2.0], 20_000, 3, 100).unwrap();
        let want = std::f64::consts::FRAC_1_SQRT_2;
        let row = rep.rows[0];
        assert!(row.ci_low <= want && want <= row.ci_high, "{row:?}");
        assert!((row.ratio - want).abs() < 0.02);
    }

    #[test]
    fn kpz_rademacher_single_mode_is_deterministic() {
        // |X| = 1 a.s. on one paired mode: |S| = 2|a||cos θ|-like but with two
        // scalar signs |S| = |a|·|±1 ± 1|/√2 ∈ {0, √2·|a|}: moments still finite
        // and ratio bounded by 1 for every q
        let g = grid();
        let a = SpectralField::harmonic(g, [3, 0, 0], Complex64::new(0.7, 0.0)).unwrap();
        let rep = kpz_check(&a, Rademacher, &[2.0, 4.0, 6.0], 20_000, 5, 50).unwrap();
        for row in &rep.rows {
            assert!(row.ratio.is_finite() && row.ratio <= 1.0, "{row:?}");
        }
    }

    #[test]
    fn kpz_ratio_bounded_for_gaussian_family() {
        let g = grid();
        let a = crate::corpus::power_law_field(g, 1.1, 1.0, 9);
        let qs: Vec<f64> = (1..=10).map(|k| 2.0 * k as f64).collect();
        let rep = kpz_check(&a, Gaussian, &qs, 20_000, 11, 50).unwrap();
        for row in &rep.rows {
            assert!(row.ratio <= 1.0, "gaussian moments stay below √q: {row:?}");
        }
        // q = 2 pins the variance isometry
        assert!((rep.rows[0].ratio - std::f64::consts::FRAC_1_SQRT_2).abs() < 0.02);
    }

    #[test]
    fn kpz_rejects_bad_input() {
        let g = grid();
        let a = SpectralField::harmonic(g, [1, 0, 0], Complex64::new(0.5, 0.0)).unwrap();
        assert!(kpz_check(&a, Gaussian, &[0.5], 20_000, 1, 10).is_err(), "q < 1");
        assert!(kpz_check(&a, Gaussian, &[2.0], 100, 1, 10).is_err(), "M too small");
        let z = SpectralField::zero(g);
        assert!(kpz_check(&z, Gaussian, &[2.0], 20_000, 1, 10).is_err(), "zero sequence");
    }

    #[test]
    fn gn_single_mode_amplitude_invariant() {
        let g = grid();
        let e5 = SpectralField::harmonic(g, [5, 0, 0], Complex64::new(0.5, 0.0)).unwrap();
        let corpus = vec![e5.clone()];
        // the d=1 instance of the paper's usage at p=7: s=1/3... use s=t(1-α)
        // with α=2/3: s = 1/3, t = 1, p = 4, p0 = 2, p1 = 8
        let r1 = gn_check(&corpus, 1.0 / 3.0, 1.0, 4.0, 2.0, 8.0, 0).unwrap();
        let scaled = vec![e5.scale(1024.0)];
        let r2 = gn_check(&scaled, 1.0 / 3.0, 1.0, 4.0, 2.0, 8.0, 0).unwrap();
        assert!(r1.pass);
        assert!((r1.max_ratio - r2.max_ratio).abs() < 1e-10 * r1.max_ratio);
    }

    #[test]
    fn gn_rejects_inadmissible_exponents() {
        let corpus = small_corpus();
        // s too large for the interpolation budget: s > (1-α)t
        assert!(gn_check(&corpus, 0.9, 1.0, 4.0, 2.0, 8.0, 7).is_err());
    }

    #[test]
    fn gn_corpus_ratios_bounded() {
        let corpus = small_corpus();
        let rep = gn_check(&corpus, 1.0 / 3.0, 1.0, 4.0, 2.0, 8.0, 7).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert!(rep.max_ratio.is_finite() && rep.max_ratio > 0.0);
    }

    #[test]
    fn chain_rule_constant_field_is_finite_and_homogeneous() {
        let g = grid();
        let c1 = SpectralField::harmonic(g, [0, 0, 0], Complex64::new(1.3, 0.0)).unwrap();
        let c2 = SpectralField::harmonic(g, [2, 0, 0], Complex64::new(0.4, 0.0)).unwrap();
        let base = vec![c1.add(&c2).unwrap()];
        let scaled: Vec<SpectralField> = base.iter().map(|f| f.scale(64.0)).collect();
        let reps1 = chain_rule_check(&base, 0.5, 3.0, 1.5, 3.0, 3.0, 2.0, 0).unwrap();
        let reps2 = chain_rule_check(&scaled, 0.5, 3.0, 1.5, 3.0, 3.0, 2.0, 0).unwrap();
        for (a, b) in reps1.iter().zip(&reps2) {
            assert!(a.pass);
            // both sides are homogeneous of degree p, the ratio cannot move
            assert!((a.max_ratio - b.max_ratio).abs() < 1e-10 * a.max_ratio, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn chain_rule_rejects_exponent_mismatch() {
        let corpus = small_corpus();
        assert!(chain_rule_check(&corpus, 0.5, 3.0, 2.0, 3.0, 4.0, 2.0, 7).is_err());
        assert!(chain_rule_check(&corpus, 1.5, 3.0, 1.5, 3.0, 3.0, 2.0, 7).is_err(), "s >= 1");
    }

    #[test]
    fn tame_zero_and_corpus() {
        let g = grid();
        let corpus = small_corpus();
        let rep = tame_check(&corpus, 0.5, 2.0, 2.0, 4.0, 4.0, 7).unwrap();
        assert!(rep.pass, "{rep:?}");
        // zero first factor: product is zero, entry degenerates and is skipped
        let z = SpectralField::zero(g);
        let two = vec![z.clone(), corpus[0].clone()];
        assert!(tame_check(&two, 0.5, 2.0, 2.0, 4.0, 4.0, 7).is_err(), "all entries degenerate");
    }

    #[test]
    fn embedding_chain_besov_sobolev_besov() {
        let corpus = small_corpus();
        let b1 = SpaceSpec::Besov { s: 0.7, p: 4.0, r: 1.0 };
        let w = SpaceSpec::Sobolev { s: 0.7, p: 4.0 };
        let binf = SpaceSpec::Besov { s: 0.7, p: 4.0, r: f64::INFINITY };
        let r1 = embedding_check(&corpus, b1, w, 7).unwrap();
        let r2 = embedding_check(&corpus, w, binf, 7).unwrap();
        assert!(r1.pass && r2.pass);
        // the reverse directions are inadmissible
        assert!(embedding_check(&corpus, binf, w, 7).is_err());
        assert!(embedding_check(&corpus, w, b1, 7).is_err());
    }

    #[test]
    fn embedding_scaling_ladder() {
        let corpus = small_corpus();
        // gain of smoothness pays for gain of integrability: B^{1}_{2,2} ↪ B^{1/2}_{4,2}
        // in d=1 needs 1 - 1/2 >= 1/2 - 1/4, true
        let src = SpaceSpec::Besov { s: 1.0, p: 2.0, r: 2.0 };
        let tgt = SpaceSpec::Besov { s: 0.5, p: 4.0, r: 2.0 };
        assert!(embedding_check(&corpus, src, tgt, 7).unwrap().pass);
        // and without enough smoothness the validator refuses
        let bad = SpaceSpec::Besov { s: 0.1, p: 4.0, r: 2.0 };
        assert!(embedding_check(&corpus, bad, tgt, 7).is_err());
    }

    #[test]
    fn bernstein_reports() {
        let corpus = small_corpus();
        let reps = bernstein_check(&corpus, 2.0, 4.0, 1, 7).unwrap();
        assert_eq!(reps.len(), 3);
        for rep in &reps {
            assert!(rep.pass, "{rep:?}");
            assert!(rep.max_ratio.is_finite());
        }
        // derivative comparability: upper and lower within a modest constant
        assert!(reps[1].max_ratio < 4.0, "upper {:?}", reps[1].max_ratio);
        assert!(reps[2].max_ratio < 4.0, "lower {:?}", reps[2].max_ratio);
        assert!(bernstein_check(&corpus, 2.0, f64::INFINITY, 1, 7).is_err());
    }

    #[test]
    fn square_function_two_sided() {
        let corpus = small_corpus();
        for p in [2.0, 4.0, 6.0] {
            let rep = square_function_check(&corpus, p, 7).unwrap();
            assert!(rep.pass);
            let min = rep.params["min_ratio"].as_f64().unwrap();
            assert!(min > 0.2 && rep.max_ratio < 5.0, "p={p}: [{min}, {}]", rep.max_ratio);
        }
    }

    #[test]
    fn apriori_report_quantile() {
        let mk = |sup: f64| {
            let mut t = EnergyTrace::new("x");
            t.push(0.0, crate::galerkin::EnergyBreakdown { kinetic: 0.0, gradient: 0.0, potential: 0.0 }, 0.0, 0.0);
            t.push(1.0, crate::galerkin::EnergyBreakdown { kinetic: sup, gradient: 0.0, potential: 0.0 }, 0.0, 0.0);
            t
        };
        let entries: Vec<EnsembleEntry> = (0..10)
            .map(|i| EnsembleEntry {
                sample_index: i as u64,
                traces: vec![mk(i as f64), mk(0.5 * i as f64)],
                aborted: false,
            })
            .collect();
        let rep = apriori_bound_report(&entries, 1.0, 0.1).unwrap();
        assert_eq!(rep.samples, 10);
        assert_eq!(rep.aborted_runs, 0);
        // per-sample sup takes the worse cutoff
        assert_eq!(rep.per_sample_sup[4], 4.0);
        // (1-0.1) quantile of {0,...,9} is the 9th order statistic
        assert_eq!(rep.quantile, 8.0);
        assert!(apriori_bound_report(&entries, 1.0, 1.5).is_err());
        // zero base: all sups zero
        let zero_entries: Vec<EnsembleEntry> = (0..3)
            .map(|i| EnsembleEntry { sample_index: i, traces: vec![mk(0.0)], aborted: false })
            .collect();
        assert_eq!(apriori_bound_report(&zero_entries, 1.0, 0.5).unwrap().quantile, 0.0);
    }

    #[test]
    fn standard_battery_passes_on_small_grids() {
        for grid in [TorusGrid::new(1, 64, 2).unwrap(), TorusGrid::new(2, 16, 2).unwrap()] {
            let reports = standard_battery(grid, 11, 6).unwrap();
            assert_eq!(reports.len(), 11);
            for r in &reports {
                assert!(r.pass, "{} failed: max_ratio = {}", r.name, r.max_ratio);
                assert!(r.max_ratio.is_finite());
            }
            let mut names: Vec<&str> = reports.iter().map(|r| r.name.as_str()).collect();
            names.sort_unstable();
            names.dedup();
            assert_eq!(names.len(), reports.len(), "report names must be distinct");
        }
    }
}
