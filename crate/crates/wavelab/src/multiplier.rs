//! Fourier multipliers `u = sum c_n e_n  ->  sum m(n) c_n e_n`.

use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

use crate::grid::{Mode, TorusGrid};

/// A labelled symbol `n -> m(n)`.
///
/// Composition of multipliers is pointwise product of symbols, which
/// [`MultiplierSymbol::product`] implements literally.  Symbols used for real
/// fields must be even in `n`; every constructor here is radial, hence even.
#[derive(Clone)]
pub struct MultiplierSymbol {
    label: String,
    eval: Arc<dyn Fn(Mode) -> Complex64 + Send + Sync>,
}

impl fmt::Debug for MultiplierSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiplierSymbol").field("label", &self.label).finish()
    }
}

impl MultiplierSymbol {
    pub fn new(
        label: impl Into<String>,
        eval: impl Fn(Mode) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self { label: label.into(), eval: Arc::new(eval) }
    }

    /// Real radial symbol `m(|n|)`.
    pub fn radial(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(label, move |mode| Complex64::new(f(TorusGrid::norm(mode)), 0.0))
    }

    pub fn identity() -> Self {
        Self::radial("id", |_| 1.0)
    }

    /// `|n|^power`.  `|0|^0` is taken as 1; a negative power leaves the
    /// origin singular and the application will reject it.
    pub fn gradient_magnitude(power: f64) -> Self {
        Self::radial(format!("|grad|^{power}"), move |r| {
            if r == 0.0 && power == 0.0 {
                1.0
            } else {
                r.powf(power)
            }
        })
    }

    /// Japanese bracket `<n>^s = (1 + |n|^2)^{s/2}`.
    pub fn bessel_potential(s: f64) -> Self {
        Self::radial(format!("<grad>^{s}"), move |r| (1.0 + r * r).powf(s / 2.0))
    }

    /// `cos(t|n|)`.
    pub fn wave_cosine(t: f64) -> Self {
        Self::radial(format!("cos({t}|grad|)"), move |r| (t * r).cos())
    }

    /// `sin(t|n|)/|n|` with the limit value `t` at `n = 0`.
    pub fn wave_sinc(t: f64) -> Self {
        Self::radial(format!("sin({t}|grad|)/|grad|"), move |r| {
            if r == 0.0 {
                t
            } else {
                (t * r).sin() / r
            }
        })
    }

    /// Pointwise product of two symbols; this is operator composition.
    pub fn product(a: &Self, b: &Self) -> Self {
        let fa = a.eval.clone();
        let fb = b.eval.clone();
        Self::new(format!("({})*({})", a.label, b.label), move |mode| fa(mode) * fb(mode))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, mode: Mode) -> Complex64 {
        (self.eval)(mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sinc_limit_at_origin() {
        let m = MultiplierSymbol::wave_sinc(0.75);
        assert_eq!(m.eval([0, 0, 0]), Complex64::new(0.75, 0.0));
        let v = m.eval([2, 0, 0]).re;
        assert!((v - (0.75f64 * 2.0).sin() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn product_is_pointwise() {
        let a = MultiplierSymbol::bessel_potential(1.0);
        let b = MultiplierSymbol::bessel_potential(-1.0);
        let p = MultiplierSymbol::product(&a, &b);
        for mode in [[0, 0, 0], [3, -1, 0], [-5, 2, 1]] {
            assert!((p.eval(mode).re - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn negative_homogeneous_power_is_singular_at_origin() {
        let m = MultiplierSymbol::gradient_magnitude(-1.0);
        assert!(!m.eval([0, 0, 0]).re.is_finite());
    }
}
