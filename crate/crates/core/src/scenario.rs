//! Shared scenario data model.
//!
//! A mean-field game instance is a quadratic running reward
//! `g(x) = a x^2 + b x + c`, a diffusion amplitude `delta`, a horizon `T`,
//! quadratic terminal data `K(x) = A_T x^2 + B_T x + C_T`, and an initial
//! density. Fields are public plain data; [`QuadraticCost::new`] and friends
//! validate the invariants for callers that want them enforced.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCost {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub delta: f64,
    pub horizon: f64,
}

impl QuadraticCost {
    pub fn new(a: f64, b: f64, c: f64, delta: f64, horizon: f64) -> Result<Self> {
        let cost = Self { a, b, c, delta, horizon };
        cost.validate()?;
        Ok(cost)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite() && self.c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cost coefficients must be finite (a={}, b={}, c={})",
                self.a, self.b, self.c
            )));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be > 0, got {}", self.delta)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be > 0, got {}", self.horizon)));
        }
        Ok(())
    }

    /// `g(x)`.
    pub fn running(&self, x: f64) -> f64 {
        (self.a * x + self.b) * x + self.c
    }

    pub fn regime(&self) -> Regime {
        classify_regime(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticTerminal {
    pub a_t: f64,
    pub b_t: f64,
    pub c_t: f64,
}

impl QuadraticTerminal {
    pub fn new(a_t: f64, b_t: f64, c_t: f64) -> Result<Self> {
        if !(a_t.is_finite() && b_t.is_finite() && c_t.is_finite()) {
            return Err(Error::InvalidParameter("terminal coefficients must be finite".into()));
        }
        Ok(Self { a_t, b_t, c_t })
    }

    /// `K(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        (self.a_t * x + self.b_t) * x + self.c_t
    }
}

/// Initial density `M exp(-(x - x0)^2 / lambda)` with unit mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianInitial {
    pub x0: f64,
    pub lambda: f64,
    pub norm: f64,
}

impl GaussianInitial {
    pub fn new(x0: f64, lambda: f64) -> Result<Self> {
        if !x0.is_finite() || !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need finite x0 and lambda > 0 (x0={x0}, lambda={lambda})"
            )));
        }
        Ok(Self { x0, lambda, norm: 1.0 / (std::f64::consts::PI * lambda).sqrt() })
    }

    pub fn density(&self, x: f64) -> f64 {
        self.norm * (-(x - self.x0).powi(2) / self.lambda).exp()
    }

    pub fn variance(&self) -> f64 {
        0.5 * self.lambda
    }

    /// `(K2, K1, K0)` of the log-quadratic initial density.
    ///
    /// Expanding `-(x - x0)^2 / lambda` gives `K1 = +2 x0 / lambda`; the
    /// opposite sign would centre the density at `-x0`.
    pub fn log_coefficients(&self) -> [f64; 3] {
        let l = self.lambda;
        [-1.0 / l, 2.0 * self.x0 / l, -self.x0 * self.x0 / l + self.norm.ln()]
    }
}

/// Initial half-line density `kappa x exp(-kappa x^2 / 2)` on `[0, inf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfLineInitial {
    pub kappa: f64,
}

impl HalfLineInitial {
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!("kappa must be > 0, got {kappa}")));
        }
        Ok(Self { kappa })
    }

    /// Normalization constant; equal to `kappa`.
    pub fn norm(&self) -> f64 {
        self.kappa
    }

    pub fn mode(&self) -> f64 {
        self.kappa.sqrt().recip()
    }

    pub fn density(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            self.kappa * x * (-0.5 * self.kappa * x * x).exp()
        }
    }
}

/// Time-sampled Riccati coefficients.
///
/// `b` and `k1` are `None` on the half-line, where the ansatz has no odd terms.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPath {
    pub times: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Option<Vec<f64>>,
    pub c: Vec<f64>,
    pub k2: Vec<f64>,
    pub k1: Option<Vec<f64>>,
    pub k0: Vec<f64>,
}

impl CoefficientPath {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    /// `a < 0`, `k_minus = sqrt(-a/2)`.
    Subcritical { k_minus: f64 },
    Critical,
    /// `a > 0`, `k_plus = sqrt(a/2)`.
    Supercritical { k_plus: f64 },
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Subcritical { .. } => "subcritical",
            Regime::Critical => "critical",
            Regime::Supercritical { .. } => "supercritical",
        }
    }
}

pub fn classify_regime(cost: &QuadraticCost) -> Regime {
    let a = cost.a;
    if a < 0.0 {
        Regime::Subcritical { k_minus: (-0.5 * a).sqrt() }
    } else if a > 0.0 {
        Regime::Supercritical { k_plus: (0.5 * a).sqrt() }
    } else {
        Regime::Critical
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExistenceReport {
    pub regime: Regime,
    pub global: bool,
    pub blowup_time: Option<f64>,
}

impl ExistenceReport {
    pub fn global(regime: Regime) -> Self {
        Self { regime, global: true, blowup_time: None }
    }

    pub fn blowup(regime: Regime, time: f64) -> Self {
        Self { regime, global: false, blowup_time: Some(time) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cost(a: f64) -> QuadraticCost {
        QuadraticCost::new(a, 0.0, 0.0, 0.2, 1.0).unwrap()
    }

    #[test]
    fn regime_examples() {
        assert_eq!(classify_regime(&cost(-2.0)), Regime::Subcritical { k_minus: 1.0 });
        assert_eq!(classify_regime(&cost(0.0)), Regime::Critical);
        assert_eq!(classify_regime(&cost(0.5)), Regime::Supercritical { k_plus: 0.5 });
    }

    #[test]
    fn gaussian_norm_gives_unit_mass() {
        let init = GaussianInitial::new(0.2, 0.5).unwrap();
        assert_eq!(init.norm, 1.0 / (std::f64::consts::PI * 0.5).sqrt());
        let [k2, k1, k0] = init.log_coefficients();
        assert_eq!(k2, -2.0);
        assert!((k1 - 0.8).abs() < 1e-15);
        assert!((-k1 / (2.0 * k2) - 0.2).abs() < 1e-15);
        let mass = (k0 - k1 * k1 / (4.0 * k2)).exp() * (std::f64::consts::PI / -k2).sqrt();
        assert!((mass - 1.0).abs() < 1e-14);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(QuadraticCost::new(0.0, 0.0, 0.0, 0.0, 1.0).is_err());
        assert!(QuadraticCost::new(0.0, 0.0, 0.0, 0.1, -1.0).is_err());
        assert!(QuadraticCost::new(f64::NAN, 0.0, 0.0, 0.1, 1.0).is_err());
        assert!(GaussianInitial::new(0.0, 0.0).is_err());
        assert!(HalfLineInitial::new(-1.0).is_err());
    }

    proptest! {
        #[test]
        fn regime_is_symmetric_in_a(a in 1e-6f64..50.0) {
            let sub = classify_regime(&cost(-a));
            let sup = classify_regime(&cost(a));
            match (sub, sup) {
                (Regime::Subcritical { k_minus }, Regime::Supercritical { k_plus }) => {
                    prop_assert_eq!(k_minus, k_plus);
                    prop_assert!(k_minus > 0.0);
                }
                other => prop_assert!(false, "{:?}", other),
            }
        }
    }
}
