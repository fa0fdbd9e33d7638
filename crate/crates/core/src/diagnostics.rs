//! Grid-based residual checks for the reduced ODE systems.
//!
//! Time derivatives are taken from sampled curves with fourth-order finite
//! differences (five-point central stencil inside, one-sided at the two
//! ends), so truncation error stays well below the 1e-6 residual budget on
//! the default 1001-point grid.

use crate::gaussian::GaussianSolution;
use crate::halfline::HalfLineSolution;
use crate::scenario::QuadraticCost;

/// Fourth-order derivative of uniformly sampled `values` with spacing `h`.
pub fn derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 5, "need at least five samples");
    let f = values;
    let mut d = vec![0.0; n];
    let s = 12.0 * h;
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / s;
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / s;
    for i in 2..n - 2 {
        d[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / s;
    }
    d[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / s;
    d[n - 1] = (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) / s;
    d
}

/// Three-point second difference at interior nodes (`n - 2` values).
pub fn second_difference(values: &[f64], h: f64) -> Vec<f64> {
    values.windows(3).map(|w| (w[0] - 2.0 * w[1] + w[2]) / (h * h)).collect()
}

pub fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

fn spacing(times: &[f64]) -> f64 {
    (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64
}

/// Sup-norm residuals of the full-line system, one entry per equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianResiduals {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub k2: f64,
    pub k1: f64,
    pub k0: f64,
    /// `Q' - 2AQ - B`.
    pub mode: f64,
}

impl GaussianResiduals {
    pub fn max(&self) -> f64 {
        [self.a, self.b, self.c, self.k2, self.k1, self.k0, self.mode].into_iter().fold(0.0, f64::max)
    }

    pub fn named(&self) -> [(&'static str, f64); 7] {
        [
            ("A", self.a),
            ("B", self.b),
            ("C", self.c),
            ("K2", self.k2),
            ("K1", self.k1),
            ("K0", self.k0),
            ("Q", self.mode),
        ]
    }
}

/// `None` when the solution has no global path.
pub fn gaussian_residuals(sol: &GaussianSolution) -> Option<GaussianResiduals> {
    let path = sol.path.as_ref()?;
    let (bs, k1s) = (path.b.as_ref()?, path.k1.as_ref()?);
    let cost = &sol.cost;
    let h = spacing(&path.times);
    let d2 = cost.delta * cost.delta;
    let (da, db, dc) = (derivative(&path.a, h), derivative(bs, h), derivative(&path.c, h));
    let (dk2, dk1, dk0) = (derivative(&path.k2, h), derivative(k1s, h), derivative(&path.k0, h));
    let dq = derivative(&sol.mode, h);
    let n = path.len();
    let sup = |f: &dyn Fn(usize) -> f64| (0..n).map(f).fold(0.0_f64, |m, v| m.max(v.abs()));
    Some(GaussianResiduals {
        a: sup(&|i| da[i] + 2.0 * path.a[i] * path.a[i] + cost.a),
        b: sup(&|i| db[i] + 2.0 * path.a[i] * bs[i] + cost.b),
        c: sup(&|i| dc[i] + d2 * path.a[i] + 0.5 * bs[i] * bs[i] + cost.c),
        k2: sup(&|i| dk2[i] + 4.0 * path.a[i] * path.k2[i] - 2.0 * d2 * path.k2[i] * path.k2[i]),
        k1: sup(&|i| {
            dk1[i] + 2.0 * path.a[i] * k1s[i] - 2.0 * d2 * k1s[i] * path.k2[i] + 2.0 * bs[i] * path.k2[i]
        }),
        k0: sup(&|i| {
            dk0[i] + 2.0 * path.a[i] + bs[i] * k1s[i] - 0.5 * d2 * (k1s[i] * k1s[i] + 2.0 * path.k2[i])
        }),
        mode: sup(&|i| dq[i] - 2.0 * sol.mode[i] * path.a[i] - bs[i]),
    })
}

/// `max |Q'' + 2aQ + b|` over interior nodes of a sampled mode curve.
pub fn second_order_mode_residual(cost: &QuadraticCost, times: &[f64], mode: &[f64]) -> f64 {
    let h = spacing(times);
    let q2 = second_difference(mode, h);
    q2.iter().zip(&mode[1..]).map(|(d, q)| (d + 2.0 * cost.a * q + cost.b).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfLineResiduals {
    pub a: f64,
    pub c: f64,
    pub k2: f64,
    pub k0: f64,
    /// `Q' - 2AQ - delta^2 / (2Q)`.
    pub bernoulli: f64,
}

impl HalfLineResiduals {
    pub fn max(&self) -> f64 {
        [self.a, self.c, self.k2, self.k0, self.bernoulli].into_iter().fold(0.0, f64::max)
    }

    pub fn named(&self) -> [(&'static str, f64); 5] {
        [("A", self.a), ("C", self.c), ("K2", self.k2), ("K0", self.k0), ("Q", self.bernoulli)]
    }
}

pub fn halfline_residuals(sol: &HalfLineSolution) -> Option<HalfLineResiduals> {
    let path = sol.path.as_ref()?;
    let cost = &sol.cost;
    let h = spacing(&path.times);
    let d2 = cost.delta * cost.delta;
    let (da, dc) = (derivative(&path.a, h), derivative(&path.c, h));
    let (dk2, dk0) = (derivative(&path.k2, h), derivative(&path.k0, h));
    let dq = derivative(&sol.mode, h);
    let n = path.len();
    let sup = |f: &dyn Fn(usize) -> f64| (0..n).map(f).fold(0.0_f64, |m, v| m.max(v.abs()));
    Some(HalfLineResiduals {
        a: sup(&|i| da[i] + 2.0 * path.a[i] * path.a[i] + cost.a),
        c: sup(&|i| dc[i] + d2 * path.a[i] + cost.c),
        k2: sup(&|i| dk2[i] + 4.0 * path.a[i] * path.k2[i] + d2 * path.k2[i] * path.k2[i]),
        k0: sup(&|i| dk0[i] + 4.0 * path.a[i] + 1.5 * d2 * path.k2[i]),
        bernoulli: sup(&|i| dq[i] - 2.0 * path.a[i] * sol.mode[i] - 0.5 * d2 / sol.mode[i]),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::uniform_grid;

    #[test]
    fn derivative_is_fourth_order() {
        let err = |n: usize| {
            let t = uniform_grid(0.0, 2.0, n);
            let f: Vec<f64> = t.iter().map(|x| (3.0 * x).sin()).collect();
            let d = derivative(&f, t[1] - t[0]);
            t.iter().zip(&d).map(|(x, d)| (d - 3.0 * (3.0 * x).cos()).abs()).fold(0.0, f64::max)
        };
        let ratio = err(101) / err(201);
        assert!(ratio > 12.0, "{ratio}");
    }

    #[test]
    fn polynomial_derivatives_are_exact() {
        let t = uniform_grid(-1.0, 1.0, 9);
        let f: Vec<f64> = t.iter().map(|x| x.powi(4) - 2.0 * x).collect();
        let d = derivative(&f, t[1] - t[0]);
        for (x, d) in t.iter().zip(d) {
            assert!((d - (4.0 * x.powi(3) - 2.0)).abs() < 1e-12);
        }
    }
}
