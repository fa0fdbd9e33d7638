//! Half-line reduction for even costs `g = a x^2 + c`.
//!
//! With `Phi = A x^2 + C` and `m = x exp(-K2 x^2 / 2 + K0)` on `[0, inf)`:
//!
//! ```text
//! A'  + 2A^2             = -a
//! C'  + delta^2 A        = -c
//! K2' + 4A K2 + delta^2 K2^2 = 0
//! K0' + 4A + 3/2 delta^2 K2  = 0
//! ```
//!
//! The ansatz vanishes at `x = 0`, so the boundary absorbs: the mass
//! `exp(K0) / K2` decays like `exp(-delta^2/2 int K2)` rather than staying at
//! one. The mode `Q = 1 / sqrt(K2)` solves `Q' = 2AQ + delta^2 / (2Q)` and
//! `(a + 2A^2) Q^2 + delta^2 A` is conserved along it.

use crate::error::{Error, Result};
use crate::gaussian::{continued_a, solve_backward, SolverOptions, ValueCoefficients};
use crate::ode::{integrate, uniform_grid, Trajectory};
use crate::scenario::{CoefficientPath, ExistenceReport, HalfLineInitial, QuadraticCost, QuadraticTerminal};

/// Relative size of `a + 2A^2` below which the first integral is not evaluated.
pub const FIRST_INTEGRAL_THRESHOLD: f64 = 1e-4;

fn require_even(cost: &QuadraticCost, terminal: &QuadraticTerminal) -> Result<()> {
    if cost.b != 0.0 || terminal.b_t != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "half-line problems need an even cost and terminal (b={}, b_t={})",
            cost.b, terminal.b_t
        )));
    }
    Ok(())
}

/// Forward `(K2, K0)` from `(kappa, ln kappa)`.
pub fn solve_halfline_density(
    cost: &QuadraticCost,
    value: &ValueCoefficients,
    initial: &HalfLineInitial,
    opts: &SolverOptions,
) -> Result<Trajectory<2>> {
    value.require_global()?;
    let d2 = cost.delta * cost.delta;
    let field = |t: f64, y: &[f64; 2]| {
        let a = value.at(t).expect("global value")[0];
        let k2 = y[0];
        [-4.0 * a * k2 - d2 * k2 * k2, -4.0 * a - 1.5 * d2 * k2]
    };
    let k0 = [initial.kappa, initial.kappa.ln()];
    Ok(integrate(field, k0, 0.0, cost.horizon, &opts.ode)?)
}

/// Integrates `Q' = 2AQ + delta^2 / (2Q)` from `Q(0) = q0 > 0`.
pub fn mode_bernoulli(
    cost: &QuadraticCost,
    value: &ValueCoefficients,
    q0: f64,
    opts: &SolverOptions,
) -> Result<Trajectory<1>> {
    value.require_global()?;
    if !(q0 > 0.0) {
        return Err(Error::InvalidParameter(format!("half-line mode must start positive, got {q0}")));
    }
    let d2 = cost.delta * cost.delta;
    let field = |t: f64, y: &[f64; 1]| {
        let a = value.at(t).expect("global value")[0];
        [2.0 * a * y[0] + 0.5 * d2 / y[0]]
    };
    Ok(integrate(field, [q0], 0.0, value.horizon, &opts.ode)?)
}

/// The conserved quantity `(a + 2A^2) Q^2 + delta^2 A`.
pub fn first_integral(cost: &QuadraticCost, a_value: f64, q: f64) -> f64 {
    (cost.a + 2.0 * a_value * a_value) * q * q + cost.delta * cost.delta * a_value
}

/// Mode from the first integral anchored at `(A(0), q0)`.
///
/// `a_of` supplies `A`; it may be a numerical trajectory or the closed form
/// continued through poles, where the mode tends to zero.
pub fn mode_first_integral(cost: &QuadraticCost, a_of: impl Fn(f64) -> f64, q0: f64, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(q0);
    }
    let d2 = cost.delta * cost.delta;
    let a_t = a_of(t);
    if a_t.is_infinite() {
        return Ok(0.0);
    }
    let invariant = first_integral(cost, a_of(0.0), q0);
    let denom = cost.a + 2.0 * a_t * a_t;
    if denom.abs() <= FIRST_INTEGRAL_THRESHOLD * cost.a.abs().max(2.0 * a_t * a_t) {
        return Err(Error::DegenerateDenominator { t });
    }
    let q2 = (invariant - d2 * a_t) / denom;
    if q2 < 0.0 {
        return Err(Error::ImaginaryMode { t });
    }
    Ok(q2.sqrt())
}

#[derive(Debug, Clone)]
pub struct HalfLineSolution {
    pub cost: QuadraticCost,
    pub terminal: QuadraticTerminal,
    pub initial: HalfLineInitial,
    pub existence: ExistenceReport,
    pub value: ValueCoefficients,
    /// `(K2, K0)`; present iff the value function is global.
    pub density: Option<Trajectory<2>>,
    /// `b` and `k1` are `None`. Present iff the value function is global.
    pub path: Option<CoefficientPath>,
    pub times: Vec<f64>,
    /// Bernoulli mode when global. Otherwise the first integral with the
    /// continued closed form of `A`; `NaN` where it cannot be evaluated.
    pub mode: Vec<f64>,
}

pub fn solve_halfline(
    cost: &QuadraticCost,
    terminal: &QuadraticTerminal,
    initial: &HalfLineInitial,
    opts: &SolverOptions,
) -> Result<HalfLineSolution> {
    cost.validate()?;
    require_even(cost, terminal)?;
    let value = solve_backward(cost, terminal, opts)?;
    let times = uniform_grid(0.0, cost.horizon, opts.grid_points);
    let q0 = initial.mode();
    let (density, path, mode) = if value.is_global() {
        let density = solve_halfline_density(cost, &value, initial, opts)?;
        let vs = value.sample(&times);
        let ks = density.sample(&times);
        let path = CoefficientPath {
            times: times.clone(),
            a: vs.iter().map(|v| v[0]).collect(),
            b: None,
            c: vs.iter().map(|v| v[2]).collect(),
            k2: ks.iter().map(|k| k[0]).collect(),
            k1: None,
            k0: ks.iter().map(|k| k[1]).collect(),
        };
        let mode = mode_bernoulli(cost, &value, q0, opts)?.component(0, &times);
        (Some(density), Some(path), mode)
    } else {
        let a_of = |t| continued_a(cost, terminal.a_t, t);
        let mode = times.iter().map(|&t| mode_first_integral(cost, a_of, q0, t).unwrap_or(f64::NAN)).collect();
        (None, None, mode)
    };
    Ok(HalfLineSolution {
        cost: *cost,
        terminal: *terminal,
        initial: *initial,
        existence: value.existence,
        value,
        density,
        path,
        times,
        mode,
    })
}

impl HalfLineSolution {
    /// `exp(K0) / K2`, the integral of the half-line density.
    pub fn mass_curve(&self) -> Option<Vec<f64>> {
        let p = self.path.as_ref()?;
        Some(p.k2.iter().zip(&p.k0).map(|(k2, k0)| k0.exp() / k2).collect())
    }

    /// `1 / sqrt(K2)`.
    pub fn density_mode(&self) -> Option<Vec<f64>> {
        Some(self.path.as_ref()?.k2.iter().map(|k2| k2.sqrt().recip()).collect())
    }

    /// Mass predicted by the boundary outflow, `exp(-delta^2/2 int_0^t K2)`.
    pub fn absorbed_mass_law(&self) -> Option<Vec<f64>> {
        let density = self.density.as_ref()?;
        let d2 = self.cost.delta * self.cost.delta;
        // int K2 along the dense output, integrated once more on the same grid
        let k2 = |t: f64| density.eval(t).expect("inside span")[0];
        let running = integrate(|t, _: &[f64; 1]| [k2(t)], [0.0], 0.0, self.cost.horizon, &Default::default())
            .ok()?;
        Some(running.component(0, &self.times).iter().map(|s| (-0.5 * d2 * s).exp()).collect())
    }

    /// First integral along the canonical mode, with `A` from the solution.
    pub fn first_integral_curve(&self) -> Option<Vec<f64>> {
        let p = self.path.as_ref()?;
        Some(p.a.iter().zip(&self.mode).map(|(&a, &q)| first_integral(&self.cost, a, q)).collect())
    }
}

/// Stationary mode `delta / (2 sqrt(k))` for `A -> -k`, `k = sqrt(-a/2)`.
pub fn stationary_mode(cost: &QuadraticCost) -> Result<f64> {
    if cost.a >= 0.0 {
        return Err(Error::NotConvergent { a: cost.a });
    }
    let k = (-0.5 * cost.a).sqrt();
    Ok(cost.delta / (2.0 * k.sqrt()))
}
