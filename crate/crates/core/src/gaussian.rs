//! Full-line Gaussian reduction.
//!
//! With `Phi = A x^2 + B x + C` and `m = exp(K2 x^2 + K1 x + K0)` the coupled
//! HJB / Fokker–Planck system collapses to
//!
//! ```text
//! A'  + 2A^2                         = -a
//! B'  + 2AB                          = -b
//! C'  + delta^2 A + B^2/2            = -c
//! K2' + 4A K2 - 2 delta^2 K2^2       = 0
//! K1' + 2A K1 - 2 delta^2 K1 K2 + 2B K2 = 0
//! K0' + 2A + B K1 - delta^2/2 (K1^2 + 2 K2) = 0
//! ```
//!
//! The value block is integrated backward from `T`, then the density block
//! forward from `0`. The density mode `Q = -K1 / (2 K2)` obeys
//! `Q' = 2AQ + B`, equivalently `Q'' = -2aQ - b`.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::ode::{integrate, integrate_until_blowup, uniform_grid, OdeOptions, Trajectory};
use crate::scenario::{
    classify_regime, CoefficientPath, ExistenceReport, GaussianInitial, QuadraticCost, QuadraticTerminal,
    Regime,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub ode: OdeOptions,
    /// Points of the uniform output grid on `[0, T]`.
    pub grid_points: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { ode: OdeOptions::adaptive(1e-12, 1e-13), grid_points: 1001 }
    }
}

impl SolverOptions {
    pub fn with_grid_points(mut self, n: usize) -> Self {
        self.grid_points = n;
        self
    }
}

/// Backward solution `(A, B, C)` on `(t*, T]`, or all of `[0, T]` when global.
///
/// `(A, B)` and `C` are integrated separately so that the offset `c` of the
/// running reward cannot perturb the step sequence of the coupled block.
#[derive(Debug, Clone)]
pub struct ValueCoefficients {
    ab: Trajectory<2>,
    c: Trajectory<1>,
    pub horizon: f64,
    pub existence: ExistenceReport,
}

impl ValueCoefficients {
    /// `[A, B, C]` at `t`, `None` outside the existence interval.
    pub fn at(&self, t: f64) -> Option<[f64; 3]> {
        let [a, b] = self.ab.eval(t)?;
        let [c] = self.c.eval(t)?;
        Some([a, b, c])
    }

    pub fn is_global(&self) -> bool {
        self.existence.global
    }

    /// Samples on `times`; panics outside the existence interval.
    pub fn sample(&self, times: &[f64]) -> Vec<[f64; 3]> {
        times
            .iter()
            .map(|&t| self.at(t).unwrap_or_else(|| panic!("t = {t} outside the existence interval")))
            .collect()
    }

    pub(crate) fn require_global(&self) -> Result<()> {
        match self.existence.blowup_time {
            None => Ok(()),
            Some(blowup_time) => Err(Error::NonGlobalValue { blowup_time }),
        }
    }

    fn ab(&self, t: f64) -> (f64, f64) {
        let [a, b] = self.ab.eval(t).expect("value coefficients are global");
        (a, b)
    }
}

/// Integrates `(A, B, C)` backward from their terminal values.
///
/// A blow-up inside `[0, T)` is not an error: the report is non-global and the
/// trajectory covers `(t*, T]`.
pub fn solve_backward(
    cost: &QuadraticCost,
    terminal: &QuadraticTerminal,
    opts: &SolverOptions,
) -> Result<ValueCoefficients> {
    let regime = classify_regime(cost);
    let (a, b) = (cost.a, cost.b);
    let ab_field = move |_: f64, y: &[f64; 2]| [-a - 2.0 * y[0] * y[0], -b - 2.0 * y[0] * y[1]];
    let (ab, blowup) =
        integrate_until_blowup(ab_field, [terminal.a_t, terminal.b_t], cost.horizon, 0.0, &opts.ode)?;
    let existence = match blowup {
        None => ExistenceReport::global(regime),
        Some(t) => ExistenceReport::blowup(regime, t),
    };
    let d2 = cost.delta * cost.delta;
    let c_field = |t: f64, _: &[f64; 1]| match ab.eval(t) {
        Some([a, b]) => [-cost.c - d2 * a - 0.5 * b * b],
        None => [f64::INFINITY],
    };
    let c_end = ab.t_end();
    let c = if c_end == cost.horizon {
        Trajectory::point(cost.horizon, [terminal.c_t])
    } else {
        integrate_until_blowup(c_field, [terminal.c_t], cost.horizon, c_end, &opts.ode)?.0
    };
    Ok(ValueCoefficients { ab, c, horizon: cost.horizon, existence })
}

/// Forward log-density coefficients `(K2, K1, K0)`.
#[derive(Debug, Clone)]
pub struct DensityCoefficients {
    traj: Trajectory<3>,
}

impl DensityCoefficients {
    /// `[K2, K1, K0]` at `t`.
    pub fn at(&self, t: f64) -> Option<[f64; 3]> {
        self.traj.eval(t)
    }

    pub fn trajectory(&self) -> &Trajectory<3> {
        &self.traj
    }
}

/// `int exp(K2 x^2 + K1 x + K0) dx` for `K2 < 0`.
pub fn log_quadratic_mass(k: [f64; 3]) -> f64 {
    let [k2, k1, k0] = k;
    (k0 - k1 * k1 / (4.0 * k2)).exp() * (std::f64::consts::PI / -k2).sqrt()
}

/// Variance `-1 / (2 K2)` of the Gaussian density.
pub fn density_variance(k2: f64) -> f64 {
    -0.5 / k2
}

pub fn solve_forward(
    cost: &QuadraticCost,
    value: &ValueCoefficients,
    initial: &GaussianInitial,
    opts: &SolverOptions,
) -> Result<DensityCoefficients> {
    value.require_global()?;
    let d2 = cost.delta * cost.delta;
    let field = |t: f64, y: &[f64; 3]| {
        let (a, b) = value.ab(t);
        let [k2, k1, _] = *y;
        [
            -4.0 * a * k2 + 2.0 * d2 * k2 * k2,
            -2.0 * a * k1 + 2.0 * d2 * k1 * k2 - 2.0 * b * k2,
            -2.0 * a - b * k1 + 0.5 * d2 * (k1 * k1 + 2.0 * k2),
        ]
    };
    let traj = integrate(field, initial.log_coefficients(), 0.0, cost.horizon, &opts.ode)?;
    Ok(DensityCoefficients { traj })
}

/// Position of the density maximum, `-K1 / (2 K2)`.
pub fn mode_from_density(k1: f64, k2: f64) -> Result<f64> {
    if !(k2 < 0.0) {
        return Err(Error::DegenerateDensity { k2 });
    }
    Ok(-k1 / (2.0 * k2))
}

/// Integrates `Q' = 2AQ + B` forward from `Q(0) = q0`.
pub fn mode_ode(value: &ValueCoefficients, q0: f64, opts: &SolverOptions) -> Result<Trajectory<1>> {
    value.require_global()?;
    let field = |t: f64, y: &[f64; 1]| {
        let (a, b) = value.ab(t);
        [2.0 * a * y[0] + b]
    };
    Ok(integrate(field, [q0], 0.0, value.horizon, &opts.ode)?)
}

/// Closed-form existence analysis of `A' = -2A^2 - a`, `A(T) = A_T`.
pub fn existence_horizon(cost: &QuadraticCost, a_t: f64) -> ExistenceReport {
    let regime = classify_regime(cost);
    let horizon = cost.horizon;
    // time needed, going backward from T, to reach the pole
    let time_to_pole = match regime {
        Regime::Subcritical { k_minus: k } => {
            (a_t > k).then(|| ((a_t + k) / (a_t - k)).ln() / (4.0 * k))
        }
        Regime::Critical => (a_t > 0.0).then(|| 1.0 / (2.0 * a_t)),
        Regime::Supercritical { k_plus: k } => {
            Some((FRAC_PI_2 - (a_t / k).atan()) / (2.0 * cost.a).sqrt())
        }
    };
    match time_to_pole {
        Some(tau) if tau <= horizon => ExistenceReport::blowup(regime, horizon - tau),
        _ => ExistenceReport::global(regime),
    }
}

/// Blow-up time of the scalar `A` equation found by the integrator guard.
pub fn guard_blowup_time(cost: &QuadraticCost, a_t: f64, opts: &OdeOptions) -> Result<Option<f64>> {
    let a = cost.a;
    let (_, blowup) = integrate_until_blowup(|_, y| [-a - 2.0 * y[0] * y[0]], [a_t], cost.horizon, 0.0, opts)?;
    Ok(blowup)
}

/// Solution of `A' = -2A^2 - a` continued through its poles.
///
/// The subcritical branch is the exponential form with `k = sqrt(-a/2)`
/// (rewritten with decaying exponentials); the critical and supercritical
/// branches are `A_T / (1 - 2 (T-t) A_T)` and
/// `k tan(atan(A_T / k) + sqrt(2a) (T - t))`.
pub fn continued_a(cost: &QuadraticCost, a_t: f64, t: f64) -> f64 {
    let tau = cost.horizon - t;
    match classify_regime(cost) {
        Regime::Subcritical { k_minus: k } => {
            let f = (-4.0 * k * tau).exp();
            -k * ((a_t - k) + (a_t + k) * f) / ((a_t - k) - (a_t + k) * f)
        }
        Regime::Critical => a_t / (1.0 - 2.0 * tau * a_t),
        Regime::Supercritical { k_plus: k } => {
            k * ((a_t / k).atan() + (2.0 * cost.a).sqrt() * tau).tan()
        }
    }
}

/// Closed-form `A(t)`, restricted to the existence interval.
pub fn closed_form_a(cost: &QuadraticCost, a_t: f64, t: f64) -> Result<f64> {
    if let Some(blowup_time) = existence_horizon(cost, a_t).blowup_time {
        if t <= blowup_time {
            return Err(Error::OutsideExistenceInterval { t, blowup_time });
        }
    }
    Ok(continued_a(cost, a_t, t))
}

/// Mode curve solving `Q'' = -2aQ - b`, `Q(0) = q0`, `Q'(T) = 2 A_T Q(T) + B_T`.
///
/// This is the mode law written in exact fundamental solutions; it stays
/// finite across poles of `A` and is the canonical mode when the value
/// function does not exist on all of `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoPointMode {
    regime: Regime,
    particular: f64,
    b: f64,
    alpha: f64,
    beta: f64,
    horizon: f64,
}

impl TwoPointMode {
    pub fn new(cost: &QuadraticCost, terminal: &QuadraticTerminal, q0: f64) -> Result<Self> {
        let regime = classify_regime(cost);
        let horizon = cost.horizon;
        let particular = if cost.a == 0.0 { 0.0 } else { -cost.b / (2.0 * cost.a) };
        let mut mode = Self { regime, particular, b: cost.b, alpha: 0.0, beta: 0.0, horizon };
        let (p0, _) = mode.particular_at(0.0);
        let (pt, dpt) = mode.particular_at(horizon);
        let (u0, _) = mode.basis(0, 0.0);
        let (v0, _) = mode.basis(1, 0.0);
        let (ut, dut) = mode.basis(0, horizon);
        let (vt, dvt) = mode.basis(1, horizon);
        let two_at = 2.0 * terminal.a_t;
        // [u0 v0; du - 2A_T u, dv - 2A_T v] [alpha beta]^T = rhs
        let (m11, m12) = (u0, v0);
        let (m21, m22) = (dut - two_at * ut, dvt - two_at * vt);
        let r1 = q0 - p0;
        let r2 = terminal.b_t - dpt + two_at * pt;
        let det = m11 * m22 - m12 * m21;
        let scale = (m11.abs() + m12.abs()) * (m21.abs() + m22.abs());
        if det.abs() <= 1e-13 * scale {
            return Err(Error::FormulaPole { formula: "two-point mode" });
        }
        mode.alpha = (r1 * m22 - m12 * r2) / det;
        mode.beta = (m11 * r2 - r1 * m21) / det;
        Ok(mode)
    }

    fn particular_at(&self, t: f64) -> (f64, f64) {
        match self.regime {
            Regime::Critical => (-0.5 * self.b * t * t, -self.b * t),
            _ => (self.particular, 0.0),
        }
    }

    /// Value and derivative of fundamental solution `which` (0 or 1).
    fn basis(&self, which: usize, t: f64) -> (f64, f64) {
        match (self.regime, which) {
            (Regime::Subcritical { k_minus: k }, 0) => {
                let e = (-2.0 * k * t).exp();
                (e, -2.0 * k * e)
            }
            (Regime::Subcritical { k_minus: k }, _) => {
                let e = (-2.0 * k * (self.horizon - t)).exp();
                (e, 2.0 * k * e)
            }
            (Regime::Critical, 0) => (1.0, 0.0),
            (Regime::Critical, _) => (t, 1.0),
            (Regime::Supercritical { k_plus: k }, 0) => {
                let w = 2.0 * k;
                ((w * t).cos(), -w * (w * t).sin())
            }
            (Regime::Supercritical { k_plus: k }, _) => {
                let w = 2.0 * k;
                ((w * t).sin(), w * (w * t).cos())
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.particular_at(t).0 + self.alpha * self.basis(0, t).0 + self.beta * self.basis(1, t).0
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.particular_at(t).1 + self.alpha * self.basis(0, t).1 + self.beta * self.basis(1, t).1
    }
}

/// Complete full-line solve on a uniform output grid.
#[derive(Debug, Clone)]
pub struct GaussianSolution {
    pub cost: QuadraticCost,
    pub terminal: QuadraticTerminal,
    pub initial: GaussianInitial,
    pub existence: ExistenceReport,
    pub value: ValueCoefficients,
    /// Present iff the value function is global.
    pub density: Option<DensityCoefficients>,
    /// Present iff the value function is global.
    pub path: Option<CoefficientPath>,
    pub times: Vec<f64>,
    /// Density mode on `times`: `Q' = 2AQ + B` when global, otherwise the
    /// two-point form of `Q'' = -2aQ - b`.
    pub mode: Vec<f64>,
}

impl GaussianSolution {
    pub fn solve(
        cost: &QuadraticCost,
        terminal: &QuadraticTerminal,
        initial: &GaussianInitial,
        opts: &SolverOptions,
    ) -> Result<Self> {
        cost.validate()?;
        let value = solve_backward(cost, terminal, opts)?;
        let times = uniform_grid(0.0, cost.horizon, opts.grid_points);
        let (density, path, mode) = if value.is_global() {
            let density = solve_forward(cost, &value, initial, opts)?;
            let vs = value.sample(&times);
            let ks = density.traj.sample(&times);
            let path = CoefficientPath {
                times: times.clone(),
                a: vs.iter().map(|v| v[0]).collect(),
                b: Some(vs.iter().map(|v| v[1]).collect()),
                c: vs.iter().map(|v| v[2]).collect(),
                k2: ks.iter().map(|k| k[0]).collect(),
                k1: Some(ks.iter().map(|k| k[1]).collect()),
                k0: ks.iter().map(|k| k[2]).collect(),
            };
            let mode = mode_ode(&value, initial.x0, opts)?.component(0, &times);
            (Some(density), Some(path), mode)
        } else {
            let two_point = TwoPointMode::new(cost, terminal, initial.x0)?;
            (None, None, times.iter().map(|&t| two_point.eval(t)).collect())
        };
        Ok(Self {
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

    /// `-K1/(2K2)` on the output grid.
    pub fn density_mode(&self) -> Option<Vec<f64>> {
        let path = self.path.as_ref()?;
        let k1 = path.k1.as_ref()?;
        Some(k1.iter().zip(&path.k2).map(|(&k1, &k2)| -k1 / (2.0 * k2)).collect())
    }

    pub fn mass_curve(&self) -> Option<Vec<f64>> {
        let path = self.path.as_ref()?;
        let k1 = path.k1.as_ref()?;
        Some((0..path.len()).map(|i| log_quadratic_mass([path.k2[i], k1[i], path.k0[i]])).collect())
    }

    pub fn variance_curve(&self) -> Option<Vec<f64>> {
        Some(self.path.as_ref()?.k2.iter().map(|&k2| density_variance(k2)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    fn cost(a: f64, b: f64, delta: f64, horizon: f64) -> QuadraticCost {
        QuadraticCost::new(a, b, 0.0, delta, horizon).unwrap()
    }

    fn audit_scenario() -> GaussianSolution {
        GaussianSolution::solve(
            &cost(-2.0, 0.0, 0.2, 2.0),
            &QuadraticTerminal::new(0.0, 0.0, 0.0).unwrap(),
            &GaussianInitial::new(0.2, 0.5).unwrap(),
            &opts(),
        )
        .unwrap()
    }

    #[test]
    fn equilibrium_terminal_value_stays_put() {
        let value =
            solve_backward(&cost(-2.0, 0.0, 0.3, 5.0), &QuadraticTerminal::new(-1.0, 0.0, 0.0).unwrap(), &opts())
                .unwrap();
        for t in uniform_grid(0.0, 5.0, 51) {
            assert!((value.at(t).unwrap()[0] + 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn critical_riccati_backward_value() {
        let value =
            solve_backward(&cost(0.0, 0.0, 0.3, 1.0), &QuadraticTerminal::new(0.25, 0.0, 0.0).unwrap(), &opts())
                .unwrap();
        assert!((value.at(0.0).unwrap()[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn long_horizon_b_settles_at_equilibrium() {
        let value =
            solve_backward(&cost(-2.0, 4.0, 0.3, 30.0), &QuadraticTerminal::new(-1.0, 0.0, 0.0).unwrap(), &opts())
                .unwrap();
        // B* = -b / (2 A*) = 2
        assert!((value.at(1.0).unwrap()[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn frozen_density_without_drift_or_noise() {
        let c = QuadraticCost { a: 0.0, b: 0.0, c: 0.0, delta: 0.0, horizon: 1.0 };
        let value = solve_backward(&c, &QuadraticTerminal::new(0.0, 0.0, 0.0).unwrap(), &opts()).unwrap();
        let init = GaussianInitial::new(0.0, 0.5).unwrap();
        let dens = solve_forward(&c, &value, &init, &opts()).unwrap();
        for t in uniform_grid(0.0, 1.0, 11) {
            assert_eq!(dens.at(t).unwrap(), init.log_coefficients());
        }
    }

    #[test]
    fn initial_log_coefficients() {
        let sol = audit_scenario();
        let path = sol.path.as_ref().unwrap();
        assert_eq!(path.k2[0], -2.0);
        // m0 = M exp(-(x - x0)^2 / lambda) expands to K1 = +2 x0 / lambda
        assert!((path.k1.as_ref().unwrap()[0] - 0.8).abs() < 1e-15);
        assert!((sol.density_mode().unwrap()[0] - 0.2).abs() < 1e-15);
        assert_eq!(path.a[path.len() - 1], 0.0);
    }

    #[test]
    fn mass_is_conserved() {
        let sol = audit_scenario();
        for m in sol.mass_curve().unwrap() {
            assert!((m - 1.0).abs() < 1e-8, "{m}");
        }
    }

    #[test]
    fn mode_from_density_examples() {
        assert!((mode_from_density(0.8, -2.0).unwrap() - 0.2).abs() < 1e-15);
        assert!((mode_from_density(-0.8, -2.0).unwrap() + 0.2).abs() < 1e-15);
        assert_eq!(mode_from_density(0.0, -1.0).unwrap(), 0.0);
        assert!(matches!(mode_from_density(1.0, 0.0), Err(Error::DegenerateDensity { .. })));
    }

    #[test]
    fn mode_ode_matches_density_mode() {
        let sol = audit_scenario();
        let from_k = sol.density_mode().unwrap();
        for (q, qk) in sol.mode.iter().zip(&from_k) {
            assert!((q - qk).abs() < 1e-6);
        }
    }

    #[test]
    fn symmetric_data_keeps_mode_at_origin() {
        for a in [-1.0, 0.0, 0.3] {
            let sol = GaussianSolution::solve(
                &cost(a, 0.0, 0.2, 1.0),
                &QuadraticTerminal::new(0.0, 0.0, 0.0).unwrap(),
                &GaussianInitial::new(0.0, 0.5).unwrap(),
                &opts(),
            )
            .unwrap();
            assert!(sol.mode.iter().all(|q| q.abs() < 1e-14));
        }
    }

    #[test]
    fn long_horizon_mode_plateau() {
        let sol = GaussianSolution::solve(
            &cost(-2.0, 4.0, 0.2, 20.0),
            &QuadraticTerminal::new(0.0, 0.0, 0.0).unwrap(),
            &GaussianInitial::new(0.0, 0.5).unwrap(),
            &opts(),
        )
        .unwrap();
        let mid = sol.mode[sol.mode.len() / 2];
        assert!((mid - 1.0).abs() < 1e-8, "{mid}");
    }

    #[test]
    fn supercritical_mode_oscillates_about_center() {
        // A_T chosen so that the value function survives the short horizon
        let c = cost(0.5, 0.2, 0.2, 1.2);
        let sol = GaussianSolution::solve(
            &c,
            &QuadraticTerminal::new(-0.3, 0.1, 0.0).unwrap(),
            &GaussianInitial::new(0.4, 0.5).unwrap(),
            &opts(),
        )
        .unwrap();
        assert!(sol.existence.global);
        // Q + b/(2a) is a combination of cos and sin at frequency sqrt(2a) = 1
        let center = -0.2;
        let w = 1.0_f64;
        let (t1, t2) = (0.3, 0.9);
        let i1 = 250;
        let i2 = 750;
        assert!((sol.times[i1] - t1).abs() < 1e-12 && (sol.times[i2] - t2).abs() < 1e-12);
        let (y1, y2) = (sol.mode[i1] - center, sol.mode[i2] - center);
        let alpha = 0.4 - center;
        let beta = (y1 - alpha * (w * t1).cos()) / (w * t1).sin();
        assert!((alpha * (w * t2).cos() + beta * (w * t2).sin() - y2).abs() < 1e-8);
    }

    #[test]
    fn existence_examples() {
        let rep = existence_horizon(&cost(2.0, 0.0, 0.2, 1.0), 0.0);
        let t_star = rep.blowup_time.unwrap();
        assert!((t_star - (1.0 - std::f64::consts::FRAC_PI_4)).abs() < 1e-12);
        assert!(existence_horizon(&cost(-2.0, 0.0, 0.2, 1e3), 0.0).global);
        let rep = existence_horizon(&cost(0.0, 0.0, 0.2, 1.0), 1.0);
        assert_eq!(rep.blowup_time, Some(0.5));
        assert!(!rep.global);
    }

    #[test]
    fn closed_form_horizons_match_guard() {
        let cases = [(2.0, 0.0, 1.0), (0.0, 1.0, 1.0), (-2.0, 1.5, 1.0), (0.7, -0.4, 3.0), (-0.5, 2.0, 2.0)];
        for (a, a_t, t) in cases {
            let c = cost(a, 0.0, 0.2, t);
            let closed = existence_horizon(&c, a_t).blowup_time.unwrap();
            let guard = guard_blowup_time(&c, a_t, &opts().ode).unwrap().unwrap();
            assert!((closed - guard).abs() < 1e-6, "a={a} A_T={a_t}: {closed} vs {guard}");
        }
    }

    #[test]
    fn blowup_is_reported_not_raised() {
        let c = cost(0.0, 0.0, 0.2, 1.0);
        let term = QuadraticTerminal::new(1.0, 0.0, 0.0).unwrap();
        let value = solve_backward(&c, &term, &opts()).unwrap();
        assert!(!value.is_global());
        assert!((value.existence.blowup_time.unwrap() - 0.5).abs() < 1e-6);
        assert!(value.at(0.2).is_none());
        let init = GaussianInitial::new(0.0, 0.5).unwrap();
        assert!(matches!(solve_forward(&c, &value, &init, &opts()), Err(Error::NonGlobalValue { .. })));
        let sol = GaussianSolution::solve(&c, &term, &init, &opts()).unwrap();
        assert!(sol.path.is_none());
        assert_eq!(sol.mode.len(), sol.times.len());
    }

    #[test]
    fn closed_form_a_examples() {
        let c = cost(-2.0, 0.0, 0.2, 3.0);
        for t in [0.0, 1.0, 2.9] {
            assert!((closed_form_a(&c, -1.0, t).unwrap() + 1.0).abs() < 1e-15);
        }
        assert!((closed_form_a(&cost(0.0, 0.0, 0.2, 1.0), 0.25, 0.0).unwrap() - 0.5).abs() < 1e-15);
        let c = cost(-2.0, 0.0, 0.2, 2.0);
        let value = solve_backward(&c, &QuadraticTerminal::new(0.0, 0.0, 0.0).unwrap(), &opts()).unwrap();
        assert!((closed_form_a(&c, 0.0, 0.0).unwrap() - value.at(0.0).unwrap()[0]).abs() < 1e-8);
        assert!(matches!(
            closed_form_a(&cost(0.0, 0.0, 0.2, 1.0), 1.0, 0.3),
            Err(Error::OutsideExistenceInterval { .. })
        ));
    }

    #[test]
    fn two_point_mode_matches_mode_ode_when_global() {
        let c = cost(-1.3, 0.7, 0.2, 2.5);
        let term = QuadraticTerminal::new(0.2, -0.4, 0.0).unwrap();
        let init = GaussianInitial::new(0.3, 0.5).unwrap();
        let sol = GaussianSolution::solve(&c, &term, &init, &opts()).unwrap();
        let tp = TwoPointMode::new(&c, &term, 0.3).unwrap();
        for (t, q) in sol.times.iter().zip(&sol.mode) {
            assert!((tp.eval(*t) - q).abs() < 1e-8);
        }
    }

    #[test]
    fn two_point_mode_pole() {
        // a = 0 with A_T = 1/(2T)
        let c = cost(0.0, 0.3, 0.2, 2.0);
        let term = QuadraticTerminal::new(0.25, 0.0, 0.0).unwrap();
        assert!(matches!(TwoPointMode::new(&c, &term, 0.1), Err(Error::FormulaPole { .. })));
    }

    #[test]
    fn adding_offset_changes_only_c() {
        let base = cost(-0.8, 0.3, 0.25, 2.0);
        let shifted = QuadraticCost { c: base.c + 3.5, ..base };
        let term = QuadraticTerminal::new(0.1, 0.2, 0.0).unwrap();
        let init = GaussianInitial::new(-0.1, 0.4).unwrap();
        let s1 = GaussianSolution::solve(&base, &term, &init, &opts()).unwrap();
        let s2 = GaussianSolution::solve(&shifted, &term, &init, &opts()).unwrap();
        let (p1, p2) = (s1.path.unwrap(), s2.path.unwrap());
        for i in 0..p1.len() {
            assert!((p1.a[i] - p2.a[i]).abs() < 1e-12);
            assert!((p1.k2[i] - p2.k2[i]).abs() < 1e-12);
            assert!((s1.mode[i] - s2.mode[i]).abs() < 1e-12);
        }
        // C absorbs the offset: C(0) grows by c * T
        assert!((p2.c[0] - p1.c[0] - 3.5 * 2.0).abs() < 1e-9);
    }
}
