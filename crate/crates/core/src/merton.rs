//! Investor opinion scenarios on top of the Merton portfolio problem.
//!
//! Investors with HARA utility hold the fraction `(mu - r) / (sigma^2 (1 - q))`
//! in the risky asset. Opinions about the drift `mu` form a full-line game
//! with a Gaussian density; opinions about `xi = 1 / sigma` live on the
//! half-line.

use crate::error::{Error, Result};
use crate::gaussian::{existence_horizon, GaussianSolution, SolverOptions};
use crate::halfline::{solve_halfline, stationary_mode};
use crate::scenario::{
    classify_regime, GaussianInitial, HalfLineInitial, QuadraticCost, QuadraticTerminal, Regime,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility {
    /// `v^q / q`, `q < 1`, `q != 0`.
    Power { q: f64 },
    /// `ln v`, the `q -> 0` limit.
    Log,
}

impl Utility {
    /// Exponent, `0` for the logarithmic case.
    pub fn q(&self) -> f64 {
        match *self {
            Utility::Power { q } => q,
            Utility::Log => 0.0,
        }
    }

    /// `Log` for `q == 0`, otherwise a validated power utility.
    pub fn from_q(q: f64) -> Result<Self> {
        if q == 0.0 {
            return Ok(Utility::Log);
        }
        if !(q < 1.0) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!("HARA exponent must be < 1, got {q}")));
        }
        Ok(Utility::Power { q })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvestorParams {
    pub mu: f64,
    pub sigma: f64,
    pub r: f64,
    pub utility: Utility,
}

impl InvestorParams {
    pub fn new(mu: f64, sigma: f64, r: f64, q: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma must be > 0, got {sigma}")));
        }
        Ok(Self { mu, sigma, r, utility: Utility::from_q(q)? })
    }
}

pub fn optimal_fraction(p: &InvestorParams) -> f64 {
    (p.mu - p.r) / (p.sigma * p.sigma * (1.0 - p.utility.q()))
}

/// Long-run `E ln V / t` under the optimal fraction.
pub fn growth_rate(p: &InvestorParams) -> f64 {
    let q = p.utility.q();
    let ex = p.mu - p.r;
    p.r + (1.0 - 2.0 * q) * ex * ex / (2.0 * p.sigma * p.sigma * (q - 1.0).powi(2))
}

/// `R = (1 - 2q) / (2 sigma^2 (q - 1)^2)`.
pub fn risk_coefficient_r(sigma: f64, q: f64) -> f64 {
    (1.0 - 2.0 * q) / (2.0 * sigma * sigma * (q - 1.0).powi(2))
}

/// `P = (1 - 2q) (mu - r)^2 / (2 (q - 1)^2)`.
pub fn risk_coefficient_p(mu: f64, r: f64, q: f64) -> f64 {
    (1.0 - 2.0 * q) * (mu - r).powi(2) / (2.0 * (q - 1.0).powi(2))
}

/// Opinions about the drift of the risky asset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftOpinionScenario {
    /// True drift.
    pub mu_bar: f64,
    pub sigma: f64,
    pub r: f64,
    pub q: f64,
    /// Weight of the growth reward.
    pub beta: f64,
    /// Weight of the penalty for a wrong drift.
    pub gamma: f64,
    pub delta: f64,
    pub horizon: f64,
    pub mu0: f64,
    pub lambda: f64,
}

/// Opinions about `xi = 1 / sigma` with known drift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolOpinionScenario {
    pub mu: f64,
    pub r: f64,
    pub q: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub horizon: f64,
    /// Initial mode of `xi`.
    pub xi0: f64,
}

fn check_weights(beta: f64, gamma: f64, q: f64) -> Result<()> {
    Utility::from_q(q)?;
    if !(beta >= 0.0 && gamma >= 0.0) {
        return Err(Error::InvalidParameter(format!("weights must be >= 0 (beta={beta}, gamma={gamma})")));
    }
    Ok(())
}

impl DriftOpinionScenario {
    pub fn risk_coefficient(&self) -> f64 {
        risk_coefficient_r(self.sigma, self.q)
    }
}

pub fn build_drift_problem(
    s: &DriftOpinionScenario,
) -> Result<(QuadraticCost, QuadraticTerminal, GaussianInitial)> {
    check_weights(s.beta, s.gamma, s.q)?;
    InvestorParams::new(s.mu_bar, s.sigma, s.r, s.q)?;
    let rr = s.risk_coefficient();
    let (beta, gamma, r, mb) = (s.beta, s.gamma, s.r, s.mu_bar);
    let cost = QuadraticCost::new(
        beta * rr - gamma,
        2.0 * (gamma * mb - beta * rr * r),
        beta * r + beta * rr * r * r - gamma * mb * mb,
        s.delta,
        s.horizon,
    )?;
    let terminal = QuadraticTerminal::new(rr, -2.0 * rr * r, r + rr * r * r)?;
    Ok((cost, terminal, GaussianInitial::new(s.mu0, s.lambda)?))
}

pub fn build_vol_problem(s: &VolOpinionScenario) -> Result<(QuadraticCost, QuadraticTerminal, HalfLineInitial)> {
    check_weights(s.beta, s.gamma, s.q)?;
    if !(s.xi0 > 0.0 && s.xi0.is_finite()) {
        return Err(Error::InvalidParameter(format!("xi0 must be > 0, got {}", s.xi0)));
    }
    let p = risk_coefficient_p(s.mu, s.r, s.q);
    let cost = QuadraticCost::new(s.beta * p - s.gamma, 0.0, s.beta * s.r, s.delta, s.horizon)?;
    let terminal = QuadraticTerminal::new(p, 0.0, s.r)?;
    Ok((cost, terminal, HalfLineInitial::new(1.0 / (s.xi0 * s.xi0))?))
}

/// `Q* = (r beta R - gamma mu_bar) / (beta R - gamma)`.
pub fn drift_opinion_limit(s: &DriftOpinionScenario) -> Result<f64> {
    let rr = s.risk_coefficient();
    let a = s.beta * rr - s.gamma;
    if a >= 0.0 {
        return Err(Error::NotConvergent { a });
    }
    Ok((s.r * s.beta * rr - s.gamma * s.mu_bar) / a)
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeKind {
    /// `a < 0`: the mode settles at `limit`.
    OpinionForms { limit: f64 },
    /// `a > 0`: the mode oscillates around `center`.
    Oscillates { angular_frequency: f64, center: f64 },
    /// `a = 0`: the mode moves along a parabola without a limit.
    Drifts,
    /// The value function blows up at `blowup_time`; `mode` still describes
    /// the mode, which stays computable.
    NoGlobalValue { blowup_time: f64, mode: Box<OutcomeKind> },
}

impl OutcomeKind {
    pub fn name(&self) -> &'static str {
        match self {
            OutcomeKind::OpinionForms { .. } => "opinion-forms",
            OutcomeKind::Oscillates { .. } => "oscillates",
            OutcomeKind::Drifts => "drifts",
            OutcomeKind::NoGlobalValue { .. } => "no-global-value",
        }
    }

    /// Outcome of the mode itself, looking through `NoGlobalValue`.
    pub fn mode_kind(&self) -> &OutcomeKind {
        match self {
            OutcomeKind::NoGlobalValue { mode, .. } => mode.mode_kind(),
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeReport {
    pub kind: OutcomeKind,
    /// Mode at the midpoint of a long horizon; `Some` only for forming opinions.
    pub audited_limit: Option<f64>,
}

/// Horizon long enough that boundary layers `exp(-2k T/2)` are below 1e-8.
fn audit_horizon(k: f64, horizon: f64) -> f64 {
    horizon.max(20.0 / k)
}

fn with_existence(cost: &QuadraticCost, terminal: &QuadraticTerminal, mode: OutcomeKind) -> OutcomeKind {
    match existence_horizon(cost, terminal.a_t).blowup_time {
        Some(blowup_time) => OutcomeKind::NoGlobalValue { blowup_time, mode: Box::new(mode) },
        None => mode,
    }
}

/// Classifies a full-line scenario; `q0` seeds the long-horizon audit.
pub fn classify_outcome(
    cost: &QuadraticCost,
    terminal: &QuadraticTerminal,
    q0: f64,
    opts: &SolverOptions,
) -> Result<OutcomeReport> {
    let (mode, audited_limit) = match classify_regime(cost) {
        Regime::Subcritical { k_minus } => {
            let long = QuadraticCost { horizon: audit_horizon(k_minus, cost.horizon), ..*cost };
            let init = GaussianInitial::new(q0, 1.0)?;
            let sol = GaussianSolution::solve(&long, terminal, &init, opts)?;
            let mid = sol.mode[sol.mode.len() / 2];
            (OutcomeKind::OpinionForms { limit: -cost.b / (2.0 * cost.a) }, Some(mid))
        }
        Regime::Critical => (OutcomeKind::Drifts, None),
        Regime::Supercritical { .. } => (
            OutcomeKind::Oscillates {
                angular_frequency: (2.0 * cost.a).sqrt(),
                center: -cost.b / (2.0 * cost.a) + 0.0,
            },
            None,
        ),
    };
    Ok(OutcomeReport { kind: with_existence(cost, terminal, mode), audited_limit })
}

/// Half-line counterpart; the limit is the stationary mode.
pub fn classify_halfline_outcome(
    cost: &QuadraticCost,
    terminal: &QuadraticTerminal,
    initial: &HalfLineInitial,
    opts: &SolverOptions,
) -> Result<OutcomeReport> {
    let (mode, audited_limit) = match classify_regime(cost) {
        Regime::Subcritical { k_minus } => {
            let long = QuadraticCost { horizon: audit_horizon(k_minus, cost.horizon), ..*cost };
            let sol = solve_halfline(&long, terminal, initial, opts)?;
            let mid = sol.mode[sol.mode.len() / 2];
            let audited = mid.is_finite().then_some(mid);
            (OutcomeKind::OpinionForms { limit: stationary_mode(cost)? }, audited)
        }
        Regime::Critical => (OutcomeKind::Drifts, None),
        Regime::Supercritical { .. } => {
            (OutcomeKind::Oscillates { angular_frequency: (2.0 * cost.a).sqrt(), center: 0.0 }, None)
        }
    };
    Ok(OutcomeReport { kind: with_existence(cost, terminal, mode), audited_limit })
}

/// The three bundled drift-opinion scenarios, `gamma` in `{0, 1, 2}`.
///
/// `q = -10`, `sigma = 0.5`, `beta = 1`, `mu_bar = 0.5`, `r = 0.1`, `mu0 = 0.2`.
/// `delta`, `lambda` and the horizon are free; the mode does not depend on
/// `delta` or `lambda`.
pub fn figure1_scenarios() -> [DriftOpinionScenario; 3] {
    [0.0, 1.0, 2.0].map(|gamma| DriftOpinionScenario {
        mu_bar: 0.5,
        sigma: 0.5,
        r: 0.1,
        q: -10.0,
        beta: 1.0,
        gamma,
        delta: 0.2,
        horizon: 20.0,
        mu0: 0.2,
        lambda: 0.1,
    })
}

/// Times of the strict local maxima of a sampled curve.
pub fn local_maxima(times: &[f64], values: &[f64]) -> Vec<f64> {
    (1..values.len().saturating_sub(1))
        .filter(|&i| values[i] > values[i - 1] && values[i] >= values[i + 1])
        .map(|i| {
            // parabolic refinement through the three samples
            let (l, c, r) = (values[i - 1], values[i], values[i + 1]);
            let h = times[i + 1] - times[i];
            let den = l - 2.0 * c + r;
            if den < 0.0 {
                times[i] + 0.5 * h * (l - r) / den
            } else {
                times[i]
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-6;

    fn fig(gamma: f64) -> DriftOpinionScenario {
        figure1_scenarios()[gamma as usize]
    }

    #[test]
    fn fraction_and_growth() {
        let p = InvestorParams::new(0.5, 0.5, 0.1, -10.0).unwrap();
        assert!((optimal_fraction(&p) - 0.4 / (0.25 * 11.0)).abs() < 1e-15);
        assert!((growth_rate(&p) - (0.1 + 21.0 * 0.16 / (0.5 * 121.0))).abs() < 1e-15);
        let flat = InvestorParams::new(0.1, 0.5, 0.1, -10.0).unwrap();
        assert_eq!(optimal_fraction(&flat), 0.0);
        let wide = InvestorParams { sigma: 1.0, ..p };
        assert!((optimal_fraction(&p) / optimal_fraction(&wide) - 4.0).abs() < 1e-12);
        let half = InvestorParams::new(0.5, 0.5, 0.1, 0.5).unwrap();
        assert_eq!(growth_rate(&half), 0.1);
        let bold = InvestorParams::new(0.5, 0.5, 0.1, 0.8).unwrap();
        assert!(growth_rate(&bold) < 0.1);
    }

    #[test]
    fn log_utility_is_q_zero() {
        let p = InvestorParams::new(0.5, 0.5, 0.1, 0.0).unwrap();
        assert_eq!(p.utility, Utility::Log);
        assert!((optimal_fraction(&p) - 1.6).abs() < 1e-15);
        assert!(InvestorParams::new(0.5, 0.5, 0.1, 1.0).is_err());
    }

    #[test]
    fn risk_coefficients() {
        assert!((risk_coefficient_r(0.5, -10.0) - 21.0 / 60.5).abs() < 1e-15);
        assert_eq!(risk_coefficient_r(0.5, 0.5), 0.0);
        assert_eq!(risk_coefficient_p(0.5, 0.1, 0.5), 0.0);
        assert!(risk_coefficient_r(1e4, -10.0) < 1e-8);
        for q in [-3.0, 0.2, 0.7, 0.95] {
            let (r, p) = (risk_coefficient_r(0.4, q), risk_coefficient_p(0.3, 0.1, q));
            assert_eq!(r.signum(), p.signum());
            assert_eq!(r < 0.0, q > 0.5);
        }
    }

    #[test]
    fn drift_mapping() {
        let s = DriftOpinionScenario { beta: 0.0, gamma: 1.0, ..fig(0.0) };
        let (cost, _, init) = build_drift_problem(&s).unwrap();
        assert_eq!((cost.a, cost.b, cost.c), (-1.0, 1.0, -0.25));
        assert_eq!(init.x0, 0.2);
        assert_eq!(drift_opinion_limit(&s).unwrap(), 0.5);
    }

    #[test]
    fn drift_mapping_reproduces_reward() {
        let s = fig(1.0);
        let (cost, terminal, _) = build_drift_problem(&s).unwrap();
        let rr = s.risk_coefficient();
        for mu in [-1.0, 0.0, 0.3, 2.0] {
            let reward = s.beta * (s.r + rr * (mu - s.r).powi(2)) - s.gamma * (mu - s.mu_bar).powi(2);
            assert!((cost.running(mu) - reward).abs() < 1e-14);
            assert!((terminal.eval(mu) - (s.r + rr * (mu - s.r).powi(2))).abs() < 1e-14);
        }
    }

    #[test]
    fn figure1_limits_match_long_horizon_mode() {
        let opts = SolverOptions::default();
        for (gamma, expected) in [(1.0, 0.712659), (2.0, 0.583999)] {
            let s = fig(gamma);
            let limit = drift_opinion_limit(&s).unwrap();
            assert!((limit - expected).abs() < 1e-6, "{limit}");
            let (cost, terminal, init) = build_drift_problem(&s).unwrap();
            let report = classify_outcome(&cost, &terminal, init.x0, &opts).unwrap();
            assert_eq!(report.kind, OutcomeKind::OpinionForms { limit: -cost.b / (2.0 * cost.a) });
            assert!((report.audited_limit.unwrap() - limit).abs() < 1e-3);
            // overestimation for these parameters
            assert!(limit > s.mu_bar);
        }
    }

    #[test]
    fn figure1_without_penalty_oscillates_without_global_value() {
        let (cost, terminal, init) = build_drift_problem(&fig(0.0)).unwrap();
        assert!((cost.a - 0.3471074).abs() < 1e-7);
        let report = classify_outcome(&cost, &terminal, init.x0, &SolverOptions::default()).unwrap();
        let OutcomeKind::NoGlobalValue { blowup_time, mode } = report.kind else { panic!("{report:?}") };
        assert!(blowup_time > 0.0 && blowup_time < cost.horizon);
        let OutcomeKind::Oscillates { angular_frequency, .. } = *mode else { panic!() };
        // sqrt(2 * 21 / 60.5)
        assert!((angular_frequency - 0.8331956).abs() < 1e-6);
    }

    #[test]
    fn oscillation_period() {
        let (cost, terminal, init) = build_drift_problem(&fig(0.0)).unwrap();
        let long = QuadraticCost { horizon: 40.0, ..cost };
        let sol = GaussianSolution::solve(&long, &terminal, &init, &SolverOptions::default().with_grid_points(8001))
            .unwrap();
        let peaks = local_maxima(&sol.times, &sol.mode);
        assert!(peaks.len() >= 3);
        let period = 2.0 * std::f64::consts::PI / (2.0 * cost.a).sqrt();
        for w in peaks.windows(2) {
            assert!(((w[1] - w[0]) / period - 1.0).abs() < 0.01);
        }
    }

    #[test]
    fn blown_up_opinion_still_reports_mode() {
        let cost = QuadraticCost::new(-0.5, 0.2, 0.0, 0.2, 6.0).unwrap();
        let terminal = QuadraticTerminal::new(1.0, 0.0, 0.0).unwrap();
        let report = classify_outcome(&cost, &terminal, 0.0, &SolverOptions::default()).unwrap();
        let OutcomeKind::NoGlobalValue { blowup_time, .. } = report.kind else { panic!() };
        assert!(blowup_time.is_finite());
        assert_eq!(report.kind.mode_kind(), &OutcomeKind::OpinionForms { limit: 0.2 });
        assert!((report.audited_limit.unwrap() - 0.2).abs() < 1e-3);
    }

    #[test]
    fn vol_mapping() {
        let s = VolOpinionScenario {
            mu: 0.5,
            r: 0.1,
            q: 0.8,
            beta: 1.0,
            gamma: 0.0,
            delta: 0.5,
            horizon: 4.0,
            xi0: 0.5,
        };
        let (cost, terminal, init) = build_vol_problem(&s).unwrap();
        assert_eq!(init.kappa, 4.0);
        assert_eq!(init.mode(), 0.5);
        assert!(cost.a < 0.0);
        assert_eq!((cost.b, terminal.b_t, cost.c, terminal.c_t), (0.0, 0.0, 0.1, 0.1));
        let report = classify_halfline_outcome(&cost, &terminal, &init, &SolverOptions::default()).unwrap();
        let OutcomeKind::OpinionForms { limit } = report.kind else { panic!("{report:?}") };
        assert!((report.audited_limit.unwrap() - limit).abs() < TOL * 1e3);

        let cautious = VolOpinionScenario { q: -2.0, ..s };
        let (cost, terminal, init) = build_vol_problem(&cautious).unwrap();
        let report = classify_halfline_outcome(&cost, &terminal, &init, &SolverOptions::default()).unwrap();
        assert!(matches!(report.kind.mode_kind(), OutcomeKind::Oscillates { .. }));
    }

    #[test]
    fn not_convergent_without_penalty() {
        assert!(matches!(drift_opinion_limit(&fig(0.0)), Err(Error::NotConvergent { .. })));
        let s = DriftOpinionScenario { q: 0.9, gamma: 0.0, ..fig(0.0) };
        assert!((drift_opinion_limit(&s).unwrap() - s.r).abs() < 1e-15);
    }
}
