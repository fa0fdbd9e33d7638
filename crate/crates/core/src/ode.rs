//! Explicit adaptive Runge–Kutta integration with dense output.
//!
//! The engine is the Dormand–Prince 5(4) pair with Hairer's fourth-order
//! continuous extension, so every accepted step can be evaluated at any
//! interior time. Integration may run forward or backward in time.
//!
//! A state whose max-norm reaches [`OdeOptions::guard`] is treated as a
//! finite-time blow-up: the crossing time is refined by bisection on the
//! dense output of the offending step and reported instead of continuing.

use crate::error::OdeError;

/// Step-size policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepControl {
    /// Local error per step bounded by `atol + rtol * |y|` (RMS over components).
    Adaptive { rtol: f64, atol: f64 },
    /// Constant step magnitude; the final step is shortened to land on `t_end`.
    Fixed { step: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub control: StepControl,
    /// Max-norm at which the state is declared to have blown up.
    pub guard: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            control: StepControl::Adaptive { rtol: 1e-10, atol: 1e-12 },
            guard: DEFAULT_GUARD,
            max_steps: 2_000_000,
        }
    }
}

impl OdeOptions {
    pub fn adaptive(rtol: f64, atol: f64) -> Self {
        Self { control: StepControl::Adaptive { rtol, atol }, ..Self::default() }
    }

    pub fn fixed(step: f64) -> Self {
        Self { control: StepControl::Fixed { step }, ..Self::default() }
    }
}

pub const DEFAULT_GUARD: f64 = 1e8;

/// Absolute accuracy of the bisected blow-up time.
const BLOWUP_TIME_TOL: f64 = 1e-9;
/// Steps shorter than this fraction of the span count as underflow.
const UNDERFLOW_FRACTION: f64 = 1e-14;

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone, Copy)]
struct DenseStep<const N: usize> {
    t0: f64,
    h: f64,
    coeffs: [[f64; N]; 5],
}

impl<const N: usize> DenseStep<N> {
    fn eval(&self, t: f64) -> [f64; N] {
        let theta = ((t - self.t0) / self.h).clamp(0.0, 1.0);
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.coeffs;
        std::array::from_fn(|i| {
            r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])))
        })
    }
}

/// Dense solution of an initial value problem.
///
/// Valid on the closed interval between [`t_start`](Self::t_start) and
/// [`t_end`](Self::t_end); the latter is the blow-up time when integration
/// stopped at the guard.
#[derive(Debug, Clone)]
pub struct Trajectory<const N: usize> {
    steps: Vec<DenseStep<N>>,
    t_start: f64,
    t_end: f64,
    y_start: [f64; N],
}

impl<const N: usize> Trajectory<N> {
    /// Degenerate trajectory covering the single instant `t`.
    pub fn point(t: f64, y: [f64; N]) -> Self {
        Self { steps: Vec::new(), t_start: t, t_end: t, y_start: y }
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn accepted_steps(&self) -> usize {
        self.steps.len()
    }

    fn direction(&self) -> f64 {
        (self.t_end - self.t_start).signum()
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = self.bounds();
        let slack = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
        t >= lo - slack && t <= hi + slack
    }

    /// `(min, max)` of the covered time interval.
    pub fn bounds(&self) -> (f64, f64) {
        if self.t_start <= self.t_end {
            (self.t_start, self.t_end)
        } else {
            (self.t_end, self.t_start)
        }
    }

    /// Dense-output value at `t`, or `None` outside the covered interval.
    pub fn eval(&self, t: f64) -> Option<[f64; N]> {
        if !self.contains(t) {
            return None;
        }
        if self.steps.is_empty() {
            return Some(self.y_start);
        }
        let dir = self.direction();
        let s = (t - self.t_start) * dir;
        let idx = self
            .steps
            .partition_point(|st| (st.t0 - self.t_start) * dir <= s)
            .saturating_sub(1);
        Some(self.steps[idx].eval(t))
    }

    /// Values on `times`; panics if any time lies outside the trajectory.
    pub fn sample(&self, times: &[f64]) -> Vec<[f64; N]> {
        times
            .iter()
            .map(|&t| {
                self.eval(t)
                    .unwrap_or_else(|| panic!("t = {t} outside trajectory {:?}", self.bounds()))
            })
            .collect()
    }

    /// One component on `times`.
    pub fn component(&self, index: usize, times: &[f64]) -> Vec<f64> {
        self.sample(times).into_iter().map(|y| y[index]).collect()
    }
}

/// `n` equispaced points from `t0` to `t1` inclusive, with exact endpoints.
pub fn uniform_grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "a grid needs at least two points");
    let h = (t1 - t0) / (n - 1) as f64;
    let mut grid: Vec<f64> = (0..n).map(|i| t0 + h * i as f64).collect();
    grid[n - 1] = t1;
    grid
}

/// Integrates `y' = field(t, y)` from `t_start` to `t_end` (either direction).
///
/// A guard crossing is an error here; use [`integrate_until_blowup`] to keep
/// the partial trajectory.
pub fn integrate<const N: usize, F>(
    field: F,
    y0: [f64; N],
    t_start: f64,
    t_end: f64,
    opts: &OdeOptions,
) -> Result<Trajectory<N>, OdeError>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    match integrate_until_blowup(field, y0, t_start, t_end, opts)? {
        (traj, None) => Ok(traj),
        (_, Some(time)) => Err(OdeError::BlowUpDetected { time }),
    }
}

/// Like [`integrate`], but a guard crossing ends the trajectory at the
/// crossing time, which is returned alongside it.
pub fn integrate_until_blowup<const N: usize, F>(
    field: F,
    y0: [f64; N],
    t_start: f64,
    t_end: f64,
    opts: &OdeOptions,
) -> Result<(Trajectory<N>, Option<f64>), OdeError>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let span = t_end - t_start;
    if span == 0.0 {
        return Err(OdeError::EmptySpan(t_start));
    }
    let dir = span.signum();
    let mut traj = Trajectory { steps: Vec::new(), t_start, t_end, y_start: y0 };
    if !is_below_guard(&y0, opts.guard) {
        traj.t_end = t_start;
        return Ok((traj, Some(t_start)));
    }

    let mut t = t_start;
    let mut y = y0;
    let mut k1 = field(t, &y);
    let mut h = match opts.control {
        StepControl::Adaptive { rtol, atol } => initial_step(&field, t, &y, &k1, span, rtol, atol),
        StepControl::Fixed { step } => step.abs().min(span.abs()) * dir,
    };
    let min_step = UNDERFLOW_FRACTION * span.abs();
    let mut rejected_last = false;

    for _ in 0..opts.max_steps {
        let remaining = t_end - t;
        if remaining * dir <= 0.0 {
            return Ok((traj, None));
        }
        let last = h.abs() >= remaining.abs();
        if last {
            h = remaining;
        }
        let trial = dopri_step(&field, t, &y, &k1, h);

        let accept = match opts.control {
            StepControl::Fixed { .. } => true,
            StepControl::Adaptive { rtol, atol } => {
                let err = error_norm(&trial.err, &y, &trial.y_new, rtol, atol);
                if err <= 1.0 {
                    let grow = if rejected_last { 1.0 } else { 5.0 };
                    let factor = if err == 0.0 { grow } else { (0.9 * err.powf(-0.2)).clamp(0.2, grow) };
                    rejected_last = false;
                    h *= factor;
                    true
                } else {
                    let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                    h *= factor;
                    rejected_last = true;
                    if h.abs() < min_step {
                        return Err(OdeError::StepUnderflow { time: t, step: h.abs() });
                    }
                    false
                }
            }
        };
        if !accept {
            continue;
        }

        let step = DenseStep { t0: t, h: trial.h, coeffs: trial.dense };
        if !is_below_guard(&trial.y_new, opts.guard) {
            let crossing = if trial.y_new.iter().all(|v| v.is_finite()) {
                bisect_guard(&step, opts.guard)
            } else {
                t
            };
            traj.steps.push(step);
            traj.t_end = crossing;
            return Ok((traj, Some(crossing)));
        }
        traj.steps.push(step);
        t = if last { t_end } else { t + trial.h };
        y = trial.y_new;
        k1 = trial.k7;
        if let StepControl::Fixed { step } = opts.control {
            h = step.abs() * dir;
        }
    }
    Err(OdeError::TooManySteps { max_steps: opts.max_steps, target: t_end })
}

struct Trial<const N: usize> {
    h: f64,
    y_new: [f64; N],
    k7: [f64; N],
    err: [f64; N],
    dense: [[f64; N]; 5],
}

fn dopri_step<const N: usize, F>(field: &F, t: f64, y: &[f64; N], k1: &[f64; N], h: f64) -> Trial<N>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let stage = |coefs: &[(f64, &[f64; N])]| -> [f64; N] {
        std::array::from_fn(|i| y[i] + h * coefs.iter().map(|(c, k)| c * k[i]).sum::<f64>())
    };
    let k2 = field(t + C2 * h, &stage(&[(A21, k1)]));
    let k3 = field(t + C3 * h, &stage(&[(A31, k1), (A32, &k2)]));
    let k4 = field(t + C4 * h, &stage(&[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = field(t + C5 * h, &stage(&[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]));
    let k6 = field(t + h, &stage(&[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]));
    let y_new = stage(&[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = field(t + h, &y_new);

    let err = std::array::from_fn(|i| {
        h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
    });
    let ydiff: [f64; N] = std::array::from_fn(|i| y_new[i] - y[i]);
    let bspl: [f64; N] = std::array::from_fn(|i| h * k1[i] - ydiff[i]);
    let dense = [
        *y,
        ydiff,
        bspl,
        std::array::from_fn(|i| ydiff[i] - h * k7[i] - bspl[i]),
        std::array::from_fn(|i| {
            h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i])
        }),
    ];
    Trial { h, y_new, k7, err, dense }
}

fn error_norm<const N: usize>(err: &[f64; N], y: &[f64; N], y_new: &[f64; N], rtol: f64, atol: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..N {
        let sk = atol + rtol * y[i].abs().max(y_new[i].abs());
        acc += (err[i] / sk).powi(2);
    }
    let norm = (acc / N as f64).sqrt();
    if norm.is_finite() {
        norm
    } else {
        f64::INFINITY
    }
}

fn initial_step<const N: usize, F>(
    field: &F,
    t: f64,
    y: &[f64; N],
    f0: &[f64; N],
    span: f64,
    rtol: f64,
    atol: f64,
) -> f64
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let dir = span.signum();
    let scaled = |v: &[f64; N]| -> f64 {
        let s: f64 = (0..N).map(|i| (v[i] / (atol + rtol * y[i].abs())).powi(2)).sum();
        (s / N as f64).sqrt()
    };
    let d0 = scaled(y);
    let d1 = scaled(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span.abs());
    let y1: [f64; N] = std::array::from_fn(|i| y[i] + dir * h0 * f0[i]);
    let f1 = field(t + dir * h0, &y1);
    let diff: [f64; N] = std::array::from_fn(|i| f1[i] - f0[i]);
    let d2 = scaled(&diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span.abs()) * dir
}

fn is_below_guard<const N: usize>(y: &[f64; N], guard: f64) -> bool {
    y.iter().all(|v| v.is_finite() && v.abs() < guard)
}

fn bisect_guard<const N: usize>(step: &DenseStep<N>, guard: f64) -> f64 {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while (hi - lo) * step.h.abs() > BLOWUP_TIME_TOL && hi - lo > f64::EPSILON {
        let mid = 0.5 * (lo + hi);
        if is_below_guard(&step.eval(step.t0 + mid * step.h), guard) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    step.t0 + hi * step.h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> OdeOptions {
        OdeOptions::adaptive(1e-11, 1e-13)
    }

    #[test]
    fn zero_field_keeps_state() {
        let traj = integrate(|_, _| [0.0], [3.7], 0.0, 1.0, &tight()).unwrap();
        for y in traj.sample(&uniform_grid(0.0, 1.0, 11)) {
            assert_eq!(y[0], 3.7);
        }
    }

    #[test]
    fn exponential_growth_reaches_e() {
        let traj = integrate(|_, y| [y[0]], [1.0], 0.0, 1.0, &tight()).unwrap();
        let y1 = traj.eval(1.0).unwrap()[0];
        assert!((y1 - std::f64::consts::E).abs() < 1e-9, "{y1}");
    }

    #[test]
    fn backward_riccati_without_linear_term() {
        // A' = -2A^2, A(1) = 0.25  =>  A(t) = 1 / (2t + 2)
        let traj = integrate(|_, y| [-2.0 * y[0] * y[0]], [0.25], 1.0, 0.0, &tight()).unwrap();
        let a0 = traj.eval(0.0).unwrap()[0];
        assert!((a0 - 0.5).abs() < 1e-10, "{a0}");
        for t in uniform_grid(0.0, 1.0, 17) {
            let exact = 1.0 / (2.0 * t + 2.0);
            assert!((traj.eval(t).unwrap()[0] - exact).abs() < 1e-9);
        }
    }

    #[test]
    fn dense_output_tracks_oscillator_between_steps() {
        let traj = integrate(|_, y| [y[1], -y[0]], [0.0, 1.0], 0.0, 10.0, &tight()).unwrap();
        for t in uniform_grid(0.0, 10.0, 997) {
            let y = traj.eval(t).unwrap();
            assert!((y[0] - t.sin()).abs() < 1e-8, "t={t}");
            assert!((y[1] - t.cos()).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn blowup_is_reported_with_refined_time() {
        // A' = -2A^2 backward from A(1) = 1 blows up at t = 0.5.
        let err = integrate(|_, y| [-2.0 * y[0] * y[0]], [1.0], 1.0, 0.0, &tight()).unwrap_err();
        match err {
            OdeError::BlowUpDetected { time } => assert!((time - 0.5).abs() < 1e-6, "{time}"),
            other => panic!("unexpected {other:?}"),
        }
        let (traj, t_star) =
            integrate_until_blowup(|_, y| [-2.0 * y[0] * y[0]], [1.0], 1.0, 0.0, &tight()).unwrap();
        let t_star = t_star.unwrap();
        assert_eq!(traj.t_end(), t_star);
        assert!(traj.eval(0.4).is_none());
        assert!((traj.eval(0.75).unwrap()[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn fixed_steps_land_on_endpoint() {
        let traj = integrate(|_, y| [-y[0]], [1.0], 0.0, 1.0, &OdeOptions::fixed(0.3)).unwrap();
        assert_eq!(traj.accepted_steps(), 4);
        assert!((traj.eval(1.0).unwrap()[0] - (-1.0_f64).exp()).abs() < 1e-5);
    }

    #[test]
    fn fixed_step_halving_shows_fifth_order() {
        let err = |h: f64| {
            let traj = integrate(|_, y| [y[0]], [1.0], 0.0, 1.0, &OdeOptions::fixed(h)).unwrap();
            (traj.eval(1.0).unwrap()[0] - std::f64::consts::E).abs()
        };
        let ratio = err(0.1) / err(0.05);
        // nominal order 4 guaranteed, 5 observed
        assert!(ratio >= 16.0, "ratio {ratio}");
    }

    #[test]
    fn tighter_tolerance_shrinks_error() {
        let err = |rtol: f64| {
            let traj = integrate(|_, y| [y[0]], [1.0], 0.0, 1.0, &OdeOptions::adaptive(rtol, rtol)).unwrap();
            (traj.eval(1.0).unwrap()[0] - std::f64::consts::E).abs()
        };
        let errors: Vec<f64> = [1e-4, 1e-6, 1e-8, 1e-10].iter().map(|&r| err(r)).collect();
        for w in errors.windows(2) {
            assert!(w[1] < w[0], "{errors:?}");
        }
        assert!(errors[0] / errors[3] > 1e4, "{errors:?}");
    }

    #[test]
    fn forward_then_backward_round_trip() {
        let opts = OdeOptions::adaptive(1e-10, 1e-12);
        let field = |t: f64, y: &[f64; 2]| [y[1], -y[0] + 0.3 * t.cos()];
        let fwd = integrate(field, [0.4, -0.2], 0.0, 3.0, &opts).unwrap();
        let y_end = fwd.eval(3.0).unwrap();
        let back = integrate(field, y_end, 3.0, 0.0, &opts).unwrap();
        let y0 = back.eval(0.0).unwrap();
        assert!((y0[0] - 0.4).abs() < 1e-9 && (y0[1] + 0.2).abs() < 1e-9, "{y0:?}");
    }

    #[test]
    fn empty_span_rejected() {
        assert_eq!(
            integrate(|_, y| [y[0]], [1.0], 2.0, 2.0, &tight()).unwrap_err(),
            OdeError::EmptySpan(2.0)
        );
    }
}
