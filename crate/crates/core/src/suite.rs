//! Seeded random scenarios with a global value function.
//!
//! Draws cycle through the subcritical, critical (`a = 0` exactly) and
//! supercritical regimes so that every closed form gets exercised. Ranges:
//!
//! | parameter | range |
//! |-----------|-------|
//! | `a` (sub) | `[-3, -0.2]` |
//! | `a` (super) | `[0.1, 1.5]` |
//! | `b`, `c`, `x0` | `[-1, 1]` |
//! | `delta` | `[0.1, 0.5]` |
//! | `lambda` | `[0.3, 1]` |
//! | `kappa` | `[0.5, 4]` |
//! | `A_T` | `[-0.5, 0.5]`, capped at `0.9 k` below the subcritical pole |
//! | `B_T`, `C_T` | `[-0.5, 0.5]` |
//! | `T` | `[0.5, 2]`, shrunk to `0.8` of the blow-up horizon if needed |

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::gaussian::existence_horizon;
use crate::scenario::{classify_regime, GaussianInitial, HalfLineInitial, QuadraticCost, QuadraticTerminal, Regime};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteScenario {
    pub cost: QuadraticCost,
    pub terminal: QuadraticTerminal,
    pub initial: GaussianInitial,
    pub kappa: f64,
}

impl SuiteScenario {
    /// Even projection (`b = B_T = 0`) for the half-line solver.
    pub fn halfline(&self) -> (QuadraticCost, QuadraticTerminal, HalfLineInitial) {
        let cost = QuadraticCost { b: 0.0, ..self.cost };
        let terminal = QuadraticTerminal { b_t: 0.0, ..self.terminal };
        (cost, terminal, HalfLineInitial { kappa: self.kappa })
    }
}

/// Horizon at which `A` blows up when integrated back from `A_T`, if any.
fn time_to_pole(a: f64, a_t: f64) -> Option<f64> {
    let probe = QuadraticCost { a, b: 0.0, c: 0.0, delta: 1.0, horizon: 1e6 };
    existence_horizon(&probe, a_t).blowup_time.map(|t| 1e6 - t)
}

pub fn random_suite(seed: u64, count: usize) -> Vec<SuiteScenario> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let a: f64 = match i % 3 {
                0 => rng.random_range(-3.0..-0.2),
                1 => 0.0,
                _ => rng.random_range(0.1..1.5),
            };
            let mut a_t: f64 = rng.random_range(-0.5..0.5);
            if a < 0.0 {
                a_t = a_t.min(0.9 * (-0.5 * a).sqrt());
            }
            let mut horizon: f64 = rng.random_range(0.5..2.0);
            if let Some(tau) = time_to_pole(a, a_t) {
                horizon = horizon.min(0.8 * tau);
            }
            let cost = QuadraticCost {
                a,
                b: rng.random_range(-1.0..1.0),
                c: rng.random_range(-1.0..1.0),
                delta: rng.random_range(0.1..0.5),
                horizon,
            };
            let terminal =
                QuadraticTerminal { a_t, b_t: rng.random_range(-0.5..0.5), c_t: rng.random_range(-0.5..0.5) };
            let x0 = rng.random_range(-1.0..1.0);
            let lambda = rng.random_range(0.3..1.0);
            let kappa = rng.random_range(0.5..4.0);
            SuiteScenario {
                cost,
                terminal,
                initial: GaussianInitial::new(x0, lambda).expect("ranges are valid"),
                kappa,
            }
        })
        .collect()
}

/// Regime names of a suite, for reports.
pub fn regimes(suite: &[SuiteScenario]) -> Vec<Regime> {
    suite.iter().map(|s| classify_regime(&s.cost)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_global() {
        let s1 = random_suite(7, 9);
        assert_eq!(s1, random_suite(7, 9));
        for s in &s1 {
            s.cost.validate().unwrap();
            assert!(existence_horizon(&s.cost, s.terminal.a_t).global, "{s:?}");
        }
        let r = regimes(&s1);
        assert!(matches!(r[0], Regime::Subcritical { .. }));
        assert_eq!(r[1], Regime::Critical);
        assert!(matches!(r[2], Regime::Supercritical { .. }));
    }
}
