use mfg_core::audit::{audit_scenario, combine, FormulaId, Verdict};
use mfg_core::diagnostics::{gaussian_residuals, halfline_residuals};
use mfg_core::gaussian::log_quadratic_mass;
use mfg_core::halfline::solve_halfline;
use mfg_core::suite::random_suite;
use mfg_core::{GaussianSolution, SolverOptions};

const SEED: u64 = 20_240_601;

#[test]
fn residuals_are_small_on_every_draw() {
    let opts = SolverOptions::default();
    for s in random_suite(SEED, 5) {
        let sol = GaussianSolution::solve(&s.cost, &s.terminal, &s.initial, &opts).unwrap();
        let res = gaussian_residuals(&sol).expect("suite draws are global");
        for (name, r) in res.named() {
            assert!(r <= 1e-6, "{name} residual {r:e} for {s:?}");
        }
        let (cost, terminal, init) = s.halfline();
        let half = solve_halfline(&cost, &terminal, &init, &opts).unwrap();
        for (name, r) in halfline_residuals(&half).unwrap().named() {
            assert!(r <= 1e-6, "half-line {name} residual {r:e} for {s:?}");
        }
    }
}

#[test]
fn full_line_mass_and_first_integral_are_conserved() {
    let opts = SolverOptions::default();
    for s in random_suite(SEED, 5) {
        let sol = GaussianSolution::solve(&s.cost, &s.terminal, &s.initial, &opts).unwrap();
        let path = sol.path.as_ref().unwrap();
        let k1 = path.k1.as_ref().unwrap();
        for i in 0..path.len() {
            let mass = log_quadratic_mass([path.k2[i], k1[i], path.k0[i]]);
            assert!((mass - 1.0).abs() <= 1e-8, "mass {mass} at t={}", path.times[i]);
        }
        let (cost, terminal, init) = s.halfline();
        let half = solve_halfline(&cost, &terminal, &init, &opts).unwrap();
        let curve = half.first_integral_curve().unwrap();
        let scale = curve.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        let drift = curve.iter().map(|v| (v - curve[0]).abs()).fold(0.0, f64::max) / scale;
        assert!(drift <= 1e-8, "first integral drift {drift:e} for {s:?}");
    }
}

#[test]
fn every_formula_gets_a_verdict() {
    let opts = SolverOptions::default();
    let mut audits = Vec::new();
    for s in random_suite(SEED, 6) {
        audits.extend(audit_scenario(&s.cost, &s.terminal, s.initial.x0, &opts).unwrap());
    }
    let combined = combine(&audits);
    let ids: Vec<FormulaId> = combined.iter().map(|a| a.formula_id).collect();
    assert_eq!(ids, FormulaId::ALL.to_vec());
    let eq10 = combined.iter().find(|a| a.formula_id == FormulaId::Eq10).unwrap();
    assert_eq!(eq10.verdict, Verdict::Matches);
    assert!(eq10.max_abs_deviation <= 1e-6);
    for a in &combined {
        assert_ne!(a.verdict, Verdict::Disagrees, "{a:?}");
    }
}
