//! Subcommand bodies. Each writes its artifacts plus `summary.txt` into the
//! output directory and returns a short human-readable report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use mfg_core::audit::{audit_halfline_equilibrium, audit_scenario, combine, FormulaId, PaperFormulaAudit, Verdict};
use mfg_core::gaussian::{existence_horizon, guard_blowup_time};
use mfg_core::halfline::{solve_halfline, stationary_mode, HalfLineSolution};
use mfg_core::mc::{
    simulate_ensemble, simulate_halfline_ensemble, write_sample_paths, EnsembleConfig, EnsembleStats, HalfLineBoundary,
};
use mfg_core::merton::{
    build_drift_problem, build_vol_problem, classify_halfline_outcome, classify_outcome, drift_opinion_limit,
    figure1_scenarios, growth_rate, local_maxima, optimal_fraction, risk_coefficient_p, InvestorParams, OutcomeKind,
    OutcomeReport,
};
use mfg_core::pde::{self, PdeSolution};
use mfg_core::suite::random_suite;
use mfg_core::{
    ExistenceReport, GaussianInitial, GaussianSolution, HalfLineInitial, QuadraticCost, QuadraticTerminal, Regime,
    SolverOptions,
};

use crate::config::{Kind, ScenarioConfig};
use crate::output::{fmt_num, write_atomic, Summary, Table};
use crate::svg::{LinePlot, Series};
use crate::{Cli, CliError, Command};

pub const AUDIT_SEED: u64 = 20_240_601;
/// Gaussian fit quality every PDE level must reach.
pub const PDE_R2_THRESHOLD: f64 = 0.999;
/// Half-line PDE mass against `exp(K0)/K2`.
pub const PDE_HALFLINE_MASS_TOLERANCE: f64 = 5e-3;
/// `|mean - Q|` in units of the standard error.
pub const MC_MEAN_SIGMAS: f64 = 3.0;
pub const MC_VARIANCE_RELATIVE: f64 = 0.05;
/// Survival fraction: binomial sigmas plus an allowance for the Euler bias.
pub const MC_SURVIVAL_SIGMAS: f64 = 4.0;
pub const MC_SURVIVAL_BIAS: f64 = 2e-3;
/// KDE mode against `Q`, in bandwidths.
pub const MC_MODE_BANDWIDTHS: f64 = 3.0;

/// Long-time half-line scenario used by the equilibrium audit.
pub fn equilibrium_scenario() -> (QuadraticCost, QuadraticTerminal, HalfLineInitial) {
    (
        QuadraticCost { a: -2.0, b: 0.0, c: 0.0, delta: 0.5, horizon: 30.0 },
        QuadraticTerminal { a_t: 0.0, b_t: 0.0, c_t: 0.0 },
        HalfLineInitial { kappa: 4.0 },
    )
}

pub fn run(cli: &Cli) -> Result<String, CliError> {
    match &cli.command {
        Command::Gaussian { config } => {
            let cfg = load(config, Kind::Gaussian)?;
            gaussian(&cfg, &out_dir(cli, Some(&cfg))?, cli.svg)
        }
        Command::Halfline { config } => {
            let cfg = load(config, Kind::HalfLine)?;
            halfline(&cfg, &out_dir(cli, Some(&cfg))?, cli.svg)
        }
        Command::MertonDrift { config } => {
            let cfg = load(config, Kind::MertonDrift)?;
            merton_drift(&cfg, &out_dir(cli, Some(&cfg))?, cli.svg)
        }
        Command::MertonVol { config } => {
            let cfg = load(config, Kind::MertonVol)?;
            merton_vol(&cfg, &out_dir(cli, Some(&cfg))?, cli.svg)
        }
        Command::Verify { config, pde, mc, dump_field, dump_paths } => {
            let cfg = ScenarioConfig::load(config)?;
            let (run_pde, run_mc) = if *pde || *mc {
                (*pde, *mc)
            } else if cfg.oracles.pde || cfg.oracles.mc {
                (cfg.oracles.pde, cfg.oracles.mc)
            } else {
                (true, true)
            };
            let opts = VerifyOptions { pde: run_pde, mc: run_mc, dump_field: *dump_field, dump_paths: *dump_paths };
            verify(&cfg, &out_dir(cli, Some(&cfg))?, cli.svg, &opts)
        }
        Command::AuditFormulas { seed, count } => audit_formulas(*seed, *count, &out_dir(cli, None)?),
        Command::Figure1 { horizon, grid_points } => figure1(*horizon, *grid_points, &out_dir(cli, None)?, cli.svg),
    }
}

fn load(path: &Path, expected: Kind) -> Result<ScenarioConfig, CliError> {
    let cfg = ScenarioConfig::load(path)?;
    if cfg.kind != expected {
        return Err(CliError::Config(format!(
            "{} holds kind {}, this subcommand needs {}",
            path.display(),
            cfg.kind.name(),
            expected.name()
        )));
    }
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&ScenarioConfig>) -> Result<PathBuf, CliError> {
    let dir = cli.out.clone().or_else(|| cfg.and_then(|c| c.out.clone())).unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn solver_options(grid_points: usize) -> SolverOptions {
    SolverOptions::default().with_grid_points(grid_points)
}

fn write_svg(dir: &Path, name: &str, plot: &LinePlot) -> Result<(), CliError> {
    write_atomic(&dir.join(name), plot.render().as_bytes())?;
    Ok(())
}

fn existence_entries(s: &mut Summary, existence: &ExistenceReport) {
    s.text("regime", existence.regime.name());
    match existence.regime {
        Regime::Subcritical { k_minus } => s.num("k_minus", k_minus),
        Regime::Supercritical { k_plus } => s.num("k_plus", k_plus),
        Regime::Critical => s,
    };
    s.text("existence", if existence.global { "global" } else { "blowup" });
    s.opt("blowup_time", existence.blowup_time);
}

fn outcome_entries(s: &mut Summary, report: &OutcomeReport) {
    s.text("outcome", report.kind.name());
    s.text("mode_outcome", report.kind.mode_kind().name());
    match report.kind.mode_kind() {
        OutcomeKind::OpinionForms { limit } => {
            s.num("q_star", *limit);
        }
        OutcomeKind::Oscillates { angular_frequency, center } => {
            s.text("q_star", "none");
            s.num("angular_frequency", *angular_frequency);
            s.num("period", std::f64::consts::TAU / angular_frequency);
            s.num("oscillation_center", *center);
        }
        _ => {
            s.text("q_star", "none");
        }
    }
    s.opt("audited_limit", report.audited_limit);
}

fn audit_entries(s: &mut Summary, cost: &QuadraticCost, terminal: &QuadraticTerminal, q0: f64, opts: &SolverOptions) {
    match audit_scenario(cost, terminal, q0, opts) {
        Ok(audits) => {
            for a in audits {
                s.text(format!("verdict_{}", a.formula_id), a.verdict.name());
                s.num(format!("deviation_{}", a.formula_id), a.max_abs_deviation);
            }
        }
        Err(e) => {
            s.text("audit", format!("unavailable ({e})"));
        }
    }
}

fn gaussian_outputs(sol: &GaussianSolution, dir: &Path, svg: bool) -> Result<(), CliError> {
    match &sol.path {
        Some(p) => {
            let (b, k1) = (p.b.as_deref().unwrap_or(&[]), p.k1.as_deref().unwrap_or(&[]));
            Table::new()
                .column("t", &p.times)
                .column("A", &p.a)
                .column("B", b)
                .column("C", &p.c)
                .column("K2", &p.k2)
                .column("K1", k1)
                .column("K0", &p.k0)
                .column("Q", &sol.mode)
                .write(&dir.join("curves.csv"))?;
            if svg {
                let plot = LinePlot::new("Value coefficients", "t", "coefficient")
                    .with(Series::new("A", &p.times, &p.a))
                    .with(Series::new("B", &p.times, b));
                write_svg(dir, "coefficients.svg", &plot)?;
            }
        }
        None => Table::new().column("t", &sol.times).column("Q", &sol.mode).write(&dir.join("mode.csv"))?,
    }
    if svg {
        write_svg(dir, "mode.svg", &LinePlot::new("Density mode", "t", "Q").with(Series::new("Q", &sol.times, &sol.mode)))?;
    }
    Ok(())
}

fn halfline_outputs(sol: &HalfLineSolution, dir: &Path, svg: bool) -> Result<(), CliError> {
    match (&sol.path, sol.mass_curve()) {
        (Some(p), Some(mass)) => {
            Table::new()
                .column("t", &p.times)
                .column("A", &p.a)
                .column("C", &p.c)
                .column("K2", &p.k2)
                .column("K0", &p.k0)
                .column("Q", &sol.mode)
                .column("mass", &mass)
                .write(&dir.join("curves.csv"))?;
        }
        _ => Table::new().column("t", &sol.times).column("Q", &sol.mode).write(&dir.join("mode.csv"))?,
    }
    if svg {
        write_svg(dir, "mode.svg", &LinePlot::new("Density mode", "t", "Q").with(Series::new("Q", &sol.times, &sol.mode)))?;
    }
    Ok(())
}

fn first_last(v: &[f64]) -> (f64, f64) {
    (v[0], v[v.len() - 1])
}

fn gaussian(cfg: &ScenarioConfig, dir: &Path, svg: bool) -> Result<String, CliError> {
    let (cost, terminal, initial) = cfg.gaussian_problem()?.expect("gaussian kind");
    let opts = solver_options(cfg.grid_points);
    let sol = GaussianSolution::solve(&cost, &terminal, &initial, &opts)?;
    let outcome = classify_outcome(&cost, &terminal, initial.x0, &opts)?;
    let mut s = Summary::new();
    s.text("command", "gaussian");
    existence_entries(&mut s, &sol.existence);
    outcome_entries(&mut s, &outcome);
    let (q0, qt) = first_last(&sol.mode);
    s.num("q0", q0).num("q_final", qt);
    if let Some(mass) = sol.mass_curve() {
        s.num("max_mass_error", mass.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max));
    }
    audit_entries(&mut s, &cost, &terminal, initial.x0, &opts);
    gaussian_outputs(&sol, dir, svg)?;
    s.write(dir)?;
    if let Some(blowup_time) = sol.existence.blowup_time {
        return Err(CliError::Solver(mfg_core::Error::NonGlobalValue { blowup_time }));
    }
    Ok(format!("gaussian: {} scenario, Q(0)={q0} Q(T)={qt}; wrote {}", sol.existence.regime.name(), dir.display()))
}

fn halfline(cfg: &ScenarioConfig, dir: &Path, svg: bool) -> Result<String, CliError> {
    let (cost, terminal, initial) = cfg.halfline_problem()?.expect("halfline kind");
    let opts = solver_options(cfg.grid_points);
    let sol = solve_halfline(&cost, &terminal, &initial, &opts)?;
    let outcome = classify_halfline_outcome(&cost, &terminal, &initial, &opts)?;
    let mut s = Summary::new();
    s.text("command", "halfline");
    existence_entries(&mut s, &sol.existence);
    outcome_entries(&mut s, &outcome);
    let (q0, qt) = first_last(&sol.mode);
    s.num("q0", q0).num("q_final", qt);
    halfline_entries(&mut s, &sol);
    halfline_outputs(&sol, dir, svg)?;
    s.write(dir)?;
    if let Some(blowup_time) = sol.existence.blowup_time {
        return Err(CliError::Solver(mfg_core::Error::NonGlobalValue { blowup_time }));
    }
    Ok(format!("halfline: {} scenario, Q(0)={q0} Q(T)={qt}; wrote {}", sol.existence.regime.name(), dir.display()))
}

fn halfline_entries(s: &mut Summary, sol: &HalfLineSolution) {
    if let Ok(q) = stationary_mode(&sol.cost) {
        s.num("stationary_mode", q);
    }
    if let Some(mass) = sol.mass_curve() {
        s.num("mass_final", mass[mass.len() - 1]);
    }
    if let Some(curve) = sol.first_integral_curve() {
        let scale = curve.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        s.num("first_integral_drift", curve.iter().map(|v| (v - curve[0]).abs()).fold(0.0, f64::max) / scale);
    }
}

fn merton_drift(cfg: &ScenarioConfig, dir: &Path, svg: bool) -> Result<String, CliError> {
    let crate::config::Model::MertonDrift(sc) = cfg.model else { unreachable!("checked kind") };
    let (cost, terminal, initial) = build_drift_problem(&sc)?;
    let opts = solver_options(cfg.grid_points);
    let sol = GaussianSolution::solve(&cost, &terminal, &initial, &opts)?;
    let outcome = classify_outcome(&cost, &terminal, initial.x0, &opts)?;
    let investor = InvestorParams::new(sc.mu_bar, sc.sigma, sc.r, sc.q)?;
    let mut s = Summary::new();
    s.text("command", "merton-drift");
    s.num("optimal_fraction", optimal_fraction(&investor));
    s.num("growth_rate", growth_rate(&investor));
    s.num("risk_coefficient", sc.risk_coefficient());
    s.num("a", cost.a).num("b", cost.b).num("c", cost.c);
    s.num("a_t", terminal.a_t).num("b_t", terminal.b_t).num("c_t", terminal.c_t);
    existence_entries(&mut s, &sol.existence);
    outcome_entries(&mut s, &outcome);
    s.opt("drift_opinion_limit", drift_opinion_limit(&sc).ok());
    let (q0, qt) = first_last(&sol.mode);
    s.num("q0", q0).num("q_final", qt);
    gaussian_outputs(&sol, dir, svg)?;
    s.write(dir)?;
    Ok(format!("merton-drift: {} ({}); wrote {}", outcome.kind.name(), sol.existence.regime.name(), dir.display()))
}

fn merton_vol(cfg: &ScenarioConfig, dir: &Path, svg: bool) -> Result<String, CliError> {
    let crate::config::Model::MertonVol(sc) = cfg.model else { unreachable!("checked kind") };
    let (cost, terminal, initial) = build_vol_problem(&sc)?;
    let opts = solver_options(cfg.grid_points);
    let sol = solve_halfline(&cost, &terminal, &initial, &opts)?;
    let outcome = classify_halfline_outcome(&cost, &terminal, &initial, &opts)?;
    let mut s = Summary::new();
    s.text("command", "merton-vol");
    s.num("risk_coefficient", risk_coefficient_p(sc.mu, sc.r, sc.q));
    s.num("a", cost.a).num("c", cost.c).num("a_t", terminal.a_t).num("c_t", terminal.c_t);
    s.num("kappa", initial.kappa);
    existence_entries(&mut s, &sol.existence);
    outcome_entries(&mut s, &outcome);
    let (q0, qt) = first_last(&sol.mode);
    s.num("q0", q0).num("q_final", qt);
    halfline_entries(&mut s, &sol);
    halfline_outputs(&sol, dir, svg)?;
    s.write(dir)?;
    Ok(format!("merton-vol: {} ({}); wrote {}", outcome.kind.name(), sol.existence.regime.name(), dir.display()))
}

pub struct VerifyOptions {
    pub pde: bool,
    pub mc: bool,
    pub dump_field: bool,
    pub dump_paths: Option<usize>,
}

fn record_every(steps: usize) -> usize {
    let every = steps / 100;
    if every > 0 && steps % every == 0 {
        every
    } else {
        1
    }
}

fn verify(cfg: &ScenarioConfig, dir: &Path, svg: bool, v: &VerifyOptions) -> Result<String, CliError> {
    let o = &cfg.oracles;
    let opts = solver_options(o.nt);
    let mc_config = EnsembleConfig::new(o.n_agents, o.seed).with_steps(o.mc_steps, record_every(o.mc_steps));
    let mut s = Summary::new();
    let mut report = String::new();
    let mut failures = Vec::new();
    s.text("command", "verify");
    s.text("kind", cfg.kind.name());
    if let Some((cost, terminal, initial)) = cfg.gaussian_problem()? {
        let sol = GaussianSolution::solve(&cost, &terminal, &initial, &opts)?;
        existence_entries(&mut s, &sol.existence);
        if let Some(blowup_time) = sol.existence.blowup_time {
            s.write(dir)?;
            return Err(CliError::Solver(mfg_core::Error::NonGlobalValue { blowup_time }));
        }
        if v.pde {
            let start = Instant::now();
            let p = pde::solve_gaussian(&sol, o.nx, o.nt)?;
            let elapsed = start.elapsed().as_secs_f64();
            let ok = gaussian_pde_entries(&mut s, &sol, &p);
            if !ok {
                failures.push("pde");
            }
            let _ = writeln!(report, "pde: {} in {elapsed:.2} s", if ok { "agree" } else { "DISAGREE" });
            pde_outputs(dir, svg, v.dump_field, &p, &sol.mode, None)?;
        }
        if v.mc {
            let stats = simulate_ensemble(&sol.value, &cost, &initial, &mc_config)?;
            let density = sol.density.as_ref().expect("global");
            let exact: Vec<[f64; 2]> = stats
                .times
                .iter()
                .map(|&t| {
                    let [k2, k1, _] = density.at(t).expect("inside horizon");
                    [-k1 / (2.0 * k2), -1.0 / (2.0 * k2)]
                })
                .collect();
            let ok = gaussian_mc_entries(&mut s, &stats, &exact);
            if !ok {
                failures.push("mc");
            }
            let _ = writeln!(report, "mc: {}", if ok { "agree" } else { "DISAGREE" });
            let q: Vec<f64> = exact.iter().map(|e| e[0]).collect();
            let var: Vec<f64> = exact.iter().map(|e| e[1]).collect();
            Table::new()
                .column("t", &stats.times)
                .column("mean", &stats.mean)
                .column("variance", &stats.variance)
                .column("stderr_mean", &stats.stderr_mean)
                .column("skewness", &stats.skewness)
                .column("mode_kde", &stats.mode_kde)
                .column("Q", &q)
                .column("variance_exact", &var)
                .write(&dir.join("mc.csv"))?;
            if let Some(n) = v.dump_paths {
                let mut buf = Vec::new();
                write_sample_paths(&mut buf, &sol.value, &cost, &initial, &mc_config, n)?;
                write_atomic(&dir.join("mc_paths.csv"), &buf)?;
            }
            if svg {
                let plot = LinePlot::new("Ensemble mean against the mode", "t", "x")
                    .with(Series::new("Q", &stats.times, &q))
                    .with(Series::new("ensemble mean", &stats.times, &stats.mean).dashed())
                    .with(Series::new("KDE mode", &stats.times, &stats.mode_kde).dashed());
                write_svg(dir, "mc.svg", &plot)?;
            }
        }
    } else if let Some((cost, terminal, initial)) = cfg.halfline_problem()? {
        let sol = solve_halfline(&cost, &terminal, &initial, &opts)?;
        existence_entries(&mut s, &sol.existence);
        if let Some(blowup_time) = sol.existence.blowup_time {
            s.write(dir)?;
            return Err(CliError::Solver(mfg_core::Error::NonGlobalValue { blowup_time }));
        }
        if v.pde {
            let start = Instant::now();
            let p = pde::solve_halfline(&sol, o.nx, o.nt)?;
            let elapsed = start.elapsed().as_secs_f64();
            let mass = sol.mass_curve().expect("global");
            let ok = halfline_pde_entries(&mut s, &sol, &p, &mass);
            if !ok {
                failures.push("pde");
            }
            let _ = writeln!(report, "pde: {} in {elapsed:.2} s", if ok { "agree" } else { "DISAGREE" });
            pde_outputs(dir, svg, v.dump_field, &p, &sol.mode, Some(&mass))?;
        }
        if v.mc {
            let stats =
                simulate_halfline_ensemble(&sol.value, &cost, &initial, HalfLineBoundary::Absorbing, &mc_config)?;
            let density = sol.density.as_ref().expect("global");
            let exact: Vec<[f64; 2]> = stats
                .times
                .iter()
                .map(|&t| {
                    let [k2, k0] = density.eval(t).expect("inside horizon");
                    [k2.sqrt().recip(), k0.exp() / k2]
                })
                .collect();
            let ok = halfline_mc_entries(&mut s, &stats, &exact);
            if !ok {
                failures.push("mc");
            }
            let _ = writeln!(report, "mc: {}", if ok { "agree" } else { "DISAGREE" });
            let q: Vec<f64> = exact.iter().map(|e| e[0]).collect();
            let mass: Vec<f64> = exact.iter().map(|e| e[1]).collect();
            let survival = stats.survival();
            Table::new()
                .column("t", &stats.times)
                .column("survival", &survival)
                .column("mass", &mass)
                .column("mean", &stats.mean)
                .column("variance", &stats.variance)
                .column("mode_kde", &stats.mode_kde)
                .column("Q", &q)
                .write(&dir.join("mc.csv"))?;
            if svg {
                let plot = LinePlot::new("Surviving fraction", "t", "mass")
                    .with(Series::new("exp(K0)/K2", &stats.times, &mass))
                    .with(Series::new("ensemble", &stats.times, &survival).dashed());
                write_svg(dir, "mc.svg", &plot)?;
            }
        }
    } else {
        unreachable!("every kind maps to a full-line or half-line problem");
    }
    s.text("verdict", if failures.is_empty() { "agree" } else { "disagree" });
    s.write(dir)?;
    if !failures.is_empty() {
        return Err(CliError::Disagreement(format!("{} outside tolerance (see {})", failures.join(", "), dir.display())));
    }
    report.push_str(&format!("verify: all oracles agree; wrote {}", dir.display()));
    Ok(report)
}

fn gaussian_pde_entries(s: &mut Summary, sol: &GaussianSolution, p: &PdeSolution) -> bool {
    let dev = p.max_mode_deviation(&sol.mode);
    let tol = 2.0 * p.grid.dx();
    let r2 = p.gaussian_r2.iter().cloned().fold(f64::INFINITY, f64::min);
    let mass = p.mass_curve.iter().map(|m| (m - 1.0).abs()).fold(0.0, f64::max);
    let value = &sol.value;
    let phi = p.phi_deviation(
        |t, x| {
            let [a, b, c] = value.at(t).expect("global");
            (a * x + b) * x + c
        },
        1e-3,
    );
    let ok = dev <= tol && r2 >= PDE_R2_THRESHOLD;
    s.text("pde_nx", p.grid.nx).text("pde_nt", p.grid.nt).num("pde_dx", p.grid.dx());
    s.num("pde_max_mode_deviation", dev).num("pde_mode_tolerance", tol);
    s.num("pde_min_r2", r2).num("pde_r2_threshold", PDE_R2_THRESHOLD);
    s.num("pde_max_mass_error", mass).num("pde_phi_deviation", phi);
    s.text("pde_clipped_negatives", p.clipped_negatives);
    s.text("pde_verdict", if ok { "agree" } else { "disagree" });
    ok
}

fn halfline_pde_entries(s: &mut Summary, sol: &HalfLineSolution, p: &PdeSolution, mass: &[f64]) -> bool {
    let dev = p.max_mode_deviation(&sol.mode);
    let tol = 2.0 * p.grid.dx();
    let gap = p.mass_curve.iter().zip(mass).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let ok = dev <= tol && gap <= PDE_HALFLINE_MASS_TOLERANCE;
    s.text("pde_nx", p.grid.nx).text("pde_nt", p.grid.nt).num("pde_dx", p.grid.dx());
    s.num("pde_max_mode_deviation", dev).num("pde_mode_tolerance", tol);
    s.num("pde_max_mass_gap", gap).num("pde_mass_tolerance", PDE_HALFLINE_MASS_TOLERANCE);
    s.num("pde_absorbed_final", p.absorbed_curve[p.absorbed_curve.len() - 1]);
    s.text("pde_clipped_negatives", p.clipped_negatives);
    s.text("pde_verdict", if ok { "agree" } else { "disagree" });
    ok
}

fn pde_outputs(
    dir: &Path,
    svg: bool,
    dump_field: bool,
    p: &PdeSolution,
    mode: &[f64],
    mass: Option<&[f64]>,
) -> Result<(), CliError> {
    let mut table =
        Table::new().column("t", &p.times).column("Q", mode).column("Q_pde", &p.mode_curve).column("r2", &p.gaussian_r2);
    if let Some(mass) = mass {
        table = table.column("mass", mass);
    }
    table.column("mass_pde", &p.mass_curve).write(&dir.join("pde.csv"))?;
    if dump_field {
        let mut buf = Vec::new();
        p.write_csv(&mut buf)?;
        write_atomic(&dir.join("pde_field.csv"), &buf)?;
    }
    if svg {
        let plot = LinePlot::new("Mode: reduction against the PDE", "t", "Q")
            .with(Series::new("Riccati", &p.times, mode))
            .with(Series::new("PDE", &p.times, &p.mode_curve).dashed());
        write_svg(dir, "pde.svg", &plot)?;
    }
    Ok(())
}

fn gaussian_mc_entries(s: &mut Summary, stats: &EnsembleStats, exact: &[[f64; 2]]) -> bool {
    let mut z = 0.0_f64;
    let mut var_rel = 0.0_f64;
    let mut mode_bw = 0.0_f64;
    for (r, [q, var]) in exact.iter().enumerate() {
        z = z.max((stats.mean[r] - q).abs() / stats.stderr_mean[r]);
        var_rel = var_rel.max((stats.variance[r] / var - 1.0).abs());
        mode_bw = mode_bw.max((stats.mode_kde[r] - q).abs() / stats.bandwidth[r]);
    }
    let ok = z <= MC_MEAN_SIGMAS && var_rel <= MC_VARIANCE_RELATIVE;
    s.text("mc_agents", stats.n_agents).text("mc_seed", stats.seed).text("mc_records", stats.times.len());
    s.num("mc_max_mean_z", z).num("mc_mean_z_tolerance", MC_MEAN_SIGMAS);
    s.num("mc_max_variance_relative", var_rel).num("mc_variance_tolerance", MC_VARIANCE_RELATIVE);
    s.num("mc_max_skewness", stats.skewness.iter().map(|v| v.abs()).fold(0.0, f64::max));
    s.num("mc_max_mode_bandwidths", mode_bw);
    s.text("mc_verdict", if ok { "agree" } else { "disagree" });
    ok
}

fn halfline_mc_entries(s: &mut Summary, stats: &EnsembleStats, exact: &[[f64; 2]]) -> bool {
    let survival = stats.survival();
    let n = stats.n_agents as f64;
    let mut worst = 0.0_f64;
    let mut mode_bw = 0.0_f64;
    for (r, [q, mass]) in exact.iter().enumerate() {
        let band = MC_SURVIVAL_SIGMAS * (mass * (1.0 - mass) / n).sqrt() + MC_SURVIVAL_BIAS;
        worst = worst.max((survival[r] - mass).abs() / band);
        if stats.mode_kde[r].is_finite() {
            mode_bw = mode_bw.max((stats.mode_kde[r] - q).abs() / stats.bandwidth[r]);
        }
    }
    let ok = worst <= 1.0 && mode_bw <= MC_MODE_BANDWIDTHS;
    s.text("mc_agents", stats.n_agents).text("mc_seed", stats.seed).text("mc_records", stats.times.len());
    s.text("mc_boundary", "absorbing");
    s.num("mc_survival_final", survival[survival.len() - 1]);
    s.num("mc_max_survival_band_ratio", worst);
    s.num("mc_max_mode_bandwidths", mode_bw).num("mc_mode_tolerance_bandwidths", MC_MODE_BANDWIDTHS);
    s.text("mc_verdict", if ok { "agree" } else { "disagree" });
    ok
}

fn audit_line(label: &str, a: &PaperFormulaAudit) -> String {
    format!(
        "{label}{},{},{},{}\n",
        a.formula_id,
        fmt_num(a.max_abs_deviation),
        fmt_num(a.corrected_deviation),
        a.verdict.name()
    )
}

/// Closed-form against guard-based blow-up times, one case per regime.
pub fn horizon_cases() -> Vec<(&'static str, QuadraticCost, f64)> {
    let cost = |a: f64| QuadraticCost { a, b: 0.0, c: 0.0, delta: 0.2, horizon: 1.0 };
    vec![("supercritical", cost(2.0), 0.0), ("critical", cost(0.0), 1.0), ("subcritical", cost(-2.0), 2.0)]
}

fn audit_formulas(seed: u64, count: usize, dir: &Path) -> Result<String, CliError> {
    if count == 0 {
        return Err(CliError::Config("--count must be positive".into()));
    }
    let opts = SolverOptions::default();
    let suite = random_suite(seed, count);
    let mut all = Vec::new();
    let mut runs = String::from("scenario,regime,formula_id,max_abs_deviation,corrected_deviation,verdict\n");
    for (i, sc) in suite.iter().enumerate() {
        let audits = audit_scenario(&sc.cost, &sc.terminal, sc.initial.x0, &opts)?;
        for a in &audits {
            runs.push_str(&audit_line(&format!("{i},{},", sc.cost.regime().name()), a));
        }
        all.extend(audits);
    }
    write_atomic(&dir.join("audit_runs.csv"), runs.as_bytes())?;
    let combined = combine(&all);
    let mut table = String::from("formula_id,max_abs_deviation,corrected_deviation,verdict\n");
    let mut s = Summary::new();
    s.text("command", "audit-formulas").text("seed", seed).text("scenarios", count);
    for a in &combined {
        table.push_str(&audit_line("", a));
        s.text(format!("verdict_{}", a.formula_id), a.verdict.name());
    }
    for id in FormulaId::ALL {
        if !combined.iter().any(|a| a.formula_id == id) {
            s.text(format!("verdict_{id}"), "not-exercised");
        }
    }
    write_atomic(&dir.join("audit.csv"), table.as_bytes())?;

    let mut horizons = String::from("regime,a,a_t,horizon,closed_form,guard,difference\n");
    for (label, cost, a_t) in horizon_cases() {
        let closed = existence_horizon(&cost, a_t).blowup_time.unwrap_or(f64::NAN);
        let guard = guard_blowup_time(&cost, a_t, &opts.ode)?.unwrap_or(f64::NAN);
        let _ = writeln!(
            horizons,
            "{label},{},{},{},{},{},{}",
            fmt_num(cost.a),
            fmt_num(a_t),
            fmt_num(cost.horizon),
            fmt_num(closed),
            fmt_num(guard),
            fmt_num((closed - guard).abs())
        );
        s.num(format!("horizon_gap_{label}"), (closed - guard).abs());
    }
    write_atomic(&dir.join("horizons.csv"), horizons.as_bytes())?;

    let (cost, terminal, initial) = equilibrium_scenario();
    let eq = audit_halfline_equilibrium(&cost, &terminal, &initial, 1e-3, &opts)?;
    s.num("equilibrium_observed", eq.observed).num("equilibrium_tolerance", eq.tolerance);
    for (i, c) in eq.candidates.iter().enumerate() {
        let tag = if c.printed { "printed" } else { "derived" };
        s.text(format!("equilibrium_candidate_{i}"), format!("{} = {} ({tag})", c.label, fmt_num(c.value)));
    }
    s.text("equilibrium_matching", eq.matching.join("; "));
    s.opt("equilibrium_winner", eq.winner());
    s.write(dir)?;

    let mut report = String::new();
    for a in &combined {
        let _ = writeln!(report, "{:<7} {:<23} printed {:.3e}", a.formula_id.name(), a.verdict.name(), a.max_abs_deviation);
    }
    let _ = write!(report, "half-line equilibrium: observed {:.6}, matches {}", eq.observed, eq.matching.join("; "));
    let eq10 = combined.iter().find(|a| a.formula_id == FormulaId::Eq10);
    if eq10.map(|a| a.verdict) != Some(Verdict::Matches) {
        return Err(CliError::Disagreement(format!("Eq10 did not verify; the audit machinery is suspect\n{report}")));
    }
    Ok(report)
}

/// Mean spacing between consecutive local maxima.
pub fn peak_spacing(times: &[f64], values: &[f64]) -> Option<f64> {
    let peaks = local_maxima(times, values);
    (peaks.len() >= 2).then(|| (peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64)
}

fn figure1(horizon: f64, grid_points: usize, dir: &Path, svg: bool) -> Result<String, CliError> {
    if !(horizon > 0.0 && horizon.is_finite()) || grid_points < 3 {
        return Err(CliError::Config(format!("need horizon > 0 and grid_points >= 3 (got {horizon}, {grid_points})")));
    }
    let opts = solver_options(grid_points);
    let mut s = Summary::new();
    s.text("command", "figure1").num("horizon", horizon);
    let mut curves = Vec::new();
    let mut report = String::new();
    let mut times = Vec::new();
    let scenarios = figure1_scenarios().map(|sc| mfg_core::merton::DriftOpinionScenario { horizon, ..sc });
    for sc in &scenarios {
        let (cost, terminal, initial): (QuadraticCost, QuadraticTerminal, GaussianInitial) = build_drift_problem(sc)?;
        let sol = GaussianSolution::solve(&cost, &terminal, &initial, &opts)?;
        let outcome = classify_outcome(&cost, &terminal, initial.x0, &opts)?;
        let g = format!("gamma{}", sc.gamma);
        let plateau = sol.mode[(sol.mode.len() - 1) / 2];
        s.num(format!("{g}_a"), cost.a);
        s.text(format!("{g}_regime"), sol.existence.regime.name());
        s.text(format!("{g}_outcome"), outcome.kind.name());
        s.text(format!("{g}_mode_outcome"), outcome.kind.mode_kind().name());
        s.opt(format!("{g}_blowup_time"), sol.existence.blowup_time);
        s.opt(format!("{g}_limit"), drift_opinion_limit(sc).ok());
        s.num(format!("{g}_plateau"), plateau);
        // a settling curve has no peaks, only rounding ripples on its plateau
        let oscillates = matches!(outcome.kind.mode_kind(), OutcomeKind::Oscillates { .. });
        let spacing = if oscillates { peak_spacing(&sol.times, &sol.mode) } else { None };
        s.opt(format!("{g}_peak_spacing"), spacing);
        if let OutcomeKind::Oscillates { angular_frequency, .. } = outcome.kind.mode_kind() {
            s.num(format!("{g}_period"), std::f64::consts::TAU / angular_frequency);
        }
        let _ = writeln!(
            report,
            "gamma={}: {} (mode {}), Q(T/2) = {plateau:.6}{}",
            sc.gamma,
            outcome.kind.name(),
            outcome.kind.mode_kind().name(),
            spacing.map(|p| format!(", peak spacing {p:.5}")).unwrap_or_default()
        );
        times = sol.times.clone();
        curves.push(sol.mode);
    }
    s.num("mu_bar", scenarios[0].mu_bar);
    Table::new()
        .column("t", &times)
        .column("gamma0", &curves[0])
        .column("gamma1", &curves[1])
        .column("gamma2", &curves[2])
        .write(&dir.join("figure1.csv"))?;
    if svg {
        let mu_bar = vec![scenarios[0].mu_bar; times.len()];
        let mut plot = LinePlot::new("Drift opinion mode", "t", "mode of the believed drift");
        for (sc, c) in scenarios.iter().zip(&curves) {
            plot = plot.with(Series::new(format!("gamma = {}", sc.gamma), &times, c));
        }
        plot = plot.with(Series::new("true drift", &times, &mu_bar).dashed());
        write_svg(dir, "figure1.svg", &plot)?;
    }
    s.write(dir)?;
    report.push_str(&format!("wrote {}", dir.display()));
    Ok(report)
}
