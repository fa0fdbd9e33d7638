//! Flat `key = value` scenario files.
//!
//! ```text
//! # audit scenario
//! kind = gaussian
//! a = -2
//! ...
//! ```
//!
//! One `kind` selects the key set. Every key is validated against it and
//! unknown or repeated keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mfg_core::merton::{build_drift_problem, build_vol_problem, DriftOpinionScenario, VolOpinionScenario};
use mfg_core::{GaussianInitial, HalfLineInitial, QuadraticCost, QuadraticTerminal};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Gaussian,
    HalfLine,
    MertonDrift,
    MertonVol,
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::Gaussian => "gaussian",
            Kind::HalfLine => "halfline",
            Kind::MertonDrift => "merton-drift",
            Kind::MertonVol => "merton-vol",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Kind::Gaussian, Kind::HalfLine, Kind::MertonDrift, Kind::MertonVol].into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Gaussian { cost: QuadraticCost, terminal: QuadraticTerminal, initial: GaussianInitial },
    HalfLine { cost: QuadraticCost, terminal: QuadraticTerminal, initial: HalfLineInitial },
    MertonDrift(DriftOpinionScenario),
    MertonVol(VolOpinionScenario),
}

/// Oracle toggles and grid sizes; only read for full-line and half-line kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSettings {
    pub pde: bool,
    pub mc: bool,
    pub nx: usize,
    pub nt: usize,
    pub n_agents: usize,
    pub mc_steps: usize,
    pub seed: u64,
}

impl Default for OracleSettings {
    fn default() -> Self {
        Self { pde: false, mc: false, nx: 512, nt: 512, n_agents: 100_000, mc_steps: 1000, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: Kind,
    pub model: Model,
    pub oracles: OracleSettings,
    /// Points of the output time grid.
    pub grid_points: usize,
    pub out: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        text.parse()
    }

    /// Full-line problem behind the model, if it has one.
    pub fn gaussian_problem(&self) -> Result<Option<(QuadraticCost, QuadraticTerminal, GaussianInitial)>, CliError> {
        Ok(match self.model {
            Model::Gaussian { cost, terminal, initial } => Some((cost, terminal, initial)),
            Model::MertonDrift(s) => Some(build_drift_problem(&s).map_err(config_err)?),
            _ => None,
        })
    }

    pub fn halfline_problem(&self) -> Result<Option<(QuadraticCost, QuadraticTerminal, HalfLineInitial)>, CliError> {
        Ok(match self.model {
            Model::HalfLine { cost, terminal, initial } => Some((cost, terminal, initial)),
            Model::MertonVol(s) => Some(build_vol_problem(&s).map_err(config_err)?),
            _ => None,
        })
    }
}

fn config_err(e: mfg_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

struct Fields {
    values: BTreeMap<String, (String, usize)>,
}

impl Fields {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let lineno = n + 1;
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {lineno}: expected `key = value`")))?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') {
                return Err(CliError::Config(format!("line {lineno}: bad key `{key}`")));
            }
            if values.insert(key.to_string(), (value.trim().to_string(), lineno)).is_some() {
                return Err(CliError::Config(format!("line {lineno}: duplicate key `{key}`")));
            }
        }
        Ok(Self { values })
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.values.remove(key)
    }

    fn f64(&mut self, key: &str) -> Result<f64, CliError> {
        let (v, line) = self.take(key).ok_or_else(|| CliError::Config(format!("missing key `{key}`")))?;
        parse_num(&v, key, line)
    }

    fn parsed_or<T: std::str::FromStr>(&mut self, key: &str, default: T) -> Result<T, CliError> {
        match self.take(key) {
            Some((v, line)) => {
                v.parse().map_err(|_| CliError::Config(format!("line {line}: `{key}` has invalid value `{v}`")))
            }
            None => Ok(default),
        }
    }

    fn finish(self, kind: Kind) -> Result<(), CliError> {
        match self.values.iter().next() {
            Some((key, (_, line))) => {
                Err(CliError::Config(format!("line {line}: unknown key `{key}` for kind {}", kind.name())))
            }
            None => Ok(()),
        }
    }
}

fn parse_num(v: &str, key: &str, line: usize) -> Result<f64, CliError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(CliError::Config(format!("line {line}: `{key}` needs a finite number, got `{v}`"))),
    }
}

impl std::str::FromStr for ScenarioConfig {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        let mut f = Fields::parse(text)?;
        let (kind_str, line) = f.take("kind").ok_or_else(|| CliError::Config("missing key `kind`".into()))?;
        let kind = Kind::parse(&kind_str)
            .ok_or_else(|| CliError::Config(format!("line {line}: unknown kind `{kind_str}`")))?;
        let model = match kind {
            Kind::Gaussian => {
                let cost = QuadraticCost::new(f.f64("a")?, f.f64("b")?, f.f64("c")?, f.f64("delta")?, f.f64("horizon")?)
                    .map_err(config_err)?;
                let terminal =
                    QuadraticTerminal::new(f.f64("a_t")?, f.f64("b_t")?, f.f64("c_t")?).map_err(config_err)?;
                let initial = GaussianInitial::new(f.f64("x0")?, f.f64("lambda")?).map_err(config_err)?;
                Model::Gaussian { cost, terminal, initial }
            }
            Kind::HalfLine => {
                let cost = QuadraticCost::new(f.f64("a")?, 0.0, f.f64("c")?, f.f64("delta")?, f.f64("horizon")?)
                    .map_err(config_err)?;
                let terminal = QuadraticTerminal::new(f.f64("a_t")?, 0.0, f.f64("c_t")?).map_err(config_err)?;
                let initial = HalfLineInitial::new(f.f64("kappa")?).map_err(config_err)?;
                Model::HalfLine { cost, terminal, initial }
            }
            Kind::MertonDrift => {
                let s = DriftOpinionScenario {
                    mu_bar: f.f64("mu_bar")?,
                    sigma: f.f64("sigma")?,
                    r: f.f64("r")?,
                    q: f.f64("q")?,
                    beta: f.f64("beta")?,
                    gamma: f.f64("gamma")?,
                    delta: f.f64("delta")?,
                    horizon: f.f64("horizon")?,
                    mu0: f.f64("mu0")?,
                    lambda: f.f64("lambda")?,
                };
                build_drift_problem(&s).map_err(config_err)?;
                Model::MertonDrift(s)
            }
            Kind::MertonVol => {
                let s = VolOpinionScenario {
                    mu: f.f64("mu")?,
                    r: f.f64("r")?,
                    q: f.f64("q")?,
                    beta: f.f64("beta")?,
                    gamma: f.f64("gamma")?,
                    delta: f.f64("delta")?,
                    horizon: f.f64("horizon")?,
                    xi0: f.f64("xi0")?,
                };
                build_vol_problem(&s).map_err(config_err)?;
                Model::MertonVol(s)
            }
        };
        let d = OracleSettings::default();
        let oracles = OracleSettings {
            pde: f.parsed_or("pde", d.pde)?,
            mc: f.parsed_or("mc", d.mc)?,
            nx: f.parsed_or("nx", d.nx)?,
            nt: f.parsed_or("nt", d.nt)?,
            n_agents: f.parsed_or("n_agents", d.n_agents)?,
            mc_steps: f.parsed_or("mc_steps", d.mc_steps)?,
            seed: f.parsed_or("seed", d.seed)?,
        };
        let grid_points: usize = f.parsed_or("grid_points", 1001)?;
        if grid_points < 2 {
            return Err(CliError::Config(format!("grid_points must be >= 2, got {grid_points}")));
        }
        let out = f.take("out").map(|(v, _)| PathBuf::from(v));
        f.finish(kind)?;
        Ok(Self { kind, model, oracles, grid_points, out })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const AUDIT: &str = "kind = gaussian\n# comment\na = -2\nb = 0\nc = 0\ndelta = 0.2   # inline\nhorizon = 2\n\
                         a_t = 0\nb_t = 0\nc_t = 0\nx0 = 0.2\nlambda = 0.5\nseed = 42\n";

    #[test]
    fn parses_gaussian() {
        let cfg: ScenarioConfig = AUDIT.parse().unwrap();
        assert_eq!(cfg.kind, Kind::Gaussian);
        assert_eq!(cfg.oracles.seed, 42);
        assert_eq!(cfg.grid_points, 1001);
        match cfg.model {
            Model::Gaussian { cost, initial, .. } => {
                assert_eq!(cost.a, -2.0);
                assert_eq!(cost.delta, 0.2);
                assert_eq!(initial.lambda, 0.5);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_bad_input() {
        let err = |s: String| s.parse::<ScenarioConfig>().unwrap_err().to_string();
        assert!(err(format!("{AUDIT}kappa = 2\n")).contains("unknown key `kappa`"));
        assert!(err(format!("{AUDIT}a = 1\n")).contains("duplicate key"));
        assert!(err(AUDIT.replace("lambda = 0.5", "lambda = -1")).contains("lambda"));
        assert!(err(AUDIT.replace("kind = gaussian", "kind = tent")).contains("unknown kind"));
        assert!(err(AUDIT.replace("a = -2\n", "")).contains("missing key `a`"));
        assert!(err(AUDIT.replace("b = 0", "b = nan")).contains("finite"));
        assert!(err(format!("{AUDIT}pde = yes\n")).contains("pde"));
        assert!(err("a = 1\n".into()).contains("kind"));
        assert!(err(format!("{AUDIT}just text\n")).contains("key = value"));
    }

    #[test]
    fn halfline_rejects_linear_terms() {
        let text = "kind = halfline\na = -2\nc = 0\ndelta = 0.5\nhorizon = 4\na_t = 0\nc_t = 0\nkappa = 4\nb = 0\n";
        assert!(text.parse::<ScenarioConfig>().unwrap_err().to_string().contains("unknown key `b`"));
    }
}
