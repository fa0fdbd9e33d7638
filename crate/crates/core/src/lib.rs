//! Riccati reduction of linear-quadratic mean-field games.
//!
//! For a quadratic running reward and quadratic terminal data the coupled
//! HJB / Fokker–Planck system reduces to ordinary differential equations for
//! the coefficients of the value function and of the log-density. This crate
//! integrates those equations ([`gaussian`], [`halfline`]), checks them
//! against two independent oracles ([`pde`], [`mc`]), audits published
//! closed forms ([`audit`]) and maps the investor opinion-formation
//! scenarios onto the reduced problems ([`merton`]).

pub mod audit;
pub mod diagnostics;
pub mod error;
pub mod gaussian;
pub mod halfline;
pub mod mc;
pub mod merton;
pub mod ode;
pub mod pde;
pub mod scenario;
pub mod suite;

pub use error::{Error, OdeError, Result};
pub use gaussian::{GaussianSolution, SolverOptions};

pub use scenario::{
    classify_regime, CoefficientPath, ExistenceReport, GaussianInitial, HalfLineInitial, QuadraticCost,
    QuadraticTerminal, Regime,
};
