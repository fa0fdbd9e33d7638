//! Finite-difference oracle for the coupled HJB / Fokker–Planck system.
//!
//! The HJB equation is linearized by `w = exp(Phi / delta^2)`, which gives
//! `w_tau = delta^2/2 w_xx + (g / delta^2) w` in backward time `tau = T - t`.
//! `w` spans hundreds of orders of magnitude across a typical domain and
//! changes by large factors per cell, so it is never stored directly: see
//! [`solve_hjb_backward`] for the per-step gauge that keeps the linear
//! solve well resolved.
//!
//! The density then moves forward under the drift `Phi_x` with a flux-form
//! Crank–Nicolson scheme, so interior mass is conserved to round-off and
//! what leaves through the ends is accounted as boundary flux.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::gaussian::GaussianSolution;
use crate::halfline::HalfLineSolution;
use crate::ode::uniform_grid;
use crate::scenario::QuadraticCost;

/// Smallest `delta` accepted by the exponential transform.
pub const DEFAULT_MIN_DELTA: f64 = 1e-3;
/// Allowed `|mass - 1|` (half-line: mass plus absorbed outflow).
pub const MASS_TOLERANCE: f64 = 1e-3;
/// Standard deviations kept on each side of the full-line density.
pub const DOMAIN_STDS: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    pub x_min: f64,
    pub x_max: f64,
    /// Space nodes, ends included.
    pub nx: usize,
    /// Time levels on `[0, T]`, ends included.
    pub nt: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, nx: usize, nt: usize) -> Result<Self> {
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::InvalidParameter(format!("bad domain [{x_min}, {x_max}]")));
        }
        if nx < 64 || nt < 64 {
            return Err(Error::InvalidParameter(format!("grid too coarse (nx={nx}, nt={nt}; need >= 64)")));
        }
        Ok(Self { x_min, x_max, nx, nt })
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn times(&self, horizon: f64) -> Vec<f64> {
        uniform_grid(0.0, horizon, self.nt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Dirichlet ends on a truncated line.
    FullLine,
    /// `Phi_x = 0` and `m = 0` at `x = 0`; Dirichlet at the far end.
    HalfLine,
}

/// Solves `A u = d` for tridiagonal `A` (Thomas algorithm).
///
/// `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = if i + 1 < n { upper[i] / m } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

/// `Phi` on every time level (`phi[n][i]`, level `n` at `t_n`).
///
/// `terminal` holds `K(x_i)`; the last level equals it exactly.
///
/// Each backward step writes `w = exp(psi) v` with `psi = ln w` frozen from
/// the previous level. The step problem for `v`,
/// `v_tau = D v_xx + 2D psi_x v_x + (D (psi_xx + psi_x^2) + g / delta^2) v`
/// with `v = 1` initially, is still linear. It is Strang split into exact
/// half-steps of the zeroth-order term around a Crank–Nicolson step of the
/// rest, with the convection exponentially fitted. `v` stays close to one and smooth, so the step is accurate even
/// where `w` itself varies by many orders of magnitude per cell.
pub fn solve_hjb_backward(
    cost: &QuadraticCost,
    terminal: &[f64],
    grid: &Grid1D,
    boundary: Boundary,
    min_delta: f64,
) -> Result<Vec<Vec<f64>>> {
    if !(cost.delta >= min_delta) {
        return Err(Error::DegenerateDiffusion { delta: cost.delta, threshold: min_delta });
    }
    assert_eq!(terminal.len(), grid.nx);
    let (nx, nt) = (grid.nx, grid.nt);
    let d2 = cost.delta * cost.delta;
    let diff = 0.5 * d2;
    let dt = cost.horizon / (nt - 1) as f64;
    let h = grid.dx();
    let potential: Vec<f64> = grid.xs().iter().map(|&x| cost.running(x) / d2).collect();
    let half_line = boundary == Boundary::HalfLine;
    // unknowns: nodes first..=last; the rest are extrapolated
    let first = if half_line { 0 } else { 1 };
    let last = nx - 2;
    let m = last + 1 - first;

    let mut phi = vec![Vec::new(); nt];
    phi[nt - 1] = terminal.to_vec();
    let mut psi: Vec<f64> = terminal.iter().map(|k| k / d2).collect();
    let dc = 2.0 * diff / (h * h);
    let mut rows = vec![(0.0, 0.0, 0.0); m];
    let mut half = vec![0.0; m];
    let (mut lower, mut diag, mut upper, mut rhs) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    for level in (0..nt - 1).rev() {
        for (k, i) in (first..=last).enumerate() {
            // ghost psi_{-1} = psi_1 at x = 0
            let left = if i == 0 { psi[1] } else { psi[i - 1] };
            let px = (psi[i + 1] - left) / (2.0 * h);
            let pxx = (psi[i + 1] - 2.0 * psi[i] + left) / (h * h);
            half[k] = (0.5 * dt * (diff * (pxx + px * px) + potential[i])).exp();
            // exponentially fitted convection keeps both off-diagonals >= 0
            let beta = px * h;
            let fit = if beta.abs() < 1e-8 { 1.0 } else { beta / beta.tanh() };
            let (mut l, mut u) = (0.5 * dc * (fit - beta), 0.5 * dc * (fit + beta));
            let mut c = -dc * fit;
            if i == 0 {
                // ghost v_{-1} = v_1
                u += l;
                l = 0.0;
            } else if k == 0 {
                // v flat across the truncated end
                c += l;
                l = 0.0;
            }
            if k + 1 == m {
                c += u;
                u = 0.0;
            }
            rows[k] = (l, c, u);
        }
        for k in 0..m {
            let (l, c, u) = rows[k];
            let vl = if k > 0 { half[k - 1] } else { 0.0 };
            let vr = if k + 1 < m { half[k + 1] } else { 0.0 };
            rhs[k] = half[k] + 0.5 * dt * (l * vl + c * half[k] + u * vr);
            lower[k] = -0.5 * dt * l;
            diag[k] = 1.0 - 0.5 * dt * c;
            upper[k] = -0.5 * dt * u;
        }
        let v = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        for (k, i) in (first..=last).enumerate() {
            let vk = v[k] * half[k];
            if !(vk > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "exponential transform lost positivity at x = {} (refine the grid)",
                    grid.x(i)
                )));
            }
            psi[i] += vk.ln();
        }
        psi[nx - 1] = 3.0 * psi[nx - 2] - 3.0 * psi[nx - 3] + psi[nx - 4];
        if !half_line {
            psi[0] = 3.0 * psi[1] - 3.0 * psi[2] + psi[3];
        }
        phi[level] = psi.iter().map(|p| d2 * p).collect();
    }
    Ok(phi)
}

/// Forward density with its boundary bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct FpkField {
    pub m: Vec<Vec<f64>>,
    /// Trapezoid mass per level.
    pub mass: Vec<f64>,
    /// Cumulative outflow through the left end (`x = 0` on the half-line).
    pub absorbed_left: Vec<f64>,
    /// Cumulative outflow through the right end.
    pub absorbed_right: Vec<f64>,
    /// Negative values set to zero after a step.
    pub clipped: usize,
    /// Most negative value seen before clipping.
    pub min_before_clip: f64,
}

fn trapezoid(values: &[f64], h: f64) -> f64 {
    let n = values.len();
    h * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[n - 1]))
}

/// Flux-form Crank–Nicolson for `m_t + (m Phi_x)_x = delta^2/2 m_xx`, `m = 0` at both ends.
pub fn solve_fpk_forward(
    phi: &[Vec<f64>],
    m0: &[f64],
    cost: &QuadraticCost,
    grid: &Grid1D,
    boundary: Boundary,
) -> Result<FpkField> {
    let (nx, nt) = (grid.nx, grid.nt);
    let h = grid.dx();
    let dt = cost.horizon / (nt - 1) as f64;
    let diff = 0.5 * cost.delta * cost.delta;
    if m0.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::InvalidParameter("initial density must be non-negative".into()));
    }
    let raw = trapezoid(m0, h);
    let pre_tol = if boundary == Boundary::HalfLine { MASS_TOLERANCE } else { 1e-6 };
    if (raw - 1.0).abs() > pre_tol {
        return Err(Error::MassLeak { time: 0.0, mass: raw });
    }
    let mut m: Vec<f64> = m0.iter().map(|v| v / raw).collect();
    m[0] = 0.0;
    m[nx - 1] = 0.0;

    // face velocities v_{i+1/2}, i = 0..nx-2
    let faces = |level: usize| -> Vec<f64> { phi[level].windows(2).map(|p| (p[1] - p[0]) / h).collect() };
    // operator rows for interior node i: (lower, diag, upper) of dm/dt
    let row = |v: &[f64], i: usize| {
        let (vm, vp) = (v[i - 1], v[i]);
        ((0.5 * vm + diff / h) / h, (0.5 * (vm - vp) - 2.0 * diff / h) / h, (-0.5 * vp + diff / h) / h)
    };
    // outward boundary fluxes given interior neighbours (ends are zero)
    let out_left = |v: &[f64], m: &[f64]| -(0.5 * v[0] * m[1] - diff * m[1] / h);
    let out_right = |v: &[f64], m: &[f64]| 0.5 * v[nx - 2] * m[nx - 2] + diff * m[nx - 2] / h;

    let mut field = FpkField {
        m: Vec::with_capacity(nt),
        mass: Vec::with_capacity(nt),
        absorbed_left: vec![0.0],
        absorbed_right: vec![0.0],
        clipped: 0,
        min_before_clip: 0.0,
    };
    field.mass.push(trapezoid(&m, h));
    field.m.push(m.clone());
    let n_in = nx - 2;
    let (mut lower, mut diag, mut upper, mut rhs) = (vec![0.0; n_in], vec![0.0; n_in], vec![0.0; n_in], vec![0.0; n_in]);
    let mut v_old = faces(0);
    for level in 1..nt {
        let v_new = faces(level);
        for i in 1..nx - 1 {
            let (l, c, u) = row(&v_old, i);
            rhs[i - 1] = m[i] + 0.5 * dt * (l * m[i - 1] + c * m[i] + u * m[i + 1]);
            let (l, c, u) = row(&v_new, i);
            lower[i - 1] = -0.5 * dt * l;
            diag[i - 1] = 1.0 - 0.5 * dt * c;
            upper[i - 1] = -0.5 * dt * u;
        }
        let flux_old = (out_left(&v_old, &m), out_right(&v_old, &m));
        let inner = solve_tridiagonal(&lower, &diag, &upper, &rhs);
        m[1..nx - 1].copy_from_slice(&inner);
        let flux_new = (out_left(&v_new, &m), out_right(&v_new, &m));
        let prev_l = *field.absorbed_left.last().unwrap();
        let prev_r = *field.absorbed_right.last().unwrap();
        field.absorbed_left.push(prev_l + 0.5 * dt * (flux_old.0 + flux_new.0));
        field.absorbed_right.push(prev_r + 0.5 * dt * (flux_old.1 + flux_new.1));
        for v in m.iter_mut() {
            if *v < 0.0 {
                field.min_before_clip = field.min_before_clip.min(*v);
                field.clipped += 1;
                *v = 0.0;
            }
        }
        let mass = trapezoid(&m, h);
        let t = level as f64 * dt;
        let accounted = match boundary {
            Boundary::FullLine => mass,
            Boundary::HalfLine => mass + field.absorbed_left[level],
        };
        if (accounted - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::MassLeak { time: t, mass: accounted });
        }
        field.mass.push(mass);
        field.m.push(m.clone());
        v_old = v_new;
    }
    Ok(field)
}

/// Sub-grid argmax of one density slice by parabolic interpolation.
pub fn extract_mode(m: &[f64], grid: &Grid1D) -> Result<f64> {
    let (mut best, mut idx) = (f64::NEG_INFINITY, 0);
    for (i, &v) in m.iter().enumerate() {
        if v > best {
            best = v;
            idx = i;
        }
    }
    if idx == 0 || idx + 1 == m.len() {
        return Err(Error::BoundaryMaximum { index: idx });
    }
    let (l, c, r) = (m[idx - 1], m[idx], m[idx + 1]);
    // a tie with one neighbour is a peak between two nodes; a longer run is flat
    if !(c > l) || (c == r && m.get(idx + 2) == Some(&c)) {
        return Err(Error::NoStrictMax);
    }
    let den = l - 2.0 * c + r;
    if !(den < 0.0) {
        return Err(Error::NoStrictMax);
    }
    Ok(grid.x(idx) + 0.5 * grid.dx() * (l - r) / den)
}

/// Coefficient of determination of a least-squares quadratic fit to `ln m`
/// (`ln(m / x)` on the half-line) over nodes with `m > 1e-6 max m`.
pub fn gaussian_r2(m: &[f64], grid: &Grid1D, boundary: Boundary) -> f64 {
    let top = m.iter().cloned().fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = m
        .iter()
        .enumerate()
        .filter(|(i, &v)| v > 1e-6 * top && (boundary == Boundary::FullLine || grid.x(*i) > 0.0))
        .map(|(i, &v)| {
            let x = grid.x(i);
            let y = if boundary == Boundary::HalfLine { (v / x).ln() } else { v.ln() };
            (x, y)
        })
        .collect();
    if pts.len() < 4 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let sx = (pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>() / n).sqrt();
    // normal equations in the scaled variable u = (x - mx) / sx
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for &(x, y) in &pts {
        let u = (x - mx) / sx;
        let basis = [1.0, u, u * u];
        for r in 0..3 {
            aty[r] += basis[r] * y;
            for c in 0..3 {
                ata[r][c] += basis[r] * basis[c];
            }
        }
    }
    let coef = solve3(ata, aty);
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for &(x, y) in &pts {
        let u = (x - mx) / sx;
        let fit = coef[0] + coef[1] * u + coef[2] * u * u;
        ss_res += (y - fit).powi(2);
        ss_tot += (y - my).powi(2);
    }
    if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    }
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdeSolution {
    pub grid: Grid1D,
    pub boundary: Boundary,
    pub times: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
    pub m: Vec<Vec<f64>>,
    pub mode_curve: Vec<f64>,
    pub mass_curve: Vec<f64>,
    /// Cumulative outflow through `x = 0` (half-line) or the left end.
    pub absorbed_curve: Vec<f64>,
    pub gaussian_r2: Vec<f64>,
    pub clipped_negatives: usize,
}

impl PdeSolution {
    fn assemble(grid: Grid1D, boundary: Boundary, horizon: f64, phi: Vec<Vec<f64>>, fpk: FpkField) -> Result<Self> {
        let mode_curve = fpk.m.iter().map(|row| extract_mode(row, &grid)).collect::<Result<Vec<_>>>()?;
        let gaussian_r2 = fpk.m.iter().map(|row| gaussian_r2(row, &grid, boundary)).collect();
        Ok(Self {
            grid,
            boundary,
            times: grid.times(horizon),
            phi,
            m: fpk.m,
            mode_curve,
            mass_curve: fpk.mass,
            absorbed_curve: fpk.absorbed_left,
            gaussian_r2,
            clipped_negatives: fpk.clipped,
        })
    }

    /// `max_n |mode_n - reference_n|`; `reference` is sampled on [`Self::times`].
    pub fn max_mode_deviation(&self, reference: &[f64]) -> f64 {
        self.mode_curve.iter().zip(reference).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
    }

    /// Sup-norm of `phi - exact(t, x)` over nodes where the density exceeds
    /// `rel` times its maximum at that level.
    pub fn phi_deviation(&self, exact: impl Fn(f64, f64) -> f64, rel: f64) -> f64 {
        let mut worst = 0.0_f64;
        for (n, t) in self.times.iter().enumerate() {
            let top = self.m[n].iter().cloned().fold(0.0, f64::max);
            for i in 0..self.grid.nx {
                if self.m[n][i] > rel * top {
                    worst = worst.max((self.phi[n][i] - exact(*t, self.grid.x(i))).abs());
                }
            }
        }
        worst
    }

    /// `t,x,phi,m`, one row per node, time levels in order.
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "t,x,phi,m")?;
        for (n, t) in self.times.iter().enumerate() {
            for i in 0..self.grid.nx {
                writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", t, self.grid.x(i), self.phi[n][i], self.m[n][i])?;
            }
        }
        Ok(())
    }
}

/// Domain holding `DOMAIN_STDS` standard deviations around the mode at
/// every sample of a global full-line solution.
pub fn gaussian_domain(sol: &GaussianSolution) -> Result<(f64, f64)> {
    let var = sol.variance_curve().ok_or(Error::NonGlobalValue { blowup_time: sol.existence.blowup_time.unwrap_or(0.0) })?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (q, v) in sol.mode.iter().zip(&var) {
        let s = DOMAIN_STDS * v.sqrt();
        lo = lo.min(q - s);
        hi = hi.max(q + s);
    }
    Ok((lo, hi))
}

/// Runs both sweeps for a full-line scenario on `nx` by `nt` nodes.
pub fn solve_gaussian(sol: &GaussianSolution, nx: usize, nt: usize) -> Result<PdeSolution> {
    let (lo, hi) = gaussian_domain(sol)?;
    let grid = Grid1D::new(lo, hi, nx, nt)?;
    let xs = grid.xs();
    let terminal: Vec<f64> = xs.iter().map(|&x| sol.terminal.eval(x)).collect();
    let phi = solve_hjb_backward(&sol.cost, &terminal, &grid, Boundary::FullLine, DEFAULT_MIN_DELTA)?;
    let m0: Vec<f64> = xs.iter().map(|&x| sol.initial.density(x)).collect();
    let fpk = solve_fpk_forward(&phi, &m0, &sol.cost, &grid, Boundary::FullLine)?;
    PdeSolution::assemble(grid, Boundary::FullLine, sol.cost.horizon, phi, fpk)
}

/// Half-line domain `[0, 11 / sqrt(kappa)]`, i.e. the initial mode plus ten
/// of its own lengths.
pub fn halfline_domain(kappa: f64) -> (f64, f64) {
    (0.0, 11.0 / kappa.sqrt())
}

pub fn solve_halfline(sol: &HalfLineSolution, nx: usize, nt: usize) -> Result<PdeSolution> {
    let (lo, hi) = halfline_domain(sol.initial.kappa);
    let grid = Grid1D::new(lo, hi, nx, nt)?;
    let xs = grid.xs();
    let terminal: Vec<f64> = xs.iter().map(|&x| sol.terminal.eval(x)).collect();
    let phi = solve_hjb_backward(&sol.cost, &terminal, &grid, Boundary::HalfLine, DEFAULT_MIN_DELTA)?;
    let m0: Vec<f64> = xs.iter().map(|&x| sol.initial.density(x)).collect();
    let fpk = solve_fpk_forward(&phi, &m0, &sol.cost, &grid, Boundary::HalfLine)?;
    PdeSolution::assemble(grid, Boundary::HalfLine, sol.cost.horizon, phi, fpk)
}
