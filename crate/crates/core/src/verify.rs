//! Self-checks behind `superlens verify`: closed-form oracles, conservation,
//! gradient consistency and DtN adjointness.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adjoint::fd_gradient_check;
use crate::analysis::energy_balance;
use crate::domain::{AdmissibleBounds, DesignField, Grid};
use crate::dtn::{build_dtn, multiplier, DtnMatrix, Flavor};
use crate::error::Result;
use crate::numerics::{beta, gauss_legendre};
use crate::objective::{full_line_quadrature, FocusingProblem};
use crate::scalar::{cis, cplx, Cplx};
use crate::solver::{assemble, extract_trace, Boundary, FloquetSolution};
use crate::source::{incident_dirichlet_trace, incident_neumann_trace};

const OMEGA: f64 = 1.0;
const ALPHA: f64 = 0.2;
const SOURCE_HEIGHT: f64 = 2.5;

/// Deliberate corruption used to show that the checks can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Forward DtN built with `−iβ` on propagating modes.
    FlippedBetaSign,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    /// Coarse grids with the relaxed tolerances of [`vacuum_tolerance`].
    pub reduced: bool,
    pub fault: Option<Fault>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    /// Human-readable acceptance rule.
    pub requirement: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: impl Into<String>, measured: f64, requirement: impl Into<String>, passed: bool) {
        self.checks.push(Check {
            name: name.into(),
            measured,
            requirement: requirement.into(),
            passed,
        });
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.checks {
            writeln!(
                f,
                "{}  {:<w$}  {:>12.4e}  {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.requirement
            )?;
        }
        Ok(())
    }
}

/// Allowed vacuum-oracle error at `nx` columns: 1e-2 at 64, scaled as `h²`.
pub fn vacuum_tolerance(nx: usize) -> f64 {
    1e-2 * (64.0 / nx as f64).powi(2)
}

fn forward_dtn(grid: &Grid<f64>, alpha: f64, n_trunc: usize, fault: Option<Fault>) -> Result<DtnMatrix<f64>> {
    match fault {
        None => build_dtn(alpha, OMEGA, grid, n_trunc, Flavor::Forward),
        Some(Fault::FlippedBetaSign) => Ok(DtnMatrix::with_multipliers(alpha, OMEGA, grid, n_trunc, Flavor::Forward, |n| {
            let m = multiplier(n, alpha, OMEGA, Flavor::Forward);
            if beta(n as f64 + alpha, OMEGA).is_propagating() {
                -m
            } else {
                m
            }
        })),
    }
}

fn solve_point_source(design: &DesignField<f64>, alpha: f64, n_trunc: usize, fault: Option<Fault>) -> Result<FloquetSolution<f64>> {
    let dtn = forward_dtn(&design.grid, alpha, n_trunc, fault)?;
    let g = incident_neumann_trace(alpha, OMEGA, SOURCE_HEIGHT, n_trunc)?;
    assemble(design, alpha, OMEGA, &dtn, &g)?.factor()?.solve_forward()
}

fn n_trunc_for(grid: &Grid<f64>) -> usize {
    (grid.nx() / 2 - 1).min(21)
}

fn vacuum(grid: Grid<f64>) -> DesignField<f64> {
    let bounds = AdmissibleBounds::new(1.0, 12.0, 0.0, 1.0).expect("valid bounds");
    DesignField::uniform(grid, cplx(1.0, 0.0), bounds)
}

/// Relative `L²(Ω)` distance between the vacuum solution and the incident
/// field `Σ f_n e^{inx} e^{−iβ_n y}`, by 2×2 Gauss points per cell.
pub fn vacuum_error(nx: usize, ny: usize, fault: Option<Fault>) -> Result<f64> {
    let grid = Grid::new(nx, ny, std::f64::consts::PI)?;
    let n_trunc = n_trunc_for(&grid);
    let sol = solve_point_source(&vacuum(grid), ALPHA, n_trunc, fault)?;
    let f = incident_dirichlet_trace(ALPHA, OMEGA, SOURCE_HEIGHT, n_trunc)?;
    let exact = |x: f64, y: f64| {
        f.iter()
            .map(|(n, c)| c * cis(n as f64 * x) * (-Cplx::<f64>::i() * beta(n as f64 + ALPHA, OMEGA).value * y).exp())
            .sum::<Cplx<f64>>()
    };
    let (gx, gw) = gauss_legendre::<f64>(2);
    let (hx, hy) = (grid.hx(), grid.hy());
    let (mut err, mut norm) = (0.0, 0.0);
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let nodes = grid.cell_nodes(i, j);
            let v: Vec<Cplx<f64>> = nodes.iter().map(|&k| sol.values[k]).collect();
            for (&s, &ws) in gx.iter().zip(&gw) {
                for (&t, &wt) in gx.iter().zip(&gw) {
                    // reference coordinates in [0, 1]², t runs downwards
                    let (a, b) = ((s + 1.0) / 2.0, (t + 1.0) / 2.0);
                    let uh = v[0] * ((1.0 - a) * (1.0 - b)) + v[1] * (a * (1.0 - b)) + v[2] * ((1.0 - a) * b) + v[3] * (a * b);
                    let ue = exact((i as f64 + a) * hx, -(j as f64 + b) * hy);
                    let w = ws * wt * hx * hy / 4.0;
                    err += w * (uh - ue).norm_sqr();
                    norm += w * ue.norm_sqr();
                }
            }
        }
    }
    Ok((err / norm).sqrt())
}

/// Two layers: `ρ = top` on `(−b/2, 0)`, `ρ = bottom` on `(−b, −b/2)`.
pub fn two_layer(grid: Grid<f64>, top: f64, bottom: f64) -> DesignField<f64> {
    let bounds = AdmissibleBounds::new(1.0, 12.0, 0.0, 1.0).expect("valid bounds");
    let values = (0..grid.ny())
        .flat_map(|j| {
            let rho = if 2 * j < grid.ny() { top } else { bottom };
            std::iter::repeat(cplx(rho, 0.0)).take(grid.nx())
        })
        .collect();
    DesignField::new(grid, values, bounds).expect("layer values inside bounds")
}

/// Transmission `t/f` of mode `ξ` through layers listed top to bottom as
/// `(ρ, thickness)`, by 2×2 transfer matrices on `(φ, φ')`.
pub fn transfer_matrix_transmission(xi: f64, omega: f64, layers: &[(f64, f64)]) -> Cplx<f64> {
    let b = beta(xi, omega).value;
    let i = Cplx::<f64>::i();
    // below the stack φ = e^{−iβ(y+b)}: unit transmitted amplitude
    let (mut p, mut q) = (cplx(1.0, 0.0), -i * b);
    for &(rho, d) in layers.iter().rev() {
        let k = (cplx(omega * omega * rho - xi * xi, 0.0)).sqrt();
        let (c, s) = ((k * d).cos(), (k * d).sin());
        let s_over_k = if k.norm() > 1e-300 { s / k } else { cplx(d, 0.0) };
        let (p1, q1) = (p * c + q * s_over_k, -p * k * s + q * c);
        p = p1;
        q = q1;
    }
    // above: φ = f e^{−iβy} + r e^{iβy}, so f = (φ + iφ'/β)/2
    let f = (p + i * q / b) / 2.0;
    f.inv()
}

/// Worst relative deviation of FEM per-mode transmission from the transfer
/// matrix oracle, over `|n| ≤ modes`.
pub fn layered_error(nx: usize, ny: usize, modes: i64, fault: Option<Fault>) -> Result<f64> {
    let b = std::f64::consts::PI;
    let grid = Grid::new(nx, ny, b)?;
    let n_trunc = n_trunc_for(&grid);
    let (top, bottom) = (2.0, 4.0);
    let sol = solve_point_source(&two_layer(grid, top, bottom), ALPHA, n_trunc, fault)?;
    let t = extract_trace(&sol, Boundary::Bottom);
    let f = incident_dirichlet_trace(ALPHA, OMEGA, SOURCE_HEIGHT, n_trunc)?;
    let mut worst = 0.0_f64;
    for n in -modes..=modes {
        let fem = t.get(n) / f.get(n);
        let oracle = transfer_matrix_transmission(n as f64 + ALPHA, OMEGA, &[(top, b / 2.0), (bottom, b / 2.0)]);
        worst = worst.max((fem - oracle).norm() / oracle.norm());
    }
    Ok(worst)
}

fn random_design(grid: Grid<f64>, bounds: AdmissibleBounds<f64>, rng: &mut ChaCha8Rng) -> DesignField<f64> {
    let values = (0..grid.num_cells())
        .map(|_| {
            cplx(
                rng.gen_range(bounds.rho_r0..=bounds.rho_r1),
                rng.gen_range(bounds.rho_i0..=bounds.rho_i1),
            )
        })
        .collect();
    DesignField::new(grid, values, bounds).expect("sampled inside bounds")
}

/// Worst relative energy residual over `count` random lossless designs.
pub fn energy_residual(nx: usize, ny: usize, count: usize, seed: u64, fault: Option<Fault>) -> Result<f64> {
    let grid = Grid::new(nx, ny, std::f64::consts::PI)?;
    let n_trunc = n_trunc_for(&grid);
    let bounds = AdmissibleBounds::new(1.0, 12.0, 0.0, 0.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..count {
        let d = random_design(grid, bounds, &mut rng);
        let alpha = rng.gen_range(0.01..0.49);
        let sol = solve_point_source(&d, alpha, n_trunc, fault)?;
        let inc = incident_dirichlet_trace(alpha, OMEGA, SOURCE_HEIGHT, n_trunc)?;
        let e = energy_balance(
            &d,
            &sol,
            &extract_trace(&sol, Boundary::Top),
            &extract_trace(&sol, Boundary::Bottom),
            &inc,
        )?;
        worst = worst.max(e.relative_residual());
    }
    Ok(worst)
}

/// Result of the finite-difference sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientSweep {
    /// Worst over directions of the best error over step sizes.
    pub worst_error: f64,
    /// Smallest ratio between errors at `t = 1e-2` and `t = 1e-3`.
    pub min_order_ratio: f64,
}

/// Central differences against the adjoint gradient for `designs` random
/// lossy designs and `directions` random directions each.
pub fn gradient_sweep(nx: usize, ny: usize, designs: usize, directions: usize, seed: u64) -> Result<GradientSweep> {
    let grid = Grid::new(nx, ny, std::f64::consts::PI)?;
    let n_trunc = n_trunc_for(&grid).min(8);
    let q = full_line_quadrature(4, OMEGA, n_trunc)?;
    let problem = FocusingProblem::new(grid, OMEGA, SOURCE_HEIGHT, SOURCE_HEIGHT, n_trunc, q)?;
    let bounds = AdmissibleBounds::new(1.0, 12.0, 0.0, 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sweep = GradientSweep {
        worst_error: 0.0,
        min_order_ratio: f64::INFINITY,
    };
    for _ in 0..designs {
        let d = random_design(grid, bounds, &mut rng);
        for _ in 0..directions {
            let dir: Vec<Cplx<f64>> = (0..grid.num_cells())
                .map(|_| cplx(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let r = fd_gradient_check(&problem, &d, &dir, &[1e-2, 1e-3, 1e-4])?;
            sweep.worst_error = sweep.worst_error.max(r.best_error());
            sweep.min_order_ratio = sweep.min_order_ratio.min(r.rows[0].relative_error / r.rows[1].relative_error);
        }
    }
    Ok(sweep)
}

/// Largest `|T*_kl − conj(T_lk)|` over a few quasi-momenta.
pub fn dtn_adjoint_defect(nx: usize) -> Result<f64> {
    let grid = Grid::new(nx, nx / 2, std::f64::consts::PI)?;
    let n_trunc = n_trunc_for(&grid);
    let mut worst = 0.0_f64;
    for alpha in [0.0125, 0.2, 0.4875, -0.3] {
        let f = build_dtn(alpha, OMEGA, &grid, n_trunc, Flavor::Forward)?;
        let a = build_dtn(alpha, OMEGA, &grid, n_trunc, Flavor::Adjoint)?;
        worst = worst.max(DtnMatrix::adjoint_defect(&f, &a));
    }
    Ok(worst)
}

/// Runs every check; solver failures propagate as errors.
pub fn run_all(options: &VerifyOptions) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let fault = options.fault;
    let (coarse, fine) = if options.reduced { ((16, 12), (32, 24)) } else { ((64, 48), (128, 96)) };

    let e0 = vacuum_error(coarse.0, coarse.1, fault)?;
    let e1 = vacuum_error(fine.0, fine.1, fault)?;
    let tol = vacuum_tolerance(coarse.0);
    report.push(
        format!("vacuum oracle L2 error {}x{}", coarse.0, coarse.1),
        e0,
        format!("<= {tol:.1e}"),
        e0 <= tol,
    );
    let ratio = e0 / e1;
    report.push(
        format!("vacuum error ratio {}x{} / {}x{}", coarse.0, coarse.1, fine.0, fine.1),
        ratio,
        "in [3.5, 4.5]",
        (3.5..=4.5).contains(&ratio),
    );

    let tol = 1e-3 * (128.0 / fine.0 as f64).powi(2);
    let e = layered_error(fine.0, fine.1, 1, fault)?;
    report.push(
        format!("two-layer transmission |n| <= 1 vs transfer matrix {}x{}", fine.0, fine.1),
        e,
        format!("<= {tol:.1e}"),
        e <= tol,
    );

    let sizes: &[(usize, usize)] = if options.reduced { &[(16, 12)] } else { &[(16, 12), (32, 24), (64, 48)] };
    for &(nx, ny) in sizes {
        let r = energy_residual(nx, ny, 20, 11, fault)?;
        report.push(
            format!("energy residual, 20 lossless designs {nx}x{ny}"),
            r,
            "<= 1e-8",
            r <= 1e-8,
        );
    }

    let (designs, dirs) = if options.reduced { (1, 3) } else { (3, 10) };
    let s = gradient_sweep(12, 8, designs, dirs, 5)?;
    report.push(
        format!("adjoint vs central FD, {designs} designs x {dirs} directions"),
        s.worst_error,
        "<= 1e-4",
        s.worst_error <= 1e-4,
    );
    report.push(
        "FD error ratio t = 1e-2 / 1e-3",
        s.min_order_ratio,
        ">= 25 (second order)",
        s.min_order_ratio >= 25.0,
    );

    let d = dtn_adjoint_defect(coarse.0)?;
    report.push("DtN adjoint flavor vs conjugate transpose", d, "<= 1e-12", d <= 1e-12);
    Ok(report)
}
