//! Adjoint states and the gradient of the focusing functional.
//!
//! With `ψ = F − q` and `Aᴴ w = ℓ`, `ℓ_k = ∫_{Γ_b} ψ φ_k`, a change `δρ` of
//! the design moves the misfit by `Re ⟨δF, ψ⟩ = Re Σ_cells δρ · ω² ∫_cell u w̄`.
//! The gradient is stored as a density, `G = ω² ∫_cell u w̄ / |cell|`, so that
//! `DJ(ρ)(δρ) = Re ∫_Ω δρ G` and its size does not depend on the grid.

use std::io::Write;

use crate::domain::{write_cell_field, AdmissibleBounds, DesignField, Grid};
use crate::error::{Error, Result};
use crate::objective::{AlphaQuadrature, AlphaResult, FocusingProblem};
use crate::scalar::{cplx, CompensatedComplexSum, CompensatedSum, Cplx, Real};
use crate::solver::{ElementMatrices, FactoredSystem, FloquetSolution};
use crate::source::ModalTrace;

/// Adjoint state for the bottom-boundary residual `psi`, reusing the forward
/// factorization.
pub fn solve_adjoint<T: Real>(system: &FactoredSystem<T>, psi: &ModalTrace<T>) -> Result<FloquetSolution<T>> {
    system.solve_adjoint(psi)
}

/// `ω² ∫_cell u w̄ / |cell|` for every cell, exact for bilinear `u` and `w`.
pub fn cell_gradient<T: Real>(grid: &Grid<T>, omega: T, u: &[Cplx<T>], w: &[Cplx<T>]) -> Vec<Cplx<T>> {
    let m = ElementMatrices::new(grid.hx(), grid.hy()).mass;
    let w2 = omega * omega / (grid.hx() * grid.hy());
    let mut out = Vec::with_capacity(grid.num_cells());
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let nodes = grid.cell_nodes(i, j);
            let mut s = cplx(T::zero(), T::zero());
            for (k, &gk) in nodes.iter().enumerate() {
                let mut mu = cplx(T::zero(), T::zero());
                for (l, &gl) in nodes.iter().enumerate() {
                    mu += u[gl] * m[k][l];
                }
                s += w[gk].conj() * mu;
            }
            out.push(s * w2);
        }
    }
    out
}

/// Cellwise gradient density `G` with `DJ(ρ)(δρ) = Re ∫ δρ G`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField<T> {
    pub grid: Grid<T>,
    pub values: Vec<Cplx<T>>,
    /// Mirror-averaged per α: exact for x-symmetric designs under a folded
    /// quadrature.
    pub folded: bool,
}

impl<T: Real> GradientField<T> {
    pub fn zeros(grid: Grid<T>) -> Self {
        Self {
            grid,
            values: vec![cplx(T::zero(), T::zero()); grid.num_cells()],
            folded: false,
        }
    }

    pub(crate) fn accumulate(grid: &Grid<T>, quadrature: &AlphaQuadrature<T>, per_alpha: &[AlphaResult<T>]) -> Result<Self> {
        let parts: Vec<(T, &[Cplx<T>])> = per_alpha
            .iter()
            .map(|r| {
                r.cell_gradient
                    .as_deref()
                    .map(|g| (r.weight, g))
                    .ok_or_else(|| Error::Dimension(format!("no adjoint data at alpha = {}", r.alpha)))
            })
            .collect::<Result<_>>()?;
        Ok(Self::combine(grid, quadrature.is_folded(), &parts))
    }

    fn combine(grid: &Grid<T>, folded: bool, parts: &[(T, &[Cplx<T>])]) -> Self {
        let half = T::lit(0.5);
        let values = (0..grid.num_cells())
            .map(|c| {
                let m = grid.mirror_cell(c);
                let mut acc = CompensatedComplexSum::new();
                for &(w, g) in parts {
                    let v = if folded { (g[c] + g[m]) * half } else { g[c] };
                    acc.add(v * w);
                }
                acc.value()
            })
            .collect();
        Self {
            grid: *grid,
            values,
            folded,
        }
    }

    fn cell_area(&self) -> T {
        self.grid.hx() * self.grid.hy()
    }

    /// `Re ∫ δρ G` for a cellwise constant `δρ`.
    pub fn directional_derivative(&self, direction: &[Cplx<T>]) -> T {
        let mut acc = CompensatedSum::new();
        for (d, g) in direction.iter().zip(&self.values) {
            acc.add((d * g).re);
        }
        acc.value() * self.cell_area()
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    /// `‖G‖_{L²(Ω)}`
    pub fn l2_norm(&self) -> T {
        (self.values.iter().map(|z| z.norm_sqr()).sum::<T>() * self.cell_area()).sqrt()
    }

    pub fn asymmetry(&self) -> T {
        (0..self.values.len())
            .map(|c| (self.values[c] - self.values[self.grid.mirror_cell(c)]).norm())
            .fold(T::zero(), T::max)
    }

    /// Same layout as a design file.
    pub fn write_text<W: Write>(&self, w: W, bounds: &AdmissibleBounds<T>) -> Result<()> {
        write_cell_field(w, &self.grid, bounds, &self.values)
    }
}

/// Gradient from matched forward and adjoint states.
pub fn gradient<T: Real>(
    design: &DesignField<T>,
    omega: T,
    forward: &[FloquetSolution<T>],
    adjoint: &[FloquetSolution<T>],
    quadrature: &AlphaQuadrature<T>,
) -> Result<GradientField<T>> {
    if forward.len() != quadrature.len() || adjoint.len() != quadrature.len() {
        return Err(Error::Dimension(format!(
            "{} forward and {} adjoint states for {} quadrature points",
            forward.len(),
            adjoint.len(),
            quadrature.len()
        )));
    }
    let grid = design.grid;
    let mut cells = Vec::with_capacity(forward.len());
    for ((u, w), alpha) in forward.iter().zip(adjoint).zip(&quadrature.points) {
        if u.alpha != *alpha || w.alpha != *alpha {
            return Err(Error::Dimension(format!(
                "state alphas ({}, {}) do not match quadrature point {alpha}",
                u.alpha, w.alpha
            )));
        }
        cells.push(cell_gradient(&grid, omega, &u.values, &w.values));
    }
    let parts: Vec<(T, &[Cplx<T>])> = quadrature
        .nodes()
        .zip(&cells)
        .map(|((_, wt), g)| (wt, g.as_slice()))
        .collect();
    Ok(GradientField::combine(&grid, quadrature.is_folded(), &parts))
}

impl<T: Real> FocusingProblem<T> {
    pub fn value_and_gradient(&self, design: &DesignField<T>) -> Result<(T, GradientField<T>)> {
        let e = self.evaluate(design, true)?;
        Ok((e.j, e.gradient.expect("gradient requested")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdRow<T> {
    pub step: T,
    pub finite_difference: T,
    pub relative_error: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport<T> {
    pub adjoint_derivative: T,
    pub rows: Vec<FdRow<T>>,
}

impl<T: Real> FdReport<T> {
    pub fn best_error(&self) -> T {
        self.rows
            .iter()
            .map(|r| r.relative_error)
            .fold(T::infinity(), T::min)
    }
}

/// Central differences of `J` along `direction` against the adjoint value.
///
/// Designs are not projected, so the check also works at the box boundary.
pub fn fd_gradient_check<T: Real>(
    problem: &FocusingProblem<T>,
    design: &DesignField<T>,
    direction: &[Cplx<T>],
    steps: &[T],
) -> Result<FdReport<T>> {
    if direction.len() != design.values.len() {
        return Err(Error::Dimension(format!(
            "direction has {} cells, design {}",
            direction.len(),
            design.values.len()
        )));
    }
    let (_, g) = problem.value_and_gradient(design)?;
    let adjoint_derivative = g.directional_derivative(direction);
    let mut rows = Vec::with_capacity(steps.len());
    for &t in steps {
        let jp = problem.evaluate_j(&design.perturbed(direction, t))?;
        let jm = problem.evaluate_j(&design.perturbed(direction, -t))?;
        let fd = (jp - jm) / (T::lit(2.0) * t);
        let diff = (fd - adjoint_derivative).abs();
        let relative_error = if diff == T::zero() {
            T::zero()
        } else {
            diff / adjoint_derivative.abs().max(fd.abs())
        };
        rows.push(FdRow {
            step: t,
            finite_difference: fd,
            relative_error,
        });
    }
    Ok(FdReport {
        adjoint_derivative,
        rows,
    })
}
