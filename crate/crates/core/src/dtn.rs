//! Truncated Dirichlet-to-Neumann operators on the horizontal boundaries.
//!
//! The operator acts diagonally on Fourier modes. Its Galerkin matrix in the
//! hat basis, `G[k][l] = ∫_Γ (T φ_l) φ̄_k dx = 2π Σ_n D_n φ̂_l(n) conj(φ̂_k(n))`,
//! is circulant because the hat coefficients only differ by a phase.

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::linalg::BandMatrix;
use crate::numerics::{beta, hat_trace_fourier, sinc};
use crate::scalar::{cis, cplx, Cplx, Real};
use crate::source::{modes, propagating_cutoff, ModalTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    /// Multipliers `iβ(n+α)`.
    Forward,
    /// Multipliers `−i·conj(β(n+α))`.
    Adjoint,
}

#[derive(Debug, Clone)]
pub struct DtnMatrix<T> {
    pub alpha: T,
    pub omega: T,
    pub n_trunc: usize,
    pub flavor: Flavor,
    nx: usize,
    hx: T,
    /// Row-major `nx × nx` Galerkin matrix.
    matrix: Vec<Cplx<T>>,
}

/// Fourier multiplier of mode `n` for the given flavor.
pub fn multiplier<T: Real>(n: i64, alpha: T, omega: T, flavor: Flavor) -> Cplx<T> {
    let b = beta(T::of_i64(n) + alpha, omega).value;
    match flavor {
        Flavor::Forward => cplx(-b.im, b.re),
        Flavor::Adjoint => cplx(-b.im, -b.re),
    }
}

pub fn build_dtn<T: Real>(
    alpha: T,
    omega: T,
    grid: &Grid<T>,
    n_trunc: usize,
    flavor: Flavor,
) -> Result<DtnMatrix<T>> {
    let need = propagating_cutoff(omega) + 1;
    if n_trunc < need {
        return Err(Error::Config(format!(
            "N_trunc = {n_trunc} drops propagating modes at omega = {omega}; need at least {need}"
        )));
    }
    Ok(DtnMatrix::with_multipliers(alpha, omega, grid, n_trunc, flavor, |n| {
        multiplier(n, alpha, omega, flavor)
    }))
}

impl<T: Real> DtnMatrix<T> {
    /// Galerkin matrix of an arbitrary diagonal Fourier multiplier.
    pub fn with_multipliers(
        alpha: T,
        omega: T,
        grid: &Grid<T>,
        n_trunc: usize,
        flavor: Flavor,
        d: impl Fn(i64) -> Cplx<T>,
    ) -> Self {
        let nx = grid.nx();
        let hx = grid.hx();
        let weights: Vec<(i64, Cplx<T>)> = modes(n_trunc)
            .map(|n| {
                let s = hat_scale(hx, n);
                (n, d(n) * (T::TAU() * s * s))
            })
            .collect();
        // first column: entry (d, 0) for node offset d
        let column: Vec<Cplx<T>> = (0..nx)
            .map(|off| {
                weights
                    .iter()
                    .map(|&(n, w)| w * cis(T::of_i64(n) * T::of(off) * hx))
                    .fold(cplx(T::zero(), T::zero()), |a, b| a + b)
            })
            .collect();
        let mut matrix = vec![cplx(T::zero(), T::zero()); nx * nx];
        for k in 0..nx {
            for l in 0..nx {
                matrix[k * nx + l] = column[(k + nx - l) % nx];
            }
        }
        Self {
            alpha,
            omega,
            n_trunc,
            flavor,
            nx,
            hx,
            matrix,
        }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    /// `∫_Γ (T φ_l) φ̄_k`
    #[inline]
    pub fn entry(&self, k: usize, l: usize) -> Cplx<T> {
        self.matrix[k * self.nx + l]
    }

    pub fn matrix(&self) -> &[Cplx<T>] {
        &self.matrix
    }

    /// `G v` for a nodal trace `v`.
    pub fn apply(&self, v: &[Cplx<T>]) -> Vec<Cplx<T>> {
        assert_eq!(v.len(), self.nx);
        (0..self.nx)
            .map(|k| {
                self.matrix[k * self.nx..(k + 1) * self.nx]
                    .iter()
                    .zip(v)
                    .fold(cplx(T::zero(), T::zero()), |a, (g, x)| a + g * x)
            })
            .collect()
    }

    /// Nodal values of `T v`: the Galerkin action followed by the inverse of
    /// the boundary mass matrix.
    pub fn apply_nodal(&self, v: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let mut y = self.apply(v);
        let nx = self.nx;
        let mut mass = BandMatrix::zeros(nx, nx - 1, nx - 1);
        let six = T::lit(6.0);
        for k in 0..nx {
            mass.add(k, k, cplx(T::lit(4.0) * self.hx / six, T::zero()));
            mass.add(k, (k + 1) % nx, cplx(self.hx / six, T::zero()));
            mass.add(k, (k + nx - 1) % nx, cplx(self.hx / six, T::zero()));
        }
        mass.factor()
            .expect("boundary mass matrix is positive definite")
            .solve(&mut y);
        y
    }

    /// Largest `|G_adj[k][l] − conj(G_fwd[l][k])|`.
    pub fn adjoint_defect(forward: &Self, adjoint: &Self) -> T {
        let nx = forward.nx;
        let mut worst = T::zero();
        for k in 0..nx {
            for l in 0..nx {
                let d = (adjoint.entry(k, l) - forward.entry(l, k).conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }
}

#[inline]
fn hat_scale<T: Real>(hx: T, n: i64) -> T {
    let s = sinc(T::of_i64(n) * hx / T::lit(2.0));
    hx / T::TAU() * s * s
}

/// Exact Fourier coefficients of a nodal boundary trace.
pub fn trace_coefficients<T: Real>(grid: &Grid<T>, alpha: T, nodal: &[Cplx<T>], n_trunc: usize) -> ModalTrace<T> {
    assert_eq!(nodal.len(), grid.nx());
    let hx = grid.hx();
    let coeffs = modes(n_trunc)
        .map(|n| {
            nodal
                .iter()
                .enumerate()
                .map(|(l, &u)| u * hat_trace_fourier(l, hx, n))
                .fold(cplx(T::zero(), T::zero()), |a, b| a + b)
        })
        .collect();
    ModalTrace::from_coeffs(alpha, coeffs).expect("odd mode count")
}

/// Load vector `∫_Γ ψ φ_k dx` of a modal trace on the boundary nodes.
pub fn trace_load<T: Real>(grid: &Grid<T>, psi: &ModalTrace<T>) -> Vec<Cplx<T>> {
    let hx = grid.hx();
    (0..grid.nx())
        .map(|k| {
            psi.iter()
                .map(|(n, c)| c * hat_trace_fourier(k, hx, n).conj())
                .fold(cplx(T::zero(), T::zero()), |a, b| a + b)
                * T::TAU()
        })
        .collect()
}
