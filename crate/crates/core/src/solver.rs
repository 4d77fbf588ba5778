//! Assembly and direct solution of the Floquet problem for one quasi-momentum.
//!
//! Unknowns are the nodal values of the periodic factor `v` of
//! `u_α(x, y) = e^{iαx} v(x, y)`. Its weak form is
//!
//! ```text
//! ∫ ∇v·∇w̄ + α² v w̄ − 2iα (∂ₓv) w̄ − ω² ρ v w̄  −  ∫_{Γ₀} (T v) w̄  −  ∫_{Γ_b} (T v) w̄  =  2 ∫_{Γ₀} g w̄
//! ```
//!
//! integrated exactly on bilinear elements with ρ constant per cell.

use std::io::Write;

use crate::domain::{DesignField, Grid};
use crate::dtn::{trace_coefficients, trace_load, DtnMatrix, Flavor};
use crate::error::{Error, Result};
use crate::linalg::{norm2, BandLu, BandMatrix};
use crate::scalar::{cis, cplx, Cplx, Real};
use crate::source::ModalTrace;

type Local<T> = [[T; 4]; 4];

/// Exact 4×4 element matrices of a bilinear cell.
#[derive(Debug, Clone, Copy)]
pub struct ElementMatrices<T> {
    /// `∫ ∇φ_l·∇φ_k`
    pub stiffness: Local<T>,
    /// `∫ φ_l φ_k`
    pub mass: Local<T>,
    /// `∫ (∂ₓφ_l) φ_k`
    pub drift: Local<T>,
}

impl<T: Real> ElementMatrices<T> {
    pub fn new(hx: T, hy: T) -> Self {
        let six = T::lit(6.0);
        let two = T::lit(2.0);
        let half = T::lit(0.5);
        let m1 = |h: T| [[two * h / six, h / six], [h / six, two * h / six]];
        let s1 = |h: T| [[T::one() / h, -T::one() / h], [-T::one() / h, T::one() / h]];
        let c1 = [[-half, half], [-half, half]];
        let (mx, my, sx, sy) = (m1(hx), m1(hy), s1(hx), s1(hy));
        let mut stiffness = [[T::zero(); 4]; 4];
        let mut mass = [[T::zero(); 4]; 4];
        let mut drift = [[T::zero(); 4]; 4];
        for k in 0..4 {
            for l in 0..4 {
                let (ka, kb, la, lb) = (k % 2, k / 2, l % 2, l / 2);
                stiffness[k][l] = sx[ka][la] * my[kb][lb] + mx[ka][la] * sy[kb][lb];
                mass[k][l] = mx[ka][la] * my[kb][lb];
                drift[k][l] = c1[ka][la] * my[kb][lb];
            }
        }
        Self {
            stiffness,
            mass,
            drift,
        }
    }

    /// `K + α²M − 2iαC − ω²ρM`
    pub fn floquet(&self, alpha: T, omega: T, rho: Cplx<T>) -> [[Cplx<T>; 4]; 4] {
        let mut a = [[cplx(T::zero(), T::zero()); 4]; 4];
        let w2 = omega * omega;
        for k in 0..4 {
            for l in 0..4 {
                let m = self.mass[k][l];
                a[k][l] = cplx(self.stiffness[k][l] + alpha * alpha * m, -T::lit(2.0) * alpha * self.drift[k][l])
                    - rho * (w2 * m);
            }
        }
        a
    }
}

/// Compressed-row sparse matrix.
#[derive(Debug, Clone)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Cplx<T>>,
}

impl<T: Real> CsrMatrix<T> {
    fn from_rows(rows: Vec<Vec<(usize, Cplx<T>)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Cplx<T>)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn max_row_nnz(&self) -> usize {
        self.row_ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    pub fn get(&self, r: usize, c: usize) -> Cplx<T> {
        self.row(r)
            .find(|e| e.0 == c)
            .map_or(cplx(T::zero(), T::zero()), |e| e.1)
    }

    pub fn matvec(&self, x: &[Cplx<T>]) -> Vec<Cplx<T>> {
        (0..self.n)
            .map(|r| self.row(r).fold(cplx(T::zero(), T::zero()), |a, (c, v)| a + v * x[c]))
            .collect()
    }

    pub fn matvec_adjoint(&self, x: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let mut y = vec![cplx(T::zero(), T::zero()); self.n];
        for (r, &xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                y[c] += v.conj() * xr;
            }
        }
        y
    }

    /// `xᴴ A x`
    pub fn form(&self, x: &[Cplx<T>]) -> Cplx<T> {
        self.matvec(x)
            .iter()
            .zip(x)
            .fold(cplx(T::zero(), T::zero()), |a, (y, x)| a + x.conj() * y)
    }
}

/// Assembles `Σ_cells coef(cell) ⊗ local(cell)` over the grid.
fn assemble_cells<T: Real>(grid: &Grid<T>, mut local: impl FnMut(usize) -> [[Cplx<T>; 4]; 4]) -> CsrMatrix<T> {
    let mut rows: Vec<Vec<(usize, Cplx<T>)>> = vec![Vec::with_capacity(9); grid.num_nodes()];
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let nodes = grid.cell_nodes(i, j);
            let a = local(grid.cell(i, j));
            for (k, &gk) in nodes.iter().enumerate() {
                for (l, &gl) in nodes.iter().enumerate() {
                    rows[gk].push((gl, a[k][l]));
                }
            }
        }
    }
    CsrMatrix::from_rows(rows)
}

/// Gram matrix of the H¹ inner product of `u_α = e^{iαx} v`, in terms of `v`:
/// `∫ |(∂ₓ + iα)v|² + |∂_y v|² + |v|²`.
pub fn h1_gram<T: Real>(grid: &Grid<T>, alpha: T) -> CsrMatrix<T> {
    let e = ElementMatrices::new(grid.hx(), grid.hy());
    let mut local = [[cplx(T::zero(), T::zero()); 4]; 4];
    for k in 0..4 {
        for l in 0..4 {
            let m = e.mass[k][l];
            local[k][l] = cplx(
                e.stiffness[k][l] + (alpha * alpha + T::one()) * m,
                -T::lit(2.0) * alpha * e.drift[k][l],
            );
        }
    }
    assemble_cells(grid, |_| local)
}

/// Position of node column `i` in the solver ordering 0, nx−1, 1, nx−2, …,
/// which keeps periodic neighbours at most two slots apart.
#[inline]
fn folded(nx: usize, i: usize) -> usize {
    if i < nx / 2 {
        2 * i
    } else {
        2 * (nx - i) - 1
    }
}

/// Maps grid node numbering to the banded solver numbering.
pub(crate) fn node_permutation<T: Real>(grid: &Grid<T>) -> Vec<usize> {
    let nx = grid.nx();
    (0..grid.num_nodes())
        .map(|k| (k / nx) * nx + folded(nx, k % nx))
        .collect()
}

/// Copies a grid-stencil matrix into band storage of half-width `nx + 2`.
pub(crate) fn band_from_csr<T: Real>(grid: &Grid<T>, csr: &CsrMatrix<T>, perm: &[usize]) -> BandMatrix<T> {
    let bw = grid.nx() + 2;
    let mut band = BandMatrix::zeros(grid.num_nodes(), bw, bw);
    for (r, &pr) in perm.iter().enumerate() {
        for (c, v) in csr.row(r) {
            band.add(pr, perm[c], v);
        }
    }
    band
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// `Γ₀`, the line `y = 0` facing the source.
    Top,
    /// `Γ_b`, the line `y = −b` facing the image plane.
    Bottom,
}

#[derive(Debug, Clone)]
pub struct AssembledSystem<T> {
    pub alpha: T,
    pub omega: T,
    pub grid: Grid<T>,
    pub n_trunc: usize,
    pub design_hash: u64,
    interior: CsrMatrix<T>,
    dtn: DtnMatrix<T>,
    pub rhs: Vec<Cplx<T>>,
}

pub fn assemble<T: Real>(
    design: &DesignField<T>,
    alpha: T,
    omega: T,
    dtn: &DtnMatrix<T>,
    g_trace: &ModalTrace<T>,
) -> Result<AssembledSystem<T>> {
    let grid = design.grid;
    if dtn.nx() != grid.nx() {
        return Err(Error::Dimension(format!(
            "DtN block has {} boundary nodes, grid has {}",
            dtn.nx(),
            grid.nx()
        )));
    }
    if dtn.flavor != Flavor::Forward {
        return Err(Error::Dimension("forward problem needs the forward DtN flavor".into()));
    }
    if dtn.n_trunc != g_trace.n_trunc() {
        return Err(Error::Dimension(format!(
            "DtN truncation {} differs from source trace truncation {}",
            dtn.n_trunc,
            g_trace.n_trunc()
        )));
    }
    let e = ElementMatrices::new(grid.hx(), grid.hy());
    let interior = assemble_cells(&grid, |c| e.floquet(alpha, omega, design.values[c]));
    let mut rhs = vec![cplx(T::zero(), T::zero()); grid.num_nodes()];
    for (k, v) in trace_load(&grid, g_trace).into_iter().enumerate() {
        rhs[grid.node(k, 0)] = v * T::lit(2.0);
    }
    Ok(AssembledSystem {
        alpha,
        omega,
        grid,
        n_trunc: dtn.n_trunc,
        design_hash: design.content_hash(),
        interior,
        dtn: dtn.clone(),
        rhs,
    })
}

impl<T: Real> AssembledSystem<T> {
    pub fn interior(&self) -> &CsrMatrix<T> {
        &self.interior
    }

    pub fn dtn(&self) -> &DtnMatrix<T> {
        &self.dtn
    }

    fn boundary_rows(&self) -> [usize; 2] {
        [0, self.grid.ny()]
    }

    /// `A x`
    pub fn matvec(&self, x: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let mut y = self.interior.matvec(x);
        let nx = self.grid.nx();
        for j in self.boundary_rows() {
            let base = j * nx;
            let t = self.dtn.apply(&x[base..base + nx]);
            for (yk, tk) in y[base..base + nx].iter_mut().zip(t) {
                *yk -= tk;
            }
        }
        y
    }

    /// `Aᴴ x`
    pub fn matvec_adjoint(&self, x: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let mut y = self.interior.matvec_adjoint(x);
        let nx = self.grid.nx();
        for j in self.boundary_rows() {
            let base = j * nx;
            for l in 0..nx {
                let mut s = cplx(T::zero(), T::zero());
                for k in 0..nx {
                    s += self.dtn.entry(k, l).conj() * x[base + k];
                }
                y[base + l] -= s;
            }
        }
        y
    }

    /// Entry `(r, c)` of the full matrix, in grid node numbering.
    pub fn entry(&self, r: usize, c: usize) -> Cplx<T> {
        let nx = self.grid.nx();
        let mut v = self.interior.get(r, c);
        if r / nx == c / nx && self.boundary_rows().contains(&(r / nx)) {
            v -= self.dtn.entry(r % nx, c % nx);
        }
        v
    }

    fn to_band(&self, perm: &[usize]) -> BandMatrix<T> {
        let nx = self.grid.nx();
        let mut band = band_from_csr(&self.grid, &self.interior, perm);
        for j in self.boundary_rows() {
            for k in 0..nx {
                for l in 0..nx {
                    band.add(perm[j * nx + k], perm[j * nx + l], -self.dtn.entry(k, l));
                }
            }
        }
        band
    }

    pub fn factor(self) -> Result<FactoredSystem<T>> {
        let perm = node_permutation(&self.grid);
        let lu = self.to_band(&perm).factor().ok_or(Error::Singular {
            alpha: self.alpha.to_f64().unwrap_or(f64::NAN),
            design_hash: self.design_hash,
        })?;
        Ok(FactoredSystem {
            system: self,
            perm,
            lu,
        })
    }
}

/// Assembled system together with its LU factors; serves both the forward
/// and the conjugate-transposed solve.
#[derive(Debug, Clone)]
pub struct FactoredSystem<T> {
    pub system: AssembledSystem<T>,
    perm: Vec<usize>,
    lu: BandLu<T>,
}

impl<T: Real> FactoredSystem<T> {
    fn raw_solve(&self, b: &[Cplx<T>], adjoint: bool) -> Vec<Cplx<T>> {
        let mut work = vec![cplx(T::zero(), T::zero()); b.len()];
        for (k, &p) in self.perm.iter().enumerate() {
            work[p] = b[k];
        }
        if adjoint {
            self.lu.solve_adjoint(&mut work);
        } else {
            self.lu.solve(&mut work);
        }
        self.perm.iter().map(|&p| work[p]).collect()
    }

    fn checked_solve(&self, b: &[Cplx<T>], adjoint: bool) -> Result<Vec<Cplx<T>>> {
        let sys = &self.system;
        let bnorm = norm2(b);
        if bnorm == T::zero() {
            return Ok(vec![cplx(T::zero(), T::zero()); b.len()]);
        }
        let apply = |x: &[Cplx<T>]| if adjoint { sys.matvec_adjoint(x) } else { sys.matvec(x) };
        let residual = |x: &[Cplx<T>]| -> Vec<Cplx<T>> {
            apply(x).iter().zip(b).map(|(ax, bk)| bk - ax).collect()
        };
        let mut x = self.raw_solve(b, adjoint);
        let mut r = residual(&x);
        let tol = T::solve_tolerance();
        if norm2(&r) / bnorm > tol {
            let dx = self.raw_solve(&r, adjoint);
            for (xk, d) in x.iter_mut().zip(dx) {
                *xk += d;
            }
            r = residual(&x);
        }
        let rel = norm2(&r) / bnorm;
        if !(rel <= tol) {
            return Err(Error::Inaccurate {
                alpha: sys.alpha.to_f64().unwrap_or(f64::NAN),
                residual: rel.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(x)
    }

    /// Solves `A x = b` with residual check.
    pub fn solve(&self, b: &[Cplx<T>]) -> Result<Vec<Cplx<T>>> {
        self.checked_solve(b, false)
    }

    /// Solves `Aᴴ x = b` with residual check.
    pub fn solve_adjoint_rhs(&self, b: &[Cplx<T>]) -> Result<Vec<Cplx<T>>> {
        self.checked_solve(b, true)
    }

    pub fn solve_forward(&self) -> Result<FloquetSolution<T>> {
        let values = self.solve(&self.system.rhs)?;
        Ok(self.wrap(values))
    }

    /// Adjoint state for the bottom-boundary load `∫_{Γ_b} ψ φ̄_k`.
    pub fn solve_adjoint(&self, psi: &ModalTrace<T>) -> Result<FloquetSolution<T>> {
        let grid = &self.system.grid;
        let mut load = vec![cplx(T::zero(), T::zero()); grid.num_nodes()];
        for (k, v) in trace_load(grid, psi).into_iter().enumerate() {
            load[grid.node(k, grid.ny())] = v;
        }
        let values = self.solve_adjoint_rhs(&load)?;
        Ok(self.wrap(values))
    }

    fn wrap(&self, values: Vec<Cplx<T>>) -> FloquetSolution<T> {
        FloquetSolution {
            alpha: self.system.alpha,
            omega: self.system.omega,
            grid: self.system.grid,
            n_trunc: self.system.n_trunc,
            design_hash: self.system.design_hash,
            values,
        }
    }
}

pub fn solve_forward<T: Real>(system: AssembledSystem<T>) -> Result<FloquetSolution<T>> {
    system.factor()?.solve_forward()
}

/// Nodal values of the periodic factor `v` of `u_α = e^{iαx} v`.
#[derive(Debug, Clone)]
pub struct FloquetSolution<T> {
    pub alpha: T,
    pub omega: T,
    pub grid: Grid<T>,
    pub n_trunc: usize,
    pub design_hash: u64,
    pub values: Vec<Cplx<T>>,
}

impl<T: Real> FloquetSolution<T> {
    /// `u_α` at node `(i, j)`.
    pub fn field_at(&self, i: usize, j: usize) -> Cplx<T> {
        self.values[self.grid.node(i, j)] * cis(self.alpha * self.grid.node_x(i))
    }

    pub fn boundary_values(&self, which: Boundary) -> &[Cplx<T>] {
        let nx = self.grid.nx();
        let j = match which {
            Boundary::Top => 0,
            Boundary::Bottom => self.grid.ny(),
        };
        &self.values[j * nx..(j + 1) * nx]
    }

    /// Writes `nx ny`, a metadata line `alpha omega J`, then nodal `re im` of `u_α`.
    pub fn write_field<W: Write>(&self, mut w: W, objective: Option<T>) -> Result<()> {
        writeln!(w, "{} {}", self.grid.nx(), self.grid.node_rows())?;
        match objective {
            Some(j) => writeln!(w, "{:.16e} {:.16e} {:.16e}", self.alpha, self.omega, j)?,
            None => writeln!(w, "{:.16e} {:.16e} nan", self.alpha, self.omega)?,
        }
        for j in 0..self.grid.node_rows() {
            for i in 0..self.grid.nx() {
                let u = self.field_at(i, j);
                writeln!(w, "{:.16e} {:.16e}", u.re, u.im)?;
            }
        }
        Ok(())
    }
}

/// Fourier coefficients of the solution on one boundary line.
pub fn extract_trace<T: Real>(solution: &FloquetSolution<T>, which: Boundary) -> ModalTrace<T> {
    trace_coefficients(
        &solution.grid,
        solution.alpha,
        solution.boundary_values(which),
        solution.n_trunc,
    )
}
