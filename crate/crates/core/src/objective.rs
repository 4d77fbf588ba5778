//! The focusing functional `J(ρ) = ½ ∫ ‖F(ρ, α) − q_α‖² dα` and its
//! quadrature in α.

use rayon::prelude::*;

use crate::adjoint::{cell_gradient, GradientField};
use crate::domain::{DesignField, Grid};
use crate::dtn::{build_dtn, DtnMatrix, Flavor};
use crate::error::{Error, Result};
use crate::numerics::{gauss_legendre, near_wood_anomaly};
use crate::scalar::{CompensatedSum, Real};
use crate::solver::{assemble, extract_trace, Boundary, FloquetSolution};
use crate::source::{incident_dirichlet_trace, incident_neumann_trace, target_dirichlet_trace, ModalTrace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureKind {
    /// Equally spaced midpoints on (0, ½), mirrored contributions folded in.
    Midpoint,
    /// Gauss–Legendre panels between Wood points with cosine grading at
    /// panel ends, folded like [`QuadratureKind::Midpoint`].
    Graded,
    /// Midpoints on both halves of (−½, ½); no symmetry assumed.
    FullLine,
}

/// Points and weights for `∫_{−½}^{½} · dα`.
///
/// With `symmetry_factor = 2` only positive α are stored and each contributes
/// for itself and its mirror image.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaQuadrature<T> {
    pub kind: QuadratureKind,
    pub points: Vec<T>,
    pub weights: Vec<T>,
    pub symmetry_factor: T,
}

impl<T: Real> AlphaQuadrature<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_folded(&self) -> bool {
        self.symmetry_factor != T::one()
    }

    /// `symmetry_factor · Σ weights`
    pub fn total_measure(&self) -> T {
        self.symmetry_factor * self.weights.iter().copied().sum::<T>()
    }

    /// `(α, weight · symmetry_factor)` pairs.
    pub fn nodes(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.points
            .iter()
            .zip(&self.weights)
            .map(move |(&a, &w)| (a, w * self.symmetry_factor))
    }
}

/// Midpoint rule on (0, ½]: `α_k = (k − ½)/(2·count)`, weight `1/(2·count)`.
pub fn make_quadrature<T: Real>(count: usize, omega: T, n_trunc: usize) -> Result<AlphaQuadrature<T>> {
    if count == 0 {
        return Err(Error::Config("alpha_count must be at least 1".into()));
    }
    let two_c = T::of(2 * count);
    let points = (1..=count)
        .map(|k| avoid_wood((T::of(k) - T::lit(0.5)) / two_c, omega, n_trunc))
        .collect();
    Ok(AlphaQuadrature {
        kind: QuadratureKind::Midpoint,
        points,
        weights: vec![T::one() / two_c; count],
        symmetry_factor: T::lit(2.0),
    })
}

/// Midpoint rule on all of (−½, ½) with `2·count` points.
pub fn full_line_quadrature<T: Real>(count: usize, omega: T, n_trunc: usize) -> Result<AlphaQuadrature<T>> {
    let half = make_quadrature(count, omega, n_trunc)?;
    let mut points: Vec<T> = half.points.iter().rev().map(|&a| -a).collect();
    points.extend(half.points.iter().copied());
    Ok(AlphaQuadrature {
        kind: QuadratureKind::FullLine,
        weights: vec![half.weights[0]; points.len()],
        points,
        symmetry_factor: T::one(),
    })
}

/// Graded rule for integrands with inverse-square-root Wood singularities.
///
/// (0, ½) is split at every α with `|n + α| = ω`; on each panel `[a, b]` the
/// substitution `α = a + (b − a)(1 − cos πs)/2` removes the endpoint
/// singularity and Gauss–Legendre in `s` does the rest. `count` points are
/// shared among panels in proportion to their length, at least two each.
pub fn graded_quadrature<T: Real>(count: usize, omega: T, n_trunc: usize) -> Result<AlphaQuadrature<T>> {
    if count == 0 {
        return Err(Error::Config("alpha_count must be at least 1".into()));
    }
    let half = T::lit(0.5);
    let mut cuts = vec![T::zero(), half];
    let reach = omega.ceil().to_i64().unwrap_or(0) + 1;
    for n in -reach..=reach {
        for target in [omega, -omega] {
            let a = target - T::of_i64(n);
            if a > T::zero() && a < half {
                cuts.push(a);
            }
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < T::lit(1e-12));
    let panels: Vec<(T, T)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    let per_panel: Vec<usize> = panels
        .iter()
        .map(|&(a, b)| {
            let share = ((b - a) / half * T::of(count)).round().to_usize().unwrap_or(0);
            share.max(2)
        })
        .collect();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (&(a, b), &m) in panels.iter().zip(&per_panel) {
        let (s, w) = gauss_legendre::<T>(m);
        let start = weights.len();
        for (sk, wk) in s.into_iter().zip(w) {
            let t = (sk + T::one()) * half;
            let theta = T::PI() * t;
            let alpha = a + (b - a) * (T::one() - theta.cos()) * half;
            // dα/dsk = (b − a)·π·sin(πt)/4
            let jac = (b - a) * T::PI() * theta.sin() * half * half;
            points.push(avoid_wood(alpha, omega, n_trunc));
            weights.push(wk * jac);
        }
        // exact panel length; the correction is spectrally small in m
        let sum: T = weights[start..].iter().copied().sum();
        for w in &mut weights[start..] {
            *w *= (b - a) / sum;
        }
    }
    Ok(AlphaQuadrature {
        kind: QuadratureKind::Graded,
        points,
        weights,
        symmetry_factor: T::lit(2.0),
    })
}

/// Nudges α off any Wood anomaly of modes `|n| ≤ n_trunc`.
fn avoid_wood<T: Real>(alpha: T, omega: T, n_trunc: usize) -> T {
    let hits = |a: T| {
        let m = n_trunc as i64;
        (-m..=m).any(|n| near_wood_anomaly(T::of_i64(n) + a, omega))
    };
    if !hits(alpha) {
        return alpha;
    }
    let step = T::lit(1e-8) * omega.max(T::one());
    for k in 1..1000 {
        for sign in [T::one(), -T::one()] {
            let a = alpha + sign * step * T::of(k);
            if !hits(a) {
                return a;
            }
        }
    }
    alpha
}

/// Precomputed per-α data of the focusing problem.
#[derive(Debug, Clone)]
pub struct AlphaContext<T> {
    pub alpha: T,
    /// Quadrature weight times symmetry factor.
    pub weight: T,
    pub dtn: DtnMatrix<T>,
    pub source_neumann: ModalTrace<T>,
    pub source_dirichlet: ModalTrace<T>,
    pub target: ModalTrace<T>,
}

/// Point source at height `h` above the slab, image target at depth `h1`
/// below it.
#[derive(Debug, Clone)]
pub struct FocusingProblem<T> {
    pub grid: Grid<T>,
    pub omega: T,
    pub h: T,
    pub h1: T,
    pub n_trunc: usize,
    pub quadrature: AlphaQuadrature<T>,
    contexts: Vec<AlphaContext<T>>,
}

/// Outcome of solving one quasi-momentum.
#[derive(Debug, Clone)]
pub struct AlphaResult<T> {
    pub alpha: T,
    pub weight: T,
    pub solution: FloquetSolution<T>,
    pub trace_top: ModalTrace<T>,
    pub trace_bottom: ModalTrace<T>,
    /// `F(ρ, α) − q_α`
    pub residual: ModalTrace<T>,
    /// `‖F − q‖²` on the period.
    pub misfit: T,
    /// Unfolded cellwise gradient density of this α.
    pub cell_gradient: Option<Vec<crate::scalar::Cplx<T>>>,
}

#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub j: T,
    pub per_alpha: Vec<AlphaResult<T>>,
    pub gradient: Option<GradientField<T>>,
}

impl<T: Real> FocusingProblem<T> {
    pub fn new(grid: Grid<T>, omega: T, h: T, h1: T, n_trunc: usize, quadrature: AlphaQuadrature<T>) -> Result<Self> {
        if !(omega > T::zero()) {
            return Err(Error::Config(format!("omega must be positive, got {omega}")));
        }
        let contexts = quadrature
            .nodes()
            .map(|(alpha, weight)| {
                Ok(AlphaContext {
                    alpha,
                    weight,
                    dtn: build_dtn(alpha, omega, &grid, n_trunc, Flavor::Forward)?,
                    source_neumann: incident_neumann_trace(alpha, omega, h, n_trunc)?,
                    source_dirichlet: incident_dirichlet_trace(alpha, omega, h, n_trunc)?,
                    target: target_dirichlet_trace(alpha, omega, h1, n_trunc)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            grid,
            omega,
            h,
            h1,
            n_trunc,
            quadrature,
            contexts,
        })
    }

    pub fn contexts(&self) -> &[AlphaContext<T>] {
        &self.contexts
    }

    fn solve_alpha(&self, ctx: &AlphaContext<T>, design: &DesignField<T>, with_gradient: bool) -> Result<AlphaResult<T>> {
        let system = assemble(design, ctx.alpha, self.omega, &ctx.dtn, &ctx.source_neumann)?;
        let factored = system.factor()?;
        let solution = factored.solve_forward()?;
        let trace_bottom = extract_trace(&solution, Boundary::Bottom);
        let trace_top = extract_trace(&solution, Boundary::Top);
        let residual = trace_bottom.sub(&ctx.target)?;
        let misfit = residual.l2_norm_sqr();
        let cell_gradient = if with_gradient {
            let w = factored.solve_adjoint(&residual)?;
            Some(cell_gradient(&self.grid, self.omega, &solution.values, &w.values))
        } else {
            None
        };
        Ok(AlphaResult {
            alpha: ctx.alpha,
            weight: ctx.weight,
            solution,
            trace_top,
            trace_bottom,
            residual,
            misfit,
            cell_gradient,
        })
    }

    fn check_grid(&self, design: &DesignField<T>) -> Result<()> {
        if design.grid != self.grid {
            return Err(Error::Dimension(format!(
                "design grid {}x{} does not match problem grid {}x{}",
                design.grid.nx(),
                design.grid.ny(),
                self.grid.nx(),
                self.grid.ny()
            )));
        }
        Ok(())
    }

    /// Solves every α; per-α results come back in quadrature order.
    pub fn evaluate(&self, design: &DesignField<T>, with_gradient: bool) -> Result<Evaluation<T>> {
        self.check_grid(design)?;
        let per_alpha = self
            .contexts
            .par_iter()
            .map(|ctx| self.solve_alpha(ctx, design, with_gradient))
            .collect::<Result<Vec<_>>>()?;
        let mut j = CompensatedSum::new();
        for r in &per_alpha {
            j.add(T::lit(0.5) * r.weight * r.misfit);
        }
        let gradient = if with_gradient {
            Some(GradientField::accumulate(&self.grid, &self.quadrature, &per_alpha)?)
        } else {
            None
        };
        Ok(Evaluation {
            j: j.value(),
            per_alpha,
            gradient,
        })
    }

    pub fn evaluate_j(&self, design: &DesignField<T>) -> Result<T> {
        Ok(self.evaluate(design, false)?.j)
    }
}

/// `J = ½ Σ_α weight · ‖r_α‖²` for given residual traces.
pub fn objective_from_residuals<T: Real>(quadrature: &AlphaQuadrature<T>, residuals: &[ModalTrace<T>]) -> Result<T> {
    if residuals.len() != quadrature.len() {
        return Err(Error::Dimension(format!(
            "{} residual traces for {} quadrature points",
            residuals.len(),
            quadrature.len()
        )));
    }
    let mut j = CompensatedSum::new();
    for ((_, w), r) in quadrature.nodes().zip(residuals) {
        j.add(T::lit(0.5) * w * r.l2_norm_sqr());
    }
    Ok(j.value())
}
