//! Projected gradient descent over the admissible box with an Armijo line
//! search and mirror symmetrization.
//!
//! Since `DJ(ρ)(δρ) = ∫ δρ_r Re G − δρ_i Im G`, steepest descent moves the
//! real part along `−Re G` and the imaginary part along `+Im G`.

use std::fmt;

use crate::adjoint::GradientField;
use crate::domain::DesignField;
use crate::error::{Error, Result};
use crate::objective::FocusingProblem;
use crate::scalar::{cplx, Cplx, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig<T> {
    pub max_iter: usize,
    /// Relative decrease of J over `window` iterations below which the run stops.
    pub tol_j: T,
    pub window: usize,
    pub tol_kkt: T,
    pub armijo: T,
    pub max_backtracks: usize,
}

impl<T: Real> Default for OptimizerConfig<T> {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol_j: T::lit(1e-6),
            window: 10,
            tol_kkt: T::lit(1e-4),
            armijo: T::lit(1e-4),
            max_backtracks: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    MaxIterations,
    /// J stopped decreasing by more than `tol_j` over the window.
    Converged,
    /// KKT residual dropped below `tol_kkt`.
    Stationary,
    /// No admissible step decreased J.
    Stalled,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Running => "running",
            Status::MaxIterations => "max_iterations",
            Status::Converged => "converged",
            Status::Stationary => "stationary",
            Status::Stalled => "stalled",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryEntry<T> {
    pub iter: usize,
    pub j: T,
    pub step_len: T,
    pub grad_norm: T,
    pub kkt_residual: T,
}

impl<T: Real> HistoryEntry<T> {
    /// `iter J step_len grad_norm kkt_residual`
    pub fn log_line(&self) -> String {
        format!(
            "{} {:.16e} {:.16e} {:.16e} {:.16e}",
            self.iter, self.j, self.step_len, self.grad_norm, self.kkt_residual
        )
    }

    pub fn parse_log_line(line: &str, lineno: usize) -> Result<Self> {
        let bad = |what: &str| Error::Parse {
            line: lineno,
            message: format!("bad {what} in log line"),
        };
        let mut t = line.split_whitespace();
        let iter = t.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("iteration"))?;
        let mut num = |what: &str| -> Result<T> { t.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(what)) };
        Ok(Self {
            iter,
            j: num("J")?,
            step_len: num("step length")?,
            grad_norm: num("gradient norm")?,
            kkt_residual: num("KKT residual")?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerState<T> {
    pub iteration: usize,
    pub design: DesignField<T>,
    pub j: T,
    pub gradient: GradientField<T>,
    /// Last accepted step length; zero before the first step.
    pub last_step: T,
    pub history: Vec<HistoryEntry<T>>,
    pub status: Status,
}

impl<T: Real> OptimizerState<T> {
    /// Evaluates J and G at a starting design, made admissible and symmetric.
    pub fn start(problem: &FocusingProblem<T>, design: DesignField<T>) -> Result<Self> {
        Self::resume(problem, design, 0, T::zero(), Vec::new())
    }

    /// Rebuilds a state from a checkpoint: design, iteration count, last
    /// step length and log history.
    pub fn resume(
        problem: &FocusingProblem<T>,
        design: DesignField<T>,
        iteration: usize,
        last_step: T,
        mut history: Vec<HistoryEntry<T>>,
    ) -> Result<Self> {
        let design = design.symmetrize_x()?.project_to_admissible();
        let (j, gradient) = problem.value_and_gradient(&design)?;
        let kkt = kkt_residual(&design, &gradient);
        history.retain(|h| h.iter < iteration);
        history.push(HistoryEntry {
            iter: iteration,
            j,
            step_len: last_step,
            grad_norm: gradient.l2_norm(),
            kkt_residual: kkt,
        });
        Ok(Self {
            iteration,
            design,
            j,
            gradient,
            last_step,
            history,
            status: Status::Running,
        })
    }

    pub fn kkt_residual(&self) -> T {
        self.history.last().map_or(T::infinity(), |h| h.kkt_residual)
    }
}

/// Trial design `P(S(ρ + s·d))` with `d = (−Re G, +Im G)`.
fn trial_design<T: Real>(design: &DesignField<T>, gradient: &GradientField<T>, s: T) -> Result<DesignField<T>> {
    let direction: Vec<Cplx<T>> = gradient.values.iter().map(|g| cplx(-g.re, g.im)).collect();
    Ok(design.perturbed(&direction, s).symmetrize_x()?.project_to_admissible())
}

/// One projected-gradient step with Armijo backtracking.
///
/// Accepts the first halved step with `J(ρ⁺) ≤ J(ρ) − c·‖ρ − ρ⁺‖²/s`; after
/// `max_backtracks` failures, or when projection leaves the design
/// unchanged, returns the state unchanged with [`Status::Stalled`].
pub fn descent_step<T: Real>(
    problem: &FocusingProblem<T>,
    state: &OptimizerState<T>,
    config: &OptimizerConfig<T>,
) -> Result<OptimizerState<T>> {
    let mut stalled = state.clone();
    stalled.status = Status::Stalled;
    let gmax = state.gradient.max_abs();
    if !(gmax > T::zero()) {
        return Ok(stalled);
    }
    let mut s = if state.last_step > T::zero() {
        T::lit(2.0) * state.last_step
    } else {
        T::one() / gmax
    };
    let area = problem.grid.hx() * problem.grid.hy();
    for _ in 0..=config.max_backtracks {
        let trial = trial_design(&state.design, &state.gradient, s)?;
        let moved: T = trial
            .values
            .iter()
            .zip(&state.design.values)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<T>()
            * area;
        if moved == T::zero() {
            return Ok(stalled);
        }
        let eval = problem.evaluate(&trial, true)?;
        if eval.j <= state.j - config.armijo * moved / s {
            let gradient = eval.gradient.expect("gradient requested");
            let kkt = kkt_residual(&trial, &gradient);
            let iteration = state.iteration + 1;
            let mut history = state.history.clone();
            history.push(HistoryEntry {
                iter: iteration,
                j: eval.j,
                step_len: s,
                grad_norm: gradient.l2_norm(),
                kkt_residual: kkt,
            });
            return Ok(OptimizerState {
                iteration,
                design: trial,
                j: eval.j,
                gradient,
                last_step: s,
                history,
                status: Status::Running,
            });
        }
        s = s * T::lit(0.5);
    }
    Ok(stalled)
}

/// Largest violation of the pointwise optimality conditions.
///
/// Real part: `Re G = 0` inside, `Re G ≥ 0` at `ρ_r0`, `Re G ≤ 0` at `ρ_r1`.
/// Imaginary part, with the sign reversed: `Im G ≤ 0` at `ρ_i0`, `Im G ≥ 0`
/// at `ρ_i1`. A part whose bounds coincide is fixed and never violates.
pub fn kkt_residual<T: Real>(design: &DesignField<T>, gradient: &GradientField<T>) -> T {
    let b = &design.bounds;
    let mut worst = T::zero();
    for (rho, g) in design.values.iter().zip(&gradient.values) {
        let re = part_violation(rho.re, b.rho_r0, b.rho_r1, g.re);
        let im = part_violation(rho.im, b.rho_i0, b.rho_i1, -g.im);
        worst = worst.max(re).max(im);
    }
    worst
}

/// Violation for a variable `x ∈ [lo, hi]` with descent direction `−d`.
fn part_violation<T: Real>(x: T, lo: T, hi: T, d: T) -> T {
    let scale = T::lit(1e-12) * (T::one() + hi.abs());
    let at_lo = x <= lo + scale;
    let at_hi = x >= hi - scale;
    match (at_lo, at_hi) {
        (true, true) => T::zero(),
        (true, false) => (-d).max(T::zero()),
        (false, true) => d.max(T::zero()),
        (false, false) => d.abs(),
    }
}

/// Stopping test on a state's history.
pub fn termination<T: Real>(state: &OptimizerState<T>, config: &OptimizerConfig<T>) -> Status {
    if state.status == Status::Stalled {
        return Status::Stalled;
    }
    if state.kkt_residual() < config.tol_kkt {
        return Status::Stationary;
    }
    let h = &state.history;
    if h.len() > config.window {
        let old = h[h.len() - 1 - config.window].j;
        let new = h[h.len() - 1].j;
        if old > T::zero() && (old - new) / old < config.tol_j {
            return Status::Converged;
        }
    }
    if state.iteration >= config.max_iter {
        return Status::MaxIterations;
    }
    Status::Running
}

/// Iterates [`descent_step`] until a stopping rule fires. `on_step` sees
/// the starting state and every accepted state, e.g. to log and checkpoint.
pub fn run<T: Real>(
    problem: &FocusingProblem<T>,
    start: OptimizerState<T>,
    config: &OptimizerConfig<T>,
    mut on_step: impl FnMut(&OptimizerState<T>) -> Result<()>,
) -> Result<OptimizerState<T>> {
    let mut state = start;
    on_step(&state)?;
    loop {
        let status = termination(&state, config);
        if status != Status::Running {
            state.status = status;
            return Ok(state);
        }
        let next = descent_step(problem, &state, config)?;
        if next.status == Status::Stalled {
            state.status = Status::Stalled;
            return Ok(state);
        }
        state = next;
        on_step(&state)?;
    }
}
