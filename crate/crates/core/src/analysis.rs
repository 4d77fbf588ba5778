//! Post-processing of solved problems: the field below the slab, focal spot
//! width, modal spectra, energy bookkeeping and the Lax–Milgram bound.

use crate::domain::DesignField;
use crate::error::{Error, Result};
use crate::numerics::beta;
use crate::objective::AlphaQuadrature;
use crate::scalar::{cis, cplx, CompensatedComplexSum, CompensatedSum, Cplx, Real};
use crate::solver::{band_from_csr, h1_gram, node_permutation, AssembledSystem, ElementMatrices, FloquetSolution};
use crate::source::ModalTrace;

fn check_traces<T: Real>(traces: &[ModalTrace<T>], quadrature: &AlphaQuadrature<T>) -> Result<()> {
    if traces.len() != quadrature.len() {
        return Err(Error::Dimension(format!(
            "{} traces for {} quadrature points",
            traces.len(),
            quadrature.len()
        )));
    }
    for (t, &a) in traces.iter().zip(&quadrature.points) {
        if t.alpha != a {
            return Err(Error::Dimension(format!(
                "trace at alpha = {} does not match quadrature point {a}",
                t.alpha
            )));
        }
    }
    Ok(())
}

/// Bottom trace continued to depth `d = −b − y ≥ 0` with outgoing modes.
fn continued<T: Real>(trace: &ModalTrace<T>, omega: T, depth: T) -> Vec<(T, Cplx<T>)> {
    trace
        .iter()
        .map(|(n, c)| {
            let xi = T::of_i64(n) + trace.alpha;
            let b = beta(xi, omega).value;
            // e^{iβd} with β = b.re + i b.im
            (xi, c * cis(b.re * depth) * (-b.im * depth).exp())
        })
        .collect()
}

fn synth<T: Real>(modes: &[(T, Cplx<T>)], x: T) -> Cplx<T> {
    let mut acc = CompensatedComplexSum::new();
    for &(xi, c) in modes {
        acc.add(c * cis(xi * x));
    }
    acc.value()
}

/// Samples of the reconstructed field `u(x, y)`, row-major in `ys`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField<T> {
    pub xs: Vec<T>,
    pub ys: Vec<T>,
    pub values: Vec<Cplx<T>>,
}

impl<T: Real> SampledField<T> {
    pub fn at(&self, ix: usize, iy: usize) -> Cplx<T> {
        self.values[iy * self.xs.len() + ix]
    }

    pub fn intensity_row(&self, iy: usize) -> Vec<T> {
        let n = self.xs.len();
        self.values[iy * n..(iy + 1) * n].iter().map(|z| z.norm_sqr()).collect()
    }
}

/// Rectangle `[x_min, x_max] × [−b − depth, −b]` sampled on a tensor grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region<T> {
    pub x_min: T,
    pub x_max: T,
    pub x_samples: usize,
    pub depth: T,
    pub y_samples: usize,
}

pub fn linspace<T: Real>(a: T, b: T, count: usize) -> Vec<T> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..count)
            .map(|k| a + (b - a) * T::of(k) / T::of(count - 1))
            .collect(),
    }
}

/// `u(x, y) = ∫ u_α(x, y) dα` below the slab from the per-α bottom traces.
///
/// Under a folded quadrature the design must be x-symmetric; each point
/// then stands for `±α`, whose contributions are `S_α(x)` and `S_α(−x)`.
pub fn reconstruct_below<T: Real>(
    traces: &[ModalTrace<T>],
    quadrature: &AlphaQuadrature<T>,
    omega: T,
    b: T,
    region: &Region<T>,
) -> Result<SampledField<T>> {
    if !(region.depth > T::zero()) {
        return Err(Error::Domain(format!("reconstruction depth must be positive, got {}", region.depth)));
    }
    check_traces(traces, quadrature)?;
    let xs = linspace(region.x_min, region.x_max, region.x_samples);
    let depths = linspace(T::zero(), region.depth, region.y_samples);
    let ys: Vec<T> = depths.iter().map(|&d| -b - d).collect();
    let mut values = Vec::with_capacity(xs.len() * ys.len());
    for &d in &depths {
        values.extend(line_at_depth(traces, quadrature, omega, d, &xs));
    }
    Ok(SampledField { xs, ys, values })
}

fn line_at_depth<T: Real>(traces: &[ModalTrace<T>], quadrature: &AlphaQuadrature<T>, omega: T, depth: T, xs: &[T]) -> Vec<Cplx<T>> {
    let folded = quadrature.is_folded();
    let half = T::lit(0.5);
    let per_alpha: Vec<(T, Vec<(T, Cplx<T>)>)> = traces
        .iter()
        .zip(quadrature.nodes())
        .map(|(t, (_, w))| (w, continued(t, omega, depth)))
        .collect();
    xs.iter()
        .map(|&x| {
            let mut acc = CompensatedComplexSum::new();
            for (w, modes) in &per_alpha {
                let s = if folded {
                    (synth(modes, x) + synth(modes, -x)) * half
                } else {
                    synth(modes, x)
                };
                acc.add(s * *w);
            }
            acc.value()
        })
        .collect()
}

/// Field on the horizontal line `y = −b − depth`.
pub fn field_on_line<T: Real>(
    traces: &[ModalTrace<T>],
    quadrature: &AlphaQuadrature<T>,
    omega: T,
    depth: T,
    xs: &[T],
) -> Result<Vec<Cplx<T>>> {
    if depth < T::zero() {
        return Err(Error::Domain(format!("line lies inside the slab (depth {depth})")));
    }
    check_traces(traces, quadrature)?;
    Ok(line_at_depth(traces, quadrature, omega, depth, xs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageMetrics<T> {
    /// FWHM of `|u|²` in wavelengths; `None` when a half-maximum crossing
    /// is missing inside the window.
    pub spot_size_lambda: Option<T>,
    pub peak_position: (T, T),
    pub peak_intensity: T,
    /// `(x, |u|²)`
    pub cross_section: Vec<(T, T)>,
}

/// Full width at half maximum of an intensity profile about its global peak.
pub fn spot_size<T: Real>(cross_section: Vec<(T, T)>, omega: T, image_line_y: T) -> Result<ImageMetrics<T>> {
    if cross_section.len() < 3 {
        return Err(Error::Dimension(format!("{} samples are too few for a spot size", cross_section.len())));
    }
    let (p, &(px, peak)) = cross_section
        .iter()
        .enumerate()
        .fold((0, &cross_section[0]), |best, (k, s)| if s.1 > best.1 .1 { (k, s) } else { best });
    let half = peak * T::lit(0.5);
    let cross = |a: (T, T), b: (T, T)| {
        let t = (half - a.1) / (b.1 - a.1);
        a.0 + t * (b.0 - a.0)
    };
    let left = (0..p)
        .rev()
        .find(|&k| cross_section[k].1 <= half)
        .map(|k| cross(cross_section[k], cross_section[k + 1]));
    let right = (p + 1..cross_section.len())
        .find(|&k| cross_section[k].1 <= half)
        .map(|k| cross(cross_section[k - 1], cross_section[k]));
    let spot_size_lambda = match (left, right) {
        (Some(l), Some(r)) if peak > T::zero() => Some((r - l) * omega / (T::lit(2.0) * T::PI())),
        _ => None,
    };
    Ok(ImageMetrics {
        spot_size_lambda,
        peak_position: (px, image_line_y),
        peak_intensity: peak,
        cross_section,
    })
}

/// Intensity on `y = −(b + h₁)` over one period and its spot size.
pub fn image_metrics<T: Real>(
    traces: &[ModalTrace<T>],
    quadrature: &AlphaQuadrature<T>,
    omega: T,
    b: T,
    h1: T,
    samples: usize,
) -> Result<ImageMetrics<T>> {
    let xs = linspace(-T::PI(), T::PI(), samples);
    let u = field_on_line(traces, quadrature, omega, h1, &xs)?;
    let section = xs.into_iter().zip(u.iter().map(|z| z.norm_sqr())).collect();
    spot_size(section, omega, -(b + h1))
}

/// `(n, |c_n|)` for the evanescent modes `|n + α| > ω`.
pub fn evanescent_spectrum<T: Real>(trace: &ModalTrace<T>, omega: T) -> Vec<(i64, T)> {
    trace
        .iter()
        .filter(|&(n, _)| (T::of_i64(n) + trace.alpha).abs() > omega)
        .map(|(n, c)| (n, c.norm()))
        .collect()
}

/// Cosine similarity of the weighted evanescent magnitudes of two families
/// of traces, over all quasi-momenta.
pub fn evanescent_similarity<T: Real>(images: &[ModalTrace<T>], targets: &[ModalTrace<T>], weights: &[T], omega: T) -> Result<T> {
    if images.len() != targets.len() || images.len() != weights.len() {
        return Err(Error::Dimension("image, target and weight counts differ".into()));
    }
    let (mut ab, mut aa, mut bb) = (CompensatedSum::new(), CompensatedSum::new(), CompensatedSum::new());
    for ((im, tg), &w) in images.iter().zip(targets).zip(weights) {
        let (si, st) = (evanescent_spectrum(im, omega), evanescent_spectrum(tg, omega));
        if si.len() != st.len() {
            return Err(Error::Dimension(format!("truncations differ at alpha = {}", im.alpha)));
        }
        for ((_, a), (_, b)) in si.into_iter().zip(st) {
            ab.add(w * a * b);
            aa.add(w * a * a);
            bb.add(w * b * b);
        }
    }
    let den = (aa.value() * bb.value()).sqrt();
    Ok(if den > T::zero() { ab.value() / den } else { T::zero() })
}

/// `(n, RMS_α |image_n|, RMS_α |target_n|)` with quadrature weights.
pub fn mode_table<T: Real>(images: &[ModalTrace<T>], targets: &[ModalTrace<T>], weights: &[T]) -> Result<Vec<(i64, T, T)>> {
    let first = images.first().ok_or_else(|| Error::Dimension("no traces".into()))?;
    let n_trunc = first.n_trunc();
    if images.len() != targets.len() || images.len() != weights.len() {
        return Err(Error::Dimension("image, target and weight counts differ".into()));
    }
    let total: T = weights.iter().copied().sum();
    Ok(crate::source::modes(n_trunc)
        .map(|n| {
            let mut a = CompensatedSum::new();
            let mut b = CompensatedSum::new();
            for ((im, tg), &w) in images.iter().zip(targets).zip(weights) {
                a.add(w * im.get(n).norm_sqr());
                b.add(w * tg.get(n).norm_sqr());
            }
            (n, (a.value() / total).sqrt(), (b.value() / total).sqrt())
        })
        .collect())
}

/// Power bookkeeping of one Floquet solve, all in the same units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBalance<T> {
    /// `2π Σ_prop β |f_n|²`
    pub incident: T,
    /// `2π Σ_prop β |c_n − f_n|²` on the top boundary.
    pub reflected: T,
    /// `2π Σ_prop β |t_n|²` on the bottom boundary.
    pub transmitted: T,
    /// `ω² ∫ ρ_i |u|²`
    pub absorbed: T,
    /// `4π Σ_evan |β| Im(f_n c̄_n)`: power carried across the top boundary by
    /// the overlap of incoming and outgoing evanescent tails. It vanishes when
    /// every retained mode propagates.
    pub evanescent_exchange: T,
}

impl<T: Real> EnergyBalance<T> {
    /// `|incident − reflected − transmitted − absorbed − exchange| / incident`
    pub fn relative_residual(&self) -> T {
        let r = self.incident - self.reflected - self.transmitted - self.absorbed - self.evanescent_exchange;
        r.abs() / self.incident
    }

    /// The residual ignoring the evanescent exchange term.
    pub fn propagating_residual(&self) -> T {
        (self.incident - self.reflected - self.transmitted - self.absorbed).abs() / self.incident
    }
}

/// Energy balance of a forward solution with total traces `top`, `bottom`
/// and incident Dirichlet data `incident`.
pub fn energy_balance<T: Real>(
    design: &DesignField<T>,
    solution: &FloquetSolution<T>,
    top: &ModalTrace<T>,
    bottom: &ModalTrace<T>,
    incident: &ModalTrace<T>,
) -> Result<EnergyBalance<T>> {
    if top.n_trunc() != incident.n_trunc() || bottom.n_trunc() != incident.n_trunc() {
        return Err(Error::Dimension("trace truncations differ".into()));
    }
    if design.grid != solution.grid {
        return Err(Error::Dimension("design and solution grids differ".into()));
    }
    let omega = solution.omega;
    let two_pi = T::lit(2.0) * T::PI();
    let (mut inc, mut refl, mut trans, mut exch) = (
        CompensatedSum::new(),
        CompensatedSum::new(),
        CompensatedSum::new(),
        CompensatedSum::new(),
    );
    for (n, f) in incident.iter() {
        let b = beta(T::of_i64(n) + incident.alpha, omega);
        let c = top.get(n);
        if b.is_propagating() {
            let bn = b.value.re;
            inc.add(two_pi * bn * f.norm_sqr());
            refl.add(two_pi * bn * (c - f).norm_sqr());
            trans.add(two_pi * bn * bottom.get(n).norm_sqr());
        } else {
            exch.add(T::lit(2.0) * two_pi * b.value.im * (f * c.conj()).im);
        }
    }
    Ok(EnergyBalance {
        incident: inc.value(),
        reflected: refl.value(),
        transmitted: trans.value(),
        absorbed: absorbed_power(design, omega, &solution.values),
        evanescent_exchange: exch.value(),
    })
}

/// `ω² Σ_cells ρ_i ∫_cell |u|²`, exact for bilinear `u`.
pub fn absorbed_power<T: Real>(design: &DesignField<T>, omega: T, u: &[Cplx<T>]) -> T {
    let grid = design.grid;
    let m = ElementMatrices::new(grid.hx(), grid.hy()).mass;
    let mut acc = CompensatedSum::new();
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let rho_i = design.value(i, j).im;
            if rho_i == T::zero() {
                continue;
            }
            let nodes = grid.cell_nodes(i, j);
            let mut s = cplx(T::zero(), T::zero());
            for (k, &gk) in nodes.iter().enumerate() {
                for (l, &gl) in nodes.iter().enumerate() {
                    s += u[gk].conj() * u[gl] * m[k][l];
                }
            }
            acc.add(rho_i * s.re);
        }
    }
    omega * omega * acc.value()
}

/// `min{ω² ρ_i0 / (4(1 + ρ_r1)), ¼}`, the coercivity constant of the
/// sesquilinear form for designs with `Im ρ ≥ ρ_i0 > 0`.
pub fn coercivity_constant<T: Real>(rho_i0: T, omega: T, rho_r1: T) -> Result<T> {
    if !(rho_i0 > T::zero()) {
        return Err(Error::Domain(format!(
            "coercivity needs a strictly positive loss bound, got rho_i0 = {rho_i0}"
        )));
    }
    let four = T::lit(4.0);
    Ok((omega * omega * rho_i0 / (four * (T::one() + rho_r1))).min(T::one() / four))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundDiagnostic<T> {
    /// `‖u‖_{H¹(Ω)}`
    pub solution_norm: T,
    /// `sup_w |b(w)| / ‖w‖_{H¹}` over the discrete space.
    pub load_norm: T,
    pub coercivity: T,
}

impl<T: Real> BoundDiagnostic<T> {
    /// `‖u‖ / (‖b‖/c)`; at most 1 when the continuous estimate carries over.
    pub fn ratio(&self) -> T {
        self.solution_norm * self.coercivity / self.load_norm
    }
}

/// Compares the discrete solution with the Lax–Milgram estimate `‖b‖/c`.
pub fn lax_milgram_diagnostic<T: Real>(
    system: &AssembledSystem<T>,
    solution: &FloquetSolution<T>,
    coercivity: T,
) -> Result<BoundDiagnostic<T>> {
    let grid = system.grid;
    let gram = h1_gram(&grid, system.alpha);
    let solution_norm = gram.form(&solution.values).re.max(T::zero()).sqrt();
    let perm = node_permutation(&grid);
    let lu = band_from_csr(&grid, &gram, &perm)
        .factor()
        .ok_or_else(|| Error::Dimension("H1 Gram matrix is singular".into()))?;
    let mut z = vec![cplx(T::zero(), T::zero()); system.rhs.len()];
    for (k, &p) in perm.iter().enumerate() {
        z[p] = system.rhs[k];
    }
    lu.solve(&mut z);
    let mut dual = CompensatedSum::new();
    for (k, &p) in perm.iter().enumerate() {
        dual.add((system.rhs[k].conj() * z[p]).re);
    }
    Ok(BoundDiagnostic {
        solution_norm,
        load_norm: dual.value().max(T::zero()).sqrt(),
        coercivity,
    })
}
