//! Floquet coefficients of the point-source traces and of the image target.
//!
//! For a source at `(0, h)` the incident field is `H₀⁽¹⁾(ω|x − (0,h)|)`; its
//! α-component restricted to a horizontal line is a Fourier series in
//! `e^{i(n+α)x}` whose coefficients are given here in closed form.

use std::io::{BufRead, Write};

use crate::domain::{parse_num, parse_usize};
use crate::error::{Error, Result};
use crate::numerics::{beta, guarded_beta};
use crate::scalar::{cis, cplx, Cplx, Real};

/// Fourier coefficients `c_n`, `|n| ≤ n_trunc`, of an α-quasi-periodic trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalTrace<T> {
    pub alpha: T,
    n_trunc: usize,
    coeffs: Vec<Cplx<T>>,
}

impl<T: Real> ModalTrace<T> {
    pub fn zeros(alpha: T, n_trunc: usize) -> Self {
        Self {
            alpha,
            n_trunc,
            coeffs: vec![cplx(T::zero(), T::zero()); 2 * n_trunc + 1],
        }
    }

    /// `coeffs[k]` is mode `n = k − n_trunc`.
    pub fn from_coeffs(alpha: T, coeffs: Vec<Cplx<T>>) -> Result<Self> {
        if coeffs.len() % 2 == 0 {
            return Err(Error::Dimension(format!(
                "modal trace needs an odd coefficient count, got {}",
                coeffs.len()
            )));
        }
        Ok(Self {
            alpha,
            n_trunc: coeffs.len() / 2,
            coeffs,
        })
    }

    fn from_fn(alpha: T, n_trunc: usize, mut f: impl FnMut(i64) -> Result<Cplx<T>>) -> Result<Self> {
        let coeffs = modes(n_trunc).map(&mut f).collect::<Result<_>>()?;
        Ok(Self {
            alpha,
            n_trunc,
            coeffs,
        })
    }

    pub fn n_trunc(&self) -> usize {
        self.n_trunc
    }

    pub fn coeffs(&self) -> &[Cplx<T>] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Cplx<T>] {
        &mut self.coeffs
    }

    /// Coefficient of mode `n`; zero outside the truncation.
    pub fn get(&self, n: i64) -> Cplx<T> {
        if n.unsigned_abs() as usize > self.n_trunc {
            return cplx(T::zero(), T::zero());
        }
        self.coeffs[(n + self.n_trunc as i64) as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, Cplx<T>)> + '_ {
        modes(self.n_trunc).zip(self.coeffs.iter().copied())
    }

    /// `Σ c_n e^{i(n+α)x}`
    pub fn synthesize(&self, x: T) -> Cplx<T> {
        self.iter()
            .map(|(n, c)| c * cis((T::of_i64(n) + self.alpha) * x))
            .fold(cplx(T::zero(), T::zero()), |a, b| a + b)
    }

    /// `‖r‖²_{L²(0,2π)} = 2π Σ |c_n|²`
    pub fn l2_norm_sqr(&self) -> T {
        T::TAU() * self.coeffs.iter().map(|c| c.norm_sqr()).sum::<T>()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
            ..self.clone()
        })
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.n_trunc != other.n_trunc || self.alpha != other.alpha {
            return Err(Error::Dimension(format!(
                "modal traces differ: (alpha {}, N {}) vs (alpha {}, N {})",
                self.alpha, self.n_trunc, other.alpha, other.n_trunc
            )));
        }
        Ok(())
    }

    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{:.16e} {}", self.alpha, self.n_trunc)?;
        for (n, c) in self.iter() {
            writeln!(w, "{n} {:.16e} {:.16e}", c.re, c.im)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty trace file".into(),
        })??;
        let mut toks = header.split_whitespace();
        let alpha: T = parse_num(toks.next(), 1, "alpha")?;
        let n_trunc = parse_usize(toks.next(), 1, "N_trunc")?;
        let mut trace = Self::zeros(alpha, n_trunc);
        let mut seen = 0;
        for (idx, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let lineno = idx + 2;
            let mut toks = line.split_whitespace();
            let n: i64 = toks
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Parse {
                    line: lineno,
                    message: "bad mode index".into(),
                })?;
            if n.unsigned_abs() as usize > n_trunc {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("mode {n} beyond N_trunc = {n_trunc}"),
                });
            }
            let re: T = parse_num(toks.next(), lineno, "real part")?;
            let im: T = parse_num(toks.next(), lineno, "imaginary part")?;
            trace.coeffs[(n + n_trunc as i64) as usize] = cplx(re, im);
            seen += 1;
        }
        if seen != 2 * n_trunc + 1 {
            return Err(Error::Dimension(format!(
                "trace file lists {seen} modes, expected {}",
                2 * n_trunc + 1
            )));
        }
        Ok(trace)
    }
}

/// Mode indices `−n_trunc ..= n_trunc`.
pub fn modes(n_trunc: usize) -> impl Iterator<Item = i64> + Clone {
    let m = n_trunc as i64;
    -m..=m
}

/// Index of the first mode count that covers every propagating order.
pub fn propagating_cutoff<T: Real>(omega: T) -> usize {
    omega.ceil().to_usize().unwrap_or(usize::MAX)
}

/// Default truncation: all propagating orders plus `extra` evanescent ones,
/// capped at the grid Nyquist index `nx/2 − 1`.
pub fn default_n_trunc<T: Real>(omega: T, nx: usize, extra: usize) -> Result<usize> {
    let cut = propagating_cutoff(omega);
    let n = (cut + extra).min(nx / 2 - 1);
    if n < cut + 1 {
        return Err(Error::Config(format!(
            "grid with nx = {nx} cannot resolve all propagating modes at omega = {omega} \
             (need N_trunc >= {})",
            cut + 1
        )));
    }
    Ok(n)
}

/// `f_α(n) = (1/π) e^{iβh}/β`
pub fn incident_dirichlet_trace<T: Real>(alpha: T, omega: T, h: T, n_trunc: usize) -> Result<ModalTrace<T>> {
    check_height(h)?;
    ModalTrace::from_fn(alpha, n_trunc, |n| {
        let b = guarded_beta(n, alpha, omega)?;
        Ok(cis_c(b * h) / b * T::FRAC_1_PI())
    })
}

/// `g_α(n) = (−i/π) e^{iβh}`
pub fn incident_neumann_trace<T: Real>(alpha: T, omega: T, h: T, n_trunc: usize) -> Result<ModalTrace<T>> {
    check_height(h)?;
    ModalTrace::from_fn(alpha, n_trunc, |n| {
        let b = beta(T::of_i64(n) + alpha, omega).value;
        Ok(cis_c(b * h) * cplx(T::zero(), -T::FRAC_1_PI()))
    })
}

/// `q_α(n) = (1/π) e^{−i β̄ h₁}/β̄`, the coefficients of `H₀⁽²⁾(ω√(x²+h₁²))`.
pub fn target_dirichlet_trace<T: Real>(alpha: T, omega: T, h1: T, n_trunc: usize) -> Result<ModalTrace<T>> {
    check_height(h1)?;
    ModalTrace::from_fn(alpha, n_trunc, |n| {
        let b = guarded_beta(n, alpha, omega)?.conj();
        Ok(cis_c(-b * h1) / b * T::FRAC_1_PI())
    })
}

fn check_height<T: Real>(h: T) -> Result<()> {
    if !(h > T::zero()) || !h.is_finite() {
        return Err(Error::Domain(format!("height must be positive, got {h}")));
    }
    Ok(())
}

/// `e^{iz}` for complex z.
#[inline]
pub(crate) fn cis_c<T: Real>(z: Cplx<T>) -> Cplx<T> {
    cis(z.re) * (-z.im).exp()
}
