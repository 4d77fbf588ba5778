//! Banded complex matrices and their LU factorization.
//!
//! With nodes numbered row by row, the bilinear stencil, the periodic wrap
//! and the dense boundary blocks all lie within `nx + 1` of the diagonal, so
//! the whole Floquet system is a band matrix.

use crate::scalar::{Cplx, Real};

/// Square band matrix, row-major: row `r` stores columns `r − kl ..= r + ku`.
#[derive(Debug, Clone)]
pub struct BandMatrix<T> {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<Cplx<T>>,
}

impl<T: Real> BandMatrix<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![Cplx::new(T::zero(), T::zero()); n * (kl + ku + 1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.kl
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.ku
    }

    #[inline]
    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    #[inline]
    pub fn in_band(&self, r: usize, c: usize) -> bool {
        r < self.n && c < self.n && c + self.kl >= r && c <= r + self.ku
    }

    #[inline]
    fn slot(&self, r: usize, c: usize) -> usize {
        debug_assert!(self.in_band(r, c), "({r}, {c}) outside band");
        r * self.width() + (c + self.kl - r)
    }

    pub fn get(&self, r: usize, c: usize) -> Cplx<T> {
        if self.in_band(r, c) {
            self.data[self.slot(r, c)]
        } else {
            Cplx::new(T::zero(), T::zero())
        }
    }

    /// Adds `v` to entry `(r, c)`; panics if the entry lies outside the band.
    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: Cplx<T>) {
        assert!(self.in_band(r, c), "({r}, {c}) outside band");
        let s = self.slot(r, c);
        self.data[s] += v;
    }

    fn row_range(&self, r: usize) -> (usize, usize) {
        (r.saturating_sub(self.kl), (r + self.ku + 1).min(self.n))
    }

    pub fn matvec(&self, x: &[Cplx<T>]) -> Vec<Cplx<T>> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|r| {
                let (lo, hi) = self.row_range(r);
                let base = self.slot(r, lo);
                self.data[base..base + (hi - lo)]
                    .iter()
                    .zip(&x[lo..hi])
                    .fold(Cplx::new(T::zero(), T::zero()), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    /// `Aᴴ x`
    pub fn matvec_adjoint(&self, x: &[Cplx<T>]) -> Vec<Cplx<T>> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![Cplx::new(T::zero(), T::zero()); self.n];
        for (r, &xr) in x.iter().enumerate() {
            let (lo, hi) = self.row_range(r);
            let base = self.slot(r, lo);
            for (yc, a) in y[lo..hi].iter_mut().zip(&self.data[base..base + (hi - lo)]) {
                *yc += a.conj() * xr;
            }
        }
        y
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> T {
        self.data.iter().map(|z| z.norm()).fold(T::zero(), T::max)
    }

    pub fn factor(&self) -> Option<BandLu<T>> {
        BandLu::factor(self)
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
///
/// Row interchanges widen the upper band to `ku + kl`; each stored row spans
/// columns `r − kl ..= r + ku + kl`.
#[derive(Debug, Clone)]
pub struct BandLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    lu: Vec<Cplx<T>>,
    piv: Vec<usize>,
}

impl<T: Real> BandLu<T> {
    /// Returns `None` when a pivot vanishes relative to the matrix scale.
    pub fn factor(a: &BandMatrix<T>) -> Option<Self> {
        let (n, kl, ku) = (a.n, a.kl, a.ku);
        let width = 2 * kl + ku + 1;
        let mut lu = vec![Cplx::new(T::zero(), T::zero()); n * width];
        for r in 0..n {
            let src = r * a.width();
            lu[r * width..r * width + a.width()].copy_from_slice(&a.data[src..src + a.width()]);
        }
        let tiny = a.max_abs() * T::epsilon();
        let mut piv = vec![0usize; n];
        let off = |r: usize, c: usize| r * width + (c + kl - r);
        let mut tmp = vec![Cplx::new(T::zero(), T::zero()); ku + kl + 1];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu[off(k, k)].norm_sqr();
            for r in k + 1..=last_row {
                let v = lu[off(r, k)].norm_sqr();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            piv[k] = p;
            if !(lu[off(p, k)].norm() > tiny) {
                return None;
            }
            let last_col = (k + ku + kl).min(n - 1);
            let len = last_col - k + 1;
            if p != k {
                let (pk, pp) = (off(k, k), off(p, k));
                tmp[..len].copy_from_slice(&lu[pk..pk + len]);
                lu.copy_within(pp..pp + len, pk);
                lu[pp..pp + len].copy_from_slice(&tmp[..len]);
            }
            let pivot_inv = lu[off(k, k)].inv();
            let pk = off(k, k);
            for r in k + 1..=last_row {
                let rk = off(r, k);
                let l = lu[rk] * pivot_inv;
                lu[rk] = l;
                if l.re == T::zero() && l.im == T::zero() {
                    continue;
                }
                // rows k and r share columns k+1..=last_col
                let (head, tail) = lu.split_at_mut(rk);
                let src = &head[pk + 1..pk + len];
                for (d, s) in tail[1..len].iter_mut().zip(src) {
                    *d -= l * s;
                }
            }
        }
        Some(Self {
            n,
            kl,
            ku,
            width,
            lu,
            piv,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn at(&self, r: usize, c: usize) -> Cplx<T> {
        self.lu[r * self.width + (c + self.kl - r)]
    }

    /// Solves `A x = b` in place.
    pub fn solve(&self, b: &mut [Cplx<T>]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for r in k + 1..(k + self.kl + 1).min(n) {
                b[r] -= self.at(r, k) * bk;
            }
        }
        let reach = self.ku + self.kl;
        for k in (0..n).rev() {
            let base = k * self.width + self.kl;
            let hi = (k + reach + 1).min(n);
            let mut s = b[k];
            for (c, u) in (k + 1..hi).zip(&self.lu[base + 1..base + (hi - k)]) {
                s -= u * b[c];
            }
            b[k] = s / self.lu[base];
        }
    }

    /// Solves `Aᴴ x = b` in place with the same factors.
    pub fn solve_adjoint(&self, b: &mut [Cplx<T>]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        let reach = self.ku + self.kl;
        // Uᴴ y = b
        for k in 0..n {
            let base = k * self.width + self.kl;
            let yk = b[k] / self.lu[base].conj();
            b[k] = yk;
            let hi = (k + reach + 1).min(n);
            for (c, u) in (k + 1..hi).zip(&self.lu[base + 1..base + (hi - k)]) {
                b[c] -= u.conj() * yk;
            }
        }
        // Lᴴ and the interchanges, in reverse
        for k in (0..n).rev() {
            let mut s = b[k];
            for r in k + 1..(k + self.kl + 1).min(n) {
                s -= self.at(r, k).conj() * b[r];
            }
            b[k] = s;
            let p = self.piv[k];
            if p != k {
                b.swap(k, p);
            }
        }
    }
}

pub fn norm2<T: Real>(v: &[Cplx<T>]) -> T {
    let scale = v.iter().map(|z| z.norm()).fold(T::zero(), T::max);
    if scale == T::zero() {
        return T::zero();
    }
    let s: T = v.iter().map(|z| (z / scale).norm_sqr()).sum();
    scale * s.sqrt()
}

pub fn dot<T: Real>(a: &[Cplx<T>], b: &[Cplx<T>]) -> Cplx<T> {
    a.iter()
        .zip(b)
        .fold(Cplx::new(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * y)
}
