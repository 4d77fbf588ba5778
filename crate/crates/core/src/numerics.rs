//! Special functions and mode-exponent arithmetic.

use crate::error::{Error, Result};
use crate::scalar::{cis, cplx, Cplx, Real};

/// Relative distance from a Wood anomaly below which modal formulas are not
/// evaluated: `|ξ² − ω²| < WOOD_GUARD · ω²`.
pub const WOOD_GUARD: f64 = 1e-8;

/// Euler–Mascheroni constant.
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Vertical wavenumber `β(ξ)` of a Fourier mode with transverse wavenumber ξ.
///
/// Real and positive for propagating modes, positive-imaginary for evanescent
/// ones. At a Wood anomaly (`ξ² = ω²` exactly) the value is zero and
/// [`ModeExponent::is_wood_anomaly`] is set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeExponent<T> {
    pub value: Cplx<T>,
    wood: bool,
}

impl<T: Real> ModeExponent<T> {
    pub fn is_wood_anomaly(&self) -> bool {
        self.wood
    }

    pub fn is_propagating(&self) -> bool {
        !self.wood && self.value.im == T::zero()
    }

    pub fn is_evanescent(&self) -> bool {
        self.value.im > T::zero()
    }
}

pub fn beta<T: Real>(xi: T, omega: T) -> ModeExponent<T> {
    debug_assert!(omega > T::zero());
    let d = omega * omega - xi * xi;
    if d > T::zero() {
        ModeExponent {
            value: cplx(d.sqrt(), T::zero()),
            wood: false,
        }
    } else if d < T::zero() {
        ModeExponent {
            value: cplx(T::zero(), (-d).sqrt()),
            wood: false,
        }
    } else {
        ModeExponent {
            value: Cplx::new(T::zero(), T::zero()),
            wood: true,
        }
    }
}

/// `true` when ξ is within [`WOOD_GUARD`] of the light line.
pub fn near_wood_anomaly<T: Real>(xi: T, omega: T) -> bool {
    (xi * xi - omega * omega).abs() < T::lit(WOOD_GUARD) * omega * omega
}

/// `β(n + α)`, rejecting modes too close to a Wood anomaly.
pub fn guarded_beta<T: Real>(n: i64, alpha: T, omega: T) -> Result<Cplx<T>> {
    let xi = T::of_i64(n) + alpha;
    if near_wood_anomaly(xi, omega) {
        return Err(Error::WoodAnomaly {
            n,
            alpha: alpha.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(beta(xi, omega).value)
}

/// `H₀⁽¹⁾(z) = J₀(z) + i Y₀(z)` for real `z > 0`.
pub fn hankel1_0<T: Real>(z: T) -> Result<Cplx<T>> {
    if !(z > T::zero()) || !z.is_finite() {
        return Err(Error::Domain(format!(
            "hankel1_0 requires a finite positive argument, got {z}"
        )));
    }
    let (j0, y0) = if z <= T::lit(8.0) {
        bessel01_series(z)
    } else if z <= T::lit(25.0) {
        bessel01_miller(z)
    } else {
        return Ok(hankel1_0_asymptotic(z));
    };
    Ok(cplx(j0, y0))
}

/// `H₀⁽²⁾(z)`, the complex conjugate of [`hankel1_0`].
pub fn hankel2_0<T: Real>(z: T) -> Result<Cplx<T>> {
    hankel1_0(z).map(|h| h.conj())
}

// Ascending series for J0 and Y0.
fn bessel01_series<T: Real>(z: T) -> (T, T) {
    let q = z * z / T::lit(4.0);
    let mut term = T::one();
    let mut j0 = T::one();
    let mut harmonic = T::zero();
    let mut ysum = T::zero();
    for k in 1..200 {
        let kf = T::of(k);
        term = -term * q / (kf * kf);
        harmonic += T::one() / kf;
        j0 += term;
        ysum -= term * harmonic;
        if term.abs() < T::epsilon() * T::lit(1e-3) * j0.abs().max(T::lit(1e-30)) {
            break;
        }
    }
    let two_over_pi = T::lit(2.0) / T::PI();
    let y0 = two_over_pi * (((z / T::lit(2.0)).ln() + T::lit(EULER_GAMMA)) * j0 + ysum);
    (j0, y0)
}

// Backward recurrence for J_n normalised by 1 = J0 + 2 Σ J_2k, with Neumann's
// expansion Y0 = (2/π)(ln(z/2)+γ) J0 − (4/π) Σ (−1)^k J_2k / k.
fn bessel01_miller<T: Real>(z: T) -> (T, T) {
    let zf = z.to_f64().unwrap_or(25.0);
    let mut top = (1.5 * zf) as usize + 40;
    if top % 2 == 1 {
        top += 1;
    }
    let rescale = T::lit(1e10);
    let two_over_z = T::lit(2.0) / z;
    let mut next = T::zero(); // J_{k+1}
    let mut cur = T::lit(1e-30); // J_k
    let mut norm = T::zero();
    let mut neumann = T::zero();
    let mut k = top;
    while k > 0 {
        if k % 2 == 0 {
            norm += T::lit(2.0) * cur;
            let half = k / 2;
            let sign = if half % 2 == 0 { T::one() } else { -T::one() };
            neumann += sign * cur / T::of(half);
        }
        let prev = T::of(k) * two_over_z * cur - next;
        next = cur;
        cur = prev;
        k -= 1;
        if cur.abs() > rescale {
            let inv = T::one() / rescale;
            cur *= inv;
            next *= inv;
            norm *= inv;
            neumann *= inv;
        }
    }
    norm += cur;
    let j0 = cur / norm;
    let neumann = neumann / norm;
    let pi = T::PI();
    let y0 = T::lit(2.0) / pi * ((z / T::lit(2.0)).ln() + T::lit(EULER_GAMMA)) * j0
        - T::lit(4.0) / pi * neumann;
    (j0, y0)
}

// Hankel asymptotic expansion, summed until the terms stop decreasing or drop
// below machine precision.
fn hankel1_0_asymptotic<T: Real>(z: T) -> Cplx<T> {
    let mut term = cplx(T::one(), T::zero());
    let mut sum = term;
    let mut last = T::infinity();
    for k in 1..40 {
        let odd = T::of(2 * k - 1);
        let factor = cplx(T::zero(), -(odd * odd) / (T::lit(8.0) * T::of(k) * z));
        let candidate = term * factor;
        let mag = candidate.norm();
        if mag >= last {
            break;
        }
        term = candidate;
        sum += term;
        last = mag;
        if mag < T::epsilon() * T::lit(0.01) {
            break;
        }
    }
    let amp = (T::lit(2.0) / (T::PI() * z)).sqrt();
    sum * cis(z - T::FRAC_PI_4()) * amp
}

#[inline]
pub fn sinc<T: Real>(t: T) -> T {
    if t.abs() < T::lit(1e-4) {
        let t2 = t * t;
        T::one() - t2 / T::lit(6.0) + t2 * t2 / T::lit(120.0)
    } else {
        t.sin() / t
    }
}

/// n-th Fourier coefficient `(1/2π) ∫ φ_j(x) e^{−inx} dx` of the periodic hat
/// function centred on node `node_index` with spacing `node_spacing`.
pub fn hat_trace_fourier<T: Real>(node_index: usize, node_spacing: T, mode_n: i64) -> Cplx<T> {
    let n = T::of_i64(mode_n);
    let s = sinc(n * node_spacing / T::lit(2.0));
    let x_j = T::of(node_index) * node_spacing;
    cis(-n * x_j) * (node_spacing / T::TAU() * s * s)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre<T: Real>(count: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![T::zero(); count];
    let mut weights = vec![T::zero(); count];
    let nf = count as f64;
    for i in 0..count.div_ceil(2) {
        // Newton iteration in f64, then convert.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0_f64, x);
            for k in 2..=count {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = T::lit(-x);
        nodes[count - 1 - i] = T::lit(x);
        weights[i] = T::lit(w);
        weights[count - 1 - i] = T::lit(w);
    }
    (nodes, weights)
}
