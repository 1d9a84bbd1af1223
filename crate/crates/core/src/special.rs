//! Special-function kernels: Bessel functions of the first kind, the inverse
//! of `J0` on its main lobe, zeros of `J0`, and the Fresnel integrals.
//!
//! `J_m(x)` is evaluated with three regimes:
//!
//! - ascending power series for `|x| <= 8`,
//! - the Hankel large-argument expansion once its smallest term drops below
//!   machine precision (in practice `|x| >= 25` for low orders),
//! - Miller's backward recurrence normalized by `J0 + 2 sum J_2k = 1`
//!   everywhere else.
//!
//! The Fresnel integrals use adaptive Simpson quadrature on half-period
//! panels up to `x = 40` and the standard auxiliary-function asymptotics
//! beyond.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{domain, Result};

const SERIES_LIMIT: f64 = 8.0;
const HANKEL_MIN_ARG: f64 = 25.0;
const FRESNEL_QUADRATURE_LIMIT: f64 = 40.0;
const FRESNEL_TOLERANCE: f64 = 1e-9;
const BISECTION_WIDTH: f64 = 1e-13;

/// A `|J0|` level inside the main lobe, i.e. a value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct MainLobeValue(f64);

impl MainLobeValue {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(domain(format!("main-lobe level {value} outside [0, 1]")));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Bessel function of the first kind `J_order(x)`.
pub fn bessel_j(order: u32, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(domain(format!("bessel_j argument {x} is not finite")));
    }
    let sign = if x < 0.0 && order % 2 == 1 { -1.0 } else { 1.0 };
    let x = x.abs();
    if x == 0.0 {
        return Ok(if order == 0 { 1.0 } else { 0.0 });
    }
    let value = if x <= SERIES_LIMIT {
        power_series(order, x)
    } else if let Some(v) = hankel_asymptotic(order, x) {
        v
    } else {
        miller(order, x)
    };
    Ok(sign * value)
}

/// `J0(x)` for a finite argument. Panics on NaN or infinity.
pub(crate) fn j0(x: f64) -> f64 {
    bessel_j(0, x).expect("finite argument")
}

fn power_series(order: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    // (x/2)^m / m!, built incrementally so large orders underflow gracefully
    let mut term = 1.0;
    for k in 1..=order {
        term *= half / f64::from(k);
    }
    let q = half * half;
    let mut sum = term;
    let m = f64::from(order);
    let mut k = 0.0;
    loop {
        k += 1.0;
        term *= -q / (k * (k + m));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && k > half {
            break;
        }
        if term == 0.0 {
            break;
        }
    }
    sum
}

/// Hankel expansion; `None` when the asymptotic series cannot reach machine
/// precision before its terms start to grow.
fn hankel_asymptotic(order: u32, x: f64) -> Option<f64> {
    if x < HANKEL_MIN_ARG {
        return None;
    }
    let mu = 4.0 * f64::from(order) * f64::from(order);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term: f64 = 1.0;
    let mut k = 0u32;
    loop {
        k += 1;
        let odd = f64::from(2 * k - 1);
        let next = term * (mu - odd * odd) / (f64::from(k) * 8.0 * x);
        if next.abs() >= term.abs() && k > 1 {
            return None;
        }
        term = next;
        // a_k / x^k with sign pattern +,-,-,+ for (P, Q) interleaving
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
        if k > 400 {
            return None;
        }
    }
    let chi = x - (0.5 * f64::from(order) + 0.25) * PI;
    Some((2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin()))
}

fn miller(order: u32, x: f64) -> f64 {
    let top = f64::from(order).max(x);
    let mut start = (top + 50.0 + 10.0 * top.sqrt()) as u64;
    if start % 2 == 1 {
        start += 1;
    }
    let two_over_x = 2.0 / x;
    let mut next = 0.0; // J_{k+1}
    let mut current = 1e-300; // J_k
    let mut norm = 0.0;
    let mut wanted = 0.0;
    let mut k = start;
    while k > 0 {
        let previous = (k as f64) * two_over_x * current - next;
        next = current;
        current = previous;
        k -= 1;
        if k == u64::from(order) {
            wanted = current;
        }
        if k.is_multiple_of(2) && k > 0 {
            norm += 2.0 * current;
        }
        if current.abs() > 1e250 {
            current *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
    }
    norm += current;
    wanted / norm
}

/// First positive zero of `J0`, computed once.
pub fn first_j0_zero() -> f64 {
    static FIRST: OnceLock<f64> = OnceLock::new();
    *FIRST.get_or_init(|| j0_zero(1))
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut f_lo = f(lo);
    while hi - lo > BISECTION_WIDTH {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return mid;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn j0_zero(k: usize) -> f64 {
    // McMahon's leading term is within 0.06 of the k-th zero
    let guess = (k as f64 - 0.25) * PI;
    bisect(guess - 0.3, guess + 0.3, j0)
}

/// Inverse of `J0` restricted to `[0, j_{0,1}]`, where `J0` decreases
/// monotonically from 1 to 0.
pub fn inv_j0_main_lobe(level: MainLobeValue) -> f64 {
    let target = level.value();
    if target >= 1.0 {
        return 0.0;
    }
    let z1 = first_j0_zero();
    if target <= 0.0 {
        return z1;
    }
    bisect(0.0, z1, |y| j0(y) - target)
}

/// The first `count` positive zeros of `J0` in increasing order.
pub fn j0_zeros(count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(domain("j0_zeros requires count >= 1"));
    }
    Ok((1..=count).map(j0_zero).collect())
}

/// Fresnel integrals `(C(x), S(x))` with kernel `exp(j pi t^2 / 2)`.
pub fn fresnel(x: f64) -> Result<(f64, f64)> {
    if !x.is_finite() || x < 0.0 {
        return Err(domain(format!("fresnel argument {x} must be finite and >= 0")));
    }
    if x == 0.0 {
        return Ok((0.0, 0.0));
    }
    if x > FRESNEL_QUADRATURE_LIMIT {
        return Ok(fresnel_asymptotic(x));
    }
    Ok(fresnel_quadrature(x))
}

fn fresnel_kernel(t: f64) -> Complex64 {
    Complex64::from_polar(1.0, 0.5 * PI * t * t)
}

fn fresnel_quadrature(x: f64) -> (f64, f64) {
    // panel edges sit on half periods of the kernel: t_k = sqrt(2k)
    let panels = (0.5 * x * x).ceil().max(1.0) as usize;
    let tol = FRESNEL_TOLERANCE / panels as f64;
    let mut total = Complex64::new(0.0, 0.0);
    let mut a = 0.0;
    for k in 1..=panels {
        let b = (2.0 * k as f64).sqrt().min(x);
        total += adaptive_simpson(a, b, tol);
        a = b;
        if b >= x {
            break;
        }
    }
    (total.re, total.im)
}

fn adaptive_simpson(a: f64, b: f64, tol: f64) -> Complex64 {
    let fa = fresnel_kernel(a);
    let fb = fresnel_kernel(b);
    let m = 0.5 * (a + b);
    let fm = fresnel_kernel(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    a: f64,
    b: f64,
    fa: Complex64,
    fm: Complex64,
    fb: Complex64,
    whole: Complex64,
    tol: f64,
    depth: u32,
) -> Complex64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = fresnel_kernel(lm);
    let frm = fresnel_kernel(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.norm() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

fn fresnel_asymptotic(x: f64) -> (f64, f64) {
    let z = PI * x * x;
    let inv_z2 = 1.0 / (z * z);
    // f ~ 1/(pi x) sum (-1)^m (4m-1)!! / z^(2m), g ~ 1/(pi^2 x^3) sum (-1)^m (4m+1)!! / z^(2m)
    let mut f_sum = 0.0;
    let mut g_sum = 0.0;
    let mut f_term = 1.0;
    let mut g_term = 1.0;
    for m in 0..12 {
        f_sum += f_term;
        g_sum += g_term;
        let m = m as f64;
        f_term *= -(4.0 * m + 1.0) * (4.0 * m + 3.0) * inv_z2;
        g_term *= -(4.0 * m + 3.0) * (4.0 * m + 5.0) * inv_z2;
        if f_term.abs() < 1e-18 && g_term.abs() < 1e-18 {
            break;
        }
    }
    let f = f_sum / (PI * x);
    let g = g_sum / (PI * PI * x * x * x);
    let phase = 0.5 * z;
    let (s, c) = phase.sin_cos();
    (0.5 + f * s - g * c, 0.5 - f * c - g * s)
}

/// `|G(mu)| = |C(mu) + j S(mu)| / mu`, with the limit 1 at `mu = 0`.
pub fn g_mu(mu: f64) -> Result<f64> {
    if !mu.is_finite() || mu < 0.0 {
        return Err(domain(format!("g_mu argument {mu} must be finite and >= 0")));
    }
    if mu < 1e-8 {
        return Ok(1.0);
    }
    let (c, s) = fresnel(mu)?;
    Ok(c.hypot(s) / mu)
}
