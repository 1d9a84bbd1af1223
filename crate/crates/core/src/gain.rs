//! Beamforming gains: exact summation and the Bessel/Fresnel closed forms.
//!
//! Every gain is `|b1^H b2|` for unit-norm beam vectors, so it lies in
//! `[0, 1]`. The closed forms approximate the exact sum for a UCA of radius
//! `R` (and, for the cylindrical form, a stack of `2M + 1` such rings):
//!
//! - angular: `|J0(beta)|`, `beta = (4 pi R / lambda) sin((phi2 - phi1) / 2)`
//! - distance: `|J0(zeta)|`, `zeta = (pi R^2 / (2 lambda)) |1/r1 - 1/r2|`
//! - cylindrical: `|G(mu)| |J0(zeta)|`, `mu = sqrt((2 M^2 d^2 / lambda) |1/r1 - 1/r2|)`

use std::f64::consts::{E, PI};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::geometry::{element_phase, rayleigh_distance, ArrayGeometry, Distance, FocusPoint};
use crate::special::{self, g_mu, inv_j0_main_lobe, j0, j0_zeros, MainLobeValue};

/// Level of the 3 dB depth of focus, `|J0(eta)| = 0.5`.
pub const HALF_POWER_LEVEL: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GainFormula {
    AngularJ0,
    DistanceJ0,
    CylindricalFresnelJ0,
    ExactSum,
}

/// A gain value with the arguments of the closed form that produced it.
/// Arguments that do not apply to the formula are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainApprox {
    pub value: f64,
    pub beta: Option<f64>,
    pub zeta: Option<f64>,
    pub mu: Option<f64>,
    pub formula: GainFormula,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_threshold(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("loss threshold {delta} must lie in (0, 1)")))
    }
}

/// `|b(p1)^H b(p2)|` by direct summation over all elements.
pub fn exact_gain(geom: &ArrayGeometry, p1: &FocusPoint, p2: &FocusPoint) -> Result<GainApprox> {
    p1.distance.validate()?;
    p2.distance.validate()?;
    let k = geom.wavenumber();
    let (u1, u2) = (p1.direction(), p2.direction());
    let sum: Complex64 = geom
        .positions()
        .iter()
        .map(|&p| {
            Complex64::cis(element_phase(p, u2, p2.distance, k) - element_phase(p, u1, p1.distance, k))
        })
        .sum();
    Ok(GainApprox {
        value: sum.norm() / geom.element_count() as f64,
        beta: None,
        zeta: None,
        mu: None,
        formula: GainFormula::ExactSum,
    })
}

pub fn beta(radius: f64, wavelength: f64, phi1: f64, phi2: f64) -> f64 {
    4.0 * PI * radius / wavelength * (0.5 * (phi2 - phi1)).sin()
}

pub fn zeta(radius: f64, wavelength: f64, r1: Distance, r2: Distance) -> f64 {
    PI * radius * radius / (2.0 * wavelength) * (r1.reciprocal() - r2.reciprocal()).abs()
}

pub fn mu(ring_half_count: usize, ring_spacing: f64, wavelength: f64, r1: Distance, r2: Distance) -> f64 {
    let md = ring_half_count as f64 * ring_spacing;
    (2.0 * md * md / wavelength * (r1.reciprocal() - r2.reciprocal()).abs()).sqrt()
}

/// Angular-domain gain `|J0(beta)|`; independent of distance.
pub fn angular_gain(radius: f64, wavelength: f64, phi1: f64, phi2: f64) -> Result<GainApprox> {
    check_positive("radius", radius)?;
    check_positive("wavelength", wavelength)?;
    let b = beta(radius, wavelength, phi1, phi2);
    Ok(GainApprox { value: j0(b).abs(), beta: Some(b), zeta: None, mu: None, formula: GainFormula::AngularJ0 })
}

/// Distance-domain gain `|J0(zeta)|` for two points on the same ray.
pub fn distance_gain(radius: f64, wavelength: f64, r1: Distance, r2: Distance) -> Result<GainApprox> {
    check_positive("radius", radius)?;
    check_positive("wavelength", wavelength)?;
    let (r1, r2) = (r1.validate()?, r2.validate()?);
    let z = zeta(radius, wavelength, r1, r2);
    Ok(GainApprox { value: j0(z).abs(), beta: None, zeta: Some(z), mu: None, formula: GainFormula::DistanceJ0 })
}

/// `(2 / (pi R)) sqrt(lambda r1 r2 / |r2 - r1|)`, the envelope of the
/// distance gain. It bounds `|J0(zeta)|` only once `zeta` passes the first
/// zero of `J0`; inside the main lobe it can fall below the gain.
pub fn gain_upper_bound(radius: f64, wavelength: f64, r1: f64, r2: f64) -> Result<f64> {
    check_positive("radius", radius)?;
    check_positive("wavelength", wavelength)?;
    check_positive("r1", r1)?;
    check_positive("r2", r2)?;
    if r1 == r2 {
        return Err(domain("upper bound undefined for r1 == r2"));
    }
    Ok(2.0 / (PI * radius) * (wavelength * r1 * r2 / (r2 - r1).abs()).sqrt())
}

/// Largest-argument tail `2 (beta e / (2N))^N` of the angular approximation
/// error for an `N`-element UCA.
pub fn angular_error_bound(elements: usize, beta: f64) -> f64 {
    let n = elements as f64;
    2.0 * (beta.abs() * E / (2.0 * n)).powf(n)
}

/// Distances around `r0` where the distance gain falls to `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FocusInterval {
    pub near: f64,
    pub far: Distance,
}

impl FocusInterval {
    pub fn width(&self) -> Distance {
        match self.far {
            Distance::Finite(far) => Distance::Finite(far - self.near),
            Distance::Infinite => Distance::Infinite,
        }
    }
}

fn focus_eta(level: MainLobeValue) -> Result<f64> {
    if level.value() >= 1.0 {
        return Err(domain("depth-of-focus level must be below 1"));
    }
    Ok(inv_j0_main_lobe(level))
}

/// Edges `pi R^2 r0 / (pi R^2 -+ 2 eta lambda r0)` of the focal region; the
/// far edge is infinite once `r0 >= pi R^2 / (2 eta lambda)`.
pub fn focus_interval(radius: f64, wavelength: f64, r0: f64, level: MainLobeValue) -> Result<FocusInterval> {
    check_positive("radius", radius)?;
    check_positive("wavelength", wavelength)?;
    check_positive("focal distance", r0)?;
    let eta = focus_eta(level)?;
    let a = PI * radius * radius;
    let b = 2.0 * eta * wavelength * r0;
    let far = if b >= a { Distance::Infinite } else { Distance::Finite(a * r0 / (a - b)) };
    Ok(FocusInterval { near: a * r0 / (a + b), far })
}

/// Closed-form depth of focus `4 pi eta lambda R^2 r0^2 / (pi^2 R^4 - 4 eta^2 lambda^2 r0^2)`.
pub fn depth_of_focus(radius: f64, wavelength: f64, r0: f64, level: MainLobeValue) -> Result<Distance> {
    check_positive("radius", radius)?;
    check_positive("wavelength", wavelength)?;
    check_positive("focal distance", r0)?;
    let eta = focus_eta(level)?;
    if r0 >= PI * radius * radius / (2.0 * eta * wavelength) {
        return Ok(Distance::Infinite);
    }
    let r2 = radius * radius;
    let num = 4.0 * PI * eta * wavelength * r2 * r0 * r0;
    let den = PI * PI * r2 * r2 - 4.0 * eta * eta * wavelength * wavelength * r0 * r0;
    Ok(Distance::Finite(num / den))
}

fn bisect_on(mut lo: f64, mut hi: f64, mut above: impl FnMut(f64) -> bool) -> f64 {
    // `above(lo)` holds and `above(hi)` does not.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if above(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Focal interval measured on exact gains along the ray through `focus`.
///
/// The search walks away from the focus in steps of `1/r` until the gain
/// drops below `level`, then bisects. The far edge is infinite if the gain
/// toward the far-field direction never drops below `level`.
pub fn numeric_focus_interval(geom: &ArrayGeometry, focus: &FocusPoint, level: MainLobeValue) -> Result<FocusInterval> {
    let r0 = focus
        .distance
        .finite()
        .ok_or_else(|| domain("numeric depth of focus needs a finite focal distance"))?;
    check_positive("focal distance", r0)?;
    let level = level.value();
    let t0 = 1.0 / r0;
    let at = |t: f64| -> Result<f64> {
        let r = if t <= 0.0 { Distance::Infinite } else { Distance::Finite(1.0 / t) };
        Ok(exact_gain(geom, focus, &FocusPoint::new(r, focus.azimuth, focus.elevation))?.value)
    };
    let step = t0 / 400.0;

    let mut t = t0;
    let near = loop {
        let next = t + step;
        if at(next)? < level {
            break bisect_on(t, next, |x| at(x).map(|g| g >= level).unwrap_or(false));
        }
        t = next;
        if t > 1000.0 * t0 {
            return Err(domain("gain never falls below the level on the near side"));
        }
    };

    let mut t = t0;
    let far = loop {
        let next = (t - step).max(0.0);
        if at(next)? < level {
            break Distance::Finite(1.0 / bisect_on(t, next, |x| at(x).map(|g| g >= level).unwrap_or(false)));
        }
        if next == 0.0 {
            break Distance::Infinite;
        }
        t = next;
    };
    Ok(FocusInterval { near: 1.0 / near, far })
}

/// Effective Rayleigh distance with its coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErdResult {
    pub distance: Distance,
    pub threshold: f64,
    /// `epsilon_C` or `epsilon_L`; `None` for numeric searches.
    pub epsilon: Option<f64>,
    /// Direction, for results that depend on it.
    pub angle: Option<f64>,
}

fn main_lobe_argument(delta: f64) -> Result<f64> {
    check_threshold(delta)?;
    Ok(inv_j0_main_lobe(MainLobeValue::new(1.0 - delta)?))
}

/// `epsilon_C = pi / (16 J0^-1(1 - delta))`.
pub fn uca_epsilon(delta: f64) -> Result<f64> {
    Ok(PI / (16.0 * main_lobe_argument(delta)?))
}

/// UCA ERD `pi R^2 / (2 lambda J0^-1(1 - delta))`, the same at every angle.
pub fn erd_uca(radius: f64, wavelength: f64, delta: f64) -> Result<ErdResult> {
    check_positive("radius", radius)?;
    check_positive("wavelength", wavelength)?;
    let y = main_lobe_argument(delta)?;
    Ok(ErdResult {
        distance: Distance::Finite(PI * radius * radius / (2.0 * wavelength * y)),
        threshold: delta,
        epsilon: Some(PI / (16.0 * y)),
        angle: None,
    })
}

/// `epsilon_L` for a continuous linear aperture.
///
/// The far-field loss of a ULA focused at `r` is `1 - |G(mu)|` with
/// `mu^2 = D^2 cos^2(phi) / (2 lambda r)`, so the ERD is
/// `(1 / (4 mu*^2)) 2 D^2 cos^2(phi) / lambda` where `|G(mu*)| = 1 - delta`
/// on the decreasing main lobe of `|G|`. Gives 0.367 at `delta = 0.05`.
pub fn ula_epsilon(delta: f64) -> Result<f64> {
    check_threshold(delta)?;
    let target = 1.0 - delta;
    let g = |m: f64| g_mu(m).expect("mu is non-negative");
    let mut lo = 0.0;
    let mut hi = 0.05;
    while g(hi) >= target {
        lo = hi;
        hi += 0.05;
    }
    let mu_star = bisect_on(lo, hi, |m| g(m) >= target);
    Ok(1.0 / (4.0 * mu_star * mu_star))
}

/// ULA ERD `epsilon_L 2 D^2 cos^2(phi) / lambda`; zero at endfire.
pub fn erd_ula(aperture: f64, wavelength: f64, phi: f64, delta: f64) -> Result<ErdResult> {
    check_positive("aperture", aperture)?;
    check_positive("wavelength", wavelength)?;
    let eps = ula_epsilon(delta)?;
    let c = phi.cos();
    Ok(ErdResult {
        distance: Distance::Finite(eps * c * c * rayleigh_distance(aperture, wavelength)),
        threshold: delta,
        epsilon: Some(eps),
        angle: Some(phi),
    })
}

/// ERD ratio `rho(phi) = epsilon_L cos^2(phi) / epsilon_C` of a ULA over a
/// UCA with the same aperture.
pub fn erd_ratio(phi: f64, delta: f64) -> Result<f64> {
    let c = phi.cos();
    Ok(ula_epsilon(delta)? * c * c / uca_epsilon(delta)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ErdOutcome {
    Crossing(ErdResult),
    /// The far-field loss stays below the threshold on the whole search range.
    BelowThreshold,
}

impl ErdOutcome {
    pub fn distance(&self) -> Option<Distance> {
        match self {
            ErdOutcome::Crossing(r) => Some(r.distance),
            ErdOutcome::BelowThreshold => None,
        }
    }
}

/// Radial range of the numeric ERD search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErdSearch {
    pub r_min: f64,
    pub r_max: f64,
    /// Ratio between consecutive grid distances.
    pub ratio: f64,
}

impl ErdSearch {
    /// Half the aperture up to a thousand Rayleigh distances.
    pub fn for_geometry(geom: &ArrayGeometry) -> Self {
        let d = geom.aperture().max(geom.wavelength());
        Self { r_min: 0.5 * d, r_max: 1e3 * rayleigh_distance(d, geom.wavelength()), ratio: 1.01 }
    }
}

/// Outermost distance where the far-field loss `1 - |b(r, phi)^H a(phi)|`
/// reaches `delta`, using the default search range.
pub fn erd_numeric(geom: &ArrayGeometry, phi: f64, delta: f64) -> Result<ErdOutcome> {
    erd_numeric_in(geom, phi, delta, ErdSearch::for_geometry(geom))
}

/// The loss oscillates with `J0` sidelobes, so the search scans a log grid
/// inward from `r_max` and bisects the first (outermost) crossing.
pub fn erd_numeric_in(geom: &ArrayGeometry, phi: f64, delta: f64, search: ErdSearch) -> Result<ErdOutcome> {
    check_threshold(delta)?;
    check_positive("search r_min", search.r_min)?;
    check_positive("search r_max", search.r_max)?;
    if !(search.ratio > 1.0 && search.r_max > search.r_min) {
        return Err(domain("ERD search needs r_max > r_min and ratio > 1"));
    }
    let far = FocusPoint::far(phi);
    let loss = |r: f64| -> Result<f64> { Ok(1.0 - exact_gain(geom, &FocusPoint::planar(r, phi), &far)?.value) };
    if loss(search.r_max)? >= delta {
        return Ok(ErdOutcome::Crossing(ErdResult {
            distance: Distance::Infinite,
            threshold: delta,
            epsilon: None,
            angle: Some(phi),
        }));
    }
    let mut outer = search.r_max;
    loop {
        let inner = (outer / search.ratio).max(search.r_min);
        if loss(inner)? >= delta {
            let r = bisect_on(outer, inner, |r| loss(r).map(|l| l < delta).unwrap_or(false));
            return Ok(ErdOutcome::Crossing(ErdResult {
                distance: Distance::Finite(r),
                threshold: delta,
                epsilon: None,
                angle: Some(phi),
            }));
        }
        if inner == search.r_min {
            return Ok(ErdOutcome::BelowThreshold);
        }
        outer = inner;
    }
}

/// Distances `r2` on the ray through `r1` where the distance gain vanishes,
/// solving `zeta(r1, r2) = z_k` for the first `count` zeros of `J0`.
///
/// For each zero the far branch `1/r2 = 1/r1 - 2 lambda z_k / (pi R^2)` is
/// listed first, when positive, then the near branch. Zeros whose far
/// branch has no positive solution contribute only the near one.
pub fn zero_gain_distances(radius: f64, wavelength: f64, r1: f64, count: usize) -> Result<Vec<f64>> {
    check_positive("radius", radius)?;
    check_positive("wavelength", wavelength)?;
    check_positive("r1", r1)?;
    if count == 0 {
        return Ok(Vec::new());
    }
    let t1 = 1.0 / r1;
    let scale = 2.0 * wavelength / (PI * radius * radius);
    let mut out = Vec::with_capacity(2 * count);
    for z in j0_zeros(count)? {
        let far = t1 - scale * z;
        if far > 0.0 {
            out.push(1.0 / far);
        }
        out.push(1.0 / (t1 + scale * z));
    }
    Ok(out)
}

/// Refines a predicted zero-gain distance by golden-section minimization of
/// the exact gain over `1/r2` within 5% of the prediction.
pub fn polish_zero_distance(geom: &ArrayGeometry, focus: &FocusPoint, r2: f64) -> Result<f64> {
    check_positive("r2", r2)?;
    let gain_at = |t: f64| -> Result<f64> {
        Ok(exact_gain(geom, focus, &FocusPoint::new(Distance::Finite(1.0 / t), focus.azimuth, focus.elevation))?.value)
    };
    let (lo, hi) = golden_section(1.0 / (1.05 * r2), 1.05 / r2, 1e-12, gain_at)?;
    Ok(2.0 / (lo + hi))
}

/// Golden-section search for a minimum of `f` on `[a, b]`; returns the
/// final bracket.
pub(crate) fn golden_section(
    mut a: f64,
    mut b: f64,
    rel_tol: f64,
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > rel_tol * (a.abs() + b.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok((a, b))
}

/// Cylindrical gain `|G(mu)| |J0(zeta)|` for two in-plane points on the
/// same ray. With `M = 0` this is the distance gain.
pub fn cylindrical_gain(
    radius: f64,
    ring_spacing: f64,
    ring_half_count: usize,
    wavelength: f64,
    r1: Distance,
    r2: Distance,
) -> Result<GainApprox> {
    check_positive("radius", radius)?;
    check_positive("wavelength", wavelength)?;
    if ring_half_count > 0 {
        check_positive("ring spacing", ring_spacing)?;
    }
    let (r1, r2) = (r1.validate()?, r2.validate()?);
    let z = zeta(radius, wavelength, r1, r2);
    let m = mu(ring_half_count, ring_spacing, wavelength, r1, r2);
    Ok(GainApprox {
        value: g_mu(m)? * j0(z).abs(),
        beta: None,
        zeta: Some(z),
        mu: Some(m),
        formula: GainFormula::CylindricalFresnelJ0,
    })
}

/// Local maxima of a sampled curve, refined by golden section on `f`.
/// Returns `(position, value)` pairs in grid order.
pub fn refine_peaks(
    grid: &[f64],
    values: &[f64],
    mut f: impl FnMut(f64) -> Result<f64>,
) -> Result<Vec<(f64, f64)>> {
    let mut peaks = Vec::new();
    for i in 1..values.len().saturating_sub(1) {
        if values[i] > values[i - 1] && values[i] >= values[i + 1] {
            let (a, b) = golden_section(grid[i - 1], grid[i + 1], 1e-10, |x| Ok(-f(x)?))?;
            let x = 0.5 * (a + b);
            peaks.push((x, f(x)?));
        }
    }
    Ok(peaks)
}

/// First zero of `J0`, re-exported for bound checks.
pub fn first_zero() -> f64 {
    special::first_j0_zero()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LAMBDA: f64 = 0.01;
    const R: f64 = 0.64;

    fn reference_uca() -> ArrayGeometry {
        ArrayGeometry::uca(800, R, LAMBDA).unwrap()
    }

    fn half() -> MainLobeValue {
        MainLobeValue::new(HALF_POWER_LEVEL).unwrap()
    }

    #[test]
    fn exact_gain_identity_and_symmetry() {
        let g = reference_uca();
        let a = FocusPoint::planar(20.0, 0.1);
        let b = FocusPoint::planar(33.0, 0.104);
        assert_eq!(exact_gain(&g, &a, &a).unwrap().value, 1.0);
        assert_eq!(exact_gain(&g, &a, &b).unwrap().value, exact_gain(&g, &b, &a).unwrap().value);
    }

    #[test]
    fn exact_gain_matches_vector_inner_product() {
        use crate::geometry::near_focusing_vector;
        let g = reference_uca();
        let a = FocusPoint::planar(12.0, 1.0);
        let b = FocusPoint::far(1.01);
        let via_vectors =
            near_focusing_vector(&g, &a).unwrap().gain(&near_focusing_vector(&g, &b).unwrap()).unwrap();
        assert!((exact_gain(&g, &a, &b).unwrap().value - via_vectors).abs() < 1e-12);
    }

    #[test]
    fn reference_pair_matches_distance_gain() {
        let z = zeta(R, LAMBDA, Distance::Finite(20.0), Distance::Finite(30.0));
        assert!((z - 1.072).abs() < 1e-3, "{z}");
        let exact = exact_gain(&reference_uca(), &FocusPoint::planar(20.0, 0.0), &FocusPoint::planar(30.0, 0.0))
            .unwrap()
            .value;
        let approx = distance_gain(R, LAMBDA, Distance::Finite(20.0), Distance::Finite(30.0)).unwrap();
        assert!((exact - approx.value).abs() < 0.01);
        assert_eq!(approx.zeta, Some(z));
    }

    #[test]
    fn angular_gain_cases() {
        assert_eq!(angular_gain(R, LAMBDA, 0.3, 0.3).unwrap().value, 1.0);
        let z1 = first_zero();
        let dphi = 2.0 * (LAMBDA * z1 / (4.0 * PI * R)).asin();
        assert!(angular_gain(R, LAMBDA, 0.0, dphi).unwrap().value < 1e-12);
        assert!(angular_gain(-1.0, LAMBDA, 0.0, 0.1).is_err());
    }

    #[test]
    fn distance_gain_far_limit() {
        let r1 = 25.0;
        let got = distance_gain(R, LAMBDA, Distance::Finite(r1), Distance::Infinite).unwrap().value;
        let want = j0(PI * R * R / (2.0 * LAMBDA * r1)).abs();
        assert!((got - want).abs() < 1e-15);
        assert_eq!(distance_gain(R, LAMBDA, Distance::Finite(7.0), Distance::Finite(7.0)).unwrap().value, 1.0);
    }

    #[test]
    fn upper_bound_scaling() {
        let b1 = gain_upper_bound(0.5, LAMBDA, 20.0, 30.0).unwrap();
        let b2 = gain_upper_bound(1.0, LAMBDA, 20.0, 30.0).unwrap();
        assert!((b1 / b2 - 2.0).abs() < 1e-12);
        let b3 = gain_upper_bound(0.5, LAMBDA, 40.0, 60.0).unwrap();
        assert!((b3 / b1 - 2f64.sqrt()).abs() < 1e-12);
        assert!(gain_upper_bound(0.5, LAMBDA, 20.0, 20.0).is_err());
    }

    #[test]
    fn upper_bound_equals_envelope_of_zeta() {
        let z = zeta(0.9, LAMBDA, Distance::Finite(20.0), Distance::Finite(30.0));
        let bound = gain_upper_bound(0.9, LAMBDA, 20.0, 30.0).unwrap();
        assert!((bound - (2.0 / (PI * z)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn depth_of_focus_boundary_and_trends() {
        let eta = inv_j0_main_lobe(half());
        let edge = PI * R * R / (2.0 * eta * LAMBDA);
        assert_eq!(depth_of_focus(R, LAMBDA, edge, half()).unwrap(), Distance::Infinite);
        let mut prev = 0.0;
        for i in 1..50 {
            let r0 = edge * i as f64 / 50.0;
            let w = depth_of_focus(R, LAMBDA, r0, half()).unwrap().finite().unwrap();
            assert!(w > prev);
            prev = w;
        }
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let w = depth_of_focus(0.6 + 0.1 * i as f64, LAMBDA, 20.0, half()).unwrap().finite().unwrap();
            assert!(w < prev);
            prev = w;
        }
        assert!(depth_of_focus(R, LAMBDA, 20.0, MainLobeValue::new(1.0).unwrap()).is_err());
    }

    #[test]
    fn focus_interval_edges_bracket_focus() {
        let iv = focus_interval(R, LAMBDA, 20.0, half()).unwrap();
        let far = iv.far.finite().unwrap();
        assert!(iv.near < 20.0 && 20.0 < far);
        assert!((far - iv.near - depth_of_focus(R, LAMBDA, 20.0, half()).unwrap().finite().unwrap()).abs() < 1e-9);
        for edge in [iv.near, far] {
            let g = distance_gain(R, LAMBDA, Distance::Finite(20.0), Distance::Finite(edge)).unwrap().value;
            assert!((g - 0.5).abs() < 1e-9);
        }
    }

    #[test]
    fn numeric_depth_of_focus_agrees_with_closed_form() {
        let iv = numeric_focus_interval(&reference_uca(), &FocusPoint::planar(20.0, 0.0), half()).unwrap();
        let numeric = iv.width().finite().unwrap();
        let formula = depth_of_focus(R, LAMBDA, 20.0, half()).unwrap().finite().unwrap();
        assert!((numeric / formula - 1.0).abs() < 0.02, "{numeric} vs {formula}");
    }

    #[test]
    fn erd_uca_values() {
        let e = erd_uca(R, LAMBDA, 0.05).unwrap();
        let d = e.distance.finite().unwrap();
        assert!((d - 143.0).abs() < 1.0, "{d}");
        let e2 = erd_uca(2.0 * R, LAMBDA, 0.05).unwrap().distance.finite().unwrap();
        assert!((e2 / d - 4.0).abs() < 1e-12);
        let smallest = erd_uca(R, LAMBDA, 1.0 - 1e-12).unwrap().distance.finite().unwrap();
        assert!(smallest < d);
        assert!(erd_uca(R, LAMBDA, 1.0).is_err());
    }

    #[test]
    fn ula_epsilon_value() {
        let eps = ula_epsilon(0.05).unwrap();
        assert!((eps - 0.367).abs() < 5e-4, "{eps}");
        // independent check: |G| at the implied mu equals 1 - delta
        let m = (1.0 / (4.0 * eps)).sqrt();
        assert!((g_mu(m).unwrap() - 0.95).abs() < 1e-9);
    }

    #[test]
    fn erd_ula_angle_scaling() {
        let a = erd_ula(1.28, LAMBDA, 0.0, 0.05).unwrap().distance.finite().unwrap();
        let b = erd_ula(1.28, LAMBDA, PI / 3.0, 0.05).unwrap().distance.finite().unwrap();
        assert!((b / a - 0.25).abs() < 1e-12);
        let end = erd_ula(1.28, LAMBDA, PI / 2.0, 0.05).unwrap().distance.finite().unwrap();
        assert!(end < 1e-28);
    }

    #[test]
    fn erd_ratio_values() {
        assert!(erd_ratio(PI / 2.0, 0.05).unwrap() < 1e-30);
        assert_eq!(erd_ratio(0.4, 0.05).unwrap(), erd_ratio(-0.4, 0.05).unwrap());
        let rho0 = erd_ratio(0.0, 0.05).unwrap();
        let eps_c = PI / (16.0 * inv_j0_main_lobe(MainLobeValue::new(0.95).unwrap()));
        assert!((rho0 - ula_epsilon(0.05).unwrap() / eps_c).abs() < 1e-12);
        assert!(rho0 < 1.0);
    }

    #[test]
    fn erd_numeric_uca_matches_closed_form() {
        let g = reference_uca();
        let closed = erd_uca(R, LAMBDA, 0.05).unwrap().distance.finite().unwrap();
        for phi in [0.0, PI / 4.0, PI / 2.0] {
            let d = erd_numeric(&g, phi, 0.05).unwrap().distance().unwrap().finite().unwrap();
            assert!((d / closed - 1.0).abs() < 0.02, "phi {phi}: {d} vs {closed}");
        }
    }

    #[test]
    fn erd_numeric_reports_below_threshold() {
        let ula = ArrayGeometry::ula(64, 0.32, LAMBDA).unwrap();
        let out = erd_numeric(&ula, PI / 2.0, 0.05).unwrap();
        assert_eq!(out, ErdOutcome::BelowThreshold);
    }

    #[test]
    fn zero_gain_distances_invert_distance_gain() {
        let rs = zero_gain_distances(R, LAMBDA, 20.0, 4).unwrap();
        assert_eq!(rs.len(), 5);
        for r2 in &rs {
            let g = distance_gain(R, LAMBDA, Distance::Finite(20.0), Distance::Finite(*r2)).unwrap().value;
            assert!(g < 1e-6, "{r2}: {g}");
        }
        assert!(zero_gain_distances(R, LAMBDA, 20.0, 0).unwrap().is_empty());
    }

    #[test]
    fn polished_zero_is_a_deeper_null() {
        let g = reference_uca();
        let focus = FocusPoint::planar(20.0, 0.0);
        let r2 = zero_gain_distances(R, LAMBDA, 20.0, 1).unwrap()[0];
        let before = exact_gain(&g, &focus, &FocusPoint::planar(r2, 0.0)).unwrap().value;
        let polished = polish_zero_distance(&g, &focus, r2).unwrap();
        let after = exact_gain(&g, &focus, &FocusPoint::planar(polished, 0.0)).unwrap().value;
        assert!(after <= before && after < 1e-3, "{before} -> {after}");
    }

    #[test]
    fn cylindrical_reduces_to_distance_gain() {
        for r2 in [3.0, 8.0, 40.0] {
            let c = cylindrical_gain(R, 0.005, 0, LAMBDA, Distance::Infinite, Distance::Finite(r2)).unwrap();
            let d = distance_gain(R, LAMBDA, Distance::Infinite, Distance::Finite(r2)).unwrap();
            assert_eq!(c.value, d.value);
            assert_eq!(c.mu, Some(0.0));
        }
        let same = cylindrical_gain(R, 0.005, 6, LAMBDA, Distance::Finite(9.0), Distance::Finite(9.0)).unwrap();
        assert_eq!(same.value, 1.0);
    }

    #[test]
    fn cylindrical_gain_matches_double_sum() {
        let radius = 600.0 * LAMBDA / (4.0 * PI);
        let g = ArrayGeometry::cylindrical(600, radius, 0.005, 6, LAMBDA).unwrap();
        let far = FocusPoint::far(0.0);
        for i in 0..40 {
            let r = 1.0 + 99.0 * i as f64 / 39.0;
            let exact = exact_gain(&g, &far, &FocusPoint::planar(r, 0.0)).unwrap().value;
            let approx =
                cylindrical_gain(radius, 0.005, 6, LAMBDA, Distance::Infinite, Distance::Finite(r)).unwrap().value;
            assert!((exact - approx).abs() < 0.03, "r {r}: {exact} vs {approx}");
        }
    }

    #[test]
    fn peak_refinement_finds_parabola_top() {
        let f = |x: f64| Ok(1.0 - (x - 0.37).powi(2));
        let grid: Vec<f64> = (0..11).map(|i| i as f64 * 0.1).collect();
        let vals: Vec<f64> = grid.iter().map(|&x| f(x).unwrap()).collect();
        let peaks = refine_peaks(&grid, &vals, f).unwrap();
        assert_eq!(peaks.len(), 1);
        assert!((peaks[0].0 - 0.37).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn exact_gain_bounded(
            n in 1usize..200,
            radius in 0.05f64..2.0,
            r1 in 1.0f64..500.0,
            r2 in 1.0f64..500.0,
            phi1 in 0.0f64..6.3,
            phi2 in 0.0f64..6.3,
        ) {
            let g = ArrayGeometry::uca(n, radius, LAMBDA).unwrap();
            let a = FocusPoint::planar(r1, phi1);
            let b = FocusPoint::planar(r2, phi2);
            let v = exact_gain(&g, &a, &b).unwrap().value;
            prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            prop_assert!((exact_gain(&g, &a, &a).unwrap().value - 1.0).abs() < 1e-12);
        }

        #[test]
        fn mirror_symmetry(r1 in 2.0f64..100.0, r2 in 2.0f64..100.0, phi1 in -0.5f64..0.5, phi2 in -0.5f64..0.5) {
            let g = ArrayGeometry::uca(128, 0.2, LAMBDA).unwrap();
            let v = exact_gain(&g, &FocusPoint::planar(r1, phi1), &FocusPoint::planar(r2, phi2)).unwrap().value;
            let w = exact_gain(&g, &FocusPoint::planar(r1, -phi1), &FocusPoint::planar(r2, -phi2)).unwrap().value;
            prop_assert!((v - w).abs() < 1e-12);
        }

        #[test]
        fn upper_bound_holds_past_first_zero(radius in 0.2f64..2.0, r1 in 2.0f64..100.0, r2 in 2.0f64..100.0) {
            prop_assume!((r1 - r2).abs() > 1e-6);
            let g = distance_gain(radius, LAMBDA, Distance::Finite(r1), Distance::Finite(r2)).unwrap();
            if g.zeta.unwrap() >= first_zero() {
                prop_assert!(gain_upper_bound(radius, LAMBDA, r1, r2).unwrap() >= g.value);
            }
        }
    }
}
