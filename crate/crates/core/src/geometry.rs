//! Array layouts, propagation distances and beam vectors.
//!
//! Coordinates are Cartesian meters with the array centered at the origin.
//! A UCA lies in the `z = 0` plane with element `n` (1-based) at azimuth
//! `psi_n = 2 pi n / N`. A ULA lies on the y-axis. A cylindrical array stacks
//! `2M + 1` UCAs at heights `m d`, `m = -M..=M`.
//!
//! Element order is ring-major: rings ascend in `m`, and within a ring the
//! azimuth index runs `n = 1..=N`. Flat index `i = (m + M) N + (n - 1)`.
//!
//! Phase conventions: the far-field steering vector uses
//! `exp(+j k p_n . u)` and the near-field focusing vector uses
//! `exp(-j k (r_n - r))`, where `u` is the unit direction of the focal point.
//! The focusing vector degenerates into the steering vector when the
//! distance expansion keeps first-order terms only.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{domain, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub type Point3 = [f64; 3];

/// Wavelength for a carrier frequency in Hz.
pub fn wavelength_from_carrier(carrier_hz: f64) -> Result<f64> {
    if !(carrier_hz.is_finite() && carrier_hz > 0.0) {
        return Err(domain(format!("carrier frequency {carrier_hz} Hz must be positive")));
    }
    Ok(SPEED_OF_LIGHT / carrier_hz)
}

/// Classical Rayleigh distance `2 D^2 / lambda`.
pub fn rayleigh_distance(aperture: f64, wavelength: f64) -> f64 {
    2.0 * aperture * aperture / wavelength
}

/// Fresnel distance `(D/2) (D/lambda)^(1/3)`, beyond which the second-order
/// distance expansion is accurate.
pub fn fresnel_distance(aperture: f64, wavelength: f64) -> f64 {
    0.5 * aperture * (aperture / wavelength).cbrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case")]
pub enum Layout {
    Uca {
        elements: usize,
        radius: f64,
    },
    Ula {
        elements: usize,
        aperture: f64,
    },
    Cylindrical {
        elements_per_ring: usize,
        radius: f64,
        ring_spacing: f64,
        ring_half_count: usize,
    },
}

impl Layout {
    pub fn name(&self) -> &'static str {
        match self {
            Layout::Uca { .. } => "uca",
            Layout::Ula { .. } => "ula",
            Layout::Cylindrical { .. } => "cylindrical",
        }
    }
}

/// An immutable array description with precomputed element positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    layout: Layout,
    wavelength: f64,
    positions: Vec<Point3>,
}

fn check_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Geometry(format!("{name} must be positive and finite, got {value}")))
    }
}

impl ArrayGeometry {
    pub fn new(layout: Layout, wavelength: f64) -> Result<Self> {
        check_positive("wavelength", wavelength)?;
        let positions = match layout {
            Layout::Uca { elements, radius } => {
                check_count(elements)?;
                check_positive("radius", radius)?;
                ring_positions(elements, radius, 0.0).collect()
            }
            Layout::Ula { elements, aperture } => {
                check_count(elements)?;
                if elements > 1 {
                    check_positive("aperture", aperture)?;
                }
                let spacing = if elements > 1 { aperture / (elements - 1) as f64 } else { 0.0 };
                (0..elements)
                    .map(|i| [0.0, -0.5 * aperture + i as f64 * spacing, 0.0])
                    .map(|p| if elements == 1 { [0.0; 3] } else { p })
                    .collect()
            }
            Layout::Cylindrical { elements_per_ring, radius, ring_spacing, ring_half_count } => {
                check_count(elements_per_ring)?;
                check_positive("radius", radius)?;
                if ring_half_count > 0 {
                    check_positive("ring spacing", ring_spacing)?;
                }
                let m_max = ring_half_count as i64;
                (-m_max..=m_max)
                    .flat_map(|m| ring_positions(elements_per_ring, radius, m as f64 * ring_spacing))
                    .collect()
            }
        };
        Ok(Self { layout, wavelength, positions })
    }

    pub fn uca(elements: usize, radius: f64, wavelength: f64) -> Result<Self> {
        Self::new(Layout::Uca { elements, radius }, wavelength)
    }

    /// UCA whose arc spacing is half a wavelength: `R = N lambda / (4 pi)`.
    pub fn uca_half_wavelength(elements: usize, wavelength: f64) -> Result<Self> {
        let radius = elements as f64 * wavelength / (4.0 * PI);
        Self::uca(elements, radius, wavelength)
    }

    pub fn ula(elements: usize, aperture: f64, wavelength: f64) -> Result<Self> {
        Self::new(Layout::Ula { elements, aperture }, wavelength)
    }

    /// ULA with half-wavelength spacing: `D = (N - 1) lambda / 2`.
    pub fn ula_half_wavelength(elements: usize, wavelength: f64) -> Result<Self> {
        let aperture = elements.saturating_sub(1) as f64 * wavelength / 2.0;
        Self::ula(elements, aperture, wavelength)
    }

    pub fn cylindrical(
        elements_per_ring: usize,
        radius: f64,
        ring_spacing: f64,
        ring_half_count: usize,
        wavelength: f64,
    ) -> Result<Self> {
        Self::new(
            Layout::Cylindrical { elements_per_ring, radius, ring_spacing, ring_half_count },
            wavelength,
        )
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Total number of elements across all rings.
    pub fn element_count(&self) -> usize {
        self.positions.len()
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    /// Radius for circular layouts.
    pub fn radius(&self) -> Option<f64> {
        match self.layout {
            Layout::Uca { radius, .. } | Layout::Cylindrical { radius, .. } => Some(radius),
            Layout::Ula { .. } => None,
        }
    }

    /// Largest in-plane extent: `2R` for circular layouts, `D` for a ULA.
    pub fn aperture(&self) -> f64 {
        match self.layout {
            Layout::Uca { radius, .. } | Layout::Cylindrical { radius, .. } => 2.0 * radius,
            Layout::Ula { aperture, .. } => aperture,
        }
    }

    /// The `(ring m, azimuth n)` labels of a flat element index.
    pub fn element_label(&self, index: usize) -> Option<(i64, usize)> {
        if index >= self.positions.len() {
            return None;
        }
        match self.layout {
            Layout::Uca { .. } | Layout::Ula { .. } => Some((0, index + 1)),
            Layout::Cylindrical { elements_per_ring, ring_half_count, .. } => Some((
                (index / elements_per_ring) as i64 - ring_half_count as i64,
                index % elements_per_ring + 1,
            )),
        }
    }

    fn position(&self, index: usize) -> Result<Point3> {
        self.positions.get(index).copied().ok_or_else(|| {
            domain(format!("element index {index} out of range (array has {})", self.positions.len()))
        })
    }
}

fn check_count(elements: usize) -> Result<()> {
    if elements == 0 {
        Err(Error::Geometry("element count must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn ring_positions(elements: usize, radius: f64, height: f64) -> impl Iterator<Item = Point3> {
    (1..=elements).map(move |n| {
        let psi = 2.0 * PI * n as f64 / elements as f64;
        [radius * psi.cos(), radius * psi.sin(), height]
    })
}

/// Distance from the origin to a focal point, or the far-field sentinel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distance {
    Finite(f64),
    Infinite,
}

impl Distance {
    pub fn is_infinite(self) -> bool {
        matches!(self, Distance::Infinite)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Distance::Finite(r) => Some(r),
            Distance::Infinite => None,
        }
    }

    /// `1 / r`, zero for the far-field sentinel.
    pub fn reciprocal(self) -> f64 {
        match self {
            Distance::Finite(r) => 1.0 / r,
            Distance::Infinite => 0.0,
        }
    }

    /// Value in meters with `f64::INFINITY` for the sentinel.
    pub fn meters(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub(crate) fn validate(self) -> Result<Self> {
        match self {
            Distance::Finite(r) if !(r.is_finite() && r > 0.0) => {
                Err(domain(format!("focal distance {r} must be positive and finite")))
            }
            d => Ok(d),
        }
    }
}

impl From<f64> for Distance {
    fn from(r: f64) -> Self {
        if r == f64::INFINITY {
            Distance::Infinite
        } else {
            Distance::Finite(r)
        }
    }
}

impl fmt::Display for Distance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distance::Finite(r) => write!(f, "{r}"),
            Distance::Infinite => f.write_str("inf"),
        }
    }
}

// The far-field sentinel is always the token "inf", never a large float.
impl Serialize for Distance {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Distance::Finite(r) => serializer.serialize_f64(*r),
            Distance::Infinite => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Distance {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct DistanceVisitor;

        impl Visitor<'_> for DistanceVisitor {
            type Value = Distance;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a distance in meters or the string \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Distance, E> {
                Ok(Distance::Finite(v))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Distance, E> {
                Ok(Distance::Finite(v as f64))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Distance, E> {
                Ok(Distance::Finite(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Distance, E> {
                if v == "inf" {
                    Ok(Distance::Infinite)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }

        deserializer.deserialize_any(DistanceVisitor)
    }
}

/// Target location in spherical coordinates about the array center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusPoint {
    pub distance: Distance,
    /// Azimuth in `[0, 2 pi)`.
    pub azimuth: f64,
    /// Elevation from the +z axis in `[0, pi]`; `pi / 2` is the array plane.
    pub elevation: f64,
}

impl FocusPoint {
    pub fn new(distance: Distance, azimuth: f64, elevation: f64) -> Self {
        Self { distance, azimuth: azimuth.rem_euclid(2.0 * PI), elevation }
    }

    /// A point in the `z = 0` plane.
    pub fn planar(r: f64, azimuth: f64) -> Self {
        Self::new(Distance::from(r), azimuth, PI / 2.0)
    }

    /// Far-field direction in the `z = 0` plane.
    pub fn far(azimuth: f64) -> Self {
        Self::new(Distance::Infinite, azimuth, PI / 2.0)
    }

    pub fn direction(&self) -> Point3 {
        let (st, ct) = self.elevation.sin_cos();
        let (sp, cp) = self.azimuth.sin_cos();
        [st * cp, st * sp, ct]
    }
}

fn dot(a: Point3, b: Point3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Euclidean distance between an element and a finite focal point.
pub fn exact_distance(geom: &ArrayGeometry, element: usize, point: &FocusPoint) -> Result<f64> {
    let p = geom.position(element)?;
    let r = match point.distance {
        Distance::Finite(r) if r.is_finite() && r >= 0.0 => r,
        Distance::Finite(r) => return Err(domain(format!("focal distance {r} must be finite and >= 0"))),
        Distance::Infinite => {
            return Err(domain("exact distance undefined for the far-field sentinel; use the steering vector"))
        }
    };
    let u = point.direction();
    let d = [r * u[0] - p[0], r * u[1] - p[1], r * u[2] - p[2]];
    Ok(dot(d, d).sqrt())
}

/// `r_n - r`, evaluated without cancellation for large `r`.
fn path_difference(p: Point3, u: Point3, r: f64) -> f64 {
    let pu = dot(p, u);
    let pp = dot(p, p);
    let rn = (r * r - 2.0 * r * pu + pp).max(0.0).sqrt();
    (pp - 2.0 * r * pu) / (rn + r)
}

/// Exact distance together with its first- and second-order expansions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceExpansion {
    pub exact: f64,
    /// `r - p . u`; the far-field model.
    pub first_order: f64,
    /// First order plus `(|p|^2 - (p . u)^2) / (2 r)`.
    pub second_order: f64,
    /// `second_order - r`.
    pub residual: f64,
    /// `(chi1, chi2, chi3)` of the cylindrical second-order term, for
    /// circular layouts. The second-order correction equals
    /// `(chi1 + chi2 - chi3) / r`.
    pub cross_terms: Option<[f64; 3]>,
}

impl DistanceExpansion {
    /// The truncation of the requested order (1 or 2).
    pub fn truncation(&self, order: u8) -> Result<f64> {
        match order {
            1 => Ok(self.first_order),
            2 => Ok(self.second_order),
            _ => Err(domain(format!("expansion order {order} not in {{1, 2}}"))),
        }
    }
}

pub fn taylor_distance(geom: &ArrayGeometry, element: usize, point: &FocusPoint) -> Result<DistanceExpansion> {
    let r = match point.distance {
        Distance::Finite(r) if r.is_finite() && r > 0.0 => r,
        other => return Err(domain(format!("taylor expansion needs 0 < r < inf, got {other}"))),
    };
    let exact = exact_distance(geom, element, point)?;
    let p = geom.position(element)?;
    let u = point.direction();
    let pu = dot(p, u);
    let first_order = r - pu;
    let correction = (dot(p, p) - pu * pu) / (2.0 * r);
    let second_order = first_order + correction;
    let cross_terms = geom.radius().map(|radius| {
        let psi = p[1].atan2(p[0]);
        let md = p[2];
        let (st, ct) = point.elevation.sin_cos();
        let c = (point.azimuth - psi).cos();
        [
            0.5 * radius * radius * (1.0 - st * st * c * c),
            0.5 * md * md * (1.0 - ct * ct),
            radius * md * st * ct * c,
        ]
    });
    Ok(DistanceExpansion { exact, first_order, second_order, residual: second_order - r, cross_terms })
}

/// Unit-norm, constant-modulus complex weights over the array elements.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamVector {
    weights: Vec<Complex64>,
}

impl BeamVector {
    pub fn weights(&self) -> &[Complex64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.weights.iter().map(|w| w.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `self^H other`.
    pub fn inner(&self, other: &BeamVector) -> Result<Complex64> {
        inner_product(&self.weights, &other.weights)
    }

    /// `|self^H other|`.
    pub fn gain(&self, other: &BeamVector) -> Result<f64> {
        Ok(self.inner(other)?.norm())
    }

    /// Phase of every weight in `(-pi, pi]`.
    pub fn phases(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.arg()).collect()
    }

    pub fn into_weights(self) -> Vec<Complex64> {
        self.weights
    }
}

/// `a^H b`.
pub fn inner_product(a: &[Complex64], b: &[Complex64]) -> Result<Complex64> {
    if a.len() != b.len() {
        return Err(Error::Dimension { expected: a.len(), got: b.len() });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x.conj() * y).sum())
}

/// Per-element phase of the beam vector focused at `point`.
pub(crate) fn element_phase(p: Point3, u: Point3, distance: Distance, k: f64) -> f64 {
    match distance {
        Distance::Finite(r) => -k * path_difference(p, u, r),
        Distance::Infinite => k * dot(p, u),
    }
}

/// Fills `out` with the weights focused at `point`; the shared kernel behind
/// every beam vector in the crate.
pub(crate) fn fill_weights(geom: &ArrayGeometry, point: &FocusPoint, out: &mut [Complex64]) {
    let k = geom.wavenumber();
    let u = point.direction();
    let scale = 1.0 / (geom.element_count() as f64).sqrt();
    for (w, &p) in out.iter_mut().zip(&geom.positions) {
        *w = Complex64::from_polar(scale, element_phase(p, u, point.distance, k));
    }
}

fn beam_vector(geom: &ArrayGeometry, point: &FocusPoint) -> BeamVector {
    let mut weights = vec![Complex64::new(0.0, 0.0); geom.element_count()];
    fill_weights(geom, point, &mut weights);
    BeamVector { weights }
}

/// Far-field steering vector `exp(+j k p_n . u) / sqrt(N)`.
pub fn far_steering_vector(geom: &ArrayGeometry, azimuth: f64, elevation: f64) -> BeamVector {
    beam_vector(geom, &FocusPoint::new(Distance::Infinite, azimuth, elevation))
}

/// Near-field focusing vector `exp(-j k (r_n - r)) / sqrt(N)` built from
/// exact distances; the far-field sentinel yields the steering vector.
pub fn near_focusing_vector(geom: &ArrayGeometry, point: &FocusPoint) -> Result<BeamVector> {
    point.distance.validate()?;
    Ok(beam_vector(geom, point))
}
