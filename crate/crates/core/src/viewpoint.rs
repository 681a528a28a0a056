//! Viewpoint angles, their wrapped differences, rotation matrices and the
//! geodesic rotation distance.
//!
//! Angles are stored in degrees and always normalized to `(-180, 180]`.
//! Radians only appear inside trigonometric calls.
//!
//! # Camera convention
//!
//! The model frame has `x` to the model's right, `y` up and `z` out of the
//! model's front. The camera frame has `x` right, `y` up and `z` pointing from
//! the object toward the camera, which sits on the `+z` axis looking at the
//! origin. The world-to-camera rotation is
//!
//! ```text
//! R = Rz(tilt) · Rx(-elevation) · Ry(azimuth)
//! ```
//!
//! where each factor is a *frame* rotation (the transpose of the active rotation
//! by the same angle). Under this convention a positive elevation looks down on
//! the object from above, a positive azimuth orbits the camera toward the
//! model's right side, and a positive tilt rolls the camera counter-clockwise.

use std::fmt;
use std::ops::Neg;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{deg_to_rad, rad_to_deg, Scalar};

/// Wraps an angle in degrees into `(-180, 180]`.
///
/// `-180` maps to `+180`. Non-finite input is rejected.
pub fn wrap_angle<T: Scalar>(raw: T) -> Result<T> {
    if !raw.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    Ok(wrap_finite(raw))
}

// fmod is exact and the single correction step is exact by Sterbenz, so the
// result is the exact representative of `raw` modulo 360.
#[inline]
pub(crate) fn wrap_finite<T: Scalar>(raw: T) -> T {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    let r = raw % full;
    if r > half {
        r - full
    } else if r <= -half {
        r + full
    } else {
        r
    }
}

fn wrap_checked<T: Scalar>(raw: T, what: &'static str) -> Result<T> {
    if !raw.is_finite() {
        return Err(Error::NonFinite(what));
    }
    Ok(wrap_finite(raw))
}

#[derive(Deserialize)]
struct AnglesRepr<T> {
    azimuth: T,
    elevation: T,
    tilt: T,
}

/// Object viewpoint as (azimuth, elevation, tilt) in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AnglesRepr<T>", bound(deserialize = "T: Scalar + serde::de::DeserializeOwned"))]
pub struct Viewpoint<T: Scalar> {
    azimuth: T,
    elevation: T,
    tilt: T,
}

impl<T: Scalar> TryFrom<AnglesRepr<T>> for Viewpoint<T> {
    type Error = Error;

    fn try_from(r: AnglesRepr<T>) -> Result<Self> {
        Self::new(r.azimuth, r.elevation, r.tilt)
    }
}

impl<T: Scalar> Viewpoint<T> {
    /// Builds a viewpoint, wrapping every component into `(-180, 180]`.
    pub fn new(azimuth: T, elevation: T, tilt: T) -> Result<Self> {
        Ok(Self {
            azimuth: wrap_checked(azimuth, "azimuth")?,
            elevation: wrap_checked(elevation, "elevation")?,
            tilt: wrap_checked(tilt, "tilt")?,
        })
    }

    pub fn zero() -> Self {
        Self { azimuth: T::zero(), elevation: T::zero(), tilt: T::zero() }
    }

    pub fn azimuth(&self) -> T {
        self.azimuth
    }

    pub fn elevation(&self) -> T {
        self.elevation
    }

    pub fn tilt(&self) -> T {
        self.tilt
    }

    pub fn components(&self) -> [T; 3] {
        [self.azimuth, self.elevation, self.tilt]
    }

    pub fn from_components(c: [T; 3]) -> Result<Self> {
        Self::new(c[0], c[1], c[2])
    }

    /// Wrapped componentwise difference `other - self`.
    pub fn delta_to(&self, other: &Self) -> ViewpointDelta<T> {
        delta(self, other)
    }

    pub fn apply(&self, d: &ViewpointDelta<T>) -> Self {
        apply_delta(self, d)
    }

    pub fn to_rotation(&self) -> RotationMatrix<T> {
        to_rotation(self)
    }

    pub fn cast<U: Scalar>(&self) -> Viewpoint<U> {
        Viewpoint {
            azimuth: wrap_finite(U::lit(self.azimuth.as_f64())),
            elevation: wrap_finite(U::lit(self.elevation.as_f64())),
            tilt: wrap_finite(U::lit(self.tilt.as_f64())),
        }
    }
}

impl<T: Scalar> fmt::Display for Viewpoint<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.azimuth, self.elevation, self.tilt)
    }
}

#[derive(Deserialize)]
struct DeltaRepr<T> {
    d_azimuth: T,
    d_elevation: T,
    d_tilt: T,
}

/// Per-axis wrapped signed difference between two viewpoints, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DeltaRepr<T>", bound(deserialize = "T: Scalar + serde::de::DeserializeOwned"))]
pub struct ViewpointDelta<T: Scalar> {
    d_azimuth: T,
    d_elevation: T,
    d_tilt: T,
}

impl<T: Scalar> TryFrom<DeltaRepr<T>> for ViewpointDelta<T> {
    type Error = Error;

    fn try_from(r: DeltaRepr<T>) -> Result<Self> {
        Self::new(r.d_azimuth, r.d_elevation, r.d_tilt)
    }
}

impl<T: Scalar> ViewpointDelta<T> {
    pub fn new(d_azimuth: T, d_elevation: T, d_tilt: T) -> Result<Self> {
        Ok(Self {
            d_azimuth: wrap_checked(d_azimuth, "azimuth difference")?,
            d_elevation: wrap_checked(d_elevation, "elevation difference")?,
            d_tilt: wrap_checked(d_tilt, "tilt difference")?,
        })
    }

    pub fn zero() -> Self {
        Self { d_azimuth: T::zero(), d_elevation: T::zero(), d_tilt: T::zero() }
    }

    pub fn d_azimuth(&self) -> T {
        self.d_azimuth
    }

    pub fn d_elevation(&self) -> T {
        self.d_elevation
    }

    pub fn d_tilt(&self) -> T {
        self.d_tilt
    }

    pub fn components(&self) -> [T; 3] {
        [self.d_azimuth, self.d_elevation, self.d_tilt]
    }

    pub fn from_components(c: [T; 3]) -> Result<Self> {
        Self::new(c[0], c[1], c[2])
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> T {
        self.d_azimuth.abs().max(self.d_elevation.abs()).max(self.d_tilt.abs())
    }

    pub fn l1(&self) -> T {
        self.d_azimuth.abs() + self.d_elevation.abs() + self.d_tilt.abs()
    }
}

impl<T: Scalar> Neg for ViewpointDelta<T> {
    type Output = Self;

    fn neg(self) -> Self {
        Self {
            d_azimuth: wrap_finite(-self.d_azimuth),
            d_elevation: wrap_finite(-self.d_elevation),
            d_tilt: wrap_finite(-self.d_tilt),
        }
    }
}

impl<T: Scalar> fmt::Display for ViewpointDelta<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Δ({}, {}, {})", self.d_azimuth, self.d_elevation, self.d_tilt)
    }
}

/// Wrapped componentwise difference `b - a`, so that `apply_delta(a, delta(a, b)) == b`.
pub fn delta<T: Scalar>(a: &Viewpoint<T>, b: &Viewpoint<T>) -> ViewpointDelta<T> {
    ViewpointDelta {
        d_azimuth: wrap_finite(b.azimuth - a.azimuth),
        d_elevation: wrap_finite(b.elevation - a.elevation),
        d_tilt: wrap_finite(b.tilt - a.tilt),
    }
}

pub fn apply_delta<T: Scalar>(a: &Viewpoint<T>, d: &ViewpointDelta<T>) -> Viewpoint<T> {
    Viewpoint {
        azimuth: wrap_finite(a.azimuth + d.d_azimuth),
        elevation: wrap_finite(a.elevation + d.d_elevation),
        tilt: wrap_finite(a.tilt + d.d_tilt),
    }
}

/// 3×3 rotation matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix<T: Scalar>(pub [[T; 3]; 3]);

impl<T: Scalar> RotationMatrix<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self([[o, z, z], [z, o, z], [z, z, o]])
    }

    /// Frame rotation about `x` by `deg` degrees.
    pub fn frame_x(deg: T) -> Self {
        let (s, c) = deg_to_rad(deg).sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self([[o, z, z], [z, c, s], [z, -s, c]])
    }

    /// Frame rotation about `y` by `deg` degrees.
    pub fn frame_y(deg: T) -> Self {
        let (s, c) = deg_to_rad(deg).sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self([[c, z, -s], [z, o, z], [s, z, c]])
    }

    /// Frame rotation about `z` by `deg` degrees.
    pub fn frame_z(deg: T) -> Self {
        let (s, c) = deg_to_rad(deg).sin_cos();
        let (o, z) = (T::one(), T::zero());
        Self([[c, s, z], [-s, c, z], [z, z, o]])
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let mut out = [[T::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.0[i][0] * rhs.0[0][j] + self.0[i][1] * rhs.0[1][j] + self.0[i][2] * rhs.0[2][j];
            }
        }
        Self(out)
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Self([[m[0][0], m[1][0], m[2][0]], [m[0][1], m[1][1], m[2][1]], [m[0][2], m[1][2], m[2][2]]])
    }

    pub fn trace(&self) -> T {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn determinant(&self) -> T {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn apply(&self, p: [T; 3]) -> [T; 3] {
        let m = &self.0;
        [
            m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2],
            m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2],
            m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2],
        ]
    }

    /// Max deviation of `RᵀR` from identity and of `det R` from one.
    pub fn orthonormality_error(&self) -> T {
        let rtr = self.transpose().mul(self);
        let mut worst = (self.determinant() - T::one()).abs();
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((rtr.0[i][j] - target).abs());
            }
        }
        worst
    }

    /// Rotation angle of this matrix in degrees, in `[0, 180]`.
    pub fn angle(&self) -> T {
        let m = &self.0;
        let two = T::lit(2.0);
        let cos = ((self.trace() - T::one()) / two).max(-T::one()).min(T::one());
        let ax = m[2][1] - m[1][2];
        let ay = m[0][2] - m[2][0];
        let az = m[1][0] - m[0][1];
        let sin = (ax * ax + ay * ay + az * az).sqrt() / two;
        rad_to_deg(sin.atan2(cos))
    }
}

pub fn to_rotation<T: Scalar>(v: &Viewpoint<T>) -> RotationMatrix<T> {
    RotationMatrix::frame_z(v.tilt)
        .mul(&RotationMatrix::frame_x(-v.elevation))
        .mul(&RotationMatrix::frame_y(v.azimuth))
}

/// Geodesic distance between the rotations of two viewpoints, in degrees.
///
/// Equal to `arccos((tr(RaᵀRb) - 1) / 2)`; evaluated through `atan2` of the
/// skew and symmetric parts so that identical rotations give exactly zero.
pub fn geodesic_distance<T: Scalar>(a: &Viewpoint<T>, b: &Viewpoint<T>) -> T {
    to_rotation(a).transpose().mul(&to_rotation(b)).angle()
}
