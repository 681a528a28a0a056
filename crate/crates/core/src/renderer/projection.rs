//! Weak-perspective projection of template keypoints.
//!
//! The camera sits on the +z axis of the rotated model frame at distance `ρ`
//! and looks at the origin. For a model point `p` and viewpoint rotation `R`,
//! with `c = R·p`:
//!
//! ```text
//! u = (w − 1)/2 + s·c.x      v = (h − 1)/2 − s·c.y      depth = ρ − c.z
//! ```

use std::io::Write;

use serde::Serialize;

use super::template::TemplateModel;
use crate::error::{Error, Result};
use crate::grid::Mask;
use crate::scalar::Scalar;
use crate::viewpoint::{RotationMatrix, Viewpoint};

pub const DEFAULT_RESOLUTION: (usize, usize) = (64, 64);
pub const DEFAULT_OCCLUSION_RADIUS_PX: f64 = 3.0;
pub const DEFAULT_ALPHA_DILATION_PX: f64 = 2.0;
pub const MIN_RESOLUTION: usize = 8;
/// Camera distance and image half-extent, in model radii.
const DISTANCE_RADII: f64 = 3.0;
const VIEW_RADII: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera<T: Scalar> {
    pub pixels_per_unit: T,
    pub distance: T,
    pub occlusion_radius: T,
    pub alpha_dilation: T,
}

impl<T: Scalar> Camera<T> {
    pub fn new(pixels_per_unit: T, distance: T) -> Result<Self> {
        if !(pixels_per_unit.is_finite() && pixels_per_unit > T::zero() && distance.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "camera needs positive finite scale, got {pixels_per_unit} px/unit at distance {distance}"
            )));
        }
        Ok(Self {
            pixels_per_unit,
            distance,
            occlusion_radius: T::lit(DEFAULT_OCCLUSION_RADIUS_PX),
            alpha_dilation: T::lit(DEFAULT_ALPHA_DILATION_PX),
        })
    }

    /// Camera framing `model` so that its bounding sphere spans two thirds of
    /// the shorter image side.
    pub fn fit(model: &TemplateModel, (height, width): (usize, usize)) -> Result<Self> {
        if height.min(width) < MIN_RESOLUTION {
            return Err(Error::ResolutionTooSmall { height, width });
        }
        let radius = model.radius();
        let side = (height.min(width) - 1) as f64;
        Self::new(T::lit(side / (2.0 * VIEW_RADII * radius)), T::lit(DISTANCE_RADII * radius))
    }

    pub fn with_occlusion_radius(mut self, px: T) -> Self {
        self.occlusion_radius = px;
        self
    }

    /// Image position and depth of a model-frame point.
    pub fn project(&self, rotation: &RotationMatrix<T>, p: [T; 3], (height, width): (usize, usize)) -> (T, T, T) {
        let c = rotation.apply(p);
        let half = T::lit(0.5);
        let cx = T::lit((width - 1) as f64) * half;
        let cy = T::lit((height - 1) as f64) * half;
        (cx + self.pixels_per_unit * c[0], cy - self.pixels_per_unit * c[1], self.distance - c[2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProjectedKeypoint<T: Scalar> {
    pub id: u32,
    pub u: T,
    pub v: T,
    pub depth: T,
    pub visible: bool,
}

/// Keypoint projection of a template at one viewpoint, with its alpha mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Render<T: Scalar> {
    viewpoint: Viewpoint<T>,
    height: usize,
    width: usize,
    keypoints: Vec<ProjectedKeypoint<T>>,
    alpha: Mask,
}

impl<T: Scalar> Render<T> {
    pub fn viewpoint(&self) -> Viewpoint<T> {
        self.viewpoint
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Keypoints in template order.
    pub fn keypoints(&self) -> &[ProjectedKeypoint<T>] {
        &self.keypoints
    }

    pub fn keypoint(&self, id: u32) -> Option<&ProjectedKeypoint<T>> {
        self.keypoints.iter().find(|k| k.id == id)
    }

    pub fn visible(&self) -> impl Iterator<Item = &ProjectedKeypoint<T>> {
        self.keypoints.iter().filter(|k| k.visible)
    }

    pub fn alpha(&self) -> &Mask {
        &self.alpha
    }

    /// Copy with the given keypoints marked invisible and alpha re-rasterized.
    pub fn with_hidden(&self, model: &TemplateModel, hidden: &[u32], dilation: T) -> Self {
        let mut keypoints = self.keypoints.clone();
        for k in keypoints.iter_mut().filter(|k| hidden.contains(&k.id)) {
            k.visible = false;
        }
        let alpha = rasterize_alpha(model, &keypoints, self.height, self.width, dilation);
        Self { viewpoint: self.viewpoint, height: self.height, width: self.width, keypoints, alpha }
    }

    /// Writes `id,u,v,depth,visible` rows.
    pub fn write_keypoints_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for k in &self.keypoints {
            w.serialize(k)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Renders `model` at `viewpoint` with a camera fitted to the resolution.
pub fn render<T: Scalar>(model: &TemplateModel, viewpoint: &Viewpoint<T>, resolution: (usize, usize)) -> Result<Render<T>> {
    render_with(model, &Camera::fit(model, resolution)?, viewpoint, resolution)
}

/// Renders `model` at `viewpoint` through an explicit camera.
///
/// A keypoint is hidden when another keypoint projects within the occlusion
/// radius and lies strictly nearer the camera.
pub fn render_with<T: Scalar>(
    model: &TemplateModel,
    camera: &Camera<T>,
    viewpoint: &Viewpoint<T>,
    (height, width): (usize, usize),
) -> Result<Render<T>> {
    if height.min(width) < MIN_RESOLUTION {
        return Err(Error::ResolutionTooSmall { height, width });
    }
    let rotation = viewpoint.to_rotation();
    let mut keypoints = Vec::with_capacity(model.len());
    let (max_u, max_v) = (T::lit((width - 1) as f64), T::lit((height - 1) as f64));
    for k in model.keypoints() {
        let p = k.position.map(T::lit);
        let (u, v, depth) = camera.project(&rotation, p, (height, width));
        if !(u >= T::zero() && v >= T::zero() && u <= max_u && v <= max_v) {
            return Err(Error::ResolutionTooSmall { height, width });
        }
        keypoints.push(ProjectedKeypoint { id: k.id, u, v, depth, visible: true });
    }
    let r2 = camera.occlusion_radius * camera.occlusion_radius;
    let hidden: Vec<bool> = keypoints
        .iter()
        .map(|a| {
            keypoints.iter().any(|b| {
                let (du, dv) = (a.u - b.u, a.v - b.v);
                b.depth < a.depth && du * du + dv * dv <= r2
            })
        })
        .collect();
    for (k, h) in keypoints.iter_mut().zip(hidden) {
        k.visible = !h;
    }
    let alpha = rasterize_alpha(model, &keypoints, height, width, camera.alpha_dilation);
    Ok(Render { viewpoint: *viewpoint, height, width, keypoints, alpha })
}

fn segment_distance_sq<T: Scalar>(p: (T, T), a: (T, T), b: (T, T)) -> T {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > T::zero() {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let (ex, ey) = (p.0 - (a.0 + t * dx), p.1 - (a.1 + t * dy));
    ex * ex + ey * ey
}

/// Pixels within `dilation` of a visible keypoint or of an edge whose
/// endpoints are both visible.
pub(crate) fn rasterize_alpha<T: Scalar>(
    model: &TemplateModel,
    keypoints: &[ProjectedKeypoint<T>],
    height: usize,
    width: usize,
    dilation: T,
) -> Mask {
    let mut alpha = Mask::filled(height, width, false);
    let d2 = dilation * dilation;
    let mut stamp = |a: (T, T), b: (T, T)| {
        let lo_u = (a.0.min(b.0) - dilation).floor().max(T::zero()).as_f64() as usize;
        let hi_u = ((a.0.max(b.0) + dilation).ceil().as_f64().max(0.0) as usize).min(width - 1);
        let lo_v = (a.1.min(b.1) - dilation).floor().max(T::zero()).as_f64() as usize;
        let hi_v = ((a.1.max(b.1) + dilation).ceil().as_f64().max(0.0) as usize).min(height - 1);
        for r in lo_v..=hi_v {
            for c in lo_u..=hi_u {
                let p = (T::lit(c as f64), T::lit(r as f64));
                if segment_distance_sq(p, a, b) <= d2 {
                    alpha.set((r, c), true);
                }
            }
        }
    };
    for k in keypoints.iter().filter(|k| k.visible) {
        stamp((k.u, k.v), (k.u, k.v));
    }
    for &(ia, ib) in model.edges() {
        let (Some(a), Some(b)) = (model.index_of(ia), model.index_of(ib)) else { continue };
        let (a, b) = (&keypoints[a], &keypoints[b]);
        if a.visible && b.visible {
            stamp((a.u, a.v), (b.u, b.v));
        }
    }
    alpha
}
