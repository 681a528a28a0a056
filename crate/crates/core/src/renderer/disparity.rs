use std::collections::BTreeMap;

use super::projection::{render_with, Camera};
use super::template::TemplateModel;
use crate::error::Result;
use crate::scalar::Scalar;
use crate::viewpoint::{apply_delta, Viewpoint, ViewpointDelta};

/// Default stereo partner offset: 10° in azimuth and elevation.
pub const STEREO_SHIFT_DEG: [f64; 3] = [10.0, 10.0, 0.0];
const SPLAT_SIGMA_PX: f64 = 2.0;

/// Keypoint displacements between a render and its stereo partner, plus a
/// dense two-channel field splatted from them.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap<T: Scalar> {
    height: usize,
    width: usize,
    vectors: BTreeMap<u32, [T; 2]>,
    field: Vec<[T; 2]>,
}

impl<T: Scalar> DisparityMap<T> {
    pub fn resolution(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// `(du, dv)` for each keypoint visible in both renders.
    pub fn vectors(&self) -> &BTreeMap<u32, [T; 2]> {
        &self.vectors
    }

    /// Dense field, row-major; zero where no keypoint is within reach.
    pub fn field(&self) -> &[[T; 2]] {
        &self.field
    }
}

/// Disparity between renders at `v` and at `v + shift` through one camera.
pub fn stereo_disparity<T: Scalar>(
    model: &TemplateModel,
    camera: &Camera<T>,
    v: &Viewpoint<T>,
    shift: &ViewpointDelta<T>,
    resolution: (usize, usize),
) -> Result<DisparityMap<T>> {
    let (height, width) = resolution;
    let a = render_with(model, camera, v, resolution)?;
    let b = render_with(model, camera, &apply_delta(v, shift), resolution)?;
    let vectors: BTreeMap<u32, [T; 2]> = a
        .keypoints()
        .iter()
        .zip(b.keypoints())
        .filter(|(ka, kb)| ka.visible && kb.visible)
        .map(|(ka, kb)| (ka.id, [kb.u - ka.u, kb.v - ka.v]))
        .collect();

    let reach = 3.0 * SPLAT_SIGMA_PX;
    let inv = T::lit(-0.5 / (SPLAT_SIGMA_PX * SPLAT_SIGMA_PX));
    let mut acc = vec![([T::zero(); 2], T::zero()); height * width];
    for k in a.keypoints() {
        let Some(vec) = vectors.get(&k.id) else { continue };
        let (u, vv) = (k.u.as_f64(), k.v.as_f64());
        let c0 = (u - reach).ceil().max(0.0) as usize;
        let c1 = ((u + reach).floor().max(0.0) as usize).min(width - 1);
        let r0 = (vv - reach).ceil().max(0.0) as usize;
        let r1 = ((vv + reach).floor().max(0.0) as usize).min(height - 1);
        for r in r0..=r1 {
            for c in c0..=c1 {
                let (du, dv) = (T::lit(c as f64) - k.u, T::lit(r as f64) - k.v);
                let wgt = ((du * du + dv * dv) * inv).exp();
                let slot = &mut acc[r * width + c];
                slot.0[0] += wgt * vec[0];
                slot.0[1] += wgt * vec[1];
                slot.1 += wgt;
            }
        }
    }
    let field = acc
        .into_iter()
        .map(|(s, wgt)| if wgt > T::zero() { [s[0] / wgt, s[1] / wgt] } else { [T::zero(); 2] })
        .collect();
    Ok(DisparityMap { height, width, vectors, field })
}

/// [`stereo_disparity`] with the default 10° partner.
pub fn default_stereo_disparity<T: Scalar>(
    model: &TemplateModel,
    camera: &Camera<T>,
    v: &Viewpoint<T>,
    resolution: (usize, usize),
) -> Result<DisparityMap<T>> {
    let shift = ViewpointDelta::from_components(STEREO_SHIFT_DEG.map(T::lit))?;
    stereo_disparity(model, camera, v, &shift, resolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renderer::template::Keypoint;

    fn model() -> TemplateModel {
        let kp = |id, position| Keypoint { id, name: format!("k{id}"), position };
        TemplateModel::new(
            "m",
            vec![kp(0, [0.0, 0.8, 0.0]), kp(1, [0.8, 0.0, 0.0]), kp(2, [0.0, 0.0, 0.8]), kp(3, [-0.5, -0.5, -0.5])],
            vec![],
            BTreeMap::new(),
        )
        .unwrap()
    }

    #[test]
    fn zero_shift_gives_zero_displacement() {
        let m = model();
        let cam = Camera::fit(&m, (64, 64)).unwrap();
        let v = Viewpoint::new(25.0, -10.0, 5.0).unwrap();
        let d = stereo_disparity(&m, &cam, &v, &ViewpointDelta::zero(), (64, 64)).unwrap();
        assert!(!d.vectors().is_empty());
        assert!(d.vectors().values().all(|x| *x == [0.0, 0.0]));
        assert!(d.field().iter().all(|x| *x == [0.0, 0.0]));
    }

    #[test]
    fn on_axis_point_moves_less_than_off_axis_point() {
        // pure azimuth shift at zero elevation rotates about the image's vertical axis
        let m = model();
        let cam = Camera::fit(&m, (64, 64)).unwrap();
        let shift = ViewpointDelta::new(10.0, 0.0, 0.0).unwrap();
        let d = stereo_disparity(&m, &cam, &Viewpoint::zero(), &shift, (64, 64)).unwrap();
        let on_axis = d.vectors()[&0];
        let off_axis = d.vectors()[&1];
        let norm = |x: [f64; 2]| x[0].hypot(x[1]);
        assert!(norm(on_axis) < 1e-9);
        assert!(norm(off_axis) > 0.1);
        // oracle: x' = 0.8·cos 10°, so du = s·0.8·(cos 10° − 1)
        let s = cam.pixels_per_unit;
        assert!((off_axis[0] - s * 0.8 * (10f64.to_radians().cos() - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn reproducible_and_default_shift() {
        let m = model();
        let cam = Camera::fit(&m, (64, 64)).unwrap();
        let v = Viewpoint::new(40.0, 20.0, 0.0).unwrap();
        let a = default_stereo_disparity(&m, &cam, &v, (64, 64)).unwrap();
        assert_eq!(a, default_stereo_disparity(&m, &cam, &v, (64, 64)).unwrap());
        assert!(a.vectors().values().any(|x| x[0] != 0.0 || x[1] != 0.0));
        let k = a.vectors().keys().next().unwrap();
        let r: crate::renderer::Render<f64> = crate::renderer::render_with(&m, &cam, &v, (64, 64)).unwrap();
        let kp = r.keypoint(*k).unwrap();
        let cell = a.field()[kp.v.round() as usize * 64 + kp.u.round() as usize];
        assert!(cell[0] != 0.0 || cell[1] != 0.0);
    }
}
