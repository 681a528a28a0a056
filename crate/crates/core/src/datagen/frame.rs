use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::renderer::{Render, TemplateModel};
use crate::scalar::Scalar;

pub const DEFAULT_SAMPLES_PER_EDGE: usize = 8;

/// Counts of sample points removed at each stage.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub omitted_edges: usize,
    pub visibility: usize,
    pub seat: usize,
    pub self_occlusion: usize,
    pub warnings: Vec<String>,
}

impl Provenance {
    pub fn removed(&self) -> usize {
        self.visibility + self.seat + self.self_occlusion
    }
}

/// Samples along one skeleton edge. Removed samples become `None` so that
/// indices stay aligned across frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline<T: Scalar> {
    pub endpoints: (u32, u32),
    pub samples: Vec<Option<[T; 2]>>,
}

impl<T: Scalar> Polyline<T> {
    pub fn surviving(&self) -> usize {
        self.samples.iter().filter(|s| s.is_some()).count()
    }
}

/// One polyline per skeleton edge, in the template's edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletalFrame<T: Scalar> {
    pub polylines: Vec<Polyline<T>>,
    pub samples_per_edge: usize,
    pub provenance: Provenance,
}

impl<T: Scalar> SkeletalFrame<T> {
    pub fn surviving(&self) -> usize {
        self.polylines.iter().map(Polyline::surviving).sum()
    }

    /// All surviving samples as `(edge, index, point)`.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize, [T; 2])> + '_ {
        self.polylines
            .iter()
            .enumerate()
            .flat_map(|(e, p)| p.samples.iter().enumerate().filter_map(move |(i, s)| s.map(|x| (e, i, x))))
    }

    /// Removes samples of `edge` selected by `drop`, returning how many were removed.
    pub(crate) fn remove_where(&mut self, edge: usize, mut drop: impl FnMut(usize, [T; 2]) -> bool) -> usize {
        let mut n = 0;
        for (i, s) in self.polylines[edge].samples.iter_mut().enumerate() {
            if let Some(p) = *s {
                if drop(i, p) {
                    *s = None;
                    n += 1;
                }
            }
        }
        n
    }
}

/// Samples every edge at `samples_per_edge` equally spaced points, endpoints
/// included. Edges with a missing endpoint are kept empty and counted.
pub fn skeletal_frame<T: Scalar>(
    keypoints_2d: &BTreeMap<u32, [T; 2]>,
    edges: &[(u32, u32)],
    samples_per_edge: usize,
) -> Result<SkeletalFrame<T>> {
    if samples_per_edge < 2 {
        return Err(Error::InvalidArgument(format!("samples_per_edge must be >= 2, got {samples_per_edge}")));
    }
    let mut provenance = Provenance::default();
    let last = T::lit((samples_per_edge - 1) as f64);
    let polylines = edges
        .iter()
        .map(|&(a, b)| {
            let samples = match (keypoints_2d.get(&a), keypoints_2d.get(&b)) {
                (Some(pa), Some(pb)) => (0..samples_per_edge)
                    .map(|i| {
                        let t = T::lit(i as f64) / last;
                        let s = T::one() - t;
                        Some([pa[0] * s + pb[0] * t, pa[1] * s + pb[1] * t])
                    })
                    .collect(),
                _ => {
                    provenance.omitted_edges += 1;
                    vec![None; samples_per_edge]
                }
            };
            Polyline { endpoints: (a, b), samples }
        })
        .collect();
    Ok(SkeletalFrame { polylines, samples_per_edge, provenance })
}

/// Frame built from every projected keypoint of a render, visible or not.
pub fn frame_from_render<T: Scalar>(
    render: &Render<T>,
    model: &TemplateModel,
    samples_per_edge: usize,
) -> Result<SkeletalFrame<T>> {
    let kps = render.keypoints().iter().map(|k| (k.id, [k.u, k.v])).collect();
    skeletal_frame(&kps, model.edges(), samples_per_edge)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_are_equally_spaced_and_inclusive() {
        let kps = BTreeMap::from([(0, [0.0, 0.0]), (1, [10.0, 0.0])]);
        let f = skeletal_frame(&kps, &[(0, 1)], 3).unwrap();
        assert_eq!(f.polylines[0].samples, vec![Some([0.0, 0.0]), Some([5.0, 0.0]), Some([10.0, 0.0])]);
        let f = skeletal_frame(&kps, &[(0, 1)], 2).unwrap();
        assert_eq!(f.polylines[0].samples, vec![Some([0.0, 0.0]), Some([10.0, 0.0])]);
        assert!(skeletal_frame(&kps, &[(0, 1)], 1).is_err());
    }

    #[test]
    fn counts_and_missing_edges() {
        let kps = BTreeMap::from([(0, [0.0, 0.0]), (1, [10.0, 0.0]), (2, [3.0, 4.0])]);
        let f = skeletal_frame(&kps, &[(0, 1), (1, 2), (2, 0)], 8).unwrap();
        assert_eq!(f.surviving(), 24);
        let f = skeletal_frame(&kps, &[(0, 1), (1, 7)], 8).unwrap();
        assert_eq!(f.surviving(), 8);
        assert_eq!(f.polylines.len(), 2);
        assert_eq!(f.provenance.omitted_edges, 1);
    }
}
