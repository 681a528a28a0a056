use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use viewalign::datagen::{
    frame_from_render, generate_correspondences, pose_quadrant, prune_all, prune_seat, prune_self_occluded_legs,
    prune_visibility, GenerationConfig, PruningConfig, Quadrant, SkeletalFrame,
};
use viewalign::renderer::{render_with, Camera, Keypoint, TemplateModel};
use viewalign::viewpoint::Viewpoint;

const CHAIR: &str = include_str!("../../../templates/chair.json");
const CHAIR_PRUNING: &str = include_str!("../../../templates/chair.pruning.json");
const RES: (usize, usize) = (64, 64);

fn chair() -> TemplateModel {
    TemplateModel::from_json_str(CHAIR).unwrap()
}

fn chair_pruning() -> PruningConfig {
    let cfg: PruningConfig = serde_json::from_str(CHAIR_PRUNING).unwrap();
    cfg.validate().unwrap();
    cfg
}

fn view(az: f64, el: f64) -> Viewpoint<f64> {
    Viewpoint::new(az, el, 0.0).unwrap()
}

fn empty_edges(f: &SkeletalFrame<f64>) -> BTreeSet<usize> {
    f.polylines.iter().enumerate().filter(|(_, p)| p.surviving() == 0).map(|(e, _)| e).collect()
}

/// Keypoint 1 sits behind keypoint 2 and keypoint 4 behind keypoint 5.
fn occluded_model() -> TemplateModel {
    let kp = |id, position| Keypoint { id, name: format!("k{id}"), position };
    TemplateModel::new(
        "occluded",
        vec![
            kp(0, [-1.0, 0.5, 0.0]),
            kp(1, [1.0, 0.0, 0.0]),
            kp(2, [1.0, 0.0, 0.5]),
            kp(3, [-1.0, -1.0, 0.0]),
            kp(4, [0.0, -1.0, -0.5]),
            kp(5, [0.0, -1.0, 0.5]),
        ],
        vec![(0, 1), (1, 4), (1, 3), (0, 3)],
        BTreeMap::new(),
    )
    .unwrap()
}

#[test]
fn mixed_visibility_edge_keeps_half_near_visible_end() {
    let model = occluded_model();
    let r = render_with(&model, &Camera::new(10.0, 3.0).unwrap(), &Viewpoint::zero(), (33, 33)).unwrap();
    let hidden: Vec<u32> = r.keypoints().iter().filter(|k| !k.visible).map(|k| k.id).collect();
    assert_eq!(hidden, vec![1, 4]);

    let f = frame_from_render(&r, &model, 8).unwrap();
    let p = prune_visibility(&f, &r, 0.5);
    let kept = |e: usize| -> Vec<usize> {
        p.polylines[e].samples.iter().enumerate().filter(|(_, s)| s.is_some()).map(|(i, _)| i).collect()
    };
    // (0, 1): visible start
    assert_eq!(kept(0), vec![0, 1, 2, 3]);
    // (1, 4): both hidden
    assert!(kept(1).is_empty());
    // (1, 3): visible end
    assert_eq!(kept(2), vec![4, 5, 6, 7]);
    assert_eq!(kept(3), (0..8).collect::<Vec<_>>());
    assert_eq!(p.provenance.visibility, 4 + 8 + 4);
    assert_eq!(p.surviving() + p.provenance.visibility, f.surviving());
}

#[test]
fn fully_visible_render_is_untouched_by_visibility_pruning() {
    let model = chair();
    let camera = Camera::fit(&model, RES).unwrap();
    let r = render_with(&model, &camera, &view(30.0, 25.0), RES).unwrap();
    assert!(r.keypoints().iter().all(|k| k.visible));
    let f = frame_from_render(&r, &model, 8).unwrap();
    assert_eq!(prune_visibility(&f, &r, 0.5), f);
}

/// Quadrant of the seat's back-to-front direction, read off the rotation
/// matrix instead of the rendered keypoints.
fn expected_quadrant(v: &Viewpoint<f64>) -> Quadrant {
    let c = v.to_rotation().apply([0.0, 0.0, 1.0]);
    let deg = c[1].atan2(c[0]).to_degrees();
    match (deg + 45.0).rem_euclid(360.0) {
        x if x < 90.0 => Quadrant::Right,
        x if x < 180.0 => Quadrant::Up,
        x if x < 270.0 => Quadrant::Left,
        _ => Quadrant::Down,
    }
}

#[test]
fn self_occluded_legs_change_only_at_quadrant_boundaries() {
    let model = chair();
    let cfg = chair_pruning();
    let camera = Camera::fit(&model, RES).unwrap();
    let mut quadrants = Vec::new();
    let mut pruned = Vec::new();
    for step in 0..720 {
        let v = view(-180.0 + 0.5 * step as f64 + 0.25, 20.0);
        let r = render_with(&model, &camera, &v, RES).unwrap();
        let q = pose_quadrant(&r, &cfg.seat_back, &cfg.seat_front).unwrap();
        assert_eq!(q, expected_quadrant(&v), "at {v:?}");
        let f = frame_from_render(&r, &model, 8).unwrap();
        let legs = empty_edges(&prune_self_occluded_legs(&f, Some(q), &cfg.occluded_legs));
        assert_eq!(legs, cfg.occluded_legs[&q].iter().copied().collect::<BTreeSet<_>>());
        quadrants.push(q);
        pruned.push(legs);
    }
    let seen: BTreeSet<_> = quadrants.iter().copied().collect();
    assert_eq!(seen.len(), 4);
    for i in 1..quadrants.len() {
        assert_eq!(quadrants[i] != quadrants[i - 1], pruned[i] != pruned[i - 1], "step {i}");
    }
}

#[test]
fn occluded_legs_are_the_farthest_at_axis_views() {
    let model = chair();
    let cfg = chair_pruning();
    let camera = Camera::fit(&model, RES).unwrap();
    for az in [0.0, 90.0, 180.0, -90.0] {
        for el in [5.0, 20.0, 40.0] {
            let r = render_with(&model, &camera, &view(az, el), RES).unwrap();
            let q = pose_quadrant(&r, &cfg.seat_back, &cfg.seat_front).unwrap();
            let mut legs: Vec<(f64, usize)> = cfg
                .leg_edges
                .iter()
                .map(|&e| {
                    let (a, b) = model.edges()[e];
                    (r.keypoint(a).unwrap().depth + r.keypoint(b).unwrap().depth, e)
                })
                .collect();
            legs.sort_by(|x, y| y.0.total_cmp(&x.0));
            let farthest: BTreeSet<usize> = legs[..2].iter().map(|l| l.1).collect();
            assert_eq!(farthest, cfg.occluded_legs[&q].iter().copied().collect(), "az {az} el {el} quadrant {q:?}");
        }
    }
}

fn is_subset(after: &SkeletalFrame<f64>, before: &SkeletalFrame<f64>) -> bool {
    after.polylines.iter().zip(&before.polylines).all(|(a, b)| {
        a.samples.iter().zip(&b.samples).all(|(x, y)| x.is_none() || x == y)
    })
}

#[test]
fn pruning_rules_commute_and_never_add_points() {
    let model = chair();
    let cfg = chair_pruning();
    let camera = Camera::fit(&model, RES).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let v = view(rng.random_range(-180.0..180.0), rng.random_range(-30.0..60.0));
        let r = render_with(&model, &camera, &v, RES).unwrap();
        let f = frame_from_render(&r, &model, 8).unwrap();
        let polygon: Vec<[f64; 2]> =
            cfg.seat_polygon.iter().map(|id| r.keypoint(*id).map(|k| [k.u, k.v]).unwrap()).collect();
        let q = pose_quadrant(&r, &cfg.seat_back, &cfg.seat_front);

        let seat_first = prune_self_occluded_legs(&prune_seat(&f, &polygon, &cfg.leg_edges), q, &cfg.occluded_legs);
        let legs_first = prune_seat(&prune_self_occluded_legs(&f, q, &cfg.occluded_legs), &polygon, &cfg.leg_edges);
        assert_eq!(seat_first.polylines, legs_first.polylines);

        let all = prune_all(&f, &r, &cfg);
        assert!(is_subset(&seat_first, &f));
        assert!(is_subset(&all, &f));
        assert!(is_subset(&all, &prune_visibility(&f, &r, cfg.mixed_keep_fraction)));
        assert_eq!(all.surviving() + all.provenance.removed(), f.surviving());
    }
}

fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t]
}

#[test]
fn positives_reproject_from_one_skeleton_point() {
    let model = chair();
    let config = GenerationConfig { pruning: chair_pruning(), ..Default::default() };
    let camera = Camera::fit(&model, config.resolution).unwrap();
    let pos = |id: u32| model.keypoints()[model.index_of(id).unwrap()].position;
    let n = config.samples_per_edge;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut checked = 0;
    for trial in 0..20 {
        let va = view(rng.random_range(-180.0..180.0), rng.random_range(0.0..40.0));
        let vb = view(rng.random_range(-180.0..180.0), rng.random_range(0.0..40.0));
        let set = generate_correspondences(&model, &va, &vb, &config, trial).unwrap();
        let (ra, rb) = (va.to_rotation(), vb.to_rotation());
        let skeleton: Vec<([f64; 2], [f64; 2])> = model
            .edges()
            .iter()
            .flat_map(|&(a, b)| (0..n).map(move |i| lerp3(pos(a), pos(b), i as f64 / (n - 1) as f64)))
            .map(|p| {
                let (ua, wa, _) = camera.project(&ra, p, config.resolution);
                let (ub, wb, _) = camera.project(&rb, p, config.resolution);
                ([ua, wa], [ub, wb])
            })
            .collect();
        let close = |x: [f64; 2], y: [f64; 2]| (x[0] - y[0]).hypot(x[1] - y[1]) <= 0.5;
        for p in set.pairs.iter().filter(|p| p.similar) {
            assert!(skeleton.iter().any(|(a, b)| close(p.xa, *a) && close(p.xb, *b)), "pair {p:?}");
            checked += 1;
        }
        assert_eq!(set.pairs.len(), set.positives * (1 + config.negatives_per_positive));
        assert_eq!(set.negatives, set.positives * config.negatives_per_positive);
    }
    assert!(checked > 500);
}

#[test]
fn generation_is_reproducible_per_seed() {
    let model = chair();
    let config = GenerationConfig { pruning: chair_pruning(), negatives_per_positive: 3, ..Default::default() };
    let (va, vb) = (view(10.0, 20.0), view(40.0, 15.0));
    let a = generate_correspondences(&model, &va, &vb, &config, 77).unwrap();
    let b = generate_correspondences(&model, &va, &vb, &config, 77).unwrap();
    let c = generate_correspondences(&model, &va, &vb, &config, 78).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.pairs, c.pairs);
    assert_eq!(a.positives, c.positives);
}

#[test]
fn pruning_file_loads_from_disk() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../templates/chair.pruning.json");
    assert_eq!(PruningConfig::load(path).unwrap(), chair_pruning());
}
