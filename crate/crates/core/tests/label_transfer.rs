mod common;

use common::{label_transfer, template, Route, TransferScore, TWO_PART};
use viewalign::viewpoint::Viewpoint;

fn pair(az: f64, el: f64) -> (Viewpoint<f64>, Viewpoint<f64>) {
    (Viewpoint::new(az, el, 0.0).unwrap(), Viewpoint::new(az + 20.0, el, 0.0).unwrap())
}

#[test]
fn twenty_degree_gap_transfers_every_matched_label() {
    let model = template(TWO_PART);
    let mut total = TransferScore::default();
    for az in (-180..180).step_by(20) {
        for el in [0.0, 10.0, 20.0, 30.0] {
            let (source, target) = pair(az as f64, el);
            let score = label_transfer(&model, &source, &target, (64, 64), Route::Columns);
            assert!(score.matched > 0, "no matched cells at az {az} el {el}");
            assert_eq!(score.correct, score.matched, "az {az} el {el}");
            total.add(score);
        }
    }
    assert!(total.matched > 10_000);
}

#[test]
fn column_route_agrees_with_full_tensor() {
    let model = template(TWO_PART);
    for (az, el) in [(-150.0, 30.0), (0.0, 10.0), (75.0, 20.0)] {
        let (source, target) = pair(az, el);
        assert_eq!(
            label_transfer(&model, &source, &target, (64, 64), Route::Tensor),
            label_transfer(&model, &source, &target, (64, 64), Route::Columns)
        );
    }
}

#[test]
fn reversed_gap_also_transfers_cleanly() {
    let model = template(TWO_PART);
    for az in (-180..180).step_by(45) {
        let (target, source) = pair(az as f64, 15.0);
        let score = label_transfer(&model, &source, &target, (64, 64), Route::Columns);
        assert_eq!(score.correct, score.matched);
    }
}
