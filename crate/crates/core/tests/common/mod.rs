//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::collections::BTreeMap;

use viewalign::correspondence::{argmax_positive, best_matches, correlate, correlate_column, transfer_labels};
use viewalign::renderer::{descriptor_map, part_label_map, render_with, Camera, DescriptorConfig, NoiseSpec, TemplateModel};
use viewalign::viewpoint::Viewpoint;
use viewalign::Cell;

pub const CHAIR: &str = include_str!("../../../../templates/chair.json");
pub const TWO_PART: &str = include_str!("../../../../templates/two_part.json");

pub fn template(text: &str) -> TemplateModel {
    TemplateModel::from_json_str(text).unwrap()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TransferScore {
    pub matched: usize,
    pub correct: usize,
}

impl TransferScore {
    pub fn add(&mut self, other: TransferScore) {
        self.matched += other.matched;
        self.correct += other.correct;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    /// Full correlation tensor, alpha masking and `best_matches`.
    Tensor,
    /// One correlation column per silhouette cell of the target.
    Columns,
}

/// Transfers part labels from a render at `source` onto a render at `target`
/// by correlation argmax over the target's silhouette, and scores the result
/// against the labels the target render carries itself.
pub fn label_transfer(
    model: &TemplateModel,
    source: &Viewpoint<f64>,
    target: &Viewpoint<f64>,
    resolution: (usize, usize),
    route: Route,
) -> TransferScore {
    let camera = Camera::fit(model, resolution).unwrap();
    let config = DescriptorConfig::default();
    let rs = render_with(model, &camera, source, resolution).unwrap();
    let rt = render_with(model, &camera, target, resolution).unwrap();
    let fa = descriptor_map(&rs, model, &config, &NoiseSpec::NONE, 0).unwrap();
    let fb = descriptor_map(&rt, model, &config, &NoiseSpec::NONE, 0).unwrap();
    let matches: BTreeMap<Cell, Cell> = match route {
        Route::Tensor => best_matches(&correlate(&fa, &fb).unwrap().apply_alpha(rt.alpha()).unwrap()),
        Route::Columns => {
            let (h, w) = resolution;
            (0..h)
                .flat_map(|r| (0..w).map(move |c| (r, c)))
                .filter(|&cell| rt.alpha().get(cell))
                .filter_map(|cell| {
                    let column = correlate_column(&fa, &fb, cell).unwrap();
                    argmax_positive(&column).map(|s| (cell, (s / w, s % w)))
                })
                .collect()
        }
    };
    score_transfer(&transfer_labels(&matches, &part_label_map(&rs, model, &config)), &part_label_map(&rt, model, &config))
}

fn score_transfer(transferred: &BTreeMap<Cell, u32>, truth: &BTreeMap<Cell, u32>) -> TransferScore {
    let mut score = TransferScore::default();
    for (cell, label) in transferred {
        if let Some(expected) = truth.get(cell) {
            score.matched += 1;
            score.correct += usize::from(label == expected);
        }
    }
    score
}
