use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::frame::{Provenance, SkeletalFrame};
use crate::correspondence::CorrespondencePair;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_NEGATIVES_PER_POSITIVE: usize = 1;
const MAX_NEGATIVE_DRAWS: usize = 64;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrespondenceSet {
    pub pairs: Vec<CorrespondencePair>,
    pub positives: usize,
    pub negatives: usize,
    pub provenance_a: Provenance,
    pub provenance_b: Provenance,
    /// Set when no positive pair could be formed.
    pub diagnostic: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    xa_u: f64,
    xa_v: f64,
    xb_u: f64,
    xb_v: f64,
    s: u8,
}

/// Pairs surviving samples of two frames built from the same edge order.
///
/// Positives link equal `(edge, index)` samples present in both frames. Each
/// positive is followed by `negatives_per_positive` pairs drawn uniformly
/// from surviving samples whose `(edge, index)` differ.
pub fn pair_frames<T: Scalar>(
    fa: &SkeletalFrame<T>,
    fb: &SkeletalFrame<T>,
    negatives_per_positive: usize,
    seed: u64,
) -> Result<CorrespondenceSet> {
    if fa.polylines.len() != fb.polylines.len() || fa.samples_per_edge != fb.samples_per_edge {
        return Err(Error::ShapeMismatch("frames were built from different edge layouts".into()));
    }
    let pt = |p: [T; 2]| [p[0].as_f64(), p[1].as_f64()];
    let mut set = CorrespondenceSet {
        provenance_a: fa.provenance.clone(),
        provenance_b: fb.provenance.clone(),
        ..Default::default()
    };
    let pool_a: Vec<_> = fa.points().collect();
    let pool_b: Vec<_> = fb.points().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for (la, lb) in fa.polylines.iter().zip(&fb.polylines) {
        for (sa, sb) in la.samples.iter().zip(&lb.samples) {
            let (Some(xa), Some(xb)) = (sa, sb) else { continue };
            set.pairs.push(CorrespondencePair { xa: pt(*xa), xb: pt(*xb), similar: true });
            set.positives += 1;
            for _ in 0..negatives_per_positive {
                for _ in 0..MAX_NEGATIVE_DRAWS {
                    let a = pool_a[rng.random_range(0..pool_a.len())];
                    let b = pool_b[rng.random_range(0..pool_b.len())];
                    if (a.0, a.1) != (b.0, b.1) {
                        set.pairs.push(CorrespondencePair { xa: pt(a.2), xb: pt(b.2), similar: false });
                        set.negatives += 1;
                        break;
                    }
                }
            }
        }
    }
    if set.positives == 0 {
        set.diagnostic = Some(format!(
            "no common surviving samples ({} in frame a, {} in frame b)",
            pool_a.len(),
            pool_b.len()
        ));
    }
    Ok(set)
}

/// Writes pairs as CSV with columns `xa_u,xa_v,xb_u,xb_v,s`.
pub fn write_pairs_csv<W: Write>(pairs: &[CorrespondencePair], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in pairs {
        w.serialize(CsvRow { xa_u: p.xa[0], xa_v: p.xa[1], xb_u: p.xb[0], xb_v: p.xb[1], s: u8::from(p.similar) })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_pairs_csv<R: Read>(input: R) -> Result<Vec<CorrespondencePair>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize::<CsvRow>()
        .map(|row| {
            let row = row?;
            if row.s > 1 {
                return Err(Error::Format { path: "<pairs>".into(), reason: format!("polarity {} is not 0 or 1", row.s) });
            }
            Ok(CorrespondencePair { xa: [row.xa_u, row.xa_v], xb: [row.xb_u, row.xb_v], similar: row.s == 1 })
        })
        .collect()
}
