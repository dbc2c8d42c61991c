//! Descriptor matching.

use rayon::prelude::*;

use super::{Homography, SiftDescriptor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Match {
    pub i1: usize,
    pub i2: usize,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchSet {
    pub pairs: Vec<Match>,
    pub n1: usize,
    pub n2: usize,
}

/// `(best index, best distance, second best distance)` from `q` into `set`.
fn nearest_two(q: &SiftDescriptor, set: &[SiftDescriptor]) -> Option<(usize, f64, f64)> {
    let mut best = (usize::MAX, f64::INFINITY);
    let mut second = f64::INFINITY;
    for (j, d) in set.iter().enumerate() {
        let dist = q.distance(d);
        if dist < best.1 {
            second = best.1;
            best = (j, dist);
        } else if dist < second {
            second = dist;
        }
    }
    (best.0 != usize::MAX).then_some((best.0, best.1, second))
}

/// Mutual nearest neighbours that also pass the ratio test
/// `d1 < ratio · d2` in both directions. With a single candidate on the
/// other side the ratio test is skipped. Pairs come out sorted by `i1`.
pub fn match_descriptors(a: &[SiftDescriptor], b: &[SiftDescriptor], ratio: f64) -> MatchSet {
    let passes = |d1: f64, d2: f64| d2.is_infinite() || d1 < ratio * d2 || d1 == 0.0;
    let fwd: Vec<Option<(usize, f64, f64)>> = a.par_iter().map(|q| nearest_two(q, b)).collect();
    let bwd: Vec<Option<(usize, f64, f64)>> = b.par_iter().map(|q| nearest_two(q, a)).collect();
    let pairs = fwd
        .iter()
        .enumerate()
        .filter_map(|(i, f)| {
            let (j, d1, d2) = (*f)?;
            let (back, e1, e2) = bwd[j]?;
            (back == i && passes(d1, d2) && passes(e1, e2)).then_some(Match {
                i1: i,
                i2: j,
                distance: d1,
            })
        })
        .collect();
    MatchSet {
        pairs,
        n1: a.len(),
        n2: b.len(),
    }
}

/// Keeps matches whose image-1 keypoint lands within `t` pixels of its
/// partner under `h`.
pub fn verify_matches(
    set: &MatchSet,
    a: &[SiftDescriptor],
    b: &[SiftDescriptor],
    h: &Homography,
    t: f64,
) -> Vec<Match> {
    set.pairs
        .iter()
        .filter(|m| {
            let (k1, k2) = (&a[m.i1].keypoint, &b[m.i2].keypoint);
            let (x, y) = h.project(k1.x, k1.y);
            (x - k2.x).hypot(y - k2.y) <= t
        })
        .copied()
        .collect()
}
