//! Dynamic time warping over gesture trajectory profiles.
//!
//! Serves as an independent, training-free classification route: a query
//! profile is matched to the nearest labeled template under the DTW
//! distance with Euclidean point cost.

use crate::augment::TrajectoryProfile;
use crate::error::{Error, Result};
use crate::synth::GestureKind;

fn point_cost(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Unconstrained DTW distance between two point sequences.
pub fn dtw_distance(a: &[(f64, f64)], b: &[(f64, f64)]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Validation("dtw inputs must be nonempty".into()));
    }
    // Rolling single row: prev[j] = D(i-1, j), cur[j] = D(i, j).
    let m = b.len();
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    prev[0] = point_cost(a[0], b[0]);
    for j in 1..m {
        prev[j] = prev[j - 1] + point_cost(a[0], b[j]);
    }
    for i in 1..a.len() {
        cur[0] = prev[0] + point_cost(a[i], b[0]);
        for j in 1..m {
            let best = prev[j].min(prev[j - 1]).min(cur[j - 1]);
            cur[j] = best + point_cost(a[i], b[j]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

/// Distance between two trajectory profiles.
pub fn profile_distance(a: &TrajectoryProfile, b: &TrajectoryProfile) -> Result<f64> {
    dtw_distance(&a.points, &b.points)
}

/// A labeled reference trajectory.
#[derive(Debug, Clone)]
pub struct DtwTemplate {
    pub profile: TrajectoryProfile,
    pub label: GestureKind,
}

/// Nearest-neighbor classification; ties resolve to the earliest template.
/// Returns the winning label, template index, and distance.
pub fn dtw_nearest_neighbor(
    query: &TrajectoryProfile,
    templates: &[DtwTemplate],
) -> Result<(GestureKind, usize, f64)> {
    if templates.is_empty() {
        return Err(Error::Validation("dtw template set is empty".into()));
    }
    let mut best: Option<(usize, f64)> = None;
    for (idx, t) in templates.iter().enumerate() {
        let d = profile_distance(query, &t.profile)?;
        match best {
            Some((_, bd)) if d >= bd => {}
            _ => best = Some((idx, d)),
        }
    }
    let (idx, d) = best.unwrap();
    Ok((templates[idx].label, idx, d))
}
