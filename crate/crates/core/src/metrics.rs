//! Spherical trajectory metrics.

use serde::Serialize;

use crate::error::{Error, Mismatch, Result};
use crate::par;
use crate::sme::trajectory_distances;
use crate::sphere::{erp_to_sphere, spherical_distance};
use crate::tracking::TrajectorySet;

/// Great-circle error between two trajectory sets, in radians.
///
/// Only frames where both points are visible count. `mean_distance` pools
/// every counted (trajectory, frame) pair. A trajectory or frame with no
/// counted pairs reports `NaN`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObjMCReport {
    pub mean_distance: f64,
    pub per_trajectory: Vec<f64>,
    pub per_frame: Vec<f64>,
}

pub fn objmc(generated: &TrajectorySet, reference: &TrajectorySet) -> Result<ObjMCReport> {
    let (ga, gb) = (generated.geometry(), reference.geometry());
    if (ga.width(), ga.height()) != (gb.width(), gb.height()) {
        return Err(Error::Mismatch(Mismatch::Geometry {
            generated: (ga.width(), ga.height()),
            reference: (gb.width(), gb.height()),
        }));
    }
    if ga.frames() != gb.frames() {
        return Err(Error::Mismatch(Mismatch::Length {
            generated: ga.frames() as usize,
            reference: gb.frames() as usize,
        }));
    }
    if generated.len() != reference.len() {
        return Err(Error::Mismatch(Mismatch::Count {
            generated: generated.len(),
            reference: reference.len(),
        }));
    }
    let g = *ga;
    let l = g.frames() as usize;

    // NaN marks a frame where either point is hidden
    let rows: Vec<Vec<f64>> = par::try_map_range(generated.len(), |j| {
        let (a, b) = (&generated.trajectories()[j], &reference.trajectories()[j]);
        (0..l)
            .map(|i| {
                if !(a.visible[i] && b.visible[i]) {
                    return Ok(f64::NAN);
                }
                let pa = erp_to_sphere(a.points[i], &g)?;
                let pb = erp_to_sphere(b.points[i], &g)?;
                Ok(spherical_distance(pa, pb))
            })
            .collect::<Result<Vec<f64>>>()
    })?;

    let mean_of = |vals: &mut dyn Iterator<Item = f64>| {
        let (sum, n) = vals.filter(|v| !v.is_nan()).fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        if n == 0 {
            f64::NAN
        } else {
            sum / n as f64
        }
    };
    let per_trajectory = rows.iter().map(|r| mean_of(&mut r.iter().copied())).collect();
    let per_frame = (0..l).map(|i| mean_of(&mut rows.iter().map(|r| r[i]))).collect();
    let mean_distance = mean_of(&mut rows.iter().flatten().copied());
    Ok(ObjMCReport {
        mean_distance,
        per_trajectory,
        per_frame,
    })
}

/// Mean first-to-last great-circle distance over a set.
pub fn clip_motion_score(set: &TrajectorySet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::NoTrajectories("clip has no trajectories to score".into()));
    }
    let d = trajectory_distances(set);
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// Indices surviving removal of the `floor(q * n)` lowest scores, in their
/// original order. Among equal scores the lower index is dropped first.
pub fn quantile_filter(scores: &[f64], q: f64) -> Result<Vec<usize>> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::domain(format!("quantile must lie in [0, 1), got {q}")));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::domain(format!("score {i} is NaN")));
    }
    let drop = (q * scores.len() as f64).floor() as usize;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut keep = vec![true; scores.len()];
    for &i in &order[..drop] {
        keep[i] = false;
    }
    Ok((0..scores.len()).filter(|&i| keep[i]).collect())
}
