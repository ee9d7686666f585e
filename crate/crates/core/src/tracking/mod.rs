//! Point trajectories and the trackers that produce them.

mod block;
pub(crate) mod format;
mod oracle;
mod video;

pub use block::{BlockMatchConfig, BlockMatchTracker};
pub use format::{load_trajectories, save_trajectories, Metadata, TRAJECTORY_FORMAT};
pub use oracle::OracleTracker;
pub use video::{load_video_dir, save_video_dir, Plane, VideoFrames};

use crate::error::{Error, Result};
use crate::par;
use crate::sphere::{ErpPoint, FrameGeometry};

/// Positions of one tracked point, one per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub points: Vec<ErpPoint>,
    pub visible: Vec<bool>,
}

impl Trajectory {
    pub fn new(points: Vec<ErpPoint>) -> Self {
        let visible = vec![true; points.len()];
        Self { points, visible }
    }

    pub fn with_visibility(points: Vec<ErpPoint>, visible: Vec<bool>) -> Result<Self> {
        if points.len() != visible.len() {
            return Err(Error::Shape(format!(
                "{} points but {} visibility flags",
                points.len(),
                visible.len()
            )));
        }
        Ok(Self { points, visible })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> ErpPoint {
        self.points[0]
    }

    pub fn last(&self) -> ErpPoint {
        self.points[self.points.len() - 1]
    }

    pub fn all_visible(&self) -> bool {
        self.visible.iter().all(|&v| v)
    }
}

/// Trajectories sharing one frame geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySet {
    geometry: FrameGeometry,
    trajectories: Vec<Trajectory>,
    pub meta: Option<Metadata>,
}

impl TrajectorySet {
    pub fn new(geometry: FrameGeometry, trajectories: Vec<Trajectory>) -> Result<Self> {
        let l = geometry.frames() as usize;
        for (j, t) in trajectories.iter().enumerate() {
            if t.len() != l || t.visible.len() != l {
                return Err(Error::Shape(format!(
                    "trajectory {j} has {} points, expected L = {l}",
                    t.len()
                )));
            }
            for (i, (p, &vis)) in t.points.iter().zip(&t.visible).enumerate() {
                if vis && !p.in_bounds(&geometry) {
                    return Err(Error::domain(format!(
                        "trajectory {j} frame {i}: ({}, {}) outside {}x{}",
                        p.x,
                        p.y,
                        geometry.width(),
                        geometry.height()
                    )));
                }
            }
        }
        Ok(Self {
            geometry,
            trajectories,
            meta: None,
        })
    }

    pub fn empty(geometry: FrameGeometry) -> Self {
        Self {
            geometry,
            trajectories: Vec::new(),
            meta: None,
        }
    }

    pub fn with_meta(mut self, meta: Metadata) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn geometry(&self) -> &FrameGeometry {
        &self.geometry
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn into_trajectories(self) -> Vec<Trajectory> {
        self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// Keeps the members at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            geometry: self.geometry,
            trajectories: indices.iter().map(|&i| self.trajectories[i].clone()).collect(),
            meta: self.meta.clone(),
        }
    }

    /// Shifts every position right by `columns`, wrapping at the seam.
    pub fn rotate_columns(&self, columns: f64) -> Self {
        let w = self.geometry.width_f64();
        let trajectories = self
            .trajectories
            .iter()
            .map(|t| Trajectory {
                points: t
                    .points
                    .iter()
                    .map(|p| {
                        let mut x = (p.x + columns).rem_euclid(w);
                        if x >= w {
                            x = 0.0;
                        }
                        ErpPoint::new(x, p.y)
                    })
                    .collect(),
                visible: t.visible.clone(),
            })
            .collect();
        Self {
            geometry: self.geometry,
            trajectories,
            meta: self.meta.clone(),
        }
    }
}

/// A point tracker bound to one video.
pub trait SeedTracker: Sync {
    /// Follows `seed` through every frame. The returned trajectory must have
    /// one entry per frame.
    fn follow(&self, seed: ErpPoint) -> std::result::Result<Trajectory, String>;
}

/// Factory for [`SeedTracker`]s; `prepare` holds per-video work such as
/// image pyramids so it is shared across seeds.
pub trait Tracker: Sync {
    fn name(&self) -> &'static str;

    fn prepare<'v>(&self, video: &'v VideoFrames) -> Result<Box<dyn SeedTracker + 'v>>;
}

/// Tracks every seed through `video`. Seeds are processed in parallel; each
/// output trajectory starts exactly at its seed.
pub fn track(video: &VideoFrames, seeds: &[ErpPoint], tracker: &dyn Tracker) -> Result<TrajectorySet> {
    let g = *video.geometry();
    g.require_motion()?;
    let session = tracker.prepare(video)?;
    let l = g.frames() as usize;

    let trajectories = par::try_map_range(seeds.len(), |j| {
        let seed = seeds[j];
        if !seed.in_bounds(&g) {
            return Err(Error::Tracking {
                seed_index: j,
                reason: format!("seed ({}, {}) outside the frame", seed.x, seed.y),
            });
        }
        let mut t = session.follow(seed).map_err(|reason| Error::Tracking {
            seed_index: j,
            reason,
        })?;
        if t.len() != l || t.visible.len() != l {
            return Err(Error::Tracking {
                seed_index: j,
                reason: format!("{} returned {} frames, expected {l}", tracker.name(), t.len()),
            });
        }
        t.points[0] = seed;
        t.visible[0] = true;
        Ok(t)
    })?;
    TrajectorySet::new(g, trajectories)
}
