use crate::error::Result;
use crate::sphere::{erp_to_sphere, rotate_about_axis, sphere_to_erp, ErpPoint, FrameGeometry, SpherePoint};

use super::{SeedTracker, Tracker, Trajectory, VideoFrames};

/// Analytic tracker for synthetic videos whose motion is known exactly.
///
/// It ignores pixel content and reports where a rigid motion of the sphere
/// carries each seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OracleTracker {
    Static,
    /// Columns shift right by `px_per_frame` each frame.
    Yaw { px_per_frame: f64 },
    /// Rotation of the sphere by `rad_per_frame` about `axis` per frame.
    Rotation { axis: [f64; 3], rad_per_frame: f64 },
}

impl OracleTracker {
    /// Pitch about the axis through `phi = +-pi/2` on the equator.
    pub fn pitch(rad_per_frame: f64) -> Self {
        OracleTracker::Rotation {
            axis: [0.0, 1.0, 0.0],
            rad_per_frame,
        }
    }

    pub fn position(&self, seed: ErpPoint, frame: usize, g: &FrameGeometry) -> ErpPoint {
        match *self {
            OracleTracker::Static => seed,
            OracleTracker::Yaw { px_per_frame } => {
                let w = g.width_f64();
                let mut x = (seed.x + px_per_frame * frame as f64).rem_euclid(w);
                if x >= w {
                    x = 0.0;
                }
                ErpPoint::new(x, seed.y)
            }
            OracleTracker::Rotation {
                axis,
                rad_per_frame,
            } => {
                let s = erp_to_sphere(seed, g).expect("seed validated by caller");
                let v = rotate_about_axis(s.to_unit_vector(), axis, rad_per_frame * frame as f64);
                sphere_to_erp(SpherePoint::from_vector(v), g)
            }
        }
    }
}

struct OracleSession {
    motion: OracleTracker,
    geometry: FrameGeometry,
}

impl SeedTracker for OracleSession {
    fn follow(&self, seed: ErpPoint) -> std::result::Result<Trajectory, String> {
        let l = self.geometry.frames() as usize;
        Ok(Trajectory::new(
            (0..l)
                .map(|i| self.motion.position(seed, i, &self.geometry))
                .collect(),
        ))
    }
}

impl Tracker for OracleTracker {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn prepare<'v>(&self, video: &'v VideoFrames) -> Result<Box<dyn SeedTracker + 'v>> {
        Ok(Box::new(OracleSession {
            motion: *self,
            geometry: *video.geometry(),
        }))
    }
}
