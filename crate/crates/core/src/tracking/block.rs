use crate::error::{Error, Result};
use crate::sphere::{ErpPoint, FrameGeometry};

use super::{Plane, SeedTracker, Tracker, Trajectory, VideoFrames};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockMatchConfig {
    /// Side of the square template, in pixels at every level.
    pub patch: usize,
    /// Search radius in pixels at every level.
    pub search: usize,
    pub levels: usize,
    /// Mean absolute gray-level difference up to which the frame-0 patch is
    /// trusted for sub-pixel refinement.
    pub anchor_tolerance: f32,
}

impl Default for BlockMatchConfig {
    fn default() -> Self {
        Self {
            patch: 16,
            search: 8,
            levels: 3,
            anchor_tolerance: 6.0,
        }
    }
}

/// Coarse-to-fine SAD block matcher, frame to frame.
///
/// Columns wrap at the ERP seam and rows clamp at the poles. A point whose
/// match leaves the valid row range is marked invisible and frozen.
#[derive(Clone, Copy, Debug, Default)]
pub struct BlockMatchTracker {
    pub config: BlockMatchConfig,
}

impl BlockMatchTracker {
    pub fn new(config: BlockMatchConfig) -> Self {
        Self { config }
    }
}

impl Tracker for BlockMatchTracker {
    fn name(&self) -> &'static str {
        "block"
    }

    fn prepare<'v>(&self, video: &'v VideoFrames) -> Result<Box<dyn SeedTracker + 'v>> {
        let c = self.config;
        if c.patch == 0 || c.levels == 0 {
            return Err(Error::domain("block matcher needs patch >= 1 and levels >= 1"));
        }
        let pyramids = crate::par::map_slice(video.frames(), |f| {
            let mut levels = vec![f.clone()];
            for _ in 1..c.levels {
                let next = levels.last().unwrap().downsample();
                levels.push(next);
            }
            levels
        });
        let r = c.search as i64;
        let mut offsets: Vec<(i64, i64)> = (-r..=r).flat_map(|oy| (-r..=r).map(move |ox| (ox, oy))).collect();
        // ties resolve toward the smallest displacement
        offsets.sort_by_key(|&(ox, oy)| (ox * ox + oy * oy, oy, ox));
        Ok(Box::new(BlockSession {
            config: c,
            geometry: *video.geometry(),
            pyramids,
            offsets,
        }))
    }
}

struct BlockSession {
    config: BlockMatchConfig,
    geometry: FrameGeometry,
    pyramids: Vec<Vec<Plane>>,
    offsets: Vec<(i64, i64)>,
}

impl BlockSession {
    /// Whole-pixel displacement of `pos` from frame `prev` to `prev + 1`.
    fn step(&self, prev: usize, pos: ErpPoint) -> (i64, i64) {
        let p = self.config.patch;
        let r = self.config.search;
        let side = p + 2 * r;
        let half = (p as f64 - 1.0) / 2.0;
        let mut template = vec![0f32; p * p];
        let mut region = vec![0f32; side * side];

        let mut d = (0i64, 0i64);
        for level in (0..self.config.levels).rev() {
            if level + 1 < self.config.levels {
                d = (2 * d.0, 2 * d.1);
            }
            let scale = (1u64 << level) as f64;
            let lx = (pos.x - (scale - 1.0) / 2.0) / scale;
            let ly = (pos.y - (scale - 1.0) / 2.0) / scale;
            let a = &self.pyramids[prev][level];
            let b = &self.pyramids[prev + 1][level];

            a.sample_grid(lx - half, ly - half, p, p, &mut template);
            let ox0 = lx + (d.0 - r as i64) as f64 - half;
            let oy0 = ly + (d.1 - r as i64) as f64 - half;
            b.sample_grid(ox0, oy0, side, side, &mut region);

            let sad_at = |ox: i64, oy: i64, bound: f32| {
                let bx = (ox + r as i64) as usize;
                let by = (oy + r as i64) as usize;
                let mut sad = 0f32;
                for ky in 0..p {
                    let t = &template[ky * p..ky * p + p];
                    let row = &region[(by + ky) * side + bx..(by + ky) * side + bx + p];
                    sad += t.iter().zip(row).map(|(u, v)| (u - v).abs()).sum::<f32>();
                    if sad >= bound {
                        break;
                    }
                }
                sad
            };
            let mut best = (f32::INFINITY, (0i64, 0i64));
            for &(ox, oy) in &self.offsets {
                let sad = sad_at(ox, oy, best.0);
                if sad < best.0 {
                    best = (sad, (ox, oy));
                }
            }
            d = (d.0 + best.1 .0, d.1 + best.1 .1);
        }
        d
    }

    fn template(&self, frame: usize, pos: ErpPoint) -> Vec<f32> {
        let p = self.config.patch;
        let half = (p as f64 - 1.0) / 2.0;
        let mut t = vec![0f32; p * p];
        self.pyramids[frame][0].sample_grid(pos.x - half, pos.y - half, p, p, &mut t);
        t
    }

    /// Mean absolute difference between `template` and `frame` around `(x, y)`.
    fn cost(&self, template: &[f32], frame: usize, x: f64, y: f64) -> f32 {
        let p = self.config.patch;
        let half = (p as f64 - 1.0) / 2.0;
        let mut patch = vec![0f32; p * p];
        self.pyramids[frame][0].sample_grid(x - half, y - half, p, p, &mut patch);
        let sad: f32 = template.iter().zip(&patch).map(|(a, b)| (a - b).abs()).sum();
        sad / (p * p) as f32
    }

    /// Sub-pixel coordinate search within one pixel of `start`. Moves only
    /// on a strict improvement, so an exact match stays put.
    fn refine(&self, template: &[f32], frame: usize, start: (f64, f64)) -> ((f64, f64), f32) {
        let mut pos = start;
        let mut best = self.cost(template, frame, pos.0, pos.1);
        for (step, reach) in [(0.125, 8), (0.025, 5)] {
            for axis in 0..2 {
                let origin = pos;
                for k in -reach..=reach {
                    if k == 0 {
                        continue;
                    }
                    let off = k as f64 * step;
                    let cand = if axis == 0 {
                        (origin.0 + off, origin.1)
                    } else {
                        (origin.0, origin.1 + off)
                    };
                    let c = self.cost(template, frame, cand.0, cand.1);
                    if c < best {
                        best = c;
                        pos = cand;
                    }
                }
            }
        }
        (pos, best)
    }
}

impl SeedTracker for BlockSession {
    fn follow(&self, seed: ErpPoint) -> std::result::Result<Trajectory, String> {
        let l = self.geometry.frames() as usize;
        let (w, h) = (self.geometry.width_f64(), self.geometry.height_f64());
        let anchor = self.template(0, seed);
        let mut points = Vec::with_capacity(l);
        let mut visible = Vec::with_capacity(l);
        points.push(seed);
        visible.push(true);
        let mut pos = seed;
        let mut lost = false;
        for i in 1..l {
            if !lost {
                let (dx, dy) = self.step(i - 1, pos);
                let guess = (pos.x + dx as f64, pos.y + dy as f64);
                // the seed's own patch keeps long tracks from drifting; fall
                // back to the previous frame once the appearance has changed
                let (mut next, cost) = self.refine(&anchor, i, guess);
                if cost > self.config.anchor_tolerance {
                    next = self.refine(&self.template(i - 1, pos), i, guess).0;
                }
                if (0.0..h).contains(&next.1) {
                    let mut nx = next.0.rem_euclid(w);
                    if nx >= w {
                        nx = 0.0;
                    }
                    pos = ErpPoint::new(nx, next.1);
                } else {
                    lost = true;
                }
            }
            points.push(pos);
            visible.push(!lost);
        }
        Trajectory::with_visibility(points, visible).map_err(|e| e.to_string())
    }
}
