//! Synthetic ERP content with known motion, for tests, benches, and demos.

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::par;
use crate::sphere::{erp_to_sphere, sphere_to_erp, ErpPoint, FrameGeometry, SpherePoint};
use crate::tracking::{Plane, VideoFrames};

struct Octave {
    cell: f64,
    nx: usize,
    ny: usize,
    weight: f32,
    lattice: Vec<f32>,
}

/// Multi-octave value noise in `[0, 255]`, periodic along x.
pub fn texture(width: usize, height: usize, seed: u64) -> Plane {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let octaves: Vec<Octave> = [(3.0, 0.45f32), (7.0, 0.3), (17.0, 0.25)]
        .into_iter()
        .map(|(cell, weight)| {
            let nx = ((width as f64 / cell).ceil() as usize).max(1);
            let ny = (height as f64 / cell).ceil() as usize + 2;
            let lattice = (0..nx * ny).map(|_| rng.random::<f32>()).collect();
            Octave {
                cell,
                nx,
                ny,
                weight,
                lattice,
            }
        })
        .collect();

    let rows = par::map_range(height, |y| {
        (0..width)
            .map(|x| {
                let v: f32 = octaves
                    .iter()
                    .map(|o| {
                        let fx = x as f64 / o.cell;
                        let fy = y as f64 / o.cell;
                        let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
                        let sx = smooth((fx - x0 as f64) as f32);
                        let sy = smooth((fy - y0 as f64) as f32);
                        let at = |i: usize, j: usize| o.lattice[j.min(o.ny - 1) * o.nx + i % o.nx];
                        let top = at(x0, y0) + (at(x0 + 1, y0) - at(x0, y0)) * sx;
                        let bot = at(x0, y0 + 1) + (at(x0 + 1, y0 + 1) - at(x0, y0 + 1)) * sx;
                        o.weight * (top + (bot - top) * sy)
                    })
                    .sum();
                (v * 255.0).round()
            })
            .collect::<Vec<f32>>()
    });
    Plane::new(width, height, rows.concat()).expect("sized by construction")
}

fn smooth(t: f32) -> f32 {
    t * t * (3.0 - 2.0 * t)
}

pub fn static_video(g: FrameGeometry, seed: u64) -> Result<VideoFrames> {
    let base = texture(g.width() as usize, g.height() as usize, seed);
    VideoFrames::new(g, vec![base; g.frames() as usize])
}

/// Frame `i` is the base texture shifted right by `px_per_frame * i` columns.
pub fn yaw_video(g: FrameGeometry, px_per_frame: f64, seed: u64) -> Result<VideoFrames> {
    let (w, h) = (g.width() as usize, g.height() as usize);
    let base = texture(w, h, seed);
    let frames = par::map_range(g.frames() as usize, |i| {
        let shift = px_per_frame * i as f64;
        Plane::from_fn(w, h, |x, y| base.sample(x as f64 - shift, y as f64))
    });
    VideoFrames::new(g, frames)
}

/// Frame `i` shows the base texture after rotating the sphere by
/// `rad_per_frame * i` about `axis`.
pub fn rotation_video(g: FrameGeometry, axis: [f64; 3], rad_per_frame: f64, seed: u64) -> Result<VideoFrames> {
    let (w, h) = (g.width() as usize, g.height() as usize);
    let base = texture(w, h, seed);
    let frames = par::map_range(g.frames() as usize, |i| {
        let angle = -rad_per_frame * i as f64;
        Plane::from_fn(w, h, |x, y| {
            let s = erp_to_sphere(ErpPoint::new(x as f64, y as f64), &g).expect("pixel in frame");
            let v = crate::sphere::rotate_about_axis(s.to_unit_vector(), axis, angle);
            let p = sphere_to_erp(SpherePoint::from_vector(v), &g);
            base.sample(p.x, p.y)
        })
    });
    VideoFrames::new(g, frames)
}

/// Colored variant of [`texture`] for image-level tests.
pub fn textured_rgb(width: u32, height: u32, seed: u64) -> RgbImage {
    let planes: Vec<Plane> = (0..3)
        .map(|c| texture(width as usize, height as usize, seed.wrapping_add(c)))
        .collect();
    RgbImage::from_fn(width, height, |x, y| {
        Rgb(std::array::from_fn(|c| planes[c].get(x as usize, y as usize) as u8))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn texture_is_deterministic_and_varied() {
        let a = texture(64, 32, 3);
        let b = texture(64, 32, 3);
        assert_eq!(a, b);
        let (lo, hi) = a
            .data()
            .iter()
            .fold((f32::MAX, f32::MIN), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        assert!(hi - lo > 60.0, "range {lo}..{hi}");
    }

    #[test]
    fn integer_yaw_is_a_column_shift() {
        let g = FrameGeometry::new(64, 32, 3).unwrap();
        let v = yaw_video(g, 2.0, 1).unwrap();
        let f0 = &v.frames()[0];
        let f2 = &v.frames()[2];
        for y in 0..32 {
            for x in 0..64 {
                assert_eq!(f2.get((x + 4) % 64, y), f0.get(x, y));
            }
        }
    }
}
