//! Raster operations that respect ERP topology: column rotation across the
//! seam and perspective viewports cut out of the sphere.

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::controller::{ConditionMap, FeatureBlock};
use crate::error::{Error, Result};
use crate::par;
use crate::sphere::{sphere_to_erp, FrameGeometry, SpherePoint};
use crate::tracking::{Metadata, Plane};

pub const DEFAULT_FOV_DEG: f64 = 90.0;
pub const DEFAULT_VIEWPORT_SIZE: u32 = 512;

/// Circular shift of the width axis: after `latent_rotate(k)`, column `j`
/// holds what column `(j - k) mod W` held before.
pub trait LatentRotate: Sized {
    fn latent_rotate(&self, k: i64) -> Self;
}

fn rotate_rows<T: Copy>(data: &[T], width: usize, k: i64) -> Vec<T> {
    if width == 0 {
        return data.to_vec();
    }
    let s = k.rem_euclid(width as i64) as usize;
    let mut out = Vec::with_capacity(data.len());
    for row in data.chunks_exact(width) {
        out.extend_from_slice(&row[width - s..]);
        out.extend_from_slice(&row[..width - s]);
    }
    out
}

impl LatentRotate for FeatureBlock {
    fn latent_rotate(&self, k: i64) -> Self {
        let data = rotate_rows(self.data(), self.shape()[3], k);
        FeatureBlock::new(self.shape(), data).expect("same shape")
    }
}

impl LatentRotate for ConditionMap {
    fn latent_rotate(&self, k: i64) -> Self {
        let data = rotate_rows(self.data(), self.shape()[3], k);
        ConditionMap::from_vec(*self.geometry(), self.channels(), data).expect("same shape")
    }
}

impl LatentRotate for Plane {
    fn latent_rotate(&self, k: i64) -> Self {
        Plane::new(self.width(), self.height(), rotate_rows(self.data(), self.width(), k)).expect("same shape")
    }
}

impl LatentRotate for RgbImage {
    fn latent_rotate(&self, k: i64) -> Self {
        let px: Vec<[u8; 3]> = self.pixels().map(|p| p.0).collect();
        let rotated = rotate_rows(&px, self.width() as usize, k);
        RgbImage::from_raw(self.width(), self.height(), rotated.into_iter().flatten().collect())
            .expect("same size")
    }
}

/// Rotates a latent and its condition map by the same angle. `k` counts
/// latent columns; the condition width must be a whole multiple of the
/// latent width.
pub fn rotate_jointly(latent: &FeatureBlock, condition: &ConditionMap, k: i64) -> Result<(FeatureBlock, ConditionMap)> {
    let wl = latent.shape()[3];
    let wc = condition.shape()[3];
    if wl == 0 || wc % wl != 0 {
        return Err(Error::Shape(format!(
            "condition width {wc} is not a multiple of latent width {wl}"
        )));
    }
    let scale = (wc / wl) as i64;
    Ok((latent.latent_rotate(k), condition.latent_rotate(k * scale)))
}

/// Uniform column offset in `[0, width)` for one clip.
pub fn random_offset(width: usize, seed: u64) -> i64 {
    ChaCha8Rng::seed_from_u64(seed).random_range(0..width.max(1)) as i64
}

/// A perspective camera at the sphere's center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViewportSpec {
    yaw: f64,
    pitch: f64,
    fov: f64,
    out_w: u32,
    out_h: u32,
}

impl ViewportSpec {
    /// `fov` is the horizontal field of view in radians.
    pub fn new(yaw: f64, pitch: f64, fov: f64, out_w: u32, out_h: u32) -> Result<Self> {
        if !(fov > 0.0 && fov < std::f64::consts::PI) {
            return Err(Error::domain(format!("fov must lie in (0, pi), got {fov}")));
        }
        if !yaw.is_finite() || !pitch.is_finite() {
            return Err(Error::domain("yaw and pitch must be finite"));
        }
        if out_w == 0 || out_h == 0 {
            return Err(Error::domain(format!("viewport size {out_w}x{out_h} must be positive")));
        }
        Ok(Self {
            yaw,
            pitch,
            fov,
            out_w,
            out_h,
        })
    }

    pub fn yaw(&self) -> f64 {
        self.yaw
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn fov(&self) -> f64 {
        self.fov
    }

    pub fn size(&self) -> (u32, u32) {
        (self.out_w, self.out_h)
    }

    pub fn to_meta(&self) -> Metadata {
        let mut m = Metadata::new();
        m.insert(
            "viewport".into(),
            json!({
                "yaw_deg": self.yaw.to_degrees(),
                "pitch_deg": self.pitch.to_degrees(),
                "fov_deg": self.fov.to_degrees(),
                "width": self.out_w,
                "height": self.out_h,
            }),
        );
        m
    }

    /// Sphere direction seen through output pixel `(i, j)`. Pixels form a
    /// symmetric grid, so only odd sizes have a pixel on the optical axis.
    pub fn ray(&self, i: u32, j: u32) -> SpherePoint {
        let half = f64::from(self.out_w) / 2.0;
        let t = (self.fov / 2.0).tan();
        let u = (f64::from(i) + 0.5 - half) / half * t;
        let v = (f64::from(j) + 0.5 - f64::from(self.out_h) / 2.0) / half * t;
        let (sp, cp) = self.yaw.sin_cos();
        let (st, ct) = self.pitch.sin_cos();
        let forward = [ct * cp, ct * sp, st];
        let right = [-sp, cp, 0.0];
        // toward growing latitude, which is down the ERP rows
        let down = [-st * cp, -st * sp, ct];
        SpherePoint::from_vector(std::array::from_fn(|a| forward[a] + u * right[a] + v * down[a]))
    }
}

/// Bilinear RGB sample at ERP coordinate `(x, y)`, pixel `k` sitting at `k`.
/// Columns wrap, rows clamp.
pub fn sample_rgb(img: &RgbImage, x: f64, y: f64) -> [f64; 3] {
    let (w, h) = (i64::from(img.width()), i64::from(img.height()));
    let y = y.clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor(), y.floor());
    let (ax, ay) = (x - x0, y - y0);
    let xa = (x0 as i64).rem_euclid(w);
    let xb = (xa + 1) % w;
    let ya = y0 as i64;
    let yb = (ya + 1).min(h - 1);
    let at = |x: i64, y: i64| img.get_pixel(x as u32, y as u32).0;
    let (p00, p10, p01, p11) = (at(xa, ya), at(xb, ya), at(xa, yb), at(xb, yb));
    std::array::from_fn(|c| {
        let top = f64::from(p00[c]) * (1.0 - ax) + f64::from(p10[c]) * ax;
        let bot = f64::from(p01[c]) * (1.0 - ax) + f64::from(p11[c]) * ax;
        top * (1.0 - ay) + bot * ay
    })
}

pub fn render_viewport(erp: &RgbImage, spec: &ViewportSpec) -> Result<RgbImage> {
    let g = FrameGeometry::new(erp.width(), erp.height(), 1)?;
    let (w, h) = spec.size();
    let rows = par::map_range(h as usize, |j| {
        (0..w)
            .flat_map(|i| {
                let p = sphere_to_erp(spec.ray(i, j as u32), &g);
                sample_rgb(erp, p.x, p.y).map(|v| v.round().clamp(0.0, 255.0) as u8)
            })
            .collect::<Vec<u8>>()
    });
    Ok(RgbImage::from_raw(w, h, rows.concat()).expect("sized by construction"))
}

/// The eight horizontal cameras, yaw 0, 45, ..., 315 degrees at pitch 0.
pub fn horizontal_eight_specs(fov: f64, out_size: u32) -> Result<Vec<ViewportSpec>> {
    (0..8)
        .map(|k| ViewportSpec::new(f64::from(k * 45).to_radians(), 0.0, fov, out_size, out_size))
        .collect()
}

pub fn horizontal_eight(erp: &RgbImage, fov: f64, out_size: u32) -> Result<Vec<RgbImage>> {
    let specs = horizontal_eight_specs(fov, out_size)?;
    par::try_map_range(specs.len(), |k| render_viewport(erp, &specs[k]))
}

/// Uniform image of one color.
pub fn solid(width: u32, height: u32, color: [u8; 3]) -> RgbImage {
    RgbImage::from_pixel(width, height, Rgb(color))
}
