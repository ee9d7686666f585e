use crate::error::{Error, Result};
use crate::par;
use crate::sphere::wrap_signed;
use crate::tracking::TrajectorySet;

use super::ConditionMap;

/// How a trajectory position is written onto the pixel grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Rasterization {
    /// The pixel containing the position, `(floor x, floor y)`.
    #[default]
    Nearest,
    /// Bilinear splat over the four pixels around the position, taking pixel
    /// `k` to be centered at `k + 0.5`.
    Bilinear,
}

pub fn speed_encode(set: &TrajectorySet) -> ConditionMap {
    speed_encode_with(set, Rasterization::Nearest)
}

/// Two-channel speed map: at frame `i >= 1`, the pixel under each trajectory
/// carries `(x_i - x_{i-1}, y_i - y_{i-1})`, with the horizontal step wrapped
/// into `(-W/2, W/2]`. Frame 0 and untouched pixels stay zero; trajectories
/// landing on the same pixel add up. Steps into or out of a hidden position
/// are skipped.
pub fn speed_encode_with(set: &TrajectorySet, raster: Rasterization) -> ConditionMap {
    let g = *set.geometry();
    let mut map = ConditionMap::zeros(g, 2);
    let (w, h) = (g.width() as usize, g.height() as usize);
    let wf = g.width_f64();

    for t in set.trajectories() {
        for i in 1..t.len() {
            if !(t.visible[i] && t.visible[i - 1]) {
                continue;
            }
            let (p, q) = (t.points[i - 1], t.points[i]);
            let u = wrap_signed(q.x - p.x, wf) as f32;
            let v = (q.y - p.y) as f32;
            let mut put = |x: usize, y: usize, weight: f32| {
                let iu = map.index(i, 0, y, x);
                let iv = map.index(i, 1, y, x);
                map.data[iu] += weight * u;
                map.data[iv] += weight * v;
            };
            match raster {
                Rasterization::Nearest => {
                    let x = (q.x.floor() as i64).rem_euclid(w as i64) as usize;
                    let y = (q.y.floor() as i64).clamp(0, h as i64 - 1) as usize;
                    put(x, y, 1.0);
                }
                Rasterization::Bilinear => {
                    let fx = q.x - 0.5;
                    let fy = (q.y - 0.5).clamp(0.0, (h - 1) as f64);
                    let (x0, y0) = (fx.floor(), fy.floor());
                    let (ax, ay) = ((fx - x0) as f32, (fy - y0) as f32);
                    let xa = (x0 as i64).rem_euclid(w as i64) as usize;
                    let xb = (xa + 1) % w;
                    let ya = y0 as usize;
                    let yb = (ya + 1).min(h - 1);
                    put(xa, ya, (1.0 - ax) * (1.0 - ay));
                    put(xb, ya, ax * (1.0 - ay));
                    put(xa, yb, (1.0 - ax) * ay);
                    put(xb, yb, ax * ay);
                }
            }
        }
    }
    map
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable Gaussian blur of every plane. Columns wrap around the seam,
/// rows clamp at the poles, and `sigma = 0` returns the input unchanged.
pub fn gaussian_smooth(map: &ConditionMap, sigma: f64) -> Result<ConditionMap> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::domain(format!("sigma must be finite and >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(map.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let r = (kernel.len() / 2) as i64;
    let [_, _, h, w] = map.shape();
    let mut out = map.clone();

    par::for_each_chunk_mut(&mut out.data, h * w, |plane_idx, dst| {
        let src = &map.data[plane_idx * h * w..(plane_idx + 1) * h * w];
        if src.iter().all(|&v| v == 0.0) {
            return;
        }
        let mut tmp = vec![0f64; h * w];
        for y in 0..h {
            let row = &src[y * w..(y + 1) * w];
            for x in 0..w {
                let mut acc = 0.0;
                for (k, kw) in kernel.iter().enumerate() {
                    let xx = (x as i64 + k as i64 - r).rem_euclid(w as i64) as usize;
                    acc += kw * f64::from(row[xx]);
                }
                tmp[y * w + x] = acc;
            }
        }
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (k, kw) in kernel.iter().enumerate() {
                    let yy = (y as i64 + k as i64 - r).clamp(0, h as i64 - 1) as usize;
                    acc += kw * tmp[yy * w + x];
                }
                dst[y * w + x] = acc as f32;
            }
        }
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{ErpPoint, FrameGeometry};
    use crate::tracking::Trajectory;

    fn set_of(w: u32, h: u32, pts: &[(f64, f64)]) -> TrajectorySet {
        let g = FrameGeometry::new(w, h, pts.len() as u32).unwrap();
        let t = Trajectory::new(pts.iter().map(|&(x, y)| ErpPoint::new(x, y)).collect());
        TrajectorySet::new(g, vec![t]).unwrap()
    }

    #[test]
    fn successive_differences() {
        let set = set_of(16, 8, &[(1.0, 1.0), (3.0, 2.0), (6.0, 4.0)]);
        let m = speed_encode(&set);
        assert!(m.data()[..2 * 16 * 8].iter().all(|&v| v == 0.0));
        assert_eq!((m.get(1, 0, 2, 3), m.get(1, 1, 2, 3)), (2.0, 1.0));
        assert_eq!((m.get(2, 0, 4, 6), m.get(2, 1, 4, 6)), (3.0, 2.0));
        let nonzero = m.data().iter().filter(|&&v| v != 0.0).count();
        assert_eq!(nonzero, 4);
    }

    #[test]
    fn static_trajectory_is_all_zero() {
        let set = set_of(16, 8, &[(5.0, 5.0); 4]);
        assert!(speed_encode(&set).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn seam_crossing_is_wrapped() {
        let set = set_of(640, 320, &[(638.0, 10.0), (2.0, 10.0)]);
        let m = speed_encode(&set);
        assert_eq!(m.get(1, 0, 10, 2), 4.0);
    }

    #[test]
    fn bilinear_splat_conserves_weight() {
        let set = set_of(16, 8, &[(4.0, 4.0), (6.25, 4.75)]);
        let m = speed_encode_with(&set, Rasterization::Bilinear);
        let u_total: f32 = (0..8).flat_map(|y| (0..16).map(move |x| (y, x))).map(|(y, x)| m.get(1, 0, y, x)).sum();
        assert!((u_total - 2.25).abs() < 1e-6);
    }

    #[test]
    fn smoothing_identity_and_errors() {
        let set = set_of(16, 8, &[(1.0, 1.0), (3.0, 2.0)]);
        let m = speed_encode(&set);
        assert_eq!(gaussian_smooth(&m, 0.0).unwrap(), m);
        assert!(gaussian_smooth(&m, -1.0).is_err());
        assert!(gaussian_smooth(&m, f64::NAN).is_err());
    }

    #[test]
    fn impulse_mass_and_peak() {
        let g = FrameGeometry::new(64, 32, 1).unwrap();
        let mut m = ConditionMap::zeros(g, 1);
        let i = m.index(0, 0, 16, 30);
        m.data_mut()[i] = 1.0;
        let s = gaussian_smooth(&m, 2.0).unwrap();
        let mass: f64 = s.data().iter().map(|&v| f64::from(v)).sum();
        assert!((mass - 1.0).abs() < 1e-6, "mass {mass}");
        let peak = s.data().iter().cloned().fold(f32::MIN, f32::max);
        assert_eq!(s.get(0, 0, 16, 30), peak);
    }

    #[test]
    fn impulse_at_seam_spills_symmetrically() {
        let g = FrameGeometry::new(64, 32, 1).unwrap();
        let mut m = ConditionMap::zeros(g, 1);
        let i = m.index(0, 0, 16, 0);
        m.data_mut()[i] = 1.0;
        let s = gaussian_smooth(&m, 2.0).unwrap();
        assert!(s.get(0, 0, 16, 63) > 0.0);
        assert_eq!(s.get(0, 0, 16, 63), s.get(0, 0, 16, 1));
        assert_eq!(s.get(0, 0, 16, 62), s.get(0, 0, 16, 2));
    }
}
