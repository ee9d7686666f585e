//! Equirectangular (ERP) pixel coordinates, unit-sphere coordinates, and the
//! distance and interpolation rules defined on them.
//!
//! Longitude `phi` grows with the pixel column and latitude `theta` grows
//! with the pixel row, so row 0 is `theta = -pi/2`:
//!
//! ```text
//! phi   = 2*pi*x/W - pi
//! theta = pi*y/H - pi/2
//! ```

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this separation two endpoints are treated as coincident.
pub const COINCIDENT_EPS: f64 = 1e-9;
/// Endpoints closer than this to antipodal are rejected by the interpolator.
pub const ANTIPODAL_EPS: f64 = 1e-9;

/// Continuous pixel position in an ERP frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErpPoint {
    pub x: f64,
    pub y: f64,
}

impl ErpPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn in_bounds(&self, g: &FrameGeometry) -> bool {
        (0.0..g.width_f64()).contains(&self.x) && (0.0..g.height_f64()).contains(&self.y)
    }
}

/// Longitude/latitude on the unit sphere, in radians.
///
/// `phi` is kept in `[-pi, pi)` and `theta` in `[-pi/2, pi/2]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpherePoint {
    phi: f64,
    theta: f64,
}

impl SpherePoint {
    pub fn new(phi: f64, theta: f64) -> Self {
        Self {
            phi: normalize_longitude(phi),
            theta: theta.clamp(-FRAC_PI_2, FRAC_PI_2),
        }
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Cartesian embedding `(cos t cos p, cos t sin p, sin t)`.
    pub fn to_unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [ct * cp, ct * sp, st]
    }

    /// Inverse of [`to_unit_vector`](Self::to_unit_vector); `v` need not be normalized.
    pub fn from_vector(v: [f64; 3]) -> Self {
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let theta = (v[2] / r).clamp(-1.0, 1.0).asin();
        Self::new(v[1].atan2(v[0]), theta)
    }
}

/// Maps any angle into `[-pi, pi)`. Values already in range are returned
/// unchanged, so the operation is idempotent bit for bit.
pub fn normalize_longitude(phi: f64) -> f64 {
    if (-PI..PI).contains(&phi) {
        return phi;
    }
    let r = (phi + PI).rem_euclid(TAU);
    if r >= TAU {
        -PI
    } else {
        r - PI
    }
}

/// Wraps a difference into `(-period/2, period/2]`.
pub fn wrap_signed(delta: f64, period: f64) -> f64 {
    let half = period / 2.0;
    let mut d = delta.rem_euclid(period);
    if d > half {
        d -= period;
    }
    d
}

/// Rodrigues rotation of `v` by `angle` about `axis`.
pub fn rotate_about_axis(v: [f64; 3], axis: [f64; 3], angle: f64) -> [f64; 3] {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let k = [axis[0] / n, axis[1] / n, axis[2] / n];
    let (s, c) = angle.sin_cos();
    let dot = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
    let cross = [
        k[1] * v[2] - k[2] * v[1],
        k[2] * v[0] - k[0] * v[2],
        k[0] * v[1] - k[1] * v[0],
    ];
    std::array::from_fn(|i| v[i] * c + cross[i] * s + k[i] * dot * (1.0 - c))
}

/// Frame size in pixels plus clip length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FrameGeometry {
    width: u32,
    height: u32,
    frames: u32,
}

impl FrameGeometry {
    /// `frames = 1` is accepted so that seed-point files can carry a geometry;
    /// operations that need motion check for at least two frames themselves.
    pub fn new(width: u32, height: u32, frames: u32) -> Result<Self> {
        if width == 0 || height == 0 || frames == 0 {
            return Err(Error::domain(format!(
                "frame geometry must be positive, got W={width} H={height} L={frames}"
            )));
        }
        Ok(Self {
            width,
            height,
            frames,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn frames(&self) -> u32 {
        self.frames
    }

    pub fn width_f64(&self) -> f64 {
        f64::from(self.width)
    }

    pub fn height_f64(&self) -> f64 {
        f64::from(self.height)
    }

    pub fn with_frames(&self, frames: u32) -> Result<Self> {
        Self::new(self.width, self.height, frames)
    }

    /// ERP frames are normally twice as wide as they are tall.
    pub fn aspect_warning(&self) -> Option<String> {
        (u64::from(self.width) != 2 * u64::from(self.height)).then(|| {
            format!(
                "frame is {}x{}; equirectangular frames are usually 2:1",
                self.width, self.height
            )
        })
    }

    pub fn require_motion(&self) -> Result<()> {
        if self.frames < 2 {
            return Err(Error::domain(format!(
                "at least 2 frames are required, got L={}",
                self.frames
            )));
        }
        Ok(())
    }
}

/// Where a pixel's sample sits relative to its integer index.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PixelConvention {
    /// `x` maps to longitude with no offset.
    #[default]
    Corner,
    /// Pixel `k` is sampled at `k + 0.5`.
    Center,
}

impl PixelConvention {
    fn offset(self) -> f64 {
        match self {
            PixelConvention::Corner => 0.0,
            PixelConvention::Center => 0.5,
        }
    }
}

pub fn erp_to_sphere(p: ErpPoint, g: &FrameGeometry) -> Result<SpherePoint> {
    erp_to_sphere_with(p, g, PixelConvention::Corner)
}

pub fn erp_to_sphere_with(
    p: ErpPoint,
    g: &FrameGeometry,
    convention: PixelConvention,
) -> Result<SpherePoint> {
    let (w, h) = (g.width_f64(), g.height_f64());
    if !(0.0..w).contains(&p.x) {
        return Err(Error::domain(format!("x = {} outside [0, {w})", p.x)));
    }
    if !(0.0..h).contains(&p.y) {
        return Err(Error::domain(format!("y = {} outside [0, {h})", p.y)));
    }
    let off = convention.offset();
    // Dividing first keeps exact pixel fractions (center, quarters) exact.
    let phi = TAU * ((p.x + off) / w) - PI;
    let theta = PI * ((p.y + off) / h) - FRAC_PI_2;
    Ok(SpherePoint::new(phi, theta))
}

pub fn sphere_to_erp(s: SpherePoint, g: &FrameGeometry) -> ErpPoint {
    sphere_to_erp_with(s, g, PixelConvention::Corner)
}

pub fn sphere_to_erp_with(s: SpherePoint, g: &FrameGeometry, convention: PixelConvention) -> ErpPoint {
    let (w, h) = (g.width_f64(), g.height_f64());
    let off = convention.offset();
    let mut x = (s.phi + PI) / TAU * w - off;
    x = x.rem_euclid(w);
    if x >= w {
        x = 0.0;
    }
    let mut y = (s.theta + FRAC_PI_2) / PI * h - off;
    // theta = +pi/2 lands on y = H, which is not a valid row.
    if y >= h {
        y = f64::from_bits(h.to_bits() - 1);
    }
    ErpPoint::new(x, y.max(0.0))
}

/// Great-circle distance via the spherical law of cosines, in `[0, pi]`.
///
/// Identical points give exactly 0; otherwise `acos` near 1 resolves
/// separations only down to about 1e-8 rad.
pub fn spherical_distance(a: SpherePoint, b: SpherePoint) -> f64 {
    if a == b {
        return 0.0;
    }
    let cos_d = a.theta.sin() * b.theta.sin()
        + a.theta.cos() * b.theta.cos() * (a.phi - b.phi).cos();
    cos_d.clamp(-1.0, 1.0).acos()
}

/// Fills `steps` points from `handle` to `target`.
///
/// Latitude follows the sine-weighted blend
/// `asin((sin((1-t) w) sin t0 + sin(t w) sin t1) / sin w)` and longitude is
/// linear in `t`, with `t_i = i / (steps - 1)` and `w` the endpoint distance.
/// The longitude difference is taken the short way across the `+-pi` seam.
/// The first and last elements are exactly `handle` and `target`.
pub fn spherical_interpolate(
    handle: SpherePoint,
    target: SpherePoint,
    steps: usize,
) -> Result<Vec<SpherePoint>> {
    if steps < 2 {
        return Err(Error::domain(format!(
            "interpolation needs at least 2 steps, got {steps}"
        )));
    }
    let omega = spherical_distance(handle, target);
    if omega < COINCIDENT_EPS {
        return Ok(vec![handle; steps]);
    }
    if omega > PI - ANTIPODAL_EPS {
        return Err(Error::DegeneratePath(format!(
            "endpoints are antipodal (distance {omega:.12} rad)"
        )));
    }
    let sin_omega = omega.sin();
    let (s0, s1) = (handle.theta.sin(), target.theta.sin());
    let dphi = wrap_signed(target.phi - handle.phi, TAU);
    let last = (steps - 1) as f64;

    let mut out = Vec::with_capacity(steps);
    out.push(handle);
    for i in 1..steps - 1 {
        let t = i as f64 / last;
        let blend = (((1.0 - t) * omega).sin() * s0 + (t * omega).sin() * s1) / sin_omega;
        let theta = blend.clamp(-1.0, 1.0).asin();
        out.push(SpherePoint::new(handle.phi + t * dphi, theta));
    }
    out.push(target);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn g() -> FrameGeometry {
        FrameGeometry::new(640, 320, 8).unwrap()
    }

    #[test]
    fn image_center_is_origin() {
        let s = erp_to_sphere(ErpPoint::new(320.0, 160.0), &g()).unwrap();
        assert_eq!(s.phi(), 0.0);
        assert_eq!(s.theta(), 0.0);
    }

    #[test]
    fn corner_maps_to_seam_and_pole() {
        let s = erp_to_sphere(ErpPoint::new(0.0, 0.0), &g()).unwrap();
        assert_eq!(s.phi(), -PI);
        assert_eq!(s.theta(), -FRAC_PI_2);
    }

    #[test]
    fn three_quarter_point() {
        let s = erp_to_sphere(ErpPoint::new(480.0, 240.0), &g()).unwrap();
        assert_abs_diff_eq!(s.phi(), FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(s.theta(), PI / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn out_of_bounds_names_coordinate() {
        let e = erp_to_sphere(ErpPoint::new(640.0, 10.0), &g()).unwrap_err();
        assert!(e.to_string().contains("x = 640"), "{e}");
        let e = erp_to_sphere(ErpPoint::new(1.0, -0.5), &g()).unwrap_err();
        assert!(e.to_string().contains("y = -0.5"), "{e}");
    }

    #[test]
    fn inverse_of_center_and_seam() {
        let p = sphere_to_erp(SpherePoint::new(0.0, 0.0), &g());
        assert_eq!(p, ErpPoint::new(320.0, 160.0));
        let p = sphere_to_erp(SpherePoint::new(-PI, 0.0), &g());
        assert_eq!(p, ErpPoint::new(0.0, 160.0));
        // +pi is the same meridian as -pi
        let p = sphere_to_erp(SpherePoint::new(PI, 0.0), &g());
        assert_eq!(p.x, 0.0);
    }

    #[test]
    fn south_pole_stays_in_bounds() {
        let p = sphere_to_erp(SpherePoint::new(0.3, FRAC_PI_2), &g());
        assert!(p.in_bounds(&g()));
        assert!(p.y > 319.999);
    }

    #[test]
    fn center_convention_round_trips() {
        let p = ErpPoint::new(12.0, 7.0);
        let s = erp_to_sphere_with(p, &g(), PixelConvention::Center).unwrap();
        let back = sphere_to_erp_with(s, &g(), PixelConvention::Center);
        assert_abs_diff_eq!(back.x, 12.0, epsilon = 1e-9);
        assert_abs_diff_eq!(back.y, 7.0, epsilon = 1e-9);
        let last = erp_to_sphere_with(ErpPoint::new(639.9, 0.0), &g(), PixelConvention::Center)
            .unwrap();
        assert!(last.phi() < PI);
    }

    #[test]
    fn distance_cases() {
        let a = SpherePoint::new(0.0, 0.0);
        assert_eq!(spherical_distance(a, a), 0.0);
        let b = SpherePoint::new(FRAC_PI_2, 0.0);
        assert_abs_diff_eq!(spherical_distance(a, b), FRAC_PI_2, epsilon = 1e-15);
        let p = SpherePoint::new(0.4, 0.7);
        let q = SpherePoint::new(0.4 + PI, -0.7);
        assert_abs_diff_eq!(spherical_distance(p, q), PI, epsilon = 1e-7);
    }

    #[test]
    fn coincident_points_do_not_produce_nan() {
        let p = SpherePoint::new(1.234_567_890_123, 0.987_654_321);
        assert!(!spherical_distance(p, p).is_nan());
    }

    #[test]
    fn normalize_is_idempotent_and_wraps() {
        assert_eq!(normalize_longitude(0.1), 0.1);
        assert_eq!(normalize_longitude(-PI), -PI);
        assert_abs_diff_eq!(normalize_longitude(PI), -PI);
        assert_abs_diff_eq!(normalize_longitude(3.0 * PI / 2.0), -FRAC_PI_2, epsilon = 1e-15);
    }

    #[test]
    fn wrap_signed_range() {
        assert_eq!(wrap_signed(-636.0, 640.0), 4.0);
        assert_eq!(wrap_signed(320.0, 640.0), 320.0);
        assert_eq!(wrap_signed(-320.0, 640.0), 320.0);
        assert_eq!(wrap_signed(3.0, 640.0), 3.0);
    }

    #[test]
    fn interpolate_constant_when_coincident() {
        let h = SpherePoint::new(0.3, 0.2);
        let path = spherical_interpolate(h, h, 6).unwrap();
        assert_eq!(path, vec![h; 6]);
    }

    #[test]
    fn interpolate_along_equator() {
        let path = spherical_interpolate(
            SpherePoint::new(0.0, 0.0),
            SpherePoint::new(FRAC_PI_2, 0.0),
            3,
        )
        .unwrap();
        assert!(path.iter().all(|p| p.theta() == 0.0));
        assert_abs_diff_eq!(path[1].phi(), PI / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn interpolate_rejects_antipodes_and_short_paths() {
        let a = SpherePoint::new(0.0, 0.3);
        let b = SpherePoint::new(PI, -0.3);
        assert!(matches!(
            spherical_interpolate(a, b, 5),
            Err(Error::DegeneratePath(_))
        ));
        assert!(spherical_interpolate(a, a, 1).is_err());
    }

    #[test]
    fn interpolate_crosses_seam_short_way() {
        let a = SpherePoint::new(PI - 0.1, 0.0);
        let b = SpherePoint::new(-PI + 0.1, 0.0);
        let path = spherical_interpolate(a, b, 3).unwrap();
        assert_abs_diff_eq!(path[1].phi(), -PI, epsilon = 1e-12);
    }
}
