//! HEALPix pixel centers in the RING scheme.
//!
//! The sphere is split into `12 * n_side^2` pixels of equal solid angle laid
//! out on `4 * n_side - 1` rings of constant latitude. Rings are numbered
//! `1..4n` from the north (`z = +1`) to the south pole.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use crate::error::{Error, Result};
use crate::sphere::{sphere_to_erp, ErpPoint, FrameGeometry, SpherePoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HealpixGrid {
    n_side: u32,
}

impl HealpixGrid {
    pub fn new(n_side: u32) -> Result<Self> {
        if n_side == 0 {
            return Err(Error::domain("n_side must be at least 1"));
        }
        // 12 * n^2 must stay addressable
        if n_side > 1 << 13 {
            return Err(Error::domain(format!("n_side = {n_side} is too large")));
        }
        Ok(Self { n_side })
    }

    pub fn n_side(&self) -> u32 {
        self.n_side
    }

    pub fn n_points(&self) -> usize {
        12 * (self.n_side as usize).pow(2)
    }

    pub fn n_rings(&self) -> usize {
        4 * self.n_side as usize - 1
    }

    /// Pixel area in steradians.
    pub fn pixel_area(&self) -> f64 {
        4.0 * PI / self.n_points() as f64
    }

    /// Pixel centers in RING order.
    pub fn centers(&self) -> Vec<SpherePoint> {
        let n = self.n_side as usize;
        let nf = n as f64;
        let mut out = Vec::with_capacity(self.n_points());
        for ring in 1..4 * n {
            let (z, count, phi_of): (f64, usize, Box<dyn Fn(usize) -> f64>) = if ring < n {
                let r = ring as f64;
                (
                    1.0 - r * r / (3.0 * nf * nf),
                    4 * ring,
                    Box::new(move |j| FRAC_PI_2 / r * (j as f64 - 0.5)),
                )
            } else if ring <= 3 * n {
                // written as 2(2n - i)/(3n) so mirrored rings negate exactly
                let k = 2.0 * n as f64 - ring as f64;
                let shift = if (ring + n) % 2 == 1 { 1.0 } else { 0.5 };
                (
                    2.0 * k / (3.0 * nf),
                    4 * n,
                    Box::new(move |j| FRAC_PI_2 / nf * (j as f64 - shift)),
                )
            } else {
                let mirror = 4 * n - ring;
                let r = mirror as f64;
                (
                    -(1.0 - r * r / (3.0 * nf * nf)),
                    4 * mirror,
                    Box::new(move |j| FRAC_PI_2 / r * (j as f64 - 0.5)),
                )
            };
            let theta = z.asin();
            out.extend((1..=count).map(|j| SpherePoint::new(phi_of(j), theta)));
        }
        out
    }

    /// RING-scheme index of the pixel containing `p`.
    pub fn ring_pixel(&self, p: SpherePoint) -> usize {
        let n = i64::from(self.n_side);
        let nf = n as f64;
        let z = p.theta().sin();
        let za = z.abs();
        let tt = p.phi().rem_euclid(TAU) / FRAC_PI_2; // [0, 4)

        let pix = if za <= 2.0 / 3.0 {
            let t1 = nf * (0.5 + tt);
            let t2 = nf * z * 0.75;
            let jp = (t1 - t2).floor() as i64;
            let jm = (t1 + t2).floor() as i64;
            let ir = n + 1 + jp - jm; // 1..=2n+1
            let kshift = 1 - (ir & 1);
            let ip = (jp + jm - n + kshift + 1).div_euclid(2).rem_euclid(4 * n);
            2 * n * (n - 1) + (ir - 1) * 4 * n + ip
        } else {
            let tp = tt - tt.floor();
            let tmp = nf * (3.0 * (1.0 - za)).sqrt();
            let jp = (tp * tmp).floor() as i64;
            let jm = ((1.0 - tp) * tmp).floor() as i64;
            let ir = jp + jm + 1;
            let ip = ((tt * ir as f64).floor() as i64).rem_euclid(4 * ir);
            if z > 0.0 {
                2 * ir * (ir - 1) + ip
            } else {
                12 * n * n - 2 * ir * (ir + 1) + ip
            }
        };
        pix as usize
    }
}

pub fn healpix_centers(n_side: u32) -> Result<Vec<SpherePoint>> {
    Ok(HealpixGrid::new(n_side)?.centers())
}

/// Frame-0 tracking seeds: the HEALPix centers projected into the ERP frame.
pub fn init_points(n_side: u32, g: &FrameGeometry) -> Result<Vec<ErpPoint>> {
    Ok(healpix_centers(n_side)?
        .into_iter()
        .map(|s| sphere_to_erp(s, g))
        .collect())
}
