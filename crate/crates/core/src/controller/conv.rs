use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Activation {
    Identity,
    #[default]
    Silu,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Identity => v,
            Activation::Silu => v / (1.0 + (-v).exp()),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Silu => "silu",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "identity" => Some(Activation::Identity),
            "silu" => Some(Activation::Silu),
            _ => None,
        }
    }
}

/// Square-kernel 2D convolution. Padding wraps across the ERP seam
/// horizontally and is zero above and below the frame.
///
/// Weights are laid out `[out][in][ky][kx]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    weight: Vec<f32>,
    bias: Option<Vec<f32>>,
}

impl Conv2d {
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        weight: Vec<f32>,
        bias: Option<Vec<f32>>,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || kernel % 2 == 0 {
            return Err(Error::Shape(format!(
                "conv {in_channels}->{out_channels} with kernel {kernel}: channels must be positive and the kernel odd"
            )));
        }
        let n = out_channels * in_channels * kernel * kernel;
        if weight.len() != n {
            return Err(Error::Shape(format!("conv weight needs {n} values, got {}", weight.len())));
        }
        if let Some(b) = &bias {
            if b.len() != out_channels {
                return Err(Error::Shape(format!(
                    "conv bias needs {out_channels} values, got {}",
                    b.len()
                )));
            }
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            weight,
            bias,
        })
    }

    pub fn zeros(in_channels: usize, out_channels: usize, kernel: usize) -> Self {
        Self::new(
            in_channels,
            out_channels,
            kernel,
            vec![0.0; out_channels * in_channels * kernel * kernel],
            None,
        )
        .expect("valid shape")
    }

    /// Uniform weights in `±sqrt(3 / fan_in)`, no bias.
    pub fn seeded(in_channels: usize, out_channels: usize, kernel: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = (3.0 / (in_channels * kernel * kernel) as f64).sqrt() as f32;
        let weight = (0..out_channels * in_channels * kernel * kernel)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        Self::new(in_channels, out_channels, kernel, weight, None).expect("valid shape")
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn weight(&self) -> &[f32] {
        &self.weight
    }

    pub fn bias(&self) -> Option<&[f32]> {
        self.bias.as_deref()
    }

    pub fn is_zero(&self) -> bool {
        self.weight.iter().all(|&w| w == 0.0) && self.bias.iter().flatten().all(|&b| b == 0.0)
    }

    #[inline]
    fn w(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        let k = self.kernel;
        f64::from(self.weight[((o * self.in_channels + i) * k + ky) * k + kx])
    }

    /// Convolves one frame, `in_channels x h x w` in, `out_channels x h x w`
    /// out. Output channels are computed in parallel.
    pub fn forward(&self, input: &[f64], h: usize, w: usize) -> Vec<f64> {
        let plane = h * w;
        assert_eq!(input.len(), self.in_channels * plane, "conv input size");
        let r = (self.kernel / 2) as isize;
        let mut out = vec![0f64; self.out_channels * plane];
        par::for_each_chunk_mut(&mut out, plane, |o, dst| {
            if let Some(b) = &self.bias {
                dst.fill(f64::from(b[o]));
            }
            for i in 0..self.in_channels {
                let src = &input[i * plane..(i + 1) * plane];
                for ky in 0..self.kernel {
                    let dy = ky as isize - r;
                    for kx in 0..self.kernel {
                        let wv = self.w(o, i, ky, kx);
                        if wv == 0.0 {
                            continue;
                        }
                        let dx = kx as isize - r;
                        for y in 0..h {
                            let yy = y as isize + dy;
                            if yy < 0 || yy >= h as isize {
                                continue;
                            }
                            let row = &src[yy as usize * w..(yy as usize + 1) * w];
                            let out_row = &mut dst[y * w..(y + 1) * w];
                            for (x, acc) in out_row.iter_mut().enumerate() {
                                let xx = (x as isize + dx).rem_euclid(w as isize) as usize;
                                *acc += wv * row[xx];
                            }
                        }
                    }
                }
            }
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Conv2d::new(2, 4, 2, vec![0.0; 32], None).is_err());
        assert!(Conv2d::new(2, 4, 3, vec![0.0; 71], None).is_err());
        assert!(Conv2d::new(2, 4, 3, vec![0.0; 72], Some(vec![0.0; 3])).is_err());
    }

    #[test]
    fn identity_kernel_copies() {
        let mut wts = vec![0f32; 9];
        wts[4] = 1.0;
        let c = Conv2d::new(1, 1, 3, wts, None).unwrap();
        let input: Vec<f64> = (0..20).map(f64::from).collect();
        assert_eq!(c.forward(&input, 4, 5), input);
    }

    #[test]
    fn shift_kernel_wraps_columns_and_zero_pads_rows() {
        // picks the left neighbour: out(x) = in(x - 1)
        let mut wts = vec![0f32; 9];
        wts[3] = 1.0;
        let c = Conv2d::new(1, 1, 3, wts, None).unwrap();
        let input = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(c.forward(&input, 1, 4), vec![4.0, 1.0, 2.0, 3.0]);
        // picks the row above
        let mut wts = vec![0f32; 9];
        wts[1] = 1.0;
        let c = Conv2d::new(1, 1, 3, wts, None).unwrap();
        assert_eq!(c.forward(&[1.0, 2.0], 2, 1), vec![0.0, 1.0]);
    }

    #[test]
    fn silu_values() {
        assert_eq!(Activation::Silu.apply(0.0), 0.0);
        assert!((Activation::Silu.apply(1.0) - 0.7310585786300049).abs() < 1e-15);
    }
}
