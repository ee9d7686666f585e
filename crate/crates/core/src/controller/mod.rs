//! Motion-conditioning path of the controller: trajectories become per-pixel
//! speed maps, are smoothed and lifted to many channels, pass through two
//! residual blocks, and are normalized against the main branch's statistics
//! before being added to it.

mod cnd;
mod conv;
mod net;
mod norm;
mod speed;

pub use cnd::{read_condition_map, write_condition_map, CONDITION_MAGIC};
pub use conv::{Activation, Conv2d};
pub use net::{
    channel_lift, control_blocks, load_weights, save_weights, ControlBlockWeights, ControllerWeights,
    LiftWeights, ResBlock, LIFT_CHANNELS,
};
pub use norm::{cross_normalize, inject, CrossNormParams, ReductionAxes};
pub use speed::{gaussian_smooth, speed_encode, speed_encode_with, Rasterization};

use crate::error::{Error, Result};
use crate::sphere::FrameGeometry;

/// Per-frame, per-pixel conditioning planes, `L x C x H x W`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionMap {
    geometry: FrameGeometry,
    channels: usize,
    data: Vec<f32>,
}

impl ConditionMap {
    pub fn zeros(geometry: FrameGeometry, channels: usize) -> Self {
        let n = geometry.frames() as usize * channels * plane_len(&geometry);
        Self {
            geometry,
            channels,
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(geometry: FrameGeometry, channels: usize, data: Vec<f32>) -> Result<Self> {
        let n = geometry.frames() as usize * channels * plane_len(&geometry);
        if channels == 0 || data.len() != n {
            return Err(Error::Shape(format!(
                "condition map L={} C={channels} H={} W={} needs {n} values, got {}",
                geometry.frames(),
                geometry.height(),
                geometry.width(),
                data.len()
            )));
        }
        Ok(Self {
            geometry,
            channels,
            data,
        })
    }

    pub fn geometry(&self) -> &FrameGeometry {
        &self.geometry
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// `(L, C, H, W)`.
    pub fn shape(&self) -> [usize; 4] {
        [
            self.geometry.frames() as usize,
            self.channels,
            self.geometry.height() as usize,
            self.geometry.width() as usize,
        ]
    }

    #[inline]
    pub fn index(&self, frame: usize, channel: usize, y: usize, x: usize) -> usize {
        let [_, c, h, w] = self.shape();
        ((frame * c + channel) * h + y) * w + x
    }

    pub fn get(&self, frame: usize, channel: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(frame, channel, y, x)]
    }

    pub fn scaled(&self, k: f32) -> Self {
        Self {
            data: self.data.iter().map(|v| v * k).collect(),
            ..self.clone()
        }
    }
}

fn plane_len(g: &FrameGeometry) -> usize {
    g.width() as usize * g.height() as usize
}

/// Generic `L x C x H x W` feature tensor in `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureBlock {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl FeatureBlock {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if data.len() != n {
            return Err(Error::Shape(format!(
                "feature block {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("non-finite feature value at flat index {i}")));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_condition(map: &ConditionMap) -> Self {
        Self {
            shape: map.shape(),
            data: map.data().iter().map(|&v| f64::from(v)).collect(),
        }
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            shape: self.shape,
            data: self.data.iter().map(|v| v * k).collect(),
        }
    }
}
