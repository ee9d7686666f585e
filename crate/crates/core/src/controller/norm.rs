use serde_json::json;

use crate::error::{Error, Result};
use crate::par;
use crate::tracking::Metadata;

use super::FeatureBlock;

/// Which axes the main-branch mean and variance are pooled over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReductionAxes {
    /// One statistic per channel, pooled over frames, rows, and columns.
    #[default]
    PerChannel,
    /// One statistic per (frame, channel) plane.
    PerFrameChannel,
    /// A single statistic over the whole tensor.
    Global,
}

impl ReductionAxes {
    pub fn name(self) -> &'static str {
        match self {
            ReductionAxes::PerChannel => "per_channel",
            ReductionAxes::PerFrameChannel => "per_frame_channel",
            ReductionAxes::Global => "global",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Self::PerChannel, Self::PerFrameChannel, Self::Global]
            .into_iter()
            .find(|a| a.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrossNormParams {
    pub gamma: f64,
    pub epsilon: f64,
    pub reduction_axes: ReductionAxes,
}

impl Default for CrossNormParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            epsilon: 1e-6,
            reduction_axes: ReductionAxes::PerChannel,
        }
    }
}

impl CrossNormParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::domain(format!("gamma must be positive, got {}", self.gamma)));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::domain(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn to_meta(&self) -> Metadata {
        let mut m = Metadata::new();
        m.insert(
            "cross_norm".into(),
            json!({
                "gamma": self.gamma,
                "epsilon": self.epsilon,
                "reduction_axes": self.reduction_axes.name(),
            }),
        );
        m
    }
}

/// Group id of flat index `(l, c, ..)` under `axes`, and the group count.
fn grouping(axes: ReductionAxes, shape: [usize; 4]) -> (usize, impl Fn(usize, usize) -> usize) {
    let [l, c, _, _] = shape;
    let count = match axes {
        ReductionAxes::PerChannel => c,
        ReductionAxes::PerFrameChannel => l * c,
        ReductionAxes::Global => 1,
    };
    (count, move |frame: usize, channel: usize| match axes {
        ReductionAxes::PerChannel => channel,
        ReductionAxes::PerFrameChannel => frame * c + channel,
        ReductionAxes::Global => 0,
    })
}

/// Population mean and variance of `main` per statistics group, two-pass.
pub(crate) fn group_stats(main: &FeatureBlock, axes: ReductionAxes) -> Vec<(f64, f64)> {
    let shape = main.shape();
    let [l, c, h, w] = shape;
    let plane = h * w;
    let (groups, group_of) = grouping(axes, shape);
    let members = |g: usize| -> Vec<&[f64]> {
        (0..l)
            .flat_map(|f| (0..c).map(move |ch| (f, ch)))
            .filter(|&(f, ch)| group_of(f, ch) == g)
            .map(|(f, ch)| &main.data()[(f * c + ch) * plane..(f * c + ch + 1) * plane])
            .collect()
    };
    par::map_range(groups, |g| {
        let planes = members(g);
        let n = (planes.len() * plane) as f64;
        let mean = planes.iter().flat_map(|p| p.iter()).sum::<f64>() / n;
        let var = planes
            .iter()
            .flat_map(|p| p.iter())
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / n;
        (mean, var)
    })
}

/// Normalizes `control` with the statistics of `main`:
/// `(z_c - mean) / sqrt(var + epsilon) * gamma`.
pub fn cross_normalize(control: &FeatureBlock, main: &FeatureBlock, params: &CrossNormParams) -> Result<FeatureBlock> {
    params.validate()?;
    let [lc, cc, hc, wc] = control.shape();
    let [lm, cm, _, _] = main.shape();
    let compatible = match params.reduction_axes {
        ReductionAxes::PerChannel => cc == cm,
        ReductionAxes::PerFrameChannel => cc == cm && lc == lm,
        ReductionAxes::Global => true,
    };
    if !compatible {
        return Err(Error::Shape(format!(
            "control {:?} and main {:?} disagree on the {} statistics axes",
            control.shape(),
            main.shape(),
            params.reduction_axes.name()
        )));
    }
    if main.data().is_empty() {
        return Err(Error::Shape("main feature is empty".into()));
    }
    let stats = group_stats(main, params.reduction_axes);
    let (_, group_of) = grouping(params.reduction_axes, control.shape());
    let plane = hc * wc;
    let mut out = control.data().to_vec();
    if plane > 0 {
        par::for_each_chunk_mut(&mut out, plane, |idx, dst| {
            let (mean, var) = stats[group_of(idx / cc, idx % cc)];
            let denom = (var + params.epsilon).sqrt();
            for v in dst {
                *v = (*v - mean) / denom * params.gamma;
            }
        });
    }
    FeatureBlock::new(control.shape(), out)
}

/// Elementwise sum of two equally shaped features.
pub fn inject(main: &FeatureBlock, control: &FeatureBlock) -> Result<FeatureBlock> {
    if main.shape() != control.shape() {
        return Err(Error::Shape(format!(
            "cannot inject {:?} into {:?}",
            control.shape(),
            main.shape()
        )));
    }
    let data = main.data().iter().zip(control.data()).map(|(a, b)| a + b).collect();
    FeatureBlock::new(main.shape(), data)
}
