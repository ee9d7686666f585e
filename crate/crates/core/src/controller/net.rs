use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::par;

use super::conv::{Activation, Conv2d};
use super::{ConditionMap, FeatureBlock};

/// Channel count after the lift.
pub const LIFT_CHANNELS: usize = 320;
const HIDDEN_CHANNELS: usize = 64;
const KERNEL: usize = 3;
const WEIGHTS_MAGIC: &str = "OMNIWTS1";

/// conv -> activation -> conv, taking the 2-channel speed map to
/// [`LIFT_CHANNELS`] channels.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftWeights {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
    pub activation: Activation,
}

impl LiftWeights {
    pub fn seeded(hidden: usize, out_channels: usize, seed: u64) -> Self {
        Self {
            conv1: Conv2d::seeded(2, hidden, KERNEL, seed),
            conv2: Conv2d::seeded(hidden, out_channels, KERNEL, seed.wrapping_add(1)),
            activation: Activation::Silu,
        }
    }

    pub fn zeros(hidden: usize, out_channels: usize) -> Self {
        Self {
            conv1: Conv2d::zeros(2, hidden, KERNEL),
            conv2: Conv2d::zeros(hidden, out_channels, KERNEL),
            activation: Activation::Silu,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.conv2.out_channels()
    }

    fn check(&self) -> Result<()> {
        if self.conv1.out_channels() != self.conv2.in_channels() {
            return Err(Error::Shape(format!(
                "lift conv1 gives {} channels but conv2 takes {}",
                self.conv1.out_channels(),
                self.conv2.in_channels()
            )));
        }
        Ok(())
    }
}

/// `x + conv2(act(conv1(x)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct ResBlock {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
}

impl ResBlock {
    /// Random first convolution, zero second one.
    pub fn seeded(channels: usize, seed: u64) -> Self {
        Self {
            conv1: Conv2d::seeded(channels, channels, KERNEL, seed),
            conv2: Conv2d::zeros(channels, channels, KERNEL),
        }
    }

    fn check(&self, channels: usize, k: usize) -> Result<()> {
        let (a, b) = (&self.conv1, &self.conv2);
        if a.in_channels() != channels || a.out_channels() != b.in_channels() || b.out_channels() != channels {
            return Err(Error::Shape(format!(
                "res block {k} is {}->{}->{}->{} but the input has {channels} channels",
                a.in_channels(),
                a.out_channels(),
                b.in_channels(),
                b.out_channels()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControlBlockWeights {
    pub blocks: Vec<ResBlock>,
    pub activation: Activation,
}

impl ControlBlockWeights {
    /// Two blocks with zero-initialized final convolutions.
    pub fn seeded(channels: usize, seed: u64) -> Self {
        Self {
            blocks: (0..2).map(|k| ResBlock::seeded(channels, seed.wrapping_add(k))).collect(),
            activation: Activation::Silu,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ControllerWeights {
    pub lift: LiftWeights,
    pub control: ControlBlockWeights,
}

impl ControllerWeights {
    pub fn seeded(seed: u64) -> Self {
        Self::seeded_with(HIDDEN_CHANNELS, LIFT_CHANNELS, seed)
    }

    pub fn seeded_with(hidden: usize, channels: usize, seed: u64) -> Self {
        Self {
            lift: LiftWeights::seeded(hidden, channels, seed),
            control: ControlBlockWeights::seeded(channels, seed.wrapping_add(100)),
        }
    }

    fn tensors(&self) -> Vec<(String, Vec<usize>, &[f32])> {
        let mut convs = vec![("lift.conv1".to_string(), &self.lift.conv1), ("lift.conv2".to_string(), &self.lift.conv2)];
        for (k, b) in self.control.blocks.iter().enumerate() {
            convs.push((format!("control.{k}.conv1"), &b.conv1));
            convs.push((format!("control.{k}.conv2"), &b.conv2));
        }
        let mut out = Vec::new();
        for (name, c) in convs {
            let k = c.kernel();
            out.push((
                format!("{name}.weight"),
                vec![c.out_channels(), c.in_channels(), k, k],
                c.weight(),
            ));
            if let Some(b) = c.bias() {
                out.push((format!("{name}.bias"), vec![c.out_channels()], b));
            }
        }
        out
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let tensors = self.tensors();
        let mut header = format!(
            "{WEIGHTS_MAGIC}\nactivation lift {}\nactivation control {}\n",
            self.lift.activation.name(),
            self.control.activation.name()
        );
        for (name, dims, _) in &tensors {
            let dims: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
            header.push_str(&format!("tensor {name} {}\n", dims.join(" ")));
        }
        header.push_str("end\n");
        let mut bytes = header.into_bytes();
        for (_, _, data) in &tensors {
            for v in data.iter() {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        bytes
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, FormatError> {
        let magic = format!("{WEIGHTS_MAGIC}\n");
        if !bytes.starts_with(magic.as_bytes()) {
            return Err(FormatError::BadMagic {
                expected: WEIGHTS_MAGIC,
            });
        }
        let end = find_subslice(bytes, b"\nend\n")
            .ok_or_else(|| FormatError::Malformed("weight header has no 'end' line".into()))?;
        let header = std::str::from_utf8(&bytes[magic.len()..end + 1])
            .map_err(|_| FormatError::Malformed("weight header is not UTF-8".into()))?;
        let payload = &bytes[end + 5..];

        let mut activations = BTreeMap::new();
        let mut order: Vec<(String, Vec<usize>)> = Vec::new();
        for (n, line) in header.lines().enumerate() {
            let fields: Vec<&str> = line.split_whitespace().collect();
            let bad = |reason: &str| FormatError::BadRecord {
                record: n,
                reason: format!("{reason}: {line:?}"),
            };
            match fields.as_slice() {
                ["activation", which, name] => {
                    let act = Activation::from_name(name).ok_or_else(|| bad("unknown activation"))?;
                    activations.insert(which.to_string(), act);
                }
                ["tensor", name, dims @ ..] if !dims.is_empty() => {
                    let dims = dims
                        .iter()
                        .map(|d| d.parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad("bad dimension"))?;
                    order.push((name.to_string(), dims));
                }
                _ => return Err(bad("unrecognized header line")),
            }
        }

        let expected: usize = order.iter().map(|(_, d)| d.iter().product::<usize>() * 4).sum();
        if payload.len() < expected {
            return Err(FormatError::Truncated {
                expected,
                found: payload.len(),
            });
        }
        if payload.len() > expected {
            return Err(FormatError::TrailingData(payload.len() - expected));
        }
        let mut tensors: BTreeMap<String, (Vec<usize>, Vec<f32>)> = BTreeMap::new();
        let mut offset = 0;
        for (name, dims) in order {
            let n: usize = dims.iter().product();
            let data = payload[offset..offset + 4 * n]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            offset += 4 * n;
            if tensors.insert(name.clone(), (dims, data)).is_some() {
                return Err(FormatError::Malformed(format!("tensor {name} listed twice")));
            }
        }

        let take_conv = |tensors: &mut BTreeMap<String, (Vec<usize>, Vec<f32>)>, prefix: &str| -> std::result::Result<Conv2d, FormatError> {
            let (dims, weight) = tensors
                .remove(&format!("{prefix}.weight"))
                .ok_or_else(|| FormatError::Malformed(format!("missing tensor {prefix}.weight")))?;
            let [o, i, ky, kx] = dims[..] else {
                return Err(FormatError::Malformed(format!("{prefix}.weight must have 4 dimensions")));
            };
            if ky != kx {
                return Err(FormatError::Malformed(format!("{prefix}.weight kernel is not square")));
            }
            let bias = match tensors.remove(&format!("{prefix}.bias")) {
                Some((d, b)) if d == [o] => Some(b),
                Some(_) => return Err(FormatError::Malformed(format!("{prefix}.bias must be [{o}]"))),
                None => None,
            };
            Conv2d::new(i, o, ky, weight, bias).map_err(|e| FormatError::Malformed(format!("{prefix}: {e}")))
        };
        let lift = LiftWeights {
            conv1: take_conv(&mut tensors, "lift.conv1")?,
            conv2: take_conv(&mut tensors, "lift.conv2")?,
            activation: activations.get("lift").copied().unwrap_or_default(),
        };
        let mut blocks = Vec::new();
        while tensors.contains_key(&format!("control.{}.conv1.weight", blocks.len())) {
            let k = blocks.len();
            blocks.push(ResBlock {
                conv1: take_conv(&mut tensors, &format!("control.{k}.conv1"))?,
                conv2: take_conv(&mut tensors, &format!("control.{k}.conv2"))?,
            });
        }
        if let Some(name) = tensors.keys().next() {
            return Err(FormatError::Malformed(format!("unexpected tensor {name}")));
        }
        let weights = Self {
            lift,
            control: ControlBlockWeights {
                blocks,
                activation: activations.get("control").copied().unwrap_or_default(),
            },
        };
        weights.lift.check().map_err(|e| FormatError::Malformed(e.to_string()))?;
        for (k, b) in weights.control.blocks.iter().enumerate() {
            b.check(weights.lift.out_channels(), k)
                .map_err(|e| FormatError::Malformed(e.to_string()))?;
        }
        Ok(weights)
    }
}

fn find_subslice(hay: &[u8], needle: &[u8]) -> Option<usize> {
    hay.windows(needle.len()).position(|w| w == needle)
}

pub fn save_weights(weights: &ControllerWeights, path: &Path) -> Result<()> {
    std::fs::write(path, weights.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: &Path) -> Result<ControllerWeights> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(ControllerWeights::from_bytes(&bytes)?)
}

/// Lifts a 2-channel speed map to `weights.out_channels()` channels,
/// frame by frame.
pub fn channel_lift(map: &ConditionMap, weights: &LiftWeights) -> Result<ConditionMap> {
    weights.check()?;
    if map.channels() != weights.conv1.in_channels() {
        return Err(Error::Shape(format!(
            "lift expects {} input channels, map has {}",
            weights.conv1.in_channels(),
            map.channels()
        )));
    }
    let [l, c, h, w] = map.shape();
    let frames = par::map_range(l, |f| {
        let src = &map.data()[f * c * h * w..(f + 1) * c * h * w];
        let x: Vec<f64> = src.iter().map(|&v| f64::from(v)).collect();
        let mut hidden = weights.conv1.forward(&x, h, w);
        for v in &mut hidden {
            *v = weights.activation.apply(*v);
        }
        weights.conv2.forward(&hidden, h, w)
    });
    let data = frames.into_iter().flatten().map(|v| v as f32).collect();
    ConditionMap::from_vec(*map.geometry(), weights.out_channels(), data)
}

/// Runs the residual control blocks over a lifted map.
pub fn control_blocks(map: &ConditionMap, weights: &ControlBlockWeights) -> Result<FeatureBlock> {
    let [l, c, h, w] = map.shape();
    for (k, b) in weights.blocks.iter().enumerate() {
        b.check(c, k)?;
    }
    let per_frame = c * h * w;
    let mut data: Vec<f64> = map.data().iter().map(|&v| f64::from(v)).collect();
    for block in &weights.blocks {
        if block.conv2.is_zero() {
            continue;
        }
        par::for_each_chunk_mut(&mut data, per_frame, |_, frame| {
            let mut hidden = block.conv1.forward(frame, h, w);
            for v in &mut hidden {
                *v = weights.activation.apply(*v);
            }
            let residual = block.conv2.forward(&hidden, h, w);
            for (x, r) in frame.iter_mut().zip(residual) {
                *x += r;
            }
        });
    }
    FeatureBlock::new([l, c, h, w], data)
}
