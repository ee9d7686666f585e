//! The `omnitraj/1` trajectory document.
//!
//! ```json
//! {"format":"omnitraj/1","W":640,"H":320,"L":3,
//!  "trajectories":[[[x,y],[x,y],[x,y]]],
//!  "visible":[[true,true,false]],
//!  "meta":{"seed":7}}
//! ```
//!
//! `visible` is written only when some point is hidden; `meta` only when set.
//! Numbers are written as the shortest decimal that reads back to the same
//! `f64`, so `save(load(save(x)))` reproduces the bytes of `save(x)`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, FormatError, Result};
use crate::sphere::{ErpPoint, FrameGeometry};

use super::{Trajectory, TrajectorySet};

pub const TRAJECTORY_FORMAT: &str = "omnitraj/1";

/// Free-form provenance (tool version, seed, parameters), sorted by key.
pub type Metadata = BTreeMap<String, Value>;

#[derive(Serialize)]
struct Doc<'a> {
    format: &'static str,
    #[serde(rename = "W")]
    w: u32,
    #[serde(rename = "H")]
    h: u32,
    #[serde(rename = "L")]
    l: u32,
    trajectories: Vec<Vec<[f64; 2]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    visible: Option<Vec<&'a [bool]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<&'a Metadata>,
}

impl TrajectorySet {
    pub fn to_json(&self) -> String {
        let g = self.geometry();
        let any_hidden = self.trajectories().iter().any(|t| !t.all_visible());
        let doc = Doc {
            format: TRAJECTORY_FORMAT,
            w: g.width(),
            h: g.height(),
            l: g.frames(),
            trajectories: self
                .trajectories()
                .iter()
                .map(|t| t.points.iter().map(|p| [p.x, p.y]).collect())
                .collect(),
            visible: any_hidden
                .then(|| self.trajectories().iter().map(|t| t.visible.as_slice()).collect()),
            meta: self.meta.as_ref(),
        };
        let mut s = serde_json::to_string(&doc).expect("finite trajectory values serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let root: Value =
            serde_json::from_str(text).map_err(|e| FormatError::Malformed(e.to_string()))?;
        let obj = root
            .as_object()
            .ok_or_else(|| FormatError::Malformed("top level is not an object".into()))?;
        check_format_tag(obj, TRAJECTORY_FORMAT)?;
        let geometry = read_geometry(obj)?;
        let l = geometry.frames() as usize;

        let records = obj
            .get("trajectories")
            .and_then(Value::as_array)
            .ok_or_else(|| FormatError::Malformed("missing \"trajectories\" list".into()))?;
        let visible = match obj.get("visible") {
            None | Some(Value::Null) => None,
            Some(Value::Array(v)) => {
                if v.len() != records.len() {
                    return Err(FormatError::Malformed(format!(
                        "{} visibility records for {} trajectories",
                        v.len(),
                        records.len()
                    )));
                }
                Some(v)
            }
            Some(_) => return Err(FormatError::Malformed("\"visible\" must be a list".into())),
        };

        let mut trajectories = Vec::with_capacity(records.len());
        for (j, rec) in records.iter().enumerate() {
            let pts = rec.as_array().ok_or_else(|| FormatError::BadRecord {
                record: j,
                reason: "not a list of points".into(),
            })?;
            if pts.len() != l {
                return Err(FormatError::LengthMismatch {
                    record: j,
                    found: pts.len(),
                    expected: l,
                });
            }
            let points = pts
                .iter()
                .map(|p| parse_xy(p).ok_or_else(|| FormatError::BadRecord {
                    record: j,
                    reason: format!("point {p} is not [x, y]"),
                }))
                .collect::<Result<Vec<_>, _>>()?;
            let vis = match visible {
                None => vec![true; l],
                Some(v) => {
                    let flags = v[j].as_array().ok_or_else(|| FormatError::BadRecord {
                        record: j,
                        reason: "visibility is not a list".into(),
                    })?;
                    if flags.len() != l {
                        return Err(FormatError::LengthMismatch {
                            record: j,
                            found: flags.len(),
                            expected: l,
                        });
                    }
                    flags
                        .iter()
                        .map(|f| f.as_bool().ok_or_else(|| FormatError::BadRecord {
                            record: j,
                            reason: "visibility flag is not a boolean".into(),
                        }))
                        .collect::<Result<Vec<_>, _>>()?
                }
            };
            for (i, (p, &v)) in points.iter().zip(&vis).enumerate() {
                if v && !p.in_bounds(&geometry) {
                    return Err(FormatError::Geometry(format!(
                        "record {j} frame {i}: ({}, {}) outside {}x{}",
                        p.x,
                        p.y,
                        geometry.width(),
                        geometry.height()
                    )));
                }
            }
            trajectories.push(Trajectory {
                points,
                visible: vis,
            });
        }

        let meta = match obj.get("meta") {
            None | Some(Value::Null) => None,
            Some(Value::Object(m)) => Some(m.clone().into_iter().collect()),
            Some(_) => return Err(FormatError::Malformed("\"meta\" must be an object".into())),
        };
        let set = TrajectorySet::new(geometry, trajectories)
            .map_err(|e| FormatError::Malformed(e.to_string()))?;
        Ok(TrajectorySet { meta, ..set })
    }
}

pub(crate) fn check_format_tag(
    obj: &serde_json::Map<String, Value>,
    expected: &'static str,
) -> Result<(), FormatError> {
    match obj.get("format") {
        Some(Value::String(s)) if s == expected => Ok(()),
        Some(Value::String(s)) => Err(FormatError::UnsupportedFormat {
            found: s.clone(),
            expected,
        }),
        _ => Err(FormatError::UnsupportedFormat {
            found: String::new(),
            expected,
        }),
    }
}

pub(crate) fn read_geometry(obj: &serde_json::Map<String, Value>) -> Result<FrameGeometry, FormatError> {
    let dim = |key: &str| -> Result<u32, FormatError> {
        obj.get(key)
            .and_then(Value::as_u64)
            .filter(|&v| v > 0 && v <= u64::from(u32::MAX))
            .map(|v| v as u32)
            .ok_or_else(|| FormatError::Geometry(format!("\"{key}\" must be a positive integer")))
    };
    let (w, h, l) = (dim("W")?, dim("H")?, dim("L")?);
    FrameGeometry::new(w, h, l).map_err(|e| FormatError::Geometry(e.to_string()))
}

pub(crate) fn parse_xy(v: &Value) -> Option<ErpPoint> {
    let a = v.as_array()?;
    if a.len() != 2 {
        return None;
    }
    let x = a[0].as_f64()?;
    let y = a[1].as_f64()?;
    (x.is_finite() && y.is_finite()).then_some(ErpPoint::new(x, y))
}

pub fn save_trajectories(set: &TrajectorySet, path: &Path) -> Result<()> {
    std::fs::write(path, set.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_trajectories(path: &Path) -> Result<TrajectorySet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(TrajectorySet::from_json(&text)?)
}
