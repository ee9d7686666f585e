//! Spherical motion estimation.
//!
//! Training side: seed points on a HEALPix grid, track them, keep the
//! trajectories whose endpoint great-circle distance exceeds a threshold, and
//! draw a few of them with probability proportional to that distance.
//!
//! Inference side: turn handle/target drag pairs into full trajectories by
//! spherical interpolation.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, FormatError, Result};
use crate::healpix::init_points;
use crate::par;
use crate::sphere::{
    erp_to_sphere, COINCIDENT_EPS, sphere_to_erp, spherical_distance, spherical_interpolate, ErpPoint,
    FrameGeometry, SpherePoint,
};
use crate::tracking::format::{check_format_tag, parse_xy, read_geometry};
use crate::tracking::{track, Metadata, Tracker, Trajectory, TrajectorySet, VideoFrames};

pub const DRAG_FORMAT: &str = "omnidrag/1";

/// Threshold in radians used when none is given.
pub const DEFAULT_D_TH: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FilterPolicy {
    /// Endpoint distance a trajectory must strictly exceed, in radians.
    pub d_th: f64,
    pub n_samp_min: usize,
    pub n_samp_max: usize,
    pub seed: u64,
    /// When set, keep the top `q` fraction by distance instead of thresholding.
    pub top_fraction: Option<f64>,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            d_th: DEFAULT_D_TH,
            n_samp_min: 1,
            n_samp_max: 10,
            seed: 0,
            top_fraction: None,
        }
    }
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=std::f64::consts::PI).contains(&self.d_th) {
            return Err(Error::domain(format!("d_th = {} outside [0, pi]", self.d_th)));
        }
        if self.n_samp_min == 0 || self.n_samp_min > self.n_samp_max {
            return Err(Error::domain(format!(
                "sampling bounds must satisfy 1 <= min <= max, got {}..={}",
                self.n_samp_min, self.n_samp_max
            )));
        }
        if let Some(q) = self.top_fraction {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::domain(format!("top fraction {q} outside (0, 1]")));
            }
        }
        Ok(())
    }
}

/// A user drag: where the motion starts and where it should end.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DragPair {
    pub handle: ErpPoint,
    pub target: ErpPoint,
}

/// Great-circle distance between a trajectory's first and last positions.
pub fn trajectory_sphere_distance(t: &Trajectory, g: &FrameGeometry) -> f64 {
    spherical_distance(lenient_sphere(t.first(), g), lenient_sphere(t.last(), g))
}

// Hidden points may sit outside the frame in external files; fold them back.
fn lenient_sphere(p: ErpPoint, g: &FrameGeometry) -> SpherePoint {
    erp_to_sphere(p, g).unwrap_or_else(|_| {
        let (w, h) = (g.width_f64(), g.height_f64());
        let mut x = p.x.rem_euclid(w);
        if x >= w {
            x = 0.0;
        }
        let y = p.y.clamp(0.0, f64::from_bits(h.to_bits() - 1));
        erp_to_sphere(ErpPoint::new(x, y), g).expect("folded into frame")
    })
}

pub fn trajectory_distances(set: &TrajectorySet) -> Vec<f64> {
    let g = *set.geometry();
    par::map_slice(set.trajectories(), |t| trajectory_sphere_distance(t, &g))
}

/// Keeps trajectories with `D > d_th` (or the top fraction, if configured),
/// preserving their order.
pub fn filter_trajectories(set: &TrajectorySet, policy: &FilterPolicy) -> TrajectorySet {
    let d = trajectory_distances(set);
    let keep: Vec<usize> = match policy.top_fraction {
        None => (0..d.len()).filter(|&j| d[j] > policy.d_th).collect(),
        Some(q) => {
            let count = ((q * d.len() as f64).ceil() as usize).min(d.len());
            let mut order: Vec<usize> = (0..d.len()).collect();
            order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
            let mut chosen = order[..count].to_vec();
            chosen.sort_unstable();
            chosen
        }
    };
    set.select(&keep)
}

/// Draws `N ~ U{n_samp_min..=n_samp_max}` and then `min(N, |set|)` distinct
/// trajectories, each draw proportional to the endpoint distance of what is
/// left. Falls back to uniform draws when the remaining weights are all equal
/// (including all zero). Members are returned in their original order.
pub fn sample_trajectories(set: &TrajectorySet, policy: &FilterPolicy) -> Result<TrajectorySet> {
    policy.validate()?;
    if set.is_empty() {
        return Err(Error::NoTrajectories(format!(
            "nothing to sample at d_th = {} rad",
            policy.d_th
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);
    let n_samp = rng.random_range(policy.n_samp_min..=policy.n_samp_max);
    let weights = trajectory_distances(set);
    let mut chosen = weighted_without_replacement(&weights, n_samp, &mut rng);
    chosen.sort_unstable();
    Ok(set.select(&chosen))
}

fn weighted_without_replacement(weights: &[f64], count: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..weights.len()).collect();
    let mut out = Vec::with_capacity(count.min(weights.len()));
    while out.len() < count && !remaining.is_empty() {
        let first = weights[remaining[0]];
        let uniform = remaining.iter().all(|&i| weights[i] == first);
        let pos = if uniform {
            rng.random_range(0..remaining.len())
        } else {
            let total: f64 = remaining.iter().map(|&i| weights[i]).sum();
            let mut r = rng.random::<f64>() * total;
            let mut pick = remaining.len() - 1;
            for (k, &i) in remaining.iter().enumerate() {
                if r < weights[i] {
                    pick = k;
                    break;
                }
                r -= weights[i];
            }
            // rounding can run past the end; take the last positive weight
            if weights[remaining[pick]] <= 0.0 {
                pick = remaining
                    .iter()
                    .rposition(|&i| weights[i] > 0.0)
                    .expect("non-uniform weights contain a positive entry");
            }
            pick
        };
        out.push(remaining.remove(pos));
    }
    out
}

/// One trajectory per drag pair, interpolated over `g.frames()` steps.
pub fn estimate_trajectories(pairs: &[DragPair], g: &FrameGeometry) -> Result<TrajectorySet> {
    g.require_motion()?;
    if pairs.is_empty() {
        return Err(Error::domain("no drag pairs given"));
    }
    let steps = g.frames() as usize;
    let trajectories = par::try_map_range(pairs.len(), |j| {
        let pair = &pairs[j];
        let locate = |what: &str, e: Error| Error::domain(format!("pair {j} {what}: {e}"));
        let h = erp_to_sphere(pair.handle, g).map_err(|e| locate("handle", e))?;
        let t = erp_to_sphere(pair.target, g).map_err(|e| locate("target", e))?;
        if spherical_distance(h, t) < COINCIDENT_EPS {
            return Ok(Trajectory::new(vec![pair.handle; steps]));
        }
        let path = spherical_interpolate(h, t, steps).map_err(|e| match e {
            Error::DegeneratePath(msg) => Error::DegeneratePath(format!("pair {j}: {msg}")),
            other => other,
        })?;
        let mut points: Vec<ErpPoint> = path.into_iter().map(|s| sphere_to_erp(s, g)).collect();
        // endpoints are the user's clicks, verbatim
        points[0] = pair.handle;
        points[steps - 1] = pair.target;
        Ok::<_, Error>(Trajectory::new(points))
    })?;
    TrajectorySet::new(*g, trajectories)
}

/// init -> track -> filter -> sample.
pub fn extract_condition_trajectories(
    video: &VideoFrames,
    n_side: u32,
    policy: &FilterPolicy,
    tracker: &dyn Tracker,
) -> Result<TrajectorySet> {
    policy.validate()?;
    let seeds = init_points(n_side, video.geometry())?;
    let tracked = track(video, &seeds, tracker)?;
    let kept = filter_trajectories(&tracked, policy);
    if kept.is_empty() {
        return Err(Error::NoTrajectories(format!(
            "{} tracked, none with endpoint distance > {} rad",
            tracked.len(),
            policy.d_th
        )));
    }
    sample_trajectories(&kept, policy)
}

/// The `omnidrag/1` document:
/// `{"format":"omnidrag/1","W":..,"H":..,"L":..,"pairs":[{"handle":[x,y],"target":[x,y]}]}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DragDocument {
    pub geometry: FrameGeometry,
    pub pairs: Vec<DragPair>,
    pub meta: Option<Metadata>,
}

#[derive(Serialize)]
struct PairOut {
    handle: [f64; 2],
    target: [f64; 2],
}

#[derive(Serialize)]
struct DragOut<'a> {
    format: &'static str,
    #[serde(rename = "W")]
    w: u32,
    #[serde(rename = "H")]
    h: u32,
    #[serde(rename = "L")]
    l: u32,
    pairs: Vec<PairOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    meta: Option<&'a Metadata>,
}

impl DragDocument {
    pub fn to_json(&self) -> String {
        let g = self.geometry;
        let doc = DragOut {
            format: DRAG_FORMAT,
            w: g.width(),
            h: g.height(),
            l: g.frames(),
            pairs: self
                .pairs
                .iter()
                .map(|p| PairOut {
                    handle: [p.handle.x, p.handle.y],
                    target: [p.target.x, p.target.y],
                })
                .collect(),
            meta: self.meta.as_ref(),
        };
        let mut s = serde_json::to_string(&doc).expect("finite drag values serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        let root: Value =
            serde_json::from_str(text).map_err(|e| FormatError::Malformed(e.to_string()))?;
        let obj = root
            .as_object()
            .ok_or_else(|| FormatError::Malformed("top level is not an object".into()))?;
        check_format_tag(obj, DRAG_FORMAT)?;
        let geometry = read_geometry(obj)?;
        let list = obj
            .get("pairs")
            .and_then(Value::as_array)
            .ok_or_else(|| FormatError::Malformed("missing \"pairs\" list".into()))?;
        let mut pairs = Vec::with_capacity(list.len());
        for (j, item) in list.iter().enumerate() {
            let field = |name: &str| {
                item.get(name).and_then(parse_xy).ok_or_else(|| FormatError::BadRecord {
                    record: j,
                    reason: format!("\"{name}\" must be [x, y]"),
                })
            };
            let pair = DragPair {
                handle: field("handle")?,
                target: field("target")?,
            };
            for (name, p) in [("handle", pair.handle), ("target", pair.target)] {
                if !p.in_bounds(&geometry) {
                    return Err(FormatError::Geometry(format!(
                        "pair {j} {name} ({}, {}) outside {}x{}",
                        p.x,
                        p.y,
                        geometry.width(),
                        geometry.height()
                    )));
                }
            }
            pairs.push(pair);
        }
        let meta = match obj.get("meta") {
            None | Some(Value::Null) => None,
            Some(Value::Object(m)) => Some(m.clone().into_iter().collect()),
            Some(_) => return Err(FormatError::Malformed("\"meta\" must be an object".into())),
        };
        Ok(Self {
            geometry,
            pairs,
            meta,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_json(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn g(l: u32) -> FrameGeometry {
        FrameGeometry::new(640, 320, l).unwrap()
    }

    /// Trajectories along the equator from x=320 moving `dx` columns each.
    fn equatorial_set(dxs: &[f64]) -> TrajectorySet {
        let trajectories = dxs
            .iter()
            .map(|&dx| Trajectory::new(vec![ErpPoint::new(320.0, 160.0), ErpPoint::new(320.0 + dx, 160.0)]))
            .collect();
        TrajectorySet::new(g(2), trajectories).unwrap()
    }

    fn dx_for(rad: f64) -> f64 {
        rad / std::f64::consts::TAU * 640.0
    }

    #[test]
    fn distance_of_constant_and_quarter() {
        let still = Trajectory::new(vec![ErpPoint::new(10.0, 20.0); 3]);
        assert_eq!(trajectory_sphere_distance(&still, &g(3)), 0.0);
        let quarter = Trajectory::new(vec![ErpPoint::new(320.0, 160.0), ErpPoint::new(480.0, 160.0)]);
        assert_abs_diff_eq!(trajectory_sphere_distance(&quarter, &g(2)), FRAC_PI_2, epsilon = 1e-14);
    }

    #[test]
    fn filter_is_strict_and_ordered() {
        let set = equatorial_set(&[dx_for(0.5), dx_for(0.2), dx_for(0.01)]);
        let policy = FilterPolicy {
            d_th: 0.1,
            ..Default::default()
        };
        let kept = filter_trajectories(&set, &policy);
        assert_eq!(kept.trajectories(), &set.trajectories()[..2]);

        let zero = FilterPolicy {
            d_th: 0.0,
            ..Default::default()
        };
        let with_still = equatorial_set(&[0.0, 3.0, 0.0, 1.0]);
        assert_eq!(filter_trajectories(&with_still, &zero).len(), 2);

        let max = FilterPolicy {
            d_th: std::f64::consts::PI,
            ..Default::default()
        };
        assert!(filter_trajectories(&set, &max).is_empty());
    }

    #[test]
    fn top_fraction_mode() {
        let set = equatorial_set(&[1.0, 5.0, 3.0, 2.0]);
        let policy = FilterPolicy {
            top_fraction: Some(0.5),
            ..Default::default()
        };
        let kept = filter_trajectories(&set, &policy);
        assert_eq!(kept.trajectories(), &[set.trajectories()[1].clone(), set.trajectories()[2].clone()]);
    }

    #[test]
    fn sampling_single_and_empty() {
        let set = equatorial_set(&[4.0]);
        let out = sample_trajectories(&set, &FilterPolicy::default()).unwrap();
        assert_eq!(out, set);
        let empty = TrajectorySet::empty(g(2));
        let err = sample_trajectories(&empty, &FilterPolicy::default()).unwrap_err();
        assert!(err.to_string().contains("lower d_th"), "{err}");
    }

    #[test]
    fn sampling_takes_all_when_short() {
        let set = equatorial_set(&[4.0, 2.0, 1.0]);
        let policy = FilterPolicy {
            n_samp_min: 10,
            n_samp_max: 10,
            ..Default::default()
        };
        assert_eq!(sample_trajectories(&set, &policy).unwrap().len(), 3);
    }

    #[test]
    fn zero_weights_sample_uniformly() {
        let picks: Vec<usize> = (0..4000)
            .map(|s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                weighted_without_replacement(&[0.0, 0.0, 0.0, 0.0], 1, &mut rng)[0]
            })
            .collect();
        for k in 0..4 {
            let n = picks.iter().filter(|&&p| p == k).count();
            assert!((800..1200).contains(&n), "bucket {k}: {n}");
        }
    }

    #[test]
    fn zero_weight_members_are_never_drawn_first() {
        for s in 0..500 {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let pick = weighted_without_replacement(&[0.0, 1.0, 0.0, 2.0], 2, &mut rng);
            assert!(pick.contains(&1) && pick.contains(&3), "{pick:?}");
        }
    }

    #[test]
    fn three_to_one_frequency() {
        let d = dx_for(0.1);
        let set = equatorial_set(&[3.0 * d, d]);
        let draws = 100_000u64;
        let first = (0..draws)
            .filter(|&s| {
                let policy = FilterPolicy {
                    n_samp_min: 1,
                    n_samp_max: 1,
                    seed: s,
                    ..Default::default()
                };
                let out = sample_trajectories(&set, &policy).unwrap();
                out.trajectories()[0] == set.trajectories()[0]
            })
            .count();
        let freq = first as f64 / draws as f64;
        assert!((freq - 0.75).abs() <= 0.02, "freq = {freq}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let set = equatorial_set(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let policy = FilterPolicy {
            seed: 42,
            ..Default::default()
        };
        let a = sample_trajectories(&set, &policy).unwrap();
        let b = sample_trajectories(&set, &policy).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn estimate_equator_ramp() {
        let pairs = [DragPair {
            handle: ErpPoint::new(320.0, 160.0),
            target: ErpPoint::new(480.0, 160.0),
        }];
        let set = estimate_trajectories(&pairs, &g(3)).unwrap();
        let t = &set.trajectories()[0];
        for (p, x) in t.points.iter().zip([320.0, 400.0, 480.0]) {
            assert_abs_diff_eq!(p.x, x, epsilon = 1e-9);
            assert_eq!(p.y, 160.0);
        }
    }

    #[test]
    fn estimate_degenerate_and_antipodal() {
        let same = DragPair {
            handle: ErpPoint::new(100.0, 50.0),
            target: ErpPoint::new(100.0, 50.0),
        };
        let set = estimate_trajectories(&[same], &g(5)).unwrap();
        assert!(set.trajectories()[0].points.iter().all(|p| *p == same.handle));

        let anti = DragPair {
            handle: ErpPoint::new(0.0, 160.0),
            target: ErpPoint::new(320.0, 160.0),
        };
        match estimate_trajectories(&[same, anti], &g(5)) {
            Err(Error::DegeneratePath(msg)) => assert!(msg.contains("pair 1"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn drag_document_round_trip_and_errors() {
        let doc = DragDocument {
            geometry: g(16),
            pairs: vec![DragPair {
                handle: ErpPoint::new(1.5, 2.25),
                target: ErpPoint::new(600.0, 300.125),
            }],
            meta: None,
        };
        let text = doc.to_json();
        assert_eq!(
            text,
            "{\"format\":\"omnidrag/1\",\"W\":640,\"H\":320,\"L\":16,\"pairs\":[{\"handle\":[1.5,2.25],\"target\":[600.0,300.125]}]}\n"
        );
        let back = DragDocument::from_json(&text).unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.to_json(), text);

        let bad = text.replace("\"handle\":[1.5,2.25]", "\"handle\":[1.5]");
        assert!(matches!(DragDocument::from_json(&bad), Err(FormatError::BadRecord { record: 0, .. })));
        let outside = text.replace("600.0", "640.0");
        assert!(matches!(DragDocument::from_json(&outside), Err(FormatError::Geometry(_))));
    }
}
