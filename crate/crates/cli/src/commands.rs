use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use omnimotion_core::controller::{gaussian_smooth, speed_encode_with, write_condition_map};
use omnimotion_core::erp_ops::{horizontal_eight_specs, render_viewport, ViewportSpec};
use omnimotion_core::healpix::init_points;
use omnimotion_core::metrics::{clip_motion_score, objmc, quantile_filter};
use omnimotion_core::sme::{estimate_trajectories, extract_condition_trajectories, DragDocument, FilterPolicy};
use omnimotion_core::tracking::{load_trajectories, load_video_dir, save_trajectories, Metadata, Trajectory};
use omnimotion_core::{FrameGeometry, TrajectorySet, TOOL_VERSION};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::args::{
    Command, ConditionArgs, EstimateArgs, ExtractArgs, H8Args, InitPointsArgs, ObjmcArgs, ScoreClipsArgs, ViewportArgs,
};
use crate::error::{CliError, Result};

/// What a finished subcommand reports back to the terminal.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub warnings: Vec<String>,
}

impl Outcome {
    fn say(stdout: impl Into<String>) -> Self {
        Outcome {
            stdout: stdout.into(),
            warnings: Vec::new(),
        }
    }

    fn warn_if(mut self, w: Option<String>) -> Self {
        self.warnings.extend(w);
        self
    }
}

/// `{tool, version, command, seed, parameters}` embedded in every output.
pub fn run_meta(command: &str, seed: u64, parameters: Value) -> Metadata {
    let mut m = Metadata::new();
    m.insert("tool".into(), json!("omnimotion"));
    m.insert("version".into(), json!(TOOL_VERSION));
    m.insert("command".into(), json!(command));
    m.insert("seed".into(), json!(seed));
    m.insert("parameters".into(), parameters);
    m
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn check_input(path: &Path) -> Result<()> {
    fs::metadata(path).map(|_| ()).map_err(|e| CliError::io(path, e))
}

fn check_input_dir(path: &Path) -> Result<()> {
    match fs::metadata(path) {
        Ok(m) if m.is_dir() => Ok(()),
        Ok(_) => Err(CliError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotADirectory, "not a directory"),
        )),
        Err(e) => Err(CliError::io(path, e)),
    }
}

fn check_output(path: &Path) -> Result<()> {
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(dir) => check_input_dir(dir),
        None => Ok(()),
    }
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn load_erp(path: &Path) -> Result<(RgbImage, Option<String>)> {
    check_input(path)?;
    let img = image::open(path)?.to_rgb8();
    let g = FrameGeometry::new(img.width(), img.height(), 1)?;
    Ok((img, g.aspect_warning()))
}

fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png).map_err(CliError::from)
}

pub fn run(command: &Command, seed: u64) -> Result<Outcome> {
    match command {
        Command::InitPoints(a) => cmd_init_points(a, seed),
        Command::Extract(a) => cmd_extract(a, seed),
        Command::Estimate(a) => cmd_estimate(a, seed),
        Command::Condition(a) => cmd_condition(a, seed),
        Command::Objmc(a) => cmd_objmc(a, seed),
        Command::Viewport(a) => cmd_viewport(a, seed),
        Command::H8(a) => cmd_h8(a, seed),
        Command::ScoreClips(a) => cmd_score_clips(a, seed),
        Command::Serve(_) => Err(CliError::Usage("serve runs through crate::serve".into())),
    }
}

pub fn cmd_init_points(a: &InitPointsArgs, seed: u64) -> Result<Outcome> {
    check_output(&a.out)?;
    let g = FrameGeometry::new(a.width, a.height, 1)?;
    let points = init_points(a.n_side, &g)?;
    let meta = run_meta("init-points", seed, json!({ "n_side": a.n_side, "W": a.width, "H": a.height }));
    let set = TrajectorySet::new(g, points.into_iter().map(|p| Trajectory::new(vec![p])).collect())?.with_meta(meta);
    save_trajectories(&set, &a.out)?;
    Ok(Outcome::say(format!("{} seed points -> {}", set.len(), a.out.display())).warn_if(g.aspect_warning()))
}

pub fn cmd_extract(a: &ExtractArgs, seed: u64) -> Result<Outcome> {
    check_input_dir(&a.frames)?;
    check_output(&a.out)?;
    let policy = FilterPolicy {
        d_th: a.d_th.to_radians(),
        n_samp_min: a.n_samp_min,
        n_samp_max: a.n_samp_max,
        seed,
        top_fraction: a.top_fraction,
    };
    policy.validate()?;
    let video = load_video_dir(&a.frames)?;
    let warning = video.geometry().aspect_warning();
    let tracker = a.tracker.build();
    let set = extract_condition_trajectories(&video, a.n_side, &policy, tracker.as_ref())?;
    let meta = run_meta(
        "extract",
        seed,
        json!({
            "frames": path_str(&a.frames),
            "n_side": a.n_side,
            "d_th_rad": policy.d_th,
            "top_fraction": a.top_fraction,
            "n_samp": [a.n_samp_min, a.n_samp_max],
            "tracker": a.tracker.label(),
        }),
    );
    let set = set.with_meta(meta);
    save_trajectories(&set, &a.out)?;
    Ok(Outcome::say(format!("{} trajectories -> {}", set.len(), a.out.display())).warn_if(warning))
}

pub fn cmd_estimate(a: &EstimateArgs, seed: u64) -> Result<Outcome> {
    check_input(&a.pairs)?;
    check_output(&a.out)?;
    let doc = DragDocument::load(&a.pairs)?;
    let g = match a.frames {
        Some(l) => doc.geometry.with_frames(l)?,
        None => doc.geometry,
    };
    let set = estimate_trajectories(&doc.pairs, &g)?;
    let meta = run_meta("estimate", seed, json!({ "pairs": path_str(&a.pairs), "L": g.frames() }));
    let set = set.with_meta(meta);
    save_trajectories(&set, &a.out)?;
    Ok(Outcome::say(format!("{} trajectories of length {} -> {}", set.len(), g.frames(), a.out.display()))
        .warn_if(g.aspect_warning()))
}

pub fn cmd_condition(a: &ConditionArgs, seed: u64) -> Result<Outcome> {
    check_input(&a.trajectories)?;
    check_output(&a.out)?;
    let set = load_trajectories(&a.trajectories)?;
    let map = gaussian_smooth(&speed_encode_with(&set, a.raster.into()), a.sigma)?;
    write_condition_map(&map, &a.out)?;
    let bytes = fs::read(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let checksum = sha256_hex(&bytes);
    let mut meta = run_meta(
        "condition",
        seed,
        json!({
            "trajectories": path_str(&a.trajectories),
            "sigma": a.sigma,
            "raster": format!("{:?}", a.raster).to_lowercase(),
        }),
    );
    meta.insert("shape".into(), json!(map.shape()));
    meta.insert("sha256".into(), json!(checksum));
    write_json(&sidecar_path(&a.out), &Value::Object(meta.into_iter().collect()))?;
    let [l, c, h, w] = map.shape();
    Ok(Outcome::say(format!("{l}x{c}x{h}x{w} condition map -> {} (sha256 {checksum})", a.out.display()))
        .warn_if(set.geometry().aspect_warning()))
}

pub fn cmd_objmc(a: &ObjmcArgs, seed: u64) -> Result<Outcome> {
    check_input(&a.generated)?;
    check_input(&a.reference)?;
    if let Some(out) = &a.out {
        check_output(out)?;
    }
    let gen = load_trajectories(&a.generated)?;
    let reference = load_trajectories(&a.reference)?;
    let report = objmc(&gen, &reference)?;
    let meta = run_meta(
        "objmc",
        seed,
        json!({ "generated": path_str(&a.generated), "reference": path_str(&a.reference) }),
    );
    let mut value = serde_json::to_value(&report).expect("report serializes");
    value["meta"] = Value::Object(meta.into_iter().collect());
    if let Some(out) = &a.out {
        write_json(out, &value)?;
    }
    Ok(Outcome::say(serde_json::to_string(&value).expect("json values serialize")))
}

fn viewport_spec(yaw_deg: f64, pitch_deg: f64, fov_deg: f64, w: u32, h: u32) -> Result<ViewportSpec> {
    Ok(ViewportSpec::new(yaw_deg.to_radians(), pitch_deg.to_radians(), fov_deg.to_radians(), w, h)?)
}

pub fn cmd_viewport(a: &ViewportArgs, seed: u64) -> Result<Outcome> {
    check_output(&a.out)?;
    let spec = viewport_spec(a.yaw, a.pitch, a.fov, a.size, a.size)?;
    let (erp, warning) = load_erp(&a.erp)?;
    let view = render_viewport(&erp, &spec)?;
    save_png(&view, &a.out)?;
    let mut meta = run_meta("viewport", seed, json!({ "erp": path_str(&a.erp) }));
    meta.extend(spec.to_meta());
    write_json(&sidecar_path(&a.out), &Value::Object(meta.into_iter().collect()))?;
    Ok(Outcome::say(format!("viewport -> {}", a.out.display())).warn_if(warning))
}

/// `h8_yaw000.png` .. `h8_yaw315.png`.
pub fn h8_file_name(k: usize) -> String {
    format!("h8_yaw{:03}.png", k * 45)
}

pub fn cmd_h8(a: &H8Args, seed: u64) -> Result<Outcome> {
    let specs = horizontal_eight_specs(a.fov.to_radians(), a.size)?;
    let (erp, warning) = load_erp(&a.erp)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let views = omnimotion_core::erp_ops::horizontal_eight(&erp, a.fov.to_radians(), a.size)?;
    let mut files = Vec::new();
    for (k, view) in views.iter().enumerate() {
        let name = h8_file_name(k);
        save_png(view, &a.out_dir.join(&name))?;
        files.push(json!({ "file": name, "yaw_deg": specs[k].yaw().to_degrees() }));
    }
    let mut meta = run_meta(
        "h8",
        seed,
        json!({ "erp": path_str(&a.erp), "fov_deg": a.fov, "size": a.size }),
    );
    meta.insert("views".into(), Value::Array(files));
    write_json(&a.out_dir.join("meta.json"), &Value::Object(meta.into_iter().collect()))?;
    Ok(Outcome::say(format!("8 views -> {}", a.out_dir.display())).warn_if(warning))
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct ClipEntry {
    pub id: String,
    pub trajectories: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct Manifest {
    clips: Vec<ClipEntry>,
}

pub fn cmd_score_clips(a: &ScoreClipsArgs, seed: u64) -> Result<Outcome> {
    check_input(&a.manifest)?;
    check_output(&a.out)?;
    let text = fs::read_to_string(&a.manifest).map_err(|e| CliError::io(&a.manifest, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: a.manifest.clone(),
        reason: e.to_string(),
    })?;
    let base = a.manifest.parent().unwrap_or(Path::new(""));
    let mut scores = Vec::with_capacity(manifest.clips.len());
    for clip in &manifest.clips {
        let path = base.join(&clip.trajectories);
        check_input(&path)?;
        scores.push(clip_motion_score(&load_trajectories(&path)?)?);
    }
    let kept = quantile_filter(&scores, a.q)?;
    let entries: Vec<ClipEntry> = kept
        .iter()
        .map(|&i| ClipEntry {
            score: Some(scores[i]),
            ..manifest.clips[i].clone()
        })
        .collect();
    let dropped: Vec<&str> = (0..scores.len())
        .filter(|i| !kept.contains(i))
        .map(|i| manifest.clips[i].id.as_str())
        .collect();
    let meta = run_meta("score-clips", seed, json!({ "manifest": path_str(&a.manifest), "q": a.q }));
    write_json(&a.out, &json!({ "clips": entries, "dropped": dropped, "meta": meta }))?;
    Ok(Outcome::say(format!(
        "kept {} of {} clips -> {}",
        kept.len(),
        scores.len(),
        a.out.display()
    )))
}
