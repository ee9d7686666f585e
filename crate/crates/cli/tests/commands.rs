use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use omnimotion_core::controller::read_condition_map;
use omnimotion_core::metrics::clip_motion_score;
use omnimotion_core::sme::{trajectory_distances, DragDocument, DragPair};
use omnimotion_core::synth::{static_video, textured_rgb, yaw_video};
use omnimotion_core::tracking::{load_trajectories, save_trajectories, save_video_dir, Trajectory};
use omnimotion_core::{ErpPoint, FrameGeometry, TrajectorySet};
use serde_json::Value;

fn omni(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_omnimotion"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = omni(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn drag_file(dir: &Path, name: &str, g: FrameGeometry, pairs: &[((f64, f64), (f64, f64))]) -> PathBuf {
    let doc = DragDocument {
        geometry: g,
        pairs: pairs
            .iter()
            .map(|&((hx, hy), (tx, ty))| DragPair {
                handle: ErpPoint::new(hx, hy),
                target: ErpPoint::new(tx, ty),
            })
            .collect(),
        meta: None,
    };
    let path = dir.join(name);
    doc.save(&path).unwrap();
    path
}

#[test]
fn init_points_writes_twelve_seeds_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for p in [&a, &b] {
        ok(&["init-points", "--n-side", "1", "--width", "640", "--height", "320", "--out", s(p)]);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let set = load_trajectories(&a).unwrap();
    assert_eq!((set.len(), set.geometry().frames()), (12, 1));
    let meta = set.meta.as_ref().unwrap();
    assert_eq!(meta["seed"], 0);
    assert_eq!(meta["version"], omnimotion_core::TOOL_VERSION);
    assert_eq!(meta["parameters"]["n_side"], 1);

    let bad = omni(&["init-points", "--n-side", "0", "--width", "640", "--height", "320", "--out", s(&a)]);
    assert_eq!(bad.status.code(), Some(4));
    assert!(stderr(&bad).contains("n_side"));
}

#[test]
fn aspect_warning_goes_to_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&[
        "init-points", "--n-side", "1", "--width", "300", "--height", "200", "--out", s(&dir.path().join("t.json")),
    ]);
    assert!(stderr(&out).contains("2:1"));
    let quiet = ok(&[
        "init-points", "--n-side", "1", "--width", "400", "--height", "200", "--out", s(&dir.path().join("u.json")),
    ]);
    assert!(stderr(&quiet).is_empty());
}

#[test]
fn extract_static_frames_fails_with_threshold_message() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    save_video_dir(&static_video(FrameGeometry::new(128, 64, 4).unwrap(), 1).unwrap(), &frames).unwrap();
    let out = omni(&[
        "extract", "--frames", s(&frames), "--n-side", "2", "--tracker", "block", "--out", s(&dir.path().join("t.json")),
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("no trajectories above threshold"));
}

#[test]
fn extract_yaw_frames_keeps_moving_trajectories_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let g = FrameGeometry::new(256, 128, 12).unwrap();
    let frames = dir.path().join("frames");
    save_video_dir(&yaw_video(g, 2.0, 5).unwrap(), &frames).unwrap();
    let run = |name: &str, tracker: &str| {
        let out = dir.path().join(name);
        ok(&[
            "extract", "--frames", s(&frames), "--n-side", "4", "--d-th", "5", "--tracker", tracker, "--seed", "11",
            "--out", s(&out),
        ]);
        out
    };
    for tracker in ["oracle-yaw:2", "block"] {
        let (a, b) = (run("a.json", tracker), run("b.json", tracker));
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "{tracker}");
        let set = load_trajectories(&a).unwrap();
        assert!((1..=10).contains(&set.len()));
        assert!(trajectory_distances(&set).iter().all(|&d| d > 5f64.to_radians()), "{tracker}");
        let meta = set.meta.as_ref().unwrap();
        assert_eq!(meta["seed"], 11);
        assert_eq!(meta["parameters"]["tracker"], tracker);
    }
}

#[test]
fn estimate_handles_degenerate_antipodal_and_equator() {
    let dir = tempfile::tempdir().unwrap();
    let g = FrameGeometry::new(640, 320, 2).unwrap();
    let pairs = drag_file(
        dir.path(),
        "p.json",
        g,
        &[((50.0, 100.0), (50.0, 100.0)), ((100.0, 160.0), (260.0, 160.0))],
    );
    let out = dir.path().join("t.json");
    ok(&["estimate", "--pairs", s(&pairs), "--frames", "9", "--out", s(&out)]);
    let set = load_trajectories(&out).unwrap();
    assert_eq!(set.geometry().frames(), 9);
    assert!(set.trajectories()[0].points.iter().all(|p| *p == ErpPoint::new(50.0, 100.0)));
    for (i, p) in set.trajectories()[1].points.iter().enumerate() {
        assert!((p.x - (100.0 + 20.0 * i as f64)).abs() < 1e-9);
        assert_eq!(p.y, 160.0);
    }

    let anti = drag_file(
        dir.path(),
        "anti.json",
        g,
        &[((10.0, 160.0), (20.0, 160.0)), ((0.0, 160.0), (320.0, 160.0))],
    );
    let bad = omni(&["estimate", "--pairs", s(&anti), "--frames", "9", "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(4));
    assert!(stderr(&bad).contains("pair 1"), "{}", stderr(&bad));
}

fn write_set(path: &Path, g: FrameGeometry, tracks: Vec<Vec<(f64, f64)>>) {
    let ts = tracks
        .into_iter()
        .map(|t| Trajectory::new(t.into_iter().map(|(x, y)| ErpPoint::new(x, y)).collect()))
        .collect();
    save_trajectories(&TrajectorySet::new(g, ts).unwrap(), path).unwrap();
}

#[test]
fn condition_is_zero_for_static_input_and_bit_stable() {
    let dir = tempfile::tempdir().unwrap();
    let g = FrameGeometry::new(64, 32, 4).unwrap();
    let still = dir.path().join("still.json");
    write_set(&still, g, vec![vec![(10.0, 10.0); 4], vec![(40.5, 20.25); 4]]);
    let out = dir.path().join("still.cnd");
    ok(&["condition", "--trajectories", s(&still), "--sigma", "1.5", "--out", s(&out)]);
    let map = read_condition_map(&out).unwrap();
    assert_eq!(map.shape(), [4, 2, 32, 64]);
    assert!(map.data().iter().all(|&v| v == 0.0));

    let moving = dir.path().join("moving.json");
    write_set(&moving, g, vec![vec![(10.0, 10.0), (13.0, 11.0), (17.0, 11.0), (17.0, 14.0)]]);
    let (a, b) = (dir.path().join("a.cnd"), dir.path().join("b.cnd"));
    let mut checksums = Vec::new();
    for p in [&a, &b] {
        let o = ok(&["condition", "--trajectories", s(&moving), "--sigma", "1", "--out", s(p)]);
        checksums.push(String::from_utf8(o.stdout).unwrap().split("sha256 ").nth(1).unwrap().trim().trim_end_matches(')').to_owned());
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(checksums[0], checksums[1]);
    let back = read_condition_map(&a).unwrap();
    assert_eq!(back.to_bytes(), fs::read(&a).unwrap());
    assert!(back.data().iter().any(|&v| v != 0.0));

    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("a.cnd.json")).unwrap()).unwrap();
    assert_eq!(meta["parameters"]["sigma"], 1.0);
    assert_eq!(meta["shape"], serde_json::json!([4, 2, 32, 64]));
    assert_eq!(meta["sha256"].as_str().unwrap(), checksums[0]);
}

#[test]
fn objmc_reports_zero_for_identical_and_rejects_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let g = FrameGeometry::new(640, 320, 3).unwrap();
    let a = dir.path().join("a.json");
    write_set(&a, g, vec![vec![(1.0, 2.0), (30.0, 40.0), (600.0, 300.0)], vec![(5.0, 160.0); 3]]);
    let out = ok(&["objmc", "--generated", s(&a), "--reference", s(&a)]);
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["mean_distance"].as_f64().unwrap(), 0.0);
    assert_eq!(report["per_trajectory"].as_array().unwrap().len(), 2);

    let shifted = dir.path().join("b.json");
    let d = 0.25;
    let dx = d / TAU * 640.0;
    write_set(&shifted, g, vec![vec![(100.0 + dx, 160.0); 3]]);
    let base = dir.path().join("c.json");
    write_set(&base, g, vec![vec![(100.0, 160.0); 3]]);
    let report_path = dir.path().join("report.json");
    ok(&["objmc", "--generated", s(&shifted), "--reference", s(&base), "--out", s(&report_path)]);
    let report: Value = serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    assert!((report["mean_distance"].as_f64().unwrap() - d).abs() < 1e-9);

    let short = dir.path().join("short.json");
    write_set(&short, g.with_frames(2).unwrap(), vec![vec![(1.0, 2.0); 2], vec![(5.0, 160.0); 2]]);
    let bad = omni(&["objmc", "--generated", s(&short), "--reference", s(&a)]);
    assert_eq!(bad.status.code(), Some(4));
    assert!(stderr(&bad).contains("L = 2"));
}

#[test]
fn viewport_and_h8_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let flat = dir.path().join("flat.png");
    image::RgbImage::from_pixel(128, 64, image::Rgb([10, 200, 30])).save(&flat).unwrap();
    let view = dir.path().join("v.png");
    ok(&["viewport", "--erp", s(&flat), "--yaw", "-30", "--pitch", "20", "--size", "33", "--out", s(&view)]);
    let img = image::open(&view).unwrap().to_rgb8();
    assert_eq!(img.dimensions(), (33, 33));
    assert!(img.pixels().all(|p| p.0 == [10, 200, 30]));
    let meta: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("v.png.json")).unwrap()).unwrap();
    assert!((meta["viewport"]["yaw_deg"].as_f64().unwrap() + 30.0).abs() < 1e-12);

    let tex = dir.path().join("tex.png");
    textured_rgb(256, 128, 3).save(&tex).unwrap();
    let (h8a, h8b) = (dir.path().join("h8a"), dir.path().join("h8b"));
    for d in [&h8a, &h8b] {
        ok(&["h8", "--erp", s(&tex), "--size", "40", "--out-dir", s(d)]);
    }
    let mut names: Vec<String> = fs::read_dir(&h8a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let expect: Vec<String> = (0..8)
        .map(|k| format!("h8_yaw{:03}.png", 45 * k))
        .chain(["meta.json".to_owned()])
        .collect();
    assert_eq!(names, expect);
    for n in &names {
        assert_eq!(fs::read(h8a.join(n)).unwrap(), fs::read(h8b.join(n)).unwrap(), "{n}");
    }
}

#[test]
fn score_clips_drops_the_quietest() {
    let dir = tempfile::tempdir().unwrap();
    let g = FrameGeometry::new(640, 320, 3).unwrap();
    let arcs = [0.3, 0.05, 0.8, 0.2];
    let mut clips = Vec::new();
    for (i, a) in arcs.iter().enumerate() {
        let name = format!("clip{i}.json");
        let dx = a / TAU * 640.0;
        write_set(&dir.path().join(&name), g, vec![vec![(100.0, 160.0), (100.0, 160.0), (100.0 + dx, 160.0)]]);
        clips.push(serde_json::json!({ "id": format!("c{i}"), "trajectories": name }));
    }
    let manifest = dir.path().join("manifest.json");
    fs::write(&manifest, serde_json::json!({ "clips": clips }).to_string()).unwrap();

    let out = dir.path().join("kept.json");
    ok(&["score-clips", "--manifest", s(&manifest), "--q", "0.25", "--out", s(&out)]);
    let kept: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let ids: Vec<&str> = kept["clips"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["c0", "c2", "c3"]);
    assert_eq!(kept["dropped"], serde_json::json!(["c1"]));
    for c in kept["clips"].as_array().unwrap() {
        let set = load_trajectories(&dir.path().join(c["trajectories"].as_str().unwrap())).unwrap();
        assert!((c["score"].as_f64().unwrap() - clip_motion_score(&set).unwrap()).abs() < 1e-15);
    }

    ok(&["score-clips", "--manifest", s(&manifest), "--q", "0", "--out", s(&out)]);
    let all: Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(all["clips"].as_array().unwrap().len(), 4);
}

#[test]
fn exit_codes_separate_usage_parse_domain_io() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(omni(&["init-points", "--width", "x"]).status.code(), Some(2));
    assert_eq!(omni(&["no-such-command"]).status.code(), Some(2));

    let garbage = dir.path().join("garbage.json");
    fs::write(&garbage, "{\"format\":\"omnitraj/1\"").unwrap();
    let parse = omni(&["condition", "--trajectories", s(&garbage), "--out", s(&dir.path().join("c.cnd"))]);
    assert_eq!(parse.status.code(), Some(3));
    assert!(stderr(&parse).contains("malformed"));

    let missing = omni(&["condition", "--trajectories", "/nonexistent/t.json", "--out", s(&dir.path().join("c.cnd"))]);
    assert_eq!(missing.status.code(), Some(5));
    let no_dir = omni(&["init-points", "--width", "64", "--height", "32", "--out", "/nonexistent/dir/t.json"]);
    assert_eq!(no_dir.status.code(), Some(5));

    let g = FrameGeometry::new(64, 32, 2).unwrap();
    let t = dir.path().join("t.json");
    write_set(&t, g, vec![vec![(1.0, 1.0); 2]]);
    let domain = omni(&["condition", "--trajectories", s(&t), "--sigma", "-1", "--out", s(&dir.path().join("c.cnd"))]);
    assert_eq!(domain.status.code(), Some(4));
}
