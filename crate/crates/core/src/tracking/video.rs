use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::sphere::FrameGeometry;

/// Single-channel raster, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "plane {width}x{height} needs {} values, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Integer lookup with horizontal wrap and vertical clamp.
    #[inline]
    pub fn get_wrapped(&self, x: i64, y: i64) -> f32 {
        let xi = x.rem_euclid(self.width as i64) as usize;
        let yi = y.clamp(0, self.height as i64 - 1) as usize;
        self.data[yi * self.width + xi]
    }

    /// Bilinear sample where pixel `k` sits at coordinate `k`.
    pub fn sample(&self, x: f64, y: f64) -> f32 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = (x - x0) as f32;
        let fy = (y - y0) as f32;
        let (xi, yi) = (x0 as i64, y0 as i64);
        let a = self.get_wrapped(xi, yi);
        let b = self.get_wrapped(xi + 1, yi);
        let c = self.get_wrapped(xi, yi + 1);
        let d = self.get_wrapped(xi + 1, yi + 1);
        let top = a + (b - a) * fx;
        let bot = c + (d - c) * fx;
        top + (bot - top) * fy
    }

    /// Bilinear samples on the unit-spaced `cols x rows` grid whose first
    /// point is `(x, y)`, written row-major into `out`. Same values as calling
    /// [`sample`](Self::sample) at each point.
    pub fn sample_grid(&self, x: f64, y: f64, cols: usize, rows: usize, out: &mut [f32]) {
        assert_eq!(out.len(), cols * rows, "grid buffer size");
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = ((x - x0) as f32, (y - y0) as f32);
        let w = self.width as i64;
        let h = self.height as i64 - 1;
        let xs: Vec<usize> = (0..=cols as i64).map(|k| (x0 as i64 + k).rem_euclid(w) as usize).collect();
        let ys: Vec<usize> = (0..=rows as i64)
            .map(|k| (y0 as i64 + k).clamp(0, h) as usize * self.width)
            .collect();
        for r in 0..rows {
            let (top, bot) = (&self.data[ys[r]..ys[r] + self.width], &self.data[ys[r + 1]..ys[r + 1] + self.width]);
            let dst = &mut out[r * cols..(r + 1) * cols];
            for (c, o) in dst.iter_mut().enumerate() {
                let (xa, xb) = (xs[c], xs[c + 1]);
                let t = top[xa] + (top[xb] - top[xa]) * fx;
                let b = bot[xa] + (bot[xb] - bot[xa]) * fx;
                *o = t + (b - t) * fy;
            }
        }
    }

    /// 2x box downsample; odd trailing columns wrap, odd trailing rows clamp.
    pub fn downsample(&self) -> Plane {
        let w = (self.width / 2).max(1);
        let h = (self.height / 2).max(1);
        Plane::from_fn(w, h, |x, y| {
            let (x2, y2) = (2 * x as i64, 2 * y as i64);
            0.25 * (self.get_wrapped(x2, y2)
                + self.get_wrapped(x2 + 1, y2)
                + self.get_wrapped(x2, y2 + 1)
                + self.get_wrapped(x2 + 1, y2 + 1))
        })
    }
}

/// A clip of grayscale ERP frames.
#[derive(Clone, Debug)]
pub struct VideoFrames {
    geometry: FrameGeometry,
    frames: Vec<Plane>,
}

impl VideoFrames {
    pub fn new(geometry: FrameGeometry, frames: Vec<Plane>) -> Result<Self> {
        if frames.len() != geometry.frames() as usize {
            return Err(Error::Shape(format!(
                "{} frames supplied for L = {}",
                frames.len(),
                geometry.frames()
            )));
        }
        for (i, f) in frames.iter().enumerate() {
            if f.width() != geometry.width() as usize || f.height() != geometry.height() as usize {
                return Err(Error::Shape(format!(
                    "frame {i} is {}x{}, expected {}x{}",
                    f.width(),
                    f.height(),
                    geometry.width(),
                    geometry.height()
                )));
            }
        }
        Ok(Self { geometry, frames })
    }

    pub fn geometry(&self) -> &FrameGeometry {
        &self.geometry
    }

    pub fn frames(&self) -> &[Plane] {
        &self.frames
    }
}

fn is_frame_file(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "ppm" | "pnm" | "pgm"))
        .unwrap_or(false)
}

/// Reads every PNG/PPM file in `dir`, in lexicographic file-name order, as
/// 8-bit luma. The number of files defines `L`.
pub fn load_video_dir(dir: &Path) -> Result<VideoFrames> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_file() && is_frame_file(&path) {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(Error::domain(format!("no PNG/PPM frames in {}", dir.display())));
    }

    let mut frames = Vec::with_capacity(paths.len());
    let mut dims = None;
    for path in &paths {
        let img = image::open(path)?.to_luma8();
        let (w, h) = img.dimensions();
        match dims {
            None => dims = Some((w, h)),
            Some(d) if d != (w, h) => {
                return Err(Error::Shape(format!(
                    "{} is {w}x{h}, earlier frames are {}x{}",
                    path.display(),
                    d.0,
                    d.1
                )))
            }
            _ => {}
        }
        let data = img.into_raw().into_iter().map(f32::from).collect();
        frames.push(Plane::new(w as usize, h as usize, data)?);
    }
    let (w, h) = dims.expect("at least one frame");
    let geometry = FrameGeometry::new(w, h, frames.len() as u32)?;
    VideoFrames::new(geometry, frames)
}

/// Writes `frame_00000.png`, `frame_00001.png`, ... as 8-bit gray, rounding
/// and clamping each sample. Reading the directory back gives the quantized
/// video.
pub fn save_video_dir(video: &VideoFrames, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, f) in video.frames().iter().enumerate() {
        let bytes = f.data().iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
        let img = image::GrayImage::from_raw(f.width() as u32, f.height() as u32, bytes).expect("sized by construction");
        img.save(dir.join(format!("frame_{i:05}.png")))?;
    }
    Ok(())
}
