use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use omnimotion_core::controller::Rasterization;
use omnimotion_core::erp_ops::{DEFAULT_FOV_DEG, DEFAULT_VIEWPORT_SIZE};
use omnimotion_core::sme::DEFAULT_D_TH;
use omnimotion_core::tracking::{BlockMatchTracker, OracleTracker, Tracker};

/// Spherical motion extraction and conditioning for equirectangular video.
///
/// Angles given on the command line are in degrees.
#[derive(Debug, Parser)]
#[command(name = "omnimotion", version)]
pub struct Cli {
    /// Seed recorded in every output and used by sampling steps.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write HEALPix seed points as a single-frame trajectory file.
    InitPoints(InitPointsArgs),
    /// Track, filter and sample condition trajectories from a frame directory.
    Extract(ExtractArgs),
    /// Expand handle/target pairs into full trajectories.
    Estimate(EstimateArgs),
    /// Rasterize trajectories into a smoothed speed map.
    Condition(ConditionArgs),
    /// Mean spherical distance between generated and reference trajectories.
    Objmc(ObjmcArgs),
    /// Render one perspective view of an ERP image.
    Viewport(ViewportArgs),
    /// Render the eight horizontal views of an ERP image.
    H8(H8Args),
    /// Drop the clips with the least motion.
    ScoreClips(ScoreClipsArgs),
    /// Serve the drag UI backend over local HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct InitPointsArgs {
    #[arg(long, default_value_t = 16)]
    pub n_side: u32,
    #[arg(long)]
    pub width: u32,
    #[arg(long)]
    pub height: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrackerChoice {
    Block,
    Static,
    OracleYaw(f64),
}

impl TrackerChoice {
    pub fn build(self) -> Box<dyn Tracker> {
        match self {
            TrackerChoice::Block => Box::new(BlockMatchTracker::default()),
            TrackerChoice::Static => Box::new(OracleTracker::Static),
            TrackerChoice::OracleYaw(px) => Box::new(OracleTracker::Yaw { px_per_frame: px }),
        }
    }

    pub fn label(self) -> String {
        match self {
            TrackerChoice::Block => "block".into(),
            TrackerChoice::Static => "static".into(),
            TrackerChoice::OracleYaw(px) => format!("oracle-yaw:{px}"),
        }
    }
}

impl FromStr for TrackerChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "block" => Ok(TrackerChoice::Block),
            "static" => Ok(TrackerChoice::Static),
            _ => {
                let px = s
                    .strip_prefix("oracle-yaw:")
                    .ok_or_else(|| format!("unknown tracker {s:?}; use block, static or oracle-yaw:<px per frame>"))?;
                px.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(TrackerChoice::OracleYaw)
                    .ok_or_else(|| format!("bad pixel speed in {s:?}"))
            }
        }
    }
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Directory of PNG/PPM frames, read in file-name order.
    #[arg(long)]
    pub frames: PathBuf,
    #[arg(long, default_value_t = 16)]
    pub n_side: u32,
    /// Endpoint-distance threshold in degrees.
    #[arg(long, default_value_t = DEFAULT_D_TH.to_degrees(), allow_negative_numbers = true)]
    pub d_th: f64,
    /// Keep this top fraction by distance instead of thresholding.
    #[arg(long)]
    pub top_fraction: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub n_samp_min: usize,
    #[arg(long, default_value_t = 10)]
    pub n_samp_max: usize,
    /// block, static or oracle-yaw:<px per frame>.
    #[arg(long, default_value = "block")]
    pub tracker: TrackerChoice,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// omnidrag/1 document.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Overrides the frame count stored in the pairs file.
    #[arg(long)]
    pub frames: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum RasterArg {
    #[default]
    Nearest,
    Bilinear,
}

impl From<RasterArg> for Rasterization {
    fn from(r: RasterArg) -> Self {
        match r {
            RasterArg::Nearest => Rasterization::Nearest,
            RasterArg::Bilinear => Rasterization::Bilinear,
        }
    }
}

#[derive(Debug, Args)]
pub struct ConditionArgs {
    /// omnitraj/1 document.
    #[arg(long)]
    pub trajectories: PathBuf,
    /// Gaussian sigma in pixels.
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value_t = RasterArg::Nearest)]
    pub raster: RasterArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ObjmcArgs {
    #[arg(long)]
    pub generated: PathBuf,
    #[arg(long)]
    pub reference: PathBuf,
    /// Also write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ViewportArgs {
    #[arg(long)]
    pub erp: PathBuf,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub yaw: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub pitch: f64,
    /// Horizontal field of view.
    #[arg(long, default_value_t = DEFAULT_FOV_DEG)]
    pub fov: f64,
    #[arg(long, default_value_t = DEFAULT_VIEWPORT_SIZE)]
    pub size: u32,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct H8Args {
    #[arg(long)]
    pub erp: PathBuf,
    #[arg(long, default_value_t = DEFAULT_FOV_DEG)]
    pub fov: f64,
    #[arg(long, default_value_t = DEFAULT_VIEWPORT_SIZE)]
    pub size: u32,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreClipsArgs {
    /// JSON manifest `{"clips":[{"id":..,"trajectories":..}]}`; paths are
    /// relative to the manifest.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Fraction of lowest-scoring clips to drop.
    #[arg(long, default_value_t = 0.25, allow_negative_numbers = true)]
    pub q: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    pub erp: PathBuf,
    /// Trajectory length reported to clients.
    #[arg(long, default_value_t = 16)]
    pub frames: u32,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Where POST /export writes files.
    #[arg(long, default_value = "omnimotion-exports")]
    pub export_dir: PathBuf,
}
