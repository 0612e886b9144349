use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sparsewarp::config::{Method, RunConfig};
use sparsewarp::optimizer::DataTerm;
use sparsewarp::pipeline;
use sparsewarp::synthetic::{SyntheticSpec, Texture};
use sparsewarp::Error;

/// Environment variable holding the default worker thread count.
const THREADS_ENV: &str = "SPARSEWARP_THREADS";

#[derive(Parser)]
#[command(
    name = "sparsewarp",
    version,
    about = "Align cameras and per-image deformations for inconsistent image sets"
)]
struct Cli {
    /// Maximum worker threads (default: $SPARSEWARP_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, normalize, align and export a scene.
    Align(RunArgs),
    /// Hold out correspondences, align on the rest and score transfers.
    Eval(EvalArgs),
    /// Re-export artifacts from a saved state.json.
    Export(ExportArgs),
    /// Generate a synthetic scene with ground truth.
    Synth(SynthArgs),
    /// Check a scene directory and its annotations.
    Validate {
        #[arg(long)]
        scene: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Full,
    CameraOnly,
    TraditionalBa,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Full => Method::Full,
            MethodArg::CameraOnly => Method::CameraOnly,
            MethodArg::TraditionalBa => Method::TraditionalBa,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DataTermArg {
    L3d,
    L2d,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// TOML run configuration; flags given here take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    camera_iterations: Option<usize>,
    #[arg(long)]
    deformation_iterations: Option<usize>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    #[arg(long, value_enum)]
    data_term: Option<DataTermArg>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        c.scene = Some(self.scene.clone());
        c.out = Some(self.out.clone());
        if let Some(s) = self.seed {
            c.optimizer.seed = s;
            c.eval.seed = s;
        }
        if let Some(n) = self.camera_iterations {
            c.optimizer.camera_iterations = n;
        }
        if let Some(n) = self.deformation_iterations {
            c.optimizer.deformation_iterations = n;
        }
        if let Some(s) = self.stride {
            c.stride = s;
        }
        if let Some(m) = self.method {
            c.method = m.into();
        }
        if let Some(d) = self.data_term {
            c.data_term = match d {
                DataTermArg::L3d => DataTerm::L3d,
                DataTermArg::L2d => DataTerm::L2d,
            };
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Correspondences held out of alignment.
    #[arg(long)]
    holdout: Option<usize>,
    /// PCC radius as a fraction of the longest image side; repeatable.
    #[arg(long = "alpha")]
    alphas: Vec<f64>,
    /// Methods to compare; repeatable. Default: all three.
    #[arg(long = "compare", value_enum)]
    compare: Vec<MethodArg>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum TextureArg {
    Checkerboard,
    Gradient,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    /// TOML scene specification; flags given here take precedence.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cameras: Option<usize>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Inconsistency: largest displacement as a fraction of the longest side.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    depth_noise: Option<f64>,
    #[arg(long, value_enum)]
    texture: Option<TextureArg>,
}

impl SynthArgs {
    fn resolve(&self) -> Result<SyntheticSpec, Error> {
        let mut s = match &self.spec {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                toml::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => SyntheticSpec::default(),
        };
        if let Some(v) = self.seed {
            s.seed = v;
        }
        if let Some(v) = self.cameras {
            s.n_cameras = v;
        }
        if let Some(v) = self.points {
            s.n_correspondences = v;
        }
        if let Some(v) = self.width {
            s.width = v;
        }
        if let Some(v) = self.height {
            s.height = v;
        }
        if let Some(v) = self.delta {
            s.inconsistency = v;
        }
        if let Some(v) = self.depth_noise {
            s.depth_noise = v;
        }
        if let Some(t) = self.texture {
            s.texture = match t {
                TextureArg::Checkerboard => Texture::Checkerboard,
                TextureArg::Gradient => Texture::Gradient,
            };
        }
        Ok(s)
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, Error> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(n) = thread_count(cli.threads)? {
        if n == 0 {
            return Err(Error::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Align(args) => {
            let config = args.resolve()?;
            let (report, cloud) = pipeline::run_align(&config)?;
            let total = report
                .deformation_final
                .or(report.camera_final)
                .map_or(f64::NAN, |b| b.total);
            println!("aligned: {} points, final loss {total:.6e}", cloud.len());
        }
        Command::Eval(args) => {
            let mut config = args.run.resolve()?;
            if let Some(k) = args.holdout {
                config.eval.holdout = k;
            }
            if !args.alphas.is_empty() {
                config.eval.alphas = args.alphas.clone();
            }
            config.validate()?;
            let methods: Vec<Method> = if args.compare.is_empty() {
                Method::ALL.to_vec()
            } else {
                args.compare.iter().map(|&m| m.into()).collect()
            };
            let report = pipeline::run_eval(&config, &methods)?;
            for m in &report.methods {
                let pcc: Vec<String> = m
                    .pcc
                    .iter()
                    .map(|p| format!("{}@{}", p.fraction_correct, p.alpha))
                    .collect();
                println!("{}: pcc {}", m.method.name(), pcc.join(" "));
            }
        }
        Command::Export(args) => {
            let mut config = RunConfig {
                scene: Some(args.scene),
                out: Some(args.out),
                ..RunConfig::default()
            };
            if let Some(s) = args.stride {
                config.stride = s;
            }
            let cloud = pipeline::run_export(&config, &args.state)?;
            println!("exported: {} points", cloud.len());
        }
        Command::Synth(args) => {
            let spec = args.resolve()?;
            let (scene, _) = pipeline::run_synth(&spec, &args.out)?;
            println!(
                "synthesized: {} images, {} correspondences",
                scene.n_images(),
                scene.correspondences.n_points()
            );
        }
        Command::Validate { scene } => {
            let (scene, warnings) = pipeline::run_validate(&scene)?;
            for w in &warnings {
                eprintln!("warning: {w}");
            }
            println!(
                "valid: {} images, {} correspondences, {} warnings",
                scene.n_images(),
                scene.correspondences.n_points(),
                warnings.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.module());
            ExitCode::from(1)
        }
    }
}
