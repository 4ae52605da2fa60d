use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use leantopo::geometry::PointCloud;
use leantopo::io::{read_cloud, write_points};
use leantopo::pipeline::{
    lean_topo_with_artifacts, sparsify_only, Mode, PipelineConfig, PipelineError, Stage,
};
use leantopo::samplers::{
    add_normal_noise, sample_circle, sample_helix_loop, sample_neck_curve, sample_sphere,
    sample_torus, HelixLoop, ManifoldSample, NeckCurve, SampleSize,
};

#[derive(Parser)]
#[command(
    name = "leantopo",
    version,
    about = "Homology inference from adaptively sampled point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate Betti numbers of the manifold a point file samples.
    Infer(InferArgs),
    /// Run the pipeline through sparsification and write the retained points.
    Sparsify(SparsifyArgs),
    /// Write a synthetic sample and its sidecar of normals and lfs values.
    Sample(SampleArgs),
    /// Compare the implementation against slow reference computations.
    Selftest,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Theory,
    Practical,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Theory => Mode::Theory,
            ModeArg::Practical => Mode::Practical,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Whitespace- or comma-separated coordinates, one point per line.
    points: PathBuf,
    #[arg(long)]
    intrinsic_dim: usize,
    #[arg(long, value_enum, default_value = "theory")]
    mode: ModeArg,
    /// Ignore lean points whose pair is closer than this.
    #[arg(long)]
    min_pair_distance: Option<f64>,
    /// Complex level in practical mode.
    #[arg(long)]
    r: Option<f64>,
    /// Evaluate lnfs against the full lean set instead of the reduced one.
    #[arg(long)]
    full_lean_set: bool,
    /// Echoed in the report.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Highest homology dimension reported; defaults to the intrinsic dimension.
    #[arg(long)]
    max_homology_dim: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    export_sparse: Option<PathBuf>,
    #[arg(long)]
    export_lean: Option<PathBuf>,
    #[arg(long)]
    export_barcode: Option<PathBuf>,
}

#[derive(Args)]
struct SparsifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Retained points; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Shape {
    Circle,
    Neck,
    Helix,
    Torus,
    Sphere,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(value_enum)]
    shape: Shape,
    #[arg(long, conflicts_with = "eps")]
    n: Option<usize>,
    /// Target density; not available for the helix.
    #[arg(long)]
    eps: Option<f64>,
    /// Circle and sphere radius, helix loop radius.
    #[arg(long)]
    radius: Option<f64>,
    /// Torus major radius.
    #[arg(long, default_value_t = 2.0)]
    major: f64,
    /// Torus minor radius.
    #[arg(long, default_value_t = 0.8)]
    minor: f64,
    /// Neck width of the neck curve.
    #[arg(long, default_value_t = 0.05)]
    width: f64,
    /// Helix tube radius.
    #[arg(long)]
    tube: Option<f64>,
    /// Helix turns around the loop.
    #[arg(long)]
    turns: Option<u32>,
    /// Normal displacement amplitude as a fraction of the diameter.
    #[arg(long, default_value_t = 0.0)]
    noise_scale: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Points are written here and the sidecar next to it with `.sidecar` appended.
    #[arg(short, long)]
    output: PathBuf,
}

enum Failure {
    Pipeline(PipelineError),
    Other(anyhow::Error),
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        Failure::Pipeline(e)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

const EXIT_IO: u8 = 3;
const EXIT_SELFTEST: u8 = 9;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Infer(args) => infer(args),
        Command::Sparsify(args) => sparsify(args),
        Command::Sample(args) => sample(args),
        Command::Selftest => return selftest(),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Pipeline(e)) => {
            eprintln!("error: {e}");
            eprintln!("hint: {}", e.hint());
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_IO)
        }
    }
}

fn config_from(common: &CommonArgs) -> Result<PipelineConfig, PipelineError> {
    let mut config = PipelineConfig::for_mode(common.mode.into())
        .with_reduced_lean_set(!common.full_lean_set)
        .with_seed(common.seed);
    if let Some(r) = common.r {
        config = config.with_r(r)?;
    }
    if let Some(t) = common.min_pair_distance {
        config = config.with_min_pair_distance(t)?;
    }
    Ok(config)
}

fn load(common: &CommonArgs) -> Result<PointCloud, PipelineError> {
    read_cloud(&common.points, common.intrinsic_dim)
        .map_err(|e| PipelineError::new(Stage::Input, e))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn export<F>(path: &Option<PathBuf>, write: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    if let Some(path) = path {
        let mut out = create(path)?;
        write(&mut out)
            .and_then(|_| out.flush())
            .with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn infer(args: InferArgs) -> Result<(), Failure> {
    let mut config = config_from(&args.common)?;
    if let Some(d) = args.max_homology_dim {
        config = config.with_top_dim(d);
    }
    let cloud = load(&args.common)?;
    let (report, artifacts) = lean_topo_with_artifacts(&cloud, &config)?;

    export(&args.export_sparse, |out| {
        artifacts.sparse.write_text(&cloud, out)
    })?;
    export(&args.export_lean, |out| artifacts.lean.write_text(out))?;
    if let Some(barcode) = &artifacts.barcode {
        export(&args.export_barcode, |out| barcode.write_text(out))?;
    }

    let json = serde_json::to_string_pretty(&report).context("cannot serialize the report")?;
    match &args.report {
        Some(path) => {
            export(&Some(path.clone()), |out| writeln!(out, "{json}"))?;
            println!("betti {:?}", report.betti);
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn sparsify(args: SparsifyArgs) -> Result<(), Failure> {
    let config = config_from(&args.common)?;
    let cloud = load(&args.common)?;
    let (sparse, uniformity, lean) = sparsify_only(&cloud, &config)?;
    match &args.output {
        Some(_) => export(&args.output, |out| sparse.write_text(&cloud, out))?,
        None => {
            let stdout = std::io::stdout();
            sparse
                .write_text(&cloud, &mut stdout.lock())
                .context("cannot write to stdout")?;
        }
    }
    eprintln!(
        "kept {} of {} points; lean set {} points; uniformity {}",
        sparse.len(),
        cloud.len(),
        lean.len(),
        if uniformity.passed() {
            "verified"
        } else {
            "VIOLATED"
        }
    );
    Ok(())
}

fn sample_size(args: &SampleArgs, default_n: usize) -> SampleSize {
    match (args.n, args.eps) {
        (_, Some(e)) => SampleSize::Eps(e),
        (Some(n), None) => SampleSize::Count(n),
        (None, None) => SampleSize::Count(default_n),
    }
}

fn build_sample(args: &SampleArgs) -> Result<ManifoldSample, Failure> {
    let radius = args.radius.unwrap_or(1.0);
    let sample = match args.shape {
        Shape::Circle => sample_circle(radius, sample_size(args, 2000)),
        Shape::Sphere => sample_sphere(radius, sample_size(args, 4000)),
        Shape::Torus => sample_torus(args.major, args.minor, sample_size(args, 5000)),
        Shape::Neck => {
            if args.n.is_some() {
                return Err(anyhow::anyhow!("the neck curve is sampled by --eps only").into());
            }
            sample_neck_curve(NeckCurve::with_width(args.width), args.eps.unwrap_or(0.005))
        }
        Shape::Helix => {
            if args.eps.is_some() {
                return Err(anyhow::anyhow!("the helix loop is sampled by --n only").into());
            }
            let default = HelixLoop::default();
            let shape = HelixLoop {
                radius: args.radius.unwrap_or(default.radius),
                tube: args.tube.unwrap_or(default.tube),
                turns: args.turns.unwrap_or(default.turns),
            };
            sample_helix_loop(shape, args.n.unwrap_or(1000))
        }
    };
    sample.map_err(|e| PipelineError::new(Stage::Input, e).into())
}

fn sample(args: SampleArgs) -> Result<(), Failure> {
    let mut sample = build_sample(&args)?;
    if args.noise_scale > 0.0 {
        sample.cloud = add_normal_noise(
            &sample.cloud,
            &sample.noise_directions,
            args.noise_scale,
            args.seed,
        )
        .map_err(|e| PipelineError::new(Stage::Input, e))?;
    }
    export(&Some(args.output.clone()), |out| {
        write_points(&sample.cloud, out)
    })?;
    let mut sidecar = args.output.clone().into_os_string();
    sidecar.push(".sidecar");
    export(&Some(sidecar.into()), |out| sample.write_sidecar(out))?;
    eprintln!(
        "{}: {} points, measured eps {:.4}, lfs {:?}, betti {:?}",
        sample.name,
        sample.len(),
        sample.eps,
        sample.lfs_kind,
        sample.betti
    );
    Ok(())
}

fn selftest() -> ExitCode {
    let checks = leantopo::selftest::run();
    let mut ok = true;
    for c in &checks {
        println!(
            "{:<28} {}  {}",
            c.name,
            if c.passed { "ok" } else { "FAILED" },
            c.detail
        );
        ok &= c.passed;
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_SELFTEST)
    }
}
