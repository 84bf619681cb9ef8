use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use lfdk::io::{
    export_sai_grid, import_sai_grid, load_light_field, payload_bytes, read_lft, save_gray_image, write_lft,
    DatasetManifest, TrainConfig, WeightArchive,
};
use lfdk::losses::{ConvStack, FeatureExtractor};
use lfdk::metrics::{evaluate, ColorMode, EvalOptions};
use lfdk::{BilinearBaseline, DKNet, DKNetConfig, InferOptions, LightField, LossConfig, LossMode, SubspacePair, SuperResolver};

#[derive(Parser)]
#[command(name = "lfdk", version, about = "Light-field super-resolution with decomposition kernels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Describe a model archive, light-field file or training config.
    /// Without a path, describes the default network.
    Info {
        path: Option<PathBuf>,
    },
    /// Bilinear downsample of a light field.
    Downsample {
        #[arg(long)]
        scale: usize,
        input: PathBuf,
        output: PathBuf,
    },
    /// Train a network on patches drawn from a dataset manifest.
    Train(TrainArgs),
    /// Super-resolve a light field with a trained model.
    Sr {
        #[arg(long)]
        model: PathBuf,
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        infer: InferArgs,
    },
    /// Score a model on every entry of a manifest and print a CSV report.
    Eval(EvalArgs),
    /// Write one epipolar-plane image as a grayscale PNG.
    Epi {
        /// Sub-space: ux, vy, uy or vx.
        #[arg(long)]
        pair: String,
        /// The two coordinates held fixed, in canonical axis order.
        #[arg(long, value_parser = parse_pair)]
        fix: (usize, usize),
        #[arg(long, default_value_t = 0)]
        channel: usize,
        input: PathBuf,
        output: PathBuf,
    },
    /// Convert a grid-of-views image into a light-field file.
    GridImport {
        /// Angular resolution as U,V.
        #[arg(long, value_parser = parse_pair, default_value = "8,8")]
        angular: (usize, usize),
        input: PathBuf,
        output: PathBuf,
    },
    /// Render a light-field file as a grid-of-views image.
    GridExport {
        #[arg(long)]
        sixteen_bit: bool,
        input: PathBuf,
        output: PathBuf,
    },
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    loss: Option<LossMode>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Use only manifest entries tagged with this split.
    #[arg(long)]
    split: Option<String>,
    /// Feature extractor weights (vgg19-relu5_4 layout) for the feature losses.
    #[arg(long)]
    vgg: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    log_every: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Trained model; omit together with --bilinear to score the baseline.
    #[arg(long, required_unless_present = "bilinear")]
    model: Option<PathBuf>,
    #[arg(long)]
    bilinear: bool,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    scale: usize,
    /// Score the BT.601 luma channel instead of RGB.
    #[arg(long)]
    luma: bool,
    /// Angular resolution used to split grid images when no model is given.
    #[arg(long, value_parser = parse_pair, default_value = "8,8")]
    angular: (usize, usize),
    #[arg(long, default_value_t = 0)]
    angular_crop: usize,
    #[arg(long, default_value_t = 0)]
    spatial_crop: usize,
    #[arg(long)]
    split: Option<String>,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    infer: InferArgs,
}

#[derive(Args)]
struct InferArgs {
    /// LR tile edge; chosen from --max-mib when omitted.
    #[arg(long)]
    tile: Option<usize>,
    #[arg(long, default_value_t = 8)]
    overlap: usize,
    #[arg(long, default_value_t = 1024)]
    max_mib: usize,
}

impl InferArgs {
    fn options(&self) -> InferOptions {
        InferOptions { overlap: self.overlap, tile: self.tile, max_bytes: self.max_mib << 20 }
    }
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected a,b but got {s:?}"))?;
    let n = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("{t:?} is not a nonnegative integer"));
    Ok((n(a)?, n(b)?))
}

enum Failure {
    Usage(String),
    Lib(lfdk::Error),
}

impl From<lfdk::Error> for Failure {
    fn from(e: lfdk::Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(e.into())
    }
}

type CliResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = lfdk::init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &lfdk::Error) -> u8 {
    match e {
        lfdk::Error::Divergence(_) => 3,
        lfdk::Error::InvalidArgument(_) | lfdk::Error::InvalidConfig(_) => 1,
        _ => 2,
    }
}

fn run(cmd: Command) -> CliResult {
    match cmd {
        Command::Info { path } => info(path.as_deref()),
        Command::Downsample { scale, input, output } => {
            let lf = read_lft(&input)?;
            write_lft(&output, &lf.downsample_bilinear(scale)?)?;
            Ok(())
        }
        Command::Train(a) => train(a),
        Command::Sr { model, input, output, infer } => {
            let net = DKNet::<f32>::load(&model)?;
            let lr = read_lft(&input)?;
            let hr = lfdk::super_resolve_with(&net, &lr, &infer.options())?;
            write_lft(&output, &hr)?;
            eprintln!("{} -> {}", lr.dims(), hr.dims());
            Ok(())
        }
        Command::Eval(a) => eval(a),
        Command::Epi { pair, fix, channel, input, output } => {
            let p = SubspacePair::from_token(&pair)
                .filter(|p| p.is_epi())
                .ok_or_else(|| usage(format!("--pair must be one of ux, vy, uy, vx; got {pair:?}")))?;
            let lf = read_lft(&input)?;
            let epi = lf.extract_epi(p, fix, channel)?;
            save_gray_image(&epi, &output)?;
            eprintln!("EPI {} {}x{} written", p.label(), epi.h, epi.w);
            Ok(())
        }
        Command::GridImport { angular, input, output } => {
            let lf = import_sai_grid(&input, angular.0, angular.1)?;
            write_lft(&output, &lf)?;
            eprintln!("{}", lf.dims());
            Ok(())
        }
        Command::GridExport { sixteen_bit, input, output } => {
            export_sai_grid(&read_lft(&input)?, &output, sixteen_bit)?;
            Ok(())
        }
    }
}

fn has_ext(p: &Path, ext: &str) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext))
}

fn describe_net(config: &DKNetConfig, net: &DKNet<f32>) {
    let c = config;
    println!(
        "network: scale {}  angular {}x{}  channels {}  feat {}  kernels {} x{}  dense {}  raw {}",
        c.scale, c.angular.0, c.angular.1, c.channels, c.feat_ch, c.kind, c.depth, c.dense, c.raw
    );
    println!("connections per kernel: {}", c.kind.connection_count());
    println!("{}", net.param_report());
}

fn info(path: Option<&Path>) -> CliResult {
    match path {
        None => {
            let net = DKNet::<f32>::build(DKNetConfig::default(), 0)?;
            describe_net(&net.config, &net);
        }
        Some(p) if has_ext(p, "lfw") => {
            let archive = WeightArchive::load(p)?;
            let net = DKNet::<f32>::from_archive(&archive)?;
            describe_net(&net.config, &net);
            println!("archive entries: {}", archive.parameter_entries().count());
        }
        Some(p) if has_ext(p, "lft") => {
            let lf = read_lft(p)?;
            let d = lf.dims();
            let (lo, hi, sum) = lf
                .data()
                .iter()
                .fold((f32::INFINITY, f32::NEG_INFINITY, 0f64), |(lo, hi, s), &v| (lo.min(v), hi.max(v), s + v as f64));
            println!("light field (U,V,C,H,W) = {d}");
            println!("payload bytes: {}", payload_bytes(d));
            println!("range [{lo}, {hi}]  mean {:.6}", sum / d.len().max(1) as f64);
        }
        Some(p) => {
            let cfg = TrainConfig::load(p)?;
            let net = DKNet::<f32>::build(cfg.net, cfg.seed)?;
            describe_net(&cfg.net, &net);
            println!("training: lr {}  batch {}  patch {}  steps {}  loss {}  lambda {}  seed {}",
                cfg.lr, cfg.batch, cfg.patch, cfg.steps, cfg.loss, cfg.lambda, cfg.seed);
        }
    }
    Ok(())
}

fn load_manifest(path: &Path, split: Option<&str>) -> Result<DatasetManifest, Failure> {
    let m = DatasetManifest::load(path)?;
    Ok(match split {
        Some(s) => m.with_split(s),
        None => m,
    })
}

fn extractor(channels: usize, vgg: Option<&Path>) -> Result<Arc<dyn FeatureExtractor<f32>>, Failure> {
    Ok(match vgg {
        Some(p) => Arc::new(ConvStack::<f32>::vgg19_relu5_4(&WeightArchive::load(p)?)?),
        None => Arc::new(ConvStack::<f32>::standin_small(channels)),
    })
}

fn train(a: TrainArgs) -> CliResult {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    if let Some(l) = a.loss {
        cfg.loss = l;
    }
    if let Some(l) = a.lambda {
        cfg.lambda = l;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(s) = a.steps {
        cfg.steps = s;
    }
    cfg.validate()?;
    let manifest = load_manifest(&a.data, a.split.as_deref())?;
    if manifest.is_empty() {
        return Err(usage(format!("manifest {} lists no light fields", a.data.display())));
    }
    let data = manifest
        .entries
        .iter()
        .map(|e| load_light_field(&e.path, cfg.net.angular))
        .collect::<lfdk::Result<Vec<LightField<f32>>>>()?;
    let loss = match cfg.loss {
        LossMode::Mse => LossConfig::mse(),
        mode => LossConfig::new(mode, cfg.lambda, extractor(cfg.net.channels, a.vgg.as_deref())?)?,
    };
    let mut net = DKNet::<f32>::build(cfg.net, cfg.seed)?;
    eprintln!("training {} parameters on {} light fields for {} steps", net.param_count(), data.len(), cfg.steps);
    let every = a.log_every.max(1);
    let losses = lfdk::fit(&mut net, &data, &cfg, &loss, |step, l| {
        if step % every == 0 || step + 1 == cfg.steps {
            eprintln!("step {:>6}  loss {l:.6e}", step + 1);
        }
    })?;
    net.save(&a.out)?;
    if let (Some(first), Some(last)) = (losses.first(), losses.last()) {
        println!("initial loss {first:.6e}  final loss {last:.6e}");
    }
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    let (model, angular): (Box<dyn SuperResolver>, (usize, usize)) = match &a.model {
        Some(p) if !a.bilinear => {
            let net = DKNet::<f32>::load(p)?;
            let ang = net.config.angular;
            if net.config.scale != a.scale {
                return Err(usage(format!("model scale {} differs from --scale {}", net.config.scale, a.scale)));
            }
            (Box::new(net), ang)
        }
        _ => (Box::new(BilinearBaseline { scale: a.scale }), a.angular),
    };
    let manifest = load_manifest(&a.data, a.split.as_deref())?;
    let opts = EvalOptions {
        scale: a.scale,
        angular,
        angular_crop: a.angular_crop,
        spatial_crop: a.spatial_crop,
        color: if a.luma { ColorMode::Luma } else { ColorMode::Rgb },
        infer: a.infer.options(),
    };
    let report = evaluate(model.as_ref(), &manifest, &opts);
    match &a.csv {
        Some(p) => std::fs::write(p, report.to_csv())?,
        None => print!("{}", report.to_csv()),
    }
    eprint!("{report}");
    if report.is_empty() && !report.failures.is_empty() {
        let (name, why) = &report.failures[0];
        return Err(Failure::Lib(lfdk::Error::Format(format!("no sample could be scored; first failure {name}: {why}"))));
    }
    Ok(())
}
