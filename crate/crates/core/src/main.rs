use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use stinr::io::{load_config, Checkpoint, Precision};
use stinr::metrics::evaluate;
use stinr::nufft::CoilMaps;
use stinr::pipeline::{
    manifest_base, read_image, run_reconstruction, run_simulation, run_superres, sweep_csv,
    sweep_hyperparameters, write_image, write_renders, ArtifactLog, ExperimentSpec,
};
use stinr::{Error, Result};

/// Dynamic MRI reconstruction with a hash-encoded coordinate network.
#[derive(Parser)]
#[command(name = "stinr", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Fixed reduction order. Reductions are always ordered; the flag is
    /// recorded in the manifest.
    #[arg(long, global = true)]
    deterministic: bool,
    /// Output directory (overrides output.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Storage precision of image arrays.
    #[arg(long, global = true, value_parser = parse_precision)]
    precision: Option<Precision>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the phantom and its undersampled multicoil k-space.
    Simulate,
    /// Train the network and write reconstructions, metrics and a checkpoint.
    Recon,
    /// Query a checkpoint on a temporally denser grid.
    Superres {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 4)]
        factor: usize,
    },
    /// Frame-wise PSNR/SSIM (and coil NRMSE with --coils) of two arrays.
    Eval {
        #[arg(long)]
        recon: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        coils: Option<PathBuf>,
    },
    /// 8-bit PGM frame dumps plus one y-t slice.
    Render {
        #[arg(long)]
        input: PathBuf,
        /// Image column for the y-t slice (default N/2).
        #[arg(long)]
        column: Option<usize>,
    },
    /// Train over the (lambda_s, lambda_l) grid in the [sweep] section.
    Sweep,
}

fn parse_precision(s: &str) -> std::result::Result<Precision, String> {
    match s {
        "f32" => Ok(Precision::F32),
        "f64" => Ok(Precision::F64),
        _ => Err(format!("expected f32 or f64, got {s}")),
    }
}

impl Global {
    fn spec(&self) -> Result<ExperimentSpec> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| Error::Config { line: 0, message: "--config is required".into() })?;
        let mut spec = load_config(path)?;
        if let Some(seed) = self.seed {
            spec.seed = seed;
        }
        if let Some(p) = self.precision {
            spec.output.precision = p;
        }
        if let Some(out) = &self.out {
            spec.output.dir = out.clone();
        }
        spec.recon.deterministic = spec.recon.deterministic || self.deterministic;
        Ok(spec)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn precision(&self) -> Precision {
        self.precision.unwrap_or_default()
    }
}

fn run(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    match &cli.command {
        Command::Simulate => {
            let spec = g.spec()?;
            run_simulation(&spec, &spec.output.dir)?;
        }
        Command::Recon => {
            let spec = g.spec()?;
            let rec = run_reconstruction(&spec, Some(&spec.output.dir))?;
            if let (Some(m), Some(b)) = (&rec.metrics, &rec.baseline_metrics) {
                println!(
                    "AF {}: INR mean PSNR {:.2} dB, baseline {:.2} dB",
                    rec.acceleration_factor,
                    m.mean_psnr(),
                    b.mean_psnr()
                );
            }
        }
        Command::Superres { checkpoint, factor } => {
            let ck = Checkpoint::read(checkpoint)?;
            let img = run_superres(&ck, *factor)?;
            let dir = g.out_dir();
            write_image(&dir.join(format!("superres_x{factor}.arr")), &img, "superres", g.precision())?;
            println!("{} frames", img.frames());
        }
        Command::Eval { recon, truth, coils } => {
            let r = read_image(recon)?;
            let t = read_image(truth)?;
            let maps = match coils {
                Some(p) => Some(CoilMaps::new(
                    stinr::io::ArrayContainer::read(p)?.to_complex()?,
                )?),
                None => None,
            };
            let report = evaluate(&r, &t, maps.as_ref())?;
            let dir = g.out_dir();
            let mut log = ArtifactLog::new(&dir);
            log.write("metrics.csv", report.to_csv().as_bytes())?;
            log.finish(json!({
                "command": "eval",
                "recon": recon,
                "truth": truth,
                "mean_psnr": report.mean_psnr(),
                "mean_ssim": report.mean_ssim(),
            }))?;
            println!("mean PSNR {:.4} dB, mean SSIM {:.6}", report.mean_psnr(), report.mean_ssim());
        }
        Command::Render { input, column } => render(g, input, *column)?,
        Command::Sweep => {
            let spec = g.spec()?;
            let grid = spec
                .sweep
                .as_ref()
                .ok_or_else(|| Error::Config { line: 0, message: "missing [sweep] section".into() })?
                .grid();
            let cells = sweep_hyperparameters(&spec, &grid)?;
            let mut log = ArtifactLog::new(&spec.output.dir);
            let table = sweep_csv(&cells);
            log.write("sweep.csv", table.as_bytes())?;
            log.finish(manifest_base("sweep", &spec)?)?;
            print!("{table}");
        }
    }
    Ok(())
}

fn render(g: &Global, input: &Path, column: Option<usize>) -> Result<()> {
    let img = read_image(input)?;
    let column = column.unwrap_or(img.n() / 2);
    let dir = g.out_dir();
    let mut log = ArtifactLog::new(&dir);
    let stem = input
        .file_stem()
        .map_or_else(|| "image".to_string(), |s| s.to_string_lossy().into_owned());
    let window = write_renders(&mut log, &img, &stem, column, true, true)?;
    log.finish(json!({
        "command": "render",
        "input": input,
        "column": column,
        "window": window,
    }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::new().parse_filters(level).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error kind={} code={} message={message:?}", e.kind(), e.exit_code());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
