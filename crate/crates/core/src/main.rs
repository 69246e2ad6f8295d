use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use c2f_core::c2f::{complete_coarse, refine, write_stage_log, C2FPlan, SHORTCUT_EPSILON0};
use c2f_core::experiment::{run_experiment, ExperimentSpec, Mode};
use c2f_core::io::{generate_mask, load_image, save_image, MaskFile, MaskMode};
use c2f_core::metrics::{rpr_table, MetricReport};
use c2f_core::{Error, Result, SolverConfig, SolverKind};

#[derive(Parser)]
#[command(
    name = "c2f",
    version,
    about = "Coarse-to-fine low-rank tensor completion for images"
)]
struct Cli {
    /// Log more (repeat for debug output).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Restore one image.
    Complete(CompleteArgs),
    /// Run a batch experiment described by a TOML file.
    Experiment { spec: PathBuf },
    /// Print the average relative patch rank per grid stage.
    Rpr {
        image: PathBuf,
        #[arg(long, default_value_t = 3)]
        stages: usize,
    },
    /// Create or inspect mask files.
    #[command(subcommand)]
    Mask(MaskCommand),
}

#[derive(Args)]
struct CompleteArgs {
    /// Input image (PNG or PPM).
    image: PathBuf,
    /// Where to write the restored image.
    #[arg(short, long)]
    out: PathBuf,
    /// Mask file marking the observed entries of the input.
    #[arg(long, conflicts_with = "missing_ratio")]
    mask: Option<PathBuf>,
    /// Hide this fraction of the input's entries; the input then serves as
    /// ground truth.
    #[arg(long, required_unless_present = "mask")]
    missing_ratio: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "per-entry")]
    mask_mode: MaskMode,
    #[arg(long, default_value = "tv2")]
    solver: SolverKind,
    #[arg(long, default_value = "c2f")]
    mode: Mode,
    /// Solver settings as TOML.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    stages: Option<usize>,
    #[arg(long)]
    epsilon0: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    /// Per-stage overlap; the last value repeats.
    #[arg(long, value_delimiter = ',')]
    overlap: Option<Vec<usize>>,
    /// Write the stage log (JSON lines) here.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Subcommand)]
enum MaskCommand {
    /// Draw a random mask for an image or explicit dims.
    Gen {
        #[arg(long, required_unless_present = "dims")]
        image: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', conflicts_with = "image")]
        dims: Option<Vec<usize>>,
        #[arg(long)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "per-entry")]
        mode: MaskMode,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Print the header of a mask file.
    Inspect { file: PathBuf },
}

fn complete(args: CompleteArgs) -> Result<()> {
    let image = load_image(&args.image)?;
    let (omega, truth_known) = match (&args.mask, args.missing_ratio) {
        (Some(path), _) => (MaskFile::load(path)?.mask, false),
        (None, Some(r)) => (
            generate_mask(image.dims(), r, args.seed, args.mask_mode)?,
            true,
        ),
        (None, None) => return Err(Error::Config("need --mask or --missing-ratio".into())),
    };
    if omega.dims() != image.dims() {
        return Err(Error::Config(format!(
            "mask dims {:?} do not match image dims {:?}",
            omega.dims(),
            image.dims()
        )));
    }
    let config = match &args.config {
        Some(path) => SolverConfig::from_toml(&std::fs::read_to_string(path)?)?,
        None => SolverConfig::for_order(image.order()),
    };
    let defaults = C2FPlan::default();
    let shortcut = args.mode == Mode::Shortcut;
    let plan = C2FPlan {
        stages: args.stages.unwrap_or(defaults.stages),
        epsilon0: args.epsilon0.unwrap_or(if shortcut {
            SHORTCUT_EPSILON0
        } else {
            defaults.epsilon0
        }),
        mu: args.mu.unwrap_or(defaults.mu),
        overlap: args.overlap.unwrap_or(defaults.overlap),
        solver: args.solver,
        config,
        shortcut,
        seed: args.seed,
    };
    plan.validate(image.order())?;

    let y = omega.observed_or_zero(&image)?;
    let truth = truth_known.then_some(&image);
    let coarse = complete_coarse(&y, &omega, &plan)?;
    let restored = if args.mode == Mode::Pure {
        coarse.restored
    } else {
        let result = refine(&y, &omega, &plan, &coarse, truth)?;
        if let Some(path) = &args.log {
            write_stage_log(&result, &plan, BufWriter::new(File::create(path)?))?;
        }
        for rec in &result.stage_records {
            let n = rec.replaced.iter().filter(|&&r| r).count();
            println!(
                "stage {}: replaced {n}/{} patches",
                rec.stage,
                rec.gaps.len()
            );
        }
        result.restored
    };
    save_image(&restored, &args.out)?;
    if truth_known {
        let m = MetricReport::compute(&restored, &image)?;
        println!("psnr {:.4} dB  rse {:.6}", m.psnr, m.rse);
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Complete(args) => complete(args),
        Command::Experiment { spec } => {
            let spec = ExperimentSpec::load(&spec)?;
            let report = run_experiment(&spec)?;
            print!("{}", report.results_csv());
            let failed = report.rows.iter().filter(|r| r.status != "ok").count();
            if failed > 0 {
                eprintln!("{failed} of {} cells failed", report.rows.len());
            }
            Ok(())
        }
        Command::Rpr { image, stages } => {
            let truth = load_image(&image)?;
            println!("stage,label,average_rpr,patches");
            for r in rpr_table(&truth, stages)? {
                println!(
                    "{},{},{:.6},{}",
                    r.stage,
                    r.label(),
                    r.average,
                    r.per_patch.len()
                );
            }
            Ok(())
        }
        Command::Mask(MaskCommand::Gen {
            image,
            dims,
            ratio,
            seed,
            mode,
            out,
        }) => {
            let dims = match (image, dims) {
                (Some(p), _) => load_image(p)?.dims().to_vec(),
                (None, Some(d)) => d,
                (None, None) => return Err(Error::Config("need --image or --dims".into())),
            };
            let mask = generate_mask(&dims, ratio, seed, mode)?;
            MaskFile {
                seed,
                missing_ratio: ratio,
                mask,
            }
            .save(out)
        }
        Command::Mask(MaskCommand::Inspect { file }) => {
            let m = MaskFile::load(file)?;
            println!("dims {:?}", m.mask.dims());
            println!("seed {}", m.seed);
            println!("missing_ratio {}", m.missing_ratio);
            println!("observed {} of {}", m.mask.observed_count(), m.mask.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
