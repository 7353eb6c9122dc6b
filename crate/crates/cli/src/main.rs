use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use salient_core::io::{load_image, load_map, load_map_raw, save_map, save_map_raw};
use salient_core::metrics::evaluate_pair_set;
use salient_core::pipeline::{parse_weights, run_demo, stage1_optimize, stage2_refine};
use salient_core::refiner::prior_rectify;
use salient_core::spr::spr_update;
use salient_core::{Error, PipelineConfig, RefinerConfig, SaliencyMap, SprWeights};

/// Saliency-map refinement, evaluation and the two-stage demo.
#[derive(Parser)]
#[command(name = "salient", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Refine a map with the image-driven affinity kernel.
    Refine {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long)]
        omega1: Option<f64>,
        #[arg(long)]
        omega2: Option<f64>,
        #[arg(long)]
        omega3: Option<f64>,
    },
    /// Fuse prior, posterior and previous labels.
    Spr {
        #[arg(long)]
        pri: PathBuf,
        #[arg(long)]
        post: PathBuf,
        #[arg(long)]
        prev: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Three weights summing to one, e.g. 0.2,0.6,0.2
        #[arg(long, value_parser = parse_weights)]
        weights: Option<(f64, f64, f64)>,
    },
    /// Run both stages on one image and write the final prediction.
    Optimize {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        no_curriculum: bool,
    },
    /// Score a directory of predictions against same-named ground truths.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare curriculum and SPR toggles on synthetic scenes.
    Demo {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8)]
        scenes: usize,
        #[arg(long, default_value = "demo-out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Print the effective configuration and exit.
        #[arg(long)]
        print_config: bool,
    },
}

/// Maps ending in `.raw` use the lossless text format; anything else is netpbm.
fn read_map(path: &Path) -> salient_core::Result<SaliencyMap> {
    if path.extension().is_some_and(|e| e == "raw") {
        load_map_raw(path)
    } else {
        load_map(path)
    }
}

fn write_map(map: &SaliencyMap, path: &Path) -> salient_core::Result<()> {
    if path.extension().is_some_and(|e| e == "raw") {
        save_map_raw(map, path)
    } else {
        save_map(map, path)
    }
}

fn load_config(path: Option<&Path>) -> salient_core::Result<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::File {
                path: p.to_path_buf(),
                source: Box::new(e.into()),
            })?;
            PipelineConfig::parse(&text).map_err(|e| Error::File {
                path: p.to_path_buf(),
                source: Box::new(e),
            })
        }
    }
}

fn run(command: Command) -> salient_core::Result<()> {
    match command {
        Command::Refine {
            image,
            map,
            out,
            iters,
            omega1,
            omega2,
            omega3,
        } => {
            let defaults = RefinerConfig::default();
            let cfg = RefinerConfig {
                omega1: omega1.unwrap_or(defaults.omega1),
                omega2: omega2.unwrap_or(defaults.omega2),
                omega3: omega3.unwrap_or(defaults.omega3),
                iterations: iters.unwrap_or(defaults.iterations),
                ..defaults
            };
            let img = load_image(&image)?;
            let s = read_map(&map)?;
            write_map(&prior_rectify(&s, &img, &cfg)?, &out)
        }
        Command::Spr {
            pri,
            post,
            prev,
            out,
            weights,
        } => {
            let w = match weights {
                Some((a, b, c)) => SprWeights::new(a, b, c)?,
                None => SprWeights::default(),
            };
            let fused = spr_update(&read_map(&pri)?, &read_map(&post)?, &read_map(&prev)?, &w)?;
            write_map(&fused, &out)
        }
        Command::Optimize {
            image,
            out,
            config,
            seed,
            no_curriculum,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if no_curriculum {
                cfg.curriculum = false;
            }
            let img = load_image(&image)?;
            let stage1 = stage1_optimize(&img, &cfg)?;
            let stage2 = stage2_refine(&img, &stage1.cue, &cfg, true)?;
            write_map(&stage2.prediction, &out)
        }
        Command::Eval { pred, gt, out } => {
            let report = evaluate_pair_set(&pred, &gt)?;
            fs::write(&out, report.to_csv())?;
            let m = &report.mean;
            println!(
                "{} images: mae {:.6} f_beta {:.6} e_xi {:.6}",
                report.per_image.len(),
                m.mae,
                m.f_beta,
                m.e_xi
            );
            Ok(())
        }
        Command::Demo {
            config,
            scenes,
            out,
            seed,
            print_config,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if print_config {
                print!("{}", cfg.to_text());
                return Ok(());
            }
            let report = run_demo(&cfg, scenes)?;
            report.write_to(&out)?;
            print!("{}", report.summary_csv());
            let (with, without) = report.stage1_collapses();
            println!("stage-1 collapses: curriculum on {with}, off {without}");
            Ok(())
        }
    }
}

/// 1 for bad configuration or parameters, 2 for bad data, 3 for numerical failure.
fn exit_code(err: &Error) -> u8 {
    match err {
        _ if err.is_numerical() => 3,
        Error::File { source, .. } => exit_code(source),
        Error::Config { .. } | Error::InvalidParameter { .. } => 1,
        _ => 2,
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
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
