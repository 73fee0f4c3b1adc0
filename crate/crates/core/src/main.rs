use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use domconf::adaptnet::GradCheckCase;
use domconf::data::load_features;
use domconf::harness::{self, ExperimentConfig, LayerFiles, Method};
use domconf::mmd::{KernelSpec, MmdReport};
use domconf::{Error, Result};

/// Gradient checks pass below this relative error.
const GRADCHECK_TOL: f64 = 1e-4;

#[derive(Parser)]
#[command(name = "domconf", version, about = "MMD-based domain adaptation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kernel {
    Linear,
    Rbf,
}

#[derive(Subcommand)]
enum Command {
    /// Discrepancy between two feature files.
    Mmd {
        source: PathBuf,
        target: PathBuf,
        #[arg(long, value_enum, default_value = "linear")]
        kernel: Kernel,
        /// RBF gamma; the median heuristic is used when omitted.
        #[arg(long)]
        gamma: Option<f64>,
        /// Unbiased MMD² estimator (kernel mode only).
        #[arg(long)]
        unbiased: bool,
    },
    /// Rank representations given as `name=source.csv,target.csv`.
    SelectLayer {
        #[arg(required = true)]
        pairs: Vec<String>,
    },
    /// Train one network per width and pick the lowest-MMD width.
    SelectWidth {
        /// Comma list (`4,8,16`) or range (`64:4096:x2`, `8:64:+8`).
        #[arg(long)]
        widths: String,
        #[arg(long)]
        config: PathBuf,
    },
    /// Fine-tune the adaptation network on every split.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run one baseline on every split.
    Baseline {
        #[arg(long)]
        method: String,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run every applicable method on the same splits.
    Bench {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference gradients on random small networks.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        cases: u64,
    },
}

fn load_config(path: &PathBuf, output: Option<PathBuf>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if output.is_some() {
        cfg.output = output;
    }
    Ok(cfg)
}

fn parse_pair(spec: &str) -> Result<LayerFiles> {
    let bad = || Error::Config(format!("expected name=source.csv,target.csv, got `{spec}`"));
    let (name, files) = spec.split_once('=').ok_or_else(bad)?;
    let (source, target) = files.split_once(',').ok_or_else(bad)?;
    if name.is_empty() || source.is_empty() || target.is_empty() {
        return Err(bad());
    }
    Ok(LayerFiles {
        name: name.to_string(),
        source: source.into(),
        target: target.into(),
    })
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mmd {
            source,
            target,
            kernel,
            gamma,
            unbiased,
        } => {
            let (s, t) = (load_features(source)?, load_features(target)?);
            let report = match kernel {
                Kernel::Linear => {
                    if gamma.is_some() || unbiased {
                        return Err(Error::Config("--gamma and --unbiased need --kernel rbf".into()));
                    }
                    MmdReport::linear(s.features(), t.features())?
                }
                Kernel::Rbf => {
                    let spec = match gamma {
                        Some(g) => KernelSpec::rbf(g).map_err(|e| Error::Config(e.to_string()))?,
                        None => KernelSpec::rbf_median(s.features(), t.features())?,
                    };
                    MmdReport::kernel(s.features(), t.features(), spec, unbiased)?
                }
            };
            println!("value = {}", report.value);
            println!("estimator = {}", report.estimator);
            if let Some(k) = report.kernel {
                println!("kernel = {k}");
            }
            println!("n_source = {}", report.n_source);
            println!("n_target = {}", report.n_target);
        }
        Command::SelectLayer { pairs } => {
            let layers = pairs.iter().map(|p| parse_pair(p)).collect::<Result<Vec<_>>>()?;
            print!("{}", harness::layer_study(&layers)?.to_csv());
        }
        Command::SelectWidth { widths, config } => {
            let widths = harness::parse_widths(&widths)?;
            let cfg = load_config(&config, None)?;
            let study = harness::width_study(&cfg, &widths)?;
            let csv = study.table.to_csv();
            if let Some(dir) = &cfg.output {
                std::fs::create_dir_all(dir)?;
                harness::write_atomic(&dir.join("select_width.csv"), csv.as_bytes())?;
            }
            print!("{csv}");
        }
        Command::Train { config, output } => {
            let cfg = load_config(&config, output)?;
            if cfg.method != Method::ConfusionFinetune {
                return Err(Error::Config(format!(
                    "config selects method {}; use `domconf baseline` for baselines",
                    cfg.method
                )));
            }
            print!("{}", harness::run_experiment(&cfg)?.to_text());
        }
        Command::Baseline { method, config, output } => {
            let method: Method = method.parse()?;
            if method == Method::ConfusionFinetune {
                return Err(Error::Config("confusion_finetune is not a baseline; use `domconf train`".into()));
            }
            let mut cfg = load_config(&config, output)?;
            cfg.method = method;
            cfg.validate()?;
            print!("{}", harness::run_experiment(&cfg)?.to_text());
        }
        Command::Bench { config, output } => {
            let cfg = load_config(&config, output)?;
            let reports = harness::run_benchmark(&cfg)?;
            let summary = harness::benchmark_summary(&reports);
            if let Some(dir) = &cfg.output {
                std::fs::create_dir_all(dir)?;
                harness::write_atomic(&dir.join("summary.csv"), summary.as_bytes())?;
            }
            print!("{summary}");
        }
        Command::Gradcheck { seed, cases } => {
            if cases == 0 {
                return Err(Error::Config("--cases must be at least 1".into()));
            }
            let mut worst: f64 = 0.0;
            for i in 0..cases {
                let case = GradCheckCase::random(seed.wrapping_add(i))?;
                worst = worst.max(case.max_relative_error(1e-5)?);
            }
            println!("cases = {cases}");
            println!("max_relative_error = {worst:e}");
            if !(worst < GRADCHECK_TOL) {
                return Err(Error::DegenerateData(format!(
                    "gradient check failed: relative error {worst:e} exceeds {GRADCHECK_TOL:e}"
                )));
            }
        }
    }
    Ok(())
}

fn one_line(msg: &str) -> String {
    msg.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let rendered = e.render().to_string();
            let head = rendered.split("Usage:").next().unwrap_or("invalid arguments");
            eprintln!("E_USAGE: {}", one_line(head.trim_start_matches("error: ")));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let class = e.class();
            eprintln!("{}: {}", class.tag(), one_line(&e.to_string()));
            ExitCode::from(class.exit_code() as u8)
        }
    }
}
