use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hypersense::decomposition::{decompose, DecompositionResult};
use hypersense::em::synthesize_steering_config;
use hypersense::error::{Error, Result};
use hypersense::experiment::{
    run_position, run_sweep, self_test, steering_diagram, sweep_csv, BackendKind, ExperimentConfig,
};
use hypersense::geometry::{HsfConfiguration, SensingConfiguration};
use hypersense::io::{parse_vector, write_atomic};

#[derive(Parser)]
#[command(name = "hypersense", version, about = "Joint compressed sensing and beam steering on a binary metasurface")]
struct Cli {
    /// JSON experiment configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the number of cells per side.
    #[arg(long, global = true)]
    n: Option<usize>,

    /// Override the number of sampling rows.
    #[arg(long = "k", global = true)]
    k: Option<usize>,

    /// Override the sampling-matrix seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the steering configuration for the configured source and target.
    Synthesize {
        #[arg(long, default_value = "steering.csv")]
        output: String,
    },
    /// Decompose a vector file into binary rows and print the JSON result.
    Decompose {
        input: PathBuf,
        #[arg(long)]
        digits: Option<u32>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Run joint sensing for the configured source.
    Sense {
        /// Use the exactly linear reference backend instead of the EM model.
        #[arg(long)]
        ideal: bool,
    },
    /// Write a scattering diagram CSV.
    Scatter {
        /// Configuration CSV; defaults to the synthesized steering configuration.
        #[arg(long)]
        configuration: Option<PathBuf>,
        /// Interleave the first binary row of this sampling-matrix row.
        #[arg(long)]
        sensing_row: Option<usize>,
        #[arg(long, default_value = "scatter.csv")]
        output: String,
    },
    /// Efficiency sweep over the configured source positions.
    Sweep,
    /// Run the ideal-backend oracle checks.
    Selftest,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<ExperimentConfig>(&text).map_err(|e| Error::InvalidInput(format!("config: {e}")))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(n) = cli.n {
        cfg.n = n;
    }
    if let Some(k) = cli.k {
        cfg.k = k;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.output_dir = dir.to_string_lossy().into_owned();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    Path::new(&cfg.output_dir).join(name)
}

fn position_tag(phi: f64, theta: f64) -> String {
    format!("phi{phi}_theta{theta}")
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Synthesize { output } => {
            let scene = cfg.scene()?;
            let c_f = synthesize_steering_config(&scene, &cfg.target);
            let path = out_path(&cfg, output);
            write_atomic(&path, c_f.to_csv().as_bytes())?;
            println!("{}", path.display());
        }
        Command::Decompose { input, digits, epsilon } => {
            let v = parse_vector(&std::fs::read_to_string(input)?)?;
            let r: DecompositionResult = decompose(&v, digits.unwrap_or(cfg.digits), epsilon.unwrap_or(cfg.epsilon))?;
            println!("{}", r.to_json());
        }
        Command::Sense { ideal } => {
            let mut cfg = cfg.clone();
            if *ideal {
                cfg.backend = BackendKind::Ideal;
            }
            let outcome = run_position(&cfg, cfg.source.phi, cfg.source.theta)?;
            write_atomic(&out_path(&cfg, "wavefront.csv"), outcome.wavefront.to_csv().as_bytes())?;
            write_atomic(&out_path(&cfg, "wavefront.pgm"), &outcome.wavefront.to_pgm())?;
            write_atomic(&out_path(&cfg, "ground_truth.csv"), outcome.ground_truth.to_csv().as_bytes())?;
            write_atomic(&out_path(&cfg, "manifest.json"), outcome.manifest.to_json().as_bytes())?;
            write_atomic(&out_path(&cfg, "config.json"), cfg.to_json().as_bytes())?;
            println!(
                "{} measurements, efficiency {:.4} (sigma {:.2e}) -> {}",
                outcome.manifest.total_measurements,
                outcome.row.efficiency,
                outcome.row.sigma,
                cfg.output_dir
            );
        }
        Command::Scatter { configuration, sensing_row, output } => {
            let diagram = match configuration {
                Some(path) => {
                    let deployed = HsfConfiguration::from_csv(&std::fs::read_to_string(path)?)?;
                    hypersense::em::scattering_diagram(&deployed, &cfg.scene()?, cfg.scatter_resolution)?
                }
                None => {
                    let sensing = match sensing_row {
                        Some(i) => {
                            let a = cfg.sampling_matrix()?;
                            if *i >= a.rows() {
                                return Err(Error::InvalidInput(format!(
                                    "sensing row {i} out of range for K = {}",
                                    a.rows()
                                )));
                            }
                            let r = decompose(a.row(*i), cfg.digits, cfg.epsilon)?;
                            Some(SensingConfiguration::from_row(&r.rows[0], cfg.n / 2)?)
                        }
                        None => None,
                    };
                    steering_diagram(&cfg, sensing.as_ref())?
                }
            };
            let peak = diagram.peak();
            write_atomic(&out_path(&cfg, output), diagram.to_csv().as_bytes())?;
            println!("peak at phi={} theta={}", peak.phi, peak.theta);
        }
        Command::Sweep => {
            let outcomes = run_sweep(&cfg, &cfg.positions)?;
            for o in &outcomes {
                let tag = position_tag(o.row.phi, o.row.theta);
                write_atomic(&out_path(&cfg, &format!("{tag}/wavefront.csv")), o.wavefront.to_csv().as_bytes())?;
                write_atomic(&out_path(&cfg, &format!("{tag}/wavefront.pgm")), &o.wavefront.to_pgm())?;
                write_atomic(&out_path(&cfg, &format!("{tag}/manifest.json")), o.manifest.to_json().as_bytes())?;
            }
            let rows: Vec<_> = outcomes.into_iter().map(|o| o.row).collect();
            let csv = sweep_csv(&rows);
            write_atomic(&out_path(&cfg, "sweep.csv"), csv.as_bytes())?;
            write_atomic(&out_path(&cfg, "config.json"), cfg.to_json().as_bytes())?;
            print!("{csv}");
        }
        Command::Selftest => {
            let checks = self_test();
            let mut failed = 0;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                failed += usize::from(!c.passed);
            }
            if failed > 0 {
                return Err(Error::Numerical(format!("{failed} self-test check(s) failed")));
            }
        }
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidInput(_) | Error::DimensionMismatch(_) | Error::Parse(_) | Error::Json(_) => 2,
        Error::Numerical(_) => 3,
        Error::Io(_) => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
