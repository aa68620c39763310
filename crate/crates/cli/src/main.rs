mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::{parse_complex, MaterialKind, RunConfig, Seeds};
use polyspec::microgeometry::AngleDistribution;
use polyspec::Error;
use std::path::PathBuf;
use std::process::ExitCode;

/// Spectral measures, effective tensors and bounds for lattice polycrystals
/// and two-component media.
///
/// Settings are resolved as defaults, then the `--config` file, then flags.
/// The worker count comes from POLYSPEC_THREADS (default: all cores).
///
/// Exit codes: 0 success, 2 configuration error, 3 contrast or ellipticity
/// domain error, 4 numerical consistency failure.
#[derive(Parser, Debug)]
#[command(name = "polyspec", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write one microstructure file per seed.
    Generate(Common),
    /// Write spectral measure files per seed, operator kind and (j, k).
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Operator kind label, e.g. x1_gamma_x1 (repeatable).
        #[arg(long = "kind")]
        kinds: Vec<String>,
    },
    /// Effective tensors at the configured contrast, as a sweep CSV.
    Effective(Common),
    /// First- and second-order regions and per-realization membership.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mu0: Option<f64>,
        #[arg(long)]
        mu1: Option<f64>,
    },
    /// Run the invariant suite on the first seed.
    Verify(Common),
    /// Effective tensors over seeds and the contrast grid.
    Sweep(Common),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    /// Lattice side length.
    #[arg(short = 'L', long = "side")]
    side: Option<usize>,
    #[arg(long)]
    crystallites: Option<usize>,
    #[arg(long, value_enum)]
    material: Option<MaterialKind>,
    /// Phase-one volume fraction of two-component media.
    #[arg(long)]
    p: Option<f64>,
    /// Orientation distribution: uniform or haar.
    #[arg(long)]
    angles: Option<String>,
    /// Explicit seed list, comma separated.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    seed_count: Option<u64>,
    #[arg(long)]
    seed_base: Option<u64>,
    /// Phase-one conductivity as `re,im`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    sigma1: Option<[f64; 2]>,
    /// Phase-two conductivity as `re,im`.
    #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
    sigma2: Option<[f64; 2]>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    dense_cap: Option<usize>,
}

impl Common {
    fn resolve(&self) -> polyspec::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = self.d {
            c.d = v;
        }
        if let Some(v) = self.side {
            c.side = v;
        }
        if let Some(v) = self.crystallites {
            c.crystallites_per_side = v;
        }
        if let Some(v) = self.material {
            c.material_kind = v;
        }
        if let Some(v) = self.p {
            c.p = v;
        }
        if let Some(v) = &self.angles {
            c.angle_distribution = match v.as_str() {
                "uniform" => AngleDistribution::Uniform,
                "haar" => AngleDistribution::Haar,
                other => return Err(Error::Config(format!("unknown angle distribution '{other}'"))),
            };
        }
        if let Some(v) = &self.seeds {
            c.seeds = Seeds::List(v.clone());
        }
        if self.seed_count.is_some() || self.seed_base.is_some() {
            let (count, base) = match c.seeds {
                Seeds::Count { count, base } => (count, base),
                Seeds::List(_) => (1, 1),
            };
            c.seeds = Seeds::Count { count: self.seed_count.unwrap_or(count), base: self.seed_base.unwrap_or(base) };
        }
        if let Some(v) = self.sigma1 {
            c.sigma1 = v;
        }
        if let Some(v) = self.sigma2 {
            c.sigma2 = v;
        }
        if let Some(v) = &self.output_dir {
            c.output_dir = v.clone();
        }
        if let Some(v) = self.dense_cap {
            c.tolerances.dense_cap = v;
        }
        Ok(c)
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Domain(_) => 3,
        Error::Consistency(_)
        | Error::SpectrumExcursion { .. }
        | Error::Convergence(_)
        | Error::Solver { .. }
        | Error::PoleProximity { .. } => 4,
        _ => 2,
    }
}

fn run(cli: Cli) -> polyspec::Result<()> {
    match cli.command {
        Command::Generate(c) => commands::generate(&c.resolve()?),
        Command::Spectrum { common, kinds } => {
            let mut c = common.resolve()?;
            if !kinds.is_empty() {
                c.kinds = Some(kinds);
            }
            commands::spectrum(&c)
        }
        Command::Effective(c) => commands::effective(&c.resolve()?),
        Command::Bounds { common, mu0, mu1 } => {
            let mut c = common.resolve()?;
            match (mu0, mu1, c.moments) {
                (Some(a), Some(b), _) => c.moments = Some([a, b]),
                (Some(_), None, _) | (None, Some(_), _) => {
                    return Err(Error::Config("--mu0 and --mu1 must be given together".into()))
                }
                _ => {}
            }
            commands::bounds(&c)
        }
        Command::Verify(c) => commands::verify(&c.resolve()?),
        Command::Sweep(c) => commands::sweep(&c.resolve()?),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
