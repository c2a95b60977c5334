use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use lpgw::harness::{
    corrupt_with_noise, eval_mre_pcc, export_kernel, gen_ellipses, knn_classify, pairwise, Dataset,
    DistanceMatrix, Method, PairwiseConfig, DEFAULT_FLOOR,
};
use lpgw::linearize::{embed_lpgw, Reference};
use lpgw::reference::{classical_mds, gw_barycenter, BarycenterConfig};
use lpgw::{Error, FwConfig, GaugeKind, GmSpace, Result};

#[derive(Parser)]
#[command(
    name = "lpgw",
    version,
    about = "Partial Gromov-Wasserstein distances and linear embeddings"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Mass penalty for PGW and aLPGW
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// gw, pgw, algw or alpgw
    #[arg(long, global = true, default_value = "pgw")]
    method: String,
    /// Reference space: JSON written by `barycenter` or a point-cloud CSV
    #[arg(long, global = true)]
    reference: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all logical cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long, global = true, default_value_t = 1000)]
    max_iters: usize,
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 1)]
    restarts: usize,
    /// Output file (or directory for gen-ellipses); stdout when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Point-cloud CSVs start with a header row
    #[arg(long, global = true)]
    header: bool,
    /// Gauge for point clouds read from CSV
    #[arg(long, global = true, default_value = "squared_euclidean")]
    gauge: String,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic set of filled ellipses and its manifest
    GenEllipses {
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 40)]
        n_min: usize,
        #[arg(long, default_value_t = 80)]
        n_max: usize,
    },
    /// Add uniform noise points to a point cloud
    Corrupt {
        input: PathBuf,
        #[arg(long)]
        eta: f64,
    },
    /// GW barycenter of one shape per label (or all shapes)
    Barycenter {
        manifest: PathBuf,
        /// Barycenter atoms (default: mean input size)
        #[arg(long)]
        support_size: Option<usize>,
        #[arg(long, default_value_t = 20)]
        outer_iters: usize,
        #[arg(long)]
        all: bool,
    },
    /// Classical MDS coordinates of a reference gauge
    Mds {
        input: PathBuf,
        #[arg(long, default_value_t = 2)]
        dim: usize,
    },
    /// Linear PGW embedding of one target against --reference
    Embed { target: PathBuf },
    /// Pairwise distance matrix of a manifest
    Pairwise {
        manifest: PathBuf,
        /// Build a GW barycenter of one shape per label as the reference
        #[arg(long)]
        auto_reference: bool,
        #[arg(long)]
        support_size: Option<usize>,
    },
    /// MRE and PCC between an exact and an approximate distance matrix
    Eval {
        exact: PathBuf,
        approx: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FLOOR)]
        floor: f64,
    },
    /// Nearest-representative classification from a distance matrix
    Knn {
        matrix: PathBuf,
        /// Manifest supplying the labels
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = 20)]
        trials: usize,
    },
    /// Write exp(-sigma D) for min-max normalized D
    ExportKernel {
        matrix: PathBuf,
        #[arg(long)]
        sigma: f64,
    },
}

impl Global {
    fn fw(&self) -> FwConfig {
        FwConfig {
            max_iters: self.max_iters,
            rel_tol: self.tol,
            restarts: self.restarts,
            seed: self.seed,
            ..FwConfig::default()
        }
    }

    fn kind(&self) -> Result<GaugeKind> {
        self.gauge.parse()
    }

    fn lambda(&self) -> Result<f64> {
        self.lambda
            .ok_or_else(|| Error::InvalidArgument("--lambda is required".into()))
    }

    fn reference(&self) -> Result<Reference> {
        let path = self
            .reference
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("--reference is required".into()))?;
        Reference::read(path, self.header, self.kind()?)
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => fs::write(path, text).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            }),
            None => stdout(text),
        }
    }

    fn out_path(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("--out is required".into()))
    }
}

// a closed pipe (`| head`) is not an error
fn stdout(text: &str) -> Result<()> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
        _ => Ok(()),
    }
}

fn to_json(value: &impl serde::Serialize) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

fn barycenter_of(
    data: &Dataset,
    picks: &[usize],
    support: Option<usize>,
    outer: usize,
    g: &Global,
) -> Result<Reference> {
    let inputs: Vec<GmSpace> = picks.iter().map(|&i| data.spaces[i].clone()).collect();
    let mean = inputs.iter().map(GmSpace::len).sum::<usize>() / inputs.len().max(1);
    let mut cfg = BarycenterConfig::new(support.unwrap_or(mean.max(1)));
    cfg.outer_iters = outer;
    cfg.fw = g.fw();
    cfg.seed = g.seed;
    let bary = gw_barycenter(&inputs, &cfg)?;
    log::info!("barycenter objective trace {:?}", bary.objective_trace);
    Ok(Reference::new("barycenter", bary.space))
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match &cli.command {
        Command::GenEllipses {
            count,
            n_min,
            n_max,
        } => {
            let manifest = gen_ellipses(*count, *n_min, *n_max, g.seed, g.out_path()?)?;
            println!("wrote {} shapes", manifest.shapes.len());
        }
        Command::Corrupt { input, eta } => {
            let space = GmSpace::read_pointcloud(input, g.header, g.kind()?)?;
            g.emit(&corrupt_with_noise(&space, *eta, g.seed)?.to_pointcloud_csv()?)?;
        }
        Command::Barycenter {
            manifest,
            support_size,
            outer_iters,
            all,
        } => {
            let data = Dataset::load(manifest, g.header)?;
            let picks: Vec<usize> = if *all {
                (0..data.len()).collect()
            } else {
                data.one_per_label()
            };
            let reference = barycenter_of(&data, &picks, *support_size, *outer_iters, g)?;
            g.emit(&reference.to_json()?)?;
        }
        Command::Mds { input, dim } => {
            let reference = Reference::read(input, g.header, g.kind()?)?;
            let coords = classical_mds(reference.space.gauge().view(), *dim)?;
            let space = GmSpace::from_points(
                coords,
                reference.space.mass().clone(),
                GaugeKind::SquaredEuclidean,
            )?;
            g.emit(&space.to_pointcloud_csv()?)?;
        }
        Command::Embed { target } => {
            let reference = g.reference()?;
            let target = GmSpace::read_pointcloud(target, g.header, g.kind()?)?;
            g.emit(&embed_lpgw(&reference, &target, g.lambda()?, &g.fw())?.to_json()?)?;
        }
        Command::Pairwise {
            manifest,
            auto_reference,
            support_size,
        } => {
            let method: Method = g.method.parse()?;
            let data = Dataset::load(manifest, g.header)?;
            let reference = match (method.needs_reference(), auto_reference) {
                (false, _) => None,
                (true, true) => Some(barycenter_of(
                    &data,
                    &data.one_per_label(),
                    *support_size,
                    20,
                    g,
                )?),
                (true, false) => Some(g.reference()?),
            };
            let cfg = PairwiseConfig {
                fw: g.fw(),
                jobs: g.jobs,
            };
            let dm = pairwise(&data, method, g.lambda, reference.as_ref(), &cfg)?;
            match &g.out {
                Some(path) => dm.write(path)?,
                None => stdout(&dm.to_csv())?,
            }
            eprintln!(
                "{}",
                json!({
                    "method": method.as_str(),
                    "shapes": dm.len(),
                    "solver_calls": dm.solver_calls,
                    "wall_clock_seconds": dm.wall_clock_seconds,
                })
            );
        }
        Command::Eval {
            exact,
            approx,
            floor,
        } => {
            let exact = DistanceMatrix::read(exact, Method::Pgw)?;
            let approx = DistanceMatrix::read(approx, Method::Alpgw)?;
            g.emit(&to_json(&eval_mre_pcc(&exact, &approx, *floor)?)?)?;
        }
        Command::Knn {
            matrix,
            manifest,
            trials,
        } => {
            let dm = DistanceMatrix::read(matrix, g.method.parse()?)?;
            let data = Dataset::load(manifest, g.header)?;
            if data.ids != dm.ids {
                return Err(Error::DimensionMismatch(
                    "manifest and matrix list different ids".into(),
                ));
            }
            g.emit(&to_json(&knn_classify(
                &dm,
                &data.labels,
                *trials,
                g.seed,
            )?)?)?;
        }
        Command::ExportKernel { matrix, sigma } => {
            let dm = DistanceMatrix::read(matrix, g.method.parse()?)?;
            export_kernel(&dm, *sigma, g.out_path()?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
