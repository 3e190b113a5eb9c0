use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shapeforge::config::RunConfig;
use shapeforge::driver;
use shapeforge::Error;

#[derive(Parser)]
#[command(name = "shapeforge", version, about = "Shape optimization of an obstacle in channel flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file (key = value).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overrides output.dir.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Step budget, overrides outer.max_steps.
    #[arg(long)]
    steps: Option<usize>,
    /// Validate the configuration and print it without solving.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the optimization and write CSV, VTK and summary artifacts.
    Run(Common),
    /// Repeat the run on several refinement levels and compare the shapes.
    GridStudy {
        #[command(flatten)]
        common: Common,
        /// Refinement counts, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "2,3")]
        levels: Vec<usize>,
    },
    /// Compare the adjoint gradient with finite differences.
    GradientCheck {
        #[command(flatten)]
        common: Common,
        /// Number of dofs to probe.
        #[arg(long, default_value_t = 10)]
        dofs: usize,
        /// Refinement count, overrides mesh.refinements.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Print mesh hierarchy statistics.
    MeshInfo {
        #[command(flatten)]
        common: Common,
        /// Refinement count, overrides mesh.refinements.
        #[arg(long)]
        levels: Option<usize>,
    },
}

fn load(common: &Common) -> Result<RunConfig, (u8, String)> {
    let mut cfg = match &common.config {
        Some(p) if !p.is_file() => return Err((2, format!("config file not found: {}", p.display()))),
        Some(p) => RunConfig::from_file(p).map_err(|e| (2, e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(o) = &common.output {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = common.steps {
        cfg.optimizer.max_steps = s;
    }
    cfg.validate().map_err(|e| (2, e.to_string()))?;
    Ok(cfg)
}

fn fail(e: Error) -> (u8, String) {
    (1, e.to_string())
}

fn run(cli: Cli) -> Result<(), (u8, String)> {
    match cli.command {
        Command::Run(common) => {
            let cfg = load(&common)?;
            if common.dry_run {
                print!("{}", cfg.to_text());
                return Ok(());
            }
            let out = driver::run_optimization(&cfg).map_err(fail)?;
            print!("{}", out.summary.to_text());
            if let Some(f) = &out.summary.failure {
                return Err((1, format!("optimization stopped: {f}")));
            }
        }
        Command::GridStudy { common, levels } => {
            let cfg = load(&common)?;
            if levels.len() < 2 {
                return Err((2, format!("grid study needs at least 2 levels, got {}", levels.len())));
            }
            if common.dry_run {
                print!("{}", cfg.to_text());
                println!("# levels = {levels:?}");
                return Ok(());
            }
            let report = driver::run_grid_study(&cfg, &levels).map_err(fail)?;
            print!("{}", report.to_text());
        }
        Command::GradientCheck { common, dofs, levels } => {
            let mut cfg = load(&common)?;
            if let Some(l) = levels {
                cfg.refinements = l;
            }
            if common.dry_run {
                print!("{}", cfg.to_text());
                return Ok(());
            }
            let disc = driver::build_discretization(&cfg, cfg.refinements).map_err(fail)?;
            let report = driver::gradient_check(&cfg, &disc, dofs).map_err(fail)?;
            print!("{}", report.to_text());
            println!("max_rel_error = {:.3e}", report.max_rel_error());
        }
        Command::MeshInfo { common, levels } => {
            let cfg = load(&common)?;
            let info = driver::mesh_info(&cfg, levels.unwrap_or(cfg.refinements)).map_err(fail)?;
            println!("level,vertices,triangles,obstacle_edges,max_obstacle_edge");
            for (l, (nv, nt, ne, h)) in info.levels.iter().enumerate() {
                println!("{l},{nv},{nt},{ne},{h:.6e}");
            }
            println!("area = {:.12e}", info.area);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
