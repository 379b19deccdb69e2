use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wallopt::basins::{
    basin_stats, discover_attractors, labels_csv, rasterize, write_ppm, BasinGrid, PALETTE,
};
use wallopt::config::{ObjectiveSpec, RunSpec, StartSpec, WallSpec};
use wallopt::drivers::read_log;
use wallopt::experiments::{report, run_example, Overrides, WallChoice};
use wallopt::optimizers::{Method, Termination};
use wallopt::Error;

#[derive(Parser)]
#[command(name = "wallopt", version, about = "Optimization with pole and constant walls")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one of the nine preset experiments.
    Example(ExampleArgs),
    /// One optimizer run from a config file or a builtin objective.
    Minimize(MinimizeArgs),
    /// Basins of attraction over a square grid.
    Basin(BasinArgs),
    /// Summarize JSONL run logs.
    Report {
        #[arg(required = false)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Args)]
struct Tuning {
    /// gd, bgd, bnqn, pgd or armijo-constrained.
    #[arg(long)]
    method: Option<Method>,
    /// pole, product, constant, h1, h2 or none.
    #[arg(long)]
    wall: Option<WallChoice>,
    /// Pole exponent.
    #[arg(long = "N")]
    n: Option<u32>,
    /// Constant-wall height.
    #[arg(long = "R")]
    r: Option<f64>,
    /// Pole-wall offset.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Regularization of the h1/h2 walls.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Start point, `x,y`.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
    start: Option<Point>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct ExampleArgs {
    /// Example number, 1 to 9.
    #[arg(value_parser = clap::value_parser!(u8).range(1..=9))]
    example: u8,
    #[command(flatten)]
    tuning: Tuning,
    /// `center_x,center_y,half_width,resolution`
    #[arg(long, allow_hyphen_values = true, value_parser = parse_grid)]
    grid: Option<([f64; 2], f64, usize)>,
    /// Exit with status 4 when an acceptance check fails.
    #[arg(long)]
    check: bool,
    /// Rasterizer threads.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct MinimizeArgs {
    /// RunSpec JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Builtin objective, used when no config is given.
    #[arg(long)]
    objective: Option<String>,
    #[command(flatten)]
    tuning: Tuning,
}

#[derive(Args)]
struct BasinArgs {
    /// RunSpec JSON file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Builtin objective, used when no config is given.
    #[arg(long)]
    objective: Option<String>,
    #[command(flatten)]
    tuning: Tuning,
    /// `center_x,center_y,half_width,resolution`
    #[arg(long, allow_hyphen_values = true, value_parser = parse_grid)]
    grid: ([f64; 2], f64, usize),
    /// Known attractor `x,y`; repeat for several. Discovered when absent.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
    attractor: Vec<Point>,
    /// Distance within which an endpoint belongs to an attractor.
    #[arg(long, default_value_t = 1e-4)]
    classify_tol: f64,
    /// Rasterizer threads.
    #[arg(long)]
    workers: Option<usize>,
}

/// Comma-separated coordinates.
#[derive(Clone, Debug)]
struct Point(Vec<f64>);

fn parse_point(s: &str) -> Result<Point, String> {
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}")))
        .collect::<Result<_, _>>()
        .map(Point)
}

fn parse_grid(s: &str) -> Result<([f64; 2], f64, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err("expected center_x,center_y,half_width,resolution".into());
    }
    let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    let res = parts[3].trim().parse::<usize>().map_err(|e| format!("`{}`: {e}", parts[3]))?;
    Ok(([num(parts[0])?, num(parts[1])?], num(parts[2])?, res))
}

/// Process exit statuses.
mod status {
    pub const NONFINITE: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const IO: u8 = 3;
    pub const CHECK: u8 = 4;
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    match e {
        Error::Io(_) => ExitCode::from(status::IO),
        _ => ExitCode::from(status::CONFIG),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Example(a) => cmd_example(a),
        Command::Minimize(a) => cmd_minimize(a),
        Command::Basin(a) => cmd_basin(a),
        Command::Report { paths } => cmd_report(&paths),
    };
    result.unwrap_or_else(fail)
}

fn cmd_example(a: ExampleArgs) -> Result<ExitCode, Error> {
    let t = a.tuning;
    let ov = Overrides {
        method: t.method,
        wall: t.wall,
        n: t.n,
        r: t.r,
        gamma: t.gamma,
        epsilon: t.epsilon,
        start: t.start.map(|p| p.0),
        seed: t.seed,
        grid: a.grid,
        workers: a.workers,
    };
    let rep = run_example(a.example as usize, &ov, Some(&t.out))?;
    for line in &rep.summary {
        println!("{line}");
    }
    for c in &rep.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for p in &rep.written {
        println!("wrote {}", p.display());
    }
    if rep.outcome.any_nonfinite() {
        eprintln!("a run ended with a non-finite value");
        return Ok(ExitCode::from(status::NONFINITE));
    }
    if a.check && !rep.all_passed() {
        return Ok(ExitCode::from(status::CHECK));
    }
    Ok(ExitCode::SUCCESS)
}

/// Builds the run spec from `--config` or `--objective`, then applies the
/// tuning flags.
fn build_spec(config: Option<&Path>, objective: Option<&str>, t: &Tuning) -> Result<RunSpec, Error> {
    let mut spec = match (config, objective) {
        (Some(_), Some(_)) => return Err(Error::Config("give --config or --objective, not both".into())),
        (Some(path), None) => RunSpec::load(path)?,
        (None, Some(name)) => RunSpec {
            objective: ObjectiveSpec::builtin(name),
            wall: WallSpec::None,
            optimizer: Default::default(),
            region: None,
            start: StartSpec::Fixed { point: Vec::new() },
            outputs: Default::default(),
            seed: 0,
        },
        (None, None) => return Err(Error::Config("need --config or --objective".into())),
    };
    if let Some(m) = t.method {
        spec.optimizer.method = m;
    }
    if let Some(s) = &t.start {
        spec.start = StartSpec::Fixed { point: s.0.clone() };
    }
    if let Some(seed) = t.seed {
        spec.seed = seed;
        spec.optimizer.seed = seed;
    }
    match t.wall {
        None => {}
        Some(WallChoice::None) => spec.wall = WallSpec::None,
        Some(w) => {
            let same = matches!(
                (w, &spec.wall),
                (WallChoice::Pole, WallSpec::Pole { .. })
                    | (WallChoice::Product, WallSpec::ProductPole { .. })
                    | (WallChoice::Constant, WallSpec::Constant { .. })
                    | (WallChoice::H1, WallSpec::H1 { .. })
                    | (WallChoice::H2, WallSpec::H2 { .. })
            );
            if !same {
                return Err(Error::Config(format!("--wall {w} needs a config that defines that wall")));
            }
        }
    }
    let bad = |flag: &str| Err(Error::Config(format!("{flag} does not apply to this wall")));
    if let Some(v) = t.n {
        match &mut spec.wall {
            WallSpec::Pole { n, .. } => *n = v,
            _ => return bad("--N"),
        }
    }
    if let Some(v) = t.gamma {
        match &mut spec.wall {
            WallSpec::Pole { gamma, .. } => *gamma = v,
            WallSpec::H1 { gamma0, .. } | WallSpec::H2 { gamma0, .. } => *gamma0 = v,
            _ => return bad("--gamma"),
        }
    }
    if let Some(v) = t.r {
        match &mut spec.wall {
            WallSpec::Constant { r, .. } => *r = v,
            _ => return bad("--R"),
        }
    }
    if let Some(v) = t.epsilon {
        match &mut spec.wall {
            WallSpec::H1 { epsilon, .. } | WallSpec::H2 { epsilon, .. } => *epsilon = v,
            _ => return bad("--epsilon"),
        }
    }
    Ok(spec)
}

fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.10}")).collect();
    format!("({})", parts.join(", "))
}

fn cmd_minimize(a: MinimizeArgs) -> Result<ExitCode, Error> {
    let spec = build_spec(a.config.as_deref(), a.objective.as_deref(), &a.tuning)?;
    if matches!(&spec.start, StartSpec::Fixed { point } if point.is_empty()) {
        return Err(Error::Config("need --start or a start in the config".into()));
    }
    let trace = spec.run()?;
    println!(
        "endpoint {} value {:.12e} grad_norm {:.3e} termination {}",
        fmt_point(trace.endpoint()),
        trace.final_value(),
        trace.final_grad_norm(),
        trace.termination
    );
    let path = match &spec.outputs.trace {
        Some(p) => p.clone(),
        None => {
            fs::create_dir_all(&a.tuning.out)?;
            a.tuning.out.join("trace.csv")
        }
    };
    trace.write_csv(BufWriter::new(File::create(&path)?))?;
    println!("wrote {}", path.display());
    Ok(match trace.termination {
        Termination::WallStart => {
            eprintln!("start point is on the wall");
            ExitCode::from(status::CONFIG)
        }
        Termination::NonFinite => ExitCode::from(status::NONFINITE),
        _ => ExitCode::SUCCESS,
    })
}

fn cmd_basin(a: BasinArgs) -> Result<ExitCode, Error> {
    let spec = build_spec(a.config.as_deref(), a.objective.as_deref(), &a.tuning)?;
    let obj = spec.objective()?;
    let (center, half_width, resolution) = a.grid;
    let mut grid = BasinGrid::new(center, half_width, resolution)?;
    grid.classify_tol = a.classify_tol;
    for (i, p) in a.attractor.iter().enumerate() {
        grid = grid.with_attractor(p.0.clone(), format!("a{i}"), PALETTE[i % PALETTE.len()])?;
    }
    let mut field = rasterize(obj.as_ref(), &spec.optimizer, &grid, a.workers)?;
    if a.attractor.is_empty() {
        for (i, p) in discover_attractors(&field, a.classify_tol).into_iter().enumerate() {
            grid = grid.with_attractor(p, format!("a{i}"), PALETTE[i % PALETTE.len()])?;
        }
        field.relabel(&grid);
    }
    let stats = basin_stats(&field, &grid);
    let out = &a.tuning.out;
    fs::create_dir_all(out)?;
    let image = spec.outputs.image.clone().unwrap_or_else(|| out.join("basin.ppm"));
    write_ppm(&field, &grid, &image)?;
    stats.write_csv(&out.join("basin_stats.csv"))?;
    fs::write(out.join("basin_labels.csv"), labels_csv(&field))?;
    fs::write(out.join("basin_grid.json"), serde_json::to_string_pretty(&grid)?)?;
    for (a, c) in grid.attractors.iter().zip(&stats.counts) {
        println!("{} {} {:.4}", a.label, fmt_point(&a.point), c.fraction);
    }
    if let Some(u) = stats.counts.iter().find(|c| c.label == wallopt::basins::UNRESOLVED) {
        println!("unresolved {:.4}", u.fraction);
    }
    println!("wrote {}", image.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(paths: &[PathBuf]) -> Result<ExitCode, Error> {
    let mut records = Vec::new();
    for p in paths {
        records.extend(read_log(BufReader::new(File::open(p)?))?);
    }
    if records.is_empty() {
        return Err(Error::Config("no log records to report".into()));
    }
    for line in report(&records) {
        println!("{line}");
    }
    Ok(ExitCode::SUCCESS)
}
