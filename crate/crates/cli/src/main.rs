use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hyperwalk::io::{run, RunConfig};
use serde_json::{json, Value};

/// Batch runner for random-walk experiments on hyperbolic groups.
///
/// Reads a JSON run configuration, executes its operation and writes CSV/JSON
/// artifacts plus manifest.json to the output directory. Every flag below
/// overrides the config field of the same name; precedence is
/// flags > config file > built-in defaults.
///
/// Exit status: 0 on success, 1 for a malformed config or unknown
/// operation, 2 when a precondition fails, 3 on resource or precision limits.
#[derive(Debug, Parser)]
#[command(name = "hyperwalk", version)]
struct Cli {
    /// Path to the JSON run configuration.
    config: PathBuf,

    /// operation: spheres, pn, spectral-radius, green, ancona, avoidance,
    /// pressure, sphere-sums, eta, llt, cesaro, renewal, cocycle,
    /// validate-automaton.
    #[arg(long)]
    operation: Option<String>,
    /// output_dir
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// cache_dir (defaults to $HYPERWALK_CACHE)
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    /// workers: thread cap
    #[arg(long)]
    workers: Option<usize>,

    /// params.n_max
    #[arg(long)]
    n_max: Option<usize>,
    /// params.n_min
    #[arg(long)]
    n_min: Option<usize>,
    /// params.n_list, comma separated
    #[arg(long, value_delimiter = ',')]
    n_list: Option<Vec<usize>>,
    /// params.prune_eps
    #[arg(long)]
    prune_eps: Option<f64>,
    /// params.r_grid, comma separated
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    r_grid: Option<Vec<f64>>,
    /// params.r_relative: read r_grid as multiples of R
    #[arg(long)]
    r_relative: Option<bool>,
    /// params.depth: cylinder depth of potentials
    #[arg(long)]
    depth: Option<usize>,
    /// params.k_max: sphere truncation
    #[arg(long)]
    k_max: Option<usize>,
    /// params.radius
    #[arg(long)]
    radius: Option<usize>,
    /// params.samples
    #[arg(long)]
    samples: Option<usize>,
    /// params.seed
    #[arg(long)]
    seed: Option<u64>,
    /// params.x
    #[arg(long)]
    x: Option<String>,
    /// params.y
    #[arg(long)]
    y: Option<String>,
    /// params.z
    #[arg(long)]
    z: Option<String>,
    /// params.threshold
    #[arg(long)]
    threshold: Option<f64>,
    /// params.margin
    #[arg(long)]
    margin: Option<usize>,
    /// params.backend: auto, tree or series
    #[arg(long)]
    backend: Option<String>,
    /// params.precision: f64, double-double or rational
    #[arg(long)]
    precision: Option<String>,
    /// params.automaton_file
    #[arg(long)]
    automaton_file: Option<PathBuf>,
}

impl Cli {
    fn overrides(&self) -> Vec<(String, Value)> {
        let mut out = Vec::new();
        let mut set = |key: &str, v: Option<Value>| {
            if let Some(v) = v {
                out.push((key.to_string(), v));
            }
        };
        set("operation", self.operation.as_ref().map(|v| json!(v)));
        set("output_dir", self.output_dir.as_ref().map(|v| json!(v)));
        set("cache_dir", self.cache_dir.as_ref().map(|v| json!(v)));
        set("workers", self.workers.map(|v| json!(v)));
        set("params.n_max", self.n_max.map(|v| json!(v)));
        set("params.n_min", self.n_min.map(|v| json!(v)));
        set("params.n_list", self.n_list.as_ref().map(|v| json!(v)));
        set("params.prune_eps", self.prune_eps.map(|v| json!(v)));
        set("params.r_grid", self.r_grid.as_ref().map(|v| json!(v)));
        set("params.r_relative", self.r_relative.map(|v| json!(v)));
        set("params.depth", self.depth.map(|v| json!(v)));
        set("params.k_max", self.k_max.map(|v| json!(v)));
        set("params.radius", self.radius.map(|v| json!(v)));
        set("params.samples", self.samples.map(|v| json!(v)));
        set("params.seed", self.seed.map(|v| json!(v)));
        set("params.x", self.x.as_ref().map(|v| json!(v)));
        set("params.y", self.y.as_ref().map(|v| json!(v)));
        set("params.z", self.z.as_ref().map(|v| json!(v)));
        set("params.threshold", self.threshold.map(|v| json!(v)));
        set("params.margin", self.margin.map(|v| json!(v)));
        set("params.backend", self.backend.as_ref().map(|v| json!(v)));
        set("params.precision", self.precision.as_ref().map(|v| json!(v)));
        set("params.automaton_file", self.automaton_file.as_ref().map(|v| json!(v)));
        out
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let cfg = match RunConfig::load(&cli.config, &cli.overrides()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("hyperwalk: {e}");
            return ExitCode::from(1);
        }
    };
    match run(&cfg) {
        Ok(outcome) => {
            if let Some(err) = &outcome.manifest.error {
                eprintln!("hyperwalk: {err}");
            } else {
                println!("{} {}", outcome.manifest.status, outcome.manifest_path.display());
            }
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("hyperwalk: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
