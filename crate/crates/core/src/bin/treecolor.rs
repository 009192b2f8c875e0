use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use treecolor::harness::{run_experiment, run_sweep, ExperimentConfig, ExperimentKind};
use treecolor::Result;

#[derive(Parser)]
#[command(name = "treecolor", version, about = "Tree coloring reconstruction experiments")]
struct Cli {
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    replicas: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_name = "csv|json")]
    format: Option<String>,
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Tree {
    #[arg(long)]
    delta: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    depth: Option<usize>,
}

#[derive(Args, Default)]
struct Sampling {
    #[arg(long)]
    samples: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Root marginal given a leaf coloring.
    Marginal {
        #[command(flatten)]
        tree: Tree,
        /// File holding the leaf coloring, or the coloring itself.
        #[arg(long)]
        leaves: Option<String>,
        #[arg(long)]
        forbidden_root: Option<usize>,
        /// Rational arithmetic.
        #[arg(long)]
        exact: bool,
        #[arg(long, value_name = "rational|float")]
        backend: Option<String>,
    },
    /// Leaf colorings from the broadcast process.
    Broadcast {
        #[command(flatten)]
        tree: Tree,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long)]
        root_color: Option<usize>,
        #[arg(long)]
        summary: bool,
    },
    /// Probability that a broadcast coloring is not unbiasing.
    Unbiasing {
        #[command(flatten)]
        tree: Tree,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long)]
        highly: bool,
    },
    /// Downward coupling, down-up TV, or the disagreement branching process.
    Couple {
        #[command(flatten)]
        tree: Tree,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long)]
        c1: Option<usize>,
        #[arg(long)]
        c2: Option<usize>,
        #[arg(long, value_name = "down|downup|branching")]
        mode: Option<String>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Mean root bias over a range of depths.
    Bias {
        #[command(flatten)]
        tree: Tree,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long, value_name = "L1..L2")]
        depth_range: Option<String>,
        #[arg(long)]
        color: Option<usize>,
    },
    /// Tail of the root bias, or the coupling-to-concentration comparison.
    Concentration {
        #[command(flatten)]
        tree: Tree,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long)]
        color: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        reduction_delta: Option<f64>,
        #[arg(long)]
        c1: Option<usize>,
        #[arg(long)]
        c2: Option<usize>,
    },
    /// Block heat-bath dynamics, simulated or as an exact matrix.
    Dynamics {
        #[arg(long)]
        delta: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        /// Tree depth.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        block_depth: Option<usize>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long)]
        exact: bool,
        /// Write the exact transition matrix as CSV.
        #[arg(long)]
        matrix_out: Option<PathBuf>,
    },
    /// One experiment per depth, emitted as a decay curve.
    Sweep {
        /// bias | unbiasing | couple | concentration
        #[arg(long, value_name = "KIND")]
        of: Option<String>,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long)]
        delta: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_name = "L1..L2")]
        depth_range: Option<String>,
        #[arg(long)]
        color: Option<usize>,
        #[arg(long)]
        c1: Option<usize>,
        #[arg(long)]
        c2: Option<usize>,
        #[arg(long)]
        mode: Option<String>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        epsilon: Option<f64>,
    },
}

type Pairs = Vec<(&'static str, Option<String>)>;

fn s<T: ToString>(x: &Option<T>) -> Option<String> {
    x.as_ref().map(ToString::to_string)
}

fn on(b: bool) -> Option<String> {
    b.then(|| "true".to_string())
}

impl Tree {
    fn pairs(&self) -> Pairs {
        vec![("delta", s(&self.delta)), ("k", s(&self.k)), ("depth", s(&self.depth))]
    }
}

impl Command {
    fn kind(&self) -> Option<ExperimentKind> {
        Some(match self {
            Command::Marginal { .. } => ExperimentKind::Marginal,
            Command::Broadcast { .. } => ExperimentKind::Broadcast,
            Command::Unbiasing { .. } => ExperimentKind::Unbiasing,
            Command::Couple { .. } => ExperimentKind::Couple,
            Command::Bias { .. } => ExperimentKind::Bias,
            Command::Concentration { .. } => ExperimentKind::Concentration,
            Command::Dynamics { .. } => ExperimentKind::Dynamics,
            Command::Sweep { .. } => return None,
        })
    }

    fn pairs(&self) -> Pairs {
        match self {
            Command::Marginal {
                tree,
                leaves,
                forbidden_root,
                exact,
                backend,
            } => [
                tree.pairs(),
                vec![
                    ("leaves", leaves.clone()),
                    ("forbidden_root", s(forbidden_root)),
                    ("exact", on(*exact)),
                    ("backend", backend.clone()),
                ],
            ]
            .concat(),
            Command::Broadcast {
                tree,
                sampling,
                root_color,
                summary,
            } => [
                tree.pairs(),
                vec![
                    ("samples", s(&sampling.samples)),
                    ("root_color", s(root_color)),
                    ("summary", on(*summary)),
                ],
            ]
            .concat(),
            Command::Unbiasing {
                tree,
                sampling,
                epsilon,
                highly,
            } => [
                tree.pairs(),
                vec![
                    ("samples", s(&sampling.samples)),
                    ("epsilon", s(epsilon)),
                    ("highly", on(*highly)),
                ],
            ]
            .concat(),
            Command::Couple {
                tree,
                sampling,
                c1,
                c2,
                mode,
                threshold,
            } => [
                tree.pairs(),
                vec![
                    ("samples", s(&sampling.samples)),
                    ("c1", s(c1)),
                    ("c2", s(c2)),
                    ("mode", mode.clone()),
                    ("threshold", s(threshold)),
                ],
            ]
            .concat(),
            Command::Bias {
                tree,
                sampling,
                depth_range,
                color,
            } => [
                tree.pairs(),
                vec![
                    ("samples", s(&sampling.samples)),
                    ("depth_range", depth_range.clone()),
                    ("color", s(color)),
                ],
            ]
            .concat(),
            Command::Concentration {
                tree,
                sampling,
                color,
                threshold,
                reduction_delta,
                c1,
                c2,
            } => [
                tree.pairs(),
                vec![
                    ("samples", s(&sampling.samples)),
                    ("color", s(color)),
                    ("threshold", s(threshold)),
                    ("reduction_delta", s(reduction_delta)),
                    ("c1", s(c1)),
                    ("c2", s(c2)),
                ],
            ]
            .concat(),
            Command::Dynamics {
                delta,
                k,
                n,
                block_depth,
                steps,
                exact,
                matrix_out,
            } => vec![
                ("delta", s(delta)),
                ("k", s(k)),
                ("n", s(n)),
                ("block_depth", s(block_depth)),
                ("steps", s(steps)),
                ("exact", on(*exact)),
                ("matrix_out", matrix_out.as_ref().map(|p| p.display().to_string())),
            ],
            Command::Sweep {
                of,
                sampling,
                delta,
                k,
                depth_range,
                color,
                c1,
                c2,
                mode,
                threshold,
                epsilon,
            } => vec![
                ("kind", of.clone()),
                ("samples", s(&sampling.samples)),
                ("delta", s(delta)),
                ("k", s(k)),
                ("depth_range", depth_range.clone()),
                ("color", s(color)),
                ("c1", s(c1)),
                ("c2", s(c2)),
                ("mode", mode.clone()),
                ("threshold", s(threshold)),
                ("epsilon", s(epsilon)),
            ],
        }
    }
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(cli.command.kind().unwrap_or(ExperimentKind::Bias));
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    if let Some(kind) = cli.command.kind() {
        cfg.kind = kind;
    }
    let globals: Pairs = vec![
        ("seed", s(&cli.seed)),
        ("replicas", s(&cli.replicas)),
        ("out", cli.out.as_ref().map(|p| p.display().to_string())),
        ("format", cli.format.clone()),
    ];
    for (key, value) in globals.into_iter().chain(cli.command.pairs()) {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = build_config(cli)?;
    let (text, elapsed) = if matches!(cli.command, Command::Sweep { .. }) {
        let start = std::time::Instant::now();
        let (_, curve) = run_sweep(&cfg)?;
        let format = cfg.format.unwrap_or(treecolor::harness::OutputFormat::Csv);
        (curve.render(format), start.elapsed())
    } else {
        let record = run_experiment(&cfg)?;
        (record.render(cfg.output_format())?, record.duration)
    };
    match &cfg.out {
        Some(path) => std::fs::write(path, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    eprintln!("{} finished in {:.3}s", cli.command.name(), elapsed.as_secs_f64());
    Ok(())
}

impl Command {
    fn name(&self) -> &'static str {
        self.kind().map_or("sweep", ExperimentKind::name)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
