//! `distsom`: train and evaluate distributional self-organizing maps.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use distsom_core::io::{aggregate_samples, load_table, write_table, TableFormat};
use distsom_core::pipeline::{evaluate, export_svg, run};
use distsom_core::{
    Algorithm, Error, ErrorKind, IndexReport, NeuronMetric, RunConfig, Scheme, Topology,
};

#[derive(Parser)]
#[command(
    name = "distsom",
    version,
    about = "Batch self-organizing maps for distributional data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert a CSV table or a raw-sample file into a JSON table.
    Ingest(IngestArgs),
    /// Train a map and write its artifacts.
    Train(TrainArgs),
    /// Recompute the validity report of a written map against class labels.
    Evaluate(EvaluateArgs),
    /// Render count and weight maps of a written map as SVG.
    ExportSvg(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum InputKind {
    /// JSON or CSV histogram table, chosen by extension.
    Table,
    /// Long CSV of raw samples, aggregated into equi-depth histograms.
    Samples,
}

#[derive(Args)]
struct IngestArgs {
    input: PathBuf,
    /// Output JSON table.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, value_enum, default_value = "table")]
    kind: InputKind,
    /// Samples per window (raw samples only).
    #[arg(long, default_value_t = 125)]
    window: usize,
    /// Histogram bins per window (raw samples only).
    #[arg(long, default_value_t = 10)]
    bins: usize,
}

#[derive(Args)]
struct TrainArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Output directory for the artifacts.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long)]
    algorithm: Option<Algorithm>,
    /// Weight scheme P1..P4 (ADBSOM only).
    #[arg(long)]
    scheme: Option<Scheme>,
    /// Divide each variable by its Fréchet standard deviation.
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    rows: Option<usize>,
    #[arg(long)]
    cols: Option<usize>,
    /// planar or toroidal.
    #[arg(long)]
    topology: Option<Topology>,
    /// euclidean or grid-path.
    #[arg(long)]
    metric: Option<NeuronMetric>,
    #[arg(long)]
    n_iter: Option<usize>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    t_min: Option<f64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    max_final_cycles: Option<usize>,
    /// `id,label` CSV for the external indexes.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Also write counts.svg and the weight maps.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Directory holding map.json, prototypes.json and weights.json.
    map_dir: PathBuf,
    /// `id,label` CSV.
    #[arg(long)]
    labels: PathBuf,
    /// Recompute the internal indexes from this table.
    #[arg(long)]
    table: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    map_dir: PathBuf,
    /// Output directory; defaults to the map directory.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl TrainArgs {
    fn config(self) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! take {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    c.$field = v;
                }
            )*};
        }
        take!(
            algorithm,
            topology,
            metric,
            n_iter,
            restarts,
            seed,
            max_final_cycles
        );
        macro_rules! take_opt {
            ($($field:ident),*) => {$(
                if self.$field.is_some() {
                    c.$field = self.$field;
                }
            )*};
        }
        take_opt!(scheme, rows, cols, t_max, t_min, input, output, labels);
        c.standardize |= self.standardize;
        c.svg |= self.svg;
        Ok(c)
    }
}

fn print_report(report: &IndexReport) {
    println!(
        "{}",
        serde_json::to_string_pretty(report).expect("serializable report")
    );
}

fn ingest(args: IngestArgs) -> Result<(), Error> {
    let table = match args.kind {
        InputKind::Table => load_table(&args.input, TableFormat::from_path(&args.input))?,
        InputKind::Samples => {
            let agg = aggregate_samples(&args.input, args.window, args.bins)?;
            for (id, n) in &agg.dropped {
                eprintln!("{id}: dropped {n} trailing samples");
            }
            agg.table
        }
    };
    write_table(&args.output, &table)?;
    eprintln!(
        "wrote {} objects x {} variables to {}",
        table.n_objects(),
        table.n_variables(),
        args.output.display()
    );
    Ok(())
}

fn train(args: TrainArgs) -> Result<(), Error> {
    let config = args.config()?;
    let out = run(&config)?;
    eprintln!(
        "restart {} of {}: criterion {:.6}, {} final cycles, converged {}",
        out.map.restart,
        config.restarts,
        out.map.criterion(),
        out.map.final_cycles().count(),
        out.map.converged
    );
    if out.map.clamped_dispersions > 0 {
        eprintln!(
            "warning: {} dispersions were floored",
            out.map.clamped_dispersions
        );
    }
    print_report(&out.report);
    Ok(())
}

fn export(map_dir: &Path, output: Option<&Path>) -> Result<(), Error> {
    for path in export_svg(map_dir, output.unwrap_or(map_dir))? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => {
            evaluate(&a.map_dir, &a.labels, a.table.as_deref()).map(|r| print_report(&r))
        }
        Command::ExportSvg(a) => export(&a.map_dir, a.output.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Usage => 1,
                ErrorKind::Data => 2,
                ErrorKind::Runtime => 3,
            })
        }
    }
}
