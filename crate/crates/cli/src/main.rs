use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::mpsc;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use nnrepair::io::{self, float::join_g17, report, LoadedNetwork};
use nnrepair::lp::{write_dump, ProcessSolver};
use nnrepair::metrics::metrics_report;
use nnrepair::regions::partition;
use nnrepair::{
    point_repair, polytope_repair, Error, Network, NormObjective, Polygon2D, Polytope, RepairOptions,
    RepairResult, RepairStatus, Segment,
};

const EXIT_INFEASIBLE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_LIMIT: u8 = 3;

#[derive(Parser)]
#[command(name = "nnrepair", version, about = "Provable single-layer repair of ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    L1,
    Linf,
}

impl From<NormArg> for NormObjective {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::L1 => NormObjective::L1,
            NormArg::Linf => NormObjective::Linf,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Builtin,
    External,
}

#[derive(clap::Args)]
struct RepairArgs {
    /// Network file
    net: PathBuf,
    /// Specification file
    spec: PathBuf,
    /// Layer to repair, counting from 1
    #[arg(long)]
    layer: usize,
    #[arg(long, value_enum)]
    norm: NormArg,
    /// `paper4`, comma-separated names like `L1.w[0][2],L1.b[2]`, or a file of names
    #[arg(long)]
    mask: Option<String>,
    #[arg(long, value_enum, default_value = "builtin")]
    solver: SolverArg,
    /// Command run by `--solver external`; reads the LP dump on stdin
    #[arg(long)]
    solver_cmd: Option<String>,
    /// Wall-clock limit for the whole repair
    #[arg(long)]
    timeout_seconds: Option<f64>,
    /// Where to write the repaired network
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write the JSON repair report
    #[arg(long)]
    report: Option<PathBuf>,
    /// Where to write the LP in dump format
    #[arg(long)]
    dump_lp: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a network at one input
    Eval {
        net: PathBuf,
        /// Comma-separated input vector
        #[arg(long, allow_hyphen_values = true)]
        input: String,
    },
    /// Linear regions of a network over a segment or polygon
    Regions {
        net: PathBuf,
        /// `start:end`, each a comma-separated vector, e.g. `-1:2`
        #[arg(long, allow_hyphen_values = true, conflicts_with = "polygon_file", required_unless_present = "polygon_file")]
        segment: Option<String>,
        /// File with one comma-separated vertex per line
        #[arg(long)]
        polygon_file: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Repair the points of a specification
    RepairPoints(RepairArgs),
    /// Repair the polytopes of a specification
    RepairPolytopes(RepairArgs),
    /// Compare a buggy and a repaired network on labeled datasets
    Metrics {
        buggy: PathBuf,
        repaired: PathBuf,
        #[arg(long)]
        drawdown_set: PathBuf,
        #[arg(long)]
        generalization_set: PathBuf,
        #[arg(long)]
        repair_set: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sample a network along a segment for plotting
    Plot {
        net: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        segment: String,
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[arg(long)]
        csv: PathBuf,
    },
}

enum Failure {
    Lib(Error),
    Timeout(f64),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Lib(Error::Io(e))
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Lib(Error::InvalidInput(msg.into()))
}

fn parse_vector(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| invalid(format!("bad number `{}` in `{s}`", t.trim()))))
        .collect()
}

fn parse_segment(s: &str) -> CliResult<Segment> {
    let (a, b) = s.split_once(':').ok_or_else(|| invalid(format!("segment `{s}` is not `start:end`")))?;
    Ok(Segment::new(parse_vector(a)?, parse_vector(b)?)?)
}

fn load_polygon(path: &Path) -> CliResult<Polygon2D> {
    let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
    let vertices = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(parse_vector)
        .collect::<CliResult<Vec<_>>>()?;
    Ok(Polygon2D::new(vertices)?)
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))
}

fn run_repair(args: RepairArgs, polytopes: bool, out: &mut dyn Write) -> CliResult<u8> {
    let net = io::load_network(&args.net)?;
    let spec = io::load_spec(&args.spec, net.input_dim(), net.output_dim())?;
    if polytopes && spec.polytopes.is_empty() && !spec.points.is_empty() {
        return Err(invalid(format!("{} has points but no polytopes; use repair-points", args.spec.display())));
    }
    if !polytopes && spec.points.is_empty() && !spec.polytopes.is_empty() {
        return Err(invalid(format!("{} has polytopes but no points; use repair-polytopes", args.spec.display())));
    }
    let mask = args.mask.as_deref().map(io::parse_mask_arg).transpose()?;
    let solver = match (args.solver, &args.solver_cmd) {
        (SolverArg::External, Some(cmd)) => Some(ProcessSolver::from_command_line(cmd)?),
        (SolverArg::External, None) => return Err(invalid("--solver external needs --solver-cmd")),
        (SolverArg::Builtin, Some(_)) => return Err(invalid("--solver-cmd needs --solver external")),
        (SolverArg::Builtin, None) => None,
    };
    let timeout = match args.timeout_seconds {
        Some(t) if !(t.is_finite() && t > 0.0) => return Err(invalid("--timeout-seconds must be positive")),
        t => t,
    };
    let (layer, norm) = (args.layer, NormObjective::from(args.norm));

    let job = move || -> nnrepair::Result<RepairResult> {
        let mut opts = RepairOptions::new(norm);
        if let Some(m) = &mask {
            opts = opts.with_mask(m);
        }
        if let Some(s) = &solver {
            opts = opts.with_solver(s);
        }
        if polytopes {
            polytope_repair(&net, layer, &spec.polytopes, &opts)
        } else {
            point_repair(&net, layer, &spec.points, &opts, None)
        }
    };
    let result = match timeout {
        None => job()?,
        Some(t) => {
            let (tx, rx) = mpsc::channel();
            std::thread::spawn(move || {
                let _ = tx.send(job());
            });
            match rx.recv_timeout(Duration::from_secs_f64(t)) {
                Ok(r) => r?,
                Err(_) => return Err(Failure::Timeout(t)),
            }
        }
    };

    if let Some(p) = &args.dump_lp {
        write_file(p, &write_dump(&result.lp))?;
    }
    if let Some(p) = &args.report {
        write_file(p, &report::to_pretty(&report::repair_report(&result)))?;
    }
    match result.status {
        RepairStatus::Repaired => {
            let repaired = LoadedNetwork::Ddnn(result.repaired.clone().expect("repaired network"));
            if let Some(p) = &args.out {
                write_file(p, &io::print_network(&repaired))?;
            }
            writeln!(
                out,
                "repaired layer {} {} norm {} ({} key points)",
                result.layer,
                result.norm.name(),
                io::float::fmt_g17(result.norm_value.unwrap_or(0.0)),
                result.key_point_count
            )?;
            Ok(0)
        }
        RepairStatus::Infeasible => {
            writeln!(out, "infeasible: no {} repair of layer {} exists", result.norm.name(), result.layer)?;
            Ok(EXIT_INFEASIBLE)
        }
    }
}

fn run(cli: Cli, out: &mut dyn Write) -> CliResult<u8> {
    match cli.command {
        Command::Eval { net, input } => {
            let net = io::load_network(&net)?;
            let y = net.eval(&parse_vector(&input)?)?;
            writeln!(out, "{}", join_g17(y.iter().copied(), ","))?;
            Ok(0)
        }
        Command::Regions { net, segment, polygon_file, csv } => {
            let net = io::load_network(&net)?;
            let polytope = match (segment, polygon_file) {
                (Some(s), None) => Polytope::Segment(parse_segment(&s)?),
                (None, Some(f)) => Polytope::Polygon(load_polygon(&f)?),
                _ => return Err(invalid("give exactly one of --segment or --polygon-file")),
            };
            let parts = partition(&net.activation_network(), &polytope)?;
            let table = io::print_regions(&parts);
            match csv {
                Some(p) => {
                    write_file(&p, &table)?;
                    writeln!(out, "{} regions", parts.len())?;
                }
                None => out.write_all(table.as_bytes())?,
            }
            Ok(0)
        }
        Command::RepairPoints(args) => run_repair(args, false, out),
        Command::RepairPolytopes(args) => run_repair(args, true, out),
        Command::Metrics { buggy, repaired, drawdown_set, generalization_set, repair_set, report: report_path } => {
            let buggy = io::load_network(&buggy)?;
            let repaired = io::load_network(&repaired)?;
            let d = io::load_labeled_set(&drawdown_set)?;
            let g = io::load_labeled_set(&generalization_set)?;
            let r = repair_set.as_deref().map(io::load_labeled_set).transpose()?;
            let m = metrics_report(&buggy, &repaired, r.as_ref(), &d, &g)?;
            let text = report::to_pretty(&report::metrics_report(&m));
            match report_path {
                Some(p) => {
                    write_file(&p, &text)?;
                    writeln!(
                        out,
                        "drawdown {} generalization {}",
                        io::float::fmt_g17(m.drawdown),
                        io::float::fmt_g17(m.generalization)
                    )?;
                }
                None => out.write_all(text.as_bytes())?,
            }
            Ok(0)
        }
        Command::Plot { net, segment, samples, csv } => {
            let net = io::load_network(&net)?;
            let table = io::print_plot(&net, &parse_segment(&segment)?, samples)?;
            write_file(&csv, &table)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(cli, &mut out) {
        Ok(code) => ExitCode::from(code),
        Err(Failure::Timeout(t)) => {
            eprintln!("error: repair did not finish within {t} s");
            ExitCode::from(EXIT_LIMIT)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::IterationLimit(_) => EXIT_LIMIT,
                _ => EXIT_INVALID,
            })
        }
    }
}
