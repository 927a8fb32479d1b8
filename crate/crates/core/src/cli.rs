//! Command-line front end. Each subcommand parses its arguments, calls one
//! library operation and writes the resulting table.
//!
//! Exit codes: 0 success, 1 `validate` on a non-primitive model, 2 usage
//! errors, 3 model and numerical errors, 4 exhausted exact-computation budget.
//! Failures print one line `error: <CODE>: <message>` on stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::asymptotics::{clt_distance, clt_table, moment_convergence, moment_table, summary};
use crate::deviations::{
    ldp_table, ldp_verify, moderate_table, rate_g_star, rate_j_star, rate_table, simplex_grid,
};
use crate::error::Error;
use crate::exact::{exact_distribution_with_budget, mgf, DEFAULT_BUDGET};
use crate::model::{dfa_to_model, validate, DfaTable, LinearRepresentation, PrimitiveModel};
use crate::report::{fmt_num, Table};
use crate::sampler::sample_streams;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_PRIMITIVE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_MODEL: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "wfa-stats",
    version,
    about = "Symbol-count statistics for weighted finite automata"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Pretty,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file; `-` or absent writes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    /// Maximum number of DP cells `|Sim_n|·m`.
    #[arg(long, default_value_t = DEFAULT_BUDGET as u64)]
    pub budget: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a model file and report primitivity.
    Validate { model: PathBuf },
    /// Asymptotic constants λ, β, c, Γ, C.
    Asymptotics {
        model: PathBuf,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exact distribution of the count vector at length n.
    Exact {
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[command(flatten)]
        budget: BudgetArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Residuals of the mean and covariance expansions.
    Moments {
        model: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Log moment generating function log E[exp(t·Y_n)].
    Mgf {
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
        t: Point,
    },
    /// Large deviation rate G* at points or on a simplex grid.
    #[command(group(ArgGroup::new("points").required(true).args(["x", "grid"])))]
    Rate {
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
        x: Option<Point>,
        /// Grid spacing for a sweep of the simplex.
        #[arg(long)]
        grid: Option<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Moderate deviation rate J*.
    Moderate {
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
        x: Point,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exact random words: count histogram or the words themselves.
    Sample {
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print one word per line instead of the histogram.
        #[arg(long)]
        words: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Distance of the centred log-mgf to its Gaussian limit.
    Clt {
        model: PathBuf,
        #[arg(long)]
        n: usize,
        /// Points separated by `;`, coordinates by `,`. With one counted
        /// symbol, a plain comma list is read as several points.
        #[arg(long = "t-grid", allow_hyphen_values = true)]
        t_grid: String,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Exact tail decay rates against the LDP prediction.
    Ldp {
        model: PathBuf,
        #[arg(long, allow_hyphen_values = true, value_parser = parse_point)]
        x0: Point,
        #[arg(long)]
        delta: f64,
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        #[command(flatten)]
        budget: BudgetArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Convert a DFA table into a model file.
    ConvertDfa {
        dfa: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// A comma-separated real vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Point(pub Vec<f64>);

fn parse_point(text: &str) -> Result<Point, String> {
    text.split(',')
        .map(|part| {
            let v: f64 = part
                .trim()
                .parse()
                .map_err(|_| format!("'{part}' is not a number"))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("'{part}' is not finite"))
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map(Point)
}

/// Splits a `--t-grid` argument into points of dimension `ell`.
pub fn parse_t_grid(text: &str, ell: usize) -> Result<Vec<Vec<f64>>, Error> {
    let invalid = |msg: String| Error::InvalidArgument(msg);
    let points: Vec<Vec<f64>> = if ell == 1 && !text.contains(';') {
        parse_point(text).map_err(invalid)?.0.into_iter().map(|v| vec![v]).collect()
    } else {
        text.split(';')
            .filter(|p| !p.trim().is_empty())
            .map(|p| parse_point(p).map(|pt| pt.0).map_err(invalid))
            .collect::<Result<_, _>>()?
    };
    if points.is_empty() {
        return Err(invalid("empty t grid".into()));
    }
    if let Some(bad) = points.iter().find(|p| p.len() != ell) {
        return Err(invalid(format!(
            "grid point has {} coordinates, model counts {ell} symbols",
            bad.len()
        )));
    }
    Ok(points)
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Io(String),
    Model(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(msg) => Failure::Usage(msg),
            other => Failure::Model(other),
        }
    }
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Io(_) => EXIT_MODEL,
            Failure::Model(Error::BudgetExceeded { .. }) => EXIT_BUDGET,
            Failure::Model(_) => EXIT_MODEL,
        }
    }

    fn line(&self) -> String {
        match self {
            Failure::Usage(msg) => format!("error: USAGE: {msg}"),
            Failure::Io(msg) => format!("error: IO: {msg}"),
            Failure::Model(e) => format!("error: {}: {e}", e.code()),
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(stdout, "{e}");
                return EXIT_OK;
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or_default();
            let message = first.strip_prefix("error: ").unwrap_or(first);
            let _ = writeln!(stderr, "error: USAGE: {message}");
            return EXIT_USAGE;
        }
    };
    match execute(cli.command, stdout) {
        Ok(code) => code,
        Err(failure) => {
            let _ = writeln!(stderr, "{}", failure.line());
            failure.exit_code()
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn load_model(path: &Path) -> Result<LinearRepresentation, Failure> {
    Ok(LinearRepresentation::from_json(&read_text(path)?)?)
}

fn load_primitive(path: &Path) -> Result<PrimitiveModel, Failure> {
    Ok(PrimitiveModel::new(load_model(path)?)?)
}

fn write_output(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), Failure> {
    match out {
        Some(path) if path != Path::new("-") => {
            fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
        }
        _ => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Io(format!("stdout: {e}"))),
    }
}

fn emit_table(table: &Table, output: &OutputArgs, stdout: &mut dyn Write) -> Result<(), Failure> {
    let text = match output.format {
        Format::Csv => table.to_csv(),
        Format::Pretty => table.to_pretty(),
    };
    write_output(output.out.as_deref(), &text, stdout)
}

/// Re-reads a CSV string as a [`Table`] so that every output honours `--format`.
fn csv_table(csv: &str) -> Table {
    let mut lines = csv.lines();
    let split = |l: &str| l.split(',').map(str::to_string).collect::<Vec<_>>();
    let mut table = Table::new(lines.next().map(split).unwrap_or_default());
    for line in lines {
        table.push(split(line));
    }
    table
}

fn positive(n: usize, name: &str) -> Result<usize, Failure> {
    if n == 0 {
        Err(Failure::Usage(format!("{name} must be at least 1")))
    } else {
        Ok(n)
    }
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<i32, Failure> {
    match command {
        Command::Validate { model } => {
            let representation = load_model(&model)?;
            let report = validate(&representation)?;
            let mut text = format!("primitive: {}\n", report.primitive);
            text += &format!("wielandt_exponent: {}\n", report.wielandt_exponent_used);
            if let Some(lambda) = report.perron_value {
                text += &format!("lambda: {}\n", fmt_num(lambda));
            }
            for warning in &report.warnings {
                text += &format!("warning: {warning}\n");
            }
            write_output(None, &text, stdout)?;
            Ok(if report.primitive {
                EXIT_OK
            } else {
                EXIT_NOT_PRIMITIVE
            })
        }
        Command::Asymptotics { model, output } => {
            let model = load_primitive(&model)?;
            emit_table(&summary(&model)?.to_table(), &output, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Exact {
            model,
            n,
            budget,
            output,
        } => {
            let model = load_model(&model)?;
            let dist = exact_distribution_with_budget(&model, n, budget.budget as u128)?;
            emit_table(&csv_table(&dist.to_csv()), &output, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Moments { model, n, output } => {
            let model = load_primitive(&model)?;
            for &ni in &n {
                positive(ni, "every n")?;
            }
            let rows = moment_convergence(&model, &n)?;
            emit_table(&moment_table(&rows), &output, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Mgf { model, n, t } => {
            let model = load_model(&model)?;
            check_dim(&t.0, model.ell(), "t")?;
            let value = mgf(&model, &t.0, n)?;
            write_output(None, &format!("{}\n", fmt_num(value)), stdout)?;
            Ok(EXIT_OK)
        }
        Command::Rate {
            model,
            x,
            grid,
            output,
        } => {
            let model = load_primitive(&model)?;
            let ell = model.ell();
            let points = match (x, grid) {
                (Some(x), _) => {
                    check_dim(&x.0, ell, "x")?;
                    vec![x.0]
                }
                (None, Some(step)) => simplex_grid(ell, step)?,
                (None, None) => unreachable!("clap enforces the group"),
            };
            let results = points
                .par_iter()
                .map(|p| rate_g_star(&model, p))
                .collect::<Result<Vec<_>, _>>()?;
            emit_table(&rate_table(ell, &results), &output, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Moderate { model, x, output } => {
            let model = load_primitive(&model)?;
            check_dim(&x.0, model.ell(), "x")?;
            let result = rate_j_star(&model, &x.0)?;
            emit_table(&moderate_table(model.ell(), &[result]), &output, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Sample {
            model,
            n,
            count,
            seed,
            words,
            output,
        } => {
            let model = load_model(&model)?;
            positive(n, "n")?;
            if count == 0 {
                return Err(Failure::Usage("count must be at least 1".into()));
            }
            let batch = sample_streams(&model, n, seed, 0..count, words)?;
            match batch.words {
                Some(list) if words => {
                    let mut text = String::new();
                    for w in &list {
                        text += &model.render_word(w);
                        text.push('\n');
                    }
                    write_output(output.out.as_deref(), &text, stdout)?;
                }
                _ => emit_table(&csv_table(&batch.histogram_csv(model.ell())), &output, stdout)?,
            }
            Ok(EXIT_OK)
        }
        Command::Clt {
            model,
            n,
            t_grid,
            output,
        } => {
            let model = load_primitive(&model)?;
            positive(n, "n")?;
            let points = parse_t_grid(&t_grid, model.ell())?;
            let rows = clt_distance(&model, n, &points)?;
            emit_table(&clt_table(model.ell(), &rows), &output, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Ldp {
            model,
            x0,
            delta,
            n,
            budget,
            output,
        } => {
            let model = load_primitive(&model)?;
            check_dim(&x0.0, model.ell(), "x0")?;
            if !delta.is_finite() || delta < 0.0 {
                return Err(Failure::Usage("delta must be a nonnegative number".into()));
            }
            let rows = ldp_verify(&model, &x0.0, delta, &n, budget.budget as u128)?;
            emit_table(&ldp_table(&rows), &output, stdout)?;
            Ok(EXIT_OK)
        }
        Command::ConvertDfa { dfa, out } => {
            let table = DfaTable::from_json(&read_text(&dfa)?)?;
            let model = dfa_to_model(&table)?;
            let mut text = model.to_json();
            if !text.ends_with('\n') {
                text.push('\n');
            }
            write_output(Some(&out), &text, stdout)?;
            Ok(EXIT_OK)
        }
    }
}

fn check_dim(v: &[f64], ell: usize, name: &str) -> Result<(), Failure> {
    if v.len() == ell {
        Ok(())
    } else {
        Err(Failure::Usage(format!(
            "{name} has {} components, model counts {ell} symbols",
            v.len()
        )))
    }
}
