use std::io::{IsTerminal, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use histq::builtins::{self, ExampleRun, Expected};
use histq::dsl::parse_scenario;
use histq::output::{self, Format, Style};
use histq::run::{format_number, run_scenario, Cell};
use histq_core::Tolerances;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Json,
    Csv,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Table => Format::Table,
            FormatArg::Json => Format::Json,
            FormatArg::Csv => Format::Csv,
        }
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(format!("tolerance must be positive, got {s}"))
    }
}

/// Consistent-histories analysis of quantum measurement scenarios.
#[derive(Debug, Parser)]
#[command(name = "histq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format
    #[arg(long, value_enum, default_value = "table", global = true)]
    format: FormatArg,

    /// Relative tolerance for the consistency conditions
    #[arg(long, value_parser = positive, global = true)]
    consistency_tol: Option<f64>,

    /// Tolerance for numerical identities (normalization, idempotence, ...)
    #[arg(long, value_parser = positive, global = true)]
    numeric_tol: Option<f64>,

    /// Only report failures and the final status
    #[arg(long, short, global = true)]
    quiet: bool,

    /// Write results to this file instead of standard output
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the queries in one or more scenario files
    Run {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Parse and resolve scenario files without running queries
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Run a built-in scenario, or `all` to check every one against its expected values
    Examples { name: String },
    /// List the built-in scenarios
    ListExamples,
}

const EXIT_OK: u8 = 0;
const EXIT_FAILURE: u8 = 1;
const EXIT_QUERY: u8 = 2;

struct Ctx {
    format: Format,
    tol: Tolerances,
    quiet: bool,
    style: Style,
}

fn read_source(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => format!("{}: file not found", path.display()),
        _ => format!("{}: {e}", path.display()),
    })
}

fn cmd_run(ctx: &Ctx, paths: &[PathBuf], out: &mut String) -> u8 {
    let mut status = EXIT_OK;
    let mut sets = Vec::new();
    for path in paths {
        let origin = path.display().to_string();
        let src = match read_source(path) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {e}");
                status = EXIT_FAILURE;
                continue;
            }
        };
        let scenario = match parse_scenario(&src, &origin, &ctx.tol) {
            Ok(s) => s,
            Err(e) => {
                eprintln!("error: {origin}:{e}");
                status = EXIT_FAILURE;
                continue;
            }
        };
        let rs = run_scenario(&scenario, &ctx.tol);
        for r in &rs.results {
            if let Err(e) = &r.outcome {
                eprintln!("error: {origin}:{}: query `{}` failed: {e}", r.line, r.id);
                if status == EXIT_OK {
                    status = EXIT_QUERY;
                }
            }
        }
        sets.push(rs);
    }
    if ctx.quiet {
        return status;
    }
    match (ctx.format, sets.as_slice()) {
        (Format::Json, [one]) => out.push_str(&output::to_json(one)),
        (Format::Json, many) => {
            let v: Vec<_> = many.iter().map(output::to_json_value).collect();
            out.push_str(&serde_json::to_string_pretty(&v).expect("serializable"));
            out.push('\n');
        }
        (Format::Csv, many) => {
            for (i, rs) in many.iter().enumerate() {
                let csv = output::to_csv(rs);
                // keep a single header row
                let body = if i == 0 {
                    csv.as_str()
                } else {
                    csv.split_once('\n').map_or("", |(_, b)| b)
                };
                out.push_str(body);
            }
        }
        (Format::Table, many) => {
            for rs in many {
                if many.len() > 1 {
                    out.push_str(&ctx.style.bold(&format!("# {}", rs.origin)));
                    out.push('\n');
                }
                out.push_str(&output::to_table(rs, &ctx.style));
            }
        }
    }
    status
}

fn cmd_validate(ctx: &Ctx, paths: &[PathBuf], out: &mut String) -> u8 {
    let mut status = EXIT_OK;
    for path in paths {
        let origin = path.display().to_string();
        match read_source(path)
            .and_then(|src| parse_scenario(&src, &origin, &ctx.tol).map_err(|e| format!("{origin}:{e}")))
        {
            Ok(s) => {
                if !ctx.quiet {
                    out.push_str(&format!(
                        "ok: {origin} ({} spaces, {} models, {} families, {} queries)\n",
                        s.spaces.len(),
                        s.models.len(),
                        s.families.len(),
                        s.queries.len()
                    ));
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                status = EXIT_FAILURE;
            }
        }
    }
    status
}

fn expected_text(x: &Expected) -> String {
    match x {
        Expected::Num(v) => format_number(*v),
        Expected::Complex(re, im) => output::complex_text(histq_core::C64::new(*re, *im)),
        Expected::Above(v) => format!("> {}", format_number(*v)),
        Expected::Bool(b) => b.to_string(),
        Expected::Text(t) => t.to_string(),
        Expected::Undefined => "undefined".into(),
    }
}

fn cell_text(c: Option<&Cell>) -> String {
    match c {
        None => "missing".into(),
        Some(Cell::Num(v)) => format_number(*v),
        Some(Cell::Complex(z)) => output::complex_text(*z),
        Some(Cell::Bool(b)) => b.to_string(),
        Some(Cell::Text(t)) => t.clone(),
        Some(Cell::Undefined) => "undefined".into(),
    }
}

fn run_all(ctx: &Ctx, out: &mut String) -> u8 {
    let mut runs: Vec<Result<ExampleRun, String>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = builtins::registry()
            .into_iter()
            .map(|x| {
                let tol = ctx.tol;
                scope.spawn(move || {
                    let name = x.name;
                    builtins::run_example(x, &tol).map_err(|e| format!("{name}: {e}"))
                })
            })
            .collect();
        runs = handles
            .into_iter()
            .map(|h| h.join().expect("example thread panicked"))
            .collect();
    });
    let all_passed = runs.iter().all(|r| r.as_ref().is_ok_and(ExampleRun::passed));

    if ctx.format == Format::Json {
        let items: Vec<_> = runs
            .iter()
            .map(|r| match r {
                Ok(run) => json!({
                    "name": run.example.name,
                    "passed": run.passed(),
                    "checks": run.checks.iter().map(|c| json!({
                        "query_id": c.expectation.query,
                        "field": c.expectation.field,
                        "label": c.expectation.label,
                        "expected": expected_text(&c.expectation.value),
                        "actual": cell_text(c.actual.as_ref()),
                        "passed": c.passed,
                    })).collect::<Vec<_>>(),
                }),
                Err(e) => json!({ "error": e, "passed": false }),
            })
            .collect();
        let v = json!({ "passed": all_passed, "examples": items });
        out.push_str(&serde_json::to_string_pretty(&v).expect("serializable"));
        out.push('\n');
    } else if ctx.format == Format::Csv {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record(["example", "query_id", "field", "label", "expected", "actual", "passed"]);
        for run in runs.iter().flatten() {
            for c in &run.checks {
                let _ = w.write_record([
                    run.example.name,
                    c.expectation.query,
                    c.expectation.field,
                    &c.expectation.label,
                    &expected_text(&c.expectation.value),
                    &cell_text(c.actual.as_ref()),
                    if c.passed { "true" } else { "false" },
                ]);
            }
        }
        out.push_str(&String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default());
    } else {
        let s = &ctx.style;
        for r in &runs {
            match r {
                Ok(run) => {
                    let ok = run.checks.iter().filter(|c| c.passed).count();
                    let tag = if run.passed() { s.good("PASS") } else { s.bad("FAIL") };
                    if !ctx.quiet || !run.passed() {
                        out.push_str(&format!(
                            "{tag} {:<14} {ok}/{} checks\n",
                            run.example.name,
                            run.checks.len()
                        ));
                    }
                    for c in run.checks.iter().filter(|c| !c.passed) {
                        out.push_str(&format!(
                            "     {} {} [{}]: expected {}, got {}\n",
                            c.expectation.query,
                            c.expectation.field,
                            c.expectation.label,
                            expected_text(&c.expectation.value),
                            cell_text(c.actual.as_ref())
                        ));
                    }
                    for q in run.results.results.iter() {
                        if let Err(e) = &q.outcome {
                            out.push_str(&format!("     query {} failed: {e}\n", q.id));
                        }
                    }
                }
                Err(e) => out.push_str(&format!("{} {e}\n", s.bad("FAIL"))),
            }
        }
        let passed = runs.iter().filter(|r| r.as_ref().is_ok_and(ExampleRun::passed)).count();
        out.push_str(&format!("{passed}/{} examples passed\n", runs.len()));
    }
    if all_passed {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

fn cmd_examples(ctx: &Ctx, name: &str, out: &mut String) -> u8 {
    if name == "all" {
        return run_all(ctx, out);
    }
    let example = match builtins::find(name) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    let run = match builtins::run_example(example, &ctx.tol) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {name}: {e}");
            return EXIT_FAILURE;
        }
    };
    if !ctx.quiet {
        out.push_str(&output::render(&run.results, ctx.format, &ctx.style));
    }
    if run.results.has_errors() {
        EXIT_QUERY
    } else {
        EXIT_OK
    }
}

fn cmd_list(ctx: &Ctx, out: &mut String) -> u8 {
    let reg = builtins::registry();
    match ctx.format {
        Format::Json => {
            let v: Vec<_> = reg
                .iter()
                .map(
                    |x| json!({ "name": x.name, "file": x.file, "summary": x.summary, "checks": x.expectations.len() }),
                )
                .collect();
            out.push_str(&serde_json::to_string_pretty(&v).expect("serializable"));
            out.push('\n');
        }
        Format::Csv => {
            out.push_str("name,file,summary\n");
            for x in &reg {
                out.push_str(&format!("{},{},\"{}\"\n", x.name, x.file, x.summary));
            }
        }
        Format::Table => {
            for x in &reg {
                out.push_str(&format!("{:<14} {}\n", x.name, x.summary));
            }
        }
    }
    EXIT_OK
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let mut tol = Tolerances::default();
    if let Some(t) = cli.consistency_tol {
        tol.consistency = t;
    }
    if let Some(t) = cli.numeric_tol {
        tol.numeric = t;
    }
    let color = cli.output.is_none() && std::env::var_os("HISTQ_NO_COLOR").is_none() && std::io::stdout().is_terminal();
    let ctx = Ctx {
        format: cli.format.into(),
        tol,
        quiet: cli.quiet,
        style: Style {
            color,
            timing: !cli.quiet,
        },
    };
    let mut out = String::new();
    let status = match &cli.command {
        Command::Run { paths } => cmd_run(&ctx, paths, &mut out),
        Command::Validate { paths } => cmd_validate(&ctx, paths, &mut out),
        Command::Examples { name } => cmd_examples(&ctx, name, &mut out),
        Command::ListExamples => cmd_list(&ctx, &mut out),
    };
    let written = match &cli.output {
        Some(path) => std::fs::write(path, &out).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().write_all(out.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_FAILURE);
    }
    ExitCode::from(status)
}
