use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chartcov_core::chart::{enumerate_space, SystemModel};
use chartcov_core::coverage::{self, emit_csv, emit_svg, histogram, verdict, SvgOptions};
use chartcov_core::dsl::{self, Diagnostic};
use chartcov_core::refmodel::reduced_space;
use chartcov_core::sim::{self, read_traces, simulate_batch, write_traces, SimParams, TraceIoError};
use chartcov_core::testkit::{self, assign, profile1_suite, read_specs, run_test, test_coverage, SpecIoError};

#[derive(Parser)]
#[command(name = "chartcov", version, about = "State-chart scenario coverage toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a model; diagnostics go to stderr.
    Validate { model: PathBuf },
    /// Print the size of the full or reduced state space.
    Enumerate {
        model: PathBuf,
        #[arg(long)]
        reduced: bool,
    },
    /// Generate seeded scenario traces.
    Simulate(SimulateArgs),
    /// Histogram of combination codes over a trace file.
    Coverage(CoverageArgs),
    /// Monte Carlo coupon-collector estimate.
    Ccp(CcpArgs),
    /// State-chart unit tests.
    #[command(subcommand)]
    Test(TestCommand),
}

#[derive(Args)]
struct SimulateArgs {
    model: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    p_vru: Option<f64>,
    #[arg(long)]
    p_detect: Option<f64>,
    #[arg(long)]
    p_locate: Option<f64>,
    #[arg(long)]
    p_tx: Option<f64>,
    /// Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoverageArgs {
    traces: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, default_value_t = 960)]
    svg_width: u32,
    #[arg(long, default_value_t = 480)]
    svg_height: u32,
    /// Minimum observations per feasible code.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Exit with status 1 when any feasible code is under-covered.
    #[arg(long)]
    fail_on_gap: bool,
}

#[derive(Args)]
struct CcpArgs {
    /// Number of equally likely types.
    #[arg(long, conflicts_with = "weights", required_unless_present = "weights")]
    types: Option<usize>,
    /// CSV with one weight per row (last column); a non-numeric header is skipped.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long)]
    seed: u64,
}

#[derive(Subcommand)]
enum TestCommand {
    /// Run every test in a test file against a model.
    Run { model: PathBuf, tests: PathBuf },
    /// Assign scenarios to tests by combination code.
    Assign {
        tests: PathBuf,
        traces: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        k: Option<u64>,
    },
    /// Write the driving-profile-1 suite.
    GenProfile1 {
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Domain(String),
    Usage(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Domain(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Domain(m) | Failure::Usage(m) | Failure::Io(m) => m,
        }
    }
}

type Outcome = Result<(), Failure>;

fn io_err(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn print_diagnostics(path: &Path, diags: &[Diagnostic]) {
    for d in diags {
        eprintln!("{}:{d}", path.display());
    }
}

fn load_model(path: &Path) -> Result<SystemModel, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let parsed = dsl::parse(&text);
    print_diagnostics(path, &parsed.diagnostics);
    parsed
        .model
        .ok_or_else(|| Failure::Usage(format!("{}: model has errors", path.display())))
}

fn open(path: &Path) -> Result<BufReader<File>, Failure> {
    File::open(path).map(BufReader::new).map_err(|e| io_err(path, e))
}

fn load_traces(path: &Path) -> Result<Vec<sim::ScenarioTrace>, Failure> {
    read_traces(open(path)?).map_err(|e| match e {
        TraceIoError::Io(e) => io_err(path, e),
        e => Failure::Usage(format!("{}: {e}", path.display())),
    })
}

fn load_specs(path: &Path) -> Result<Vec<testkit::TestSpec>, Failure> {
    read_specs(open(path)?).map_err(|e| match e {
        SpecIoError::Io(e) => io_err(path, e),
        e => Failure::Usage(format!("{}: {e}", path.display())),
    })
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Outcome {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

fn stdout_lines(lines: &[String]) -> Outcome {
    let mut out = io::stdout().lock();
    for l in lines {
        match writeln!(out, "{l}") {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::BrokenPipe => return Ok(()),
            Err(e) => return Err(Failure::Io(format!("stdout: {e}"))),
        }
    }
    Ok(())
}

fn cmd_validate(model: &Path) -> Outcome {
    let text = fs::read_to_string(model).map_err(|e| io_err(model, e))?;
    let parsed = dsl::parse(&text);
    print_diagnostics(model, &parsed.diagnostics);
    if parsed.diagnostics.iter().any(Diagnostic::is_error) {
        Err(Failure::Usage(format!("{}: model has errors", model.display())))
    } else {
        Ok(())
    }
}

fn cmd_enumerate(model: &Path, reduced: bool) -> Outcome {
    let m = load_model(model)?;
    if reduced {
        sim::check_compatible(&m).map_err(|e| Failure::Domain(e.to_string()))?;
        let (size, feasible) = reduced_space();
        return stdout_lines(&[format!("reduced={size} feasible={}", feasible.len())]);
    }
    let space = enumerate_space(&m).map_err(|e| Failure::Domain(e.to_string()))?;
    for c in &m.charts {
        eprintln!("{}: {} states", c.name, c.states.len());
    }
    stdout_lines(&[format!("total={}", space.total())])
}

fn cmd_simulate(a: &SimulateArgs) -> Outcome {
    let m = load_model(&a.model)?;
    let mut p = SimParams {
        n_scenarios: a.n,
        seed: a.seed,
        ..SimParams::default()
    };
    let overrides = [
        (&mut p.p_vru, a.p_vru),
        (&mut p.p_detect, a.p_detect),
        (&mut p.p_locate, a.p_locate),
        (&mut p.p_tx, a.p_tx),
    ];
    for (field, value) in overrides {
        if let Some(v) = value {
            *field = v;
        }
    }
    let traces = simulate_batch(&m, &p).map_err(|e| match e {
        sim::SimError::InvalidParams(_) => Failure::Usage(e.to_string()),
        e => Failure::Domain(e.to_string()),
    })?;
    match &a.out {
        Some(path) => write_file(path, |w| write_traces(&traces, w)),
        None => write_traces(&traces, io::stdout().lock()).map_err(|e| Failure::Io(format!("stdout: {e}"))),
    }
}

fn cmd_coverage(a: &CoverageArgs) -> Outcome {
    let traces = load_traces(&a.traces)?;
    let report = histogram(&traces).with_threshold(a.k);
    if let Some(path) = &a.csv {
        write_file(path, |w| emit_csv(&report, w))?;
    }
    if let Some(path) = &a.svg {
        let opts = SvgOptions {
            width: a.svg_width,
            height: a.svg_height,
        };
        write_file(path, |w| emit_svg(&report, opts, w))?;
    }
    let gaps = verdict(&report, a.k);
    let mut lines = vec![
        format!("total={}", report.total),
        format!("covered={}/48 k={}", 48 - gaps.len(), a.k),
    ];
    lines.extend(gaps.iter().map(|c| format!("under {c} {}", report.count(*c))));
    stdout_lines(&lines)?;
    if a.fail_on_gap && !gaps.is_empty() {
        return Err(Failure::Domain(format!("{} feasible codes observed fewer than {} times", gaps.len(), a.k)));
    }
    Ok(())
}

fn read_weights(path: &Path) -> Result<Vec<f64>, Failure> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut weights = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => Failure::Io(format!("{}: {e}", path.display())),
            _ => Failure::Usage(format!("{}: {e}", path.display())),
        })?;
        let Some(field) = rec.iter().next_back().filter(|f| !f.is_empty()) else {
            continue;
        };
        match field.parse::<f64>() {
            Ok(w) => weights.push(w),
            Err(_) if i == 0 => continue,
            Err(_) => {
                return Err(Failure::Usage(format!(
                    "{}: row {}: `{field}` is not a number",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(weights)
}

fn cmd_ccp(a: &CcpArgs) -> Outcome {
    let weights = match (&a.weights, a.types) {
        (Some(path), _) => read_weights(path)?,
        (None, Some(0)) | (None, None) => return Err(Failure::Usage("--types must be at least 1".into())),
        (None, Some(n)) => vec![1.0 / n as f64; n],
    };
    let est = coverage::ccp_mc(&weights, a.trials, a.seed).map_err(|e| match e {
        coverage::CcpError::NeverCompletes { .. } => Failure::Domain(e.to_string()),
        e => Failure::Usage(e.to_string()),
    })?;
    let mut lines = vec![
        format!("n_types={}", est.n_types),
        format!("trials={}", est.trials),
        format!("mean_draws={:.4}", est.mean_draws),
        format!("sd_draws={:.4}", est.sd_draws),
        format!("std_error={:.4}", est.std_error()),
    ];
    lines.extend(est.curve().into_iter().map(|(n, p)| format!("completion {n} {p:.6}")));
    stdout_lines(&lines)
}

fn cmd_test_run(model: &Path, tests: &Path) -> Outcome {
    let m = load_model(model)?;
    let specs = load_specs(tests)?;
    let mut lines = Vec::new();
    let mut failed = 0;
    for s in &specs {
        let r = run_test(&m, s).map_err(|e| match e {
            testkit::TestError::Chart { .. } => Failure::Domain(e.to_string()),
            e => Failure::Usage(e.to_string()),
        })?;
        if r.passed {
            lines.push(format!("PASS {}", r.name));
        } else {
            failed += 1;
            let d = r.divergence.as_ref().expect("failed tests carry a divergence");
            let got = r.actual.get(&d.chart).map_or("?", String::as_str);
            let want = s.expect.get(&d.chart).map_or("?", String::as_str);
            lines.push(format!(
                "FAIL {} chart={} expected={want} actual={got} event_index={}",
                r.name, d.chart, d.event_index
            ));
        }
    }
    lines.push(format!("passed={} failed={failed}", specs.len() - failed));
    stdout_lines(&lines)?;
    if failed > 0 {
        return Err(Failure::Domain(format!("{failed} test(s) failed")));
    }
    Ok(())
}

fn cmd_test_assign(tests: &Path, traces: &Path, k: Option<u64>) -> Outcome {
    let specs = load_specs(tests)?;
    let traces = load_traces(traces)?;
    let a = assign(&traces, &specs);
    let mut lines: Vec<String> = a
        .per_spec
        .iter()
        .map(|s| format!("{} {}", s.name, s.ids.len()))
        .collect();
    lines.push(format!("unassigned={}", a.unassigned.len()));
    lines.push(format!("multiply_assigned={}", a.multiply_assigned.len()));
    if let Some(k) = k {
        for (name, n) in test_coverage(&a, &specs, k as usize) {
            lines.push(format!("under {name} {n}"));
        }
    }
    stdout_lines(&lines)
}

fn cmd_gen_profile1(model: &Path, out: &Path) -> Outcome {
    let m = load_model(model)?;
    let suite = profile1_suite();
    for s in &suite {
        testkit::check_spec(&m, s).map_err(|e| Failure::Domain(e.to_string()))?;
    }
    write_file(out, |w| testkit::write_specs(&suite, w))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { model } => cmd_validate(model),
        Command::Enumerate { model, reduced } => cmd_enumerate(model, *reduced),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Coverage(a) => cmd_coverage(a),
        Command::Ccp(a) => cmd_ccp(a),
        Command::Test(TestCommand::Run { model, tests }) => cmd_test_run(model, tests),
        Command::Test(TestCommand::Assign { tests, traces, k }) => cmd_test_assign(tests, traces, *k),
        Command::Test(TestCommand::GenProfile1 { model, out }) => cmd_gen_profile1(model, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("chartcov: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
