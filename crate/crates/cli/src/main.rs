use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ust_core::io_formats::{self, Report, ReportFormat, UstSummary};
use ust_core::matching::{self, Method, Quotient};
use ust_core::metric_spaces::{Signal, Space};
use ust_core::reparam::{self, UstOptions};
use ust_core::verify::{self, Theorem};
use ust_core::{bench, demo, Error};

const DEFAULT_TOLERANCE: f64 = 1e-3;

#[derive(Parser, Debug)]
#[command(name = "ust", version, about = "Unit-speed reparameterization and time-warp invariant matching")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Reparameterize a signal to unit speed; writes the signal and the warp.
    Reparam(ReparamArgs),
    /// Distance between two signals.
    Compare(CompareArgs),
    /// Nearest-template classification.
    Classify(ClassifyArgs),
    /// Runtime scaling of UST against DTW.
    Bench(BenchArgs),
    /// Synthetic gesture recognition demo.
    Demo(DemoArgs),
    /// Residual and optimality battery.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
struct ReparamArgs {
    input: PathBuf,
    output: PathBuf,
    /// Output sample count (defaults to the input length).
    #[arg(long)]
    samples: Option<usize>,
    /// Reject zero-length signals instead of regularizing them.
    #[arg(long)]
    strict: bool,
    /// Path of the warp sidecar (defaults to OUTPUT with `.warp.csv`).
    #[arg(long)]
    warp: Option<PathBuf>,
    /// Require this space tag in the input header.
    #[arg(long)]
    space: Option<String>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Ust)]
    method: MethodArg,
    /// Require this space tag in both headers.
    #[arg(long)]
    space: Option<String>,
    /// Distance below which the signals count as equivalent.
    #[arg(long, env = "UST_TOLERANCE", default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    /// Also write the report to this file (format from --format).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    /// Signal file or trajectory manifest (.toml).
    #[arg(long)]
    query: PathBuf,
    /// Directory of signal files or trajectory manifests.
    #[arg(long)]
    templates: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Ust)]
    method: MethodArg,
    #[arg(long, value_enum, default_value_t = QuotientArg::Relative)]
    quotient: QuotientArg,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Sizes for both methods (overridden by --ust-sizes / --dtw-sizes).
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    ust_sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    dtw_sizes: Option<Vec<usize>>,
    /// Timed repeats per size (median reported, warm-up excluded).
    #[arg(long, default_value_t = 5)]
    repeat: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Args, Debug)]
struct DemoArgs {
    /// Scenario name.
    #[arg(default_value = "action-recognition")]
    scenario: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Directory for the generated corpus and the accuracy table.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    instances: Option<usize>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// theorem1, theorem2, theorem3 (default: all).
    theorems: Vec<String>,
    #[arg(long, default_value_t = verify::DEFAULT_GRID)]
    grid: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Raw,
    Ust,
    Dtw,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Raw => Method::Raw,
            MethodArg::Ust => Method::Ust,
            MethodArg::Dtw => Method::Dtw,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum QuotientArg {
    Relative,
    Screw,
    None,
}

impl QuotientArg {
    fn quotient(self) -> Option<Quotient> {
        match self {
            QuotientArg::Relative => Some(Quotient::Relative),
            QuotientArg::Screw => Some(Quotient::Screw),
            QuotientArg::None => None,
        }
    }
}

/// Failure with its exit code: 1 for usage and input errors, 2 for numerical degeneracy.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn context(self, what: impl std::fmt::Display) -> Self {
        Self {
            code: self.code,
            message: format!("{what}: {}", self.message),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DegenerateSignal
            | Error::SingularWeightIntegral
            | Error::IllConditioned(_)
            | Error::NotPositiveDefinite(_)
            | Error::ZeroQuadraticCoefficient(_)
            | Error::AngleNearPi { .. } => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Reparam(a) => cmd_reparam(a, cli.format),
        Command::Compare(a) => cmd_compare(a, cli.format),
        Command::Classify(a) => cmd_classify(a, cli.format),
        Command::Bench(a) => cmd_bench(a, cli.format),
        Command::Demo(a) => cmd_demo(a, cli.format),
        Command::Verify(a) => cmd_verify(a, cli.format),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn print_json(value: &impl Serialize) -> CmdResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::usage(e.to_string()))?;
    println!("{text}");
    Ok(())
}

fn parse_space(tag: &Option<String>) -> Result<Option<Space>, Failure> {
    tag.as_deref()
        .map(|t| t.parse::<Space>().map_err(Failure::from))
        .transpose()
}

fn read_signal(path: &Path, space: Option<Space>) -> Result<Signal, Failure> {
    io_formats::read_signal(path, space).map_err(|e| Failure::from(e).context(path.display()))
}

fn sidecar_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}.warp.csv"))
}

fn cmd_reparam(a: ReparamArgs, format: Format) -> CmdResult {
    let x = read_signal(&a.input, parse_space(&a.space)?)?;
    let r = reparam::ust(
        &x,
        UstOptions {
            samples: a.samples,
            strict: a.strict,
        },
    )?;
    let warp_path = a.warp.unwrap_or_else(|| sidecar_path(&a.output));
    io_formats::write_signal(&r.resampled, &a.output)?;
    io_formats::write_warp(&r.warp_star, &warp_path)?;
    let summary = UstSummary::from(&r);
    match format {
        Format::Text => {
            println!("total_length {}", io_formats::fmt_f64(summary.total_length));
            println!("samples {}", summary.samples);
            println!("warp {}", warp_path.display());
        }
        Format::Json => print!("{}", io_formats::report_to_string(&Report::Ust(summary), ReportFormat::Json)?),
    }
    Ok(())
}

fn cmd_compare(a: CompareArgs, format: Format) -> CmdResult {
    let space = parse_space(&a.space)?;
    let x1 = read_signal(&a.a, space)?;
    let x2 = read_signal(&a.b, space)?;
    let report = matching::compare(&x1, &x2, a.method.into())?;
    let equivalent = report.distance < a.tolerance;
    let wrapped = Report::Match(report.clone());
    if let Some(path) = &a.report {
        let rf = match format {
            Format::Text => ReportFormat::Text,
            Format::Json => ReportFormat::Json,
        };
        io_formats::write_report(&wrapped, path, rf)?;
    }
    match format {
        Format::Text => {
            println!("method {}", report.method);
            println!("distance {}", io_formats::fmt_f64(report.distance));
            println!("tolerance {}", io_formats::fmt_f64(a.tolerance));
            println!("equivalent {equivalent}");
        }
        Format::Json => print!("{}", io_formats::report_to_string(&wrapped, ReportFormat::Json)?),
    }
    Ok(())
}

enum Item {
    Signal(Signal),
    Trajectory(matching::BodyTrajectory),
}

fn is_manifest(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "toml")
}

fn load_item(path: &Path) -> Result<(Option<String>, Item), Failure> {
    if is_manifest(path) {
        let (m, t) = io_formats::read_trajectory(path).map_err(|e| Failure::from(e).context(path.display()))?;
        Ok((m.label, Item::Trajectory(t)))
    } else {
        Ok((None, Item::Signal(read_signal(path, None)?)))
    }
}

fn item_signal(item: Item, quotient: Option<Quotient>, path: &Path) -> Result<Signal, Failure> {
    match (item, quotient) {
        (Item::Trajectory(t), Some(q)) => Ok(matching::quotient_signal(&t, q)?),
        (Item::Trajectory(t), None) => Ok(matching::stacked_signal(&t)),
        (Item::Signal(s), None) => Ok(s),
        (Item::Signal(_), Some(_)) => Err(Failure::usage(format!(
            "{}: quotients need a trajectory manifest (.toml); use --quotient none for plain signals",
            path.display()
        ))),
    }
}

/// Template files in name order: manifests, plus signal files no manifest refers to.
fn template_files(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let mut referenced = BTreeSet::new();
    for p in files.iter().filter(|p| is_manifest(p)) {
        let text = fs::read_to_string(p).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
        if let Ok(m) = toml_manifest(&text) {
            referenced.extend([m.shoulder, m.elbow, m.hand].map(|f| dir.join(f)));
        }
    }
    Ok(files
        .into_iter()
        .filter(|p| is_manifest(p) || (p.extension().is_some_and(|e| e == "csv") && !referenced.contains(p)))
        .collect())
}

fn toml_manifest(text: &str) -> Result<io_formats::TrajectoryManifest, Failure> {
    io_formats::parse_manifest(text).map_err(Failure::from)
}

fn stem_label(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

#[derive(Serialize)]
struct ClassifyOutput {
    label: String,
    score: f64,
    method: Method,
    quotient: String,
    scores: Vec<(String, f64)>,
}

fn cmd_classify(a: ClassifyArgs, format: Format) -> CmdResult {
    let quotient = a.quotient.quotient();
    let (_, q_item) = load_item(&a.query)?;
    let query = item_signal(q_item, quotient, &a.query)?;
    let mut templates = Vec::new();
    for path in template_files(&a.templates)? {
        let (label, item) = load_item(&path)?;
        let label = label.unwrap_or_else(|| stem_label(&path));
        templates.push((label, item_signal(item, quotient, &path)?));
    }
    if templates.is_empty() {
        return Err(Failure::usage(format!("no templates in {}", a.templates.display())));
    }
    let method: Method = a.method.into();
    let c = matching::classify_nearest(&query, &templates, method)?;
    let quotient_name = quotient.map_or("none".to_string(), |q| q.to_string());
    match format {
        Format::Text => {
            println!("label {}", c.label);
            println!("score {}", io_formats::fmt_f64(c.score));
            println!("# method={method} quotient={quotient_name}");
            for (l, s) in &c.scores {
                println!("{l}\t{}", io_formats::fmt_f64(*s));
            }
        }
        Format::Json => print_json(&ClassifyOutput {
            label: c.label,
            score: c.score,
            method,
            quotient: quotient_name,
            scores: c.scores,
        })?,
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs, format: Format) -> CmdResult {
    if a.repeat < 5 {
        return Err(Failure::usage("--repeat must be at least 5"));
    }
    let ust_sizes = a.ust_sizes.or(a.sizes.clone()).unwrap_or(bench::DEFAULT_UST_SIZES.to_vec());
    let dtw_sizes = a.dtw_sizes.or(a.sizes).unwrap_or(bench::DEFAULT_DTW_SIZES.to_vec());
    if let Some(n) = ust_sizes.iter().chain(&dtw_sizes).find(|n| **n < 2) {
        return Err(Failure::usage(format!("sizes must be >= 2, got {n}")));
    }
    let report = bench::run(&ust_sizes, &dtw_sizes, a.repeat, a.seed)?;
    match format {
        Format::Text => {
            println!("# seed={} repeat={}", report.seed, report.repeat);
            println!("{:<6} {:>10} {:>16} {:>24}", "method", "n", "median_s", "distance");
            for r in &report.rows {
                println!(
                    "{:<6} {:>10} {:>16.6e} {:>24}",
                    r.method.to_string(),
                    r.n,
                    r.median_seconds,
                    io_formats::fmt_f64(r.distance)
                );
            }
            let show = |s: Option<f64>| s.map_or("n/a".to_string(), |v| format!("{v:.3}"));
            println!("slope ust {}", show(report.ust_slope));
            println!("slope dtw {}", show(report.dtw_slope));
        }
        Format::Json => print_json(&report)?,
    }
    Ok(())
}

fn accuracy_table(report: &demo::DemoReport) -> String {
    let mut s = format!(
        "# seed={} samples={} instances={} quotient={}\n",
        report.config.seed, report.config.samples, report.config.instances_per_class, report.quotient
    );
    s += &format!("{:<12} {:<12} {:<12}\n", "truth", "ust", "dtw");
    for r in &report.rows {
        s += &format!("{:<12} {:<12} {:<12}\n", r.truth, r.ust_label, r.dtw_label);
    }
    s += &format!("accuracy ust {:.4}\n", report.ust_accuracy);
    s += &format!("accuracy dtw {:.4}\n", report.dtw_accuracy);
    s
}

fn cmd_demo(a: DemoArgs, format: Format) -> CmdResult {
    if a.scenario != "action-recognition" {
        return Err(Failure::usage(format!(
            "unknown demo '{}' (available: action-recognition)",
            a.scenario
        )));
    }
    let mut cfg = demo::DemoConfig {
        seed: a.seed,
        ..Default::default()
    };
    if let Some(n) = a.samples {
        cfg.samples = n;
    }
    if let Some(k) = a.instances {
        cfg.instances_per_class = k;
    }
    let corpus = demo::generate(&cfg)?;
    let report = demo::classify_corpus(&cfg, &corpus, Quotient::Relative)?;
    let table = accuracy_table(&report);
    if let Some(out) = &a.out {
        let (tdir, qdir) = (out.join("templates"), out.join("queries"));
        for d in [&tdir, &qdir] {
            fs::create_dir_all(d).map_err(|e| Failure::usage(format!("{}: {e}", d.display())))?;
        }
        for (label, t) in &corpus.templates {
            io_formats::write_trajectory(t, Some(label), &tdir, label)?;
        }
        for (i, (label, t)) in corpus.queries.iter().enumerate() {
            io_formats::write_trajectory(t, Some(label), &qdir, &format!("q{i:03}_{label}"))?;
        }
        fs::write(out.join("accuracy.txt"), &table).map_err(|e| Failure::usage(e.to_string()))?;
        let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::usage(e.to_string()))?;
        fs::write(out.join("report.json"), json + "\n").map_err(|e| Failure::usage(e.to_string()))?;
    }
    match format {
        Format::Text => print!("{table}"),
        Format::Json => print_json(&report)?,
    }
    Ok(())
}

fn cmd_verify(a: VerifyArgs, format: Format) -> CmdResult {
    let theorems = if a.theorems.is_empty() {
        Theorem::ALL.to_vec()
    } else {
        a.theorems
            .iter()
            .map(|t| t.parse::<Theorem>())
            .collect::<Result<Vec<_>, _>>()?
    };
    let report = verify::run(&theorems, a.grid)?;
    match format {
        Format::Text => {
            println!("# grid={}", report.grid);
            for c in &report.checks {
                println!("{c}");
            }
            println!("{}", if report.passed() { "all checks passed" } else { "some checks FAILED" });
        }
        Format::Json => print_json(&report)?,
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: "verification failed".into(),
        })
    }
}
