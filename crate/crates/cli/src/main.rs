use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use causalkit::expr::simplify;
use causalkit::graph::{parse_graph, MixedGraph, NodeSet};
use causalkit::ident::{identify, IdentResult};
use causalkit::scm::{build_example, ExampleOptions};
use causalkit::sep::{enumerate_adjustment_sets, is_valid_backdoor, open_path, SepQuery};
use causalkit_cli::harness::{self, HarnessOptions};
use clap::{Parser, Subcommand, ValueEnum};

const SEPARATED: u8 = 0;
const NEGATIVE: u8 = 1;
const INPUT_ERROR: u8 = 2;
const NOT_IDENTIFIABLE: u8 = 3;

#[derive(Parser)]
#[command(name = "causalkit", version, about = "Causal graph queries, identification and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Latex,
}

#[derive(Subcommand)]
enum Command {
    /// Test whether X and Y are m-separated given a conditioning set.
    Dsep {
        graph: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        x: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        y: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        given: Vec<String>,
    },
    /// Check a back-door adjustment set, or list all valid ones.
    Adjust {
        graph: PathBuf,
        #[arg(long)]
        treatment: String,
        #[arg(long)]
        outcome: String,
        /// Set to check; without it every valid set is listed.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        set: Option<Vec<String>>,
    },
    /// Express P(outcome | do(treatment)) in observational terms.
    Identify {
        graph: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        treatment: Vec<String>,
        #[arg(long, value_delimiter = ',', required = true)]
        outcome: Vec<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Print the recursion trace.
        #[arg(long)]
        explain: bool,
        /// Print the expression as produced, before simplification.
        #[arg(long)]
        raw: bool,
    },
    /// Sample one of the built-in example models to CSV, with a JSON sidecar.
    Simulate {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=6))]
        example: u8,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Add the potential outcome columns.
        #[arg(long)]
        include_po: bool,
        /// Correlation parameter of example 1.
        #[arg(long, default_value_t = 0.3)]
        rho: f64,
    },
    /// Recompute every numeric claim of the examples and write a JSON report.
    Reproduce {
        #[arg(long)]
        out: PathBuf,
        /// Smaller samples and fewer random cases.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = HarnessOptions::default().seed)]
        seed: u64,
    },
}

fn load(path: &Path) -> Result<MixedGraph> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_graph(&text).with_context(|| format!("{}", path.display()))
}

fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

fn dsep(path: &Path, x: &[String], y: &[String], given: &[String]) -> Result<u8> {
    let g = load(path)?;
    let q = SepQuery::named(&g, &refs(x), &refs(y), &refs(given))?;
    match open_path(&g, &q)? {
        None => {
            println!("separated");
            Ok(SEPARATED)
        }
        Some(p) => {
            println!("connected");
            println!("{}", p.render(&g));
            Ok(NEGATIVE)
        }
    }
}

fn adjust(path: &Path, treatment: &str, outcome: &str, set: Option<&[String]>) -> Result<u8> {
    let g = load(path)?.project_declared_latents()?;
    let (a, y) = (g.require(treatment)?, g.require(outcome)?);
    if let Some(set) = set {
        let z = g.ids(refs(set))?;
        let verdict = is_valid_backdoor(&g, a, y, &z)?;
        println!("{}", verdict.describe(&g));
        return Ok(if verdict.valid { 0 } else { NEGATIVE });
    }
    let candidates: NodeSet = g.node_ids().filter(|&v| v != a && v != y).collect();
    let sets = enumerate_adjustment_sets(&g, a, y, &candidates)?;
    if sets.is_empty() {
        println!("no valid adjustment set");
        return Ok(NEGATIVE);
    }
    for s in sets {
        println!("{{{}}}", g.names(&s).join(", "));
    }
    Ok(0)
}

fn run_identify(
    path: &Path,
    treatment: &[String],
    outcome: &[String],
    format: Format,
    explain: bool,
    raw: bool,
) -> Result<u8> {
    let g = load(path)?;
    let id = identify(&g, &refs(treatment), &refs(outcome))?;
    if explain {
        for line in &id.trace {
            println!("{line}");
        }
        println!();
    }
    match id.result {
        IdentResult::Identified { expr, context, .. } => {
            let e = if raw { expr } else { simplify(&expr) };
            let body = match format {
                Format::Text => e.to_text(),
                Format::Latex => e.to_latex(),
            };
            let lhs = format!("P({} | do({}))", outcome.join(","), treatment.join(","));
            println!("{lhs} = {body}");
            if !context.is_empty() {
                println!("# any fixed value of {} gives the same result", context.join(", "));
            }
            Ok(0)
        }
        IdentResult::NotIdentified { district, subset } => {
            println!("NOT IDENTIFIABLE");
            println!("hedge: district {{{}}} contains {{{}}}", district.join(", "), subset.join(", "));
            Ok(NOT_IDENTIFIABLE)
        }
    }
}

fn simulate(example: u8, n: usize, seed: u64, out: &Path, include_po: bool, rho: f64) -> Result<u8> {
    eprintln!("seed: {seed}");
    if n == 0 {
        bail!("--n must be positive");
    }
    let ex = build_example(example, &ExampleOptions { rho, seed })?;
    let d = ex.scm.sample(n, seed)?;
    let file = fs::File::create(out).with_context(|| format!("cannot create {}", out.display()))?;
    d.write_csv(BufWriter::new(file), include_po)?;
    let mut meta = d.metadata_json();
    meta["example"] = serde_json::to_value(&ex.meta)?;
    meta["include_po"] = include_po.into();
    let sidecar = out.with_extension("json");
    fs::write(&sidecar, serde_json::to_string_pretty(&meta)? + "\n")
        .with_context(|| format!("cannot write {}", sidecar.display()))?;
    eprintln!("wrote {} rows to {} and {}", n, out.display(), sidecar.display());
    Ok(0)
}

fn reproduce(out: &Path, quick: bool, seed: u64) -> Result<u8> {
    eprintln!("seed: {seed}");
    let start = Instant::now();
    let (report, timings) = harness::run(&HarnessOptions { quick, seed })?;
    fs::write(out, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("cannot write {}", out.display()))?;
    for (id, t) in &timings {
        eprintln!("{id:<12} {:>8.2}s", t.as_secs_f64());
    }
    eprintln!("total        {:>8.2}s", start.elapsed().as_secs_f64());
    for s in report.examples.iter().chain(&report.general) {
        println!("{:<4} {}", if s.pass { "PASS" } else { "FAIL" }, s.id);
    }
    println!("{} checks passed, {} failed", report.passed, report.failed);
    for f in report.failures() {
        println!("failed: {f}");
    }
    Ok(if report.all_pass { 0 } else { NEGATIVE })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { INPUT_ERROR } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Dsep { graph, x, y, given } => dsep(graph, x, y, given),
        Command::Adjust { graph, treatment, outcome, set } => adjust(graph, treatment, outcome, set.as_deref()),
        Command::Identify { graph, treatment, outcome, format, explain, raw } => {
            run_identify(graph, treatment, outcome, *format, *explain, *raw)
        }
        Command::Simulate { example, n, seed, out, include_po, rho } => {
            simulate(*example, *n, *seed, out, *include_po, *rho)
        }
        Command::Reproduce { out, quick, seed } => reproduce(out, *quick, *seed),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(INPUT_ERROR)
        }
    }
}
