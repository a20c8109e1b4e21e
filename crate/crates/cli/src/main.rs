use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};

use fanfire_core::charts::{
    plane_curve_oracle, run_smoothness, ChartOracle, SmoothnessError, SmoothnessReport, SyntheticOracle,
    SyntheticSpec,
};
use fanfire_core::petri::{Marking, PetriNet};
use fanfire_core::poly::BPoly;
use fanfire_core::runtime::{read_jsonl, replay, write_jsonl, RunConfig, RunResult};
use fanfire_core::symmetry::{GroupSpec, DEFAULT_GROUP_CAP};
use fanfire_core::traversal::{run_traversal, ChamberOracle};
use fanfire_core::Arrangement;

mod bench;

const EXIT_SINGULAR: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_SYMMETRY: u8 = 3;
const EXIT_INDETERMINATE: u8 = 4;
const EXIT_REPLAY: u8 = 5;
const EXIT_RUNTIME: u8 = 6;

#[derive(Parser)]
#[command(name = "fanfire", version, about = "Petri-net workflows: chamber traversal and smoothness search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate the chambers of a hyperplane arrangement, optionally up to symmetry.
    Traverse {
        /// Arrangement JSON: {"n": .., "normals": [["p/q", ..], ..]}.
        arrangement: PathBuf,
        /// Group JSON: {"m": .., "generators": [{"sigma": [..], "eps": [..]}]}.
        #[arg(long)]
        group: Option<PathBuf>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Decide smoothness from a polynomial or a synthetic chart-tree spec.
    Smooth {
        /// Monomial list [{"coeff", "xexp", "yexp"}] or synthetic spec object.
        spec: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Time a workload at several worker counts and write CSV.
    Bench {
        /// Synthetic chart-tree spec, or {"nodes", "extra_edges", "seed", "cost_ms"} graph spec.
        workload: PathBuf,
        /// Worker counts, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        workers: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-execute a recorded trace and compare with the recorded final marking.
    Replay {
        net: PathBuf,
        initial: PathBuf,
        trace: PathBuf,
        /// Expected final marking; defaults to `<trace>.final.json` if present.
        #[arg(long = "final")]
        final_marking: Option<PathBuf>,
        /// Compare markings without token ids.
        #[arg(long)]
        canonical: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, env = "FANFIRE_WORKERS")]
    workers: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the trace as JSON lines; net and markings go alongside.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Probability of failing each action invocation.
    #[arg(long, default_value_t = 0.0)]
    inject_failures: f64,
    #[arg(long, default_value_t = 3)]
    max_retries: u32,
    /// Result destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig, Failure> {
        let mut cfg = RunConfig::default()
            .seed(self.seed)
            .failures(self.inject_failures, self.max_retries)
            .trace(self.trace.is_some());
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.validate().map_err(input)?;
        Ok(cfg)
    }
}

/// An error carrying its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }
}

type Outcome = Result<u8, Failure>;

fn input(e: impl Into<anyhow::Error>) -> Failure {
    Failure::new(EXIT_INPUT, e)
}

fn runtime(e: impl Into<anyhow::Error>) -> Failure {
    Failure::new(EXIT_RUNTIME, e)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, value: &Value) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(runtime)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(runtime),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sidecar(trace: &Path, suffix: &str) -> PathBuf {
    let mut s = trace.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Trace as JSON lines plus `<trace>.net.json`, `.initial.json`, `.final.json`.
fn write_trace(path: &Path, net: &PetriNet, initial: &Marking, run: &RunResult) -> anyhow::Result<()> {
    let records = run.trace.as_deref().unwrap_or_default();
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = std::io::BufWriter::new(file);
    write_jsonl(&mut w, records)?;
    std::io::Write::flush(&mut w)?;
    std::fs::write(sidecar(path, ".net.json"), serde_json::to_string_pretty(net)?)?;
    std::fs::write(sidecar(path, ".initial.json"), serde_json::to_string(initial)?)?;
    std::fs::write(sidecar(path, ".final.json"), serde_json::to_string(&run.final_marking)?)?;
    Ok(())
}

fn traverse(arrangement: &Path, group: Option<&Path>, args: &RunArgs) -> Outcome {
    let arr: Arrangement = read_json(arrangement).map_err(input)?;
    let group = match group {
        None => None,
        Some(p) => {
            let spec: GroupSpec = read_json(p).map_err(input)?;
            let g = spec.close(DEFAULT_GROUP_CAP).map_err(input)?;
            arr.validate_symmetry(&g)
                .map_err(|e| Failure::new(EXIT_SYMMETRY, anyhow::anyhow!("symmetry check failed: {e}")))?;
            Some(g)
        }
    };
    let oracle = Arc::new(ChamberOracle::new(arr, group));
    let config = args.config()?;
    let outcome = run_traversal(Arc::clone(&oracle), &config).map_err(runtime)?;
    if let Some(path) = &args.trace {
        let initial = fanfire_core::traversal::traversal_initial_marking(oracle.as_ref()).map_err(runtime)?;
        write_trace(path, &fanfire_core::traversal::build_traversal_net(), &initial, &outcome.run)
            .map_err(runtime)?;
    }
    let rows: Vec<Value> = outcome
        .states
        .iter()
        .map(|(s, n)| {
            let witness = oracle
                .chamber(s)
                .and_then(|c| serde_json::to_value(c).ok())
                .map(|c| c["witness"].clone());
            json!({"state": s, "orbit_size": n, "witness": witness})
        })
        .collect();
    emit(args.out.as_deref(), &Value::Array(rows))?;
    Ok(0)
}

fn smooth_with<O: ChartOracle>(oracle: O, root: fanfire_core::charts::Chart, args: &RunArgs) -> Outcome {
    let oracle = Arc::new(oracle);
    let roots = [root];
    let config = args.config()?;
    let report: SmoothnessReport = match run_smoothness(oracle, &roots, &config) {
        Ok(r) => r,
        Err(SmoothnessError::Indeterminate { chart, message }) => {
            emit(
                args.out.as_deref(),
                &json!({"verdict": "indeterminate", "chart": chart, "message": message}),
            )?;
            eprintln!("indeterminate: {message}");
            return Ok(EXIT_INDETERMINATE);
        }
        Err(e) => return Err(runtime(e)),
    };
    if let Some(path) = &args.trace {
        let initial = fanfire_core::charts::smoothness_initial_marking(&roots).map_err(runtime)?;
        write_trace(path, &fanfire_core::charts::build_smoothness_net(), &initial, &report.run)
            .map_err(runtime)?;
    }
    emit(args.out.as_deref(), &report.to_json())?;
    Ok(match report.verdict {
        fanfire_core::charts::Verdict::Smooth => 0,
        fanfire_core::charts::Verdict::Singular { .. } => EXIT_SINGULAR,
    })
}

fn smooth(spec: &Path, args: &RunArgs) -> Outcome {
    let raw: Value = read_json(spec).map_err(input)?;
    if raw.is_array() {
        let f: BPoly = serde_json::from_value(raw).context("parsing polynomial").map_err(input)?;
        let oracle = plane_curve_oracle(f).map_err(input)?;
        let root = oracle.root();
        smooth_with(oracle, root, args)
    } else {
        let spec: SyntheticSpec = serde_json::from_value(raw)
            .context("parsing synthetic spec")
            .map_err(input)?;
        let oracle = SyntheticOracle::new(spec).map_err(input)?;
        let root = oracle.root();
        smooth_with(oracle, root, args)
    }
}

fn replay_cmd(net: &Path, initial: &Path, trace: &Path, expected: Option<&Path>, canonical: bool) -> Outcome {
    let net: PetriNet = read_json(net).map_err(input)?;
    let initial: Marking = read_json(initial).map_err(input)?;
    let file = std::fs::File::open(trace)
        .with_context(|| format!("opening {}", trace.display()))
        .map_err(input)?;
    let records = read_jsonl(std::io::BufReader::new(file))
        .map_err(|e| Failure::new(EXIT_REPLAY, anyhow::anyhow!("corrupt trace: {e}")))?;
    let replayed = replay(&net, &initial, &records)
        .map_err(|e| Failure::new(EXIT_REPLAY, anyhow::anyhow!("replay failed: {e}")))?;
    let default = sidecar(trace, ".final.json");
    let expected = match expected {
        Some(p) => Some(p.to_path_buf()),
        None => default.exists().then_some(default),
    };
    if let Some(p) = expected {
        let want: Marking = read_json(&p).map_err(input)?;
        let same = if canonical {
            want.canonical() == replayed.canonical()
        } else {
            want == replayed
        };
        if !same {
            return Err(Failure::new(
                EXIT_REPLAY,
                anyhow::anyhow!(
                    "replayed final marking differs from {} after {} records",
                    p.display(),
                    records.len()
                ),
            ));
        }
    }
    println!("replayed {} records", records.len());
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Traverse {
            arrangement,
            group,
            run,
        } => traverse(arrangement, group.as_deref(), run),
        Command::Smooth { spec, run } => smooth(spec, run),
        Command::Bench {
            workload,
            workers,
            reps,
            seed,
            out,
        } => bench::run(workload, workers, *reps, *seed, out.as_deref()),
        Command::Replay {
            net,
            initial,
            trace,
            final_marking,
            canonical,
        } => replay_cmd(net, initial, trace, final_marking.as_deref(), *canonical),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
