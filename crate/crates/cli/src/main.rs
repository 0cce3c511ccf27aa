use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sol3graph_core::domain::read_domain;
use sol3graph_core::{
    capped_sequence, check_conditions, divergence_set, flux_report, solve_dirichlet, triangulate, ArcKind, Case,
    DirichletData, Error, NodeClass, Solution, SolverConfig,
};

const DEFAULT_H: f64 = 0.05;
const DEFAULT_TOL: f64 = 1e-10;
const DEFAULT_CAPS: [f64; 7] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
const THREADS_ENV: &str = "SOL3GRAPH_THREADS";
const OBJ_NOTE: &str = "OBJ vertices are (x, y, u) coordinates of the graph, not an isometric embedding of Sol3";

#[derive(Parser)]
#[command(name = "sol3graph", version, about = "Minimal Killing graphs in Sol3")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a domain file against the Scherk-domain invariants.
    Validate { file: PathBuf },
    /// Jenkins-Serrin solvability verdict.
    Check {
        file: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Solve the Dirichlet problem on a domain with finite data only.
    Solve {
        file: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Capped sequence, normalisation and divergence report for infinite data.
    Scherk {
        file: PathBuf,
        #[command(flatten)]
        opts: Opts,
    },
    /// Export a solution file as a mesh.
    Export {
        file: PathBuf,
        #[arg(long, default_value = "obj")]
        format: String,
        #[command(flatten)]
        opts: Opts,
    },
    /// Re-run a manifest at one thread and compare against the recorded outputs.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone, Default)]
struct Opts {
    /// Target mesh size.
    #[arg(long)]
    h: Option<f64>,
    /// Nonlinear solver tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Comma-separated cap schedule.
    #[arg(long, value_delimiter = ',')]
    caps: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; overridden by SOL3GRAPH_THREADS.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
struct Overrides {
    h: Option<f64>,
    tol: Option<f64>,
    caps: Option<Vec<f64>>,
    format: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RunManifest {
    command: String,
    input: PathBuf,
    overrides: Overrides,
    threads: usize,
    outputs: Vec<String>,
    wall_time_s: f64,
    library_version: String,
    notes: Vec<String>,
}

/// Successful run; `negative` selects exit code 1.
struct Outcome {
    negative: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Outcome { negative: false }) => ExitCode::SUCCESS,
        Ok(Outcome { negative: true }) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> anyhow::Result<Outcome> {
    match command {
        Command::Validate { file } => validate(&file),
        Command::Check { file, opts } => {
            let threads = init_threads(opts.threads)?;
            let over = overrides(&opts, None);
            execute("check", &file, &over, opts.out.as_deref(), threads)
        }
        Command::Solve { file, opts } => {
            let threads = init_threads(opts.threads)?;
            let over = overrides(&opts, None);
            execute("solve", &file, &over, Some(&out_dir(&opts)), threads)
        }
        Command::Scherk { file, opts } => {
            let threads = init_threads(opts.threads)?;
            let over = overrides(&opts, None);
            execute("scherk", &file, &over, Some(&out_dir(&opts)), threads)
        }
        Command::Export { file, format, opts } => {
            let threads = init_threads(opts.threads)?;
            let over = overrides(&opts, Some(format));
            execute("export", &file, &over, Some(&out_dir(&opts)), threads)
        }
        Command::Replay { manifest, out } => replay(&manifest, &out),
    }
}

fn overrides(opts: &Opts, format: Option<String>) -> Overrides {
    Overrides {
        h: opts.h,
        tol: opts.tol,
        caps: opts.caps.clone(),
        format,
    }
}

fn out_dir(opts: &Opts) -> PathBuf {
    opts.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

/// Sizes the global pool; the environment variable wins over the flag.
fn init_threads(flag: Option<usize>) -> anyhow::Result<usize> {
    let env = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().with_context(|| format!("{THREADS_ENV}={v} is not a thread count"))?),
        Err(_) => None,
    };
    build_pool(env.or(flag))
}

fn build_pool(threads: Option<usize>) -> anyhow::Result<usize> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            bail!("thread count must be positive");
        }
        builder = builder.num_threads(n);
    }
    builder.build_global().context("thread pool already initialised")?;
    Ok(rayon::current_num_threads())
}

fn config(over: &Overrides) -> SolverConfig {
    SolverConfig {
        picard_tol: over.tol.unwrap_or(DEFAULT_TOL),
        newton: true,
        ..SolverConfig::with_h(over.h.unwrap_or(DEFAULT_H))
    }
}

fn validate(file: &Path) -> anyhow::Result<Outcome> {
    match read_domain(file) {
        Ok(_) => {
            println!("valid");
            Ok(Outcome { negative: false })
        }
        Err(Error::InvalidDomain(diags)) => {
            for d in diags {
                println!("invalid: {d}");
            }
            Ok(Outcome { negative: true })
        }
        Err(e @ Error::Parse { .. }) => {
            println!("invalid: {e}");
            Ok(Outcome { negative: true })
        }
        Err(e) => Err(e).with_context(|| format!("reading {}", file.display())),
    }
}

/// Runs one command, writes its outputs and manifest into `out`.
fn execute(command: &str, input: &Path, over: &Overrides, out: Option<&Path>, threads: usize) -> anyhow::Result<Outcome> {
    let start = Instant::now();
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut files: Vec<(String, String)> = Vec::new();
    let mut notes = Vec::new();
    let negative = match command {
        "check" => cmd_check(input, &mut files)?,
        "solve" => cmd_solve(input, over, &mut files)?,
        "scherk" => cmd_scherk(input, over, &mut files)?,
        "export" => {
            notes.push(OBJ_NOTE.to_string());
            cmd_export(input, over, &mut files)?
        }
        other => bail!("unknown command {other}"),
    };
    let Some(dir) = out else {
        return Ok(Outcome { negative });
    };
    for (name, body) in &files {
        let path = dir.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    let manifest = RunManifest {
        command: command.to_string(),
        input: fs::canonicalize(input).unwrap_or_else(|_| input.to_path_buf()),
        overrides: over.clone(),
        threads,
        outputs: files.into_iter().map(|(name, _)| name).collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        notes,
    };
    let path = dir.join(format!("{command}.manifest.json"));
    fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    println!("wrote {}", path.display());
    Ok(Outcome { negative })
}

fn cmd_check(input: &Path, files: &mut Vec<(String, String)>) -> anyhow::Result<bool> {
    let domain = read_domain(input).with_context(|| format!("reading {}", input.display()))?;
    let verdict = check_conditions(&domain)?;
    let text = serde_json::to_string_pretty(&verdict)? + "\n";
    print!("{text}");
    files.push(("verdict.json".into(), text));
    Ok(!verdict.solvable)
}

fn cmd_solve(input: &Path, over: &Overrides, files: &mut Vec<(String, String)>) -> anyhow::Result<bool> {
    let domain = read_domain(input).with_context(|| format!("reading {}", input.display()))?;
    if domain.arcs.iter().any(|a| a.kind != ArcKind::C) {
        println!("domain has infinite-data arcs: use scherk");
        return Ok(true);
    }
    let cfg = config(over);
    let mesh = Arc::new(triangulate(&domain, cfg.h, cfg.truncation())?);
    let sol = solve_dirichlet(&mesh, &DirichletData::from_domain(&domain)?, &cfg)?;
    let report = flux_report(&sol, &domain)?;
    println!(
        "{} nodes, {} iterations, closed-loop flux residual {:.3e}",
        mesh.node_count(),
        sol.iterations,
        report.closed_loop_residual
    );
    files.push(("solution.json".into(), sol.to_json()));
    files.push(("flux.csv".into(), report.to_csv()));
    Ok(false)
}

#[derive(Serialize)]
struct SequenceFile<'a> {
    case: Case,
    caps: &'a [f64],
    shifts: &'a [f64],
    boundary_levels: Vec<(f64, f64)>,
    counts: Counts,
    classes: &'a [NodeClass],
}

#[derive(Serialize)]
struct Counts {
    convergent: usize,
    divergent_plus: usize,
    divergent_minus: usize,
}

fn cmd_scherk(input: &Path, over: &Overrides, files: &mut Vec<(String, String)>) -> anyhow::Result<bool> {
    let domain = read_domain(input).with_context(|| format!("reading {}", input.display()))?;
    let cfg = config(over);
    let caps = over.caps.clone().unwrap_or_else(|| DEFAULT_CAPS.to_vec());
    let seq = capped_sequence(&domain, &caps, &cfg)?;
    for (k, sol) in seq.solutions.iter().enumerate() {
        files.push((format!("solution_cap{k:02}.json"), sol.to_json()));
        let report = flux_report(sol, &domain).with_context(|| format!("flux at cap index {k}"))?;
        files.push((format!("flux_cap{k:02}.csv"), report.to_csv()));
    }
    let divergence = divergence_set(&seq, &domain);
    let summary = SequenceFile {
        case: seq.case,
        caps: &seq.caps,
        shifts: &seq.shifts,
        boundary_levels: seq.boundary_levels(),
        counts: Counts {
            convergent: seq.count(NodeClass::Convergent),
            divergent_plus: seq.count(NodeClass::DivergentPlus),
            divergent_minus: seq.count(NodeClass::DivergentMinus),
        },
        classes: &seq.classes,
    };
    files.push(("sequence.json".into(), serde_json::to_string_pretty(&summary)? + "\n"));
    files.push(("divergence.json".into(), serde_json::to_string_pretty(&divergence)? + "\n"));
    let c = &summary.counts;
    println!(
        "{} caps, {} convergent, {} divergent+, {} divergent-, {} divergence components",
        caps.len(),
        c.convergent,
        c.divergent_plus,
        c.divergent_minus,
        divergence.components.len()
    );
    Ok(!divergence.is_empty())
}

fn cmd_export(input: &Path, over: &Overrides, files: &mut Vec<(String, String)>) -> anyhow::Result<bool> {
    let format = over.format.as_deref().unwrap_or("obj");
    if format != "obj" {
        bail!("unsupported format {format}");
    }
    let sol = Solution::read(input)?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("solution");
    files.push((format!("{stem}.obj"), sol.to_obj()));
    Ok(false)
}

fn replay(manifest_path: &Path, out: &Path) -> anyhow::Result<Outcome> {
    let text = fs::read_to_string(manifest_path).with_context(|| format!("reading {}", manifest_path.display()))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", manifest_path.display()))?;
    let threads = build_pool(Some(1))?;
    let original = manifest_path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(out)?;
    if fs::canonicalize(original)? == fs::canonicalize(out)? {
        bail!("replay output directory must differ from the recorded one");
    }
    execute(&manifest.command, &manifest.input, &manifest.overrides, Some(out), threads)?;
    let mut differing = 0;
    for name in &manifest.outputs {
        let a = fs::read(original.join(name)).with_context(|| format!("reading recorded {name}"))?;
        let b = fs::read(out.join(name))?;
        let same = a == b;
        println!("{name}: {}", if same { "identical" } else { "differs" });
        differing += usize::from(!same);
    }
    Ok(Outcome { negative: differing > 0 })
}
