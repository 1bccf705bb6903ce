use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use wdnorm::cone::{self, ConeSpec};
use wdnorm::eigen::{self, EigenOptions, EigenvalueResult};
use wdnorm::model::{self, DesignMatrix, IndexSet, MatrixFormat};
use wdnorm::norms::{self, NormSpec};
use wdnorm::oracle::{self, ExperimentConfig};
use wdnorm::solve::{self, OverlapGroups, SolveOptions};
use wdnorm::Error;

mod output;

use output::{number, Format};

#[derive(Parser)]
#[command(name = "wdnorm", version, about = "Weakly decomposable norms, eigenvalues and oracle checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate Ω(β).
    Norm(VectorArgs),
    /// Evaluate the dual norm Ω_*(w).
    Dual(VectorArgs),
    /// ℓ1, Ω or adaptive restricted eigenvalue of (X, S, L).
    Eigenvalue(EigenArgs),
    /// Penalized least squares.
    Solve(SolveArgs),
    /// Monte Carlo check of the sharp oracle inequality.
    Oracle(OracleArgs),
    /// Compare the adaptive, ℓ1 and Ω eigenvalues for a cone norm.
    Compare(EigenArgs),
    /// Pontil–Maurer expectation bound against simulation.
    Bound(BoundArgs),
}

#[derive(Args)]
struct Common {
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct VectorArgs {
    /// Norm specification: a JSON file or inline JSON.
    #[arg(long)]
    norm_spec: String,
    /// Comma-separated values or a file with one value per row.
    #[arg(long, allow_hyphen_values = true)]
    vector: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EigenArgs {
    /// Design matrix CSV, one row per observation.
    #[arg(long)]
    matrix: PathBuf,
    /// 1-based indices, comma-separated.
    #[arg(long, allow_hyphen_values = true)]
    set: String,
    /// The cone-condition constant L.
    #[arg(long)]
    big_l: f64,
    /// Defaults to ℓ1.
    #[arg(long)]
    norm_spec: Option<String>,
    /// Compute the adaptive restricted eigenvalue instead.
    #[arg(long)]
    adaptive: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 12)]
    orthant_cap: usize,
    #[arg(long, default_value_t = 64)]
    restarts: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// Response: comma-separated values or a file with one value per row.
    #[arg(long, allow_hyphen_values = true)]
    response: String,
    #[arg(long)]
    lambda: f64,
    /// Defaults to ℓ1; ignored with --overlap-groups.
    #[arg(long)]
    norm_spec: Option<String>,
    /// Overlapping groups as 1-based lists, e.g. "1,2;2,3".
    #[arg(long)]
    overlap_groups: Option<String>,
    /// Weight overlapping groups by √|G|.
    #[arg(long)]
    weighted: bool,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct OracleArgs {
    /// Experiment configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// JSON-lines report; the summary CSV is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    matrix: PathBuf,
    /// A cone norm specification.
    #[arg(long)]
    norm_spec: String,
    #[arg(long, default_value_t = 1000)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

/// Exit status of a successful computation.
enum Verdict {
    Ok,
    /// Non-convergence or an unverifiable result.
    Incomplete,
    /// An oracle-inequality violation was detected.
    Violation,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let started = Instant::now();
    let result = run(cli.command);
    eprintln!("elapsed {:.3}s", started.elapsed().as_secs_f64());
    match result {
        Ok(Verdict::Ok) => ExitCode::SUCCESS,
        Ok(Verdict::Incomplete) => ExitCode::from(2),
        Ok(Verdict::Violation) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(match e {
                Error::Budget(_) | Error::Inapplicable { .. } => 2,
                _ => 1,
            })
        }
    }
}

fn run(command: Command) -> wdnorm::Result<Verdict> {
    match command {
        Command::Norm(a) => norm(a, false),
        Command::Dual(a) => norm(a, true),
        Command::Eigenvalue(a) => eigenvalue(a),
        Command::Solve(a) => solve_cmd(a),
        Command::Oracle(a) => oracle_cmd(a),
        Command::Compare(a) => compare(a),
        Command::Bound(a) => bound(a),
    }
}

fn load_norm(arg: &str) -> wdnorm::Result<NormSpec> {
    if arg.trim_start().starts_with('{') {
        NormSpec::from_json(arg)
    } else {
        let text = std::fs::read_to_string(arg).map_err(|e| io_error(arg, e))?;
        NormSpec::from_json(&text)
    }
}

fn io_error(path: impl AsRef<Path>, e: std::io::Error) -> Error {
    Error::Io {
        path: path.as_ref().to_path_buf(),
        source: e,
    }
}

/// Inline comma-separated numbers, or a file path.
fn load_values(arg: &str) -> wdnorm::Result<Vec<f64>> {
    let inline: Option<Vec<f64>> = arg
        .split(',')
        .map(|t| t.trim().parse::<f64>().ok())
        .collect();
    match inline {
        Some(v) => Ok(v),
        None if Path::new(arg).exists() => model::load_vector(arg),
        None => Err(Error::Parse {
            row: 1,
            col: 1,
            msg: format!("'{arg}' is neither a list of numbers nor a readable file"),
        }),
    }
}

fn parse_set(arg: &str, p: usize) -> wdnorm::Result<IndexSet> {
    let mut idx = Vec::new();
    for tok in arg.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let j: usize = tok.parse().map_err(|_| {
            Error::InvalidArgument(format!("set entry '{tok}' is not a positive integer"))
        })?;
        idx.push(j);
    }
    IndexSet::from_one_based(p, &idx)
}

fn load_design(path: &Path) -> wdnorm::Result<DesignMatrix> {
    model::load_matrix(path, MatrixFormat::Csv)
}

fn eigen_json(r: &EigenvalueResult) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("value".into(), number(r.value));
    m.insert("certified".into(), json!(r.certified));
    m.insert("lower_bound".into(), number(r.lower_bound));
    m.insert("upper_bound".into(), number(r.upper_bound));
    m.insert("effective_sparsity".into(), number(r.effective_sparsity()));
    m.insert("witness".into(), json!(r.witness));
    m
}

fn norm(a: VectorArgs, dual: bool) -> wdnorm::Result<Verdict> {
    let spec = load_norm(&a.norm_spec)?;
    let v = load_values(&a.vector)?;
    let mut m = Map::new();
    if dual {
        m.insert("value".into(), number(norms::dual_norm_eval(&spec, &v)?));
    } else if let NormSpec::Cone(c) = &spec {
        let r = cone::cone_norm_eval(c, &v)?;
        m.insert("value".into(), number(r.value));
        m.insert("minimizer".into(), json!(r.minimizer));
        if let Some(part) = r.partition {
            m.insert("partition".into(), json!(part));
        }
        m.insert("certified".into(), json!(r.certified));
    } else {
        m.insert("value".into(), number(norms::norm_eval(&spec, &v)?));
    }
    output::emit(&Value::Object(m), a.common.format, a.common.out.as_deref())?;
    Ok(Verdict::Ok)
}

fn eigen_options(a: &EigenArgs) -> EigenOptions {
    EigenOptions {
        orthant_cap: a.orthant_cap,
        restarts: a.restarts,
        seed: a.seed,
    }
}

fn eigenvalue(a: EigenArgs) -> wdnorm::Result<Verdict> {
    let x = load_design(&a.matrix)?;
    let set = parse_set(&a.set, x.p())?;
    let opts = eigen_options(&a);
    let spec = a.norm_spec.as_deref().map(load_norm).transpose()?;
    let (kind, r) = if a.adaptive {
        ("adaptive", eigen::adaptive_restricted_eigenvalue(&x, &set, a.big_l, &opts)?)
    } else {
        match &spec {
            None | Some(NormSpec::L1) => ("l1", eigen::l1_eigenvalue(&x, &set, a.big_l, &opts)?),
            Some(s) => ("omega", eigen::omega_eigenvalue(&x, &set, a.big_l, s, &opts)?),
        }
    };
    let mut m = Map::new();
    m.insert("kind".into(), json!(kind));
    m.insert("set".into(), json!(set.to_one_based()));
    m.insert("big_l".into(), number(a.big_l));
    m.extend(eigen_json(&r));
    if kind == "l1" {
        m.insert("compatibility".into(), number(set.len() as f64 * r.value * r.value));
    }
    output::emit(&Value::Object(m), a.common.format, a.common.out.as_deref())?;
    Ok(Verdict::Ok)
}

fn parse_groups(arg: &str) -> wdnorm::Result<Vec<Vec<usize>>> {
    arg.split(';')
        .map(|g| {
            g.split(',')
                .map(|t| {
                    t.trim().parse::<usize>().map_err(|_| {
                        Error::InvalidArgument(format!("group entry '{}' is not an index", t.trim()))
                    })
                })
                .collect()
        })
        .collect()
}

fn solve_cmd(a: SolveArgs) -> wdnorm::Result<Verdict> {
    let x = load_design(&a.matrix)?;
    let y = load_values(&a.response)?;
    let opts = SolveOptions {
        max_iterations: a.max_iter,
        tolerance: a.tol,
        ..SolveOptions::default()
    };
    let mut m = Map::new();
    let fit = if let Some(g) = &a.overlap_groups {
        let groups = OverlapGroups::from_one_based(x.p(), &parse_groups(g)?)?;
        let ov = solve::solve_overlap(&x, &y, a.lambda, &groups, a.weighted, &opts)?;
        m.insert("parts".into(), json!(ov.parts));
        ov.fit
    } else {
        let spec = a.norm_spec.as_deref().map(load_norm).transpose()?.unwrap_or(NormSpec::L1);
        solve::solve_penalized_ls(&x, &y, a.lambda, &spec, &opts)?
    };
    m.insert("beta".into(), json!(fit.beta));
    m.insert("objective".into(), number(fit.objective));
    m.insert("kkt_residual".into(), number(fit.kkt_residual));
    m.insert("iterations".into(), json!(fit.iterations));
    m.insert("converged".into(), json!(fit.converged));
    m.insert("support".into(), json!(model::support(&fit.beta).to_one_based()));
    output::emit(&Value::Object(m), a.common.format, a.common.out.as_deref())?;
    Ok(if fit.converged { Verdict::Ok } else { Verdict::Incomplete })
}

fn oracle_cmd(a: OracleArgs) -> wdnorm::Result<Verdict> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    let summary = oracle::run_experiment(&cfg, &a.out)?;
    eprintln!(
        "replicates {}/{} done; summary in {}",
        summary.replicates,
        cfg.replicates,
        oracle::summary_path(&a.out).display()
    );
    match a.format {
        Format::Csv => print!("{}", summary.to_csv()),
        Format::Json => println!("{}", serde_json::to_string(&summary)?),
    }
    Ok(if summary.failed > 0 { Verdict::Violation } else { Verdict::Ok })
}

fn cone_of(spec: NormSpec) -> wdnorm::Result<ConeSpec> {
    match spec {
        NormSpec::Cone(c) => Ok(c),
        _ => Err(Error::InvalidArgument("this command needs a cone norm".into())),
    }
}

fn compare(a: EigenArgs) -> wdnorm::Result<Verdict> {
    let x = load_design(&a.matrix)?;
    let set = parse_set(&a.set, x.p())?;
    let opts = eigen_options(&a);
    let spec = a
        .norm_spec
        .as_deref()
        .map(load_norm)
        .transpose()?
        .unwrap_or(NormSpec::Cone(ConeSpec::FullOrthant));
    let rec = oracle::comparison_check(&x, &set, a.big_l, &cone_of(spec)?, &opts)?;
    let mut m = Map::new();
    m.insert("adaptive".into(), Value::Object(eigen_json(&rec.adaptive)));
    m.insert("l1".into(), Value::Object(eigen_json(&rec.l1)));
    m.insert("omega".into(), rec.omega.as_ref().map_or(Value::Null, |o| Value::Object(eigen_json(o))));
    m.insert("l1_holds".into(), json!(rec.l1_holds));
    m.insert("omega_holds".into(), json!(rec.omega_holds));
    m.insert("l1_violated".into(), json!(rec.l1_violated));
    m.insert("omega_violated".into(), json!(rec.omega_violated));
    m.insert("skipped".into(), json!(rec.skipped));
    output::emit(&Value::Object(m), a.common.format, a.common.out.as_deref())?;
    Ok(if rec.l1_violated || rec.omega_violated == Some(true) {
        Verdict::Violation
    } else if rec.skipped.is_some() {
        Verdict::Incomplete
    } else {
        Verdict::Ok
    })
}

fn bound(a: BoundArgs) -> wdnorm::Result<Verdict> {
    let x = load_design(&a.matrix)?;
    let c = cone_of(load_norm(&a.norm_spec)?)?;
    let rec = oracle::pontil_maurer_check(&x, &c, a.draws, a.seed)?;
    let v = json!({
        "draws": rec.draws,
        "mean": number(rec.mean),
        "std_error": number(rec.std_error),
        "bound": number(rec.bound),
        "holds": rec.holds,
    });
    output::emit(&v, a.common.format, a.common.out.as_deref())?;
    Ok(if rec.holds { Verdict::Ok } else { Verdict::Violation })
}
