mod plot;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use topoloss::experiment::{
    generate_nested_circles, run_embedding, run_sweep, top_persistence, CirclesConfig, EmbedConfig, EmbedOutcome,
    SWEEP_GRID,
};
use topoloss::optimizer::{read_trace_path, write_trace_path, TraceRow};
use topoloss::{
    bottleneck, build_rips, check_trace, compute_persistence, compute_persistence_dim0, wasserstein,
    GroundTruthDiagram, PersistenceDiagram, PointCloud, StepRule, TheoremConstants,
};

/// Topology-aware embedding of point clouds.
#[derive(Parser)]
#[command(name = "topoloss", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample two nested circles in R^3 and write them as CSV.
    Generate(GenerateArgs),
    /// Rips persistence diagram of a point cloud CSV.
    Ph(PhArgs),
    /// Wasserstein and bottleneck distance between two diagram files.
    Dist(DistArgs),
    /// Train an embedding and write its outputs to a run directory.
    Embed(RunArgs),
    /// Record and check the three-phase loss trace, or check an existing trace CSV.
    Trace(TraceArgs),
    /// Run the embedding over a grid of loss weights.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct CirclesArgs {
    #[arg(long)]
    n_per_circle: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    r1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    r2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    noise: Option<f64>,
}

impl CirclesArgs {
    fn apply(&self, c: &mut CirclesConfig) {
        set(&mut c.n_per_circle, self.n_per_circle);
        set(&mut c.r1, self.r1);
        set(&mut c.r2, self.r2);
        set(&mut c.noise, self.noise);
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// JSON file with any of seed, n_per_circle, r1, r2, noise.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    circles: CirclesArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(default)]
struct GenerateConfig {
    seed: u64,
    #[serde(flatten)]
    circles: CirclesConfig,
}

#[derive(Args)]
struct PhArgs {
    /// Point cloud CSV.
    #[arg(long)]
    input: PathBuf,
    /// Highest homology dimension (0 or 1).
    #[arg(long, default_value_t = 0)]
    max_dim: usize,
    /// Rips radius cap.
    #[arg(long, default_value_t = f64::INFINITY)]
    max_radius: f64,
    /// Diagram JSON path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DistArgs {
    a: PathBuf,
    b: PathBuf,
    /// Order: a number at least 1, or `inf`.
    #[arg(long, default_value = "2")]
    q: String,
    /// Homology dimension compared.
    #[arg(long, default_value_t = 0)]
    dim: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed step size.
    #[arg(long, allow_hyphen_values = true)]
    eta: Option<f64>,
    /// Take the step size from the theorem constants.
    #[arg(long)]
    theorem: bool,
    #[arg(long, allow_hyphen_values = true)]
    ell0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    ell1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    ell2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    c_x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda_topo: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    lambda_reg: Option<f64>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long, allow_hyphen_values = true)]
    perplexity: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    truth_points: Option<usize>,
    #[arg(long)]
    hom_dim: Option<usize>,
    #[command(flatten)]
    circles: CirclesArgs,
    /// Point cloud CSV to embed instead of generated circles.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Ground-truth diagram JSON instead of the data's own diagram.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TraceArgs {
    /// Check this trace CSV instead of running.
    #[arg(long)]
    from: Option<PathBuf>,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Grid cells as `lambda_topo:lambda_reg`, comma separated.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<String>>,
    #[command(flatten)]
    run: RunArgs,
}

/// Everything a run directory needs to be reproduced.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    #[serde(flatten)]
    embed: EmbedConfig,
    input: Option<PathBuf>,
    truth: Option<PathBuf>,
    grid: Option<Vec<(f64, f64)>>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    #[serde(flatten)]
    config: &'a RunConfig,
}

enum CliError {
    Validation(String),
    Io(String),
}

impl From<topoloss::Error> for CliError {
    fn from(e: topoloss::Error) -> Self {
        if e.is_io() {
            CliError::Io(e.to_string())
        } else {
            CliError::Validation(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn io_context<T>(path: &Path, r: std::io::Result<T>) -> CliResult<T> {
    r.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: topoloss::Result<T>) -> CliResult<T> {
    r.map_err(|e| match CliError::from(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        CliError::Validation(m) => CliError::Validation(format!("{}: {m}", path.display())),
    })
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = io_context(path, fs::read_to_string(path))?;
    serde_json::from_str(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    io_context(path, fs::write(path, contents))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_generate(a: &GenerateArgs) -> CliResult<()> {
    let mut cfg: GenerateConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => GenerateConfig::default(),
    };
    set(&mut cfg.seed, a.seed);
    a.circles.apply(&mut cfg.circles);
    let cloud = generate_nested_circles(&cfg.circles, cfg.seed)?;
    with_path(&a.out, cloud.write_csv_path(&a.out))
}

fn cmd_ph(a: &PhArgs) -> CliResult<()> {
    if a.max_dim > 1 {
        return Err(CliError::Validation(format!(
            "--max-dim must be 0 or 1, got {}",
            a.max_dim
        )));
    }
    let cloud = with_path(&a.input, PointCloud::read_csv_path(&a.input))?;
    let f = build_rips(&cloud, a.max_dim + 1, a.max_radius)?;
    let d = if a.max_dim == 0 {
        compute_persistence_dim0(&f)?
    } else {
        compute_persistence(&f, a.max_dim)?
    };
    emit(a.out.as_deref(), &(d.to_json_string()? + "\n"))
}

fn parse_q(s: &str) -> CliResult<f64> {
    let q = match s.to_ascii_lowercase().as_str() {
        "inf" | "infinity" => f64::INFINITY,
        other => other
            .parse::<f64>()
            .map_err(|_| CliError::Validation(format!("--q must be a number or inf, got {s}")))?,
    };
    if q.is_nan() || q < 1.0 {
        return Err(CliError::Validation(format!("--q must be at least 1, got {s}")));
    }
    Ok(q)
}

fn cmd_dist(a: &DistArgs) -> CliResult<()> {
    let q = parse_q(&a.q)?;
    let d1 = with_path(&a.a, PersistenceDiagram::read_json_path(&a.a))?.of_dim(a.dim);
    let d2 = with_path(&a.b, PersistenceDiagram::read_json_path(&a.b))?.of_dim(a.dim);
    let (distance, matching) = wasserstein(&d1, &d2, q)?;
    let report = json!({
        "q": if q.is_infinite() { "inf".to_string() } else { q.to_string() },
        "dim": a.dim,
        "distance": distance,
        "bottleneck": bottleneck(&d1, &d2)?,
        "matching": matching,
    });
    emit(a.out.as_deref(), &to_json(&report))
}

/// Config file, then flags.
fn resolve(a: &RunArgs) -> CliResult<RunConfig> {
    let mut cfg: RunConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => RunConfig::default(),
    };
    let e = &mut cfg.embed;
    set(&mut e.seed, a.seed);
    set(&mut e.epsilon, a.epsilon);
    set(&mut e.lambda_topo, a.lambda_topo);
    set(&mut e.lambda_reg, a.lambda_reg);
    set(&mut e.k, a.k);
    set(&mut e.perplexity, a.perplexity);
    set(&mut e.max_iters, a.max_iters);
    set(&mut e.hidden, a.hidden.clone());
    set(&mut e.truth_points, a.truth_points);
    set(&mut e.hom_dim, a.hom_dim);
    a.circles.apply(&mut e.data);
    if a.input.is_some() {
        cfg.input = a.input.clone();
    }
    if a.truth.is_some() {
        cfg.truth = a.truth.clone();
    }
    let theorem_flags = [a.ell0, a.ell1, a.ell2, a.c_x].iter().any(Option::is_some);
    match (a.eta, a.theorem) {
        (Some(_), true) => {
            return Err(CliError::Validation("--eta and --theorem are mutually exclusive".into()));
        }
        (Some(eta), false) => {
            if theorem_flags {
                return Err(CliError::Validation("theorem constants need --theorem".into()));
            }
            e.step = StepRule::Fixed(eta);
        }
        (None, true) => {
            let base = match e.step {
                StepRule::Theorem(c) => c,
                StepRule::Fixed(_) => TheoremConstants {
                    ell0: 1.0,
                    ell1: 1.0,
                    ell2: 1.0,
                    c_x: 10.0,
                    b: e.truth_points,
                    k: e.k,
                },
            };
            e.step = StepRule::Theorem(TheoremConstants {
                ell0: a.ell0.unwrap_or(base.ell0),
                ell1: a.ell1.unwrap_or(base.ell1),
                ell2: a.ell2.unwrap_or(base.ell2),
                c_x: a.c_x.unwrap_or(base.c_x),
                ..base
            });
        }
        (None, false) => {
            if theorem_flags {
                return Err(CliError::Validation("theorem constants need --theorem".into()));
            }
        }
    }
    Ok(cfg)
}

struct Inputs {
    x: Option<PointCloud>,
    truth: Option<GroundTruthDiagram>,
}

/// Loads user-supplied data and keeps the configuration consistent with it.
fn load_inputs(cfg: &mut RunConfig) -> CliResult<Inputs> {
    let x = match &cfg.input {
        Some(p) => Some(with_path(p, PointCloud::read_csv_path(p))?),
        None => None,
    };
    let truth = match &cfg.truth {
        Some(p) => {
            let file = io_context(p, fs::File::open(p))?;
            let t = with_path(p, GroundTruthDiagram::read_json(file, cfg.embed.hom_dim))?;
            cfg.embed.truth_points = t.len();
            Some(t)
        }
        None => None,
    };
    // B follows the ground truth actually used
    if let StepRule::Theorem(c) = &mut cfg.embed.step {
        c.b = cfg.embed.truth_points;
        c.k = cfg.embed.k;
    }
    Ok(Inputs { x, truth })
}

fn out_dir(a: &RunArgs) -> CliResult<PathBuf> {
    let dir = a
        .out
        .clone()
        .ok_or_else(|| CliError::Validation("--out <DIR> is required".into()))?;
    io_context(&dir, fs::create_dir_all(&dir))?;
    Ok(dir)
}

fn write_manifest(dir: &Path, command: &str, cfg: &RunConfig) -> CliResult<()> {
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
    };
    write_file(&dir.join("manifest.json"), to_json(&m))
}

fn loss_plot(rows: &[TraceRow]) -> String {
    plot::lines(
        "loss",
        &[
            ("G_t(W_t)", rows.iter().map(|r| r.g_t_wt).collect()),
            ("L_supv", rows.iter().map(|r| r.l_supv).collect()),
        ],
    )
}

fn groups(cfg: &RunConfig, n: usize) -> Vec<usize> {
    if cfg.input.is_some() {
        return vec![0; n];
    }
    (0..n).map(|i| usize::from(i >= cfg.embed.data.n_per_circle)).collect()
}

/// Writes the artifacts of one embedding run and returns its summary.
fn write_run(dir: &Path, command: &str, cfg: &RunConfig, out: &EmbedOutcome) -> CliResult<serde_json::Value> {
    write_manifest(dir, command, cfg)?;
    let rows = out.run.rows();
    let p = dir.join("trace.csv");
    with_path(&p, write_trace_path(&rows, &p))?;
    let p = dir.join("embedding.csv");
    with_path(&p, out.run.y.write_csv_path(&p))?;
    let p = dir.join("model.json");
    with_path(&p, out.network.save(&p))?;
    let p = dir.join("truth.json");
    with_path(&p, out.truth.to_diagram().write_json_path(&p))?;

    let report = check_trace(&rows, cfg.embed.epsilon)?;
    let (top_y, top_x) = (top_persistence(&out.run.y)?, top_persistence(&out.x)?);
    let last = out.run.trace.last().expect("at least one iteration");
    let summary = json!({
        "stop": out.run.stop,
        "iterations": out.run.iterations(),
        "eta": out.run.eta,
        "perplexity": out.perplexity,
        "final": last.fresh_next,
        "top_persistence_y": top_y,
        "top_persistence_x": top_x,
        "persistence_ratio": top_y / top_x,
        "trace_checks": report,
    });
    write_file(&dir.join("summary.json"), to_json(&summary))?;

    // plots are drawn from the values already written
    if out.run.y.dim() == 2 {
        let pts: Vec<(f64, f64)> = out.run.y.points().map(|p| (p[0], p[1])).collect();
        write_file(
            &dir.join("embedding.svg"),
            plot::scatter("embedding", &pts, &groups(cfg, pts.len())),
        )?;
    }
    write_file(&dir.join("loss.svg"), loss_plot(&rows))?;
    Ok(summary)
}

fn cmd_embed(a: &RunArgs) -> CliResult<()> {
    let mut cfg = resolve(a)?;
    let dir = out_dir(a)?;
    let inputs = load_inputs(&mut cfg)?;
    let out = run_embedding(&cfg.embed, inputs.x, inputs.truth)?;
    let summary = write_run(&dir, "embed", &cfg, &out)?;
    print!("{}", to_json(&summary));
    Ok(())
}

fn print_trace_table(rows: &[TraceRow]) {
    println!("{:>6} {:>14} {:>14} {:>14}", "t", "G_t(W_t)", "G_t(W_t+1)", "G_t+1(W_t+1)");
    let shown: Vec<&TraceRow> = if rows.len() <= 12 {
        rows.iter().collect()
    } else {
        rows[..6].iter().chain(&rows[rows.len() - 6..]).collect()
    };
    for r in shown {
        println!("{:>6} {:>14.8} {:>14.8} {:>14.8}", r.t, r.g_t_wt, r.g_t_wt1, r.g_t1_wt1);
    }
}

fn cmd_trace(a: &TraceArgs) -> CliResult<()> {
    if let Some(path) = &a.from {
        let cfg = resolve(&a.run)?;
        let rows = with_path(path, read_trace_path(path))?;
        let report = check_trace(&rows, cfg.embed.epsilon)?;
        print_trace_table(&rows);
        let text = to_json(&report);
        match &a.run.out {
            Some(dir) => {
                io_context(dir, fs::create_dir_all(dir))?;
                write_file(&dir.join("report.json"), &text)?;
                write_file(&dir.join("loss.svg"), loss_plot(&rows))?;
            }
            None => print!("{text}"),
        }
        return Ok(());
    }
    let mut cfg = resolve(&a.run)?;
    let dir = out_dir(&a.run)?;
    let inputs = load_inputs(&mut cfg)?;
    let out = run_embedding(&cfg.embed, inputs.x, inputs.truth)?;
    write_run(&dir, "trace", &cfg, &out)?;
    let rows = out.run.rows();
    let report = check_trace(&rows, cfg.embed.epsilon)?;
    write_file(&dir.join("report.json"), to_json(&report))?;
    print_trace_table(&rows);
    for c in &report.checks {
        println!(
            "{:<20} {}{}",
            c.name,
            if c.passed { "pass" } else { "FAIL" },
            c.first_violation.map(|t| format!(" (first at t={t})")).unwrap_or_default()
        );
    }
    Ok(())
}

fn parse_grid(cells: &[String]) -> CliResult<Vec<(f64, f64)>> {
    cells
        .iter()
        .map(|c| {
            let bad = || CliError::Validation(format!("grid cell {c:?} is not lambda_topo:lambda_reg"));
            let (t, r) = c.split_once(':').ok_or_else(bad)?;
            Ok((t.trim().parse().map_err(|_| bad())?, r.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

fn cell_name(lt: f64, lr: f64) -> String {
    format!("cell_{lt}_{lr}")
}

fn cmd_sweep(a: &SweepArgs) -> CliResult<()> {
    if a.run.lambda_topo.is_some() || a.run.lambda_reg.is_some() {
        return Err(CliError::Validation("sweep takes its weights from --grid".into()));
    }
    let mut cfg = resolve(&a.run)?;
    if let Some(g) = &a.grid {
        cfg.grid = Some(parse_grid(g)?);
    }
    let grid = cfg.grid.clone().unwrap_or_else(|| SWEEP_GRID.to_vec());
    if grid.is_empty() {
        return Err(CliError::Validation("sweep grid is empty".into()));
    }
    let dir = out_dir(&a.run)?;
    let inputs = load_inputs(&mut cfg)?;
    cfg.grid = Some(grid.clone());
    write_manifest(&dir, "sweep", &cfg)?;
    let results = run_sweep(&cfg.embed, &grid, inputs.x, inputs.truth)?;

    let mut summary = csv::Writer::from_writer(Vec::new());
    let header = [
        "lambda_topo",
        "lambda_reg",
        "dir",
        "stop",
        "iterations",
        "G",
        "L_supv",
        "L_topo",
        "L_reg",
        "top_persistence_y",
        "top_persistence_x",
        "persistence_ratio",
        "descent",
        "refresh",
        "sufficient_decrease",
    ];
    summary.write_record(header).expect("in-memory csv");
    let mut first_error = None;
    for (lt, lr, result) in results {
        let out = match result {
            Ok(out) => out,
            Err(e) => {
                eprintln!("cell ({lt}, {lr}) failed: {e}");
                first_error.get_or_insert(CliError::from(e));
                continue;
            }
        };
        let name = cell_name(lt, lr);
        let cell_dir = dir.join(&name);
        io_context(&cell_dir, fs::create_dir_all(&cell_dir))?;
        let cell_cfg = RunConfig {
            embed: cfg.embed.with_lambdas(lt, lr),
            grid: None,
            ..cfg.clone()
        };
        let s = write_run(&cell_dir, "embed", &cell_cfg, &out)?;
        let check = |name: &str| {
            s["trace_checks"]["checks"]
                .as_array()
                .and_then(|cs| cs.iter().find(|c| c["name"] == name))
                .map(|c| if c["passed"] == true { "pass" } else { "fail" })
                .unwrap_or("")
                .to_string()
        };
        let f = &s["final"];
        summary
            .write_record([
                lt.to_string(),
                lr.to_string(),
                name,
                s["stop"].as_str().unwrap_or("").to_string(),
                s["iterations"].to_string(),
                f["g"].to_string(),
                f["l_supv"].to_string(),
                f["l_topo"].to_string(),
                f["l_reg"].to_string(),
                s["top_persistence_y"].to_string(),
                s["top_persistence_x"].to_string(),
                s["persistence_ratio"].to_string(),
                check("descent"),
                check("refresh"),
                check("sufficient_decrease"),
            ])
            .expect("in-memory csv");
    }
    let bytes = summary.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&dir.join("summary.csv"), &bytes)?;
    print!("{}", String::from_utf8_lossy(&bytes));
    match first_error {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Ph(a) => cmd_ph(a),
        Command::Dist(a) => cmd_dist(a),
        Command::Embed(a) => cmd_embed(a),
        Command::Trace(a) => cmd_trace(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
