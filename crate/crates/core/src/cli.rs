//! Command line runner. Every subcommand writes its tables and reports into
//! `--out` and returns exit code 0 when all certified bounds hold, 1 when one
//! is violated and 2 on usage or input errors.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::checks::{all_hold, failures, Check};
use crate::error::Error;
use crate::grid::WeightGrid;
use crate::lipschitz_approx::{
    approximant_bounds, build_vector_approximant, estimate_lipschitz, mcshane_extend, sup_grid_error, InputNorm,
    LipschitzMode, LipschitzSample,
};
use crate::measures::{metric_entropy_bound, rng_from_seed, DiscreteMeasure, UniformMixture, RNG_NAME};
use crate::pwl::network_to_pwl;
use crate::rectifiable::{
    bit_count, bit_count_countable, build_pipeline, check_kappa_monotone, class_constant, midpoint_measure,
    quarter_circle, quarter_circle_target, scaling_exponent, Kappa, PipelineCertificate, RectifiablePiece,
};
use crate::scalar::{rational_to_f64, Rational};
use crate::spike::{partition_sum, spike_bounds, spike_lipschitz_check, spike_network, spike_value};
use crate::transport::{
    build_transport_network, cell_mass_check, sigma_log2_count, sigma_log2_count_bound, w1_certificate, CellMassMethod,
};
use crate::wasserstein::{SolverOptions, DEFAULT_MAX_ATOMS};

/// Version stamped into every JSON report.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(
    name = "rectiflow",
    version,
    about = "Build and certify explicit ReLU network constructions"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct GlobalOpts {
    /// JSON file whose keys override the command line flags.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Omit the timestamp line from CSV outputs.
    #[arg(long, global = true)]
    pub reproducible: bool,
    /// Size of the worker pool (defaults to the number of cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Spike network metrics, exactness and partition of unity.
    Spike(SpikeArgs),
    /// Quantized approximant of a sampled Lipschitz function.
    ApproxFn(ApproxArgs),
    /// Space-filling transport network for a quantized uniform mixture.
    Transport(TransportArgs),
    /// End-to-end generator sweep for a rectifiable target.
    Pipeline(PipelineArgs),
    /// Bit counts b(ε) and their fitted scaling exponent.
    Bits(BitsArgs),
    /// Covering-number and candidate-count calculators.
    Entropy(EntropyArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Spike(_) => "spike",
            Command::ApproxFn(_) => "approx-fn",
            Command::Transport(_) => "transport",
            Command::Pipeline(_) => "pipeline",
            Command::Bits(_) => "bits",
            Command::Entropy(_) => "entropy",
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct SpikeArgs {
    #[arg(long)]
    pub m: usize,
    /// Resolution used for the partition-of-unity probe.
    #[arg(long, default_value_t = 4)]
    pub n: u32,
    #[arg(long, default_value_t = 10_000)]
    pub probes: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct ApproxArgs {
    /// CSV with columns x1..xm followed by the value column(s).
    #[arg(long)]
    pub sample: PathBuf,
    /// JSON sidecar with `lip`, `sup_norm` and optionally `input_dim`.
    #[arg(long)]
    pub meta: PathBuf,
    #[arg(long)]
    pub n: u64,
    /// Cells per axis of the evaluation grid.
    #[arg(long, default_value_t = 256)]
    pub cells: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MassMethodArg {
    Auto,
    Exact,
    MonteCarlo,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct TransportArgs {
    /// Mixture JSON `{"d","K","weights":{"k1,..,kd":"p/q"},"N"}`.
    #[arg(long)]
    pub mixture: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub s: u32,
    /// Midpoint atoms of the push-forward in the W₁ check.
    #[arg(long, default_value_t = 4000)]
    pub atoms: usize,
    /// Atoms per mixture cell in the W₁ check.
    #[arg(long, default_value_t = 64)]
    pub points_per_cell: usize,
    #[arg(long, value_enum, default_value_t = MassMethodArg::Auto)]
    pub method: MassMethodArg,
    /// Sample count of the Monte Carlo cell-mass check.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ATOMS)]
    pub max_atoms: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetArg {
    /// Arc-length measure on the quarter circle in ℝ².
    QuarterCircle,
    /// Sampled map with user supplied parameter and target measures.
    Sample,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct PipelineArgs {
    #[arg(long, value_enum, default_value_t = TargetArg::QuarterCircle)]
    pub target: TargetArg,
    /// Sample CSV of `f` (target `sample`).
    #[arg(long)]
    pub sample: Option<PathBuf>,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Parameter measure on `[0,1]^m` as `x1..xm,mass` CSV (target `sample`).
    #[arg(long)]
    pub mu: Option<PathBuf>,
    /// Discretized target measure as `y1..yn,mass` CSV; W₁ is measured when set.
    #[arg(long)]
    pub nu: Option<PathBuf>,
    /// Bound on the W₁ distance between `--nu` and the true target.
    #[arg(long, default_value_t = 0.0)]
    pub nu_slack: f64,
    /// Resolutions N of the sweep.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32")]
    pub n_grid: Vec<u64>,
    /// Accuracies ε; when set they replace `--n-grid` by `N = ⌈C/ε⌉`.
    #[arg(long, value_delimiter = ',')]
    pub eps_grid: Option<Vec<f64>>,
    /// Midpoint atoms of `Ψ#λ` and of the built-in target.
    #[arg(long, default_value_t = 2000)]
    pub atoms: usize,
    /// Atoms of the built-in parameter measure.
    #[arg(long, default_value_t = 1920)]
    pub mu_atoms: usize,
    /// Sample points of the built-in arc.
    #[arg(long, default_value_t = 3200)]
    pub arc_samples: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ATOMS)]
    pub max_atoms: usize,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct BitsArgs {
    #[arg(long)]
    pub m: u32,
    #[arg(long)]
    pub n: u32,
    #[arg(long)]
    pub c: f64,
    /// Explicit ε values; otherwise a log grid from `--eps-lo` to `--eps-hi`.
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-3)]
    pub eps_lo: f64,
    #[arg(long, default_value_t = 1e-1)]
    pub eps_hi: f64,
    #[arg(long, default_value_t = 41)]
    pub count: usize,
    /// `none`, `exp`, or `poly:k`.
    #[arg(long, default_value = "none")]
    pub kappa: String,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
pub struct EntropyArgs {
    #[arg(long)]
    pub d: u32,
    #[arg(long, value_delimiter = ',', default_value = "0.5,0.25,0.125,0.0625")]
    pub eps: Vec<f64>,
    /// Mixture resolutions K for the candidate counts of Σ.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
    pub k: Vec<usize>,
}

/// How a run ended.
#[derive(Debug)]
pub enum Failure {
    /// Bad flags, config, or inputs.
    Usage(String),
    /// A certified bound failed; the strings name the checks.
    Violated(Vec<String>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Violated(names)) => {
            for n in names {
                eprintln!("bound violated: {n}");
            }
            1
        }
    }
}

fn execute(cli: Cli) -> CliResult<()> {
    let Cli {
        mut global,
        mut command,
    } = cli;
    if let Some(path) = global.config.clone() {
        let text =
            fs::read(&path).map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: Value = serde_json::from_slice(&text)?;
        let Value::Object(cfg) = cfg else {
            return Err(Failure::Usage("config must be a JSON object".into()));
        };
        apply_config(&mut global, &mut command, cfg)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(global.workers.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Usage(format!("cannot start worker pool: {e}")))?;
    fs::create_dir_all(&global.out)?;
    pool.install(|| match &command {
        Command::Spike(a) => cmd_spike(&global, a),
        Command::ApproxFn(a) => cmd_approx_fn(&global, a),
        Command::Transport(a) => cmd_transport(&global, a),
        Command::Pipeline(a) => cmd_pipeline(&global, a),
        Command::Bits(a) => cmd_bits(&global, a),
        Command::Entropy(a) => cmd_entropy(&global, a),
    })
}

fn overlay<T: Serialize + DeserializeOwned>(
    base: &T,
    cfg: &Map<String, Value>,
    used: &mut Vec<String>,
) -> CliResult<T> {
    let Value::Object(mut fields) = serde_json::to_value(base)? else {
        unreachable!("argument structs serialize to objects")
    };
    for (k, v) in cfg {
        let key = k.replace('-', "_");
        if fields.contains_key(&key) {
            fields.insert(key, v.clone());
            used.push(k.clone());
        }
    }
    serde_json::from_value(Value::Object(fields)).map_err(|e| Failure::Usage(format!("config: {e}")))
}

fn apply_config(global: &mut GlobalOpts, command: &mut Command, cfg: Map<String, Value>) -> CliResult<()> {
    if let Some(c) = cfg.get("command") {
        if c.as_str() != Some(command.name()) {
            return Err(Failure::Usage(format!(
                "config is for command {c}, not {}",
                command.name()
            )));
        }
    }
    let mut used = vec!["command".to_string()];
    let config = global.config.take();
    *global = overlay(global, &cfg, &mut used)?;
    global.config = config;
    match command {
        Command::Spike(a) => *a = overlay(a, &cfg, &mut used)?,
        Command::ApproxFn(a) => *a = overlay(a, &cfg, &mut used)?,
        Command::Transport(a) => *a = overlay(a, &cfg, &mut used)?,
        Command::Pipeline(a) => *a = overlay(a, &cfg, &mut used)?,
        Command::Bits(a) => *a = overlay(a, &cfg, &mut used)?,
        Command::Entropy(a) => *a = overlay(a, &cfg, &mut used)?,
    }
    if let Some(unknown) = cfg.keys().find(|k| !used.contains(k)) {
        return Err(Failure::Usage(format!("unknown config key {unknown:?}")));
    }
    Ok(())
}

fn write_json(path: &Path, value: &Value) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    fs::write(path, bytes)?;
    Ok(())
}

/// Writes CSV rows, preceded by a `# generated_at_unix=` line unless the run
/// is reproducible.
fn write_csv(global: &GlobalOpts, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<PathBuf> {
    let path = global.out.join(name);
    let mut bytes = Vec::new();
    if !global.reproducible {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        bytes.extend(format!("# generated_at_unix={now}\n").as_bytes());
    }
    {
        let mut w = csv::Writer::from_writer(&mut bytes);
        w.write_record(header).map_err(Error::from)?;
        for r in rows {
            w.write_record(r).map_err(Error::from)?;
        }
        w.flush()?;
    }
    fs::write(&path, bytes)?;
    Ok(path)
}

fn report(global: &GlobalOpts, name: &str, command: &str, body: Value, checks: &[Check]) -> CliResult<()> {
    let mut obj = Map::new();
    obj.insert("schema_version".into(), json!(REPORT_SCHEMA_VERSION));
    obj.insert("command".into(), json!(command));
    obj.insert("seed".into(), json!(global.seed));
    obj.insert("rng".into(), json!(RNG_NAME));
    if let Value::Object(b) = body {
        obj.extend(b);
    }
    obj.insert("checks".into(), serde_json::to_value(checks)?);
    obj.insert("holds".into(), json!(all_hold(checks)));
    write_json(&global.out.join(name), &Value::Object(obj))?;
    for c in checks {
        println!(
            "{:<40} {:>14} {} {:<14} {}",
            c.name,
            fmt_num(c.value),
            c.relation,
            fmt_num(c.bound),
            if c.holds { "ok" } else { "VIOLATED" }
        );
    }
    if all_hold(checks) {
        Ok(())
    } else {
        Err(Failure::Violated(failures(checks)))
    }
}

fn fmt_num(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{v}")
    } else {
        format!("{v:.6e}")
    }
}

fn rationals(ws: &[Rational]) -> Vec<String> {
    ws.iter().map(|w| w.to_string()).collect()
}

fn cmd_spike(global: &GlobalOpts, a: &SpikeArgs) -> CliResult<()> {
    let spike = spike_network(a.m)?;
    if a.n == 0 {
        return Err(Failure::Usage("--n must be at least 1".into()));
    }
    let metrics = spike.net.metrics();
    let (depth_bound, conn_bound, width_bound) = spike_bounds(a.m);
    let grid = WeightGrid::F { n: 1 };
    let net = spike.net.to_f64();
    let mut rng = rng_from_seed(global.seed);
    let points: Vec<Vec<f64>> = (0..a.probes)
        .map(|_| (0..a.m).map(|_| rng.gen_range(-2.0..=2.0)).collect())
        .collect();
    let eval_err = points
        .par_iter()
        .map(|x| (net.evaluate(x).expect("dimension fixed")[0] - spike_value(x)).abs())
        .reduce(|| 0.0, f64::max);
    let partition_dev = points
        .par_iter()
        .map(|x| (partition_sum(x, a.n) - 1.0).abs())
        .reduce(|| 0.0, f64::max);
    let lip = spike_lipschitz_check(a.m, a.probes, global.seed);
    let checks = vec![
        Check::le("depth", metrics.depth as f64, depth_bound as f64),
        Check::le("connectivity", metrics.connectivity as f64, conn_bound as f64),
        Check::le("width", metrics.width as f64, width_bound as f64),
        Check::eq(
            "weights outside {0,±1}",
            grid.violations(&metrics.weight_set).len() as f64,
            0.0,
        ),
        Check::le("max |net - closed form|", eval_err, 1e-12),
        Check::le("max partition deviation", partition_dev, 1e-12),
        Check::le("sampled lipschitz", lip, 2.0 + 1e-9),
    ];
    let body = json!({
        "m": a.m,
        "N": a.n,
        "probes": a.probes,
        "metrics": {
            "depth": metrics.depth,
            "connectivity": metrics.connectivity,
            "width": metrics.width,
            "weight_set": rationals(&metrics.weight_set),
            "magnitude": metrics.magnitude.to_string(),
        },
    });
    report(global, "spike_report.json", "spike", body, &checks)
}

fn cmd_approx_fn(global: &GlobalOpts, a: &ApproxArgs) -> CliResult<()> {
    let sample = LipschitzSample::load(&a.sample, &a.meta)?;
    let approx = build_vector_approximant(&sample, a.n)?;
    let (m, n_res) = (sample.input_dim(), a.n);
    let cells = a.cells.max(1);
    let bounds = approximant_bounds(m, n_res);
    let grid = WeightGrid::F { n: n_res };
    let err_bound = (sample.lip() + 0.5) / n_res as f64;
    let mut checks = Vec::new();
    let mut errors = Vec::new();
    for (c, q) in approx.coordinates.iter().enumerate() {
        let err = sup_grid_error(q, |x| mcshane_extend(&sample, x).expect("dimension fixed")[c], cells);
        errors.push(err);
        checks.push(Check::le(format!("coordinate {c}: sup error"), err, err_bound + 1e-9));
        let metrics = q.exact.metrics();
        checks.push(Check::le(
            format!("coordinate {c}: depth"),
            metrics.depth as f64,
            bounds.depth as f64,
        ));
        checks.push(Check::le(
            format!("coordinate {c}: connectivity"),
            metrics.connectivity as f64,
            bounds.connectivity as f64,
        ));
        checks.push(Check::le(
            format!("coordinate {c}: width"),
            metrics.width as f64,
            bounds.width as f64,
        ));
        checks.push(Check::eq(
            format!("coordinate {c}: weights outside {}", grid.describe()),
            grid.violations(&metrics.weight_set).len() as f64,
            0.0,
        ));
        if m == 1 {
            let pwl = &network_to_pwl(&q.exact)?[0];
            let lip = rational_to_f64(
                &pwl.lipschitz_on(&Rational::from_integer(0.into()), &Rational::from_integer(1.into())),
            );
            checks.push(Check::le(format!("coordinate {c}: lipschitz"), lip, sample.lip() + 1.0));
        } else {
            let mode = LipschitzMode::Sampled {
                resolution: cells.min(64),
                norm: InputNorm::Sup,
            };
            let lip = estimate_lipschitz(&q.net, &vec![0.0; m], &vec![1.0; m], mode)?;
            checks.push(Check::le(
                format!("coordinate {c}: sampled lipschitz"),
                lip,
                m as f64 * (sample.lip() + 1.0),
            ));
        }
    }
    let net_path = global.out.join("approx_net.json");
    fs::write(&net_path, approx.exact.to_json_bytes())?;
    let body = json!({
        "m": m,
        "outputs": sample.output_dim(),
        "N": n_res,
        "lip": sample.lip(),
        "sup_norm": sample.sup_norm(),
        "error_bound": err_bound,
        "sup_errors": errors,
        "grid_cells_per_axis": cells,
        "network": net_path.file_name().map(|s| s.to_string_lossy().into_owned()),
    });
    report(global, "approx_report.json", "approx-fn", body, &checks)
}

fn cmd_transport(global: &GlobalOpts, a: &TransportArgs) -> CliResult<()> {
    let text = fs::read(&a.mixture)?;
    let mix = UniformMixture::from_json(&serde_json::from_slice(&text)?)?;
    let tnet = build_transport_network(&mix, a.s)?;
    let bounds = tnet.bounds();
    println!("depth {} (bound {})", tnet.net.depth(), bounds.depth);
    let method = match a.method {
        MassMethodArg::Auto => CellMassMethod::default_for(tnet.d, global.seed),
        MassMethodArg::Exact => CellMassMethod::Exact,
        MassMethodArg::MonteCarlo => CellMassMethod::MonteCarlo {
            samples: a.samples,
            seed: global.seed,
        },
    };
    let cells = cell_mass_check(&tnet, method)?;
    let mut bytes = Vec::new();
    cells.write_csv(&mut bytes)?;
    let text = String::from_utf8(bytes).expect("csv output is utf-8");
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    write_csv(global, "transport_cells.csv", &header, &rows)?;
    let cert = w1_certificate(
        &tnet,
        a.atoms,
        a.points_per_cell,
        SolverOptions { max_atoms: a.max_atoms },
    )?;
    let mut checks = tnet.checks()?;
    checks.push(Check::decided(
        "cell masses",
        cells.max_abs_err,
        cells.rows.iter().map(|r| r.tolerance).fold(0.0, f64::max),
        "<=",
        cells.passed,
    ));
    checks.push(Check::le("w1", cert.measured, cert.bound + cert.slack));
    fs::write(global.out.join("transport_net.json"), tnet.net.to_json_bytes())?;
    let method_name = match method {
        CellMassMethod::Exact => "exact".to_string(),
        CellMassMethod::MonteCarlo { samples, .. } => format!("monte-carlo({samples})"),
    };
    let body = json!({
        "d": tnet.d,
        "K": tnet.k,
        "N": tnet.n,
        "s": tnet.s,
        "bounds": {
            "depth": bounds.depth,
            "connectivity": bounds.connectivity,
            "width": bounds.width,
            "magnitude": bounds.magnitude,
            "lipschitz": bounds.lipschitz,
        },
        "cell_masses": {
            "method": method_name,
            "side": cells.side,
            "total": cells.total,
            "max_abs_err": cells.max_abs_err,
            "passed": cells.passed,
        },
        "w1": serde_json::to_value(&cert)?,
    });
    report(global, "transport_report.json", "transport", body, &checks)
}

struct SweepPoint {
    eps: Option<f64>,
    n_res: u64,
}

fn cmd_pipeline(global: &GlobalOpts, a: &PipelineArgs) -> CliResult<()> {
    let opts = SolverOptions { max_atoms: a.max_atoms };
    let (piece, mu, nu): (RectifiablePiece, DiscreteMeasure, Option<(DiscreteMeasure, f64)>) = match a.target {
        TargetArg::QuarterCircle => {
            let target = quarter_circle_target(a.atoms)?;
            (
                quarter_circle(a.arc_samples)?,
                midpoint_measure(a.mu_atoms)?,
                Some((target.measure, target.slack)),
            )
        }
        TargetArg::Sample => {
            let (Some(s), Some(meta), Some(mu)) = (&a.sample, &a.meta, &a.mu) else {
                return Err(Failure::Usage("target sample needs --sample, --meta and --mu".into()));
            };
            let piece = RectifiablePiece::enclosing(LipschitzSample::load(s, meta)?)?;
            let nu = match &a.nu {
                Some(p) => Some((DiscreteMeasure::load_csv(p)?, a.nu_slack)),
                None => None,
            };
            (piece, DiscreteMeasure::load_csv(mu)?, nu)
        }
    };
    let m = piece.domain_dim();
    let c = class_constant(
        m,
        piece.domain_diameter(),
        piece.sample().lip(),
        piece.sample().sup_norm(),
    );
    let mut points: Vec<SweepPoint> = match &a.eps_grid {
        Some(grid) => {
            if grid.is_empty() || grid.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
                return Err(Failure::Usage("--eps-grid must be a nonempty subset of (0,1]".into()));
            }
            grid.iter()
                .map(|&e| SweepPoint {
                    eps: Some(e),
                    n_res: (c / e).ceil() as u64,
                })
                .collect()
        }
        None => {
            if a.n_grid.is_empty() || a.n_grid.contains(&0) {
                return Err(Failure::Usage("--n-grid must list positive resolutions".into()));
            }
            a.n_grid.iter().map(|&n| SweepPoint { eps: None, n_res: n }).collect()
        }
    };
    points.sort_by_key(|p| p.n_res);
    let certs: Vec<PipelineCertificate> = points
        .par_iter()
        .map(|p| -> CliResult<PipelineCertificate> {
            let mut pipe = build_pipeline(&piece, &mu, p.n_res)?;
            if let Some((nu, slack)) = &nu {
                pipe.certify_w1(nu, *slack, a.atoms, opts)?;
            }
            Ok(pipe.certificate)
        })
        .collect::<CliResult<_>>()?;
    let n_out = piece.output_dim() as u32;
    let mut rows = Vec::new();
    let mut eps_fit = Vec::new();
    let mut bits_fit = Vec::new();
    for (p, cert) in points.iter().zip(&certs) {
        let eps = p.eps.unwrap_or((c / p.n_res as f64).min(1.0));
        let bits = bit_count(m as u32, n_out, c, eps)?;
        eps_fit.push(eps);
        bits_fit.push(bits);
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        rows.push(vec![
            p.n_res.to_string(),
            eps.to_string(),
            cert.claimed_w1.to_string(),
            opt(cert.measured_w1),
            opt(cert.slack),
            cert.lipschitz.to_string(),
            cert.lipschitz_bound.to_string(),
            cert.depth.to_string(),
            cert.connectivity.to_string(),
            cert.width.to_string(),
            cert.magnitude.to_string(),
            bits.to_string(),
            cert.holds.to_string(),
        ]);
    }
    write_csv(
        global,
        "pipeline_sweep.csv",
        &[
            "N",
            "eps",
            "claimed_w1",
            "measured_w1",
            "slack",
            "lipschitz",
            "lipschitz_bound",
            "depth",
            "connectivity",
            "width",
            "magnitude",
            "bits",
            "holds",
        ],
        &rows,
    )?;
    let measured: Vec<f64> = certs.iter().filter_map(|c| c.measured_w1).collect();
    let non_increasing = measured.windows(2).all(|w| w[1] <= w[0]);
    let slope = if eps_fit.len() >= 2 && eps_fit.iter().any(|e| *e != eps_fit[0]) {
        Some(scaling_exponent(&eps_fit, &bits_fit)?)
    } else {
        None
    };
    let checks: Vec<Check> = points
        .iter()
        .zip(&certs)
        .flat_map(|(p, cert)| {
            cert.checks.iter().map(move |ch| Check {
                name: format!("N={}: {}", p.n_res, ch.name),
                ..ch.clone()
            })
        })
        .collect();
    let body = json!({
        "m": m,
        "n": n_out,
        "class_constant": c,
        "certificates": certs,
        "measured_non_increasing": non_increasing,
        "scaling_exponent": slope,
    });
    if let Some(s) = slope {
        println!("fitted exponent of b(ε): {s:.4} (m = {m})");
    }
    report(global, "pipeline_report.json", "pipeline", body, &checks)
}

fn parse_kappa(s: &str) -> CliResult<Option<Kappa>> {
    match s {
        "none" => Ok(None),
        "exp" => Ok(Some(Kappa::Exponential)),
        _ => {
            let k = s
                .strip_prefix("poly:")
                .and_then(|k| k.parse::<u32>().ok())
                .filter(|k| *k >= 1)
                .ok_or_else(|| Failure::Usage(format!("--kappa must be none, exp or poly:k with k ≥ 1, got {s:?}")))?;
            Ok(Some(Kappa::Polynomial(k)))
        }
    }
}

fn cmd_bits(global: &GlobalOpts, a: &BitsArgs) -> CliResult<()> {
    let grid = match &a.eps {
        Some(g) => g.clone(),
        None => crate::rectifiable::log_grid(a.eps_lo, a.eps_hi, a.count)?,
    };
    if grid.is_empty() {
        return Err(Failure::Usage("the ε grid is empty".into()));
    }
    let kappa = parse_kappa(&a.kappa)?;
    let bits: Vec<f64> = match kappa {
        None => grid
            .iter()
            .map(|&e| bit_count(a.m, a.n, a.c, e))
            .collect::<Result<_, _>>()?,
        Some(k) => {
            check_kappa_monotone(|e| k.eval(e), &grid)?;
            grid.iter()
                .map(|&e| bit_count_countable(a.m, a.n, a.c, |x| k.eval(x), e))
                .collect::<Result<_, _>>()?
        }
    };
    let rows: Vec<Vec<String>> = grid
        .iter()
        .zip(&bits)
        .map(|(e, b)| {
            let kv = kappa.map(|k| k.eval(*e).to_string()).unwrap_or_default();
            vec![e.to_string(), kv, b.to_string()]
        })
        .collect();
    write_csv(global, "bits.csv", &["eps", "kappa", "bits"], &rows)?;
    let slope = if grid.len() >= 2 {
        Some(scaling_exponent(&grid, &bits)?)
    } else {
        None
    };
    let nominal = kappa.map(|k| k.nominal_exponent(a.m)).unwrap_or(a.m as f64);
    if let Some(s) = slope {
        println!("fitted exponent {s:.4}, nominal {nominal}");
    }
    let body = json!({
        "m": a.m,
        "n": a.n,
        "C": a.c,
        "kappa": a.kappa,
        "points": grid.len(),
        "fitted_exponent": slope,
        "nominal_exponent": nominal,
    });
    report(global, "bits_report.json", "bits", body, &[])
}

fn cmd_entropy(global: &GlobalOpts, a: &EntropyArgs) -> CliResult<()> {
    if a.eps.is_empty() {
        return Err(Failure::Usage("--eps must not be empty".into()));
    }
    let rows: Vec<Vec<String>> = a
        .eps
        .iter()
        .map(|&e| {
            Ok(vec![
                a.d.to_string(),
                e.to_string(),
                metric_entropy_bound(a.d, e)?.to_string(),
            ])
        })
        .collect::<Result<_, Error>>()?;
    write_csv(global, "entropy.csv", &["d", "eps", "log2_covering_bound"], &rows)?;
    if a.k.iter().any(|k| *k < 2) {
        return Err(Failure::Usage("--k values must be at least 2".into()));
    }
    let sigma_rows: Vec<Vec<String>> =
        a.k.iter()
            .map(|&k| {
                vec![
                    a.d.to_string(),
                    k.to_string(),
                    sigma_log2_count(a.d as usize, k).to_string(),
                    sigma_log2_count_bound(a.d as usize, k).to_string(),
                ]
            })
            .collect();
    write_csv(
        global,
        "sigma_counts.csv",
        &["d", "K", "log2_count", "log2_count_bound"],
        &sigma_rows,
    )?;
    let checks: Vec<Check> =
        a.k.iter()
            .map(|&k| {
                Check::le(
                    format!("K={k}: log2 candidate count"),
                    sigma_log2_count(a.d as usize, k),
                    sigma_log2_count_bound(a.d as usize, k),
                )
            })
            .collect();
    report(global, "entropy_report.json", "entropy", json!({ "d": a.d }), &checks)
}
