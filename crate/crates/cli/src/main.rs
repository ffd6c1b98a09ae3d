use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use wlanloc::evaluate::{cross_validate, evaluate_methods, tuning_grid, CvMode, EvalConfig, Estimator};
use wlanloc::io::{read_measurements_file, read_radio_map, read_truth, write_measurements, write_radio_map, write_truth};
use wlanloc::localize::Beta;
use wlanloc::simulate::{generate_survey, generate_test_set, EnvironmentSpec, OutlierSpec};
use wlanloc::{localize, train, LocalizeOptions, Method, RawRadioMap, TrainedModel, Tuning};

#[derive(Parser)]
#[command(name = "wlanloc", version, about = "WLAN fingerprint localization by sparse recovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic radio map, and optionally a test set of fixes.
    Simulate(SimulateArgs),
    /// Build a model (averaged map, reliability, clusters) from a radio map.
    Train(TrainArgs),
    /// Print a model's clusters as JSON.
    Cluster(ClusterArgs),
    /// Estimate one position per measurement row, as JSON lines.
    Localize(LocalizeArgs),
    /// Compare methods on a test set with known positions.
    Evaluate(EvaluateArgs),
    /// Cross-validate lambda, alpha and mu over a grid.
    Cv(CvArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Radio map output (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Number of online fixes to generate.
    #[arg(long, default_value_t = 0)]
    fixes: usize,
    #[arg(long, requires = "fixes")]
    fixes_out: Option<PathBuf>,
    #[arg(long, requires = "fixes")]
    truth_out: Option<PathBuf>,
    /// 1-based APs to bias in every generated fix.
    #[arg(long, value_delimiter = ',')]
    outlier_aps: Vec<usize>,
    /// Bias added to the outlier APs, in dB.
    #[arg(long, default_value_t = 30.0)]
    outlier_bias: f64,
    /// Survey samples per RP and orientation.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Reliability threshold in dBm; defaults to the value stored in the map.
    #[arg(long, allow_hyphen_values = true)]
    gamma: Option<f64>,
    /// Fraction of agreeing reliability bits for cluster membership.
    #[arg(long)]
    eta_fraction: Option<f64>,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    model: PathBuf,
    /// Write the clusters to this file instead of standard output.
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct TuningArgs {
    #[arg(long, default_value_t = 0.1)]
    lambda: f64,
    #[arg(long, default_value_t = 0.95)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    /// Number of APs kept by Fisher selection.
    #[arg(long, visible_alias = "aps", default_value_t = wlanloc::apselect::DEFAULT_SELECTED_APS)]
    num_aps: usize,
    /// Absolute coefficient threshold; by default 0.2 of the largest coefficient.
    #[arg(long)]
    beta: Option<f64>,
}

impl TuningArgs {
    fn tuning(&self) -> Tuning {
        Tuning {
            lambda: self.lambda,
            alpha: self.alpha,
            mu: self.mu,
        }
    }

    fn options(&self) -> LocalizeOptions {
        LocalizeOptions {
            num_aps: self.num_aps,
            beta: self.beta.map_or_else(Beta::default, Beta::Absolute),
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct LocalizeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    measurements: PathBuf,
    #[arg(long, default_value = "lasso")]
    method: String,
    #[command(flatten)]
    tuning: TuningArgs,
    /// Include the chosen clusters per orientation and echo them to stderr.
    #[arg(long)]
    trace: bool,
    /// Output file; standard output by default.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    measurements: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "lasso,glmnet,cs,wknn,kde")]
    methods: Vec<String>,
    #[command(flatten)]
    tuning: TuningArgs,
    /// Neighbours used by WKNN.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Add a mean time per fix column (not reproducible between runs).
    #[arg(long)]
    timing: bool,
    /// Report CSV; standard output by default.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-method error CDF as CSV.
    #[arg(long)]
    cdf_out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Residual,
    Position,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    measurements: PathBuf,
    /// Needed for position mode.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, default_value = "lasso")]
    method: String,
    #[arg(long, value_delimiter = ',', default_value = "0.0001,0.001,0.01,0.1,1,10")]
    lambdas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.95")]
    alphas: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    mus: Vec<f64>,
    #[arg(long, default_value_t = 2)]
    folds: usize,
    #[arg(long, value_enum, default_value = "residual")]
    mode: ModeArg,
    #[arg(long, visible_alias = "aps", default_value_t = wlanloc::apselect::DEFAULT_SELECTED_APS)]
    num_aps: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Data(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Train(a) => train_cmd(a),
        Command::Cluster(a) => cluster(a),
        Command::Localize(a) => localize_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Cv(a) => cv(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load_model(path: &Path) -> anyhow::Result<TrainedModel> {
    TrainedModel::load(path).with_context(|| format!("reading model {}", path.display()))
}

fn load_fixes(path: &Path, model: &TrainedModel) -> anyhow::Result<Vec<wlanloc::OnlineMeasurement>> {
    let fixes = read_measurements_file(path, model.config.missing_sentinel)
        .with_context(|| format!("reading measurements {}", path.display()))?;
    anyhow::ensure!(!fixes.is_empty(), "{} contains no measurements", path.display());
    Ok(fixes)
}

fn load_truth(path: &Path) -> anyhow::Result<Vec<(f64, f64)>> {
    let f = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_truth(io::BufReader::new(f)).with_context(|| format!("reading truth {}", path.display()))
}

fn parse_method(s: &str) -> Result<Method, Failure> {
    s.parse().map_err(|_| usage(format!("unknown method {s:?}")))
}

fn simulate(a: SimulateArgs) -> Outcome {
    let mut env = EnvironmentSpec {
        seed: a.seed,
        ..Default::default()
    };
    if let Some(m) = a.samples {
        env.samples_per_rp = m;
    }
    if a.outlier_aps.iter().any(|&i| i == 0 || i > env.num_aps()) {
        return Err(usage(format!("--outlier-aps must lie in 1..={}", env.num_aps())));
    }
    if a.fixes == 0 && (a.fixes_out.is_some() || a.truth_out.is_some()) {
        return Err(usage("--fixes-out and --truth-out need --fixes > 0"));
    }
    eprintln!(
        "simulating {} RPs x {} orientations x {} samples, {} APs",
        env.num_rps(),
        env.orientations.len(),
        env.samples_per_rp,
        env.num_aps()
    );
    let survey = generate_survey(&env).context("generating survey")?;
    write_radio_map(&survey.map, &a.out).with_context(|| format!("writing {}", a.out.display()))?;

    if a.fixes > 0 {
        let aps: Vec<usize> = a.outlier_aps.iter().map(|i| i - 1).collect();
        let outliers = if aps.is_empty() {
            OutlierSpec::none()
        } else {
            OutlierSpec::bias(aps, a.outlier_bias)
        };
        // the test set gets its own seed derived from the single --seed
        let set = generate_test_set(&env, a.fixes, &outliers, a.seed.wrapping_add(1))
            .context("generating test set")?;
        let fixes: Vec<_> = set.iter().map(|s| s.0.clone()).collect();
        let truth: Vec<_> = set.iter().map(|s| s.1.position).collect();
        eprintln!("generated {} fixes", fixes.len());
        write_measurements(output(a.fixes_out.as_deref())?, &fixes, env.missing_sentinel)
            .context("writing measurements")?;
        if let Some(p) = &a.truth_out {
            write_truth(create(p)?, &truth).context("writing truth")?;
        }
    }
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Outcome {
    let raw = read_radio_map(&a.map).with_context(|| format!("reading radio map {}", a.map.display()))?;
    let raw = if a.gamma.is_some() || a.eta_fraction.is_some() {
        let mut cfg = raw.config().clone();
        if let Some(g) = a.gamma {
            cfg.reliability_threshold = g;
        }
        if let Some(e) = a.eta_fraction {
            cfg.cluster_threshold = e;
        }
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        RawRadioMap::new(cfg, raw.rps().to_vec(), raw.samples().to_vec()).context("rebuilding map")?
    } else {
        raw
    };
    let model = train(&raw).context("training")?;
    for (o, set) in model.clusters.iter().enumerate() {
        eprintln!("orientation {}: {} clusters", model.config.orientations[o], set.len());
    }
    model.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn cluster(a: ClusterArgs) -> Outcome {
    let model = load_model(&a.model)?;
    let id = |j: usize| model.rps[j].id;
    // RP ids as stored in the map rather than internal indices
    let dump: Vec<_> = model
        .clusters
        .iter()
        .map(|set| {
            let clusters: Vec<_> = set
                .clusters
                .iter()
                .map(|c| {
                    json!({
                        "seed": id(c.seed),
                        "head": id(c.head),
                        "members": c.members.iter().map(|&j| id(j)).collect::<Vec<_>>(),
                    })
                })
                .collect();
            json!({
                "orientation": model.config.orientations[set.orientation],
                "max_hamming": set.max_hamming,
                "clusters": clusters,
            })
        })
        .collect();
    let mut w = output(a.dump.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &dump).context("writing clusters")?;
    writeln!(w).context("writing clusters")?;
    w.flush().context("writing clusters")?;
    Ok(())
}

fn localize_cmd(a: LocalizeArgs) -> Outcome {
    let method = parse_method(&a.method)?;
    let tuning = a.tuning.tuning();
    tuning.validate().map_err(|e| usage(e.to_string()))?;
    let opts = a.tuning.options();
    let model = load_model(&a.model)?;
    let fixes = load_fixes(&a.measurements, &model)?;
    let mut w = output(a.out.as_deref())?;
    for (k, y) in fixes.iter().enumerate() {
        let mut est = localize(y, &model, method, &tuning, &opts)
            .with_context(|| format!("measurement row {}", k + 1))?;
        if a.trace {
            for t in &est.diagnostics.roi {
                // cluster numbers index the `cluster` dump for that orientation
                eprintln!(
                    "fix {} orientation {}: winner cluster {} (distance {}), included {:?}",
                    k + 1,
                    model.config.orientations[t.orientation],
                    t.winner,
                    t.winner_distance,
                    t.included
                );
            }
        } else {
            est.diagnostics.roi.clear();
        }
        serde_json::to_writer(&mut w, &est).context("writing estimate")?;
        writeln!(w).context("writing estimate")?;
    }
    w.flush().context("writing estimates")?;
    eprintln!("localized {} fixes with {}", fixes.len(), method);
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Outcome {
    let methods = a
        .methods
        .iter()
        .map(|m| m.parse::<Estimator>().map_err(|_| usage(format!("unknown method {m:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = EvalConfig {
        tuning: a.tuning.tuning(),
        localize: a.tuning.options(),
        baseline: wlanloc::baselines::BaselineConfig {
            k: a.k,
            ..Default::default()
        },
    };
    cfg.tuning.validate().map_err(|e| usage(e.to_string()))?;
    let model = load_model(&a.model)?;
    let fixes = load_fixes(&a.measurements, &model)?;
    let truth = load_truth(&a.truth)?;
    eprintln!("evaluating {} methods on {} fixes", methods.len(), fixes.len());
    let report = evaluate_methods(&model, &fixes, &truth, &methods, &cfg).context("evaluating")?;
    report
        .write_csv(output(a.out.as_deref())?, a.timing)
        .context("writing report")?;
    if let Some(p) = &a.cdf_out {
        report.write_cdf_csv(create(p)?).context("writing cdf")?;
    }
    Ok(())
}

fn cv(a: CvArgs) -> Outcome {
    let method = parse_method(&a.method)?;
    if a.folds < 2 {
        return Err(usage("--folds must be at least 2"));
    }
    let mode = match a.mode {
        ModeArg::Residual => CvMode::Residual,
        ModeArg::Position => CvMode::PositionError,
    };
    if matches!(mode, CvMode::PositionError) && a.truth.is_none() {
        return Err(usage("--mode position needs --truth"));
    }
    let grid = tuning_grid(&a.lambdas, &a.alphas, &a.mus);
    for t in &grid {
        t.validate().map_err(|e| usage(e.to_string()))?;
    }
    let model = load_model(&a.model)?;
    let fixes = load_fixes(&a.measurements, &model)?;
    let truth = a.truth.as_deref().map(load_truth).transpose()?;
    let opts = LocalizeOptions {
        num_aps: a.num_aps,
        ..Default::default()
    };
    eprintln!("cross-validating {} over {} settings, {} folds", method, grid.len(), a.folds);
    let result = cross_validate(&model, &fixes, truth.as_deref(), method, &grid, a.folds, mode, &opts)
        .context("cross-validation")?;
    eprintln!(
        "best: lambda {} alpha {} mu {}",
        result.best.lambda, result.best.alpha, result.best.mu
    );
    result
        .write_csv(output(a.out.as_deref())?)
        .context("writing cv result")?;
    Ok(())
}
