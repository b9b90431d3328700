use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use prtree::io::{load_csv, load_model, read_records, save_model, write_matrix_csv, write_records, write_summary, ModelFile};
use prtree::simbench::{run_study, summarize, Method, StudyConfig};
use prtree::{fit, predict, ControlParams, Error, FillType, KernelFamily, KernelSpec, ProxyCrit};

#[derive(Parser)]
#[command(name = "prtree", version, about = "Probabilistic regression trees for data with missing covariates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a tree and write the model file.
    Fit(FitArgs),
    /// Predict with a saved model.
    Predict(PredictArgs),
    /// Run the Monte Carlo study and write one record per method and replication.
    Simulate(SimulateArgs),
    /// Summarize a records table by method, rho and metric.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    /// Name of the response column.
    #[arg(long)]
    response: String,
    #[arg(long)]
    cp: Option<f64>,
    #[arg(long)]
    n_min: Option<usize>,
    /// 0, 1 or 2.
    #[arg(long)]
    fill_type: Option<FillType>,
    /// mean, var or both (or 1, 2, 3).
    #[arg(long)]
    proxy_crit: Option<ProxyCrit>,
    #[arg(long)]
    n_candidates: Option<usize>,
    #[arg(long)]
    by_node: bool,
    /// norm, lnorm, t or gamma.
    #[arg(long)]
    dist: Option<KernelFamily>,
    /// Shape parameter of the kernel, if it has one.
    #[arg(long)]
    dist_par: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long)]
    max_terminal_nodes: Option<usize>,
    #[arg(long)]
    perc_x: Option<f64>,
    #[arg(long)]
    p_min: Option<f64>,
    #[arg(long)]
    grid_size: Option<usize>,
    #[arg(long)]
    perc_test: Option<f64>,
    /// Zero-based row indices used to build the tree, separated by commas or
    /// whitespace; the remaining rows select sigma.
    #[arg(long)]
    idx_train_file: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// CSV with the in-sample fit (row, set, y, yhat); stdout if omitted.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV holding at least the model's feature columns; other columns are ignored.
    #[arg(long)]
    data: PathBuf,
    /// Also write the leaf probability matrix.
    #[arg(long, requires = "p_out")]
    complete: bool,
    /// Predictions CSV; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where `--complete` writes the probability matrix.
    #[arg(long)]
    p_out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Missingness levels, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    rho: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    replications: usize,
    /// Comma separated subset of cart, prtree_fill0, prtree_fill1, prtree_fill2.
    #[arg(long, value_delimiter = ',', default_value = "cart,prtree_fill0,prtree_fill1,prtree_fill2")]
    methods: Vec<Method>,
    /// Base seed; replication r uses seed + r.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    n_train: usize,
    #[arg(long, default_value_t = 200)]
    n_test: usize,
    /// Records CSV; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; all cores if omitted.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// Summary CSV; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failures the user can fix by changing the invocation exit with 2, the
/// rest with 1.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parameter(_) | Error::Parse { .. } | Error::ModelFormat { .. } | Error::Io(_) => {
                Failure::Usage(e.into())
            }
            _ => Failure::Runtime(e.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Predict(a) => run_predict(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Summarize(a) => run_summarize(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load(path: &Path, response: Option<&str>) -> Result<prtree::Dataset, Failure> {
    load_csv(path, response).map_err(|e| match e {
        Error::Io(io) => usage(anyhow::Error::new(io).context(format!("cannot read {}", path.display()))),
        other => other.into(),
    })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display())).map_err(usage)?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_indices(path: &Path) -> Result<Vec<usize>, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .map_err(usage)?;
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse()
                .with_context(|| format!("{}: '{t}' is not a row index", path.display()))
                .map_err(usage)
        })
        .collect()
}

fn control_from(a: &FitArgs) -> Result<ControlParams, Failure> {
    let d = ControlParams::default();
    let kernel = match (a.dist, a.dist_par) {
        (None, None) => d.kernel,
        (fam, shape) => KernelSpec::new(fam.unwrap_or(KernelFamily::Gaussian), shape)?,
    };
    let idx_train = match &a.idx_train_file {
        Some(p) => Some(read_indices(p)?),
        None => None,
    };
    let control = ControlParams {
        cp: a.cp.unwrap_or(d.cp),
        max_depth: a.max_depth.unwrap_or(d.max_depth),
        max_terminal_nodes: a.max_terminal_nodes.unwrap_or(d.max_terminal_nodes),
        n_min: a.n_min.unwrap_or(d.n_min),
        fill_type: a.fill_type.unwrap_or(d.fill_type),
        proxy_crit: a.proxy_crit.unwrap_or(d.proxy_crit),
        n_candidates: a.n_candidates.unwrap_or(d.n_candidates),
        by_node: a.by_node,
        kernel,
        perc_x: a.perc_x.unwrap_or(d.perc_x),
        p_min: a.p_min.unwrap_or(d.p_min),
        grid_size: a.grid_size.unwrap_or(d.grid_size),
        sigma_grid: None,
        idx_train,
        perc_test: a.perc_test.unwrap_or(d.perc_test),
        seed: a.seed.unwrap_or(d.seed),
    };
    control.validate()?;
    Ok(control)
}

fn run_fit(a: FitArgs) -> Result<(), Failure> {
    let control = control_from(&a)?;
    let data = load(&a.data, Some(&a.response))?;
    let y = data.response.clone().expect("response requested");
    let res = fit(&y, &data.rows, &control)?;
    let model = ModelFile::from_fit(&res, data.feature_names.clone(), &control)?;
    save_model(&model, &a.out).with_context(|| format!("cannot write {}", a.out.display()))?;

    let mut in_valid = vec![false; y.len()];
    for &i in &res.idx_valid {
        in_valid[i] = true;
    }
    let mut w = csv::Writer::from_writer(output(a.report.as_deref())?);
    let write = |w: &mut csv::Writer<_>| -> anyhow::Result<()> {
        w.write_record(["row", "set", "y", "yhat"])?;
        for (i, (yi, fi)) in y.iter().zip(&res.yhat).enumerate() {
            let set = if in_valid[i] { "valid" } else { "train" };
            w.write_record([i.to_string(), set.to_string(), yi.to_string(), fi.to_string()])?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w)?;
    eprintln!(
        "fitted {} leaves; mse_train {}; mse_valid {}; sigma {:?}",
        res.tree.n_leaves(),
        res.mse_train,
        res.mse_valid.map_or_else(|| "NA".to_string(), |v| v.to_string()),
        res.sigma
    );
    Ok(())
}

fn run_predict(a: PredictArgs) -> Result<(), Failure> {
    let model = load_model(&a.model).map_err(|e| match e {
        Error::Io(io) => usage(anyhow::Error::new(io).context(format!("cannot read {}", a.model.display()))),
        other => other.into(),
    })?;
    let data = load(&a.data, None)?;
    let cols: Vec<usize> = model
        .feature_names
        .iter()
        .map(|name| {
            data.feature_names
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| usage(anyhow::anyhow!("{} has no column '{name}'", a.data.display())))
        })
        .collect::<Result<_, _>>()?;
    let rows: Vec<prtree::Observation> = data
        .rows
        .iter()
        .map(|r| prtree::Observation::new(cols.iter().map(|&c| r.get(c)).collect()))
        .collect();
    let pred = predict(&model.tree, &rows, a.complete)?;

    let mut w = csv::Writer::from_writer(output(a.out.as_deref())?);
    let write = |w: &mut csv::Writer<_>| -> anyhow::Result<()> {
        w.write_record(["row", "yhat"])?;
        for (i, v) in pred.yhat.iter().enumerate() {
            w.write_record([i.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w)?;
    if let (Some(p), Some(path)) = (&pred.p, &a.p_out) {
        let header: Vec<String> = model.tree.leaves().iter().map(|id| format!("leaf_{id}")).collect();
        let f = File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))
            .map_err(usage)?;
        write_matrix_csv(p, &header, BufWriter::new(f))?;
    }
    Ok(())
}

fn run_simulate(a: SimulateArgs) -> Result<(), Failure> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = a.jobs {
        if j == 0 {
            return Err(usage(anyhow::anyhow!("--jobs must be at least 1")));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().context("cannot start worker threads")?;
    let mut records = Vec::new();
    for &rho in &a.rho {
        let config = StudyConfig {
            n_train: a.n_train,
            n_test: a.n_test,
            rho,
            n_replications: a.replications,
            base_seed: a.seed,
            methods: a.methods.clone(),
        };
        config.validate()?;
        let out = pool.install(|| run_study(&config))?;
        for f in &out.failures {
            eprintln!(
                "warning: rho {rho} replication {} {} failed: {}",
                f.replication, f.method, f.message
            );
        }
        records.extend(out.records);
    }
    write_records(&records, output(a.out.as_deref())?)?;
    Ok(())
}

fn run_summarize(a: SummarizeArgs) -> Result<(), Failure> {
    let f = File::open(&a.input)
        .with_context(|| format!("cannot read {}", a.input.display()))
        .map_err(usage)?;
    let records = read_records(f)?;
    if records.is_empty() {
        return Err(usage(anyhow::anyhow!("{} holds no records", a.input.display())));
    }
    write_summary(&summarize(&records), output(a.out.as_deref())?)?;
    Ok(())
}
