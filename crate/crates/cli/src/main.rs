use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use postshrink::bench::{cv_prediction_error, p_grid_from_tau, run_table, write_report, SimConfig};
use postshrink::dataset::{center, expand_threshold_design, read_table, threshold_design_names};
use postshrink::risktheory::{adr_pse_mc, adr_re, adr_se_mc, adr_wr, delta_d1n, AdrInputs};
use postshrink::shrinkage::{run_pipeline_with, Estimator, PipelineConfig};
use postshrink::wridge::CvGrid;
use postshrink::{Case, Dataset, Error, Method, TuningConfig};

#[derive(Parser)]
#[command(name = "postshrink", version, about = "Post-selection shrinkage estimation for sparse linear models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulation study and write one row per dimension.
    Simulate(SimulateArgs),
    /// Fit every estimator on a CSV data set.
    Fit(FitArgs),
    /// Held-out prediction error over repeated random splits.
    Cv(CvArgs),
    /// Asymptotic distributional risks for a canonical covariance.
    Adr(AdrArgs),
}

#[derive(Args)]
struct TuningArgs {
    /// Scale of the threshold a_n; fixes c1 instead of cross-validating.
    #[arg(long)]
    c1: Option<f64>,
    /// Scale of the ridge penalty r_n; fixes c2 instead of cross-validating.
    #[arg(long)]
    c2: Option<f64>,
    /// Exponent of the threshold schedule.
    #[arg(long, default_value_t = 0.125)]
    alpha: f64,
    /// Folds used when c1 and c2 are cross-validated.
    #[arg(long, default_value_t = 5)]
    cv_folds: usize,
    /// Multiplier applied to the BIC choice of lambda.
    #[arg(long, default_value_t = 1.0)]
    lambda_inflation: f64,
}

impl TuningArgs {
    fn pipeline(&self, method: Method, seed: u64) -> PipelineConfig {
        let mut cfg = PipelineConfig::new(
            method,
            TuningConfig {
                alpha: self.alpha,
                c1: self.c1.unwrap_or(1.0),
                c2: self.c2.unwrap_or(1.0),
                cv_folds: self.cv_folds,
                seed,
            },
        );
        cfg.selection.lambda_inflation = self.lambda_inflation;
        if self.c1.is_none() || self.c2.is_none() {
            let default = CvGrid::default();
            cfg.cv_grid = Some(CvGrid {
                c1: self.c1.map_or(default.c1, |c| vec![c]),
                c2: self.c2.map_or(default.c2, |c| vec![c]),
            });
        }
        cfg
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    case: u8,
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Comma-separated exponents; p = round(n^tau).
    #[arg(long, value_delimiter = ',', default_value = "1.00,1.02,1.04,1.06,1.08,1.10,1.12,1.14,1.16,1.18,1.20")]
    tau_grid: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    reps: usize,
    #[arg(long, default_value = "lasso")]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Args)]
struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    data: PathBuf,
    /// Name of the response column.
    #[arg(long)]
    response: String,
    /// Column used to split the sample into two regimes.
    #[arg(long, requires = "tau")]
    threshold_var: Option<String>,
    /// Regime boundary: rows with threshold variable below tau form the lower regime.
    #[arg(long, requires = "threshold_var")]
    tau: Option<f64>,
}

impl DataArgs {
    fn load(&self) -> Result<Dataset, Error> {
        let table = read_table(&self.data)?;
        if table.dropped_rows > 0 {
            eprintln!("dropped {} rows with missing cells", table.dropped_rows);
        }
        match (&self.threshold_var, self.tau) {
            (Some(q_name), Some(tau)) => {
                let y = table.column(&self.response)?;
                let q = table.column(q_name)?;
                let (base, names) = table.covariates(&self.response, &[q_name.as_str()])?;
                let spec = postshrink::ThresholdSpec { q, tau };
                let x = expand_threshold_design(&base, &spec)?;
                center(&x, &y)?.with_column_names(threshold_design_names(&names))
            }
            _ => table.to_dataset(&self.response),
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "lasso")]
    method: Method,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "lasso")]
    method: Method,
    #[arg(long, default_value_t = 500)]
    partitions: usize,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the summary here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    tuning: TuningArgs,
}

#[derive(Args)]
struct AdrArgs {
    /// Efficiency ratio c in (0, 1].
    #[arg(long)]
    c: f64,
    /// Number of weak coefficients.
    #[arg(long)]
    p2: usize,
    #[arg(long, default_value_t = 0.0)]
    delta_norm: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn csv_writer(out: Option<&Path>) -> Result<csv::Writer<Box<dyn Write>>, Error> {
    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?),
        None => Box::new(io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

fn flush(w: &mut csv::Writer<Box<dyn Write>>, out: Option<&Path>) -> Result<(), Error> {
    w.flush().map_err(|source| Error::Io {
        path: out.map_or_else(|| PathBuf::from("<stdout>"), Path::to_path_buf),
        source,
    })
}

fn simulate(args: &SimulateArgs) -> Result<(), Error> {
    let case = Case::from_id(args.case)?;
    let mut cfg = SimConfig::new(case, args.n, p_grid_from_tau(args.n, &args.tau_grid), args.reps, args.method);
    cfg.pipeline = args.tuning.pipeline(args.method, args.seed);
    cfg.sigma = args.sigma;
    cfg.base_seed = args.seed;
    let report = run_table(&cfg)?;
    write_report(&report, &args.out)?;
    for row in &report.rows {
        eprintln!(
            "p={:4} DF={:6.2} RMSE pls={:.3} re={:.3} pse={:.3} guard={:.2}",
            row.p, row.df, row.rmse_pls, row.rmse_re, row.rmse_pse, row.guard_rate
        );
    }
    Ok(())
}

fn fit(args: &FitArgs) -> Result<(), Error> {
    let data = args.data.load()?;
    let bundle = run_pipeline_with(&data, &args.tuning.pipeline(args.method, args.seed))?;
    let out = Some(args.out.as_path());
    let mut w = csv_writer(out)?;
    w.write_record(["coefficient_name", "pls", "re", "wr", "se", "pse"])?;
    let cols: Vec<_> = Estimator::ALL.iter().map(|&e| bundle.full(e)).collect();
    for j in 0..data.p() {
        let mut rec = vec![data.column_name(j)];
        rec.extend(cols.iter().map(|c| c[j].to_string()));
        w.write_record(&rec)?;
    }
    flush(&mut w, out)?;
    eprintln!(
        "|S1|={} |S2|={} lambda={:.4} a_n={:.4} r_n={:.4} c1={} c2={}{}",
        bundle.partition.s1.len(),
        bundle.s2_hat_count(),
        bundle.lambda,
        bundle.a_n,
        bundle.r_n,
        bundle.tuning.c1,
        bundle.tuning.c2,
        if bundle.guard_triggered { " (shrinkage skipped)" } else { "" }
    );
    for d in &bundle.diagnostics {
        eprintln!("{d}");
    }
    Ok(())
}

fn cv(args: &CvArgs) -> Result<(), Error> {
    let data = args.data.load()?;
    let cfg = args.tuning.pipeline(args.method, args.seed);
    let report = cv_prediction_error(&data, &cfg, args.partitions, args.train_fraction, args.seed)?;
    let out = args.out.as_deref();
    let mut w = csv_writer(out)?;
    w.write_record(["estimator", "mean_error", "std_error"])?;
    for e in &report.summary {
        let se = e.std_error.map(|s| s.to_string()).unwrap_or_default();
        w.write_record([e.estimator.name().to_string(), e.mean_error.to_string(), se])?;
    }
    flush(&mut w, out)
}

fn adr(args: &AdrArgs) -> Result<(), Error> {
    let inputs = AdrInputs::canonical(args.c, args.p2, args.delta_norm, args.sigma)?;
    let se = adr_se_mc(&inputs, args.p2, args.samples, args.seed)?;
    let pse = adr_pse_mc(&inputs, args.p2, args.samples, args.seed)?;
    let delta = if inputs.c < 1.0 { delta_d1n(&inputs)? } else { 0.0 };
    let out = args.out.as_deref();
    let mut w = csv_writer(out)?;
    w.write_record(["estimator", "adr", "std_error"])?;
    w.write_record(["wr".to_string(), adr_wr().to_string(), String::new()])?;
    w.write_record(["re".to_string(), adr_re(&inputs)?.to_string(), String::new()])?;
    w.write_record(["se".to_string(), se.estimate.to_string(), se.std_error.to_string()])?;
    w.write_record(["pse".to_string(), pse.estimate.to_string(), pse.std_error.to_string()])?;
    flush(&mut w, out)?;
    eprintln!("c={} delta_d1n={delta}", inputs.c);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Cv(a) => cv(a),
        Command::Adr(a) => adr(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 3 } else { 2 })
        }
    }
}
