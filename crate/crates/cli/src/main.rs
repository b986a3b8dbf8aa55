//! `wadiro` command line: training, prediction, certification, benchmark
//! sampling, corruption, experiments and bound calculators.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use wadiro::data::Dataset;
use wadiro::guarantees::{
    certify_stability, probabilistic_tail, rademacher_bound_lifted, rademacher_bound_original, BoundInputs,
    CertifyDomain, CertifyMode, CertifyOptions, Units,
};
use wadiro::harness::{run_experiment, ExperimentConfig};
use wadiro::model::{self, fit_scnn};
use wadiro::robustness::{corrupt_and_split, sample_benchmark, BenchmarkSpec, CorruptionSpec, SplitRatios};
use wadiro::train::{PhysicsConstraints, Program, TrainConfig};
use wadiro::Error;

const EXIT_INVALID: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_PARTIAL: u8 = 4;

#[derive(Parser)]
#[command(name = "wadiro", version, about = "Distributionally robust shallow convex neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Bnb,
    Exhaustive,
}

#[derive(Clone, Copy, ValueEnum)]
enum UnitsArg {
    Standardized,
    Original,
}

#[derive(Subcommand)]
enum Command {
    /// Train an SCNN from a CSV (last column is the label) and a TrainConfig JSON.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Enforce nonnegative predictions on every training point.
        #[arg(long)]
        nonnegative: bool,
    },
    /// Append a prediction column to a CSV of feature rows.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Certify worst-case output change over a box and perturbation radius.
    Certify {
        #[arg(long)]
        model: PathBuf,
        /// JSON {lo: [...], hi: [...], eps: e}.
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, value_enum, default_value = "bnb")]
        mode: ModeArg,
        #[arg(long, default_value_t = 1e-7)]
        gap: f64,
        #[arg(long, value_enum, default_value = "standardized")]
        units: UnitsArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample a benchmark function from a BenchmarkSpec JSON into a CSV.
    Benchmark {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split a CSV, add label noise and inject outliers.
    Corrupt {
        #[arg(long)]
        data: PathBuf,
        /// CorruptionSpec JSON.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 0.6)]
        train: f64,
        #[arg(long, default_value_t = 0.2)]
        val: f64,
        #[arg(long, default_value_t = 0.2)]
        test: f64,
    },
    /// Run an ExperimentConfig JSON end to end.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Evaluate the out-of-sample bound calculators on a BoundInputs JSON.
    Bounds {
        #[arg(long)]
        inputs: PathBuf,
        /// Threshold for the probabilistic tail.
        #[arg(long)]
        zeta: Option<f64>,
    },
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Solver { .. } | Error::Infeasible(_) => EXIT_SOLVER,
            Error::Partial { .. } => EXIT_PARTIAL,
            Error::State(_) => 1,
            _ => EXIT_INVALID,
        };
        Self { code, error: e.into() }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Self { code: EXIT_INVALID, error }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn train(data: &Path, config: &Path, out: &Path, nonnegative: bool) -> Outcome {
    let ds = Dataset::read_csv(data)?;
    let mut cfg: TrainConfig = read_json(config)?;
    if matches!(cfg.program, Program::WadiroLinreg { .. }) {
        return Err(anyhow::anyhow!("train writes SCNN model files; wadiro_linreg is available through experiments").into());
    }
    if nonnegative {
        cfg.physics = Some(PhysicsConstraints::nonnegative(ds.n()));
    }
    let m = fit_scnn(&ds, &cfg, wadiro::harness::VIOLATION_TOL)?;
    model::save(&m, out)?;
    eprintln!("trained P={} ({}), wrote {}", m.p(), m.provenance.solve.status, out.display());
    Ok(())
}

fn predict(model_path: &Path, data: &Path, out: Option<&Path>) -> Outcome {
    let m = model::load(model_path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(data)
        .with_context(|| format!("reading {}", data.display()))?;
    let header = rdr.headers().context("csv header")?.clone();
    let d = m.d();
    if header.len() != d && header.len() != d + 1 {
        let msg = format!("model expects {d} features (optionally plus a label); csv has {} columns", header.len());
        return Err(anyhow::anyhow!(msg).into());
    }
    let sink: Box<dyn std::io::Write> = match out {
        Some(p) => Box::new(fs::File::create(p).with_context(|| format!("writing {}", p.display()))?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let mut h: Vec<String> = header.iter().map(str::to_string).collect();
    h.push("prediction".into());
    w.write_record(&h).context("writing csv")?;
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.context("csv record")?;
        let x = rec
            .iter()
            .take(d)
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("csv row {}: non-numeric feature", line + 2))?;
        let y = model::predict(&m, &x)?;
        let mut row: Vec<String> = rec.iter().map(str::to_string).collect();
        row.push(format!("{y:?}"));
        w.write_record(&row).context("writing csv")?;
    }
    w.flush().context("writing csv")?;
    Ok(())
}

fn certify(model_path: &Path, domain: &Path, mode: ModeArg, gap: f64, units: UnitsArg, out: Option<&Path>) -> Outcome {
    let m = model::load(model_path)?;
    let dom: CertifyDomain = read_json(domain)?;
    let opts = CertifyOptions {
        mode: match mode {
            ModeArg::Bnb => CertifyMode::BranchAndBound,
            ModeArg::Exhaustive => CertifyMode::Exhaustive,
        },
        units: match units {
            UnitsArg::Standardized => Units::Standardized,
            UnitsArg::Original => Units::Original,
        },
        gap,
        ..Default::default()
    };
    let cert = certify_stability(&m, &dom, &opts)?;
    write_json(&cert, out)?;
    Ok(())
}

fn benchmark(spec: &Path, out: &Path) -> Outcome {
    let spec: BenchmarkSpec = read_json(spec)?;
    sample_benchmark(&spec)?.write_csv(out)?;
    Ok(())
}

fn corrupt(data: &Path, spec: &Path, out_dir: &Path, ratios: SplitRatios) -> Outcome {
    let ds = Dataset::read_csv(data)?;
    let spec: CorruptionSpec = read_json(spec)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    match corrupt_and_split(&ds, &spec, ratios) {
        Ok(cs) => {
            cs.train.write_csv(out_dir.join("train.csv"))?;
            cs.val.write_csv(out_dir.join("val.csv"))?;
            cs.test.write_csv(out_dir.join("test.csv"))?;
            let audit = serde_json::json!({
                "train_outliers": cs.train_outliers,
                "val_outliers": cs.val_outliers,
                "outliers": cs.outliers,
            });
            write_json(&audit, Some(&out_dir.join("audit.json")))?;
            Ok(())
        }
        Err(Error::Partial { message, payload }) => {
            let audit = serde_json::json!({ "partial": true, "message": message, "outliers": payload });
            write_json(&audit, Some(&out_dir.join("audit.json")))?;
            Err(Error::Partial { message, payload }.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn experiment(config: &Path, out_dir: Option<PathBuf>) -> Outcome {
    let mut cfg: ExperimentConfig = read_json(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    cfg.resolve_paths(base);
    if out_dir.is_some() {
        cfg.output_dir = out_dir;
    }
    let report = run_experiment(&cfg)?;
    write_json(&report, None)?;
    Ok(())
}

fn bounds(inputs: &Path, zeta: Option<f64>) -> Outcome {
    let inp: BoundInputs = read_json(inputs)?;
    let tail = zeta.map(|z| probabilistic_tail(&inp, z)).transpose()?;
    let out = serde_json::json!({
        "rademacher_bound_lifted": rademacher_bound_lifted(&inp)?,
        "rademacher_bound_original": rademacher_bound_original(&inp)?,
        "probabilistic_tail": tail,
    });
    write_json(&out, None)?;
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Train { data, config, out, nonnegative } => train(&data, &config, &out, nonnegative),
        Command::Predict { model, data, out } => predict(&model, &data, out.as_deref()),
        Command::Certify { model, domain, mode, gap, units, out } => certify(&model, &domain, mode, gap, units, out.as_deref()),
        Command::Benchmark { spec, out } => benchmark(&spec, &out),
        Command::Corrupt { data, spec, out_dir, train, val, test } => {
            corrupt(&data, &spec, &out_dir, SplitRatios { train, val, test })
        }
        Command::Experiment { config, out_dir } => experiment(&config, out_dir),
        Command::Bounds { inputs, zeta } => bounds(&inputs, zeta),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
