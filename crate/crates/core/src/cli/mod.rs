//! Command-line entry point: `synth`, `run`, `predict` and `validate`.

mod config;
mod run;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use log::info;

pub use config::{ModelConfig, Paths, Precision, ReportConfig, RunConfig, SplitConfig, SplitModes};
pub use run::{report_files, run_experiment, run_mode, split_specs, write_reports, Experiment, ModeRun, TuningSummary};

use crate::artifact::{Envelope, Provenance};
use crate::features::{build_study_rows, FeatureMatrix};
use crate::ingest::load_tables;
use crate::models::TrainedModel;
use crate::synth::{generate, write_outputs, Generated};
use crate::{Error, Result};

pub const THREADS_ENV: &str = "AMRBENCH_THREADS";

#[derive(Debug, Parser)]
#[command(name = "amrbench", version, about = "Antimicrobial resistance prediction benchmark")]
pub struct Cli {
    /// Worker thread cap; falls back to AMRBENCH_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Overrides {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub cutoff_year: Option<i32>,
    #[arg(long, value_enum)]
    pub split_mode: Option<SplitModes>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Drop cultures taken earlier than this many minutes after unit admission.
    #[arg(long, allow_negative_numbers = true)]
    pub min_culture_offset: Option<i64>,
}

impl Overrides {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(y) = self.cutoff_year {
            cfg.split.cutoff_year = Some(y);
        }
        if let Some(m) = self.split_mode {
            cfg.split.modes = m;
        }
        if let Some(o) = &self.output_dir {
            cfg.paths.output_dir = o.clone();
        }
        if let Some(m) = self.min_culture_offset {
            cfg.filter.min_culture_offset_min = Some(m);
        }
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort with known ground truth.
    Synth {
        #[command(flatten)]
        overrides: Overrides,
        /// Directory for stays.csv, micro.csv and ground_truth.json;
        /// defaults to the directory of the configured stays file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit every model and write the report set.
    Run {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Score a saved feature matrix with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Feature matrix CSV as written by `run`.
        #[arg(long)]
        rows: PathBuf,
        /// Defaults to standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check configuration and input tables without training.
    Validate {
        #[command(flatten)]
        overrides: Overrides,
    },
}

/// Writes the synthetic tables, seeded by the run seed.
pub fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<Generated> {
    let gen_cfg = crate::synth::GeneratorConfig { seed: cfg.seed, ..cfg.synth.clone() };
    let g = generate(&gen_cfg)?;
    let prov = Provenance::new(crate::artifact::config_hash(&gen_cfg)?, cfg.seed);
    write_outputs(out, &g, Some(&prov.header()))?;
    info!("wrote {} stays and {} tests to {}", g.truth.n_stays, g.truth.n_tests, out.display());
    Ok(g)
}

/// Runs the benchmark and writes reports; returns the written report paths.
pub fn cmd_run(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.check()?;
    let cohort = load_tables(&cfg.paths.stays, &cfg.paths.micro)?;
    let prov = Provenance::new(cfg.hash()?, cfg.seed);
    let out = &cfg.paths.output_dir;
    let files = match cfg.models.precision {
        Precision::F64 => {
            let exp = run_experiment::<f64>(&cohort, cfg)?;
            write_reports(&exp, cfg, out, &prov)?;
            report_files(&exp, cfg)
        }
        Precision::F32 => {
            let exp = run_experiment::<f32>(&cohort, cfg)?;
            write_reports(&exp, cfg, out, &prov)?;
            report_files(&exp, cfg)
        }
    };
    let resolved = out.join("run_config.toml");
    let text = format!("# {}\n{}", prov.header(), cfg.to_toml()?);
    std::fs::write(&resolved, text).map_err(|e| Error::output(&resolved, e))?;
    Ok(files.into_iter().map(|f| out.join(f)).collect())
}

/// Scores every row of `rows` with the model in `model`.
pub fn cmd_predict(model: &Path, rows: &Path) -> Result<(Provenance, Vec<(String, f64)>)> {
    let open = |p: &Path| {
        std::fs::File::open(p).map_err(|e| {
            Error::Ingest(crate::ingest::IngestError::Io { path: p.display().to_string(), source: e })
        })
    };
    let env: Envelope<TrainedModel<f64>> = Envelope::read_json(std::io::BufReader::new(open(model)?), "model")?;
    let m = FeatureMatrix::<f64>::read_csv(std::io::BufReader::new(open(rows)?))?;
    let scores = env.body.predict(&m)?;
    Ok((env.provenance, m.row_keys.iter().cloned().zip(scores).collect()))
}

pub fn write_scores<W: Write>(mut w: W, prov: &Provenance, scores: &[(String, f64)]) -> std::io::Result<()> {
    writeln!(w, "# {}", prov.header())?;
    writeln!(w, "test_id,probability")?;
    for (k, p) in scores {
        writeln!(w, "{k},{p}")?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub stays: usize,
    pub tests: usize,
    pub study_tests: usize,
    pub study_stays: usize,
    pub resistant_fraction: Option<f64>,
    pub cutoff_year: Option<i32>,
}

/// Loads and filters the inputs and resolves the splits; trains nothing.
pub fn cmd_validate(cfg: &RunConfig) -> Result<Diagnostics> {
    cfg.check()?;
    let cohort = load_tables(&cfg.paths.stays, &cfg.paths.micro)?;
    let study = cfg.filter.apply(&cohort);
    let rows = build_study_rows(&study);
    if rows.is_empty() {
        return Err(Error::Ingest(crate::ingest::IngestError::Integrity("no tests survive the cohort filter".into())));
    }
    let (random, temporal) = split_specs(&rows, cfg)?;
    for spec in [random, temporal].iter().flatten() {
        run::split(&rows, spec)?;
    }
    Ok(Diagnostics {
        stays: cohort.stays.len(),
        tests: cohort.tests.len(),
        study_tests: study.tests.len(),
        study_stays: study.stays.len(),
        resistant_fraction: study.resistant_fraction(),
        cutoff_year: temporal.and_then(|s| s.cutoff_year),
    })
}

fn configure_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a thread count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        // a pool set up earlier in the process keeps its size
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    configure_threads(cli.threads)?;
    match cli.command {
        Command::Synth { overrides, out } => {
            let cfg = overrides.resolve()?;
            let dir = out.unwrap_or_else(|| cfg.paths.stays.parent().map(Path::to_path_buf).unwrap_or_default());
            cmd_synth(&cfg, &dir)?;
        }
        Command::Run { overrides } => {
            let cfg = overrides.resolve()?;
            for f in cmd_run(&cfg)? {
                println!("{}", f.display());
            }
        }
        Command::Predict { model, rows, output } => {
            let (prov, scores) = cmd_predict(&model, &rows)?;
            match output {
                Some(p) => {
                    let f = std::fs::File::create(&p).map_err(|e| Error::output(&p, e))?;
                    write_scores(std::io::BufWriter::new(f), &prov, &scores).map_err(|e| Error::output(&p, e))?;
                }
                None => write_scores(std::io::stdout().lock(), &prov, &scores).map_err(|e| Error::output(Path::new("stdout"), e))?,
            }
        }
        Command::Validate { overrides } => {
            let cfg = overrides.resolve()?;
            let d = cmd_validate(&cfg)?;
            println!("stays={} tests={} study_stays={} study_tests={}", d.stays, d.tests, d.study_stays, d.study_tests);
            if let Some(r) = d.resistant_fraction {
                println!("resistant_fraction={r:.4}");
            }
            if let Some(y) = d.cutoff_year {
                println!("cutoff_year={y}");
            }
        }
    }
    Ok(())
}

/// One-line, machine-parseable failure message.
pub fn error_line(e: &Error) -> String {
    let detail = e.to_string().split_whitespace().collect::<Vec<_>>().join(" ");
    format!("error category={} code={} detail={detail}", e.category().as_str(), e.category().exit_code())
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let detail = e.to_string().lines().next().unwrap_or("invalid arguments").to_string();
            eprintln!("error category=config code=2 detail={detail}");
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            e.category().exit_code()
        }
    }
}
