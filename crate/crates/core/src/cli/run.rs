//! The full benchmark: split, fit the pipeline, tune and fit every learner,
//! score the test fold, and write the report set.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use log::{info, warn};

use super::config::RunConfig;
use crate::artifact::{Envelope, Provenance};
use crate::eval::{
    coefficient_table, evaluate_all, evaluate_per_organism, rates_over_time, summarize_rates, write_auc_report,
    write_coefficients, write_count_grid, write_organism_report, write_rate_grid, write_roc, write_yearly, AucRow,
    Coefficient, ModelScore, OrganismRow,
};
use crate::features::{build_study_rows, fit_pipeline, FeatureMatrix, PipelineState, StudyRow};
use crate::ingest::{Cohort, STUDY_ORGANISMS};
use crate::models::{
    ensemble_average, fit_antibiogram, fit_family, tune_hyperparameters, HyperParams, ModelFamily, TrainedModel,
};
use crate::scalar::Scalar;
use crate::splits::{default_cutoff_year, split_random_by_stay, split_temporal, Fold, SplitAssignment, SplitMode, SplitSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TuningSummary {
    pub best_index: usize,
    pub best: HyperParams,
    pub validation_auc: Vec<f64>,
}

/// Everything one split protocol produced.
#[derive(Debug, Clone)]
pub struct ModeRun<T> {
    pub spec: SplitSpec,
    pub assignment: SplitAssignment,
    pub state: PipelineState,
    pub test: FeatureMatrix<T>,
    pub models: BTreeMap<ModelFamily, TrainedModel<T>>,
    pub tuning: BTreeMap<ModelFamily, TuningSummary>,
    pub scores: Vec<ModelScore>,
    pub organism_models: BTreeMap<String, TrainedModel<T>>,
    pub organism_rows: Vec<OrganismRow>,
}

impl<T: Scalar> ModeRun<T> {
    pub fn auc(&self, f: ModelFamily) -> Option<f64> {
        self.scores.iter().find(|s| s.family == f).map(|s| s.auc)
    }

    /// L1 coefficients of the global model, largest magnitude first.
    pub fn coefficients(&self, top: usize) -> Vec<Coefficient> {
        match self.models.get(&ModelFamily::L1Logistic) {
            Some(TrainedModel::Linear(m)) => coefficient_table(m, self.state.selected_columns.as_slice(), top),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Experiment<T> {
    pub rows: Vec<StudyRow>,
    pub random: Option<ModeRun<T>>,
    pub temporal: Option<ModeRun<T>>,
}

impl<T: Scalar> Experiment<T> {
    /// Mode whose models feed the coefficient and per-organism tables.
    pub fn primary(&self) -> Option<&ModeRun<T>> {
        self.random.as_ref().or(self.temporal.as_ref())
    }
}

pub(crate) fn split(rows: &[StudyRow], spec: &SplitSpec) -> Result<SplitAssignment> {
    let groups: Vec<String> = rows.iter().map(|r| r.stay_id.clone()).collect();
    Ok(match spec.mode {
        SplitMode::RandomByStay => split_random_by_stay(&groups, spec)?,
        SplitMode::TemporalByYear => {
            let years: Vec<i32> = rows.iter().map(|r| r.unit_admit_year).collect();
            split_temporal(&groups, &years, spec)?
        }
    })
}

/// Tunes one L1 model per organism on that organism's rows. Organisms whose
/// validation rows lack a class are fit with `fallback` directly; those
/// whose training rows lack a class get no model.
fn fit_per_organism<T: Scalar>(
    train: &FeatureMatrix<T>,
    validation: &FeatureMatrix<T>,
    grid: &[HyperParams],
    fallback: &HyperParams,
    seed: u64,
) -> Result<BTreeMap<String, TrainedModel<T>>> {
    let subset = |m: &FeatureMatrix<T>, org: &str| {
        let idx: Vec<usize> = (0..m.n_rows()).filter(|&i| m.meta[i].organism == org).collect();
        m.select_rows(&idx)
    };
    let mut out = BTreeMap::new();
    for org in STUDY_ORGANISMS {
        let (tr, va) = (subset(train, org), subset(validation, org));
        if !tr.has_both_classes() {
            warn!("no per-organism model for {org}: training rows hold one class");
            continue;
        }
        let model = if va.has_both_classes() {
            tune_hyperparameters(grid, &tr, &va, seed)?.model
        } else {
            fit_family(fallback, &tr, seed)?
        };
        out.insert(org.to_string(), model);
    }
    Ok(out)
}

pub fn run_mode<T: Scalar>(rows: &[StudyRow], spec: &SplitSpec, cfg: &RunConfig) -> Result<ModeRun<T>> {
    let assignment = split(rows, spec)?;
    let train_idx = assignment.rows(Fold::Train);
    let state = fit_pipeline(rows, &train_idx, &cfg.pipeline)?;
    let all = state.apply::<T>(rows)?;
    let train = all.select_rows(&train_idx);
    let validation = all.select_rows(&assignment.rows(Fold::Validation));
    let test = all.select_rows(&assignment.rows(Fold::Test));
    info!(
        "{:?}: {} train, {} validation, {} test rows, {} features",
        spec.mode,
        train.n_rows(),
        validation.n_rows(),
        test.n_rows(),
        all.n_cols()
    );

    let m = &cfg.models;
    let mut models = BTreeMap::new();
    let mut tuning = BTreeMap::new();
    if m.includes(ModelFamily::Antibiogram) {
        let fit_rows = all.select_rows(&assignment.rows_in(&[Fold::Train, Fold::Validation]));
        models.insert(ModelFamily::Antibiogram, TrainedModel::Antibiogram(fit_antibiogram(&fit_rows)?));
    }
    for f in [ModelFamily::L1Logistic, ModelFamily::RandomForest, ModelFamily::NeuralNetwork, ModelFamily::GradientBoosted] {
        if !m.includes(f) {
            continue;
        }
        let out = tune_hyperparameters(&m.grid(f), &train, &validation, cfg.seed)?;
        info!("{}: grid point {} of {}, validation AUC {:?}", f.label(), out.best_index, out.validation_auc.len(), out.validation_auc);
        tuning.insert(f, TuningSummary { best_index: out.best_index, best: out.best, validation_auc: out.validation_auc });
        models.insert(f, out.model);
    }
    if m.includes(ModelFamily::Ensemble) {
        let members = [ModelFamily::RandomForest, ModelFamily::NeuralNetwork, ModelFamily::GradientBoosted]
            .iter()
            .map(|f| models[f].clone())
            .collect();
        models.insert(ModelFamily::Ensemble, TrainedModel::Ensemble(ensemble_average(members)?));
    }
    let scores = evaluate_all(&models, &test)?;

    let (mut organism_models, mut organism_rows) = (BTreeMap::new(), Vec::new());
    if m.per_organism {
        let grid = m.l1_grid();
        let fallback = tuning.get(&ModelFamily::L1Logistic).map_or_else(|| grid[0].clone(), |t| t.best.clone());
        organism_models = fit_per_organism(&train, &validation, &grid, &fallback, cfg.seed)?;
        let ab = match models.get(&ModelFamily::Antibiogram) {
            Some(TrainedModel::Antibiogram(ab)) => ab.clone(),
            _ => fit_antibiogram(&all.select_rows(&assignment.rows_in(&[Fold::Train, Fold::Validation])))?,
        };
        organism_rows = evaluate_per_organism(&test, &organism_models, &ab)?;
    }
    Ok(ModeRun { spec: *spec, assignment, state, test, models, tuning, scores, organism_models, organism_rows })
}

/// Split specs the configuration asks for, with the temporal cutoff resolved.
pub fn split_specs(rows: &[StudyRow], cfg: &RunConfig) -> Result<(Option<SplitSpec>, Option<SplitSpec>)> {
    let fractions = cfg.split.fractions;
    let random = cfg.split.modes.random().then(|| SplitSpec { fractions, ..SplitSpec::random(cfg.seed) });
    let temporal = if cfg.split.modes.temporal() {
        let cutoff = match cfg.split.cutoff_year {
            Some(y) => y,
            None => {
                let groups: Vec<String> = rows.iter().map(|r| r.stay_id.clone()).collect();
                let years: Vec<i32> = rows.iter().map(|r| r.unit_admit_year).collect();
                default_cutoff_year(&groups, &years).ok_or(crate::splits::SplitError::MissingCutoff)?
            }
        };
        Some(SplitSpec { fractions, ..SplitSpec::temporal(cutoff, cfg.seed) })
    } else {
        None
    };
    Ok((random, temporal))
}

/// Filters a loaded cohort and runs every configured split protocol.
pub fn run_experiment<T: Scalar>(cohort: &Cohort, cfg: &RunConfig) -> Result<Experiment<T>> {
    cfg.check()?;
    let study = cfg.filter.apply(cohort);
    if study.tests.is_empty() {
        return Err(Error::Ingest(crate::ingest::IngestError::Integrity("no tests survive the cohort filter".into())));
    }
    let rows = build_study_rows(&study);
    let (rs, ts) = split_specs(&rows, cfg)?;
    let random = rs.map(|s| run_mode::<T>(&rows, &s, cfg)).transpose()?;
    let temporal = ts.map(|s| run_mode::<T>(&rows, &s, cfg)).transpose()?;
    Ok(Experiment { rows, random, temporal })
}

fn mode_name(m: SplitMode) -> &'static str {
    match m {
        SplitMode::RandomByStay => "random",
        SplitMode::TemporalByYear => "temporal",
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::output(path, e))?))
}

/// Report files written by [`write_reports`], relative to the output directory.
pub fn report_files<T: Scalar>(exp: &Experiment<T>, cfg: &RunConfig) -> Vec<String> {
    let mut v: Vec<String> = ["report_auc.csv", "report_organism.csv", "report_coefficients.csv"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if cfg.reports.roc_curves {
        for run in [&exp.random, &exp.temporal].into_iter().flatten() {
            for s in &run.scores {
                v.push(format!("roc_{}_{}.csv", s.family.label().to_lowercase(), mode_name(run.spec.mode)));
            }
        }
    }
    v.extend(["fig3_rates.csv", "fig4_counts.csv", "fig5_resistant_counts.csv", "fig6_yearly.csv"].map(String::from));
    v
}

pub fn write_reports<T: Scalar>(exp: &Experiment<T>, cfg: &RunConfig, out: &Path, prov: &Provenance) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::output(out, e))?;
    let h = prov.header();
    let hdr = Some(h.as_str());
    let empty = Vec::new();
    let scores = |r: &Option<ModeRun<T>>| r.as_ref().map_or(&empty, |m| &m.scores).clone();
    let auc_rows = AucRow::join(&scores(&exp.random), &scores(&exp.temporal));
    let auc_rows: Vec<AucRow> = auc_rows.into_iter().filter(|r| cfg.models.includes(r.family)).collect();
    write_auc_report(create(&out.join("report_auc.csv"))?, &auc_rows, hdr)?;

    let primary = exp.primary();
    let organism_rows = primary.map_or(&[][..], |m| &m.organism_rows[..]);
    write_organism_report(create(&out.join("report_organism.csv"))?, organism_rows, hdr)?;
    let coefs = primary.map(|m| m.coefficients(cfg.reports.top_coefficients)).unwrap_or_default();
    write_coefficients(create(&out.join("report_coefficients.csv"))?, &coefs, hdr)?;

    for run in [&exp.random, &exp.temporal].into_iter().flatten() {
        let mode = mode_name(run.spec.mode);
        if cfg.reports.roc_curves {
            for s in &run.scores {
                let name = format!("roc_{}_{}.csv", s.family.label().to_lowercase(), mode);
                write_roc(create(&out.join(name))?, &s.roc, hdr)?;
            }
        }
        if cfg.reports.save_models {
            save_mode(run, &exp.rows, mode, out, prov)?;
        }
    }

    let grids = summarize_rates(&exp.rows);
    write_rate_grid(create(&out.join("fig3_rates.csv"))?, &grids, hdr)?;
    write_count_grid(create(&out.join("fig4_counts.csv"))?, &grids, &grids.counts, hdr)?;
    write_count_grid(create(&out.join("fig5_resistant_counts.csv"))?, &grids, &grids.resistant, hdr)?;
    let yearly = rates_over_time(&exp.rows, cfg.reports.high_frequency);
    write_yearly(create(&out.join("fig6_yearly.csv"))?, &yearly, hdr)?;
    Ok(())
}

/// Models, pipeline state, split assignment and the test design matrix,
/// enough for `predict` to reproduce test-fold scores.
fn save_mode<T: Scalar>(run: &ModeRun<T>, rows: &[StudyRow], mode: &str, out: &Path, prov: &Provenance) -> Result<()> {
    let dir = out.join("models");
    std::fs::create_dir_all(&dir).map_err(|e| Error::output(&dir, e))?;
    for (f, m) in &run.models {
        let path = dir.join(format!("{}_{mode}.json", f.label().to_lowercase()));
        Envelope::new("model", prov, m.clone()).write_json(create(&path)?)?;
    }
    for (org, m) in &run.organism_models {
        let slug: String = org.chars().map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' }).collect();
        let path = dir.join(format!("l1lr_{slug}_{mode}.json"));
        Envelope::new("model", prov, m.clone()).write_json(create(&path)?)?;
    }
    let path = out.join(format!("pipeline_state_{mode}.json"));
    Envelope::new("pipeline_state", prov, run.state.clone()).write_json(create(&path)?)?;
    let path = out.join(format!("splits_{mode}.csv"));
    let keys: Vec<String> = rows.iter().map(|r| r.test_id.clone()).collect();
    run.assignment.write_csv(create(&path)?, &keys, Some(&prov.header())).map_err(|e| Error::output(&path, e))?;
    let path = out.join(format!("test_matrix_{mode}.csv"));
    run.test.write_csv(create(&path)?, Some(&prov.header())).map_err(|e| Error::output(&path, e))?;
    Ok(())
}
