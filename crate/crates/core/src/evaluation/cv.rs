use std::collections::BTreeSet;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::{make_stratified_fold_plan, FoldPlan};
use super::metrics::{mae, sample_std};
use super::report::report_label;
use super::EvalError;
use crate::domain::{CrtSeconds, DatasetManifest, RecordingPointId, RunnerId};
use crate::inference::{Fusion, InstanceSpec};
use crate::regression::{
    fit_normalization_from, grid_search_indexed, knn_fit, knn_predict, minutes_from_normalized, normalize_crt,
    DistanceCache, GridCell, GridSearchResult, GridSearchSpec, KnnModel, Metric, NormalizationParams, NormalizedCrt,
};
use crate::rng::{stream_rng, GRID_STREAM};
use crate::store::EmbeddingStore;

/// Observations joined with their embeddings, in canonical `(runner, rp)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct CvDataset {
    pub keys: Vec<(RunnerId, RecordingPointId)>,
    pub crts: Vec<CrtSeconds>,
    pub rows: Vec<Vec<f32>>,
    pub instances: Vec<InstanceSpec>,
    pub fusion: Fusion,
    pub param_count: u64,
}

impl CvDataset {
    /// Joins every observation of a runner seen at all recording points with
    /// its store row. Runners missing a recording point are left out.
    pub fn assemble(manifest: &DatasetManifest, store: &EmbeddingStore) -> Result<Self, EvalError> {
        manifest.validate()?;
        let eligible = manifest.eligible_runners();
        let crts = manifest.crts();
        let mut items = Vec::new();
        for (obs, crt) in manifest.observations.iter().zip(crts) {
            if eligible.contains(&obs.runner) {
                items.push(((obs.runner.clone(), obs.rp), crt?));
            }
        }
        items.sort_by(|a, b| a.0.cmp(&b.0));
        let mut rows = Vec::with_capacity(items.len());
        for ((runner, rp), _) in &items {
            let row = store.get(runner, *rp).ok_or_else(|| EvalError::MissingEmbedding {
                runner: runner.clone(),
                rp: *rp,
                instance: report_label(&store.instance_names(), store.fusion()),
            })?;
            rows.push(row.to_vec());
        }
        let (keys, crts) = items.into_iter().unzip();
        Ok(Self {
            keys,
            crts,
            rows,
            instances: store.instances().to_vec(),
            fusion: store.fusion(),
            param_count: store.param_counts().iter().sum(),
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn label(&self) -> String {
        let names: Vec<_> = self.instances.iter().map(|s| s.name).collect();
        report_label(&names, self.fusion)
    }

    fn samples(&self, indices: &[usize]) -> Vec<(RecordingPointId, CrtSeconds)> {
        indices.iter().map(|&i| (self.keys[i].1, self.crts[i])).collect()
    }
}

/// Which observations the normalization is fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    /// Fit on each training fold only.
    #[default]
    PerFold,
    /// Fit once on every observation, test folds included.
    Global,
}

/// Whether recording points share one regressor per fold or get one each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalScope {
    #[default]
    Pooled,
    PerRecordingPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvOptions {
    pub repetitions: usize,
    pub folds: usize,
    pub seed: u64,
    pub grid: GridSearchSpec,
    pub normalization: NormalizationMode,
    pub scope: EvalScope,
    pub stratify: bool,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            repetitions: 20,
            folds: 10,
            seed: 0,
            grid: GridSearchSpec::default(),
            normalization: NormalizationMode::PerFold,
            scope: EvalScope::Pooled,
            stratify: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSelection {
    pub repetition: usize,
    pub fold: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recording_point: Option<RecordingPointId>,
    pub cell: GridCell,
    pub inner_mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub instances: Vec<InstanceSpec>,
    pub fusion: Fusion,
    pub embedding_dim: usize,
    pub param_count: u64,
    pub observations: usize,
    pub repetitions: usize,
    pub folds: usize,
    pub seed: u64,
    pub normalization: NormalizationMode,
    pub scope: EvalScope,
    /// Normalized MAE of every (repetition, fold), repetition-major.
    pub fold_maes: Vec<f64>,
    pub mean_mae: f64,
    pub std_mae: f64,
    pub mean_minutes: f64,
    pub mean_train_size: f64,
    pub mean_test_size: f64,
    pub selections: Vec<FoldSelection>,
}

/// Repeated, nested k-fold cross-validation with a fresh plan from `options`.
pub fn run_cv(dataset: &CvDataset, options: &CvOptions) -> Result<EvalReport, EvalError> {
    let strata: Vec<u32> = if options.stratify {
        dataset.keys.iter().map(|(_, rp)| rp.index()).collect()
    } else {
        vec![0; dataset.len()]
    };
    let plan = make_stratified_fold_plan(&strata, options.repetitions, options.folds, options.seed)?;
    run_cv_with_plan(dataset, &plan, options)
}

struct FoldOutcome {
    mae: f64,
    minutes: f64,
    train: usize,
    test: usize,
    selections: Vec<FoldSelection>,
}

/// Cross-validation over an explicit plan. For every fold: fit the
/// normalization, grid-search on the training part, fit the k-NN and score the
/// test part. Folds run in parallel; the report does not depend on scheduling.
pub fn run_cv_with_plan(dataset: &CvDataset, plan: &FoldPlan, options: &CvOptions) -> Result<EvalReport, EvalError> {
    if plan.n_observations() != dataset.len() {
        return Err(EvalError::InvalidSpec(format!(
            "plan covers {} observations, dataset has {}",
            plan.n_observations(),
            dataset.len()
        )));
    }
    options.grid.validate()?;
    let metrics: BTreeSet<Metric> = options.grid.metric_grid.iter().copied().collect();
    let caches: Vec<DistanceCache> = metrics.into_iter().map(|m| DistanceCache::new(&dataset.rows, m)).collect();
    let all: Vec<usize> = (0..dataset.len()).collect();
    let global = match options.normalization {
        NormalizationMode::Global => Some(fit_normalization_from(dataset.samples(&all))?),
        NormalizationMode::PerFold => None,
    };

    let jobs: Vec<(usize, usize)> = (0..plan.repetitions)
        .flat_map(|r| (0..plan.folds).map(move |f| (r, f)))
        .collect();
    let outcomes = jobs
        .par_iter()
        .map(|&(r, f)| run_fold(dataset, plan, options, &caches, global, r, f))
        .collect::<Result<Vec<_>, _>>()?;

    let fold_maes: Vec<f64> = outcomes.iter().map(|o| o.mae).collect();
    let count = outcomes.len() as f64;
    Ok(EvalReport {
        label: dataset.label(),
        instances: dataset.instances.clone(),
        fusion: dataset.fusion,
        embedding_dim: dataset.dim(),
        param_count: dataset.param_count,
        observations: dataset.len(),
        repetitions: plan.repetitions,
        folds: plan.folds,
        seed: options.seed,
        normalization: options.normalization,
        scope: options.scope,
        mean_mae: fold_maes.iter().sum::<f64>() / count,
        std_mae: sample_std(&fold_maes),
        mean_minutes: outcomes.iter().map(|o| o.minutes).sum::<f64>() / count,
        mean_train_size: outcomes.iter().map(|o| o.train as f64).sum::<f64>() / count,
        mean_test_size: outcomes.iter().map(|o| o.test as f64).sum::<f64>() / count,
        selections: outcomes.into_iter().flat_map(|o| o.selections).collect(),
        fold_maes,
    })
}

fn run_fold(
    dataset: &CvDataset,
    plan: &FoldPlan,
    options: &CvOptions,
    caches: &[DistanceCache],
    global: Option<NormalizationParams>,
    repetition: usize,
    fold: usize,
) -> Result<FoldOutcome, EvalError> {
    let train = plan.train_indices(repetition, fold);
    let test = plan.test_indices(repetition, fold);
    let params = match global {
        Some(p) => p,
        None => fit_normalization_from(dataset.samples(&train))?,
    };
    let target = |i: usize| normalize_crt(dataset.crts[i], &params);
    let inner_seed = stream_rng(options.seed, GRID_STREAM + (repetition * plan.folds + fold) as u64).next_u64();

    let groups: Vec<(Option<RecordingPointId>, Vec<usize>, Vec<usize>)> = match options.scope {
        EvalScope::Pooled => vec![(None, train.clone(), test.clone())],
        EvalScope::PerRecordingPoint => {
            let rps: BTreeSet<RecordingPointId> = test.iter().map(|&i| dataset.keys[i].1).collect();
            rps.into_iter()
                .map(|rp| {
                    let pick = |v: &[usize]| v.iter().copied().filter(|&i| dataset.keys[i].1 == rp).collect();
                    (Some(rp), pick(&train), pick(&test))
                })
                .collect()
        }
    };

    let mut predictions = Vec::with_capacity(test.len());
    let mut truths = Vec::with_capacity(test.len());
    let mut selections = Vec::with_capacity(groups.len());
    for (rp, group_train, group_test) in groups {
        let ys: Vec<f64> = group_train.iter().map(|&i| target(i).value()).collect();
        let result = grid_search_indexed(&options.grid, caches, &group_train, &ys, inner_seed)?;
        let model = fit_cell(dataset, &group_train, &ys, result.best)?;
        for &i in &group_test {
            predictions.push(knn_predict(&model, &dataset.rows[i])?.value());
            truths.push(target(i).value());
        }
        selections.push(FoldSelection {
            repetition,
            fold,
            recording_point: rp,
            cell: result.best,
            inner_mae: result.best_mae,
        });
    }
    let fold_mae = mae(&predictions, &truths)?;
    Ok(FoldOutcome {
        mae: fold_mae,
        minutes: minutes_from_normalized(fold_mae, &params),
        train: train.len(),
        test: test.len(),
        selections,
    })
}

fn fit_cell(dataset: &CvDataset, indices: &[usize], ys: &[f64], cell: GridCell) -> Result<KnnModel, EvalError> {
    let rows: Vec<&[f32]> = indices.iter().map(|&i| dataset.rows[i].as_slice()).collect();
    let targets: Vec<NormalizedCrt> = ys.iter().map(|&y| NormalizedCrt(y)).collect();
    Ok(knn_fit(&rows, &targets, cell.k, cell.metric, cell.weighting)?)
}

/// Grid-searches and fits one regressor on the whole dataset, for deployment.
pub fn fit_final_model(
    dataset: &CvDataset,
    options: &CvOptions,
) -> Result<(KnnModel, NormalizationParams, GridSearchResult), EvalError> {
    let all: Vec<usize> = (0..dataset.len()).collect();
    let params = fit_normalization_from(dataset.samples(&all))?;
    let ys: Vec<f64> = all.iter().map(|&i| normalize_crt(dataset.crts[i], &params).value()).collect();
    let metrics: BTreeSet<Metric> = options.grid.metric_grid.iter().copied().collect();
    let caches: Vec<DistanceCache> = metrics.into_iter().map(|m| DistanceCache::new(&dataset.rows, m)).collect();
    let seed = stream_rng(options.seed, GRID_STREAM - 1).next_u64();
    let result = grid_search_indexed(&options.grid, &caches, &all, &ys, seed)?;
    let model = fit_cell(dataset, &all, &ys, result.best)?;
    Ok((model, params, result))
}
