//! Seeded trial batteries over game settings.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agents::{evaluate_accuracy, train_trial, SignalingModel, TrainConfig};
use crate::analysis::{
    analogy_probe, artificial_messages, cluster_f1, collect_messages, composition_probe_all, cp_sweep_averaged, dbscan,
    default_t_grid, perception_accuracy, CompositionConfig, CpReport, LabeledMessageSet, DEFAULT_EPS, DEFAULT_MIN_PTS,
};
use crate::checkpoint;
use crate::error::{Error, Result};
use crate::game::{GameConfig, Sharing, Strictness};
use crate::report;
use crate::seed::{stream_rng, trial_seed, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Analyses {
    pub clustering: bool,
    pub perception: bool,
    pub analogy: bool,
    pub composition: bool,
    pub cp: bool,
    pub export_messages: bool,
    pub checkpoints: bool,
}

impl Default for Analyses {
    fn default() -> Self {
        Analyses {
            clustering: true,
            perception: true,
            analogy: true,
            composition: true,
            cp: true,
            export_messages: true,
            checkpoints: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSettings {
    /// Contexts per evaluation, message collection and probe.
    pub n_contexts: usize,
    pub eps: f64,
    pub min_pts: usize,
    /// Messages averaged into each artificial message.
    pub artificial_k: usize,
    pub composition: CompositionConfig,
    pub cp_draws: usize,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings {
            n_contexts: 100,
            eps: DEFAULT_EPS,
            min_pts: DEFAULT_MIN_PTS,
            artificial_k: 10,
            composition: CompositionConfig::default(),
            cp_draws: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cell {
    pub game: GameConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentPlan {
    pub cells: Vec<Cell>,
    pub trials_per_cell: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub analyses: Analyses,
    pub settings: AnalysisSettings,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            cells: default_cells(),
            trials_per_cell: 20,
            master_seed: 0,
            workers: 1,
            out: None,
            analyses: Analyses::default(),
            settings: AnalysisSettings::default(),
        }
    }
}

/// Strict contexts of 10 objects and non-strict contexts of 5, 10 and 15, each
/// shared and non-shared.
pub fn default_cells() -> Vec<Cell> {
    let mut cells = Vec::new();
    let settings = [
        (Strictness::Strict, 10),
        (Strictness::NonStrict, 5),
        (Strictness::NonStrict, 10),
        (Strictness::NonStrict, 15),
    ];
    for (strictness, n_objects) in settings {
        for sharing in [Sharing::Shared, Sharing::NonShared] {
            cells.push(Cell {
                game: GameConfig::extremity(strictness, sharing, n_objects),
                train: TrainConfig::default(),
            });
        }
    }
    cells
}

fn prefix_field(prefix: String, e: Error) -> Error {
    match e {
        Error::Config { field, reason } => Error::Config {
            field: format!("{prefix}.{field}"),
            reason,
        },
        other => other,
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::config("cells", "plan has no cells"));
        }
        if self.trials_per_cell == 0 {
            return Err(Error::config("trials_per_cell", "must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        for (k, cell) in self.cells.iter().enumerate() {
            cell.game
                .validate()
                .map_err(|e| prefix_field(format!("cells[{k}].game"), e))?;
            cell.train
                .validate()
                .map_err(|e| prefix_field(format!("cells[{k}].train"), e))?;
        }
        let s = &self.settings;
        if s.n_contexts == 0 {
            return Err(Error::config("settings.n_contexts", "must be at least 1"));
        }
        if !(s.eps > 0.0) {
            return Err(Error::config("settings.eps", "must be positive"));
        }
        if s.min_pts == 0 {
            return Err(Error::config("settings.min_pts", "must be at least 1"));
        }
        if s.artificial_k == 0 {
            return Err(Error::config("settings.artificial_k", "must be at least 1"));
        }
        if s.cp_draws == 0 {
            return Err(Error::config("settings.cp_draws", "must be at least 1"));
        }
        if s.composition.batch_size == 0 {
            return Err(Error::config("settings.composition.batch_size", "must be at least 1"));
        }
        s.composition
            .adam
            .validate()
            .map_err(|e| prefix_field("settings.composition.adam".into(), e))?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: ExperimentPlan = serde_json::from_str(text).map_err(|e| Error::Config {
            field: "config".into(),
            reason: e.to_string(),
        })?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn seed(&self, cell: usize, trial: usize) -> u64 {
        trial_seed(self.master_seed, cell, trial)
    }
}

/// One line of `trials.jsonl`. Analyses that were switched off are `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub cell: usize,
    pub cell_label: String,
    pub strictness: Strictness,
    pub sharing: Sharing,
    pub n_objects: usize,
    pub trial: usize,
    pub seed: u64,
    pub final_loss: Option<f64>,
    pub untrained_accuracy: f64,
    pub accuracy: f64,
    pub f1: Option<f64>,
    pub untrained_f1: Option<f64>,
    pub n_clusters: Option<usize>,
    pub n_noise: Option<usize>,
    pub perception_accuracy: Option<f64>,
    pub n_artificial: Option<usize>,
    pub analogy_accuracy: Option<f64>,
    pub analogy_per_dim: Option<Vec<f64>>,
    pub analogy_identity_accuracy: Option<f64>,
    pub composition_accuracy: Option<f64>,
    pub composition_per_held_out: Option<Vec<f64>>,
    pub cp_crossing_fraction: Option<f64>,
    pub messages_pre_path: Option<String>,
    pub messages_post_path: Option<String>,
    pub cp_curve_path: Option<String>,
    pub checkpoint_path: Option<String>,
}

/// Directory of one trial's artifacts, relative to the output root.
pub fn trial_dir(cell: usize, label: &str, trial: usize) -> PathBuf {
    PathBuf::from("trials")
        .join(format!("cell{cell:02}_{label}"))
        .join(format!("trial{trial:02}"))
}

fn rel(p: &Path) -> String {
    p.to_string_lossy().replace('\\', "/")
}

/// Results of the enabled analyses on one model. Disabled analyses are `None`.
#[derive(Debug, Clone, Serialize)]
pub struct ModelAnalysis {
    pub accuracy: f64,
    pub f1: Option<f64>,
    pub n_clusters: Option<usize>,
    pub n_noise: Option<usize>,
    pub perception_accuracy: Option<f64>,
    pub n_artificial: Option<usize>,
    pub analogy_accuracy: Option<f64>,
    pub analogy_per_dim: Option<Vec<f64>>,
    pub analogy_identity_accuracy: Option<f64>,
    pub composition_accuracy: Option<f64>,
    pub composition_per_held_out: Option<Vec<f64>>,
    pub cp_crossing_fraction: Option<f64>,
    #[serde(skip)]
    pub messages: Option<LabeledMessageSet>,
    #[serde(skip)]
    pub cp: Option<CpReport>,
}

/// Runs every enabled analysis on `model`, each on its own stream of `seed`.
pub fn analyze_model(
    model: &SignalingModel,
    seed: u64,
    settings: &AnalysisSettings,
    analyses: &Analyses,
) -> Result<ModelAnalysis> {
    let s = settings;
    let a = analyses;
    let game = *model.game();
    let mut r = ModelAnalysis {
        accuracy: evaluate_accuracy(model, s.n_contexts, &mut stream_rng(seed, Stream::Eval))?,
        f1: None,
        n_clusters: None,
        n_noise: None,
        perception_accuracy: None,
        n_artificial: None,
        analogy_accuracy: None,
        analogy_per_dim: None,
        analogy_identity_accuracy: None,
        composition_accuracy: None,
        composition_per_held_out: None,
        cp_crossing_fraction: None,
        messages: None,
        cp: None,
    };
    if a.clustering || a.perception || a.export_messages {
        let set = collect_messages(model, s.n_contexts, &mut stream_rng(seed, Stream::Messages))?;
        if a.clustering || a.perception {
            let clustering = dbscan(&set.messages, s.eps, s.min_pts)?;
            r.f1 = Some(cluster_f1(&clustering, &set.labels, game.n_functions())?);
            r.n_clusters = Some(clustering.n_clusters());
            r.n_noise = Some(clustering.n_noise());
            if a.perception {
                let mut rng = stream_rng(seed, Stream::Perception);
                let artificial = artificial_messages(&set, &clustering, s.artificial_k, game.n_dims, &mut rng)?;
                let pairs: Vec<_> = artificial.into_iter().map(|m| (m.function, m.message)).collect();
                r.n_artificial = Some(pairs.len());
                r.perception_accuracy = Some(perception_accuracy(model, &pairs, s.n_contexts, &mut rng)?);
            }
        }
        r.messages = Some(set);
    }
    if a.analogy {
        let p = analogy_probe(model, s.n_contexts, &mut stream_rng(seed, Stream::Analogy))?;
        r.analogy_accuracy = Some(p.accuracy);
        r.analogy_per_dim = Some(p.per_dim);
        r.analogy_identity_accuracy = Some(p.identity_accuracy);
    }
    // The probe needs a held-out dimension plus two others.
    if a.composition && game.n_dims >= 3 {
        let p = composition_probe_all(model, &s.composition, &mut stream_rng(seed, Stream::Composition))?;
        r.composition_accuracy = Some(p.accuracy);
        r.composition_per_held_out = Some(p.per_held_out);
    }
    if a.cp {
        let cp = cp_sweep_averaged(
            model,
            &default_t_grid(),
            s.cp_draws,
            s.n_contexts,
            &mut stream_rng(seed, Stream::CategoricalPerception),
        )?;
        r.cp_crossing_fraction = Some(cp.crossing_fraction());
        r.cp = Some(cp);
    }
    Ok(r)
}

/// Trains and analyses one (cell, trial). Artifacts are written under `out`
/// when given.
pub fn run_trial(plan: &ExperimentPlan, cell_index: usize, trial: usize, out: Option<&Path>) -> Result<TrialReport> {
    let cell = plan
        .cells
        .get(cell_index)
        .ok_or_else(|| Error::config("cell", format!("no cell {cell_index}")))?;
    let game = cell.game;
    let seed = plan.seed(cell_index, trial);
    let train = TrainConfig { seed, ..cell.train };
    let s = &plan.settings;
    let a = &plan.analyses;

    // The untrained snapshot gets the same evaluation and message streams as
    // the trained one.
    let untrained = SignalingModel::init_for_seed(game, seed)?;
    let untrained_accuracy = evaluate_accuracy(&untrained, s.n_contexts, &mut stream_rng(seed, Stream::Eval))?;
    let pre = if a.clustering || a.export_messages {
        Some(collect_messages(
            &untrained,
            s.n_contexts,
            &mut stream_rng(seed, Stream::Messages),
        )?)
    } else {
        None
    };
    let untrained_f1 = match (&pre, a.clustering) {
        (Some(pre), true) => {
            let c = dbscan(&pre.messages, s.eps, s.min_pts)?;
            Some(cluster_f1(&c, &pre.labels, game.n_functions())?)
        }
        _ => None,
    };

    let trained = train_trial(game, train)?;
    let model = &trained.model;
    let m = analyze_model(model, seed, s, a)?;

    let mut report = TrialReport {
        cell: cell_index,
        cell_label: game.label(),
        strictness: game.strictness,
        sharing: game.sharing,
        n_objects: game.n_objects,
        trial,
        seed,
        final_loss: trained.final_loss(),
        untrained_accuracy,
        accuracy: m.accuracy,
        f1: if a.clustering { m.f1 } else { None },
        untrained_f1,
        n_clusters: if a.clustering { m.n_clusters } else { None },
        n_noise: if a.clustering { m.n_noise } else { None },
        perception_accuracy: m.perception_accuracy,
        n_artificial: m.n_artificial,
        analogy_accuracy: m.analogy_accuracy,
        analogy_per_dim: m.analogy_per_dim,
        analogy_identity_accuracy: m.analogy_identity_accuracy,
        composition_accuracy: m.composition_accuracy,
        composition_per_held_out: m.composition_per_held_out,
        cp_crossing_fraction: m.cp_crossing_fraction,
        messages_pre_path: None,
        messages_post_path: None,
        cp_curve_path: None,
        checkpoint_path: None,
    };

    let Some(out) = out else {
        return Ok(report);
    };
    let dir = trial_dir(cell_index, &game.label(), trial);
    let full = out.join(&dir);
    std::fs::create_dir_all(&full).map_err(|source| Error::Output { path: full, source })?;
    if let (true, Some(pre), Some(post)) = (a.export_messages, &pre, &m.messages) {
        let pre_path = dir.join("messages_pre.csv");
        let post_path = dir.join("messages_post.csv");
        report::export_messages(pre, &out.join(&pre_path))?;
        report::export_messages(post, &out.join(&post_path))?;
        report.messages_pre_path = Some(rel(&pre_path));
        report.messages_post_path = Some(rel(&post_path));
    }
    if let Some(cp) = &m.cp {
        let path = dir.join("cp_curve.csv");
        report::export_cp_curve(&cp.mean, &out.join(&path))?;
        report.cp_curve_path = Some(rel(&path));
    }
    if a.checkpoints {
        let path = dir.join("model.ckpt");
        checkpoint::save(&out.join(&path), model, &train)?;
        report.checkpoint_path = Some(rel(&path));
    }
    Ok(report)
}

/// Runs every (cell, trial) of the plan on `plan.workers` threads and returns
/// the reports sorted by (cell, trial).
pub fn run_trials(plan: &ExperimentPlan, out: Option<&Path>) -> Result<Vec<TrialReport>> {
    plan.validate()?;
    let jobs: Vec<(usize, usize)> = (0..plan.cells.len())
        .flat_map(|c| (0..plan.trials_per_cell).map(move |t| (c, t)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let mut reports = pool.install(|| {
        jobs.par_iter()
            .map(|&(c, t)| run_trial(plan, c, t, out))
            .collect::<Result<Vec<_>>>()
    })?;
    reports.sort_by_key(|r| (r.cell, r.trial));
    Ok(reports)
}

/// Runs the plan and writes `trials.jsonl`, the four table CSVs, and the
/// top-level figure data into `out`.
pub fn run(plan: &ExperimentPlan, out: &Path) -> Result<Vec<TrialReport>> {
    plan.validate()?;
    std::fs::create_dir_all(out).map_err(|source| Error::Output {
        path: out.to_path_buf(),
        source,
    })?;
    let reports = run_trials(plan, Some(out))?;
    report::write_reports(out, &reports)?;
    report::copy_figure_data(out, &reports)?;
    Ok(reports)
}
