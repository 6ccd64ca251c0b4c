use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fgame::analysis::default_t_grid;
use fgame::experiment::{analyze_model, run, Cell, ExperimentPlan, TrialReport};
use fgame::game::{GameConfig, Sharing, Strictness};
use fgame::report;
use fgame::seed::{stream_rng, Stream};
use fgame::{checkpoint, Error};

#[derive(Parser)]
#[command(name = "fgame", version, about = "Train and probe function-game signaling agents")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one cell for a number of seeds and write its reports.
    Train(PlanArgs),
    /// Run every cell of the plan (the eight default settings unless --config says otherwise).
    Sweep(PlanArgs),
    /// Load a checkpoint and run the probes on it.
    Analyze(ModelArgs),
    /// Categorical-perception sweep on a checkpoint.
    Cp(ModelArgs),
    /// Rebuild the aggregate tables of an output directory from trials.jsonl.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct PlanArgs {
    /// JSON experiment plan; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, conflicts_with = "non_strict")]
    strict: bool,
    #[arg(long)]
    non_strict: bool,
    #[arg(long, conflicts_with = "non_shared")]
    shared: bool,
    #[arg(long)]
    non_shared: bool,
    #[arg(long)]
    objects: Option<usize>,
    /// Training steps for every cell.
    #[arg(long)]
    steps: Option<usize>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Seed for the probe streams; defaults to the checkpoint's training seed.
    #[arg(long)]
    master_seed: Option<u64>,
    /// Directory for CSV output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON plan whose analysis settings are used.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl PlanArgs {
    fn strictness(&self) -> Option<Strictness> {
        match (self.strict, self.non_strict) {
            (true, _) => Some(Strictness::Strict),
            (_, true) => Some(Strictness::NonStrict),
            _ => None,
        }
    }

    fn sharing(&self) -> Option<Sharing> {
        match (self.shared, self.non_shared) {
            (true, _) => Some(Sharing::Shared),
            (_, true) => Some(Sharing::NonShared),
            _ => None,
        }
    }

    fn matches(&self, game: &GameConfig) -> bool {
        self.strictness().is_none_or(|s| s == game.strictness)
            && self.sharing().is_none_or(|s| s == game.sharing)
            && self.objects.is_none_or(|n| n == game.n_objects)
    }

    /// Plan for `sweep`: the config's cells (or the defaults) filtered by the
    /// setting flags.
    fn sweep_plan(&self) -> fgame::Result<ExperimentPlan> {
        let mut plan = load_plan(self.config.as_deref())?;
        plan.cells.retain(|c| self.matches(&c.game));
        if plan.cells.is_empty() {
            return Err(Error::Config {
                field: "cells".into(),
                reason: "no cell matches the --strict/--shared/--objects filters".into(),
            });
        }
        self.apply(plan)
    }

    /// Plan for `train`: a single cell built from the flags, or the one cell
    /// of the config that the flags select.
    fn train_plan(&self) -> fgame::Result<ExperimentPlan> {
        let plan = if self.config.is_some() {
            let mut plan = load_plan(self.config.as_deref())?;
            plan.cells.retain(|c| self.matches(&c.game));
            if plan.cells.len() != 1 {
                return Err(Error::Config {
                    field: "cells".into(),
                    reason: format!("train needs exactly one cell, the flags select {}", plan.cells.len()),
                });
            }
            plan
        } else {
            let strictness = self.strictness().unwrap_or(Strictness::Strict);
            let n_objects = self.objects.unwrap_or(10);
            let game = GameConfig::extremity(strictness, self.sharing().unwrap_or(Sharing::Shared), n_objects);
            ExperimentPlan {
                cells: vec![Cell {
                    game,
                    train: Default::default(),
                }],
                trials_per_cell: 1,
                ..ExperimentPlan::default()
            }
        };
        self.apply(plan)
    }

    fn apply(&self, mut plan: ExperimentPlan) -> fgame::Result<ExperimentPlan> {
        if let Some(seed) = self.master_seed {
            plan.master_seed = seed;
        }
        if let Some(n) = self.trials {
            plan.trials_per_cell = n;
        }
        if let Some(w) = self.workers {
            plan.workers = w;
        }
        if let Some(out) = &self.out {
            plan.out = Some(out.clone());
        }
        if let Some(steps) = self.steps {
            for cell in &mut plan.cells {
                cell.train.steps = steps;
            }
        }
        plan.validate()?;
        Ok(plan)
    }
}

fn load_plan(path: Option<&Path>) -> fgame::Result<ExperimentPlan> {
    match path {
        None => Ok(ExperimentPlan::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Config {
                field: "config".into(),
                reason: format!("{}: {e}", p.display()),
            })?;
            ExperimentPlan::from_json(&text)
        }
    }
}

fn print_table(reports: &[TrialReport]) {
    let mut cells: Vec<usize> = reports.iter().map(|r| r.cell).collect();
    cells.dedup();
    for cell in cells {
        let rows: Vec<&TrialReport> = reports.iter().filter(|r| r.cell == cell).collect();
        let acc: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
        let s = report::summarize(&acc).expect("non-empty cell");
        println!(
            "{:<24} trials {:>3}  accuracy {:.4} (std {:.4}, sem {:.4})",
            rows[0].cell_label, s.n, s.mean, s.std, s.sem
        );
    }
}

fn run_plan(plan: ExperimentPlan) -> fgame::Result<()> {
    let out = plan.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    eprintln!(
        "running {} cell(s) x {} trial(s) on {} worker(s) into {}",
        plan.cells.len(),
        plan.trials_per_cell,
        plan.workers,
        out.display()
    );
    let reports = run(&plan, &out)?;
    print_table(&reports);
    Ok(())
}

fn model_settings(args: &ModelArgs) -> fgame::Result<(fgame::agents::SignalingModel, u64, ExperimentPlan)> {
    let (model, train) = checkpoint::load(&args.checkpoint).map_err(|e| match e {
        Error::Io(source) => Error::Config {
            field: "checkpoint".into(),
            reason: format!("{}: {source}", args.checkpoint.display()),
        },
        other => other,
    })?;
    let plan = load_plan(args.config.as_deref())?;
    Ok((model, args.master_seed.unwrap_or(train.seed), plan))
}

fn create_out(dir: &Path) -> fgame::Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Output {
        path: dir.to_path_buf(),
        source,
    })
}

fn analyze(args: &ModelArgs) -> fgame::Result<()> {
    let (model, seed, plan) = model_settings(args)?;
    let result = analyze_model(&model, seed, &plan.settings, &plan.analyses)?;
    if let Some(out) = &args.out {
        create_out(out)?;
        if let Some(set) = &result.messages {
            report::export_messages(set, &out.join("messages_post.csv"))?;
        }
        if let Some(cp) = &result.cp {
            report::export_cp_curve(&cp.mean, &out.join("cp_curve.csv"))?;
        }
        report::write_atomic(
            &out.join("analysis.json"),
            serde_json::to_string_pretty(&result)?.as_bytes(),
        )?;
    }
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn cp(args: &ModelArgs) -> fgame::Result<()> {
    let (model, seed, plan) = model_settings(args)?;
    let s = &plan.settings;
    let cp = fgame::analysis::cp_sweep_averaged(
        &model,
        &default_t_grid(),
        s.cp_draws,
        s.n_contexts,
        &mut stream_rng(seed, Stream::CategoricalPerception),
    )?;
    let csv = report::cp_curve_csv(&cp.mean);
    match &args.out {
        Some(out) => {
            create_out(out)?;
            report::write_atomic(&out.join("cp_curve.csv"), csv.as_bytes())?;
        }
        None => print!("{csv}"),
    }
    eprintln!(
        "{} of {} pairs cross inside (-1, 1)",
        cp.draws.iter().filter(|d| d.curve.crosses_inside()).count(),
        cp.draws.len()
    );
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Output { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Train(args) => args.train_plan().and_then(run_plan),
        Command::Sweep(args) => args.sweep_plan().and_then(run_plan),
        Command::Analyze(args) => analyze(args),
        Command::Cp(args) => cp(args),
        Command::Report { out } => report::report(out).map(|r| print_table(&r)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
