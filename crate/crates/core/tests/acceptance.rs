//! End-to-end acceptance battery. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.
//!
//! Criteria 3 to 8 share one battery: every cell trained on 10 seeds with all
//! analyses enabled. On a single core this takes roughly a quarter of an hour.

mod common;

use std::path::Path;

use fgame::agents::{evaluate_accuracy, SignalingModel};
use fgame::analysis::{cp_sweep_averaged, dbscan, default_t_grid};
use fgame::checkpoint;
use fgame::experiment::{run, ExperimentPlan, TrialReport};
use fgame::game::{is_strict, sample_strict_context, GameConfig, Sharing, Strictness};
use fgame::report::{summarize, TABLE_FILES};
use fgame::seed::{stream_rng, Stream};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{canonical, dbscan_oracle, fd_max_rel_error, random_planar};

const SEEDS: usize = 10;

struct Outcome {
    lines: Vec<String>,
    failed: usize,
}

impl Outcome {
    fn record(&mut self, n: usize, pass: bool, what: &str, detail: String) {
        let tag = if pass { "PASS" } else { "FAIL" };
        self.lines.push(format!("{tag} criterion {n:>2}: {what} [{detail}]"));
        self.failed += usize::from(!pass);
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn cell_index(plan: &ExperimentPlan, strictness: Strictness, sharing: Sharing, n_objects: usize) -> usize {
    plan.cells
        .iter()
        .position(|c| c.game.strictness == strictness && c.game.sharing == sharing && c.game.n_objects == n_objects)
        .expect("cell in plan")
}

fn mean_of(reports: &[TrialReport], cell: usize, get: impl Fn(&TrialReport) -> Option<f64>) -> f64 {
    let v: Vec<f64> = reports.iter().filter(|r| r.cell == cell).filter_map(get).collect();
    summarize(&v).expect("values for cell").mean
}

fn gradient_oracle(out: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let depth = rng.gen_range(1..=3);
        let sizes: Vec<usize> = (0..=depth).map(|_| rng.gen_range(1..=10)).collect();
        let acts: Vec<_> = (0..depth)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    fgame::nn::Activation::Relu
                } else {
                    fgame::nn::Activation::Identity
                }
            })
            .collect();
        let net = fgame::nn::Mlp::init(&sizes, &acts, &mut rng).unwrap();
        let input: Vec<f64> = (0..net.in_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let probe: Vec<f64> = (0..net.out_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        worst = worst.max(fd_max_rel_error(&net, &input, &probe, 1e-5));
    }
    out.record(
        1,
        worst < 1e-4,
        "analytic gradients match central differences on 50 nets",
        format!("max rel err {worst:.2e}"),
    );
}

fn chance_baseline(out: &mut Outcome) {
    let game = GameConfig::extremity(Strictness::Strict, Sharing::Shared, 10);
    let model = SignalingModel::init_for_seed(game, 7).unwrap();
    // 100 contexts x 10 functions = 1000 evaluations.
    let acc = evaluate_accuracy(&model, 100, &mut stream_rng(7, Stream::Eval)).unwrap();
    out.record(
        2,
        (acc - 0.10).abs() <= 0.03,
        "untrained accuracy on 10-object contexts is 0.10 +- 0.03",
        format!("{acc:.4}"),
    );
}

fn dbscan_equivalence(out: &mut Outcome) {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut mismatches = 0;
    for _ in 0..100 {
        let pts = random_planar(&mut rng);
        let min_pts = rng.gen_range(1..=8);
        let eps = rng.gen_range(0.1..1.0);
        let got = dbscan(&pts, eps, min_pts).unwrap();
        mismatches += usize::from(canonical(got.assignment()) != canonical(&dbscan_oracle(&pts, eps, min_pts)));
    }
    out.record(
        9,
        mismatches == 0,
        "DBSCAN equals brute-force density reachability on 100 sets",
        format!("{mismatches} mismatches"),
    );
}

fn strictness(out: &mut Outcome) {
    let cfg = GameConfig::extremity(Strictness::Strict, Sharing::Shared, 10);
    let n = cfg.n_dims;
    let (mut not_strict, mut multiset_changed) = (0, 0);
    for seed in 0..1000u64 {
        let c = sample_strict_context(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        not_strict += usize::from(!is_strict(&c));
        // Replaying the RNG yields the raw draws the construction started from.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..cfg.n_objects * n).map(|_| rng.gen::<f64>()).collect();
        for d in 0..n {
            let mut before: Vec<u64> = (0..cfg.n_objects).map(|i| raw[i * n + d].to_bits()).collect();
            let mut after: Vec<u64> = c.column(d).iter().map(|v| v.to_bits()).collect();
            before.sort_unstable();
            after.sort_unstable();
            multiset_changed += usize::from(before != after);
        }
    }
    out.record(
        10,
        not_strict == 0 && multiset_changed == 0,
        "1000 strict contexts are strict and keep column multisets",
        format!("{not_strict} not strict, {multiset_changed} columns changed"),
    );
}

fn battery(out: &mut Outcome, dir: &Path) {
    let plan = ExperimentPlan {
        trials_per_cell: SEEDS,
        master_seed: 1,
        workers: workers(),
        ..ExperimentPlan::default()
    };
    let reports = run(&plan, dir).expect("battery run");

    println!("cell                      acc    f1     f1_0   perc   analogy comp   cp_cross");
    for (k, cell) in plan.cells.iter().enumerate() {
        let m = |get: fn(&TrialReport) -> Option<f64>| mean_of(&reports, k, get);
        println!(
            "{:<24} {:.3}  {:.3}  {:.3}  {:.3}  {:.3}   {:.3}  {:.3}",
            cell.game.label(),
            m(|r| Some(r.accuracy)),
            m(|r| r.f1),
            m(|r| r.untrained_f1),
            m(|r| r.perception_accuracy),
            m(|r| r.analogy_accuracy),
            m(|r| r.composition_accuracy),
            m(|r| r.cp_crossing_fraction),
        );
    }

    use Sharing::*;
    use Strictness::*;
    let acc = |s, h, n| mean_of(&reports, cell_index(&plan, s, h, n), |r| Some(r.accuracy));

    // 3
    let targets = [
        (Strict, Shared, 10, 0.6378, 0.08),
        (Strict, NonShared, 10, 0.6022, 0.08),
        (NonStrict, Shared, 15, 0.2758, 0.06),
    ];
    let mut ok = true;
    let mut detail = Vec::new();
    for (s, h, n, target, tol) in targets {
        let a = acc(s, h, n);
        ok &= (a - target).abs() <= tol;
        detail.push(format!(
            "{}={a:.4} (target {target}+-{tol})",
            GameConfig::extremity(s, h, n).label()
        ));
    }
    out.record(
        3,
        ok,
        "mean accuracy over 10 seeds near the reference values",
        detail.join(", "),
    );

    // 4
    let mut ok = true;
    let mut detail = Vec::new();
    for h in [Shared, NonShared] {
        let strict = acc(Strict, h, 10);
        let ns: Vec<f64> = [5, 10, 15].iter().map(|&n| acc(NonStrict, h, n)).collect();
        ok &= ns.iter().all(|&a| strict > a) && ns[0] > ns[1] && ns[1] > ns[2];
        detail.push(format!(
            "{h:?}: strict {strict:.4} > non-strict 5/10/15 {:.4}/{:.4}/{:.4}",
            ns[0], ns[1], ns[2]
        ));
    }
    out.record(
        4,
        ok,
        "strict beats non-strict; non-strict falls with more objects",
        detail.join("; "),
    );

    // 5
    let f1 = |s, h, n| mean_of(&reports, cell_index(&plan, s, h, n), |r| r.f1);
    let trained = [(Strict, Shared, 10), (NonStrict, Shared, 10), (NonStrict, Shared, 15)];
    let trained_f1: Vec<f64> = trained.iter().map(|&(s, h, n)| f1(s, h, n)).collect();
    let untrained_max = reports.iter().filter_map(|r| r.untrained_f1).fold(0.0, f64::max);
    out.record(
        5,
        trained_f1.iter().all(|&f| f >= 0.90) && untrained_max <= 0.3,
        "trained F1 >= 0.90 in three shared cells; untrained F1 <= 0.3",
        format!(
            "trained {:.3}/{:.3}/{:.3}, worst untrained {untrained_max:.3}",
            trained_f1[0], trained_f1[1], trained_f1[2]
        ),
    );

    // 6
    let ss = cell_index(&plan, Strict, Shared, 10);
    let perc = mean_of(&reports, ss, |r| r.perception_accuracy);
    let base = acc(Strict, Shared, 10);
    out.record(
        6,
        (perc - base).abs() <= 0.06,
        "artificial-message accuracy within 6 points of real messages (strict/shared)",
        format!("{perc:.4} vs {base:.4}"),
    );

    // 7
    let mut ok = true;
    let mut detail = Vec::new();
    for (k, cell) in plan.cells.iter().enumerate() {
        let base = mean_of(&reports, k, |r| Some(r.accuracy));
        let analogy = mean_of(&reports, k, |r| r.analogy_accuracy);
        let comp = mean_of(&reports, k, |r| r.composition_accuracy);
        let pass = base - analogy >= 0.24 && base - comp >= 0.24;
        ok &= pass;
        detail.push(format!(
            "{} drops {:.1}/{:.1}{}",
            cell.game.label(),
            100.0 * (base - analogy),
            100.0 * (base - comp),
            if pass { "" } else { " (short)" }
        ));
    }
    let ss_analogy = mean_of(&reports, ss, |r| r.analogy_accuracy);
    ok &= ss_analogy <= 0.20;
    detail.push(format!("strict/shared analogy {ss_analogy:.4}"));
    out.record(
        7,
        ok,
        "both compositionality probes drop >= 24 points in every cell",
        detail.join(", "),
    );

    // 8
    let sn = cell_index(&plan, Strict, NonShared, 10);
    let (mut endpoints_exact, mut after_boundary, mut crossed, mut pairs) = (true, Vec::new(), 0usize, 0usize);
    for r in reports.iter().filter(|r| r.cell == sn) {
        let (model, _) = checkpoint::load(&dir.join(r.checkpoint_path.as_ref().unwrap())).unwrap();
        let cp = cp_sweep_averaged(
            &model,
            &default_t_grid(),
            10,
            100,
            &mut stream_rng(r.seed, Stream::CategoricalPerception),
        )
        .unwrap();
        for draw in &cp.draws {
            let raw = |m, f| {
                draw.receiver_contexts
                    .iter()
                    .filter(|c| model.recovers(m, c, f).unwrap())
                    .count() as f64
                    / draw.receiver_contexts.len() as f64
            };
            let (lo_minus, lo_plus) = draw.curve.at(-1.0).unwrap();
            let (hi_minus, hi_plus) = draw.curve.at(1.0).unwrap();
            endpoints_exact &= lo_minus == raw(&draw.m_minus, draw.f_minus)
                && lo_plus == raw(&draw.m_minus, draw.f_plus)
                && hi_minus == raw(&draw.m_plus, draw.f_minus)
                && hi_plus == raw(&draw.m_plus, draw.f_plus);
            after_boundary.push(hi_minus);
            crossed += usize::from(draw.curve.crosses_inside());
            pairs += 1;
        }
    }
    let f_minus_at_plus = summarize(&after_boundary).unwrap().mean;
    let crossing = crossed as f64 / pairs as f64;
    out.record(
        8,
        endpoints_exact && f_minus_at_plus <= 0.10 + 0.05 && crossing >= 0.8,
        "CP sweep endpoints exact, f_minus near chance at +1, curves cross inside",
        format!("endpoints exact {endpoints_exact}, f_minus(+1) {f_minus_at_plus:.4}, crossing {crossed}/{pairs}"),
    );
}

fn output_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let name = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                if name.ends_with(".csv") || name.ends_with(".jsonl") {
                    files.push((name, std::fs::read(&p).unwrap()));
                }
            }
        }
    }
    files.sort();
    files
}

fn determinism(out: &mut Outcome) {
    // Every cell and analysis, shortened training so two runs stay cheap.
    let mut plan = ExperimentPlan {
        trials_per_cell: 1,
        master_seed: 99,
        workers: workers(),
        ..ExperimentPlan::default()
    };
    for cell in &mut plan.cells {
        cell.train.steps = 300;
    }
    plan.settings.composition.steps = 200;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&plan, a.path()).unwrap();
    run(&plan, b.path()).unwrap();
    let (fa, fb) = (output_files(a.path()), output_files(b.path()));
    let has_all = TABLE_FILES
        .iter()
        .chain(&["trials.jsonl"])
        .all(|n| fa.iter().any(|(f, _)| f == n));
    out.record(
        11,
        has_all && fa == fb,
        "two runs with one master seed give byte-identical reports",
        format!("{} files compared", fa.len()),
    );
}

#[test]
fn acceptance() {
    let mut out = Outcome {
        lines: Vec::new(),
        failed: 0,
    };
    gradient_oracle(&mut out);
    chance_baseline(&mut out);
    dbscan_equivalence(&mut out);
    strictness(&mut out);
    determinism(&mut out);
    let dir = tempfile::tempdir().unwrap();
    battery(&mut out, dir.path());

    out.lines.sort_by_key(|l| l[15..17].trim().parse::<usize>().unwrap());
    println!();
    for l in &out.lines {
        println!("{l}");
    }
    assert_eq!(out.failed, 0, "{} criteria failed", out.failed);
}
