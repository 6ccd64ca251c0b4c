//! Report files: per-trial JSON lines, aggregate tables, and figure data.
//!
//! Every file goes through [`write_atomic`]. CSVs are UTF-8 with a header row
//! and LF line endings; floats use Rust's shortest round-trip formatting so a
//! rerun with the same seeds reproduces them byte for byte.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::analysis::{CpCurve, LabeledMessageSet};
use crate::error::{Error, Result};
use crate::experiment::TrialReport;
use crate::game::{Sharing, Strictness};

pub const TRIALS_FILE: &str = "trials.jsonl";
pub const TABLE_FILES: [&str; 4] = [
    "table1_accuracy.csv",
    "table2_f1.csv",
    "table3_perception.csv",
    "table4_composition.csv",
];

/// Writes through a sibling temp file and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let out_err = |source| Error::Output {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(out_err)?;
    tmp.write_all(bytes).map_err(out_err)?;
    tmp.persist(path).map_err(|e| out_err(e.error))?;
    Ok(())
}

pub fn messages_csv(set: &LabeledMessageSet) -> String {
    let mut s = String::from("msg_x,msg_y,function_label,context_id\n");
    for ((m, label), ctx) in set.messages.iter().zip(&set.labels).zip(&set.context_ids) {
        let m = m.as_slice();
        let y = m.get(1).copied().unwrap_or(0.0);
        writeln!(s, "{},{},{},{}", m[0], y, label, ctx).expect("write to String");
    }
    s
}

pub fn export_messages(set: &LabeledMessageSet, path: &Path) -> Result<()> {
    write_atomic(path, messages_csv(set).as_bytes())
}

pub fn cp_curve_csv(curve: &CpCurve) -> String {
    let mut s = String::from("t,acc_f_minus,acc_f_plus\n");
    for k in 0..curve.len() {
        writeln!(s, "{},{},{}", curve.t[k], curve.acc_f_minus[k], curve.acc_f_plus[k]).expect("write to String");
    }
    s
}

pub fn export_cp_curve(curve: &CpCurve, path: &Path) -> Result<()> {
    write_atomic(path, cp_curve_csv(curve).as_bytes())
}

/// Mean, sample standard deviation and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub std: f64,
    pub sem: f64,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    Some(Summary {
        n,
        mean,
        std,
        sem: std / (n as f64).sqrt(),
    })
}

type Metric = (&'static str, fn(&TrialReport) -> Option<f64>);

fn table_metrics(table: usize) -> &'static [Metric] {
    const T1: &[Metric] = &[
        ("accuracy", |r| Some(r.accuracy)),
        ("untrained_accuracy", |r| Some(r.untrained_accuracy)),
    ];
    const T2: &[Metric] = &[("f1", |r| r.f1), ("untrained_f1", |r| r.untrained_f1)];
    const T3: &[Metric] = &[
        ("perception_accuracy", |r| r.perception_accuracy),
        ("accuracy", |r| Some(r.accuracy)),
    ];
    const T4: &[Metric] = &[
        ("analogy", |r| r.analogy_accuracy),
        ("composition", |r| r.composition_accuracy),
        ("accuracy", |r| Some(r.accuracy)),
    ];
    [T1, T2, T3, T4][table]
}

/// One aggregate table. Rows follow cell order; a metric missing from every
/// trial of a cell leaves its fields empty.
pub fn table_csv(table: usize, reports: &[TrialReport]) -> String {
    let metrics = table_metrics(table);
    let mut s = String::from("cell,label,strictness,sharing,n_objects,n_trials");
    for (name, _) in metrics {
        write!(s, ",{name}_mean,{name}_std,{name}_sem").expect("write to String");
    }
    s.push('\n');
    let mut cells: Vec<usize> = reports.iter().map(|r| r.cell).collect();
    cells.dedup();
    for cell in cells {
        let rows: Vec<&TrialReport> = reports.iter().filter(|r| r.cell == cell).collect();
        let first = rows[0];
        write!(
            s,
            "{},{},{},{},{},{}",
            cell,
            first.cell_label,
            strictness_name(first.strictness),
            sharing_name(first.sharing),
            first.n_objects,
            rows.len()
        )
        .expect("write to String");
        for (_, get) in metrics {
            let values: Vec<f64> = rows.iter().filter_map(|r| get(r)).collect();
            match summarize(&values) {
                Some(m) => write!(s, ",{},{},{}", m.mean, m.std, m.sem),
                None => write!(s, ",,,"),
            }
            .expect("write to String");
        }
        s.push('\n');
    }
    s
}

fn strictness_name(s: Strictness) -> &'static str {
    match s {
        Strictness::Strict => "strict",
        Strictness::NonStrict => "non_strict",
    }
}

fn sharing_name(s: Sharing) -> &'static str {
    match s {
        Sharing::Shared => "shared",
        Sharing::NonShared => "non_shared",
    }
}

pub fn trials_jsonl(reports: &[TrialReport]) -> Result<String> {
    let mut s = String::new();
    for r in reports {
        s.push_str(&serde_json::to_string(r)?);
        s.push('\n');
    }
    Ok(s)
}

/// Writes `trials.jsonl` and the four tables. `reports` must already be
/// sorted by (cell, trial).
pub fn write_reports(out: &Path, reports: &[TrialReport]) -> Result<()> {
    write_atomic(&out.join(TRIALS_FILE), trials_jsonl(reports)?.as_bytes())?;
    for (k, name) in TABLE_FILES.iter().enumerate() {
        write_atomic(&out.join(name), table_csv(k, reports).as_bytes())?;
    }
    Ok(())
}

/// Copies the first trial's message dumps and CP curve to the output root.
pub fn copy_figure_data(out: &Path, reports: &[TrialReport]) -> Result<()> {
    let Some(first) = reports.first() else {
        return Ok(());
    };
    let files = [
        (&first.messages_pre_path, "messages_pre.csv"),
        (&first.messages_post_path, "messages_post.csv"),
        (&first.cp_curve_path, "cp_curve.csv"),
    ];
    for (src, dst) in files {
        if let Some(src) = src {
            let bytes = std::fs::read(out.join(src))?;
            write_atomic(&out.join(dst), &bytes)?;
        }
    }
    Ok(())
}

pub fn read_trials(out: &Path) -> Result<Vec<TrialReport>> {
    let path = out.join(TRIALS_FILE);
    let text = std::fs::read_to_string(&path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}

/// Re-aggregates an existing output directory from its `trials.jsonl`,
/// checking that every referenced per-trial file exists.
pub fn report(out: &Path) -> Result<Vec<TrialReport>> {
    let mut reports = read_trials(out)?;
    reports.sort_by_key(|r| (r.cell, r.trial));
    for r in &reports {
        let paths = [
            &r.messages_pre_path,
            &r.messages_post_path,
            &r.cp_curve_path,
            &r.checkpoint_path,
        ];
        for p in paths.into_iter().flatten() {
            if !out.join(p).is_file() {
                return Err(Error::Format(format!(
                    "trial {} of cell {} references missing {p}",
                    r.trial, r.cell
                )));
            }
        }
    }
    for (k, name) in TABLE_FILES.iter().enumerate() {
        write_atomic(&out.join(name), table_csv(k, &reports).as_bytes())?;
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dummy(cell: usize, trial: usize, accuracy: f64) -> TrialReport {
        TrialReport {
            cell,
            cell_label: "strict-shared-10".into(),
            strictness: Strictness::Strict,
            sharing: Sharing::Shared,
            n_objects: 10,
            trial,
            seed: 1,
            final_loss: Some(0.5),
            untrained_accuracy: 0.1,
            accuracy,
            f1: None,
            untrained_f1: None,
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
            messages_pre_path: None,
            messages_post_path: None,
            cp_curve_path: None,
            checkpoint_path: None,
        }
    }

    #[test]
    fn summary_values() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        let std = (5.0f64 / 3.0).sqrt();
        assert!((s.std - std).abs() < 1e-15);
        assert!((s.sem - std / 2.0).abs() < 1e-15);
        assert_eq!(summarize(&[7.0]).unwrap().std, 0.0);
        assert!(summarize(&[]).is_none());
    }

    #[test]
    fn table_layout() {
        let reports = vec![dummy(0, 0, 0.5), dummy(0, 1, 0.7), dummy(1, 0, 0.25)];
        let t1 = table_csv(0, &reports);
        let lines: Vec<&str> = t1.lines().collect();
        assert_eq!(
            lines[0],
            "cell,label,strictness,sharing,n_objects,n_trials,accuracy_mean,accuracy_std,accuracy_sem,\
             untrained_accuracy_mean,untrained_accuracy_std,untrained_accuracy_sem"
        );
        assert!(lines[1].starts_with("0,strict-shared-10,strict,shared,10,2,0.6,"));
        assert!(lines[2].starts_with("1,strict-shared-10,strict,shared,10,1,0.25,0,0,"));
        assert!(!t1.contains('\r'));
        let t2 = table_csv(1, &reports);
        assert!(t2.lines().nth(1).unwrap().ends_with(",2,,,,,,"));
    }

    #[test]
    fn atomic_write_and_unwritable_dir() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_atomic(&p, b"a\n").unwrap();
        write_atomic(&p, b"b\n").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"b\n");
        let bad = dir.path().join("missing").join("x.csv");
        assert!(matches!(write_atomic(&bad, b"a"), Err(Error::Output { .. })));
    }

    #[test]
    fn jsonl_round_trip() {
        let reports = vec![dummy(0, 0, 0.5), dummy(0, 1, 0.1 + 0.2)];
        let dir = tempfile::tempdir().unwrap();
        write_reports(dir.path(), &reports).unwrap();
        assert_eq!(read_trials(dir.path()).unwrap(), reports);
        let before = std::fs::read(dir.path().join(TABLE_FILES[0])).unwrap();
        report(dir.path()).unwrap();
        assert_eq!(std::fs::read(dir.path().join(TABLE_FILES[0])).unwrap(), before);
    }

    #[test]
    fn report_flags_missing_files() {
        let mut r = dummy(0, 0, 0.5);
        r.cp_curve_path = Some("nope.csv".into());
        let dir = tempfile::tempdir().unwrap();
        write_reports(dir.path(), &[r]).unwrap();
        assert!(report(dir.path()).is_err());
    }
}
