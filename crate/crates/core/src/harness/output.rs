//! CSV and metadata files for sweep results.
//!
//! The CSV has one `trial` record per solver run followed by one `aggregate`
//! record per `(m, solver)` cell. Columns:
//!
//! | column                   | trial record            | aggregate record         |
//! |--------------------------|-------------------------|--------------------------|
//! | `record`                 | `trial`                 | `aggregate`              |
//! | `m`, `solver`            | grid point              | grid point               |
//! | `trial`                  | trial index             | empty                    |
//! | `status`                 | `ok`/`relaxed`/`failed` | empty                    |
//! | `count`                  | empty                   | successful runs          |
//! | `d_s` … `tau2`           | metrics of the run      | means over the cell      |
//! | `d_s_std`, `d_s_errbar`  | empty                   | sample std, half of it   |
//! | `per_coord_error_std`, `per_coord_error_errbar` | empty | same for that error |
//!
//! Floats are written with 17 significant digits so that they read back to
//! the same value. Wall-clock times are kept out of the CSV, in a JSON
//! sidecar, so that identical configs give byte-identical CSV files.

use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{aggregate, CellAggregate, ExperimentConfig, RowStatus, SweepResult, SweepRow};
use crate::error::{Error, Result};

pub const CSV_COLUMNS: [&str; 16] = [
    "record",
    "m",
    "solver",
    "trial",
    "status",
    "count",
    "d_s",
    "l2_error",
    "per_coord_error",
    "final_loss",
    "tau1",
    "tau2",
    "d_s_std",
    "d_s_errbar",
    "per_coord_error_std",
    "per_coord_error_errbar",
];

/// Relative tolerance when checking stored aggregates against the rows.
const AGGREGATE_TOL: f64 = 1e-12;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

pub fn write_csv<W: std::io::Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in &result.rows {
        w.write_record([
            "trial".to_string(),
            r.m.to_string(),
            r.solver.to_string(),
            r.trial.to_string(),
            r.status.to_string(),
            String::new(),
            num(r.d_s),
            num(r.l2_error),
            num(r.per_coord_error),
            num(r.final_loss),
            num(r.tau1),
            num(r.tau2),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
        ])
        .map_err(csv_err)?;
    }
    for a in &result.aggregates {
        w.write_record([
            "aggregate".to_string(),
            a.m.to_string(),
            a.solver.to_string(),
            String::new(),
            String::new(),
            a.count.to_string(),
            num(a.d_s),
            num(a.l2_error),
            num(a.per_coord_error),
            num(a.final_loss),
            num(a.tau1),
            num(a.tau2),
            num(a.d_s_std),
            num(a.d_s_errbar),
            num(a.per_coord_error_std),
            num(a.per_coord_error_errbar),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn close(a: f64, b: f64) -> bool {
    (a.is_nan() && b.is_nan()) || a == b || (a - b).abs() <= AGGREGATE_TOL * a.abs().max(b.abs())
}

fn same_aggregate(a: &CellAggregate, b: &CellAggregate) -> bool {
    a.m == b.m
        && a.solver == b.solver
        && a.count == b.count
        && [
            (a.d_s, b.d_s),
            (a.l2_error, b.l2_error),
            (a.per_coord_error, b.per_coord_error),
            (a.final_loss, b.final_loss),
            (a.tau1, b.tau1),
            (a.tau2, b.tau2),
            (a.d_s_std, b.d_s_std),
            (a.d_s_errbar, b.d_s_errbar),
            (a.per_coord_error_std, b.per_coord_error_std),
            (a.per_coord_error_errbar, b.per_coord_error_errbar),
        ]
        .iter()
        .all(|&(x, y)| close(x, y))
}

/// Reads a CSV written by [`write_csv`] and checks that the stored
/// aggregates agree with aggregates recomputed from the trial rows.
pub fn read_csv<R: std::io::Read>(input: R) -> Result<SweepResult> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_COLUMNS) {
        return Err(Error::Format(format!("unexpected CSV header {header:?}")));
    }
    let mut rows = Vec::new();
    let mut stored = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |col: &str| Error::Format(format!("record {}: bad {col}", line + 1));
        let int = |i: usize| rec[i].parse::<usize>().map_err(|_| bad(CSV_COLUMNS[i]));
        let float = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(CSV_COLUMNS[i]));
        let m = int(1)?;
        let solver = rec[2].parse().map_err(|_| bad("solver"))?;
        match &rec[0] {
            "trial" => rows.push(SweepRow {
                m,
                solver,
                trial: int(3)?,
                status: rec[4].parse::<RowStatus>()?,
                d_s: float(6)?,
                l2_error: float(7)?,
                per_coord_error: float(8)?,
                final_loss: float(9)?,
                tau1: float(10)?,
                tau2: float(11)?,
                wall_seconds: 0.0,
            }),
            "aggregate" => stored.push(CellAggregate {
                m,
                solver,
                count: int(5)?,
                d_s: float(6)?,
                l2_error: float(7)?,
                per_coord_error: float(8)?,
                final_loss: float(9)?,
                tau1: float(10)?,
                tau2: float(11)?,
                d_s_std: float(12)?,
                d_s_errbar: float(13)?,
                per_coord_error_std: float(14)?,
                per_coord_error_errbar: float(15)?,
            }),
            _ => return Err(bad("record kind")),
        }
    }
    let recomputed = aggregate(&rows);
    if recomputed.len() != stored.len()
        || recomputed
            .iter()
            .zip(&stored)
            .any(|(a, b)| !same_aggregate(a, b))
    {
        return Err(Error::Format(
            "stored aggregates do not match the trial records".into(),
        ));
    }
    Ok(SweepResult {
        rows,
        aggregates: stored,
    })
}

#[derive(Serialize)]
struct RowTime {
    m: usize,
    solver: String,
    trial: usize,
    wall_seconds: f64,
}

#[derive(Serialize)]
struct Meta<'a> {
    created_unix_seconds: u64,
    total_wall_seconds: f64,
    config: &'a ExperimentConfig,
    rows: Vec<RowTime>,
}

/// `<csv path>.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    let mut s = csv_path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

/// Writes wall-clock timings and the effective config next to the CSV.
pub fn write_meta(
    csv_path: &Path,
    config: &ExperimentConfig,
    result: &SweepResult,
    total_wall_seconds: f64,
) -> Result<PathBuf> {
    let meta = Meta {
        created_unix_seconds: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        total_wall_seconds,
        config,
        rows: result
            .rows
            .iter()
            .map(|r| RowTime {
                m: r.m,
                solver: r.solver.to_string(),
                trial: r.trial,
                wall_seconds: r.wall_seconds,
            })
            .collect(),
    };
    let path = meta_path(csv_path);
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(&path, text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recover::Solver;

    fn row(m: usize, solver: Solver, trial: usize, d_s: f64) -> SweepRow {
        SweepRow {
            m,
            solver,
            trial,
            status: RowStatus::Ok,
            d_s,
            l2_error: 2.0 * d_s,
            per_coord_error: d_s / 3.0,
            final_loss: 0.1 * trial as f64,
            tau1: 0.0,
            tau2: 1.0 / 7.0,
            wall_seconds: 0.0,
        }
    }

    fn result(rows: Vec<SweepRow>) -> SweepResult {
        let aggregates = aggregate(&rows);
        SweepResult { rows, aggregates }
    }

    fn round_trip(res: &SweepResult) -> SweepResult {
        let mut buf = Vec::new();
        write_csv(res, &mut buf).unwrap();
        read_csv(buf.as_slice()).unwrap()
    }

    #[test]
    fn single_row_round_trips_losslessly() {
        let res = result(vec![row(50, Solver::Biht, 0, 0.1 + 0.2)]);
        let back = round_trip(&res);
        assert_eq!(back.rows[0].d_s, 0.1 + 0.2);
        assert_eq!(back.rows[0].tau2, 1.0 / 7.0);
        assert_eq!(back.aggregates, res.aggregates);
        assert_eq!(back.aggregates[0].d_s_std, 0.0);
    }

    #[test]
    fn aggregates_match_rows_and_half_std() {
        let rows = vec![
            row(50, Solver::Pgd1Bit, 0, 0.1),
            row(50, Solver::Pgd1Bit, 1, 0.3),
            row(50, Solver::Pgd1Bit, 2, 0.2),
            row(100, Solver::Pgd1Bit, 0, 0.05),
        ];
        let res = result(rows);
        let a = &res.aggregates[0];
        assert_eq!(a.count, 3);
        assert!((a.d_s - 0.2).abs() < 1e-15);
        assert!((a.d_s_std - 0.1).abs() < 1e-15);
        assert_eq!(a.d_s_errbar, 0.5 * a.d_s_std);
        assert_eq!(round_trip(&res), res);
    }

    #[test]
    fn failed_rows_are_excluded_from_aggregates() {
        let mut bad = row(50, Solver::Lasso1Bit, 1, f64::NAN);
        bad.status = RowStatus::Failed;
        let res = result(vec![row(50, Solver::Lasso1Bit, 0, 0.4), bad]);
        assert_eq!(res.aggregates[0].count, 1);
        assert_eq!(res.aggregates[0].d_s, 0.4);
        let back = round_trip(&res);
        assert!(back.rows[1].d_s.is_nan());
    }

    #[test]
    fn tampered_aggregate_is_rejected() {
        let res = result(vec![
            row(50, Solver::Biht, 0, 0.25),
            row(50, Solver::Biht, 1, 0.5),
        ]);
        let mut buf = Vec::new();
        write_csv(&res, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let tampered = text.replace(&num(0.375), &num(0.376));
        assert_ne!(tampered, text);
        assert!(matches!(
            read_csv(tampered.as_bytes()),
            Err(Error::Format(_))
        ));
        let wrong_header = text.replacen("record", "kind", 1);
        assert!(read_csv(wrong_header.as_bytes()).is_err());
    }

    #[test]
    fn meta_sits_next_to_csv() {
        assert_eq!(
            meta_path(Path::new("out/a.csv")),
            PathBuf::from("out/a.csv.meta.json")
        );
    }
}
