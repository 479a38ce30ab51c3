use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{self, Write};

use super::generate::Bucket;
use super::run::{RunRecord, Status};

pub const CSV_HEADER: &str = "suite,instance,ss_log2,solver,status,ms,value,avg_pareto,avg_dim";

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:e}")).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn emit_csv<W: Write>(records: &[RunRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{:.4},{},{},{:.3},{},{},{}",
            csv_field(&r.suite),
            r.instance,
            r.ss_log2,
            csv_field(&r.solver),
            r.status,
            r.ms,
            opt(r.value),
            opt(r.avg_pareto),
            opt(r.avg_dim),
        )?;
    }
    Ok(())
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn cell(x: Option<f64>, prec: usize) -> String {
    x.map(|v| format!("{v:.prec$}")).unwrap_or_else(|| "-".into())
}

/// One row per suite, search-space bucket and solver. `exact%` and `1%`
/// compare each ok value with the exact solver's value on the same instance.
pub fn emit_markdown(records: &[RunRecord]) -> String {
    let mut exact: BTreeMap<(&str, usize), f64> = BTreeMap::new();
    for r in records {
        if r.solver == "exact" && r.status == Status::Ok {
            if let Some(v) = r.value {
                exact.insert((&r.suite, r.instance), v);
            }
        }
    }
    let mut groups: BTreeMap<(&str, u64, usize), (String, Vec<&RunRecord>)> = BTreeMap::new();
    for r in records {
        let b = Bucket::standard_for(r.ss_log2);
        groups
            .entry((&r.suite, b.lo.to_bits(), r.solver_index))
            .or_insert_with(|| (b.to_string(), Vec::new()))
            .1
            .push(r);
    }
    let mut s = String::new();
    s.push_str("| suite | SS | solver | #Q | ok | timeout | skipped | error | mean ms | avg pareto | avg dim | exact% | 1% |\n");
    s.push_str("|---|---|---|---|---|---|---|---|---|---|---|---|---|\n");
    for ((suite, _, _), (bucket, rs)) in &groups {
        let count = |st: Status| rs.iter().filter(|r| r.status == st).count();
        let ok: Vec<&&RunRecord> = rs.iter().filter(|r| r.status == Status::Ok).collect();
        let compared: Vec<(f64, f64)> = ok
            .iter()
            .filter_map(|r| Some((r.value?, *exact.get(&(r.suite.as_str(), r.instance))?)))
            .collect();
        let frac = |tol: f64| {
            (!compared.is_empty()).then(|| {
                let hits = compared.iter().filter(|(v, e)| (v - e).abs() <= tol * e.abs().max(f64::MIN_POSITIVE)).count();
                100.0 * hits as f64 / compared.len() as f64
            })
        };
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            suite,
            bucket,
            rs[0].solver,
            rs.len(),
            ok.len(),
            count(Status::Timeout),
            count(Status::Skipped),
            count(Status::Error),
            cell(mean(ok.iter().map(|r| r.ms)), 2),
            cell(mean(ok.iter().filter_map(|r| r.avg_pareto)), 2),
            cell(mean(ok.iter().filter_map(|r| r.avg_dim)), 2),
            cell(frac(1e-9), 1),
            cell(frac(0.01), 1),
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(instance: usize, solver: &str, k: usize, ss: f64, status: Status, ms: f64, value: Option<f64>) -> RunRecord {
        RunRecord {
            suite: "s".into(),
            instance,
            ss_log2: ss,
            solver: solver.into(),
            solver_index: k,
            status,
            ms,
            value,
            avg_pareto: value.map(|_| 2.0 * ms),
            avg_dim: value.map(|_| 1.0),
            message: None,
        }
    }

    #[test]
    fn one_record_one_row() {
        let mut out = Vec::new();
        emit_csv(&[rec(0, "exact", 0, 3.0, Status::Ok, 1.5, Some(0.25))], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1].split(',').count(), 9);
        assert!(lines[1].starts_with("s,0,3.0000,exact,ok,1.500,2.5e-1,"));
    }

    #[test]
    fn aggregates_by_bucket() {
        let rs = vec![
            rec(0, "exact", 0, 12.0, Status::Ok, 1.0, Some(0.5)),
            rec(1, "exact", 0, 10.0, Status::Ok, 3.0, Some(0.5)),
            rec(2, "exact", 0, 15.0, Status::Timeout, 9.0, None),
            rec(3, "exact", 0, 4.0, Status::Ok, 7.0, Some(0.1)),
        ];
        let md = emit_markdown(&rs);
        let rows: Vec<&str> = md.lines().skip(2).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0], "| s | 0-10 | exact | 1 | 1 | 0 | 0 | 0 | 7.00 | 14.00 | 1.00 | 100.0 | 100.0 |");
        assert_eq!(rows[1], "| s | 10-20 | exact | 3 | 2 | 1 | 0 | 0 | 2.00 | 4.00 | 1.00 | 100.0 | 100.0 |");
    }
}
