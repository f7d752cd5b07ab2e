use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::config::{Check, ExperimentSpec, Extreme};
use super::fit::{self, group_by_point};
use super::runner::ResultRow;

/// Round-trip exact: 17 significant digits.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// `scenario, <point keys>, trial, <metrics>, iterations, <flags>, status,
/// wall_ms`, each group in alphabetical order over the union of all rows.
pub fn csv_header(rows: &[ResultRow]) -> Vec<String> {
    let mut points = BTreeSet::new();
    let mut metrics = BTreeSet::new();
    let mut flags = BTreeSet::new();
    for r in rows {
        points.extend(r.point.keys().cloned());
        metrics.extend(r.metrics.keys().cloned());
        flags.extend(r.flags.keys().cloned());
    }
    let mut h = vec!["scenario".to_owned()];
    h.extend(points);
    h.push("trial".into());
    h.extend(metrics);
    h.push("iterations".into());
    h.extend(flags);
    h.push("status".into());
    h.push("wall_ms".into());
    h
}

fn csv_err(path: &Path, source: csv::Error) -> Error {
    Error::Csv { path: path.to_path_buf(), source }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W, path_label: &Path) -> Result<()> {
    let header = csv_header(rows);
    let t = header.iter().position(|c| c == "trial").expect("trial column");
    let it = header.iter().position(|c| c == "iterations").expect("iterations column");
    let st = header.iter().position(|c| c == "status").expect("status column");
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header).map_err(|e| csv_err(path_label, e))?;
    for r in rows {
        let mut rec = Vec::with_capacity(header.len());
        rec.push(r.scenario.clone());
        for k in &header[1..t] {
            rec.push(r.point.get(k).map(|v| format_float(*v)).unwrap_or_default());
        }
        rec.push(r.trial.to_string());
        for k in &header[t + 1..it] {
            rec.push(r.metrics.get(k).map(|v| format_float(*v)).unwrap_or_default());
        }
        rec.push(r.iterations.map(|i| i.to_string()).unwrap_or_default());
        for k in &header[it + 1..st] {
            rec.push(r.flags.get(k).map(|b| b.to_string()).unwrap_or_default());
        }
        rec.push(r.status.clone());
        rec.push(format_float(r.wall_ms));
        w.write_record(&rec).map_err(|e| csv_err(path_label, e))?;
    }
    w.flush().map_err(|source| Error::Io { path: path_label.to_path_buf(), source })
}

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    write_csv(rows, std::io::BufWriter::new(f), path)
}

pub fn read_csv<R: Read>(input: R, path_label: &Path) -> Result<Vec<ResultRow>> {
    let bad = |m: String| Error::Config(format!("{}: {m}", path_label.display()));
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> =
        rdr.headers().map_err(|e| csv_err(path_label, e))?.iter().map(str::to_owned).collect();
    let find = |name: &str| header.iter().position(|c| c == name).ok_or_else(|| bad(format!("missing column {name:?}")));
    let (t, it, st) = (find("trial")?, find("iterations")?, find("status")?);
    if header.first().map(String::as_str) != Some("scenario") || !(t < it && it < st) || header.len() != st + 2 {
        return Err(bad("unexpected column layout".into()));
    }
    let float = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path_label, e))?;
        let mut row = ResultRow {
            scenario: rec[0].to_owned(),
            point: BTreeMap::new(),
            trial: rec[t].parse().map_err(|_| bad(format!("bad trial {:?}", &rec[t])))?,
            metrics: BTreeMap::new(),
            iterations: None,
            flags: BTreeMap::new(),
            status: rec[st].to_owned(),
            wall_ms: float(&rec[st + 1])?,
        };
        for c in 1..t {
            if !rec[c].is_empty() {
                row.point.insert(header[c].clone(), float(&rec[c])?);
            }
        }
        for c in t + 1..it {
            if !rec[c].is_empty() {
                row.metrics.insert(header[c].clone(), float(&rec[c])?);
            }
        }
        if !rec[it].is_empty() {
            row.iterations = Some(rec[it].parse().map_err(|_| bad(format!("bad iterations {:?}", &rec[it])))?);
        }
        for c in it + 1..st {
            match &rec[c] {
                "" => {}
                "true" => {
                    row.flags.insert(header[c].clone(), true);
                }
                "false" => {
                    row.flags.insert(header[c].clone(), false);
                }
                other => return Err(bad(format!("bad flag {other:?}"))),
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn parse_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let f = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_csv(f, path)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub description: String,
    pub passed: bool,
}

fn flag_fraction(rows: &[&ResultRow], flag: &str) -> Option<(f64, usize)> {
    let vals: Vec<bool> = rows.iter().filter_map(|r| r.flags.get(flag).copied()).collect();
    (!vals.is_empty()).then(|| (vals.iter().filter(|b| **b).count() as f64 / vals.len() as f64, vals.len()))
}

fn evaluate(check: &Check, rows: &[ResultRow]) -> Result<CheckOutcome> {
    let out = |description: String, passed: bool| Ok(CheckOutcome { description, passed });
    match check {
        Check::NoErrors => {
            let bad = rows.iter().filter(|r| !r.is_ok()).count();
            out(format!("no failed jobs ({bad} failed of {})", rows.len()), bad == 0)
        }
        Check::Slope { x, y, min, max } => {
            let f = fit::fit_loglog_slope(rows, x, y)?;
            out(
                format!("slope of median {y} vs {x} = {:.4} in [{min}, {max}]", f.slope),
                f.slope >= *min && f.slope <= *max,
            )
        }
        Check::MedianBelow { y, bound } => {
            let ys = fit::medians_by_all(rows, y)?;
            let bs = fit::medians_by_all(rows, bound)?;
            let worst = ys.iter().zip(&bs).map(|(a, b)| a / b).fold(0.0, f64::max);
            out(format!("median {y} <= median {bound} at every point (worst ratio {worst:.4})"), worst <= 1.0)
        }
        Check::FlagFraction { flag, min } => {
            let all: Vec<&ResultRow> = rows.iter().filter(|r| r.is_ok()).collect();
            let (f, m) = flag_fraction(&all, flag).ok_or_else(|| Error::pre(format!("no values of flag {flag:?}")))?;
            out(format!("fraction of {flag} = {f:.4} over {m} rows, need >= {min}"), f >= *min)
        }
        Check::FlagFractionAt { flag, x, at, min, max } => {
            let groups = group_by_point(rows, x)?;
            let (key, group) = match at {
                Extreme::Lowest => groups.iter().next(),
                Extreme::Highest => groups.iter().next_back(),
            }
            .ok_or_else(|| Error::pre("no successful rows"))?;
            let (f, _) = flag_fraction(group, flag).ok_or_else(|| Error::pre(format!("no values of flag {flag:?}")))?;
            let ok = min.is_none_or(|m| f >= m) && max.is_none_or(|m| f <= m);
            out(format!("fraction of {flag} at {x} = {} is {f:.4} (min {min:?}, max {max:?})", key.0), ok)
        }
        Check::MonotoneFlag { flag, x, sigmas } => {
            let groups = group_by_point(rows, x)?;
            let fr: Vec<(f64, usize)> = groups.values().filter_map(|g| flag_fraction(g, flag)).collect();
            let mut worst = 0.0f64;
            let mut ok = true;
            for w in fr.windows(2) {
                let (p1, m1) = w[0];
                let (p2, m2) = w[1];
                let pbar = 0.5 * (p1 + p2);
                let se = (pbar * (1.0 - pbar) * (1.0 / m1 as f64 + 1.0 / m2 as f64)).sqrt();
                let drop = p1 - p2;
                worst = worst.max(drop);
                if drop > sigmas * se + 1e-12 {
                    ok = false;
                }
            }
            out(format!("fraction of {flag} non-decreasing in {x} within {sigmas} sigma (largest drop {worst:.4})"), ok)
        }
    }
}

/// Evaluates every configured check; an evaluation error counts as a
/// failure with its message.
pub fn evaluate_checks(spec: &ExperimentSpec, rows: &[ResultRow]) -> Vec<CheckOutcome> {
    spec.checks
        .iter()
        .map(|c| {
            evaluate(c, rows).unwrap_or_else(|e| CheckOutcome { description: format!("{c:?}: {e}"), passed: false })
        })
        .collect()
}

pub fn render_report(spec: &ExperimentSpec, rows: &[ResultRow], checks: &[CheckOutcome]) -> String {
    let mut s = String::new();
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    let _ = writeln!(s, "scenario: {}", spec.scenario.as_str());
    let _ = writeln!(s, "seed: {}", spec.seed);
    let _ = writeln!(s, "rows: {} ({} failed)", rows.len(), failed);
    let header = csv_header(rows);
    let metrics: Vec<&String> = header
        .iter()
        .skip_while(|c| *c != "trial")
        .skip(1)
        .take_while(|c| *c != "iterations")
        .collect();
    for key in spec.grid.keys() {
        if spec.grid[key].len() < 2 {
            continue;
        }
        let _ = writeln!(s, "\nmedians by {key}:");
        for m in &metrics {
            if let Ok(pts) = fit::medians_by(rows, key, m) {
                let cells: Vec<String> = pts.iter().map(|(x, y)| format!("{x}: {y:.6e}")).collect();
                let _ = write!(s, "  {m}: {}", cells.join(", "));
                if let Ok(f) = fit::fit_loglog_slope(rows, key, m) {
                    let _ = write!(s, "  [log-log slope {:.4}]", f.slope);
                }
                let _ = writeln!(s);
            }
        }
    }
    if !checks.is_empty() {
        let _ = writeln!(s, "\nchecks:");
        for c in checks {
            let _ = writeln!(s, "{} {}", if c.passed { "PASS" } else { "FAIL" }, c.description);
        }
    }
    s
}

/// Plots every metric against the first swept grid key on log-log axes.
pub fn gnuplot_script(spec: &ExperimentSpec, rows: &[ResultRow], csv_name: &str) -> String {
    let header = csv_header(rows);
    let x = spec.grid.iter().find(|(_, v)| v.len() > 1).or_else(|| spec.grid.iter().next()).map(|(k, _)| k.clone());
    let col = |name: &str| header.iter().position(|c| c == name).map(|i| i + 1);
    let mut s = String::new();
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set logscale xy");
    let _ = writeln!(s, "set terminal pngcairo size 900,600");
    let _ = writeln!(s, "set output '{}.png'", csv_name.trim_end_matches(".csv"));
    if let Some(x) = x {
        let xc = col(&x).unwrap_or(2);
        let _ = writeln!(s, "set xlabel '{x}'");
        let plots: Vec<String> = header
            .iter()
            .skip_while(|c| *c != "trial")
            .skip(1)
            .take_while(|c| *c != "iterations")
            .filter_map(|m| col(m).map(|mc| format!("'{csv_name}' using {xc}:{mc} with points title '{m}'")))
            .collect();
        if !plots.is_empty() {
            let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
        }
    }
    s
}

fn sibling(path: &Path, ext: &str) -> PathBuf {
    path.with_extension(ext)
}

/// Writes the plain-text report to `path` and a gnuplot script next to it
/// (`.gp`) that plots `csv_path`.
pub fn emit_report(spec: &ExperimentSpec, rows: &[ResultRow], path: &Path, csv_path: &Path) -> Result<Vec<CheckOutcome>> {
    let checks = evaluate_checks(spec, rows);
    let io = |p: &Path| {
        let p = p.to_path_buf();
        move |source| Error::Io { path: p, source }
    };
    std::fs::write(path, render_report(spec, rows, &checks)).map_err(io(path))?;
    let csv_name = csv_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let gp = sibling(path, "gp");
    std::fs::write(&gp, gnuplot_script(spec, rows, &csv_name)).map_err(io(&gp))?;
    Ok(checks)
}
