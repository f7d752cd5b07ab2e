use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::runner::ResultRow;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

/// Median of a non-empty slice (mean of the middle pair for even length).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<LogLogFit> {
    if xs.len() != ys.len() {
        return Err(Error::pre("x and y lengths differ"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::pre("log-log fit needs positive finite values"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let m = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / m;
    let my = ly.iter().sum::<f64>() / m;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::pre("log-log fit needs at least two distinct x values"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = lx.iter().zip(&ly).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(LogLogFit { slope, intercept, residual: (sse / m).sqrt() })
}

/// Successful rows grouped by the value of grid key `x`, ascending.
pub(crate) fn group_by_point<'a>(rows: &'a [ResultRow], x: &str) -> Result<BTreeMap<OrdF64, Vec<&'a ResultRow>>> {
    let mut groups: BTreeMap<OrdF64, Vec<&ResultRow>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.is_ok()) {
        let v = row
            .point
            .get(x)
            .ok_or_else(|| Error::pre(format!("{x:?} is not a grid parameter of these rows")))?;
        groups.entry(OrdF64(*v)).or_default().push(row);
    }
    Ok(groups)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct OrdF64(pub f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Median of metric `y` per value of grid key `x`.
pub fn medians_by(rows: &[ResultRow], x: &str, y: &str) -> Result<Vec<(f64, f64)>> {
    group_by_point(rows, x)?
        .into_iter()
        .map(|(k, group)| {
            let vals: Vec<f64> = group.iter().filter_map(|r| r.metrics.get(y).copied()).collect();
            let m = median(&vals).ok_or_else(|| Error::pre(format!("no values of {y:?} at {x} = {}", k.0)))?;
            Ok((k.0, m))
        })
        .collect()
}

/// Median of metric `y` at each full grid point, in order of first
/// appearance.
pub fn medians_by_all(rows: &[ResultRow], y: &str) -> Result<Vec<f64>> {
    let mut keys: Vec<Vec<(String, OrdF64)>> = Vec::new();
    let mut vals: Vec<Vec<f64>> = Vec::new();
    for row in rows.iter().filter(|r| r.is_ok()) {
        let key: Vec<(String, OrdF64)> = row.point.iter().map(|(k, v)| (k.clone(), OrdF64(*v))).collect();
        let i = match keys.iter().position(|k| *k == key) {
            Some(i) => i,
            None => {
                keys.push(key);
                vals.push(Vec::new());
                keys.len() - 1
            }
        };
        if let Some(v) = row.metrics.get(y) {
            vals[i].push(*v);
        }
    }
    if keys.is_empty() {
        return Err(Error::pre("no successful rows"));
    }
    vals.iter().map(|v| median(v).ok_or_else(|| Error::pre(format!("missing values of {y:?}")))).collect()
}

/// Fits `ln median(y) = slope ln x + intercept` over grid values of `x`.
pub fn fit_loglog_slope(rows: &[ResultRow], x_field: &str, y_field: &str) -> Result<LogLogFit> {
    let pts = medians_by(rows, x_field, y_field)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    fit_loglog(&xs, &ys)
}
