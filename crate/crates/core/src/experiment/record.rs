use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Finite runs with a larger relative error are reported as not converged.
pub const NONCONVERGED_LIMIT: f64 = 1e-1;

/// `|y_ref - y|_inf / |y_ref|_inf`.
pub fn relative_error(y: &[Complex64], y_ref: &[Complex64]) -> Result<f64> {
    if y.len() != y_ref.len() {
        return Err(invalid(format!(
            "lengths differ: {} vs {}",
            y.len(),
            y_ref.len()
        )));
    }
    let denom = y_ref.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if denom == 0.0 {
        return Err(invalid("reference has zero norm"));
    }
    let num = y
        .iter()
        .zip(y_ref)
        .map(|(a, b)| (b - a).norm())
        .fold(0.0, f64::max);
    Ok(num / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordStatus {
    Ok,
    Blowup,
    NonConverged,
}

impl RecordStatus {
    pub fn name(self) -> &'static str {
        match self {
            RecordStatus::Ok => "ok",
            RecordStatus::Blowup => "blowup",
            RecordStatus::NonConverged => "nonconverged",
        }
    }

    pub fn classify(error: f64) -> Self {
        if error.is_finite() && error <= NONCONVERGED_LIMIT {
            RecordStatus::Ok
        } else {
            RecordStatus::NonConverged
        }
    }
}

/// One row of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub method: String,
    pub modification: String,
    pub n_steps: usize,
    pub h: f64,
    /// `None` after a blowup.
    pub relative_error: Option<f64>,
    pub wall_time_seconds: f64,
    pub status: RecordStatus,
    /// Against the previous step count of the same method and modification.
    pub observed_order: Option<f64>,
}

pub const RUN_CSV_HEADER: &str =
    "method,modification,n_steps,h,relative_error,wall_time_seconds,status,observed_order";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

impl RunRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.method,
            self.modification,
            self.n_steps,
            num(self.h),
            opt(self.relative_error),
            num(self.wall_time_seconds),
            self.status.name(),
            opt(self.observed_order)
        )
    }
}

pub fn records_to_csv(records: &[RunRecord]) -> String {
    let mut s = String::from(RUN_CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

/// `ln(e0 / e1) / ln(n1 / n0)`; `log2(e0 / e1)` when the step count doubles.
pub fn observed_order(e0: f64, e1: f64, n0: usize, n1: usize) -> Option<f64> {
    if !(e0 > 0.0 && e1 > 0.0 && e0.is_finite() && e1.is_finite()) || n1 <= n0 {
        return None;
    }
    Some((e0 / e1).ln() / (n1 as f64 / n0 as f64).ln())
}

/// Fill `observed_order` for consecutive ok records of each
/// (method, modification) pair, in step order.
pub fn annotate_orders(records: &mut [RunRecord]) {
    for i in 0..records.len() {
        records[i].observed_order = None;
        let prev = (0..i).rev().find(|&j| {
            records[j].method == records[i].method
                && records[j].modification == records[i].modification
                && records[j].n_steps < records[i].n_steps
        });
        let Some(j) = prev else { continue };
        let (a, b) = (&records[j], &records[i]);
        if a.status == RecordStatus::Ok && b.status == RecordStatus::Ok {
            if let (Some(e0), Some(e1)) = (a.relative_error, b.relative_error) {
                records[i].observed_order = observed_order(e0, e1, a.n_steps, b.n_steps);
            }
        }
    }
}

/// Least-squares slope of `-log(error)` against `log(n_steps)`.
pub fn fitted_order(points: &[(usize, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, e)| *n > 0 && *e > 0.0 && e.is_finite())
        .map(|&(n, e)| ((n as f64).ln(), -e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// One row of a long-time study.
#[derive(Debug, Clone, PartialEq)]
pub struct LongtimeRecord {
    pub method: String,
    pub modification: String,
    pub t: f64,
    pub relative_error: Option<f64>,
    /// Set on rows past a blowup.
    pub last_finite_time: Option<f64>,
}

pub const LONGTIME_CSV_HEADER: &str =
    "method,modification,t,relative_error,status,last_finite_time";

pub fn longtime_to_csv(records: &[LongtimeRecord]) -> String {
    let mut s = String::from(LONGTIME_CSV_HEADER);
    s.push('\n');
    for r in records {
        let status = if r.last_finite_time.is_some() {
            "blowup"
        } else {
            "ok"
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.method,
            r.modification,
            num(r.t),
            opt(r.relative_error),
            status,
            opt(r.last_finite_time)
        );
    }
    s
}
