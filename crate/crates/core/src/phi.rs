//! The phi-functions `phi_0(z) = e^z`, `phi_{k+1}(z) = (phi_k(z) - 1/k!) / z`.
//!
//! All linear operators in this crate are diagonal, so scalar evaluation is
//! enough. Three evaluation paths are used depending on `|z|`:
//!
//! * `|z| < 1`: truncated Taylor series `sum_j z^j / (j+k)!` (30 terms).
//! * `1 <= |z| < 16`: series at `z / 2^s` followed by `s` doubling steps
//!   `phi_k(2z) = 2^-k [phi_0(z) phi_k(z) + sum_{j=1..k} phi_j(z) / (k-j)!]`.
//! * `|z| >= 16`: `phi_0 = exp(z)` and the forward recurrence, which loses at
//!   most a factor `k!/|z|^k` of accuracy there.
//!
//! `phi_0` is always taken from `exp(z)` directly.

use std::collections::HashMap;
use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Highest phi index supported by [`phi_scalar`] and [`phi_table`].
pub const MAX_PHI_ORDER: usize = 8;

pub(crate) const SERIES_RADIUS: f64 = 1.0;
pub(crate) const RECURRENCE_RADIUS: f64 = 16.0;
const SERIES_TERMS: usize = 30;

const INV_FACTORIAL: [f64; 12] = [
    1.0,
    1.0,
    1.0 / 2.0,
    1.0 / 6.0,
    1.0 / 24.0,
    1.0 / 120.0,
    1.0 / 720.0,
    1.0 / 5040.0,
    1.0 / 40320.0,
    1.0 / 362880.0,
    1.0 / 3628800.0,
    1.0 / 39916800.0,
];

/// `1/k!` for `k <= 11`.
pub fn inv_factorial(k: usize) -> f64 {
    INV_FACTORIAL[k]
}

/// Taylor series for a single `phi_k`, Horner form.
pub(crate) fn phi_series(k: usize, z: Complex64) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    for j in (1..SERIES_TERMS).rev() {
        acc = acc * z / (k + j) as f64 + 1.0;
    }
    acc * INV_FACTORIAL[k]
}

/// Scaling-and-squaring path: valid for any `z`, used in the middle band.
pub(crate) fn phi_doubling(kmax: usize, z: Complex64) -> Vec<Complex64> {
    let mut squarings = 0u32;
    let mut scaled = z;
    while scaled.norm() >= SERIES_RADIUS {
        scaled /= 2.0;
        squarings += 1;
    }
    let mut phis: Vec<Complex64> = (0..=kmax).map(|k| phi_series(k, scaled)).collect();
    let mut next = vec![Complex64::new(0.0, 0.0); kmax + 1];
    for _ in 0..squarings {
        for k in 0..=kmax {
            let mut acc = phis[0] * phis[k];
            for j in 1..=k {
                acc += phis[j] * INV_FACTORIAL[k - j];
            }
            next[k] = acc * 0.5f64.powi(k as i32);
        }
        std::mem::swap(&mut phis, &mut next);
    }
    phis
}

/// Forward recurrence from `exp(z)`; only accurate for large `|z|`.
pub(crate) fn phi_recurrence(kmax: usize, z: Complex64) -> Vec<Complex64> {
    // Multiplying by 1/z keeps phi_k representable when exp(z) is near the
    // top of the f64 range.
    let inv = z.inv();
    let mut phis = Vec::with_capacity(kmax + 1);
    phis.push(z.exp());
    for k in 0..kmax {
        let next = (phis[k] - INV_FACTORIAL[k]) * inv;
        phis.push(next);
    }
    phis
}

/// `phi_0(z), ..., phi_kmax(z)`.
pub fn phi_all(kmax: usize, z: Complex64) -> Result<Vec<Complex64>> {
    if kmax > MAX_PHI_ORDER {
        return Err(invalid(format!("phi order {kmax} exceeds {MAX_PHI_ORDER}")));
    }
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(invalid(format!("non-finite phi argument {z}")));
    }
    let r = z.norm();
    let mut phis = if r < SERIES_RADIUS {
        (0..=kmax).map(|k| phi_series(k, z)).collect()
    } else if r < RECURRENCE_RADIUS {
        phi_doubling(kmax, z)
    } else {
        phi_recurrence(kmax, z)
    };
    phis[0] = z.exp();
    Ok(phis)
}

/// `phi_k(z)` for `k <= 8`.
pub fn phi_scalar(k: usize, z: Complex64) -> Result<Complex64> {
    Ok(phi_all(k, z)?[k])
}

/// phi-function values over a scaled diagonal operator: `values[k][i] = phi_k(h * l_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiTable {
    scale: f64,
    args: Vec<Complex64>,
    values: Vec<Vec<Complex64>>,
}

impl PhiTable {
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn args(&self) -> &[Complex64] {
        &self.args
    }

    /// Highest tabulated index `K`.
    pub fn order(&self) -> usize {
        self.values.len() - 1
    }

    /// `phi_k` over every diagonal entry.
    pub fn phi(&self, k: usize) -> &[Complex64] {
        &self.values[k]
    }

    pub fn len(&self) -> usize {
        self.args.len()
    }

    pub fn is_empty(&self) -> bool {
        self.args.is_empty()
    }
}

/// Tabulates `phi_0..phi_K` at `h * l_i` for every diagonal entry.
pub fn phi_table(order: usize, linear: &[Complex64], h: f64) -> Result<PhiTable> {
    if order < 4 {
        return Err(invalid(format!(
            "phi table order must be >= 4, got {order}"
        )));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!(
            "phi table scale must be positive, got {h}"
        )));
    }
    if linear.is_empty() {
        return Err(invalid("empty diagonal operator"));
    }
    let args: Vec<Complex64> = linear.iter().map(|l| l * h).collect();
    let mut values = vec![Vec::with_capacity(args.len()); order + 1];
    for z in &args {
        for (k, v) in phi_all(order, *z)?.into_iter().enumerate() {
            values[k].push(v);
        }
    }
    Ok(PhiTable {
        scale: h,
        args,
        values,
    })
}

/// Tables keyed by (operator, stepsize, order). Operators are identified by a
/// hash of their entries' bit patterns.
#[derive(Debug, Default)]
pub struct PhiCache {
    tables: HashMap<(u64, u64, usize), Arc<PhiTable>>,
}

impl PhiCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&mut self, order: usize, linear: &[Complex64], h: f64) -> Result<Arc<PhiTable>> {
        let key = (operator_fingerprint(linear), h.to_bits(), order);
        if let Some(table) = self.tables.get(&key) {
            return Ok(Arc::clone(table));
        }
        let table = Arc::new(phi_table(order, linear, h)?);
        self.tables.insert(key, Arc::clone(&table));
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }
}

fn operator_fingerprint(linear: &[Complex64]) -> u64 {
    let mut hasher = DefaultHasher::new();
    linear.len().hash(&mut hasher);
    for l in linear {
        l.re.to_bits().hash(&mut hasher);
        l.im.to_bits().hash(&mut hasher);
    }
    hasher.finish()
}
