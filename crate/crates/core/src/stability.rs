//! Linear stability on the non-diffusive partitioned Dahlquist equation
//! `y' = i l1 y + i l2 y`, with `i l1` treated exponentially (implicitly for
//! IMRK4) and `i l2` explicitly.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::integrators::{
    step_epbm5, EpbmPhis, EpbmTableau, MethodFamily, MethodSpec, Stepper, StepperState,
};
use crate::problem::ScalarSplitProblem;

/// Upper edge of the stable band.
pub const STABLE_TOL: f64 = 1e-10;
/// Upper edge of the marginal ("extended region") band.
pub const MARGINAL_LIMIT: f64 = 1.01;

const POWER_STEPS: usize = 10_000;
const POWER_GROWTH: f64 = 10.0;

/// `(k1, k2) = (h l1, h l2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DahlquistPoint {
    pub k1: f64,
    pub k2: f64,
}

impl DahlquistPoint {
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        if !(k1.is_finite() && k2.is_finite()) {
            return Err(invalid(format!("non-finite Dahlquist point ({k1}, {k2})")));
        }
        Ok(Self { k1, k2 })
    }
}

/// Rotation of the linear eigenvalue into the left half-plane by `rho`
/// radians; `epsilon = tan(rho)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepartitionAngle {
    rho: f64,
    epsilon: f64,
}

impl Default for RepartitionAngle {
    fn default() -> Self {
        Self::NONE
    }
}

impl RepartitionAngle {
    pub const NONE: RepartitionAngle = RepartitionAngle {
        rho: 0.0,
        epsilon: 0.0,
    };

    pub fn new(rho: f64) -> Result<Self> {
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&rho) {
            return Err(invalid(format!("rho must lie in [0, pi/2), got {rho}")));
        }
        Ok(Self {
            rho,
            epsilon: rho.tan(),
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Linear and explicit coefficients `(i k1 - eps |k1|, i k2 + eps |k1|)`.
    pub fn split(&self, p: DahlquistPoint) -> (Complex64, Complex64) {
        let shift = self.epsilon * p.k1.abs();
        (
            Complex64::new(0.0, p.k1) + Complex64::new(-shift, 0.0),
            Complex64::new(0.0, p.k2) + Complex64::new(shift, 0.0),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StabilityClass {
    Stable,
    Marginal,
    Unstable,
}

impl StabilityClass {
    pub fn from_abs(abs_r: f64) -> Self {
        if abs_r <= 1.0 + STABLE_TOL {
            StabilityClass::Stable
        } else if abs_r <= MARGINAL_LIMIT {
            StabilityClass::Marginal
        } else {
            StabilityClass::Unstable
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StabilityClass::Stable => "stable",
            StabilityClass::Marginal => "marginal",
            StabilityClass::Unstable => "unstable",
        }
    }
}

impl fmt::Display for StabilityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StabilityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stable" => Ok(StabilityClass::Stable),
            "marginal" => Ok(StabilityClass::Marginal),
            "unstable" => Ok(StabilityClass::Unstable),
            _ => Err(Error::Format(format!("unknown stability class {s:?}"))),
        }
    }
}

/// Stability function of a one-step method: one literal step with `h = 1`
/// from `y = 1`.
pub fn stability_scalar(
    method: &MethodSpec,
    p: DahlquistPoint,
    rep: RepartitionAngle,
) -> Result<Complex64> {
    if method.family.is_block() {
        return Err(invalid(format!(
            "{} is a block method; use its transfer matrix",
            method.family
        )));
    }
    let (linear, coupling) = rep.split(p);
    let problem = ScalarSplitProblem::new(linear, coupling);
    let stepper = Stepper::new(method, &[linear], 1.0)?;
    let state = StepperState::single(0.0, vec![Complex64::new(1.0, 0.0)]);
    Ok(stepper.step(&problem, &state)?.solution()[0])
}

/// One-step map of a block method on the scalar Dahlquist problem.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    entries: DMatrix<Complex64>,
}

/// Outcome of [`power_bounded_classification`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBoundedness {
    pub class: StabilityClass,
    /// `None` when the eigenvalue computation failed; the class is then
    /// `Marginal`.
    pub spectral_radius: Option<f64>,
}

impl TransferMatrix {
    pub fn from_matrix(entries: DMatrix<Complex64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(invalid("transfer matrix must be square and non-empty"));
        }
        Ok(Self { entries })
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let q = rows.len();
        if rows.iter().any(|r| r.len() != q) {
            return Err(invalid("transfer matrix rows must all have length q"));
        }
        Self::from_matrix(DMatrix::from_fn(q, q, |i, j| rows[i][j]))
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.entries[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn apply(&self, block: &[Complex64]) -> Vec<Complex64> {
        let v = nalgebra::DVector::from_column_slice(block);
        (&self.entries * v).iter().copied().collect()
    }

    pub fn eigenvalues(&self) -> Option<Vec<Complex64>> {
        if self.entries.iter().any(|z| !z.is_finite()) {
            return None;
        }
        let schur = nalgebra::linalg::Schur::try_new(self.entries.clone(), f64::EPSILON, 10_000)?;
        Some(schur.eigenvalues()?.iter().copied().collect())
    }

    pub fn spectral_radius(&self) -> Option<f64> {
        self.eigenvalues()
            .map(|ev| ev.iter().map(|z| z.norm()).fold(0.0, f64::max))
    }

    fn max_norm(m: &DMatrix<Complex64>) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Composite EPBM5 step matrix (`r = 1`), column `j` being the step applied
/// to the `j`-th canonical block.
pub fn epbm_transfer_matrix(p: DahlquistPoint, rep: RepartitionAngle) -> Result<TransferMatrix> {
    epbm_transfer_matrix_with(&EpbmTableau::new(), p, rep)
}

pub fn epbm_transfer_matrix_with(
    tableau: &EpbmTableau,
    p: DahlquistPoint,
    rep: RepartitionAngle,
) -> Result<TransferMatrix> {
    let (linear, coupling) = rep.split(p);
    let problem = ScalarSplitProblem::new(linear, coupling);
    let phis = EpbmPhis::new(tableau.clone(), &[linear], 1.0)?;
    let q = tableau.nodes.len();
    let mut entries = DMatrix::zeros(q, q);
    for j in 0..q {
        let values = (0..q)
            .map(|i| vec![Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)])
            .collect();
        let input = StepperState::Block {
            t: 0.0,
            r: 1.0,
            values,
        };
        // Divergence here only means a non-finite entry; keep it in the matrix.
        let out = match step_epbm5(&problem, &input, &phis) {
            Ok(StepperState::Block { values, .. }) => {
                values.into_iter().map(|v| v[0]).collect::<Vec<_>>()
            }
            Ok(StepperState::Single { .. }) => unreachable!("EPBM5 returns a block"),
            Err(Error::Divergence { .. }) => vec![Complex64::new(f64::INFINITY, 0.0); q],
            Err(e) => return Err(e),
        };
        for (i, z) in out.into_iter().enumerate() {
            entries[(i, j)] = z;
        }
    }
    TransferMatrix::from_matrix(entries)
}

/// Classify by spectral radius; near the unit circle (`|rho - 1| <= tol`)
/// also power the matrix and call growth beyond `10x` unstable.
pub fn power_bounded_classification(m: &TransferMatrix, tol: f64) -> Result<PowerBoundedness> {
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let Some(radius) = m.spectral_radius() else {
        return Ok(PowerBoundedness {
            class: StabilityClass::Marginal,
            spectral_radius: None,
        });
    };
    let mut class = StabilityClass::from_abs(radius);
    if (radius - 1.0).abs() <= tol && !powers_bounded(m.matrix()) {
        class = StabilityClass::Unstable;
    }
    Ok(PowerBoundedness {
        class,
        spectral_radius: Some(radius),
    })
}

fn powers_bounded(m: &DMatrix<Complex64>) -> bool {
    let initial = TransferMatrix::max_norm(m);
    let limit = POWER_GROWTH * initial.max(1.0);
    let mut power = m.clone();
    for _ in 1..POWER_STEPS {
        power = &power * m;
        if !(TransferMatrix::max_norm(&power) <= limit) {
            return false;
        }
    }
    true
}

/// `|R|` for one-step methods, spectral radius of the transfer matrix for
/// block methods, together with its class.
pub fn amplification(
    method: &MethodSpec,
    p: DahlquistPoint,
    rep: RepartitionAngle,
) -> Result<(f64, StabilityClass)> {
    if method.family.is_block() {
        let tableau = method.epbm.clone().unwrap_or_default();
        let m = epbm_transfer_matrix_with(&tableau, p, rep)?;
        let pb = power_bounded_classification(&m, STABLE_TOL)?;
        Ok((pb.spectral_radius.unwrap_or(f64::NAN), pb.class))
    } else {
        let r = stability_scalar(method, p, rep)?.norm();
        let class = if r.is_finite() {
            StabilityClass::from_abs(r)
        } else {
            StabilityClass::Unstable
        };
        Ok((r, class))
    }
}

/// Sampled stability map; `abs_r[i][j]` belongs to `(k1[i], k2[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityGrid {
    pub k1: Vec<f64>,
    pub k2: Vec<f64>,
    pub abs_r: Vec<Vec<f64>>,
    pub class: Vec<Vec<StabilityClass>>,
}

fn linspace(range: (f64, f64), n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![range.0];
    }
    let step = (range.1 - range.0) / (n - 1) as f64;
    (0..n)
        .map(|i| {
            if i + 1 == n {
                range.1
            } else {
                range.0 + step * i as f64
            }
        })
        .collect()
}

/// Evaluate the stability map on a `resolution.0 x resolution.1` uniform grid
/// (endpoints included), in parallel over `k1`.
pub fn region_grid(
    method: &MethodSpec,
    k1_range: (f64, f64),
    k2_range: (f64, f64),
    resolution: (usize, usize),
    rep: RepartitionAngle,
) -> Result<StabilityGrid> {
    if resolution.0 == 0 || resolution.1 == 0 {
        return Err(invalid("grid resolution must be positive"));
    }
    if !(k1_range.0 >= 0.0 && k1_range.1 >= k1_range.0 && k1_range.1.is_finite()) {
        return Err(invalid(format!(
            "k1 range must be ascending within [0, inf), got {k1_range:?}"
        )));
    }
    if !(k2_range.1 >= k2_range.0 && k2_range.0.is_finite() && k2_range.1.is_finite()) {
        return Err(invalid(format!(
            "k2 range must be ascending, got {k2_range:?}"
        )));
    }
    grid_from_samples(
        method,
        linspace(k1_range, resolution.0),
        linspace(k2_range, resolution.1),
        rep,
    )
}

/// As [`region_grid`] on explicit sample lists.
pub fn grid_from_samples(
    method: &MethodSpec,
    k1: Vec<f64>,
    k2: Vec<f64>,
    rep: RepartitionAngle,
) -> Result<StabilityGrid> {
    if k1.is_empty() || k2.is_empty() {
        return Err(invalid("grid resolution must be positive"));
    }
    let rows: Vec<Vec<(f64, StabilityClass)>> = k1
        .par_iter()
        .map(|&a| {
            k2.iter()
                .map(|&b| amplification(method, DahlquistPoint::new(a, b)?, rep))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let abs_r = rows
        .iter()
        .map(|r| r.iter().map(|x| x.0).collect())
        .collect();
    let class = rows
        .iter()
        .map(|r| r.iter().map(|x| x.1).collect())
        .collect();
    Ok(StabilityGrid {
        k1,
        k2,
        abs_r,
        class,
    })
}

impl StabilityGrid {
    pub fn count(&self, class: StabilityClass) -> usize {
        self.class.iter().flatten().filter(|&&c| c == class).count()
    }

    pub fn unstable_fraction(&self) -> f64 {
        self.count(StabilityClass::Unstable) as f64 / (self.k1.len() * self.k2.len()) as f64
    }

    /// Nodes `(i, j)` with the given class.
    pub fn nodes_with(&self, class: StabilityClass) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.class.iter().enumerate().flat_map(move |(i, row)| {
            row.iter()
                .enumerate()
                .filter(move |(_, &c)| c == class)
                .map(move |(j, _)| (i, j))
        })
    }

    /// CSV with header `k1,k2,absR,class`, row-major in `k1` then `k2`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k1,k2,absR,class")?;
        for (i, a) in self.k1.iter().enumerate() {
            for (j, b) in self.k2.iter().enumerate() {
                writeln!(
                    out,
                    "{a:.16e},{b:.16e},{:.16e},{}",
                    self.abs_r[i][j], self.class[i][j]
                )?;
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    /// Parse the output of [`StabilityGrid::write_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some("k1,k2,absR,class") {
            return Err(Error::Format("missing stability CSV header".into()));
        }
        let mut records = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(Error::Format(format!("bad stability CSV row {line:?}")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Format(format!("{s:?}: {e}")))
            };
            records.push((
                num(f[0])?,
                num(f[1])?,
                num(f[2])?,
                f[3].parse::<StabilityClass>()?,
            ));
        }
        let mut k1: Vec<f64> = Vec::new();
        for r in &records {
            if k1.last() != Some(&r.0) {
                k1.push(r.0);
            }
        }
        if k1.is_empty() || records.len() % k1.len() != 0 {
            return Err(Error::Format("stability CSV is not a full grid".into()));
        }
        let n2 = records.len() / k1.len();
        let k2: Vec<f64> = records[..n2].iter().map(|r| r.1).collect();
        let abs_r = records
            .chunks(n2)
            .map(|c| c.iter().map(|r| r.2).collect())
            .collect();
        let class = records
            .chunks(n2)
            .map(|c| c.iter().map(|r| r.3).collect())
            .collect();
        Ok(Self {
            k1,
            k2,
            abs_r,
            class,
        })
    }
}

/// Default `k2` window of the region plots.
pub fn default_k2_band(family: MethodFamily) -> (f64, f64) {
    match family {
        MethodFamily::Erk4 => (0.0, 12.0),
        MethodFamily::Esdc6 => (0.0, 25.0),
        MethodFamily::Epbm5 => (0.0, 4.0),
        _ => (0.0, 12.0),
    }
}

/// `|int_0^1 exp(i k (s - 1)) p(s) ds|` for `p(s) = sum_j c_j s^j`, exact via
/// repeated integration by parts.
pub fn asymptotic_decay(poly_coeffs: &[f64], k1_list: &[f64]) -> Result<Vec<f64>> {
    if poly_coeffs.is_empty() {
        return Err(invalid("polynomial must have at least one coefficient"));
    }
    k1_list
        .iter()
        .map(|&k| {
            if k == 0.0 || !k.is_finite() {
                return Err(invalid(format!("k1 must be finite and nonzero, got {k}")));
            }
            let a = Complex64::new(0.0, k);
            let back = (-a).exp();
            // Derivatives of p at 0 and 1.
            let mut coeffs = poly_coeffs.to_vec();
            let mut sum = Complex64::new(0.0, 0.0);
            let mut a_pow = a;
            let mut sign = 1.0;
            while !coeffs.is_empty() {
                let at_one: f64 = coeffs.iter().sum();
                let at_zero = coeffs[0];
                sum += (Complex64::new(at_one, 0.0) - back * at_zero) * sign / a_pow;
                coeffs = coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(j, c)| c * j as f64)
                    .collect();
                a_pow *= a;
                sign = -sign;
            }
            Ok(sum.norm())
        })
        .collect()
}

/// Whether the `k2 = 0` line over `k1 in (0, k1_max]` (`samples` points)
/// contains unstable nodes.
pub fn k2_zero_line_unstable(
    method: &MethodSpec,
    k1_max: f64,
    samples: usize,
    rep: RepartitionAngle,
) -> Result<bool> {
    if samples == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let k1: Vec<f64> = (1..=samples)
        .map(|i| k1_max * i as f64 / samples as f64)
        .collect();
    let grid = grid_from_samples(method, k1, vec![0.0], rep)?;
    Ok(grid.count(StabilityClass::Unstable) > 0)
}

/// Smallest `rho` on the scan `rho_step, 2 rho_step, ...` (below pi/2) at
/// which the stability region separates along the `k2 = 0` line, i.e. the
/// line acquires unstable nodes. `None` if it never does.
pub fn critical_split_angle(
    method: &MethodSpec,
    rho_step: f64,
    k1_max: f64,
    samples: usize,
) -> Result<Option<f64>> {
    if !(rho_step > 0.0) {
        return Err(invalid("rho step must be positive"));
    }
    let mut i = 1;
    loop {
        let rho = rho_step * i as f64;
        if rho >= std::f64::consts::FRAC_PI_2 {
            return Ok(None);
        }
        if k2_zero_line_unstable(method, k1_max, samples, RepartitionAngle::new(rho)?)? {
            return Ok(Some(rho));
        }
        i += 1;
    }
}
