use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use super::SemilinearSpectralProblem;
use crate::error::{invalid, Error, Result};

/// Choice of the diffusive diagonal `D` used for repartitioning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RepartitionKind {
    /// `D = -|L|` (third order for `L = i c k^3`), `eps = tan(rho)`.
    AbsK3,
    /// `D = -k^2`, `eps = c tan(rho)` for `L = i c k^3`: modes with `|k| < 1`
    /// are over-rotated, larger ones under-rotated.
    K2,
    /// `D = -1`, `eps` given directly.
    Identity,
}

impl RepartitionKind {
    pub fn name(self) -> &'static str {
        match self {
            RepartitionKind::AbsK3 => "abs_k3",
            RepartitionKind::K2 => "k2",
            RepartitionKind::Identity => "identity",
        }
    }
}

impl FromStr for RepartitionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abs_k3" => Ok(RepartitionKind::AbsK3),
            "k2" => Ok(RepartitionKind::K2),
            "identity" => Ok(RepartitionKind::Identity),
            _ => Err(Error::Config(format!(
                "unknown repartition kind {s:?} (abs_k3, k2, identity)"
            ))),
        }
    }
}

/// A repartitioning `L + eps D`, `N - eps D`. `param` is the angle `rho` for
/// `AbsK3`/`K2` and `eps` itself for `Identity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RepartitionSpec {
    pub kind: RepartitionKind,
    pub param: f64,
}

impl RepartitionSpec {
    pub fn new(kind: RepartitionKind, param: f64) -> Result<Self> {
        let spec = Self { kind, param };
        spec.validate()?;
        Ok(spec)
    }

    pub fn abs_k3(rho: f64) -> Result<Self> {
        Self::new(RepartitionKind::AbsK3, rho)
    }

    pub fn k2(rho: f64) -> Result<Self> {
        Self::new(RepartitionKind::K2, rho)
    }

    pub fn identity(epsilon: f64) -> Result<Self> {
        Self::new(RepartitionKind::Identity, epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            RepartitionKind::AbsK3 | RepartitionKind::K2 => {
                if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.param) {
                    return Err(invalid(format!(
                        "rho must lie in [0, pi/2), got {}",
                        self.param
                    )));
                }
            }
            RepartitionKind::Identity => {
                if !(self.param >= 0.0 && self.param.is_finite()) {
                    return Err(invalid(format!(
                        "epsilon must be finite and >= 0, got {}",
                        self.param
                    )));
                }
            }
        }
        Ok(())
    }

    /// `(eps, D)` for a given problem.
    pub fn operator(&self, problem: &SemilinearSpectralProblem) -> Result<(f64, Vec<f64>)> {
        self.validate()?;
        let linear = &problem.linear;
        let grid = &problem.grid;
        Ok(match self.kind {
            RepartitionKind::AbsK3 => {
                (self.param.tan(), linear.iter().map(|l| -l.norm()).collect())
            }
            RepartitionKind::K2 => {
                // Scale by the dispersion coefficient |L| / |k|^3 so a mode
                // with |k| = 1 is rotated by exactly rho.
                let k1 = grid.wavenumbers()[1];
                let eps = self.param.tan() * linear[1].norm() / k1.abs().powi(3);
                (eps, grid.wavenumbers().iter().map(|k| -k * k).collect())
            }
            RepartitionKind::Identity => (self.param, vec![-1.0; linear.len()]),
        })
    }
}

impl fmt::Display for RepartitionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            RepartitionKind::Identity => write!(f, "identity:eps={}", self.param),
            kind => write!(f, "{}:rho={}", kind.name(), self.param),
        }
    }
}

/// Vanishing diffusion `-(dt)^(q+1) gamma k^m` added to the linear operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperviscositySpec {
    pub order: u32,
    pub gamma: f64,
    pub method_order: u32,
}

impl HyperviscositySpec {
    pub fn new(order: u32, gamma: f64) -> Result<Self> {
        if ![4, 6, 8].contains(&order) {
            return Err(invalid(format!(
                "hyperviscosity order must be 4, 6 or 8, got {order}"
            )));
        }
        if !(gamma >= 0.0 && gamma.is_finite()) {
            return Err(invalid(format!(
                "gamma must be finite and >= 0, got {gamma}"
            )));
        }
        Ok(Self {
            order,
            gamma,
            method_order: 4,
        })
    }

    /// Real shift added to each diagonal entry.
    pub fn shift(&self, k: f64, dt: f64) -> f64 {
        -dt.powi(self.method_order as i32 + 1) * self.gamma * k.powi(self.order as i32)
    }
}

impl fmt::Display for HyperviscositySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "hyperviscosity:m={}:gamma={}", self.order, self.gamma)
    }
}

/// How a problem was altered from its base form.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Modification {
    #[default]
    None,
    Repartition(RepartitionSpec),
    Hyperviscosity {
        spec: HyperviscositySpec,
        dt: f64,
    },
}

impl Modification {
    pub fn is_none(&self) -> bool {
        matches!(self, Modification::None)
    }

    /// Short label for CSV output; hyperviscosity omits `dt`, which varies
    /// per run.
    pub fn label(&self) -> String {
        match self {
            Modification::None => "none".to_string(),
            Modification::Repartition(spec) => spec.to_string(),
            Modification::Hyperviscosity { spec, .. } => spec.to_string(),
        }
    }
}

impl SemilinearSpectralProblem {
    /// `L + eps D` and `N - eps D`; the equation itself is unchanged.
    pub fn apply_repartition(&self, spec: RepartitionSpec) -> Result<Self> {
        if !self.modification.is_none() {
            return Err(invalid(
                "problem is already modified; repartitioning and hyperviscosity are exclusive",
            ));
        }
        let (eps, d) = spec.operator(self)?;
        let mut out = self.clone();
        out.modification = Modification::Repartition(spec);
        if eps == 0.0 {
            return Ok(out);
        }
        let shift: Vec<f64> = d.iter().map(|x| eps * x).collect();
        for (l, s) in out.linear.iter_mut().zip(&shift) {
            *l += Complex64::new(*s, 0.0);
        }
        out.shift = Some(shift);
        Ok(out)
    }

    /// `L - (dt)^(q+1) gamma k^m`; the nonlinear term is unchanged, so this
    /// alters the equation.
    pub fn apply_hyperviscosity(&self, spec: HyperviscositySpec, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        if !self.modification.is_none() {
            return Err(invalid(
                "problem is already modified; repartitioning and hyperviscosity are exclusive",
            ));
        }
        let mut out = self.clone();
        out.modification = Modification::Hyperviscosity { spec, dt };
        if spec.gamma == 0.0 {
            return Ok(out);
        }
        for (l, k) in out.linear.iter_mut().zip(self.grid.wavenumbers()) {
            *l += Complex64::new(spec.shift(*k, dt), 0.0);
        }
        Ok(out)
    }

    pub fn apply(&self, modification: Modification) -> Result<Self> {
        match modification {
            Modification::None => Ok(self.clone()),
            Modification::Repartition(spec) => self.apply_repartition(spec),
            Modification::Hyperviscosity { spec, dt } => self.apply_hyperviscosity(spec, dt),
        }
    }
}

/// `max |h l_i|` over slots whose absolute wavenumber index is at most
/// `floor(fraction * n / 2)`.
pub fn spectral_radius_fraction(linear: &[Complex64], h: f64, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(invalid(format!(
            "fraction must lie in (0, 1], got {fraction}"
        )));
    }
    let n = linear.len();
    let limit = (fraction * (n / 2) as f64).floor() as usize;
    Ok(linear
        .iter()
        .enumerate()
        .filter(|(i, _)| (*i).min(n - i) <= limit)
        .map(|(_, l)| (l * h).norm())
        .fold(0.0, f64::max))
}
