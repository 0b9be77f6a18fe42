//! Fourier pseudo-spectral semilinear problems: the zero-dispersion
//! Schrodinger (ZDS) and Korteweg-de Vries (KdV) equations, solved for their
//! Fourier coefficients, plus repartitioning and hyperviscosity.

mod fourier;
mod modify;
mod snapshot;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::problem::SemilinearProblem;

pub use fourier::{dealiased_product, PeriodicGrid};
pub use modify::{
    spectral_radius_fraction, HyperviscositySpec, Modification, RepartitionKind, RepartitionSpec,
};
pub use snapshot::{read_snapshot, write_snapshot, Snapshot};

/// Default grid sizes and parameters of the two benchmarks.
pub const ZDS_POINTS: usize = 128;
pub const ZDS_T_END: f64 = 40.0;
pub const KDV_POINTS: usize = 512;
pub const KDV_DELTA: f64 = 0.022;
pub const KDV_T_END: f64 = 160.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NonlinearTerm {
    /// `2 i F(|u|^2 u)`.
    Zds,
    /// `-(1/2) i k F(u^2)`.
    Kdv,
}

/// `u_hat' = L u_hat + N(u_hat)` with diagonal `L`; the nonlinear term is
/// dealiased by 3/2 zero-padding and, if a band limit is set, zeroed above it.
#[derive(Debug, Clone, PartialEq)]
pub struct SemilinearSpectralProblem {
    name: String,
    grid: PeriodicGrid,
    linear: Vec<Complex64>,
    term: NonlinearTerm,
    /// Diagonal subtracted from the nonlinear term after repartitioning.
    shift: Option<Vec<f64>>,
    band_limit: Option<usize>,
    modification: Modification,
}

impl SemilinearSpectralProblem {
    pub fn new(
        name: impl Into<String>,
        grid: PeriodicGrid,
        linear: Vec<Complex64>,
        term: NonlinearTerm,
    ) -> Result<Self> {
        if linear.len() != grid.len() {
            return Err(invalid("linear diagonal length must match the grid"));
        }
        Ok(Self {
            name: name.into(),
            grid,
            linear,
            term,
            shift: None,
            band_limit: None,
            modification: Modification::None,
        })
    }

    /// Zero the nonlinear term for absolute mode indices above `limit`.
    /// Modes outside the band then evolve linearly, so a spectrum that starts
    /// inside it stays there.
    pub fn with_band_limit(mut self, limit: usize) -> Result<Self> {
        if limit == 0 || limit > self.grid.nyquist() {
            return Err(invalid(format!(
                "band limit must lie in 1..={}, got {limit}",
                self.grid.nyquist()
            )));
        }
        self.band_limit = Some(limit);
        Ok(self)
    }

    pub fn band_limit(&self) -> Option<usize> {
        self.band_limit
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grid(&self) -> &PeriodicGrid {
        &self.grid
    }

    pub fn term(&self) -> NonlinearTerm {
        self.term
    }

    pub fn modification(&self) -> &Modification {
        &self.modification
    }

    /// Nonlinear term of the unmodified equation.
    pub fn base_nonlinear(&self, u: &[Complex64]) -> Vec<Complex64> {
        let grid = &self.grid;
        let mut out = match self.term {
            NonlinearTerm::Zds => {
                let phys = grid.to_padded_physical(u);
                let cubic = phys
                    .iter()
                    .map(|z| z * z.norm_sqr() * Complex64::new(0.0, 2.0))
                    .collect();
                grid.from_padded_physical(cubic)
            }
            NonlinearTerm::Kdv => {
                let phys = grid.to_padded_physical(u);
                let square = phys.iter().map(|z| z * z).collect();
                let mut out = grid.from_padded_physical(square);
                for (o, k) in out.iter_mut().zip(grid.wavenumbers()) {
                    *o *= Complex64::new(0.0, -0.5 * k);
                }
                out
            }
        };
        if let Some(limit) = self.band_limit {
            for (i, o) in out.iter_mut().enumerate() {
                if grid.mode_index(i) > limit {
                    *o = Complex64::new(0.0, 0.0);
                }
            }
        }
        out
    }

    /// `L u + N(u)`.
    pub fn rhs(&self, u: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.eval_nonlinear(0.0, u);
        for ((o, l), y) in out.iter_mut().zip(&self.linear).zip(u) {
            *o += l * y;
        }
        out
    }
}

impl SemilinearProblem for SemilinearSpectralProblem {
    fn linear(&self) -> &[Complex64] {
        &self.linear
    }

    fn nonlinear(&self, _t: f64, y: &[Complex64], out: &mut [Complex64]) {
        let n = self.base_nonlinear(y);
        match &self.shift {
            None => out.copy_from_slice(&n),
            Some(shift) => {
                for i in 0..out.len() {
                    out[i] = n[i] - y[i] * shift[i];
                }
            }
        }
    }
}

fn check_points(n: usize) -> Result<()> {
    if n < 32 || !n.is_power_of_two() {
        return Err(invalid(format!("Nx must be a power of two >= 32, got {n}")));
    }
    Ok(())
}

/// ZDS on `[-4 pi, 4 pi)`: `L = i k^3`, `N = 2 i F(|u|^2 u)`, and the
/// spectrum of `u0 = 1 + exp(3ix/4) / 100`. The nonlinear term is limited to
/// the lower 2/3 of the modes.
pub fn build_zds(n: usize) -> Result<(SemilinearSpectralProblem, Vec<Complex64>)> {
    check_points(n)?;
    let grid = PeriodicGrid::new(n, (-4.0 * PI, 4.0 * PI))?;
    let linear = grid
        .wavenumbers()
        .iter()
        .map(|k| Complex64::new(0.0, k * k * k))
        .collect();
    // exp(3ix/4) is the mode k = 3/4, index 3; the phase comes from x_0 = -4 pi.
    let mut u0 = vec![Complex64::new(0.0, 0.0); n];
    let a = grid.domain().0;
    u0[0] = Complex64::new(n as f64, 0.0);
    u0[3] = Complex64::from_polar(0.01 * n as f64, 0.75 * a);
    let band = grid.retained_index();
    let problem = SemilinearSpectralProblem::new("zds", grid, linear, NonlinearTerm::Zds)?
        .with_band_limit(band)?;
    Ok((problem, u0))
}

/// KdV on `[0, 2)`: `L = i delta k^3`, `N = -(1/2) i k F(u^2)`, and the
/// spectrum of `u0 = cos(pi x)`, band-limited like ZDS.
pub fn build_kdv(n: usize, delta: f64) -> Result<(SemilinearSpectralProblem, Vec<Complex64>)> {
    check_points(n)?;
    if !delta.is_finite() {
        return Err(invalid("delta must be finite"));
    }
    let grid = PeriodicGrid::new(n, (0.0, 2.0))?;
    let linear = grid
        .wavenumbers()
        .iter()
        .map(|k| Complex64::new(0.0, delta * k * k * k))
        .collect();
    let mut u0 = vec![Complex64::new(0.0, 0.0); n];
    u0[1] = Complex64::new(n as f64 / 2.0, 0.0);
    u0[n - 1] = Complex64::new(n as f64 / 2.0, 0.0);
    let band = grid.retained_index();
    let problem = SemilinearSpectralProblem::new("kdv", grid, linear, NonlinearTerm::Kdv)?
        .with_band_limit(band)?;
    Ok((problem, u0))
}

/// Build a benchmark by name (`zds` or `kdv`).
pub fn build_problem(name: &str, n: usize) -> Result<(SemilinearSpectralProblem, Vec<Complex64>)> {
    match name {
        "zds" => build_zds(n),
        "kdv" => build_kdv(n, KDV_DELTA),
        _ => Err(crate::error::Error::Config(format!(
            "unknown problem {name:?} (expected zds or kdv)"
        ))),
    }
}
