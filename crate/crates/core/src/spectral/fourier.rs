use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

/// Uniform periodic grid on `[a, b)` with `n` points and wavenumbers in
/// transform order `0, 1, .., n/2, -n/2+1, .., -1` (times `2 pi / (b - a)`).
///
/// Spectra use the unscaled forward transform; the inverse carries `1/n`.
#[derive(Clone)]
pub struct PeriodicGrid {
    n: usize,
    domain: (f64, f64),
    wavenumbers: Vec<f64>,
    padded: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for PeriodicGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PeriodicGrid")
            .field("n", &self.n)
            .field("domain", &self.domain)
            .finish()
    }
}

impl PartialEq for PeriodicGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.domain == other.domain
    }
}

impl PeriodicGrid {
    pub const MIN_POINTS: usize = 8;

    pub fn new(n: usize, domain: (f64, f64)) -> Result<Self> {
        if !n.is_power_of_two() || n < Self::MIN_POINTS {
            return Err(invalid(format!(
                "grid size must be a power of two >= {}, got {n}",
                Self::MIN_POINTS
            )));
        }
        if !(domain.1 > domain.0 && domain.0.is_finite() && domain.1.is_finite()) {
            return Err(invalid(format!(
                "domain must be a finite interval [a, b) with a < b, got {domain:?}"
            )));
        }
        let dk = 2.0 * PI / (domain.1 - domain.0);
        let wavenumbers = (0..n)
            .map(|j| if j <= n / 2 { j as f64 } else { j as f64 - n as f64 } * dk)
            .collect();
        let padded = 3 * n / 2;
        let mut planner = FftPlanner::new();
        Ok(Self {
            n,
            domain,
            wavenumbers,
            padded,
            forward: planner.plan_fft_forward(padded),
            inverse: planner.plan_fft_inverse(padded),
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / (self.domain.1 - self.domain.0)
    }

    pub fn wavenumbers(&self) -> &[f64] {
        &self.wavenumbers
    }

    /// Physical grid points `a + j (b - a) / n`.
    pub fn points(&self) -> Vec<f64> {
        let dx = (self.domain.1 - self.domain.0) / self.n as f64;
        (0..self.n).map(|j| self.domain.0 + dx * j as f64).collect()
    }

    /// Absolute wavenumber index of transform slot `i`.
    pub fn mode_index(&self, i: usize) -> usize {
        i.min(self.n - i)
    }

    pub fn nyquist(&self) -> usize {
        self.n / 2
    }

    /// Largest absolute index of the "lower 2/3" band.
    pub fn retained_index(&self) -> usize {
        (2 * self.n / 2) / 3
    }

    /// Size of the 3/2-padded grid.
    pub fn padded_len(&self) -> usize {
        self.padded
    }

    /// Zero-pad to the 3/2 grid and return physical values there, scaled so
    /// that they sample the same trigonometric polynomial as the unpadded
    /// inverse transform. The Nyquist mode is dropped.
    pub fn to_padded_physical(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let (n, m) = (self.n, self.padded);
        let mut buf = vec![Complex64::new(0.0, 0.0); m];
        let scale = 1.0 / n as f64;
        for j in 0..n / 2 {
            buf[j] = spectrum[j] * scale;
        }
        for j in 1..n / 2 {
            buf[m - j] = spectrum[n - j] * scale;
        }
        self.inverse.process(&mut buf);
        buf
    }

    /// Forward transform on the padded grid, truncated to the `n` modes with
    /// the unpadded normalization. The Nyquist slot is set to zero.
    pub fn from_padded_physical(&self, mut values: Vec<Complex64>) -> Vec<Complex64> {
        let (n, m) = (self.n, self.padded);
        self.forward.process(&mut values);
        let scale = n as f64 / m as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n / 2 {
            out[j] = values[j] * scale;
        }
        for j in 1..n / 2 {
            out[n - j] = values[m - j] * scale;
        }
        out
    }

    /// Unscaled forward transform of `n` physical samples.
    pub fn forward(&self, values: &[Complex64]) -> Vec<Complex64> {
        let mut buf = values.to_vec();
        FftPlanner::new().plan_fft_forward(self.n).process(&mut buf);
        buf
    }

    /// Inverse transform with the `1/n` factor.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<Complex64> {
        let mut buf = spectrum.to_vec();
        FftPlanner::new().plan_fft_inverse(self.n).process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|z| *z *= scale);
        buf
    }
}

/// Spectrum of the product `u v` by 3/2 zero-padding.
pub fn dealiased_product(
    grid: &PeriodicGrid,
    u: &[Complex64],
    v: &[Complex64],
) -> Result<Vec<Complex64>> {
    if u.len() != grid.len() || v.len() != grid.len() {
        return Err(invalid(format!(
            "spectra must have length {}, got {} and {}",
            grid.len(),
            u.len(),
            v.len()
        )));
    }
    let pu = grid.to_padded_physical(u);
    let pv = grid.to_padded_physical(v);
    Ok(grid.from_padded_physical(pu.iter().zip(&pv).map(|(a, b)| a * b).collect()))
}
