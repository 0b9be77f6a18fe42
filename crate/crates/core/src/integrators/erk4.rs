use std::sync::Arc;

use num_complex::Complex64;

use super::{ensure_finite, single_parts, StepperState};
use crate::error::{invalid, Result};
use crate::phi::{PhiCache, PhiTable};
use crate::problem::SemilinearProblem;

/// phi-tables for Krogstad's fourth-order exponential Runge-Kutta scheme.
#[derive(Debug, Clone)]
pub struct Erk4Phis {
    h: f64,
    half: Arc<PhiTable>,
    full: Arc<PhiTable>,
}

impl Erk4Phis {
    pub fn new(linear: &[Complex64], h: f64) -> Result<Self> {
        Self::with_cache(&mut PhiCache::new(), linear, h)
    }

    pub fn with_cache(cache: &mut PhiCache, linear: &[Complex64], h: f64) -> Result<Self> {
        Ok(Self {
            h,
            half: cache.get(4, linear, h / 2.0)?,
            full: cache.get(4, linear, h)?,
        })
    }

    pub fn stepsize(&self) -> f64 {
        self.h
    }
}

/// One ERK4 step:
///
/// ```text
/// K0 = N(t, y)
/// K1 = N(t + h/2, phi0(hL/2) y + h/2 phi1(hL/2) K0)
/// K2 = N(t + h/2, phi0(hL/2) y + h[(phi1/2 - phi2)(hL/2) K0 + phi2(hL/2) K1])
/// K3 = N(t + h,   phi0(hL) y + h[(phi1 - 2 phi2)(hL) K0 + 2 phi2(hL) K2])
/// y' = phi0(hL) y + h[(phi1 - 3phi2 + 4phi3) K0 + (2phi2 - 4phi3)(K1 + K2) + (4phi3 - phi2) K3]
/// ```
pub fn step_erk4(
    problem: &dyn SemilinearProblem,
    state: &StepperState,
    h: f64,
    phis: &Erk4Phis,
) -> Result<StepperState> {
    let (t, y) = single_parts(state)?;
    if h != phis.h {
        return Err(invalid(format!(
            "ERK4 tables built for h = {}, step requested {h}",
            phis.h
        )));
    }
    let n = y.len();
    let half = &*phis.half;
    let full = &*phis.full;
    let (e_half, p1_half, p2_half) = (half.phi(0), half.phi(1), half.phi(2));
    let (e_full, p1, p2, p3) = (full.phi(0), full.phi(1), full.phi(2), full.phi(3));

    let lin_half: Vec<Complex64> = (0..n).map(|i| e_half[i] * y[i]).collect();

    let k0 = problem.eval_nonlinear(t, y);

    let u1: Vec<Complex64> = (0..n)
        .map(|i| lin_half[i] + p1_half[i] * k0[i] * (h / 2.0))
        .collect();
    let k1 = problem.eval_nonlinear(t + h / 2.0, &u1);

    let u2: Vec<Complex64> = (0..n)
        .map(|i| lin_half[i] + ((p1_half[i] * 0.5 - p2_half[i]) * k0[i] + p2_half[i] * k1[i]) * h)
        .collect();
    let k2 = problem.eval_nonlinear(t + h / 2.0, &u2);

    let u3: Vec<Complex64> = (0..n)
        .map(|i| e_full[i] * y[i] + ((p1[i] - p2[i] * 2.0) * k0[i] + p2[i] * k2[i] * 2.0) * h)
        .collect();
    let k3 = problem.eval_nonlinear(t + h, &u3);

    let y_next: Vec<Complex64> = (0..n)
        .map(|i| {
            let b0 = p1[i] - p2[i] * 3.0 + p3[i] * 4.0;
            let b12 = p2[i] * 2.0 - p3[i] * 4.0;
            let b3 = p3[i] * 4.0 - p2[i];
            e_full[i] * y[i] + (b0 * k0[i] + b12 * (k1[i] + k2[i]) + b3 * k3[i]) * h
        })
        .collect();
    ensure_finite(StepperState::single(t + h, y_next))
}
