use std::sync::Arc;

use num_complex::Complex64;

use super::{ensure_finite, single_parts, StepperState};
use crate::error::{invalid, Result};
use crate::phi::{PhiCache, PhiTable};
use crate::problem::SemilinearProblem;

fn full_rhs(problem: &dyn SemilinearProblem, t: f64, y: &[Complex64]) -> Vec<Complex64> {
    let mut out = problem.eval_nonlinear(t, y);
    for ((o, l), yi) in out.iter_mut().zip(problem.linear()).zip(y) {
        *o += l * yi;
    }
    out
}

/// Classical explicit RK4 on the full right-hand side `L y + N(t, y)`.
pub fn step_rk4(
    problem: &dyn SemilinearProblem,
    state: &StepperState,
    h: f64,
) -> Result<StepperState> {
    let (t, y) = single_parts(state)?;
    let stage = |k: &[Complex64], c: f64| -> Vec<Complex64> {
        y.iter().zip(k).map(|(yi, ki)| yi + ki * (c * h)).collect()
    };
    let k1 = full_rhs(problem, t, y);
    let k2 = full_rhs(problem, t + h / 2.0, &stage(&k1, 0.5));
    let k3 = full_rhs(problem, t + h / 2.0, &stage(&k2, 0.5));
    let k4 = full_rhs(problem, t + h, &stage(&k3, 1.0));
    let y_next = (0..y.len())
        .map(|i| y[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0))
        .collect();
    ensure_finite(StepperState::single(t + h, y_next))
}

#[derive(Debug, Clone)]
pub struct ExpEulerPhis {
    h: f64,
    table: Arc<PhiTable>,
}

impl ExpEulerPhis {
    pub fn new(linear: &[Complex64], h: f64) -> Result<Self> {
        Self::with_cache(&mut PhiCache::new(), linear, h)
    }

    pub fn with_cache(cache: &mut PhiCache, linear: &[Complex64], h: f64) -> Result<Self> {
        Ok(Self {
            h,
            table: cache.get(4, linear, h)?,
        })
    }

    pub fn stepsize(&self) -> f64 {
        self.h
    }
}

/// `y' = phi0(hL) y + h phi1(hL) N(t, y)`.
pub fn step_exp_euler(
    problem: &dyn SemilinearProblem,
    state: &StepperState,
    h: f64,
    phis: &ExpEulerPhis,
) -> Result<StepperState> {
    let (t, y) = single_parts(state)?;
    if h != phis.h {
        return Err(invalid(format!(
            "exponential Euler tables built for h = {}, step requested {h}",
            phis.h
        )));
    }
    let forcing = problem.eval_nonlinear(t, y);
    let (e, p1) = (phis.table.phi(0), phis.table.phi(1));
    let y_next = (0..y.len())
        .map(|i| e[i] * y[i] + p1[i] * forcing[i] * h)
        .collect();
    ensure_finite(StepperState::single(t + h, y_next))
}
