//! Constant-stepsize time steppers for `y' = L y + N(t, y)` with diagonal `L`.
//!
//! The exponential schemes (ERK4, ESDC6, EPBM5, exponential Euler) treat `L`
//! exactly through phi-functions; IMRK4 treats it implicitly and RK4 treats
//! everything explicitly.

mod classic;
mod epbm;
mod erk4;
mod esdc;
mod imrk4;

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::phi::PhiCache;
use crate::problem::SemilinearProblem;

pub use classic::{step_exp_euler, step_rk4, ExpEulerPhis};
pub use epbm::{
    epbm_initialize, epbm_v_coefficients, step_epbm5, EpbmPhis, EpbmTableau, EPBM_ALPHA,
    STARTUP_SUBSTEPS,
};
pub use erk4::{step_erk4, Erk4Phis};
pub use esdc::{step_esdc6, EsdcPhis, EsdcTableau, ESDC_SWEEPS};
pub use imrk4::{step_imrk4, ButcherPair, Imrk4Solver};

/// Integrator identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodFamily {
    Erk4,
    Esdc6,
    Epbm5,
    Imrk4,
    Rk4,
    ExpEuler,
}

impl MethodFamily {
    pub const ALL: [MethodFamily; 6] = [
        MethodFamily::Erk4,
        MethodFamily::Esdc6,
        MethodFamily::Epbm5,
        MethodFamily::Imrk4,
        MethodFamily::Rk4,
        MethodFamily::ExpEuler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodFamily::Erk4 => "ERK4",
            MethodFamily::Esdc6 => "ESDC6",
            MethodFamily::Epbm5 => "EPBM5",
            MethodFamily::Imrk4 => "IMRK4",
            MethodFamily::Rk4 => "RK4",
            MethodFamily::ExpEuler => "EXPEULER",
        }
    }

    /// Exponential methods treat the linear part exactly.
    pub fn is_exponential(self) -> bool {
        matches!(
            self,
            MethodFamily::Erk4 | MethodFamily::Esdc6 | MethodFamily::Epbm5 | MethodFamily::ExpEuler
        )
    }

    /// Block methods carry several solution values per step.
    pub fn is_block(self) -> bool {
        self == MethodFamily::Epbm5
    }

    pub fn order(self) -> usize {
        match self {
            MethodFamily::Erk4 | MethodFamily::Imrk4 | MethodFamily::Rk4 => 4,
            MethodFamily::Esdc6 => 6,
            MethodFamily::Epbm5 => 5,
            MethodFamily::ExpEuler => 1,
        }
    }
}

impl fmt::Display for MethodFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "erk4" => Ok(MethodFamily::Erk4),
            "esdc6" => Ok(MethodFamily::Esdc6),
            "epbm5" => Ok(MethodFamily::Epbm5),
            "imrk4" => Ok(MethodFamily::Imrk4),
            "rk4" => Ok(MethodFamily::Rk4),
            "expeuler" | "exp_euler" => Ok(MethodFamily::ExpEuler),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

/// An integrator together with its node and weight constants.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub family: MethodFamily,
    pub esdc: Option<EsdcTableau>,
    pub epbm: Option<EpbmTableau>,
    pub imex: Option<ButcherPair>,
}

impl MethodSpec {
    pub fn new(family: MethodFamily) -> Self {
        Self {
            family,
            esdc: (family == MethodFamily::Esdc6).then(EsdcTableau::new),
            epbm: (family == MethodFamily::Epbm5).then(EpbmTableau::new),
            imex: (family == MethodFamily::Imrk4).then(ButcherPair::ark4_3_6l_2_sa),
        }
    }
}

impl From<MethodFamily> for MethodSpec {
    fn from(family: MethodFamily) -> Self {
        MethodSpec::new(family)
    }
}

/// Integrator state. Block states hold five values at `t + r z_j`.
#[derive(Debug, Clone, PartialEq)]
pub enum StepperState {
    Single {
        t: f64,
        y: Vec<Complex64>,
    },
    Block {
        t: f64,
        r: f64,
        values: Vec<Vec<Complex64>>,
    },
}

impl StepperState {
    pub fn single(t: f64, y: Vec<Complex64>) -> Self {
        StepperState::Single { t, y }
    }

    /// Time of [`Self::solution`]. For blocks this is the first node `t - r`.
    pub fn solution_time(&self) -> f64 {
        match self {
            StepperState::Single { t, .. } => *t,
            StepperState::Block { t, r, .. } => t + r * EpbmTableau::NODES[0],
        }
    }

    /// The single value, or the first block node.
    pub fn solution(&self) -> &[Complex64] {
        match self {
            StepperState::Single { y, .. } => y,
            StepperState::Block { values, .. } => &values[0],
        }
    }

    pub fn is_finite(&self) -> bool {
        let finite = |v: &[Complex64]| v.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        match self {
            StepperState::Single { y, .. } => finite(y),
            StepperState::Block { values, .. } => values.iter().all(|v| finite(v)),
        }
    }
}

pub(crate) fn single_parts(state: &StepperState) -> Result<(f64, &[Complex64])> {
    match state {
        StepperState::Single { t, y } => Ok((*t, y)),
        StepperState::Block { .. } => Err(invalid("one-step method given a block state")),
    }
}

pub(crate) fn ensure_finite(state: StepperState) -> Result<StepperState> {
    if state.is_finite() {
        Ok(state)
    } else {
        Err(Error::Divergence {
            t: state.solution_time(),
        })
    }
}

/// A method bound to a fixed stepsize and linear operator, with all of its
/// phi-tables or implicit solve factors precomputed.
#[derive(Debug, Clone)]
pub enum Stepper {
    Erk4(Erk4Phis),
    Esdc6(EsdcPhis),
    Epbm5(EpbmPhis),
    Imrk4(Imrk4Solver),
    Rk4 { h: f64 },
    ExpEuler(ExpEulerPhis),
}

impl Stepper {
    pub fn new(method: &MethodSpec, linear: &[Complex64], h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!("stepsize must be positive, got {h}")));
        }
        let mut cache = PhiCache::new();
        Ok(match method.family {
            MethodFamily::Erk4 => Stepper::Erk4(Erk4Phis::with_cache(&mut cache, linear, h)?),
            MethodFamily::Esdc6 => {
                let tableau = method.esdc.clone().unwrap_or_default();
                Stepper::Esdc6(EsdcPhis::with_cache(&mut cache, tableau, linear, h)?)
            }
            MethodFamily::Epbm5 => {
                let tableau = method.epbm.clone().unwrap_or_default();
                Stepper::Epbm5(EpbmPhis::with_cache(&mut cache, tableau, linear, h)?)
            }
            MethodFamily::Imrk4 => {
                let pair = method
                    .imex
                    .clone()
                    .unwrap_or_else(ButcherPair::ark4_3_6l_2_sa);
                Stepper::Imrk4(Imrk4Solver::new(pair, linear, h)?)
            }
            MethodFamily::Rk4 => Stepper::Rk4 { h },
            MethodFamily::ExpEuler => {
                Stepper::ExpEuler(ExpEulerPhis::with_cache(&mut cache, linear, h)?)
            }
        })
    }

    pub fn stepsize(&self) -> f64 {
        match self {
            Stepper::Erk4(p) => p.stepsize(),
            Stepper::Esdc6(p) => p.stepsize(),
            Stepper::Epbm5(p) => p.radius(),
            Stepper::Imrk4(s) => s.stepsize(),
            Stepper::Rk4 { h } => *h,
            Stepper::ExpEuler(p) => p.stepsize(),
        }
    }

    /// Initial state at `t0`; block methods run their startup procedure.
    pub fn initial_state(
        &self,
        problem: &dyn SemilinearProblem,
        y0: &[Complex64],
        t0: f64,
    ) -> Result<StepperState> {
        match self {
            Stepper::Epbm5(phis) => epbm_initialize(problem, y0, t0, phis.radius()),
            _ => Ok(StepperState::single(t0, y0.to_vec())),
        }
    }

    pub fn step(
        &self,
        problem: &dyn SemilinearProblem,
        state: &StepperState,
    ) -> Result<StepperState> {
        match self {
            Stepper::Erk4(p) => step_erk4(problem, state, p.stepsize(), p),
            Stepper::Esdc6(p) => step_esdc6(problem, state, p.stepsize(), p),
            Stepper::Epbm5(p) => step_epbm5(problem, state, p),
            Stepper::Imrk4(s) => step_imrk4(problem, state, s.stepsize(), s),
            Stepper::Rk4 { h } => step_rk4(problem, state, *h),
            Stepper::ExpEuler(p) => step_exp_euler(problem, state, p.stepsize(), p),
        }
    }
}

/// Outcome classification of an integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    Ok,
    /// The state became non-finite during step `step` (1-based).
    Blowup {
        step: usize,
        last_finite_time: f64,
    },
}

impl RunStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, RunStatus::Ok)
    }
}

/// A solution sample taken at the step nearest to a requested time.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub requested: f64,
    pub t: f64,
    pub step: usize,
    pub y: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationOutcome {
    /// Last finite solution and its time.
    pub t: f64,
    pub y: Vec<Complex64>,
    pub steps_taken: usize,
    pub samples: Vec<Sample>,
    pub status: RunStatus,
}

/// Integrates from `t0` to `t1` with `n_steps` constant steps.
///
/// Samples are taken at the step index nearest to each requested time (no
/// dense output). Divergence is reported through [`RunStatus::Blowup`] with
/// the last finite state rather than as an error.
pub fn integrate(
    problem: &dyn SemilinearProblem,
    method: &MethodSpec,
    y0: &[Complex64],
    t_span: (f64, f64),
    n_steps: usize,
    sample_times: &[f64],
) -> Result<IntegrationOutcome> {
    let (t0, t1) = t_span;
    if n_steps == 0 {
        return Err(invalid("n_steps must be at least 1"));
    }
    if !(t1 > t0) {
        return Err(invalid(format!("empty time span [{t0}, {t1}]")));
    }
    if y0.len() != problem.dim() {
        return Err(invalid(format!(
            "initial value has length {} but the problem has dimension {}",
            y0.len(),
            problem.dim()
        )));
    }
    let h = (t1 - t0) / n_steps as f64;
    let stepper = Stepper::new(method, problem.linear(), h)?;

    let mut wanted: Vec<(usize, usize)> = sample_times
        .iter()
        .enumerate()
        .map(|(i, ts)| (i, (((ts - t0) / h).round().max(0.0) as usize).min(n_steps)))
        .collect();
    wanted.sort_by_key(|&(_, step)| step);
    let mut samples: Vec<Option<Sample>> = vec![None; sample_times.len()];
    let mut next_sample = 0;

    let mut state = match stepper.initial_state(problem, y0, t0) {
        Ok(s) => s,
        Err(Error::Divergence { .. }) => {
            return Ok(IntegrationOutcome {
                t: t0,
                y: y0.to_vec(),
                steps_taken: 0,
                samples: Vec::new(),
                status: RunStatus::Blowup {
                    step: 0,
                    last_finite_time: t0,
                },
            })
        }
        Err(e) => return Err(e),
    };
    let mut status = RunStatus::Ok;
    let mut steps_taken = 0;
    for step in 0..=n_steps {
        while next_sample < wanted.len() && wanted[next_sample].1 == step {
            let (index, _) = wanted[next_sample];
            samples[index] = Some(Sample {
                requested: sample_times[index],
                t: t0 + step as f64 * h,
                step,
                y: state.solution().to_vec(),
            });
            next_sample += 1;
        }
        if step == n_steps {
            break;
        }
        match stepper.step(problem, &state) {
            Ok(next) => {
                state = next;
                steps_taken += 1;
            }
            Err(Error::Divergence { .. }) => {
                status = RunStatus::Blowup {
                    step: step + 1,
                    last_finite_time: t0 + step as f64 * h,
                };
                break;
            }
            Err(e) => return Err(e),
        }
    }

    Ok(IntegrationOutcome {
        t: t0 + steps_taken as f64 * h,
        y: state.solution().to_vec(),
        steps_taken,
        samples: samples.into_iter().flatten().collect(),
        status,
    })
}

pub(crate) fn zeros(n: usize) -> Vec<Complex64> {
    vec![Complex64::new(0.0, 0.0); n]
}
