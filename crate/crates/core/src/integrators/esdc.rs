use std::sync::Arc;

use nalgebra::Matrix4;
use num_complex::Complex64;

use super::{ensure_finite, single_parts, zeros, StepperState};
use crate::error::{invalid, Result};
use crate::phi::{PhiCache, PhiTable};
use crate::problem::SemilinearProblem;

/// Number of correction sweeps after the exponential Euler predictor.
pub const ESDC_SWEEPS: usize = 6;

const NODE_COUNT: usize = 4;
const SUBSTEPS: usize = NODE_COUNT - 1;

/// Gauss-Lobatto nodes on `[0, 1]` and the exponential quadrature weights
/// for each substep.
///
/// On substep `j` the nonlinearity is interpolated in the local variable
/// `s = (t - t_j) / h_j` through all four nodes, `p(s) = sum_d c_d s^(d-1)`
/// with `c = V(j)^-1 N`, `V(j)[c][d] = tau_{j,c}^(d-1)`. Integrating against
/// the exponential gives
/// `I_j = h_j sum_nu phi_nu(h_j L) (nu-1)! c_nu`,
/// so `weights[j][nu-1][l] = (nu-1)! V(j)^-1[nu-1][l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EsdcTableau {
    pub nodes: [f64; NODE_COUNT],
    pub sweeps: usize,
    /// Node offsets `tau[j][i] = (eta_i - eta_j) / (eta_{j+1} - eta_j)`.
    pub offsets: [[f64; NODE_COUNT]; SUBSTEPS],
    pub weights: [[[f64; NODE_COUNT]; NODE_COUNT]; SUBSTEPS],
}

impl Default for EsdcTableau {
    fn default() -> Self {
        Self::new()
    }
}

impl EsdcTableau {
    pub fn new() -> Self {
        let s5 = 5f64.sqrt() / 10.0;
        let nodes = [0.0, 0.5 - s5, 0.5 + s5, 1.0];
        let mut offsets = [[0.0; NODE_COUNT]; SUBSTEPS];
        let mut weights = [[[0.0; NODE_COUNT]; NODE_COUNT]; SUBSTEPS];
        for j in 0..SUBSTEPS {
            let width = nodes[j + 1] - nodes[j];
            for i in 0..NODE_COUNT {
                offsets[j][i] = (nodes[i] - nodes[j]) / width;
            }
            let vandermonde = Matrix4::from_fn(|c, d| offsets[j][c].powi(d as i32));
            let inverse = vandermonde
                .try_inverse()
                .expect("Vandermonde matrix on distinct nodes is invertible");
            let mut factorial = 1.0;
            for nu in 0..NODE_COUNT {
                if nu > 0 {
                    factorial *= nu as f64;
                }
                for l in 0..NODE_COUNT {
                    weights[j][nu][l] = factorial * inverse[(nu, l)];
                }
            }
        }
        Self {
            nodes,
            sweeps: ESDC_SWEEPS,
            offsets,
            weights,
        }
    }

    /// Substep lengths `h_j = h (eta_{j+1} - eta_j)`.
    pub fn substeps(&self, h: f64) -> [f64; SUBSTEPS] {
        std::array::from_fn(|j| h * (self.nodes[j + 1] - self.nodes[j]))
    }
}

/// Tables of `phi_0..phi_4` at each substep length.
#[derive(Debug, Clone)]
pub struct EsdcPhis {
    h: f64,
    tableau: EsdcTableau,
    substeps: [f64; SUBSTEPS],
    tables: [Arc<PhiTable>; SUBSTEPS],
}

impl EsdcPhis {
    pub fn new(tableau: EsdcTableau, linear: &[Complex64], h: f64) -> Result<Self> {
        Self::with_cache(&mut PhiCache::new(), tableau, linear, h)
    }

    pub fn with_cache(
        cache: &mut PhiCache,
        tableau: EsdcTableau,
        linear: &[Complex64],
        h: f64,
    ) -> Result<Self> {
        let substeps = tableau.substeps(h);
        let tables = [
            cache.get(NODE_COUNT, linear, substeps[0])?,
            cache.get(NODE_COUNT, linear, substeps[1])?,
            cache.get(NODE_COUNT, linear, substeps[2])?,
        ];
        Ok(Self {
            h,
            tableau,
            substeps,
            tables,
        })
    }

    pub fn stepsize(&self) -> f64 {
        self.h
    }

    pub fn tableau(&self) -> &EsdcTableau {
        &self.tableau
    }

    /// The exponential integral over substep `j` of the polynomial through
    /// `nonlinear` (values at the four nodes).
    pub fn quadrature(&self, j: usize, nonlinear: &[Vec<Complex64>]) -> Vec<Complex64> {
        let table = &*self.tables[j];
        let hj = self.substeps[j];
        let weights = &self.tableau.weights[j];
        let n = nonlinear[0].len();
        let mut out = zeros(n);
        for (i, slot) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for nu in 0..NODE_COUNT {
                let b: Complex64 = (0..NODE_COUNT)
                    .map(|l| nonlinear[l][i] * weights[nu][l])
                    .sum();
                acc += table.phi(nu + 1)[i] * b;
            }
            *slot = acc * hj;
        }
        out
    }
}

/// One ESDC6 step: exponential Euler predictor over the three substeps, then
/// six correction sweeps
/// `Y'_{j+1} = phi0(h_j L) Y'_j + h_j phi1(h_j L) (N'_j - N_j) + I_j`,
/// returning the last node of the final sweep.
pub fn step_esdc6(
    problem: &dyn SemilinearProblem,
    state: &StepperState,
    h: f64,
    phis: &EsdcPhis,
) -> Result<StepperState> {
    let (t, y) = single_parts(state)?;
    if h != phis.h {
        return Err(invalid(format!(
            "ESDC6 tables built for h = {}, step requested {h}",
            phis.h
        )));
    }
    let n = y.len();
    let times: [f64; NODE_COUNT] = std::array::from_fn(|i| t + h * phis.tableau.nodes[i]);

    let propagate = |j: usize, from: &[Complex64], forcing: &[Complex64]| -> Vec<Complex64> {
        let table = &*phis.tables[j];
        let hj = phis.substeps[j];
        let (e, p1) = (table.phi(0), table.phi(1));
        (0..n)
            .map(|i| e[i] * from[i] + p1[i] * forcing[i] * hj)
            .collect()
    };

    // Predictor sweep.
    let mut values: Vec<Vec<Complex64>> = Vec::with_capacity(NODE_COUNT);
    let mut forcing: Vec<Vec<Complex64>> = Vec::with_capacity(NODE_COUNT);
    values.push(y.to_vec());
    forcing.push(problem.eval_nonlinear(times[0], y));
    for j in 0..SUBSTEPS {
        let next = propagate(j, &values[j], &forcing[j]);
        forcing.push(problem.eval_nonlinear(times[j + 1], &next));
        values.push(next);
    }

    // Correction sweeps.
    let sweeps = phis.tableau.sweeps;
    for sweep in 0..sweeps {
        let last = sweep + 1 == sweeps;
        let mut new_values: Vec<Vec<Complex64>> = Vec::with_capacity(NODE_COUNT);
        let mut new_forcing: Vec<Vec<Complex64>> = Vec::with_capacity(NODE_COUNT);
        new_values.push(y.to_vec());
        new_forcing.push(forcing[0].clone());
        for j in 0..SUBSTEPS {
            let integral = phis.quadrature(j, &forcing);
            let delta: Vec<Complex64> = (0..n).map(|i| new_forcing[j][i] - forcing[j][i]).collect();
            let mut next = propagate(j, &new_values[j], &delta);
            for (v, q) in next.iter_mut().zip(&integral) {
                *v += q;
            }
            if !(last && j + 1 == SUBSTEPS) {
                new_forcing.push(problem.eval_nonlinear(times[j + 1], &next));
            }
            new_values.push(next);
        }
        values = new_values;
        forcing = new_forcing;
    }

    let y_next = values.pop().expect("four nodes");
    ensure_finite(StepperState::single(t + h, y_next))
}
