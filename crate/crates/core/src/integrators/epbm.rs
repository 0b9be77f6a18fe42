use std::sync::Arc;

use nalgebra::Matrix4;
use num_complex::Complex64;

use super::{ensure_finite, single_parts, step_erk4, step_rk4, Erk4Phis, StepperState};
use crate::error::{invalid, Result};
use crate::phi::{PhiCache, PhiTable};
use crate::problem::SemilinearProblem;

/// Extrapolation factor of the predictor pass.
pub const EPBM_ALPHA: f64 = 1.0;

/// RK4 (or ERK4) substeps per node gap in [`epbm_initialize`].
pub const STARTUP_SUBSTEPS: usize = 200;

/// RK4 is used for startup substeps while `h_sub * max|l|` stays below this.
const RK4_STARTUP_LIMIT: f64 = 2.5;

const Q: usize = 5;

/// Nodes, shifts and the map from `(N_2..N_5)` to the derivative
/// coefficients `(v_1..v_4)` of the fifth-order composite polynomial block
/// method.
#[derive(Debug, Clone, PartialEq)]
pub struct EpbmTableau {
    pub nodes: [f64; Q],
    pub alpha: f64,
    /// `v = v_matrix * (N_2, N_3, N_4, N_5)`, from the Vandermonde system.
    pub v_matrix: [[f64; 4]; 4],
}

impl Default for EpbmTableau {
    fn default() -> Self {
        Self::new()
    }
}

impl EpbmTableau {
    /// `{-1, -eta+, -eta-, eta-, eta+}`: -1 plus the four Legendre nodes.
    pub const NODES: [f64; Q] = [
        -1.0,
        -0.861_136_311_594_052_6,
        -0.339_981_043_584_856_3,
        0.339_981_043_584_856_3,
        0.861_136_311_594_052_6,
    ];

    pub fn new() -> Self {
        let (eta_minus, eta_plus) = Self::eta();
        let nodes = [-1.0, -eta_plus, -eta_minus, eta_minus, eta_plus];
        Self {
            nodes,
            alpha: EPBM_ALPHA,
            v_matrix: Self::vandermonde_map(&nodes),
        }
    }

    /// `eta^- , eta^+ = sqrt(3/7 -+ (2/7) sqrt(6/5))`.
    pub fn eta() -> (f64, f64) {
        let root = (2.0 / 7.0) * (6.0f64 / 5.0).sqrt();
        ((3.0 / 7.0 - root).sqrt(), (3.0 / 7.0 + root).sqrt())
    }

    /// `eta_j(alpha) = z_j + alpha + 1`.
    pub fn shift(&self, j: usize, alpha: f64) -> f64 {
        self.nodes[j] + alpha + 1.0
    }

    /// `v_k = P^(k-1)(0)` for the cubic `P(sigma)` through `(z_i + 1, N_i)`,
    /// `i = 2..5`.
    fn vandermonde_map(nodes: &[f64; Q]) -> [[f64; 4]; 4] {
        let vandermonde = Matrix4::from_fn(|i, d| (nodes[i + 1] + 1.0).powi(d as i32));
        let inverse = vandermonde
            .try_inverse()
            .expect("Vandermonde matrix on distinct nodes is invertible");
        let factorial = [1.0, 1.0, 2.0, 6.0];
        std::array::from_fn(|k| std::array::from_fn(|i| factorial[k] * inverse[(k, i)]))
    }

    /// The same map written with the surd constants `w^+-`, `u^+-`.
    pub fn closed_form_v_matrix() -> [[f64; 4]; 4] {
        let s30 = 30f64.sqrt();
        let pm = |f: &dyn Fn(f64) -> f64| (f(1.0), f(-1.0));
        let (w1p, w1m) = pm(&|s| (75.0 + s * 4.0 * s30).sqrt() / 12.0);
        let (w2p, w2m) = pm(&|s| (10170.0 + s * 1104.0 * s30).sqrt() / 24.0);
        let (w3p, w3m) = pm(&|s| 7.0 * (1350.0 + s * 180.0 * s30).sqrt() / 24.0);
        let (w4p, w4m) = pm(&|s| 7.0 * (150.0 + s * 20.0 * s30).sqrt() / 8.0);
        let (u1p, u1m) = pm(&|s| (3.0 + s * s30) / 12.0);
        let u2 = 7.0 * s30 / 24.0;
        [
            [w1p + u1p, -w1m + u1m, w1m + u1m, -w1p + u1p],
            [-w2m - u2, w2p + u2, -w2p + u2, w2m - u2],
            [w3m + u2, -w3p - u2, w3p - u2, -w3m + u2],
            [-w4m, w4p, -w4p, w4m],
        ]
    }
}

/// Derivative coefficients `v_1..v_4` from the nonlinear values at nodes
/// `z_2..z_5`.
pub fn epbm_v_coefficients(
    tableau: &EpbmTableau,
    nonlinear: [&[Complex64]; 4],
) -> [Vec<Complex64>; 4] {
    let n = nonlinear[0].len();
    std::array::from_fn(|k| {
        (0..n)
            .map(|i| {
                (0..4)
                    .map(|m| nonlinear[m][i] * tableau.v_matrix[k][m])
                    .sum()
            })
            .collect()
    })
}

/// phi-tables at `r eta_j(alpha)` for both passes of the composite method.
#[derive(Debug, Clone)]
pub struct EpbmPhis {
    r: f64,
    tableau: EpbmTableau,
    /// `[pass][node]`; pass 0 uses `alpha`, pass 1 uses `alpha = 0`.
    /// `None` where `eta_j = 0` (the output is the first input).
    tables: [[Option<Arc<PhiTable>>; Q]; 2],
    parallel: bool,
}

impl EpbmPhis {
    pub fn new(tableau: EpbmTableau, linear: &[Complex64], r: f64) -> Result<Self> {
        Self::with_cache(&mut PhiCache::new(), tableau, linear, r)
    }

    pub fn with_cache(
        cache: &mut PhiCache,
        tableau: EpbmTableau,
        linear: &[Complex64],
        r: f64,
    ) -> Result<Self> {
        let mut tables: [[Option<Arc<PhiTable>>; Q]; 2] = Default::default();
        for (pass, alpha) in [tableau.alpha, 0.0].into_iter().enumerate() {
            for (j, slot) in tables[pass].iter_mut().enumerate() {
                let eta = tableau.shift(j, alpha);
                if eta != 0.0 {
                    *slot = Some(cache.get(4, linear, r * eta)?);
                }
            }
        }
        Ok(Self {
            r,
            tableau,
            tables,
            parallel: false,
        })
    }

    /// Evaluate the four nonlinear terms of each pass on the rayon pool.
    pub fn with_parallel_nonlinear(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn tableau(&self) -> &EpbmTableau {
        &self.tableau
    }

    fn pass(
        &self,
        problem: &dyn SemilinearProblem,
        pass: usize,
        t: f64,
        block: &[Vec<Complex64>],
    ) -> Vec<Vec<Complex64>> {
        let r = self.r;
        let eval = |j: usize| problem.eval_nonlinear(t + r * self.tableau.nodes[j], &block[j]);
        let forcing: Vec<Vec<Complex64>> = if self.parallel {
            use rayon::prelude::*;
            (1..Q).into_par_iter().map(eval).collect()
        } else {
            (1..Q).map(eval).collect()
        };
        let v = epbm_v_coefficients(
            &self.tableau,
            [&forcing[0], &forcing[1], &forcing[2], &forcing[3]],
        );
        let alpha = if pass == 0 { self.tableau.alpha } else { 0.0 };
        let base = &block[0];
        (0..Q)
            .map(|j| match &self.tables[pass][j] {
                None => base.clone(),
                Some(table) => {
                    let eta = self.tableau.shift(j, alpha);
                    let scale: [f64; 4] = std::array::from_fn(|k| r * eta.powi(k as i32 + 1));
                    (0..base.len())
                        .map(|i| {
                            let mut out = table.phi(0)[i] * base[i];
                            for k in 0..4 {
                                out += table.phi(k + 1)[i] * v[k][i] * scale[k];
                            }
                            out
                        })
                        .collect()
                }
            })
            .collect()
    }
}

/// One composite EPBM5 step: the `alpha = 1` pass, then the `alpha = 0`
/// correction pass. The block time advances by `r`.
pub fn step_epbm5(
    problem: &dyn SemilinearProblem,
    state: &StepperState,
    phis: &EpbmPhis,
) -> Result<StepperState> {
    let StepperState::Block { t, r, values } = state else {
        return Err(invalid("EPBM5 requires a block state"));
    };
    if *r != phis.r {
        return Err(invalid(format!(
            "EPBM5 tables built for r = {}, block has r = {r}",
            phis.r
        )));
    }
    if values.len() != Q {
        return Err(invalid(format!(
            "EPBM5 block must hold {Q} values, got {}",
            values.len()
        )));
    }
    let predicted = phis.pass(problem, 0, *t, values);
    let corrected = phis.pass(problem, 1, t + r, &predicted);
    ensure_finite(StepperState::Block {
        t: t + r,
        r: *r,
        values: corrected,
    })
}

/// Startup values for EPBM5.
///
/// The block is anchored so that its first node sits at `t0`: block time
/// `t0 + r`, nodes at `t0 + r (z_j + 1)`. The remaining nodes are filled by
/// sub-stepping forward from `y0` with [`STARTUP_SUBSTEPS`] steps per node
/// gap: classical RK4 when it is stable for the substep, ERK4 otherwise.
pub fn epbm_initialize(
    problem: &dyn SemilinearProblem,
    y0: &[Complex64],
    t0: f64,
    r: f64,
) -> Result<StepperState> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid(format!("block radius must be positive, got {r}")));
    }
    if y0.len() != problem.dim() {
        return Err(invalid("initial value length does not match the problem"));
    }
    let nodes = EpbmTableau::NODES;
    let stiffness = problem
        .linear()
        .iter()
        .map(|l| l.norm())
        .fold(0.0, f64::max);
    let mut values = Vec::with_capacity(Q);
    values.push(y0.to_vec());
    let mut current = StepperState::single(t0, y0.to_vec());
    for j in 1..Q {
        let gap = r * (nodes[j] - nodes[j - 1]);
        let h_sub = gap / STARTUP_SUBSTEPS as f64;
        let erk4 = if h_sub * stiffness > RK4_STARTUP_LIMIT {
            Some(Erk4Phis::new(problem.linear(), h_sub)?)
        } else {
            None
        };
        for _ in 0..STARTUP_SUBSTEPS {
            current = match &erk4 {
                Some(phis) => step_erk4(problem, &current, h_sub, phis),
                None => step_rk4(problem, &current, h_sub),
            }?;
        }
        let (_, y) = single_parts(&current)?;
        values.push(y.to_vec());
    }
    Ok(StepperState::Block {
        t: t0 + r,
        r,
        values,
    })
}
