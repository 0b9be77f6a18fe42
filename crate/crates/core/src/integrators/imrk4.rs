use num_complex::Complex64;

use super::{ensure_finite, single_parts, StepperState};
use crate::error::{invalid, Error, Result};
use crate::problem::SemilinearProblem;

const STAGES: usize = 6;

/// Implicit/explicit tableau pair of an additive Runge-Kutta method with a
/// shared weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ButcherPair {
    pub explicit: [[f64; STAGES]; STAGES],
    pub implicit: [[f64; STAGES]; STAGES],
    pub b: [f64; STAGES],
    pub c: [f64; STAGES],
}

impl ButcherPair {
    /// ARK4(3)6L[2]SA of Kennedy and Carpenter (2003): ESDIRK implicit part
    /// with diagonal 1/4, stiffly accurate.
    #[rustfmt::skip]
    pub fn ark4_3_6l_2_sa() -> Self {
        let g = 0.25;
        let explicit = [
            [0.0; STAGES],
            [0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
            [13861.0 / 62500.0, 6889.0 / 62500.0, 0.0, 0.0, 0.0, 0.0],
            [
                -116923316275.0 / 2393684061468.0,
                -2731218467317.0 / 15368042101831.0,
                9408046702089.0 / 11113171139209.0,
                0.0, 0.0, 0.0,
            ],
            [
                -451086348788.0 / 2902428689909.0,
                -2682348792572.0 / 7519795681897.0,
                12662868775082.0 / 11960479115383.0,
                3355817975965.0 / 11060851509271.0,
                0.0, 0.0,
            ],
            [
                647845179188.0 / 3216320057751.0,
                73281519250.0 / 8382639484533.0,
                552539513391.0 / 3454668386233.0,
                3354512671639.0 / 8306763924573.0,
                4040.0 / 17871.0,
                0.0,
            ],
        ];
        let b = [
            82889.0 / 524892.0,
            0.0,
            15625.0 / 83664.0,
            69875.0 / 102672.0,
            -2260.0 / 8211.0,
            g,
        ];
        let implicit = [
            [0.0; STAGES],
            [g, g, 0.0, 0.0, 0.0, 0.0],
            [8611.0 / 62500.0, -1743.0 / 31250.0, g, 0.0, 0.0, 0.0],
            [5012029.0 / 34652500.0, -654441.0 / 2922500.0, 174375.0 / 388108.0, g, 0.0, 0.0],
            [
                15267082809.0 / 155376265600.0,
                -71443401.0 / 120774400.0,
                730878875.0 / 902184768.0,
                2285395.0 / 8070912.0,
                g,
                0.0,
            ],
            b,
        ];
        let c = [0.0, 0.5, 83.0 / 250.0, 31.0 / 50.0, 17.0 / 20.0, 1.0];
        Self { explicit, implicit, b, c }
    }
}

/// IMRK4 bound to a stepsize: the diagonal solve factors
/// `(1 - h a_ii l)^-1` are precomputed for every implicit stage.
#[derive(Debug, Clone)]
pub struct Imrk4Solver {
    h: f64,
    pair: ButcherPair,
    linear: Vec<Complex64>,
    inverse: Vec<Vec<Complex64>>,
}

impl Imrk4Solver {
    pub fn new(pair: ButcherPair, linear: &[Complex64], h: f64) -> Result<Self> {
        let mut inverse = Vec::with_capacity(STAGES);
        for s in 0..STAGES {
            let a = pair.implicit[s][s];
            let mut row = Vec::with_capacity(linear.len());
            for (index, l) in linear.iter().enumerate() {
                let denom = Complex64::new(1.0, 0.0) - l * (h * a);
                if denom == Complex64::new(0.0, 0.0) {
                    return Err(Error::ImplicitSolveSingular { index });
                }
                row.push(denom.inv());
            }
            inverse.push(row);
        }
        Ok(Self {
            h,
            pair,
            linear: linear.to_vec(),
            inverse,
        })
    }

    pub fn stepsize(&self) -> f64 {
        self.h
    }

    pub fn pair(&self) -> &ButcherPair {
        &self.pair
    }
}

/// One additive Runge-Kutta step with `L` implicit and `N` explicit.
pub fn step_imrk4(
    problem: &dyn SemilinearProblem,
    state: &StepperState,
    h: f64,
    solver: &Imrk4Solver,
) -> Result<StepperState> {
    let (t, y) = single_parts(state)?;
    if h != solver.h {
        return Err(invalid(format!(
            "IMRK4 factors built for h = {}, step requested {h}",
            solver.h
        )));
    }
    let n = y.len();
    let pair = &solver.pair;
    let mut linear_terms: Vec<Vec<Complex64>> = Vec::with_capacity(STAGES);
    let mut forcing: Vec<Vec<Complex64>> = Vec::with_capacity(STAGES);
    for s in 0..STAGES {
        let stage: Vec<Complex64> = (0..n)
            .map(|i| {
                let mut rhs = y[i];
                for j in 0..s {
                    rhs += (forcing[j][i] * pair.explicit[s][j]
                        + linear_terms[j][i] * pair.implicit[s][j])
                        * h;
                }
                rhs * solver.inverse[s][i]
            })
            .collect();
        forcing.push(problem.eval_nonlinear(t + pair.c[s] * h, &stage));
        linear_terms.push(
            stage
                .iter()
                .zip(&solver.linear)
                .map(|(u, l)| u * l)
                .collect(),
        );
    }
    let y_next = (0..n)
        .map(|i| {
            let mut acc = y[i];
            for s in 0..STAGES {
                acc += (forcing[s][i] + linear_terms[s][i]) * (pair.b[s] * h);
            }
            acc
        })
        .collect();
    ensure_finite(StepperState::single(t + h, y_next))
}
