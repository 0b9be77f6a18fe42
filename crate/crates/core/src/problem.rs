use num_complex::Complex64;

/// A semilinear system `y' = L y + N(t, y)` with diagonal `L`.
///
/// `Sync` so block methods may evaluate independent nonlinear terms from
/// several threads.
pub trait SemilinearProblem: Sync {
    /// Diagonal of `L`.
    fn linear(&self) -> &[Complex64];

    /// Writes `N(t, y)` into `out`.
    fn nonlinear(&self, t: f64, y: &[Complex64], out: &mut [Complex64]);

    fn dim(&self) -> usize {
        self.linear().len()
    }

    fn eval_nonlinear(&self, t: f64, y: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); y.len()];
        self.nonlinear(t, y, &mut out);
        out
    }
}

/// The scalar split equation `y' = a y + b y`, with `a` in the linear slot
/// and `b y` as the "nonlinear" term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarSplitProblem {
    linear: [Complex64; 1],
    coupling: Complex64,
}

impl ScalarSplitProblem {
    pub fn new(linear: Complex64, coupling: Complex64) -> Self {
        Self {
            linear: [linear],
            coupling,
        }
    }

    pub fn coupling(&self) -> Complex64 {
        self.coupling
    }
}

impl SemilinearProblem for ScalarSplitProblem {
    fn linear(&self) -> &[Complex64] {
        &self.linear
    }

    fn nonlinear(&self, _t: f64, y: &[Complex64], out: &mut [Complex64]) {
        out[0] = self.coupling * y[0];
    }
}
