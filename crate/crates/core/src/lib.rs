//! Partitioned exponential integrators (ERK4, ESDC6, EPBM5) for semilinear
//! problems with a diagonal linear part, their linear stability on the
//! non-diffusive partitioned Dahlquist equation, and the repartitioning
//! stabilization `L + eps*D`, `N - eps*D`.
//!
//! Modules:
//!
//! * [`phi`]: scalar and tabulated phi-functions.
//! * [`integrators`]: ERK4, ESDC6, EPBM5, IMRK4, RK4 and exponential Euler.
//! * [`stability`]: stability functions, transfer matrices and region grids.
//! * [`spectral`]: Fourier pseudo-spectral ZDS and KdV problems, repartitioning
//!   and hyperviscosity.
//! * [`experiment`]: convergence, long-time and stability experiments with a
//!   reference-solution cache.

pub mod error;
pub mod experiment;
pub mod integrators;
pub mod phi;
pub mod problem;
pub mod spectral;
pub mod stability;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use integrators::{
    integrate, IntegrationOutcome, MethodFamily, MethodSpec, RunStatus, StepperState,
};
pub use phi::{phi_scalar, phi_table, PhiTable};
pub use problem::{ScalarSplitProblem, SemilinearProblem};
pub use spectral::{Modification, RepartitionKind, RepartitionSpec, SemilinearSpectralProblem};
pub use stability::{DahlquistPoint, RepartitionAngle, StabilityClass, StabilityGrid};
