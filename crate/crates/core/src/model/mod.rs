//! Domain vocabulary shared by the simulator and the analyzers.

mod coefficients;
mod initial;
mod partition;
mod spec;

pub use coefficients::{
    CoefficientFamily, Constants, Custom, Diffusion, DiffusionFamily, DiffusionFn, Drift, DriftFn, MomentSummary,
    RegimeBound, RegimeCoefficients, QUADRATURE_PANEL,
};
pub use initial::{InitialLaw, InitialMoments};
pub use partition::{BoundarySide, ThresholdPartition, ThresholdRule};
pub use spec::{validate, EquationSpec, ValidationReport};

use crate::error::Result;

/// Regime index (1-based) whose cell contains `alpha`.
pub fn regime_of(partition: &ThresholdPartition, alpha: f64) -> Result<usize> {
    partition.regime_of(alpha)
}
