//! Built-in equation specs, addressable by name from the CLI.

use crate::error::{Error, Result};
use crate::model::{
    Constants, Diffusion, DiffusionFamily, Drift, EquationSpec, InitialLaw, RegimeBound, RegimeCoefficients,
    ThresholdPartition, ThresholdRule,
};
use crate::oscillation::OscillationSchedule;

pub const NAMES: [&str; 5] = ["example-2.3", "example-2.6", "example-3.7", "example-3.8", "oscillation-3.10"];

/// dX = 1{g != 1 + a} dB, x_0 = 1. Every w >= 0 gives a solution that idles at 1 + a for time w.
pub fn non_unique(a: f64) -> EquationSpec {
    EquationSpec {
        name: Some("example-2.3".into()),
        p: 2.0,
        dim: 1,
        z: vec![0.0],
        partition: ThresholdPartition::new(ThresholdRule::Explicit { values: vec![] }).with_atom(1.0 + a),
        coefficients: RegimeCoefficients::new(
            Drift::Zero,
            DiffusionFamily::per_regime(vec![Diffusion::scalar(1.0), Diffusion::zero()]),
        ),
        initial: InitialLaw::dirac(vec![1.0]),
    }
}

/// dX = X dt + sum_n 1{g in [y_{n-1}, y_n)} n^alpha dB with y_n = n and E x_0^2 = m0.
pub fn linear_growth(alpha: f64, m0: f64) -> EquationSpec {
    EquationSpec {
        name: Some("example-2.6".into()),
        p: 2.0,
        dim: 1,
        z: vec![0.0],
        partition: ThresholdPartition::new(ThresholdRule::linear()),
        coefficients: RegimeCoefficients::new(
            Drift::Linear { rate: 1.0 },
            DiffusionFamily::PowerLaw { scale: 1.0, exponent: alpha },
        )
        .with_growth(Constants { drift: 1.0, diffusion: RegimeBound::PowerLaw { scale: 1.0, exponent: alpha } }),
        initial: InitialLaw::dirac(vec![m0.sqrt()]),
    }
}

/// dX = sqrt 2 1{g < 1} dB - dt with threshold 1.
fn chattering(initial: InitialLaw, name: &str) -> EquationSpec {
    EquationSpec {
        name: Some(name.into()),
        p: 2.0,
        dim: 1,
        z: vec![0.0],
        partition: ThresholdPartition::two_regime(1.0),
        coefficients: RegimeCoefficients::new(
            Drift::Constant { value: vec![-1.0] },
            DiffusionFamily::per_regime(vec![Diffusion::scalar(2f64.sqrt()), Diffusion::zero()]),
        ),
        initial,
    }
}

/// x_0 = 1: no continuation at t = 0.
pub fn chattering_from_one() -> EquationSpec {
    chattering(InitialLaw::dirac(vec![1.0]), "example-3.7")
}

/// Same coefficients, x_0 = 0: g = 2t + t^2 reaches 1 at S_0 = sqrt 2 - 1 with
/// E X_{S_0} = 1 - sqrt 2, and from there the solution continues without noise.
pub fn chattering_shifted_mean() -> EquationSpec {
    chattering(InitialLaw::dirac(vec![0.0]), "example-3.8")
}

pub fn preset(name: &str) -> Result<EquationSpec> {
    match name {
        "example-2.3" => Ok(non_unique(1.0)),
        "example-2.6" => Ok(linear_growth(1.0, 0.5)),
        "example-3.7" => Ok(chattering_from_one()),
        "example-3.8" => Ok(chattering_shifted_mean()),
        "oscillation-3.10" => Ok(OscillationSchedule::default().to_spec()),
        _ => Err(Error::Parse(format!("unknown preset '{name}' (known: {})", NAMES.join(", ")))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_round_trip() {
        for name in NAMES {
            let spec = preset(name).unwrap();
            assert!(spec.validate().is_valid(), "{name}: {}", spec.validate());
            let text = spec.to_toml().unwrap();
            let again = EquationSpec::from_toml(&text).unwrap().to_toml().unwrap();
            assert_eq!(text, again, "{name}");
        }
        assert!(preset("example-9").is_err());
    }

    #[test]
    fn shifted_mean_at_s0() {
        use crate::moment::RegimeMomentFunctions;
        let spec = preset("example-3.8").unwrap();
        let s0 = 2f64.sqrt() - 1.0;
        let acc = crate::moment::DriftAccumulator::from_spec(&spec, 0.0);
        assert!((acc.integral(s0)[0] - (1.0 - 2f64.sqrt())).abs() < 1e-15);
        let gmf = crate::moment::regime_moment_functions(&spec, 0.0).unwrap();
        assert!((gmf.value(1, s0) - 1.0).abs() < 1e-15);
    }
}
