use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which equation of motion to integrate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquationForm {
    /// `dψ/dt = -iHψ - λ(H - <H>)ψ`.
    Ll,
    /// Both terms scaled by `1/(1+λ²)`.
    #[default]
    Llg,
}

impl EquationForm {
    /// Overall prefactor of the right-hand side.
    pub fn prefactor(self, damping: f64) -> f64 {
        match self {
            EquationForm::Ll => 1.0,
            EquationForm::Llg => 1.0 / (1.0 + damping * damping),
        }
    }
}

/// Fixed-step integration settings shared by the quantum and classical runners.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    /// Project back onto the constraint surface (unit norm, fixed spin
    /// length, unit trace) after every step.
    pub renormalize: bool,
    /// Observer cadence in steps.
    pub sample_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 1e-3,
            renormalize: true,
            sample_every: 10,
        }
    }
}

/// `dt · |H|` above this is rejected.
pub const STEP_LIMIT: f64 = 0.5;
/// `dt · |H|` above this is accepted with a warning.
pub const STEP_WARN: f64 = 0.05;

impl IntegratorConfig {
    pub fn with_dt(dt: f64) -> Self {
        IntegratorConfig {
            dt,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidSpec(format!("dt must be > 0, got {}", self.dt)));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidSpec("sample_every must be >= 1".into()));
        }
        Ok(())
    }

    /// Enforces the step-size bound against a spectral-radius estimate.
    pub fn check_step(&self, spectral_bound: f64) -> Result<()> {
        self.validate()?;
        let product = self.dt * spectral_bound;
        if product > STEP_LIMIT {
            return Err(Error::StepSize {
                dt: self.dt,
                product,
                limit: STEP_LIMIT,
            });
        }
        if product > STEP_WARN {
            log::warn!("dt * |H| = {product:.3} exceeds {STEP_WARN}; accuracy may suffer");
        }
        Ok(())
    }

    /// Number of fixed steps covering `[0, t_end]`.
    pub fn steps(&self, t_end: f64) -> Result<u64> {
        self.validate()?;
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidSpec(format!("t_end must be >= 0, got {t_end}")));
        }
        Ok((t_end / self.dt).round() as u64)
    }

    pub(crate) fn samples_at(&self, step: u64, total: u64) -> bool {
        step.is_multiple_of(self.sample_every as u64) || step == total
    }
}
