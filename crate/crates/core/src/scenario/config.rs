use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{EquationForm, IntegratorConfig};
use crate::model::{NoiseSpec, PulseSpec, SystemSpec};
use crate::spin_algebra::Spin;

/// Sampling interval used when a config does not set `sample_dt`.
pub const DEFAULT_SAMPLE_DT: f64 = 0.01;
/// Ensemble size used for `D > 0` when a config does not set `members`.
pub const DEFAULT_MEMBERS: usize = 32;

/// One experiment, as read from a TOML file. Key names are part of the
/// command-line contract; sites are 1-based here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(rename = "N")]
    pub sites: usize,
    #[serde(rename = "S")]
    pub spin: Spin,
    #[serde(rename = "J", default)]
    pub exchange: f64,
    #[serde(rename = "Bz", default)]
    pub field_z: f64,
    #[serde(rename = "B0x", default)]
    pub pulse_amplitude: f64,
    #[serde(rename = "t0", default)]
    pub pulse_center: f64,
    #[serde(rename = "TW", default, skip_serializing_if = "Option::is_none")]
    pub pulse_width: Option<f64>,
    #[serde(default = "first_site")]
    pub pulse_site: usize,
    #[serde(default)]
    pub lambda: f64,
    #[serde(rename = "D", default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_end: f64,
    /// Equation form, `"llg"` or `"ll"`.
    #[serde(default)]
    pub scheme: EquationForm,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub members: Option<usize>,
}

fn first_site() -> usize {
    1
}

fn default_dt() -> f64 {
    1e-3
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig1" => Ok(Preset::Fig1),
            "fig2" => Ok(Preset::Fig2),
            "fig3" => Ok(Preset::Fig3),
            other => Err(Error::Config(format!("unknown preset {other:?}; expected fig1, fig2 or fig3"))),
        }
    }
}

impl ScenarioConfig {
    /// Single spin-1 reversal by a short x pulse against a static field.
    pub fn fig1() -> Self {
        ScenarioConfig::preset(1, Spin::ONE, 0.0, -5.1, 2.0, 0.2, 20.0)
    }

    /// Ferromagnetic spin-1 trimer, weakly excited by the pulse.
    pub fn fig2() -> Self {
        ScenarioConfig::preset(3, Spin::ONE, 1.0, 0.1, 10.0, 0.1, 50.0)
    }

    /// Spin-1/2 trimer reversing in steps through the total-M sectors.
    pub fn fig3() -> Self {
        ScenarioConfig::preset(3, Spin::HALF, 4.0, -2.0, 10.0, 0.1, 120.0)
    }

    pub fn from_preset(preset: Preset) -> Self {
        match preset {
            Preset::Fig1 => ScenarioConfig::fig1(),
            Preset::Fig2 => ScenarioConfig::fig2(),
            Preset::Fig3 => ScenarioConfig::fig3(),
        }
    }

    fn preset(sites: usize, spin: Spin, exchange: f64, field_z: f64, t0: f64, lambda: f64, t_end: f64) -> Self {
        ScenarioConfig {
            sites,
            spin,
            exchange,
            field_z,
            pulse_amplitude: 3.27,
            pulse_center: t0,
            pulse_width: Some(0.02),
            pulse_site: 1,
            lambda,
            noise: 0.0,
            seed: 0,
            dt: 1e-3,
            t_end,
            scheme: EquationForm::Llg,
            sample_dt: None,
            members: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ScenarioConfig::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario configs always serialize")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.sites == 0 {
            return bad("N must be >= 1".into());
        }
        if self.pulse_site == 0 || self.pulse_site > self.sites {
            return bad(format!("pulse_site must be in 1..={}, got {}", self.sites, self.pulse_site));
        }
        if self.pulse_amplitude != 0.0 && self.pulse_width.is_none() {
            return bad("TW is required when B0x is non-zero".into());
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return bad(format!("D must be >= 0, got {}", self.noise));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end must be >= 0, got {}", self.t_end));
        }
        if self.members == Some(0) {
            return bad("members must be >= 1".into());
        }
        self.sample_every()?;
        self.system_spec().validate().map_err(|e| match e {
            Error::InvalidSpec(msg) => Error::Config(msg),
            other => other,
        })
    }

    fn sample_every(&self) -> Result<usize> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be > 0, got {}", self.dt)));
        }
        let sample_dt = self.sample_dt.unwrap_or(DEFAULT_SAMPLE_DT.max(self.dt));
        let ratio = sample_dt / self.dt;
        let every = ratio.round();
        if !(every >= 1.0) || (ratio - every).abs() > 1e-9 * ratio {
            return Err(Error::Config(format!("sample_dt {sample_dt} must be a positive multiple of dt {}", self.dt)));
        }
        Ok(every as usize)
    }

    pub fn system_spec(&self) -> SystemSpec {
        let pulse = (self.pulse_amplitude != 0.0).then(|| PulseSpec {
            amplitude: self.pulse_amplitude,
            center: self.pulse_center,
            width: self.pulse_width.unwrap_or(f64::NAN),
            site: self.pulse_site.saturating_sub(1),
        });
        SystemSpec {
            sites: self.sites,
            spin: self.spin,
            exchange: self.exchange,
            field_z: self.field_z,
            pulse,
            damping: self.lambda,
        }
    }

    pub fn integrator(&self) -> Result<IntegratorConfig> {
        Ok(IntegratorConfig {
            dt: self.dt,
            renormalize: true,
            sample_every: self.sample_every()?,
        })
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            strength: self.noise,
            seed: self.seed,
        }
    }

    /// Number of stochastic trajectories averaged; `1` without noise.
    pub fn ensemble_size(&self) -> usize {
        if self.noise > 0.0 {
            self.members.unwrap_or(DEFAULT_MEMBERS)
        } else {
            1
        }
    }
}
