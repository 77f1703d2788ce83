//! Classical LL, LLG and stochastic LLG dynamics of fixed-length spins.
//!
//! Spins carry length `S` so that they are directly comparable to quantum
//! expectation values. The relaxation term is written for the unit
//! direction, `dS/dt = S × B - (λ/S) S × (S × B)`, which is the unit-vector
//! equation scaled by `S`; for `S = 1` it is the textbook form.

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::integrator::{EquationForm, IntegratorConfig};
use crate::model::{effective_field_unchecked, sample_noise_fields, NoiseSpec, SystemSpec};

/// `N` classical spins of common length.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalConfig {
    pub spins: Vec<Vector3<f64>>,
    pub length: f64,
}

impl ClassicalConfig {
    /// Rescales every vector to `length`.
    pub fn new(spins: Vec<Vector3<f64>>, length: f64) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidSpec(format!("spin length must be > 0, got {length}")));
        }
        if spins.iter().any(|s| !(s.norm() > 0.0) || !s.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidSpec("classical spins must be finite and non-zero".into()));
        }
        let mut config = ClassicalConfig { spins, length };
        config.renormalize();
        Ok(config)
    }

    #[cfg(test)]
    pub(crate) fn unchecked(spins: Vec<Vector3<f64>>, length: f64) -> Self {
        ClassicalConfig { spins, length }
    }

    /// All spins along `+z` with length `S`.
    pub fn polarized_up(spec: &SystemSpec) -> Self {
        ClassicalConfig {
            spins: vec![Vector3::z() * spec.spin.value(); spec.sites],
            length: spec.spin.value(),
        }
    }

    pub fn renormalize(&mut self) {
        for s in &mut self.spins {
            *s *= self.length / s.norm();
        }
    }

    pub fn max_length_error(&self) -> f64 {
        self.spins.iter().map(|s| (s.norm() - self.length).abs()).fold(0.0, f64::max)
    }

    fn is_finite(&self) -> bool {
        self.spins.iter().all(|s| s.iter().all(|c| c.is_finite()))
    }

    fn axpy(&self, h: f64, k: &[Vector3<f64>]) -> ClassicalConfig {
        ClassicalConfig {
            spins: self.spins.iter().zip(k).map(|(s, d)| s + d * h).collect(),
            length: self.length,
        }
    }
}

fn rhs(
    config: &ClassicalConfig,
    spec: &SystemSpec,
    t: f64,
    form: EquationForm,
    extra: Option<&[Vector3<f64>]>,
) -> Vec<Vector3<f64>> {
    let pre = form.prefactor(spec.damping);
    let relax = spec.damping / config.length;
    (0..config.spins.len())
        .map(|n| {
            let s = config.spins[n];
            let mut b = effective_field_unchecked(&config.spins, spec, n, t);
            if let Some(xi) = extra {
                b += xi[n];
            }
            let precession = s.cross(&b);
            let relaxation = s.cross(&precession);
            (precession - relaxation * relax) * pre
        })
        .collect()
}

/// `dS/dt = S × B_eff - λ S × (S × B_eff)` per site (unit-direction scaled).
pub fn ll_rhs(config: &ClassicalConfig, spec: &SystemSpec, t: f64) -> Vec<Vector3<f64>> {
    rhs(config, spec, t, EquationForm::Ll, None)
}

/// [`ll_rhs`] divided by `1 + λ²`.
pub fn llg_rhs(config: &ClassicalConfig, spec: &SystemSpec, t: f64) -> Vec<Vector3<f64>> {
    rhs(config, spec, t, EquationForm::Llg, None)
}

pub fn classical_rhs(config: &ClassicalConfig, spec: &SystemSpec, t: f64, form: EquationForm) -> Vec<Vector3<f64>> {
    rhs(config, spec, t, form, None)
}

fn rk4_step(config: &ClassicalConfig, spec: &SystemSpec, t: f64, dt: f64, form: EquationForm) -> ClassicalConfig {
    let k1 = rhs(config, spec, t, form, None);
    let k2 = rhs(&config.axpy(dt / 2.0, &k1), spec, t + dt / 2.0, form, None);
    let k3 = rhs(&config.axpy(dt / 2.0, &k2), spec, t + dt / 2.0, form, None);
    let k4 = rhs(&config.axpy(dt, &k3), spec, t + dt, form, None);
    ClassicalConfig {
        spins: (0..config.spins.len())
            .map(|n| config.spins[n] + (k1[n] + (k2[n] + k3[n]) * 2.0 + k4[n]) * (dt / 6.0))
            .collect(),
        length: config.length,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalRunSummary {
    pub steps: u64,
    pub final_config: ClassicalConfig,
}

fn check_start(config0: &ClassicalConfig, spec: &SystemSpec) -> Result<()> {
    spec.validate()?;
    if config0.spins.len() != spec.sites {
        return Err(Error::DimensionMismatch {
            expected: spec.sites,
            got: config0.spins.len(),
        });
    }
    Ok(())
}

/// Fixed-step RK4 integration of the LL or LLG equation. The observer sees
/// every `sample_every`-th step and the final one.
pub fn integrate_classical<F>(
    config0: &ClassicalConfig,
    spec: &SystemSpec,
    form: EquationForm,
    cfg: &IntegratorConfig,
    t_end: f64,
    mut observer: F,
) -> Result<ClassicalRunSummary>
where
    F: FnMut(f64, &ClassicalConfig),
{
    check_start(config0, spec)?;
    let steps = cfg.steps(t_end)?;
    let mut config = config0.clone();
    observer(0.0, &config);
    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        config = rk4_step(&config, spec, t, cfg.dt, form);
        if cfg.renormalize {
            config.renormalize();
        }
        if !config.is_finite() {
            return Err(Error::NonFinite { t: t + cfg.dt });
        }
        if cfg.samples_at(k + 1, steps) {
            observer((k + 1) as f64 * cfg.dt, &config);
        }
    }
    Ok(ClassicalRunSummary {
        steps,
        final_config: config,
    })
}

/// One Heun step with the noise realization `xi` held fixed over the step;
/// spins are projected back to length `S` afterwards.
pub fn stochastic_step(
    config: &ClassicalConfig,
    spec: &SystemSpec,
    form: EquationForm,
    t: f64,
    dt: f64,
    xi: &[Vector3<f64>],
) -> ClassicalConfig {
    let k1 = rhs(config, spec, t, form, Some(xi));
    let predictor = config.axpy(dt, &k1);
    let k2 = rhs(&predictor, spec, t + dt, form, Some(xi));
    let mut next = ClassicalConfig {
        spins: (0..config.spins.len())
            .map(|n| config.spins[n] + (k1[n] + k2[n]) * (dt / 2.0))
            .collect(),
        length: config.length,
    };
    next.renormalize();
    next
}

/// Stochastic LLG step: both terms and the noise over `1 + λ²`.
pub fn stochastic_llg_step(
    config: &ClassicalConfig,
    spec: &SystemSpec,
    t: f64,
    dt: f64,
    xi: &[Vector3<f64>],
) -> ClassicalConfig {
    stochastic_step(config, spec, EquationForm::Llg, t, dt, xi)
}

/// Heun integration with fresh piecewise-constant noise every step. `member`
/// selects an independent noise stream.
#[allow(clippy::too_many_arguments)]
pub fn integrate_stochastic<F>(
    config0: &ClassicalConfig,
    spec: &SystemSpec,
    noise: &NoiseSpec,
    member: u64,
    form: EquationForm,
    cfg: &IntegratorConfig,
    t_end: f64,
    mut observer: F,
) -> Result<ClassicalRunSummary>
where
    F: FnMut(f64, &ClassicalConfig),
{
    check_start(config0, spec)?;
    if !(noise.strength >= 0.0 && noise.strength.is_finite()) {
        return Err(Error::InvalidSpec(format!("noise strength must be >= 0, got {}", noise.strength)));
    }
    let steps = cfg.steps(t_end)?;
    let mut config = config0.clone();
    observer(0.0, &config);
    for k in 0..steps {
        let t = k as f64 * cfg.dt;
        let xi = sample_noise_fields(noise, member, k, spec.sites, cfg.dt);
        config = stochastic_step(&config, spec, form, t, cfg.dt, &xi);
        if !config.is_finite() {
            return Err(Error::NonFinite { t: t + cfg.dt });
        }
        if cfg.samples_at(k + 1, steps) {
            observer((k + 1) as f64 * cfg.dt, &config);
        }
    }
    Ok(ClassicalRunSummary {
        steps,
        final_config: config,
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{classical_energy as energy, PulseSpec};
    use crate::spin_algebra::Spin;

    fn single(spin: Spin, field_z: f64, damping: f64) -> SystemSpec {
        SystemSpec {
            sites: 1,
            spin,
            exchange: 0.0,
            field_z,
            pulse: None,
            damping,
        }
    }

    fn tilted(theta: f64, length: f64) -> ClassicalConfig {
        ClassicalConfig::new(vec![Vector3::new(theta.sin(), 0.0, theta.cos())], length).unwrap()
    }

    #[test]
    fn aligned_spin_is_fixed_point() {
        let spec = single(Spin::ONE, 2.0, 0.3);
        let c = ClassicalConfig::polarized_up(&spec);
        for d in ll_rhs(&c, &spec, 0.0) {
            assert!(d.norm() < 1e-15);
        }
    }

    #[test]
    fn derivative_orthogonal_to_spin() {
        let spec = SystemSpec {
            sites: 3,
            spin: Spin::ONE,
            exchange: 1.3,
            field_z: -0.4,
            pulse: Some(PulseSpec {
                amplitude: 2.0,
                center: 0.0,
                width: 1.0,
                site: 0,
            }),
            damping: 0.4,
        };
        let c = ClassicalConfig::new(
            vec![Vector3::new(0.3, 0.1, 0.9), Vector3::new(-0.6, 0.2, 0.1), Vector3::new(0.2, -0.7, 0.3)],
            1.0,
        )
        .unwrap();
        for (s, d) in c.spins.iter().zip(ll_rhs(&c, &spec, 0.2)) {
            assert!(s.dot(&d).abs() < 1e-14);
        }
    }

    #[test]
    fn llg_is_ll_over_one_plus_lambda_squared() {
        let spec = single(Spin::ONE, 1.5, 0.7);
        let c = tilted(0.8, 1.0);
        let ll = ll_rhs(&c, &spec, 0.0);
        let llg = llg_rhs(&c, &spec, 0.0);
        for (a, b) in ll.iter().zip(&llg) {
            assert!((a / (1.0 + 0.49) - b).norm() < 1e-15);
        }
        let undamped = single(Spin::ONE, 1.5, 0.0);
        assert_eq!(ll_rhs(&c, &undamped, 0.0), llg_rhs(&c, &undamped, 0.0));
    }

    #[test]
    fn undamped_precession_matches_circle() {
        let b = 2.0;
        let spec = single(Spin::ONE, b, 0.0);
        let theta = 0.6;
        let c0 = tilted(theta, 1.0);
        let cfg = IntegratorConfig::with_dt(1e-3);
        let mut worst = 0.0_f64;
        integrate_classical(&c0, &spec, EquationForm::Ll, &cfg, 10.0, |t, c| {
            // dS/dt = S × B ẑ rotates clockwise about z at rate B.
            let expected = Vector3::new(theta.sin() * (b * t).cos(), -theta.sin() * (b * t).sin(), theta.cos());
            worst = worst.max((c.spins[0] - expected).norm());
        })
        .unwrap();
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn undamped_long_run_conserves_length_and_sz() {
        let spec = single(Spin::HALF, 3.0, 0.0);
        let c0 = tilted(1.1, 0.5);
        let z0 = c0.spins[0].z;
        let cfg = IntegratorConfig::with_dt(1e-3);
        let run = integrate_classical(&c0, &spec, EquationForm::Llg, &cfg, 100.0, |_, _| {}).unwrap();
        assert!(run.final_config.max_length_error() < 1e-9);
        assert!((run.final_config.spins[0].z - z0).abs() < 1e-9);
    }

    #[test]
    fn llg_relaxation_matches_closed_form() {
        // For a unit direction in B ẑ, cos θ(t) = tanh(λ B t/(1+λ²) + atanh cos θ0),
        // independent of the spin length.
        let (b, lambda, theta) = (1.2, 0.4, 2.0);
        let spec = single(Spin::HALF, b, lambda);
        let c0 = tilted(theta, 0.5);
        let cfg = IntegratorConfig::with_dt(1e-3);
        let rate = lambda * b / (1.0 + lambda * lambda);
        let mut worst = 0.0_f64;
        integrate_classical(&c0, &spec, EquationForm::Llg, &cfg, 15.0, |t, c| {
            let expected = (rate * t + theta.cos().atanh()).tanh();
            worst = worst.max((c.spins[0].z / c.length - expected).abs());
        })
        .unwrap();
        assert!(worst < 1e-9, "{worst}");
    }

    #[test]
    fn damped_energy_non_increasing() {
        let spec = SystemSpec {
            sites: 3,
            spin: Spin::ONE,
            exchange: 1.0,
            field_z: 0.5,
            pulse: None,
            damping: 0.2,
        };
        let c0 = ClassicalConfig::new(
            vec![Vector3::new(0.7, 0.1, 0.7), Vector3::new(-0.3, 0.9, 0.2), Vector3::new(0.0, 0.3, -0.9)],
            1.0,
        )
        .unwrap();
        let mut last = f64::INFINITY;
        let cfg = IntegratorConfig::with_dt(1e-3);
        integrate_classical(&c0, &spec, EquationForm::Llg, &cfg, 20.0, |t, c| {
            let e = energy(c, &spec, t);
            assert!(e <= last + 1e-12);
            last = e;
        })
        .unwrap();
    }

    #[test]
    fn undamped_energy_conserved() {
        let spec = SystemSpec {
            sites: 3,
            spin: Spin::ONE,
            exchange: 1.0,
            field_z: 0.5,
            pulse: None,
            damping: 0.0,
        };
        let c0 = ClassicalConfig::new(
            vec![Vector3::new(0.7, 0.1, 0.7), Vector3::new(-0.3, 0.9, 0.2), Vector3::new(0.0, 0.3, -0.9)],
            1.0,
        )
        .unwrap();
        let e0 = energy(&c0, &spec, 0.0);
        let cfg = IntegratorConfig::with_dt(1e-3);
        let t_end = 10.0;
        let run = integrate_classical(&c0, &spec, EquationForm::Ll, &cfg, t_end, |_, _| {}).unwrap();
        assert!((energy(&run.final_config, &spec, t_end) - e0).abs() < 1e-8 * t_end);
    }

    #[test]
    fn noiseless_heun_matches_deterministic_step() {
        let spec = single(Spin::ONE, 1.0, 0.3);
        let c = tilted(0.5, 1.0);
        let dt = 1e-3;
        let zero = vec![Vector3::zeros()];
        let noisy = stochastic_llg_step(&c, &spec, 0.0, dt, &zero);
        // Heun on the same deterministic right-hand side.
        let k1 = llg_rhs(&c, &spec, 0.0);
        let pred = c.axpy(dt, &k1);
        let k2 = llg_rhs(&pred, &spec, dt);
        let mut expected = c.axpy(dt / 2.0, &[k1[0] + k2[0]]);
        expected.renormalize();
        assert!((noisy.spins[0] - expected.spins[0]).norm() < 1e-12);
    }

    #[test]
    fn stochastic_step_preserves_length() {
        let spec = single(Spin::HALF, 1.0, 0.3);
        let c = tilted(0.5, 0.5);
        let xi = vec![Vector3::new(30.0, -12.0, 4.0)];
        let next = stochastic_llg_step(&c, &spec, 0.0, 1e-3, &xi);
        assert!(next.max_length_error() < 1e-12);
    }

    #[test]
    fn rejects_mismatched_configs() {
        let spec = single(Spin::HALF, 1.0, 0.3);
        let c = ClassicalConfig::new(vec![Vector3::z(); 2], 0.5).unwrap();
        let cfg = IntegratorConfig::default();
        assert!(integrate_classical(&c, &spec, EquationForm::Llg, &cfg, 1.0, |_, _| {}).is_err());
        assert!(ClassicalConfig::new(vec![Vector3::zeros()], 1.0).is_err());
    }

    fn ensemble_final_sz(strength: f64, members: u64) -> (f64, f64) {
        let spec = single(Spin::ONE, 1.0, 0.5);
        let noise = NoiseSpec { strength, seed: 5 };
        let cfg = IntegratorConfig::with_dt(0.01);
        let start = tilted(1.0, 1.0);
        let finals: Vec<f64> = (0..members)
            .map(|m| {
                integrate_stochastic(&start, &spec, &noise, m, EquationForm::Llg, &cfg, 3.0, |_, _| {})
                    .unwrap()
                    .final_config
                    .spins[0]
                    .z
            })
            .collect();
        let n = finals.len() as f64;
        let mean = finals.iter().sum::<f64>() / n;
        let var = finals.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn noise_lowers_mean_and_spreads_ensemble() {
        let (deterministic, spread0) = ensemble_final_sz(0.0, 2);
        assert_eq!(spread0, 0.0);
        let (weak_mean, weak_spread) = ensemble_final_sz(0.02, 1000);
        let (strong_mean, strong_spread) = ensemble_final_sz(0.2, 1000);
        assert!(weak_mean < deterministic, "{weak_mean} vs {deterministic}");
        assert!(strong_mean < weak_mean, "{strong_mean} vs {weak_mean}");
        assert!(strong_spread > weak_spread && weak_spread > 0.0);
    }
}
