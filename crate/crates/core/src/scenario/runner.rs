use nalgebra::DVector;
use num_complex::Complex64;

use crate::classical::{integrate_classical, integrate_stochastic, ClassicalConfig};
use crate::error::Result;
use crate::model::{classical_energy, Hamiltonian, NoiseCoupling};
use crate::observables::{probabilities, site_observables, spin_length, total_m_occupations, SiteObservables};
use crate::quantum::{evolve_pure, evolve_pure_stochastic, StateVector};
use crate::scenario::config::ScenarioConfig;
use crate::scenario::dataset::{Metadata, RunKind, Sample, TrajectoryDataset};

fn metadata(config: &ScenarioConfig, kind: RunKind, members: usize, drift: Option<f64>) -> Result<Metadata> {
    Ok(Metadata {
        kind,
        config: config.clone(),
        system: config.system_spec(),
        integrator: config.integrator()?,
        form: config.scheme,
        seed: config.seed,
        members,
        max_norm_drift: drift,
        version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

/// Runs `f` for members `0..n`, in parallel when the feature is enabled.
/// Results come back in member order.
fn run_members<T, F>(n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n as u64).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n as u64).map(f).collect()
    }
}

/// Member-wise mean in a fixed summation order, so ensemble output does
/// not depend on scheduling.
fn ensemble_mean(runs: Vec<Vec<Sample>>) -> Vec<Sample> {
    let n = runs.len() as f64;
    let mut iter = runs.into_iter();
    let mut acc = iter.next().unwrap_or_default();
    if n == 1.0 {
        return acc;
    }
    for run in iter {
        for (a, b) in acc.iter_mut().zip(run) {
            for (sa, sb) in a.sites.iter_mut().zip(&b.sites) {
                sa.sx += sb.sx;
                sa.sy += sb.sy;
                sa.sz += sb.sz;
                sa.length += sb.length;
                sa.entropy += sb.entropy;
            }
            a.energy += b.energy;
            if let (Some(x), Some(y)) = (a.norm.as_mut(), b.norm) {
                *x += y;
            }
            if let (Some(x), Some(y)) = (a.entropy1.as_mut(), b.entropy1) {
                *x += y;
            }
            for (x, y) in a.occupations.iter_mut().zip(&b.occupations) {
                *x += y;
            }
            for (x, y) in a.classes.iter_mut().zip(&b.classes) {
                *x += y;
            }
            if let (Some(x), Some(y)) = (a.reduced1.as_mut(), &b.reduced1) {
                *x += y;
            }
        }
    }
    for a in &mut acc {
        for s in &mut a.sites {
            s.sx /= n;
            s.sy /= n;
            s.sz /= n;
            s.length /= n;
            s.entropy /= n;
        }
        a.energy /= n;
        if let Some(x) = a.norm.as_mut() {
            *x /= n;
        }
        if let Some(x) = a.entropy1.as_mut() {
            *x /= n;
        }
        a.occupations.iter_mut().for_each(|x| *x /= n);
        a.classes.iter_mut().for_each(|x| *x /= n);
        if let Some(x) = a.reduced1.as_mut() {
            *x /= Complex64::new(n, 0.0);
        }
    }
    acc
}

/// The fully polarized `+z` product state.
pub fn polarized_state(dim: usize) -> StateVector {
    StateVector::basis(dim, 0)
}

fn quantum_sample(psi: &StateVector, ham: &Hamiltonian, config: &ScenarioConfig, t: f64) -> Result<Sample> {
    let observed = site_observables(psi, config.spin, config.sites)?;
    let probs: DVector<f64> = probabilities(psi);
    let energy = psi.amplitudes().dotc(&ham.apply(t, psi.amplitudes())).re;
    let mut sites = Vec::with_capacity(observed.len());
    let mut reduced1 = None;
    for (obs, rho) in observed {
        if obs.site == 0 {
            reduced1 = Some(rho.into_inner());
        }
        sites.push(obs);
    }
    Ok(Sample {
        t,
        entropy1: Some(sites[0].entropy),
        sites,
        energy,
        norm: Some(psi.norm_sqr()),
        classes: total_m_occupations(&probs, config.spin, config.sites)
            .into_iter()
            .map(|(_, p)| p)
            .collect(),
        occupations: probs.iter().copied().collect(),
        reduced1,
    })
}

/// Integrates the damped Schrödinger equation from the polarized state.
/// With `D > 0` the columns are means over `members` noise realizations.
pub fn run_quantum(config: &ScenarioConfig) -> Result<TrajectoryDataset> {
    config.validate()?;
    let spec = config.system_spec();
    let dim = spec.hilbert_dim()?;
    let ham = Hamiltonian::build(&spec)?;
    let cfg = config.integrator()?;
    let noise = config.noise_spec();
    let coupling = if config.noise > 0.0 { Some(NoiseCoupling::new(&spec)?) } else { None };
    let psi0 = polarized_state(dim);
    let members = config.ensemble_size();

    let runs = run_members(members, |member| {
        let mut samples = Vec::new();
        let mut failure = None;
        let observer = |t: f64, psi: &StateVector| {
            if failure.is_some() {
                return;
            }
            match quantum_sample(psi, &ham, config, t) {
                Ok(s) => samples.push(s),
                Err(e) => failure = Some(e),
            }
        };
        let summary = match &coupling {
            Some(c) => evolve_pure_stochastic(
                &psi0, &ham, c, &noise, member, spec.damping, config.scheme, &cfg, config.t_end, observer,
            )?,
            None => evolve_pure(&psi0, &ham, spec.damping, config.scheme, &cfg, config.t_end, observer)?,
        };
        if let Some(e) = failure {
            return Err(e);
        }
        Ok((samples, summary.max_norm_drift))
    })?;

    let drift = runs.iter().map(|(_, d)| *d).fold(0.0, f64::max);
    let samples = ensemble_mean(runs.into_iter().map(|(s, _)| s).collect());
    let dataset = TrajectoryDataset {
        metadata: metadata(config, RunKind::Quantum, members, Some(drift))?,
        samples,
    };
    dataset.validate()?;
    Ok(dataset)
}

fn classical_sample(c: &ClassicalConfig, config: &ScenarioConfig, t: f64) -> Sample {
    let spec = config.system_spec();
    let sites = c
        .spins
        .iter()
        .enumerate()
        .map(|(n, s)| {
            let mut obs = SiteObservables {
                site: n,
                sx: s.x,
                sy: s.y,
                sz: s.z,
                length: 0.0,
                entropy: 0.0,
            };
            obs.length = spin_length(&obs);
            obs
        })
        .collect();
    Sample {
        t,
        sites,
        energy: classical_energy(c, &spec, t),
        norm: None,
        entropy1: None,
        occupations: Vec::new(),
        classes: Vec::new(),
        reduced1: None,
    }
}

/// Integrates the classical LL/LLG chain (stochastic with `D > 0`) from
/// all spins along `+z`, on the same sampling grid as [`run_quantum`].
pub fn run_classical(config: &ScenarioConfig) -> Result<TrajectoryDataset> {
    config.validate()?;
    let spec = config.system_spec();
    let cfg = config.integrator()?;
    let noise = config.noise_spec();
    let start = ClassicalConfig::polarized_up(&spec);
    let members = config.ensemble_size();

    let runs = run_members(members, |member| {
        let mut samples = Vec::new();
        let observer = |t: f64, c: &ClassicalConfig| samples.push(classical_sample(c, config, t));
        if config.noise > 0.0 {
            integrate_stochastic(&start, &spec, &noise, member, config.scheme, &cfg, config.t_end, observer)?;
        } else {
            integrate_classical(&start, &spec, config.scheme, &cfg, config.t_end, observer)?;
        }
        Ok(samples)
    })?;

    let dataset = TrajectoryDataset {
        metadata: metadata(config, RunKind::Classical, members, None)?,
        samples: ensemble_mean(runs),
    };
    dataset.validate()?;
    Ok(dataset)
}

pub fn run(config: &ScenarioConfig, kind: RunKind) -> Result<TrajectoryDataset> {
    match kind {
        RunKind::Quantum => run_quantum(config),
        RunKind::Classical => run_classical(config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_algebra::Spin;

    fn short(mut c: ScenarioConfig, t_end: f64) -> ScenarioConfig {
        c.t_end = t_end;
        c
    }

    #[test]
    fn quantum_dataset_shape() {
        let c = ScenarioConfig {
            sample_dt: Some(0.1),
            pulse_center: 0.5,
            ..short(ScenarioConfig::fig3(), 1.0)
        };
        let d = run_quantum(&c).unwrap();
        assert_eq!(d.samples.len(), 11);
        assert_eq!(d.samples[0].t, 0.0);
        assert!((d.samples[10].t - 1.0).abs() < 1e-12);
        assert_eq!(d.samples[0].occupations.len(), 8);
        assert_eq!(d.samples[0].classes.len(), 4);
        assert_eq!(d.samples[0].occupations[0], 1.0);
        assert!((d.samples[0].energy - 1.0).abs() < 1e-14);
        assert!(d.metadata.max_norm_drift.unwrap() < 1e-9);
    }

    #[test]
    fn classical_dataset_shape() {
        let c = ScenarioConfig {
            sample_dt: Some(0.5),
            ..short(ScenarioConfig::fig2(), 2.0)
        };
        let d = run_classical(&c).unwrap();
        assert_eq!(d.samples.len(), 5);
        assert!(d.samples.iter().all(|s| s.sites.len() == 3 && s.norm.is_none()));
        assert!((d.samples[0].sites[1].sz - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pure_single_spin_has_zero_entropy() {
        let d = run_quantum(&short(ScenarioConfig::fig1(), 3.0)).unwrap();
        assert!(d.samples.iter().all(|s| s.entropy1 == Some(0.0) || s.entropy1.unwrap() < 1e-12));
    }

    #[test]
    fn deterministic_and_order_independent_ensembles() {
        let c = ScenarioConfig {
            noise: 0.05,
            members: Some(4),
            seed: 11,
            sample_dt: Some(0.1),
            ..short(ScenarioConfig::fig1(), 1.0)
        };
        let a = run_quantum(&c).unwrap();
        let b = run_quantum(&c).unwrap();
        assert_eq!(a, b);
        let other = run_quantum(&ScenarioConfig { seed: 12, ..c.clone() }).unwrap();
        assert_ne!(a.samples.last(), other.samples.last());
        let ca = run_classical(&c).unwrap();
        assert_eq!(ca, run_classical(&c).unwrap());
    }

    #[test]
    fn overflow_is_reported() {
        let c = ScenarioConfig {
            sites: 12,
            spin: Spin::ONE,
            ..ScenarioConfig::fig2()
        };
        assert_eq!(run_quantum(&c).unwrap_err().exit_code(), 3);
    }
}
