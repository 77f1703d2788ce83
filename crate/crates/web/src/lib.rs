//! Browser bindings: single-spin and trimer reversal curves and the thermal
//! magnetization of a spin in a field. Arrays cross the boundary as
//! `Float64Array`s.

use wasm_bindgen::prelude::*;

use spinsim::observables::expectation;
use spinsim::quantum::thermal_state;
use spinsim::scenario::{run_classical, run_quantum, ScenarioConfig, TrajectoryDataset};
use spinsim::spin_algebra::build_spin_matrices;
use spinsim::Spin;

/// Sampled curves, stored row-major as `series × times`.
#[wasm_bindgen]
#[derive(Clone, Debug, PartialEq)]
pub struct Curves {
    times: Vec<f64>,
    names: Vec<String>,
    values: Vec<f64>,
}

#[wasm_bindgen]
impl Curves {
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    pub fn count(&self) -> usize {
        self.names.len()
    }

    pub fn name(&self, k: usize) -> String {
        self.names.get(k).cloned().unwrap_or_default()
    }

    pub fn series(&self, k: usize) -> Vec<f64> {
        let n = self.times.len();
        self.values.get(k * n..(k + 1) * n).map(<[f64]>::to_vec).unwrap_or_default()
    }
}

impl Curves {
    fn new(times: Vec<f64>) -> Self {
        Curves {
            times,
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    fn push(&mut self, name: impl Into<String>, values: impl IntoIterator<Item = f64>) {
        let before = self.values.len();
        self.values.extend(values);
        debug_assert_eq!(self.values.len() - before, self.times.len());
        self.names.push(name.into());
    }
}

fn per_site(curves: &mut Curves, d: &TrajectoryDataset, prefix: &str, f: impl Fn(&spinsim::observables::SiteObservables) -> f64) {
    for n in 0..d.sites() {
        curves.push(format!("{prefix}{}", n + 1), d.samples.iter().map(|s| f(&s.sites[n])));
    }
}

fn demo_config(mut c: ScenarioConfig, field_z: f64, damping: f64, t_end: f64) -> ScenarioConfig {
    c.field_z = field_z;
    c.lambda = damping;
    c.t_end = t_end;
    c.sample_dt = Some(0.02);
    c
}

/// Quantum and classical `S_z/S` of a single spin-1 flipped by the pulse.
pub fn single_spin_curves(field_z: f64, pulse: f64, damping: f64, t_end: f64) -> spinsim::Result<Curves> {
    let mut config = demo_config(ScenarioConfig::fig1(), field_z, damping, t_end);
    config.pulse_amplitude = pulse;
    let q = run_quantum(&config)?;
    let c = run_classical(&config)?;
    let s = config.spin.value();
    let mut curves = Curves::new(q.times());
    curves.push("quantum sz/S", q.samples.iter().map(|x| x.sites[0].sz / s));
    curves.push("classical sz/S", c.samples.iter().map(|x| x.sites[0].sz / s));
    curves.push("quantum sx/S", q.samples.iter().map(|x| x.sites[0].sx / s));
    curves.push("classical sx/S", c.samples.iter().map(|x| x.sites[0].sx / s));
    Ok(curves)
}

/// Spin-1/2 trimer reversal: per-site `S_z`, spin lengths, site-1 entropy
/// and total-M class occupations.
pub fn trimer_curves(exchange: f64, field_z: f64, damping: f64, t_end: f64) -> spinsim::Result<Curves> {
    let mut config = demo_config(ScenarioConfig::fig3(), field_z, damping, t_end);
    config.exchange = exchange;
    let q = run_quantum(&config)?;
    let mut curves = Curves::new(q.times());
    per_site(&mut curves, &q, "sz", |o| o.sz);
    per_site(&mut curves, &q, "length", |o| o.length);
    curves.push("entropy1", q.samples.iter().map(|s| s.entropy1.unwrap_or(0.0)));
    for (k, label) in q.class_labels().into_iter().enumerate() {
        curves.push(label, q.samples.iter().map(|s| s.classes[k]));
    }
    Ok(curves)
}

/// `<S_z>/S` of the thermal state of `H = -B S_z` on a grid of `β`.
pub fn thermal_curve(twice_spin: u32, field: f64, beta_max: f64, points: usize) -> spinsim::Result<Curves> {
    let spin = Spin::from_twice(twice_spin)?;
    let set = build_spin_matrices(spin);
    let h = set.sz.map(|c| c * -field);
    let points = points.max(2);
    let betas: Vec<f64> = (0..points).map(|k| beta_max * k as f64 / (points - 1) as f64).collect();
    let mut m = Vec::with_capacity(points);
    for &beta in &betas {
        let rho = thermal_state(&h, beta)?;
        m.push(expectation(&rho, &set.sz)?.re / spin.value());
    }
    let mut curves = Curves::new(betas);
    curves.push("sz/S", m);
    Ok(curves)
}

fn js(e: spinsim::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = singleSpin)]
pub fn single_spin_js(field_z: f64, pulse: f64, damping: f64, t_end: f64) -> Result<Curves, JsError> {
    single_spin_curves(field_z, pulse, damping, t_end).map_err(js)
}

#[wasm_bindgen(js_name = trimer)]
pub fn trimer_js(exchange: f64, field_z: f64, damping: f64, t_end: f64) -> Result<Curves, JsError> {
    trimer_curves(exchange, field_z, damping, t_end).map_err(js)
}

#[wasm_bindgen(js_name = thermal)]
pub fn thermal_js(twice_spin: u32, field: f64, beta_max: f64, points: usize) -> Result<Curves, JsError> {
    thermal_curve(twice_spin, field, beta_max, points).map_err(js)
}
