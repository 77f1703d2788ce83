//! Pure-state and density-matrix propagation under the norm-conserving
//! non-Hermitian Schrödinger equation
//! `i dψ/dt = (H - iλ[H - <H>])ψ` (LL form), its `1/(1+λ²)`-rescaled LLG
//! form, and the matching nonlinear Liouville equation.

use nalgebra::{DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::integrator::{EquationForm, IntegratorConfig};
use crate::model::{sample_noise_fields, Hamiltonian, NoiseCoupling, NoiseSpec};
use crate::spin_algebra::{anticommutator, commutator, max_abs, ComplexMatrix};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// A normalized pure state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector(DVector<Complex64>);

impl StateVector {
    /// Normalizes `amplitudes`; fails on a zero vector.
    pub fn from_amplitudes(amplitudes: DVector<Complex64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroNorm);
        }
        Ok(StateVector(amplitudes.unscale(norm)))
    }

    /// Wraps amplitudes as they are, without normalizing.
    pub fn from_raw(amplitudes: DVector<Complex64>) -> Self {
        StateVector(amplitudes)
    }

    /// Basis state `index` of a `dim`-dimensional space. Index 0 is the
    /// fully polarized `+z` product state.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = DVector::zeros(dim);
        v[index] = real(1.0);
        StateVector(v)
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.0
    }

    pub fn into_inner(self) -> DVector<Complex64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.norm_squared()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.0.dotc(&other.0)
    }

    pub fn distance(&self, other: &StateVector) -> f64 {
        (&self.0 - &other.0).norm()
    }

    fn normalize(&mut self) {
        let n = self.0.norm();
        self.0.unscale_mut(n);
    }

    fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// A Hermitian, unit-trace density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(ComplexMatrix);

impl DensityMatrix {
    pub fn from_pure(psi: &StateVector) -> Self {
        let v = psi.amplitudes();
        DensityMatrix(v * v.adjoint())
    }

    /// Validates squareness, Hermiticity and unit trace (within 1e-9).
    pub fn from_matrix(m: ComplexMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        if max_abs(&(&m - m.adjoint())) > 1e-9 {
            return Err(Error::InvalidSpec("density matrix is not Hermitian".into()));
        }
        let tr = m.trace();
        if (tr - real(1.0)).norm() > 1e-9 {
            return Err(Error::InvalidSpec(format!("density matrix trace is {tr}, expected 1")));
        }
        Ok(DensityMatrix(m))
    }

    pub fn from_raw(m: ComplexMatrix) -> Self {
        DensityMatrix(m)
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// Symmetrizes and rescales to unit trace.
    fn renormalize(&mut self) {
        let h = (&self.0 + self.0.adjoint()).map(|c| c * 0.5);
        let tr = h.trace().re;
        self.0 = h.unscale(tr);
    }

    fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

fn check_square(h: &ComplexMatrix, dim: usize) -> Result<()> {
    if h.nrows() != dim || h.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: h.nrows(),
        });
    }
    Ok(())
}

/// `pre · (-iHψ - λ(H - <H>)ψ)` with `<H>` the Rayleigh quotient of `ψ`.
fn nonlinear_rhs(psi: &DVector<Complex64>, mut hpsi: DVector<Complex64>, damping: f64, pre: f64) -> DVector<Complex64> {
    let energy = psi.dotc(&hpsi).re / psi.norm_squared();
    // hpsi <- pre * ((-i - λ) Hψ + λ<H> ψ)
    hpsi *= Complex64::new(-damping, -1.0) * pre;
    hpsi.axpy(real(damping * energy * pre), psi, real(1.0));
    hpsi
}

/// `dψ/dt = -iHψ - λ(H - <H>)ψ`.
pub fn tdse_rhs_ll(psi: &StateVector, h: &ComplexMatrix, damping: f64) -> Result<DVector<Complex64>> {
    tdse_rhs(psi, h, damping, EquationForm::Ll)
}

/// [`tdse_rhs_ll`] divided by `1 + λ²`.
pub fn tdse_rhs_llg(psi: &StateVector, h: &ComplexMatrix, damping: f64) -> Result<DVector<Complex64>> {
    tdse_rhs(psi, h, damping, EquationForm::Llg)
}

pub fn tdse_rhs(psi: &StateVector, h: &ComplexMatrix, damping: f64, form: EquationForm) -> Result<DVector<Complex64>> {
    check_square(h, psi.dim())?;
    Ok(nonlinear_rhs(psi.amplitudes(), h * psi.amplitudes(), damping, form.prefactor(damping)))
}

#[derive(Clone, Debug)]
pub struct PureRunSummary {
    pub steps: u64,
    pub final_state: StateVector,
    /// Largest `|<ψ|ψ> - 1|` seen after a raw RK4 step, before any
    /// renormalization.
    pub max_norm_drift: f64,
}

struct Noise<'a> {
    coupling: &'a NoiseCoupling,
    spec: &'a NoiseSpec,
    member: u64,
    sites: usize,
}

#[allow(clippy::too_many_arguments)]
fn evolve_pure_impl<F>(
    psi0: &StateVector,
    ham: &Hamiltonian,
    damping: f64,
    form: EquationForm,
    cfg: &IntegratorConfig,
    t_end: f64,
    noise: Option<Noise<'_>>,
    mut observer: F,
) -> Result<PureRunSummary>
where
    F: FnMut(f64, &StateVector),
{
    if psi0.dim() != ham.dim() {
        return Err(Error::DimensionMismatch {
            expected: ham.dim(),
            got: psi0.dim(),
        });
    }
    if !(damping >= 0.0 && damping.is_finite()) {
        return Err(Error::InvalidSpec(format!("damping must be >= 0, got {damping}")));
    }
    cfg.check_step(ham.spectral_bound())?;
    let steps = cfg.steps(t_end)?;
    let pre = form.prefactor(damping);
    let dt = cfg.dt;

    let mut psi = psi0.clone();
    let mut max_norm_drift = 0.0_f64;
    observer(0.0, &psi);
    for k in 0..steps {
        let t = k as f64 * dt;
        let xi = noise
            .as_ref()
            .map(|n| sample_noise_fields(n.spec, n.member, k, n.sites, dt));
        let f = |time: f64, v: &DVector<Complex64>| {
            let mut hv = ham.apply(time, v);
            if let (Some(n), Some(xi)) = (&noise, &xi) {
                hv += n.coupling.apply(xi, v);
            }
            nonlinear_rhs(v, hv, damping, pre)
        };
        let y = psi.amplitudes();
        let k1 = f(t, y);
        let k2 = f(t + dt / 2.0, &(y + &k1 * real(dt / 2.0)));
        let k3 = f(t + dt / 2.0, &(y + &k2 * real(dt / 2.0)));
        let k4 = f(t + dt, &(y + &k3 * real(dt)));
        let next = y + (k1 + (k2 + k3) * real(2.0) + k4) * real(dt / 6.0);
        psi = StateVector::from_raw(next);
        if !psi.is_finite() {
            return Err(Error::NonFinite { t: t + dt });
        }
        max_norm_drift = max_norm_drift.max((psi.norm_sqr() - 1.0).abs());
        if cfg.renormalize {
            psi.normalize();
        }
        if cfg.samples_at(k + 1, steps) {
            observer((k + 1) as f64 * dt, &psi);
        }
    }
    Ok(PureRunSummary {
        steps,
        final_state: psi,
        max_norm_drift,
    })
}

/// Fixed-step RK4 propagation of a pure state. `<H>` is re-evaluated at
/// every stage; pulses are sampled at the stage times.
pub fn evolve_pure<F>(
    psi0: &StateVector,
    ham: &Hamiltonian,
    damping: f64,
    form: EquationForm,
    cfg: &IntegratorConfig,
    t_end: f64,
    observer: F,
) -> Result<PureRunSummary>
where
    F: FnMut(f64, &StateVector),
{
    evolve_pure_impl(psi0, ham, damping, form, cfg, t_end, None, observer)
}

/// [`evolve_pure`] with the stochastic term `H_ξ = -Σ ξ_n · S_n` added,
/// `ξ` held constant over each step.
#[allow(clippy::too_many_arguments)]
pub fn evolve_pure_stochastic<F>(
    psi0: &StateVector,
    ham: &Hamiltonian,
    coupling: &NoiseCoupling,
    noise: &NoiseSpec,
    member: u64,
    damping: f64,
    form: EquationForm,
    cfg: &IntegratorConfig,
    t_end: f64,
    observer: F,
) -> Result<PureRunSummary>
where
    F: FnMut(f64, &StateVector),
{
    let noise = Noise {
        coupling,
        spec: noise,
        member,
        sites: ham.sites(),
    };
    evolve_pure_impl(psi0, ham, damping, form, cfg, t_end, Some(noise), observer)
}

/// Eigendecomposition of a time-independent Hermitian `H`, reused across
/// closed-form propagations.
#[derive(Clone, Debug)]
pub struct ClosedFormPropagator {
    energies: DVector<f64>,
    vectors: ComplexMatrix,
}

impl ClosedFormPropagator {
    pub fn new(h: &ComplexMatrix) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::DimensionMismatch {
                expected: h.nrows(),
                got: h.ncols(),
            });
        }
        if max_abs(&(h - h.adjoint())) > 1e-12 {
            return Err(Error::InvalidSpec("closed-form propagation needs a Hermitian matrix".into()));
        }
        let SymmetricEigen {
            eigenvalues,
            eigenvectors,
        } = h.clone().symmetric_eigen();
        Ok(ClosedFormPropagator {
            energies: eigenvalues,
            vectors: eigenvectors,
        })
    }

    /// `e^{-iHt} e^{-λHt} ψ0`, renormalized.
    pub fn propagate(&self, psi0: &StateVector, damping: f64, t: f64) -> Result<StateVector> {
        check_square(&self.vectors, psi0.dim())?;
        let e_min = self.energies.min();
        let mut c = self.vectors.adjoint() * psi0.amplitudes();
        for (ck, &e) in c.iter_mut().zip(self.energies.iter()) {
            // Shift by E_min so the damping factor never overflows.
            *ck *= (-I * e * t).exp() * (-damping * (e - e_min) * t).exp();
        }
        StateVector::from_amplitudes(&self.vectors * c)
    }

    pub fn energies(&self) -> &DVector<f64> {
        &self.energies
    }
}

/// Exact solution of the LL-form equation for time-independent `H`.
pub fn closed_form_propagate(psi0: &StateVector, h: &ComplexMatrix, damping: f64, t: f64) -> Result<StateVector> {
    ClosedFormPropagator::new(h)?.propagate(psi0, damping, t)
}

/// `dρ/dt = i[ρ,H] - λ[ρ,[ρ,H]]`.
pub fn liouville_rhs(rho: &ComplexMatrix, h: &ComplexMatrix, damping: f64) -> Result<ComplexMatrix> {
    check_square(h, rho.nrows())?;
    let c = commutator(rho, h);
    let double = commutator(rho, &c);
    Ok(c * I - double * real(damping))
}

/// `dρ/dt = i[ρ,H] - λ({ρ,H} - 2ρHρ)`; equal to [`liouville_rhs`] for pure `ρ`.
pub fn liouville_rhs_anticommutator(rho: &ComplexMatrix, h: &ComplexMatrix, damping: f64) -> Result<ComplexMatrix> {
    check_square(h, rho.nrows())?;
    let c = commutator(rho, h);
    let a = anticommutator(rho, h);
    let rhr = rho * h * rho;
    Ok(c * I - (a - rhr * real(2.0)) * real(damping))
}

#[derive(Clone, Debug)]
pub struct DensityRunSummary {
    pub steps: u64,
    pub final_state: DensityMatrix,
}

/// RK4 integration of the nonlinear Liouville equation.
pub fn evolve_density<F>(
    rho0: &DensityMatrix,
    ham: &Hamiltonian,
    damping: f64,
    form: EquationForm,
    cfg: &IntegratorConfig,
    t_end: f64,
    mut observer: F,
) -> Result<DensityRunSummary>
where
    F: FnMut(f64, &DensityMatrix),
{
    check_square(rho0.matrix(), ham.dim())?;
    cfg.check_step(ham.spectral_bound())?;
    let steps = cfg.steps(t_end)?;
    let pre = real(form.prefactor(damping));
    let dt = cfg.dt;
    let f = |t: f64, r: &ComplexMatrix| -> ComplexMatrix {
        let h = ham.at(t);
        let c = commutator(r, &h);
        let double = commutator(r, &c);
        (c * I - double * real(damping)) * pre
    };
    let mut rho = rho0.clone();
    observer(0.0, &rho);
    for k in 0..steps {
        let t = k as f64 * dt;
        let y = rho.matrix();
        let k1 = f(t, y);
        let k2 = f(t + dt / 2.0, &(y + &k1 * real(dt / 2.0)));
        let k3 = f(t + dt / 2.0, &(y + &k2 * real(dt / 2.0)));
        let k4 = f(t + dt, &(y + &k3 * real(dt)));
        rho = DensityMatrix::from_raw(y + (k1 + (k2 + k3) * real(2.0) + k4) * real(dt / 6.0));
        if !rho.is_finite() {
            return Err(Error::NonFinite { t: t + dt });
        }
        if cfg.renormalize {
            rho.renormalize();
        }
        if cfg.samples_at(k + 1, steps) {
            observer((k + 1) as f64 * dt, &rho);
        }
    }
    Ok(DensityRunSummary {
        steps,
        final_state: rho,
    })
}

/// Derivative of `<op>` along the LL flow minus the closed expectation-value
/// form `-i<[op,H]> - λ(<{op,H}> - 2<H><op>)`. Zero up to round-off.
pub fn expectation_rhs_check(psi: &StateVector, op: &ComplexMatrix, h: &ComplexMatrix, damping: f64) -> Result<f64> {
    check_square(op, psi.dim())?;
    let dpsi = tdse_rhs_ll(psi, h, damping)?;
    let v = psi.amplitudes();
    let op_v = op * v;
    // d<ψ|op|ψ>/dt = <dψ|op ψ> + <ψ|op dψ>
    let lhs = dpsi.dotc(&op_v) + v.dotc(&(op * &dpsi));
    let ev = |m: &ComplexMatrix| v.dotc(&(m * v));
    let energy = ev(h);
    let rhs = -I * ev(&commutator(op, h)) - real(damping) * (ev(&anticommutator(op, h)) - real(2.0) * energy * ev(op));
    Ok((lhs - rhs).norm())
}

/// `e^{-βH} / Tr e^{-βH}`, via eigendecomposition with the ground energy
/// shifted out.
pub fn thermal_state(h: &ComplexMatrix, beta: f64) -> Result<DensityMatrix> {
    if !(beta >= 0.0) {
        return Err(Error::InvalidSpec(format!("inverse temperature must be >= 0, got {beta}")));
    }
    let prop = ClosedFormPropagator::new(h)?;
    let e_min = prop.energies.min();
    let weights: Vec<f64> = prop.energies.iter().map(|&e| (-beta * (e - e_min)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let diag = DVector::from_iterator(weights.len(), weights.iter().map(|w| real(w / z)));
    let rho = &prop.vectors * ComplexMatrix::from_diagonal(&diag) * prop.vectors.adjoint();
    let mut rho = DensityMatrix::from_raw(rho);
    rho.renormalize();
    Ok(rho)
}

#[derive(Clone, Debug)]
pub struct StatisticalRunSummary {
    pub steps: u64,
    pub final_state: DensityMatrix,
    /// Most fixed-point iterations any single step needed.
    pub max_iterations: usize,
}

const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_MAX_ITERS: usize = 100;

/// Propagates `ρ(t) = U ρ(0) U†` with `U = e^{-iHt} e^{-λHt} e^{λ<H>t}`
/// one step at a time. Each step solves `<H> = ½(Tr ρH + Tr ρ'H)` with
/// `ρ' = U(dt) ρ U(dt)†` by fixed-point iteration, then rescales to unit
/// trace.
pub fn evolve_statistical<F>(
    rho0: &DensityMatrix,
    h: &ComplexMatrix,
    damping: f64,
    form: EquationForm,
    cfg: &IntegratorConfig,
    t_end: f64,
    mut observer: F,
) -> Result<StatisticalRunSummary>
where
    F: FnMut(f64, &DensityMatrix),
{
    check_square(h, rho0.dim())?;
    let steps = cfg.steps(t_end)?;
    let prop = ClosedFormPropagator::new(h)?;
    let tau = cfg.dt * form.prefactor(damping);
    let energies = &prop.energies;
    let v = &prop.vectors;
    let e_min = energies.min();
    // Decay factors shifted by E_min; the shift is a scalar and drops out
    // of the fixed point together with the trace renormalization.
    let base: Vec<Complex64> = energies
        .iter()
        .map(|&e| (-I * e * tau).exp() * (-damping * (e - e_min) * tau).exp())
        .collect();

    let mut eig_rho = v.adjoint() * rho0.matrix() * v;
    let energy_of = |r: &ComplexMatrix| -> f64 { (0..r.nrows()).map(|k| energies[k] * r[(k, k)].re).sum() };
    let to_lab = |r: &ComplexMatrix| {
        let mut lab = DensityMatrix::from_raw(v * r * v.adjoint());
        lab.renormalize();
        lab
    };

    let mut max_iterations = 0;
    observer(0.0, rho0);
    for k in 0..steps {
        let start_energy = energy_of(&eig_rho) / eig_rho.trace().re;
        let mut guess = start_energy;
        let mut iterations = 0;
        let propagated = loop {
            iterations += 1;
            let scale = (damping * (guess - e_min) * tau).exp();
            let next = ComplexMatrix::from_fn(eig_rho.nrows(), eig_rho.ncols(), |a, b| {
                base[a] * eig_rho[(a, b)] * base[b].conj() * (scale * scale)
            });
            let updated = 0.5 * (start_energy + energy_of(&next));
            let residual = (updated - guess).abs();
            guess = updated;
            if residual <= FIXED_POINT_TOL * (1.0 + guess.abs()) || damping == 0.0 {
                break next;
            }
            if iterations >= FIXED_POINT_MAX_ITERS {
                return Err(Error::FixedPoint { iterations, residual });
            }
        };
        max_iterations = max_iterations.max(iterations);
        let tr = propagated.trace().re;
        eig_rho = propagated.unscale(tr);
        if !eig_rho.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::NonFinite {
                t: (k + 1) as f64 * cfg.dt,
            });
        }
        if cfg.samples_at(k + 1, steps) {
            observer((k + 1) as f64 * cfg.dt, &to_lab(&eig_rho));
        }
    }
    Ok(StatisticalRunSummary {
        steps,
        final_state: to_lab(&eig_rho),
        max_iterations,
    })
}
