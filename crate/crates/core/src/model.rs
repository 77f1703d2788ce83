//! Experiment description: chain, exchange, static field, Gaussian pulse,
//! damping and the stochastic field. Assembles the quantum Hamiltonian and
//! the classical effective fields from the same description.

use nalgebra::{DVector, Vector3};
use num_complex::Complex64;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classical::ClassicalConfig;
use crate::error::{Error, Result};
use crate::spin_algebra::{build_spin_matrices, embed_block, embed_site_operator, ComplexMatrix, SiteOperators, Spin};

/// Largest dense Hilbert space dimension the simulator will allocate.
pub const MAX_DIM: usize = 4096;

/// Gaussian field pulse along x on one site:
/// `B_x(t) = B0 exp(-((t - t0)/T_W)^2 / 2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    /// Peak amplitude, with the magnetic moment absorbed.
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    /// 0-based site the pulse acts on.
    pub site: usize,
}

impl PulseSpec {
    pub fn amplitude_at(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.width;
        self.amplitude * (-0.5 * x * x).exp()
    }
}

pub fn pulse_amplitude(t: f64, pulse: &PulseSpec) -> f64 {
    pulse.amplitude_at(t)
}

/// An open Heisenberg chain in a static z field with an optional x pulse.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemSpec {
    pub sites: usize,
    pub spin: Spin,
    /// Exchange `J`; positive is ferromagnetic.
    pub exchange: f64,
    /// Static field `B_z`, moment absorbed.
    pub field_z: f64,
    pub pulse: Option<PulseSpec>,
    /// Damping `λ`.
    pub damping: f64,
}

impl SystemSpec {
    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 {
            return Err(Error::InvalidSpec("chain needs at least one site".into()));
        }
        if !(self.damping >= 0.0 && self.damping.is_finite()) {
            return Err(Error::InvalidSpec(format!("damping must be finite and >= 0, got {}", self.damping)));
        }
        if !self.exchange.is_finite() || !self.field_z.is_finite() {
            return Err(Error::InvalidSpec("exchange and field must be finite".into()));
        }
        if let Some(p) = &self.pulse {
            if !(p.width > 0.0 && p.width.is_finite()) {
                return Err(Error::InvalidSpec(format!("pulse width must be > 0, got {}", p.width)));
            }
            if !p.amplitude.is_finite() || !p.center.is_finite() {
                return Err(Error::InvalidSpec("pulse parameters must be finite".into()));
            }
            if p.site >= self.sites {
                return Err(Error::SiteOutOfRange {
                    site: p.site,
                    sites: self.sites,
                });
            }
        }
        Ok(())
    }

    /// Hilbert space dimension `(2S+1)^N`, or an overflow error past [`MAX_DIM`].
    pub fn hilbert_dim(&self) -> Result<usize> {
        let dim = (self.spin.dim() as u128).checked_pow(self.sites as u32).unwrap_or(u128::MAX);
        if dim > MAX_DIM as u128 {
            return Err(Error::DimensionOverflow { dim, limit: MAX_DIM });
        }
        Ok(dim as usize)
    }

    pub fn pulse_field(&self, t: f64) -> f64 {
        self.pulse.map_or(0.0, |p| p.amplitude_at(t))
    }
}

/// `H(t) = H_static + B_x(t) P` with `P = -S_x` on the pulsed site.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    spin: Spin,
    sites: usize,
    static_part: ComplexMatrix,
    pulse: Option<(PulseSpec, ComplexMatrix)>,
}

impl Hamiltonian {
    pub fn build(spec: &SystemSpec) -> Result<Self> {
        spec.validate()?;
        let dim = spec.hilbert_dim()?;
        let set = build_spin_matrices(spec.spin);
        let d = spec.spin.dim();
        let mut h = ComplexMatrix::zeros(dim, dim);

        if spec.exchange != 0.0 && spec.sites > 1 {
            let mut bond = ComplexMatrix::zeros(d * d, d * d);
            for op in set.components() {
                bond += op.kronecker(op);
            }
            let bond = bond * Complex64::new(-spec.exchange, 0.0);
            for n in 0..spec.sites - 1 {
                h += embed_block(spec.sites, n, 2, &bond, d)?;
            }
        }
        if spec.field_z != 0.0 {
            let zeeman = set.sz.map(|c| c * -spec.field_z);
            for n in 0..spec.sites {
                h += embed_site_operator(spec.sites, n, &zeeman, d)?;
            }
        }
        let pulse = match spec.pulse {
            Some(p) => Some((p, embed_site_operator(spec.sites, p.site, &set.sx.map(|c| -c), d)?)),
            None => None,
        };
        Ok(Hamiltonian {
            spin: spec.spin,
            sites: spec.sites,
            static_part: h,
            pulse,
        })
    }

    /// Wraps an arbitrary time-independent Hermitian matrix.
    pub fn from_matrix(h: ComplexMatrix) -> Result<Self> {
        if h.nrows() != h.ncols() {
            return Err(Error::DimensionMismatch {
                expected: h.nrows(),
                got: h.ncols(),
            });
        }
        let residual = (&h - h.adjoint()).iter().fold(0.0_f64, |a, c| a.max(c.norm()));
        if residual > 1e-12 {
            return Err(Error::InvalidSpec(format!("matrix is not Hermitian (residual {residual:e})")));
        }
        Ok(Hamiltonian {
            spin: Spin::HALF,
            sites: 0,
            static_part: h,
            pulse: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.static_part.nrows()
    }

    pub fn spin(&self) -> Spin {
        self.spin
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn is_time_independent(&self) -> bool {
        self.pulse.is_none()
    }

    pub fn static_part(&self) -> &ComplexMatrix {
        &self.static_part
    }

    pub fn at(&self, t: f64) -> ComplexMatrix {
        match &self.pulse {
            Some((p, op)) => &self.static_part + op.map(|c| c * p.amplitude_at(t)),
            None => self.static_part.clone(),
        }
    }

    /// `H(t) ψ` without assembling `H(t)`.
    pub fn apply(&self, t: f64, psi: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = &self.static_part * psi;
        if let Some((p, op)) = &self.pulse {
            let b = p.amplitude_at(t);
            if b != 0.0 {
                out.gemv(Complex64::new(b, 0.0), op, psi, Complex64::new(1.0, 0.0));
            }
        }
        out
    }

    /// Row-sum bound on the spectral radius over all times.
    pub fn spectral_bound(&self) -> f64 {
        let row_sum = |m: &ComplexMatrix| {
            m.row_iter()
                .map(|r| r.iter().map(|c| c.norm()).sum::<f64>())
                .fold(0.0, f64::max)
        };
        let mut bound = row_sum(&self.static_part);
        if let Some((p, op)) = &self.pulse {
            bound += p.amplitude.abs() * row_sum(op);
        }
        bound
    }
}

/// Builds `H(t)` for a system description.
pub fn build_hamiltonian(spec: &SystemSpec, t: f64) -> Result<ComplexMatrix> {
    Ok(Hamiltonian::build(spec)?.at(t))
}

/// Couples a stochastic field to the spins: `H_ξ = -Σ_n ξ_n · S_n`.
#[derive(Clone, Debug)]
pub struct NoiseCoupling {
    ops: SiteOperators,
}

impl NoiseCoupling {
    pub fn new(spec: &SystemSpec) -> Result<Self> {
        spec.hilbert_dim()?;
        Ok(NoiseCoupling {
            ops: SiteOperators::new(spec.spin, spec.sites)?,
        })
    }

    /// `H_ξ ψ`.
    pub fn apply(&self, fields: &[Vector3<f64>], psi: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = DVector::zeros(psi.len());
        for (ops, xi) in self.ops.ops.iter().zip(fields) {
            for (op, &x) in ops.iter().zip(xi.iter()) {
                if x != 0.0 {
                    out.gemv(Complex64::new(-x, 0.0), op, psi, Complex64::new(1.0, 0.0));
                }
            }
        }
        out
    }
}

/// `B_eff(n) = J (S_{n-1} + S_{n+1}) + B_z ẑ + B_x(t) x̂ [n = pulse site]`,
/// the negative gradient of [`classical_energy`].
pub fn classical_effective_field(config: &ClassicalConfig, spec: &SystemSpec, site: usize, t: f64) -> Result<Vector3<f64>> {
    if site >= config.spins.len() {
        return Err(Error::SiteOutOfRange {
            site,
            sites: config.spins.len(),
        });
    }
    Ok(effective_field_unchecked(&config.spins, spec, site, t))
}

pub(crate) fn effective_field_unchecked(spins: &[Vector3<f64>], spec: &SystemSpec, site: usize, t: f64) -> Vector3<f64> {
    let mut b = Vector3::new(0.0, 0.0, spec.field_z);
    if site > 0 {
        b += spins[site - 1] * spec.exchange;
    }
    if site + 1 < spins.len() {
        b += spins[site + 1] * spec.exchange;
    }
    if let Some(p) = &spec.pulse {
        if p.site == site {
            b.x += p.amplitude_at(t);
        }
    }
    b
}

/// `E = -J Σ S_n·S_{n+1} - B_z Σ S_n^z - B_x(t) S_p^x`.
pub fn classical_energy(config: &ClassicalConfig, spec: &SystemSpec, t: f64) -> f64 {
    let s = &config.spins;
    let exchange: f64 = s.windows(2).map(|w| w[0].dot(&w[1])).sum();
    let zeeman: f64 = s.iter().map(|v| v.z).sum();
    let pulse = spec.pulse.map_or(0.0, |p| p.amplitude_at(t) * s[p.site].x);
    -spec.exchange * exchange - spec.field_z * zeeman - pulse
}

/// White-noise field with `<ξ_n^α(t) ξ_m^β(t')> = D δ_nm δ_αβ δ(t - t')`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Strength `D`.
    pub strength: f64,
    pub seed: u64,
}

const STEP_BITS: u32 = 40;

/// One standard normal keyed by `(seed, member, step, site, component)`.
///
/// ChaCha8 is used as a counter-based generator: the stream id encodes
/// `(member, step)` and the word position encodes `(site, component)`.
pub fn gaussian_at(seed: u64, member: u64, step: u64, index: u64) -> f64 {
    assert!(step < (1 << STEP_BITS), "step index exceeds the noise counter range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((member << STEP_BITS) | step);
    rng.set_word_pos(index as u128 * 4);
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
    let u2 = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Piecewise-constant noise over one step: per-component variance `D/dt`.
pub fn sample_noise_fields(spec: &NoiseSpec, member: u64, step: u64, sites: usize, dt: f64) -> Vec<Vector3<f64>> {
    if spec.strength == 0.0 {
        return vec![Vector3::zeros(); sites];
    }
    let sigma = (spec.strength / dt).sqrt();
    (0..sites)
        .map(|n| {
            Vector3::from_fn(|a, _| sigma * gaussian_at(spec.seed, member, step, (3 * n + a) as u64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_algebra::max_abs;

    fn spec(sites: usize, spin: Spin, exchange: f64, field_z: f64, pulse: Option<PulseSpec>) -> SystemSpec {
        SystemSpec {
            sites,
            spin,
            exchange,
            field_z,
            pulse,
            damping: 0.1,
        }
    }

    fn sorted_eigenvalues(h: &ComplexMatrix) -> Vec<f64> {
        let mut e: Vec<f64> = h.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }

    #[test]
    fn pulse_peak_and_one_sigma() {
        let p = PulseSpec {
            amplitude: 3.27,
            center: 2.0,
            width: 0.02,
            site: 0,
        };
        assert_eq!(pulse_amplitude(2.0, &p), 3.27);
        let one_sigma = 3.27 * (-0.5f64).exp();
        assert!((p.amplitude_at(2.02) - one_sigma).abs() < 1e-12);
        assert!((p.amplitude_at(1.98) - one_sigma).abs() < 1e-12);
        assert!((one_sigma / 3.27 - 0.60653).abs() < 1e-5);
        assert!(p.amplitude_at(50.0) >= 0.0);
    }

    #[test]
    fn zeeman_single_site() {
        for spin in [Spin::HALF, Spin::ONE, Spin::THREE_HALVES] {
            let h = build_hamiltonian(&spec(1, spin, 0.0, 1.3, None), 0.0).unwrap();
            for k in 0..spin.dim() {
                let m = spin.twice_m(k) as f64 / 2.0;
                assert!((h[(k, k)].re + 1.3 * m).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn two_spin_exchange_spectrum() {
        let j = 1.7;
        let h = build_hamiltonian(&spec(2, Spin::HALF, j, 0.0, None), 0.0).unwrap();
        let e = sorted_eigenvalues(&h);
        let mut expected = vec![-j / 4.0, -j / 4.0, -j / 4.0, 3.0 * j / 4.0];
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in e.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn trimer_all_up_energy() {
        let h = build_hamiltonian(&spec(3, Spin::HALF, 4.0, -2.0, None), 0.0).unwrap();
        assert_eq!(h.nrows(), 8);
        assert!((h[(0, 0)].re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let p = PulseSpec {
            amplitude: 3.27,
            center: 1.0,
            width: 0.1,
            site: 1,
        };
        for spin in [Spin::HALF, Spin::ONE] {
            let ham = Hamiltonian::build(&spec(3, spin, -0.8, 0.4, Some(p))).unwrap();
            for t in [0.0, 0.95, 1.0, 3.0] {
                let h = ham.at(t);
                assert!(max_abs(&(&h - h.adjoint())) < 1e-14);
            }
        }
    }

    #[test]
    fn apply_matches_assembled_matrix() {
        let p = PulseSpec {
            amplitude: 2.0,
            center: 0.5,
            width: 0.3,
            site: 0,
        };
        let ham = Hamiltonian::build(&spec(2, Spin::ONE, 1.0, 0.2, Some(p))).unwrap();
        let psi = DVector::from_fn(9, |k, _| Complex64::new(k as f64, 1.0 - k as f64));
        let a = ham.apply(0.4, &psi);
        let b = ham.at(0.4) * &psi;
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn rejects_invalid_specs() {
        let mut s = spec(2, Spin::HALF, 1.0, 0.0, None);
        s.damping = -0.1;
        assert!(matches!(Hamiltonian::build(&s), Err(Error::InvalidSpec(_))));
        let s = spec(0, Spin::HALF, 1.0, 0.0, None);
        assert!(Hamiltonian::build(&s).is_err());
        let p = PulseSpec {
            amplitude: 1.0,
            center: 0.0,
            width: 0.0,
            site: 0,
        };
        assert!(Hamiltonian::build(&spec(1, Spin::HALF, 0.0, 0.0, Some(p))).is_err());
        let s = spec(20, Spin::ONE, 1.0, 0.0, None);
        assert!(matches!(Hamiltonian::build(&s), Err(Error::DimensionOverflow { .. })));
    }

    fn config(spins: Vec<Vector3<f64>>, length: f64) -> ClassicalConfig {
        ClassicalConfig::new(spins, length).unwrap()
    }

    #[test]
    fn single_site_field_is_zeeman_plus_pulse() {
        let p = PulseSpec {
            amplitude: 3.0,
            center: 1.0,
            width: 0.5,
            site: 0,
        };
        let s = spec(1, Spin::ONE, 2.0, -1.5, Some(p));
        let c = config(vec![Vector3::z()], 1.0);
        let b = classical_effective_field(&c, &s, 0, 1.2).unwrap();
        assert!((b - Vector3::new(p.amplitude_at(1.2), 0.0, -1.5)).norm() < 1e-15);
        assert!(classical_effective_field(&c, &s, 1, 0.0).is_err());
    }

    #[test]
    fn aligned_trimer_middle_site_field() {
        let s = spec(3, Spin::ONE, 1.5, 0.3, None);
        let c = config(vec![Vector3::z(); 3], 1.0);
        let b = classical_effective_field(&c, &s, 1, 0.0).unwrap();
        assert!((b - Vector3::new(0.0, 0.0, 2.0 * 1.5 + 0.3)).norm() < 1e-15);
    }

    #[test]
    fn decoupled_chain_fields_are_uniform() {
        let s = spec(3, Spin::HALF, 0.0, 0.7, None);
        let c = config(
            vec![Vector3::new(0.5, 0.0, 0.0), Vector3::new(0.0, 0.5, 0.0), Vector3::new(0.0, 0.0, 0.5)],
            0.5,
        );
        let b0 = classical_effective_field(&c, &s, 0, 0.0).unwrap();
        for n in 1..3 {
            assert_eq!(classical_effective_field(&c, &s, n, 0.0).unwrap(), b0);
        }
    }

    #[test]
    fn effective_field_is_negative_energy_gradient() {
        let p = PulseSpec {
            amplitude: 1.1,
            center: 0.2,
            width: 0.4,
            site: 1,
        };
        let s = spec(3, Spin::ONE, -0.7, 0.9, Some(p));
        let spins = vec![Vector3::new(0.3, -0.2, 0.9), Vector3::new(-0.5, 0.4, 0.1), Vector3::new(0.2, 0.8, -0.3)];
        let t = 0.35;
        let h = 1e-5;
        for n in 0..3 {
            let b = effective_field_unchecked(&spins, &s, n, t);
            for a in 0..3 {
                let mut plus = spins.clone();
                let mut minus = spins.clone();
                plus[n][a] += h;
                minus[n][a] -= h;
                // The energy is linear in each spin, so raw vectors (not
                // length-constrained) are fine for the derivative.
                let ep = classical_energy(&ClassicalConfig::unchecked(plus, 1.0), &s, t);
                let em = classical_energy(&ClassicalConfig::unchecked(minus, 1.0), &s, t);
                let grad = (ep - em) / (2.0 * h);
                assert!((b[a] + grad).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_strength_noise_is_exactly_zero() {
        let spec = NoiseSpec { strength: 0.0, seed: 7 };
        for f in sample_noise_fields(&spec, 0, 3, 4, 0.01) {
            assert_eq!(f, Vector3::zeros());
        }
    }

    #[test]
    fn noise_is_reproducible() {
        let spec = NoiseSpec { strength: 0.3, seed: 42 };
        let a = sample_noise_fields(&spec, 2, 17, 3, 0.001);
        let b = sample_noise_fields(&spec, 2, 17, 3, 0.001);
        for (x, y) in a.iter().zip(&b) {
            for k in 0..3 {
                assert_eq!(x[k].to_bits(), y[k].to_bits());
            }
        }
        let c = sample_noise_fields(&spec, 2, 18, 3, 0.001);
        assert_ne!(a[0], c[0]);
        let d = sample_noise_fields(&spec, 3, 17, 3, 0.001);
        assert_ne!(a[0], d[0]);
    }

    #[test]
    fn noise_sample_mean_within_standard_error() {
        let spec = NoiseSpec { strength: 0.5, seed: 1 };
        let dt = 0.01;
        let draws = 100_000;
        let mut sum = [0.0; 3];
        for step in 0..draws {
            let f = sample_noise_fields(&spec, 0, step, 1, dt);
            for a in 0..3 {
                sum[a] += f[0][a];
            }
        }
        let bound = 4.0 * (spec.strength / dt / draws as f64).sqrt();
        for s in sum {
            assert!((s / draws as f64).abs() < bound);
        }
    }
}
