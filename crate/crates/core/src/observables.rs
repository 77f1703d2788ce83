//! Expectation values, single-site reduced density matrices, von Neumann
//! entropy, purity, spin lengths and basis occupations.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{DensityMatrix, StateVector};
use crate::spin_algebra::{build_spin_matrices, trace_product, ComplexMatrix, Spin};

/// Eigenvalues down to this are clamped to zero; anything more negative is
/// an error.
pub const EIGENVALUE_CLAMP: f64 = -1e-10;

/// Anything `op` can be measured on.
pub trait Expectation {
    fn expectation(&self, op: &ComplexMatrix) -> Result<Complex64>;
}

impl Expectation for StateVector {
    /// `<ψ|op|ψ>`.
    fn expectation(&self, op: &ComplexMatrix) -> Result<Complex64> {
        check_dim(op, self.dim())?;
        let v = self.amplitudes();
        Ok(v.dotc(&(op * v)))
    }
}

impl Expectation for DensityMatrix {
    /// `Tr(ρ op)`.
    fn expectation(&self, op: &ComplexMatrix) -> Result<Complex64> {
        check_dim(op, self.dim())?;
        Ok(trace_product(self.matrix(), op))
    }
}

pub fn expectation<S: Expectation>(state: &S, op: &ComplexMatrix) -> Result<Complex64> {
    state.expectation(op)
}

fn check_dim(op: &ComplexMatrix, dim: usize) -> Result<()> {
    if op.nrows() != dim || op.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: op.nrows(),
        });
    }
    Ok(())
}

struct SiteLayout {
    left: usize,
    dim_site: usize,
    right: usize,
}

impl SiteLayout {
    fn new(dim: usize, site: usize, sites: usize, dim_site: usize) -> Result<Self> {
        if site >= sites {
            return Err(Error::SiteOutOfRange { site, sites });
        }
        let expected = dim_site.pow(sites as u32);
        if dim != expected {
            return Err(Error::DimensionMismatch { expected, got: dim });
        }
        Ok(SiteLayout {
            left: dim_site.pow(site as u32),
            dim_site,
            right: dim_site.pow((sites - site - 1) as u32),
        })
    }

    #[inline]
    fn index(&self, l: usize, a: usize, r: usize) -> usize {
        (l * self.dim_site + a) * self.right + r
    }
}

/// Partial trace over every site except `site`, by index arithmetic over
/// the site-major Kronecker layout.
pub fn reduced_density(rho: &DensityMatrix, site: usize, sites: usize, dim_site: usize) -> Result<DensityMatrix> {
    let layout = SiteLayout::new(rho.dim(), site, sites, dim_site)?;
    let m = rho.matrix();
    let mut out = ComplexMatrix::zeros(dim_site, dim_site);
    for a in 0..dim_site {
        for b in 0..dim_site {
            let mut acc = Complex64::new(0.0, 0.0);
            for l in 0..layout.left {
                for r in 0..layout.right {
                    acc += m[(layout.index(l, a, r), layout.index(l, b, r))];
                }
            }
            out[(a, b)] = acc;
        }
    }
    Ok(DensityMatrix::from_raw(out))
}

/// [`reduced_density`] of `|ψ><ψ|` without forming the full matrix.
pub fn reduced_density_pure(psi: &StateVector, site: usize, sites: usize, dim_site: usize) -> Result<DensityMatrix> {
    let layout = SiteLayout::new(psi.dim(), site, sites, dim_site)?;
    let v = psi.amplitudes();
    let mut out = ComplexMatrix::zeros(dim_site, dim_site);
    for l in 0..layout.left {
        for r in 0..layout.right {
            for a in 0..dim_site {
                let va = v[layout.index(l, a, r)];
                for b in 0..dim_site {
                    out[(a, b)] += va * v[layout.index(l, b, r)].conj();
                }
            }
        }
    }
    Ok(DensityMatrix::from_raw(out))
}

fn clamped_eigenvalues(rho: &DensityMatrix) -> Result<Vec<f64>> {
    let eig = rho.matrix().clone().symmetric_eigen().eigenvalues;
    eig.iter()
        .map(|&p| {
            if p < EIGENVALUE_CLAMP {
                Err(Error::NegativeEigenvalue(p))
            } else {
                Ok(p.max(0.0))
            }
        })
        .collect()
}

/// `-Tr(ρ log2 ρ)` in bits.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let entropy: f64 = clamped_eigenvalues(rho)?
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum();
    Ok(entropy.max(0.0))
}

/// `Tr(ρ²)`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    rho.matrix().iter().map(|c| c.norm_sqr()).sum()
}

/// Spin expectation values of one site.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteObservables {
    /// 0-based site index.
    pub site: usize,
    pub sx: f64,
    pub sy: f64,
    pub sz: f64,
    /// `|<S>|`.
    pub length: f64,
    /// Entropy of the site's reduced density matrix, in bits.
    pub entropy: f64,
}

impl SiteObservables {
    pub fn vector(&self) -> [f64; 3] {
        [self.sx, self.sy, self.sz]
    }
}

pub fn spin_length(obs: &SiteObservables) -> f64 {
    (obs.sx * obs.sx + obs.sy * obs.sy + obs.sz * obs.sz).sqrt()
}

/// Reduced density matrix, spin vector and entropy of every site.
pub fn site_observables(psi: &StateVector, spin: Spin, sites: usize) -> Result<Vec<(SiteObservables, DensityMatrix)>> {
    let set = build_spin_matrices(spin);
    (0..sites)
        .map(|n| {
            let rho = reduced_density_pure(psi, n, sites, spin.dim())?;
            let [sx, sy, sz] = set.components().map(|op| trace_product(rho.matrix(), op).re);
            let mut obs = SiteObservables {
                site: n,
                sx,
                sy,
                sz,
                length: 0.0,
                entropy: von_neumann_entropy(&rho)?,
            };
            obs.length = spin_length(&obs);
            Ok((obs, rho))
        })
        .collect()
}

/// Label of a product basis state: the per-site `2m` values joined by `_`,
/// e.g. `+1_+1_-1` for `|↑↑↓>` at `S = 1/2`.
pub fn basis_label(spin: Spin, sites: usize, index: usize) -> String {
    let d = spin.dim();
    let mut digits = vec![0; sites];
    let mut rest = index;
    for slot in digits.iter_mut().rev() {
        *slot = rest % d;
        rest /= d;
    }
    digits
        .iter()
        .map(|&k| format!("{:+}", spin.twice_m(k)))
        .collect::<Vec<_>>()
        .join("_")
}

pub fn basis_labels(spin: Spin, sites: usize) -> Vec<String> {
    let dim = spin.dim().pow(sites as u32);
    (0..dim).map(|k| basis_label(spin, sites, k)).collect()
}

/// `|<m1 m2 ...|ψ>|²` for every product basis state, labelled as in
/// [`basis_label`].
pub fn basis_occupations(psi: &StateVector, spin: Spin, sites: usize) -> Result<Vec<(String, f64)>> {
    let expected = spin.dim().pow(sites as u32);
    if psi.dim() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: psi.dim(),
        });
    }
    Ok(psi
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(k, c)| (basis_label(spin, sites, k), c.norm_sqr()))
        .collect())
}

/// Total `2M = Σ 2m_n` of a basis index.
pub fn total_twice_m(spin: Spin, sites: usize, index: usize) -> i32 {
    let d = spin.dim();
    let mut rest = index;
    let mut total = 0;
    for _ in 0..sites {
        total += spin.twice_m(rest % d);
        rest /= d;
    }
    total
}

/// Occupation summed over each total-`M` class, ordered from `M = NS` down
/// to `M = -NS`. Returns `(2M, probability)` pairs.
pub fn total_m_occupations(probabilities: &DVector<f64>, spin: Spin, sites: usize) -> Vec<(i32, f64)> {
    let top = spin.twice() as i32 * sites as i32;
    let mut classes: Vec<(i32, f64)> = (0..=spin.twice() as usize * sites).map(|k| (top - 2 * k as i32, 0.0)).collect();
    for (k, p) in probabilities.iter().enumerate() {
        let m = total_twice_m(spin, sites, k);
        classes[((top - m) / 2) as usize].1 += p;
    }
    classes
}

pub fn probabilities(psi: &StateVector) -> DVector<f64> {
    psi.amplitudes().map(|c| c.norm_sqr())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_algebra::embed_site_operator;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn state(v: Vec<Complex64>) -> StateVector {
        StateVector::from_amplitudes(DVector::from_vec(v)).unwrap()
    }

    fn pseudo_random_state(dim: usize, seed: u64) -> StateVector {
        let mut s = seed;
        let mut next = move || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        state((0..dim).map(|_| Complex64::new(next(), next())).collect())
    }

    #[test]
    fn spin_half_expectations() {
        let set = build_spin_matrices(Spin::HALF);
        let up = StateVector::basis(2, 0);
        assert_eq!(up.expectation(&set.sz).unwrap(), c(0.5));
        let x = state(vec![c(1.0), c(1.0)]);
        assert!((x.expectation(&set.sx).unwrap() - c(0.5)).norm() < 1e-15);
    }

    #[test]
    fn pure_and_density_expectations_agree() {
        let set = build_spin_matrices(Spin::ONE);
        let op = embed_site_operator(2, 1, &set.sy, 3).unwrap();
        for seed in 0..5 {
            let psi = pseudo_random_state(9, seed);
            let rho = DensityMatrix::from_pure(&psi);
            let a = expectation(&psi, &op).unwrap();
            let b = expectation(&rho, &op).unwrap();
            assert!((a - b).norm() < 1e-13);
            assert!(a.im.abs() < 1e-12);
        }
        assert!(expectation(&pseudo_random_state(4, 1), &op).is_err());
    }

    #[test]
    fn product_state_reduces_to_pure_site() {
        let psi = StateVector::basis(8, 0);
        let rho = DensityMatrix::from_pure(&psi);
        for n in 0..3 {
            let r = reduced_density(&rho, n, 3, 2).unwrap();
            assert_eq!(r.matrix()[(0, 0)], c(1.0));
            assert!((purity(&r) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn singlet_reduces_to_maximally_mixed() {
        let singlet = state(vec![c(0.0), c(1.0), c(-1.0), c(0.0)]);
        let r = reduced_density(&DensityMatrix::from_pure(&singlet), 0, 2, 2).unwrap();
        let half = ComplexMatrix::identity(2, 2).map(|v| v * 0.5);
        assert!((r.matrix() - half).norm() < 1e-15);
        assert!((von_neumann_entropy(&r).unwrap() - 1.0).abs() < 1e-14);
        let obs = site_observables(&singlet, Spin::HALF, 2).unwrap();
        assert!(obs[0].0.length < 1e-15);
    }

    #[test]
    fn partial_trace_contract() {
        let set = build_spin_matrices(Spin::HALF);
        let psi = pseudo_random_state(8, 3);
        let rho = DensityMatrix::from_pure(&psi);
        for n in 0..3 {
            let r = reduced_density(&rho, n, 3, 2).unwrap();
            let rp = reduced_density_pure(&psi, n, 3, 2).unwrap();
            assert!((r.matrix() - rp.matrix()).norm() < 1e-14);
            for op in set.components() {
                let full = embed_site_operator(3, n, op, 2).unwrap();
                let lhs = trace_product(r.matrix(), op);
                let rhs = trace_product(rho.matrix(), &full);
                assert!((lhs - rhs).norm() < 1e-12);
            }
        }
        assert!(reduced_density(&rho, 3, 3, 2).is_err());
        assert!(reduced_density(&rho, 0, 2, 2).is_err());
    }

    #[test]
    fn entropy_values() {
        let pure = DensityMatrix::from_pure(&pseudo_random_state(3, 4));
        assert!(von_neumann_entropy(&pure).unwrap() < 1e-12);
        let mixed = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(0.75), c(0.25)]));
        let s = von_neumann_entropy(&DensityMatrix::from_raw(mixed)).unwrap();
        let expected = -0.75 * 0.75f64.log2() - 0.25 * 0.25f64.log2();
        assert!((s - expected).abs() < 1e-14);
        assert!((s - 0.811278).abs() < 1e-6);
        let negative = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(1.1), c(-0.1)]));
        assert!(matches!(
            von_neumann_entropy(&DensityMatrix::from_raw(negative)),
            Err(Error::NegativeEigenvalue(_))
        ));
        let tiny = ComplexMatrix::from_diagonal(&DVector::from_vec(vec![c(1.0 + 1e-11), c(-1e-11)]));
        assert!(von_neumann_entropy(&DensityMatrix::from_raw(tiny)).is_ok());
    }

    #[test]
    fn purity_values() {
        let half = DensityMatrix::from_raw(ComplexMatrix::identity(2, 2).map(|v| v * 0.5));
        assert!((purity(&half) - 0.5).abs() < 1e-15);
        let pure = DensityMatrix::from_pure(&pseudo_random_state(4, 9));
        assert!((purity(&pure) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn occupations_and_labels() {
        assert_eq!(basis_label(Spin::HALF, 3, 0), "+1_+1_+1");
        assert_eq!(basis_label(Spin::HALF, 3, 1), "+1_+1_-1");
        assert_eq!(basis_label(Spin::HALF, 3, 7), "-1_-1_-1");
        assert_eq!(basis_label(Spin::ONE, 2, 4), "+0_+0");

        let ghz = state(vec![c(1.0), c(0.0), c(0.0), c(0.0), c(0.0), c(0.0), c(0.0), c(1.0)]);
        let occ = basis_occupations(&ghz, Spin::HALF, 3).unwrap();
        assert_eq!(occ[0].0, "+1_+1_+1");
        assert!((occ[0].1 - 0.5).abs() < 1e-15);
        assert!((occ[7].1 - 0.5).abs() < 1e-15);
        let total: f64 = occ.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);

        let classes = total_m_occupations(&probabilities(&ghz), Spin::HALF, 3);
        assert_eq!(classes.iter().map(|(m, _)| *m).collect::<Vec<_>>(), vec![3, 1, -1, -3]);
        assert!((classes[0].1 - 0.5).abs() < 1e-15);
        assert!((classes[3].1 - 0.5).abs() < 1e-15);

        let up = StateVector::basis(8, 0);
        let occ = basis_occupations(&up, Spin::HALF, 3).unwrap();
        assert_eq!(occ[0].1, 1.0);
        assert!(occ[1..].iter().all(|(_, p)| *p == 0.0));
    }

    #[test]
    fn lengths_of_product_and_entangled_states() {
        let up = StateVector::basis(27, 0);
        for (obs, _) in site_observables(&up, Spin::ONE, 3).unwrap() {
            assert!((obs.length - 1.0).abs() < 1e-15);
            assert!(obs.entropy < 1e-12);
        }
        let psi = pseudo_random_state(8, 21);
        for (obs, _) in site_observables(&psi, Spin::HALF, 3).unwrap() {
            assert!(obs.length < 0.5);
            assert!(obs.entropy > 0.0);
        }
    }
}
