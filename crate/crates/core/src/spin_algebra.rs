//! Spin operators for arbitrary `S`, multi-site embedding and the
//! identity/vector/bivector expansion of a single-spin density matrix.
//!
//! Basis convention: per site the states are ordered `m = S, S-1, ..., -S`,
//! and multi-site spaces are Kronecker products with site 0 as the leftmost
//! (slowest varying) factor.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A spin quantum number stored as `2S`, so half-integers are exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub const HALF: Spin = Spin { twice: 1 };
    pub const ONE: Spin = Spin { twice: 2 };
    pub const THREE_HALVES: Spin = Spin { twice: 3 };

    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::InvalidSpin("S = 0 has no dynamics".into()));
        }
        Ok(Spin { twice })
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    pub fn value(self) -> f64 {
        self.twice as f64 / 2.0
    }

    /// Single-site Hilbert space dimension `2S + 1`.
    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }

    /// `S(S+1)`.
    pub fn casimir(self) -> f64 {
        let s = self.value();
        s * (s + 1.0)
    }

    /// `Tr(S_a S_a) = S(S+1)(2S+1)/3`.
    pub fn vector_norm(self) -> f64 {
        self.casimir() * self.dim() as f64 / 3.0
    }

    /// Magnetic quantum number of basis index `k`, as `2m`.
    pub fn twice_m(self, k: usize) -> i32 {
        self.twice as i32 - 2 * k as i32
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.twice.is_multiple_of(2) {
            write!(f, "{}", self.twice / 2)
        } else {
            write!(f, "{}/2", self.twice)
        }
    }
}

impl FromStr for Spin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidSpin(format!("cannot parse {s:?}; expected \"1/2\", \"1\", \"3/2\", ..."));
        let twice = match s.split_once('/') {
            Some((num, "2")) => {
                let num: u32 = num.trim().parse().map_err(|_| bad())?;
                if num.is_multiple_of(2) {
                    return Err(bad());
                }
                num
            }
            Some(_) => return Err(bad()),
            None => 2 * s.parse::<u32>().map_err(|_| bad())?,
        };
        Spin::from_twice(twice)
    }
}

impl Serialize for Spin {
    fn serialize<Se: Serializer>(&self, serializer: Se) -> std::result::Result<Se::Ok, Se::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Spin {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// The three spin component matrices of one site.
#[derive(Clone, Debug)]
pub struct SpinMatrixSet {
    pub spin: Spin,
    pub sx: ComplexMatrix,
    pub sy: ComplexMatrix,
    pub sz: ComplexMatrix,
    pub identity: ComplexMatrix,
}

impl SpinMatrixSet {
    pub fn components(&self) -> [&ComplexMatrix; 3] {
        [&self.sx, &self.sy, &self.sz]
    }

    pub fn dim(&self) -> usize {
        self.spin.dim()
    }
}

/// Builds `S_x, S_y, S_z` from the ladder operator
/// `S+ |S m> = sqrt(S(S+1) - m(m+1)) |S m+1>`.
pub fn build_spin_matrices(spin: Spin) -> SpinMatrixSet {
    let d = spin.dim();
    let s = spin.value();
    let mut raise = ComplexMatrix::zeros(d, d);
    for k in 1..d {
        let m = spin.twice_m(k) as f64 / 2.0;
        raise[(k - 1, k)] = Complex64::new((s * (s + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let lower = raise.adjoint();
    let sx = (&raise + &lower).map(|c| c * 0.5);
    let sy = (&raise - &lower).map(|c| c * (-0.5 * I));
    let sz = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |k, _| {
        Complex64::new(spin.twice_m(k) as f64 / 2.0, 0.0)
    }));
    SpinMatrixSet {
        spin,
        sx,
        sy,
        sz,
        identity: ComplexMatrix::identity(d, d),
    }
}

/// Symmetric traceless rank-2 tensors `S_ml = {S_m, S_l}/2 - S(S+1)/3 δ_ml`.
#[derive(Clone, Debug)]
pub struct BivectorSet {
    pub spin: Spin,
    pub components: [[ComplexMatrix; 3]; 3],
}

impl BivectorSet {
    pub fn get(&self, m: usize, l: usize) -> &ComplexMatrix {
        &self.components[m][l]
    }

    /// Frame constant `c` with `Σ_ml Tr(X S_ml) S_ml = c X` on the rank-2
    /// subspace. Plays the role of `n_2S` in the density expansion; zero for
    /// `S = 1/2`.
    pub fn frame_constant(&self) -> f64 {
        let mut sum = 0.0;
        for m in 0..3 {
            for l in 0..3 {
                sum += trace_product(self.get(m, l), self.get(m, l)).re;
            }
        }
        // The nine components span the five-dimensional rank-2 space.
        sum / 5.0
    }
}

pub fn bivector_set(set: &SpinMatrixSet) -> BivectorSet {
    let comps = set.components();
    let shift = set.spin.casimir() / 3.0;
    let components = std::array::from_fn(|m| {
        std::array::from_fn(|l| {
            let anti = comps[m] * comps[l] + comps[l] * comps[m];
            let mut out = anti.map(|c| c * 0.5);
            if m == l {
                for k in 0..set.dim() {
                    out[(k, k)] -= Complex64::new(shift, 0.0);
                }
            }
            out
        })
    });
    BivectorSet {
        spin: set.spin,
        components,
    }
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = ZERO;
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Places `op` at slot `site` (0-based) of an `n_sites`-fold Kronecker
/// product, with identities elsewhere.
pub fn embed_site_operator(n_sites: usize, site: usize, op: &ComplexMatrix, dim_site: usize) -> Result<ComplexMatrix> {
    embed_block(n_sites, site, 1, op, dim_site)
}

/// Places a `span`-site operator `block` on the consecutive sites
/// `first..first + span`.
pub fn embed_block(
    n_sites: usize,
    first: usize,
    span: usize,
    block: &ComplexMatrix,
    dim_site: usize,
) -> Result<ComplexMatrix> {
    if span == 0 || first + span > n_sites {
        return Err(Error::SiteOutOfRange {
            site: first + span.max(1) - 1,
            sites: n_sites,
        });
    }
    let block_dim = dim_site.pow(span as u32);
    if block.nrows() != block_dim || block.ncols() != block_dim {
        return Err(Error::DimensionMismatch {
            expected: block_dim,
            got: block.nrows(),
        });
    }
    let left = dim_site.pow(first as u32);
    let right = dim_site.pow((n_sites - first - span) as u32);
    let dim = left * block_dim * right;
    let mut out = ComplexMatrix::zeros(dim, dim);
    for l in 0..left {
        for a in 0..block_dim {
            for b in 0..block_dim {
                let v = block[(a, b)];
                if v == ZERO {
                    continue;
                }
                for r in 0..right {
                    out[((l * block_dim + a) * right + r, (l * block_dim + b) * right + r)] = v;
                }
            }
        }
    }
    Ok(out)
}

/// Embedded `[S_x, S_y, S_z]` for every site of a chain.
#[derive(Clone, Debug)]
pub struct SiteOperators {
    pub spin: Spin,
    pub ops: Vec<[ComplexMatrix; 3]>,
}

impl SiteOperators {
    pub fn new(spin: Spin, n_sites: usize) -> Result<Self> {
        let set = build_spin_matrices(spin);
        let ops = (0..n_sites)
            .map(|n| {
                let [x, y, z] = set.components();
                Ok([
                    embed_site_operator(n_sites, n, x, spin.dim())?,
                    embed_site_operator(n_sites, n, y, spin.dim())?,
                    embed_site_operator(n_sites, n, z, spin.dim())?,
                ])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SiteOperators { spin, ops })
    }

    pub fn n_sites(&self) -> usize {
        self.ops.len()
    }
}

/// Largest supported spin for the density expansion.
const MAX_EXPANSION_TWICE: u32 = 2;

/// Rebuilds a single-spin density matrix from its vector moments `<S_m>` and,
/// for `S = 1`, its bivector moments `<S_ml>`. Bivector moments are ignored
/// for `S = 1/2`, where the expansion ends at the vector term.
pub fn reconstruct_density(
    spin: Spin,
    vector_moments: [f64; 3],
    bivector_moments: Option<[[f64; 3]; 3]>,
) -> Result<ComplexMatrix> {
    if spin.twice() > MAX_EXPANSION_TWICE {
        return Err(Error::Unsupported(format!(
            "density expansion implemented through rank 2 only (S <= 1), got S = {spin}"
        )));
    }
    let set = build_spin_matrices(spin);
    let d = spin.dim();
    let mut rho = ComplexMatrix::identity(d, d).map(|c| c / d as f64);
    let n_s = spin.vector_norm();
    for (moment, op) in vector_moments.iter().zip(set.components()) {
        rho += op.map(|c| c * (*moment / n_s));
    }
    if let (Some(moments), true) = (bivector_moments, spin.twice() >= 2) {
        let biv = bivector_set(&set);
        let frame = biv.frame_constant();
        for (m, row) in moments.iter().enumerate() {
            for (l, moment) in row.iter().enumerate() {
                rho += biv.get(m, l).map(|c| c * (*moment / frame));
            }
        }
    }
    Ok(rho)
}

/// Vector and bivector moments `Tr(ρ S_m)`, `Tr(ρ S_ml)` of a single-spin
/// density matrix.
pub fn density_moments(rho: &ComplexMatrix, spin: Spin) -> Result<([f64; 3], [[f64; 3]; 3])> {
    if rho.nrows() != spin.dim() {
        return Err(Error::DimensionMismatch {
            expected: spin.dim(),
            got: rho.nrows(),
        });
    }
    let set = build_spin_matrices(spin);
    let biv = bivector_set(&set);
    let comps = set.components();
    let vector = std::array::from_fn(|m| trace_product(rho, comps[m]).re);
    let bivector = std::array::from_fn(|m| std::array::from_fn(|l| trace_product(rho, biv.get(m, l)).re));
    Ok((vector, bivector))
}

/// Result of [`trace_orthogonality_check`].
#[derive(Clone, Debug)]
pub struct OrthogonalityReport {
    pub spin: Spin,
    /// Largest deviation over all checked traces.
    pub max_violation: f64,
    /// Largest `|Tr(A B)|` between different ranks (identity, vector, bivector).
    pub cross_rank: f64,
    /// Largest deviation of `Tr(S_a S_b)` from `n_S δ_ab`.
    pub vector: f64,
    /// Largest deviation of `Tr(S_ab S_cd)` from the isotropic rank-2 form
    /// `c (δ_ac δ_bd + δ_ad δ_bc - 2/3 δ_ab δ_cd)`.
    pub bivector: f64,
    /// `n_S = Tr(S_a S_a)`.
    pub vector_norm: f64,
    /// `c = Tr(S_xy S_xy)`; zero for `S = 1/2`.
    pub bivector_norm: f64,
}

/// Checks trace orthogonality between and within the rank-0, rank-1 and
/// rank-2 tensor families. `max_rank` is clamped to `min(2S, 2)`.
pub fn trace_orthogonality_check(spin: Spin, max_rank: u32) -> OrthogonalityReport {
    let max_rank = max_rank.min(spin.twice()).min(2);
    let set = build_spin_matrices(spin);
    let biv = bivector_set(&set);
    let comps = set.components();
    let n_s = spin.vector_norm();
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };

    let mut cross_rank = 0.0_f64;
    let mut vector = 0.0_f64;
    let mut bivector = 0.0_f64;

    for a in 0..3 {
        cross_rank = cross_rank.max(comps[a].trace().norm());
        for b in 0..3 {
            let t = trace_product(comps[a], comps[b]);
            vector = vector.max((t - Complex64::new(n_s * delta(a, b), 0.0)).norm());
        }
    }

    let mut bivector_norm = 0.0;
    if max_rank >= 2 {
        bivector_norm = trace_product(biv.get(0, 1), biv.get(0, 1)).re;
        for a in 0..3 {
            for b in 0..3 {
                let s_ab = biv.get(a, b);
                cross_rank = cross_rank.max(s_ab.trace().norm());
                for n in 0..3 {
                    cross_rank = cross_rank.max(trace_product(s_ab, comps[n]).norm());
                }
                for c in 0..3 {
                    for d in 0..3 {
                        let expected = bivector_norm
                            * (delta(a, c) * delta(b, d) + delta(a, d) * delta(b, c)
                                - 2.0 / 3.0 * delta(a, b) * delta(c, d));
                        let t = trace_product(s_ab, biv.get(c, d));
                        bivector = bivector.max((t - Complex64::new(expected, 0.0)).norm());
                    }
                }
            }
        }
    }

    OrthogonalityReport {
        spin,
        max_violation: cross_rank.max(vector).max(bivector),
        cross_rank,
        vector,
        bivector,
        vector_norm: n_s,
        bivector_norm,
    }
}

/// `[A, B] = AB - BA`.
pub fn commutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b - b * a
}

/// `{A, B} = AB + BA`.
pub fn anticommutator(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a * b + b * a
}

pub(crate) fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().fold(0.0, |acc, c| acc.max(c.norm()))
}
