//! Truncated boson ⊗ spin Hilbert spaces and their elementary operators.
//!
//! Basis states are ordered row-major with the boson occupation as the
//! slowest index, followed by the spin sites in list order. Within a site of
//! magnitude `s` the local basis runs `m = s, s-1, …, -s`.
//!
//! Every [`QOp`] carries a *degree*: an upper bound on the net number of
//! boson ladder operators in the expression that produced it. Truncating the
//! Fock space at `n_max` only corrupts matrix elements whose states sit within
//! `degree` quanta of the cutoff, so [`guarded_equal`] compares operators on
//! the block of states with occupation `≤ n_max - degree`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spin magnitude stored as `2s` so half-integers stay exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Spin {
    twice: u32,
}

impl Spin {
    pub const HALF: Spin = Spin { twice: 1 };
    pub const ONE: Spin = Spin { twice: 2 };

    pub fn from_twice(twice: u32) -> Result<Self> {
        if twice == 0 {
            return Err(Error::InvalidSpace(
                "spin magnitude must be positive".into(),
            ));
        }
        Ok(Spin { twice })
    }

    /// Parses a magnitude such as `0.5`, `1.0` or `1.5`.
    pub fn from_f64(s: f64) -> Result<Self> {
        let twice = 2.0 * s;
        if !twice.is_finite() || twice < 0.5 || (twice - twice.round()).abs() > 1e-12 {
            return Err(Error::InvalidSpace(format!(
                "spin magnitude {s} is not a positive multiple of 1/2"
            )));
        }
        Spin::from_twice(twice.round() as u32)
    }

    pub fn value(self) -> f64 {
        f64::from(self.twice) / 2.0
    }

    pub fn twice(self) -> u32 {
        self.twice
    }

    /// Local dimension `2s + 1`.
    pub fn dim(self) -> usize {
        self.twice as usize + 1
    }

    /// Casimir eigenvalue `s(s+1)`.
    pub fn casimir(self) -> f64 {
        let s = self.value();
        s * (s + 1.0)
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

/// A single boson mode truncated at `n_max` tensored with a list of spin sites.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceSpec {
    n_max: usize,
    sites: Vec<Spin>,
}

impl SpaceSpec {
    pub fn new(n_max: usize, sites: Vec<Spin>) -> Self {
        SpaceSpec { n_max, sites }
    }

    /// Convenience constructor from spin magnitudes such as `[0.5, 1.0]`.
    pub fn from_magnitudes(n_max: usize, magnitudes: &[f64]) -> Result<Self> {
        let sites = magnitudes
            .iter()
            .map(|&s| Spin::from_f64(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpaceSpec::new(n_max, sites))
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn sites(&self) -> &[Spin] {
        &self.sites
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn boson_dim(&self) -> usize {
        self.n_max + 1
    }

    /// Dimension of the spin factor, `Π (2s_j + 1)`.
    pub fn spin_dim(&self) -> usize {
        self.sites.iter().map(|s| s.dim()).product()
    }

    pub fn dim(&self) -> usize {
        self.boson_dim() * self.spin_dim()
    }

    /// Boson occupation of a basis index.
    pub fn occupation(&self, index: usize) -> usize {
        index / self.spin_dim()
    }

    /// Number of leading basis states with occupation `≤ n_max - guard`.
    pub fn guarded_len(&self, guard: usize) -> Result<usize> {
        if guard > self.n_max {
            return Err(Error::GuardExhausted {
                n_max: self.n_max,
                guard,
            });
        }
        Ok((self.n_max - guard + 1) * self.spin_dim())
    }

    /// Same spin content with a different cutoff.
    pub fn with_n_max(&self, n_max: usize) -> Self {
        SpaceSpec {
            n_max,
            sites: self.sites.clone(),
        }
    }
}

/// A dense complex operator on a [`SpaceSpec`], tagged with its boson degree.
#[derive(Clone, Debug)]
pub struct QOp {
    space: Arc<SpaceSpec>,
    matrix: DMatrix<Complex64>,
    degree: usize,
}

impl QOp {
    pub fn new(space: Arc<SpaceSpec>, matrix: DMatrix<Complex64>, degree: usize) -> Result<Self> {
        let dim = space.dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::InvalidSpace(format!(
                "matrix is {}x{} but the space has dimension {dim}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(QOp {
            space,
            matrix,
            degree,
        })
    }

    pub fn zero(space: &Arc<SpaceSpec>) -> Self {
        let dim = space.dim();
        QOp {
            space: space.clone(),
            matrix: DMatrix::zeros(dim, dim),
            degree: 0,
        }
    }

    pub fn identity(space: &Arc<SpaceSpec>) -> Self {
        let dim = space.dim();
        QOp {
            space: space.clone(),
            matrix: DMatrix::identity(dim, dim),
            degree: 0,
        }
    }

    /// `c · I`
    pub fn scalar(space: &Arc<SpaceSpec>, c: Complex64) -> Self {
        QOp::identity(space).scale(c)
    }

    pub fn space(&self) -> &Arc<SpaceSpec> {
        &self.space
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.matrix
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Re-tags the degree bound. Only use when the caller knows a tighter or
    /// looser bound than the one propagated by the algebra.
    pub fn with_degree(mut self, degree: usize) -> Self {
        self.degree = degree;
        self
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn same_space(&self, other: &QOp) -> bool {
        Arc::ptr_eq(&self.space, &other.space) || *self.space == *other.space
    }

    fn check_space(&self, other: &QOp) -> Result<()> {
        if self.same_space(other) {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }

    /// True when every matrix element is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.matrix.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn scale(&self, c: Complex64) -> QOp {
        QOp {
            space: self.space.clone(),
            matrix: &self.matrix * c,
            degree: self.degree,
        }
    }

    pub fn adjoint(&self) -> QOp {
        QOp {
            space: self.space.clone(),
            matrix: self.matrix.adjoint(),
            degree: self.degree,
        }
    }

    pub fn try_add(&self, other: &QOp) -> Result<QOp> {
        self.check_space(other)?;
        Ok(QOp {
            space: self.space.clone(),
            matrix: &self.matrix + &other.matrix,
            degree: self.degree.max(other.degree),
        })
    }

    pub fn try_sub(&self, other: &QOp) -> Result<QOp> {
        self.check_space(other)?;
        Ok(QOp {
            space: self.space.clone(),
            matrix: &self.matrix - &other.matrix,
            degree: self.degree.max(other.degree),
        })
    }

    pub fn try_mul(&self, other: &QOp) -> Result<QOp> {
        self.check_space(other)?;
        Ok(QOp {
            space: self.space.clone(),
            matrix: &self.matrix * &other.matrix,
            degree: self.degree + other.degree,
        })
    }

    /// `[X, Y] = XY - YX`
    pub fn try_commutator(&self, other: &QOp) -> Result<QOp> {
        self.check_space(other)?;
        Ok(QOp {
            space: self.space.clone(),
            matrix: &self.matrix * &other.matrix - &other.matrix * &self.matrix,
            degree: self.degree + other.degree,
        })
    }

    /// Infallible commutator; panics on a space mismatch.
    pub fn commutator(&self, other: &QOp) -> QOp {
        self.try_commutator(other)
            .expect("commutator of operators on different spaces")
    }

    /// `X + c·Y`, the workhorse of expression building.
    pub fn axpy(&self, c: Complex64, other: &QOp) -> Result<QOp> {
        self.check_space(other)?;
        Ok(QOp {
            space: self.space.clone(),
            matrix: &self.matrix + &other.matrix * c,
            degree: self.degree.max(other.degree),
        })
    }

    /// Largest `|element|` on the block of states with occupation `≤ n_max - guard`.
    pub fn guarded_max_abs(&self, guard: usize) -> Result<f64> {
        let len = self.space.guarded_len(guard)?;
        Ok(block_max_abs(&self.matrix, len))
    }

    /// Largest `|element|` on the block guarded by this operator's own degree.
    pub fn guarded_norm(&self) -> Result<f64> {
        self.guarded_max_abs(self.degree)
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }
}

pub(crate) fn block_max_abs(m: &DMatrix<Complex64>, len: usize) -> f64 {
    let mut best = 0.0f64;
    for j in 0..len {
        for i in 0..len {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $inner:ident) => {
        impl $trait<&QOp> for &QOp {
            type Output = QOp;
            fn $method(self, rhs: &QOp) -> QOp {
                self.$inner(rhs).expect(concat!(
                    stringify!($method),
                    " of operators on different spaces"
                ))
            }
        }
        impl $trait<QOp> for QOp {
            type Output = QOp;
            fn $method(self, rhs: QOp) -> QOp {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&QOp> for QOp {
            type Output = QOp;
            fn $method(self, rhs: &QOp) -> QOp {
                (&self).$method(rhs)
            }
        }
        impl $trait<QOp> for &QOp {
            type Output = QOp;
            fn $method(self, rhs: QOp) -> QOp {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, try_add);
forward_binop!(Sub, sub, try_sub);
forward_binop!(Mul, mul, try_mul);

impl Mul<Complex64> for &QOp {
    type Output = QOp;
    fn mul(self, c: Complex64) -> QOp {
        self.scale(c)
    }
}

impl Mul<Complex64> for QOp {
    type Output = QOp;
    fn mul(self, c: Complex64) -> QOp {
        self.scale(c)
    }
}

impl Mul<f64> for &QOp {
    type Output = QOp;
    fn mul(self, c: f64) -> QOp {
        self.scale(Complex64::new(c, 0.0))
    }
}

impl Mul<f64> for QOp {
    type Output = QOp;
    fn mul(self, c: f64) -> QOp {
        self.scale(Complex64::new(c, 0.0))
    }
}

impl Neg for &QOp {
    type Output = QOp;
    fn neg(self) -> QOp {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Neg for QOp {
    type Output = QOp;
    fn neg(self) -> QOp {
        -&self
    }
}

/// Outcome of a truncation-aware comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GuardedComparison {
    pub pass: bool,
    pub residual: f64,
    pub guard: usize,
}

/// Compares `x` and `y` on the block of states at least `max(deg x, deg y)`
/// quanta below the cutoff. The residual is the largest deviation on that
/// block divided by `max(1, largest |element| of x or y on the block)`.
pub fn guarded_equal(x: &QOp, y: &QOp, tol: f64) -> Result<GuardedComparison> {
    x.check_space(y)?;
    let guard = x.degree.max(y.degree);
    let len = x.space.guarded_len(guard)?;
    let mut diff = 0.0f64;
    let mut scale = 1.0f64;
    for j in 0..len {
        for i in 0..len {
            let (a, b) = (x.matrix[(i, j)], y.matrix[(i, j)]);
            diff = diff.max((a - b).norm());
            scale = scale.max(a.norm()).max(b.norm());
        }
    }
    let residual = diff / scale;
    Ok(GuardedComparison {
        pass: residual <= tol,
        residual,
        guard,
    })
}

/// Elementary operators of a [`SpaceSpec`], embedded in the full space.
#[derive(Clone, Debug)]
pub struct Operators {
    pub space: Arc<SpaceSpec>,
    pub a: QOp,
    pub a_dag: QOp,
    pub identity: QOp,
    /// Per-site `S^z_j`.
    pub sz_site: Vec<QOp>,
    /// Per-site `S^+_j`.
    pub sp_site: Vec<QOp>,
    /// Per-site `S^-_j`.
    pub sm_site: Vec<QOp>,
    /// Collective `S^z = Σ_j S^z_j`.
    pub sz: QOp,
    pub sp: QOp,
    pub sm: QOp,
}

impl Operators {
    /// Number operator `a†a`.
    pub fn number(&self) -> QOp {
        &self.a_dag * &self.a
    }

    /// Casimir `(S^z)² + ½(S^+S^- + S^-S^+)` of the collective spin.
    pub fn casimir(&self) -> QOp {
        casimir_of(&self.sz, &self.sp, &self.sm)
    }

    /// Casimir of a single site.
    pub fn site_casimir(&self, j: usize) -> QOp {
        casimir_of(&self.sz_site[j], &self.sp_site[j], &self.sm_site[j])
    }
}

pub(crate) fn casimir_of(sz: &QOp, sp: &QOp, sm: &QOp) -> QOp {
    sz * sz + (sp * sm + sm * sp) * 0.5
}

/// Annihilation operator on the Fock states `|0⟩…|n_max⟩`.
pub fn annihilation_matrix(n_max: usize) -> DMatrix<Complex64> {
    let d = n_max + 1;
    let mut m = DMatrix::zeros(d, d);
    for n in 1..d {
        m[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    m
}

/// `(S^z, S^+, S^-)` in the `m = s, …, -s` basis.
pub fn spin_matrices(spin: Spin) -> (DMatrix<Complex64>, DMatrix<Complex64>, DMatrix<Complex64>) {
    let d = spin.dim();
    let s = spin.value();
    let mut sz = DMatrix::zeros(d, d);
    let mut sp = DMatrix::zeros(d, d);
    for k in 0..d {
        let m = s - k as f64;
        sz[(k, k)] = Complex64::new(m, 0.0);
        if k > 0 {
            // S^+|m⟩ = √(s(s+1) - m(m+1)) |m+1⟩, and |m+1⟩ sits at index k-1.
            let amp = (s * (s + 1.0) - m * (m + 1.0)).sqrt();
            sp[(k - 1, k)] = Complex64::new(amp, 0.0);
        }
    }
    let sm = sp.adjoint();
    (sz, sp, sm)
}

fn embed(
    space: &SpaceSpec,
    boson: Option<&DMatrix<Complex64>>,
    site: Option<(usize, &DMatrix<Complex64>)>,
) -> DMatrix<Complex64> {
    let mut out = match boson {
        Some(b) => b.clone(),
        None => DMatrix::identity(space.boson_dim(), space.boson_dim()),
    };
    for (j, spin) in space.sites().iter().enumerate() {
        let factor = match site {
            Some((k, m)) if k == j => m.clone(),
            _ => DMatrix::identity(spin.dim(), spin.dim()),
        };
        out = out.kronecker(&factor);
    }
    out
}

/// Builds the ladder, identity and spin operators of `space`.
pub fn make_operators(space: &SpaceSpec) -> Operators {
    let space = Arc::new(space.clone());
    let a_small = annihilation_matrix(space.n_max());
    let a = QOp {
        space: space.clone(),
        matrix: embed(&space, Some(&a_small), None),
        degree: 1,
    };
    let a_dag = a.adjoint();
    let identity = QOp::identity(&space);

    let mut sz_site = Vec::with_capacity(space.n_sites());
    let mut sp_site = Vec::with_capacity(space.n_sites());
    let mut sm_site = Vec::with_capacity(space.n_sites());
    for (j, &spin) in space.sites().iter().enumerate() {
        let (sz, sp, sm) = spin_matrices(spin);
        let wrap = |m: &DMatrix<Complex64>| QOp {
            space: space.clone(),
            matrix: embed(&space, None, Some((j, m))),
            degree: 0,
        };
        sz_site.push(wrap(&sz));
        sp_site.push(wrap(&sp));
        sm_site.push(wrap(&sm));
    }
    let total = |ops: &[QOp]| ops.iter().fold(QOp::zero(&space), |acc, op| acc + op);
    let sz = total(&sz_site);
    let sp = total(&sp_site);
    let sm = total(&sm_site);

    Operators {
        space,
        a,
        a_dag,
        identity,
        sz_site,
        sp_site,
        sm_site,
        sz,
        sp,
        sm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn ladder_matrix_elements() {
        let ops = make_operators(&SpaceSpec::new(2, vec![]));
        let ad = ops.a_dag.matrix();
        assert_eq!(ad[(1, 0)], c(1.0));
        assert!((ad[(2, 1)] - c(2f64.sqrt())).norm() < 1e-15);
        assert_eq!(ops.a.degree(), 1);
        assert_eq!(ops.a_dag.degree(), 1);
    }

    #[test]
    fn spin_half_sz_is_half_diagonal() {
        let ops = make_operators(&SpaceSpec::new(2, vec![Spin::HALF]));
        let sz = ops.sz.matrix();
        for n in 0..3 {
            assert_eq!(sz[(2 * n, 2 * n)], c(0.5));
            assert_eq!(sz[(2 * n + 1, 2 * n + 1)], c(-0.5));
        }
        assert_eq!(ops.sz.degree(), 0);
    }

    #[test]
    fn collective_closure_two_sites() {
        let ops = make_operators(&SpaceSpec::new(2, vec![Spin::HALF, Spin::HALF]));
        let lhs = ops.sp.commutator(&ops.sm) - &ops.sz * 2.0;
        assert!(lhs.matrix().iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn algebra_examples() {
        let ops = make_operators(&SpaceSpec::new(5, vec![Spin::HALF]));
        let aa = ops.a.commutator(&ops.a);
        assert!(aa.is_zero());
        assert!(aa.degree() <= 2);
        let adj = ops.sp.adjoint();
        assert_eq!(adj.matrix(), ops.sm.matrix());
        let zp = ops.sz.commutator(&ops.sp);
        assert!(guarded_equal(&zp, &ops.sp, 1e-15).unwrap().pass);
    }

    #[test]
    fn space_mismatch_is_reported() {
        let x = make_operators(&SpaceSpec::new(4, vec![Spin::HALF]));
        let y = make_operators(&SpaceSpec::new(5, vec![Spin::HALF]));
        assert_eq!(x.a.try_add(&y.a).unwrap_err(), Error::SpaceMismatch);
        assert_eq!(x.a.try_commutator(&y.a).unwrap_err(), Error::SpaceMismatch);
        assert_eq!(
            guarded_equal(&x.a, &y.a, 1e-12).unwrap_err(),
            Error::SpaceMismatch
        );
    }

    #[test]
    fn guarded_equal_identity_case() {
        let ops = make_operators(&SpaceSpec::new(4, vec![Spin::ONE]));
        let x = &ops.a * &ops.sp;
        let r = guarded_equal(&x, &x, 1e-14).unwrap();
        assert!(r.pass);
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn ccr_passes_only_under_guard() {
        let ops = make_operators(&SpaceSpec::new(6, vec![]));
        let ccr = ops.a.commutator(&ops.a_dag);
        let r = guarded_equal(&ccr, &ops.identity, 1e-14).unwrap();
        assert!(r.pass);
        assert_eq!(r.guard, 2);
        // a†|6⟩ = 0 in the truncated space, so the corner reads -6 instead of 1.
        assert!((ccr.matrix()[(6, 6)] - c(-6.0)).norm() < 1e-13);
        assert!(((ccr.matrix()[(6, 6)] - c(1.0)).norm() - 7.0).abs() < 1e-13);
    }

    #[test]
    fn distinct_ladders_fail() {
        for n_max in 4..8 {
            let ops = make_operators(&SpaceSpec::new(n_max, vec![]));
            let r = guarded_equal(&ops.a, &ops.a_dag, 1e-8).unwrap();
            assert!(!r.pass);
            assert!(r.residual >= 1.0 / (n_max as f64).sqrt());
        }
    }

    #[test]
    fn guard_exhaustion() {
        let ops = make_operators(&SpaceSpec::new(1, vec![]));
        let x = &ops.a * &ops.a_dag;
        assert!(matches!(
            guarded_equal(&x, &x, 1e-12),
            Err(Error::GuardExhausted { n_max: 1, guard: 2 })
        ));
    }

    #[test]
    fn casimir_per_spin() {
        for twice in 1..=5 {
            let spin = Spin::from_twice(twice).unwrap();
            let ops = make_operators(&SpaceSpec::new(3, vec![spin]));
            let cas = ops.casimir();
            let expected = QOp::scalar(&ops.space, c(spin.casimir()));
            let diff = (&cas - &expected)
                .matrix()
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-13, "spin {spin}: {diff}");
        }
    }

    #[test]
    fn spin_parsing() {
        assert_eq!(Spin::from_f64(1.5).unwrap().twice(), 3);
        assert!(Spin::from_f64(0.3).is_err());
        assert!(Spin::from_f64(0.0).is_err());
        assert_eq!(
            SpaceSpec::from_magnitudes(4, &[0.5, 1.0]).unwrap().dim(),
            5 * 2 * 3
        );
    }

    #[test]
    fn boson_index_is_slowest() {
        let space = SpaceSpec::new(3, vec![Spin::HALF, Spin::ONE]);
        assert_eq!(space.occupation(5), 0);
        assert_eq!(space.occupation(6), 1);
        assert_eq!(space.guarded_len(1).unwrap(), 3 * 6);
    }
}
