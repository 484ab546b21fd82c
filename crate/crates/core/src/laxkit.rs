//! Rational r-matrix and operator-valued Lax machinery.
//!
//! A [`LaxFamily`] is the traceless 2×2 matrix `[[A, B], [C, -A]]` whose
//! entries are operator-valued rational functions of the spectral parameter
//! ([`RationalOp`]). The `check_*` functions evaluate the integrability
//! identities at concrete spectral parameters and report a normalized,
//! truncation-guarded residual.

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix4};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{guarded_equal, QOp, SpaceSpec};

/// Evaluations closer than this to a declared pole raise [`Error::PoleCollision`].
pub const POLE_EXCLUSION: f64 = 1e-3;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// The permutation `P(u ⊗ v) = v ⊗ u` on `ℂ² ⊗ ℂ²`.
pub fn permutation_matrix() -> Matrix4<Complex64> {
    let mut p = Matrix4::zeros();
    p[(0, 0)] = ONE;
    p[(1, 2)] = ONE;
    p[(2, 1)] = ONE;
    p[(3, 3)] = ONE;
    p
}

fn check_pole(at: Complex64, pole: Complex64) -> Result<()> {
    if (at - pole).norm() < POLE_EXCLUSION {
        Err(Error::PoleCollision { at, pole })
    } else {
        Ok(())
    }
}

/// Rational r-matrix `P / λ`.
pub fn rational_r(lambda: Complex64) -> Result<Matrix4<Complex64>> {
    check_pole(lambda, ZERO)?;
    Ok(permutation_matrix() / lambda)
}

/// Result of evaluating one identity at one or more sample points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub check: String,
    pub samples: Vec<Complex64>,
    pub residual: f64,
    pub tolerance: f64,
    pub guard: usize,
    pub pass: bool,
}

impl IdentityReport {
    pub fn new(
        check: impl Into<String>,
        samples: Vec<Complex64>,
        residual: f64,
        tolerance: f64,
        guard: usize,
    ) -> Self {
        IdentityReport {
            check: check.into(),
            samples,
            residual,
            tolerance,
            guard,
            pass: residual <= tolerance,
        }
    }

    /// Folds reports of the same check into one carrying the worst residual.
    pub fn worst<I: IntoIterator<Item = IdentityReport>>(reports: I) -> Option<IdentityReport> {
        let mut iter = reports.into_iter();
        let mut acc = iter.next()?;
        for r in iter {
            acc.samples.extend(r.samples);
            acc.guard = acc.guard.max(r.guard);
            if r.residual > acc.residual || r.residual.is_nan() {
                acc.residual = r.residual;
            }
        }
        acc.pass = acc.residual <= acc.tolerance;
        Some(acc)
    }
}

fn kron_id_right(m: &Matrix4<Complex64>) -> DMatrix<Complex64> {
    let m = DMatrix::from_iterator(4, 4, m.iter().copied());
    m.kronecker(&DMatrix::<Complex64>::identity(2, 2))
}

fn kron_id_left(m: &Matrix4<Complex64>) -> DMatrix<Complex64> {
    let m = DMatrix::from_iterator(4, 4, m.iter().copied());
    DMatrix::<Complex64>::identity(2, 2).kronecker(&m)
}

/// `[r12, r13] + [r12, r23] + [r13, r23]` on `ℂ²⊗ℂ²⊗ℂ²` for an arbitrary
/// r-matrix, with `r_ij = r(λ_i - λ_j)` and `r13 = (1⊗P)(r⊗1)(1⊗P)`.
pub fn cybe_sum<F>(r: F, l1: Complex64, l2: Complex64, l3: Complex64) -> Result<DMatrix<Complex64>>
where
    F: Fn(Complex64) -> Result<Matrix4<Complex64>>,
{
    let p23 = kron_id_left(&permutation_matrix());
    let r12 = kron_id_right(&r(l1 - l2)?);
    let r13 = &p23 * kron_id_right(&r(l1 - l3)?) * &p23;
    let r23 = kron_id_left(&r(l2 - l3)?);
    let comm = |x: &DMatrix<Complex64>, y: &DMatrix<Complex64>| x * y - y * x;
    Ok(comm(&r12, &r13) + comm(&r12, &r23) + comm(&r13, &r23))
}

/// Classical Yang-Baxter check for the rational r-matrix.
pub fn check_cybe(l1: Complex64, l2: Complex64, l3: Complex64, tol: f64) -> Result<IdentityReport> {
    let sum = cybe_sum(rational_r, l1, l2, l3)?;
    let residual = sum.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(IdentityReport::new(
        "cybe",
        vec![l1, l2, l3],
        residual,
        tol,
        0,
    ))
}

/// Operator-valued rational function
/// `Σ_k poly[k] λ^k + Σ_j numerator_j / (λ - location_j)`.
#[derive(Clone, Debug)]
pub struct RationalOp {
    space: Arc<SpaceSpec>,
    poly: Vec<QOp>,
    poles: Vec<(Complex64, QOp)>,
}

impl RationalOp {
    pub fn zero(space: &Arc<SpaceSpec>) -> Self {
        RationalOp {
            space: space.clone(),
            poly: Vec::new(),
            poles: Vec::new(),
        }
    }

    pub fn space(&self) -> &Arc<SpaceSpec> {
        &self.space
    }

    /// Adds `op · λ^power`.
    pub fn add_poly(&mut self, power: usize, op: QOp) -> Result<()> {
        if !op.space().as_ref().eq(self.space.as_ref()) {
            return Err(Error::SpaceMismatch);
        }
        while self.poly.len() <= power {
            self.poly.push(QOp::zero(&self.space));
        }
        self.poly[power] = self.poly[power].try_add(&op)?;
        Ok(())
    }

    /// Adds `op / (λ - location)`, merging with an existing term at the same location.
    pub fn add_pole(&mut self, location: Complex64, op: QOp) -> Result<()> {
        if !op.space().as_ref().eq(self.space.as_ref()) {
            return Err(Error::SpaceMismatch);
        }
        match self.poles.iter_mut().find(|(loc, _)| *loc == location) {
            Some((_, existing)) => *existing = existing.try_add(&op)?,
            None => self.poles.push((location, op)),
        }
        Ok(())
    }

    pub fn with_poly(mut self, power: usize, op: QOp) -> Result<Self> {
        self.add_poly(power, op)?;
        Ok(self)
    }

    pub fn with_pole(mut self, location: Complex64, op: QOp) -> Result<Self> {
        self.add_pole(location, op)?;
        Ok(self)
    }

    pub fn poly_terms(&self) -> &[QOp] {
        &self.poly
    }

    pub fn pole_terms(&self) -> &[(Complex64, QOp)] {
        &self.poles
    }

    pub fn pole_terms_mut(&mut self) -> &mut [(Complex64, QOp)] {
        &mut self.poles
    }

    pub fn degree(&self) -> usize {
        self.poly
            .iter()
            .chain(self.poles.iter().map(|(_, op)| op))
            .map(QOp::degree)
            .max()
            .unwrap_or(0)
    }

    pub fn evaluate(&self, lambda: Complex64) -> Result<QOp> {
        for (loc, _) in &self.poles {
            check_pole(lambda, *loc)?;
        }
        let mut acc = QOp::zero(&self.space);
        let mut power = ONE;
        for coeff in &self.poly {
            acc = acc.axpy(power, coeff)?;
            power *= lambda;
        }
        for (loc, numerator) in &self.poles {
            acc = acc.axpy(ONE / (lambda - loc), numerator)?;
        }
        Ok(acc.with_degree(self.degree()))
    }
}

/// A pole of the generating function, with the order it carries there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub location: Complex64,
    pub order: u32,
}

/// `L(λ) = [[A(λ), B(λ)], [C(λ), -A(λ)]]`.
#[derive(Clone, Debug)]
pub struct LaxFamily {
    space: Arc<SpaceSpec>,
    a: RationalOp,
    b: RationalOp,
    c: RationalOp,
    poles: Vec<Pole>,
    degree_bound: usize,
}

/// Names the three independent entries of a Lax matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Entry {
    A,
    B,
    C,
}

impl LaxFamily {
    pub fn new(a: RationalOp, b: RationalOp, c: RationalOp) -> Result<Self> {
        let space = a.space().clone();
        if *b.space() != space || *c.space() != space {
            return Err(Error::SpaceMismatch);
        }
        let mut poles: Vec<Pole> = Vec::new();
        for entry in [&a, &b, &c] {
            for (loc, _) in entry.pole_terms() {
                if !poles.iter().any(|p| p.location == *loc) {
                    // Simple poles in the entries become double poles of tr L².
                    poles.push(Pole {
                        location: *loc,
                        order: 2,
                    });
                }
            }
        }
        let degree_bound = a.degree().max(b.degree()).max(c.degree());
        Ok(LaxFamily {
            space,
            a,
            b,
            c,
            poles,
            degree_bound,
        })
    }

    pub fn space(&self) -> &Arc<SpaceSpec> {
        &self.space
    }

    pub fn poles(&self) -> &[Pole] {
        &self.poles
    }

    pub fn pole_locations(&self) -> Vec<Complex64> {
        self.poles.iter().map(|p| p.location).collect()
    }

    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn entry(&self, which: Entry) -> &RationalOp {
        match which {
            Entry::A => &self.a,
            Entry::B => &self.b,
            Entry::C => &self.c,
        }
    }

    /// Decomposes into `(A, B, C)` so a modified family can be rebuilt.
    pub fn into_entries(self) -> (RationalOp, RationalOp, RationalOp) {
        (self.a, self.b, self.c)
    }

    pub fn check_point(&self, lambda: Complex64) -> Result<()> {
        for pole in &self.poles {
            check_pole(lambda, pole.location)?;
        }
        Ok(())
    }

    pub fn eval_a(&self, lambda: Complex64) -> Result<QOp> {
        self.check_point(lambda)?;
        self.a.evaluate(lambda)
    }

    pub fn eval_b(&self, lambda: Complex64) -> Result<QOp> {
        self.check_point(lambda)?;
        self.b.evaluate(lambda)
    }

    pub fn eval_c(&self, lambda: Complex64) -> Result<QOp> {
        self.check_point(lambda)?;
        self.c.evaluate(lambda)
    }

    /// The 2×2 auxiliary matrix at `λ`.
    pub fn matrix(&self, lambda: Complex64) -> Result<AuxMatrix> {
        let a = self.eval_a(lambda)?;
        let b = self.eval_b(lambda)?;
        let c = self.eval_c(lambda)?;
        let minus_a = -&a;
        AuxMatrix::new(2, vec![a, b, c, minus_a])
    }
}

/// Square matrix over the auxiliary space with operator entries (row-major).
#[derive(Clone, Debug)]
pub struct AuxMatrix {
    n: usize,
    entries: Vec<QOp>,
}

impl AuxMatrix {
    pub fn new(n: usize, entries: Vec<QOp>) -> Result<Self> {
        if entries.len() != n * n || n == 0 {
            return Err(Error::InvalidParameter {
                key: "aux".into(),
                reason: format!("expected {} entries, got {}", n * n, entries.len()),
            });
        }
        if entries.iter().any(|e| !e.same_space(&entries[0])) {
            return Err(Error::SpaceMismatch);
        }
        Ok(AuxMatrix { n, entries })
    }

    pub fn zeros(space: &Arc<SpaceSpec>, n: usize) -> Self {
        AuxMatrix {
            n,
            entries: vec![QOp::zero(space); n * n],
        }
    }

    /// Entries become `scalar · I`.
    pub fn lift_scalar(space: &Arc<SpaceSpec>, m: &DMatrix<Complex64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "lift of a non-square matrix");
        let n = m.nrows();
        let id = QOp::identity(space);
        let entries = (0..n * n).map(|k| id.scale(m[(k / n, k % n)])).collect();
        AuxMatrix { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn space(&self) -> &Arc<SpaceSpec> {
        self.entries[0].space()
    }

    pub fn get(&self, i: usize, j: usize) -> &QOp {
        &self.entries[i * self.n + j]
    }

    pub fn entries(&self) -> &[QOp] {
        &self.entries
    }

    fn check_shape(&self, other: &AuxMatrix) -> Result<()> {
        if self.n != other.n {
            return Err(Error::InvalidParameter {
                key: "aux".into(),
                reason: format!("dimension {} vs {}", self.n, other.n),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &AuxMatrix) -> Result<AuxMatrix> {
        self.check_shape(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(x, y)| x.try_add(y))
            .collect::<Result<_>>()?;
        Ok(AuxMatrix { n: self.n, entries })
    }

    pub fn sub(&self, other: &AuxMatrix) -> Result<AuxMatrix> {
        self.check_shape(other)?;
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(x, y)| x.try_sub(y))
            .collect::<Result<_>>()?;
        Ok(AuxMatrix { n: self.n, entries })
    }

    /// Matrix product; entries multiply as operators, in order.
    pub fn mul(&self, other: &AuxMatrix) -> Result<AuxMatrix> {
        self.check_shape(other)?;
        let n = self.n;
        let space = self.space().clone();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = QOp::zero(&space);
                for k in 0..n {
                    let (x, y) = (self.get(i, k), other.get(k, j));
                    if x.is_zero() || y.is_zero() {
                        continue;
                    }
                    acc = acc.try_add(&x.try_mul(y)?)?;
                }
                entries.push(acc);
            }
        }
        Ok(AuxMatrix { n, entries })
    }

    pub fn commutator(&self, other: &AuxMatrix) -> Result<AuxMatrix> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// `R · self` for a scalar matrix `R`; equal to `lift_scalar(R).mul(self)`.
    pub fn scalar_left_mul(&self, r: &DMatrix<Complex64>) -> Result<AuxMatrix> {
        self.scalar_mul(r, true)
    }

    /// `self · R` for a scalar matrix `R`.
    pub fn scalar_right_mul(&self, r: &DMatrix<Complex64>) -> Result<AuxMatrix> {
        self.scalar_mul(r, false)
    }

    fn scalar_mul(&self, r: &DMatrix<Complex64>, left: bool) -> Result<AuxMatrix> {
        let n = self.n;
        if r.nrows() != n || r.ncols() != n {
            return Err(Error::InvalidParameter {
                key: "aux".into(),
                reason: format!(
                    "scalar factor is {}x{}, expected {n}x{n}",
                    r.nrows(),
                    r.ncols()
                ),
            });
        }
        let space = self.space().clone();
        let mut entries = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = QOp::zero(&space);
                for k in 0..n {
                    let (coeff, op) = if left {
                        (r[(i, k)], self.get(k, j))
                    } else {
                        (r[(k, j)], self.get(i, k))
                    };
                    if coeff != ZERO {
                        acc = acc.axpy(coeff, op)?;
                    }
                }
                entries.push(acc);
            }
        }
        Ok(AuxMatrix { n, entries })
    }

    pub fn trace(&self) -> QOp {
        (0..self.n).fold(QOp::zero(self.space()), |acc, i| acc + self.get(i, i))
    }

    pub fn scale(&self, c: Complex64) -> AuxMatrix {
        AuxMatrix {
            n: self.n,
            entries: self.entries.iter().map(|e| e.scale(c)).collect(),
        }
    }

    /// `self ⊗ 1` on the doubled auxiliary space.
    pub fn tensor_identity(&self) -> AuxMatrix {
        let n = self.n;
        let space = self.space().clone();
        let zero = QOp::zero(&space);
        let mut entries = Vec::with_capacity(n * n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        entries.push(if b == d {
                            self.get(a, c).clone()
                        } else {
                            zero.clone()
                        });
                    }
                }
            }
        }
        AuxMatrix { n: n * n, entries }
    }

    /// `1 ⊗ self` on the doubled auxiliary space.
    pub fn identity_tensor(&self) -> AuxMatrix {
        let n = self.n;
        let space = self.space().clone();
        let zero = QOp::zero(&space);
        let mut entries = Vec::with_capacity(n * n * n * n);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        entries.push(if a == c {
                            self.get(b, d).clone()
                        } else {
                            zero.clone()
                        });
                    }
                }
            }
        }
        AuxMatrix { n: n * n, entries }
    }

    /// Largest guarded element over all entries.
    pub fn guarded_max_abs(&self, guard: usize) -> Result<f64> {
        self.entries
            .iter()
            .map(|e| e.guarded_max_abs(guard))
            .try_fold(0.0f64, |acc, v| Ok(acc.max(v?)))
    }
}

fn require_headroom(space: &SpaceSpec, needed: usize) -> Result<()> {
    if space.n_max() < needed {
        Err(Error::GuardExhausted {
            n_max: space.n_max(),
            guard: needed,
        })
    } else {
        Ok(())
    }
}

fn check_distinct(lambda: Complex64, mu: Complex64) -> Result<()> {
    check_pole(lambda, mu)
}

/// `[L(λ)⊗1, 1⊗L(μ)] + [r(λ-μ), L(λ)⊗1 + 1⊗L(μ)]`, guarded at `2·degree_bound`.
pub fn check_fundamental_identity(
    l: &LaxFamily,
    lambda: Complex64,
    mu: Complex64,
    tol: f64,
) -> Result<IdentityReport> {
    check_distinct(lambda, mu)?;
    let guard = 2 * l.degree_bound();
    require_headroom(l.space(), guard + 2)?;

    let l1 = l.matrix(lambda)?.tensor_identity();
    let l2 = l.matrix(mu)?.identity_tensor();
    let r = rational_r(lambda - mu)?;
    let r = DMatrix::from_iterator(4, 4, r.iter().copied());

    let forward = l1.mul(&l2)?;
    let backward = l2.mul(&l1)?;
    let sum = l1.add(&l2)?;
    let r_sum = sum.scalar_left_mul(&r)?;
    let sum_r = sum.scalar_right_mul(&r)?;
    let expr = forward.sub(&backward)?.add(&r_sum.sub(&sum_r)?)?;

    let scale = [&forward, &backward, &r_sum, &sum_r]
        .iter()
        .map(|m| m.guarded_max_abs(guard))
        .try_fold(1.0f64, |acc, v| Ok::<_, Error>(acc.max(v?)))?;
    let residual = expr.guarded_max_abs(guard)? / scale;
    Ok(IdentityReport::new(
        "fundamental_identity",
        vec![lambda, mu],
        residual,
        tol,
        guard,
    ))
}

/// The six loop-algebra relations between `A, B, C` at `(λ, μ)`.
pub fn gaudin_relation_residuals(
    l: &LaxFamily,
    lambda: Complex64,
    mu: Complex64,
) -> Result<Vec<(&'static str, f64, usize)>> {
    check_distinct(lambda, mu)?;
    let (al, bl, cl) = (l.eval_a(lambda)?, l.eval_b(lambda)?, l.eval_c(lambda)?);
    let (am, bm, cm) = (l.eval_a(mu)?, l.eval_b(mu)?, l.eval_c(mu)?);
    let inv = ONE / (lambda - mu);
    let zero = QOp::zero(l.space());

    let relations: [(&'static str, QOp, QOp); 6] = [
        (
            "[B(l),C(m)]",
            bl.try_commutator(&cm)?,
            (&al - &am).scale(inv * 2.0),
        ),
        (
            "[A(l),B(m)]",
            al.try_commutator(&bm)?,
            (&bl - &bm).scale(inv),
        ),
        (
            "[A(l),C(m)]",
            al.try_commutator(&cm)?,
            (&cl - &cm).scale(-inv),
        ),
        ("[A(l),A(m)]", al.try_commutator(&am)?, zero.clone()),
        ("[B(l),B(m)]", bl.try_commutator(&bm)?, zero.clone()),
        ("[C(l),C(m)]", cl.try_commutator(&cm)?, zero),
    ];
    relations
        .into_iter()
        .map(|(name, lhs, rhs)| {
            let cmp = guarded_equal(&lhs, &rhs, f64::INFINITY)?;
            Ok((name, cmp.residual, cmp.guard))
        })
        .collect()
}

pub fn check_gaudin_relations(
    l: &LaxFamily,
    lambda: Complex64,
    mu: Complex64,
    tol: f64,
) -> Result<IdentityReport> {
    let parts = gaudin_relation_residuals(l, lambda, mu)?;
    let residual = parts.iter().map(|p| p.1).fold(0.0, f64::max);
    let guard = parts.iter().map(|p| p.2).max().unwrap_or(0);
    Ok(IdentityReport::new(
        "gaudin_relations",
        vec![lambda, mu],
        residual,
        tol,
        guard,
    ))
}

/// `τ(λ) = A(λ)² + ½(B(λ)C(λ) + C(λ)B(λ))`.
pub fn generating_function(l: &LaxFamily, lambda: Complex64) -> Result<QOp> {
    let a = l.eval_a(lambda)?;
    let b = l.eval_b(lambda)?;
    let c = l.eval_c(lambda)?;
    Ok(&a * &a + (&b * &c + &c * &b) * 0.5)
}

/// `½ Tr L(λ)²` through the auxiliary-matrix product.
pub fn generating_function_via_trace(l: &LaxFamily, lambda: Complex64) -> Result<QOp> {
    let m = l.matrix(lambda)?;
    Ok(m.mul(&m)?.trace() * 0.5)
}

/// Cross-check of the two routes to `τ(λ)`.
pub fn check_generating_paths(
    l: &LaxFamily,
    lambda: Complex64,
    tol: f64,
) -> Result<IdentityReport> {
    let direct = generating_function(l, lambda)?;
    let traced = generating_function_via_trace(l, lambda)?;
    let cmp = guarded_equal(&direct, &traced, tol)?;
    Ok(IdentityReport::new(
        "generating_paths",
        vec![lambda],
        cmp.residual,
        tol,
        cmp.guard,
    ))
}

/// `[τ(λ), τ(μ)]`, guarded at `4·degree_bound`.
pub fn check_generating_commutativity(
    l: &LaxFamily,
    lambda: Complex64,
    mu: Complex64,
    tol: f64,
) -> Result<IdentityReport> {
    check_distinct(lambda, mu)?;
    let guard = 4 * l.degree_bound();
    require_headroom(l.space(), guard + 2)?;
    let tl = generating_function(l, lambda)?;
    let tm = generating_function(l, mu)?;
    let forward = &tl * &tm;
    let backward = &tm * &tl;
    let scale = 1.0f64
        .max(forward.guarded_max_abs(guard)?)
        .max(backward.guarded_max_abs(guard)?);
    let residual = (&forward - &backward).guarded_max_abs(guard)? / scale;
    Ok(IdentityReport::new(
        "generating_commutativity",
        vec![lambda, mu],
        residual,
        tol,
        guard,
    ))
}

/// Seeded sampler for spectral parameters in the disk `|λ| ≤ 2`, at least
/// `0.5` away from every pole. Pairs and triples are additionally separated
/// by `0.25` so difference quotients stay conditioned.
#[derive(Clone, Debug)]
pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub const RADIUS: f64 = 2.0;
    pub const POLE_MARGIN: f64 = 0.5;
    pub const MIN_SEPARATION: f64 = 0.25;
    const MAX_TRIES: usize = 100_000;

    pub fn new(seed: u64) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn disk_point(&mut self) -> Complex64 {
        let r = Self::RADIUS * self.rng.gen::<f64>().sqrt();
        let theta = std::f64::consts::TAU * self.rng.gen::<f64>();
        Complex64::from_polar(r, theta)
    }

    fn draw(&mut self, poles: &[Complex64], taken: &[Complex64]) -> Result<Complex64> {
        for _ in 0..Self::MAX_TRIES {
            let z = self.disk_point();
            let clear_of_poles = poles.iter().all(|p| (z - p).norm() >= Self::POLE_MARGIN);
            let separated = taken.iter().all(|t| (z - t).norm() >= Self::MIN_SEPARATION);
            if clear_of_poles && separated {
                return Ok(z);
            }
        }
        Err(Error::Sampling(
            "no admissible spectral parameter in the sampling disk".into(),
        ))
    }

    pub fn point(&mut self, poles: &[Complex64]) -> Result<Complex64> {
        self.draw(poles, &[])
    }

    pub fn pair(&mut self, poles: &[Complex64]) -> Result<(Complex64, Complex64)> {
        let l = self.draw(poles, &[])?;
        let m = self.draw(poles, &[l])?;
        Ok((l, m))
    }

    pub fn triple(&mut self) -> Result<(Complex64, Complex64, Complex64)> {
        let a = self.draw(&[], &[])?;
        let b = self.draw(&[], &[a])?;
        let c = self.draw(&[], &[a, b])?;
        Ok((a, b, c))
    }

    /// Uniform complex number with both parts in `[-half_width, half_width]`.
    pub fn complex_in_box(&mut self, half_width: f64) -> Complex64 {
        Complex64::new(
            half_width * (2.0 * self.rng.gen::<f64>() - 1.0),
            half_width * (2.0 * self.rng.gen::<f64>() - 1.0),
        )
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.rng.gen::<f64>()
    }
}
