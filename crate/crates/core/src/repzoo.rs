//! Concrete Lax representations and the charges they generate.
//!
//! Three families are provided: the Tavis-Cummings representation, the
//! generalized representation with complex parameters `(α1, α2, β1, β2, ρ, γ)`,
//! and its inhomogeneous variant with one pole per spin site. Charges are
//! available both in closed form and by exact Laurent fitting of the
//! generating function `τ(λ) = ½ Tr L(λ)²`.

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{guarded_equal, make_operators, Operators, QOp, SpaceSpec};
use crate::laxkit::{generating_function, LaxFamily, RationalOp};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn invalid(key: &str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        key: key.into(),
        reason: reason.into(),
    }
}

/// Tavis-Cummings parameters: mode frequency, qubit gap and coupling.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TcParams {
    pub omega: f64,
    pub delta: f64,
    pub g: f64,
}

impl TcParams {
    pub fn new(omega: f64, delta: f64, g: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(invalid("omega", "must be a finite positive number"));
        }
        if !delta.is_finite() {
            return Err(invalid("delta", "must be finite"));
        }
        if !g.is_finite() || g == 0.0 {
            return Err(invalid("g", "must be finite and non-zero"));
        }
        Ok(TcParams { omega, delta, g })
    }

    /// Generalized-representation parameters that reproduce this model (with
    /// its pole moved to the origin).
    pub fn as_generalized(&self) -> GenRepParams {
        let two_over_g = re(2.0 / self.g);
        GenRepParams {
            alpha1: two_over_g,
            alpha2: two_over_g,
            beta1: Complex64::default(),
            beta2: Complex64::default(),
            rho: re(-self.omega / (self.g * self.g)),
            gamma: ONE,
        }
    }
}

/// Parameters of the generalized representation. `gamma` must be non-zero.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenRepParams {
    pub alpha1: Complex64,
    pub alpha2: Complex64,
    pub beta1: Complex64,
    pub beta2: Complex64,
    pub rho: Complex64,
    pub gamma: Complex64,
}

impl GenRepParams {
    pub fn new(
        alpha1: Complex64,
        alpha2: Complex64,
        beta1: Complex64,
        beta2: Complex64,
        rho: Complex64,
        gamma: Complex64,
    ) -> Result<Self> {
        let p = GenRepParams {
            alpha1,
            alpha2,
            beta1,
            beta2,
            rho,
            gamma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("rho", self.rho),
            ("gamma", self.gamma),
        ];
        for (key, v) in named {
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(invalid(key, "must be finite"));
            }
        }
        if self.gamma.norm() == 0.0 {
            return Err(invalid("gamma", "must be non-zero"));
        }
        Ok(())
    }

    /// `α1α2 - β1β2`
    pub fn det(&self) -> Complex64 {
        self.alpha1 * self.alpha2 - self.beta1 * self.beta2
    }

    /// Parameters for which `H0 + κH1` is Hermitian when `ρ`, `κ` are real:
    /// `α2 = conj(α1)`, `β2 = conj(β1)`, `γ = 1`.
    pub fn hermitian(alpha1: Complex64, beta1: Complex64, rho: f64) -> Self {
        GenRepParams {
            alpha1,
            alpha2: alpha1.conj(),
            beta1,
            beta2: beta1.conj(),
            rho: re(rho),
            gamma: ONE,
        }
    }
}

/// Bosonic and polynomial part of an inhomogeneous family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InhomBase {
    Tc(TcParams),
    Gen(GenRepParams),
}

impl InhomBase {
    pub fn generalized(&self) -> GenRepParams {
        match self {
            InhomBase::Tc(p) => p.as_generalized(),
            InhomBase::Gen(p) => *p,
        }
    }
}

/// One pole `ε_j` per spin site on top of a base representation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InhomSpec {
    pub epsilons: Vec<Complex64>,
    pub base: InhomBase,
}

impl InhomSpec {
    pub fn new(epsilons: Vec<Complex64>, base: InhomBase) -> Result<Self> {
        for (i, ei) in epsilons.iter().enumerate() {
            if !ei.re.is_finite() || !ei.im.is_finite() {
                return Err(invalid("epsilons", "must be finite"));
            }
            if let Some(j) = epsilons[..i].iter().position(|ej| ej == ei) {
                return Err(Error::DuplicateEpsilon {
                    first: j,
                    second: i,
                });
            }
        }
        if let InhomBase::Gen(p) = &base {
            p.validate()?;
        }
        Ok(InhomSpec { epsilons, base })
    }
}

fn require_spins(space: &SpaceSpec) -> Result<()> {
    if space.n_sites() == 0 {
        return Err(Error::InvalidSpace(
            "representation needs at least one spin site".into(),
        ));
    }
    Ok(())
}

/// Tavis-Cummings representation:
/// `A = (2λ - ω)/g² + S^z/(λ-Δ)`, `B = 2a/g + S^-/(λ-Δ)`, `C = 2a†/g + S^+/(λ-Δ)`.
pub fn tc_representation(space: &SpaceSpec, p: &TcParams) -> Result<LaxFamily> {
    require_spins(space)?;
    let ops = make_operators(space);
    let g2 = p.g * p.g;
    let delta = re(p.delta);
    let a = RationalOp::zero(&ops.space)
        .with_poly(0, ops.identity.scale(re(-p.omega / g2)))?
        .with_poly(1, ops.identity.scale(re(2.0 / g2)))?
        .with_pole(delta, ops.sz.clone())?;
    let b = RationalOp::zero(&ops.space)
        .with_poly(0, &ops.a * (2.0 / p.g))?
        .with_pole(delta, ops.sm.clone())?;
    let c = RationalOp::zero(&ops.space)
        .with_poly(0, &ops.a_dag * (2.0 / p.g))?
        .with_pole(delta, ops.sp.clone())?;
    LaxFamily::new(a, b, c)
}

struct SpinTerm<'a> {
    location: Complex64,
    sz: &'a QOp,
    sp: &'a QOp,
    sm: &'a QOp,
}

/// Shared assembly for the generalized and inhomogeneous families.
fn assemble(ops: &Operators, p: &GenRepParams, terms: &[SpinTerm<'_>]) -> Result<LaxFamily> {
    let mut a = RationalOp::zero(&ops.space)
        .with_poly(0, ops.identity.scale(p.rho))?
        .with_poly(1, ops.identity.scale(p.det() * 0.5))?;
    let mut b = RationalOp::zero(&ops.space);
    let mut c = RationalOp::zero(&ops.space);
    let ladder = |x: Complex64, y: Complex64| -> Option<QOp> {
        match (x.norm() > 0.0, y.norm() > 0.0) {
            (false, false) => None,
            (true, false) => Some(ops.a.scale(x)),
            (false, true) => Some(ops.a_dag.scale(y)),
            (true, true) => Some(&ops.a * x + &ops.a_dag * y),
        }
    };
    if let Some(op) = ladder(p.alpha1, p.beta1) {
        b.add_poly(0, op)?;
    }
    if let Some(op) = ladder(p.beta2, p.alpha2) {
        c.add_poly(0, op)?;
    }
    for t in terms {
        a.add_pole(t.location, t.sz.clone())?;
        b.add_pole(t.location, t.sm.scale(p.gamma))?;
        c.add_pole(t.location, t.sp.scale(ONE / p.gamma))?;
    }
    LaxFamily::new(a, b, c)
}

/// Generalized representation:
/// `A = [½(α1α2-β1β2)λ + ρ]I + S^z/λ`, `B = α1a + β1a† + γS^-/λ`,
/// `C = β2a + α2a† + S^+/(γλ)`.
pub fn gen_representation(space: &SpaceSpec, p: &GenRepParams) -> Result<LaxFamily> {
    require_spins(space)?;
    p.validate()?;
    let ops = make_operators(space);
    let term = SpinTerm {
        location: Complex64::default(),
        sz: &ops.sz,
        sp: &ops.sp,
        sm: &ops.sm,
    };
    assemble(&ops, p, &[term])
}

/// Inhomogeneous representation: the collective spin term is replaced by
/// `Σ_j S_j/(λ - ε_j)` with per-site operators.
pub fn inhom_representation(space: &SpaceSpec, spec: &InhomSpec) -> Result<LaxFamily> {
    require_spins(space)?;
    let spec = InhomSpec::new(spec.epsilons.clone(), spec.base)?;
    if spec.epsilons.len() != space.n_sites() {
        return Err(invalid(
            "epsilons",
            format!(
                "{} values for {} spin sites",
                spec.epsilons.len(),
                space.n_sites()
            ),
        ));
    }
    let ops = make_operators(space);
    let terms: Vec<SpinTerm<'_>> = spec
        .epsilons
        .iter()
        .enumerate()
        .map(|(j, &location)| SpinTerm {
            location,
            sz: &ops.sz_site[j],
            sp: &ops.sp_site[j],
            sm: &ops.sm_site[j],
        })
        .collect();
    assemble(&ops, &spec.base.generalized(), &terms)
}

/// Closed-form Laurent coefficients of `τ(λ)` for the generalized representation.
#[derive(Clone, Debug)]
pub struct ClosedFormCharges {
    pub h0: QOp,
    pub h1: QOp,
    pub c2: QOp,
    /// Coefficient of `λ²`, `¼(α1α2-β1β2)²`.
    pub lambda2: Complex64,
    /// Coefficient of `λ`, `ρ(α1α2-β1β2)`.
    pub lambda1: Complex64,
}

pub fn closed_form_charges(space: &SpaceSpec, p: &GenRepParams) -> Result<ClosedFormCharges> {
    p.validate()?;
    let ops = make_operators(space);
    Ok(charges_from_ops(&ops, p))
}

fn charges_from_ops(ops: &Operators, p: &GenRepParams) -> ClosedFormCharges {
    let GenRepParams {
        alpha1,
        alpha2,
        beta1,
        beta2,
        rho,
        gamma,
    } = *p;
    let det = p.det();
    let sym = alpha1 * alpha2 + beta1 * beta2;
    let (a, ad) = (&ops.a, &ops.a_dag);

    let h0 = ops.identity.scale((sym + rho * rho * 2.0) * 0.5)
        + (ad * a).scale(sym)
        + (ad * ad).scale(alpha2 * beta1)
        + (a * a).scale(alpha1 * beta2)
        + ops.sz.scale(det);
    let h1 = (ad * &ops.sm).scale(alpha2 * gamma)
        + (ad * &ops.sp).scale(beta1 / gamma)
        + (a * &ops.sp).scale(alpha1 / gamma)
        + (a * &ops.sm).scale(beta2 * gamma)
        + ops.sz.scale(rho * 2.0);
    let c2 = ops.casimir();
    ClosedFormCharges {
        h0,
        h1,
        c2,
        lambda2: det * det * 0.25,
        lambda1: rho * det,
    }
}

/// Reference operators of the Tavis-Cummings model.
#[derive(Clone, Debug)]
pub struct TcReference {
    /// `H_N = a†a + S^z`
    pub h_n: QOp,
    /// `H_TC = ωa†a + 2ΔS^z + g(aS^+ + a†S^-)`
    pub h_tc: QOp,
    /// Expected `λ⁰` coefficient, `(4/g²)H_N + ω²/g⁴ + 2/g²`.
    pub constant: QOp,
    /// Expected residue at `λ = Δ`, `(2/g²)(H_TC - ωH_N)`.
    pub residue: QOp,
    pub c2: QOp,
    pub lambda2: Complex64,
    pub lambda1: Complex64,
}

pub fn tc_hamiltonian(ops: &Operators, p: &TcParams) -> QOp {
    ops.number() * p.omega
        + &ops.sz * (2.0 * p.delta)
        + (&ops.a * &ops.sp + &ops.a_dag * &ops.sm) * p.g
}

pub fn number_operator(ops: &Operators) -> QOp {
    ops.number() + &ops.sz
}

pub fn tc_reference(space: &SpaceSpec, p: &TcParams) -> TcReference {
    let ops = make_operators(space);
    let g2 = p.g * p.g;
    let h_n = number_operator(&ops);
    let h_tc = tc_hamiltonian(&ops, p);
    let constant = &h_n * (4.0 / g2)
        + ops
            .identity
            .scale(re(p.omega * p.omega / (g2 * g2) + 2.0 / g2));
    let residue = (&h_tc - &h_n * p.omega) * (2.0 / g2);
    TcReference {
        h_n,
        h_tc,
        constant,
        residue,
        c2: ops.casimir(),
        lambda2: re(4.0 / (g2 * g2)),
        lambda1: re(-4.0 * p.omega / (g2 * g2)),
    }
}

/// Closed-form Laurent data of the inhomogeneous family.
#[derive(Clone, Debug)]
pub struct InhomCharges {
    pub lambda2: Complex64,
    pub lambda1: Complex64,
    /// `λ⁰` coefficient; same form as `H0` with collective `S^z`.
    pub h0: QOp,
    /// Residue at `ε_j`.
    pub residues: Vec<QOp>,
    /// Double-pole coefficient at `ε_j` (the site Casimir).
    pub casimirs: Vec<QOp>,
}

impl InhomCharges {
    /// `H0 + κ Σ_j R_j`
    pub fn physical(&self, kappa: Complex64) -> QOp {
        self.residues
            .iter()
            .fold(self.h0.clone(), |acc, r| acc + r.scale(kappa))
    }
}

/// Residues follow from expanding `A² + ½(BC + CB)` around each `ε_j`:
/// `R_j = 2A₀(ε_j)S^z_j + b S^+_j/γ + γ c S^-_j
///        + Σ_{k≠j} (2S^z_jS^z_k + S^+_jS^-_k + S^-_jS^+_k)/(ε_j - ε_k)`
/// with `A₀(λ) = ½(α1α2-β1β2)λ + ρ`, `b = α1a + β1a†`, `c = β2a + α2a†`.
pub fn inhom_closed_form(space: &SpaceSpec, spec: &InhomSpec) -> Result<InhomCharges> {
    require_spins(space)?;
    let spec = InhomSpec::new(spec.epsilons.clone(), spec.base)?;
    if spec.epsilons.len() != space.n_sites() {
        return Err(invalid("epsilons", "one value per spin site is required"));
    }
    let p = spec.base.generalized();
    let ops = make_operators(space);
    let base = charges_from_ops(&ops, &p);
    let b = &ops.a * p.alpha1 + &ops.a_dag * p.beta1;
    let c = &ops.a * p.beta2 + &ops.a_dag * p.alpha2;
    let a0 = |lambda: Complex64| p.det() * 0.5 * lambda + p.rho;

    let eps = &spec.epsilons;
    let mut residues = Vec::with_capacity(eps.len());
    for (j, &ej) in eps.iter().enumerate() {
        let mut r = ops.sz_site[j].scale(a0(ej) * 2.0)
            + (&b * &ops.sp_site[j]).scale(ONE / p.gamma)
            + (&c * &ops.sm_site[j]).scale(p.gamma);
        for (k, &ek) in eps.iter().enumerate() {
            if k == j {
                continue;
            }
            let exchange = (&ops.sz_site[j] * &ops.sz_site[k]) * 2.0
                + &ops.sp_site[j] * &ops.sm_site[k]
                + &ops.sm_site[j] * &ops.sp_site[k];
            r = r + exchange.scale(ONE / (ej - ek));
        }
        residues.push(r);
    }
    let casimirs = (0..eps.len()).map(|j| ops.site_casimir(j)).collect();
    Ok(InhomCharges {
        lambda2: base.lambda2,
        lambda1: base.lambda1,
        h0: base.h0,
        residues,
        casimirs,
    })
}

/// `H0 + κ H1`
pub fn physical_hamiltonian(h0: &QOp, h1: &QOp, kappa: Complex64) -> Result<QOp> {
    h0.axpy(kappa, h1)
}

/// Guarded comparison of `H` with its adjoint.
pub fn is_hermitian(h: &QOp, tol: f64) -> Result<bool> {
    Ok(guarded_equal(h, &h.adjoint(), tol)?.pass)
}

/// Linear mixing `(ã, ã†)ᵀ = [[α1, β1], [β2, α2]] (a, a†)ᵀ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bogoliubov {
    pub matrix: Matrix2<Complex64>,
    pub det: Complex64,
    /// True when the determinant vanishes (the map is not invertible).
    pub singular: bool,
}

impl Bogoliubov {
    /// Canonical (preserves `[a, a†] = 1`) when the determinant is one.
    pub fn is_canonical(&self, tol: f64) -> bool {
        (self.det - ONE).norm() <= tol
    }

    /// `(ã, ã†)` built from the ladders of `ops`.
    pub fn transformed(&self, ops: &Operators) -> (QOp, QOp) {
        let m = &self.matrix;
        let at = &ops.a * m[(0, 0)] + &ops.a_dag * m[(0, 1)];
        let at_dag = &ops.a * m[(1, 0)] + &ops.a_dag * m[(1, 1)];
        (at, at_dag)
    }
}

pub fn bogoliubov_matrix(p: &GenRepParams) -> Bogoliubov {
    let matrix = Matrix2::new(p.alpha1, p.beta1, p.beta2, p.alpha2);
    let det = p.det();
    Bogoliubov {
        matrix,
        det,
        singular: det.norm() == 0.0,
    }
}

/// Laurent coefficient at a pole.
#[derive(Clone, Debug)]
pub struct PoleCoefficient {
    pub location: Complex64,
    pub order: u32,
    pub op: QOp,
}

/// Fitted expansion `Σ_{k=0}^{2} P_k λ^k + Σ_{poles} Σ_{o=1}^{2} Q_{p,o}/(λ-p)^o`.
#[derive(Clone, Debug)]
pub struct LaurentDecomp {
    pub poly: Vec<QOp>,
    pub poles: Vec<PoleCoefficient>,
    /// Worst guarded deviation at the held-out points.
    pub fit_residual: f64,
    /// Condition number of the column-equilibrated sample matrix.
    pub condition: f64,
}

impl LaurentDecomp {
    pub fn poly(&self, power: usize) -> Option<&QOp> {
        self.poly.get(power)
    }

    pub fn pole(&self, location: Complex64, order: u32) -> Option<&QOp> {
        self.poles
            .iter()
            .find(|c| c.order == order && (c.location - location).norm() < 1e-12)
            .map(|c| &c.op)
    }

    pub fn evaluate(&self, lambda: Complex64) -> Result<QOp> {
        let space = self.poly[0].space().clone();
        let mut acc = QOp::zero(&space);
        let mut power = ONE;
        for coeff in &self.poly {
            acc = acc.axpy(power, coeff)?;
            power *= lambda;
        }
        for c in &self.poles {
            acc = acc.axpy(ONE / (lambda - c.location).powu(c.order), &c.op)?;
        }
        Ok(acc.with_degree(self.poly[0].degree()))
    }
}

pub const POLY_DEGREE: usize = 2;
pub const MAX_POLE_ORDER: u32 = 2;
pub const CONDITION_LIMIT: f64 = 1e10;
const HELD_OUT: usize = 3;

#[derive(Clone, Copy)]
enum Basis {
    Power(usize),
    Pole(Complex64, u32),
}

impl Basis {
    fn at(self, lambda: Complex64) -> Complex64 {
        match self {
            Basis::Power(k) => lambda.powu(k as u32),
            Basis::Pole(p, o) => ONE / (lambda - p).powu(o),
        }
    }
}

/// Fits `τ(λ)` of a Lax family to its known pole structure.
pub fn laurent_fit(l: &LaxFamily, tol: f64) -> Result<LaurentDecomp> {
    if l.space().n_max() < 6 {
        return Err(Error::GuardExhausted {
            n_max: l.space().n_max(),
            guard: 6,
        });
    }
    let poles = l.pole_locations();
    fit_laurent(
        l.space(),
        &poles,
        2 * l.degree_bound(),
        |lambda| generating_function(l, lambda),
        tol,
    )
}

/// Solves for the Laurent coefficients of an operator-valued function with
/// poles of order at most two at `poles` and polynomial part of degree two.
///
/// Samples sit on two concentric circles around the pole centroid; the
/// elementwise linear system shares one coefficient matrix. `degree` tags the
/// fitted coefficients and sets the guard of the held-out comparison.
pub fn fit_laurent<F>(
    space: &Arc<SpaceSpec>,
    poles: &[Complex64],
    degree: usize,
    eval: F,
    tol: f64,
) -> Result<LaurentDecomp>
where
    F: Fn(Complex64) -> Result<QOp>,
{
    let mut basis: Vec<Basis> = (0..=POLY_DEGREE).map(Basis::Power).collect();
    for &p in poles {
        for o in 1..=MAX_POLE_ORDER {
            basis.push(Basis::Pole(p, o));
        }
    }
    let k = basis.len();

    let center = if poles.is_empty() {
        Complex64::default()
    } else {
        poles.iter().sum::<Complex64>() / poles.len() as f64
    };
    let spread = poles
        .iter()
        .map(|p| (p - center).norm())
        .fold(0.0, f64::max);
    let inner = spread + 1.0;
    let outer = spread + 1.75;
    let n_inner = k.div_ceil(2);
    let n_outer = k - n_inner;
    let mut points = Vec::with_capacity(k);
    for i in 0..n_inner {
        let theta = 0.1 + std::f64::consts::TAU * i as f64 / n_inner as f64;
        points.push(center + Complex64::from_polar(inner, theta));
    }
    for i in 0..n_outer {
        let theta = 0.1
            + std::f64::consts::PI / n_outer as f64
            + std::f64::consts::TAU * i as f64 / n_outer as f64;
        points.push(center + Complex64::from_polar(outer, theta));
    }

    let mut design = DMatrix::from_fn(k, k, |i, j| basis[j].at(points[i]));
    let col_scale: Vec<f64> = (0..k).map(|j| design.column(j).norm()).collect();
    for (j, s) in col_scale.iter().enumerate() {
        design.column_mut(j).scale_mut(1.0 / s);
    }
    let sv = design.clone().svd(false, false).singular_values;
    let condition = sv.max() / sv.min();
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::IllConditioned { condition });
    }

    let dim = space.dim();
    let mut rhs = DMatrix::<Complex64>::zeros(k, dim * dim);
    for (i, &z) in points.iter().enumerate() {
        let sample = eval(z)?;
        for (col, v) in sample.matrix().iter().enumerate() {
            rhs[(i, col)] = *v;
        }
    }
    let solution = design.lu().solve(&rhs).ok_or(Error::IllConditioned {
        condition: f64::INFINITY,
    })?;

    let coefficient = |j: usize| -> Result<QOp> {
        let row: Vec<Complex64> = solution.row(j).iter().map(|v| v / col_scale[j]).collect();
        QOp::new(
            space.clone(),
            DMatrix::from_column_slice(dim, dim, &row),
            degree,
        )
    };
    let mut poly = Vec::with_capacity(POLY_DEGREE + 1);
    let mut pole_coeffs = Vec::with_capacity(k - POLY_DEGREE - 1);
    for (j, b) in basis.iter().enumerate() {
        match *b {
            Basis::Power(_) => poly.push(coefficient(j)?),
            Basis::Pole(location, order) => pole_coeffs.push(PoleCoefficient {
                location,
                order,
                op: coefficient(j)?,
            }),
        }
    }
    let mut decomp = LaurentDecomp {
        poly,
        poles: pole_coeffs,
        fit_residual: 0.0,
        condition,
    };

    let check_radius = spread + 1.375;
    for i in 0..HELD_OUT {
        let theta = 0.7 + std::f64::consts::TAU * i as f64 / HELD_OUT as f64;
        let z = center + Complex64::from_polar(check_radius, theta);
        let expected = eval(z)?.with_degree(degree);
        let cmp = guarded_equal(&decomp.evaluate(z)?, &expected, tol)?;
        decomp.fit_residual = decomp.fit_residual.max(cmp.residual);
    }
    if decomp.fit_residual.is_nan() || decomp.fit_residual > tol {
        return Err(Error::FitRejected {
            residual: decomp.fit_residual,
            tolerance: tol,
        });
    }
    Ok(decomp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::Spin;
    use crate::laxkit::Entry;

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_dev(x: &QOp, y: &QOp) -> f64 {
        guarded_equal(x, y, f64::INFINITY).unwrap().residual
    }

    #[test]
    fn gamma_zero_is_rejected() {
        let z = Complex64::default();
        let err = GenRepParams::new(ONE, ONE, z, z, z, z).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { ref key, .. } if key == "gamma"));
    }

    #[test]
    fn tc_params_validation() {
        assert!(TcParams::new(1.0, 0.2, 0.0).is_err());
        assert!(TcParams::new(-1.0, 0.2, 0.5).is_err());
        assert!(TcParams::new(1.0, 0.2, 0.5).is_ok());
    }

    #[test]
    fn duplicate_epsilon_is_rejected() {
        let base = InhomBase::Tc(TcParams::new(1.0, 0.0, 1.0).unwrap());
        let err = InhomSpec::new(vec![cx(0.4, 0.0), cx(0.4, 0.0)], base).unwrap_err();
        assert_eq!(
            err,
            Error::DuplicateEpsilon {
                first: 0,
                second: 1
            }
        );
    }

    #[test]
    fn representations_need_spins() {
        let space = SpaceSpec::new(6, vec![]);
        let tc = TcParams::new(1.0, 0.0, 1.0).unwrap();
        assert!(matches!(
            tc_representation(&space, &tc),
            Err(Error::InvalidSpace(_))
        ));
    }

    #[test]
    fn counter_rotating_term_appears_with_beta1() {
        let space = SpaceSpec::new(6, vec![Spin::HALF]);
        let p = GenRepParams::new(ONE, ONE, cx(0.3, 0.0), Complex64::default(), ONE, ONE).unwrap();
        let l = gen_representation(&space, &p).unwrap();
        let ops = make_operators(&space);
        let b_const = &l.entry(Entry::B).poly_terms()[0];
        let expected = &ops.a + &ops.a_dag * 0.3;
        assert!(max_dev(b_const, &expected) < 1e-15);
    }

    #[test]
    fn scalar_laurent_function_is_recovered() {
        let space = Arc::new(SpaceSpec::new(6, vec![Spin::HALF]));
        let poles = [Complex64::default()];
        let f = |z: Complex64| Ok(QOp::scalar(&space, z * z * 3.0 + ONE * 2.0 / z));
        let fit = fit_laurent(&space, &poles, 0, f, 1e-12).unwrap();
        let id = QOp::identity(&space);
        let coeff = |op: &QOp| op.matrix()[(0, 0)];
        assert!((coeff(fit.poly(2).unwrap()) - 3.0).norm() < 1e-12);
        assert!((coeff(fit.pole(poles[0], 1).unwrap()) - 2.0).norm() < 1e-12);
        assert!(max_dev(fit.poly(0).unwrap(), &QOp::zero(&space)) < 1e-12);
        assert!(max_dev(fit.poly(1).unwrap(), &QOp::zero(&space)) < 1e-12);
        assert!(max_dev(fit.pole(poles[0], 2).unwrap(), &QOp::zero(&space)) < 1e-12);
        assert!(max_dev(&fit.poly(2).unwrap().scale(ONE / 3.0), &id) < 1e-12);
    }

    #[test]
    fn fit_rejects_wrong_pole_structure() {
        let space = Arc::new(SpaceSpec::new(6, vec![Spin::HALF]));
        // Triple pole at the origin cannot be represented by the basis.
        let f = |z: Complex64| Ok(QOp::scalar(&space, ONE / z.powu(3)));
        let err = fit_laurent(&space, &[Complex64::default()], 0, f, 1e-8).unwrap_err();
        assert!(matches!(err, Error::FitRejected { .. }));
    }

    #[test]
    fn fit_rejects_near_coincident_poles() {
        let space = Arc::new(SpaceSpec::new(6, vec![Spin::HALF]));
        let poles = [Complex64::default(), cx(1e-7, 0.0)];
        let f = |_z: Complex64| Ok(QOp::identity(&space));
        let err = fit_laurent(&space, &poles, 0, f, 1e-8).unwrap_err();
        assert!(matches!(err, Error::IllConditioned { .. }));
    }

    #[test]
    fn closed_form_h0_rotating_case() {
        // β = 0, α1 = α2 = α, γ = 1: H0 = ½(α² + 2ρ²) + α²a†a + α²S^z.
        let space = SpaceSpec::new(6, vec![Spin::HALF, Spin::HALF]);
        let (alpha, rho) = (cx(0.7, 0.2), cx(-0.4, 0.1));
        let z = Complex64::default();
        let p = GenRepParams::new(alpha, alpha, z, z, rho, ONE).unwrap();
        let ch = closed_form_charges(&space, &p).unwrap();
        let ops = make_operators(&space);
        let a2 = alpha * alpha;
        let expected = ops.identity.scale((a2 + rho * rho * 2.0) * 0.5)
            + ops.number().scale(a2)
            + ops.sz.scale(a2);
        assert!(max_dev(&ch.h0, &expected) < 1e-15);
    }

    #[test]
    fn closed_form_h1_tc_substitution() {
        // α = 2/g, ρ = -ω/g²: H1 = (2/g)(aS^+ + a†S^-) - (2ω/g²)S^z.
        let space = SpaceSpec::new(6, vec![Spin::HALF]);
        let tc = TcParams::new(1.3, 0.0, 0.8).unwrap();
        let ch = closed_form_charges(&space, &tc.as_generalized()).unwrap();
        let ops = make_operators(&space);
        let expected = (&ops.a * &ops.sp + &ops.a_dag * &ops.sm) * (2.0 / tc.g)
            - &ops.sz * (2.0 * tc.omega / (tc.g * tc.g));
        assert!(max_dev(&ch.h1, &expected) < 1e-15);
    }

    #[test]
    fn closed_form_casimir_single_site() {
        for s in [0.5, 1.0, 1.5] {
            let space = SpaceSpec::from_magnitudes(5, &[s]).unwrap();
            let p =
                GenRepParams::new(ONE, ONE, cx(0.1, 0.0), cx(0.2, 0.0), ONE, cx(0.5, 0.5)).unwrap();
            let ch = closed_form_charges(&space, &p).unwrap();
            let id = QOp::identity(ch.c2.space());
            assert!(max_dev(&ch.c2, &id.scale(re(s * (s + 1.0)))) < 1e-14);
        }
    }

    #[test]
    fn physical_hamiltonian_defaults() {
        let space = SpaceSpec::new(6, vec![Spin::HALF]);
        let p = GenRepParams::new(
            ONE,
            cx(0.5, 0.1),
            cx(0.2, 0.0),
            cx(0.0, 0.3),
            cx(0.1, 0.0),
            cx(1.2, 0.0),
        )
        .unwrap();
        let ch = closed_form_charges(&space, &p).unwrap();
        let h = physical_hamiltonian(&ch.h0, &ch.h1, Complex64::default()).unwrap();
        assert_eq!(h.matrix(), ch.h0.matrix());
        let other = make_operators(&SpaceSpec::new(7, vec![Spin::HALF]));
        assert_eq!(
            physical_hamiltonian(&ch.h0, &other.a, ONE).unwrap_err(),
            Error::SpaceMismatch
        );
    }

    #[test]
    fn bogoliubov_identity_and_determinant() {
        let z = Complex64::default();
        let p = GenRepParams::new(ONE, ONE, z, z, z, ONE).unwrap();
        let bog = bogoliubov_matrix(&p);
        assert_eq!(bog.matrix, Matrix2::identity());
        assert_eq!(bog.det, ONE);
        assert!(bog.is_canonical(0.0));
        let singular = GenRepParams::new(ONE, ONE, ONE, ONE, z, ONE).unwrap();
        assert!(bogoliubov_matrix(&singular).singular);
    }

    #[test]
    fn bogoliubov_commutator_is_det() {
        let space = SpaceSpec::new(8, vec![Spin::HALF]);
        let ops = make_operators(&space);
        let p = GenRepParams::new(
            cx(1.1, 0.3),
            cx(0.4, -0.2),
            cx(0.6, 0.1),
            cx(-0.3, 0.5),
            ONE,
            ONE,
        )
        .unwrap();
        let bog = bogoliubov_matrix(&p);
        let (at, at_dag) = bog.transformed(&ops);
        let comm = at.commutator(&at_dag);
        let expected = ops.identity.scale(bog.det);
        assert!(guarded_equal(&comm, &expected, 1e-13).unwrap().pass);
    }

    #[test]
    fn hermiticity_examples() {
        let space = SpaceSpec::new(8, vec![Spin::HALF]);
        let ops = make_operators(&space);
        assert!(is_hermitian(&ops.sz, 1e-12).unwrap());

        let herm = GenRepParams::hermitian(cx(0.9, 0.4), cx(0.2, -0.3), 0.35);
        let ch = closed_form_charges(&space, &herm).unwrap();
        let h = physical_hamiltonian(&ch.h0, &ch.h1, re(0.8)).unwrap();
        assert!(is_hermitian(&h, 1e-12).unwrap());

        let z = Complex64::default();
        let skew = GenRepParams::new(
            cx(0.9, 0.4),
            cx(0.7, -0.1),
            ONE,
            z,
            cx(0.2, 0.0),
            cx(1.3, 0.2),
        )
        .unwrap();
        let ch = closed_form_charges(&space, &skew).unwrap();
        let h = physical_hamiltonian(&ch.h0, &ch.h1, ONE).unwrap();
        assert!(!is_hermitian(&h, 1e-6).unwrap());
    }
}
