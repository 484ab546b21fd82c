#![allow(dead_code)]

use gaudin_forge::hilbert::{QOp, SpaceSpec, Spin};
use gaudin_forge::laxkit::{LaxFamily, Sampler};
use gaudin_forge::repzoo::{
    gen_representation, inhom_representation, tc_representation, GenRepParams, InhomBase,
    InhomSpec, TcParams,
};
use gaudin_forge::Complex64;

pub fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn random_tc(s: &mut Sampler) -> TcParams {
    TcParams::new(
        s.uniform(0.5, 1.5),
        s.uniform(-1.0, 1.0),
        s.uniform(0.6, 1.5),
    )
    .unwrap()
}

pub fn random_gamma(s: &mut Sampler) -> Complex64 {
    let modulus = s.uniform(0.6, 1.5);
    let phase = s.uniform(0.0, std::f64::consts::TAU);
    Complex64::from_polar(modulus, phase)
}

pub fn random_gen(s: &mut Sampler) -> GenRepParams {
    let a1 = s.complex_in_box(1.0);
    let a2 = s.complex_in_box(1.0);
    let b1 = s.complex_in_box(1.0);
    let b2 = s.complex_in_box(1.0);
    let rho = s.complex_in_box(1.0);
    let gamma = random_gamma(s);
    GenRepParams::new(a1, a2, b1, b2, rho, gamma).unwrap()
}

/// Two distinct inhomogeneities inside the sampling disk, at least 0.6 apart.
pub fn random_epsilons(s: &mut Sampler, n: usize) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = Vec::with_capacity(n);
    while out.len() < n {
        let z = s.complex_in_box(1.0);
        if out.iter().all(|e| (e - z).norm() >= 0.6) {
            out.push(z);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rep {
    Tc,
    Gen,
    Inhom,
}

impl Rep {
    pub const ALL: [Rep; 3] = [Rep::Tc, Rep::Gen, Rep::Inhom];

    pub fn name(self) -> &'static str {
        match self {
            Rep::Tc => "tc",
            Rep::Gen => "gen",
            Rep::Inhom => "inhom(2 sites)",
        }
    }

    pub fn space(self, n_max: usize) -> SpaceSpec {
        match self {
            Rep::Tc => SpaceSpec::new(n_max, vec![Spin::HALF, Spin::HALF]),
            Rep::Gen => SpaceSpec::new(n_max, vec![Spin::HALF, Spin::ONE]),
            Rep::Inhom => SpaceSpec::new(n_max, vec![Spin::HALF, Spin::HALF]),
        }
    }

    /// Draws random parameters and builds the family on `space`.
    pub fn draw(self, s: &mut Sampler, n_max: usize) -> LaxFamily {
        let space = self.space(n_max);
        match self {
            Rep::Tc => tc_representation(&space, &random_tc(s)).unwrap(),
            Rep::Gen => gen_representation(&space, &random_gen(s)).unwrap(),
            Rep::Inhom => {
                let base = InhomBase::Gen(random_gen(s));
                let spec = InhomSpec::new(random_epsilons(s, 2), base).unwrap();
                inhom_representation(&space, &spec).unwrap()
            }
        }
    }
}

pub fn max_abs(op: &QOp) -> f64 {
    op.matrix().iter().map(|z| z.norm()).fold(0.0, f64::max)
}
