//! Command-line front end: JSON run configuration, orchestration of the
//! verification, charge, spectrum and sweep commands, and report writing.
//!
//! Exit codes: `0` success, `1` a check failed, `2` configuration or I/O
//! error, `3` a dimension cap was hit.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::hilbert::{guarded_equal, QOp, SpaceSpec};
use crate::laxkit::{
    check_cybe, check_fundamental_identity, check_gaudin_relations, check_generating_commutativity,
    IdentityReport, LaxFamily, Sampler,
};
use crate::repzoo::{
    closed_form_charges, gen_representation, inhom_closed_form, inhom_representation, is_hermitian,
    laurent_fit, physical_hamiltonian, tc_reference, tc_representation, GenRepParams, InhomBase,
    InhomSpec, LaurentDecomp, TcParams,
};
use crate::spectra::{
    eigenvalues_with_cap, pair_commutator_residual, sweep_range, SweepGrid, SweepRecord,
    SweepSettings,
};

/// Caps the number of sweep worker threads.
pub const THREADS_ENV: &str = "GAUDIN_FORGE_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIMENSION_CAP: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "gaudin-forge",
    version,
    about = "Gaudin-type Lax structures on truncated boson-spin spaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the integrability identity checks for the configured model.
    Verify(CommandArgs),
    /// Compare fitted and closed-form Laurent coefficients of the generating function.
    Charges(CommandArgs),
    /// Full spectrum of the physical Hamiltonian.
    Spectrum(CommandArgs),
    /// Spectral sweep over a grid of generalized parameters.
    Sweep(CommandArgs),
}

#[derive(Debug, clap::Args)]
pub struct CommandArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output path; overrides `output.path`. Without either, writes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format; overrides `output.format`.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Tc,
    Gen,
    Inhom,
}

/// Complex number serialized as `[re, im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cx(pub [f64; 2]);

impl From<Cx> for Complex64 {
    fn from(c: Cx) -> Self {
        Complex64::new(c.0[0], c.0[1])
    }
}

impl From<Complex64> for Cx {
    fn from(z: Complex64) -> Self {
        Cx([z.re, z.im])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HilbertConfig {
    pub n_max: usize,
    pub spins: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub omega: Option<f64>,
    pub delta: Option<f64>,
    pub g: Option<f64>,
    pub alpha1: Option<Cx>,
    pub alpha2: Option<Cx>,
    pub beta1: Option<Cx>,
    pub beta2: Option<Cx>,
    pub rho: Option<Cx>,
    pub gamma: Option<Cx>,
    pub kappa: Option<Cx>,
    pub epsilons: Option<Vec<Cx>>,
    /// Base family of an inhomogeneous model, `tc` or `gen`.
    pub base: Option<ModelKind>,
}

fn default_samples() -> usize {
    5
}

fn default_fit_tolerance() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub tolerance: f64,
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Tolerance for Laurent fits and coefficient comparisons.
    #[serde(default = "default_fit_tolerance")]
    pub fit_tolerance: f64,
    /// Test hook: scales the `S^+` numerators of `C(λ)` by 1.1 before checking.
    #[serde(default)]
    pub corrupt_representation: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: Option<Format>,
}

fn default_cap() -> usize {
    crate::spectra::DEFAULT_DIMENSION_CAP
}

fn default_keep_lowest() -> usize {
    5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default = "default_cap")]
    pub dimension_cap: usize,
    #[serde(default = "default_keep_lowest")]
    pub keep_lowest: usize,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        SpectrumConfig {
            dimension_cap: default_cap(),
            keep_lowest: default_keep_lowest(),
        }
    }
}

fn default_chunk_size() -> usize {
    16
}

/// Axes left out fall back to the single value in `params`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub alpha1: Option<Vec<Cx>>,
    pub alpha2: Option<Vec<Cx>>,
    pub beta1: Option<Vec<Cx>>,
    pub beta2: Option<Vec<Cx>>,
    pub rho: Option<Vec<Cx>>,
    pub gamma: Option<Vec<Cx>>,
    pub kappa: Option<Vec<Cx>>,
    #[serde(default)]
    pub hermitian: bool,
    #[serde(default = "default_chunk_size")]
    pub chunk_size: usize,
    /// Directory of per-chunk records; existing chunks are reused on rerun.
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub hilbert: HilbertConfig,
    #[serde(default)]
    pub params: ParamsConfig,
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    pub sweep: Option<SweepConfig>,
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    CheckFailed(String),
    DimensionCap(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::CheckFailed(_) => EXIT_CHECK_FAILED,
            CliError::DimensionCap(_) => EXIT_DIMENSION_CAP,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::CheckFailed(m) => write!(f, "check failed: {m}"),
            CliError::DimensionCap(m) => write!(f, "dimension cap: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::DimensionCap { .. } => CliError::DimensionCap(e.to_string()),
            Error::InvalidParameter {
                ref key,
                ref reason,
            } if !key.contains('.') => CliError::Config(format!("params.{key}: {reason}")),
            Error::InvalidParameter { .. }
            | Error::InvalidSpace(_)
            | Error::DuplicateEpsilon { .. }
            | Error::GuardExhausted { .. }
            | Error::SpaceMismatch
            | Error::Sampling(_) => CliError::Config(e.to_string()),
            Error::PoleCollision { .. }
            | Error::IllConditioned { .. }
            | Error::FitRejected { .. }
            | Error::NoConvergence { .. } => CliError::CheckFailed(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn config_err(key: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {reason}"))
}

/// A validated model ready to build operators.
#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Tc(TcParams),
    Gen {
        params: GenRepParams,
        kappa: Complex64,
    },
    Inhom {
        spec: InhomSpec,
        kappa: Complex64,
    },
}

fn need<T: Copy>(value: Option<T>, key: &str) -> CliResult<T> {
    value.ok_or_else(|| config_err(&format!("params.{key}"), "missing"))
}

fn tc_from(p: &ParamsConfig) -> CliResult<TcParams> {
    Ok(TcParams::new(
        need(p.omega, "omega")?,
        need(p.delta, "delta")?,
        need(p.g, "g")?,
    )?)
}

fn gen_from(p: &ParamsConfig) -> CliResult<GenRepParams> {
    let get = |v: Option<Cx>, key: &str| need(v, key).map(Complex64::from);
    Ok(GenRepParams::new(
        get(p.alpha1, "alpha1")?,
        get(p.alpha2, "alpha2")?,
        get(p.beta1, "beta1")?,
        get(p.beta2, "beta2")?,
        get(p.rho, "rho")?,
        get(p.gamma, "gamma")?,
    )?)
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<RunConfig> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(&path.display().to_string(), e))?;
        RunConfig::from_json(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        let v = &self.verify;
        if !(v.tolerance.is_finite() && v.tolerance > 0.0) {
            return Err(config_err("verify.tolerance", "must be positive"));
        }
        if !(v.fit_tolerance.is_finite() && v.fit_tolerance > 0.0) {
            return Err(config_err("verify.fit_tolerance", "must be positive"));
        }
        if v.samples == 0 {
            return Err(config_err("verify.samples", "must be at least 1"));
        }
        if self.hilbert.n_max < 4 {
            return Err(config_err("hilbert.n_max", "must be at least 4"));
        }
        self.space()?;
        self.model()?;
        if let Some(s) = &self.sweep {
            if s.chunk_size == 0 {
                return Err(config_err("sweep.chunk_size", "must be at least 1"));
            }
            self.sweep_grid()?.validate()?;
        }
        Ok(())
    }

    pub fn space(&self) -> CliResult<SpaceSpec> {
        SpaceSpec::from_magnitudes(self.hilbert.n_max, &self.hilbert.spins)
            .map_err(|e| config_err("hilbert.spins", e))
    }

    fn kappa(&self) -> Complex64 {
        self.params
            .kappa
            .map(Complex64::from)
            .unwrap_or(Complex64::new(1.0, 0.0))
    }

    pub fn model(&self) -> CliResult<Model> {
        let p = &self.params;
        match self.model {
            ModelKind::Tc => Ok(Model::Tc(tc_from(p)?)),
            ModelKind::Gen => Ok(Model::Gen {
                params: gen_from(p)?,
                kappa: self.kappa(),
            }),
            ModelKind::Inhom => {
                let base = match p.base {
                    Some(ModelKind::Tc) => InhomBase::Tc(tc_from(p)?),
                    Some(ModelKind::Gen) => InhomBase::Gen(gen_from(p)?),
                    Some(ModelKind::Inhom) => {
                        return Err(config_err("params.base", "must be `tc` or `gen`"))
                    }
                    None => return Err(config_err("params.base", "missing")),
                };
                let eps = p
                    .epsilons
                    .as_ref()
                    .ok_or_else(|| config_err("params.epsilons", "missing"))?;
                let eps: Vec<Complex64> = eps.iter().copied().map(Complex64::from).collect();
                if eps.len() != self.hilbert.spins.len() {
                    return Err(config_err(
                        "params.epsilons",
                        "one value per spin site is required",
                    ));
                }
                let spec =
                    InhomSpec::new(eps, base).map_err(|e| config_err("params.epsilons", e))?;
                Ok(Model::Inhom {
                    spec,
                    kappa: self.kappa(),
                })
            }
        }
    }

    pub fn sweep_grid(&self) -> CliResult<SweepGrid> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| config_err("sweep", "missing"))?;
        if self.model != ModelKind::Gen {
            return Err(config_err("model", "sweeps run over the `gen` model"));
        }
        let axis = |values: &Option<Vec<Cx>>,
                    fallback: Option<Cx>,
                    key: &str|
         -> CliResult<Vec<Complex64>> {
            match values {
                Some(v) => Ok(v.iter().copied().map(Complex64::from).collect()),
                None => Ok(vec![need(fallback, key)?.into()]),
            }
        };
        let p = &self.params;
        let tied = s.hermitian;
        Ok(SweepGrid {
            alpha1: axis(&s.alpha1, p.alpha1, "alpha1")?,
            alpha2: if tied {
                vec![]
            } else {
                axis(&s.alpha2, p.alpha2, "alpha2")?
            },
            beta1: axis(&s.beta1, p.beta1, "beta1")?,
            beta2: if tied {
                vec![]
            } else {
                axis(&s.beta2, p.beta2, "beta2")?
            },
            rho: axis(&s.rho, p.rho, "rho")?,
            gamma: axis(&s.gamma, p.gamma, "gamma")?,
            kappa: axis(&s.kappa, Some(self.kappa().into()), "kappa")?,
            hermitian: tied,
        })
    }
}

impl Model {
    pub fn family(&self, space: &SpaceSpec) -> crate::Result<LaxFamily> {
        match self {
            Model::Tc(p) => tc_representation(space, p),
            Model::Gen { params, .. } => gen_representation(space, params),
            Model::Inhom { spec, .. } => inhom_representation(space, spec),
        }
    }

    /// The physical Hamiltonian used for spectra.
    pub fn hamiltonian(&self, space: &SpaceSpec) -> crate::Result<QOp> {
        match self {
            Model::Tc(p) => Ok(tc_reference(space, p).h_tc),
            Model::Gen { params, kappa } => {
                let ch = closed_form_charges(space, params)?;
                physical_hamiltonian(&ch.h0, &ch.h1, *kappa)
            }
            Model::Inhom { spec, kappa } => Ok(inhom_closed_form(space, spec)?.physical(*kappa)),
        }
    }
}

/// Scales the `S^+` numerators of `C(λ)` by 1.1, which breaks the algebra.
fn corrupt(family: LaxFamily) -> crate::Result<LaxFamily> {
    let (a, b, mut c) = family.into_entries();
    for (_, op) in c.pole_terms_mut() {
        *op = op.scale(Complex64::new(1.1, 0.0));
    }
    LaxFamily::new(a, b, c)
}

/// One line of the verification report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub check: String,
    pub seed: u64,
    pub samples: usize,
    pub residual: f64,
    pub tolerance: f64,
    pub guard: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub model: ModelKind,
    pub n_max: usize,
    pub checks: Vec<CheckEntry>,
    pub pass: bool,
}

pub fn run_verify(cfg: &RunConfig) -> CliResult<VerifyReport> {
    let space = cfg.space()?;
    let mut family = cfg.model()?.family(&space)?;
    if cfg.verify.corrupt_representation {
        family = corrupt(family)?;
    }
    let tol = cfg.verify.tolerance;
    let mut sampler = Sampler::new(cfg.verify.seed);
    let poles = family.pole_locations();
    let mut buckets: [Vec<IdentityReport>; 4] = Default::default();
    for _ in 0..cfg.verify.samples {
        let (l1, l2, l3) = sampler.triple()?;
        buckets[0].push(check_cybe(l1, l2, l3, tol)?);
        let (l, m) = sampler.pair(&poles)?;
        buckets[1].push(check_fundamental_identity(&family, l, m, tol)?);
        buckets[2].push(check_gaudin_relations(&family, l, m, tol)?);
        buckets[3].push(check_generating_commutativity(&family, l, m, tol)?);
    }
    let checks: Vec<CheckEntry> = buckets
        .into_iter()
        .filter_map(IdentityReport::worst)
        .map(|r| CheckEntry {
            check: r.check,
            seed: cfg.verify.seed,
            samples: cfg.verify.samples,
            residual: r.residual,
            tolerance: r.tolerance,
            guard: r.guard,
            pass: r.pass,
        })
        .collect();
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        model: cfg.model,
        n_max: space.n_max(),
        checks,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub coefficient: String,
    pub residual: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermiticityEntry {
    pub operator: String,
    pub hermitian: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorTable {
    pub operators: Vec<String>,
    pub residuals: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargesReport {
    pub model: ModelKind,
    pub n_max: usize,
    pub tolerance: f64,
    pub fit_residual: f64,
    pub condition: f64,
    pub coefficients: Vec<CoefficientEntry>,
    pub hermitian: Vec<HermiticityEntry>,
    pub commutators: CommutatorTable,
    pub pass: bool,
}

/// `(name, fitted, closed form)` triples for each Laurent coefficient.
fn coefficient_pairs(
    model: &Model,
    space: &SpaceSpec,
    fit: &LaurentDecomp,
) -> crate::Result<Vec<(String, QOp, QOp)>> {
    let missing = |what: &str| Error::InvalidParameter {
        key: "fit".into(),
        reason: format!("no {what} coefficient"),
    };
    let poly = |k: usize| fit.poly(k).cloned().ok_or_else(|| missing("polynomial"));
    let pole =
        |at: Complex64, order: u32| fit.pole(at, order).cloned().ok_or_else(|| missing("pole"));
    let id = |z: Complex64| QOp::scalar(fit.poly[0].space(), z);
    let mut out = Vec::new();
    match model {
        Model::Tc(p) => {
            let r = tc_reference(space, p);
            let delta = Complex64::new(p.delta, 0.0);
            out.push(("lambda^2".into(), poly(2)?, id(r.lambda2)));
            out.push(("lambda^1".into(), poly(1)?, id(r.lambda1)));
            out.push(("lambda^0 (4/g^2)H_N+const".into(), poly(0)?, r.constant));
            out.push((
                "residue (2/g^2)(H_TC-omega*H_N)".into(),
                pole(delta, 1)?,
                r.residue,
            ));
            out.push(("double pole C2".into(), pole(delta, 2)?, r.c2));
        }
        Model::Gen { params, .. } => {
            let ch = closed_form_charges(space, params)?;
            let zero = Complex64::default();
            out.push(("lambda^2".into(), poly(2)?, id(ch.lambda2)));
            out.push(("lambda^1".into(), poly(1)?, id(ch.lambda1)));
            out.push(("lambda^0 H0".into(), poly(0)?, ch.h0));
            out.push(("residue H1".into(), pole(zero, 1)?, ch.h1));
            out.push(("double pole C2".into(), pole(zero, 2)?, ch.c2));
        }
        Model::Inhom { spec, .. } => {
            let ch = inhom_closed_form(space, spec)?;
            out.push(("lambda^2".into(), poly(2)?, id(ch.lambda2)));
            out.push(("lambda^1".into(), poly(1)?, id(ch.lambda1)));
            out.push(("lambda^0 H0".into(), poly(0)?, ch.h0));
            for (j, eps) in spec.epsilons.iter().enumerate() {
                out.push((
                    format!("residue R_{j}"),
                    pole(*eps, 1)?,
                    ch.residues[j].clone(),
                ));
                out.push((
                    format!("double pole C2_{j}"),
                    pole(*eps, 2)?,
                    ch.casimirs[j].clone(),
                ));
            }
        }
    }
    Ok(out)
}

/// Named closed-form charges whose mutual commutators are reported.
fn charge_family(model: &Model, space: &SpaceSpec) -> crate::Result<Vec<(String, QOp)>> {
    Ok(match model {
        Model::Tc(p) => {
            let r = tc_reference(space, p);
            vec![
                ("H_N".into(), r.h_n),
                ("H_TC".into(), r.h_tc),
                ("C2".into(), r.c2),
            ]
        }
        Model::Gen { params, .. } => {
            let ch = closed_form_charges(space, params)?;
            vec![
                ("H0".into(), ch.h0),
                ("H1".into(), ch.h1),
                ("C2".into(), ch.c2),
            ]
        }
        Model::Inhom { spec, .. } => {
            let ch = inhom_closed_form(space, spec)?;
            let mut v = vec![("H0".to_string(), ch.h0)];
            v.extend(
                ch.residues
                    .into_iter()
                    .enumerate()
                    .map(|(j, r)| (format!("R_{j}"), r)),
            );
            v.extend(
                ch.casimirs
                    .into_iter()
                    .enumerate()
                    .map(|(j, c)| (format!("C2_{j}"), c)),
            );
            v
        }
    })
}

pub fn run_charges(cfg: &RunConfig) -> CliResult<ChargesReport> {
    let space = cfg.space()?;
    let model = cfg.model()?;
    let tol = cfg.verify.fit_tolerance;
    let family = model.family(&space)?;
    let fit = laurent_fit(&family, tol)?;

    let coefficients: Vec<CoefficientEntry> = coefficient_pairs(&model, &space, &fit)?
        .into_iter()
        .map(|(name, fitted, closed)| {
            let cmp = guarded_equal(&fitted, &closed, tol)?;
            Ok(CoefficientEntry {
                coefficient: name,
                residual: cmp.residual,
                pass: cmp.pass,
            })
        })
        .collect::<crate::Result<_>>()?;

    let charges = charge_family(&model, &space)?;
    let herm_tol = cfg.verify.tolerance;
    let mut hermitian = charges
        .iter()
        .map(|(name, op)| {
            Ok(HermiticityEntry {
                operator: name.clone(),
                hermitian: is_hermitian(op, herm_tol)?,
            })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    hermitian.push(HermiticityEntry {
        operator: "H_phys".into(),
        hermitian: is_hermitian(&model.hamiltonian(&space)?, herm_tol)?,
    });

    let n = charges.len();
    let mut residuals = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let (r, _) = pair_commutator_residual(&charges[i].1, &charges[j].1)?;
            residuals[i][j] = r;
            residuals[j][i] = r;
        }
    }
    let commutators = CommutatorTable {
        operators: charges.into_iter().map(|(name, _)| name).collect(),
        residuals,
    };
    let pass = coefficients.iter().all(|c| c.pass);
    Ok(ChargesReport {
        model: cfg.model,
        n_max: space.n_max(),
        tolerance: tol,
        fit_residual: fit.fit_residual,
        condition: fit.condition,
        coefficients,
        hermitian,
        commutators,
        pass,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub dimension: usize,
    pub max_imag: f64,
    pub spectral_radius: f64,
    pub eigenvalues: Vec<Cx>,
}

pub fn run_spectrum(cfg: &RunConfig) -> CliResult<SpectrumReport> {
    let space = cfg.space()?;
    let h = cfg.model()?.hamiltonian(&space)?;
    let spec = eigenvalues_with_cap(&h, cfg.spectrum.dimension_cap)?;
    Ok(SpectrumReport {
        dimension: spec.dimension,
        max_imag: spec.max_imag,
        spectral_radius: spec.spectral_radius,
        eigenvalues: spec.eigenvalues.into_iter().map(Cx::from).collect(),
    })
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
            config_err(
                THREADS_ENV,
                format!("expected a positive integer, got `{raw}`"),
            )
        })?;
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| config_err(THREADS_ENV, e))
}

/// Runs the configured sweep chunk by chunk, reusing chunks already present
/// in the checkpoint directory.
pub fn run_sweep(cfg: &RunConfig) -> CliResult<Vec<SweepRecord>> {
    let grid = cfg.sweep_grid()?;
    grid.validate()?;
    let sweep = cfg.sweep.as_ref().expect("validated by sweep_grid");
    let settings = SweepSettings {
        space: cfg.space()?,
        dimension_cap: cfg.spectrum.dimension_cap,
        keep_lowest: cfg.spectrum.keep_lowest,
        hermitian_tol: cfg.verify.tolerance,
    };
    if let Some(dir) = &sweep.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| config_err("sweep.checkpoint_dir", e))?;
    }
    let pool = thread_pool()?;
    let total = grid.len();
    let mut records = Vec::with_capacity(total);
    for (chunk, start) in (0..total).step_by(sweep.chunk_size).enumerate() {
        let end = (start + sweep.chunk_size).min(total);
        let path = sweep
            .checkpoint_dir
            .as_ref()
            .map(|d| d.join(format!("chunk-{chunk:06}.json")));
        if let Some(existing) = path.as_deref().and_then(load_chunk) {
            if existing.len() == end - start
                && existing
                    .iter()
                    .zip(start..end)
                    .all(|(r, i)| r.point.grid_index == i)
            {
                records.extend(existing);
                continue;
            }
        }
        let fresh = pool.install(|| sweep_range(&grid, &settings, start, end))?;
        if let Some(path) = &path {
            let body = serde_json::to_vec(&fresh).map_err(|e| config_err("sweep", e))?;
            write_atomic(path, &body)?;
        }
        records.extend(fresh);
    }
    Ok(records)
}

fn load_chunk(path: &Path) -> Option<Vec<SweepRecord>> {
    let bytes = std::fs::read(path).ok()?;
    serde_json::from_slice(&bytes).ok()
}

fn f(x: f64) -> String {
    format!("{x}")
}

pub fn verify_csv(report: &VerifyReport) -> String {
    let mut s = String::from("check,seed,samples,residual,tolerance,guard,pass\n");
    for c in &report.checks {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            c.check,
            c.seed,
            c.samples,
            f(c.residual),
            f(c.tolerance),
            c.guard,
            c.pass
        );
    }
    s
}

pub fn charges_csv(report: &ChargesReport) -> String {
    let mut s = String::from("coefficient,residual,pass\n");
    for c in &report.coefficients {
        let _ = writeln!(s, "{},{},{}", c.coefficient, f(c.residual), c.pass);
    }
    s
}

pub fn spectrum_csv(report: &SpectrumReport) -> String {
    let mut s = String::from("index,re,im\n");
    for (i, z) in report.eigenvalues.iter().enumerate() {
        let _ = writeln!(s, "{i},{},{}", f(z.0[0]), f(z.0[1]));
    }
    s
}

pub const SWEEP_PARAM_COLUMNS: [&str; 14] = [
    "alpha1_re",
    "alpha1_im",
    "alpha2_re",
    "alpha2_im",
    "beta1_re",
    "beta1_im",
    "beta2_re",
    "beta2_im",
    "rho_re",
    "rho_im",
    "gamma_re",
    "gamma_im",
    "kappa_re",
    "kappa_im",
];

pub fn sweep_csv(records: &[SweepRecord]) -> String {
    let mut s = format!(
        "grid_index,{},max_imag,is_hermitian\n",
        SWEEP_PARAM_COLUMNS.join(",")
    );
    for r in records {
        let p = &r.point.params;
        let values = [
            p.alpha1,
            p.alpha2,
            p.beta1,
            p.beta2,
            p.rho,
            p.gamma,
            r.point.kappa,
        ];
        let cols: Vec<String> = values.iter().flat_map(|z| [f(z.re), f(z.im)]).collect();
        let max_imag = r.max_imag.map(f).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.point.grid_index,
            cols.join(","),
            max_imag,
            r.is_hermitian
        );
    }
    s
}

/// Writes via a temporary file in the target directory and an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let io = |e: std::io::Error| config_err(&path.display().to_string(), e);
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn emit(cfg: &RunConfig, args: &CommandArgs, body: &str) -> CliResult<()> {
    match args.out.as_ref().or(cfg.output.path.as_ref()) {
        Some(path) => write_atomic(path, body.as_bytes()),
        None => {
            std::io::stdout()
                .write_all(body.as_bytes())
                .map_err(|e| config_err("stdout", e))?;
            Ok(())
        }
    }
}

fn format_for(cfg: &RunConfig, args: &CommandArgs, default: Format) -> Format {
    args.format.or(cfg.output.format).unwrap_or(default)
}

/// Executes one command and returns its exit code.
pub fn execute(cli: &Cli) -> CliResult<i32> {
    let (args, default_format) = match &cli.command {
        Command::Verify(a) | Command::Charges(a) => (a, Format::Json),
        Command::Spectrum(a) | Command::Sweep(a) => (a, Format::Csv),
    };
    let cfg = RunConfig::load(&args.config)?;
    let format = format_for(&cfg, args, default_format);
    match &cli.command {
        Command::Verify(_) => {
            let report = run_verify(&cfg)?;
            let body = match format {
                Format::Json => json(&report)?,
                Format::Csv => verify_csv(&report),
            };
            emit(&cfg, args, &body)?;
            Ok(if report.pass {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            })
        }
        Command::Charges(_) => {
            let report = run_charges(&cfg)?;
            let body = match format {
                Format::Json => json(&report)?,
                Format::Csv => charges_csv(&report),
            };
            emit(&cfg, args, &body)?;
            Ok(if report.pass {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            })
        }
        Command::Spectrum(_) => {
            let report = run_spectrum(&cfg)?;
            let body = match format {
                Format::Json => json(&report)?,
                Format::Csv => spectrum_csv(&report),
            };
            emit(&cfg, args, &body)?;
            Ok(EXIT_OK)
        }
        Command::Sweep(_) => {
            let records = run_sweep(&cfg)?;
            let body = match format {
                Format::Json => json(&records)?,
                Format::Csv => sweep_csv(&records),
            };
            emit(&cfg, args, &body)?;
            if cfg.space()?.dim() > cfg.spectrum.dimension_cap {
                Ok(EXIT_DIMENSION_CAP)
            } else if records.iter().any(|r| r.error.is_some()) {
                Ok(EXIT_CHECK_FAILED)
            } else {
                Ok(EXIT_OK)
            }
        }
    }
}

/// Parses arguments, runs the command and reports errors on stderr.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("gaudin-forge: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GEN: &str = r#"{
      "model": "gen",
      "hilbert": {"n_max": 6, "spins": [0.5]},
      "params": {"alpha1": [1.0, 0.0], "alpha2": [1.0, 0.0], "beta1": [0.1, 0.0], "beta2": [0.1, 0.0],
                 "rho": [0.2, 0.0], "gamma": [1.0, 0.0]},
      "verify": {"tolerance": 1e-10, "seed": 1}
    }"#;

    #[test]
    fn parses_and_defaults() {
        let cfg = RunConfig::from_json(GEN).unwrap();
        assert_eq!(cfg.verify.samples, 5);
        assert_eq!(cfg.spectrum.dimension_cap, 4096);
        assert!(
            matches!(cfg.model().unwrap(), Model::Gen { kappa, .. } if kappa == Complex64::new(1.0, 0.0))
        );
    }

    #[test]
    fn gamma_zero_names_the_key() {
        let text = GEN.replace(r#""gamma": [1.0, 0.0]"#, r#""gamma": [0.0, 0.0]"#);
        let err = RunConfig::from_json(&text).unwrap_err();
        assert_eq!(err.exit_code(), EXIT_CONFIG);
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn seed_is_mandatory() {
        let text = GEN.replace(r#", "seed": 1"#, "");
        assert!(RunConfig::from_json(&text)
            .unwrap_err()
            .to_string()
            .contains("seed"));
    }

    #[test]
    fn non_positive_tolerance_is_rejected() {
        let text = GEN.replace("1e-10", "0.0");
        assert!(RunConfig::from_json(&text)
            .unwrap_err()
            .to_string()
            .contains("verify.tolerance"));
    }

    #[test]
    fn inhom_needs_matching_epsilons() {
        let text = r#"{
          "model": "inhom",
          "hilbert": {"n_max": 6, "spins": [0.5, 0.5]},
          "params": {"omega": 1.0, "delta": 0.0, "g": 1.0, "base": "tc", "epsilons": [[0.4, 0.0]]},
          "verify": {"tolerance": 1e-10, "seed": 1}
        }"#;
        assert!(RunConfig::from_json(text)
            .unwrap_err()
            .to_string()
            .contains("epsilons"));
    }

    #[test]
    fn sweep_csv_header_is_stable() {
        let csv = sweep_csv(&[]);
        assert_eq!(
            csv,
            "grid_index,alpha1_re,alpha1_im,alpha2_re,alpha2_im,beta1_re,beta1_im,beta2_re,beta2_im,rho_re,rho_im,gamma_re,gamma_im,kappa_re,kappa_im,max_imag,is_hermitian\n"
        );
    }
}
