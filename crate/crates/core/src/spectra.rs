//! Spectra of (generally non-Hermitian) physical Hamiltonians.

use std::cmp::Ordering;

use nalgebra::{DMatrix, Dyn};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{QOp, SpaceSpec};
use crate::laxkit::IdentityReport;
use crate::repzoo::{closed_form_charges, is_hermitian, physical_hamiltonian, GenRepParams};

pub const DEFAULT_DIMENSION_CAP: usize = 4096;

/// Tracked eigenvalues count as converged when they move less than this
/// between successive cutoffs.
pub const DRIFT_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Sorted by real part, then imaginary part.
    pub eigenvalues: Vec<Complex64>,
    pub dimension: usize,
    pub max_imag: f64,
    pub spectral_radius: f64,
}

fn cmp_complex(a: &Complex64, b: &Complex64) -> Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

pub fn sort_spectrum(values: &mut [Complex64]) {
    values.sort_by(cmp_complex);
}

/// Full spectrum with the default dimension cap.
pub fn eigenvalues(h: &QOp) -> Result<SpectrumResult> {
    eigenvalues_with_cap(h, DEFAULT_DIMENSION_CAP)
}

pub fn eigenvalues_with_cap(h: &QOp, cap: usize) -> Result<SpectrumResult> {
    let dim = h.dim();
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    let mut values = complex_eigenvalues(h.matrix())?;
    sort_spectrum(&mut values);
    let max_imag = values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let spectral_radius = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    Ok(SpectrumResult {
        eigenvalues: values,
        dimension: dim,
        max_imag,
        spectral_radius,
    })
}

/// Eigenvalues of a general complex matrix from its complex Schur form.
pub fn complex_eigenvalues(m: &DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let dim = m.nrows();
    if dim == 0 {
        return Ok(Vec::new());
    }
    let max_iter = 200 * dim + 1000;
    let schur =
        nalgebra::linalg::Schur::<Complex64, Dyn>::try_new(m.clone(), f64::EPSILON, max_iter)
            .ok_or(Error::NoConvergence { dim })?;
    let (_, t) = schur.unpack();
    let values: Vec<Complex64> = (0..dim).map(|i| t[(i, i)]).collect();
    if values
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::NoConvergence { dim });
    }
    Ok(values)
}

/// The `k` eigenvalues closest to the imaginary axis, in spectrum order.
pub fn lowest_by_abs_re(spectrum: &[Complex64], k: usize) -> Vec<Complex64> {
    let mut picked: Vec<Complex64> = spectrum.to_vec();
    picked.sort_by(|a, b| a.re.abs().total_cmp(&b.re.abs()).then(cmp_complex(a, b)));
    picked.truncate(k);
    sort_spectrum(&mut picked);
    picked
}

/// Greedy nearest-match of `tracked` into `candidates`: the globally closest
/// unmatched pair is fixed first, ties broken by the candidate's real part.
pub fn track(tracked: &[Complex64], candidates: &[Complex64]) -> Vec<Complex64> {
    let mut pairs: Vec<(f64, f64, usize, usize)> =
        Vec::with_capacity(tracked.len() * candidates.len());
    for (i, t) in tracked.iter().enumerate() {
        for (j, c) in candidates.iter().enumerate() {
            pairs.push(((t - c).norm(), c.re, i, j));
        }
    }
    pairs.sort_by(|x, y| {
        x.0.total_cmp(&y.0)
            .then(x.1.total_cmp(&y.1))
            .then(x.2.cmp(&y.2))
            .then(x.3.cmp(&y.3))
    });
    let mut assigned: Vec<Option<Complex64>> = vec![None; tracked.len()];
    let mut used = vec![false; candidates.len()];
    let mut remaining = tracked.len().min(candidates.len());
    for (_, _, i, j) in pairs {
        if remaining == 0 {
            break;
        }
        if assigned[i].is_none() && !used[j] {
            assigned[i] = Some(candidates[j]);
            used[j] = true;
            remaining -= 1;
        }
    }
    assigned
        .into_iter()
        .map(|v| v.unwrap_or(Complex64::new(f64::NAN, f64::NAN)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub n_max: usize,
    pub tracked: Vec<Complex64>,
    /// Per-eigenvalue movement since the previous cutoff (empty for the first row).
    pub drifts: Vec<f64>,
    pub converged: Vec<bool>,
}

impl ScanRow {
    pub fn max_drift(&self) -> Option<f64> {
        if self.drifts.is_empty() {
            None
        } else {
            Some(self.drifts.iter().copied().fold(0.0, f64::max))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceScan {
    pub k: usize,
    pub rows: Vec<ScanRow>,
}

impl ConvergenceScan {
    /// Converged when every tracked value of the last row moved ≤ [`DRIFT_TOLERANCE`].
    pub fn converged(&self) -> bool {
        self.rows
            .last()
            .is_some_and(|r| !r.converged.is_empty() && r.converged.iter().all(|&c| c))
    }
}

/// Tracks the `k` lowest-`|Re|` eigenvalues of the first cutoff through the
/// remaining cutoffs of an ascending list.
pub fn convergence_scan<F>(
    build: F,
    n_max_list: &[usize],
    k: usize,
    cap: usize,
) -> Result<ConvergenceScan>
where
    F: Fn(usize) -> Result<QOp> + Sync,
{
    if n_max_list.len() < 2 {
        return Err(Error::InvalidParameter {
            key: "n_max_list".into(),
            reason: "at least two cutoffs are needed to measure drift".into(),
        });
    }
    if n_max_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter {
            key: "n_max_list".into(),
            reason: "cutoffs must be strictly ascending".into(),
        });
    }
    let spectra = n_max_list
        .par_iter()
        .map(|&n| eigenvalues_with_cap(&build(n)?, cap))
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(n_max_list.len());
    let mut tracked = lowest_by_abs_re(&spectra[0].eigenvalues, k);
    rows.push(ScanRow {
        n_max: n_max_list[0],
        tracked: tracked.clone(),
        drifts: vec![],
        converged: vec![],
    });
    for (spec, &n_max) in spectra.iter().zip(n_max_list).skip(1) {
        let next = track(&tracked, &spec.eigenvalues);
        let drifts: Vec<f64> = tracked
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).norm())
            .collect();
        let converged = drifts.iter().map(|&d| d <= DRIFT_TOLERANCE).collect();
        rows.push(ScanRow {
            n_max,
            tracked: next.clone(),
            drifts,
            converged,
        });
        tracked = next;
    }
    Ok(ConvergenceScan { k, rows })
}

/// Worst pairwise guarded commutator residual of a family of operators.
pub fn commuting_family_report(ops: &[QOp], tol: f64) -> Result<IdentityReport> {
    if ops.len() < 2 {
        return Err(Error::InvalidParameter {
            key: "ops".into(),
            reason: "at least two operators are needed".into(),
        });
    }
    if ops.iter().any(|op| !op.same_space(&ops[0])) {
        return Err(Error::SpaceMismatch);
    }
    let mut residual = 0.0f64;
    let mut guard = 0;
    for i in 0..ops.len() {
        for j in i + 1..ops.len() {
            let (r, g) = pair_commutator_residual(&ops[i], &ops[j])?;
            residual = residual.max(r);
            guard = guard.max(g);
        }
    }
    Ok(IdentityReport::new(
        "commuting_family",
        vec![],
        residual,
        tol,
        guard,
    ))
}

/// Guarded `‖[X, Y]‖ / max(1, ‖XY‖, ‖YX‖)` together with the guard used.
pub fn pair_commutator_residual(x: &QOp, y: &QOp) -> Result<(f64, usize)> {
    let forward = x.try_mul(y)?;
    let backward = y.try_mul(x)?;
    let guard = forward.degree();
    let scale = 1.0f64
        .max(forward.guarded_max_abs(guard)?)
        .max(backward.guarded_max_abs(guard)?);
    Ok((
        (&forward - &backward).guarded_max_abs(guard)? / scale,
        guard,
    ))
}

/// A complex parameter axis of a sweep grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub alpha1: Vec<Complex64>,
    pub alpha2: Vec<Complex64>,
    pub beta1: Vec<Complex64>,
    pub beta2: Vec<Complex64>,
    pub rho: Vec<Complex64>,
    pub gamma: Vec<Complex64>,
    pub kappa: Vec<Complex64>,
    /// When set, `alpha2`/`beta2` are tied to `conj(alpha1)`/`conj(beta1)`
    /// and their own axes are ignored.
    #[serde(default)]
    pub hermitian: bool,
}

/// One grid point: generalized parameters and the coupling `κ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub grid_index: usize,
    pub params: GenRepParams,
    pub kappa: Complex64,
}

impl SweepGrid {
    fn axes(&self) -> [(&'static str, &[Complex64]); 7] {
        const TIED: &[Complex64] = &[Complex64::new(0.0, 0.0)];
        [
            ("alpha1", &self.alpha1),
            ("alpha2", if self.hermitian { TIED } else { &self.alpha2 }),
            ("beta1", &self.beta1),
            ("beta2", if self.hermitian { TIED } else { &self.beta2 }),
            ("rho", &self.rho),
            ("gamma", &self.gamma),
            ("kappa", &self.kappa),
        ]
    }

    /// Rejects empty axes, non-finite values and `γ = 0` before any work starts.
    pub fn validate(&self) -> Result<()> {
        for (key, axis) in self.axes() {
            if axis.is_empty() {
                return Err(Error::InvalidParameter {
                    key: format!("sweep.{key}"),
                    reason: "empty axis".into(),
                });
            }
            if axis.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidParameter {
                    key: format!("sweep.{key}"),
                    reason: "must be finite".into(),
                });
            }
        }
        if self.gamma.iter().any(|g| g.norm() == 0.0) {
            return Err(Error::InvalidParameter {
                key: "sweep.gamma".into(),
                reason: "must be non-zero".into(),
            });
        }
        if self.hermitian {
            if let Some(r) = self.rho.iter().chain(&self.kappa).find(|z| z.im != 0.0) {
                return Err(Error::InvalidParameter {
                    key: "sweep.hermitian".into(),
                    reason: format!("rho and kappa must be real on the Hermitian family (got {r})"),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.axes().iter().map(|(_, a)| a.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid point by index; the last axis (`kappa`) varies fastest.
    pub fn point(&self, grid_index: usize) -> Result<SweepPoint> {
        let axes = self.axes();
        let mut picks = [Complex64::new(0.0, 0.0); 7];
        let mut rest = grid_index;
        for (slot, (_, axis)) in picks.iter_mut().zip(axes.iter()).rev() {
            *slot = axis[rest % axis.len()];
            rest /= axis.len();
        }
        let [alpha1, mut alpha2, beta1, mut beta2, rho, gamma, kappa] = picks;
        if self.hermitian {
            alpha2 = alpha1.conj();
            beta2 = beta1.conj();
        }
        let params = GenRepParams::new(alpha1, alpha2, beta1, beta2, rho, gamma)?;
        Ok(SweepPoint {
            grid_index,
            params,
            kappa,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub point: SweepPoint,
    /// `None` when the point could not be diagonalized.
    pub max_imag: Option<f64>,
    pub is_hermitian: bool,
    pub lowest: Vec<Complex64>,
    /// Set when the point could not be diagonalized (for example a dimension cap).
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct SweepSettings {
    pub space: SpaceSpec,
    pub dimension_cap: usize,
    /// Number of lowest (by real part) eigenvalues kept per record.
    pub keep_lowest: usize,
    pub hermitian_tol: f64,
}

/// Computes one grid point. Spectral failures are recorded, not returned.
pub fn sweep_point(point: &SweepPoint, settings: &SweepSettings) -> Result<SweepRecord> {
    let charges = closed_form_charges(&settings.space, &point.params)?;
    let h = physical_hamiltonian(&charges.h0, &charges.h1, point.kappa)?;
    let herm = is_hermitian(&h, settings.hermitian_tol)?;
    Ok(match eigenvalues_with_cap(&h, settings.dimension_cap) {
        Ok(spec) => SweepRecord {
            point: *point,
            max_imag: Some(spec.max_imag),
            is_hermitian: herm,
            lowest: spec
                .eigenvalues
                .iter()
                .take(settings.keep_lowest)
                .copied()
                .collect(),
            error: None,
        },
        Err(e @ (Error::DimensionCap { .. } | Error::NoConvergence { .. })) => SweepRecord {
            point: *point,
            max_imag: None,
            is_hermitian: herm,
            lowest: vec![],
            error: Some(e.to_string()),
        },
        Err(e) => return Err(e),
    })
}

/// Records for grid indices `[start, end)`, in index order regardless of the
/// number of worker threads.
pub fn sweep_range(
    grid: &SweepGrid,
    settings: &SweepSettings,
    start: usize,
    end: usize,
) -> Result<Vec<SweepRecord>> {
    grid.validate()?;
    let end = end.min(grid.len());
    (start..end)
        .into_par_iter()
        .map(|i| sweep_point(&grid.point(i)?, settings))
        .collect()
}

/// Whole-grid sweep.
pub fn parameter_sweep(grid: &SweepGrid, settings: &SweepSettings) -> Result<Vec<SweepRecord>> {
    sweep_range(grid, settings, 0, grid.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{make_operators, Spin};

    fn cx(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn diagonal_matrix_eigenvalues() {
        let space = SpaceSpec::new(5, vec![Spin::HALF]);
        let ops = make_operators(&space);
        let h = ops.number() * 0.7 + &ops.sz * 0.3;
        let spec = eigenvalues(&h).unwrap();
        let mut diag: Vec<Complex64> = (0..h.dim()).map(|i| h.matrix()[(i, i)]).collect();
        sort_spectrum(&mut diag);
        for (a, b) in spec.eigenvalues.iter().zip(&diag) {
            assert!((a - b).norm() < 1e-12);
        }
        assert_eq!(spec.dimension, 12);
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let ops = make_operators(&SpaceSpec::new(9, vec![Spin::HALF]));
        assert_eq!(
            eigenvalues_with_cap(&ops.sz, 10).unwrap_err(),
            Error::DimensionCap { dim: 20, cap: 10 }
        );
    }

    #[test]
    fn nonnormal_block_has_complex_pair() {
        // [[0, 1], [-1, 0]] has eigenvalues ±i.
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[cx(0.0, 0.0), cx(1.0, 0.0), cx(-1.0, 0.0), cx(0.0, 0.0)],
        );
        let mut v = complex_eigenvalues(&m).unwrap();
        sort_spectrum(&mut v);
        assert!((v[0] - cx(0.0, -1.0)).norm() < 1e-14);
        assert!((v[1] - cx(0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn tracking_prefers_nearest() {
        let tracked = [cx(0.0, 0.0), cx(1.0, 0.0)];
        let candidates = [cx(1.1, 0.0), cx(0.05, 0.0), cx(5.0, 0.0)];
        assert_eq!(
            track(&tracked, &candidates),
            vec![cx(0.05, 0.0), cx(1.1, 0.0)]
        );
    }

    #[test]
    fn scan_needs_two_cutoffs() {
        let build = |n: usize| Ok(make_operators(&SpaceSpec::new(n, vec![Spin::HALF])).sz);
        assert!(matches!(
            convergence_scan(build, &[6], 3, 100),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            convergence_scan(build, &[8, 6], 3, 100),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn commuting_family_examples() {
        let ops = make_operators(&SpaceSpec::new(8, vec![Spin::HALF]));
        let r = commuting_family_report(&[ops.number(), ops.a.clone()], 1e-10).unwrap();
        assert!(!r.pass);
        let r = commuting_family_report(&[ops.number(), ops.sz.clone()], 1e-10).unwrap();
        assert!(r.pass);
        assert!(commuting_family_report(std::slice::from_ref(&ops.sz), 1e-10).is_err());
    }

    fn unit_grid() -> SweepGrid {
        SweepGrid {
            alpha1: vec![cx(1.0, 0.0)],
            alpha2: vec![cx(1.0, 0.0)],
            beta1: vec![cx(0.1, 0.0)],
            beta2: vec![cx(0.1, 0.0)],
            rho: vec![cx(0.2, 0.0)],
            gamma: vec![cx(1.0, 0.0)],
            kappa: vec![cx(1.0, 0.0)],
            hermitian: false,
        }
    }

    #[test]
    fn single_point_grid_gives_one_record() {
        let settings = SweepSettings {
            space: SpaceSpec::new(6, vec![Spin::HALF]),
            dimension_cap: 4096,
            keep_lowest: 3,
            hermitian_tol: 1e-12,
        };
        let records = parameter_sweep(&unit_grid(), &settings).unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].lowest.len(), 3);
    }

    #[test]
    fn gamma_zero_grid_is_rejected() {
        let mut grid = unit_grid();
        grid.gamma.push(cx(0.0, 0.0));
        assert!(
            matches!(grid.validate(), Err(Error::InvalidParameter { ref key, .. }) if key == "sweep.gamma")
        );
    }

    #[test]
    fn grid_indexing_is_row_major_with_kappa_fastest() {
        let mut grid = unit_grid();
        grid.rho = vec![cx(0.0, 0.0), cx(1.0, 0.0)];
        grid.kappa = vec![cx(0.5, 0.0), cx(2.0, 0.0), cx(3.0, 0.0)];
        assert_eq!(grid.len(), 6);
        let p = grid.point(4).unwrap();
        assert_eq!(p.params.rho, cx(1.0, 0.0));
        assert_eq!(p.kappa, cx(2.0, 0.0));
    }

    #[test]
    fn capped_points_are_recorded() {
        let settings = SweepSettings {
            space: SpaceSpec::new(6, vec![Spin::HALF]),
            dimension_cap: 4,
            keep_lowest: 3,
            hermitian_tol: 1e-12,
        };
        let records = parameter_sweep(&unit_grid(), &settings).unwrap();
        assert!(records[0].error.as_deref().unwrap().contains("exceeds"));
    }
}
