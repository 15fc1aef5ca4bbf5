//! Sample covariance, noise subspace, and polynomial Root-MUSIC.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::poly::{self, RootMethod};
use crate::{Error, Result, C64};

/// Radius slack when deciding whether a root lies inside the unit circle.
pub const UNIT_CIRCLE_SLACK: f64 = 1e-9;

/// Roots closer than this are treated as one rounding-split double root.
const DOUBLE_ROOT_GAP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<C64>,
    pub snapshots: usize,
}

#[derive(Debug, Clone)]
pub struct NoiseSubspace {
    /// `N × (N − sources)`, orthonormal columns.
    pub basis: DMatrix<C64>,
    /// `N × sources`, the complementary dominant eigenvectors.
    pub signal: DMatrix<C64>,
    /// All eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub sources: usize,
}

impl NoiseSubspace {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Projector `Q = U_N U_Nᴴ`, formed as `I − U_S U_Sᴴ`.
    pub fn projector(&self) -> DMatrix<C64> {
        let n = self.dim();
        DMatrix::identity(n, n) - &self.signal * self.signal.adjoint()
    }
}

#[derive(Debug, Clone)]
pub struct RootMusicResult {
    /// `arg(z_selected)` in `(−π, π]`.
    pub phase: f64,
    pub selected: C64,
    pub roots: Vec<C64>,
}

/// `(1/L)·Y·Yᴴ`, Hermitian-symmetrized.
pub fn sample_covariance(y: &DMatrix<C64>) -> Result<CovarianceEstimate> {
    let snapshots = y.ncols();
    if snapshots == 0 || y.nrows() == 0 {
        return Err(Error::EmptyInput("covariance needs at least one snapshot"));
    }
    let mut r = y * y.adjoint() / C64::new(snapshots as f64, 0.0);
    hermitize(&mut r);
    Ok(CovarianceEstimate { matrix: r, snapshots })
}

pub(crate) fn hermitize(r: &mut DMatrix<C64>) {
    let n = r.nrows();
    for i in 0..n {
        r[(i, i)].im = 0.0;
        for j in i + 1..n {
            let v = (r[(i, j)] + r[(j, i)].conj()) * 0.5;
            r[(i, j)] = v;
            r[(j, i)] = v.conj();
        }
    }
}

/// Largest `|R − Rᴴ|` entry.
pub fn hermitian_defect(r: &DMatrix<C64>) -> f64 {
    let n = r.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((r[(i, j)] - r[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigenvectors belonging to the `N − sources` smallest eigenvalues.
///
/// Eigenvalues are sorted descending with a stable sort, so equal eigenvalues keep
/// the solver's order.
pub fn noise_subspace(r: &DMatrix<C64>, sources: usize) -> Result<NoiseSubspace> {
    let n = r.nrows();
    if r.ncols() != n {
        return Err(Error::Precondition("covariance must be square".into()));
    }
    if n <= sources {
        return Err(Error::Precondition(format!(
            "need more sensors ({n}) than sources ({sources})"
        )));
    }
    let scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let defect = hermitian_defect(r);
    if defect > 1e-9 * scale {
        return Err(Error::NotHermitian(defect));
    }
    let mut sym = r.clone();
    hermitize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let basis = DMatrix::from_fn(n, n - sources, |i, j| eig.eigenvectors[(i, order[sources + j])]);
    let signal = DMatrix::from_fn(n, sources, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(NoiseSubspace {
        basis,
        signal,
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        sources,
    })
}

/// Coefficients (ascending) of `z^{N−1}·Σ_{i,j} z^{−i} Q_ij z^{j}`.
///
/// The coefficient of `z^k` is the sum of the `(k − N + 1)`-th diagonal of `Q`.
pub fn music_polynomial(q: &DMatrix<C64>) -> Vec<C64> {
    let n = q.nrows();
    let mut c = vec![C64::new(0.0, 0.0); 2 * n - 1];
    for i in 0..n {
        for j in 0..n {
            c[j + n - 1 - i] += q[(i, j)];
        }
    }
    c
}

/// Root-MUSIC on a single-source noise subspace: returns the electrical phase
/// of the root nearest the unit circle from inside.
pub fn root_music(subspace: &NoiseSubspace) -> Result<RootMusicResult> {
    let n = subspace.dim();
    if n < 2 {
        return Err(Error::Precondition("Root-MUSIC needs at least 2 sensors".into()));
    }
    let coeffs = music_polynomial(&subspace.projector());
    debug_assert!(
        {
            let d = coeffs.len() - 1;
            let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
            (0..=d).all(|k| (coeffs[k] - coeffs[d - k].conj()).norm() <= 1e-10 * scale.max(1.0))
        },
        "Root-MUSIC polynomial is not self-reciprocal"
    );
    let roots = poly::roots(&coeffs, RootMethod::Auto)?;
    if roots.iter().all(|z| z.norm() == 0.0) {
        return Err(Error::Degenerate("all Root-MUSIC roots are at the origin".into()));
    }
    let selected = select_root(&roots)
        .ok_or_else(|| Error::Degenerate("no Root-MUSIC root inside the unit circle".into()))?;
    let selected = refine_double_root(&coeffs, &roots, selected);
    Ok(RootMusicResult {
        phase: principal_phase(selected.arg()),
        selected,
        roots,
    })
}

/// Near the noise-free limit the selected root and its conjugate-reciprocal
/// partner merge into a double root on the unit circle. Rounding splits it by
/// about √ε in an arbitrary direction, so the pair is replaced by the simple
/// zero of `p'` between them, which Newton's method locates to ε.
fn refine_double_root(coeffs: &[C64], roots: &[C64], selected: C64) -> C64 {
    let mirror = selected.conj().inv();
    let Some(partner) = roots
        .iter()
        .copied()
        .filter(|z| *z != selected)
        .min_by(|a, b| (a - mirror).norm().total_cmp(&(b - mirror).norm()))
    else {
        return selected;
    };
    if (partner - selected).norm() > DOUBLE_ROOT_GAP {
        return selected;
    }
    let mut z = (selected + partner) * 0.5;
    for _ in 0..8 {
        let [_, d1, d2] = poly::eval_derivatives(coeffs, z);
        let step = d1 / d2;
        if !step.is_finite() {
            return selected;
        }
        z -= step;
        if step.norm() <= 4.0 * f64::EPSILON {
            break;
        }
    }
    if (z - selected).norm() <= DOUBLE_ROOT_GAP {
        z
    } else {
        selected
    }
}

/// Maximal-modulus root with `|z| ≤ 1 + UNIT_CIRCLE_SLACK`; ties go to the larger
/// real part, then the larger imaginary part.
pub fn select_root(roots: &[C64]) -> Option<C64> {
    roots
        .iter()
        .copied()
        .filter(|z| z.norm() <= 1.0 + UNIT_CIRCLE_SLACK)
        .max_by(|a, b| {
            a.norm()
                .total_cmp(&b.norm())
                .then(a.re.total_cmp(&b.re))
                .then(a.im.total_cmp(&b.im))
        })
}

/// Folds a phase into `(−π, π]`.
pub fn principal_phase(phi: f64) -> f64 {
    let wrapped = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdAngle {
    pub theta_deg: f64,
    /// The arcsine argument left `[−1, 1]` and was clamped.
    pub clamped: bool,
}

/// `arcsin(λ·φ/(2π·d))` in degrees.
pub fn fd_angle(phase: f64, spacing: f64, wavelength: f64) -> FdAngle {
    let s = wavelength * phase / (2.0 * PI * spacing);
    let clamped = !(-1.0..=1.0).contains(&s);
    FdAngle {
        theta_deg: s.clamp(-1.0, 1.0).asin().to_degrees(),
        clamped,
    }
}

/// Root-MUSIC angle estimate of a ULA with element spacing `spacing`.
pub fn estimate_ula(y: &DMatrix<C64>, spacing: f64, wavelength: f64) -> Result<(FdAngle, RootMusicResult)> {
    let cov = sample_covariance(y)?;
    let sub = noise_subspace(&cov.matrix, 1)?;
    let rm = root_music(&sub)?;
    Ok((fd_angle(rm.phase, spacing, wavelength), rm))
}

/// `aᴴ Q a` for the unit-spacing manifold with phase step `phase`.
pub fn music_null(q: &DMatrix<C64>, phase: f64) -> f64 {
    let n = q.nrows();
    let a = DVector::from_iterator(n, (0..n).map(|m| C64::from_polar(1.0, phase * m as f64)));
    (a.adjoint() * q * &a)[(0, 0)].re
}
