//! Small dense symmetric-matrix toolkit for the ONS preconditioner: spectra,
//! spectral surgery, conditioning and alignment diagnostics, and projections
//! onto the Euclidean ball under either the Euclidean or a matrix-induced norm.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Dense symmetric matrix. Every constructor and mutator keeps
/// `entry(i, j) == entry(j, i)` exactly; the upper triangle is authoritative.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix(DMatrix::identity(dim, dim))
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        SymMatrix(DMatrix::identity(dim, dim) * scale)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    /// Builds from a square matrix, copying the upper triangle onto the lower one.
    pub fn from_upper(mut m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::usage(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        mirror_upper(&mut m);
        Ok(SymMatrix(m))
    }

    /// Row-major convenience constructor; the lower triangle of `rows` is ignored.
    pub fn from_rows(dim: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::usage(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                rows.len()
            )));
        }
        Self::from_upper(DMatrix::from_row_slice(dim, dim, rows))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.0[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self += g g^T`.
    pub fn add_outer(&mut self, g: &DVector<f64>) {
        self.rank_one(g, 1.0);
    }

    /// `self -= g g^T`.
    pub fn sub_outer(&mut self, g: &DVector<f64>) {
        self.rank_one(g, -1.0);
    }

    fn rank_one(&mut self, g: &DVector<f64>, sign: f64) {
        let d = self.dim();
        assert_eq!(g.len(), d, "rank-one update dimension mismatch");
        for j in 0..d {
            for i in 0..=j {
                let v = self.0[(i, j)] + sign * (g[i] * g[j]);
                self.0[(i, j)] = v;
                self.0[(j, i)] = v;
            }
        }
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn frobenius_inner(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn frobenius_distance(&self, other: &SymMatrix) -> f64 {
        (&self.0 - &other.0).norm()
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.0 * v
    }
}

fn mirror_upper(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for j in 0..d {
        for i in 0..j {
            m[(j, i)] = m[(i, j)];
        }
    }
}

/// Eigenpairs with eigenvalues sorted in descending order; column `k` of
/// `eigenvectors` belongs to `eigenvalues[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// `V diag(f(lambda)) V^T`, keeping the eigenvectors.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> SymMatrix {
        let scaled = DVector::from_iterator(self.eigenvalues.len(), self.eigenvalues.iter().map(|&l| f(l)));
        let v = &self.eigenvectors;
        let mut m = v * DMatrix::from_diagonal(&scaled) * v.transpose();
        mirror_upper(&mut m);
        SymMatrix(m)
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map(|l| l)
    }

    /// `A^{-1} b` for positive-definite `A`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let v = &self.eigenvectors;
        let mut c = v.transpose() * b;
        for (ci, li) in c.iter_mut().zip(self.eigenvalues.iter()) {
            *ci /= li;
        }
        v * c
    }
}

/// Symmetric eigendecomposition.
pub fn eig_sym(a: &SymMatrix) -> Result<Spectrum> {
    if !a.is_finite() {
        return Err(Error::numeric("eigendecomposition of a matrix with non-finite entries"));
    }
    let d = a.dim();
    let eig = SymmetricEigen::try_new(a.0.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::numeric("symmetric eigensolver did not converge"))?;
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = DVector::from_iterator(d, order.iter().map(|&k| eig.eigenvalues[k]));
    let eigenvectors = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Spectrum { eigenvalues, eigenvectors })
}

/// Raises every eigenvalue below `floor` up to `floor`. Matrices already at or
/// above the floor are returned untouched.
pub fn psd_floor(a: &SymMatrix, floor: f64) -> Result<SymMatrix> {
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(Error::usage(format!("psd floor must be positive, got {floor}")));
    }
    let spec = eig_sym(a)?;
    if spec.min() >= floor {
        return Ok(a.clone());
    }
    Ok(spec.map(|l| l.max(floor)))
}

pub fn cond_number(a: &SymMatrix) -> Result<f64> {
    cond_from_spectrum(&eig_sym(a)?)
}

pub(crate) fn cond_from_spectrum(spec: &Spectrum) -> Result<f64> {
    let lo = spec.min();
    if lo.is_nan() || lo <= 0.0 {
        return Err(Error::numeric(format!(
            "condition number of a matrix that is not positive definite (lambda_min = {lo})"
        )));
    }
    Ok((spec.max() / lo).max(1.0))
}

/// Frobenius cosine `<A, B>_F / (|A|_F |B|_F)`.
pub fn cos_frobenius(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::usage(format!(
            "alignment of {}x{} and {}x{} matrices",
            a.dim(),
            a.dim(),
            b.dim(),
            b.dim()
        )));
    }
    let (na, nb) = (a.frobenius_norm(), b.frobenius_norm());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedAlignment("Frobenius cosine with a zero matrix".into()));
    }
    Ok((a.frobenius_inner(b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine between two vectors, `None` when either is zero.
pub fn vector_cosine(u: &DVector<f64>, v: &DVector<f64>) -> Option<f64> {
    let (nu, nv) = (u.norm(), v.norm());
    if nu == 0.0 || nv == 0.0 || u.len() != v.len() {
        return None;
    }
    Some((u.dot(v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// `u` scaled back onto the ball of radius `R` when it lies outside.
/// Non-finite input is returned unchanged so that divergence stays visible.
pub fn project_ball_euclid(u: &DVector<f64>, radius: f64) -> DVector<f64> {
    if !u.iter().all(|v| v.is_finite()) {
        return u.clone();
    }
    let mut n = u.norm();
    if n.is_infinite() {
        let m = u.amax();
        n = m * (u / m).norm();
    }
    if n <= radius {
        u.clone()
    } else {
        u * (radius / n)
    }
}

/// `argmin_{|w|_2 <= R} (w - u)^T A (w - u)` for positive-definite `A`.
pub fn project_ball_metric(u: &DVector<f64>, a: &SymMatrix, radius: f64) -> Result<DVector<f64>> {
    if u.norm() <= radius {
        return Ok(u.clone());
    }
    let spec = eig_sym(a)?;
    project_ball_metric_with(u, a, &spec, radius)
}

/// [`project_ball_metric`] with a precomputed spectrum of `a`.
pub(crate) fn project_ball_metric_with(
    u: &DVector<f64>,
    a: &SymMatrix,
    spec: &Spectrum,
    radius: f64,
) -> Result<DVector<f64>> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(Error::usage(format!("projection radius must be positive, got {radius}")));
    }
    if u.norm() <= radius {
        return Ok(u.clone());
    }
    if spec.min().is_nan() || spec.min() <= 0.0 {
        return Err(Error::numeric(format!(
            "metric projection needs a positive-definite matrix (lambda_min = {})",
            spec.min()
        )));
    }
    ball_constrained_min(spec, &a.mul_vec(u), radius)
}

/// Minimizes `0.5 w^T H w - b^T w` over `|w|_2 <= R` for positive-semidefinite
/// `H` given by its spectrum. Stationarity is `(H + mu I) w = b`; the multiplier
/// `mu >= 0` is found by bisection on the monotone map `mu -> |w(mu)|`.
/// Directions with numerically zero curvature use the pseudo-inverse at `mu = 0`.
pub(crate) fn ball_constrained_min(spec: &Spectrum, b: &DVector<f64>, radius: f64) -> Result<DVector<f64>> {
    const MU_TOL: f64 = 1e-10;
    const NORM_TOL: f64 = 1e-8;

    let v = &spec.eigenvectors;
    let coeffs = v.transpose() * b;
    let scale = spec.max().abs().max(1.0);
    let null_tol = 1e-12 * scale;
    let solve_at = |mu: f64| -> DVector<f64> {
        let c = DVector::from_iterator(
            coeffs.len(),
            coeffs.iter().zip(spec.eigenvalues.iter()).map(|(&ci, &li)| {
                let denom = li.max(0.0) + mu;
                if mu == 0.0 && li <= null_tol {
                    0.0
                } else {
                    ci / denom
                }
            }),
        );
        v * c
    };

    let free = solve_at(0.0);
    if free.norm() <= radius {
        return Ok(free);
    }

    let mut lo = 0.0_f64;
    let mut hi = coeffs.norm() / radius;
    if !(hi.is_finite() && solve_at(hi).norm() <= radius) {
        return Err(Error::numeric("ball-constrained solve failed to bracket the multiplier"));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if solve_at(mid).norm() > radius {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= MU_TOL * (1.0 + hi) && radius - solve_at(hi).norm() <= NORM_TOL {
            break;
        }
    }
    let w = solve_at(hi);
    let n = w.norm();
    if n > radius || radius - n > NORM_TOL {
        return Err(Error::numeric(format!(
            "ball-constrained solve ended at norm {n}, outside [{}, {radius}]",
            radius - NORM_TOL
        )));
    }
    Ok(w)
}
