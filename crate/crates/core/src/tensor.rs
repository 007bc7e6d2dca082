//! Dense pointwise tensors over a single chart basis.
//!
//! Everything here is a plain array in one fixed coordinate basis; no
//! symbolic structure survives. Index conventions, used consistently by
//! every caller:
//!
//! * `Tensor2` stores a covariant bilinear form, `data[i][j] = B(e_i, e_j)`.
//! * `Endo` stores a (1,1) tensor with `data[k][j] = A^k_j`, so column `j`
//!   is the image of the basis vector `e_j` and `F_ij = g_ik f^k_j` relates
//!   a 2-form to its endomorphism.
//! * `Tensor3` stores a covariant 3-tensor `data[l][i][j] = C(e_l, e_i, e_j)`.
//!   Covariant derivatives keep the direction in the first slot.
//!
//! Factorizations (least squares, spectral splits) go through `nalgebra`;
//! the small contraction loops are hand-rolled because dimensions stay <= 8.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor2 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor2 {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                t.data[i * dim + j] = f(i, j);
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(i, j) + other.get(i, j))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(i, j) - other.get(i, j))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_fn(self.dim, |i, j| c * self.get(i, j))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i))
    }

    /// sup |B_ij - B_ji|: distance from being symmetric.
    pub fn asymmetry(&self) -> f64 {
        let mut r = 0.0f64;
        for i in 0..self.dim {
            for j in 0..i {
                r = r.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        r
    }

    /// sup |B_ij + B_ji|: distance from being skew.
    pub fn skew_residual(&self) -> f64 {
        let mut r = 0.0f64;
        for i in 0..self.dim {
            for j in 0..=i {
                r = r.max((self.get(i, j) + self.get(j, i)).abs());
            }
        }
        r
    }

    /// Skew part (B_ij - B_ji) / 2.
    pub fn skew_part(&self) -> Self {
        Self::from_fn(self.dim, |i, j| 0.5 * (self.get(i, j) - self.get(j, i)))
    }

    /// B'(a,b) = B(A a, C b) on basis vectors: B'_ab = A^i_a B_ij C^j_b.
    pub fn pullback(&self, a: &Endo, c: &Endo) -> Self {
        let d = self.dim;
        Self::from_fn(d, |x, y| {
            let mut s = 0.0;
            for i in 0..d {
                for j in 0..d {
                    s += a.get(i, x) * self.get(i, j) * c.get(j, y);
                }
            }
            s
        })
    }

    pub fn det(&self) -> f64 {
        self.to_dmatrix().determinant()
    }

    pub(crate) fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    pub(crate) fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Endo {
    dim: usize,
    data: Vec<f64>,
}

impl Endo {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |k, j| if k == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for k in 0..dim {
            for j in 0..dim {
                t.data[k * dim + j] = f(k, j);
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// A^k_j.
    #[inline]
    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.data[k * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, k: usize, j: usize, v: f64) {
        self.data[k * self.dim + j] = v;
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_fn(self.dim, |k, j| self.get(k, j) + other.get(k, j))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_fn(self.dim, |k, j| self.get(k, j) - other.get(k, j))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_fn(self.dim, |k, j| c * self.get(k, j))
    }

    /// Composition self . other: (self other)^k_j = self^k_m other^m_j.
    pub fn compose(&self, other: &Self) -> Self {
        let d = self.dim;
        Self::from_fn(d, |k, j| (0..d).map(|m| self.get(k, m) * other.get(m, j)).sum())
    }

    /// self applied n times.
    pub fn power(&self, n: usize) -> Self {
        let mut out = Endo::identity(self.dim);
        for _ in 0..n {
            out = out.compose(self);
        }
        out
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|k| (0..d).map(|j| self.get(k, j) * v[j]).sum()).collect()
    }

    pub(crate) fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |k, j| self.get(k, j))
    }

    pub(crate) fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), |k, j| m[(k, j)])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dim: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim * dim] }
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for l in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    t.data[(l * dim + i) * dim + j] = f(l, i, j);
                }
            }
        }
        t
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, l: usize, i: usize, j: usize) -> f64 {
        self.data[(l * self.dim + i) * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, l: usize, i: usize, j: usize, v: f64) {
        self.data[(l * self.dim + i) * self.dim + j] = v;
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_fn(self.dim, |l, i, j| self.get(l, i, j) + other.get(l, i, j))
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_fn(self.dim, |l, i, j| self.get(l, i, j) - other.get(l, i, j))
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::from_fn(self.dim, |l, i, j| c * self.get(l, i, j))
    }

    /// C'(a,b,c) = C(A a, B b, D c); `None` leaves a slot untouched.
    pub fn pull(&self, a: Option<&Endo>, b: Option<&Endo>, d: Option<&Endo>) -> Self {
        let mut out = self.clone();
        if let Some(m) = a {
            out = out.contract_slot(m, 0);
        }
        if let Some(m) = b {
            out = out.contract_slot(m, 1);
        }
        if let Some(m) = d {
            out = out.contract_slot(m, 2);
        }
        out
    }

    fn contract_slot(&self, m: &Endo, slot: usize) -> Self {
        let d = self.dim;
        Self::from_fn(d, |l, i, j| {
            let mut s = 0.0;
            for r in 0..d {
                s += match slot {
                    0 => m.get(r, l) * self.get(r, i, j),
                    1 => m.get(r, i) * self.get(l, r, j),
                    _ => m.get(r, j) * self.get(l, i, r),
                };
            }
            s
        })
    }

    /// Contract a vector into slot 0: out(i,j) = C(v, e_i, e_j).
    pub fn vec0(&self, v: &[f64]) -> Tensor2 {
        let d = self.dim;
        Tensor2::from_fn(d, |i, j| (0..d).map(|l| v[l] * self.get(l, i, j)).sum())
    }

    /// Contract a vector into slot 1: out(l,j) = C(e_l, v, e_j).
    pub fn vec1(&self, v: &[f64]) -> Tensor2 {
        let d = self.dim;
        Tensor2::from_fn(d, |l, j| (0..d).map(|i| v[i] * self.get(l, i, j)).sum())
    }

    /// Contract a vector into slot 2: out(l,i) = C(e_l, e_i, v).
    pub fn vec2(&self, v: &[f64]) -> Tensor2 {
        let d = self.dim;
        Tensor2::from_fn(d, |l, i| (0..d).map(|j| v[j] * self.get(l, i, j)).sum())
    }

    /// Scalar C(x, y, z) for arbitrary coordinate vectors.
    pub fn eval(&self, x: &[f64], y: &[f64], z: &[f64]) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for l in 0..d {
            if x[l] == 0.0 {
                continue;
            }
            for i in 0..d {
                for j in 0..d {
                    s += x[l] * y[i] * z[j] * self.get(l, i, j);
                }
            }
        }
        s
    }

    /// sup |C(l,i,j) + C(i,l,j)|: deviation from skewness in the first pair.
    pub fn skew12_residual(&self) -> f64 {
        let d = self.dim;
        let mut r = 0.0f64;
        for l in 0..d {
            for i in 0..=l {
                for j in 0..d {
                    r = r.max((self.get(l, i, j) + self.get(i, l, j)).abs());
                }
            }
        }
        r
    }

    /// Projection onto the skew-in-(0,1) part plus the size of what was dropped.
    pub fn antisymmetrize12(&self) -> (Self, f64) {
        let asym = self.skew12_residual();
        let out = Self::from_fn(self.dim, |l, i, j| {
            0.5 * (self.get(l, i, j) - self.get(i, l, j))
        });
        (out, asym)
    }

    /// Deviation from total skewness: checks both adjacent transpositions.
    pub fn totally_skew_residual(&self) -> f64 {
        let d = self.dim;
        let mut r = self.skew12_residual();
        for l in 0..d {
            for i in 0..d {
                for j in 0..=i {
                    r = r.max((self.get(l, i, j) + self.get(l, j, i)).abs());
                }
            }
        }
        r
    }
}

/// F_ij = g_ik f^k_j, skew-symmetrized. With a g-skew `f` the
/// symmetrization is a no-op up to rounding.
pub fn lower_endo(f: &Endo, g: &Tensor2) -> Result<Tensor2> {
    check_metric(g)?;
    let d = g.dim();
    let raw = Tensor2::from_fn(d, |i, j| (0..d).map(|k| g.get(i, k) * f.get(k, j)).sum());
    Ok(raw.skew_part())
}

/// f^k_j = g^{ki} F_ij.
pub fn raise_endo(big_f: &Tensor2, g: &Tensor2) -> Result<Endo> {
    let g_inv = invert_metric(g)?;
    let d = g.dim();
    Ok(Endo::from_fn(d, |k, j| {
        (0..d).map(|i| g_inv.get(k, i) * big_f.get(i, j)).sum()
    }))
}

/// Inverse of a nondegenerate symmetric bilinear form.
pub fn invert_metric(g: &Tensor2) -> Result<Tensor2> {
    check_metric(g)?;
    let m = g.to_dmatrix();
    let inv = m
        .try_inverse()
        .ok_or(Error::DegenerateMetric(g.det()))?;
    Ok(Tensor2::from_dmatrix(&inv))
}

fn check_metric(g: &Tensor2) -> Result<()> {
    if !g.is_finite() {
        return Err(Error::NonFinite("metric"));
    }
    let det = g.det();
    if det.abs() < 1e-12 {
        return Err(Error::DegenerateMetric(det));
    }
    Ok(())
}

/// Minimum-norm least-squares solution of `a x = b`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    pub solution: DVector<f64>,
    /// sup-norm of a x - b.
    pub residual: f64,
    /// True when every singular value clears `sv_threshold * sv_max`,
    /// i.e. the system determines x with no free directions.
    pub unique: bool,
    pub sv_min: f64,
    pub sv_max: f64,
}

/// Dense minimum-norm least-squares through the normal equations: the
/// symmetric eigendecomposition of A^T A is far more dependable on the
/// highly degenerate spectra these systems produce than a bidiagonal SVD,
/// which can fail to converge and silently return an inaccurate factor.
///
/// The price of squaring is resolution: singular values below about
/// sqrt(n * eps) * sv_max cannot be told from zero, so the effective rank
/// cut is max(sv_threshold, sqrt(n * eps)) * sv_max. `sv_threshold` can
/// tighten that cut, never loosen it. Squaring also squares the condition
/// number of the solve itself; a few refinement sweeps with the same
/// factorization shrink the error by that factor per sweep, so consistent
/// systems come out near machine residual even at condition 1e5. The
/// reported residual is always recomputed directly as sup |A x - b|, never
/// read off the factorization.
pub fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>, sv_threshold: f64) -> Result<LeastSquares> {
    if a.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("linear system"));
    }
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "system has {} rows but rhs has {}",
            a.nrows(),
            b.len()
        )));
    }
    let ncols = a.ncols();
    let gram = a.tr_mul(a);
    let eig = gram.symmetric_eigen();
    let lam_max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(*v));
    let lam_min = eig.eigenvalues.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let sv_max = lam_max.max(0.0).sqrt();
    let floor = (ncols as f64 * f64::EPSILON).sqrt().max(sv_threshold);
    let lam_cut = (floor * sv_max) * (floor * sv_max);
    let mut rank = 0usize;
    for lam in eig.eigenvalues.iter() {
        if *lam > lam_cut {
            rank += 1;
        }
    }
    // Pseudoinverse of the Gram matrix applied to a vector, restricted to
    // the retained eigenspace. Corrections stay in that span, so refinement
    // preserves the minimum-norm property.
    let apply_pinv = |rhs: &DVector<f64>| -> DVector<f64> {
        let mut x = DVector::<f64>::zeros(ncols);
        for i in 0..eig.eigenvalues.len() {
            let lam = eig.eigenvalues[i];
            if lam > lam_cut {
                let v = eig.eigenvectors.column(i);
                x.axpy(v.dot(rhs) / lam, &v, 1.0);
            }
        }
        x
    };
    // Safeguarded refinement: each sweep multiplies the error by roughly
    // cond^2 * eps, which can exceed 1 near the rank cut, so keep the best
    // iterate and stop as soon as the directly measured residual stalls.
    let mut solution = apply_pinv(&a.tr_mul(b));
    let mut best = solution.clone();
    let mut best_residual = (a * &solution - b).amax();
    for _ in 0..8 {
        let gap = b - a * &solution;
        let correction = apply_pinv(&a.tr_mul(&gap));
        if correction.amax() <= f64::EPSILON * solution.amax().max(1.0) {
            break;
        }
        solution += correction;
        let r = (a * &solution - b).amax();
        if r < best_residual {
            best_residual = r;
            best.copy_from(&solution);
        } else {
            break;
        }
    }
    let solution = best;
    let residual = best_residual;
    Ok(LeastSquares {
        solution,
        residual,
        unique: rank == ncols && ncols <= a.nrows(),
        sv_min: if lam_min.is_finite() { lam_min.max(0.0).sqrt() } else { 0.0 },
        sv_max,
    })
}

/// g-orthogonal split of the domain of a g-self-adjoint operator into the
/// span of its small eigenvectors (|eigenvalue| < eps) and the complement.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub kernel: Vec<Vec<f64>>,
    pub complement: Vec<Vec<f64>>,
}

/// Splits eigenspaces of `a` by |eigenvalue| < eps. `a` must be
/// self-adjoint for `g` (g A symmetric); the kernel and complement are then
/// automatically g-orthogonal to each other.
pub fn spectral_split(a: &Endo, g: &Tensor2, eps: f64) -> Result<SpectralSplit> {
    let d = a.dim();
    if g.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "operator dim {} vs metric dim {}",
            d,
            g.dim()
        )));
    }
    let a_m = a.to_dmatrix();
    let g_m = g.to_dmatrix();
    let b = &g_m * &a_m;
    let self_adjoint_residual = (&b - b.transpose()).amax() / b.amax().max(1.0);
    if self_adjoint_residual > 1e-10 {
        return Err(Error::NotSelfAdjoint(self_adjoint_residual));
    }

    // Positive definite g: whiten with the Cholesky factor so the operator
    // becomes plainly symmetric and the recovered eigenvectors come out
    // g-orthonormal. Otherwise fall back to a plainly symmetric operator
    // matrix (covers constant indefinite-signature charts).
    let pairs: Vec<(f64, DVector<f64>)> = if let Some(chol) = nalgebra::Cholesky::new(g_m.clone()) {
        let l = chol.l();
        let l_inv_t = l
            .transpose()
            .try_inverse()
            .ok_or(Error::DegenerateMetric(g.det()))?;
        let m = l.transpose() * &a_m * &l_inv_t;
        let m_sym = 0.5 * (&m + m.transpose());
        let eig = nalgebra::SymmetricEigen::new(m_sym);
        (0..d)
            .map(|i| (eig.eigenvalues[i], &l_inv_t * eig.eigenvectors.column(i)))
            .collect()
    } else if (&a_m - a_m.transpose()).amax() <= 1e-8 * a_m.amax().max(1.0) {
        let a_sym = 0.5 * (&a_m + a_m.transpose());
        let eig = nalgebra::SymmetricEigen::new(a_sym);
        (0..d)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
            .collect()
    } else {
        return Err(Error::NotSelfAdjoint(self_adjoint_residual));
    };

    let mut pairs = pairs;
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut split = SpectralSplit { kernel: Vec::new(), complement: Vec::new() };
    for (lambda, v) in pairs {
        let v: Vec<f64> = v.iter().copied().collect();
        if lambda.abs() < eps {
            split.kernel.push(v);
        } else {
            split.complement.push(v);
        }
    }
    Ok(split)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lower_raise_roundtrip() {
        let d = 4;
        let g = Tensor2::from_fn(d, |i, j| if i == j { 1.0 + 0.1 * i as f64 } else { 0.02 });
        let mut f = Endo::zeros(d);
        // A g-skew endomorphism: f = g^{-1} S with S skew.
        let s = Tensor2::from_fn(d, |i, j| 0.3 * (i as f64 - j as f64));
        let g_inv = invert_metric(&g).unwrap();
        for k in 0..d {
            for j in 0..d {
                f.set(k, j, (0..d).map(|i| g_inv.get(k, i) * s.get(i, j)).sum());
            }
        }
        let big_f = lower_endo(&f, &g).unwrap();
        assert!(big_f.skew_residual() < 1e-14);
        let f_back = raise_endo(&big_f, &g).unwrap();
        assert!(f_back.sub(&f).sup_norm() < 1e-12);
    }

    #[test]
    fn solve_dense_planted() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 0.0, 1.0, 0.0, 3.0, 0.0, 1.0, 0.0, 2.0]);
        let x = DVector::from_row_slice(&[1.0, -2.0, 0.5]);
        let b = &a * &x;
        let ls = solve_dense(&a, &b, 1e-10).unwrap();
        assert!(ls.unique);
        assert!((ls.solution - x).amax() < 1e-12);
        assert!(ls.residual < 1e-12);
    }

    #[test]
    fn spectral_split_block() {
        let d = 4;
        let g = Tensor2::from_fn(d, |i, j| if i == j { 1.0 } else { 0.0 });
        // diag(-1, -1, 0, 0): kernel = last two axes.
        let a = Endo::from_fn(d, |k, j| if k == j && k < 2 { -1.0 } else { 0.0 });
        let s = spectral_split(&a, &g, 1e-10).unwrap();
        assert_eq!(s.kernel.len(), 2);
        assert_eq!(s.complement.len(), 2);
        for v in &s.kernel {
            assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12);
        }
    }
}
