//! Analytic structure fields on a chart and the cached per-point geometry.
//!
//! A `StructureFields` bundles closures for g, F and their exact coordinate
//! partials. Everything downstream consumes the `PointGeometry` pack built
//! by [`point_geometry`], which evaluates the fields once at a point and
//! precomputes the derived operators (Christoffel symbols, f and its powers,
//! Q = -f^2 - I, P = I - f^2, the kernel split of f, nabla F and dF).
//!
//! Derivative slot order everywhere: the direction sits in slot 0, so
//! `dg[l][i][j] = d_l g_ij` and `nabla_f[l][i][j] = (nabla_l F)(e_i, e_j)`.

use crate::error::{Error, Result};
use crate::tensor::{invert_metric, raise_endo, spectral_split, Endo, Tensor2, Tensor3};

#[derive(Debug, Clone, PartialEq)]
pub struct ChartPoint {
    coords: Vec<f64>,
}

impl ChartPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("chart point"));
        }
        Ok(Self { coords })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// The point shifted by h along coordinate axis l.
    pub fn shifted(&self, l: usize, h: f64) -> Self {
        let mut coords = self.coords.clone();
        coords[l] += h;
        Self { coords }
    }
}

/// Chart-coordinate function yielding a 2-tensor.
pub type Field2 = Box<dyn Fn(&[f64]) -> Tensor2 + Send + Sync>;
/// Chart-coordinate function yielding a 3-tensor.
pub type Field3 = Box<dyn Fn(&[f64]) -> Tensor3 + Send + Sync>;

/// g, F and their exact coordinate partials as functions of chart coordinates.
pub struct StructureFields {
    dim: usize,
    signature: Vec<i8>,
    g: Field2,
    dg: Field3,
    f_form: Field2,
    df_form: Field3,
}

impl StructureFields {
    pub fn new(
        dim: usize,
        signature: Vec<i8>,
        g: Field2,
        dg: Field3,
        f_form: Field2,
        df_form: Field3,
    ) -> Self {
        assert_eq!(signature.len(), dim, "signature must list one sign per axis");
        Self { dim, signature, g, dg, f_form, df_form }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn signature(&self) -> &[i8] {
        &self.signature
    }

    pub fn g_at(&self, p: &ChartPoint) -> Tensor2 {
        (self.g)(p.coords())
    }

    /// dg[l][i][j] = d_l g_ij.
    pub fn dg_at(&self, p: &ChartPoint) -> Tensor3 {
        (self.dg)(p.coords())
    }

    pub fn f_form_at(&self, p: &ChartPoint) -> Tensor2 {
        (self.f_form)(p.coords())
    }

    /// df[l][i][j] = d_l F_ij.
    pub fn df_form_at(&self, p: &ChartPoint) -> Tensor3 {
        (self.df_form)(p.coords())
    }
}

/// Levi-Civita coefficients Gamma^k_ij, stored as gamma[k][i][j], symmetric
/// in (i, j) by construction.
pub fn christoffel(fields: &StructureFields, p: &ChartPoint) -> Result<Tensor3> {
    let g = fields.g_at(p);
    let dg = fields.dg_at(p);
    christoffel_from_parts(&g, &dg)
}

pub(crate) fn christoffel_from_parts(g: &Tensor2, dg: &Tensor3) -> Result<Tensor3> {
    let d = g.dim();
    let g_inv = invert_metric(g)?;
    Ok(Tensor3::from_fn(d, |k, i, j| {
        let mut s = 0.0;
        for l in 0..d {
            s += 0.5
                * g_inv.get(k, l)
                * (dg.get(i, j, l) + dg.get(j, i, l) - dg.get(l, i, j));
        }
        s
    }))
}

/// (nabla^g F) with slot order [l][i][j] = (nabla_l F)(e_i, e_j).
///
/// Computed from partials and Christoffel symbols, then cross-checked
/// against the endomorphism route g(X, (nabla_Z f) Y); the two must agree
/// to 1e-9 or the supplied fields are inconsistent.
pub fn nabla_f_form(fields: &StructureFields, p: &ChartPoint) -> Result<Tensor3> {
    let g = fields.g_at(p);
    let dg = fields.dg_at(p);
    let big_f = fields.f_form_at(p);
    let df = fields.df_form_at(p);
    let gamma = christoffel_from_parts(&g, &dg)?;
    nabla_f_from_parts(&g, &dg, &big_f, &df, &gamma)
}

pub(crate) fn nabla_f_from_parts(
    g: &Tensor2,
    dg: &Tensor3,
    big_f: &Tensor2,
    df: &Tensor3,
    gamma: &Tensor3,
) -> Result<Tensor3> {
    let d = g.dim();
    let direct = Tensor3::from_fn(d, |l, i, j| {
        let mut s = df.get(l, i, j);
        for m in 0..d {
            s -= gamma.get(m, l, i) * big_f.get(m, j);
            s -= gamma.get(m, l, j) * big_f.get(i, m);
        }
        s
    });

    // Second route: differentiate f = g^{-1} F and lower the result.
    let g_inv = invert_metric(g)?;
    let f = raise_endo(big_f, g)?;
    let mut residual = 0.0f64;
    for l in 0..d {
        // (d_l f)^k_j = g^{ki} (d_l F_ij - d_l g_im f^m_j)
        let mut df_endo = Endo::zeros(d);
        for k in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for i in 0..d {
                    let mut inner = df.get(l, i, j);
                    for m in 0..d {
                        inner -= dg.get(l, i, m) * f.get(m, j);
                    }
                    s += g_inv.get(k, i) * inner;
                }
                df_endo.set(k, j, s);
            }
        }
        for i in 0..d {
            for j in 0..d {
                // (nabla_l f)^k_j = (d_l f)^k_j + Gamma^k_lm f^m_j - Gamma^m_lj f^k_m
                let mut via_endo = 0.0;
                for k in 0..d {
                    let mut nf = df_endo.get(k, j);
                    for m in 0..d {
                        nf += gamma.get(k, l, m) * f.get(m, j);
                        nf -= gamma.get(m, l, j) * f.get(k, m);
                    }
                    via_endo += g.get(i, k) * nf;
                }
                residual = residual.max((via_endo - direct.get(l, i, j)).abs());
            }
        }
    }
    if residual > 1e-9 {
        return Err(Error::StructureMismatch { what: "nabla F two-route check", residual });
    }
    Ok(direct)
}

/// The exterior derivative dF_ijk = d_i F_jk + d_j F_ki + d_k F_ij,
/// totally skew by construction.
pub fn exterior_df(fields: &StructureFields, p: &ChartPoint) -> Tensor3 {
    let df = fields.df_form_at(p);
    exterior_df_from_partials(&df)
}

pub(crate) fn exterior_df_from_partials(df: &Tensor3) -> Tensor3 {
    let d = df.dim();
    Tensor3::from_fn(d, |i, j, k| df.get(i, j, k) + df.get(j, k, i) + df.get(k, i, j))
}

/// Kernel/complement split of f with the cached restricted inverse of f^6.
#[derive(Debug, Clone)]
pub struct KernelSplit {
    pub kernel: Vec<Vec<f64>>,
    pub complement: Vec<Vec<f64>>,
    /// Projection onto ker f along the complement.
    pub kernel_projector: Endo,
    pub complement_projector: Endo,
    /// Inverse of f^6 restricted to the complement, extended by zero on the
    /// kernel; `None` when f vanishes identically.
    pub f6_inv: Option<Endo>,
}

fn build_kernel_split(f2: &Endo, f6: &Endo, g: &Tensor2, kernel_eps: f64) -> Result<KernelSplit> {
    let d = f2.dim();
    let split = spectral_split(f2, g, kernel_eps)?;
    let r = split.kernel.len();
    let s = split.complement.len();

    if s == 0 {
        return Ok(KernelSplit {
            kernel: split.kernel,
            complement: split.complement,
            kernel_projector: Endo::identity(d),
            complement_projector: Endo::zeros(d),
            f6_inv: None,
        });
    }

    // Basis matrix [complement | kernel]; its inverse reads off coordinates.
    let mut bm = nalgebra::DMatrix::<f64>::zeros(d, d);
    for (c, v) in split.complement.iter().enumerate() {
        for i in 0..d {
            bm[(i, c)] = v[i];
        }
    }
    for (c, v) in split.kernel.iter().enumerate() {
        for i in 0..d {
            bm[(i, s + c)] = v[i];
        }
    }
    let e = bm
        .clone()
        .try_inverse()
        .ok_or(Error::NonFinite("kernel split basis inversion"))?;

    let complement_projector = Endo::from_fn(d, |i, j| {
        (0..s).map(|c| bm[(i, c)] * e[(c, j)]).sum()
    });
    let kernel_projector = Endo::from_fn(d, |i, j| {
        (0..r).map(|c| bm[(i, s + c)] * e[(s + c, j)]).sum()
    });

    // f^6 maps the complement to itself; invert it there. b6 is the s x s
    // representation of f^6 in the complement basis.
    let f6_m = f6.to_dmatrix();
    let c_cols = bm.columns(0, s).into_owned();
    let f6_c = &f6_m * &c_cols;
    let mut b6 = nalgebra::DMatrix::<f64>::zeros(s, s);
    for row in 0..s {
        for col in 0..s {
            b6[(row, col)] = (0..d).map(|i| e[(row, i)] * f6_c[(i, col)]).sum();
        }
    }
    let b6_inv = b6
        .try_inverse()
        .ok_or(Error::StructureMismatch {
            what: "f^6 singular on the complement of ker f",
            residual: f64::INFINITY,
        })?;
    let f6_inv = Endo::from_fn(d, |i, j| {
        let mut sum = 0.0;
        for a in 0..s {
            for b in 0..s {
                sum += c_cols[(i, a)] * b6_inv[(a, b)] * e[(b, j)];
            }
        }
        sum
    });

    // f^6 . f6_inv must reproduce the complement projector.
    let check = f6.compose(&f6_inv).sub(&complement_projector).sup_norm();
    if check > 1e-8 {
        return Err(Error::StructureMismatch {
            what: "restricted inverse of f^6",
            residual: check,
        });
    }

    Ok(KernelSplit {
        kernel: split.kernel,
        complement: split.complement,
        kernel_projector,
        complement_projector,
        f6_inv: Some(f6_inv),
    })
}

/// Everything derived from (g, F) at one point.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    pub point: ChartPoint,
    pub signature: Vec<i8>,
    pub g: Tensor2,
    pub g_inv: Tensor2,
    pub dg: Tensor3,
    /// The 2-form F.
    pub big_f: Tensor2,
    /// Coordinate partials d_l F_ij.
    pub df_partials: Tensor3,
    /// Gamma^k_ij as gamma[k][i][j].
    pub gamma: Tensor3,
    pub f: Endo,
    pub f2: Endo,
    pub f3: Endo,
    pub f4: Endo,
    pub f6: Endo,
    /// Q = -f^2 - I.
    pub q: Endo,
    pub q2: Endo,
    pub q3: Endo,
    /// P = I - f^2, invertible by the SingularP guard.
    pub p: Endo,
    pub p_inv: Endo,
    /// (nabla^g F)[l][i][j].
    pub nabla_f: Tensor3,
    /// dF, totally skew.
    pub df_ext: Tensor3,
    pub kernel: KernelSplit,
}

impl PointGeometry {
    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    /// (nabla^g_v F)(.,.) for a coordinate vector v.
    pub fn nabla_f_dir(&self, v: &[f64]) -> Tensor2 {
        self.nabla_f.vec0(v)
    }

    /// sup |f^2 + I|: zero exactly on almost Hermitian charts.
    pub fn hermitian_defect(&self) -> f64 {
        self.f2.add(&Endo::identity(self.dim())).sup_norm()
    }
}

/// Evaluates the fields at p and assembles the derived-operator pack.
pub fn point_geometry(
    fields: &StructureFields,
    p: &ChartPoint,
    kernel_eps: f64,
) -> Result<PointGeometry> {
    if p.dim() != fields.dim() {
        return Err(Error::DimensionMismatch(format!(
            "point dim {} vs fields dim {}",
            p.dim(),
            fields.dim()
        )));
    }
    let d = fields.dim();
    let g = fields.g_at(p);
    let dg = fields.dg_at(p);
    let big_f = fields.f_form_at(p);
    let df_partials = fields.df_form_at(p);
    if !g.is_finite() || !big_f.is_finite() || !dg.is_finite() || !df_partials.is_finite() {
        return Err(Error::NonFinite("structure fields"));
    }
    if g.asymmetry() > 1e-12 {
        return Err(Error::StructureMismatch { what: "metric symmetry", residual: g.asymmetry() });
    }
    let f_scale = big_f.sup_norm().max(1.0);
    if big_f.skew_residual() > 1e-10 * f_scale {
        return Err(Error::StructureMismatch {
            what: "F skewness",
            residual: big_f.skew_residual(),
        });
    }

    let g_inv = invert_metric(&g)?;
    let gamma = christoffel_from_parts(&g, &dg)?;
    let nabla_f = nabla_f_from_parts(&g, &dg, &big_f, &df_partials, &gamma)?;
    let df_ext = exterior_df_from_partials(&df_partials);
    let f = raise_endo(&big_f, &g)?;
    let f2 = f.compose(&f);
    let f3 = f2.compose(&f);
    let f4 = f2.compose(&f2);
    let f6 = f4.compose(&f2);
    let ident = Endo::identity(d);
    let q = f2.scale(-1.0).sub(&ident);
    let q2 = q.compose(&q);
    let q3 = q2.compose(&q);
    let p_mat = ident.sub(&f2);
    let p_det = p_mat.to_dmatrix().determinant();
    if p_det.abs() < 1e-12 {
        return Err(Error::SingularP(p_det));
    }
    let p_inv = Endo::from_dmatrix(
        &p_mat
            .to_dmatrix()
            .try_inverse()
            .ok_or(Error::SingularP(p_det))?,
    );
    let kernel = build_kernel_split(&f2, &f6, &g, kernel_eps)?;

    Ok(PointGeometry {
        point: p.clone(),
        signature: fields.signature().to_vec(),
        g,
        g_inv,
        dg,
        big_f,
        df_partials,
        gamma,
        f,
        f2,
        f3,
        f4,
        f6,
        q,
        q2,
        q3,
        p: p_mat,
        p_inv,
        nabla_f,
        df_ext,
        kernel,
    })
}

/// Finite-difference validation of the supplied analytic partials.
#[derive(Debug, Clone)]
pub struct FdCheck {
    /// Relative deviation of dg from central differences of g.
    pub g_residual: f64,
    /// Relative deviation of dF from central differences of F.
    pub f_residual: f64,
}

impl FdCheck {
    pub fn max_residual(&self) -> f64 {
        self.g_residual.max(self.f_residual)
    }
}

/// Central finite differences with step h against the analytic partials.
/// Validation only; no derivative used by the library is ever computed this
/// way. Deviations are reported relative to max(1, sup |analytic partial|).
pub fn fd_validate(fields: &StructureFields, p: &ChartPoint, h: f64) -> Result<FdCheck> {
    let d = fields.dim();
    let dg = fields.dg_at(p);
    let df = fields.df_form_at(p);
    let g_scale = dg.sup_norm().max(1.0);
    let f_scale = df.sup_norm().max(1.0);
    let mut g_res = 0.0f64;
    let mut f_res = 0.0f64;
    for l in 0..d {
        let plus = p.shifted(l, h);
        let minus = p.shifted(l, -h);
        let g_fd = fields.g_at(&plus).sub(&fields.g_at(&minus)).scale(0.5 / h);
        let f_fd = fields
            .f_form_at(&plus)
            .sub(&fields.f_form_at(&minus))
            .scale(0.5 / h);
        for i in 0..d {
            for j in 0..d {
                g_res = g_res.max((g_fd.get(i, j) - dg.get(l, i, j)).abs());
                f_res = f_res.max((f_fd.get(i, j) - df.get(l, i, j)).abs());
            }
        }
    }
    Ok(FdCheck { g_residual: g_res / g_scale, f_residual: f_res / f_scale })
}
