//! Concrete chart families with exact analytic derivatives.
//!
//! Every instance supplies g, F and their coordinate partials in closed
//! form; nothing here is differentiated numerically. The registry covers
//! the structure classes exercised by the suites: flat Kaehler, almost
//! Hermitian with rotating J (flat and conformal metric), weighted products
//! of Hermitian factors, an almost-contact product with parallel Reeb field,
//! the standard contact chart on R^5 (Reeb not parallel, used as a negative
//! control), conformally scaled f with f^2 = -a^2 I, an f with a genuine
//! kernel block, and a constant Lorentz-signature chart.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{ChartPoint, Field2, Field3, PointGeometry, StructureFields};
use crate::tensor::{raise_endo, Endo, Tensor2, Tensor3};

/// Eigenvalue threshold below which an f^2-eigenvector counts as kernel.
pub const DEFAULT_KERNEL_EPS: f64 = 1e-10;

/// Chart-coordinate function yielding a vector (field components).
type VecField = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
/// Chart-coordinate function yielding an endomorphism.
type EndoField = Box<dyn Fn(&[f64]) -> Endo + Send + Sync>;

/// Descriptor of a registered chart family with its default parameters.
#[derive(Debug, Clone, Serialize)]
pub struct ManifoldSpec {
    pub name: String,
    pub dim: usize,
    pub params: BTreeMap<String, f64>,
    pub summary: String,
    /// f^2 = -I everywhere on the chart.
    pub almost_hermitian: bool,
    pub has_reeb: bool,
    /// ker f is nontrivial somewhere on the chart.
    pub has_kernel: bool,
}

/// Reeb field data (xi, eta) with exact coordinate partials.
pub struct ReebField {
    xi: VecField,
    /// dxi[k][l] = d_l xi^k.
    dxi: EndoField,
    eta: VecField,
    /// deta[l][j] = d_l eta_j.
    deta: Field2,
}

impl ReebField {
    pub fn xi_at(&self, p: &ChartPoint) -> Vec<f64> {
        (self.xi)(p.coords())
    }
    pub fn eta_at(&self, p: &ChartPoint) -> Vec<f64> {
        (self.eta)(p.coords())
    }
}

/// Reeb data evaluated at a point, with Levi-Civita covariant derivatives.
#[derive(Debug, Clone)]
pub struct ReebAtPoint {
    pub xi: Vec<f64>,
    pub eta: Vec<f64>,
    /// nabla_a xi^k stored as [k][a].
    pub nabla_xi: Endo,
    /// nabla_a eta_j stored as [a][j].
    pub nabla_eta: Tensor2,
}

impl ReebAtPoint {
    /// sup |nabla xi|: zero iff the Reeb field is parallel.
    pub fn parallel_defect(&self) -> f64 {
        self.nabla_xi.sup_norm()
    }
}

/// Evaluates a Reeb field at the point of `geom` including its covariant
/// derivatives with respect to the Levi-Civita connection.
pub fn reeb_at(reeb: &ReebField, geom: &PointGeometry) -> ReebAtPoint {
    let d = geom.dim();
    let x = geom.point.coords();
    let xi = (reeb.xi)(x);
    let eta = (reeb.eta)(x);
    let dxi = (reeb.dxi)(x);
    let deta = (reeb.deta)(x);
    let nabla_xi = Endo::from_fn(d, |k, a| {
        let mut s = dxi.get(k, a);
        for m in 0..d {
            s += geom.gamma.get(k, a, m) * xi[m];
        }
        s
    });
    let nabla_eta = Tensor2::from_fn(d, |a, j| {
        let mut s = deta.get(a, j);
        for m in 0..d {
            s -= geom.gamma.get(m, a, j) * eta[m];
        }
        s
    });
    ReebAtPoint { xi, eta, nabla_xi, nabla_eta }
}

/// A Hermitian factor embedded in a product chart.
pub struct Factor {
    /// First global coordinate of the factor block.
    pub offset: usize,
    pub dim: usize,
    /// Weight of the factor 2-form: f restricted to the block is
    /// sqrt(lambda) times a complex structure.
    pub lambda: f64,
    /// The factor as a standalone chart in its own coordinates.
    pub fields: StructureFields,
}

/// An instantiated chart family.
pub struct Manifold {
    pub spec: ManifoldSpec,
    pub fields: StructureFields,
    pub reeb: Option<ReebField>,
    pub factors: Vec<Factor>,
}

type Mat4 = [[f64; 4]; 4];

const J0: Mat4 = [
    [0.0, -1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, 1.0, 0.0],
];

/// Skew generator of a rotation in the (1,2) coordinate plane; chosen not to
/// commute with J0 so the rotated structure actually varies.
const GEN: Mat4 = [
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, -1.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0],
];

fn mat_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn mat_sub(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[i][j] - b[i][j];
        }
    }
    out
}

fn rot(theta: f64) -> Mat4 {
    let (s, c) = theta.sin_cos();
    let mut r = [[0.0; 4]; 4];
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    r[1][1] = c;
    r[2][2] = c;
    r[1][2] = -s;
    r[2][1] = s;
    r
}

fn transpose(a: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i][j] = a[j][i];
        }
    }
    out
}

/// phi(theta) = R J0 R^T for R = exp(theta * GEN).
fn rotated_j(theta: f64) -> Mat4 {
    let r = rot(theta);
    mat_mul(&mat_mul(&r, &J0), &transpose(&r))
}

/// d/dtheta of rotated_j = GEN . phi - phi . GEN.
fn rotated_j_deriv(theta: f64) -> Mat4 {
    let phi = rotated_j(theta);
    mat_sub(&mat_mul(&GEN, &phi), &mat_mul(&phi, &GEN))
}

fn embed_block(dim: usize, offset: usize, block: &Mat4, scale: f64) -> Tensor2 {
    Tensor2::from_fn(dim, |i, j| {
        if i >= offset && i < offset + 4 && j >= offset && j < offset + 4 {
            scale * block[i - offset][j - offset]
        } else {
            0.0
        }
    })
}

fn euclidean(dim: usize) -> Tensor2 {
    Tensor2::from_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
}

fn constant2(t: Tensor2) -> Field2 {
    Box::new(move |_| t.clone())
}

fn zero3(dim: usize) -> Field3 {
    Box::new(move |_| Tensor3::zeros(dim))
}

fn merge_params(
    name: &str,
    defaults: &[(&str, f64)],
    overrides: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, f64>> {
    let mut out: BTreeMap<String, f64> = defaults
        .iter()
        .map(|(k, v)| (k.to_string(), *v))
        .collect();
    for (k, v) in overrides {
        if !out.contains_key(k) {
            return Err(Error::InvalidParam(format!("{name} has no parameter '{k}'")));
        }
        if !v.is_finite() {
            return Err(Error::InvalidParam(format!("{name}: {k} must be finite")));
        }
        out.insert(k.clone(), *v);
    }
    Ok(out)
}

/// The flat chart with constant J0: nabla F = 0, dF = 0, zero torsion.
fn kaehler_flat() -> Manifold {
    let dim = 4;
    let f = embed_block(dim, 0, &J0, 1.0);
    Manifold {
        spec: ManifoldSpec {
            name: "kaehler_flat".into(),
            dim,
            params: BTreeMap::new(),
            summary: "flat metric, constant complex structure; every torsion vanishes".into(),
            almost_hermitian: true,
            has_reeb: false,
            has_kernel: false,
        },
        fields: StructureFields::new(
            dim,
            vec![1; dim],
            constant2(euclidean(dim)),
            zero3(dim),
            constant2(f),
            zero3(dim),
        ),
        reeb: None,
        factors: Vec::new(),
    }
}

fn hermitian_rotated_fields(dim_total: usize, offset: usize, drive: usize, freq: f64) -> StructureFields {
    let f_form = move |x: &[f64]| {
        let phi = rotated_j(freq * x[drive]);
        embed_block(dim_total, offset, &phi, 1.0)
    };
    let df_form = move |x: &[f64]| {
        let dphi = rotated_j_deriv(freq * x[drive]);
        let block = embed_block(dim_total, offset, &dphi, freq);
        Tensor3::from_fn(dim_total, |l, i, j| if l == drive { block.get(i, j) } else { 0.0 })
    };
    StructureFields::new(
        dim_total,
        vec![1; dim_total],
        constant2(euclidean(dim_total)),
        zero3(dim_total),
        Box::new(f_form),
        Box::new(df_form),
    )
}

/// Flat metric with J(x) = R(x) J0 R(x)^T, R = exp(freq * x_0 * GEN):
/// genuinely non-Kaehler (nabla F != 0) but still f^2 = -I.
fn hermitian_rotated(params: &BTreeMap<String, f64>) -> Result<Manifold> {
    let params = merge_params("hermitian_rotated_J", &[("freq", 1.0)], params)?;
    let freq = params["freq"];
    Ok(Manifold {
        spec: ManifoldSpec {
            name: "hermitian_rotated_J".into(),
            dim: 4,
            params,
            summary: "flat metric, x0-rotated complex structure; nabla F != 0".into(),
            almost_hermitian: true,
            has_reeb: false,
            has_kernel: false,
        },
        fields: hermitian_rotated_fields(4, 0, 0, freq),
        reeb: None,
        factors: Vec::new(),
    })
}

/// Conformal metric e^{2c x0} delta with an x1-rotated complex structure;
/// exercises nonzero Christoffel symbols through every derived operator.
fn hermitian_conformal(params: &BTreeMap<String, f64>) -> Result<Manifold> {
    let params = merge_params("hermitian_conformal", &[("c", 0.3), ("freq", 1.0)], params)?;
    let c = params["c"];
    let freq = params["freq"];
    let dim = 4;
    let g = move |x: &[f64]| euclidean(dim).scale((2.0 * c * x[0]).exp());
    let dg = move |x: &[f64]| {
        let w = 2.0 * c * (2.0 * c * x[0]).exp();
        Tensor3::from_fn(dim, |l, i, j| if l == 0 && i == j { w } else { 0.0 })
    };
    let f_form = move |x: &[f64]| {
        let phi = rotated_j(freq * x[1]);
        embed_block(dim, 0, &phi, (2.0 * c * x[0]).exp())
    };
    let df_form = move |x: &[f64]| {
        let e = (2.0 * c * x[0]).exp();
        let phi = embed_block(dim, 0, &rotated_j(freq * x[1]), 1.0);
        let dphi = embed_block(dim, 0, &rotated_j_deriv(freq * x[1]), 1.0);
        Tensor3::from_fn(dim, |l, i, j| match l {
            0 => 2.0 * c * e * phi.get(i, j),
            1 => freq * e * dphi.get(i, j),
            _ => 0.0,
        })
    };
    Ok(Manifold {
        spec: ManifoldSpec {
            name: "hermitian_conformal".into(),
            dim,
            params,
            summary: "conformally flat metric with rotated complex structure".into(),
            almost_hermitian: true,
            has_reeb: false,
            has_kernel: false,
        },
        fields: StructureFields::new(
            dim,
            vec![1; dim],
            Box::new(g),
            Box::new(dg),
            Box::new(f_form),
            Box::new(df_form),
        ),
        reeb: None,
        factors: Vec::new(),
    })
}

fn weighted_factor_fields(lambda: f64, freq: f64) -> StructureFields {
    let dim = 4;
    let root = lambda.sqrt();
    let f_form = move |x: &[f64]| embed_block(dim, 0, &rotated_j(freq * x[0]), root);
    let df_form = move |x: &[f64]| {
        let block = embed_block(dim, 0, &rotated_j_deriv(freq * x[0]), root * freq);
        Tensor3::from_fn(dim, |l, i, j| if l == 0 { block.get(i, j) } else { 0.0 })
    };
    StructureFields::new(
        dim,
        vec![1; dim],
        constant2(euclidean(dim)),
        zero3(dim),
        Box::new(f_form),
        Box::new(df_form),
    )
}

/// Two Hermitian blocks with weights: f = sqrt(l1) J(x0) + sqrt(l2) J(x4);
/// f^2 = -l1 / -l2 blockwise, so the f^2-type torsion condition is the
/// natural setting and the weighted per-factor formula applies.
fn weighted_product(params: &BTreeMap<String, f64>) -> Result<Manifold> {
    let params = merge_params(
        "weighted_product",
        &[("lambda1", 2.0), ("lambda2", 3.0), ("freq1", 1.0), ("freq2", 0.7)],
        params,
    )?;
    let (l1, l2) = (params["lambda1"], params["lambda2"]);
    if l1 <= 0.0 || l2 <= 0.0 {
        return Err(Error::InvalidParam("weighted_product: lambdas must be > 0".into()));
    }
    let (fr1, fr2) = (params["freq1"], params["freq2"]);
    let dim = 8;
    let f_form = move |x: &[f64]| {
        let b1 = embed_block(dim, 0, &rotated_j(fr1 * x[0]), l1.sqrt());
        let b2 = embed_block(dim, 4, &rotated_j(fr2 * x[4]), l2.sqrt());
        b1.add(&b2)
    };
    let df_form = move |x: &[f64]| {
        let d1 = embed_block(dim, 0, &rotated_j_deriv(fr1 * x[0]), l1.sqrt() * fr1);
        let d2 = embed_block(dim, 4, &rotated_j_deriv(fr2 * x[4]), l2.sqrt() * fr2);
        Tensor3::from_fn(dim, |l, i, j| match l {
            0 => d1.get(i, j),
            4 => d2.get(i, j),
            _ => 0.0,
        })
    };
    Ok(Manifold {
        spec: ManifoldSpec {
            name: "weighted_product".into(),
            dim,
            params: params.clone(),
            summary: "product of two rotated Hermitian blocks with weights lambda1, lambda2"
                .into(),
            almost_hermitian: (l1 - 1.0).abs() < 1e-14 && (l2 - 1.0).abs() < 1e-14,
            has_reeb: false,
            has_kernel: false,
        },
        fields: StructureFields::new(
            dim,
            vec![1; dim],
            constant2(euclidean(dim)),
            zero3(dim),
            Box::new(f_form),
            Box::new(df_form),
        ),
        reeb: None,
        factors: vec![
            Factor { offset: 0, dim: 4, lambda: l1, fields: weighted_factor_fields(l1, fr1) },
            Factor { offset: 4, dim: 4, lambda: l2, fields: weighted_factor_fields(l2, fr2) },
        ],
    })
}

/// R x (rotated Hermitian chart): f kills d/dt, xi = d/dt is parallel, and
/// the horizontal block carries the Hermitian structure.
fn acm_product(params: &BTreeMap<String, f64>) -> Result<Manifold> {
    let params = merge_params("acm_product", &[("freq", 1.0)], params)?;
    let freq = params["freq"];
    let dim = 5;
    let reeb = ReebField {
        xi: Box::new(move |_| {
            let mut v = vec![0.0; 5];
            v[0] = 1.0;
            v
        }),
        dxi: Box::new(move |_| Endo::zeros(5)),
        eta: Box::new(move |_| {
            let mut v = vec![0.0; 5];
            v[0] = 1.0;
            v
        }),
        deta: Box::new(move |_| Tensor2::zeros(5)),
    };
    Ok(Manifold {
        spec: ManifoldSpec {
            name: "acm_product".into(),
            dim,
            params: params.clone(),
            summary: "R x Hermitian product with parallel Reeb field xi = d/dt".into(),
            almost_hermitian: false,
            has_reeb: true,
            has_kernel: true,
        },
        fields: hermitian_rotated_fields(dim, 1, 1, freq),
        reeb: Some(reeb),
        factors: vec![Factor {
            offset: 1,
            dim: 4,
            lambda: 1.0,
            fields: hermitian_rotated_fields(4, 0, 0, freq),
        }],
    })
}

/// The standard contact metric chart on R^5 (Darboux coordinates):
/// eta = (dz - y1 dx1 - y2 dx2)/2, g = eta (x) eta + (dx^2 + dy^2)/4.
/// Its Reeb field is Killing but not parallel, so it serves as the
/// negative control for the parallel-Reeb precondition.
fn contact_r5() -> Manifold {
    let dim = 5;
    let eta_at = |x: &[f64]| vec![-x[2] / 2.0, -x[3] / 2.0, 0.0, 0.0, 0.5];
    let g = move |x: &[f64]| {
        let eta = eta_at(x);
        Tensor2::from_fn(dim, |i, j| {
            let flat = if i == j && i < 4 { 0.25 } else { 0.0 };
            flat + eta[i] * eta[j]
        })
    };
    let dg = move |x: &[f64]| {
        let eta = eta_at(x);
        // d eta_0 / d x2 = -1/2, d eta_1 / d x3 = -1/2, others constant.
        let mut deta = Tensor2::zeros(dim);
        deta.set(2, 0, -0.5);
        deta.set(3, 1, -0.5);
        Tensor3::from_fn(dim, |l, i, j| deta.get(l, i) * eta[j] + eta[i] * deta.get(l, j))
    };
    let mut f0 = Tensor2::zeros(dim);
    f0.set(0, 2, 0.25);
    f0.set(2, 0, -0.25);
    f0.set(1, 3, 0.25);
    f0.set(3, 1, -0.25);
    let reeb = ReebField {
        xi: Box::new(move |_| vec![0.0, 0.0, 0.0, 0.0, 2.0]),
        dxi: Box::new(move |_| Endo::zeros(5)),
        eta: Box::new(move |x| vec![-x[2] / 2.0, -x[3] / 2.0, 0.0, 0.0, 0.5]),
        deta: Box::new(move |_| {
            let mut t = Tensor2::zeros(5);
            t.set(2, 0, -0.5);
            t.set(3, 1, -0.5);
            t
        }),
    };
    Manifold {
        spec: ManifoldSpec {
            name: "contact_r5".into(),
            dim,
            params: BTreeMap::new(),
            summary: "standard contact metric chart on R^5; Reeb field not parallel".into(),
            almost_hermitian: false,
            has_reeb: true,
            has_kernel: true,
        },
        fields: StructureFields::new(
            dim,
            vec![1; dim],
            Box::new(g),
            Box::new(dg),
            constant2(f0),
            zero3(dim),
        ),
        reeb: Some(reeb),
        factors: Vec::new(),
    }
}

/// f = a(x) J0 with a = exp(c x0 + d x1): f^2 = -a^2 I, so neither the
/// Hermitian nor the weighted hypotheses hold; the solvability oracle
/// decides pointwise whether a compatible connection exists.
fn weak_conformal_f(params: &BTreeMap<String, f64>) -> Result<Manifold> {
    let params = merge_params("weak_conformal_f", &[("c", 0.4), ("d", 0.25)], params)?;
    let c = params["c"];
    let d = params["d"];
    let dim = 4;
    let f_form = move |x: &[f64]| embed_block(dim, 0, &J0, (c * x[0] + d * x[1]).exp());
    let df_form = move |x: &[f64]| {
        let a = (c * x[0] + d * x[1]).exp();
        let block = embed_block(dim, 0, &J0, a);
        Tensor3::from_fn(dim, |l, i, j| match l {
            0 => c * block.get(i, j),
            1 => d * block.get(i, j),
            _ => 0.0,
        })
    };
    Ok(Manifold {
        spec: ManifoldSpec {
            name: "weak_conformal_f".into(),
            dim,
            params,
            summary: "f = a(x) J0 with f^2 = -a^2 I; existence left to the oracle".into(),
            almost_hermitian: false,
            has_reeb: false,
            has_kernel: false,
        },
        fields: StructureFields::new(
            dim,
            vec![1; dim],
            constant2(euclidean(dim)),
            zero3(dim),
            Box::new(f_form),
            Box::new(df_form),
        ),
        reeb: None,
        factors: Vec::new(),
    })
}

/// f = a(x) J0 on the first four axes, zero on the last two. The scale a
/// depends on a kernel coordinate, which makes torsion in kernel directions
/// genuinely nonzero and exercises the singular branch of the weak solution.
fn f_with_kernel(params: &BTreeMap<String, f64>) -> Result<Manifold> {
    let params = merge_params("f_with_kernel", &[("c", 0.4)], params)?;
    let c = params["c"];
    let dim = 6;
    let scale_at = move |x: &[f64]| (c * (x[4] + 0.5 * x[0])).exp();
    let f_form = move |x: &[f64]| embed_block(dim, 0, &J0, scale_at(x));
    let df_form = move |x: &[f64]| {
        let block = embed_block(dim, 0, &J0, scale_at(x));
        Tensor3::from_fn(dim, |l, i, j| match l {
            0 => 0.5 * c * block.get(i, j),
            4 => c * block.get(i, j),
            _ => 0.0,
        })
    };
    Ok(Manifold {
        spec: ManifoldSpec {
            name: "f_with_kernel".into(),
            dim,
            params,
            summary: "a(x) J0 on four axes plus a two-dimensional kernel block".into(),
            almost_hermitian: false,
            has_reeb: false,
            has_kernel: true,
        },
        fields: StructureFields::new(
            dim,
            vec![1; dim],
            constant2(euclidean(dim)),
            zero3(dim),
            Box::new(f_form),
            Box::new(df_form),
        ),
        reeb: None,
        factors: Vec::new(),
    })
}

/// Constant Lorentz-signature chart; exercises the indefinite-metric paths
/// with all derivatives zero, so every torsion must vanish.
fn lorentz_flat() -> Manifold {
    let dim = 4;
    let g = Tensor2::from_fn(dim, |i, j| match (i, j) {
        (0, 0) => -1.0,
        (i, j) if i == j => 1.0,
        _ => 0.0,
    });
    let mut f = Tensor2::zeros(dim);
    f.set(0, 1, 0.5);
    f.set(1, 0, -0.5);
    f.set(2, 3, 1.0);
    f.set(3, 2, -1.0);
    Manifold {
        spec: ManifoldSpec {
            name: "lorentz_flat".into(),
            dim,
            params: BTreeMap::new(),
            summary: "constant (-+++) metric with constant F; zero torsion".into(),
            almost_hermitian: false,
            has_reeb: false,
            has_kernel: false,
        },
        fields: StructureFields::new(
            dim,
            vec![-1, 1, 1, 1],
            constant2(g),
            zero3(dim),
            constant2(f),
            zero3(dim),
        ),
        reeb: None,
        factors: Vec::new(),
    }
}

/// All registered families with their default parameters, in the fixed
/// order used by reports.
pub fn registry() -> Vec<ManifoldSpec> {
    let empty = BTreeMap::new();
    vec![
        kaehler_flat().spec,
        hermitian_rotated(&empty).expect("defaults").spec,
        hermitian_conformal(&empty).expect("defaults").spec,
        weighted_product(&empty).expect("defaults").spec,
        acm_product(&empty).expect("defaults").spec,
        contact_r5().spec,
        weak_conformal_f(&empty).expect("defaults").spec,
        f_with_kernel(&empty).expect("defaults").spec,
        lorentz_flat().spec,
    ]
}

/// Builds a chart family by name; `params` override the registered defaults
/// and unknown keys are rejected.
pub fn instantiate(name: &str, params: &BTreeMap<String, f64>) -> Result<Manifold> {
    match name {
        "kaehler_flat" => Ok(kaehler_flat()),
        "hermitian_rotated_J" => hermitian_rotated(params),
        "hermitian_conformal" => hermitian_conformal(params),
        "weighted_product" => weighted_product(params),
        "acm_product" => acm_product(params),
        "contact_r5" => Ok(contact_r5()),
        "weak_conformal_f" => weak_conformal_f(params),
        "f_with_kernel" => f_with_kernel(params),
        "lorentz_flat" => Ok(lorentz_flat()),
        _ => Err(Error::UnknownManifold(name.to_string())),
    }
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Seeded chart points, uniform in [-1, 1]^dim, with rejection of
/// numerically unusable draws: near-degenerate metric, or (for charts with
/// a kernel) f^2-eigenvalues inside the ambiguous band
/// [kernel_eps, sqrt(kernel_eps)] where the kernel split is ill-defined.
pub fn sample_points(m: &Manifold, count: usize, seed: u64) -> Result<Vec<ChartPoint>> {
    let dim = m.spec.dim;
    let stream = seed ^ fnv1a(&m.spec.name).rotate_left(17);
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let mut points = Vec::with_capacity(count);
    let max_draws = 10 * count.max(1);
    let mut drawn = 0;
    while points.len() < count && drawn < max_draws {
        drawn += 1;
        let coords: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let p = ChartPoint::new(coords)?;
        if accept_point(m, &p) {
            points.push(p);
        }
    }
    if points.len() < count {
        return Err(Error::SamplingExhausted { rejected: drawn - points.len(), drawn });
    }
    Ok(points)
}

fn accept_point(m: &Manifold, p: &ChartPoint) -> bool {
    let g = m.fields.g_at(p);
    if !g.is_finite() || g.det().abs() < 1e-6 {
        return false;
    }
    if m.spec.has_kernel {
        let Ok(f) = raise_endo(&m.fields.f_form_at(p), &g) else {
            return false;
        };
        let f2 = f.compose(&f);
        let svd = f2.to_dmatrix().svd(false, false);
        let lo = DEFAULT_KERNEL_EPS;
        let hi = DEFAULT_KERNEL_EPS.sqrt();
        if svd.singular_values.iter().any(|s| *s >= lo && *s <= hi) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::point_geometry;

    #[test]
    fn rotated_j_squares_to_minus_identity() {
        let phi = rotated_j(0.7);
        let sq = mat_mul(&phi, &phi);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { -1.0 } else { 0.0 };
                assert!((sq[i][j] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn contact_r5_satisfies_almost_contact_relations() {
        let m = contact_r5();
        let p = ChartPoint::new(vec![0.3, -0.2, 0.5, 0.1, -0.4]).unwrap();
        let geom = point_geometry(&m.fields, &p, DEFAULT_KERNEL_EPS).unwrap();
        let reeb = m.reeb.as_ref().unwrap();
        let xi = reeb.xi_at(&p);
        let eta = reeb.eta_at(&p);
        // eta(xi) = 1 and eta = g(xi, .)
        let pairing: f64 = (0..5).map(|i| eta[i] * xi[i]).sum();
        assert!((pairing - 1.0).abs() < 1e-12);
        for j in 0..5 {
            let lowered: f64 = (0..5).map(|i| geom.g.get(j, i) * xi[i]).sum();
            assert!((lowered - eta[j]).abs() < 1e-12);
        }
        // f^2 = -I + eta (x) xi
        for k in 0..5 {
            for j in 0..5 {
                let want = if k == j { -1.0 } else { 0.0 } + xi[k] * eta[j];
                assert!((geom.f2.get(k, j) - want).abs() < 1e-12);
            }
        }
        // g(fX, fY) = g(X, Y) - eta(X) eta(Y)
        let gff = geom.g.pullback(&geom.f, &geom.f);
        for i in 0..5 {
            for j in 0..5 {
                let want = geom.g.get(i, j) - eta[i] * eta[j];
                assert!((gff.get(i, j) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_per_seed_and_name() {
        let m = kaehler_flat();
        let a = sample_points(&m, 5, 7).unwrap();
        let b = sample_points(&m, 5, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_points(&m, 5, 8).unwrap();
        assert_ne!(a, c);
    }
}
