//! Python view of the chart catalog, the pointwise oracle and the identity
//! battery. Tensors cross the boundary as nested lists in the chart basis;
//! everything heavy stays on the Rust side.

use std::collections::BTreeMap;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use torsion_lab::catalog::{
    instantiate, reeb_at, registry, sample_points, Manifold, ReebAtPoint, DEFAULT_KERNEL_EPS,
};
use torsion_lab::connection::{
    assemble_connection, torsion_from_df, torsion_hermitian, torsion_special, torsion_weak,
    TorsionAtPoint,
};
use torsion_lab::fields::{fd_validate, point_geometry, ChartPoint, PointGeometry};
use torsion_lab::identities::{eval_identity, EvalInput, IdentityId};
use torsion_lab::oracle::solve_einstein_pointwise;
use torsion_lab::tensor::{Endo, Tensor2, Tensor3};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn mat2(t: &Tensor2) -> Vec<Vec<f64>> {
    let d = t.dim();
    (0..d).map(|i| (0..d).map(|j| t.get(i, j)).collect()).collect()
}

fn mat_endo(t: &Endo) -> Vec<Vec<f64>> {
    let d = t.dim();
    (0..d).map(|i| (0..d).map(|j| t.get(i, j)).collect()).collect()
}

fn cube(t: &Tensor3) -> Vec<Vec<Vec<f64>>> {
    let d = t.dim();
    (0..d)
        .map(|x| (0..d).map(|y| (0..d).map(|z| t.get(x, y, z)).collect()).collect())
        .collect()
}

fn cube_to_tensor(v: &[Vec<Vec<f64>>], dim: usize) -> PyResult<Tensor3> {
    let bad = v.len() != dim
        || v.iter().any(|p| p.len() != dim || p.iter().any(|r| r.len() != dim));
    if bad {
        return Err(err(format!("expected a {dim}x{dim}x{dim} nested list")));
    }
    Ok(Tensor3::from_fn(dim, |x, y, z| v[x][y][z]))
}

/// One chart family instance; the entry point for everything else.
#[pyclass(module = "torsion_lab_py")]
struct Chart {
    m: Arc<Manifold>,
}

#[pymethods]
impl Chart {
    #[new]
    #[pyo3(signature = (name, params = None))]
    fn new(name: &str, params: Option<BTreeMap<String, f64>>) -> PyResult<Self> {
        let m = instantiate(name, &params.unwrap_or_default()).map_err(err)?;
        Ok(Self { m: Arc::new(m) })
    }

    #[getter]
    fn name(&self) -> String {
        self.m.spec.name.clone()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.m.spec.dim
    }

    #[getter]
    fn params(&self) -> BTreeMap<String, f64> {
        self.m.spec.params.clone()
    }

    #[getter]
    fn summary(&self) -> String {
        self.m.spec.summary.clone()
    }

    /// Seeded interior points, as coordinate lists.
    fn sample(&self, count: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        let pts = sample_points(&self.m, count, seed).map_err(err)?;
        Ok(pts.iter().map(|p| p.coords().to_vec()).collect())
    }

    /// Evaluate the structure fields and derived operators at one point.
    fn geometry(&self, coords: Vec<f64>) -> PyResult<Geometry> {
        let p = ChartPoint::new(coords).map_err(err)?;
        let geom = point_geometry(&self.m.fields, &p, DEFAULT_KERNEL_EPS).map_err(err)?;
        let reeb = self.m.reeb.as_ref().map(|r| reeb_at(r, &geom));
        Ok(Geometry { geom, reeb })
    }

    /// Central-difference residual of the registered analytic partials.
    #[pyo3(signature = (coords, step = 1e-5))]
    fn validate_partials(&self, coords: Vec<f64>, step: f64) -> PyResult<f64> {
        let p = ChartPoint::new(coords).map_err(err)?;
        Ok(fd_validate(&self.m.fields, &p, step).map_err(err)?.max_residual())
    }

    fn __repr__(&self) -> String {
        format!("Chart('{}', dim={})", self.m.spec.name, self.m.spec.dim)
    }
}

/// All derived data at one chart point.
#[pyclass(module = "torsion_lab_py")]
struct Geometry {
    geom: PointGeometry,
    reeb: Option<ReebAtPoint>,
}

impl Geometry {
    fn formula_torsion(&self, formula: &str) -> PyResult<TorsionAtPoint> {
        match formula {
            "hermitian" => torsion_hermitian(&self.geom).map_err(err),
            "weak" => torsion_weak(&self.geom).map_err(err),
            "special" => Ok(torsion_special(&self.geom)),
            "df" => Ok(torsion_from_df(&self.geom, 1.0)),
            other => Err(err(format!(
                "unknown formula '{other}' (expected hermitian, weak, special or df)"
            ))),
        }
    }
}

#[pymethods]
impl Geometry {
    #[getter]
    fn dim(&self) -> usize {
        self.geom.dim()
    }

    #[getter]
    fn coords(&self) -> Vec<f64> {
        self.geom.point.coords().to_vec()
    }

    /// Metric components g_ij.
    fn metric(&self) -> Vec<Vec<f64>> {
        mat2(&self.geom.g)
    }

    /// Structure endomorphism f^k_j.
    fn structure(&self) -> Vec<Vec<f64>> {
        mat_endo(&self.geom.f)
    }

    /// The 2-form F_ij = g(f., .).
    fn fundamental_form(&self) -> Vec<Vec<f64>> {
        mat2(&self.geom.big_f)
    }

    /// (nabla^g F) with the derivative direction in slot 0.
    fn nabla_f(&self) -> Vec<Vec<Vec<f64>>> {
        cube(&self.geom.nabla_f)
    }

    /// Exterior derivative dF, totally skew.
    fn df(&self) -> Vec<Vec<Vec<f64>>> {
        cube(&self.geom.df_ext)
    }

    /// sup |f^2 + I|; zero exactly on almost Hermitian charts.
    fn hermitian_defect(&self) -> f64 {
        self.geom.hermitian_defect()
    }

    /// Decide existence of a compatible connection by solving the defining
    /// equation pointwise, with no formula input.
    fn solve(&self) -> PyResult<Oracle> {
        let s = solve_einstein_pointwise(&self.geom).map_err(err)?;
        Ok(Oracle {
            contorsion: cube(&s.contorsion),
            torsion: cube(&s.torsion.tensor),
            system_residual: s.system_residual,
            unique: s.unique,
            consistent: s.consistent(),
            sv_min: s.sv_min,
            sv_max: s.sv_max,
            f2_condition: s.f2_condition,
            f_condition: s.f_condition,
            s1_condition: s.s1_condition,
        })
    }

    /// Closed-form torsion candidate: 'hermitian', 'weak', 'special' or 'df'.
    fn torsion(&self, formula: &str) -> PyResult<Vec<Vec<Vec<f64>>>> {
        Ok(cube(&self.formula_torsion(formula)?.tensor))
    }

    /// sup residual of the defining equation for the connection built from
    /// the given torsion.
    fn metricity(&self, torsion: Vec<Vec<Vec<f64>>>) -> PyResult<f64> {
        let t = cube_to_tensor(&torsion, self.geom.dim())?;
        let at = TorsionAtPoint {
            source: torsion_lab::connection::TorsionSource::WeakF2,
            tensor: t,
            asymmetry: 0.0,
        };
        Ok(assemble_connection(&self.geom, &at).metricity_residual)
    }

    /// Evaluate one identity; returns (status, residual, skip_reason).
    #[pyo3(signature = (identity, torsion = None, contorsion = None, tol = 1e-8))]
    fn check(
        &self,
        identity: &str,
        torsion: Option<Vec<Vec<Vec<f64>>>>,
        contorsion: Option<Vec<Vec<Vec<f64>>>>,
        tol: f64,
    ) -> PyResult<(String, Option<f64>, Option<String>)> {
        let id = IdentityId::ALL
            .into_iter()
            .find(|id| id.name() == identity)
            .ok_or_else(|| err(format!("unknown identity '{identity}'")))?;
        let d = self.geom.dim();
        let t = torsion.map(|v| cube_to_tensor(&v, d)).transpose()?;
        let k = contorsion.map(|v| cube_to_tensor(&v, d)).transpose()?;
        let mut input = EvalInput::new(&self.geom);
        if let Some(t) = &t {
            input = input.with_torsion(t);
        }
        if let Some(k) = &k {
            input = input.with_contorsion(k);
        }
        if let Some(r) = &self.reeb {
            input = input.with_reeb(r);
        }
        let res = eval_identity(id, &input, tol).map_err(err)?;
        let status = serde_label(res.status);
        Ok((status, res.residual, res.skip_reason))
    }

    fn __repr__(&self) -> String {
        format!("Geometry(dim={}, coords={:?})", self.geom.dim(), self.geom.point.coords())
    }
}

fn serde_label(s: torsion_lab::check::CheckStatus) -> String {
    use torsion_lab::check::CheckStatus::*;
    match s {
        Pass => "pass",
        Fail => "fail",
        Skipped => "skipped",
    }
    .to_string()
}

/// Point-independent oracle output.
#[pyclass(module = "torsion_lab_py", get_all)]
struct Oracle {
    contorsion: Vec<Vec<Vec<f64>>>,
    torsion: Vec<Vec<Vec<f64>>>,
    system_residual: f64,
    unique: bool,
    consistent: bool,
    sv_min: f64,
    sv_max: f64,
    f2_condition: f64,
    f_condition: f64,
    s1_condition: f64,
}

#[pymethods]
impl Oracle {
    fn __repr__(&self) -> String {
        format!(
            "Oracle(consistent={}, unique={}, system_residual={:.3e})",
            self.consistent, self.unique, self.system_residual
        )
    }
}

/// Registered chart families: name -> (dim, default params, summary).
#[pyfunction]
fn charts() -> BTreeMap<String, (usize, BTreeMap<String, f64>, String)> {
    registry()
        .into_iter()
        .map(|s| (s.name, (s.dim, s.params, s.summary)))
        .collect()
}

/// Identity battery: name -> statement.
#[pyfunction]
fn identities() -> BTreeMap<String, String> {
    IdentityId::ALL
        .into_iter()
        .map(|id| (id.name().to_string(), id.formula().to_string()))
        .collect()
}

#[pymodule]
fn torsion_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Chart>()?;
    m.add_class::<Geometry>()?;
    m.add_class::<Oracle>()?;
    m.add_function(wrap_pyfunction!(charts, m)?)?;
    m.add_function(wrap_pyfunction!(identities, m)?)?;
    Ok(())
}
