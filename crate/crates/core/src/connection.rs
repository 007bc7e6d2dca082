//! Closed-form torsion candidates and assembly of the compatible connection.
//!
//! Each `torsion_*` function evaluates one published solution formula for
//! the torsion of a connection compatible with G = g + F, in the sense
//! (nabla_X G)(Y,Z) = -G(T(X,Y),Z). The formulas apply under different
//! structural hypotheses (f^2 = -I, f^2 = -lambda I blockwise, almost
//! contact, or only the f^2-torsion condition); callers gate on those.
//! All outputs are antisymmetrized in the first two slots and the raw
//! asymmetry of the formula output is kept as a diagnostic.
//!
//! Torsion and contorsion are stored as (0,3) tensors in plain slot order:
//! `t.get(x, y, z) = T(e_x, e_y, e_z)` and `k.get(x, y, z) = K(e_x, e_y, e_z)`
//! with nabla_X Y = nabla^g_X Y + K_X Y, K(X,Y,Z) = g(K_X Y, Z).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::PointGeometry;
use crate::catalog::ReebAtPoint;
use crate::tensor::{solve_dense, Endo, Tensor3};

/// sup |f^2 + I| allowed before the Hermitian-only formulas refuse to run.
pub const HERMITIAN_DEFECT_TOL: f64 = 1e-8;
/// sup |nabla^g xi| allowed before the almost-contact formula refuses.
pub const REEB_PARALLEL_TOL: f64 = 1e-10;

/// Which closed-form route produced a torsion tensor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TorsionSource {
    /// Formula for f^2 = -I.
    Hermitian,
    /// General solution under the f^2-torsion condition.
    WeakF2,
    /// Per-factor formula for f^2 = -lambda I blocks.
    WeightedFactor,
    /// Special (K_X Y = -K_Y X) connection formula.
    Special,
    /// Almost-contact horizontal formula with parallel Reeb field.
    AlmostContact,
    /// T = scale * dF (totally skew families).
    SkewDf { scale: f64 },
    /// Linear-system solution of the compatibility equations.
    Oracle,
}

impl std::fmt::Display for TorsionSource {
    fn fmt(&self, out: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Hermitian => write!(out, "hermitian"),
            Self::WeakF2 => write!(out, "weak_f2"),
            Self::WeightedFactor => write!(out, "weighted_factor"),
            Self::Special => write!(out, "special"),
            Self::AlmostContact => write!(out, "almost_contact"),
            Self::SkewDf { scale } => write!(out, "skew_df({scale})"),
            Self::Oracle => write!(out, "oracle"),
        }
    }
}

/// A torsion candidate at a point, skew in (X, Y) by construction.
#[derive(Debug, Clone)]
pub struct TorsionAtPoint {
    pub source: TorsionSource,
    /// t.get(x, y, z) = T(e_x, e_y, e_z).
    pub tensor: Tensor3,
    /// sup deviation of the raw formula output from (X, Y)-skewness,
    /// measured before antisymmetrization.
    pub asymmetry: f64,
}

/// Halved right side of the almost Hermitian solution, indexed (Y, Z, X):
///
/// T(Y,Z,X) = (nabla_{fX} F)(fY,Z) - 1/2 (nabla_{fY} F)(fZ,X)
///   - 1/2 (nabla_{fZ} F)(X,fY) - 1/2 (nabla_Y F)(Z,X) - 1/2 (nabla_Z F)(X,Y).
fn hermitian_rhs(nf: &Tensor3, f: &Endo) -> Tensor3 {
    let d = nf.dim();
    // pff(a,b,c) = (nabla_{fa} F)(fb, c);  pf_f(a,b,c) = (nabla_{fa} F)(b, fc)
    let pff = nf.pull(Some(f), Some(f), None);
    let pf_f = nf.pull(Some(f), None, Some(f));
    Tensor3::from_fn(d, |y, z, x| {
        pff.get(x, y, z)
            - 0.5 * pff.get(y, z, x)
            - 0.5 * pf_f.get(z, x, y)
            - 0.5 * nf.get(y, z, x)
            - 0.5 * nf.get(z, x, y)
    })
}

/// Torsion of the compatible connection when f^2 = -I.
pub fn torsion_hermitian(geom: &PointGeometry) -> Result<TorsionAtPoint> {
    let defect = geom.hermitian_defect();
    if defect > HERMITIAN_DEFECT_TOL {
        return Err(Error::NotAlmostHermitian(defect));
    }
    let raw = hermitian_rhs(&geom.nabla_f, &geom.f);
    let (tensor, asymmetry) = raw.antisymmetrize12();
    Ok(TorsionAtPoint { source: TorsionSource::Hermitian, tensor, asymmetry })
}

/// Torsion of a special compatible connection (K_X Y = -K_Y X):
/// 2 T(X,Y,Z) = (nabla_X F)(Y,Z) - (nabla_{fZ} F)(fX,Y) - (nabla_{fY} F)(fX,Z).
pub fn torsion_special(geom: &PointGeometry) -> TorsionAtPoint {
    let nf = &geom.nabla_f;
    let pff = nf.pull(Some(&geom.f), Some(&geom.f), None);
    let raw = Tensor3::from_fn(geom.dim(), |x, y, z| {
        0.5 * (nf.get(x, y, z) - pff.get(z, x, y) - pff.get(y, x, z))
    });
    let (tensor, asymmetry) = raw.antisymmetrize12();
    TorsionAtPoint { source: TorsionSource::Special, tensor, asymmetry }
}

/// T = scale * dF; the totally skew candidates (e.g. scale -1/3 for the
/// nearly-Kaehler-type family, 1/6 for the special contact family).
pub fn torsion_from_df(geom: &PointGeometry, scale: f64) -> TorsionAtPoint {
    TorsionAtPoint {
        source: TorsionSource::SkewDf { scale },
        tensor: geom.df_ext.scale(scale),
        asymmetry: 0.0,
    }
}

/// Per-factor torsion on a block where f^2 = -lambda I, evaluated in the
/// factor's own geometry. With J = f / sqrt(lambda):
///
/// (3l-1) T(Y,Z,X) = (l-1) (nabla_X F)(Y,Z) + 2l (nabla_{JX} F)(Y,JZ)
///   - (2l-1) {(nabla_Z F)(X,Y) + (nabla_Y F)(Z,X)}
///   - l {(nabla_{JY} F)(JZ,X) + (nabla_{JZ} F)(X,JY)}
///
/// This is the general closed solution specialized to Q = (l-1)I, with
/// the dF terms expanded cyclically and the Hermitian derivative
/// exchange identities applied; the coefficients come out rational in l.
/// At l = 1 it is the f^2 = -I formula. The solve operator degenerates
/// at l = 1/3, where the factor equations stop determining this block.
pub fn torsion_weighted_factor(geom: &PointGeometry, lambda: f64) -> Result<TorsionAtPoint> {
    if lambda <= 0.0 || !lambda.is_finite() || (3.0 * lambda - 1.0).abs() < 1e-9 {
        return Err(Error::InvalidLambda(lambda));
    }
    let d = geom.dim();
    let mut defect = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let want = if i == j { -lambda } else { 0.0 };
            defect = defect.max((geom.f2.get(i, j) - want).abs());
        }
    }
    if defect > HERMITIAN_DEFECT_TOL * lambda.max(1.0) {
        return Err(Error::StructureMismatch { what: "factor f^2 + lambda I", residual: defect });
    }

    let jj = geom.f.scale(1.0 / lambda.sqrt());
    let nf = &geom.nabla_f;
    // a(p,q,r) = (nabla_{Jp} F)(q, Jr);  b(p,q,r) = (nabla_{Jp} F)(Jq, r)
    let a = nf.pull(Some(&jj), None, Some(&jj));
    let b = nf.pull(Some(&jj), Some(&jj), None);

    let den = 3.0 * lambda - 1.0;
    let c1 = (lambda - 1.0) / den;
    let c2 = 2.0 * lambda / den;
    let c3 = -(2.0 * lambda - 1.0) / den;
    let c4 = -lambda / den;

    let raw = Tensor3::from_fn(d, |y, z, x| {
        c1 * nf.get(x, y, z)
            + c2 * a.get(x, y, z)
            + c3 * (nf.get(z, x, y) + nf.get(y, z, x))
            + c4 * (b.get(y, z, x) + a.get(z, x, y))
    });
    let (tensor, asymmetry) = raw.antisymmetrize12();
    Ok(TorsionAtPoint { source: TorsionSource::WeightedFactor, tensor, asymmetry })
}

/// Direct sum of per-factor torsions into the product chart; components
/// with slots in different factors vanish.
pub fn embed_factor_torsion(dim: usize, parts: &[(usize, &TorsionAtPoint)]) -> TorsionAtPoint {
    let mut tensor = Tensor3::zeros(dim);
    let mut asymmetry = 0.0f64;
    for (offset, part) in parts {
        let fd = part.tensor.dim();
        asymmetry = asymmetry.max(part.asymmetry);
        for a in 0..fd {
            for b in 0..fd {
                for c in 0..fd {
                    tensor.set(offset + a, offset + b, offset + c, part.tensor.get(a, b, c));
                }
            }
        }
    }
    TorsionAtPoint { source: TorsionSource::WeightedFactor, tensor, asymmetry }
}

/// Torsion on an almost contact metric chart with parallel Reeb field:
/// every xi-slot vanishes and the horizontal part follows the Hermitian
/// formula, here realized by pulling it back through H = I - xi (x) eta.
pub fn torsion_acm(geom: &PointGeometry, reeb: &ReebAtPoint) -> Result<TorsionAtPoint> {
    let d = geom.dim();
    let xi = &reeb.xi;
    let eta = &reeb.eta;
    let pairing: f64 = (0..d).map(|i| eta[i] * xi[i]).sum();
    let mut defect = (pairing - 1.0).abs();
    for k in 0..d {
        for j in 0..d {
            let want = if k == j { -1.0 } else { 0.0 } + xi[k] * eta[j];
            defect = defect.max((geom.f2.get(k, j) - want).abs());
        }
    }
    if defect > HERMITIAN_DEFECT_TOL {
        return Err(Error::StructureMismatch {
            what: "almost contact relation f^2 = -I + eta (x) xi",
            residual: defect,
        });
    }
    let parallel = reeb.parallel_defect();
    if parallel > REEB_PARALLEL_TOL {
        return Err(Error::ReebNotParallel(parallel));
    }

    let h = Endo::from_fn(d, |k, j| {
        let id = if k == j { 1.0 } else { 0.0 };
        id - xi[k] * eta[j]
    });
    let raw = hermitian_rhs(&geom.nabla_f, &geom.f).pull(Some(&h), Some(&h), Some(&h));
    let (tensor, asymmetry) = raw.antisymmetrize12();
    Ok(TorsionAtPoint { source: TorsionSource::AlmostContact, tensor, asymmetry })
}

/// General solution under the f^2-torsion condition, assembled per basis
/// direction in the third slot. Collecting every torsion term of the
/// delta_4 pre-solution into the third slot leaves T(Y,Z, M X) = rhs with
/// M = 1/2 f^2 (I - f^2)(I + 3 f^2); the complement part of each basis
/// direction is recovered by solving M x = e_c there, the kernel part
/// follows the singular branch T(Y,Z,X) = 2 (nabla^g_X F)(Y,Z) + dF(Y,Z,X).
pub fn torsion_weak(geom: &PointGeometry) -> Result<TorsionAtPoint> {
    let d = geom.dim();
    let nf = &geom.nabla_f;
    let df = &geom.df_ext;
    let rhs = crate::delta::closed_solution_rhs(geom);
    let m_op = crate::delta::solve_operator(geom);
    let m_mat = m_op.to_dmatrix();

    let mut raw = Tensor3::zeros(d);
    for c in 0..d {
        let mut e_c = vec![0.0; d];
        e_c[c] = 1.0;
        let k_c = geom.kernel.kernel_projector.apply(&e_c);
        let p_c = geom.kernel.complement_projector.apply(&e_c);

        if p_c.iter().any(|v| v.abs() > 1e-300) {
            let b = nalgebra::DVector::from_row_slice(&p_c);
            let ls = solve_dense(&m_mat, &b, 1e-10)?;
            // The complement part must actually be reachable; a large
            // residual means f^2 has a near-kernel direction the split
            // did not separate, and no finite answer exists there.
            if ls.residual > 1e-7 {
                return Err(Error::KernelSplitUnavailable(ls.residual));
            }
            let x_c = ls.solution;
            for y in 0..d {
                for z in 0..d {
                    let v: f64 = (0..d).map(|a| x_c[a] * rhs.get(a, y, z)).sum();
                    raw.set(y, z, c, v);
                }
            }
        }

        // Singular branch for the kernel part of e_c.
        if k_c.iter().any(|v| v.abs() > 1e-300) {
            let sing = nf.vec0(&k_c).scale(2.0).add(&df.vec2(&k_c));
            for y in 0..d {
                for z in 0..d {
                    raw.set(y, z, c, raw.get(y, z, c) + sing.get(y, z));
                }
            }
        }
    }

    let (tensor, asymmetry) = raw.antisymmetrize12();
    Ok(TorsionAtPoint { source: TorsionSource::WeakF2, tensor, asymmetry })
}

/// K from T: 2 K(X,Y,Z) = T(X,Y,Z) - T(Z,X,fY) + T(Y,Z,fX).
pub fn contorsion_from_torsion(t: &Tensor3, f: &Endo) -> Tensor3 {
    let tf = t.pull(None, None, Some(f));
    Tensor3::from_fn(t.dim(), |x, y, z| {
        0.5 * (t.get(x, y, z) - tf.get(z, x, y) + tf.get(y, z, x))
    })
}

/// T from K: T(X,Y,Z) = K(X,Y,Z) - K(Y,X,Z).
pub fn torsion_from_contorsion(k: &Tensor3) -> Tensor3 {
    Tensor3::from_fn(k.dim(), |x, y, z| k.get(x, y, z) - k.get(y, x, z))
}

/// A fully assembled connection at a point.
#[derive(Debug, Clone)]
pub struct ConnectionAtPoint {
    /// Coefficients C^k_ij of nabla_{e_i} e_j in the chart frame.
    pub coeffs: Tensor3,
    /// K(X,Y,Z) = g(nabla_X Y - nabla^g_X Y, Z).
    pub contorsion: Tensor3,
    pub torsion: TorsionAtPoint,
    /// (nabla_l g)(e_i, e_j) for this connection.
    pub nabla_g: Tensor3,
    /// (nabla_l F)(e_i, e_j) for this connection.
    pub nabla_f: Tensor3,
    /// sup |(nabla_X G)(Y,Z) + G(T(X,Y),Z)| over the chart frame.
    pub metricity_residual: f64,
}

/// Builds the connection nabla = nabla^g + K from a torsion candidate and
/// measures how well it satisfies the compatibility equation.
pub fn assemble_connection(geom: &PointGeometry, torsion: &TorsionAtPoint) -> ConnectionAtPoint {
    let d = geom.dim();
    let contorsion = contorsion_from_torsion(&torsion.tensor, &geom.f);

    let coeffs = Tensor3::from_fn(d, |k, i, j| {
        let mut s = geom.gamma.get(k, i, j);
        for l in 0..d {
            s += geom.g_inv.get(k, l) * contorsion.get(i, j, l);
        }
        s
    });

    let big_f = &geom.big_f;
    let nabla_g = Tensor3::from_fn(d, |l, i, j| {
        let mut s = geom.dg.get(l, i, j);
        for m in 0..d {
            s -= coeffs.get(m, l, i) * geom.g.get(m, j);
            s -= coeffs.get(m, l, j) * geom.g.get(i, m);
        }
        s
    });
    let nabla_f = Tensor3::from_fn(d, |l, i, j| {
        let mut s = geom.df_partials.get(l, i, j);
        for m in 0..d {
            s -= coeffs.get(m, l, i) * big_f.get(m, j);
            s -= coeffs.get(m, l, j) * big_f.get(i, m);
        }
        s
    });

    // The torsion of nabla itself (from K), not the candidate tensor; for a
    // consistent candidate the two coincide.
    let t_conn = torsion_from_contorsion(&contorsion);
    let mut metricity_residual = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let nabla_big_g = nabla_g.get(i, j, k) + nabla_f.get(i, j, k);
                // G(T(e_i, e_j), e_k) = T(i,j,m) g^{ml} G_lk
                let mut g_term = 0.0;
                for m in 0..d {
                    for l in 0..d {
                        g_term += t_conn.get(i, j, m)
                            * geom.g_inv.get(m, l)
                            * (geom.g.get(l, k) + big_f.get(l, k));
                    }
                }
                metricity_residual = metricity_residual.max((nabla_big_g + g_term).abs());
            }
        }
    }

    ConnectionAtPoint {
        coeffs,
        contorsion,
        torsion: torsion.clone(),
        nabla_g,
        nabla_f,
        metricity_residual,
    }
}

/// sup residual of T(f^2 X,Y,Z) = T(X,f^2 Y,Z) = T(X,Y,f^2 Z).
pub fn f2_condition_residual(t: &Tensor3, f2: &Endo) -> f64 {
    let a = t.pull(Some(f2), None, None);
    let b = t.pull(None, Some(f2), None);
    let c = t.pull(None, None, Some(f2));
    a.sub(&b).sup_norm().max(b.sub(&c).sup_norm())
}

/// sup residual of T(f X,Y,Z) = T(X,f Y,Z) = T(X,Y,f Z); the (0,3) form of
/// T(fX,Y) = T(X,fY) = -f T(X,Y), using that f is g-skew.
pub fn f_condition_residual(t: &Tensor3, f: &Endo) -> f64 {
    let a = t.pull(Some(f), None, None);
    let b = t.pull(None, Some(f), None);
    let c = t.pull(None, None, Some(f));
    a.sub(&b).sup_norm().max(b.sub(&c).sup_norm())
}

/// sup residual of the special-connection criterion
/// (nabla_X F)(Y,Z) + (nabla_Y F)(X,Z) = (nabla_{fX} F)(fY,Z) + (nabla_{fY} F)(fX,Z).
pub fn s1_condition_residual(nf: &Tensor3, f: &Endo) -> f64 {
    let d = nf.dim();
    let p = nf.pull(Some(f), Some(f), None);
    let mut r = 0.0f64;
    for x in 0..d {
        for y in 0..d {
            for z in 0..d {
                let lhs = nf.get(x, y, z) + nf.get(y, x, z);
                let rhs = p.get(x, y, z) + p.get(y, x, z);
                r = r.max((lhs - rhs).abs());
            }
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::{instantiate, reeb_at, sample_points, DEFAULT_KERNEL_EPS};
    use crate::fields::point_geometry;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn geom_of(name: &str, seed: u64) -> PointGeometry {
        let m = instantiate(name, &BTreeMap::new()).unwrap();
        let p = sample_points(&m, 1, seed).unwrap().remove(0);
        point_geometry(&m.fields, &p, DEFAULT_KERNEL_EPS).unwrap()
    }

    #[test]
    fn contorsion_torsion_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = 5;
        let t0 = Tensor3::from_fn(d, |_, _, _| rng.random_range(-1.0..1.0));
        let (t, _) = t0.antisymmetrize12();
        let f = Endo::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let k = contorsion_from_torsion(&t, &f);
        let back = torsion_from_contorsion(&k);
        assert!(back.sub(&t).sup_norm() < 1e-13);
    }

    #[test]
    fn kaehler_torsion_vanishes_and_connection_is_levi_civita() {
        let geom = geom_of("kaehler_flat", 3);
        let t = torsion_hermitian(&geom).unwrap();
        assert!(t.tensor.sup_norm() < 1e-14);
        let conn = assemble_connection(&geom, &t);
        assert!(conn.metricity_residual < 1e-14);
        assert!(conn.nabla_g.sup_norm() < 1e-14);
    }

    #[test]
    fn hermitian_formula_yields_compatible_connection() {
        for seed in [1, 2, 9] {
            let geom = geom_of("hermitian_rotated_J", seed);
            let t = torsion_hermitian(&geom).unwrap();
            assert!(t.asymmetry < 1e-12, "formula should be skew, got {}", t.asymmetry);
            let conn = assemble_connection(&geom, &t);
            assert!(
                conn.metricity_residual < 1e-10,
                "metricity residual {}",
                conn.metricity_residual
            );
        }
        // Curved metric variant exercises nonzero Christoffel symbols.
        let geom = geom_of("hermitian_conformal", 4);
        let t = torsion_hermitian(&geom).unwrap();
        let conn = assemble_connection(&geom, &t);
        assert!(conn.metricity_residual < 1e-10);
    }

    #[test]
    fn weighted_factor_reduces_to_hermitian_at_lambda_one() {
        let geom = geom_of("hermitian_rotated_J", 5);
        let herm = torsion_hermitian(&geom).unwrap();
        let weighted = torsion_weighted_factor(&geom, 1.0).unwrap();
        assert!(weighted.tensor.sub(&herm.tensor).sup_norm() < 1e-12);
    }

    #[test]
    fn weak_solution_reduces_to_hermitian_when_f_squared_is_minus_identity() {
        for name in ["hermitian_rotated_J", "hermitian_conformal"] {
            let geom = geom_of(name, 6);
            let herm = torsion_hermitian(&geom).unwrap();
            let weak = torsion_weak(&geom).unwrap();
            let diff = weak.tensor.sub(&herm.tensor).sup_norm();
            assert!(diff < 1e-9, "{name}: weak vs hermitian diff {diff}");
        }
    }

    #[test]
    fn weak_solution_vanishes_on_flat_lorentz_chart() {
        let geom = geom_of("lorentz_flat", 2);
        let t = torsion_weak(&geom).unwrap();
        assert!(t.tensor.sup_norm() < 1e-13);
    }

    #[test]
    fn acm_torsion_is_horizontal_and_compatible() {
        let m = instantiate("acm_product", &BTreeMap::new()).unwrap();
        let p = sample_points(&m, 1, 8).unwrap().remove(0);
        let geom = point_geometry(&m.fields, &p, DEFAULT_KERNEL_EPS).unwrap();
        let reeb = reeb_at(m.reeb.as_ref().unwrap(), &geom);
        let t = torsion_acm(&geom, &reeb).unwrap();
        let d = geom.dim();
        // xi = e_0 on this chart: all xi-slots must vanish exactly.
        for a in 0..d {
            for b in 0..d {
                assert_eq!(t.tensor.get(0, a, b), 0.0);
                assert_eq!(t.tensor.get(a, 0, b), 0.0);
                assert_eq!(t.tensor.get(a, b, 0), 0.0);
            }
        }
        let conn = assemble_connection(&geom, &t);
        assert!(conn.metricity_residual < 1e-10, "residual {}", conn.metricity_residual);
    }

    #[test]
    fn contact_chart_rejects_acm_formula() {
        let m = instantiate("contact_r5", &BTreeMap::new()).unwrap();
        let p = sample_points(&m, 1, 8).unwrap().remove(0);
        let geom = point_geometry(&m.fields, &p, DEFAULT_KERNEL_EPS).unwrap();
        let reeb = reeb_at(m.reeb.as_ref().unwrap(), &geom);
        match torsion_acm(&geom, &reeb) {
            Err(Error::ReebNotParallel(r)) => assert!(r > 1e-6),
            other => panic!("expected ReebNotParallel, got {other:?}"),
        }
    }

    #[test]
    fn weighted_product_blocks_match_weak_solution() {
        let m = instantiate("weighted_product", &BTreeMap::new()).unwrap();
        let p = sample_points(&m, 1, 12).unwrap().remove(0);
        let geom = point_geometry(&m.fields, &p, DEFAULT_KERNEL_EPS).unwrap();
        let weak = torsion_weak(&geom).unwrap();

        let mut parts = Vec::new();
        for factor in &m.factors {
            let local = crate::fields::ChartPoint::new(
                p.coords()[factor.offset..factor.offset + factor.dim].to_vec(),
            )
            .unwrap();
            let fg = point_geometry(&factor.fields, &local, DEFAULT_KERNEL_EPS).unwrap();
            let ft = torsion_weighted_factor(&fg, factor.lambda).unwrap();
            parts.push((factor.offset, ft));
        }
        let refs: Vec<(usize, &TorsionAtPoint)> =
            parts.iter().map(|(o, t)| (*o, t)).collect();
        let embedded = embed_factor_torsion(geom.dim(), &refs);
        let diff = weak.tensor.sub(&embedded.tensor).sup_norm();
        assert!(diff < 1e-9, "weak vs blockwise weighted diff {diff}");

        let conn = assemble_connection(&geom, &weak);
        assert!(conn.metricity_residual < 1e-9, "residual {}", conn.metricity_residual);
    }

    #[test]
    fn kernel_chart_kernel_columns_follow_singular_branch() {
        let geom = geom_of("f_with_kernel", 2);
        let t = torsion_weak(&geom).unwrap();
        let d = geom.dim();
        // e_4, e_5 span ker f on this chart.
        for c in [4usize, 5usize] {
            let mut e_c = vec![0.0; d];
            e_c[c] = 1.0;
            let want = geom.nabla_f.vec0(&e_c).scale(2.0).add(&geom.df_ext.vec2(&e_c));
            let (want_skew, _) = Tensor3::from_fn(d, |y, z, w| {
                if w == 0 { want.get(y, z) } else { 0.0 }
            })
            .antisymmetrize12();
            for y in 0..d {
                for z in 0..d {
                    let got = t.tensor.get(y, z, c);
                    assert!(
                        (got - want_skew.get(y, z, 0)).abs() < 1e-10,
                        "kernel column {c} mismatch at ({y},{z}): {got} vs {}",
                        want_skew.get(y, z, 0)
                    );
                }
            }
        }
    }
}
