//! Structural invariants over randomized inputs: the contorsion/torsion
//! conversion pair, skew projections, and contraction conventions. The
//! metric-rescaling invariance of the oracle runs on a fixed chart since
//! every case costs a dense solve.

use proptest::prelude::*;
use std::sync::Arc;

use torsion_lab::catalog::{instantiate, sample_points, DEFAULT_KERNEL_EPS};
use torsion_lab::connection::{
    contorsion_from_torsion, embed_factor_torsion, torsion_from_contorsion, TorsionAtPoint,
    TorsionSource,
};
use torsion_lab::fields::{point_geometry, ChartPoint, StructureFields};
use torsion_lab::oracle::solve_einstein_pointwise;
use torsion_lab::tensor::{Endo, Tensor3};

fn tensor3(d: usize) -> impl Strategy<Value = Tensor3> {
    prop::collection::vec(-1.0f64..1.0, d * d * d)
        .prop_map(move |v| Tensor3::from_fn(d, |x, y, z| v[(x * d + y) * d + z]))
}

fn endo(d: usize) -> impl Strategy<Value = Endo> {
    prop::collection::vec(-1.0f64..1.0, d * d)
        .prop_map(move |v| Endo::from_fn(d, |i, j| v[i * d + j]))
}

fn dims() -> impl Strategy<Value = usize> {
    3usize..=5
}

proptest! {
    /// 2K(X,Y,Z) = T(X,Y,Z) - T(Z,X,fY) + T(Y,Z,fX) followed by
    /// T'(X,Y,Z) = K(X,Y,Z) - K(Y,X,Z) recovers T exactly, for any f:
    /// the extra terms cancel against the (X,Y)-skewness of T.
    #[test]
    fn contorsion_roundtrip_recovers_torsion(
        (_, raw, f) in dims().prop_flat_map(|d| (Just(d), tensor3(d), endo(d)))
    ) {
        let (t, _) = raw.antisymmetrize12();
        let k = contorsion_from_torsion(&t, &f);
        let back = torsion_from_contorsion(&k);
        prop_assert!(back.sub(&t).sup_norm() < 1e-12);
    }

    /// The torsion read off any contorsion is (X,Y)-skew, and the skew
    /// projection fixes it with zero defect.
    #[test]
    fn torsion_from_contorsion_is_skew(
        (_, k) in dims().prop_flat_map(|d| (Just(d), tensor3(d)))
    ) {
        let t = torsion_from_contorsion(&k);
        let (again, defect) = t.antisymmetrize12();
        prop_assert!(defect == 0.0);
        prop_assert!(again.sub(&t).sup_norm() == 0.0);
    }

    /// Slot conventions: vec0/vec1/vec2 agree with eval against basis
    /// vectors, and pulling back through identities is a no-op.
    #[test]
    fn contraction_conventions(
        (d, t, x) in dims().prop_flat_map(|d| {
            (Just(d), tensor3(d), prop::collection::vec(-1.0f64..1.0, d))
        })
    ) {
        let id = Endo::identity(d);
        prop_assert!(t.pull(Some(&id), Some(&id), Some(&id)).sub(&t).sup_norm() == 0.0);

        let basis = |i: usize| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            e
        };
        let v0 = t.vec0(&x);
        let v1 = t.vec1(&x);
        let v2 = t.vec2(&x);
        for j in 0..d {
            for k in 0..d {
                let (ej, ek) = (basis(j), basis(k));
                prop_assert!((v0.get(j, k) - t.eval(&x, &ej, &ek)).abs() < 1e-13);
                prop_assert!((v1.get(j, k) - t.eval(&ej, &x, &ek)).abs() < 1e-13);
                prop_assert!((v2.get(j, k) - t.eval(&ej, &ek, &x)).abs() < 1e-13);
            }
        }
    }

    /// Factor embedding is exact: entries inside a factor block equal the
    /// factor tensor, everything else is exactly zero.
    #[test]
    fn factor_embedding_is_block_exact(
        (a, b) in (tensor3(2), tensor3(3))
    ) {
        let parts = [
            (0usize, TorsionAtPoint { source: TorsionSource::WeightedFactor, tensor: a.clone(), asymmetry: 0.0 }),
            (2usize, TorsionAtPoint { source: TorsionSource::WeightedFactor, tensor: b.clone(), asymmetry: 0.0 }),
        ];
        let refs: Vec<(usize, &TorsionAtPoint)> = parts.iter().map(|(o, t)| (*o, t)).collect();
        let emb = embed_factor_torsion(5, &refs);
        for x in 0..5 {
            for y in 0..5 {
                for z in 0..5 {
                    let expect = if x < 2 && y < 2 && z < 2 {
                        a.get(x, y, z)
                    } else if x >= 2 && y >= 2 && z >= 2 {
                        b.get(x - 2, y - 2, z - 2)
                    } else {
                        0.0
                    };
                    prop_assert!(emb.tensor.get(x, y, z) == expect);
                }
            }
        }
    }
}

/// Scaling (g, F) -> (c g, c F) leaves f and the Levi-Civita connection
/// unchanged, so the connection correction is invariant as a (1,2) tensor;
/// its covariant form K(X,Y,Z) = g(K_X Y, Z) picks up exactly one factor
/// of c.
#[test]
fn oracle_invariant_under_metric_rescaling() {
    let m = Arc::new(instantiate("hermitian_rotated_J", &Default::default()).unwrap());
    let c = 2.7;
    let scaled = {
        let (m1, m2, m3, m4) = (m.clone(), m.clone(), m.clone(), m.clone());
        let at = |x: &[f64]| ChartPoint::new(x.to_vec()).unwrap();
        StructureFields::new(
            m.fields.dim(),
            m.fields.signature().to_vec(),
            Box::new(move |x| m1.fields.g_at(&at(x)).scale(c)),
            Box::new(move |x| m2.fields.dg_at(&at(x)).scale(c)),
            Box::new(move |x| m3.fields.f_form_at(&at(x)).scale(c)),
            Box::new(move |x| m4.fields.df_form_at(&at(x)).scale(c)),
        )
    };
    for p in sample_points(&m, 3, 17).unwrap() {
        let g0 = point_geometry(&m.fields, &p, DEFAULT_KERNEL_EPS).unwrap();
        let g1 = point_geometry(&scaled, &p, DEFAULT_KERNEL_EPS).unwrap();
        assert!(g1.f.sub(&g0.f).sup_norm() < 1e-12, "f must not change under rescaling");
        let s0 = solve_einstein_pointwise(&g0).unwrap();
        let s1 = solve_einstein_pointwise(&g1).unwrap();
        let diff = s1.contorsion.sub(&s0.contorsion.scale(c)).sup_norm();
        assert!(diff < 1e-10, "contorsion not homogeneous under rescaling: {diff:.3e}");
        let tdiff = s1.torsion.tensor.sub(&s0.torsion.tensor.scale(c)).sup_norm();
        assert!(tdiff < 1e-10, "torsion not homogeneous under rescaling: {tdiff:.3e}");
    }
}
