//! Acceptance gate: nine end-to-end criteria covering formula/oracle
//! equivalence, degeneracies, the identity battery, the structure theorems,
//! and numerics hygiene. Each test prints exactly one summary line with the
//! observed extremes so a log scan shows the margins, and panics with
//! context when a criterion fails.

use std::collections::BTreeMap;

use torsion_lab::catalog::{
    instantiate, reeb_at, registry, sample_points, Manifold, DEFAULT_KERNEL_EPS,
};
use torsion_lab::check::CheckStatus;
use torsion_lab::connection::{
    assemble_connection, embed_factor_torsion, torsion_acm, torsion_from_df, torsion_hermitian,
    torsion_special, torsion_weak, torsion_weighted_factor, TorsionAtPoint,
};
use torsion_lab::delta::{eval_delta, DeltaOps};
use torsion_lab::fields::{fd_validate, point_geometry, ChartPoint, PointGeometry};
use torsion_lab::identities::{eval_identity, nabla_g_equivalence, EvalInput, IdentityId};
use torsion_lab::oracle::{compare_with_formula, solve_einstein_pointwise};
use torsion_lab::tensor::Tensor3;
use torsion_lab::Error;

fn chart(name: &str, params: &[(&str, f64)], points: usize, seed: u64) -> (Manifold, Vec<PointGeometry>) {
    let params: BTreeMap<String, f64> =
        params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let m = instantiate(name, &params).expect(name);
    let pts = sample_points(&m, points, seed).expect("sampling");
    let geoms = pts
        .iter()
        .map(|p| point_geometry(&m.fields, p, DEFAULT_KERNEL_EPS).expect("geometry"))
        .collect();
    (m, geoms)
}

/// Criterion 1: the closed-form almost Hermitian torsion reproduces the
/// unique oracle solution on a curved dim-4 chart at 100 points.
#[test]
fn criterion_1_hermitian_formula_matches_oracle() {
    let (_, geoms) = chart("hermitian_rotated_J", &[], 100, 1);
    let mut max_sys = 0.0f64;
    let mut max_err = 0.0f64;
    for geom in &geoms {
        let oracle = solve_einstein_pointwise(geom).expect("oracle");
        assert!(oracle.unique, "oracle not unique (sv_min {:.3e})", oracle.sv_min);
        assert!(
            oracle.system_residual < 1e-10,
            "system residual {:.3e}",
            oracle.system_residual
        );
        let formula = torsion_hermitian(geom).expect("formula");
        let err = compare_with_formula(&oracle, &formula);
        assert!(err < 1e-8, "formula vs oracle {err:.3e}");
        max_sys = max_sys.max(oracle.system_residual);
        max_err = max_err.max(err);
    }
    println!(
        "criterion 1 (hermitian formula vs oracle, 100 pts): PASS  max system {max_sys:.2e}, max formula error {max_err:.2e}"
    );
}

/// Criterion 2: on the flat Kaehler chart the oracle contorsion and every
/// closed-form torsion vanish.
#[test]
fn criterion_2_kaehler_degeneracy() {
    let (_, geoms) = chart("kaehler_flat", &[], 25, 1);
    let mut max_r = 0.0f64;
    for geom in &geoms {
        let oracle = solve_einstein_pointwise(geom).expect("oracle");
        let mut r = oracle.contorsion.sup_norm();
        let formulas: Vec<TorsionAtPoint> = vec![
            torsion_hermitian(geom).expect("hermitian"),
            torsion_weak(geom).expect("weak"),
            torsion_special(geom),
            torsion_from_df(geom, 1.0),
        ];
        for t in &formulas {
            r = r.max(t.tensor.sup_norm());
        }
        assert!(r < 1e-12, "nonzero torsion on flat Kaehler chart: {r:.3e}");
        max_r = max_r.max(r);
    }
    println!("criterion 2 (Kaehler degeneracy): PASS  max |K|,|T| {max_r:.2e}");
}

/// Criterion 3: the transport-theorem torsion and the blockwise weighted
/// factor formula both reproduce the oracle on dim-8 product charts for
/// three weight choices; unit weights reduce to the Hermitian formula.
#[test]
fn criterion_3_weak_theorem_equivalence() {
    let mut max_weak = 0.0f64;
    let mut max_block = 0.0f64;
    let mut max_off = 0.0f64;
    let mut max_unit = 0.0f64;
    for (l1, l2) in [(1.0, 1.0), (2.0, 3.0), (4.0, 1.0)] {
        let (m, geoms) = chart(
            "weighted_product",
            &[("lambda1", l1), ("lambda2", l2)],
            50,
            1,
        );
        for geom in &geoms {
            let oracle = solve_einstein_pointwise(geom).expect("oracle");
            assert!(
                oracle.f2_condition < 1e-9,
                "f^2 condition {:.3e} at lambda ({l1},{l2})",
                oracle.f2_condition
            );
            let weak = torsion_weak(geom).expect("weak formula");
            let err = compare_with_formula(&oracle, &weak);
            assert!(err < 1e-8, "weak vs oracle {err:.3e} at lambda ({l1},{l2})");
            max_weak = max_weak.max(err);

            let parts: Vec<(usize, TorsionAtPoint)> = m
                .factors
                .iter()
                .map(|fac| {
                    let local = ChartPoint::new(
                        geom.point.coords()[fac.offset..fac.offset + fac.dim].to_vec(),
                    )
                    .expect("local point");
                    let fg = point_geometry(&fac.fields, &local, DEFAULT_KERNEL_EPS)
                        .expect("factor geometry");
                    (fac.offset, torsion_weighted_factor(&fg, fac.lambda).expect("factor"))
                })
                .collect();
            let refs: Vec<(usize, &TorsionAtPoint)> =
                parts.iter().map(|(o, t)| (*o, t)).collect();
            let emb = embed_factor_torsion(geom.dim(), &refs);

            // Blockwise match inside each factor; off-factor components of
            // the oracle torsion must vanish on their own.
            let d = geom.dim();
            let block_of = |i: usize| usize::from(i >= 4);
            for x in 0..d {
                for y in 0..d {
                    for z in 0..d {
                        let same = block_of(x) == block_of(y) && block_of(y) == block_of(z);
                        let diff = (oracle.torsion.tensor.get(x, y, z)
                            - emb.tensor.get(x, y, z))
                        .abs();
                        if same {
                            assert!(diff < 1e-8, "block mismatch {diff:.3e}");
                            max_block = max_block.max(diff);
                        } else {
                            let off = oracle.torsion.tensor.get(x, y, z).abs();
                            assert!(off < 1e-9, "off-factor component {off:.3e}");
                            max_off = max_off.max(off);
                        }
                    }
                }
            }

            if l1 == 1.0 && l2 == 1.0 {
                let herm = torsion_hermitian(geom).expect("hermitian at unit weights");
                let e1 = weak.tensor.sub(&herm.tensor).sup_norm();
                let e2 = emb.tensor.sub(&herm.tensor).sup_norm();
                let e = e1.max(e2);
                assert!(e < 1e-12, "unit weights vs hermitian {e:.3e}");
                max_unit = max_unit.max(e);
            }
        }
    }
    println!(
        "criterion 3 (weak theorem, 3 weights x 50 pts): PASS  max weak {max_weak:.2e}, block {max_block:.2e}, off-factor {max_off:.2e}, unit-vs-hermitian {max_unit:.2e}"
    );
}

/// Criterion 4: every passing formula torsion assembles into a connection
/// that satisfies the defining equation at the points of criteria 1-3.
#[test]
fn criterion_4_defining_equation_closure() {
    let mut max_m = 0.0f64;
    let mut checked = 0usize;
    let (_, geoms) = chart("hermitian_rotated_J", &[], 100, 1);
    for geom in &geoms {
        let t = torsion_hermitian(geom).expect("formula");
        let r = assemble_connection(geom, &t).metricity_residual;
        assert!(r < 1e-8, "hermitian metricity {r:.3e}");
        max_m = max_m.max(r);
        checked += 1;
    }
    let (_, geoms) = chart("kaehler_flat", &[], 25, 1);
    for geom in &geoms {
        for t in [torsion_hermitian(geom).expect("h"), torsion_weak(geom).expect("w")] {
            let r = assemble_connection(geom, &t).metricity_residual;
            assert!(r < 1e-8, "kaehler metricity {r:.3e}");
            max_m = max_m.max(r);
            checked += 1;
        }
    }
    for (l1, l2) in [(1.0, 1.0), (2.0, 3.0), (4.0, 1.0)] {
        let (m, geoms) = chart(
            "weighted_product",
            &[("lambda1", l1), ("lambda2", l2)],
            50,
            1,
        );
        for geom in &geoms {
            let weak = torsion_weak(geom).expect("weak");
            let parts: Vec<(usize, TorsionAtPoint)> = m
                .factors
                .iter()
                .map(|fac| {
                    let local = ChartPoint::new(
                        geom.point.coords()[fac.offset..fac.offset + fac.dim].to_vec(),
                    )
                    .unwrap();
                    let fg =
                        point_geometry(&fac.fields, &local, DEFAULT_KERNEL_EPS).unwrap();
                    (fac.offset, torsion_weighted_factor(&fg, fac.lambda).unwrap())
                })
                .collect();
            let refs: Vec<(usize, &TorsionAtPoint)> =
                parts.iter().map(|(o, t)| (*o, t)).collect();
            let emb = embed_factor_torsion(geom.dim(), &refs);
            for t in [weak, emb] {
                let r = assemble_connection(geom, &t).metricity_residual;
                assert!(r < 1e-8, "weighted metricity {r:.3e} at ({l1},{l2})");
                max_m = max_m.max(r);
                checked += 1;
            }
        }
    }
    println!(
        "criterion 4 (defining-equation closure, {checked} connections): PASS  max metricity {max_m:.2e}"
    );
}

/// Criterion 5: the identity battery holds for every oracle connection in
/// the catalog; conditional identities activate exactly where their
/// hypotheses hold and never fail.
#[test]
fn criterion_5_identity_battery() {
    let always = [
        IdentityId::NablaFVsTorsion,
        IdentityId::NablaGVsTorsion,
        IdentityId::NablaGFExchange,
        IdentityId::TorsionCyclicDf,
        IdentityId::NablaGFSixTerm,
        IdentityId::ConnFContorsionSplit,
    ];
    let mut activations: BTreeMap<&'static str, usize> = BTreeMap::new();
    let mut max_r = 0.0f64;
    let mut checks = 0usize;
    for spec in registry() {
        let (m, geoms) = chart(&spec.name, &[], 25, 1);
        for geom in &geoms {
            let oracle = solve_einstein_pointwise(geom).expect("oracle");
            if !oracle.consistent() {
                continue;
            }
            let reeb = m.reeb.as_ref().map(|r| reeb_at(r, geom));
            let mut input = EvalInput::new(geom)
                .with_torsion(&oracle.torsion.tensor)
                .with_contorsion(&oracle.contorsion);
            if let Some(r) = &reeb {
                input = input.with_reeb(r);
            }
            for id in IdentityId::ALL {
                let res = match eval_identity(id, &input, 1e-8) {
                    Ok(res) => res,
                    Err(Error::MissingInput(_)) if m.reeb.is_none() => continue,
                    Err(e) => panic!("{} on {}: {e}", id.name(), spec.name),
                };
                checks += 1;
                assert!(
                    res.status != CheckStatus::Fail,
                    "{} fails on {}: residual {:?}",
                    id.name(),
                    spec.name,
                    res.residual
                );
                if res.status == CheckStatus::Pass {
                    *activations.entry(id.name()).or_default() += 1;
                    if let Some(r) = res.residual {
                        max_r = max_r.max(r);
                    }
                }
            }
            for id in always {
                let res = eval_identity(id, &input, 1e-8).unwrap();
                assert!(
                    res.passed(),
                    "{} must pass unconditionally on {}, got {:?}",
                    id.name(),
                    spec.name,
                    res.status
                );
            }
            if spec.almost_hermitian {
                let res = eval_identity(IdentityId::HermitianDfExchange, &input, 1e-8).unwrap();
                assert!(res.passed(), "exchange identity must activate on {}", spec.name);
            }
            // Metric-compatibility equivalence: the three formulations imply
            // one another, so when any one of them holds they all must.
            let (r_k, r_g, r_f) = nabla_g_equivalence(geom, &oracle.contorsion);
            if r_k.min(r_g).min(r_f) < 1e-10 {
                assert!(
                    r_k < 1e-8 && r_g < 1e-8 && r_f < 1e-8,
                    "compatibility equivalence broken on {}: {r_k:.3e} {r_g:.3e} {r_f:.3e}",
                    spec.name
                );
            }
        }
    }
    for id in always {
        assert!(activations.get(id.name()).copied().unwrap_or(0) > 0);
    }
    assert!(activations.get(IdentityId::HermitianDfExchange.name()).copied().unwrap_or(0) > 0);
    println!(
        "criterion 5 (identity battery, {checks} checks over {} instances): PASS  max passing residual {max_r:.2e}",
        registry().len()
    );
}

/// Criterion 6: the delta operators vanish identically when f^2 = -I, and
/// the reduction chain holds on the weighted oracle torsion.
#[test]
fn criterion_6_delta_suite() {
    use rand::{Rng, SeedableRng};
    let (_, geoms) = chart("hermitian_rotated_J", &[], 2, 11);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let mut max_delta = 0.0f64;
    for draw in 0..20 {
        let geom = &geoms[draw % geoms.len()];
        let d = geom.dim();
        let raw = Tensor3::from_fn(d, |_, _, _| rng.random_range(-1.0..1.0));
        let (t, _) = raw.antisymmetrize12();
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ops = DeltaOps::new(geom);
        for i in 1..=5 {
            let v = eval_delta(i, &t, &geom.df_ext, &ops).eval(&x, &y, &z).abs();
            assert!(v < 1e-10, "delta_{i} = {v:.3e} with f^2 = -I");
            max_delta = max_delta.max(v);
        }
    }

    let (_, geoms) = chart("weighted_product", &[], 5, 1);
    let mut max_chain = 0.0f64;
    for geom in &geoms {
        let oracle = solve_einstein_pointwise(geom).expect("oracle");
        let input = EvalInput::new(geom)
            .with_torsion(&oracle.torsion.tensor)
            .with_contorsion(&oracle.contorsion);
        for id in [
            IdentityId::ChainCyclic,
            IdentityId::ChainFCyclic,
            IdentityId::ChainFfTransport,
            IdentityId::ChainAssembled,
            IdentityId::DeltaReduction,
        ] {
            let res = eval_identity(id, &input, 1e-8).unwrap();
            assert!(
                res.passed(),
                "{} on weighted oracle: {:?} ({:?})",
                id.name(),
                res.status,
                res.residual
            );
            max_chain = max_chain.max(res.residual.unwrap_or(0.0));
        }
    }
    println!(
        "criterion 6 (delta suite): PASS  max |delta_i| {max_delta:.2e}, max chain residual {max_chain:.2e}"
    );
}

/// Criterion 7: the almost-contact torsion is horizontal, reduces to the
/// factor's Hermitian torsion, and refuses a non-parallel Reeb field.
#[test]
fn criterion_7_almost_contact_theorem() {
    let (m, geoms) = chart("acm_product", &[], 25, 1);
    let reeb_field = m.reeb.as_ref().expect("acm chart has a Reeb field");
    let factor = &m.factors[0];
    let mut max_par = 0.0f64;
    let mut max_h = 0.0f64;
    let mut max_nf = 0.0f64;
    for geom in &geoms {
        let reeb = reeb_at(reeb_field, geom);
        assert!(reeb.parallel_defect() < 1e-12, "Reeb not parallel");
        max_par = max_par.max(reeb.parallel_defect());
        let t = torsion_acm(geom, &reeb).expect("acm torsion");

        let xi_slots = t
            .tensor
            .vec0(&reeb.xi)
            .sup_norm()
            .max(t.tensor.vec1(&reeb.xi).sup_norm())
            .max(t.tensor.vec2(&reeb.xi).sup_norm());
        assert_eq!(xi_slots, 0.0, "xi slots of the acm torsion must vanish exactly");

        let local = ChartPoint::new(
            geom.point.coords()[factor.offset..factor.offset + factor.dim].to_vec(),
        )
        .unwrap();
        let fg = point_geometry(&factor.fields, &local, DEFAULT_KERNEL_EPS).unwrap();
        let th = torsion_hermitian(&fg).expect("factor hermitian");
        let mut block = 0.0f64;
        for x in 0..factor.dim {
            for y in 0..factor.dim {
                for z in 0..factor.dim {
                    let diff = (t.tensor.get(factor.offset + x, factor.offset + y, factor.offset + z)
                        - th.tensor.get(x, y, z))
                    .abs();
                    block = block.max(diff);
                }
            }
        }
        assert!(block < 1e-8, "horizontal block vs factor formula {block:.3e}");
        max_h = max_h.max(block);

        let nf_xi = geom
            .nabla_f
            .vec1(&reeb.xi)
            .sup_norm()
            .max(geom.nabla_f.vec2(&reeb.xi).sup_norm());
        assert!(nf_xi < 1e-9, "nabla F xi slots {nf_xi:.3e}");
        max_nf = max_nf.max(nf_xi);
    }

    let (m2, geoms2) = chart("contact_r5", &[], 5, 1);
    let rf = m2.reeb.as_ref().expect("contact chart has a Reeb field");
    for geom in &geoms2 {
        let reeb = reeb_at(rf, geom);
        match torsion_acm(geom, &reeb) {
            Err(Error::ReebNotParallel(_)) => {}
            other => panic!("expected ReebNotParallel on contact chart, got {other:?}"),
        }
    }
    println!(
        "criterion 7 (almost-contact theorem): PASS  xi slots exact 0, max parallel defect {max_par:.2e}, horizontal {max_h:.2e}, nabla F xi {max_nf:.2e}"
    );
}

/// Criterion 8: on the degenerate-f chart the transport formula reduces, in
/// kernel directions, to the singular branch 2 (nabla_W F) + dF(.,.,W).
#[test]
fn criterion_8_singular_branch() {
    let (_, geoms) = chart("f_with_kernel", &[], 25, 1);
    let mut max_r = 0.0f64;
    let mut evaluated = 0usize;
    for geom in &geoms {
        let oracle = solve_einstein_pointwise(geom).expect("oracle");
        if !oracle.consistent() {
            continue;
        }
        let tw = torsion_weak(geom).expect("weak formula");
        assert!(!geom.kernel.kernel.is_empty(), "chart should have a kernel direction");
        for w in &geom.kernel.kernel {
            let t_w = tw.tensor.vec2(w);
            let nf_w = geom.nabla_f.vec0(w);
            let df_w = geom.df_ext.vec2(w);
            let d = geom.dim();
            for y in 0..d {
                for z in 0..d {
                    let r = (t_w.get(y, z) - 2.0 * nf_w.get(y, z) - df_w.get(y, z)).abs();
                    assert!(r < 1e-10, "singular branch residual {r:.3e}");
                    max_r = max_r.max(r);
                }
            }
        }
        evaluated += 1;
    }
    assert!(evaluated > 0, "no consistent oracle point to evaluate");
    println!(
        "criterion 8 (singular branch, {evaluated} pts): PASS  max residual {max_r:.2e}"
    );
}

/// Criterion 9: analytic partials agree with central differences on every
/// chart, the two dF routes agree, and the default CLI run is clean and
/// reproducible.
#[test]
fn criterion_9_numerics_hygiene() {
    let mut max_fd = 0.0f64;
    let mut max_df = 0.0f64;
    for spec in registry() {
        let m = instantiate(&spec.name, &BTreeMap::new()).unwrap();
        let pts = sample_points(&m, 32, 9).unwrap();
        for p in &pts {
            let fd = fd_validate(&m.fields, p, 1e-5).expect("fd");
            assert!(
                fd.max_residual() < 1e-6,
                "finite differences disagree on {}: {:.3e}",
                spec.name,
                fd.max_residual()
            );
            max_fd = max_fd.max(fd.max_residual());

            // dF from coordinate partials of F vs the cyclic sum of the
            // Levi-Civita covariant derivative.
            let geom = point_geometry(&m.fields, p, DEFAULT_KERNEL_EPS).unwrap();
            let d = geom.dim();
            let nf = &geom.nabla_f;
            let mut r = 0.0f64;
            for x in 0..d {
                for y in 0..d {
                    for z in 0..d {
                        let cyc = nf.get(x, y, z) + nf.get(y, z, x) + nf.get(z, x, y);
                        r = r.max((geom.df_ext.get(x, y, z) - cyc).abs());
                    }
                }
            }
            assert!(r < 1e-9, "dF routes disagree on {}: {r:.3e}", spec.name);
            max_df = max_df.max(r);
        }
    }

    let bin = env!("CARGO_BIN_EXE_torsion-lab");
    let dir = tempfile::tempdir().unwrap();
    let r1 = dir.path().join("r1.jsonl");
    let r2 = dir.path().join("r2.jsonl");
    for path in [&r1, &r2] {
        let status = std::process::Command::new(bin)
            .arg("--report")
            .arg(path)
            .stdout(std::process::Stdio::null())
            .status()
            .expect("run CLI");
        assert_eq!(status.code(), Some(0), "default run must exit 0");
    }
    let strip = |p: &std::path::Path| {
        let s = std::fs::read_to_string(p).unwrap();
        s.split_once('\n').map_or(String::new(), |(_, rest)| rest.to_string())
    };
    assert_eq!(strip(&r1), strip(&r2), "report should be byte-identical modulo header");
    println!(
        "criterion 9 (numerics hygiene): PASS  max fd residual {max_fd:.2e}, max dF-route gap {max_df:.2e}, CLI deterministic"
    );
}
