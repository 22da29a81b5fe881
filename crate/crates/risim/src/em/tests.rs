use super::*;
use approx::assert_relative_eq;

const LAMBDA: f64 = 0.1;

fn half_wave(center: Vector3<f64>) -> Dipole {
    Dipole::z_oriented(center, LAMBDA / 2.0, LAMBDA / 500.0).unwrap()
}

fn small_scene(ne: usize) -> Scene {
    let tx = linear_array(
        Vector3::zeros(),
        Vector3::x(),
        0.5 * LAMBDA,
        2,
        LAMBDA / 2.0,
        LAMBDA / 500.0,
    )
    .unwrap();
    let rx = vec![half_wave(Vector3::new(0.96, 1.44, 0.0))];
    let ris = linear_array(
        Vector3::new(0.0, 2.4, 0.0),
        Vector3::x(),
        LAMBDA / 8.0,
        4,
        LAMBDA / 2.0,
        LAMBDA / 500.0,
    )
    .unwrap();
    let scatterers: Vec<Dipole> = (0..ne)
        .map(|i| half_wave(Vector3::new(0.3 + 0.07 * i as f64, 1.0, 0.02 * i as f64)))
        .collect();
    let ids = vec![0; ne];
    Scene::new(LAMBDA, tx, rx, ris, scatterers, ids, LAMBDA / 8.0).unwrap()
}

fn default_terminations(scene: &Scene) -> Terminations {
    let (m, l, _, ne) = scene.counts();
    Terminations::uniform(m, l, ne, Complex64::new(50.0, 0.0), Complex64::new(50.0, 0.0))
}

#[test]
fn half_wave_self_impedance_matches_golden() {
    let d = half_wave(Vector3::zeros());
    let z = mutual_impedance(&d, &d, LAMBDA).unwrap();
    assert!(
        (60.0..=90.0).contains(&z.re),
        "self resistance {} outside thin-wire range",
        z.re
    );
    assert!(z.im > 0.0, "half-wave reactance should be inductive, got {}", z.im);
    // Golden value frozen from the quadrature at rel_tol 1e-9.
    assert_relative_eq!(z.re, 73.12937530036787, max_relative = 1e-6);
    assert_relative_eq!(z.im, 42.54457655148294, max_relative = 1e-6);
}

#[test]
fn side_by_side_mutual_matches_classical_tables() {
    // Classical induced-EMF values for side-by-side half-wave dipoles
    // (King/Balanis tables): Z21(0.5 lambda) ~ -12.5 - j29.9 ohm and
    // Z21(1.0 lambda) ~ 4.0 + j17.7 ohm for vanishing wire radius.
    let a = half_wave(Vector3::zeros());
    let b = half_wave(Vector3::new(0.5 * LAMBDA, 0.0, 0.0));
    let z = mutual_impedance(&a, &b, LAMBDA).unwrap();
    assert!((z.re - -12.5).abs() < 1.0, "Re Z(0.5): {}", z.re);
    assert!((z.im - -29.9).abs() < 1.0, "Im Z(0.5): {}", z.im);

    let c = half_wave(Vector3::new(LAMBDA, 0.0, 0.0));
    let z1 = mutual_impedance(&a, &c, LAMBDA).unwrap();
    assert!((z1.re - 4.0).abs() < 1.0, "Re Z(1.0): {}", z1.re);
    assert!((z1.im - 17.7).abs() < 1.0, "Im Z(1.0): {}", z1.im);
}

#[test]
fn mutual_impedance_is_bitwise_symmetric() {
    let a = Dipole::new(
        Vector3::new(0.013, -0.02, 0.005),
        Vector3::new(0.1, 0.2, 0.9).normalize(),
        0.043,
        1.1e-4,
    )
    .unwrap();
    let b = Dipole::new(
        Vector3::new(-0.021, 0.033, 0.017),
        Vector3::new(-0.3, 0.1, 0.8).normalize(),
        0.051,
        2.0e-4,
    )
    .unwrap();
    let z_ab = mutual_impedance(&a, &b, LAMBDA).unwrap();
    let z_ba = mutual_impedance(&b, &a, LAMBDA).unwrap();
    assert_eq!(z_ab, z_ba);
}

#[test]
fn far_mutual_is_negligible() {
    let a = half_wave(Vector3::zeros());
    let near = half_wave(Vector3::new(0.5 * LAMBDA, 0.0, 0.0));
    let far = half_wave(Vector3::new(100.0 * LAMBDA, 0.0, 0.0));
    let z_near = mutual_impedance(&a, &near, LAMBDA).unwrap();
    let z_far = mutual_impedance(&a, &far, LAMBDA).unwrap();
    assert!(z_far.norm() < 0.01 * z_near.norm());
}

#[test]
fn mutual_magnitude_decays_beyond_two_wavelengths() {
    let a = half_wave(Vector3::zeros());
    let mags: Vec<f64> = [2.0, 4.0, 8.0, 16.0, 32.0]
        .iter()
        .map(|&d| {
            mutual_impedance(&a, &half_wave(Vector3::new(d * LAMBDA, 0.0, 0.0)), LAMBDA)
                .unwrap()
                .norm()
        })
        .collect();
    for pair in mags.windows(2) {
        assert!(pair[1] < pair[0], "expected decay, got {:?}", mags);
    }
}

#[test]
fn whole_wavelength_dipole_is_rejected() {
    let d = Dipole::z_oriented(Vector3::zeros(), LAMBDA, LAMBDA / 500.0).unwrap();
    assert!(matches!(
        mutual_impedance(&d, &d, LAMBDA),
        Err(Error::Invalid { .. })
    ));
}

#[test]
fn dipole_invariants_are_enforced() {
    assert!(Dipole::z_oriented(Vector3::zeros(), 0.05, 0.006).is_err()); // fat wire
    assert!(Dipole::new(Vector3::zeros(), Vector3::new(0.0, 0.0, 1.1), 0.05, 1e-4).is_err());
    assert!(Dipole::z_oriented(Vector3::zeros(), -0.05, 1e-4).is_err());
}

#[test]
fn coincident_dipoles_are_rejected() {
    let d = half_wave(Vector3::zeros());
    let err = Scene::new(
        LAMBDA,
        vec![d.clone()],
        vec![half_wave(Vector3::new(1.0, 0.0, 0.0))],
        vec![d.clone()],
        vec![],
        vec![],
        LAMBDA / 2.0,
    );
    assert!(err.is_err());
}

#[test]
fn wide_spacing_warns_but_builds() {
    let scene = Scene::new(
        LAMBDA,
        vec![half_wave(Vector3::zeros())],
        vec![half_wave(Vector3::new(1.0, 0.0, 0.0))],
        vec![
            half_wave(Vector3::new(0.0, 2.0, 0.0)),
            half_wave(Vector3::new(LAMBDA, 2.0, 0.0)),
        ],
        vec![],
        vec![],
        LAMBDA, // d = lambda > lambda/2
    );
    assert!(scene.is_ok());
}

#[test]
fn assembly_is_deterministic() {
    let scene = small_scene(3);
    let term = default_terminations(&scene);
    let a = assemble_impedance_set(&scene, &term).unwrap();
    let b = assemble_impedance_set(&scene, &term).unwrap();
    assert_eq!(a, b);
}

#[test]
fn assembly_without_scatterers_has_empty_obstacle_blocks() {
    let scene = small_scene(0);
    let term = default_terminations(&scene);
    let set = assemble_impedance_set(&scene, &term).unwrap();
    let (m, l, n, ne) = set.dims();
    assert_eq!((m, l, n, ne), (2, 1, 4, 0));
    assert_eq!(set.z_oo.nrows(), 0);
    assert_eq!(set.z_ro.ncols(), 0);
    assert_eq!(set.z_us.len(), 0);
}

#[test]
fn assembly_is_translation_invariant() {
    let scene = small_scene(2);
    let term = default_terminations(&scene);
    let base = assemble_impedance_set(&scene, &term).unwrap();
    let moved = assemble_impedance_set(
        &scene.translated(Vector3::new(1.7, -0.4, 0.9)),
        &term,
    )
    .unwrap();
    for (za, zb) in base.z_ss.iter().zip(moved.z_ss.iter()) {
        let rel = (za - zb).norm() / za.norm().max(1e-30);
        assert!(rel < 1e-9, "translation changed Z_SS by {rel:.3e}");
    }
    for (za, zb) in base.z_rt.iter().zip(moved.z_rt.iter()) {
        let rel = (za - zb).norm() / za.norm().max(1e-30);
        assert!(rel < 1e-9, "translation changed Z_RT by {rel:.3e}");
    }
}

#[test]
fn termination_dimension_mismatch_is_rejected() {
    let scene = small_scene(1);
    let bad = Terminations::uniform(3, 1, 1, Complex64::new(50.0, 0.0), Complex64::new(50.0, 0.0));
    assert!(matches!(
        assemble_impedance_set(&scene, &bad),
        Err(Error::Dimension { .. })
    ));
}

#[test]
fn cluster_placement_is_seeded() {
    let spec = ClusterSpec {
        n_clusters: 2,
        per_cluster: 5,
        region_min: Vector3::new(-0.5, 0.5, -0.2),
        region_max: Vector3::new(1.0, 1.8, 0.2),
        cluster_radius: 0.1,
        min_separation: 0.002,
        wire_length: LAMBDA / 2.0,
        wire_radius: LAMBDA / 500.0,
    };
    let (a, ids_a) = place_clusters(42, &spec).unwrap();
    let (b, ids_b) = place_clusters(42, &spec).unwrap();
    assert_eq!(a, b);
    assert_eq!(ids_a, ids_b);
    let (c, _) = place_clusters(43, &spec).unwrap();
    assert_ne!(a, c);
}

#[test]
fn cluster_placement_honors_separation_at_full_size() {
    let spec = ClusterSpec {
        n_clusters: 4,
        per_cluster: 50,
        region_min: Vector3::new(-0.6, 0.4, -0.2),
        region_max: Vector3::new(1.2, 2.0, 0.2),
        cluster_radius: 0.1,
        min_separation: 10.0 * LAMBDA / 500.0,
        wire_length: LAMBDA / 2.0,
        wire_radius: LAMBDA / 500.0,
    };
    let (dipoles, ids) = place_clusters(7, &spec).unwrap();
    assert_eq!(dipoles.len(), 200);
    assert_eq!(ids.len(), 200);
    assert_eq!(*ids.last().unwrap(), 3);
    for i in 0..dipoles.len() {
        for j in (i + 1)..dipoles.len() {
            let dist = (dipoles[i].center - dipoles[j].center).norm();
            assert!(dist >= spec.min_separation, "pair ({i},{j}) at {dist}");
        }
    }
}

#[test]
fn empty_cluster_request_yields_no_dipoles() {
    let spec = ClusterSpec {
        n_clusters: 3,
        per_cluster: 0,
        region_min: Vector3::zeros(),
        region_max: Vector3::new(1.0, 1.0, 1.0),
        cluster_radius: 0.1,
        min_separation: 0.01,
        wire_length: LAMBDA / 2.0,
        wire_radius: LAMBDA / 500.0,
    };
    let (dipoles, ids) = place_clusters(1, &spec).unwrap();
    assert!(dipoles.is_empty());
    assert!(ids.is_empty());
}

#[test]
fn impossible_separation_reports_constraint() {
    let spec = ClusterSpec {
        n_clusters: 1,
        per_cluster: 50,
        region_min: Vector3::zeros(),
        region_max: Vector3::new(0.01, 0.01, 0.01),
        cluster_radius: 0.005,
        min_separation: 0.5,
        wire_length: LAMBDA / 2.0,
        wire_radius: LAMBDA / 500.0,
    };
    match place_clusters(3, &spec) {
        Err(Error::Placement { constraint }) => {
            assert!(constraint.contains("min_separation"));
        }
        other => panic!("expected placement failure, got {other:?}"),
    }
}
