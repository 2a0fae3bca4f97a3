//! Scattering-matrix identities: eigenvalue map, synthetic elements,
//! losslessness and the measured transmit block.

use std::f64::consts::PI;

use cmsynth_core::geometry::{dipole, wavelength, Port, WireGeometry};
use cmsynth_core::gsm::{
    assert_lossless, build_synthetic_gsm, eigenvalue_to_scattering, measured_gsm, reciprocity_residual,
    scattering_from_s0_and_t, scattering_to_eigenvalue, scattering_via_termination, Gsm, Sigma,
    SyntheticElementParams, Termination,
};
use cmsynth_core::linalg::{frobenius, identity, CMatrix, CVector, C64};
use cmsynth_core::modal::compute_characteristic_modes;
use cmsynth_core::mom::{assemble_impedance, port_drive_solve};
use proptest::prelude::*;

fn j() -> C64 {
    C64::new(0.0, 1.0)
}

fn column(t: &CVector) -> CMatrix {
    CMatrix::from_column_slice(t.len(), 1, t.as_slice())
}

fn random_params(phases: &[f64], mags: &[f64], plus_j: bool) -> SyntheticElementParams {
    SyntheticElementParams {
        s_phases: phases.to_vec(),
        t_magnitudes: mags.to_vec(),
        sigma: if plus_j { Sigma::PlusJ } else { Sigma::MinusJ },
    }
    .normalized()
}

fn params_strategy() -> impl Strategy<Value = SyntheticElementParams> {
    (2usize..=6)
        .prop_flat_map(|n| {
            (
                prop::collection::vec(-PI..PI, n),
                prop::collection::vec(0.05f64..1.0, n),
                any::<bool>(),
            )
        })
        .prop_map(|(p, m, s)| random_params(&p, &m, s))
}

#[test]
fn eigenvalue_map_special_points() {
    assert_eq!(eigenvalue_to_scattering(0.0), C64::new(-1.0, 0.0));
    assert_eq!(eigenvalue_to_scattering(1.0), C64::new(0.0, 1.0));
    assert_eq!(eigenvalue_to_scattering(-1.0), C64::new(0.0, -1.0));
    for lam in [1e6, -1e6] {
        let s = eigenvalue_to_scattering(lam);
        assert!((s.norm() - 1.0).abs() < 1e-15);
        // |s − 1| = 2/√(1 + λ²) exactly.
        let expected = 2.0 / (1.0 + lam * lam).sqrt();
        assert!(((s - 1.0).norm() / expected - 1.0).abs() < 1e-8, "λ = {lam}: s = {s}");
    }
    for lam in [1e9, -1e9] {
        assert!((eigenvalue_to_scattering(lam) - 1.0).norm() < 1e-8);
    }
}

#[test]
fn eigenvalue_round_trip() {
    let mut lam = -1e6;
    while lam <= 1e6 {
        for x in [lam, -lam, lam * 0.37] {
            let back = scattering_to_eigenvalue(eigenvalue_to_scattering(x)).unwrap();
            assert!((back - x).abs() <= 1e-10 * x.abs().max(1.0), "λ = {x} came back as {back}");
        }
        lam = if lam.abs() < 1e-3 { 1e-3 } else if lam < 0.0 { lam / 3.0 } else { lam * 3.0 };
    }
    assert!(scattering_to_eigenvalue(C64::new(1.0, 0.0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn synthetic_gsms_are_lossless(params in params_strategy()) {
        let g = build_synthetic_gsm(&params).unwrap();
        let report = assert_lossless(&g);
        prop_assert!(report.passed(), "{report:?}");

        let n = g.modes();
        // Block identities of a unitary Ψ with Γ = 0.
        let sts = g.s.adjoint() * &g.s + g.t.conjugate() * g.t.transpose();
        prop_assert!(frobenius(&(sts - identity(n))) < 1e-9);
        prop_assert!(frobenius(&(g.s.adjoint() * &g.t)) < 1e-9);

        // S0·T* = T·Γ_L,0⁻¹ for the stored termination.
        let gl0 = g.termination.reflection();
        let lhs = CMatrix::from_diagonal(&g.s0) * g.t.conjugate();
        prop_assert!(frobenius(&(lhs - &g.t / gl0)) < 1e-10);

        // Terminating the ports reproduces the closed form.
        let via = scattering_via_termination(&g.s0, &g.t, &g.r, &g.gamma, &(identity(1) * gl0)).unwrap();
        prop_assert!(frobenius(&(via - &g.s)) < 1e-10);

        prop_assert!(reciprocity_residual(&g.s0, &g.t) < 1e-10);
    }

    #[test]
    fn closed_form_is_independent_of_the_termination(
        phases in prop::collection::vec(-PI..PI, 2..6),
        mags in prop::collection::vec(0.05f64..1.0, 6),
        which in 0usize..4,
    ) {
        let n = phases.len();
        let norm = mags[..n].iter().map(|m| m * m).sum::<f64>().sqrt();
        let t = CVector::from_iterator(n, (0..n).map(|i| C64::from_polar(mags[i] / norm, phases[i])));
        let gl0 = [C64::new(1.0, 0.0), C64::new(-1.0, 0.0), j(), -j()][which];
        // The S0 consistent with Γ_L,0: S0·T* = T/Γ_L,0.
        let s0 = CVector::from_iterator(n, t.iter().map(|x| C64::from_polar(1.0, 2.0 * x.arg()) / gl0));
        let tm = column(&t);
        let eq14 = scattering_from_s0_and_t(&s0, &tm).unwrap();
        let eq10 = scattering_via_termination(&s0, &tm, &tm.transpose(), &CMatrix::zeros(1, 1), &(identity(1) * gl0)).unwrap();
        prop_assert!(frobenius(&(eq14 - eq10)) < 1e-10);
    }
}

/// Table I modal rows: (∠s1′, ∠s2′) in degrees, then (|t1′|, |t2′|).
const TABLE_ROWS: [([f64; 2], [f64; 2]); 9] = [
    ([80.0, -50.0], [0.80, 0.60]),
    ([84.0, -45.0], [0.83, 0.55]),
    ([-50.0, 81.0], [0.60, 0.80]),
    ([-43.0, 86.0], [0.54, 0.84]),
    ([56.0, -35.0], [0.78, 0.62]),
    ([-43.0, 86.0], [0.54, 0.84]),
    ([-50.0, 81.0], [0.60, 0.80]),
    ([84.0, -45.0], [0.83, 0.55]),
    ([80.0, -50.0], [0.80, 0.60]),
];

fn wrap_deg(x: f64) -> f64 {
    let y = x.rem_euclid(360.0);
    if y > 180.0 { y - 360.0 } else { y }
}

#[test]
fn table_rows_are_matched_and_reciprocal() {
    for (k, (phases, mags)) in TABLE_ROWS.iter().enumerate() {
        let power = mags[0] * mags[0] + mags[1] * mags[1];
        assert!((power - 1.0).abs() < 0.01, "row {}: Σ|t|² = {power}", k + 1);
        for sigma in [Sigma::PlusJ, Sigma::MinusJ] {
            let params = SyntheticElementParams {
                s_phases: phases.iter().map(|p| p.to_radians()).collect(),
                t_magnitudes: mags.to_vec(),
                sigma,
            }
            .normalized();
            let t = params.transmit();
            let dt = (t[1] / t[0]).arg().to_degrees();
            let ds = phases[1] - phases[0];
            // 2·∠(t2/t1) ≡ ∠(s2/s1) (mod 360°), i.e. ∠(t2/t1) fixed mod 180°.
            let mismatch = wrap_deg(2.0 * dt - ds).abs() / 2.0;
            assert!(mismatch < 1.0, "row {}: phase relation off by {mismatch}°", k + 1);
            let g = build_synthetic_gsm(&params).unwrap();
            let report = assert_lossless(&g);
            assert!(report.passed(), "row {}: {report:?}", k + 1);
            assert!(frobenius(&(&g.s - g.s.transpose())) < 1e-9);
        }
    }
}

#[test]
fn phase_relation_controls_reciprocity() {
    let (s1, s2) = (80f64.to_radians(), (-50f64).to_radians());
    let s0 = CVector::from_vec(vec![C64::from_polar(1.0, s1), C64::from_polar(1.0, s2)]);
    let t_with = |dt: f64| CMatrix::from_column_slice(2, 1, &[C64::from_polar(0.8, 0.3), C64::from_polar(0.6, 0.3 + dt)]);
    let half = 0.5 * (s2 - s1);
    assert!(reciprocity_residual(&s0, &t_with(half)) < 1e-12);
    // The other root of the doubled-angle relation is equally valid.
    assert!(reciprocity_residual(&s0, &t_with(half + PI)) < 1e-12);
    let t = t_with(half + 10f64.to_radians());
    let norm2 = frobenius(&t).powi(2);
    assert!(reciprocity_residual(&s0, &t) > 0.01 * norm2);
    // The negated relation only coincides when ∠(s2/s1) ≡ 0 (mod 180°).
    assert!(reciprocity_residual(&s0, &t_with(-half)) > 0.01 * norm2);
}

#[test]
fn single_mode_is_always_reciprocal() {
    for p in [-3.0, -0.4, 0.0, 1.2, 2.9] {
        let s0 = CVector::from_vec(vec![C64::from_polar(1.0, p)]);
        let t = CMatrix::from_column_slice(1, 1, &[C64::from_polar(1.0, 0.7 * p + 0.1)]);
        assert!(reciprocity_residual(&s0, &t) < 1e-15);
    }
}

#[test]
fn minimum_scattering_form() {
    let t = CMatrix::from_column_slice(3, 1, &[C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]);
    let s = scattering_from_s0_and_t(&CVector::from_element(3, C64::new(1.0, 0.0)), &t).unwrap();
    let expected = CMatrix::from_diagonal(&CVector::from_vec(vec![
        C64::new(0.0, 0.0),
        C64::new(1.0, 0.0),
        C64::new(1.0, 0.0),
    ]));
    assert!(frobenius(&(s - expected)) < 1e-15);
    let half = t.map(|x| x * 0.5);
    assert!(scattering_from_s0_and_t(&CVector::from_element(3, C64::new(1.0, 0.0)), &half).is_err());
}

#[test]
fn portless_scatterer_keeps_s0() {
    let s0 = CVector::from_vec(vec![j(), C64::new(-1.0, 0.0)]);
    let t = CMatrix::zeros(2, 1);
    for gl0 in [C64::new(1.0, 0.0), C64::new(-1.0, 0.0)] {
        let s = scattering_via_termination(&s0, &t, &t.transpose(), &CMatrix::zeros(1, 1), &(identity(1) * gl0)).unwrap();
        assert!(frobenius(&(s - CMatrix::from_diagonal(&s0))) == 0.0);
    }
}

#[test]
fn singular_termination_is_reported() {
    let s0 = CVector::from_vec(vec![j()]);
    let t = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    let gamma = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    let err = scattering_via_termination(&s0, &t, &t, &gamma, &identity(1)).unwrap_err();
    assert_eq!(err.kind(), "termination");
}

#[test]
fn single_mode_transmit_leaves_other_modes_untouched() {
    let params = SyntheticElementParams {
        s_phases: vec![0.4, -1.1],
        t_magnitudes: vec![1.0, 0.0],
        sigma: Sigma::PlusJ,
    };
    let g = build_synthetic_gsm(&params).unwrap();
    assert!(assert_lossless(&g).passed());
    assert!((g.s[(1, 1)] - g.s0[1]).norm() < 1e-15);
    assert!(g.s[(0, 1)].norm() < 1e-15 && g.s[(1, 0)].norm() < 1e-15);
    assert!(g.s[(0, 0)].norm() < 1e-15);
}

#[test]
fn sigma_flip_negates_scattering() {
    let params = SyntheticElementParams {
        s_phases: vec![80f64.to_radians(), (-50f64).to_radians()],
        t_magnitudes: vec![0.8, 0.6],
        sigma: Sigma::PlusJ,
    };
    let flipped = SyntheticElementParams {
        s_phases: params.s_phases.iter().map(|p| p + PI).collect(),
        sigma: params.sigma.flipped(),
        ..params.clone()
    };
    let a = build_synthetic_gsm(&params).unwrap();
    let b = build_synthetic_gsm(&flipped).unwrap();
    assert!(frobenius(&(&a.t - &b.t)) < 1e-12, "transmit block changed");
    assert!((&a.s0 + &b.s0).norm() < 1e-12);
    assert!(frobenius(&(&a.s + &b.s)) < 1e-12);
    assert!(assert_lossless(&b).passed());
}

#[test]
fn lossless_checks_detect_violations() {
    let params = SyntheticElementParams {
        s_phases: vec![0.3, 2.0],
        t_magnitudes: vec![0.6, 0.8],
        sigma: Sigma::MinusJ,
    };
    let mut g = build_synthetic_gsm(&params).unwrap();
    g.t *= C64::new(0.9, 0.0);
    g.r = g.t.transpose();
    let report = assert_lossless(&g);
    assert!(!report.matched_ok(), "{report:?}");
    assert!(!report.passed());

    // Unitary S0 with a transmit phase that violates the reciprocity relation.
    let s0 = CVector::from_vec(vec![C64::from_polar(1.0, 1.1), C64::from_polar(1.0, -0.4), C64::from_polar(1.0, 2.5)]);
    let t = CVector::from_vec(vec![C64::from_polar(0.6, 0.0), C64::from_polar(0.64, 1.3), C64::from_polar(0.48, -0.2)]);
    let tm = column(&t);
    let s = scattering_from_s0_and_t(&s0, &tm).unwrap();
    let bad = Gsm {
        s_minus_i: &s - identity(3),
        s,
        r: tm.transpose(),
        t: tm,
        gamma: CMatrix::zeros(1, 1),
        s0,
        termination: Termination::Open,
        frequency: 0.0,
    };
    let report = assert_lossless(&bad);
    assert!(report.matched_ok());
    assert!(!report.symmetric_ok(), "{report:?}");
}

fn center_fed_dipole(segments: usize) -> WireGeometry {
    let lam = wavelength(1e9);
    let (w, p) = dipole(0, [0.0; 3], [0.0, 0.0, 1.0], 0.5 * lam, lam / 1000.0, segments).unwrap();
    WireGeometry::new(vec![w], vec![Port { element: 0, segment: p }], None)
}

#[test]
fn transmit_block_of_a_driven_dipole() {
    let g = center_fed_dipole(16);
    let z = assemble_impedance(&g, 1e9).unwrap();
    let n = z.dim();
    let basis = compute_characteristic_modes(&z, n).unwrap();
    let port = g.mesh().unwrap().port_basis;

    // A pure eigencurrent projects onto a single row; scaling it scales the row.
    let lam = basis.eigenvalues[2];
    let pure = basis.mode_current(2).unwrap();
    let ip = CMatrix::from_columns(&[pure.clone(), &pure * C64::new(1.0, lam)]);
    let t = cmsynth_core::gsm::transmit_from_ports(&basis, &z, &ip).unwrap();
    for m in 0..n {
        let (e0, e1) = if m == 2 { (C64::new(1.0, 0.0), C64::new(1.0, lam)) } else { (C64::new(0.0, 0.0), C64::new(0.0, 0.0)) };
        assert!((t[(m, 0)] - e0).norm() < 1e-8, "row {m}: {}", t[(m, 0)]);
        assert!((t[(m, 1)] - e1).norm() < 1e-8 * (1.0 + lam.abs()), "row {m}: {}", t[(m, 1)]);
    }

    let gsm = measured_gsm(&basis, &z, &port, 50.0).unwrap();
    // Accepted power equals radiated power: Σ|t|² + |Γ|² = 1.
    let balance = gsm.t.column(0).norm_squared() + gsm.gamma[(0, 0)].norm_sqr();
    assert!((balance - 1.0).abs() < 0.02, "power balance {balance}");

    // A center port excites only current-symmetric modes.
    let mesh = g.mesh().unwrap();
    let sol = port_drive_solve(&z, &port, &CVector::from_element(1, C64::new(1.0, 0.0)), 50.0).unwrap();
    assert!(sol.reflected[0].norm() <= 1.0);
    for m in 0..n {
        let col = basis.eigencurrents.column(m);
        let odd = (0..n).all(|i| (col[i] + col[n - 1 - i]).abs() < 1e-6 * col.amax());
        if odd {
            assert!(gsm.t[(m, 0)].norm() < 1e-6, "odd mode {m} excited: {}", gsm.t[(m, 0)]);
        }
    }
    assert_eq!(mesh.basis.len(), n);
}
