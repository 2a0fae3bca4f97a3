//! Structural properties of the wire MoM: block extraction, port solves,
//! radiation and mesh convergence.

mod common;

use std::f64::consts::PI;

use cmsynth_core::geometry::{dipole, wavelength, GroundPlane, Port, WireGeometry, ETA0};
use cmsynth_core::linalg::{frobenius, real_part, CVector, C64};
use cmsynth_core::mom::{assemble_impedance, port_drive_solve, radiate, radiated_power, CutSpec, SphereQuadrature};
use common::{ci, si, EULER_GAMMA};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const F: f64 = 1e9;

fn dipole_at(element: usize, center: [f64; 3], axis: [f64; 3], len_wl: f64, radius_wl: f64, segments: usize) -> (cmsynth_core::geometry::Wire, Port) {
    let lam = wavelength(F);
    let (w, p) = dipole(element, center, axis, len_wl * lam, radius_wl * lam, segments).unwrap();
    (w, Port { element, segment: p })
}

fn pair(spacing_wl: f64, segments: usize) -> WireGeometry {
    let lam = wavelength(F);
    let (w0, p0) = dipole_at(0, [0.0; 3], [0.0, 0.0, 1.0], 0.47, 1e-3, segments);
    let (w1, p1) = dipole_at(1, [spacing_wl * lam, 0.0, 0.0], [0.0, 0.0, 1.0], 0.47, 1e-3, segments);
    WireGeometry::new(vec![w0, w1], vec![p0, p1], None)
}

/// Input impedance with an ideal voltage source at the center gap.
fn input_impedance(g: &WireGeometry) -> C64 {
    let z = assemble_impedance(g, F).unwrap();
    let port = g.mesh().unwrap().port_basis;
    let zref = 1e-6;
    let sol = port_drive_solve(&z, &port, &CVector::from_element(1, C64::new(1.0, 0.0)), zref).unwrap();
    let i = sol.port_currents[0];
    (2.0 * zref.sqrt() - zref * i) / i
}

/// Induced-EMF impedance of a vanishingly thin half-wave dipole.
fn induced_emf_half_wave() -> C64 {
    let two_pi = 2.0 * PI;
    let r = ETA0 / (4.0 * PI) * (EULER_GAMMA + two_pi.ln() - ci(two_pi));
    C64::new(r, ETA0 / (4.0 * PI) * si(two_pi))
}

#[test]
fn block_extraction() {
    let g = pair(0.56, 10);
    let z = assemble_impedance(&g, F).unwrap();
    let z01 = z.extract_block(0, 1).unwrap();
    let z10 = z.extract_block(1, 0).unwrap();
    assert_eq!(frobenius(&(z01.entries.transpose() - &z10.entries)), 0.0);
    assert!(z.extract_block(0, 2).is_err());

    // A self block equals the element assembled on its own.
    let alone = WireGeometry::new(vec![g.wires[1].clone()], vec![g.ports[1].clone()], None);
    let za = assemble_impedance(&alone, F).unwrap();
    let z11 = z.extract_block(1, 1).unwrap();
    assert!(frobenius(&(za.entries - z11.entries)) < 1e-12 * frobenius(&z.entries));

    let single = WireGeometry::new(vec![g.wires[0].clone()], vec![g.ports[0].clone()], None);
    let zs = assemble_impedance(&single, F).unwrap();
    assert_eq!(zs.extract_block(0, 0).unwrap().entries, zs.entries);
}

#[test]
fn port_solve_properties() {
    let g = pair(0.5, 12);
    let z = assemble_impedance(&g, F).unwrap();
    let port = g.mesh().unwrap().port_basis;
    let zero = port_drive_solve(&z, &port, &CVector::zeros(2), 50.0).unwrap();
    assert_eq!(zero.currents.norm(), 0.0);

    let one = port_drive_solve(&z, &port, &CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]), 50.0).unwrap();
    assert!(one.reflected.norm() <= 1.0);

    // Symmetric drive on mirror-image dipoles gives mirror-image currents.
    let both = port_drive_solve(&z, &port, &CVector::from_element(2, C64::new(0.3, -0.8)), 50.0).unwrap();
    let half = z.dim() / 2;
    let a = both.currents.rows(0, half);
    let b = both.currents.rows(half, half);
    assert!((a - b).norm() < 1e-9 * a.norm());

    assert!(port_drive_solve(&z, &port, &CVector::zeros(1), 50.0).is_err());
    assert!(port_drive_solve(&z, &port, &CVector::zeros(2), 0.0).is_err());
}

#[test]
fn real_part_is_positive_semidefinite() {
    let g = pair(0.56, 20);
    let z = assemble_impedance(&g, F).unwrap();
    let re = real_part(&z.entries);
    let eig = re.clone().symmetric_eigen().eigenvalues;
    let max = eig.iter().cloned().fold(0.0, f64::max);
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min >= -1e-9 * max, "min eigenvalue {min} (max {max})");
}

#[test]
fn dipole_radiation_pattern() {
    let (w, p) = dipole_at(0, [0.0; 3], [0.0, 0.0, 1.0], 0.5, 1e-5, 2);
    let g = WireGeometry::new(vec![w], vec![p], None);
    let current = CVector::from_element(1, C64::new(1.0, 0.0));
    let cut = CutSpec::uniform(0.0, 5.0, 175.0, 5.0).unwrap();
    let ff = radiate(&current, &g, F, &cut, "half-wave").unwrap();
    let peak = ff.e_theta.iter().map(|e| e.norm()).fold(0.0, f64::max);
    assert!(ff.e_phi.iter().all(|e| e.norm() < 1e-10 * peak));
    // Sinusoidal current: cos(π/2·cos θ)/sin θ.
    let pattern = |t: f64| (0.5 * PI * t.cos()).cos() / t.sin();
    let broadside = ff.e_theta[cut.theta_deg.iter().position(|t| *t == 90.0).unwrap()].norm();
    let at60 = ff.e_theta[cut.theta_deg.iter().position(|t| *t == 60.0).unwrap()].norm();
    let expected = pattern(60f64.to_radians()) / pattern(PI / 2.0);
    assert!((at60 / broadside - expected).abs() < 0.02 * expected);

    // Same check for a finely meshed dipole fed at its center.
    let (w, p) = dipole_at(0, [0.0; 3], [0.0, 0.0, 1.0], 0.5, 1e-5, 20);
    let g = WireGeometry::new(vec![w], vec![p], None);
    let z = assemble_impedance(&g, F).unwrap();
    let sol = port_drive_solve(&z, &g.mesh().unwrap().port_basis, &CVector::from_element(1, C64::new(1.0, 0.0)), 50.0).unwrap();
    let cut = CutSpec { phi_deg: 0.0, theta_deg: vec![60.0, 90.0] };
    let ff = radiate(&sol.currents, &g, F, &cut, "meshed").unwrap();
    let ratio = ff.e_theta[0].norm() / ff.e_theta[1].norm();
    assert!((ratio - expected).abs() < 0.02 * expected, "{ratio} vs {expected}");
}

#[test]
fn radiation_is_linear() {
    let g = pair(0.7, 8);
    let n = g.mesh().unwrap().basis.len();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut random = || CVector::from_iterator(n, (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
    let (a, b) = (random(), random());
    let cut = CutSpec::uniform(45.0, 0.0, 180.0, 15.0).unwrap();
    let fa = radiate(&a, &g, F, &cut, "a").unwrap();
    let fb = radiate(&b, &g, F, &cut, "b").unwrap();
    let fab = radiate(&(&a + &b), &g, F, &cut, "ab").unwrap();
    for i in 0..cut.theta_deg.len() {
        let scale = fab.e_theta[i].norm() + fab.e_phi[i].norm() + 1.0;
        assert!((fab.e_theta[i] - fa.e_theta[i] - fb.e_theta[i]).norm() < 1e-12 * scale);
        assert!((fab.e_phi[i] - fa.e_phi[i] - fb.e_phi[i]).norm() < 1e-12 * scale);
    }
}

#[test]
fn sphere_power_matches_circuit_power_for_arbitrary_currents() {
    let lam = wavelength(F);
    let (wx, px) = dipole_at(0, [0.0, 0.0, 0.2 * lam], [1.0, 0.0, 0.0], 0.47, 1e-3, 10);
    let (wy, py) = dipole_at(1, [0.6 * lam, 0.1 * lam, 0.15 * lam], [0.0, 1.0, 0.0], 0.4, 1e-3, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for ground in [None, Some(GroundPlane { height: 0.0 })] {
        let g = WireGeometry::new(vec![wx.clone(), wy.clone()], vec![px.clone(), py.clone()], ground);
        let z = assemble_impedance(&g, F).unwrap();
        let mesh = g.mesh().unwrap();
        for _ in 0..3 {
            let i = CVector::from_iterator(z.dim(), (0..z.dim()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))));
            let circuit = 0.5 * (i.adjoint() * &z.entries * &i)[(0, 0)].re;
            let sphere = radiated_power(&mesh, g.ground_plane.as_ref(), &i, F, SphereQuadrature::default());
            assert!((sphere - circuit).abs() < 0.02 * circuit, "ground {ground:?}: {sphere} vs {circuit}");
        }
    }
}

#[test]
fn thin_half_wave_dipole_matches_induced_emf() {
    let expected = induced_emf_half_wave();
    let mut last = None;
    for segments in [20, 40] {
        let (w, p) = dipole_at(0, [0.0; 3], [0.0, 0.0, 1.0], 0.5, 1e-5, segments);
        let zin = input_impedance(&WireGeometry::new(vec![w], vec![p], None));
        assert!((zin - expected).norm() < 0.10 * expected.norm(), "{segments} segments: {zin} vs {expected}");
        if let Some(prev) = last {
            let change: C64 = zin - prev;
            assert!(change.norm() < 0.05 * zin.norm(), "mesh doubling changed Zin by {change}");
        }
        last = Some(zin);
    }
}

#[test]
fn mesh_doubling_changes_input_impedance_little() {
    let mut last: Option<C64> = None;
    for segments in [10, 20, 40] {
        let (w, p) = dipole_at(0, [0.0; 3], [0.0, 0.0, 1.0], 0.5, 1e-3, segments);
        let zin = input_impedance(&WireGeometry::new(vec![w], vec![p], None));
        if let Some(prev) = last {
            assert!((zin - prev).norm() < 0.05 * zin.norm(), "{segments}: {zin} vs {prev}");
        }
        last = Some(zin);
    }
}
