//! Coupled-GSM solutions against the direct dense MoM solve.

use cmsynth_core::array::{
    array_farfield, build_measured_model, couple, direct_solve_with, element_currents, solve_excitation,
    solve_iterative,
};
use cmsynth_core::geometry::{dipole, wavelength, Port, WireGeometry};
use cmsynth_core::linalg::{relative_error, CVector, C64};
use cmsynth_core::mom::{radiate, CutSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const F: f64 = 1e9;

fn parallel_dipoles(count: usize, spacing_wl: f64, segments: usize) -> WireGeometry {
    let lam = wavelength(F);
    let mut wires = Vec::new();
    let mut ports = Vec::new();
    for k in 0..count {
        let (w, p) = dipole(
            k,
            [k as f64 * spacing_wl * lam, 0.0, 0.0],
            [0.0, 0.0, 1.0],
            0.47 * lam,
            lam / 1000.0,
            segments,
        )
        .unwrap();
        wires.push(w);
        ports.push(Port { element: k, segment: p });
    }
    WireGeometry::new(wires, ports, None)
}

fn random_drive(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    CVector::from_iterator(n, (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))))
}

#[test]
fn full_mode_model_matches_direct_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for count in [2, 3] {
        let g = parallel_dipoles(count, 0.56, 12);
        let (model, z) = build_measured_model(&g, F, None, 50.0).unwrap();
        for _ in 0..20 {
            let v = random_drive(&mut rng, count);
            let sol = solve_excitation(&model, &v, &CVector::zeros(model.total_modes())).unwrap();
            let oracle = direct_solve_with(&z, &g, &v, 50.0).unwrap();
            let ew = relative_error(&sol.w, &oracle.w);
            assert!(ew < 1e-6, "K={count}: w error {ew}");
            let cur = element_currents(&sol, &model.bases).unwrap();
            let stacked = CVector::from_iterator(
                oracle.currents.len(),
                cur.iter().flat_map(|c| c.iter().copied()),
            );
            let ei = relative_error(&stacked, &oracle.currents);
            assert!(ei < 1e-6, "K={count}: current error {ei}");
        }
    }
}

#[test]
fn two_mode_truncation_within_five_percent() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g = parallel_dipoles(2, 0.56, 40);
    let (model, z) = build_measured_model(&g, F, Some(2), 50.0).unwrap();
    for _ in 0..5 {
        let v = random_drive(&mut rng, 2);
        let sol = solve_excitation(&model, &v, &CVector::zeros(4)).unwrap();
        let oracle = direct_solve_with(&z, &g, &v, 50.0).unwrap();
        let ew = relative_error(&sol.w, &oracle.w);
        assert!(ew < 0.05, "w error {ew}");
    }
}

#[test]
fn closed_form_blocks_reproduce_solution() {
    let g = parallel_dipoles(2, 0.56, 12);
    let (model, _) = build_measured_model(&g, F, None, 50.0).unwrap();
    let blocks = couple(&model).unwrap();
    let v = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.3, -0.2)]);
    let a = CVector::from_iterator(model.total_modes(), (0..model.total_modes()).map(|i| C64::new(0.01 * i as f64, 0.0)));
    let sol = solve_excitation(&model, &v, &a).unwrap();
    let w = &blocks.gamma * &v + &blocks.r * &a;
    assert!(relative_error(&w, &sol.w) < 1e-9);
    let sym = (&blocks.gamma - blocks.gamma.transpose()).norm();
    assert!(sym < 1e-9, "coupled port block asymmetry {sym}");
    println!("spectral radius {}", blocks.spectral_radius);
    if blocks.spectral_radius < 1.0 {
        let (it, n) = solve_iterative(&model, &v, &a, 1e-13, 10_000).unwrap();
        assert!(relative_error(&it.f, &sol.f) < 1e-9, "after {n} iterations");
    }
}

#[test]
fn modal_far_field_equals_current_far_field() {
    let g = parallel_dipoles(2, 0.56, 12);
    let (model, _) = build_measured_model(&g, F, None, 50.0).unwrap();
    let v = CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 1.0)]);
    let sol = solve_excitation(&model, &v, &CVector::zeros(model.total_modes())).unwrap();
    let cut = CutSpec::uniform(0.0, 0.0, 180.0, 15.0).unwrap();
    let ff = array_farfield(&sol, &model.bases, &cut, "array").unwrap();
    let cur = element_currents(&sol, &model.bases).unwrap();
    let all = CVector::from_iterator(cur.iter().map(|c| c.len()).sum(), cur.iter().flat_map(|c| c.iter().copied()));
    let direct = radiate(&all, &g, F, &cut, "direct").unwrap();
    for i in 0..ff.theta_deg.len() {
        assert!((ff.e_theta[i] - direct.e_theta[i]).norm() < 1e-9 * (1.0 + direct.e_theta[i].norm()));
        assert!((ff.e_phi[i] - direct.e_phi[i]).norm() < 1e-9 * (1.0 + direct.e_phi[i].norm()));
    }
}
