use euler_lab::euler2d::{steady_residual, RunSettings};
use euler_lab::presets::{random_bandlimited, shear, taylor_green};
use euler_lab::{EulerRun, EulerState, Grid2};

fn run(omega: euler_lab::SpectralField2, t_end: f64) -> EulerRun {
    let settings = RunSettings { t_end, diag_every: 5, ..Default::default() };
    let mut r = EulerRun::new(EulerState::new(omega, 0.0).unwrap(), settings).unwrap();
    r.run().unwrap();
    r
}

#[test]
fn random_data_keeps_energy_and_enstrophy() {
    let g = Grid2::square(64).unwrap();
    let r = run(random_bandlimited(g, 3, 4, 0.3).unwrap(), 2.0);
    let (a, b) = (&r.diagnostics[0], r.diagnostics.last().unwrap());
    assert_eq!(b.t, 2.0);
    assert!(((a.energy - b.energy) / a.energy).abs() < 1e-8);
    assert!(((a.enstrophy - b.enstrophy) / a.enstrophy).abs() < 1e-8);
    assert!(b.bkm_integral > 0.0);
}

#[test]
fn shear_and_taylor_green_do_not_move() {
    let g = Grid2::square(32).unwrap();
    for omega in [shear(g, 1.0), taylor_green(g, 0.0)] {
        let psi = omega.inv_laplacian().unwrap();
        assert!(steady_residual(&psi) < 1e-12);
        let r = run(omega.clone(), 3.0);
        assert!((&r.state.omega - &omega).max_abs() < 1e-12);
    }
}

#[test]
fn identical_inputs_give_identical_states() {
    let g = Grid2::square(32).unwrap();
    let a = run(random_bandlimited(g, 11, 6, 1.0).unwrap(), 0.5);
    let b = run(random_bandlimited(g, 11, 6, 1.0).unwrap(), 0.5);
    assert_eq!(a.state, b.state);
    assert_eq!(a.diagnostics, b.diagnostics);
}
