use euler_lab::selfsim::{clm_profile, newton_solve, sup_norm, ProfileGrid, ProfileProblem};
use euler_lab::Error;

#[test]
fn newton_recovers_the_profile_from_nearby_guesses() {
    let problem = ProfileProblem::new(ProfileGrid::new(96, 1.0).unwrap());
    let exact = problem.grid.sample(clm_profile);
    for (amp, lambda0) in [(0.05, 1.05), (-0.05, 0.95), (0.1, 1.0)] {
        let guess = problem.grid.sample(|x| clm_profile(x) + amp * x * (-x * x).exp());
        let sol = newton_solve(&problem, &guess, lambda0).unwrap();
        assert!(sol.converged && (sol.lambda - 1.0).abs() < 1e-8);
        let err = sol.omega.iter().zip(&exact).map(|(a, b)| a - b).collect::<Vec<_>>();
        assert!(sup_norm(&err) < 1e-6);
    }
}

#[test]
fn distant_guesses_either_converge_or_report_divergence() {
    let problem = ProfileProblem::new(ProfileGrid::new(64, 1.0).unwrap());
    let guess = problem.grid.sample(|x| -4.0 * x * (-x * x).exp());
    match newton_solve(&problem, &guess, 1.5) {
        Ok(sol) => assert!(sol.residual_norm < problem.tol),
        Err(e) => assert!(matches!(e, Error::Divergence { .. } | Error::SingularBorderedSystem { .. })),
    }
}
