//! Incompressible porous media flow on the torus: `u = ℙ(-ρe₂)`, `∂tρ + u·∇ρ = 0`.

use crate::error::{Error, Result};
use crate::euler2d::advection_term;
use crate::spectral::{leray_project, tail_ratio2, Grid2, SpectralField2, VectorField2, C64};

#[derive(Clone, Debug, PartialEq)]
pub struct IpmState {
    pub rho: SpectralField2,
    pub t: f64,
}

/// Darcy velocity `ℙ(0, -ρ)` with the spatially constant mode removed, so that
/// `curl u = -∂₁ρ`.
pub fn ipm_velocity(rho: &SpectralField2) -> VectorField2 {
    let g = *rho.grid();
    let force = VectorField2 { u1: SpectralField2::zeros(g), u2: rho.scaled(-1.0) };
    let mut u = leray_project(&force);
    u.u1.coeffs_mut()[0] = C64::new(0.0, 0.0);
    u.u2.coeffs_mut()[0] = C64::new(0.0, 0.0);
    u
}

pub fn ipm_rhs(rho: &SpectralField2) -> SpectralField2 {
    let (u1, u2) = ipm_velocity(rho).to_physical();
    let mut r = advection_term(rho.grid(), &u1, &u2, rho);
    r.coeffs_mut()[0] = C64::new(0.0, 0.0);
    r
}

#[derive(Clone, Debug, PartialEq)]
pub struct IpmSettings {
    pub cfl: f64,
    pub t_end: f64,
    pub diag_every: usize,
    pub casimir_powers: Vec<u32>,
    /// Upper bound on the step, needed when the fluid is at rest.
    pub dt_max: f64,
    pub tail_tol: f64,
    /// Stop at the first step whose spectral tail exceeds `tail_tol`.
    pub stop_when_under_resolved: bool,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            t_end: 10.0,
            diag_every: 10,
            casimir_powers: vec![2, 4],
            dt_max: 0.1,
            tail_tol: 1e-6,
            stop_when_under_resolved: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IpmDiagnostics {
    pub t: f64,
    pub grad_rho_max: f64,
    /// `∫ρ y` over the cell `[0, 2π) × [-π, π)`.
    pub potential_energy: f64,
    pub mass: f64,
    pub casimirs: Vec<f64>,
    pub tail: f64,
}

pub fn ipm_diagnostics(state: &IpmState, powers: &[u32]) -> IpmDiagnostics {
    let g = *state.rho.grid();
    let cell = g.dx() * g.dy();
    let rho = state.rho.to_physical();
    let grad = state.rho.gradient();
    let (gx, gy) = grad.to_physical();
    let grad_rho_max = gx.iter().zip(&gy).fold(0.0f64, |m, (a, b)| m.max((a * a + b * b).sqrt()));
    let half = 0.5 * g.ly;
    let mut pot = 0.0;
    for j in 0..g.ny {
        let y = g.y(j);
        let y = if y >= half { y - g.ly } else { y };
        pot += y * rho[j * g.nx..(j + 1) * g.nx].iter().sum::<f64>();
    }
    IpmDiagnostics {
        t: state.t,
        grad_rho_max,
        potential_energy: pot * cell,
        mass: rho.iter().sum::<f64>() * cell,
        casimirs: powers.iter().map(|&p| rho.iter().map(|v| v.powi(p as i32)).sum::<f64>() * cell).collect(),
        tail: tail_ratio2(&state.rho),
    }
}

#[derive(Clone, Debug)]
pub struct IpmRun {
    pub state: IpmState,
    pub diagnostics: Vec<IpmDiagnostics>,
    pub steps: usize,
    pub under_resolved_at: Option<f64>,
}

fn rk4(rho: &SpectralField2, dt: f64) -> SpectralField2 {
    let stage = |k: &SpectralField2, h: f64| {
        let mut s = rho.clone();
        s.axpy(h, k);
        s
    };
    let k1 = ipm_rhs(rho);
    let k2 = ipm_rhs(&stage(&k1, 0.5 * dt));
    let k3 = ipm_rhs(&stage(&k2, 0.5 * dt));
    let k4 = ipm_rhs(&stage(&k3, dt));
    let mut out = rho.clone();
    out.axpy(dt / 6.0, &k1);
    out.axpy(dt / 3.0, &k2);
    out.axpy(dt / 3.0, &k3);
    out.axpy(dt / 6.0, &k4);
    out
}

fn max_speed(u: &VectorField2) -> f64 {
    let (a, b) = u.to_physical();
    a.iter().zip(&b).fold(0.0, |m, (x, y)| m.max((x * x + y * y).sqrt()))
}

/// RK4 transport of the density with CFL-limited steps, recording diagnostics every
/// `diag_every` steps and at the end.
pub fn ipm_run(rho0: SpectralField2, settings: &IpmSettings) -> Result<IpmRun> {
    if !(settings.cfl > 0.0 && settings.cfl <= 0.5) {
        return Err(Error::Precondition(format!("CFL number {} must lie in (0, 0.5]", settings.cfl)));
    }
    if settings.diag_every == 0 {
        return Err(Error::Precondition("diag_every must be positive".into()));
    }
    let g: Grid2 = *rho0.grid();
    let mut state = IpmState { rho: rho0.dealias(), t: 0.0 };
    let mut diagnostics = vec![ipm_diagnostics(&state, &settings.casimir_powers)];
    let mut steps = 0;
    let mut under_resolved_at = None;
    let eps = 1e-12 * settings.t_end.abs().max(1.0);
    while state.t < settings.t_end - eps {
        let umax = max_speed(&ipm_velocity(&state.rho));
        let mut dt = settings.dt_max.min(settings.t_end - state.t);
        if umax > 0.0 {
            dt = dt.min(settings.cfl * g.dx().min(g.dy()) / umax);
        }
        let rho = rk4(&state.rho, dt);
        if rho.coeffs().iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NumericalBlowup { t: state.t + dt });
        }
        state = IpmState { rho, t: state.t + dt };
        if (state.t - settings.t_end).abs() <= eps {
            state.t = settings.t_end;
        }
        steps += 1;
        let flagged = under_resolved_at.is_none() && tail_ratio2(&state.rho) > settings.tail_tol;
        if flagged {
            under_resolved_at = Some(state.t);
        }
        if steps % settings.diag_every == 0 || flagged {
            diagnostics.push(ipm_diagnostics(&state, &settings.casimir_powers));
        }
        if flagged && settings.stop_when_under_resolved {
            break;
        }
    }
    if diagnostics.last().map(|d| d.t) != Some(state.t) {
        diagnostics.push(ipm_diagnostics(&state, &settings.casimir_powers));
    }
    Ok(IpmRun { state, diagnostics, steps, under_resolved_at })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::{heavy_over_light, random_bandlimited, stratified_with_bump};
    use proptest::prelude::*;

    fn g(n: usize) -> Grid2 {
        Grid2::square(n).unwrap()
    }

    #[test]
    fn stratified_density_is_at_rest() {
        let rho = SpectralField2::from_fn(g(32), |_, y| y.cos() + 0.3 * (2.0 * y).sin() + 2.0);
        let u = ipm_velocity(&rho);
        assert!(u.u1.max_abs() < 1e-14 && u.u2.max_abs() < 1e-14);
        let zero = ipm_velocity(&SpectralField2::zeros(g(16)));
        assert!(zero.u1.max_abs() == 0.0 && zero.u2.max_abs() == 0.0);
    }

    #[test]
    fn single_mode_velocity() {
        let rho = SpectralField2::from_fn(g(32), |x, _| x.cos());
        let u = ipm_velocity(&rho);
        let expect = SpectralField2::from_fn(g(32), |x, _| -x.cos());
        assert!(u.u1.max_abs() < 1e-14);
        assert!((&u.u2 - &expect).max_abs() < 1e-14);
        let curl = u.curl();
        assert!((&curl - &SpectralField2::from_fn(g(32), |x, _| x.sin())).max_abs() < 1e-13);
    }

    #[test]
    fn rest_state_is_preserved() {
        let rho = SpectralField2::from_fn(g(32), |_, y| y.cos() + 0.3 * (2.0 * y).sin());
        let settings = IpmSettings { t_end: 10.0, dt_max: 0.5, ..Default::default() };
        let run = ipm_run(rho.clone(), &settings).unwrap();
        assert_eq!(run.state.t, 10.0);
        assert!((&run.state.rho - &rho).max_abs() < 1e-10);
    }

    #[test]
    fn mass_and_casimirs_are_conserved_while_resolved() {
        let rho = stratified_with_bump(g(64), 0.05, 0.3, true);
        let settings = IpmSettings { t_end: 2.0, ..Default::default() };
        let run = ipm_run(rho, &settings).unwrap();
        assert!(run.under_resolved_at.is_none());
        let (a, b) = (&run.diagnostics[0], run.diagnostics.last().unwrap());
        assert!((a.mass - b.mass).abs() < 1e-12);
        for (x, y) in a.casimirs.iter().zip(&b.casimirs) {
            assert!(((x - y) / x).abs() < 1e-6);
        }
    }

    #[test]
    fn potential_energy_uses_centered_heights() {
        let rho = heavy_over_light(g(64), 0.0);
        let d = ipm_diagnostics(&IpmState { rho, t: 0.0 }, &[]);
        assert!(d.potential_energy > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn curl_of_velocity_is_minus_horizontal_derivative(seed in 0u64..1000) {
            let rho = random_bandlimited(g(32), seed, 8, 1.0).unwrap();
            let u = ipm_velocity(&rho);
            let res = &u.curl() + &rho.dx();
            prop_assert!(res.max_abs() < 1e-13);
            prop_assert!(u.divergence().max_abs() < 1e-13);
        }
    }
}
