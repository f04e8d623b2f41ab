//! Two-dimensional Euler equations in vorticity form, linearized Couette evolution and
//! steady-state tooling.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::lagrangian::{FieldSampler, FlowMapSnapshot, Interpolation, ParticleSet, VelocitySource};
use crate::linalg::gmres;
use crate::spectral::{biot_savart, leray_project, gradient_to_physical, Grid2, SpectralField2, VectorField2};

#[derive(Clone, Debug, PartialEq)]
pub struct EulerState {
    pub omega: SpectralField2,
    pub t: f64,
}

impl EulerState {
    pub fn new(omega: SpectralField2, t: f64) -> Result<Self> {
        omega.require_mean_free()?;
        Ok(Self { omega, t })
    }

    pub fn grid(&self) -> &Grid2 {
        self.omega.grid()
    }

    pub fn velocity(&self) -> VectorField2 {
        biot_savart(&self.omega).expect("state vorticity is mean-free")
    }
}

/// `-u·∇f` from physical velocity samples, truncated by the 2/3 rule and with the
/// (round-off) mean removed.
pub fn advection_term(grid: &Grid2, u1: &[f64], u2: &[f64], f: &SpectralField2) -> SpectralField2 {
    let (fx, fy) = gradient_to_physical(f);
    let prod: Vec<f64> = (0..grid.len()).map(|k| -(u1[k] * fx[k] + u2[k] * fy[k])).collect();
    SpectralField2::from_physical(*grid, &prod).expect("grid-sized buffer").dealias().without_mean()
}

/// Right-hand side `-u·∇ω` of the vorticity equation.
pub fn euler_rhs(state: &EulerState) -> SpectralField2 {
    let (u1, u2) = state.velocity().to_physical();
    advection_term(state.grid(), &u1, &u2, &state.omega)
}

fn max_speed(u1: &[f64], u2: &[f64]) -> f64 {
    u1.iter().zip(u2).fold(0.0, |m, (a, b)| m.max((a * a + b * b).sqrt()))
}

fn cfl_limit(grid: &Grid2, cfl: f64, umax: f64) -> f64 {
    if umax > 0.0 {
        cfl * grid.dx().min(grid.dy()) / umax
    } else {
        f64::INFINITY
    }
}

fn check_cfl_number(cfl: f64) -> Result<()> {
    if !(cfl > 0.0 && cfl <= 0.5) {
        return Err(Error::Precondition(format!("CFL number {cfl} must lie in (0, 0.5]")));
    }
    Ok(())
}

fn all_finite(f: &SpectralField2) -> bool {
    f.coeffs().iter().all(|c| c.re.is_finite() && c.im.is_finite())
}

/// One classical RK4 step, refusing steps beyond `cfl · Δx / ‖u‖∞`.
pub fn step_rk4(state: &EulerState, dt: f64, cfl: f64) -> Result<EulerState> {
    check_cfl_number(cfl)?;
    let (u1, u2) = state.velocity().to_physical();
    let limit = cfl_limit(state.grid(), cfl, max_speed(&u1, &u2));
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!("dt = {dt} exceeds the CFL limit {limit}")));
    }
    let grid = *state.grid();
    let rhs = |w: &SpectralField2| {
        let (a, b) = biot_savart(w).expect("mean-free stage").to_physical();
        advection_term(&grid, &a, &b, w)
    };
    let w0 = &state.omega;
    let k1 = advection_term(&grid, &u1, &u2, w0);
    let stage = |k: &SpectralField2, h: f64| {
        let mut s = w0.clone();
        s.axpy(h, k);
        s
    };
    let k2 = rhs(&stage(&k1, 0.5 * dt));
    let k3 = rhs(&stage(&k2, 0.5 * dt));
    let k4 = rhs(&stage(&k3, dt));
    let mut w = w0.clone();
    w.axpy(dt / 6.0, &k1);
    w.axpy(dt / 3.0, &k2);
    w.axpy(dt / 3.0, &k3);
    w.axpy(dt / 6.0, &k4);
    if !all_finite(&w) {
        return Err(Error::NumericalBlowup { t: state.t + dt });
    }
    Ok(EulerState { omega: w.without_mean(), t: state.t + dt })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy: f64,
    pub enstrophy: f64,
    /// `∫ ω^p` for each configured power `p`.
    pub casimirs: Vec<f64>,
    pub omega_max: f64,
    pub bkm_integral: f64,
    pub palinstrophy: f64,
}

/// Diagnostics of a state; `bkm_integral` is supplied by the caller.
pub fn diagnostics(state: &EulerState, powers: &[u32], bkm_integral: f64) -> DiagnosticsRecord {
    let g = *state.grid();
    let area = g.cell_area();
    let u = state.velocity();
    let energy = 0.5 * u.l2_norm().powi(2);
    let enstrophy = state.omega.l2_norm().powi(2);
    let mut pal = 0.0;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k2 = g.kx(i).powi(2) + g.ky(j).powi(2);
            pal += k2 * state.omega.coeffs()[j * g.nx + i].norm_sqr();
        }
    }
    let w = state.omega.to_physical();
    let cell = g.dx() * g.dy();
    let casimirs = powers.iter().map(|&p| w.iter().map(|v| v.powi(p as i32)).sum::<f64>() * cell).collect();
    let omega_max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    DiagnosticsRecord { t: state.t, energy, enstrophy, casimirs, omega_max, bkm_integral, palinstrophy: area * pal }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSettings {
    pub cfl: f64,
    pub t_end: f64,
    /// Diagnostics are recorded every `diag_every` steps (and at the end).
    pub diag_every: usize,
    pub casimir_powers: Vec<u32>,
    pub dt_max: f64,
    pub interpolation: Interpolation,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            t_end: 1.0,
            diag_every: 10,
            casimir_powers: vec![2, 4],
            dt_max: f64::INFINITY,
            interpolation: Interpolation::Auto,
        }
    }
}

struct Stage {
    domega: SpectralField2,
    dtracers: Vec<SpectralField2>,
    dmarkers: Vec<[f64; 2]>,
    umax: f64,
}

/// Euler run carrying optional passive tracers and Lagrangian markers, all advanced by
/// the same RK4 stages.
#[derive(Clone, Debug)]
pub struct EulerRun {
    pub state: EulerState,
    pub tracers: Vec<SpectralField2>,
    pub markers: Option<ParticleSet>,
    pub settings: RunSettings,
    pub steps: usize,
    pub bkm: f64,
    pub diagnostics: Vec<DiagnosticsRecord>,
    omega_max: f64,
}

impl EulerRun {
    pub fn new(state: EulerState, settings: RunSettings) -> Result<Self> {
        check_cfl_number(settings.cfl)?;
        if settings.diag_every == 0 {
            return Err(Error::Precondition("diag_every must be positive".into()));
        }
        let state = EulerState { omega: state.omega.dealias(), t: state.t };
        let first = diagnostics(&state, &settings.casimir_powers, 0.0);
        Ok(Self {
            omega_max: first.omega_max,
            state,
            tracers: Vec::new(),
            markers: None,
            settings,
            steps: 0,
            bkm: 0.0,
            diagnostics: vec![first],
        })
    }

    pub fn with_tracers(mut self, tracers: Vec<SpectralField2>) -> Self {
        self.tracers = tracers.into_iter().map(|f| f.dealias()).collect();
        self
    }

    pub fn with_markers(mut self, markers: ParticleSet) -> Self {
        self.markers = Some(markers);
        self
    }

    fn evaluate(&self, omega: &SpectralField2, tracers: &[SpectralField2], markers: &[[f64; 2]]) -> Result<Stage> {
        let grid = *omega.grid();
        let u = biot_savart(omega)?;
        let (u1, u2) = u.to_physical();
        let umax = max_speed(&u1, &u2);
        let domega = advection_term(&grid, &u1, &u2, omega);
        let dtracers = tracers.iter().map(|f| advection_term(&grid, &u1, &u2, f)).collect();
        let dmarkers = if markers.is_empty() {
            Vec::new()
        } else {
            FieldSampler::with_physical(&u, u1, u2, self.settings.interpolation).velocities(markers, 0.0)
        };
        Ok(Stage { domega, dtracers, dmarkers, umax })
    }

    fn marker_lifts(&self) -> Vec<[f64; 2]> {
        self.markers.as_ref().map(|m| m.lifts.clone()).unwrap_or_default()
    }

    /// Largest admissible step at the current state.
    pub fn stable_dt(&self) -> Result<f64> {
        let (u1, u2) = self.state.velocity().to_physical();
        Ok(cfl_limit(self.state.grid(), self.settings.cfl, max_speed(&u1, &u2)).min(self.settings.dt_max))
    }

    /// Advances by `dt`, which must respect the CFL bound.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let k1 = self.evaluate(&self.state.omega, &self.tracers, &self.marker_lifts())?;
        let limit = cfl_limit(self.state.grid(), self.settings.cfl, k1.umax);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!("dt = {dt} exceeds the CFL limit {limit}")));
        }
        self.step_from(k1, dt)
    }

    fn step_from(&mut self, k1: Stage, dt: f64) -> Result<()> {
        let w0 = self.state.omega.clone();
        let f0 = self.tracers.clone();
        let m0 = self.marker_lifts();
        let combine = |k: &Stage, h: f64| {
            let mut w = w0.clone();
            w.axpy(h, &k.domega);
            let fs: Vec<SpectralField2> = f0
                .iter()
                .zip(&k.dtracers)
                .map(|(f, d)| {
                    let mut f = f.clone();
                    f.axpy(h, d);
                    f
                })
                .collect();
            let ms: Vec<[f64; 2]> =
                m0.iter().zip(&k.dmarkers).map(|(p, v)| [p[0] + h * v[0], p[1] + h * v[1]]).collect();
            (w.without_mean(), fs, ms)
        };
        let (w, f, m) = combine(&k1, 0.5 * dt);
        let k2 = self.evaluate(&w, &f, &m)?;
        let (w, f, m) = combine(&k2, 0.5 * dt);
        let k3 = self.evaluate(&w, &f, &m)?;
        let (w, f, m) = combine(&k3, dt);
        let k4 = self.evaluate(&w, &f, &m)?;

        let mut w = w0.clone();
        let weights = [dt / 6.0, dt / 3.0, dt / 3.0, dt / 6.0];
        let ks = [&k1, &k2, &k3, &k4];
        for (k, a) in ks.iter().zip(weights) {
            w.axpy(a, &k.domega);
        }
        let mut tracers = f0.clone();
        for (idx, f) in tracers.iter_mut().enumerate() {
            for (k, a) in ks.iter().zip(weights) {
                f.axpy(a, &k.dtracers[idx]);
            }
        }
        let mut lifts = m0.clone();
        for (idx, p) in lifts.iter_mut().enumerate() {
            for (k, a) in ks.iter().zip(weights) {
                p[0] += a * k.dmarkers[idx][0];
                p[1] += a * k.dmarkers[idx][1];
            }
        }
        let t_new = self.state.t + dt;
        if !all_finite(&w) || tracers.iter().any(|f| !all_finite(f)) {
            return Err(Error::NumericalBlowup { t: t_new });
        }
        self.state = EulerState { omega: w.without_mean(), t: t_new };
        self.tracers = tracers;
        if let Some(mk) = &self.markers {
            self.markers = Some(mk.with_lifts(lifts, t_new));
        }
        let new_max = self.state.omega.max_abs();
        self.bkm += 0.5 * dt * (self.omega_max + new_max);
        self.omega_max = new_max;
        self.steps += 1;
        if self.steps.is_multiple_of(self.settings.diag_every) {
            self.record();
        }
        Ok(())
    }

    fn record(&mut self) {
        if self.diagnostics.last().map(|d| d.t) != Some(self.state.t) {
            let d = diagnostics(&self.state, &self.settings.casimir_powers, self.bkm);
            self.diagnostics.push(d);
        }
    }

    /// Steps with the largest admissible `dt` until `t_target`, calling `on_step` after
    /// every step.
    pub fn advance_to(&mut self, t_target: f64, mut on_step: impl FnMut(&EulerRun) -> Result<()>) -> Result<()> {
        let eps = 1e-12 * t_target.abs().max(1.0);
        while self.state.t < t_target - eps {
            let k1 = self.evaluate(&self.state.omega, &self.tracers, &self.marker_lifts())?;
            let dt = cfl_limit(self.state.grid(), self.settings.cfl, k1.umax)
                .min(self.settings.dt_max)
                .min(t_target - self.state.t);
            if !dt.is_finite() {
                return Err(Error::Precondition("unbounded step: set dt_max for a motionless state".into()));
            }
            self.step_from(k1, dt)?;
            if (self.state.t - t_target).abs() <= eps {
                self.state.t = t_target;
                if let Some(m) = &mut self.markers {
                    m.t = t_target;
                }
            }
            on_step(self)?;
        }
        Ok(())
    }

    /// Runs to `settings.t_end` and records final diagnostics.
    pub fn run(&mut self) -> Result<()> {
        let t_end = self.settings.t_end;
        self.advance_to(t_end, |_| Ok(()))?;
        self.record();
        Ok(())
    }

    pub fn flow_map(&self) -> Result<FlowMapSnapshot> {
        let m = self.markers.clone().ok_or_else(|| Error::Precondition("run carries no markers".into()))?;
        FlowMapSnapshot::new(m)
    }
}

/// `‖ℙ((∇Φ_t)ᵀ (u(t)∘Φ_t)) − u₀‖_{L²}` on the marker lattice.
pub fn weber_residual(state: &EulerState, flowmap: &FlowMapSnapshot, u0: &VectorField2) -> Result<f64> {
    let tf = flowmap.t();
    if (tf - state.t).abs() > 1e-12 * state.t.abs().max(1.0) {
        return Err(Error::TimeMismatch { flowmap: tf, state: state.t });
    }
    let p = &flowmap.particles;
    let (mx, my) = p.lattice.ok_or_else(|| Error::Precondition("Weber residual needs a marker lattice".into()))?;
    let lattice = Grid2::with_lengths(mx, my, p.lx, p.ly)?;
    let g = state.grid();
    if g.lx != p.lx || g.ly != p.ly {
        return Err(Error::GridMismatch("markers and state live on different cells".into()));
    }
    let sampler = FieldSampler::new(&state.velocity(), Interpolation::Auto);
    let grads = p.lattice_gradient_spectral()?;
    let vel = sampler.velocities(&p.lifts, state.t);
    let mut w1 = Vec::with_capacity(p.len());
    let mut w2 = Vec::with_capacity(p.len());
    for (gr, v) in grads.iter().zip(&vel) {
        w1.push(gr[0][0] * v[0] + gr[1][0] * v[1]);
        w2.push(gr[0][1] * v[0] + gr[1][1] * v[1]);
    }
    let w = VectorField2::new(
        SpectralField2::from_physical(lattice, &w1)?,
        SpectralField2::from_physical(lattice, &w2)?,
    )?;
    let projected = leray_project(&w);
    let u0l = VectorField2::new(u0.u1.resample(lattice)?, u0.u2.resample(lattice)?)?;
    Ok((&projected - &u0l).l2_norm())
}

/// One Fourier mode `amplitude · e^{i(kx x + η₀ y)}` of the vorticity around Couette flow.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouetteMode {
    pub kx: f64,
    pub eta0: f64,
    pub amplitude: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouetteNorms {
    pub t: f64,
    pub u1_l2: f64,
    pub u2_l2: f64,
    pub omega_h1: f64,
    /// Contributions of the `kx = 0` modes, which are not transported.
    pub shear_u1_l2: f64,
    pub shear_omega_h1: f64,
}

/// Exact free-transport evolution `ω̂(k, η, t) = ω̂₀(k, η + kt)` of the linearization
/// around `(y, 0)`; norms are ℓ² sums over the listed modes.
pub fn couette_linear_evolve(modes: &[CouetteMode], t: f64) -> CouetteNorms {
    let mut n = CouetteNorms { t, u1_l2: 0.0, u2_l2: 0.0, omega_h1: 0.0, shear_u1_l2: 0.0, shear_omega_h1: 0.0 };
    for m in modes {
        let k = m.kx;
        let a2 = m.amplitude * m.amplitude;
        if k == 0.0 {
            let eta = m.eta0;
            n.shear_omega_h1 += (1.0 + eta * eta) * a2;
            if eta != 0.0 {
                n.shear_u1_l2 += a2 / (eta * eta);
            }
            continue;
        }
        let eta = m.eta0 - k * t;
        let d = k * k + eta * eta;
        n.u1_l2 += eta * eta * a2 / (d * d);
        n.u2_l2 += k * k * a2 / (d * d);
        n.omega_h1 += (1.0 + d) * a2;
    }
    n.u1_l2 = n.u1_l2.sqrt();
    n.u2_l2 = n.u2_l2.sqrt();
    n.omega_h1 = n.omega_h1.sqrt();
    n.shear_u1_l2 = n.shear_u1_l2.sqrt();
    n.shear_omega_h1 = n.shear_omega_h1.sqrt();
    n
}

/// L² norm of the dealiased Poisson bracket `{ψ, Δψ}`.
pub fn steady_residual(psi: &SpectralField2) -> f64 {
    let g = *psi.grid();
    let lap = psi.laplacian();
    let px = psi.dx().to_physical();
    let py = psi.dy().to_physical();
    let lx = lap.dx().to_physical();
    let ly = lap.dy().to_physical();
    let bracket: Vec<f64> = (0..g.len()).map(|k| px[k] * ly[k] - py[k] * lx[k]).collect();
    SpectralField2::from_physical(g, &bracket).expect("grid-sized buffer").dealias().l2_norm()
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Scalar nonlinearity `F` with its derivative.
#[derive(Clone)]
pub struct Nonlinearity {
    pub label: String,
    f: ScalarFn,
    fp: ScalarFn,
}

impl std::fmt::Debug for Nonlinearity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Nonlinearity({})", self.label)
    }
}

impl Nonlinearity {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        fp: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { label: label.into(), f: Arc::new(f), fp: Arc::new(fp) }
    }

    /// `F(s) = a s + b s³`.
    pub fn cubic(a: f64, b: f64) -> Self {
        Self::new(format!("{a}*s + {b}*s^3"), move |s| a * s + b * s * s * s, move |s| a + 3.0 * b * s * s)
    }

    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    pub fn deriv(&self, s: f64) -> f64 {
        (self.fp)(s)
    }
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub psi: SpectralField2,
    pub nonlinearity: Nonlinearity,
    /// `‖{ψ, Δψ}‖₂`.
    pub residual: f64,
    /// `‖P₀(Δψ − F(ψ))‖₂` at the returned iterate.
    pub newton_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub krylov_rtol: f64,
    pub krylov_restart: usize,
    pub krylov_max: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iterations: 40, krylov_rtol: 1e-3, krylov_restart: 60, krylov_max: 600 }
    }
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    for x in v.iter_mut() {
        *x -= m;
    }
}

fn grid_l2(grid: &Grid2, v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() * grid.dx() * grid.dy()).sqrt()
}

/// Solves `Δψ = F(ψ)` for mean-free `ψ` (the equation is imposed modulo constants).
pub fn semilinear_solve(nl: &Nonlinearity, guess: &SpectralField2, tol: f64) -> Result<SteadyState> {
    semilinear_solve_with(nl, guess, &NewtonOptions { tol, ..NewtonOptions::default() })
}

pub fn semilinear_solve_with(nl: &Nonlinearity, guess: &SpectralField2, opts: &NewtonOptions) -> Result<SteadyState> {
    let grid = *guess.grid();
    let mut psi = guess.without_mean().to_physical();
    let lap = |v: &[f64]| SpectralField2::from_physical(grid, v).expect("grid-sized").laplacian().to_physical();
    let residual_of = |psi: &[f64]| {
        let l = lap(psi);
        let mut r: Vec<f64> = l.iter().zip(psi).map(|(a, s)| a - nl.eval(*s)).collect();
        remove_mean(&mut r);
        r
    };
    let mut first = None;
    for it in 1..=opts.max_iterations {
        let r = residual_of(&psi);
        let rn = grid_l2(&grid, &r);
        if !rn.is_finite() {
            return Err(Error::Divergence { iterations: it, residual: rn });
        }
        let r0 = *first.get_or_insert(rn);
        if rn < opts.tol {
            let field = SpectralField2::from_physical(grid, &psi)?.without_mean();
            return Ok(SteadyState {
                residual: steady_residual(&field),
                psi: field,
                nonlinearity: nl.clone(),
                newton_residual: rn,
                iterations: it,
                converged: true,
            });
        }
        if rn > 1e8 * r0.max(1.0) {
            return Err(Error::Divergence { iterations: it, residual: rn });
        }
        let fp: Vec<f64> = psi.iter().map(|s| nl.deriv(*s)).collect();
        let apply_a = |v: &[f64]| {
            let l = lap(v);
            let mut out: Vec<f64> = l.iter().zip(v).zip(&fp).map(|((a, x), d)| a - d * x).collect();
            remove_mean(&mut out);
            out
        };
        let precond = |v: &[f64]| {
            let mut w = v.to_vec();
            remove_mean(&mut w);
            SpectralField2::from_physical(grid, &w)
                .expect("grid-sized")
                .without_mean()
                .inv_laplacian()
                .expect("mean removed")
                .to_physical()
        };
        let rhs: Vec<f64> = r.iter().map(|x| -x).collect();
        let sol = gmres(apply_a, precond, &rhs, opts.krylov_rtol, opts.krylov_restart, opts.krylov_max);
        if !sol.converged {
            return Err(Error::DegenerateLinearization(format!(
                "Krylov solve stalled at relative residual {:e} in Newton step {it}",
                sol.relative_residual
            )));
        }
        for (p, d) in psi.iter_mut().zip(&sol.solution) {
            *p += d;
        }
        remove_mean(&mut psi);
    }
    let r = residual_of(&psi);
    Err(Error::Divergence { iterations: opts.max_iterations, residual: grid_l2(&grid, &r) })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArnoldCertificate {
    pub certified: bool,
    pub min_fprime: f64,
    /// Perturbation size `ε` and the sup over the run of the H² distance, when a
    /// perturbation experiment was performed.
    pub eps: Option<f64>,
    pub h2_sup: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct ArnoldOptions {
    pub eps: f64,
    pub t_end: f64,
    pub seed: u64,
    pub kmax: usize,
    pub cfl: f64,
    pub dt_max: f64,
}

impl Default for ArnoldOptions {
    fn default() -> Self {
        Self { eps: 1e-3, t_end: 20.0, seed: 1, kmax: 4, cfl: 0.4, dt_max: 0.05 }
    }
}

fn min_fprime(steady: &SteadyState) -> f64 {
    let vals = steady.psi.to_physical();
    let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut m = vals.iter().map(|s| steady.nonlinearity.deriv(*s)).fold(f64::INFINITY, f64::min);
    for k in 0..=200 {
        let s = lo + (hi - lo) * k as f64 / 200.0;
        m = m.min(steady.nonlinearity.deriv(s));
    }
    m
}

/// Checks `inf F′ > 0` over the attained range of `ψ`.
pub fn arnold_certificate(steady: &SteadyState) -> ArnoldCertificate {
    let m = min_fprime(steady);
    ArnoldCertificate { certified: m > 0.0, min_fprime: m, eps: None, h2_sup: None }
}

/// [`arnold_certificate`] plus an Euler run from `ψ* + εη` with `‖η‖_{H²} = 1`, recording
/// `sup_t (Σ (1+|k|²)² |ψ̂(t) − ψ̂*|²)^½` (scaled by the cell area).
pub fn arnold_certificate_with_run(steady: &SteadyState, opts: &ArnoldOptions) -> Result<ArnoldCertificate> {
    let mut cert = arnold_certificate(steady);
    let grid = *steady.psi.grid();
    let star = steady.psi.without_mean();
    let eta = crate::presets::random_bandlimited(grid, opts.seed, opts.kmax, 1.0)?;
    let eta = eta.scaled(1.0 / eta.sobolev_norm(2.0));
    let mut psi0 = star.clone();
    psi0.axpy(opts.eps, &eta);
    let settings = RunSettings {
        cfl: opts.cfl,
        t_end: opts.t_end,
        diag_every: usize::MAX,
        casimir_powers: Vec::new(),
        dt_max: opts.dt_max,
        interpolation: Interpolation::Auto,
    };
    let mut run = EulerRun::new(EulerState::new(psi0.laplacian(), 0.0)?, settings)?;
    let dist = |w: &SpectralField2| -> Result<f64> { Ok((&w.inv_laplacian()? - &star).sobolev_norm(2.0)) };
    let mut sup = dist(&run.state.omega)?;
    run.advance_to(opts.t_end, |r| {
        sup = sup.max(dist(&r.state.omega)?);
        Ok(())
    })?;
    cert.eps = Some(opts.eps);
    cert.h2_sup = Some(sup);
    Ok(cert)
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelProbe {
    /// Ascending singular values on the constrained subspace.
    pub smallest_singular_values: Vec<f64>,
    pub sigma_max: f64,
    pub kernel_flagged: bool,
    /// Directions quotiented out: constants and, when nonzero, `∂xψ*`, `∂yψ*`.
    pub constrained_directions: usize,
}

/// Singular values of `Δ − F′(ψ*)` on mean-free fields modulo translations of `ψ*`.
pub fn kernel_probe(steady: &SteadyState, m: usize, tol: f64) -> Result<KernelProbe> {
    let grid = *steady.psi.grid();
    let n = grid.len();
    if n > 64 * 64 {
        return Err(Error::Precondition(format!("dense kernel probe limited to 64² points, got {n}")));
    }
    let psi = steady.psi.to_physical();
    let mut l = DMatrix::<f64>::zeros(n, n);
    let mut e = vec![0.0; n];
    for c in 0..n {
        e[c] = 1.0;
        let col = SpectralField2::from_physical(grid, &e)?.laplacian().to_physical();
        e[c] = 0.0;
        for (r, v) in col.iter().enumerate() {
            l[(r, c)] = *v;
        }
        l[(c, c)] -= steady.nonlinearity.deriv(psi[c]);
    }
    let l = 0.5 * (&l + l.transpose());

    let scale = steady.psi.l2_norm().max(1.0);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut candidates = vec![vec![1.0; n]];
    candidates.push(steady.psi.dx().to_physical());
    candidates.push(steady.psi.dy().to_physical());
    for mut v in candidates {
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= d * y;
            }
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv > 1e-8 * scale * (n as f64).sqrt() {
            basis.push(v.iter().map(|x| x / nv).collect());
        }
    }
    let q = DMatrix::from_fn(n, basis.len(), |r, c| basis[c][r]);
    let p = DMatrix::<f64>::identity(n, n) - &q * q.transpose();
    let mat = &p * l * &p;
    let eig = SymmetricEigen::new(mat);
    let mut sv: Vec<f64> = eig.eigenvalues.iter().map(|v| v.abs()).collect();
    sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let kept: Vec<f64> = sv.into_iter().skip(basis.len()).collect();
    let sigma_max = kept.last().copied().unwrap_or(0.0);
    let smallest: Vec<f64> = kept.iter().take(m.max(1)).copied().collect();
    Ok(KernelProbe {
        kernel_flagged: smallest[0] < tol * sigma_max,
        smallest_singular_values: smallest,
        sigma_max,
        constrained_directions: basis.len(),
    })
}

/// Couette velocity `(y, 0)` on the lifted strip.
pub fn couette_velocity(p: [f64; 2]) -> [f64; 2] {
    [p[1], 0.0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Grid2;
    use std::f64::consts::PI;

    /// `‖{ψ, Δψ}‖` for `ψ = cos x cos y + a cos 2x`: the bracket is `4a cos x sin 2x sin y`.
    fn bracket_norm_reference(a: f64) -> f64 {
        4.0 * a * PI / 2f64.sqrt()
    }

    fn g(n: usize) -> Grid2 {
        Grid2::square(n).unwrap()
    }

    #[test]
    fn steady_examples_have_zero_rhs() {
        for omega in [
            SpectralField2::from_fn(g(16), |_, y| y.cos()),
            SpectralField2::from_fn(g(16), |x, y| -2.0 * x.cos() * y.cos()),
        ] {
            let r = euler_rhs(&EulerState::new(omega, 0.0).unwrap());
            assert!(r.max_abs() < 1e-14);
        }
    }

    /// Direct evaluation of `-u·∇ω` from the Fourier series, with no FFTs.
    fn brute_force_rhs(omega: &SpectralField2) -> Vec<f64> {
        let grid = *omega.grid();
        let mut modes = Vec::new();
        for my in -(grid.ny as i64) / 2..grid.ny as i64 / 2 {
            for mx in -(grid.nx as i64) / 2..grid.nx as i64 / 2 {
                let c = omega.coeff(mx, my);
                if c.norm() > 0.0 && mx != -(grid.nx as i64) / 2 && my != -(grid.ny as i64) / 2 {
                    modes.push((mx as f64, my as f64, c));
                }
            }
        }
        grid.sample(|x, y| {
            let (mut u1, mut u2, mut wx, mut wy) = (0.0, 0.0, 0.0, 0.0);
            for &(kx, ky, c) in &modes {
                let e = crate::spectral::C64::from_polar(1.0, kx * x + ky * y) * c;
                let ik = crate::spectral::C64::new(0.0, 1.0);
                let k2 = kx * kx + ky * ky;
                u1 += (ik * ky * e / k2).re;
                u2 += (-ik * kx * e / k2).re;
                wx += (ik * kx * e).re;
                wy += (ik * ky * e).re;
            }
            -(u1 * wx + u2 * wy)
        })
    }

    #[test]
    fn rhs_matches_direct_summation() {
        let omega = SpectralField2::from_fn(g(16), |x, y| x.cos() + y.cos());
        let fast = euler_rhs(&EulerState::new(omega.clone(), 0.0).unwrap()).to_physical();
        let slow = brute_force_rhs(&omega);
        let diff = fast.iter().zip(&slow).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-12, "diff {diff}");
        let rand = crate::presets::random_bandlimited(g(32), 5, 4, 1.0).unwrap();
        let fast = euler_rhs(&EulerState::new(rand.clone(), 0.0).unwrap()).to_physical();
        let slow = brute_force_rhs(&rand);
        let diff = fast.iter().zip(&slow).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-12, "diff {diff}");
    }

    #[test]
    fn cfl_violation_is_rejected() {
        let omega = SpectralField2::from_fn(g(32), |x, y| -2.0 * x.cos() * y.cos());
        let s = EulerState::new(omega, 0.0).unwrap();
        assert!(matches!(step_rk4(&s, 1.0, 0.4), Err(Error::Precondition(_))));
        assert!(step_rk4(&s, 0.01, 0.4).is_ok());
        assert!(matches!(step_rk4(&s, 0.01, 0.9), Err(Error::Precondition(_))));
    }

    #[test]
    fn nonzero_mean_state_is_rejected() {
        let omega = SpectralField2::from_fn(g(8), |x, _| 1.0 + x.cos());
        assert!(EulerState::new(omega, 0.0).is_err());
    }

    #[test]
    fn bkm_integral_is_nondecreasing() {
        let omega = crate::presets::random_bandlimited(g(32), 2, 4, 1.0).unwrap();
        let settings = RunSettings { t_end: 1.0, diag_every: 2, ..RunSettings::default() };
        let mut run = EulerRun::new(EulerState::new(omega, 0.0).unwrap(), settings).unwrap();
        run.run().unwrap();
        let d = &run.diagnostics;
        assert!(d.len() > 2);
        assert!(d.windows(2).all(|w| w[1].bkm_integral >= w[0].bkm_integral));
        assert_eq!(d.last().unwrap().t, 1.0);
        let e0 = d[0].energy;
        assert!(d.iter().all(|r| ((r.energy - e0) / e0).abs() < 1e-6));
    }

    #[test]
    fn weber_residual_vanishes_at_time_zero_and_checks_times() {
        let omega = crate::presets::taylor_green(g(32), 0.1);
        let state = EulerState::new(omega, 0.0).unwrap();
        let u0 = state.velocity();
        let fm = FlowMapSnapshot::new(ParticleSet::lattice(16, 16, 2.0 * PI, 2.0 * PI).unwrap()).unwrap();
        assert!(weber_residual(&state, &fm, &u0).unwrap() < 1e-13);
        let later = EulerState { t: 0.5, ..state };
        assert!(matches!(weber_residual(&later, &fm, &u0), Err(Error::TimeMismatch { .. })));
    }

    #[test]
    fn couette_single_mode_ratios() {
        let m = [CouetteMode { kx: 1.0, eta0: 0.0, amplitude: 1.0 }];
        let n0 = couette_linear_evolve(&m, 0.0);
        for t in [0.5, 3.0, 40.0] {
            let n = couette_linear_evolve(&m, t);
            assert!((n.u2_l2 / n0.u2_l2 - 1.0 / (1.0 + t * t)).abs() < 1e-14);
            assert!((n.u1_l2 - t / (1.0 + t * t)).abs() < 1e-14);
        }
        let shear = [CouetteMode { kx: 0.0, eta0: 2.0, amplitude: 1.0 }];
        let a = couette_linear_evolve(&shear, 0.0);
        let b = couette_linear_evolve(&shear, 50.0);
        assert_eq!(a.shear_u1_l2, b.shear_u1_l2);
        assert_eq!(a.shear_omega_h1, b.shear_omega_h1);
    }

    #[test]
    fn steady_residual_examples() {
        let shear = SpectralField2::from_fn(g(16), |_, y| y.cos());
        let tg = SpectralField2::from_fn(g(16), |x, y| x.cos() * y.cos());
        assert!(steady_residual(&shear) < 1e-12);
        assert!(steady_residual(&tg) < 1e-12);
        let mixed = SpectralField2::from_fn(g(16), |x, y| x.cos() * y.cos() + 0.3 * (2.0 * x).cos());
        let r = steady_residual(&mixed);
        assert!((r - bracket_norm_reference(0.3)).abs() < 1e-12, "{r}");
    }

    #[test]
    fn semilinear_exact_guess_takes_one_iteration() {
        let guess = SpectralField2::from_fn(g(16), |x, y| x.cos() * y.cos());
        let s = semilinear_solve(&Nonlinearity::cubic(-2.0, 0.0), &guess, 1e-10).unwrap();
        assert_eq!(s.iterations, 1);
        assert!((&s.psi - &guess).l2_norm() < 1e-14);
    }

    #[test]
    fn semilinear_positive_slope_collapses_to_zero() {
        let guess = SpectralField2::from_fn(g(16), |x, y| x.cos() * y.cos());
        let s = semilinear_solve(&Nonlinearity::cubic(1.0, 0.0), &guess, 1e-10).unwrap();
        assert!(s.psi.l2_norm() < 1e-9);
        let cert = arnold_certificate(&s);
        assert!(cert.certified);
        assert!((cert.min_fprime - 1.0).abs() < 1e-12);
    }

    #[test]
    fn semilinear_cubic_converges_to_nontrivial_state() {
        let guess = SpectralField2::from_fn(g(16), |x, y| x.cos() * y.cos());
        let s = semilinear_solve(&Nonlinearity::cubic(-2.0, 0.1), &guess, 1e-10).unwrap();
        assert!(s.newton_residual < 1e-10);
        assert!(s.residual < 1e-9);

        let s = semilinear_solve(&Nonlinearity::cubic(-2.05, 0.1), &guess, 1e-10).unwrap();
        assert!(s.newton_residual < 1e-10);
        assert!(s.residual < 1e-9);
        assert!(s.psi.max_abs() > 0.5);
        assert!(!arnold_certificate(&s).certified);
    }

    #[test]
    fn kernel_probe_examples() {
        let zero = SteadyState {
            psi: SpectralField2::zeros(g(16)),
            nonlinearity: Nonlinearity::cubic(1.0, 0.0),
            residual: 0.0,
            newton_residual: 0.0,
            iterations: 1,
            converged: true,
        };
        let p = kernel_probe(&zero, 3, 1e-8).unwrap();
        assert!((p.smallest_singular_values[0] - 2.0).abs() < 1e-10);
        assert!(!p.kernel_flagged);

        let tg = SteadyState {
            psi: SpectralField2::from_fn(g(16), |x, y| x.cos() * y.cos()),
            nonlinearity: Nonlinearity::cubic(-2.0, 0.0),
            ..zero
        };
        let p = kernel_probe(&tg, 3, 1e-8).unwrap();
        assert!(p.kernel_flagged);
        assert!(p.smallest_singular_values[0] < 1e-12);
    }
}
