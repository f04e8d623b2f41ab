//! Flow maps on the torus: marker advection, lattice Jacobians, winding numbers,
//! passive scalars, period functions and transported-scalar gradient growth.

use crate::error::{Error, Result};
use crate::euler2d::{advection_term, EulerRun, EulerState, RunSettings};
use crate::spectral::{gradient_to_physical, Grid2, SpectralField2, VectorField2};

/// Markers with positions in the fundamental cell and lifts in the universal cover.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleSet {
    pub positions: Vec<[f64; 2]>,
    pub lifts: Vec<[f64; 2]>,
    /// Lifts at `t = 0`; these are also the Lagrangian labels.
    pub origins: Vec<[f64; 2]>,
    pub t: f64,
    pub lx: f64,
    pub ly: f64,
    /// `(mx, my)` when the labels form the lattice `(i lx/mx, j ly/my)`, index `j*mx + i`.
    pub lattice: Option<(usize, usize)>,
}

impl ParticleSet {
    pub fn from_points(points: &[[f64; 2]], lx: f64, ly: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Precondition("particle set must be nonempty".into()));
        }
        let mut set = Self {
            positions: Vec::new(),
            lifts: points.to_vec(),
            origins: points.to_vec(),
            t: 0.0,
            lx,
            ly,
            lattice: None,
        };
        set.rewrap();
        Ok(set)
    }

    pub fn lattice(mx: usize, my: usize, lx: f64, ly: f64) -> Result<Self> {
        if mx < 2 || my < 2 || mx * my < 4 {
            return Err(Error::Precondition(format!("marker lattice {mx}x{my} is too small")));
        }
        let (hx, hy) = (lx / mx as f64, ly / my as f64);
        let mut pts = Vec::with_capacity(mx * my);
        for j in 0..my {
            for i in 0..mx {
                pts.push([i as f64 * hx, j as f64 * hy]);
            }
        }
        let mut set = Self::from_points(&pts, lx, ly)?;
        set.lattice = Some((mx, my));
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.lifts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lifts.is_empty()
    }

    pub fn spacing(&self) -> Option<(f64, f64)> {
        self.lattice.map(|(mx, my)| (self.lx / mx as f64, self.ly / my as f64))
    }

    fn rewrap(&mut self) {
        let (lx, ly) = (self.lx, self.ly);
        self.positions = self.lifts.iter().map(|p| [p[0].rem_euclid(lx), p[1].rem_euclid(ly)]).collect();
    }

    pub fn with_lifts(&self, lifts: Vec<[f64; 2]>, t: f64) -> Self {
        let mut out = Self { lifts, t, positions: Vec::new(), ..self.clone() };
        out.rewrap();
        out
    }

    /// Displacement of the lifted map when a label moves by one period along each lattice
    /// axis, rounded to whole periods. For flow maps this is `(lx, 0)` and `(0, ly)`.
    fn seam_shifts(&self) -> [[f64; 2]; 2] {
        let (mx, my) = self.lattice.expect("lattice particle set");
        let at = |i: usize, j: usize| self.lifts[j * mx + i];
        let round = |v: [f64; 2]| [(v[0] / self.lx).round() * self.lx, (v[1] / self.ly).round() * self.ly];
        let extrapolate = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| [2.0 * a[0] - b[0] - c[0], 2.0 * a[1] - b[1] - c[1]];
        [
            round(extrapolate(at(mx - 1, 0), at(mx - 2, 0), at(0, 0))),
            round(extrapolate(at(0, my - 1), at(0, my - 2), at(0, 0))),
        ]
    }

    /// Lift of lattice neighbour `(i + di, j + dj)`, continued across the seams.
    fn lattice_lift(&self, shifts: &[[f64; 2]; 2], i: usize, j: usize, di: i64, dj: i64) -> [f64; 2] {
        let (mx, my) = self.lattice.expect("lattice particle set");
        let ii = i as i64 + di;
        let jj = j as i64 + dj;
        let (qi, ri) = (ii.div_euclid(mx as i64) as f64, ii.rem_euclid(mx as i64) as usize);
        let (qj, rj) = (jj.div_euclid(my as i64) as f64, jj.rem_euclid(my as i64) as usize);
        let p = self.lifts[rj * mx + ri];
        [p[0] + qi * shifts[0][0] + qj * shifts[1][0], p[1] + qi * shifts[0][1] + qj * shifts[1][1]]
    }

    /// Flow-map gradient `∂Φ_a/∂X_b` at every lattice marker by central differences
    /// of order 2 or 4.
    pub fn lattice_gradient(&self, order: usize) -> Result<Vec<[[f64; 2]; 2]>> {
        let (mx, my) = self
            .lattice
            .ok_or_else(|| Error::Precondition("flow-map gradient needs a marker lattice".into()))?;
        let (hx, hy) = self.spacing().unwrap();
        let stencil: &[(i64, f64)] = match order {
            2 => &[(1, 0.5), (-1, -0.5)],
            4 => &[(2, -1.0 / 12.0), (1, 8.0 / 12.0), (-1, -8.0 / 12.0), (-2, 1.0 / 12.0)],
            _ => return Err(Error::Precondition(format!("unsupported difference order {order}"))),
        };
        let shifts = self.seam_shifts();
        let mut out = Vec::with_capacity(mx * my);
        for j in 0..my {
            for i in 0..mx {
                let mut g = [[0.0; 2]; 2];
                for &(o, w) in stencil {
                    let px = self.lattice_lift(&shifts, i, j, o, 0);
                    let py = self.lattice_lift(&shifts, i, j, 0, o);
                    for a in 0..2 {
                        g[a][0] += w * px[a] / hx;
                        g[a][1] += w * py[a] / hy;
                    }
                }
                out.push(g);
            }
        }
        Ok(out)
    }
}

impl ParticleSet {
    /// Flow-map gradient by spectral differentiation of the periodic part of the lifted
    /// map, `Φ(X) - S₁X₁/lx - S₂X₂/ly`, where `S` are the seam shifts.
    pub fn lattice_gradient_spectral(&self) -> Result<Vec<[[f64; 2]; 2]>> {
        let (mx, my) = self
            .lattice
            .ok_or_else(|| Error::Precondition("flow-map gradient needs a marker lattice".into()))?;
        let grid = Grid2::with_lengths(mx, my, self.lx, self.ly)?;
        let shifts = self.seam_shifts();
        let mut parts = [Vec::with_capacity(mx * my), Vec::with_capacity(mx * my)];
        for j in 0..my {
            for i in 0..mx {
                let p = self.lifts[j * mx + i];
                let (a, b) = (i as f64 / mx as f64, j as f64 / my as f64);
                for (c, part) in parts.iter_mut().enumerate() {
                    part.push(p[c] - a * shifts[0][c] - b * shifts[1][c]);
                }
            }
        }
        let (d0x, d0y) = gradient_to_physical(&SpectralField2::from_physical(grid, &parts[0])?);
        let (d1x, d1y) = gradient_to_physical(&SpectralField2::from_physical(grid, &parts[1])?);
        Ok((0..mx * my)
            .map(|k| {
                [
                    [d0x[k] + shifts[0][0] / self.lx, d0y[k] + shifts[1][0] / self.ly],
                    [d1x[k] + shifts[0][1] / self.lx, d1y[k] + shifts[1][1] / self.ly],
                ]
            })
            .collect())
    }
}

/// Velocity evaluated at lifted points; periodic sources wrap internally.
pub trait VelocitySource {
    fn velocity(&self, p: [f64; 2], t: f64) -> [f64; 2];

    fn velocities(&self, pts: &[[f64; 2]], t: f64) -> Vec<[f64; 2]> {
        pts.iter().map(|p| self.velocity(*p, t)).collect()
    }
}

/// Closure-backed velocity `u(p, t)`.
pub struct FnVelocity<F>(pub F);

impl<F: Fn([f64; 2], f64) -> [f64; 2]> VelocitySource for FnVelocity<F> {
    fn velocity(&self, p: [f64; 2], t: f64) -> [f64; 2] {
        (self.0)(p, t)
    }
}

/// How point velocities are obtained from a gridded field.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpolation {
    /// Direct summation for grids with at most 64² modes, six-point Lagrange otherwise.
    Auto,
    Spectral,
    Lagrange6,
    Bilinear,
}

impl Interpolation {
    pub fn resolve(self, grid: &Grid2) -> Self {
        match self {
            Interpolation::Auto if grid.len() <= 64 * 64 => Interpolation::Spectral,
            Interpolation::Auto => Interpolation::Lagrange6,
            other => other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Interpolation::Auto => "auto",
            Interpolation::Spectral => "spectral",
            Interpolation::Lagrange6 => "lagrange6",
            Interpolation::Bilinear => "bilinear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "auto" => Interpolation::Auto,
            "spectral" => Interpolation::Spectral,
            "lagrange6" => Interpolation::Lagrange6,
            "bilinear" => Interpolation::Bilinear,
            _ => return None,
        })
    }
}

fn lagrange6(s: f64) -> (i64, [f64; 6]) {
    let base = s.floor();
    let f = s - base;
    let mut w = [0.0; 6];
    for (k, wk) in w.iter_mut().enumerate() {
        let ok = k as f64 - 2.0;
        let mut num = 1.0;
        let mut den = 1.0;
        for m in 0..6 {
            if m != k {
                let om = m as f64 - 2.0;
                num *= f - om;
                den *= ok - om;
            }
        }
        *wk = num / den;
    }
    (base as i64 - 2, w)
}

/// Physical samples of a periodic field with point interpolation.
#[derive(Clone, Debug)]
pub struct GridInterpolant {
    grid: Grid2,
    values: Vec<f64>,
    method: Interpolation,
}

impl GridInterpolant {
    pub fn new(grid: Grid2, values: Vec<f64>, method: Interpolation) -> Self {
        Self { grid, values, method }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let g = &self.grid;
        let (nx, ny) = (g.nx as i64, g.ny as i64);
        let sx = x.rem_euclid(g.lx) / g.dx();
        let sy = y.rem_euclid(g.ly) / g.dy();
        let at = |i: i64, j: i64| self.values[(j.rem_euclid(ny) * nx + i.rem_euclid(nx)) as usize];
        match self.method {
            Interpolation::Bilinear => {
                let (i0, j0) = (sx.floor(), sy.floor());
                let (fx, fy) = (sx - i0, sy - j0);
                let (i0, j0) = (i0 as i64, j0 as i64);
                (1.0 - fy) * ((1.0 - fx) * at(i0, j0) + fx * at(i0 + 1, j0))
                    + fy * ((1.0 - fx) * at(i0, j0 + 1) + fx * at(i0 + 1, j0 + 1))
            }
            _ => {
                let (bi, wx) = lagrange6(sx);
                let (bj, wy) = lagrange6(sy);
                let mut acc = 0.0;
                for (b, wyb) in wy.iter().enumerate() {
                    let mut row = 0.0;
                    for (a, wxa) in wx.iter().enumerate() {
                        row += wxa * at(bi + a as i64, bj + b as i64);
                    }
                    acc += wyb * row;
                }
                acc
            }
        }
    }
}

/// Frozen velocity field sampled either spectrally or by grid interpolation.
#[derive(Clone, Debug)]
pub enum FieldSampler {
    Spectral(VectorField2),
    Grid(GridInterpolant, GridInterpolant),
}

impl FieldSampler {
    pub fn new(u: &VectorField2, method: Interpolation) -> Self {
        let (u1, u2) = u.to_physical();
        Self::with_physical(u, u1, u2, method)
    }

    /// Reuses already computed physical samples of `u`.
    pub fn with_physical(u: &VectorField2, u1: Vec<f64>, u2: Vec<f64>, method: Interpolation) -> Self {
        let g = *u.grid();
        match method.resolve(&g) {
            Interpolation::Spectral => FieldSampler::Spectral(u.clone()),
            m => FieldSampler::Grid(GridInterpolant::new(g, u1, m), GridInterpolant::new(g, u2, m)),
        }
    }
}

impl VelocitySource for FieldSampler {
    fn velocity(&self, p: [f64; 2], _t: f64) -> [f64; 2] {
        match self {
            FieldSampler::Spectral(u) => u.eval_at(p[0], p[1]),
            FieldSampler::Grid(a, b) => [a.eval(p[0], p[1]), b.eval(p[0], p[1])],
        }
    }
}

fn rk4_point(src: &dyn VelocitySource, p: [f64; 2], t: f64, dt: f64) -> [f64; 2] {
    let k1 = src.velocity(p, t);
    let k2 = src.velocity([p[0] + 0.5 * dt * k1[0], p[1] + 0.5 * dt * k1[1]], t + 0.5 * dt);
    let k3 = src.velocity([p[0] + 0.5 * dt * k2[0], p[1] + 0.5 * dt * k2[1]], t + 0.5 * dt);
    let k4 = src.velocity([p[0] + dt * k3[0], p[1] + dt * k3[1]], t + dt);
    [
        p[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        p[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// One RK4 step of `dΦ/dt = u(Φ, t)` on the lifts.
pub fn advect(particles: &ParticleSet, source: &dyn VelocitySource, dt: f64) -> ParticleSet {
    let lifts = particles.lifts.iter().map(|p| rk4_point(source, *p, particles.t, dt)).collect();
    particles.with_lifts(lifts, particles.t + dt)
}

/// Advects to `t_end` with steps no longer than `dt`.
pub fn advect_until(particles: &ParticleSet, source: &dyn VelocitySource, dt: f64, t_end: f64) -> ParticleSet {
    let mut p = particles.clone();
    while p.t < t_end - 1e-12 * t_end.abs().max(1.0) {
        let h = dt.min(t_end - p.t);
        p = advect(&p, source, h);
    }
    p
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowMapSnapshot {
    pub particles: ParticleSet,
    pub h: f64,
}

impl FlowMapSnapshot {
    pub fn new(particles: ParticleSet) -> Result<Self> {
        let (hx, _) = particles
            .spacing()
            .ok_or_else(|| Error::Precondition("flow map snapshots need a marker lattice".into()))?;
        Ok(Self { particles, h: hx })
    }

    pub fn t(&self) -> f64 {
        self.particles.t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JacobianStats {
    pub max_abs_dev_from_1: f64,
    pub grad_norm_inf: f64,
}

fn spectral_norm2(g: &[[f64; 2]; 2]) -> f64 {
    let s = g[0][0].powi(2) + g[0][1].powi(2) + g[1][0].powi(2) + g[1][1].powi(2);
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    (0.5 * (s + (s * s - 4.0 * det * det).max(0.0).sqrt())).sqrt()
}

/// Determinant deviation and `λ(t) = max |∇Φ|` (operator norm) on the marker lattice.
pub fn jacobian_det(flowmap: &FlowMapSnapshot) -> Result<JacobianStats> {
    let grads = flowmap.particles.lattice_gradient(2)?;
    let mut dev: f64 = 0.0;
    let mut lam: f64 = 0.0;
    for (idx, g) in grads.iter().enumerate() {
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        if det <= 0.0 || !det.is_finite() {
            return Err(Error::LatticeFolding { index: idx, det });
        }
        dev = dev.max((det - 1.0).abs());
        lam = lam.max(spectral_norm2(g));
    }
    Ok(JacobianStats { max_abs_dev_from_1: dev, grad_norm_inf: lam })
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindingRecord {
    pub t: f64,
    /// Real-valued winding numbers in the x-direction.
    pub n: Vec<f64>,
    pub spread: f64,
}

impl WindingRecord {
    pub fn integer_winding(&self) -> Vec<i64> {
        self.n.iter().map(|v| v.floor() as i64).collect()
    }
}

pub fn winding(particles: &ParticleSet) -> WindingRecord {
    let n: Vec<f64> = particles
        .lifts
        .iter()
        .zip(&particles.origins)
        .map(|(p, o)| (p[0] - o[0]) / particles.lx)
        .collect();
    let hi = n.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = n.iter().cloned().fold(f64::INFINITY, f64::min);
    WindingRecord { t: particles.t, spread: hi - lo, n }
}

/// Winding records every `every` time units up to `t_end`, starting at the initial set.
pub fn twisting_series(
    particles: &ParticleSet,
    source: &dyn VelocitySource,
    dt: f64,
    t_end: f64,
    every: f64,
) -> (Vec<WindingRecord>, ParticleSet) {
    let mut p = particles.clone();
    let mut out = vec![winding(&p)];
    let mut next = p.t + every;
    while next <= t_end + 1e-9 * every {
        p = advect_until(&p, source, dt, next.min(t_end));
        out.push(winding(&p));
        next += every;
    }
    (out, p)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityMetrics {
    pub t: f64,
    pub m1: f64,
    pub m2: f64,
}

/// Root-mean-square over markers of `u*(Φ₂) - u*(y)` and `Φ̃₁ - t u*(Φ̃₂) - x₁`.
pub fn lagrangian_stability_metrics(particles: &ParticleSet, ustar: &dyn Fn(f64) -> f64) -> StabilityMetrics {
    let t = particles.t;
    let n = particles.len() as f64;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for (p, o) in particles.lifts.iter().zip(&particles.origins) {
        let d1 = ustar(p[1]) - ustar(o[1]);
        let d2 = p[0] - t * ustar(p[1]) - o[0];
        s1 += d1 * d1;
        s2 += d2 * d2;
    }
    StabilityMetrics { t, m1: (s1 / n).sqrt(), m2: (s2 / n).sqrt() }
}

#[derive(Clone, Debug)]
pub struct PassiveOptions {
    pub cfl: f64,
    pub dt_max: f64,
    pub sample_every: f64,
    /// Physical samples of the test functions `φ`.
    pub tests: Vec<Vec<f64>>,
    /// Keep the field at every sample time.
    pub keep_fields: bool,
}

impl Default for PassiveOptions {
    fn default() -> Self {
        Self { cfl: 0.4, dt_max: f64::INFINITY, sample_every: 1.0, tests: Vec::new(), keep_fields: false }
    }
}

#[derive(Clone, Debug)]
pub struct PassiveRun {
    pub times: Vec<f64>,
    /// `pairings[s][k] = (u·∇f(t_s), φ_k)`.
    pub pairings: Vec<Vec<f64>>,
    pub fields: Vec<(f64, SpectralField2)>,
    pub final_field: SpectralField2,
}

fn pairings(grid: &Grid2, u1: &[f64], u2: &[f64], f: &SpectralField2, tests: &[Vec<f64>]) -> Vec<f64> {
    let (fx, fy) = gradient_to_physical(f);
    let w = grid.dx() * grid.dy();
    tests
        .iter()
        .map(|phi| (0..grid.len()).map(|k| (u1[k] * fx[k] + u2[k] * fy[k]) * phi[k]).sum::<f64>() * w)
        .collect()
}

/// Spectral RK4 solve of `∂t f + u·∇f = 0` for a steady velocity `u`.
pub fn passive_scalar_evolve(
    u: &VectorField2,
    f0: &SpectralField2,
    t_end: f64,
    opts: &PassiveOptions,
) -> Result<PassiveRun> {
    u.u1.same_grid(f0)?;
    let grid = *f0.grid();
    let (u1, u2) = u.to_physical();
    let umax = u1.iter().zip(&u2).fold(0.0f64, |m, (a, b)| m.max((a * a + b * b).sqrt()));
    let h = grid.dx().min(grid.dy());
    let dt_cfl = if umax > 0.0 { opts.cfl * h / umax } else { f64::INFINITY };
    let dt_base = dt_cfl.min(opts.dt_max).min(opts.sample_every);
    let rhs = |f: &SpectralField2| advection_term(&grid, &u1, &u2, f);

    let mut f = f0.dealias();
    let mut t = 0.0;
    let mut run = PassiveRun { times: vec![0.0], pairings: vec![pairings(&grid, &u1, &u2, &f, &opts.tests)], fields: Vec::new(), final_field: f.clone() };
    if opts.keep_fields {
        run.fields.push((0.0, f.clone()));
    }
    let mut next_sample = opts.sample_every;
    while t < t_end - 1e-12 * t_end.max(1.0) {
        let target = next_sample.min(t_end);
        let dt = dt_base.min(target - t);
        let k1 = rhs(&f);
        let mut s = f.clone();
        s.axpy(0.5 * dt, &k1);
        let k2 = rhs(&s);
        let mut s = f.clone();
        s.axpy(0.5 * dt, &k2);
        let k3 = rhs(&s);
        let mut s = f.clone();
        s.axpy(dt, &k3);
        let k4 = rhs(&s);
        f.axpy(dt / 6.0, &k1);
        f.axpy(dt / 3.0, &k2);
        f.axpy(dt / 3.0, &k3);
        f.axpy(dt / 6.0, &k4);
        t += dt;
        if (t - target).abs() <= 1e-12 * target.max(1.0) {
            t = target;
            if f.coeffs().iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::NumericalBlowup { t });
            }
            run.times.push(t);
            run.pairings.push(pairings(&grid, &u1, &u2, &f, &opts.tests));
            if opts.keep_fields {
                run.fields.push((t, f.clone()));
            }
            if target >= next_sample {
                next_sample += opts.sample_every;
            }
        }
    }
    run.final_field = f;
    Ok(run)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Period {
    Closed(f64),
    NonReturning,
}

#[derive(Clone, Copy, Debug)]
pub struct PeriodOptions {
    pub dt: f64,
    pub t_max: f64,
    /// Distance the trajectory must travel from its seed before a return counts.
    pub leave_radius: f64,
    /// Closest-approach distance accepted as a return.
    pub return_tol: f64,
    pub lx: f64,
    pub ly: f64,
}

impl Default for PeriodOptions {
    fn default() -> Self {
        let tau = 2.0 * std::f64::consts::PI;
        Self { dt: 1e-3, t_max: 200.0, leave_radius: 1e-2, return_tol: 5e-3, lx: tau, ly: tau }
    }
}

fn wrapped_offset(p: [f64; 2], q: [f64; 2], lx: f64, ly: f64) -> [f64; 2] {
    let d = |a: f64, l: f64| a - l * (a / l).round();
    [d(p[0] - q[0], lx), d(p[1] - q[1], ly)]
}

/// First-return times of seeds under a steady velocity.
pub fn period_function(u: &dyn VelocitySource, seeds: &[[f64; 2]], opts: &PeriodOptions) -> Vec<Period> {
    seeds.iter().map(|s| single_period(u, *s, opts)).collect()
}

fn single_period(u: &dyn VelocitySource, seed: [f64; 2], o: &PeriodOptions) -> Period {
    let dist = |p: [f64; 2]| {
        let d = wrapped_offset(p, seed, o.lx, o.ly);
        d[0].hypot(d[1])
    };
    let mut p = seed;
    let mut t = 0.0;
    let mut left = false;
    let mut prev = (p, 0.0, 0.0);
    let mut prev_prev_d = f64::INFINITY;
    while t < o.t_max {
        let q = rk4_point(u, p, t, o.dt);
        t += o.dt;
        let d = dist(q);
        if !left && d > o.leave_radius {
            left = true;
        }
        if left && prev.2 < o.return_tol && d > prev.2 && prev_prev_d >= prev.2 {
            return Period::Closed(refine_return(u, prev.0, prev.1, seed, o));
        }
        prev_prev_d = prev.2;
        prev = (q, t, d);
        p = q;
    }
    Period::NonReturning
}

fn refine_return(u: &dyn VelocitySource, mut p: [f64; 2], mut t: f64, seed: [f64; 2], o: &PeriodOptions) -> f64 {
    for _ in 0..4 {
        let v = u.velocity(p, t);
        let speed2 = v[0] * v[0] + v[1] * v[1];
        if speed2 == 0.0 {
            break;
        }
        let d = wrapped_offset(p, seed, o.lx, o.ly);
        let tau = -(d[0] * v[0] + d[1] * v[1]) / speed2;
        p = rk4_point(u, p, t, tau);
        t += tau;
    }
    t
}

#[derive(Clone, Debug)]
pub struct GradientGrowth {
    pub times: Vec<f64>,
    /// `lambda[s][k] = max |∇g_k(t_s)|` on the grid.
    pub lambda: Vec<Vec<f64>>,
}

impl GradientGrowth {
    /// Exponential rate fitted to the series of scalar `k`.
    pub fn exponential_rate(&self, k: usize) -> (f64, f64) {
        let ys: Vec<f64> = self.lambda.iter().map(|l| l[k]).collect();
        crate::fit::exponential_fit(&self.times, &ys)
    }
}

fn max_gradient(f: &SpectralField2) -> f64 {
    let gx = f.dx().to_physical();
    let gy = f.dy().to_physical();
    gx.iter().zip(&gy).fold(0.0, |m, (a, b)| m.max((a * a + b * b).sqrt()))
}

/// Evolves the scalars `g0_list` with the velocity of the Euler run started from
/// `omega0`, recording their largest gradients every `sample_every`.
pub fn gradient_growth(
    omega0: &SpectralField2,
    g0_list: &[SpectralField2],
    settings: RunSettings,
    sample_every: f64,
) -> Result<GradientGrowth> {
    let t_end = settings.t_end;
    let mut run = EulerRun::new(EulerState::new(omega0.clone(), 0.0)?, settings)?.with_tracers(g0_list.to_vec());
    let mut out = GradientGrowth { times: vec![0.0], lambda: vec![run.tracers.iter().map(max_gradient).collect()] };
    let mut next = sample_every;
    while next <= t_end + 1e-9 * sample_every {
        run.advance_to(next.min(t_end), |_| Ok(()))?;
        out.times.push(run.state.t);
        out.lambda.push(run.tracers.iter().map(max_gradient).collect());
        next += sample_every;
    }
    Ok(out)
}
